use artc_core::simgen::{gen_dataset, Distribution, Layout, SimDesign};
use artc_core::DesignKind;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{Cauchy, ContinuousCDF, Exp, Laplace, LogNormal, Normal, StudentsT};

const DRAWS: usize = 40_000;

/// Empirical CDF at the reference 10/25/50/75/90% quantiles must be within
/// 0.01 of the nominal level (about four standard errors at this size).
fn check_quantiles<D: ContinuousCDF<f64, f64>>(dist: Distribution, location: f64, reference: D) {
    let mut rng = ChaCha8Rng::seed_from_u64(dist as u64 + 11);
    let draws: Vec<f64> = (0..DRAWS)
        .map(|_| dist.sample(location, 1.0, &mut rng).unwrap())
        .collect();
    for q in [0.1, 0.25, 0.5, 0.75, 0.9] {
        let x = reference.inverse_cdf(q);
        let ecdf = draws.iter().filter(|v| **v <= x).count() as f64 / DRAWS as f64;
        assert!((ecdf - q).abs() < 0.01, "{dist}: F({x}) = {ecdf}, expected {q}");
    }
}

#[test]
fn samplers_match_reference_distributions() {
    check_quantiles(Distribution::Normal, 0.3, Normal::new(0.3, 1.0).unwrap());
    check_quantiles(Distribution::Lognormal, 0.3, LogNormal::new(0.3, 1.0).unwrap());
    check_quantiles(Distribution::Exponential, 2.0, Exp::new(0.5).unwrap());
    check_quantiles(Distribution::Cauchy, 0.3, Cauchy::new(0.3, 1.0).unwrap());
    check_quantiles(Distribution::T3, 0.3, StudentsT::new(0.3, 1.0, 3.0).unwrap());
    check_quantiles(Distribution::DoubleExponential, 0.3, Laplace::new(0.3, 1.0).unwrap());
}

#[test]
fn null_between_normal_has_zero_grand_mean() {
    let design = SimDesign {
        layout: Layout::TwoByTwo,
        distribution: Distribution::Normal,
        n_per_condition: 25_000,
        design_kind: DesignKind::Between,
        null_true: true,
    };
    let (ds, recipe) = gen_dataset(&design, 3, 0).unwrap();
    assert_eq!(ds.n_rows(), 100_000);
    assert!(recipe.latent_locations.iter().all(|&m| m == 0.0));
    let mean = ds.response().iter().sum::<f64>() / ds.n_rows() as f64;
    assert!(mean.abs() < 0.02, "grand mean {mean}");
}

#[test]
fn exponential_locations_use_the_log_link() {
    let design = SimDesign {
        layout: Layout::ThreeByThree,
        distribution: Distribution::Exponential,
        n_per_condition: 8,
        design_kind: DesignKind::Within,
        null_true: false,
    };
    let (ds, recipe) = gen_dataset(&design, 9, 4).unwrap();
    for (c, row) in recipe.locations.iter().enumerate() {
        for (s, loc) in row.iter().enumerate() {
            let latent = recipe.latent_locations[c] + recipe.subject_offsets[s];
            assert_eq!(*loc, latent.exp());
        }
    }
    assert!(ds.response().iter().all(|y| *y > 0.0));
}

#[test]
fn within_layout_has_one_row_per_subject_and_condition() {
    let design = SimDesign {
        layout: Layout::TwoByTwoByTwo,
        distribution: Distribution::T3,
        n_per_condition: 16,
        design_kind: DesignKind::Within,
        null_true: true,
    };
    let (ds, _) = gen_dataset(&design, 1, 1).unwrap();
    assert_eq!(ds.n_rows(), 16 * 8);
    assert_eq!(ds.n_subjects(), 16);
    for rows in ds.condition_index().values() {
        let mut subjects: Vec<usize> = rows.iter().map(|&r| ds.subjects().unwrap().codes[r]).collect();
        subjects.sort_unstable();
        assert_eq!(subjects, (0..16).collect::<Vec<_>>());
    }
}
