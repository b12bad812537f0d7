//! Synthetic factorial datasets for Type I error and power studies.
//!
//! Generation runs in four steps per dataset:
//!
//! 1. A latent location per condition: 0 for null datasets, otherwise an
//!    independent standard normal draw. Scale is always 1.
//! 2. Within-subjects only: one subject-offset SD drawn uniformly from
//!    {0.1, 0.5, 0.9} for the whole dataset, then one normal offset per
//!    subject, added to that subject's latent locations.
//! 3. The inverse link maps latent to distribution location: identity for
//!    all distributions except exponential, which uses `exp`.
//! 4. One response per (condition, subject) from the population
//!    distribution; the exponential uses rate `1 / location`.

use std::fmt;
use std::str::FromStr;

use rand::distr::Open01;
use rand::Rng;
use rand_distr::{Cauchy, Distribution as _, Exp, StandardNormal, StudentT};

use crate::data::{all_conditions, Dataset, DesignKind, FactorSpec, Subjects};
use crate::error::{Error, Result};
use crate::rng::{fnv1a, Purpose, SeededRng};

pub const SUBJECT_SDS: [f64; 3] = [0.1, 0.5, 0.9];
pub const SAMPLE_SIZES: [usize; 5] = [8, 16, 24, 32, 40];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Layout {
    TwoByTwo,
    ThreeByThree,
    TwoByTwoByTwo,
}

impl Layout {
    pub const ALL: [Layout; 3] = [Layout::TwoByTwo, Layout::ThreeByThree, Layout::TwoByTwoByTwo];

    pub fn n_levels(&self) -> &'static [usize] {
        match self {
            Layout::TwoByTwo => &[2, 2],
            Layout::ThreeByThree => &[3, 3],
            Layout::TwoByTwoByTwo => &[2, 2, 2],
        }
    }

    pub fn n_conditions(&self) -> usize {
        self.n_levels().iter().product()
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Layout::TwoByTwo => "2x2",
            Layout::ThreeByThree => "3x3",
            Layout::TwoByTwoByTwo => "2x2x2",
        }
    }

    /// Factors `A`, `B`, `C` with levels `A1`, `A2`, ...
    pub fn factors(&self) -> Vec<FactorSpec> {
        self.n_levels()
            .iter()
            .enumerate()
            .map(|(i, &k)| {
                let name = char::from(b'A' + i as u8).to_string();
                let levels = (1..=k).map(|l| format!("{name}{l}")).collect();
                FactorSpec::new(name, levels).expect("distinct labels")
            })
            .collect()
    }
}

impl fmt::Display for Layout {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Layout {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('×', "x").as_str() {
            "2x2" => Ok(Layout::TwoByTwo),
            "3x3" => Ok(Layout::ThreeByThree),
            "2x2x2" => Ok(Layout::TwoByTwoByTwo),
            other => Err(Error::InvalidArgument(format!("unknown layout {other}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Distribution {
    Normal,
    Lognormal,
    Exponential,
    Cauchy,
    T3,
    DoubleExponential,
}

impl Distribution {
    pub const ALL: [Distribution; 6] = [
        Distribution::Normal,
        Distribution::Lognormal,
        Distribution::Exponential,
        Distribution::Cauchy,
        Distribution::T3,
        Distribution::DoubleExponential,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Distribution::Normal => "normal",
            Distribution::Lognormal => "lognormal",
            Distribution::Exponential => "exponential",
            Distribution::Cauchy => "cauchy",
            Distribution::T3 => "t3",
            Distribution::DoubleExponential => "double_exponential",
        }
    }

    /// Inverse link from latent location to distribution location.
    pub fn inverse_link(&self, latent: f64) -> f64 {
        match self {
            Distribution::Exponential => latent.exp(),
            _ => latent,
        }
    }

    /// One draw. Lognormal takes log-mean and log-sd; exponential ignores
    /// `scale` and uses rate `1 / location`.
    pub fn sample<R: Rng + ?Sized>(&self, location: f64, scale: f64, rng: &mut R) -> Result<f64> {
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::InvalidArgument(format!("scale must be > 0, got {scale}")));
        }
        if !location.is_finite() {
            return Err(Error::InvalidArgument("location must be finite".into()));
        }
        let y = match self {
            Distribution::Normal => {
                let z: f64 = rng.sample(StandardNormal);
                location + scale * z
            }
            Distribution::Lognormal => {
                let z: f64 = rng.sample(StandardNormal);
                (location + scale * z).exp()
            }
            Distribution::Exponential => {
                if location <= 0.0 {
                    return Err(Error::InvalidArgument(
                        "exponential location must be > 0".into(),
                    ));
                }
                Exp::new(1.0 / location)
                    .map_err(|e| Error::InvalidArgument(e.to_string()))?
                    .sample(rng)
            }
            Distribution::Cauchy => Cauchy::new(location, scale)
                .map_err(|e| Error::InvalidArgument(e.to_string()))?
                .sample(rng),
            Distribution::T3 => {
                let t: f64 = StudentT::new(3.0).expect("valid df").sample(rng);
                location + scale * t
            }
            Distribution::DoubleExponential => {
                // Inverse CDF of Laplace(location, scale).
                let u: f64 = rng.sample::<f64, _>(Open01) - 0.5;
                location - scale * u.signum() * (1.0 - 2.0 * u.abs()).ln()
            }
        };
        Ok(y)
    }
}

impl fmt::Display for Distribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Distribution {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "normal" => Ok(Distribution::Normal),
            "lognormal" => Ok(Distribution::Lognormal),
            "exponential" => Ok(Distribution::Exponential),
            "cauchy" => Ok(Distribution::Cauchy),
            "t3" | "t(3)" => Ok(Distribution::T3),
            "double_exponential" | "laplace" => Ok(Distribution::DoubleExponential),
            other => Err(Error::UnknownDistribution(other.to_string())),
        }
    }
}

pub fn sample_distribution<R: Rng + ?Sized>(
    name: &str,
    location: f64,
    scale: f64,
    rng: &mut R,
) -> Result<f64> {
    name.parse::<Distribution>()?.sample(location, scale, rng)
}

/// One cell of the validation grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SimDesign {
    pub layout: Layout,
    pub distribution: Distribution,
    pub n_per_condition: usize,
    pub design_kind: DesignKind,
    /// All condition locations equal (Type I data) when true; random
    /// locations (power data) otherwise.
    pub null_true: bool,
}

impl SimDesign {
    /// Stream key for this design. Design kind is left out so that between-
    /// and within-subjects datasets of the same cell share response streams.
    pub fn stream_code(&self) -> u64 {
        fnv1a(
            format!(
                "{}|{}|{}|{}",
                self.layout, self.distribution, self.n_per_condition, self.null_true
            )
            .as_bytes(),
        )
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_per_condition < 2 {
            return Err(Error::InvalidArgument(format!(
                "condition sample size must be >= 2, got {}",
                self.n_per_condition
            )));
        }
        Ok(())
    }

    pub fn n_subjects(&self) -> usize {
        match self.design_kind {
            DesignKind::Within => self.n_per_condition,
            DesignKind::Between => self.n_per_condition * self.layout.n_conditions(),
        }
    }
}

/// Every intermediate quantity of one generated dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct GenRecipe {
    /// Latent location per condition, conditions in layout order.
    pub latent_locations: Vec<f64>,
    /// Subject-offset SD; 0 for between-subjects data.
    pub subject_sd: f64,
    /// Offset per subject (all 0 for between-subjects data).
    pub subject_offsets: Vec<f64>,
    /// Latent location per (condition, subject-within-condition).
    pub latent: Vec<Vec<f64>>,
    /// Distribution location per (condition, subject-within-condition).
    pub locations: Vec<Vec<f64>>,
}

impl GenRecipe {
    /// Steps 2-3 given the per-condition latent locations and the subject
    /// offsets. `offsets` has one entry per subject for within-subjects data
    /// and is empty for between-subjects data.
    pub fn assemble(
        distribution: Distribution,
        latent_locations: Vec<f64>,
        subject_sd: f64,
        offsets: Vec<f64>,
        n_per_condition: usize,
    ) -> Self {
        let latent: Vec<Vec<f64>> = latent_locations
            .iter()
            .map(|&mu| {
                (0..n_per_condition)
                    .map(|s| mu + offsets.get(s).copied().unwrap_or(0.0))
                    .collect()
            })
            .collect();
        let locations = latent
            .iter()
            .map(|row| row.iter().map(|&x| distribution.inverse_link(x)).collect())
            .collect();
        Self {
            latent_locations,
            subject_sd,
            subject_offsets: offsets,
            latent,
            locations,
        }
    }

    /// `key = value` lines describing how the dataset was produced.
    pub fn to_key_value(&self, design: &SimDesign, master_seed: u64, replication: u64) -> String {
        let list = |v: &[f64]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",");
        let mut out = String::new();
        let mut kv = |k: &str, v: String| {
            out.push_str(k);
            out.push_str(" = ");
            out.push_str(&v);
            out.push('\n');
        };
        kv("seed", master_seed.to_string());
        kv("replication", replication.to_string());
        kv("layout", design.layout.to_string());
        kv("distribution", design.distribution.to_string());
        kv("n_per_condition", design.n_per_condition.to_string());
        kv("design_kind", design.design_kind.to_string());
        kv("null_true", design.null_true.to_string());
        kv("subject_sd", self.subject_sd.to_string());
        kv("latent_locations", list(&self.latent_locations));
        kv("subject_offsets", list(&self.subject_offsets));
        out
    }
}

/// Values to pin instead of drawing them.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct GenOverrides {
    pub latent_locations: Option<Vec<f64>>,
    pub subject_sd: Option<f64>,
}

pub fn gen_dataset(design: &SimDesign, master_seed: u64, replication: u64) -> Result<(Dataset, GenRecipe)> {
    gen_dataset_with(design, master_seed, replication, &GenOverrides::default())
}

pub fn gen_dataset_with(
    design: &SimDesign,
    master_seed: u64,
    replication: u64,
    overrides: &GenOverrides,
) -> Result<(Dataset, GenRecipe)> {
    design.validate()?;
    let seeds = SeededRng::new(master_seed, design.stream_code(), replication);
    let n_cond = design.layout.n_conditions();
    let n = design.n_per_condition;

    let latent_locations = match &overrides.latent_locations {
        Some(v) if v.len() != n_cond => {
            return Err(Error::InvalidArgument(format!(
                "expected {n_cond} latent locations, got {}",
                v.len()
            )))
        }
        Some(v) => v.clone(),
        None if design.null_true => vec![0.0; n_cond],
        None => {
            let mut rng = seeds.stream(Purpose::Locations);
            (0..n_cond).map(|_| rng.sample::<f64, _>(StandardNormal)).collect()
        }
    };

    let (subject_sd, offsets) = match design.design_kind {
        DesignKind::Between => (0.0, Vec::new()),
        DesignKind::Within => {
            let sd = match overrides.subject_sd {
                Some(sd) if sd >= 0.0 => sd,
                Some(sd) => {
                    return Err(Error::InvalidArgument(format!("subject sd must be >= 0, got {sd}")))
                }
                None => SUBJECT_SDS[seeds.stream(Purpose::SubjectSd).random_range(0..SUBJECT_SDS.len())],
            };
            let mut rng = seeds.stream(Purpose::SubjectOffsets);
            let offsets = (0..n).map(|_| sd * rng.sample::<f64, _>(StandardNormal)).collect();
            (sd, offsets)
        }
    };

    let recipe = GenRecipe::assemble(design.distribution, latent_locations, subject_sd, offsets, n);

    let conditions = all_conditions(design.layout.n_levels());
    let n_factors = design.layout.n_levels().len();
    let mut codes = vec![Vec::with_capacity(n_cond * n); n_factors];
    let mut subject_codes = Vec::with_capacity(n_cond * n);
    let mut response = Vec::with_capacity(n_cond * n);
    let mut rng = seeds.stream(Purpose::Responses);
    for (c, cond) in conditions.iter().enumerate() {
        for s in 0..n {
            for (f, &l) in cond.iter().enumerate() {
                codes[f].push(l);
            }
            subject_codes.push(match design.design_kind {
                DesignKind::Within => s,
                DesignKind::Between => c * n + s,
            });
            response.push(design.distribution.sample(recipe.locations[c][s], 1.0, &mut rng)?);
        }
    }
    let subjects = Subjects {
        name: "S".into(),
        labels: (1..=design.n_subjects()).map(|s| format!("S{s}")).collect(),
        codes: subject_codes,
    };
    let ds = Dataset::new(design.layout.factors(), codes, Some(subjects), "Y", response)?;
    Ok((ds, recipe))
}

/// Log-scale population means of the three-factor lognormal scenario used
/// as a worked example: no A1,B1 vs A1,B2 difference, a real A1,B1 vs
/// A2,B2 difference, and an A x B interaction.
pub const RUNNING_EXAMPLE_LOG_MEANS: [f64; 8] = [0.0, 0.5, 0.0, 0.5, 0.75, 1.25, 1.0, 0.5];

pub fn running_example_design() -> SimDesign {
    SimDesign {
        layout: Layout::TwoByTwoByTwo,
        distribution: Distribution::Lognormal,
        n_per_condition: 40,
        design_kind: DesignKind::Within,
        null_true: false,
    }
}

/// 2x2x2 within-subjects lognormal data, 40 subjects, with the fixed
/// log-scale condition means above.
pub fn running_example(master_seed: u64, replication: u64) -> Result<(Dataset, GenRecipe)> {
    gen_dataset_with(
        &running_example_design(),
        master_seed,
        replication,
        &GenOverrides {
            latent_locations: Some(RUNNING_EXAMPLE_LOG_MEANS.to_vec()),
            subject_sd: None,
        },
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn design(kind: DesignKind, null_true: bool) -> SimDesign {
        SimDesign {
            layout: Layout::TwoByTwoByTwo,
            distribution: Distribution::Lognormal,
            n_per_condition: 8,
            design_kind: kind,
            null_true,
        }
    }

    #[test]
    fn worked_example_location() {
        // condition 5, subject 2: latent 0.75, SD 0.5, offset 0.1
        let mut latent = vec![0.0; 8];
        latent[4] = 0.75;
        let r = GenRecipe::assemble(Distribution::Lognormal, latent, 0.5, vec![0.0, 0.1], 2);
        assert!((r.latent[4][1] - 0.85).abs() < 1e-15);
        assert!((r.locations[4][1] - 0.85).abs() < 1e-15);
        let e = GenRecipe::assemble(Distribution::Exponential, vec![0.85], 0.0, vec![], 1);
        assert!((e.locations[0][0] - 0.85f64.exp()).abs() < 1e-15);
    }

    #[test]
    fn within_structure() {
        let (ds, recipe) = gen_dataset(&design(DesignKind::Within, false), 1, 0).unwrap();
        assert_eq!(ds.n_rows(), 64);
        assert_eq!(ds.n_subjects(), 8);
        assert!(SUBJECT_SDS.contains(&recipe.subject_sd));
        let idx = ds.condition_index();
        assert_eq!(idx.len(), 8);
        for rows in idx.values() {
            let mut subj: Vec<usize> = rows.iter().map(|&r| ds.subjects().unwrap().codes[r]).collect();
            subj.sort();
            assert_eq!(subj, (0..8).collect::<Vec<_>>());
        }
    }

    #[test]
    fn between_structure() {
        let (ds, recipe) = gen_dataset(&design(DesignKind::Between, false), 1, 0).unwrap();
        assert_eq!(ds.n_rows(), 64);
        assert_eq!(ds.n_subjects(), 64);
        assert_eq!(recipe.subject_sd, 0.0);
        assert!(recipe.subject_offsets.is_empty());
    }

    #[test]
    fn null_recipe_has_zero_locations() {
        let (_, recipe) = gen_dataset(&design(DesignKind::Within, true), 9, 2).unwrap();
        assert!(recipe.latent_locations.iter().all(|&m| m == 0.0));
    }

    #[test]
    fn deterministic_per_key() {
        let d = design(DesignKind::Within, false);
        let a = gen_dataset(&d, 5, 3).unwrap();
        let b = gen_dataset(&d, 5, 3).unwrap();
        assert_eq!(a, b);
        let c = gen_dataset(&d, 5, 4).unwrap();
        assert_ne!(a.0.response(), c.0.response());
    }

    #[test]
    fn zero_sd_within_matches_between_responses() {
        let w = gen_dataset_with(
            &design(DesignKind::Within, false),
            11,
            0,
            &GenOverrides {
                subject_sd: Some(0.0),
                ..Default::default()
            },
        )
        .unwrap();
        let b = gen_dataset(&design(DesignKind::Between, false), 11, 0).unwrap();
        assert_eq!(w.0.response(), b.0.response());
        assert_eq!(w.1.latent_locations, b.1.latent_locations);
    }

    #[test]
    fn parse_names() {
        assert_eq!("t3".parse::<Distribution>().unwrap(), Distribution::T3);
        assert!(matches!(
            sample_distribution("gamma", 0.0, 1.0, &mut rand::rng()),
            Err(Error::UnknownDistribution(_))
        ));
        assert!(sample_distribution("normal", 0.0, 0.0, &mut rand::rng()).is_err());
        assert_eq!("3X3".parse::<Layout>().unwrap(), Layout::ThreeByThree);
    }

    #[test]
    fn recipe_sidecar_lists_inputs() {
        let d = design(DesignKind::Within, false);
        let (_, recipe) = gen_dataset(&d, 5, 3).unwrap();
        let text = recipe.to_key_value(&d, 5, 3);
        assert!(text.contains("seed = 5\n"));
        assert!(text.contains("replication = 3\n"));
        assert!(text.contains("layout = 2x2x2\n"));
        assert!(text.lines().any(|l| l.starts_with("latent_locations = ")));
    }
}
