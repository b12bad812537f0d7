//! Pairwise contrasts on aligned ranks, omnibus ANOVA for the classic ART,
//! and p-value adjustment.

use nalgebra::{Cholesky, DMatrix, DVector};
use statrs::distribution::{ContinuousCDF, FisherSnedecor, StudentsT};

use crate::align::{align_art_effect, align_artc, concat_factors, AlignedColumns};
use crate::data::{AdjustMethod, ContrastSpec, Dataset, DesignKind};
use crate::design::Coding;
use crate::error::{Error, Result};
use crate::model::{fit_model, fit_model_with, FitOptions, FittedModel};

/// One pairwise comparison between levels of a concatenated factor.
#[derive(Debug, Clone, PartialEq)]
pub struct ContrastResult {
    pub family: Vec<String>,
    pub pair: (String, String),
    /// Difference of estimated marginal means of the ranks.
    pub estimate: f64,
    pub se: f64,
    pub df: f64,
    pub t_ratio: f64,
    pub p: f64,
    pub p_adj: f64,
}

impl ContrastResult {
    pub fn label(&self) -> String {
        format!("{} - {}", self.pair.0, self.pair.1)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnovaRow {
    pub effect: Vec<String>,
    pub f: f64,
    pub df_num: f64,
    pub df_den: f64,
    pub p: f64,
}

impl AnovaRow {
    pub fn label(&self) -> String {
        self.effect.join(":")
    }
}

/// A set of factors whose level combinations are compared pairwise.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContrastFamily {
    pub factors: Vec<usize>,
    pub n_pairs: usize,
}

impl ContrastFamily {
    pub fn size(&self) -> usize {
        self.factors.len()
    }
}

/// Every nonempty factor subset, smallest first, with its number of
/// pairwise comparisons.
pub fn enumerate_contrast_families(n_levels: &[usize]) -> Vec<ContrastFamily> {
    let mut families: Vec<ContrastFamily> = nonempty_subsets(n_levels.len())
        .into_iter()
        .map(|factors| {
            let cells: usize = factors.iter().map(|&f| n_levels[f]).product();
            ContrastFamily {
                factors,
                n_pairs: cells * cells.saturating_sub(1) / 2,
            }
        })
        .collect();
    families.sort_by(|a, b| a.factors.len().cmp(&b.factors.len()).then_with(|| a.factors.cmp(&b.factors)));
    families
}

fn nonempty_subsets(k: usize) -> Vec<Vec<usize>> {
    let mut out: Vec<Vec<usize>> = (1..(1usize << k))
        .map(|mask| (0..k).filter(|b| mask & (1 << b) != 0).collect())
        .collect();
    out.sort_by(|a, b| a.len().cmp(&b.len()).then_with(|| a.cmp(b)));
    out
}

pub fn adjust_pvalues(ps: &[f64], method: AdjustMethod) -> Result<Vec<f64>> {
    if let Some(&bad) = ps.iter().find(|p| !(0.0..=1.0).contains(*p)) {
        return Err(Error::InvalidPValue(bad));
    }
    let m = ps.len() as f64;
    Ok(match method {
        AdjustMethod::None => ps.to_vec(),
        AdjustMethod::Bonferroni => ps.iter().map(|p| (p * m).min(1.0)).collect(),
        AdjustMethod::Holm => {
            let mut order: Vec<usize> = (0..ps.len()).collect();
            order.sort_by(|&a, &b| ps[a].total_cmp(&ps[b]));
            let mut out = vec![0.0; ps.len()];
            let mut running: f64 = 0.0;
            for (i, &k) in order.iter().enumerate() {
                let scaled = ((m - i as f64) * ps[k]).min(1.0);
                running = running.max(scaled);
                out[k] = running;
            }
            out
        }
    })
}

fn two_sided_t(t: f64, df: f64) -> f64 {
    if t.is_nan() {
        return 1.0;
    }
    if t.is_infinite() {
        return 0.0;
    }
    let dist = StudentsT::new(0.0, 1.0, df).expect("df >= 1");
    (2.0 * dist.sf(t.abs())).min(1.0)
}

/// Contrasts between every pair of levels of factor 0 of a fitted model
/// whose first factor is the concatenated one.
fn pairwise_from_model(model: &FittedModel, concat: &Dataset, family: &[String]) -> Vec<ContrastResult> {
    let levels = &concat.factors()[0].levels;
    let emm: Vec<DVector<f64>> = (0..levels.len()).map(|l| model.emm_coefficients(0, l)).collect();
    let mut out = Vec::new();
    for i in 0..levels.len() {
        for j in (i + 1)..levels.len() {
            let c = &emm[i] - &emm[j];
            let (estimate, se) = model.linear_combination(&c);
            let t_ratio = if se > 0.0 {
                estimate / se
            } else if estimate == 0.0 {
                0.0
            } else {
                estimate.signum() * f64::INFINITY
            };
            let p = two_sided_t(t_ratio, model.df_contrast);
            out.push(ContrastResult {
                family: family.to_vec(),
                pair: (levels[i].clone(), levels[j].clone()),
                estimate,
                se,
                df: model.df_contrast,
                t_ratio,
                p,
                p_adj: p,
            });
        }
    }
    out
}

/// Fits the full-factorial model of `concat` (concatenated factor first) on
/// `ranks` and contrasts all pairs of concatenated levels.
pub fn contrasts_on_ranks(
    concat: &Dataset,
    ranks: &[f64],
    kind: DesignKind,
    adjust: AdjustMethod,
    family: &[String],
) -> Result<Vec<ContrastResult>> {
    if concat.factors()[0].n_levels() < 2 {
        return Err(Error::InvalidArgument(format!(
            "contrast family {} has fewer than two levels",
            family.join(":")
        )));
    }
    let ranked = concat.with_response(ranks.to_vec())?;
    let model = fit_model(&ranked, kind)?;
    let mut results = pairwise_from_model(&model, concat, family);
    let ps: Vec<f64> = results.iter().map(|r| r.p).collect();
    for (r, p_adj) in results.iter_mut().zip(adjust_pvalues(&ps, adjust)?) {
        r.p_adj = p_adj;
    }
    Ok(results)
}

fn run_contrasts(
    ds: &Dataset,
    spec: &ContrastSpec,
    kind: DesignKind,
    aligned: AlignedColumns,
) -> Result<Vec<ContrastResult>> {
    let concat = concat_factors(ds, &spec.target_factors)?;
    contrasts_on_ranks(
        &concat,
        &aligned.y_double_prime,
        kind,
        spec.adjust,
        &aligned.target.factors,
    )
}

/// ART-C: concatenate the target factors, align and rank for them, fit the
/// full factorial on the ranks, and compare concatenated levels pairwise.
pub fn pairwise_contrasts(ds: &Dataset, spec: &ContrastSpec, kind: DesignKind) -> Result<Vec<ContrastResult>> {
    let aligned = align_artc(ds, &spec.target_factors)?;
    run_contrasts(ds, spec, kind, aligned)
}

/// The same contrast pipeline on ranks aligned for the effect formed by the
/// target factors. This is the classic-ART way of running contrasts, kept as
/// a comparison baseline; it is only valid for single-factor families.
pub fn art_pairwise_contrasts(ds: &Dataset, spec: &ContrastSpec, kind: DesignKind) -> Result<Vec<ContrastResult>> {
    let aligned = align_art_effect(ds, &spec.target_factors)?;
    run_contrasts(ds, spec, kind, aligned)
}

/// Wald F test of one term of a sum-coded fit. With sum-to-zero coding this
/// is the Type III test of the term.
fn term_f_test(model: &FittedModel, factors: &[usize], scale: f64) -> (f64, f64) {
    let term = model.design.term(factors).expect("term present in full factorial");
    let cols: Vec<usize> = term.columns.clone().collect();
    let q = cols.len();
    let b = DVector::from_iterator(q, cols.iter().map(|&c| model.beta[c]));
    if b.amax() <= 1e-10 * scale {
        return (0.0, 1.0);
    }
    let cov = DMatrix::from_fn(q, q, |i, j| model.cov_beta[(cols[i], cols[j])]);
    let f = match Cholesky::new(cov) {
        Some(chol) if model.sigma2 > 0.0 => b.dot(&chol.solve(&b)) / q as f64,
        _ => f64::INFINITY,
    };
    if f.is_infinite() {
        return (f, 0.0);
    }
    let dist = FisherSnedecor::new(q as f64, model.df_contrast).expect("positive df");
    (f, dist.sf(f).clamp(0.0, 1.0))
}

/// Omnibus ART ANOVA: one alignment and fit per effect, reporting only that
/// effect's F test.
pub fn anova_on_art(ds: &Dataset, kind: DesignKind) -> Result<Vec<AnovaRow>> {
    let opts = FitOptions {
        coding: Coding::Sum,
        ..Default::default()
    };
    let mut rows = Vec::new();
    for subset in nonempty_subsets(ds.factors().len()) {
        let names: Vec<String> = subset.iter().map(|&f| ds.factors()[f].name.clone()).collect();
        let aligned = align_art_effect(ds, &names)?;
        let ranked = ds.with_response(aligned.y_double_prime)?;
        let model = fit_model_with(&ranked, kind, &opts)?;
        let scale = ranked.response().iter().fold(1.0_f64, |m, y| m.max(y.abs()));
        let q = model.design.term(&subset).map_or(0, |t| t.columns.len());
        if q == 0 {
            // A factor with a single level has no testable effect.
            continue;
        }
        let (f, p) = term_f_test(&model, &subset, scale);
        rows.push(AnovaRow {
            effect: names,
            f,
            df_num: q as f64,
            df_den: model.df_contrast,
            p,
        });
    }
    Ok(rows)
}
