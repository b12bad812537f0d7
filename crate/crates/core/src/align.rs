//! Alignment for the aligned rank transform.
//!
//! Two procedures share the same arithmetic skeleton
//! `Y' = (Y - grand mean) + (core - full-cell mean)`:
//!
//! * [`align_artc`] aligns for a contrast family. The target factors are
//!   treated as one concatenated factor and `core` is the mean of the row's
//!   concatenated level.
//! * [`align_art_effect`] is the classic per-effect alignment, where `core`
//!   is the inclusion-exclusion estimate of the effect plus the grand mean.
//!
//! With one target factor the two cores are the same number, so the aligned
//! values agree bit for bit. All means are unweighted means over the rows
//! observed in a cell; ranking is always over all rows jointly.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::io::Write;

use crate::data::{Condition, Dataset, FactorSpec};
use crate::error::{Error, Result};
use crate::rank::midrank;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AlignKind {
    /// Per contrast family (concatenated factors).
    Contrast,
    /// Per main effect or interaction.
    Effect,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AlignTarget {
    pub kind: AlignKind,
    pub factors: Vec<String>,
}

impl fmt::Display for AlignTarget {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.factors.join(":"))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlignedColumns {
    pub target: AlignTarget,
    pub y_prime: Vec<f64>,
    pub y_double_prime: Vec<f64>,
}

/// Means needed to align one target: full-cell means, means per level of the
/// target (marginalizing the other factors), and the grand mean.
#[derive(Debug, Clone)]
pub struct CellMeanTable {
    pub grand_mean: f64,
    /// Mean and row count of every observed full cell.
    pub cell_means: BTreeMap<Condition, (f64, usize)>,
    /// Keyed by the target factors' level codes, in target order.
    pub target_means: BTreeMap<Vec<usize>, f64>,
}

impl CellMeanTable {
    pub fn new(ds: &Dataset, target: &[usize]) -> Self {
        let all: Vec<usize> = (0..ds.factors().len()).collect();
        let cells = group_sums(ds, &all);
        let targets = group_sums(ds, target);
        Self {
            grand_mean: grand_mean(ds.response()),
            cell_means: cells
                .into_iter()
                .map(|(k, (s, c))| (k, (s / c as f64, c)))
                .collect(),
            target_means: targets
                .into_iter()
                .map(|(k, (s, c))| (k, s / c as f64))
                .collect(),
        }
    }
}

fn grand_mean(y: &[f64]) -> f64 {
    y.iter().sum::<f64>() / y.len() as f64
}

fn project(ds: &Dataset, row: usize, subset: &[usize]) -> Vec<usize> {
    subset.iter().map(|&f| ds.codes(f)[row]).collect()
}

fn group_sums(ds: &Dataset, subset: &[usize]) -> HashMap<Vec<usize>, (f64, usize)> {
    let mut sums: HashMap<Vec<usize>, (f64, usize)> = HashMap::new();
    for (row, &y) in ds.response().iter().enumerate() {
        let e = sums.entry(project(ds, row, subset)).or_insert((0.0, 0));
        e.0 += y;
        e.1 += 1;
    }
    sums
}

/// Each row's mean over the rows sharing its levels on `subset`.
fn row_means(ds: &Dataset, subset: &[usize]) -> Vec<f64> {
    let sums = group_sums(ds, subset);
    (0..ds.n_rows())
        .map(|row| {
            let (s, c) = sums[&project(ds, row, subset)];
            s / c as f64
        })
        .collect()
}

fn check_alignable(ds: &Dataset) -> Result<()> {
    if ds.n_rows() == 0 {
        return Err(Error::InsufficientData("dataset has no rows".into()));
    }
    ds.require_complete()
}

fn finish(ds: &Dataset, target: AlignTarget, core: &[f64]) -> Result<AlignedColumns> {
    let y = ds.response();
    let mu = grand_mean(y);
    let all: Vec<usize> = (0..ds.factors().len()).collect();
    let cell = row_means(ds, &all);
    let y_prime: Vec<f64> = (0..y.len())
        .map(|i| (y[i] - mu) + (core[i] - cell[i]))
        .collect();
    let y_double_prime = midrank(&y_prime)?;
    Ok(AlignedColumns {
        target,
        y_prime,
        y_double_prime,
    })
}

/// Aligns and ranks the response for contrasts among combinations of the
/// target factors' levels.
pub fn align_artc<S: AsRef<str>>(ds: &Dataset, target_factors: &[S]) -> Result<AlignedColumns> {
    let idx = ds.factor_indices(target_factors)?;
    check_alignable(ds)?;
    let core = row_means(ds, &idx);
    let target = AlignTarget {
        kind: AlignKind::Contrast,
        factors: idx.iter().map(|&i| ds.factors()[i].name.clone()).collect(),
    };
    finish(ds, target, &core)
}

/// Classic per-effect alignment: residual from the full-cell mean plus the
/// inclusion-exclusion estimate of the effect over marginal means.
pub fn align_art_effect<S: AsRef<str>>(ds: &Dataset, effect: &[S]) -> Result<AlignedColumns> {
    let idx = ds.factor_indices(effect)?;
    check_alignable(ds)?;
    let m = idx.len();
    let n = ds.n_rows();
    let mut core = vec![0.0; n];
    // Largest subset first, so a single-factor effect's core is exactly its
    // marginal mean.
    let mut subsets: Vec<u32> = (1..(1u32 << m)).collect();
    subsets.sort_by_key(|s| std::cmp::Reverse(s.count_ones()));
    for mask in subsets {
        let subset: Vec<usize> = (0..m).filter(|b| mask & (1 << b) != 0).map(|b| idx[b]).collect();
        let sign = if (m - subset.len()).is_multiple_of(2) { 1.0 } else { -1.0 };
        for (c, mean) in core.iter_mut().zip(row_means(ds, &subset)) {
            *c += sign * mean;
        }
    }
    // Empty-subset term (-1)^m * mu, plus the mu that `finish` subtracts.
    if m % 2 == 0 {
        let mu = grand_mean(ds.response());
        for c in &mut core {
            *c += 2.0 * mu;
        }
    }
    let target = AlignTarget {
        kind: AlignKind::Effect,
        factors: idx.iter().map(|&i| ds.factors()[i].name.clone()).collect(),
    };
    finish(ds, target, &core)
}

/// Replaces the target factors by one concatenated factor placed first; the
/// other factors follow in their original order. Concatenated levels are the
/// observed combinations, labelled `lvlA,lvlB,...` and ordered by the
/// component levels with the first target factor varying slowest.
pub fn concat_factors<S: AsRef<str>>(ds: &Dataset, target_factors: &[S]) -> Result<Dataset> {
    let idx = ds.factor_indices(target_factors)?;
    let n = ds.n_rows();
    let combos: Vec<Vec<usize>> = (0..n).map(|r| project(ds, r, &idx)).collect();
    let mut observed: Vec<Vec<usize>> = combos.clone();
    observed.sort();
    observed.dedup();
    let level_of: HashMap<&Vec<usize>, usize> =
        observed.iter().enumerate().map(|(i, c)| (c, i)).collect();
    let labels: Vec<String> = observed
        .iter()
        .map(|combo| {
            combo
                .iter()
                .zip(&idx)
                .map(|(&l, &f)| ds.factors()[f].levels[l].as_str())
                .collect::<Vec<_>>()
                .join(",")
        })
        .collect();

    let others: Vec<usize> = (0..ds.factors().len()).filter(|f| !idx.contains(f)).collect();
    let mut name: String = idx.iter().map(|&f| ds.factors()[f].name.as_str()).collect();
    if others.iter().any(|&f| ds.factors()[f].name == name) {
        name = idx
            .iter()
            .map(|&f| ds.factors()[f].name.as_str())
            .collect::<Vec<_>>()
            .join(":");
    }

    let mut factors = vec![FactorSpec::new(name, labels)?];
    let mut codes = vec![combos.iter().map(|c| level_of[c]).collect::<Vec<_>>()];
    for &f in &others {
        factors.push(ds.factors()[f].clone());
        codes.push(ds.codes(f).to_vec());
    }
    Dataset::new(
        factors,
        codes,
        ds.subjects().cloned(),
        ds.response_name(),
        ds.response().to_vec(),
    )
}

/// Writes the dataset once per alignment with `Y_prime`, `Y_double_prime`
/// and `target` columns appended.
pub fn write_aligned_csv<W: Write>(ds: &Dataset, aligned: &[AlignedColumns], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header = ds.csv_header();
    header.extend(["Y_prime", "Y_double_prime", "target"].map(String::from));
    w.write_record(&header)?;
    for a in aligned {
        if a.y_prime.len() != ds.n_rows() {
            return Err(Error::InvalidArgument("alignment does not match dataset".into()));
        }
        let target = a.target.to_string();
        for row in 0..ds.n_rows() {
            let mut fields = ds.csv_fields(row);
            fields.push(a.y_prime[row].to_string());
            fields.push(a.y_double_prime[row].to_string());
            fields.push(target.clone());
            w.write_record(&fields)?;
        }
    }
    w.flush()?;
    Ok(())
}
