//! Monte Carlo validation: generate datasets over a design grid, run every
//! contrast with ART-C, classic ART, the t-test and a rank test, and turn
//! the rejections into observed Type I error rates and power.
//!
//! A design is (layout, distribution, n, between/within, contrast size).
//! Datasets for which any model fit fails to converge are dropped whole and
//! counted. No multiple-comparison adjustment is applied here.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use statrs::distribution::{Binomial, DiscreteCDF};

use crate::align::{align_art_effect, align_artc, concat_factors};
use crate::classic::{mann_whitney_u, t_test, wilcoxon_signed_rank};
use crate::contrast::{contrasts_on_ranks, enumerate_contrast_families};
use crate::data::{AdjustMethod, ContrastSpec, Dataset, DesignKind};
use crate::error::{Error, Result};
use crate::simgen::{gen_dataset, Distribution, Layout, SimDesign, SAMPLE_SIZES};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    Artc,
    Art,
    TTest,
    /// Mann-Whitney U for between-subjects data, Wilcoxon signed-rank for
    /// within-subjects data.
    RankTest,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Artc, Method::Art, Method::TTest, Method::RankTest];

    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Artc => "artc",
            Method::Art => "art",
            Method::TTest => "t_test",
            Method::RankTest => "rank_test",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Metric {
    TypeI,
    Power,
}

impl Metric {
    pub fn of(design: &SimDesign) -> Self {
        if design.null_true {
            Metric::TypeI
        } else {
            Metric::Power
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Metric::TypeI => "type_i",
            Metric::Power => "power",
        }
    }
}

/// One contrast test result.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub design: SimDesign,
    pub replication: u64,
    pub method: Method,
    /// Factor indices of the contrast family.
    pub family: Vec<usize>,
    pub pair: (usize, usize),
    pub p: f64,
    pub rejected: bool,
}

impl TrialRecord {
    pub fn contrast_size(&self) -> usize {
        self.family.len()
    }

    fn sort_key(&self) -> (SimDesign, u64, Vec<usize>, (usize, usize), Method) {
        (self.design, self.replication, self.family.clone(), self.pair, self.method)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DroppedDataset {
    pub design: SimDesign,
    pub replication: u64,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct GridRun {
    pub records: Vec<TrialRecord>,
    pub dropped: Vec<DroppedDataset>,
    pub datasets: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridConfig {
    pub replications: u64,
    pub alpha: f64,
    pub seed: u64,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            replications: 50,
            alpha: 0.05,
            seed: 20_210_508,
        }
    }
}

/// All 3 x 6 x 5 x 2 cells, each with null and random locations.
pub fn full_grid() -> Vec<SimDesign> {
    grid(
        &Layout::ALL,
        &Distribution::ALL,
        &SAMPLE_SIZES,
        &[DesignKind::Between, DesignKind::Within],
        &[true, false],
    )
}

/// A few small cells exercising both design kinds and both hypotheses.
pub fn smoke_grid() -> Vec<SimDesign> {
    grid(
        &[Layout::TwoByTwo],
        &[Distribution::Normal, Distribution::Lognormal],
        &[8],
        &[DesignKind::Between, DesignKind::Within],
        &[true, false],
    )
}

pub fn grid(
    layouts: &[Layout],
    distributions: &[Distribution],
    sizes: &[usize],
    kinds: &[DesignKind],
    nulls: &[bool],
) -> Vec<SimDesign> {
    let mut out = Vec::new();
    for &layout in layouts {
        for &distribution in distributions {
            for &n_per_condition in sizes {
                for &design_kind in kinds {
                    for &null_true in nulls {
                        out.push(SimDesign {
                            layout,
                            distribution,
                            n_per_condition,
                            design_kind,
                            null_true,
                        });
                    }
                }
            }
        }
    }
    out
}

enum Outcome {
    Records(Vec<TrialRecord>),
    Dropped(DroppedDataset),
}

/// Runs every design for `config.replications` datasets. Work is spread over
/// the current rayon pool; results do not depend on the number of threads.
pub fn run_grid(designs: &[SimDesign], config: &GridConfig) -> Result<GridRun> {
    if !(config.alpha > 0.0 && config.alpha < 1.0) {
        return Err(Error::InvalidArgument(format!("alpha must be in (0, 1), got {}", config.alpha)));
    }
    if config.replications < 1 {
        return Err(Error::InvalidArgument("replications must be >= 1".into()));
    }
    for d in designs {
        d.validate()?;
    }
    let jobs: Vec<(SimDesign, u64)> = designs
        .iter()
        .flat_map(|d| (0..config.replications).map(move |r| (*d, r)))
        .collect();
    let outcomes: Vec<Outcome> = jobs
        .par_iter()
        .map(|(d, r)| run_dataset(d, *r, config))
        .collect::<Result<_>>()?;

    let mut run = GridRun {
        datasets: jobs.len(),
        ..Default::default()
    };
    for o in outcomes {
        match o {
            Outcome::Records(r) => run.records.extend(r),
            Outcome::Dropped(d) => run.dropped.push(d),
        }
    }
    run.records.sort_by_cached_key(TrialRecord::sort_key);
    Ok(run)
}

fn run_dataset(design: &SimDesign, replication: u64, config: &GridConfig) -> Result<Outcome> {
    let (ds, _) = gen_dataset(design, config.seed, replication)?;
    match dataset_trials(&ds, design, replication, config.alpha) {
        Ok(records) => Ok(Outcome::Records(records)),
        Err(Error::NonConvergence(reason)) => {
            log::debug!("dropping {design:?} replication {replication}: {reason}");
            Ok(Outcome::Dropped(DroppedDataset {
                design: *design,
                replication,
                reason,
            }))
        }
        Err(e) => Err(e),
    }
}

/// Every trial of one dataset: all contrast families, all pairs, four
/// methods.
pub fn dataset_trials(ds: &Dataset, design: &SimDesign, replication: u64, alpha: f64) -> Result<Vec<TrialRecord>> {
    let kind = design.design_kind;
    let mut records = Vec::new();
    for family in enumerate_contrast_families(&ds.n_levels()) {
        let names: Vec<String> = family
            .factors
            .iter()
            .map(|&f| ds.factors()[f].name.clone())
            .collect();
        let concat = concat_factors(ds, &names)?;
        let artc = align_artc(ds, &names)?;
        let artc = contrasts_on_ranks(&concat, &artc.y_double_prime, kind, AdjustMethod::None, &names)?;
        let art = align_art_effect(ds, &names)?;
        let art = contrasts_on_ranks(&concat, &art.y_double_prime, kind, AdjustMethod::None, &names)?;

        let k = concat.factors()[0].n_levels();
        let mut idx = 0;
        for i in 0..k {
            for j in (i + 1)..k {
                let (t, rank) = classic_pair(&concat, i, j, kind);
                let ps = [
                    (Method::Artc, artc[idx].p),
                    (Method::Art, art[idx].p),
                    (Method::TTest, t),
                    (Method::RankTest, rank),
                ];
                for (method, p) in ps {
                    records.push(TrialRecord {
                        design: *design,
                        replication,
                        method,
                        family: family.factors.clone(),
                        pair: (i, j),
                        p,
                        rejected: p < alpha,
                    });
                }
                idx += 1;
            }
        }
    }
    Ok(records)
}

/// t-test and rank-test p-values comparing two levels of the concatenated
/// factor on raw responses. Within-subjects data are paired by subject,
/// averaging a subject's rows inside each level. A degenerate sample counts
/// as p = 1.
fn classic_pair(concat: &Dataset, i: usize, j: usize, kind: DesignKind) -> (f64, f64) {
    let codes = concat.codes(0);
    let y = concat.response();
    let (x, z) = match kind {
        DesignKind::Between => {
            let pick = |l: usize| -> Vec<f64> {
                codes.iter().zip(y).filter(|(c, _)| **c == l).map(|(_, v)| *v).collect()
            };
            (pick(i), pick(j))
        }
        DesignKind::Within => {
            let subjects = concat.subjects().expect("within data has subjects");
            let s = subjects.labels.len();
            let mut acc = vec![(0.0, 0usize, 0.0, 0usize); s];
            for row in 0..concat.n_rows() {
                let a = &mut acc[subjects.codes[row]];
                if codes[row] == i {
                    a.0 += y[row];
                    a.1 += 1;
                } else if codes[row] == j {
                    a.2 += y[row];
                    a.3 += 1;
                }
            }
            acc.iter()
                .filter(|a| a.1 > 0 && a.3 > 0)
                .map(|a| (a.0 / a.1 as f64, a.2 / a.3 as f64))
                .unzip()
        }
    };
    let paired = kind == DesignKind::Within;
    let t = t_test(&x, &z, paired).map(|r| r.p);
    let rank = if paired {
        wilcoxon_signed_rank(&x, &z)
    } else {
        mann_whitney_u(&x, &z)
    }
    .map(|r| r.p);
    let or_one = |r: Result<f64>| {
        r.unwrap_or_else(|e| {
            log::debug!("classic test treated as p = 1: {e}");
            1.0
        })
    };
    (or_one(t), or_one(rank))
}

/// Observed rejection rate of one design for one method.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRow {
    pub layout: Layout,
    pub distribution: Distribution,
    pub n_per_condition: usize,
    pub design_kind: DesignKind,
    pub contrast_size: usize,
    pub method: Method,
    pub metric: Metric,
    pub rejected: usize,
    pub trials: usize,
    pub value: f64,
}

type DesignKey = (Layout, Distribution, usize, DesignKind, usize, Method, Metric);

/// Per-design rejection proportions.
pub fn per_design_metrics(records: &[TrialRecord]) -> Vec<MetricsRow> {
    let mut counts: BTreeMap<DesignKey, (usize, usize)> = BTreeMap::new();
    for r in records {
        let d = &r.design;
        let key = (
            d.layout,
            d.distribution,
            d.n_per_condition,
            d.design_kind,
            r.contrast_size(),
            r.method,
            Metric::of(d),
        );
        let e = counts.entry(key).or_default();
        e.0 += usize::from(r.rejected);
        e.1 += 1;
    }
    counts
        .into_iter()
        .map(|((layout, distribution, n, kind, size, method, metric), (rej, trials))| MetricsRow {
            layout,
            distribution,
            n_per_condition: n,
            design_kind: kind,
            contrast_size: size,
            method,
            metric,
            rejected: rej,
            trials,
            value: rej as f64 / trials as f64,
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GroupKey {
    Layout,
    Distribution,
    SampleSize,
    DesignKind,
    ContrastSize,
}

impl GroupKey {
    pub fn as_str(&self) -> &'static str {
        match self {
            GroupKey::Layout => "layout",
            GroupKey::Distribution => "distribution",
            GroupKey::SampleSize => "n",
            GroupKey::DesignKind => "design_kind",
            GroupKey::ContrastSize => "contrast_size",
        }
    }

    fn value(&self, m: &MetricsRow) -> String {
        match self {
            GroupKey::Layout => m.layout.to_string(),
            GroupKey::Distribution => m.distribution.to_string(),
            GroupKey::SampleSize => m.n_per_condition.to_string(),
            GroupKey::DesignKind => m.design_kind.to_string(),
            GroupKey::ContrastSize => m.contrast_size.to_string(),
        }
    }

    fn order(&self, m: &MetricsRow) -> u64 {
        match self {
            GroupKey::Layout => m.layout as u64,
            GroupKey::Distribution => m.distribution as u64,
            GroupKey::SampleSize => m.n_per_condition as u64,
            GroupKey::DesignKind => m.design_kind as u64,
            GroupKey::ContrastSize => m.contrast_size as u64,
        }
    }
}

/// Mean and spread of per-design rates within one group.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupSummary {
    pub keys: Vec<(GroupKey, String)>,
    pub method: Method,
    pub metric: Metric,
    pub mean: f64,
    /// Sample standard deviation across designs; `None` for one design.
    pub sd: Option<f64>,
    pub designs: usize,
    pub pooled_rejected: usize,
    pub pooled_trials: usize,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SummaryFilter {
    pub methods: Option<Vec<Method>>,
    pub exclude_distributions: Vec<Distribution>,
}

/// Two-stage aggregation: per-design proportions, then mean and sd across
/// designs within each group.
pub fn summarize(
    records: &[TrialRecord],
    metric: Metric,
    group_by: &[GroupKey],
    filter: &SummaryFilter,
) -> Vec<GroupSummary> {
    summarize_metrics(&per_design_metrics(records), metric, group_by, filter)
}

/// Group labels and member rows, keyed by sortable group position and method.
type Groups<'a> = BTreeMap<(Vec<u64>, Method), (Vec<(GroupKey, String)>, Vec<&'a MetricsRow>)>;

pub fn summarize_metrics(
    rows: &[MetricsRow],
    metric: Metric,
    group_by: &[GroupKey],
    filter: &SummaryFilter,
) -> Vec<GroupSummary> {
    let mut groups: Groups = BTreeMap::new();
    for m in rows {
        if m.metric != metric
            || filter.exclude_distributions.contains(&m.distribution)
            || filter.methods.as_ref().is_some_and(|ms| !ms.contains(&m.method))
        {
            continue;
        }
        let order: Vec<u64> = group_by.iter().map(|k| k.order(m)).collect();
        let e = groups.entry((order, m.method)).or_insert_with(|| {
            (group_by.iter().map(|k| (*k, k.value(m))).collect(), Vec::new())
        });
        e.1.push(m);
    }
    groups
        .into_iter()
        .filter_map(|((_, method), (keys, members))| {
            if members.is_empty() {
                log::warn!("empty summary group {keys:?}");
                return None;
            }
            let k = members.len() as f64;
            let mean = members.iter().map(|m| m.value).sum::<f64>() / k;
            let sd = (members.len() > 1).then(|| {
                (members.iter().map(|m| (m.value - mean).powi(2)).sum::<f64>() / (k - 1.0)).sqrt()
            });
            Some(GroupSummary {
                keys,
                method,
                metric,
                mean,
                sd,
                designs: members.len(),
                pooled_rejected: members.iter().map(|m| m.rejected).sum(),
                pooled_trials: members.iter().map(|m| m.trials).sum(),
            })
        })
        .collect()
}

/// Pooled rejection rate over all records matching `keep`.
pub fn pooled_rate<F: Fn(&TrialRecord) -> bool>(records: &[TrialRecord], keep: F) -> (usize, usize) {
    records
        .iter()
        .filter(|r| keep(r))
        .fold((0, 0), |(rej, n), r| (rej + usize::from(r.rejected), n + 1))
}

/// Central interval holding `coverage` of Binomial(trials, p0), as
/// proportions.
pub fn binomial_interval(trials: usize, p0: f64, coverage: f64) -> (f64, f64) {
    let n = trials as u64;
    let dist = Binomial::new(p0, n).expect("valid binomial");
    let tail = (1.0 - coverage) / 2.0;
    let quantile = |q: f64| -> u64 {
        let (mut lo, mut hi) = (0u64, n);
        while lo < hi {
            let mid = lo + (hi - lo) / 2;
            if dist.cdf(mid) >= q {
                hi = mid;
            } else {
                lo = mid + 1;
            }
        }
        lo
    };
    (
        quantile(tail) as f64 / trials as f64,
        quantile(1.0 - tail) as f64 / trials as f64,
    )
}

pub fn write_per_design_csv<W: Write>(rows: &[MetricsRow], metric: Metric, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record([
        "layout",
        "distribution",
        "n",
        "design_kind",
        "contrast_size",
        "method",
        "value",
        "trials",
        "flagged",
    ])?;
    for m in rows.iter().filter(|m| m.metric == metric) {
        w.write_record([
            m.layout.to_string(),
            m.distribution.to_string(),
            m.n_per_condition.to_string(),
            m.design_kind.to_string(),
            m.contrast_size.to_string(),
            m.method.to_string(),
            m.value.to_string(),
            m.trials.to_string(),
            (m.distribution == Distribution::Cauchy).to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_summary_csv<W: Write>(groups: &[GroupSummary], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let Some(first) = groups.first() else {
        w.write_record(["method", "metric", "mean", "sd", "designs", "trials"])?;
        w.flush()?;
        return Ok(());
    };
    let mut header: Vec<String> = first.keys.iter().map(|(k, _)| k.as_str().to_string()).collect();
    header.extend(["method", "metric", "mean", "sd", "designs", "trials"].map(String::from));
    w.write_record(&header)?;
    for g in groups {
        let mut row: Vec<String> = g.keys.iter().map(|(_, v)| v.clone()).collect();
        row.push(g.method.to_string());
        row.push(g.metric.as_str().to_string());
        row.push(format!("{:.4}", g.mean));
        row.push(g.sd.map(|s| format!("{s:.4}")).unwrap_or_default());
        row.push(g.designs.to_string());
        row.push(g.pooled_trials.to_string());
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Writes the per-design CSVs, the four grouped summaries, and the list of
/// dropped datasets into `dir`.
pub fn write_reports(run: &GridRun, dir: &Path) -> Result<Vec<std::path::PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let rows = per_design_metrics(&run.records);
    let mut written = Vec::new();
    let mut create = |name: &str| -> Result<std::io::BufWriter<std::fs::File>> {
        let path = dir.join(name);
        let file = std::fs::File::create(&path)?;
        written.push(path);
        Ok(std::io::BufWriter::new(file))
    };
    write_per_design_csv(&rows, Metric::TypeI, create("type_i_all_designs.csv")?)?;
    write_per_design_csv(&rows, Metric::Power, create("power_all_designs.csv")?)?;

    let tables: [(&str, Metric, &[GroupKey], SummaryFilter); 4] = [
        (
            "type_i_by_contrast_size_layout.csv",
            Metric::TypeI,
            &[GroupKey::ContrastSize, GroupKey::Layout],
            SummaryFilter {
                methods: Some(vec![Method::Artc, Method::TTest]),
                exclude_distributions: vec![Distribution::Cauchy],
            },
        ),
        (
            "power_by_distribution.csv",
            Metric::Power,
            &[GroupKey::Distribution],
            SummaryFilter::default(),
        ),
        (
            "type_i_by_distribution.csv",
            Metric::TypeI,
            &[GroupKey::Distribution],
            SummaryFilter {
                methods: Some(vec![Method::Artc, Method::Art]),
                ..Default::default()
            },
        ),
        (
            "power_by_contrast_size.csv",
            Metric::Power,
            &[GroupKey::ContrastSize],
            SummaryFilter {
                methods: Some(vec![Method::Artc, Method::Art]),
                ..Default::default()
            },
        ),
    ];
    for (name, metric, keys, filter) in tables {
        let groups = summarize_metrics(&rows, metric, keys, &filter);
        write_summary_csv(&groups, create(name)?)?;
    }

    let mut w = csv::Writer::from_writer(create("dropped_datasets.csv")?);
    w.write_record(["layout", "distribution", "n", "design_kind", "null_true", "replication", "reason"])?;
    for d in &run.dropped {
        w.write_record([
            d.design.layout.to_string(),
            d.design.distribution.to_string(),
            d.design.n_per_condition.to_string(),
            d.design.design_kind.to_string(),
            d.design.null_true.to_string(),
            d.replication.to_string(),
            d.reason.clone(),
        ])?;
    }
    w.flush()?;
    Ok(written)
}

/// Excess kurtosis above which residuals count as fat-tailed.
pub const FAT_TAIL_KURTOSIS: f64 = 10.0;

pub const FAT_TAIL_ADVICE: &str = "aligned residuals are extremely fat-tailed; ART-C contrasts are \
unreliable for such data (e.g. Cauchy-distributed populations) and should be avoided";

#[derive(Debug, Clone, PartialEq)]
pub struct DiagnosticReport {
    pub target: Vec<String>,
    pub n: usize,
    pub excess_kurtosis: f64,
    pub fat_tails: bool,
    pub advisory: Option<String>,
}

impl DiagnosticReport {
    pub fn to_key_value(&self) -> String {
        let mut s = format!(
            "target = {}\nn = {}\nexcess_kurtosis = {}\nfat_tails = {}\nthreshold = {}\n",
            self.target.join(":"),
            self.n,
            self.excess_kurtosis,
            self.fat_tails,
            FAT_TAIL_KURTOSIS
        );
        if let Some(a) = &self.advisory {
            s.push_str(&format!("advisory = {a}\n"));
        }
        s
    }
}

/// Sample excess kurtosis `m4 / m2^2 - 3` with population moments.
pub fn excess_kurtosis(values: &[f64]) -> Result<f64> {
    if values.len() < 4 {
        return Err(Error::InsufficientData(format!(
            "kurtosis needs >= 4 values, got {}",
            values.len()
        )));
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let (m2, m4) = values.iter().fold((0.0, 0.0), |(m2, m4), v| {
        let d = (v - mean) * (v - mean);
        (m2 + d, m4 + d * d)
    });
    let (m2, m4) = (m2 / n, m4 / n);
    if m2 <= f64::EPSILON * mean.abs().max(1.0).powi(2) * 1e-6 || m2 == 0.0 {
        return Err(Error::InsufficientVariance("values have zero variance".into()));
    }
    Ok(m4 / (m2 * m2) - 3.0)
}

/// Kurtosis check on the aligned responses of one contrast family.
pub fn diagnose_residuals(ds: &Dataset, spec: &ContrastSpec) -> Result<DiagnosticReport> {
    let aligned = align_artc(ds, &spec.target_factors)?;
    let k = excess_kurtosis(&aligned.y_prime)?;
    let fat = k > FAT_TAIL_KURTOSIS;
    Ok(DiagnosticReport {
        target: aligned.target.factors,
        n: ds.n_rows(),
        excess_kurtosis: k,
        fat_tails: fat,
        advisory: fat.then(|| FAT_TAIL_ADVICE.to_string()),
    })
}
