#![allow(dead_code)]

use artc_core::data::{all_conditions, Dataset, FactorSpec, Subjects};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub const LAYOUTS: [&[usize]; 6] = [&[2], &[3], &[2, 2], &[2, 3], &[3, 3], &[2, 2, 2]];

pub fn factors(n_levels: &[usize]) -> Vec<FactorSpec> {
    n_levels
        .iter()
        .enumerate()
        .map(|(f, &k)| {
            let name = ((b'A' + f as u8) as char).to_string();
            let levels = (1..=k).map(|l| format!("{name}{l}")).collect();
            FactorSpec::new(name, levels).unwrap()
        })
        .collect()
}

/// Between-subjects data with `per_cell` rows per cell plus up to `extra`
/// more at random, continuous normal responses.
pub fn random_between(rng: &mut ChaCha8Rng, n_levels: &[usize], per_cell: usize, extra: usize) -> Dataset {
    let mut codes = vec![Vec::new(); n_levels.len()];
    let mut y = Vec::new();
    for cond in all_conditions(n_levels) {
        let effect: f64 = cond.iter().map(|&c| c as f64 * 0.7).sum();
        let m = per_cell + if extra > 0 { rng.random_range(0..=extra) } else { 0 };
        for _ in 0..m {
            for (f, &c) in cond.iter().enumerate() {
                codes[f].push(c);
            }
            let z: f64 = rng.sample(StandardNormal);
            y.push(effect + z);
        }
    }
    Dataset::new(factors(n_levels), codes, None, "Y", y).unwrap()
}

/// Complete within-subjects data: every subject once per condition.
pub fn random_within(rng: &mut ChaCha8Rng, n_levels: &[usize], n_subjects: usize) -> Dataset {
    let mut codes = vec![Vec::new(); n_levels.len()];
    let mut subj = Vec::new();
    let mut y = Vec::new();
    let offsets: Vec<f64> = (0..n_subjects).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
    for cond in all_conditions(n_levels) {
        for (s, off) in offsets.iter().enumerate() {
            for (f, &c) in cond.iter().enumerate() {
                codes[f].push(c);
            }
            subj.push(s);
            let z: f64 = rng.sample(StandardNormal);
            y.push(off + cond[0] as f64 * 0.5 + z);
        }
    }
    let subjects = Subjects {
        name: "S".into(),
        labels: (1..=n_subjects).map(|s| format!("S{s}")).collect(),
        codes: subj,
    };
    Dataset::new(factors(n_levels), codes, Some(subjects), "Y", y).unwrap()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Two-sided permutation p of the Mann-Whitney U over every split of the
/// pooled sample, using the same midranks as the observed statistic.
pub fn exact_mann_whitney_p(x: &[f64], y: &[f64]) -> f64 {
    let pooled: Vec<f64> = x.iter().chain(y).copied().collect();
    let ranks = brute_midranks(&pooled);
    let (n1, n) = (x.len(), pooled.len());
    let shift = (n1 * (n1 + 1)) as f64 / 2.0;
    let centre = (n1 * (n - n1)) as f64 / 2.0;
    let observed = (ranks[..n1].iter().sum::<f64>() - shift - centre).abs();
    let (mut hits, mut total) = (0u64, 0u64);
    for mask in 0u32..(1 << n) {
        if mask.count_ones() as usize != n1 {
            continue;
        }
        let r: f64 = (0..n).filter(|i| mask & (1 << i) != 0).map(|i| ranks[i]).sum();
        total += 1;
        if (r - shift - centre).abs() >= observed - 1e-9 {
            hits += 1;
        }
    }
    hits as f64 / total as f64
}

/// Two-sided sign-flip p of the signed-rank statistic over all 2^n sign
/// assignments of the nonzero differences.
pub fn exact_signed_rank_p(d: &[f64]) -> f64 {
    let d: Vec<f64> = d.iter().copied().filter(|v| *v != 0.0).collect();
    let abs: Vec<f64> = d.iter().map(|v| v.abs()).collect();
    let ranks = brute_midranks(&abs);
    let n = d.len();
    let centre = ranks.iter().sum::<f64>() / 2.0;
    let w: f64 = (0..n).filter(|&i| d[i] > 0.0).map(|i| ranks[i]).sum();
    let observed = (w - centre).abs();
    let mut hits = 0u64;
    for mask in 0u32..(1 << n) {
        let s: f64 = (0..n).filter(|i| mask & (1 << i) != 0).map(|i| ranks[i]).sum();
        if (s - centre).abs() >= observed - 1e-9 {
            hits += 1;
        }
    }
    hits as f64 / (1u64 << n) as f64
}

/// Quadratic midranks: 1 + #smaller + (#equal - 1) / 2.
pub fn brute_midranks(v: &[f64]) -> Vec<f64> {
    v.iter()
        .map(|a| {
            let less = v.iter().filter(|b| *b < a).count() as f64;
            let eq = v.iter().filter(|b| *b == a).count() as f64;
            1.0 + less + (eq - 1.0) / 2.0
        })
        .collect()
}
