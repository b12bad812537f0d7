use crate::error::{Error, Result};

/// Ascending midranks. Exactly equal values share the mean of the ranks they
/// span; there is no tolerance-based tie grouping.
pub fn midrank(values: &[f64]) -> Result<Vec<f64>> {
    if values.is_empty() {
        return Err(Error::InsufficientData("cannot rank an empty sample".into()));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("cannot rank non-finite values".into()));
    }
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));

    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        // total_cmp separates -0.0 from 0.0; they are the same value here.
        while j < order.len() && values[order[j]] == values[order[i]] {
            j += 1;
        }
        // ranks i+1 ..= j
        let r = (i + 1 + j) as f64 / 2.0;
        for &k in &order[i..j] {
            ranks[k] = r;
        }
        i = j;
    }
    Ok(ranks)
}

/// Sizes of each tie group, in ascending value order.
pub(crate) fn tie_group_sizes(values: &[f64]) -> Vec<usize> {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut groups = Vec::new();
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i + 1;
        while j < sorted.len() && sorted[j] == sorted[i] {
            j += 1;
        }
        groups.push(j - i);
        i = j;
    }
    groups
}
