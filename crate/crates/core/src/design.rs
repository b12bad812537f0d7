//! Full-factorial fixed-effect design matrices.

use nalgebra::{DMatrix, DVector};

use crate::data::{Condition, Dataset};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum Coding {
    /// Reference-level dummies; the first level is the reference.
    #[default]
    Treatment,
    /// Sum-to-zero effects coding; the last level is coded -1.
    Sum,
}

/// One model term (a factor subset) and the design columns it owns.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Term {
    pub factors: Vec<usize>,
    pub columns: std::ops::Range<usize>,
}

/// Intercept plus every main effect and interaction of the given factors.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FactorialDesign {
    pub n_levels: Vec<usize>,
    pub coding: Coding,
    pub terms: Vec<Term>,
}

impl FactorialDesign {
    pub fn new(n_levels: &[usize], coding: Coding) -> Self {
        let k = n_levels.len();
        let mut subsets: Vec<Vec<usize>> = (0..(1usize << k))
            .map(|mask| (0..k).filter(|b| mask & (1 << b) != 0).collect())
            .collect();
        subsets.sort_by(|a, b| a.len().cmp(&b.len()).then_with(|| a.cmp(b)));
        let mut terms = Vec::with_capacity(subsets.len());
        let mut start = 0;
        for factors in subsets {
            let width: usize = factors.iter().map(|&f| n_levels[f] - 1).product();
            if width == 0 {
                continue;
            }
            terms.push(Term {
                factors,
                columns: start..start + width,
            });
            start += width;
        }
        Self {
            n_levels: n_levels.to_vec(),
            coding,
            terms,
        }
    }

    pub fn n_columns(&self) -> usize {
        self.terms.last().map_or(0, |t| t.columns.end)
    }

    pub fn term(&self, factors: &[usize]) -> Option<&Term> {
        let mut sorted = factors.to_vec();
        sorted.sort_unstable();
        self.terms.iter().find(|t| t.factors == sorted)
    }

    fn code(&self, factor: usize, level: usize, column: usize) -> f64 {
        let k = self.n_levels[factor];
        match self.coding {
            Coding::Treatment => f64::from(u8::from(level == column + 1)),
            Coding::Sum => {
                if level == column {
                    1.0
                } else if level == k - 1 {
                    -1.0
                } else {
                    0.0
                }
            }
        }
    }

    /// Design row for one cell.
    pub fn row(&self, cond: &[usize]) -> DVector<f64> {
        let mut x = DVector::zeros(self.n_columns());
        for term in &self.terms {
            // Column index within the term is a mixed-radix number over the
            // term's factors, first factor most significant.
            for (offset, col) in term.columns.clone().enumerate() {
                let mut rem = offset;
                let mut value = 1.0;
                for &f in term.factors.iter().rev() {
                    let width = self.n_levels[f] - 1;
                    value *= self.code(f, cond[f], rem % width);
                    rem /= width;
                }
                x[col] = value;
            }
        }
        x
    }

    pub fn matrix(&self, ds: &Dataset) -> DMatrix<f64> {
        let n = ds.n_rows();
        let p = self.n_columns();
        let mut x = DMatrix::zeros(n, p);
        let mut cache: std::collections::HashMap<Condition, DVector<f64>> = Default::default();
        for r in 0..n {
            let cond = ds.condition(r);
            let row = cache.entry(cond).or_insert_with_key(|c| self.row(c));
            x.set_row(r, &row.transpose());
        }
        x
    }
}
