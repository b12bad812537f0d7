//! Linear models fitted to aligned ranks.
//!
//! Between-subjects data get ordinary least squares on the full-factorial
//! design. Within-subjects data get a random-intercept model
//! `y = X beta + Z b + e` with `Var(y) = sigma2 * (I + theta * Z Z')`, where
//! `Z` maps rows to subjects. `theta` (subject variance over residual
//! variance) is estimated by profiling the REML criterion over `log theta`
//! with a coarse grid followed by golden-section refinement. `V(theta)` is
//! block diagonal with blocks `I + theta * J`, whose inverse is
//! `I - theta / (1 + m * theta) * J`, so each evaluation costs one pass over
//! the rows plus a `p x p` Cholesky factorization.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::data::{all_conditions, Dataset, DesignKind};
use crate::design::{Coding, FactorialDesign};
use crate::error::{Error, Result};

/// Bounds and tolerance for the one-dimensional REML search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RemlOptions {
    pub log_theta_min: f64,
    pub log_theta_max: f64,
    /// Absolute tolerance on `log theta`.
    pub tolerance: f64,
    /// Coarse grid points used to bracket the minimum.
    pub grid_points: usize,
}

impl Default for RemlOptions {
    fn default() -> Self {
        Self {
            log_theta_min: -12.0,
            log_theta_max: 12.0,
            tolerance: 1e-8,
            grid_points: 25,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FitOptions {
    pub coding: Coding,
    pub reml: RemlOptions,
}

#[derive(Debug, Clone)]
pub struct FittedModel {
    pub design: FactorialDesign,
    pub kind: DesignKind,
    pub beta: DVector<f64>,
    pub cov_beta: DMatrix<f64>,
    pub sigma2: f64,
    /// Subject variance over residual variance; 0 for between-subjects fits.
    pub theta: f64,
    pub df_contrast: f64,
    pub n: usize,
    pub p: usize,
    pub s: usize,
    /// Profiled REML criterion (-2 log restricted likelihood, up to a
    /// constant) at `theta`; `None` for OLS fits.
    pub reml_criterion: Option<f64>,
}

impl FittedModel {
    /// Model-predicted mean of one full cell.
    pub fn predict_cell(&self, cond: &[usize]) -> f64 {
        self.design.row(cond).dot(&self.beta)
    }

    /// Coefficient vector of the estimated marginal mean for level `level`
    /// of `factor`, averaging the other factors' levels with equal weights.
    pub fn emm_coefficients(&self, factor: usize, level: usize) -> DVector<f64> {
        let cells: Vec<_> = all_conditions(&self.design.n_levels)
            .into_iter()
            .filter(|c| c[factor] == level)
            .collect();
        let mut acc = DVector::zeros(self.p);
        for c in &cells {
            acc += self.design.row(c);
        }
        acc / cells.len() as f64
    }

    pub fn estimated_marginal_mean(&self, factor: usize, level: usize) -> f64 {
        self.emm_coefficients(factor, level).dot(&self.beta)
    }

    /// Estimate and standard error of the linear combination `c' beta`.
    pub fn linear_combination(&self, c: &DVector<f64>) -> (f64, f64) {
        let est = c.dot(&self.beta);
        let var = (c.transpose() * &self.cov_beta * c)[(0, 0)];
        (est, var.max(0.0).sqrt())
    }
}

pub fn fit_model(ds: &Dataset, kind: DesignKind) -> Result<FittedModel> {
    fit_model_with(ds, kind, &FitOptions::default())
}

pub fn fit_model_with(ds: &Dataset, kind: DesignKind, opts: &FitOptions) -> Result<FittedModel> {
    let problem = Problem::new(ds, kind, opts.coding)?;
    match kind {
        DesignKind::Between => problem.fit_at(0.0, None),
        DesignKind::Within => problem.fit_reml(&opts.reml),
    }
}

/// Within-subjects fit with `theta` held fixed instead of estimated.
pub fn fit_mixed_at(ds: &Dataset, theta: f64, coding: Coding) -> Result<FittedModel> {
    if !(theta >= 0.0 && theta.is_finite()) {
        return Err(Error::InvalidArgument(format!("theta must be >= 0, got {theta}")));
    }
    let problem = Problem::new(ds, DesignKind::Within, coding)?;
    let crit = problem.reml_criterion(theta)?;
    problem.fit_at(theta, Some(crit))
}

struct Group {
    rows: Vec<usize>,
    /// X_s' 1
    col_sums: DVector<f64>,
    y_sum: f64,
}

struct Problem {
    design: FactorialDesign,
    kind: DesignKind,
    x: DMatrix<f64>,
    y: DVector<f64>,
    xtx: DMatrix<f64>,
    xty: DVector<f64>,
    groups: Vec<Group>,
    n: usize,
    p: usize,
}

struct Gls {
    beta: DVector<f64>,
    chol: Cholesky<f64, Dyn>,
    /// r' V^-1 r
    quad: f64,
}

impl Problem {
    fn new(ds: &Dataset, kind: DesignKind, coding: Coding) -> Result<Self> {
        ds.require_complete()?;
        let design = FactorialDesign::new(&ds.n_levels(), coding);
        let n = ds.n_rows();
        let p = design.n_columns();
        if n <= p {
            return Err(Error::InsufficientData(format!(
                "{n} rows cannot support {p} fixed effects and a residual variance"
            )));
        }
        let groups = match kind {
            DesignKind::Between => Vec::new(),
            DesignKind::Within => within_groups(ds)?,
        };
        let x = design.matrix(ds);
        let y = DVector::from_column_slice(ds.response());
        let xtx = x.transpose() * &x;
        let xty = x.transpose() * &y;
        let groups = groups
            .into_iter()
            .map(|rows| {
                let mut col_sums = DVector::zeros(p);
                let mut y_sum = 0.0;
                for &r in &rows {
                    col_sums += x.row(r).transpose();
                    y_sum += y[r];
                }
                Group {
                    rows,
                    col_sums,
                    y_sum,
                }
            })
            .collect();
        let problem = Self {
            design,
            kind,
            x,
            y,
            xtx,
            xty,
            groups,
            n,
            p,
        };
        problem.check_rank()?;
        Ok(problem)
    }

    fn check_rank(&self) -> Result<()> {
        let chol = Cholesky::new(self.xtx.clone())
            .ok_or_else(|| Error::Estimability("X'X is not positive definite".into()))?;
        let diag = chol.l_dirty().diagonal();
        let max = diag.iter().cloned().fold(0.0, f64::max);
        let min = diag.iter().cloned().fold(f64::INFINITY, f64::min);
        if !(min > 1e-7 * max) {
            return Err(Error::Estimability("design matrix is rank deficient".into()));
        }
        Ok(())
    }

    fn df_contrast(&self) -> f64 {
        match self.kind {
            DesignKind::Between => (self.n - self.p) as f64,
            DesignKind::Within => (self.n - self.p) as f64 - (self.groups.len() as f64 - 1.0),
        }
    }

    fn gls(&self, theta: f64) -> Result<Gls> {
        let mut a = self.xtx.clone();
        let mut b = self.xty.clone();
        if theta > 0.0 {
            for g in &self.groups {
                let w = theta / (1.0 + g.rows.len() as f64 * theta);
                a.ger(-w, &g.col_sums, &g.col_sums, 1.0);
                b.axpy(-w * g.y_sum, &g.col_sums, 1.0);
            }
        }
        let chol = Cholesky::new(a)
            .ok_or_else(|| Error::Estimability("X'V^-1X is not positive definite".into()))?;
        let beta = chol.solve(&b);
        let resid = &self.y - &self.x * &beta;
        let mut quad = resid.norm_squared();
        if theta > 0.0 {
            for g in &self.groups {
                let w = theta / (1.0 + g.rows.len() as f64 * theta);
                let s: f64 = g.rows.iter().map(|&r| resid[r]).sum();
                quad -= w * s * s;
            }
        }
        Ok(Gls { beta, chol, quad })
    }

    fn reml_from(&self, theta: f64, gls: &Gls) -> f64 {
        let dof = (self.n - self.p) as f64;
        let logdet_v: f64 = self
            .groups
            .iter()
            .map(|g| (g.rows.len() as f64 * theta).ln_1p())
            .sum();
        let logdet_a: f64 = gls.chol.l_dirty().diagonal().iter().map(|d| 2.0 * d.ln()).sum();
        dof * (gls.quad / dof).ln() + logdet_v + logdet_a
    }

    fn reml_criterion(&self, theta: f64) -> Result<f64> {
        let gls = self.gls(theta)?;
        Ok(self.reml_from(theta, &gls))
    }

    fn fit_at(&self, theta: f64, reml_criterion: Option<f64>) -> Result<FittedModel> {
        let df = self.df_contrast();
        if df < 1.0 {
            return Err(Error::InsufficientData(format!(
                "contrast degrees of freedom {df} < 1"
            )));
        }
        let gls = self.gls(theta)?;
        let sigma2 = (gls.quad / (self.n - self.p) as f64).max(0.0);
        let a_inv = gls.chol.inverse();
        let mut cov = a_inv * sigma2;
        // Symmetrize away rounding in the inverse.
        cov = (&cov + cov.transpose()) * 0.5;
        Ok(FittedModel {
            design: self.design.clone(),
            kind: self.kind,
            beta: gls.beta,
            cov_beta: cov,
            sigma2,
            theta,
            df_contrast: df,
            n: self.n,
            p: self.p,
            s: self.groups.len(),
            reml_criterion,
        })
    }

    fn fit_reml(&self, opts: &RemlOptions) -> Result<FittedModel> {
        // An exact fit leaves nothing to partition between subject and
        // residual variance.
        let ols = self.gls(0.0)?;
        if ols.quad <= 1e-24 * (1.0 + self.y.norm_squared()) {
            return self.fit_at(0.0, None);
        }
        let log_theta = profile_log_theta(|lt| self.reml_criterion(lt.exp()), opts)?;
        let theta = match log_theta {
            Some(lt) => lt.exp(),
            None => 0.0,
        };
        let crit = self.reml_criterion(theta)?;
        if !crit.is_finite() {
            return Err(Error::NonConvergence("REML criterion is not finite".into()));
        }
        self.fit_at(theta, Some(crit))
    }
}

/// Row indices per subject, after checking the subject x condition grid is
/// complete with one row per pair.
fn within_groups(ds: &Dataset) -> Result<Vec<Vec<usize>>> {
    let subjects = ds.subjects().ok_or_else(|| {
        Error::InvalidArgument("within-subjects fit needs a subject column".into())
    })?;
    let mut groups = vec![Vec::new(); subjects.labels.len()];
    for (row, &s) in subjects.codes.iter().enumerate() {
        groups[s].push(row);
    }
    let n_cells: usize = ds.n_levels().iter().product();
    for (s, rows) in groups.iter().enumerate() {
        // Rows are unique per (subject, condition), so a full count means a
        // full grid.
        if rows.len() != n_cells {
            return Err(Error::InvalidArgument(format!(
                "subject {} has {} of {} conditions; within-subjects fits need a complete grid",
                subjects.labels[s],
                rows.len(),
                n_cells
            )));
        }
    }
    if groups.len() < 2 {
        return Err(Error::InsufficientData("within-subjects fit needs >= 2 subjects".into()));
    }
    Ok(groups)
}

const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// Minimizes `f(log theta)` over the configured interval. Returns `None`
/// when the minimum sits on the lower bound (theta = 0, a boundary fit).
fn profile_log_theta<F>(f: F, opts: &RemlOptions) -> Result<Option<f64>>
where
    F: Fn(f64) -> Result<f64>,
{
    let (lo, hi) = (opts.log_theta_min, opts.log_theta_max);
    if !(lo < hi) || opts.grid_points < 3 || !(opts.tolerance > 0.0) {
        return Err(Error::InvalidArgument("invalid REML search options".into()));
    }
    let eval = |lt: f64| -> Result<f64> {
        let v = f(lt)?;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::NonConvergence(format!(
                "REML criterion is not finite at log theta = {lt}"
            )))
        }
    };
    let g = opts.grid_points;
    let step = (hi - lo) / (g - 1) as f64;
    let mut best = (0, f64::INFINITY);
    for i in 0..g {
        let v = eval(lo + step * i as f64)?;
        if v < best.1 {
            best = (i, v);
        }
    }
    let mut a = lo + step * best.0.saturating_sub(1) as f64;
    let mut b = lo + step * (best.0 + 1).min(g - 1) as f64;

    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = eval(c)?;
    let mut fd = eval(d)?;
    while b - a > opts.tolerance {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = eval(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = eval(d)?;
        }
    }
    let lt = 0.5 * (a + b);
    if hi - lt <= opts.tolerance {
        return Err(Error::NonConvergence(format!(
            "variance ratio search hit the upper bound log theta = {hi}"
        )));
    }
    if lt - lo <= opts.tolerance {
        return Ok(None);
    }
    Ok(Some(lt))
}
