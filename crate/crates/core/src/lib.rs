//! Aligned Rank Transform with multifactor contrasts (ART-C).
//!
//! The crate loads factorial data, aligns and ranks responses, fits linear
//! or random-intercept models to the ranks, and runs pairwise contrasts over
//! any combination of factors. It also contains a data generator and a
//! Monte Carlo harness comparing ART-C with classic ART, t-tests and rank
//! tests.

pub mod align;
pub mod classic;
pub mod contrast;
pub mod data;
pub mod design;
pub mod error;
pub mod harness;
pub mod model;
pub mod rank;
pub mod rng;
pub mod simgen;

pub use align::{align_art_effect, align_artc, concat_factors, write_aligned_csv, AlignKind, AlignTarget, AlignedColumns};
pub use classic::{mann_whitney_u, t_test, wilcoxon_signed_rank, TestMethod, TestResult};
pub use contrast::{
    adjust_pvalues, anova_on_art, art_pairwise_contrasts, contrasts_on_ranks, enumerate_contrast_families,
    pairwise_contrasts, AnovaRow, ContrastFamily, ContrastResult,
};
pub use data::{load_csv, read_csv, AdjustMethod, ContrastSpec, Dataset, DesignKind, FactorSpec, Schema};
pub use error::{Error, Result};
pub use harness::{diagnose_residuals, run_grid, summarize, DiagnosticReport, GridConfig, GridRun, Method, Metric, TrialRecord};
pub use model::{fit_model, fit_model_with, FitOptions, FittedModel};
pub use rank::midrank;
pub use simgen::{gen_dataset, Distribution, Layout, SimDesign};
