use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use artc_core::harness::{self, GridConfig};
use artc_core::simgen::{self, Distribution, Layout, SimDesign};
use artc_core::{
    align_art_effect, align_artc, anova_on_art, diagnose_residuals, load_csv, pairwise_contrasts, write_aligned_csv,
    AdjustMethod, ContrastSpec, Dataset, DesignKind, Error, Schema,
};

use crate::config::write_manifest;
use crate::{
    AlignArgs, AnalyzeArgs, Cli, Command, DataArgs, DiagnoseArgs, GridName, Scenario, SimulateArgs, ValidateArgs,
};

pub fn run(cli: &Cli, args: &[String]) -> Result<()> {
    let (name, seed, default_manifest) = match &cli.command {
        Command::Align(a) => {
            align(a)?;
            ("align", None, sibling(&a.output, "manifest.txt"))
        }
        Command::Analyze(a) => {
            analyze(a)?;
            ("analyze", None, a.output.join("manifest.txt"))
        }
        Command::Simulate(a) => {
            simulate(a)?;
            ("simulate", Some(a.seed), sibling(&a.output, "manifest.txt"))
        }
        Command::Validate(a) => {
            validate(a)?;
            ("validate", Some(a.seed), a.output.join("manifest.txt"))
        }
        Command::Diagnose(a) => {
            diagnose(a)?;
            ("diagnose", None, sibling(&a.output, "manifest.txt"))
        }
    };
    let path = cli.manifest.clone().unwrap_or(default_manifest);
    write_manifest(&path, name, seed, args)
}

/// `out.csv` -> `out.csv.<suffix>`.
fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".");
    s.push(suffix);
    PathBuf::from(s)
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    Ok(BufWriter::new(file))
}

fn load(data: &DataArgs) -> Result<Dataset> {
    let schema = Schema {
        response: data.response.clone(),
        factors: data.factors.clone(),
        subject: data.subject.clone(),
    };
    load_csv(&data.input, &schema).with_context(|| format!("loading {}", data.input.display()))
}

fn split_target(t: &str) -> Vec<String> {
    t.split(',').map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect()
}

/// Adds the could-not-be-fit wording to non-convergence errors.
fn fit_context(e: Error) -> anyhow::Error {
    match e {
        Error::NonConvergence(msg) => {
            anyhow::anyhow!("the model could not be fit to this dataset (REML did not converge): {msg}")
        }
        other => other.into(),
    }
}

fn align(a: &AlignArgs) -> Result<()> {
    let ds = load(&a.data)?;
    let mut columns = Vec::new();
    for t in &a.target {
        let target = split_target(t);
        let aligned = if a.effect {
            align_art_effect(&ds, &target)?
        } else {
            align_artc(&ds, &target)?
        };
        columns.push(aligned);
    }
    write_aligned_csv(&ds, &columns, create(&a.output)?)?;
    Ok(())
}

fn analyze(a: &AnalyzeArgs) -> Result<()> {
    let ds = load(&a.data)?;
    let kind: DesignKind = a.design_kind.into();
    if kind == DesignKind::Within && ds.subjects().is_none() {
        bail!("within-subjects analysis needs --subject");
    }
    std::fs::create_dir_all(&a.output).with_context(|| format!("creating {}", a.output.display()))?;

    let anova = anova_on_art(&ds, kind).map_err(fit_context)?;
    let mut w = csv::Writer::from_writer(create(&a.output.join("anova.csv"))?);
    w.write_record(["effect", "F", "df_num", "df_den", "p"])?;
    for row in &anova {
        w.write_record([
            row.label(),
            row.f.to_string(),
            row.df_num.to_string(),
            row.df_den.to_string(),
            row.p.to_string(),
        ])?;
    }
    w.flush()?;

    if a.target.is_empty() {
        return Ok(());
    }
    let adjust: AdjustMethod = a.adjust.into();
    let spec = ContrastSpec::new(a.target.clone(), adjust);
    let results = pairwise_contrasts(&ds, &spec, kind).map_err(fit_context)?;
    let mut w = csv::Writer::from_writer(create(&a.output.join("contrasts.csv"))?);
    w.write_record(["contrast", "estimate", "SE", "df", "t.ratio", "p.value", "p_adj", "method"])?;
    let method = format!("artc/{adjust}");
    for r in &results {
        w.write_record([
            r.label(),
            r.estimate.to_string(),
            r.se.to_string(),
            r.df.to_string(),
            r.t_ratio.to_string(),
            r.p.to_string(),
            r.p_adj.to_string(),
            method.clone(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn simulate(a: &SimulateArgs) -> Result<()> {
    let (design, (ds, recipe)) = match a.scenario {
        Some(Scenario::RunningExample) => (
            simgen::running_example_design(),
            simgen::running_example(a.seed, a.replication)?,
        ),
        None => {
            let design = SimDesign {
                layout: a.layout.parse()?,
                distribution: a.distribution.parse()?,
                n_per_condition: a.n,
                design_kind: a.design_kind.into(),
                null_true: a.null_true,
            };
            (design, simgen::gen_dataset(&design, a.seed, a.replication)?)
        }
    };
    ds.write_csv(create(&a.output)?)?;
    let sidecar = sibling(&a.output, "recipe.txt");
    std::fs::write(&sidecar, recipe.to_key_value(&design, a.seed, a.replication))
        .with_context(|| format!("writing {}", sidecar.display()))?;
    Ok(())
}

fn validate(a: &ValidateArgs) -> Result<()> {
    let layouts = a.layout.iter().map(|s| s.parse()).collect::<Result<Vec<Layout>, _>>()?;
    let dists = a
        .distribution
        .iter()
        .map(|s| s.parse())
        .collect::<Result<Vec<Distribution>, _>>()?;
    let kind: Option<DesignKind> = a.design_kind.map(Into::into);
    let grid: Vec<SimDesign> = match a.grid {
        GridName::Smoke => harness::smoke_grid(),
        GridName::Full => harness::full_grid(),
    }
    .into_iter()
    .filter(|d| layouts.is_empty() || layouts.contains(&d.layout))
    .filter(|d| dists.is_empty() || dists.contains(&d.distribution))
    .filter(|d| a.n.is_empty() || a.n.contains(&d.n_per_condition))
    .filter(|d| kind.is_none_or(|k| k == d.design_kind))
    .collect();
    if grid.is_empty() {
        bail!("the filters leave no designs to run");
    }
    let cfg = GridConfig {
        replications: a.replications,
        alpha: a.alpha,
        seed: a.seed,
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(a.workers)
        .build()
        .context("building worker pool")?;
    log::info!(
        "running {} designs x {} replications on {} workers",
        grid.len(),
        cfg.replications,
        pool.current_num_threads()
    );
    let run = pool.install(|| harness::run_grid(&grid, &cfg))?;
    if !run.dropped.is_empty() {
        log::warn!(
            "{} of {} datasets dropped after non-convergence",
            run.dropped.len(),
            run.datasets
        );
    }
    harness::write_reports(&run, &a.output)?;
    Ok(())
}

fn diagnose(a: &DiagnoseArgs) -> Result<()> {
    let ds = load(&a.data)?;
    let spec = ContrastSpec::new(a.target.clone(), AdjustMethod::None);
    let report = diagnose_residuals(&ds, &spec)?;
    if let Some(advice) = &report.advisory {
        eprintln!("warning: excess kurtosis {:.2}; {advice}", report.excess_kurtosis);
    }
    std::fs::write(&a.output, report.to_key_value()).with_context(|| format!("writing {}", a.output.display()))?;
    Ok(())
}
