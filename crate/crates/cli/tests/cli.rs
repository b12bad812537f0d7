use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const WORKED: &str = "A,B,C,Y\n\
    A1,B1,C1,7\nA1,B1,C1,5\nA1,B1,C2,2\nA1,B1,C2,2\n\
    A1,B2,C1,10\nA1,B2,C1,8\nA1,B2,C2,5\nA1,B2,C2,1\n";

fn artc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_artc")).args(args).output().unwrap()
}

fn ok(args: &[&str]) -> Output {
    let out = artc(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn column(csv_text: &str, name: &str) -> Vec<String> {
    let mut r = csv::Reader::from_reader(csv_text.as_bytes());
    let idx = r.headers().unwrap().iter().position(|h| h == name).unwrap();
    r.records().map(|rec| rec.unwrap()[idx].to_string()).collect()
}

#[test]
fn align_reproduces_worked_ranks() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("data.csv");
    let output = dir.path().join("aligned.csv");
    fs::write(&input, WORKED).unwrap();
    ok(&["align", "-i", path(&input), "--response", "Y", "--factors", "A,B,C", "--target", "A,B", "-o", path(&output)]);
    let text = fs::read_to_string(&output).unwrap();
    let ranks: Vec<f64> = column(&text, "Y_double_prime").iter().map(|s| s.parse().unwrap()).collect();
    assert_eq!(ranks, vec![5.5, 1.0, 3.0, 3.0, 7.0, 5.5, 8.0, 3.0]);
    assert!(output.with_extension("csv.manifest.txt").exists());
}

#[test]
fn missing_response_flag_fails() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("data.csv");
    fs::write(&input, WORKED).unwrap();
    let out = artc(&["align", "-i", path(&input), "--factors", "A,B", "--target", "A", "-o", "x.csv"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("--response"));
}

#[test]
fn unknown_target_factor_is_named() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("data.csv");
    fs::write(&input, WORKED).unwrap();
    let out = artc(&[
        "align", "-i", path(&input), "--response", "Y", "--factors", "A,B,C", "--target", "A,Q", "-o",
        path(&dir.path().join("o.csv")),
    ]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains('Q'));
}

fn simulate_running_example(dir: &Path) -> std::path::PathBuf {
    let data = dir.join("running.csv");
    ok(&["simulate", "--scenario", "running-example", "--seed", "7", "-o", path(&data)]);
    data
}

#[test]
fn running_example_analysis_reports_cross_factor_contrasts() {
    let dir = tempfile::tempdir().unwrap();
    let data = simulate_running_example(dir.path());
    let out = dir.path().join("analysis");
    ok(&[
        "analyze", "-i", path(&data), "--response", "Y", "--factors", "A,B,C", "--subject", "S",
        "--design-kind", "within", "--target", "A,B", "-o", path(&out),
    ]);
    let contrasts = fs::read_to_string(out.join("contrasts.csv")).unwrap();
    let labels = column(&contrasts, "contrast");
    assert_eq!(labels.len(), 6);
    assert!(labels.iter().any(|l| l == "A1,B1 - A1,B2"));
    assert!(labels.iter().any(|l| l == "A1,B1 - A2,B2"));
    assert!(column(&contrasts, "df").iter().all(|d| d == "273"));
    let anova = fs::read_to_string(out.join("anova.csv")).unwrap();
    assert_eq!(column(&anova, "effect").len(), 7);
}

#[test]
fn unadjusted_p_values_are_passed_through() {
    let dir = tempfile::tempdir().unwrap();
    let data = simulate_running_example(dir.path());
    let out = dir.path().join("analysis");
    ok(&[
        "analyze", "-i", path(&data), "--response", "Y", "--factors", "A,B,C", "--subject", "S",
        "--design-kind", "within", "--target", "A,B", "--adjust", "none", "-o", path(&out),
    ]);
    let text = fs::read_to_string(out.join("contrasts.csv")).unwrap();
    assert_eq!(column(&text, "p.value"), column(&text, "p_adj"));
    assert!(column(&text, "method").iter().all(|m| m == "artc/none"));
}

#[test]
fn between_2x2_gives_three_effects_and_six_contrasts() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("toy.csv");
    let mut text = String::from("A,B,Y\n");
    let ys = [3.1, 2.2, 4.5, 1.9, 6.0, 5.1, 7.7, 4.8, 2.4, 3.3, 1.2, 2.8, 9.1, 8.4, 6.6, 7.9];
    for (i, y) in ys.iter().enumerate() {
        text.push_str(&format!("a{},b{},{y}\n", i / 8, (i / 4) % 2));
    }
    fs::write(&data, text).unwrap();
    let out = dir.path().join("res");
    ok(&[
        "analyze", "-i", path(&data), "--response", "Y", "--factors", "A,B", "--design-kind", "between",
        "--target", "A,B", "-o", path(&out),
    ]);
    let anova = fs::read_to_string(out.join("anova.csv")).unwrap();
    assert_eq!(column(&anova, "effect"), vec!["A", "B", "A:B"]);
    let contrasts = fs::read_to_string(out.join("contrasts.csv")).unwrap();
    assert_eq!(column(&contrasts, "contrast").len(), 6);
    assert!(column(&contrasts, "df").iter().all(|d| d == "12"));
}

#[test]
fn within_analysis_without_subject_fails() {
    let dir = tempfile::tempdir().unwrap();
    let data = simulate_running_example(dir.path());
    let out = artc(&[
        "analyze", "-i", path(&data), "--response", "Y", "--factors", "A,B,C", "--design-kind", "within", "-o",
        path(&dir.path().join("res")),
    ]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("--subject"));
}

#[test]
fn smoke_validation_writes_reports() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("reports");
    ok(&["validate", "--grid", "smoke", "--replications", "1", "--workers", "2", "-o", path(&out)]);
    for f in ["type_i_all_designs.csv", "power_all_designs.csv", "dropped_datasets.csv", "manifest.txt"] {
        assert!(out.join(f).exists(), "{f}");
    }
    let power = fs::read_to_string(out.join("power_all_designs.csv")).unwrap();
    assert!(!column(&power, "value").is_empty());
}

#[test]
fn simulation_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str| {
        let p = dir.path().join(name);
        ok(&[
            "simulate", "--layout", "3x3", "--distribution", "t3", "--n", "12", "--design-kind", "within",
            "--seed", "99", "-o", path(&p),
        ]);
        (fs::read(&p).unwrap(), fs::read(p.with_extension("csv.recipe.txt")).unwrap())
    };
    assert_eq!(run("one.csv"), run("two.csv"));
}

#[test]
fn diagnose_warns_on_fat_tails() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("cauchy.csv");
    ok(&[
        "simulate", "--layout", "2x2", "--distribution", "cauchy", "--n", "200", "--null-true", "--seed", "3", "-o",
        path(&data),
    ]);
    let report = dir.path().join("report.txt");
    let out = ok(&[
        "diagnose", "-i", path(&data), "--response", "Y", "--factors", "A,B", "--target", "A", "-o", path(&report),
    ]);
    assert!(String::from_utf8_lossy(&out.stderr).contains("warning: excess kurtosis"));
    assert!(fs::read_to_string(&report).unwrap().contains("fat_tails = true"));
}

#[test]
fn config_values_apply_unless_overridden() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("sim.toml");
    fs::write(&config, "layout = \"2x2x2\"\nn = 5\nseed = 11\n").unwrap();
    let from_config = dir.path().join("a.csv");
    let manifest = dir.path().join("run.txt");
    ok(&[
        "--config", path(&config), "--manifest", path(&manifest), "simulate", "--seed", "12", "-o",
        path(&from_config),
    ]);
    let recipe = fs::read_to_string(from_config.with_extension("csv.recipe.txt")).unwrap();
    assert!(recipe.contains("layout = 2x2x2"), "{recipe}");
    assert!(recipe.contains("seed = 12"), "{recipe}");
    assert_eq!(fs::read_to_string(&from_config).unwrap().lines().count(), 1 + 5 * 8);

    let text = fs::read_to_string(&manifest).unwrap();
    assert!(text.contains("subcommand = simulate"), "{text}");
    assert!(text.contains("seed = 12"), "{text}");
}
