use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use gaitevo_core::experiment::store::{read_runlog, write_runlog};
use gaitevo_core::experiment::workflow::{runs_dir, RUNS_DIR};
use gaitevo_core::experiment::{self, ExperimentConfig, ReevalOptions};

fn small_config(out: &Path) -> ExperimentConfig {
    let text = format!(
        r#"
output_dir = "{}"

[runs]
surfaces = ["A", "B"]
runs_per_surface = 2
base_seed = 11

[evolution]
population_size = 6
generations = 5

[reevaluation]
per_surface = 2
repeats = 3
seed = 5
"#,
        out.display()
    );
    ExperimentConfig::from_toml(&text).unwrap()
}

fn files(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut out: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.is_file())
        .map(|p| {
            let bytes = fs::read(&p).unwrap();
            (p.strip_prefix(dir).unwrap().to_path_buf(), bytes)
        })
        .collect();
    out.sort();
    out
}

#[test]
fn evolve_writes_one_log_and_snapshot_per_run() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path());
    let logs = experiment::evolve(&cfg, Some(2)).unwrap();
    assert_eq!(logs.len(), 4);
    let dir = runs_dir(&cfg);
    for (i, s) in ["A", "B", "A", "B"].iter().enumerate() {
        let stem = format!("run_{i:02}_{s}");
        assert!(dir.join(format!("{stem}.toml")).exists());
        let records = read_runlog(&dir.join(format!("{stem}.csv"))).unwrap();
        assert_eq!(records.len(), 6 * (5 + 1));
        assert!(records.iter().all(|r| r.surface == *s));
    }

    let before = files(&dir);
    experiment::evolve(&cfg, Some(1)).unwrap();
    assert_eq!(before, files(&dir), "rerun changed the logs");
}

#[test]
fn interrupted_run_resumes_to_the_same_log() {
    let (full, cut) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let cfg_full = small_config(full.path());
    let cfg_cut = small_config(cut.path());
    experiment::evolve(&cfg_full, None).unwrap();
    experiment::evolve(&cfg_cut, None).unwrap();

    // keep the initial population and one generation of one run, drop another
    let dir = runs_dir(&cfg_cut);
    let log = dir.join("run_01_B.csv");
    let records = read_runlog(&log).unwrap();
    write_runlog(&log, &records[..12]).unwrap();
    fs::remove_file(dir.join("run_02_A.csv")).unwrap();

    let err = experiment::load_runs(&dir).unwrap_err().to_string();
    assert!(err.contains("evolve"), "{err}");

    experiment::evolve(&cfg_cut, None).unwrap();
    let strip = |v: Vec<(PathBuf, Vec<u8>)>| -> Vec<_> {
        v.into_iter()
            .filter(|(p, _)| p != Path::new("experiment.toml"))
            .collect()
    };
    assert_eq!(strip(files(&runs_dir(&cfg_full))), strip(files(&dir)));
}

#[test]
fn changed_settings_do_not_silently_mix_with_old_logs() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path());
    experiment::evolve(&cfg, None).unwrap();
    let mut changed = cfg.clone();
    changed.evolution.mutation_sigma = 0.1;
    let err = experiment::evolve(&changed, None).unwrap_err().to_string();
    assert!(err.contains("different settings"), "{err}");
}

#[test]
fn config_errors_name_the_problem() {
    let err = ExperimentConfig::from_toml("[runs]\nsurfaces = [\"A\", \"E\"]\n").unwrap_err();
    assert!(format!("{err:#}").contains("unknown surface E"), "{err:#}");

    let err = ExperimentConfig::from_toml("[evolution]\npopulation_size = 1\n").unwrap_err();
    assert!(format!("{err:#}").contains("population_size"), "{err:#}");

    let err = ExperimentConfig::from_toml("[evolution]\npopulation = 8\n").unwrap_err();
    assert!(format!("{err:#}").contains("population"), "{err:#}");
}

#[test]
fn reevaluate_and_analyze_produce_the_report_bundle() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path());
    experiment::evolve(&cfg, None).unwrap();
    let dir = runs_dir(&cfg);
    let (cfg, runs) = experiment::load_runs(&dir).unwrap();

    let opts = ReevalOptions::from_config(&cfg);
    let rows = experiment::reevaluate(&cfg, &runs, &opts, None).unwrap();
    assert_eq!(rows.len(), 2 * 2 * 4 * 3);
    assert_eq!(
        rows,
        experiment::reevaluate(&cfg, &runs, &opts, Some(1)).unwrap()
    );
    let picked: Vec<&str> = rows
        .iter()
        .step_by(12)
        .map(|r| r.individual.as_str())
        .collect();
    assert_eq!(picked.len(), 4);
    assert!(rows
        .iter()
        .all(|r| !r.training_surface.is_empty() && !r.eval_surface.is_empty()));

    let too_many = ReevalOptions {
        per_surface: 10_000,
        ..opts.clone()
    };
    let err = experiment::reevaluate(&cfg, &runs, &too_many, None)
        .unwrap_err()
        .to_string();
    assert!(err.contains("or fewer"), "{err}");

    let reeval = tmp.path().join("reeval.csv");
    experiment::store::write_reeval(&reeval, &rows).unwrap();
    let out = tmp.path().join("analysis");
    let summary = experiment::analyze(&dir, Some(&reeval), &out).unwrap();
    assert_eq!(summary.significance.len(), 18);
    let m = summary.distance.as_ref().unwrap();
    assert_eq!(m.values.len(), 4);
    for i in 0..4 {
        for j in 0..4 {
            assert_eq!(m.values[i][j], m.values[j][i]);
        }
    }

    let sig = fs::read_to_string(out.join("significance.csv")).unwrap();
    assert_eq!(sig.lines().count(), 2 + 18);
    let first = files(&out);
    experiment::analyze(&dir, Some(&reeval), &out).unwrap();
    assert_eq!(first, files(&out), "analyze is not idempotent");

    let plots = tmp.path().join("plots");
    experiment::export_plots(&out, &plots).unwrap();

    for d in [&dir, &out, &plots] {
        for (p, bytes) in files(d) {
            let text = String::from_utf8(bytes).unwrap();
            assert!(
                text.starts_with("# gaitevo "),
                "{} has no schema line",
                p.display()
            );
            assert!(!text.contains('\r'));
        }
    }
    assert!(fs::read_to_string(&reeval)
        .unwrap()
        .starts_with("# gaitevo reeval v1\n"));
}

#[test]
fn corrupted_log_reports_the_line() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path());
    experiment::evolve(&cfg, None).unwrap();
    let log = runs_dir(&cfg).join("run_00_A.csv");
    let text = fs::read_to_string(&log).unwrap();
    let mut lines: Vec<String> = text.lines().map(String::from).collect();
    lines[6] = lines[6].replacen(',', ",x", 2);
    fs::write(&log, lines.join("\n") + "\n").unwrap();
    let err = format!(
        "{:#}",
        experiment::analyze(&runs_dir(&cfg), None, &tmp.path().join("a")).unwrap_err()
    );
    assert!(err.contains("line 7"), "{err}");
}

fn cli(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_gaitevo"))
        .args(args)
        .output()
        .unwrap()
}

#[test]
fn cli_end_to_end() {
    let tmp = tempfile::tempdir().unwrap();
    let root = tmp.path();
    let config = root.join("exp.toml");
    let default = cli(&["config"]);
    assert!(default.status.success());
    let mut text = String::from_utf8(default.stdout).unwrap();
    text = text.replace("runs_per_surface = 5", "runs_per_surface = 1");
    text = text.replace("generations = 32", "generations = 4");
    text = text.replace("per_surface = 6", "per_surface = 2");
    text = text.replace("repeats = 20", "repeats = 2");
    fs::write(
        &config,
        format!("output_dir = \"{}\"\n{text}", root.join("out").display()),
    )
    .unwrap();

    let s = |p: &Path| p.to_str().unwrap().to_string();
    let runs = root.join("out").join(RUNS_DIR);
    let reeval = root.join("reeval.csv");
    let analysis = root.join("analysis");
    let plots = root.join("plots");

    let o = cli(&["evolve", "--config", &s(&config), "--jobs", "2"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let o = cli(&[
        "reevaluate",
        "--runs",
        &s(&runs),
        "--out",
        &s(&reeval),
        "--seed",
        "3",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stdout).starts_with("32 evaluations"));
    let o = cli(&[
        "analyze",
        "--runs",
        &s(&runs),
        "--reeval",
        &s(&reeval),
        "--out",
        &s(&analysis),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stdout).contains("final hypervolume"));
    let o = cli(&[
        "export-plots",
        "--analysis",
        &s(&analysis),
        "--out",
        &s(&plots),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(plots.join("pareto_fronts.csv").exists());

    let genome = vec!["0.5"; 18].join(",");
    let trace = root.join("trace.csv");
    let o = cli(&[
        "simulate",
        "--genome",
        &genome,
        "--surface",
        "C",
        "--out",
        &s(&trace),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(fs::read_to_string(&trace)
        .unwrap()
        .starts_with("# gaitevo trace v1\nt,px"));

    let bad = root.join("bad.toml");
    fs::write(&bad, "[runs]\nsurfaces = [\"E\"]\n").unwrap();
    let o = cli(&["evolve", "--config", &s(&bad)]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("unknown surface E"));
}

#[test]
fn output_root_comes_from_the_environment() {
    let cfg = ExperimentConfig::default();
    // only meaningful when the variable is unset in the test environment
    if std::env::var_os(experiment::config::OUTPUT_ROOT_ENV).is_none() {
        assert_eq!(cfg.output_dir(), PathBuf::from("gaitevo-out"));
    }
    let tmp = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_gaitevo"))
        .args(["evolve", "--config"])
        .arg({
            let p = tmp.path().join("c.toml");
            fs::write(
                &p,
                "[runs]\nruns_per_surface = 1\nsurfaces = [\"A\"]\n[evolution]\ngenerations = 2\n",
            )
            .unwrap();
            p
        })
        .env(experiment::config::OUTPUT_ROOT_ENV, tmp.path().join("root"))
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(tmp
        .path()
        .join("root")
        .join(RUNS_DIR)
        .join("run_00_A.csv")
        .exists());
}
