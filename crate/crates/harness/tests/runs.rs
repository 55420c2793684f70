use std::path::Path;

use sfplus_harness::commands::{fit_log, FitRequest, PREDICT_WINDOW};
use sfplus_harness::config::{parse_table, resolve};
use sfplus_harness::runlog::LogTable;
use sfplus_harness::sweep::{run_sweep, write_table, SweepSpec};
use sfplus_harness::{execute, presets, run_to_dir, HarnessError, RunConfig, RunOptions};

fn preset(name: &str, sets: &[&str]) -> RunConfig {
    let sets: Vec<String> = sets.iter().map(|s| s.to_string()).collect();
    RunConfig::from_table(resolve(parse_table(presets::get(name).unwrap()).unwrap(), &sets).unwrap()).unwrap()
}

fn config(text: &str) -> RunConfig {
    RunConfig::from_toml_str(text).unwrap()
}

const SMALL_LOGISTIC: &str = r#"
[problem]
kind = "logistic_synthetic"
dim = 10
samples = 300

[optimizer]
kind = "sfplus"
warmup_steps = 20
c_warmup = 40

[run]
total_steps = 500
batch_size = 8
log_every = 7
seed = 3
name = "small"
"#;

#[test]
fn reruns_are_byte_identical() {
    let cfg = config(SMALL_LOGISTIC);
    let opts = RunOptions {
        normalize_wallclock: true,
    };
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    run_to_dir(&cfg, a.path(), &opts).unwrap();
    run_to_dir(&cfg, b.path(), &opts).unwrap();
    for file in ["small.csv", "small.summary.json"] {
        let x = std::fs::read(a.path().join(file)).unwrap();
        let y = std::fs::read(b.path().join(file)).unwrap();
        assert!(!x.is_empty());
        assert_eq!(x, y, "{file} differs");
    }
    let other = RunConfig {
        run: sfplus_harness::config::RunSpec {
            seed: 4,
            ..cfg.run.clone()
        },
        ..cfg
    };
    let c = tempfile::tempdir().unwrap();
    run_to_dir(&other, c.path(), &opts).unwrap();
    assert_ne!(
        std::fs::read(a.path().join("small.csv")).unwrap(),
        std::fs::read(c.path().join("small.csv")).unwrap()
    );
}

#[test]
fn log_rows_follow_the_cadence() {
    let out = execute(&config(SMALL_LOGISTIC)).unwrap();
    let steps: Vec<u64> = out.records.iter().map(|r| r.step).collect();
    assert_eq!(steps.first(), Some(&7));
    assert_eq!(steps.last(), Some(&500));
    assert!(steps[..steps.len() - 1].iter().all(|s| s % 7 == 0));
    assert_eq!(out.diagnostics.len(), 500);
}

#[test]
fn sweep_results_do_not_depend_on_parallelism() {
    let spec = SweepSpec::from_toml_str(
        r#"
        name = "par"
        [base]
        problem = { kind = "quadratic", dim = 20, condition_number = 10.0, noise_std = 0.5 }
        optimizer = { kind = "sf", beta1 = 0.0, warmup_steps = 10 }
        run = { total_steps = 300, name = "q" }
        [grid]
        "optimizer.lr" = [0.01, 0.03, 0.1]
        "optimizer.beta1" = [0.0, 0.9]
        "#,
    )
    .unwrap();
    let configs = spec.expand(&[]).unwrap();
    let opts = RunOptions {
        normalize_wallclock: true,
    };
    let mut tables = Vec::new();
    let mut dirs = Vec::new();
    for p in [1, 4] {
        let dir = tempfile::tempdir().unwrap();
        let rows = run_sweep(&configs, p, Some(dir.path()), &opts).unwrap();
        let mut buf = Vec::new();
        write_table(&rows, &mut buf).unwrap();
        tables.push(buf);
        dirs.push(dir);
    }
    assert_eq!(tables[0], tables[1]);
    for cfg in &configs {
        let name = format!("{}.csv", cfg.run.name);
        assert_eq!(
            std::fs::read(dirs[0].path().join(&name)).unwrap(),
            std::fs::read(dirs[1].path().join(&name)).unwrap()
        );
    }
}

fn write_model_log(dir: &Path) -> std::path::PathBuf {
    let path = dir.join("model.csv");
    let mut text = String::from("step,loss_at_x\n");
    for i in 1..=2000 {
        let t = 10.0 * i as f64;
        text.push_str(&format!("{t},{:.17e}\n", 20.3 / (t + 377.0).sqrt() + 2.07));
    }
    std::fs::write(&path, text).unwrap();
    path
}

#[test]
fn fit_recovers_a_generated_curve_and_writes_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let log = write_model_log(dir.path());
    let req = FitRequest {
        window: PREDICT_WINDOW,
        horizon: Some(40_000.0),
        ..FitRequest::default()
    };
    let (out, written) = fit_log(&log, &req, dir.path()).unwrap();
    let r = &out.report;
    assert!((r.a / 20.3 - 1.0).abs() < 1e-3);
    assert!((r.b / 377.0 - 1.0).abs() < 1e-3);
    assert!((r.c / 2.07 - 1.0).abs() < 1e-3);
    assert!(r.max_rel_error_second_half.unwrap() < 1e-6);
    assert_eq!(written.len(), 2);
    let json: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&written[0]).unwrap()).unwrap();
    assert!(json["f_star_estimate"].as_f64().is_some());
    let pred = LogTable::read(&written[1]).unwrap();
    assert_eq!(pred.columns, ["step", "predicted", "actual"]);
    assert_eq!(pred.column("step").unwrap().last(), Some(&40_000.0));
    assert!(pred.column("actual").unwrap().last().unwrap().is_nan());
}

#[test]
fn empty_fit_window_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let log = write_model_log(dir.path());
    for window in [(0.5, 0.5), (0.9, 0.1), (0.0, 1e-9)] {
        let req = FitRequest {
            window,
            ..FitRequest::default()
        };
        let err = fit_log(&log, &req, dir.path()).unwrap_err();
        assert!(matches!(err, HarnessError::ConfigInvalid(_)), "{window:?}: {err}");
    }
}

#[test]
fn default_preset_solves_the_noisy_quadratic() {
    let out = execute(&preset("sfplus-quadratic", &[])).unwrap();
    assert!(!out.summary.diverged);
    assert!(out.summary.final_loss_x < 1e-3, "final loss {}", out.summary.final_loss_x);
}

#[test]
fn pure_z_sfplus_run_matches_the_adamc_baseline_log() {
    let base = r#"
        [problem]
        kind = "normalized_mlp"
        width = 8
        depth = 2
        [optimizer]
        lr = 0.02
        weight_decay = 0.5
        [run]
        total_steps = 400
        batch_size = 16
        log_every = 1
        eval_every = 1
    "#;
    let mut table = parse_table(base).unwrap();
    let sf = [
        "optimizer.kind=\"sfplus\"",
        "optimizer.step_rule=\"fixed\"",
        "optimizer.sf_beta=0.0",
        "optimizer.c_warmup=400",
    ];
    let sf: Vec<String> = sf.iter().map(|s| s.to_string()).collect();
    let a = execute(&RunConfig::from_table(resolve(table.clone(), &sf).unwrap()).unwrap()).unwrap();
    table = resolve(table, &["optimizer.kind=\"adamc-full\"".into()]).unwrap();
    let b = execute(&RunConfig::from_table(table).unwrap()).unwrap();
    assert_eq!(a.records.len(), b.records.len());
    for (x, y) in a.records.iter().zip(&b.records) {
        assert!((x.loss_at_x - y.loss_at_x).abs() <= 1e-12 * y.loss_at_x.abs());
        assert!((x.loss_at_y - y.loss_at_y).abs() <= 1e-12 * y.loss_at_y.abs());
    }
}

#[test]
fn every_preset_runs_briefly() {
    for p in presets::RUN_PRESETS {
        let cfg = preset(p.name, &["run.total_steps=30", "run.eval_every=5", "optimizer.warmup_steps=10"]);
        let out = execute(&cfg).unwrap();
        assert_eq!(out.summary.steps_completed, 30, "{}", p.name);
    }
}

#[test]
fn oversized_batch_is_a_config_error() {
    let table = resolve(
        parse_table(presets::get("sfplus-c-warmup").unwrap()).unwrap(),
        &["run.batch_size=5000".into()],
    )
    .unwrap();
    assert!(matches!(RunConfig::from_table(table), Err(HarnessError::ConfigInvalid(_))));
}
