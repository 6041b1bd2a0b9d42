#![allow(dead_code)]

use std::fs;
use std::path::{Path, PathBuf};

use gridplan_cli::*;

pub fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs")
}

pub fn golden_dir(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(name)
}

pub fn target(config: &Path, model: Option<&str>, out: &Path) -> Target {
    Target {
        config: config.to_path_buf(),
        model: model.map(str::to_string),
        out: out.to_path_buf(),
    }
}

/// metamodel, train and evaluate for one outage model with config defaults.
pub fn run_model(config: &Path, model: Option<&str>, trajectory: &Path, out: &Path) -> CliResult<()> {
    let t = target(config, model, out);
    cmd_metamodel(&MetamodelArgs {
        target: t.clone(),
        replications: None,
        seed: None,
    })?;
    cmd_train(&TrainArgs {
        target: t.clone(),
        metamodel: None,
        episodes: None,
        seed: None,
    })?;
    cmd_evaluate(&EvaluateArgs::new(t, trajectory.to_path_buf()))?;
    Ok(())
}

/// Both outage models, their comparison and the duration plot data.
pub fn run_pair(name: &str, out: &Path) -> CliResult<CommandOutput> {
    let dir = configs().join(name);
    let config = dir.join("plan.toml");
    let trajectory = dir.join("trajectory.csv");
    for model in ["single", "superposed"] {
        run_model(&config, Some(model), &trajectory, out)?;
    }
    cmd_plotdata(&PlotArgs {
        config: config.clone(),
        out: out.to_path_buf(),
        single: "single".into(),
        superposed: "superposed".into(),
        max_hours: 80.0,
    })?;
    cmd_compare(&CompareArgs {
        first: out.join(trace_file("single")),
        second: out.join(trace_file("superposed")),
        out: out.to_path_buf(),
    })
}

/// Compares `files` in `out` with the frozen copies; with
/// `GRIDPLAN_BLESS=1` in the environment the frozen copies are rewritten.
pub fn check_golden(name: &str, out: &Path, files: &[&str]) -> Result<(), String> {
    let golden = golden_dir(name);
    let bless = std::env::var("GRIDPLAN_BLESS").is_ok_and(|v| v == "1");
    if bless {
        fs::create_dir_all(&golden).unwrap();
    }
    let mut problems = Vec::new();
    for f in files {
        let actual = fs::read(out.join(f)).map_err(|e| format!("{f}: {e}"))?;
        let frozen = golden.join(f);
        if bless {
            fs::write(&frozen, &actual).unwrap();
            continue;
        }
        match fs::read(&frozen) {
            Ok(expected) if expected == actual => {}
            Ok(_) => problems.push(format!("{f} differs from {}", frozen.display())),
            Err(_) => problems.push(format!("{} is missing; run with GRIDPLAN_BLESS=1", frozen.display())),
        }
    }
    if problems.is_empty() {
        Ok(())
    } else {
        Err(problems.join("; "))
    }
}

pub fn pair_artifacts() -> Vec<String> {
    let mut files = Vec::new();
    for m in ["single", "superposed"] {
        files.push(metamodel_file(m));
        files.push(qtable_file(m));
        files.push(convergence_file(m));
        files.push(trace_file(m));
    }
    files.extend([PLOT_FILE.to_string(), REPORT_JSON.to_string(), REPORT_TEXT.to_string()]);
    files
}
