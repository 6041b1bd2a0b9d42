mod common;

use std::collections::BTreeMap;
use std::fs;
use std::process::Command;

use common::{check_golden, configs, pair_artifacts, run_pair, target};
use gridplan::outage::OutageModel;
use gridplan_cli::*;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_gridplan"))
}

#[test]
fn tiny_pipeline_reproduces_golden_outputs() {
    let out = tempfile::tempdir().unwrap();
    let report = run_pair("tiny", out.path()).unwrap();
    assert!(report.stdout.contains("total installed kWh"));
    let files = pair_artifacts();
    let names: Vec<&str> = files.iter().map(String::as_str).collect();
    check_golden("tiny", out.path(), &names).unwrap();

    let manifest = RunManifest::load(&RunManifest::path_in(out.path())).unwrap();
    manifest.verify(out.path()).unwrap();
    for f in &files {
        assert!(manifest.artifacts.contains_key(f), "{f} not in manifest");
    }
    assert_eq!(manifest.config_hashes.len(), 2);
    assert_eq!(manifest.seeds["train-single"], 7);
}

#[test]
fn training_twice_gives_identical_tables() {
    let out = tempfile::tempdir().unwrap();
    let config = configs().join("tiny/plan.toml");
    let t = target(&config, None, out.path());
    cmd_metamodel(&MetamodelArgs { target: t.clone(), replications: None, seed: None }).unwrap();
    let train = |dir: &std::path::Path| {
        let mut t = t.clone();
        t.out = dir.to_path_buf();
        cmd_train(&TrainArgs {
            target: t,
            metamodel: Some(out.path().join(metamodel_file("default"))),
            episodes: Some(20_000),
            seed: Some(99),
        })
        .unwrap();
        fs::read(dir.join(qtable_file("default"))).unwrap()
    };
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    assert_eq!(train(a.path()), train(b.path()));
}

#[test]
fn evaluate_refuses_a_table_from_another_config() {
    let out = tempfile::tempdir().unwrap();
    let config = configs().join("tiny/plan.toml");
    let single = target(&config, Some("single"), out.path());
    cmd_metamodel(&MetamodelArgs { target: single.clone(), replications: Some(20), seed: None }).unwrap();
    cmd_train(&TrainArgs { target: single, metamodel: None, episodes: Some(1000), seed: None }).unwrap();

    let superposed = target(&config, Some("superposed"), out.path());
    cmd_metamodel(&MetamodelArgs { target: superposed.clone(), replications: Some(20), seed: None }).unwrap();
    let mut args = EvaluateArgs::new(superposed, configs().join("tiny/trajectory.csv"));
    args.qtable = Some(out.path().join(qtable_file("single")));
    let err = cmd_evaluate(&args).unwrap_err();
    assert_eq!(err.code(), "hash-mismatch");
    assert!(err.to_string().contains("qtable-single.tsv"));

    // a cost table built for the other model is refused by train as well
    let err = cmd_train(&TrainArgs {
        target: target(&config, Some("superposed"), out.path()),
        metamodel: Some(out.path().join(metamodel_file("single"))),
        episodes: Some(10),
        seed: None,
    })
    .unwrap_err();
    assert_eq!(err.code(), "hash-mismatch");
}

#[test]
fn compare_refuses_traces_of_different_problems() {
    let out = tempfile::tempdir().unwrap();
    let a = out.path().join("a.json");
    let b = out.path().join("b.json");
    let trace = r#"{"label":"x","config_hash":"c","base_hash":"BASE","units":["u"],"trajectory":[[1.0]],
        "steps":[],"final_capacity_kwh":[0],"expected_return":null,"optimal_return":null}"#;
    fs::write(&a, trace).unwrap();
    fs::write(&b, trace.replace("BASE", "OTHER")).unwrap();
    let err = cmd_compare(&CompareArgs { first: a, second: b, out: out.path().to_path_buf() }).unwrap_err();
    assert_eq!(err.code(), "hash-mismatch");
}

#[test]
fn output_directory_of_another_problem_is_refused() {
    let out = tempfile::tempdir().unwrap();
    let tiny = target(&configs().join("tiny/plan.toml"), None, out.path());
    cmd_metamodel(&MetamodelArgs { target: tiny, replications: Some(5), seed: None }).unwrap();
    let case = target(&configs().join("casestudy/plan.toml"), Some("single"), out.path());
    let err = cmd_metamodel(&MetamodelArgs { target: case, replications: Some(1), seed: None }).unwrap_err();
    assert_eq!(err.code(), "hash-mismatch");
}

#[test]
fn fit_prints_a_config_block() {
    let out = bin()
        .args(["fit", "--threshold-hours", "10", "--base-frequency", "1.2"])
        .arg(configs().join("casestudy/caidi.csv"))
        .output()
        .unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("kappa1 = 0.636\n"));
    assert!(text.contains("kappa2 = 21.55\n"));
    assert!(text.contains("lambda1 = 1\n"));
    assert!(text.contains("lambda2 = 0.2\n"));
    // the printed block parses into both outage models
    let block = &text[text.find("[outage_models.superposed]").unwrap()..];
    let doc: BTreeMap<String, BTreeMap<String, OutageModel<f64>>> = toml::from_str(block).unwrap();
    let models = &doc["outage_models"];
    assert_eq!(models["superposed"].total_rate(), 1.2);
    assert_eq!(models["single"].label(), "single");
}

fn stderr_of(args: &[&str], input: Option<(&str, &str)>) -> (bool, String) {
    let dir = tempfile::tempdir().unwrap();
    let mut cmd = bin();
    cmd.current_dir(dir.path());
    if let Some((name, content)) = input {
        fs::write(dir.path().join(name), content).unwrap();
    }
    let out = cmd.args(args).output().unwrap();
    (out.status.success(), String::from_utf8(out.stderr).unwrap())
}

#[test]
fn errors_are_single_prefixed_lines() {
    let (ok, err) = stderr_of(&["fit", "empty.csv"], Some(("empty.csv", "")));
    assert!(!ok);
    assert!(err.starts_with("error[usage]: "), "{err}");
    assert_eq!(err.lines().count(), 1);

    let (ok, err) = stderr_of(
        &["fit", "--threshold-hours", "100", "c.csv"],
        Some(("c.csv", "year,caidi_hours\n2012,22.55\n2013,1.65\n")),
    );
    assert!(!ok);
    assert!(err.starts_with("error[degenerate-fit]: "), "{err}");

    let (ok, err) = stderr_of(&["metamodel", "--config", "missing.toml"], None);
    assert!(!ok);
    assert!(err.starts_with("error[io]: "), "{err}");

    let (ok, err) = stderr_of(&["train", "--bogus"], None);
    assert!(!ok);
    assert!(err.starts_with("error[usage]: "), "{err}");
    assert_eq!(err.lines().count(), 1);
}

#[test]
fn output_directory_defaults_to_the_environment() {
    let dir = tempfile::tempdir().unwrap();
    let status = bin()
        .env("GRIDPLAN_OUT", dir.path())
        .args(["plotdata", "--config"])
        .arg(configs().join("tiny/plan.toml"))
        .output()
        .unwrap()
        .status;
    assert!(status.success());
    assert!(dir.path().join(PLOT_FILE).exists());
    assert!(dir.path().join("manifest.json").exists());
}
