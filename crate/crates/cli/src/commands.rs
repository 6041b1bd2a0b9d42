use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use gridplan::config::{PlanDocument, ResolvedConfig};
use gridplan::mdp::ExpansionMdp;
use gridplan::outage::{fit_from_caidi, fit_single_from_caidi, CaidiSeries};
use gridplan::rng::seeded;
use gridplan::scalar::{exact_to, format_exact_decimal, parse_exact_decimal};
use gridplan::scenario::{compare, emit_duration_plot_data, rollout, write_plot_csv, PolicyTrace, PriceTrajectory};
use gridplan::sim::{build_metamodel, CostTable};
use gridplan::solver::{
    expected_return, greedy_action, train_with_log_interval, value_iteration, QTable, QTableHeader,
    DEFAULT_ENUMERATION_CAP,
};
use gridplan::{Error, Exact};

use crate::manifest::RunManifest;
use crate::{CliError, CliResult};

/// Files a command wrote and the text it prints.
#[derive(Debug, Clone, Default)]
pub struct CommandOutput {
    pub files: Vec<PathBuf>,
    pub stdout: String,
}

pub fn metamodel_file(label: &str) -> String {
    format!("metamodel-{label}.tsv")
}
pub fn qtable_file(label: &str) -> String {
    format!("qtable-{label}.tsv")
}
pub fn convergence_file(label: &str) -> String {
    format!("convergence-{label}.csv")
}
pub fn trace_file(label: &str) -> String {
    format!("trace-{label}.json")
}
pub const REPORT_JSON: &str = "report.json";
pub const REPORT_TEXT: &str = "report.txt";
pub const PLOT_FILE: &str = "duration_pmf.csv";

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |e| Error::io(path, e).into()
}

fn ensure_dir(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(io_err(dir))
}

fn write_text(path: &Path, text: &str) -> CliResult<()> {
    fs::write(path, text).map_err(io_err(path))
}

fn to_json<S: serde::Serialize>(value: &S) -> CliResult<String> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::Parse(e.to_string()))?;
    text.push('\n');
    Ok(text)
}

/// Config, outage model selection and output directory.
#[derive(Debug, Clone)]
pub struct Target {
    pub config: PathBuf,
    /// Named entry of `outage_models`; `None` uses `outage_model`.
    pub model: Option<String>,
    pub out: PathBuf,
}

impl Target {
    fn load(&self) -> CliResult<ResolvedConfig<f64>> {
        Ok(ResolvedConfig::load(&self.config, self.model.as_deref())?)
    }
}

fn update_manifest(
    cfg_base: &str,
    dir: &Path,
    label_hash: Option<(&str, &str)>,
    seed: Option<(String, u64)>,
    files: &[(&str, &str, Option<&str>)],
) -> CliResult<()> {
    let mut m = RunManifest::open(dir, cfg_base)?;
    if let Some((label, hash)) = label_hash {
        m.config_hashes.insert(label.to_string(), hash.to_string());
    }
    if let Some((name, s)) = seed {
        m.seeds.insert(name, s);
    }
    for (file, kind, hash) in files {
        m.record(dir, file, kind, *hash)?;
    }
    m.save(&RunManifest::path_in(dir))
}

#[derive(Debug, Clone)]
pub struct FitArgs {
    pub caidi: PathBuf,
    pub threshold_hours: String,
    pub base_frequency: String,
    pub shift_hours: String,
}

fn toml_number(v: &Exact) -> String {
    let s = format_exact_decimal(v, 15);
    if s.ends_with("...") {
        exact_to::<f64>(v).to_string()
    } else {
        s
    }
}

/// Fits both outage models to a CAIDI series with exact rational
/// arithmetic and prints them as a config block.
pub fn cmd_fit(args: &FitArgs) -> CliResult<CommandOutput> {
    let text = fs::read_to_string(&args.caidi).map_err(io_err(&args.caidi))?;
    let rows = text
        .lines()
        .filter(|l| !l.trim().is_empty())
        .count();
    if rows < 2 {
        return Err(CliError::Usage(format!(
            "{} has no CAIDI rows (expected header `year,caidi_hours` and one row per year)",
            args.caidi.display()
        )));
    }
    let series = CaidiSeries::read_csv(text.as_bytes(), parse_exact_decimal)?;
    let threshold = parse_exact_decimal(&args.threshold_hours)?;
    let base = parse_exact_decimal(&args.base_frequency)?;
    let shift = parse_exact_decimal(&args.shift_hours)?;
    let fit = fit_from_caidi(&series, threshold, base, shift)?;
    let single = fit_single_from_caidi(&series, base, shift)?;
    let m = &fit.model;
    let d = |v: &Exact| format_exact_decimal(v, 12);

    let mut out = String::new();
    let _ = writeln!(out, "severe years: {}", fit.severe_years.join(","));
    let _ = writeln!(out, "regular years: {}", fit.regular_years.join(","));
    let _ = writeln!(out, "regular mean duration: {} h", d(&fit.regular_mean));
    let _ = writeln!(out, "severe mean duration: {} h", d(&fit.severe_mean));
    let _ = writeln!(
        out,
        "superposed: lambda1={} lambda2={} kappa1={} kappa2={} shift={}",
        d(&m.lambda1),
        d(&m.lambda2),
        d(&m.kappa1),
        d(&m.kappa2),
        d(&m.shift)
    );
    let _ = writeln!(
        out,
        "single (mean-matched): lambda={} kappa={} shift={}",
        d(&single.lambda),
        d(&single.kappa),
        d(&single.shift)
    );
    let _ = writeln!(out);
    let _ = writeln!(out, "[outage_models.superposed]");
    let _ = writeln!(out, "type = \"superposed\"");
    let _ = writeln!(out, "lambda1 = {}", toml_number(&m.lambda1));
    let _ = writeln!(out, "lambda2 = {}", toml_number(&m.lambda2));
    let _ = writeln!(out, "kappa1 = {}", toml_number(&m.kappa1));
    let _ = writeln!(out, "kappa2 = {}", toml_number(&m.kappa2));
    let _ = writeln!(out, "shift_hours = {}", toml_number(&m.shift));
    let _ = writeln!(out);
    let _ = writeln!(out, "[outage_models.single]");
    let _ = writeln!(out, "type = \"single\"");
    let _ = writeln!(out, "lambda = {}", toml_number(&single.lambda));
    let _ = writeln!(out, "kappa = {}", toml_number(&single.kappa));
    let _ = writeln!(out, "shift_hours = {}", toml_number(&single.shift));
    Ok(CommandOutput { files: vec![], stdout: out })
}

#[derive(Debug, Clone)]
pub struct MetamodelArgs {
    pub target: Target,
    pub replications: Option<usize>,
    pub seed: Option<u64>,
}

pub fn cmd_metamodel(args: &MetamodelArgs) -> CliResult<CommandOutput> {
    let cfg = args.target.load()?;
    let label = cfg.model_name.clone();
    let reps = args.replications.unwrap_or(cfg.document.metamodel.replications);
    let seed = args.seed.unwrap_or(cfg.document.metamodel.seed);
    if reps == 0 {
        return Err(CliError::Usage("--replications must be positive".into()));
    }
    let grid = cfg.capacity_grid();
    let table = build_metamodel(
        &cfg.outage_model,
        &grid,
        &cfg.microgrid,
        cfg.period_years,
        reps,
        seed,
        &cfg.config_hash,
    )?;
    let dir = &args.target.out;
    ensure_dir(dir)?;
    let file = metamodel_file(&label);
    let path = dir.join(&file);
    table.save(&path)?;
    update_manifest(
        &cfg.base_hash,
        dir,
        Some((&label, &cfg.config_hash)),
        Some((format!("metamodel-{label}"), seed)),
        &[(&file, "metamodel", Some(&cfg.config_hash))],
    )?;
    let stdout = format!(
        "metamodel {label}: {} portfolios, {reps} replications, seed {seed}, config {}\nwrote {}\n",
        table.len(),
        cfg.config_hash,
        path.display()
    );
    Ok(CommandOutput { files: vec![path], stdout })
}

fn load_costs(cfg: &ResolvedConfig<f64>, explicit: Option<&Path>, out: &Path) -> CliResult<(PathBuf, CostTable<f64>)> {
    let path = explicit
        .map(Path::to_path_buf)
        .or_else(|| cfg.metamodel_path())
        .unwrap_or_else(|| out.join(metamodel_file(&cfg.model_name)));
    let table = CostTable::<f64>::load(&path)?;
    table.ensure_config(&cfg.config_hash, &path.display().to_string())?;
    Ok((path, table))
}

#[derive(Debug, Clone)]
pub struct TrainArgs {
    pub target: Target,
    pub metamodel: Option<PathBuf>,
    pub episodes: Option<usize>,
    pub seed: Option<u64>,
}

pub fn cmd_train(args: &TrainArgs) -> CliResult<CommandOutput> {
    let cfg = args.target.load()?;
    let label = cfg.model_name.clone();
    let (_, costs) = load_costs(&cfg, args.metamodel.as_deref(), &args.target.out)?;
    let mdp = ExpansionMdp::new(&cfg.planning, &costs)?;
    let mut schedule = cfg.document.training.schedule::<f64>();
    if let Some(e) = args.episodes {
        schedule.episodes = e;
    }
    if let Some(s) = args.seed {
        schedule.seed = s;
    }
    let mut rng = seeded(schedule.seed);
    let training = train_with_log_interval(&mdp, &schedule, cfg.document.training.log_every, &mut rng)?;

    let dir = &args.target.out;
    ensure_dir(dir)?;
    let q_name = qtable_file(&label);
    let q_path = dir.join(&q_name);
    let header = QTableHeader {
        config_hash: cfg.config_hash.clone(),
        schedule: Some(schedule.clone()),
        seed: Some(schedule.seed),
    };
    training.qtable.save(&header, &q_path)?;

    let c_name = convergence_file(&label);
    let c_path = dir.join(&c_name);
    let mut csv = format!("# config_hash={}\nepisode,max_q_delta,mean_return\n", cfg.config_hash);
    for e in &training.log {
        let _ = writeln!(csv, "{},{},{}", e.episode, e.max_q_delta, e.mean_return);
    }
    write_text(&c_path, &csv)?;

    update_manifest(
        &cfg.base_hash,
        dir,
        Some((&label, &cfg.config_hash)),
        Some((format!("train-{label}"), schedule.seed)),
        &[
            (&q_name, "qtable", Some(&cfg.config_hash)),
            (&c_name, "convergence", Some(&cfg.config_hash)),
        ],
    )?;
    let last = training.log.last();
    let stdout = format!(
        "train {label}: {} episodes, seed {}, {} states visited, final max |dQ| {}, final mean return {}\nwrote {}\nwrote {}\n",
        schedule.episodes,
        schedule.seed,
        training.qtable.len(),
        last.map_or(0.0, |e| e.max_q_delta),
        last.map_or(0.0, |e| e.mean_return),
        q_path.display(),
        c_path.display()
    );
    Ok(CommandOutput { files: vec![q_path, c_path], stdout })
}

#[derive(Debug, Clone)]
pub struct EvaluateArgs {
    pub target: Target,
    pub qtable: Option<PathBuf>,
    pub metamodel: Option<PathBuf>,
    pub trajectory: PathBuf,
    /// Largest state space for which exact returns are computed.
    pub oracle_cap: usize,
    /// Roll out the exact optimal policy instead of a trained table.
    pub optimal: bool,
}

impl EvaluateArgs {
    pub fn new(target: Target, trajectory: PathBuf) -> Self {
        EvaluateArgs {
            target,
            qtable: None,
            metamodel: None,
            trajectory,
            oracle_cap: DEFAULT_ENUMERATION_CAP,
            optimal: false,
        }
    }
}

pub fn cmd_evaluate(args: &EvaluateArgs) -> CliResult<CommandOutput> {
    let cfg = args.target.load()?;
    let dir = &args.target.out;
    let (_, costs) = load_costs(&cfg, args.metamodel.as_deref(), dir)?;
    let mdp = ExpansionMdp::new(&cfg.planning, &costs)?;
    let traj_file = fs::File::open(&args.trajectory).map_err(io_err(&args.trajectory))?;
    let trajectory = PriceTrajectory::<f64>::read_csv(traj_file)?;

    let (label, mut trace) = if args.optimal {
        let gamma = cfg.document.training.gamma;
        let optimal = value_iteration(&mdp, gamma, args.oracle_cap)?;
        let label = format!("{}-optimal", cfg.model_name);
        let mut trace = rollout(&optimal, &trajectory, &mdp)?;
        let v = optimal.state_value(&mdp.initial_state());
        trace.expected_return = Some(v);
        trace.optimal_return = Some(v);
        (label, trace)
    } else {
        let label = cfg.model_name.clone();
        let q_path = args.qtable.clone().unwrap_or_else(|| dir.join(qtable_file(&label)));
        let (header, qtable) = QTable::<f64>::load(&q_path)?;
        if header.config_hash != cfg.config_hash {
            return Err(Error::HashMismatch {
                artifact: q_path.display().to_string(),
                expected: cfg.config_hash.clone(),
                found: header.config_hash,
            }
            .into());
        }
        if qtable.num_actions() != mdp.num_actions() {
            return Err(Error::Config(format!(
                "{} has {} actions, config has {}",
                q_path.display(),
                qtable.num_actions(),
                mdp.num_actions()
            ))
            .into());
        }
        let mut trace = rollout(&qtable, &trajectory, &mdp)?;
        let gamma = header.schedule.as_ref().map_or(1.0, |s| s.gamma);
        match value_iteration(&mdp, gamma, args.oracle_cap) {
            Ok(optimal) => {
                trace.optimal_return = Some(optimal.state_value(&mdp.initial_state()));
                trace.expected_return = Some(expected_return(&mdp, gamma, |s| greedy_action(&qtable, s, &mdp))?);
            }
            Err(Error::EnumerationCap { .. }) => {}
            Err(e) => return Err(e.into()),
        }
        (label, trace)
    };
    trace = trace.with_provenance(&label, &cfg.config_hash, &cfg.base_hash);

    ensure_dir(dir)?;
    let name = trace_file(&label);
    let path = dir.join(&name);
    write_text(&path, &to_json(&trace)?)?;
    update_manifest(
        &cfg.base_hash,
        dir,
        Some((&cfg.model_name, &cfg.config_hash)),
        None,
        &[(&name, "trace", Some(&cfg.config_hash))],
    )?;

    let mut stdout = String::new();
    for s in &trace.steps {
        let _ = writeln!(stdout, "period {}: {} -> {}", s.period, s.state_tuple, s.action_label);
    }
    if let (Some(e), Some(o)) = (trace.expected_return, trace.optimal_return) {
        let _ = writeln!(stdout, "expected return {e:.2}, optimal {o:.2}");
    }
    let _ = writeln!(stdout, "wrote {}", path.display());
    Ok(CommandOutput { files: vec![path], stdout })
}

#[derive(Debug, Clone)]
pub struct CompareArgs {
    pub first: PathBuf,
    pub second: PathBuf,
    pub out: PathBuf,
}

pub fn load_trace(path: &Path) -> CliResult<PolicyTrace<f64>> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    Ok(serde_json::from_str(&text).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?)
}

pub fn cmd_compare(args: &CompareArgs) -> CliResult<CommandOutput> {
    let a = load_trace(&args.first)?;
    let b = load_trace(&args.second)?;
    let report = compare(&a, &b)?;
    let text = report.render_text();
    let dir = &args.out;
    ensure_dir(dir)?;
    let json_path = dir.join(REPORT_JSON);
    let text_path = dir.join(REPORT_TEXT);
    write_text(&json_path, &to_json(&report)?)?;
    write_text(&text_path, &text)?;
    update_manifest(
        &report.base_hash,
        dir,
        None,
        None,
        &[
            (REPORT_JSON, "report", Some(&report.base_hash)),
            (REPORT_TEXT, "report", None),
        ],
    )?;
    Ok(CommandOutput { files: vec![json_path, text_path], stdout: text })
}

#[derive(Debug, Clone)]
pub struct PlotArgs {
    pub config: PathBuf,
    pub out: PathBuf,
    pub single: String,
    pub superposed: String,
    pub max_hours: f64,
}

pub fn cmd_plotdata(args: &PlotArgs) -> CliResult<CommandOutput> {
    let cfg = ResolvedConfig::<f64>::load(&args.config, Some(&args.single))?;
    let doc: &PlanDocument = &cfg.document;
    let single = doc.model(Some(&args.single))?;
    let superposed = doc.model(Some(&args.superposed))?;
    superposed.validate()?;
    let rows = emit_duration_plot_data((&single, &superposed), args.max_hours)?;
    let dir = &args.out;
    ensure_dir(dir)?;
    let path = dir.join(PLOT_FILE);
    let mut buf = Vec::new();
    write_plot_csv(&rows, &mut buf)?;
    let mut f = fs::File::create(&path).map_err(io_err(&path))?;
    f.write_all(&buf).map_err(io_err(&path))?;
    update_manifest(&cfg.base_hash, dir, None, None, &[(PLOT_FILE, "plotdata", None)])?;
    let stdout = format!("{} rows up to {} h\nwrote {}\n", rows.len(), args.max_hours, path.display());
    Ok(CommandOutput { files: vec![path], stdout })
}
