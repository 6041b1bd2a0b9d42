//! Policy rollouts along fixed price trajectories, side-by-side policy
//! comparison, and duration-distribution plot data.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mdp::{ExpansionMdp, InstallAction, PlanningConfig, PlanningState};
use crate::outage::{duration_pmf, OutageModel};
use crate::scalar::Scalar;
use crate::solver::{greedy_action, QTable};

/// Per-unit price for each decision period ($/kWh), in catalog order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriceTrajectory<T> {
    pub units: Vec<String>,
    pub prices: Vec<Vec<T>>,
}

impl<T: Scalar> PriceTrajectory<T> {
    /// Reads `unit,p1,...,pK` rows (no header). Rows may come in any order.
    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .flexible(true)
            .comment(Some(b'#'))
            .from_reader(reader);
        let mut units = Vec::new();
        let mut prices = Vec::new();
        for record in rdr.records() {
            let record = record?;
            if record.len() < 2 {
                return Err(Error::Parse("trajectory rows need a unit and at least one price".into()));
            }
            units.push(record[0].to_string());
            prices.push(
                record
                    .iter()
                    .skip(1)
                    .map(|p| p.parse().map_err(|_| Error::Parse(format!("bad price {p:?}"))))
                    .collect::<Result<Vec<T>>>()?,
            );
        }
        Ok(PriceTrajectory { units, prices })
    }

    /// Ladder indices per period (outer) and unit (inner, catalog order).
    ///
    /// Every price must sit on its unit's ladder, the first period must be
    /// the top of the ladder, and indices may not move back up.
    pub fn ladder_indices(&self, config: &PlanningConfig<T>) -> Result<Vec<Vec<usize>>> {
        let k = config.horizon;
        let mut per_unit = Vec::new();
        for unit in &config.units {
            let name = &unit.spec.name;
            let row = self
                .units
                .iter()
                .position(|u| u == name)
                .map(|i| &self.prices[i])
                .ok_or_else(|| Error::Config(format!("trajectory has no row for unit {name}")))?;
            if row.len() != k {
                return Err(Error::Config(format!(
                    "trajectory for {name} has {} prices, horizon is {k}",
                    row.len()
                )));
            }
            let idx = row
                .iter()
                .map(|&p| {
                    unit.chain
                        .index_of(p)
                        .ok_or_else(|| Error::Config(format!("price {p} is not on the {name} ladder")))
                })
                .collect::<Result<Vec<_>>>()?;
            if idx[0] != 0 {
                return Err(Error::Config(format!("trajectory for {name} must start at the top of its ladder")));
            }
            if idx.windows(2).any(|w| w[1] < w[0]) {
                return Err(Error::Config(format!("trajectory for {name} moves back up the ladder")));
            }
            per_unit.push(idx);
        }
        if let Some(extra) = self.units.iter().find(|u| !config.units.iter().any(|c| &c.spec.name == *u)) {
            return Err(Error::Config(format!("trajectory names unknown unit {extra}")));
        }
        Ok((0..k).map(|t| per_unit.iter().map(|u| u[t]).collect()).collect())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Installed {
    pub unit: String,
    pub kwh: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceStep {
    /// 1-based decision period.
    pub period: usize,
    pub state: PlanningState,
    pub state_tuple: String,
    pub action: InstallAction,
    pub action_label: String,
    pub installed: Option<Installed>,
}

/// Greedy decisions along one fixed price trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyTrace<T> {
    pub label: String,
    pub config_hash: String,
    pub base_hash: String,
    pub units: Vec<String>,
    pub trajectory: Vec<Vec<T>>,
    pub steps: Vec<TraceStep>,
    pub final_capacity_kwh: Vec<u64>,
    /// Exact expected return of the greedy policy under the price chains.
    pub expected_return: Option<T>,
    /// Exact optimal expected return, when the instance was enumerable.
    pub optimal_return: Option<T>,
}

/// Rolls the greedy policy of `qtable` forward with prices forced onto
/// `trajectory`. Fully deterministic.
pub fn rollout<T: Scalar>(
    qtable: &QTable<T>,
    trajectory: &PriceTrajectory<T>,
    mdp: &ExpansionMdp<'_, T>,
) -> Result<PolicyTrace<T>> {
    let config = mdp.config();
    let indices = trajectory.ladder_indices(config)?;
    let mut state = mdp.initial_state();
    state.price_idx = indices[0].clone();
    let mut steps = Vec::with_capacity(config.horizon);
    for t in 0..config.horizon {
        let action = greedy_action(qtable, &state, mdp)?;
        let installed = match action {
            InstallAction::None => None,
            InstallAction::Install { unit, level } => Some(Installed {
                unit: config.units[unit].spec.name.clone(),
                kwh: config.levels_kwh[level],
            }),
        };
        steps.push(TraceStep {
            period: t + 1,
            state_tuple: config.state_tuple(&state),
            state: state.clone(),
            action,
            action_label: config.action_label(action),
            installed,
        });
        let next_prices = indices.get(t + 1).cloned().unwrap_or_else(|| state.price_idx.clone());
        state = mdp.forced_transition(&state, action, &next_prices)?;
    }
    let units = config.unit_names();
    let trajectory_by_unit = units
        .iter()
        .map(|name| {
            let i = trajectory.units.iter().position(|u| u == name).expect("validated above");
            trajectory.prices[i].clone()
        })
        .collect();
    Ok(PolicyTrace {
        label: String::new(),
        config_hash: String::new(),
        base_hash: String::new(),
        units,
        trajectory: trajectory_by_unit,
        steps,
        final_capacity_kwh: state.capacity_kwh,
        expected_return: None,
        optimal_return: None,
    })
}

impl<T: Scalar> PolicyTrace<T> {
    pub fn with_provenance(mut self, label: &str, config_hash: &str, base_hash: &str) -> Self {
        self.label = label.to_string();
        self.config_hash = config_hash.to_string();
        self.base_hash = base_hash.to_string();
        self
    }

    /// Replays the recorded actions through the MDP with forced prices and
    /// checks that every recorded state is reproduced.
    pub fn verify_chain(&self, mdp: &ExpansionMdp<'_, T>) -> Result<()> {
        let mut state = self
            .steps
            .first()
            .map(|s| s.state.clone())
            .ok_or_else(|| Error::Config("empty trace".into()))?;
        for (i, step) in self.steps.iter().enumerate() {
            if step.state != state {
                return Err(Error::Config(format!("trace breaks at period {}", step.period)));
            }
            let next_prices = self
                .steps
                .get(i + 1)
                .map(|s| s.state.price_idx.clone())
                .unwrap_or_else(|| state.price_idx.clone());
            state = mdp.forced_transition(&state, step.action, &next_prices)?;
        }
        if state.capacity_kwh != self.final_capacity_kwh {
            return Err(Error::Config("final capacity does not match the trace".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicySummary<T> {
    pub label: String,
    pub total_kwh: u64,
    /// 1-based period of the first install, if any.
    pub first_investment_period: Option<usize>,
    /// Installed kWh per unit, catalog order.
    pub mix: Vec<(String, u64)>,
    pub expected_return: Option<T>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonDeltas<T> {
    /// First policy minus second.
    pub total_kwh: i64,
    pub first_investment_period: Option<i64>,
    pub mix: Vec<(String, i64)>,
    /// Units installed under only one of the two policies.
    pub only_first: Vec<String>,
    pub only_second: Vec<String>,
    pub expected_return: Option<T>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport<T> {
    pub base_hash: String,
    pub units: Vec<String>,
    pub trajectory: Vec<Vec<T>>,
    pub first: PolicySummary<T>,
    pub second: PolicySummary<T>,
    pub deltas: ComparisonDeltas<T>,
    pub periods: Vec<[TraceStep; 2]>,
}

fn summarize<T: Scalar>(trace: &PolicyTrace<T>) -> PolicySummary<T> {
    let mut mix: BTreeMap<&str, u64> = trace.units.iter().map(|u| (u.as_str(), 0)).collect();
    let mut total = 0;
    let mut first = None;
    for step in &trace.steps {
        if let Some(inst) = &step.installed {
            *mix.entry(inst.unit.as_str()).or_default() += inst.kwh;
            total += inst.kwh;
            first.get_or_insert(step.period);
        }
    }
    PolicySummary {
        label: trace.label.clone(),
        total_kwh: total,
        first_investment_period: first,
        mix: trace.units.iter().map(|u| (u.clone(), mix[u.as_str()])).collect(),
        expected_return: trace.expected_return,
    }
}

/// Compares two traces taken on the same planning problem and trajectory.
pub fn compare<T: Scalar>(first: &PolicyTrace<T>, second: &PolicyTrace<T>) -> Result<ComparisonReport<T>> {
    if first.base_hash != second.base_hash {
        return Err(Error::HashMismatch {
            artifact: format!("trace {}", second.label),
            expected: first.base_hash.clone(),
            found: second.base_hash.clone(),
        });
    }
    if first.units != second.units || first.trajectory != second.trajectory {
        return Err(Error::Config("traces follow different units or price trajectories".into()));
    }
    if first.steps.len() != second.steps.len() {
        return Err(Error::Config("traces have different horizons".into()));
    }
    let a = summarize(first);
    let b = summarize(second);
    let mix: Vec<(String, i64)> = a
        .mix
        .iter()
        .zip(&b.mix)
        .map(|((u, x), (_, y))| (u.clone(), *x as i64 - *y as i64))
        .collect();
    let chosen = |s: &PolicySummary<T>, u: &str| s.mix.iter().any(|(n, k)| n == u && *k > 0);
    let deltas = ComparisonDeltas {
        total_kwh: a.total_kwh as i64 - b.total_kwh as i64,
        first_investment_period: match (a.first_investment_period, b.first_investment_period) {
            (Some(x), Some(y)) => Some(x as i64 - y as i64),
            _ => None,
        },
        mix,
        only_first: first
            .units
            .iter()
            .filter(|u| chosen(&a, u) && !chosen(&b, u))
            .cloned()
            .collect(),
        only_second: first
            .units
            .iter()
            .filter(|u| chosen(&b, u) && !chosen(&a, u))
            .cloned()
            .collect(),
        expected_return: match (a.expected_return, b.expected_return) {
            (Some(x), Some(y)) => Some(x - y),
            _ => None,
        },
    };
    Ok(ComparisonReport {
        base_hash: first.base_hash.clone(),
        units: first.units.clone(),
        trajectory: first.trajectory.clone(),
        periods: first
            .steps
            .iter()
            .cloned()
            .zip(second.steps.iter().cloned())
            .map(|(x, y)| [x, y])
            .collect(),
        first: a,
        second: b,
        deltas,
    })
}

impl<T: Scalar> ComparisonReport<T> {
    /// Plain-text rendering: one row per period, then the summary deltas.
    pub fn render_text(&self) -> String {
        let mut out = String::new();
        let (a, b) = (&self.first.label, &self.second.label);
        let width = self
            .periods
            .iter()
            .flat_map(|p| p.iter().map(|s| s.state_tuple.len().max(s.action_label.len())))
            .chain([a.len(), b.len()])
            .max()
            .unwrap_or(0);
        let _ = writeln!(out, "{:<8}  {:<width$}  {:<width$}", "period", a, b);
        for [x, y] in &self.periods {
            let _ = writeln!(out, "{:<8}  {:<width$}  {:<width$}", x.period, x.state_tuple, y.state_tuple);
            let _ = writeln!(out, "{:<8}  {:<width$}  {:<width$}", "", x.action_label, y.action_label);
        }
        let period = |p: Option<usize>| p.map_or("never".to_string(), |v| v.to_string());
        let _ = writeln!(out);
        let _ = writeln!(out, "total installed kWh: {a} {} | {b} {} | delta {}",
            self.first.total_kwh, self.second.total_kwh, self.deltas.total_kwh);
        let _ = writeln!(out, "first investment period: {a} {} | {b} {} | delta {}",
            period(self.first.first_investment_period),
            period(self.second.first_investment_period),
            self.deltas.first_investment_period.map_or("n/a".to_string(), |d| d.to_string()));
        for (((unit, x), (_, y)), (_, d)) in self.first.mix.iter().zip(&self.second.mix).zip(&self.deltas.mix) {
            let _ = writeln!(out, "mix {unit}: {a} {x} | {b} {y} | delta {d}");
        }
        let list = |v: &[String]| if v.is_empty() { "-".to_string() } else { v.join(",") };
        let _ = writeln!(out, "technologies only in {a}: {}", list(&self.deltas.only_first));
        let _ = writeln!(out, "technologies only in {b}: {}", list(&self.deltas.only_second));
        if let (Some(x), Some(y), Some(d)) =
            (self.first.expected_return, self.second.expected_return, self.deltas.expected_return)
        {
            let _ = writeln!(out, "expected return: {a} {x:.2} | {b} {y:.2} | delta {d:.2}");
        }
        out
    }
}

/// One row of duration-distribution plot data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PlotRow<T> {
    pub duration_hours: T,
    pub pmf_single: T,
    pub pmf_superposed: T,
}

/// Exact duration pmfs of two models over their integer-offset support up
/// to `max_hours`.
pub fn emit_duration_plot_data<T: Scalar>(
    models: (&OutageModel<T>, &OutageModel<T>),
    max_hours: T,
) -> Result<Vec<PlotRow<T>>> {
    let (single, superposed) = models;
    let lowest = single.shift().min(superposed.shift());
    if !(max_hours >= lowest) {
        return Err(Error::Domain(format!("max_hours {max_hours} is below the duration shift")));
    }
    let mut points: Vec<T> = Vec::new();
    for shift in [single.shift(), superposed.shift()] {
        let mut t = shift;
        while t <= max_hours {
            points.push(t);
            t = t + T::one();
        }
    }
    points.sort_by(|x, y| x.partial_cmp(y).expect("finite"));
    points.dedup();
    Ok(points
        .into_iter()
        .map(|t| PlotRow {
            duration_hours: t,
            pmf_single: duration_pmf(single, t),
            pmf_superposed: duration_pmf(superposed, t),
        })
        .collect())
}

pub fn write_plot_csv<T: Scalar, W: Write>(rows: &[PlotRow<T>], mut w: W) -> Result<()> {
    let io = |e| Error::io("<plot data>", e);
    writeln!(w, "duration_hours,pmf_single,pmf_superposed").map_err(io)?;
    for r in rows {
        writeln!(w, "{},{},{}", r.duration_hours, r.pmf_single, r.pmf_superposed).map_err(io)?;
    }
    Ok(())
}

/// Number of strict local maxima; endpoints count when they exceed their
/// only neighbour.
pub fn count_local_maxima<T: Scalar>(values: &[T]) -> usize {
    (0..values.len())
        .filter(|&i| {
            let left = i == 0 || values[i] > values[i - 1];
            let right = i + 1 == values.len() || values[i] > values[i + 1];
            left && right
        })
        .count()
}
