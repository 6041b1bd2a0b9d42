//! The finite-horizon expansion-planning MDP.
//!
//! A state is the decision period, one price-ladder index per storage unit
//! and the installed kWh per unit. An action installs at most one
//! (unit, level) pair. Prices follow independent per-unit chains that
//! step down the ladder with a fixed probability, the last rung being
//! absorbing. The reward is the negated investment plus the metamodel's
//! outage cost of the post-action portfolio.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::sim::{CostTable, StorageUnitSpec};

/// Discrete-time price chain over a strictly descending ladder ($/kWh).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriceChain<T> {
    pub ladder: Vec<T>,
    pub advance_prob: T,
}

impl<T: Scalar> PriceChain<T> {
    pub fn new(ladder: Vec<T>, advance_prob: T) -> Result<Self> {
        let chain = PriceChain {
            ladder,
            advance_prob,
        };
        chain.validate()?;
        Ok(chain)
    }

    pub fn validate(&self) -> Result<()> {
        if self.ladder.is_empty() {
            return Err(Error::Config("price ladder is empty".into()));
        }
        if self.ladder.iter().any(|p| !(*p >= T::zero()) || !p.is_finite()) {
            return Err(Error::Config("prices must be finite and non-negative".into()));
        }
        if self.ladder.windows(2).any(|w| !(w[0] > w[1])) {
            return Err(Error::Config("price ladder must be strictly descending".into()));
        }
        if !(self.advance_prob >= T::zero() && self.advance_prob <= T::one()) {
            return Err(Error::Config("advance probability must lie in [0, 1]".into()));
        }
        Ok(())
    }

    pub fn last_index(&self) -> usize {
        self.ladder.len() - 1
    }

    /// Index of `price` on the ladder, if present.
    pub fn index_of(&self, price: T) -> Option<usize> {
        self.ladder.iter().position(|&p| p == price)
    }

    /// Next-index distribution from `idx`: `(probability, index)` pairs with
    /// zero-probability outcomes dropped.
    fn step_distribution(&self, idx: usize) -> Vec<(T, usize)> {
        if idx >= self.last_index() {
            return vec![(T::one(), idx)];
        }
        let p = self.advance_prob;
        [(T::one() - p, idx), (p, idx + 1)]
            .into_iter()
            .filter(|(q, _)| *q > T::zero())
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StorageOption<T> {
    pub spec: StorageUnitSpec<T>,
    pub chain: PriceChain<T>,
}

/// Horizon, storage catalog and capacity levels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanningConfig<T> {
    pub horizon: usize,
    pub units: Vec<StorageOption<T>>,
    pub levels_kwh: Vec<u64>,
}

impl<T: Scalar> PlanningConfig<T> {
    pub fn validate(&self) -> Result<()> {
        if self.horizon < 1 {
            return Err(Error::Config("horizon must be >= 1".into()));
        }
        if self.units.is_empty() {
            return Err(Error::Config("at least one storage unit is required".into()));
        }
        if self.levels_kwh.is_empty()
            || self.levels_kwh[0] == 0
            || self.levels_kwh.windows(2).any(|w| w[0] >= w[1])
        {
            return Err(Error::Config("levels must be positive and strictly increasing".into()));
        }
        for u in &self.units {
            u.spec.validate()?;
            u.chain.validate()?;
        }
        Ok(())
    }

    pub fn unit_names(&self) -> Vec<String> {
        self.units.iter().map(|u| u.spec.name.clone()).collect()
    }

    pub fn num_actions(&self) -> usize {
        1 + self.units.len() * self.levels_kwh.len()
    }

    /// Actions in their fixed order: `none`, then unit-major, level-minor.
    pub fn all_actions(&self) -> Vec<InstallAction> {
        let mut actions = vec![InstallAction::None];
        for unit in 0..self.units.len() {
            for level in 0..self.levels_kwh.len() {
                actions.push(InstallAction::Install { unit, level });
            }
        }
        actions
    }

    pub fn initial_state(&self) -> PlanningState {
        PlanningState {
            period: 0,
            price_idx: vec![0; self.units.len()],
            capacity_kwh: vec![0; self.units.len()],
        }
    }

    pub fn price(&self, state: &PlanningState, unit: usize) -> T {
        self.units[unit].chain.ladder[state.price_idx[unit]]
    }

    /// Smallest number of level installs summing to `kwh`, or `None`.
    pub fn min_installs(&self, kwh: u64) -> Option<usize> {
        let n = usize::try_from(kwh).ok()?;
        let mut best = vec![usize::MAX; n + 1];
        best[0] = 0;
        for c in 1..=n {
            for &l in &self.levels_kwh {
                let l = l as usize;
                if l <= c && best[c - l] != usize::MAX {
                    best[c] = best[c].min(best[c - l] + 1);
                }
            }
        }
        (best[n] != usize::MAX).then_some(best[n])
    }

    /// Checks the structural state invariants.
    pub fn validate_state(&self, state: &PlanningState) -> Result<()> {
        let bad = |msg: String| Err(Error::Domain(format!("invalid state {state}: {msg}")));
        if state.period > self.horizon {
            return bad("period beyond horizon".into());
        }
        if state.price_idx.len() != self.units.len() || state.capacity_kwh.len() != self.units.len() {
            return bad("wrong number of units".into());
        }
        for (u, &idx) in state.price_idx.iter().enumerate() {
            if idx > self.units[u].chain.last_index() || idx > state.period {
                return bad(format!("price index {idx} unreachable for unit {u}"));
            }
        }
        let mut installs = 0;
        for &c in &state.capacity_kwh {
            match self.min_installs(c) {
                Some(n) => installs += n,
                None => return bad(format!("{c} kWh is not a sum of levels")),
            }
        }
        if installs > state.period {
            return bad(format!("needs {installs} installs in {} periods", state.period));
        }
        Ok(())
    }

    /// Renders a state as `(period, prices..., capacities...)`.
    pub fn state_tuple(&self, state: &PlanningState) -> String {
        let mut parts = vec![state.period.to_string()];
        parts.extend((0..self.units.len()).map(|u| self.price(state, u).to_string()));
        parts.extend(state.capacity_kwh.iter().map(u64::to_string));
        format!("({})", parts.join(","))
    }

    pub fn action_label(&self, action: InstallAction) -> String {
        match action {
            InstallAction::None => "Do nothing".into(),
            InstallAction::Install { unit, level } => format!(
                "Add {} at {} kWh",
                self.units[unit].spec.name, self.levels_kwh[level]
            ),
        }
    }
}

/// Decision period, per-unit ladder index and per-unit installed kWh.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PlanningState {
    pub period: usize,
    pub price_idx: Vec<usize>,
    pub capacity_kwh: Vec<u64>,
}

impl fmt::Display for PlanningState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let join = |v: &mut dyn Iterator<Item = String>| v.collect::<Vec<_>>().join(",");
        write!(
            f,
            "{}|{}|{}",
            self.period,
            join(&mut self.price_idx.iter().map(|x| x.to_string())),
            join(&mut self.capacity_kwh.iter().map(|x| x.to_string()))
        )
    }
}

impl FromStr for PlanningState {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Parse(format!("bad state key {s:?}"));
        let parts: Vec<&str> = s.split('|').collect();
        if parts.len() != 3 {
            return Err(bad());
        }
        fn list<V: FromStr>(text: &str) -> Option<Vec<V>> {
            if text.is_empty() {
                return Some(Vec::new());
            }
            text.split(',').map(|x| x.parse().ok()).collect()
        }
        Ok(PlanningState {
            period: parts[0].parse().map_err(|_| bad())?,
            price_idx: list(parts[1]).ok_or_else(bad)?,
            capacity_kwh: list(parts[2]).ok_or_else(bad)?,
        })
    }
}

/// Install nothing, or exactly one (unit, level) pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InstallAction {
    None,
    Install { unit: usize, level: usize },
}

impl InstallAction {
    /// Position in the fixed action order for a catalog with `num_levels` levels.
    pub fn index(self, num_levels: usize) -> usize {
        match self {
            InstallAction::None => 0,
            InstallAction::Install { unit, level } => 1 + unit * num_levels + level,
        }
    }

    pub fn from_index(index: usize, num_levels: usize) -> Self {
        if index == 0 {
            InstallAction::None
        } else {
            InstallAction::Install {
                unit: (index - 1) / num_levels,
                level: (index - 1) % num_levels,
            }
        }
    }
}

impl fmt::Display for InstallAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InstallAction::None => f.write_str("none"),
            InstallAction::Install { unit, level } => write!(f, "{unit}:{level}"),
        }
    }
}

impl FromStr for InstallAction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "none" {
            return Ok(InstallAction::None);
        }
        let (u, l) = s
            .split_once(':')
            .ok_or_else(|| Error::Parse(format!("bad action {s:?}")))?;
        Ok(InstallAction::Install {
            unit: u.parse().map_err(|_| Error::Parse(format!("bad action {s:?}")))?,
            level: l.parse().map_err(|_| Error::Parse(format!("bad action {s:?}")))?,
        })
    }
}

/// Reward split into its two components (both non-positive).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Reward<T> {
    pub investment: T,
    pub outage: T,
}

impl<T: Scalar> Reward<T> {
    pub fn total(&self) -> T {
        self.investment + self.outage
    }
}

/// The planning MDP bound to an outage-cost lookup table.
#[derive(Debug, Clone, Copy)]
pub struct ExpansionMdp<'a, T> {
    config: &'a PlanningConfig<T>,
    costs: &'a CostTable<T>,
}

impl<'a, T: Scalar> ExpansionMdp<'a, T> {
    pub fn new(config: &'a PlanningConfig<T>, costs: &'a CostTable<T>) -> Result<Self> {
        config.validate()?;
        if costs.header.units != config.unit_names() {
            return Err(Error::Config(format!(
                "cost table units {:?} do not match catalog {:?}",
                costs.header.units,
                config.unit_names()
            )));
        }
        Ok(ExpansionMdp { config, costs })
    }

    pub fn config(&self) -> &'a PlanningConfig<T> {
        self.config
    }

    pub fn costs(&self) -> &'a CostTable<T> {
        self.costs
    }

    pub fn horizon(&self) -> usize {
        self.config.horizon
    }

    pub fn num_actions(&self) -> usize {
        self.config.num_actions()
    }

    pub fn initial_state(&self) -> PlanningState {
        self.config.initial_state()
    }

    pub fn is_terminal(&self, state: &PlanningState) -> bool {
        state.period >= self.config.horizon
    }

    /// `none` plus every (unit, level) pair; empty at the horizon.
    pub fn legal_actions(&self, state: &PlanningState) -> Vec<InstallAction> {
        if self.is_terminal(state) {
            Vec::new()
        } else {
            self.config.all_actions()
        }
    }

    fn check_action(&self, state: &PlanningState, action: InstallAction) -> Result<()> {
        if self.is_terminal(state) {
            return Err(Error::IllegalAction(format!("no actions in terminal state {state}")));
        }
        if let InstallAction::Install { unit, level } = action {
            if unit >= self.config.units.len() || level >= self.config.levels_kwh.len() {
                return Err(Error::IllegalAction(format!("{action} is outside the catalog")));
            }
        }
        Ok(())
    }

    /// Capacities after `action` takes effect.
    pub fn installed_after(&self, state: &PlanningState, action: InstallAction) -> Vec<u64> {
        let mut caps = state.capacity_kwh.clone();
        if let InstallAction::Install { unit, level } = action {
            caps[unit] += self.config.levels_kwh[level];
        }
        caps
    }

    /// Samples the next state: the period advances by one, each unit's
    /// price steps down with its advance probability, and the acted unit
    /// gains the chosen level. One uniform is drawn per unit.
    pub fn transition<R: Rng + ?Sized>(
        &self,
        state: &PlanningState,
        action: InstallAction,
        rng: &mut R,
    ) -> Result<PlanningState> {
        self.check_action(state, action)?;
        let price_idx = state
            .price_idx
            .iter()
            .zip(&self.config.units)
            .map(|(&idx, unit)| {
                let u: f64 = rng.random();
                if idx < unit.chain.last_index() && u < unit.chain.advance_prob.as_f64() {
                    idx + 1
                } else {
                    idx
                }
            })
            .collect();
        Ok(PlanningState {
            period: state.period + 1,
            price_idx,
            capacity_kwh: self.installed_after(state, action),
        })
    }

    /// Joint distribution of next-period price indices when the current
    /// indices are `price_idx`, in a fixed order.
    pub fn price_outcomes(&self, price_idx: &[usize]) -> Vec<(T, Vec<usize>)> {
        let mut outcomes: Vec<(T, Vec<usize>)> = vec![(T::one(), Vec::with_capacity(price_idx.len()))];
        for (&idx, unit) in price_idx.iter().zip(&self.config.units) {
            let steps = unit.chain.step_distribution(idx);
            outcomes = outcomes
                .into_iter()
                .flat_map(|(p, prefix)| {
                    steps.iter().map(move |&(q, next)| {
                        let mut v = prefix.clone();
                        v.push(next);
                        (p * q, v)
                    })
                })
                .collect();
        }
        outcomes
    }

    /// Exact next-state distribution as `(probability, state)` pairs.
    pub fn transition_distribution(
        &self,
        state: &PlanningState,
        action: InstallAction,
    ) -> Result<Vec<(T, PlanningState)>> {
        self.check_action(state, action)?;
        let capacity_kwh = self.installed_after(state, action);
        Ok(self
            .price_outcomes(&state.price_idx)
            .into_iter()
            .map(|(p, price_idx)| {
                (
                    p,
                    PlanningState {
                        period: state.period + 1,
                        price_idx,
                        capacity_kwh: capacity_kwh.clone(),
                    },
                )
            })
            .collect())
    }

    /// Deterministic step with prices forced to `next_price_idx`.
    pub fn forced_transition(
        &self,
        state: &PlanningState,
        action: InstallAction,
        next_price_idx: &[usize],
    ) -> Result<PlanningState> {
        self.check_action(state, action)?;
        Ok(PlanningState {
            period: state.period + 1,
            price_idx: next_price_idx.to_vec(),
            capacity_kwh: self.installed_after(state, action),
        })
    }

    /// Investment at the current ladder price plus the one-period outage
    /// cost of the post-action portfolio, both negated.
    pub fn reward(
        &self,
        state: &PlanningState,
        action: InstallAction,
        next: &PlanningState,
    ) -> Result<Reward<T>> {
        self.reward_for_capacity(state, action, &next.capacity_kwh)
    }

    /// [`reward`](Self::reward) given only the post-action capacities.
    pub fn reward_for_capacity(
        &self,
        state: &PlanningState,
        action: InstallAction,
        capacity_kwh: &[u64],
    ) -> Result<Reward<T>> {
        let investment = match action {
            InstallAction::None => T::zero(),
            InstallAction::Install { unit, level } => {
                -(T::of_u64(self.config.levels_kwh[level]) * self.config.price(state, unit))
            }
        };
        Ok(Reward {
            investment,
            outage: -self.costs.cost(capacity_kwh)?,
        })
    }

    /// Largest possible single-step cost: the dearest install plus the
    /// largest tabulated outage cost.
    pub fn max_step_cost(&self) -> T {
        let top_level = T::of_u64(*self.config.levels_kwh.last().expect("levels validated"));
        let top_price = self
            .config
            .units
            .iter()
            .map(|u| u.chain.ladder[0])
            .fold(T::zero(), T::max);
        top_level * top_price + self.costs.max_cost()
    }
    /// Every state reachable from the initial state under some policy,
    /// grouped by period (terminal layer included), each layer sorted.
    ///
    /// Prices move independently of actions, so each layer is the product
    /// of the reachable price vectors and the reachable capacity vectors.
    pub fn reachable_states(&self, cap: usize) -> Result<Vec<Vec<PlanningState>>> {
        let init = self.initial_state();
        let mut prices: BTreeSet<Vec<usize>> = BTreeSet::from([init.price_idx.clone()]);
        let mut caps: BTreeSet<Vec<u64>> = BTreeSet::from([init.capacity_kwh.clone()]);
        let mut layers = vec![vec![init]];
        let mut total = 1usize;
        let actions = self.config.all_actions();
        for period in 1..=self.config.horizon {
            prices = prices
                .iter()
                .flat_map(|p| self.price_outcomes(p).into_iter().map(|(_, q)| q))
                .collect();
            caps = caps
                .iter()
                .flat_map(|c| {
                    actions.iter().map(move |a| {
                        let mut next = c.clone();
                        if let InstallAction::Install { unit, level } = *a {
                            next[unit] += self.config.levels_kwh[level];
                        }
                        next
                    })
                })
                .collect();
            total = total.saturating_add(prices.len().saturating_mul(caps.len()));
            if total > cap {
                return Err(Error::EnumerationCap { states: total, cap });
            }
            layers.push(
                prices
                    .iter()
                    .flat_map(|p| {
                        caps.iter().map(move |c| PlanningState {
                            period,
                            price_idx: p.clone(),
                            capacity_kwh: c.clone(),
                        })
                    })
                    .collect(),
            );
        }
        Ok(layers)
    }
}

/// Installed kWh per unit name, for reports.
pub fn capacity_by_unit<T: Scalar>(config: &PlanningConfig<T>, caps: &[u64]) -> BTreeMap<String, u64> {
    config
        .unit_names()
        .into_iter()
        .zip(caps.iter().copied())
        .collect()
}
