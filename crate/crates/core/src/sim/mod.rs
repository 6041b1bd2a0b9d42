//! Islanded operation of the microgrid during grid outages.
//!
//! Costs produced here are the outage half of the planning reward. The
//! [`metamodel`] submodule turns them into a lookup table over every
//! reachable storage portfolio so the learner never runs Monte Carlo
//! inside its loop.

pub mod metamodel;
mod profiles;

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::outage::{sample_trace, OutageEvent, OutageModel};
use crate::rng::stream;
use crate::scalar::Scalar;

pub use metamodel::{build_metamodel, reachable_capacity_grid, CostEntry, CostTable, CostTableHeader};
pub use profiles::{read_profile_csv, scale_to_peak, HourlyProfiles, HOURS_IN_YEAR};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FacilityClass<T> {
    pub name: String,
    pub count: u32,
    /// Peak demand of one facility; the load profile is scaled to reach it.
    pub peak_load_kw: T,
    pub load_profile_id: String,
    /// Penalty per kWh of unserved demand ($/kWh).
    pub value_of_lost_load: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StorageUnitSpec<T> {
    pub name: String,
    pub round_trip_efficiency: T,
    pub usable_fraction: T,
    /// Maximum discharge power per kWh of installed capacity (kW/kWh).
    pub power_limit: T,
}

impl<T: Scalar> StorageUnitSpec<T> {
    pub fn validate(&self) -> Result<()> {
        let unit_interval = |v: T| v > T::zero() && v <= T::one();
        if !unit_interval(self.round_trip_efficiency) || !unit_interval(self.usable_fraction) {
            return Err(Error::Config(format!(
                "storage unit {}: efficiency and usable fraction must lie in (0, 1]",
                self.name
            )));
        }
        if !(self.power_limit > T::zero()) {
            return Err(Error::Config(format!(
                "storage unit {}: power limit must be > 0",
                self.name
            )));
        }
        Ok(())
    }
}

/// Installed energy capacity (kWh) per storage unit name.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Portfolio<T> {
    pub installed: BTreeMap<String, T>,
}

impl<T: Scalar> Portfolio<T> {
    pub fn empty() -> Self {
        Portfolio {
            installed: BTreeMap::new(),
        }
    }

    pub fn with(mut self, unit: impl Into<String>, kwh: T) -> Self {
        self.installed.insert(unit.into(), kwh);
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnservedReport<T> {
    /// Unserved energy per facility class, in declaration order (kWh).
    pub unserved_kwh: Vec<T>,
    pub outage_hours: T,
    pub cost: T,
}

/// Contiguous islanded interval in whole hours, counted from the start of
/// the sampled horizon.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OutageWindow {
    pub start_hour: u64,
    pub hours: u64,
}

/// Hour windows covered by `events`, with overlapping or touching windows
/// merged into their union. Each event covers `ceil(duration)` hours from
/// the hour containing its start.
pub fn outage_windows<T: Scalar>(events: &[OutageEvent<T>]) -> Vec<OutageWindow> {
    let mut spans: Vec<(u64, u64)> = events
        .iter()
        .filter(|e| e.duration > T::zero())
        .map(|e| {
            let start = e.start.floor().to_u64().unwrap_or(0);
            let hours = e.duration.ceil().to_u64().unwrap_or(0);
            (start, start + hours)
        })
        .collect();
    spans.sort_unstable();
    let mut merged: Vec<(u64, u64)> = Vec::new();
    for (s, e) in spans {
        match merged.last_mut() {
            Some(last) if s <= last.1 => last.1 = last.1.max(e),
            _ => merged.push((s, e)),
        }
    }
    merged
        .into_iter()
        .map(|(s, e)| OutageWindow {
            start_hour: s,
            hours: e - s,
        })
        .collect()
}

/// Mean and standard error of a Monte Carlo estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostEstimate<T> {
    pub mean: T,
    pub stderr: T,
}

/// The fixed physical side of the microgrid: loads, PV and storage catalog.
#[derive(Debug, Clone, PartialEq)]
pub struct Microgrid<T> {
    facilities: Vec<FacilityClass<T>>,
    storage: Vec<StorageUnitSpec<T>>,
    profiles: HourlyProfiles<T>,
    /// Facility indices in descending value-of-lost-load order.
    dispatch_order: Vec<usize>,
}

impl<T: Scalar> Microgrid<T> {
    pub fn new(
        facilities: Vec<FacilityClass<T>>,
        storage: Vec<StorageUnitSpec<T>>,
        profiles: HourlyProfiles<T>,
    ) -> Result<Self> {
        for f in &facilities {
            if f.count == 0 || !(f.peak_load_kw > T::zero()) || !(f.value_of_lost_load >= T::zero()) {
                return Err(Error::Config(format!(
                    "facility class {}: count and peak load must be positive, VoLL non-negative",
                    f.name
                )));
            }
        }
        for s in &storage {
            s.validate()?;
        }
        let mut names: Vec<&str> = storage.iter().map(|s| s.name.as_str()).collect();
        names.sort_unstable();
        if names.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Config("storage unit names must be unique".into()));
        }
        if profiles.demand.len() != facilities.len() {
            return Err(Error::Config(format!(
                "{} demand profiles for {} facility classes",
                profiles.demand.len(),
                facilities.len()
            )));
        }
        profiles.validate()?;
        let mut dispatch_order: Vec<usize> = (0..facilities.len()).collect();
        // stable sort keeps declaration order on ties
        dispatch_order.sort_by(|&a, &b| {
            facilities[b]
                .value_of_lost_load
                .partial_cmp(&facilities[a].value_of_lost_load)
                .unwrap_or(std::cmp::Ordering::Equal)
        });
        Ok(Microgrid {
            facilities,
            storage,
            profiles,
            dispatch_order,
        })
    }

    pub fn facilities(&self) -> &[FacilityClass<T>] {
        &self.facilities
    }

    pub fn storage(&self) -> &[StorageUnitSpec<T>] {
        &self.storage
    }

    pub fn profiles(&self) -> &HourlyProfiles<T> {
        &self.profiles
    }

    /// Capacity vector aligned with the storage catalog.
    pub fn capacities(&self, portfolio: &Portfolio<T>) -> Result<Vec<T>> {
        let mut caps = vec![T::zero(); self.storage.len()];
        for (name, &kwh) in &portfolio.installed {
            let idx = self
                .storage
                .iter()
                .position(|s| &s.name == name)
                .ok_or_else(|| Error::Config(format!("unknown storage unit {name:?} in portfolio")))?;
            if !(kwh >= T::zero()) {
                return Err(Error::Config(format!("negative capacity for {name}")));
            }
            caps[idx] = kwh;
        }
        Ok(caps)
    }

    /// Hour-by-hour islanded dispatch for a single outage starting at
    /// `start_hour` (hour of year). Storage is full at onset.
    pub fn simulate_outage(
        &self,
        event: &OutageEvent<T>,
        portfolio: &Portfolio<T>,
        start_hour: usize,
    ) -> Result<UnservedReport<T>> {
        if start_hour >= HOURS_IN_YEAR {
            return Err(Error::Domain(format!("start hour {start_hour} outside the year")));
        }
        let caps = self.capacities(portfolio)?;
        let hours = if event.duration > T::zero() {
            event.duration.ceil().to_u64().unwrap_or(0)
        } else {
            0
        };
        Ok(self.dispatch(start_hour, hours, &caps))
    }

    /// Islanded dispatch over `hours` whole hours with full storage at onset.
    /// `capacities` is aligned with the storage catalog.
    pub fn dispatch(&self, start_hour: usize, hours: u64, capacities: &[T]) -> UnservedReport<T> {
        let mut energy: Vec<T> = self
            .storage
            .iter()
            .zip(capacities)
            .map(|(s, &c)| c * s.usable_fraction * s.round_trip_efficiency)
            .collect();
        let power: Vec<T> = self
            .storage
            .iter()
            .zip(capacities)
            .map(|(s, &c)| c * s.power_limit)
            .collect();
        let mut unserved = vec![T::zero(); self.facilities.len()];
        let mut headroom = vec![T::zero(); energy.len()];
        for h in 0..hours {
            let hour = (start_hour + h as usize) % HOURS_IN_YEAR;
            let mut pv = self.profiles.pv[hour];
            for (room, (&p, &e)) in headroom.iter_mut().zip(power.iter().zip(&energy)) {
                *room = p.min(e);
            }
            for &c in &self.dispatch_order {
                let class = &self.facilities[c];
                let mut need = T::of(f64::from(class.count)) * self.profiles.demand[c][hour];
                let from_pv = need.min(pv);
                pv = pv - from_pv;
                need = need - from_pv;
                for (room, e) in headroom.iter_mut().zip(energy.iter_mut()) {
                    if need <= T::zero() {
                        break;
                    }
                    let draw = need.min(*room);
                    *room = *room - draw;
                    *e = *e - draw;
                    need = need - draw;
                }
                unserved[c] = unserved[c] + need;
            }
        }
        let cost = unserved
            .iter()
            .zip(&self.facilities)
            .map(|(&u, f)| u * f.value_of_lost_load)
            .sum();
        UnservedReport {
            unserved_kwh: unserved,
            outage_hours: T::of_u64(hours),
            cost,
        }
    }

    /// Total demand (kWh) over a window, ignoring PV and storage.
    pub fn demand_over(&self, start_hour: usize, hours: u64) -> T {
        (0..hours)
            .map(|h| {
                let hour = (start_hour + h as usize) % HOURS_IN_YEAR;
                self.facilities
                    .iter()
                    .enumerate()
                    .map(|(c, f)| T::of(f64::from(f.count)) * self.profiles.demand[c][hour])
                    .sum::<T>()
            })
            .sum()
    }

    /// Outage cost of one sampled trace. Windows are placed on the calendar
    /// starting at hour-of-year `calendar_offset`.
    pub fn trace_cost(
        &self,
        events: &[OutageEvent<T>],
        capacities: &[T],
        calendar_offset: usize,
    ) -> T {
        outage_windows(events)
            .into_iter()
            .map(|w| {
                let start = ((calendar_offset as u64 + w.start_hour) % HOURS_IN_YEAR as u64) as usize;
                self.dispatch(start, w.hours, capacities).cost
            })
            .sum()
    }

    /// Expected outage cost over one decision period of `period_years`.
    ///
    /// Replication `r` draws from stream `r` of a base seed taken from
    /// `rng`, so two calls with identically seeded generators share every
    /// sampled outage (common random numbers).
    pub fn expected_period_cost<R: Rng + ?Sized>(
        &self,
        model: &OutageModel<T>,
        portfolio: &Portfolio<T>,
        period_years: T,
        replications: usize,
        rng: &mut R,
    ) -> Result<CostEstimate<T>> {
        let caps = self.capacities(portfolio)?;
        self.expected_cost_for(model, &caps, period_years, replications, rng.next_u64())
    }

    pub(crate) fn expected_cost_for(
        &self,
        model: &OutageModel<T>,
        capacities: &[T],
        period_years: T,
        replications: usize,
        base_seed: u64,
    ) -> Result<CostEstimate<T>> {
        if replications == 0 {
            return Err(Error::Domain("replications must be >= 1".into()));
        }
        let mut costs = Vec::with_capacity(replications);
        for r in 0..replications {
            let mut rng = stream(base_seed, r as u64);
            let offset = rng.random_range(0..HOURS_IN_YEAR);
            let trace = sample_trace(model, period_years, &mut rng)?;
            costs.push(self.trace_cost(&trace, capacities, offset));
        }
        Ok(mean_and_stderr(&costs))
    }
}

fn mean_and_stderr<T: Scalar>(values: &[T]) -> CostEstimate<T> {
    let n = T::of_usize(values.len());
    let mean = values.iter().copied().sum::<T>() / n;
    if values.len() < 2 {
        return CostEstimate {
            mean,
            stderr: T::zero(),
        };
    }
    let var = values.iter().map(|&v| (v - mean) * (v - mean)).sum::<T>() / (n - T::one());
    CostEstimate {
        mean,
        stderr: (var / n).sqrt(),
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::outage::{OutageKind, SingleModel, SuperposedModel};
    use crate::rng::seeded;

    /// One class at constant `load_kw`, no PV, one storage unit with
    /// lossless full-depth energy and ample power.
    pub(crate) fn flat_grid(load_kw: f64, voll: f64) -> Microgrid<f64> {
        Microgrid::new(
            vec![FacilityClass {
                name: "site".into(),
                count: 1,
                peak_load_kw: load_kw,
                load_profile_id: "flat".into(),
                value_of_lost_load: voll,
            }],
            vec![StorageUnitSpec {
                name: "bat".into(),
                round_trip_efficiency: 1.0,
                usable_fraction: 1.0,
                power_limit: 10.0,
            }],
            HourlyProfiles {
                demand: vec![vec![load_kw; HOURS_IN_YEAR]],
                pv: vec![0.0; HOURS_IN_YEAR],
            },
        )
        .unwrap()
    }

    fn event(duration: f64) -> OutageEvent<f64> {
        OutageEvent {
            start: 0.0,
            kind: OutageKind::Regular,
            duration,
        }
    }

    #[test]
    fn zero_duration_costs_nothing() {
        let g = flat_grid(100.0, 20.0);
        let r = g.simulate_outage(&event(0.0), &Portfolio::empty(), 0).unwrap();
        assert_eq!(r.cost, 0.0);
        assert_eq!(r.unserved_kwh, vec![0.0]);
    }

    #[test]
    fn storage_covers_half_of_a_three_hour_outage() {
        let g = flat_grid(100.0, 20.0);
        let p = Portfolio::empty().with("bat", 150.0);
        let r = g.simulate_outage(&event(3.0), &p, 100).unwrap();
        assert_eq!(r.unserved_kwh, vec![150.0]);
        assert_eq!(r.cost, 3000.0);
        assert_eq!(r.outage_hours, 3.0);
    }

    #[test]
    fn fractional_duration_rounds_up() {
        let g = flat_grid(100.0, 1.0);
        let r = g.simulate_outage(&event(2.2), &Portfolio::empty(), 0).unwrap();
        assert_eq!(r.unserved_kwh, vec![300.0]);
    }

    #[test]
    fn unknown_unit_and_bad_start_are_rejected() {
        let g = flat_grid(100.0, 1.0);
        let p = Portfolio::empty().with("flywheel", 10.0);
        assert_eq!(g.simulate_outage(&event(1.0), &p, 0).unwrap_err().code(), "config");
        assert_eq!(
            g.simulate_outage(&event(1.0), &Portfolio::empty(), HOURS_IN_YEAR).unwrap_err().code(),
            "domain"
        );
    }

    #[test]
    fn power_limit_caps_hourly_discharge() {
        let mut g = flat_grid(100.0, 1.0);
        g.storage[0].power_limit = 0.1; // 500 kWh discharges at most 50 kW
        let p = Portfolio::empty().with("bat", 500.0);
        let r = g.simulate_outage(&event(4.0), &p, 0).unwrap();
        assert_eq!(r.unserved_kwh, vec![200.0]);
    }

    #[test]
    fn priority_serves_highest_voll_first_and_wraps_year_end() {
        let demand = vec![vec![10.0; HOURS_IN_YEAR], vec![10.0; HOURS_IN_YEAR]];
        let g = Microgrid::new(
            vec![
                FacilityClass {
                    name: "home".into(),
                    count: 2,
                    peak_load_kw: 10.0,
                    load_profile_id: "a".into(),
                    value_of_lost_load: 5.0,
                },
                FacilityClass {
                    name: "hospital".into(),
                    count: 1,
                    peak_load_kw: 10.0,
                    load_profile_id: "b".into(),
                    value_of_lost_load: 50.0,
                },
            ],
            vec![StorageUnitSpec {
                name: "bat".into(),
                round_trip_efficiency: 0.5,
                usable_fraction: 1.0,
                power_limit: 0.125,
            }],
            HourlyProfiles {
                demand,
                pv: vec![0.0; HOURS_IN_YEAR],
            },
        )
        .unwrap();
        // 15 kW of discharge against 30 kW of demand: hospital first
        let p = Portfolio::empty().with("bat", 120.0);
        let r = g.simulate_outage(&event(3.0), &p, HOURS_IN_YEAR - 1).unwrap();
        assert_eq!(r.unserved_kwh, vec![45.0, 0.0]);
        assert_eq!(r.cost, 225.0);
    }

    #[test]
    fn windows_merge_overlaps() {
        let ev = |start: f64, duration: f64| OutageEvent {
            start,
            kind: OutageKind::Regular,
            duration,
        };
        let w = outage_windows(&[ev(0.5, 2.0), ev(1.2, 4.0), ev(10.0, 1.0), ev(11.0, 1.0), ev(20.0, 0.0)]);
        assert_eq!(
            w,
            vec![
                OutageWindow { start_hour: 0, hours: 5 },
                OutageWindow { start_hour: 10, hours: 2 },
            ]
        );
    }

    #[test]
    fn merged_outages_do_not_recharge() {
        let g = flat_grid(100.0, 1.0);
        let caps = [150.0];
        let two = [
            OutageEvent { start: 0.0, kind: OutageKind::Regular, duration: 2.0 },
            OutageEvent { start: 1.0, kind: OutageKind::Regular, duration: 2.0 },
        ];
        assert_eq!(g.trace_cost(&two, &caps, 0), 150.0);
        let apart = [
            OutageEvent { start: 0.0, kind: OutageKind::Regular, duration: 2.0 },
            OutageEvent { start: 5.0, kind: OutageKind::Regular, duration: 1.0 },
        ];
        // 200 - 150 in the first window, second fully covered by a refilled unit
        assert_eq!(g.trace_cost(&apart, &caps, 0), 50.0);
    }

    #[test]
    fn zero_rate_costs_exactly_zero() {
        let g = flat_grid(100.0, 20.0);
        let m: OutageModel<f64> = SingleModel::new(0.0, 3.0, 1.0).unwrap().into();
        let est = g
            .expected_period_cost(&m, &Portfolio::empty(), 5.0, 50, &mut seeded(1))
            .unwrap();
        assert_eq!(est.mean, 0.0);
        assert_eq!(est.stderr, 0.0);
    }

    #[test]
    fn huge_portfolio_costs_nothing() {
        let g = flat_grid(100.0, 20.0);
        let m: OutageModel<f64> = SuperposedModel::new(2.0, 0.5, 1.0, 30.0, 1.0).unwrap().into();
        let p = Portfolio::empty().with("bat", 1e9);
        let est = g.expected_period_cost(&m, &p, 2.0, 200, &mut seeded(1)).unwrap();
        assert_eq!(est.mean, 0.0);
        assert_eq!(est.stderr, 0.0);
    }

    #[test]
    fn zero_replications_is_an_error() {
        let g = flat_grid(100.0, 20.0);
        let m: OutageModel<f64> = SingleModel::new(1.0, 3.0, 1.0).unwrap().into();
        assert!(g.expected_period_cost(&m, &Portfolio::empty(), 1.0, 0, &mut seeded(1)).is_err());
    }

    #[test]
    fn shift_only_outages_have_closed_form_cost() {
        // kappa = 0: every outage lasts exactly one hour; with a flat load
        // each hour-window costs load*voll unless windows touch.
        let g = flat_grid(100.0, 20.0);
        let m: OutageModel<f64> = SingleModel::new(1.0, 0.0, 1.0).unwrap().into();
        let mut rng = seeded(17);
        for _ in 0..200 {
            let trace = sample_trace(&m, 1.0, &mut rng).unwrap();
            let hours: u64 = outage_windows(&trace).iter().map(|w| w.hours).sum();
            assert_eq!(g.trace_cost(&trace, &[0.0], 0), hours as f64 * 100.0 * 20.0);
            // 50 kWh of storage covers half of every isolated one-hour outage
            let isolated = outage_windows(&trace).iter().all(|w| w.hours == 1);
            if isolated {
                assert_eq!(g.trace_cost(&trace, &[50.0], 0), trace.len() as f64 * 50.0 * 20.0);
            }
        }
    }

    #[test]
    fn stderr_is_zero_for_single_replication() {
        let est = mean_and_stderr(&[4.0f64]);
        assert_eq!((est.mean, est.stderr), (4.0, 0.0));
        let est = mean_and_stderr(&[1.0f64, 3.0]);
        assert_eq!(est.mean, 2.0);
        assert!((est.stderr - 1.0).abs() < 1e-15);
    }
}
