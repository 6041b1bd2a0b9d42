#![allow(dead_code)]

use std::collections::BTreeMap;

use gridplan::mdp::{PlanningConfig, PriceChain, StorageOption};
use gridplan::outage::{OutageModel, SingleModel};
use gridplan::sim::{reachable_capacity_grid, CostEntry, CostTable, CostTableHeader, StorageUnitSpec};

pub fn unit(name: &str, ladder: &[f64], advance: f64) -> StorageOption<f64> {
    StorageOption {
        spec: StorageUnitSpec {
            name: name.into(),
            round_trip_efficiency: 0.9,
            usable_fraction: 0.9,
            power_limit: 0.5,
        },
        chain: PriceChain::new(ladder.to_vec(), advance).unwrap(),
    }
}

pub fn planning(horizon: usize, units: Vec<StorageOption<f64>>, levels: &[u64]) -> PlanningConfig<f64> {
    let c = PlanningConfig {
        horizon,
        units,
        levels_kwh: levels.to_vec(),
    };
    c.validate().unwrap();
    c
}

/// Cost table over the reachable grid with `cost(capacities)`.
pub fn table(config: &PlanningConfig<f64>, cost: impl Fn(&[u64]) -> f64) -> CostTable<f64> {
    let grid = reachable_capacity_grid(config.units.len(), &config.levels_kwh, config.horizon);
    let entries: BTreeMap<Vec<u64>, CostEntry<f64>> = grid
        .into_iter()
        .map(|c| {
            let e = CostEntry {
                mean: cost(&c),
                stderr: 0.0,
            };
            (c, e)
        })
        .collect();
    let model: OutageModel<f64> = SingleModel::new(1.0, 1.0, 1.0).unwrap().into();
    CostTable::new(
        CostTableHeader {
            config_hash: "test".into(),
            model,
            seed: 0,
            replications: 1,
            period_years: 1.0,
            units: config.unit_names(),
        },
        entries,
    )
    .unwrap()
}

/// Two units, two levels, two-rung ladders: small enough to enumerate.
pub fn small() -> PlanningConfig<f64> {
    planning(
        3,
        vec![unit("a", &[300.0, 150.0], 0.5), unit("b", &[140.0, 80.0], 0.3)],
        &[100, 300],
    )
}

/// Outage cost that falls with diminishing returns in deliverable energy.
pub fn diminishing(caps: &[u64]) -> f64 {
    let e = caps[0] as f64 * 0.8 + caps[1] as f64 * 0.4;
    90_000.0 * (-e / 250.0).exp() + 5_000.0
}
