//! Exhaustive lookup table of expected outage cost per portfolio.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::de::DeserializeOwned;
use serde::Serialize;

use super::{CostEstimate, Microgrid};
use crate::error::{Error, Result};
use crate::outage::OutageModel;
use crate::scalar::Scalar;

const MAGIC: &str = "# gridplan cost table v1";

/// Every capacity vector reachable with at most `max_installs` installs,
/// each adding one of `levels` (kWh) to one of `num_units` units.
pub fn reachable_capacity_grid(num_units: usize, levels: &[u64], max_installs: usize) -> Vec<Vec<u64>> {
    let mut seen: BTreeSet<Vec<u64>> = BTreeSet::new();
    let mut frontier = vec![vec![0u64; num_units]];
    seen.insert(frontier[0].clone());
    for _ in 0..max_installs {
        let mut next = Vec::new();
        for caps in &frontier {
            for unit in 0..num_units {
                for &level in levels {
                    let mut c = caps.clone();
                    c[unit] += level;
                    if seen.insert(c.clone()) {
                        next.push(c);
                    }
                }
            }
        }
        frontier = next;
    }
    seen.into_iter().collect()
}

pub type CostEntry<T> = CostEstimate<T>;

#[derive(Debug, Clone, PartialEq)]
pub struct CostTableHeader<T> {
    pub config_hash: String,
    pub model: OutageModel<T>,
    pub seed: u64,
    pub replications: usize,
    pub period_years: T,
    pub units: Vec<String>,
}

/// Expected outage cost for each reachable portfolio, keyed by the
/// per-unit installed kWh in catalog order.
#[derive(Debug, Clone, PartialEq)]
pub struct CostTable<T> {
    pub header: CostTableHeader<T>,
    entries: BTreeMap<Vec<u64>, CostEntry<T>>,
}

impl<T: Scalar> CostTable<T> {
    pub fn new(header: CostTableHeader<T>, entries: BTreeMap<Vec<u64>, CostEntry<T>>) -> Result<Self> {
        let width = header.units.len();
        if let Some(bad) = entries.keys().find(|k| k.len() != width) {
            return Err(Error::Config(format!(
                "capacity vector {bad:?} does not match {width} units"
            )));
        }
        Ok(CostTable { header, entries })
    }

    /// Exact-match lookup; portfolios outside the grid are an error.
    pub fn lookup(&self, capacities: &[u64]) -> Result<CostEntry<T>> {
        self.entries
            .get(capacities)
            .copied()
            .ok_or_else(|| Error::MissingPortfolio(capacities.to_vec()))
    }

    pub fn cost(&self, capacities: &[u64]) -> Result<T> {
        Ok(self.lookup(capacities)?.mean)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Vec<u64>, &CostEntry<T>)> {
        self.entries.iter()
    }

    pub fn max_cost(&self) -> T {
        self.entries.values().map(|e| e.mean).fold(T::zero(), T::max)
    }

    pub fn ensure_config(&self, expected_hash: &str, artifact: &str) -> Result<()> {
        if self.header.config_hash != expected_hash {
            return Err(Error::HashMismatch {
                artifact: artifact.to_string(),
                expected: expected_hash.to_string(),
                found: self.header.config_hash.clone(),
            });
        }
        Ok(())
    }
}

impl<T: Scalar + Serialize + DeserializeOwned> CostTable<T> {
    pub fn write<W: Write>(&self, mut w: W) -> Result<()> {
        let h = &self.header;
        let model = serde_json::to_string(&h.model).map_err(|e| Error::Parse(e.to_string()))?;
        let io = |e| Error::io("<cost table>", e);
        writeln!(w, "{MAGIC}").map_err(io)?;
        writeln!(w, "# config_hash={}", h.config_hash).map_err(io)?;
        writeln!(w, "# seed={}", h.seed).map_err(io)?;
        writeln!(w, "# replications={}", h.replications).map_err(io)?;
        writeln!(w, "# period_years={}", h.period_years).map_err(io)?;
        writeln!(w, "# units={}", h.units.join(",")).map_err(io)?;
        writeln!(w, "# model={model}").map_err(io)?;
        writeln!(w, "capacity_kwh\tcost\tstderr").map_err(io)?;
        for (caps, e) in &self.entries {
            let key: Vec<String> = caps.iter().map(u64::to_string).collect();
            writeln!(w, "{}\t{}\t{}", key.join(","), e.mean, e.stderr).map_err(io)?;
        }
        Ok(())
    }

    pub fn read<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r.lines();
        let mut next = || -> Result<String> {
            lines
                .next()
                .ok_or_else(|| Error::Parse("truncated cost table".into()))?
                .map_err(|e| Error::io("<cost table>", e))
        };
        if next()? != MAGIC {
            return Err(Error::Parse("not a cost table file".into()));
        }
        let mut field = |name: &str| -> Result<String> {
            let line = next()?;
            line.strip_prefix(&format!("# {name}="))
                .map(str::to_string)
                .ok_or_else(|| Error::Parse(format!("expected header field {name}, got {line:?}")))
        };
        let config_hash = field("config_hash")?;
        let seed = parse_field(&field("seed")?, "seed")?;
        let replications = parse_field(&field("replications")?, "replications")?;
        let period_years = parse_field(&field("period_years")?, "period_years")?;
        let units: Vec<String> = field("units")?.split(',').map(str::to_string).collect();
        let model: OutageModel<T> =
            serde_json::from_str(&field("model")?).map_err(|e| Error::Parse(e.to_string()))?;
        drop(field);
        if next()? != "capacity_kwh\tcost\tstderr" {
            return Err(Error::Parse("missing cost table column header".into()));
        }
        let mut entries = BTreeMap::new();
        for line in lines {
            let line = line.map_err(|e| Error::io("<cost table>", e))?;
            if line.is_empty() {
                continue;
            }
            let cols: Vec<&str> = line.split('\t').collect();
            if cols.len() != 3 {
                return Err(Error::Parse(format!("bad cost table record {line:?}")));
            }
            let caps = cols[0]
                .split(',')
                .map(|c| parse_field::<u64>(c, "capacity"))
                .collect::<Result<Vec<_>>>()?;
            let entry = CostEstimate {
                mean: parse_field(cols[1], "cost")?,
                stderr: parse_field(cols[2], "stderr")?,
            };
            entries.insert(caps, entry);
        }
        CostTable::new(
            CostTableHeader {
                config_hash,
                model,
                seed,
                replications,
                period_years,
                units,
            },
            entries,
        )
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let f = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(f);
        self.write(&mut w)?;
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let f = File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read(BufReader::new(f))
    }
}

fn parse_field<V: std::str::FromStr>(text: &str, what: &str) -> Result<V> {
    text.trim()
        .parse()
        .map_err(|_| Error::Parse(format!("bad {what} value {text:?}")))
}

/// Monte Carlo expected cost for every portfolio in `grid`.
///
/// Every grid point is evaluated with the same `seed`, so costs of
/// different portfolios are compared on identical sampled outages. Grid
/// points are evaluated in parallel; the result does not depend on thread
/// count.
#[allow(clippy::too_many_arguments)]
pub fn build_metamodel<T: Scalar>(
    model: &OutageModel<T>,
    grid: &[Vec<u64>],
    microgrid: &Microgrid<T>,
    period_years: T,
    replications: usize,
    seed: u64,
    config_hash: &str,
) -> Result<CostTable<T>> {
    model.validate()?;
    let width = microgrid.storage().len();
    if let Some(bad) = grid.iter().find(|c| c.len() != width) {
        return Err(Error::Config(format!("grid point {bad:?} does not match {width} units")));
    }
    let estimates = grid
        .par_iter()
        .map(|caps| {
            let as_t: Vec<T> = caps.iter().map(|&c| T::of_u64(c)).collect();
            microgrid
                .expected_cost_for(model, &as_t, period_years, replications, seed)
                .map(|e| (caps.clone(), e))
        })
        .collect::<Result<Vec<_>>>()?;
    CostTable::new(
        CostTableHeader {
            config_hash: config_hash.to_string(),
            model: *model,
            seed,
            replications,
            period_years,
            units: microgrid.storage().iter().map(|s| s.name.clone()).collect(),
        },
        estimates.into_iter().collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::outage::{SingleModel, SuperposedModel};
    use crate::sim::tests::flat_grid;

    #[test]
    fn zero_rate_on_empty_grid() {
        let g = flat_grid(100.0, 10.0);
        let m: OutageModel<f64> = SingleModel::new(0.0, 1.0, 1.0).unwrap().into();
        let t = build_metamodel(&m, &[vec![0]], &g, 1.0, 10, 1, "h").unwrap();
        assert_eq!(t.len(), 1);
        assert_eq!(t.cost(&[0]).unwrap(), 0.0);
    }

    #[test]
    fn missing_portfolio_is_a_hard_error() {
        let g = flat_grid(100.0, 10.0);
        let m: OutageModel<f64> = SingleModel::new(1.0, 1.0, 1.0).unwrap().into();
        let t = build_metamodel(&m, &[vec![0], vec![300]], &g, 1.0, 10, 1, "h").unwrap();
        assert!(matches!(t.cost(&[1000]), Err(Error::MissingPortfolio(_))));
    }

    #[test]
    fn grid_shape_is_checked() {
        let g = flat_grid(100.0, 10.0);
        let m: OutageModel<f64> = SingleModel::new(1.0, 1.0, 1.0).unwrap().into();
        assert!(build_metamodel(&m, &[vec![0, 0]], &g, 1.0, 10, 1, "h").is_err());
    }

    #[test]
    fn persistence_round_trip_and_hash_check() {
        let g = flat_grid(100.0, 10.0);
        let m: OutageModel<f64> = SuperposedModel::new(1.0, 0.2, 0.636, 21.55, 1.0).unwrap().into();
        let t = build_metamodel(&m, &reachable_capacity_grid(1, &[100, 300], 2), &g, 5.0, 50, 9, "abc").unwrap();
        let mut buf = Vec::new();
        t.write(&mut buf).unwrap();
        let back = CostTable::<f64>::read(buf.as_slice()).unwrap();
        assert_eq!(back, t);
        assert!(back.ensure_config("abc", "table").is_ok());
        assert_eq!(back.ensure_config("xyz", "table").unwrap_err().code(), "hash-mismatch");
        assert!(CostTable::<f64>::read("garbage\n".as_bytes()).is_err());
    }

    #[test]
    fn reachable_grid_small() {
        let grid = reachable_capacity_grid(2, &[1, 2], 2);
        // {0,1,2,3,4} split over two units with at most two installs
        assert!(grid.contains(&vec![0, 0]));
        assert!(grid.contains(&vec![2, 2]));
        assert!(grid.contains(&vec![4, 0]));
        assert!(!grid.contains(&vec![3, 1]));
        // 2 = 1 + 1 duplicates a single install of 2
        assert_eq!(grid.len(), 1 + 4 + 8);
    }
}
