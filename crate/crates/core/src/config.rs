//! Planning configuration documents and their semantic hashes.
//!
//! A document is TOML. Relative profile paths resolve against the
//! document's directory. The config hash covers the normalized planning
//! problem (including resolved profile values) but not file locations,
//! seeds or solver settings, which artifacts record separately.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::mdp::{PlanningConfig, PriceChain, StorageOption};
use crate::outage::OutageModel;
use crate::scalar::Scalar;
use crate::sim::{
    read_profile_csv, scale_to_peak, FacilityClass, HourlyProfiles, Microgrid, StorageUnitSpec,
    HOURS_IN_YEAR,
};
use crate::solver::TrainingSchedule;

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UnitDoc {
    pub name: String,
    pub ladder: Vec<f64>,
    pub advance_prob: f64,
    pub efficiency: f64,
    pub usable_fraction: f64,
    pub power_limit: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FacilityDoc {
    pub name: String,
    pub count: u32,
    pub peak_load_kw: f64,
    pub profile: String,
    pub voll: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PvDoc {
    pub profile: String,
    pub peak_kw: f64,
}

/// Exactly one of `csv`, `daily` (24 values repeated all year) or `constant`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfileDoc {
    pub csv: Option<String>,
    pub daily: Option<Vec<f64>>,
    pub constant: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetamodelDoc {
    pub replications: usize,
    pub seed: u64,
}

impl Default for MetamodelDoc {
    fn default() -> Self {
        MetamodelDoc {
            replications: 200,
            seed: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainingDoc {
    pub episodes: usize,
    pub alpha_start: f64,
    pub alpha_end: f64,
    pub epsilon_start: f64,
    pub epsilon_end: f64,
    pub gamma: f64,
    pub seed: u64,
    pub log_every: usize,
}

impl Default for TrainingDoc {
    fn default() -> Self {
        let s = TrainingSchedule::<f64>::default_with_episodes(1_000_000);
        TrainingDoc {
            episodes: s.episodes,
            alpha_start: s.alpha_start,
            alpha_end: s.alpha_end,
            epsilon_start: s.epsilon_start,
            epsilon_end: s.epsilon_end,
            gamma: s.gamma,
            seed: 7,
            log_every: 10_000,
        }
    }
}

impl TrainingDoc {
    pub fn schedule<T: Scalar>(&self) -> TrainingSchedule<T> {
        TrainingSchedule {
            episodes: self.episodes,
            alpha_start: T::of(self.alpha_start),
            alpha_end: T::of(self.alpha_end),
            epsilon_start: T::of(self.epsilon_start),
            epsilon_end: T::of(self.epsilon_end),
            gamma: T::of(self.gamma),
            seed: self.seed,
        }
    }
}

/// On-disk planning document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlanDocument {
    pub horizon: usize,
    pub levels_kwh: Vec<u64>,
    /// Length of one decision period in years.
    #[serde(default = "one")]
    pub period_years: f64,
    #[serde(default)]
    pub metamodel_path: Option<String>,
    pub outage_model: OutageModel<f64>,
    /// Named alternative outage models selectable at load time.
    #[serde(default)]
    pub outage_models: BTreeMap<String, OutageModel<f64>>,
    pub units: Vec<UnitDoc>,
    pub facilities: Vec<FacilityDoc>,
    pub pv: PvDoc,
    pub profiles: BTreeMap<String, ProfileDoc>,
    #[serde(default)]
    pub metamodel: MetamodelDoc,
    #[serde(default)]
    pub training: TrainingDoc,
}

impl PlanDocument {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    /// The outage model called `name`, or the default one for `None`.
    pub fn model(&self, name: Option<&str>) -> Result<OutageModel<f64>> {
        match name {
            None | Some("default") => Ok(self.outage_model),
            Some(n) => self.outage_models.get(n).copied().ok_or_else(|| {
                Error::Config(format!(
                    "no outage model named {n:?}; available: {:?}",
                    self.outage_models.keys().collect::<Vec<_>>()
                ))
            }),
        }
    }
}

/// Fully loaded configuration for one outage model.
#[derive(Debug, Clone)]
pub struct ResolvedConfig<T> {
    pub document: PlanDocument,
    pub base_dir: PathBuf,
    pub model_name: String,
    pub outage_model: OutageModel<T>,
    pub planning: PlanningConfig<T>,
    pub microgrid: Microgrid<T>,
    pub period_years: T,
    /// Hash of the planning problem including the active outage model.
    pub config_hash: String,
    /// Same, with the outage model left out; equal across model variants.
    pub base_hash: String,
}

impl<T: Scalar> ResolvedConfig<T> {
    pub fn load(path: &Path, model: Option<&str>) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::from_text(&text, &base, model)
    }

    pub fn from_text(text: &str, base_dir: &Path, model: Option<&str>) -> Result<Self> {
        let document = PlanDocument::parse(text)?;
        Self::from_document(document, base_dir, model)
    }

    pub fn from_document(document: PlanDocument, base_dir: &Path, model: Option<&str>) -> Result<Self> {
        let active = document.model(model)?;
        active.validate()?;
        let outage_model = active.convert(T::of);

        let units = document
            .units
            .iter()
            .map(|u| {
                Ok(StorageOption {
                    spec: StorageUnitSpec {
                        name: u.name.clone(),
                        round_trip_efficiency: T::of(u.efficiency),
                        usable_fraction: T::of(u.usable_fraction),
                        power_limit: T::of(u.power_limit),
                    },
                    chain: PriceChain::new(u.ladder.iter().map(|&p| T::of(p)).collect(), T::of(u.advance_prob))
                        .map_err(|e| Error::Config(format!("unit {}: {e}", u.name)))?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let planning = PlanningConfig {
            horizon: document.horizon,
            units,
            levels_kwh: document.levels_kwh.clone(),
        };
        planning.validate()?;
        if !(document.period_years > 0.0) {
            return Err(Error::Config("period_years must be > 0".into()));
        }

        let shapes: BTreeMap<String, Vec<f64>> = document
            .profiles
            .iter()
            .map(|(id, p)| Ok((id.clone(), load_profile(id, p, base_dir)?)))
            .collect::<Result<_>>()?;
        let shape = |id: &str| -> Result<Vec<T>> {
            shapes
                .get(id)
                .map(|v| v.iter().map(|&x| T::of(x)).collect())
                .ok_or_else(|| Error::Config(format!("unknown profile id {id:?}")))
        };
        let mut demand = Vec::new();
        let mut facilities = Vec::new();
        for f in &document.facilities {
            demand.push(scale_to_peak(&shape(&f.profile)?, T::of(f.peak_load_kw)));
            facilities.push(FacilityClass {
                name: f.name.clone(),
                count: f.count,
                peak_load_kw: T::of(f.peak_load_kw),
                load_profile_id: f.profile.clone(),
                value_of_lost_load: T::of(f.voll),
            });
        }
        let pv = scale_to_peak(&shape(&document.pv.profile)?, T::of(document.pv.peak_kw));
        let microgrid = Microgrid::new(
            facilities,
            planning.units.iter().map(|u| u.spec.clone()).collect(),
            HourlyProfiles { demand, pv },
        )?;

        let config_hash = semantic_hash(&document, Some(&active), &shapes)?;
        let base_hash = semantic_hash(&document, None, &shapes)?;
        Ok(ResolvedConfig {
            model_name: model.unwrap_or("default").to_string(),
            period_years: T::of(document.period_years),
            document,
            base_dir: base_dir.to_path_buf(),
            outage_model,
            planning,
            microgrid,
            config_hash,
            base_hash,
        })
    }

    /// Every capacity vector the MDP can reach within the horizon.
    pub fn capacity_grid(&self) -> Vec<Vec<u64>> {
        crate::sim::reachable_capacity_grid(
            self.planning.units.len(),
            &self.planning.levels_kwh,
            self.planning.horizon,
        )
    }

    pub fn metamodel_path(&self) -> Option<PathBuf> {
        self.document
            .metamodel_path
            .as_ref()
            .map(|p| self.base_dir.join(p))
    }
}

fn load_profile(id: &str, doc: &ProfileDoc, base_dir: &Path) -> Result<Vec<f64>> {
    match (&doc.csv, &doc.daily, doc.constant) {
        (Some(path), None, None) => {
            let full = base_dir.join(path);
            let f = fs::File::open(&full).map_err(|e| Error::io(&full, e))?;
            read_profile_csv(f).map_err(|e| Error::Config(format!("profile {id}: {e}")))
        }
        (None, Some(day), None) => {
            if day.len() != 24 || day.iter().any(|v| !(*v >= 0.0)) {
                return Err(Error::Config(format!("profile {id}: daily needs 24 non-negative values")));
            }
            Ok((0..HOURS_IN_YEAR).map(|h| day[h % 24]).collect())
        }
        (None, None, Some(c)) if c >= 0.0 => Ok(vec![c; HOURS_IN_YEAR]),
        _ => Err(Error::Config(format!(
            "profile {id}: give exactly one of csv, daily, constant (non-negative)"
        ))),
    }
}

#[derive(Serialize)]
struct SemanticView<'a> {
    horizon: usize,
    levels_kwh: &'a [u64],
    period_years: f64,
    outage_model: Option<&'a OutageModel<f64>>,
    units: &'a [UnitDoc],
    facilities: &'a [FacilityDoc],
    pv: &'a PvDoc,
    profiles: BTreeMap<&'a str, String>,
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn semantic_hash(
    doc: &PlanDocument,
    model: Option<&OutageModel<f64>>,
    shapes: &BTreeMap<String, Vec<f64>>,
) -> Result<String> {
    let profiles = shapes
        .iter()
        .map(|(id, values)| {
            let mut text = String::with_capacity(values.len() * 4);
            for v in values {
                text.push_str(&v.to_string());
                text.push('\n');
            }
            (id.as_str(), sha256_hex(text.as_bytes()))
        })
        .collect();
    let view = SemanticView {
        horizon: doc.horizon,
        levels_kwh: &doc.levels_kwh,
        period_years: doc.period_years,
        outage_model: model,
        units: &doc.units,
        facilities: &doc.facilities,
        pv: &doc.pv,
        profiles,
    };
    let canonical = serde_json::to_string(&view).map_err(|e| Error::Parse(e.to_string()))?;
    Ok(sha256_hex(canonical.as_bytes())[..16].to_string())
}

/// SHA-256 of a file's bytes, hex encoded.
pub fn file_digest(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(sha256_hex(&bytes))
}
