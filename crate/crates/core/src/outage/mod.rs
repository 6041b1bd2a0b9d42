//! Probabilistic grid-outage models.
//!
//! Two models are supported: a single homogeneous Poisson process of
//! outages with shifted-Poisson durations, and the superposition of a
//! regular and a severe process, each with its own duration law. Rates are
//! outages per year, durations are hours.

mod fit;
mod pmf;

use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{sample_poisson, seeded};
use crate::scalar::{FieldScalar, Scalar};

pub use fit::{fit_from_caidi, fit_single_from_caidi, CaidiFit, CaidiSeries, CaidiYear};
pub use pmf::{
    duration_cdf, duration_mean, duration_pmf, duration_support_limit, duration_tail, poisson_pmf,
};

pub const HOURS_PER_YEAR: f64 = 8760.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutageKind {
    Regular,
    Severe,
}

impl fmt::Display for OutageKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            OutageKind::Regular => f.write_str("regular"),
            OutageKind::Severe => f.write_str("severe"),
        }
    }
}

fn default_shift<T: FieldScalar>() -> T {
    T::one()
}

/// One Poisson process of outages with shifted-Poisson durations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound(deserialize = "T: FieldScalar + Deserialize<'de>"))]
pub struct SingleModel<T> {
    pub lambda: T,
    pub kappa: T,
    #[serde(rename = "shift_hours", default = "default_shift")]
    pub shift: T,
}

impl<T: FieldScalar> SingleModel<T> {
    pub fn new(lambda: T, kappa: T, shift: T) -> Result<Self> {
        let model = SingleModel {
            lambda,
            kappa,
            shift,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<()> {
        let zero = T::zero();
        if !(self.lambda >= zero) {
            return Err(Error::Domain(format!("lambda must be >= 0, got {:?}", self.lambda)));
        }
        if !(self.kappa >= zero) {
            return Err(Error::Domain(format!("kappa must be >= 0, got {:?}", self.kappa)));
        }
        if !(self.shift > zero) {
            return Err(Error::Domain(format!("shift must be > 0, got {:?}", self.shift)));
        }
        Ok(())
    }

    pub fn mean_duration(&self) -> T {
        self.shift + self.kappa
    }

    pub fn convert<U>(&self, f: impl Fn(T) -> U) -> SingleModel<U> {
        SingleModel {
            lambda: f(self.lambda),
            kappa: f(self.kappa),
            shift: f(self.shift),
        }
    }
}

/// Superposition of a regular (`1`) and a severe (`2`) outage process.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound(deserialize = "T: FieldScalar + Deserialize<'de>"))]
pub struct SuperposedModel<T> {
    pub lambda1: T,
    pub lambda2: T,
    pub kappa1: T,
    pub kappa2: T,
    #[serde(rename = "shift_hours", default = "default_shift")]
    pub shift: T,
}

impl<T: FieldScalar> SuperposedModel<T> {
    pub fn new(lambda1: T, lambda2: T, kappa1: T, kappa2: T, shift: T) -> Result<Self> {
        let model = SuperposedModel {
            lambda1,
            lambda2,
            kappa1,
            kappa2,
            shift,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<()> {
        let zero = T::zero();
        for (name, v) in [
            ("lambda1", self.lambda1),
            ("lambda2", self.lambda2),
            ("kappa1", self.kappa1),
            ("kappa2", self.kappa2),
        ] {
            if !(v >= zero) {
                return Err(Error::Domain(format!("{name} must be >= 0, got {v:?}")));
            }
        }
        if !(self.shift > zero) {
            return Err(Error::Domain(format!("shift must be > 0, got {:?}", self.shift)));
        }
        if self.kappa2 < self.kappa1 {
            return Err(Error::Domain(format!(
                "severe duration rate kappa2={:?} is below regular kappa1={:?}",
                self.kappa2, self.kappa1
            )));
        }
        Ok(())
    }

    pub fn total_rate(&self) -> T {
        self.lambda1 + self.lambda2
    }

    /// `lambda2 / (lambda1 + lambda2)`; `None` when both rates are zero.
    pub fn severe_probability(&self) -> Option<T> {
        let total = self.total_rate();
        (total > T::zero()).then(|| self.lambda2 / total)
    }

    pub fn convert<U>(&self, f: impl Fn(T) -> U) -> SuperposedModel<U> {
        SuperposedModel {
            lambda1: f(self.lambda1),
            lambda2: f(self.lambda2),
            kappa1: f(self.kappa1),
            kappa2: f(self.kappa2),
            shift: f(self.shift),
        }
    }
}

/// Either outage model; the serialized form carries a `type` tag.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
#[serde(bound(deserialize = "T: FieldScalar + Deserialize<'de>"))]
pub enum OutageModel<T> {
    Single(SingleModel<T>),
    Superposed(SuperposedModel<T>),
}

/// One independent Poisson stream inside a model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Component<T> {
    pub kind: OutageKind,
    pub rate: T,
    pub kappa: T,
}

impl<T: FieldScalar> OutageModel<T> {
    pub fn validate(&self) -> Result<()> {
        match self {
            OutageModel::Single(m) => m.validate(),
            OutageModel::Superposed(m) => m.validate(),
        }
    }

    pub fn total_rate(&self) -> T {
        match self {
            OutageModel::Single(m) => m.lambda,
            OutageModel::Superposed(m) => m.total_rate(),
        }
    }

    pub fn shift(&self) -> T {
        match self {
            OutageModel::Single(m) => m.shift,
            OutageModel::Superposed(m) => m.shift,
        }
    }

    /// Regular component first, then severe (superposed only).
    pub fn components(&self) -> Vec<Component<T>> {
        match self {
            OutageModel::Single(m) => vec![Component {
                kind: OutageKind::Regular,
                rate: m.lambda,
                kappa: m.kappa,
            }],
            OutageModel::Superposed(m) => vec![
                Component {
                    kind: OutageKind::Regular,
                    rate: m.lambda1,
                    kappa: m.kappa1,
                },
                Component {
                    kind: OutageKind::Severe,
                    rate: m.lambda2,
                    kappa: m.kappa2,
                },
            ],
        }
    }

    /// Duration rate for `kind`, or a domain error if the model has no such kind.
    pub fn kappa_for(&self, kind: OutageKind) -> Result<T> {
        match (self, kind) {
            (OutageModel::Single(m), OutageKind::Regular) => Ok(m.kappa),
            (OutageModel::Single(_), OutageKind::Severe) => Err(Error::Domain(
                "single-process model has no severe outages".into(),
            )),
            (OutageModel::Superposed(m), OutageKind::Regular) => Ok(m.kappa1),
            (OutageModel::Superposed(m), OutageKind::Severe) => Ok(m.kappa2),
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            OutageModel::Single(_) => "single",
            OutageModel::Superposed(_) => "superposed",
        }
    }

    pub fn convert<U>(&self, f: impl Fn(T) -> U) -> OutageModel<U> {
        match self {
            OutageModel::Single(m) => OutageModel::Single(m.convert(f)),
            OutageModel::Superposed(m) => OutageModel::Superposed(m.convert(f)),
        }
    }
}

impl<T> From<SingleModel<T>> for OutageModel<T> {
    fn from(m: SingleModel<T>) -> Self {
        OutageModel::Single(m)
    }
}

impl<T> From<SuperposedModel<T>> for OutageModel<T> {
    fn from(m: SuperposedModel<T>) -> Self {
        OutageModel::Superposed(m)
    }
}

/// A single grid outage. `start` is measured in hours from the start of
/// the sampled horizon.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OutageEvent<T> {
    pub start: T,
    pub kind: OutageKind,
    pub duration: T,
}

fn check_horizon<T: Scalar>(horizon: T) -> Result<()> {
    if horizon >= T::zero() && horizon.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("horizon must be finite and >= 0, got {horizon}")))
    }
}

/// Per-component outage counts over `horizon` years, one draw per component.
fn component_counts<T: Scalar, R: Rng + ?Sized>(
    model: &OutageModel<T>,
    horizon: T,
    rng: &mut R,
) -> Result<Vec<(Component<T>, u64)>> {
    check_horizon(horizon)?;
    Ok(model
        .components()
        .into_iter()
        .map(|c| {
            let n = sample_poisson((c.rate * horizon).as_f64(), rng);
            (c, n)
        })
        .collect())
}

/// Number of outages in `horizon` years.
///
/// For the superposed model the count is the sum of the independent
/// regular and severe counts, which is Poisson with the total rate.
pub fn sample_outage_count<T: Scalar, R: Rng + ?Sized>(
    model: &OutageModel<T>,
    horizon: T,
    rng: &mut R,
) -> Result<u64> {
    Ok(component_counts(model, horizon, rng)?
        .into_iter()
        .map(|(_, n)| n)
        .sum())
}

/// Type of an outage drawn from the superposed process: severe with
/// probability `lambda2 / (lambda1 + lambda2)`.
pub fn sample_type<T: Scalar, R: Rng + ?Sized>(
    model: &SuperposedModel<T>,
    rng: &mut R,
) -> Result<OutageKind> {
    let p = model
        .severe_probability()
        .ok_or_else(|| Error::Domain("both outage rates are zero".into()))?;
    let u: f64 = rng.random();
    Ok(if u < p.as_f64() {
        OutageKind::Severe
    } else {
        OutageKind::Regular
    })
}

/// Outage duration in hours: `shift + Poisson(kappa_kind)`.
pub fn sample_duration<T: Scalar, R: Rng + ?Sized>(
    model: &OutageModel<T>,
    kind: OutageKind,
    rng: &mut R,
) -> Result<T> {
    let kappa = model.kappa_for(kind)?;
    Ok(model.shift() + T::of_u64(sample_poisson(kappa.as_f64(), rng)))
}

/// A realization of the outage process over `horizon` years, sorted by start.
///
/// Each component process is realized separately and the results are
/// merged. Counts are drawn first from `rng`, then every component gets
/// its own sub-stream for start times and durations, so event `i` of a
/// component keeps its attributes when rates or other components change.
pub fn sample_trace<T: Scalar, R: Rng + ?Sized>(
    model: &OutageModel<T>,
    horizon: T,
    rng: &mut R,
) -> Result<Vec<OutageEvent<T>>> {
    let counts = component_counts(model, horizon, rng)?;
    let seeds: Vec<u64> = counts.iter().map(|_| rng.next_u64()).collect();
    let span = horizon * T::of(HOURS_PER_YEAR);
    let shift = model.shift();
    let mut events = Vec::new();
    for ((component, count), seed) in counts.into_iter().zip(seeds) {
        let mut sub = seeded(seed);
        let kappa = component.kappa.as_f64();
        for _ in 0..count {
            let u: f64 = sub.random();
            let start = T::of(u) * span;
            let duration = shift + T::of_u64(sample_poisson(kappa, &mut sub));
            events.push(OutageEvent {
                start,
                kind: component.kind,
                duration,
            });
        }
    }
    sort_events(&mut events);
    Ok(events)
}

/// Merges two independent traces into one sorted trace.
pub fn superpose<T: Scalar>(a: &[OutageEvent<T>], b: &[OutageEvent<T>]) -> Vec<OutageEvent<T>> {
    let mut merged: Vec<_> = a.iter().chain(b).copied().collect();
    sort_events(&mut merged);
    merged
}

fn sort_events<T: Scalar>(events: &mut [OutageEvent<T>]) {
    events.sort_by(|x, y| {
        x.start
            .partial_cmp(&y.start)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(x.kind.cmp(&y.kind))
    });
}
