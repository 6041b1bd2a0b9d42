//! Method-of-moments fitting of the superposed model from yearly CAIDI values.

use std::io::Read;

use serde::{Deserialize, Serialize};

use super::{SingleModel, SuperposedModel};
use crate::error::{Error, Result};
use crate::scalar::FieldScalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaidiYear<T> {
    pub label: String,
    pub caidi: T,
}

/// Average outage duration per interruption (hours) for a run of years.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaidiSeries<T> {
    pub years: Vec<CaidiYear<T>>,
}

impl<T: FieldScalar> CaidiSeries<T> {
    pub fn new(years: Vec<CaidiYear<T>>) -> Result<Self> {
        if years.is_empty() {
            return Err(Error::Domain("CAIDI series is empty".into()));
        }
        if let Some(bad) = years.iter().find(|y| !(y.caidi > T::zero())) {
            return Err(Error::Domain(format!(
                "CAIDI for {} must be positive, got {:?}",
                bad.label, bad.caidi
            )));
        }
        Ok(CaidiSeries { years })
    }

    pub fn from_pairs<S: Into<String>>(pairs: impl IntoIterator<Item = (S, T)>) -> Result<Self> {
        Self::new(
            pairs
                .into_iter()
                .map(|(label, caidi)| CaidiYear {
                    label: label.into(),
                    caidi,
                })
                .collect(),
        )
    }

    /// Reads a `year,caidi_hours` CSV, parsing the value column with `parse`.
    pub fn read_csv<R: Read>(reader: R, parse: impl Fn(&str) -> Result<T>) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers = rdr.headers()?.clone();
        if headers.len() != 2 || &headers[0] != "year" || &headers[1] != "caidi_hours" {
            return Err(Error::Parse(format!(
                "expected header `year,caidi_hours`, got `{}`",
                headers.iter().collect::<Vec<_>>().join(",")
            )));
        }
        let mut years = Vec::new();
        for record in rdr.records() {
            let record = record?;
            years.push(CaidiYear {
                label: record[0].to_string(),
                caidi: parse(&record[1])?,
            });
        }
        Self::new(years)
    }

    pub fn mean(&self) -> T {
        mean(self.years.iter().map(|y| y.caidi))
    }
}

fn mean<T: FieldScalar>(values: impl Iterator<Item = T>) -> T {
    let (sum, n) = values.fold((T::zero(), 0usize), |(s, n), v| (s + v, n + 1));
    sum / T::from_usize(n).expect("count representable")
}

fn clamp_nonnegative<T: FieldScalar>(v: T) -> T {
    if v < T::zero() {
        T::zero()
    } else {
        v
    }
}

/// Result of classifying years and matching moments.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CaidiFit<T> {
    pub model: SuperposedModel<T>,
    pub severe_years: Vec<String>,
    pub regular_years: Vec<String>,
    pub regular_mean: T,
    pub severe_mean: T,
}

/// Fits a superposed model: years with CAIDI above `severe_threshold` are
/// severe, each class's mean CAIDI minus `shift` gives its duration rate,
/// and `base_frequency` outages/year are split by the severe-year share.
pub fn fit_from_caidi<T: FieldScalar>(
    series: &CaidiSeries<T>,
    severe_threshold: T,
    base_frequency: T,
    shift: T,
) -> Result<CaidiFit<T>> {
    if !(severe_threshold > T::zero()) {
        return Err(Error::Domain("severe threshold must be > 0".into()));
    }
    if !(base_frequency > T::zero()) {
        return Err(Error::Domain("base frequency must be > 0".into()));
    }
    let (severe, regular): (Vec<_>, Vec<_>) =
        series.years.iter().partition(|y| y.caidi > severe_threshold);
    if severe.is_empty() {
        return Err(Error::DegenerateFit { empty_class: "severe" });
    }
    if regular.is_empty() {
        return Err(Error::DegenerateFit { empty_class: "regular" });
    }
    let regular_mean = mean(regular.iter().map(|y| y.caidi));
    let severe_mean = mean(severe.iter().map(|y| y.caidi));
    let n_severe = T::from_usize(severe.len()).expect("count representable");
    let n_total = T::from_usize(series.years.len()).expect("count representable");
    let lambda2 = base_frequency * n_severe / n_total;
    let model = SuperposedModel::new(
        base_frequency - lambda2,
        lambda2,
        clamp_nonnegative(regular_mean - shift),
        clamp_nonnegative(severe_mean - shift),
        shift,
    )?;
    Ok(CaidiFit {
        model,
        severe_years: severe.iter().map(|y| y.label.clone()).collect(),
        regular_years: regular.iter().map(|y| y.label.clone()).collect(),
        regular_mean,
        severe_mean,
    })
}

/// Single-process model matched to the overall mean CAIDI.
pub fn fit_single_from_caidi<T: FieldScalar>(
    series: &CaidiSeries<T>,
    base_frequency: T,
    shift: T,
) -> Result<SingleModel<T>> {
    SingleModel::new(base_frequency, clamp_nonnegative(series.mean() - shift), shift)
}
