use std::io::Read;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub const HOURS_IN_YEAR: usize = 8760;

/// Hourly demand per facility (kW, one series per facility class) and
/// aggregate PV output (kW), over one calendar year.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HourlyProfiles<T> {
    pub demand: Vec<Vec<T>>,
    pub pv: Vec<T>,
}

impl<T: Scalar> HourlyProfiles<T> {
    pub fn validate(&self) -> Result<()> {
        let series = self.demand.iter().chain(std::iter::once(&self.pv));
        for (i, s) in series.enumerate() {
            if s.len() != HOURS_IN_YEAR {
                return Err(Error::Config(format!(
                    "profile {i} has {} hours, expected {HOURS_IN_YEAR}",
                    s.len()
                )));
            }
            if let Some(h) = s.iter().position(|v| !(*v >= T::zero()) || !v.is_finite()) {
                return Err(Error::Config(format!("profile {i} has an invalid value at hour {h}")));
            }
        }
        Ok(())
    }
}

/// Scales `shape` so its maximum equals `peak`. An all-zero shape stays zero.
pub fn scale_to_peak<T: Scalar>(shape: &[T], peak: T) -> Vec<T> {
    let max = shape.iter().copied().fold(T::zero(), T::max);
    if max <= T::zero() {
        return vec![T::zero(); shape.len()];
    }
    shape.iter().map(|&v| v / max * peak).collect()
}

/// Reads an `hour,value_kw` CSV with exactly one row per hour of the year,
/// hours numbered `0..8760` in order.
pub fn read_profile_csv<T: Scalar, R: Read>(reader: R) -> Result<Vec<T>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    if headers.len() != 2 || &headers[0] != "hour" || &headers[1] != "value_kw" {
        return Err(Error::Parse("expected profile header `hour,value_kw`".into()));
    }
    let mut values = Vec::with_capacity(HOURS_IN_YEAR);
    for (i, record) in rdr.records().enumerate() {
        let record = record?;
        let hour: usize = record[0]
            .parse()
            .map_err(|_| Error::Parse(format!("bad hour {:?}", &record[0])))?;
        if hour != i {
            return Err(Error::Parse(format!("profile row {i} carries hour {hour}")));
        }
        let v: T = record[1]
            .parse()
            .map_err(|_| Error::Parse(format!("bad value {:?} at hour {hour}", &record[1])))?;
        if !(v >= T::zero()) {
            return Err(Error::Parse(format!("negative value at hour {hour}")));
        }
        values.push(v);
    }
    if values.len() != HOURS_IN_YEAR {
        return Err(Error::Parse(format!(
            "profile has {} rows, expected {HOURS_IN_YEAR}",
            values.len()
        )));
    }
    Ok(values)
}
