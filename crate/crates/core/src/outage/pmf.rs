//! Exact duration laws.

use super::OutageModel;
use crate::scalar::Scalar;

/// Poisson probability mass at `k` with the given mean, computed in log space.
pub fn poisson_pmf<T: Scalar>(k: u64, mean: T) -> T {
    if mean == T::zero() {
        return if k == 0 { T::one() } else { T::zero() };
    }
    let log_factorial: T = (2..=k).map(|i| T::of_u64(i).ln()).sum();
    (T::of_u64(k) * mean.ln() - mean - log_factorial).exp()
}

/// Mixture weights and duration rates, one entry per component.
fn mixture<T: Scalar>(model: &OutageModel<T>) -> Vec<(T, T)> {
    match model {
        OutageModel::Single(m) => vec![(T::one(), m.kappa)],
        OutageModel::Superposed(m) => {
            let total = m.total_rate();
            if total > T::zero() {
                vec![(m.lambda1 / total, m.kappa1), (m.lambda2 / total, m.kappa2)]
            } else {
                // no outages at all; fall back to the regular duration law
                vec![(T::one(), m.kappa1)]
            }
        }
    }
}

/// Offset `t - shift` as a support index, or `None` off the support.
fn support_index<T: Scalar>(model: &OutageModel<T>, t: T) -> Option<u64> {
    let k = t - model.shift();
    if !(k >= T::zero()) || k.fract() != T::zero() {
        return None;
    }
    k.to_u64()
}

/// Probability that an outage lasts exactly `t` hours.
///
/// For the superposed model this is the rate-weighted mixture of the
/// regular and severe shifted-Poisson laws. Zero below the shift and
/// between support points.
pub fn duration_pmf<T: Scalar>(model: &OutageModel<T>, t: T) -> T {
    match support_index(model, t) {
        Some(k) => mixture(model)
            .into_iter()
            .map(|(w, kappa)| w * poisson_pmf(k, kappa))
            .sum(),
        None => T::zero(),
    }
}

/// `P(T <= t)`.
pub fn duration_cdf<T: Scalar>(model: &OutageModel<T>, t: T) -> T {
    let k = t - model.shift();
    if k < T::zero() {
        return T::zero();
    }
    let top = k.floor().to_u64().unwrap_or(u64::MAX);
    let weights = mixture(model);
    let mut acc = T::zero();
    for j in 0..=top {
        let p: T = weights.iter().map(|&(w, kappa)| w * poisson_pmf(j, kappa)).sum();
        acc = acc + p;
        if acc >= T::one() {
            return T::one();
        }
    }
    acc
}

/// `P(T > t)`.
pub fn duration_tail<T: Scalar>(model: &OutageModel<T>, t: T) -> T {
    T::one() - duration_cdf(model, t)
}

pub fn duration_mean<T: Scalar>(model: &OutageModel<T>) -> T {
    model.shift()
        + mixture(model)
            .into_iter()
            .map(|(w, kappa)| w * kappa)
            .sum::<T>()
}

/// Smallest support offset `k` with `P(T <= shift + k) >= 1 - tol`.
pub fn duration_support_limit<T: Scalar>(model: &OutageModel<T>, tol: T) -> u64 {
    let weights = mixture(model);
    let target = T::one() - tol;
    let mut acc = T::zero();
    let mut k = 0u64;
    loop {
        acc = acc + weights.iter().map(|&(w, kappa)| w * poisson_pmf(k, kappa)).sum();
        let max_kappa = weights.iter().map(|&(_, kappa)| kappa).fold(T::zero(), T::max);
        if acc >= target || (T::of_u64(k) > max_kappa * T::of(10.0) + T::of(1000.0)) {
            return k;
        }
        k += 1;
    }
}
