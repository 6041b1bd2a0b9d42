use gridplan::outage::{
    duration_pmf, duration_support_limit, sample_duration, sample_outage_count, sample_trace, OutageKind,
    OutageModel, SingleModel, SuperposedModel,
};
use gridplan::rng::{seeded, stream};
use proptest::prelude::*;
use statrs::distribution::{ChiSquared, ContinuousCDF};

fn fitted() -> OutageModel<f64> {
    SuperposedModel::new(1.0, 0.2, 0.636, 21.55, 1.0).unwrap().into()
}

/// Pearson statistic against Poisson(mean), tail bins pooled so every
/// expected count is at least 5. Returns (statistic, degrees of freedom).
fn poisson_chi_square(counts: &[u64], mean: f64) -> (f64, f64) {
    let n = counts.len() as f64;
    let max = *counts.iter().max().unwrap() as usize;
    let mut observed = vec![0f64; max + 2];
    for &c in counts {
        observed[c as usize] += 1.0;
    }
    let pmf = |k: usize| (-mean + k as f64 * mean.ln() - statrs::function::gamma::ln_gamma(k as f64 + 1.0)).exp();
    let mut bins = Vec::new();
    let (mut o_acc, mut e_acc) = (0.0, 0.0);
    let mut cdf = 0.0;
    for (k, o) in observed.iter().enumerate() {
        let p = pmf(k);
        cdf += p;
        o_acc += o;
        e_acc += p * n;
        if e_acc >= 5.0 && (1.0 - cdf) * n >= 5.0 {
            bins.push((o_acc, e_acc));
            o_acc = 0.0;
            e_acc = 0.0;
        }
    }
    // whatever remains, including the unbounded tail
    bins.push((o_acc, e_acc + (1.0 - cdf).max(0.0) * n));
    let stat = bins.iter().map(|(o, e)| (o - e) * (o - e) / e).sum();
    (stat, (bins.len() - 1) as f64)
}

#[test]
fn single_model_counts_are_poisson() {
    let model: OutageModel<f64> = SingleModel::new(1.2, 4.0, 1.0).unwrap().into();
    let mut rng = seeded(101);
    let counts: Vec<u64> = (0..50_000)
        .map(|_| sample_outage_count(&model, 2.0, &mut rng).unwrap())
        .collect();
    let (stat, df) = poisson_chi_square(&counts, 2.4);
    assert!(stat < ChiSquared::new(df).unwrap().inverse_cdf(0.99), "chi2 {stat} df {df}");
}

#[test]
fn superposed_counts_match_the_summed_rate() {
    let model: OutageModel<f64> = SuperposedModel::new(1.0, 0.2, 0.636, 21.55, 1.0).unwrap().into();
    let mut rng = seeded(102);
    let counts: Vec<u64> = (0..50_000)
        .map(|_| sample_outage_count(&model, 5.0, &mut rng).unwrap())
        .collect();
    let (stat, df) = poisson_chi_square(&counts, 6.0);
    assert!(stat < ChiSquared::new(df).unwrap().inverse_cdf(0.99), "chi2 {stat} df {df}");
}

/// Empirical durations against the exact pmf, total variation distance.
#[test]
fn sampled_durations_follow_the_pmf() {
    let model = fitted();
    let mut rng = seeded(103);
    let limit = duration_support_limit(&model, 1e-12) as usize;
    let mut hist = vec![0f64; limit + 1];
    let n = 200_000;
    let mut trace_events = 0;
    while trace_events < n {
        for e in sample_trace(&model, 50.0, &mut rng).unwrap() {
            let k = (e.duration - 1.0) as usize;
            hist[k.min(limit)] += 1.0;
            trace_events += 1;
        }
    }
    let tv: f64 = hist
        .iter()
        .enumerate()
        .map(|(k, c)| (c / trace_events as f64 - duration_pmf(&model, 1.0 + k as f64)).abs())
        .sum::<f64>()
        / 2.0;
    assert!(tv < 0.01, "total variation {tv}");
}

#[test]
fn severe_durations_have_the_severe_mean() {
    let model = fitted();
    let mut rng = seeded(104);
    let n = 50_000;
    let mean = (0..n)
        .map(|_| sample_duration(&model, OutageKind::Severe, &mut rng).unwrap())
        .sum::<f64>()
        / n as f64;
    // sd of Poisson(21.55) is 4.64; 5 standard errors
    assert!((mean - 22.55).abs() < 5.0 * 4.64 / (n as f64).sqrt(), "{mean}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    /// Raising a rate never removes events from a common-random-number trace.
    #[test]
    fn traces_grow_with_rates(seed in any::<u64>(), l1 in 0.0f64..3.0, l2 in 0.0f64..1.0, bump in 0.0f64..2.0) {
        let lo: OutageModel<f64> = SuperposedModel::new(l1, l2, 0.636, 21.55, 1.0).unwrap().into();
        let hi: OutageModel<f64> = SuperposedModel::new(l1 + bump, l2, 0.636, 21.55, 1.0).unwrap().into();
        let a = sample_trace(&lo, 5.0, &mut stream(seed, 0)).unwrap();
        let b = sample_trace(&hi, 5.0, &mut stream(seed, 0)).unwrap();
        prop_assert!(a.len() <= b.len());
        for e in &a {
            prop_assert!(b.contains(e));
        }
    }

    /// Raising kappa never shortens an outage under common random numbers.
    #[test]
    fn durations_grow_with_kappa(seed in any::<u64>(), k in 0.0f64..30.0, bump in 0.0f64..10.0) {
        let lo: OutageModel<f64> = SingleModel::new(2.0, k, 1.0).unwrap().into();
        let hi: OutageModel<f64> = SingleModel::new(2.0, k + bump, 1.0).unwrap().into();
        let a = sample_trace(&lo, 3.0, &mut stream(seed, 1)).unwrap();
        let b = sample_trace(&hi, 3.0, &mut stream(seed, 1)).unwrap();
        prop_assert_eq!(a.len(), b.len());
        let mut a_sorted: Vec<_> = a.iter().map(|e| (e.start, e.duration)).collect();
        let mut b_sorted: Vec<_> = b.iter().map(|e| (e.start, e.duration)).collect();
        a_sorted.sort_by(|x, y| x.partial_cmp(y).unwrap());
        b_sorted.sort_by(|x, y| x.partial_cmp(y).unwrap());
        for (x, y) in a_sorted.iter().zip(&b_sorted) {
            prop_assert_eq!(x.0, y.0);
            prop_assert!(x.1 <= y.1);
        }
    }

    /// Every pmf sums to one over its support.
    #[test]
    fn pmf_normalizes(l1 in 0.01f64..3.0, l2 in 0.0f64..1.0, k1 in 0.0f64..5.0, extra in 0.0f64..40.0) {
        let model: OutageModel<f64> = SuperposedModel::new(l1, l2, k1, k1 + extra, 1.0).unwrap().into();
        let limit = duration_support_limit(&model, 1e-13);
        let total: f64 = (0..=limit).map(|k| duration_pmf(&model, 1.0 + k as f64)).sum();
        prop_assert!((total - 1.0).abs() < 1e-12, "{}", total);
    }
}
