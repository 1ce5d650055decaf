//! Monte Carlo simulation of the detection statistics.
//!
//! Trial `i` draws its noise from a ChaCha8 stream keyed by
//! `(master_seed, i)`, so results do not depend on how trials are scheduled
//! across worker threads.

use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::covariance::CovarianceSet;
use crate::detectors::DetectorSpec;
use crate::signalmodel::{sample_observation, Hypothesis, SignalGrid};
use crate::{Error, Result};

/// The RNG used for trial `trial` of a run seeded with `master_seed`.
pub fn trial_rng(master_seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(trial);
    rng
}

#[derive(Debug, Clone, Copy)]
pub struct TrialPlan<'a> {
    pub n_trials: usize,
    pub master_seed: u64,
    pub hypothesis: Hypothesis,
    pub detector: &'a DetectorSpec,
    pub covset: &'a CovarianceSet,
    /// Signal added under H1; ignored under H0.
    pub signal: Option<&'a SignalGrid>,
}

impl TrialPlan<'_> {
    fn validate(&self) -> Result<()> {
        if self.n_trials == 0 {
            return Err(Error::InvalidParameter("n_trials must be >= 1".into()));
        }
        if self.hypothesis == Hypothesis::H1 {
            let s = self
                .signal
                .ok_or_else(|| Error::InvalidParameter("H1 trials need a signal".into()))?;
            if !s.matches(self.covset.grid()) {
                return Err(Error::DimensionMismatch(
                    "signal grid does not match covariance grid".into(),
                ));
            }
        }
        Ok(())
    }

    /// Statistic of a single trial.
    pub fn trial(&self, index: u64) -> f64 {
        let mut rng = trial_rng(self.master_seed, index);
        let signal = match self.hypothesis {
            Hypothesis::H0 => None,
            Hypothesis::H1 => self.signal,
        };
        let v = sample_observation(signal, self.covset, &mut rng);
        self.detector.evaluate(&v)
    }
}

/// Run all trials of `plan` on `workers` threads (`0` uses rayon's default).
pub fn run_trials(plan: &TrialPlan<'_>, workers: usize) -> Result<EmpiricalDistribution> {
    plan.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::InvalidParameter(format!("cannot start worker pool: {e}")))?;
    let samples: Vec<f64> = pool.install(|| {
        (0..plan.n_trials)
            .into_par_iter()
            .with_min_len(64)
            .map(|i| plan.trial(i as u64))
            .collect()
    });
    EmpiricalDistribution::from_samples(samples)
}

/// Sorted samples of a statistic.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalDistribution {
    samples: Vec<f64>,
}

impl EmpiricalDistribution {
    pub fn from_samples(mut samples: Vec<f64>) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::InvalidParameter(
                "empirical distribution needs at least one sample".into(),
            ));
        }
        if let Some(bad) = samples.iter().find(|x| !x.is_finite()) {
            return Err(Error::InvalidParameter(format!("non-finite sample {bad}")));
        }
        samples.sort_by(f64::total_cmp);
        Ok(Self { samples })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn min(&self) -> f64 {
        self.samples[0]
    }

    pub fn max(&self) -> f64 {
        self.samples[self.samples.len() - 1]
    }

    /// Number of samples `<= x`.
    fn count_le(&self, x: f64) -> usize {
        self.samples.partition_point(|&s| s <= x)
    }

    /// Right-continuous ECDF.
    pub fn ecdf(&self, x: f64) -> f64 {
        self.count_le(x) as f64 / self.len() as f64
    }

    /// Fraction of samples strictly above `x`.
    pub fn exceedance(&self, x: f64) -> f64 {
        (self.len() - self.count_le(x)) as f64 / self.len() as f64
    }

    pub fn mean(&self) -> f64 {
        self.samples.iter().sum::<f64>() / self.len() as f64
    }

    /// Unbiased sample variance (0 for a single sample).
    pub fn variance(&self) -> f64 {
        let n = self.len();
        if n < 2 {
            return 0.0;
        }
        let m = self.mean();
        self.samples.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1) as f64
    }

    /// Inverse ECDF: smallest sample `x` with `ecdf(x) >= p`.
    pub fn quantile(&self, p: f64) -> f64 {
        let n = self.len();
        let idx = ((p.clamp(0.0, 1.0) * n as f64).ceil() as usize).clamp(1, n) - 1;
        self.samples[idx]
    }

    /// CSV with a single `statistic` column.
    pub fn write_csv(&self, mut out: impl Write) -> Result<()> {
        writeln!(out, "statistic")?;
        for x in &self.samples {
            writeln!(out, "{x}")?;
        }
        Ok(())
    }
}

/// Detection and false-alarm rates at one threshold with binomial standard
/// errors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateEstimate {
    pub pfa: f64,
    pub pd: f64,
    pub pfa_stderr: f64,
    pub pd_stderr: f64,
}

fn binomial_stderr(p: f64, n: usize) -> f64 {
    (p * (1.0 - p) / n as f64).sqrt()
}

pub fn estimate_pd_pfa(h0: &EmpiricalDistribution, h1: &EmpiricalDistribution, threshold: f64) -> RateEstimate {
    let pfa = h0.exceedance(threshold);
    let pd = h1.exceedance(threshold);
    RateEstimate {
        pfa,
        pd,
        pfa_stderr: binomial_stderr(pfa, h0.len()),
        pd_stderr: binomial_stderr(pd, h1.len()),
    }
}

/// Distinct sample values with the ECDF just before and at each one.
struct Steps {
    values: Vec<f64>,
    /// Samples strictly below `values[j]`.
    below: Vec<usize>,
    /// Samples `<= values[j]`.
    upto: Vec<usize>,
    n: f64,
}

impl Steps {
    fn new(emp: &EmpiricalDistribution) -> Self {
        let s = emp.samples();
        let mut values = Vec::new();
        let mut below = Vec::new();
        let mut upto = Vec::new();
        let mut i = 0;
        while i < s.len() {
            let mut j = i + 1;
            while j < s.len() && s[j] == s[i] {
                j += 1;
            }
            values.push(s[i]);
            below.push(i);
            upto.push(j);
            i = j;
        }
        Self {
            values,
            below,
            upto,
            n: s.len() as f64,
        }
    }
}

/// CDF and its left limit at a point.
#[derive(Clone, Copy)]
struct Probe {
    at: f64,
    left: f64,
}

fn probe(cdf: &impl Fn(f64) -> Result<f64>, x: f64) -> Result<Probe> {
    Ok(Probe {
        at: cdf(x)?,
        left: cdf(x.next_down())?,
    })
}

/// Two-sided Kolmogorov-Smirnov distance `sup_x |ECDF(x) - F(x)|`, exact for
/// any non-decreasing `cdf` (continuous or not).
///
/// Only the jumps of the ECDF matter: the supremum is
/// `max_j max(b_j/n - F(x_j), F(x_j-) - a_j/n)` over distinct samples `x_j`
/// with `a_j`, `b_j` samples below and up to `x_j`. Monotonicity of `F`
/// bounds both terms on a whole run of samples from its two ends, so runs
/// that cannot beat the running maximum are skipped without evaluating `F`.
pub fn ks_distance(emp: &EmpiricalDistribution, cdf: impl Fn(f64) -> Result<f64>) -> Result<f64> {
    let st = Steps::new(emp);
    let m = st.values.len();
    let term = |j: usize, p: Probe| (st.upto[j] as f64 / st.n - p.at).max(p.left - st.below[j] as f64 / st.n);

    // Coarse pass to get a good running maximum early.
    let coarse = 64.min(m);
    let mut known: Vec<(usize, Probe)> = Vec::with_capacity(coarse + 1);
    for c in 0..coarse {
        let j = if coarse == 1 { 0 } else { c * (m - 1) / (coarse - 1) };
        if known.last().is_some_and(|&(k, _)| k == j) {
            continue;
        }
        known.push((j, probe(&cdf, st.values[j])?));
    }
    let mut best = known.iter().map(|&(j, p)| term(j, p)).fold(0.0f64, f64::max);

    let mut stack: Vec<((usize, Probe), (usize, Probe))> = known.windows(2).map(|w| (w[0], w[1])).collect();
    while let Some(((i, pi), (j, pj))) = stack.pop() {
        if j <= i + 1 {
            continue;
        }
        let bound = (st.upto[j - 1] as f64 / st.n - pi.at).max(pj.left - st.below[i + 1] as f64 / st.n);
        if bound <= best {
            continue;
        }
        let mid = i + (j - i) / 2;
        let pm = probe(&cdf, st.values[mid])?;
        best = best.max(term(mid, pm));
        stack.push(((i, pi), (mid, pm)));
        stack.push(((mid, pm), (j, pj)));
    }
    Ok(best.max(0.0))
}

/// Same value as [`ks_distance`], evaluating `cdf` at every distinct sample.
pub fn ks_distance_exhaustive(emp: &EmpiricalDistribution, cdf: impl Fn(f64) -> Result<f64>) -> Result<f64> {
    let st = Steps::new(emp);
    let mut best = 0.0f64;
    for (j, &x) in st.values.iter().enumerate() {
        let p = probe(&cdf, x)?;
        best = best
            .max(st.upto[j] as f64 / st.n - p.at)
            .max(p.left - st.below[j] as f64 / st.n);
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;

    fn exp2_cdf(x: f64) -> Result<f64> {
        Ok(if x <= 0.0 { 0.0 } else { 1.0 - (-x / 2.0).exp() })
    }

    #[test]
    fn streams_are_distinct_and_reproducible() {
        let a: u64 = trial_rng(7, 0).random();
        let b: u64 = trial_rng(7, 1).random();
        let c: u64 = trial_rng(7, 0).random();
        assert_ne!(a, b);
        assert_eq!(a, c);
    }

    #[test]
    fn ecdf_and_quantile() {
        let e = EmpiricalDistribution::from_samples(vec![3.0, 1.0, 2.0, 2.0]).unwrap();
        assert_eq!(e.samples(), &[1.0, 2.0, 2.0, 3.0]);
        assert_eq!(e.ecdf(0.5), 0.0);
        assert_eq!(e.ecdf(2.0), 0.75);
        assert_eq!(e.ecdf(3.0), 1.0);
        assert_eq!(e.quantile(0.5), 2.0);
        assert_eq!(e.quantile(0.0), 1.0);
        assert_eq!(e.quantile(1.0), 3.0);
        assert_eq!(e.mean(), 2.0);
        assert!((e.variance() - 2.0 / 3.0).abs() < 1e-15);
        assert!(EmpiricalDistribution::from_samples(vec![]).is_err());
        assert!(EmpiricalDistribution::from_samples(vec![f64::NAN]).is_err());
    }

    #[test]
    fn rates_at_extreme_thresholds() {
        let h0 = EmpiricalDistribution::from_samples((0..100).map(f64::from).collect()).unwrap();
        let h1 = EmpiricalDistribution::from_samples((50..150).map(f64::from).collect()).unwrap();
        let lo = estimate_pd_pfa(&h0, &h1, -1.0);
        assert_eq!((lo.pfa, lo.pd), (1.0, 1.0));
        let hi = estimate_pd_pfa(&h0, &h1, 1e9);
        assert_eq!((hi.pfa, hi.pd), (0.0, 0.0));
        assert_eq!(hi.pd_stderr, 0.0);
        let mid = estimate_pd_pfa(&h0, &h1, h0.quantile(0.95));
        assert!((mid.pfa - 0.05).abs() <= mid.pfa_stderr + 1e-12);
    }

    #[test]
    fn ks_of_ecdf_against_itself_is_zero() {
        let e = EmpiricalDistribution::from_samples(vec![0.3, 1.0, 1.0, 2.5, 4.0]).unwrap();
        let f = |x: f64| Ok(e.ecdf(x));
        assert_eq!(ks_distance(&e, f).unwrap(), 0.0);
        assert_eq!(ks_distance_exhaustive(&e, f).unwrap(), 0.0);
    }

    #[test]
    fn ks_shifted_cdf_is_at_least_shift() {
        let mut rng = trial_rng(1, 0);
        let s: Vec<f64> = (0..2000).map(|_| -2.0 * (1.0 - rng.random::<f64>()).ln()).collect();
        let e = EmpiricalDistribution::from_samples(s).unwrap();
        let shifted = |x: f64| Ok((exp2_cdf(x)? + 0.1).min(1.0));
        assert!(ks_distance(&e, shifted).unwrap() >= 0.1);
    }

    #[test]
    fn ks_chi2_two_draws_within_dkw_band() {
        let mut rng = trial_rng(2024, 3);
        let n = 100_000;
        let s: Vec<f64> = (0..n).map(|_| -2.0 * (1.0 - rng.random::<f64>()).ln()).collect();
        let e = EmpiricalDistribution::from_samples(s).unwrap();
        let d = ks_distance(&e, exp2_cdf).unwrap();
        assert!(d < 1.36 / (n as f64).sqrt() * 1.5, "{d}");
        assert_eq!(d, ks_distance_exhaustive(&e, exp2_cdf).unwrap());
    }

    proptest! {
        #[test]
        fn pruned_ks_equals_exhaustive(
            raw in prop::collection::vec(0u8..40, 1..300),
            scale in 0.5f64..3.0,
        ) {
            let e = EmpiricalDistribution::from_samples(raw.iter().map(|&v| v as f64 * 0.25).collect()).unwrap();
            let f = |x: f64| exp2_cdf(x / scale);
            prop_assert_eq!(ks_distance(&e, f).unwrap(), ks_distance_exhaustive(&e, f).unwrap());
        }

        #[test]
        fn ecdf_is_monotone_in_unit_interval(raw in prop::collection::vec(-1e3f64..1e3, 1..100), a in -2e3f64..2e3, b in -2e3f64..2e3) {
            let e = EmpiricalDistribution::from_samples(raw).unwrap();
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            prop_assert!(e.ecdf(lo) <= e.ecdf(hi));
            prop_assert!((0.0..=1.0).contains(&e.ecdf(lo)));
        }
    }
}
