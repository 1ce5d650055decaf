//! ROC curves, `theta_k` robustness sweeps and analytic/empirical
//! distribution overlays.
//!
//! ROC curves and sweeps come from the exact laws in [`crate::analytic`]:
//! the threshold for a target false-alarm rate is the H0 upper quantile and
//! `pd` is the H1 survival function there. Grid points are evaluated with
//! rayon, so callers control parallelism by installing a thread pool.

use std::io::Write;

use rayon::prelude::*;

use crate::analytic::{detector_law, q_inverse, upper_pd_closed_form, Law};
use crate::covariance::CovarianceSet;
use crate::detectors::{DetectorKind, DetectorSpec};
use crate::montecarlo::{ks_distance, run_trials, EmpiricalDistribution, TrialPlan};
use crate::signalmodel::{
    calibrate_gain, make_channel, signal_with_gain, Channel, ChannelModel, Hypothesis, SignalGrid,
};
use crate::{Error, Result};

/// Upper-bound detection probability targeted by
/// [`PowerMode::UpperBoundSaturation`] at [`SATURATION_PFA`].
pub const SATURATION_PD: f64 = 1.0 - 1e-9;
pub const SATURATION_PFA: f64 = 1e-6;

/// `n` logarithmically spaced points from `lo` to `hi` inclusive.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..n)
        .map(|i| {
            if i == 0 {
                lo
            } else if i == n - 1 {
                hi
            } else {
                (a + (b - a) * i as f64 / (n - 1) as f64).exp()
            }
        })
        .collect()
}

/// 25 false-alarm rates from `1e-6` to `0.5`, log spaced.
pub fn default_pfa_grid() -> Vec<f64> {
    log_grid(1e-6, 0.5, 25)
}

fn check_probability_grid(grid: &[f64], what: &str) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::InvalidParameter(format!("{what} grid is empty")));
    }
    for (i, &p) in grid.iter().enumerate() {
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "{what} grid value {p} is outside (0, 1)"
            )));
        }
        if i > 0 && p <= grid[i - 1] {
            return Err(Error::InvalidParameter(format!(
                "{what} grid is not strictly increasing at index {i}"
            )));
        }
    }
    Ok(())
}

/// How the signal gain is chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PowerMode {
    /// Average received SNR across frequency, dB.
    SnrDb(f64),
    /// Smallest gain at which the known-signal upper bound reaches
    /// `pd >= 1 - 1e-9` at `pfa = 1e-6`.
    UpperBoundSaturation,
}

/// Gain at which the upper-bound detector saturates. Its detectability
/// `m_u / sqrt(v_u) = sqrt(m_u)` must reach `Q^{-1}(pfa) - Q^{-1}(pd)`, and
/// `m_u = g^2 T sum_k h_k^H R_k^{-1} h_k` does not depend on the phase
/// progressions.
pub fn saturating_gain(channel: &Channel, covset: &CovarianceSet) -> Result<f64> {
    let grid = covset.grid();
    if channel.len() != grid.freq_bins() {
        return Err(Error::DimensionMismatch("channel and covariance disagree on K".into()));
    }
    let per_unit: f64 = (0..grid.freq_bins())
        .map(|k| crate::linalg::sesquilinear(covset.inv(k), channel.vector(k), channel.vector(k)).re)
        .sum::<f64>()
        * grid.time_samples() as f64;
    if !(per_unit > 0.0) {
        return Err(Error::DegenerateSignal);
    }
    let root = q_inverse(SATURATION_PFA)? - q_inverse(SATURATION_PD)?;
    Ok(root / per_unit.sqrt())
}

/// Everything needed to synthesize the signal of a scenario, up to `theta_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalSetup {
    pub theta_k: f64,
    pub theta_t: f64,
    pub power: PowerMode,
    pub channel: ChannelModel,
}

impl SignalSetup {
    pub fn gain(&self, channel: &Channel, covset: &CovarianceSet) -> Result<f64> {
        match self.power {
            PowerMode::SnrDb(db) => calibrate_gain(channel, covset, db),
            PowerMode::UpperBoundSaturation => saturating_gain(channel, covset),
        }
    }

    pub fn synthesize(&self, covset: &CovarianceSet) -> Result<SignalGrid> {
        let channel = make_channel(covset.grid(), &self.channel)?;
        let gain = self.gain(&channel, covset)?;
        Ok(signal_with_gain(
            covset.grid(),
            &channel,
            gain,
            self.theta_k,
            self.theta_t,
        ))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RocPoint {
    pub pfa: f64,
    pub pd: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RocCurve {
    pub points: Vec<RocPoint>,
    pub detector: String,
    pub scenario: String,
}

/// Detection probability at a false-alarm rate, given both laws.
fn pd_at(h0: &Law, h1: &Law, pfa: f64) -> Result<f64> {
    if let (Law::Normal(g0), Law::Normal(g1)) = (h0, h1) {
        if g0.mean == 0.0 && g0.variance == g1.variance {
            return upper_pd_closed_form(pfa, g1);
        }
    }
    let threshold = h0.upper_quantile(pfa)?;
    h1.sf(threshold)
}

/// ROC of `spec` from its exact laws. A missing or all-zero `signal` gives
/// the chance line `pd = pfa`.
pub fn analytic_roc(
    spec: &DetectorSpec,
    covset: &CovarianceSet,
    signal: Option<&SignalGrid>,
    pfa_grid: &[f64],
    scenario: &str,
) -> Result<RocCurve> {
    check_probability_grid(pfa_grid, "pfa")?;
    let signal = signal.filter(|s| !s.is_zero());
    let points = match signal {
        None => pfa_grid.iter().map(|&pfa| RocPoint { pfa, pd: pfa }).collect(),
        Some(sig) => {
            let h0 = detector_law(spec, covset, Some(sig), Hypothesis::H0)?;
            let h1 = detector_law(spec, covset, Some(sig), Hypothesis::H1)?;
            pfa_grid
                .par_iter()
                .map(|&pfa| {
                    Ok(RocPoint {
                        pfa,
                        pd: pd_at(&h0, &h1, pfa)?,
                    })
                })
                .collect::<Result<Vec<_>>>()?
        }
    };
    Ok(RocCurve {
        points,
        detector: spec.kind().label(),
        scenario: scenario.to_string(),
    })
}

/// CSV `pfa,pd,detector,scenario` for several curves.
pub fn write_roc_csv(mut out: impl Write, curves: &[RocCurve]) -> Result<()> {
    writeln!(out, "pfa,pd,detector,scenario")?;
    for c in curves {
        for p in &c.points {
            writeln!(out, "{},{},{},{}", p.pfa, p.pd, c.detector, c.scenario)?;
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepCurve {
    pub detector: String,
    pub pd: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub theta_k: Vec<f64>,
    pub fixed_pfa: f64,
    pub curves: Vec<SweepCurve>,
}

impl SweepResult {
    /// CSV `theta_k,pd,detector`.
    pub fn write_csv(&self, mut out: impl Write) -> Result<()> {
        writeln!(out, "theta_k,pd,detector")?;
        for c in &self.curves {
            for (th, pd) in self.theta_k.iter().zip(&c.pd) {
                writeln!(out, "{th},{pd},{}", c.detector)?;
            }
        }
        Ok(())
    }
}

/// Detection probability at `fixed_pfa` as `theta_k` varies. The H0
/// threshold of each signal-independent detector is computed once.
pub fn theta_sweep(
    detectors: &[DetectorKind],
    covset: &CovarianceSet,
    setup: &SignalSetup,
    theta_grid: &[f64],
    fixed_pfa: f64,
) -> Result<SweepResult> {
    if theta_grid.is_empty() {
        return Err(Error::InvalidParameter("theta_k grid is empty".into()));
    }
    if !(fixed_pfa > 0.0 && fixed_pfa < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "fixed pfa {fixed_pfa} is outside (0, 1)"
        )));
    }
    let signals = theta_grid
        .iter()
        .map(|&theta_k| {
            SignalSetup {
                theta_k,
                ..setup.clone()
            }
            .synthesize(covset)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut curves = Vec::with_capacity(detectors.len());
    for &kind in detectors {
        let pd = if kind == DetectorKind::UpperBound {
            signals
                .par_iter()
                .map(|sig| {
                    let spec = DetectorSpec::prepare(kind, covset, Some(sig))?;
                    let h0 = detector_law(&spec, covset, Some(sig), Hypothesis::H0)?;
                    let h1 = detector_law(&spec, covset, Some(sig), Hypothesis::H1)?;
                    pd_at(&h0, &h1, fixed_pfa)
                })
                .collect::<Result<Vec<_>>>()?
        } else {
            let spec = DetectorSpec::prepare(kind, covset, None)?;
            let threshold = detector_law(&spec, covset, None, Hypothesis::H0)?.upper_quantile(fixed_pfa)?;
            signals
                .par_iter()
                .map(|sig| detector_law(&spec, covset, Some(sig), Hypothesis::H1)?.sf(threshold))
                .collect::<Result<Vec<_>>>()?
        };
        curves.push(SweepCurve {
            detector: kind.label(),
            pd,
        });
    }
    Ok(SweepResult {
        theta_k: theta_grid.to_vec(),
        fixed_pfa,
        curves,
    })
}

/// Analytic and empirical CDFs of one statistic on a shared grid.
#[derive(Debug, Clone)]
pub struct Overlay {
    pub detector: String,
    pub hypothesis: Hypothesis,
    pub x: Vec<f64>,
    pub analytic_cdf: Vec<f64>,
    pub empirical_cdf: Vec<f64>,
    pub ks: f64,
    pub empirical: EmpiricalDistribution,
}

impl Overlay {
    /// CSV `x,analytic_cdf,empirical_cdf`.
    pub fn write_csv(&self, mut out: impl Write) -> Result<()> {
        writeln!(out, "x,analytic_cdf,empirical_cdf")?;
        for ((x, a), e) in self.x.iter().zip(&self.analytic_cdf).zip(&self.empirical_cdf) {
            writeln!(out, "{x},{a},{e}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy)]
pub struct OverlayOptions {
    pub n_trials: usize,
    pub seed: u64,
    pub workers: usize,
    /// Number of x-grid points, at least 2.
    pub grid_points: usize,
}

/// Simulate `spec` under `hypothesis`, compare with its exact law, and
/// tabulate both CDFs from the smallest to the largest sample.
pub fn distribution_overlay(
    spec: &DetectorSpec,
    covset: &CovarianceSet,
    signal: Option<&SignalGrid>,
    hypothesis: Hypothesis,
    opts: &OverlayOptions,
) -> Result<Overlay> {
    if opts.grid_points < 2 {
        return Err(Error::InvalidParameter("overlay grid needs at least 2 points".into()));
    }
    let law = detector_law(spec, covset, signal, hypothesis)?;
    let plan = TrialPlan {
        n_trials: opts.n_trials,
        master_seed: opts.seed,
        hypothesis,
        detector: spec,
        covset,
        signal,
    };
    let empirical = run_trials(&plan, opts.workers)?;
    let ks = ks_distance(&empirical, |x| law.cdf(x))?;
    let (lo, hi) = (empirical.min(), empirical.max());
    let n = opts.grid_points;
    let x: Vec<f64> = (0..n)
        .map(|i| {
            if i == n - 1 {
                hi
            } else {
                lo + (hi - lo) * i as f64 / (n - 1) as f64
            }
        })
        .collect();
    let analytic_cdf = x.par_iter().map(|&xi| law.cdf(xi)).collect::<Result<Vec<_>>>()?;
    let empirical_cdf = x.iter().map(|&xi| empirical.ecdf(xi)).collect();
    Ok(Overlay {
        detector: spec.kind().label(),
        hypothesis,
        x,
        analytic_cdf,
        empirical_cdf,
        ks,
        empirical,
    })
}
