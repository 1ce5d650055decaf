//! Null and alternative laws of each statistic.
//!
//! Writing `v_{k,t} = alpha_{k,t} + R_k^{1/2} z_{k,t}` with standard complex
//! Gaussian `z` (unit-variance real and imaginary parts):
//!
//! - MA: `sum_i lambda_i chi2_{2T}(delta_i)`, where `lambda_i` are the
//!   eigenvalues of `B = R~ A R~` (`R~ = blockdiag(R_k^{1/2})`) and
//!   `delta_i = sum_t |(Phi^H x_t)_i|^2` with `x_t` the stacked
//!   `R_k^{-1/2} alpha_{k,t}`.
//! - Constant: `chi2_{2 N_R T}(sum_t ||q_t||^2)`,
//!   `q_t = S^{1/2} sum_k R_k^{-1} alpha_{k,t}`.
//! - Rapid: `chi2_{2 N_R K T}(sum_{k,t} alpha^H R_k^{-1} alpha)`.
//! - Upper bound: normal with mean `m_u = sum alpha^H R_k^{-1} alpha` under
//!   H1 (zero under H0) and variance `v_u = m_u` in both cases.

use num_complex::Complex64;

use super::gx2::{GaussianPart, Gx2Params, Gx2Term};
use super::normal::{q_function, q_inverse};
use crate::covariance::CovarianceSet;
use crate::detectors::{ConstantDetector, DetectorSpec, MaOperator};
use crate::linalg::{mat_vec_into, norm_sqr, sesquilinear, CMatrix, HermitianEigen};
use crate::signalmodel::{Hypothesis, SignalGrid};
use crate::{Error, Result};

/// Real normal law `N(mean, variance)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianParams {
    pub mean: f64,
    pub variance: f64,
}

impl GaussianParams {
    pub fn std_dev(&self) -> f64 {
        self.variance.sqrt()
    }
}

/// Upper-bound statistic under both hypotheses.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UpperLaws {
    pub h1: GaussianParams,
    pub h0: GaussianParams,
}

/// Distribution of a detection statistic.
#[derive(Debug, Clone, PartialEq)]
pub enum Law {
    Gx2(Gx2Params),
    Normal(GaussianParams),
}

impl Law {
    pub fn cdf(&self, x: f64) -> Result<f64> {
        match self {
            Law::Gx2(p) => p.cdf(x),
            Law::Normal(g) => Ok(q_function((g.mean - x) / g.std_dev())),
        }
    }

    /// `P(X > x)`.
    pub fn sf(&self, x: f64) -> Result<f64> {
        match self {
            Law::Gx2(p) => p.sf(x),
            Law::Normal(g) => Ok(q_function((x - g.mean) / g.std_dev())),
        }
    }

    pub fn quantile(&self, p: f64) -> Result<f64> {
        match self {
            Law::Gx2(params) => params.quantile(p),
            Law::Normal(g) => Ok(g.mean - g.std_dev() * q_inverse(p)?),
        }
    }

    /// Threshold exceeded with probability `tail`: `x` with `sf(x) = tail`.
    pub fn upper_quantile(&self, tail: f64) -> Result<f64> {
        match self {
            Law::Gx2(params) => {
                if !(tail > 0.0 && tail < 1.0) {
                    return Err(Error::Domain(format!("tail probability must be in (0, 1), got {tail}")));
                }
                params.quantile(1.0 - tail)
            }
            Law::Normal(g) => Ok(g.mean + g.std_dev() * q_inverse(tail)?),
        }
    }

    pub fn mean(&self) -> f64 {
        match self {
            Law::Gx2(p) => p.mean(),
            Law::Normal(g) => g.mean,
        }
    }

    pub fn variance(&self) -> f64 {
        match self {
            Law::Gx2(p) => p.variance(),
            Law::Normal(g) => g.variance,
        }
    }
}

fn check_signal(covset: &CovarianceSet, signal: Option<&SignalGrid>) -> Result<()> {
    if let Some(s) = signal {
        if !s.matches(covset.grid()) {
            return Err(Error::DimensionMismatch(format!(
                "signal is K={} T={} N_R={}, covariance grid is K={} T={} N_R={}",
                s.freq_bins(),
                s.time_samples(),
                s.antennas(),
                covset.grid().freq_bins(),
                covset.grid().time_samples(),
                covset.grid().antennas()
            )));
        }
    }
    Ok(())
}

/// Dense `R~ A R~`.
fn whitened_operator(op: &MaOperator, covset: &CovarianceSet) -> CMatrix {
    let n = op.antennas();
    let kk = op.freq_bins();
    let mut dense = CMatrix::zeros(kk * n, kk * n);
    for r in 0..kk {
        for s in 0..kk {
            if let Some(a) = op.block(r, s) {
                let b = covset.sqrt(r) * a * covset.sqrt(s);
                dense.view_mut((r * n, s * n), (n, n)).copy_from(&b);
            }
        }
    }
    // Symmetrize away rounding so the eigensolver sees an exactly Hermitian matrix.
    let adj = dense.adjoint();
    (dense + adj) * Complex64::new(0.5, 0.0)
}

pub fn ma_distribution(op: &MaOperator, covset: &CovarianceSet, signal: Option<&SignalGrid>) -> Result<Gx2Params> {
    let grid = covset.grid();
    if op.freq_bins() != grid.freq_bins() || op.antennas() != grid.antennas() {
        return Err(Error::DimensionMismatch(
            "MA operator and covariance disagree on K or N_R".into(),
        ));
    }
    check_signal(covset, signal)?;
    let eig = HermitianEigen::new(&whitened_operator(op, covset));
    let dim = eig.values.len();
    let n = grid.antennas();
    let mut delta = vec![0.0; dim];
    if let Some(sig) = signal {
        let mut x = vec![Complex64::new(0.0, 0.0); dim];
        for t in 0..grid.time_samples() {
            for k in 0..grid.freq_bins() {
                mat_vec_into(covset.inv_sqrt(k), sig.at(k, t), &mut x[k * n..(k + 1) * n]);
            }
            for (i, d) in delta.iter_mut().enumerate() {
                let mu: Complex64 = eig.vectors.column(i).iter().zip(&x).map(|(p, xi)| p.conj() * xi).sum();
                *d += mu.norm_sqr();
            }
        }
    }
    let dof = 2 * grid.time_samples() as u32;
    let terms = eig
        .values
        .iter()
        .zip(&delta)
        .map(|(&weight, &noncentrality)| Gx2Term {
            weight,
            dof,
            noncentrality,
        })
        .collect();
    Gx2Params::new(terms, GaussianPart::default())
}

pub fn constant_distribution(
    det: &ConstantDetector,
    covset: &CovarianceSet,
    signal: Option<&SignalGrid>,
) -> Result<Gx2Params> {
    let grid = covset.grid();
    if det.s().nrows() != grid.antennas() {
        return Err(Error::DimensionMismatch(
            "constant detector and covariance disagree on N_R".into(),
        ));
    }
    check_signal(covset, signal)?;
    let n = grid.antennas();
    let mut noncentrality = 0.0;
    if let Some(sig) = signal {
        let s_half = HermitianEigen::new(det.s()).map(|v| v.max(0.0).sqrt());
        let mut sum = vec![Complex64::new(0.0, 0.0); n];
        let mut tmp = vec![Complex64::new(0.0, 0.0); n];
        let mut q = vec![Complex64::new(0.0, 0.0); n];
        for t in 0..grid.time_samples() {
            sum.iter_mut().for_each(|z| *z = Complex64::new(0.0, 0.0));
            for k in 0..grid.freq_bins() {
                mat_vec_into(covset.inv(k), sig.at(k, t), &mut tmp);
                sum.iter_mut().zip(&tmp).for_each(|(a, b)| *a += b);
            }
            mat_vec_into(&s_half, &sum, &mut q);
            noncentrality += norm_sqr(&q);
        }
    }
    Gx2Params::single(1.0, 2 * (n * grid.time_samples()) as u32, noncentrality)
}

/// `sum_{k,t} alpha_{k,t}^H R_k^{-1} alpha_{k,t}`.
fn whitened_energy(covset: &CovarianceSet, signal: &SignalGrid) -> f64 {
    let grid = covset.grid();
    let mut acc = 0.0;
    for t in 0..grid.time_samples() {
        for k in 0..grid.freq_bins() {
            let a = signal.at(k, t);
            acc += sesquilinear(covset.inv(k), a, a).re;
        }
    }
    acc
}

pub fn rapid_distribution(covset: &CovarianceSet, signal: Option<&SignalGrid>) -> Result<Gx2Params> {
    check_signal(covset, signal)?;
    let grid = covset.grid();
    let noncentrality = signal.map_or(0.0, |s| whitened_energy(covset, s));
    Gx2Params::single(
        1.0,
        2 * grid.stacked_len() as u32 * grid.time_samples() as u32,
        noncentrality,
    )
}

pub fn upper_distribution(covset: &CovarianceSet, signal: &SignalGrid) -> Result<UpperLaws> {
    check_signal(covset, Some(signal))?;
    let m_u = whitened_energy(covset, signal);
    if !(m_u > 0.0) {
        return Err(Error::DegenerateSignal);
    }
    Ok(UpperLaws {
        h1: GaussianParams {
            mean: m_u,
            variance: m_u,
        },
        h0: GaussianParams {
            mean: 0.0,
            variance: m_u,
        },
    })
}

/// `P_D = Q(Q^{-1}(pfa) - m_u / sqrt(v_u))`.
pub fn upper_pd_closed_form(pfa: f64, g: &GaussianParams) -> Result<f64> {
    if !(g.variance > 0.0) {
        return Err(Error::Domain(format!("variance must be positive, got {}", g.variance)));
    }
    Ok(q_function(q_inverse(pfa)? - g.mean / g.std_dev()))
}

/// Law of `spec`'s statistic under `hypothesis`. `signal` is the H1 signal;
/// it is ignored under H0 except by the upper-bound detector, whose null
/// variance depends on it.
pub fn detector_law(
    spec: &DetectorSpec,
    covset: &CovarianceSet,
    signal: Option<&SignalGrid>,
    hypothesis: Hypothesis,
) -> Result<Law> {
    let alt = match hypothesis {
        Hypothesis::H0 => None,
        Hypothesis::H1 => signal,
    };
    Ok(match spec {
        DetectorSpec::MovingAverage(op) => Law::Gx2(ma_distribution(op, covset, alt)?),
        DetectorSpec::Constant(det) => Law::Gx2(constant_distribution(det, covset, alt)?),
        DetectorSpec::Rapid { .. } => Law::Gx2(rapid_distribution(covset, alt)?),
        DetectorSpec::UpperBound { .. } => {
            let sig = signal.ok_or_else(|| Error::InvalidParameter("the upper-bound law needs the signal".into()))?;
            let laws = upper_distribution(covset, sig)?;
            Law::Normal(match hypothesis {
                Hypothesis::H0 => laws.h0,
                Hypothesis::H1 => laws.h1,
            })
        }
    })
}
