//! Signal synthesis and sampling of received data.
//!
//! The echo model is `alpha_{k,t} = h_k g exp(i (k-1) theta_k) exp(i (t-1) theta_t)`
//! with a time-invariant channel `h_k` and a real gain `g` calibrated to a
//! target average SNR across frequency.

use std::f64::consts::PI;
use std::path::Path;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::covariance::{parse_block_text, CovarianceSet};
use crate::grid::{SamplingGrid, SPEED_OF_LIGHT};
use crate::linalg::{mat_vec_into, norm_sqr};
use crate::{Error, Result};

/// `H0`: noise only. `H1`: signal plus noise.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Hypothesis {
    H0,
    H1,
}

impl std::fmt::Display for Hypothesis {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Hypothesis::H0 => "H0",
            Hypothesis::H1 => "H1",
        })
    }
}

/// Complex vectors indexed by frequency bin, time sample and antenna.
///
/// Storage is time-major, then frequency, then antenna, so that
/// [`SignalGrid::snapshot`] returns the frequency-stacked vector
/// `[v_{1,t}; ...; v_{K,t}]` and [`SignalGrid::as_slice`] is the fully stacked
/// vector used by the rapid-regime detector. Indices are zero-based.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalGrid {
    freq_bins: usize,
    time_samples: usize,
    antennas: usize,
    data: Vec<Complex64>,
}

impl SignalGrid {
    pub fn zeros(grid: &SamplingGrid) -> Self {
        Self {
            freq_bins: grid.freq_bins(),
            time_samples: grid.time_samples(),
            antennas: grid.antennas(),
            data: vec![Complex64::new(0.0, 0.0); grid.freq_bins() * grid.time_samples() * grid.antennas()],
        }
    }

    /// Build from `f(k, t, j)`.
    pub fn from_fn(grid: &SamplingGrid, mut f: impl FnMut(usize, usize, usize) -> Complex64) -> Self {
        let mut out = Self::zeros(grid);
        for t in 0..out.time_samples {
            for k in 0..out.freq_bins {
                for (j, z) in out.at_mut(k, t).iter_mut().enumerate() {
                    *z = f(k, t, j);
                }
            }
        }
        out
    }

    pub fn freq_bins(&self) -> usize {
        self.freq_bins
    }

    pub fn time_samples(&self) -> usize {
        self.time_samples
    }

    pub fn antennas(&self) -> usize {
        self.antennas
    }

    pub fn matches(&self, grid: &SamplingGrid) -> bool {
        self.freq_bins == grid.freq_bins()
            && self.time_samples == grid.time_samples()
            && self.antennas == grid.antennas()
    }

    pub(crate) fn check(&self, grid: &SamplingGrid, what: &str) -> Result<()> {
        if self.matches(grid) {
            Ok(())
        } else {
            Err(Error::DimensionMismatch(format!(
                "{what} is K={} T={} N_R={}, grid is K={} T={} N_R={}",
                self.freq_bins,
                self.time_samples,
                self.antennas,
                grid.freq_bins(),
                grid.time_samples(),
                grid.antennas()
            )))
        }
    }

    fn offset(&self, k: usize, t: usize) -> usize {
        (t * self.freq_bins + k) * self.antennas
    }

    pub fn at(&self, k: usize, t: usize) -> &[Complex64] {
        let o = self.offset(k, t);
        &self.data[o..o + self.antennas]
    }

    pub fn at_mut(&mut self, k: usize, t: usize) -> &mut [Complex64] {
        let o = self.offset(k, t);
        let n = self.antennas;
        &mut self.data[o..o + n]
    }

    /// Frequency-stacked snapshot at time `t`, length `K * N_R`.
    pub fn snapshot(&self, t: usize) -> &[Complex64] {
        let len = self.freq_bins * self.antennas;
        &self.data[t * len..(t + 1) * len]
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    pub fn scaled(&self, a: Complex64) -> Self {
        let mut out = self.clone();
        out.data.iter_mut().for_each(|z| *z *= a);
        out
    }

    /// Entrywise `self + other`; both grids must have equal dimensions.
    pub fn plus(&self, other: &SignalGrid) -> Self {
        assert_eq!(self.data.len(), other.data.len(), "signal grids differ in size");
        let mut out = self.clone();
        out.data.iter_mut().zip(&other.data).for_each(|(a, b)| *a += b);
        out
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|z| z.re == 0.0 && z.im == 0.0)
    }
}

/// Where the per-frequency channel vectors come from.
#[derive(Debug, Clone, PartialEq)]
pub enum ChannelModel {
    /// Plane-wave steering vector, `h_k[j] = exp(-i 2 pi f_k j delta cos(phi) / c)`.
    /// `direction_cos = 1` is end-fire.
    Steering { direction_cos: f64 },
    /// Externally supplied vectors, one per frequency bin.
    Tabulated(Vec<Vec<Complex64>>),
}

impl ChannelModel {
    pub fn end_fire() -> Self {
        ChannelModel::Steering { direction_cos: 1.0 }
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    /// Parse the channel text format: header `K N_R`, then `K` lines of
    /// `N_R` entries `re+imj`.
    pub fn parse(text: &str) -> Result<Self> {
        let (_, freq_bins, antennas, rows) = parse_block_text(text)?;
        if rows.len() != freq_bins {
            return Err(Error::DimensionMismatch(format!(
                "header announces {freq_bins} channel rows, file has {}",
                rows.len()
            )));
        }
        let mut vectors = Vec::with_capacity(rows.len());
        for (line, row) in rows {
            if row.len() != antennas {
                return Err(Error::DimensionMismatch(format!(
                    "line {line}: expected {antennas} entries, found {}",
                    row.len()
                )));
            }
            vectors.push(row);
        }
        Ok(ChannelModel::Tabulated(vectors))
    }
}

/// Per-frequency channel vectors `h_k` (time-invariant).
#[derive(Debug, Clone, PartialEq)]
pub struct Channel {
    vectors: Vec<Vec<Complex64>>,
}

impl Channel {
    pub fn vector(&self, k: usize) -> &[Complex64] {
        &self.vectors[k]
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }
}

pub fn make_channel(grid: &SamplingGrid, model: &ChannelModel) -> Result<Channel> {
    let vectors = match model {
        ChannelModel::Steering { direction_cos } => {
            if !direction_cos.is_finite() || direction_cos.abs() > 1.0 {
                return Err(Error::InvalidParameter(format!(
                    "direction cosine {direction_cos} must lie in [-1, 1]"
                )));
            }
            grid.freqs()
                .iter()
                .map(|&f| {
                    let step = -2.0 * PI * f * grid.spacing() * direction_cos / SPEED_OF_LIGHT;
                    (0..grid.antennas())
                        .map(|j| Complex64::from_polar(1.0, step * j as f64))
                        .collect()
                })
                .collect()
        }
        ChannelModel::Tabulated(vectors) => {
            if vectors.len() != grid.freq_bins() || vectors.iter().any(|v| v.len() != grid.antennas()) {
                return Err(Error::DimensionMismatch(format!(
                    "channel table does not match K={} N_R={}",
                    grid.freq_bins(),
                    grid.antennas()
                )));
            }
            if vectors.iter().any(|v| norm_sqr(v) == 0.0) {
                return Err(Error::InvalidParameter("channel vector is identically zero".into()));
            }
            vectors.clone()
        }
    };
    Ok(Channel { vectors })
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(lin: f64) -> f64 {
    10.0 * lin.log10()
}

/// Average SNR across frequency of a unit-gain channel,
/// `(1/K) sum_k ||h_k||^2 / tr(R_k)` (linear).
fn unit_gain_snr(channel: &Channel, covset: &CovarianceSet) -> f64 {
    let k = covset.grid().freq_bins();
    (0..k)
        .map(|i| norm_sqr(channel.vector(i)) / covset.trace(i))
        .sum::<f64>()
        / k as f64
}

/// Real gain `g` such that `(1/K) sum_k g^2 ||h_k||^2 / tr(R_k)` equals the
/// target SNR.
pub fn calibrate_gain(channel: &Channel, covset: &CovarianceSet, target_snr_db: f64) -> Result<f64> {
    if !target_snr_db.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "target SNR {target_snr_db} dB is not finite"
        )));
    }
    if channel.len() != covset.grid().freq_bins() {
        return Err(Error::DimensionMismatch("channel and covariance disagree on K".into()));
    }
    Ok((db_to_linear(target_snr_db) / unit_gain_snr(channel, covset)).sqrt())
}

/// Average SNR across frequency of the first time sample of `signal`, in dB.
pub fn measured_snr_db(signal: &SignalGrid, covset: &CovarianceSet) -> f64 {
    let k = signal.freq_bins();
    let lin = (0..k).map(|i| norm_sqr(signal.at(i, 0)) / covset.trace(i)).sum::<f64>() / k as f64;
    linear_to_db(lin)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SignalModelParams {
    /// Phase advance per frequency bin, radians.
    pub theta_k: f64,
    /// Phase advance per time sample, radians.
    pub theta_t: f64,
    /// Average received SNR across frequency, dB.
    pub target_snr_db: f64,
    pub channel: ChannelModel,
}

/// `alpha_{k,t} = g h_k exp(i k theta_k) exp(i t theta_t)` with zero-based `k, t`.
pub fn signal_with_gain(grid: &SamplingGrid, channel: &Channel, gain: f64, theta_k: f64, theta_t: f64) -> SignalGrid {
    SignalGrid::from_fn(grid, |k, t, j| {
        channel.vector(k)[j] * Complex64::from_polar(gain, k as f64 * theta_k + t as f64 * theta_t)
    })
}

pub fn synthesize_signal(params: &SignalModelParams, covset: &CovarianceSet) -> Result<SignalGrid> {
    let grid = covset.grid();
    let channel = make_channel(grid, &params.channel)?;
    let gain = calibrate_gain(&channel, covset, params.target_snr_db)?;
    Ok(signal_with_gain(grid, &channel, gain, params.theta_k, params.theta_t))
}

/// Draw one received grid: `v_{k,t} = alpha_{k,t} + R_k^{1/2} z_{k,t}` where
/// `z` has i.i.d. entries with unit-variance real and imaginary parts.
/// `signal = None` samples the null hypothesis.
pub fn sample_observation<R: Rng + ?Sized>(
    signal: Option<&SignalGrid>,
    covset: &CovarianceSet,
    rng: &mut R,
) -> SignalGrid {
    let grid = covset.grid();
    let mut out = match signal {
        Some(s) => {
            assert!(s.matches(grid), "signal grid does not match covariance grid");
            s.clone()
        }
        None => SignalGrid::zeros(grid),
    };
    let n = grid.antennas();
    let mut z = vec![Complex64::new(0.0, 0.0); n];
    let mut colored = vec![Complex64::new(0.0, 0.0); n];
    for t in 0..grid.time_samples() {
        for k in 0..grid.freq_bins() {
            for e in z.iter_mut() {
                let re: f64 = rng.sample(StandardNormal);
                let im: f64 = rng.sample(StandardNormal);
                *e = Complex64::new(re, im);
            }
            mat_vec_into(covset.sqrt(k), &z, &mut colored);
            out.at_mut(k, t).iter_mut().zip(&colored).for_each(|(v, c)| *v += c);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::covariance::CouplingPreset;
    use crate::linalg::sesquilinear;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn single_antenna_channel_is_unity() {
        let g = SamplingGrid::uniform(4, 1, 1, 20e9, 30e9, 0.005).unwrap();
        let ch = make_channel(&g, &ChannelModel::end_fire()).unwrap();
        for k in 0..4 {
            assert_eq!(ch.vector(k), &[c(1.0, 0.0)]);
        }
    }

    #[test]
    fn end_fire_at_half_wavelength_alternates_sign() {
        let delta = 0.005;
        let f = SPEED_OF_LIGHT / (2.0 * delta);
        let g = SamplingGrid::new(1, 5, vec![f], delta).unwrap();
        let ch = make_channel(&g, &ChannelModel::end_fire()).unwrap();
        for (j, h) in ch.vector(0).iter().enumerate() {
            let expected = if j % 2 == 0 { 1.0 } else { -1.0 };
            assert!((h - c(expected, 0.0)).norm() < 1e-12);
        }
    }

    #[test]
    fn steering_entries_are_unit_modulus() {
        let g = SamplingGrid::uniform(7, 1, 6, 28e9, 30e9, 0.005).unwrap();
        for cosphi in [1.0, 0.3, -0.7, 0.0] {
            let ch = make_channel(&g, &ChannelModel::Steering { direction_cos: cosphi }).unwrap();
            for k in 0..7 {
                assert!(ch.vector(k).iter().all(|h| (h.norm() - 1.0).abs() < 1e-14));
            }
        }
    }

    #[test]
    fn channel_file_parses_and_checks_dimensions() {
        let model = ChannelModel::parse("2 2\n1+0j 0-1j\n1+0j -1+0j\n").unwrap();
        let g = SamplingGrid::uniform(2, 1, 2, 1e9, 2e9, 0.0).unwrap();
        let ch = make_channel(&g, &model).unwrap();
        assert_eq!(ch.vector(0)[1], c(0.0, -1.0));
        let g3 = SamplingGrid::uniform(3, 1, 2, 1e9, 2e9, 0.0).unwrap();
        assert!(matches!(make_channel(&g3, &model), Err(Error::DimensionMismatch(_))));
        assert!(matches!(
            ChannelModel::parse("2 2\n1+0j 0-1j\n"),
            Err(Error::DimensionMismatch(_))
        ));
        assert!(matches!(
            ChannelModel::parse("2 2\n1+0j q\n1 1\n"),
            Err(Error::Format { .. })
        ));
    }

    #[test]
    fn unity_calibration() {
        let g = SamplingGrid::new(1, 1, vec![1e9], 0.0).unwrap();
        let cov = CovarianceSet::white(g.clone(), 1.0).unwrap();
        let ch = make_channel(&g, &ChannelModel::end_fire()).unwrap();
        assert!((calibrate_gain(&ch, &cov, 0.0).unwrap() - 1.0).abs() < 1e-15);

        let g2 = SamplingGrid::new(1, 2, vec![1e9], 0.0).unwrap();
        let cov2 = CovarianceSet::white(g2.clone(), 1.0).unwrap();
        let ch2 = make_channel(&g2, &ChannelModel::Tabulated(vec![vec![c(1.0, 0.0), c(0.0, 1.0)]])).unwrap();
        assert!((calibrate_gain(&ch2, &cov2, 0.0).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn three_db_doubles_power() {
        let g = SamplingGrid::uniform(5, 2, 4, 20e9, 30e9, 0.005).unwrap();
        let cov = CovarianceSet::synthetic(g.clone(), &CouplingPreset::tight()).unwrap();
        let ch = make_channel(&g, &ChannelModel::end_fire()).unwrap();
        let g0 = calibrate_gain(&ch, &cov, 1.4).unwrap();
        let g1 = calibrate_gain(&ch, &cov, 1.4 + 10.0 * 2f64.log10()).unwrap();
        assert!((g1 * g1 / (g0 * g0) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn calibration_inverts() {
        let g = SamplingGrid::uniform(5, 3, 4, 20e9, 30e9, 0.005).unwrap();
        let cov = CovarianceSet::synthetic(g, &CouplingPreset::tight()).unwrap();
        for snr in [-10.0, 0.0, 1.4, 3.7] {
            let params = SignalModelParams {
                theta_k: 0.2,
                theta_t: 0.2,
                target_snr_db: snr,
                channel: ChannelModel::end_fire(),
            };
            let s = synthesize_signal(&params, &cov).unwrap();
            assert!((measured_snr_db(&s, &cov) - snr).abs() < 1e-9);
        }
    }

    #[test]
    fn zero_rates_repeat_across_time_and_origin_is_gain_times_channel() {
        let g = SamplingGrid::uniform(4, 3, 3, 20e9, 30e9, 0.005).unwrap();
        let cov = CovarianceSet::synthetic(g.clone(), &CouplingPreset::weak()).unwrap();
        let ch = make_channel(&g, &ChannelModel::end_fire()).unwrap();
        let gain = calibrate_gain(&ch, &cov, 0.0).unwrap();
        let flat = synthesize_signal(
            &SignalModelParams {
                theta_k: 0.0,
                theta_t: 0.0,
                target_snr_db: 0.0,
                channel: ChannelModel::end_fire(),
            },
            &cov,
        )
        .unwrap();
        for k in 0..4 {
            for t in 0..3 {
                assert_eq!(flat.at(k, t), flat.at(k, 0));
            }
            for (a, h) in flat.at(k, 0).iter().zip(ch.vector(k)) {
                assert!((a - h * gain).norm() < 1e-14);
            }
        }
        let turning = synthesize_signal(
            &SignalModelParams {
                theta_k: 0.7,
                theta_t: -1.3,
                target_snr_db: 0.0,
                channel: ChannelModel::end_fire(),
            },
            &cov,
        )
        .unwrap();
        assert_eq!(turning.at(0, 0), flat.at(0, 0));
    }

    #[test]
    fn norms_and_whitened_energy_ignore_phase_rates() {
        let g = SamplingGrid::uniform(5, 4, 3, 20e9, 30e9, 0.005).unwrap();
        let cov = CovarianceSet::synthetic(g, &CouplingPreset::tight()).unwrap();
        let make = |tk, tt| {
            synthesize_signal(
                &SignalModelParams {
                    theta_k: tk,
                    theta_t: tt,
                    target_snr_db: 2.0,
                    channel: ChannelModel::end_fire(),
                },
                &cov,
            )
            .unwrap()
        };
        let a = make(0.0, 0.0);
        let b = make(0.9, -0.4);
        for k in 0..5 {
            for t in 0..4 {
                assert!((norm_sqr(a.at(k, t)) - norm_sqr(b.at(k, t))).abs() < 1e-12);
                let qa = sesquilinear(cov.inv(k), a.at(k, t), a.at(k, t)).re;
                let qb = sesquilinear(cov.inv(k), b.at(k, t), b.at(k, t)).re;
                assert!((qa - qb).abs() < 1e-12 * qa.abs().max(1.0));
            }
        }
    }

    #[test]
    fn noise_has_zero_mean_and_doubled_covariance() {
        let g = SamplingGrid::uniform(2, 1, 2, 20e9, 21e9, 0.005).unwrap();
        let cov = CovarianceSet::synthetic(g, &CouplingPreset::tight()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let m = 100_000;
        let mut mean = [c(0.0, 0.0); 2];
        let mut second = [[c(0.0, 0.0); 2]; 2];
        let mut cross = c(0.0, 0.0);
        for _ in 0..m {
            let v = sample_observation(None, &cov, &mut rng);
            let x = v.at(0, 0);
            for a in 0..2 {
                mean[a] += x[a];
                for b in 0..2 {
                    second[a][b] += x[a] * x[b].conj();
                }
            }
            cross += x[0] * v.at(1, 0)[0].conj();
        }
        let mf = m as f64;
        // Real and imaginary means each have standard deviation sqrt(R_jj / m).
        for (a, m) in mean.iter().enumerate() {
            let sd = (cov.matrix(0)[(a, a)].re / mf).sqrt();
            assert!((m / mf).re.abs() < 4.0 * sd);
            assert!((m / mf).im.abs() < 4.0 * sd);
        }
        let r = cov.matrix(0);
        let scale = r.iter().map(|z| z.norm()).fold(0.0, f64::max);
        for a in 0..2 {
            for b in 0..2 {
                let err = (second[a][b] / mf - r[(a, b)] * 2.0).norm();
                assert!(err < 5.0 * (2.0 / mf).sqrt() * scale, "entry ({a},{b}) error {err}");
            }
        }
        // Normalised cross-correlation between distinct bins.
        let p0 = 2.0 * r[(0, 0)].re;
        let p1 = 2.0 * cov.matrix(1)[(0, 0)].re;
        assert!((cross / mf).norm() / (p0 * p1).sqrt() < 5.0 / mf.sqrt());
    }

    #[test]
    fn white_single_antenna_power_is_two() {
        let g = SamplingGrid::new(1, 1, vec![1e9], 0.0).unwrap();
        let cov = CovarianceSet::white(g, 1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let m = 100_000;
        let p: f64 = (0..m)
            .map(|_| sample_observation(None, &cov, &mut rng).at(0, 0)[0].norm_sqr())
            .sum::<f64>()
            / m as f64;
        // |v|^2 ~ chi^2_2 with variance 4.
        assert!((p - 2.0).abs() < 4.0 * (4.0 / m as f64).sqrt());
    }

    #[test]
    fn fixed_seed_is_bit_identical() {
        let g = SamplingGrid::uniform(3, 2, 3, 20e9, 30e9, 0.005).unwrap();
        let cov = CovarianceSet::synthetic(g, &CouplingPreset::tight()).unwrap();
        let a = sample_observation(None, &cov, &mut ChaCha8Rng::seed_from_u64(99));
        let b = sample_observation(None, &cov, &mut ChaCha8Rng::seed_from_u64(99));
        assert_eq!(a, b);
    }
}
