//! Test statistics computed from a received [`SignalGrid`].
//!
//! Four detectors are provided: the moving-average (MA) GLRT for signals that
//! vary slowly across frequency, the constant-regime GLRT, the rapid-regime
//! extended energy detector, and the known-signal upper bound. Detectors only
//! produce statistics; thresholds come from [`crate::analytic`].

use std::fmt;

use num_complex::Complex64;

use crate::covariance::CovarianceSet;
use crate::linalg::{dot_conj, mat_vec_into, sesquilinear, CMatrix, HermitianEigen};
use crate::signalmodel::SignalGrid;
use crate::{Error, Result};

/// Uniform moving-average weights `w[k][l]`, `l = -L..=L`, with zero weight
/// wherever the window would leave the band. Frequency indices are zero-based.
#[derive(Debug, Clone, PartialEq)]
pub struct MaWeights {
    freq_bins: usize,
    half_width: usize,
    table: Vec<f64>,
}

impl MaWeights {
    /// Window half-width `L` must be even and the window `2L + 1` may not
    /// exceed the `K` frequency bins.
    pub fn new(freq_bins: usize, half_width: usize) -> Result<Self> {
        if !half_width.is_multiple_of(2) {
            return Err(Error::InvalidWindow {
                half_width,
                freq_bins,
                reason: "half-width must be even",
            });
        }
        if 2 * half_width + 1 > freq_bins {
            return Err(Error::InvalidWindow {
                half_width,
                freq_bins,
                reason: "window 2L+1 exceeds the number of frequency bins",
            });
        }
        let (kk, l) = (freq_bins as i64, half_width as i64);
        let width = 2 * half_width + 1;
        let mut table = vec![0.0; freq_bins * width];
        for k1 in 1..=kk {
            let w = if k1 <= l {
                1.0 / (k1 + l) as f64
            } else if k1 > kk - l {
                1.0 / (kk - k1 + 1 + l) as f64
            } else {
                1.0 / (2 * l + 1) as f64
            };
            for ell in -l..=l {
                let src = k1 - ell;
                if (1..=kk).contains(&src) {
                    table[(k1 - 1) as usize * width + (ell + l) as usize] = w;
                }
            }
        }
        Ok(Self {
            freq_bins,
            half_width,
            table,
        })
    }

    pub fn freq_bins(&self) -> usize {
        self.freq_bins
    }

    pub fn half_width(&self) -> usize {
        self.half_width
    }

    /// `w[k][ell]`; zero outside the window or when `k - ell` leaves the band.
    pub fn weight(&self, k: usize, ell: i64) -> f64 {
        let l = self.half_width as i64;
        if ell.abs() > l || k >= self.freq_bins {
            return 0.0;
        }
        self.table[k * (2 * self.half_width + 1) + (ell + l) as usize]
    }

    pub fn row_sum(&self, k: usize) -> f64 {
        let w = 2 * self.half_width + 1;
        self.table[k * w..(k + 1) * w].iter().sum()
    }
}

/// The Hermitian `K N_R x K N_R` matrix `A` of the MA quadratic form, stored
/// as its non-zero `N_R x N_R` blocks `A_rs`, `|r - s| <= 2L`.
#[derive(Debug, Clone)]
pub struct MaOperator {
    freq_bins: usize,
    antennas: usize,
    band: usize,
    blocks: Vec<Option<CMatrix>>,
}

impl MaOperator {
    /// `A_rs = w[r][r-s] R_r^{-1} + w[s][s-r] R_s^{-1} - sum_k w[k][k-r] w[k][k-s] R_k^{-1}`.
    pub fn build(weights: &MaWeights, covset: &CovarianceSet) -> Result<Self> {
        let kk = covset.grid().freq_bins();
        if weights.freq_bins() != kk {
            return Err(Error::DimensionMismatch(format!(
                "weights are for K={}, covariance has K={kk}",
                weights.freq_bins()
            )));
        }
        let n = covset.grid().antennas();
        let l = weights.half_width() as i64;
        let band = 2 * weights.half_width();
        let stride = 2 * band + 1;
        let mut blocks = vec![None; kk * stride];
        for r in 0..kk {
            let lo = r.saturating_sub(band);
            let hi = (r + band).min(kk - 1);
            for s in lo..=hi {
                let (ri, si) = (r as i64, s as i64);
                let mut a = CMatrix::zeros(n, n);
                let w_rs = weights.weight(r, ri - si);
                if w_rs != 0.0 {
                    a += covset.inv(r) * Complex64::new(w_rs, 0.0);
                }
                let w_sr = weights.weight(s, si - ri);
                if w_sr != 0.0 {
                    a += covset.inv(s) * Complex64::new(w_sr, 0.0);
                }
                let k_lo = (ri.max(si) - l).max(0);
                let k_hi = (ri.min(si) + l).min(kk as i64 - 1);
                for k in k_lo..=k_hi {
                    let c = weights.weight(k as usize, k - ri) * weights.weight(k as usize, k - si);
                    if c != 0.0 {
                        a -= covset.inv(k as usize) * Complex64::new(c, 0.0);
                    }
                }
                blocks[r * stride + (s + band - r)] = Some(a);
            }
        }
        Ok(Self {
            freq_bins: kk,
            antennas: n,
            band,
            blocks,
        })
    }

    pub fn freq_bins(&self) -> usize {
        self.freq_bins
    }

    pub fn antennas(&self) -> usize {
        self.antennas
    }

    /// Block `A_rs`, or `None` where it is identically zero.
    pub fn block(&self, r: usize, s: usize) -> Option<&CMatrix> {
        if r >= self.freq_bins || s >= self.freq_bins || r.abs_diff(s) > self.band {
            return None;
        }
        self.blocks[r * (2 * self.band + 1) + (s + self.band - r)].as_ref()
    }

    /// Dense `K N_R x K N_R` assembly.
    pub fn to_dense(&self) -> CMatrix {
        let n = self.antennas;
        let mut dense = CMatrix::zeros(self.freq_bins * n, self.freq_bins * n);
        for r in 0..self.freq_bins {
            for s in 0..self.freq_bins {
                if let Some(b) = self.block(r, s) {
                    dense.view_mut((r * n, s * n), (n, n)).copy_from(b);
                }
            }
        }
        dense
    }

    /// `max |A_rs - A_sr^H|` over all stored blocks.
    pub fn hermitian_deviation(&self) -> f64 {
        let mut worst = 0.0f64;
        for r in 0..self.freq_bins {
            for s in r..self.freq_bins {
                if let (Some(a), Some(b)) = (self.block(r, s), self.block(s, r)) {
                    let d = (a - b.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max);
                    worst = worst.max(d);
                }
            }
        }
        worst
    }

    /// `x^H A x` for one frequency-stacked snapshot, in complex arithmetic.
    pub fn quadratic_form(&self, x: &[Complex64]) -> Complex64 {
        let n = self.antennas;
        let mut acc = Complex64::new(0.0, 0.0);
        for r in 0..self.freq_bins {
            let xr = &x[r * n..(r + 1) * n];
            let lo = r.saturating_sub(self.band);
            let hi = (r + self.band).min(self.freq_bins - 1);
            for s in lo..=hi {
                if let Some(b) = self.block(r, s) {
                    acc += sesquilinear(b, xr, &x[s * n..(s + 1) * n]);
                }
            }
        }
        acc
    }
}

/// MA statistic with its imaginary residue, `sum_t x_t^H A x_t`.
pub fn ma_statistic_complex(v: &SignalGrid, op: &MaOperator) -> Complex64 {
    (0..v.time_samples()).map(|t| op.quadratic_form(v.snapshot(t))).sum()
}

pub fn stat_ma(v: &SignalGrid, op: &MaOperator) -> f64 {
    ma_statistic_complex(v, op).re
}

/// Precomputation for the constant-regime detector.
#[derive(Debug, Clone)]
pub struct ConstantDetector {
    inv: Vec<CMatrix>,
    /// `S = (sum_k R_k^{-1})^{-1}`.
    s: CMatrix,
}

impl ConstantDetector {
    pub fn new(covset: &CovarianceSet) -> Self {
        let kk = covset.grid().freq_bins();
        let inv: Vec<CMatrix> = (0..kk).map(|k| covset.inv(k).clone()).collect();
        let sum = inv.iter().skip(1).fold(inv[0].clone(), |acc, m| acc + m);
        let s = HermitianEigen::new(&sum).map(|v| 1.0 / v);
        Self { inv, s }
    }

    pub fn s(&self) -> &CMatrix {
        &self.s
    }

    /// `y_t = sum_k R_k^{-1} v_{k,t}`.
    pub fn whitened_sum(&self, v: &SignalGrid, t: usize) -> Vec<Complex64> {
        let n = v.antennas();
        let mut y = vec![Complex64::new(0.0, 0.0); n];
        let mut tmp = vec![Complex64::new(0.0, 0.0); n];
        for (k, inv) in self.inv.iter().enumerate() {
            mat_vec_into(inv, v.at(k, t), &mut tmp);
            y.iter_mut().zip(&tmp).for_each(|(a, b)| *a += b);
        }
        y
    }
}

/// `sum_t y_t^H S y_t`.
pub fn stat_constant(v: &SignalGrid, det: &ConstantDetector) -> f64 {
    (0..v.time_samples())
        .map(|t| {
            let y = det.whitened_sum(v, t);
            sesquilinear(&det.s, &y, &y).re
        })
        .sum()
}

/// Extended energy detector `sum_{k,t} v_{k,t}^H R_k^{-1} v_{k,t}`.
pub fn stat_rapid(v: &SignalGrid, covset: &CovarianceSet) -> f64 {
    let mut acc = 0.0;
    for t in 0..v.time_samples() {
        for k in 0..v.freq_bins() {
            let x = v.at(k, t);
            acc += sesquilinear(covset.inv(k), x, x).re;
        }
    }
    acc
}

/// Known-signal statistic `Re sum_{k,t} alpha_{k,t}^H R_k^{-1} v_{k,t}`.
pub fn stat_upper(v: &SignalGrid, covset: &CovarianceSet, known: &SignalGrid) -> f64 {
    let mut acc = 0.0;
    for t in 0..v.time_samples() {
        for k in 0..v.freq_bins() {
            acc += sesquilinear(covset.inv(k), known.at(k, t), v.at(k, t)).re;
        }
    }
    acc
}

/// Which statistic to compute; the configuration-level description of a
/// detector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DetectorKind {
    MovingAverage { half_width: usize },
    Constant,
    Rapid,
    UpperBound,
}

impl DetectorKind {
    pub fn label(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for DetectorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DetectorKind::MovingAverage { half_width } => write!(f, "ma-L{half_width}"),
            DetectorKind::Constant => f.write_str("constant"),
            DetectorKind::Rapid => f.write_str("rapid"),
            DetectorKind::UpperBound => f.write_str("upper-bound"),
        }
    }
}

/// A detector with its precomputation, ready to evaluate received grids.
#[derive(Debug, Clone)]
pub enum DetectorSpec {
    MovingAverage(MaOperator),
    Constant(ConstantDetector),
    Rapid {
        inv: Vec<CMatrix>,
    },
    /// Holds `R_k^{-1} alpha_{k,t}` for the known signal.
    UpperBound {
        whitened: SignalGrid,
    },
}

impl DetectorSpec {
    /// `known_signal` is required for [`DetectorKind::UpperBound`] and ignored
    /// otherwise.
    pub fn prepare(kind: DetectorKind, covset: &CovarianceSet, known_signal: Option<&SignalGrid>) -> Result<Self> {
        let grid = covset.grid();
        Ok(match kind {
            DetectorKind::MovingAverage { half_width } => {
                let weights = MaWeights::new(grid.freq_bins(), half_width)?;
                DetectorSpec::MovingAverage(MaOperator::build(&weights, covset)?)
            }
            DetectorKind::Constant => DetectorSpec::Constant(ConstantDetector::new(covset)),
            DetectorKind::Rapid => DetectorSpec::Rapid {
                inv: (0..grid.freq_bins()).map(|k| covset.inv(k).clone()).collect(),
            },
            DetectorKind::UpperBound => {
                let known = known_signal
                    .ok_or_else(|| Error::InvalidParameter("the upper-bound detector needs the known signal".into()))?;
                known.check(grid, "known signal")?;
                let mut whitened = known.clone();
                for t in 0..grid.time_samples() {
                    for k in 0..grid.freq_bins() {
                        mat_vec_into(covset.inv(k), known.at(k, t), whitened.at_mut(k, t));
                    }
                }
                DetectorSpec::UpperBound { whitened }
            }
        })
    }

    pub fn kind(&self) -> DetectorKind {
        match self {
            DetectorSpec::MovingAverage(op) => {
                // band = 2L
                DetectorKind::MovingAverage {
                    half_width: op.band / 2,
                }
            }
            DetectorSpec::Constant(_) => DetectorKind::Constant,
            DetectorSpec::Rapid { .. } => DetectorKind::Rapid,
            DetectorSpec::UpperBound { .. } => DetectorKind::UpperBound,
        }
    }

    pub fn evaluate(&self, v: &SignalGrid) -> f64 {
        match self {
            DetectorSpec::MovingAverage(op) => stat_ma(v, op),
            DetectorSpec::Constant(det) => stat_constant(v, det),
            DetectorSpec::Rapid { inv } => {
                let mut acc = 0.0;
                for t in 0..v.time_samples() {
                    for (k, m) in inv.iter().enumerate() {
                        let x = v.at(k, t);
                        acc += sesquilinear(m, x, x).re;
                    }
                }
                acc
            }
            DetectorSpec::UpperBound { whitened } => dot_conj(whitened.as_slice(), v.as_slice()).re,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::covariance::CouplingPreset;
    use crate::grid::SamplingGrid;
    use crate::linalg::CVector;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_grid(grid: &SamplingGrid, rng: &mut impl Rng) -> SignalGrid {
        SignalGrid::from_fn(grid, |_, _, _| {
            Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
        })
    }

    fn random_covset(grid: SamplingGrid, rng: &mut impl Rng) -> CovarianceSet {
        let n = grid.antennas();
        let mats = (0..grid.freq_bins())
            .map(|_| {
                let b = CMatrix::from_fn(n, n, |_, _| {
                    Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
                });
                &b * b.adjoint() + CMatrix::identity(n, n) * Complex64::new(0.2, 0.0)
            })
            .collect();
        CovarianceSet::from_matrices(grid, mats).unwrap()
    }

    #[test]
    fn interior_and_edge_weights() {
        let w = MaWeights::new(10, 2).unwrap();
        for ell in -2..=2 {
            assert_eq!(w.weight(4, ell), 1.0 / 5.0);
        }
        // k = 1 (one-based): support l in {-2, -1, 0}
        for ell in -2..=0 {
            assert_eq!(w.weight(0, ell), 1.0 / 3.0);
        }
        assert_eq!(w.weight(0, 1), 0.0);
        assert_eq!(w.weight(0, 2), 0.0);
        assert!((w.row_sum(0) - 1.0).abs() < 1e-15);
        // k = K: support l in {0, 1, 2}
        for ell in 0..=2 {
            assert_eq!(w.weight(9, ell), 1.0 / 3.0);
        }
        assert_eq!(w.weight(9, -1), 0.0);
        assert_eq!(w.weight(4, 3), 0.0);
    }

    #[test]
    fn window_validation() {
        assert!(matches!(MaWeights::new(10, 1), Err(Error::InvalidWindow { .. })));
        assert!(matches!(MaWeights::new(4, 2), Err(Error::InvalidWindow { .. })));
        assert!(MaWeights::new(1, 0).is_ok());
        assert!(MaWeights::new(5, 2).is_ok());
    }

    #[test]
    fn zero_half_width_operator_is_block_inverse() {
        let g = SamplingGrid::uniform(4, 2, 3, 20e9, 30e9, 0.005).unwrap();
        let cov = CovarianceSet::synthetic(g, &CouplingPreset::tight()).unwrap();
        let op = MaOperator::build(&MaWeights::new(4, 0).unwrap(), &cov).unwrap();
        for r in 0..4 {
            for s in 0..4 {
                match op.block(r, s) {
                    Some(b) if r == s => assert!((b - cov.inv(r)).iter().all(|z| z.norm() < 1e-14)),
                    Some(_) => panic!("off-diagonal block stored for L = 0"),
                    None => assert_ne!(r, s),
                }
            }
        }
    }

    /// Independent evaluation of every `A_rs` by looping over all `(k, l, l')`.
    fn brute_force_operator(w: &MaWeights, cov: &CovarianceSet) -> CMatrix {
        let kk = w.freq_bins();
        let n = cov.grid().antennas();
        let l = w.half_width() as i64;
        let mut dense = CMatrix::zeros(kk * n, kk * n);
        // Expand the detector definition term by term in the stacked basis:
        // sum_k sum_l v_k^H R_k^-1 v_{k-l} w_kl
        //   + sum_k (sum_l w_kl v_{k-l})^H R_k^-1 v_k
        //   - sum_k (sum_l w_kl v_{k-l})^H R_k^-1 (sum_l' w_kl' v_{k-l'})
        for k in 0..kk as i64 {
            let rinv = cov.inv(k as usize);
            for ell in -l..=l {
                let src = k - ell;
                if src < 0 || src >= kk as i64 {
                    continue;
                }
                let wk = w.weight(k as usize, ell);
                for a in 0..n {
                    for b in 0..n {
                        dense[(k as usize * n + a, src as usize * n + b)] += rinv[(a, b)] * wk;
                        dense[(src as usize * n + a, k as usize * n + b)] += rinv[(a, b)] * wk;
                    }
                }
                for ell2 in -l..=l {
                    let src2 = k - ell2;
                    if src2 < 0 || src2 >= kk as i64 {
                        continue;
                    }
                    let c = wk * w.weight(k as usize, ell2);
                    for a in 0..n {
                        for b in 0..n {
                            dense[(src as usize * n + a, src2 as usize * n + b)] -= rinv[(a, b)] * c;
                        }
                    }
                }
            }
        }
        dense
    }

    #[test]
    fn operator_matches_brute_force_scalar() {
        let g = SamplingGrid::uniform(5, 1, 1, 1e9, 2e9, 0.0).unwrap();
        let cov = CovarianceSet::white(g, 1.0).unwrap();
        let w = MaWeights::new(5, 2).unwrap();
        let op = MaOperator::build(&w, &cov).unwrap();
        let diff = (op.to_dense() - brute_force_operator(&w, &cov))
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max);
        assert!(diff < 1e-14, "max diff {diff}");
    }

    #[test]
    fn operator_matches_brute_force_correlated() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let g = SamplingGrid::uniform(11, 1, 3, 1e9, 2e9, 0.0).unwrap();
        let cov = random_covset(g, &mut rng);
        for l in [0, 2, 4] {
            let w = MaWeights::new(11, l).unwrap();
            let op = MaOperator::build(&w, &cov).unwrap();
            let dense = op.to_dense();
            let oracle = brute_force_operator(&w, &cov);
            let scale = oracle.iter().map(|z| z.norm()).fold(0.0, f64::max);
            let diff = (dense - oracle).iter().map(|z| z.norm()).fold(0.0, f64::max);
            assert!(diff < 1e-13 * scale, "L={l}: max diff {diff}");
            assert!(op.hermitian_deviation() < 1e-10);
        }
    }

    #[test]
    fn zero_input_gives_zero() {
        let g = SamplingGrid::uniform(5, 3, 2, 20e9, 30e9, 0.005).unwrap();
        let cov = CovarianceSet::synthetic(g.clone(), &CouplingPreset::tight()).unwrap();
        let zero = SignalGrid::zeros(&g);
        let op = MaOperator::build(&MaWeights::new(5, 2).unwrap(), &cov).unwrap();
        assert_eq!(stat_ma(&zero, &op), 0.0);
        assert_eq!(stat_constant(&zero, &ConstantDetector::new(&cov)), 0.0);
        assert_eq!(stat_rapid(&zero, &cov), 0.0);
        let known = random_grid(&g, &mut ChaCha8Rng::seed_from_u64(1));
        assert_eq!(stat_upper(&zero, &cov, &known), 0.0);
    }

    #[test]
    fn zero_half_width_white_is_energy() {
        let g = SamplingGrid::uniform(4, 3, 2, 1e9, 2e9, 0.0).unwrap();
        let cov = CovarianceSet::white(g.clone(), 1.0).unwrap();
        let v = random_grid(&g, &mut ChaCha8Rng::seed_from_u64(2));
        let op = MaOperator::build(&MaWeights::new(4, 0).unwrap(), &cov).unwrap();
        let energy: f64 = v.as_slice().iter().map(|z| z.norm_sqr()).sum();
        assert!((stat_ma(&v, &op) - energy).abs() < 1e-12 * energy);
        assert!((stat_rapid(&v, &cov) - energy).abs() < 1e-12 * energy);
    }

    #[test]
    fn blockwise_ma_matches_dense_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let g = SamplingGrid::uniform(9, 3, 3, 1e9, 2e9, 0.0).unwrap();
        let cov = random_covset(g.clone(), &mut rng);
        let op = MaOperator::build(&MaWeights::new(9, 2).unwrap(), &cov).unwrap();
        let dense = op.to_dense();
        let v = random_grid(&g, &mut rng);
        let mut oracle = Complex64::new(0.0, 0.0);
        for t in 0..3 {
            let x = CVector::from_column_slice(v.snapshot(t));
            oracle += (x.adjoint() * &dense * &x)[(0, 0)];
        }
        let fast = ma_statistic_complex(&v, &op);
        assert!((fast - oracle).norm() < 1e-12 * oracle.norm());
        assert!(fast.im.abs() < 1e-9 * fast.re.abs().max(1.0));
    }

    #[test]
    fn constant_matches_dense_m_u_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let g = SamplingGrid::uniform(4, 3, 2, 1e9, 2e9, 0.0).unwrap();
        let cov = random_covset(g.clone(), &mut rng);
        let v = random_grid(&g, &mut rng);
        let n = 2;
        let tt = 3;
        // M = blockdiag(sum R^-1, ...), u = [sum_k R_k^-1 v_{k,t}]_t
        let mut sum = CMatrix::zeros(n, n);
        for k in 0..4 {
            sum += cov.inv(k);
        }
        let mut m = CMatrix::zeros(n * tt, n * tt);
        let mut u = CVector::zeros(n * tt);
        for t in 0..tt {
            m.view_mut((t * n, t * n), (n, n)).copy_from(&sum);
            for k in 0..4 {
                let vk = CVector::from_column_slice(v.at(k, t));
                let y = cov.inv(k) * vk;
                for a in 0..n {
                    u[t * n + a] += y[a];
                }
            }
        }
        let minv = m.clone().try_inverse().unwrap();
        let oracle = (u.adjoint() * minv * &u)[(0, 0)].re;
        let det = ConstantDetector::new(&cov);
        let fast = stat_constant(&v, &det);
        assert!((fast - oracle).abs() < 1e-12 * oracle.abs());
        assert!(fast >= 0.0);
    }

    #[test]
    fn single_bin_constant_is_whitened_energy() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let g = SamplingGrid::uniform(1, 4, 3, 1e9, 1e9, 0.0).unwrap();
        let cov = random_covset(g.clone(), &mut rng);
        let v = random_grid(&g, &mut rng);
        let c = stat_constant(&v, &ConstantDetector::new(&cov));
        let r = stat_rapid(&v, &cov);
        assert!((c - r).abs() < 1e-12 * r);
    }

    #[test]
    fn rapid_ignores_per_sample_phase() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let g = SamplingGrid::uniform(4, 3, 3, 20e9, 30e9, 0.005).unwrap();
        let cov = CovarianceSet::synthetic(g.clone(), &CouplingPreset::tight()).unwrap();
        let v = random_grid(&g, &mut rng);
        let phases: Vec<f64> = (0..12).map(|_| rng.random::<f64>() * 6.3).collect();
        let rotated = SignalGrid::from_fn(&g, |k, t, j| {
            v.at(k, t)[j] * Complex64::from_polar(1.0, phases[t * 4 + k])
        });
        let a = stat_rapid(&v, &cov);
        let b = stat_rapid(&rotated, &cov);
        assert!((a - b).abs() < 1e-12 * a);
    }

    #[test]
    fn upper_bound_noiseless_and_linear() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let g = SamplingGrid::uniform(3, 2, 3, 20e9, 30e9, 0.005).unwrap();
        let cov = random_covset(g.clone(), &mut rng);
        let alpha = random_grid(&g, &mut rng);
        let mut m_u = 0.0;
        for t in 0..2 {
            for k in 0..3 {
                m_u += sesquilinear(cov.inv(k), alpha.at(k, t), alpha.at(k, t)).re;
            }
        }
        assert!(m_u > 0.0);
        assert!((stat_upper(&alpha, &cov, &alpha) - m_u).abs() < 1e-12 * m_u);
        let v1 = random_grid(&g, &mut rng);
        let v2 = random_grid(&g, &mut rng);
        let (a, b) = (1.7, -0.3);
        let combo = v1
            .scaled(Complex64::new(a, 0.0))
            .plus(&v2.scaled(Complex64::new(b, 0.0)));
        let lhs = stat_upper(&combo, &cov, &alpha);
        let rhs = a * stat_upper(&v1, &cov, &alpha) + b * stat_upper(&v2, &cov, &alpha);
        assert!((lhs - rhs).abs() < 1e-12 * lhs.abs().max(1.0));
    }

    #[test]
    fn prepared_specs_agree_with_free_functions() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let g = SamplingGrid::uniform(5, 3, 2, 20e9, 30e9, 0.005).unwrap();
        let cov = CovarianceSet::synthetic(g.clone(), &CouplingPreset::tight()).unwrap();
        let alpha = random_grid(&g, &mut rng);
        let v = random_grid(&g, &mut rng);
        let ma = DetectorSpec::prepare(DetectorKind::MovingAverage { half_width: 2 }, &cov, None).unwrap();
        let op = MaOperator::build(&MaWeights::new(5, 2).unwrap(), &cov).unwrap();
        assert_eq!(ma.evaluate(&v), stat_ma(&v, &op));
        assert_eq!(ma.kind(), DetectorKind::MovingAverage { half_width: 2 });
        let rapid = DetectorSpec::prepare(DetectorKind::Rapid, &cov, None).unwrap();
        assert!((rapid.evaluate(&v) - stat_rapid(&v, &cov)).abs() < 1e-13);
        let ub = DetectorSpec::prepare(DetectorKind::UpperBound, &cov, Some(&alpha)).unwrap();
        let direct = stat_upper(&v, &cov, &alpha);
        assert!((ub.evaluate(&v) - direct).abs() < 1e-12 * direct.abs().max(1.0));
        assert!(DetectorSpec::prepare(DetectorKind::UpperBound, &cov, None).is_err());
    }
}
