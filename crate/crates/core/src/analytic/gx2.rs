//! Generalized chi-square distribution: a weighted sum of independent
//! non-central chi-square variables plus an independent normal part,
//!
//! `X = sum_i w_i chi2_{n_i}(delta_i) + N(m, s^2)`.
//!
//! The CDF is evaluated by Imhof's inversion of the characteristic function,
//!
//! `F(x) = 1/2 - (1/pi) int_0^inf sin(theta(u)) / (u rho(u)) du`,
//!
//! with
//!
//! `theta(u) = 1/2 sum_i [n_i atan(w_i u) + delta_i w_i u / (1 + w_i^2 u^2)] - (x - m) u / 2`,
//! `rho(u) = prod_i (1 + w_i^2 u^2)^{n_i/4} exp(1/2 sum_i delta_i w_i^2 u^2 / (1 + w_i^2 u^2) + s^2 u^2 / 8)`.
//!
//! The integral is accumulated over panels no longer than half a local
//! oscillation, each refined with adaptive Gauss-Kronrod (7/15) quadrature.
//! Integration stops once a rigorous bound on the remaining envelope is small
//! enough. When the envelope decays too slowly (few degrees of freedom), the
//! remainder is integrated between consecutive zeros of `sin(theta)` and the
//! resulting alternating partial sums are extrapolated with Wynn's epsilon
//! algorithm. Failure to converge is reported as
//! [`Error::QuadratureFailure`], never silently.

use std::f64::consts::PI;

use crate::{Error, Result};

/// Absolute tolerance on the Imhof integral (the CDF error is this over pi).
const INTEGRAL_TOL: f64 = 1e-11;
/// Per-panel absolute tolerance of the adaptive Gauss-Kronrod rule.
const PANEL_TOL: f64 = 1e-13;
const MAX_PANELS: usize = 100_000;
const MAX_DEPTH: u32 = 40;
const MAX_TAIL_CHUNKS: usize = 2_000;
/// Terms with `|w| < PRUNE_REL * max|w|` are dropped if their non-central
/// contribution is equally negligible.
const PRUNE_REL: f64 = 1e-12;

/// `w * chi2_{dof}(noncentrality)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Gx2Term {
    pub weight: f64,
    pub dof: u32,
    pub noncentrality: f64,
}

/// Independent normal component `N(mean, variance)`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct GaussianPart {
    pub mean: f64,
    pub variance: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gx2Params {
    terms: Vec<Gx2Term>,
    gaussian: GaussianPart,
}

impl Gx2Params {
    pub fn new(terms: Vec<Gx2Term>, gaussian: GaussianPart) -> Result<Self> {
        for (i, t) in terms.iter().enumerate() {
            if !t.weight.is_finite() {
                return Err(Error::InvalidParameter(format!(
                    "term {i}: weight {} is not finite",
                    t.weight
                )));
            }
            if t.dof == 0 {
                return Err(Error::InvalidParameter(format!(
                    "term {i}: degrees of freedom must be >= 1"
                )));
            }
            if !(t.noncentrality.is_finite() && t.noncentrality >= 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "term {i}: non-centrality {} must be finite and >= 0",
                    t.noncentrality
                )));
            }
        }
        if !gaussian.mean.is_finite() || !(gaussian.variance.is_finite() && gaussian.variance >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "normal part N({}, {}) is invalid",
                gaussian.mean, gaussian.variance
            )));
        }
        if !terms.iter().any(|t| t.weight != 0.0) && gaussian.variance == 0.0 {
            return Err(Error::InvalidParameter(
                "distribution needs a non-zero weight or a normal part with positive variance".into(),
            ));
        }
        Ok(Self { terms, gaussian })
    }

    /// `w * chi2_{dof}(noncentrality)` on its own.
    pub fn single(weight: f64, dof: u32, noncentrality: f64) -> Result<Self> {
        Self::new(
            vec![Gx2Term {
                weight,
                dof,
                noncentrality,
            }],
            GaussianPart::default(),
        )
    }

    pub fn terms(&self) -> &[Gx2Term] {
        &self.terms
    }

    pub fn gaussian(&self) -> GaussianPart {
        self.gaussian
    }

    pub fn mean(&self) -> f64 {
        self.terms
            .iter()
            .map(|t| t.weight * (t.dof as f64 + t.noncentrality))
            .sum::<f64>()
            + self.gaussian.mean
    }

    pub fn variance(&self) -> f64 {
        self.terms
            .iter()
            .map(|t| 2.0 * t.weight * t.weight * (t.dof as f64 + 2.0 * t.noncentrality))
            .sum::<f64>()
            + self.gaussian.variance
    }

    pub fn total_dof(&self) -> u64 {
        self.terms.iter().map(|t| t.dof as u64).sum()
    }

    pub fn total_noncentrality(&self) -> f64 {
        self.terms.iter().map(|t| t.noncentrality).sum()
    }

    /// Drop terms whose weight is negligible relative to the largest one,
    /// unless their non-central shift is not negligible as well.
    pub fn pruned(&self) -> Self {
        let max_w = self.terms.iter().map(|t| t.weight.abs()).fold(0.0, f64::max);
        let floor = PRUNE_REL * max_w;
        let terms = self
            .terms
            .iter()
            .copied()
            .filter(|t| t.weight != 0.0 && !(t.weight.abs() < floor && t.weight.abs() * t.noncentrality < floor))
            .collect();
        Self {
            terms,
            gaussian: self.gaussian,
        }
    }

    pub fn cdf(&self, x: f64) -> Result<f64> {
        gx2_cdf(self, x)
    }

    /// `P(X > x)`.
    pub fn sf(&self, x: f64) -> Result<f64> {
        Ok(1.0 - gx2_cdf(self, x)?)
    }

    pub fn quantile(&self, p: f64) -> Result<f64> {
        gx2_quantile(self, p)
    }
}

/// Standardized Imhof integrand: weights scaled by `1/scale`, `x` shifted by
/// the normal mean and scaled.
struct Integrand {
    weight: Vec<f64>,
    half_dof: Vec<f64>,
    noncentrality: Vec<f64>,
    gauss_var: f64,
    x: f64,
}

impl Integrand {
    fn theta(&self, u: f64) -> f64 {
        let mut th = -0.5 * self.x * u;
        for ((&w, &hn), &d) in self.weight.iter().zip(&self.half_dof).zip(&self.noncentrality) {
            let wu = w * u;
            th += hn * wu.atan() + 0.5 * d * wu / (1.0 + wu * wu);
        }
        th
    }

    fn theta_prime(&self, u: f64) -> f64 {
        let mut dth = -0.5 * self.x;
        for ((&w, &hn), &d) in self.weight.iter().zip(&self.half_dof).zip(&self.noncentrality) {
            let z = 1.0 + w * w * u * u;
            dth += hn * w / z + 0.5 * d * w * (2.0 - z) / (z * z);
        }
        dth
    }

    fn log_rho(&self, u: f64) -> f64 {
        let mut lr = self.gauss_var * u * u / 8.0;
        for ((&w, &hn), &d) in self.weight.iter().zip(&self.half_dof).zip(&self.noncentrality) {
            let w2u2 = w * w * u * u;
            lr += 0.5 * hn * w2u2.ln_1p() + 0.5 * d * w2u2 / (1.0 + w2u2);
        }
        lr
    }

    fn eval(&self, u: f64) -> f64 {
        self.theta(u).sin() / (u * self.log_rho(u).exp())
    }

    fn envelope(&self, u: f64) -> f64 {
        1.0 / (u * self.log_rho(u).exp())
    }

    /// Upper bound on `|theta'|` over `[u, inf)`.
    fn omega_bound(&self, u: f64) -> f64 {
        let mut om = 0.5 * self.x.abs();
        for ((&w, &hn), &d) in self.weight.iter().zip(&self.half_dof).zip(&self.noncentrality) {
            om += (hn + 0.5 * d) * w.abs() / (1.0 + w * w * u * u);
        }
        om
    }

    /// Part of `omega_bound` contributed by the weights (excluding `x`).
    fn drift_bound(&self, u: f64) -> f64 {
        self.omega_bound(u) - 0.5 * self.x.abs()
    }

    /// Bound on `int_b^inf envelope(u) du`.
    fn tail_bound(&self, b: f64) -> f64 {
        // d ln(1 + w^2 u^2) / d ln u is increasing in u, so beyond b the
        // envelope decays at least like u^{-1 - n_eff/2}.
        let n_eff: f64 = self
            .weight
            .iter()
            .zip(&self.half_dof)
            .map(|(&w, &hn)| {
                let w2b2 = w * w * b * b;
                2.0 * hn * w2b2 / (1.0 + w2b2)
            })
            .sum();
        let env = self.envelope(b);
        let mut bound = f64::INFINITY;
        if n_eff > 0.0 {
            bound = env * b * 2.0 / n_eff;
        }
        if self.gauss_var > 0.0 {
            bound = bound.min(env * 4.0 / (self.gauss_var * b));
        }
        bound
    }
}

// Gauss-Kronrod 7/15 nodes and weights.
const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15(f: &impl Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kron = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    for j in 0..7 {
        let dx = h * XGK[j];
        let pair = f(c - dx) + f(c + dx);
        kron += WGK[j] * pair;
        if j % 2 == 1 {
            gauss += WG[j / 2] * pair;
        }
    }
    (kron * h, ((kron - gauss) * h).abs())
}

fn adaptive(f: &impl Fn(f64) -> f64, a: f64, b: f64, tol: f64, depth: u32) -> Option<f64> {
    let (value, err) = gk15(f, a, b);
    if !value.is_finite() {
        return None;
    }
    if err <= tol.max(1e-15 * value.abs()) {
        return Some(value);
    }
    if depth >= MAX_DEPTH {
        return None;
    }
    let mid = 0.5 * (a + b);
    Some(adaptive(f, a, mid, tol, depth + 1)? + adaptive(f, mid, b, tol, depth + 1)?)
}

/// Wynn's epsilon extrapolation of a sequence of partial sums; returns the
/// estimate from the highest even column available.
fn wynn_epsilon(seq: &[f64]) -> f64 {
    let n = seq.len();
    if n < 3 {
        return *seq.last().unwrap_or(&0.0);
    }
    let mut prev = vec![0.0; n + 1]; // epsilon_{-1}
    let mut cur: Vec<f64> = seq.to_vec(); // epsilon_0
    let mut best = seq[n - 1];
    let mut col = 0;
    while cur.len() > 1 {
        let mut next = Vec::with_capacity(cur.len() - 1);
        for i in 0..cur.len() - 1 {
            let diff = cur[i + 1] - cur[i];
            if diff == 0.0 || !diff.is_finite() {
                return best;
            }
            next.push(prev[i + 1] + 1.0 / diff);
        }
        col += 1;
        prev = cur;
        cur = next;
        if col % 2 == 0 {
            let est = *cur.last().unwrap();
            if !est.is_finite() {
                return best;
            }
            best = est;
        }
    }
    best
}

fn failure(x: f64, detail: impl Into<String>) -> Error {
    Error::QuadratureFailure {
        x,
        detail: detail.into(),
    }
}

pub fn gx2_cdf(params: &Gx2Params, x: f64) -> Result<f64> {
    if x.is_nan() {
        return Err(Error::Domain("CDF argument is NaN".into()));
    }
    let p = params.pruned();
    let gauss = p.gaussian;
    if x == f64::INFINITY {
        return Ok(1.0);
    }
    if x == f64::NEG_INFINITY {
        return Ok(0.0);
    }
    if gauss.variance == 0.0 {
        if p.terms.iter().all(|t| t.weight > 0.0) && x <= gauss.mean {
            return Ok(0.0);
        }
        if p.terms.iter().all(|t| t.weight < 0.0) && x >= gauss.mean {
            return Ok(1.0);
        }
    }
    let max_w = p.terms.iter().map(|t| t.weight.abs()).fold(0.0, f64::max);
    let scale = max_w.max(gauss.variance.sqrt());
    let f = Integrand {
        weight: p.terms.iter().map(|t| t.weight / scale).collect(),
        half_dof: p.terms.iter().map(|t| 0.5 * t.dof as f64).collect(),
        noncentrality: p.terms.iter().map(|t| t.noncentrality).collect(),
        gauss_var: gauss.variance / (scale * scale),
        x: (x - gauss.mean) / scale,
    };
    let integral = imhof_integral(&f).map_err(|detail| failure(x, detail))?;
    Ok((0.5 - integral / PI).clamp(0.0, 1.0))
}

fn imhof_integral(f: &Integrand) -> std::result::Result<f64, String> {
    let g = |u: f64| f.eval(u);
    let mut total = 0.0;
    let mut a = 0.0;
    for _ in 0..MAX_PANELS {
        let omega = f.omega_bound(a).max(1e-300);
        let h = (PI / omega).min(a.max(0.5));
        let b = a + h;
        total += adaptive(&g, a, b, PANEL_TOL, 0).ok_or_else(|| format!("adaptive refinement failed on [{a}, {b}]"))?;
        a = b;
        let tail = f.tail_bound(a);
        if tail < INTEGRAL_TOL {
            return Ok(total);
        }
        // Switch to zero-to-zero integration once theta is monotone and the
        // envelope alone would need many more panels.
        let oscillating = f.x != 0.0 && f.drift_bound(a) < 0.25 * f.x.abs();
        if oscillating && tail > 1e3 * INTEGRAL_TOL && a > 1.0 {
            return Ok(total + oscillatory_tail(f, a)?);
        }
    }
    Err(format!("no convergence after {MAX_PANELS} panels (reached u = {a})"))
}

/// `int_a^inf` when `theta` is strictly monotone on `[a, inf)` with
/// `|theta'| >= |x| / 4`.
fn oscillatory_tail(f: &Integrand, a: f64) -> std::result::Result<f64, String> {
    let g = |u: f64| f.eval(u);
    let direction = if f.theta_prime(a) > 0.0 { 1.0 } else { -1.0 };
    let max_step = 4.0 * PI / f.x.abs();
    let mut level = (f.theta(a) / PI).floor();
    if direction > 0.0 {
        level += 1.0;
    } else if level * PI == f.theta(a) {
        level -= 1.0;
    }
    let mut left = a;
    let mut partial = Vec::new();
    let mut sum = 0.0;
    let mut last_estimate = f64::NAN;
    let mut stable = 0;
    for _ in 0..MAX_TAIL_CHUNKS {
        let target = level * PI;
        let right = find_crossing(f, left, left + max_step, target)?;
        let piece = adaptive(&g, left, right, PANEL_TOL, 0)
            .ok_or_else(|| format!("tail refinement failed on [{left}, {right}]"))?;
        sum += piece;
        partial.push(sum);
        if piece.abs() < 0.1 * INTEGRAL_TOL && f.tail_bound(right) < INTEGRAL_TOL {
            return Ok(sum);
        }
        if partial.len() >= 4 {
            let est = wynn_epsilon(&partial);
            if (est - last_estimate).abs() < 0.1 * INTEGRAL_TOL {
                stable += 1;
                if stable >= 2 {
                    return Ok(est);
                }
            } else {
                stable = 0;
            }
            last_estimate = est;
        }
        left = right;
        level += direction;
    }
    Err(format!("oscillatory tail did not converge from u = {a}"))
}

/// Solve `theta(u) = target` on `[lo, hi]` (theta monotone there).
fn find_crossing(f: &Integrand, lo: f64, hi: f64, target: f64) -> std::result::Result<f64, String> {
    let h = |u: f64| f.theta(u) - target;
    let (mut lo, mut hi) = (lo, hi);
    let (mut flo, fhi) = (h(lo), h(hi));
    if flo == 0.0 {
        return Ok(lo);
    }
    if flo.signum() == fhi.signum() {
        return Err(format!("phase crossing not bracketed in [{lo}, {hi}]"));
    }
    let mut u = 0.5 * (lo + hi);
    for _ in 0..100 {
        let fu = h(u);
        if fu == 0.0 {
            return Ok(u);
        }
        if fu.signum() == flo.signum() {
            lo = u;
            flo = fu;
        } else {
            hi = u;
        }
        let newton = u - fu / f.theta_prime(u);
        u = if newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if hi - lo < 1e-15 * hi.abs() || fu.abs() < 1e-14 {
            return Ok(u);
        }
    }
    Ok(u)
}

/// Quantile by bracketing around the mean and Illinois regula falsi; the
/// result satisfies `|F(x) - p| < 1e-9` unless the bracket collapses first.
pub fn gx2_quantile(params: &Gx2Params, p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::Domain(format!("quantile needs p in (0, 1), got {p}")));
    }
    let mean = params.mean();
    let sd = params.variance().sqrt();
    let step0 = sd.max(1e-300);
    let g = |x: f64| -> Result<f64> { Ok(gx2_cdf(params, x)? - p) };

    let mut lo = mean - step0;
    let mut glo = g(lo)?;
    let mut step = step0;
    while glo > 0.0 {
        step *= 2.0;
        lo = mean - step;
        glo = g(lo)?;
        if step > 1e6 * step0 + mean.abs() * 1e6 {
            return Err(failure(lo, "could not bracket quantile from below"));
        }
    }
    let mut hi = mean + step0;
    let mut ghi = g(hi)?;
    step = step0;
    while ghi < 0.0 {
        step *= 2.0;
        hi = mean + step;
        ghi = g(hi)?;
        if step > 1e6 * step0 + mean.abs() * 1e6 {
            return Err(failure(hi, "could not bracket quantile from above"));
        }
    }
    if glo == 0.0 {
        return Ok(lo);
    }
    if ghi == 0.0 {
        return Ok(hi);
    }
    let mut side = 0i8;
    for _ in 0..200 {
        let x = (lo * ghi - hi * glo) / (ghi - glo);
        let x = if x > lo && x < hi { x } else { 0.5 * (lo + hi) };
        let gx = g(x)?;
        if gx.abs() < 1e-10 || hi - lo < 1e-13 * (1.0 + x.abs()) {
            return Ok(x);
        }
        if gx < 0.0 {
            lo = x;
            glo = gx;
            if side == -1 {
                ghi *= 0.5;
            }
            side = -1;
        } else {
            hi = x;
            ghi = gx;
            if side == 1 {
                glo *= 0.5;
            }
            side = 1;
        }
    }
    Err(failure(0.5 * (lo + hi), "quantile iteration did not converge"))
}
