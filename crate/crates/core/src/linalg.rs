//! Dense complex linear algebra helpers on top of `nalgebra`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

/// Eigendecomposition `M = U diag(values) U^H` of a Hermitian matrix, with
/// eigenvalues in ascending order.
#[derive(Debug, Clone)]
pub struct HermitianEigen {
    pub values: Vec<f64>,
    pub vectors: CMatrix,
}

impl HermitianEigen {
    pub fn new(m: &CMatrix) -> Self {
        assert!(m.is_square(), "eigendecomposition of a non-square matrix");
        let n = m.nrows();
        if n == 0 {
            return Self {
                values: Vec::new(),
                vectors: CMatrix::zeros(0, 0),
            };
        }
        let eig = m.clone().symmetric_eigen();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
        let vectors = CMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
        Self { values, vectors }
    }

    /// `U diag(f(values)) U^H`.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> CMatrix {
        let n = self.values.len();
        let mut scaled = self.vectors.clone();
        for (c, &v) in self.values.iter().enumerate() {
            let s = f(v);
            for r in 0..n {
                scaled[(r, c)] *= s;
            }
        }
        &scaled * self.vectors.adjoint()
    }

    pub fn min_value(&self) -> f64 {
        self.values.first().copied().unwrap_or(f64::INFINITY)
    }
}

/// Largest entrywise deviation `|m_ij - conj(m_ji)|`.
pub fn hermitian_deviation(m: &CMatrix) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0f64;
    for r in 0..n {
        for c in r..n {
            worst = worst.max((m[(r, c)] - m[(c, r)].conj()).norm());
        }
    }
    worst
}

pub fn frobenius(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// `out = M x` for a slice-backed vector.
pub fn mat_vec_into(m: &CMatrix, x: &[Complex64], out: &mut [Complex64]) {
    debug_assert_eq!(m.ncols(), x.len());
    debug_assert_eq!(m.nrows(), out.len());
    out.iter_mut().for_each(|o| *o = Complex64::new(0.0, 0.0));
    for (c, &xc) in x.iter().enumerate() {
        if xc.re == 0.0 && xc.im == 0.0 {
            continue;
        }
        let col = m.column(c);
        for (o, &mrc) in out.iter_mut().zip(col.iter()) {
            *o += mrc * xc;
        }
    }
}

/// `x^H M y`.
pub fn sesquilinear(m: &CMatrix, x: &[Complex64], y: &[Complex64]) -> Complex64 {
    debug_assert_eq!(m.nrows(), x.len());
    debug_assert_eq!(m.ncols(), y.len());
    let mut acc = Complex64::new(0.0, 0.0);
    for (c, &yc) in y.iter().enumerate() {
        let col = m.column(c);
        let mut inner = Complex64::new(0.0, 0.0);
        for (&xr, &mrc) in x.iter().zip(col.iter()) {
            inner += xr.conj() * mrc;
        }
        acc += inner * yc;
    }
    acc
}

/// `x^H y`.
pub fn dot_conj(x: &[Complex64], y: &[Complex64]) -> Complex64 {
    x.iter().zip(y).map(|(a, b)| a.conj() * b).sum()
}

pub fn norm_sqr(x: &[Complex64]) -> f64 {
    x.iter().map(|z| z.norm_sqr()).sum()
}

/// Parse a complex literal written as `re+imj` / `re-imj` (a bare real number
/// is accepted as well). Exponents such as `1e-3+2.5E+1j` are handled.
pub fn parse_complex(token: &str) -> Option<Complex64> {
    let s = token.trim();
    if s.is_empty() {
        return None;
    }
    let Some(body) = s.strip_suffix(['j', 'i']) else {
        return s.parse::<f64>().ok().map(|re| Complex64::new(re, 0.0));
    };
    let bytes = body.as_bytes();
    // Split at the last sign that is not a leading sign or an exponent sign.
    let split = (1..bytes.len())
        .rev()
        .find(|&i| (bytes[i] == b'+' || bytes[i] == b'-') && !matches!(bytes[i - 1], b'e' | b'E'))?;
    let re = body[..split].parse::<f64>().ok()?;
    let im_str = &body[split..];
    let im = match im_str {
        "+" => 1.0,
        "-" => -1.0,
        _ => im_str.parse::<f64>().ok()?,
    };
    Some(Complex64::new(re, im))
}

/// Inverse of [`parse_complex`]; round-trips bit-exactly.
pub fn format_complex(z: Complex64) -> String {
    let sign = if z.im.is_sign_negative() { '-' } else { '+' };
    format!("{:?}{}{:?}j", z.re, sign, z.im.abs())
}
