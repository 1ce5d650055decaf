//! Frequency-indexed noise covariances `R_k` and their spectral factors.
//!
//! Matrices are validated (Hermitian, positive definite) and factored once at
//! construction; a [`CovarianceSet`] is immutable afterwards. The stacked
//! block-diagonal operators built from the `R_k` are never formed densely:
//! consumers work block by block.
//!
//! Text file format:
//!
//! ```text
//! K N_R
//! <N_R lines of N_R entries `re+imj`>   # block for k = 1
//! ...                                   # K blocks in total
//! ```
//!
//! Blank lines and lines starting with `#` are ignored.

use std::f64::consts::PI;
use std::io::Write;
use std::path::Path;

use num_complex::Complex64;

use crate::grid::{SamplingGrid, SPEED_OF_LIGHT};
use crate::linalg::{format_complex, hermitian_deviation, parse_complex, CMatrix, HermitianEigen};
use crate::{Error, Result};

/// Absolute per-entry tolerance on `|R - R^H|`.
pub const HERMITIAN_TOL: f64 = 1e-10;

/// Eigenvalue floor relative to the largest diagonal entry.
pub const PD_REL_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CouplingKind {
    Tight,
    Weak,
    Custom,
}

/// Parameters of the synthetic exponential-Toeplitz coupling model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CouplingPreset {
    pub kind: CouplingKind,
    /// Peak inter-element correlation `rho_0`, in `[0, 1)`.
    pub coupling_scale: f64,
    /// Per-antenna noise power `sigma^2`.
    pub noise_power: f64,
}

impl CouplingPreset {
    pub fn tight() -> Self {
        Self {
            kind: CouplingKind::Tight,
            coupling_scale: 0.9,
            noise_power: 1.0,
        }
    }

    pub fn weak() -> Self {
        Self {
            kind: CouplingKind::Weak,
            coupling_scale: 0.3,
            noise_power: 1.0,
        }
    }

    pub fn custom(coupling_scale: f64, noise_power: f64) -> Result<Self> {
        let preset = Self {
            kind: CouplingKind::Custom,
            coupling_scale,
            noise_power,
        };
        preset.validate()?;
        Ok(preset)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.coupling_scale) {
            return Err(Error::InvalidParameter(format!(
                "coupling scale {} must lie in [0, 1)",
                self.coupling_scale
            )));
        }
        if !(self.noise_power.is_finite() && self.noise_power > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "noise power {} must be positive",
                self.noise_power
            )));
        }
        Ok(())
    }
}

fn sinc(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        (PI * x).sin() / (PI * x)
    }
}

/// Correlation magnitude `rho_k = rho_0 |sinc(2 f delta / c)|` of the
/// synthetic model at frequency `freq`.
pub fn synthetic_correlation(preset: &CouplingPreset, freq: f64, spacing: f64) -> f64 {
    preset.coupling_scale * sinc(2.0 * freq * spacing / SPEED_OF_LIGHT).abs()
}

/// Cached `R^{1/2}`, `R^{-1/2}` and `R^{-1}` of one covariance matrix.
#[derive(Debug, Clone)]
pub struct SpectralFactors {
    pub eigenvalues: Vec<f64>,
    pub sqrt: CMatrix,
    pub inv_sqrt: CMatrix,
    pub inv: CMatrix,
}

/// Factor a Hermitian positive-definite matrix through its
/// eigendecomposition. `index` is only used in error reports.
pub fn factor(index: usize, matrix: &CMatrix) -> Result<SpectralFactors> {
    let max_diag = (0..matrix.nrows())
        .map(|i| matrix[(i, i)].re)
        .fold(f64::NEG_INFINITY, f64::max);
    let floor = PD_REL_FLOOR * max_diag.max(0.0);
    let eig = HermitianEigen::new(matrix);
    let min = eig.min_value();
    if !(min > floor) || !(max_diag > 0.0) {
        return Err(Error::NotPositiveDefinite {
            index,
            min_eigenvalue: min,
            floor,
        });
    }
    Ok(SpectralFactors {
        sqrt: eig.map(f64::sqrt),
        inv_sqrt: eig.map(|v| 1.0 / v.sqrt()),
        inv: eig.map(|v| 1.0 / v),
        eigenvalues: eig.values,
    })
}

/// The `K` noise covariance matrices of a sampling grid, validated and
/// factored.
#[derive(Debug, Clone)]
pub struct CovarianceSet {
    grid: SamplingGrid,
    matrices: Vec<CMatrix>,
    factors: Vec<SpectralFactors>,
}

impl CovarianceSet {
    pub fn from_matrices(grid: SamplingGrid, matrices: Vec<CMatrix>) -> Result<Self> {
        if matrices.len() != grid.freq_bins() {
            return Err(Error::DimensionMismatch(format!(
                "expected {} covariance matrices, got {}",
                grid.freq_bins(),
                matrices.len()
            )));
        }
        let n = grid.antennas();
        for (k, m) in matrices.iter().enumerate() {
            if m.nrows() != n || m.ncols() != n {
                return Err(Error::DimensionMismatch(format!(
                    "matrix {k} is {}x{}, expected {n}x{n}",
                    m.nrows(),
                    m.ncols()
                )));
            }
            if m.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
                return Err(Error::InvalidParameter(format!("matrix {k} has non-finite entries")));
            }
            let deviation = hermitian_deviation(m);
            if deviation > HERMITIAN_TOL {
                return Err(Error::NotHermitian { index: k, deviation });
            }
        }
        let factors = matrices
            .iter()
            .enumerate()
            .map(|(k, m)| factor(k, m))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            grid,
            matrices,
            factors,
        })
    }

    /// `R_k = sigma^2 I` for every bin.
    pub fn white(grid: SamplingGrid, noise_power: f64) -> Result<Self> {
        let n = grid.antennas();
        let m = CMatrix::identity(n, n) * Complex64::new(noise_power, 0.0);
        let matrices = vec![m; grid.freq_bins()];
        Self::from_matrices(grid, matrices)
    }

    /// Synthetic frequency-dependent coupling:
    /// `(R_k)_{mn} = sigma^2 rho_k^{|m-n|} exp(i 2 pi f_k delta (m-n) / c)`.
    pub fn synthetic(grid: SamplingGrid, preset: &CouplingPreset) -> Result<Self> {
        preset.validate()?;
        let n = grid.antennas();
        let matrices = grid
            .freqs()
            .iter()
            .map(|&f| {
                let rho = synthetic_correlation(preset, f, grid.spacing());
                let phase = 2.0 * PI * f * grid.spacing() / SPEED_OF_LIGHT;
                CMatrix::from_fn(n, n, |r, c| {
                    let lag = r as i64 - c as i64;
                    let mag = preset.noise_power * rho.powi(lag.unsigned_abs() as i32);
                    Complex64::from_polar(mag, phase * lag as f64)
                })
            })
            .collect();
        Self::from_matrices(grid, matrices)
    }

    /// Load and validate a covariance file against `grid`.
    pub fn load(grid: SamplingGrid, path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(grid, &text)
    }

    pub fn parse(grid: SamplingGrid, text: &str) -> Result<Self> {
        let raw = parse_covariance_text(text)?;
        if raw.freq_bins != grid.freq_bins() || raw.antennas != grid.antennas() {
            return Err(Error::DimensionMismatch(format!(
                "file holds K={} N_R={}, grid expects K={} N_R={}",
                raw.freq_bins,
                raw.antennas,
                grid.freq_bins(),
                grid.antennas()
            )));
        }
        Self::from_matrices(grid, raw.matrices)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_to(&mut file)?;
        file.flush()?;
        Ok(())
    }

    pub fn write_to(&self, mut out: impl Write) -> Result<()> {
        writeln!(out, "{} {}", self.grid.freq_bins(), self.grid.antennas())?;
        for m in &self.matrices {
            for r in 0..m.nrows() {
                let row: Vec<String> = (0..m.ncols()).map(|c| format_complex(m[(r, c)])).collect();
                writeln!(out, "{}", row.join(" "))?;
            }
        }
        Ok(())
    }

    pub fn grid(&self) -> &SamplingGrid {
        &self.grid
    }

    pub fn matrices(&self) -> &[CMatrix] {
        &self.matrices
    }

    pub fn matrix(&self, k: usize) -> &CMatrix {
        &self.matrices[k]
    }

    pub fn factors(&self, k: usize) -> &SpectralFactors {
        &self.factors[k]
    }

    pub fn inv(&self, k: usize) -> &CMatrix {
        &self.factors[k].inv
    }

    pub fn sqrt(&self, k: usize) -> &CMatrix {
        &self.factors[k].sqrt
    }

    pub fn inv_sqrt(&self, k: usize) -> &CMatrix {
        &self.factors[k].inv_sqrt
    }

    /// `tr(R_k)`, the total noise power in bin `k`.
    pub fn trace(&self, k: usize) -> f64 {
        self.matrices[k].diagonal().iter().map(|z| z.re).sum()
    }
}

/// Covariance blocks as read from text, before validation against a grid.
#[derive(Debug, Clone)]
pub struct RawCovariance {
    pub freq_bins: usize,
    pub antennas: usize,
    pub matrices: Vec<CMatrix>,
}

/// Parse the text covariance format without any grid or positivity checks.
pub fn parse_covariance_text(text: &str) -> Result<RawCovariance> {
    let (header_line, freq_bins, antennas, rows) = parse_block_text(text)?;
    let expected_rows = freq_bins.checked_mul(antennas).ok_or_else(|| Error::Format {
        line: header_line,
        message: "header dimensions overflow".into(),
    })?;
    if rows.len() != expected_rows {
        return Err(Error::DimensionMismatch(format!(
            "header announces {freq_bins} blocks of {antennas} rows ({expected_rows} rows), file has {} rows",
            rows.len()
        )));
    }
    for (line, row) in &rows {
        if row.len() != antennas {
            return Err(Error::DimensionMismatch(format!(
                "line {line}: expected {antennas} entries, found {}",
                row.len()
            )));
        }
    }
    let matrices = rows
        .chunks(antennas.max(1))
        .map(|block| CMatrix::from_fn(antennas, antennas, |r, c| block[r].1[c]))
        .collect();
    Ok(RawCovariance {
        freq_bins,
        antennas,
        matrices,
    })
}

type Rows = Vec<(usize, Vec<Complex64>)>;

/// Shared tokenizer for the `K N_R` + complex-rows text formats. Returns the
/// header line number, both header values and every data row with its line
/// number.
pub(crate) fn parse_block_text(text: &str) -> Result<(usize, usize, usize, Rows)> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
    let (header_line, header) = lines.next().ok_or(Error::Format {
        line: 1,
        message: "missing `K N_R` header".into(),
    })?;
    let dims: Vec<&str> = header.split_whitespace().collect();
    let parse_dim = |s: &str| {
        s.parse::<usize>().ok().filter(|&v| v > 0).ok_or_else(|| Error::Format {
            line: header_line,
            message: format!("invalid header dimension `{s}`"),
        })
    };
    if dims.len() != 2 {
        return Err(Error::Format {
            line: header_line,
            message: "header must contain exactly `K N_R`".into(),
        });
    }
    let first = parse_dim(dims[0])?;
    let second = parse_dim(dims[1])?;
    let mut rows = Vec::new();
    for (line, content) in lines {
        let row = content
            .split_whitespace()
            .map(|tok| {
                parse_complex(tok)
                    .filter(|z| z.re.is_finite() && z.im.is_finite())
                    .ok_or_else(|| Error::Format {
                        line,
                        message: format!("cannot parse complex entry `{tok}`"),
                    })
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push((line, row));
    }
    Ok((header_line, first, second, rows))
}
