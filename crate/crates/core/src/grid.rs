use crate::{Error, Result};

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Dimensions of one observation: `K` frequency bins, `T` time samples and
/// `N_R` antennas, plus the physical frequency axis and antenna spacing.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplingGrid {
    time_samples: usize,
    antennas: usize,
    freqs: Vec<f64>,
    spacing: f64,
}

impl SamplingGrid {
    pub fn new(time_samples: usize, antennas: usize, freqs: Vec<f64>, spacing: f64) -> Result<Self> {
        if freqs.is_empty() {
            return Err(Error::InvalidGrid("at least one frequency bin is required".into()));
        }
        if time_samples == 0 {
            return Err(Error::InvalidGrid("at least one time sample is required".into()));
        }
        if antennas == 0 {
            return Err(Error::InvalidGrid("at least one antenna is required".into()));
        }
        if freqs.iter().any(|f| !f.is_finite()) {
            return Err(Error::InvalidGrid("frequencies must be finite".into()));
        }
        if freqs.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidGrid("frequencies must be strictly increasing".into()));
        }
        if !spacing.is_finite() || spacing < 0.0 {
            return Err(Error::InvalidGrid(format!(
                "antenna spacing {spacing} must be finite and non-negative"
            )));
        }
        Ok(Self {
            time_samples,
            antennas,
            freqs,
            spacing,
        })
    }

    /// `freq_bins` frequencies evenly spread over `[f_min, f_max]`. A single
    /// bin sits at `f_min`.
    pub fn uniform(
        freq_bins: usize,
        time_samples: usize,
        antennas: usize,
        f_min: f64,
        f_max: f64,
        spacing: f64,
    ) -> Result<Self> {
        if freq_bins == 0 {
            return Err(Error::InvalidGrid("at least one frequency bin is required".into()));
        }
        if freq_bins > 1 && f_max <= f_min {
            return Err(Error::InvalidGrid(format!(
                "f_max ({f_max}) must exceed f_min ({f_min})"
            )));
        }
        let freqs = if freq_bins == 1 {
            vec![f_min]
        } else {
            let step = (f_max - f_min) / (freq_bins - 1) as f64;
            (0..freq_bins).map(|k| f_min + step * k as f64).collect()
        };
        Self::new(time_samples, antennas, freqs, spacing)
    }

    /// `K`.
    pub fn freq_bins(&self) -> usize {
        self.freqs.len()
    }

    /// `T`.
    pub fn time_samples(&self) -> usize {
        self.time_samples
    }

    /// `N_R`.
    pub fn antennas(&self) -> usize {
        self.antennas
    }

    pub fn freqs(&self) -> &[f64] {
        &self.freqs
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    /// Length of one frequency-stacked snapshot, `K * N_R`.
    pub fn stacked_len(&self) -> usize {
        self.freq_bins() * self.antennas
    }
}
