//! Scenario configuration files.
//!
//! A scenario is a TOML document:
//!
//! ```toml
//! seed = 7
//! output = "out/roc-tc"
//!
//! [grid]
//! K = 15
//! T = 8
//! N_R = 8
//! f_min_hz = 28e9
//! f_max_hz = 30e9
//! spacing_m = 0.005
//!
//! [covariance]
//! preset = "tc"            # "tc", "wc" or "custom" (with coupling_scale, noise_power)
//! # file = "cov.txt"       # instead of a preset
//!
//! [signal]
//! theta_k = 0.1
//! theta_t = 0.5
//! snr_db = -9.0            # or power_mode = "upper-bound-saturation"
//!
//! [[detectors]]
//! kind = "ma"
//! half_width = 2
//!
//! [[detectors]]
//! kind = "constant"
//!
//! [experiment]
//! kind = "roc"
//! ```
//!
//! Relative file paths inside the document are resolved against the
//! directory of the config file. Overrides are dotted paths into the
//! document, `grid.K=5` or `detectors.0.half_width=4`; the value is read as a
//! TOML value and falls back to a plain string.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use tcadetect::covariance::{CouplingPreset, CovarianceSet};
use tcadetect::detectors::{DetectorKind, MaWeights};
use tcadetect::experiments::{default_pfa_grid, log_grid, PowerMode, SignalSetup};
use tcadetect::signalmodel::ChannelModel;
use tcadetect::SamplingGrid;
use toml::Value;

use crate::error::{CliError, CliResult};

pub const DEFAULT_TRIALS: usize = 100_000;
pub const DEFAULT_GRID_POINTS: usize = 200;
pub const DEFAULT_FIXED_PFA: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    pub grid: GridConfig,
    pub covariance: CovarianceConfig,
    pub signal: SignalConfig,
    pub detectors: Vec<DetectorConfig>,
    pub experiment: ExperimentConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    #[serde(rename = "K")]
    pub freq_bins: usize,
    #[serde(rename = "T")]
    pub time_samples: usize,
    #[serde(rename = "N_R")]
    pub antennas: usize,
    pub f_min_hz: f64,
    pub f_max_hz: f64,
    pub spacing_m: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CovarianceConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coupling_scale: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise_power: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub file: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SignalConfig {
    pub theta_k: f64,
    pub theta_t: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub snr_db: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub power_mode: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub direction_cos: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub channel_file: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectorConfig {
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub half_width: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: String,
    /// Scenario label written to ROC files; defaults to the covariance preset.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trials: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid_points: Option<usize>,
    #[serde(default)]
    pub dump_samples: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pfa_min: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pfa_max: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pfa_points: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta_k: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fixed_pfa: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExperimentKind {
    Dist,
    Roc,
    Sweep,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Dist => "dist",
            ExperimentKind::Roc => "roc",
            ExperimentKind::Sweep => "sweep",
        }
    }

    fn parse(s: &str) -> CliResult<Self> {
        match s {
            "dist" => Ok(ExperimentKind::Dist),
            "roc" => Ok(ExperimentKind::Roc),
            "sweep" => Ok(ExperimentKind::Sweep),
            other => Err(CliError::invalid(format!(
                "experiment.kind: unknown kind '{other}' (expected dist, roc or sweep)"
            ))),
        }
    }
}

fn toml_error(e: toml::de::Error) -> CliError {
    CliError::invalid(format!("config: {}", e.to_string().trim_end()))
}

/// Parse a config document without applying overrides or validating it.
pub fn parse_config(text: &str) -> CliResult<ScenarioConfig> {
    toml::from_str(text).map_err(toml_error)
}

/// Parse, apply `key=value` overrides, and deserialize.
pub fn parse_config_with_overrides(text: &str, overrides: &[String]) -> CliResult<ScenarioConfig> {
    let mut doc: Value = toml::from_str(text).map_err(toml_error)?;
    for o in overrides {
        apply_override(&mut doc, o)?;
    }
    doc.try_into().map_err(toml_error)
}

fn parse_override_value(raw: &str) -> Value {
    let wrapped = format!("v = {raw}");
    match toml::from_str::<toml::Table>(&wrapped) {
        Ok(mut t) => t.remove("v").unwrap_or_else(|| Value::String(raw.to_string())),
        Err(_) => Value::String(raw.to_string()),
    }
}

/// Apply one dotted-path `key=value` override to a TOML document. Missing
/// table keys are created; array elements are addressed by index.
pub fn apply_override(doc: &mut Value, spec: &str) -> CliResult<()> {
    let (path, raw) = spec
        .split_once('=')
        .ok_or_else(|| CliError::invalid(format!("override '{spec}' is not of the form key=value")))?;
    let path = path.trim();
    if path.is_empty() || path.split('.').any(str::is_empty) {
        return Err(CliError::invalid(format!("override '{spec}' has an empty key")));
    }
    let value = parse_override_value(raw.trim());
    let parts: Vec<&str> = path.split('.').collect();
    let mut cur = doc;
    for (i, part) in parts.iter().enumerate() {
        let last = i + 1 == parts.len();
        cur = match cur {
            Value::Table(t) => {
                if last {
                    t.insert(part.to_string(), value);
                    return Ok(());
                }
                t.entry(part.to_string())
                    .or_insert_with(|| Value::Table(Default::default()))
            }
            Value::Array(a) => {
                let idx: usize = part
                    .parse()
                    .map_err(|_| CliError::invalid(format!("override '{spec}': '{part}' is not an array index")))?;
                let len = a.len();
                let slot = a.get_mut(idx).ok_or_else(|| {
                    CliError::invalid(format!("override '{spec}': index {idx} out of range (len {len})"))
                })?;
                if last {
                    *slot = value;
                    return Ok(());
                }
                slot
            }
            _ => {
                return Err(CliError::invalid(format!(
                    "override '{spec}': '{}' is not a table",
                    parts[..i].join(".")
                )))
            }
        };
    }
    unreachable!("loop returns on the last path component")
}

/// A validated scenario with its covariance built.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub config: ScenarioConfig,
    pub kind: ExperimentKind,
    pub covset: CovarianceSet,
    pub setup: SignalSetup,
    pub detectors: Vec<DetectorKind>,
    pub label: String,
}

impl Scenario {
    pub fn trials(&self) -> usize {
        self.config.experiment.trials.unwrap_or(DEFAULT_TRIALS)
    }

    pub fn grid_points(&self) -> usize {
        self.config.experiment.grid_points.unwrap_or(DEFAULT_GRID_POINTS)
    }

    pub fn pfa_grid(&self) -> Vec<f64> {
        let e = &self.config.experiment;
        match (e.pfa_min, e.pfa_max, e.pfa_points) {
            (None, None, None) => default_pfa_grid(),
            (lo, hi, n) => log_grid(lo.unwrap_or(1e-6), hi.unwrap_or(0.5), n.unwrap_or(25)),
        }
    }

    pub fn theta_grid(&self) -> Vec<f64> {
        self.config
            .experiment
            .theta_k
            .clone()
            .unwrap_or_else(|| (0..=20).map(|i| i as f64 * 0.05).collect())
    }

    pub fn fixed_pfa(&self) -> f64 {
        self.config.experiment.fixed_pfa.unwrap_or(DEFAULT_FIXED_PFA)
    }

    pub fn seed(&self) -> u64 {
        self.config.seed
    }
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

fn require_file(field: &str, path: &Path) -> CliResult<()> {
    if !path.is_file() {
        return Err(CliError::invalid(format!(
            "{field}: file '{}' does not exist",
            path.display()
        )));
    }
    Ok(())
}

fn field<T>(name: &str, r: tcadetect::Result<T>) -> CliResult<T> {
    r.map_err(|e| {
        let mut err = CliError::from(e);
        err.message = format!("{name}: {}", err.message);
        err
    })
}

fn parse_detector(i: usize, d: &DetectorConfig, freq_bins: usize) -> CliResult<DetectorKind> {
    let name = format!("detectors.{i}");
    let kind = match d.kind.as_str() {
        "ma" | "moving-average" => {
            let half_width = d
                .half_width
                .ok_or_else(|| CliError::invalid(format!("{name}.half_width: required for the MA detector")))?;
            field(&format!("{name}.half_width"), MaWeights::new(freq_bins, half_width))?;
            return Ok(DetectorKind::MovingAverage { half_width });
        }
        "constant" => DetectorKind::Constant,
        "rapid" => DetectorKind::Rapid,
        "upper-bound" => DetectorKind::UpperBound,
        other => {
            return Err(CliError::invalid(format!(
                "{name}.kind: unknown detector '{other}' (expected ma, constant, rapid or upper-bound)"
            )))
        }
    };
    if d.half_width.is_some() {
        return Err(CliError::invalid(format!(
            "{name}.half_width: only the MA detector takes a window"
        )));
    }
    Ok(kind)
}

fn check_probability(name: &str, p: Option<f64>) -> CliResult<()> {
    if let Some(p) = p {
        if !(p > 0.0 && p < 1.0) {
            return Err(CliError::invalid(format!("{name}: {p} must lie in (0, 1)")));
        }
    }
    Ok(())
}

/// Validate every field and build the covariance set. `base_dir` anchors
/// relative file paths.
pub fn validate(config: ScenarioConfig, base_dir: &Path) -> CliResult<Scenario> {
    let kind = ExperimentKind::parse(&config.experiment.kind)?;
    let g = &config.grid;
    let grid = field(
        "grid",
        SamplingGrid::uniform(
            g.freq_bins,
            g.time_samples,
            g.antennas,
            g.f_min_hz,
            g.f_max_hz,
            g.spacing_m,
        ),
    )?;

    let cov = &config.covariance;
    let (covset, preset_label) = match (&cov.file, cov.preset.as_deref()) {
        (Some(_), Some(_)) => {
            return Err(CliError::invalid(
                "covariance: give either 'preset' or 'file', not both",
            ));
        }
        (Some(file), None) => {
            let path = resolve(base_dir, file);
            require_file("covariance.file", &path)?;
            (
                field("covariance.file", CovarianceSet::load(grid.clone(), &path))?,
                "file".to_string(),
            )
        }
        (None, Some(name)) => {
            let preset = match name {
                "tc" | "tight" => CouplingPreset::tight(),
                "wc" | "weak" => CouplingPreset::weak(),
                "custom" => {
                    let scale = cov.coupling_scale.ok_or_else(|| {
                        CliError::invalid("covariance.coupling_scale: required for the custom preset")
                    })?;
                    field(
                        "covariance",
                        CouplingPreset::custom(scale, cov.noise_power.unwrap_or(1.0)),
                    )?
                }
                other => {
                    return Err(CliError::invalid(format!(
                        "covariance.preset: unknown preset '{other}' (expected tc, wc or custom)"
                    )))
                }
            };
            if name != "custom" && (cov.coupling_scale.is_some() || cov.noise_power.is_some()) {
                return Err(CliError::invalid(
                    "covariance: coupling_scale and noise_power only apply to the custom preset",
                ));
            }
            (
                field("covariance", CovarianceSet::synthetic(grid.clone(), &preset))?,
                name.to_string(),
            )
        }
        (None, None) => return Err(CliError::invalid("covariance: either 'preset' or 'file' is required")),
    };

    let s = &config.signal;
    for (name, v) in [("signal.theta_k", s.theta_k), ("signal.theta_t", s.theta_t)] {
        if !v.is_finite() {
            return Err(CliError::invalid(format!("{name}: {v} is not finite")));
        }
    }
    let power = match (s.snr_db, s.power_mode.as_deref()) {
        (Some(_), Some(_)) => {
            return Err(CliError::invalid(
                "signal: give either 'snr_db' or 'power_mode', not both",
            ));
        }
        (Some(db), None) if db.is_finite() => PowerMode::SnrDb(db),
        (Some(db), None) => return Err(CliError::invalid(format!("signal.snr_db: {db} is not finite"))),
        (None, Some("upper-bound-saturation")) => PowerMode::UpperBoundSaturation,
        (None, Some(other)) => {
            return Err(CliError::invalid(format!(
                "signal.power_mode: unknown mode '{other}' (expected upper-bound-saturation)"
            )))
        }
        (None, None) => return Err(CliError::invalid("signal: either 'snr_db' or 'power_mode' is required")),
    };
    let channel = match (&s.channel_file, s.direction_cos) {
        (Some(_), Some(_)) => {
            return Err(CliError::invalid(
                "signal: give either 'channel_file' or 'direction_cos', not both",
            ));
        }
        (Some(file), None) => {
            let path = resolve(base_dir, file);
            require_file("signal.channel_file", &path)?;
            field("signal.channel_file", ChannelModel::load(&path))?
        }
        (None, dc) => {
            let direction_cos = dc.unwrap_or(1.0);
            if !(-1.0..=1.0).contains(&direction_cos) {
                return Err(CliError::invalid(format!(
                    "signal.direction_cos: {direction_cos} must lie in [-1, 1]"
                )));
            }
            ChannelModel::Steering { direction_cos }
        }
    };
    let setup = SignalSetup {
        theta_k: s.theta_k,
        theta_t: s.theta_t,
        power,
        channel,
    };
    // Synthesizing once checks the channel against the grid and the power mode.
    field("signal", setup.synthesize(&covset))?;

    if config.detectors.is_empty() {
        return Err(CliError::invalid("detectors: at least one detector is required"));
    }
    let detectors = config
        .detectors
        .iter()
        .enumerate()
        .map(|(i, d)| parse_detector(i, d, grid.freq_bins()))
        .collect::<CliResult<Vec<_>>>()?;
    for (i, d) in detectors.iter().enumerate() {
        if detectors[..i].contains(d) {
            return Err(CliError::invalid(format!("detectors.{i}: duplicate detector '{d}'")));
        }
    }

    let e = &config.experiment;
    if e.trials == Some(0) {
        return Err(CliError::invalid("experiment.trials: must be >= 1"));
    }
    if e.grid_points.is_some_and(|n| n < 2) {
        return Err(CliError::invalid("experiment.grid_points: must be >= 2"));
    }
    check_probability("experiment.pfa_min", e.pfa_min)?;
    check_probability("experiment.pfa_max", e.pfa_max)?;
    check_probability("experiment.fixed_pfa", e.fixed_pfa)?;
    if e.pfa_points == Some(0) {
        return Err(CliError::invalid("experiment.pfa_points: must be >= 1"));
    }
    if let Some(th) = &e.theta_k {
        if th.is_empty() || th.iter().any(|v| !v.is_finite()) {
            return Err(CliError::invalid(
                "experiment.theta_k: must be a non-empty list of finite values",
            ));
        }
    }

    let label = e.label.clone().unwrap_or(preset_label);
    let scenario = Scenario {
        kind,
        covset,
        setup,
        detectors,
        label,
        config,
    };
    let grid = scenario.pfa_grid();
    if grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(CliError::invalid("experiment: pfa_min must be below pfa_max"));
    }
    Ok(scenario)
}

/// Read, override and validate a config file.
pub fn load_scenario(path: &Path, overrides: &[String]) -> CliResult<Scenario> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::invalid(format!("cannot read config '{}': {e}", path.display())))?;
    let config = parse_config_with_overrides(&text, overrides)?;
    let base = path.parent().unwrap_or(Path::new("."));
    validate(config, base)
}
