//! Run configuration read from strict TOML.
//!
//! Frequencies are ordinary frequencies in MHz and times are in µs; they are
//! converted to angular units when the model is built.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use super::CliError;

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: Option<u64>,
    pub model: ModelSection,
    #[serde(default)]
    pub output: OutputSection,
    pub peaks: Option<PeaksSection>,
    pub drift: Option<DriftSection>,
    pub scan: Option<ScanSection>,
    pub ramp: Option<RampSection>,
    pub fit: Option<FitSection>,
    pub verify: Option<VerifySection>,
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub n_atoms: usize,
    pub omega_r_mhz: f64,
    pub delta_r_mhz: f64,
    #[serde(default)]
    pub omega_hf_mhz: f64,
    /// Rydberg channels beyond the reference channel `(1, 0)`.
    #[serde(default)]
    pub extra_channels: Vec<ChannelSection>,
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ChannelSection {
    pub rabi_scale: f64,
    pub detuning_offset_mhz: f64,
}

#[derive(Debug, Clone, Copy, Default, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Clone, Default, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default)]
    pub format: Format,
    pub path: Option<PathBuf>,
}

/// Either explicit `values` or `points` evenly spaced from `start` to `stop`
/// inclusive.
#[derive(Debug, Clone, Default, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct Grid {
    pub values: Option<Vec<f64>>,
    pub start: Option<f64>,
    pub stop: Option<f64>,
    pub points: Option<usize>,
}

impl Grid {
    pub fn list(values: Vec<f64>) -> Self {
        Self {
            values: Some(values),
            ..Self::default()
        }
    }

    pub fn range(start: f64, stop: f64, points: usize) -> Self {
        Self {
            start: Some(start),
            stop: Some(stop),
            points: Some(points),
            ..Self::default()
        }
    }

    pub fn values(&self, what: &str) -> Result<Vec<f64>, CliError> {
        match (&self.values, self.start, self.stop, self.points) {
            (Some(v), None, None, None) => {
                finite(what, v)?;
                if v.is_empty() {
                    return Err(CliError::Config(format!("{what}: empty grid")));
                }
                Ok(v.clone())
            }
            (None, Some(start), Some(stop), Some(points)) => {
                finite(what, &[start, stop])?;
                match points {
                    0 => Err(CliError::Config(format!("{what}: points must be at least 1"))),
                    1 if start == stop => Ok(vec![start]),
                    1 => Err(CliError::Config(format!("{what}: a single point needs start == stop"))),
                    n => Ok((0..n).map(|i| start + (stop - start) * i as f64 / (n - 1) as f64).collect()),
                }
            }
            _ => Err(CliError::Config(format!(
                "{what}: give either `values` or all of `start`, `stop`, `points`"
            ))),
        }
    }
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct PeaksSection {
    /// Sweep of `delta_r / omega_r`.
    pub delta_over_omega: Grid,
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct DriftSection {
    /// Half-width of the uniform multiplicative drift of `delta_r` and `omega_r`.
    pub fraction: f64,
    #[serde(default = "default_drift_samples")]
    pub samples: usize,
}

fn default_drift_samples() -> usize {
    200
}

#[derive(Debug, Clone, Copy, Default, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum SignalChoice {
    #[default]
    TotalTransfer,
    PerFlip,
}

#[derive(Debug, Clone, Copy, Default, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum ReadoutChoice {
    #[default]
    Final,
    TimeAveraged,
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ScanSection {
    pub delta_uw_mhz: Grid,
    pub pulse_time_us: f64,
    pub omega_uw_mhz: f64,
    #[serde(default)]
    pub signal: SignalChoice,
    #[serde(default)]
    pub readout: ReadoutChoice,
    /// Excitation number of the bare ground state the scan starts from.
    #[serde(default)]
    pub initial_n: usize,
    pub threshold_fraction: Option<f64>,
    pub min_height: Option<f64>,
}

#[derive(Debug, Clone, Copy, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum StateKind {
    Ground,
    Excited,
    Dressed,
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct InitialState {
    pub state: StateKind,
    pub n: usize,
    /// Excited states only.
    #[serde(default)]
    pub channel: usize,
    /// Dressed states only: `plus`, `minus` or `b<k>`.
    pub branch: Option<String>,
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct SegmentSection {
    pub duration_us: f64,
    pub delta_r_mhz: [f64; 2],
    pub omega_r_mhz: [f64; 2],
    #[serde(default)]
    pub omega_uw_mhz: [f64; 2],
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct RampSection {
    pub initial: InitialState,
    pub segments: Vec<SegmentSection>,
    #[serde(default)]
    pub delta_uw_mhz: f64,
    pub step_us: Option<f64>,
    #[serde(default = "default_trace_samples")]
    pub samples: usize,
}

fn default_trace_samples() -> usize {
    201
}

#[derive(Debug, Clone, Copy, Default, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum Weighting {
    #[default]
    Uniform,
    Relative,
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct FitSection {
    pub omega_r_mhz: Grid,
    #[serde(default = "default_true")]
    pub constrain_origin: bool,
    /// Standard deviation of Gaussian multiplicative noise on each splitting.
    #[serde(default)]
    pub noise_fraction: f64,
    #[serde(default)]
    pub weighting: Weighting,
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, Copy, Default, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum Fault {
    #[default]
    None,
    /// Replaces the `sqrt(n)` collective factor by `n` in the candidate model.
    LinearCoupling,
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct VerifySection {
    /// `"infinite"`; use `blockade_mhz` for a finite blockade.
    pub blockade: Option<String>,
    pub blockade_mhz: Option<f64>,
    #[serde(default)]
    pub fault: Fault,
    /// Random `(omega_r, delta_r)` draws checked besides the configured model.
    #[serde(default)]
    pub draws: usize,
    /// Allowed eigenvalue deviation for finite blockade, MHz. Defaults to
    /// `2 N omega_r^2 / B`.
    pub eigenvalue_tolerance_mhz: Option<f64>,
}

pub fn finite(what: &str, values: &[f64]) -> Result<(), CliError> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(CliError::Config(format!("{what}: values must be finite")))
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| match e {
            CliError::Config(msg) => CliError::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }
}
