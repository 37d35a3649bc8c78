//! Run configuration: defaults, TOML file, command-line overrides.
//!
//! Precedence is flags over file over defaults. The resolved value is
//! validated before any computation and embedded into every report.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use specdep::calibration::{NoiseConvention, NullDesign, DEFAULT_RHO};
use specdep::copula::{CopulaFamily, ThetaMethod};
use specdep::dvine::Evaluation;
use specdep::marginals::{BootstrapConfig, MarginalFamily};
use specdep::spectral::{default_bands, BandSpec};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InputFormat {
    Csv,
    Binary,
}

impl std::str::FromStr for InputFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "csv" => Ok(InputFormat::Csv),
            "binary" | "bin" => Ok(InputFormat::Binary),
            _ => Err(format!("unknown format '{s}', expected csv or binary")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InputConfig {
    pub path: Option<PathBuf>,
    /// Inferred from the extension when absent (`.csv` or anything else).
    pub format: Option<InputFormat>,
    /// Samples per epoch; CSV only, binary recordings carry it in the sidecar.
    pub epoch_len: usize,
    /// CSV only.
    pub sampling_rate_hz: f64,
}

impl Default for InputConfig {
    fn default() -> Self {
        Self {
            path: None,
            format: None,
            epoch_len: 1000,
            sampling_rate_hz: 1000.0,
        }
    }
}

impl InputConfig {
    pub fn resolved_format(&self) -> InputFormat {
        self.format.unwrap_or_else(|| match self.path.as_deref().and_then(Path::extension) {
            Some(e) if e.eq_ignore_ascii_case("csv") => InputFormat::Csv,
            _ => InputFormat::Binary,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateConfig {
    /// Segments `<kind>:<epochs>`, kinds `dgp1a`, `dgp1b`, `dgp2-<i>`.
    pub segments: Vec<String>,
    pub epoch_len: usize,
    pub sampling_rate_hz: f64,
    pub channels: usize,
    pub noise: NoiseConvention,
    pub format: InputFormat,
    pub name: String,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        Self {
            segments: vec!["dgp1a:100".into(), "dgp1b:100".into()],
            epoch_len: 1000,
            sampling_rate_hz: 1000.0,
            channels: 1,
            noise: NoiseConvention::Variance,
            format: InputFormat::Binary,
            name: "sim".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CalibrateConfig {
    pub design: NullDesign,
    pub epochs: usize,
    pub epoch_len: usize,
    pub sampling_rate_hz: f64,
    /// Independent simulations of the whole design.
    pub runs: usize,
    pub noise: NoiseConvention,
}

impl Default for CalibrateConfig {
    fn default() -> Self {
        Self {
            design: NullDesign::Dgp2,
            epochs: 100,
            epoch_len: 1000,
            sampling_rate_hz: 1000.0,
            runs: 1,
            noise: NoiseConvention::Variance,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CompareSection {
    pub band: String,
    /// 1-based inclusive epoch range; defaults to the first half.
    pub pre: Option<[usize; 2]>,
    /// Defaults to the second half.
    pub post: Option<[usize; 2]>,
    /// Epoch range for channel comparisons; defaults to all epochs.
    pub range: Option<[usize; 2]>,
    pub evaluation: Evaluation,
    /// Significance level used to mark rejections.
    pub level: f64,
}

impl Default for CompareSection {
    fn default() -> Self {
        Self {
            band: "gamma".into(),
            pre: None,
            post: None,
            range: None,
            evaluation: Evaluation::OwnRange,
            level: 0.025,
        }
    }
}

/// Everything a command may read.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    /// Worker threads; absent means one per logical core. Results do not
    /// depend on it, so it is left out of reports.
    #[serde(skip_serializing)]
    pub jobs: Option<usize>,
    pub out_dir: PathBuf,
    pub grid: usize,
    pub alpha: f64,
    pub blocks: usize,
    pub reps: usize,
    pub truncation: usize,
    pub rho: f64,
    pub panel: Vec<CopulaFamily>,
    pub marginal_family: MarginalFamily,
    pub theta_method: ThetaMethod,
    pub bare_copula: bool,
    pub bands: Vec<BandSpec>,
    /// Threshold table; the built-in table is used when absent.
    pub thresholds: Option<PathBuf>,
    /// 1-based channel numbers; all channels when absent.
    pub channels: Option<Vec<usize>>,
    pub input: InputConfig,
    pub simulate: SimulateConfig,
    pub calibrate: CalibrateConfig,
    pub compare: CompareSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        let boot = BootstrapConfig::default();
        Self {
            seed: 0,
            jobs: None,
            out_dir: PathBuf::from("out"),
            grid: 101,
            alpha: 0.01,
            blocks: boot.blocks,
            reps: boot.replicates,
            truncation: 2,
            rho: DEFAULT_RHO,
            panel: CopulaFamily::PANEL.to_vec(),
            marginal_family: MarginalFamily::Gamma,
            theta_method: ThetaMethod::TauInversion,
            bare_copula: false,
            bands: default_bands(true),
            thresholds: None,
            channels: None,
            input: InputConfig::default(),
            simulate: SimulateConfig::default(),
            calibrate: CalibrateConfig::default(),
            compare: CompareSection::default(),
        }
    }
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| usage(format!("cannot read config {}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| usage(format!("{}: {e}", path.display())))
    }

    pub fn bootstrap(&self) -> BootstrapConfig {
        BootstrapConfig {
            blocks: self.blocks,
            replicates: self.reps,
            seed: self.seed,
        }
    }

    pub fn detect_config(&self) -> specdep::ks_change::DetectConfig {
        specdep::ks_change::DetectConfig {
            bootstrap: self.bootstrap(),
            grid_size: self.grid,
            panel: self.panel.clone(),
            marginal_family: self.marginal_family,
            theta_method: self.theta_method,
            bare_copula: self.bare_copula,
        }
    }

    pub fn compare_config(&self) -> specdep::dvine::CompareConfig {
        specdep::dvine::CompareConfig {
            detect: self.detect_config(),
            truncation_level: self.truncation,
            evaluation: self.compare.evaluation,
        }
    }

    pub fn band(&self, name: &str) -> Result<&BandSpec, CliError> {
        self.bands
            .iter()
            .find(|b| b.name == name)
            .ok_or_else(|| usage(format!("no band named '{name}' in the configuration")))
    }

    /// Checks every field that does not depend on the input data.
    pub fn validate(&self) -> Result<(), CliError> {
        if self.jobs == Some(0) {
            return Err(usage("--jobs must be at least 1"));
        }
        if self.grid < 11 {
            return Err(usage(format!("grid must be at least 11, got {}", self.grid)));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(usage(format!("alpha must lie in (0, 1), got {}", self.alpha)));
        }
        if self.blocks == 0 || self.reps == 0 {
            return Err(usage("blocks and bootstrap replicates must be at least 1"));
        }
        if self.truncation == 0 {
            return Err(usage("truncation level must be at least 1"));
        }
        if !(self.rho.abs() < 1.0) {
            return Err(usage(format!("rho must satisfy |rho| < 1, got {}", self.rho)));
        }
        if self.panel.is_empty() {
            return Err(usage("the copula panel is empty"));
        }
        if self.bands.is_empty() {
            return Err(usage("no frequency bands configured"));
        }
        for b in &self.bands {
            BandSpec::new(b.name.clone(), b.lo_hz, b.hi_hz, b.notch_hz.clone()).map_err(|e| usage(e.to_string()))?;
        }
        if let Some(ch) = &self.channels {
            if ch.is_empty() || ch.contains(&0) {
                return Err(usage("channels are 1-based and the list must not be empty"));
            }
        }
        if !(self.compare.level > 0.0 && self.compare.level < 1.0) {
            return Err(usage("compare.level must lie in (0, 1)"));
        }
        if self.calibrate.runs == 0 || self.calibrate.epochs < 3 {
            return Err(usage("calibration needs at least one run of at least 3 epochs"));
        }
        if self.simulate.channels == 0 || self.simulate.segments.is_empty() {
            return Err(usage("simulation needs at least one channel and one segment"));
        }
        Ok(())
    }
}

/// Parses `1-300` into `[1, 300]`.
pub fn parse_range(s: &str) -> Result<[usize; 2], String> {
    let (a, b) = s.split_once('-').ok_or_else(|| format!("expected START-END, got '{s}'"))?;
    let a: usize = a.trim().parse().map_err(|_| format!("bad range start in '{s}'"))?;
    let b: usize = b.trim().parse().map_err(|_| format!("bad range end in '{s}'"))?;
    Ok([a, b])
}

/// Converts a 1-based inclusive range into a 0-based half-open one.
pub fn to_zero_based(r: [usize; 2], epochs: usize, what: &str) -> Result<std::ops::Range<usize>, CliError> {
    if r[0] == 0 || r[0] > r[1] || r[1] > epochs {
        return Err(usage(format!(
            "{what} range {}-{} must satisfy 1 <= start <= end <= {epochs}",
            r[0], r[1]
        )));
    }
    Ok(r[0] - 1..r[1])
}
