//! Simulated scenarios, empirical thresholds and power runs.
//!
//! Two families of synthetic recordings are provided. The first is an AR(1)
//! signal observed with noise, optionally shifted by a constant (variants A
//! and B). The second is an AR(2) process whose complex roots place a spectral
//! peak at one of six frequencies. Each epoch is an independent draw with its
//! own burn-in. Thresholds are type-7 empirical quantiles at level `1 − ᾱ` of
//! KS statistics computed on scenarios without changepoints.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ks_change::{analyze_channel, ChangepointReport, DetectConfig};
use crate::numeric::quantile_type7;
use crate::rng::{self, tag, StreamRng};
use crate::spectral::BandSpec;
use crate::{Error, Result};

/// Samples discarded before each epoch is recorded.
pub const BURN_IN: usize = 1000;

/// Peak frequencies (cycles per epoch) of the six AR(2) signals.
pub const DGP2_FREQUENCIES: [f64; 6] = [4.0, 6.0, 9.0, 13.0, 15.0, 150.0];

/// Default AR(2) root modulus. A peak at 4 cycles per 1000 samples needs a
/// modulus above about 0.975; below that the spectrum peaks at zero frequency.
pub const DEFAULT_RHO: f64 = 0.99;

/// How the second argument of `N(0, s)` in the noise terms is read.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NoiseConvention {
    #[default]
    Variance,
    StdDev,
}

impl NoiseConvention {
    fn sd(self, s: f64) -> f64 {
        match self {
            NoiseConvention::Variance => s.sqrt(),
            NoiseConvention::StdDev => s,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum DgpKind {
    /// `Z = 0.9 X + ε`, `X` AR(1) with coefficient 0.9.
    Dgp1A,
    /// `Z = 1 + 0.9 X + ε`.
    Dgp1B,
    /// AR(2) with a spectral peak at `DGP2_FREQUENCIES[index − 1]`.
    Dgp2 { index: usize },
}

impl DgpKind {
    fn code(self) -> u64 {
        match self {
            DgpKind::Dgp1A | DgpKind::Dgp1B => 1,
            DgpKind::Dgp2 { index } => 10 + index as u64,
        }
    }
}

/// One homogeneous block of simulated epochs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DgpSpec {
    #[serde(flatten)]
    pub kind: DgpKind,
    pub epochs: usize,
    pub epoch_len: usize,
    pub noise: NoiseConvention,
    pub rho: f64,
}

impl DgpSpec {
    pub fn new(kind: DgpKind, epochs: usize, epoch_len: usize) -> Self {
        Self {
            kind,
            epochs,
            epoch_len,
            noise: NoiseConvention::Variance,
            rho: DEFAULT_RHO,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.epoch_len == 0 {
            return Err(Error::invalid("a scenario needs at least one epoch of one sample"));
        }
        if let DgpKind::Dgp2 { index } = self.kind {
            if !(1..=6).contains(&index) {
                return Err(Error::invalid(format!("AR(2) signal index must be 1..=6, got {index}")));
            }
            if !(self.rho.abs() < 1.0) {
                return Err(Error::invalid(format!("root modulus must satisfy |rho| < 1, got {}", self.rho)));
            }
        }
        Ok(())
    }
}

fn normal(rng: &mut StreamRng) -> f64 {
    StandardNormal.sample(rng)
}

fn ar1(rng: &mut StreamRng, phi: f64, len: usize) -> Vec<f64> {
    let mut x = 0.0;
    for _ in 0..BURN_IN {
        x = phi * x + normal(rng);
    }
    (0..len)
        .map(|_| {
            x = phi * x + normal(rng);
            x
        })
        .collect()
}

fn ar2(rng: &mut StreamRng, phi1: f64, phi2: f64, len: usize) -> Vec<f64> {
    let (mut x1, mut x2) = (0.0, 0.0);
    let mut step = |rng: &mut StreamRng| {
        let x = phi1 * x1 + phi2 * x2 + normal(rng);
        x2 = x1;
        x1 = x;
        x
    };
    for _ in 0..BURN_IN {
        step(rng);
    }
    (0..len).map(|_| step(rng)).collect()
}

fn sample_sd(x: &[f64]) -> f64 {
    let n = x.len() as f64;
    let m = x.iter().sum::<f64>() / n;
    (x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (n - 1.0).max(1.0)).sqrt()
}

/// AR(2) coefficients `(2ρ cos p, −ρ²)` with `p = 2π f / T`.
pub fn dgp2_coefficients(index: usize, rho: f64, epoch_len: usize) -> (f64, f64) {
    let p = 2.0 * PI * DGP2_FREQUENCIES[index - 1] / epoch_len as f64;
    (2.0 * rho * p.cos(), -rho * rho)
}

/// One epoch of `spec`. `epoch` is the global epoch coordinate that selects
/// the random stream.
fn simulate_epoch(spec: &DgpSpec, seed: u64, epoch: usize) -> Vec<f64> {
    let mut rng = rng::stream(seed, tag::DGP, &[spec.kind.code(), epoch as u64]);
    match spec.kind {
        DgpKind::Dgp1A | DgpKind::Dgp1B => {
            let shift = if spec.kind == DgpKind::Dgp1B { 1.0 } else { 0.0 };
            let sd = spec.noise.sd(0.1);
            ar1(&mut rng, 0.9, spec.epoch_len)
                .into_iter()
                .map(|x| shift + 0.9 * x + sd * normal(&mut rng))
                .collect()
        }
        DgpKind::Dgp2 { index } => {
            let (p1, p2) = dgp2_coefficients(index, spec.rho, spec.epoch_len);
            let x = ar2(&mut rng, p1, p2, spec.epoch_len);
            let sd = spec.noise.sd(0.1 * sample_sd(&x));
            x.iter().map(|&v| v + sd * normal(&mut rng)).collect()
        }
    }
}

/// Simulates `spec.epochs` epochs whose global indices start at `first_epoch`.
pub fn simulate(spec: &DgpSpec, seed: u64, first_epoch: usize) -> Result<Vec<Vec<f64>>> {
    spec.validate()?;
    Ok((0..spec.epochs)
        .into_par_iter()
        .map(|r| simulate_epoch(spec, seed, first_epoch + r))
        .collect())
}

/// First scenario: variant A or B.
pub fn simulate_dgp1(variant_b: bool, epochs: usize, epoch_len: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    let kind = if variant_b { DgpKind::Dgp1B } else { DgpKind::Dgp1A };
    simulate(&DgpSpec::new(kind, epochs, epoch_len), seed, 0)
}

/// Second scenario: AR(2) signal `index` (1..=6) with root modulus `rho`.
pub fn simulate_dgp2(index: usize, epochs: usize, epoch_len: usize, rho: f64, seed: u64) -> Result<Vec<Vec<f64>>> {
    let spec = DgpSpec {
        rho,
        ..DgpSpec::new(DgpKind::Dgp2 { index }, epochs, epoch_len)
    };
    simulate(&spec, seed, 0)
}

/// Concatenates segments; segment `k` starts at the global epoch following
/// the previous segment.
pub fn simulate_scenario(segments: &[DgpSpec], seed: u64) -> Result<Vec<Vec<f64>>> {
    let mut out = Vec::new();
    for seg in segments {
        if seg.epoch_len != segments[0].epoch_len {
            return Err(Error::invalid("all segments must share the epoch length"));
        }
        let first = out.len();
        out.extend(simulate(seg, seed, first)?);
    }
    Ok(out)
}

/// Two channels whose dependence is gated by a logistic switch.
///
/// `X` is AR(1) with coefficient 0.9 and `Y = D(X) X + ε`, `ε ~ N(0, 1)`. Before
/// `switch_epoch` (1-based) `D(x) = e^{−x} / (1 + e^{−x})`; from it on
/// `D(x) = e^{x} / (1 + e^{x})`. The two regimes are mirror images of each
/// other, which leaves the correlation of `X` and `Y` unchanged.
pub fn simulate_logistic_gate(
    epochs: usize,
    epoch_len: usize,
    switch_epoch: usize,
    seed: u64,
) -> Result<(Vec<Vec<f64>>, Vec<Vec<f64>>)> {
    if epochs == 0 || epoch_len < 2 {
        return Err(Error::invalid("the gate scenario needs epochs of at least two samples"));
    }
    let pairs: Vec<(Vec<f64>, Vec<f64>)> = (0..epochs)
        .into_par_iter()
        .map(|r| {
            let mut rng = rng::stream(seed, tag::DGP, &[100, r as u64]);
            let x = ar1(&mut rng, 0.9, epoch_len);
            let after = r + 1 >= switch_epoch;
            let y = x
                .iter()
                .map(|&v| {
                    let gate = if after { 1.0 / (1.0 + (-v).exp()) } else { 1.0 / (1.0 + v.exp()) };
                    gate * v + normal(&mut rng)
                })
                .collect();
            (x, y)
        })
        .collect();
    Ok(pairs.into_iter().unzip())
}

/// Critical value of one band.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandThreshold {
    pub threshold: f64,
    pub alpha: f64,
    pub source: String,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ThresholdMeta {
    pub alpha: f64,
    pub source: String,
    pub n_null_stats: BTreeMap<String, usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub replicates: Option<usize>,
}

/// Per-band KS critical values. Serializes to
/// `{"<band>": {threshold, alpha, source}, ..., "meta": {...}}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdTable {
    pub meta: ThresholdMeta,
    #[serde(flatten)]
    pub bands: BTreeMap<String, BandThreshold>,
}

/// Source label of the built-in thresholds.
pub const BUILTIN_SOURCE: &str = "builtin-dgp2";

impl ThresholdTable {
    /// Thresholds at ᾱ = 1% from the AR(2) scenario, shipped as defaults.
    pub fn builtin() -> Self {
        let values = [
            ("delta", 0.0149),
            ("theta", 0.0625),
            ("alpha", 0.0101),
            ("beta", 0.0050),
            ("gamma", 0.0103),
        ];
        let bands = values
            .iter()
            .map(|&(b, t)| {
                (
                    b.to_string(),
                    BandThreshold {
                        threshold: t,
                        alpha: 0.01,
                        source: BUILTIN_SOURCE.to_string(),
                    },
                )
            })
            .collect();
        Self {
            meta: ThresholdMeta {
                alpha: 0.01,
                source: BUILTIN_SOURCE.to_string(),
                ..ThresholdMeta::default()
            },
            bands,
        }
    }

    pub fn get(&self, band: &str) -> Result<f64> {
        self.bands
            .get(band)
            .map(|b| b.threshold)
            .ok_or_else(|| Error::invalid(format!("no threshold for band '{band}'")))
    }

    pub fn validate(&self) -> Result<()> {
        for (band, t) in &self.bands {
            if !(t.threshold.is_finite() && t.threshold >= 0.0) {
                return Err(Error::Format(format!("threshold of band '{band}' is {}", t.threshold)));
            }
        }
        Ok(())
    }
}

/// Empirical `1 − alpha` quantiles (type 7) of null KS statistics per band.
pub fn calibrate_thresholds(
    null_stats: &BTreeMap<String, Vec<f64>>,
    alpha: f64,
    source: &str,
) -> Result<ThresholdTable> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::invalid(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    if null_stats.is_empty() {
        return Err(Error::invalid("no bands to calibrate"));
    }
    let mut bands = BTreeMap::new();
    let mut counts = BTreeMap::new();
    for (band, stats) in null_stats {
        if stats.len() < 100 {
            return Err(Error::invalid(format!(
                "band '{band}' has {} null statistics; at least 100 are required",
                stats.len()
            )));
        }
        bands.insert(
            band.clone(),
            BandThreshold {
                threshold: quantile_type7(stats, 1.0 - alpha),
                alpha,
                source: source.to_string(),
            },
        );
        counts.insert(band.clone(), stats.len());
    }
    Ok(ThresholdTable {
        meta: ThresholdMeta {
            alpha,
            source: source.to_string(),
            n_null_stats: counts,
            seed: None,
            replicates: None,
        },
        bands,
    })
}

/// Derives the seed of replicate `run` from a master seed.
pub fn replicate_seed(seed: u64, run: usize) -> u64 {
    rng::stream_id(seed, &[run as u64])
}

/// Null design used to calibrate thresholds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NullDesign {
    /// Variant A and variant B, each stationary.
    Dgp1,
    /// The six AR(2) signals, each stationary.
    Dgp2,
}

impl NullDesign {
    pub fn name(self) -> &'static str {
        match self {
            NullDesign::Dgp1 => "dgp1",
            NullDesign::Dgp2 => "dgp2",
        }
    }

    /// One single-segment scenario per series of the design.
    pub fn scenarios(self, epochs: usize, epoch_len: usize, noise: NoiseConvention, rho: f64) -> Vec<Vec<DgpSpec>> {
        let kinds: Vec<DgpKind> = match self {
            NullDesign::Dgp1 => vec![DgpKind::Dgp1A, DgpKind::Dgp1B],
            NullDesign::Dgp2 => (1..=6).map(|index| DgpKind::Dgp2 { index }).collect(),
        };
        kinds
            .into_iter()
            .map(|kind| {
                vec![DgpSpec {
                    noise,
                    rho,
                    ..DgpSpec::new(kind, epochs, epoch_len)
                }]
            })
            .collect()
    }
}

impl std::str::FromStr for NullDesign {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "dgp1" => Ok(NullDesign::Dgp1),
            "dgp2" => Ok(NullDesign::Dgp2),
            _ => Err(Error::invalid(format!("unknown design '{s}', expected dgp1 or dgp2"))),
        }
    }
}

/// KS statistics per band, pooled over `runs` independent simulations of every
/// scenario. Scenario `j` of run `k` is analysed as channel `j` and simulated
/// from `replicate_seed(replicate_seed(seed, k), j)`.
pub fn null_ks_statistics(
    scenarios: &[Vec<DgpSpec>],
    runs: usize,
    seed: u64,
    fs: f64,
    bands: &[BandSpec],
    cfg: &DetectConfig,
) -> Result<BTreeMap<String, Vec<f64>>> {
    if runs == 0 || scenarios.is_empty() {
        return Err(Error::invalid("calibration needs at least one run of one scenario"));
    }
    let mut out: BTreeMap<String, Vec<f64>> = bands.iter().map(|b| (b.name.clone(), Vec::new())).collect();
    for run in 0..runs {
        let s = replicate_seed(seed, run);
        let run_cfg = DetectConfig {
            bootstrap: crate::marginals::BootstrapConfig {
                seed: s,
                ..cfg.bootstrap
            },
            ..cfg.clone()
        };
        for (j, scenario) in scenarios.iter().enumerate() {
            let epochs = simulate_scenario(scenario, replicate_seed(s, j))?;
            for a in analyze_channel(&epochs, fs, bands, &run_cfg, j)? {
                out.get_mut(&a.band.name).expect("band present").extend(a.ks.d);
            }
        }
    }
    Ok(out)
}

/// Outcome of a scenario with known boundaries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerReport {
    pub reports: Vec<ChangepointReport>,
    /// 1-based first epoch of every segment after the first.
    pub boundaries: Vec<usize>,
    /// Per band: the epochs `b − 1` and `b` whose statistic involves the pair
    /// straddling boundary `b`, and whether each was flagged.
    pub boundary_hits: BTreeMap<String, Vec<(usize, bool)>>,
    /// Per band: number of flagged epochs away from every boundary.
    pub false_alarms: BTreeMap<String, usize>,
}

/// Simulates the concatenated `segments` and runs detection on every band.
pub fn power_scenario(
    segments: &[DgpSpec],
    thresholds: &ThresholdTable,
    fs: f64,
    bands: &[BandSpec],
    cfg: &DetectConfig,
    seed: u64,
) -> Result<PowerReport> {
    if segments.len() < 2 {
        return Err(Error::invalid("a power scenario needs at least two segments"));
    }
    let epochs = simulate_scenario(segments, seed)?;
    let mut boundaries = Vec::new();
    let mut acc = 0;
    for seg in &segments[..segments.len() - 1] {
        acc += seg.epochs;
        boundaries.push(acc + 1);
    }
    let analyses = analyze_channel(&epochs, fs, bands, cfg, 0)?;
    let mut reports = Vec::new();
    let mut boundary_hits = BTreeMap::new();
    let mut false_alarms = BTreeMap::new();
    for a in analyses {
        let rep = a.report(thresholds.get(&a.band.name)?, thresholds.meta.alpha);
        let expected: Vec<usize> = boundaries.iter().flat_map(|&b| [b - 1, b]).collect();
        boundary_hits.insert(
            rep.band.clone(),
            expected.iter().map(|&e| (e, rep.flagged_epochs.contains(&e))).collect(),
        );
        false_alarms.insert(
            rep.band.clone(),
            rep.flagged_epochs.iter().filter(|e| !expected.contains(e)).count(),
        );
        reports.push(rep);
    }
    Ok(PowerReport {
        reports,
        boundaries,
        boundary_hits,
        false_alarms,
    })
}
