//! Marginal distributions of band magnitudes.
//!
//! Magnitudes of a single epoch are few (four in the Δ band at 1 Hz
//! resolution), so the marginal of each epoch is estimated from a moving block
//! bootstrap of the underlying time series: every replicate is transformed
//! again, its band magnitudes are rescaled with the caller's global scaling and
//! pooled, and a two-parameter Gamma law is fitted to the pool by maximum
//! likelihood.
//!
//! Rescaled replicate magnitudes can fall at or below zero when a replicate
//! produces a magnitude under the global minimum of the original data. Those
//! values lie outside the Gamma support and are left out of the pool;
//! `n_effective` counts only the values that were used.

use rand::Rng;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::{digamma, gamma_lr, ln_gamma};

use crate::numeric::{bisect_increasing, trigamma};
use crate::rng::{self, tag};
use crate::spectral::{BandSpec, MagnitudeTransform, Scaling};
use crate::{Error, Result};

/// Moving block bootstrap settings: `blocks` blocks of `T / blocks` samples,
/// `replicates` resampled series per epoch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BootstrapConfig {
    pub blocks: usize,
    pub replicates: usize,
    pub seed: u64,
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        Self {
            blocks: 20,
            replicates: 200,
            seed: 0,
        }
    }
}

impl BootstrapConfig {
    pub fn validate(&self, series_len: usize) -> Result<usize> {
        if self.blocks == 0 || self.replicates == 0 {
            return Err(Error::invalid("bootstrap needs at least one block and one replicate"));
        }
        if series_len % self.blocks != 0 {
            return Err(Error::invalid(format!(
                "{} blocks do not divide a series of {series_len} samples",
                self.blocks
            )));
        }
        Ok(series_len / self.blocks)
    }
}

/// Coordinates that select the random stream of one bootstrap task.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct TaskKey {
    pub channel: u64,
    pub epoch: u64,
}

/// Draws `cfg.replicates` moving-block resamples of `series`.
///
/// Each replicate concatenates `cfg.blocks` runs of `T / blocks` consecutive
/// samples whose start is uniform over all `T - T/blocks + 1` admissible
/// offsets. Replicate `b` uses the stream keyed by `(task, b)`.
pub fn moving_block_bootstrap(series: &[f64], cfg: &BootstrapConfig, task: TaskKey) -> Result<Vec<Vec<f64>>> {
    let block_len = cfg.validate(series.len())?;
    Ok((0..cfg.replicates)
        .map(|b| bootstrap_replicate(series, cfg, block_len, task, b))
        .collect())
}

fn bootstrap_replicate(series: &[f64], cfg: &BootstrapConfig, block_len: usize, task: TaskKey, b: usize) -> Vec<f64> {
    let mut rng = rng::stream(cfg.seed, tag::BOOTSTRAP, &[task.channel, task.epoch, b as u64]);
    let starts = series.len() - block_len + 1;
    let mut out = Vec::with_capacity(series.len());
    for _ in 0..cfg.blocks {
        let s = rng.random_range(0..starts);
        out.extend_from_slice(&series[s..s + block_len]);
    }
    out
}

/// Gamma law with density `rate^shape x^(shape-1) e^(-rate x) / Γ(shape)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GammaFit {
    pub shape: f64,
    pub rate: f64,
    pub n_effective: usize,
    pub loglik: f64,
}

impl GammaFit {
    pub fn new(shape: f64, rate: f64) -> Result<Self> {
        if !(shape > 0.0 && rate > 0.0 && shape.is_finite() && rate.is_finite()) {
            return Err(Error::invalid(format!("invalid Gamma parameters ({shape}, {rate})")));
        }
        Ok(Self {
            shape,
            rate,
            n_effective: 0,
            loglik: f64::NAN,
        })
    }

    /// Regularised lower incomplete gamma `P(shape, rate·x)`; zero for `x ≤ 0`.
    pub fn cdf(&self, x: f64) -> f64 {
        if x <= 0.0 {
            0.0
        } else if x.is_infinite() {
            1.0
        } else {
            gamma_lr(self.shape, self.rate * x)
        }
    }

    pub fn ln_pdf(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return f64::NEG_INFINITY;
        }
        self.shape * self.rate.ln() - ln_gamma(self.shape) + (self.shape - 1.0) * x.ln() - self.rate * x
    }

    pub fn loglik_of(&self, samples: &[f64]) -> f64 {
        samples.iter().map(|&x| self.ln_pdf(x)).sum()
    }
}

/// CDF of a fitted Gamma marginal.
pub fn gamma_cdf(fit: &GammaFit, x: f64) -> f64 {
    fit.cdf(x)
}

fn check_positive_sample(samples: &[f64]) -> Result<(f64, f64)> {
    if samples.len() < 10 {
        return Err(Error::invalid(format!(
            "maximum likelihood fit needs at least 10 samples, got {}",
            samples.len()
        )));
    }
    let mut min = f64::INFINITY;
    let mut max = f64::NEG_INFINITY;
    for &x in samples {
        if !(x > 0.0 && x.is_finite()) {
            return Err(Error::invalid(format!("samples must be positive and finite, found {x}")));
        }
        min = min.min(x);
        max = max.max(x);
    }
    if min == max {
        return Err(Error::Degenerate(format!("all {} samples equal {min}", samples.len())));
    }
    Ok((min, max))
}

/// Gamma maximum likelihood estimate.
///
/// The rate is profiled out (`rate = shape / mean`) and the shape solves
/// `ln ν − ψ(ν) = ln(mean) − mean(ln x)` by Newton's method, starting from
/// Minka's closed-form approximation and halving any step that would leave
/// the positive half-line. Iteration stops once `|Δν|/ν < 1e-10`.
pub fn fit_gamma_mle(samples: &[f64]) -> Result<GammaFit> {
    check_positive_sample(samples)?;
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let mean_ln = samples.iter().map(|x| x.ln()).sum::<f64>() / n;
    let s = mean.ln() - mean_ln;
    if s <= 0.0 {
        return Err(Error::Degenerate("sample has no spread on the log scale".into()));
    }
    let mut shape = (3.0 - s + ((s - 3.0) * (s - 3.0) + 24.0 * s).sqrt()) / (12.0 * s);
    const MAX_ITER: usize = 100;
    let mut converged = false;
    for _ in 0..MAX_ITER {
        let f = shape.ln() - digamma(shape) - s;
        let df = 1.0 / shape - trigamma(shape);
        let mut next = shape - f / df;
        while next <= 0.0 {
            next = 0.5 * (shape + next.max(0.0));
            if next <= 0.0 {
                next = shape * 0.5;
            }
        }
        let rel = ((next - shape) / shape).abs();
        shape = next;
        if rel < 1e-10 {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::NoConvergence {
            what: "Gamma shape Newton iteration",
            iterations: MAX_ITER,
        });
    }
    let rate = shape / mean;
    let loglik = n * (shape * rate.ln() - ln_gamma(shape) + (shape - 1.0) * mean_ln - rate * mean);
    Ok(GammaFit {
        shape,
        rate,
        n_effective: samples.len(),
        loglik,
    })
}

/// Two-parameter Weibull law with CDF `1 − exp(−(x/scale)^shape)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeibullFit {
    pub shape: f64,
    pub scale: f64,
    pub n_effective: usize,
    pub loglik: f64,
}

impl WeibullFit {
    pub fn cdf(&self, x: f64) -> f64 {
        if x <= 0.0 {
            0.0
        } else {
            -(-(x / self.scale).powf(self.shape)).exp_m1()
        }
    }
}

/// Weibull maximum likelihood estimate; the shape solves the profile score
/// equation by bisection on `ln k`.
pub fn fit_weibull_mle(samples: &[f64]) -> Result<WeibullFit> {
    let (_, max) = check_positive_sample(samples)?;
    let n = samples.len() as f64;
    // work with x / max to keep powers bounded
    let z: Vec<f64> = samples.iter().map(|&x| x / max).collect();
    let ln_z: Vec<f64> = z.iter().map(|x| x.ln()).collect();
    let mean_ln_z = ln_z.iter().sum::<f64>() / n;
    let score = |log_k: f64| {
        let k = log_k.exp();
        let (mut a, mut b) = (0.0, 0.0);
        for (&zi, &li) in z.iter().zip(&ln_z) {
            let p = zi.powf(k);
            a += p * li;
            b += p;
        }
        a / b - 1.0 / k - mean_ln_z
    };
    let log_k = bisect_increasing(score, 0.0, (1e-3f64).ln(), (1e3f64).ln(), 1e-12);
    let k = log_k.exp();
    let mean_pow = z.iter().map(|zi| zi.powf(k)).sum::<f64>() / n;
    let scale = max * mean_pow.powf(1.0 / k);
    let sum_ln_x: f64 = samples.iter().map(|x| x.ln()).sum();
    let loglik = n * k.ln() - n * k * scale.ln() + (k - 1.0) * sum_ln_x
        - samples.iter().map(|&x| (x / scale).powf(k)).sum::<f64>();
    Ok(WeibullFit {
        shape: k,
        scale,
        n_effective: samples.len(),
        loglik,
    })
}

/// Which parametric family models a marginal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MarginalFamily {
    #[default]
    Gamma,
    Weibull,
    /// Fit both and keep the one with the lower BIC.
    BestBic,
}

/// A fitted univariate marginal.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum Marginal {
    Gamma(GammaFit),
    Weibull(WeibullFit),
    /// Identity on `[0, 1]`; used to compare bare copulas.
    Uniform,
}

impl Marginal {
    pub fn cdf(&self, x: f64) -> f64 {
        match self {
            Marginal::Gamma(g) => g.cdf(x),
            Marginal::Weibull(w) => w.cdf(x),
            Marginal::Uniform => x.clamp(0.0, 1.0),
        }
    }

    pub fn as_gamma(&self) -> Option<&GammaFit> {
        match self {
            Marginal::Gamma(g) => Some(g),
            _ => None,
        }
    }
}

fn bic(loglik: f64, params: f64, n: usize) -> f64 {
    -2.0 * loglik + params * (n as f64).ln()
}

/// Fits `samples` with the requested family.
pub fn fit_marginal(samples: &[f64], family: MarginalFamily) -> Result<Marginal> {
    match family {
        MarginalFamily::Gamma => fit_gamma_mle(samples).map(Marginal::Gamma),
        MarginalFamily::Weibull => fit_weibull_mle(samples).map(Marginal::Weibull),
        MarginalFamily::BestBic => {
            let g = fit_gamma_mle(samples)?;
            let w = fit_weibull_mle(samples)?;
            // equal parameter counts: ties go to Gamma
            if bic(w.loglik, 2.0, w.n_effective) < bic(g.loglik, 2.0, g.n_effective) {
                Ok(Marginal::Weibull(w))
            } else {
                Ok(Marginal::Gamma(g))
            }
        }
    }
}

/// Bootstraps one epoch and fits a marginal per band in one pass.
///
/// `band_bins[j]` are the DFT bins of band `j` and `scalings[j]` its global
/// scaling. Every replicate is transformed once and shared by all bands.
pub fn bootstrap_marginals(
    epoch: &[f64],
    transform: &MagnitudeTransform,
    band_bins: &[Vec<usize>],
    scalings: &[Scaling],
    cfg: &BootstrapConfig,
    family: MarginalFamily,
    task: TaskKey,
) -> Result<Vec<Marginal>> {
    let pools = bootstrap_pools(epoch, transform, band_bins, scalings, cfg, task)?;
    pools.iter().map(|p| fit_marginal(p, family)).collect()
}

/// The pooled, rescaled, strictly positive bootstrap magnitudes per band.
pub fn bootstrap_pools(
    epoch: &[f64],
    transform: &MagnitudeTransform,
    band_bins: &[Vec<usize>],
    scalings: &[Scaling],
    cfg: &BootstrapConfig,
    task: TaskKey,
) -> Result<Vec<Vec<f64>>> {
    if band_bins.len() != scalings.len() {
        return Err(Error::DimensionMismatch("one scaling per band required".into()));
    }
    let block_len = cfg.validate(epoch.len())?;
    let mut pools: Vec<Vec<f64>> = band_bins
        .iter()
        .map(|b| Vec::with_capacity(b.len() * cfg.replicates))
        .collect();
    for b in 0..cfg.replicates {
        let rep = bootstrap_replicate(epoch, cfg, block_len, task, b);
        let mags = transform.magnitudes(&rep)?;
        for ((pool, bins), scaling) in pools.iter_mut().zip(band_bins).zip(scalings) {
            pool.extend(bins.iter().map(|&k| scaling.apply(mags[k])).filter(|&y| y > 0.0));
        }
    }
    Ok(pools)
}

/// Single-band form of [`bootstrap_marginals`] with a Gamma marginal.
pub fn bootstrap_gamma_marginal(
    epoch: &[f64],
    band: &BandSpec,
    sampling_rate_hz: f64,
    cfg: &BootstrapConfig,
    scaling: Scaling,
    task: TaskKey,
) -> Result<GammaFit> {
    let transform = MagnitudeTransform::new(epoch.len())?;
    let bins = band.bins(epoch.len(), sampling_rate_hz)?;
    let fits = bootstrap_marginals(
        epoch,
        &transform,
        &[bins],
        &[scaling],
        cfg,
        MarginalFamily::Gamma,
        task,
    )?;
    Ok(*fits[0].as_gamma().expect("Gamma requested"))
}

/// Density `(2x/λ) exp(−x²/λ)` of the square root of an exponential variable
/// with mean `λ`, the large-sample law of a DFT magnitude whose periodogram
/// has mean `λ`.
pub fn asymptotic_magnitude_pdf(lambda: f64, x: f64) -> Result<f64> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::invalid(format!("lambda must be positive, got {lambda}")));
    }
    Ok(if x > 0.0 {
        2.0 * x / lambda * (-x * x / lambda).exp()
    } else {
        0.0
    })
}

/// CDF matching [`asymptotic_magnitude_pdf`]: `1 − exp(−x²/λ)` for `x > 0`.
pub fn asymptotic_magnitude_cdf(lambda: f64, x: f64) -> Result<f64> {
    asymptotic_magnitude_pdf(lambda, 1.0)?;
    Ok(if x > 0.0 { -(-x * x / lambda).exp_m1() } else { 0.0 })
}
