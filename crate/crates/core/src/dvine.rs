//! D-vine copulas over epochs and Clarke's sign test.
//!
//! Each epoch of a range is one variable and each Fourier frequency of a band
//! is one observation. The first tree joins consecutive epochs. Tree `ℓ + 1`
//! works on conditional pseudo-observations produced by the h-functions of
//! tree `ℓ`. Trees deeper than the truncation level are independent.

use std::ops::Range;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::copula::{copula_loglik, select_family_with, CopulaFamily, CopulaModel, Pair, ThetaMethod, PSEUDO_OBS_EPS};
use crate::ks_change::{band_marginals, DetectConfig};
use crate::marginals::Marginal;
use crate::numeric::binomial_cdf;
use crate::spectral::BandSpec;
use crate::{Error, Result};

/// A fitted, possibly truncated, D-vine.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DVineModel {
    /// Epoch index (0-based) of each variable, in vine order.
    pub order: Vec<usize>,
    /// `trees[ℓ − 1][k]` joins variables `k` and `k + ℓ` given those in between.
    pub trees: Vec<Vec<CopulaModel>>,
    pub truncation_level: usize,
    /// Marginal law of each variable when the vine was fitted on magnitudes.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub marginals: Vec<Marginal>,
    /// Copula log-likelihood accumulated while fitting.
    pub loglik: f64,
    pub n_obs: usize,
}

impl DVineModel {
    pub fn n_vars(&self) -> usize {
        self.order.len()
    }
}

fn clamp(x: f64) -> f64 {
    x.clamp(PSEUDO_OBS_EPS, 1.0 - PSEUDO_OBS_EPS)
}

fn check_data(columns: &[Vec<f64>]) -> Result<usize> {
    if columns.len() < 2 {
        return Err(Error::invalid(format!("a vine needs at least 2 variables, got {}", columns.len())));
    }
    let n = columns[0].len();
    if n < 4 {
        return Err(Error::invalid(format!("a vine needs at least 4 observations, got {n}")));
    }
    for (j, c) in columns.iter().enumerate() {
        if c.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "variable {j} has {} observations, variable 0 has {n}",
                c.len()
            )));
        }
        if let Some(x) = c.iter().find(|x| !(0.0..=1.0).contains(*x)) {
            return Err(Error::Degenerate(format!("variable {j} has pseudo-observation {x} outside [0, 1]")));
        }
    }
    Ok(n)
}

/// Arguments of the next tree: `F(u_k | between)` and `F(u_{k+ℓ+1} | between)`.
/// Every family in the panel is exchangeable, so `∂C(a, b)/∂a = h(b | a)`.
fn next_level(models: &[CopulaModel], fwd: &[Vec<f64>], bwd: &[Vec<f64>]) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let m = models.len() - 1;
    (0..m)
        .into_par_iter()
        .map(|k| {
            let a: Vec<f64> = fwd[k].iter().zip(&bwd[k]).map(|(&a, &b)| models[k].h(a, b)).collect();
            let b: Vec<f64> = fwd[k + 1]
                .iter()
                .zip(&bwd[k + 1])
                .map(|(&a, &b)| models[k + 1].h(b, a))
                .collect();
            (a, b)
        })
        .unzip()
}

fn pairs_of(a: &[f64], b: &[f64]) -> Vec<Pair> {
    a.iter().zip(b).map(|(&x, &y)| (x, y)).collect()
}

/// Sequential fit: every pair copula is chosen by AIC over `panel` with
/// maximum likelihood parameters. `columns[j]` holds the pseudo-observations
/// of variable `j`.
pub fn build_dvine(columns: &[Vec<f64>], truncation_level: usize, panel: &[CopulaFamily]) -> Result<DVineModel> {
    let n = check_data(columns)?;
    if truncation_level == 0 {
        return Err(Error::invalid("truncation level must be at least 1"));
    }
    let depth = truncation_level.min(columns.len() - 1);
    let mut fwd: Vec<Vec<f64>> = columns[..columns.len() - 1].to_vec();
    let mut bwd: Vec<Vec<f64>> = columns[1..].to_vec();
    let mut trees = Vec::with_capacity(depth);
    let mut loglik = 0.0;
    for level in 1..=depth {
        let fits: Vec<(CopulaModel, f64)> = fwd
            .par_iter()
            .zip(&bwd)
            .map(|(a, b)| {
                let pairs = pairs_of(a, b);
                let sel = select_family_with(&pairs, panel, ThetaMethod::Mle)?;
                Ok((sel.model, copula_loglik(&sel.model, &pairs)))
            })
            .collect::<Result<_>>()?;
        loglik += fits.iter().map(|f| f.1).sum::<f64>();
        let models: Vec<CopulaModel> = fits.into_iter().map(|f| f.0).collect();
        if level < depth {
            (fwd, bwd) = next_level(&models, &fwd, &bwd);
        }
        trees.push(models);
    }
    Ok(DVineModel {
        order: (0..columns.len()).collect(),
        trees,
        truncation_level,
        marginals: Vec::new(),
        loglik,
        n_obs: n,
    })
}

/// Log vine density at every observation.
pub fn dvine_loglik_pointwise(model: &DVineModel, columns: &[Vec<f64>]) -> Result<Vec<f64>> {
    if columns.len() != model.n_vars() {
        return Err(Error::DimensionMismatch(format!(
            "model has {} variables, data has {}",
            model.n_vars(),
            columns.len()
        )));
    }
    let n = check_data(columns)?;
    let out = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut fwd: Vec<f64> = columns[..columns.len() - 1].iter().map(|c| c[i]).collect();
            let mut bwd: Vec<f64> = columns[1..].iter().map(|c| c[i]).collect();
            let mut total = 0.0;
            for (t, models) in model.trees.iter().enumerate() {
                for (k, m) in models.iter().enumerate() {
                    if m.family != CopulaFamily::Independent {
                        total += m.ln_pdf(clamp(fwd[k]), clamp(bwd[k]));
                    }
                }
                if t + 1 < model.trees.len() {
                    let len = models.len() - 1;
                    let a: Vec<f64> = (0..len).map(|k| models[k].h(fwd[k], bwd[k])).collect();
                    let b: Vec<f64> = (0..len).map(|k| models[k + 1].h(bwd[k + 1], fwd[k + 1])).collect();
                    fwd = a;
                    bwd = b;
                }
            }
            total
        })
        .collect();
    Ok(out)
}

/// Outcome of Clarke's test. Only `xi`, `n` and `p_value` are serialized.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClarkeResult {
    pub xi: u64,
    pub n: u64,
    pub p_value: f64,
    #[serde(skip)]
    pub m: Vec<f64>,
}

/// Two-sided exact binomial p-value `2 min(P(X ≤ ξ), P(X ≥ ξ))` under
/// `Bin(n, 1/2)`, capped at 1.
pub fn clarke_p_value(n: u64, xi: u64) -> f64 {
    // P(X ≥ ξ) = P(X ≤ n − ξ) by symmetry
    let lower = binomial_cdf(n, xi, 0.5);
    let upper = binomial_cdf(n, n - xi, 0.5);
    (2.0 * lower.min(upper)).min(1.0)
}

/// Sign test on `m_i = loglik_1[i] − loglik_2[i]`. `ξ` counts strictly positive
/// differences, so ties count as non-exceedances. When every difference is
/// exactly zero the two models are indistinguishable and `p = 1`.
pub fn clarke_test(loglik_1: &[f64], loglik_2: &[f64]) -> Result<ClarkeResult> {
    if loglik_1.len() != loglik_2.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} vs {} log-likelihood values",
            loglik_1.len(),
            loglik_2.len()
        )));
    }
    if loglik_1.is_empty() {
        return Err(Error::invalid("Clarke's test needs at least one observation"));
    }
    let m: Vec<f64> = loglik_1.iter().zip(loglik_2).map(|(a, b)| a - b).collect();
    let n = m.len() as u64;
    let xi = m.iter().filter(|&&x| x > 0.0).count() as u64;
    let p_value = if m.iter().all(|&x| x == 0.0) { 1.0 } else { clarke_p_value(n, xi) };
    Ok(ClarkeResult { xi, n, p_value, m })
}

/// Which observations each vine density is evaluated on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Evaluation {
    /// Each vine on the pseudo-observations of the range it was fitted to,
    /// aligned by frequency index.
    #[default]
    OwnRange,
    /// Both vines on the pseudo-observations of the first range.
    FirstRange,
}

/// Settings shared by both comparison workflows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareConfig {
    pub detect: DetectConfig,
    pub truncation_level: usize,
    pub evaluation: Evaluation,
}

impl Default for CompareConfig {
    fn default() -> Self {
        Self {
            detect: DetectConfig::default(),
            truncation_level: 2,
            evaluation: Evaluation::OwnRange,
        }
    }
}

/// Pseudo-observations `Γ^{(r)}(δ^{(r)}_i)`, one column per epoch.
pub fn pseudo_observations(magnitudes: &[Vec<f64>], marginals: &[Marginal]) -> Vec<Vec<f64>> {
    magnitudes
        .iter()
        .zip(marginals)
        .map(|(m, g)| m.iter().map(|&x| g.cdf(x)).collect())
        .collect()
}

fn fit_range(columns: &[Vec<f64>], marginals: &[Marginal], range: Range<usize>, cfg: &CompareConfig) -> Result<DVineModel> {
    let mut vine = build_dvine(&columns[range.clone()], cfg.truncation_level, &cfg.detect.panel)?;
    vine.order = range.clone().collect();
    vine.marginals = marginals[range].to_vec();
    Ok(vine)
}

/// Fits a vine to each data set and runs Clarke's test on the pointwise
/// log-densities chosen by `evaluation`.
pub fn compare_vines(
    first: &[Vec<f64>],
    vine_1: &DVineModel,
    second: &[Vec<f64>],
    vine_2: &DVineModel,
    evaluation: Evaluation,
) -> Result<ClarkeResult> {
    let l1 = dvine_loglik_pointwise(vine_1, first)?;
    let l2 = match evaluation {
        Evaluation::OwnRange => dvine_loglik_pointwise(vine_2, second)?,
        Evaluation::FirstRange => dvine_loglik_pointwise(vine_2, first)?,
    };
    clarke_test(&l1, &l2)
}

fn check_range(name: &str, r: &Range<usize>, epochs: usize) -> Result<()> {
    if r.is_empty() || r.end > epochs {
        return Err(Error::invalid(format!(
            "{name} epoch range {}..{} must be nonempty and within 0..{epochs}",
            r.start, r.end
        )));
    }
    Ok(())
}

/// Pre versus post comparison on one channel and band. Ranges are 0-based
/// half-open epoch ranges of equal length that must not overlap.
pub fn compare_prepost<E: AsRef<[f64]> + Sync>(
    epochs: &[E],
    sampling_rate_hz: f64,
    band: &BandSpec,
    pre: Range<usize>,
    post: Range<usize>,
    cfg: &CompareConfig,
    channel: usize,
) -> Result<ClarkeResult> {
    check_range("pre", &pre, epochs.len())?;
    check_range("post", &post, epochs.len())?;
    if pre.len() != post.len() {
        return Err(Error::invalid(format!(
            "pre and post ranges differ in length ({} vs {})",
            pre.len(),
            post.len()
        )));
    }
    if pre.start < post.end && post.start < pre.end {
        return Err(Error::invalid("pre and post epoch ranges overlap"));
    }
    let (mags, marginals) = band_marginals(epochs, sampling_rate_hz, band, &cfg.detect, channel)?;
    let u = pseudo_observations(&mags, &marginals);
    let v1 = fit_range(&u, &marginals, pre.clone(), cfg)?;
    let v2 = fit_range(&u, &marginals, post.clone(), cfg)?;
    compare_vines(&u[pre], &v1, &u[post], &v2, cfg.evaluation)
}

/// Channel versus channel comparison over the same epoch range.
pub fn compare_channels<E: AsRef<[f64]> + Sync>(
    epochs_a: &[E],
    epochs_b: &[E],
    sampling_rate_hz: f64,
    band: &BandSpec,
    range: Range<usize>,
    cfg: &CompareConfig,
    channels: (usize, usize),
) -> Result<ClarkeResult> {
    if channels.0 == channels.1 {
        return Err(Error::invalid(format!("cannot compare channel {} with itself", channels.0)));
    }
    check_range("channel", &range, epochs_a.len().min(epochs_b.len()))?;
    let (ma, ga) = band_marginals(epochs_a, sampling_rate_hz, band, &cfg.detect, channels.0)?;
    let (mb, gb) = band_marginals(epochs_b, sampling_rate_hz, band, &cfg.detect, channels.1)?;
    let ua = pseudo_observations(&ma, &ga);
    let ub = pseudo_observations(&mb, &gb);
    let va = fit_range(&ua, &ga, range.clone(), cfg)?;
    let vb = fit_range(&ub, &gb, range.clone(), cfg)?;
    compare_vines(&ua[range.clone()], &va, &ub[range], &vb, cfg.evaluation)
}

/// All pairwise channel comparisons, upper triangle in row-major order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelMatrix {
    pub channels: Vec<usize>,
    pub results: Vec<PairResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairResult {
    pub a: usize,
    pub b: usize,
    #[serde(flatten)]
    pub result: ClarkeResult,
}

impl ChannelMatrix {
    /// Long format: `a,b,xi,n,p_value`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("a,b,xi,n,p_value\n");
        for r in &self.results {
            s.push_str(&format!("{},{},{},{},{}\n", r.a, r.b, r.result.xi, r.result.n, r.result.p_value));
        }
        s
    }

    /// Square layout with `xi (p=…)` above the diagonal.
    pub fn to_matrix_csv(&self) -> String {
        let mut s = String::from("channel");
        for c in &self.channels {
            s.push_str(&format!(",{c}"));
        }
        s.push('\n');
        for &row in &self.channels {
            s.push_str(&row.to_string());
            for &col in &self.channels {
                let cell = self
                    .results
                    .iter()
                    .find(|r| r.a == row && r.b == col)
                    .map(|r| format!("{} (p={:.4})", r.result.xi, r.result.p_value))
                    .unwrap_or_default();
                s.push(',');
                s.push_str(&cell);
            }
            s.push('\n');
        }
        s
    }
}

/// Every pair of `channels`: `data[j]` holds the epochs of `channels[j]`.
pub fn compare_channel_matrix<E: AsRef<[f64]> + Sync>(
    data: &[Vec<E>],
    channels: &[usize],
    sampling_rate_hz: f64,
    band: &BandSpec,
    range: Range<usize>,
    cfg: &CompareConfig,
) -> Result<ChannelMatrix> {
    if data.len() != channels.len() {
        return Err(Error::DimensionMismatch("one epoch list per channel required".into()));
    }
    let fitted: Vec<(Vec<Vec<f64>>, DVineModel)> = data
        .iter()
        .zip(channels)
        .map(|(epochs, &ch)| {
            check_range("channel", &range, epochs.len())?;
            let (m, g) = band_marginals(epochs, sampling_rate_hz, band, &cfg.detect, ch)?;
            let u = pseudo_observations(&m, &g);
            let vine = fit_range(&u, &g, range.clone(), cfg)?;
            Ok((u[range.clone()].to_vec(), vine))
        })
        .collect::<Result<_>>()?;
    let mut results = Vec::new();
    for i in 0..channels.len() {
        for j in i + 1..channels.len() {
            if channels[i] == channels[j] {
                return Err(Error::invalid(format!("channel {} listed twice", channels[i])));
            }
            let result = compare_vines(&fitted[i].0, &fitted[i].1, &fitted[j].0, &fitted[j].1, cfg.evaluation)?;
            results.push(PairResult {
                a: channels[i],
                b: channels[j],
                result,
            });
        }
    }
    Ok(ChannelMatrix {
        channels: channels.to_vec(),
        results,
    })
}
