//! Rank correlation, likelihood, parameter estimation, family selection and
//! Kullback-Leibler discrepancy.

use serde::{Deserialize, Serialize};

use super::sample::sample_with;
use super::tau::tau_to_theta;
use super::{CopulaFamily, CopulaModel, Pair, ThetaSource, PSEUDO_OBS_EPS};
use crate::numeric::golden_max;
use crate::rng::{self, tag};
use crate::{Error, Result};

/// Largest |τ̂| passed to the inversion; keeps parameters finite when the
/// sample is perfectly concordant.
pub const TAU_CLAMP: f64 = 0.99;

/// Kendall's tau-a: `(concordant − discordant) / C(n, 2)`. Tied pairs count
/// as neither. Knight's O(n log n) algorithm.
pub fn kendall_tau_empirical(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch(format!("{} x values, {} y values", x.len(), y.len())));
    }
    let n = x.len();
    if n < 2 {
        return Err(Error::invalid("Kendall's tau needs at least two observations"));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&i, &j| x[i].total_cmp(&x[j]).then(y[i].total_cmp(&y[j])));
    let n0 = (n as u64 * (n as u64 - 1)) / 2;

    let mut n1 = 0u64;
    let mut n3 = 0u64;
    let (mut run_x, mut run_xy) = (1u64, 1u64);
    for w in 1..n {
        let (a, b) = (idx[w - 1], idx[w]);
        if x[a] == x[b] {
            run_x += 1;
            if y[a] == y[b] {
                run_xy += 1;
            } else {
                n3 += run_xy * (run_xy - 1) / 2;
                run_xy = 1;
            }
        } else {
            n1 += run_x * (run_x - 1) / 2;
            n3 += run_xy * (run_xy - 1) / 2;
            run_x = 1;
            run_xy = 1;
        }
    }
    n1 += run_x * (run_x - 1) / 2;
    n3 += run_xy * (run_xy - 1) / 2;

    let mut ys: Vec<f64> = idx.iter().map(|&i| y[i]).collect();
    let mut buf = vec![0.0; n];
    let swaps = merge_count(&mut ys, &mut buf);

    let mut n2 = 0u64;
    let mut run = 1u64;
    for w in 1..n {
        if ys[w] == ys[w - 1] {
            run += 1;
        } else {
            n2 += run * (run - 1) / 2;
            run = 1;
        }
    }
    n2 += run * (run - 1) / 2;

    let diff = n0 as i128 - n1 as i128 - n2 as i128 + n3 as i128 - 2 * swaps as i128;
    Ok(diff as f64 / n0 as f64)
}

/// Sorts `v` ascending and returns the number of strict inversions.
fn merge_count(v: &mut [f64], buf: &mut [f64]) -> u64 {
    let n = v.len();
    if n < 2 {
        return 0;
    }
    let mid = n / 2;
    let mut swaps = {
        let (l, r) = v.split_at_mut(mid);
        let (bl, br) = buf.split_at_mut(mid);
        merge_count(l, bl) + merge_count(r, br)
    };
    let (mut i, mut j, mut k) = (0, mid, 0);
    while i < mid && j < n {
        if v[j] < v[i] {
            buf[k] = v[j];
            swaps += (mid - i) as u64;
            j += 1;
        } else {
            buf[k] = v[i];
            i += 1;
        }
        k += 1;
    }
    buf[k..k + mid - i].copy_from_slice(&v[i..mid]);
    k += mid - i;
    buf[k..k + n - j].copy_from_slice(&v[j..n]);
    v.copy_from_slice(&buf[..n]);
    swaps
}

fn clamp_obs(x: f64) -> f64 {
    x.clamp(PSEUDO_OBS_EPS, 1.0 - PSEUDO_OBS_EPS)
}

/// `Σ log c(u, v)` with pseudo-observations clamped into `[ε, 1 − ε]`.
pub fn copula_loglik(model: &CopulaModel, pairs: &[Pair]) -> f64 {
    if model.family == CopulaFamily::Independent {
        return 0.0;
    }
    pairs
        .iter()
        .map(|&(u, v)| model.ln_pdf(clamp_obs(u), clamp_obs(v)))
        .sum()
}

/// Search interval and map from the search coordinate to `θ`.
fn parametrization(family: CopulaFamily) -> (f64, f64, fn(f64) -> f64) {
    match family {
        CopulaFamily::Clayton => ((1e-4f64).ln(), 300f64.ln(), f64::exp),
        CopulaFamily::Gumbel | CopulaFamily::Joe | CopulaFamily::SurvivalJoe => {
            ((1e-6f64).ln(), 100f64.ln(), |s: f64| 1.0 + s.exp())
        }
        CopulaFamily::Frank => ((-500f64).asinh(), 500f64.asinh(), f64::sinh),
        CopulaFamily::Independent => unreachable!(),
    }
}

fn loglik_at(family: CopulaFamily, theta: f64, pairs: &[Pair]) -> f64 {
    match CopulaModel::new(family, theta) {
        Ok(m) => {
            let ll = copula_loglik(&m, pairs);
            if ll.is_nan() {
                f64::NEG_INFINITY
            } else {
                ll
            }
        }
        Err(_) => f64::NEG_INFINITY,
    }
}

/// Maximum likelihood parameter. A coarse scan of the (transformed) domain
/// brackets the maximum, which golden-section search then refines to `1e-8`.
/// Independent has no parameter and returns `Ok(None)`.
pub fn mle_theta(family: CopulaFamily, pairs: &[Pair]) -> Result<Option<f64>> {
    if family == CopulaFamily::Independent {
        return Ok(None);
    }
    if pairs.len() < 4 {
        return Err(Error::invalid(format!("need at least 4 pairs, got {}", pairs.len())));
    }
    let (lo, hi, to_theta) = parametrization(family);
    let objective = |s: f64| loglik_at(family, to_theta(s), pairs);
    const GRID: usize = 64;
    let step = (hi - lo) / GRID as f64;
    let values: Vec<f64> = (0..=GRID).map(|i| objective(lo + step * i as f64)).collect();
    let best = (0..=GRID)
        .max_by(|&a, &b| values[a].total_cmp(&values[b]).then(b.cmp(&a)))
        .expect("non-empty grid");
    let a = lo + step * best.saturating_sub(1) as f64;
    let b = lo + step * (best + 1).min(GRID) as f64;
    let (s, _) = golden_max(objective, a, b, 1e-8)?;
    Ok(Some(to_theta(s)))
}

/// Parameter estimator used during family selection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThetaMethod {
    #[default]
    TauInversion,
    Mle,
}

/// One family's fit during selection.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub family: CopulaFamily,
    pub theta: Option<f64>,
    pub loglik: f64,
    pub aic: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    pub model: CopulaModel,
    pub tau_hat: f64,
    pub candidates: Vec<Candidate>,
}

fn feasible(family: CopulaFamily, tau: f64) -> bool {
    match family {
        CopulaFamily::Independent => true,
        CopulaFamily::Frank => tau != 0.0,
        _ => tau > 0.0,
    }
}

/// AIC selection with `θ` from tau inversion.
pub fn select_family(pairs: &[Pair], panel: &[CopulaFamily]) -> Result<CopulaModel> {
    select_family_with(pairs, panel, ThetaMethod::TauInversion).map(|s| s.model)
}

/// AIC selection over the families of `panel` that can reproduce the sign of
/// the sample's Kendall tau. Ties go to the earlier family in the canonical
/// panel order.
pub fn select_family_with(pairs: &[Pair], panel: &[CopulaFamily], method: ThetaMethod) -> Result<Selection> {
    if pairs.len() < 4 {
        return Err(Error::invalid(format!("need at least 4 pairs, got {}", pairs.len())));
    }
    let (u, v): (Vec<f64>, Vec<f64>) = pairs.iter().copied().unzip();
    let tau_hat = kendall_tau_empirical(&u, &v)?;
    select_family_given_tau(pairs, tau_hat, panel, method)
}

/// As [`select_family_with`], with Kendall's tau supplied by the caller (for
/// instance computed on the raw data rather than on pseudo-observations).
pub fn select_family_given_tau(
    pairs: &[Pair],
    tau_hat: f64,
    panel: &[CopulaFamily],
    method: ThetaMethod,
) -> Result<Selection> {
    if pairs.len() < 4 {
        return Err(Error::invalid(format!("need at least 4 pairs, got {}", pairs.len())));
    }
    let tau = tau_hat.clamp(-TAU_CLAMP, TAU_CLAMP);
    let mut families: Vec<CopulaFamily> = panel.to_vec();
    families.sort();
    families.dedup();

    let mut candidates = Vec::new();
    for family in families.into_iter().filter(|&f| feasible(f, tau)) {
        let (theta, source) = match method {
            ThetaMethod::TauInversion => (tau_to_theta(family, tau)?, ThetaSource::TauInversion),
            ThetaMethod::Mle => (mle_theta(family, pairs)?, ThetaSource::Mle),
        };
        let model = match theta {
            Some(t) => CopulaModel::new(family, t)?.with_source(source),
            None => CopulaModel::independent(),
        };
        let loglik = copula_loglik(&model, pairs);
        let aic = -2.0 * loglik + 2.0 * model.family.n_params() as f64;
        candidates.push((model, Candidate { family, theta, loglik, aic }));
    }
    let mut best: Option<&(CopulaModel, Candidate)> = None;
    for c in &candidates {
        if !c.1.aic.is_nan() && best.is_none_or(|b| c.1.aic < b.1.aic) {
            best = Some(c);
        }
    }
    let model = best
        .map(|b| b.0)
        .ok_or_else(|| Error::Degenerate("no family in the panel can be fitted".into()))?;
    Ok(Selection {
        model,
        tau_hat,
        candidates: candidates.into_iter().map(|c| c.1).collect(),
    })
}

/// Monte Carlo estimate of `E_true[log c_true − log c_fitted]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KlicEstimate {
    pub value: f64,
    pub std_error: f64,
    pub n_mc: usize,
}

/// Averages `log(c_true / c_fitted)` over `n_mc` draws from `true_model`.
/// The mean is reported as is, so identical models give exactly zero and a
/// near-zero discrepancy may come out slightly negative.
pub fn klic_estimate(true_model: &CopulaModel, fitted: &CopulaModel, n_mc: usize, seed: u64) -> Result<KlicEstimate> {
    true_model.validate()?;
    fitted.validate()?;
    if n_mc < 1000 {
        return Err(Error::invalid(format!("n_mc must be at least 1000, got {n_mc}")));
    }
    let mut rng = rng::stream(seed, tag::KLIC, &[]);
    let draws = sample_with(true_model, n_mc, &mut rng);
    let terms: Vec<f64> = draws
        .iter()
        .map(|&(u, v)| {
            let (u, v) = (clamp_obs(u), clamp_obs(v));
            true_model.ln_pdf(u, v) - fitted.ln_pdf(u, v)
        })
        .collect();
    let n = n_mc as f64;
    let mean = terms.iter().sum::<f64>() / n;
    let var = terms.iter().map(|t| (t - mean) * (t - mean)).sum::<f64>() / (n - 1.0);
    Ok(KlicEstimate {
        value: mean,
        std_error: (var / n).sqrt(),
        n_mc,
    })
}
