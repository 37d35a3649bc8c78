//! Changepoint detection from the dependence between successive epochs.
//!
//! For every pair of consecutive epochs `(r, r+1)` of one channel and band, the
//! band magnitudes are paired by frequency index and joined by a copula chosen
//! by AIC. The joint law `H^{(r,r+1)} = C(Γ^{(r)}, Γ^{(r+1)})` composes that
//! copula with the bootstrap Gamma marginals. The statistic `D(r)` is the
//! supremum distance between `H^{(r−1,r)}` and `H^{(r,r+1)}` on a uniform grid
//! of the standardized square, for `r = 2..R−1`. Epoch indices in reports are
//! 1-based and `D(r)` is attributed to the middle epoch `r`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::copula::{
    kendall_tau_empirical, select_family_given_tau, CopulaFamily, CopulaModel, Pair, ThetaMethod,
};
use crate::marginals::{bootstrap_marginals, fit_marginal, BootstrapConfig, Marginal, MarginalFamily, TaskKey};
use crate::numeric::pearson;
use crate::spectral::{BandSpec, MagnitudeTransform, Scaling};
use crate::{Error, Result};

/// A bivariate law on the standardized square: copula plus marginals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JointModel {
    pub copula: CopulaModel,
    pub marginal_u: Marginal,
    pub marginal_v: Marginal,
}

impl JointModel {
    /// A copula viewed on uniform marginals.
    pub fn bare(copula: CopulaModel) -> Self {
        Self {
            copula,
            marginal_u: Marginal::Uniform,
            marginal_v: Marginal::Uniform,
        }
    }

    pub fn cdf(&self, u: f64, v: f64) -> f64 {
        self.copula.cdf(self.marginal_u.cdf(u), self.marginal_v.cdf(v))
    }

    /// The same law with the roles of the two coordinates exchanged.
    pub fn swapped(&self) -> Self {
        Self {
            copula: self.copula,
            marginal_u: self.marginal_v,
            marginal_v: self.marginal_u,
        }
    }
}

/// `max |H_A − H_B|` over a `grid_size × grid_size` uniform grid of
/// `[0, 1]²`, boundary included.
pub fn bivariate_ks(a: &JointModel, b: &JointModel, grid_size: usize) -> Result<f64> {
    if grid_size < 11 {
        return Err(Error::invalid(format!("grid size must be at least 11, got {grid_size}")));
    }
    a.copula.validate()?;
    b.copula.validate()?;
    let step = 1.0 / (grid_size - 1) as f64;
    let grid: Vec<f64> = (0..grid_size).map(|i| (i as f64 * step).min(1.0)).collect();
    let margins = |m: &Marginal| grid.iter().map(|&x| m.cdf(x)).collect::<Vec<f64>>();
    let (au, av) = (margins(&a.marginal_u), margins(&a.marginal_v));
    let (bu, bv) = (margins(&b.marginal_u), margins(&b.marginal_v));
    let mut d: f64 = 0.0;
    for i in 0..grid_size {
        for k in 0..grid_size {
            let diff = (a.copula.cdf(au[i], av[k]) - b.copula.cdf(bu[i], bv[k])).abs();
            d = d.max(diff);
        }
    }
    Ok(d.min(1.0))
}

/// KS statistics of one channel and band. `d[i]` belongs to epoch `epochs[i]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KsSeries {
    pub channel: usize,
    pub band: String,
    pub grid_size: usize,
    pub epochs: Vec<usize>,
    pub d: Vec<f64>,
}

impl KsSeries {
    /// Two-column CSV `epoch,D`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,D\n");
        for (e, d) in self.epochs.iter().zip(&self.d) {
            out.push_str(&format!("{e},{d:?}\n"));
        }
        out
    }
}

/// Fitted marginal of one epoch, with its coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarginalRecord {
    pub channel: usize,
    pub epoch: usize,
    pub band: String,
    #[serde(flatten)]
    pub marginal: Marginal,
}

/// The copula chosen for epochs `(first, first + 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairFit {
    pub first: usize,
    pub tau_hat: f64,
    pub model: CopulaModel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChangepointReport {
    pub channel: usize,
    pub band: String,
    pub threshold: f64,
    pub alpha: f64,
    pub flagged_epochs: Vec<usize>,
    pub ks: KsSeries,
    pub pairs: Vec<PairFit>,
    pub marginals: Vec<MarginalRecord>,
}

impl ChangepointReport {
    /// One-column CSV of the flagged epochs.
    pub fn flagged_csv(&self) -> String {
        let mut out = String::from("epoch\n");
        for e in &self.flagged_epochs {
            out.push_str(&format!("{e}\n"));
        }
        out
    }
}

/// Settings of the detection pipeline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectConfig {
    pub bootstrap: BootstrapConfig,
    pub grid_size: usize,
    pub panel: Vec<CopulaFamily>,
    pub marginal_family: MarginalFamily,
    pub theta_method: ThetaMethod,
    /// Compare the copulas on uniform marginals instead of the joint laws.
    pub bare_copula: bool,
}

impl Default for DetectConfig {
    fn default() -> Self {
        Self {
            bootstrap: BootstrapConfig::default(),
            grid_size: 101,
            panel: CopulaFamily::PANEL.to_vec(),
            marginal_family: MarginalFamily::Gamma,
            theta_method: ThetaMethod::TauInversion,
            bare_copula: false,
        }
    }
}

impl DetectConfig {
    pub fn validate(&self, epoch_len: usize) -> Result<()> {
        self.bootstrap.validate(epoch_len)?;
        if self.grid_size < 11 {
            return Err(Error::invalid(format!("grid size must be at least 11, got {}", self.grid_size)));
        }
        if self.panel.is_empty() {
            return Err(Error::invalid("copula panel is empty"));
        }
        Ok(())
    }
}

/// Epochs whose statistic strictly exceeds `threshold`, ascending.
pub fn flag_exceedances(ks: &KsSeries, threshold: f64) -> Vec<usize> {
    ks.epochs
        .iter()
        .zip(&ks.d)
        .filter(|(_, &d)| d > threshold)
        .map(|(&e, _)| e)
        .collect()
}

/// Everything computed for one band before a threshold is applied.
#[derive(Debug, Clone, PartialEq)]
pub struct BandAnalysis {
    pub band: BandSpec,
    pub scaling: Scaling,
    pub magnitudes: Vec<Vec<f64>>,
    pub marginals: Vec<Marginal>,
    pub pairs: Vec<PairFit>,
    pub ks: KsSeries,
}

impl BandAnalysis {
    pub fn report(&self, threshold: f64, alpha: f64) -> ChangepointReport {
        ChangepointReport {
            channel: self.ks.channel,
            band: self.band.name.clone(),
            threshold,
            alpha,
            flagged_epochs: flag_exceedances(&self.ks, threshold),
            ks: self.ks.clone(),
            pairs: self.pairs.clone(),
            marginals: self
                .marginals
                .iter()
                .enumerate()
                .map(|(r, &marginal)| MarginalRecord {
                    channel: self.ks.channel,
                    epoch: r + 1,
                    band: self.band.name.clone(),
                    marginal,
                })
                .collect(),
        }
    }
}

fn check_epochs<E: AsRef<[f64]>>(epochs: &[E], min: usize) -> Result<usize> {
    if epochs.len() < min {
        return Err(Error::invalid(format!("need at least {min} epochs, got {}", epochs.len())));
    }
    let t = epochs[0].as_ref().len();
    if epochs.iter().any(|e| e.as_ref().len() != t) {
        return Err(Error::DimensionMismatch("epochs differ in length".into()));
    }
    Ok(t)
}

/// Runs the detection pipeline for one channel over several bands.
///
/// Every epoch is transformed once; its bootstrap replicates are also
/// transformed once and shared by all bands.
pub fn analyze_channel<E: AsRef<[f64]> + Sync>(
    epochs: &[E],
    sampling_rate_hz: f64,
    bands: &[BandSpec],
    cfg: &DetectConfig,
    channel: usize,
) -> Result<Vec<BandAnalysis>> {
    let t = check_epochs(epochs, 3)?;
    cfg.validate(t)?;
    let transform = MagnitudeTransform::new(t)?;
    let band_bins: Vec<Vec<usize>> = bands
        .iter()
        .map(|b| b.bins(t, sampling_rate_hz))
        .collect::<Result<_>>()?;
    let spectra: Vec<Vec<f64>> = epochs
        .par_iter()
        .map(|e| transform.magnitudes(e.as_ref()))
        .collect::<Result<_>>()?;
    let raw: Vec<Vec<Vec<f64>>> = band_bins
        .iter()
        .map(|bins| spectra.iter().map(|s| bins.iter().map(|&k| s[k]).collect()).collect())
        .collect();
    let scalings: Vec<Scaling> = raw.iter().map(|r| Scaling::from_series(r)).collect::<Result<_>>()?;

    // per_epoch[r][band]
    let per_epoch: Vec<Vec<Marginal>> = epochs
        .par_iter()
        .enumerate()
        .map(|(r, e)| {
            bootstrap_marginals(
                e.as_ref(),
                &transform,
                &band_bins,
                &scalings,
                &cfg.bootstrap,
                cfg.marginal_family,
                TaskKey {
                    channel: channel as u64,
                    epoch: r as u64,
                },
            )
        })
        .collect::<Result<_>>()?;

    bands
        .iter()
        .enumerate()
        .map(|(j, band)| {
            let magnitudes: Vec<Vec<f64>> = raw[j]
                .iter()
                .map(|m| m.iter().map(|&x| scalings[j].apply(x)).collect())
                .collect();
            let marginals: Vec<Marginal> = per_epoch.iter().map(|m| m[j]).collect();
            let (pairs, d) = ks_from_marginals(&magnitudes, &marginals, cfg)?;
            Ok(BandAnalysis {
                band: band.clone(),
                scaling: scalings[j],
                ks: KsSeries {
                    channel,
                    band: band.name.clone(),
                    grid_size: cfg.grid_size,
                    epochs: (2..magnitudes.len()).collect(),
                    d,
                },
                magnitudes,
                marginals,
                pairs,
            })
        })
        .collect()
}

fn joint(pair: &PairFit, mu: Marginal, mv: Marginal, bare: bool) -> JointModel {
    if bare {
        JointModel::bare(pair.model)
    } else {
        JointModel {
            copula: pair.model,
            marginal_u: mu,
            marginal_v: mv,
        }
    }
}

/// Steps after the marginal fits: a copula per consecutive pair, then `D(r)`
/// for every interior epoch.
///
/// `magnitudes[r]` are the standardized band magnitudes of epoch `r` and
/// `marginals[r]` their fitted law. Kendall's tau is taken on the magnitudes;
/// the likelihood used by AIC is evaluated on the pseudo-observations
/// `(Γ^{(r)}(δ^{(r)}_k), Γ^{(r+1)}(δ^{(r+1)}_k))`.
pub fn ks_from_marginals(
    magnitudes: &[Vec<f64>],
    marginals: &[Marginal],
    cfg: &DetectConfig,
) -> Result<(Vec<PairFit>, Vec<f64>)> {
    if magnitudes.len() != marginals.len() {
        return Err(Error::DimensionMismatch("one marginal per epoch required".into()));
    }
    check_epochs(magnitudes, 3)?;
    let pairs: Vec<PairFit> = (0..magnitudes.len() - 1)
        .into_par_iter()
        .map(|r| {
            let (x, y) = (&magnitudes[r], &magnitudes[r + 1]);
            let tau_hat = kendall_tau_empirical(x, y)?;
            let obs: Vec<Pair> = x
                .iter()
                .zip(y)
                .map(|(&a, &b)| (marginals[r].cdf(a), marginals[r + 1].cdf(b)))
                .collect();
            let sel = select_family_given_tau(&obs, tau_hat, &cfg.panel, cfg.theta_method)?;
            Ok(PairFit {
                first: r + 1,
                tau_hat,
                model: sel.model,
            })
        })
        .collect::<Result<_>>()?;
    let d: Vec<f64> = (1..magnitudes.len() - 1)
        .into_par_iter()
        .map(|r| {
            let before = joint(&pairs[r - 1], marginals[r - 1], marginals[r], cfg.bare_copula);
            let after = joint(&pairs[r], marginals[r], marginals[r + 1], cfg.bare_copula);
            bivariate_ks(&before, &after, cfg.grid_size)
        })
        .collect::<Result<_>>()?;
    Ok((pairs, d))
}

/// Full pipeline for one channel and one band, flagging `D(r) > threshold`.
pub fn detect_changepoints<E: AsRef<[f64]> + Sync>(
    epochs: &[E],
    sampling_rate_hz: f64,
    band: &BandSpec,
    cfg: &DetectConfig,
    threshold: f64,
    alpha: f64,
) -> Result<ChangepointReport> {
    let analysis = analyze_channel(epochs, sampling_rate_hz, std::slice::from_ref(band), cfg, 0)?;
    Ok(analysis[0].report(threshold, alpha))
}

/// What two channels are paired on when looking for a change in their
/// mutual dependence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CrossDomain {
    /// Simultaneous time samples `(x_t, y_t)` within each epoch.
    TimeSamples,
    /// Band magnitudes of the two channels, paired by frequency index.
    Band(BandSpec),
}

/// Changes in the dependence between two channels across epochs.
///
/// `ks.d[i]` compares the joint law of epoch `ks.epochs[i] − 1` with that of
/// epoch `ks.epochs[i]`, so a switch starting at epoch `s` shows up at `s`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossReport {
    pub channels: (usize, usize),
    pub domain: CrossDomain,
    pub threshold: f64,
    pub flagged_epochs: Vec<usize>,
    pub ks: KsSeries,
    pub models: Vec<JointModel>,
    pub pearson: Vec<f64>,
}

/// Fits an epoch-wise joint model of two channels and compares consecutive
/// epochs. Each channel is standardized with its global range across epochs.
pub fn cross_ks_series<E: AsRef<[f64]> + Sync>(
    x_epochs: &[E],
    y_epochs: &[E],
    sampling_rate_hz: f64,
    domain: &CrossDomain,
    cfg: &DetectConfig,
) -> Result<(KsSeries, Vec<JointModel>, Vec<f64>)> {
    if x_epochs.len() != y_epochs.len() {
        return Err(Error::DimensionMismatch("both channels need the same epochs".into()));
    }
    let t = check_epochs(x_epochs, 2)?;
    if check_epochs(y_epochs, 2)? != t {
        return Err(Error::DimensionMismatch("epoch lengths differ between channels".into()));
    }
    cfg.validate(t)?;
    let pearsons: Vec<f64> = x_epochs
        .iter()
        .zip(y_epochs)
        .map(|(x, y)| pearson(x.as_ref(), y.as_ref()))
        .collect();

    let (xs, ys, x_marg, y_marg) = match domain {
        CrossDomain::TimeSamples => {
            let sx = Scaling::from_series(x_epochs)?;
            let sy = Scaling::from_series(y_epochs)?;
            let std = |e: &[E], s: Scaling| -> Vec<Vec<f64>> {
                e.iter().map(|v| v.as_ref().iter().map(|&a| s.apply(a)).collect()).collect()
            };
            let (xs, ys) = (std(x_epochs, sx), std(y_epochs, sy));
            let fit = |e: &Vec<Vec<f64>>| -> Result<Vec<Marginal>> {
                e.par_iter()
                    .map(|v| {
                        let pos: Vec<f64> = v.iter().copied().filter(|&a| a > 0.0).collect();
                        fit_marginal(&pos, cfg.marginal_family)
                    })
                    .collect()
            };
            let (mx, my) = (fit(&xs)?, fit(&ys)?);
            (xs, ys, mx, my)
        }
        CrossDomain::Band(band) => {
            let ax = band_marginals(x_epochs, sampling_rate_hz, band, cfg, 0)?;
            let ay = band_marginals(y_epochs, sampling_rate_hz, band, cfg, 1)?;
            (ax.0, ay.0, ax.1, ay.1)
        }
    };

    let models: Vec<JointModel> = (0..xs.len())
        .into_par_iter()
        .map(|r| {
            let tau_hat = kendall_tau_empirical(&xs[r], &ys[r])?;
            let obs: Vec<Pair> = xs[r]
                .iter()
                .zip(&ys[r])
                .map(|(&a, &b)| (x_marg[r].cdf(a), y_marg[r].cdf(b)))
                .collect();
            let sel = select_family_given_tau(&obs, tau_hat, &cfg.panel, cfg.theta_method)?;
            let pair = PairFit {
                first: r + 1,
                tau_hat,
                model: sel.model,
            };
            Ok(joint(&pair, x_marg[r], y_marg[r], cfg.bare_copula))
        })
        .collect::<Result<_>>()?;
    let d: Vec<f64> = (1..models.len())
        .into_par_iter()
        .map(|r| bivariate_ks(&models[r - 1], &models[r], cfg.grid_size))
        .collect::<Result<_>>()?;
    let ks = KsSeries {
        channel: 0,
        band: match domain {
            CrossDomain::TimeSamples => "time".to_string(),
            CrossDomain::Band(b) => b.name.clone(),
        },
        grid_size: cfg.grid_size,
        epochs: (2..=models.len()).collect(),
        d,
    };
    Ok((ks, models, pearsons))
}

/// Standardized magnitudes and bootstrap marginals of one channel and band.
pub fn band_marginals<E: AsRef<[f64]> + Sync>(
    epochs: &[E],
    sampling_rate_hz: f64,
    band: &BandSpec,
    cfg: &DetectConfig,
    channel: usize,
) -> Result<(Vec<Vec<f64>>, Vec<Marginal>)> {
    let t = check_epochs(epochs, 2)?;
    let transform = MagnitudeTransform::new(t)?;
    let bins = band.bins(t, sampling_rate_hz)?;
    let raw: Vec<Vec<f64>> = epochs
        .par_iter()
        .map(|e| transform.magnitudes(e.as_ref()).map(|s| bins.iter().map(|&k| s[k]).collect()))
        .collect::<Result<_>>()?;
    let scaling = Scaling::from_series(&raw)?;
    let marginals: Vec<Marginal> = epochs
        .par_iter()
        .enumerate()
        .map(|(r, e)| {
            bootstrap_marginals(
                e.as_ref(),
                &transform,
                std::slice::from_ref(&bins),
                &[scaling],
                &cfg.bootstrap,
                cfg.marginal_family,
                TaskKey {
                    channel: channel as u64,
                    epoch: r as u64,
                },
            )
            .map(|m| m[0])
        })
        .collect::<Result<_>>()?;
    let mags = raw
        .iter()
        .map(|m| m.iter().map(|&x| scaling.apply(x)).collect())
        .collect();
    Ok((mags, marginals))
}

/// Cross-channel detection: flags epochs whose joint law with the preceding
/// epoch differs by more than `threshold`.
pub fn detect_cross_changepoints<E: AsRef<[f64]> + Sync>(
    x_epochs: &[E],
    y_epochs: &[E],
    sampling_rate_hz: f64,
    domain: &CrossDomain,
    cfg: &DetectConfig,
    threshold: f64,
) -> Result<CrossReport> {
    let (ks, models, pearson) = cross_ks_series(x_epochs, y_epochs, sampling_rate_hz, domain, cfg)?;
    Ok(CrossReport {
        channels: (0, 1),
        domain: domain.clone(),
        threshold,
        flagged_epochs: flag_exceedances(&ks, threshold),
        ks,
        models,
        pearson,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::marginals::GammaFit;
    use crate::rng::{self, tag};
    use proptest::prelude::*;
    use rand::Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn gamma(shape: f64, rate: f64) -> Marginal {
        Marginal::Gamma(GammaFit::new(shape, rate).unwrap())
    }

    fn random_model(rng: &mut impl Rng) -> JointModel {
        let family = CopulaFamily::PANEL[rng.random_range(0..6)];
        let tau = if family == CopulaFamily::Frank {
            rng.random_range(-0.8..0.8)
        } else {
            rng.random_range(0.05..0.8)
        };
        let copula = match crate::copula::tau_to_theta(family, tau).unwrap() {
            Some(t) => CopulaModel::new(family, t).unwrap(),
            None => CopulaModel::independent(),
        };
        JointModel {
            copula,
            marginal_u: gamma(rng.random_range(0.5..5.0), rng.random_range(2.0..20.0)),
            marginal_v: gamma(rng.random_range(0.5..5.0), rng.random_range(2.0..20.0)),
        }
    }

    #[test]
    fn identical_models_give_zero() {
        let mut rng = rng::stream(1, tag::TEST, &[]);
        let m = random_model(&mut rng);
        assert_eq!(bivariate_ks(&m, &m, 101).unwrap(), 0.0);
        assert!(bivariate_ks(&m, &m, 10).is_err());
    }

    #[test]
    fn independence_versus_comonotone_limit() {
        let ind = JointModel::bare(CopulaModel::independent());
        let como = JointModel::bare(CopulaModel::new(CopulaFamily::Clayton, 1e6).unwrap());
        let d = bivariate_ks(&ind, &como, 101).unwrap();
        assert!((d - 0.25).abs() < 1e-4, "{d}");
        // the supremum of |uv − min(u, v)| sits at the centre of the square
        let at_centre = (como.cdf(0.5, 0.5) - ind.cdf(0.5, 0.5)).abs();
        assert!((at_centre - d).abs() < 1e-4);
    }

    #[test]
    fn grid_refinement() {
        let mut rng = rng::stream(2, tag::TEST, &[]);
        for _ in 0..20 {
            let (a, b) = (random_model(&mut rng), random_model(&mut rng));
            let coarse = bivariate_ks(&a, &b, 101).unwrap();
            let fine = bivariate_ks(&a, &b, 1001).unwrap();
            assert!(fine >= coarse - 1e-15);
            assert!(fine - coarse < 0.005, "{coarse} vs {fine}");
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn metric_properties(seed in 0u64..10_000) {
            let mut rng = rng::stream(seed, tag::TEST, &[7]);
            let (a, b, c) = (random_model(&mut rng), random_model(&mut rng), random_model(&mut rng));
            let ab = bivariate_ks(&a, &b, 41).unwrap();
            let ba = bivariate_ks(&b, &a, 41).unwrap();
            prop_assert!((ab - ba).abs() <= 1e-15);
            let bc = bivariate_ks(&b, &c, 41).unwrap();
            let ac = bivariate_ks(&a, &c, 41).unwrap();
            prop_assert!(ac <= ab + bc + 1e-12);
            prop_assert!((0.0..=1.0).contains(&ab));
            // exchangeable copulas: swapping both coordinates leaves D unchanged
            let sw = bivariate_ks(&a.swapped(), &b.swapped(), 41).unwrap();
            prop_assert!((sw - ab).abs() <= 1e-12);
        }

        #[test]
        fn raising_threshold_never_adds_flags(
            d in prop::collection::vec(0.0f64..0.2, 1..50), t1 in 0.0f64..0.2, dt in 0.0f64..0.1
        ) {
            let ks = KsSeries { channel: 0, band: "x".into(), grid_size: 101, epochs: (2..d.len() + 2).collect(), d };
            let low = flag_exceedances(&ks, t1);
            let high = flag_exceedances(&ks, t1 + dt);
            prop_assert!(high.iter().all(|e| low.contains(e)));
        }
    }

    fn ar1_epochs(r: usize, t: usize, seed: u64) -> Vec<Vec<f64>> {
        (0..r)
            .map(|e| {
                let mut rng = rng::stream(seed, tag::TEST, &[e as u64]);
                let mut x = 0.0;
                (0..t + 200)
                    .map(|_| {
                        let n: f64 = StandardNormal.sample(&mut rng);
                        x = 0.9 * x + n;
                        x
                    })
                    .skip(200)
                    .collect()
            })
            .collect()
    }

    fn fast_cfg() -> DetectConfig {
        DetectConfig {
            bootstrap: BootstrapConfig {
                blocks: 20,
                replicates: 40,
                seed: 3,
            },
            ..DetectConfig::default()
        }
    }

    #[test]
    fn three_epochs_give_one_statistic() {
        let epochs = ar1_epochs(3, 1000, 1);
        let band = crate::spectral::default_bands(true)[3].clone();
        let rep = detect_changepoints(&epochs, 1000.0, &band, &fast_cfg(), 0.01, 0.01).unwrap();
        assert_eq!(rep.ks.epochs, vec![2]);
        assert_eq!(rep.ks.d.len(), 1);
        assert_eq!(rep.pairs.len(), 2);
        assert!(detect_changepoints(&epochs[..2], 1000.0, &band, &fast_cfg(), 0.01, 0.01).is_err());
    }

    #[test]
    fn multi_band_matches_single_band_and_is_deterministic() {
        let epochs = ar1_epochs(6, 1000, 2);
        let bands = crate::spectral::default_bands(true);
        let cfg = fast_cfg();
        let all = analyze_channel(&epochs, 1000.0, &bands, &cfg, 0).unwrap();
        for (j, band) in bands.iter().enumerate() {
            let one = analyze_channel(&epochs, 1000.0, std::slice::from_ref(band), &cfg, 0).unwrap();
            assert_eq!(one[0], all[j]);
        }
        let again = analyze_channel(&epochs, 1000.0, &bands, &cfg, 0).unwrap();
        assert_eq!(again, all);
        let json_a = serde_json::to_string(&all[2].report(0.01, 0.01)).unwrap();
        let json_b = serde_json::to_string(&again[2].report(0.01, 0.01)).unwrap();
        assert_eq!(json_a, json_b);
    }

    #[test]
    fn report_serialization_shapes() {
        let epochs = ar1_epochs(4, 1000, 3);
        let band = crate::spectral::default_bands(true)[1].clone();
        let rep = detect_changepoints(&epochs, 1000.0, &band, &fast_cfg(), -1.0, 0.01).unwrap();
        assert_eq!(rep.flagged_epochs, vec![2, 3]);
        assert_eq!(rep.ks.to_csv().lines().next(), Some("epoch,D"));
        assert_eq!(rep.ks.to_csv().lines().count(), 3);
        assert_eq!(rep.flagged_csv(), "epoch\n2\n3\n");
        let v = serde_json::to_value(MarginalRecord {
            channel: 1,
            epoch: 2,
            band: "beta".into(),
            marginal: gamma(2.0, 3.0),
        })
        .unwrap();
        for key in ["channel", "epoch", "band", "shape", "rate", "n_effective"] {
            assert!(v.get(key).is_some(), "{key} missing in {v}");
        }
    }

    #[test]
    fn cross_detector_sees_a_reflected_dependence() {
        // y depends on x through a gate that switches sides at epoch 6
        let xs = ar1_epochs(10, 500, 4);
        let ys: Vec<Vec<f64>> = xs
            .iter()
            .enumerate()
            .map(|(r, x)| {
                let mut rng = rng::stream(4, tag::TEST, &[100 + r as u64]);
                x.iter()
                    .map(|&v| {
                        let gate = if r < 5 { 1.0 / (1.0 + v.exp()) } else { 1.0 / (1.0 + (-v).exp()) };
                        let n: f64 = StandardNormal.sample(&mut rng);
                        gate * v + n
                    })
                    .collect()
            })
            .collect();
        let (ks, models, pearson) = cross_ks_series(&xs, &ys, 1000.0, &CrossDomain::TimeSamples, &fast_cfg()).unwrap();
        assert_eq!(ks.epochs, (2..=10).collect::<Vec<_>>());
        assert_eq!(models.len(), 10);
        assert_eq!(pearson.len(), 10);
        let (argmax, _) = ks.d.iter().enumerate().fold((0, 0.0), |b, (i, &d)| if d > b.1 { (i, d) } else { b });
        assert_eq!(ks.epochs[argmax], 6, "{:?}", ks.d);
    }
}
