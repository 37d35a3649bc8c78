use super::*;
use crate::numeric::integrate;
use crate::rng::{self, tag};
use proptest::prelude::*;
use rand::Rng;

fn m(f: CopulaFamily, t: f64) -> CopulaModel {
    CopulaModel::new(f, t).unwrap()
}

fn moderate_models() -> Vec<CopulaModel> {
    use CopulaFamily::*;
    vec![
        CopulaModel::independent(),
        m(Clayton, 2.0),
        m(Clayton, 0.5),
        m(Gumbel, 2.0),
        m(Gumbel, 1.3),
        m(Frank, 5.0),
        m(Frank, -5.0),
        m(Joe, 2.0),
        m(Joe, 1.5),
        m(SurvivalJoe, 2.0),
    ]
}

fn strong_models() -> Vec<CopulaModel> {
    use CopulaFamily::*;
    vec![
        m(Clayton, 50.0),
        m(Gumbel, 20.0),
        m(Frank, 100.0),
        m(Frank, -100.0),
        m(Joe, 20.0),
        m(SurvivalJoe, 20.0),
        m(Frank, 1e-4),
        m(Clayton, 1e-3),
    ]
}

/// Frank CDF in its textbook form, valid for either sign of θ.
fn frank_direct(t: f64, u: f64, v: f64) -> f64 {
    -(1.0 + (-t * u).exp_m1() * (-t * v).exp_m1() / (-t).exp_m1()).ln() / t
}

#[test]
fn cdf_examples() {
    assert!((CopulaModel::independent().cdf(0.3, 0.6) - 0.18).abs() < 1e-15);
    let c = m(CopulaFamily::Clayton, 2.0).cdf(0.5, 0.5);
    assert!((c - 7f64.powf(-0.5)).abs() < 1e-14, "{c}");
    for model in moderate_models().into_iter().chain(strong_models()) {
        for &u in &[0.0, 0.1, 0.5, 0.93, 1.0] {
            assert_eq!(model.cdf(u, 1.0), u);
            assert_eq!(model.cdf(1.0, u), u);
            assert_eq!(model.cdf(u, 0.0), 0.0);
        }
    }
}

#[test]
fn frank_stable_form_matches_textbook() {
    // the textbook form cancels badly for large |θ|, so keep the oracle where it is accurate
    for &t in &[-10.0, -5.0, -0.3, 0.3, 5.0, 10.0] {
        let model = m(CopulaFamily::Frank, t);
        for &(u, v) in &[(0.2, 0.7), (0.5, 0.5), (0.9, 0.05), (0.01, 0.99)] {
            let want = frank_direct(t, u, v);
            assert!((model.cdf(u, v) - want).abs() < 1e-10, "θ={t} ({u},{v})");
        }
    }
}

#[test]
fn gumbel_and_joe_closed_forms() {
    let g = m(CopulaFamily::Gumbel, 2.0);
    let (u, v): (f64, f64) = (0.3, 0.8);
    let want = (-((-u.ln()).powi(2) + (-v.ln()).powi(2)).sqrt()).exp();
    assert!((g.cdf(u, v) - want).abs() < 1e-14);
    let j = m(CopulaFamily::Joe, 3.0);
    let (a, b) = ((1.0 - u).powi(3), (1.0 - v).powi(3));
    let want = 1.0 - (a + b - a * b).powf(1.0 / 3.0);
    assert!((j.cdf(u, v) - want).abs() < 1e-14);
    let sj = m(CopulaFamily::SurvivalJoe, 3.0);
    assert!((sj.cdf(u, v) - (u + v - 1.0 + j.cdf(1.0 - u, 1.0 - v))).abs() < 1e-14);
}

#[test]
fn frechet_bounds_on_grid() {
    for model in moderate_models().into_iter().chain(strong_models()) {
        for i in 0..=100 {
            for k in 0..=100 {
                let (u, v) = (i as f64 / 100.0, k as f64 / 100.0);
                let c = model.cdf(u, v);
                assert!(c >= (u + v - 1.0).max(0.0) - 1e-15 && c <= u.min(v) + 1e-15, "{model:?} ({u},{v}) {c}");
            }
        }
    }
}

#[test]
fn two_increasing_on_random_rectangles() {
    let mut rng = rng::stream(1, tag::TEST, &[]);
    for model in moderate_models().into_iter().chain(strong_models()) {
        for _ in 0..10_000 {
            let (a, b): (f64, f64) = (rng.random(), rng.random());
            let (c, d): (f64, f64) = (rng.random(), rng.random());
            let (u1, u2) = (a.min(b), a.max(b));
            let (v1, v2) = (c.min(d), c.max(d));
            let vol = model.cdf(u2, v2) - model.cdf(u2, v1) - model.cdf(u1, v2) + model.cdf(u1, v1);
            assert!(vol >= -1e-12, "{model:?} [{u1},{u2}]x[{v1},{v2}] {vol}");
        }
    }
}

#[test]
fn pdf_matches_mixed_finite_difference() {
    let mut rng = rng::stream(2, tag::TEST, &[]);
    let h = 1e-4;
    for model in moderate_models() {
        for _ in 0..20 {
            let u = 0.05 + 0.9 * rng.random::<f64>();
            let v = 0.05 + 0.9 * rng.random::<f64>();
            let fd = (model.cdf(u + h, v + h) - model.cdf(u + h, v - h) - model.cdf(u - h, v + h)
                + model.cdf(u - h, v - h))
                / (4.0 * h * h);
            let pdf = copula_pdf(&model, u, v).unwrap();
            assert!(((fd - pdf) / pdf).abs() < 1e-4, "{model:?} ({u},{v}) fd {fd} pdf {pdf}");
        }
    }
}

#[test]
fn h_matches_finite_difference() {
    let mut rng = rng::stream(3, tag::TEST, &[]);
    let d = 1e-6;
    for model in moderate_models().into_iter().chain(strong_models().into_iter().take(4)) {
        for _ in 0..50 {
            let u = 0.02 + 0.96 * rng.random::<f64>();
            let v = 0.02 + 0.96 * rng.random::<f64>();
            let fd = (model.cdf(u, v + d) - model.cdf(u, v - d)) / (2.0 * d);
            let hv = h_function(&model, u, v).unwrap();
            assert!((fd - hv).abs() < 1e-5, "{model:?} ({u},{v}) fd {fd} h {hv}");
        }
    }
}

#[test]
fn h_boundaries_and_monotonicity() {
    for model in moderate_models().into_iter().chain(strong_models()) {
        for &v in &[1e-6, 0.3, 0.7, 1.0 - 1e-6] {
            assert_eq!(model.h(0.0, v), 0.0);
            assert_eq!(model.h(1.0, v), 1.0);
            let mut prev = 0.0;
            for i in 1..1000 {
                let hv = model.h(i as f64 / 1000.0, v);
                assert!(hv >= prev - 1e-12, "{model:?} v={v} u={}", i as f64 / 1000.0);
                prev = hv;
            }
        }
    }
    assert_eq!(CopulaModel::independent().h(0.37, 0.8), 0.37);
}

#[test]
fn pdf_integrates_to_one() {
    for model in moderate_models() {
        let inner = |v: f64| integrate(|u| if u <= 0.0 || u >= 1.0 { 0.0 } else { model.pdf(u, v) }, 0.0, 1.0, 1e-11, 1e-11);
        let total = integrate(|v| if v <= 0.0 || v >= 1.0 { 0.0 } else { inner(v) }, 0.0, 1.0, 1e-9, 1e-10);
        assert!((total - 1.0).abs() < 1e-6, "{model:?} {total}");
    }
}

#[test]
fn pdf_rejects_boundary() {
    let model = m(CopulaFamily::Clayton, 2.0);
    assert!(copula_pdf(&model, 0.0, 0.5).is_err());
    assert!(copula_pdf(&model, 0.5, 1.0).is_err());
    assert!(copula_cdf(&model, 1.2, 0.5).is_err());
    assert_eq!(copula_pdf(&CopulaModel::independent(), 0.2, 0.9).unwrap(), 1.0);
}

#[test]
fn invalid_parameters_rejected() {
    assert!(CopulaModel::new(CopulaFamily::Clayton, 0.0).is_err());
    assert!(CopulaModel::new(CopulaFamily::Gumbel, 0.9).is_err());
    assert!(CopulaModel::new(CopulaFamily::Joe, f64::NAN).is_err());
    assert_eq!(CopulaModel::new(CopulaFamily::Frank, 0.0).unwrap(), CopulaModel::independent());
    let bad = CopulaModel {
        family: CopulaFamily::SurvivalJoe,
        theta: Some(0.5),
        source: ThetaSource::Fixed,
    };
    assert!(copula_cdf(&bad, 0.5, 0.5).is_err());
}

#[test]
fn json_shape() {
    let model = m(CopulaFamily::SurvivalJoe, 2.5).with_source(ThetaSource::TauInversion);
    let v: serde_json::Value = serde_json::to_value(model).unwrap();
    assert_eq!(v, serde_json::json!({"family": "survival-joe", "theta": 2.5, "source": "tau_inversion"}));
    let back: CopulaModel = serde_json::from_value(v).unwrap();
    assert_eq!(back, model);
    assert_eq!("Rotated_Joe".parse::<CopulaFamily>().unwrap(), CopulaFamily::SurvivalJoe);
}

fn brute_tau(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len();
    let mut s = 0i64;
    for i in 0..n {
        for j in i + 1..n {
            let p = (x[i] - x[j]) * (y[i] - y[j]);
            s += if p > 0.0 {
                1
            } else if p < 0.0 {
                -1
            } else {
                0
            };
        }
    }
    s as f64 / (n * (n - 1) / 2) as f64
}

#[test]
fn kendall_examples() {
    let x: Vec<f64> = (0..20).map(f64::from).collect();
    let y: Vec<f64> = x.iter().map(|v| v.powi(3) + 1.0).collect();
    assert_eq!(kendall_tau_empirical(&x, &y).unwrap(), 1.0);
    assert_eq!(kendall_tau_empirical(&[1.0, 2.0], &[2.0, 1.0]).unwrap(), -1.0);
    assert!(kendall_tau_empirical(&[1.0], &[1.0]).is_err());
    let mut rng = rng::stream(4, tag::TEST, &[]);
    let a: Vec<f64> = (0..50).map(|_| rng.random()).collect();
    let b: Vec<f64> = (0..50).map(|_| rng.random()).collect();
    assert!((kendall_tau_empirical(&a, &b).unwrap() - brute_tau(&a, &b)).abs() < 1e-15);
}

proptest! {
    #[test]
    fn kendall_matches_brute_force_with_ties(
        pts in prop::collection::vec((0u8..6, 0u8..6), 2..60)
    ) {
        let x: Vec<f64> = pts.iter().map(|p| f64::from(p.0)).collect();
        let y: Vec<f64> = pts.iter().map(|p| f64::from(p.1)).collect();
        let fast = kendall_tau_empirical(&x, &y).unwrap();
        prop_assert!((fast - brute_tau(&x, &y)).abs() < 1e-12);
    }

    #[test]
    fn kendall_invariant_under_monotone_maps(
        pts in prop::collection::vec((-5.0f64..5.0, -5.0f64..5.0), 2..80)
    ) {
        let x: Vec<f64> = pts.iter().map(|p| p.0).collect();
        let y: Vec<f64> = pts.iter().map(|p| p.1).collect();
        let xt: Vec<f64> = x.iter().map(|v| v.exp()).collect();
        let yt: Vec<f64> = y.iter().map(|v| v.powi(3) + 2.0 * v).collect();
        prop_assert_eq!(kendall_tau_empirical(&x, &y).unwrap(), kendall_tau_empirical(&xt, &yt).unwrap());
    }

    #[test]
    fn cdf_within_frechet_bounds(
        fi in 1usize..6, t in 0.0f64..1.0, u in 0.0f64..=1.0, v in 0.0f64..=1.0
    ) {
        let family = CopulaFamily::PANEL[fi];
        let tau = if family == CopulaFamily::Frank { 1.9 * t - 0.95 } else { 0.01 + 0.94 * t };
        let model = match tau_to_theta(family, tau).unwrap() {
            Some(theta) => CopulaModel::new(family, theta).unwrap(),
            None => CopulaModel::independent(),
        };
        let c = model.cdf(u, v);
        prop_assert!(c >= (u + v - 1.0).max(0.0) - 1e-15 && c <= u.min(v) + 1e-15);
    }
}

#[test]
fn sampler_reproduces_tau() {
    let ind = sample(&CopulaModel::independent(), 100_000, 5);
    let (u, v): (Vec<f64>, Vec<f64>) = ind.into_iter().unzip();
    assert!(kendall_tau_empirical(&u, &v).unwrap().abs() < 0.01);
    let cl = sample(&m(CopulaFamily::Clayton, 2.0), 100_000, 6);
    assert!(cl.iter().all(|&(a, b)| a > 0.0 && a < 1.0 && b > 0.0 && b < 1.0));
    let (u, v): (Vec<f64>, Vec<f64>) = cl.into_iter().unzip();
    let tau = kendall_tau_empirical(&u, &v).unwrap();
    assert!((tau - 0.5).abs() < 0.01, "{tau}");
    assert_eq!(sample(&m(CopulaFamily::Gumbel, 1.7), 100, 9), sample(&m(CopulaFamily::Gumbel, 1.7), 100, 9));
}

#[test]
fn survival_joe_shares_joe_tau() {
    let theta = 2.5;
    let want = theta_to_tau(CopulaFamily::Joe, theta).unwrap();
    assert_eq!(theta_to_tau(CopulaFamily::SurvivalJoe, theta).unwrap(), want);
    for (family, seed) in [(CopulaFamily::Joe, 10), (CopulaFamily::SurvivalJoe, 11)] {
        let s = sample(&m(family, theta), 50_000, seed);
        let (u, v): (Vec<f64>, Vec<f64>) = s.into_iter().unzip();
        let tau = kendall_tau_empirical(&u, &v).unwrap();
        assert!((tau - want).abs() < 0.012, "{family}: {tau} vs {want}");
    }
}

#[test]
fn empirical_copula_close_to_cdf() {
    for (model, seed) in [(m(CopulaFamily::Frank, -4.0), 12), (m(CopulaFamily::SurvivalJoe, 2.0), 13), (m(CopulaFamily::Gumbel, 2.0), 14)] {
        let s = sample(&model, 100_000, seed);
        let n = s.len() as f64;
        let mut sup: f64 = 0.0;
        for i in 0..=20 {
            for k in 0..=20 {
                let (a, b) = (i as f64 / 20.0, k as f64 / 20.0);
                let emp = s.iter().filter(|&&(u, v)| u <= a && v <= b).count() as f64 / n;
                sup = sup.max((emp - model.cdf(a, b)).abs());
            }
        }
        assert!(sup < 0.01, "{model:?} sup {sup}");
    }
}

#[test]
fn loglik_examples() {
    let data = sample(&m(CopulaFamily::Clayton, 2.0), 10_000, 15);
    assert_eq!(copula_loglik(&CopulaModel::independent(), &data), 0.0);
    let clayton = copula_loglik(&m(CopulaFamily::Clayton, 2.0), &data);
    let gumbel = copula_loglik(&m(CopulaFamily::Gumbel, 2.0), &data);
    assert!(clayton > gumbel);
    let one = [(0.3, 0.4)];
    let model = m(CopulaFamily::Joe, 1.8);
    assert!((copula_loglik(&model, &one) - model.pdf(0.3, 0.4).ln()).abs() < 1e-14);
    // corners are clamped rather than rejected
    assert!(copula_loglik(&model, &[(0.0, 1.0)]).is_finite());
}

#[test]
fn mle_recovers_and_dominates_tau_inversion() {
    let data = sample(&m(CopulaFamily::Clayton, 2.0), 10_000, 16);
    let theta = mle_theta(CopulaFamily::Clayton, &data).unwrap().unwrap();
    assert!((1.8..=2.2).contains(&theta), "{theta}");
    assert_eq!(mle_theta(CopulaFamily::Independent, &data).unwrap(), None);
    let (u, v): (Vec<f64>, Vec<f64>) = data.iter().copied().unzip();
    let tau = kendall_tau_empirical(&u, &v).unwrap();
    for family in [CopulaFamily::Clayton, CopulaFamily::Gumbel, CopulaFamily::Frank, CopulaFamily::Joe] {
        let t_mle = mle_theta(family, &data).unwrap().unwrap();
        let t_tau = tau_to_theta(family, tau).unwrap().unwrap();
        let ll_mle = copula_loglik(&m(family, t_mle), &data);
        let ll_tau = copula_loglik(&m(family, t_tau), &data);
        assert!(ll_mle >= ll_tau - 1e-9, "{family}: {ll_mle} < {ll_tau}");
    }
    let neg = sample(&m(CopulaFamily::Frank, -6.0), 5_000, 17);
    let t = mle_theta(CopulaFamily::Frank, &neg).unwrap().unwrap();
    assert!((t + 6.0).abs() < 0.6, "{t}");
}

/// Clayton and the rotated Joe both have lower tail dependence and sit
/// about 1e-3 nats apart at τ = 0.5, so at n = 270 the two are not
/// separable by AIC. Without the rotated Joe, Clayton is recovered.
#[test]
fn selection_rates() {
    let clayton = m(CopulaFamily::Clayton, 2.0);
    let without_rotated = &CopulaFamily::PANEL[..5];
    let (mut full, mut lower_tail, mut reduced, mut indep) = (0, 0, 0, 0);
    for trial in 0..100 {
        let s = sample(&clayton, 270, 1000 + trial);
        let pick = select_family(&s, &CopulaFamily::PANEL).unwrap().family;
        full += usize::from(pick == CopulaFamily::Clayton);
        lower_tail += usize::from(matches!(pick, CopulaFamily::Clayton | CopulaFamily::SurvivalJoe));
        reduced += usize::from(select_family(&s, without_rotated).unwrap().family == CopulaFamily::Clayton);
        let w = sample(&CopulaModel::independent(), 270, 5000 + trial);
        indep += usize::from(select_family(&w, &CopulaFamily::PANEL).unwrap().family == CopulaFamily::Independent);
    }
    assert!(reduced >= 90, "Clayton selected {reduced}/100 without the rotated Joe");
    assert_eq!(lower_tail, 100);
    assert!(full > 50, "Clayton selected {full}/100 with the full panel");
    assert!(indep > 50, "Independent selected {indep}/100");
}

#[test]
fn negative_tau_restricts_panel() {
    let s = sample(&m(CopulaFamily::Frank, -8.0), 400, 18);
    let sel = select_family_with(&s, &CopulaFamily::PANEL, ThetaMethod::TauInversion).unwrap();
    assert!(sel.tau_hat < 0.0);
    let fams: Vec<_> = sel.candidates.iter().map(|c| c.family).collect();
    assert_eq!(fams, vec![CopulaFamily::Independent, CopulaFamily::Frank]);
    assert_eq!(sel.model.family, CopulaFamily::Frank);
    assert_eq!(sel.model.source, ThetaSource::TauInversion);
}

#[test]
fn perfectly_concordant_sample_stays_finite() {
    let s: Vec<Pair> = (1..50).map(|i| (i as f64 / 50.0, i as f64 / 50.0)).collect();
    let sel = select_family_with(&s, &CopulaFamily::PANEL, ThetaMethod::TauInversion).unwrap();
    assert_eq!(sel.tau_hat, 1.0);
    assert!(sel.model.theta.unwrap().is_finite());
}

#[test]
fn klic_examples() {
    let clayton = m(CopulaFamily::Clayton, 2.0);
    let same = klic_estimate(&clayton, &clayton, 20_000, 1).unwrap();
    assert!(same.value.abs() <= 3.0 * same.std_error + 1e-15);
    let vs_ind = klic_estimate(&clayton, &CopulaModel::independent(), 20_000, 1).unwrap();
    assert!(vs_ind.value > 3.0 * vs_ind.std_error, "{vs_ind:?}");
    let gumbel = m(CopulaFamily::Gumbel, tau_to_theta(CopulaFamily::Gumbel, 0.5).unwrap().unwrap());
    let vs_gum = klic_estimate(&clayton, &gumbel, 20_000, 1).unwrap();
    assert!(vs_gum.value < vs_ind.value, "{vs_gum:?} {vs_ind:?}");
    assert!(klic_estimate(&clayton, &gumbel, 10, 1).is_err());
}

#[test]
fn strong_dependence_stays_finite_at_the_clamp() {
    let pts = [PSEUDO_OBS_EPS, 1e-6, 0.5, 1.0 - 1e-6, 1.0 - PSEUDO_OBS_EPS];
    for f in CopulaFamily::PANEL {
        for t in [-500.0, -30.0, 1.0001, 3.0, 100.0, 300.0] {
            let Ok(model) = CopulaModel::new(f, t) else { continue };
            for &u in &pts {
                for &v in &pts {
                    assert!(model.ln_pdf(u, v).is_finite(), "{f:?} {t} ({u}, {v})");
                    assert!(model.h(u, v).is_finite());
                }
            }
        }
    }
    // deep in the joint upper tail Joe's log-density grows like ln θ − ln ū
    let joe = m(CopulaFamily::Joe, 100.0);
    let l = joe.ln_pdf(1.0 - 1e-6, 1.0 - 1e-6);
    assert!(l > 0.0 && l < 50.0, "{l}");
}
