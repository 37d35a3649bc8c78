//! Kendall's tau as a function of the copula parameter, and its inverse.

use super::CopulaFamily;
use statrs::function::gamma::digamma;

use crate::numeric::{bisect_increasing, integrate};
use crate::{Error, Result};

/// Debye function `D₁(θ) = θ⁻¹ ∫₀^θ t / (eᵗ − 1) dt` for `θ > 0`.
pub(crate) fn debye1(theta: f64) -> f64 {
    let f = |t: f64| if t == 0.0 { 1.0 } else { t / t.exp_m1() };
    integrate(f, 0.0, theta, 1e-15, 1e-12) / theta
}

fn frank_tau(theta: f64) -> f64 {
    let t = theta.abs();
    let tau = if t < 0.1 {
        // series of 1 − 4(1 − D₁(θ))/θ around zero
        t / 9.0 - t.powi(3) / 900.0 + t.powi(5) / 52_920.0
    } else {
        1.0 - 4.0 / t * (1.0 - debye1(t))
    };
    tau.copysign(theta)
}

/// Joe tau through the digamma function. The form has a removable
/// singularity at `θ = 2`, where the quadrature is used instead.
fn joe_tau(theta: f64) -> f64 {
    if theta == 1.0 {
        return 0.0;
    }
    if (theta - 2.0).abs() < 1e-4 {
        return joe_tau_quadrature(theta);
    }
    1.0 + 2.0 / (2.0 - theta) * (digamma(2.0) - digamma(2.0 / theta + 1.0))
}

/// `τ = 1 + 4 ∫₀¹ φ(t)/φ'(t) dt` for the Joe generator, written in
/// `x = 1 − t`.
fn joe_tau_quadrature(theta: f64) -> f64 {
    let f = |x: f64| {
        if x <= 0.0 || x >= 1.0 {
            return 0.0;
        }
        let xt = x.powf(theta);
        let om = -(theta * x.ln()).exp_m1();
        om * (-xt).ln_1p() / (theta * x.powf(theta - 1.0))
    };
    1.0 + 4.0 * integrate(f, 0.0, 1.0, 1e-14, 1e-12)
}

/// Kendall's tau of `family` at parameter `theta`.
pub fn theta_to_tau(family: CopulaFamily, theta: f64) -> Result<f64> {
    if family != CopulaFamily::Independent && !family.theta_valid(theta) {
        return Err(Error::InvalidTheta {
            family: family.name(),
            theta,
        });
    }
    Ok(match family {
        CopulaFamily::Independent => 0.0,
        CopulaFamily::Clayton => theta / (theta + 2.0),
        CopulaFamily::Gumbel => 1.0 - 1.0 / theta,
        CopulaFamily::Frank => frank_tau(theta),
        CopulaFamily::Joe | CopulaFamily::SurvivalJoe => joe_tau(theta),
    })
}

/// Whether `tau` is attainable by `family` with a valid parameter.
pub fn tau_attainable(family: CopulaFamily, tau: f64) -> bool {
    match family {
        CopulaFamily::Independent => tau == 0.0,
        CopulaFamily::Clayton => tau > 0.0 && tau < 1.0,
        CopulaFamily::Gumbel | CopulaFamily::Joe | CopulaFamily::SurvivalJoe => (0.0..1.0).contains(&tau),
        CopulaFamily::Frank => tau > -1.0 && tau < 1.0,
    }
}

/// Parameter that reproduces Kendall's tau `tau`.
///
/// Frank and Joe are inverted numerically by bisection on a bracket that is
/// grown until it contains the target. Frank at `τ = 0` has no valid
/// parameter and returns `Ok(None)`: the limit is the independence copula.
pub fn tau_to_theta(family: CopulaFamily, tau: f64) -> Result<Option<f64>> {
    if family == CopulaFamily::Independent || (family == CopulaFamily::Frank && tau == 0.0) {
        return Ok(None);
    }
    if !tau_attainable(family, tau) {
        return Err(Error::TauOutOfRange {
            family: family.name(),
            tau,
        });
    }
    let theta = match family {
        CopulaFamily::Clayton => 2.0 * tau / (1.0 - tau),
        CopulaFamily::Gumbel => 1.0 / (1.0 - tau),
        CopulaFamily::Frank => {
            let t = invert_increasing(frank_tau, tau.abs(), 0.0, 10.0);
            t.copysign(tau)
        }
        CopulaFamily::Joe | CopulaFamily::SurvivalJoe => {
            if tau == 0.0 {
                1.0
            } else {
                invert_increasing(joe_tau, tau, 1.0, 4.0)
            }
        }
        CopulaFamily::Independent => unreachable!(),
    };
    Ok(Some(theta))
}

fn invert_increasing(f: fn(f64) -> f64, target: f64, lo: f64, mut hi: f64) -> f64 {
    while f(hi) < target {
        hi *= 2.0;
    }
    bisect_increasing(f, target, lo, hi, 1e-13 * hi)
}
