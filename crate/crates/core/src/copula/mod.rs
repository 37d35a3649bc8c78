//! Bivariate Archimedean copulas.
//!
//! Six one-parameter families are supported: independence, Clayton, Gumbel,
//! Frank, Joe and the 180° rotation of Joe. Every model evaluates its CDF,
//! density and h-function (`∂C/∂v`, the conditional law of `U` given `V = v`)
//! from closed forms written to stay accurate near the corners of the unit
//! square.

mod families;
mod estimate;
mod sample;
mod tau;

pub use estimate::{
    copula_loglik, kendall_tau_empirical, klic_estimate, mle_theta, select_family, select_family_given_tau,
    select_family_with,
    Candidate, KlicEstimate, Selection, ThetaMethod,
};
pub use sample::sample;
pub use tau::{tau_to_theta, theta_to_tau};

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Clamp applied to pseudo-observations before taking logarithms.
pub const PSEUDO_OBS_EPS: f64 = 1e-10;

/// A pair of pseudo-observations `(u, v)`.
pub type Pair = (f64, f64);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CopulaFamily {
    Independent,
    Clayton,
    Gumbel,
    Frank,
    Joe,
    SurvivalJoe,
}

impl CopulaFamily {
    /// The full panel in tie-breaking order.
    pub const PANEL: [CopulaFamily; 6] = [
        CopulaFamily::Independent,
        CopulaFamily::Clayton,
        CopulaFamily::Gumbel,
        CopulaFamily::Frank,
        CopulaFamily::Joe,
        CopulaFamily::SurvivalJoe,
    ];

    pub fn name(self) -> &'static str {
        match self {
            CopulaFamily::Independent => "independent",
            CopulaFamily::Clayton => "clayton",
            CopulaFamily::Gumbel => "gumbel",
            CopulaFamily::Frank => "frank",
            CopulaFamily::Joe => "joe",
            CopulaFamily::SurvivalJoe => "survival-joe",
        }
    }

    /// Number of free parameters.
    pub fn n_params(self) -> usize {
        match self {
            CopulaFamily::Independent => 0,
            _ => 1,
        }
    }

    /// Whether a parameter value lies in the family's domain.
    pub fn theta_valid(self, theta: f64) -> bool {
        theta.is_finite()
            && match self {
                CopulaFamily::Independent => true,
                CopulaFamily::Clayton => theta > 0.0,
                CopulaFamily::Gumbel | CopulaFamily::Joe | CopulaFamily::SurvivalJoe => theta >= 1.0,
                CopulaFamily::Frank => theta != 0.0,
            }
    }
}

impl std::fmt::Display for CopulaFamily {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for CopulaFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.to_ascii_lowercase().replace('_', "-");
        CopulaFamily::PANEL
            .into_iter()
            .find(|f| f.name() == key || (key == "rotated-joe" && *f == CopulaFamily::SurvivalJoe))
            .ok_or_else(|| Error::invalid(format!("unknown copula family '{s}'")))
    }
}

/// How a model's parameter was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThetaSource {
    TauInversion,
    Mle,
    #[default]
    Fixed,
}

/// A copula family with its parameter. Independent models carry no parameter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CopulaModel {
    pub family: CopulaFamily,
    pub theta: Option<f64>,
    pub source: ThetaSource,
}

impl CopulaModel {
    pub fn independent() -> Self {
        Self {
            family: CopulaFamily::Independent,
            theta: None,
            source: ThetaSource::Fixed,
        }
    }

    /// Builds a validated model. Frank with `θ = 0` is the independence copula
    /// and is returned as such.
    pub fn new(family: CopulaFamily, theta: f64) -> Result<Self> {
        if family == CopulaFamily::Independent || (family == CopulaFamily::Frank && theta == 0.0) {
            return Ok(Self::independent());
        }
        if !family.theta_valid(theta) {
            return Err(Error::InvalidTheta {
                family: family.name(),
                theta,
            });
        }
        Ok(Self {
            family,
            theta: Some(theta),
            source: ThetaSource::Fixed,
        })
    }

    pub fn with_source(mut self, source: ThetaSource) -> Self {
        if self.family != CopulaFamily::Independent {
            self.source = source;
        }
        self
    }

    /// Re-checks the invariants; useful after deserialisation.
    pub fn validate(&self) -> Result<()> {
        match (self.family, self.theta) {
            (CopulaFamily::Independent, _) => Ok(()),
            (f, Some(t)) if f.theta_valid(t) => Ok(()),
            (f, t) => Err(Error::InvalidTheta {
                family: f.name(),
                theta: t.unwrap_or(f64::NAN),
            }),
        }
    }

    fn th(&self) -> f64 {
        self.theta.unwrap_or(0.0)
    }

    /// `C(u, v)`; arguments are clamped to `[0, 1]` and the uniform-margin
    /// boundary values are returned exactly.
    pub fn cdf(&self, u: f64, v: f64) -> f64 {
        let (u, v) = (u.clamp(0.0, 1.0), v.clamp(0.0, 1.0));
        if u == 0.0 || v == 0.0 {
            return 0.0;
        }
        if u == 1.0 {
            return v;
        }
        if v == 1.0 {
            return u;
        }
        let c = families::cdf(self.family, self.th(), u, v);
        c.clamp((u + v - 1.0).max(0.0), u.min(v))
    }

    /// `log c(u, v)` at an interior point.
    pub fn ln_pdf(&self, u: f64, v: f64) -> f64 {
        families::ln_pdf(self.family, self.th(), u, v)
    }

    /// `c(u, v)` at an interior point.
    pub fn pdf(&self, u: f64, v: f64) -> f64 {
        self.ln_pdf(u, v).exp()
    }

    /// `h(u | v) = ∂C(u, v)/∂v`. `v` is clamped into `[ε, 1 − ε]`.
    pub fn h(&self, u: f64, v: f64) -> f64 {
        if u <= 0.0 {
            return 0.0;
        }
        if u >= 1.0 {
            return 1.0;
        }
        let v = v.clamp(PSEUDO_OBS_EPS, 1.0 - PSEUDO_OBS_EPS);
        families::h(self.family, self.th(), u, v).clamp(0.0, 1.0)
    }

    /// Solves `h(u | v) = w` for `u` by bisection to `1e-10`.
    pub fn h_inverse(&self, w: f64, v: f64) -> f64 {
        if self.family == CopulaFamily::Independent {
            return w;
        }
        crate::numeric::bisect_increasing(|u| self.h(u, v), w, 0.0, 1.0, 1e-10)
    }

    /// Kendall's tau implied by the model.
    pub fn tau(&self) -> f64 {
        match self.family {
            CopulaFamily::Independent => 0.0,
            f => theta_to_tau(f, self.th()).unwrap_or(f64::NAN),
        }
    }
}

fn unit_interval(name: &str, x: f64) -> Result<()> {
    if (0.0..=1.0).contains(&x) {
        Ok(())
    } else {
        Err(Error::invalid(format!("{name} = {x} is outside [0, 1]")))
    }
}

/// Copula CDF with argument checks.
pub fn copula_cdf(model: &CopulaModel, u: f64, v: f64) -> Result<f64> {
    model.validate()?;
    unit_interval("u", u)?;
    unit_interval("v", v)?;
    Ok(model.cdf(u, v))
}

/// Copula density; the boundary of the unit square is rejected.
pub fn copula_pdf(model: &CopulaModel, u: f64, v: f64) -> Result<f64> {
    model.validate()?;
    if !(u > 0.0 && u < 1.0 && v > 0.0 && v < 1.0) {
        return Err(Error::invalid(format!("density needs an interior point, got ({u}, {v})")));
    }
    Ok(model.pdf(u, v))
}

/// Conditional CDF `C(u | v)`.
pub fn h_function(model: &CopulaModel, u: f64, v: f64) -> Result<f64> {
    model.validate()?;
    unit_interval("u", u)?;
    if !(v > 0.0 && v < 1.0) {
        return Err(Error::invalid(format!("v = {v} must lie in (0, 1)")));
    }
    Ok(model.h(u, v))
}

#[cfg(test)]
mod tests;
