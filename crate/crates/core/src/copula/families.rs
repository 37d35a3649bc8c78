//! Closed forms per family, evaluated at interior points with a valid `θ`.

use super::CopulaFamily;

/// `ln(e^a + e^b − 1)` for `a, b ≥ 0`.
fn ln_sum_exp_minus_one(a: f64, b: f64) -> f64 {
    let m = a.max(b);
    if m < 30.0 {
        (a.exp_m1() + b.exp_m1()).ln_1p()
    } else {
        m + ((a - m).exp() + (b - m).exp() - (-m).exp()).ln()
    }
}

fn ln_add_exp(a: f64, b: f64) -> f64 {
    let m = a.max(b);
    m + ((a - m).exp() + (b - m).exp()).ln()
}

mod clayton {
    use super::ln_sum_exp_minus_one;

    /// `ln(u^−θ + v^−θ − 1)`.
    fn big_l(t: f64, u: f64, v: f64) -> f64 {
        ln_sum_exp_minus_one(-t * u.ln(), -t * v.ln())
    }

    pub fn cdf(t: f64, u: f64, v: f64) -> f64 {
        (-big_l(t, u, v) / t).exp()
    }

    pub fn ln_pdf(t: f64, u: f64, v: f64) -> f64 {
        t.ln_1p() + (-t - 1.0) * (u.ln() + v.ln()) + (-2.0 - 1.0 / t) * big_l(t, u, v)
    }

    pub fn h(t: f64, u: f64, v: f64) -> f64 {
        ((-t - 1.0) * v.ln() + (-1.0 / t - 1.0) * big_l(t, u, v)).exp()
    }
}

mod gumbel {
    use super::ln_add_exp;

    /// `(x, y, ln A)` with `x = −ln u`, `y = −ln v`, `A = (x^θ + y^θ)^{1/θ}`.
    fn parts(t: f64, u: f64, v: f64) -> (f64, f64, f64) {
        let x = -u.ln();
        let y = -v.ln();
        let ln_a = ln_add_exp(t * x.ln(), t * y.ln()) / t;
        (x, y, ln_a)
    }

    pub fn cdf(t: f64, u: f64, v: f64) -> f64 {
        let (_, _, ln_a) = parts(t, u, v);
        (-ln_a.exp()).exp()
    }

    pub fn ln_pdf(t: f64, u: f64, v: f64) -> f64 {
        let (x, y, ln_a) = parts(t, u, v);
        let a = ln_a.exp();
        -a + (t - 1.0) * (x.ln() + y.ln()) + x + y + (1.0 - 2.0 * t) * ln_a + (a + t - 1.0).ln()
    }

    pub fn h(t: f64, u: f64, v: f64) -> f64 {
        let (_, y, ln_a) = parts(t, u, v);
        (-ln_a.exp() + (1.0 - t) * ln_a + (t - 1.0) * y.ln() + y).exp()
    }
}

/// Frank with `θ > 0`; negative parameters are handled by rotation.
mod frank {
    /// `ln(1 + e^{θ(min−max)} − e^{−θ·max} − e^{θ(min−1)})`, written as a sum
    /// of `expm1` terms that are all of the same sign.
    fn ln_rest(t: f64, u: f64, v: f64) -> f64 {
        let (lo, hi) = if u < v { (u, v) } else { (v, u) };
        let rest = (t * (lo - hi)).exp_m1() - (-t * hi).exp_m1() - (t * (lo - 1.0)).exp_m1();
        rest.ln()
    }

    fn ln_norm(t: f64) -> f64 {
        (-(-t).exp_m1()).ln()
    }

    pub fn cdf(t: f64, u: f64, v: f64) -> f64 {
        u.min(v) - (ln_rest(t, u, v) - ln_norm(t)) / t
    }

    pub fn ln_pdf(t: f64, u: f64, v: f64) -> f64 {
        t.ln() + ln_norm(t) + t * (u.min(v) - u.max(v)) - 2.0 * ln_rest(t, u, v)
    }

    pub fn h(t: f64, u: f64, v: f64) -> f64 {
        let hi = u.max(v);
        ((t * (u - hi)).exp() - (-t * hi).exp()) / ln_rest(t, u, v).exp()
    }
}

mod joe {
    use super::ln_add_exp;

    /// `(ln ū, ln v̄, 1 − ū^θ, ln S)` with `S = ū^θ + v̄^θ − ū^θ v̄^θ`.
    fn parts(t: f64, u: f64, v: f64) -> (f64, f64, f64, f64) {
        let lu = (-u).ln_1p();
        let lv = (-v).ln_1p();
        let a = (t * lu).exp();
        let b = (t * lv).exp();
        let om_a = -(t * lu).exp_m1();
        let om_b = -(t * lv).exp_m1();
        let s = a + b * om_a;
        let ln_s = if s > 0.5 {
            (-(om_a * om_b)).ln_1p()
        } else {
            // ū^θ and v̄^θ can both underflow near (1, 1)
            ln_add_exp(t * lu, t * lv + om_a.ln())
        };
        (lu, lv, om_a, ln_s)
    }

    pub fn cdf(t: f64, u: f64, v: f64) -> f64 {
        let (_, _, _, ln_s) = parts(t, u, v);
        -(ln_s / t).exp_m1()
    }

    pub fn ln_pdf(t: f64, u: f64, v: f64) -> f64 {
        let (lu, lv, _, ln_s) = parts(t, u, v);
        (1.0 / t - 2.0) * ln_s + (t - 1.0) * (lu + lv) + (t - 1.0 + ln_s.exp()).ln()
    }

    pub fn h(t: f64, u: f64, v: f64) -> f64 {
        let (_, lv, om_a, ln_s) = parts(t, u, v);
        ((1.0 / t - 1.0) * ln_s + (t - 1.0) * lv).exp() * om_a
    }
}

pub(super) fn cdf(family: CopulaFamily, t: f64, u: f64, v: f64) -> f64 {
    match family {
        CopulaFamily::Independent => u * v,
        CopulaFamily::Clayton => clayton::cdf(t, u, v),
        CopulaFamily::Gumbel => gumbel::cdf(t, u, v),
        CopulaFamily::Frank if t > 0.0 => frank::cdf(t, u, v),
        CopulaFamily::Frank => v - frank::cdf(-t, 1.0 - u, v),
        CopulaFamily::Joe => joe::cdf(t, u, v),
        CopulaFamily::SurvivalJoe => u + v - 1.0 + joe::cdf(t, 1.0 - u, 1.0 - v),
    }
}

pub(super) fn ln_pdf(family: CopulaFamily, t: f64, u: f64, v: f64) -> f64 {
    match family {
        CopulaFamily::Independent => 0.0,
        CopulaFamily::Clayton => clayton::ln_pdf(t, u, v),
        CopulaFamily::Gumbel => gumbel::ln_pdf(t, u, v),
        CopulaFamily::Frank if t > 0.0 => frank::ln_pdf(t, u, v),
        CopulaFamily::Frank => frank::ln_pdf(-t, 1.0 - u, v),
        CopulaFamily::Joe => joe::ln_pdf(t, u, v),
        CopulaFamily::SurvivalJoe => joe::ln_pdf(t, 1.0 - u, 1.0 - v),
    }
}

pub(super) fn h(family: CopulaFamily, t: f64, u: f64, v: f64) -> f64 {
    match family {
        CopulaFamily::Independent => u,
        CopulaFamily::Clayton => clayton::h(t, u, v),
        CopulaFamily::Gumbel => gumbel::h(t, u, v),
        CopulaFamily::Frank if t > 0.0 => frank::h(t, u, v),
        CopulaFamily::Frank => 1.0 - frank::h(-t, 1.0 - u, v),
        CopulaFamily::Joe => joe::h(t, u, v),
        CopulaFamily::SurvivalJoe => 1.0 - joe::h(t, 1.0 - u, 1.0 - v),
    }
}
