//! Closed-form Weibull and Cox-Weibull survival math.
//!
//! Everything here reduces to the cumulative hazard accumulated over an
//! age interval,
//!
//! ```text
//! A = (t2^c - t1^c) * lambda^c * e^score,
//! ```
//!
//! with `cond_survival = exp(-A)` and `failure_prob = -expm1(-A)`. The
//! direct form of the failure probability cancels catastrophically for
//! small intervals, so `A` is assembled in log space and the power
//! difference `t2^c - t1^c` is computed through `ln_1p`/`exp_m1` when
//! `t1 > 0`. Every survival quantity in the crate funnels through
//! [`interval_hazard`], which is what makes the algebraic identities
//! (ratio, complement, `t1 = 0` reduction) hold to machine precision.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Population Weibull rate and shape, both strictly positive and finite.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "(f64, f64)", into = "(f64, f64)")]
pub struct WeibullParams {
    lambda: f64,
    c: f64,
}

impl WeibullParams {
    pub fn new(lambda: f64, c: f64) -> Result<Self> {
        if !(lambda.is_finite() && lambda > 0.0) {
            return Err(Error::Validation(format!(
                "weibull rate must be finite and > 0, got {lambda}"
            )));
        }
        if !(c.is_finite() && c > 0.0) {
            return Err(Error::Validation(format!(
                "weibull shape must be finite and > 0, got {c}"
            )));
        }
        Ok(Self { lambda, c })
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn c(&self) -> f64 {
        self.c
    }
}

impl TryFrom<(f64, f64)> for WeibullParams {
    type Error = Error;

    fn try_from(v: (f64, f64)) -> Result<Self> {
        Self::new(v.0, v.1)
    }
}

impl From<WeibullParams> for (f64, f64) {
    fn from(p: WeibullParams) -> (f64, f64) {
        (p.lambda, p.c)
    }
}

fn check_time(t: f64, what: &str) -> Result<()> {
    if !t.is_finite() || t < 0.0 {
        return Err(Error::Domain(format!(
            "{what} must be finite and >= 0, got {t}"
        )));
    }
    Ok(())
}

/// `t2^c - t1^c` without cancellation when `t2` is close to `t1`.
fn powc_diff(c: f64, t1: f64, t2: f64) -> f64 {
    if t1 == 0.0 {
        return t2.powf(c);
    }
    if t2 == t1 {
        return 0.0;
    }
    t1.powf(c) * (c * ((t2 - t1) / t1).ln_1p()).exp_m1()
}

/// Cumulative hazard `(t2^c - t1^c) * lambda^c * e^score` over `[t1, t2]`.
///
/// Returns exactly 0 for a zero-width interval; errors on `t1 > t2` or
/// negative times.
pub fn interval_hazard(p: WeibullParams, score: f64, t1: f64, t2: f64) -> Result<f64> {
    check_time(t1, "t1")?;
    check_time(t2, "t2")?;
    if t1 > t2 {
        return Err(Error::Domain(format!(
            "interval requires t1 <= t2, got t1 = {t1}, t2 = {t2}"
        )));
    }
    let pd = powc_diff(p.c, t1, t2);
    if pd == 0.0 {
        return Ok(0.0);
    }
    Ok((p.c * p.lambda.ln() + score + pd.ln()).exp())
}

/// Baseline survival `S0(t) = exp(-(lambda t)^c)`.
pub fn survival0(p: WeibullParams, t: f64) -> Result<f64> {
    cox_survival(p, 0.0, t)
}

/// Proportional-hazards survival `S0(t)^{e^score} = exp(-(lambda t)^c e^score)`.
pub fn cox_survival(p: WeibullParams, score: f64, t: f64) -> Result<f64> {
    Ok((-interval_hazard(p, score, 0.0, t)?).exp())
}

/// Conditional survival over a fleet cycle:
/// `p[T > t2 | T > t1, x] = exp((t1^c - t2^c) lambda^c e^score)`.
pub fn cond_survival(p: WeibullParams, score: f64, t1: f64, t2: f64) -> Result<f64> {
    Ok((-interval_hazard(p, score, t1, t2)?).exp())
}

/// Log of [`cond_survival`], i.e. `-interval_hazard`.
pub fn log_cond_survival(p: WeibullParams, score: f64, t1: f64, t2: f64) -> Result<f64> {
    Ok(-interval_hazard(p, score, t1, t2)?)
}

/// Complement of [`cond_survival`], computed as `-expm1(-A)` so tiny
/// intervals keep first-order accuracy instead of cancelling to 0.
pub fn failure_prob(p: WeibullParams, score: f64, t1: f64, t2: f64) -> Result<f64> {
    Ok(-(-interval_hazard(p, score, t1, t2)?).exp_m1())
}

/// Log of [`failure_prob`]; stable for both tiny and huge hazards.
pub fn log_failure_prob(p: WeibullParams, score: f64, t1: f64, t2: f64) -> Result<f64> {
    let a = interval_hazard(p, score, t1, t2)?;
    Ok((-(-a).exp_m1()).ln())
}

/// Hard label from a failure probability: 1 iff `prob_fail > threshold`
/// (strict, so ties classify as pass).
pub fn classify(prob_fail: f64, threshold: f64) -> u8 {
    u8::from(prob_fail > threshold)
}

/// Clamp bound for binary cross entropy.
pub const BCE_EPS: f64 = 1e-12;

/// Binary cross entropy `-[y ln p + (1-y) ln(1-p)]` with `p` clamped to
/// `[BCE_EPS, 1 - BCE_EPS]`.
pub fn bce_loss(prob_fail: f64, y: u8) -> f64 {
    let p = prob_fail.clamp(BCE_EPS, 1.0 - BCE_EPS);
    if y == 1 {
        -p.ln()
    } else {
        -(-p).ln_1p()
    }
}

/// [`bce_loss`] evaluated from the cumulative hazard instead of the
/// probability. For `y = 0` the cross entropy IS the hazard
/// (`-ln(1-p) = A`), so going through `p = 1 - e^-A` and back would
/// quantize the loss near saturation; training differentiates this form.
/// The clamp bounds are the images of the probability clamp.
pub fn bce_loss_hazard(hazard: f64, y: u8) -> f64 {
    let bce_max = -BCE_EPS.ln();
    let bce_min = -(-BCE_EPS).ln_1p();
    if y == 0 {
        hazard.clamp(bce_min, bce_max)
    } else {
        let p = -(-hazard).exp_m1();
        if p < BCE_EPS {
            bce_max
        } else if p > 1.0 - BCE_EPS {
            bce_min
        } else {
            -(-(-hazard).exp_m1()).ln()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::Rng;

    fn params(lambda: f64, c: f64) -> WeibullParams {
        WeibullParams::new(lambda, c).unwrap()
    }

    fn random_case(rng: &mut impl Rng) -> (WeibullParams, f64, f64, f64) {
        let p = params(rng.random_range(0.05..1.0), rng.random_range(0.3..3.0));
        let score = rng.random_range(-2.0..2.0);
        let a: f64 = rng.random_range(0.0..5.0);
        let b: f64 = rng.random_range(0.0..5.0);
        (p, score, a.min(b), a.max(b))
    }

    #[test]
    fn params_reject_nonpositive() {
        assert!(WeibullParams::new(0.0, 1.0).is_err());
        assert!(WeibullParams::new(1.0, -2.0).is_err());
        assert!(WeibullParams::new(f64::NAN, 1.0).is_err());
        assert!(WeibullParams::new(1.0, f64::INFINITY).is_err());
    }

    #[test]
    fn survival0_closed_forms() {
        assert_relative_eq!(
            survival0(params(1.0, 1.0), 1.0).unwrap(),
            (-1.0f64).exp(),
            max_relative = 1e-12
        );
        assert_eq!(survival0(params(0.3, 2.2), 0.0).unwrap(), 1.0);
        // (0.5 * 2)^2 = 1
        assert_relative_eq!(
            survival0(params(0.5, 2.0), 2.0).unwrap(),
            (-1.0f64).exp(),
            max_relative = 1e-12
        );
        assert!(survival0(params(1.0, 1.0), -0.5).is_err());
    }

    #[test]
    fn cox_survival_reduces_and_scales() {
        let p = params(0.7, 1.4);
        assert_eq!(
            cox_survival(p, 0.0, 3.0).unwrap(),
            survival0(p, 3.0).unwrap()
        );
        // doubling the hazard with score = ln 2
        assert_relative_eq!(
            cox_survival(params(1.0, 1.0), 2.0f64.ln(), 1.0).unwrap(),
            (-2.0f64).exp(),
            max_relative = 1e-12
        );
        // vanishing hazard
        assert!(cox_survival(p, -50.0, 3.0).unwrap() > 1.0 - 1e-9);
    }

    #[test]
    fn cond_survival_zero_width_is_exactly_one() {
        assert_eq!(cond_survival(params(0.2, 1.7), 1.3, 7.0, 7.0).unwrap(), 1.0);
    }

    #[test]
    fn cond_survival_exponential_memorylessness() {
        assert_relative_eq!(
            cond_survival(params(0.1, 1.0), 0.0, 10.0, 20.0).unwrap(),
            (-1.0f64).exp(),
            max_relative = 1e-12
        );
    }

    #[test]
    fn cond_survival_rejects_reversed_interval() {
        assert!(cond_survival(params(1.0, 1.0), 0.0, 2.0, 1.0).is_err());
    }

    #[test]
    fn ratio_identity_over_random_draws() {
        let mut rng = crate::seeding::rng(11, "weibull-ratio", 0);
        for _ in 0..1000 {
            let (p, s, t1, t2) = random_case(&mut rng);
            let cond = cond_survival(p, s, t1, t2).unwrap();
            let ratio = cox_survival(p, s, t2).unwrap() / cox_survival(p, s, t1).unwrap();
            assert!(
                (cond - ratio).abs() < 1e-12,
                "ratio identity broke: cond={cond} ratio={ratio} p={p:?} s={s} t1={t1} t2={t2}"
            );
        }
    }

    #[test]
    fn complement_identity_over_random_draws() {
        let mut rng = crate::seeding::rng(11, "weibull-complement", 0);
        for _ in 0..1000 {
            let (p, s, t1, t2) = random_case(&mut rng);
            let total =
                failure_prob(p, s, t1, t2).unwrap() + cond_survival(p, s, t1, t2).unwrap();
            assert!((total - 1.0).abs() < 1e-12, "complement broke: {total}");
        }
    }

    #[test]
    fn from_zero_matches_cox_exactly() {
        let mut rng = crate::seeding::rng(11, "weibull-zero", 0);
        for _ in 0..200 {
            let (p, s, _, t2) = random_case(&mut rng);
            assert_eq!(
                cond_survival(p, s, 0.0, t2).unwrap(),
                cox_survival(p, s, t2).unwrap()
            );
        }
    }

    #[test]
    fn tiny_interval_first_order_taylor() {
        let mut rng = crate::seeding::rng(11, "weibull-taylor", 0);
        for _ in 0..1000 {
            let p = params(rng.random_range(0.05..1.0), rng.random_range(0.3..3.0));
            let s = rng.random_range(-2.0..2.0);
            let t1 = rng.random_range(0.5..10.0);
            let dt = 1e-9;
            let got = failure_prob(p, s, t1, t1 + dt).unwrap();
            let taylor =
                p.c() * p.lambda().powf(p.c()) * t1.powf(p.c() - 1.0) * s.exp() * dt;
            assert!(got > 0.0, "cancelled to zero at t1={t1}");
            assert_relative_eq!(got, taylor, max_relative = 1e-6);
        }
    }

    #[test]
    fn failure_prob_saturates_for_large_score() {
        let got = failure_prob(params(0.5, 1.2), 30.0, 1.0, 2.0).unwrap();
        assert!(got > 1.0 - 1e-9);
        assert_eq!(failure_prob(params(0.5, 1.2), 0.0, 3.0, 3.0).unwrap(), 0.0);
    }

    #[test]
    fn survival_strictly_decreasing_in_t() {
        let p = params(0.4, 1.8);
        let grid: Vec<f64> = (1..50).map(|i| i as f64 * 0.25).collect();
        for w in grid.windows(2) {
            assert!(survival0(p, w[1]).unwrap() < survival0(p, w[0]).unwrap());
            assert!(cox_survival(p, 0.7, w[1]).unwrap() < cox_survival(p, 0.7, w[0]).unwrap());
        }
    }

    #[test]
    fn score_gradient_of_log_cond_survival() {
        // d/ds log cond_survival = (t1^c - t2^c) lambda^c e^s = -A
        let mut rng = crate::seeding::rng(11, "weibull-grad", 0);
        let h = 1e-6;
        for _ in 0..200 {
            let (p, s, t1, t2) = random_case(&mut rng);
            if t2 - t1 < 1e-3 {
                continue;
            }
            let analytic = -interval_hazard(p, s, t1, t2).unwrap();
            let up = log_cond_survival(p, s + h, t1, t2).unwrap();
            let dn = log_cond_survival(p, s - h, t1, t2).unwrap();
            let fd = (up - dn) / (2.0 * h);
            if analytic.abs() > 1e-8 {
                assert_relative_eq!(fd, analytic, max_relative = 1e-6);
            }
        }
    }

    #[test]
    fn classify_is_strict() {
        assert_eq!(classify(0.51, 0.5), 1);
        assert_eq!(classify(0.5, 0.5), 0);
        assert_eq!(classify(0.0, 0.5), 0);
    }

    #[test]
    fn bce_closed_forms() {
        assert_relative_eq!(bce_loss(0.5, 1), 2.0f64.ln(), max_relative = 1e-12);
        assert!(bce_loss(1.0 - BCE_EPS, 1) < 1e-11);
        assert_relative_eq!(bce_loss(0.0, 1), -BCE_EPS.ln(), max_relative = 1e-9);
        assert_relative_eq!(bce_loss(0.0, 1), 27.631021, max_relative = 1e-6);
    }

    #[test]
    fn bce_hazard_form_agrees_with_probability_form() {
        let mut rng = crate::seeding::rng(11, "bce-hazard", 0);
        for _ in 0..1000 {
            let a: f64 = rng.random_range(0.0..8.0);
            let p = -(-a).exp_m1();
            for y in [0u8, 1u8] {
                let via_p = bce_loss(p, y);
                let via_a = bce_loss_hazard(a, y);
                assert!(
                    (via_p - via_a).abs() <= 1e-9 * via_p.abs().max(1.0),
                    "a={a} y={y}: {via_p} vs {via_a}"
                );
            }
        }
        // saturation matches the probability clamp
        assert_eq!(bce_loss_hazard(100.0, 0), -BCE_EPS.ln());
        assert_eq!(bce_loss_hazard(100.0, 1), -(-BCE_EPS).ln_1p());
        assert_eq!(bce_loss_hazard(0.0, 1), -BCE_EPS.ln());
        assert_eq!(bce_loss_hazard(0.0, 0), -(-BCE_EPS).ln_1p());
    }
}
