//! Asymptote forecasting: the year a record reaches 99.95% of its limit,
//! Monte Carlo credibility intervals around it, and progression ratios.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::fit::FitResult;
use crate::models::ExpWrParams;
use crate::stats::quantile_linear;
use crate::{CoreError, Result};

/// Fraction divisor for the standard forecast target: the record is
/// considered settled once within b/2000 of the asymptote b.
pub const LIMIT_DIVISOR: f64 = 2000.0;

/// Forecast summary for one event, shaped like the `predict` CSV row.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LimitForecast {
    pub event_id: String,
    pub b: f64,
    pub year_9995: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub median_year: f64,
    pub beta: f64,
    pub beta_prime: f64,
}

/// Quantiles of the Monte Carlo forecast distribution, reported both for
/// the limit year and for the asymptote itself.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct McCredibility {
    pub median_year: f64,
    pub year_p2_5: f64,
    pub year_p97_5: f64,
    pub asymptote_median: f64,
    pub asymptote_p2_5: f64,
    pub asymptote_p97_5: f64,
}

fn target_year(
    p: &ExpWrParams,
    chronometric: bool,
    period_years: (f64, f64),
    divisor: f64,
) -> Result<f64> {
    if !(divisor > 0.0) {
        return Err(CoreError::Domain(format!(
            "limit divisor must be positive, got {divisor}"
        )));
    }
    let (t_i, t_f) = period_years;
    if !(t_f > t_i) {
        return Err(CoreError::Domain(format!(
            "period span must be positive, got [{t_i}, {t_f}]"
        )));
    }
    let y_star = if chronometric {
        p.b + p.b / divisor
    } else {
        p.b - p.b / divisor
    };
    let t_prime = p.inverse(y_star)?;
    Ok(t_i + t_prime * (t_f - t_i))
}

/// Calendar year at which the fitted curve comes within `b/divisor` of its
/// asymptote, approaching from above for chronometric events and from
/// below otherwise. The normalised time may exceed 1: the forecast
/// extrapolates past the fitted period.
pub fn limit_year_with_divisor(
    fit: &FitResult,
    chronometric: bool,
    period_years: (f64, f64),
    divisor: f64,
) -> Result<f64> {
    let p = ExpWrParams::from_fit(fit)?;
    target_year(&p, chronometric, period_years, divisor)
}

/// [`limit_year_with_divisor`] at the standard 1/2000 target.
pub fn limit_year(fit: &FitResult, chronometric: bool, period_years: (f64, f64)) -> Result<f64> {
    limit_year_with_divisor(fit, chronometric, period_years, LIMIT_DIVISOR)
}

/// Progression ratios of the first and last best performances against the
/// asymptote, in percent, for speed-like quantities (larger = better).
pub fn beta_ratios(bp_i: f64, bp_f: f64, b: f64) -> Result<(f64, f64)> {
    if !(b > 0.0) {
        return Err(CoreError::Domain(format!(
            "asymptote must be positive, got {b}"
        )));
    }
    if !(bp_i > 0.0) || !(bp_f > 0.0) {
        return Err(CoreError::Domain(format!(
            "best performances must be positive, got {bp_i} and {bp_f}"
        )));
    }
    Ok((bp_i / b * 100.0, bp_f / b * 100.0))
}

struct Chol2 {
    l11: f64,
    l21: f64,
    l22: f64,
}

fn cholesky_2x2(s11: f64, s12: f64, s22: f64) -> Chol2 {
    let l11 = s11.max(0.0).sqrt();
    let l21 = if l11 > 0.0 { s12 / l11 } else { 0.0 };
    let l22 = (s22 - l21 * l21).max(0.0).sqrt();
    Chol2 { l11, l21, l22 }
}

fn standard_normal_pair(rng: &mut ChaCha8Rng) -> (f64, f64) {
    // Box-Muller on u1 in (0, 1].
    let u1 = 1.0 - rng.gen::<f64>();
    let u2: f64 = rng.gen();
    let r = (-2.0 * u1.ln()).sqrt();
    (r * (2.0 * PI * u2).cos(), r * (2.0 * PI * u2).sin())
}

const REJECTS_PER_DRAW: usize = 10;

/// Monte Carlo credibility quantiles for the limit year and asymptote.
///
/// Draws (a, b) jointly from the normal implied by the fit covariance
/// while holding the data-determined amplitude fixed, recomputes the limit
/// year per draw and reports linear-interpolated percentiles. Each draw
/// uses its own RNG substream, so the result depends only on `seed`.
/// Draws outside the parameter domain (a or b not positive) are redrawn,
/// up to ten attempts each.
pub fn mc_credibility(
    fit: &FitResult,
    chronometric: bool,
    period_years: (f64, f64),
    draws: usize,
    seed: u64,
) -> Result<McCredibility> {
    if draws < 1000 {
        return Err(CoreError::Domain(format!(
            "need at least 1000 draws for stable quantiles, got {draws}"
        )));
    }
    let point = ExpWrParams::from_fit(fit)?;
    // Fail fast if the point estimate itself cannot reach the target.
    target_year(&point, chronometric, period_years, LIMIT_DIVISOR)?;
    let cov = fit.covariance.as_ref().ok_or_else(|| {
        CoreError::Domain(
            "fit has no covariance; refit with enough observations to estimate one".into(),
        )
    })?;
    let chol = cholesky_2x2(cov[(1, 1)], cov[(1, 2)], cov[(2, 2)]);

    let mut years = Vec::with_capacity(draws);
    let mut asymptotes = Vec::with_capacity(draws);
    for i in 0..draws {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(i as u64);
        let mut accepted = None;
        for _ in 0..REJECTS_PER_DRAW {
            let (z1, z2) = standard_normal_pair(&mut rng);
            let a = point.a + chol.l11 * z1;
            let b = point.b + chol.l21 * z1 + chol.l22 * z2;
            if a > 0.0 && b > 0.0 {
                accepted = Some(ExpWrParams {
                    delta: point.delta,
                    a,
                    b,
                });
                break;
            }
        }
        let drawn = accepted.ok_or_else(|| {
            CoreError::Domain(
                "covariance keeps producing out-of-domain draws; refit before forecasting".into(),
            )
        })?;
        years.push(target_year(&drawn, chronometric, period_years, LIMIT_DIVISOR)?);
        asymptotes.push(drawn.b);
    }

    years.sort_by(|a, b| a.partial_cmp(b).unwrap());
    asymptotes.sort_by(|a, b| a.partial_cmp(b).unwrap());
    Ok(McCredibility {
        median_year: quantile_linear(&years, 0.5),
        year_p2_5: quantile_linear(&years, 0.025),
        year_p97_5: quantile_linear(&years, 0.975),
        asymptote_median: quantile_linear(&asymptotes, 0.5),
        asymptote_p2_5: quantile_linear(&asymptotes, 0.025),
        asymptote_p97_5: quantile_linear(&asymptotes, 0.975),
    })
}
