//! Splitting a record series into progression periods.
//!
//! A period is a maximal run of marks that one bounded exponential explains
//! well; boundaries are found by watching the adjusted R² of a growing
//! window and splitting at its local maxima. The module also carries the
//! small percentage arithmetic used when comparing yearly means across a
//! rule change.

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

use crate::fit::{lm_fit, FitOptions, FitResult};
use crate::models::{model_by_id, ExpWrParams};
use crate::series::PerformanceSeries;
use crate::{CoreError, Result};

/// Tuning knobs for [`split_periods`]. The defaults implement the
/// documented procedure; `prominence` is the tolerance that keeps floating
/// point plateaus from registering as maxima.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitOptions {
    /// Minimum marks per period.
    pub min_marks: usize,
    /// Minimum calendar span per period, in years.
    pub min_years: f64,
    /// Required adjusted-R² drop for a local maximum to count.
    pub prominence: f64,
}

impl Default for SplitOptions {
    fn default() -> Self {
        SplitOptions {
            min_marks: 3,
            min_years: 6.0,
            prominence: 1e-4,
        }
    }
}

/// One progression period: an inclusive index range into the series, its
/// calendar span and the exponential fitted on period-normalised time.
#[derive(Clone, Debug)]
pub struct Period {
    pub start_index: usize,
    pub end_index: usize,
    pub t_i: f64,
    pub t_f: f64,
    pub fit: FitResult,
}

impl Period {
    pub fn n_marks(&self) -> usize {
        self.end_index - self.start_index + 1
    }

    pub fn params(&self) -> Result<ExpWrParams> {
        ExpWrParams::from_fit(&self.fit)
    }
}

/// Ordered, contiguous, non-overlapping periods covering a whole series.
#[derive(Clone, Debug)]
pub struct PeriodSegmentation {
    pub event_id: String,
    pub chronometric: bool,
    pub periods: Vec<Period>,
    /// Set when the series was too short for the splitting rules and was
    /// kept whole instead.
    pub fallback: bool,
}

impl PeriodSegmentation {
    pub fn n_periods(&self) -> usize {
        self.periods.len()
    }

    /// The last period, which carries the forecast-relevant fit.
    pub fn last_period(&self) -> &Period {
        self.periods.last().expect("a segmentation has at least one period")
    }
}

// The exponential takes three parameters, so a window must hold at least
// four marks to be fitted and five for adjusted R² to be meaningful.
const FIT_MIN: usize = 4;
const R2_MIN: usize = 5;

fn fit_window(years: &[f64], values: &[f64]) -> Result<FitResult> {
    let spec = model_by_id("exp_wr")?;
    let t_i = years[0];
    let t_f = years[years.len() - 1];
    let u: Vec<f64> = years.iter().map(|&t| (t - t_i) / (t_f - t_i)).collect();
    lm_fit(&spec, &u, values, &FitOptions::default())
}

/// Splits a series into progression periods.
///
/// A growing window is refitted after every appended mark; the window's
/// adjusted R² forms a sequence whose local maxima close periods, provided
/// both the closing period and the remaining tail keep at least
/// `min_marks` marks (never fewer than four, the fit minimum) and
/// `min_years` years. Series too short for the rules come back as a single
/// flagged period.
pub fn split_periods(
    series: &PerformanceSeries,
    opts: &SplitOptions,
) -> Result<PeriodSegmentation> {
    let n = series.len();
    if n < FIT_MIN {
        return Err(CoreError::InsufficientData(format!(
            "event '{}' has {n} marks, need at least {FIT_MIN} to fit a period",
            series.meta.event_id
        )));
    }
    let years = series.decimal_years();
    let values = series.values();
    let min_marks = opts.min_marks.max(FIT_MIN);
    let viable = |s: usize, e: usize| {
        e + 1 - s >= min_marks && years[e] - years[s] >= opts.min_years
    };

    let mut fallback = false;
    let mut bounds: Vec<(usize, usize)> = Vec::new();
    if !viable(0, n - 1) {
        fallback = true;
        bounds.push((0, n - 1));
    } else {
        let mut start = 0;
        loop {
            // Adjusted R² of every window [start..=e], aligned so that
            // r_seq[e - start] corresponds to end index e.
            let mut r_seq: Vec<Option<f64>> = vec![None; n - start];
            let mut split_at: Option<usize> = None;
            for e in (start + R2_MIN - 1)..n {
                let r = fit_window(&years[start..=e], &values[start..=e])
                    .ok()
                    .map(|f| f.adj_r2)
                    .filter(|r| r.is_finite());
                r_seq[e - start] = r;
                let (i2, i1, i0) = (e - start, e - start - 1, e - start - 2);
                if let (Some(r0), Some(r1), Some(r2)) = (r_seq[i0], r_seq[i1], r_seq[i2]) {
                    let local_max = r1 >= r0 - opts.prominence && r1 > r2 + opts.prominence;
                    if local_max && viable(start, e - 1) && viable(e, n - 1) {
                        split_at = Some(e - 1);
                        break;
                    }
                }
            }
            match split_at {
                Some(last) => {
                    bounds.push((start, last));
                    start = last + 1;
                }
                None => {
                    bounds.push((start, n - 1));
                    break;
                }
            }
        }
        // The split conditions guarantee a fittable tail, but merge
        // defensively if a leftover ever comes up short.
        while bounds.len() > 1 && bounds.last().unwrap().1 + 1 - bounds.last().unwrap().0 < FIT_MIN
        {
            let (_, e) = bounds.pop().unwrap();
            bounds.last_mut().unwrap().1 = e;
        }
    }

    let mut periods = Vec::with_capacity(bounds.len());
    for (s, e) in bounds {
        let fit = fit_window(&years[s..=e], &values[s..=e])?;
        periods.push(Period {
            start_index: s,
            end_index: e,
            t_i: years[s],
            t_f: years[e],
            fit,
        });
    }
    Ok(PeriodSegmentation {
        event_id: series.meta.event_id.clone(),
        chronometric: series.meta.chronometric,
        periods,
        fallback,
    })
}

/// Relative improvement of the yearly mean at `year` against the year
/// before, in percent. Positive when the mean time dropped.
pub fn gains(means: &BTreeMap<i32, f64>, year: i32) -> Result<f64> {
    let prev = means.get(&(year - 1)).ok_or_else(|| {
        CoreError::Domain(format!("no yearly mean recorded for {}", year - 1))
    })?;
    let cur = means.get(&year).ok_or_else(|| {
        CoreError::Domain(format!("no yearly mean recorded for {year}"))
    })?;
    if !(*prev > 0.0) {
        return Err(CoreError::Domain(format!(
            "yearly mean for {} must be positive, got {prev}",
            year - 1
        )));
    }
    Ok((prev - cur) / prev * 100.0)
}

/// Relative gap between a model value and an observed mean, in percent.
pub fn drop_percent(y_hat: f64, m: f64) -> Result<f64> {
    if !(m > 0.0) {
        return Err(CoreError::Domain(format!(
            "observed mean must be positive, got {m}"
        )));
    }
    Ok((y_hat - m) / m * 100.0)
}

/// Evaluates a period fit at an arbitrary calendar year, extrapolating
/// freely beyond the fitted span.
pub fn eval_at_year(p: &ExpWrParams, period_years: (f64, f64), year: f64) -> Result<f64> {
    let (t_i, t_f) = period_years;
    if !(t_f > t_i) {
        return Err(CoreError::Domain(format!(
            "period span must be positive, got [{t_i}, {t_f}]"
        )));
    }
    Ok(p.eval((year - t_i) / (t_f - t_i)))
}
