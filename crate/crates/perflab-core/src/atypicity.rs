//! Atypicity scoring of yearly best performances.
//!
//! Each best performance gets three descriptors: the relative distance to
//! its peers (d1), the years it stood (d2) and its weight on the event's
//! spread (d3). Min-max uniformization puts the three on a common [0, 1]
//! scale and the Euclidean norm combines them into the score A.

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

use crate::stats::{mean, quantile_linear, sample_std};
use crate::{CoreError, Result};

/// The ten best single results of one event in one year, oriented so
/// larger is better and kept sorted descending.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct YearTop10 {
    pub event_id: String,
    pub year: i32,
    values: Vec<f64>,
}

impl YearTop10 {
    pub fn new(event_id: &str, year: i32, mut values: Vec<f64>) -> Result<Self> {
        if values.len() != 10 {
            return Err(CoreError::Domain(format!(
                "a yearly top list holds exactly 10 values, got {} for '{event_id}' {year}",
                values.len()
            )));
        }
        if values.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(CoreError::Domain(format!(
                "top-10 values must be positive and finite ('{event_id}' {year})"
            )));
        }
        values.sort_by(|a, b| b.partial_cmp(a).unwrap());
        Ok(YearTop10 {
            event_id: event_id.to_string(),
            year,
            values,
        })
    }

    /// Values in descending order; the first is the year's best.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn best(&self) -> f64 {
        self.values[0]
    }
}

/// Relative distance of the best performance to the mean of the nine
/// runners-up, floored at zero.
pub fn descriptor_d1(top10: &YearTop10) -> f64 {
    let peers = mean(&top10.values()[1..]);
    ((top10.best() - peers) / peers).max(0.0)
}

/// Years until a strictly better yearly best appears. Histories that never
/// beat the mark return the remaining span with the censored flag set.
pub fn descriptor_d2(history: &BTreeMap<i32, f64>, year: i32) -> Result<(f64, bool)> {
    let value = *history.get(&year).ok_or_else(|| {
        CoreError::Domain(format!("no yearly best recorded for {year}"))
    })?;
    for (&later, &v) in history.range(year + 1..) {
        if v > value {
            return Ok(((later - year) as f64, false));
        }
    }
    let last = *history.keys().last().expect("history contains `year`");
    Ok(((last - year) as f64, true))
}

/// Relative change of the event's standard deviation when `bp` is removed
/// from the pool, floored at zero. The pool must contain `bp` (one
/// occurrence is removed; duplicates keep the rest).
pub fn descriptor_d3(pool: &[f64], bp: f64) -> Result<f64> {
    if pool.len() < 20 {
        return Err(CoreError::InsufficientData(format!(
            "descriptor d3 needs a pool of at least 20 values, got {}",
            pool.len()
        )));
    }
    let at = pool.iter().position(|&v| v == bp).ok_or_else(|| {
        CoreError::Domain(format!("value {bp} is not in the event pool"))
    })?;
    let sigma_with = sample_std(pool);
    let mut rest = pool.to_vec();
    rest.remove(at);
    let sigma_without = sample_std(&rest);
    if !(sigma_without > 0.0) {
        return Err(CoreError::Domain(
            "event pool has zero spread without the best performance".into(),
        ));
    }
    Ok(((sigma_with - sigma_without) / sigma_without).max(0.0))
}

/// Raw descriptors of one best performance, before uniformization.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DescriptorRow {
    pub event_id: String,
    pub year: i32,
    pub d1: f64,
    pub d2: f64,
    pub d2_censored: bool,
    pub d3: f64,
}

/// Computes descriptor rows for a batch of yearly top lists, grouped by
/// event. Every event needs at least two years so its pool reaches the
/// d3 minimum.
pub fn descriptor_rows(tables: &[YearTop10]) -> Result<Vec<DescriptorRow>> {
    let mut order: Vec<&str> = Vec::new();
    let mut by_event: BTreeMap<&str, Vec<&YearTop10>> = BTreeMap::new();
    for t in tables {
        let entry = by_event.entry(&t.event_id).or_default();
        if entry.iter().any(|e| e.year == t.year) {
            return Err(CoreError::Domain(format!(
                "duplicate top list for '{}' year {}",
                t.event_id, t.year
            )));
        }
        if entry.is_empty() {
            order.push(&t.event_id);
        }
        entry.push(t);
    }
    let mut rows = Vec::with_capacity(tables.len());
    for event in order {
        let mut lists = by_event.remove(event).expect("event was grouped");
        lists.sort_by_key(|t| t.year);
        let history: BTreeMap<i32, f64> = lists.iter().map(|t| (t.year, t.best())).collect();
        let pool: Vec<f64> = lists.iter().flat_map(|t| t.values().iter().copied()).collect();
        for t in &lists {
            let (d2, d2_censored) = descriptor_d2(&history, t.year)?;
            rows.push(DescriptorRow {
                event_id: t.event_id.clone(),
                year: t.year,
                d1: descriptor_d1(t),
                d2,
                d2_censored,
                d3: descriptor_d3(&pool, t.best())?,
            });
        }
    }
    Ok(rows)
}

/// One scored best performance, shaped like the `atypicity` CSV row.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AtypicityRecord {
    pub event_id: String,
    pub year: i32,
    pub d1: f64,
    pub d2: f64,
    pub d2_censored: bool,
    pub d3: f64,
    pub u1: f64,
    pub u2: f64,
    pub u3: f64,
    pub a: f64,
    pub top5_d1: bool,
    pub top5_d2: bool,
    pub top5_d3: bool,
}

/// Scores for a whole discipline: per-record values, the yearly mean of A
/// and flags for descriptors that were constant across the discipline.
#[derive(Clone, Debug, PartialEq)]
pub struct AtypicityAnalysis {
    pub records: Vec<AtypicityRecord>,
    pub yearly_mean_a: BTreeMap<i32, f64>,
    /// Per descriptor: true when min = max made its uniformized value 0.
    pub degenerate: [bool; 3],
}

fn min_max_of(values: &[f64]) -> (f64, f64) {
    values.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
        (lo.min(v), hi.max(v))
    })
}

/// Uniformizes the descriptors across one discipline, combines them into
/// A and flags the top 5% per descriptor (ties at the threshold count).
pub fn atypicity_scores(rows: &[DescriptorRow]) -> Result<AtypicityAnalysis> {
    if rows.len() < 20 {
        return Err(CoreError::InsufficientData(format!(
            "atypicity scoring needs at least 20 best performances, got {}",
            rows.len()
        )));
    }
    let columns: [Vec<f64>; 3] = [
        rows.iter().map(|r| r.d1).collect(),
        rows.iter().map(|r| r.d2).collect(),
        rows.iter().map(|r| r.d3).collect(),
    ];
    let mut degenerate = [false; 3];
    let mut scales = [(0.0, 1.0); 3];
    let mut thresholds = [0.0; 3];
    for (j, col) in columns.iter().enumerate() {
        let (lo, hi) = min_max_of(col);
        if hi - lo > 0.0 {
            scales[j] = (lo, hi - lo);
        } else {
            degenerate[j] = true;
            scales[j] = (lo, f64::INFINITY);
        }
        let mut sorted = col.clone();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        thresholds[j] = quantile_linear(&sorted, 0.95);
    }

    let mut records = Vec::with_capacity(rows.len());
    let mut year_sums: BTreeMap<i32, (f64, usize)> = BTreeMap::new();
    for r in rows {
        let u = [
            (r.d1 - scales[0].0) / scales[0].1,
            (r.d2 - scales[1].0) / scales[1].1,
            (r.d3 - scales[2].0) / scales[2].1,
        ];
        let a = (u[0] * u[0] + u[1] * u[1] + u[2] * u[2]).sqrt();
        records.push(AtypicityRecord {
            event_id: r.event_id.clone(),
            year: r.year,
            d1: r.d1,
            d2: r.d2,
            d2_censored: r.d2_censored,
            d3: r.d3,
            u1: u[0],
            u2: u[1],
            u3: u[2],
            a,
            top5_d1: r.d1 >= thresholds[0],
            top5_d2: r.d2 >= thresholds[1],
            top5_d3: r.d3 >= thresholds[2],
        });
        let entry = year_sums.entry(r.year).or_insert((0.0, 0));
        entry.0 += a;
        entry.1 += 1;
    }
    let yearly_mean_a = year_sums
        .into_iter()
        .map(|(y, (sum, k))| (y, sum / k as f64))
        .collect();
    Ok(AtypicityAnalysis {
        records,
        yearly_mean_a,
        degenerate,
    })
}
