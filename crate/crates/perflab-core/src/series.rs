//! Events, marks, series and the calendar arithmetic used everywhere else.
//!
//! Record progressions are read from CSV with [`read_record_csv`], which
//! enforces the polarity invariant (a record series strictly improves over
//! time). Career and demography inputs have their own readers. The free
//! functions at the bottom are the small per-series indicators.

use std::collections::BTreeMap;
use std::io::Read;

use chrono::{Datelike, NaiveDate};
use serde::{Deserialize, Serialize};

use crate::{CoreError, Result};

/// Measurement unit of an event's marks.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Unit {
    Seconds,
    Meters,
    Kilometers,
    Kilograms,
    Rating,
}

impl Unit {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "seconds" => Ok(Unit::Seconds),
            "meters" => Ok(Unit::Meters),
            "kilometers" => Ok(Unit::Kilometers),
            "kilograms" => Ok(Unit::Kilograms),
            "rating" => Ok(Unit::Rating),
            other => Err(CoreError::Domain(format!(
                "unknown unit '{other}'; expected one of seconds, meters, kilometers, kilograms, rating"
            ))),
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Unit::Seconds => "seconds",
            Unit::Meters => "meters",
            Unit::Kilometers => "kilometers",
            Unit::Kilograms => "kilograms",
            Unit::Rating => "rating",
        }
    }
}

/// Identity and polarity of an event.
///
/// `chronometric` events improve downward (shorter times are better); all
/// other events improve upward.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EventMeta {
    pub event_id: String,
    pub discipline: String,
    pub chronometric: bool,
    pub unit: Unit,
}

impl EventMeta {
    pub fn new(event_id: &str, discipline: &str, chronometric: bool, unit: Unit) -> Result<Self> {
        if event_id.is_empty() {
            return Err(CoreError::Domain("event_id must not be empty".into()));
        }
        Ok(EventMeta {
            event_id: event_id.to_string(),
            discipline: discipline.to_string(),
            chronometric,
            unit,
        })
    }

    /// True when `next` improves on `prev` in this event's polarity.
    pub fn improves(&self, prev: f64, next: f64) -> bool {
        if self.chronometric {
            next < prev
        } else {
            next > prev
        }
    }
}

/// A dated performance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mark {
    pub date: NaiveDate,
    pub value: f64,
    pub performer_id: Option<String>,
}

impl Mark {
    pub fn new(date: NaiveDate, value: f64, performer_id: Option<String>) -> Result<Self> {
        if !value.is_finite() || value <= 0.0 {
            return Err(CoreError::Domain(format!(
                "mark value must be finite and positive, got {value}"
            )));
        }
        Ok(Mark {
            date,
            value,
            performer_id,
        })
    }
}

/// An event's marks in non-decreasing date order.
///
/// The constructor checks dates and values only. Strict improvement in the
/// event's polarity is a property of record progressions and is enforced by
/// [`read_record_csv`], not here, so that trend data (careers, synthetic
/// series) can reuse the type.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PerformanceSeries {
    pub meta: EventMeta,
    pub marks: Vec<Mark>,
}

impl PerformanceSeries {
    pub fn new(meta: EventMeta, marks: Vec<Mark>) -> Result<Self> {
        if marks.is_empty() {
            return Err(CoreError::InsufficientData(format!(
                "event '{}' has no marks",
                meta.event_id
            )));
        }
        for w in marks.windows(2) {
            if w[1].date < w[0].date {
                return Err(CoreError::Domain(format!(
                    "event '{}': marks out of date order at {}",
                    meta.event_id, w[1].date
                )));
            }
        }
        Ok(PerformanceSeries { meta, marks })
    }

    pub fn len(&self) -> usize {
        self.marks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.marks.is_empty()
    }

    /// Mark dates as decimal years.
    pub fn decimal_years(&self) -> Vec<f64> {
        self.marks.iter().map(|m| decimal_year(m.date)).collect()
    }

    pub fn values(&self) -> Vec<f64> {
        self.marks.iter().map(|m| m.value).collect()
    }
}

/// A performance tagged with the performer's exact age.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AgeTaggedMark {
    pub age: f64,
    pub year: i32,
    pub value: f64,
}

/// One athlete's career, sorted by performance date.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CareerSeries {
    pub athlete_id: String,
    pub birth_date: NaiveDate,
    pub marks: Vec<AgeTaggedMark>,
}

/// One person's dates for the demography mesh.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PersonRecord {
    pub person_id: String,
    pub birth_date: NaiveDate,
    pub death_date: NaiveDate,
}

/// Result of reading a record CSV: the validated series plus any warnings
/// (dropped record-tying marks).
#[derive(Debug)]
pub struct IngestReport {
    pub series: Vec<PerformanceSeries>,
    pub warnings: Vec<String>,
}

const RECORD_HEADER: [&str; 7] = [
    "event_id",
    "discipline",
    "chronometric",
    "unit",
    "date",
    "value",
    "performer_id",
];

fn check_header(got: &csv::StringRecord, want: &[&str]) -> Result<()> {
    let got_cols: Vec<&str> = got.iter().collect();
    if got_cols != want {
        return Err(CoreError::Parse {
            line: 1,
            message: format!(
                "bad header: expected '{}', got '{}'",
                want.join(","),
                got_cols.join(",")
            ),
        });
    }
    Ok(())
}

fn row_line(record: &csv::StringRecord) -> usize {
    record.position().map(|p| p.line() as usize).unwrap_or(0)
}

fn parse_date(s: &str, line: usize) -> Result<NaiveDate> {
    NaiveDate::parse_from_str(s, "%Y-%m-%d").map_err(|e| CoreError::Parse {
        line,
        message: format!("bad date '{s}': {e}"),
    })
}

fn parse_value(s: &str, line: usize) -> Result<f64> {
    let v: f64 = s.parse().map_err(|_| CoreError::Parse {
        line,
        message: format!("bad value '{s}'"),
    })?;
    if !v.is_finite() || v <= 0.0 {
        return Err(CoreError::Parse {
            line,
            message: format!("value must be finite and positive, got {s}"),
        });
    }
    Ok(v)
}

/// Reads a record-progression CSV.
///
/// Header must be exactly
/// `event_id,discipline,chronometric,unit,date,value,performer_id`.
/// Rows are grouped by `event_id` (first-seen order) and sorted by date
/// within each event. A mark that merely ties the standing record is dropped
/// with a warning, keeping the earliest; a mark strictly worse than the
/// standing record is an error naming the offending line.
pub fn read_record_csv<R: Read>(input: R) -> Result<IngestReport> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
    check_header(rdr.headers()?, &RECORD_HEADER)?;

    // event_id -> (meta, rows as (line, mark))
    let mut order: Vec<String> = Vec::new();
    let mut groups: BTreeMap<String, (EventMeta, Vec<(usize, Mark)>)> = BTreeMap::new();

    for record in rdr.records() {
        let record = record?;
        let line = row_line(&record);
        if record.len() != RECORD_HEADER.len() {
            return Err(CoreError::Parse {
                line,
                message: format!("expected {} fields, got {}", RECORD_HEADER.len(), record.len()),
            });
        }
        let event_id = record[0].to_string();
        let discipline = record[1].to_string();
        let chronometric = match &record[2] {
            "true" => true,
            "false" => false,
            other => {
                return Err(CoreError::Parse {
                    line,
                    message: format!("chronometric must be 'true' or 'false', got '{other}'"),
                })
            }
        };
        let unit = Unit::parse(&record[3]).map_err(|e| CoreError::Parse {
            line,
            message: e.to_string(),
        })?;
        let date = parse_date(&record[4], line)?;
        let value = parse_value(&record[5], line)?;
        let performer = if record[6].is_empty() {
            None
        } else {
            Some(record[6].to_string())
        };
        let mark = Mark {
            date,
            value,
            performer_id: performer,
        };

        match groups.get_mut(&event_id) {
            None => {
                let meta = EventMeta::new(&event_id, &discipline, chronometric, unit)
                    .map_err(|e| CoreError::Parse {
                        line,
                        message: e.to_string(),
                    })?;
                order.push(event_id.clone());
                groups.insert(event_id, (meta, vec![(line, mark)]));
            }
            Some((meta, rows)) => {
                if meta.discipline != discipline
                    || meta.chronometric != chronometric
                    || meta.unit != unit
                {
                    return Err(CoreError::Parse {
                        line,
                        message: format!(
                            "event '{event_id}': discipline, chronometric and unit must be consistent across rows"
                        ),
                    });
                }
                rows.push((line, mark));
            }
        }
    }

    let mut series = Vec::new();
    let mut warnings = Vec::new();
    for event_id in order {
        let (meta, mut rows) = groups.remove(&event_id).unwrap();
        rows.sort_by_key(|(_, m)| m.date);
        let mut kept: Vec<Mark> = Vec::with_capacity(rows.len());
        for (line, mark) in rows {
            match kept.last() {
                None => kept.push(mark),
                Some(best) => {
                    if mark.value == best.value {
                        warnings.push(format!(
                            "event '{}': mark on {} ties the record set on {}, dropped",
                            event_id, mark.date, best.date
                        ));
                    } else if meta.improves(best.value, mark.value) {
                        kept.push(mark);
                    } else {
                        return Err(CoreError::Parse {
                            line,
                            message: format!(
                                "event '{event_id}': mark {} on {} regresses on the standing record {}",
                                mark.value, mark.date, best.value
                            ),
                        });
                    }
                }
            }
        }
        series.push(PerformanceSeries::new(meta, kept)?);
    }
    Ok(IngestReport { series, warnings })
}

const CAREER_HEADER: [&str; 4] = ["athlete_id", "birth_date", "performance_date", "value"];

/// Reads a career CSV (`athlete_id,birth_date,performance_date,value`) and
/// tags every mark with the exact age. One series per athlete, sorted by
/// performance date.
pub fn read_career_csv<R: Read>(input: R) -> Result<Vec<CareerSeries>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
    check_header(rdr.headers()?, &CAREER_HEADER)?;

    let mut order: Vec<String> = Vec::new();
    let mut groups: BTreeMap<String, (NaiveDate, Vec<(NaiveDate, f64)>)> = BTreeMap::new();
    for record in rdr.records() {
        let record = record?;
        let line = row_line(&record);
        if record.len() != CAREER_HEADER.len() {
            return Err(CoreError::Parse {
                line,
                message: format!("expected {} fields, got {}", CAREER_HEADER.len(), record.len()),
            });
        }
        let athlete_id = record[0].to_string();
        let birth = parse_date(&record[1], line)?;
        let perf = parse_date(&record[2], line)?;
        if perf < birth {
            return Err(CoreError::Parse {
                line,
                message: format!("performance date {perf} precedes birth date {birth}"),
            });
        }
        let value = parse_value(&record[3], line)?;
        match groups.get_mut(&athlete_id) {
            None => {
                order.push(athlete_id.clone());
                groups.insert(athlete_id, (birth, vec![(perf, value)]));
            }
            Some((b, rows)) => {
                if *b != birth {
                    return Err(CoreError::Parse {
                        line,
                        message: format!(
                            "athlete '{athlete_id}': inconsistent birth date {birth}, expected {b}"
                        ),
                    });
                }
                rows.push((perf, value));
            }
        }
    }

    let mut out = Vec::new();
    for athlete_id in order {
        let (birth, mut rows) = groups.remove(&athlete_id).unwrap();
        rows.sort_by_key(|(d, _)| *d);
        let marks = rows
            .into_iter()
            .map(|(d, v)| {
                Ok(AgeTaggedMark {
                    age: exact_age(birth, d)?,
                    year: d.year(),
                    value: v,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        out.push(CareerSeries {
            athlete_id,
            birth_date: birth,
            marks,
        });
    }
    Ok(out)
}

const PERSON_HEADER: [&str; 3] = ["person_id", "birth_date", "death_date"];

/// Reads a demography CSV (`person_id,birth_date,death_date`).
pub fn read_person_csv<R: Read>(input: R) -> Result<Vec<PersonRecord>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
    check_header(rdr.headers()?, &PERSON_HEADER)?;
    let mut out = Vec::new();
    for record in rdr.records() {
        let record = record?;
        let line = row_line(&record);
        if record.len() != PERSON_HEADER.len() {
            return Err(CoreError::Parse {
                line,
                message: format!("expected {} fields, got {}", PERSON_HEADER.len(), record.len()),
            });
        }
        let birth = parse_date(&record[1], line)?;
        let death = parse_date(&record[2], line)?;
        if death < birth {
            return Err(CoreError::Parse {
                line,
                message: format!("death date {death} precedes birth date {birth}"),
            });
        }
        out.push(PersonRecord {
            person_id: record[0].to_string(),
            birth_date: birth,
            death_date: death,
        });
    }
    Ok(out)
}

/// Maps person records to (birth decimal year, lifespan in years) points.
pub fn person_points(people: &[PersonRecord]) -> Result<Vec<(f64, f64)>> {
    people
        .iter()
        .map(|p| Ok((decimal_year(p.birth_date), exact_age(p.birth_date, p.death_date)?)))
        .collect()
}

/// Exact age in years between two dates, computed from the signed component
/// differences: whole years, plus month difference over 12, plus day
/// difference over 365.25. Components are not borrow-normalised, so the
/// month and day contributions may be negative.
///
/// Errors when `performance` precedes `birth`.
pub fn exact_age(birth: NaiveDate, performance: NaiveDate) -> Result<f64> {
    if performance < birth {
        return Err(CoreError::Domain(format!(
            "performance date {performance} precedes birth date {birth}"
        )));
    }
    let dy = performance.year() - birth.year();
    let dm = performance.month() as i32 - birth.month() as i32;
    let dd = performance.day() as i32 - birth.day() as i32;
    Ok(dy as f64 + dm as f64 / 12.0 + dd as f64 / 365.25)
}

/// A calendar date as a decimal year.
pub fn decimal_year(date: NaiveDate) -> f64 {
    let year = date.year();
    let days = if NaiveDate::from_ymd_opt(year, 12, 31).unwrap().ordinal() == 366 {
        366.0
    } else {
        365.0
    };
    year as f64 + (date.ordinal() as f64 - 1.0) / days
}

/// Yearly new-record indicator: the number of new world records over the
/// number of official events held that year. Errors when no event was held.
pub fn lambda_indicator(new_wr_count: u32, official_event_count: u32) -> Result<f64> {
    if official_event_count == 0 {
        return Err(CoreError::Domain(
            "official_event_count must be at least 1".into(),
        ));
    }
    Ok(f64::from(new_wr_count) / f64::from(official_event_count))
}

/// Relative step between two successive record values,
/// |next - prev| / prev. Both values must be positive.
pub fn kappa_step(wr_prev: f64, wr_next: f64) -> Result<f64> {
    if !wr_prev.is_finite() || wr_prev <= 0.0 {
        return Err(CoreError::Domain(format!(
            "previous record must be positive, got {wr_prev}"
        )));
    }
    if !wr_next.is_finite() || wr_next <= 0.0 {
        return Err(CoreError::Domain(format!(
            "next record must be positive, got {wr_next}"
        )));
    }
    Ok((wr_next - wr_prev).abs() / wr_prev)
}

/// Maps a date within a period onto [0, 1].
///
/// Errors when the period is degenerate (`t_f <= t_i`) or `t` lies outside
/// it.
pub fn normalize_time(t: f64, t_i: f64, t_f: f64) -> Result<f64> {
    if !(t_f > t_i) {
        return Err(CoreError::Domain(format!(
            "period must satisfy t_i < t_f, got [{t_i}, {t_f}]"
        )));
    }
    if t < t_i || t > t_f {
        return Err(CoreError::Domain(format!(
            "t={t} outside period [{t_i}, {t_f}]"
        )));
    }
    Ok((t - t_i) / (t_f - t_i))
}

/// Converts a daily wheel-turn count to a mean speed in metres per second,
/// 0.7215 * w / (16 * 3600).
pub fn wheel_to_speed(wheel_turns_per_day: f64) -> Result<f64> {
    if !wheel_turns_per_day.is_finite() || wheel_turns_per_day < 0.0 {
        return Err(CoreError::Domain(format!(
            "wheel turns must be non-negative, got {wheel_turns_per_day}"
        )));
    }
    Ok(0.7215 * wheel_turns_per_day / (16.0 * 3600.0))
}

/// Zero-phase second-order Butterworth low-pass smoother.
///
/// `cutoff` is the normalised cutoff in (0, 1) as a fraction of the Nyquist
/// frequency. The filter runs forward and backward (no phase lag) and is
/// initialised at steady state, so constant series pass through unchanged.
/// The initialisation extends the boundary sample as a constant, which
/// leaves a short transient at each end of oscillatory input. Needs at
/// least 5 samples.
pub fn smooth_lowpass(series: &[f64], cutoff: f64) -> Result<Vec<f64>> {
    if series.len() < 5 {
        return Err(CoreError::InsufficientData(format!(
            "smoothing needs at least 5 samples, got {}",
            series.len()
        )));
    }
    if !(cutoff > 0.0 && cutoff < 1.0) {
        return Err(CoreError::Domain(format!(
            "cutoff must lie in (0, 1), got {cutoff}"
        )));
    }
    if series.iter().any(|v| !v.is_finite()) {
        return Err(CoreError::Domain("series contains non-finite values".into()));
    }

    let k = (std::f64::consts::PI * cutoff / 2.0).tan();
    let sqrt2 = std::f64::consts::SQRT_2;
    let norm = 1.0 + sqrt2 * k + k * k;
    let b0 = k * k / norm;
    let b1 = 2.0 * b0;
    let b2 = b0;
    let a1 = 2.0 * (k * k - 1.0) / norm;
    let a2 = (1.0 - sqrt2 * k + k * k) / norm;

    // Transposed direct form II with steady-state initial conditions.
    let pass = |xs: &[f64]| -> Vec<f64> {
        let x0 = xs[0];
        let mut z1 = (1.0 - b0) * x0;
        let mut z2 = (b2 - a2) * x0;
        let mut out = Vec::with_capacity(xs.len());
        for &x in xs {
            let y = b0 * x + z1;
            z1 = b1 * x - a1 * y + z2;
            z2 = b2 * x - a2 * y;
            out.push(y);
        }
        out
    };

    let mut fwd = pass(series);
    fwd.reverse();
    let mut back = pass(&fwd);
    back.reverse();
    Ok(back)
}
