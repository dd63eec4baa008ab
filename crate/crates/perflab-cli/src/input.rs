//! Input detection and the small readers the commands share.
//!
//! Every input is a headed CSV and the header row alone decides its kind,
//! so each command can accept the tables it knows how to analyse and
//! reject everything else by name.

use std::fs::File;
use std::path::Path;

use anyhow::Context;
use perflab_core::series::{
    read_career_csv, read_person_csv, read_record_csv, CareerSeries, IngestReport, PersonRecord,
};
use perflab_core::CoreError;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InputKind {
    /// Record progressions: event_id,discipline,chronometric,unit,date,value,performer_id.
    Record,
    /// Athlete careers: athlete_id,birth_date,performance_date,value.
    Career,
    /// Person dates: person_id,birth_date,death_date.
    Person,
    /// Yearly top lists: event_id,year,value.
    TopList,
    /// Bare points: x,y.
    Points,
}

impl InputKind {
    pub fn name(self) -> &'static str {
        match self {
            InputKind::Record => "record",
            InputKind::Career => "career",
            InputKind::Person => "person",
            InputKind::TopList => "top-list",
            InputKind::Points => "x,y",
        }
    }
}

fn open(path: &Path) -> anyhow::Result<File> {
    File::open(path).with_context(|| format!("opening {}", path.display()))
}

/// Classifies an input file by its header row.
pub fn detect_kind(path: &Path) -> anyhow::Result<InputKind> {
    let file = open(path)?;
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(file);
    let headers = rdr
        .headers()
        .with_context(|| format!("reading the header of {}", path.display()))?;
    let cols: Vec<String> = headers.iter().map(|h| h.trim().to_string()).collect();
    let cols: Vec<&str> = cols.iter().map(String::as_str).collect();
    let kind = match cols.as_slice() {
        ["event_id", "discipline", "chronometric", "unit", "date", "value", "performer_id"] => {
            InputKind::Record
        }
        ["athlete_id", "birth_date", "performance_date", "value"] => InputKind::Career,
        ["person_id", "birth_date", "death_date"] => InputKind::Person,
        ["event_id", "year", "value"] => InputKind::TopList,
        ["x", "y"] => InputKind::Points,
        _ => {
            return Err(CoreError::Domain(format!(
                "unrecognised input header '{}'",
                cols.join(",")
            ))
            .into())
        }
    };
    Ok(kind)
}

pub fn load_records(path: &Path) -> anyhow::Result<IngestReport> {
    let report = read_record_csv(open(path)?)
        .with_context(|| format!("reading {}", path.display()))?;
    Ok(report)
}

pub fn load_careers(path: &Path) -> anyhow::Result<Vec<CareerSeries>> {
    let careers = read_career_csv(open(path)?)
        .with_context(|| format!("reading {}", path.display()))?;
    Ok(careers)
}

pub fn load_people(path: &Path) -> anyhow::Result<Vec<PersonRecord>> {
    let people = read_person_csv(open(path)?)
        .with_context(|| format!("reading {}", path.display()))?;
    Ok(people)
}

fn parse_number(raw: &str, line: usize, name: &str) -> Result<f64, CoreError> {
    let value: f64 = raw.trim().parse().map_err(|_| CoreError::Parse {
        line,
        message: format!("invalid {name} '{raw}'"),
    })?;
    if !value.is_finite() {
        return Err(CoreError::Parse {
            line,
            message: format!("{name} must be finite, got '{raw}'"),
        });
    }
    Ok(value)
}

/// Reads an x,y table. Lines are numbered from 1 including the header.
pub fn load_points(path: &Path) -> anyhow::Result<Vec<(f64, f64)>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(open(path)?);
    let mut points = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let line = i + 2;
        let record = record.map_err(CoreError::from)?;
        if record.len() != 2 {
            return Err(CoreError::Parse {
                line,
                message: format!("expected 2 fields, got {}", record.len()),
            }
            .into());
        }
        let x = parse_number(&record[0], line, "x")?;
        let y = parse_number(&record[1], line, "y")?;
        points.push((x, y));
    }
    if points.is_empty() {
        return Err(CoreError::InsufficientData("no points in input".into()).into());
    }
    Ok(points)
}

/// Reads a top-list table into (event, year, value) rows in file order.
pub fn load_toplists(path: &Path) -> anyhow::Result<Vec<(String, i32, f64)>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(open(path)?);
    let mut rows = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let line = i + 2;
        let record = record.map_err(CoreError::from)?;
        if record.len() != 3 {
            return Err(CoreError::Parse {
                line,
                message: format!("expected 3 fields, got {}", record.len()),
            }
            .into());
        }
        let event = record[0].trim().to_string();
        if event.is_empty() {
            return Err(CoreError::Parse {
                line,
                message: "empty event_id".into(),
            }
            .into());
        }
        let year: i32 = record[1].trim().parse().map_err(|_| CoreError::Parse {
            line,
            message: format!("invalid year '{}'", &record[1]),
        })?;
        let value = parse_number(&record[2], line, "value")?;
        rows.push((event, year, value));
    }
    if rows.is_empty() {
        return Err(CoreError::InsufficientData("no top-list rows in input".into()).into());
    }
    Ok(rows)
}
