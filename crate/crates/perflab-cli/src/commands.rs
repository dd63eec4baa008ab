//! The subcommand implementations.
//!
//! Each handler reads its input, runs the library analysis, writes one or
//! more CSVs plus a JSON run manifest into the output directory and prints
//! a one-line status unless --quiet. File names carry the command name as
//! a prefix so several commands can share a directory.

use std::collections::BTreeMap;
use std::fs::File;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use perflab_core::atypicity::{atypicity_scores, descriptor_rows, YearTop10};
use perflab_core::density::{
    build_mesh, lifespan_gradient, mesh_entropy, select_resolution, smoothed_counts, DensityMesh,
};
use perflab_core::fit::{aicc, criterion_table, lm_fit, sbic, FitOptions, FitResult, ModelSpec};
use perflab_core::limits::{limit_year, mc_credibility, LimitForecast};
use perflab_core::models::{model_by_id, progress_ratios};
use perflab_core::segment::{split_periods, PeriodSegmentation, SplitOptions};
use perflab_core::series::{person_points, IngestReport, PerformanceSeries};
use perflab_core::CoreError;
use perflab_sim::{mesh_sweep, run_simulation, SimConfig};
use serde::Serialize;

use crate::input::{self, InputKind};
use crate::manifest;

/// Global options shared by every handler.
pub struct Ctx {
    pub out: PathBuf,
    pub seed: Option<u64>,
    pub jobs: Option<usize>,
    pub quiet: bool,
}

impl Ctx {
    fn status(&self, line: &str) {
        if !self.quiet {
            println!("{line}");
        }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    fn seed_or(&self, default: u64) -> u64 {
        self.seed.unwrap_or(default)
    }
}

const DEFAULT_SEED: u64 = 42;

fn writer(path: &Path) -> anyhow::Result<csv::Writer<File>> {
    let file =
        File::create(path).with_context(|| format!("creating {}", path.display()))?;
    Ok(csv::Writer::from_writer(file))
}

fn cell(value: Option<f64>) -> String {
    value.map(|v| v.to_string()).unwrap_or_default()
}

fn records_only(path: &Path, command: &str) -> anyhow::Result<IngestReport> {
    let kind = input::detect_kind(path)?;
    if kind != InputKind::Record {
        bail!(CoreError::Domain(format!(
            "{command} needs a record table, got a {} table",
            kind.name()
        )));
    }
    let report = input::load_records(path)?;
    if report.series.is_empty() {
        bail!(CoreError::InsufficientData("input holds no events".into()));
    }
    Ok(report)
}

fn select_series<'a>(
    report: &'a IngestReport,
    event: Option<&str>,
) -> anyhow::Result<&'a PerformanceSeries> {
    match event {
        Some(id) => report
            .series
            .iter()
            .find(|s| s.meta.event_id == id)
            .ok_or_else(|| {
                CoreError::Domain(format!("event '{id}' is not in the input")).into()
            }),
        None if report.series.len() == 1 => Ok(&report.series[0]),
        None => Err(CoreError::Domain(format!(
            "input holds {} events; pick one with --event",
            report.series.len()
        ))
        .into()),
    }
}

/// The (x, y) pairs a fit runs on, plus a label for the status line.
/// Record series fit on period-normalised time, careers on raw age pooled
/// across athletes, point tables as given.
fn fit_data(
    path: &Path,
    event: Option<&str>,
) -> anyhow::Result<(Vec<f64>, Vec<f64>, String)> {
    let kind = input::detect_kind(path)?;
    match kind {
        InputKind::Record => {
            let report = input::load_records(path)?;
            if report.series.is_empty() {
                bail!(CoreError::InsufficientData("input holds no events".into()));
            }
            let series = select_series(&report, event)?;
            let years = series.decimal_years();
            let (t_i, t_f) = (years[0], years[years.len() - 1]);
            if !(t_f > t_i) {
                bail!(CoreError::Domain(format!(
                    "event '{}' spans a single instant; cannot normalise time",
                    series.meta.event_id
                )));
            }
            let x: Vec<f64> = years.iter().map(|t| (t - t_i) / (t_f - t_i)).collect();
            Ok((x, series.values(), series.meta.event_id.clone()))
        }
        InputKind::Career => {
            if event.is_some() {
                bail!(CoreError::Domain(
                    "--event applies to record tables only".into()
                ));
            }
            let careers = input::load_careers(path)?;
            let mut x = Vec::new();
            let mut y = Vec::new();
            for career in &careers {
                for mark in &career.marks {
                    x.push(mark.age);
                    y.push(mark.value);
                }
            }
            Ok((x, y, format!("{} careers", careers.len())))
        }
        InputKind::Points => {
            if event.is_some() {
                bail!(CoreError::Domain(
                    "--event applies to record tables only".into()
                ));
            }
            let points = input::load_points(path)?;
            let (x, y) = points.into_iter().unzip();
            Ok((x, y, "points".into()))
        }
        other => Err(CoreError::Domain(format!(
            "cannot fit a {} table; expected record, career or x,y points",
            other.name()
        ))
        .into()),
    }
}

pub fn ingest(ctx: &Ctx, input: &Path) -> anyhow::Result<()> {
    let kind = input::detect_kind(input)?;
    let out = ctx.path("ingest.csv");
    let mut w = writer(&out)?;
    let status = match kind {
        InputKind::Record => {
            let report = input::load_records(input)?;
            for warning in &report.warnings {
                eprintln!("warning: {warning}");
            }
            w.write_record([
                "event_id",
                "discipline",
                "chronometric",
                "unit",
                "n_marks",
                "first_date",
                "last_date",
                "best",
            ])?;
            for s in &report.series {
                let best = if s.meta.chronometric {
                    s.values().into_iter().fold(f64::INFINITY, f64::min)
                } else {
                    s.values().into_iter().fold(f64::NEG_INFINITY, f64::max)
                };
                w.write_record([
                    s.meta.event_id.as_str(),
                    s.meta.discipline.as_str(),
                    &s.meta.chronometric.to_string(),
                    s.meta.unit.as_str(),
                    &s.len().to_string(),
                    &s.marks[0].date.to_string(),
                    &s.marks[s.len() - 1].date.to_string(),
                    &best.to_string(),
                ])?;
            }
            format!(
                "ingest: {} record series, {} warnings",
                report.series.len(),
                report.warnings.len()
            )
        }
        InputKind::Career => {
            let careers = input::load_careers(input)?;
            w.write_record([
                "athlete_id",
                "birth_date",
                "n_marks",
                "first_age",
                "last_age",
                "best",
            ])?;
            for c in &careers {
                let best = c
                    .marks
                    .iter()
                    .map(|m| m.value)
                    .fold(f64::NEG_INFINITY, f64::max);
                w.write_record([
                    c.athlete_id.as_str(),
                    &c.birth_date.to_string(),
                    &c.marks.len().to_string(),
                    &c.marks[0].age.to_string(),
                    &c.marks[c.marks.len() - 1].age.to_string(),
                    &best.to_string(),
                ])?;
            }
            format!("ingest: {} careers", careers.len())
        }
        InputKind::Person => {
            let people = input::load_people(input)?;
            let points = person_points(&people)?;
            w.write_record(["x", "y"])?;
            for (x, y) in &points {
                w.write_record([x.to_string(), y.to_string()])?;
            }
            format!("ingest: {} people as birth/lifespan points", points.len())
        }
        InputKind::TopList => {
            let rows = input::load_toplists(input)?;
            let mut grouped: BTreeMap<(String, i32), Vec<f64>> = BTreeMap::new();
            for (event, year, value) in rows {
                grouped.entry((event, year)).or_default().push(value);
            }
            w.write_record(["event_id", "year", "n_values", "best"])?;
            let n_lists = grouped.len();
            for ((event, year), values) in grouped {
                let top = YearTop10::new(&event, year, values)
                    .with_context(|| format!("top list for '{event}' year {year}"))?;
                w.write_record([
                    top.event_id.as_str(),
                    &top.year.to_string(),
                    &top.values().len().to_string(),
                    &top.best().to_string(),
                ])?;
            }
            format!("ingest: {n_lists} yearly top lists")
        }
        InputKind::Points => {
            let points = input::load_points(input)?;
            w.write_record(["x", "y"])?;
            for (x, y) in &points {
                w.write_record([x.to_string(), y.to_string()])?;
            }
            format!("ingest: {} points", points.len())
        }
    };
    w.flush()?;
    manifest::write(ctx, "ingest", &[input], &[], None)?;
    ctx.status(&format!("{status} -> {}", out.display()));
    Ok(())
}

fn write_fit_csv(path: &Path, fit: &FitResult) -> anyhow::Result<()> {
    let k = fit.params.len();
    let mut header = vec![
        "model_id".to_string(),
        "n_obs".to_string(),
        "converged".to_string(),
        "rss".to_string(),
        "adj_r2".to_string(),
        "rmse".to_string(),
        "aicc".to_string(),
        "sbic".to_string(),
    ];
    for i in 0..k {
        header.push(format!("param_{i}"));
    }
    for i in 0..k {
        header.push(format!("se_{i}"));
    }
    let mut row = vec![
        fit.model_id.clone(),
        fit.n_obs.to_string(),
        fit.converged.to_string(),
        fit.rss.to_string(),
        fit.adj_r2.to_string(),
        fit.rmse.to_string(),
        cell(aicc(fit.rss, fit.n_obs, k).ok()),
        cell(sbic(fit.rss, fit.n_obs, k).ok()),
    ];
    for p in &fit.params {
        row.push(p.to_string());
    }
    let se = fit.std_errors();
    for i in 0..k {
        row.push(cell(se.as_ref().map(|s| s[i])));
    }
    let mut w = writer(path)?;
    w.write_record(&header)?;
    w.write_record(&row)?;
    w.flush()?;
    Ok(())
}

fn write_residuals_csv(
    path: &Path,
    spec: &ModelSpec,
    fit: &FitResult,
    x: &[f64],
    y: &[f64],
) -> anyhow::Result<()> {
    let mut w = writer(path)?;
    w.write_record(["x", "observed", "predicted", "residual"])?;
    for (&xi, &yi) in x.iter().zip(y) {
        let predicted = (spec.eval)(&fit.params, xi);
        w.write_record([
            xi.to_string(),
            yi.to_string(),
            predicted.to_string(),
            (yi - predicted).to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn fit(
    ctx: &Ctx,
    input: &Path,
    model: &str,
    event: Option<&str>,
    max_iter: usize,
) -> anyhow::Result<()> {
    let spec = model_by_id(model)?;
    let (x, y, label) = fit_data(input, event)?;
    let opts = FitOptions {
        max_iter,
        ..FitOptions::default()
    };
    let fit = lm_fit(&spec, &x, &y, &opts)?;
    write_fit_csv(&ctx.path("fit.csv"), &fit)?;
    write_residuals_csv(&ctx.path("fit_residuals.csv"), &spec, &fit, &x, &y)?;
    manifest::write(
        ctx,
        "fit",
        &[input],
        &[
            ("model", model.to_string()),
            ("event", event.unwrap_or_default().to_string()),
            ("max_iter", max_iter.to_string()),
        ],
        None,
    )?;
    ctx.status(&format!(
        "fit: {model} on {label}: adj_r2={:.6} rmse={:.3e} converged={}",
        fit.adj_r2, fit.rmse, fit.converged
    ));
    if !fit.converged {
        return Err(CoreError::NonConvergence(model.to_string()).into());
    }
    Ok(())
}

pub fn compare(
    ctx: &Ctx,
    input: &Path,
    models: &[String],
    event: Option<&str>,
) -> anyhow::Result<()> {
    if models.len() < 2 {
        bail!(CoreError::Domain(
            "model comparison needs at least two models".into()
        ));
    }
    for (i, id) in models.iter().enumerate() {
        if models[..i].contains(id) {
            bail!(CoreError::Domain(format!("model '{id}' listed twice")));
        }
    }
    let (x, y, label) = fit_data(input, event)?;
    let mut fits = Vec::with_capacity(models.len());
    for id in models {
        let spec = model_by_id(id)?;
        let fit = lm_fit(&spec, &x, &y, &FitOptions::default())
            .with_context(|| format!("fitting {id}"))?;
        if !fit.converged {
            return Err(CoreError::NonConvergence(id.clone()).into());
        }
        fits.push(fit);
    }
    let table = criterion_table(&fits)?;
    let mut rows = table.rows;
    rows.sort_by(|a, b| a.delta_aicc.total_cmp(&b.delta_aicc));

    let mut w = writer(&ctx.path("compare.csv"))?;
    w.write_record([
        "model_id",
        "k",
        "n_obs",
        "aicc",
        "delta_aicc",
        "sbic",
        "delta_sbic",
    ])?;
    for r in &rows {
        w.write_record([
            r.model_id.as_str(),
            &r.k.to_string(),
            &table.n_obs.to_string(),
            &r.aicc.to_string(),
            &r.delta_aicc.to_string(),
            &r.sbic.to_string(),
            &r.delta_sbic.to_string(),
        ])?;
    }
    w.flush()?;
    manifest::write(
        ctx,
        "compare",
        &[input],
        &[
            ("models", models.join(",")),
            ("event", event.unwrap_or_default().to_string()),
        ],
        None,
    )?;
    ctx.status(&format!(
        "compare: {} preferred over {} models on {label}",
        rows[0].model_id,
        rows.len()
    ));
    Ok(())
}

pub fn segment(
    ctx: &Ctx,
    input: &Path,
    min_marks: usize,
    min_years: f64,
    prominence: f64,
) -> anyhow::Result<()> {
    let report = records_only(input, "segment")?;
    let opts = SplitOptions {
        min_marks,
        min_years,
        prominence,
    };
    let mut w = writer(&ctx.path("segment.csv"))?;
    w.write_record([
        "event_id", "period_idx", "t_i", "t_f", "n_marks", "a", "b", "delta", "adj_r2",
    ])?;
    let mut n_periods = 0;
    for s in &report.series {
        let seg = split_periods(s, &opts)
            .with_context(|| format!("segmenting '{}'", s.meta.event_id))?;
        if seg.fallback {
            eprintln!(
                "warning: event '{}' kept whole, too short for the splitting rules",
                s.meta.event_id
            );
        }
        for (idx, period) in seg.periods.iter().enumerate() {
            let params = period
                .params()
                .with_context(|| format!("period {idx} of '{}'", s.meta.event_id))?;
            w.write_record([
                s.meta.event_id.as_str(),
                &idx.to_string(),
                &period.t_i.to_string(),
                &period.t_f.to_string(),
                &period.n_marks().to_string(),
                &params.a.to_string(),
                &params.b.to_string(),
                &params.delta.to_string(),
                &period.fit.adj_r2.to_string(),
            ])?;
            n_periods += 1;
        }
    }
    w.flush()?;
    manifest::write(
        ctx,
        "segment",
        &[input],
        &[
            ("min_marks", min_marks.to_string()),
            ("min_years", min_years.to_string()),
            ("prominence", prominence.to_string()),
        ],
        None,
    )?;
    ctx.status(&format!(
        "segment: {} events into {n_periods} periods",
        report.series.len()
    ));
    Ok(())
}

/// Forecasts the last period of a segmented event: point limit year, Monte
/// Carlo credibility bounds and the progression percentages of the first
/// and last marks of that period against the fitted asymptote.
fn forecast_event(
    series: &PerformanceSeries,
    seg: &PeriodSegmentation,
    draws: usize,
    seed: u64,
) -> anyhow::Result<LimitForecast> {
    let last = seg.last_period();
    if !last.fit.converged {
        return Err(CoreError::NonConvergence("exp_wr".into()).into());
    }
    let span = (last.t_i, last.t_f);
    let chronometric = series.meta.chronometric;
    let params = last.params()?;
    let year = limit_year(&last.fit, chronometric, span)?;
    let mc = mc_credibility(&last.fit, chronometric, span, draws, seed)?;
    let bp_i = series.marks[last.start_index].value;
    let bp_f = series.marks[last.end_index].value;
    let (ratio_i, ratio_f) = progress_ratios(&params, bp_i, bp_f, chronometric)?;
    Ok(LimitForecast {
        event_id: series.meta.event_id.clone(),
        b: params.b,
        year_9995: year,
        ci_low: mc.year_p2_5,
        ci_high: mc.year_p97_5,
        median_year: mc.median_year,
        beta: ratio_i * 100.0,
        beta_prime: ratio_f * 100.0,
    })
}

pub fn predict(ctx: &Ctx, input: &Path, draws: usize) -> anyhow::Result<()> {
    let report = records_only(input, "predict")?;
    let seed = ctx.seed_or(DEFAULT_SEED);
    let mut w = writer(&ctx.path("predict.csv"))?;
    for s in &report.series {
        let seg = split_periods(s, &SplitOptions::default())
            .with_context(|| format!("segmenting '{}'", s.meta.event_id))?;
        let forecast = forecast_event(s, &seg, draws, seed)
            .with_context(|| format!("forecasting '{}'", s.meta.event_id))?;
        w.serialize(&forecast)?;
    }
    w.flush()?;
    manifest::write(
        ctx,
        "predict",
        &[input],
        &[("draws", draws.to_string())],
        Some(seed),
    )?;
    ctx.status(&format!(
        "predict: {} events, {draws} draws each",
        report.series.len()
    ));
    Ok(())
}

pub fn atypicity(ctx: &Ctx, input: &Path) -> anyhow::Result<()> {
    let kind = input::detect_kind(input)?;
    if kind != InputKind::TopList {
        bail!(CoreError::Domain(format!(
            "atypicity needs a top-list table, got a {} table",
            kind.name()
        )));
    }
    let raw = input::load_toplists(input)?;
    let mut grouped: BTreeMap<(String, i32), Vec<f64>> = BTreeMap::new();
    for (event, year, value) in raw {
        grouped.entry((event, year)).or_default().push(value);
    }
    let mut tables = Vec::with_capacity(grouped.len());
    for ((event, year), values) in grouped {
        let table = YearTop10::new(&event, year, values)
            .with_context(|| format!("top list for '{event}' year {year}"))?;
        tables.push(table);
    }
    let rows = descriptor_rows(&tables)?;
    let analysis = atypicity_scores(&rows)?;
    for (flagged, name) in analysis.degenerate.iter().zip(["d1", "d2", "d3"]) {
        if *flagged {
            eprintln!(
                "warning: descriptor {name} is constant across the input; its uniformised contribution is zero"
            );
        }
    }

    let mut w = writer(&ctx.path("atypicity.csv"))?;
    for record in &analysis.records {
        w.serialize(record)?;
    }
    w.flush()?;

    let mut w = writer(&ctx.path("atypicity_yearly.csv"))?;
    w.write_record(["year", "mean_a"])?;
    for (year, mean) in &analysis.yearly_mean_a {
        w.write_record([year.to_string(), mean.to_string()])?;
    }
    w.flush()?;

    manifest::write(ctx, "atypicity", &[input], &[], None)?;
    ctx.status(&format!(
        "atypicity: {} best performances across {} top lists",
        analysis.records.len(),
        tables.len()
    ));
    Ok(())
}

fn write_grid_csv(
    path: &Path,
    mesh: &DensityMesh,
    value_header: &str,
    value_of: impl Fn(usize, usize) -> String,
) -> anyhow::Result<()> {
    let mut w = writer(path)?;
    w.write_record(["x", "y", value_header])?;
    let spec = &mesh.spec;
    for ix in 0..spec.n_x {
        for iy in 0..spec.n_y {
            w.write_record([
                spec.x_center(ix).to_string(),
                spec.y_center(iy).to_string(),
                value_of(ix, iy),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn density(
    ctx: &Ctx,
    input: &Path,
    resolution: Option<f64>,
    smoothed: bool,
    window: Option<&[f64]>,
) -> anyhow::Result<()> {
    let kind = input::detect_kind(input)?;
    let points = match kind {
        InputKind::Person => person_points(&input::load_people(input)?)?,
        InputKind::Points => input::load_points(input)?,
        other => bail!(CoreError::Domain(format!(
            "density needs person dates or x,y points, got a {} table",
            other.name()
        ))),
    };

    let (mesh, entropy, curve) = match resolution {
        Some(a) => {
            let mesh = build_mesh(&points, a)?;
            let entropy = mesh_entropy(&mesh)?;
            (mesh, entropy, None)
        }
        None => {
            let scan = select_resolution(&points)?;
            let mesh = build_mesh(&points, scan.best_a)?;
            (mesh, scan.best_entropy, Some(scan.curve))
        }
    };

    write_grid_csv(&ctx.path("density.csv"), &mesh, "count", |ix, iy| {
        mesh.count_at(ix, iy).to_string()
    })?;

    if let Some(curve) = &curve {
        let mut w = writer(&ctx.path("density_curve.csv"))?;
        w.write_record(["a", "entropy"])?;
        for point in curve {
            w.write_record([point.a.to_string(), cell(point.entropy)])?;
        }
        w.flush()?;
    }

    if smoothed {
        let means = smoothed_counts(&mesh);
        let n_y = mesh.spec.n_y;
        write_grid_csv(
            &ctx.path("density_smoothed.csv"),
            &mesh,
            "mean_count",
            |ix, iy| means[ix * n_y + iy].to_string(),
        )?;
    }

    if let Some(window) = window {
        let [x0, x1, y0, y1] = match window {
            &[x0, x1, y0, y1] => [x0, x1, y0, y1],
            _ => bail!(CoreError::Domain(format!(
                "--window needs x0,x1,y0,y1, got {} values",
                window.len()
            ))),
        };
        let gradient = lifespan_gradient(&mesh, ((x0, x1), (y0, y1)))?;
        let mut w = writer(&ctx.path("density_gradient.csv"))?;
        w.write_record(["x", "mean_diff"])?;
        for (x, diff) in &gradient {
            w.write_record([x.to_string(), diff.to_string()])?;
        }
        w.flush()?;
    }

    let flags = [
        ("resolution", cell(resolution)),
        ("smoothed", smoothed.to_string()),
        (
            "window",
            window
                .map(|w| {
                    w.iter()
                        .map(f64::to_string)
                        .collect::<Vec<_>>()
                        .join(",")
                })
                .unwrap_or_default(),
        ),
    ];
    manifest::write(ctx, "density", &[input], &flags, None)?;
    ctx.status(&format!(
        "density: a={} entropy={:.6} grid {}x{} holding {} points",
        mesh.spec.a,
        entropy,
        mesh.spec.n_x,
        mesh.spec.n_y,
        mesh.total()
    ));
    Ok(())
}

pub fn simulate(ctx: &Ctx, config: &Path, turns: bool) -> anyhow::Result<()> {
    let mut cfg = SimConfig::from_file(config)?;
    if let Some(seed) = ctx.seed {
        cfg.seed = seed;
    }
    let seed = cfg.seed;
    let initial_population = cfg.n_agents;
    let summary = run_simulation(cfg)?;

    let mut w = writer(&ctx.path("simulate.csv"))?;
    w.write_record(["t_e", "reached_tmax", "final_population"])?;
    let final_population = summary
        .turns
        .last()
        .map_or(initial_population, |t| t.population);
    w.write_record([
        summary.t_e.to_string(),
        summary.reached_t_max.to_string(),
        final_population.to_string(),
    ])?;
    w.flush()?;

    if turns {
        let mut w = writer(&ctx.path("simulate_turns.csv"))?;
        for stats in &summary.turns {
            w.serialize(stats)?;
        }
        w.flush()?;
    }

    manifest::write(
        ctx,
        "simulate",
        &[config],
        &[("turns", turns.to_string())],
        Some(seed),
    )?;
    ctx.status(&format!(
        "simulate: t_e={} reached_tmax={}",
        summary.t_e, summary.reached_t_max
    ));
    Ok(())
}

pub fn sweep(ctx: &Ctx, config: &Path, m: usize, n: usize) -> anyhow::Result<()> {
    let mut cfg = SimConfig::from_file(config)?;
    if let Some(seed) = ctx.seed {
        cfg.seed = seed;
    }
    let seed = cfg.seed;
    let table = mesh_sweep(&cfg, m, n, ctx.jobs)?;

    let mut w = writer(&ctx.path("sweep.csv"))?;
    for row in &table.rows {
        w.serialize(row)?;
    }
    w.flush()?;

    let mut w = writer(&ctx.path("sweep_summary.csv"))?;
    for summary in &table.summaries {
        w.serialize(summary)?;
    }
    w.flush()?;

    manifest::write(
        ctx,
        "sweep",
        &[config],
        &[("m", m.to_string()), ("n", n.to_string())],
        Some(seed),
    )?;
    ctx.status(&format!(
        "sweep: {} runs over {} nodes",
        table.rows.len(),
        table.summaries.len()
    ));
    Ok(())
}

#[derive(Debug, Serialize)]
struct ReportRow {
    event_id: String,
    n_marks: usize,
    n_periods: usize,
    fallback: bool,
    t_i: f64,
    t_f: f64,
    delta: f64,
    a: f64,
    b: f64,
    adj_r2: f64,
    year_9995: f64,
    ci_low: f64,
    ci_high: f64,
    median_year: f64,
    beta: f64,
    beta_prime: f64,
}

fn report_event(
    series: &PerformanceSeries,
    draws: usize,
    seed: u64,
) -> Result<ReportRow, (&'static str, anyhow::Error)> {
    let seg = split_periods(series, &SplitOptions::default())
        .map_err(|e| ("segment", e.into()))?;
    let forecast =
        forecast_event(series, &seg, draws, seed).map_err(|e| ("forecast", e))?;
    let last = seg.last_period();
    let params = last.params().map_err(|e| ("forecast", e.into()))?;
    Ok(ReportRow {
        event_id: forecast.event_id,
        n_marks: series.len(),
        n_periods: seg.n_periods(),
        fallback: seg.fallback,
        t_i: last.t_i,
        t_f: last.t_f,
        delta: params.delta,
        a: params.a,
        b: params.b,
        adj_r2: last.fit.adj_r2,
        year_9995: forecast.year_9995,
        ci_low: forecast.ci_low,
        ci_high: forecast.ci_high,
        median_year: forecast.median_year,
        beta: forecast.beta,
        beta_prime: forecast.beta_prime,
    })
}

pub fn report(ctx: &Ctx, input: &Path, draws: usize) -> anyhow::Result<()> {
    let records = records_only(input, "report")?;
    let seed = ctx.seed_or(DEFAULT_SEED);

    let mut rows = Vec::new();
    let mut exceptions = Vec::new();
    for s in &records.series {
        match report_event(s, draws, seed) {
            Ok(row) => rows.push(row),
            Err((stage, err)) => {
                exceptions.push((s.meta.event_id.clone(), stage, format!("{err:#}")))
            }
        }
    }

    let mut w = writer(&ctx.path("report.csv"))?;
    for row in &rows {
        w.serialize(row)?;
    }
    w.flush()?;

    let mut decades: BTreeMap<i64, u64> = BTreeMap::new();
    for row in &rows {
        let decade = (row.year_9995 / 10.0).floor() as i64 * 10;
        *decades.entry(decade).or_insert(0) += 1;
    }
    let mut w = writer(&ctx.path("report_decades.csv"))?;
    w.write_record(["decade", "count"])?;
    for (decade, count) in &decades {
        w.write_record([decade.to_string(), count.to_string()])?;
    }
    w.flush()?;

    let mut w = writer(&ctx.path("report_exceptions.csv"))?;
    w.write_record(["event_id", "stage", "message"])?;
    for (event, stage, message) in &exceptions {
        w.write_record([event.as_str(), stage, message.as_str()])?;
    }
    w.flush()?;

    manifest::write(
        ctx,
        "report",
        &[input],
        &[("draws", draws.to_string())],
        Some(seed),
    )?;
    ctx.status(&format!(
        "report: {} events forecast, {} exceptions",
        rows.len(),
        exceptions.len()
    ));
    if rows.is_empty() {
        bail!(CoreError::Domain(
            "no event produced a forecast; see report_exceptions.csv".into()
        ));
    }
    Ok(())
}
