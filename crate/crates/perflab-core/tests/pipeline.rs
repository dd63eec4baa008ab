//! End-to-end flows across the library: CSV ingestion, segmentation,
//! forecasting and model recovery working together.

use approx::assert_relative_eq;
use perflab_core::fit::{lm_fit, FitOptions};
use perflab_core::limits::{limit_year, mc_credibility};
use perflab_core::models::{model_by_id, progress_ratios};
use perflab_core::segment::{split_periods, SplitOptions};
use perflab_core::series::{decimal_year, read_record_csv};
use chrono::NaiveDate;

fn record_csv(event: &str, chronometric: bool, dates: &[NaiveDate], values: &[f64]) -> String {
    let mut out = String::from("event_id,discipline,chronometric,unit,date,value,performer_id\n");
    for (d, v) in dates.iter().zip(values) {
        out.push_str(&format!(
            "{event},athletics,{chronometric},seconds,{d},{v},\n"
        ));
    }
    out
}

#[test]
fn noise_free_record_pipeline_reaches_the_hand_computed_limit() {
    let dates: Vec<NaiveDate> = (0..11)
        .map(|i| NaiveDate::from_ymd_opt(2000 + i, 7, 1).unwrap())
        .collect();
    let years: Vec<f64> = dates.iter().map(|d| decimal_year(*d)).collect();
    let (t_i, t_f) = (years[0], years[10]);
    let values: Vec<f64> = years
        .iter()
        .map(|&y| {
            let u = (y - t_i) / (t_f - t_i);
            10.0 + (-u).exp()
        })
        .collect();
    let csv = record_csv("synthetic", true, &dates, &values);

    let report = read_record_csv(csv.as_bytes()).unwrap();
    assert_eq!(report.series.len(), 1);
    let series = &report.series[0];

    let seg = split_periods(series, &SplitOptions::default()).unwrap();
    assert_eq!(seg.n_periods(), 1);
    let period = seg.last_period();
    let fit = &period.fit;
    assert!(fit.converged);
    assert!(fit.rss < 1e-12);
    assert_relative_eq!(fit.params[0], 1.0, max_relative = 1e-6);
    assert_relative_eq!(fit.params[1], 1.0, max_relative = 1e-6);
    assert_relative_eq!(fit.params[2], 10.0, max_relative = 1e-6);

    let year = limit_year(fit, true, (period.t_i, period.t_f)).unwrap();
    let expected = t_i + 200.0f64.ln() * (t_f - t_i);
    assert_relative_eq!(year, expected, max_relative = 1e-6);

    // Noise-free data leaves an essentially zero covariance, so the Monte
    // Carlo interval collapses onto the point estimate.
    let mc = mc_credibility(fit, true, (period.t_i, period.t_f), 1000, 11).unwrap();
    assert!((mc.median_year - year).abs() < 1e-3);
    assert!((mc.year_p97_5 - mc.year_p2_5).abs() < 1e-3);

    let p = period.params().unwrap();
    let (beta, beta_prime) =
        progress_ratios(&p, values[0], values[10], series.meta.chronometric).unwrap();
    assert!(0.0 < beta && beta < beta_prime && beta_prime < 1.0);
}

#[test]
fn two_regime_series_forecasts_from_its_last_period() {
    let dates: Vec<NaiveDate> = (0..24)
        .map(|i| NaiveDate::from_ymd_opt(1990 + i, 7, 1).unwrap())
        .collect();
    let mut values = Vec::new();
    for i in 0..12 {
        let u = i as f64 / 11.0;
        values.push(10.0 + 2.0 * (-3.0 * u).exp());
    }
    for i in 0..12 {
        let u = i as f64 / 11.0;
        values.push(9.2 + 0.85 * (-u).exp());
    }
    let csv = record_csv("two-regime", true, &dates, &values);
    let report = read_record_csv(csv.as_bytes()).unwrap();
    let seg = split_periods(&report.series[0], &SplitOptions::default()).unwrap();
    assert_eq!(seg.n_periods(), 2);

    let last = seg.last_period();
    let year = limit_year(&last.fit, true, (last.t_i, last.t_f)).unwrap();
    assert!(
        year > last.t_f,
        "limit year {year} should extrapolate past {}",
        last.t_f
    );
    // The forecast asymptote belongs to the closing regime.
    assert_relative_eq!(last.fit.params[2], 9.2, max_relative = 1e-3);
}

#[test]
fn registry_guesses_recover_clean_curves() {
    let cases: Vec<(&str, Vec<f64>, Vec<f64>)> = vec![
        (
            "moore",
            vec![7.17, -0.084, 1.84, 0.014],
            (0..36).map(|i| 10.0 + i as f64 * 2.0).collect(),
        ),
        (
            "gompertz",
            vec![2.0, -1.0, -1.0, 3.0],
            (0..30).map(|i| i as f64 * 0.3).collect(),
        ),
        ("linear", vec![2.0, 1.0], (0..10).map(|i| i as f64).collect()),
    ];
    for (id, truth, xs) in cases {
        let spec = model_by_id(id).unwrap();
        let ys: Vec<f64> = xs.iter().map(|&x| (spec.eval)(&truth, x)).collect();
        let fit = lm_fit(&spec, &xs, &ys, &FitOptions::default()).unwrap();
        assert!(fit.converged, "{id} did not converge");
        assert!(fit.rss < 1e-10, "{id} rss {}", fit.rss);
        for (got, want) in fit.params.iter().zip(&truth) {
            assert_relative_eq!(got, want, max_relative = 1e-4);
        }
    }
}
