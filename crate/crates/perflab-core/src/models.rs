//! The model registry: growth, decline and double-peak curves.
//!
//! Every model is addressable by id through [`registry`] and [`model_by_id`]
//! and exposes a plain slice-based evaluation so the fit engine stays
//! generic. Parameter order within the slice is fixed per model and
//! documented on its evaluation function. The frequently handled models also
//! have typed parameter structs with validating constructors.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use statrs::function::erf::erf;
use std::f64::consts::PI;

use crate::fit::{FitResult, ModelSpec};
use crate::series::smooth_lowpass;
use crate::{CoreError, Result};

/// Registered model ids, in registry order.
pub const MODEL_IDS: [&str; 13] = [
    "exp_wr",
    "chapman_richards",
    "antisym_exp",
    "gompertz",
    "richards",
    "moore",
    "moore_rev",
    "pop1",
    "pop2",
    "quad_temp",
    "double_gauss",
    "double_lorentz",
    "linear",
];

const UNB: (f64, f64) = (f64::NEG_INFINITY, f64::INFINITY);
const POS: (f64, f64) = (1e-9, f64::INFINITY);
const NEG: (f64, f64) = (f64::NEG_INFINITY, -1e-9);

// ---------------------------------------------------------------------------
// Evaluations (slice parameter order documented per function).
// ---------------------------------------------------------------------------

/// `p = [delta, a, b]`: delta e^{-a t} + b on normalised period time.
pub fn exp_wr_eval(p: &[f64], t: f64) -> f64 {
    p[0] * (-p[1] * t).exp() + p[2]
}

/// `p = [theta1, theta2, theta3, theta4]`:
/// theta1 - theta2 (1 - e^{-theta3 x})^{theta4}, intended for x >= 0.
pub fn chapman_richards_eval(p: &[f64], x: f64) -> f64 {
    p[0] - p[1] * (1.0 - (-p[2] * x).exp()).powf(p[3])
}

/// `p = [theta1, theta2, theta3, theta4]` with knot theta4:
/// theta1 + theta2 e^{-theta3(x-theta4)} above the knot and
/// theta1 + theta2 (2 - e^{theta3(x-theta4)}) below it.
pub fn antisym_exp_eval(p: &[f64], x: f64) -> f64 {
    let (t1, t2, t3, t4) = (p[0], p[1], p[2], p[3]);
    if x >= t4 {
        t1 + t2 * (-t3 * (x - t4)).exp()
    } else {
        t1 + t2 * (2.0 - (t3 * (x - t4)).exp())
    }
}

/// `p = [a, b, c, d]`: a e^{b e^{c t}} + d.
pub fn gompertz_eval(p: &[f64], t: f64) -> f64 {
    p[0] * (p[1] * (p[2] * t).exp()).exp() + p[3]
}

/// `p = [theta1..theta7]`:
/// theta1 + (theta2 - theta3) / (1 + theta4 e^{-theta5(x-theta6)})^{1/theta7}.
pub fn richards_eval(p: &[f64], x: f64) -> f64 {
    let denom = (1.0 + p[3] * (-p[4] * (x - p[5])).exp()).powf(1.0 / p[6]);
    p[0] + (p[1] - p[2]) / denom
}

/// `p = [a, b, c, d]` with a, c, d > 0 and b < 0:
/// a(1 - e^{b t}) + c(1 - e^{d t}).
pub fn moore_eval(p: &[f64], t: f64) -> f64 {
    p[0] * (1.0 - (p[1] * t).exp()) + p[2] * (1.0 - (p[3] * t).exp())
}

/// `p = [a, b, c, t1]` with a > 0, b < 0, c > 0, t1 > 0:
/// a(1 - e^{b t})(1 - e^{c(t - t1)}).
pub fn moore_rev_eval(p: &[f64], t: f64) -> f64 {
    p[0] * (1.0 - (p[1] * t).exp()) * (1.0 - (p[2] * (t - p[3])).exp())
}

/// `p = [a, alpha10, gamma1, gamma2, t_d]`, all positive:
/// a e^{-(alpha10/gamma1) e^{-gamma1 t}} (1 - e^{gamma2(t - t_d)}).
pub fn pop1_eval(p: &[f64], t: f64) -> f64 {
    let growth = (-(p[1] / p[2]) * (-p[2] * t).exp()).exp();
    p[0] * growth * (1.0 - (p[3] * (t - p[4])).exp())
}

/// `p = [a, alpha10, gamma1, gamma2, d]`, all positive:
/// a e^{-(alpha10/gamma1) e^{-gamma1 t}} e^{-d e^{gamma2 t}}.
pub fn pop2_eval(p: &[f64], t: f64) -> f64 {
    let growth = (-(p[1] / p[2]) * (-p[2] * t).exp()).exp();
    p[0] * growth * (-p[4] * (p[3] * t).exp()).exp()
}

/// `p = [a, b, c]`: -a T + b T^2 + c.
pub fn quad_temp_eval(p: &[f64], t: f64) -> f64 {
    -p[0] * t + p[1] * t * t + p[2]
}

fn gauss_term(a: f64, b: f64, c: f64, x: f64) -> f64 {
    let u = (x - b) / c;
    a * (-u * u).exp()
}

fn lorentz_term(a: f64, b: f64, c: f64, x: f64) -> f64 {
    let u = (x - b) / (a / 2.0);
    c * (2.0 / (a * PI)) / (1.0 + u * u)
}

/// `p = [a1, b1, c1, a2, b2, c2]`: sum of two Gaussian peaks
/// a_j e^{-((x-b_j)/c_j)^2}.
pub fn double_gauss_eval(p: &[f64], x: f64) -> f64 {
    gauss_term(p[0], p[1], p[2], x) + gauss_term(p[3], p[4], p[5], x)
}

/// `p = [a1, b1, c1, a2, b2, c2]`: sum of two Lorentzian peaks with width
/// a_j, centre b_j and area weight c_j.
pub fn double_lorentz_eval(p: &[f64], x: f64) -> f64 {
    lorentz_term(p[0], p[1], p[2], x) + lorentz_term(p[3], p[4], p[5], x)
}

/// `p = [slope, intercept]`.
pub fn linear_eval(p: &[f64], x: f64) -> f64 {
    p[0] * x + p[1]
}

// ---------------------------------------------------------------------------
// Initial guesses.
// ---------------------------------------------------------------------------

fn min_max(v: &[f64]) -> (f64, f64) {
    v.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| {
        (lo.min(x), hi.max(x))
    })
}

fn argmin_x(x: &[f64]) -> usize {
    let mut best = 0;
    for i in 1..x.len() {
        if x[i] < x[best] {
            best = i;
        }
    }
    best
}

fn argmax_x(x: &[f64]) -> usize {
    let mut best = 0;
    for i in 1..x.len() {
        if x[i] > x[best] {
            best = i;
        }
    }
    best
}

fn exp_wr_guess(_x: &[f64], y: &[f64]) -> Vec<f64> {
    // The asymptote sits past the last mark, the amplitude spans the data.
    let first = y[0];
    let last = y[y.len() - 1];
    vec![first - last, 3.0, last]
}

fn chapman_richards_guess(x: &[f64], y: &[f64]) -> Vec<f64> {
    let near = y[argmin_x(x)];
    let far = y[argmax_x(x)];
    let span = x[argmax_x(x)] - x[argmin_x(x)];
    let rate = if span > 0.0 { 2.0 / span } else { 1.0 };
    vec![near, near - far, rate, 1.0]
}

fn antisym_exp_guess(x: &[f64], y: &[f64]) -> Vec<f64> {
    let (lo, hi) = min_max(y);
    let span = x[argmax_x(x)] - x[argmin_x(x)];
    let rate = if span > 0.0 { 2.0 / span } else { 1.0 };
    let mid = (lo + hi) / 2.0;
    let mut knot = x[0];
    let mut best = f64::INFINITY;
    for (&xi, &yi) in x.iter().zip(y) {
        let d = (yi - mid).abs();
        if d < best {
            best = d;
            knot = xi;
        }
    }
    vec![lo, (hi - lo) / 2.0, rate, knot]
}

fn gompertz_guess(_x: &[f64], y: &[f64]) -> Vec<f64> {
    let (lo, hi) = min_max(y);
    vec![hi - lo, -1.0, -1.0, lo]
}

fn richards_guess(x: &[f64], y: &[f64]) -> Vec<f64> {
    let (lo, hi) = min_max(y);
    let range = (hi - lo).max(1e-9);
    let mid = (lo + hi) / 2.0;
    let mut i_mid = 0;
    let mut best = f64::INFINITY;
    for (i, &yi) in y.iter().enumerate() {
        let d = (yi - mid).abs();
        if d < best {
            best = d;
            i_mid = i;
        }
    }
    let span = x[argmax_x(x)] - x[argmin_x(x)];
    let mut rate = if span > 0.0 { 4.0 / span } else { 1.0 };
    if i_mid > 0 && i_mid + 1 < x.len() && x[i_mid + 1] != x[i_mid - 1] {
        let slope = (y[i_mid + 1] - y[i_mid - 1]) / (x[i_mid + 1] - x[i_mid - 1]);
        if slope.is_finite() && slope.abs() > 1e-12 {
            rate = 4.0 * slope.abs() / range;
        }
    }
    vec![lo, range, 0.0, 1.0, rate, x[i_mid], 1.0]
}

fn moore_guess(_x: &[f64], y: &[f64]) -> Vec<f64> {
    let peak = min_max(y).1.max(1e-3);
    vec![1.1 * peak, -0.1, 0.1 * peak, 0.01]
}

fn moore_rev_guess(x: &[f64], y: &[f64]) -> Vec<f64> {
    let peak = min_max(y).1.max(1e-3);
    let xmax = x[argmax_x(x)];
    let t1 = if xmax > 0.0 { 1.5 * xmax } else { 100.0 };
    vec![1.1 * peak, -0.1, 0.01, t1]
}

fn pop1_guess(x: &[f64], y: &[f64]) -> Vec<f64> {
    let peak = min_max(y).1.max(1e-3);
    let xmax = x[argmax_x(x)];
    let td = if xmax > 0.0 { 1.2 * xmax } else { 100.0 };
    vec![1.05 * peak, 1.0, 0.2, 0.05, td]
}

fn pop2_guess(_x: &[f64], y: &[f64]) -> Vec<f64> {
    let peak = min_max(y).1.max(1e-3);
    vec![1.05 * peak, 1.0, 0.2, 0.05, 0.05]
}

fn quad_temp_guess(x: &[f64], y: &[f64]) -> Vec<f64> {
    // Closed-form least squares on the design [-T, T^2, 1].
    let n = x.len();
    let design = DMatrix::from_fn(n, 3, |r, c| match c {
        0 => -x[r],
        1 => x[r] * x[r],
        _ => 1.0,
    });
    let rhs = DVector::from_column_slice(y);
    let normal = design.transpose() * &design;
    let moment = design.transpose() * rhs;
    match normal.lu().solve(&moment) {
        Some(sol) if sol.iter().all(|v| v.is_finite()) => vec![sol[0], sol[1], sol[2]],
        _ => vec![0.0, 0.0, y.iter().sum::<f64>() / n as f64],
    }
}

/// Two largest local maxima of the (smoothed when possible) curve seed the
/// peak centres and heights; centres come out in ascending order.
fn two_peak_seeds(x: &[f64], y: &[f64]) -> ((f64, f64), (f64, f64)) {
    let smoothed = if y.len() >= 5 {
        smooth_lowpass(y, 0.3).unwrap_or_else(|_| y.to_vec())
    } else {
        y.to_vec()
    };
    let mut peaks: Vec<(f64, f64)> = Vec::new();
    for i in 1..smoothed.len().saturating_sub(1) {
        if smoothed[i] > smoothed[i - 1] && smoothed[i] >= smoothed[i + 1] {
            peaks.push((x[i], smoothed[i]));
        }
    }
    peaks.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap_or(std::cmp::Ordering::Equal));
    let span = x[argmax_x(x)] - x[argmin_x(x)];
    let fallback_h = min_max(y).1.max(1e-3);
    let first = peaks
        .first()
        .copied()
        .unwrap_or((x[argmax_x(x)] - span / 2.0, fallback_h));
    let second = peaks
        .get(1)
        .copied()
        .unwrap_or((first.0 + span / 4.0, fallback_h / 2.0));
    if first.0 <= second.0 {
        (first, second)
    } else {
        (second, first)
    }
}

fn double_gauss_guess(x: &[f64], y: &[f64]) -> Vec<f64> {
    let ((b1, h1), (b2, h2)) = two_peak_seeds(x, y);
    let span = x[argmax_x(x)] - x[argmin_x(x)];
    let w = (span / 10.0).max(1e-3);
    vec![h1.max(1e-3), b1, w, h2.max(1e-3), b2, w]
}

fn double_lorentz_guess(x: &[f64], y: &[f64]) -> Vec<f64> {
    let ((b1, h1), (b2, h2)) = two_peak_seeds(x, y);
    let span = x[argmax_x(x)] - x[argmin_x(x)];
    let w = (span / 10.0).max(1e-3);
    // Peak height of one Lorentzian is 2c/(a pi), so c = h a pi / 2.
    vec![
        w,
        b1,
        (h1.max(1e-3)) * w * PI / 2.0,
        w,
        b2,
        (h2.max(1e-3)) * w * PI / 2.0,
    ]
}

fn linear_guess(x: &[f64], y: &[f64]) -> Vec<f64> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut var = 0.0;
    for (&xi, &yi) in x.iter().zip(y) {
        cov += (xi - mx) * (yi - my);
        var += (xi - mx) * (xi - mx);
    }
    let slope = if var > 0.0 { cov / var } else { 0.0 };
    vec![slope, my - slope * mx]
}

// ---------------------------------------------------------------------------
// Registry.
// ---------------------------------------------------------------------------

static EXP_WR_BOUNDS: [(f64, f64); 3] = [UNB, POS, POS];
static CHAPMAN_BOUNDS: [(f64, f64); 4] = [UNB, UNB, POS, POS];
static ANTISYM_BOUNDS: [(f64, f64); 4] = [UNB, UNB, POS, UNB];
static GOMPERTZ_BOUNDS: [(f64, f64); 4] = [UNB, NEG, NEG, UNB];
static RICHARDS_BOUNDS: [(f64, f64); 7] = [UNB, UNB, UNB, POS, UNB, UNB, POS];
static MOORE_BOUNDS: [(f64, f64); 4] = [POS, NEG, POS, POS];
static MOORE_REV_BOUNDS: [(f64, f64); 4] = [POS, NEG, POS, POS];
static POP_BOUNDS: [(f64, f64); 5] = [POS, POS, POS, POS, POS];
static QUAD_BOUNDS: [(f64, f64); 3] = [UNB, UNB, UNB];
static PEAK_GAUSS_BOUNDS: [(f64, f64); 6] = [POS, UNB, POS, POS, UNB, POS];
static PEAK_LORENTZ_BOUNDS: [(f64, f64); 6] = [POS, UNB, POS, POS, UNB, POS];
static LINEAR_BOUNDS: [(f64, f64); 2] = [UNB, UNB];

/// All registered models, in [`MODEL_IDS`] order.
pub fn registry() -> Vec<ModelSpec> {
    vec![
        ModelSpec {
            model_id: "exp_wr",
            n_params: 3,
            eval: exp_wr_eval,
            bounds: &EXP_WR_BOUNDS,
            initial_guess: exp_wr_guess,
        },
        ModelSpec {
            model_id: "chapman_richards",
            n_params: 4,
            eval: chapman_richards_eval,
            bounds: &CHAPMAN_BOUNDS,
            initial_guess: chapman_richards_guess,
        },
        ModelSpec {
            model_id: "antisym_exp",
            n_params: 4,
            eval: antisym_exp_eval,
            bounds: &ANTISYM_BOUNDS,
            initial_guess: antisym_exp_guess,
        },
        ModelSpec {
            model_id: "gompertz",
            n_params: 4,
            eval: gompertz_eval,
            bounds: &GOMPERTZ_BOUNDS,
            initial_guess: gompertz_guess,
        },
        ModelSpec {
            model_id: "richards",
            n_params: 7,
            eval: richards_eval,
            bounds: &RICHARDS_BOUNDS,
            initial_guess: richards_guess,
        },
        ModelSpec {
            model_id: "moore",
            n_params: 4,
            eval: moore_eval,
            bounds: &MOORE_BOUNDS,
            initial_guess: moore_guess,
        },
        ModelSpec {
            model_id: "moore_rev",
            n_params: 4,
            eval: moore_rev_eval,
            bounds: &MOORE_REV_BOUNDS,
            initial_guess: moore_rev_guess,
        },
        ModelSpec {
            model_id: "pop1",
            n_params: 5,
            eval: pop1_eval,
            bounds: &POP_BOUNDS,
            initial_guess: pop1_guess,
        },
        ModelSpec {
            model_id: "pop2",
            n_params: 5,
            eval: pop2_eval,
            bounds: &POP_BOUNDS,
            initial_guess: pop2_guess,
        },
        ModelSpec {
            model_id: "quad_temp",
            n_params: 3,
            eval: quad_temp_eval,
            bounds: &QUAD_BOUNDS,
            initial_guess: quad_temp_guess,
        },
        ModelSpec {
            model_id: "double_gauss",
            n_params: 6,
            eval: double_gauss_eval,
            bounds: &PEAK_GAUSS_BOUNDS,
            initial_guess: double_gauss_guess,
        },
        ModelSpec {
            model_id: "double_lorentz",
            n_params: 6,
            eval: double_lorentz_eval,
            bounds: &PEAK_LORENTZ_BOUNDS,
            initial_guess: double_lorentz_guess,
        },
        ModelSpec {
            model_id: "linear",
            n_params: 2,
            eval: linear_eval,
            bounds: &LINEAR_BOUNDS,
            initial_guess: linear_guess,
        },
    ]
}

/// Looks a model up by id. The error lists the registered ids.
pub fn model_by_id(model_id: &str) -> Result<ModelSpec> {
    registry()
        .into_iter()
        .find(|m| m.model_id == model_id)
        .ok_or_else(|| CoreError::UnknownModel(model_id.to_string(), MODEL_IDS.join(", ")))
}

// ---------------------------------------------------------------------------
// Typed parameters for the models other modules handle directly.
// ---------------------------------------------------------------------------

/// Parameters of the record-progression exponential, delta e^{-a t} + b.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExpWrParams {
    pub delta: f64,
    pub a: f64,
    pub b: f64,
}

impl ExpWrParams {
    pub fn new(delta: f64, a: f64, b: f64) -> Result<Self> {
        if !(a > 0.0) {
            return Err(CoreError::Domain(format!("exp_wr needs a > 0, got {a}")));
        }
        if !(b > 0.0) {
            return Err(CoreError::Domain(format!("exp_wr needs b > 0, got {b}")));
        }
        Ok(ExpWrParams { delta, a, b })
    }

    /// Reads the parameters out of an `exp_wr` fit.
    pub fn from_fit(fit: &FitResult) -> Result<Self> {
        if fit.model_id != "exp_wr" || fit.params.len() != 3 {
            return Err(CoreError::Domain(format!(
                "expected an exp_wr fit, got '{}'",
                fit.model_id
            )));
        }
        ExpWrParams::new(fit.params[0], fit.params[1], fit.params[2])
    }

    pub fn eval(&self, t: f64) -> f64 {
        exp_wr_eval(&[self.delta, self.a, self.b], t)
    }

    /// Inverts the curve: the normalised time at which `y` is reached.
    /// Errors when `y` is on the wrong side of the asymptote, where the
    /// curve never passes.
    pub fn inverse(&self, y: f64) -> Result<f64> {
        let ratio = (y - self.b) / self.delta;
        if !(ratio > 0.0) {
            return Err(CoreError::Domain(format!(
                "target {y} is unreachable: (y - b)/delta = {ratio} is not positive"
            )));
        }
        Ok(-ratio.ln() / self.a)
    }
}

/// Progression ratios of the first and last observed marks relative to the
/// fitted asymptote, oriented so both approach 1 from below as the event
/// nears its limit. Chronometric events use b/mark, others mark/b.
pub fn progress_ratios(
    p: &ExpWrParams,
    wr_i: f64,
    wr_f: f64,
    chronometric: bool,
) -> Result<(f64, f64)> {
    if !(wr_i > 0.0) || !(wr_f > 0.0) {
        return Err(CoreError::Domain(format!(
            "marks must be positive, got {wr_i} and {wr_f}"
        )));
    }
    if chronometric {
        Ok((p.b / wr_i, p.b / wr_f))
    } else {
        Ok((wr_i / p.b, wr_f / p.b))
    }
}

/// Gompertz parameters, a e^{b e^{c t}} + d.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GompertzParams {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

impl GompertzParams {
    pub fn eval(&self, t: f64) -> f64 {
        gompertz_eval(&[self.a, self.b, self.c, self.d], t)
    }
}

/// Parameters of the additive age-performance model,
/// a(1 - e^{b t}) + c(1 - e^{d t}).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MooreParams {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

impl MooreParams {
    pub fn new(a: f64, b: f64, c: f64, d: f64) -> Result<Self> {
        if !(a > 0.0 && c > 0.0 && d > 0.0 && b < 0.0) {
            return Err(CoreError::Domain(format!(
                "moore needs a, c, d > 0 and b < 0, got ({a}, {b}, {c}, {d})"
            )));
        }
        Ok(MooreParams { a, b, c, d })
    }

    pub fn eval(&self, t: f64) -> f64 {
        moore_eval(&[self.a, self.b, self.c, self.d], t)
    }
}

/// Parameters of the multiplicative age-performance model,
/// a(1 - e^{b t})(1 - e^{c(t - t1)}).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MooreRevParams {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub t1: f64,
}

impl MooreRevParams {
    pub fn new(a: f64, b: f64, c: f64, t1: f64) -> Result<Self> {
        if !(a > 0.0 && c > 0.0 && t1 > 0.0 && b < 0.0) {
            return Err(CoreError::Domain(format!(
                "moore_rev needs a, c, t1 > 0 and b < 0, got ({a}, {b}, {c}, {t1})"
            )));
        }
        Ok(MooreRevParams { a, b, c, t1 })
    }

    pub fn eval(&self, t: f64) -> f64 {
        moore_rev_eval(&[self.a, self.b, self.c, self.t1], t)
    }
}

/// Parameters of the one-coefficient population model with a death-time
/// root at `t_d`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PopModel1Params {
    pub a: f64,
    pub alpha10: f64,
    pub gamma1: f64,
    pub gamma2: f64,
    pub t_d: f64,
}

impl PopModel1Params {
    pub fn new(a: f64, alpha10: f64, gamma1: f64, gamma2: f64, t_d: f64) -> Result<Self> {
        if !(a > 0.0 && alpha10 > 0.0 && gamma1 > 0.0 && gamma2 > 0.0 && t_d > 0.0) {
            return Err(CoreError::Domain(
                "pop1 parameters must all be positive".into(),
            ));
        }
        Ok(PopModel1Params {
            a,
            alpha10,
            gamma1,
            gamma2,
            t_d,
        })
    }

    pub fn eval(&self, t: f64) -> f64 {
        pop1_eval(&[self.a, self.alpha10, self.gamma1, self.gamma2, self.t_d], t)
    }
}

/// Parameters of the long-tailed population model (strictly positive for
/// all finite ages).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PopModel2Params {
    pub a: f64,
    pub alpha10: f64,
    pub gamma1: f64,
    pub gamma2: f64,
    pub d: f64,
}

impl PopModel2Params {
    pub fn new(a: f64, alpha10: f64, gamma1: f64, gamma2: f64, d: f64) -> Result<Self> {
        if !(a > 0.0 && alpha10 > 0.0 && gamma1 > 0.0 && gamma2 > 0.0 && d > 0.0) {
            return Err(CoreError::Domain(
                "pop2 parameters must all be positive".into(),
            ));
        }
        Ok(PopModel2Params {
            a,
            alpha10,
            gamma1,
            gamma2,
            d,
        })
    }

    pub fn eval(&self, t: f64) -> f64 {
        pop2_eval(&[self.a, self.alpha10, self.gamma1, self.gamma2, self.d], t)
    }
}

// ---------------------------------------------------------------------------
// Double peaks and their closed-form areas.
// ---------------------------------------------------------------------------

/// Which bell shape a double-peak parameter set uses.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum PeakFamily {
    Gaussian,
    Lorentzian,
}

/// A two-peak curve, `params = [a1, b1, c1, a2, b2, c2]` in the order used
/// by the matching registry model.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DoublePeakParams {
    pub family: PeakFamily,
    pub params: [f64; 6],
}

impl DoublePeakParams {
    pub fn new(family: PeakFamily, params: [f64; 6]) -> Result<Self> {
        let widths = match family {
            PeakFamily::Gaussian => [params[2], params[5]],
            PeakFamily::Lorentzian => [params[0], params[3]],
        };
        for w in widths {
            if !(w > 0.0) {
                return Err(CoreError::Domain(format!(
                    "peak width must be positive, got {w}"
                )));
            }
        }
        Ok(DoublePeakParams { family, params })
    }

    pub fn eval(&self, x: f64) -> f64 {
        match self.family {
            PeakFamily::Gaussian => double_gauss_eval(&self.params, x),
            PeakFamily::Lorentzian => double_lorentz_eval(&self.params, x),
        }
    }

    /// Antiderivative of peak `j` (0 or 1) at `x`; infinities take the
    /// analytic limits.
    fn antiderivative(&self, j: usize, x: f64) -> f64 {
        let (a, b, c) = (
            self.params[3 * j],
            self.params[3 * j + 1],
            self.params[3 * j + 2],
        );
        match self.family {
            PeakFamily::Gaussian => {
                let half_mass = a * c * PI.sqrt() / 2.0;
                if x == f64::INFINITY {
                    half_mass
                } else if x == f64::NEG_INFINITY {
                    -half_mass
                } else {
                    half_mass * erf((x - b) / c)
                }
            }
            PeakFamily::Lorentzian => {
                if x == f64::INFINITY {
                    c / 2.0
                } else if x == f64::NEG_INFINITY {
                    -c / 2.0
                } else {
                    (c / PI) * (2.0 * (x - b) / a).atan()
                }
            }
        }
    }

    /// Integrates both peaks over [lo, hi] with the closed forms and splits
    /// the total into percentages. Infinite bounds are allowed.
    pub fn area(&self, lo: f64, hi: f64) -> Result<PeakAreas> {
        if !(hi > lo) {
            return Err(CoreError::Domain(format!(
                "integration window must satisfy lo < hi, got [{lo}, {hi}]"
            )));
        }
        let a1 = self.antiderivative(0, hi) - self.antiderivative(0, lo);
        let a2 = self.antiderivative(1, hi) - self.antiderivative(1, lo);
        let total = a1 + a2;
        if !(total > 0.0) {
            return Err(CoreError::Domain(format!(
                "total peak area over [{lo}, {hi}] is not positive: {total}"
            )));
        }
        Ok(PeakAreas {
            total,
            p1_pct: 100.0 * a1 / total,
            p2_pct: 100.0 * a2 / total,
        })
    }
}

/// Integral of a double-peak curve and the per-peak share of it.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PeakAreas {
    pub total: f64,
    pub p1_pct: f64,
    pub p2_pct: f64,
}

// ---------------------------------------------------------------------------
// Vertex, peaks and roots.
// ---------------------------------------------------------------------------

/// Orientation of a quadratic vertex.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum VertexKind {
    Minimum,
    Maximum,
}

/// Vertex of -a T + b T^2 + c at T* = a/(2b). Errors when b = 0 (no
/// vertex to report).
pub fn quad_vertex(a: f64, b: f64, c: f64) -> Result<(f64, f64, VertexKind)> {
    if b == 0.0 {
        return Err(CoreError::Domain(
            "quadratic coefficient is zero, the curve has no vertex".into(),
        ));
    }
    let t_star = a / (2.0 * b);
    let value = quad_temp_eval(&[a, b, c], t_star);
    let kind = if b > 0.0 {
        VertexKind::Minimum
    } else {
        VertexKind::Maximum
    };
    Ok((t_star, value, kind))
}

/// Peak and roots of a registered model over an interval.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PeakRoots {
    /// Interior maximum as (age, value), `None` when the maximum sits on
    /// the interval boundary.
    pub peak: Option<(f64, f64)>,
    /// Ascending roots found by bracketed bisection. For the age-performance
    /// family the structural root at t=0 is always reported when the
    /// interval covers it.
    pub roots: Vec<f64>,
}

const SCAN_STEPS: usize = 1000;

fn golden_max(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let inv_phi = (5.0f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    for _ in 0..500 {
        if b - a <= 1e-12 * (1.0 + a.abs() + b.abs()) {
            break;
        }
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

fn bisect_root(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let mut fa = f(a);
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        let fm = f(m);
        if fm == 0.0 || (b - a).abs() <= f64::EPSILON * (1.0 + m.abs()) {
            return m;
        }
        if (fa < 0.0) != (fm < 0.0) {
            b = m;
        } else {
            a = m;
            fa = fm;
        }
    }
    0.5 * (a + b)
}

/// Scans `model_id` over `interval` on a 1000-step grid, refines the best
/// interior maximum by golden-section search and every sign change by
/// bisection. An absent peak is reported as `None`, not an error.
pub fn peak_and_roots(model_id: &str, params: &[f64], interval: (f64, f64)) -> Result<PeakRoots> {
    let spec = model_by_id(model_id)?;
    if params.len() != spec.n_params {
        return Err(CoreError::Domain(format!(
            "model '{model_id}' takes {} parameters, got {}",
            spec.n_params,
            params.len()
        )));
    }
    let (lo, hi) = interval;
    if !(lo.is_finite() && hi.is_finite() && lo < hi) {
        return Err(CoreError::Domain(format!(
            "scan interval must be finite with lo < hi, got [{lo}, {hi}]"
        )));
    }
    let f = |t: f64| (spec.eval)(params, t);
    let step = (hi - lo) / SCAN_STEPS as f64;
    let xs: Vec<f64> = (0..=SCAN_STEPS).map(|i| lo + step * i as f64).collect();
    let ys: Vec<f64> = xs.iter().map(|&t| f(t)).collect();
    if ys.iter().any(|v| !v.is_finite()) {
        return Err(CoreError::Domain(format!(
            "model '{model_id}' is not finite over the scan interval"
        )));
    }

    let mut i_best = 0;
    for i in 1..ys.len() {
        if ys[i] > ys[i_best] {
            i_best = i;
        }
    }
    let peak = if i_best > 0 && i_best < SCAN_STEPS {
        let t_star = golden_max(f, xs[i_best - 1], xs[i_best + 1]);
        Some((t_star, f(t_star)))
    } else {
        None
    };

    let span = hi - lo;
    let mut roots: Vec<f64> = Vec::new();
    let push_root = |r: f64, roots: &mut Vec<f64>| {
        if !roots.iter().any(|&q| (q - r).abs() <= 1e-9 * span) {
            roots.push(r);
        }
    };
    for i in 0..SCAN_STEPS {
        if ys[i] == 0.0 {
            push_root(xs[i], &mut roots);
        } else if (ys[i] < 0.0) != (ys[i + 1] < 0.0) && ys[i + 1] != 0.0 {
            push_root(bisect_root(f, xs[i], xs[i + 1]), &mut roots);
        }
    }
    if ys[SCAN_STEPS] == 0.0 {
        push_root(xs[SCAN_STEPS], &mut roots);
    }

    if matches!(model_id, "moore" | "moore_rev") && lo <= 0.0 && hi >= 0.0 {
        roots.retain(|&r| r.abs() > 1e-9 * span);
        roots.push(0.0);
    }
    roots.sort_by(|a, b| a.partial_cmp(b).unwrap());

    Ok(PeakRoots { peak, roots })
}

/// Logistic expansion factor 1 / (1 + phi1 e^{-phi2 t}).
pub fn logistic_expansion(phi1: f64, phi2: f64, t: f64) -> f64 {
    1.0 / (1.0 + phi1 * (-phi2 * t).exp())
}

/// The age-by-calendar-time performance surface: the logistic expansion
/// multiplied by the age curve. `phi1` must be positive for the logistic
/// interpretation to hold.
pub fn expansion_surface_eval(
    phi1: f64,
    phi2: f64,
    rev: &MooreRevParams,
    age: f64,
    t: f64,
) -> f64 {
    logistic_expansion(phi1, phi2, t) * rev.eval(age)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn registry_ids_are_complete_and_unique() {
        let reg = registry();
        assert_eq!(reg.len(), MODEL_IDS.len());
        for (spec, id) in reg.iter().zip(MODEL_IDS) {
            assert_eq!(spec.model_id, id);
            assert_eq!(spec.bounds.len(), spec.n_params);
        }
        let err = model_by_id("nope").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("nope"));
        for id in MODEL_IDS {
            assert!(msg.contains(id), "error message should list '{id}'");
        }
    }

    #[test]
    fn exp_wr_evaluation_and_inverse() {
        let p = ExpWrParams::new(-2.0, 1.0, 10.0).unwrap();
        assert_relative_eq!(p.eval(0.0), 8.0);
        assert_relative_eq!(p.eval(1.0), 9.264241117657114, max_relative = 1e-12);
        let t = p.inverse(9.264241117657114).unwrap();
        assert_relative_eq!(t, 1.0, max_relative = 1e-10);
        // Round trip far beyond the fitted window.
        let y = p.eval(4.2);
        assert_relative_eq!(p.inverse(y).unwrap(), 4.2, max_relative = 1e-10);
        // The asymptote side never reached by the curve.
        assert!(p.inverse(10.5).is_err());
        assert!(ExpWrParams::new(1.0, 0.0, 10.0).is_err());
        assert!(ExpWrParams::new(1.0, 1.0, -1.0).is_err());
    }

    #[test]
    fn progress_ratio_orientation() {
        // Distance-like: marks climb toward the asymptote from below.
        let p = ExpWrParams::new(-2.0, 1.0, 49.80).unwrap();
        let (beta, beta_prime) = progress_ratios(&p, 35.0, 49.70, false).unwrap();
        assert!(beta < beta_prime && beta_prime < 1.0);
        assert_relative_eq!(beta_prime * 100.0, 99.79, epsilon = 0.02);

        // Time-like: marks fall toward the asymptote from above.
        let q = ExpWrParams::new(2.0, 1.0, 482.2).unwrap();
        let (b_i, b_f) = progress_ratios(&q, 706.0, 484.0, true).unwrap();
        assert!(b_i < b_f && b_f < 1.0);
        assert_relative_eq!(b_f * 100.0, 99.64, epsilon = 0.05);
        assert!(progress_ratios(&q, 0.0, 484.0, true).is_err());
    }

    #[test]
    fn chapman_richards_hand_value() {
        // 10 - 4 (1 - e^{-ln 2})^2 = 10 - 4 (1/2)^2 = 9.
        let p = [10.0, 4.0, 1.0, 2.0];
        assert_relative_eq!(
            chapman_richards_eval(&p, std::f64::consts::LN_2),
            9.0,
            max_relative = 1e-12
        );
        assert_relative_eq!(chapman_richards_eval(&p, 0.0), 10.0);
    }

    #[test]
    fn antisym_exp_knot_and_limits() {
        let p = [3.0, 2.0, 0.7, 1.5];
        assert_relative_eq!(antisym_exp_eval(&p, 1.5), 5.0, max_relative = 1e-12);
        let eps = 1e-9;
        assert_relative_eq!(
            antisym_exp_eval(&p, 1.5 - eps),
            antisym_exp_eval(&p, 1.5 + eps),
            epsilon = 1e-7
        );
        assert_relative_eq!(antisym_exp_eval(&p, 1e6), 3.0, max_relative = 1e-9);
        assert_relative_eq!(antisym_exp_eval(&p, -1e6), 7.0, max_relative = 1e-9);
    }

    #[test]
    fn gompertz_hand_values() {
        let p = GompertzParams {
            a: 2.0,
            b: -1.0,
            c: -1.0,
            d: 3.0,
        };
        assert_relative_eq!(p.eval(0.0), 3.7357588823428847, max_relative = 1e-12);
        assert_relative_eq!(p.eval(1e6), 5.0, max_relative = 1e-9);
    }

    #[test]
    fn richards_limits_and_midpoint() {
        let p = [1.0, 7.0, 2.0, 1.0, 0.8, 4.0, 1.0];
        assert_relative_eq!(richards_eval(&p, 1e6), 6.0, max_relative = 1e-9);
        assert_relative_eq!(richards_eval(&p, -1e6), 1.0, max_relative = 1e-9);
        assert_relative_eq!(richards_eval(&p, 4.0), 3.5, max_relative = 1e-12);
    }

    #[test]
    fn moore_family_structural_zeros() {
        let m = MooreParams::new(7.17, -0.084, 1.84, 0.014).unwrap();
        assert_eq!(m.eval(0.0), 0.0);
        assert!(m.eval(1000.0) < -100.0);

        let r = MooreRevParams::new(10.0, -1.0, 0.05, 100.0).unwrap();
        assert_eq!(r.eval(0.0), 0.0);
        assert_relative_eq!(r.eval(100.0), 0.0, epsilon = 1e-12);
        assert_relative_eq!(r.eval(50.0), 9.179150013761012, max_relative = 1e-12);
        assert!(MooreParams::new(1.0, 0.1, 1.0, 0.1).is_err());
        assert!(MooreRevParams::new(1.0, -0.1, 1.0, -5.0).is_err());
    }

    #[test]
    fn pop_model_hand_values() {
        let p1 = PopModel1Params::new(100.0, 1.0, 0.2, 0.05, 100.0).unwrap();
        assert_relative_eq!(p1.eval(20.0), 89.57771250889652, max_relative = 1e-12);
        assert_relative_eq!(p1.eval(0.0), 0.6692547069322982, max_relative = 1e-12);
        assert_relative_eq!(p1.eval(100.0), 0.0, epsilon = 1e-12);

        let p2 = PopModel2Params::new(100.0, 1.0, 0.2, 0.05, 0.07).unwrap();
        assert_relative_eq!(p2.eval(40.0), 59.516819062327215, max_relative = 1e-12);
        let origin = 100.0 * (-5.0f64).exp() * (-0.07f64).exp();
        assert_relative_eq!(p2.eval(0.0), origin, max_relative = 1e-12);
        assert!(p2.eval(110.0) > 0.0);
        assert!(p2.eval(110.0) < 1e-4);
        assert!(PopModel1Params::new(1.0, 1.0, 0.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn quad_vertex_published_coefficients() {
        let (t_star, _value, kind) = quad_vertex(0.59, 0.02, 5.75).unwrap();
        assert_relative_eq!(t_star, 14.75, max_relative = 1e-12);
        assert_eq!(kind, VertexKind::Minimum);
        assert_eq!(quad_vertex(1.0, -0.5, 0.0).unwrap().2, VertexKind::Maximum);
        assert!(quad_vertex(1.0, 0.0, 2.0).is_err());
        assert_eq!(quad_temp_eval(&[0.59, 0.02, 5.75], 0.0), 5.75);
    }

    #[test]
    fn double_peak_symmetric_split() {
        let g = DoublePeakParams::new(
            PeakFamily::Gaussian,
            [2.0, -3.0, 1.5, 2.0, 3.0, 1.5],
        )
        .unwrap();
        let areas = g.area(-10.0, 10.0).unwrap();
        assert!((areas.p1_pct - 50.0).abs() < 1e-9);
        assert!((areas.p2_pct - 50.0).abs() < 1e-9);
        assert!((areas.p1_pct + areas.p2_pct - 100.0).abs() < 1e-9);

        let l = DoublePeakParams::new(
            PeakFamily::Lorentzian,
            [1.0, -2.0, 4.0, 1.0, 2.0, 4.0],
        )
        .unwrap();
        let areas = l.area(-8.0, 8.0).unwrap();
        assert!((areas.p1_pct - 50.0).abs() < 1e-9);
    }

    #[test]
    fn peak_full_masses() {
        let g = DoublePeakParams::new(
            PeakFamily::Gaussian,
            [2.0, 0.0, 3.0, 1e-12, 100.0, 1.0],
        )
        .unwrap();
        let whole = g.area(f64::NEG_INFINITY, f64::INFINITY).unwrap();
        // One Gaussian peak integrates to a c sqrt(pi).
        assert_relative_eq!(whole.total, 10.634723105433096, max_relative = 1e-9);

        let l = DoublePeakParams::new(
            PeakFamily::Lorentzian,
            [1.5, 0.0, 4.0, 2.0, 50.0, 1e-12],
        )
        .unwrap();
        let whole = l.area(f64::NEG_INFINITY, f64::INFINITY).unwrap();
        // A Lorentzian's area weight is its full mass.
        assert_relative_eq!(whole.total, 4.0, max_relative = 1e-9);
    }

    #[test]
    fn double_peak_rejects_bad_widths_and_windows() {
        assert!(DoublePeakParams::new(
            PeakFamily::Gaussian,
            [1.0, 0.0, 0.0, 1.0, 1.0, 1.0]
        )
        .is_err());
        assert!(DoublePeakParams::new(
            PeakFamily::Lorentzian,
            [-1.0, 0.0, 1.0, 1.0, 1.0, 1.0]
        )
        .is_err());
        let g = DoublePeakParams::new(PeakFamily::Gaussian, [1.0, 0.0, 1.0, 1.0, 5.0, 1.0])
            .unwrap();
        assert!(g.area(3.0, 3.0).is_err());
    }

    #[test]
    fn peak_and_roots_published_age_curve() {
        let params = [7.17, -0.084, 1.84, 0.014];
        let pr = peak_and_roots("moore", &params, (0.0, 120.0)).unwrap();
        let (age, value) = pr.peak.expect("the age curve has an interior peak");
        assert_relative_eq!(age, 32.16224032876214, epsilon = 1e-5);
        assert_relative_eq!(value, 5.642442796638779, max_relative = 1e-6);
        // Within a year of the published peak age.
        assert!((age - 31.61).abs() <= 1.0);

        assert!(pr.roots.contains(&0.0));
        let late: Vec<&f64> = pr.roots.iter().filter(|&&r| r > 1.0).collect();
        assert_eq!(late.len(), 1);
        let decline_root = *late[0];
        assert!(moore_eval(&params, decline_root).abs() < 1e-6);
        assert!((100.0..125.0).contains(&decline_root));
    }

    #[test]
    fn peak_and_roots_moore_rev_structural_roots() {
        let params = [10.0, -0.3, 0.05, 100.0];
        let pr = peak_and_roots("moore_rev", &params, (0.0, 150.0)).unwrap();
        assert!(pr.roots.contains(&0.0));
        assert!(
            pr.roots.iter().any(|&r| (r - 100.0).abs() < 1e-6),
            "roots {:?}",
            pr.roots
        );
        assert!(pr.peak.is_some());
    }

    #[test]
    fn peak_and_roots_edge_behaviour() {
        // Strictly increasing over the window: the maximum is on the
        // boundary, so no interior peak is reported.
        let pr = peak_and_roots("linear", &[1.0, 5.0], (0.0, 10.0)).unwrap();
        assert!(pr.peak.is_none());
        assert!(pr.roots.is_empty());

        assert!(peak_and_roots("nope", &[0.0], (0.0, 1.0)).is_err());
        assert!(peak_and_roots("linear", &[1.0], (0.0, 1.0)).is_err());
        assert!(peak_and_roots("linear", &[1.0, 0.0], (1.0, 1.0)).is_err());
    }

    #[test]
    fn expansion_surface_factors() {
        assert_relative_eq!(
            logistic_expansion(300.0, 1.0, 10.0),
            0.9865630322883534,
            max_relative = 1e-12
        );
        let rev = MooreRevParams::new(10.0, -1.0, 0.05, 100.0).unwrap();
        let surface = expansion_surface_eval(300.0, 1.0, &rev, 50.0, 10.0);
        assert_relative_eq!(
            surface,
            0.9865630322883534 * 9.179150013761012,
            max_relative = 1e-12
        );
        // Early in the expansion the surface is suppressed everywhere.
        assert!(expansion_surface_eval(300.0, 1.0, &rev, 50.0, 0.0) < 0.04 * rev.eval(50.0));
    }

    #[test]
    fn guesses_have_model_arity_and_stay_finite() {
        let x: Vec<f64> = (0..40).map(|i| i as f64 * 0.25).collect();
        let y: Vec<f64> = x.iter().map(|&v| 5.0 + 2.0 * (-0.5 * v).exp()).collect();
        for spec in registry() {
            let guess = (spec.initial_guess)(&x, &y);
            assert_eq!(guess.len(), spec.n_params, "model {}", spec.model_id);
            assert!(
                guess.iter().all(|v| v.is_finite()),
                "model {} guess {guess:?}",
                spec.model_id
            );
        }
    }

    #[test]
    fn double_peak_guess_locates_separated_peaks() {
        let x: Vec<f64> = (0..200).map(|i| i as f64 * 0.25).collect();
        let truth = [4.0, 12.0, 2.0, 6.0, 35.0, 3.0];
        let y: Vec<f64> = x.iter().map(|&v| double_gauss_eval(&truth, v)).collect();
        let guess = double_gauss_guess(&x, &y);
        assert!((guess[1] - 12.0).abs() < 5.0, "first centre {}", guess[1]);
        assert!((guess[4] - 35.0).abs() < 5.0, "second centre {}", guess[4]);
        assert!(guess[1] < guess[4]);
    }

    // The solver differentiates models numerically, so every registered
    // curve must be smooth enough for two very different step sizes to
    // agree on the derivative.
    #[test]
    fn central_differences_are_step_stable_for_every_model() {
        let sample: Vec<(&str, Vec<f64>, Vec<f64>)> = vec![
            ("exp_wr", vec![2.0, 1.5, 9.0], vec![0.1, 0.4, 0.9]),
            ("chapman_richards", vec![10.0, 4.0, 1.2, 2.0], vec![0.3, 1.0, 2.5]),
            ("antisym_exp", vec![3.0, 2.0, 0.7, 1.5], vec![0.2, 1.4, 3.0]),
            ("gompertz", vec![2.0, -1.0, -0.8, 3.0], vec![0.5, 2.0, 4.0]),
            (
                "richards",
                vec![1.0, 7.0, 2.0, 1.3, 0.8, 4.0, 1.2],
                vec![2.0, 4.0, 6.5],
            ),
            ("moore", vec![7.17, -0.084, 1.84, 0.014], vec![10.0, 32.0, 70.0]),
            ("moore_rev", vec![10.0, -0.3, 0.05, 100.0], vec![10.0, 40.0, 80.0]),
            ("pop1", vec![100.0, 1.0, 0.2, 0.05, 100.0], vec![5.0, 30.0, 80.0]),
            ("pop2", vec![100.0, 1.0, 0.2, 0.05, 0.07], vec![5.0, 30.0, 80.0]),
            ("quad_temp", vec![0.59, 0.02, 5.75], vec![5.0, 14.75, 25.0]),
            (
                "double_gauss",
                vec![4.0, 12.0, 2.0, 6.0, 35.0, 3.0],
                vec![10.0, 20.0, 36.0],
            ),
            (
                "double_lorentz",
                vec![2.0, 12.0, 5.0, 3.0, 35.0, 8.0],
                vec![10.0, 20.0, 36.0],
            ),
            ("linear", vec![2.0, 1.0], vec![0.0, 5.0, 9.0]),
        ];
        assert_eq!(sample.len(), MODEL_IDS.len());
        for (id, params, points) in sample {
            let spec = model_by_id(id).unwrap();
            for &x in &points {
                for j in 0..spec.n_params {
                    let diff = |h: f64| {
                        let mut plus = params.clone();
                        let mut minus = params.clone();
                        plus[j] += h;
                        minus[j] -= h;
                        ((spec.eval)(&plus, x) - (spec.eval)(&minus, x)) / (2.0 * h)
                    };
                    let h = (1e-6 * params[j].abs()).max(1e-6);
                    let coarse = diff(h);
                    let fine = diff(h / 8.0);
                    let scale = coarse.abs().max(fine.abs());
                    // Tiny derivatives of a large function value drown in
                    // rounding noise, so allow a floor tied to the
                    // function's own magnitude.
                    let floor = 1e-9 * (spec.eval)(&params, x).abs().max(1.0);
                    if scale > 1e-6 {
                        assert!(
                            (coarse - fine).abs() <= 1e-4 * scale + floor,
                            "model {id}, parameter {j}, x={x}: {coarse} vs {fine}"
                        );
                    }
                }
            }
        }
    }
}
