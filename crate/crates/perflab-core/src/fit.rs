//! Bounded Levenberg-Marquardt least squares and model comparison scores.
//!
//! The solver keeps parameters inside box bounds by projection, damps the
//! normal equations with a scalar multiple of the identity, and only ever
//! accepts steps that do not increase the residual sum of squares. All
//! derivatives are central finite differences, so models only need a plain
//! evaluation function.

use nalgebra::{DMatrix, DVector};

use crate::stats::mean;
use crate::{CoreError, Result};

/// Evaluates a model at one abscissa given a parameter slice.
pub type ModelEval = fn(&[f64], f64) -> f64;

/// Produces a starting parameter vector from the data.
pub type GuessFn = fn(&[f64], &[f64]) -> Vec<f64>;

/// A fittable model: evaluation, box bounds and a data-driven initial guess.
#[derive(Clone, Copy, Debug)]
pub struct ModelSpec {
    pub model_id: &'static str,
    pub n_params: usize,
    pub eval: ModelEval,
    pub bounds: &'static [(f64, f64)],
    pub initial_guess: GuessFn,
}

/// Solver settings. The defaults match the reference configuration used for
/// every analysis in this crate.
#[derive(Clone, Copy, Debug)]
pub struct FitOptions {
    pub max_iter: usize,
    pub ftol: f64,
    pub xtol: f64,
    pub lambda0: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            max_iter: 500,
            ftol: 1e-10,
            xtol: 1e-10,
            lambda0: 1e-3,
        }
    }
}

/// A completed fit. `covariance` is `None` when the normal matrix is
/// singular at the solution; the fit itself is still usable.
///
/// `rss_trace` records the residual sum of squares after every accepted
/// step, starting at the initial guess. It is non-increasing by
/// construction.
#[derive(Clone, Debug)]
pub struct FitResult {
    pub model_id: String,
    pub params: Vec<f64>,
    pub rss: f64,
    pub adj_r2: f64,
    pub rmse: f64,
    pub covariance: Option<DMatrix<f64>>,
    pub n_obs: usize,
    pub converged: bool,
    pub rss_trace: Vec<f64>,
}

impl FitResult {
    /// Parameter standard errors, the square roots of the covariance
    /// diagonal.
    pub fn std_errors(&self) -> Option<Vec<f64>> {
        let cov = self.covariance.as_ref()?;
        Some((0..self.params.len()).map(|i| cov[(i, i)].max(0.0).sqrt()).collect())
    }
}

const LAMBDA_MAX: f64 = 1e14;
const LAMBDA_MIN: f64 = 1e-12;

fn project(p: &mut [f64], bounds: &[(f64, f64)]) {
    for (v, (lo, hi)) in p.iter_mut().zip(bounds) {
        *v = v.clamp(*lo, *hi);
    }
}

fn rss_of(eval: ModelEval, p: &[f64], x: &[f64], y: &[f64]) -> f64 {
    let mut rss = 0.0;
    for (&xi, &yi) in x.iter().zip(y) {
        let r = yi - eval(p, xi);
        rss += r * r;
    }
    rss
}

fn residual_vector(eval: ModelEval, p: &[f64], x: &[f64], y: &[f64]) -> DVector<f64> {
    DVector::from_iterator(x.len(), x.iter().zip(y).map(|(&xi, &yi)| yi - eval(p, xi)))
}

/// Central finite-difference Jacobian of the model at `p`, one column per
/// parameter, step max(1e-6, 1e-6 |p_j|).
fn jacobian(eval: ModelEval, p: &[f64], x: &[f64]) -> DMatrix<f64> {
    let n = x.len();
    let k = p.len();
    let mut jac = DMatrix::zeros(n, k);
    let mut plus = p.to_vec();
    let mut minus = p.to_vec();
    for c in 0..k {
        let h = (1e-6 * p[c].abs()).max(1e-6);
        plus[c] = p[c] + h;
        minus[c] = p[c] - h;
        for r in 0..n {
            jac[(r, c)] = (eval(&plus, x[r]) - eval(&minus, x[r])) / (2.0 * h);
        }
        plus[c] = p[c];
        minus[c] = p[c];
    }
    jac
}

fn adj_r2_of(rss: f64, y: &[f64], k: usize) -> f64 {
    let n = y.len();
    let m = mean(y);
    let tss: f64 = y.iter().map(|v| (v - m) * (v - m)).sum();
    if tss <= 0.0 || n <= k + 1 {
        // Degenerate denominators: a perfect fit scores 1, anything else
        // cannot be ranked and scores negative infinity.
        let scale: f64 = y.iter().map(|v| v * v).sum::<f64>().max(1.0);
        return if rss <= 1e-12 * scale { 1.0 } else { f64::NEG_INFINITY };
    }
    1.0 - (rss / (n - k - 1) as f64) / (tss / (n - 1) as f64)
}

/// Fits `spec` to (`x`, `y`) with bounded Levenberg-Marquardt.
///
/// Needs at least `n_params + 1` finite observations. The returned fit
/// always carries the best parameters seen; `converged` is false when the
/// iteration budget ran out or the Jacobian stopped being finite.
pub fn lm_fit(spec: &ModelSpec, x: &[f64], y: &[f64], opts: &FitOptions) -> Result<FitResult> {
    let n = x.len();
    let k = spec.n_params;
    if spec.bounds.len() != k {
        return Err(CoreError::Domain(format!(
            "model '{}' declares {} bounds for {} parameters",
            spec.model_id,
            spec.bounds.len(),
            k
        )));
    }
    if spec.bounds.iter().any(|(lo, hi)| !(lo < hi)) {
        return Err(CoreError::Domain(format!(
            "model '{}' has an empty bound interval",
            spec.model_id
        )));
    }
    if n != y.len() {
        return Err(CoreError::Domain(format!(
            "x and y lengths differ: {} vs {}",
            n,
            y.len()
        )));
    }
    if n < k + 1 {
        return Err(CoreError::InsufficientData(format!(
            "model '{}' needs at least {} observations, got {n}",
            spec.model_id,
            k + 1
        )));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(CoreError::Domain("observations must be finite".into()));
    }

    let mut p = (spec.initial_guess)(x, y);
    if p.len() != k {
        return Err(CoreError::Domain(format!(
            "initial guess for '{}' has wrong length {}",
            spec.model_id,
            p.len()
        )));
    }
    project(&mut p, spec.bounds);
    let mut rss = rss_of(spec.eval, &p, x, y);
    if !rss.is_finite() {
        return Err(CoreError::Domain(format!(
            "model '{}' is not finite at its initial guess",
            spec.model_id
        )));
    }

    let mut lambda = opts.lambda0;
    let mut converged = false;
    let mut trace = vec![rss];

    for _ in 0..opts.max_iter {
        if rss == 0.0 {
            converged = true;
            break;
        }
        let jac = jacobian(spec.eval, &p, x);
        if jac.iter().any(|v| !v.is_finite()) {
            converged = false;
            break;
        }
        let residuals = residual_vector(spec.eval, &p, x, y);
        let jt = jac.transpose();
        let normal = &jt * &jac;
        let gradient = &jt * &residuals;

        let mut accepted = false;
        while lambda <= LAMBDA_MAX {
            let mut damped = normal.clone();
            for i in 0..k {
                damped[(i, i)] += lambda;
            }
            let step = damped.lu().solve(&gradient);
            let trial = match step {
                Some(delta) if delta.iter().all(|v| v.is_finite()) => {
                    let mut t: Vec<f64> = p.iter().zip(delta.iter()).map(|(a, d)| a + d).collect();
                    project(&mut t, spec.bounds);
                    t
                }
                _ => {
                    lambda *= 10.0;
                    continue;
                }
            };
            let trial_rss = rss_of(spec.eval, &trial, x, y);
            if trial_rss.is_finite() && trial_rss <= rss {
                let decrease = rss - trial_rss;
                let step_norm: f64 = trial
                    .iter()
                    .zip(&p)
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
                    .sqrt();
                let prev = rss;
                p = trial;
                rss = trial_rss;
                trace.push(rss);
                lambda = (lambda / 10.0).max(LAMBDA_MIN);
                accepted = true;
                if decrease <= opts.ftol * prev.max(f64::MIN_POSITIVE) || step_norm <= opts.xtol {
                    converged = true;
                }
                break;
            }
            lambda *= 10.0;
        }
        if !accepted {
            // Damping is exhausted and no downhill step exists, so the
            // relative decrease is zero, which is below ftol.
            converged = true;
            break;
        }
        if converged {
            break;
        }
    }

    let covariance = covariance_at(spec.eval, &p, x, rss, n, k);
    let adj_r2 = adj_r2_of(rss, y, k);
    let rmse = (rss / (n - k).max(1) as f64).sqrt();

    Ok(FitResult {
        model_id: spec.model_id.to_string(),
        params: p,
        rss,
        adj_r2,
        rmse,
        covariance,
        n_obs: n,
        converged,
        rss_trace: trace,
    })
}

/// Parameter covariance sigma^2 (J^T J)^-1 at the solution, with
/// sigma^2 = RSS / (n - k). `None` when the normal matrix is singular or
/// the degrees of freedom vanish; the fit is still valid, only its
/// uncertainty is unavailable.
fn covariance_at(
    eval: ModelEval,
    p: &[f64],
    x: &[f64],
    rss: f64,
    n: usize,
    k: usize,
) -> Option<DMatrix<f64>> {
    if n <= k {
        return None;
    }
    let jac = jacobian(eval, p, x);
    if jac.iter().any(|v| !v.is_finite()) {
        return None;
    }
    let normal = jac.transpose() * &jac;
    let inverse = match normal.clone().cholesky() {
        Some(chol) => chol.inverse(),
        None => normal.try_inverse()?,
    };
    let sigma2 = rss / (n - k) as f64;
    let cov = &inverse * sigma2;
    let sym = (&cov + cov.transpose()) * 0.5;
    if sym.iter().any(|v| !v.is_finite()) {
        return None;
    }
    Some(sym)
}

/// Adjusted R^2 of a fit with `k` parameters on observations `y`.
///
/// Errors when fewer than `k + 2` observations are available or the
/// observations have no variance.
pub fn adjusted_r2(rss: f64, y: &[f64], k: usize) -> Result<f64> {
    let n = y.len();
    if n <= k + 1 {
        return Err(CoreError::InsufficientData(format!(
            "adjusted R2 with k={k} needs at least {} observations, got {n}",
            k + 2
        )));
    }
    if !rss.is_finite() || rss < 0.0 {
        return Err(CoreError::Domain(format!("rss must be non-negative, got {rss}")));
    }
    let m = mean(y);
    let tss: f64 = y.iter().map(|v| (v - m) * (v - m)).sum();
    if tss <= 0.0 {
        return Err(CoreError::Domain(
            "observations have zero variance, adjusted R2 is undefined".into(),
        ));
    }
    Ok(1.0 - (rss / (n - k - 1) as f64) / (tss / (n - 1) as f64))
}

/// Corrected Akaike information criterion,
/// n ln(RSS/n) + 2k + 2k(k+1)/(n-k-1).
///
/// Errors when `rss` is not strictly positive (the log diverges) or
/// `n <= k + 1` (the correction term divides by zero).
pub fn aicc(rss: f64, n: usize, k: usize) -> Result<f64> {
    if !rss.is_finite() || rss <= 0.0 {
        return Err(CoreError::Domain(format!(
            "AICc needs a strictly positive rss, got {rss}"
        )));
    }
    if n <= k + 1 {
        return Err(CoreError::Domain(format!(
            "AICc with k={k} needs n > {}, got {n}",
            k + 1
        )));
    }
    let nf = n as f64;
    let kf = k as f64;
    Ok(nf * (rss / nf).ln() + 2.0 * kf + 2.0 * kf * (kf + 1.0) / (nf - kf - 1.0))
}

/// Schwarz Bayesian information criterion, n ln(RSS/n) + k ln(n).
///
/// Errors when `rss` is not strictly positive or `n < 2`.
pub fn sbic(rss: f64, n: usize, k: usize) -> Result<f64> {
    if !rss.is_finite() || rss <= 0.0 {
        return Err(CoreError::Domain(format!(
            "SBIC needs a strictly positive rss, got {rss}"
        )));
    }
    if n < 2 {
        return Err(CoreError::Domain(format!("SBIC needs n >= 2, got {n}")));
    }
    let nf = n as f64;
    Ok(nf * (rss / nf).ln() + k as f64 * nf.ln())
}

/// One model's scores within a comparison table. Distances are relative to
/// the best (lowest) criterion value, so they are non-negative and the best
/// model scores zero.
#[derive(Clone, Debug)]
pub struct CriterionRow {
    pub model_id: String,
    pub k: usize,
    pub aicc: f64,
    pub sbic: f64,
    pub delta_aicc: f64,
    pub delta_sbic: f64,
}

/// AICc/SBIC comparison of several fits of the same data.
#[derive(Clone, Debug)]
pub struct CriterionTable {
    pub n_obs: usize,
    pub rows: Vec<CriterionRow>,
}

/// Builds the criterion table for fits of one dataset. All fits must share
/// the same observation count; a zero RSS propagates the AICc domain error.
pub fn criterion_table(fits: &[FitResult]) -> Result<CriterionTable> {
    if fits.is_empty() {
        return Err(CoreError::InsufficientData("no fits to compare".into()));
    }
    let n = fits[0].n_obs;
    if fits.iter().any(|f| f.n_obs != n) {
        return Err(CoreError::Domain(
            "criterion comparison requires fits of the same observations".into(),
        ));
    }
    let mut rows = Vec::with_capacity(fits.len());
    for f in fits {
        let k = f.params.len();
        rows.push(CriterionRow {
            model_id: f.model_id.clone(),
            k,
            aicc: aicc(f.rss, n, k)?,
            sbic: sbic(f.rss, n, k)?,
            delta_aicc: 0.0,
            delta_sbic: 0.0,
        });
    }
    let min_aicc = rows.iter().map(|r| r.aicc).fold(f64::INFINITY, f64::min);
    let min_sbic = rows.iter().map(|r| r.sbic).fold(f64::INFINITY, f64::min);
    for r in &mut rows {
        r.delta_aicc = r.aicc - min_aicc;
        r.delta_sbic = r.sbic - min_sbic;
    }
    Ok(CriterionTable { n_obs: n, rows })
}
