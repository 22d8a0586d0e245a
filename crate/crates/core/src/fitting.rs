//! Maximum-likelihood estimation over constrained covariance parameters,
//! inverse-Hessian standard errors, fixed-parameter refits and profile
//! likelihood.
//!
//! Positivity constraints are handled by optimizing transformed
//! coordinates: log for alpha, beta, nu, eps (with a small floor), alpha1
//! and beta1, and log(nu1 - 1) for the nu1 > 1 constraint; Legendre
//! coefficients are unconstrained. The optimizer runs a derivative-free
//! simplex stage followed by BFGS with central-difference gradients, with
//! jittered restarts. Standard errors are reported on the raw scale from a
//! central-difference Hessian at the optimum.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use thiserror::Error;

use crate::covmodel::{CovError, ModelSpec, ParamId, ParamVector};
use crate::geometry::Field;
use crate::spectral::{loglik_fft, SpectralError};

/// Nugget floor used by the log transform so eps = 0 stays representable.
const EPS_FLOOR: f64 = 1e-10;
/// Loglik differences below this are ties; the earlier iterate wins.
const TIE_EPS: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FitError {
    #[error("log-likelihood is not finite at the initial parameters: {0}")]
    NonFiniteInit(String),
    #[error("model has no free parameters to optimize")]
    NoFreeParams,
    #[error("parameter {0} is not free in this model")]
    NotFree(String),
    #[error(transparent)]
    Cov(#[from] CovError),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
}

#[derive(Debug, Clone, Copy)]
pub struct FitOptions {
    /// Total optimizer starts; starts after the first jitter the
    /// transformed coordinates.
    pub restarts: usize,
    /// Seed for the restart jitter.
    pub seed: u64,
    /// Simplex-stage iteration cap.
    pub nm_max_iter: usize,
    /// BFGS-stage iteration cap.
    pub bfgs_max_iter: usize,
    /// Converged when the relative loglik improvement drops below this and
    /// the step norm below `step_tol`.
    pub rel_tol: f64,
    pub step_tol: f64,
    /// Compute the Hessian and standard errors at the optimum.
    pub compute_ses: bool,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            restarts: 3,
            seed: 20080214,
            nm_max_iter: 400,
            bfgs_max_iter: 200,
            rel_tol: 1e-8,
            step_tol: 1e-6,
            compute_ses: true,
        }
    }
}

/// Estimation output: estimates, loglik, standard errors, Hessian and
/// convergence diagnostics.
#[derive(Debug, Clone)]
pub struct FitResult {
    pub spec: ModelSpec,
    pub estimates: ParamVector,
    pub loglik: f64,
    /// Canonical order of the optimized parameters.
    pub free_ids: Vec<ParamId>,
    /// Standard errors per free parameter (raw scale); `None` where the
    /// Hessian is not positive definite in that direction.
    pub ses: Vec<Option<f64>>,
    /// Central-difference Hessian of the loglik over the raw free
    /// parameters (empty when SEs were not requested).
    pub hessian: DMatrix<f64>,
    pub converged: bool,
    pub iterations: usize,
    pub restarts: usize,
    /// Best loglik after each accepted optimizer iteration (best start).
    pub trace: Vec<f64>,
    /// Norm of the final numerical gradient in transformed coordinates.
    pub grad_norm: f64,
    /// Parameters implicated in a near-singular Hessian (condition number
    /// above 1e10), if any.
    pub near_singular: Option<Vec<ParamId>>,
}

fn to_transformed(id: ParamId, raw: f64) -> f64 {
    match id {
        ParamId::Alpha | ParamId::Beta | ParamId::Nu | ParamId::Alpha1 | ParamId::Beta1 => {
            raw.ln()
        }
        ParamId::Eps => raw.max(EPS_FLOOR).ln(),
        ParamId::Nu1 => (raw - 1.0).max(1e-12).ln(),
        _ => raw,
    }
}

fn from_transformed(id: ParamId, theta: f64) -> f64 {
    match id {
        ParamId::Alpha | ParamId::Beta | ParamId::Nu | ParamId::Alpha1 | ParamId::Beta1 => {
            theta.exp()
        }
        ParamId::Eps => theta.exp(),
        ParamId::Nu1 => 1.0 + theta.exp(),
        _ => theta,
    }
}

fn params_from_theta(
    template: &ParamVector,
    ids: &[ParamId],
    theta: &[f64],
) -> Option<ParamVector> {
    let mut p = template.clone();
    for (&id, &t) in ids.iter().zip(theta) {
        let raw = from_transformed(id, t);
        if !raw.is_finite() {
            return None;
        }
        p.set(id, raw).ok()?;
    }
    Some(p)
}

/// Default initial values: alpha from the sample variance, range at ten
/// latitude spacings, a small nugget, zero higher-order coefficients and a
/// weak smooth operator component.
pub fn default_init(spec: &ModelSpec, field: &Field) -> ParamVector {
    let grid = field.grid();
    let count = (grid.n_lat() * grid.n_lon()) as f64;
    let mean: f64 = field.values().iter().sum::<f64>() / count;
    let var: f64 = field
        .values()
        .iter()
        .map(|v| (v - mean) * (v - mean))
        .sum::<f64>()
        / count;
    let var = var.max(1e-12);
    let mut p = ParamVector::neutral(spec);
    let beta = 10.0 * grid.lat_spacing_km();
    p.base.alpha = var; // nu = 1 makes the sill equal alpha
    p.base.beta = beta;
    p.base.nu = 1.0;
    p.eps = 0.1 * var;
    if let Some(op) = p.op.as_mut() {
        op.matern.alpha = 1e-6 * var;
        op.matern.beta = beta / 4.0;
        op.matern.nu = 1.5;
    }
    p
}

struct RunOutcome {
    theta: Vec<f64>,
    f: f64,
    trace: Vec<f64>,
    iterations: usize,
    converged: bool,
}

/// Nelder-Mead simplex stage. Returns the best point found; the trace
/// records the best objective after each iteration.
fn nelder_mead(
    f: &dyn Fn(&[f64]) -> f64,
    x0: &[f64],
    max_iter: usize,
    trace: &mut Vec<f64>,
) -> (Vec<f64>, f64, usize) {
    let d = x0.len();
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(d + 1);
    simplex.push((x0.to_vec(), f(x0)));
    for i in 0..d {
        let mut x = x0.to_vec();
        x[i] += 0.25;
        let fx = f(&x);
        simplex.push((x, fx));
    }
    let (rho, chi, gamma, sigma) = (1.0, 2.0, 0.5, 0.5);
    let mut iters = 0;
    for _ in 0..max_iter {
        iters += 1;
        simplex.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap_or(std::cmp::Ordering::Equal));
        let best = simplex[0].1;
        let worst = simplex[d].1;
        trace.push(-best);
        if worst.is_finite() && (worst - best).abs() <= 1e-10 * best.abs().max(1.0) {
            break;
        }
        // centroid of all but the worst
        let mut centroid = vec![0.0; d];
        for (x, _) in &simplex[..d] {
            for (c, v) in centroid.iter_mut().zip(x) {
                *c += v / d as f64;
            }
        }
        let point = |coef: f64| -> Vec<f64> {
            centroid
                .iter()
                .zip(&simplex[d].0)
                .map(|(c, w)| c + coef * (c - w))
                .collect()
        };
        let xr = point(rho);
        let fr = f(&xr);
        if fr < simplex[0].1 - TIE_EPS {
            let xe = point(rho * chi);
            let fe = f(&xe);
            simplex[d] = if fe < fr - TIE_EPS { (xe, fe) } else { (xr, fr) };
        } else if fr < simplex[d - 1].1 {
            simplex[d] = (xr, fr);
        } else {
            let (xc, fc) = if fr < simplex[d].1 {
                let x = point(rho * gamma);
                let fx = f(&x);
                (x, fx)
            } else {
                let x = point(-gamma);
                let fx = f(&x);
                (x, fx)
            };
            if fc < simplex[d].1.min(fr) {
                simplex[d] = (xc, fc);
            } else {
                // shrink toward the best vertex
                let x_best = simplex[0].0.clone();
                for entry in simplex.iter_mut().skip(1) {
                    for (v, b) in entry.0.iter_mut().zip(&x_best) {
                        *v = b + sigma * (*v - b);
                    }
                    entry.1 = f(&entry.0);
                }
            }
        }
    }
    simplex.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap_or(std::cmp::Ordering::Equal));
    let (x, fx) = simplex.swap_remove(0);
    (x, fx, iters)
}

fn central_gradient(f: &dyn Fn(&[f64]) -> f64, x: &[f64]) -> Vec<f64> {
    let mut g = vec![0.0; x.len()];
    let mut xp = x.to_vec();
    for i in 0..x.len() {
        let h = 1e-4 * x[i].abs().max(1.0);
        xp[i] = x[i] + h;
        let fp = f(&xp);
        xp[i] = x[i] - h;
        let fm = f(&xp);
        xp[i] = x[i];
        g[i] = (fp - fm) / (2.0 * h);
    }
    g
}

/// BFGS with numerical gradients and Armijo backtracking.
fn bfgs(
    f: &dyn Fn(&[f64]) -> f64,
    x0: &[f64],
    f0: f64,
    max_iter: usize,
    rel_tol: f64,
    step_tol: f64,
    trace: &mut Vec<f64>,
) -> (Vec<f64>, f64, usize, bool, f64) {
    let d = x0.len();
    let mut x = DVector::from_column_slice(x0);
    let mut fx = f0;
    let mut g = DVector::from_column_slice(&central_gradient(f, x.as_slice()));
    let mut h_inv = DMatrix::<f64>::identity(d, d);
    let mut converged = false;
    let mut iters = 0;
    for _ in 0..max_iter {
        iters += 1;
        let dir = -(&h_inv * &g);
        let slope = g.dot(&dir);
        let dir = if slope < 0.0 { dir } else { -g.clone() };
        let slope = g.dot(&dir);
        // backtracking line search
        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..40 {
            let cand = &x + &dir * t;
            let fc = f(cand.as_slice());
            if fc < fx + 1e-4 * t * slope && fx - fc > TIE_EPS {
                accepted = Some((cand, fc));
                break;
            }
            t *= 0.5;
        }
        let Some((x_new, f_new)) = accepted else {
            converged = true; // no representable improvement along the ray
            break;
        };
        let g_new = DVector::from_column_slice(&central_gradient(f, x_new.as_slice()));
        let s = &x_new - &x;
        let y = &g_new - &g;
        let sy = s.dot(&y);
        if sy > 1e-10 * s.norm() * y.norm() {
            let rho = 1.0 / sy;
            let i_mat = DMatrix::<f64>::identity(d, d);
            let left = &i_mat - &s * y.transpose() * rho;
            let right = &i_mat - &y * s.transpose() * rho;
            h_inv = &left * h_inv * &right + &s * s.transpose() * rho;
        }
        let rel_impr = (fx - f_new) / fx.abs().max(1.0);
        let step = s.norm();
        x = x_new;
        fx = f_new;
        g = g_new;
        trace.push(-fx);
        if rel_impr < rel_tol && step < step_tol {
            converged = true;
            break;
        }
    }
    let grad_norm = g.norm();
    (x.as_slice().to_vec(), fx, iters, converged, grad_norm)
}

fn run_single_start(
    f: &dyn Fn(&[f64]) -> f64,
    theta0: &[f64],
    opts: &FitOptions,
) -> RunOutcome {
    let mut trace = Vec::new();
    let (x_nm, f_nm, it_nm) = nelder_mead(f, theta0, opts.nm_max_iter, &mut trace);
    let (x, fx, it_bfgs, converged, _grad) = bfgs(
        f,
        &x_nm,
        f_nm,
        opts.bfgs_max_iter,
        opts.rel_tol,
        opts.step_tol,
        &mut trace,
    );
    RunOutcome {
        theta: x,
        f: fx,
        trace,
        iterations: it_nm + it_bfgs,
        converged,
    }
}

/// Maximizes the exact FFT log-likelihood over the free parameters.
///
/// `init` supplies both the starting values and the fixed mask; fixed
/// parameters keep their initial values (the two-stage refit of weakly
/// identified parameters is done by fixing them here).
pub fn fit_mle(
    field: &Field,
    spec: &ModelSpec,
    init: &ParamVector,
    opts: &FitOptions,
) -> Result<FitResult, FitError> {
    init.check_spec(spec)?;
    init.validate()?;
    if !field.is_complete() {
        return Err(FitError::Spectral(SpectralError::MissingData));
    }
    let free_ids = init.free_ids(spec);
    if free_ids.is_empty() {
        return Err(FitError::NoFreeParams);
    }
    let theta0: Vec<f64> = free_ids
        .iter()
        .map(|&id| to_transformed(id, init.get(id).expect("free id present")))
        .collect();

    let objective = |theta: &[f64]| -> f64 {
        match params_from_theta(init, &free_ids, theta) {
            Some(p) => match loglik_fft(field, spec, &p) {
                Ok(ll) if ll.is_finite() => -ll,
                _ => f64::INFINITY,
            },
            None => f64::INFINITY,
        }
    };
    let f0 = objective(&theta0);
    if !f0.is_finite() {
        let reason = match params_from_theta(init, &free_ids, &theta0) {
            Some(p) => match loglik_fft(field, spec, &p) {
                Err(e) => e.to_string(),
                Ok(v) => format!("loglik = {v}"),
            },
            None => "parameter reconstruction failed".to_string(),
        };
        return Err(FitError::NonFiniteInit(reason));
    }

    let mut rng = ChaCha12Rng::seed_from_u64(opts.seed);
    let mut best: Option<RunOutcome> = None;
    let restarts = opts.restarts.max(1);
    for r in 0..restarts {
        let start: Vec<f64> = if r == 0 {
            theta0.clone()
        } else {
            theta0
                .iter()
                .map(|t| t + rng.random_range(-0.3..0.3))
                .collect()
        };
        if !objective(&start).is_finite() {
            continue; // a jittered start may be invalid; skip it
        }
        let outcome = run_single_start(&objective, &start, opts);
        let better = match &best {
            None => true,
            Some(b) => outcome.f < b.f - TIE_EPS,
        };
        if better {
            best = Some(outcome);
        }
    }
    let best = best.expect("first start is always finite");
    let estimates =
        params_from_theta(init, &free_ids, &best.theta).expect("optimum reconstructs");
    let loglik = -best.f;
    let grad_norm = {
        let g = central_gradient(&objective, &best.theta);
        g.iter().map(|v| v * v).sum::<f64>().sqrt()
    };

    let (hessian, ses, near_singular) = if opts.compute_ses {
        let h = loglik_hessian_raw(field, spec, &estimates, &free_ids)?;
        let (ses, implicated, _cond) = ses_from_hessian(&h);
        let near = if implicated.is_empty() {
            None
        } else {
            Some(implicated.into_iter().map(|i| free_ids[i]).collect())
        };
        (h, ses, near)
    } else {
        (DMatrix::zeros(0, 0), Vec::new(), None)
    };

    Ok(FitResult {
        spec: *spec,
        estimates,
        loglik,
        free_ids,
        ses,
        hessian,
        converged: best.converged,
        iterations: best.iterations,
        restarts,
        trace: best.trace,
        grad_norm,
        near_singular,
    })
}

/// Central-difference Hessian of a scalar function, steps
/// `h_i = max(1e-4 |x_i|, 1e-6)` shrunk where a positivity bound is close.
pub(crate) fn fd_hessian(
    f: &dyn Fn(&[f64]) -> f64,
    x: &[f64],
    lower_gap: &[f64],
) -> DMatrix<f64> {
    let d = x.len();
    let steps: Vec<f64> = (0..d)
        .map(|i| {
            let h = (1e-4 * x[i].abs()).max(1e-6);
            if lower_gap[i].is_finite() {
                h.min(lower_gap[i] / 2.0)
            } else {
                h
            }
        })
        .collect();
    let f0 = f(x);
    let mut h = DMatrix::zeros(d, d);
    let mut xp = x.to_vec();
    for i in 0..d {
        let hi = steps[i];
        xp[i] = x[i] + hi;
        let fp = f(&xp);
        xp[i] = x[i] - hi;
        let fm = f(&xp);
        xp[i] = x[i];
        h[(i, i)] = (fp - 2.0 * f0 + fm) / (hi * hi);
        for j in 0..i {
            let hj = steps[j];
            xp[i] = x[i] + hi;
            xp[j] = x[j] + hj;
            let fpp = f(&xp);
            xp[j] = x[j] - hj;
            let fpm = f(&xp);
            xp[i] = x[i] - hi;
            let fmm = f(&xp);
            xp[j] = x[j] + hj;
            let fmp = f(&xp);
            xp[i] = x[i];
            xp[j] = x[j];
            let v = (fpp - fpm - fmp + fmm) / (4.0 * hi * hj);
            h[(i, j)] = v;
            h[(j, i)] = v;
        }
    }
    h
}

fn loglik_hessian_raw(
    field: &Field,
    spec: &ModelSpec,
    params: &ParamVector,
    free_ids: &[ParamId],
) -> Result<DMatrix<f64>, FitError> {
    let x: Vec<f64> = free_ids
        .iter()
        .map(|&id| params.get(id).expect("free id present"))
        .collect();
    let lower_gap: Vec<f64> = free_ids
        .iter()
        .zip(&x)
        .map(|(&id, &v)| match id {
            ParamId::Alpha
            | ParamId::Beta
            | ParamId::Nu
            | ParamId::Eps
            | ParamId::Alpha1
            | ParamId::Beta1 => v,
            ParamId::Nu1 => v - 1.0,
            _ => f64::INFINITY,
        })
        .collect();
    let f = |raw: &[f64]| -> f64 {
        let mut p = params.clone();
        for (&id, &v) in free_ids.iter().zip(raw) {
            if p.set(id, v).is_err() {
                return f64::NAN;
            }
        }
        match loglik_fft(field, spec, &p) {
            Ok(ll) => ll,
            Err(_) => f64::NAN,
        }
    };
    Ok(fd_hessian(&f, &x, &lower_gap))
}

/// Standard errors from a loglik Hessian: `sqrt(diag((-H)^{-1}))` on the
/// positive-definite subspace. Returns per-parameter SEs (`None` where the
/// direction is not identified), the indices implicated in near-singular or
/// indefinite directions, and the condition number of -H.
pub(crate) fn ses_from_hessian(h: &DMatrix<f64>) -> (Vec<Option<f64>>, Vec<usize>, f64) {
    let d = h.nrows();
    let neg = -h.clone();
    let eig = nalgebra::SymmetricEigen::new(neg);
    let max_eig = eig.eigenvalues.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    let min_eig = eig.eigenvalues.iter().fold(f64::INFINITY, |a, &b| a.min(b));
    let condition = if min_eig > 0.0 {
        max_eig / min_eig
    } else {
        f64::INFINITY
    };
    let mut implicated = std::collections::BTreeSet::new();
    let mut bad_dirs = Vec::new();
    for (k, &lam) in eig.eigenvalues.iter().enumerate() {
        let near_sing = lam <= 0.0 || (max_eig > 0.0 && max_eig / lam > 1e10);
        if near_sing {
            bad_dirs.push(k);
            for i in 0..d {
                if eig.eigenvectors[(i, k)].abs() > 1e-3 {
                    implicated.insert(i);
                }
            }
        }
    }
    let mut ses = vec![None; d];
    for i in 0..d {
        let loaded_on_bad = eig
            .eigenvalues
            .iter()
            .enumerate()
            .any(|(k, &lam)| lam <= 0.0 && eig.eigenvectors[(i, k)].abs() > 1e-3);
        if loaded_on_bad {
            continue;
        }
        let mut var = 0.0;
        for (k, &lam) in eig.eigenvalues.iter().enumerate() {
            if lam > 0.0 {
                let v = eig.eigenvectors[(i, k)];
                var += v * v / lam;
            }
        }
        if var.is_finite() && var >= 0.0 {
            ses[i] = Some(var.sqrt());
        }
    }
    let _ = bad_dirs;
    (ses, implicated.into_iter().collect(), condition)
}

/// Inverse-Hessian standard errors at (or near) an optimum, on the raw
/// parameter scale.
pub fn hessian_se(
    field: &Field,
    spec: &ModelSpec,
    params: &ParamVector,
) -> Result<(DMatrix<f64>, Vec<Option<f64>>, Option<Vec<ParamId>>), FitError> {
    params.check_spec(spec)?;
    params.validate()?;
    let free_ids = params.free_ids(spec);
    if free_ids.is_empty() {
        return Err(FitError::NoFreeParams);
    }
    let h = loglik_hessian_raw(field, spec, params, &free_ids)?;
    let (ses, implicated, _cond) = ses_from_hessian(&h);
    let near = if implicated.is_empty() {
        None
    } else {
        Some(implicated.into_iter().map(|i| free_ids[i]).collect())
    };
    Ok((h, ses, near))
}

/// One evaluated point of a profile likelihood.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProfilePoint {
    pub value: f64,
    /// Maximized loglik with the target fixed at `value`; `None` when the
    /// inner optimization failed at this point.
    pub loglik: Option<f64>,
}

/// Profile log-likelihood: fixes `target` at each value in turn and
/// re-maximizes the remaining free parameters, warm-starting from the
/// previous point's solution.
pub fn profile_loglik(
    field: &Field,
    spec: &ModelSpec,
    params: &ParamVector,
    target: ParamId,
    values: &[f64],
    opts: &FitOptions,
) -> Result<Vec<ProfilePoint>, FitError> {
    params.check_spec(spec)?;
    if params.fixed.contains(&target) || !spec.param_ids().contains(&target) {
        return Err(FitError::NotFree(target.to_string()));
    }
    let mut inner_opts = *opts;
    inner_opts.restarts = 1;
    inner_opts.compute_ses = false;
    let mut warm = params.clone();
    warm.fixed.insert(target);
    let nothing_left = warm.free_ids(spec).is_empty();
    let mut out = Vec::with_capacity(values.len());
    for &v in values {
        let mut start = warm.clone();
        let point = match start.set(target, v) {
            Ok(()) if nothing_left => {
                // the target was the only free parameter; the profile is
                // the loglik curve itself
                match loglik_fft(field, spec, &start) {
                    Ok(ll) if ll.is_finite() => ProfilePoint {
                        value: v,
                        loglik: Some(ll),
                    },
                    _ => ProfilePoint {
                        value: v,
                        loglik: None,
                    },
                }
            }
            Ok(()) => match fit_mle(field, spec, &start, &inner_opts) {
                Ok(fit) => {
                    warm = fit.estimates.clone();
                    ProfilePoint {
                        value: v,
                        loglik: Some(fit.loglik),
                    }
                }
                Err(_) => ProfilePoint {
                    value: v,
                    loglik: None,
                },
            },
            Err(_) => ProfilePoint {
                value: v,
                loglik: None,
            },
        };
        out.push(point);
    }
    Ok(out)
}
