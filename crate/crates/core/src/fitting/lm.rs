//! Levenberg–Marquardt with Marquardt diagonal scaling.
//!
//! Residuals are `r_i = w_i (y_i − f(x_i; p))`. Each iteration solves
//! `(JᵀJ + λ diag(JᵀJ)) δ = Jᵀr` in a column-equilibrated basis so that
//! parameters of wildly different magnitude (amperes next to megahertz)
//! share one damping schedule.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// A scalar model `f(x; p)`.
pub trait Model {
    fn n_params(&self) -> usize;

    fn eval(&self, x: f64, params: &[f64]) -> f64;

    /// Write ∂f/∂p into `out` and return `true`, or return `false` to fall
    /// back to central finite differences.
    fn partials(&self, _x: f64, _params: &[f64], _out: &mut [f64]) -> bool {
        false
    }
}

/// Adapter for closure models without analytic derivatives.
pub struct FnModel<F> {
    n_params: usize,
    f: F,
}

impl<F: Fn(f64, &[f64]) -> f64> FnModel<F> {
    pub fn new(n_params: usize, f: F) -> Self {
        Self { n_params, f }
    }
}

impl<F: Fn(f64, &[f64]) -> f64> Model for FnModel<F> {
    fn n_params(&self) -> usize {
        self.n_params
    }

    fn eval(&self, x: f64, params: &[f64]) -> f64 {
        (self.f)(x, params)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DataPoint {
    pub x: f64,
    pub y: f64,
    /// Residual multiplier, normally 1/σ.
    pub weight: f64,
}

impl DataPoint {
    pub fn new(x: f64, y: f64, weight: f64) -> Self {
        Self { x, y, weight }
    }

    pub fn unweighted(x: f64, y: f64) -> Self {
        Self { x, y, weight: 1.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    pub max_iterations: usize,
    pub initial_lambda: f64,
    pub lambda_up: f64,
    pub lambda_down: f64,
    /// Stop when an accepted step lowers the cost by less than this fraction.
    pub ftol: f64,
    /// Stop when every column of J is this close to orthogonal to r.
    pub gtol: f64,
    /// Stop when the step is this small relative to the parameters.
    pub xtol: f64,
    /// Treat weights as exact 1/σ: the covariance is (JᵀJ)⁻¹ with no
    /// residual-variance scaling.
    pub absolute_weights: bool,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            max_iterations: 200,
            initial_lambda: 1e-3,
            lambda_up: 10.0,
            lambda_down: 0.1,
            ftol: 1e-10,
            gtol: 1e-12,
            xtol: 1e-15,
            absolute_weights: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub params: Vec<f64>,
    /// Parameter covariance; `None` when it cannot be estimated (no residual
    /// degrees of freedom with relative weights).
    pub covariance: Option<DMatrix<f64>>,
    /// √(Σ r²) at the returned parameters.
    pub residual_norm: f64,
    pub n_iterations: usize,
    pub converged: bool,
    /// Residual degrees of freedom, m − n.
    pub dof: usize,
    /// Residual norm after each accepted step, starting with the initial guess.
    pub history: Vec<f64>,
}

impl FitResult {
    /// One-sigma parameter uncertainties, when the covariance is known.
    pub fn std_errors(&self) -> Option<Vec<f64>> {
        self.covariance.as_ref().map(|c| {
            (0..c.nrows())
                .map(|i| libm::sqrt(c[(i, i)].max(0.0)))
                .collect()
        })
    }

    /// True when the data determine the parameters exactly (m = n).
    pub fn is_exactly_determined(&self) -> bool {
        self.dof == 0
    }
}

struct Linearization {
    residuals: DVector<f64>,
    jacobian: DMatrix<f64>,
}

fn residuals<M: Model + ?Sized>(model: &M, data: &[DataPoint], p: &[f64]) -> DVector<f64> {
    DVector::from_iterator(
        data.len(),
        data.iter().map(|d| d.weight * (d.y - model.eval(d.x, p))),
    )
}

fn linearize<M: Model + ?Sized>(model: &M, data: &[DataPoint], p: &[f64]) -> Linearization {
    let n = p.len();
    let m = data.len();
    let mut jac = DMatrix::zeros(m, n);
    let mut row = vec![0.0; n];
    let mut work = p.to_vec();
    for (i, d) in data.iter().enumerate() {
        if !model.partials(d.x, p, &mut row) {
            numeric_partials(model, d.x, &mut work, &mut row);
        }
        for j in 0..n {
            jac[(i, j)] = d.weight * row[j];
        }
    }
    Linearization {
        residuals: residuals(model, data, p),
        jacobian: jac,
    }
}

fn numeric_partials<M: Model + ?Sized>(model: &M, x: f64, p: &mut [f64], out: &mut [f64]) {
    // cube root of machine epsilon balances truncation and rounding
    const STEP: f64 = 6.055_454_452_393_343e-6;
    for j in 0..p.len() {
        let orig = p[j];
        let h = STEP * if orig != 0.0 { orig.abs() } else { 1.0 };
        p[j] = orig + h;
        let hi = model.eval(x, p);
        p[j] = orig - h;
        let lo = model.eval(x, p);
        p[j] = orig;
        out[j] = (hi - lo) / (2.0 * h);
    }
}

/// Column scaling 1/√diag(A); zero columns keep scale 1.
fn equilibration(a: &DMatrix<f64>) -> DVector<f64> {
    DVector::from_iterator(
        a.nrows(),
        (0..a.nrows()).map(|j| {
            let d = a[(j, j)];
            if d > 0.0 {
                1.0 / libm::sqrt(d)
            } else {
                1.0
            }
        }),
    )
}

fn scaled(a: &DMatrix<f64>, s: &DVector<f64>) -> DMatrix<f64> {
    let n = a.nrows();
    DMatrix::from_fn(n, n, |i, j| a[(i, j)] * s[i] * s[j])
}

/// Inverse of the symmetric positive-definite normal matrix, computed in the
/// equilibrated basis. `None` when numerically singular.
pub(crate) fn spd_inverse(a: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let s = equilibration(a);
    let sa = scaled(a, &s);
    let inv = sa.clone().cholesky().map(|c| c.inverse()).or_else(|| {
        let lu = sa.lu();
        lu.try_inverse()
    })?;
    // reject near-singular systems whose inverse is dominated by rounding
    let cond_guard = inv.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    if !cond_guard.is_finite() || cond_guard > 1e14 {
        return None;
    }
    let n = a.nrows();
    let out = DMatrix::from_fn(n, n, |i, j| inv[(i, j)] * s[i] * s[j]);
    // symmetrize rounding
    Some((&out + out.transpose()) * 0.5)
}

fn gradient_cosine(jac: &DMatrix<f64>, r: &DVector<f64>) -> f64 {
    let rn = r.norm();
    if rn == 0.0 {
        return 0.0;
    }
    let g = jac.transpose() * r;
    (0..jac.ncols())
        .map(|j| {
            let cn = jac.column(j).norm();
            if cn == 0.0 {
                0.0
            } else {
                (g[j] / (cn * rn)).abs()
            }
        })
        .fold(0.0, f64::max)
}

/// Damped Gauss-Newton fit of `model` to `data` starting from `init`.
pub fn nlls_fit<M: Model + ?Sized>(
    model: &M,
    data: &[DataPoint],
    init: &[f64],
    options: &FitOptions,
) -> Result<FitResult> {
    let n = model.n_params();
    if init.len() != n {
        return Err(Error::invalid(format!(
            "initial guess has {} parameters, model expects {n}",
            init.len()
        )));
    }
    if data.len() < n {
        return Err(Error::invalid(format!(
            "{} data points cannot determine {n} parameters",
            data.len()
        )));
    }
    if init.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("initial guess must be finite"));
    }
    if data
        .iter()
        .any(|d| !(d.x.is_finite() && d.y.is_finite() && d.weight.is_finite()) || d.weight < 0.0)
    {
        return Err(Error::invalid(
            "data must be finite with nonnegative weights",
        ));
    }

    let mut p = init.to_vec();
    let mut lin = linearize(model, data, &p);
    let mut cost = lin.residuals.norm_squared();
    if !cost.is_finite() {
        return Err(Error::FitFailure(
            "model is not finite at the initial guess".into(),
        ));
    }
    for j in 0..n {
        if lin.jacobian.column(j).iter().all(|&v| v == 0.0) {
            return Err(Error::FitFailure(format!(
                "parameter {j} has no influence on the residuals at the initial guess"
            )));
        }
    }

    let mut lambda = options.initial_lambda;
    let mut history = vec![libm::sqrt(cost)];
    // residual floor for an exact fit: rounding level of the weighted data
    let data_scale: f64 = data
        .iter()
        .map(|d| (d.weight * d.y) * (d.weight * d.y))
        .sum::<f64>();
    let exact_floor = 1e-28 * data_scale;
    let mut converged =
        cost <= exact_floor || gradient_cosine(&lin.jacobian, &lin.residuals) <= options.gtol;
    let mut iterations = 0;
    // set when the last accepted step matched its linear prediction, i.e. the
    // problem is locally linear and an undamped step is worth trying
    let mut try_undamped = false;

    while !converged && iterations < options.max_iterations {
        iterations += 1;
        let jt = lin.jacobian.transpose();
        let a = &jt * &lin.jacobian;
        let g = &jt * &lin.residuals;
        let s = equilibration(&a);
        let sa = scaled(&a, &s);
        let sg = g.component_mul(&s);

        let mut accepted = None;
        let mut undamped = try_undamped;
        loop {
            let damping = if undamped { 0.0 } else { lambda };
            if damping > 1e16 {
                break;
            }
            let mut damped = sa.clone();
            for j in 0..n {
                damped[(j, j)] += damping * sa[(j, j)].max(f64::MIN_POSITIVE);
            }
            let step = damped.cholesky().map(|c| c.solve(&sg));
            let candidate = step.and_then(|z| {
                let delta = z.component_mul(&s);
                let trial: Vec<f64> = p.iter().zip(delta.iter()).map(|(a, b)| a + b).collect();
                if trial.iter().any(|v| !v.is_finite()) {
                    return None;
                }
                let trial_cost = residuals(model, data, &trial).norm_squared();
                (trial_cost.is_finite() && trial_cost < cost).then_some((delta, trial, trial_cost))
            });
            match candidate {
                Some(c) => {
                    accepted = Some(c);
                    break;
                }
                None if undamped => undamped = false,
                None => lambda *= options.lambda_up,
            }
        }

        let Some((delta, trial, trial_cost)) = accepted else {
            // No damping produces descent: the cost is at its floating-point floor.
            converged = true;
            break;
        };
        let predicted = 2.0 * delta.dot(&g) - (&a * &delta).dot(&delta);
        let gain = (cost - trial_cost) / predicted;
        try_undamped = predicted > 0.0 && (gain - 1.0).abs() < 1e-3;
        let rel = (cost - trial_cost) / cost;
        let small_step = delta
            .iter()
            .zip(p.iter())
            .all(|(d, x)| d.abs() <= options.xtol * (x.abs() + options.xtol));
        p = trial;
        cost = trial_cost;
        lin = linearize(model, data, &p);
        history.push(libm::sqrt(cost));
        if !undamped {
            lambda = (lambda * options.lambda_down).max(1e-15);
        }
        converged = rel < options.ftol
            || small_step
            || cost <= exact_floor
            || gradient_cosine(&lin.jacobian, &lin.residuals) <= options.gtol;
    }

    let a = lin.jacobian.transpose() * &lin.jacobian;
    let inv = spd_inverse(&a).ok_or_else(|| {
        Error::FitFailure(
            "normal matrix is singular at the solution; parameters are not identifiable".into(),
        )
    })?;
    let dof = data.len() - n;
    let covariance = if options.absolute_weights {
        Some(inv)
    } else if dof > 0 {
        Some(inv * (cost / dof as f64))
    } else {
        None
    };

    Ok(FitResult {
        params: p,
        covariance,
        residual_norm: libm::sqrt(cost),
        n_iterations: iterations,
        converged,
        dof,
        history,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::odmr::DerivLorentzianPeak;
    use approx::assert_relative_eq;

    struct Line;
    impl Model for Line {
        fn n_params(&self) -> usize {
            1
        }
        fn eval(&self, x: f64, p: &[f64]) -> f64 {
            p[0] * x
        }
        fn partials(&self, x: f64, _p: &[f64], out: &mut [f64]) -> bool {
            out[0] = x;
            true
        }
    }

    #[test]
    fn linear_model_in_two_iterations() {
        let data: Vec<_> = (0..10)
            .map(|i| DataPoint::unweighted(i as f64, 2.5 * i as f64))
            .collect();
        let fit = nlls_fit(&Line, &data, &[0.3], &FitOptions::default()).unwrap();
        assert!(fit.converged);
        assert!(fit.n_iterations <= 2, "took {}", fit.n_iterations);
        assert_relative_eq!(fit.params[0], 2.5, max_relative = 1e-12);
    }

    /// Rosenbrock residuals r₀ = 10(p₁ − p₀²), r₁ = 1 − p₀ encoded with x as
    /// the residual index.
    fn rosenbrock() -> (impl Model, Vec<DataPoint>) {
        let m = FnModel::new(2, |x: f64, p: &[f64]| {
            if x == 0.0 {
                -10.0 * (p[1] - p[0] * p[0])
            } else {
                p[0]
            }
        });
        (
            m,
            alloc::vec![
                DataPoint::unweighted(0.0, 0.0),
                DataPoint::unweighted(1.0, 1.0)
            ],
        )
    }

    #[test]
    fn rosenbrock_reaches_known_minimum() {
        let (m, data) = rosenbrock();
        let fit = nlls_fit(&m, &data, &[-1.2, 1.0], &FitOptions::default()).unwrap();
        assert!(fit.converged);
        assert!((fit.params[0] - 1.0).abs() < 1e-8, "{:?}", fit.params);
        assert!((fit.params[1] - 1.0).abs() < 1e-8);
        assert!(fit.residual_norm < 1e-10);
        assert!(fit.is_exactly_determined());
        assert!(fit.covariance.is_none());
    }

    #[test]
    fn residual_norm_never_increases() {
        let (m, data) = rosenbrock();
        let fit = nlls_fit(&m, &data, &[-1.2, 1.0], &FitOptions::default()).unwrap();
        assert!(fit.history.len() > 2);
        for w in fit.history.windows(2) {
            assert!(w[1] <= w[0]);
        }
    }

    struct SinglePeak;
    impl Model for SinglePeak {
        fn n_params(&self) -> usize {
            3
        }
        fn eval(&self, x: f64, p: &[f64]) -> f64 {
            DerivLorentzianPeak::new(p[0], p[1], p[2]).value(x)
        }
        fn partials(&self, x: f64, p: &[f64], out: &mut [f64]) -> bool {
            out.copy_from_slice(&DerivLorentzianPeak::new(p[0], p[1], p[2]).partials(x));
            true
        }
    }

    #[test]
    fn single_peak_round_trip_from_perturbed_start() {
        let truth = [-9.3, 0.48e6, 0.05e6];
        let data: Vec<_> = (0..401)
            .map(|i| {
                let x = -2e6 + 1e4 * i as f64;
                DataPoint::unweighted(x, SinglePeak.eval(x, &truth))
            })
            .collect();
        for signs in [[1.0, 1.0, 1.0], [-1.0, 1.0, -1.0], [1.0, -1.0, 1.0]] {
            let init: Vec<f64> = truth
                .iter()
                .zip(signs)
                .map(|(t, s)| t * (1.0 + 0.2 * s))
                .collect();
            let fit = nlls_fit(&SinglePeak, &data, &init, &FitOptions::default()).unwrap();
            assert!(fit.converged);
            for (p, t) in fit.params.iter().zip(truth) {
                assert_relative_eq!(*p, t, max_relative = 1e-6);
            }
        }
    }

    #[test]
    fn numeric_fallback_matches_analytic() {
        let truth = [-9.3, 0.48e6, 0.05e6];
        let data: Vec<_> = (0..201)
            .map(|i| {
                let x = -1e6 + 1e4 * i as f64;
                DataPoint::unweighted(x, SinglePeak.eval(x, &truth))
            })
            .collect();
        let numeric = FnModel::new(3, |x: f64, p: &[f64]| SinglePeak.eval(x, p));
        let init = [-8.0, 0.5e6, 0.04e6];
        let a = nlls_fit(&SinglePeak, &data, &init, &FitOptions::default()).unwrap();
        let b = nlls_fit(&numeric, &data, &init, &FitOptions::default()).unwrap();
        for (x, y) in a.params.iter().zip(&b.params) {
            assert_relative_eq!(*x, *y, max_relative = 1e-6);
        }
    }

    #[test]
    fn iteration_cap_returns_best_so_far() {
        let (m, data) = rosenbrock();
        let opts = FitOptions {
            max_iterations: 2,
            ..FitOptions::default()
        };
        let fit = nlls_fit(&m, &data, &[-1.2, 1.0], &opts).unwrap();
        assert!(!fit.converged);
        assert!(fit.residual_norm <= fit.history[0]);
    }

    #[test]
    fn unidentifiable_parameter_fails() {
        // p[1] never enters the model
        let m = FnModel::new(2, |x: f64, p: &[f64]| p[0] * x);
        let data: Vec<_> = (0..5)
            .map(|i| DataPoint::unweighted(i as f64, i as f64))
            .collect();
        assert!(matches!(
            nlls_fit(&m, &data, &[1.0, 1.0], &FitOptions::default()),
            Err(Error::FitFailure(_))
        ));
    }

    #[test]
    fn too_few_points() {
        let data = [DataPoint::unweighted(1.0, 1.0)];
        let m = FnModel::new(2, |x: f64, p: &[f64]| p[0] * x + p[1]);
        assert!(matches!(
            nlls_fit(&m, &data, &[1.0, 1.0], &FitOptions::default()),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn deterministic() {
        let (m, data) = rosenbrock();
        let a = nlls_fit(&m, &data, &[-1.2, 1.0], &FitOptions::default()).unwrap();
        let b = nlls_fit(&m, &data, &[-1.2, 1.0], &FitOptions::default()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn covariance_of_straight_line_matches_ols() {
        // y = a + b x with known residuals; OLS covariance σ̂²(XᵀX)⁻¹
        let xs = [0.0, 1.0, 2.0, 3.0, 4.0, 5.0];
        let noise = [0.1, -0.2, 0.05, 0.15, -0.1, 0.0];
        let data: Vec<_> = xs
            .iter()
            .zip(noise)
            .map(|(&x, e)| DataPoint::unweighted(x, 1.0 + 2.0 * x + e))
            .collect();
        let m = FnModel::new(2, |x: f64, p: &[f64]| p[0] + p[1] * x);
        let fit = nlls_fit(&m, &data, &[0.0, 0.0], &FitOptions::default()).unwrap();
        let n = xs.len() as f64;
        let xm = xs.iter().sum::<f64>() / n;
        let sxx: f64 = xs.iter().map(|x| (x - xm) * (x - xm)).sum();
        let s2 = fit.residual_norm * fit.residual_norm / (n - 2.0);
        let var_b = s2 / sxx;
        let cov = fit.covariance.unwrap();
        assert_relative_eq!(cov[(1, 1)], var_b, max_relative = 1e-8);
    }
}
