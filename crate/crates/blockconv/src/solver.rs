//! Sparse recovery in the slice domain.
//!
//! The lasso objective is posed over the folded slices with reciprocity
//! weights, `1/2 sum_{i_s} w[i_s] ||B_{i_s} x - y_{i_s}||^2 + lambda ||x||_1`,
//! which equals the full-volume objective minus a data-only constant. Its
//! gradient and the proximal iterations (ISTA and FISTA with the standard
//! momentum schedule) therefore coincide step for step with the ones a dense
//! full-volume solver would take, while every operator application runs
//! through the convolutional sweeps. A dense-matrix FISTA over the full
//! volume is kept as a desk-scale reference.

use crate::conv::{conv_adjoint, conv_forward, KernelBank, SliceSet, SliceWeights};
use crate::dense::{dense_adjoint, dense_forward, DenseModel};
use crate::error::{Error, Result};
use crate::scene::ReflectivityMap;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Scalar soft-thresholding `S_theta(v)`: shrinks magnitudes by `theta` and
/// maps the dead zone `|v| <= theta` to an exact `0.0` (ties included), so
/// solver outputs contain genuine zeros rather than denormal residue.
pub fn soft_threshold_scalar(v: f64, theta: f64) -> f64 {
    if v > theta {
        v - theta
    } else if v < -theta {
        v + theta
    } else {
        0.0
    }
}

/// Elementwise soft-thresholding. `theta` must be finite and non-negative.
pub fn soft_threshold(x: &[f64], theta: f64) -> Result<Vec<f64>> {
    if !theta.is_finite() || theta < 0.0 {
        return Err(Error::Contract(format!(
            "soft-threshold level must be finite and non-negative, got {theta}"
        )));
    }
    Ok(x.iter().map(|&v| soft_threshold_scalar(v, theta)).collect())
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Result of the power-iteration bound on the largest eigenvalue of the
/// weighted normal operator `sum_{i_s} w[i_s] B_{i_s}^T B_{i_s}`.
#[derive(Debug, Clone, PartialEq)]
pub struct LipschitzEstimate {
    /// The Rayleigh-quotient estimate (tight from below at convergence).
    pub l: f64,
    /// Iterations actually performed.
    pub iterations: usize,
    /// Whether successive Rayleigh quotients met the relative tolerance.
    pub converged: bool,
    /// Whether the operator annihilated the probe vector (`l` is 0).
    pub zero_operator: bool,
}

/// Estimates the gradient Lipschitz constant of the slice-domain data term by
/// power iteration, using only convolutional applies. The returned value
/// converges to the true constant from below; callers stepping with it should
/// apply a safety margin (`bc_fista` uses 1.05 when no constant is supplied).
pub fn lipschitz_estimate(
    bank: &KernelBank<f64>,
    weights: &SliceWeights,
    max_iters: usize,
    tol: f64,
    seed: u64,
) -> Result<LipschitzEstimate> {
    if max_iters == 0 {
        return Err(Error::Contract("power iteration needs at least one iteration".into()));
    }
    if !tol.is_finite() || tol < 0.0 {
        return Err(Error::Contract(format!("tolerance must be finite and non-negative, got {tol}")));
    }
    let n = bank.n_x * bank.n_z;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let nx = norm2(&x);
    if nx == 0.0 {
        x[0] = 1.0;
    } else {
        x.iter_mut().for_each(|v| *v /= nx);
    }
    let mut lambda_prev = f64::NAN;
    let mut iterations = 0;
    let mut converged = false;
    for _ in 0..max_iters {
        let y = conv_forward(bank, &x)?;
        let mx = conv_adjoint(bank, &y, weights)?;
        let lambda = dot(&x, &mx);
        iterations += 1;
        if !lambda.is_finite() {
            return Err(Error::NonFinite(format!(
                "power iteration produced a non-finite Rayleigh quotient at iteration {iterations}"
            )));
        }
        let nmx = norm2(&mx);
        if nmx == 0.0 {
            return Ok(LipschitzEstimate {
                l: 0.0,
                iterations,
                converged: true,
                zero_operator: true,
            });
        }
        for (xi, &mi) in x.iter_mut().zip(&mx) {
            *xi = mi / nmx;
        }
        if lambda_prev.is_finite() && (lambda - lambda_prev).abs() <= tol * lambda.abs() {
            lambda_prev = lambda;
            converged = true;
            break;
        }
        lambda_prev = lambda;
    }
    Ok(LipschitzEstimate { l: lambda_prev, iterations, converged, zero_operator: false })
}

/// A slice-domain lasso instance: measurements, reciprocity weights, and the
/// l1 penalty, all tied to one kernel bank.
#[derive(Debug, Clone)]
pub struct LassoProblem<'a> {
    /// The forward operator.
    pub bank: &'a KernelBank<f64>,
    /// Folded measurements, one matrix per slice.
    pub y: &'a SliceSet<f64>,
    /// Per-slice multiplicity weights.
    pub weights: SliceWeights,
    /// l1 penalty level (non-negative).
    pub lambda: f64,
}

impl<'a> LassoProblem<'a> {
    /// Checks shapes and the penalty level.
    pub fn validate(&self) -> Result<()> {
        if self.y.n_t != self.bank.n_t || self.y.n_c != self.bank.n_c {
            return Err(Error::Shape(format!(
                "measurements ({} x {} slices) do not match bank (n_t = {}, n_c = {})",
                self.y.n_t, self.y.n_c, self.bank.n_t, self.bank.n_c
            )));
        }
        if self.weights.w.len() != self.bank.n_c {
            return Err(Error::Shape(format!(
                "weights have length {}, expected {}",
                self.weights.w.len(),
                self.bank.n_c
            )));
        }
        if !self.lambda.is_finite() || self.lambda < 0.0 {
            return Err(Error::Contract(format!(
                "penalty must be finite and non-negative, got {}",
                self.lambda
            )));
        }
        Ok(())
    }

    fn check_x(&self, x: &[f64]) -> Result<()> {
        let n = self.bank.n_x * self.bank.n_z;
        if x.len() != n {
            return Err(Error::Shape(format!("iterate has {} entries, expected {n}", x.len())));
        }
        Ok(())
    }

    /// `conv_forward(x) - y`, slice by slice.
    pub fn residual(&self, x: &[f64]) -> Result<SliceSet<f64>> {
        self.check_x(x)?;
        let mut r = conv_forward(self.bank, x)?;
        r.sub_assign(self.y)?;
        Ok(r)
    }

    /// Gradient of the smooth part: weighted adjoint of the residual.
    pub fn gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        let r = self.residual(x)?;
        conv_adjoint(self.bank, &r, &self.weights)
    }

    /// The weighted slice-domain objective
    /// `1/2 sum w[i_s] ||B_{i_s} x - y_{i_s}||^2 + lambda ||x||_1`.
    pub fn objective(&self, x: &[f64]) -> Result<f64> {
        let r = self.residual(x)?;
        let mut quad = 0.0;
        for (i_s, s) in r.slices.iter().enumerate() {
            quad += self.weights.w[i_s] * dot(s, s);
        }
        let l1: f64 = x.iter().map(|v| v.abs()).sum();
        Ok(0.5 * quad + self.lambda * l1)
    }
}

/// The conventional penalty heuristic: `fraction` times the sup-norm of the
/// weighted adjoint of the data (the level above which the lasso solution is
/// identically zero).
pub fn default_lambda(
    bank: &KernelBank<f64>,
    y: &SliceSet<f64>,
    weights: &SliceWeights,
    fraction: f64,
) -> Result<f64> {
    if !fraction.is_finite() || fraction < 0.0 {
        return Err(Error::Contract(format!(
            "penalty fraction must be finite and non-negative, got {fraction}"
        )));
    }
    let aty = conv_adjoint(bank, y, weights)?;
    Ok(fraction * aty.iter().fold(0.0_f64, |m, v| m.max(v.abs())))
}

/// Mutable FISTA state: the proximal iterate `x`, the extrapolated point `z`,
/// the momentum scalar `t`, the iteration counter, and the step constant.
#[derive(Debug, Clone, PartialEq)]
pub struct FistaState {
    /// Current proximal iterate.
    pub x: Vec<f64>,
    /// Extrapolated evaluation point.
    pub z: Vec<f64>,
    /// Momentum scalar (starts at 1).
    pub t: f64,
    /// Completed iterations.
    pub k: usize,
    /// Step constant (reciprocal step size).
    pub l: f64,
}

impl FistaState {
    /// Fresh state at `x0` with step constant `l`.
    pub fn new(x0: Vec<f64>, l: f64) -> Self {
        Self { z: x0.clone(), x: x0, t: 1.0, k: 0, l }
    }
}

fn check_step_constant(l: f64) -> Result<()> {
    if !l.is_finite() || l <= 0.0 {
        return Err(Error::Contract(format!(
            "step constant must be finite and positive, got {l}"
        )));
    }
    Ok(())
}

/// One accelerated proximal-gradient iteration on the slice-domain objective:
/// gradient step at `z`, soft-threshold at `lambda / l`, momentum update
/// `t+ = (1 + sqrt(1 + 4 t^2)) / 2`, extrapolation
/// `z+ = x+ + ((t - 1) / t+)(x+ - x)`.
pub fn bc_fista_step(prob: &LassoProblem<'_>, state: &mut FistaState) -> Result<()> {
    check_step_constant(state.l)?;
    let grad = prob.gradient(&state.z)?;
    let theta = prob.lambda / state.l;
    let mut x_new = Vec::with_capacity(state.x.len());
    for (&zi, &gi) in state.z.iter().zip(&grad) {
        let pre = zi - gi / state.l;
        if !pre.is_finite() {
            return Err(Error::NonFinite(format!(
                "gradient step produced a non-finite value at iteration {}",
                state.k + 1
            )));
        }
        x_new.push(soft_threshold_scalar(pre, theta));
    }
    let t_new = 0.5 * (1.0 + (1.0 + 4.0 * state.t * state.t).sqrt());
    let coeff = (state.t - 1.0) / t_new;
    for ((zi, &xn), &xo) in state.z.iter_mut().zip(&x_new).zip(&state.x) {
        *zi = xn + coeff * (xn - xo);
    }
    state.x = x_new;
    state.t = t_new;
    state.k += 1;
    Ok(())
}

/// A completed solver run: the final iterate, the objective trace (entry 0 is
/// the objective at `x0`, entry `k` after iteration `k`), and the step
/// constant actually used.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverRun {
    /// Final iterate.
    pub x: Vec<f64>,
    /// Objective value per iteration, length `n_iter + 1`.
    pub objective: Vec<f64>,
    /// Step constant used.
    pub l: f64,
}

/// Runs FISTA on the slice-domain lasso. A supplied step constant is used
/// verbatim; otherwise a power-iteration estimate (100 iterations, relative
/// tolerance 1e-6, seed 0) inflated by 1.05 covers the estimate's one-sided
/// bias.
pub fn bc_fista(
    prob: &LassoProblem<'_>,
    x0: &[f64],
    n_iter: usize,
    l: Option<f64>,
) -> Result<SolverRun> {
    prob.validate()?;
    prob.check_x(x0)?;
    let l = match l {
        Some(v) => {
            check_step_constant(v)?;
            v
        }
        None => {
            let est = lipschitz_estimate(prob.bank, &prob.weights, 100, 1e-6, 0)?;
            if est.zero_operator {
                return Err(Error::Contract(
                    "operator is identically zero; no step constant exists".into(),
                ));
            }
            1.05 * est.l
        }
    };
    let mut state = FistaState::new(x0.to_vec(), l);
    let mut objective = Vec::with_capacity(n_iter + 1);
    objective.push(prob.objective(&state.x)?);
    for _ in 0..n_iter {
        bc_fista_step(prob, &mut state)?;
        let obj = prob.objective(&state.x)?;
        if !obj.is_finite() {
            return Err(Error::NonFinite(format!(
                "objective became non-finite at iteration {}",
                state.k
            )));
        }
        objective.push(obj);
    }
    Ok(SolverRun { x: state.x, objective, l })
}

/// Plain (unaccelerated) proximal-gradient iterations with a fixed step
/// constant. Returns every iterate, `x0` first — the reference trajectory the
/// untrained unrolled network must reproduce.
pub fn ista(
    prob: &LassoProblem<'_>,
    x0: &[f64],
    n_iter: usize,
    l: f64,
) -> Result<Vec<Vec<f64>>> {
    prob.validate()?;
    prob.check_x(x0)?;
    check_step_constant(l)?;
    let theta = prob.lambda / l;
    let mut iterates = Vec::with_capacity(n_iter + 1);
    iterates.push(x0.to_vec());
    let mut x = x0.to_vec();
    for k in 0..n_iter {
        let grad = prob.gradient(&x)?;
        for (xi, &gi) in x.iter_mut().zip(&grad) {
            let pre = *xi - gi / l;
            if !pre.is_finite() {
                return Err(Error::NonFinite(format!(
                    "gradient step produced a non-finite value at iteration {}",
                    k + 1
                )));
            }
            *xi = soft_threshold_scalar(pre, theta);
        }
        iterates.push(x.clone());
    }
    Ok(iterates)
}

/// FISTA over the explicit dense matrix and the raw (unfolded) volume:
/// `1/2 ||A x - v||^2 + lambda ||x||_1`. Same stepping rules as `bc_fista`,
/// every product dense. Returns all iterates, `x0` first. Desk-scale
/// reference only.
pub fn naive_fista(
    model: &DenseModel,
    v: &[f64],
    lambda: f64,
    x0: &[f64],
    n_iter: usize,
    l: f64,
) -> Result<Vec<Vec<f64>>> {
    if v.len() != model.rows {
        return Err(Error::Shape(format!(
            "volume has {} entries, model expects {}",
            v.len(),
            model.rows
        )));
    }
    if x0.len() != model.cols {
        return Err(Error::Shape(format!(
            "iterate has {} entries, model expects {}",
            x0.len(),
            model.cols
        )));
    }
    if !lambda.is_finite() || lambda < 0.0 {
        return Err(Error::Contract(format!(
            "penalty must be finite and non-negative, got {lambda}"
        )));
    }
    check_step_constant(l)?;
    let theta = lambda / l;
    let mut iterates = Vec::with_capacity(n_iter + 1);
    iterates.push(x0.to_vec());
    let mut x = x0.to_vec();
    let mut z = x0.to_vec();
    let mut t = 1.0_f64;
    let mut map = ReflectivityMap::zeros(&model.roi);
    for k in 0..n_iter {
        map.data.copy_from_slice(&z);
        let mut az = dense_forward(model, &map)?;
        for (a, &b) in az.iter_mut().zip(v) {
            *a -= b;
        }
        let grad = dense_adjoint(model, &az)?;
        let mut x_new = Vec::with_capacity(x.len());
        for (&zi, &gi) in z.iter().zip(&grad) {
            let pre = zi - gi / l;
            if !pre.is_finite() {
                return Err(Error::NonFinite(format!(
                    "gradient step produced a non-finite value at iteration {}",
                    k + 1
                )));
            }
            x_new.push(soft_threshold_scalar(pre, theta));
        }
        let t_new = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        let coeff = (t - 1.0) / t_new;
        for ((zi, &xn), &xo) in z.iter_mut().zip(&x_new).zip(&x) {
            *zi = xn + coeff * (xn - xo);
        }
        x = x_new;
        t = t_new;
        iterates.push(x.clone());
    }
    Ok(iterates)
}
