//! The adversarial label model: maximize the concave dual of the minimax
//! game over labelings in the coherent polytope, then read off the
//! maximum-entropy prediction `g(theta)`.

mod dual;
mod gradient;
mod lr;
mod newton;

pub use dual::{dual_gradient, dual_objective, DualGradient};
pub use lr::{lr_form, lr_objective, lr_to_bf, LrForm};

pub(crate) use dual::check_spec;

use crate::constraints::ConstraintMatrix;
use crate::error::{Error, Result};
use crate::metrics::kl_sum;
use crate::model::{PolytopeSpec, SoftLabeling, Weights};

use dual::{box_gradient_norm, SmoothState};

/// Nonnegative multipliers for the upper (`sigma`) and lower (`sigma_prime`)
/// interval constraints.
#[derive(Debug, Clone, PartialEq)]
pub struct DualMultipliers {
    pub sigma: Vec<f64>,
    pub sigma_prime: Vec<f64>,
}

impl DualMultipliers {
    pub fn new(sigma: Vec<f64>, sigma_prime: Vec<f64>) -> Result<Self> {
        let mult = Self { sigma, sigma_prime };
        mult.validate()?;
        Ok(mult)
    }

    pub fn zeros(m: usize) -> Self {
        Self { sigma: vec![0.0; m], sigma_prime: vec![0.0; m] }
    }

    /// The complementary split `sigma' = max(theta, 0)`, `sigma = max(-theta, 0)`.
    pub fn from_theta(theta: &[f64]) -> Self {
        Self {
            sigma: theta.iter().map(|t| (-t).max(0.0)).collect(),
            sigma_prime: theta.iter().map(|t| t.max(0.0)).collect(),
        }
    }

    pub fn theta(&self) -> Vec<f64> {
        self.sigma_prime.iter().zip(&self.sigma).map(|(p, s)| p - s).collect()
    }

    pub(crate) fn validate(&self) -> Result<()> {
        if self.sigma.len() != self.sigma_prime.len() {
            return Err(Error::dim("sigma and sigma' differ in length"));
        }
        if self.sigma.iter().chain(&self.sigma_prime).any(|x| !x.is_finite() || *x < 0.0) {
            return Err(Error::invalid("multipliers must be finite and non-negative"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Method {
    /// Orthant-wise projected Newton in `theta`.
    #[default]
    Newton,
    /// Projected gradient ascent on the `(sigma, sigma')` box with
    /// Barzilai-Borwein steps.
    ProjectedGradient,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverOptions {
    /// Stop once the projected gradient's infinity norm is at most this.
    pub tol: f64,
    pub max_iter: usize,
    /// Give up when `|theta|_inf` exceeds this; `None` means `50 * n`.
    pub weight_cap: Option<f64>,
    pub method: Method,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { tol: 1e-8, max_iter: 50_000, weight_cap: None, method: Method::Newton }
    }
}

impl SolverOptions {
    pub fn with_tol(tol: f64) -> Self {
        Self { tol, ..Self::default() }
    }

    fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return Err(Error::invalid(format!("tolerance must be positive, got {}", self.tol)));
        }
        if self.max_iter == 0 {
            return Err(Error::invalid("max_iter must be at least 1"));
        }
        if let Some(cap) = self.weight_cap {
            if cap.is_nan() || cap <= 0.0 {
                return Err(Error::invalid(format!("weight cap must be positive, got {cap}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BfSolution {
    pub multipliers: DualMultipliers,
    pub theta: Weights,
    pub prediction: SoftLabeling,
    /// Game value, the dual objective at `multipliers`.
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Set when `|theta|_inf` crossed the weight cap, which usually means
    /// the polytope is empty.
    pub diverged: bool,
    /// Projected-gradient infinity norm on the multiplier box.
    pub grad_norm: f64,
}

pub(crate) struct Progress {
    theta: Vec<f64>,
    state: SmoothState,
    iterations: usize,
    converged: bool,
    diverged: bool,
}

impl Progress {
    fn finished(theta: Vec<f64>, state: SmoothState, iterations: usize, converged: bool) -> Self {
        Self { theta, state, iterations, converged, diverged: false }
    }

    fn diverged(theta: Vec<f64>, state: SmoothState, iterations: usize) -> Self {
        Self { theta, state, iterations, converged: false, diverged: true }
    }
}

pub(crate) fn inf_norm(x: &[f64]) -> f64 {
    x.iter().fold(0.0, |acc, v| acc.max(v.abs()))
}

/// Maximizes the dual from `sigma = sigma' = 0`.
///
/// An empty polytope makes the dual unbounded; that case comes back with
/// `converged = false, diverged = true` rather than an error.
pub fn solve(a: &ConstraintMatrix, spec: &PolytopeSpec, opts: &SolverOptions) -> Result<BfSolution> {
    check_spec(a, spec)?;
    opts.validate()?;
    let cap = opts.weight_cap.unwrap_or(50.0 * a.n() as f64);
    let run = match opts.method {
        Method::Newton => newton::run(a, spec, opts.tol, opts.max_iter, cap),
        Method::ProjectedGradient => gradient::run(a, spec, opts.tol, opts.max_iter, cap),
    };
    if run.diverged {
        log::warn!(
            "dual weights exceeded {cap} after {} iterations; the polytope is probably empty",
            run.iterations
        );
    }
    let Progress { theta, state, iterations, converged, diverged } = run;
    let value = state.value(&theta, &spec.eps);
    let grad_norm = box_gradient_norm(&theta, &spec.b, &spec.eps, &state.ag);
    let prediction = SoftLabeling::from_normalized(a.n(), a.k(), state.probs);
    Ok(BfSolution {
        multipliers: DualMultipliers::from_theta(&theta),
        theta: Weights::new(theta)?,
        prediction,
        value,
        iterations,
        converged,
        diverged,
        grad_norm,
    })
}

/// The KL-closest member of the exponential family to `eta`: the solve with
/// bounds pinned at `A eta`.
pub fn best_approximator(
    a: &ConstraintMatrix,
    eta: &SoftLabeling,
    opts: &SolverOptions,
) -> Result<BfSolution> {
    let spec = PolytopeSpec::exact(a.apply(eta)?)?;
    solve(a, &spec, opts)
}

/// `(2 eps.|theta*|, 2 |eps|_inf |theta*|_1)`, the elementwise and the
/// Hölder form of the bound on `d(g*, g_bf)`.
pub fn approx_error_bound(spec: &PolytopeSpec, theta_star: &Weights) -> Result<(f64, f64)> {
    if spec.m() != theta_star.len() {
        return Err(Error::dim(format!(
            "bounds have {} rows, weights have {}",
            spec.m(),
            theta_star.len()
        )));
    }
    let elementwise: f64 =
        spec.eps.iter().zip(theta_star.as_slice()).map(|(e, t)| e * t.abs()).sum();
    Ok((2.0 * elementwise, 2.0 * spec.max_eps() * theta_star.l1_norm()))
}

/// Largest `|eps|_inf` for which the adversarial prediction is guaranteed
/// to be at least as close to `eta` as the Dawid-Skene prediction `g_ds`.
///
/// `+inf` when `theta*` is zero.
pub fn ds_dominance_threshold(
    eta: &SoftLabeling,
    g_ds: &SoftLabeling,
    g_ds_star: &SoftLabeling,
    g_star: &SoftLabeling,
    theta_star: &Weights,
) -> Result<f64> {
    let d_ds = kl_sum(eta, g_ds)?;
    let d_ds_star = kl_sum(eta, g_ds_star)?;
    let d_star = kl_sum(eta, g_star)?;
    let norm = theta_star.l1_norm();
    if norm == 0.0 {
        return Ok(f64::INFINITY);
    }
    let gap = (d_ds_star - d_star) + (d_ds - d_ds_star);
    Ok((gap / (2.0 * norm)).max(0.0))
}
