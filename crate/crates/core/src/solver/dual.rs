use crate::constraints::ConstraintMatrix;
use crate::error::{Error, Result};
use crate::model::{softmax_in_place, PolytopeSpec};

use super::DualMultipliers;

/// Partial derivatives of the dual objective.
#[derive(Debug, Clone, PartialEq)]
pub struct DualGradient {
    pub sigma: Vec<f64>,
    pub sigma_prime: Vec<f64>,
}

/// The game value at `(sigma, sigma')`:
/// `theta.b - (sigma' + sigma).eps - sum_i logsumexp(A_i^T theta)` with
/// `theta = sigma' - sigma`.
pub fn dual_objective(
    a: &ConstraintMatrix,
    spec: &PolytopeSpec,
    mult: &DualMultipliers,
) -> Result<f64> {
    check(a, spec, mult)?;
    let theta = mult.theta();
    let state = SmoothState::new(a, &spec.b, &theta);
    let penalty: f64 = mult
        .sigma
        .iter()
        .zip(&mult.sigma_prime)
        .zip(&spec.eps)
        .map(|((s, sp), e)| (s + sp) * e)
        .sum();
    Ok(state.smooth - penalty)
}

pub fn dual_gradient(
    a: &ConstraintMatrix,
    spec: &PolytopeSpec,
    mult: &DualMultipliers,
) -> Result<DualGradient> {
    check(a, spec, mult)?;
    let theta = mult.theta();
    let state = SmoothState::new(a, &spec.b, &theta);
    let sigma_prime = (0..a.m()).map(|j| spec.b[j] - spec.eps[j] - state.ag[j]).collect();
    let sigma = (0..a.m()).map(|j| -spec.b[j] - spec.eps[j] + state.ag[j]).collect();
    Ok(DualGradient { sigma, sigma_prime })
}

fn check(a: &ConstraintMatrix, spec: &PolytopeSpec, mult: &DualMultipliers) -> Result<()> {
    check_spec(a, spec)?;
    if mult.sigma.len() != a.m() || mult.sigma_prime.len() != a.m() {
        return Err(Error::dim(format!(
            "multipliers have lengths {} and {}, expected {}",
            mult.sigma.len(),
            mult.sigma_prime.len(),
            a.m()
        )));
    }
    mult.validate()
}

pub(crate) fn check_spec(a: &ConstraintMatrix, spec: &PolytopeSpec) -> Result<()> {
    if spec.b.len() != a.m() || spec.eps.len() != a.m() {
        return Err(Error::dim(format!(
            "bounds have lengths {} and {}, matrix has {} rows",
            spec.b.len(),
            spec.eps.len(),
            a.m()
        )));
    }
    if spec.b.iter().chain(&spec.eps).any(|x| !x.is_finite()) {
        return Err(Error::invalid("bounds must be finite"));
    }
    if spec.eps.iter().any(|&e| e < 0.0) {
        return Err(Error::invalid("half-widths must be non-negative"));
    }
    Ok(())
}

/// Everything the solvers need at one `theta`: the smooth part
/// `theta.b - sum_i lse_i`, the prediction and its image `A g`.
#[derive(Debug, Clone)]
pub(crate) struct SmoothState {
    pub smooth: f64,
    pub probs: Vec<f64>,
    pub ag: Vec<f64>,
}

impl SmoothState {
    pub fn new(a: &ConstraintMatrix, b: &[f64], theta: &[f64]) -> Self {
        let k = a.k();
        let mut probs = vec![0.0; a.n() * k];
        let mut lse_total = 0.0;
        for (i, row) in probs.chunks_mut(k).enumerate() {
            a.point_scores(theta, i, row);
            lse_total += softmax_in_place(row);
        }
        let ag = a.apply_slice(&probs);
        let linear: f64 = theta.iter().zip(b).map(|(t, b)| t * b).sum();
        Self { smooth: linear - lse_total, probs, ag }
    }

    /// Objective in the complementary parameterization,
    /// `smooth - eps.|theta|`.
    pub fn value(&self, theta: &[f64], eps: &[f64]) -> f64 {
        self.smooth - theta.iter().zip(eps).map(|(t, e)| t.abs() * e).sum::<f64>()
    }
}

/// Minimum-norm element of the negated subdifferential of `-f` at `theta`,
/// where `f(theta) = b.theta - eps.|theta| - L(theta)`. Zero exactly at a
/// maximizer.
pub(crate) fn pseudo_gradient(theta: &[f64], b: &[f64], eps: &[f64], ag: &[f64]) -> Vec<f64> {
    theta
        .iter()
        .enumerate()
        .map(|(j, &t)| {
            let g = b[j] - ag[j];
            if t > 0.0 {
                g - eps[j]
            } else if t < 0.0 {
                g + eps[j]
            } else if g > eps[j] {
                g - eps[j]
            } else if g < -eps[j] {
                g + eps[j]
            } else {
                0.0
            }
        })
        .collect()
}

/// Projected-gradient norm in the `(sigma, sigma')` box for the
/// complementary split of `theta`.
pub(crate) fn box_gradient_norm(theta: &[f64], b: &[f64], eps: &[f64], ag: &[f64]) -> f64 {
    let mut norm: f64 = 0.0;
    for (j, &t) in theta.iter().enumerate() {
        let d_prime = b[j] - eps[j] - ag[j];
        let d_sigma = -b[j] - eps[j] + ag[j];
        let gp = if t > 0.0 { d_prime } else { d_prime.max(0.0) };
        let gs = if t < 0.0 { d_sigma } else { d_sigma.max(0.0) };
        norm = norm.max(gp.abs()).max(gs.abs());
    }
    norm
}

/// Dense Hessian of `L(theta) = sum_i lse(A_i^T theta)`.
pub(crate) fn hessian(a: &ConstraintMatrix, probs: &[f64]) -> Vec<f64> {
    let (m, k) = (a.m(), a.k());
    let mut h = vec![0.0; m * m];
    let mut weighted = Vec::new();
    for i in 0..a.n() {
        let g = &probs[i * k..(i + 1) * k];
        let entries = a.point_entries(i);
        // (U g)_r collapsed per entry; rows may repeat, which the
        // accumulation below handles.
        weighted.clear();
        weighted.extend(entries.iter().map(|e| e.value * g[e.class]));
        for (x, e) in entries.iter().enumerate() {
            for (y, f) in entries.iter().enumerate() {
                let mut v = -weighted[x] * weighted[y];
                if e.class == f.class {
                    v += e.value * f.value * g[e.class];
                }
                h[e.row * m + f.row] += v;
            }
        }
    }
    h
}
