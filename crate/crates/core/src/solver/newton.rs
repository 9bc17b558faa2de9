//! Orthant-wise projected Newton ascent on the complementary
//! parameterization `f(theta) = b.theta - eps.|theta| - L(theta)`.
//!
//! Within an orthant `f` is smooth, so each step solves a damped Newton
//! system on the free coordinates and searches along the direction with
//! coordinates projected back onto the orthant they started in.

use nalgebra::{DMatrix, DVector};

use crate::constraints::ConstraintMatrix;
use crate::model::PolytopeSpec;

use super::dual::{hessian, pseudo_gradient, SmoothState};
use super::{inf_norm, Progress};

const ARMIJO: f64 = 1e-4;
const SHRINK: f64 = 0.5;
const MAX_HALVINGS: usize = 60;
const DAMPING: f64 = 1e-10;

pub(super) fn run(
    a: &ConstraintMatrix,
    spec: &PolytopeSpec,
    tol: f64,
    max_iter: usize,
    weight_cap: f64,
) -> Progress {
    let m = a.m();
    let (b, eps) = (&spec.b[..], &spec.eps[..]);
    let mut theta = vec![0.0; m];
    let mut state = SmoothState::new(a, b, &theta);
    let mut value = state.value(&theta, eps);
    let mut pg = pseudo_gradient(&theta, b, eps, &state.ag);

    for iter in 0..max_iter {
        let pg_norm = inf_norm(&pg);
        if pg_norm <= tol {
            return Progress::finished(theta, state, iter, true);
        }

        let free: Vec<usize> = (0..m).filter(|&j| theta[j] != 0.0 || pg[j] != 0.0).collect();
        let h = hessian(a, &state.probs);
        let mut dir = newton_direction(&h, m, &free, &pg, pg_norm);
        for &j in &free {
            // a coordinate leaving zero has to move the way its
            // pseudo-gradient points
            if theta[j] == 0.0 && eps[j] > 0.0 && dir[j] * pg[j] <= 0.0 {
                dir[j] = 0.0;
            }
        }
        let slope: f64 = dir.iter().zip(&pg).map(|(d, g)| d * g).sum();
        if !(slope > 0.0 && slope.is_finite()) {
            dir = scaled_gradient(&h, m, &pg);
        }

        let search = Search { a, b, eps, theta: &theta, pg: &pg, value, pg_norm };
        let accepted = search.run(&dir).or_else(|| search.run(&scaled_gradient(&h, m, &pg)));
        let Some((cand, cand_state, cand_value)) = accepted else {
            log::debug!("line search stalled at iteration {iter}, pseudo-gradient {pg_norm:e}");
            return Progress::finished(theta, state, iter, false);
        };
        theta = cand;
        state = cand_state;
        value = cand_value;
        pg = pseudo_gradient(&theta, b, eps, &state.ag);

        if inf_norm(&theta) > weight_cap {
            return Progress::diverged(theta, state, iter + 1);
        }
    }
    let converged = inf_norm(&pg) <= tol;
    Progress::finished(theta, state, max_iter, converged)
}

struct Search<'s> {
    a: &'s ConstraintMatrix,
    b: &'s [f64],
    eps: &'s [f64],
    theta: &'s [f64],
    pg: &'s [f64],
    value: f64,
    pg_norm: f64,
}

impl Search<'_> {
    /// Backtracking along `dir` with every coordinate kept in the orthant
    /// it starts in.
    fn run(&self, dir: &[f64]) -> Option<(Vec<f64>, SmoothState, f64)> {
        let Self { a, b, eps, theta, pg, value, pg_norm } = *self;
        let m = theta.len();
        let orthant: Vec<f64> = (0..m)
            .map(|j| if theta[j] != 0.0 { theta[j].signum() } else { pg[j].signum() })
            .collect();
        // roundoff in f grows with the size of the terms summed into it
        let magnitude: f64 = (0..m).map(|j| theta[j].abs() * (b[j].abs() + eps[j])).sum();
        let slack = 1e-12 * (1.0 + value.abs() + magnitude);
        let mut step = 1.0;
        for _ in 0..MAX_HALVINGS {
            let cand: Vec<f64> = (0..m)
                .map(|j| {
                    let t = theta[j] + step * dir[j];
                    if eps[j] > 0.0 && t * orthant[j] < 0.0 {
                        0.0
                    } else {
                        t
                    }
                })
                .collect();
            let cand_state = SmoothState::new(a, b, &cand);
            let cand_value = cand_state.value(&cand, eps);
            let gain: f64 = (0..m).map(|j| pg[j] * (cand[j] - theta[j])).sum();
            if cand_value.is_finite() {
                if cand_value >= value + ARMIJO * gain {
                    return Some((cand, cand_state, cand_value));
                }
                if cand_value >= value - slack {
                    let cand_pg = pseudo_gradient(&cand, b, eps, &cand_state.ag);
                    if inf_norm(&cand_pg) < pg_norm {
                        return Some((cand, cand_state, cand_value));
                    }
                }
            }
            step *= SHRINK;
        }
        None
    }
}

/// Damped Newton step restricted to `free`; zero elsewhere.
///
/// The diagonal gets `max_diag * min(1, |pg|_inf)`, at least
/// `DAMPING * max_diag`, and grows 100-fold on each failed factorization.
fn newton_direction(h: &[f64], m: usize, free: &[usize], pg: &[f64], pg_norm: f64) -> Vec<f64> {
    let mut dir = vec![0.0; m];
    if free.is_empty() {
        return dir;
    }
    let f = free.len();
    let max_diag = free.iter().map(|&j| h[j * m + j]).fold(0.0, f64::max);
    let mut damping = (max_diag * pg_norm.min(1.0)).max(DAMPING * max_diag).max(1e-14);
    let rhs = DVector::from_iterator(f, free.iter().map(|&j| pg[j]));
    for _ in 0..12 {
        let sub = DMatrix::from_fn(f, f, |r, c| {
            let v = h[free[r] * m + free[c]];
            if r == c {
                v + damping
            } else {
                v
            }
        });
        if let Some(chol) = sub.cholesky() {
            let sol = chol.solve(&rhs);
            if sol.iter().all(|x| x.is_finite()) {
                for (x, &j) in free.iter().enumerate() {
                    dir[j] = sol[x];
                }
                return dir;
            }
        }
        damping *= 100.0;
    }
    scaled_gradient(h, m, pg)
}

/// Gradient step preconditioned by the Hessian diagonal.
fn scaled_gradient(h: &[f64], m: usize, pg: &[f64]) -> Vec<f64> {
    let max_diag = (0..m).map(|j| h[j * m + j]).fold(0.0, f64::max);
    let floor = (DAMPING * max_diag).max(1e-14);
    (0..m).map(|j| pg[j] / (h[j * m + j] + floor)).collect()
}
