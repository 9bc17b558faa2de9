//! Projected gradient ascent on the box `sigma, sigma' >= 0`.
//!
//! Slow on large instances but simple enough to serve as an independent
//! route to the same optimum.

use crate::constraints::ConstraintMatrix;
use crate::model::PolytopeSpec;

use super::dual::SmoothState;
use super::{inf_norm, Progress};

const ARMIJO: f64 = 1e-4;
const SHRINK: f64 = 0.5;
const MAX_HALVINGS: usize = 80;

struct BoxPoint {
    x: Vec<f64>,
    state: SmoothState,
    value: f64,
    grad: Vec<f64>,
}

fn evaluate(a: &ConstraintMatrix, spec: &PolytopeSpec, x: Vec<f64>) -> BoxPoint {
    let m = a.m();
    let (sigma, sigma_prime) = x.split_at(m);
    let theta: Vec<f64> = sigma_prime.iter().zip(sigma).map(|(p, s)| p - s).collect();
    let state = SmoothState::new(a, &spec.b, &theta);
    let penalty: f64 = (0..m).map(|j| (sigma[j] + sigma_prime[j]) * spec.eps[j]).sum();
    let value = state.smooth - penalty;
    let mut grad = vec![0.0; 2 * m];
    for j in 0..m {
        grad[j] = -spec.b[j] - spec.eps[j] + state.ag[j];
        grad[m + j] = spec.b[j] - spec.eps[j] - state.ag[j];
    }
    BoxPoint { x, state, value, grad }
}

fn projected(x: &[f64], grad: &[f64]) -> Vec<f64> {
    x.iter().zip(grad).map(|(&x, &g)| if x > 0.0 { g } else { g.max(0.0) }).collect()
}

pub(super) fn run(
    a: &ConstraintMatrix,
    spec: &PolytopeSpec,
    tol: f64,
    max_iter: usize,
    weight_cap: f64,
) -> Progress {
    let m = a.m();
    let mut cur = evaluate(a, spec, vec![0.0; 2 * m]);
    let mut step = 1.0;
    let mut prev: Option<(Vec<f64>, Vec<f64>)> = None;

    for iter in 0..max_iter {
        if inf_norm(&projected(&cur.x, &cur.grad)) <= tol {
            return finish(cur, m, iter, true);
        }
        // Barzilai-Borwein initial step from the last accepted move
        if let Some((px, pgrad)) = &prev {
            let s: Vec<f64> = cur.x.iter().zip(px).map(|(a, b)| a - b).collect();
            let y: Vec<f64> = cur.grad.iter().zip(pgrad).map(|(a, b)| a - b).collect();
            let ss: f64 = s.iter().map(|v| v * v).sum();
            let sy: f64 = s.iter().zip(&y).map(|(a, b)| a * b).sum();
            step = if sy < 0.0 { (ss / -sy).clamp(1e-10, 1e12) } else { 1.0 };
        }

        let pg_norm = inf_norm(&projected(&cur.x, &cur.grad));
        let magnitude: f64 = (0..m)
            .map(|j| (cur.x[m + j] - cur.x[j]).abs() * spec.b[j].abs() + (cur.x[j] + cur.x[m + j]) * spec.eps[j])
            .sum();
        let slack = 1e-12 * (1.0 + cur.value.abs() + magnitude);
        let mut accepted = None;
        for _ in 0..MAX_HALVINGS {
            let cand: Vec<f64> =
                cur.x.iter().zip(&cur.grad).map(|(x, g)| (x + step * g).max(0.0)).collect();
            let gain: f64 = (0..2 * m).map(|j| cur.grad[j] * (cand[j] - cur.x[j])).sum();
            let next = evaluate(a, spec, cand);
            if next.value.is_finite() {
                if next.value >= cur.value + ARMIJO * gain {
                    accepted = Some(next);
                    break;
                }
                // below roundoff the value cannot rank candidates
                if next.value >= cur.value - slack && inf_norm(&projected(&next.x, &next.grad)) < pg_norm {
                    accepted = Some(next);
                    break;
                }
            }
            step *= SHRINK;
        }
        let Some(next) = accepted else {
            return finish(cur, m, iter, false);
        };
        prev = Some((std::mem::take(&mut cur.x), std::mem::take(&mut cur.grad)));
        cur = next;

        if inf_norm(&cur.x) > weight_cap {
            let theta = theta_of(&cur.x, m);
            return Progress::diverged(theta, cur.state, iter + 1);
        }
    }
    let done = inf_norm(&projected(&cur.x, &cur.grad)) <= tol;
    finish(cur, m, max_iter, done)
}

fn theta_of(x: &[f64], m: usize) -> Vec<f64> {
    (0..m).map(|j| x[m + j] - x[j]).collect()
}

fn finish(cur: BoxPoint, m: usize, iterations: usize, converged: bool) -> Progress {
    Progress::finished(theta_of(&cur.x, m), cur.state, iterations, converged)
}
