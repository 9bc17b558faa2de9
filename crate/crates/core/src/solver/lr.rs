//! The logistic-regression reading of the adversarial label model, and the
//! reverse map from an L1-regularized multinomial regression to a
//! constraint system.

use crate::constraints::ConstraintMatrix;
use crate::error::{Error, Result};
use crate::model::{softmax_in_place, PolytopeSpec, SoftLabeling, Weights};

use super::check_spec;

/// Point `i` as a linear softmax classifier input.
#[derive(Debug, Clone, PartialEq)]
pub struct LrForm {
    /// The `m x k` block of `A` belonging to point `i`, flattened row-major.
    pub features: Vec<f64>,
    /// `(theta_1 I_k, ..., theta_m I_k)`, `k` rows of length `m k`.
    pub weights: Vec<Vec<f64>>,
    /// `weights * features`.
    pub scores: Vec<f64>,
}

pub fn lr_form(a: &ConstraintMatrix, w: &Weights, i: usize) -> Result<LrForm> {
    a.check_weights(w.as_slice())?;
    if i >= a.n() {
        return Err(Error::IndexOutOfRange { what: "point", index: i, limit: a.n() });
    }
    let (m, k) = (a.m(), a.k());
    let mut features = vec![0.0; m * k];
    for e in a.point_entries(i) {
        features[e.row * k + e.class] += e.value;
    }
    let weights: Vec<Vec<f64>> = (0..k)
        .map(|l| {
            let mut row = vec![0.0; m * k];
            for (r, &t) in w.as_slice().iter().enumerate() {
                row[r * k + l] = t;
            }
            row
        })
        .collect();
    let scores = weights
        .iter()
        .map(|row| row.iter().zip(&features).map(|(t, x)| t * x).sum())
        .collect();
    Ok(LrForm { features, weights, scores })
}

/// Cross-entropy of `g(theta)` against `eta` plus the interval penalty
/// `sigma'.(b* - (b - eps)) + sigma.(b + eps - b*)`, with `b* = A eta` and
/// `sigma', sigma` the positive and negative parts of `theta`.
pub fn lr_objective(
    a: &ConstraintMatrix,
    eta: &SoftLabeling,
    spec: &PolytopeSpec,
    w: &Weights,
) -> Result<f64> {
    check_spec(a, spec)?;
    a.check_weights(w.as_slice())?;
    let b_star = a.apply(eta)?;
    let k = a.k();
    let mut scores = vec![0.0; k];
    let mut cross_entropy = 0.0;
    for i in 0..a.n() {
        a.point_scores(w.as_slice(), i, &mut scores);
        softmax_in_place(&mut scores);
        for (l, &q) in eta.row(i).iter().enumerate() {
            if q > 0.0 {
                cross_entropy -= q * scores[l].ln();
            }
        }
    }
    let mut penalty = 0.0;
    for (j, &t) in w.as_slice().iter().enumerate() {
        let (pos, neg) = (t.max(0.0), (-t).max(0.0));
        penalty += pos * (b_star[j] - (spec.b[j] - spec.eps[j]));
        penalty += neg * (spec.b[j] + spec.eps[j] - b_star[j]);
    }
    Ok(cross_entropy + penalty)
}

/// Builds the constraint system whose solution is the L1-regularized
/// (strength `c`) multinomial regression of `eta` on `features`.
///
/// Row `c_idx * k + l` carries feature `c_idx` on class `l`; its target is
/// `sum_i x_{i, c_idx} eta_{i l}` with half-width `c`. Targets need not lie
/// in `[0, 1]`.
pub fn lr_to_bf(
    features: &[Vec<f64>],
    eta: &SoftLabeling,
    c: f64,
) -> Result<(ConstraintMatrix, PolytopeSpec)> {
    let n = features.len();
    if n != eta.n() {
        return Err(Error::dim(format!("{n} feature rows but {} labels", eta.n())));
    }
    let d = features.first().map_or(0, Vec::len);
    if d == 0 {
        return Err(Error::invalid("need at least one feature"));
    }
    if features.iter().any(|x| x.len() != d) {
        return Err(Error::dim("ragged feature rows"));
    }
    if !(c >= 0.0 && c.is_finite()) {
        return Err(Error::invalid(format!("regularization must be non-negative, got {c}")));
    }
    let k = eta.k();
    let mut rows = Vec::with_capacity(d * k);
    let mut b = Vec::with_capacity(d * k);
    for feat in 0..d {
        for l in 0..k {
            rows.push((0..n).map(|i| (i * k + l, features[i][feat])).collect());
            b.push((0..n).map(|i| features[i][feat] * eta.get(i, l)).sum());
        }
    }
    let matrix = ConstraintMatrix::from_rows(n, k, rows)?;
    let spec = PolytopeSpec::new(b, vec![c; d * k])?;
    Ok((matrix, spec))
}
