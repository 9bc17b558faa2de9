//! Polytope bounds from a small labeled sample, one Wilson score interval
//! per constraint row.

use statrs::distribution::{ContinuousCDF, Normal};

use crate::constraints::ConstraintSystem;
use crate::error::{Error, Result};
use crate::model::{PolytopeSpec, RulePredictionMatrix};

/// Labeled points of a pool: `(point index, zero-based class)`.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct LabeledSample {
    pub items: Vec<(usize, usize)>,
}

impl LabeledSample {
    pub fn new(items: Vec<(usize, usize)>) -> Self {
        Self { items }
    }

    /// Every point of a fully labeled pool.
    pub fn full(labels: &[usize]) -> Self {
        Self { items: labels.iter().copied().enumerate().collect() }
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }
}

fn z_quantile(confidence: f64) -> Result<f64> {
    if !(confidence > 0.0 && confidence < 1.0) {
        return Err(Error::invalid(format!("confidence must be in (0, 1), got {confidence}")));
    }
    let normal = Normal::standard();
    Ok(normal.inverse_cdf(0.5 * (1.0 + confidence)))
}

/// Wilson score interval for `successes` out of `trials`, returned as
/// `(center, half_width)` after clipping to `[0, 1]`.
pub fn wilson(successes: usize, trials: usize, confidence: f64) -> Result<(f64, f64)> {
    if trials == 0 {
        return Err(Error::invalid("wilson interval needs at least one trial"));
    }
    if successes > trials {
        return Err(Error::invalid(format!("{successes} successes out of {trials} trials")));
    }
    Ok(wilson_with_z(successes, trials, z_quantile(confidence)?))
}

fn wilson_with_z(successes: usize, trials: usize, z: f64) -> (f64, f64) {
    let v = trials as f64;
    let p = successes as f64 / v;
    let z2 = z * z;
    let denom = 1.0 + z2 / v;
    let center = (p + z2 / (2.0 * v)) / denom;
    let half = z / denom * (p * (1.0 - p) / v + z2 / (4.0 * v * v)).sqrt();
    let lo = (center - half).max(0.0);
    let hi = (center + half).min(1.0);
    (0.5 * (lo + hi), 0.5 * (hi - lo))
}

/// Bounds in the row order of `ConstraintSystem::build(preds)`.
///
/// A rule's trials are the sampled points it votes on; a class's trials are
/// all sampled points. Rules that abstain on the whole sample get the
/// vacuous row `b = 0.5, eps = 0.5`.
pub fn estimate_polytope(
    preds: &RulePredictionMatrix,
    sample: &LabeledSample,
    confidence: f64,
) -> Result<PolytopeSpec> {
    if sample.is_empty() {
        return Err(Error::invalid("labeled sample is empty"));
    }
    let z = z_quantile(confidence)?;
    let k = preds.k();
    for &(i, y) in &sample.items {
        if i >= preds.n() {
            return Err(Error::IndexOutOfRange { what: "point", index: i, limit: preds.n() });
        }
        if y >= k {
            return Err(Error::IndexOutOfRange { what: "class", index: y, limit: k });
        }
    }
    let sys = ConstraintSystem::build(preds)?;
    Ok(rows_from_sample(&sys, preds, sample, z))
}

/// Like [`estimate_polytope`], but the labeled points come from a separate
/// pool voted on by the same rules. Rows follow `ConstraintSystem::build(preds)`.
pub fn estimate_polytope_from_pool(
    preds: &RulePredictionMatrix,
    pool: &RulePredictionMatrix,
    labels: &[usize],
    confidence: f64,
) -> Result<PolytopeSpec> {
    if pool.p() != preds.p() || pool.k() != preds.k() {
        return Err(Error::dim(format!(
            "pool has {} rules and {} classes, predictions have {} and {}",
            pool.p(),
            pool.k(),
            preds.p(),
            preds.k()
        )));
    }
    if labels.len() != pool.n() {
        return Err(Error::dim(format!("{} labels for a pool of {}", labels.len(), pool.n())));
    }
    if let Some(&y) = labels.iter().find(|&&y| y >= pool.k()) {
        return Err(Error::IndexOutOfRange { what: "class", index: y, limit: pool.k() });
    }
    if labels.is_empty() {
        return Err(Error::invalid("labeled sample is empty"));
    }
    let z = z_quantile(confidence)?;
    let sys = ConstraintSystem::build(preds)?;
    Ok(rows_from_sample(&sys, pool, &LabeledSample::full(labels), z))
}

fn rows_from_sample(
    sys: &ConstraintSystem,
    votes: &RulePredictionMatrix,
    sample: &LabeledSample,
    z: f64,
) -> PolytopeSpec {
    let mut b = Vec::with_capacity(sys.m());
    let mut eps = Vec::with_capacity(sys.m());
    for &j in sys.kept_rules() {
        let mut hits = 0;
        let mut trials = 0;
        for &(i, y) in &sample.items {
            if let Some(h) = votes.vote(i, j).class() {
                trials += 1;
                hits += usize::from(h == y);
            }
        }
        let (c, e) = if trials == 0 { (0.5, 0.5) } else { wilson_with_z(hits, trials, z) };
        b.push(c);
        eps.push(e);
    }
    let v = sample.len();
    for l in 0..votes.k() {
        let hits = sample.items.iter().filter(|&&(_, y)| y == l).count();
        let (c, e) = wilson_with_z(hits, v, z);
        b.push(c);
        eps.push(e);
    }
    PolytopeSpec::new(b, eps).expect("wilson rows are finite and inside [0, 1]")
}
