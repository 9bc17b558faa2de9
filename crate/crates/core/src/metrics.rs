//! Losses, summed KL divergences and the decompositions of a label model's
//! loss into model and approximation terms.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{RulePredictionMatrix, SoftLabeling, Vote};
use crate::ocds::{log_joint, m_step, OcdsParams};

/// `sum_i KL(mu_i || nu_i)` with `0 log 0 = 0`. A positive `mu` entry over
/// a zero `nu` entry makes the result `+inf`.
pub fn kl_sum(mu: &SoftLabeling, nu: &SoftLabeling) -> Result<f64> {
    mu.check_same_shape(nu)?;
    Ok(mu.as_slice().iter().zip(nu.as_slice()).map(|(&a, &b)| kl_term(a, b)).sum())
}

/// [`kl_sum`] divided by the number of points.
pub fn kl_mean(mu: &SoftLabeling, nu: &SoftLabeling) -> Result<f64> {
    Ok(kl_sum(mu, nu)? / mu.n() as f64)
}

fn kl_term(a: f64, b: f64) -> f64 {
    if a == 0.0 {
        0.0
    } else if b == 0.0 {
        f64::INFINITY
    } else {
        a * (a / b).ln()
    }
}

/// KL divergence between two finite (not necessarily normalized) mass
/// vectors, same conventions as [`kl_sum`].
fn kl_vec(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(&x, &y)| kl_term(x, y)).sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossReport {
    pub avg_log_loss: f64,
    pub avg_zero_one: f64,
    pub avg_brier: f64,
    pub n: usize,
}

/// Average log loss, 0-1 loss and Brier score of `g` against `eta`.
///
/// The 0-1 loss compares `argmax g` to `argmax eta`; both break ties toward
/// the lowest class.
pub fn evaluate(g: &SoftLabeling, eta: &SoftLabeling) -> Result<LossReport> {
    g.check_same_shape(eta)?;
    let n = g.n();
    let mut log_loss = 0.0;
    let mut brier = 0.0;
    for (gr, er) in g.rows().zip(eta.rows()) {
        for (&q, &e) in gr.iter().zip(er) {
            if e > 0.0 {
                log_loss -= e * q.ln();
            }
            brier += (q - e) * (q - e);
        }
    }
    let mismatches = g.argmax().iter().zip(eta.argmax()).filter(|(a, b)| **a != *b).count();
    let inv = 1.0 / n as f64;
    Ok(LossReport {
        avg_log_loss: log_loss * inv,
        avg_zero_one: mismatches as f64 * inv,
        avg_brier: brier * inv,
        n,
    })
}

/// Loss of the adversarial prediction split at the best approximator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BfDecomposition {
    /// `d(eta, g_bf)`
    pub total: f64,
    /// `d(eta, g*)`
    pub model: f64,
    /// `d(g*, g_bf)`
    pub approx: f64,
}

const IDENTITY_TOL: f64 = 1e-6;

/// Fails when `total != model + approx` beyond `1e-6 * max(1, total)`,
/// which means `g_star` is not the best approximator of `eta`.
pub fn bf_decompose(
    eta: &SoftLabeling,
    g_bf: &SoftLabeling,
    g_star: &SoftLabeling,
) -> Result<BfDecomposition> {
    let total = kl_sum(eta, g_bf)?;
    let model = kl_sum(eta, g_star)?;
    let approx = kl_sum(g_star, g_bf)?;
    let ok = if total.is_finite() {
        (total - model - approx).abs() <= IDENTITY_TOL * total.max(1.0)
    } else {
        model.is_infinite() || approx.is_infinite()
    };
    if !ok {
        return Err(Error::Decomposition(format!(
            "total {total} but model {model} + approx {approx} = {}",
            model + approx
        )));
    }
    Ok(BfDecomposition { total, model, approx })
}

/// Loss of a Dawid-Skene prediction telescoped through the prediction at
/// the empirical parameters and the best approximator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DsDecomposition {
    /// `d(eta, g_ds)`
    pub total: f64,
    /// `d(eta, g*)`
    pub model: f64,
    /// `d(eta, g_ds*) - d(eta, g*)`, non-negative when `g*` is exact
    pub approx1: f64,
    /// `d(eta, g_ds) - d(eta, g_ds*)`, either sign
    pub approx2: f64,
}

pub fn ds_decompose(
    eta: &SoftLabeling,
    g_ds: &SoftLabeling,
    g_ds_star: &SoftLabeling,
    g_star: &SoftLabeling,
) -> Result<DsDecomposition> {
    let total = kl_sum(eta, g_ds)?;
    let at_star = kl_sum(eta, g_ds_star)?;
    let model = kl_sum(eta, g_star)?;
    Ok(DsDecomposition { total, model, approx1: at_star - model, approx2: total - at_star })
}

/// Distinct vote patterns of an ensemble, in order of first appearance,
/// with a mass per pattern.
#[derive(Debug, Clone, PartialEq)]
pub struct PatternDistribution {
    pub patterns: Vec<Vec<Vote>>,
    pub mass: Vec<f64>,
    /// Pattern index of every point.
    pub assignment: Vec<usize>,
}

impl PatternDistribution {
    pub fn len(&self) -> usize {
        self.patterns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.patterns.is_empty()
    }

    /// Number of points showing each pattern.
    pub fn counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.len()];
        for &a in &self.assignment {
            counts[a] += 1;
        }
        counts
    }
}

#[derive(Debug, Clone, Copy)]
pub enum PatternMass<'a> {
    /// Pattern frequencies over the points.
    Empirical,
    /// The one-coin normalizer `sum_l w_l prod_j B_j(h_j, l)` of each
    /// pattern.
    Model(&'a OcdsParams),
}

fn group_patterns(preds: &RulePredictionMatrix) -> (Vec<Vec<Vote>>, Vec<usize>) {
    let mut index: HashMap<&[Vote], usize> = HashMap::new();
    let mut patterns = Vec::new();
    let mut assignment = Vec::with_capacity(preds.n());
    for row in preds.rows() {
        let next = patterns.len();
        let id = *index.entry(row).or_insert_with(|| {
            patterns.push(row.to_vec());
            next
        });
        assignment.push(id);
    }
    (patterns, assignment)
}

fn log_normalizers(patterns: &[Vec<Vote>], params: &OcdsParams) -> Result<Vec<f64>> {
    let mut scratch = vec![0.0; params.k()];
    patterns
        .iter()
        .map(|pat| {
            log_joint(params, pat, &mut scratch)?;
            Ok(crate::model::log_sum_exp(&scratch))
        })
        .collect()
}

pub fn pattern_distribution(
    preds: &RulePredictionMatrix,
    source: PatternMass<'_>,
) -> Result<PatternDistribution> {
    let (patterns, assignment) = group_patterns(preds);
    let mass = match source {
        PatternMass::Empirical => {
            let mut mass = vec![0.0; patterns.len()];
            for &a in &assignment {
                mass[a] += 1.0;
            }
            let inv = 1.0 / preds.n() as f64;
            mass.iter_mut().for_each(|x| *x *= inv);
            mass
        }
        PatternMass::Model(params) => {
            if params.p() != preds.p() || params.k() != preds.k() {
                return Err(Error::dim("parameters do not match the predictions"));
            }
            log_normalizers(&patterns, params)?.into_iter().map(f64::exp).collect()
        }
    };
    Ok(PatternDistribution { patterns, mass, assignment })
}

/// `d(eta, g_ds) - d(eta, g_ds*)` in closed form, where `g_ds` is the E step
/// at `params` and `g_ds*` the E step at the empirical parameters
/// `(w*, b*)` of `eta`:
///
/// `n (KL(w*, w) + sum_j (n_j / n) KL(b*_j, b_j) + KL(Z*, Z_ds*) - KL(Z*, Z_ds))`
///
/// with the accuracies compared as Bernoulli distributions and `Z` the
/// per-pattern normalizers.
pub fn ocds_closed_form_gap(
    preds: &RulePredictionMatrix,
    eta: &SoftLabeling,
    params: &OcdsParams,
) -> Result<f64> {
    if params.p() != preds.p() || params.k() != preds.k() {
        return Err(Error::dim("parameters do not match the predictions"));
    }
    if !params.is_interior() {
        return Err(Error::BoundaryParameter("parameters must lie strictly inside (0, 1)".into()));
    }
    let star = m_step(preds, eta)?;
    let n = preds.n() as f64;
    let coverage = preds.coverages();

    let mut total = kl_vec(&star.w, &params.w);
    for j in 0..preds.p() {
        if coverage[j] == 0 {
            continue;
        }
        let (Some(bs), Some(b)) = (star.b[j], params.b[j]) else {
            return Err(Error::invalid(format!("rule {j} votes but has no accuracy")));
        };
        total += coverage[j] as f64 / n * kl_vec(&[bs, 1.0 - bs], &[b, 1.0 - b]);
    }

    let (patterns, assignment) = group_patterns(preds);
    let mut z_emp = vec![0.0; patterns.len()];
    for &a in &assignment {
        z_emp[a] += 1.0 / n;
    }
    let log_z_star = log_normalizers(&patterns, &star)?;
    let log_z = log_normalizers(&patterns, params)?;
    // KL(Z*, Z_ds*) - KL(Z*, Z_ds) = sum_pi Z*_pi (log Z_ds - log Z_ds*)
    let pattern_term: f64 =
        z_emp.iter().zip(log_z.iter().zip(&log_z_star)).map(|(z, (a, b))| z * (a - b)).sum();
    Ok(n * (total + pattern_term))
}
