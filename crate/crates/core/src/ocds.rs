//! One-coin Dawid-Skene: every rule is a biased coin that reports the true
//! class with probability `b_j` and otherwise a uniformly random other
//! class, independently across rules given the label.

use crate::constraints::ConstraintSystem;
use crate::error::{Error, Result};
use crate::model::{softmax_in_place, RulePredictionMatrix, SoftLabeling, Weights};

/// Class frequencies `w` and rule accuracies `b`. A rule that never votes
/// has no accuracy.
#[derive(Debug, Clone, PartialEq)]
pub struct OcdsParams {
    pub w: Vec<f64>,
    pub b: Vec<Option<f64>>,
}

impl OcdsParams {
    pub fn new(w: Vec<f64>, b: Vec<Option<f64>>) -> Result<Self> {
        if w.len() < 2 {
            return Err(Error::invalid("need at least two class frequencies"));
        }
        if w.iter().any(|x| !(0.0..=1.0).contains(x)) {
            return Err(Error::invalid("class frequencies must lie in [0, 1]"));
        }
        let total: f64 = w.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::invalid(format!("class frequencies sum to {total}")));
        }
        if b.iter().flatten().any(|x| !(0.0..=1.0).contains(x)) {
            return Err(Error::invalid("rule accuracies must lie in [0, 1]"));
        }
        Ok(Self { w, b })
    }

    pub fn k(&self) -> usize {
        self.w.len()
    }

    pub fn p(&self) -> usize {
        self.b.len()
    }

    /// Every frequency and every present accuracy strictly inside `(0, 1)`.
    pub fn is_interior(&self) -> bool {
        self.w.iter().chain(self.b.iter().flatten()).all(|&x| x > 0.0 && x < 1.0)
    }

    fn check_against(&self, preds: &RulePredictionMatrix) -> Result<()> {
        if self.k() != preds.k() || self.p() != preds.p() {
            return Err(Error::dim(format!(
                "parameters for p={}, k={} but predictions have p={}, k={}",
                self.p(),
                self.k(),
                preds.p(),
                preds.k()
            )));
        }
        Ok(())
    }
}

/// Output of one E step.
#[derive(Debug, Clone, PartialEq)]
pub struct Posterior {
    pub prediction: SoftLabeling,
    /// `log sum_l w_l prod_j B_j(h_j(x_i), l)` per point.
    pub log_normalizers: Vec<f64>,
    /// Points whose every class had zero mass; their rows were set uniform.
    pub degenerate: Vec<usize>,
}

impl Posterior {
    /// Observed-data log-likelihood `sum_i log Z_i`.
    pub fn log_likelihood(&self) -> f64 {
        self.log_normalizers.iter().sum()
    }
}

/// Log of the unnormalized class scores `log w_l + sum_j log B_j(h_j, l)`
/// for one vote pattern.
pub(crate) fn log_joint(params: &OcdsParams, votes: &[crate::model::Vote], out: &mut [f64]) -> Result<()> {
    let k = params.k();
    for (l, o) in out.iter_mut().enumerate() {
        *o = params.w[l].ln();
    }
    for (j, v) in votes.iter().enumerate() {
        let Some(h) = v.class() else { continue };
        let Some(b) = params.b[j] else {
            return Err(Error::invalid(format!("rule {j} votes but has no accuracy")));
        };
        let hit = b.ln();
        let miss = ((1.0 - b) / (k - 1) as f64).ln();
        for (l, o) in out.iter_mut().enumerate() {
            *o += if l == h { hit } else { miss };
        }
    }
    Ok(())
}

pub fn posterior(preds: &RulePredictionMatrix, params: &OcdsParams) -> Result<Posterior> {
    params.check_against(preds)?;
    let (n, k) = (preds.n(), preds.k());
    let mut probs = vec![0.0; n * k];
    let mut log_normalizers = Vec::with_capacity(n);
    let mut degenerate = Vec::new();
    for (i, (votes, row)) in preds.rows().zip(probs.chunks_mut(k)).enumerate() {
        log_joint(params, votes, row)?;
        if row.iter().all(|&x| x == f64::NEG_INFINITY) {
            row.fill(1.0 / k as f64);
            log_normalizers.push(f64::NEG_INFINITY);
            degenerate.push(i);
        } else {
            log_normalizers.push(softmax_in_place(row));
        }
    }
    if !degenerate.is_empty() {
        log::warn!(
            "{} point(s) have zero posterior mass under the given parameters; using uniform rows",
            degenerate.len()
        );
    }
    Ok(Posterior { prediction: SoftLabeling::from_normalized(n, k, probs), log_normalizers, degenerate })
}

/// Posterior class probabilities at fixed parameters.
pub fn e_step(preds: &RulePredictionMatrix, params: &OcdsParams) -> Result<SoftLabeling> {
    posterior(preds, params).map(|p| p.prediction)
}

/// Expected accuracies and class frequencies under `g`.
pub fn m_step(preds: &RulePredictionMatrix, g: &SoftLabeling) -> Result<OcdsParams> {
    if g.n() != preds.n() || g.k() != preds.k() {
        return Err(Error::dim(format!(
            "labeling is {}x{}, predictions are {}x{}",
            g.n(),
            g.k(),
            preds.n(),
            preds.k()
        )));
    }
    let (n, p, k) = (preds.n(), preds.p(), preds.k());
    let mut hits = vec![0.0; p];
    let mut counts = vec![0usize; p];
    let mut w = vec![0.0; k];
    for (votes, row) in preds.rows().zip(g.rows()) {
        for (l, q) in row.iter().enumerate() {
            w[l] += q;
        }
        for (j, v) in votes.iter().enumerate() {
            if let Some(h) = v.class() {
                hits[j] += row[h];
                counts[j] += 1;
            }
        }
    }
    w.iter_mut().for_each(|x| *x /= n as f64);
    let b = hits
        .iter()
        .zip(&counts)
        .map(|(&h, &c)| (c > 0).then(|| (h / c as f64).clamp(0.0, 1.0)))
        .collect();
    Ok(OcdsParams { w, b })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmOptions {
    /// Stop when no entry of `g` moves by more than this.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for EmOptions {
    fn default() -> Self {
        Self { tol: 1e-8, max_iter: 1000 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmTrace {
    pub prediction: SoftLabeling,
    pub params: OcdsParams,
    /// Observed-data log-likelihood at the parameters of each M step.
    pub log_likelihood: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

/// Alternates M and E steps from `init` (usually the majority vote).
pub fn run_em(
    preds: &RulePredictionMatrix,
    init: &SoftLabeling,
    opts: &EmOptions,
) -> Result<EmTrace> {
    if opts.tol.is_nan() || opts.tol < 0.0 || opts.max_iter == 0 {
        return Err(Error::invalid("EM needs tol >= 0 and max_iter >= 1"));
    }
    let mut g = init.clone();
    let mut params = m_step(preds, &g)?;
    let mut log_likelihood = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    while iterations < opts.max_iter {
        iterations += 1;
        params = m_step(preds, &g)?;
        let post = posterior(preds, &params)?;
        log_likelihood.push(post.log_likelihood());
        let change = post.prediction.max_abs_diff(&g)?;
        g = post.prediction;
        if change <= opts.tol {
            converged = true;
            break;
        }
    }
    Ok(EmTrace { prediction: g, params, log_likelihood, iterations, converged })
}

/// Exponential-family weights reproducing the E step:
/// `theta_j = n_j log(b_j (k-1) / (1 - b_j))` on rule rows and
/// `n log w_l` on class rows.
pub fn weights_from_params(params: &OcdsParams, sys: &ConstraintSystem) -> Result<Weights> {
    let k = sys.k();
    if params.k() != k || params.p() != sys.original_rules() {
        return Err(Error::dim("parameters do not match the constraint system"));
    }
    let mut theta = Vec::with_capacity(sys.m());
    for (&j, &nj) in sys.kept_rules().iter().zip(sys.coverage()) {
        let b = params.b[j].ok_or_else(|| Error::invalid(format!("rule {j} has no accuracy")))?;
        if !(b > 0.0 && b < 1.0) {
            return Err(Error::BoundaryParameter(format!("accuracy of rule {j} is {b}")));
        }
        theta.push(nj as f64 * (b * (k - 1) as f64 / (1.0 - b)).ln());
    }
    let n = sys.n() as f64;
    for (l, &w) in params.w.iter().enumerate() {
        if !(w > 0.0 && w < 1.0) {
            return Err(Error::BoundaryParameter(format!("frequency of class {l} is {w}")));
        }
        theta.push(n * w.ln());
    }
    Weights::new(theta)
}

/// Inverse of [`weights_from_params`]; the class frequencies are the
/// softmax of the class weights over `n`.
pub fn params_from_weights(w: &Weights, sys: &ConstraintSystem) -> Result<OcdsParams> {
    sys.check_weights(w.as_slice())?;
    let k = sys.k();
    let theta = w.as_slice();
    let mut b = vec![None; sys.original_rules()];
    for (r, (&j, &nj)) in sys.kept_rules().iter().zip(sys.coverage()).enumerate() {
        b[j] = Some(1.0 / (1.0 + (k - 1) as f64 * (-theta[r] / nj as f64).exp()));
    }
    let n = sys.n() as f64;
    let mut freq: Vec<f64> = (0..k).map(|l| theta[sys.class_row(l)] / n).collect();
    softmax_in_place(&mut freq);
    Ok(OcdsParams { w: freq, b })
}
