//! Synthetic one-coin data and a small fixed instance on which EM moves
//! away from the best approximator.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Gamma};
use serde::{Deserialize, Serialize};

use crate::constraints::ConstraintSystem;
use crate::error::{Error, Result};
use crate::metrics::kl_mean;
use crate::model::{PolytopeSpec, RulePredictionMatrix, SoftLabeling, Vote, Weights};
use crate::ocds::{e_step, m_step, OcdsParams};
use crate::solver::{best_approximator, solve, BfSolution, SolverOptions};

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub n: usize,
    pub p: usize,
    pub k: usize,
    pub seed: u64,
    /// Dirichlet concentration for the class frequencies, one per class.
    pub dirichlet_alpha: Vec<f64>,
    /// Beta shape parameters for the rule accuracies.
    pub beta: (f64, f64),
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self { n: 1000, p: 3, k: 2, seed: 0, dirichlet_alpha: vec![1.0, 1.0], beta: (2.0, 4.0 / 3.0) }
    }
}

impl SynthConfig {
    pub fn new(n: usize, p: usize, k: usize, seed: u64) -> Self {
        Self { n, p, k, seed, dirichlet_alpha: vec![1.0; k], ..Self::default() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticDataset {
    pub preds: RulePredictionMatrix,
    /// Zero-based true classes.
    pub true_labels: Vec<usize>,
    /// Posterior of the labels under the generating parameters.
    pub eta: SoftLabeling,
    pub gen_params: OcdsParams,
    pub seed: u64,
}

/// Draws `w ~ Dirichlet(alpha)`, then `b_j ~ Beta(a, b)` for each rule, then
/// every label, then every vote in row-major order, all from one
/// `ChaCha8Rng` seeded with `config.seed`.
pub fn gen_ocds(config: &SynthConfig) -> Result<SyntheticDataset> {
    let SynthConfig { n, p, k, seed, .. } = *config;
    check_shape(n, p, k)?;
    if config.dirichlet_alpha.len() != k {
        return Err(Error::invalid(format!(
            "need {k} Dirichlet parameters, got {}",
            config.dirichlet_alpha.len()
        )));
    }
    let gammas = config
        .dirichlet_alpha
        .iter()
        .map(|&a| Gamma::new(a, 1.0))
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|e| Error::invalid(format!("Dirichlet parameter: {e}")))?;
    let beta = Beta::new(config.beta.0, config.beta.1)
        .map_err(|e| Error::invalid(format!("Beta parameters: {e}")))?;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut w: Vec<f64> = gammas.iter().map(|g| g.sample(&mut rng)).collect();
    let total: f64 = w.iter().sum();
    w.iter_mut().for_each(|x| *x /= total);
    let b: Vec<Option<f64>> = (0..p).map(|_| Some(beta.sample(&mut rng))).collect();
    let params = OcdsParams::new(w, b)?;
    draw_points(&mut rng, n, p, params, seed)
}

/// Same draw order as [`gen_ocds`] with the parameters given instead of
/// sampled.
pub fn gen_ocds_with_params(n: usize, params: OcdsParams, seed: u64) -> Result<SyntheticDataset> {
    let p = params.p();
    check_shape(n, p, params.k())?;
    if params.b.iter().any(Option::is_none) {
        return Err(Error::invalid("every rule needs an accuracy"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    draw_points(&mut rng, n, p, params, seed)
}

fn check_shape(n: usize, p: usize, k: usize) -> Result<()> {
    if n == 0 || p == 0 || k < 2 {
        return Err(Error::invalid(format!("need n >= 1, p >= 1, k >= 2; got n={n}, p={p}, k={k}")));
    }
    Ok(())
}

fn draw_points(
    rng: &mut ChaCha8Rng,
    n: usize,
    p: usize,
    params: OcdsParams,
    seed: u64,
) -> Result<SyntheticDataset> {
    let k = params.k();
    let classes = WeightedIndex::new(&params.w)
        .map_err(|e| Error::invalid(format!("class frequencies: {e}")))?;
    let true_labels: Vec<usize> = (0..n).map(|_| classes.sample(rng)).collect();
    let mut votes = Vec::with_capacity(n * p);
    for &y in &true_labels {
        for acc in params.b.iter().flatten() {
            let class = if rng.random::<f64>() < *acc {
                y
            } else {
                let other = rng.random_range(0..k - 1);
                if other >= y {
                    other + 1
                } else {
                    other
                }
            };
            votes.push(Vote::Class(class as u32));
        }
    }
    let preds = RulePredictionMatrix::new(n, p, k, votes)?;
    let eta = e_step(&preds, &params)?;
    Ok(SyntheticDataset { preds, true_labels, eta, gen_params: params, seed })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConsistencyPoint {
    pub n: usize,
    /// `d(eta, g*) / n` on the prefix.
    pub avg_kl: f64,
    pub iterations: usize,
}

/// For each prefix length, pins the bounds at the empirical accuracies and
/// class frequencies of the true labels on that prefix, solves, and reports
/// the average KL from the generating posterior.
pub fn consistency_run(
    data: &SyntheticDataset,
    prefixes: &[usize],
    opts: &SolverOptions,
) -> Result<Vec<ConsistencyPoint>> {
    prefixes
        .iter()
        .map(|&len| {
            let preds = data.preds.prefix(len)?;
            let eta = data.eta.prefix(len)?;
            let sys = ConstraintSystem::build(&preds)?;
            let truth = SoftLabeling::one_hot(&data.true_labels[..len], preds.k())?;
            let spec = PolytopeSpec::exact(sys.apply(&truth)?)?;
            let sol = solve(&sys, &spec, opts)?;
            if !sol.converged {
                return Err(Error::NotConverged(format!(
                    "prefix {len}: gradient norm {:e} after {} iterations",
                    sol.grad_norm, sol.iterations
                )));
            }
            Ok(ConsistencyPoint { n: len, avg_kl: kl_mean(&eta, &sol.prediction)?, iterations: sol.iterations })
        })
        .collect()
}

/// The 22-point, two-rule binary instance. Patterns are listed as one-based
/// `(rule 1 vote, rule 2 vote)`.
#[derive(Debug, Clone, PartialEq)]
pub struct AppendixInstance {
    pub preds: RulePredictionMatrix,
    pub true_labels: Vec<usize>,
    pub patterns: [(u32, u32); 4],
    pub pattern_counts: [usize; 4],
    /// Points of label 1 and of label 2 within each pattern.
    pub label_counts: [[usize; 2]; 4],
}

/// Points are grouped by pattern in the order (1,1), (2,2), (1,2), (2,1),
/// label-1 points first within each group.
pub fn appendix_instance() -> AppendixInstance {
    let patterns = [(1, 1), (2, 2), (1, 2), (2, 1)];
    let label_counts = [[5, 2], [2, 5], [3, 1], [1, 3]];
    let mut rows = Vec::with_capacity(22);
    let mut true_labels = Vec::with_capacity(22);
    for (&(h1, h2), counts) in patterns.iter().zip(&label_counts) {
        for (label, &count) in counts.iter().enumerate() {
            for _ in 0..count {
                rows.push(vec![Vote::from_code(h1), Vote::from_code(h2)]);
                true_labels.push(label);
            }
        }
    }
    let preds = RulePredictionMatrix::from_rows(2, rows).expect("fixed instance is well formed");
    let pattern_counts = label_counts.map(|[a, b]| a + b);
    AppendixInstance { preds, true_labels, patterns, pattern_counts, label_counts }
}

impl AppendixInstance {
    /// Index of the first point of each pattern group.
    pub fn representatives(&self) -> [usize; 4] {
        let mut reps = [0; 4];
        let mut start = 0;
        for (r, c) in reps.iter_mut().zip(&self.pattern_counts) {
            *r = start;
            start += c;
        }
        reps
    }

    /// Stationary weights written in closed form: both class weights equal
    /// `n`, and the rule weights are `n log sqrt(r_{1,11}/r_{2,11} * r_{1,12}/r_{2,12})`
    /// and `n log sqrt(r_{1,11}/r_{2,11} * r_{2,12}/r_{1,12})`.
    pub fn closed_form_weights(&self) -> Weights {
        let n = self.preds.n() as f64;
        let [same, _, split, _] = self.label_counts;
        let agree = same[0] as f64 / same[1] as f64;
        let lean = split[0] as f64 / split[1] as f64;
        Weights::new(vec![n * (agree * lean).sqrt().ln(), n * (agree / lean).sqrt().ln(), n, n])
            .expect("finite")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatternRow {
    /// One-based votes of rule 1 and rule 2.
    pub pattern: (u32, u32),
    pub count: usize,
    /// Class-1 probability under the best approximator.
    pub g_star: f64,
    /// Class-1 probability after one M step and one E step from `g*`.
    pub g_ds_star: f64,
}

impl PatternRow {
    /// Expected number of label-1 points in the pattern under each
    /// prediction.
    pub fn expected_label1(&self) -> (f64, f64) {
        (self.g_star * self.count as f64, self.g_ds_star * self.count as f64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InconsistencyReport {
    pub rows: Vec<PatternRow>,
    /// Empirical rule accuracies and class frequencies.
    pub b_star: Vec<f64>,
    pub displacement: f64,
    pub moved: bool,
    pub solver_converged: bool,
}

/// Solves the fixed instance with bounds pinned at its empirical values,
/// applies one M step and one E step to the result and measures how far
/// the prediction moves.
pub fn inconsistency_demo(opts: &SolverOptions) -> Result<InconsistencyReport> {
    let inst = appendix_instance();
    let sys = ConstraintSystem::build(&inst.preds)?;
    let truth = SoftLabeling::one_hot(&inst.true_labels, 2)?;
    let sol: BfSolution = best_approximator(&sys, &truth, opts)?;
    let g_star = &sol.prediction;
    let params = m_step(&inst.preds, g_star)?;
    let g_ds_star = e_step(&inst.preds, &params)?;
    let displacement = g_ds_star.max_abs_diff(g_star)?;
    let rows = inst
        .patterns
        .iter()
        .zip(inst.pattern_counts)
        .zip(inst.representatives())
        .map(|((&pattern, count), i)| PatternRow {
            pattern,
            count,
            g_star: g_star.get(i, 0),
            g_ds_star: g_ds_star.get(i, 0),
        })
        .collect();
    Ok(InconsistencyReport {
        rows,
        b_star: sys.apply(&truth)?,
        displacement,
        moved: displacement > 1e-3,
        solver_converged: sol.converged,
    })
}
