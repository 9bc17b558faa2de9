//! Label models for weak supervision.
//!
//! Given the votes of several noisy labeling rules, the adversarial model
//! predicts the maximum-entropy labeling consistent with interval bounds on
//! rule accuracies and class frequencies. One-coin Dawid-Skene EM and
//! majority vote are included as baselines, together with the KL
//! decompositions that compare them.
//!
//! ```
//! use wslabel::{solve, ConstraintSystem, PolytopeSpec, RulePredictionMatrix, SolverOptions, Vote};
//!
//! let preds = RulePredictionMatrix::from_rows(
//!     2,
//!     vec![vec![Vote::Class(0), Vote::Class(0)], vec![Vote::Class(1), Vote::Abstain]],
//! )?;
//! let sys = ConstraintSystem::build(&preds)?;
//! let spec = PolytopeSpec::new(vec![0.8, 0.7, 0.5, 0.5], vec![0.05; 4])?;
//! let sol = solve(&sys, &spec, &SolverOptions::default())?;
//! assert!(sol.converged);
//! # Ok::<(), wslabel::Error>(())
//! ```

#![allow(clippy::needless_range_loop)]

pub mod constraints;
pub mod error;
pub mod intervals;
pub mod io;
pub mod metrics;
pub mod model;
pub mod ocds;
pub mod solver;
pub mod synth;

pub use constraints::{constraint_image, exp_family_predict, ConstraintMatrix, ConstraintSystem};
pub use error::{Error, Result};
pub use intervals::{estimate_polytope, estimate_polytope_from_pool, wilson, LabeledSample};
pub use io::{DatasetBundle, Labels, RunReport};
pub use metrics::{
    bf_decompose, ds_decompose, evaluate, kl_mean, kl_sum, ocds_closed_form_gap,
    pattern_distribution, BfDecomposition, DsDecomposition, LossReport, PatternDistribution,
    PatternMass,
};
pub use model::{majority_vote, PolytopeSpec, RulePredictionMatrix, SoftLabeling, Vote, Weights};
pub use ocds::{
    e_step, m_step, params_from_weights, run_em, weights_from_params, EmOptions, EmTrace,
    OcdsParams,
};
pub use solver::{
    approx_error_bound, best_approximator, ds_dominance_threshold, dual_gradient, dual_objective,
    lr_form, lr_objective, lr_to_bf, solve, BfSolution, DualGradient, DualMultipliers, LrForm,
    Method, SolverOptions,
};
pub use synth::{
    appendix_instance, consistency_run, gen_ocds, gen_ocds_with_params, inconsistency_demo,
    AppendixInstance, ConsistencyPoint, InconsistencyReport, SynthConfig, SyntheticDataset,
};
