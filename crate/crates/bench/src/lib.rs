//! Fixtures shared by the benchmarks.

use wslabel::{gen_ocds, ConstraintSystem, PolytopeSpec, SoftLabeling, SynthConfig, SyntheticDataset};

/// A default-shaped synthetic dataset (p = 3, k = 2) with `n` points.
pub fn dataset(n: usize, seed: u64) -> SyntheticDataset {
    gen_ocds(&SynthConfig { n, seed, ..SynthConfig::default() }).expect("valid config")
}

/// Constraint system and bounds pinned at the empirical values of the
/// true labels, the setting of the consistency experiment.
pub fn exact_problem(data: &SyntheticDataset) -> (ConstraintSystem, PolytopeSpec) {
    let sys = ConstraintSystem::build(&data.preds).expect("synthetic rules always vote");
    let truth = SoftLabeling::one_hot(&data.true_labels, data.preds.k()).expect("labels in range");
    let spec = PolytopeSpec::exact(sys.apply(&truth).expect("shapes agree")).expect("finite");
    (sys, spec)
}

/// The same problem with every interval widened by `eps`.
pub fn widened(spec: &PolytopeSpec, eps: f64) -> PolytopeSpec {
    PolytopeSpec::new(spec.b.clone(), vec![eps; spec.m()]).expect("non-negative widths")
}
