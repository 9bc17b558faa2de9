//! The sparse constraint matrix `A` (m rows, n*k columns) and the
//! exponential family `g(theta) = softmax(A^T theta)` it induces.
//!
//! Column `i * k + l` of `A` belongs to point `i`, class `l`. The matrix is
//! kept both row-wise (for `A z`) and grouped by point (for scores and
//! per-point curvature).

use crate::error::{Error, Result};
use crate::model::{softmax_in_place, RulePredictionMatrix, SoftLabeling, Weights};

/// One nonzero of `A` seen from the point it touches.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointEntry {
    pub row: usize,
    pub class: usize,
    pub value: f64,
}

/// A general sparse constraint matrix over `n` points and `k` classes.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintMatrix {
    n: usize,
    k: usize,
    rows: Vec<Vec<(usize, f64)>>,
    by_point: Vec<Vec<PointEntry>>,
}

impl ConstraintMatrix {
    /// Builds from per-row `(column, value)` lists. Duplicate columns within
    /// a row are summed; explicit zeros are dropped.
    pub fn from_rows(n: usize, k: usize, rows: Vec<Vec<(usize, f64)>>) -> Result<Self> {
        if n == 0 || k == 0 {
            return Err(Error::invalid("constraint matrix needs n >= 1 and k >= 1"));
        }
        let ncols = n * k;
        let mut clean = Vec::with_capacity(rows.len());
        for (j, mut row) in rows.into_iter().enumerate() {
            if let Some(&(col, _)) = row.iter().find(|(c, _)| *c >= ncols) {
                return Err(Error::IndexOutOfRange { what: "column", index: col, limit: ncols });
            }
            if row.iter().any(|(_, v)| !v.is_finite()) {
                return Err(Error::invalid(format!("row {j} has a non-finite entry")));
            }
            row.sort_by_key(|&(c, _)| c);
            let mut merged: Vec<(usize, f64)> = Vec::with_capacity(row.len());
            for (c, v) in row {
                match merged.last_mut() {
                    Some((lc, lv)) if *lc == c => *lv += v,
                    _ => merged.push((c, v)),
                }
            }
            merged.retain(|&(_, v)| v != 0.0);
            clean.push(merged);
        }
        let mut by_point = vec![Vec::new(); n];
        for (j, row) in clean.iter().enumerate() {
            for &(col, value) in row {
                by_point[col / k].push(PointEntry { row: j, class: col % k, value });
            }
        }
        Ok(Self { n, k, rows: clean, by_point })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn m(&self) -> usize {
        self.rows.len()
    }

    pub fn row(&self, j: usize) -> &[(usize, f64)] {
        &self.rows[j]
    }

    pub fn point_entries(&self, i: usize) -> &[PointEntry] {
        &self.by_point[i]
    }

    pub fn nnz(&self) -> usize {
        self.rows.iter().map(Vec::len).sum()
    }

    /// Class scores `(A_i^T theta)_l` of point `i`, written into `out`.
    pub fn point_scores(&self, theta: &[f64], i: usize, out: &mut [f64]) {
        out.fill(0.0);
        for e in &self.by_point[i] {
            out[e.class] += theta[e.row] * e.value;
        }
    }

    /// `A^T theta` as a row-major `n x k` grid.
    pub fn scores(&self, theta: &[f64]) -> Result<Vec<f64>> {
        self.check_weights(theta)?;
        let k = self.k;
        let mut out = vec![0.0; self.n * k];
        for (i, chunk) in out.chunks_mut(k).enumerate() {
            self.point_scores(theta, i, chunk);
        }
        Ok(out)
    }

    /// `A z` for a row-major `n x k` slice.
    pub fn apply_slice(&self, z: &[f64]) -> Vec<f64> {
        debug_assert_eq!(z.len(), self.n * self.k);
        self.rows
            .iter()
            .map(|row| row.iter().map(|&(c, v)| v * z[c]).sum())
            .collect()
    }

    /// `A z`.
    pub fn apply(&self, z: &SoftLabeling) -> Result<Vec<f64>> {
        if z.n() != self.n || z.k() != self.k {
            return Err(Error::dim(format!(
                "labeling is {}x{}, matrix expects {}x{}",
                z.n(),
                z.k(),
                self.n,
                self.k
            )));
        }
        Ok(self.apply_slice(z.as_slice()))
    }

    /// The exponential-family member `g(theta)`, row-wise softmax of the
    /// scores with max subtraction.
    pub fn predict(&self, w: &Weights) -> Result<SoftLabeling> {
        let mut probs = self.scores(w.as_slice())?;
        for row in probs.chunks_mut(self.k) {
            softmax_in_place(row);
        }
        Ok(SoftLabeling::from_normalized(self.n, self.k, probs))
    }

    /// Dense copy, one `Vec` per row. Only sensible for small test instances.
    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        self.rows
            .iter()
            .map(|row| {
                let mut dense = vec![0.0; self.n * self.k];
                for &(c, v) in row {
                    dense[c] = v;
                }
                dense
            })
            .collect()
    }

    pub(crate) fn check_weights(&self, theta: &[f64]) -> Result<()> {
        if theta.len() != self.m() {
            return Err(Error::dim(format!(
                "expected {} weights, got {}",
                self.m(),
                theta.len()
            )));
        }
        Ok(())
    }
}

/// The rule-accuracy and class-frequency constraints of a prediction matrix.
///
/// Rows `0..rules()` are the rules that vote at least once, each scaled by
/// `1 / n_j`; rows `rules()..rules() + k` repeat the class basis vectors
/// scaled by `1 / n`. Rules that abstain everywhere are dropped;
/// [`ConstraintSystem::kept_rules`] maps row index to original rule index.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintSystem {
    matrix: ConstraintMatrix,
    p_total: usize,
    kept_rules: Vec<usize>,
    coverage: Vec<usize>,
}

impl ConstraintSystem {
    pub fn build(preds: &RulePredictionMatrix) -> Result<Self> {
        let (n, p, k) = (preds.n(), preds.p(), preds.k());
        let all_coverage = preds.coverages();
        let kept_rules: Vec<usize> = (0..p).filter(|&j| all_coverage[j] > 0).collect();
        if kept_rules.is_empty() {
            return Err(Error::NoInformativeRules);
        }
        let coverage: Vec<usize> = kept_rules.iter().map(|&j| all_coverage[j]).collect();

        let mut rows: Vec<Vec<(usize, f64)>> = kept_rules
            .iter()
            .zip(&coverage)
            .map(|(_, &nj)| Vec::with_capacity(nj))
            .collect();
        for (i, votes) in preds.rows().enumerate() {
            for (r, &j) in kept_rules.iter().enumerate() {
                if let Some(c) = votes[j].class() {
                    rows[r].push((i * k + c, 1.0 / coverage[r] as f64));
                }
            }
        }
        let inv_n = 1.0 / n as f64;
        for l in 0..k {
            rows.push((0..n).map(|i| (i * k + l, inv_n)).collect());
        }
        let matrix = ConstraintMatrix::from_rows(n, k, rows)?;
        Ok(Self { matrix, p_total: p, kept_rules, coverage })
    }

    pub fn matrix(&self) -> &ConstraintMatrix {
        &self.matrix
    }

    /// Number of rule rows; `m() == rules() + k()`.
    pub fn rules(&self) -> usize {
        self.kept_rules.len()
    }

    /// Rule count of the prediction matrix this system was built from.
    pub fn original_rules(&self) -> usize {
        self.p_total
    }

    /// Original rule index of each rule row.
    pub fn kept_rules(&self) -> &[usize] {
        &self.kept_rules
    }

    /// `n_j` for each rule row.
    pub fn coverage(&self) -> &[usize] {
        &self.coverage
    }

    /// Row index of original rule `j`, if it was kept.
    pub fn rule_row(&self, j: usize) -> Option<usize> {
        self.kept_rules.binary_search(&j).ok()
    }

    pub fn class_row(&self, l: usize) -> usize {
        self.rules() + l
    }
}

/// `A z`: rule accuracies then class frequencies under labeling `z`.
pub fn constraint_image(sys: &ConstraintSystem, z: &SoftLabeling) -> Result<Vec<f64>> {
    sys.matrix.apply(z)
}

impl std::ops::Deref for ConstraintSystem {
    type Target = ConstraintMatrix;

    fn deref(&self) -> &ConstraintMatrix {
        &self.matrix
    }
}

pub fn exp_family_predict(sys: &ConstraintSystem, w: &Weights) -> Result<SoftLabeling> {
    sys.matrix.predict(w)
}
