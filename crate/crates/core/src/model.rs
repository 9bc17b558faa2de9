//! Domain types shared by every label model: rule votes, soft labelings,
//! exponential-family weights and the interval bounds of the coherent
//! labeling polytope.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A single rule output on a single point.
///
/// Classes are stored zero-based in memory. Files and the CLI use the
/// one-based convention with `0` meaning abstain; see [`crate::io`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Vote {
    Abstain,
    Class(u32),
}

impl Vote {
    pub fn class(self) -> Option<usize> {
        match self {
            Vote::Abstain => None,
            Vote::Class(c) => Some(c as usize),
        }
    }

    pub fn is_abstain(self) -> bool {
        matches!(self, Vote::Abstain)
    }

    /// Decodes the file convention: `0` abstains, `1..=k` is a class.
    pub fn from_code(code: u32) -> Self {
        if code == 0 {
            Vote::Abstain
        } else {
            Vote::Class(code - 1)
        }
    }

    pub fn code(self) -> u32 {
        match self {
            Vote::Abstain => 0,
            Vote::Class(c) => c + 1,
        }
    }
}

/// Hard (possibly abstaining) predictions of `p` rules on `n` points.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RulePredictionMatrix {
    n: usize,
    p: usize,
    k: usize,
    votes: Vec<Vote>,
}

impl RulePredictionMatrix {
    /// Builds a matrix from row-major votes (`votes[i * p + j]`).
    pub fn new(n: usize, p: usize, k: usize, votes: Vec<Vote>) -> Result<Self> {
        if n == 0 || p == 0 {
            return Err(Error::invalid(format!("need n >= 1 and p >= 1, got n={n}, p={p}")));
        }
        if k < 2 {
            return Err(Error::invalid(format!("need k >= 2 classes, got {k}")));
        }
        if votes.len() != n * p {
            return Err(Error::dim(format!("expected {} votes, got {}", n * p, votes.len())));
        }
        if let Some((idx, bad)) = votes
            .iter()
            .enumerate()
            .find(|(_, v)| v.class().is_some_and(|c| c >= k))
        {
            return Err(Error::invalid(format!(
                "vote {:?} at point {}, rule {} exceeds k={k}",
                bad,
                idx / p,
                idx % p
            )));
        }
        Ok(Self { n, p, k, votes })
    }

    pub fn from_rows(k: usize, rows: Vec<Vec<Vote>>) -> Result<Self> {
        let n = rows.len();
        let p = rows.first().map_or(0, Vec::len);
        if let Some(i) = rows.iter().position(|r| r.len() != p) {
            return Err(Error::dim(format!("row {i} has {} votes, expected {p}", rows[i].len())));
        }
        Self::new(n, p, k, rows.into_iter().flatten().collect())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn vote(&self, i: usize, j: usize) -> Vote {
        self.votes[i * self.p + j]
    }

    /// Votes of every rule on point `i`.
    pub fn row(&self, i: usize) -> &[Vote] {
        &self.votes[i * self.p..(i + 1) * self.p]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[Vote]> {
        self.votes.chunks(self.p)
    }

    /// Number of non-abstaining predictions made by rule `j`.
    pub fn coverage(&self, j: usize) -> usize {
        self.rows().filter(|r| !r[j].is_abstain()).count()
    }

    pub fn coverages(&self) -> Vec<usize> {
        let mut counts = vec![0; self.p];
        for row in self.rows() {
            for (c, v) in counts.iter_mut().zip(row) {
                if !v.is_abstain() {
                    *c += 1;
                }
            }
        }
        counts
    }

    /// One-hot encoding of rule `j` on point `i`; the zero vector on abstention.
    pub fn encode_one_hot(&self, j: usize, i: usize) -> Result<Vec<f64>> {
        if j >= self.p {
            return Err(Error::IndexOutOfRange { what: "rule", index: j, limit: self.p });
        }
        if i >= self.n {
            return Err(Error::IndexOutOfRange { what: "point", index: i, limit: self.n });
        }
        let mut out = vec![0.0; self.k];
        if let Some(c) = self.vote(i, j).class() {
            out[c] = 1.0;
        }
        Ok(out)
    }

    /// The first `len` points.
    pub fn prefix(&self, len: usize) -> Result<Self> {
        if len == 0 || len > self.n {
            return Err(Error::invalid(format!("prefix length {len} not in 1..={}", self.n)));
        }
        Ok(Self { n: len, p: self.p, k: self.k, votes: self.votes[..len * self.p].to_vec() })
    }

    /// The points at `indices`, in the given order.
    pub fn select(&self, indices: &[usize]) -> Result<Self> {
        let mut votes = Vec::with_capacity(indices.len() * self.p);
        for &i in indices {
            if i >= self.n {
                return Err(Error::IndexOutOfRange { what: "point", index: i, limit: self.n });
            }
            votes.extend_from_slice(self.row(i));
        }
        Self::new(indices.len(), self.p, self.k, votes)
    }
}

/// One probability vector over `k` classes per point: an element of the
/// product of simplices.
#[derive(Debug, Clone, PartialEq)]
pub struct SoftLabeling {
    n: usize,
    k: usize,
    probs: Vec<f64>,
}

const ROW_SUM_TOL: f64 = 1e-12;

impl SoftLabeling {
    /// Validates a row-major `n x k` grid.
    pub fn new(n: usize, k: usize, probs: Vec<f64>) -> Result<Self> {
        if probs.len() != n * k {
            return Err(Error::dim(format!("expected {} probabilities, got {}", n * k, probs.len())));
        }
        if k == 0 {
            return Err(Error::invalid("labeling needs at least one class"));
        }
        for (i, row) in probs.chunks(k).enumerate() {
            if row.iter().any(|&q| !(0.0..=1.0).contains(&q)) {
                return Err(Error::invalid(format!("row {i} has entries outside [0, 1]")));
            }
            let s: f64 = row.iter().sum();
            if (s - 1.0).abs() > ROW_SUM_TOL * k as f64 {
                return Err(Error::invalid(format!("row {i} sums to {s}")));
            }
        }
        Ok(Self { n, k, probs })
    }

    /// Rows that are already normalized by construction (softmax outputs).
    pub(crate) fn from_normalized(n: usize, k: usize, probs: Vec<f64>) -> Self {
        debug_assert_eq!(probs.len(), n * k);
        Self { n, k, probs }
    }

    pub fn uniform(n: usize, k: usize) -> Self {
        Self { n, k, probs: vec![1.0 / k as f64; n * k] }
    }

    /// One-hot rows from zero-based class labels.
    pub fn one_hot(labels: &[usize], k: usize) -> Result<Self> {
        let mut probs = vec![0.0; labels.len() * k];
        for (i, &y) in labels.iter().enumerate() {
            if y >= k {
                return Err(Error::IndexOutOfRange { what: "class", index: y, limit: k });
            }
            probs[i * k + y] = 1.0;
        }
        Ok(Self { n: labels.len(), k, probs })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.probs[i * self.k..(i + 1) * self.k]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.probs.chunks(self.k)
    }

    pub fn get(&self, i: usize, l: usize) -> f64 {
        self.probs[i * self.k + l]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.probs
    }

    /// Argmax per row; ties go to the lowest class index.
    pub fn argmax(&self) -> Vec<usize> {
        self.rows()
            .map(|row| {
                let mut best = 0;
                for (l, &q) in row.iter().enumerate() {
                    if q > row[best] {
                        best = l;
                    }
                }
                best
            })
            .collect()
    }

    pub fn prefix(&self, len: usize) -> Result<Self> {
        if len > self.n {
            return Err(Error::invalid(format!("prefix length {len} exceeds n={}", self.n)));
        }
        Ok(Self { n: len, k: self.k, probs: self.probs[..len * self.k].to_vec() })
    }

    /// Largest absolute entrywise difference.
    pub fn max_abs_diff(&self, other: &SoftLabeling) -> Result<f64> {
        self.check_same_shape(other)?;
        Ok(self
            .probs
            .iter()
            .zip(&other.probs)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max))
    }

    pub(crate) fn check_same_shape(&self, other: &SoftLabeling) -> Result<()> {
        if self.n != other.n || self.k != other.k {
            return Err(Error::dim(format!(
                "labelings have shapes {}x{} and {}x{}",
                self.n, self.k, other.n, other.k
            )));
        }
        Ok(())
    }
}

/// Weights `theta` indexing the exponential family: one weight per
/// constraint row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Weights(Vec<f64>);

impl Weights {
    pub fn new(theta: Vec<f64>) -> Result<Self> {
        if theta.iter().any(|t| !t.is_finite()) {
            return Err(Error::invalid("weights must be finite"));
        }
        Ok(Self(theta))
    }

    pub fn zeros(m: usize) -> Self {
        Self(vec![0.0; m])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn l1_norm(&self) -> f64 {
        self.0.iter().map(|t| t.abs()).sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().fold(0.0, |acc, t| acc.max(t.abs()))
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

/// Bound centers `b` and half-widths `eps` of the polytope
/// `{z : b - eps <= A z <= b + eps}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolytopeSpec {
    pub b: Vec<f64>,
    pub eps: Vec<f64>,
}

impl PolytopeSpec {
    pub fn new(b: Vec<f64>, eps: Vec<f64>) -> Result<Self> {
        if b.len() != eps.len() {
            return Err(Error::dim(format!("b has {} entries, eps has {}", b.len(), eps.len())));
        }
        if b.iter().chain(&eps).any(|x| !x.is_finite()) {
            return Err(Error::invalid("bounds must be finite"));
        }
        if eps.iter().any(|&e| e < 0.0) {
            return Err(Error::invalid("half-widths must be non-negative"));
        }
        Ok(Self { b, eps })
    }

    /// Zero-width bounds pinned at `b`.
    pub fn exact(b: Vec<f64>) -> Result<Self> {
        let m = b.len();
        Self::new(b, vec![0.0; m])
    }

    /// Intersects each interval with `[0, 1]`, the range of every row of a
    /// rule constraint system. Intervals disjoint from `[0, 1]` collapse to
    /// the nearest endpoint.
    pub fn clamped_to_unit(&self) -> Self {
        let (b, eps) = self
            .b
            .iter()
            .zip(&self.eps)
            .map(|(&c, &e)| {
                let lo = (c - e).clamp(0.0, 1.0);
                let hi = (c + e).clamp(0.0, 1.0);
                (0.5 * (lo + hi), 0.5 * (hi - lo))
            })
            .unzip();
        Self { b, eps }
    }

    pub fn m(&self) -> usize {
        self.b.len()
    }

    pub fn lower(&self) -> Vec<f64> {
        self.b.iter().zip(&self.eps).map(|(b, e)| b - e).collect()
    }

    pub fn upper(&self) -> Vec<f64> {
        self.b.iter().zip(&self.eps).map(|(b, e)| b + e).collect()
    }

    pub fn max_eps(&self) -> f64 {
        self.eps.iter().fold(0.0, |a, &e| a.max(e))
    }
}

/// Normalized vote counts per point. Points where every rule abstains get a
/// uniform row.
pub fn majority_vote(preds: &RulePredictionMatrix) -> SoftLabeling {
    let k = preds.k();
    let mut probs = vec![0.0; preds.n() * k];
    for (row, out) in preds.rows().zip(probs.chunks_mut(k)) {
        let mut voters = 0usize;
        for c in row.iter().filter_map(|v| v.class()) {
            out[c] += 1.0;
            voters += 1;
        }
        if voters == 0 {
            out.fill(1.0 / k as f64);
        } else {
            let inv = 1.0 / voters as f64;
            out.iter_mut().for_each(|q| *q *= inv);
        }
    }
    SoftLabeling::from_normalized(preds.n(), k, probs)
}

/// `log(sum(exp(x)))` with max subtraction.
pub(crate) fn log_sum_exp(x: &[f64]) -> f64 {
    let max = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    max + x.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// In-place softmax with max subtraction; returns the row's log-sum-exp.
pub(crate) fn softmax_in_place(x: &mut [f64]) -> f64 {
    let max = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for v in x.iter_mut() {
        *v = (*v - max).exp();
        total += *v;
    }
    let inv = 1.0 / total;
    x.iter_mut().for_each(|v| *v *= inv);
    max + total.ln()
}
