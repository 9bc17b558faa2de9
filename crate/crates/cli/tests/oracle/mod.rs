//! Reference computations written directly from the definitions, with
//! dense storage and no shared code with the library.

#![allow(dead_code)]

use rand::Rng;
use rand_distr::{Distribution, Exp1};
use wslabel::{RulePredictionMatrix, SoftLabeling, Vote};

/// Constraint rows over the flattened `n x k` labeling, one per voting rule
/// followed by one per class.
pub struct Dense {
    pub n: usize,
    pub k: usize,
    pub rows: Vec<Vec<f64>>,
}

pub fn dense_constraints(preds: &RulePredictionMatrix) -> Dense {
    let (n, p, k) = (preds.n(), preds.p(), preds.k());
    let mut rows = Vec::new();
    for j in 0..p {
        let voted: Vec<(usize, usize)> =
            (0..n).filter_map(|i| preds.vote(i, j).class().map(|h| (i, h))).collect();
        if voted.is_empty() {
            continue;
        }
        let mut row = vec![0.0; n * k];
        for &(i, h) in &voted {
            row[i * k + h] = 1.0 / voted.len() as f64;
        }
        rows.push(row);
    }
    for l in 0..k {
        let mut row = vec![0.0; n * k];
        for i in 0..n {
            row[i * k + l] = 1.0 / n as f64;
        }
        rows.push(row);
    }
    Dense { n, k, rows }
}

impl Dense {
    pub fn m(&self) -> usize {
        self.rows.len()
    }

    pub fn image(&self, z: &[Vec<f64>]) -> Vec<f64> {
        self.rows
            .iter()
            .map(|row| {
                let mut s = 0.0;
                for i in 0..self.n {
                    for l in 0..self.k {
                        s += row[i * self.k + l] * z[i][l];
                    }
                }
                s
            })
            .collect()
    }

    pub fn scores(&self, theta: &[f64], i: usize) -> Vec<f64> {
        (0..self.k)
            .map(|l| self.rows.iter().zip(theta).map(|(row, t)| t * row[i * self.k + l]).sum())
            .collect()
    }

    pub fn predict(&self, theta: &[f64]) -> Vec<Vec<f64>> {
        (0..self.n).map(|i| softmax(&self.scores(theta, i))).collect()
    }

    /// `theta.b - eps.|theta| - sum_i logsumexp(scores_i)`.
    pub fn dual(&self, theta: &[f64], b: &[f64], eps: &[f64]) -> f64 {
        let linear: f64 = theta.iter().zip(b).zip(eps).map(|((t, b), e)| t * b - e * t.abs()).sum();
        linear - (0..self.n).map(|i| logsumexp(&self.scores(theta, i))).sum::<f64>()
    }
}

pub fn logsumexp(x: &[f64]) -> f64 {
    let top = x.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    top + x.iter().map(|v| (v - top).exp()).sum::<f64>().ln()
}

pub fn softmax(x: &[f64]) -> Vec<f64> {
    let l = logsumexp(x);
    x.iter().map(|v| (v - l).exp()).collect()
}

pub fn kl(mu: &[Vec<f64>], nu: &[Vec<f64>]) -> f64 {
    let mut total = 0.0;
    for (a, b) in mu.iter().zip(nu) {
        for (&p, &q) in a.iter().zip(b) {
            if p > 0.0 {
                total += p * (p / q).ln();
            }
        }
    }
    total
}

pub fn neg_entropy(g: &[Vec<f64>]) -> f64 {
    g.iter().flatten().filter(|&&q| q > 0.0).map(|&q| q * q.ln()).sum()
}

pub fn rows(g: &SoftLabeling) -> Vec<Vec<f64>> {
    g.rows().map(<[f64]>::to_vec).collect()
}

pub fn labeling(rows: &[Vec<f64>]) -> SoftLabeling {
    let k = rows[0].len();
    SoftLabeling::new(rows.len(), k, rows.concat()).expect("valid rows")
}

pub fn max_diff(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    a.iter().flatten().zip(b.iter().flatten()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// One-coin posterior by the product formula.
pub fn one_coin_posterior(preds: &RulePredictionMatrix, w: &[f64], b: &[Option<f64>]) -> Vec<Vec<f64>> {
    let k = preds.k();
    (0..preds.n())
        .map(|i| {
            let joint: Vec<f64> = (0..k)
                .map(|l| {
                    let mut q = w[l];
                    for (j, bj) in b.iter().enumerate() {
                        if let Some(h) = preds.vote(i, j).class() {
                            let bj = bj.expect("voting rule has an accuracy");
                            q *= if h == l { bj } else { (1.0 - bj) / (k - 1) as f64 };
                        }
                    }
                    q
                })
                .collect();
            let z: f64 = joint.iter().sum();
            joint.iter().map(|q| q / z).collect()
        })
        .collect()
}

/// Random votes with every point of every rule abstaining with probability
/// `abstain`; at least one vote overall.
pub fn random_preds<R: Rng>(rng: &mut R, n: usize, p: usize, k: usize, abstain: f64) -> RulePredictionMatrix {
    loop {
        let rows: Vec<Vec<Vote>> = (0..n)
            .map(|_| {
                (0..p)
                    .map(|_| {
                        if rng.random::<f64>() < abstain {
                            Vote::Abstain
                        } else {
                            Vote::Class(rng.random_range(0..k as u32))
                        }
                    })
                    .collect()
            })
            .collect();
        if rows.iter().flatten().any(|v| !v.is_abstain()) {
            return RulePredictionMatrix::from_rows(k, rows).expect("valid votes");
        }
    }
}

/// Rows drawn from the flat Dirichlet.
pub fn random_rows<R: Rng>(rng: &mut R, n: usize, k: usize) -> Vec<Vec<f64>> {
    (0..n)
        .map(|_| {
            let x: Vec<f64> = (0..k).map(|_| Exp1.sample(rng)).map(|v: f64| v + 1e-3).collect();
            let s: f64 = x.iter().sum();
            x.iter().map(|v| v / s).collect()
        })
        .collect()
}
