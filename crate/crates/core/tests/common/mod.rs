//! Independent reference implementations used as test oracles. They favour
//! obviousness over speed: cyclic Jacobi rotations for eigenvectors, dense
//! projector matrices, and exhaustive search over two-way partitions.

#![allow(dead_code)]

use multibias::vectors::EmbeddingSet;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Eigenpairs of a symmetric row-major `n x n` matrix, by descending value.
pub fn jacobi_eigen(a: &[f64], n: usize) -> Vec<(f64, Vec<f64>)> {
    let mut m = a.to_vec();
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| m[i * n + j].powi(2))
            .sum();
        if off < 1e-26 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[p * n + q];
                if apq.abs() < 1e-300 {
                    continue;
                }
                let theta = (m[q * n + q] - m[p * n + p]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m[k * n + p];
                    let mkq = m[k * n + q];
                    m[k * n + p] = c * mkp - s * mkq;
                    m[k * n + q] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[p * n + k];
                    let mqk = m[q * n + k];
                    m[p * n + k] = c * mpk - s * mqk;
                    m[q * n + k] = s * mpk + c * mqk;
                }
                for k in 0..n {
                    let vkp = v[k * n + p];
                    let vkq = v[k * n + q];
                    v[k * n + p] = c * vkp - s * vkq;
                    v[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut pairs: Vec<(f64, Vec<f64>)> = (0..n)
        .map(|j| (m[j * n + j], (0..n).map(|k| v[k * n + j]).collect()))
        .collect();
    pairs.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());
    pairs
}

/// `sum_i w_i (x_i - c)(x_i - c)^T` as a dense matrix.
pub fn scatter(rows: &[Vec<f64>], center: Option<&[f64]>, weight: f64) -> Vec<f64> {
    let d = rows[0].len();
    let mut m = vec![0.0; d * d];
    for r in rows {
        let x: Vec<f64> = match center {
            Some(c) => r.iter().zip(c).map(|(a, b)| a - b).collect(),
            None => r.clone(),
        };
        for i in 0..d {
            for j in 0..d {
                m[i * d + j] += weight * x[i] * x[j];
            }
        }
    }
    m
}

pub fn add_into(acc: &mut [f64], m: &[f64]) {
    acc.iter_mut().zip(m).for_each(|(a, b)| *a += b);
}

pub fn mean(rows: &[Vec<f64>]) -> Vec<f64> {
    let d = rows[0].len();
    let mut m = vec![0.0; d];
    for r in rows {
        m.iter_mut().zip(r).for_each(|(a, b)| *a += b);
    }
    m.iter_mut().for_each(|a| *a /= rows.len() as f64);
    m
}

/// `|cos|` between two vectors; 1 means parallel up to sign.
pub fn abs_cos(a: &[f64], b: &[f64]) -> f64 {
    (dot(a, b) / (norm(a) * norm(b))).abs()
}

/// Dense matrix `I - sum_i u_i u_i^T` applied to `v`.
pub fn apply_projector(axes: &[Vec<f64>], v: &[f64]) -> Vec<f64> {
    let d = v.len();
    let mut p = vec![0.0; d * d];
    for i in 0..d {
        p[i * d + i] = 1.0;
    }
    for u in axes {
        for i in 0..d {
            for j in 0..d {
                p[i * d + j] -= u[i] * u[j];
            }
        }
    }
    (0..d)
        .map(|i| (0..d).map(|j| p[i * d + j] * v[j]).sum())
        .collect()
}

/// The smallest within-cluster sum of squares over every split into two
/// nonempty clusters.
pub fn best_two_partition(points: &[Vec<f64>]) -> (f64, Vec<u8>) {
    let n = points.len();
    assert!(n <= 16, "exhaustive search only for small inputs");
    let mut best = (f64::INFINITY, Vec::new());
    // Fix point 0 in cluster 0 to skip mirror-image labelings.
    for mask in 1u32..(1 << (n - 1)) {
        let labels: Vec<u8> = (0..n)
            .map(|i| {
                if i > 0 && mask & (1 << (i - 1)) != 0 {
                    1
                } else {
                    0
                }
            })
            .collect();
        let cost = partition_cost(points, &labels);
        if cost < best.0 {
            best = (cost, labels);
        }
    }
    best
}

pub fn partition_cost(points: &[Vec<f64>], labels: &[u8]) -> f64 {
    let mut cost = 0.0;
    for c in 0..2u8 {
        let members: Vec<Vec<f64>> = points
            .iter()
            .zip(labels)
            .filter(|(_, &l)| l == c)
            .map(|(p, _)| p.clone())
            .collect();
        if members.is_empty() {
            continue;
        }
        let m = mean(&members);
        cost += members
            .iter()
            .map(|p| p.iter().zip(&m).map(|(a, b)| (a - b).powi(2)).sum::<f64>())
            .sum::<f64>();
    }
    cost
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gauss(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

pub fn random_rows(rng: &mut ChaCha8Rng, n: usize, d: usize) -> Vec<Vec<f64>> {
    (0..n)
        .map(|_| (0..d).map(|_| gauss(rng)).collect())
        .collect()
}

pub fn named_set(prefix: &str, rows: Vec<Vec<f64>>) -> EmbeddingSet<f64> {
    EmbeddingSet::from_rows(
        rows.into_iter()
            .enumerate()
            .map(|(i, r)| (format!("{prefix}{i}"), r))
            .collect(),
    )
    .unwrap()
}

pub fn assert_close(a: &[f64], b: &[f64], tol: f64) {
    assert_eq!(a.len(), b.len());
    for (i, (x, y)) in a.iter().zip(b).enumerate() {
        assert!((x - y).abs() <= tol, "component {i}: {x} vs {y}");
    }
}
