//! Two-cluster k-means used by the evaluation protocol and the frequency
//! direction search.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KMeansParams {
    pub seed: u64,
    pub restarts: usize,
    pub max_iters: usize,
    pub tol: f64,
}

impl Default for KMeansParams {
    fn default() -> Self {
        KMeansParams {
            seed: 42,
            restarts: 10,
            max_iters: 300,
            tol: 1e-4,
        }
    }
}

/// Labels from the best restart together with its within-cluster sum of squares.
#[derive(Debug, Clone, PartialEq)]
pub struct Clustering {
    pub labels: Vec<u8>,
    pub inertia: f64,
    pub restart: usize,
}

/// Lloyd's algorithm with k-means++ seeding, `k = 2`.
///
/// Restart `r` draws from a generator seeded with `seed + r`; the restart with
/// the lowest inertia wins, earliest restart on ties.
pub fn kmeans2<T: Scalar>(vectors: &[&[T]], params: &KMeansParams) -> Result<Vec<u8>> {
    Ok(kmeans2_detailed(vectors, params)?.labels)
}

pub fn kmeans2_detailed<T: Scalar>(vectors: &[&[T]], params: &KMeansParams) -> Result<Clustering> {
    if vectors.len() < 2 {
        return Err(Error::InvalidArgument(
            "k-means needs at least 2 vectors".into(),
        ));
    }
    if params.restarts == 0 || params.max_iters == 0 {
        return Err(Error::InvalidArgument(
            "k-means restarts and iterations must be positive".into(),
        ));
    }
    let d = vectors[0].len();
    if let Some(bad) = vectors.iter().find(|v| v.len() != d) {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: bad.len(),
        });
    }
    // Promote once; clustering runs in f64 whatever the storage type.
    let points: Vec<Vec<f64>> = vectors
        .iter()
        .map(|v| v.iter().map(|x| x.as_f64()).collect())
        .collect();
    if points.iter().all(|p| p == &points[0]) {
        return Err(Error::Degenerate("all vectors are identical".into()));
    }
    let scale = mean_variance(&points);

    let runs: Vec<(Vec<u8>, f64)> = (0..params.restarts)
        .into_par_iter()
        .map(|r| lloyd(&points, params, params.seed.wrapping_add(r as u64), scale))
        .collect();
    let (best, (labels, inertia)) = runs
        .into_iter()
        .enumerate()
        .fold(
            None,
            |acc: Option<(usize, (Vec<u8>, f64))>, (r, run)| match acc {
                Some((_, (_, best))) if best <= run.1 => acc,
                _ => Some((r, run)),
            },
        )
        .expect("at least one restart");
    Ok(Clustering {
        labels,
        inertia,
        restart: best,
    })
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn mean_variance(points: &[Vec<f64>]) -> f64 {
    let d = points[0].len();
    let n = points.len() as f64;
    let mut mean = vec![0.0; d];
    for p in points {
        mean.iter_mut().zip(p).for_each(|(m, x)| *m += x);
    }
    mean.iter_mut().for_each(|m| *m /= n);
    points.iter().map(|p| sq_dist(p, &mean)).sum::<f64>() / (n * d as f64)
}

fn seed_centers(points: &[Vec<f64>], rng: &mut ChaCha8Rng) -> [Vec<f64>; 2] {
    let first = rng.gen_range(0..points.len());
    let weights: Vec<f64> = points.iter().map(|p| sq_dist(p, &points[first])).collect();
    let total: f64 = weights.iter().sum();
    let mut target = rng.gen::<f64>() * total;
    let mut second = weights.len() - 1;
    for (i, w) in weights.iter().enumerate() {
        if *w > 0.0 && target < *w {
            second = i;
            break;
        }
        target -= w;
    }
    if weights[second] == 0.0 {
        // Rounding pushed the draw past the end; take the farthest point.
        second = argmax(&weights);
    }
    [points[first].clone(), points[second].clone()]
}

fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate() {
        if x > xs[best] {
            best = i;
        }
    }
    best
}

fn assign(points: &[Vec<f64>], centers: &[Vec<f64>; 2], labels: &mut [u8]) -> f64 {
    let mut inertia = 0.0;
    for (p, l) in points.iter().zip(labels.iter_mut()) {
        let d0 = sq_dist(p, &centers[0]);
        let d1 = sq_dist(p, &centers[1]);
        if d1 < d0 {
            *l = 1;
            inertia += d1;
        } else {
            *l = 0;
            inertia += d0;
        }
    }
    inertia
}

fn update(points: &[Vec<f64>], labels: &mut [u8], centers: &mut [Vec<f64>; 2]) {
    let d = points[0].len();
    let mut sums = [vec![0.0; d], vec![0.0; d]];
    let mut counts = [0usize; 2];
    for (p, &l) in points.iter().zip(labels.iter()) {
        counts[l as usize] += 1;
        sums[l as usize]
            .iter_mut()
            .zip(p)
            .for_each(|(s, x)| *s += x);
    }
    for c in 0..2 {
        if counts[c] == 0 {
            // Empty cluster: move the point farthest from its own center.
            let dists: Vec<f64> = points
                .iter()
                .zip(labels.iter())
                .map(|(p, &l)| sq_dist(p, &centers[l as usize]))
                .collect();
            let far = argmax(&dists);
            labels[far] = c as u8;
            centers[c] = points[far].clone();
            return update(points, labels, centers);
        }
    }
    for c in 0..2 {
        let n = counts[c] as f64;
        centers[c] = sums[c].iter().map(|s| s / n).collect();
    }
}

fn lloyd(points: &[Vec<f64>], params: &KMeansParams, seed: u64, scale: f64) -> (Vec<u8>, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centers = seed_centers(points, &mut rng);
    let mut labels = vec![0u8; points.len()];
    assign(points, &centers, &mut labels);
    let threshold = params.tol * scale;
    for _ in 0..params.max_iters {
        let previous = centers.clone();
        update(points, &mut labels, &mut centers);
        let before = labels.clone();
        assign(points, &centers, &mut labels);
        let shift: f64 = (0..2).map(|c| sq_dist(&previous[c], &centers[c])).sum();
        if labels == before || shift <= threshold {
            break;
        }
    }
    // Final labels and inertia always agree with the final centers.
    update(points, &mut labels, &mut centers);
    let inertia = assign(points, &centers, &mut labels);
    (labels, inertia)
}

/// Fraction of positions where `labels` agrees with `truth`, maximized over the
/// label swap. Ranges over `[0.5, 1]`.
pub fn alignment_accuracy(labels: &[u8], truth: &[u8]) -> Result<f64> {
    if labels.len() != truth.len() {
        return Err(Error::DimensionMismatch {
            expected: truth.len(),
            found: labels.len(),
        });
    }
    if labels.is_empty() {
        return Err(Error::EmptyInput);
    }
    let agree = labels.iter().zip(truth).filter(|(a, b)| a == b).count();
    // Compare counts, not fractions, so a label swap gives a bit-identical score.
    Ok(agree.max(labels.len() - agree) as f64 / labels.len() as f64)
}
