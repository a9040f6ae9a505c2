//! Dense kernels shared by the debiasing modules.
//!
//! Summation order is fixed everywhere (row blocks are reduced in vocabulary
//! order), so results do not depend on the thread pool schedule.

mod eigen;

pub use eigen::{symmetric_eigen, SymmetricEigen};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// A vector with unit L2 norm.
#[derive(Debug, Clone, PartialEq)]
pub struct UnitVector<T>(Vec<T>);

impl<T: Scalar> UnitVector<T> {
    /// Normalizes `v`. Fails on a zero or non-finite vector.
    pub fn new(v: Vec<T>) -> Result<Self> {
        let n = norm(&v);
        if !(n.is_finite() && n > T::zero()) {
            return Err(Error::Degenerate("cannot normalize a zero vector".into()));
        }
        Ok(UnitVector(v.into_iter().map(|x| x / n).collect()))
    }

    /// Standard basis vector `e_i` in `dim` dimensions.
    pub fn basis(dim: usize, i: usize) -> Self {
        let mut v = vec![T::zero(); dim];
        v[i] = T::one();
        UnitVector(v)
    }

    pub fn as_slice(&self) -> &[T] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn into_inner(self) -> Vec<T> {
        self.0
    }

    pub fn negated(&self) -> Self {
        UnitVector(self.0.iter().map(|&x| -x).collect())
    }

    pub fn to_f64_vec(&self) -> Vec<f64> {
        self.0.iter().map(|x| x.as_f64()).collect()
    }
}

impl<T> std::ops::Deref for UnitVector<T> {
    type Target = [T];

    fn deref(&self) -> &[T] {
        &self.0
    }
}

pub fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| acc + x * y)
}

pub fn norm<T: Scalar>(v: &[T]) -> T {
    dot(v, v).sqrt()
}

fn check_dims(expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(Error::DimensionMismatch { expected, found });
    }
    Ok(())
}

/// `v - <u, v> u`: the component of `v` orthogonal to `u`.
pub fn project_out<T: Scalar>(v: &[T], u: &UnitVector<T>) -> Result<Vec<T>> {
    check_dims(u.dim(), v.len())?;
    let mut out = v.to_vec();
    remove_component(&mut out, u);
    Ok(out)
}

/// In-place [`project_out`]; dimensions must already agree.
pub fn remove_component<T: Scalar>(v: &mut [T], u: &[T]) {
    let c = dot(v, u);
    for (x, &ui) in v.iter_mut().zip(u) {
        *x -= c * ui;
    }
}

/// Cosine similarity, clamped to `[-1, 1]`.
pub fn cosine<T: Scalar>(v: &[T], w: &[T]) -> Result<T> {
    check_dims(v.len(), w.len())?;
    let nv = norm(v);
    let nw = norm(w);
    if nv == T::zero() || nw == T::zero() {
        return Err(Error::Degenerate("cosine of a zero vector".into()));
    }
    Ok((dot(v, w) / (nv * nw)).max(-T::one()).min(T::one()))
}

/// Flips `v` so its largest-magnitude component (first one on ties) is positive.
pub fn canonicalize_sign<T: Scalar>(v: &mut [T]) {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > v[best].abs() {
            best = i;
        }
    }
    if v.get(best).is_some_and(|&x| x < T::zero()) {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

pub fn mean<T: Scalar>(rows: &[&[T]], dim: usize) -> Vec<T> {
    crate::vectors::mean_of(rows, dim)
}

const BLOCK_ROWS: usize = 256;

/// Accumulator for weighted scatter matrices `sum_k w_k (x_k - m_k)(x_k - m_k)^T`.
///
/// Also tracks `sum_k w_k |x_k|^2` so that a scatter that is zero up to
/// rounding can be told apart from genuine low variance.
#[derive(Debug, Clone)]
pub struct Scatter<T> {
    dim: usize,
    data: Vec<T>,
    reference: T,
}

impl<T: Scalar> Scatter<T> {
    pub fn new(dim: usize) -> Self {
        Scatter {
            dim,
            data: vec![T::zero(); dim * dim],
            reference: T::zero(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Adds `weight * (row - center)(row - center)^T` for every row.
    pub fn add_rows(&mut self, rows: &[&[T]], center: Option<&[T]>, weight: T) -> Result<()> {
        let d = self.dim;
        if let Some(c) = center {
            check_dims(d, c.len())?;
        }
        for row in rows {
            check_dims(d, row.len())?;
        }
        for block in rows.chunks(BLOCK_ROWS) {
            let b = block.len();
            // Column-major copy of the centered block.
            let mut cols = vec![T::zero(); d * b];
            for (r, row) in block.iter().enumerate() {
                self.reference += weight * dot(row, row);
                for j in 0..d {
                    let x = match center {
                        Some(c) => row[j] - c[j],
                        None => row[j],
                    };
                    cols[j * b + r] = x;
                }
            }
            let cols = &cols;
            self.data
                .par_chunks_mut(d)
                .enumerate()
                .for_each(|(i, out)| {
                    let ci = &cols[i * b..(i + 1) * b];
                    for (j, o) in out.iter_mut().enumerate().skip(i) {
                        *o += weight * dot(ci, &cols[j * b..(j + 1) * b]);
                    }
                });
        }
        Ok(())
    }

    /// The full symmetric matrix, row-major.
    pub fn matrix(&self) -> Vec<T> {
        let d = self.dim;
        let mut m = self.data.clone();
        for i in 0..d {
            for j in 0..i {
                m[i * d + j] = m[j * d + i];
            }
        }
        m
    }

    pub fn trace(&self) -> T {
        (0..self.dim).map(|i| self.data[i * self.dim + i]).sum()
    }

    /// True when the scatter vanishes relative to the magnitude of its inputs.
    pub fn is_degenerate(&self) -> bool {
        let tr = self.trace();
        tr <= T::zero() || tr <= T::epsilon() * T::lit(4.0) * self.reference
    }

    /// Top `k` eigenvectors, sign-canonicalized, by descending eigenvalue.
    pub fn top_eigenvectors(&self, k: usize) -> Result<(Vec<T>, Vec<UnitVector<T>>)> {
        if k == 0 || k > self.dim {
            return Err(Error::InvalidArgument(format!(
                "requested {k} eigenvectors of a {d}x{d} scatter",
                d = self.dim
            )));
        }
        if self.is_degenerate() {
            return Err(Error::Degenerate("scatter matrix is zero".into()));
        }
        let eig = symmetric_eigen(&self.matrix(), self.dim)?;
        let values = eig.values[..k].to_vec();
        let vectors = eig
            .vectors
            .into_iter()
            .take(k)
            .map(|mut v| {
                canonicalize_sign(&mut v);
                UnitVector::new(v)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok((values, vectors))
    }
}

/// Top-`k` principal axes of `vectors`: eigenvectors of the scatter matrix
/// (about the mean when `center`, about the origin otherwise), by descending
/// eigenvalue, each with its largest-magnitude component positive.
pub fn principal_components<T: Scalar>(
    vectors: &[&[T]],
    k: usize,
    center: bool,
) -> Result<Vec<UnitVector<T>>> {
    let n = vectors.len();
    if n < 2 {
        return Err(Error::InvalidArgument(format!(
            "principal components need at least 2 vectors, got {n}"
        )));
    }
    let d = vectors[0].len();
    if k == 0 || k > n.min(d) {
        return Err(Error::InvalidArgument(format!(
            "k = {k} must lie in 1..={}",
            n.min(d)
        )));
    }
    let mut scatter = Scatter::new(d);
    let m = center.then(|| mean(vectors, d));
    scatter.add_rows(vectors, m.as_deref(), T::one())?;
    Ok(scatter.top_eigenvectors(k)?.1)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.iter().zip(b).all(|(x, y)| (x - y).abs() < tol)
    }

    #[test]
    fn two_point_axis_uncentered() {
        let pts: [&[f64]; 2] = [&[3.0, 4.0], &[-3.0, -4.0]];
        let pcs = principal_components(&pts, 1, false).unwrap();
        assert!(close(&pcs[0], &[0.6, 0.8], 1e-12));
    }

    #[test]
    fn centered_line_recovers_axis() {
        let rows: Vec<Vec<f64>> = (0..7)
            .map(|t| vec![5.0 + t as f64 * 0.3, -2.0, 1.5])
            .collect();
        let refs: Vec<&[f64]> = rows.iter().map(|r| r.as_slice()).collect();
        let pcs = principal_components(&refs, 1, true).unwrap();
        assert!(close(&pcs[0], &[1.0, 0.0, 0.0], 1e-12));
    }

    #[test]
    fn identical_points_are_degenerate() {
        let pts: [&[f64]; 3] = [&[0.1, 0.2], &[0.1, 0.2], &[0.1, 0.2]];
        assert!(matches!(
            principal_components(&pts, 1, true),
            Err(Error::Degenerate(_))
        ));
    }

    #[test]
    fn rejects_bad_k() {
        let pts: [&[f64]; 2] = [&[1.0, 0.0], &[0.0, 1.0]];
        assert!(principal_components(&pts, 3, false).is_err());
        assert!(principal_components(&pts, 0, false).is_err());
        assert!(principal_components(&pts[..1], 1, false).is_err());
    }

    #[test]
    fn project_out_cases() {
        let e1 = UnitVector::<f64>::basis(2, 0);
        assert_eq!(project_out(&[1.0, 1.0], &e1).unwrap(), vec![0.0, 1.0]);
        assert_eq!(project_out(&[0.0, 3.0], &e1).unwrap(), vec![0.0, 3.0]);
        assert!(project_out(&[1.0, 2.0, 3.0], &e1).is_err());
    }

    #[test]
    fn cosine_cases() {
        let v: [f64; 3] = [1.0, 2.0, -1.0];
        let w: [f64; 3] = [-1.0, -2.0, 1.0];
        assert!((cosine(&v, &v).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(cosine(&[1.0, 0.0], &[0.0, 2.0]).unwrap(), 0.0);
        assert!((cosine(&v, &w).unwrap() + 1.0).abs() < 1e-15);
        assert!(cosine(&[0.0, 0.0], &[1.0, 0.0]).is_err());
    }

    #[test]
    fn sign_canonicalization() {
        let mut v = vec![0.1, -0.9, 0.3];
        canonicalize_sign(&mut v);
        assert_eq!(v, vec![-0.1, 0.9, -0.3]);
    }

    #[test]
    fn unit_vector_rejects_zero() {
        assert!(UnitVector::new(vec![0.0f64, 0.0]).is_err());
        let u = UnitVector::new(vec![3.0f64, 4.0]).unwrap();
        assert!(close(&u, &[0.6, 0.8], 1e-15));
    }
}
