//! Visual Hard Debias and Projection Debias for image feature vectors.
//!
//! Visual Hard Debias learns one bias direction from groups of matched images
//! (typically pairs): the top eigenvector of the within-group scatter
//! `sum_i sum_{v in V_i} (v - u_i)(v - u_i)^T / |V_i|`, `u_i` the group mean.
//! Projection Debias takes the first principal component `u_i` of each of the
//! female, male, young and old image groups and subtracts all four projections
//! `u_i (u_i . v)` from every vector. The four axes are used as they are: no
//! orthogonalization, so correlated axes are subtracted more than once.

use serde::{Deserialize, Serialize};

use crate::bias_def::QUAD_LABELS;
use crate::error::{Error, Result};
use crate::linalg::{dot, principal_components, remove_component, Scatter, UnitVector};
use crate::scalar::Scalar;
use crate::vectors::{mean_of, EmbeddingSet};

/// Groups of matched image vectors `V_1 .. V_m`.
#[derive(Debug, Clone, PartialEq)]
pub struct PairGroups<T> {
    groups: Vec<Vec<Vec<T>>>,
    dim: usize,
}

impl<T: Scalar> PairGroups<T> {
    pub fn new(groups: Vec<Vec<Vec<T>>>) -> Result<Self> {
        let dim = groups
            .iter()
            .flatten()
            .map(Vec::len)
            .next()
            .ok_or(Error::EmptyInput)?;
        if groups.iter().any(Vec::is_empty) {
            return Err(Error::InvalidArgument("an image group is empty".into()));
        }
        if let Some(v) = groups.iter().flatten().find(|v| v.len() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: v.len(),
            });
        }
        Ok(PairGroups { groups, dim })
    }

    /// Resolves `(group, image ids)` lists against a vector file.
    pub fn from_manifest(
        set: &EmbeddingSet<T>,
        manifest: &[(String, Vec<String>)],
    ) -> Result<Self> {
        let groups = manifest
            .iter()
            .map(|(_, ids)| {
                ids.iter()
                    .map(|id| {
                        set.get(id)
                            .map(<[T]>::to_vec)
                            .ok_or_else(|| Error::UnknownToken(id.clone()))
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(groups)
    }

    pub fn groups(&self) -> &[Vec<Vec<T>>] {
        &self.groups
    }

    pub fn dim(&self) -> usize {
        self.dim
    }
}

/// The four demographic image groups, in `female, male, young, old` order.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadGroups<T> {
    groups: [Vec<Vec<T>>; 4],
}

impl<T: Scalar> QuadGroups<T> {
    pub fn new(
        female: Vec<Vec<T>>,
        male: Vec<Vec<T>>,
        young: Vec<Vec<T>>,
        old: Vec<Vec<T>>,
    ) -> Result<Self> {
        let groups = [female, male, young, old];
        for (label, g) in QUAD_LABELS.iter().zip(&groups) {
            if g.is_empty() {
                return Err(Error::InvalidArgument(format!("group `{label}` is empty")));
            }
        }
        let dim = groups[0][0].len();
        for (label, g) in QUAD_LABELS.iter().zip(&groups) {
            if let Some(v) = g.iter().find(|v| v.len() != dim) {
                return Err(Error::InvalidArgument(format!(
                    "group `{label}` has a vector of dimension {} (expected {dim})",
                    v.len()
                )));
            }
        }
        Ok(QuadGroups { groups })
    }

    pub fn from_sets(sets: [&EmbeddingSet<T>; 4]) -> Result<Self> {
        let [f, m, y, o] = sets.map(|s| s.rows().map(<[T]>::to_vec).collect::<Vec<_>>());
        Self::new(f, m, y, o)
    }

    pub fn group(&self, i: usize) -> &[Vec<T>] {
        &self.groups[i]
    }

    pub fn dim(&self) -> usize {
        self.groups[0][0].len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VisualMethod {
    Hard,
    Projection,
    Both,
}

/// Directions learned by [`visual_debias`].
#[derive(Debug, Clone, PartialEq)]
pub struct VisualBiasModel<T> {
    pub hard_direction: Option<UnitVector<T>>,
    pub quad_axes: Option<[UnitVector<T>; 4]>,
}

/// The bias direction of Visual Hard Debias.
pub fn visual_bias_direction<T: Scalar>(pairs: &PairGroups<T>) -> Result<UnitVector<T>> {
    let d = pairs.dim();
    let mut scatter = Scatter::new(d);
    for group in pairs.groups() {
        let rows: Vec<&[T]> = group.iter().map(Vec::as_slice).collect();
        let mean = mean_of(&rows, d);
        let weight = T::one() / T::from_usize(rows.len()).expect("group size fits");
        scatter.add_rows(&rows, Some(&mean), weight)?;
    }
    if scatter.is_degenerate() {
        return Err(Error::Degenerate(
            "image groups show no within-group variation".into(),
        ));
    }
    Ok(scatter.top_eigenvectors(1)?.1.remove(0))
}

fn check_dim<T: Scalar>(set: &EmbeddingSet<T>, dim: usize) -> Result<()> {
    if set.dim() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            found: set.dim(),
        });
    }
    Ok(())
}

/// Removes `direction` from every vector.
pub fn visual_hard_debias<T: Scalar>(
    vectors: &EmbeddingSet<T>,
    direction: &UnitVector<T>,
) -> Result<EmbeddingSet<T>> {
    check_dim(vectors, direction.dim())?;
    Ok(vectors.map_rows(|_, row| {
        let mut out = row.to_vec();
        remove_component(&mut out, direction);
        out
    }))
}

/// First (centered) principal component of each demographic group.
pub fn quad_axes<T: Scalar>(quads: &QuadGroups<T>) -> Result<[UnitVector<T>; 4]> {
    let axis = |i: usize| -> Result<UnitVector<T>> {
        let label = QUAD_LABELS[i];
        let rows: Vec<&[T]> = quads.group(i).iter().map(Vec::as_slice).collect();
        if rows.len() < 2 {
            return Err(Error::Degenerate(format!(
                "group `{label}` needs at least 2 vectors"
            )));
        }
        principal_components(&rows, 1, true)
            .map(|mut v| v.remove(0))
            .map_err(|e| match e {
                Error::Degenerate(_) => {
                    Error::Degenerate(format!("group `{label}` has constant vectors"))
                }
                other => other,
            })
    };
    Ok([axis(0)?, axis(1)?, axis(2)?, axis(3)?])
}

/// `v - sum_i u_i (u_i . v)`, every projection taken from the input `v`.
pub fn subtract_projections<T: Scalar>(
    vectors: &EmbeddingSet<T>,
    axes: &[UnitVector<T>],
) -> Result<EmbeddingSet<T>> {
    for a in axes {
        check_dim(vectors, a.dim())?;
    }
    Ok(vectors.map_rows(|_, row| {
        let coeffs: Vec<T> = axes.iter().map(|u| dot(row, u)).collect();
        let mut out = row.to_vec();
        for (u, &c) in axes.iter().zip(&coeffs) {
            out.iter_mut()
                .zip(u.iter())
                .for_each(|(x, &ui)| *x -= c * ui);
        }
        out
    }))
}

/// Projection Debias with axes learned from `quads`.
pub fn projection_debias<T: Scalar>(
    vectors: &EmbeddingSet<T>,
    quads: &QuadGroups<T>,
) -> Result<EmbeddingSet<T>> {
    subtract_projections(vectors, &quad_axes(quads)?)
}

/// Runs the selected composition. `Both` applies Visual Hard Debias first and
/// Projection Debias to its output.
pub fn visual_debias<T: Scalar>(
    vectors: &EmbeddingSet<T>,
    pairs: Option<&PairGroups<T>>,
    quads: Option<&QuadGroups<T>>,
    method: VisualMethod,
) -> Result<(EmbeddingSet<T>, VisualBiasModel<T>)> {
    let need_pairs = matches!(method, VisualMethod::Hard | VisualMethod::Both);
    let need_quads = matches!(method, VisualMethod::Projection | VisualMethod::Both);
    let mut model = VisualBiasModel {
        hard_direction: None,
        quad_axes: None,
    };
    let mut current = vectors.clone();
    if need_pairs {
        let pairs =
            pairs.ok_or_else(|| Error::InvalidArgument("method needs image pair groups".into()))?;
        let dir = visual_bias_direction(pairs)?;
        current = visual_hard_debias(&current, &dir)?;
        model.hard_direction = Some(dir);
    }
    if need_quads {
        let quads = quads
            .ok_or_else(|| Error::InvalidArgument("method needs the four image groups".into()))?;
        let axes = quad_axes(quads)?;
        current = subtract_projections(&current, &axes)?;
        model.quad_axes = Some(axes);
    }
    Ok((current, model))
}
