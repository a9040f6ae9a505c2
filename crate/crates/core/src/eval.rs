//! The clustering evaluation protocol: take the most biased vectors on each
//! side of a bias direction, split them into two k-means clusters, and report
//! how well the clusters recover the sides. Lower accuracy after debiasing means
//! fewer bias cues remain.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::bias_def::{BiasDefinition, BiasKind};
use crate::error::{Error, Result};
use crate::linalg::{dot, principal_components, UnitVector};
use crate::scalar::Scalar;
use crate::text_debias::{bias_direction, top_biased_indices};
use crate::vectors::{mean_of, EmbeddingSet};

pub use crate::kmeans::{alignment_accuracy, kmeans2, KMeansParams};

/// How a top-N selection is split between the two poles; echoed in reports.
pub const SELECTION_RULE: &str = "top n/2 per pole by cosine to the bias direction of `before`";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterEvalConfig {
    pub tops: Vec<usize>,
    pub seed: u64,
    pub restarts: usize,
    pub max_iters: usize,
    pub tol: f64,
}

impl ClusterEvalConfig {
    pub fn text_default() -> Self {
        ClusterEvalConfig {
            tops: vec![100, 500, 1000],
            seed: 42,
            restarts: 10,
            max_iters: 300,
            tol: 1e-4,
        }
    }

    pub fn visual_default() -> Self {
        ClusterEvalConfig {
            tops: vec![100, 300, 500],
            ..Self::text_default()
        }
    }

    pub fn kmeans(&self) -> KMeansParams {
        KMeansParams {
            seed: self.seed,
            restarts: self.restarts,
            max_iters: self.max_iters,
            tol: self.tol,
        }
    }

    fn validate(&self, n: usize) -> Result<()> {
        if self.tops.is_empty() || self.restarts == 0 || self.max_iters == 0 {
            return Err(Error::InvalidArgument(
                "evaluation needs at least one N and positive counts".into(),
            ));
        }
        for &top in &self.tops {
            if top == 0 || top % 2 != 0 {
                return Err(Error::InvalidArgument(format!(
                    "top-N value {top} must be even and positive"
                )));
            }
            if top > n {
                return Err(Error::InvalidArgument(format!(
                    "top-N value {top} exceeds the {n} available vectors"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterRow {
    pub n: usize,
    pub accuracy_before: f64,
    pub accuracy_after: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterReport {
    pub kind: BiasKind,
    pub selection: String,
    pub rows: Vec<ClusterRow>,
}

fn accuracy<T: Scalar>(vectors: &[&[T]], truth: &[u8], params: &KMeansParams) -> Result<f64> {
    match kmeans2(vectors, params) {
        Ok(labels) => alignment_accuracy(&labels, truth),
        // Identical vectors carry no cue that could separate the poles.
        Err(Error::Degenerate(_)) => Ok(0.5),
        Err(e) => Err(e),
    }
}

/// Runs the protocol with the bias direction computed from `def` on `before`.
pub fn cluster_eval<T: Scalar>(
    before: &EmbeddingSet<T>,
    after: &EmbeddingSet<T>,
    def: &BiasDefinition,
    cfg: &ClusterEvalConfig,
) -> Result<ClusterReport> {
    let dir = bias_direction(before, def)?;
    cluster_eval_with_direction(before, after, &def.kind, &dir.direction, cfg)
}

/// Runs the protocol for an explicit direction (e.g. a learned visual one).
pub fn cluster_eval_with_direction<T: Scalar>(
    before: &EmbeddingSet<T>,
    after: &EmbeddingSet<T>,
    kind: &BiasKind,
    direction: &UnitVector<T>,
    cfg: &ClusterEvalConfig,
) -> Result<ClusterReport> {
    cfg.validate(before.len())?;
    if after.dim() != before.dim() {
        return Err(Error::DimensionMismatch {
            expected: before.dim(),
            found: after.dim(),
        });
    }
    let params = cfg.kmeans();
    let mut tops = cfg.tops.clone();
    tops.sort_unstable();
    tops.dedup();
    let mut rows = Vec::with_capacity(tops.len());
    for n in tops {
        let (pos, neg) = top_biased_indices(before, direction, n / 2)?;
        let selected: Vec<usize> = pos.iter().chain(&neg).copied().collect();
        let truth: Vec<u8> = std::iter::repeat_n(0, pos.len())
            .chain(std::iter::repeat_n(1, neg.len()))
            .collect();
        let before_rows: Vec<&[T]> = selected.iter().map(|&i| before.row(i)).collect();
        let after_rows = selected
            .iter()
            .map(|&i| {
                let token = before.token(i);
                after
                    .get(token)
                    .ok_or_else(|| Error::UnknownToken(token.to_string()))
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(ClusterRow {
            n,
            accuracy_before: accuracy(&before_rows, &truth, &params)?,
            accuracy_after: accuracy(&after_rows, &truth, &params)?,
        });
    }
    Ok(ClusterReport {
        kind: kind.clone(),
        selection: SELECTION_RULE.to_string(),
        rows,
    })
}

/// `kind,n,before,after` rows for every report.
pub fn reports_to_csv(reports: &[ClusterReport]) -> String {
    let mut out = String::from("kind,n,before,after\n");
    for r in reports {
        for row in &r.rows {
            writeln!(
                out,
                "{},{},{:.6},{:.6}",
                r.kind, row.n, row.accuracy_before, row.accuracy_after
            )
            .expect("write to String");
        }
    }
    out
}

/// Human-readable table, accuracies in percent.
pub fn reports_to_table(reports: &[ClusterReport]) -> String {
    let kind_width = reports
        .iter()
        .map(|r| r.kind.as_str().len())
        .chain(std::iter::once(4))
        .max()
        .unwrap_or(4);
    let mut out = format!(
        "{:<kind_width$}  {:>6}  {:>7}  {:>7}\n",
        "kind", "top", "before", "after"
    );
    for r in reports {
        for row in &r.rows {
            writeln!(
                out,
                "{:<kind_width$}  {:>6}  {:>7.1}  {:>7.1}",
                r.kind,
                row.n,
                100.0 * row.accuracy_before,
                100.0 * row.accuracy_after
            )
            .expect("write to String");
        }
    }
    out
}

/// 2D coordinates of a vector set for plotting.
#[derive(Debug, Clone, PartialEq)]
pub struct Projection2D<T> {
    pub ids: Vec<String>,
    pub coords: Vec<[T; 2]>,
}

impl<T: Scalar> Projection2D<T> {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("id,x,y\n");
        for (id, [x, y]) in self.ids.iter().zip(&self.coords) {
            writeln!(out, "{id},{:.6},{:.6}", x.as_f64(), y.as_f64()).expect("write to String");
        }
        out
    }
}

/// Projects every vector onto the top two principal components of the
/// centered set.
pub fn project_2d<T: Scalar>(set: &EmbeddingSet<T>) -> Result<Projection2D<T>> {
    if set.len() < 3 {
        return Err(Error::InvalidArgument(
            "a 2D projection needs at least 3 vectors".into(),
        ));
    }
    if set.dim() < 2 {
        return Err(Error::InvalidArgument(
            "a 2D projection needs vectors of dimension 2 or more".into(),
        ));
    }
    let rows = set.row_refs();
    let pcs = principal_components(&rows, 2, true)?;
    let mean = mean_of(&rows, set.dim());
    let coords = rows
        .iter()
        .map(|row| {
            let centered: Vec<T> = row.iter().zip(&mean).map(|(&x, &m)| x - m).collect();
            [dot(&centered, &pcs[0]), dot(&centered, &pcs[1])]
        })
        .collect();
    Ok(Projection2D {
        ids: set.tokens().to_vec(),
        coords,
    })
}
