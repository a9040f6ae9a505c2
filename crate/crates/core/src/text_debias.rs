//! Hard Debias, Double-Hard Debias and the sequential multi-bias pipeline for
//! word embeddings.
//!
//! A bias direction is the first principal axis of the pair-centered phrase
//! vectors of a [`BiasDefinition`]. Hard Debias removes that axis from every
//! word outside the definition (neutralize) and re-centers the defining phrases
//! so that each pair differs only along the axis (equalize). Double-Hard Debias
//! first searches the vocabulary's principal components for the one whose
//! removal makes the most biased words least clusterable, removes it from the
//! whole vocabulary, then applies Hard Debias.
//!
//! Defining phrases are looked up token by token, exact match first and the
//! lowercased token second, so that cased definitions resolve against
//! lowercase vocabularies. Pairs with an unknown token are skipped.

use std::collections::HashMap;
use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::bias_def::{BiasDefinition, BiasKind, PhrasePair};
use crate::error::{Error, Result};
use crate::kmeans::{alignment_accuracy, kmeans2, KMeansParams};
use crate::linalg::{dot, norm, principal_components, remove_component, Scatter, UnitVector};
use crate::scalar::Scalar;
use crate::vectors::{mean_of, EmbeddingSet};

/// One bias axis: unit direction oriented so the first resolvable pair's left
/// phrase has a nonnegative projection on it.
#[derive(Debug, Clone, PartialEq)]
pub struct BiasDirection<T> {
    pub kind: BiasKind,
    pub direction: UnitVector<T>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DoubleHardParams {
    /// Number of leading principal components tried as frequency directions.
    pub k_candidates: usize,
    /// Size of each top-biased word pool.
    pub n_per_pole: usize,
    pub kmeans_seed: u64,
    pub kmeans_restarts: usize,
    #[serde(default = "default_max_iters")]
    pub kmeans_max_iters: usize,
    #[serde(default = "default_tol")]
    pub kmeans_tol: f64,
    pub skip_equalize: bool,
}

fn default_max_iters() -> usize {
    300
}

fn default_tol() -> f64 {
    1e-4
}

impl Default for DoubleHardParams {
    fn default() -> Self {
        DoubleHardParams {
            k_candidates: 20,
            n_per_pole: 500,
            kmeans_seed: 42,
            kmeans_restarts: 10,
            kmeans_max_iters: default_max_iters(),
            kmeans_tol: default_tol(),
            skip_equalize: false,
        }
    }
}

impl DoubleHardParams {
    pub fn kmeans(&self) -> KMeansParams {
        KMeansParams {
            seed: self.kmeans_seed,
            restarts: self.kmeans_restarts,
            max_iters: self.kmeans_max_iters,
            tol: self.kmeans_tol,
        }
    }

    fn validate(&self, n: usize, d: usize) -> Result<()> {
        if self.k_candidates == 0
            || self.n_per_pole == 0
            || self.kmeans_restarts == 0
            || self.kmeans_max_iters == 0
        {
            return Err(Error::InvalidArgument(
                "double-hard counts must be positive".into(),
            ));
        }
        if 2 * self.n_per_pole > n {
            return Err(Error::InvalidArgument(format!(
                "two pools of {} exceed the vocabulary of {n}",
                self.n_per_pole
            )));
        }
        if self.k_candidates > n.min(d) {
            return Err(Error::InvalidArgument(format!(
                "{} candidate directions exceed min(n, d) = {}",
                self.k_candidates,
                n.min(d)
            )));
        }
        Ok(())
    }
}

/// Audit record of one Double-Hard run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DebiasTrace {
    pub kind: BiasKind,
    /// Pool clustering accuracy after removing each candidate direction.
    pub candidate_accuracies: Vec<f64>,
    pub selected_index: usize,
    pub pool_pos: Vec<String>,
    pub pool_neg: Vec<String>,
    pub skipped_pairs: Vec<PhrasePair>,
    pub params: DoubleHardParams,
    pub input_sha256: String,
    pub frequency_removed_sha256: String,
    pub output_sha256: String,
}

impl DebiasTrace {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("trace serializes")
    }
}

/// Failure of [`multi_debias`], carrying the traces of the stages that finished.
#[derive(Debug)]
pub struct PipelineError {
    pub kind: Option<BiasKind>,
    pub source: Error,
    pub completed: Vec<DebiasTrace>,
}

impl fmt::Display for PipelineError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            Some(kind) => write!(f, "bias `{kind}` failed: {}", self.source),
            None => write!(f, "{}", self.source),
        }
    }
}

impl std::error::Error for PipelineError {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        Some(&self.source)
    }
}

/// SHA-256 over the tokens and the matrix (as little-endian `f64`).
pub fn snapshot_hash<T: Scalar>(set: &EmbeddingSet<T>) -> String {
    let mut hasher = Sha256::new();
    for t in set.tokens() {
        hasher.update(t.as_bytes());
        hasher.update(*b"\n");
    }
    for x in set.as_slice() {
        hasher.update(x.as_f64().to_le_bytes());
    }
    hex::encode(hasher.finalize())
}

/// A defining phrase resolved to vocabulary rows.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
struct Phrase(Vec<usize>);

struct Resolved {
    pairs: Vec<(Phrase, Phrase)>,
    defining: Vec<bool>,
    skipped: Vec<PhrasePair>,
}

fn lookup<T: Scalar>(set: &EmbeddingSet<T>, token: &str) -> Option<usize> {
    set.index_of(token).or_else(|| {
        let lower = token.to_lowercase();
        if lower == token {
            None
        } else {
            set.index_of(&lower)
        }
    })
}

fn resolve<T: Scalar>(set: &EmbeddingSet<T>, def: &BiasDefinition) -> Resolved {
    let mut defining = vec![false; set.len()];
    let mut pairs = Vec::new();
    let mut skipped = Vec::new();
    let mut phrase = |text: &str| -> Option<Phrase> {
        let found: Vec<Option<usize>> = text.split_whitespace().map(|t| lookup(set, t)).collect();
        for i in found.iter().flatten() {
            defining[*i] = true;
        }
        found.into_iter().collect::<Option<Vec<_>>>().map(Phrase)
    };
    for pair in &def.pairs {
        let left = phrase(&pair.left);
        let right = phrase(&pair.right);
        match (left, right) {
            (Some(l), Some(r)) if !l.0.is_empty() && !r.0.is_empty() => pairs.push((l, r)),
            _ => skipped.push(pair.clone()),
        }
    }
    if !skipped.is_empty() {
        log::debug!(
            "bias `{}`: skipped {} pair(s) with unknown tokens",
            def.kind,
            skipped.len()
        );
    }
    Resolved {
        pairs,
        defining,
        skipped,
    }
}

fn phrase_mean<T: Scalar>(data: &[T], dim: usize, phrase: &Phrase) -> Vec<T> {
    let rows: Vec<&[T]> = phrase
        .0
        .iter()
        .map(|&i| &data[i * dim..(i + 1) * dim])
        .collect();
    mean_of(&rows, dim)
}

fn direction_from<T: Scalar>(
    set: &EmbeddingSet<T>,
    def: &BiasDefinition,
    resolved: &Resolved,
) -> Result<UnitVector<T>> {
    if resolved.pairs.is_empty() {
        return Err(Error::Unresolvable(def.kind.to_string()));
    }
    let d = set.dim();
    let half = T::lit(0.5);
    let mut centered = Vec::with_capacity(2 * resolved.pairs.len());
    for (l, r) in &resolved.pairs {
        let a = phrase_mean(set.as_slice(), d, l);
        let b = phrase_mean(set.as_slice(), d, r);
        let mu: Vec<T> = a.iter().zip(&b).map(|(&x, &y)| (x + y) * half).collect();
        centered.push(a.iter().zip(&mu).map(|(&x, &m)| x - m).collect::<Vec<T>>());
        centered.push(b.iter().zip(&mu).map(|(&x, &m)| x - m).collect::<Vec<T>>());
    }
    let refs: Vec<&[T]> = centered.iter().map(Vec::as_slice).collect();
    let mut scatter = Scatter::new(d);
    scatter.add_rows(&refs, None, T::one())?;
    let (_, mut dirs) = scatter.top_eigenvectors(1).map_err(|e| match e {
        Error::Degenerate(_) => Error::Degenerate(format!(
            "pairs of bias `{}` do not differ in any direction",
            def.kind
        )),
        other => other,
    })?;
    let mut dir = dirs.remove(0);
    let first_left = phrase_mean(set.as_slice(), d, &resolved.pairs[0].0);
    if dot(&first_left, &dir) < T::zero() {
        dir = dir.negated();
    }
    Ok(dir)
}

/// The bias direction spanned by the definition's pairs in `set`.
pub fn bias_direction<T: Scalar>(
    set: &EmbeddingSet<T>,
    def: &BiasDefinition,
) -> Result<BiasDirection<T>> {
    let resolved = resolve(set, def);
    Ok(BiasDirection {
        kind: def.kind.clone(),
        direction: direction_from(set, def, &resolved)?,
    })
}

/// Hard Debias: neutralize every word outside the definition, then (unless
/// `skip_equalize`) equalize the defining phrases on normalized vectors.
pub fn hard_debias<T: Scalar>(
    set: &EmbeddingSet<T>,
    def: &BiasDefinition,
    skip_equalize: bool,
) -> Result<EmbeddingSet<T>> {
    Ok(hard_debias_detailed(set, def, skip_equalize)?.0)
}

/// [`hard_debias`] that also returns the direction it removed.
pub fn hard_debias_detailed<T: Scalar>(
    set: &EmbeddingSet<T>,
    def: &BiasDefinition,
    skip_equalize: bool,
) -> Result<(EmbeddingSet<T>, BiasDirection<T>)> {
    let resolved = resolve(set, def);
    let dir = direction_from(set, def, &resolved)?;
    let d = set.dim();
    let mut data = set.as_slice().to_vec();

    let defining = &resolved.defining;
    data.par_chunks_mut(d).enumerate().for_each(|(i, row)| {
        if !defining[i] {
            remove_component(row, &dir);
        }
    });
    if !skip_equalize {
        equalize(&mut data, d, def, &resolved, &dir)?;
    }
    let out = set.with_data(data)?;
    Ok((
        out,
        BiasDirection {
            kind: def.kind.clone(),
            direction: dir,
        },
    ))
}

/// Equalizes each connected group of pairs (an equality set).
///
/// Phrases linked by pairs form a graph; each connected component is
/// two-colored with the first phrase seen on side 0. Every phrase in the
/// component is moved to `nu ± z * dir`, where `nu` is the off-direction part of
/// the mean normalized phrase vector and `z = sqrt(1 - |nu|^2)`, the sign given
/// by its side. For a lone pair this is the classic two-word equalize; for
/// shared phrases (`father - parent`, `mother - parent`) it keeps every pair
/// symmetric about the neutral subspace. Multi-word phrases are moved by
/// shifting each member token so the phrase mean lands on the target.
fn equalize<T: Scalar>(
    data: &mut [T],
    d: usize,
    def: &BiasDefinition,
    resolved: &Resolved,
    dir: &UnitVector<T>,
) -> Result<()> {
    let mut node_of: HashMap<&Phrase, usize> = HashMap::new();
    let mut nodes: Vec<&Phrase> = Vec::new();
    let mut edges: Vec<(usize, usize)> = Vec::new();
    for (l, r) in &resolved.pairs {
        let a = node_id(&mut node_of, &mut nodes, l);
        let b = node_id(&mut node_of, &mut nodes, r);
        if a == b {
            continue;
        }
        edges.push((a, b));
    }

    let mut owner: HashMap<usize, usize> = HashMap::new();
    for (n, phrase) in nodes.iter().enumerate() {
        for &tok in &phrase.0 {
            if let Some(&other) = owner.get(&tok) {
                if other != n {
                    return Err(Error::InvalidArgument(format!(
                        "bias `{}`: a token is shared by two different defining phrases",
                        def.kind
                    )));
                }
            }
            owner.insert(tok, n);
        }
    }

    let mut adjacency = vec![Vec::new(); nodes.len()];
    for (e, &(a, b)) in edges.iter().enumerate() {
        adjacency[a].push((b, e));
        adjacency[b].push((a, e));
    }
    let mut color: Vec<Option<u8>> = vec![None; nodes.len()];
    for start in 0..nodes.len() {
        if color[start].is_some() {
            continue;
        }
        let mut members = vec![start];
        let mut component_edges = Vec::new();
        color[start] = Some(0);
        let mut head = 0;
        while head < members.len() {
            let n = members[head];
            head += 1;
            let c = color[n].expect("colored on discovery");
            for &(m, e) in &adjacency[n] {
                if !component_edges.contains(&e) {
                    component_edges.push(e);
                }
                match color[m] {
                    None => {
                        color[m] = Some(1 - c);
                        members.push(m);
                    }
                    Some(cm) if cm == c => {
                        return Err(Error::InvalidArgument(format!(
                            "bias `{}`: pairs form an odd cycle and cannot be equalized",
                            def.kind
                        )))
                    }
                    Some(_) => {}
                }
            }
        }

        let raw: Vec<Vec<T>> = members
            .iter()
            .map(|&n| phrase_mean(data, d, nodes[n]))
            .collect();
        let unit: Vec<Vec<T>> = raw
            .iter()
            .map(|v| {
                let n = norm(v);
                if n == T::zero() {
                    Err(Error::Degenerate(format!(
                        "bias `{}`: zero vector among defining phrases",
                        def.kind
                    )))
                } else {
                    Ok(v.iter().map(|&x| x / n).collect())
                }
            })
            .collect::<Result<_>>()?;
        let unit_refs: Vec<&[T]> = unit.iter().map(Vec::as_slice).collect();
        let mu = mean_of(&unit_refs, d);
        let mut nu = mu.clone();
        remove_component(&mut nu, dir);
        let mut z = (T::one() - dot(&nu, &nu)).max(T::zero()).sqrt();

        let position = |n: usize| members.iter().position(|&m| m == n).expect("member");
        let mut spread = T::zero();
        for &e in &component_edges {
            let (a, b) = edges[e];
            let (zero_side, one_side) = if color[a] == Some(0) { (a, b) } else { (b, a) };
            spread += dot(&unit[position(zero_side)], dir) - dot(&unit[position(one_side)], dir);
        }
        if spread < T::zero() {
            z = -z;
        }

        for (k, &n) in members.iter().enumerate() {
            let sign = if color[n] == Some(0) { z } else { -z };
            let target: Vec<T> = nu
                .iter()
                .zip(dir.iter())
                .map(|(&v, &g)| v + sign * g)
                .collect();
            let phrase = nodes[n];
            let delta: Vec<T> = target.iter().zip(&raw[k]).map(|(&t, &r)| t - r).collect();
            for &tok in &phrase.0 {
                let row = &mut data[tok * d..(tok + 1) * d];
                if phrase.0.len() == 1 {
                    row.copy_from_slice(&target);
                } else {
                    row.iter_mut().zip(&delta).for_each(|(x, &dx)| *x += dx);
                }
            }
        }
    }
    Ok(())
}

fn node_id<'a>(
    node_of: &mut HashMap<&'a Phrase, usize>,
    nodes: &mut Vec<&'a Phrase>,
    phrase: &'a Phrase,
) -> usize {
    *node_of.entry(phrase).or_insert_with(|| {
        nodes.push(phrase);
        nodes.len() - 1
    })
}

fn cosines_to<T: Scalar>(set: &EmbeddingSet<T>, dir: &[T]) -> Vec<T> {
    let d = set.dim();
    set.as_slice()
        .par_chunks(d)
        .map(|row| {
            let n = norm(row);
            if n == T::zero() {
                T::zero()
            } else {
                dot(row, dir) / n
            }
        })
        .collect()
}

pub(crate) fn top_biased_indices<T: Scalar>(
    set: &EmbeddingSet<T>,
    dir: &[T],
    n_per_pole: usize,
) -> Result<(Vec<usize>, Vec<usize>)> {
    if dir.len() != set.dim() {
        return Err(Error::DimensionMismatch {
            expected: set.dim(),
            found: dir.len(),
        });
    }
    if n_per_pole == 0 || 2 * n_per_pole > set.len() {
        return Err(Error::InvalidArgument(format!(
            "cannot take two pools of {n_per_pole} from {} vectors",
            set.len()
        )));
    }
    let cos = cosines_to(set, dir);
    let cmp = |a: &T, b: &T| a.partial_cmp(b).expect("finite cosines");
    let mut order: Vec<usize> = (0..set.len()).collect();
    order.sort_by(|&a, &b| cmp(&cos[b], &cos[a]).then(a.cmp(&b)));
    let positive: Vec<usize> = order[..n_per_pole].to_vec();
    let mut taken = vec![false; set.len()];
    positive.iter().for_each(|&i| taken[i] = true);
    order.sort_by(|&a, &b| cmp(&cos[a], &cos[b]).then(a.cmp(&b)));
    let negative: Vec<usize> = order
        .into_iter()
        .filter(|&i| !taken[i])
        .take(n_per_pole)
        .collect();
    Ok((positive, negative))
}

/// The `n_per_pole` tokens most aligned with `dir` and the `n_per_pole` most
/// opposed to it, by cosine. Ties go to the earlier vocabulary entry; zero
/// vectors count as cosine 0.
pub fn top_biased<T: Scalar>(
    set: &EmbeddingSet<T>,
    dir: &BiasDirection<T>,
    n_per_pole: usize,
) -> Result<(Vec<String>, Vec<String>)> {
    let (pos, neg) = top_biased_indices(set, &dir.direction, n_per_pole)?;
    let names = |ix: Vec<usize>| ix.into_iter().map(|i| set.token(i).to_string()).collect();
    Ok((names(pos), names(neg)))
}

/// Leading principal components of the mean-centered vocabulary.
pub fn candidate_directions<T: Scalar>(
    set: &EmbeddingSet<T>,
    k_candidates: usize,
) -> Result<Vec<UnitVector<T>>> {
    principal_components(&set.row_refs(), k_candidates, true)
}

fn remove_from_all<T: Scalar>(set: &EmbeddingSet<T>, u: &UnitVector<T>) -> Result<EmbeddingSet<T>> {
    let d = set.dim();
    let mut data = set.as_slice().to_vec();
    data.par_chunks_mut(d)
        .for_each(|row| remove_component(row, u));
    set.with_data(data)
}

/// Clustering accuracy of the pools after removing `candidate` and hard
/// debiasing, computed on private copies.
fn evaluate_candidate<T: Scalar>(
    sub: &EmbeddingSet<T>,
    pool: &[usize],
    truth: &[u8],
    candidate: &UnitVector<T>,
    def: &BiasDefinition,
    params: &DoubleHardParams,
) -> Result<f64> {
    let projected = remove_from_all(sub, candidate)?;
    let debiased = hard_debias(&projected, def, params.skip_equalize)?;
    let vectors: Vec<&[T]> = pool.iter().map(|&i| debiased.row(i)).collect();
    let labels = kmeans2(&vectors, &params.kmeans()).map_err(|e| match e {
        Error::Degenerate(_) => Error::DegeneratePool(def.kind.to_string()),
        other => other,
    })?;
    alignment_accuracy(&labels, truth)
}

/// Double-Hard Debias for one bias kind.
pub fn double_hard_debias<T: Scalar>(
    set: &EmbeddingSet<T>,
    def: &BiasDefinition,
    params: &DoubleHardParams,
) -> Result<(EmbeddingSet<T>, DebiasTrace)> {
    params.validate(set.len(), set.dim())?;
    let resolved = resolve(set, def);
    if !resolved.skipped.is_empty() {
        let list: Vec<String> = resolved
            .skipped
            .iter()
            .map(|p| format!("{}/{}", p.left, p.right))
            .collect();
        log::warn!(
            "bias `{}`: skipped pair(s) with unknown tokens: {}",
            def.kind,
            list.join(", ")
        );
    }
    let dir = direction_from(set, def, &resolved)?;

    let (pos, neg) = top_biased_indices(set, &dir, params.n_per_pole)?;
    let candidates = candidate_directions(set, params.k_candidates)?;

    // Pools plus defining words: enough to recompute the bias direction
    // after each candidate removal without touching the full vocabulary.
    let mut members: Vec<usize> = pos.iter().chain(&neg).copied().collect();
    members.extend(
        resolved
            .defining
            .iter()
            .enumerate()
            .filter_map(|(i, &def)| def.then_some(i)),
    );
    members.sort_unstable();
    members.dedup();
    let sub = set.subset(&members)?;
    let local = |i: usize| members.binary_search(&i).expect("pool word is a member");
    let pool: Vec<usize> = pos.iter().chain(&neg).map(|&i| local(i)).collect();
    let truth: Vec<u8> = std::iter::repeat_n(0, pos.len())
        .chain(std::iter::repeat_n(1, neg.len()))
        .collect();

    let accuracies = candidates
        .par_iter()
        .map(|u| evaluate_candidate(&sub, &pool, &truth, u, def, params))
        .collect::<Result<Vec<f64>>>()?;
    let selected = argmin(&accuracies);

    let frequency_removed = remove_from_all(set, &candidates[selected])?;
    let output = hard_debias(&frequency_removed, def, params.skip_equalize)?;

    let trace = DebiasTrace {
        kind: def.kind.clone(),
        candidate_accuracies: accuracies,
        selected_index: selected,
        pool_pos: pos.iter().map(|&i| set.token(i).to_string()).collect(),
        pool_neg: neg.iter().map(|&i| set.token(i).to_string()).collect(),
        skipped_pairs: resolved.skipped,
        params: *params,
        input_sha256: snapshot_hash(set),
        frequency_removed_sha256: snapshot_hash(&frequency_removed),
        output_sha256: snapshot_hash(&output),
    };
    Ok((output, trace))
}

/// Index of the smallest value; the first one on ties.
pub fn argmin(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate() {
        if x < xs[best] {
            best = i;
        }
    }
    best
}

/// Applies [`double_hard_debias`] for each definition in order, feeding each
/// stage's output into the next.
pub fn multi_debias<T: Scalar>(
    set: &EmbeddingSet<T>,
    defs: &[BiasDefinition],
    params: &DoubleHardParams,
) -> std::result::Result<(EmbeddingSet<T>, Vec<DebiasTrace>), PipelineError> {
    let fail = |kind, source, completed| PipelineError {
        kind,
        source,
        completed,
    };
    if defs.is_empty() {
        return Err(fail(
            None,
            Error::InvalidArgument("no bias definitions given".into()),
            Vec::new(),
        ));
    }
    for (i, def) in defs.iter().enumerate() {
        if defs[..i].iter().any(|d| d.kind == def.kind) {
            return Err(fail(
                Some(def.kind.clone()),
                Error::InvalidArgument(format!("bias `{}` listed twice", def.kind)),
                Vec::new(),
            ));
        }
    }
    let mut current = set.clone();
    let mut traces = Vec::with_capacity(defs.len());
    for def in defs {
        match double_hard_debias(&current, def, params) {
            Ok((next, trace)) => {
                log::info!(
                    "bias `{}`: removed candidate {} (accuracy {:.3})",
                    def.kind,
                    trace.selected_index,
                    trace.candidate_accuracies[trace.selected_index]
                );
                current = next;
                traces.push(trace);
            }
            Err(e) => return Err(fail(Some(def.kind.clone()), e, traces)),
        }
    }
    Ok((current, traces))
}
