//! Dense vector sets and the whitespace-delimited text format
//! (`token v1 v2 ... vd`, one record per line) shared by GloVe releases and
//! exported image features.

use std::collections::HashMap;
use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// An ordered vocabulary together with an `n x d` row-major matrix.
///
/// Immutable once built; every transformation returns a fresh set.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingSet<T> {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
    data: Vec<T>,
    dim: usize,
}

/// One `(token, vector)` row borrowed from a set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VectorRecord<'a, T> {
    pub token: &'a str,
    pub vector: &'a [T],
}

/// Result of [`load_embeddings`]: the set plus how many duplicate rows were dropped.
#[derive(Debug, Clone)]
pub struct Loaded<T> {
    pub set: EmbeddingSet<T>,
    pub duplicates: usize,
}

impl<T: Scalar> EmbeddingSet<T> {
    /// Builds a set from tokens and a flat row-major buffer, checking every invariant.
    pub fn new(tokens: Vec<String>, data: Vec<T>, dim: usize) -> Result<Self> {
        if tokens.is_empty() {
            return Err(Error::EmptyInput);
        }
        if dim == 0 {
            return Err(Error::InvalidArgument("dimension must be positive".into()));
        }
        if data.len() != tokens.len() * dim {
            return Err(Error::DimensionMismatch {
                expected: tokens.len() * dim,
                found: data.len(),
            });
        }
        if let Some(pos) = data.iter().position(|x| !x.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "non-finite value in row `{}`",
                tokens[pos / dim]
            )));
        }
        let mut index = HashMap::with_capacity(tokens.len());
        for (i, t) in tokens.iter().enumerate() {
            if index.insert(t.clone(), i).is_some() {
                return Err(Error::InvalidArgument(format!("duplicate token `{t}`")));
            }
        }
        Ok(EmbeddingSet {
            tokens,
            index,
            data,
            dim,
        })
    }

    pub fn from_rows<S: Into<String>>(rows: Vec<(S, Vec<T>)>) -> Result<Self> {
        let dim = rows
            .first()
            .map(|(_, v)| v.len())
            .ok_or(Error::EmptyInput)?;
        let mut tokens = Vec::with_capacity(rows.len());
        let mut data = Vec::with_capacity(rows.len() * dim);
        for (t, v) in rows {
            if v.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: v.len(),
                });
            }
            tokens.push(t.into());
            data.extend(v);
        }
        Self::new(tokens, data, dim)
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn token(&self, i: usize) -> &str {
        &self.tokens[i]
    }

    /// Flat row-major view of the matrix.
    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn index_of(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    pub fn get(&self, token: &str) -> Option<&[T]> {
        self.index_of(token).map(|i| self.row(i))
    }

    pub fn contains(&self, token: &str) -> bool {
        self.index.contains_key(token)
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[T]> + '_ {
        self.data.chunks_exact(self.dim)
    }

    /// Row slices, in vocabulary order.
    pub fn row_refs(&self) -> Vec<&[T]> {
        self.rows().collect()
    }

    pub fn records(&self) -> impl Iterator<Item = VectorRecord<'_, T>> + '_ {
        self.tokens
            .iter()
            .zip(self.rows())
            .map(|(t, v)| VectorRecord {
                token: t,
                vector: v,
            })
    }

    /// Returns a new set with the same vocabulary and `f` applied to every row.
    pub fn map_rows<F>(&self, mut f: F) -> Self
    where
        F: FnMut(usize, &[T]) -> Vec<T>,
    {
        let mut data = Vec::with_capacity(self.data.len());
        for (i, row) in self.rows().enumerate() {
            let out = f(i, row);
            assert_eq!(out.len(), self.dim, "row mapping changed the dimension");
            data.extend(out);
        }
        EmbeddingSet {
            tokens: self.tokens.clone(),
            index: self.index.clone(),
            data,
            dim: self.dim,
        }
    }

    /// Returns a new set holding the given rows, in the given order.
    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        let tokens = indices.iter().map(|&i| self.tokens[i].clone()).collect();
        let mut data = Vec::with_capacity(indices.len() * self.dim);
        for &i in indices {
            data.extend_from_slice(self.row(i));
        }
        Self::new(tokens, data, self.dim)
    }

    /// Replaces the matrix, keeping the vocabulary. Used by algorithms that
    /// edit a private copy of the data.
    pub(crate) fn with_data(&self, data: Vec<T>) -> Result<Self> {
        if data.len() != self.data.len() {
            return Err(Error::DimensionMismatch {
                expected: self.data.len(),
                found: data.len(),
            });
        }
        if let Some(pos) = data.iter().position(|x| !x.is_finite()) {
            return Err(Error::Degenerate(format!(
                "non-finite value produced for `{}`",
                self.tokens[pos / self.dim]
            )));
        }
        Ok(EmbeddingSet {
            tokens: self.tokens.clone(),
            index: self.index.clone(),
            data,
            dim: self.dim,
        })
    }
}

/// Reads a text embedding file.
///
/// Blank lines are ignored and CRLF endings accepted. The first occurrence of a
/// duplicated token wins; later ones are counted and dropped.
pub fn load_embeddings<T: Scalar, R: BufRead>(
    reader: R,
    expected_dim: Option<usize>,
) -> Result<Loaded<T>> {
    if expected_dim == Some(0) {
        return Err(Error::InvalidArgument(
            "expected dimension must be positive".into(),
        ));
    }
    let mut dim = expected_dim;
    let mut tokens = Vec::new();
    let mut seen: HashMap<String, usize> = HashMap::new();
    let mut data: Vec<T> = Vec::new();
    let mut duplicates = 0;

    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = lineno + 1;
        let mut fields = line.split_ascii_whitespace();
        let Some(token) = fields.next() else {
            continue;
        };
        let start = data.len();
        let mut found = 0;
        for field in fields {
            let value: T = field.parse().map_err(|_| Error::Parse {
                line: lineno,
                message: format!("invalid number `{field}`"),
            })?;
            if !value.is_finite() {
                return Err(Error::Parse {
                    line: lineno,
                    message: format!("non-finite value `{field}`"),
                });
            }
            data.push(value);
            found += 1;
        }
        match dim {
            Some(d) if d != found => {
                return Err(Error::Dimension {
                    line: lineno,
                    expected: d,
                    found,
                })
            }
            None if found == 0 => {
                return Err(Error::Parse {
                    line: lineno,
                    message: format!("token `{token}` has no values"),
                })
            }
            None => dim = Some(found),
            _ => {}
        }
        if seen.contains_key(token) {
            duplicates += 1;
            data.truncate(start);
            continue;
        }
        seen.insert(token.to_string(), tokens.len());
        tokens.push(token.to_string());
    }

    let Some(dim) = dim.filter(|_| !tokens.is_empty()) else {
        return Err(Error::EmptyInput);
    };
    if duplicates > 0 {
        log::warn!("dropped {duplicates} duplicate token(s); kept first occurrences");
    }
    let set = EmbeddingSet {
        tokens,
        index: seen,
        data,
        dim,
    };
    Ok(Loaded { set, duplicates })
}

/// Writes `set` in the text format with `precision` digits after the decimal point.
pub fn save_embeddings<T: Scalar, W: Write>(
    set: &EmbeddingSet<T>,
    mut sink: W,
    precision: usize,
) -> Result<()> {
    let mut line = String::new();
    for record in set.records() {
        line.clear();
        line.push_str(record.token);
        for v in record.vector {
            use std::fmt::Write as _;
            // Fixed-point keeps values like -0.0000001 from printing as "-0.000000".
            let v = if v.abs().as_f64() < 0.5 * 10f64.powi(-(precision as i32)) {
                T::zero()
            } else {
                *v
            };
            write!(line, " {v:.precision$}").expect("writing to a String cannot fail");
        }
        line.push('\n');
        sink.write_all(line.as_bytes())?;
    }
    sink.flush()?;
    Ok(())
}

/// Mean of the vectors of the space-separated tokens in `phrase`.
pub fn phrase_vector<T: Scalar>(set: &EmbeddingSet<T>, phrase: &str) -> Result<Vec<T>> {
    let rows = phrase
        .split_whitespace()
        .map(|tok| {
            set.get(tok)
                .ok_or_else(|| Error::UnknownToken(tok.to_string()))
        })
        .collect::<Result<Vec<_>>>()?;
    if rows.is_empty() {
        return Err(Error::InvalidArgument("empty phrase".into()));
    }
    Ok(mean_of(&rows, set.dim()))
}

pub(crate) fn mean_of<T: Scalar>(rows: &[&[T]], dim: usize) -> Vec<T> {
    let mut mean = vec![T::zero(); dim];
    for row in rows {
        for (m, &x) in mean.iter_mut().zip(row.iter()) {
            *m += x;
        }
    }
    let n = T::from_usize(rows.len()).expect("count fits in a float");
    mean.iter_mut().for_each(|m| *m /= n);
    mean
}
