//! Valence lookup from the NRC VAD lexicon and the sentiment gate algebra.
//!
//! The gate parameters are supplied by the caller; nothing here is trained.

use std::collections::HashMap;
use std::io::BufRead;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Valence used for words missing from the lexicon.
pub const NEUTRAL_VALENCE: f64 = 0.5;

#[derive(Debug, Clone, PartialEq)]
pub struct ValenceLexicon {
    entries: HashMap<String, f64>,
    default_valence: f64,
}

impl ValenceLexicon {
    pub fn new(entries: HashMap<String, f64>) -> Result<Self> {
        if let Some((w, v)) = entries.iter().find(|(_, v)| !(0.0..=1.0).contains(*v)) {
            return Err(Error::InvalidArgument(format!(
                "valence {v} of `{w}` lies outside [0, 1]"
            )));
        }
        let entries = entries
            .into_iter()
            .map(|(w, v)| (w.to_lowercase(), v))
            .collect();
        Ok(ValenceLexicon {
            entries,
            default_valence: NEUTRAL_VALENCE,
        })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Case-folded lookup.
    pub fn get(&self, token: &str) -> Option<f64> {
        self.entries
            .get(token)
            .or_else(|| self.entries.get(&token.to_lowercase()))
            .copied()
    }

    pub fn valence(&self, token: &str) -> f64 {
        self.get(token).unwrap_or(self.default_valence)
    }

    pub fn default_valence(&self) -> f64 {
        self.default_valence
    }
}

/// Reads the tab-separated `Word Valence Arousal Dominance` file. The header
/// line is optional; columns after the valence are ignored.
pub fn load_vad<R: BufRead>(source: R) -> Result<ValenceLexicon> {
    let mut entries = HashMap::new();
    for (lineno, line) in source.lines().enumerate() {
        let line = line?;
        let lineno = lineno + 1;
        let body = line.trim_end_matches('\r');
        if body.trim().is_empty() {
            continue;
        }
        let mut fields = body.split('\t');
        let word = fields.next().unwrap_or_default().trim();
        let valence = fields.next().map(str::trim);
        if lineno == 1 && word.eq_ignore_ascii_case("word") {
            continue;
        }
        let (Some(valence), false) = (valence, word.is_empty()) else {
            return Err(Error::Parse {
                line: lineno,
                message: "expected `word<TAB>valence[...]`".into(),
            });
        };
        let value: f64 = valence.parse().map_err(|_| Error::Parse {
            line: lineno,
            message: format!("invalid valence `{valence}`"),
        })?;
        if !(0.0..=1.0).contains(&value) {
            return Err(Error::Parse {
                line: lineno,
                message: format!("valence {value} outside [0, 1]"),
            });
        }
        entries.entry(word.to_lowercase()).or_insert(value);
    }
    ValenceLexicon::new(entries)
}

/// Valence of each token, [`NEUTRAL_VALENCE`] when unknown.
pub fn valence_sequence<S: AsRef<str>>(tokens: &[S], lex: &ValenceLexicon) -> Vec<f64> {
    tokens.iter().map(|t| lex.valence(t.as_ref())).collect()
}

/// Weights and bias of the sentiment gate.
#[derive(Debug, Clone, PartialEq)]
pub struct GateParams<T> {
    pub weights: Vec<T>,
    pub bias: T,
}

fn sigmoid<T: Scalar>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

/// `sigmoid(W_g . h + b_g)`.
pub fn sentiment_gate<T: Scalar>(h: &[T], params: &GateParams<T>) -> Result<T> {
    if h.len() != params.weights.len() {
        return Err(Error::DimensionMismatch {
            expected: params.weights.len(),
            found: h.len(),
        });
    }
    let z = h
        .iter()
        .zip(&params.weights)
        .fold(params.bias, |acc, (&x, &w)| acc + w * x);
    Ok(sigmoid(z))
}

/// `g t + (1 - g) S t`, with `S` a scalar valence.
pub fn sentiment_enrich<T: Scalar>(t: &[T], valence: T, gate: T) -> Vec<T> {
    let scale = gate + (T::one() - gate) * valence;
    t.iter().map(|&x| scale * x).collect()
}
