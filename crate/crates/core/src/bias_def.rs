//! Bias definitions: characterizing phrase pairs for textual biases and
//! labeled image-group manifests for visual biases.
//!
//! Pair files are UTF-8 TSV, one `left<TAB>right` pair per line. Lines starting
//! with `#` and blank lines are skipped. Inside a field, `|` separates
//! alternatives, and a line expands to the cross product of its alternatives:
//! `husband|wife<TAB>spouse` yields `(husband, spouse)` and `(wife, spouse)`.

use std::collections::HashSet;
use std::fmt;
use std::io::BufRead;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Name of one bias axis (`gender`, `race`, `visual-age`, ...).
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct BiasKind(String);

impl BiasKind {
    pub fn new(name: impl Into<String>) -> Result<Self> {
        let name = name.into();
        let trimmed = name.trim();
        if trimmed.is_empty() {
            return Err(Error::InvalidArgument("bias kind name is empty".into()));
        }
        Ok(BiasKind(trimmed.to_string()))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for BiasKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Textual biases shipped with the toolkit, in default pipeline order.
pub const DEFAULT_TEXT_KINDS: [&str; 5] = ["gender", "race", "age", "religion", "lgbtq"];

const DEFAULT_FILES: [(&str, &str); 5] = [
    ("gender", include_str!("../../../specs/gender.tsv")),
    ("race", include_str!("../../../specs/race.tsv")),
    ("age", include_str!("../../../specs/age.tsv")),
    ("religion", include_str!("../../../specs/religion.tsv")),
    ("lgbtq", include_str!("../../../specs/lgbtq.tsv")),
];

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PhrasePair {
    pub left: String,
    pub right: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiasDefinition {
    pub kind: BiasKind,
    pub pairs: Vec<PhrasePair>,
}

impl BiasDefinition {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

fn split_alternatives(field: &str, line: usize) -> Result<Vec<String>> {
    field
        .split('|')
        .map(|alt| {
            let alt = alt.trim();
            if alt.is_empty() {
                Err(Error::Parse {
                    line,
                    message: format!("empty phrase in field `{field}`"),
                })
            } else {
                Ok(alt.to_string())
            }
        })
        .collect()
}

/// Parses a pair file for `kind`.
pub fn load_bias_definition<R: BufRead>(kind: BiasKind, source: R) -> Result<BiasDefinition> {
    let mut pairs = Vec::new();
    let mut seen = HashSet::new();
    for (lineno, line) in source.lines().enumerate() {
        let line = line?;
        let lineno = lineno + 1;
        let body = line.trim_end_matches('\r');
        if body.trim().is_empty() || body.trim_start().starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = body.split('\t').collect();
        if fields.len() != 2 {
            return Err(Error::Parse {
                line: lineno,
                message: format!("expected 2 tab-separated fields, found {}", fields.len()),
            });
        }
        let lefts = split_alternatives(fields[0], lineno)?;
        let rights = split_alternatives(fields[1], lineno)?;
        if lefts.len() == 1 && rights.len() == 1 && lefts[0] == rights[0] {
            return Err(Error::Parse {
                line: lineno,
                message: format!("pair sides are identical (`{}`)", lefts[0]),
            });
        }
        for left in &lefts {
            for right in &rights {
                // Alternatives that coincide with the other side are dropped.
                if left == right {
                    continue;
                }
                let pair = PhrasePair {
                    left: left.clone(),
                    right: right.clone(),
                };
                if seen.insert(pair.clone()) {
                    pairs.push(pair);
                }
            }
        }
    }
    if pairs.is_empty() {
        return Err(Error::EmptyDefinition(kind.to_string()));
    }
    Ok(BiasDefinition { kind, pairs })
}

/// The shipped definition for one of [`DEFAULT_TEXT_KINDS`].
pub fn default_definition(kind: &str) -> Option<BiasDefinition> {
    DEFAULT_FILES
        .iter()
        .find(|(k, _)| *k == kind)
        .map(|(k, text)| {
            load_bias_definition(BiasKind::new(*k).expect("static name"), text.as_bytes())
                .expect("shipped definitions parse")
        })
}

/// All five shipped definitions, in default pipeline order.
pub fn default_definitions() -> Vec<BiasDefinition> {
    DEFAULT_TEXT_KINDS
        .iter()
        .map(|k| default_definition(k).expect("shipped kind"))
        .collect()
}

/// Group labels consumed by Projection Debias, in axis order.
pub const QUAD_LABELS: [&str; 4] = ["female", "male", "young", "old"];

/// One labeled vector file in a group manifest.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupSpec {
    pub label: String,
    pub member_source: PathBuf,
}

/// Parses a `label<TAB>path` manifest. Relative paths are kept as written.
pub fn load_group_manifest<R: BufRead>(source: R) -> Result<Vec<GroupSpec>> {
    let mut groups: Vec<GroupSpec> = Vec::new();
    for (lineno, line) in source.lines().enumerate() {
        let line = line?;
        let lineno = lineno + 1;
        let body = line.trim_end_matches('\r');
        if body.trim().is_empty() || body.trim_start().starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = body.split('\t').map(str::trim).collect();
        if fields.len() != 2 || fields.iter().any(|f| f.is_empty()) {
            return Err(Error::Parse {
                line: lineno,
                message: "expected `label<TAB>path`".into(),
            });
        }
        if groups.iter().any(|g| g.label == fields[0]) {
            return Err(Error::Parse {
                line: lineno,
                message: format!("group `{}` listed twice", fields[0]),
            });
        }
        groups.push(GroupSpec {
            label: fields[0].to_string(),
            member_source: PathBuf::from(fields[1]),
        });
    }
    if groups.is_empty() {
        return Err(Error::EmptyInput);
    }
    Ok(groups)
}

/// Checks that a manifest names exactly the four Projection Debias groups and
/// returns them in [`QUAD_LABELS`] order.
pub fn quad_specs(groups: &[GroupSpec]) -> Result<[GroupSpec; 4]> {
    let find = |label: &str| {
        groups
            .iter()
            .find(|g| g.label == label)
            .cloned()
            .ok_or_else(|| Error::InvalidArgument(format!("group manifest lacks `{label}`")))
    };
    if let Some(extra) = groups
        .iter()
        .find(|g| !QUAD_LABELS.contains(&g.label.as_str()))
    {
        return Err(Error::InvalidArgument(format!(
            "unexpected group `{}`; expected female, male, young, old",
            extra.label
        )));
    }
    Ok([find("female")?, find("male")?, find("young")?, find("old")?])
}

/// Parses a pair manifest: `group_id<TAB>image_id` lines. Groups keep the order
/// of their first appearance; members keep file order.
pub fn load_pair_manifest<R: BufRead>(source: R) -> Result<Vec<(String, Vec<String>)>> {
    let mut groups: Vec<(String, Vec<String>)> = Vec::new();
    for (lineno, line) in source.lines().enumerate() {
        let line = line?;
        let lineno = lineno + 1;
        let body = line.trim_end_matches('\r');
        if body.trim().is_empty() || body.trim_start().starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = body.split('\t').map(str::trim).collect();
        if fields.len() != 2 || fields.iter().any(|f| f.is_empty()) {
            return Err(Error::Parse {
                line: lineno,
                message: "expected `group<TAB>image_id`".into(),
            });
        }
        match groups.iter_mut().find(|(g, _)| g == fields[0]) {
            Some((_, members)) => members.push(fields[1].to_string()),
            None => groups.push((fields[0].to_string(), vec![fields[1].to_string()])),
        }
    }
    if groups.is_empty() {
        return Err(Error::EmptyInput);
    }
    Ok(groups)
}
