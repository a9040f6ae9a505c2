//! Synthetic corpora and process helpers shared by the CLI test targets.

#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use multibias::bias_def::{load_bias_definition, BiasDefinition, BiasKind};
use multibias::vectors::save_embeddings;
use multibias::EmbeddingSet;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn run(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_multibias"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs")
}

pub fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

pub fn write_set(path: &Path, set: &EmbeddingSet) {
    let mut buf = Vec::new();
    save_embeddings(set, &mut buf, 9).unwrap();
    std::fs::write(path, buf).unwrap();
}

pub fn write(path: &Path, text: &str) -> PathBuf {
    std::fs::write(path, text).unwrap();
    path.to_path_buf()
}

pub fn definition(kind: &str, pairs: &[(String, String)]) -> BiasDefinition {
    let text: String = pairs.iter().map(|(a, b)| format!("{a}\t{b}\n")).collect();
    load_bias_definition(BiasKind::new(kind).unwrap(), text.as_bytes()).unwrap()
}

fn axis(d: usize, i: usize) -> Vec<f64> {
    let mut v = vec![0.0; d];
    v[i] = 1.0;
    v
}

fn noise(rng: &mut ChaCha8Rng, d: usize, sigma: f64) -> Vec<f64> {
    let normal = Normal::new(0.0, sigma).unwrap();
    (0..d).map(|_| normal.sample(rng)).collect()
}

/// Word-embedding corpus with a planted bias axis and a planted confound.
///
/// * 1000 pole words, 500 per pole `p = +-1`: `x1 = p`, and `x3 = 0.5 c`
///   with `c = p` for 450 of them and `c = -p` for 50. The confound `e3`
///   therefore separates the poles 90% of the time even after `e1` is gone.
/// * 990 neutral words with `x1 = +-1` and `x3` anti-aligned with it for 445
///   of each sign (aligned for the other 50), which cancels the pole words' `x1`/`x3`
///   correlation across the corpus so the principal axes stay on `e1`, `e3`.
///   `x2 = +-3` makes `e2` the leading principal component.
/// * 5 defining pairs `s +- e1` sharing their base `s`.
///
/// Every other axis carries N(0, 0.05^2) noise.
pub struct PlantedCorpus {
    pub set: EmbeddingSet,
    pub def: BiasDefinition,
    pub dim: usize,
}

pub const PLANTED_DIM: usize = 20;

pub fn planted_corpus(seed: u64) -> PlantedCorpus {
    let d = PLANTED_DIM;
    let mut r = rng(seed);
    let mut rows: Vec<(String, Vec<f64>)> = Vec::with_capacity(2000);
    let base = |r: &mut ChaCha8Rng| {
        let mut v = noise(r, d, 0.05);
        v[0] = 0.0;
        v[1] = 0.0;
        v[2] = 0.0;
        v
    };
    for (pole, sign) in [("m", 1.0), ("f", -1.0)] {
        for i in 0..500 {
            let c = if i < 450 { sign } else { -sign };
            let mut v = base(&mut r);
            v[0] = sign;
            v[2] = 0.5 * c;
            rows.push((format!("{pole}{i}"), v));
        }
    }
    for (k, sign) in [1.0, -1.0].into_iter().enumerate() {
        for i in 0..495 {
            let mut v = base(&mut r);
            v[0] = sign;
            v[2] = if i < 445 { -0.5 * sign } else { 0.5 * sign };
            v[1] = if i % 2 == 0 { 3.0 } else { -3.0 };
            rows.push((format!("n{k}_{i}"), v));
        }
    }
    let mut pairs = Vec::new();
    for i in 0..5 {
        let s = base(&mut r);
        let plus: Vec<f64> = s.iter().zip(axis(d, 0)).map(|(a, b)| a + b).collect();
        let minus: Vec<f64> = s.iter().zip(axis(d, 0)).map(|(a, b)| a - b).collect();
        rows.push((format!("he{i}"), plus));
        rows.push((format!("she{i}"), minus));
        pairs.push((format!("he{i}"), format!("she{i}")));
    }
    // Shuffle so vocabulary order carries no label information.
    for i in (1..rows.len()).rev() {
        let j = r.gen_range(0..=i);
        rows.swap(i, j);
    }
    PlantedCorpus {
        set: EmbeddingSet::from_rows(rows).unwrap(),
        def: definition("gender", &pairs),
        dim: d,
    }
}

/// Image features with planted gender (`e1`) and age (`e2`) axes, plus the
/// four demographic groups whose leading principal components are `e1`
/// (female), `e3` (male), `e4` (young) and `e2` (old).
pub struct VisualCorpus {
    pub population: EmbeddingSet,
    /// Matched female/male image pairs, also present in `population`.
    pub pairs: Vec<(String, String)>,
    pub groups: [EmbeddingSet; 4],
    pub dim: usize,
}

pub fn visual_corpus(seed: u64) -> VisualCorpus {
    let d = 16;
    let mut r = rng(seed);
    let mut rows: Vec<(String, Vec<f64>)> = Vec::new();
    for i in 0..600 {
        let gender = if i % 2 == 0 { 1.0 } else { -1.0 };
        let age = if (i / 2) % 2 == 0 { 0.6 } else { -0.6 };
        let mut v = noise(&mut r, d, 0.1);
        v[0] = gender;
        v[1] = age;
        rows.push((format!("img{i}"), v));
    }
    let mut pairs = Vec::new();
    for i in 0..20 {
        let s = noise(&mut r, d, 0.1);
        let mut f = s.clone();
        let mut m = s;
        f[0] += 1.0;
        m[0] -= 1.0;
        rows.push((format!("pf{i}"), f));
        rows.push((format!("pm{i}"), m));
        pairs.push((format!("pf{i}"), format!("pm{i}")));
    }
    let group = |r: &mut ChaCha8Rng, axis: usize, label: &str| {
        let rows: Vec<(String, Vec<f64>)> = (0..40)
            .map(|i| {
                let mut v = noise(r, d, 0.05);
                v[axis] += if i % 2 == 0 { 1.0 } else { -1.0 } * (1.0 + 0.01 * i as f64);
                (format!("{label}{i}"), v)
            })
            .collect();
        EmbeddingSet::from_rows(rows).unwrap()
    };
    let groups = [
        group(&mut r, 0, "female"),
        group(&mut r, 2, "male"),
        group(&mut r, 3, "young"),
        group(&mut r, 1, "old"),
    ];
    VisualCorpus {
        population: EmbeddingSet::from_rows(rows).unwrap(),
        pairs,
        groups,
        dim: d,
    }
}

/// Writes a visual corpus as the CLI consumes it: `vectors.txt`,
/// `pairs.tsv`, `groups.tsv` and one file per group.
pub fn write_visual_corpus(dir: &Path, corpus: &VisualCorpus) {
    write_set(&dir.join("vectors.txt"), &corpus.population);
    let manifest: String = corpus
        .pairs
        .iter()
        .enumerate()
        .flat_map(|(i, (f, m))| [format!("g{i}\t{f}\n"), format!("g{i}\t{m}\n")])
        .collect();
    write(&dir.join("pairs.tsv"), &manifest);
    let mut groups = String::new();
    for (label, set) in ["female", "male", "young", "old"]
        .iter()
        .zip(&corpus.groups)
    {
        write_set(&dir.join(format!("{label}.txt")), set);
        groups.push_str(&format!("{label}\t{label}.txt\n"));
    }
    write(&dir.join("groups.tsv"), &groups);
    let spec: String = corpus
        .pairs
        .iter()
        .map(|(f, m)| format!("{f}\t{m}\n"))
        .collect();
    std::fs::create_dir_all(dir.join("specs")).unwrap();
    write(&dir.join("specs/gender.tsv"), &spec);
}
