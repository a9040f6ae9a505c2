//! Invariants that hold for arbitrary inputs.

mod common;

use common::{dot, norm};
use multibias::bias_def::{load_bias_definition, BiasDefinition, BiasKind};
use multibias::eval::{alignment_accuracy, kmeans2, KMeansParams};
use multibias::linalg::{project_out, UnitVector};
use multibias::sentiment::{sentiment_enrich, sentiment_gate, GateParams};
use multibias::text_debias::{bias_direction, hard_debias, top_biased};
use multibias::vectors::{load_embeddings, save_embeddings, EmbeddingSet};
use multibias::visual::subtract_projections;
use proptest::prelude::*;

const D: usize = 5;

fn vector(d: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-3.0f64..3.0, d)
}

fn nonzero_vector(d: usize) -> impl Strategy<Value = Vec<f64>> {
    vector(d).prop_filter("nonzero", |v| norm(v) > 1e-3)
}

fn pair_definition() -> BiasDefinition {
    load_bias_definition(BiasKind::new("test").unwrap(), "a\tb\nc\td\n".as_bytes()).unwrap()
}

/// Two defining pairs with a clear shared difference plus free words.
fn vocabulary() -> impl Strategy<Value = EmbeddingSet<f64>> {
    (
        vector(D),
        vector(D),
        nonzero_vector(D),
        prop::collection::vec(vector(D), 2..12),
    )
        .prop_filter_map("well-conditioned pairs", |(s1, s2, diff, words)| {
            let n = norm(&diff);
            if n < 0.5 {
                return None;
            }
            let plus = |s: &[f64], k: f64| s.iter().zip(&diff).map(|(x, y)| x + k * y).collect();
            let mut rows: Vec<(String, Vec<f64>)> = vec![
                ("a".into(), plus(&s1, 1.0)),
                ("b".into(), plus(&s1, -1.0)),
                ("c".into(), plus(&s2, 1.0)),
                ("d".into(), plus(&s2, -1.0)),
            ];
            if rows.iter().any(|(_, v)| norm(v) < 1e-3) {
                return None;
            }
            rows.extend(
                words
                    .into_iter()
                    .enumerate()
                    .map(|(i, w)| (format!("w{i}"), w)),
            );
            Some(EmbeddingSet::from_rows(rows).unwrap())
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn project_out_is_orthogonal(v in vector(D), u in nonzero_vector(D)) {
        let u = UnitVector::new(u).unwrap();
        let p = project_out(&v, &u).unwrap();
        prop_assert!(dot(&p, &u).abs() < 1e-10);
        let again = project_out(&p, &u).unwrap();
        for (x, y) in p.iter().zip(&again) {
            prop_assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn hard_debias_neutralizes_and_is_idempotent(set in vocabulary()) {
        let def = pair_definition();
        let g = bias_direction(&set, &def).unwrap().direction;
        let once = hard_debias(&set, &def, false).unwrap();
        for (i, token) in set.tokens().iter().enumerate() {
            if token.starts_with('w') {
                prop_assert!(dot(once.row(i), &g).abs() < 1e-9);
            }
        }
        // Equalized pairs are unit length and symmetric about the bias axis.
        let ia = set.index_of("a").unwrap();
        let ib = set.index_of("b").unwrap();
        prop_assert!((norm(once.row(ia)) - 1.0).abs() < 1e-9);
        prop_assert!((dot(once.row(ia), &g) + dot(once.row(ib), &g)).abs() < 1e-9);

        let twice = hard_debias(&once, &def, false).unwrap();
        for (x, y) in once.as_slice().iter().zip(twice.as_slice()) {
            prop_assert!((x - y).abs() < 1e-9);
        }
    }

    #[test]
    fn skip_equalize_leaves_defining_words(set in vocabulary()) {
        let out = hard_debias(&set, &pair_definition(), true).unwrap();
        for t in ["a", "b", "c", "d"] {
            prop_assert_eq!(out.get(t).unwrap(), set.get(t).unwrap());
        }
    }

    #[test]
    fn top_biased_pools_are_disjoint_and_ordered(set in vocabulary(), k in 1usize..3) {
        let dir = bias_direction(&set, &pair_definition()).unwrap();
        let (pos, neg) = top_biased(&set, &dir, k).unwrap();
        prop_assert_eq!(pos.len(), k);
        prop_assert_eq!(neg.len(), k);
        prop_assert!(pos.iter().all(|t| !neg.contains(t)));
        let cos = |t: &str| {
            let v = set.get(t).unwrap();
            let n = norm(v);
            if n == 0.0 { 0.0 } else { dot(v, &dir.direction) / n }
        };
        for t in set.tokens() {
            if !pos.contains(t) {
                prop_assert!(cos(t) <= cos(&pos[k - 1]) + 1e-12);
            }
        }
    }

    #[test]
    fn text_format_round_trips(rows in prop::collection::vec(vector(3), 1..8)) {
        let set = EmbeddingSet::from_rows(
            rows.iter().enumerate().map(|(i, r)| (format!("t{i}"), r.clone())).collect(),
        ).unwrap();
        let mut buf = Vec::new();
        save_embeddings(&set, &mut buf, 6).unwrap();
        let back = load_embeddings::<f64, _>(buf.as_slice(), Some(3)).unwrap().set;
        prop_assert_eq!(back.tokens(), set.tokens());
        for (x, y) in back.as_slice().iter().zip(set.as_slice()) {
            prop_assert!((x - y).abs() <= 5e-7);
        }
        // A second round trip is exact.
        let mut again = Vec::new();
        save_embeddings(&back, &mut again, 6).unwrap();
        prop_assert_eq!(buf, again);
    }

    #[test]
    fn alignment_accuracy_range_and_swap(labels in prop::collection::vec(0u8..2, 1..40), seed in any::<u64>()) {
        let truth: Vec<u8> = labels.iter().enumerate()
            .map(|(i, _)| ((seed >> (i % 64)) & 1) as u8)
            .collect();
        let acc = alignment_accuracy(&labels, &truth).unwrap();
        prop_assert!((0.5..=1.0).contains(&acc));
        let swapped: Vec<u8> = labels.iter().map(|l| 1 - l).collect();
        prop_assert_eq!(acc, alignment_accuracy(&swapped, &truth).unwrap());
        prop_assert_eq!(alignment_accuracy(&labels, &labels).unwrap(), 1.0);
    }

    #[test]
    fn kmeans_is_deterministic_and_uses_both_labels(
        rows in prop::collection::vec(vector(3), 2..30),
        seed in 0u64..1000,
    ) {
        prop_assume!(rows.iter().any(|r| r != &rows[0]));
        let refs: Vec<&[f64]> = rows.iter().map(Vec::as_slice).collect();
        let params = KMeansParams { seed, ..KMeansParams::default() };
        let a = kmeans2(&refs, &params).unwrap();
        prop_assert_eq!(&a, &kmeans2(&refs, &params).unwrap());
        prop_assert!(a.contains(&0) && a.contains(&1));
    }

    #[test]
    fn orthonormal_axes_make_projection_idempotent(
        rows in prop::collection::vec(vector(6), 1..6),
        picks in prop::sample::subsequence((0..6).collect::<Vec<usize>>(), 1..=4),
    ) {
        let axes: Vec<UnitVector<f64>> = picks.iter().map(|&i| UnitVector::basis(6, i)).collect();
        let set = common::named_set("v", rows);
        let once = subtract_projections(&set, &axes).unwrap();
        let twice = subtract_projections(&once, &axes).unwrap();
        prop_assert_eq!(once.as_slice(), twice.as_slice());
        for row in once.rows() {
            for &i in &picks {
                prop_assert_eq!(row[i], 0.0);
            }
        }
    }

    #[test]
    fn gate_is_a_probability(h in vector(4), w in vector(4), b in -60.0f64..60.0) {
        let g = sentiment_gate(&h, &GateParams { weights: w, bias: b }).unwrap();
        prop_assert!((0.0..=1.0).contains(&g));
    }

    #[test]
    fn enrich_interpolates(t in vector(4), s in 0.0f64..1.0, g in 0.0f64..1.0) {
        let out = sentiment_enrich(&t, s, g);
        let scale = g + (1.0 - g) * s;
        prop_assert!((s.min(1.0) - 1e-12..=1.0 + 1e-12).contains(&scale));
        for (o, x) in out.iter().zip(&t) {
            prop_assert!((o - scale * x).abs() < 1e-12);
        }
        prop_assert_eq!(sentiment_enrich(&t, s, 1.0), t.clone());
    }
}
