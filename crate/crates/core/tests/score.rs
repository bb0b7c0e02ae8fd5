mod common;

use influence_scan::score::cosine_matrix;
use influence_scan::{
    bertscore, compute_idf, EmbeddedSegment, IdfWeights, Level, SegmentRef, Side,
};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use common::*;

const VOCAB: &[&str] = &["a", "plurality", "of", "husbands", "wives", "instead"];

fn pair(seed: u64, max_tokens: usize, dim: usize) -> (EmbeddedSegment, EmbeddedSegment) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (
        random_segment(&mut rng, Side::Candidate, 0, max_tokens, dim, VOCAB),
        random_segment(&mut rng, Side::Reference, 0, max_tokens, dim, VOCAB),
    )
}

fn permuted(seg: &EmbeddedSegment, order: &[usize]) -> EmbeddedSegment {
    let tokens = order.iter().map(|&i| seg.tokens[i].clone()).collect();
    let matrix = order.iter().flat_map(|&i| seg.row(i).to_vec()).collect();
    EmbeddedSegment::new(seg.segment_ref, tokens, seg.dim(), matrix).unwrap()
}

fn rotate(n: usize, by: usize) -> Vec<usize> {
    (0..n).map(|i| (i + by) % n).collect()
}

proptest! {
    #[test]
    fn matches_brute_force(seed in any::<u64>(), dim in 1usize..=8) {
        let (a, b) = pair(seed, 6, dim);
        let got = bertscore(&a, &b, None).unwrap();
        let (p, r, f) = brute_force_pr(&a, &b);
        prop_assert!((got.p - p).abs() <= 1e-6);
        prop_assert!((got.r - r).abs() <= 1e-6);
        prop_assert!((got.f1 - f).abs() <= 1e-6);
    }

    #[test]
    fn swap_exchanges_precision_and_recall(seed in any::<u64>(), dim in 2usize..=16) {
        let (a, b) = pair(seed, 8, dim);
        let ab = bertscore(&a, &b, None).unwrap();
        let ba = bertscore(&b, &a, None).unwrap();
        prop_assert!((ab.p - ba.r).abs() <= 1e-7);
        prop_assert!((ab.r - ba.p).abs() <= 1e-7);
        prop_assert!((ab.f1 - ba.f1).abs() <= 1e-7);
    }

    #[test]
    fn token_order_does_not_matter(seed in any::<u64>(), dim in 2usize..=16, ra in 0usize..8, rb in 0usize..8) {
        let (a, b) = pair(seed, 8, dim);
        let base = bertscore(&a, &b, None).unwrap();
        let pa = permuted(&a, &rotate(a.token_count(), ra));
        let pb = permuted(&b, &rotate(b.token_count(), rb));
        let moved = bertscore(&pa, &pb, None).unwrap();
        prop_assert!((base.p - moved.p).abs() <= 1e-12);
        prop_assert!((base.r - moved.r).abs() <= 1e-12);
    }

    #[test]
    fn scores_stay_within_cosine_bounds(seed in any::<u64>(), dim in 1usize..=16) {
        let (a, b) = pair(seed, 8, dim);
        let s = bertscore(&a, &b, None).unwrap();
        for v in [s.p, s.r] {
            prop_assert!((-1.0 - 1e-5..=1.0 + 1e-5).contains(&v));
        }
        prop_assert!(s.f1 <= 1.0 + 1e-5);
        let sim = cosine_matrix(&a, &b).unwrap();
        prop_assert!(sim.values.iter().all(|v| (-1.0 - 1e-5..=1.0 + 1e-5).contains(v)));
    }

    #[test]
    fn adding_a_reference_token_never_lowers_precision(seed in any::<u64>(), dim in 2usize..=16) {
        let (a, b) = pair(seed, 6, dim);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xabcd);
        let extra = random_unit_rows(&mut rng, 1, dim);
        let mut tokens = b.tokens.clone();
        tokens.push("extra".into());
        let mut matrix = b.matrix().to_vec();
        matrix.extend(extra);
        let bigger = EmbeddedSegment::new(b.segment_ref, tokens, dim, matrix).unwrap();
        let before = bertscore(&a, &b, None).unwrap();
        let after = bertscore(&a, &bigger, None).unwrap();
        prop_assert!(after.p >= before.p - 1e-12);
    }

    #[test]
    fn uniform_idf_is_a_no_op(seed in any::<u64>(), dim in 2usize..=16, w in 0.01f64..10.0) {
        let (a, b) = pair(seed, 8, dim);
        let plain = bertscore(&a, &b, None).unwrap();
        let weighted = bertscore(&a, &b, Some(&IdfWeights::uniform(w))).unwrap();
        prop_assert!((plain.p - weighted.p).abs() <= 1e-7);
        prop_assert!((plain.r - weighted.r).abs() <= 1e-7);
        prop_assert!((plain.f1 - weighted.f1).abs() <= 1e-7);
    }
}

#[test]
fn idf_weights_follow_document_frequency() {
    let seg = |toks: &[&str], i: usize| {
        let mut rng = ChaCha8Rng::seed_from_u64(i as u64);
        EmbeddedSegment::new(
            SegmentRef::new(1, Side::Reference, Level::Sentence, i),
            toks.iter().map(|s| s.to_string()).collect(),
            4,
            random_unit_rows(&mut rng, toks.len(), 4),
        )
        .unwrap()
    };
    let refs = [
        seg(&["the", "whale"], 0),
        seg(&["the", "sea", "the"], 1),
        seg(&["the", "ship"], 2),
    ];
    let idf = compute_idf(&refs);
    assert_eq!(idf.weight("the"), 0.0);
    assert!((idf.weight("whale") - (4.0f64 / 2.0).ln()).abs() < 1e-15);
    assert!((idf.weight("unseen") - 4.0f64.ln()).abs() < 1e-15);
}
