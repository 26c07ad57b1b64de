//! Randomized invariants over the file formats and the loss geometry.

use proptest::prelude::*;

use spwt_core::container::{Container, Tensor};
use spwt_core::distill::{classify, tgkd_loss, EmbeddingBatch};

fn finite_f64() -> impl Strategy<Value = f64> {
    prop::num::f64::NORMAL | prop::num::f64::SUBNORMAL | prop::num::f64::ZERO
}

fn small_f64() -> impl Strategy<Value = f64> {
    -100.0..100.0f64
}

fn batch(n: usize, dim: usize) -> impl Strategy<Value = EmbeddingBatch> {
    prop::collection::vec(small_f64(), n * dim)
        .prop_map(move |data| EmbeddingBatch::new(n, dim, data).unwrap())
}

proptest! {
    /// write -> read -> write is byte-identical for any payload mix,
    /// including extreme but finite floats in tensors and metadata.
    #[test]
    fn container_roundtrip_is_bit_exact(
        f64s in prop::collection::vec(finite_f64(), 1..64),
        f32s in prop::collection::vec(prop::num::f32::NORMAL, 1..64),
        bits in prop::collection::vec(0u8..=1, 1..64),
        meta in prop::collection::vec(finite_f64(), 0..8),
    ) {
        let mut c = Container::new();
        c.insert("a", Tensor::from_f64(vec![f64s.len()], &f64s).unwrap());
        c.insert("b", Tensor::from_f32(vec![f32s.len()], &f32s).unwrap());
        c.insert("c", Tensor::from_u8(vec![bits.len()], &bits).unwrap());
        c.set_meta("values", &meta).unwrap();

        let bytes = c.to_bytes().unwrap();
        let reread = Container::from_bytes(&bytes).unwrap();
        prop_assert_eq!(reread.to_bytes().unwrap(), bytes);

        let back = reread.get("a").unwrap().as_f64().unwrap();
        let as_bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        prop_assert_eq!(as_bits(&back), as_bits(&f64s));
        prop_assert_eq!(reread.get("c").unwrap().as_u8().unwrap(), &bits[..]);
    }

    /// Softmax scores are a probability distribution for any embedding.
    #[test]
    fn classify_rows_are_distributions(
        v in prop::collection::vec(small_f64(), 6),
        texts in batch(5, 6),
    ) {
        let scores = classify(&v, &texts).unwrap();
        prop_assert_eq!(scores.len(), 5);
        for &p in &scores {
            prop_assert!((0.0..=1.0).contains(&p));
        }
        let total: f64 = scores.iter().sum();
        prop_assert!((total - 1.0).abs() <= 1e-12);
    }

    /// The distance-matching loss only sees pairwise distances, so moving
    /// student and region embeddings rigidly (same rotation, same shift)
    /// cannot change it.
    #[test]
    fn tgkd_is_rigid_motion_invariant(
        v in batch(4, 3),
        r in batch(4, 3),
        t in batch(4, 5),
        axis in prop::collection::vec(-1.0..1.0f64, 3),
        shift in prop::collection::vec(small_f64(), 3),
    ) {
        let norm = axis.iter().map(|x| x * x).sum::<f64>().sqrt();
        prop_assume!(norm > 1e-3);

        // Householder reflection: orthogonal, so distances survive exactly.
        let reflect = |b: &EmbeddingBatch| {
            let mut data = Vec::with_capacity(b.len() * b.dim());
            for i in 0..b.len() {
                let row = b.row(i);
                let proj = row.iter().zip(&axis).map(|(x, u)| x * u).sum::<f64>()
                    / (norm * norm);
                for (k, &x) in row.iter().enumerate() {
                    data.push(x - 2.0 * proj * axis[k] + shift[k]);
                }
            }
            EmbeddingBatch::new(b.len(), b.dim(), data).unwrap()
        };

        let base = tgkd_loss(&v, &r, &t).unwrap();
        let moved = tgkd_loss(&reflect(&v), &reflect(&r), &t).unwrap();
        prop_assert!(
            (base - moved).abs() <= 1e-9 * base.abs().max(1.0),
            "loss {} changed to {} under a rigid motion",
            base,
            moved
        );
    }
}
