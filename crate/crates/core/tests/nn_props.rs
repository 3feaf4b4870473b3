//! Property tests over the numerical primitives.

use cgcnn_core::nn::{
    classify, conv_forward, feature_forward, maxpool, BankShape, ClassifierHead, ConvFeatureBank,
    FeatureVector, Patch,
};
use cgcnn_core::rng::derive_rng;
use ndarray::{Array2, Array3};
use proptest::prelude::*;

fn patch_strategy(a: usize, b: usize) -> impl Strategy<Value = Patch> {
    proptest::collection::vec(-2.0f64..2.0, a * a * b).prop_map(move |v| {
        Patch::new(Array3::from_shape_vec((a, a, b), v).unwrap()).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn probabilities_form_a_distribution(
        values in proptest::collection::vec(0.0f64..3.0, 6),
        weights in proptest::collection::vec(-2.0f64..2.0, 4 * 6),
    ) {
        let y = FeatureVector::new(values).unwrap();
        let head = ClassifierHead::new(Array2::from_shape_vec((4, 6), weights).unwrap()).unwrap();
        let z = classify(&y, &head).unwrap();
        let sum: f64 = z.probs().iter().sum();
        prop_assert!((sum - 1.0).abs() < 1e-12);
        prop_assert!(z.probs().iter().all(|p| (0.0..=1.0).contains(p)));
    }

    #[test]
    fn softmax_is_shift_invariant_in_the_head(
        values in proptest::collection::vec(0.0f64..3.0, 6),
        weights in proptest::collection::vec(-2.0f64..2.0, 4 * 6),
        shift in -5.0f64..5.0,
    ) {
        // adding a constant row to every class weight shifts all logits
        // by shift * sum(y), which must leave the softmax unchanged
        let y = FeatureVector::new(values).unwrap();
        let w = Array2::from_shape_vec((4, 6), weights).unwrap();
        let head = ClassifierHead::new(w.clone()).unwrap();
        let shifted = ClassifierHead::new(w + shift).unwrap();
        let a = classify(&y, &head).unwrap();
        let b = classify(&y, &shifted).unwrap();
        for (pa, pb) in a.probs().iter().zip(b.probs().iter()) {
            prop_assert!((pa - pb).abs() < 1e-12);
        }
        prop_assert_eq!(a.argmax(), b.argmax());
    }

    #[test]
    fn features_are_nonnegative(patch in patch_strategy(7, 2), seed in 0u64..1000) {
        let mut rng = derive_rng(seed, 3);
        let bank = ConvFeatureBank::random(BankShape { features: 5, kernel: 3, stride: 2 }, 2, &mut rng);
        let y = feature_forward(&patch, &bank).unwrap();
        prop_assert!(y.values().iter().all(|v| *v >= 0.0 && v.is_finite()));
    }

    #[test]
    fn convolution_is_linear_when_unbiased(
        v1 in proptest::collection::vec(-1.0f64..1.0, 7 * 7 * 2),
        v2 in proptest::collection::vec(-1.0f64..1.0, 7 * 7 * 2),
        alpha in -2.0f64..2.0,
        beta in -2.0f64..2.0,
        seed in 0u64..1000,
    ) {
        let mut rng = derive_rng(seed, 4);
        let bank = ConvFeatureBank::random(BankShape { features: 3, kernel: 3, stride: 2 }, 2, &mut rng);
        let x1 = Array3::from_shape_vec((7, 7, 2), v1).unwrap();
        let x2 = Array3::from_shape_vec((7, 7, 2), v2).unwrap();
        let mixed = Patch::new(alpha * &x1 + beta * &x2).unwrap();
        let lhs = conv_forward(&mixed, &bank).unwrap();
        let rhs = alpha * &conv_forward(&Patch::new(x1).unwrap(), &bank).unwrap()
            + beta * &conv_forward(&Patch::new(x2).unwrap(), &bank).unwrap();
        for (l, r) in lhs.iter().zip(rhs.iter()) {
            prop_assert!((l - r).abs() < 1e-10);
        }
    }

    #[test]
    fn pooling_matches_window_max_and_is_idempotent_on_constants(
        v in proptest::collection::vec(-3.0f64..3.0, 5 * 5 * 2),
        c in -3.0f64..3.0,
    ) {
        let map = Array3::from_shape_vec((5, 5, 2), v).unwrap();
        let pooled = maxpool(&map).unwrap();
        for pi in 0..2 {
            for pj in 0..2 {
                for k in 0..2 {
                    let mut want = f64::NEG_INFINITY;
                    for r in 0..3 {
                        for cc in 0..3 {
                            want = want.max(map[[pi * 2 + r, pj * 2 + cc, k]]);
                        }
                    }
                    prop_assert_eq!(pooled[[pi, pj, k]], want);
                }
            }
        }
        let flat = Array3::from_elem((5, 5, 2), c);
        let pooled = maxpool(&flat).unwrap();
        prop_assert!(pooled.iter().all(|v| *v == c));
    }
}
