use langtrack_numeric::{focal_bce, kl_divergence, softmax, Activation, Mlp, Tensor2D};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn logits() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-30.0..30.0f64, 1..16)
}

proptest! {
    #[test]
    fn softmax_sums_to_one_and_is_shift_invariant(v in logits(), shift in -100.0..100.0f64) {
        let p = softmax(&v).unwrap();
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        prop_assert!(p.iter().all(|&x| x > 0.0));
        let shifted: Vec<f64> = v.iter().map(|x| x + shift).collect();
        let q = softmax(&shifted).unwrap();
        for (a, b) in p.iter().zip(&q) {
            prop_assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn kl_is_nonnegative_and_zero_on_identity(
        pair in (2usize..12).prop_flat_map(|n| (
            prop::collection::vec(-5.0..5.0f64, n),
            prop::collection::vec(-5.0..5.0f64, n),
        ))
    ) {
        let p = softmax(&pair.0).unwrap();
        let q = softmax(&pair.1).unwrap();
        prop_assert!(kl_divergence(&p, &q).unwrap() >= 0.0);
        prop_assert_eq!(kl_divergence(&p, &p).unwrap(), 0.0);
    }

    #[test]
    fn focal_with_zero_gamma_is_bce(pred in 1e-6..(1.0 - 1e-6f64), target: bool) {
        let bce = if target { -pred.ln() } else { -(1.0 - pred).ln() };
        prop_assert!((focal_bce(pred, target, 0.0).unwrap() - bce).abs() < 1e-12);
    }

    #[test]
    fn mlp_forward_is_deterministic(seed in 0u64..1000, rows in 1usize..6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mlp = Mlp::init(&[3, 5, 2], &[Activation::Relu, Activation::Sigmoid], &mut rng).unwrap();
        let x = Tensor2D::from_vec(rows, 3, (0..rows * 3).map(|i| (i as f64).cos()).collect()).unwrap();
        let a = mlp.forward(&x).unwrap();
        let b = mlp.forward(&x).unwrap();
        prop_assert_eq!(a.shape(), (rows, 2));
        prop_assert_eq!(a, b);
    }
}
