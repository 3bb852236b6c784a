use breslow_core::focal::{focal_loss, focal_loss_and_grad, FocalConfig};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// `Σ_c q_c·α_c·(−ln p_c)` from a direct softmax.
fn smoothed_weighted_ce(z: [f64; 2], target: usize, alpha: [f64; 2], eps: f64) -> f64 {
    let e = [z[0].exp(), z[1].exp()];
    let s = e[0] + e[1];
    (0..2)
        .map(|c| {
            let q = if c == target { 1.0 - eps } else { eps };
            q * alpha[c] * -(e[c] / s).ln()
        })
        .sum()
}

#[test]
fn zero_gamma_is_weighted_smoothed_cross_entropy() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..1000 {
        let z = [rng.random_range(-15.0..15.0), rng.random_range(-15.0..15.0)];
        let target = rng.random_range(0..2);
        let alpha = [rng.random_range(0.1..10.0), rng.random_range(0.1..10.0)];
        let eps = rng.random_range(0.0..0.5);
        let cfg = FocalConfig::new(0.0, alpha, eps).unwrap();
        let got = focal_loss(z, target, &cfg).unwrap();
        let want = smoothed_weighted_ce(z, target, alpha, eps);
        assert!((got - want).abs() <= 1e-12, "{z:?} {target}: {got} vs {want}");
    }
}

fn logits_for(p_target: f64, target: usize) -> [f64; 2] {
    let l = (p_target / (1.0 - p_target)).ln();
    if target == 0 {
        [l, 0.0]
    } else {
        [0.0, l]
    }
}

proptest! {
    #[test]
    fn focusing_lowers_the_loss(p in 0.01f64..0.999, target in 0usize..2, g1 in 0.0f64..4.0, dg in 0.05f64..2.0, a in 0.2f64..5.0) {
        let z = logits_for(p, target);
        let lo = FocalConfig::new(g1, [a, a], 0.0).unwrap();
        let hi = FocalConfig::new(g1 + dg, [a, a], 0.0).unwrap();
        prop_assert!(focal_loss(z, target, &hi).unwrap() < focal_loss(z, target, &lo).unwrap());
    }

    #[test]
    fn alpha_scale_is_linear(z0 in -8.0f64..8.0, z1 in -8.0f64..8.0, target in 0usize..2,
                             gamma in 0.0f64..3.0, a0 in 0.1f64..5.0, a1 in 0.1f64..5.0, eps in 0.0f64..0.4,
                             pow in -3i32..4, k in 0.1f64..10.0) {
        let base = FocalConfig::new(gamma, [a0, a1], eps).unwrap();
        let (l, g) = focal_loss_and_grad([z0, z1], target, &base).unwrap();
        // Powers of two scale without rounding.
        let two = 2f64.powi(pow);
        let scaled = FocalConfig::new(gamma, [a0 * two, a1 * two], eps).unwrap();
        let (ls, gs) = focal_loss_and_grad([z0, z1], target, &scaled).unwrap();
        prop_assert_eq!(ls, l * two);
        prop_assert_eq!(gs, [g[0] * two, g[1] * two]);
        let any = FocalConfig::new(gamma, [a0 * k, a1 * k], eps).unwrap();
        let (lk, gk) = focal_loss_and_grad([z0, z1], target, &any).unwrap();
        prop_assert!((lk - k * l).abs() <= 1e-12 * (k * l).abs().max(1.0));
        for c in 0..2 {
            prop_assert!((gk[c] - k * g[c]).abs() <= 1e-12 * (k * g[c]).abs().max(1.0));
        }
    }

    #[test]
    fn loss_is_positive_unless_certain(z0 in -30.0f64..30.0, z1 in -30.0f64..30.0, target in 0usize..2,
                                       gamma in 0.0f64..3.0, eps in 0.0f64..0.5) {
        let cfg = FocalConfig::new(gamma, [1.0, 5.0], eps).unwrap();
        let l = focal_loss([z0, z1], target, &cfg).unwrap();
        prop_assert!(l >= 0.0);
        if eps > 0.0 || (z0 - z1).abs() < 30.0 {
            prop_assert!(l > 0.0);
        }
    }
}

#[test]
fn single_and_double_precision_agree() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..200 {
        let z = [rng.random_range(-6.0..6.0), rng.random_range(-6.0..6.0)];
        let target = rng.random_range(0..2);
        let d = focal_loss(z, target, &FocalConfig::<f64>::default()).unwrap();
        let s = focal_loss([z[0] as f32, z[1] as f32], target, &FocalConfig::<f32>::default()).unwrap();
        assert!((d - s as f64).abs() <= 1e-5 * d.max(1.0));
    }
}
