use breslow_core::data::DepthClass;
use breslow_core::linalg::Matrix;
use breslow_core::projection::{
    fisher_axis_scores, fit_ellipse, fit_gaussian_1d, overlap_area, pca_fit, pls_fit, pls_fixed_point_residual,
    response_covariance, ThicknessGroup, DEFAULT_COVERAGE,
};
use breslow_core::synth::{generate, SynthConfig};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

fn gaussian(rng: &mut ChaCha8Rng, n: usize, sd: &[f64]) -> Matrix<f64> {
    let data = (0..n)
        .flat_map(|_| {
            sd.iter()
                .map(|s| s * Distribution::<f64>::sample(&StandardNormal, &mut *rng))
                .collect::<Vec<f64>>()
        })
        .collect();
    Matrix::from_vec(n, sd.len(), data).unwrap()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[test]
fn isotropic_cloud_has_equal_variances() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let x = gaussian(&mut rng, 100_000, &[1.0; 3]);
    let pca = pca_fit(&x, false).unwrap();
    for v in &pca.variances {
        assert!((v - 1.0).abs() < 0.02, "{:?}", pca.variances);
    }
}

#[test]
fn axes_are_orthonormal_and_reconstruct() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let x = gaussian(&mut rng, 300, &[3.0, 2.0, 1.5, 1.0, 0.5]);
    for standardize in [false, true] {
        let pca = pca_fit(&x, standardize).unwrap();
        for a in 0..5 {
            for b in 0..5 {
                let want = if a == b { 1.0 } else { 0.0 };
                assert!((dot(&pca.axes[a], &pca.axes[b]) - want).abs() <= 1e-10);
            }
        }
        assert!(pca.variances.windows(2).all(|w| w[0] >= w[1]));

        let all: Vec<usize> = (0..5).collect();
        let z = pca.project(&x, &all).unwrap();
        for i in 0..x.rows() {
            for j in 0..5 {
                let mut v: f64 = (0..5).map(|a| z[(i, a)] * pca.axes[a][j]).sum();
                if let Some(s) = &pca.scale {
                    v *= s[j];
                }
                assert!((v + pca.mean[j] - x[(i, j)]).abs() <= 1e-10);
            }
        }
        // Score variances are the reported variances.
        for a in 0..5 {
            let col = z.column(a);
            let var = col.iter().map(|v| v * v).sum::<f64>() / (x.rows() - 1) as f64;
            assert!((var - pca.variances[a]).abs() <= 1e-10 * var.max(1.0));
        }
    }
}

#[test]
fn rank_two_data_keeps_all_variance_in_two_axes() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let basis = gaussian(&mut rng, 2, &[1.0; 6]);
    let coef = gaussian(&mut rng, 200, &[2.0, 1.0]);
    let x = coef.matmul(&basis).unwrap();
    let pca = pca_fit(&x, false).unwrap();
    let top2 = pca.variances[0] + pca.variances[1];
    assert!((top2 - pca.total_variance()).abs() <= 1e-10 * top2);
    assert!(pca.variances[2..].iter().all(|v| *v <= 1e-10 * top2));
}

fn labelled(seed: u64, n: usize, shift: f64) -> (Matrix<f64>, Vec<DepthClass>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = gaussian(&mut rng, n, &[1.0, 2.0, 0.5, 1.5]);
    let labels: Vec<DepthClass> = (0..n)
        .map(|i| if i % 3 == 0 { DepthClass::High } else { DepthClass::Low })
        .collect();
    for (i, l) in labels.iter().enumerate() {
        if *l == DepthClass::High {
            x[(i, 2)] += shift;
        }
    }
    (x, labels)
}

#[test]
fn fisher_scores_follow_class_separation() {
    // Equal class means on every axis give a zero score.
    let rows: Vec<[f64; 2]> = vec![
        [1.0, 0.0],
        [-1.0, 0.0],
        [0.0, 2.0],
        [0.0, -2.0],
        [1.0, 2.0],
        [-1.0, -2.0],
        [1.0, -2.0],
        [-1.0, 2.0],
    ];
    let x = Matrix::from_rows(&rows).unwrap();
    let labels = [
        DepthClass::Low,
        DepthClass::Low,
        DepthClass::Low,
        DepthClass::Low,
        DepthClass::High,
        DepthClass::High,
        DepthClass::High,
        DepthClass::High,
    ];
    let pca = pca_fit(&x, false).unwrap();
    let f = fisher_axis_scores(&pca, &x, &labels).unwrap();
    assert!(f.scores.iter().all(|s| s.abs() <= 1e-24), "{:?}", f.scores);

    let (x, labels) = labelled(4, 600, 4.0);
    let pca = pca_fit(&x, true).unwrap();
    let f = fisher_axis_scores(&pca, &x, &labels).unwrap();
    let best = f.scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    assert_eq!(f.scores[f.top2[0]], best);
    assert!(f.scores[f.top2[1]] <= best && f.top2[0] != f.top2[1]);

    // Reordering samples changes nothing.
    let mut order: Vec<usize> = (0..x.rows()).collect();
    order.reverse();
    let xp = Matrix::from_rows(&order.iter().map(|&i| x.row(i).to_vec()).collect::<Vec<_>>()).unwrap();
    let lp: Vec<DepthClass> = order.iter().map(|&i| labels[i]).collect();
    let pp = pca_fit(&xp, true).unwrap();
    let fp = fisher_axis_scores(&pp, &xp, &lp).unwrap();
    assert_eq!(fp.top2, f.top2);
    for (a, b) in fp.scores.iter().zip(&f.scores) {
        assert!((a - b).abs() <= 1e-9 * a.abs().max(1.0));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn standardized_top2_ignores_feature_units(scales in prop::collection::vec(0.01f64..100.0, 4), seed in 0u64..1000) {
        let (x, labels) = labelled(seed, 300, 3.0);
        let f = fisher_axis_scores(&pca_fit(&x, true).unwrap(), &x, &labels).unwrap();
        let mut xs = x.clone();
        for i in 0..xs.rows() {
            for j in 0..4 {
                xs[(i, j)] *= scales[j];
            }
        }
        let fs = fisher_axis_scores(&pca_fit(&xs, true).unwrap(), &xs, &labels).unwrap();
        prop_assert_eq!(fs.top2, f.top2);
    }
}

#[test]
fn pls_direction_maximizes_response_covariance() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let x = gaussian(&mut rng, 400, &[1.0, 0.7, 1.3, 0.4, 1.0, 2.0]);
    let y: Vec<f64> = (0..400)
        .map(|i| {
            0.8 * x[(i, 0)] - 0.5 * x[(i, 2)]
                + 0.3 * x[(i, 5)]
                + 0.2 * Distribution::<f64>::sample(&StandardNormal, &mut rng)
        })
        .collect();
    let pls = pls_fit(&x, &y, 2).unwrap();
    let best = response_covariance(&x, &y, &pls.weights[0]);
    assert!(best > 0.0);
    for _ in 0..1000 {
        let v: Vec<f64> = (0..6).map(|_| rng.random_range(-1.0..1.0)).collect();
        let nv = dot(&v, &v).sqrt();
        let u: Vec<f64> = v.iter().map(|a| a / nv).collect();
        assert!(response_covariance(&x, &y, &u).abs() <= best + 1e-12);
    }
    assert!(pls_fixed_point_residual(&pls, &x, &y) <= 1e-8);

    // Rotations map raw features onto the fitted scores.
    let t = pls.project(&x).unwrap();
    for i in 0..x.rows() {
        for c in 0..2 {
            assert!((t[(i, c)] - pls.scores[(i, c)]).abs() <= 1e-10);
        }
    }
    assert!(dot(&pls.scores.column(0), &pls.scores.column(1)).abs() <= 1e-8);
}

#[test]
fn ellipse_of_an_isotropic_cloud_is_a_circle() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let pts: Vec<[f64; 2]> = (0..10_000)
        .map(|_| [StandardNormal.sample(&mut rng), StandardNormal.sample(&mut rng)])
        .collect();
    let e = fit_ellipse(&pts, DEFAULT_COVERAGE).unwrap();
    assert!(!e.degenerate);
    assert!(e.semi_major / e.semi_minor <= 1.1);
    assert!((e.semi_major / 2.0 - 1.0).abs() < 0.05);

    let moved: Vec<[f64; 2]> = pts.iter().map(|p| [p[0] + 5.0, p[1] - 3.0]).collect();
    let m = fit_ellipse(&moved, DEFAULT_COVERAGE).unwrap();
    assert!((m.center[0] - e.center[0] - 5.0).abs() <= 1e-10 && (m.center[1] - e.center[1] + 3.0).abs() <= 1e-10);
    assert!((m.semi_major - e.semi_major).abs() <= 1e-9 && (m.semi_minor - e.semi_minor).abs() <= 1e-9);

    let line: Vec<[f64; 2]> = (0..10).map(|i| [i as f64, 2.0 * i as f64]).collect();
    let l = fit_ellipse(&line, DEFAULT_COVERAGE).unwrap();
    assert!(l.degenerate && l.semi_minor == 0.0);
    assert!((l.angle - 2f64.atan()).abs() <= 1e-10);
    assert_eq!(overlap_area(&l, &e, 1000, 0), 0.0);

    // Self-overlap is the full area.
    let area = overlap_area(&e, &e, 200_000, 1);
    assert!((area / e.area() - 1.0).abs() < 0.02);
}

proptest! {
    #[test]
    fn gaussian_fit_is_affine_equivariant(values in prop::collection::vec(-50.0f64..50.0, 2..60), a in 0.1f64..20.0, b in -100.0f64..100.0) {
        prop_assume!(values.iter().any(|v| *v != values[0]));
        let g = fit_gaussian_1d(&values).unwrap();
        let mapped: Vec<f64> = values.iter().map(|v| a * v + b).collect();
        let h = fit_gaussian_1d(&mapped).unwrap();
        prop_assert!((h.mu - (a * g.mu + b)).abs() <= 1e-9 * (a * g.mu.abs() + b.abs()).max(1.0));
        prop_assert!((h.sigma - a * g.sigma).abs() <= 1e-9 * (a * g.sigma).max(1.0));
        prop_assert!((h.pdf(a * g.mu + b) * a - g.pdf(g.mu)).abs() <= 1e-9 * g.pdf(g.mu).max(1.0));
    }
}

#[test]
fn mid_group_overlaps_both_neighbours_on_synthetic_data() {
    let ds = generate(&SynthConfig {
        seed: 11,
        ..SynthConfig::default()
    })
    .unwrap();
    let x = ds.feature_matrix();
    let pca = pca_fit(&x, true).unwrap();
    let fisher = fisher_axis_scores(&pca, &x, &ds.labels()).unwrap();
    let z = pca.project(&x, &fisher.top2).unwrap();
    let ellipse = |g: ThicknessGroup| {
        let pts: Vec<[f64; 2]> = ds
            .iter()
            .enumerate()
            .filter(|(_, s)| ThicknessGroup::of(s.thickness().unwrap().value()) == g)
            .map(|(i, _)| [z[(i, 0)], z[(i, 1)]])
            .collect();
        fit_ellipse(&pts, DEFAULT_COVERAGE).unwrap()
    };
    let [low, mid, high] = ThicknessGroup::ALL.map(ellipse);
    assert!(overlap_area(&mid, &low, 100_000, 2) > 0.0);
    assert!(overlap_area(&mid, &high, 100_000, 3) > 0.0);
}
