use breslow_core::regression::{
    bin_stats, polyfit, r_squared, residual_orthogonality, segment_r2, segment_r2_refit, RegressionError,
    ThicknessPrediction, SEGMENT_BOUNDS,
};
use proptest::prelude::*;

fn tp(thickness: f64, p_high: f64) -> ThicknessPrediction<f64> {
    ThicknessPrediction { thickness, p_high }
}

fn points_strategy() -> impl Strategy<Value = Vec<ThicknessPrediction<f64>>> {
    prop::collection::vec((0.0f64..6.0, 0.0f64..1.0), 8..120)
        .prop_map(|v| {
            v.into_iter()
                .map(|(t, p)| tp((t * 1000.0).round() / 1000.0, p))
                .collect()
        })
        .prop_filter(
            "needs four distinct thicknesses and response variance",
            |pts: &Vec<_>| {
                let mut t: Vec<f64> = pts.iter().map(|p: &ThicknessPrediction<f64>| p.thickness).collect();
                t.sort_by(f64::total_cmp);
                t.dedup();
                let p0 = pts[0].p_high;
                t.len() >= 4 && pts.iter().any(|p| p.p_high != p0)
            },
        )
}

fn close(a: Option<f64>, b: Option<f64>, tol: f64) -> bool {
    match (a, b) {
        (Some(x), Some(y)) => (x - y).abs() <= tol,
        (None, None) => true,
        _ => false,
    }
}

proptest! {
    #[test]
    fn higher_degree_never_explains_less(pts in points_strategy()) {
        let r: Vec<f64> = (1..=3).map(|d| polyfit(&pts, d).unwrap().r2_overall).collect();
        prop_assert!(r[0] <= r[1] + 1e-12 && r[1] <= r[2] + 1e-12, "{:?}", r);
        prop_assert!(r.iter().all(|v| *v <= 1.0 + 1e-12));
    }

    #[test]
    fn residuals_are_orthogonal_to_the_design(pts in points_strategy(), degree in 1usize..=3) {
        let fit = polyfit(&pts, degree).unwrap();
        prop_assert!(residual_orthogonality(&pts, &fit) <= 1e-8);
    }

    #[test]
    fn r2_ignores_the_thickness_unit(pts in points_strategy(), degree in 1usize..=3) {
        let um: Vec<_> = pts.iter().map(|p| tp(p.thickness * 1000.0, p.p_high)).collect();
        let a = polyfit(&pts, degree).unwrap();
        let b = polyfit(&um, degree).unwrap();
        prop_assert!((a.r2_overall - b.r2_overall).abs() <= 1e-10);
        let bounds_um = SEGMENT_BOUNDS.map(|v| v * 1000.0);
        let (sa, sb) = (segment_r2(&pts, &a, SEGMENT_BOUNDS), segment_r2(&um, &b, bounds_um));
        let (ra, rb) = (segment_r2_refit(&pts, degree, SEGMENT_BOUNDS), segment_r2_refit(&um, degree, bounds_um));
        for i in 0..3 {
            let scale = sa[i].map_or(1.0, |v: f64| v.abs().max(1.0));
            prop_assert!(close(sa[i], sb[i], 1e-10 * scale), "{:?} {:?}", sa[i], sb[i]);
            prop_assert!(close(ra[i], rb[i], 1e-10));
        }
    }

    #[test]
    fn bins_reconstruct_the_global_mean(pts in points_strategy()) {
        let stats = bin_stats(&pts, 0.1).unwrap();
        let n: usize = stats.bins.iter().map(|b| b.count).sum();
        prop_assert_eq!(n, pts.len());
        let weighted = stats.bins.iter().map(|b| b.mean * b.count as f64).sum::<f64>() / n as f64;
        let global = pts.iter().map(|p| p.p_high).sum::<f64>() / pts.len() as f64;
        prop_assert!((weighted - global).abs() <= 1e-12);
        for w in stats.bins.windows(2) {
            prop_assert!(w[0].hi <= w[1].lo + 1e-12);
        }
        for b in &stats.bins {
            prop_assert!(b.std >= 0.0);
        }
    }
}

#[test]
fn exact_line_and_constant_response() {
    let line: Vec<_> = (0..10)
        .map(|i| tp(i as f64 * 0.3, 0.1 * i as f64 * 0.3 + 0.2))
        .collect();
    let fit = polyfit(&line, 1).unwrap();
    assert!((fit.coefficients[0] - 0.2).abs() < 1e-10 && (fit.coefficients[1] - 0.1).abs() < 1e-10);
    assert!((fit.r2_overall - 1.0).abs() < 1e-12);

    let flat: Vec<_> = (0..10).map(|i| tp(i as f64, 0.4)).collect();
    let fit = polyfit(&flat, 1).unwrap();
    assert!(fit.coefficients[1].abs() < 1e-12);
    assert_eq!(fit.r2_overall, 0.0);
    assert!(matches!(r_squared(&flat, &fit), Err(RegressionError::ZeroVariance)));
}

#[test]
fn restricting_the_global_fit_can_lower_r2() {
    // Linear trend overall, flat noise inside the middle segment.
    let mut pts = Vec::new();
    for i in 0..40 {
        let t = i as f64 * 0.05;
        let p = if (0.4..1.0).contains(&t) {
            0.5 + if i % 2 == 0 { 0.05 } else { -0.05 }
        } else {
            t / 2.0
        };
        pts.push(tp(t, p));
    }
    let fit = polyfit(&pts, 1).unwrap();
    let seg = segment_r2(&pts, &fit, SEGMENT_BOUNDS);
    assert!(seg[1].unwrap() < fit.r2_overall);
    let only_low: Vec<_> = pts.iter().copied().filter(|p| p.thickness < 0.4).collect();
    let s = segment_r2(&only_low, &polyfit(&only_low, 1).unwrap(), SEGMENT_BOUNDS);
    assert!(s[0].is_some() && s[1].is_none() && s[2].is_none());
}
