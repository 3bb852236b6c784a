#![allow(dead_code)]

use breslow_core::data::{Dataset, DepthClass, Sample};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

/// Two Gaussian clusters at `±2.5·u` with isotropic noise 0.25, twenty
/// standard deviations apart along `u`. One in four samples is High.
pub fn separable_clusters(seed: u64, n: usize, dim: usize) -> Dataset {
    clusters(seed, n, dim, 0.25)
}

pub fn clusters(seed: u64, n: usize, dim: usize, noise: f64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let u: Vec<f64> = {
        let v: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect();
        let nv = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        v.into_iter().map(|x| x / nv).collect()
    };
    let samples = (0..n)
        .map(|i| {
            let label = if i % 4 == 0 { DepthClass::High } else { DepthClass::Low };
            let sign = if label == DepthClass::High { 2.5 } else { -2.5 };
            let features = u
                .iter()
                .map(|&uj| {
                    let e: f64 = StandardNormal.sample(&mut rng);
                    sign * uj + noise * e
                })
                .collect();
            Sample::new(format!("c/{i}"), "c", features, None, label).unwrap()
        })
        .collect();
    Dataset::new(dim, samples).unwrap()
}

/// Logistic regression by full-batch gradient descent on standardized
/// features; returns held-out accuracy.
pub fn logistic_oracle_accuracy(train: &Dataset, test: &Dataset) -> f64 {
    let d = train.dim();
    let n = train.len() as f64;
    let mut mean = vec![0.0; d];
    let mut sd = vec![0.0; d];
    for s in train.iter() {
        for j in 0..d {
            mean[j] += s.features()[j] / n;
        }
    }
    for s in train.iter() {
        for j in 0..d {
            sd[j] += (s.features()[j] - mean[j]).powi(2) / n;
        }
    }
    let sd: Vec<f64> = sd.into_iter().map(|v| if v > 0.0 { v.sqrt() } else { 1.0 }).collect();
    let z = |x: &[f64]| -> Vec<f64> { (0..d).map(|j| (x[j] - mean[j]) / sd[j]).collect() };
    let xs: Vec<Vec<f64>> = train.iter().map(|s| z(s.features())).collect();
    let ys: Vec<f64> = train
        .iter()
        .map(|s| (s.label() == DepthClass::High) as u8 as f64)
        .collect();
    let mut w = vec![0.0; d];
    let mut b = 0.0;
    for _ in 0..500 {
        let mut gw = vec![0.0; d];
        let mut gb = 0.0;
        for (x, y) in xs.iter().zip(&ys) {
            let a: f64 = b + x.iter().zip(&w).map(|(xi, wi)| xi * wi).sum::<f64>();
            let r = 1.0 / (1.0 + (-a).exp()) - y;
            gb += r / n;
            for j in 0..d {
                gw[j] += r * x[j] / n;
            }
        }
        b -= 0.5 * gb;
        for j in 0..d {
            w[j] -= 0.5 * (gw[j] + 1e-4 * w[j]);
        }
    }
    let correct = test
        .iter()
        .filter(|s| {
            let x = z(s.features());
            let a: f64 = b + x.iter().zip(&w).map(|(xi, wi)| xi * wi).sum::<f64>();
            (a >= 0.0) == (s.label() == DepthClass::High)
        })
        .count();
    correct as f64 / test.len() as f64
}

pub fn accuracy(ds: &Dataset, p_high: &[f64]) -> f64 {
    let hits = ds
        .iter()
        .zip(p_high)
        .filter(|(s, p)| (**p >= 0.5) == (s.label() == DepthClass::High))
        .count();
    hits as f64 / ds.len() as f64
}
