use breslow_core::optim::{sf_adam_init, AdamConfig, AdamState, OptimError, SfAdamState};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Independent transcription of schedule-free Adam.
struct Reference {
    z: Vec<f64>,
    x: Vec<f64>,
    v: Vec<f64>,
    t: u32,
}

impl Reference {
    fn new(p: &[f64]) -> Self {
        Self {
            z: p.to_vec(),
            x: p.to_vec(),
            v: vec![0.0; p.len()],
            t: 0,
        }
    }

    fn step(&mut self, lr: f64, b1: f64, b2: f64, eps: f64, grad: impl Fn(&[f64]) -> Vec<f64>) {
        let y: Vec<f64> = self
            .z
            .iter()
            .zip(&self.x)
            .map(|(z, x)| (1.0 - b1) * z + b1 * x)
            .collect();
        let g = grad(&y);
        self.t += 1;
        let c = 1.0 / self.t as f64;
        for i in 0..self.z.len() {
            self.v[i] = b2 * self.v[i] + (1.0 - b2) * g[i] * g[i];
            let vhat = self.v[i] / (1.0 - b2.powi(self.t as i32));
            self.z[i] -= lr * g[i] / (vhat.sqrt() + eps);
            self.x[i] = (1.0 - c) * self.x[i] + c * self.z[i];
        }
    }
}

fn bowl(p: &[f64]) -> Vec<f64> {
    p.iter().map(|w| 2.0 * w).collect()
}

fn start(seed: u64, n: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let v: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let nv = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.into_iter().map(|x| x / nv).collect()
}

fn cfg(lr: f64) -> AdamConfig<f64> {
    AdamConfig {
        lr,
        ..AdamConfig::default()
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

#[test]
fn schedule_free_reaches_optimum_and_matches_reference() {
    let w0 = start(1, 10);
    let mut s = sf_adam_init(&w0, cfg(0.05)).unwrap();
    let mut r = Reference::new(&w0);
    let mut reached = None;
    for k in 1..=2000 {
        s.step(bowl).unwrap();
        r.step(0.05, 0.9, 0.999, 1e-8, bowl);
        for (a, b) in [(s.base(), &r.z), (s.eval_point(), &r.x), (s.second_moment(), &r.v)] {
            for (p, q) in a.iter().zip(b.iter()) {
                assert!((p - q).abs() <= 1e-10, "step {k}: {p} vs {q}");
            }
        }
        if reached.is_none() && norm(s.eval_point()) <= 1e-4 {
            reached = Some(k);
        }
    }
    assert!(reached.is_some(), "final |x| = {}", norm(s.eval_point()));
}

#[test]
fn averaging_telescopes_to_mean_of_base_iterates() {
    let w0 = start(2, 5);
    let mut s = sf_adam_init(
        &w0,
        AdamConfig {
            beta1: 0.5,
            ..cfg(0.02)
        },
    )
    .unwrap();
    let mut sum = vec![0.0; 5];
    for t in 1..=300 {
        s.step(|p| p.iter().map(|w| 2.0 * w + w.sin()).collect()).unwrap();
        sum.iter_mut().zip(s.base()).for_each(|(a, z)| *a += z);
        for (x, a) in s.eval_point().iter().zip(&sum) {
            assert!((x - a / t as f64).abs() <= 1e-10);
        }
    }
}

#[test]
fn zero_beta1_queries_the_base_point() {
    let mut s = sf_adam_init(&start(3, 4), AdamConfig { beta1: 0.0, ..cfg(0.1) }).unwrap();
    for _ in 0..20 {
        let z = s.base().to_vec();
        s.step(|y| {
            assert_eq!(y, z.as_slice());
            bowl(y)
        })
        .unwrap();
    }
}

#[test]
fn both_optimizers_descend_after_burn_in() {
    let w0 = start(4, 10);
    let f = |p: &[f64]| p.iter().map(|w| w * w).sum::<f64>();
    let mut sf = sf_adam_init(&w0, cfg(0.002)).unwrap();
    let mut adam = AdamState::new(&w0, cfg(0.002)).unwrap();
    let (mut prev_sf, mut prev_adam) = (f64::INFINITY, f64::INFINITY);
    let mut differ = false;
    for k in 0..300 {
        sf.step(bowl).unwrap();
        adam.step(bowl).unwrap();
        differ |= sf.eval_point() != adam.eval_point();
        let (l_sf, l_adam) = (f(sf.eval_point()), f(adam.eval_point()));
        if k >= 50 {
            assert!(l_sf < prev_sf, "schedule-free rose at step {k}");
            assert!(l_adam < prev_adam, "adam rose at step {k}");
        }
        prev_sf = l_sf;
        prev_adam = l_adam;
    }
    assert!(differ);
}

#[test]
fn rejected_step_reports_and_keeps_state() {
    let mut s = sf_adam_init(&[1.0, -2.0], cfg(1e-3)).unwrap();
    s.step(bowl).unwrap();
    let before = s.clone();
    let err = s.step(|_| vec![1.0, f64::INFINITY]).unwrap_err();
    assert_eq!(err, OptimError::NonFiniteGradient { index: 1 });
    assert_eq!(s, before);
    assert!(sf_adam_init(&[1.0], cfg(0.0)).is_err());
}

proptest! {
    #[test]
    fn same_gradients_same_state(seed in any::<u64>(), steps in 1usize..40) {
        let w0 = start(seed, 6);
        let run = || {
            let mut s: SfAdamState<f64> = sf_adam_init(&w0, cfg(0.03)).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for _ in 0..steps {
                let noise: Vec<f64> = (0..6).map(|_| rng.random_range(-0.1..0.1)).collect();
                s.step(|p| p.iter().zip(&noise).map(|(w, e)| 2.0 * w + e).collect()).unwrap();
            }
            s
        };
        let (a, b) = (run(), run());
        prop_assert_eq!(a.eval_point().iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
                        b.eval_point().iter().map(|v| v.to_bits()).collect::<Vec<_>>());
        prop_assert_eq!(a, b);
    }
}
