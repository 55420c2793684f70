use approx::assert_relative_eq;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sfplus_core::baselines::{adam_step, AdamConfig, AdamState, DecayMode};
use sfplus_core::sf::{anneal_beta, averaging_coeff, polyak_scalar, DecayCoupling, PolyakInput};
use sfplus_core::{sf_step, HyperConfig, ParamVector, SfState, StepRule};

fn random_grads(seed: u64, steps: usize, dim: usize) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..steps)
        .map(|_| (0..dim).map(|_| rng.random_range(-2.0..2.0)).collect())
        .collect()
}

/// Textbook Adam with decay `decay(lr) * z`, written out independently.
fn reference_adam(theta0: &[f64], grads: &[Vec<f64>], lr: f64, b1: f64, b2: f64, eps: f64, decay: f64) -> Vec<Vec<f64>> {
    let mut z = theta0.to_vec();
    let mut m = vec![0.0; z.len()];
    let mut v = vec![0.0; z.len()];
    let mut out = Vec::new();
    for (k, g) in grads.iter().enumerate() {
        let t = (k + 1) as i32;
        for i in 0..z.len() {
            m[i] = b1 * m[i] + (1.0 - b1) * g[i];
            v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
            let m_hat = m[i] / (1.0 - b1.powi(t));
            let v_hat = v[i] / (1.0 - b2.powi(t));
            z[i] = z[i] - decay * z[i] - lr * m_hat / (v_hat.sqrt() + eps);
        }
        out.push(z.clone());
    }
    out
}

fn assert_close(a: &[f64], b: &[f64], tol: f64) {
    for (x, y) in a.iter().zip(b) {
        assert!((x - y).abs() <= tol * (1.0 + y.abs()), "{x} vs {y}");
    }
}

fn pure_z_config(lr: f64) -> HyperConfig {
    HyperConfig {
        step_rule: StepRule::Fixed { lr },
        sf_beta: 0.0,
        sf_beta_max: 0.0,
        c_warmup: u64::MAX,
        ..HyperConfig::default()
    }
}

#[test]
fn golden_one_dimensional_first_step() {
    let cfg = HyperConfig {
        beta1: 0.0,
        beta2: 0.0,
        warmup_steps: 1,
        p: 0.0,
        ..HyperConfig::default()
    };
    let mut state = SfState::new(ParamVector::from_vec(vec![1.0]), &cfg);
    let d = sf_step(&mut state, &cfg, &[1.0], 0.5).unwrap();
    let sqrt_half_pi = (std::f64::consts::PI / 2.0).sqrt();
    let eta = 0.5 / sqrt_half_pi;
    assert!((d.l1_norm - 1.0).abs() < 1e-15);
    assert!((d.eta - eta).abs() < 1e-12);
    assert!((d.eta - 0.398_942_280_401_432_7).abs() < 1e-12);
    let z1 = 1.0 - eta / (1.0 + cfg.eps);
    assert!((state.z[0] - z1).abs() < 1e-12);
    assert!((state.z[0] - 0.601_057_719_6).abs() < 1e-8);
    // single step of averaging copies z into x, so all three coincide
    assert_eq!(d.c, 1.0);
    assert_eq!(state.x[0], state.z[0]);
    assert_eq!(state.y[0], state.z[0]);
}

#[test]
fn pure_z_reduces_to_textbook_adam() {
    let theta0: Vec<f64> = (0..7).map(|i| 0.3 * i as f64 - 1.0).collect();
    let grads = random_grads(11, 100, 7);
    for (b1, lr) in [(0.9, 0.05), (0.0, 0.2), (0.5, 1e-3)] {
        let cfg = HyperConfig {
            beta1: b1,
            ..pure_z_config(lr)
        };
        let expected = reference_adam(&theta0, &grads, lr, b1, cfg.beta2, cfg.eps, 0.0);
        let mut state = SfState::new(ParamVector::from_vec(theta0.clone()), &cfg);
        for (g, want) in grads.iter().zip(&expected) {
            let d = sf_step(&mut state, &cfg, g, 1.0).unwrap();
            assert_eq!(d.c, 1.0);
            assert_close(&state.z, want, 1e-12);
            assert_eq!(&state.y[..], &state.z[..]);
        }
    }
}

#[test]
fn pure_z_with_decay_matches_fully_decoupled_adamc() {
    let theta0 = vec![1.0, -2.0, 0.5, 3.0];
    let grads = random_grads(5, 100, 4);
    let lr = 0.1;
    let lambda = 0.7;
    let cfg = HyperConfig {
        weight_decay: lambda,
        ..pure_z_config(lr)
    };
    let expected = reference_adam(&theta0, &grads, lr, cfg.beta1, cfg.beta2, cfg.eps, lr * lr * lambda);
    let mut state = SfState::new(ParamVector::from_vec(theta0.clone()), &cfg);
    let acfg = AdamConfig {
        weight_decay: lambda,
        mode: DecayMode::AdamCFull,
        ..AdamConfig::default()
    };
    let mut adam = AdamState::new(ParamVector::from_vec(theta0));
    for (g, want) in grads.iter().zip(&expected) {
        sf_step(&mut state, &cfg, g, 1.0).unwrap();
        adam_step(&mut adam, &acfg, lr, g, 1.0).unwrap();
        assert_close(&state.z, want, 1e-12);
        assert_close(&adam.z, want, 1e-12);
    }
}

#[test]
fn zero_decay_collapses_couplings() {
    let theta0 = vec![0.2, -0.4, 1.5];
    let grads = random_grads(9, 100, 3);
    let base = HyperConfig {
        step_rule: StepRule::Fixed { lr: 0.05 },
        weight_decay: 0.0,
        ..HyperConfig::default()
    };
    let run = |coupling| {
        let cfg = HyperConfig {
            decay_coupling: coupling,
            ..base.clone()
        };
        let mut s = SfState::new(ParamVector::from_vec(theta0.clone()), &cfg);
        for g in &grads {
            sf_step(&mut s, &cfg, g, 1.0).unwrap();
        }
        s
    };
    let full = run(DecayCoupling::FullyDecoupled);
    let plain = run(DecayCoupling::Decoupled);
    assert_close(&full.x, &plain.x, 1e-12);
    assert_close(&full.z, &plain.z, 1e-12);

    let lrs: Vec<f64> = (1..=100).map(|t| 0.1 / (t as f64).sqrt()).collect();
    let adam = |mode| {
        let cfg = AdamConfig {
            mode,
            ..AdamConfig::default()
        };
        let mut s = AdamState::new(ParamVector::from_vec(theta0.clone()));
        for (g, lr) in grads.iter().zip(&lrs) {
            adam_step(&mut s, &cfg, *lr, g, 1.0).unwrap();
        }
        s.z
    };
    let w = adam(DecayMode::AdamW);
    assert_close(&adam(DecayMode::AdamCCoupled), &w, 1e-12);
    assert_close(&adam(DecayMode::AdamCFull), &w, 1e-12);
}

fn streaming_identity(r: f64, p: f64, steps: usize, seed: u64) {
    let dim = 5;
    let cfg = HyperConfig {
        step_rule: StepRule::InverseL1 { lr: 0.1 },
        warmup_steps: 37,
        r,
        p,
        ..HyperConfig::default()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut state = SfState::new(ParamVector::zeros(dim), &cfg);
    let mut num = vec![0.0; dim];
    let mut den = 0.0;
    let mut gamma_max = 0.0_f64;
    for _ in 0..steps {
        // gradient scale varies wildly so that alpha and gamma_max do too
        let scale = 10f64.powf(rng.random_range(-2.0..2.0));
        let g: Vec<f64> = (0..dim).map(|_| scale * rng.random_range(-1.0..1.0)).collect();
        let d = sf_step(&mut state, &cfg, &g, 1.0).unwrap();
        gamma_max = gamma_max.max(d.alpha).max(cfg.eps);
        let w = (d.step as f64).powf(r) * gamma_max.powf(p);
        assert_relative_eq!(d.w, w, max_relative = 1e-12);
        den += w;
        for i in 0..dim {
            num[i] += w * state.z[i];
        }
    }
    for i in 0..dim {
        assert_relative_eq!(state.x[i], num[i] / den, max_relative = 1e-9, epsilon = 1e-300);
    }
}

#[test]
fn streaming_average_equals_weighted_mean() {
    for (k, (r, p)) in [(0.0, 0.0), (0.0, 2.0), (1.0, 0.0), (1.0, 2.0)].into_iter().enumerate() {
        for steps in [1, 10, 257, 1000] {
            streaming_identity(r, p, steps, 100 + k as u64);
        }
    }
}

#[test]
fn uniform_weights_track_the_arithmetic_mean() {
    let cfg = HyperConfig {
        r: 0.0,
        p: 0.0,
        ..HyperConfig::default()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let zs: Vec<f64> = (0..10).map(|_| rng.random_range(-5.0..5.0)).collect();
    let mut sum = 0.0;
    let mut x = 0.0;
    for (t, z) in zs.iter().enumerate() {
        let a = averaging_coeff(&cfg, t as u64 + 1, 1.0, 0.9, &mut sum);
        assert_relative_eq!(a.c, 1.0 / (t as f64 + 1.0), max_relative = 1e-15);
        x = (1.0 - a.c) * x + a.c * z;
    }
    let mean = zs.iter().sum::<f64>() / zs.len() as f64;
    assert_relative_eq!(x, mean, max_relative = 1e-12);
}

#[test]
fn anneal_midpoint_oracle() {
    let cfg = HyperConfig {
        sf_beta: 0.8,
        sf_beta_max: 0.965,
        anneal_steps: 100,
        ..HyperConfig::default()
    };
    let expected = 1.0 - (0.2f64 * 0.035).sqrt();
    assert_relative_eq!(anneal_beta(&cfg, 50), expected, max_relative = 1e-14);
    assert!((anneal_beta(&cfg, 50) - 0.916_334).abs() < 1e-6);
    assert_eq!(anneal_beta(&cfg, 100), 0.965);
    assert_eq!(anneal_beta(&cfg, 10_000), 0.965);
}

#[test]
fn polyak_worked_examples() {
    let cfg = HyperConfig::default();
    let input = |loss, l1_norm, inner_correction| PolyakInput {
        step: 1,
        loss,
        l1_norm,
        inner_correction,
    };
    // four entries of 0.5: L1 = 2
    let out = polyak_scalar(&cfg, 0.0, 0.0, input(1.0, 2.0, 0.0)).unwrap();
    let sqrt_half_pi = (std::f64::consts::PI / 2.0).sqrt();
    assert_relative_eq!(out.l1_ema, 0.1 * 2.0 * sqrt_half_pi, max_relative = 1e-15);
    assert_relative_eq!(out.eta, 1.0 / (2.0 * sqrt_half_pi), max_relative = 1e-14);
    assert_eq!(polyak_scalar(&cfg, 0.0, 0.0, input(0.0, 2.0, 0.0)).unwrap().eta, 0.0);
    assert_eq!(polyak_scalar(&cfg, 0.0, 0.0, input(-0.5, 2.0, 0.2)).unwrap().eta, 0.0);
}

#[test]
fn deterministic_quadratic_converges_under_the_default_config() {
    use sfplus_core::problems::{Problem, Quadratic};
    let problem = Quadratic::new(100, 100.0, 0.0);
    let cfg = HyperConfig {
        warmup_steps: 100,
        c_warmup: 200,
        ..HyperConfig::default()
    };
    let theta0 = problem.initial_point(0);
    let initial = problem.loss(&theta0);
    let mut state = SfState::new(ParamVector::from_vec(theta0), &cfg);
    let mut reached = None;
    for t in 1..=5000u64 {
        let s = problem.full_oracle(&state.y);
        sf_step(&mut state, &cfg, &s.grad, s.loss).unwrap();
        if problem.loss(&state.x) <= 1e-6 * initial {
            reached = Some(t);
            break;
        }
    }
    assert!(reached.is_some(), "loss at x stayed above 1e-6 of the initial loss");
}

fn arb_config() -> impl Strategy<Value = HyperConfig> {
    (
        0.0..0.99f64,
        0.0..0.99f64,
        0u64..50,
        0u64..20,
        prop_oneof![Just(0.0), Just(1.0)],
        prop_oneof![Just(0.0), Just(2.0)],
        prop_oneof![
            Just(StepRule::Polyak),
            (1e-3..1.0f64).prop_map(|lr| StepRule::Fixed { lr }),
            (1e-3..1.0f64).prop_map(|lr| StepRule::InverseL1 { lr })
        ],
    )
        .prop_map(|(b0, b1, anneal, c_warmup, r, p, step_rule)| HyperConfig {
            step_rule,
            sf_beta: b0.min(b1),
            sf_beta_max: b0.max(b1),
            anneal_steps: anneal,
            c_warmup,
            warmup_steps: 5,
            r,
            p,
            weight_decay: 0.1,
            ..HyperConfig::default()
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn step_invariants(cfg in arb_config(), seed in 0u64..1000) {
        let dim = 4;
        let grads = random_grads(seed, 60, dim);
        let mut state = SfState::new(ParamVector::from_vec(vec![1.0, -1.0, 0.5, 2.0]), &cfg);
        let mut prev_beta = 0.0;
        let mut prev_gamma = state.gamma_max;
        let mut prev_w = state.weight_sum;
        for g in &grads {
            let loss = 0.5 * state.y.iter().map(|v| v * v).sum::<f64>();
            let d = sf_step(&mut state, &cfg, g, loss).unwrap();
            for i in 0..dim {
                let (lo, hi) = (state.x[i].min(state.z[i]), state.x[i].max(state.z[i]));
                prop_assert!(lo <= state.y[i] && state.y[i] <= hi);
            }
            prop_assert!(d.beta_tilde >= prev_beta);
            prop_assert!(state.gamma_max >= prev_gamma);
            prop_assert!(state.weight_sum >= prev_w);
            prop_assert!(state.l1_ema >= 0.0);
            prop_assert!(d.eta >= 0.0);
            prop_assert!(d.c > 0.0 && d.c <= 1.0);
            prev_beta = d.beta_tilde;
            prev_gamma = state.gamma_max;
            prev_w = state.weight_sum;
        }
    }

    #[test]
    fn constant_l1_gives_exact_corrected_ema(s in 1e-3..1e3f64, steps in 1u64..200) {
        let cfg = HyperConfig::default();
        let mut e = 0.0;
        for t in 1..=steps {
            let out = polyak_scalar(&cfg, e, 0.0, PolyakInput { step: t, loss: 1.0, l1_norm: s, inner_correction: 0.0 }).unwrap();
            e = out.l1_ema;
            let expected = s * (std::f64::consts::PI / 2.0).sqrt();
            prop_assert!((out.l1_ema_hat - expected).abs() <= 1e-12 * expected);
        }
    }
}
