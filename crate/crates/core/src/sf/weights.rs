//! Interpolation (beta) annealing and the averaging coefficient `c_t`.

use super::config::HyperConfig;

/// Anneal progress `tau_t = min(t / T_anneal, 1)`; 0 when annealing is off.
pub fn anneal_progress(cfg: &HyperConfig, t: u64) -> f64 {
    if cfg.anneal_steps == 0 {
        0.0
    } else {
        (t as f64 / cfg.anneal_steps as f64).min(1.0)
    }
}

/// Log-linear interpolation of `1 - beta` from `sf_beta` to `sf_beta_max`.
pub fn anneal_beta(cfg: &HyperConfig, t: u64) -> f64 {
    if cfg.anneal_steps == 0 {
        return cfg.sf_beta;
    }
    beta_at_progress(cfg.sf_beta, cfg.sf_beta_max, anneal_progress(cfg, t))
}

/// `1 - exp((1 - tau) ln(1 - start) + tau ln(1 - end))`, exact at both endpoints.
pub fn beta_at_progress(start: f64, end: f64, tau: f64) -> f64 {
    if tau <= 0.0 {
        return start;
    }
    if tau >= 1.0 {
        return end;
    }
    1.0 - libm::exp((1.0 - tau) * libm::log(1.0 - start) + tau * libm::log(1.0 - end))
}

/// Result of [`averaging_coeff`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Averaging {
    pub c: f64,
    /// Weight added to the running sum on this step (0 when none was added).
    pub w: f64,
}

/// Averaging coefficient for step `t`.
///
/// `gamma_max` must already include this step's effective learning rate.
/// `weight_sum` is only advanced on weighted-average steps.
pub fn averaging_coeff(
    cfg: &HyperConfig,
    t: u64,
    gamma_max: f64,
    beta_tilde: f64,
    weight_sum: &mut f64,
) -> Averaging {
    if t <= cfg.c_warmup {
        return Averaging { c: 1.0, w: 0.0 };
    }
    if let Some(refine) = cfg.refinement_c {
        let c = ((1.0 - beta_tilde) * refine / (t as f64 + 1.0)).min(1.0);
        return Averaging { c, w: 0.0 };
    }
    let w = libm::pow(t as f64, cfg.r) * libm::pow(gamma_max, cfg.p);
    *weight_sum += w;
    Averaging {
        c: w / *weight_sum,
        w,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn anneal_cfg(start: f64, end: f64, steps: u64) -> HyperConfig {
        HyperConfig {
            sf_beta: start,
            sf_beta_max: end,
            anneal_steps: steps,
            ..HyperConfig::default()
        }
    }

    #[test]
    fn anneal_endpoints_are_exact() {
        assert_eq!(beta_at_progress(0.9, 0.965, 0.0), 0.9);
        assert_eq!(beta_at_progress(0.9, 0.965, 1.0), 0.965);
        let cfg = anneal_cfg(0.9, 0.965, 100);
        assert_eq!(anneal_beta(&cfg, 100), 0.965);
        assert_eq!(anneal_beta(&cfg, 10_000), 0.965);
    }

    #[test]
    fn anneal_midpoint() {
        // 1 - sqrt(0.2 * 0.035) = 1 - sqrt(0.007)
        let expected = 1.0 - 0.083_666_002_653_407_55;
        let got = beta_at_progress(0.8, 0.965, 0.5);
        assert!((got - expected).abs() < 1e-14, "{got}");
        let cfg = anneal_cfg(0.8, 0.965, 100);
        assert!((anneal_beta(&cfg, 50) - expected).abs() < 1e-14);
    }

    #[test]
    fn anneal_disabled_returns_base() {
        let cfg = anneal_cfg(0.9, 0.965, 0);
        assert_eq!(anneal_beta(&cfg, 1), 0.9);
        assert_eq!(anneal_beta(&cfg, 1_000_000), 0.9);
        assert_eq!(anneal_progress(&cfg, 5), 0.0);
    }

    #[test]
    fn c_warmup_forces_copy() {
        let cfg = HyperConfig {
            c_warmup: 5,
            ..HyperConfig::default()
        };
        let mut sum = 0.0;
        let avg = averaging_coeff(&cfg, 3, 1.0, 0.9, &mut sum);
        assert_eq!(avg.c, 1.0);
        assert_eq!(sum, 0.0);
        // first averaged step restarts the sum, so c = 1 again
        let avg = averaging_coeff(&cfg, 6, 1.0, 0.9, &mut sum);
        assert_eq!(avg.c, 1.0);
        assert!(sum > 0.0);
    }

    #[test]
    fn uniform_weights_give_one_over_t() {
        let cfg = HyperConfig {
            r: 0.0,
            p: 0.0,
            ..HyperConfig::default()
        };
        let mut sum = 0.0;
        for t in 1..=50u64 {
            let avg = averaging_coeff(&cfg, t, 0.3, 0.9, &mut sum);
            assert!((avg.c - 1.0 / t as f64).abs() < 1e-15);
        }
    }

    #[test]
    fn linear_weights_closed_form() {
        let cfg = HyperConfig {
            r: 1.0,
            p: 0.0,
            ..HyperConfig::default()
        };
        let mut sum = 0.0;
        for t in 1..=200u64 {
            let tf = t as f64;
            let avg = averaging_coeff(&cfg, t, 0.3, 0.9, &mut sum);
            assert_eq!(avg.w, tf);
            assert!((sum - tf * (tf + 1.0) / 2.0).abs() < 1e-9);
            assert!((avg.c - 2.0 / (tf + 1.0)).abs() < 1e-14);
        }
    }

    #[test]
    fn refinement_caps_at_one() {
        let cfg = HyperConfig {
            refinement_c: Some(50.0),
            ..HyperConfig::default()
        };
        let mut sum = 0.0;
        assert_eq!(averaging_coeff(&cfg, 1, 1.0, 0.9, &mut sum).c, 1.0);
        let late = averaging_coeff(&cfg, 999, 1.0, 0.9, &mut sum);
        assert!((late.c - 0.1 * 50.0 / 1000.0).abs() < 1e-15);
        assert_eq!(sum, 0.0);
    }
}
