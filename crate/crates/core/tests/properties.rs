use std::f64::consts::PI;

use micromacro::exec::Execution;
use micromacro::fock::{
    coherent_state, displacement_operator, loss_channel, suggested_n_max, DensityOperator, TruncatedState,
};
use micromacro::hom::TemporalProfiles;
use micromacro::macro_size::{guessing_probability, macro_components_auto};
use micromacro::memory::{back_displacement_residual, memory_pass, visibility_from_errors, MemoryParams, PulseTrain};
use micromacro::noise::{no_leak_prob, no_leak_prob_series, noise_click_prob, noise_click_prob_series, werner_witnesses};
use micromacro::polarization::{
    chsh_maximum, chsh_value, concurrence, ppt_min_eigenvalue, simulate_tomography, tomography_settings,
    werner_state, ChshSettings, MeasurementSetting, TwoQubitDensity,
};
use micromacro::spdc::{joint_probabilities, DetailedParams};
use micromacro::C64;
use nalgebra::{DMatrix, Matrix4, Vector3};
use proptest::prelude::*;

fn random_state(re: &[f64], im: &[f64]) -> TwoQubitDensity {
    let a = Matrix4::from_fn(|i, j| C64::new(re[4 * i + j], im[4 * i + j]));
    let m = a * a.adjoint();
    let tr = m.trace().re;
    TwoQubitDensity::new(m / C64::new(tr, 0.0)).unwrap()
}

fn setting(theta: f64, phi: f64) -> MeasurementSetting {
    MeasurementSetting::direction(Vector3::new(theta.sin() * phi.cos(), theta.sin() * phi.sin(), theta.cos())).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn displacement_inverse(re in -3.0..3.0f64, im in -3.0..3.0f64) {
        let a = C64::new(re, im);
        let n = suggested_n_max(a.norm_sqr());
        let d = displacement_operator(a, n).unwrap() * displacement_operator(-a, n).unwrap();
        let err = (d - DMatrix::<C64>::identity(n + 1, n + 1)).norm();
        prop_assert!(err < 1e-10, "{}", err);
    }

    #[test]
    fn displaced_single_photon_closed_form(a in 0.0..3.0f64) {
        let n_max = suggested_n_max(a * a + 1.0) + 20;
        let d = displacement_operator(C64::new(a, 0.0), n_max).unwrap();
        let psi = TruncatedState::fock(1, n_max).unwrap().apply(&d);
        let mut log_fact = 0.0f64;
        for n in 0..n_max / 2 {
            if n > 0 {
                log_fact += (n as f64).ln();
            }
            let mag = (-a * a / 2.0 - 0.5 * log_fact).exp();
            let expect = mag * a.powi(n as i32 - 1) * (n as f64 - a * a);
            let expect = if n == 0 { -mag * a } else { expect };
            prop_assert!((psi.amplitude(n).re - expect).abs() < 1e-8, "n={}", n);
        }
    }

    #[test]
    fn coherent_state_is_displaced_vacuum(re in -2.5..2.5f64, im in -2.5..2.5f64) {
        let a = C64::new(re, im);
        let n = suggested_n_max(a.norm_sqr());
        let via_d = TruncatedState::vacuum(n).unwrap().apply(&displacement_operator(a, n).unwrap());
        let direct = coherent_state(a, n).unwrap();
        prop_assert!((via_d.inner(&direct).norm() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn loss_semigroup(e1 in 0.0..1.0f64, e2 in 0.0..1.0f64, mean in 0.0..3.0f64) {
        let rho = DensityOperator::thermal(mean, 90).unwrap();
        let two = loss_channel(e2, &loss_channel(e1, &rho).unwrap()).unwrap();
        let one = loss_channel(e1 * e2, &rho).unwrap();
        prop_assert!((two.matrix() - one.matrix()).norm() < 1e-12);
        prop_assert!((one.trace() - rho.trace()).abs() < 1e-12);
    }

    #[test]
    fn noise_series_identity(mu in 0.0..120.0f64, eta in 0.0..1.0f64, v in 0.9..1.0f64) {
        let a = noise_click_prob(mu, eta, v);
        let b = noise_click_prob_series(mu, eta, v);
        prop_assert!((a - b).abs() < 1e-12);
        let a = no_leak_prob(mu, eta, v);
        let b = no_leak_prob_series(mu, eta, v);
        prop_assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn werner_identities(w in 0.0..1.0f64) {
        let rho = werner_state(w).unwrap();
        let ana = werner_witnesses(w);
        prop_assert!((concurrence(&rho) - ana.concurrence).abs() < 1e-10);
        prop_assert!((concurrence(&rho) - (1.5 * w - 0.5).max(0.0)).abs() < 1e-10);
        prop_assert!((ppt_min_eigenvalue(&rho) - (1.0 - 3.0 * w) / 4.0).abs() < 1e-10);
        prop_assert!((chsh_maximum(&rho) - 2.0 * 2f64.sqrt() * w).abs() < 1e-10);
        prop_assert!((chsh_value(&rho, &ChshSettings::default()) - ana.s).abs() < 1e-10);
    }

    #[test]
    fn chsh_bounded_by_maximum(
        re in prop::collection::vec(-1.0..1.0f64, 16),
        im in prop::collection::vec(-1.0..1.0f64, 16),
        angles in prop::collection::vec(0.0..PI, 8),
    ) {
        let rho = random_state(&re, &im);
        let s = ChshSettings {
            a: setting(angles[0], 2.0 * angles[1]),
            a_prime: setting(angles[2], 2.0 * angles[3]),
            b: setting(angles[4], 2.0 * angles[5]),
            b_prime: setting(angles[6], 2.0 * angles[7]),
        };
        let max = chsh_maximum(&rho);
        prop_assert!(chsh_value(&rho, &s) <= max + 1e-10);
        prop_assert!(max <= 2.0 * 2f64.sqrt() + 1e-10);
        // separable (PPT) states never violate
        if ppt_min_eigenvalue(&rho) >= 0.0 {
            prop_assert!(max <= 2.0 + 1e-10);
            prop_assert!(concurrence(&rho) < 1e-9);
        }
    }

    #[test]
    fn guessing_probability_monotone(a2 in 0.0..40.0f64) {
        let pair = macro_components_auto(a2.sqrt()).unwrap();
        let mut prev = 1.0;
        for i in 0..120 {
            let pg = guessing_probability(&pair, i as f64 * 0.1).unwrap();
            prop_assert!((0.5..=1.0).contains(&pg));
            prop_assert!(pg <= prev + 1e-12, "sigma {}", i as f64 * 0.1);
            prev = pg;
        }
    }

    #[test]
    fn memory_never_amplifies(
        eta_abs in 0.0..1.0f64,
        frac in 0.0..1.0f64,
        amps in prop::collection::vec((-2.0..2.0f64, -2.0..2.0f64), 1..6),
    ) {
        let eta_t = 1.0 - eta_abs;
        let eta = (frac * eta_abs).min((1.0 - eta_t.sqrt()).powi(2));
        let p = MemoryParams { eta_abs, eta, ..MemoryParams::default() };
        let train = PulseTrain::from_slots(amps.iter().enumerate().map(|(k, &(r, i))| (k as i64, C64::new(r, i))));
        let out = memory_pass(&train, &p).unwrap();
        prop_assert!(out.energy() <= train.energy() * (1.0 + 1e-10) + 1e-12);
    }

    #[test]
    fn back_displacement_cancels(re in -8.0..8.0f64, im in -8.0..8.0f64) {
        let p = MemoryParams::default();
        prop_assert!(back_displacement_residual(C64::new(re, im), PI, &p).unwrap() < 1e-12);
    }

    #[test]
    fn visibility_in_range(d in -0.5..0.5f64, s in 0.0..3.0f64) {
        let v = visibility_from_errors(d, s).unwrap();
        prop_assert!((0.0..=1.0 + 1e-12).contains(&v));
    }

    #[test]
    fn overlap_in_range(fwhm in 0.2..5.0f64, tau in 0.2..5.0f64, w in 0.01..30.0f64) {
        let p = TemporalProfiles { csp_fwhm: fwhm, tau_c: tau };
        let x = p.overlap(w).unwrap();
        prop_assert!((0.0..=1.0).contains(&x));
        prop_assert!(p.overlap(w.min(1e-3)).unwrap() > 1.0 - 1e-5);
    }

    #[test]
    fn detailed_probabilities_normalized(t in 0.0..PI, tp in 0.0..PI, g2 in 0.0..60.0f64) {
        let params = DetailedParams { gamma: g2.sqrt(), ..DetailedParams::default() };
        let jp = joint_probabilities(t, tp, &params).unwrap();
        prop_assert!((jp.normalized.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!(jp.raw.iter().all(|&p| (-1e-10..=1.0 + 1e-10).contains(&p)));
        prop_assert!(jp.correlator().abs() <= 1.0 + 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn tomography_reproducible(seed in any::<u64>(), w in 0.0..1.0f64) {
        let rho = werner_state(w).unwrap();
        let s = tomography_settings();
        let a = simulate_tomography(&rho, &s, 1000, seed, Execution::Sequential).unwrap();
        let b = simulate_tomography(&rho, &s, 1000, seed, Execution::Parallel).unwrap();
        prop_assert_eq!(&a, &b);
        prop_assert!(a.entries.iter().all(|e| e.counts.iter().sum::<u64>() == 1000));
    }
}
