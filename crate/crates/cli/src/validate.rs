//! Invariant suite behind `micromacro validate`. Every check is numeric and
//! independent of measured values.

use std::f64::consts::PI;

use micromacro::exec::Execution;
use micromacro::fock::{displacement_operator, suggested_n_max, ClickDetector};
use micromacro::hom::{coincidence_probability, TemporalProfiles};
use micromacro::macro_size::{guessing_probability, macro_components_auto};
use micromacro::memory::{
    back_displacement_residual, mean_residual, memory_pass, sigma_for_visibility, visibility_from_errors, PulseTrain,
};
use micromacro::noise::{
    no_leak_prob, no_leak_prob_series, noise_click_prob, noise_click_prob_series, predict_witness_curves,
    werner_witnesses,
};
use micromacro::polarization::{
    chsh_maximum, chsh_value, concurrence, optimize_chsh, ppt_min_eigenvalue, reconstruct_mle, simulate_tomography,
    tomography_settings, werner_state, ChshSettings,
};
use micromacro::spdc::{compare_with_oracle, joint_probabilities, validation_grid};
use micromacro::C64;
use nalgebra::DMatrix;

use crate::commands::{detailed_params, experiment_params, memory_params, CliError, Output};
use crate::config::RunConfig;
use crate::table::ResultTable;

struct Check {
    name: &'static str,
    value: f64,
    limit: f64,
    /// `true`: value must not exceed the limit; `false`: must reach it.
    upper: bool,
}

impl Check {
    fn at_most(name: &'static str, value: f64, limit: f64) -> Self {
        Check { name, value, limit, upper: true }
    }

    fn at_least(name: &'static str, value: f64, limit: f64) -> Self {
        Check { name, value, limit, upper: false }
    }

    fn pass(&self) -> bool {
        if self.upper {
            self.value <= self.limit
        } else {
            self.value >= self.limit
        }
    }
}

fn max_abs(xs: impl IntoIterator<Item = f64>) -> f64 {
    xs.into_iter().fold(0.0, |m, x| if x.is_nan() { f64::INFINITY } else { m.max(x.abs()) })
}

pub fn run_validate(cfg: &RunConfig, exec: Execution) -> Result<Output, CliError> {
    let exp = experiment_params(cfg)?;
    let mem = memory_params(cfg)?;
    let det = detailed_params(cfg)?;
    let seed = cfg.u64("run.seed");
    let mut checks = Vec::new();

    let d_err = max_abs([C64::new(0.5, 0.0), C64::new(1.0, 1.0), C64::new(-2.0, 1.5)].map(|a| {
        let n = suggested_n_max(a.norm_sqr());
        let prod = displacement_operator(a, n).unwrap() * displacement_operator(-a, n).unwrap();
        (prod - DMatrix::<C64>::identity(n + 1, n + 1)).norm()
    }));
    checks.push(Check::at_most("displacement_inverse", d_err, 1e-10));

    let mut series = Vec::new();
    for i in 0..=60 {
        let mu = i as f64 * 2.0;
        for v in [0.9, 0.99, exp.v, 1.0] {
            series.push(noise_click_prob(mu, exp.eta, v) - noise_click_prob_series(mu, exp.eta, v));
            series.push(no_leak_prob(mu, exp.eta, v) - no_leak_prob_series(mu, exp.eta, v));
        }
    }
    checks.push(Check::at_most("noise_series_identity", max_abs(series), 1e-12));

    let mut werner = Vec::new();
    for i in 0..=20 {
        let w = i as f64 / 20.0;
        let rho = werner_state(w)?;
        let ana = werner_witnesses(w);
        werner.push(concurrence(&rho) - ana.concurrence);
        werner.push(ppt_min_eigenvalue(&rho) - ana.ppt);
        werner.push(chsh_value(&rho, &ChshSettings::default()) - ana.s);
        werner.push(chsh_maximum(&rho) - 2.0 * 2f64.sqrt() * w);
    }
    checks.push(Check::at_most("werner_identities", max_abs(werner), 1e-10));

    let model = micromacro::noise::model_state(13.3, &exp)?;
    let (_, s_opt) = optimize_chsh(&model, 8, seed);
    checks.push(Check::at_most("chsh_optimizer_vs_bound", (s_opt - chsh_maximum(&model)).abs(), 1e-6));

    let rec = simulate_tomography(&model, &tomography_settings(), 1_000_000, seed, exec)?;
    let fid = reconstruct_mle(&rec)?.fidelity(&model);
    checks.push(Check::at_least("tomography_fidelity_1e6", fid, 0.995));

    let alpha = C64::new(86f64.sqrt(), 0.0);
    checks.push(Check::at_most("residual_at_pi", back_displacement_residual(alpha, PI, &mem)?, 1e-12));
    let train = PulseTrain::from_slots((0..5).map(|k| (k, C64::new(1.0, 0.3 * k as f64))));
    let ratio = memory_pass(&train, &mem)?.energy() / train.energy();
    checks.push(Check::at_most("memory_energy_ratio", ratio, 1.0 + 1e-10));

    let s_jit = sigma_for_visibility(exp.v, 0.0)?;
    checks.push(Check::at_most(
        "jitter_calibration",
        (visibility_from_errors(0.0, s_jit)? - exp.v).abs(),
        1e-10,
    ));
    let mut slope = Vec::new();
    for a2 in [1.0, 13.3, 42.0, 86.0] {
        let r = mean_residual(C64::new(f64::sqrt(a2), 0.0), s_jit, &mem)?;
        let pn = noise_click_prob(mem.eta_t() * a2, mem.eta, exp.v);
        slope.push((r - pn) / pn);
    }
    checks.push(Check::at_most("residual_vs_noise_slope", max_abs(slope), 0.1));

    let pair = macro_components_auto(47f64.sqrt())?;
    let mut rise: f64 = 0.0;
    let mut prev = guessing_probability(&pair, 0.0)?;
    for i in 1..=400 {
        let p = guessing_probability(&pair, i as f64 * 0.05)?;
        rise = rise.max(p - prev);
        prev = p;
    }
    checks.push(Check::at_most("p_g_monotone", rise, 1e-12));

    let dip = coincidence_probability(&[0.0, 1.0], &[0.0, 1.0], 0.0, &ClickDetector::ideal());
    checks.push(Check::at_most("hom_single_photon_dip", dip, 1e-15));
    let prof = TemporalProfiles::default();
    let mut ripple: f64 = 0.0;
    let mut prev = prof.overlap(0.01)?;
    for i in 2..=600 {
        let x = prof.overlap(i as f64 * 0.05)?;
        ripple = ripple.max(x - prev);
        prev = x;
    }
    checks.push(Check::at_most("overlap_nonincreasing", ripple, 1e-5));

    let mut norm = Vec::new();
    for &t in &validation_grid() {
        for &tp in &validation_grid() {
            norm.push(joint_probabilities(t, tp, &det)?.normalized.iter().sum::<f64>() - 1.0);
        }
    }
    checks.push(Check::at_most("detailed_normalization", max_abs(norm), 1e-12));
    let g = validation_grid();
    let rep = compare_with_oracle(&g, &g, &det, cfg.usize("detailed.samples"), seed, exec)?;
    checks.push(Check::at_most("oracle_max_z", rep.max_z(), cfg.f64("detailed.z_threshold")));

    let grid: Vec<f64> = (0..40).map(|i| i as f64 * 2.5).collect();
    let a = predict_witness_curves(&grid, &exp, 50, seed, Execution::Sequential)?;
    let b = predict_witness_curves(&grid, &exp, 50, seed, exec)?;
    checks.push(Check::at_most("curves_execution_independent", if a == b { 0.0 } else { 1.0 }, 0.0));
    let r1 = simulate_tomography(&model, &tomography_settings(), 1000, seed, Execution::Sequential)?;
    let r2 = simulate_tomography(&model, &tomography_settings(), 1000, seed, exec)?;
    checks.push(Check::at_most("tomography_reproducible", if r1 == r2 { 0.0 } else { 1.0 }, 0.0));

    let mut out = Output::default();
    let mut t = ResultTable::new("validate", &[("check", ""), ("value", ""), ("limit", ""), ("bound", ""), ("status", "")]);
    for c in &checks {
        let status = c.pass();
        out.messages.push(format!(
            "{} {:<30} {:.3e} ({} {:.1e})",
            if status { "PASS" } else { "FAIL" },
            c.name,
            c.value,
            if c.upper { "<=" } else { ">=" },
            c.limit
        ));
        out.failed |= !status;
        t.push(vec![
            c.name.into(),
            c.value.into(),
            c.limit.into(),
            if c.upper { "max" } else { "min" }.into(),
            status.into(),
        ]);
    }
    out.tables.push(t);
    Ok(out)
}
