use micromacro::exec::Execution;
use micromacro::fock::ClickDetector;
use micromacro::hom::{hom_visibility, overlap_ratio, overlap_vs_window, HomParams, TemporalProfiles};
use micromacro::macro_size::{
    archetype_size, guessing_probability, heralded_mixture_state, lossy_mixture_pair, macro_components_auto,
    sigma_max, MacroComponentPair,
};
use micromacro::memory::{mean_residual, sigma_for_visibility, MemoryParams};
use micromacro::noise::{
    noise_click_prob, predict_witness_curves, predict_witnesses, s_crossing, ExperimentParams, ParamSpread,
    ResidualNoise,
};
use micromacro::polarization::{
    bell_state, chsh_maximum, concurrence, ppt_min_eigenvalue, reconstruct_mle, simulate_tomography,
    tomography_settings, werner_state, TwoQubitDensity,
};
use micromacro::spdc::{
    chsh_from_detailed, compare_with_oracle, default_chsh_angles, validation_grid, DetailedParams, ZetaReading,
};
use micromacro::{Error, C64};
use thiserror::Error as ThisError;

use crate::config::{ConfigError, RunConfig};
use crate::svg::{line_chart, Series};
use crate::table::{Cell, ResultTable};

#[derive(Debug, ThisError)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(#[from] ConfigError),
    #[error("model error: {0}")]
    Model(#[from] Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            _ => 1,
        }
    }
}

#[derive(Debug, Default)]
pub struct Output {
    pub tables: Vec<ResultTable>,
    pub plots: Vec<(String, String)>,
    pub messages: Vec<String>,
    /// Set by `validate` when an invariant fails.
    pub failed: bool,
}

fn invalid(section: &str, e: Error) -> ConfigError {
    ConfigError::Invalid {
        key: section.into(),
        reason: e.to_string(),
    }
}

pub fn experiment_params(cfg: &RunConfig) -> Result<ExperimentParams, ConfigError> {
    let p = ExperimentParams {
        eta_h: cfg.f64("experiment.eta_h"),
        t: cfg.f64("experiment.t"),
        eta: cfg.f64("experiment.eta"),
        v: cfg.f64("experiment.v"),
        v_mm: cfg.f64("experiment.v_mm"),
        eta_abs: cfg.f64("experiment.eta_abs"),
        r_overlap: cfg.f64("experiment.r_overlap"),
        kappa: cfg.f64("experiment.kappa"),
        residual: match cfg.str("experiment.residual") {
            "polarized" => ResidualNoise::Polarized,
            _ => ResidualNoise::Depolarized,
        },
        spread: ParamSpread {
            eta_h: cfg.f64("spread.eta_h"),
            t: cfg.f64("spread.t"),
            eta: cfg.f64("spread.eta"),
            v: cfg.f64("spread.v"),
            v_mm: cfg.f64("spread.v_mm"),
        },
    };
    p.validate().map_err(|e| invalid("experiment", e))?;
    Ok(p)
}

pub fn reading_from(name: &str) -> ZetaReading {
    if name == ZetaReading::Printed.name() {
        ZetaReading::Printed
    } else {
        ZetaReading::ZetaBar
    }
}

pub fn detailed_params(cfg: &RunConfig) -> Result<DetailedParams, ConfigError> {
    let p = DetailedParams {
        g: cfg.f64("detailed.g"),
        r: cfg.f64("detailed.r"),
        eta_d: cfg.f64("detailed.eta_d"),
        p_dc: cfg.f64("detailed.p_dc"),
        t1: cfg.f64("detailed.t1"),
        t2: cfg.f64("detailed.t2"),
        eta_c: cfg.f64("detailed.eta_c"),
        gamma: cfg.f64("detailed.gamma"),
        sigma_phi: cfg.f64("detailed.sigma_phi"),
        theta_disp: cfg.f64("detailed.theta_disp_deg").to_radians(),
        reading: reading_from(cfg.str("detailed.reading")),
        quadrature_nodes: cfg.usize("detailed.quadrature_nodes"),
    };
    p.validate().map_err(|e| invalid("detailed", e))?;
    Ok(p)
}

pub fn hom_params(cfg: &RunConfig) -> Result<HomParams, ConfigError> {
    let detector = ClickDetector::new(cfg.f64("hom.detector_efficiency"), cfg.f64("hom.dark_count"))
        .map_err(|e| invalid("hom.dark_count", e))?;
    let p = HomParams {
        mu_csp: cfg.f64("hom.mu_csp"),
        p_pair: cfg.f64("hom.p_pair"),
        eta_h: cfg.f64("hom.eta_h"),
        xi: cfg.f64("hom.xi"),
        herald_efficiency: cfg.f64("hom.herald_efficiency"),
        detector,
    };
    p.validate().map_err(|e| invalid("hom", e))?;
    Ok(p)
}

pub fn profiles(cfg: &RunConfig) -> TemporalProfiles {
    TemporalProfiles {
        csp_fwhm: cfg.f64("hom.csp_fwhm"),
        tau_c: cfg.f64("hom.tau_c"),
    }
}

pub fn memory_params(cfg: &RunConfig) -> Result<MemoryParams, ConfigError> {
    let p = MemoryParams {
        eta_abs: cfg.f64("experiment.eta_abs"),
        eta: cfg.f64("experiment.eta"),
        tau_s: cfg.f64("memory.tau_s"),
        phi: cfg.f64("memory.phi"),
    };
    p.validate().map_err(|e| invalid("memory", e))?;
    Ok(p)
}

/// Measured witness values drawn on the curves for comparison:
/// (witness, |α|², value, uncertainty).
pub const MEASURED: [(&str, f64, f64, f64); 4] = [
    ("s", 0.0, 2.59, 0.03),
    ("s", 13.3, 2.099, 0.031),
    ("s", 42.0, 1.65, 0.05),
    ("ppt", 86.0, -0.055, 0.010),
];

pub fn run_curves(cfg: &RunConfig, exec: Execution) -> Result<Output, CliError> {
    let p = experiment_params(cfg)?;
    let mem = memory_params(cfg)?;
    let grid = cfg.grid("curves", "alpha2")?;
    let seed = cfg.u64("run.seed");
    let c = predict_witness_curves(&grid, &p, cfg.usize("curves.band_samples"), seed, exec)?;
    let mut out = Output::default();

    let mut t = ResultTable::new(
        "curves",
        &[
            ("alpha2", "photons"),
            ("excitations", "atoms"),
            ("w", ""),
            ("s", ""),
            ("s_band", ""),
            ("ppt", ""),
            ("ppt_band", ""),
            ("concurrence", ""),
            ("concurrence_band", ""),
        ],
    );
    for i in 0..grid.len() {
        t.push(vec![
            c.alpha2[i].into(),
            c.excitations[i].into(),
            c.w[i].into(),
            c.s[i].into(),
            c.s_band[i].into(),
            c.ppt[i].into(),
            c.ppt_band[i].into(),
            c.concurrence[i].into(),
            c.concurrence_band[i].into(),
        ]);
    }

    let mut anchors = ResultTable::new(
        "anchors",
        &[
            ("witness", ""),
            ("alpha2", "photons"),
            ("excitations", "atoms"),
            ("measured", ""),
            ("measured_err", ""),
            ("model", ""),
        ],
    );
    for (w, a2, m, e) in MEASURED {
        let pred = predict_witnesses(a2, &p)?;
        let model = if w == "s" { pred.s } else { pred.ppt };
        anchors.push(vec![
            w.into(),
            a2.into(),
            (a2 * p.eta_abs).into(),
            m.into(),
            e.into(),
            model.into(),
        ]);
    }

    let mut summary = ResultTable::new("curves_summary", &[("quantity", ""), ("value", "")]);
    summary.push(vec!["s_at_0".into(), predict_witnesses(0.0, &p)?.s.into()]);
    let crossing = s_crossing(2.0, &p, grid.last().copied().unwrap_or(0.0).max(200.0));
    summary.push(vec![
        "alpha2_at_s_2".into(),
        crossing.map(Cell::from).unwrap_or_else(|| "none".into()),
    ]);

    let sigma = sigma_for_visibility(p.v, cfg.f64("memory.delta_a"))?;
    let mut res = ResultTable::new(
        "residual",
        &[("alpha2", "photons"), ("sigma_phi", "rad"), ("residual", "photons"), ("p_n", "")],
    );
    for &a2 in &grid {
        let r = mean_residual(C64::new(a2.sqrt(), 0.0), sigma, &mem)?;
        res.push(vec![
            a2.into(),
            sigma.into(),
            r.into(),
            noise_click_prob(mem.eta_t() * a2, mem.eta, p.v).into(),
        ]);
    }

    if let Some(x) = crossing {
        out.messages.push(format!("S = 2 crossed at |alpha|^2 = {x:.3}"));
    }
    let upper: Vec<f64> = c.s.iter().zip(&c.s_band).map(|(s, b)| s + b).collect();
    let lower: Vec<f64> = c.s.iter().zip(&c.s_band).map(|(s, b)| s - b).collect();
    out.plots.push((
        "curves_s".into(),
        line_chart(
            "CHSH S vs |alpha|^2",
            "|alpha|^2",
            "S",
            &[
                Series::line("model", &grid, &c.s),
                Series::line("+1 sd", &grid, &upper),
                Series::line("-1 sd", &grid, &lower),
                Series::points(
                    "measured",
                    MEASURED.iter().filter(|m| m.0 == "s").map(|m| (m.1, m.2)).collect(),
                ),
            ],
        ),
    ));
    out.plots.push((
        "curves_ppt".into(),
        line_chart(
            "PPT and concurrence vs |alpha|^2",
            "|alpha|^2",
            "witness",
            &[
                Series::line("ppt min eigenvalue", &grid, &c.ppt),
                Series::line("concurrence", &grid, &c.concurrence),
                Series::points(
                    "measured ppt",
                    MEASURED.iter().filter(|m| m.0 == "ppt").map(|m| (m.1, m.2)).collect(),
                ),
            ],
        ),
    ));
    out.tables.extend([t, anchors, summary, res]);
    Ok(out)
}

fn size_or_text(r: micromacro::Result<usize>) -> Cell {
    match r {
        Ok(n) => n.into(),
        Err(Error::UnattainableTarget { .. }) => "unattainable".into(),
        Err(e) => e.to_string().into(),
    }
}

fn n_eff(pair: &MacroComponentPair, target: f64) -> Cell {
    size_or_text(sigma_max(pair, target).and_then(|s| archetype_size(s, target)))
}

pub fn run_size(cfg: &RunConfig) -> Result<Output, CliError> {
    let p = experiment_params(cfg)?;
    let exc = cfg.f64("size.excitations");
    let target = cfg.f64("size.target");
    let alpha = exc.sqrt();
    // amplitude before absorption in the memory
    let alpha_in = (exc / p.eta_abs.max(f64::MIN_POSITIVE)).sqrt();
    let pure = macro_components_auto(alpha)?;
    let heralded = heralded_mixture_state(alpha, p.eta_h)?;
    let absorbed = lossy_mixture_pair(alpha_in, 1.0, p.eta_abs)?;
    let lossy = lossy_mixture_pair(alpha_in, p.eta_h, p.eta_abs)?;
    let mut out = Output::default();

    let mut comp = ResultTable::new("components", &[("n", "photons"), ("p_plus", ""), ("p_minus", "")]);
    for (n, (a, b)) in pure.p_plus.iter().zip(&pure.p_minus).enumerate() {
        comp.push(vec![n.into(), (*a).into(), (*b).into()]);
    }

    let sigmas = cfg.grid("size", "sigma")?;
    let mut pg = ResultTable::new(
        "guessing",
        &[
            ("sigma", "photons"),
            ("pure", ""),
            ("heralded", ""),
            ("absorbed", ""),
            ("heralded_absorbed", ""),
        ],
    );
    for &s in &sigmas {
        pg.push(vec![
            s.into(),
            guessing_probability(&pure, s)?.into(),
            heralded.guessing_probability(s)?.into(),
            guessing_probability(&absorbed, s)?.into(),
            guessing_probability(&lossy, s)?.into(),
        ]);
    }

    let small = macro_components_auto(cfg.f64("size.alpha2_small").sqrt())?;
    let mix_max = pg.column("heralded_absorbed").into_iter().fold(0.5, f64::max);
    let sm = sigma_max(&pure, target);
    let mut summary = ResultTable::new("size_summary", &[("quantity", ""), ("value", "")]);
    summary.push(vec!["p_g_sigma0_small".into(), guessing_probability(&small, 0.0)?.into()]);
    summary.push(vec!["p_g_sigma0".into(), guessing_probability(&pure, 0.0)?.into()]);
    summary.push(vec![
        "sigma_max".into(),
        sm.as_ref().map(|s| Cell::from(*s)).unwrap_or_else(|_| "unattainable".into()),
    ]);
    summary.push(vec!["n_eff".into(), n_eff(&pure, target)]);
    summary.push(vec!["n_eff_absorbed".into(), n_eff(&absorbed, target)]);
    summary.push(vec!["n_eff_heralded_absorbed".into(), n_eff(&lossy, target)]);
    summary.push(vec!["mixture_max_p_g".into(), mix_max.into()]);

    let cols = ["pure", "heralded", "absorbed", "heralded_absorbed"];
    let series: Vec<Series> = cols.iter().map(|c| Series::line(c, &sigmas, &pg.column(c))).collect();
    out.plots
        .push(("size".into(), line_chart("Guessing probability vs coarse graining", "sigma", "P_g", &series)));
    let ns: Vec<f64> = (0..pure.p_plus.len()).map(|n| n as f64).collect();
    out.plots.push((
        "components".into(),
        line_chart(
            "Macro components",
            "n",
            "probability",
            &[Series::line("plus", &ns, &pure.p_plus), Series::line("minus", &ns, &pure.p_minus)],
        ),
    ));
    out.tables.extend([comp, pg, summary]);
    Ok(out)
}

pub fn run_hom(cfg: &RunConfig) -> Result<Output, CliError> {
    let hp = hom_params(cfg)?;
    let prof = profiles(cfg);
    prof.validate().map_err(|e| invalid("hom", e))?;
    let v_e = hom_visibility(&hp)?;
    let mut out = Output::default();

    let n = cfg.usize("hom.mu_points").max(2);
    let (lo, hi) = (cfg.f64("hom.mu_min"), cfg.f64("hom.mu_max"));
    if hi <= lo {
        return Err(ConfigError::Invalid {
            key: "hom.mu_max".into(),
            reason: "must exceed hom.mu_min".into(),
        }
        .into());
    }
    let mut sweep = ResultTable::new("hom_mu", &[("mu_csp", "photons"), ("v", "")]);
    for i in 0..n {
        let mu = lo * (hi / lo).powf(i as f64 / (n - 1) as f64);
        sweep.push(vec![mu.into(), hom_visibility(&HomParams { mu_csp: mu, ..hp })?.into()]);
    }

    let windows = cfg.grid("hom", "window")?;
    let pts = overlap_vs_window(&prof, &windows, v_e)?;
    let mut win = ResultTable::new("hom_window", &[("window", "ns"), ("xi", ""), ("v_m", "")]);
    for w in &pts {
        win.push(vec![w.window.into(), w.xi.into(), w.v_m.into()]);
    }

    let vs = sweep.column("v");
    let imax = (0..vs.len()).max_by(|&a, &b| vs[a].total_cmp(&vs[b])).unwrap_or(0);
    let mut summary = ResultTable::new("hom_summary", &[("quantity", ""), ("value", "")]);
    summary.push(vec!["v_e".into(), v_e.into()]);
    summary.push(vec![
        "overlap_ratio".into(),
        match overlap_ratio(cfg.f64("hom.v_m"), v_e) {
            Ok(r) => r.into(),
            Err(e) => e.to_string().into(),
        },
    ]);
    summary.push(vec!["xi_3ns".into(), prof.overlap(3.0)?.into()]);
    summary.push(vec!["mu_at_max_v".into(), sweep.column("mu_csp")[imax].into()]);
    summary.push(vec!["max_v".into(), vs[imax].into()]);
    summary.push(vec!["interior_maximum".into(), (imax > 0 && imax + 1 < vs.len()).into()]);

    out.plots.push((
        "hom_mu".into(),
        line_chart("HOM visibility vs CSP mean photon number", "mu_csp", "V", &[Series::line(
            "model",
            &sweep.column("mu_csp"),
            &vs,
        )]),
    ));
    out.plots.push((
        "hom_window".into(),
        line_chart(
            "Overlap vs coincidence window",
            "window (ns)",
            "",
            &[Series::line("xi", &windows, &win.column("xi")), Series::line("V_m", &windows, &win.column("v_m"))],
        ),
    ));
    out.tables.extend([sweep, win, summary]);
    Ok(out)
}

const OUTCOME_LABELS: [&str; 4] = ["++", "+-", "-+", "--"];

pub fn run_detailed(cfg: &RunConfig, exec: Execution) -> Result<Output, CliError> {
    let base = detailed_params(cfg)?;
    let seed = cfg.u64("run.seed");
    let samples = cfg.usize("detailed.samples");
    let thr = cfg.f64("detailed.z_threshold");
    let grid = validation_grid();
    let readings = [ZetaReading::ZetaBar, ZetaReading::Printed];
    let mut out = Output::default();

    let mut oracle = ResultTable::new(
        "oracle",
        &[
            ("reading", ""),
            ("theta", "deg"),
            ("theta_p", "deg"),
            ("outcome", ""),
            ("analytic", ""),
            ("mc", ""),
            ("std_err", ""),
            ("z", ""),
        ],
    );
    let mut summary = ResultTable::new(
        "oracle_summary",
        &[("reading", ""), ("max_z", ""), ("within_threshold", ""), ("s_default", "")],
    );
    for reading in readings {
        let p = DetailedParams { reading, ..base };
        let rep = compare_with_oracle(&grid, &grid, &p, samples, seed, exec)?;
        for row in &rep.rows {
            for k in 0..4 {
                oracle.push(vec![
                    reading.name().into(),
                    row.theta.to_degrees().into(),
                    row.theta_p.to_degrees().into(),
                    OUTCOME_LABELS[k].into(),
                    row.analytic[k].into(),
                    row.mc.mean[k].into(),
                    row.mc.std_err[k].into(),
                    row.z[k].into(),
                ]);
            }
        }
        let pass = rep.passes(thr);
        out.messages.push(format!(
            "reading {}: max |analytic - MC| = {:.2} SE ({})",
            reading.name(),
            rep.max_z(),
            if pass { "agrees" } else { "disagrees" }
        ));
        summary.push(vec![
            reading.name().into(),
            rep.max_z().into(),
            pass.into(),
            chsh_from_detailed(default_chsh_angles(), &p)?.into(),
        ]);
    }

    let g2 = {
        let (hi, step) = (cfg.f64("detailed.gamma2_max"), cfg.f64("detailed.gamma2_step"));
        let n = (hi / step + 1e-9).floor() as usize;
        (0..=n).map(|i| i as f64 * step).collect::<Vec<_>>()
    };
    let mut chsh = ResultTable::new("chsh_detailed", &[("gamma2", "photons"), ("s_zeta_bar", ""), ("s_zeta", "")]);
    for &x in &g2 {
        let s = |reading| chsh_from_detailed(default_chsh_angles(), &DetailedParams { gamma: x.sqrt(), reading, ..base });
        chsh.push(vec![x.into(), s(ZetaReading::ZetaBar)?.into(), s(ZetaReading::Printed)?.into()]);
    }
    out.plots.push((
        "chsh_detailed".into(),
        line_chart(
            "Detailed-model S vs gamma^2",
            "gamma^2",
            "S",
            &[
                Series::line("zeta_bar", &g2, &chsh.column("s_zeta_bar")),
                Series::line("zeta", &g2, &chsh.column("s_zeta")),
            ],
        ),
    ));
    out.tables.extend([oracle, summary, chsh]);
    Ok(out)
}

const SETTING_LABELS: [&str; 6] = ["H", "V", "D", "A", "R", "L"];

pub fn tomo_state(cfg: &RunConfig) -> Result<TwoQubitDensity, CliError> {
    Ok(match cfg.str("tomo.state") {
        "bell" => bell_state(),
        "werner" => werner_state(cfg.f64("tomo.werner_w"))?,
        _ => micromacro::noise::model_state(cfg.f64("tomo.alpha2"), &experiment_params(cfg)?)?,
    })
}

pub fn run_tomo(cfg: &RunConfig, exec: Execution) -> Result<Output, CliError> {
    let rho = tomo_state(cfg)?;
    let shots = cfg.u64("tomo.shots");
    if shots == 0 {
        return Err(ConfigError::Invalid {
            key: "tomo.shots".into(),
            reason: "must be at least 1".into(),
        }
        .into());
    }
    let rec = simulate_tomography(&rho, &tomography_settings(), shots, cfg.u64("run.seed"), exec)?;
    let est = reconstruct_mle(&rec)?;
    let mut out = Output::default();

    let mut counts = ResultTable::new(
        "tomo_counts",
        &[("alice", ""), ("bob", ""), ("n_pp", ""), ("n_pm", ""), ("n_mp", ""), ("n_mm", "")],
    );
    for (i, e) in rec.entries.iter().enumerate() {
        let mut row: Vec<Cell> = vec![SETTING_LABELS[i / 6].into(), SETTING_LABELS[i % 6].into()];
        row.extend(e.counts.iter().map(|&c| Cell::from(c)));
        counts.push(row);
    }
    let mut summary = ResultTable::new("tomo_summary", &[("quantity", ""), ("true", ""), ("estimate", "")]);
    summary.push(vec!["fidelity".into(), 1.0.into(), est.fidelity(&rho).into()]);
    summary.push(vec!["ppt".into(), ppt_min_eigenvalue(&rho).into(), ppt_min_eigenvalue(&est).into()]);
    summary.push(vec!["concurrence".into(), concurrence(&rho).into(), concurrence(&est).into()]);
    summary.push(vec!["chsh_max".into(), chsh_maximum(&rho).into(), chsh_maximum(&est).into()]);
    out.messages.push(format!("reconstruction fidelity {:.6}", est.fidelity(&rho)));
    out.tables.extend([counts, summary]);
    Ok(out)
}
