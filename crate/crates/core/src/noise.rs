//! Werner-state noise model: residual light from an imperfect back
//! displacement competes with the heralded signal photon.
//!
//! With `x = 2η(1−V)` and Poissonian photon number `μ` in the back
//! displacement, the noise click probability is `p_n = 1 − e^{−μx}` and the
//! no-leak probability is `p̄_n = e^{−μx} − e^{−μ}`. The series forms are kept
//! alongside as an independent check.

use rand_distr::{Distribution, Normal};

use crate::error::{check_nonneg, check_unit, Error, Result};
use crate::exec::{stream_rng, Execution};
use crate::polarization::{bell_state, chsh_maximum, concurrence, ppt_min_eigenvalue, TwoQubitDensity};
use crate::C64;

/// How residual back-displacement light affects the polarization state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ResidualNoise {
    /// Replaces the signal qubit with a maximally mixed one (Werner mixture).
    #[default]
    Depolarized,
    /// Replaces the signal qubit with |H⟩.
    Polarized,
}

/// Standard deviations used for the uncertainty band.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParamSpread {
    pub eta_h: f64,
    pub t: f64,
    pub eta: f64,
    pub v: f64,
    pub v_mm: f64,
}

impl Default for ParamSpread {
    fn default() -> Self {
        ParamSpread {
            eta_h: 0.02,
            t: 0.0,
            eta: 0.002,
            v: 0.0002,
            v_mm: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExperimentParams {
    /// Heralding efficiency.
    pub eta_h: f64,
    /// Transmittance of the displacement beam splitter.
    pub t: f64,
    /// Memory storage and retrieval efficiency.
    pub eta: f64,
    /// Interference visibility between the two displacements.
    pub v: f64,
    /// Micro-micro entanglement visibility.
    pub v_mm: f64,
    pub eta_abs: f64,
    /// Mode-overlap ratio from the HOM measurement.
    pub r_overlap: f64,
    /// `μ = κ |α|²`.
    pub kappa: f64,
    pub residual: ResidualNoise,
    pub spread: ParamSpread,
}

impl Default for ExperimentParams {
    fn default() -> Self {
        ExperimentParams {
            eta_h: 0.19,
            t: 0.995,
            eta: 0.046,
            v: 0.9985,
            v_mm: 0.94,
            eta_abs: 0.55,
            r_overlap: 0.87,
            kappa: 1.0,
            residual: ResidualNoise::Depolarized,
            spread: ParamSpread::default(),
        }
    }
}

impl ExperimentParams {
    pub fn validate(&self) -> Result<()> {
        check_unit("eta_h", self.eta_h)?;
        check_unit("t", self.t)?;
        check_unit("eta", self.eta)?;
        check_unit("v", self.v)?;
        check_unit("v_mm", self.v_mm)?;
        check_unit("eta_abs", self.eta_abs)?;
        check_unit("r_overlap", self.r_overlap)?;
        if !(self.kappa > 0.0 && self.kappa.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "kappa",
                value: self.kappa,
                reason: "must be positive",
            });
        }
        for (name, sd) in [
            ("spread.eta_h", self.spread.eta_h),
            ("spread.t", self.spread.t),
            ("spread.eta", self.spread.eta),
            ("spread.v", self.spread.v),
            ("spread.v_mm", self.spread.v_mm),
        ] {
            check_nonneg(name, sd)?;
        }
        Ok(())
    }
}

fn x_param(eta: f64, v: f64) -> f64 {
    2.0 * eta * (1.0 - v)
}

/// `p_n = 1 − e^{−2μη(1−V)}`.
pub fn noise_click_prob(mu: f64, eta: f64, v: f64) -> f64 {
    -(-mu * x_param(eta, v)).exp_m1()
}

/// `p̄_n = e^{−2μη(1−V)} − e^{−μ}`; the vacuum term is excluded.
pub fn no_leak_prob(mu: f64, eta: f64, v: f64) -> f64 {
    let x = x_param(eta, v);
    // e^{−μx} − e^{−μ} = e^{−μ}(e^{μ(1−x)} − 1)
    (-mu).exp() * (mu * (1.0 - x)).exp_m1()
}

/// Sums `e^{−μ} Σ_{n≥1} μⁿ/n! · term(n)` until the Poisson tail is negligible.
fn poisson_series(mu: f64, term: impl Fn(usize) -> f64) -> f64 {
    if mu == 0.0 {
        return 0.0;
    }
    let mut sum = 0.0;
    let mut comp = 0.0;
    let mut log_w = -mu;
    let mut n = 1;
    loop {
        log_w += mu.ln() - (n as f64).ln();
        let w = log_w.exp();
        // Kahan summation
        let y = w * term(n) - comp;
        let t = sum + y;
        comp = (t - sum) - y;
        sum = t;
        if n as f64 > mu && w < 1e-18 * sum.abs().max(1e-300) {
            break;
        }
        n += 1;
    }
    sum
}

pub fn noise_click_prob_series(mu: f64, eta: f64, v: f64) -> f64 {
    let l = (-x_param(eta, v)).ln_1p();
    poisson_series(mu, |n| -(n as f64 * l).exp_m1())
}

pub fn no_leak_prob_series(mu: f64, eta: f64, v: f64) -> f64 {
    let l = (-x_param(eta, v)).ln_1p();
    poisson_series(mu, |n| (n as f64 * l).exp())
}

/// `p_s = η_h T η p̄_n`.
pub fn signal_prob(params: &ExperimentParams, p_bar: f64) -> f64 {
    params.eta_h * params.t * params.eta * p_bar
}

/// `ε = p_n / (p_s + p_n)`.
pub fn noise_fraction(mu: f64, params: &ExperimentParams) -> Result<f64> {
    check_nonneg("mu", mu)?;
    let p_n = noise_click_prob(mu, params.eta, params.v);
    let p_s = signal_prob(params, no_leak_prob(mu, params.eta, params.v));
    if p_s + p_n <= 0.0 {
        return Err(Error::Undefined("noise fraction with p_s + p_n = 0"));
    }
    Ok(p_n / (p_s + p_n))
}

/// `W = V_mm (1 − ε(κ|α|²))`.
pub fn predict_werner_visibility(alpha2: f64, params: &ExperimentParams) -> Result<f64> {
    check_nonneg("|α|²", alpha2)?;
    if alpha2 == 0.0 {
        return Ok(params.v_mm);
    }
    Ok(params.v_mm * (1.0 - noise_fraction(params.kappa * alpha2, params)?))
}

/// Mean atomic excitations for a displacement of `alpha2` photons.
pub fn excitations_from_alpha(alpha2: f64, eta_abs: f64) -> f64 {
    eta_abs * alpha2
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Witnesses {
    pub s: f64,
    pub ppt: f64,
    pub concurrence: f64,
}

/// Witnesses of the Werner state with visibility `w` at optimal settings.
pub fn werner_witnesses(w: f64) -> Witnesses {
    Witnesses {
        s: 2.0 * std::f64::consts::SQRT_2 * w,
        ppt: (1.0 - 3.0 * w) / 4.0,
        concurrence: ((3.0 * w - 1.0) / 2.0).max(0.0),
    }
}

/// Two-qubit state after the memory: micro-micro Werner state mixed with the
/// residual-noise state with weight ε.
pub fn model_state(alpha2: f64, params: &ExperimentParams) -> Result<TwoQubitDensity> {
    let eps = if alpha2 == 0.0 {
        0.0
    } else {
        noise_fraction(params.kappa * alpha2, params)?
    };
    let v_mm = C64::new(params.v_mm, 0.0);
    let id = nalgebra::Matrix4::<C64>::identity();
    let rho_mm = bell_state().matrix() * v_mm + id * ((C64::new(1.0, 0.0) - v_mm) / 4.0);
    let noise = match params.residual {
        ResidualNoise::Depolarized => id / C64::new(4.0, 0.0),
        ResidualNoise::Polarized => nalgebra::Matrix4::from_diagonal(&nalgebra::Vector4::new(
            C64::new(0.5, 0.0),
            C64::new(0.0, 0.0),
            C64::new(0.5, 0.0),
            C64::new(0.0, 0.0),
        )),
    };
    TwoQubitDensity::new(rho_mm * C64::new(1.0 - eps, 0.0) + noise * C64::new(eps, 0.0))
}

pub fn predict_witnesses(alpha2: f64, params: &ExperimentParams) -> Result<Witnesses> {
    match params.residual {
        ResidualNoise::Depolarized => Ok(werner_witnesses(predict_werner_visibility(alpha2, params)?)),
        ResidualNoise::Polarized => {
            let rho = model_state(alpha2, params)?;
            Ok(Witnesses {
                s: chsh_maximum(&rho),
                ppt: ppt_min_eigenvalue(&rho),
                concurrence: concurrence(&rho),
            })
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WitnessCurve {
    pub alpha2: Vec<f64>,
    pub excitations: Vec<f64>,
    pub w: Vec<f64>,
    pub s: Vec<f64>,
    pub ppt: Vec<f64>,
    pub concurrence: Vec<f64>,
    /// One-standard-deviation half-widths from parameter sampling.
    pub s_band: Vec<f64>,
    pub ppt_band: Vec<f64>,
    pub concurrence_band: Vec<f64>,
}

fn sample_params(params: &ExperimentParams, n: usize, seed: u64) -> Vec<ExperimentParams> {
    let mut rng = stream_rng(seed, 0);
    let mut draw = |mean: f64, sd: f64| {
        if sd == 0.0 {
            mean
        } else {
            Normal::new(mean, sd).expect("finite spread").sample(&mut rng).clamp(0.0, 1.0)
        }
    };
    let sp = params.spread;
    (0..n)
        .map(|_| ExperimentParams {
            eta_h: draw(params.eta_h, sp.eta_h),
            t: draw(params.t, sp.t),
            eta: draw(params.eta, sp.eta),
            v: draw(params.v, sp.v),
            v_mm: draw(params.v_mm, sp.v_mm),
            ..*params
        })
        .collect()
}

fn std_dev(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = xs.iter().sum::<f64>() / xs.len() as f64;
    (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64).sqrt()
}

/// Model witnesses over a grid of `|α|²` with bands from `band_samples`
/// parameter draws. The same draws are used at every grid point.
pub fn predict_witness_curves(
    grid: &[f64],
    params: &ExperimentParams,
    band_samples: usize,
    seed: u64,
    exec: Execution,
) -> Result<WitnessCurve> {
    if grid.is_empty() {
        return Err(Error::InvalidParameter {
            name: "grid",
            value: 0.0,
            reason: "grid must not be empty",
        });
    }
    if grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidParameter {
            name: "grid",
            value: f64::NAN,
            reason: "grid must be strictly increasing",
        });
    }
    params.validate()?;
    let draws = sample_params(params, band_samples, seed);
    let points = exec.map(grid.len(), |i| -> Result<_> {
        let x = grid[i];
        let centre = predict_witnesses(x, params)?;
        let w = predict_werner_visibility(x, params)?;
        let mut s = Vec::with_capacity(draws.len());
        let mut ppt = Vec::with_capacity(draws.len());
        let mut c = Vec::with_capacity(draws.len());
        for p in &draws {
            let wt = predict_witnesses(x, p)?;
            s.push(wt.s);
            ppt.push(wt.ppt);
            c.push(wt.concurrence);
        }
        Ok((w, centre, std_dev(&s), std_dev(&ppt), std_dev(&c)))
    });
    let mut curve = WitnessCurve {
        alpha2: grid.to_vec(),
        excitations: grid.iter().map(|&x| excitations_from_alpha(x, params.eta_abs)).collect(),
        w: vec![],
        s: vec![],
        ppt: vec![],
        concurrence: vec![],
        s_band: vec![],
        ppt_band: vec![],
        concurrence_band: vec![],
    };
    for p in points {
        let (w, centre, sb, pb, cb) = p?;
        curve.w.push(w);
        curve.s.push(centre.s);
        curve.ppt.push(centre.ppt);
        curve.concurrence.push(centre.concurrence);
        curve.s_band.push(sb);
        curve.ppt_band.push(pb);
        curve.concurrence_band.push(cb);
    }
    Ok(curve)
}

/// Smallest `|α|²` on `[0, hi]` where the predicted S drops to `level`.
pub fn s_crossing(level: f64, params: &ExperimentParams, hi: f64) -> Option<f64> {
    let s = |x: f64| predict_witnesses(x, params).map(|w| w.s).unwrap_or(f64::NAN);
    if s(0.0) < level || s(hi) > level {
        return None;
    }
    let (mut lo, mut up) = (0.0, hi);
    for _ in 0..200 {
        let mid = 0.5 * (lo + up);
        if s(mid) >= level {
            lo = mid;
        } else {
            up = mid;
        }
    }
    Some(0.5 * (lo + up))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p() -> ExperimentParams {
        ExperimentParams::default()
    }

    #[test]
    fn noise_click_examples() {
        assert_eq!(noise_click_prob(10.0, 0.046, 1.0), 0.0);
        assert_eq!(noise_click_prob(0.0, 0.046, 0.9985), 0.0);
        let v = noise_click_prob(86.0, 0.046, 0.9985);
        assert!((v - 0.011798).abs() < 1e-6, "{v}");
        assert!((noise_click_prob_series(86.0, 0.046, 0.9985) - v).abs() < 1e-12);
    }

    #[test]
    fn no_leak_examples() {
        assert_eq!(no_leak_prob(0.0, 0.046, 0.9985), 0.0);
        assert_eq!(no_leak_prob_series(0.0, 0.046, 0.9985), 0.0);
        let v = no_leak_prob(13.3, 0.046, 0.9985);
        assert!((v - 0.99816).abs() < 1e-5, "{v}");
        assert!((no_leak_prob_series(13.3, 0.046, 0.9985) - v).abs() < 1e-12);
        assert!((no_leak_prob(40.0, 0.046, 1.0) - (1.0 - (-40f64).exp())).abs() < 1e-15);
    }

    #[test]
    fn signal_examples() {
        assert!((signal_prob(&p(), 1.0) - 0.0086963).abs() < 1e-7);
        let zero = ExperimentParams { eta: 0.0, ..p() };
        assert_eq!(signal_prob(&zero, 1.0), 0.0);
        let ps = signal_prob(&p(), no_leak_prob(86.0, 0.046, 0.9985));
        assert!((ps - 0.008594).abs() < 1e-6, "{ps}");
    }

    #[test]
    fn noise_fraction_examples() {
        let perfect = ExperimentParams { v: 1.0, ..p() };
        assert_eq!(noise_fraction(20.0, &perfect).unwrap(), 0.0);
        assert!((noise_fraction(13.3, &p()).unwrap() - 0.1744).abs() < 1e-4);
        assert!((noise_fraction(86.0, &p()).unwrap() - 0.579).abs() < 1e-3);
        assert!(matches!(noise_fraction(0.0, &p()), Err(Error::Undefined(_))));
    }

    #[test]
    fn werner_visibility_examples() {
        assert_eq!(predict_werner_visibility(0.0, &p()).unwrap(), 0.94);
        let w = predict_werner_visibility(42.0, &p()).unwrap();
        assert!((w - 0.563).abs() < 1e-3);
        assert!((werner_witnesses(w).s - 1.594).abs() < 1e-3);
        let w = predict_werner_visibility(86.0, &p()).unwrap();
        assert!((w - 0.396).abs() < 1e-3);
        assert!((werner_witnesses(w).ppt + 0.047).abs() < 1e-3);
    }

    #[test]
    fn excitation_examples() {
        assert!((excitations_from_alpha(13.3, 0.55) - 7.3).abs() < 0.05);
        assert!((excitations_from_alpha(86.0, 0.55) - 47.3).abs() < 1e-9);
        assert_eq!(excitations_from_alpha(0.0, 0.55), 0.0);
    }

    #[test]
    fn depolarized_state_matches_werner_formulas() {
        for x in [0.0, 5.0, 13.3, 42.0, 86.0] {
            let rho = model_state(x, &p()).unwrap();
            let w = werner_witnesses(predict_werner_visibility(x, &p()).unwrap());
            assert!((chsh_maximum(&rho) - w.s).abs() < 1e-10);
            assert!((ppt_min_eigenvalue(&rho) - w.ppt).abs() < 1e-10);
            assert!((concurrence(&rho) - w.concurrence).abs() < 1e-10);
        }
    }

    #[test]
    fn curve_examples() {
        let grid = [0.0, 13.3, 42.0, 86.0];
        let c = predict_witness_curves(&grid, &p(), 500, 1, Execution::Sequential).unwrap();
        assert!((c.s[0] - 2.658).abs() < 1e-3);
        assert!((c.s[1] - 2.195).abs() < 5e-3);
        assert!(c.s.windows(2).all(|w| w[1] <= w[0]));
        assert!(c.s_band.iter().all(|&b| b >= 0.0));
        let again = predict_witness_curves(&grid, &p(), 500, 1, Execution::Parallel).unwrap();
        assert_eq!(c, again);
        assert!(predict_witness_curves(&[], &p(), 10, 1, Execution::Sequential).is_err());
    }

    #[test]
    fn crossings_exist() {
        let two = s_crossing(2.0, &p(), 500.0).unwrap();
        let root2 = s_crossing(std::f64::consts::SQRT_2, &p(), 500.0).unwrap();
        assert!(two > 13.3 && two < 42.0);
        assert!(root2 > two);
    }
}
