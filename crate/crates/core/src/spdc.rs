//! Detailed SPDC model: polarization-entangled pairs from two two-mode squeezers,
//! click-detector heralding on Alice's side, and Bob's displaced, lossy,
//! phase-noisy measurement evaluated through the P-function of the thermal
//! conditional state.
//!
//! Modes: Alice `a`, `a⊥`; Bob `b`, `b⊥`, with pairs `(a, b⊥)` and `(a⊥, b)`.
//! Angles: `θ` is the displacement polarization relative to Alice's basis,
//! `θ′` is Bob's analyzer relative to Alice's basis. Alice's `+1` is no click
//! in `a` and a click in `a⊥`; Bob's `+1` is no click in `b^θ′` and a click in
//! `b^θ′⊥`. Every event with a click in the first mode counts as `−1`.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use crate::error::{check_nonneg, check_unit, Error, Result};
use crate::exec::{stream_id, stream_rng, Execution};
use crate::fock::{ClickDetector, MultiModeState, TAU_NUM, TAU_TRUNC};
use crate::quadrature::GaussHermite;
use crate::C64;

/// Which argument enters the phase-noise factor of the two-mode no-click term.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ZetaReading {
    /// Same `ζ` as the single-mode term.
    Printed,
    /// `ζ̄`, built from the displacement projections on `b` and `b⊥`.
    #[default]
    ZetaBar,
}

impl ZetaReading {
    pub fn name(self) -> &'static str {
        match self {
            ZetaReading::Printed => "zeta",
            ZetaReading::ZetaBar => "zeta_bar",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetailedParams {
    /// Squeezing parameter, `T_g = tanh g`.
    pub g: f64,
    /// Mode asymmetry entering as `R T_g`; `R² = 1 − η_A` for an Alice
    /// detector of efficiency `η_A`.
    pub r: f64,
    /// Bob's detector efficiency.
    pub eta_d: f64,
    /// Alice's dark-count probability.
    pub p_dc: f64,
    /// Displacement beam-splitter amplitude transmission.
    pub t1: f64,
    /// Memory amplitude transmission.
    pub t2: f64,
    /// Coupling efficiency.
    pub eta_c: f64,
    /// Displacement amplitude, `γ²` photons.
    pub gamma: f64,
    /// Standard deviation of the relative phase between the two displacements.
    pub sigma_phi: f64,
    /// Displacement polarization angle (radians, lab frame).
    pub theta_disp: f64,
    pub reading: ZetaReading,
    pub quadrature_nodes: usize,
}

impl Default for DetailedParams {
    fn default() -> Self {
        let n_bar: f64 = 0.005;
        DetailedParams {
            g: (n_bar / (1.0 + n_bar)).sqrt().atanh(),
            r: 0.9f64.sqrt(),
            eta_d: 0.6,
            p_dc: 1e-6,
            t1: 0.995f64.sqrt(),
            t2: 0.046f64.sqrt(),
            eta_c: 0.19,
            gamma: 42f64.sqrt(),
            sigma_phi: (2.0 * 0.0015f64).sqrt(),
            theta_disp: 0.0,
            reading: ZetaReading::default(),
            quadrature_nodes: 48,
        }
    }
}

impl DetailedParams {
    pub fn validate(&self) -> Result<()> {
        check_nonneg("g", self.g)?;
        check_unit("r", self.r)?;
        check_unit("eta_d", self.eta_d)?;
        if !(0.0..1.0).contains(&self.p_dc) {
            return Err(Error::InvalidParameter {
                name: "p_dc",
                value: self.p_dc,
                reason: "must lie in [0, 1)",
            });
        }
        check_unit("t1", self.t1)?;
        check_unit("t2", self.t2)?;
        check_unit("eta_c", self.eta_c)?;
        check_nonneg("gamma", self.gamma)?;
        check_nonneg("sigma_phi", self.sigma_phi)?;
        if self.quadrature_nodes == 0 {
            return Err(Error::InvalidParameter {
                name: "quadrature_nodes",
                value: 0.0,
                reason: "must be positive",
            });
        }
        Ok(())
    }

    pub fn t_g(&self) -> f64 {
        self.g.tanh()
    }

    pub fn n_bar(&self) -> f64 {
        let t2 = self.t_g().powi(2);
        t2 / (1.0 - t2)
    }

    pub fn m_bar(&self) -> f64 {
        let rt2 = (self.r * self.t_g()).powi(2);
        rt2 / (1.0 - rt2)
    }

    /// Overall transmission from Bob's source mode to a click.
    pub fn eta(&self) -> f64 {
        self.eta_d * self.t1.powi(2) * self.t2.powi(2) * self.eta_c
    }

    /// Displacement error `1 − V`, with `σ_φ² = 2(1 − V)`.
    pub fn eps_vis(&self) -> f64 {
        self.sigma_phi.powi(2) / 2.0
    }

    /// Weights of the two thermal products in the heralded state.
    pub fn herald_coefficients(&self) -> (f64, f64) {
        herald_coefficients(self.g, self.r, self.p_dc)
    }
}

fn herald_coefficients(g: f64, r: f64, p_dc: f64) -> (f64, f64) {
    let t2 = g.tanh().powi(2);
    let q = 1.0 - p_dc;
    let c1 = q * (1.0 - t2) / (1.0 - r * r * t2);
    (c1, c1 * c1)
}

/// Four outcome probabilities for (Alice, Bob) in the order
/// (+,+), (+,−), (−,+), (−,−).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JointProbabilities {
    pub raw: [f64; 4],
    pub normalized: [f64; 4],
    /// Whether any raw value was clipped into [0, 1].
    pub clipped: bool,
}

impl JointProbabilities {
    fn from_raw(raw: [f64; 4]) -> Result<Self> {
        if raw.iter().any(|&p| !(-TAU_NUM..=1.0 + TAU_NUM).contains(&p) || !p.is_finite()) {
            return Err(Error::ModelInconsistency(format!(
                "joint probabilities {raw:?} outside [0, 1]"
            )));
        }
        let clipped = raw.iter().any(|&p| !(0.0..=1.0).contains(&p));
        let c = raw.map(|p| p.clamp(0.0, 1.0));
        let total: f64 = c.iter().sum();
        if total <= 0.0 {
            return Err(Error::Undefined("all joint probabilities vanish"));
        }
        Ok(JointProbabilities {
            raw: c,
            normalized: c.map(|p| p / total),
            clipped,
        })
    }

    /// Fair-sampling correlator from the renormalized probabilities.
    pub fn correlator(&self) -> f64 {
        let n = &self.normalized;
        n[0] - n[1] - n[2] + n[3]
    }
}

/// SPDC state on (a, a⊥, b, b⊥), truncated at `n_max` photons per mode.
pub fn spdc_amplitudes(g: f64, n_max: usize) -> Result<MultiModeState> {
    check_nonneg("g", g)?;
    let t = g.tanh();
    let tail = 1.0 - (1.0 - t.powi(2 * (n_max as i32 + 1))).powi(2);
    if tail > TAU_TRUNC {
        return Err(Error::Truncation {
            n_max,
            tail,
            tol: TAU_TRUNC,
        });
    }
    let norm = 1.0 - t * t;
    let mut terms = Vec::with_capacity((n_max + 1) * (n_max + 1));
    for n in 0..=n_max {
        for m in 0..=n_max {
            terms.push((vec![n, m, m, n], C64::new(norm * t.powi((n + m) as i32), 0.0)));
        }
    }
    Ok(MultiModeState::from_terms(4, terms))
}

/// Heralded state of Bob's modes, diagonal in the Fock basis:
/// `weights[(k, l)]` is the weight of `|k⟩_b |l⟩_b⊥`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionalState {
    pub weights: DMatrix<f64>,
    /// `c₁`, `c₂` of `c₁ ρ(n̄) ⊗ ρ(m̄) − c₂ ρ(m̄) ⊗ ρ(m̄)`.
    pub c1: f64,
    pub c2: f64,
    pub n_bar: f64,
    pub m_bar: f64,
}

impl ConditionalState {
    /// Heralding probability.
    pub fn trace(&self) -> f64 {
        self.weights.sum()
    }
}

fn thermal_weights(mean: f64, n_max: usize) -> Vec<f64> {
    let ratio = mean / (1.0 + mean);
    (0..=n_max).map(|k| (1.0 - ratio) * ratio.powi(k as i32)).collect()
}

/// Thermal-difference form of the state heralded by Alice's `+1`.
pub fn conditional_state(g: f64, r: f64, p_dc: f64, n_max: usize) -> Result<ConditionalState> {
    check_nonneg("g", g)?;
    check_unit("r", r)?;
    let t2 = g.tanh().powi(2);
    if t2.powi(n_max as i32 + 1) > TAU_TRUNC {
        return Err(Error::Truncation {
            n_max,
            tail: t2.powi(n_max as i32 + 1),
            tol: TAU_TRUNC,
        });
    }
    let (c1, c2) = herald_coefficients(g, r, p_dc);
    let n_bar = t2 / (1.0 - t2);
    let rt2 = r * r * t2;
    let m_bar = rt2 / (1.0 - rt2);
    let tn = thermal_weights(n_bar, n_max);
    let tm = thermal_weights(m_bar, n_max);
    let weights = DMatrix::from_fn(n_max + 1, n_max + 1, |k, l| c1 * tn[k] * tm[l] - c2 * tm[k] * tm[l]);
    let min = weights.min();
    if min < -TAU_NUM {
        return Err(Error::ModelInconsistency(format!(
            "conditional state has negative weight {min:.3e}"
        )));
    }
    Ok(ConditionalState {
        weights,
        c1,
        c2,
        n_bar,
        m_bar,
    })
}

/// Alice's heralding outcome.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AliceOutcome {
    Plus,
    Minus,
}

/// Bob's (unnormalized) state given Alice's outcome, by partial trace of the
/// truncated pair state against Alice's click-detector POVM.
pub fn conditional_state_brute_force(
    state: &MultiModeState,
    alice: &ClickDetector,
    outcome: AliceOutcome,
    n_max: usize,
) -> DMatrix<f64> {
    let mut w = DMatrix::zeros(n_max + 1, n_max + 1);
    for (occ, amp) in state.terms() {
        let (na, nap, nb, nbp) = (occ[0], occ[1], occ[2], occ[3]);
        if nb > n_max || nbp > n_max {
            continue;
        }
        let nc_a = alice.no_click_weight(na);
        let nc_ap = alice.no_click_weight(nap);
        let povm = match outcome {
            AliceOutcome::Plus => nc_a * (1.0 - nc_ap),
            AliceOutcome::Minus => 1.0 - nc_a,
        };
        // Pair structure keeps Bob's reduced state diagonal.
        w[(nb, nbp)] += povm * amp.norm_sqr();
    }
    w
}

/// Sample from the thermal P-function `(1/πn̄) e^{−|γ|²/n̄}`.
pub fn thermal_p_sample<R: Rng + ?Sized>(n_bar: f64, rng: &mut R) -> C64 {
    if n_bar <= 0.0 {
        return C64::new(0.0, 0.0);
    }
    let s = (n_bar / 2.0).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(s * re, s * im)
}

/// Amplitudes reaching Bob's analyzer for source amplitudes `(α, β)` in
/// `(b, b⊥)` and phase error `φ`: `α̂ = ᾱ + cos θ M`, `β̂ = β̄ + sin θ M` with
/// `ᾱ = T₁T₂√η_c α` and `M = i T₂ γ φ`. Detector efficiency is applied in
/// [`click_prob_coherent`].
pub fn displaced_coherent_pair(
    alpha: C64,
    beta: C64,
    theta: f64,
    phi: f64,
    params: &DetailedParams,
) -> (C64, C64) {
    let scale = params.t1 * params.t2 * params.eta_c.sqrt();
    let m = C64::new(0.0, params.t2 * params.gamma * phi);
    let (s, c) = theta.sin_cos();
    (alpha * scale + m * c, beta * scale + m * s)
}

/// No click in `b^θ′` and a click in `b^θ′⊥` for coherent inputs.
pub fn click_prob_coherent(alpha_hat: C64, beta_hat: C64, theta_p: f64, eta_d: f64) -> f64 {
    let (s, c) = theta_p.sin_cos();
    let x = alpha_hat * c + beta_hat * s;
    let y = alpha_hat * s - beta_hat * c;
    (-x.norm_sqr() * eta_d).exp() * -(-y.norm_sqr() * eta_d).exp_m1()
}

/// Bob's no-click averages `(f, g)` for thermal means `nb`, `nbp` in `b`, `b⊥`:
/// `f` is the no-click probability of `b^θ′`, `g` that of both modes.
fn bob_no_click(
    theta: f64,
    theta_p: f64,
    nb: f64,
    nbp: f64,
    params: &DetailedParams,
    gh: &GaussHermite,
) -> (f64, f64) {
    let eta = params.eta();
    let (cp, sp) = (theta_p.cos().powi(2), theta_p.sin().powi(2));
    let (ct, st) = (theta.cos().powi(2), theta.sin().powi(2));
    let strength = params.t2.powi(2) * params.gamma.powi(2) * params.eta_d;
    let denom = 1.0 + eta * (cp * nb + sp * nbp);
    let zeta = strength * (theta - theta_p).cos().powi(2) / denom;
    let zeta_bar = strength * (ct / (1.0 + nb * eta) + st / (1.0 + nbp * eta));
    let phase = |z: f64| gh.gaussian_mean(params.sigma_phi, |phi| (-z * phi * phi).exp());
    let f = phase(zeta) / denom;
    let z_g = match params.reading {
        ZetaReading::Printed => zeta,
        ZetaReading::ZetaBar => zeta_bar,
    };
    let g = phase(z_g) / ((1.0 + nb * eta) * (1.0 + nbp * eta));
    (f, g)
}

/// Analytic joint probabilities at relative angles `θ`, `θ′`.
pub fn joint_probabilities(theta: f64, theta_p: f64, params: &DetailedParams) -> Result<JointProbabilities> {
    params.validate()?;
    let gh = GaussHermite::new(params.quadrature_nodes);
    let (c1, c2) = params.herald_coefficients();
    let (n, m) = (params.n_bar(), params.m_bar());
    let (f1, g1) = bob_no_click(theta, theta_p, n, m, params, &gh);
    let (f2, g2) = bob_no_click(theta, theta_p, m, m, params, &gh);
    let (f3, g3) = bob_no_click(theta, theta_p, n, n, params, &gh);
    JointProbabilities::from_raw([
        c1 * (f1 - g1) - c2 * (f2 - g2),
        c1 * (1.0 - f1) - c2 * (1.0 - f2),
        (f3 - g3) - c1 * (f1 - g1),
        (1.0 - f3) - c1 * (1.0 - f1),
    ])
}

/// Relative angles for lab-frame analyzer angles.
pub fn relative_angles(theta_a: f64, theta_b: f64, params: &DetailedParams) -> (f64, f64) {
    (params.theta_disp - theta_a, theta_b - theta_a)
}

/// CHSH value from fair-sampling correlators for lab-frame analyzer angles
/// `[a, a′, b, b′]` (radians).
pub fn chsh_from_detailed(settings: [f64; 4], params: &DetailedParams) -> Result<f64> {
    let [a, ap, b, bp] = settings;
    let e = |ta: f64, tb: f64| -> Result<f64> {
        let (t, tp) = relative_angles(ta, tb, params);
        Ok(joint_probabilities(t, tp, params)?.correlator())
    };
    Ok((e(a, b)? + e(a, bp)? + e(ap, b)? - e(ap, bp)?).abs())
}

/// Default CHSH analyzer angles (radians): a=45°, a′=0°, b=22.5°, b′=67.5°.
pub fn default_chsh_angles() -> [f64; 4] {
    [45f64, 0.0, 22.5, 67.5].map(f64::to_radians)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McOptions {
    pub samples: usize,
    pub seed: u64,
    /// Grid-point index selecting the random stream.
    pub point: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub mean: [f64; 4],
    pub std_err: [f64; 4],
    pub samples: usize,
    /// Some estimate is negative by more than three standard errors.
    pub flagged: bool,
}

const MC_CHUNK: usize = 8192;

#[derive(Clone, Copy, Default)]
struct Moments {
    n: f64,
    mean: [f64; 4],
    m2: [f64; 4],
}

impl Moments {
    fn push(&mut self, x: [f64; 4]) {
        self.n += 1.0;
        for k in 0..4 {
            let d = x[k] - self.mean[k];
            self.mean[k] += d / self.n;
            self.m2[k] += d * (x[k] - self.mean[k]);
        }
    }

    fn merge(self, o: Moments) -> Moments {
        if self.n == 0.0 {
            return o;
        }
        let n = self.n + o.n;
        let mut out = Moments {
            n,
            ..Default::default()
        };
        for k in 0..4 {
            let d = o.mean[k] - self.mean[k];
            out.mean[k] = self.mean[k] + d * o.n / n;
            out.m2[k] = self.m2[k] + o.m2[k] + d * d * self.n * o.n / n;
        }
        out
    }
}

/// Monte-Carlo estimate of the raw joint probabilities: thermal amplitudes are
/// drawn from their P-functions (shared across the three thermal products),
/// `φ` from `N(0, σ_φ²)`, and click probabilities evaluated per sample.
pub fn monte_carlo_oracle(
    theta: f64,
    theta_p: f64,
    params: &DetailedParams,
    opts: &McOptions,
    exec: Execution,
) -> Result<McEstimate> {
    params.validate()?;
    if opts.samples < 10_000 {
        return Err(Error::InvalidParameter {
            name: "samples",
            value: opts.samples as f64,
            reason: "at least 10^4 samples required",
        });
    }
    let (c1, c2) = params.herald_coefficients();
    let (n, m) = (params.n_bar(), params.m_bar());
    let phase = Normal::new(0.0, params.sigma_phi).map_err(|_| Error::InvalidParameter {
        name: "sigma_phi",
        value: params.sigma_phi,
        reason: "invalid phase spread",
    })?;
    let (sp, cp) = theta_p.sin_cos();
    let chunks = opts.samples.div_ceil(MC_CHUNK);
    let parts = exec.map(chunks, |chunk| {
        let mut rng = stream_rng(opts.seed, stream_id(opts.point, chunk));
        let count = MC_CHUNK.min(opts.samples - chunk * MC_CHUNK);
        let mut mom = Moments::default();
        for _ in 0..count {
            let z1 = thermal_p_sample(1.0, &mut rng);
            let z2 = thermal_p_sample(1.0, &mut rng);
            let phi = phase.sample(&mut rng);
            let no_clicks = |nb: f64, nbp: f64| {
                let (ah, bh) = displaced_coherent_pair(z1 * nb.sqrt(), z2 * nbp.sqrt(), theta, phi, params);
                let f = (-(ah * cp + bh * sp).norm_sqr() * params.eta_d).exp();
                let g = f * (-(ah * sp - bh * cp).norm_sqr() * params.eta_d).exp();
                (f, g)
            };
            let (f1, g1) = no_clicks(n, m);
            let (f2, g2) = no_clicks(m, m);
            let (f3, g3) = no_clicks(n, n);
            mom.push([
                c1 * (f1 - g1) - c2 * (f2 - g2),
                c1 * (1.0 - f1) - c2 * (1.0 - f2),
                (f3 - g3) - c1 * (f1 - g1),
                (1.0 - f3) - c1 * (1.0 - f1),
            ]);
        }
        mom
    });
    let total = parts.into_iter().fold(Moments::default(), Moments::merge);
    let std_err = total.m2.map(|m2| (m2 / (total.n - 1.0)).sqrt() / total.n.sqrt());
    let flagged = (0..4).any(|k| total.mean[k] + 3.0 * std_err[k] < 0.0);
    Ok(McEstimate {
        mean: total.mean,
        std_err,
        samples: opts.samples,
        flagged,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleRow {
    pub theta: f64,
    pub theta_p: f64,
    pub analytic: [f64; 4],
    pub mc: McEstimate,
    /// `|analytic − mc| / se` per outcome.
    pub z: [f64; 4],
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleReport {
    pub reading: ZetaReading,
    pub rows: Vec<OracleRow>,
}

impl OracleReport {
    pub fn max_z(&self) -> f64 {
        self.rows.iter().flat_map(|r| r.z).fold(0.0, f64::max)
    }

    pub fn passes(&self, threshold: f64) -> bool {
        self.max_z() <= threshold
    }
}

/// Compares the analytic model with the oracle over a (θ, θ′) grid.
pub fn compare_with_oracle(
    thetas: &[f64],
    thetas_p: &[f64],
    params: &DetailedParams,
    samples: usize,
    seed: u64,
    exec: Execution,
) -> Result<OracleReport> {
    let pts: Vec<(f64, f64)> = thetas
        .iter()
        .flat_map(|&t| thetas_p.iter().map(move |&tp| (t, tp)))
        .collect();
    let rows = pts
        .iter()
        .enumerate()
        .map(|(i, &(t, tp))| -> Result<OracleRow> {
            let analytic = joint_probabilities(t, tp, params)?.raw;
            let mc = monte_carlo_oracle(
                t,
                tp,
                params,
                &McOptions {
                    samples,
                    seed,
                    point: i,
                },
                exec,
            )?;
            let z = std::array::from_fn(|k| {
                let d = (analytic[k] - mc.mean[k]).abs();
                if mc.std_err[k] > 0.0 {
                    d / mc.std_err[k]
                } else if d < 1e-15 {
                    0.0
                } else {
                    f64::INFINITY
                }
            });
            Ok(OracleRow {
                theta: t,
                theta_p: tp,
                analytic,
                mc,
                z,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(OracleReport {
        reading: params.reading,
        rows,
    })
}

/// The 4×4 validation grid: θ, θ′ ∈ {0°, 22.5°, 45°, 67.5°}.
pub fn validation_grid() -> Vec<f64> {
    [0.0f64, 22.5, 45.0, 67.5].map(f64::to_radians).to_vec()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::{polarization_analyzer, MultiModeState};
    use std::f64::consts::{FRAC_PI_4, SQRT_2};

    #[test]
    fn spdc_examples() {
        let vac = spdc_amplitudes(0.0, 4).unwrap();
        assert!((vac.amplitude(&[0, 0, 0, 0]).re - 1.0).abs() < 1e-15);
        assert!((vac.norm_sqr() - 1.0).abs() < 1e-15);
        let s = spdc_amplitudes(0.2, 12).unwrap();
        for (occ, _) in s.terms() {
            assert_eq!(occ[0], occ[3]);
            assert_eq!(occ[1], occ[2]);
        }
        let ratio = s.amplitude(&[1, 0, 0, 1]) / s.amplitude(&[0, 0, 0, 0]);
        assert!((ratio.re - 0.2f64.tanh()).abs() < 1e-14);
        assert!((s.norm_sqr() - 1.0).abs() < 1e-10);
        assert!(spdc_amplitudes(1.5, 5).is_err());
    }

    #[test]
    fn conditional_state_matches_partial_trace() {
        for (g, eta_a, p_dc) in [(0.05, 0.1, 1e-6), (0.3, 0.4, 0.01), (0.2, 1.0, 0.0)] {
            let n_max = 12;
            let r = (1.0f64 - eta_a).sqrt();
            let thermal = conditional_state(g, r, p_dc, n_max).unwrap();
            let det = ClickDetector::new(eta_a, p_dc).unwrap();
            let state = spdc_amplitudes(g, n_max).unwrap();
            let brute = conditional_state_brute_force(&state, &det, AliceOutcome::Plus, n_max);
            assert!((&thermal.weights - &brute).abs().max() < 1e-8);
            // Heralding probability straight from the POVM.
            let herald: f64 = state
                .terms()
                .map(|(o, a)| a.norm_sqr() * det.no_click_weight(o[0]) * (1.0 - det.no_click_weight(o[1])))
                .sum();
            assert!((thermal.trace() - herald).abs() < 1e-8);
        }
    }

    #[test]
    fn conditional_state_single_photon_limit() {
        let s = conditional_state(0.01, 0.0, 0.0, 6).unwrap();
        let norm = s.trace();
        assert!(s.weights[(1, 0)] / norm > 0.999);
    }

    #[test]
    fn thermal_sampling() {
        let mut rng = stream_rng(5, 0);
        assert_eq!(thermal_p_sample(0.0, &mut rng), C64::new(0.0, 0.0));
        let n = 1_000_000;
        let mean: f64 = (0..n).map(|_| thermal_p_sample(0.7, &mut rng).norm_sqr()).sum::<f64>() / n as f64;
        // |γ|² is exponential with mean n̄ and standard deviation n̄.
        assert!((mean - 0.7).abs() < 5.0 * 0.7 / (n as f64).sqrt());
    }

    #[test]
    fn displaced_pair_examples() {
        let p = DetailedParams::default();
        let a = C64::new(0.3, 0.1);
        let b = C64::new(-0.2, 0.4);
        let scale = p.t1 * p.t2 * p.eta_c.sqrt();
        let zero_gamma = DetailedParams { gamma: 0.0, ..p };
        let (ah, bh) = displaced_coherent_pair(a, b, 0.4, 0.1, &zero_gamma);
        assert!((ah - a * scale).norm() < 1e-15 && (bh - b * scale).norm() < 1e-15);
        let (ah, bh) = displaced_coherent_pair(a, b, 0.4, 0.0, &p);
        assert!((ah - a * scale).norm() < 1e-15 && (bh - b * scale).norm() < 1e-15);
        let (ah, bh) = displaced_coherent_pair(C64::default(), C64::default(), 0.0, 0.1, &p);
        assert!(ah.norm() > 0.0 && bh.norm() == 0.0);
    }

    #[test]
    fn click_examples() {
        let z = C64::new(0.0, 0.0);
        let one = C64::new(1.0, 0.0);
        assert_eq!(click_prob_coherent(z, z, 0.3, 0.7), 0.0);
        assert_eq!(click_prob_coherent(one, one, 0.3, 0.0), 0.0);
        assert_eq!(click_prob_coherent(one, z, 0.0, 1.0), 0.0);
    }

    #[test]
    fn phase_average_matches_closed_form() {
        let p = DetailedParams::default();
        let gh = GaussHermite::new(p.quadrature_nodes);
        for z in [0.0, 0.5, 1.16, 3.0] {
            let q = gh.gaussian_mean(p.sigma_phi, |phi| (-z * phi * phi).exp());
            let closed = (1.0 + 4.0 * z * p.eps_vis()).powf(-0.5);
            assert!((q - closed).abs() < 1e-14);
        }
    }

    #[test]
    fn renormalized_sum_to_one() {
        let p = DetailedParams::default();
        for (t, tp) in [(0.0, 0.0), (0.3, 1.1), (-FRAC_PI_4, 0.4)] {
            let j = joint_probabilities(t, tp, &p).unwrap();
            assert!((j.normalized.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            assert!(!j.clipped);
        }
    }

    #[test]
    fn ideal_limit_correlations() {
        let p = DetailedParams {
            g: 0.01,
            r: 0.0,
            eta_d: 1.0,
            p_dc: 0.0,
            t1: 1.0,
            t2: 1.0,
            eta_c: 1.0,
            gamma: 0.0,
            ..DetailedParams::default()
        };
        for tp in [0.0, 0.3, 0.9] {
            let e = joint_probabilities(0.0, tp, &p).unwrap().correlator();
            assert!((e + (2.0 * tp).cos()).abs() < 2e-3, "{e}");
        }
        let s = chsh_from_detailed(default_chsh_angles(), &p).unwrap();
        assert!((s - 2.0 * SQRT_2).abs() < 5e-3);
    }

    /// Bob's `±1` probability for a diagonal two-mode state, computed by
    /// propagating every Fock component through the analyzer.
    fn bob_fock(weights: &DMatrix<f64>, theta_p: f64, eta: f64, plus: bool) -> f64 {
        let ana = polarization_analyzer(theta_p);
        let mut p = 0.0;
        for k in 0..weights.nrows() {
            for l in 0..weights.ncols() {
                let w = weights[(k, l)];
                if w == 0.0 {
                    continue;
                }
                let out = ana.apply_fock(&MultiModeState::fock(&[k, l]));
                for (occ, amp) in out.terms() {
                    let nc0 = (1.0 - eta).powi(occ[0] as i32);
                    let nc1 = (1.0 - eta).powi(occ[1] as i32);
                    let povm = if plus { nc0 * (1.0 - nc1) } else { 1.0 - nc0 };
                    p += w * amp.norm_sqr() * povm;
                }
            }
        }
        p
    }

    #[test]
    fn analytic_matches_fock_brute_force_without_displacement() {
        let eta_a = 0.3;
        let p = DetailedParams {
            g: 0.05,
            r: (1.0f64 - eta_a).sqrt(),
            p_dc: 1e-3,
            eta_d: 0.8,
            t1: 0.9,
            t2: 0.8,
            eta_c: 0.7,
            gamma: 0.0,
            ..DetailedParams::default()
        };
        let n_max = 12;
        let det = ClickDetector::new(eta_a, p.p_dc).unwrap();
        let state = spdc_amplitudes(p.g, n_max).unwrap();
        let plus = conditional_state_brute_force(&state, &det, AliceOutcome::Plus, n_max);
        let minus = conditional_state_brute_force(&state, &det, AliceOutcome::Minus, n_max);
        for tp in [0.0, 0.4, 1.2] {
            let j = joint_probabilities(0.0, tp, &p).unwrap();
            let brute = [
                bob_fock(&plus, tp, p.eta(), true),
                bob_fock(&plus, tp, p.eta(), false),
                bob_fock(&minus, tp, p.eta(), true),
                bob_fock(&minus, tp, p.eta(), false),
            ];
            for k in 0..4 {
                assert!((j.raw[k] - brute[k]).abs() < 1e-10, "{k}: {} {}", j.raw[k], brute[k]);
            }
        }
    }

    #[test]
    fn perfect_back_displacement_removes_gamma_dependence() {
        let base = DetailedParams {
            sigma_phi: 0.0,
            ..DetailedParams::default()
        };
        let s0 = chsh_from_detailed(default_chsh_angles(), &DetailedParams { gamma: 0.0, ..base }).unwrap();
        let s1 = chsh_from_detailed(default_chsh_angles(), &DetailedParams { gamma: 20.0, ..base }).unwrap();
        assert!((s0 - s1).abs() < 1e-12);
    }

    #[test]
    fn s_decreases_with_displacement() {
        let angles = default_chsh_angles();
        let mut last = f64::INFINITY;
        for g2 in [0.0, 5.0, 13.3, 42.0, 86.0] {
            let p = DetailedParams {
                gamma: f64::sqrt(g2),
                ..DetailedParams::default()
            };
            let s = chsh_from_detailed(angles, &p).unwrap();
            assert!(s < last, "{g2}: {s}");
            last = s;
        }
    }

    #[test]
    fn blind_detector_never_clicks() {
        // Bob has no dark counts, so both of his outcomes need a detection.
        let p = DetailedParams {
            eta_d: 1e-9,
            ..DetailedParams::default()
        };
        let j = joint_probabilities(0.2, 0.7, &p).unwrap();
        assert!(j.raw.iter().all(|&x| x < 1e-9));
        let blind = DetailedParams { eta_d: 0.0, ..p };
        assert!(matches!(joint_probabilities(0.2, 0.7, &blind), Err(Error::Undefined(_))));
    }

    #[test]
    fn oracle_deterministic_and_scaling() {
        let p = DetailedParams::default();
        let o = |n, exec| {
            monte_carlo_oracle(0.3, 0.5, &p, &McOptions { samples: n, seed: 11, point: 0 }, exec).unwrap()
        };
        let a = o(20_000, Execution::Sequential);
        assert_eq!(a, o(20_000, Execution::Parallel));
        let b = o(80_000, Execution::Parallel);
        for k in 0..4 {
            let ratio = a.std_err[k] / b.std_err[k];
            assert!((ratio - 2.0).abs() < 0.3, "{ratio}");
        }
        assert!(monte_carlo_oracle(0.0, 0.0, &p, &McOptions { samples: 10, seed: 0, point: 0 }, Execution::Sequential).is_err());
    }

    #[test]
    fn oracle_vacuum_limit() {
        let p = DetailedParams {
            g: 0.0,
            gamma: 0.0,
            ..DetailedParams::default()
        };
        let mc = monte_carlo_oracle(0.1, 0.2, &p, &McOptions { samples: 10_000, seed: 1, point: 0 }, Execution::Sequential)
            .unwrap();
        // No light reaches Bob, so no joint event is recorded.
        assert!(mc.mean.iter().all(|&m| m.abs() < 1e-15));
        assert!(mc.std_err.iter().all(|&s| s < 1e-15));
    }
}
