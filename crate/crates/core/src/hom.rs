//! Hong-Ou-Mandel interference between a heralded single photon and a weak
//! coherent pulse, and its dependence on the coincidence window.
//!
//! Both inputs are diagonal in the photon-number basis (the heralded state
//! carries no phase reference, so the coherent pulse is effectively phase
//! randomized). Coincidences are therefore a mixture over Fock inputs, each
//! propagated exactly through the 50/50 splitter.

use statrs::function::erf::{erf, erfc};

use crate::error::{check_nonneg, check_unit, Error, Result};
use crate::fock::{
    beam_splitter, loss_channel, poisson_distribution, poisson_tail, ClickDetector, DensityOperator,
    MultiModeState,
};

/// Probabilities below this are dropped from the Fock mixtures.
const NEGLIGIBLE: f64 = 1e-16;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HomParams {
    pub mu_csp: f64,
    pub p_pair: f64,
    /// Signal-arm heralding efficiency.
    pub eta_h: f64,
    pub xi: f64,
    /// Idler (herald) detector efficiency.
    pub herald_efficiency: f64,
    pub detector: ClickDetector,
}

impl Default for HomParams {
    fn default() -> Self {
        HomParams {
            mu_csp: 0.012,
            p_pair: 0.005,
            eta_h: 0.19,
            xi: 1.0,
            herald_efficiency: 0.1,
            detector: ClickDetector::ideal(),
        }
    }
}

impl HomParams {
    pub fn validate(&self) -> Result<()> {
        check_nonneg("mu_csp", self.mu_csp)?;
        check_nonneg("p_pair", self.p_pair)?;
        check_unit("eta_h", self.eta_h)?;
        check_unit("xi", self.xi)?;
        check_unit("herald_efficiency", self.herald_efficiency)?;
        if self.herald_efficiency == 0.0 {
            return Err(Error::InvalidParameter {
                name: "herald_efficiency",
                value: 0.0,
                reason: "herald never fires",
            });
        }
        if self.p_pair == 0.0 {
            return Err(Error::Undefined("no pairs: heralded state undefined"));
        }
        Ok(())
    }
}

/// Photon-number distribution of the heralded signal: two-mode squeezed
/// vacuum with mean pair number `p_pair`, conditioned on an idler click and
/// attenuated by `η_h`.
pub fn heralded_signal_distribution(params: &HomParams) -> Result<Vec<f64>> {
    params.validate()?;
    let lambda = params.p_pair / (1.0 + params.p_pair);
    let mut k_max = 1;
    while lambda.powi(k_max) > NEGLIGIBLE {
        k_max += 1;
    }
    let raw: Vec<f64> = (0..=k_max)
        .map(|k| (1.0 - lambda) * lambda.powi(k) * (1.0 - (1.0 - params.herald_efficiency).powi(k)))
        .collect();
    let total: f64 = raw.iter().sum();
    let herald: Vec<f64> = raw.iter().map(|w| w / total).collect();
    let lossy = loss_channel(params.eta_h, &DensityOperator::diagonal(&herald)?)?;
    Ok(lossy.photon_number_distribution())
}

fn truncate(dist: Vec<f64>) -> Vec<(usize, f64)> {
    dist.into_iter().enumerate().filter(|(_, p)| *p > NEGLIGIBLE).collect()
}

fn csp_distribution(mean: f64) -> Vec<f64> {
    let mut n_max = 1;
    while poisson_tail(mean, n_max) > NEGLIGIBLE {
        n_max += 1;
    }
    poisson_distribution(mean, n_max)
}

/// Coincidence probability behind a 50/50 splitter for diagonal inputs
/// `signal` and `matched` in the same mode, plus a coherent component of mean
/// `unmatched_mean` in an orthogonal mode.
pub fn coincidence_probability(signal: &[f64], matched: &[f64], unmatched_mean: f64, det: &ClickDetector) -> f64 {
    let bs = beam_splitter(0.5).expect("valid transmittance");
    // Orthogonal coherent light splits into two independent coherent halves.
    let f = (-det.efficiency * unmatched_mean / 2.0).exp();
    let (mut nc1, mut nc2, mut nc12) = (0.0, 0.0, 0.0);
    for (k, ps) in truncate(signal.to_vec()) {
        for (n, pc) in truncate(matched.to_vec()) {
            let out = bs.apply_fock(&MultiModeState::fock(&[k, n]));
            for (occ, amp) in out.terms() {
                let w = ps * pc * amp.norm_sqr();
                let (w1, w2) = (det.no_click_weight(occ[0]) * f, det.no_click_weight(occ[1]) * f);
                nc1 += w * w1;
                nc2 += w * w2;
                nc12 += w * w1 * w2;
            }
        }
    }
    (1.0 - nc1 - nc2 + nc12).max(0.0)
}

/// `V = (R⊥ − R∥)/R⊥` for an arbitrary diagonal signal distribution.
pub fn hom_visibility_with_signal(signal: &[f64], mu_csp: f64, xi: f64, det: &ClickDetector) -> Result<f64> {
    check_nonneg("mu_csp", mu_csp)?;
    check_unit("xi", xi)?;
    let r_perp = coincidence_probability(signal, &[1.0], mu_csp, det);
    if r_perp <= 0.0 {
        return Err(Error::Undefined("no coincidences for orthogonal polarizations"));
    }
    let r_par = coincidence_probability(signal, &csp_distribution(xi * mu_csp), (1.0 - xi) * mu_csp, det);
    Ok(((r_perp - r_par) / r_perp).clamp(0.0, 1.0))
}

pub fn hom_visibility(params: &HomParams) -> Result<f64> {
    let signal = heralded_signal_distribution(params)?;
    hom_visibility_with_signal(&signal, params.mu_csp, params.xi, &params.detector)
}

pub fn overlap_ratio(v_m: f64, v_e: f64) -> Result<f64> {
    if v_m > v_e {
        return Err(Error::Inconsistent(format!(
            "measured visibility {v_m} exceeds expected {v_e}"
        )));
    }
    if !(v_m > 0.0) || v_e > 1.0 {
        return Err(Error::InvalidParameter {
            name: "v_m",
            value: v_m,
            reason: "need 0 < V_m <= V_e <= 1",
        });
    }
    Ok(v_m / v_e)
}

/// Intensity profiles (ns): Gaussian coherent pulse and double-sided
/// exponential heralded photon `exp(−|t|/τ_c)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TemporalProfiles {
    pub csp_fwhm: f64,
    pub tau_c: f64,
}

impl Default for TemporalProfiles {
    fn default() -> Self {
        TemporalProfiles {
            csp_fwhm: 1.19,
            tau_c: 1.9,
        }
    }
}

impl TemporalProfiles {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("csp_fwhm", self.csp_fwhm), ("tau_c", self.tau_c)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter {
                    name,
                    value: v,
                    reason: "width must be positive",
                });
            }
        }
        Ok(())
    }

    fn csp_sigma(&self) -> f64 {
        self.csp_fwhm / (2.0 * (2.0 * std::f64::consts::LN_2).sqrt())
    }

    pub fn csp_intensity(&self, t: f64) -> f64 {
        let s = self.csp_sigma();
        (-t * t / (2.0 * s * s)).exp()
    }

    pub fn hsp_intensity(&self, t: f64) -> f64 {
        (-t.abs() / self.tau_c).exp()
    }

    /// Squared normalized overlap of the profiles restricted to `[−w/2, w/2]`.
    pub fn overlap(&self, window: f64) -> Result<f64> {
        self.validate()?;
        if !(window > 0.0) {
            return Err(Error::InvalidParameter {
                name: "window",
                value: window,
                reason: "must be positive",
            });
        }
        let h = window / 2.0;
        let s = self.csp_sigma();
        let tau = self.tau_c;
        let pi = std::f64::consts::PI;
        let gauss = s * (2.0 * pi).sqrt() * erf(h / (s * std::f64::consts::SQRT_2));
        let expo = 2.0 * tau * -(-h / tau).exp_m1();
        // ∫ exp(−t²/4s² − |t|/2τ) over the window, by completing the square.
        let c = s / (2.0 * tau);
        let cross = 2.0 * s * pi.sqrt() * (c * c).exp() * (erfc(c) - erfc(h / (2.0 * s) + c));
        Ok((cross * cross / (gauss * expo)).min(1.0))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WindowPoint {
    pub window: f64,
    pub xi: f64,
    pub v_m: f64,
}

pub fn overlap_vs_window(profiles: &TemporalProfiles, windows: &[f64], v_e: f64) -> Result<Vec<WindowPoint>> {
    check_unit("v_e", v_e)?;
    windows
        .iter()
        .map(|&w| {
            let xi = profiles.overlap(w)?;
            Ok(WindowPoint { window: w, xi, v_m: xi * v_e })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_photons_never_coincide() {
        let c = coincidence_probability(&[0.0, 1.0], &[0.0, 1.0], 0.0, &ClickDetector::ideal());
        assert!(c.abs() < 1e-15, "{c}");
        let d = coincidence_probability(&[0.0, 1.0], &[1.0], 1e-30, &ClickDetector::ideal());
        assert!(d < 1e-15);
    }

    #[test]
    fn default_visibility() {
        let v = hom_visibility(&HomParams::default()).unwrap();
        assert!((v - 0.8487).abs() < 1e-3, "{v}");
    }

    #[test]
    fn classical_bound() {
        let mu = 1e-4;
        let signal = csp_distribution(mu);
        let v = hom_visibility_with_signal(&signal, mu, 1.0, &ClickDetector::ideal()).unwrap();
        assert!((v - 0.5).abs() < 1e-3, "{v}");
    }

    #[test]
    fn distinguishable_limit() {
        let p = HomParams { xi: 0.0, ..HomParams::default() };
        assert!(hom_visibility(&p).unwrap().abs() < 1e-12);
    }

    #[test]
    fn interior_maximum_in_mu() {
        let mus = [0.001, 0.003, 0.006, 0.012, 0.02, 0.05, 0.1];
        let v: Vec<f64> = mus
            .iter()
            .map(|&m| hom_visibility(&HomParams { mu_csp: m, ..HomParams::default() }).unwrap())
            .collect();
        let (imax, _) = v.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap();
        assert!(imax > 0 && imax < mus.len() - 1, "{v:?}");
    }

    #[test]
    fn visibility_falls_with_pairs() {
        let mut prev = 1.0;
        for p in [0.001, 0.005, 0.02, 0.05] {
            let v = hom_visibility(&HomParams { p_pair: p, ..HomParams::default() }).unwrap();
            assert!(v < prev);
            prev = v;
        }
    }

    #[test]
    fn overlap_ratio_examples() {
        assert!((overlap_ratio(0.74, 0.85).unwrap() - 0.8706).abs() < 5e-5);
        assert_eq!(overlap_ratio(0.85, 0.85).unwrap(), 1.0);
        assert_eq!(overlap_ratio(0.5, 1.0).unwrap(), 0.5);
        assert!(matches!(overlap_ratio(0.9, 0.85), Err(Error::Inconsistent(_))));
    }

    #[test]
    fn overlap_matches_numeric_integral() {
        let p = TemporalProfiles::default();
        for w in [0.2, 1.0, 3.0, 10.0] {
            let n = 20000;
            let h = w / n as f64;
            let simpson = |f: &dyn Fn(f64) -> f64| -> f64 {
                let mut acc = f(-w / 2.0) + f(w / 2.0);
                for i in 1..n {
                    let t = -w / 2.0 + i as f64 * h;
                    acc += if i % 2 == 1 { 4.0 } else { 2.0 } * f(t);
                }
                acc * h / 3.0
            };
            let cross = simpson(&|t| (p.csp_intensity(t) * p.hsp_intensity(t)).sqrt());
            let xi = cross * cross / (simpson(&|t| p.csp_intensity(t)) * simpson(&|t| p.hsp_intensity(t)));
            assert!((xi - p.overlap(w).unwrap()).abs() < 1e-9, "{w}");
        }
    }

    #[test]
    fn overlap_limits_and_calibration() {
        let p = TemporalProfiles::default();
        assert!(p.overlap(1e-4).unwrap() > 1.0 - 1e-6);
        assert!((p.overlap(3.0).unwrap() - 0.8706).abs() < 0.05);
        let mut prev = 1.0;
        for i in 1..600 {
            let x = p.overlap(i as f64 * 0.05).unwrap();
            assert!(x <= prev + 1e-5);
            prev = x;
        }
    }

    #[test]
    fn heralded_signal_normalized() {
        let d = heralded_signal_distribution(&HomParams::default()).unwrap();
        assert!((d.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!((d[1] - 0.19).abs() < 0.01);
    }
}
