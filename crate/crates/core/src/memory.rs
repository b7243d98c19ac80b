//! Storage-loop picture of the quantum memory: every passage transmits a
//! fraction of the field immediately and re-emits another fraction one storage
//! time later. Two passages with a phase on the delayed pulse implement the
//! displacement and back-displacement.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use crate::error::{check_nonneg, check_unit, Error, Result};
use crate::fock::{TAU_NUM, C64};
use crate::quadrature::GaussHermite;

const QUADRATURE_NODES: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MemoryParams {
    pub eta_abs: f64,
    /// Storage-and-retrieval efficiency.
    pub eta: f64,
    /// Storage time in ns (bookkeeping only).
    pub tau_s: f64,
    /// Phase programmed on the delayed pulse.
    pub phi: f64,
}

impl Default for MemoryParams {
    fn default() -> Self {
        MemoryParams {
            eta_abs: 0.55,
            eta: 0.046,
            tau_s: 50.0,
            phi: PI,
        }
    }
}

impl MemoryParams {
    pub fn eta_t(&self) -> f64 {
        1.0 - self.eta_abs
    }

    pub fn validate(&self) -> Result<()> {
        check_unit("eta_abs", self.eta_abs)?;
        check_unit("eta", self.eta)?;
        check_nonneg("tau_s", self.tau_s)?;
        if self.eta > self.eta_abs {
            return Err(Error::InvalidParameter {
                name: "eta",
                value: self.eta,
                reason: "cannot exceed the absorption probability",
            });
        }
        // Operator norm of the two-tap map on arbitrary trains.
        if self.eta_t().sqrt() + self.eta.sqrt() > 1.0 + TAU_NUM {
            return Err(Error::ModelInconsistency(format!(
                "sqrt(eta_t) + sqrt(eta) = {} exceeds 1: the loop would amplify",
                self.eta_t().sqrt() + self.eta.sqrt()
            )));
        }
        Ok(())
    }
}

/// Pulses indexed by time slot (units of the storage time).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PulseTrain {
    slots: BTreeMap<i64, C64>,
}

impl PulseTrain {
    pub fn single(amplitude: C64) -> Self {
        let mut slots = BTreeMap::new();
        slots.insert(0, amplitude);
        PulseTrain { slots }
    }

    pub fn from_slots(pulses: impl IntoIterator<Item = (i64, C64)>) -> Self {
        let mut slots = BTreeMap::new();
        for (k, a) in pulses {
            *slots.entry(k).or_insert(C64::new(0.0, 0.0)) += a;
        }
        PulseTrain { slots }
    }

    pub fn amplitude(&self, slot: i64) -> C64 {
        self.slots.get(&slot).copied().unwrap_or_default()
    }

    pub fn pulses(&self) -> impl Iterator<Item = (i64, C64)> + '_ {
        self.slots.iter().map(|(&k, &a)| (k, a))
    }

    /// Total mean photon number.
    pub fn energy(&self) -> f64 {
        self.slots.values().map(|a| a.norm_sqr()).sum()
    }

    /// Apply a phase to the pulse in `slot`.
    pub fn modulate(&self, slot: i64, phi: f64) -> Self {
        let mut out = self.clone();
        if let Some(a) = out.slots.get_mut(&slot) {
            *a *= C64::from_polar(1.0, phi);
        }
        out
    }

    /// Time of a slot in ns.
    pub fn time(slot: i64, params: &MemoryParams) -> f64 {
        slot as f64 * params.tau_s
    }
}

pub fn memory_pass(input: &PulseTrain, params: &MemoryParams) -> Result<PulseTrain> {
    params.validate()?;
    let (t, r) = (params.eta_t().sqrt(), params.eta.sqrt());
    Ok(PulseTrain::from_slots(
        input.pulses().flat_map(|(k, a)| [(k, a * t), (k + 1, a * r)]),
    ))
}

/// Pass, modulate the delayed pulse by `φ`, pass again.
pub fn displacement_sequence(alpha: C64, params: &MemoryParams) -> Result<PulseTrain> {
    let first = memory_pass(&PulseTrain::single(alpha), params)?;
    memory_pass(&first.modulate(1, params.phi), params)
}

/// Mean photon number left in the middle slot after back-displacement.
pub fn back_displacement_residual(alpha: C64, phi: f64, params: &MemoryParams) -> Result<f64> {
    let p = MemoryParams { phi, ..*params };
    Ok(displacement_sequence(alpha, &p)?.amplitude(1).norm_sqr())
}

/// Closed form `4 η_t η |α|² cos²(φ/2)`.
pub fn back_displacement_residual_closed(alpha: C64, phi: f64, params: &MemoryParams) -> f64 {
    4.0 * params.eta_t() * params.eta * alpha.norm_sqr() * (phi / 2.0).cos().powi(2)
}

/// Residual photons averaged over Gaussian phase jitter around `π`.
pub fn mean_residual(alpha: C64, sigma_phi: f64, params: &MemoryParams) -> Result<f64> {
    check_nonneg("sigma_phi", sigma_phi)?;
    params.validate()?;
    let gh = GaussHermite::new(QUADRATURE_NODES);
    Ok(gh.gaussian_mean(sigma_phi, |e| back_displacement_residual_closed(alpha, PI + e, params)))
}

/// Interference contrast of two fields with relative amplitude `1 + δ_a`,
/// averaged over a phase `φ ~ N(π, σ_φ²)`.
pub fn visibility_from_errors(delta_a: f64, sigma_phi: f64) -> Result<f64> {
    check_nonneg("sigma_phi", sigma_phi)?;
    if !(delta_a > -1.0) || !delta_a.is_finite() {
        return Err(Error::InvalidParameter {
            name: "delta_a",
            value: delta_a,
            reason: "relative amplitude must stay positive",
        });
    }
    let b = 1.0 + delta_a;
    let gh = GaussHermite::new(QUADRATURE_NODES);
    let mean_cos = gh.gaussian_mean(sigma_phi, |e| -(PI + e).cos());
    Ok(2.0 * b * mean_cos / (1.0 + b * b))
}

/// Phase jitter that lowers the visibility to `target` for amplitude error
/// `δ_a`, by bisection on the quadrature.
pub fn sigma_for_visibility(target: f64, delta_a: f64) -> Result<f64> {
    let max = visibility_from_errors(delta_a, 0.0)?;
    if !(target > 0.0) || target > max {
        return Err(Error::UnattainableTarget { target, max });
    }
    let (mut lo, mut hi) = (0.0, 1.0);
    while visibility_from_errors(delta_a, hi)? > target {
        hi *= 2.0;
    }
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if visibility_from_errors(delta_a, mid)? > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_pass() {
        let p = MemoryParams::default();
        let out = memory_pass(&PulseTrain::single(C64::new(1.0, 0.0)), &p).unwrap();
        assert!((out.amplitude(0).re - p.eta_t().sqrt()).abs() < 1e-15);
        assert!((out.amplitude(1).re - p.eta.sqrt()).abs() < 1e-15);
        assert!(out.energy() <= 1.0 + TAU_NUM);
        let transparent = MemoryParams { eta_abs: 0.0, eta: 0.0, ..p };
        let out = memory_pass(&PulseTrain::single(C64::new(0.3, 0.4)), &transparent).unwrap();
        assert_eq!(out.amplitude(0), C64::new(0.3, 0.4));
        assert_eq!(out.amplitude(1), C64::new(0.0, 0.0));
    }

    #[test]
    fn three_pulses() {
        let p = MemoryParams { phi: 0.7, ..MemoryParams::default() };
        let a = C64::new(1.3, -0.2);
        let out = displacement_sequence(a, &p).unwrap();
        assert_eq!(out.pulses().count(), 3);
        let expect = (p.eta_t() * p.eta).sqrt() * (1.0 + C64::from_polar(1.0, 0.7)) * a;
        assert!((out.amplitude(1) - expect).norm() < 1e-14);
        assert!(out.energy() <= a.norm_sqr() + TAU_NUM);
    }

    #[test]
    fn residual_cases() {
        let p = MemoryParams::default();
        let a = C64::new(42f64.sqrt(), 0.0);
        assert!(back_displacement_residual(a, PI, &p).unwrap() < 1e-12);
        let full = back_displacement_residual(a, 0.0, &p).unwrap();
        assert!((full - 4.0 * p.eta_t() * p.eta * 42.0).abs() < 1e-12);
        for phi in [0.3, 1.0, 2.5] {
            let r = back_displacement_residual(a, phi, &p).unwrap();
            assert!((r - back_displacement_residual_closed(a, phi, &p)).abs() < 1e-12);
        }
        let d = 1e-3;
        let r = back_displacement_residual(a, PI * (1.0 - d), &p).unwrap();
        let approx = p.eta_t() * p.eta * 42.0 * PI * PI * d * d;
        assert!((r - approx).abs() < 1e-5 * approx);
    }

    #[test]
    fn passivity_enforced() {
        let p = MemoryParams { eta_abs: 0.5, eta: 0.5, ..MemoryParams::default() };
        assert!(matches!(p.validate(), Err(Error::ModelInconsistency(_))));
        let q = MemoryParams { eta_abs: 0.1, eta: 0.2, ..MemoryParams::default() };
        assert!(q.validate().is_err());
    }

    #[test]
    fn visibility_closed_form() {
        assert!((visibility_from_errors(0.0, 0.0).unwrap() - 1.0).abs() < 1e-14);
        for (d, s) in [(0.0, 0.1), (0.05, 0.2), (-0.1, 0.05)] {
            let b: f64 = 1.0 + d;
            let exact = 2.0 * b * (-s * s / 2.0f64).exp() / (1.0 + b * b);
            assert!((visibility_from_errors(d, s).unwrap() - exact).abs() < 1e-13);
        }
    }

    #[test]
    fn visibility_monotone() {
        let mut prev = 1.0 + 1e-15;
        for i in 0..100 {
            let v = visibility_from_errors(0.0, i as f64 * 0.02).unwrap();
            assert!(v <= prev);
            prev = v;
        }
        let mut prev = 1.0 + 1e-15;
        for i in 0..100 {
            let v = visibility_from_errors(i as f64 * 0.01, 0.05).unwrap();
            assert!(v <= prev);
            prev = v;
        }
    }

    #[test]
    fn calibrated_jitter() {
        let s = sigma_for_visibility(0.9985, 0.0).unwrap();
        assert!((s - (-2.0 * 0.9985f64.ln()).sqrt()).abs() < 1e-9);
        assert!((visibility_from_errors(0.0, s).unwrap() - 0.9985).abs() < 1e-12);
        assert!(sigma_for_visibility(0.99, 0.5).is_err());
    }

    #[test]
    fn residual_matches_noise_slope() {
        let p = MemoryParams::default();
        for v in [0.9999, 0.9985, 0.99] {
            let s = sigma_for_visibility(v, 0.0).unwrap();
            for a2 in [1.0, 13.3, 42.0] {
                let a = C64::new(f64::sqrt(a2), 0.0);
                let mu = p.eta_t() * a2;
                let slope = 2.0 * mu * p.eta * (1.0 - v);
                let res = mean_residual(a, s, &p).unwrap();
                assert!((res - slope).abs() < 0.1 * slope, "{v} {a2}: {res} vs {slope}");
                let pn = crate::noise::noise_click_prob(mu, p.eta, v);
                assert!((res - pn).abs() < 0.1 * pn);
            }
        }
    }
}
