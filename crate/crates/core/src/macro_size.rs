//! Macroscopicity of the displaced single-photon components: photon-number
//! distributions, coarse-grained guessing probability, maximum coarse graining
//! and the equivalent `|0⟩` vs `|N⟩` size.
//!
//! A coarse-grained detector reports `n + σ·ξ` with `ξ ~ N(0, 1)`. For two
//! equiprobable hypotheses the optimal guessing probability is
//! `P_g = 1/2 + ‖p̃₊ − p̃₋‖₁ / 4`, where `p̃` are the smoothed densities.

use statrs::function::erf::erfc;

use crate::error::{check_nonneg, check_unit, Error, Result};
use crate::fock::{displacement_operator, poisson_distribution, suggested_n_max, TruncatedState, C64};

/// Below this σ the Gaussians on neighbouring integers do not overlap and the
/// discrete L1 distance is exact to double precision.
const SIGMA_DISCRETE: f64 = 0.02;

#[derive(Debug, Clone, PartialEq)]
pub struct MacroComponentPair {
    pub alpha: f64,
    /// Distribution of `D(α)(|0⟩+|1⟩)/√2`.
    pub p_plus: Vec<f64>,
    /// Distribution of `D(α)(|0⟩−|1⟩)/√2`.
    pub p_minus: Vec<f64>,
}

impl MacroComponentPair {
    pub fn mean_separation(&self) -> f64 {
        crate::fock::mean_of(&self.p_plus) - crate::fock::mean_of(&self.p_minus)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SizeResult {
    pub p_g: f64,
    pub sigma_max: f64,
    pub n_eff: usize,
}

pub fn macro_components(alpha: f64, n_max: usize) -> Result<MacroComponentPair> {
    check_nonneg("alpha", alpha)?;
    let d = displacement_operator(C64::new(alpha, 0.0), n_max)?;
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let zero = TruncatedState::fock(0, n_max)?;
    let one = TruncatedState::fock(1, n_max)?;
    let plus = zero.superpose(C64::new(s, 0.0), &one, C64::new(s, 0.0)).apply(&d);
    let minus = zero.superpose(C64::new(s, 0.0), &one, C64::new(-s, 0.0)).apply(&d);
    Ok(MacroComponentPair {
        alpha,
        p_plus: plus.photon_number_distribution(),
        p_minus: minus.photon_number_distribution(),
    })
}

/// [`macro_components`] with a truncation chosen from `α`.
pub fn macro_components_auto(alpha: f64) -> Result<MacroComponentPair> {
    macro_components(alpha, suggested_n_max(alpha * alpha + 1.0))
}

fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// L1 distance between two photon-number distributions after Gaussian
/// smoothing of width `sigma`, integrated exactly between sign changes.
pub fn smoothed_l1(p: &[f64], q: &[f64], sigma: f64) -> f64 {
    let len = p.len().max(q.len());
    let diff: Vec<(f64, f64)> = (0..len)
        .map(|n| (n as f64, p.get(n).copied().unwrap_or(0.0) - q.get(n).copied().unwrap_or(0.0)))
        .filter(|(_, d)| d.abs() > 1e-300)
        .collect();
    if diff.is_empty() {
        return 0.0;
    }
    if sigma < SIGMA_DISCRETE {
        return diff.iter().map(|(_, d)| d.abs()).sum();
    }
    // terms beyond 12σ are below e^-72 and skipped
    let reach = 12.0 * sigma;
    let density = |x: f64| -> f64 {
        let a = diff.partition_point(|&(n, _)| n < x - reach);
        let b = diff.partition_point(|&(n, _)| n <= x + reach);
        diff[a..b]
            .iter()
            .map(|&(n, d)| {
                let z = (x - n) / sigma;
                d * (-0.5 * z * z).exp()
            })
            .sum()
    };
    let cdf = |x: f64| -> f64 { diff.iter().map(|&(n, d)| d * normal_cdf((x - n) / sigma)).sum() };
    let lo = diff[0].0 - 9.0 * sigma - 1.0;
    let hi = diff[diff.len() - 1].0 + 9.0 * sigma + 1.0;
    let h = sigma / 8.0;
    let steps = ((hi - lo) / h).ceil() as usize;
    let mut breaks = vec![lo];
    let mut x0 = lo;
    let mut f0 = density(x0);
    for i in 1..=steps {
        let x1 = lo + (hi - lo) * i as f64 / steps as f64;
        let f1 = density(x1);
        if f0 == 0.0 {
            breaks.push(x0);
        } else if f0 * f1 < 0.0 {
            let (mut a, mut b, mut fa) = (x0, x1, f0);
            for _ in 0..60 {
                let m = 0.5 * (a + b);
                let fm = density(m);
                if fm * fa > 0.0 {
                    a = m;
                    fa = fm;
                } else {
                    b = m;
                }
            }
            breaks.push(0.5 * (a + b));
        }
        x0 = x1;
        f0 = f1;
    }
    breaks.push(hi);
    let values: Vec<f64> = breaks.iter().map(|&x| cdf(x)).collect();
    values.windows(2).map(|w| (w[1] - w[0]).abs()).sum()
}

/// Guessing probability for two equiprobable photon-number distributions.
pub fn guessing_probability_between(p: &[f64], q: &[f64], sigma: f64) -> f64 {
    (0.5 + smoothed_l1(p, q, sigma) / 4.0).clamp(0.5, 1.0)
}

pub fn guessing_probability(pair: &MacroComponentPair, sigma: f64) -> Result<f64> {
    check_nonneg("sigma", sigma)?;
    Ok(guessing_probability_between(&pair.p_plus, &pair.p_minus, sigma))
}

/// Largest σ with `P_g(σ) ≥ target`, to 1e-4 photons.
pub fn sigma_max(pair: &MacroComponentPair, target: f64) -> Result<f64> {
    sigma_max_between(&pair.p_plus, &pair.p_minus, target)
}

fn sigma_max_between(p: &[f64], q: &[f64], target: f64) -> Result<f64> {
    let p0 = guessing_probability_between(p, q, 0.0);
    if !(target > 0.5) || target >= p0 {
        return Err(Error::UnattainableTarget { target, max: p0 });
    }
    let pg = |s: f64| guessing_probability_between(p, q, s);
    let mut hi = 1.0;
    while pg(hi) >= target {
        hi *= 2.0;
        if hi > 1e6 {
            return Err(Error::UnattainableTarget { target, max: p0 });
        }
    }
    let mut lo = 0.0;
    let (mut p_lo, mut p_hi) = (p0, pg(hi));
    while hi - lo > 1e-4 {
        let mid = 0.5 * (lo + hi);
        let pm = pg(mid);
        assert!(
            pm <= p_lo + 1e-9 && pm >= p_hi - 1e-9,
            "guessing probability not monotone in sigma"
        );
        if pm >= target {
            lo = mid;
            p_lo = pm;
        } else {
            hi = mid;
            p_hi = pm;
        }
    }
    Ok(lo)
}

/// Smallest `N` such that `|0⟩` and `|N⟩` under the same coarse graining are
/// guessed with probability at least `target`.
pub fn archetype_size(sigma: f64, target: f64) -> Result<usize> {
    if !(0.5..1.0).contains(&target) {
        return Err(Error::InvalidParameter {
            name: "target",
            value: target,
            reason: "must lie in [1/2, 1)",
        });
    }
    for n in 1..10_000_000usize {
        let mut fock_n = vec![0.0; n + 1];
        fock_n[n] = 1.0;
        if guessing_probability_between(&[1.0], &fock_n, sigma) >= target {
            return Ok(n);
        }
        if sigma > 0.0 && n as f64 > 20.0 * sigma + 10.0 {
            break;
        }
    }
    Err(Error::UnattainableTarget { target, max: 1.0 })
}

/// `P_g(σ=0)`, `σ_max` and `N_eff` of the pure pair at `α`.
pub fn effective_size(alpha: f64, target: f64) -> Result<SizeResult> {
    let pair = macro_components_auto(alpha)?;
    let sm = sigma_max(&pair, target)?;
    Ok(SizeResult {
        p_g: guessing_probability(&pair, 0.0)?,
        sigma_max: sm,
        n_eff: archetype_size(sm, target)?,
    })
}

/// Two-branch heralded state: with weight `η_h` the entangled state, otherwise
/// a coherent state with a maximally mixed idler.
#[derive(Debug, Clone, PartialEq)]
pub struct HeraldedMixture {
    pub pair: MacroComponentPair,
    pub entangled_weight: f64,
    pub separable_weight: f64,
}

impl HeraldedMixture {
    /// The separable branch yields identical conditional signal states, so it
    /// only dilutes the distinguishability.
    pub fn guessing_probability(&self, sigma: f64) -> Result<f64> {
        let pure = guessing_probability(&self.pair, sigma)?;
        Ok(0.5 + self.entangled_weight * (pure - 0.5))
    }
}

pub fn heralded_mixture_state(alpha: f64, eta_h: f64) -> Result<HeraldedMixture> {
    check_unit("eta_h", eta_h)?;
    check_nonneg("alpha", alpha)?;
    Ok(HeraldedMixture {
        pair: macro_components_auto(alpha)?,
        entangled_weight: eta_h,
        separable_weight: 1.0 - eta_h,
    })
}

/// Conditional signal distributions `q·D(α′)|±⟩⟨±|D(α′)† + (1−q)|α′⟩⟨α′|`
/// with `α′ = √η_abs α` and `q = η_h η_abs`.
pub fn lossy_mixture_pair(alpha: f64, eta_h: f64, eta_abs: f64) -> Result<MacroComponentPair> {
    check_unit("eta_h", eta_h)?;
    check_unit("eta_abs", eta_abs)?;
    let a = eta_abs.sqrt() * alpha;
    let pure = macro_components_auto(a)?;
    let q = eta_h * eta_abs;
    let coh = poisson_distribution(a * a, pure.p_plus.len() - 1);
    let mix = |p: &[f64]| -> Vec<f64> { p.iter().zip(&coh).map(|(x, c)| q * x + (1.0 - q) * c).collect() };
    Ok(MacroComponentPair {
        alpha: a,
        p_plus: mix(&pure.p_plus),
        p_minus: mix(&pure.p_minus),
    })
}

pub fn lossy_mixture_guessing(alpha: f64, eta_h: f64, eta_abs: f64, sigmas: &[f64]) -> Result<Vec<f64>> {
    let pair = lossy_mixture_pair(alpha, eta_h, eta_abs)?;
    sigmas.iter().map(|&s| guessing_probability(&pair, s)).collect()
}
