//! Photon-number (Fock) space algebra on a truncated single mode, plus linear
//! mode transforms acting on multi-mode Fock states.
//!
//! The truncation level `n_max` is always supplied by the caller. Constructors
//! of analytic states check the probability mass that falls beyond `n_max` and
//! return [`Error::Truncation`] instead of silently renormalizing.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use statrs::function::factorial::{ln_binomial, ln_factorial};

use crate::error::{check_nonneg, check_unit, Error, Result};

pub type C64 = Complex64;

pub const TAU_NUM: f64 = 1e-10;
pub const TAU_TRUNC: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    /// Numerical tolerance (hermiticity, unitarity, eigenvalue sign).
    pub num: f64,
    /// Maximum probability mass allowed beyond the truncation level.
    pub trunc: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            num: TAU_NUM,
            trunc: TAU_TRUNC,
        }
    }
}

/// `P(N > n_max)` for a Poisson variable of the given mean.
pub fn poisson_tail(mean: f64, n_max: usize) -> f64 {
    if mean <= 0.0 {
        return 0.0;
    }
    let mut tail = 0.0;
    let mut n = n_max + 1;
    loop {
        let term = (-mean + n as f64 * mean.ln() - ln_factorial(n as u64)).exp();
        tail += term;
        if (n as f64 > mean && term < 1e-20 * tail.max(1e-300)) || n > n_max + 100_000 {
            break;
        }
        n += 1;
    }
    tail
}

/// Poisson probabilities `0..=n_max`.
pub fn poisson_distribution(mean: f64, n_max: usize) -> Vec<f64> {
    (0..=n_max)
        .map(|n| {
            if mean == 0.0 {
                if n == 0 {
                    1.0
                } else {
                    0.0
                }
            } else {
                (-mean + n as f64 * mean.ln() - ln_factorial(n as u64)).exp()
            }
        })
        .collect()
}

fn check_n_max(n_max: usize) -> Result<()> {
    if n_max >= 1 {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name: "n_max",
            value: n_max as f64,
            reason: "truncation level must be at least 1",
        })
    }
}

/// Pure state on a truncated single mode.
#[derive(Debug, Clone, PartialEq)]
pub struct TruncatedState {
    amplitudes: DVector<C64>,
}

impl TruncatedState {
    pub fn from_amplitudes(amplitudes: Vec<C64>) -> Result<Self> {
        check_n_max(amplitudes.len().saturating_sub(1))?;
        Ok(TruncatedState {
            amplitudes: DVector::from_vec(amplitudes),
        })
    }

    pub fn fock(n: usize, n_max: usize) -> Result<Self> {
        check_n_max(n_max)?;
        if n > n_max {
            return Err(Error::Truncation {
                n_max,
                tail: 1.0,
                tol: TAU_TRUNC,
            });
        }
        let mut v = DVector::zeros(n_max + 1);
        v[n] = C64::new(1.0, 0.0);
        Ok(TruncatedState { amplitudes: v })
    }

    pub fn vacuum(n_max: usize) -> Result<Self> {
        Self::fock(0, n_max)
    }

    pub fn n_max(&self) -> usize {
        self.amplitudes.len() - 1
    }

    pub fn amplitudes(&self) -> &DVector<C64> {
        &self.amplitudes
    }

    pub fn amplitude(&self, n: usize) -> C64 {
        self.amplitudes.get(n).copied().unwrap_or_default()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|c| c.norm_sqr()).sum()
    }

    pub fn photon_number_distribution(&self) -> Vec<f64> {
        self.amplitudes.iter().map(|c| c.norm_sqr()).collect()
    }

    pub fn mean_photon_number(&self) -> f64 {
        mean_of(&self.photon_number_distribution())
    }

    pub fn inner(&self, other: &TruncatedState) -> C64 {
        self.amplitudes.dotc(&other.amplitudes)
    }

    pub fn apply(&self, op: &DMatrix<C64>) -> TruncatedState {
        TruncatedState {
            amplitudes: op * &self.amplitudes,
        }
    }

    /// `a|ψ⟩ + b|φ⟩` on the same truncation.
    pub fn superpose(&self, a: C64, other: &TruncatedState, b: C64) -> TruncatedState {
        TruncatedState {
            amplitudes: &self.amplitudes * a + &other.amplitudes * b,
        }
    }

    pub fn to_density(&self) -> DensityOperator {
        DensityOperator {
            matrix: &self.amplitudes * self.amplitudes.adjoint(),
        }
    }
}

pub fn mean_of(dist: &[f64]) -> f64 {
    dist.iter().enumerate().map(|(n, p)| n as f64 * p).sum()
}

/// Coherent state `|α⟩` with the default truncation tolerance.
pub fn coherent_state(alpha: C64, n_max: usize) -> Result<TruncatedState> {
    coherent_state_with(alpha, n_max, &Tolerances::default())
}

pub fn coherent_state_with(alpha: C64, n_max: usize, tol: &Tolerances) -> Result<TruncatedState> {
    check_n_max(n_max)?;
    let mean = alpha.norm_sqr();
    let tail = poisson_tail(mean, n_max);
    if tail > tol.trunc {
        return Err(Error::Truncation {
            n_max,
            tail,
            tol: tol.trunc,
        });
    }
    let mut amps = Vec::with_capacity(n_max + 1);
    let mut c = C64::new((-mean / 2.0).exp(), 0.0);
    amps.push(c);
    for n in 1..=n_max {
        c = c * alpha / (n as f64).sqrt();
        amps.push(c);
    }
    TruncatedState::from_amplitudes(amps)
}

/// Annihilation operator on `0..=n_max`.
pub fn annihilation(n_max: usize) -> DMatrix<C64> {
    let mut a = DMatrix::zeros(n_max + 1, n_max + 1);
    for n in 1..=n_max {
        a[(n - 1, n)] = C64::new((n as f64).sqrt(), 0.0);
    }
    a
}

/// Matrix exponential by scaling and squaring of a Taylor series.
pub fn expm(a: &DMatrix<C64>) -> DMatrix<C64> {
    let dim = a.nrows();
    let norm1 = (0..dim)
        .map(|j| a.column(j).iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max);
    let squarings = if norm1 > 0.5 {
        (norm1 / 0.5).log2().ceil() as u32
    } else {
        0
    };
    let scaled = a / C64::new(2f64.powi(squarings as i32), 0.0);
    let mut result = DMatrix::<C64>::identity(dim, dim);
    let mut term = DMatrix::<C64>::identity(dim, dim);
    for k in 1..=40 {
        term = &term * &scaled / C64::new(k as f64, 0.0);
        result += &term;
        let tn: f64 = term.iter().map(|z| z.norm()).fold(0.0, f64::max);
        if tn < 1e-18 {
            break;
        }
    }
    for _ in 0..squarings {
        result = &result * &result;
    }
    result
}

/// `D(α) = exp(α a† − α* a)` on the truncated space.
///
/// Exact on states supported well below `n_max`; fails when a coherent state of
/// the same amplitude would leave more than the truncation tolerance beyond it.
pub fn displacement_operator(alpha: C64, n_max: usize) -> Result<DMatrix<C64>> {
    displacement_operator_with(alpha, n_max, &Tolerances::default())
}

pub fn displacement_operator_with(
    alpha: C64,
    n_max: usize,
    tol: &Tolerances,
) -> Result<DMatrix<C64>> {
    check_n_max(n_max)?;
    let tail = poisson_tail(alpha.norm_sqr(), n_max);
    if tail > tol.trunc {
        return Err(Error::Truncation {
            n_max,
            tail,
            tol: tol.trunc,
        });
    }
    let a = annihilation(n_max);
    let generator = a.adjoint() * alpha - &a * alpha.conj();
    Ok(expm(&generator))
}

/// Smallest truncation satisfying the coherent-state tail guideline.
pub fn suggested_n_max(mean_photons: f64) -> usize {
    let amp = mean_photons.max(0.0).sqrt();
    (mean_photons + 8.0 * amp + 16.0).ceil() as usize
}

/// Mixed state on a truncated single mode.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityOperator {
    matrix: DMatrix<C64>,
}

impl DensityOperator {
    /// Validates hermiticity, trace and positivity against `tol`.
    pub fn new(matrix: DMatrix<C64>, tol: &Tolerances) -> Result<Self> {
        if !matrix.is_square() || matrix.nrows() < 2 {
            return Err(Error::InvalidState("density matrix must be square, dimension ≥ 2".into()));
        }
        let herm = (&matrix - matrix.adjoint())
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max);
        if herm > tol.num {
            return Err(Error::InvalidState(format!("not Hermitian (deviation {herm:.3e})")));
        }
        let tr = matrix.trace().re;
        if (tr - 1.0).abs() > tol.trunc {
            return Err(Error::InvalidState(format!("trace {tr} differs from 1")));
        }
        let min_eig = min_eigenvalue(&matrix);
        if min_eig < -tol.num {
            return Err(Error::InvalidState(format!("negative eigenvalue {min_eig:.3e}")));
        }
        Ok(DensityOperator { matrix })
    }

    /// Diagonal state with the given photon-number probabilities.
    pub fn diagonal(probabilities: &[f64]) -> Result<Self> {
        let dm = DMatrix::from_diagonal(&DVector::from_iterator(
            probabilities.len(),
            probabilities.iter().map(|&p| C64::new(p, 0.0)),
        ));
        Self::new(dm, &Tolerances::default())
    }

    pub fn thermal(mean_photons: f64, n_max: usize) -> Result<Self> {
        check_nonneg("mean_photons", mean_photons)?;
        check_n_max(n_max)?;
        let ratio = mean_photons / (1.0 + mean_photons);
        let tail = ratio.powi(n_max as i32 + 1);
        if tail > TAU_TRUNC {
            return Err(Error::Truncation {
                n_max,
                tail,
                tol: TAU_TRUNC,
            });
        }
        let probs: Vec<f64> = (0..=n_max)
            .map(|n| (1.0 - ratio) * ratio.powi(n as i32))
            .collect();
        Self::diagonal(&probs)
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.matrix
    }

    pub fn n_max(&self) -> usize {
        self.matrix.nrows() - 1
    }

    pub fn trace(&self) -> f64 {
        self.matrix.trace().re
    }

    pub fn photon_number_distribution(&self) -> Vec<f64> {
        (0..self.matrix.nrows()).map(|n| self.matrix[(n, n)].re).collect()
    }

    pub fn mean_photon_number(&self) -> f64 {
        mean_of(&self.photon_number_distribution())
    }

    pub fn expectation(&self, op: &DMatrix<C64>) -> C64 {
        (&self.matrix * op).trace()
    }

    /// `U ρ U†` without re-validation (unitaries preserve the invariants).
    pub fn conjugate(&self, u: &DMatrix<C64>) -> DensityOperator {
        DensityOperator {
            matrix: u * &self.matrix * u.adjoint(),
        }
    }
}

pub(crate) fn min_eigenvalue(m: &DMatrix<C64>) -> f64 {
    let herm = (m + m.adjoint()) * C64::new(0.5, 0.0);
    herm.symmetric_eigen()
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

/// Pure loss: amplitude damping with transmission `eta`.
pub fn loss_channel(eta: f64, state: &DensityOperator) -> Result<DensityOperator> {
    check_unit("eta", eta)?;
    let dim = state.matrix.nrows();
    let rho = &state.matrix;
    let mut out = DMatrix::<C64>::zeros(dim, dim);
    let loss = 1.0 - eta;
    for m in 0..dim {
        for mp in 0..dim {
            let mut acc = C64::new(0.0, 0.0);
            for k in 0..dim - m.max(mp) {
                let w = if k == 0 {
                    eta.powf((m + mp) as f64 / 2.0)
                } else if loss == 0.0 {
                    0.0
                } else {
                    let lb = 0.5
                        * (ln_binomial((m + k) as u64, k as u64)
                            + ln_binomial((mp + k) as u64, k as u64));
                    let base = if m + mp == 0 {
                        0.0
                    } else if eta == 0.0 {
                        f64::NEG_INFINITY
                    } else {
                        (m + mp) as f64 / 2.0 * eta.ln()
                    };
                    (lb + base + k as f64 * loss.ln()).exp()
                };
                if w != 0.0 {
                    acc += rho[(m + k, mp + k)] * w;
                }
            }
            out[(m, mp)] = acc;
        }
    }
    Ok(DensityOperator { matrix: out })
}

/// Non-photon-number-resolving detector with finite efficiency and dark counts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClickDetector {
    pub efficiency: f64,
    pub dark_count: f64,
}

impl ClickDetector {
    pub fn new(efficiency: f64, dark_count: f64) -> Result<Self> {
        check_unit("efficiency", efficiency)?;
        if !(0.0..1.0).contains(&dark_count) {
            return Err(Error::InvalidParameter {
                name: "dark_count",
                value: dark_count,
                reason: "must lie in [0, 1)",
            });
        }
        Ok(ClickDetector {
            efficiency,
            dark_count,
        })
    }

    pub fn ideal() -> Self {
        ClickDetector {
            efficiency: 1.0,
            dark_count: 0.0,
        }
    }

    /// Weight of the no-click POVM element on the `n`-photon state.
    pub fn no_click_weight(&self, n: usize) -> f64 {
        (1.0 - self.dark_count) * (1.0 - self.efficiency).powi(n as i32)
    }

    /// No-click probability for a coherent state of mean photon number `mean`.
    pub fn no_click_coherent(&self, mean: f64) -> f64 {
        (1.0 - self.dark_count) * (-self.efficiency * mean).exp()
    }
}

pub fn no_click_probability(det: &ClickDetector, state: &DensityOperator) -> f64 {
    state
        .photon_number_distribution()
        .iter()
        .enumerate()
        .map(|(n, p)| det.no_click_weight(n) * p)
        .sum()
}

pub fn click_probability(det: &ClickDetector, state: &DensityOperator) -> f64 {
    1.0 - no_click_probability(det, state)
}

/// Linear transform of mode operators: `b_i = Σ_j U_ij a_j`, outputs in terms
/// of inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeTransform {
    matrix: DMatrix<C64>,
}

impl ModeTransform {
    pub fn new(matrix: DMatrix<C64>, tol: &Tolerances) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::InvalidState("mode transform must be square".into()));
        }
        let n = matrix.nrows();
        let dev = (&matrix * matrix.adjoint() - DMatrix::<C64>::identity(n, n))
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max);
        if dev > tol.num {
            return Err(Error::InvalidState(format!("mode transform not unitary ({dev:.3e})")));
        }
        Ok(ModeTransform { matrix })
    }

    pub fn modes(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.matrix
    }

    pub fn then(&self, next: &ModeTransform) -> ModeTransform {
        ModeTransform {
            matrix: &next.matrix * &self.matrix,
        }
    }

    /// Output coherent amplitudes for coherent inputs.
    pub fn apply_coherent(&self, inputs: &[C64]) -> Vec<C64> {
        assert_eq!(inputs.len(), self.modes(), "mode count mismatch");
        let v = &self.matrix * DVector::from_column_slice(inputs);
        v.iter().copied().collect()
    }

    /// Propagates a multi-mode Fock superposition (exact, no truncation).
    pub fn apply_fock(&self, state: &MultiModeState) -> MultiModeState {
        assert_eq!(state.modes, self.modes(), "mode count mismatch");
        let m = self.modes();
        let mut out: BTreeMap<Vec<usize>, C64> = BTreeMap::new();
        for (occ, amp) in &state.terms {
            // Expand Π_j (Σ_i U_ij b_i†)^{n_j} as a polynomial in the b_i†.
            let mut poly: BTreeMap<Vec<usize>, C64> = BTreeMap::new();
            poly.insert(vec![0; m], C64::new(1.0, 0.0));
            for (j, &nj) in occ.iter().enumerate() {
                for _ in 0..nj {
                    let mut next: BTreeMap<Vec<usize>, C64> = BTreeMap::new();
                    for (mono, c) in &poly {
                        for i in 0..m {
                            let u = self.matrix[(i, j)];
                            if u == C64::new(0.0, 0.0) {
                                continue;
                            }
                            let mut k = mono.clone();
                            k[i] += 1;
                            *next.entry(k).or_default() += c * u;
                        }
                    }
                    poly = next;
                }
            }
            let input_norm: f64 = occ.iter().map(|&n| sqrt_factorial(n)).product();
            for (mono, c) in poly {
                let out_norm: f64 = mono.iter().map(|&n| sqrt_factorial(n)).product();
                *out.entry(mono).or_default() += amp * c * (out_norm / input_norm);
            }
        }
        MultiModeState { modes: m, terms: out }
    }
}

fn sqrt_factorial(n: usize) -> f64 {
    (0.5 * ln_factorial(n as u64)).exp()
}

/// Two-mode beam splitter with intensity transmittance `t`.
///
/// Convention: `(α, β) → (√T α + √(1−T) β, −√(1−T) α + √T β)`.
pub fn beam_splitter(t: f64) -> Result<ModeTransform> {
    check_unit("transmittance", t)?;
    let (tt, rr) = (t.sqrt(), (1.0 - t).sqrt());
    let m = DMatrix::from_row_slice(
        2,
        2,
        &[
            C64::new(tt, 0.0),
            C64::new(rr, 0.0),
            C64::new(-rr, 0.0),
            C64::new(tt, 0.0),
        ],
    );
    Ok(ModeTransform { matrix: m })
}

/// Per-mode phase shifts `a_j → e^{iφ_j} a_j`.
pub fn phase_shift(phases: &[f64]) -> ModeTransform {
    let d = DVector::from_iterator(phases.len(), phases.iter().map(|&p| C64::from_polar(1.0, p)));
    ModeTransform {
        matrix: DMatrix::from_diagonal(&d),
    }
}

/// Analyzer modes at angle θ: `b_θ = cos θ b + sin θ b⊥`, `b_θ⊥ = sin θ b − cos θ b⊥`.
pub fn polarization_analyzer(theta: f64) -> ModeTransform {
    let (s, c) = theta.sin_cos();
    ModeTransform {
        matrix: DMatrix::from_row_slice(
            2,
            2,
            &[
                C64::new(c, 0.0),
                C64::new(s, 0.0),
                C64::new(s, 0.0),
                C64::new(-c, 0.0),
            ],
        ),
    }
}

/// Pure state on several modes, stored sparsely by occupation numbers.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiModeState {
    modes: usize,
    terms: BTreeMap<Vec<usize>, C64>,
}

impl MultiModeState {
    pub fn fock(occupations: &[usize]) -> Self {
        let mut terms = BTreeMap::new();
        terms.insert(occupations.to_vec(), C64::new(1.0, 0.0));
        MultiModeState {
            modes: occupations.len(),
            terms,
        }
    }

    pub fn from_terms(modes: usize, terms: impl IntoIterator<Item = (Vec<usize>, C64)>) -> Self {
        let mut map = BTreeMap::new();
        for (occ, amp) in terms {
            assert_eq!(occ.len(), modes, "occupation length must equal mode count");
            *map.entry(occ).or_default() += amp;
        }
        MultiModeState { modes, terms: map }
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    pub fn amplitude(&self, occupations: &[usize]) -> C64 {
        self.terms.get(occupations).copied().unwrap_or_default()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Vec<usize>, &C64)> {
        self.terms.iter()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.terms.values().map(|c| c.norm_sqr()).sum()
    }

    /// `⟨Π_i x_i^{n_i}⟩`, the generating function of the occupation numbers.
    pub fn generating_function(&self, x: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|(occ, c)| {
                c.norm_sqr()
                    * occ
                        .iter()
                        .zip(x)
                        .map(|(&n, &xi)| xi.powi(n as i32))
                        .product::<f64>()
            })
            .sum()
    }
}
