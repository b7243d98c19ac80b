//! Two-qubit polarization states: Bell/Werner constructors, CHSH, PPT,
//! concurrence and simulated tomography with maximum-likelihood reconstruction.
//!
//! Basis order is |HH⟩, |HV⟩, |VH⟩, |VV⟩. A measurement setting is a unit Bloch
//! vector `n`; its ±1 observable is `n·σ` with `σ_z = |H⟩⟨H| − |V⟩⟨V|`. Linear
//! analyzers at angle θ sit on the equator, `n = (sin 2θ, 0, cos 2θ)`.

use nalgebra::{DMatrix, Matrix2, Matrix3, Matrix4, Vector2, Vector3, Vector4};
use rand::Rng;
use rand_distr::{Binomial, Distribution};

use crate::error::{check_unit, Error, Result};
use crate::exec::{stream_rng, Execution};
use crate::fock::{Tolerances, C64};

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);
const I: C64 = C64::new(0.0, 1.0);

pub fn pauli() -> [Matrix2<C64>; 3] {
    [
        Matrix2::new(ZERO, ONE, ONE, ZERO),
        Matrix2::new(ZERO, -I, I, ZERO),
        Matrix2::new(ONE, ZERO, ZERO, -ONE),
    ]
}

pub fn kron(a: &Matrix2<C64>, b: &Matrix2<C64>) -> Matrix4<C64> {
    let mut m = Matrix4::zeros();
    for i in 0..2 {
        for j in 0..2 {
            for k in 0..2 {
                for l in 0..2 {
                    m[(2 * i + k, 2 * j + l)] = a[(i, j)] * b[(k, l)];
                }
            }
        }
    }
    m
}

fn hermitian_eigenvalues(m: &Matrix4<C64>) -> Vector4<f64> {
    let h = (m + m.adjoint()) * C64::new(0.5, 0.0);
    h.symmetric_eigen().eigenvalues
}

fn max_abs(m: &Matrix4<C64>) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TwoQubitDensity {
    matrix: Matrix4<C64>,
}

impl TwoQubitDensity {
    pub fn new(matrix: Matrix4<C64>) -> Result<Self> {
        Self::with_tolerance(matrix, &Tolerances::default())
    }

    pub fn with_tolerance(matrix: Matrix4<C64>, tol: &Tolerances) -> Result<Self> {
        let herm = max_abs(&(matrix - matrix.adjoint()));
        if herm > tol.num {
            return Err(Error::InvalidState(format!("not Hermitian (deviation {herm:.3e})")));
        }
        let tr = matrix.trace().re;
        if (tr - 1.0).abs() > tol.num {
            return Err(Error::InvalidState(format!("trace {tr} differs from 1")));
        }
        let min = hermitian_eigenvalues(&matrix).min();
        if min < -tol.num {
            return Err(Error::InvalidState(format!("negative eigenvalue {min:.3e}")));
        }
        Ok(TwoQubitDensity { matrix })
    }

    pub fn pure(psi: &Vector4<C64>) -> Result<Self> {
        let n = psi.norm();
        if (n - 1.0).abs() > 1e-10 {
            return Err(Error::InvalidState(format!("state vector norm {n}")));
        }
        Ok(TwoQubitDensity {
            matrix: psi * psi.adjoint(),
        })
    }

    pub fn product(a: &Vector2<C64>, b: &Vector2<C64>) -> Result<Self> {
        let v = Vector4::new(a[0] * b[0], a[0] * b[1], a[1] * b[0], a[1] * b[1]);
        Self::pure(&v)
    }

    pub fn mixture(parts: &[(f64, &TwoQubitDensity)]) -> Result<Self> {
        let mut m = Matrix4::zeros();
        for (w, rho) in parts {
            check_unit("mixture weight", *w)?;
            m += rho.matrix * C64::new(*w, 0.0);
        }
        Self::new(m)
    }

    pub fn matrix(&self) -> &Matrix4<C64> {
        &self.matrix
    }

    pub fn expectation(&self, op: &Matrix4<C64>) -> f64 {
        (self.matrix * op).trace().re
    }

    pub fn eigenvalues(&self) -> Vector4<f64> {
        hermitian_eigenvalues(&self.matrix)
    }

    /// `T_ij = Tr[ρ σ_i ⊗ σ_j]`.
    pub fn correlation_matrix(&self) -> Matrix3<f64> {
        let s = pauli();
        Matrix3::from_fn(|i, j| self.expectation(&kron(&s[i], &s[j])))
    }

    pub fn partial_transpose(&self) -> Matrix4<C64> {
        let mut pt = Matrix4::zeros();
        for a in 0..2 {
            for b in 0..2 {
                for ap in 0..2 {
                    for bp in 0..2 {
                        pt[(2 * a + b, 2 * ap + bp)] = self.matrix[(2 * a + bp, 2 * ap + b)];
                    }
                }
            }
        }
        pt
    }

    /// Uhlmann fidelity `(Tr √(√ρ σ √ρ))²`.
    pub fn fidelity(&self, other: &TwoQubitDensity) -> f64 {
        let s = sqrt_psd(&self.matrix);
        let inner = s * other.matrix * s;
        let tr: f64 = hermitian_eigenvalues(&inner).iter().map(|&l| l.max(0.0).sqrt()).sum();
        tr * tr
    }
}

fn sqrt_psd(m: &Matrix4<C64>) -> Matrix4<C64> {
    let h = (m + m.adjoint()) * C64::new(0.5, 0.0);
    let eig = h.symmetric_eigen();
    let d = Matrix4::from_diagonal(&eig.eigenvalues.map(|l| C64::new(l.max(0.0).sqrt(), 0.0)));
    eig.eigenvectors * d * eig.eigenvectors.adjoint()
}

/// Projector onto (|HH⟩+|VV⟩)/√2.
pub fn bell_state() -> TwoQubitDensity {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let v = Vector4::new(C64::new(s, 0.0), ZERO, ZERO, C64::new(s, 0.0));
    TwoQubitDensity {
        matrix: v * v.adjoint(),
    }
}

pub fn werner_state(w: f64) -> Result<TwoQubitDensity> {
    check_unit("W", w)?;
    let m = bell_state().matrix * C64::new(w, 0.0)
        + Matrix4::identity() * C64::new((1.0 - w) / 4.0, 0.0);
    Ok(TwoQubitDensity { matrix: m })
}

/// A ±1 polarization measurement along a Bloch direction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeasurementSetting {
    direction: Vector3<f64>,
}

impl MeasurementSetting {
    /// Linear-polarization analyzer at angle θ (radians), reduced to [0, 2π).
    pub fn linear(theta: f64) -> Self {
        let t = theta.rem_euclid(std::f64::consts::TAU);
        MeasurementSetting {
            direction: Vector3::new((2.0 * t).sin(), 0.0, (2.0 * t).cos()),
        }
    }

    pub fn linear_degrees(deg: f64) -> Self {
        Self::linear(deg.to_radians())
    }

    pub fn direction(v: Vector3<f64>) -> Result<Self> {
        let n = v.norm();
        if n < 1e-12 || !n.is_finite() {
            return Err(Error::InvalidParameter {
                name: "direction",
                value: n,
                reason: "must be a nonzero finite vector",
            });
        }
        Ok(MeasurementSetting { direction: v / n })
    }

    pub fn bloch(&self) -> Vector3<f64> {
        self.direction
    }

    pub fn observable(&self) -> Matrix2<C64> {
        let s = pauli();
        s[0] * C64::new(self.direction.x, 0.0)
            + s[1] * C64::new(self.direction.y, 0.0)
            + s[2] * C64::new(self.direction.z, 0.0)
    }

    /// Projector for outcome `+1` (`plus == true`) or `−1`.
    pub fn projector(&self, plus: bool) -> Matrix2<C64> {
        let sign = if plus { 0.5 } else { -0.5 };
        Matrix2::identity() * C64::new(0.5, 0.0) + self.observable() * C64::new(sign, 0.0)
    }

    pub const H: Vector3<f64> = Vector3::new(0.0, 0.0, 1.0);
}

/// Analyzer states H, V, D, A, R, L.
pub fn standard_settings() -> [MeasurementSetting; 6] {
    let d = |x: f64, y: f64, z: f64| MeasurementSetting {
        direction: Vector3::new(x, y, z),
    };
    [
        d(0.0, 0.0, 1.0),
        d(0.0, 0.0, -1.0),
        d(1.0, 0.0, 0.0),
        d(-1.0, 0.0, 0.0),
        d(0.0, 1.0, 0.0),
        d(0.0, -1.0, 0.0),
    ]
}

/// All 36 pairs of [`standard_settings`].
pub fn tomography_settings() -> Vec<(MeasurementSetting, MeasurementSetting)> {
    let s = standard_settings();
    s.iter().flat_map(|a| s.iter().map(move |b| (*a, *b))).collect()
}

pub fn correlation(rho: &TwoQubitDensity, a: &MeasurementSetting, b: &MeasurementSetting) -> f64 {
    rho.expectation(&kron(&a.observable(), &b.observable()))
}

/// Settings for `S = |E(a,b) + E(a,b′) + E(a′,b) − E(a′,b′)|`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChshSettings {
    pub a: MeasurementSetting,
    pub a_prime: MeasurementSetting,
    pub b: MeasurementSetting,
    pub b_prime: MeasurementSetting,
}

impl ChshSettings {
    pub fn linear_degrees(a: f64, a_prime: f64, b: f64, b_prime: f64) -> Self {
        ChshSettings {
            a: MeasurementSetting::linear_degrees(a),
            a_prime: MeasurementSetting::linear_degrees(a_prime),
            b: MeasurementSetting::linear_degrees(b),
            b_prime: MeasurementSetting::linear_degrees(b_prime),
        }
    }
}

impl Default for ChshSettings {
    /// Optimal equatorial settings for |HH⟩+|VV⟩: a=45°, a′=0°, b=22.5°, b′=67.5°.
    fn default() -> Self {
        Self::linear_degrees(45.0, 0.0, 22.5, 67.5)
    }
}

pub fn chsh_value(rho: &TwoQubitDensity, s: &ChshSettings) -> f64 {
    let e = |a, b| correlation(rho, a, b);
    (e(&s.a, &s.b) + e(&s.a, &s.b_prime) + e(&s.a_prime, &s.b) - e(&s.a_prime, &s.b_prime)).abs()
}

/// Horodecki bound `2√(t₁² + t₂²)` over all projective settings.
pub fn chsh_maximum(rho: &TwoQubitDensity) -> f64 {
    let mut sv: Vec<f64> = rho.correlation_matrix().singular_values().iter().copied().collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    2.0 * (sv[0] * sv[0] + sv[1] * sv[1]).sqrt()
}

/// Maximizes `chsh_value` over all settings by alternating updates from random
/// starts. Independent of the singular-value route used by [`chsh_maximum`].
pub fn optimize_chsh(rho: &TwoQubitDensity, restarts: usize, seed: u64) -> (ChshSettings, f64) {
    let t = rho.correlation_matrix();
    let unit = |v: Vector3<f64>, fallback: Vector3<f64>| {
        let n = v.norm();
        if n > 1e-14 {
            v / n
        } else {
            fallback
        }
    };
    let mut rng = stream_rng(seed, 0);
    let mut best: Option<(ChshSettings, f64)> = None;
    for _ in 0..restarts.max(1) {
        let mut rand_dir = || {
            unit(
                Vector3::new(
                    rng.random::<f64>() - 0.5,
                    rng.random::<f64>() - 0.5,
                    rng.random::<f64>() - 0.5,
                ),
                Vector3::z(),
            )
        };
        let (mut b, mut bp) = (rand_dir(), rand_dir());
        let (mut a, mut ap) = (rand_dir(), rand_dir());
        let mut value = f64::NEG_INFINITY;
        for _ in 0..500 {
            a = unit(t * (b + bp), a);
            ap = unit(t * (b - bp), ap);
            b = unit(t.transpose() * (a + ap), b);
            bp = unit(t.transpose() * (a - ap), bp);
            let v = (a.dot(&(t * (b + bp))) + ap.dot(&(t * (b - bp)))).abs();
            let done = (v - value).abs() < 1e-15;
            value = v;
            if done {
                break;
            }
        }
        let s = ChshSettings {
            a: MeasurementSetting { direction: a },
            a_prime: MeasurementSetting { direction: ap },
            b: MeasurementSetting { direction: b },
            b_prime: MeasurementSetting { direction: bp },
        };
        let v = chsh_value(rho, &s);
        if best.as_ref().is_none_or(|(_, bv)| v > *bv) {
            best = Some((s, v));
        }
    }
    best.expect("at least one restart")
}

pub fn ppt_min_eigenvalue(rho: &TwoQubitDensity) -> f64 {
    hermitian_eigenvalues(&rho.partial_transpose()).min()
}

/// Wootters concurrence.
pub fn concurrence(rho: &TwoQubitDensity) -> f64 {
    let s = pauli();
    let yy = kron(&s[1], &s[1]);
    let tilde = yy * rho.matrix.conjugate() * yy;
    let sq = sqrt_psd(&rho.matrix);
    let mut l: Vec<f64> = hermitian_eigenvalues(&(sq * tilde * sq))
        .iter()
        .map(|&x| x.max(0.0).sqrt())
        .collect();
    l.sort_by(|a, b| b.total_cmp(a));
    (l[0] - l[1] - l[2] - l[3]).max(0.0)
}

/// Outcome order for the counts of one setting pair.
pub const OUTCOMES: [(bool, bool); 4] = [(true, true), (true, false), (false, true), (false, false)];

#[derive(Debug, Clone, PartialEq)]
pub struct TomographyEntry {
    pub alice: MeasurementSetting,
    pub bob: MeasurementSetting,
    /// Counts for (+1,+1), (+1,−1), (−1,+1), (−1,−1).
    pub counts: [u64; 4],
}

#[derive(Debug, Clone, PartialEq)]
pub struct TomographyRecord {
    pub entries: Vec<TomographyEntry>,
    pub shots: u64,
}

pub fn joint_probabilities(
    rho: &TwoQubitDensity,
    a: &MeasurementSetting,
    b: &MeasurementSetting,
) -> [f64; 4] {
    OUTCOMES.map(|(pa, pb)| rho.expectation(&kron(&a.projector(pa), &b.projector(pb))).max(0.0))
}

/// Multinomial sampling of every setting pair, each on its own random stream.
pub fn simulate_tomography(
    rho: &TwoQubitDensity,
    settings: &[(MeasurementSetting, MeasurementSetting)],
    shots: u64,
    seed: u64,
    exec: Execution,
) -> Result<TomographyRecord> {
    if shots == 0 {
        return Err(Error::InvalidParameter {
            name: "shots",
            value: 0.0,
            reason: "must be at least 1",
        });
    }
    let entries = exec.map(settings.len(), |k| {
        let (a, b) = settings[k];
        let p = joint_probabilities(rho, &a, &b);
        let mut rng = stream_rng(seed, k as u64);
        TomographyEntry {
            alice: a,
            bob: b,
            counts: sample_multinomial(shots, &p, &mut rng),
        }
    });
    Ok(TomographyRecord { entries, shots })
}

fn sample_multinomial<R: Rng>(n: u64, p: &[f64; 4], rng: &mut R) -> [u64; 4] {
    let total: f64 = p.iter().sum();
    let mut out = [0u64; 4];
    let mut left = n;
    let mut mass = 1.0;
    for k in 0..3 {
        let pk = p[k] / total;
        let q = if mass > 0.0 { (pk / mass).clamp(0.0, 1.0) } else { 0.0 };
        let draw = if left == 0 || q == 0.0 {
            0
        } else {
            Binomial::new(left, q).expect("valid binomial").sample(rng)
        };
        out[k] = draw;
        left -= draw;
        mass -= pk;
    }
    out[3] = left;
    out
}

/// Exact expected frequencies, for noiseless round trips.
pub fn exact_record(
    rho: &TwoQubitDensity,
    settings: &[(MeasurementSetting, MeasurementSetting)],
    shots: u64,
) -> Vec<(MeasurementSetting, MeasurementSetting, [f64; 4])> {
    settings
        .iter()
        .map(|(a, b)| {
            let p = joint_probabilities(rho, a, b);
            (*a, *b, p.map(|x| x * shots as f64))
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MleOptions {
    pub max_iterations: usize,
    pub gradient_tolerance: f64,
    pub regularization: f64,
}

impl Default for MleOptions {
    fn default() -> Self {
        MleOptions {
            max_iterations: 200_000,
            gradient_tolerance: 1e-9,
            regularization: 1e-12,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MleResult {
    pub state: TwoQubitDensity,
    pub iterations: usize,
    pub log_likelihood: f64,
    pub gradient_norm: f64,
}

pub fn reconstruct_mle(record: &TomographyRecord) -> Result<TwoQubitDensity> {
    let data: Vec<_> = record
        .entries
        .iter()
        .map(|e| (e.alice, e.bob, e.counts.map(|c| c as f64)))
        .collect();
    reconstruct_mle_weighted(&data, &MleOptions::default()).map(|r| r.state)
}

/// Maximum-likelihood reconstruction from (possibly fractional) counts.
///
/// ρ = AA†/Tr(AA†); monotone gradient ascent on A with backtracking.
pub fn reconstruct_mle_weighted(
    data: &[(MeasurementSetting, MeasurementSetting, [f64; 4])],
    opts: &MleOptions,
) -> Result<MleResult> {
    let mut projectors = Vec::with_capacity(data.len() * 4);
    let mut counts = Vec::with_capacity(data.len() * 4);
    for (k, (a, b, n)) in data.iter().enumerate() {
        if n.iter().sum::<f64>() <= 0.0 {
            return Err(Error::RankDeficient(format!("setting pair {k} has no counts")));
        }
        if n.iter().any(|&c| c < 0.0 || !c.is_finite()) {
            return Err(Error::InvalidState(format!("setting pair {k} has invalid counts")));
        }
        for (i, (pa, pb)) in OUTCOMES.iter().enumerate() {
            projectors.push(kron(&a.projector(*pa), &b.projector(*pb)));
            counts.push(n[i]);
        }
    }
    let rank = operator_span(&projectors);
    if rank < 16 {
        return Err(Error::RankDeficient(format!(
            "measurement operators span {rank} of 16 dimensions"
        )));
    }
    let total: f64 = counts.iter().sum();
    let freqs: Vec<f64> = counts.iter().map(|c| c / total).collect();

    let loglik = |a: &Matrix4<C64>| -> Option<f64> {
        let rho = a * a.adjoint();
        let tr = rho.trace().re;
        let mut l = 0.0;
        for (p, f) in projectors.iter().zip(&freqs) {
            if *f == 0.0 {
                continue;
            }
            let pk = (rho * p).trace().re / tr;
            if pk <= 0.0 {
                return None;
            }
            l += f * pk.ln();
        }
        Some(l)
    };
    let gradient = |a: &Matrix4<C64>| -> Matrix4<C64> {
        let rho = a * a.adjoint();
        let tr = rho.trace().re;
        let mut r = Matrix4::<C64>::zeros();
        for (p, f) in projectors.iter().zip(&freqs) {
            if *f == 0.0 {
                continue;
            }
            let pk = (rho * p).trace().re / tr;
            r += p * C64::new(f / pk, 0.0);
        }
        (r - Matrix4::identity()) * a / C64::new(tr, 0.0)
    };
    let normalize = |a: Matrix4<C64>| {
        let n = a.norm();
        a / C64::new(n, 0.0)
    };

    let start = Matrix4::<C64>::identity() * C64::new(0.25 + opts.regularization, 0.0);
    let mut a = normalize(start.cholesky().expect("positive definite start").l());
    let mut l = loglik(&a).ok_or_else(|| Error::InvalidState("zero-probability start".into()))?;
    let mut step = 1.0;
    let mut gnorm = f64::INFINITY;
    for it in 0..opts.max_iterations {
        let g = gradient(&a);
        gnorm = g.norm();
        if gnorm < opts.gradient_tolerance {
            let state = finish(&a)?;
            return Ok(MleResult {
                state,
                iterations: it,
                log_likelihood: l,
                gradient_norm: gnorm,
            });
        }
        let g2 = gnorm * gnorm;
        step *= 2.0;
        loop {
            let cand = normalize(a + g * C64::new(step, 0.0));
            let resolution = 8.0 * f64::EPSILON * l.abs().max(1.0);
            let accept = match loglik(&cand) {
                Some(lc) if lc - l >= 1e-4 * step * g2 && lc - l > resolution => Some(lc),
                // Below the resolution of the likelihood itself: accept only if
                // the candidate still lies on the ascending side and moves
                // closer to stationarity.
                Some(lc) if lc >= l - resolution => {
                    let gc = gradient(&cand);
                    (gc.dotc(&g).re > 0.0 && gc.norm() < gnorm).then_some(lc.max(l))
                }
                _ => None,
            };
            match accept {
                Some(lc) => {
                    a = cand;
                    l = lc;
                    break;
                }
                None => {
                    step *= 0.5;
                    if step < 1e-20 {
                        // No ascent possible at working precision; stationary.
                        let state = finish(&a)?;
                        return Ok(MleResult {
                            state,
                            iterations: it,
                            log_likelihood: l,
                            gradient_norm: gnorm,
                        });
                    }
                }
            }
        }
    }
    Err(Error::NoConvergence {
        iterations: opts.max_iterations,
        gradient_norm: gnorm,
        log_likelihood: l,
    })
}

fn finish(a: &Matrix4<C64>) -> Result<TwoQubitDensity> {
    let rho = a * a.adjoint();
    let rho = (rho + rho.adjoint()) * C64::new(0.5, 0.0);
    let tr = rho.trace().re;
    TwoQubitDensity::new(rho / C64::new(tr, 0.0))
}

/// Real dimension of the span of a set of Hermitian 4×4 operators.
fn operator_span(ops: &[Matrix4<C64>]) -> usize {
    let mut m = DMatrix::<f64>::zeros(ops.len(), 32);
    for (r, op) in ops.iter().enumerate() {
        for (c, z) in op.iter().enumerate() {
            m[(r, 2 * c)] = z.re;
            m[(r, 2 * c + 1)] = z.im;
        }
    }
    m.singular_values().iter().filter(|&&s| s > 1e-9).count()
}

/// Residual norm of
/// `(|HH⟩ + e^{iθ}|VV⟩)/√2 = (|ψφ⟩ + e^{iθ}|ψ⊥φ⊥⟩)/√2` with `ψ = α|H⟩ + β|V⟩`,
/// `φ = α*|H⟩ + e^{iθ}β*|V⟩`.
pub fn arbitrary_polarization_equivalence_check(alpha: C64, beta: C64, theta: f64) -> Result<f64> {
    let n = alpha.norm_sqr() + beta.norm_sqr();
    if (n - 1.0).abs() > 1e-10 {
        return Err(Error::InvalidParameter {
            name: "|α|²+|β|²",
            value: n,
            reason: "polarization vector must be normalized",
        });
    }
    let ph = C64::from_polar(1.0, theta);
    let psi = Vector2::new(alpha, beta);
    let psi_perp = Vector2::new(-beta.conj(), alpha.conj());
    let phi = Vector2::new(alpha.conj(), ph * beta.conj());
    let phi_perp = Vector2::new(-ph.conj() * beta, alpha);
    if psi.dotc(&psi_perp).norm() > 1e-12 || phi.dotc(&phi_perp).norm() > 1e-12 {
        return Err(Error::InvalidState("rotated bases are not orthogonal".into()));
    }
    let tensor = |a: &Vector2<C64>, b: &Vector2<C64>| {
        Vector4::new(a[0] * b[0], a[0] * b[1], a[1] * b[0], a[1] * b[1])
    };
    let s = C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    let lhs = Vector4::new(s, ZERO, ZERO, s * ph);
    let rhs = (tensor(&psi, &phi) + tensor(&psi_perp, &phi_perp) * ph) * s;
    Ok((lhs - rhs).norm())
}
