//! Small-oscillation spectrum of a fluxon train.
//!
//! Linearising about the train gives Lamé's equation
//! `−ψ_uu + 2k²sn²(u)ψ = k²(1 + ω²)ψ` with `u = x/k` in the frame co-moving
//! with the train. Its Bloch solutions are parametrised by a complex `β`; the
//! ring closure condition quantises `β` through the Jacobi zeta function.
//!
//! A mode is located by a signed imaginary offset `η ∈ [−K', K']` on the line
//! `re β = K`. The reported `beta` always has `im β = |η| ≥ 0`; the sign of `η`
//! is kept in [`ModeSolution::branch`] and selects the `±` solution pair.

use num_complex::Complex;
use thiserror::Error;

use crate::elliptic::{self, EllipticError, EllipticModulus};
use crate::fluxon::{self, FluxonError, JunctionParams, TrainState};
use crate::Real;

const MAX_BISECTION: usize = 200;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SpectrumError {
    #[error("mode index {ell} outside the fluxon band 0..={n}")]
    OutOfBand { ell: i64, n: u32 },
    #[error("mode index {ell} has no plasma-band solution for n = {n}")]
    NotPlasma { ell: i64, n: u32 },
    #[error("no fluxons (n = 0) and hence no fluxon band")]
    NoFluxons,
    #[error("need n >= 2 for a counter-rotating mode pair (n = {0})")]
    NoPair(u32),
    #[error("quantisation root not converged: residual {residual:e} on bracket [{lo}, {hi}]")]
    NonConvergence { residual: f64, lo: f64, hi: f64 },
    #[error("theta function vanishes at x = {0}")]
    Pole(f64),
    #[error(transparent)]
    Elliptic(#[from] EllipticError),
    #[error(transparent)]
    Fluxon(#[from] FluxonError),
}

pub type Result<T> = std::result::Result<T, SpectrumError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Band {
    Fluxon,
    Plasma,
}

/// One quantised Bloch mode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModeSolution<S> {
    pub ell: u32,
    /// Bloch parameter with `im β ≥ 0`.
    pub beta: Complex<S>,
    /// `+1` when the signed offset `η = im β`, `−1` when `η = −im β`.
    pub branch: i8,
    /// Eigenfrequency in the frame co-moving with the train, `dn(β)/k`.
    pub omega: S,
    /// Frequency seen by a port at rest on the ring.
    pub omega_lab: S,
    /// Dominant lab-frame wavenumber; `qL/(2π)` is an integer.
    pub q: S,
    pub band: Band,
}

impl<S: Real> ModeSolution<S> {
    /// Signed imaginary offset `η` of `β` from the band line.
    pub fn eta(&self) -> S {
        if self.branch < 0 {
            -self.beta.im
        } else {
            self.beta.im
        }
    }
}

/// `(2ℓ − n)π/(2nK)`, the right-hand side of the quantisation condition.
fn quantum<S: Real>(ell: i64, n: u32, big_k: S) -> S {
    let nf = S::from_u32(n).unwrap();
    (S::from_i64(2 * ell).unwrap() - nf) * S::PI() / (S::lit(2.0) * nf * big_k)
}

/// `im Z(K + iη)` and the band frequency `dn(K + iη)/k = k'cn(η,k')/(k·dn(η,k'))`.
fn fluxon_line<S: Real>(m: &EllipticModulus<S>, eta: S) -> Result<(S, S)> {
    let z = m.zeta(Complex::new(m.big_k, eta))?;
    let j = elliptic::jacobi_am_sn_cn_dn(eta.abs(), m.kc)?;
    Ok((z.im, m.kc * j.cn / (m.k * j.dn)))
}

/// Root of `im Z(K+iη) + ω(η)·v·k = target` for signed `η` in `[−K', K']`.
fn solve_fluxon_line<S: Real>(m: &EllipticModulus<S>, v: S, target: S) -> Result<(S, S)> {
    let f = |eta: S| -> Result<(S, S)> {
        let (y, w) = fluxon_line(m, eta)?;
        Ok((y + w * v * m.k - target, w))
    };
    let (mut lo, mut hi) = (-m.big_kc, m.big_kc);
    let (f_lo, _) = f(lo)?;
    let (f_hi, _) = f(hi)?;
    let tol = S::tol(1e-10) * (S::PI() / m.big_k);
    // Endpoints are exact roots for ℓ = 0 and ℓ = n.
    if f_hi.abs() <= tol {
        return Ok((hi, S::zero()));
    }
    if f_lo.abs() <= tol {
        return Ok((lo, S::zero()));
    }
    if f_lo.signum() == f_hi.signum() {
        return Err(SpectrumError::NonConvergence {
            residual: f_lo.min(f_hi).as_f64(),
            lo: lo.as_f64(),
            hi: hi.as_f64(),
        });
    }
    let decreasing = f_lo > S::zero();
    for _ in 0..MAX_BISECTION {
        let mid = (lo + hi) * S::lit(0.5);
        if mid <= lo || mid >= hi {
            break;
        }
        let (r, _) = f(mid)?;
        if (r > S::zero()) == decreasing {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let eta = (lo + hi) * S::lit(0.5);
    let (r, w) = f(eta)?;
    if r.abs() > tol {
        return Err(SpectrumError::NonConvergence {
            residual: r.as_f64(),
            lo: lo.as_f64(),
            hi: hi.as_f64(),
        });
    }
    Ok((eta, w))
}

fn assemble<S: Real>(
    ell: u32,
    n: u32,
    m: &EllipticModulus<S>,
    eta: S,
    omega: S,
    train_v: S,
    gamma: S,
) -> ModeSolution<S> {
    let (y, _) = match fluxon_line(m, eta) {
        Ok(v) => v,
        Err(_) => (S::nan(), S::nan()),
    };
    let two = S::lit(2.0);
    let nf = S::from_u32(n).unwrap();
    let length = two * nf * m.k * m.big_k / gamma;
    // co-moving wavenumber of the upper (+) solution, boosted to the lab frame
    let q_comoving = -(y / m.k + S::PI() / (two * m.k * m.big_k));
    let mut q = gamma * (q_comoving - omega * train_v);
    if eta < S::zero() {
        // the dominant Fourier component sits one reciprocal vector higher
        q += S::TAU() * nf / length;
    }
    ModeSolution {
        ell,
        beta: Complex::new(m.big_k, eta.abs()),
        branch: if eta < S::zero() { -1 } else { 1 },
        omega,
        omega_lab: omega / gamma - train_v * q,
        q,
        band: Band::Fluxon,
    }
}

/// Fluxon-band mode `ℓ` of a static train with modulus `k`.
pub fn mode_frequency_static<S: Real>(ell: u32, n: u32, k: S) -> Result<ModeSolution<S>> {
    if n == 0 {
        return Err(SpectrumError::NoFluxons);
    }
    if ell > n {
        return Err(SpectrumError::OutOfBand { ell: ell as i64, n });
    }
    let m = EllipticModulus::new(k)?;
    let (eta, omega) = solve_fluxon_line(&m, S::zero(), quantum(ell as i64, n, m.big_k))?;
    Ok(assemble(ell, n, &m, eta, omega, S::zero(), S::one()))
}

/// Fluxon-band mode `ℓ` of a moving train, solving
/// `Z(β) + iωvk = i(2ℓ − n)π/(2nK)` together with `ω = dn(β)/k`.
///
/// `omega` is the co-moving eigenfrequency; `omega_lab = ω/γ_v − v·q` adds the
/// Doppler shift of the mode's dominant wavenumber `q`.
pub fn mode_frequency_moving<S: Real>(ell: u32, n: u32, train: &TrainState<S>) -> Result<ModeSolution<S>> {
    if n == 0 {
        return Err(SpectrumError::NoFluxons);
    }
    if ell > n {
        return Err(SpectrumError::OutOfBand { ell: ell as i64, n });
    }
    let m = EllipticModulus::new(train.k)?;
    let (eta, omega) = solve_fluxon_line(&m, train.v, quantum(ell as i64, n, m.big_k))?;
    Ok(assemble(ell, n, &m, eta, omega, train.v, train.gamma_v))
}

/// Plasma-band mode of a static train on the line `re β = 0`.
///
/// On that line `im Z(iη)` runs from 0 to `+∞`, so the quantisation condition
/// has a root for every `ℓ ≥ n/2`; smaller `ℓ` are the conjugate partners.
pub fn plasma_mode<S: Real>(ell: u32, n: u32, k: S) -> Result<ModeSolution<S>> {
    if n == 0 {
        return Err(SpectrumError::NoFluxons);
    }
    if 2 * ell < n {
        return Err(SpectrumError::NotPlasma { ell: ell as i64, n });
    }
    let m = EllipticModulus::new(k)?;
    let target = quantum(ell as i64, n, m.big_k);
    let y = |eta: S| -> elliptic::Result<S> { Ok(m.zeta(Complex::new(S::zero(), eta))?.im) };
    let (mut lo, mut hi) = (S::zero(), m.big_kc);
    if target == S::zero() {
        hi = S::zero();
    }
    for _ in 0..MAX_BISECTION {
        let mid = (lo + hi) * S::lit(0.5);
        if mid <= lo || mid >= hi {
            break;
        }
        // the pole at iK' makes Θ vanish; treat it as +∞
        let above = match y(mid) {
            Ok(v) => v > target,
            Err(EllipticError::Pole { .. }) => true,
            Err(e) => return Err(e.into()),
        };
        if above {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let eta = (lo + hi) * S::lit(0.5);
    let residual = y(eta)? - target;
    if residual.abs() > S::tol(1e-8) * target.abs().max(S::one()) {
        return Err(SpectrumError::NonConvergence {
            residual: residual.as_f64(),
            lo: lo.as_f64(),
            hi: hi.as_f64(),
        });
    }
    // dn(iη, k) = dc(η, k')
    let j = elliptic::jacobi_am_sn_cn_dn(eta, m.kc)?;
    let omega = j.dn / (j.cn * m.k);
    let nf = S::from_u32(n).unwrap();
    let length = S::lit(2.0) * nf * k * m.big_k;
    let q = S::TAU() * (nf - S::from_u32(ell).unwrap()) / length;
    Ok(ModeSolution {
        ell,
        beta: Complex::new(S::zero(), eta),
        branch: 1,
        omega,
        omega_lab: omega,
        q,
        band: Band::Plasma,
    })
}

/// The counter-rotating pair used as the circulator's two resonances.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Splitting<S> {
    /// `ω₁` in the lab frame.
    pub omega_minus: S,
    /// `ω_{n−1}` in the lab frame.
    pub omega_plus: S,
    /// `ω₊ − ω₋`.
    pub delta_omega: S,
    pub train: TrainState<S>,
}

/// Lab-frame frequencies of modes `1` and `n − 1` at bias `i_b`. `damping` is
/// the total uniform drag on the train (see [`JunctionParams::effective_damping`]).
pub fn splitting<S: Real>(params: &JunctionParams<S>, i_b: S, damping: S) -> Result<Splitting<S>> {
    let n = params.fluxons;
    if n < 2 {
        return Err(SpectrumError::NoPair(n));
    }
    let train = fluxon::velocity_for_bias(i_b, params.length, n, damping)?;
    let minus = mode_frequency_moving(1, n, &train)?;
    let plus = mode_frequency_moving(n - 1, n, &train)?;
    Ok(Splitting {
        omega_minus: minus.omega_lab,
        omega_plus: plus.omega_lab,
        delta_omega: plus.omega_lab - minus.omega_lab,
        train,
    })
}

/// Bloch solution `ψ(x) = e^{iqx}u(x)` of a static train, with
/// `u(x) = e^{iπx/(2kK)}·H(x/k + β)/Θ(x/k)` and `q` from the same `β`.
/// The lower branch is the complex conjugate of the upper one.
pub fn bloch_mode_profile<S: Real>(x: S, mode: &ModeSolution<S>, k: S) -> Result<Complex<S>> {
    let (u, q) = bloch_factors(x, mode, k)?;
    Ok(u * Complex::new(S::zero(), q * x).exp())
}

/// The periodic part `u(x)` and the exponent `q` of [`bloch_mode_profile`].
pub fn bloch_factors<S: Real>(x: S, mode: &ModeSolution<S>, k: S) -> Result<(Complex<S>, S)> {
    let m = EllipticModulus::new(k)?;
    let beta = Complex::new(mode.beta.re, mode.eta());
    let t_beta = elliptic::theta_series(Complex::new(x / k, S::zero()) + beta, &m, S::lit(elliptic::THETA_SERIES_TOL))?;
    let t_x = elliptic::theta_series(Complex::new(x / k, S::zero()), &m, S::lit(elliptic::THETA_SERIES_TOL))?;
    if t_x.theta.norm() < S::tol(1e-12) {
        return Err(SpectrumError::Pole(x.as_f64()));
    }
    let z = m.zeta(beta)?;
    let two_k_k = S::lit(2.0) * k * m.big_k;
    let q = -(z.im / k + S::PI() / two_k_k);
    let u = Complex::new(S::zero(), S::PI() * x / two_k_k).exp() * t_beta.eta / t_x.theta;
    Ok((u, q))
}

/// Independent finite-difference check of the fluxon-band spectrum.
///
/// Discretises `−∂ₓₓ + cos φ₀(x)` on `N` periodic nodes of the ring holding a
/// static train of `n` fluxons with modulus `k`, and returns the lowest
/// `count` eigenfrequencies in ascending order. A negative eigenvalue `λ` is
/// reported as `−√|λ|`.
pub fn lame_matrix_oracle(k: f64, length: f64, n: u32, nodes: usize, count: usize) -> Result<Vec<f64>> {
    let lambdas = lame_matrix_eigenvalues(k, length, n, nodes, count)?;
    Ok(lambdas.into_iter().map(|l| l.signum() * l.abs().sqrt()).collect())
}

/// Lowest `count` eigenvalues `ω²` of the discretised periodic Lamé operator.
pub fn lame_matrix_eigenvalues(k: f64, length: f64, n: u32, nodes: usize, count: usize) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(SpectrumError::NoFluxons);
    }
    let h = length / nodes as f64;
    let mut diag = Vec::with_capacity(nodes);
    for i in 0..nodes {
        let j = elliptic::jacobi_am_sn_cn_dn(i as f64 * h / k, k)?;
        // cos(π + 2am) = 2sn² − 1
        diag.push(2.0 / (h * h) + 2.0 * j.sn * j.sn - 1.0);
    }
    let off = -1.0 / (h * h);
    let op = CyclicTridiagonal { diag, off };
    let (lo, hi) = op.gershgorin();
    Ok((0..count.min(nodes)).map(|i| op.eigenvalue(i, lo, hi)).collect())
}

/// Symmetric tridiagonal matrix with constant off-diagonal and periodic corners.
struct CyclicTridiagonal {
    diag: Vec<f64>,
    off: f64,
}

impl CyclicTridiagonal {
    fn gershgorin(&self) -> (f64, f64) {
        let r = 2.0 * self.off.abs();
        let lo = self.diag.iter().fold(f64::INFINITY, |a, &d| a.min(d - r));
        let hi = self.diag.iter().fold(f64::NEG_INFINITY, |a, &d| a.max(d + r));
        (lo, hi)
    }

    /// Number of eigenvalues below `sigma` (Sylvester inertia of `A − σI`).
    ///
    /// The last row and column are treated as a border: the leading block is an
    /// ordinary tridiagonal factorised by the Sturm recurrence, and the border
    /// contributes the sign of its Schur complement.
    fn count_below(&self, sigma: f64) -> usize {
        let n = self.diag.len();
        let b = self.off;
        let tiny = f64::MIN_POSITIVE.sqrt() * (1.0 + sigma.abs());
        let m = n - 1;
        let mut pivots = Vec::with_capacity(m);
        let mut negatives = 0;
        let mut d_prev = 1.0;
        for i in 0..m {
            let mut d = self.diag[i] - sigma;
            if i > 0 {
                d -= b * b / d_prev;
            }
            if d == 0.0 {
                d = tiny;
            }
            if d < 0.0 {
                negatives += 1;
            }
            pivots.push(d);
            d_prev = d;
        }
        // border vector: A[m][0] = b (corner), A[m][m-1] = b
        let mut border = vec![0.0; m];
        border[0] += b;
        border[m - 1] += b;
        // solve (T − σ)y = border with T − σ = L D Lᵀ, L unit lower bidiagonal with l_i = b/d_{i-1}
        let mut w = border.clone();
        for i in 1..m {
            w[i] -= b / pivots[i - 1] * w[i - 1];
        }
        let mut y = vec![0.0; m];
        y[m - 1] = w[m - 1] / pivots[m - 1];
        for i in (0..m - 1).rev() {
            y[i] = w[i] / pivots[i] - b / pivots[i] * y[i + 1];
        }
        let dot: f64 = border.iter().zip(&y).map(|(a, c)| a * c).sum();
        let schur = self.diag[m] - sigma - dot;
        negatives + usize::from(schur < 0.0)
    }

    fn eigenvalue(&self, index: usize, mut lo: f64, mut hi: f64) -> f64 {
        for _ in 0..MAX_BISECTION {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.count_below(mid) > index {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        0.5 * (lo + hi)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fluxon::solve_modulus;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use std::f64::consts::{PI, TAU};

    fn circulator_k() -> f64 {
        solve_modulus(26.0, 8, 0.0).unwrap()
    }

    #[test]
    fn circulator_resonance() {
        let m = mode_frequency_static(1, 8, circulator_k()).unwrap();
        assert!((m.omega - 0.224_706).abs() < 2e-6, "{}", m.omega);
        assert!((m.omega * 33.5 - 7.53).abs() < 0.01 * 7.53);
    }

    #[test]
    fn goldstone_and_degeneracy() {
        let k = solve_modulus(15.0f64, 8, 0.0).unwrap();
        assert!(mode_frequency_static(0, 8, k).unwrap().omega.abs() < 1e-12);
        assert!(mode_frequency_static(8, 8, k).unwrap().omega.abs() < 1e-12);
        for ell in 0..=8 {
            let a = mode_frequency_static(ell, 8, k).unwrap();
            let b = mode_frequency_static(8 - ell, 8, k).unwrap();
            assert!((a.omega - b.omega).abs() < 1e-10);
            assert_eq!(a.beta, b.beta);
            assert!(ell == 4 || a.branch != b.branch);
        }
        assert!(matches!(mode_frequency_static(9, 8, k), Err(SpectrumError::OutOfBand { .. })));
    }

    #[test]
    fn band_invariants() {
        let k = solve_modulus(15.0f64, 8, 0.0).unwrap();
        let m = EllipticModulus::new(k).unwrap();
        for ell in 0..=8 {
            let s = mode_frequency_static(ell, 8, k).unwrap();
            assert!((s.beta.re - m.big_k).abs() < 1e-9);
            assert!(s.beta.im >= 0.0 && s.beta.im <= m.big_kc + 1e-9);
            assert!(s.omega * s.omega <= 1.0 / (k * k) - 1.0 + 1e-9);
            let winding = s.q * 15.0 / TAU;
            assert!((winding - winding.round()).abs() < 1e-8, "{winding}");
            // quantisation residual and ω = dn(β)/k through the complex dn
            let z = m.zeta(Complex::new(s.beta.re, s.eta())).unwrap();
            let rhs = (2.0 * ell as f64 - 8.0) * PI / (16.0 * m.big_k);
            assert!(z.re.abs() < 1e-10 && (z.im - rhs).abs() < 1e-10);
            let (_, _, dn) = elliptic::jacobi_sn_cn_dn_complex(s.beta, k).unwrap();
            assert!((dn.re / k - s.omega).abs() < 1e-10 && dn.im.abs() < 1e-10, "{ell}: {} vs {}", dn.re / k - s.omega, s.omega);
        }
    }

    #[test]
    fn frequencies_increase_up_to_half_band() {
        let k = solve_modulus(15.0f64, 8, 0.0).unwrap();
        let w: Vec<f64> = (0..=4).map(|l| mode_frequency_static(l, 8, k).unwrap().omega).collect();
        assert!(w.windows(2).all(|p| p[1] > p[0]));
    }

    #[test]
    fn dense_train_bound() {
        // ω_ℓ ≲ 2πℓ/L, approached as n grows
        let length = 15.0;
        let mut gap_prev = f64::INFINITY;
        for n in [4u32, 8, 16, 32, 64] {
            let k = solve_modulus::<f64>(length, n, 0.0).unwrap();
            for ell in 1..=2 {
                let w = mode_frequency_static(ell, n, k).unwrap().omega;
                assert!(w <= TAU * ell as f64 / length * (1.0 + 1e-9));
            }
            let gap = TAU / length - mode_frequency_static(1, n, k).unwrap().omega;
            assert!(gap < gap_prev);
            gap_prev = gap;
        }
        assert!(gap_prev < 1e-3);
    }

    #[test]
    fn moving_reduces_to_static() {
        let t = fluxon::velocity_for_bias(0.0f64, 15.0, 8, 0.02).unwrap();
        for ell in 0..=8 {
            let a = mode_frequency_moving(ell, 8, &t).unwrap();
            let b = mode_frequency_static(ell, 8, t.k).unwrap();
            assert!((a.omega - b.omega).abs() < 1e-10);
            assert!((a.omega_lab - b.omega).abs() < 1e-10);
        }
    }

    #[test]
    fn moving_residual() {
        let t = fluxon::velocity_for_bias(-2e-3, 15.0, 8, 0.02).unwrap();
        let m = EllipticModulus::new(t.k).unwrap();
        for ell in 0..=8 {
            let s = mode_frequency_moving(ell, 8, &t).unwrap();
            let z = m.zeta(Complex::new(s.beta.re, s.eta())).unwrap();
            let lhs = z.im + s.omega * t.v * t.k;
            let rhs = (2.0 * ell as f64 - 8.0) * PI / (16.0 * m.big_k);
            assert!((lhs - rhs).abs() < 1e-10);
            assert!(((s.q * 15.0 / TAU) - (s.q * 15.0 / TAU).round()).abs() < 1e-8);
        }
    }

    #[test]
    fn splitting_lifts_degeneracy_monotonically() {
        let p = JunctionParams::<f64>::circulator().with_length(15.0);
        let mut last = 0.0;
        for i in 1..=10 {
            let s = splitting(&p, -1e-3 * i as f64, 0.02).unwrap();
            assert!(s.delta_omega.abs() > last);
            last = s.delta_omega.abs();
        }
        assert!(splitting(&p, 0.0, 0.02).unwrap().delta_omega.abs() < 1e-10);
    }

    #[test]
    fn splitting_bias_parity() {
        let p = JunctionParams::<f64>::circulator();
        let drag = p.effective_damping(3);
        for i_b in [1e-4, 3e-4, 1e-3] {
            let a = splitting(&p, i_b, drag).unwrap();
            let b = splitting(&p, -i_b, drag).unwrap();
            assert!((a.delta_omega + b.delta_omega).abs() < 1e-10);
            assert!((a.omega_minus - b.omega_plus).abs() < 1e-10);
        }
    }

    #[test]
    fn circulator_splitting_matches_coupled_mode_optimum() {
        let p = JunctionParams::<f64>::circulator();
        let s = splitting(&p, 3e-4, p.effective_damping(3)).unwrap();
        let gamma_x = 3.0 * p.z / (2.0 * p.length);
        let target = 2.0 * gamma_x / 3f64.sqrt();
        assert!((s.delta_omega.abs() / target - 1.0).abs() < 0.2, "{} vs {target}", s.delta_omega);
    }

    #[test]
    fn lame_oracle_matches_quantisation() {
        let k = solve_modulus(15.0f64, 8, 0.0).unwrap();
        let w = lame_matrix_oracle(k, 15.0, 8, 4096, 10).unwrap();
        let mut analytic: Vec<f64> = (0..8).map(|l| mode_frequency_static(l, 8, k).unwrap().omega).collect();
        analytic.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert!(w[0].abs() < 1e-2);
        for (num, ana) in w[1..8].iter().zip(&analytic[1..]) {
            assert!((num / ana - 1.0).abs() < 1e-3, "{num} vs {ana}");
        }
        // gap: the next eigenvalue is in the plasma band, ω ≥ 1/k
        assert!(w[8] >= 1.0 / k * (1.0 - 1e-4), "{} vs {}", w[8], 1.0 / k);
        let plasma = plasma_mode(4, 8, k).unwrap();
        assert_eq!(plasma.band, Band::Plasma);
        assert!((w[8] / plasma.omega - 1.0).abs() < 1e-3, "{} vs {}", w[8], plasma.omega);
    }

    #[test]
    fn inertia_count_on_circulant() {
        // circulant with eigenvalues d + 2b·cos(2πj/N)
        let nodes = 12;
        let op = CyclicTridiagonal { diag: vec![3.0; nodes], off: -1.0 };
        let mut exact: Vec<f64> = (0..nodes).map(|j| 3.0 - 2.0 * (TAU * j as f64 / nodes as f64).cos()).collect();
        exact.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let (lo, hi) = op.gershgorin();
        for (i, e) in exact.iter().enumerate() {
            // doubly degenerate pairs leave the Schur complement ill-conditioned
            assert!((op.eigenvalue(i, lo, hi) - e).abs() < 1e-8, "{i}: {} vs {e}", op.eigenvalue(i, lo, hi));
        }
    }

    fn fd2(f: &dyn Fn(f64) -> Complex<f64>, x: f64, h: f64) -> Complex<f64> {
        (-f(x + 2.0 * h) + f(x + h) * 16.0 - f(x) * 30.0 + f(x - h) * 16.0 - f(x - 2.0 * h)) / (12.0 * h * h)
    }

    #[test]
    fn bloch_profile_properties() {
        let (length, n) = (15.0, 8u32);
        let k = solve_modulus::<f64>(length, n, 0.0).unwrap();
        let train = fluxon::velocity_for_bias(0.0, length, n, 0.02).unwrap();
        for ell in [1u32, 3, 6] {
            let mode = mode_frequency_static(ell, n, k).unwrap();
            for i in 0..10 {
                let x = 0.13 + 1.37 * i as f64;
                let (u0, _) = bloch_factors(x, &mode, k).unwrap();
                let (u1, _) = bloch_factors(x + length / n as f64, &mode, k).unwrap();
                assert!((u1 - u0).norm() < 1e-8 * u0.norm().max(1.0));
                let p0 = bloch_mode_profile(x, &mode, k).unwrap();
                let p1 = bloch_mode_profile(x + length, &mode, k).unwrap();
                assert!((p1 - p0).norm() < 1e-7 * p0.norm().max(1.0));
            }
            let psi = |x: f64| bloch_mode_profile(x, &mode, k).unwrap();
            for i in 0..150 {
                let x = length * (i as f64 + 0.5) / 150.0;
                let cos_phi = fluxon::fluxon_profile(x, 0.0, &train).unwrap().cos();
                let r = -fd2(&psi, x, 1e-2) + psi(x) * cos_phi - psi(x) * mode.omega * mode.omega;
                assert!(r.norm() < 1e-5 * psi(x).norm().max(1.0), "ℓ={ell} x={x}: {}", r.norm());
            }
        }
    }

    #[test]
    fn f32_static_mode() {
        let k = solve_modulus(26.0f32, 8, 0.0).unwrap();
        let m = mode_frequency_static(1, 8, k).unwrap();
        assert_relative_eq!(m.omega, 0.224_706f32, max_relative = 1e-4);
    }

    proptest! {
        #[test]
        fn bias_parity_exact(i_b in 1e-5f64..5e-3, ell in 1u32..8) {
            let a = fluxon::velocity_for_bias(i_b, 15.0, 8, 0.02).unwrap();
            let b = fluxon::velocity_for_bias(-i_b, 15.0, 8, 0.02).unwrap();
            let x = mode_frequency_moving(ell, 8, &a).unwrap();
            let y = mode_frequency_moving(8 - ell, 8, &b).unwrap();
            prop_assert!((x.omega - y.omega).abs() < 1e-10);
            prop_assert!((x.omega_lab - y.omega_lab).abs() < 1e-10);
        }
    }
}
