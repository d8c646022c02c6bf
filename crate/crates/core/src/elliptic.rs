//! Complete elliptic integrals, Jacobi elliptic functions and the Jacobi
//! eta/theta/zeta functions.
//!
//! Conventions follow Whittaker & Watson: the modulus `k` (not the parameter
//! `m = k²`), quarter periods `K = K(k)` and `K' = K(k')`, nome
//! `q = exp(−πK'/K)`, and
//!
//! ```text
//! H(u) = ϑ₁(πu/2K, q)     Θ(u) = ϑ₄(πu/2K, q)     Z(u) = Θ'(u)/Θ(u)
//! ```
//!
//! so that `H(u)/Θ(u) = √k·sn(u, k)`.
//!
//! * `K`, `E` come from the arithmetic–geometric mean, switching to the
//!   logarithmic expansion about `k = 1` above [`NEAR_UNIT_MODULUS`].
//! * Real `am`, `sn`, `cn`, `dn` use the descending Landen (AGM) scheme; complex
//!   arguments go through the addition theorem with the complementary modulus.
//! * Theta functions are summed from their nome series, which converges inside
//!   the strip `|im u| ≤ K'`.

use num_complex::Complex;
use thiserror::Error;

use crate::Real;

/// `K` and `E` switch to their expansions about `k = 1` once `1 − k` drops
/// below this value. At the crossover the neglected terms are `O(k'^6 ln k')`,
/// far below double precision.
pub const NEAR_UNIT_MODULUS: f64 = 1e-8;

/// Relative size below which a theta-series term stops the summation.
pub const THETA_SERIES_TOL: f64 = 1e-16;

/// Upper bound on theta-series terms; only reached for a nome very close to 1.
pub const THETA_MAX_TERMS: usize = 400;

const AGM_MAX_ITER: usize = 64;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EllipticError {
    #[error("elliptic modulus k = {0} outside [0, 1)")]
    Modulus(f64),
    #[error("non-finite argument {0}")]
    NonFinite(f64),
    #[error("|im u| = {im} outside the theta-series strip |im u| <= K' = {bound}")]
    OutsideStrip { im: f64, bound: f64 },
    #[error("theta function vanishes at u = {re} + {im}i (pole of the zeta function)")]
    Pole { re: f64, im: f64 },
    #[error("theta series did not converge within {0} terms")]
    SeriesDiverged(usize),
}

pub type Result<T> = std::result::Result<T, EllipticError>;

fn check_modulus<S: Real>(k: S) -> Result<()> {
    if !k.is_finite() || k < S::zero() || k >= S::one() {
        return Err(EllipticError::Modulus(k.as_f64()));
    }
    Ok(())
}

/// `k' = √(1 − k²)`, computed as `√((1−k)(1+k))` to keep accuracy as `k → 1`.
#[inline]
pub fn complementary<S: Real>(k: S) -> S {
    ((S::one() - k) * (S::one() + k)).sqrt()
}

/// Complete elliptic integrals of the first and second kind, `(K(k), E(k))`.
pub fn elliptic_k_e<S: Real>(k: S) -> Result<(S, S)> {
    check_modulus(k)?;
    Ok(k_e_pair(k, complementary(k)))
}

/// `(K, E)` specified through the complementary modulus `k'`, which keeps full
/// relative accuracy for `k` so close to 1 that `k` itself rounds to 1.
pub fn elliptic_k_e_complement<S: Real>(kc: S) -> Result<(S, S)> {
    if !kc.is_finite() || kc <= S::zero() || kc > S::one() {
        return Err(EllipticError::Modulus(complementary(kc).as_f64()));
    }
    Ok(k_e_pair(complementary(kc), kc))
}

fn k_e_pair<S: Real>(k: S, kc: S) -> (S, S) {
    let half_pi = S::FRAC_PI_2();
    if k == S::zero() {
        return (half_pi, half_pi);
    }
    // 1 − k ≈ k'²/2 near the unit modulus
    if kc * kc < S::lit(2.0 * NEAR_UNIT_MODULUS) {
        return near_unit_k_e(kc);
    }
    let (mut a, mut b) = (S::one(), kc);
    let mut weight = S::lit(0.5);
    let mut sum = weight * k * k;
    for _ in 0..AGM_MAX_ITER {
        let c = (a - b) * S::lit(0.5);
        if c.abs() <= S::epsilon() * a {
            break;
        }
        let a_next = (a + b) * S::lit(0.5);
        b = (a * b).sqrt();
        a = a_next;
        weight *= S::lit(2.0);
        sum += weight * c * c;
    }
    let big_k = S::PI() / (a + a);
    (big_k, big_k * (S::one() - sum))
}

// A&S 17.3.26 and 17.3.36 carried to O(k'^4).
fn near_unit_k_e<S: Real>(kc: S) -> (S, S) {
    let lam = (S::lit(4.0) / kc).ln();
    let k2 = kc * kc;
    let k4 = k2 * k2;
    let big_k = lam
        + k2 / S::lit(4.0) * (lam - S::one())
        + S::lit(9.0) * k4 / S::lit(64.0) * (lam - S::lit(7.0 / 6.0));
    let big_e = S::one()
        + k2 / S::lit(2.0) * (lam - S::lit(0.5))
        + S::lit(3.0) * k4 / S::lit(16.0) * (lam - S::lit(13.0 / 12.0));
    (big_k, big_e)
}

/// A modulus together with the constants the theta functions need.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EllipticModulus<S> {
    pub k: S,
    /// Complementary modulus `k' = √(1 − k²)`.
    pub kc: S,
    /// Nome `q = exp(−πK'/K)`.
    pub nome: S,
    /// `K(k)`.
    pub big_k: S,
    /// `K(k')`.
    pub big_kc: S,
    /// `E(k)`.
    pub big_e: S,
    /// `E(k')`.
    pub big_ec: S,
}

impl<S: Real> EllipticModulus<S> {
    pub fn new(k: S) -> Result<Self> {
        check_modulus(k)?;
        let kc = complementary(k);
        let (big_k, big_e) = elliptic_k_e(k)?;
        // kc = 1 exactly when k² underflows; K(1) diverges, so the nome is 0.
        let (big_kc, big_ec, nome) = if kc < S::one() {
            let (kk, ee) = elliptic_k_e(kc)?;
            (kk, ee, (-S::PI() * kk / big_k).exp())
        } else {
            (S::infinity(), S::one(), S::zero())
        };
        Ok(Self {
            k,
            kc,
            nome,
            big_k,
            big_kc,
            big_e,
            big_ec,
        })
    }

    pub fn jacobi(&self, u: S) -> Result<JacobiElliptic<S>> {
        jacobi_am_sn_cn_dn(u, self.k)
    }

    pub fn theta_eta(&self, u: Complex<S>) -> Result<(Complex<S>, Complex<S>)> {
        let t = theta_series(u, self, S::lit(THETA_SERIES_TOL))?;
        Ok((t.eta, t.theta))
    }

    pub fn zeta(&self, u: Complex<S>) -> Result<Complex<S>> {
        theta_series(u, self, S::lit(THETA_SERIES_TOL))?.zeta()
    }
}

/// Values of the Jacobi amplitude and the three basic elliptic functions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JacobiElliptic<S> {
    pub am: S,
    pub sn: S,
    pub cn: S,
    pub dn: S,
}

/// `am(u,k)`, `sn`, `cn`, `dn` for real `u` by descending Landen transformation.
pub fn jacobi_am_sn_cn_dn<S: Real>(u: S, k: S) -> Result<JacobiElliptic<S>> {
    check_modulus(k)?;
    if !u.is_finite() {
        return Err(EllipticError::NonFinite(u.as_f64()));
    }
    if k == S::zero() {
        let (sn, cn) = u.sin_cos();
        return Ok(JacobiElliptic {
            am: u,
            sn,
            cn,
            dn: S::one(),
        });
    }
    let mut a = [S::zero(); AGM_MAX_ITER + 1];
    let mut c = [S::zero(); AGM_MAX_ITER + 1];
    a[0] = S::one();
    c[0] = k;
    let mut b = complementary(k);
    let mut levels = 0;
    while levels < AGM_MAX_ITER && c[levels].abs() > S::epsilon() * a[levels] {
        a[levels + 1] = (a[levels] + b) * S::lit(0.5);
        c[levels + 1] = (a[levels] - b) * S::lit(0.5);
        b = (a[levels] * b).sqrt();
        levels += 1;
    }
    let mut phi = S::lit(2.0).powi(levels as i32) * a[levels] * u;
    for n in (1..=levels).rev() {
        phi = (phi + (c[n] / a[n] * phi.sin()).asin()) * S::lit(0.5);
    }
    let (sn, cn) = phi.sin_cos();
    // dn² = cn² + k'²sn² has no cancellation, unlike 1 − k²sn² near k → 1
    let kc = complementary(k);
    let dn = (cn * cn + kc * kc * sn * sn).sqrt();
    Ok(JacobiElliptic { am: phi, sn, cn, dn })
}

/// `sn`, `cn`, `dn` at a complex argument via the addition theorem, using real
/// evaluations at `re u` with modulus `k` and at `im u` with modulus `k'`.
pub fn jacobi_sn_cn_dn_complex<S: Real>(
    u: Complex<S>,
    k: S,
) -> Result<(Complex<S>, Complex<S>, Complex<S>)> {
    check_modulus(k)?;
    let re = jacobi_am_sn_cn_dn(u.re, k)?;
    let kc = complementary(k);
    // k' = 1 only when k = 0, where the imaginary-part functions are hyperbolic.
    let (s1, c1, d1) = if kc < S::one() {
        let im = jacobi_am_sn_cn_dn(u.im, kc)?;
        (im.sn, im.cn, im.dn)
    } else {
        (u.im.tanh(), S::one() / u.im.cosh(), S::one() / u.im.cosh())
    };
    let (s, c, d) = (re.sn, re.cn, re.dn);
    let k2 = k * k;
    let denom = c1 * c1 + k2 * s * s * s1 * s1;
    let sn = Complex::new(s * d1, c * d * s1 * c1) / denom;
    let cn = Complex::new(c * c1, -s * d * s1 * d1) / denom;
    let dn = Complex::new(d * c1 * d1, -k2 * s * c * s1) / denom;
    Ok((sn, cn, dn))
}

/// Eta, theta and the derivative of theta at one argument.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThetaValues<S> {
    /// `H(u)`
    pub eta: Complex<S>,
    /// `Θ(u)`
    pub theta: Complex<S>,
    /// `Θ'(u) = dΘ/du`
    pub theta_prime: Complex<S>,
}

impl<S: Real> ThetaValues<S> {
    pub fn zeta(&self) -> Result<Complex<S>> {
        if self.theta.norm() < S::tol(1e-300) {
            return Err(EllipticError::Pole {
                re: f64::NAN,
                im: f64::NAN,
            });
        }
        Ok(self.theta_prime / self.theta)
    }
}

/// Sums the nome series for `H`, `Θ` and `Θ'`, stopping once every term is
/// smaller than `rel_tol` times its partial sum.
pub fn theta_series<S: Real>(
    u: Complex<S>,
    m: &EllipticModulus<S>,
    rel_tol: S,
) -> Result<ThetaValues<S>> {
    if !u.re.is_finite() || !u.im.is_finite() {
        return Err(EllipticError::NonFinite(u.re.as_f64()));
    }
    let strip = m.big_kc * (S::one() + S::tol(1e-12));
    if u.im.abs() > strip {
        return Err(EllipticError::OutsideStrip {
            im: u.im.as_f64(),
            bound: m.big_kc.as_f64(),
        });
    }
    let scale = S::PI() / (m.big_k + m.big_k);
    let two_pi = S::PI() + S::PI();
    let mut v = u * scale;
    // H has period 2π in v and Θ has period π, so reduce the real part.
    v.re = v.re - two_pi * (v.re / two_pi).round();

    let q = m.nome;
    let two = S::lit(2.0);
    let mut eta = Complex::new(S::zero(), S::zero());
    let mut theta = Complex::new(S::one(), S::zero());
    let mut dtheta = Complex::new(S::zero(), S::zero());
    if q == S::zero() {
        return Ok(ThetaValues {
            eta,
            theta,
            theta_prime: dtheta,
        });
    }
    let q_quarter = q.sqrt().sqrt();
    // q^{n(n+1)} for the eta terms, q^{n²} for the theta terms.
    let mut q_eta = S::one();
    let mut q_theta = S::one();
    let mut sign = S::one();
    let mut converged = false;
    for n in 0..THETA_MAX_TERMS {
        let nf = S::from_usize(n).unwrap();
        let odd = Complex::new(two * nf + S::one(), S::zero());
        let eta_term = (v * odd).sin() * (two * sign * q_quarter * q_eta);
        eta += eta_term;
        let mut small = eta_term.norm() <= rel_tol * eta.norm();
        if n >= 1 {
            let even = Complex::new(two * nf, S::zero());
            let arg = v * even;
            let theta_term = arg.cos() * (two * sign * q_theta);
            let dtheta_term = arg.sin() * (-S::lit(4.0) * sign * nf * q_theta);
            theta += theta_term;
            dtheta += dtheta_term;
            small = small
                && theta_term.norm() <= rel_tol * theta.norm()
                && dtheta_term.norm() <= rel_tol * dtheta.norm().max(S::min_positive_value());
        }
        if n >= 1 && small {
            converged = true;
            break;
        }
        // advance powers: q^{(n+1)(n+2)} = q^{n(n+1)}·q^{2(n+1)}, q^{(n+1)²} = q^{n²}·q^{2n+1}
        q_eta *= q.powi(2 * (n as i32 + 1));
        q_theta *= q.powi(2 * n as i32 + 1);
        sign = -sign;
        if q_eta == S::zero() && q_theta == S::zero() {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(EllipticError::SeriesDiverged(THETA_MAX_TERMS));
    }
    Ok(ThetaValues {
        eta,
        theta,
        theta_prime: dtheta * scale,
    })
}

/// Jacobi eta and theta functions `(H(u), Θ(u))`.
pub fn theta_eta<S: Real>(u: Complex<S>, k: S) -> Result<(Complex<S>, Complex<S>)> {
    EllipticModulus::new(k)?.theta_eta(u)
}

/// Jacobi zeta function `Z(u) = Θ'(u)/Θ(u)`.
pub fn jacobi_zeta<S: Real>(u: Complex<S>, k: S) -> Result<Complex<S>> {
    let m = EllipticModulus::new(k)?;
    let t = theta_series(u, &m, S::lit(THETA_SERIES_TOL))?;
    t.zeta().map_err(|_| EllipticError::Pole {
        re: u.re.as_f64(),
        im: u.im.as_f64(),
    })
}
