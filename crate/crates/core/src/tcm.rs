//! Temporal coupled-mode model of the three-port ring.
//!
//! Two counter-rotating modes `σ = ±1` at `ω_σ` couple to three ports spaced
//! by a third of the circumference. Each mode picks up a phase `σ·2π/3` from
//! one port to the next, which makes the S-matrix circulant:
//!
//! `S₁₁ = −1 + (2/3) Σ_σ Γx/(ΓΣ + i(ω − ω_σ))`
//! `S₂₁ = −(2/3) Σ_σ Γx e^{ σiπ/3}/(ΓΣ + i(ω − ω_σ))`
//! `S₃₁ = −(2/3) Σ_σ Γx e^{−σiπ/3}/(ΓΣ + i(ω − ω_σ))`
//!
//! with `ΓΣ = Γx + Γi`. `Γx` is the loss rate into each waveguide and `Γi`
//! the intrinsic one.

use num_complex::Complex;
use thiserror::Error;

use crate::fluxon::JunctionParams;
use crate::spectrum::Splitting;
use crate::Real;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TcmError {
    #[error("invalid coupled-mode parameters: {0}")]
    Invalid(String),
    #[error("fit needs at least {need} points, got {got}")]
    TooFewPoints { need: usize, got: usize },
}

pub type Result<T> = std::result::Result<T, TcmError>;

/// Orientation that maps the lab-frame mode pair of a ring with a positive
/// bias onto the coupled-mode circulation sense seen in time-domain runs:
/// forward transmission `S21` for `i_b > 0`.
pub const PDE_ORIENTATION: i8 = -1;

/// Mode pair and loss rates. `delta_omega = ω₊ − ω₋` is signed: reversing it
/// reverses the circulation direction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TcmParams<S> {
    pub omega_0: S,
    pub delta_omega: S,
    pub gamma_x: S,
    pub gamma_i: S,
}

/// `Γx = 3z/(2L)`: a port of strength `z` on a ring of length `L`, shared by
/// two standing-wave halves of each travelling mode.
pub fn gamma_x_from_junction<S: Real>(params: &JunctionParams<S>) -> S {
    S::lit(1.5) * params.z / params.length
}

impl<S: Real> TcmParams<S> {
    pub fn new(omega_0: S, delta_omega: S, gamma_x: S, gamma_i: S) -> Result<Self> {
        let t = Self {
            omega_0,
            delta_omega,
            gamma_x,
            gamma_i,
        };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.omega_0, self.delta_omega, self.gamma_x, self.gamma_i]
            .iter()
            .all(|v| v.is_finite());
        if !finite || self.gamma_x <= S::zero() || self.gamma_i < S::zero() {
            return Err(TcmError::Invalid(format!(
                "Γx = {}, Γi = {}, ω₀ = {}, Δω = {}",
                self.gamma_x, self.gamma_i, self.omega_0, self.delta_omega
            )));
        }
        Ok(())
    }

    /// Coupled-mode parameters of a device: `Γx = 3z/(2L)`, `Γi = g/2`.
    pub fn from_junction(params: &JunctionParams<S>, omega_0: S, delta_omega: S) -> Result<Self> {
        Self::new(omega_0, delta_omega, gamma_x_from_junction(params), params.g / S::lit(2.0))
    }

    /// Uses the mode pair of a computed splitting; `orientation = ±1` maps the
    /// upper lab frequency onto `σ = +1` or `σ = −1`.
    pub fn from_splitting(params: &JunctionParams<S>, split: &Splitting<S>, orientation: i8) -> Result<Self> {
        let two = S::lit(2.0);
        let omega_0 = (split.omega_plus + split.omega_minus) / two;
        let sign = if orientation < 0 { -S::one() } else { S::one() };
        Self::from_junction(params, omega_0, sign * split.delta_omega)
    }

    pub fn gamma_sigma(&self) -> S {
        self.gamma_x + self.gamma_i
    }

    pub fn omega(&self, sigma: i8) -> S {
        let half = self.delta_omega / S::lit(2.0);
        if sigma > 0 {
            self.omega_0 + half
        } else {
            self.omega_0 - half
        }
    }

    fn response(&self, omega_d: S, sigma: i8) -> Complex<S> {
        Complex::new(self.gamma_x, S::zero()) / Complex::new(self.gamma_sigma(), omega_d - self.omega(sigma))
    }

    /// `S_{j+m, j}` for port offset `m` (mod 3).
    pub fn element(&self, omega_d: S, offset: usize) -> Complex<S> {
        let third = S::lit(2.0) / S::lit(3.0);
        let pi3 = S::PI() / S::lit(3.0);
        let m = offset % 3;
        let mut sum = Complex::new(S::zero(), S::zero());
        for sigma in [1i8, -1] {
            let s = S::lit(sigma as f64);
            let phase = match m {
                0 => Complex::new(S::one(), S::zero()),
                1 => Complex::from_polar(S::one(), s * pi3),
                _ => Complex::from_polar(S::one(), -s * pi3),
            };
            sum = sum + phase * self.response(omega_d, sigma);
        }
        if m == 0 {
            Complex::new(-S::one(), S::zero()) + sum * third
        } else {
            -sum * third
        }
    }

    pub fn s11(&self, omega_d: S) -> Complex<S> {
        self.element(omega_d, 0)
    }

    pub fn s21(&self, omega_d: S) -> Complex<S> {
        self.element(omega_d, 1)
    }

    pub fn s31(&self, omega_d: S) -> Complex<S> {
        self.element(omega_d, 2)
    }

    /// Full circulant matrix, `m[row][col] = S_{row+1, col+1}`.
    pub fn s_matrix(&self, omega_d: S) -> [[Complex<S>; 3]; 3] {
        let e = [self.element(omega_d, 0), self.element(omega_d, 1), self.element(omega_d, 2)];
        let mut m = [[e[0]; 3]; 3];
        for (r, row) in m.iter_mut().enumerate() {
            for (c, v) in row.iter_mut().enumerate() {
                *v = e[(r + 3 - c) % 3];
            }
        }
        m
    }
}

/// Design rules for perfect circulation at `ω₀`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CirculatorDesign<S> {
    /// `Δω = 2ΓΣ/√3`.
    pub optimal_splitting: S,
    /// Design bandwidth `3Γx`.
    pub bandwidth: S,
    /// Peak transmission `Γx/ΓΣ` at the optimal splitting.
    pub peak_transmission: S,
}

pub fn design<S: Real>(gamma_x: S, gamma_i: S) -> CirculatorDesign<S> {
    let three = S::lit(3.0);
    let gs = gamma_x + gamma_i;
    CirculatorDesign {
        optimal_splitting: S::lit(2.0) * gs / three.sqrt(),
        bandwidth: three * gamma_x,
        peak_transmission: gamma_x / gs,
    }
}

/// Least-squares `Γx` for measured `|S₂₁|²` and `|S₃₁|²` on a frequency grid,
/// with `ω₀`, `Δω`, `Γi` held fixed. Golden-section search on
/// `Γx ∈ [lo, hi]`.
pub fn fit_gamma_x(
    base: &TcmParams<f64>,
    omegas: &[f64],
    transmission: &[(f64, f64)],
    bounds: (f64, f64),
) -> Result<TcmParams<f64>> {
    if omegas.len() < 3 || omegas.len() != transmission.len() {
        return Err(TcmError::TooFewPoints {
            need: 3,
            got: omegas.len().min(transmission.len()),
        });
    }
    let cost = |gx: f64| -> f64 {
        let t = TcmParams { gamma_x: gx, ..*base };
        omegas
            .iter()
            .zip(transmission)
            .map(|(&w, &(a, b))| (t.s21(w).norm_sqr() - a).powi(2) + (t.s31(w).norm_sqr() - b).powi(2))
            .sum()
    };
    let phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = bounds;
    let mut c = b - phi * (b - a);
    let mut d = a + phi * (b - a);
    let (mut fc, mut fd) = (cost(c), cost(d));
    for _ in 0..200 {
        if (b - a).abs() < 1e-12 * b.abs().max(1e-300) {
            break;
        }
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - phi * (b - a);
            fc = cost(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + phi * (b - a);
            fd = cost(d);
        }
    }
    TcmParams::new(base.omega_0, base.delta_omega, 0.5 * (a + b), base.gamma_i)
}

/// Maximum absolute difference between model and measured `|S|²` values.
pub fn max_power_deviation(t: &TcmParams<f64>, omegas: &[f64], measured: &[[f64; 3]]) -> f64 {
    omegas
        .iter()
        .zip(measured)
        .map(|(&w, m)| {
            let model = [t.s11(w).norm_sqr(), t.s21(w).norm_sqr(), t.s31(w).norm_sqr()];
            (0..3).map(|i| (model[i] - m[i]).abs()).fold(0.0, f64::max)
        })
        .fold(0.0, f64::max)
}
