//! Nonreciprocal microwave scattering in an annular long Josephson junction
//! carrying a moving fluxon train.
//!
//! The crate is organised bottom-up:
//!
//! * [`elliptic`]: complete elliptic integrals, Jacobi elliptic functions and
//!   the Jacobi eta/theta/zeta functions.
//! * [`fluxon`]: steady fluxon-train solutions, bias/velocity relations, I-V curves.
//! * [`spectrum`]: Lamé Bloch modes of the train, static and moving quantisation,
//!   plus an independent finite-difference eigenvalue oracle.
//! * [`sgpde`]: fixed-step time-domain solver for the driven, damped sine-Gordon
//!   ring with galvanic or capacitive waveguide ports.
//! * [`scattering`]: S-matrix extraction from time-domain runs and parallel sweeps.
//! * [`tcm`]: temporal coupled-mode model of the three-port ring.
//!
//! The numerical kernels are generic over [`Real`] (`f32` or `f64`); the aliases
//! below fix the scalar to `f64`, which is what the sweeps and the CLI use.

pub mod elliptic;
pub mod fluxon;
pub mod real;
pub mod scattering;
pub mod sgpde;
pub mod spectrum;
pub mod tcm;
pub mod units;

pub use real::Real;



pub type Float = f64;
pub type Complex = num_complex::Complex64;
pub type EllipticModulus = elliptic::EllipticModulus<f64>;
pub type JunctionParams = fluxon::JunctionParams<f64>;
pub type TrainState = fluxon::TrainState<f64>;
pub type ModeSolution = spectrum::ModeSolution<f64>;
pub type TcmParams = tcm::TcmParams<f64>;
pub use sgpde::{DriveSpec, FieldState, PortConfig, RingModel};
