//! S-matrix extraction from time-domain runs, parameter sweeps and the
//! lumped LC reflection oracle.
//!
//! A drive `Ṽ cos(ω_d t)` is applied to one port. Every port's output voltage
//! is recorded after a transient and projected onto `e^{−iω_d t}` with a Hann
//! window; `S_jk = Ṽ_out^{(j)}/Ṽ_in^{(k)}`.
//!
//! The moving train makes every port voltage carry a large periodic signal
//! of its own. Before demodulation the output of an undriven twin run, started
//! from the same state and stepped on the same time grid, is subtracted.
//! What remains is the response to the drive alone, so the window does not
//! have to span many rotation periods.

use num_complex::Complex64;
use rayon::prelude::*;
use thiserror::Error;

use crate::fluxon::{self, FluxonError, JunctionParams};
use crate::sgpde::{
    self, DriveSpec, FieldState, InitialTrain, PortConfig, PortKind, Probe, RingModel, SgError,
};
use crate::spectrum::{self, SpectrumError};
use crate::tcm::{TcmError, TcmParams};
use crate::units;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScatterError {
    #[error(transparent)]
    Solver(#[from] SgError),
    #[error(transparent)]
    Fluxon(#[from] FluxonError),
    #[error(transparent)]
    Spectrum(#[from] SpectrumError),
    #[error(transparent)]
    Tcm(#[from] TcmError),
    #[error("invalid grid: {0}")]
    Grid(String),
    #[error("grid mismatch: {0}")]
    Mismatch(String),
    #[error("worker pool: {0}")]
    Pool(String),
}

pub type Result<T> = std::result::Result<T, ScatterError>;

/// Numerical settings shared by every run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Numerics {
    /// Grid nodes per Josephson length; the total is rounded up to a multiple of 3.
    pub nodes_per_lambda: f64,
    /// `dt = dt_factor·Δx`.
    pub dt_factor: f64,
    /// Minimum transient in drive periods.
    pub transient_periods: f64,
    /// Minimum transient in units of the loaded ring-down time `1/ΓΣ`.
    pub transient_decay: f64,
    /// Demodulation window in drive periods (split into two halves for the
    /// steadiness check).
    pub window_periods: u32,
    /// Largest allowed change of any `|S|` between the two half windows.
    pub steady_tol: f64,
}

impl Default for Numerics {
    fn default() -> Self {
        Self {
            nodes_per_lambda: 20.0,
            dt_factor: sgpde::DEFAULT_DT_FACTOR,
            transient_periods: 50.0,
            transient_decay: 8.0,
            window_periods: 64,
            steady_tol: 1e-3,
        }
    }
}

/// Default drive amplitude (about −120 dBm for the default device).
pub const DEFAULT_AMPLITUDE: f64 = 3.2e-3;

/// One column of the S-matrix at one drive frequency and amplitude.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScatterPoint {
    pub drive_port: usize,
    pub omega_d: f64,
    pub amplitude: f64,
    pub i_b: f64,
    /// `S_{j,k}` for output ports `j = 0, 1, 2`, drive port `k`.
    pub s: [Complex64; 3],
    /// Time-averaged spatial mean of `φ_t`, in volts.
    pub v_dc: f64,
    /// Train velocity implied by `v_dc`: `v = −⟨φ_t⟩L/(2πn)`.
    pub velocity: f64,
    pub p_in: f64,
    pub p_diss: f64,
    /// Total `Σⱼ|S|²` converted to the sidebands `ω_d ± m·ω_pass`, `m = 1..3`,
    /// where `ω_pass = |⟨φ_t⟩|` is the rate at which fluxons pass a port.
    pub sideband_power: f64,
    /// Largest `||S|_first − |S|_second|` between the half windows.
    pub window_mismatch: f64,
    pub converged: bool,
}

impl ScatterPoint {
    /// `|S|` in circulator order: reflection, next port, port after that.
    pub fn magnitudes(&self) -> [f64; 3] {
        let k = self.drive_port;
        [0, 1, 2].map(|m| self.s[(k + m) % 3].norm())
    }

    pub fn power_sum(&self) -> f64 {
        self.s.iter().map(|s| s.norm_sqr()).sum()
    }

    /// Carrier plus sideband power; 1 for a lossless ring.
    pub fn total_power(&self) -> f64 {
        self.power_sum() + self.sideband_power
    }
}

/// Device, bias and port layout of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct Device {
    pub params: JunctionParams<f64>,
    pub ports: Vec<PortConfig>,
    pub i_b: f64,
    pub start: InitialTrain,
}

impl Device {
    /// Three galvanic ports at `0, L/3, 2L/3`.
    pub fn galvanic(params: JunctionParams<f64>, i_b: f64) -> Self {
        Self {
            ports: sgpde::galvanic_triplet(&params),
            params,
            i_b,
            start: InitialTrain::FromBias,
        }
    }

    /// Three capacitive ports; the train starts at velocity `v` since the
    /// ports exert no DC drag.
    pub fn capacitive(params: JunctionParams<f64>, c_c: f64, i_b: f64, v: f64) -> Self {
        Self {
            ports: sgpde::capacitive_triplet(&params, c_c),
            params,
            i_b,
            start: InitialTrain::Velocity(v),
        }
    }

    pub fn with_bias(&self, i_b: f64) -> Self {
        Self { i_b, ..self.clone() }
    }

    pub fn model(&self, numerics: &Numerics) -> Result<RingModel> {
        let nodes = RingModel::node_count(self.params.length, numerics.nodes_per_lambda, 3);
        Ok(RingModel::new(self.params, self.ports.clone(), nodes, self.i_b)?)
    }

    /// Loaded decay rate `ΓΣ`: per port `z_eff/(2L)` plus `g/2`. A capacitive
    /// port's effective coupling at `ω` is `z/(1 + (p_C/ω)²)`.
    pub fn loaded_rate(&self, omega: f64) -> f64 {
        let ext: f64 = self
            .ports
            .iter()
            .map(|p| match p.kind {
                PortKind::Galvanic { z } => z,
                PortKind::Capacitive { p_c, .. } => p.coupling() / (1.0 + (p_c / omega).powi(2)),
            })
            .sum();
        ext / (2.0 * self.params.length) + 0.5 * self.params.g
    }
}

struct Schedule {
    transient: u64,
    window: u64,
}

impl Schedule {
    fn new(device: &Device, omega_d: f64, dt: f64, numerics: &Numerics) -> Self {
        let period = std::f64::consts::TAU / omega_d;
        let transient = (numerics.transient_periods * period).max(numerics.transient_decay / device.loaded_rate(omega_d));
        let window = (numerics.window_periods as f64 * period / dt).round() as u64;
        Self {
            transient: (transient / dt).ceil() as u64,
            window: window + window % 2,
        }
    }

    fn total(&self) -> u64 {
        self.transient + self.window
    }
}

/// Undriven twin run: initial state plus the port outputs on every step.
pub struct Bench {
    device: Device,
    model: RingModel,
    numerics: Numerics,
    dt: f64,
    start: FieldState,
    reference: Vec<f64>,
    omega_pass: f64,
}

const SIDEBANDS: i32 = 3;

impl Bench {
    /// Runs the undriven twin long enough for every drive in `drives`.
    pub fn new(device: &Device, omegas: &[f64], numerics: &Numerics) -> Result<Self> {
        let model = device.model(numerics)?;
        let dt = numerics.dt_factor * model.dx;
        let start = model.initialize(device.start)?;
        let steps = omegas
            .iter()
            .map(|&w| Schedule::new(device, w, dt, numerics).total())
            .max()
            .unwrap_or(0);
        let ports = model.ports.len();
        let mut reference = Vec::with_capacity(steps as usize * ports);
        let mut state = start.clone();
        let (mut mean, mut count) = (0.0, 0u64);
        let mut record = |p: &Probe<'_>| {
            reference.extend_from_slice(p.v_out);
            if 2 * p.step > steps {
                mean += p.mean_phi_t;
                count += 1;
            }
        };
        model.evolve(&mut state, steps as f64 * dt, dt, &mut record)?;
        Ok(Self {
            device: device.clone(),
            model,
            numerics: *numerics,
            dt,
            start,
            reference,
            omega_pass: (mean / count.max(1) as f64).abs(),
        })
    }

    pub fn model(&self) -> &RingModel {
        &self.model
    }

    /// Drives port `port` and demodulates every port against the reference.
    pub fn measure(&self, port: usize, omega_d: f64, amplitude: f64) -> Result<ScatterPoint> {
        let sched = Schedule::new(&self.device, omega_d, self.dt, &self.numerics);
        let ports = self.model.ports.len();
        if (sched.total() as usize) * ports > self.reference.len() {
            return Err(ScatterError::Grid(format!(
                "reference run too short for ω_d = {omega_d}"
            )));
        }
        let model = self.model.clone().with_drives(vec![DriveSpec {
            port,
            amplitude,
            omega_d,
        }])?;
        let half = sched.window / 2;
        let mut full = sgpde::Demodulator::new(omega_d, sched.window, ports);
        let mut first = sgpde::Demodulator::new(omega_d, half, ports);
        let mut second = sgpde::Demodulator::new(omega_d, half, ports);
        // sidebands are only separable when they sit outside the Hann main lobe
        let lobe = 2.0 * std::f64::consts::TAU / (sched.window as f64 * self.dt);
        let mut sidebands: Vec<sgpde::Demodulator> = if self.omega_pass > 2.0 * lobe {
            (-SIDEBANDS..=SIDEBANDS)
                .filter(|&m| m != 0)
                .map(|m| omega_d + m as f64 * self.omega_pass)
                .filter(|&w| w > lobe)
                .map(|w| sgpde::Demodulator::new(w, sched.window, ports))
                .collect()
        } else {
            Vec::new()
        };
        let mut diff = vec![0.0; ports];
        let mut mean_sum = 0.0;
        let reference = &self.reference;
        let mut observe = |p: &Probe<'_>| {
            if p.step <= sched.transient {
                return;
            }
            let row = (p.step - 1) as usize * ports;
            for j in 0..ports {
                diff[j] = p.v_out[j] - reference[row + j];
            }
            full.push(p.t, &diff);
            for d in sidebands.iter_mut() {
                d.push(p.t, &diff);
            }
            if p.step - sched.transient <= half {
                first.push(p.t, &diff);
            } else {
                second.push(p.t, &diff);
            }
            mean_sum += p.mean_phi_t;
        };
        let mut state = self.start.clone();
        model.evolve(&mut state, sched.total() as f64 * self.dt, self.dt, &mut observe)?;

        let amp = |d: &sgpde::Demodulator| -> Vec<Complex64> {
            d.amplitude().into_iter().map(|a| a / amplitude).collect()
        };
        let (s_full, s_a, s_b) = (amp(&full), amp(&first), amp(&second));
        let window_mismatch = s_a
            .iter()
            .zip(&s_b)
            .map(|(a, b)| (a.norm() - b.norm()).abs())
            .fold(0.0, f64::max);
        let params = &self.device.params;
        let mean_phi_t = mean_sum / sched.window as f64;
        let v_dc = mean_phi_t * params.voltage_scale();
        let n = params.fluxons.max(1) as f64;
        let mut s = [Complex64::new(0.0, 0.0); 3];
        for (j, v) in s_full.iter().take(3).enumerate() {
            s[j] = *v;
        }
        Ok(ScatterPoint {
            drive_port: port,
            omega_d,
            amplitude,
            i_b: self.device.i_b,
            s,
            v_dc,
            velocity: -mean_phi_t * params.length / (std::f64::consts::TAU * n),
            p_in: units::drive_power(amplitude, params.f_p, params.z0),
            p_diss: dissipated_power(v_dc, params.z0, ports),
            sideband_power: sidebands
                .iter()
                .flat_map(|d| amp(d))
                .map(|a| a.norm_sqr())
                .sum(),
            window_mismatch,
            converged: window_mismatch <= self.numerics.steady_tol,
        })
    }
}

/// `P_diss = V_DC²/(Z₀/m)` for `m` waveguides loading the ring in parallel.
pub fn dissipated_power(v_dc: f64, z0: f64, ports: usize) -> f64 {
    v_dc * v_dc * ports as f64 / z0
}

/// One S-matrix column with its own reference run.
pub fn s_column(device: &Device, drive: DriveSpec, numerics: &Numerics) -> Result<ScatterPoint> {
    Bench::new(device, &[drive.omega_d], numerics)?.measure(drive.port, drive.omega_d, drive.amplitude)
}

/// A drive applied to a device. Jobs sharing a device index share one reference run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Job {
    pub device: usize,
    pub port: usize,
    pub omega_d: f64,
    pub amplitude: f64,
}

fn pool(workers: Option<usize>) -> Result<rayon::ThreadPool> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(w) = workers {
        b = b.num_threads(w.max(1));
    }
    b.build().map_err(|e| ScatterError::Pool(e.to_string()))
}

/// Runs `jobs` on `workers` threads (all cores when `None`). References are
/// computed first, one per device; results come back in job order and a
/// failing point does not stop the others.
pub fn run_jobs(
    devices: &[Device],
    jobs: &[Job],
    numerics: &Numerics,
    workers: Option<usize>,
) -> Result<Vec<Result<ScatterPoint>>> {
    if let Some(j) = jobs.iter().find(|j| j.device >= devices.len()) {
        return Err(ScatterError::Grid(format!("job refers to device {}", j.device)));
    }
    let pool = pool(workers)?;
    Ok(pool.install(|| {
        let benches: Vec<Result<Bench>> = devices
            .par_iter()
            .enumerate()
            .map(|(d, dev)| {
                let omegas: Vec<f64> = jobs.iter().filter(|j| j.device == d).map(|j| j.omega_d).collect();
                if omegas.is_empty() {
                    return Err(ScatterError::Grid("device without jobs".into()));
                }
                Bench::new(dev, &omegas, numerics)
            })
            .collect();
        jobs.par_iter()
            .map(|j| match &benches[j.device] {
                Ok(b) => b.measure(j.port, j.omega_d, j.amplitude),
                Err(e) => Err(e.clone()),
            })
            .collect()
    }))
}

fn check_grid(name: &str, grid: &[f64]) -> Result<()> {
    if grid.is_empty() || grid.iter().any(|v| !v.is_finite()) {
        return Err(ScatterError::Grid(format!("{name} grid empty or non-finite")));
    }
    Ok(())
}

/// `|S_{j1}|` against bias at a fixed drive frequency.
pub fn bias_sweep(
    template: &Device,
    biases: &[f64],
    omega_d: f64,
    amplitude: f64,
    numerics: &Numerics,
    workers: Option<usize>,
) -> Result<Vec<Result<ScatterPoint>>> {
    check_grid("bias", biases)?;
    let devices: Vec<Device> = biases.iter().map(|&b| template.with_bias(b)).collect();
    let jobs: Vec<Job> = (0..devices.len())
        .map(|d| Job {
            device: d,
            port: 0,
            omega_d,
            amplitude,
        })
        .collect();
    run_jobs(&devices, &jobs, numerics, workers)
}

/// `S_{j1}` against drive frequency at a fixed bias (one shared reference).
pub fn frequency_sweep(
    device: &Device,
    omegas: &[f64],
    amplitude: f64,
    numerics: &Numerics,
    workers: Option<usize>,
) -> Result<Vec<Result<ScatterPoint>>> {
    check_grid("frequency", omegas)?;
    let jobs: Vec<Job> = omegas
        .iter()
        .map(|&w| Job {
            device: 0,
            port: 0,
            omega_d: w,
            amplitude,
        })
        .collect();
    run_jobs(std::slice::from_ref(device), &jobs, numerics, workers)
}

/// `S_{j1}` against drive amplitude (one shared reference).
pub fn power_sweep(
    device: &Device,
    omega_d: f64,
    amplitudes: &[f64],
    numerics: &Numerics,
    workers: Option<usize>,
) -> Result<Vec<Result<ScatterPoint>>> {
    check_grid("amplitude", amplitudes)?;
    let jobs: Vec<Job> = amplitudes
        .iter()
        .map(|&a| Job {
            device: 0,
            port: 0,
            omega_d,
            amplitude: a,
        })
        .collect();
    run_jobs(std::slice::from_ref(device), &jobs, numerics, workers)
}

/// Operating point predicted by the mode spectrum: the bias whose lab-frame
/// splitting equals `2ΓΣ/√3` and the centre frequency of the pair there.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OperatingPoint {
    pub i_b: f64,
    pub omega_0: f64,
    pub delta_omega: f64,
    pub velocity: f64,
}

/// Finds the galvanic operating point for `params` by bisection on the bias.
/// `damping` is the uniform drag used for the train (intrinsic plus ports).
pub fn predicted_operating_point(params: &JunctionParams<f64>, damping: f64) -> Result<OperatingPoint> {
    let gamma_sigma = 1.5 * params.z / params.length + 0.5 * params.g;
    let target = 2.0 * gamma_sigma / 3f64.sqrt();
    let split = |i_b: f64| spectrum::splitting(params, i_b, damping);
    let mut lo = 0.0;
    let mut hi = 1e-4;
    while split(hi)?.delta_omega < target {
        lo = hi;
        hi *= 2.0;
        if hi > 0.5 {
            return Err(ScatterError::Grid("no bias reaches the optimal splitting".into()));
        }
    }
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if split(mid)?.delta_omega < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let s = split(0.5 * (lo + hi))?;
    Ok(OperatingPoint {
        i_b: 0.5 * (lo + hi),
        omega_0: 0.5 * (s.omega_plus + s.omega_minus),
        delta_omega: s.delta_omega,
        velocity: s.train.v,
    })
}

/// `S_{j1}` against the intrinsic loss `g`. At every `g` the bias is retuned so
/// that the predicted splitting is optimal for `ΓΣ = Γx + g/2`, and the drive
/// sits at the predicted centre frequency.
pub fn loss_sweep_g(
    base: &JunctionParams<f64>,
    gs: &[f64],
    amplitude: f64,
    numerics: &Numerics,
    workers: Option<usize>,
) -> Result<Vec<Result<(OperatingPoint, ScatterPoint)>>> {
    check_grid("g", gs)?;
    let mut ops = Vec::new();
    let mut devices = Vec::new();
    for &g in gs {
        let params = base.with_losses(g, base.p);
        let op = predicted_operating_point(&params, params.effective_damping(3))?;
        devices.push(Device::galvanic(params, op.i_b));
        ops.push(op);
    }
    let jobs: Vec<Job> = ops
        .iter()
        .enumerate()
        .map(|(d, op)| Job {
            device: d,
            port: 0,
            omega_d: op.omega_0,
            amplitude,
        })
        .collect();
    let out = run_jobs(&devices, &jobs, numerics, workers)?;
    Ok(out.into_iter().zip(ops).map(|(r, op)| r.map(|p| (op, p))).collect())
}

/// `S_{j1}` against the surface loss `p` at a fixed bias and drive frequency.
pub fn loss_sweep_p(
    template: &Device,
    ps: &[f64],
    omega_d: f64,
    amplitude: f64,
    numerics: &Numerics,
    workers: Option<usize>,
) -> Result<Vec<Result<ScatterPoint>>> {
    check_grid("p", ps)?;
    let devices: Vec<Device> = ps
        .iter()
        .map(|&p| Device {
            params: template.params.with_losses(template.params.g, p),
            ..template.clone()
        })
        .collect();
    let jobs: Vec<Job> = (0..devices.len())
        .map(|d| Job {
            device: d,
            port: 0,
            omega_d,
            amplitude,
        })
        .collect();
    run_jobs(&devices, &jobs, numerics, workers)
}

/// Optimal `S_{j1}` against fluxon number, each at its predicted operating point.
pub fn fluxon_sweep(
    base: &JunctionParams<f64>,
    counts: &[u32],
    amplitude: f64,
    numerics: &Numerics,
    workers: Option<usize>,
) -> Result<Vec<Result<(OperatingPoint, ScatterPoint)>>> {
    if counts.is_empty() || counts.contains(&0) {
        return Err(ScatterError::Grid("fluxon counts must be positive".into()));
    }
    let mut ops = Vec::new();
    let mut devices = Vec::new();
    for &n in counts {
        let params = base.with_fluxons(n);
        let op = predicted_operating_point(&params, params.effective_damping(3))?;
        devices.push(Device::galvanic(params, op.i_b));
        ops.push(op);
    }
    let jobs: Vec<Job> = ops
        .iter()
        .enumerate()
        .map(|(d, op)| Job {
            device: d,
            port: 0,
            omega_d: op.omega_0,
            amplitude,
        })
        .collect();
    let out = run_jobs(&devices, &jobs, numerics, workers)?;
    Ok(out.into_iter().zip(ops).map(|(r, op)| r.map(|p| (op, p))).collect())
}

/// Mode pair `(ω₀, Δω)` of a train moving at velocity `v`, independent of
/// what holds it there.
pub fn pair_at_velocity(params: &JunctionParams<f64>, v: f64) -> Result<(f64, f64)> {
    let n = params.fluxons;
    let (k, kc) = fluxon::solve_modulus_pair(params.length, n, v)?;
    let train = fluxon::TrainState {
        k,
        kc,
        v,
        gamma_v: fluxon::lorentz_factor(v)?,
        i_b: 0.0,
    };
    let minus = spectrum::mode_frequency_moving(1, n, &train)?;
    let plus = spectrum::mode_frequency_moving(n - 1, n, &train)?;
    Ok((
        0.5 * (plus.omega_lab + minus.omega_lab),
        plus.omega_lab - minus.omega_lab,
    ))
}

/// Operating point of a capacitively coupled ring.
///
/// The ports draw no DC current, so the train keeps whatever velocity it is
/// launched with; only the intrinsic loss `g` needs a holding bias. The
/// velocity is chosen so that the splitting is `2ΓΣ/√3` with the loaded rate
/// of the capacitive ports at the pair's own centre frequency.
pub fn capacitive_operating_point(params: &JunctionParams<f64>, c_c: f64) -> Result<OperatingPoint> {
    let probe = Device::capacitive(*params, c_c, 0.0, 0.0);
    let target = |omega: f64| 2.0 * probe.loaded_rate(omega) / 3f64.sqrt();
    let (omega_static, _) = pair_at_velocity(params, 0.0)?;
    let mut omega = omega_static;
    let mut v = 0.0;
    for _ in 0..4 {
        let want = target(omega);
        // Δω grows with |v|; a positive bias moves the train towards −x
        let (mut lo, mut hi) = (0.0, 0.5);
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if pair_at_velocity(params, -mid)?.1 < want {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        v = -0.5 * (lo + hi);
        omega = pair_at_velocity(params, v)?.0;
    }
    let (omega_0, delta_omega) = pair_at_velocity(params, v)?;
    let k = fluxon::solve_modulus(params.length, params.fluxons, v)?;
    let i_b = fluxon::bias_for_velocity(v, k, params.g)?;
    Ok(OperatingPoint {
        i_b,
        omega_0,
        delta_omega,
        velocity: v,
    })
}

/// One curve of a galvanic/capacitive comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct CouplingCurve {
    /// Coupling capacitance in farads; `None` for galvanic ports.
    pub c_c: Option<f64>,
    pub i_b: f64,
    /// Launch velocity (capacitive) or the predicted train velocity (galvanic).
    pub velocity: f64,
    /// Centre frequency the detunings refer to (the galvanic operating point).
    pub omega_ref: f64,
    pub points: Vec<Result<ScatterPoint>>,
}

/// `S_{j1}` against relative detuning `ω_d/ω_ref − 1` for the galvanic ring and
/// for each coupling capacitance, all referred to the galvanic centre frequency.
pub fn coupling_comparison(
    params: &JunctionParams<f64>,
    capacitances: &[f64],
    detunings: &[f64],
    amplitude: f64,
    numerics: &Numerics,
    workers: Option<usize>,
) -> Result<Vec<CouplingCurve>> {
    check_grid("detuning", detunings)?;
    if capacitances.iter().any(|c| !(*c > 0.0)) {
        return Err(ScatterError::Grid("coupling capacitances must be positive".into()));
    }
    let galv = predicted_operating_point(params, params.effective_damping(3))?;
    let omega_ref = galv.omega_0;
    let mut curves = vec![CouplingCurve {
        c_c: None,
        i_b: galv.i_b,
        velocity: galv.velocity,
        omega_ref,
        points: Vec::new(),
    }];
    let mut devices = vec![Device::galvanic(*params, galv.i_b)];
    for &c in capacitances {
        let op = capacitive_operating_point(params, c)?;
        devices.push(Device::capacitive(*params, c, op.i_b, op.velocity));
        curves.push(CouplingCurve {
            c_c: Some(c),
            i_b: op.i_b,
            velocity: op.velocity,
            omega_ref,
            points: Vec::new(),
        });
    }
    let jobs: Vec<Job> = (0..devices.len())
        .flat_map(|d| {
            detunings.iter().map(move |&x| Job {
                device: d,
                port: 0,
                omega_d: omega_ref * (1.0 + x),
                amplitude,
            })
        })
        .collect();
    let mut results = run_jobs(&devices, &jobs, numerics, workers)?.into_iter();
    for c in curves.iter_mut() {
        c.points = results.by_ref().take(detunings.len()).collect();
    }
    Ok(curves)
}

/// Reflection coefficient of a parallel LC resonator on a waveguide of
/// impedance `z0`, optionally through a series coupling capacitor `c_c`.
///
/// `Γ = (Z_L − Z₀)/(Z_L + Z₀)` with `Z_L = iωL/(1 − ω²LC)` (plus `1/(iωC_C)`
/// in series for capacitive coupling), written through the admittance so that
/// resonance is finite.
pub fn lc_reflection_oracle(omega: f64, l: f64, c: f64, c_c: Option<f64>, z0: f64) -> Complex64 {
    let i = Complex64::new(0.0, 1.0);
    let y = (1.0 - omega * omega * l * c) / (i * omega * l);
    let series = match c_c {
        Some(cc) => 1.0 + y / (i * omega * cc),
        None => Complex64::new(1.0, 0.0),
    };
    (series - z0 * y) / (series + z0 * y)
}

/// Full width at half maximum of `values` sampled on an increasing `xs`,
/// with linear interpolation of both crossings. `None` when the peak touches
/// either end of the grid.
pub fn fwhm(xs: &[f64], values: &[f64]) -> Option<f64> {
    let (imax, &peak) = values
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))?;
    let half = 0.5 * peak;
    let cross = |i: usize, j: usize| xs[i] + (half - values[i]) * (xs[j] - xs[i]) / (values[j] - values[i]);
    let left = (0..imax).rev().find(|&i| values[i] < half).map(|i| cross(i, i + 1))?;
    let right = (imax + 1..values.len()).find(|&i| values[i] < half).map(|i| cross(i - 1, i))?;
    Some(right - left)
}

/// Input power (dBm) at which `|S|` falls to `10^{−1/20}` of its small-signal
/// value (the first point), by linear interpolation in dBm.
pub fn compression_point(powers_dbm: &[f64], magnitudes: &[f64]) -> Option<f64> {
    let reference = *magnitudes.first()?;
    let target = reference * 10f64.powf(-1.0 / 20.0);
    let i = magnitudes.iter().position(|&m| m < target)?;
    if i == 0 {
        return None;
    }
    let (x0, x1) = (powers_dbm[i - 1], powers_dbm[i]);
    let (y0, y1) = (magnitudes[i - 1], magnitudes[i]);
    Some(x0 + (target - y0) * (x1 - x0) / (y1 - y0))
}

/// Vertex of the parabola through the largest sample and its neighbours.
pub fn parabolic_peak(xs: &[f64], ys: &[f64]) -> Option<(f64, f64)> {
    let (i, _) = ys.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1))?;
    if i == 0 || i + 1 >= ys.len() {
        return Some((xs[i], ys[i]));
    }
    let (x0, x1, x2) = (xs[i - 1], xs[i], xs[i + 1]);
    let (y0, y1, y2) = (ys[i - 1], ys[i], ys[i + 1]);
    let d01 = (y1 - y0) / (x1 - x0);
    let d12 = (y2 - y1) / (x2 - x1);
    let a = (d12 - d01) / (x2 - x0);
    if a >= 0.0 {
        return Some((x1, y1));
    }
    let b = d01 - a * (x0 + x1);
    let x = -b / (2.0 * a);
    let y = y1 + (x - x1) * (d01 + a * (x - x0));
    Some((x, y))
}

/// Per-point comparison of PDE and coupled-mode `|S_{j1}|`.
#[derive(Debug, Clone, PartialEq)]
pub struct TcmComparison {
    /// `[|ΔS11|, |ΔS21|, |ΔS31|]` per point, in magnitudes.
    pub residuals: Vec<[f64; 3]>,
    pub max: [f64; 3],
    pub mean: [f64; 3],
    /// Whether `Γx` was fitted (otherwise `3z/(2L)`).
    pub fitted: bool,
    pub gamma_x: f64,
}

/// Compares each PDE point with its own coupled-mode prediction.
pub fn compare_to_pde(points: &[ScatterPoint], models: &[TcmParams<f64>], fitted: bool) -> Result<TcmComparison> {
    if points.len() != models.len() || points.is_empty() {
        return Err(ScatterError::Mismatch(format!(
            "{} PDE points against {} coupled-mode models",
            points.len(),
            models.len()
        )));
    }
    let residuals: Vec<[f64; 3]> = points
        .iter()
        .zip(models)
        .map(|(p, t)| {
            let pde = p.magnitudes();
            let model = [0, 1, 2].map(|m| t.element(p.omega_d, m).norm());
            [0, 1, 2].map(|i| (pde[i] - model[i]).abs())
        })
        .collect();
    let n = residuals.len() as f64;
    let max = [0, 1, 2].map(|i| residuals.iter().map(|r| r[i]).fold(0.0, f64::max));
    let mean = [0, 1, 2].map(|i| residuals.iter().map(|r| r[i]).sum::<f64>() / n);
    Ok(TcmComparison {
        residuals,
        max,
        mean,
        fitted,
        gamma_x: models[0].gamma_x,
    })
}

/// Coupled-mode model for a galvanic device at bias `i_b`, using the predicted
/// mode pair and `orientation` (see [`TcmParams::from_splitting`]).
pub fn tcm_for_bias(params: &JunctionParams<f64>, i_b: f64, orientation: i8) -> Result<TcmParams<f64>> {
    let split = spectrum::splitting(params, i_b, params.effective_damping(3))?;
    Ok(TcmParams::from_splitting(params, &split, orientation)?)
}

/// Train velocity for a galvanic device at bias `i_b`.
pub fn galvanic_velocity(params: &JunctionParams<f64>, i_b: f64) -> Result<f64> {
    Ok(fluxon::velocity_for_bias(i_b, params.length, params.fluxons, params.effective_damping(3))?.v)
}
