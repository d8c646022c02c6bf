//! Fixed-step time-domain solver for the driven, damped sine-Gordon ring.
//!
//! The ring is sampled on `N` uniform nodes. Second differences that cross the
//! seam between node `N−1` and node `0` add or subtract `2πn`, so the winding
//! number is part of the discretisation and cannot change during a run.
//! Waveguide ports sit on single nodes; the point coupling `δ(x − xⱼ)` becomes
//! a weight `1/Δx` on that node.
//!
//! Galvanic port at node `m`:
//! `φ_tt[m] += (z/Δx)(2V_in − φ_t[m])`, `V_out = φ_t[m] − V_in`.
//!
//! Capacitive port: the waveguide voltage `V` is an extra state with
//! `p_C(V − 2V_in) + (V_t − φ_tt) = 0`. Eliminating `V_t` from the node
//! equation leaves `φ_tt[m] += −(g_C p_C/Δx)(V − 2V_in)`, and `V_out = V − V_in`.

use std::io::{self, Write};

use num_complex::Complex64;
use thiserror::Error;

use crate::fluxon::{self, FluxonError, JunctionParams};
use crate::units;

/// `|φ_t|` above which a run is declared unstable.
pub const BLOW_UP: f64 = 1e3;
/// Default time step as a fraction of the grid spacing.
pub const DEFAULT_DT_FACTOR: f64 = 0.25;
/// Largest allowed `dt/Δx` (explicit-scheme stability margin).
pub const MAX_DT_FACTOR: f64 = 0.5;
/// Largest allowed `rate·dt` for the stiff point terms.
pub const MAX_STIFF_PRODUCT: f64 = 0.5;
const BLOW_UP_CHECK_EVERY: u64 = 64;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SgError {
    #[error("grid too coarse: {nodes} nodes for L = {length} (need at least {min})")]
    TooCoarse { nodes: usize, length: f64, min: usize },
    #[error("time step {dt} exceeds {max} = {factor}·Δx")]
    Cfl { dt: f64, max: f64, factor: f64 },
    #[error("explicit scheme too stiff: {term} rate·dt = {product} > {limit}")]
    Stiff { term: &'static str, product: f64, limit: f64 },
    #[error("invalid port configuration: {0}")]
    Port(String),
    #[error("drive refers to port {port} but only {ports} ports exist")]
    DrivePort { port: usize, ports: usize },
    #[error("invalid drive: {0}")]
    Drive(String),
    #[error("blow-up at t = {t}: |φ_t| = {value} at node {node}")]
    BlowUp { t: f64, node: usize, value: f64 },
    #[error("bias {0} exceeds the critical current of a fluxon-free ring")]
    Overcritical(f64),
    #[error("averaging window too short: half-window means {first} and {second} differ by more than 1%")]
    WindowTooShort { first: f64, second: f64 },
    #[error("no samples inside the averaging window")]
    EmptyWindow,
    #[error(transparent)]
    Fluxon(#[from] FluxonError),
}

pub type Result<T> = std::result::Result<T, SgError>;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PortKind {
    /// Direct connection with coupling strength `z = Z_LJJ/Z₀`.
    Galvanic { z: f64 },
    /// Connection through a coupling capacitor: `g_C = Z_LJJ/Z_C`, `p_C = Z_C/Z₀`.
    Capacitive { g_c: f64, p_c: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PortConfig {
    pub position: f64,
    pub kind: PortKind,
}

impl PortConfig {
    pub fn galvanic(position: f64, z: f64) -> Self {
        Self {
            position,
            kind: PortKind::Galvanic { z },
        }
    }

    /// Capacitive port for a coupling capacitance `c_c` in farads, with
    /// `Z_C = 1/(ω_p C_C)`.
    pub fn capacitive(position: f64, c_c: f64, params: &JunctionParams<f64>) -> Self {
        let z_c = 1.0 / (params.omega_p() * c_c);
        Self {
            position,
            kind: PortKind::Capacitive {
                g_c: params.z_ljj / z_c,
                p_c: z_c / params.z0,
            },
        }
    }

    /// Effective `z` of the port (`g_C·p_C = Z_LJJ/Z₀` for a capacitive port).
    pub fn coupling(&self) -> f64 {
        match self.kind {
            PortKind::Galvanic { z } => z,
            PortKind::Capacitive { g_c, p_c } => g_c * p_c,
        }
    }

    pub fn is_galvanic(&self) -> bool {
        matches!(self.kind, PortKind::Galvanic { .. })
    }
}

/// Ports at `0, L/m, 2L/m, …`.
pub fn symmetric_ports(length: f64, count: usize, kind: PortKind) -> Vec<PortConfig> {
    (0..count)
        .map(|j| PortConfig {
            position: length * j as f64 / count as f64,
            kind,
        })
        .collect()
}

/// Three galvanic ports at `0, L/3, 2L/3` with the device's `z`.
pub fn galvanic_triplet(params: &JunctionParams<f64>) -> Vec<PortConfig> {
    symmetric_ports(params.length, 3, PortKind::Galvanic { z: params.z })
}

/// Three capacitive ports with coupling capacitance `c_c` farads.
pub fn capacitive_triplet(params: &JunctionParams<f64>, c_c: f64) -> Vec<PortConfig> {
    let kind = PortConfig::capacitive(0.0, c_c, params).kind;
    symmetric_ports(params.length, 3, kind)
}

/// Sinusoidal input `V_in(t) = amplitude·cos(ω_d t)` on one port.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriveSpec {
    pub port: usize,
    pub amplitude: f64,
    pub omega_d: f64,
}

/// Discretised field: phase and phase velocity on every node plus one
/// waveguide voltage per port (unused for galvanic ports).
#[derive(Debug, Clone, PartialEq)]
pub struct FieldState {
    pub phi: Vec<f64>,
    pub phi_t: Vec<f64>,
    pub port_aux: Vec<f64>,
    pub t: f64,
    pub winding: i64,
}

impl FieldState {
    /// Winding recovered from the field itself: the sum of nearest-neighbour
    /// differences wrapped into `(−π, π]`, divided by `2π`.
    pub fn measured_winding(&self) -> f64 {
        let n = self.phi.len();
        let seam = std::f64::consts::TAU * self.winding as f64;
        let mut total = 0.0;
        for i in 0..n {
            let next = if i + 1 < n { self.phi[i + 1] } else { self.phi[0] + seam };
            total += wrap(next - self.phi[i]);
        }
        total / std::f64::consts::TAU
    }
}

fn wrap(d: f64) -> f64 {
    use std::f64::consts::{PI, TAU};
    let r = d - TAU * (d / TAU).round();
    if r <= -PI {
        r + TAU
    } else {
        r
    }
}

/// How the initial train velocity is chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InitialTrain {
    /// Velocity from the force balance with the galvanic drag included.
    FromBias,
    /// A prescribed velocity (useful when the ports exert no DC drag).
    Velocity(f64),
}

/// Driven sine-Gordon ring with its ports, bias and numerical grid.
#[derive(Debug, Clone, PartialEq)]
pub struct RingModel {
    pub params: JunctionParams<f64>,
    pub ports: Vec<PortConfig>,
    pub drives: Vec<DriveSpec>,
    pub nodes: usize,
    pub dx: f64,
    pub i_b: f64,
    port_nodes: Vec<usize>,
}

/// Values handed to an [`Observer`] after every step.
#[derive(Debug)]
pub struct Probe<'a> {
    pub step: u64,
    pub t: f64,
    /// `φ_t` at each port node (galvanic) or the waveguide voltage (capacitive).
    pub v_port: &'a [f64],
    pub v_in: &'a [f64],
    pub v_out: &'a [f64],
    /// Spatial mean of `φ_t`.
    pub mean_phi_t: f64,
}

pub trait Observer {
    fn observe(&mut self, probe: &Probe<'_>);
}

impl Observer for () {
    fn observe(&mut self, _: &Probe<'_>) {}
}

impl<F: FnMut(&Probe<'_>)> Observer for F {
    fn observe(&mut self, probe: &Probe<'_>) {
        self(probe)
    }
}

/// Stores every `stride`-th probe.
#[derive(Debug, Clone, Default)]
pub struct ProbeRecord {
    pub stride: u64,
    pub t: Vec<f64>,
    pub v_port: Vec<Vec<f64>>,
    pub v_out: Vec<Vec<f64>>,
    pub mean_phi_t: Vec<f64>,
}

impl ProbeRecord {
    pub fn new(stride: u64) -> Self {
        Self {
            stride: stride.max(1),
            ..Self::default()
        }
    }
}

impl Observer for ProbeRecord {
    fn observe(&mut self, p: &Probe<'_>) {
        if p.step % self.stride != 0 {
            return;
        }
        self.t.push(p.t);
        self.v_port.push(p.v_port.to_vec());
        self.v_out.push(p.v_out.to_vec());
        self.mean_phi_t.push(p.mean_phi_t);
    }
}

impl RingModel {
    /// Builds the model; `nodes` must give at least 20 nodes per `λ_J`.
    pub fn new(params: JunctionParams<f64>, ports: Vec<PortConfig>, nodes: usize, i_b: f64) -> Result<Self> {
        params.validate()?;
        let min = (20.0 * params.length).ceil() as usize;
        if nodes < min {
            return Err(SgError::TooCoarse {
                nodes,
                length: params.length,
                min,
            });
        }
        let dx = params.length / nodes as f64;
        let mut port_nodes = Vec::with_capacity(ports.len());
        for p in &ports {
            let valid = match p.kind {
                PortKind::Galvanic { z } => z > 0.0 && z.is_finite(),
                PortKind::Capacitive { g_c, p_c } => g_c > 0.0 && p_c > 0.0 && g_c.is_finite() && p_c.is_finite(),
            };
            if !valid {
                return Err(SgError::Port(format!("non-positive coupling {:?}", p.kind)));
            }
            let x = p.position.rem_euclid(params.length);
            let node = ((x / dx).round() as usize) % nodes;
            if port_nodes.contains(&node) {
                return Err(SgError::Port(format!("two ports share node {node}")));
            }
            port_nodes.push(node);
        }
        Ok(Self {
            params,
            ports,
            drives: Vec::new(),
            nodes,
            dx,
            i_b,
            port_nodes,
        })
    }

    /// Smallest node count that is a multiple of `multiple` and resolves `λ_J`
    /// by at least `per_lambda` nodes.
    pub fn node_count(length: f64, per_lambda: f64, multiple: usize) -> usize {
        let raw = (length * per_lambda).ceil() as usize;
        raw.div_ceil(multiple) * multiple
    }

    pub fn with_drives(mut self, drives: Vec<DriveSpec>) -> Result<Self> {
        for d in &drives {
            if d.port >= self.ports.len() {
                return Err(SgError::DrivePort {
                    port: d.port,
                    ports: self.ports.len(),
                });
            }
            if !(d.amplitude >= 0.0 && d.omega_d > 0.0 && d.amplitude.is_finite() && d.omega_d.is_finite()) {
                return Err(SgError::Drive(format!("{d:?}")));
            }
        }
        self.drives = drives;
        Ok(self)
    }

    pub fn port_node(&self, port: usize) -> usize {
        self.port_nodes[port]
    }

    pub fn default_dt(&self) -> f64 {
        DEFAULT_DT_FACTOR * self.dx
    }

    /// Uniform drag on the train: intrinsic `g` plus `z/L` per galvanic port.
    pub fn effective_damping(&self) -> f64 {
        self.params.g
            + self
                .ports
                .iter()
                .filter(|p| p.is_galvanic())
                .map(|p| p.coupling())
                .sum::<f64>()
                / self.params.length
    }

    pub fn v_in(&self, port: usize, t: f64) -> f64 {
        self.drives
            .iter()
            .filter(|d| d.port == port)
            .map(|d| d.amplitude * (d.omega_d * t).cos())
            .sum()
    }

    /// Samples the analytic train at `t = 0`.
    pub fn initialize(&self, start: InitialTrain) -> Result<FieldState> {
        let n = self.params.fluxons;
        let nodes = self.nodes;
        let ports = self.ports.len();
        if n == 0 {
            if self.i_b.abs() >= 1.0 {
                return Err(SgError::Overcritical(self.i_b));
            }
            return Ok(FieldState {
                phi: vec![self.i_b.asin(); nodes],
                phi_t: vec![0.0; nodes],
                port_aux: vec![0.0; ports],
                t: 0.0,
                winding: 0,
            });
        }
        let train = match start {
            InitialTrain::FromBias => {
                fluxon::velocity_for_bias(self.i_b, self.params.length, n, self.effective_damping())?
            }
            InitialTrain::Velocity(v) => {
                let (k, kc) = fluxon::solve_modulus_pair(self.params.length, n, v)?;
                fluxon::TrainState {
                    k,
                    kc,
                    v,
                    gamma_v: fluxon::lorentz_factor(v)?,
                    i_b: self.i_b,
                }
            }
        };
        let mut phi = Vec::with_capacity(nodes);
        let mut phi_t = Vec::with_capacity(nodes);
        for i in 0..nodes {
            let (p, _, pt) = fluxon::fluxon_profile_with_derivatives(i as f64 * self.dx, 0.0, &train)?;
            phi.push(p);
            phi_t.push(pt);
        }
        // coupling capacitors start uncharged: V_wg equals the junction voltage
        let port_aux = self
            .port_nodes
            .iter()
            .zip(&self.ports)
            .map(|(&m, p)| if p.is_galvanic() { 0.0 } else { phi_t[m] })
            .collect();
        Ok(FieldState {
            phi,
            phi_t,
            port_aux,
            t: 0.0,
            winding: n as i64,
        })
    }

    fn check_step(&self, dt: f64) -> Result<()> {
        let max = MAX_DT_FACTOR * self.dx;
        if !(dt > 0.0 && dt <= max * (1.0 + 1e-12)) {
            return Err(SgError::Cfl {
                dt,
                max,
                factor: MAX_DT_FACTOR,
            });
        }
        // the p term's fastest rate is 4p/Δx²; RK4 is stable to about 2.78 on the real axis
        let mut checks = vec![("g", self.params.g * dt), ("p", self.params.p * 4.0 / (self.dx * self.dx) * dt / 4.0)];
        for p in &self.ports {
            checks.push(("port", p.coupling() / self.dx * dt));
            if let PortKind::Capacitive { p_c, .. } = p.kind {
                checks.push(("p_C", p_c * dt));
            }
        }
        for (term, product) in checks {
            if product > MAX_STIFF_PRODUCT {
                return Err(SgError::Stiff {
                    term,
                    product,
                    limit: MAX_STIFF_PRODUCT,
                });
            }
        }
        Ok(())
    }

    /// Time derivative of the packed state `[φ | φ_t | V_aux]`.
    fn rhs_packed(&self, t: f64, y: &[f64], dy: &mut [f64], v_in: &mut [f64], winding: i64) {
        let n = self.nodes;
        let (phi, rest) = y.split_at(n);
        let (phi_t, aux) = rest.split_at(n);
        let (dphi, drest) = dy.split_at_mut(n);
        let (dphi_t, daux) = drest.split_at_mut(n);
        dphi.copy_from_slice(phi_t);

        let seam = std::f64::consts::TAU * winding as f64;
        let inv_dx2 = 1.0 / (self.dx * self.dx);
        let (g, p, i_b) = (self.params.g, self.params.p, self.i_b);
        let node = |i: usize, left: f64, right: f64| -> f64 {
            let lap = (right - 2.0 * phi[i] + left) * inv_dx2;
            lap - phi[i].sin() + i_b - g * phi_t[i]
        };
        dphi_t[0] = node(0, phi[n - 1] - seam, phi[1]);
        for i in 1..n - 1 {
            dphi_t[i] = node(i, phi[i - 1], phi[i + 1]);
        }
        dphi_t[n - 1] = node(n - 1, phi[n - 2], phi[0] + seam);
        if p != 0.0 {
            let c = p * inv_dx2;
            dphi_t[0] += c * (phi_t[n - 1] - 2.0 * phi_t[0] + phi_t[1]);
            for i in 1..n - 1 {
                dphi_t[i] += c * (phi_t[i - 1] - 2.0 * phi_t[i] + phi_t[i + 1]);
            }
            dphi_t[n - 1] += c * (phi_t[n - 2] - 2.0 * phi_t[n - 1] + phi_t[0]);
        }
        for (j, (port, &m)) in self.ports.iter().zip(&self.port_nodes).enumerate() {
            v_in[j] = self.v_in(j, t);
            match port.kind {
                PortKind::Galvanic { z } => {
                    dphi_t[m] += z / self.dx * (2.0 * v_in[j] - phi_t[m]);
                    daux[j] = 0.0;
                }
                PortKind::Capacitive { g_c, p_c } => {
                    let current = p_c * (aux[j] - 2.0 * v_in[j]);
                    dphi_t[m] -= g_c / self.dx * current;
                    daux[j] = dphi_t[m] - current;
                }
            }
        }
    }

    /// Right-hand side `(∂ₜφ, ∂ₜφ_t, ∂ₜV_aux)` at time `t`.
    pub fn rhs(&self, state: &FieldState, t: f64) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let y = pack(state);
        let mut dy = vec![0.0; y.len()];
        let mut v_in = vec![0.0; self.ports.len()];
        self.rhs_packed(t, &y, &mut dy, &mut v_in, state.winding);
        let aux = dy.split_off(2 * self.nodes);
        let dphi_t = dy.split_off(self.nodes);
        (dy, dphi_t, aux)
    }

    fn port_voltages(&self, y: &[f64], v_in: &[f64], v_port: &mut [f64], v_out: &mut [f64]) {
        let n = self.nodes;
        for (j, (port, &m)) in self.ports.iter().zip(&self.port_nodes).enumerate() {
            v_port[j] = if port.is_galvanic() { y[n + m] } else { y[2 * n + j] };
            v_out[j] = v_port[j] - v_in[j];
        }
    }

    /// Advances `state` by `round(duration/dt)` classical RK4 steps, calling
    /// `observer` after every step.
    pub fn evolve<O: Observer + ?Sized>(
        &self,
        state: &mut FieldState,
        duration: f64,
        dt: f64,
        observer: &mut O,
    ) -> Result<()> {
        self.check_step(dt)?;
        let steps = (duration / dt).round() as u64;
        let n = self.nodes;
        let ports = self.ports.len();
        let mut y = pack(state);
        let len = y.len();
        let mut k1 = vec![0.0; len];
        let mut k2 = vec![0.0; len];
        let mut k3 = vec![0.0; len];
        let mut k4 = vec![0.0; len];
        let mut tmp = vec![0.0; len];
        let mut v_in = vec![0.0; ports];
        let mut v_port = vec![0.0; ports];
        let mut v_out = vec![0.0; ports];
        let t0 = state.t;
        let w = state.winding;
        let half = 0.5 * dt;
        for step in 1..=steps {
            let t = t0 + (step - 1) as f64 * dt;
            self.rhs_packed(t, &y, &mut k1, &mut v_in, w);
            for i in 0..len {
                tmp[i] = y[i] + half * k1[i];
            }
            self.rhs_packed(t + half, &tmp, &mut k2, &mut v_in, w);
            for i in 0..len {
                tmp[i] = y[i] + half * k2[i];
            }
            self.rhs_packed(t + half, &tmp, &mut k3, &mut v_in, w);
            for i in 0..len {
                tmp[i] = y[i] + dt * k3[i];
            }
            self.rhs_packed(t + dt, &tmp, &mut k4, &mut v_in, w);
            let sixth = dt / 6.0;
            for i in 0..len {
                y[i] += sixth * (k1[i] + 2.0 * (k2[i] + k3[i]) + k4[i]);
            }
            let t_new = t0 + step as f64 * dt;
            if step % BLOW_UP_CHECK_EVERY == 1 || step == steps {
                if let Some((node, &value)) = y[n..2 * n]
                    .iter()
                    .enumerate()
                    .find(|(_, v)| !(v.abs() <= BLOW_UP))
                {
                    return Err(SgError::BlowUp { t: t_new, node, value });
                }
            }
            for (j, v) in v_in.iter_mut().enumerate() {
                *v = self.v_in(j, t_new);
            }
            self.port_voltages(&y, &v_in, &mut v_port, &mut v_out);
            let mean_phi_t = y[n..2 * n].iter().sum::<f64>() / n as f64;
            observer.observe(&Probe {
                step,
                t: t_new,
                v_port: &v_port,
                v_in: &v_in,
                v_out: &v_out,
                mean_phi_t,
            });
        }
        unpack(&y, state);
        state.t = t0 + steps as f64 * dt;
        Ok(())
    }

    /// `∫ ½φ_t² + ½φ_x² + (1 − cos φ) dx` with forward differences across cells.
    pub fn energy(&self, state: &FieldState) -> f64 {
        let n = self.nodes;
        let seam = std::f64::consts::TAU * state.winding as f64;
        let mut e = 0.0;
        for i in 0..n {
            let next = if i + 1 < n { state.phi[i + 1] } else { state.phi[0] + seam };
            let grad = (next - state.phi[i]) / self.dx;
            e += 0.5 * state.phi_t[i] * state.phi_t[i] + 0.5 * grad * grad + (1.0 - state.phi[i].cos());
        }
        e * self.dx
    }

    /// Writes `x,phi,phi_t` rows for debugging.
    pub fn write_snapshot<W: Write>(&self, state: &FieldState, mut out: W) -> io::Result<()> {
        writeln!(out, "# t={:.17e} winding={}", state.t, state.winding)?;
        writeln!(out, "x,phi,phi_t")?;
        for i in 0..self.nodes {
            writeln!(out, "{:.17e},{:.17e},{:.17e}", i as f64 * self.dx, state.phi[i], state.phi_t[i])?;
        }
        Ok(())
    }
}

fn pack(state: &FieldState) -> Vec<f64> {
    let mut y = Vec::with_capacity(2 * state.phi.len() + state.port_aux.len());
    y.extend_from_slice(&state.phi);
    y.extend_from_slice(&state.phi_t);
    y.extend_from_slice(&state.port_aux);
    y
}

fn unpack(y: &[f64], state: &mut FieldState) {
    let n = state.phi.len();
    state.phi.copy_from_slice(&y[..n]);
    state.phi_t.copy_from_slice(&y[n..2 * n]);
    state.port_aux.copy_from_slice(&y[2 * n..]);
}

/// Time average of the spatially averaged `φ_t` over `[t0, t1]`, in volts.
///
/// Fails when the two half-window averages differ by more than 1% of the
/// larger one (with an absolute floor of `1e-12` in dimensionless units).
pub fn measure_dc_voltage(record: &ProbeRecord, window: (f64, f64), f_p: f64) -> Result<f64> {
    let (t0, t1) = window;
    let mid = 0.5 * (t0 + t1);
    let (mut a, mut na, mut b, mut nb) = (0.0, 0usize, 0.0, 0usize);
    for (&t, &v) in record.t.iter().zip(&record.mean_phi_t) {
        if t < t0 || t > t1 {
            continue;
        }
        if t < mid {
            a += v;
            na += 1;
        } else {
            b += v;
            nb += 1;
        }
    }
    if na == 0 || nb == 0 {
        return Err(SgError::EmptyWindow);
    }
    let (a, b) = (a / na as f64, b / nb as f64);
    if (a - b).abs() > 0.01 * a.abs().max(b.abs()).max(1e-10) {
        return Err(SgError::WindowTooShort { first: a, second: b });
    }
    let mean = (a * na as f64 + b * nb as f64) / (na + nb) as f64;
    Ok(mean * units::voltage_scale(f_p))
}

/// Hann-windowed in-phase/quadrature projection at one frequency.
///
/// With `x(t) = Re(A e^{iωt})` sampled uniformly over `samples` points,
/// [`Demodulator::amplitude`] returns `A`.
#[derive(Debug, Clone)]
pub struct Demodulator {
    omega: f64,
    samples: u64,
    seen: u64,
    weight: f64,
    acc: Vec<Complex64>,
}

impl Demodulator {
    pub fn new(omega: f64, samples: u64, channels: usize) -> Self {
        Self {
            omega,
            samples: samples.max(2),
            seen: 0,
            weight: 0.0,
            acc: vec![Complex64::new(0.0, 0.0); channels],
        }
    }

    pub fn is_complete(&self) -> bool {
        self.seen >= self.samples
    }

    pub fn push(&mut self, t: f64, values: &[f64]) {
        if self.is_complete() {
            return;
        }
        let s = std::f64::consts::PI * (self.seen as f64 + 0.5) / self.samples as f64;
        let w = s.sin() * s.sin();
        let phase = Complex64::from_polar(w, -self.omega * t);
        for (a, &v) in self.acc.iter_mut().zip(values) {
            *a += phase * v;
        }
        self.weight += w;
        self.seen += 1;
    }

    pub fn amplitude(&self) -> Vec<Complex64> {
        self.acc.iter().map(|a| a * (2.0 / self.weight)).collect()
    }
}

/// Coupling of a single parallel LC node to its waveguide.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LcCoupling {
    Galvanic,
    /// Series coupling capacitance.
    Capacitive(f64),
}

/// Lumped parallel LC resonator on one waveguide: the one-node limit of the
/// ring with the same port equations. Used to test the port implementation
/// against the closed-form reflection coefficient.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LcNode {
    pub inductance: f64,
    pub capacitance: f64,
    pub z0: f64,
    pub coupling: LcCoupling,
}

impl LcNode {
    /// State `[Φ, Φ̇, V_wg]`.
    fn rhs(&self, y: &[f64; 3], v_in: f64) -> [f64; 3] {
        let (l, c, z0) = (self.inductance, self.capacitance, self.z0);
        match self.coupling {
            LcCoupling::Galvanic => {
                let acc = (-y[0] / l - (y[1] - 2.0 * v_in) / z0) / c;
                [y[1], acc, 0.0]
            }
            LcCoupling::Capacitive(c_c) => {
                let current = (y[2] - 2.0 * v_in) / z0;
                let acc = (-y[0] / l - current) / c;
                [y[1], acc, acc - current / c_c]
            }
        }
    }

    fn v_wg(&self, y: &[f64; 3]) -> f64 {
        match self.coupling {
            LcCoupling::Galvanic => y[1],
            LcCoupling::Capacitive(_) => y[2],
        }
    }

    /// Reflection coefficient measured by driving with `amplitude·cos(ωt)` for
    /// `transient` periods and demodulating `V_out` over the next `window` periods.
    pub fn reflection(&self, omega: f64, amplitude: f64, transient: u32, window: u32, steps_per_period: u32) -> Complex64 {
        let period = std::f64::consts::TAU / omega;
        let dt = period / steps_per_period as f64;
        let mut y = [0.0; 3];
        let total = (transient + window) as u64 * steps_per_period as u64;
        let start = transient as u64 * steps_per_period as u64;
        let mut demod = Demodulator::new(omega, total - start, 1);
        let drive = |t: f64| amplitude * (omega * t).cos();
        for step in 0..total {
            let t = step as f64 * dt;
            let k1 = self.rhs(&y, drive(t));
            let y2 = add(&y, &k1, 0.5 * dt);
            let k2 = self.rhs(&y2, drive(t + 0.5 * dt));
            let y3 = add(&y, &k2, 0.5 * dt);
            let k3 = self.rhs(&y3, drive(t + 0.5 * dt));
            let y4 = add(&y, &k3, dt);
            let k4 = self.rhs(&y4, drive(t + dt));
            for i in 0..3 {
                y[i] += dt / 6.0 * (k1[i] + 2.0 * (k2[i] + k3[i]) + k4[i]);
            }
            if step + 1 > start {
                let t1 = t + dt;
                demod.push(t1, &[self.v_wg(&y) - drive(t1)]);
            }
        }
        demod.amplitude()[0] / amplitude
    }
}

fn add(y: &[f64; 3], k: &[f64; 3], h: f64) -> [f64; 3] {
    [y[0] + h * k[0], y[1] + h * k[1], y[2] + h * k[2]]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scattering::lc_reflection_oracle;
    use std::f64::consts::{PI, TAU};

    fn bare(length: f64, n: u32, g: f64, p: f64) -> JunctionParams<f64> {
        JunctionParams::circulator().with_length(length).with_fluxons(n).with_losses(g, p)
    }

    #[test]
    fn vacuum_is_fixed_point() {
        let m = RingModel::new(bare(5.0, 0, 0.02, 0.0), vec![], 100, 0.0).unwrap();
        let s = m.initialize(InitialTrain::FromBias).unwrap();
        assert!(s.phi.iter().all(|&x| x == 0.0));
        let (a, b, _) = m.rhs(&s, 0.0);
        assert!(a.iter().chain(&b).all(|&x| x == 0.0));
    }

    #[test]
    fn uniform_pendulum_limit() {
        let i_b = 0.3;
        let m = RingModel::new(bare(5.0, 0, 0.0, 0.0), vec![], 100, i_b).unwrap();
        let s = FieldState {
            phi: vec![PI / 6.0; 100],
            phi_t: vec![0.0; 100],
            port_aux: vec![],
            t: 0.0,
            winding: 0,
        };
        let (_, acc, _) = m.rhs(&s, 0.0);
        for a in acc {
            assert!((a - (i_b - 0.5)).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_bad_grids_and_steps() {
        let p = bare(26.0, 8, 0.0, 0.0);
        assert!(matches!(RingModel::new(p, vec![], 100, 0.0), Err(SgError::TooCoarse { .. })));
        let ports = vec![PortConfig::galvanic(0.0, p.z), PortConfig::galvanic(26.0, p.z)];
        assert!(matches!(RingModel::new(p, ports, 522, 0.0), Err(SgError::Port(_))));
        let m = RingModel::new(p, galvanic_triplet(&p), 522, 0.0).unwrap();
        let mut s = m.initialize(InitialTrain::FromBias).unwrap();
        assert!(matches!(m.evolve(&mut s, 1.0, 0.6 * m.dx, &mut ()), Err(SgError::Cfl { .. })));
        let strong = vec![PortConfig::galvanic(0.0, 5.0)];
        let m = RingModel::new(p, strong, 522, 0.0).unwrap();
        let mut s = m.initialize(InitialTrain::FromBias).unwrap();
        assert!(matches!(m.evolve(&mut s, 1.0, m.default_dt(), &mut ()), Err(SgError::Stiff { .. })));
        let m = RingModel::new(p, galvanic_triplet(&p), 522, 0.0).unwrap();
        let bad = vec![DriveSpec { port: 3, amplitude: 1e-3, omega_d: 0.2 }];
        assert!(matches!(m.with_drives(bad), Err(SgError::DrivePort { .. })));
    }

    #[test]
    fn port_nodes_are_exact_thirds() {
        let p = JunctionParams::circulator();
        let nodes = RingModel::node_count(p.length, 20.0, 3);
        assert_eq!(nodes, 522);
        let m = RingModel::new(p, galvanic_triplet(&p), nodes, 0.0).unwrap();
        assert_eq!((m.port_node(0), m.port_node(1), m.port_node(2)), (0, 174, 348));
    }

    #[test]
    fn winding_of_initial_train() {
        let p = bare(15.0, 8, 0.02, 0.0);
        let m = RingModel::new(p, vec![], 300, -0.01).unwrap();
        let s = m.initialize(InitialTrain::FromBias).unwrap();
        assert_eq!(s.winding, 8);
        assert!((s.measured_winding() - 8.0).abs() < 1e-12);
    }

    #[test]
    fn blow_up_is_reported() {
        let p = bare(5.0, 0, 0.0, 0.0);
        let m = RingModel::new(p, vec![], 100, 0.0).unwrap();
        let mut s = m.initialize(InitialTrain::FromBias).unwrap();
        s.phi_t[3] = 5e3;
        assert!(matches!(m.evolve(&mut s, 10.0, m.default_dt(), &mut ()), Err(SgError::BlowUp { .. })));
    }

    #[test]
    fn plasma_dispersion() {
        let length = 20.0;
        let nodes = 400;
        let m = RingModel::new(bare(length, 0, 0.0, 0.0), vec![], nodes, 0.0).unwrap();
        let eps = 1e-6;
        let tau = 0.5;
        for mode in 1..=10 {
            let q = TAU * mode as f64 / length;
            let mut s = m.initialize(InitialTrain::FromBias).unwrap();
            for i in 0..nodes {
                s.phi[i] = eps * (q * i as f64 * m.dx).cos();
            }
            m.evolve(&mut s, tau, m.default_dt(), &mut ()).unwrap();
            let proj: f64 = (0..nodes).map(|i| s.phi[i] * (q * i as f64 * m.dx).cos()).sum::<f64>() * 2.0
                / nodes as f64;
            let omega = (proj / eps).acos() / tau;
            let expect = (1.0 + q * q).sqrt();
            assert!((omega * omega / (expect * expect) - 1.0).abs() < 0.01, "q={q}: {omega} vs {expect}");
        }
    }

    #[test]
    fn energy_conserved_without_loss() {
        let p = bare(15.0, 4, 0.0, 0.0);
        let m = RingModel::new(p, vec![], 300, 0.0).unwrap();
        let mut s = m.initialize(InitialTrain::Velocity(0.3)).unwrap();
        let e0 = m.energy(&s);
        m.evolve(&mut s, 1000.0, m.default_dt(), &mut ()).unwrap();
        let e1 = m.energy(&s);
        assert!(((e1 - e0) / e0).abs() < 1e-6, "{e0} -> {e1}");
        assert_eq!(s.winding, 4);
        assert!((s.measured_winding() - 4.0).abs() < 1e-9);
    }

    #[test]
    fn energy_decays_with_damping() {
        let p = bare(15.0, 4, 0.02, 0.0);
        let m = RingModel::new(p, vec![], 300, 0.0).unwrap();
        let mut s = m.initialize(InitialTrain::Velocity(0.3)).unwrap();
        let mut last = m.energy(&s);
        for _ in 0..20 {
            m.evolve(&mut s, 5.0, m.default_dt(), &mut ()).unwrap();
            let e = m.energy(&s);
            assert!(e < last);
            last = e;
        }
    }

    #[test]
    fn undriven_galvanic_port_damps() {
        let p = bare(15.0, 4, 0.0, 0.0);
        let port = vec![PortConfig::galvanic(0.0, p.z)];
        let m = RingModel::new(p, port, 300, 0.0).unwrap();
        let mut s = m.initialize(InitialTrain::Velocity(0.3)).unwrap();
        let e0 = m.energy(&s);
        m.evolve(&mut s, 100.0, m.default_dt(), &mut ()).unwrap();
        assert!(m.energy(&s) < e0 * (1.0 - 1e-4));
    }

    fn halving_difference(m: &RingModel, dt: f64) -> f64 {
        let s0 = m.initialize(InitialTrain::FromBias).unwrap();
        let mut a = s0.clone();
        let mut b = s0;
        m.evolve(&mut a, 100.0, dt, &mut ()).unwrap();
        m.evolve(&mut b, 100.0, 0.5 * dt, &mut ()).unwrap();
        a.phi
            .iter()
            .zip(&b.phi)
            .chain(a.phi_t.iter().zip(&b.phi_t))
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max)
    }

    #[test]
    fn step_halving() {
        let p = bare(15.0, 8, 0.02, 0.0);
        let m = RingModel::new(p, vec![], 300, -0.01).unwrap();
        let diff = halving_difference(&m, m.default_dt());
        assert!(diff < 1e-6, "{diff}");
    }

    #[test]
    fn step_halving_with_driven_ports() {
        // the point coupling kinks φ at the port node, so the same accuracy needs a finer step
        let p = bare(15.0, 8, 0.02, 0.0);
        let m = RingModel::new(p, galvanic_triplet(&p), 300, -0.01)
            .unwrap()
            .with_drives(vec![DriveSpec { port: 0, amplitude: 1e-2, omega_d: 0.4 }])
            .unwrap();
        let coarse = halving_difference(&m, m.default_dt());
        let fine = halving_difference(&m, m.default_dt() / 8.0);
        assert!(fine < 1e-6, "{fine}");
        // fourth order: three halvings shrink the difference by about 2^12
        assert!(coarse / fine > 1000.0, "{coarse} / {fine}");
    }

    #[test]
    fn travelling_train_keeps_its_shape() {
        let p = bare(15.0, 8, 0.02, 0.0);
        let m = RingModel::new(p, vec![], 600, -0.004).unwrap();
        let train = fluxon::velocity_for_bias(-0.004, 15.0, 8, 0.02).unwrap();
        let mut s = m.initialize(InitialTrain::FromBias).unwrap();
        m.evolve(&mut s, 500.0, m.default_dt(), &mut ()).unwrap();
        let mut worst = 0.0f64;
        for i in 0..m.nodes {
            let exact = fluxon::fluxon_profile(i as f64 * m.dx, s.t, &train).unwrap();
            worst = worst.max((s.phi[i] - exact).abs());
        }
        assert!(worst < 1e-3, "{worst}");
    }

    #[test]
    fn dc_voltage_matches_analytic() {
        let p = bare(15.0, 8, 0.02, 0.0);
        for i_b in [0.0, -0.002, -0.01] {
            let m = RingModel::new(p, vec![], 300, i_b).unwrap();
            let train = fluxon::velocity_for_bias(i_b, 15.0, 8, 0.02).unwrap();
            let mut s = m.initialize(InitialTrain::FromBias).unwrap();
            let mut rec = ProbeRecord::new(4);
            m.evolve(&mut s, 400.0, m.default_dt(), &mut rec).unwrap();
            let volts = measure_dc_voltage(&rec, (100.0, 400.0), p.f_p).unwrap();
            let expect = -fluxon::dc_voltage(15.0, 8, &train) * p.voltage_scale();
            if i_b == 0.0 {
                assert!(volts.abs() < 1e-9);
            } else {
                assert!((volts / expect - 1.0).abs() < 0.02, "{volts} vs {expect}");
            }
        }
    }

    #[test]
    fn demodulator_recovers_phasor() {
        let a = Complex64::new(0.3, -0.7);
        let omega = 0.9;
        let dt = 0.01;
        let samples = (40.0 * TAU / omega / dt) as u64;
        let mut d = Demodulator::new(omega, samples, 1);
        for i in 0..samples {
            let t = 3.0 + i as f64 * dt;
            let x = (a * Complex64::from_polar(1.0, omega * t)).re + 0.2 * (2.3 * t).cos() + 0.05;
            d.push(t, &[x]);
        }
        assert!((d.amplitude()[0] - a).norm() < 1e-4);
    }

    #[test]
    fn lc_node_matches_reflection_oracle() {
        let (l, c, z0) = (1.0, 1.0, 5.0);
        for omega in [0.5, 0.9, 1.0, 1.1, 1.6] {
            let node = LcNode { inductance: l, capacitance: c, z0, coupling: LcCoupling::Galvanic };
            let got = node.reflection(omega, 1e-3, 200, 40, 400);
            let want = lc_reflection_oracle(omega, l, c, None, z0);
            assert!((got - want).norm() < 1e-3, "ω={omega}: {got} vs {want}");
            let node = LcNode { coupling: LcCoupling::Capacitive(2.0), ..node };
            let got = node.reflection(omega, 1e-3, 200, 40, 400);
            let want = lc_reflection_oracle(omega, l, c, Some(2.0), z0);
            assert!((got - want).norm() < 1e-3, "ω={omega}: {got} vs {want}");
        }
    }
}
