//! Experiment runners. Each turns a configuration into one or more result tables.

use std::f64::consts::TAU;

use fluxcirc_core::fluxon::{self, IvBranch, JunctionParams};
use fluxcirc_core::scattering::{
    self, Device, Numerics, ScatterPoint, DEFAULT_AMPLITUDE,
};
use fluxcirc_core::spectrum;
use fluxcirc_core::tcm::{TcmParams, PDE_ORIENTATION};
use fluxcirc_core::units;

use crate::config::{ExperimentConfig, ExperimentKind, Grid};
use crate::table::ResultTable;
use crate::validate;

/// Drive frequency of the circulator experiments, in GHz.
pub const DEFAULT_FREQUENCY_GHZ: f64 = 7.53;
/// Operating bias of the circulator experiments.
pub const DEFAULT_BIAS: f64 = 3e-4;

/// Whole-run failure. Point failures inside a sweep are collected in
/// [`Outcome::failures`] instead, so the finished points are still written.
#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("configuration: {0}")]
    Config(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl From<scattering::ScatterError> for RunError {
    fn from(e: scattering::ScatterError) -> Self {
        match e {
            scattering::ScatterError::Grid(m) => RunError::Config(m),
            e => RunError::Numerical(e.to_string()),
        }
    }
}

#[derive(Debug, Default)]
pub struct Outcome {
    pub tables: Vec<ResultTable>,
    pub failures: Vec<String>,
}

impl Outcome {
    fn single(table: ResultTable) -> Self {
        Self {
            tables: vec![table],
            failures: Vec::new(),
        }
    }
}

pub fn run(cfg: &ExperimentConfig, workers: Option<usize>) -> Result<Outcome, RunError> {
    let ctx = Context::new(cfg, workers);
    match cfg.experiment.name {
        ExperimentKind::Iv => ctx.iv(),
        ExperimentKind::Spectrum => ctx.spectrum(),
        ExperimentKind::Splitting => ctx.splitting(),
        ExperimentKind::BiasSweep => ctx.bias_sweep(),
        ExperimentKind::FreqSweep => ctx.freq_sweep(),
        ExperimentKind::LossG => ctx.loss_g(),
        ExperimentKind::LossP => ctx.loss_p(),
        ExperimentKind::Power => ctx.power(),
        ExperimentKind::FluxonSweep => ctx.fluxon_sweep(),
        ExperimentKind::CouplingCompare => ctx.coupling_compare(),
        ExperimentKind::Validate => Ok(Outcome::single(validate::table(&validate::run_checks()))),
    }
}

struct Context<'a> {
    cfg: &'a ExperimentConfig,
    params: JunctionParams<f64>,
    numerics: Numerics,
    workers: Option<usize>,
}

const SCATTER_COLUMNS: [&str; 14] = [
    "s11_mag",
    "s21_mag",
    "s31_mag",
    "s11_phase",
    "s21_phase",
    "s31_phase",
    "v_dc_volts",
    "velocity",
    "p_in_watts",
    "p_diss_watts",
    "total_power",
    "sideband_power",
    "window_mismatch",
    "converged",
];

fn scatter_values(p: &ScatterPoint) -> Vec<f64> {
    let mut v: Vec<f64> = p.s.iter().map(|s| s.norm()).collect();
    v.extend(p.s.iter().map(|s| s.arg()));
    v.extend([
        p.v_dc,
        p.velocity,
        p.p_in,
        p.p_diss,
        p.total_power(),
        p.sideband_power,
        p.window_mismatch,
        if p.converged { 1.0 } else { 0.0 },
    ]);
    v
}

fn columns<'c>(lead: &[&'c str], tail: &[&'c str]) -> Vec<&'c str> {
    lead.iter().chain(SCATTER_COLUMNS.iter()).chain(tail).copied().collect()
}

fn tcm_values(model: &TcmParams<f64>, omega: f64) -> [f64; 3] {
    [0, 1, 2].map(|m| model.element(omega, m).norm())
}

impl<'a> Context<'a> {
    fn new(cfg: &'a ExperimentConfig, workers: Option<usize>) -> Self {
        let workers = workers.or(match cfg.numerics.workers {
            0 => None,
            w => Some(w),
        });
        Self {
            cfg,
            params: cfg.device.params(),
            numerics: cfg.numerics.numerics(),
            workers,
        }
    }

    fn table(&self, name: &str, cols: &[&str]) -> ResultTable {
        let mut t = ResultTable::new(name, cols);
        t.meta("experiment", self.cfg.experiment.name.as_str());
        t
    }

    fn grid(&self, g: &Option<Grid>, default: Grid) -> Vec<f64> {
        g.clone().unwrap_or(default).values()
    }

    fn omega_from_ghz(&self, ghz: f64) -> f64 {
        ghz * 1e9 / self.params.f_p
    }

    fn ghz(&self, omega: f64) -> f64 {
        omega * self.params.f_p / 1e9
    }

    fn bias(&self) -> f64 {
        self.cfg.experiment.bias.unwrap_or(DEFAULT_BIAS)
    }

    fn amplitude(&self) -> f64 {
        self.cfg.experiment.amplitude.unwrap_or(DEFAULT_AMPLITUDE)
    }

    fn drive_omega(&self) -> f64 {
        self.omega_from_ghz(self.cfg.experiment.frequency_ghz.unwrap_or(DEFAULT_FREQUENCY_GHZ))
    }

    /// Uniform drag on the train for the analytic experiments.
    fn damping(&self, params: &JunctionParams<f64>) -> f64 {
        if self.cfg.experiment.port_drag.unwrap_or(false) {
            params.effective_damping(3)
        } else {
            params.g
        }
    }

    fn check_params(&self) -> Result<(), RunError> {
        self.params
            .validate()
            .map_err(|e| RunError::Config(e.to_string()))
    }

    fn iv(&self) -> Result<Outcome, RunError> {
        self.check_params()?;
        let counts = self.cfg.experiment.fluxon_counts.clone().unwrap_or(vec![2, 4, 6, 8]);
        let biases = self.grid(
            &self.cfg.experiment.bias_grid,
            Grid::Range {
                start: 0.0,
                stop: 0.1,
                count: 101,
            },
        );
        let mut t = self.table(
            "iv",
            &["n", "i_b", "velocity", "v_dc", "v_dc_volts", "asymptote", "branch"],
        );
        let l = self.params.length;
        let scale = self.params.voltage_scale();
        for &n in &counts {
            let p = self.params.with_fluxons(n);
            let damping = self.damping(&p);
            if !(damping > 0.0) && biases.iter().any(|&b| b != 0.0) {
                return Err(RunError::Config("the I-V curve needs g > 0 or port_drag = true".into()));
            }
            for pt in fluxon::iv_curve(l, n, damping, &biases) {
                // the mean voltage is minus the train-frame value
                let v = -pt.v_dc;
                let branch = match pt.branch {
                    IvBranch::FluxFlow => 0.0,
                    IvBranch::Pinned => 1.0,
                    IvBranch::Unresolved => 2.0,
                };
                t.push(vec![
                    n as f64,
                    pt.i_b,
                    pt.velocity,
                    v,
                    v * scale,
                    TAU * n as f64 / l,
                    branch,
                ]);
            }
        }
        t.meta("branch_codes", "0 flux-flow, 1 pinned, 2 unresolved");
        Ok(Outcome::single(t))
    }

    fn spectrum(&self) -> Result<Outcome, RunError> {
        self.check_params()?;
        let counts = self
            .cfg
            .experiment
            .fluxon_counts
            .clone()
            .unwrap_or((2..=16).collect());
        let l = self.params.length;
        let mut t = self.table(
            "spectrum",
            &[
                "n",
                "k",
                "omega_1",
                "omega_n_minus_1",
                "omega_2",
                "omega_n_minus_2",
                "asymptote_1",
                "asymptote_2",
            ],
        );
        let mut out = Outcome::default();
        for &n in &counts {
            let k = match fluxon::solve_modulus(l, n, 0.0) {
                Ok(k) => k,
                Err(e) => {
                    out.failures.push(format!("n = {n}: {e}"));
                    continue;
                }
            };
            let mode = |ell: i64| -> f64 {
                if ell < 1 || ell > n as i64 {
                    return f64::NAN;
                }
                spectrum::mode_frequency_static(ell as u32, n, k)
                    .map(|m| m.omega_lab)
                    .unwrap_or(f64::NAN)
            };
            let n_i = n as i64;
            t.push(vec![
                n as f64,
                k,
                mode(1),
                mode(n_i - 1),
                mode(2),
                mode(n_i - 2),
                TAU / l,
                2.0 * TAU / l,
            ]);
        }
        out.tables.push(t);
        Ok(out)
    }

    fn splitting(&self) -> Result<Outcome, RunError> {
        self.check_params()?;
        let biases = self.grid(
            &self.cfg.experiment.bias_grid,
            Grid::Range {
                start: 0.0,
                stop: 0.01,
                count: 51,
            },
        );
        let damping = self.damping(&self.params);
        let mut t = self.table(
            "splitting",
            &[
                "i_b",
                "velocity",
                "omega_minus",
                "omega_plus",
                "delta_omega",
                "f_minus_ghz",
                "f_plus_ghz",
            ],
        );
        let mut out = Outcome::default();
        for &b in &biases {
            match spectrum::splitting(&self.params, b, damping) {
                Ok(s) => t.push(vec![
                    b,
                    s.train.v,
                    s.omega_minus,
                    s.omega_plus,
                    s.delta_omega,
                    self.ghz(s.omega_minus),
                    self.ghz(s.omega_plus),
                ]),
                Err(e) => out.failures.push(format!("i_b = {b}: {e}")),
            }
        }
        t.meta("damping", damping);
        out.tables.push(t);
        Ok(out)
    }

    fn bias_sweep(&self) -> Result<Outcome, RunError> {
        self.check_params()?;
        let biases = self.grid(
            &self.cfg.experiment.bias_grid,
            Grid::Range {
                start: 0.0,
                stop: 6e-4,
                count: 13,
            },
        );
        let omega = self.drive_omega();
        let device = Device::galvanic(self.params, 0.0);
        let results = scattering::bias_sweep(&device, &biases, omega, self.amplitude(), &self.numerics, self.workers)?;
        let mut t = self.table("bias_sweep", &columns(&["i_b"], &["tcm_s11", "tcm_s21", "tcm_s31"]));
        t.meta("omega_d", omega);
        t.meta("frequency_ghz", self.ghz(omega));
        let mut out = Outcome::default();
        let (mut xs, mut s21) = (Vec::new(), Vec::new());
        for (&b, r) in biases.iter().zip(results) {
            match r {
                Ok(p) => {
                    let model = scattering::tcm_for_bias(&self.params, b, PDE_ORIENTATION)
                        .map(|m| tcm_values(&m, omega))
                        .unwrap_or([f64::NAN; 3]);
                    let mut row = vec![b];
                    row.extend(scatter_values(&p));
                    row.extend(model);
                    t.push(row);
                    xs.push(b);
                    s21.push(p.s[1].norm());
                }
                Err(e) => out.failures.push(format!("i_b = {b}: {e}")),
            }
        }
        if let Some((b, s)) = scattering::parabolic_peak(&xs, &s21) {
            t.meta("peak_bias", b);
            t.meta("peak_s21", s);
        }
        out.tables.push(t);
        Ok(out)
    }

    fn frequency_grid(&self) -> Vec<f64> {
        self.grid(
            &self.cfg.experiment.frequency_ghz_grid,
            Grid::Range {
                start: 7.2,
                stop: 7.85,
                count: 27,
            },
        )
    }

    fn freq_sweep(&self) -> Result<Outcome, RunError> {
        self.check_params()?;
        let ghz = self.frequency_grid();
        let omegas: Vec<f64> = ghz.iter().map(|&f| self.omega_from_ghz(f)).collect();
        let b = self.bias();
        let amp = self.amplitude();
        let overlay = self.cfg.experiment.overlay_fluxons.clone().unwrap_or(vec![7, 9]);
        let mut out = Outcome::default();

        let main = scattering::frequency_sweep(&Device::galvanic(self.params, b), &omegas, amp, &self.numerics, self.workers)?;
        let overlays: Vec<Vec<Result<ScatterPoint, scattering::ScatterError>>> = overlay
            .iter()
            .map(|&n| {
                scattering::frequency_sweep(
                    &Device::galvanic(self.params.with_fluxons(n), b),
                    &omegas,
                    amp,
                    &self.numerics,
                    self.workers,
                )
            })
            .collect::<Result<_, _>>()?;
        let model = scattering::tcm_for_bias(&self.params, b, PDE_ORIENTATION).ok();

        let overlay_names: Vec<String> = overlay.iter().map(|n| format!("s21_mag_n{n}")).collect();
        let mut tail: Vec<&str> = vec!["tcm_s11", "tcm_s21", "tcm_s31"];
        tail.extend(overlay_names.iter().map(String::as_str));
        let mut t = self.table("freq_sweep", &columns(&["frequency_ghz", "omega_d"], &tail));
        t.meta("i_b", b);
        t.meta("fluxons", self.params.fluxons);
        let (mut xs, mut s21) = (Vec::new(), Vec::new());
        for (i, r) in main.into_iter().enumerate() {
            let p = match r {
                Ok(p) => p,
                Err(e) => {
                    out.failures.push(format!("f = {} GHz: {e}", ghz[i]));
                    continue;
                }
            };
            let mut row = vec![ghz[i], omegas[i]];
            row.extend(scatter_values(&p));
            row.extend(model.map(|m| tcm_values(&m, omegas[i])).unwrap_or([f64::NAN; 3]));
            for (n, o) in overlay.iter().zip(&overlays) {
                match &o[i] {
                    Ok(q) => row.push(q.s[1].norm()),
                    Err(e) => {
                        out.failures.push(format!("n = {n}, f = {} GHz: {e}", ghz[i]));
                        row.push(f64::NAN);
                    }
                }
            }
            t.push(row);
            xs.push(ghz[i]);
            s21.push(p.s[1].norm());
        }
        if let Some(w) = scattering::fwhm(&xs, &s21) {
            t.meta("s21_fwhm_mhz", w * 1e3);
        }
        if let Some(m) = model {
            t.meta("tcm_omega_0", m.omega_0);
            t.meta("tcm_delta_omega", m.delta_omega);
            t.meta("tcm_gamma_x", m.gamma_x);
        }
        out.tables.push(t);
        Ok(out)
    }

    fn loss_g(&self) -> Result<Outcome, RunError> {
        self.check_params()?;
        let gs = self.grid(
            &self.cfg.experiment.g_grid,
            Grid::List(vec![0.0, 0.001, 0.002, 0.004, 0.006, 0.008, 0.01]),
        );
        let results = scattering::loss_sweep_g(&self.params, &gs, self.amplitude(), &self.numerics, self.workers)?;
        let mut t = self.table(
            "loss_g",
            &columns(&["g", "i_b", "frequency_ghz"], &["tcm_s11", "tcm_s21", "tcm_s31"]),
        );
        let mut out = Outcome::default();
        for (&g, r) in gs.iter().zip(results) {
            match r {
                Ok((op, p)) => {
                    let params = self.params.with_losses(g, self.params.p);
                    let mut row = vec![g, op.i_b, self.ghz(op.omega_0)];
                    row.extend(scatter_values(&p));
                    row.extend(
                        scattering::tcm_for_bias(&params, op.i_b, PDE_ORIENTATION)
                            .map(|m| tcm_values(&m, op.omega_0))
                            .unwrap_or([f64::NAN; 3]),
                    );
                    t.push(row);
                }
                Err(e) => out.failures.push(format!("g = {g}: {e}")),
            }
        }
        out.tables.push(t);
        Ok(out)
    }

    fn loss_p(&self) -> Result<Outcome, RunError> {
        self.check_params()?;
        let ps = self.grid(
            &self.cfg.experiment.p_grid,
            Grid::List(vec![0.0, 0.001, 0.002, 0.005, 0.01, 0.02]),
        );
        let omega = self.drive_omega();
        let device = Device::galvanic(self.params, self.bias());
        let results = scattering::loss_sweep_p(&device, &ps, omega, self.amplitude(), &self.numerics, self.workers)?;
        let mut t = self.table("loss_p", &columns(&["p"], &[]));
        t.meta("i_b", self.bias());
        t.meta("omega_d", omega);
        let mut out = Outcome::default();
        for (&p, r) in ps.iter().zip(results) {
            match r {
                Ok(pt) => {
                    let mut row = vec![p];
                    row.extend(scatter_values(&pt));
                    t.push(row);
                }
                Err(e) => out.failures.push(format!("p = {p}: {e}")),
            }
        }
        out.tables.push(t);
        Ok(out)
    }

    fn power(&self) -> Result<Outcome, RunError> {
        self.check_params()?;
        let dbm = self.grid(
            &self.cfg.experiment.power_dbm_grid,
            Grid::Range {
                start: -120.0,
                stop: -80.0,
                count: 21,
            },
        );
        let amps: Vec<f64> = dbm
            .iter()
            .map(|&d| units::amplitude_for_power(d, self.params.f_p, self.params.z0))
            .collect();
        let omega = self.drive_omega();
        let device = Device::galvanic(self.params, self.bias());
        let results = scattering::power_sweep(&device, omega, &amps, &self.numerics, self.workers)?;
        let mut t = self.table("power", &columns(&["power_dbm", "amplitude"], &[]));
        t.meta("i_b", self.bias());
        t.meta("omega_d", omega);
        let mut out = Outcome::default();
        let (mut xs, mut s21) = (Vec::new(), Vec::new());
        for ((&d, &a), r) in dbm.iter().zip(&amps).zip(results) {
            match r {
                Ok(p) => {
                    let mut row = vec![d, a];
                    row.extend(scatter_values(&p));
                    t.push(row);
                    xs.push(d);
                    s21.push(p.s[1].norm());
                }
                Err(e) => out.failures.push(format!("P = {d} dBm: {e}")),
            }
        }
        match scattering::compression_point(&xs, &s21) {
            Some(p) => t.meta("p1db_dbm", p),
            None => t.meta("p1db_dbm", "not reached"),
        }
        out.tables.push(t);
        Ok(out)
    }

    fn fluxon_sweep(&self) -> Result<Outcome, RunError> {
        self.check_params()?;
        let counts = self.cfg.experiment.fluxon_counts.clone().unwrap_or((4..=15).collect());
        let results = scattering::fluxon_sweep(&self.params, &counts, self.amplitude(), &self.numerics, self.workers)?;
        let mut t = self.table(
            "fluxon_sweep",
            &columns(&["n", "i_b", "frequency_ghz", "delta_omega"], &[]),
        );
        let mut out = Outcome::default();
        for (&n, r) in counts.iter().zip(results) {
            match r {
                Ok((op, p)) => {
                    let mut row = vec![n as f64, op.i_b, self.ghz(op.omega_0), op.delta_omega];
                    row.extend(scatter_values(&p));
                    t.push(row);
                }
                Err(e) => out.failures.push(format!("n = {n}: {e}")),
            }
        }
        out.tables.push(t);
        Ok(out)
    }

    fn coupling_compare(&self) -> Result<Outcome, RunError> {
        self.check_params()?;
        let detunings = self.grid(
            &self.cfg.experiment.detuning_grid,
            Grid::Range {
                start: -0.03,
                stop: 0.02,
                count: 21,
            },
        );
        let caps_ff = self
            .cfg
            .experiment
            .coupling_capacitance_ff
            .clone()
            .unwrap_or(vec![237.0, 474.0]);
        let caps: Vec<f64> = caps_ff.iter().map(|c| c * 1e-15).collect();
        let curves = scattering::coupling_comparison(
            &self.params,
            &caps,
            &detunings,
            self.amplitude(),
            &self.numerics,
            self.workers,
        )?;
        let mut t = self.table(
            "coupling_compare",
            &columns(&["coupling_ff", "detuning", "frequency_ghz", "i_b", "start_velocity"], &[]),
        );
        t.meta("coupling_codes", "coupling_ff = 0 marks the galvanic ring");
        t.meta("reference_frequency_ghz", self.ghz(curves[0].omega_ref));
        let mut out = Outcome::default();
        for curve in &curves {
            let c_ff = curve.c_c.map_or(0.0, |c| c * 1e15);
            for (&d, r) in detunings.iter().zip(&curve.points) {
                match r {
                    Ok(p) => {
                        let mut row = vec![c_ff, d, self.ghz(p.omega_d), curve.i_b, curve.velocity];
                        row.extend(scatter_values(p));
                        t.push(row);
                    }
                    Err(e) => out.failures.push(format!("C_C = {c_ff} fF, detuning {d}: {e}")),
                }
            }
        }
        out.tables.push(t);
        Ok(out)
    }
}
