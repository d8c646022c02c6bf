//! Quick self-checks of the numerical kernels, run by `fluxcirc validate`.
//!
//! Every check compares two independent routes to the same number and takes
//! well under a second, so the whole set runs in a few seconds.

use std::f64::consts::FRAC_PI_2;

use fluxcirc_core::elliptic::{self, elliptic_k_e};
use fluxcirc_core::fluxon::{self, JunctionParams};
use fluxcirc_core::scattering::{self, lc_reflection_oracle};
use fluxcirc_core::sgpde::{LcCoupling, LcNode};
use fluxcirc_core::spectrum;
use fluxcirc_core::tcm::{self, TcmParams, PDE_ORIENTATION};

use crate::table::ResultTable;

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    /// Measured discrepancy.
    pub value: f64,
    pub tolerance: f64,
}

impl Check {
    pub fn passed(&self) -> bool {
        self.value <= self.tolerance
    }
}

fn check(name: &'static str, tolerance: f64, value: impl FnOnce() -> Option<f64>) -> Check {
    Check {
        name,
        value: value().filter(|v| !v.is_nan()).unwrap_or(f64::INFINITY),
        tolerance,
    }
}

pub fn run_checks() -> Vec<Check> {
    let circ = JunctionParams::<f64>::circulator();
    vec![
        check("legendre_relation", 1e-12, || {
            let k = 0.6;
            let (kk, e) = elliptic_k_e(k).ok()?;
            let (kp, ep) = elliptic_k_e(elliptic::complementary(k)).ok()?;
            Some((e * kp + ep * kk - kk * kp - FRAC_PI_2).abs())
        }),
        check("jacobi_identities", 1e-13, || {
            let mut worst: f64 = 0.0;
            for k in [0.1, 0.5, 0.9, 0.999] {
                for i in 0..20 {
                    let j = elliptic::jacobi_am_sn_cn_dn(0.37 * i as f64 - 2.0, k).ok()?;
                    worst = worst
                        .max((j.sn * j.sn + j.cn * j.cn - 1.0).abs())
                        .max((j.dn * j.dn + k * k * j.sn * j.sn - 1.0).abs());
                }
            }
            Some(worst)
        }),
        check("dc_voltage_two_routes", 1e-10, || {
            let t = fluxon::velocity_for_bias(0.01f64, 15.0, 4, 0.02).ok()?;
            let a = fluxon::dc_voltage(15.0, 4, &t);
            let b = fluxon::dc_voltage_from_bias(&t, 0.02).ok()?;
            Some((a / b - 1.0).abs())
        }),
        check("train_spacing", 1e-10, || {
            let t = fluxon::velocity_for_bias(0.005f64, 26.0, 8, 0.01).ok()?;
            Some((t.spacing().ok()? - 26.0 / 8.0).abs())
        }),
        check("lame_spectrum_vs_matrix", 1e-3, || {
            let k = fluxon::solve_modulus(15.0, 8, 0.0).ok()?;
            let w = spectrum::lame_matrix_oracle(k, 15.0, 8, 4096, 8).ok()?;
            let mut ana = (0..8)
                .map(|l| spectrum::mode_frequency_static(l, 8, k).map(|m| m.omega))
                .collect::<Result<Vec<_>, _>>()
                .ok()?;
            ana.sort_by(f64::total_cmp);
            Some(w[1..].iter().zip(&ana[1..]).map(|(a, b)| (a / b - 1.0).abs()).fold(0.0, f64::max))
        }),
        check("splitting_bias_reversal", 1e-10, || {
            let d = circ.effective_damping(3);
            let a = spectrum::splitting(&circ, 3e-4, d).ok()?;
            let b = spectrum::splitting(&circ, -3e-4, d).ok()?;
            Some((a.omega_plus - b.omega_minus).abs().max((a.omega_minus - b.omega_plus).abs()) / a.omega_plus)
        }),
        check("ideal_circulator", 1e-12, || {
            let d = tcm::design(tcm::gamma_x_from_junction(&circ), 0.0);
            let t = TcmParams::new(0.2, d.optimal_splitting, tcm::gamma_x_from_junction(&circ), 0.0).ok()?;
            let [r, a, b] = [0, 1, 2].map(|m| t.element(0.2, m).norm());
            Some(r + a.min(b) + (a.max(b) - 1.0).abs())
        }),
        check("operating_point_bias", 0.1, || {
            let op = scattering::predicted_operating_point(&circ, circ.effective_damping(3)).ok()?;
            Some((op.i_b / 3e-4 - 1.0).abs())
        }),
        check("operating_point_frequency", 0.01, || {
            let op = scattering::predicted_operating_point(&circ, circ.effective_damping(3)).ok()?;
            Some((op.omega_0 * circ.f_p / 7.53e9 - 1.0).abs())
        }),
        check("orientation_forward", 0.0, || {
            let m = scattering::tcm_for_bias(&circ, 3e-4, PDE_ORIENTATION).ok()?;
            let w = m.omega_0;
            Some(if m.element(w, 1).norm() > m.element(w, 2).norm() { 0.0 } else { 1.0 })
        }),
        check("lc_port_galvanic", 1e-3, || {
            let node = LcNode {
                inductance: 1.0,
                capacitance: 1.0,
                z0: 5.0,
                coupling: LcCoupling::Galvanic,
            };
            Some((node.reflection(0.9, 1e-3, 200, 40, 400) - lc_reflection_oracle(0.9, 1.0, 1.0, None, 5.0)).norm())
        }),
        check("lc_port_capacitive", 1e-3, || {
            let node = LcNode {
                inductance: 1.0,
                capacitance: 1.0,
                z0: 5.0,
                coupling: LcCoupling::Capacitive(2.0),
            };
            Some((node.reflection(1.1, 1e-3, 200, 40, 400) - lc_reflection_oracle(1.1, 1.0, 1.0, Some(2.0), 5.0)).norm())
        }),
    ]
}

pub fn table(checks: &[Check]) -> ResultTable {
    let mut t = ResultTable::new("validate", &["index", "value", "tolerance", "passed"]);
    for (i, c) in checks.iter().enumerate() {
        t.meta(&format!("check_{i}"), c.name);
        t.push(vec![i as f64, c.value, c.tolerance, if c.passed() { 1.0 } else { 0.0 }]);
    }
    t
}

pub fn report(checks: &[Check]) -> String {
    checks
        .iter()
        .map(|c| {
            format!(
                "{} {:<28} {:.3e} (tol {:.0e})\n",
                if c.passed() { "PASS" } else { "FAIL" },
                c.name,
                c.value,
                c.tolerance
            )
        })
        .collect()
}
