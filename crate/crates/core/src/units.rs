//! Physical constants and unit conversions between the dimensionless junction
//! variables and SI quantities.

/// Magnetic flux quantum h/(2e) in webers (exact in the 2019 SI).
pub const FLUX_QUANTUM: f64 = 2.067_833_848_461_929e-15;

/// Voltage scale `Φ₀·f_p` that converts a dimensionless voltage `φ_t` to volts.
pub fn voltage_scale(f_p: f64) -> f64 {
    FLUX_QUANTUM * f_p
}

pub fn watts_to_dbm(p: f64) -> f64 {
    10.0 * (p / 1e-3).log10()
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    1e-3 * 10f64.powf(dbm / 10.0)
}

/// Input power `|Ṽ_in·Φ₀·f_p|²/Z₀` carried by a dimensionless drive amplitude.
pub fn drive_power(amplitude: f64, f_p: f64, z0: f64) -> f64 {
    let v = amplitude * voltage_scale(f_p);
    v * v / z0
}

/// Dimensionless drive amplitude delivering `dbm` of input power.
pub fn amplitude_for_power(dbm: f64, f_p: f64, z0: f64) -> f64 {
    (dbm_to_watts(dbm) * z0).sqrt() / voltage_scale(f_p)
}
