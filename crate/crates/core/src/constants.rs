//! Physical constants (CODATA 2018, SI).

pub const C_LIGHT: f64 = 299_792_458.0;
pub const HBAR: f64 = 1.054_571_817e-34;
pub const K_B: f64 = 1.380_649e-23;
pub const EPS_0: f64 = 8.854_187_812_8e-12;
pub const MU_0: f64 = 1.256_637_062_12e-6;
pub const E_CHARGE: f64 = 1.602_176_634e-19;
pub const M_ELECTRON: f64 = 9.109_383_701_5e-31;

/// Standard gravity, m/s².
pub const G_STANDARD: f64 = 9.81;
/// Pa per torr.
pub const PA_PER_TORR: f64 = 133.322;
