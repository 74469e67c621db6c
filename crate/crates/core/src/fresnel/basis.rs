//! Plane-wave polarization basis shared by the reflection solver and the
//! Green's function.
//!
//! With `k = (k∥ cosφ, k∥ sinφ, ±k_z)`:
//!
//! * `ê_s± = (sinφ, −cosφ, 0)`
//! * `ê_p± = −(±k_z cosφ, ±k_z sinφ, −k∥) / k0`
//!
//! `+` travels toward `+z` (away from the substrate), `−` toward it.
//! Every reflection coefficient in the crate is defined in this basis.

use nalgebra::Vector3;
use num_complex::Complex64;

use super::ModeCoords;

/// Propagation direction along `z`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    Up,
    Down,
}

impl Direction {
    fn sign(self) -> f64 {
        match self {
            Direction::Up => 1.0,
            Direction::Down => -1.0,
        }
    }
}

/// s-polarization vector; identical for both directions.
pub fn e_s(mode: &ModeCoords) -> Vector3<Complex64> {
    let (s, c) = mode.phi.sin_cos();
    Vector3::new(s.into(), (-c).into(), Complex64::new(0.0, 0.0))
}

pub fn e_p(mode: &ModeCoords, dir: Direction) -> Vector3<Complex64> {
    let (s, c) = mode.phi.sin_cos();
    let kz = mode.kappa_z() * dir.sign();
    Vector3::new(-kz * c, -kz * s, Complex64::new(mode.kappa(), 0.0))
}

/// Wavevector in units of `k0`.
pub fn wavevector(mode: &ModeCoords, dir: Direction) -> Vector3<Complex64> {
    let (s, c) = mode.phi.sin_cos();
    let k = mode.kappa();
    Vector3::new((k * c).into(), (k * s).into(), mode.kappa_z() * dir.sign())
}

/// `Z0·H = κ × E` for a vacuum plane wave.
pub fn magnetic(mode: &ModeCoords, dir: Direction, e: &Vector3<Complex64>) -> Vector3<Complex64> {
    wavevector(mode, dir).cross(e)
}
