//! Spectral densities of power, force and torque on the particle, their
//! photon-resolved decomposition, and frequency-integrated totals.
//!
//! Every density is `prefactor(ω) × kernel(ω)`. The kernel holds the
//! `(k∥, φ)` integrals and depends only on the substrate, `d` and `ω`;
//! the prefactor carries `Im α` and the thermal weights.

use std::f64::consts::PI;
use std::io::Write;
use std::path::Path;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::constants::{C_LIGHT, EPS_0, HBAR, K_B, MU_0};
use crate::error::{Error, Result};
use crate::fresnel::{ModeCoords, ReflectionMatrix, Reflector};
use crate::greens::{greens_reflected_integrand, vacuum_ldos_factor};
use crate::materials::DipoleResponse;
use crate::quadrature::{integrate_kphi_with, integrate_omega_with, Control, QuadConfig};

/// Particle and environment temperatures, K.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThermalState {
    pub t_p: f64,
    pub t_e: f64,
    /// Keep the zero-point halves of `Θ` in the `F_z` prefactor. Off by
    /// default: the zero-point part of the total normal force is not a
    /// window integral.
    #[serde(default)]
    pub fz_zero_point: bool,
}

impl ThermalState {
    pub fn new(t_p: f64, t_e: f64) -> Self {
        ThermalState {
            t_p,
            t_e,
            fz_zero_point: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (v, name) in [(self.t_p, "t_p"), (self.t_e, "t_e")] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::config(format!("thermal.{name}"), "must be finite and >= 0"));
            }
        }
        Ok(())
    }
}

/// Mean energy of a quantum oscillator, zero point included, J.
pub fn theta(omega: f64, t: f64) -> f64 {
    0.5 * HBAR * omega + theta_thermal(omega, t)
}

/// Bose part of [`theta`] alone.
pub fn theta_thermal(omega: f64, t: f64) -> f64 {
    if t <= 0.0 {
        return 0.0;
    }
    let x = HBAR * omega / (K_B * t);
    if x > 700.0 {
        return HBAR * omega * (-x).exp();
    }
    HBAR * omega / x.exp_m1()
}

/// Number of kernel components.
pub const KERNEL_LEN: usize = 15;
/// The first nine components drive `(k∥, φ)` refinement; the rest are
/// branch splits. Tolerances are shared between components of equal units.
pub const KERNEL_CONTROL: Control<KERNEL_LEN> = Control {
    controlled: 9,
    groups: [0, 1, 1, 1, 2, 2, 2, 2, 0, 0, 0, 1, 1, 2, 2],
};

/// Kernel component indices.
pub mod k {
    pub const P: usize = 0;
    pub const FX: usize = 1;
    pub const FY: usize = 2;
    pub const FZ: usize = 3;
    pub const MX: usize = 4;
    pub const MY: usize = 5;
    pub const MZ: usize = 6;
    /// `Re ∫ (k∥/4π²)(G_yz − G_zy)`
    pub const G_YZ_ANTI: usize = 7;
    /// `Im ∫ (k∥/4π²)(G_yy + G_zz)`
    pub const G_YY_ZZ: usize = 8;
    /// `φ ∈ [0, π)` then `[π, 2π)` halves of P, F_y and M_x.
    pub const P_RED: usize = 9;
    pub const P_BLUE: usize = 10;
    pub const FY_RED: usize = 11;
    pub const FY_BLUE: usize = 12;
    pub const MX_RED: usize = 13;
    pub const MX_BLUE: usize = 14;
}

/// `(k∥, φ)` integrals at one frequency.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Kernel {
    pub omega: f64,
    pub value: [f64; KERNEL_LEN],
    pub error: [f64; KERNEL_LEN],
    pub evaluations: usize,
}

/// Trapezoid weight of the red-shifted half at `φ`.
fn red_weight(phi: f64) -> f64 {
    let eps = 1e-12;
    if phi < eps || (phi - PI).abs() < eps || phi > std::f64::consts::TAU - eps {
        0.5
    } else if phi < PI {
        1.0
    } else {
        0.0
    }
}

/// Kernel integrands at one mode (measure `dk∥ dφ`).
pub fn kernel_integrand(r: &ReflectionMatrix, m: &ModeCoords, d: f64) -> Result<[f64; KERNEL_LEN]> {
    let g = greens_reflected_integrand(r, m, d)?;
    let i = Complex64::i();
    let e = (i * 2.0 * m.k_z * d).exp();
    let kp = m.k_par;
    let k0 = m.k0;
    let kappa = m.kappa();
    let b = r.r_ss + r.r_pp * (2.0 * kappa * kappa - 1.0);
    let (s, c) = m.phi.sin_cos();
    let pi2 = 8.0 * PI * PI;

    let p = (i * kp * e * b / (pi2 * m.k_z)).im;
    let fz = (i * kp * e * b / pi2).im;
    let anti = ((r.r_sp - r.r_ps) * e / m.k_z).im;
    let pp = (r.r_pp * e / k0).im;
    let lateral = kp * kp / (pi2 * k0);
    let mx = lateral * (c * anti + 2.0 * s * pp);
    let my = lateral * (s * anti - 2.0 * c * pp);
    let mz = kp / (pi2 * k0) * ((r.r_sp + r.r_ps) * e).im;
    let w = kp / (4.0 * PI * PI);
    let g7 = w * (g[(1, 2)] - g[(2, 1)]).re;
    let g8 = w * (g[(1, 1)] + g[(2, 2)]).im;
    let fy = p * kp * s;
    let red = red_weight(m.phi);
    let blue = 1.0 - red;
    Ok([
        p,
        p * kp * c,
        fy,
        fz,
        mx,
        my,
        mz,
        g7,
        g8,
        red * p,
        blue * p,
        red * fy,
        blue * fy,
        red * mx,
        blue * mx,
    ])
}

pub fn spectral_kernel<R: Reflector + ?Sized>(substrate: &R, omega: f64, d: f64, cfg: &QuadConfig) -> Result<Kernel> {
    let est = integrate_kphi_with(
        |m: &ModeCoords| kernel_integrand(&substrate.reflect(m)?, m, d),
        omega,
        d,
        cfg,
        &KERNEL_CONTROL,
    )?;
    Ok(Kernel {
        omega,
        value: est.value,
        error: est.error,
        evaluations: est.evaluations,
    })
}

/// Thermal weights and `Im α` that multiply the kernel.
#[derive(Clone, Copy, Debug)]
struct Prefactors {
    /// `ΔΘ · Im α`, J·m³
    delta: f64,
    /// `(Θ_p + Θ_e) · Im α`, J·m³
    sum: f64,
    omega: f64,
}

impl Prefactors {
    fn new(alpha: Complex64, thermal: &ThermalState, omega: f64) -> Self {
        let (tp, te) = (theta_thermal(omega, thermal.t_p), theta_thermal(omega, thermal.t_e));
        let zp = if thermal.fz_zero_point { HBAR * omega } else { 0.0 };
        Prefactors {
            delta: (tp - te) * alpha.im,
            sum: (tp + te + zp) * alpha.im,
            omega,
        }
    }

    /// Multipliers of the P, F_x..F_z, M_x..M_z kernels.
    fn factors(&self) -> [f64; 7] {
        let k0 = self.omega / C_LIGHT;
        let kc = k0 / C_LIGHT;
        [
            self.delta * k0 * k0,
            -self.delta * kc,
            -self.delta * kc,
            -self.sum * kc,
            -self.delta * kc,
            -self.delta * kc,
            self.delta * kc,
        ]
    }
}

/// Red/blue branch splits, each `[φ ∈ [0, π), φ ∈ [π, 2π)]`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Branches {
    pub p: [f64; 2],
    pub fy: [f64; 2],
    pub mx: [f64; 2],
}

/// All seven densities at one frequency. Units: W·s, N·s, N·m·s.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Densities {
    pub omega: f64,
    pub power: f64,
    pub force: [f64; 3],
    pub torque: [f64; 3],
    pub err_power: f64,
    pub err_force: [f64; 3],
    pub err_torque: [f64; 3],
    pub branches: Branches,
}

impl Densities {
    fn as_array(&self) -> [f64; 7] {
        let (f, m) = (self.force, self.torque);
        [self.power, f[0], f[1], f[2], m[0], m[1], m[2]]
    }

    fn errors(&self) -> [f64; 7] {
        let (f, m) = (self.err_force, self.err_torque);
        [self.err_power, f[0], f[1], f[2], m[0], m[1], m[2]]
    }
}

/// Combine a kernel with the particle response at the same frequency.
pub fn densities_from_kernel(kernel: &Kernel, alpha: Complex64, thermal: &ThermalState) -> Densities {
    let omega = kernel.omega;
    let pre = Prefactors::new(alpha, thermal, omega);
    let f = pre.factors();
    let v = &kernel.value;
    let e = &kernel.error;
    let vacuum = pre.delta * vacuum_ldos_factor(omega);
    let k0sq = (omega / C_LIGHT).powi(2);
    let red_blue = |a: usize, b: usize, fac: f64| [fac * v[a], fac * v[b]];
    Densities {
        omega,
        power: vacuum + f[0] * v[k::P],
        force: [f[1] * v[k::FX], f[2] * v[k::FY], f[3] * v[k::FZ]],
        torque: [f[4] * v[k::MX], f[5] * v[k::MY], f[6] * v[k::MZ]],
        err_power: f[0].abs() * e[k::P],
        err_force: [f[1].abs() * e[k::FX], f[2].abs() * e[k::FY], f[3].abs() * e[k::FZ]],
        err_torque: [f[4].abs() * e[k::MX], f[5].abs() * e[k::MY], f[6].abs() * e[k::MZ]],
        branches: Branches {
            // the vacuum term carries no lateral momentum; split it evenly
            p: [
                0.5 * vacuum + pre.delta * k0sq * v[k::P_RED],
                0.5 * vacuum + pre.delta * k0sq * v[k::P_BLUE],
            ],
            fy: red_blue(k::FY_RED, k::FY_BLUE, f[2]),
            mx: red_blue(k::MX_RED, k::MX_BLUE, f[4]),
        },
    }
}

/// Densities per mode, i.e. the `(k∥, φ)` integrands with prefactors:
/// `[P, F_x, F_y, F_z, M_x, M_y, M_z]` without the vacuum power term.
pub fn mode_densities(r: &ReflectionMatrix, m: &ModeCoords, d: f64, alpha: Complex64, thermal: &ThermalState) -> Result<[f64; 7]> {
    let kern = kernel_integrand(r, m, d)?;
    let f = Prefactors::new(alpha, thermal, m.omega).factors();
    let mut out = [0.0; 7];
    for j in 0..7 {
        out[j] = f[j] * kern[j];
    }
    Ok(out)
}

pub fn densities<R: Reflector + ?Sized, A: DipoleResponse + ?Sized>(
    substrate: &R,
    particle: &A,
    thermal: &ThermalState,
    d: f64,
    omega: f64,
    cfg: &QuadConfig,
) -> Result<Densities> {
    thermal.validate()?;
    let alpha = particle.polarizability(omega)?;
    let kernel = spectral_kernel(substrate, omega, d, cfg)?;
    Ok(densities_from_kernel(&kernel, alpha, thermal))
}

pub fn power_density<R: Reflector + ?Sized, A: DipoleResponse + ?Sized>(
    substrate: &R,
    particle: &A,
    thermal: &ThermalState,
    d: f64,
    omega: f64,
    cfg: &QuadConfig,
) -> Result<f64> {
    Ok(densities(substrate, particle, thermal, d, omega, cfg)?.power)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    fn index(self) -> usize {
        match self {
            Axis::X => 0,
            Axis::Y => 1,
            Axis::Z => 2,
        }
    }
}

pub fn force_density<R: Reflector + ?Sized, A: DipoleResponse + ?Sized>(
    axis: Axis,
    substrate: &R,
    particle: &A,
    thermal: &ThermalState,
    d: f64,
    omega: f64,
    cfg: &QuadConfig,
) -> Result<f64> {
    Ok(densities(substrate, particle, thermal, d, omega, cfg)?.force[axis.index()])
}

pub fn torque_density<R: Reflector + ?Sized, A: DipoleResponse + ?Sized>(
    axis: Axis,
    substrate: &R,
    particle: &A,
    thermal: &ThermalState,
    d: f64,
    omega: f64,
    cfg: &QuadConfig,
) -> Result<f64> {
    Ok(densities(substrate, particle, thermal, d, omega, cfg)?.torque[axis.index()])
}

/// Angular momentum carried per exchanged photon in channel `mode`, in
/// units of ħ: torque integrand over photon-number integrand.
pub fn photon_spin(mode: &ModeCoords, refl: &ReflectionMatrix, d: f64) -> Result<[f64; 3]> {
    let k0 = mode.k0;
    let kp = mode.k_par;
    let kappa = mode.kappa();
    let (s, c) = mode.phi.sin_cos();
    let b_pp = 2.0 * kappa * kappa - 1.0;
    let (num_anti, num_pp, num_z, den);
    if mode.is_evanescent() {
        // k_z = i|k_z|: the decay factor cancels between numerator and
        // denominator
        let q = mode.k_z.im;
        num_anti = kp / (2.0 * k0 * q) * (-(refl.r_sp - refl.r_ps)).re;
        num_pp = kp / (k0 * k0) * refl.r_pp.im;
        num_z = -(refl.r_sp + refl.r_ps).im / (2.0 * k0);
        den = (refl.r_ss.im + refl.r_pp.im * b_pp) / (2.0 * q);
    } else {
        let i = Complex64::i();
        let e = (i * 2.0 * mode.k_z * d).exp();
        num_anti = kp / (2.0 * k0) * ((refl.r_sp - refl.r_ps) * e / mode.k_z).im;
        num_pp = kp / (k0 * k0) * (refl.r_pp * e).im;
        num_z = -((refl.r_sp + refl.r_ps) * e).im / (2.0 * k0);
        den = (i * e / (2.0 * mode.k_z) * (refl.r_ss + refl.r_pp * b_pp)).im;
    }
    if den == 0.0 || !den.is_finite() {
        return Err(Error::UndefinedSpin);
    }
    Ok([
        (c * num_anti + s * num_pp) / den,
        (s * num_anti - c * num_pp) / den,
        num_z / den,
    ])
}

/// `M_x` density on a particle spinning at `big_omega` about `x̂`, with
/// the rotating-frame polarizability sampled at `ω ± Ω`. Reduces to
/// [`torque_density`] along x at `Ω = 0`.
pub fn rotating_torque_x<R: Reflector + ?Sized, A: DipoleResponse + ?Sized>(
    substrate: &R,
    particle: &A,
    thermal: &ThermalState,
    d: f64,
    omega: f64,
    big_omega: f64,
    cfg: &QuadConfig,
) -> Result<f64> {
    thermal.validate()?;
    if !(big_omega.abs() < omega) {
        return Err(Error::config("big_omega", "must satisfy |Omega| < omega"));
    }
    let w_minus = omega - big_omega;
    let w_plus = omega + big_omega;
    let k_mid = spectral_kernel(substrate, omega, d, cfg)?;
    let (k_minus, k_plus) = if big_omega == 0.0 {
        (k_mid, k_mid)
    } else {
        (
            spectral_kernel(substrate, w_minus, d, cfg)?,
            spectral_kernel(substrate, w_plus, d, cfg)?,
        )
    };
    let a = particle.polarizability(omega)?;
    let a_minus = particle.polarizability(w_minus)?;
    let a_plus = particle.polarizability(w_plus)?;
    Ok(rotating_from_kernels(
        [&k_minus, &k_mid, &k_plus],
        [a_minus, a, a_plus],
        thermal,
        big_omega,
    ))
}

/// Combine kernels and polarizabilities at `(ω−, ω, ω+)`.
pub fn rotating_from_kernels(kernels: [&Kernel; 3], alphas: [Complex64; 3], thermal: &ThermalState, big_omega: f64) -> f64 {
    let omega = kernels[1].omega;
    let (wm, wp) = (omega - big_omega, omega + big_omega);
    let g7 = |kern: &Kernel| kern.value[k::G_YZ_ANTI];
    let g8 = |kern: &Kernel| kern.value[k::G_YY_ZZ];
    let [am, a, ap] = alphas;
    // both signs of frequency are folded into the positive axis; the
    // factor 1/2 matches the one-sided integration of the static densities
    let th_e = theta(omega, thermal.t_e);
    let th_p = theta(omega, thermal.t_p);
    let m_e = 0.5 * EPS_0 * th_e / omega
        * MU_0
        * omega
        * omega
        * ((am + ap).im * g7(kernels[1]) + g8(kernels[1]) * (am - ap).im);
    let m_p = 0.5 * EPS_0 * th_p / omega
        * a.im
        * MU_0
        * (wm * wm * g8(kernels[0]) - wp * wp * g8(kernels[2]) - wp * wp * g7(kernels[2]) - wm * wm * g7(kernels[0]));
    let c3 = C_LIGHT.powi(3);
    let m_e_vac = omega * omega / (3.0 * PI * c3) * (am - ap).im * th_e;
    let m_p_vac = (wm.powi(3) - wp.powi(3)) / (3.0 * PI * omega * c3) * a.im * th_p;
    m_e + m_p + m_e_vac + m_p_vac
}

/// Densities on an explicit frequency grid.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SpectralResult {
    pub rows: Vec<Densities>,
}

pub const SPECTRUM_CSV_HEADER: &str = "omega_rad_s,P,Fx,Fy,Fz,Mx,My,Mz,err_P,err_Fx,err_Fy,err_Fz,err_Mx,err_My,err_Mz,P_red,P_blue,Fy_red,Fy_blue,Mx_red,Mx_blue";

impl SpectralResult {
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "{SPECTRUM_CSV_HEADER}")?;
        for r in &self.rows {
            let b = &r.branches;
            let mut cols = vec![r.omega];
            cols.extend(r.as_array());
            cols.extend(r.errors());
            cols.extend([b.p[0], b.p[1], b.fy[0], b.fy[1], b.mx[0], b.mx[1]]);
            let line: Vec<String> = cols.iter().map(|v| format!("{v:e}")).collect();
            writeln!(out, "{}", line.join(","))?;
        }
        Ok(())
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        std::fs::write(path, buf)?;
        Ok(())
    }
}

pub fn spectrum<R: Reflector + ?Sized, A: DipoleResponse + ?Sized>(
    substrate: &R,
    particle: &A,
    thermal: &ThermalState,
    d: f64,
    omegas: &[f64],
    cfg: &QuadConfig,
) -> Result<SpectralResult> {
    thermal.validate()?;
    let rows: Result<Vec<Densities>> = omegas
        .par_iter()
        .map(|&w| densities(substrate, particle, thermal, d, w, cfg))
        .collect();
    Ok(SpectralResult { rows: rows? })
}

/// Frequency-integrated power (W), force (N) and torque (N·m).
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct WrenchTotals {
    pub power: f64,
    pub force: [f64; 3],
    pub torque: [f64; 3],
    pub err_power: f64,
    pub err_force: [f64; 3],
    pub err_torque: [f64; 3],
    /// Whether `force[2]` includes the zero-point part inside the window.
    pub fz_zero_point: bool,
    pub omega_window: (f64, f64),
    pub evaluations: usize,
}

/// Window `[ω_min/30, 40 k_B T_max/ħ]` around the particle resonances and
/// the thermal cutoff.
pub fn default_window<A: DipoleResponse + ?Sized>(particle: &A, thermal: &ThermalState) -> (f64, f64) {
    let t_max = thermal.t_p.max(thermal.t_e).max(1.0);
    let thermal_hi = 40.0 * K_B * t_max / HBAR;
    let res = particle.resonances();
    let lo_res = res.iter().copied().fold(thermal_hi / 100.0, f64::min);
    let hi_res = res.iter().copied().fold(0.0, f64::max);
    (lo_res / 30.0, thermal_hi.max(3.0 * hi_res))
}

/// Totals `Q = (1/π) ∫₀^∞ Q(ω) dω` over `window`, refined around `seeds`
/// and the particle resonances.
pub fn integrate_totals<R: Reflector + ?Sized, A: DipoleResponse + ?Sized>(
    substrate: &R,
    particle: &A,
    thermal: &ThermalState,
    d: f64,
    window: (f64, f64),
    seeds: &[f64],
    cfg: &QuadConfig,
) -> Result<WrenchTotals> {
    thermal.validate()?;
    let mut all_seeds = particle.resonances();
    all_seeds.extend_from_slice(seeds);
    let control = Control {
        controlled: 7,
        groups: [0, 1, 1, 1, 2, 2, 2],
    };
    let est = integrate_omega_with(
        |w| {
            let dens = densities(substrate, particle, thermal, d, w, cfg)?;
            Ok((dens.as_array(), dens.errors()))
        },
        window,
        &all_seeds,
        cfg,
        &control,
    )?;
    for i in 0..7 {
        let group = (0..7).filter(|&j| control.groups[j] == control.groups[i]).map(|j| est.scale[j]).fold(0.0, f64::max);
        let tol = cfg.abs_tol.max(cfg.rel_tol * group);
        if est.tail[i] > tol {
            return Err(Error::TailDominated {
                tail: est.tail[i] / PI,
                total: est.value[i] / PI,
            });
        }
    }
    let v = est.value.map(|x| x / PI);
    let e = est.error.map(|x| x / PI);
    Ok(WrenchTotals {
        power: v[0],
        force: [v[1], v[2], v[3]],
        torque: [v[4], v[5], v[6]],
        err_power: e[0],
        err_force: [e[1], e[2], e[3]],
        err_torque: [e[4], e[5], e[6]],
        fz_zero_point: thermal.fz_zero_point,
        omega_window: window,
        evaluations: est.evaluations,
    })
}

/// Total rotating-frame `M_x` (N·m) at spin rate `big_omega`.
#[allow(clippy::too_many_arguments)]
pub fn integrate_rotating_torque<R: Reflector + ?Sized, A: DipoleResponse + ?Sized>(
    substrate: &R,
    particle: &A,
    thermal: &ThermalState,
    d: f64,
    big_omega: f64,
    window: (f64, f64),
    seeds: &[f64],
    cfg: &QuadConfig,
) -> Result<(f64, f64)> {
    thermal.validate()?;
    if !(big_omega.abs() < window.0) {
        return Err(Error::config("big_omega", "must be below the lower window edge"));
    }
    let mut all_seeds = particle.resonances();
    all_seeds.extend_from_slice(seeds);
    let est = integrate_omega_with(
        |w| Ok(([rotating_torque_x(substrate, particle, thermal, d, w, big_omega, cfg)?], [0.0])),
        window,
        &all_seeds,
        cfg,
        &Control::all(),
    )?;
    Ok((est.value[0] / PI, est.error[0] / PI))
}

#[cfg(test)]
mod tests;
