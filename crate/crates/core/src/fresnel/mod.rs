//! Reflection matrix of the vacuum/substrate interface.
//!
//! The substrate fills `z < 0`. For each plane-wave channel the outgoing
//! bulk modes are found from the companion linearisation in [`bulk`] and
//! matched to incident plus reflected vacuum waves through continuity of
//! tangential `E` and `H`. The nonlocal model carries an extra
//! longitudinal mode fixed by requiring zero normal carrier current at the
//! surface.

pub mod basis;
mod bulk;

use nalgebra::{DMatrix, DVector, Matrix2, Vector3};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::constants::C_LIGHT;
use crate::error::{Error, Result};
use crate::materials::{GyrotropicModel, HydrodynamicModel};
use basis::Direction;
use bulk::{Pencil, Site};

type C = Complex64;

const ZERO: C = C { re: 0.0, im: 0.0 };
const I: C = C { re: 0.0, im: 1.0 };

/// One plane-wave channel `(ω, k∥, φ)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ModeCoords {
    pub omega: f64,
    pub k_par: f64,
    pub phi: f64,
    pub k0: f64,
    /// `sqrt(k0² − k∥²)` with `Im k_z ≥ 0`.
    pub k_z: C,
}

pub fn mode_coords(omega: f64, k_par: f64, phi: f64) -> ModeCoords {
    debug_assert!(omega > 0.0 && k_par >= 0.0);
    let k0 = omega / C_LIGHT;
    let diff = (k0 - k_par) * (k0 + k_par);
    let k_z = if diff >= 0.0 {
        C::new(diff.sqrt(), 0.0)
    } else {
        C::new(0.0, (-diff).sqrt())
    };
    ModeCoords {
        omega,
        k_par,
        phi: phi.rem_euclid(std::f64::consts::TAU),
        k0,
        k_z,
    }
}

impl ModeCoords {
    /// `k∥ / k0`
    pub fn kappa(&self) -> f64 {
        self.k_par / self.k0
    }

    /// `k_z / k0`
    pub fn kappa_z(&self) -> C {
        self.k_z / self.k0
    }

    pub fn is_evanescent(&self) -> bool {
        self.k_par > self.k0
    }

    fn site(&self) -> Site {
        Site {
            omega: self.omega,
            k_par: self.k_par,
            phi: self.phi,
        }
    }
}

/// `r_jk`: amplitude of j-polarized reflection per unit k-polarized
/// incidence.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReflectionMatrix {
    pub r_ss: C,
    pub r_sp: C,
    pub r_ps: C,
    pub r_pp: C,
}

impl ReflectionMatrix {
    pub const ZERO: ReflectionMatrix = ReflectionMatrix {
        r_ss: ZERO,
        r_sp: ZERO,
        r_ps: ZERO,
        r_pp: ZERO,
    };

    /// Perfect electric conductor.
    pub const PERFECT_MIRROR: ReflectionMatrix = ReflectionMatrix {
        r_ss: C { re: -1.0, im: 0.0 },
        r_sp: ZERO,
        r_ps: ZERO,
        r_pp: C { re: 1.0, im: 0.0 },
    };

    /// Rows: reflected (s, p). Columns: incident (s, p).
    pub fn as_matrix(&self) -> Matrix2<C> {
        Matrix2::new(self.r_ss, self.r_sp, self.r_ps, self.r_pp)
    }

    pub fn singular_values(&self) -> [f64; 2] {
        let sv = self.as_matrix().svd(false, false).singular_values;
        [sv[0], sv[1]]
    }

    /// Largest entrywise modulus of the difference.
    pub fn max_abs_diff(&self, other: &ReflectionMatrix) -> f64 {
        [
            self.r_ss - other.r_ss,
            self.r_sp - other.r_sp,
            self.r_ps - other.r_ps,
            self.r_pp - other.r_pp,
        ]
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max)
    }
}

/// Anything that produces a reflection matrix per plane-wave channel.
pub trait Reflector: Sync {
    fn reflect(&self, mode: &ModeCoords) -> Result<ReflectionMatrix>;
}

impl Reflector for ReflectionMatrix {
    fn reflect(&self, _mode: &ModeCoords) -> Result<ReflectionMatrix> {
        Ok(*self)
    }
}

impl Reflector for GyrotropicModel {
    fn reflect(&self, mode: &ModeCoords) -> Result<ReflectionMatrix> {
        reflect_local(self, mode)
    }
}

impl Reflector for HydrodynamicModel {
    fn reflect(&self, mode: &ModeCoords) -> Result<ReflectionMatrix> {
        reflect_nonlocal(self, mode)
    }
}

/// Substrate dielectric response, local or hydrodynamic.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "lowercase")]
pub enum Substrate {
    Local(GyrotropicModel),
    Nonlocal(HydrodynamicModel),
}

impl Substrate {
    pub fn local_model(&self) -> &GyrotropicModel {
        match self {
            Substrate::Local(m) => m,
            Substrate::Nonlocal(h) => &h.local,
        }
    }

    pub fn is_nonlocal(&self) -> bool {
        matches!(self, Substrate::Nonlocal(_))
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Substrate::Local(m) => m.validate(),
            Substrate::Nonlocal(h) => h.validate(),
        }
    }
}

impl Reflector for Substrate {
    fn reflect(&self, mode: &ModeCoords) -> Result<ReflectionMatrix> {
        match self {
            Substrate::Local(m) => reflect_local(m, mode),
            Substrate::Nonlocal(h) => reflect_nonlocal(h, mode),
        }
    }
}

fn wave_equation_terms(mode: &ModeCoords, n: usize) -> (DMatrix<C>, DMatrix<C>, DMatrix<C>, f64, f64) {
    let (s, c) = mode.phi.sin_cos();
    let kx = mode.kappa() * c;
    let ky = mode.kappa() * s;
    let mut m0 = DMatrix::<C>::zeros(n, n);
    let mut m1 = DMatrix::<C>::zeros(n, n);
    let mut m2 = DMatrix::<C>::zeros(n, n);
    // κ² I − κ κᵀ with κ = (kx, ky, q)
    m0[(0, 0)] = (ky * ky).into();
    m0[(0, 1)] = (-kx * ky).into();
    m0[(1, 0)] = (-kx * ky).into();
    m0[(1, 1)] = (kx * kx).into();
    m0[(2, 2)] = (kx * kx + ky * ky).into();
    m1[(0, 2)] = (-kx).into();
    m1[(2, 0)] = (-kx).into();
    m1[(1, 2)] = (-ky).into();
    m1[(2, 1)] = (-ky).into();
    m2[(0, 0)] = 1.0.into();
    m2[(1, 1)] = 1.0.into();
    (m0, m1, m2, kx, ky)
}

fn check_mode(mode: &ModeCoords) -> Result<()> {
    if !(mode.omega > 0.0 && mode.omega.is_finite()) {
        return Err(Error::config("omega", "must be finite and > 0"));
    }
    if !(mode.k_par >= 0.0 && mode.k_par.is_finite()) {
        return Err(Error::config("k_par", "must be finite and >= 0"));
    }
    Ok(())
}

/// Reflection from a local gyrotropic half-space.
pub fn reflect_local(model: &GyrotropicModel, mode: &ModeCoords) -> Result<ReflectionMatrix> {
    let r = reflect_local_raw(model, mode)?;
    Ok(if model.cyclotron_freq == 0.0 { strip_cross(r) } else { r })
}

/// Hydrodynamic half-space with hard-wall boundary (`J_z = 0` at `z = 0`).
pub fn reflect_nonlocal(model: &HydrodynamicModel, mode: &ModeCoords) -> Result<ReflectionMatrix> {
    if model.beta == 0.0 {
        return reflect_local(&model.local, mode);
    }
    let r = reflect_nonlocal_raw(model, mode)?;
    Ok(if model.local.cyclotron_freq == 0.0 { strip_cross(r) } else { r })
}

// Cross-polarisation vanishes identically without gyrotropy.
fn strip_cross(mut r: ReflectionMatrix) -> ReflectionMatrix {
    r.r_sp = ZERO;
    r.r_ps = ZERO;
    r
}

fn local_pencil(model: &GyrotropicModel, mode: &ModeCoords) -> (Pencil, f64, f64) {
    let eps = model.tensor_at(mode.omega);
    let (mut m0, m1, m2, kx, ky) = wave_equation_terms(mode, 3);
    for r in 0..3 {
        for c in 0..3 {
            m0[(r, c)] -= eps[(r, c)];
        }
    }
    let pencil = Pencil {
        m0,
        m1,
        m2,
        dynamic: vec![0, 1],
        algebraic: vec![2],
    };
    (pencil, kx, ky)
}

pub(crate) fn reflect_local_raw(model: &GyrotropicModel, mode: &ModeCoords) -> Result<ReflectionMatrix> {
    check_mode(mode)?;
    model.validate()?;
    let (pencil, kx, ky) = local_pencil(model, mode);
    let out = pencil.outgoing(kx, ky, None, mode.site())?;
    match_boundary(mode, &out.fields, false)
}

/// Below this `β/c` the longitudinal root is found by Newton from the
/// local modes instead of the companion matrix.
const SEEDED_BETA: f64 = 1e-5;

pub(crate) fn reflect_nonlocal_raw(model: &HydrodynamicModel, mode: &ModeCoords) -> Result<ReflectionMatrix> {
    check_mode(mode)?;
    model.validate()?;
    let local = &model.local;
    let w = mode.omega;
    let bg = local.background(w);
    let (mut m0, mut m1, mut m2, kx, ky) = wave_equation_terms(mode, 6);
    // unknowns: E (0..3), J' = iωμ0 J / k0² (3..6)
    let carrier = local.carrier_operator(w);
    let drive = I * (local.plasma_freq / w).powi(2);
    let b2 = I * (model.beta / C_LIGHT).powi(2);
    for i in 0..3 {
        m0[(i, i)] -= bg;
        m0[(i, 3 + i)] = -C::new(1.0, 0.0);
        m0[(3 + i, i)] = -drive;
        for j in 0..3 {
            m0[(3 + i, 3 + j)] = carrier[(i, j)];
        }
    }
    // i (β/c)² κ κᵀ acting on J'
    m0[(3, 3)] += b2 * kx * kx;
    m0[(3, 4)] += b2 * kx * ky;
    m0[(4, 3)] += b2 * kx * ky;
    m0[(4, 4)] += b2 * ky * ky;
    m1[(3, 5)] = b2 * kx;
    m1[(5, 3)] = b2 * kx;
    m1[(4, 5)] = b2 * ky;
    m1[(5, 4)] = b2 * ky;
    m2[(5, 5)] = b2;
    let pencil = Pencil {
        m0,
        m1,
        m2,
        dynamic: vec![0, 1, 5],
        algebraic: vec![2, 3, 4],
    };
    if model.beta / C_LIGHT < SEEDED_BETA {
        let seeds = nonlocal_seeds(&pencil, local, mode)?;
        if let Some(out) = pencil.seeded(&seeds, kx, ky, Some(2)) {
            return match_boundary(mode, &out.fields, true);
        }
    }
    let out = pencil.outgoing(kx, ky, Some(2), mode.site())?;
    match_boundary(mode, &out.fields, true)
}

/// Approximate nonlocal eigenpairs: the two local transverse modes with the
/// current they drive, plus the longitudinal root of the `J_z`, `E_z` block.
fn nonlocal_seeds(pencil: &Pencil, local: &GyrotropicModel, mode: &ModeCoords) -> Result<Vec<(C, DVector<C>)>> {
    let (lp, kx, ky) = local_pencil(local, mode);
    let lo = lp.outgoing(kx, ky, None, mode.site())?;
    let at = |q: C| &pencil.m0 + &pencil.m1 * q + &pencil.m2 * (q * q);
    let mut seeds = Vec::with_capacity(3);
    for (q, e) in lo.roots.iter().zip(&lo.states) {
        let m = at(*q);
        let rhs = -(m.view((3, 0), (3, 3)) * e);
        let j = m.view((3, 3), (3, 3)).into_owned().lu().solve(&rhs).unwrap_or_else(|| DVector::zeros(3));
        let mut x = DVector::zeros(6);
        x.rows_mut(0, 3).copy_from(e);
        x.rows_mut(3, 3).copy_from(&j);
        seeds.push((*q, x));
    }
    let (m0, m1, m2) = (&pencil.m0, &pencil.m1, &pencil.m2);
    let a0 = m0[(5, 5)] - m0[(5, 2)] * m0[(2, 5)] / m0[(2, 2)];
    let (a1, a2) = (m1[(5, 5)], m2[(5, 5)]);
    let disc = (a1 * a1 - a0 * a2 * 4.0).sqrt();
    let pick = |q: C| if q.im.abs() > 1e-9 * q.norm() { q.im < 0.0 } else { q.re < 0.0 };
    let q_plus = (-a1 + disc) / (a2 * 2.0);
    let q_l = if pick(q_plus) { q_plus } else { (-a1 - disc) / (a2 * 2.0) };
    let m = at(q_l);
    let mut jv = DVector::zeros(3);
    jv[2] = C::new(1.0, 0.0);
    let rhs = -(m.view((0, 3), (3, 3)) * &jv);
    let e = m.view((0, 0), (3, 3)).into_owned().lu().solve(&rhs).unwrap_or_else(|| DVector::zeros(3));
    let mut x = DVector::zeros(6);
    x.rows_mut(0, 3).copy_from(&e);
    x.rows_mut(3, 3).copy_from(&jv);
    seeds.push((q_l, x));
    Ok(seeds)
}

fn tangential(mode: &ModeCoords, dir: Direction, e: &Vector3<C>) -> [C; 4] {
    let h = basis::magnetic(mode, dir, e);
    [e[0], e[1], h[0], h[1]]
}

fn match_boundary(mode: &ModeCoords, modes: &[bulk::ModeFields], hard_wall: bool) -> Result<ReflectionMatrix> {
    let n = 2 + modes.len();
    let rows = if hard_wall { 5 } else { 4 };
    debug_assert_eq!(rows, n);
    let es = basis::e_s(mode);
    let ep_up = basis::e_p(mode, Direction::Up);
    let ep_down = basis::e_p(mode, Direction::Down);

    let mut a = DMatrix::<C>::zeros(n, n);
    let ref_s = tangential(mode, Direction::Up, &es);
    let ref_p = tangential(mode, Direction::Up, &ep_up);
    for i in 0..4 {
        a[(i, 0)] = -ref_s[i];
        a[(i, 1)] = -ref_p[i];
    }
    for (j, f) in modes.iter().enumerate() {
        let col = [f.ex, f.ey, f.hx, f.hy, f.jz];
        for i in 0..rows {
            a[(i, 2 + j)] = col[i];
        }
    }
    let inc_s = tangential(mode, Direction::Down, &es);
    let inc_p = tangential(mode, Direction::Down, &ep_down);
    let mut b = DMatrix::<C>::zeros(n, 2);
    for i in 0..4 {
        b[(i, 0)] = inc_s[i];
        b[(i, 1)] = inc_p[i];
    }

    let singular = |residual: f64| Error::SingularBoundary {
        omega: mode.omega,
        k_par: mode.k_par,
        phi: mode.phi,
        residual,
    };
    let x = a.clone().lu().solve(&b).ok_or_else(|| singular(f64::INFINITY))?;
    let residual = (&a * &x - &b).norm() / (a.norm() * x.norm() + b.norm());
    if !(residual < 1e-10) {
        return Err(singular(residual));
    }
    Ok(ReflectionMatrix {
        r_ss: x[(0, 0)],
        r_ps: x[(1, 0)],
        r_sp: x[(0, 1)],
        r_pp: x[(1, 1)],
    })
}
