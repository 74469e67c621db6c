//! Reflected dyadic Green's function at the particle, one plane-wave
//! channel at a time.
//!
//! The full tensor is `∫ dk∥ dφ (k∥ / 4π²) G(k∥, φ)`; callers weight the
//! integrand themselves.

use nalgebra::Matrix3;
use num_complex::Complex64;

use crate::constants::C_LIGHT;
use crate::error::{Error, Result};
use crate::fresnel::basis::{e_p, e_s, Direction};
use crate::fresnel::{ModeCoords, ReflectionMatrix};

pub type GreensIntegrand = Matrix3<Complex64>;

/// `i e^{2ik_z d} / (2k_z)`, in 1/m.
pub fn phase_prefactor(mode: &ModeCoords, d: f64) -> Result<Complex64> {
    if mode.k_z == Complex64::new(0.0, 0.0) {
        return Err(Error::LightLine { omega: mode.omega });
    }
    if !(d > 0.0) {
        return Err(Error::config("d", "must be > 0"));
    }
    let i = Complex64::i();
    Ok(i * (i * 2.0 * mode.k_z * d).exp() / (2.0 * mode.k_z))
}

pub fn greens_reflected_integrand(refl: &ReflectionMatrix, mode: &ModeCoords, d: f64) -> Result<GreensIntegrand> {
    let pref = phase_prefactor(mode, d)?;
    let s = e_s(mode);
    let p_up = e_p(mode, Direction::Up);
    let p_down = e_p(mode, Direction::Down);
    let from_s = s * refl.r_ss + p_up * refl.r_ps;
    let from_p = s * refl.r_sp + p_up * refl.r_pp;
    Ok((from_s * s.transpose() + from_p * p_down.transpose()) * pref)
}

/// Closed form of the integrand trace.
pub fn reflected_trace(refl: &ReflectionMatrix, mode: &ModeCoords, d: f64) -> Result<Complex64> {
    let pref = phase_prefactor(mode, d)?;
    let kappa = mode.kappa();
    Ok(pref * (refl.r_ss + refl.r_pp * (2.0 * kappa * kappa - 1.0)))
}

/// `ω³ / (πc³)` in 1/m³.
pub fn vacuum_ldos_factor(omega: f64) -> f64 {
    let k0 = omega / C_LIGHT;
    k0 * k0 * k0 / std::f64::consts::PI
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fresnel::mode_coords;
    use crate::quadrature::{integrate_kphi, QuadConfig};
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn refl(v: [f64; 8]) -> ReflectionMatrix {
        ReflectionMatrix {
            r_ss: c(v[0], v[1]),
            r_sp: c(v[2], v[3]),
            r_ps: c(v[4], v[5]),
            r_pp: c(v[6], v[7]),
        }
    }

    #[test]
    fn zero_reflection_gives_zero_tensor() {
        let m = mode_coords(1e14, 2e6, 0.7);
        let g = greens_reflected_integrand(&ReflectionMatrix::ZERO, &m, 1e-7).unwrap();
        assert!(g.iter().all(|z| *z == c(0.0, 0.0)));
    }

    #[test]
    fn light_line_and_bad_height_are_errors() {
        let w = 1e14;
        let m = mode_coords(w, w / C_LIGHT, 0.0);
        assert!(matches!(
            greens_reflected_integrand(&ReflectionMatrix::PERFECT_MIRROR, &m, 1e-7),
            Err(Error::LightLine { .. })
        ));
        let m = mode_coords(w, 0.5 * w / C_LIGHT, 0.0);
        assert!(greens_reflected_integrand(&ReflectionMatrix::PERFECT_MIRROR, &m, 0.0).is_err());
    }

    #[test]
    fn vacuum_factor_scaling() {
        assert_eq!(vacuum_ldos_factor(0.0), 0.0);
        let a = vacuum_ldos_factor(3e13);
        assert!((vacuum_ldos_factor(6e13) / a - 8.0).abs() < 1e-12);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn trace_matches_closed_form(
            r in prop::array::uniform8(-2.0f64..2.0),
            kappa in 0.0f64..50.0,
            phi in 0.0f64..std::f64::consts::TAU,
            log_d in -9.0f64..-5.0,
            log_w in 12.0f64..15.0,
        ) {
            let w = 10f64.powf(log_w);
            let m = mode_coords(w, kappa * w / C_LIGHT, phi);
            prop_assume!(m.k_z.norm() > 0.0);
            let d = 10f64.powf(log_d);
            let r = refl(r);
            let g = greens_reflected_integrand(&r, &m, d).unwrap();
            let closed = reflected_trace(&r, &m, d).unwrap();
            let pref = phase_prefactor(&m, d).unwrap();
            let k2 = m.kappa_z().norm_sqr() + kappa * kappa;
            let scale = pref.norm() * (r.r_ss.norm() + r.r_pp.norm() * (1.0 + 2.0 * kappa * kappa)
                + (r.r_sp.norm() + r.r_ps.norm()) * k2.sqrt());
            prop_assert!((g.trace() - closed).norm() <= 1e-12 * scale.max(f64::MIN_POSITIVE));
        }

        #[test]
        fn bilinear_in_reflection(
            a in prop::array::uniform8(-1.0f64..1.0),
            b in prop::array::uniform8(-1.0f64..1.0),
            x in -3.0f64..3.0,
            kappa in 0.0f64..5.0,
        ) {
            let m = mode_coords(1e14, kappa * 1e14 / C_LIGHT, 1.1);
            prop_assume!(m.k_z.norm() > 0.0);
            let d = 2e-7;
            let mut sum = [0.0; 8];
            for j in 0..8 {
                sum[j] = a[j] + x * b[j];
            }
            let lhs = greens_reflected_integrand(&refl(sum), &m, d).unwrap();
            let rhs = greens_reflected_integrand(&refl(a), &m, d).unwrap()
                + greens_reflected_integrand(&refl(b), &m, d).unwrap() * c(x, 0.0);
            let tol = 1e-12 * (lhs.norm() + rhs.norm()).max(f64::MIN_POSITIVE);
            prop_assert!((lhs - rhs).norm() <= tol);
        }
    }

    #[test]
    fn height_shift_is_exponential_for_evanescent_modes() {
        let r = refl([0.3, -0.2, 0.1, 0.4, -0.5, 0.05, 0.9, 0.2]);
        for &kappa in &[1.5, 10.0, 200.0] {
            let w = 5e13;
            let m = mode_coords(w, kappa * w / C_LIGHT, 0.9);
            let (d, delta) = (1e-7, 3e-8);
            let g0 = greens_reflected_integrand(&r, &m, d).unwrap();
            let g1 = greens_reflected_integrand(&r, &m, d + delta).unwrap();
            let f = (-2.0 * m.k_z.im * delta).exp();
            for (a, b) in g0.iter().zip(g1.iter()) {
                assert!((a * f - b).norm() <= 1e-13 * a.norm().max(b.norm()));
            }
        }
    }

    /// Free-space Green's tensor `G0(r ẑ)` reflected through a perfect
    /// conductor: the image of a dipole at height `d` sits at `−d` with
    /// `(x, y)` components flipped.
    fn image_dipole(k0: f64, d: f64) -> Matrix3<Complex64> {
        let r = 2.0 * d;
        let kr = k0 * r;
        let e = c(0.0, kr).exp() / (4.0 * PI * r);
        let i = Complex64::i();
        let transverse = e * (1.0 + i / kr - 1.0 / (kr * kr));
        let longitudinal = e * (-2.0 * i / kr + 2.0 / (kr * kr));
        Matrix3::from_diagonal(&nalgebra::Vector3::new(-transverse, -transverse, longitudinal))
    }

    fn integrated_tensor(r: &ReflectionMatrix, omega: f64, d: f64, cfg: &QuadConfig) -> Matrix3<Complex64> {
        let est = integrate_kphi(
            |m: &ModeCoords| {
                let g = greens_reflected_integrand(r, m, d)? * c(m.k_par / (4.0 * PI * PI), 0.0);
                let mut out = [0.0; 18];
                for (j, z) in g.iter().enumerate() {
                    out[2 * j] = z.re;
                    out[2 * j + 1] = z.im;
                }
                Ok(out)
            },
            omega,
            d,
            cfg,
        )
        .unwrap();
        Matrix3::from_fn(|i, j| {
            let k = j * 3 + i;
            c(est.value[2 * k], est.value[2 * k + 1])
        })
    }

    #[test]
    fn perfect_mirror_matches_image_dipole() {
        let cfg = QuadConfig {
            rel_tol: 1e-9,
            abs_tol: 1e-300,
            k_par_max_factor: 40.0,
            max_subdivisions: 2000,
            phi_order: 16,
        };
        let omega = 1e14;
        let k0 = omega / C_LIGHT;
        // near field, intermediate and radiative zone
        for &kd in &[0.01, 0.5, 3.0] {
            let d = kd / k0;
            let g = integrated_tensor(&ReflectionMatrix::PERFECT_MIRROR, omega, d, &cfg);
            let want = image_dipole(k0, d);
            let scale = want.norm();
            let err = (g - want).norm() / scale;
            assert!(err < 1e-6, "kd={kd} err={err:e}\n{g}\n{want}");
        }
    }

    #[test]
    fn vacuum_trace_consistent_with_factor() {
        // vacuum part of the angular spectrum: (i/2k_z)(ê_s ê_s + ê_p ê_p), trace i/k_z
        let omega = 7e13;
        let k0 = omega / C_LIGHT;
        let cfg = QuadConfig {
            rel_tol: 1e-10,
            ..QuadConfig::default()
        };
        let est = integrate_kphi(
            |m: &ModeCoords| {
                if m.is_evanescent() {
                    return Ok([0.0]);
                }
                let s = e_s(m);
                let p = e_p(m, Direction::Up);
                let g0 = (s * s.transpose() + p * p.transpose()) * (Complex64::i() / (2.0 * m.k_z));
                Ok([g0.trace().im * m.k_par / (4.0 * PI * PI)])
            },
            omega,
            1e-6,
            &cfg,
        )
        .unwrap();
        let im_tr = est.value[0];
        assert!((im_tr / (k0 / (2.0 * PI)) - 1.0).abs() < 1e-6);
        // the closed form counts the two field-correlation orderings
        let ratio = 2.0 * k0 * k0 * im_tr / vacuum_ldos_factor(omega);
        assert!((ratio - 1.0).abs() < 1e-6, "ratio {ratio}");
    }

    #[test]
    fn nonmagnetised_yz_antisymmetric_part_vanishes() {
        let model = crate::materials::default_db().substrates["InSb-n-doped"].gyrotropic([0.0; 3]).unwrap();
        let omega = 2.5e13;
        let d = 2e-7;
        let cfg = QuadConfig {
            phi_order: 32,
            ..QuadConfig::default()
        };
        let est = integrate_kphi(
            |m: &ModeCoords| {
                let r = crate::fresnel::reflect_local(&model, m)?;
                let g = greens_reflected_integrand(&r, m, d)? * c(m.k_par / (4.0 * PI * PI), 0.0);
                let a = g[(1, 2)] - g[(2, 1)];
                Ok([a.re, a.im])
            },
            omega,
            d,
            &cfg,
        )
        .unwrap();
        for i in 0..2 {
            assert!(est.scale[i] > 0.0);
            assert!(est.value[i].abs() <= 1e-12 * est.scale[i], "{:e} {:e}", est.value[i], est.scale[i]);
        }
    }

}
