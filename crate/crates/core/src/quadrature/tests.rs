use super::*;
use crate::constants::C_LIGHT;
use proptest::prelude::*;
use std::f64::consts::PI;

/// `∫₀^{a} x e^{−bx} dx`
fn gamma2(a: f64, b: f64) -> f64 {
    (1.0 - (-b * a).exp() * (1.0 + b * a)) / (b * b)
}

/// `∫ dk∥ ∫ dφ k∥ e^{−2|k_z| d}` up to `k_max`; both sides reduce to
/// `∫ |k_z| e^{−2|k_z|d} d|k_z|`.
fn decay_closed_form(k0: f64, d: f64, k_max: f64) -> f64 {
    let b = 2.0 * d;
    let prop = gamma2(k0, b);
    let evan = gamma2((k_max * k_max - k0 * k0).sqrt(), b);
    2.0 * PI * (prop + evan)
}

fn decay(m: &ModeCoords, d: f64) -> f64 {
    m.k_par * (-2.0 * m.k_z.norm() * d).exp()
}

#[test]
fn decaying_integrand_matches_closed_form() {
    let cfg = QuadConfig::default();
    for &(omega, d) in &[(1e14, 1e-7), (3e13, 2e-6), (1e15, 5e-8), (2e14, 3e-6)] {
        let k0 = omega / C_LIGHT;
        let est = integrate_kphi(|m: &ModeCoords| Ok([decay(m, d), decay(m, d) * m.phi.cos().powi(2)]), omega, d, &cfg).unwrap();
        let want = decay_closed_form(k0, d, cfg.k_par_max_factor / d);
        let err0 = (est.value[0] - want).abs();
        let err1 = (est.value[1] - 0.5 * want).abs();
        assert!(err0 <= cfg.rel_tol * want, "{omega} {d}: {} vs {want}", est.value[0]);
        assert!(err0 <= est.error[0] && err1 <= est.error[1], "estimate must bound the error");
    }
}

#[test]
fn short_cutoff_skips_evanescent_side() {
    // k_max below k0: only the propagating part up to k0 is integrated
    let omega = 1e15;
    let d = 1e-4;
    let k0 = omega / C_LIGHT;
    let cfg = QuadConfig::default();
    assert!(cfg.k_par_max_factor / d < k0);
    let est = integrate_kphi(|m: &ModeCoords| Ok([decay(m, d)]), omega, d, &cfg).unwrap();
    let want = 2.0 * PI * gamma2(k0, 2.0 * d);
    assert!((est.value[0] / want - 1.0).abs() < 1e-5);
}

#[test]
fn inverse_kz_edge_is_absorbed() {
    // ∫₀^{k0} k∥/k_z dk∥ = k0
    let omega = 5e13;
    let k0 = omega / C_LIGHT;
    let cfg = QuadConfig {
        rel_tol: 1e-12,
        ..QuadConfig::default()
    };
    let est = integrate_kphi(
        |m: &ModeCoords| Ok([if m.is_evanescent() { 0.0 } else { m.k_par / m.k_z.re }]),
        omega,
        1e-6,
        &cfg,
    )
    .unwrap();
    assert!((est.value[0] / (2.0 * PI * k0) - 1.0).abs() < 1e-11);
}

#[test]
fn sine_dependence_integrates_to_zero() {
    let omega = 1e14;
    let d = 1e-7;
    let est = integrate_kphi(
        |m: &ModeCoords| Ok([decay(m, d) * m.phi.sin(), decay(m, d) * (3.0 * m.phi).sin() * m.phi.cos()]),
        omega,
        d,
        &QuadConfig::default(),
    )
    .unwrap();
    for i in 0..2 {
        assert!(est.value[i].abs() <= 1e-14 * est.scale[i], "{:e} / {:e}", est.value[i], est.scale[i]);
    }
}

#[test]
fn uncontrolled_components_do_not_drive_refinement() {
    let omega = 1e14;
    let d = 1e-7;
    let cfg = QuadConfig::default();
    let f = |m: &ModeCoords| Ok([decay(m, d), (1e9 * m.k_par * d).sin()]);
    let control = Control { controlled: 1, groups: [0, 1] };
    let partial = integrate_kphi_with(f, omega, d, &cfg, &control).unwrap();
    let single = integrate_kphi(|m: &ModeCoords| Ok([decay(m, d)]), omega, d, &cfg).unwrap();
    assert_eq!(partial.value[0], single.value[0]);
    assert_eq!(partial.evaluations, single.evaluations);
}

#[test]
fn subdivision_limit_reports_partial_value() {
    let omega = 1e14;
    let d = 1e-7;
    let cfg = QuadConfig {
        rel_tol: 1e-14,
        max_subdivisions: 3,
        ..QuadConfig::default()
    };
    // a kink inside the evanescent side resists the 1e-14 target
    let k_kink = 3.0 / d;
    let err = integrate_kphi(|m: &ModeCoords| Ok([decay(m, d) * (m.k_par - k_kink).abs().sqrt()]), omega, d, &cfg).unwrap_err();
    match err {
        Error::NonConvergence { partial, requested, achieved } => {
            assert!(partial > 0.0);
            assert!(requested <= 1e-14);
            assert!(achieved > requested);
        }
        e => panic!("unexpected {e:?}"),
    }
}

#[test]
fn config_validation() {
    let ok = QuadConfig::default();
    assert!(ok.validate().is_ok());
    for bad in [
        QuadConfig { rel_tol: 0.0, ..ok },
        QuadConfig { abs_tol: -1.0, ..ok },
        QuadConfig { k_par_max_factor: 9.0, ..ok },
        QuadConfig { phi_order: 8, ..ok },
        QuadConfig { phi_order: 17, ..ok },
        QuadConfig { max_subdivisions: 0, ..ok },
    ] {
        assert!(matches!(bad.validate(), Err(Error::Config { .. })), "{bad:?}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn halving_tolerance_stays_within_previous_estimate(
        log_w in 13.0f64..15.0,
        log_d in -8.0f64..-5.5,
        shape in 0.0f64..3.0,
        log_tol in -8.0f64..-3.0,
    ) {
        let omega = 10f64.powf(log_w);
        let d = 10f64.powf(log_d);
        let f = |m: &ModeCoords| {
            let x = m.k_par * d;
            Ok([decay(m, d) * (1.0 + shape * x * m.phi.cos()).powi(2) / (1.0 + x * x)])
        };
        let cfg = QuadConfig { rel_tol: 10f64.powf(log_tol), ..QuadConfig::default() };
        let coarse = integrate_kphi(f, omega, d, &cfg).unwrap();
        let fine = integrate_kphi(f, omega, d, &QuadConfig { rel_tol: 0.5 * cfg.rel_tol, ..cfg }).unwrap();
        prop_assert!((fine.value[0] - coarse.value[0]).abs() <= coarse.error[0]);
        prop_assert!(fine.error[0] <= coarse.error[0] * (1.0 + 1e-12));
    }
}

#[test]
fn cutoff_doubling_changes_less_than_estimate() {
    let omega = 8e13;
    let d = 1.5e-7;
    let f = |m: &ModeCoords| Ok([m.k_par * m.k_par * (-2.0 * m.k_z.norm() * d).exp() / m.k_z.norm()]);
    let a = integrate_kphi(f, omega, d, &QuadConfig::default()).unwrap();
    let b = integrate_kphi(f, omega, d, &QuadConfig { k_par_max_factor: 80.0, ..QuadConfig::default() }).unwrap();
    assert!((a.value[0] - b.value[0]).abs() <= a.error[0]);
}

#[test]
fn lorentzian_matches_arctan() {
    let (w0, g) = (2e13, 4e11);
    let (lo, hi) = (1e12, 1e14);
    let cfg = QuadConfig {
        rel_tol: 1e-8,
        ..QuadConfig::default()
    };
    let est = integrate_omega(|w| Ok([g / ((w - w0).powi(2) + g * g)]), (lo, hi), &[w0], &cfg).unwrap();
    let want = ((hi - w0) / g).atan() - ((lo - w0) / g).atan();
    assert!((est.value[0] / want - 1.0).abs() < 1e-8);
    assert!((est.value[0] - want).abs() <= est.error[0]);
}

#[test]
fn zero_density_integrates_to_zero() {
    let est = integrate_omega(|_| Ok([0.0, 0.0]), (1e12, 1e14), &[], &QuadConfig::default()).unwrap();
    assert_eq!(est.value, [0.0, 0.0]);
    assert_eq!(est.tail, [0.0, 0.0]);
}

#[test]
fn narrow_peak_away_from_seeds_is_resolved() {
    // width 1e-5 of the centre, no seed at the peak
    let (w0, g) = (3.37e13, 3.37e8);
    let (lo, hi) = (1e12, 1e14);
    let density = |w: f64| g / ((w - w0).powi(2) + g * g);
    let cfg = QuadConfig {
        rel_tol: 1e-6,
        max_subdivisions: 2000,
        ..QuadConfig::default()
    };
    let est = integrate_omega(|w| Ok([density(w)]), (lo, hi), &[2e13, 5e13], &cfg).unwrap();
    // dense midpoint grid, refined geometrically around the peak
    let mut grid = 0.0;
    let n = 2_000_000;
    let (a, b) = (w0 - 2e3 * g, w0 + 2e3 * g);
    let h = (b - a) / n as f64;
    for j in 0..n {
        grid += density(a + (j as f64 + 0.5) * h) * h;
    }
    grid += ((a - w0) / g).atan() - ((lo - w0) / g).atan() + ((hi - w0) / g).atan() - ((b - w0) / g).atan();
    assert!((est.value[0] / grid - 1.0).abs() < 1e-5, "{} vs {grid}", est.value[0]);
}

#[test]
fn tail_bound_reflects_edge_values() {
    let est = integrate_omega(|w: f64| Ok([1.0 / w]), (1e12, 1e14), &[], &QuadConfig::default()).unwrap();
    assert!((est.tail[0] - 2.0).abs() < 1e-12);
    assert!((est.value[0] / 100f64.ln() - 1.0).abs() < 1e-5);
}

#[test]
fn bad_window_is_config_error() {
    for w in [(0.0, 1.0), (2.0, 1.0), (1.0, f64::INFINITY)] {
        assert!(integrate_omega(|_| Ok([1.0]), w, &[], &QuadConfig::default()).is_err());
    }
}
