//! Surface-polariton dispersion `ω(k∥, φ)` from the peak of `Im r_pp`
//! along real frequency, and ω-grid seeds for the spectra.

use std::io::Write;
use std::path::Path;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::constants::C_LIGHT;
use crate::error::{Error, Result};
use crate::fresnel::{mode_coords, Reflector, Substrate};
use crate::materials::{epsilon_substrate, DipoleResponse, GyrotropicModel};
use crate::numeric::{golden_min, local_minima_log};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum BranchLabel {
    #[serde(rename = "SPP")]
    Spp,
    #[serde(rename = "SPhP")]
    Sphp,
}

impl BranchLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            BranchLabel::Spp => "SPP",
            BranchLabel::Sphp => "SPhP",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelLabel {
    Local,
    Nonlocal,
}

impl ModelLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            ModelLabel::Local => "local",
            ModelLabel::Nonlocal => "nonlocal",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BranchPoint {
    pub k_par: f64,
    pub phi: f64,
    pub omega: f64,
    pub branch: BranchLabel,
    pub model: ModelLabel,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TraceOptions {
    /// Window searched for the branch at the first `k∥`, rad/s.
    pub omega_window: (f64, f64),
    /// Log-spaced points in the initial scan.
    pub scan_points: usize,
    /// Half-width of the continuation bracket, relative to the previous ω.
    pub step: f64,
    /// Peaks with `Im r_pp` below this are treated as lost.
    pub noise_floor: f64,
    pub rel_tol: f64,
}

impl Default for TraceOptions {
    fn default() -> Self {
        TraceOptions {
            omega_window: (1e12, 1e15),
            scan_points: 2000,
            step: 0.05,
            noise_floor: 1e-3,
            rel_tol: 1e-6,
        }
    }
}

impl TraceOptions {
    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.omega_window;
        if !(lo > 0.0 && hi > lo && hi.is_finite()) {
            return Err(Error::config("omega_window", "must satisfy 0 < lo < hi < inf"));
        }
        if self.scan_points < 8 {
            return Err(Error::config("scan_points", "must be >= 8"));
        }
        if !(self.step > 0.0 && self.step < 1.0) {
            return Err(Error::config("step", "must be in (0, 1)"));
        }
        if !(self.noise_floor >= 0.0 && self.noise_floor.is_finite()) {
            return Err(Error::config("noise_floor", "must be finite and >= 0"));
        }
        if !(self.rel_tol > 0.0 && self.rel_tol < 1e-2) {
            return Err(Error::config("rel_tol", "must be in (0, 1e-2)"));
        }
        Ok(())
    }
}

/// A traced branch. `warning` is set when the trace was truncated.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    pub points: Vec<BranchPoint>,
    pub warning: Option<String>,
}

pub const DISPERSION_CSV_HEADER: &str = "k_par_per_m,phi_rad,omega_rad_s,branch,model";

pub fn write_csv<W: Write>(points: &[BranchPoint], mut out: W) -> Result<()> {
    writeln!(out, "{DISPERSION_CSV_HEADER}")?;
    for p in points {
        writeln!(out, "{:e},{},{:e},{},{}", p.k_par, p.phi, p.omega, p.branch.as_str(), p.model.as_str())?;
    }
    Ok(())
}

pub fn save_csv(points: &[BranchPoint], path: impl AsRef<Path>) -> Result<()> {
    let mut buf = Vec::new();
    write_csv(points, &mut buf)?;
    std::fs::write(path, buf)?;
    Ok(())
}

/// Phonon bands sit above the lowest TO resonance; everything below is
/// the plasmon branch.
pub fn classify(model: &GyrotropicModel, omega: f64) -> BranchLabel {
    match model.phonon_terms.iter().map(|p| p.resonance).reduce(f64::min) {
        Some(to) if omega >= to => BranchLabel::Sphp,
        _ => BranchLabel::Spp,
    }
}

fn im_rpp(substrate: &Substrate, k_par: f64, phi: f64, omega: f64) -> f64 {
    match substrate.reflect(&mode_coords(omega, k_par, phi)) {
        Ok(r) if r.r_pp.im.is_finite() => r.r_pp.im,
        _ => f64::NEG_INFINITY,
    }
}

/// Interior maxima of `f` on a sorted grid, as `(x_left, x, x_right, f)`.
fn grid_peaks(xs: &[f64], ys: &[f64]) -> Vec<(f64, f64, f64, f64)> {
    (1..xs.len() - 1)
        .filter(|&i| ys[i] > ys[i - 1] && ys[i] >= ys[i + 1])
        .map(|i| (xs[i - 1], xs[i], xs[i + 1], ys[i]))
        .collect()
}

fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let r = (hi / lo).ln() / (n - 1) as f64;
    (0..n).map(|i| lo * (r * i as f64).exp()).collect()
}

/// Trace one branch at in-plane angle `phi` over the increasing `k_pars`.
///
/// The first point is the strongest `Im r_pp` peak in
/// `opts.omega_window`; later points follow the peak nearest the previous
/// frequency.
pub fn trace_branch(substrate: &Substrate, phi: f64, k_pars: &[f64], opts: &TraceOptions) -> Result<Trace> {
    substrate.validate()?;
    opts.validate()?;
    if k_pars.is_empty() {
        return Err(Error::config("k_range", "must be non-empty"));
    }
    if k_pars.windows(2).any(|w| !(w[1] > w[0])) || !(k_pars[0] > 0.0) || !k_pars[k_pars.len() - 1].is_finite() {
        return Err(Error::config("k_range", "must be positive, finite and strictly increasing"));
    }
    let (lo, hi) = opts.omega_window;
    if !(k_pars[0] * C_LIGHT > lo) {
        return Err(Error::config("k_range", "must lie above the light line of the search window"));
    }
    let model = substrate.local_model();
    let label = if substrate.is_nonlocal() { ModelLabel::Nonlocal } else { ModelLabel::Local };
    let mut trace = Trace::default();
    let mut prev: Option<f64> = None;
    for &k in k_pars {
        // strictly evanescent channel
        let ceiling = k * C_LIGHT * (1.0 - 1e-9);
        let f = |w: f64| im_rpp(substrate, k, phi, w);
        let found = match prev {
            None => {
                let xs = log_grid(lo, hi.min(ceiling), opts.scan_points);
                let ys: Vec<f64> = xs.par_iter().map(|&w| f(w)).collect();
                grid_peaks(&xs, &ys).into_iter().max_by(|a, b| a.3.total_cmp(&b.3))
            }
            Some(w0) => follow(&f, w0, ceiling, opts.step),
        };
        let Some((a, _, b, _)) = found.filter(|p| p.3 > opts.noise_floor) else {
            trace.warning = Some(format!("branch lost at k_par={k:e} 1/m, phi={phi}"));
            break;
        };
        let w = golden_min(&|w: f64| -f(w), a, b, opts.rel_tol);
        trace.points.push(BranchPoint {
            k_par: k,
            phi,
            omega: w,
            branch: classify(model, w),
            model: label,
        });
        prev = Some(w);
    }
    Ok(trace)
}

// Peak nearest `w0`, widening the bracket a few times if the maximum sits
// on its edge.
fn follow<F: Fn(f64) -> f64>(f: &F, w0: f64, ceiling: f64, step: f64) -> Option<(f64, f64, f64, f64)> {
    let mut s = step;
    for _ in 0..4 {
        let lo = w0 / (1.0 + s);
        let hi = (w0 * (1.0 + s)).min(ceiling);
        if hi <= lo {
            return None;
        }
        let xs = log_grid(lo, hi, 41);
        let ys: Vec<f64> = xs.iter().map(|&w| f(w)).collect();
        let best = grid_peaks(&xs, &ys)
            .into_iter()
            .min_by(|a, b| (a.1 / w0).ln().abs().total_cmp(&(b.1 / w0).ln().abs()));
        if best.is_some() {
            return best;
        }
        s *= 2.0;
    }
    None
}

/// Quasi-static surface condition `|(ε v)_z + 1|` for a surface wave along
/// `(cos φ, sin φ)`, where `v = (i cos φ, i sin φ, q)` and `vᵀεv = 0` with
/// `Re q > 0`. Equal to `|ε + 1|` for an isotropic medium.
pub fn surface_condition(model: &GyrotropicModel, omega: f64, phi: f64) -> Result<f64> {
    let e = epsilon_substrate(model, omega)?;
    let (s, c) = phi.sin_cos();
    let i = Complex64::i();
    let a = e[(2, 2)];
    let b = i * ((e[(0, 2)] + e[(2, 0)]) * c + (e[(1, 2)] + e[(2, 1)]) * s);
    let cc = -(e[(0, 0)] * c * c + (e[(0, 1)] + e[(1, 0)]) * c * s + e[(1, 1)] * s * s);
    let disc = (b * b - 4.0 * a * cc).sqrt();
    let q1 = (-b + disc) / (2.0 * a);
    let q2 = (-b - disc) / (2.0 * a);
    let q = if q1.re >= q2.re { q1 } else { q2 };
    Ok((i * (e[(2, 0)] * c + e[(2, 1)] * s) + a * q + 1.0).norm())
}

/// Large-`k∥` branch frequencies: minima of [`surface_condition`] at the
/// four principal in-plane directions.
pub fn surface_asymptotes(model: &GyrotropicModel) -> Result<Vec<f64>> {
    model.validate()?;
    let top = model
        .phonon_terms
        .iter()
        .map(|p| p.resonance)
        .fold(model.plasma_freq / model.eps_inf.abs().max(1.0).sqrt(), f64::max)
        .max(model.cyclotron_freq);
    if !(top > 0.0) {
        return Ok(Vec::new());
    }
    let (lo, hi) = (top / 100.0, top * 10.0);
    let mut out = Vec::new();
    for j in 0..4 {
        let phi = j as f64 * std::f64::consts::FRAC_PI_2;
        let h = |w: f64| surface_condition(model, w, phi).unwrap_or(f64::INFINITY);
        for (w, v) in local_minima_log(h, lo, hi, 4000) {
            let eps = epsilon_substrate(model, w)?;
            // shallow minima far from the surface condition are not modes
            if v < 0.75 * (1.0 + eps[(2, 2)].norm()) {
                out.push(w);
            }
        }
    }
    Ok(dedup_relative(out, 1e-3))
}

fn dedup_relative(mut v: Vec<f64>, rel: f64) -> Vec<f64> {
    v.sort_by(f64::total_cmp);
    v.dedup_by(|a, b| (*a - *b).abs() <= rel * b.abs());
    v
}

/// Union of the particle resonances and the substrate branch asymptotes,
/// sorted, merged within 1e-3 relative.
pub fn seed_frequencies<A: DipoleResponse + ?Sized>(substrate: &Substrate, particle: &A) -> Result<Vec<f64>> {
    let mut seeds = particle.resonances();
    seeds.extend(surface_asymptotes(substrate.local_model())?);
    Ok(dedup_relative(seeds, 1e-3))
}
