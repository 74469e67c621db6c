//! Adaptive integration over the plane-wave channels `(k∥, φ)` and over
//! frequency.
//!
//! The `k∥` axis is split at the light line. Below it `k∥ = k0 sinθ`, above
//! it `k∥ = k0 cosh u`; both Jacobians equal `|k_z|` and absorb the
//! `1/k_z` edge. Each side is integrated by globally adaptive
//! Gauss-Kronrod (7/15) panels along a fixed azimuth, and the azimuths
//! are combined by the periodic trapezoid rule.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fresnel::ModeCoords;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QuadConfig {
    pub rel_tol: f64,
    /// Absolute floor on each component, in the component's own units.
    pub abs_tol: f64,
    /// `k∥` cutoff in units of `1/d`.
    pub k_par_max_factor: f64,
    pub max_subdivisions: usize,
    /// Initial number of trapezoid points in `φ` (even).
    pub phi_order: usize,
}

impl Default for QuadConfig {
    fn default() -> Self {
        QuadConfig {
            rel_tol: 1e-5,
            abs_tol: 1e-300,
            k_par_max_factor: 40.0,
            max_subdivisions: 400,
            phi_order: 64,
        }
    }
}

impl QuadConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.rel_tol > 0.0) {
            return Err(Error::config("quadrature.rel_tol", "must be > 0"));
        }
        if !(self.abs_tol > 0.0) {
            return Err(Error::config("quadrature.abs_tol", "must be > 0"));
        }
        if !(self.k_par_max_factor >= 10.0) {
            return Err(Error::config("quadrature.k_par_max_factor", "must be >= 10"));
        }
        if self.max_subdivisions == 0 {
            return Err(Error::config("quadrature.max_subdivisions", "must be >= 1"));
        }
        if self.phi_order < 16 || !self.phi_order.is_multiple_of(2) {
            return Err(Error::config("quadrature.phi_order", "must be even and >= 16"));
        }
        Ok(())
    }
}

/// Value, error estimate and `∫|f|` per component.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Estimate<const N: usize> {
    pub value: [f64; N],
    pub error: [f64; N],
    pub scale: [f64; N],
    pub evaluations: usize,
}

/// Frequency integral plus a bound on what lies outside the window.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OmegaEstimate<const N: usize> {
    pub value: [f64; N],
    pub error: [f64; N],
    pub scale: [f64; N],
    pub tail: [f64; N],
    pub evaluations: usize,
}

// Gauss-Kronrod 7/15 abscissae and weights on [-1, 1], tabulated digits.
#[allow(clippy::excessive_precision)]
const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
];
#[allow(clippy::excessive_precision)]
const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];
#[allow(clippy::excessive_precision)]
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

/// Nodes of the 15-point rule on `[a, b]`, Kronrod order.
fn gk_nodes(a: f64, b: f64) -> [f64; 15] {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let mut x = [c; 15];
    for j in 0..7 {
        x[2 * j] = c - h * XGK[j];
        x[2 * j + 1] = c + h * XGK[j];
    }
    x
}

#[derive(Clone, Copy)]
struct Panel<const N: usize> {
    a: f64,
    b: f64,
    region: u8,
    value: [f64; N],
    /// Rule error plus propagated integrand error.
    error: [f64; N],
    /// Rule error alone.
    rule: [f64; N],
    scale: [f64; N],
}

/// Combine 15 node values (in [`gk_nodes`] order) into a panel, adding the
/// per-node inner errors weighted by the Kronrod weights.
fn gk_panel<const N: usize>(a: f64, b: f64, region: u8, f: &[[f64; N]; 15], inner: &[[f64; N]; 15], abs: &[[f64; N]; 15]) -> Panel<N> {
    let h = 0.5 * (b - a);
    let w = |j: usize| if j == 14 { WGK[7] } else { WGK[j / 2] };
    let mut value = [0.0; N];
    let mut error = [0.0; N];
    let mut rule = [0.0; N];
    let mut scale = [0.0; N];
    for i in 0..N {
        let mut kron = 0.0;
        let mut gauss = 0.0;
        let mut resabs = 0.0;
        let mut inner_err = 0.0;
        for j in 0..15 {
            kron += w(j) * f[j][i];
            resabs += w(j) * abs[j][i];
            inner_err += w(j) * inner[j][i];
            // Gauss nodes are the odd-indexed Kronrod abscissae
            if j < 14 && (j / 2) % 2 == 1 {
                gauss += WG[j / 4] * f[j][i];
            }
        }
        gauss += WG[3] * f[14][i];
        let mean = 0.5 * kron;
        let mut resasc = 0.0;
        for (j, fj) in f.iter().enumerate() {
            resasc += w(j) * (fj[i] - mean).abs();
        }
        let mut err = ((kron - gauss) * h).abs();
        let asc = resasc * h.abs();
        if asc != 0.0 && err != 0.0 {
            err = asc * (200.0 * err / asc).powf(1.5).min(1.0);
        }
        value[i] = kron * h;
        rule[i] = err;
        error[i] = err + inner_err * h.abs();
        scale[i] = resabs * h.abs();
    }
    Panel {
        a,
        b,
        region,
        value,
        error,
        rule,
        scale,
    }
}

fn pairwise<T>(items: &[T], f: &impl Fn(&T) -> f64) -> f64 {
    if items.len() <= 8 {
        return items.iter().map(f).sum();
    }
    let (l, r) = items.split_at(items.len() / 2);
    pairwise(l, f) + pairwise(r, f)
}

/// Which components drive refinement and how tolerances are shared.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Control<const N: usize> {
    /// Components `0..controlled` drive refinement; the rest are carried.
    pub controlled: usize,
    /// Components with equal group ids share the largest `∫|f|` in the
    /// group as tolerance scale, so a component that vanishes by symmetry
    /// is judged against its nonzero siblings rather than its own noise.
    pub groups: [usize; N],
}

impl<const N: usize> Control<N> {
    pub fn all() -> Self {
        let mut groups = [0; N];
        for (i, g) in groups.iter_mut().enumerate() {
            *g = i;
        }
        Control { controlled: N, groups }
    }

    /// Per-component tolerance for the given `∫|f|` scales.
    fn tolerances(&self, scale: &[f64; N], rel_tol: f64, abs_tol: f64) -> [f64; N] {
        std::array::from_fn(|i| {
            let group = (0..N).filter(|&j| self.groups[j] == self.groups[i]).map(|j| scale[j]).fold(0.0, f64::max);
            abs_tol.max(rel_tol * group)
        })
    }
}

struct Adaptive<const N: usize> {
    panels: Vec<Panel<N>>,
    control: Control<N>,
    rel_tol: f64,
    abs_tol: f64,
}

impl<const N: usize> Adaptive<N> {
    fn totals(&self) -> ([f64; N], [f64; N], [f64; N]) {
        let mut v = [0.0; N];
        let mut e = [0.0; N];
        let mut s = [0.0; N];
        for i in 0..N {
            v[i] = pairwise(&self.panels, &|p: &Panel<N>| p.value[i]);
            e[i] = pairwise(&self.panels, &|p: &Panel<N>| p.error[i]);
            s[i] = pairwise(&self.panels, &|p: &Panel<N>| p.scale[i]);
        }
        (v, e, s)
    }

    /// Worst controlled component as `(index, rule error / tolerance)`.
    /// Refinement cannot beat the accuracy of the integrand itself, so the
    /// propagated integrand error also acts as a floor.
    fn worst(&self) -> (usize, f64) {
        let (_, e, s) = self.totals();
        let tol = self.control.tolerances(&s, self.rel_tol, self.abs_tol);
        (0..self.control.controlled)
            .map(|i| {
                let rule = pairwise(&self.panels, &|p: &Panel<N>| p.rule[i]);
                let floor = tol[i].max(e[i] - rule);
                (i, rule / floor)
            })
            .fold((0, 0.0), |acc, x| if x.1 > acc.1 { x } else { acc })
    }

    /// Totals with each error raised to at least its tolerance: a converged
    /// component is only known to that accuracy.
    fn finish(&self) -> ([f64; N], [f64; N], [f64; N]) {
        let (v, mut e, s) = self.totals();
        let tol = self.control.tolerances(&s, self.rel_tol, self.abs_tol);
        for i in 0..self.control.controlled {
            e[i] = e[i].max(tol[i]);
        }
        (v, e, s)
    }

    fn bisect_target(&self, comp: usize) -> usize {
        let mut best = 0;
        for (k, p) in self.panels.iter().enumerate() {
            if p.rule[comp] > self.panels[best].rule[comp] {
                best = k;
            }
        }
        best
    }

    /// Refine until every controlled component meets its tolerance.
    fn run(&mut self, max_subdivisions: usize, mut eval: impl FnMut(f64, f64, u8) -> Result<[Panel<N>; 2]>) -> Result<usize> {
        let mut splits = 0;
        loop {
            let (comp, ratio) = self.worst();
            if ratio <= 1.0 {
                return Ok(splits);
            }
            if splits >= max_subdivisions {
                let (v, e, s) = self.totals();
                return Err(Error::NonConvergence {
                    achieved: e[comp] / s[comp].max(f64::MIN_POSITIVE),
                    requested: self.rel_tol,
                    partial: v[comp],
                });
            }
            let k = self.bisect_target(comp);
            let p = self.panels.remove(k);
            let mid = 0.5 * (p.a + p.b);
            if !(mid > p.a && mid < p.b) {
                // panel cannot be split further; accept its error
                let (v, e, s) = self.totals();
                let e = e[comp] + p.error[comp];
                return Err(Error::NonConvergence {
                    achieved: e / s[comp].max(f64::MIN_POSITIVE),
                    requested: self.rel_tol,
                    partial: v[comp] + p.value[comp],
                });
            }
            let [l, r] = eval(p.a, p.b, p.region)?;
            // panels stay ordered along the axis so summation is reproducible
            self.panels.insert(k, r);
            self.panels.insert(k, l);
            splits += 1;
        }
    }
}

/// Mode at `k∥ = k0 sinθ` (region 0) or `k∥ = k0 cosh u` (region 1), and
/// the Jacobian `dk∥/dt`.
fn mode_at(omega: f64, k0: f64, phi: f64, region: u8, t: f64) -> (ModeCoords, f64) {
    if region == 0 {
        let (s, c) = t.sin_cos();
        let m = ModeCoords {
            omega,
            k_par: k0 * s,
            phi,
            k0,
            k_z: Complex64::new(k0 * c, 0.0),
        };
        (m, k0 * c)
    } else {
        let sh = t.sinh();
        let m = ModeCoords {
            omega,
            k_par: k0 * t.cosh(),
            phi,
            k0,
            k_z: Complex64::new(0.0, k0 * sh),
        };
        (m, k0 * sh)
    }
}

/// Value, error, `∫|f|` and evaluation count of one `k∥` line.
type LineEstimate<const N: usize> = ([f64; N], [f64; N], [f64; N], usize);

/// Adaptive `∫ dk∥` along one azimuth. Returns value, error, `∫|f|` and
/// the number of evaluations.
fn integrate_k_line<const N: usize, F>(f: &F, omega: f64, d: f64, phi: f64, cfg: &QuadConfig, control: &Control<N>) -> Result<LineEstimate<N>>
where
    F: Fn(&ModeCoords) -> Result<[f64; N]>,
{
    let k0 = omega / crate::constants::C_LIGHT;
    let k_max = cfg.k_par_max_factor / d;
    let panel = |a: f64, b: f64, region: u8| -> Result<Panel<N>> {
        let mut vals = [[0.0; N]; 15];
        let mut abs = [[0.0; N]; 15];
        for (j, &t) in gk_nodes(a, b).iter().enumerate() {
            let (m, jac) = mode_at(omega, k0, phi, region, t);
            let v = f(&m)?;
            for i in 0..N {
                vals[j][i] = v[i] * jac;
                abs[j][i] = vals[j][i].abs();
            }
        }
        Ok(gk_panel(a, b, region, &vals, &[[0.0; N]; 15], &abs))
    };
    let half_pi = std::f64::consts::FRAC_PI_2;
    let mut initial = vec![(0.0, 0.5 * half_pi, 0u8), (0.5 * half_pi, half_pi, 0u8)];
    if k_max > k0 {
        let u_max = (k_max / k0).acosh();
        let pieces = 8;
        for j in 0..pieces {
            let a = u_max * j as f64 / pieces as f64;
            let b = u_max * (j + 1) as f64 / pieces as f64;
            initial.push((a, b, 1u8));
        }
    }
    let mut panels = Vec::with_capacity(initial.len());
    for &(a, b, r) in &initial {
        panels.push(panel(a, b, r)?);
    }
    let mut evaluations = 15 * initial.len();
    let mut state = Adaptive {
        panels,
        control: *control,
        rel_tol: 0.5 * cfg.rel_tol,
        abs_tol: cfg.abs_tol,
    };
    state.run(cfg.max_subdivisions, |a, b, region| {
        let mid = 0.5 * (a + b);
        evaluations += 30;
        Ok([panel(a, mid, region)?, panel(mid, b, region)?])
    })?;
    let (v, e, s) = state.finish();
    Ok((v, e, s, evaluations))
}

/// `∫₀^{k_max} dk∥ ∫₀^{2π} dφ f(ω, k∥, φ)` with `k_max = k_par_max_factor / d`.
pub fn integrate_kphi<const N: usize, F>(integrand: F, omega: f64, d: f64, cfg: &QuadConfig) -> Result<Estimate<N>>
where
    F: Fn(&ModeCoords) -> Result<[f64; N]> + Sync,
{
    integrate_kphi_with(integrand, omega, d, cfg, &Control::all())
}

/// As [`integrate_kphi`] under an explicit [`Control`].
///
/// The `φ` integral is the outer one: the trapezoid rule over azimuths,
/// each holding an adaptive `k∥` integral, doubled until the rule on every
/// other azimuth agrees. A surface-polariton ridge `k∥ = k_sp(φ)` is then
/// resolved along `k∥`, where it is sharp, while its `k∥`-integrated weight
/// varies smoothly with `φ`.
pub fn integrate_kphi_with<const N: usize, F>(integrand: F, omega: f64, d: f64, cfg: &QuadConfig, control: &Control<N>) -> Result<Estimate<N>>
where
    F: Fn(&ModeCoords) -> Result<[f64; N]> + Sync,
{
    cfg.validate()?;
    if !(omega > 0.0) {
        return Err(Error::config("omega", "must be > 0"));
    }
    if !(d > 0.0) {
        return Err(Error::config("d", "must be > 0"));
    }
    let controlled = control.controlled.min(N);
    let tau = std::f64::consts::TAU;
    let lines = |phis: Vec<f64>| -> Result<Vec<LineEstimate<N>>> {
        phis.par_iter()
            .map(|&phi| integrate_k_line(&integrand, omega, d, phi, cfg, control))
            .collect()
    };

    let mut n = cfg.phi_order;
    let mut sum = [0.0; N];
    let mut sum_abs = [0.0; N];
    let mut sum_err = [0.0; N];
    let mut coarse = [0.0; N];
    let mut evaluations = 0;
    let first = lines((0..n).map(|j| tau * j as f64 / n as f64).collect())?;
    for (j, (v, e, s, k)) in first.into_iter().enumerate() {
        for i in 0..N {
            sum[i] += v[i];
            sum_abs[i] += s[i];
            sum_err[i] += e[i];
            if j % 2 == 0 {
                coarse[i] += v[i];
            }
        }
        evaluations += k;
    }
    let cap = cfg.phi_order * 64;
    loop {
        let h = tau / n as f64;
        let mut rule = [0.0; N];
        let mut worst = (0, 0.0);
        let tol = control.tolerances(&sum_abs.map(|x| x * h), cfg.rel_tol, cfg.abs_tol);
        for i in 0..N {
            rule[i] = (sum[i] - 2.0 * coarse[i]).abs() * h;
            if i < controlled {
                let floor = tol[i].max(sum_err[i] * h);
                if rule[i] / floor > worst.1 {
                    worst = (i, rule[i] / floor);
                }
            }
        }
        if worst.1 <= 1.0 || n >= cap {
            let value = sum.map(|x| x * h);
            let mut error = [0.0; N];
            for i in 0..N {
                error[i] = rule[i] + sum_err[i] * h;
                if i < controlled {
                    error[i] = error[i].max(tol[i]);
                }
            }
            if worst.1 > 1.0 {
                let i = worst.0;
                return Err(Error::NonConvergence {
                    achieved: error[i] / (sum_abs[i] * h).max(f64::MIN_POSITIVE),
                    requested: cfg.rel_tol,
                    partial: value[i],
                });
            }
            return Ok(Estimate {
                value,
                error,
                scale: sum_abs.map(|x| x * h),
                evaluations,
            });
        }
        // the full set becomes the coarse rule; add the midpoints
        coarse = sum;
        let mids = lines((0..n).map(|j| tau * (j as f64 + 0.5) / n as f64).collect())?;
        for (v, e, s, k) in mids {
            for i in 0..N {
                sum[i] += v[i];
                sum_abs[i] += s[i];
                sum_err[i] += e[i];
            }
            evaluations += k;
        }
        n *= 2;
    }
}

/// `∫ density(ω) dω` over `window`, with breakpoints at `seeds`. Panels
/// wider than a factor of 4 in `ω` are split geometrically before
/// refinement starts. The tail bound assumes the density vanishes at
/// least linearly below the window and faster than `1/ω²` above it.
pub fn integrate_omega<const N: usize, F>(density: F, window: (f64, f64), seeds: &[f64], cfg: &QuadConfig) -> Result<OmegaEstimate<N>>
where
    F: Fn(f64) -> Result<[f64; N]> + Sync,
{
    integrate_omega_with(|w| Ok((density(w)?, [0.0; N])), window, seeds, cfg, &Control::all())
}

/// As [`integrate_omega`] for a density that carries its own error
/// estimate. Those errors are integrated into the result, bound how far
/// refinement is pushed, and are discounted from the tail bound.
pub fn integrate_omega_with<const N: usize, F>(density: F, window: (f64, f64), seeds: &[f64], cfg: &QuadConfig, control: &Control<N>) -> Result<OmegaEstimate<N>>
where
    F: Fn(f64) -> Result<([f64; N], [f64; N])> + Sync,
{
    cfg.validate()?;
    let (lo, hi) = window;
    if !(lo > 0.0 && hi > lo && hi.is_finite()) {
        return Err(Error::config("omega_window", "must satisfy 0 < lo < hi < inf"));
    }
    let mut breaks: Vec<f64> = vec![lo, hi];
    breaks.extend(seeds.iter().copied().filter(|&s| s > lo && s < hi));
    breaks.sort_by(f64::total_cmp);
    breaks.dedup_by(|a, b| (*a - *b).abs() <= 1e-9 * b.abs());
    let mut intervals = Vec::new();
    for w in breaks.windows(2) {
        let (a, b) = (w[0], w[1]);
        let pieces = ((b / a).ln() / 4f64.ln()).ceil().max(1.0) as usize;
        let ratio = (b / a).powf(1.0 / pieces as f64);
        let mut x = a;
        for j in 0..pieces {
            let y = if j + 1 == pieces { b } else { x * ratio };
            intervals.push((x, y));
            x = y;
        }
    }

    let panel = |a: f64, b: f64| -> Result<Panel<N>> {
        let nodes = gk_nodes(a, b);
        let results: Vec<Result<([f64; N], [f64; N])>> = nodes.par_iter().map(|&w| density(w)).collect();
        let mut f = [[0.0; N]; 15];
        let mut inner = [[0.0; N]; 15];
        let mut abs = [[0.0; N]; 15];
        for (j, r) in results.into_iter().enumerate() {
            let (v, e) = r?;
            f[j] = v;
            inner[j] = e;
            for i in 0..N {
                abs[j][i] = v[i].abs();
            }
        }
        Ok(gk_panel(a, b, 0, &f, &inner, &abs))
    };

    let mut evaluations = 0;
    let mut panels = Vec::with_capacity(intervals.len());
    for &(a, b) in &intervals {
        panels.push(panel(a, b)?);
        evaluations += 15;
    }
    let mut state = Adaptive {
        panels,
        control: *control,
        rel_tol: cfg.rel_tol,
        abs_tol: cfg.abs_tol,
    };
    state.run(cfg.max_subdivisions, |a, b, _| {
        let mid = 0.5 * (a + b);
        evaluations += 30;
        Ok([panel(a, mid)?, panel(mid, b)?])
    })?;
    let (value, error, scale) = state.finish();
    let (q_lo, e_lo) = density(lo)?;
    let (q_hi, e_hi) = density(hi)?;
    evaluations += 2;
    let mut tail = [0.0; N];
    for i in 0..N {
        tail[i] = (q_lo[i].abs() - e_lo[i]).max(0.0) * lo + (q_hi[i].abs() - e_hi[i]).max(0.0) * hi;
    }
    Ok(OmegaEstimate {
        value,
        error,
        scale,
        tail,
        evaluations,
    })
}

#[cfg(test)]
mod tests;
