//! Rotational dynamics of the levitated particle about `x`: gas damping,
//! steady state, and Euler–Maruyama Langevin ensembles.
//!
//! Trajectory `j` draws its noise from `ChaCha8Rng::seed_from_u64(seed)`
//! on stream `j`, so ensembles are reproducible independently of the
//! thread count.

use std::io::Write;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::constants::{G_STANDARD, K_B, PA_PER_TORR};
use crate::error::{Error, Result};
use crate::materials::ParticleSpec;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GasEnvironment {
    /// Pa.
    pub pressure: f64,
    /// Mean molecular mass, kg.
    pub molecule_mass: f64,
    /// K.
    pub temperature: f64,
}

impl Default for GasEnvironment {
    fn default() -> Self {
        GasEnvironment {
            pressure: 1e-5 * PA_PER_TORR,
            molecule_mass: 4.8e-26,
            temperature: 300.0,
        }
    }
}

impl GasEnvironment {
    pub fn from_torr(torr: f64, molecule_mass: f64, temperature: f64) -> Self {
        GasEnvironment {
            pressure: torr * PA_PER_TORR,
            molecule_mass,
            temperature,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.pressure >= 0.0 && self.pressure.is_finite()) {
            return Err(Error::config("gas.pressure", "must be finite and >= 0"));
        }
        if !(self.molecule_mass > 0.0 && self.molecule_mass.is_finite()) {
            return Err(Error::config("gas.molecule_mass", "must be finite and > 0"));
        }
        if !(self.temperature > 0.0 && self.temperature.is_finite()) {
            return Err(Error::config("gas.temperature", "must be finite and > 0"));
        }
        Ok(())
    }
}

/// Rotational gas damping `γ = p π (2R)⁴ / 11.976 · √(2m / k_B T)`, N·m·s.
pub fn damping_coefficient(radius: f64, gas: &GasEnvironment) -> Result<f64> {
    gas.validate()?;
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(Error::config("radius", "must be finite and > 0"));
    }
    let diameter = 2.0 * radius;
    Ok(gas.pressure * std::f64::consts::PI * diameter.powi(4) / 11.976
        * (2.0 * gas.molecule_mass / (K_B * gas.temperature)).sqrt())
}

/// Solid sphere about a diameter, `(2/5) m R²`.
pub fn moment_of_inertia(spec: &ParticleSpec) -> f64 {
    0.4 * spec.mass() * spec.radius * spec.radius
}

/// `m g` with standard gravity, N.
pub fn gravity_weight(spec: &ParticleSpec) -> f64 {
    spec.mass() * G_STANDARD
}

/// `Ω_ss = M_x / γ`.
pub fn steady_state_omega(torque: f64, gamma: f64) -> Result<f64> {
    if gamma == 0.0 {
        return Err(Error::UnboundedSpin);
    }
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(Error::config("gamma", "must be finite and > 0"));
    }
    Ok(torque / gamma)
}

/// Torque as a function of the spin rate, linearly interpolated between
/// samples and held constant outside them.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TorqueCurve {
    pub omegas: Vec<f64>,
    pub torques: Vec<f64>,
}

impl TorqueCurve {
    pub fn constant(torque: f64) -> Self {
        TorqueCurve {
            omegas: vec![0.0],
            torques: vec![torque],
        }
    }

    pub fn new(omegas: Vec<f64>, torques: Vec<f64>) -> Result<Self> {
        if omegas.is_empty() || omegas.len() != torques.len() {
            return Err(Error::config("torque_curve", "needs equal, non-zero numbers of samples"));
        }
        if omegas.windows(2).any(|w| !(w[1] > w[0])) || torques.iter().chain(&omegas).any(|v| !v.is_finite()) {
            return Err(Error::config("torque_curve", "spin rates must be finite and strictly increasing"));
        }
        Ok(TorqueCurve { omegas, torques })
    }

    pub fn at(&self, omega: f64) -> f64 {
        let n = self.omegas.len();
        if omega <= self.omegas[0] {
            return self.torques[0];
        }
        if omega >= self.omegas[n - 1] {
            return self.torques[n - 1];
        }
        let j = self.omegas.partition_point(|&w| w <= omega);
        let (w0, w1) = (self.omegas[j - 1], self.omegas[j]);
        let t = (omega - w0) / (w1 - w0);
        self.torques[j - 1] * (1.0 - t) + self.torques[j] * t
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LangevinParams {
    /// kg·m².
    pub inertia: f64,
    /// N·m·s.
    pub gamma: f64,
    /// Bath temperature, K.
    pub temperature: f64,
    pub dt: f64,
    pub steps: usize,
    /// Steps discarded before stationary statistics are collected.
    pub burn_in: usize,
    pub n_trajectories: usize,
    pub seed: u64,
    #[serde(default)]
    pub initial_omega: f64,
    /// Ensemble history stride in steps; 0 keeps only the end point.
    #[serde(default)]
    pub record_every: usize,
    /// Number of trajectories whose samples are kept at `record_every`.
    #[serde(default)]
    pub keep_trajectories: usize,
}

impl LangevinParams {
    pub fn validate(&self) -> Result<()> {
        for (v, name) in [(self.inertia, "inertia"), (self.gamma, "gamma"), (self.dt, "dt")] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::config(name, "must be finite and > 0"));
            }
        }
        if !(self.temperature >= 0.0 && self.temperature.is_finite()) {
            return Err(Error::config("temperature", "must be finite and >= 0"));
        }
        if !self.initial_omega.is_finite() {
            return Err(Error::config("initial_omega", "must be finite"));
        }
        if self.n_trajectories == 0 || self.steps == 0 {
            return Err(Error::config("steps", "steps and n_trajectories must be > 0"));
        }
        if self.burn_in >= self.steps {
            return Err(Error::config("burn_in", "must be < steps"));
        }
        let limit = self.inertia / self.gamma / 100.0;
        if self.dt > limit {
            return Err(Error::StepTooLarge { dt: self.dt, limit });
        }
        Ok(())
    }
}

/// One trajectory sample.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RotorState {
    pub time: f64,
    pub omega: f64,
}

/// Ensemble statistics at one instant.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsembleState {
    pub time: f64,
    pub mean: f64,
    pub variance: f64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
struct Moments {
    n: f64,
    mean: f64,
    m2: f64,
}

impl Moments {
    fn push(&mut self, x: f64) {
        self.n += 1.0;
        let d = x - self.mean;
        self.mean += d / self.n;
        self.m2 += d * (x - self.mean);
    }

    fn merge(self, o: Moments) -> Moments {
        if o.n == 0.0 {
            return self;
        }
        if self.n == 0.0 {
            return o;
        }
        let n = self.n + o.n;
        let d = o.mean - self.mean;
        Moments {
            n,
            mean: self.mean + d * o.n / n,
            m2: self.m2 + o.m2 + d * d * self.n * o.n / n,
        }
    }

    fn variance(&self) -> f64 {
        if self.n > 1.0 {
            self.m2 / (self.n - 1.0)
        } else {
            0.0
        }
    }
}

/// Ensemble summary. Stationary statistics pool every post-burn-in step
/// of every trajectory; the half-window values are a stationarity check.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LangevinSummary {
    pub mean: f64,
    pub variance: f64,
    pub samples: f64,
    /// `½ I ⟨Ω²⟩` about the mean, J.
    pub mean_energy: f64,
    /// `k_B T / I`.
    pub expected_variance: f64,
    pub first_half_mean: f64,
    pub second_half_mean: f64,
    pub first_half_variance: f64,
    pub second_half_variance: f64,
    pub final_state: EnsembleState,
    pub history: Vec<EnsembleState>,
    #[serde(skip)]
    pub trajectories: Vec<Vec<RotorState>>,
}

impl LangevinSummary {
    pub fn save_json(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, serde_json::to_vec_pretty(self)?)?;
        Ok(())
    }

    pub fn write_trajectory_csv<W: Write>(&self, index: usize, mut out: W) -> Result<()> {
        let traj = self
            .trajectories
            .get(index)
            .ok_or_else(|| Error::config("trajectory", format!("index {index} was not kept")))?;
        writeln!(out, "time_s,omega_rad_s")?;
        for s in traj {
            writeln!(out, "{:e},{:e}", s.time, s.omega)?;
        }
        Ok(())
    }
}

struct TrajectoryOutcome {
    first: Moments,
    second: Moments,
    history: Vec<f64>,
    kept: Vec<RotorState>,
    last: f64,
}

/// Integrate `dΩ = (M(Ω)/I − γΩ/I) dt + √(2γ k_B T) / I dW` for an
/// ensemble of independent trajectories.
pub fn simulate_langevin<F>(torque: F, p: &LangevinParams) -> Result<LangevinSummary>
where
    F: Fn(f64) -> f64 + Sync,
{
    p.validate()?;
    let drift = p.gamma / p.inertia;
    let kick = (2.0 * p.gamma * K_B * p.temperature).sqrt() / p.inertia * p.dt.sqrt();
    let split = p.burn_in + (p.steps - p.burn_in) / 2;
    let outcomes: Vec<TrajectoryOutcome> = (0..p.n_trajectories)
        .into_par_iter()
        .map(|j| {
            let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
            rng.set_stream(j as u64);
            let keep = j < p.keep_trajectories && p.record_every > 0;
            let mut out = TrajectoryOutcome {
                first: Moments::default(),
                second: Moments::default(),
                history: Vec::new(),
                kept: Vec::new(),
                last: p.initial_omega,
            };
            let mut w = p.initial_omega;
            if keep {
                out.kept.push(RotorState { time: 0.0, omega: w });
            }
            for step in 1..=p.steps {
                let z: f64 = StandardNormal.sample(&mut rng);
                w += (torque(w) / p.inertia - drift * w) * p.dt + kick * z;
                if step > split {
                    out.second.push(w);
                } else if step > p.burn_in {
                    out.first.push(w);
                }
                if p.record_every > 0 && step % p.record_every == 0 {
                    out.history.push(w);
                    if keep {
                        out.kept.push(RotorState {
                            time: step as f64 * p.dt,
                            omega: w,
                        });
                    }
                }
            }
            out.last = w;
            out
        })
        .collect();

    // fixed-order reduction
    let mut first = Moments::default();
    let mut second = Moments::default();
    let mut last = Moments::default();
    let n_hist = outcomes[0].history.len();
    let mut hist = vec![Moments::default(); n_hist];
    let mut trajectories = Vec::new();
    for o in outcomes {
        first = first.merge(o.first);
        second = second.merge(o.second);
        last.push(o.last);
        for (h, &w) in hist.iter_mut().zip(&o.history) {
            h.push(w);
        }
        if !o.kept.is_empty() {
            trajectories.push(o.kept);
        }
    }
    let all = first.merge(second);
    let history = hist
        .iter()
        .enumerate()
        .map(|(i, m)| EnsembleState {
            time: ((i + 1) * p.record_every) as f64 * p.dt,
            mean: m.mean,
            variance: m.variance(),
        })
        .collect();
    Ok(LangevinSummary {
        mean: all.mean,
        variance: all.variance(),
        samples: all.n,
        mean_energy: 0.5 * p.inertia * all.variance(),
        expected_variance: K_B * p.temperature / p.inertia,
        first_half_mean: first.mean,
        second_half_mean: second.mean,
        first_half_variance: first.variance(),
        second_half_variance: second.variance(),
        final_state: EnsembleState {
            time: p.steps as f64 * p.dt,
            mean: last.mean,
            variance: last.variance(),
        },
        history,
        trajectories,
    })
}
