//! Frequency-dependent material response.
//!
//! The substrate is a magnetized free-carrier plasma on top of a polar
//! lattice (Lorentz phonon terms). Its permittivity is a full 3×3 tensor
//! whose gyrotropy axis follows the static field. Particles are isotropic
//! Lorentz-oscillator dielectrics described by a Clausius–Mossotti
//! polarizability.
//!
//! Time dependence is `exp(-iωt)`, so passive media have `Im ε > 0`.

mod db;

pub use db::{default_db, load_material_db, MaterialDb};

use nalgebra::{Matrix3, Vector3};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::constants::{EPS_0, E_CHARGE, HBAR, M_ELECTRON};
use crate::error::{Error, Result};

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// One Lorentz oscillator `S ω₀² / (ω₀² − ω² − iγω)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Lorentz {
    /// Dimensionless oscillator strength `S`.
    pub strength: f64,
    /// Resonance `ω₀`, rad/s.
    pub resonance: f64,
    /// Damping `γ`, rad/s.
    pub damping: f64,
}

impl Lorentz {
    pub fn response(&self, omega: f64) -> Complex64 {
        let w0 = self.resonance;
        self.strength * w0 * w0
            / Complex64::new(w0 * w0 - omega * omega, -self.damping * omega)
    }

    fn validate(&self, path: &str) -> Result<()> {
        if !(self.strength >= 0.0 && self.strength.is_finite()) {
            return Err(Error::config(format!("{path}.strength"), "must be finite and >= 0"));
        }
        if !(self.resonance > 0.0 && self.resonance.is_finite()) {
            return Err(Error::config(format!("{path}.resonance"), "must be finite and > 0"));
        }
        if !(self.damping >= 0.0 && self.damping.is_finite()) {
            return Err(Error::config(format!("{path}.damping"), "must be finite and >= 0"));
        }
        Ok(())
    }
}

/// Sign of the free carriers' charge.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Carrier {
    #[default]
    Electron,
    Hole,
}

impl Carrier {
    pub fn sign(self) -> f64 {
        match self {
            Carrier::Electron => -1.0,
            Carrier::Hole => 1.0,
        }
    }
}

/// Local magneto-optical substrate model: magnetized Drude carriers plus
/// Lorentz phonons on a constant background.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GyrotropicModel {
    pub eps_inf: f64,
    /// Unscreened plasma frequency, rad/s.
    pub plasma_freq: f64,
    pub drude_damping: f64,
    /// `|q|B/m*`, rad/s.
    pub cyclotron_freq: f64,
    pub phonon_terms: Vec<Lorentz>,
    /// Unit vector along the static magnetic field.
    pub b_direction: [f64; 3],
    #[serde(default)]
    pub carrier: Carrier,
}

impl GyrotropicModel {
    /// Isotropic, field-free model.
    pub fn isotropic(eps_inf: f64, plasma_freq: f64, drude_damping: f64, phonon_terms: Vec<Lorentz>) -> Self {
        GyrotropicModel {
            eps_inf,
            plasma_freq,
            drude_damping,
            cyclotron_freq: 0.0,
            phonon_terms,
            b_direction: [1.0, 0.0, 0.0],
            carrier: Carrier::Electron,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let finite_nonneg = |v: f64, name: &str| -> Result<()> {
            if v.is_finite() && v >= 0.0 {
                Ok(())
            } else {
                Err(Error::config(name, "must be finite and >= 0"))
            }
        };
        if !self.eps_inf.is_finite() {
            return Err(Error::config("eps_inf", "must be finite"));
        }
        finite_nonneg(self.plasma_freq, "plasma_freq")?;
        finite_nonneg(self.drude_damping, "drude_damping")?;
        finite_nonneg(self.cyclotron_freq, "cyclotron_freq")?;
        for (i, p) in self.phonon_terms.iter().enumerate() {
            p.validate(&format!("phonon_terms[{i}]"))?;
        }
        let b = self.b_direction;
        let norm = (b[0] * b[0] + b[1] * b[1] + b[2] * b[2]).sqrt();
        if (norm - 1.0).abs() > 1e-12 {
            return Err(Error::config(
                "b_direction",
                format!("must have unit norm (got {norm})"),
            ));
        }
        Ok(())
    }

    /// Same model with the field reversed.
    pub fn reversed_field(&self) -> Self {
        let mut m = self.clone();
        m.b_direction = [-m.b_direction[0], -m.b_direction[1], -m.b_direction[2]];
        m
    }

    /// Lattice part: `ε∞ + Σ phonons` (scalar, local).
    pub fn background(&self, omega: f64) -> Complex64 {
        self.phonon_terms
            .iter()
            .fold(Complex64::new(self.eps_inf, 0.0), |acc, p| acc + p.response(omega))
    }

    /// Free-carrier momentum-relaxation operator divided by ω:
    /// `[(γ − iω) I + s ω_c [b×]] / ω`, where `[b×] v = b × v`.
    pub(crate) fn carrier_operator(&self, omega: f64) -> Matrix3<Complex64> {
        let nu = Complex64::new(self.drude_damping, -omega) / omega;
        let a = self.carrier.sign() * self.cyclotron_freq / omega;
        let b = self.b_direction;
        let cross = Matrix3::new(0.0, -b[2], b[1], b[2], 0.0, -b[0], -b[1], b[0], 0.0);
        Matrix3::from_diagonal_element(nu) + cross.map(|v| Complex64::new(a * v, 0.0))
    }

    /// Full permittivity tensor for any nonzero real frequency; negative
    /// frequencies give the analytic continuation `ε(−ω) = ε(ω)*`.
    pub(crate) fn tensor_at(&self, omega: f64) -> Matrix3<Complex64> {
        let bg = self.background(omega);
        let nu = Complex64::new(self.drude_damping, -omega);
        let a = self.carrier.sign() * self.cyclotron_freq;
        let den = nu * nu + a * a;
        // A⁻¹ = α I + β [b×] + δ b bᵀ
        let alpha = nu / den;
        let beta = -a / den;
        let delta = a * a / (nu * den);
        let b = Vector3::from(self.b_direction);
        let cross = Matrix3::new(0.0, -b[2], b[1], b[2], 0.0, -b[0], -b[1], b[0], 0.0);
        let outer = b * b.transpose();
        let pref = I * self.plasma_freq * self.plasma_freq / omega;
        let mut eps = Matrix3::from_diagonal_element(bg);
        for r in 0..3 {
            for c in 0..3 {
                let mut inv = beta * cross[(r, c)] + delta * outer[(r, c)];
                if r == c {
                    inv += alpha;
                }
                eps[(r, c)] += pref * inv;
            }
        }
        eps
    }
}

/// Hydrodynamic (nonlocal) extension of [`GyrotropicModel`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HydrodynamicModel {
    pub local: GyrotropicModel,
    /// Nonlocal velocity parameter β, m/s.
    pub beta: f64,
}

impl HydrodynamicModel {
    pub fn validate(&self) -> Result<()> {
        self.local.validate()?;
        if !(self.beta.is_finite() && self.beta >= 0.0) {
            return Err(Error::config("beta", "must be finite and >= 0"));
        }
        Ok(())
    }
}

/// Substrate material as stored in the database: carrier and lattice
/// parameters from which field-dependent models are derived.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SubstrateMaterial {
    pub eps_inf: f64,
    /// Free-carrier density, m⁻³.
    pub carrier_density: f64,
    /// Effective mass in units of the electron mass.
    pub effective_mass: f64,
    pub drude_damping: f64,
    #[serde(default)]
    pub phonon_terms: Vec<Lorentz>,
    /// Hydrodynamic β, m/s. Defaults to `sqrt(3/5)·v_F`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(default)]
    pub carrier: Carrier,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl SubstrateMaterial {
    pub fn validate(&self, path: &str) -> Result<()> {
        let check = |v: f64, name: &str, strict: bool| -> Result<()> {
            let ok = v.is_finite() && if strict { v > 0.0 } else { v >= 0.0 };
            if ok {
                Ok(())
            } else {
                Err(Error::config(
                    format!("{path}.{name}"),
                    if strict { "must be finite and > 0" } else { "must be finite and >= 0" },
                ))
            }
        };
        if !self.eps_inf.is_finite() {
            return Err(Error::config(format!("{path}.eps_inf"), "must be finite"));
        }
        check(self.carrier_density, "carrier_density", false)?;
        check(self.effective_mass, "effective_mass", true)?;
        check(self.drude_damping, "drude_damping", false)?;
        if let Some(b) = self.beta {
            check(b, "beta", false)?;
        }
        for (i, p) in self.phonon_terms.iter().enumerate() {
            p.validate(&format!("{path}.phonon_terms[{i}]"))?;
        }
        Ok(())
    }

    fn mass_kg(&self) -> f64 {
        self.effective_mass * M_ELECTRON
    }

    pub fn plasma_freq(&self) -> f64 {
        (self.carrier_density * E_CHARGE * E_CHARGE / (self.mass_kg() * EPS_0)).sqrt()
    }

    /// `|e|B/m*` for a field magnitude in tesla.
    pub fn cyclotron_freq(&self, b_tesla: f64) -> f64 {
        E_CHARGE * b_tesla.abs() / self.mass_kg()
    }

    pub fn fermi_velocity(&self) -> f64 {
        HBAR * (3.0 * std::f64::consts::PI.powi(2) * self.carrier_density).cbrt() / self.mass_kg()
    }

    pub fn beta(&self) -> f64 {
        self.beta.unwrap_or_else(|| (0.6f64).sqrt() * self.fermi_velocity())
    }

    /// Local model in a static field `b_field` (tesla, lab axes).
    pub fn gyrotropic(&self, b_field: [f64; 3]) -> Result<GyrotropicModel> {
        self.validate("substrate")?;
        let mag = (b_field[0].powi(2) + b_field[1].powi(2) + b_field[2].powi(2)).sqrt();
        if !mag.is_finite() {
            return Err(Error::config("b_field", "must be finite"));
        }
        let b_direction = if mag > 0.0 {
            [b_field[0] / mag, b_field[1] / mag, b_field[2] / mag]
        } else {
            [1.0, 0.0, 0.0]
        };
        let model = GyrotropicModel {
            eps_inf: self.eps_inf,
            plasma_freq: self.plasma_freq(),
            drude_damping: self.drude_damping,
            cyclotron_freq: self.cyclotron_freq(mag),
            phonon_terms: self.phonon_terms.clone(),
            b_direction,
            carrier: self.carrier,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn hydrodynamic(&self, b_field: [f64; 3]) -> Result<HydrodynamicModel> {
        Ok(HydrodynamicModel {
            local: self.gyrotropic(b_field)?,
            beta: self.beta(),
        })
    }
}

/// Isotropic spherical particle with a Lorentz-oscillator permittivity.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParticleSpec {
    /// Radius, m.
    pub radius: f64,
    pub eps_inf: f64,
    #[serde(default)]
    pub oscillators: Vec<Lorentz>,
    /// kg/m³.
    pub mass_density: f64,
    /// K.
    pub temperature: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl ParticleSpec {
    pub fn validate(&self, path: &str) -> Result<()> {
        if !(self.radius > 0.0 && self.radius.is_finite()) {
            return Err(Error::config(format!("{path}.radius"), "must be finite and > 0"));
        }
        if !(self.mass_density > 0.0 && self.mass_density.is_finite()) {
            return Err(Error::config(format!("{path}.mass_density"), "must be finite and > 0"));
        }
        if !(self.temperature >= 0.0 && self.temperature.is_finite()) {
            return Err(Error::config(format!("{path}.temperature"), "must be finite and >= 0"));
        }
        if !self.eps_inf.is_finite() {
            return Err(Error::config(format!("{path}.eps_inf"), "must be finite"));
        }
        for (i, o) in self.oscillators.iter().enumerate() {
            o.validate(&format!("{path}.oscillators[{i}]"))?;
        }
        Ok(())
    }

    pub fn volume(&self) -> f64 {
        4.0 / 3.0 * std::f64::consts::PI * self.radius.powi(3)
    }

    pub fn mass(&self) -> f64 {
        self.volume() * self.mass_density
    }
}

fn check_omega(omega: f64) -> Result<()> {
    if omega > 0.0 && omega.is_finite() {
        Ok(())
    } else {
        Err(Error::config("omega", format!("must be finite and > 0 (got {omega})")))
    }
}

/// Substrate permittivity tensor in lab axes.
pub fn epsilon_substrate(model: &GyrotropicModel, omega: f64) -> Result<Matrix3<Complex64>> {
    check_omega(omega)?;
    model.validate()?;
    Ok(model.tensor_at(omega))
}

pub(crate) fn particle_eps_at(spec: &ParticleSpec, omega: f64) -> Complex64 {
    spec.oscillators
        .iter()
        .fold(Complex64::new(spec.eps_inf, 0.0), |acc, o| acc + o.response(omega))
}

pub fn epsilon_particle(spec: &ParticleSpec, omega: f64) -> Result<Complex64> {
    check_omega(omega)?;
    Ok(particle_eps_at(spec, omega))
}

/// Clausius–Mossotti `α = 4πR³ (ε − 1)/(ε + 2)`, m³.
pub fn clausius_mossotti(radius: f64, eps: Complex64, omega: f64) -> Result<Complex64> {
    let den = eps + 2.0;
    if den.norm() < 1e-12 {
        return Err(Error::ResonanceSingularity { omega });
    }
    Ok(4.0 * std::f64::consts::PI * radius.powi(3) * (eps - 1.0) / den)
}

pub fn polarizability(spec: &ParticleSpec, omega: f64) -> Result<Complex64> {
    let eps = epsilon_particle(spec, omega)?;
    clausius_mossotti(spec.radius, eps, omega)
}

/// Anything that can act as the isotropic dipolar particle in the
/// spectral formulas.
pub trait DipoleResponse: Sync {
    fn polarizability(&self, omega: f64) -> Result<Complex64>;

    /// Frequencies where `Im α` peaks (grid seeds), rad/s.
    fn resonances(&self) -> Vec<f64> {
        Vec::new()
    }
}

impl DipoleResponse for ParticleSpec {
    fn polarizability(&self, omega: f64) -> Result<Complex64> {
        polarizability(self, omega)
    }

    fn resonances(&self) -> Vec<f64> {
        frohlich_frequencies(self)
    }
}

/// Frequency-independent polarizability, as used for kernel-shape plots.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FixedPolarizability(pub Complex64);

impl DipoleResponse for FixedPolarizability {
    fn polarizability(&self, _omega: f64) -> Result<Complex64> {
        Ok(self.0)
    }
}

/// Local minima of `|ε(ω) + 2|`: the dipolar (Fröhlich) resonances of
/// the sphere, one per oscillator band.
pub fn frohlich_frequencies(spec: &ParticleSpec) -> Vec<f64> {
    let Some(lo) = spec.oscillators.iter().map(|o| o.resonance).reduce(f64::min) else {
        return Vec::new();
    };
    let hi = spec.oscillators.iter().map(|o| o.resonance).fold(lo, f64::max);
    let f = |w: f64| (particle_eps_at(spec, w) + 2.0).norm();
    crate::numeric::local_minima_log(f, 0.5 * lo, 6.0 * hi, 4000)
        .into_iter()
        .filter(|&(_, v)| v < 1.0)
        .map(|(w, _)| w)
        .collect()
}
