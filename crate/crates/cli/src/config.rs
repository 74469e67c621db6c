//! Job configuration: JSON with unit-tagged dimensioned values.

use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use fluxtorque::dispersion::ModelLabel;
use fluxtorque::fresnel::Substrate;
use fluxtorque::materials::{default_db, DipoleResponse, FixedPolarizability, MaterialDb, ParticleSpec, SubstrateMaterial};
use fluxtorque::quadrature::QuadConfig;
use fluxtorque::spectra::ThermalState;

use crate::error::CliError;
use crate::units::{round_sig, Dim, Quantity};

/// A database entry by name, optionally with field overrides.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MaterialRef {
    Name(String),
    Custom {
        name: String,
        #[serde(default, rename = "override")]
        overrides: Map<String, Value>,
    },
}

impl MaterialRef {
    fn name(&self) -> &str {
        match self {
            MaterialRef::Name(n) | MaterialRef::Custom { name: n, .. } => n,
        }
    }

    fn resolve<T: Serialize + serde::de::DeserializeOwned>(&self, base: &T, field: &str) -> Result<T, CliError> {
        let MaterialRef::Custom { overrides, .. } = self else {
            return serde_json::from_value(serde_json::to_value(base)?).map_err(CliError::from);
        };
        let mut v = serde_json::to_value(base)?;
        let obj = v.as_object_mut().expect("materials serialize to objects");
        for (k, val) in overrides {
            obj.insert(k.clone(), val.clone());
        }
        serde_json::from_value(v).map_err(|e| CliError::config(format!("{field}.override"), e.to_string()))
    }
}

/// Particle: a database entry or a frequency-independent polarizability
/// (`[Re α, Im α]` in m³).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParticleRef {
    Fixed { fixed_polarizability: [f64; 2] },
    Material(MaterialRef),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThermalConfig {
    pub t_p: Quantity,
    pub t_e: Quantity,
    #[serde(default)]
    pub fz_zero_point: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldConfig {
    pub magnitude: Quantity,
    /// Normalised on use.
    pub direction: [f64; 3],
}

impl Default for FieldConfig {
    fn default() -> Self {
        FieldConfig {
            magnitude: Quantity::si(0.0, Dim::Field),
            direction: [1.0, 0.0, 0.0],
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Spacing {
    #[default]
    Log,
    Linear,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Range {
    pub min: Quantity,
    pub max: Quantity,
    pub points: usize,
    #[serde(default)]
    pub spacing: Spacing,
}

impl Range {
    pub fn values(&self, dim: Dim, field: &str) -> Result<Vec<f64>, CliError> {
        let lo = self.min.to_si(dim, &format!("{field}.min"))?;
        let hi = self.max.to_si(dim, &format!("{field}.max"))?;
        if self.points == 0 {
            return Err(CliError::config(format!("{field}.points"), "must be >= 1"));
        }
        if self.points == 1 {
            return Ok(vec![lo]);
        }
        if !(hi > lo) {
            return Err(CliError::config(field, "max must exceed min"));
        }
        if self.spacing == Spacing::Log && !(lo > 0.0) {
            return Err(CliError::config(field, "log spacing needs min > 0"));
        }
        let n = self.points - 1;
        Ok((0..=n)
            .map(|i| {
                let t = i as f64 / n as f64;
                match self.spacing {
                    Spacing::Log => lo * (hi / lo).powf(t),
                    Spacing::Linear => lo + (hi - lo) * t,
                }
            })
            .collect())
    }

    fn canonical(&self, dim: Dim, field: &str) -> Result<Range, CliError> {
        self.values(dim, field)?;
        Ok(Range {
            min: self.min.canonical(dim, field)?,
            max: self.max.canonical(dim, field)?,
            points: self.points,
            spacing: self.spacing,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Window {
    pub min: Quantity,
    pub max: Quantity,
}

impl Window {
    pub fn get(&self, field: &str) -> Result<(f64, f64), CliError> {
        let lo = self.min.to_si(Dim::Frequency, field)?;
        let hi = self.max.to_si(Dim::Frequency, field)?;
        if !(lo > 0.0 && hi > lo) {
            return Err(CliError::config(field, "must satisfy 0 < min < max"));
        }
        Ok((lo, hi))
    }

    fn canonical(&self, field: &str) -> Result<Window, CliError> {
        self.get(field)?;
        Ok(Window {
            min: self.min.canonical(Dim::Frequency, field)?,
            max: self.max.canonical(Dim::Frequency, field)?,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GasConfig {
    pub pressure: Quantity,
    #[serde(default = "default_gas_mass")]
    pub molecule_mass: Quantity,
    /// Defaults to the environment temperature.
    #[serde(default)]
    pub temperature: Option<Quantity>,
}

fn default_gas_mass() -> Quantity {
    Quantity::si(4.8e-26, Dim::Mass)
}

impl GasConfig {
    fn canonical(&self) -> Result<GasConfig, CliError> {
        Ok(GasConfig {
            pressure: self.pressure.canonical(Dim::Pressure, "gas.pressure")?,
            molecule_mass: self.molecule_mass.canonical(Dim::Mass, "gas.molecule_mass")?,
            temperature: self.temperature.as_ref().map(|t| t.canonical(Dim::Temperature, "gas.temperature")).transpose()?,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectrumJob {
    pub omega: Range,
    #[serde(default)]
    pub figures: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TotalsJob {
    #[serde(default)]
    pub omega_window: Option<Window>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    /// Surface-to-surface distance.
    DS,
    /// Centre height.
    D,
    TP,
    /// Field magnitude.
    B,
    /// Rigid rotation rate of the particle (rotating-frame torque only).
    Spin,
}

impl SweepAxis {
    pub fn dim(self) -> Dim {
        match self {
            SweepAxis::DS | SweepAxis::D => Dim::Length,
            SweepAxis::TP => Dim::Temperature,
            SweepAxis::B => Dim::Field,
            SweepAxis::Spin => Dim::Frequency,
        }
    }

    pub fn column(self) -> &'static str {
        match self {
            SweepAxis::DS => "d_s_m",
            SweepAxis::D => "d_m",
            SweepAxis::TP => "t_p_K",
            SweepAxis::B => "b_T",
            SweepAxis::Spin => "Omega_rad_s",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepJob {
    pub axis: SweepAxis,
    pub range: Range,
    #[serde(default)]
    pub omega_window: Option<Window>,
    /// Needed for steady-state spin rates.
    #[serde(default)]
    pub gas: Option<GasConfig>,
    #[serde(default)]
    pub figures: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DispersionJob {
    pub phis: Vec<Quantity>,
    pub k_par: Range,
    pub omega_window: Window,
    #[serde(default = "both_models")]
    pub models: Vec<ModelLabel>,
    #[serde(default)]
    pub figures: Vec<String>,
}

fn both_models() -> Vec<ModelLabel> {
    vec![ModelLabel::Local, ModelLabel::Nonlocal]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "lowercase", deny_unknown_fields)]
pub enum TorqueSource {
    /// Frequency-integrated static `M_x` of the configured system.
    Static,
    Fixed { value: Quantity },
    /// Rotating-frame torque sampled at these spin rates and interpolated.
    Rotating { spins: Vec<Quantity> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DynamicsJob {
    pub gas: GasConfig,
    pub torque: TorqueSource,
    /// Defaults to `I/γ/200`.
    #[serde(default)]
    pub dt: Option<Quantity>,
    pub steps: usize,
    pub burn_in: usize,
    pub trajectories: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub record_every: usize,
    #[serde(default)]
    pub keep_trajectories: usize,
    #[serde(default)]
    pub omega_window: Option<Window>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaterialsJob {}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum JobSpec {
    Spectrum(SpectrumJob),
    Totals(TotalsJob),
    Sweep(SweepJob),
    Dispersion(DispersionJob),
    Dynamics(DynamicsJob),
    Materials(MaterialsJob),
}

impl JobSpec {
    pub fn kind(&self) -> &'static str {
        match self {
            JobSpec::Spectrum(_) => "spectrum",
            JobSpec::Totals(_) => "totals",
            JobSpec::Sweep(_) => "sweep",
            JobSpec::Dispersion(_) => "dispersion",
            JobSpec::Dynamics(_) => "dynamics",
            JobSpec::Materials(_) => "materials",
        }
    }
}

fn default_model() -> ModelLabel {
    ModelLabel::Local
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JobConfig {
    pub substrate: MaterialRef,
    #[serde(default = "default_model")]
    pub model: ModelLabel,
    pub particle: ParticleRef,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d: Option<Quantity>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d_s: Option<Quantity>,
    pub thermal: ThermalConfig,
    #[serde(default)]
    pub b_field: FieldConfig,
    #[serde(default)]
    pub quadrature: QuadConfig,
    pub job: JobSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<String>,
}

/// The particle as used by the solver.
#[derive(Clone, Debug, PartialEq)]
pub enum Particle {
    Spec(ParticleSpec),
    Fixed(FixedPolarizability),
}

impl DipoleResponse for Particle {
    fn polarizability(&self, omega: f64) -> fluxtorque::Result<Complex64> {
        match self {
            Particle::Spec(s) => s.polarizability(omega),
            Particle::Fixed(f) => f.polarizability(omega),
        }
    }

    fn resonances(&self) -> Vec<f64> {
        match self {
            Particle::Spec(s) => s.resonances(),
            Particle::Fixed(f) => f.resonances(),
        }
    }
}

impl Particle {
    pub fn spec(&self) -> Option<&ParticleSpec> {
        match self {
            Particle::Spec(s) => Some(s),
            Particle::Fixed(_) => None,
        }
    }
}

/// Fully resolved physical inputs, SI throughout.
#[derive(Clone, Debug)]
pub struct Resolved {
    pub substrate_material: SubstrateMaterial,
    pub model: ModelLabel,
    pub particle: Particle,
    /// Centre height, m.
    pub d: f64,
    pub thermal: ThermalState,
    /// Tesla, lab axes.
    pub b_field: [f64; 3],
    pub quadrature: QuadConfig,
}

impl Resolved {
    pub fn substrate_with(&self, model: ModelLabel, b_field: [f64; 3]) -> Result<Substrate, CliError> {
        Ok(match model {
            ModelLabel::Local => Substrate::Local(self.substrate_material.gyrotropic(b_field)?),
            ModelLabel::Nonlocal => Substrate::Nonlocal(self.substrate_material.hydrodynamic(b_field)?),
        })
    }

    pub fn substrate(&self) -> Result<Substrate, CliError> {
        self.substrate_with(self.model, self.b_field)
    }

    pub fn radius(&self) -> Option<f64> {
        self.particle.spec().map(|s| s.radius)
    }
}

impl JobConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let cfg: JobConfig = serde_json::from_str(text)?;
        cfg.canonical()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, CliError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    fn b_vector(&self) -> Result<[f64; 3], CliError> {
        let mag = self.b_field.magnitude.to_si(Dim::Field, "b_field.magnitude")?;
        let dir = self.b_field.direction;
        let n = (dir[0] * dir[0] + dir[1] * dir[1] + dir[2] * dir[2]).sqrt();
        if !(n > 0.0 && n.is_finite()) {
            return Err(CliError::config("b_field.direction", "must be a finite non-zero vector"));
        }
        Ok(dir.map(|c| mag * c / n))
    }

    /// Same configuration with every quantity in SI, directions
    /// normalised and the output directory dropped. Validates on the way.
    pub fn canonical(&self) -> Result<JobConfig, CliError> {
        let geometry = match (&self.d, &self.d_s) {
            (Some(d), None) => (Some(d.canonical(Dim::Length, "d")?), None),
            (None, Some(s)) => (None, Some(s.canonical(Dim::Length, "d_s")?)),
            _ => return Err(CliError::config("d/d_s", "exactly one of `d` and `d_s` must be given")),
        };
        let b = self.b_vector()?;
        let mag = (b[0] * b[0] + b[1] * b[1] + b[2] * b[2]).sqrt();
        let dir = self.b_field.direction;
        let n = (dir[0] * dir[0] + dir[1] * dir[1] + dir[2] * dir[2]).sqrt();
        self.quadrature.validate()?;
        let job = match &self.job {
            JobSpec::Spectrum(j) => JobSpec::Spectrum(SpectrumJob {
                omega: j.omega.canonical(Dim::Frequency, "job.omega")?,
                figures: j.figures.clone(),
            }),
            JobSpec::Totals(j) => JobSpec::Totals(TotalsJob {
                omega_window: j.omega_window.as_ref().map(|w| w.canonical("job.omega_window")).transpose()?,
            }),
            JobSpec::Sweep(j) => JobSpec::Sweep(SweepJob {
                axis: j.axis,
                range: j.range.canonical(j.axis.dim(), "job.range")?,
                omega_window: j.omega_window.as_ref().map(|w| w.canonical("job.omega_window")).transpose()?,
                gas: j.gas.as_ref().map(GasConfig::canonical).transpose()?,
                figures: j.figures.clone(),
            }),
            JobSpec::Dispersion(j) => {
                if j.phis.is_empty() || j.models.is_empty() {
                    return Err(CliError::config("job", "`phis` and `models` must be non-empty"));
                }
                JobSpec::Dispersion(DispersionJob {
                    phis: j.phis.iter().map(|p| p.canonical(Dim::Angle, "job.phis")).collect::<Result<_, _>>()?,
                    k_par: j.k_par.canonical(Dim::InverseLength, "job.k_par")?,
                    omega_window: j.omega_window.canonical("job.omega_window")?,
                    models: j.models.clone(),
                    figures: j.figures.clone(),
                })
            }
            JobSpec::Dynamics(j) => JobSpec::Dynamics(DynamicsJob {
                gas: j.gas.canonical()?,
                torque: match &j.torque {
                    TorqueSource::Static => TorqueSource::Static,
                    TorqueSource::Fixed { value } => TorqueSource::Fixed {
                        value: value.canonical(Dim::Torque, "job.torque.value")?,
                    },
                    TorqueSource::Rotating { spins } => {
                        if spins.is_empty() {
                            return Err(CliError::config("job.torque.spins", "must be non-empty"));
                        }
                        TorqueSource::Rotating {
                            spins: spins.iter().map(|s| s.canonical(Dim::Frequency, "job.torque.spins")).collect::<Result<_, _>>()?,
                        }
                    }
                },
                dt: j.dt.as_ref().map(|t| t.canonical(Dim::Time, "job.dt")).transpose()?,
                omega_window: j.omega_window.as_ref().map(|w| w.canonical("job.omega_window")).transpose()?,
                ..j.clone()
            }),
            JobSpec::Materials(j) => JobSpec::Materials(j.clone()),
        };
        let cfg = JobConfig {
            substrate: self.substrate.clone(),
            model: self.model,
            particle: self.particle.clone(),
            d: geometry.0,
            d_s: geometry.1,
            thermal: ThermalConfig {
                t_p: self.thermal.t_p.canonical(Dim::Temperature, "thermal.t_p")?,
                t_e: self.thermal.t_e.canonical(Dim::Temperature, "thermal.t_e")?,
                fz_zero_point: self.thermal.fz_zero_point,
            },
            b_field: FieldConfig {
                magnitude: Quantity::si(round_sig(mag), Dim::Field),
                direction: if mag > 0.0 { b.map(|c| round_sig(c / mag)) } else { dir.map(|c| round_sig(c / n)) },
            },
            quadrature: self.quadrature,
            job,
            output_dir: None,
        };
        Ok(cfg)
    }

    /// Canonical JSON text: SI values, sorted keys, compact.
    pub fn canonical_json(&self) -> Result<String, CliError> {
        let v = serde_json::to_value(self.canonical()?)?;
        Ok(serde_json::to_string(&sort_keys(v))?)
    }

    pub fn resolve(&self) -> Result<Resolved, CliError> {
        self.resolve_with(&default_db())
    }

    pub fn resolve_with(&self, db: &MaterialDb) -> Result<Resolved, CliError> {
        let canon = self.canonical()?;
        let base = db.substrate(canon.substrate.name())?;
        let substrate_material: SubstrateMaterial = canon.substrate.resolve(base, "substrate")?;
        substrate_material.validate("substrate")?;
        let particle = match &canon.particle {
            ParticleRef::Fixed { fixed_polarizability: a } => {
                if !(a[0].is_finite() && a[1].is_finite()) {
                    return Err(CliError::config("particle.fixed_polarizability", "must be finite"));
                }
                Particle::Fixed(FixedPolarizability(Complex64::new(a[0], a[1])))
            }
            ParticleRef::Material(m) => {
                let base = db.particle(m.name())?;
                let spec: ParticleSpec = m.resolve(base, "particle")?;
                spec.validate("particle")?;
                Particle::Spec(spec)
            }
        };
        let d = match (&canon.d, &canon.d_s) {
            (Some(d), _) => d.value,
            (_, Some(s)) => {
                let r = particle
                    .spec()
                    .map(|p| p.radius)
                    .ok_or_else(|| CliError::config("d_s", "needs a particle with a radius; give `d` instead"))?;
                s.value + r
            }
            _ => unreachable!("canonical() checks the geometry keys"),
        };
        if !(d > 0.0) {
            return Err(CliError::config("d", "particle centre must lie above the surface"));
        }
        let thermal = ThermalState {
            t_p: canon.thermal.t_p.value,
            t_e: canon.thermal.t_e.value,
            fz_zero_point: canon.thermal.fz_zero_point,
        };
        thermal.validate()?;
        Ok(Resolved {
            substrate_material,
            model: canon.model,
            particle,
            d,
            thermal,
            b_field: self.b_vector()?,
            quadrature: canon.quadrature,
        })
    }
}

pub(crate) fn sort_keys(v: Value) -> Value {
    match v {
        Value::Object(m) => {
            let mut entries: Vec<(String, Value)> = m.into_iter().collect();
            entries.sort_by(|a, b| a.0.cmp(&b.0));
            Value::Object(entries.into_iter().map(|(k, v)| (k, sort_keys(v))).collect())
        }
        Value::Array(a) => Value::Array(a.into_iter().map(sort_keys).collect()),
        other => other,
    }
}
