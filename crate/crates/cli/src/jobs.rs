//! Job execution and figure-data export.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use fluxtorque::dispersion::{self, BranchPoint, ModelLabel, TraceOptions};
use fluxtorque::dynamics::{
    damping_coefficient, moment_of_inertia, simulate_langevin, steady_state_omega, GasEnvironment, LangevinParams,
    LangevinSummary, TorqueCurve,
};
use fluxtorque::fresnel::Substrate;
use fluxtorque::materials::{default_db, epsilon_substrate, polarizability, DipoleResponse};
use fluxtorque::spectra::{
    default_window, integrate_rotating_torque, integrate_totals, spectrum, SpectralResult, WrenchTotals,
};

use crate::cache::{cache_key, write_outputs, Cache, OutputFile, CODE_VERSION};
use crate::config::{
    DispersionJob, DynamicsJob, GasConfig, JobConfig, JobSpec, Resolved, SpectrumJob, SweepAxis, SweepJob, TorqueSource,
    Window,
};
use crate::error::CliError;
use crate::units::Dim;

pub const FIGURE_IDS: [&str; 11] = [
    "fig1a", "fig1b", "fig1c", "fig1d", "fig1e", "fig1f", "fig2a", "fig2b", "fig2c", "fig2d", "figS1",
];

fn figure_title(id: &str) -> &'static str {
    match id {
        "fig1a" => "substrate permittivity tensor components",
        "fig1b" => "surface-polariton dispersion",
        "fig1c" => "lateral force spectral density with red/blue branch split",
        "fig1d" => "lateral torque spectral density with red/blue branch split",
        "fig1e" => "power spectral density with red/blue branch split",
        "fig1f" => "lateral force spectral density, local vs nonlocal substrate",
        "fig2a" => "particle polarizabilities",
        "fig2b" => "total lateral force vs surface-to-surface distance",
        "fig2c" => "total lateral torque vs surface-to-surface distance",
        "fig2d" => "steady-state spin rate vs surface-to-surface distance",
        "figS1" => "lateral torque vs particle spin rate",
        _ => "",
    }
}

/// Check a figure id and that the job kind produces its data.
pub fn check_figure(id: &str, job: &JobSpec) -> Result<(), CliError> {
    if !FIGURE_IDS.contains(&id) {
        return Err(CliError::config(
            "figures",
            format!("unknown figure id `{id}`; valid ids: {}", FIGURE_IDS.join(", ")),
        ));
    }
    let ok = match id {
        "fig1b" => matches!(job, JobSpec::Dispersion(_)),
        "fig2b" | "fig2c" | "fig2d" => matches!(job, JobSpec::Sweep(s) if s.axis == SweepAxis::DS),
        "figS1" => matches!(job, JobSpec::Sweep(s) if s.axis == SweepAxis::Spin),
        _ => matches!(job, JobSpec::Spectrum(_)),
    };
    if !ok {
        let need = match id {
            "fig1b" => "a dispersion job",
            "fig2b" | "fig2c" | "fig2d" => "a sweep job over d_s",
            "figS1" => "a sweep job over spin",
            _ => "a spectrum job",
        };
        return Err(CliError::config("figures", format!("figure `{id}` needs {need}")));
    }
    Ok(())
}

fn figures_of(job: &JobSpec) -> &[String] {
    match job {
        JobSpec::Spectrum(j) => &j.figures,
        JobSpec::Sweep(j) => &j.figures,
        JobSpec::Dispersion(j) => &j.figures,
        _ => &[],
    }
}

/// One sweep point: full totals, or the rotating-frame torque for `spin`.
#[derive(Clone, Debug, Serialize)]
pub struct SweepRow {
    pub value: f64,
    pub totals: Option<WrenchTotals>,
    pub spin_torque: Option<(f64, f64)>,
}

/// Computed data of one job, before serialisation.
pub enum JobData {
    Spectrum(SpectralResult),
    Totals(WrenchTotals),
    Sweep(Vec<SweepRow>),
    Dispersion(Vec<BranchPoint>),
    Dynamics(Box<DynamicsReport>),
    Materials(serde_json::Value),
}

#[derive(Clone, Debug, Serialize)]
pub struct DynamicsReport {
    pub inertia: f64,
    pub gamma: f64,
    pub relaxation_time: f64,
    pub torque_at_rest: f64,
    pub steady_state_omega: f64,
    pub langevin: LangevinSummary,
}

fn csv_line(cols: &[f64]) -> String {
    let s: Vec<String> = cols.iter().map(|v| format!("{v:e}")).collect();
    s.join(",")
}

fn window_or_default(w: &Option<Window>, r: &Resolved, field: &str) -> Result<(f64, f64), CliError> {
    match w {
        Some(w) => w.get(field),
        None => Ok(default_window(&r.particle, &r.thermal)),
    }
}

fn seeds(sub: &Substrate, r: &Resolved) -> Result<Vec<f64>, CliError> {
    Ok(dispersion::seed_frequencies(sub, &r.particle)?)
}

fn gas_env(g: &GasConfig, r: &Resolved) -> Result<GasEnvironment, CliError> {
    let env = GasEnvironment {
        pressure: g.pressure.to_si(Dim::Pressure, "gas.pressure")?,
        molecule_mass: g.molecule_mass.to_si(Dim::Mass, "gas.molecule_mass")?,
        temperature: match &g.temperature {
            Some(t) => t.to_si(Dim::Temperature, "gas.temperature")?,
            None => r.thermal.t_e,
        },
    };
    env.validate()?;
    Ok(env)
}

fn run_spectrum(j: &SpectrumJob, r: &Resolved) -> Result<JobData, CliError> {
    let omegas = j.omega.values(Dim::Frequency, "job.omega")?;
    if omegas[0] <= 0.0 {
        return Err(CliError::config("job.omega", "frequencies must be > 0"));
    }
    let sub = r.substrate()?;
    Ok(JobData::Spectrum(spectrum(&sub, &r.particle, &r.thermal, r.d, &omegas, &r.quadrature)?))
}

fn run_totals(w: &Option<Window>, r: &Resolved) -> Result<WrenchTotals, CliError> {
    let sub = r.substrate()?;
    let window = window_or_default(w, r, "job.omega_window")?;
    Ok(integrate_totals(&sub, &r.particle, &r.thermal, r.d, window, &seeds(&sub, r)?, &r.quadrature)?)
}

fn run_sweep(j: &SweepJob, r: &Resolved) -> Result<JobData, CliError> {
    let values = j.range.values(j.axis.dim(), "job.range")?;
    let rows: Result<Vec<SweepRow>, CliError> = values
        .par_iter()
        .map(|&v| {
            let mut p = r.clone();
            match j.axis {
                SweepAxis::DS => {
                    p.d = v + r.radius().ok_or_else(|| CliError::config("job.axis", "d_s sweeps need a particle radius"))?
                }
                SweepAxis::D => p.d = v,
                SweepAxis::TP => p.thermal.t_p = v,
                SweepAxis::B => {
                    let b = r.b_field;
                    let n = (b[0] * b[0] + b[1] * b[1] + b[2] * b[2]).sqrt();
                    let dir = if n > 0.0 { b.map(|c| c / n) } else { [1.0, 0.0, 0.0] };
                    p.b_field = dir.map(|c| c * v);
                }
                SweepAxis::Spin => {
                    let sub = p.substrate()?;
                    let window = window_or_default(&j.omega_window, &p, "job.omega_window")?;
                    let m = integrate_rotating_torque(&sub, &p.particle, &p.thermal, p.d, v, window, &seeds(&sub, &p)?, &p.quadrature)?;
                    return Ok(SweepRow {
                        value: v,
                        totals: None,
                        spin_torque: Some(m),
                    });
                }
            }
            if !(p.d > 0.0) {
                return Err(CliError::config("job.range", "particle centre must lie above the surface"));
            }
            Ok(SweepRow {
                value: v,
                totals: Some(run_totals(&j.omega_window, &p)?),
                spin_torque: None,
            })
        })
        .collect();
    Ok(JobData::Sweep(rows?))
}

fn run_dispersion(j: &DispersionJob, r: &Resolved) -> Result<JobData, CliError> {
    let ks = j.k_par.values(Dim::InverseLength, "job.k_par")?;
    let window = j.omega_window.get("job.omega_window")?;
    let opts = TraceOptions {
        omega_window: window,
        ..TraceOptions::default()
    };
    let mut tasks = Vec::new();
    for &m in &j.models {
        for phi in &j.phis {
            tasks.push((m, phi.value));
        }
    }
    let traces: Result<Vec<_>, CliError> = tasks
        .par_iter()
        .map(|&(m, phi)| Ok(dispersion::trace_branch(&r.substrate_with(m, r.b_field)?, phi, &ks, &opts)?))
        .collect();
    let mut points = Vec::new();
    for t in traces? {
        if let Some(w) = &t.warning {
            eprintln!("warning: {w}");
        }
        points.extend(t.points);
    }
    Ok(JobData::Dispersion(points))
}

fn run_dynamics(j: &DynamicsJob, r: &Resolved) -> Result<JobData, CliError> {
    let spec = r
        .particle
        .spec()
        .ok_or_else(|| CliError::config("particle", "dynamics needs a particle with radius and density"))?;
    let gas = gas_env(&j.gas, r)?;
    let gamma = damping_coefficient(spec.radius, &gas)?;
    let inertia = moment_of_inertia(spec);
    let curve = match &j.torque {
        TorqueSource::Fixed { value } => TorqueCurve::constant(value.to_si(Dim::Torque, "job.torque.value")?),
        TorqueSource::Static => TorqueCurve::constant(run_totals(&j.omega_window, r)?.torque[0]),
        TorqueSource::Rotating { spins } => {
            let mut spins: Vec<f64> = spins.iter().map(|s| s.value).collect();
            spins.sort_by(f64::total_cmp);
            spins.dedup();
            let sub = r.substrate()?;
            let window = window_or_default(&j.omega_window, r, "job.omega_window")?;
            let seeds = seeds(&sub, r)?;
            let torques: Result<Vec<f64>, CliError> = spins
                .par_iter()
                .map(|&s| Ok(integrate_rotating_torque(&sub, &r.particle, &r.thermal, r.d, s, window, &seeds, &r.quadrature)?.0))
                .collect();
            TorqueCurve::new(spins, torques?)?
        }
    };
    let relaxation_time = inertia / gamma;
    let dt = match &j.dt {
        Some(t) => t.to_si(Dim::Time, "job.dt")?,
        None => relaxation_time / 200.0,
    };
    let params = LangevinParams {
        inertia,
        gamma,
        temperature: r.thermal.t_e,
        dt,
        steps: j.steps,
        burn_in: j.burn_in,
        n_trajectories: j.trajectories,
        seed: j.seed,
        initial_omega: 0.0,
        record_every: j.record_every,
        keep_trajectories: j.keep_trajectories,
    };
    let torque_at_rest = curve.at(0.0);
    let langevin = simulate_langevin(|w| curve.at(w), &params)?;
    Ok(JobData::Dynamics(Box::new(DynamicsReport {
        inertia,
        gamma,
        relaxation_time,
        torque_at_rest,
        steady_state_omega: steady_state_omega(torque_at_rest, gamma)?,
        langevin,
    })))
}

fn run_materials(r: &Resolved) -> Result<JobData, CliError> {
    let db = default_db();
    let local = r.substrate_material.gyrotropic(r.b_field)?;
    let particles: serde_json::Map<String, serde_json::Value> = db
        .particles
        .iter()
        .map(|(name, p)| {
            (
                name.clone(),
                json!({
                    "frohlich_frequencies_rad_s": p.resonances(),
                    "mass_kg": p.mass(),
                    "moment_of_inertia_kg_m2": moment_of_inertia(p),
                }),
            )
        })
        .collect();
    Ok(JobData::Materials(json!({
        "database": db,
        "configured_substrate": {
            "material": r.substrate_material,
            "plasma_freq_rad_s": r.substrate_material.plasma_freq(),
            "fermi_velocity_m_s": r.substrate_material.fermi_velocity(),
            "beta_m_s": r.substrate_material.beta(),
            "cyclotron_freq_rad_s": local.cyclotron_freq,
            "surface_asymptotes_rad_s": dispersion::surface_asymptotes(&local)?,
        },
        "particles": particles,
    })))
}

/// Compute a job's data.
pub fn compute(cfg: &JobConfig, r: &Resolved) -> Result<JobData, CliError> {
    match &cfg.job {
        JobSpec::Spectrum(j) => run_spectrum(j, r),
        JobSpec::Totals(j) => Ok(JobData::Totals(run_totals(&j.omega_window, r)?)),
        JobSpec::Sweep(j) => run_sweep(j, r),
        JobSpec::Dispersion(j) => run_dispersion(j, r),
        JobSpec::Dynamics(j) => run_dynamics(j, r),
        JobSpec::Materials(_) => run_materials(r),
    }
}

fn sweep_csv(axis: SweepAxis, rows: &[SweepRow]) -> String {
    let mut s = String::new();
    if axis == SweepAxis::Spin {
        writeln!(s, "{},Mx,err_Mx", axis.column()).unwrap();
        for row in rows {
            let (m, e) = row.spin_torque.unwrap_or_default();
            writeln!(s, "{}", csv_line(&[row.value, m, e])).unwrap();
        }
        return s;
    }
    writeln!(s, "{},P,Fx,Fy,Fz,Mx,My,Mz,err_P,err_Fx,err_Fy,err_Fz,err_Mx,err_My,err_Mz", axis.column()).unwrap();
    for row in rows {
        let t = row.totals.unwrap_or_default();
        let mut cols = vec![row.value, t.power];
        cols.extend(t.force);
        cols.extend(t.torque);
        cols.push(t.err_power);
        cols.extend(t.err_force);
        cols.extend(t.err_torque);
        writeln!(s, "{}", csv_line(&cols)).unwrap();
    }
    s
}

/// Primary result files of a job.
pub fn primary_outputs(cfg: &JobConfig, data: &JobData) -> Result<Vec<OutputFile>, CliError> {
    let mut out = Vec::new();
    match data {
        JobData::Spectrum(s) => {
            let mut buf = Vec::new();
            s.write_csv(&mut buf)?;
            out.push(("spectrum.csv".into(), buf));
        }
        JobData::Totals(t) => out.push(("totals.json".into(), serde_json::to_vec_pretty(t)?)),
        JobData::Sweep(rows) => {
            let JobSpec::Sweep(j) = &cfg.job else { unreachable!() };
            out.push(("sweep.csv".into(), sweep_csv(j.axis, rows).into_bytes()));
        }
        JobData::Dispersion(points) => {
            let mut buf = Vec::new();
            dispersion::write_csv(points, &mut buf)?;
            out.push(("dispersion.csv".into(), buf));
        }
        JobData::Dynamics(rep) => {
            out.push(("summary.json".into(), serde_json::to_vec_pretty(rep)?));
            for i in 0..rep.langevin.trajectories.len() {
                let mut buf = Vec::new();
                rep.langevin.write_trajectory_csv(i, &mut buf)?;
                out.push((format!("trajectory_{i:03}.csv"), buf));
            }
        }
        JobData::Materials(v) => out.push(("materials.json".into(), serde_json::to_vec_pretty(v)?)),
    }
    Ok(out)
}

fn branch_figure(s: &SpectralResult, name: &str, pick: impl Fn(&fluxtorque::spectra::Densities) -> [f64; 3]) -> String {
    let mut out = format!("omega_rad_s,{name}_total,{name}_redshifted_branch,{name}_blueshifted_branch\n");
    for row in &s.rows {
        let mut cols = vec![row.omega];
        cols.extend(pick(row));
        writeln!(out, "{}", csv_line(&cols)).unwrap();
    }
    out
}

/// CSV body for `id` (after the comment line naming the figure).
pub fn export_figure_data(id: &str, cfg: &JobConfig, r: &Resolved, data: &JobData) -> Result<String, CliError> {
    check_figure(id, &cfg.job)?;
    let mut out = format!("# {id}: {}\n", figure_title(id));
    match (id, data) {
        ("fig1a", JobData::Spectrum(s)) => {
            let model = r.substrate_material.gyrotropic(r.b_field)?;
            out.push_str("omega_rad_s,Re_eps_xx,Im_eps_xx,Re_eps_yy,Im_eps_yy,Re_eps_zz,Im_eps_zz,Re_eps_yz,Im_eps_yz\n");
            for row in &s.rows {
                let e = epsilon_substrate(&model, row.omega)?;
                let cols = [
                    row.omega,
                    e[(0, 0)].re,
                    e[(0, 0)].im,
                    e[(1, 1)].re,
                    e[(1, 1)].im,
                    e[(2, 2)].re,
                    e[(2, 2)].im,
                    e[(1, 2)].re,
                    e[(1, 2)].im,
                ];
                writeln!(out, "{}", csv_line(&cols)).unwrap();
            }
        }
        ("fig1b", JobData::Dispersion(points)) => {
            let mut buf = Vec::new();
            dispersion::write_csv(points, &mut buf)?;
            out.push_str(&String::from_utf8_lossy(&buf));
        }
        ("fig1c", JobData::Spectrum(s)) => {
            out.push_str(&branch_figure(s, "Fy", |d| [d.force[1], d.branches.fy[0], d.branches.fy[1]]));
        }
        ("fig1d", JobData::Spectrum(s)) => {
            out.push_str(&branch_figure(s, "Mx", |d| [d.torque[0], d.branches.mx[0], d.branches.mx[1]]));
        }
        ("fig1e", JobData::Spectrum(s)) => {
            out.push_str(&branch_figure(s, "P", |d| [d.power, d.branches.p[0], d.branches.p[1]]));
        }
        ("fig1f", JobData::Spectrum(s)) => {
            let other_model = match r.model {
                ModelLabel::Local => ModelLabel::Nonlocal,
                ModelLabel::Nonlocal => ModelLabel::Local,
            };
            let omegas: Vec<f64> = s.rows.iter().map(|d| d.omega).collect();
            let other = spectrum(&r.substrate_with(other_model, r.b_field)?, &r.particle, &r.thermal, r.d, &omegas, &r.quadrature)?;
            let (local, nonlocal) = match r.model {
                ModelLabel::Local => (s, &other),
                ModelLabel::Nonlocal => (&other, s),
            };
            out.push_str("omega_rad_s,Fy_local,Fy_nonlocal\n");
            for (a, b) in local.rows.iter().zip(&nonlocal.rows) {
                writeln!(out, "{}", csv_line(&[a.omega, a.force[1], b.force[1]])).unwrap();
            }
        }
        ("fig2a", JobData::Spectrum(s)) => {
            let db = default_db();
            let names: Vec<&String> = db.particles.keys().collect();
            out.push_str("omega_rad_s");
            for n in &names {
                write!(out, ",Re_alpha_{n},Im_alpha_{n}").unwrap();
            }
            out.push('\n');
            for row in &s.rows {
                let mut cols = vec![row.omega];
                for n in &names {
                    let a = polarizability(&db.particles[*n], row.omega)?;
                    cols.extend([a.re, a.im]);
                }
                writeln!(out, "{}", csv_line(&cols)).unwrap();
            }
        }
        ("fig2b" | "fig2c", JobData::Sweep(rows)) => {
            let (name, pick): (&str, fn(&WrenchTotals) -> f64) = if id == "fig2b" {
                ("Fy_total", |t| t.force[1])
            } else {
                ("Mx_total", |t| t.torque[0])
            };
            writeln!(out, "d_s_m,{name}").unwrap();
            for row in rows {
                writeln!(out, "{}", csv_line(&[row.value, pick(&row.totals.unwrap_or_default())])).unwrap();
            }
        }
        ("fig2d", JobData::Sweep(rows)) => {
            let JobSpec::Sweep(j) = &cfg.job else { unreachable!() };
            let gas = j
                .gas
                .as_ref()
                .ok_or_else(|| CliError::config("job.gas", "fig2d needs the gas environment"))?;
            let radius = r.radius().ok_or_else(|| CliError::config("particle", "fig2d needs a particle radius"))?;
            let gamma = damping_coefficient(radius, &gas_env(gas, r)?)?;
            out.push_str("d_s_m,Mx_total,gamma_N_m_s,Omega_ss_rad_s\n");
            for row in rows {
                let m = row.totals.unwrap_or_default().torque[0];
                writeln!(out, "{}", csv_line(&[row.value, m, gamma, steady_state_omega(m, gamma)?])).unwrap();
            }
        }
        ("figS1", JobData::Sweep(rows)) => {
            out.push_str("Omega_rad_s,Mx_total\n");
            for row in rows {
                writeln!(out, "{}", csv_line(&[row.value, row.spin_torque.unwrap_or_default().0])).unwrap();
            }
        }
        _ => unreachable!("check_figure guards the job kind"),
    }
    Ok(out)
}

#[derive(Clone, Debug)]
pub struct RunOptions {
    pub out_dir: PathBuf,
    pub cache: Option<Cache>,
    pub seed: Option<u64>,
}

#[derive(Clone, Debug)]
pub struct RunReport {
    pub key: String,
    pub cached: bool,
    pub files: Vec<PathBuf>,
}

/// Apply command-line overrides that change results.
pub fn apply_overrides(cfg: &mut JobConfig, seed: Option<u64>) {
    if let (Some(s), JobSpec::Dynamics(j)) = (seed, &mut cfg.job) {
        j.seed = s;
    }
}

/// Cache key of a configuration: canonical job text plus the resolved
/// material parameters, under the current code version.
pub fn config_key(cfg: &JobConfig, r: &Resolved) -> Result<String, CliError> {
    let materials = json!({
        "substrate": r.substrate_material,
        "particle": r.particle.spec(),
    });
    let text = format!("{}\n{}", cfg.canonical_json()?, serde_json::to_string(&crate::config::sort_keys(materials))?);
    Ok(cache_key(&text, CODE_VERSION))
}

/// Validate, serve from cache or compute, and write outputs to `out_dir`.
pub fn run_job(cfg: &JobConfig, opts: &RunOptions) -> Result<RunReport, CliError> {
    let mut cfg = cfg.clone();
    apply_overrides(&mut cfg, opts.seed);
    let r = cfg.resolve()?;
    for id in figures_of(&cfg.job) {
        check_figure(id, &cfg.job)?;
    }
    let key = config_key(&cfg, &r)?;
    if let Some(cache) = &opts.cache {
        if let Some(files) = cache.get(&key)? {
            write_outputs(&opts.out_dir, &files)?;
            return Ok(report(key, true, &opts.out_dir, &files));
        }
    }
    let data = compute(&cfg, &r)?;
    let mut files = primary_outputs(&cfg, &data)?;
    for id in figures_of(&cfg.job) {
        files.push((format!("{id}.csv"), export_figure_data(id, &cfg, &r, &data)?.into_bytes()));
    }
    files.push(("config.canonical.json".into(), cfg.canonical_json()?.into_bytes()));
    if let Some(cache) = &opts.cache {
        cache.put(&key, &files)?;
    }
    write_outputs(&opts.out_dir, &files)?;
    Ok(report(key, false, &opts.out_dir, &files))
}

fn report(key: String, cached: bool, dir: &Path, files: &[OutputFile]) -> RunReport {
    RunReport {
        key,
        cached,
        files: files.iter().map(|f| dir.join(&f.0)).collect(),
    }
}
