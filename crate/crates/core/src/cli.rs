//! `strato <modes|mixing|simulate|sharp-limit> --config <path> [--out <dir>]`

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::json;

use crate::config::{Field, InitialData, ModeSource, RunConfig, SimulationConfig};
use crate::error::{Error, Result};
use crate::linear_dynamics::{Coupling, LinearState, LinearSystem};
use crate::mixing::{alpha_matrix, beta_gamma_quadrature, condition_number, coupled_mass_matrix, mixing_tensor};
use crate::nonlinear_dynamics::{NonlinearParams, NonlinearState, NonlinearSystem};
use crate::sharp_limit::delta_sweep;
use crate::spectral::{Fourier, HorizontalGrid};
use crate::stratification::{brunt_vaisala, build_profile};
use crate::sturm_liouville::{compute_modes, orthonormality_residual, Basis, ModeSet};

#[derive(Debug, Parser)]
#[command(name = "strato", version, about = "Vertical modes and modal dynamics of stratified fluids")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Eigen-speeds, mode shapes and basis orthonormality.
    Modes(Common),
    /// Interaction matrix, selection rule table and mass-matrix conditioning.
    Mixing(Common),
    /// Time integration of a modal system.
    Simulate {
        kind: SimulationKind,
        #[command(flatten)]
        common: Common,
    },
    /// Smoothed-jump sweep towards the two-layer limit.
    SharpLimit(Common),
}

#[derive(Debug, Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SimulationKind {
    LinearUncoupled,
    LinearCoupled,
    Nonlinear,
}

/// Parses `args` (including the program name), runs the command and returns
/// the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match dispatch(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn dispatch(cli: Cli) -> Result<()> {
    let (name, kind, common) = match &cli.command {
        Command::Modes(c) => ("modes", None, c),
        Command::Mixing(c) => ("mixing", None, c),
        Command::Simulate { kind, common } => ("simulate", Some(*kind), common),
        Command::SharpLimit(c) => ("sharp-limit", None, c),
    };
    let config = RunConfig::from_path(&common.config)?;
    let base = common.config.parent().map(Path::to_path_buf).unwrap_or_default();
    let dir = common
        .out
        .clone()
        .or_else(|| config.output.as_ref().map(|o| base.join(o)))
        .unwrap_or_else(|| PathBuf::from("out"));
    std::fs::create_dir_all(&dir).map_err(|source| Error::Io {
        path: dir.clone(),
        source,
    })?;
    let mut out = Output { dir, files: Vec::new() };
    let results = match cli.command {
        Command::Modes(_) => cmd_modes(&config, &base, &mut out)?,
        Command::Mixing(_) => cmd_mixing(&config, &base, &mut out)?,
        Command::Simulate { kind, .. } => cmd_simulate(&config, &base, kind, &mut out)?,
        Command::SharpLimit(_) => cmd_sharp_limit(&config, &mut out)?,
    };
    out.manifest(name, kind, &config, results)
}

/// Fixed numeric formatting for every CSV value.
pub fn num(v: f64) -> String {
    format!("{v:.16e}")
}

struct Output {
    dir: PathBuf,
    files: Vec<String>,
}

impl Output {
    fn csv(&mut self, name: &str, header: &[String], rows: impl IntoIterator<Item = Vec<String>>) -> Result<()> {
        let path = self.dir.join(name);
        let io = |e: csv::Error| Error::Io {
            path: path.clone(),
            source: std::io::Error::other(e.to_string()),
        };
        let mut w = csv::Writer::from_path(&path).map_err(io)?;
        w.write_record(header).map_err(io)?;
        for row in rows {
            w.write_record(&row).map_err(io)?;
        }
        w.flush().map_err(|source| Error::Io {
            path: path.clone(),
            source,
        })?;
        self.files.push(name.to_string());
        Ok(())
    }

    fn manifest(&self, command: &str, kind: Option<SimulationKind>, config: &RunConfig, results: serde_json::Value) -> Result<()> {
        let manifest = json!({
            "command": command,
            "kind": kind,
            "version": env!("CARGO_PKG_VERSION"),
            "config": config,
            "conventions": conventions(),
            "results": results,
            "outputs": self.files,
        });
        let path = self.dir.join("manifest.json");
        let text = serde_json::to_string_pretty(&manifest).map_err(|e| Error::Config(e.to_string()))?;
        std::fs::write(&path, text + "\n").map_err(|source| Error::Io { path, source })
    }
}

fn conventions() -> BTreeMap<&'static str, &'static str> {
    BTreeMap::from([
        ("mode_sign", "f_n scaled so that f_n'(-H) > 0"),
        ("mode_normalization", "f_n orthonormal in L2(rho N^2 dz); g_n = c_n f_n'; g_0 = alpha / rho"),
        ("boussinesq_reference_density", "surface density rho(0)"),
        ("density_expansion", "rho = F sum rho_n rho N^2 f_n with F = 1/g (full) or 1 (boussinesq)"),
        ("gamma_sign", "+1/sqrt2 when p+q=n, -1/sqrt2 when |p-q|=n; the same sign multiplies both terms of the density equation"),
        ("dealias", "2/3 rule: keep FFT slots with 3|j| <= nx; applied to initial data of every simulation"),
        ("dft", "unnormalized forward transform; L2 norms scaled by L/nx^2"),
        ("odd_derivative_nyquist", "first derivatives vanish at the Nyquist slot"),
        ("sharp_limit_shapes", "f_delta and the limit shape both scaled to 1 at z0"),
        ("number_format", "17 significant digits, scientific notation"),
    ])
}

fn modes_from_profile(config: &RunConfig, base: &Path) -> Result<ModeSet> {
    let kind = config.profile_kind(base)?;
    let profile = build_profile(&kind, config.grid_size, config.depth, config.gravity, config.variant)?;
    let bv = brunt_vaisala(&profile)?;
    compute_modes(&profile, &bv, config.modes)
}

fn cmd_modes(config: &RunConfig, base: &Path, out: &mut Output) -> Result<serde_json::Value> {
    let modes = modes_from_profile(config, base)?;
    let m = modes.mode_count();
    out.csv(
        "speeds.csv",
        &["n".into(), "c_n".into()],
        modes.speeds.iter().enumerate().map(|(i, c)| vec![(i + 1).to_string(), num(*c)]),
    )?;
    let mut header = vec!["z".to_string()];
    header.extend((1..=m).map(|n| format!("f_{n}")));
    header.extend((0..=m).map(|n| format!("g_{n}")));
    out.csv(
        "modes.csv",
        &header,
        (0..modes.grid_len()).map(|i| {
            let mut row = vec![num(modes.z[i])];
            row.extend(modes.f.iter().map(|f| num(f[i])));
            row.extend(modes.g.iter().map(|g| num(g[i])));
            row
        }),
    )?;
    let mut rows = Vec::new();
    let mut worst = BTreeMap::new();
    for (label, basis) in [("f_basis", Basis::FBasis), ("g_basis", Basis::GBasis), ("weighted_dual", Basis::WeightedDual)] {
        let res = orthonormality_residual(&modes, basis)?;
        let mut max = 0.0_f64;
        for (i, row) in res.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                max = max.max(v.abs());
                rows.push(vec![label.to_string(), i.to_string(), j.to_string(), num(*v)]);
            }
        }
        worst.insert(label, max);
    }
    out.csv(
        "orthonormality.csv",
        &["basis".into(), "row".into(), "col".into(), "residual".into()],
        rows,
    )?;
    Ok(json!({ "modes": m, "max_orthonormality_residual": worst }))
}

fn cmd_mixing(config: &RunConfig, base: &Path, out: &mut Output) -> Result<serde_json::Value> {
    let modes = modes_from_profile(config, base)?;
    let tensor = mixing_tensor(&modes);
    let m = modes.mode_count();
    let mut header = vec!["mode".to_string()];
    header.extend((1..=m).map(|n| n.to_string()));
    out.csv(
        "alpha.csv",
        &header,
        (0..m).map(|i| {
            let mut row = vec![(i + 1).to_string()];
            row.extend((0..m).map(|j| num(tensor.alpha[(i, j)])));
            row
        }),
    )?;
    let quad_grid = 8 * m + 1;
    let buoyancy = modes.constant_buoyancy(1e-8).map(f64::sqrt);
    let mut rows = Vec::new();
    for t in &tensor.triads {
        let (bq, gq) = beta_gamma_quadrature(t.p, t.q, t.n, buoyancy.unwrap_or(1.0), quad_grid)?;
        let branch = match t.branch {
            crate::mixing::Branch::Sum => "sum",
            crate::mixing::Branch::Difference => "difference",
        };
        rows.push(vec![
            t.p.to_string(),
            t.q.to_string(),
            t.n.to_string(),
            branch.to_string(),
            num(t.beta),
            num(t.gamma),
            num(bq),
            num(gq),
        ]);
    }
    out.csv(
        "selection.csv",
        &["p", "q", "n", "branch", "beta", "gamma", "beta_quadrature", "gamma_quadrature"].map(String::from),
        rows,
    )?;
    let mut conditioning = Vec::new();
    for &k in &config.mixing.wavenumbers {
        let a = coupled_mass_matrix(&tensor.alpha, &modes.speeds, k)?;
        conditioning.push((k, condition_number(&a)));
    }
    if !conditioning.is_empty() {
        out.csv(
            "mass_matrix.csv",
            &["k".into(), "condition_number".into()],
            conditioning.iter().map(|(k, c)| vec![num(*k), num(*c)]),
        )?;
    }
    let off = (0..m)
        .flat_map(|i| (0..m).filter(move |j| *j != i).map(move |j| (i, j)))
        .map(|(i, j)| tensor.alpha[(i, j)].abs())
        .fold(0.0, f64::max);
    Ok(json!({
        "modes": m,
        "constant_buoyancy": buoyancy,
        "max_offdiagonal_alpha": off,
        "triads": tensor.triads.len(),
    }))
}

/// Physical initial fields `(V_n, ρ_n)` for `modes` modes.
fn initial_fields(init: &InitialData, grid: &HorizontalGrid, modes: usize) -> Result<(Vec<Vec<f64>>, Vec<Vec<f64>>)> {
    let x = grid.points();
    let mut v = vec![vec![0.0; grid.nx]; modes];
    let mut rho = vec![vec![0.0; grid.nx]; modes];
    for c in &init.components {
        if c.mode == 0 || c.mode > modes {
            return Err(Error::invalid(format!("initial component mode {} outside 1..={modes}", c.mode)));
        }
        if c.wavenumber_index > grid.nx / 2 {
            return Err(Error::invalid(format!("wavenumber index {} exceeds nx/2", c.wavenumber_index)));
        }
        let target = match c.field {
            Field::V => &mut v[c.mode - 1],
            Field::Rho => &mut rho[c.mode - 1],
        };
        let k = 2.0 * PI * c.wavenumber_index as f64 / grid.length;
        for (t, x) in target.iter_mut().zip(&x) {
            *t += c.amplitude * (k * x + c.phase).cos();
        }
    }
    if let Some(r) = &init.random {
        if r.max_wavenumber_index > grid.nx / 2 {
            return Err(Error::invalid("random max_wavenumber_index exceeds nx/2"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(r.seed);
        for field in v.iter_mut().chain(rho.iter_mut()) {
            for j in 1..=r.max_wavenumber_index {
                let a: f64 = rng.random_range(-1.0..1.0);
                let b: f64 = rng.random_range(-1.0..1.0);
                let k = 2.0 * PI * j as f64 / grid.length;
                let scale = r.amplitude / (j * j) as f64;
                for (t, x) in field.iter_mut().zip(&x) {
                    *t += scale * (a * (k * x).cos() + b * (k * x).sin());
                }
            }
        }
    }
    Ok((v, rho))
}

fn sim_modes(config: &RunConfig, sim: &SimulationConfig, base: &Path) -> Result<ModeSet> {
    match sim.modes_from {
        ModeSource::Explicit => ModeSet::explicit_boussinesq(sim.buoyancy()?, config.depth, config.grid_size, config.modes),
        ModeSource::Profile => modes_from_profile(config, base),
    }
}

enum Integrator {
    Linear(LinearSystem, crate::linear_dynamics::Propagator),
    Nonlinear(NonlinearSystem),
}

fn cmd_simulate(config: &RunConfig, base: &Path, kind: SimulationKind, out: &mut Output) -> Result<serde_json::Value> {
    let sim = config.simulation()?;
    sim.validate()?;
    let h = config.horizontal()?;
    let grid = HorizontalGrid::new(h.nx, h.length)?;
    let m = config.modes;
    let (v0, r0) = initial_fields(&sim.initial, &grid, m)?;
    let start = NonlinearState::from_physical(&grid, &v0, &r0)?;

    let mut modes = None;
    let (integrator, energy_system) = match kind {
        SimulationKind::LinearUncoupled | SimulationKind::LinearCoupled => {
            let set = sim_modes(config, sim, base)?;
            let system = if kind == SimulationKind::LinearUncoupled {
                LinearSystem::uncoupled(&set, grid, sim.mu)?
            } else {
                LinearSystem::coupled(&set, grid, sim.mu)?
            };
            modes = Some(set);
            let prop = system.propagator(sim.dt)?;
            (Integrator::Linear(system.clone(), prop), system)
        }
        SimulationKind::Nonlinear => {
            let n = sim.buoyancy()?;
            let params = NonlinearParams {
                epsilon: sim.epsilon,
                mu: sim.mu,
                buoyancy: n,
            };
            let system = NonlinearSystem::new(params, grid, m)?;
            let energy = LinearSystem::with_speeds(system.speeds(), Coupling::Uncoupled { buoyancy: n }, grid, sim.mu)?;
            (Integrator::Nonlinear(system), energy)
        }
    };

    let fft = Fourier::new(grid.nx);
    let mut state = LinearState {
        time: 0.0,
        v: start.v,
        rho: start.rho,
    };
    let norms = |s: &LinearState| -> Vec<f64> {
        s.v.iter()
            .chain(&s.rho)
            .map(|c| grid.sobolev_norm_sq(c, 0.0).sqrt())
            .collect()
    };
    let mut series = Vec::new();
    let record = |s: &LinearState, series: &mut Vec<Vec<String>>| {
        let mut row = vec![num(s.time), num(energy_system.energy(s))];
        row.extend(norms(s).into_iter().map(num));
        series.push(row);
    };
    let physical_header = {
        let mut hd = vec!["x".to_string()];
        hd.extend((1..=m).map(|n| format!("V_{n}")));
        hd.extend((1..=m).map(|n| format!("rho_{n}")));
        hd
    };
    let physical_rows = |s: &LinearState| -> Vec<Vec<String>> {
        let v: Vec<Vec<f64>> = s.v.iter().map(|c| fft.inverse(c)).collect();
        let r: Vec<Vec<f64>> = s.rho.iter().map(|c| fft.inverse(c)).collect();
        (0..grid.nx)
            .map(|j| {
                let mut row = vec![num(grid.x(j))];
                row.extend(v.iter().chain(&r).map(|f| num(f[j])));
                row
            })
            .collect()
    };

    let every = sim.snapshot_every.max(1);
    let mut snapshot = 0usize;
    let write_snapshot = |s: &LinearState, out: &mut Output, snapshot: &mut usize| -> Result<()> {
        out.csv(&format!("snapshot_{:05}.csv", *snapshot), &physical_header, physical_rows(s))?;
        if let (true, Integrator::Linear(system, _), Some(set)) = (sim.snapshot_fields, &integrator, &modes) {
            let fields = system.physical_fields(s, set)?;
            let rows = (0..set.grid_len()).flat_map(|i| {
                let f = &fields;
                let z = set.z[i];
                (0..grid.nx).map(move |j| {
                    vec![
                        num(z),
                        num(grid.x(j)),
                        num(f.v[(i, j)]),
                        num(f.w[(i, j)]),
                        num(f.rho[(i, j)]),
                        num(f.p[(i, j)]),
                    ]
                })
            });
            out.csv(
                &format!("fields_{:05}.csv", *snapshot),
                &["z", "x", "V", "w", "rho", "P"].map(String::from),
                rows,
            )?;
        }
        *snapshot += 1;
        Ok(())
    };

    record(&state, &mut series);
    write_snapshot(&state, out, &mut snapshot)?;
    for step in 1..=sim.steps {
        match &integrator {
            Integrator::Linear(_, prop) => prop.apply(&mut state),
            Integrator::Nonlinear(system) => {
                let ns = NonlinearState {
                    time: state.time,
                    v: std::mem::take(&mut state.v),
                    rho: std::mem::take(&mut state.rho),
                };
                let next = system.step_rk4(&ns, sim.dt)?;
                state = LinearState {
                    time: next.time,
                    v: next.v,
                    rho: next.rho,
                };
            }
        }
        if step % every == 0 || step == sim.steps {
            record(&state, &mut series);
            write_snapshot(&state, out, &mut snapshot)?;
        }
    }

    let mut header = vec!["t".to_string(), "energy".to_string()];
    header.extend((1..=m).map(|n| format!("v_norm_{n}")));
    header.extend((1..=m).map(|n| format!("rho_norm_{n}")));
    out.csv("timeseries.csv", &header, series.clone())?;
    out.csv("final_state.csv", &physical_header, physical_rows(&state))?;

    let e0: f64 = series[0][1].parse().unwrap_or(0.0);
    let e1: f64 = series[series.len() - 1][1].parse().unwrap_or(0.0);
    let mut results = json!({
        "final_time": state.time,
        "energy_initial": e0,
        "energy_final": e1,
        "speeds": energy_system.speeds,
        "snapshots": snapshot,
    });
    if let Integrator::Nonlinear(system) = &integrator {
        results["dropped_pairs"] = json!(system.interactions.dropped);
        results["interaction_pairs"] = json!(system.interactions.pairs.len());
        results["cfl_limit"] = json!(system.cfl_limit());
    }
    if kind == SimulationKind::LinearCoupled {
        results["alpha"] = json!(modes.as_ref().map(|s| {
            let a = alpha_matrix(s);
            (0..a.nrows()).map(|i| a.row(i).iter().copied().collect::<Vec<_>>()).collect::<Vec<_>>()
        }));
    }
    Ok(results)
}

fn cmd_sharp_limit(config: &RunConfig, out: &mut Output) -> Result<serde_json::Value> {
    let s = &config.sharp_limit;
    let report = delta_sweep(s.rho_plus, s.rho_minus, s.z0, s.g, &s.deltas, s.grid_size)?;
    out.csv(
        "report.csv",
        &["delta", "c1", "c1_sq_err", "f_sup_err"].map(String::from),
        report
            .entries
            .iter()
            .map(|e| vec![num(e.delta), num(e.c1), num(e.c1_sq_err), num(e.f_sup_err)]),
    )?;
    let rows = s.shape_rows.max(2);
    let stride = (report.z.len() - 1).div_ceil(rows - 1).max(1);
    let mut header = vec!["z".to_string(), "f_bar".to_string()];
    header.extend(report.entries.iter().map(|e| format!("f_delta_{}", e.delta)));
    let mut idx: Vec<usize> = (0..report.z.len()).step_by(stride).collect();
    if idx.last() != Some(&(report.z.len() - 1)) {
        idx.push(report.z.len() - 1);
    }
    out.csv(
        "shapes.csv",
        &header,
        idx.into_iter().map(|i| {
            let mut row = vec![num(report.z[i]), num(report.limit_shape[i])];
            row.extend(report.entries.iter().map(|e| num(e.shape[i])));
            row
        }),
    )?;
    Ok(json!({
        "cbar": report.cbar,
        "grid_size": report.grid_size,
        "speed_order": report.speed_order,
        "shape_order": report.shape_order,
        "limit_rayleigh": report.entries.iter().map(|e| e.limit_rayleigh).collect::<Vec<_>>(),
    }))
}
