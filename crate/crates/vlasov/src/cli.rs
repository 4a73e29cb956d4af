//! Command-line front end. The binary is a thin wrapper around these
//! functions; every subcommand is a library call so tests and examples can
//! drive the same paths.

use crate::compactify::{self, DampingProfile};
use crate::config::RunConfig;
use crate::diagnostics;
use crate::error::{Result, VlasovError};
use crate::eulerian::{self, EulerianField, EulerianSolver, PhaseGridFunction};
use crate::fields::FieldSolver;
use crate::flow::{self, FieldModel, Flow, RunParams, TimeDirection};
use crate::kernels::{flux_through_sphere, poisson_kernel, Kernel, KernelSpec, Sign};
use crate::scenarios::{Scenario, ScenarioFamily};
use crate::snapshot;
use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;

#[derive(Parser, Debug)]
#[command(name = "vlasov", version, about = "Lagrangian and Eulerian kinetic runs with conservation diagnostics")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Lagrangian particle run with self-consistent field
    Run(RunArgs),
    /// Eulerian phase-space reference run (1D-1V)
    RunEulerian(EulerianArgs),
    /// L1 phase-space distance between a particle checkpoint and a
    /// phase-grid snapshot
    Compare(CompareArgs),
    /// Recompute scalar diagnostics from an ensemble checkpoint
    Diagnose(DiagnoseArgs),
    /// Build a damped sphere compactification and integrate demo
    /// trajectories (bounded orbit and manufactured blow-up)
    CompactifyDemo(CompactifyArgs),
    /// Kernel flux and mollification oracles
    KernelCheck(KernelCheckArgs),
}

#[derive(Args, Debug, Clone)]
pub struct ScenarioOverrides {
    /// Scenario preset (landau, two-stream, bump3d, disc2d)
    #[arg(long)]
    pub scenario: Option<String>,
    /// Declarative config file (flat key = value)
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub dt: Option<f64>,
    #[arg(long)]
    pub t_end: Option<f64>,
    #[arg(long)]
    pub particles: Option<u64>,
    #[arg(long)]
    pub mollify_n: Option<u32>,
    #[arg(long)]
    pub escape_radius: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub grid_cells: Option<usize>,
    #[arg(long)]
    pub cadence: Option<u64>,
    #[arg(long)]
    pub alpha: Option<f64>,
}

impl ScenarioOverrides {
    pub fn build_config(&self) -> Result<RunConfig> {
        let mut config = match (&self.config, &self.scenario) {
            (Some(path), _) => {
                let text = std::fs::read_to_string(path)?;
                RunConfig::parse(&text)?
            }
            (None, Some(name)) => RunConfig::preset(name)?,
            (None, None) => {
                return Err(VlasovError::Config(
                    "either --scenario or --config is required".into(),
                ))
            }
        };
        if let (Some(path), Some(name)) = (&self.config, &self.scenario) {
            let _ = path;
            if *name != config.scenario.name {
                return Err(VlasovError::Config(format!(
                    "--scenario {name} conflicts with config file scenario {}",
                    config.scenario.name
                )));
            }
        }
        if let Some(v) = self.dt {
            config.set("dt", &v.to_string())?;
        }
        if let Some(v) = self.t_end {
            config.set("t_end", &v.to_string())?;
        }
        if let Some(v) = self.particles {
            config.set("particles", &v.to_string())?;
        }
        if let Some(v) = self.mollify_n {
            config.set("mollify_n", &v.to_string())?;
        }
        if let Some(v) = self.escape_radius {
            config.set("escape_radius", &v.to_string())?;
        }
        if let Some(v) = self.seed {
            config.set("seed", &v.to_string())?;
        }
        if let Some(v) = self.grid_cells {
            config.set("grid_cells", &v.to_string())?;
        }
        if let Some(v) = self.cadence {
            config.set("cadence", &v.to_string())?;
        }
        if let Some(v) = self.alpha {
            config.set("alpha", &v.to_string())?;
        }
        config.validate()?;
        Ok(config)
    }
}

#[derive(Args, Debug)]
pub struct RunArgs {
    #[command(flatten)]
    pub overrides: ScenarioOverrides,
    /// Output directory
    #[arg(long)]
    pub out: PathBuf,
    /// Resume from an ensemble checkpoint written by an earlier run
    #[arg(long)]
    pub restart: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct EulerianArgs {
    #[command(flatten)]
    pub overrides: ScenarioOverrides,
    /// Spatial nodes of the phase grid
    #[arg(long, default_value_t = 64)]
    pub nx: usize,
    /// Velocity nodes of the phase grid
    #[arg(long, default_value_t = 129)]
    pub nv: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct CompareArgs {
    /// Ensemble checkpoint (Lagrangian state)
    #[arg(long)]
    pub particles: PathBuf,
    /// Phase-grid snapshot (Eulerian state)
    #[arg(long)]
    pub phase: PathBuf,
    /// Optional report file
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct DiagnoseArgs {
    /// Ensemble checkpoint
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Optional CSV output
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct CompactifyArgs {
    /// Damping profile: "constant" or "invquad"
    #[arg(long, default_value = "constant")]
    pub damping: String,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct KernelCheckArgs {
    /// Restrict to one dimension (default: all of 1, 2, 3)
    #[arg(long)]
    pub d: Option<usize>,
    #[arg(long, default_value_t = 4)]
    pub mollify_n: u32,
    /// Directory for radial-table CSV exports
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Run a parsed command; returns the process exit code.
pub fn dispatch(cli: Cli) -> i32 {
    let result = match cli.command {
        Command::Run(args) => cmd_run(&args).map(|_| ()),
        Command::RunEulerian(args) => cmd_run_eulerian(&args).map(|_| ()),
        Command::Compare(args) => cmd_compare(&args).map(|_| ()),
        Command::Diagnose(args) => cmd_diagnose(&args).map(|_| ()),
        Command::CompactifyDemo(args) => cmd_compactify_demo(&args),
        Command::KernelCheck(args) => cmd_kernel_check(&args),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

/// Summary of a finished Lagrangian run.
pub struct RunSummary {
    pub config: RunConfig,
    pub records: usize,
    pub failed: Option<String>,
    pub final_time: f64,
}

pub fn cmd_run(args: &RunArgs) -> Result<RunSummary> {
    let config = args.overrides.build_config()?;
    std::fs::create_dir_all(&args.out)?;
    let hash = config.config_hash();
    let hash_hex = config.config_hash_hex();
    let kernel_spec = config.kernel_spec()?;
    let kernel_header = kernel_spec.header_string();

    let scenario = &config.scenario;
    let grid = scenario.grid(config.grid_cells)?;
    let solver = FieldSolver::new(grid.clone(), kernel_spec)?;

    let (mut flow, n_steps) = match &args.restart {
        None => {
            let ensemble = scenario.sample(config.particles, config.seed)?;
            let mass = ensemble.total_mass();
            let background = scenario.background_on_grid(&grid, mass);
            let flow = Flow::new(
                ensemble,
                FieldModel::SelfConsistent { solver, background },
                config.escape_radius,
                TimeDirection::Forward,
            )?;
            (flow, (config.t_end / config.dt).round() as u64)
        }
        Some(path) => {
            let chk = snapshot::read_checkpoint(path)?;
            if chk.kernel != kernel_spec {
                return Err(VlasovError::Config(format!(
                    "checkpoint kernel ({}) does not match the configured kernel ({})",
                    chk.kernel.header_string(),
                    kernel_header
                )));
            }
            // the background must be rebuilt against the initial mass, which
            // escaped particles still count toward
            let mass = chk.ensemble.total_mass();
            let background = scenario.background_on_grid(&grid, mass);
            let mut flow = Flow::new(
                chk.ensemble,
                FieldModel::SelfConsistent { solver, background },
                chk.escape_radius,
                TimeDirection::Forward,
            )?;
            flow.restore_accumulators(chk.certificate, chk.step_index);
            let total_steps = (config.t_end / config.dt).round() as u64;
            (flow, total_steps.saturating_sub(chk.step_index))
        }
    };

    let params = RunParams {
        dt: config.dt,
        n_steps,
        cadence: config.cadence,
        ledger_cut_x: config.escape_radius,
        ledger_cut_v: config.escape_radius,
        casimir_ids: diagnostics::CasimirId::all().to_vec(),
        tracked: 0,
    };
    let output = flow::run(&mut flow, &params)?;

    snapshot::write_text(&args.out.join("config.txt"), &config.serialize())?;
    let csv = snapshot::diagnostics_csv(
        &output.records,
        &hash_hex,
        &kernel_header,
        output.failure.as_deref(),
    );
    snapshot::write_text(&args.out.join("diagnostics.csv"), &csv)?;
    snapshot::write_text(
        &args.out.join("plot.gp"),
        &snapshot::diagnostics_plot_script("diagnostics.csv"),
    )?;
    let chk = snapshot::Checkpoint {
        config_hash: hash,
        kernel: kernel_spec,
        step_index: flow.step_index,
        certificate: flow.certificate(),
        escape_radius: config.escape_radius,
        ensemble: flow.ensemble.clone(),
    };
    snapshot::write_checkpoint(&args.out.join("ensemble_final.chk"), &chk)?;
    if let Some((grid, rho)) = crate::scenarios::deposit_density(&flow) {
        snapshot::write_grid(&args.out.join("rho_final.bin"), &grid, &rho, &kernel_spec, hash)?;
        if let FieldModel::SelfConsistent { solver, background } = &flow.field {
            let e = solver.solve(&rho, background.as_deref())?;
            for (c, comp) in e.iter().enumerate() {
                snapshot::write_grid(
                    &args.out.join(format!("e{c}_final.bin")),
                    &grid,
                    comp,
                    &kernel_spec,
                    hash,
                )?;
            }
        }
    }
    if let Some(reason) = &output.failure {
        // partial outputs were written with the failure marker above
        return Err(VlasovError::Numerics(reason.clone()));
    }
    Ok(RunSummary {
        final_time: flow.ensemble.t,
        records: output.records.len(),
        failed: output.failure.clone(),
        config,
    })
}

/// Initial phase-grid state for a 1D scenario.
pub fn initial_phase_grid(scenario: &Scenario, nx: usize, nv: usize) -> Result<PhaseGridFunction> {
    let length = match &scenario.family {
        ScenarioFamily::Landau { length, .. } | ScenarioFamily::TwoStream { length, .. } => *length,
        _ => {
            return Err(VlasovError::Config(
                "the Eulerian reference solver needs a 1D scenario".into(),
            ))
        }
    };
    let f0 = scenario.evaluator();
    PhaseGridFunction::from_evaluator(nx, nv, 0.0, length, scenario.v_max, move |x, v| {
        f0(&[x], &[v])
    })
}

pub fn cmd_run_eulerian(args: &EulerianArgs) -> Result<PathBuf> {
    let config = args.overrides.build_config()?;
    std::fs::create_dir_all(&args.out)?;
    let kernel_spec = config.kernel_spec()?;
    let state = initial_phase_grid(&config.scenario, args.nx, args.nv)?;
    let solver = EulerianSolver::new(EulerianField::SelfConsistent { spec: kernel_spec }, state.hx)?;
    let n_steps = (config.t_end / config.dt).round() as u64;
    let snaps = eulerian::run_eulerian(&solver, state, config.dt, n_steps, config.cadence)?;
    // scalar series
    let mut csv = format!(
        "# config_hash={}\n# kernel: {}\nt,mass,casimir_sq,field_energy\n",
        config.config_hash_hex(),
        kernel_spec.header_string()
    );
    for snap in &snaps {
        let casimir = diagnostics::casimir_phase_grid(&snap.state, diagnostics::CasimirId::Square);
        let field_energy: f64 =
            snap.field.iter().map(|e| e * e).sum::<f64>() * snap.state.hx;
        csv.push_str(&format!("{},{},{},{}\n", snap.t, snap.state.mass(), casimir, field_energy));
    }
    snapshot::write_text(&args.out.join("eulerian.csv"), &csv)?;
    let final_path = args.out.join("phase_final.bin");
    snapshot::write_phase_grid(
        &final_path,
        &snaps.last().unwrap().state,
        &kernel_spec,
        config.config_hash(),
    )?;
    snapshot::write_text(&args.out.join("config.txt"), &config.serialize())?;
    Ok(final_path)
}

pub fn cmd_compare(args: &CompareArgs) -> Result<f64> {
    let chk = snapshot::read_checkpoint(&args.particles)?;
    let mut data = Vec::new();
    use std::io::Read;
    std::fs::File::open(&args.phase)?.read_to_end(&mut data)?;
    let (phase, phase_kernel, _) = snapshot::decode_phase_grid(&data)?;
    if chk.kernel != phase_kernel {
        return Err(VlasovError::Config(format!(
            "kernel specs disagree: particles have '{}', phase grid has '{}'",
            chk.kernel.header_string(),
            phase_kernel.header_string()
        )));
    }
    if (chk.ensemble.t - phase.t).abs() > 1e-9 * (1.0 + phase.t.abs()) {
        return Err(VlasovError::Input(format!(
            "states are at different times: {} vs {}",
            chk.ensemble.t, phase.t
        )));
    }
    let distance = eulerian::cross_validate(&chk.ensemble, &phase)?;
    println!("l1_phase_distance = {distance}");
    if let Some(path) = &args.out {
        snapshot::write_text(path, &format!("l1_phase_distance = {distance}\n"))?;
    }
    Ok(distance)
}

pub fn cmd_diagnose(args: &DiagnoseArgs) -> Result<String> {
    let chk = snapshot::read_checkpoint(&args.checkpoint)?;
    let ens = &chk.ensemble;
    let ledger = crate::fields::ledger_update(
        &ens.x,
        &ens.v,
        &ens.w,
        ens.d,
        ens.total_mass(),
        chk.escape_radius,
        chk.escape_radius,
    )?;
    let mut csv = format!(
        "# config_hash={:016x}\n# kernel: {}\nt,mass_total,active_mass,escaped_v_mass,escaped_x_mass,kinetic",
        chk.config_hash,
        chk.kernel.header_string()
    );
    for id in diagnostics::CasimirId::all() {
        csv.push_str(&format!(",casimir_{}", id.id()));
    }
    let masses = ens.band_masses();
    for k in 0..masses.len() {
        csv.push_str(&format!(",band_mass_{k}"));
    }
    csv.push('\n');
    csv.push_str(&format!(
        "{},{},{},{},{},{}",
        ens.t,
        ens.total_mass(),
        ledger.active_mass,
        ledger.escaped_v_mass,
        ledger.escaped_x_mass,
        diagnostics::kinetic_energy(ens)
    ));
    for id in diagnostics::CasimirId::all() {
        csv.push_str(&format!(",{}", diagnostics::casimir_particles(ens, id)));
    }
    for m in &masses {
        csv.push_str(&format!(",{m}"));
    }
    csv.push('\n');
    print!("{csv}");
    if let Some(path) = &args.out {
        snapshot::write_text(path, &csv)?;
    }
    Ok(csv)
}

pub fn cmd_compactify_demo(args: &CompactifyArgs) -> Result<()> {
    std::fs::create_dir_all(&args.out)?;
    let damping = match args.damping.as_str() {
        "constant" => DampingProfile::Constant(1.0),
        "invquad" => DampingProfile::InverseQuadratic { scale: 5.0 },
        other => {
            return Err(VlasovError::Config(format!(
                "unknown damping '{other}' (use constant or invquad)"
            )))
        }
    };
    let map = compactify::build_profile(damping)?;
    snapshot::write_text(&args.out.join("profile.csv"), &snapshot::profile_csv(&map.table_rows(512)))?;

    // bounded orbit: harmonic phase flow
    let harmonic = |z: &[f64], out: &mut [f64]| {
        out[0] = z[1];
        out[1] = -z[0];
    };
    let orbit =
        compactify::integrate_on_sphere(&map, &harmonic, &[1.0, 0.0], 1e-3, 2.0 * std::f64::consts::PI, 1e-2)?;
    snapshot::write_text(&args.out.join("orbit_sphere.csv"), &snapshot::sphere_run_csv(&orbit))?;

    // manufactured blow-up: superlinear restoring force reversed
    let blowup = |z: &[f64], out: &mut [f64]| {
        out[0] = z[1];
        out[1] = z[0] * (1.0 + z[0] * z[0]);
    };
    let run = compactify::integrate_on_sphere(&map, &blowup, &[1.0, 0.0], 2e-5, 10.0, 1e-2)?;
    snapshot::write_text(&args.out.join("blowup_sphere.csv"), &snapshot::sphere_run_csv(&run))?;
    let escape_radius = map.invert_angle(std::f64::consts::PI - 1e-2)?;
    let reference =
        compactify::euclidean_escape_time(&blowup, &[1.0, 0.0], escape_radius, 10.0, 1e-12)?;
    let mut report = String::new();
    report.push_str(&format!("pole_neighborhood_radius = {}\n", 1e-2));
    report.push_str(&format!("equivalent_escape_radius = {escape_radius}\n"));
    match (run.reached_pole, reference) {
        (Some(sphere_t), Some(euclid_t)) => {
            report.push_str(&format!("sphere_pole_time = {sphere_t}\n"));
            report.push_str(&format!("euclidean_escape_time = {euclid_t}\n"));
            report.push_str(&format!(
                "relative_gap = {}\n",
                (sphere_t - euclid_t).abs() / euclid_t
            ));
        }
        _ => report.push_str("escape not reached within the horizon\n"),
    }
    snapshot::write_text(&args.out.join("report.txt"), &report)?;
    print!("{report}");
    Ok(())
}

pub fn cmd_kernel_check(args: &KernelCheckArgs) -> Result<()> {
    let dims: Vec<usize> = match args.d {
        Some(d) => vec![d],
        None => vec![1, 2, 3],
    };
    let mut all_ok = true;
    for &d in &dims {
        let exact = Kernel::new(KernelSpec::exact(d, Sign::Repulsive)?)?;
        for r in [0.5, 1.0, 2.0] {
            let flux = flux_through_sphere(&exact, r)?;
            let ok = (flux - 1.0).abs() <= 1e-6;
            all_ok &= ok;
            println!(
                "[{}] d={d} flux through sphere r={r}: {flux}",
                if ok { "PASS" } else { "FAIL" }
            );
        }
        let spec = KernelSpec::mollified(d, Sign::Repulsive, args.mollify_n)?;
        let kernel = Kernel::new(spec)?;
        let core = 1.0 / args.mollify_n as f64;
        let mut worst = 0.0f64;
        for i in 1..=64 {
            let r = core + (3.0 - core) * i as f64 / 64.0;
            let mut x = vec![0.0; d];
            x[0] = r;
            let kn = kernel.force(&x)?;
            let k = poisson_kernel(&x, &KernelSpec::exact(d, Sign::Repulsive)?)?;
            worst = worst.max((kn[0] - k[0]).abs());
        }
        let ok = worst <= 1e-8;
        all_ok &= ok;
        println!(
            "[{}] d={d} mollified kernel matches exact outside core (worst gap {worst:e})",
            if ok { "PASS" } else { "FAIL" }
        );
        if let Some(dir) = &args.out {
            std::fs::create_dir_all(dir)?;
            let rows = kernel.radial_table(3.0, 256)?;
            snapshot::write_text(
                &dir.join(format!("kernel_table_d{d}.csv")),
                &snapshot::kernel_table_csv(&rows, &spec.header_string()),
            )?;
        }
    }
    if all_ok {
        Ok(())
    } else {
        Err(VlasovError::Numerics("kernel checks failed".into()))
    }
}
