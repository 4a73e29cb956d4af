//! Lagrangian Landau-damping run: push a perturbed Maxwellian with the
//! self-consistent mollified field and watch the field energy decay while
//! mass, band masses and carried Casimirs stay constant.
//!
//!     cargo run --release --example landau_damping [out_dir]

use vlasov::config::RunConfig;
use vlasov::diagnostics::{self, CasimirId};
use vlasov::fields::FieldSolver;
use vlasov::flow::{self, FieldModel, Flow, RunParams, TimeDirection};
use vlasov::snapshot;

fn main() -> vlasov::Result<()> {
    let out_dir = std::env::args().nth(1).unwrap_or_else(|| "out/landau".into());
    std::fs::create_dir_all(&out_dir)?;

    let mut config = RunConfig::preset("landau")?;
    config.set("alpha", "0.1")?;
    config.set("t_end", "40")?;
    config.set("particles", "40000")?;
    config.validate()?;

    let scenario = &config.scenario;
    let grid = scenario.grid(config.grid_cells)?;
    let solver = FieldSolver::new(grid.clone(), config.kernel_spec()?)?;
    let ensemble = scenario.sample(config.particles, config.seed)?;
    let background = scenario.background_on_grid(&grid, ensemble.total_mass());
    let mut flow = Flow::new(
        ensemble,
        FieldModel::SelfConsistent { solver, background },
        config.escape_radius,
        TimeDirection::Forward,
    )?;

    let params = RunParams {
        dt: config.dt,
        n_steps: (config.t_end / config.dt).round() as u64,
        cadence: config.cadence,
        ledger_cut_x: config.escape_radius,
        ledger_cut_v: config.escape_radius,
        casimir_ids: CasimirId::all().to_vec(),
        tracked: 0,
    };
    let output = flow::run(&mut flow, &params)?;

    let first = &output.records[0];
    println!("{:>8} {:>14} {:>14} {:>12} {:>12}", "t", "field_energy", "total_energy", "mass_drift", "casimir_drift");
    for rec in output.records.iter().step_by(8) {
        let mass_drift = (rec.mass_total - first.mass_total).abs() / first.mass_total;
        let casimir_drift = rec
            .casimirs
            .iter()
            .zip(&first.casimirs)
            .map(|((_, a), (_, b))| (a - b).abs() / b.abs().max(1e-300))
            .fold(0.0f64, f64::max);
        println!(
            "{:8.2} {:14.6e} {:14.8e} {:12.2e} {:12.2e}",
            rec.t, rec.potential_e2, rec.total_energy, mass_drift, casimir_drift
        );
    }
    let verdicts = diagnostics::energy_report(&output.records, 1.0, 0.01, 1e-9);
    println!("\nmax energy drift: {:.3e}", verdicts.energy_max_rel_drift);
    println!("potential inequality held: {}", verdicts.potential_inequality_ok);

    let csv = snapshot::diagnostics_csv(
        &output.records,
        &config.config_hash_hex(),
        &config.kernel_spec()?.header_string(),
        None,
    );
    let path = std::path::Path::new(&out_dir).join("diagnostics.csv");
    snapshot::write_text(&path, &csv)?;
    snapshot::write_text(
        &std::path::Path::new(&out_dir).join("plot.gp"),
        &snapshot::diagnostics_plot_script("diagnostics.csv"),
    )?;
    println!("wrote {}", path.display());
    Ok(())
}
