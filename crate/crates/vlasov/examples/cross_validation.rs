//! Lagrangian vs Eulerian cross-validation: deposit the particle ensemble
//! onto the reference phase grid at t = 10 and watch the L1 distance fall
//! as the particle count doubles.
//!
//!     cargo run --release --example cross_validation

use vlasov::cli::initial_phase_grid;
use vlasov::eulerian::{cross_validate, run_eulerian, EulerianField, EulerianSolver};
use vlasov::fields::FieldSolver;
use vlasov::flow::{self, FieldModel, Flow, RunParams, TimeDirection};
use vlasov::kernels::{KernelSpec, Sign};
use vlasov::scenarios::Scenario;

fn main() -> vlasov::Result<()> {
    let scenario = Scenario::preset("landau")?;
    let dt = 0.05;
    let t_end = 10.0;
    let n_steps = (t_end / dt) as u64;
    let spec = KernelSpec::mollified(1, Sign::Repulsive, 4)?;

    let state = initial_phase_grid(&scenario, 64, 129)?;
    let solver = EulerianSolver::new(EulerianField::SelfConsistent { spec }, state.hx)?;
    let mass = state.mass();
    let snaps = run_eulerian(&solver, state, dt, n_steps, n_steps)?;
    let reference = &snaps.last().unwrap().state;
    println!("Eulerian reference at t = {t_end}: 64x129 phase grid, mass {mass:.6}");

    println!("{:>10} {:>16} {:>16}", "N", "L1 distance", "relative");
    for n in [10_000u64, 20_000, 40_000, 80_000] {
        let grid = scenario.grid(64)?;
        let field_solver = FieldSolver::new(grid.clone(), spec)?;
        let ensemble = scenario.sample(n, 21)?;
        let background = scenario.background_on_grid(&grid, ensemble.total_mass());
        let mut flow = Flow::new(
            ensemble,
            FieldModel::SelfConsistent { solver: field_solver, background },
            40.0,
            TimeDirection::Forward,
        )?;
        let params = RunParams {
            dt,
            n_steps,
            cadence: n_steps,
            ledger_cut_x: 40.0,
            ledger_cut_v: 40.0,
            casimir_ids: vec![],
            tracked: 0,
        };
        flow::run(&mut flow, &params)?;
        let dist = cross_validate(&flow.ensemble, reference)?;
        println!("{n:>10} {dist:>16.6e} {:>16.4}", dist / mass);
    }
    Ok(())
}
