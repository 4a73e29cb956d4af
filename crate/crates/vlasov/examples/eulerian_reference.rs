//! The independent Eulerian reference solver on Landau damping: mass stays
//! pinned, the squared-density Casimir drifts only through interpolation
//! diffusion, and the drift shrinks under grid refinement.
//!
//!     cargo run --release --example eulerian_reference

use vlasov::cli::initial_phase_grid;
use vlasov::diagnostics::{casimir_phase_grid, CasimirId};
use vlasov::eulerian::{run_eulerian, EulerianField, EulerianSolver};
use vlasov::kernels::{KernelSpec, Sign};
use vlasov::scenarios::Scenario;

fn main() -> vlasov::Result<()> {
    let scenario = Scenario::preset("landau")?;
    let spec = KernelSpec::mollified(1, Sign::Repulsive, 4)?;
    let dt = 0.05;
    let t_end = 10.0;
    let n_steps = (t_end / dt) as u64;

    println!("{:>10} {:>14} {:>14} {:>14}", "grid", "mass_drift", "f^2_drift", "field_energy(T)");
    for (nx, nv) in [(64usize, 129usize), (128, 257), (256, 513)] {
        let state = initial_phase_grid(&scenario, nx, nv)?;
        let solver = EulerianSolver::new(EulerianField::SelfConsistent { spec }, state.hx)?;
        let mass0 = state.mass();
        let casimir0 = casimir_phase_grid(&state, CasimirId::Square);
        let snaps = run_eulerian(&solver, state, dt, n_steps, n_steps)?;
        let last = snaps.last().unwrap();
        let mass_drift = (last.state.mass() - mass0).abs() / mass0;
        let casimir_drift =
            (casimir_phase_grid(&last.state, CasimirId::Square) - casimir0).abs() / casimir0;
        let field_energy: f64 = last.field.iter().map(|e| e * e).sum::<f64>() * last.state.hx;
        println!("{:>7}x{:<3} {mass_drift:14.2e} {casimir_drift:14.2e} {field_energy:14.6e}", nx, nv);
    }
    println!("\n(the f^2 drift roughly halves or better with each refinement)");
    Ok(())
}
