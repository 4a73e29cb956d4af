//! Weak-form transport residual of the Eulerian solver: evaluate the
//! renormalized continuity equation against a compactly supported
//! space-time test function for a bounded beta. On an exact solution the
//! residual vanishes; under simultaneous refinement of dx, dv and dt the
//! free-streaming residual decays at first order or better.
//!
//!     cargo run --release --example transport_residual

use std::f64::consts::PI;
use vlasov::diagnostics::{renorm_residual, BetaId, SpaceTimeTest};
use vlasov::eulerian::{run_eulerian, EulerianField, EulerianSolver, PhaseGridFunction};

fn main() -> vlasov::Result<()> {
    let t_end = 2.0;
    let test_fn = SpaceTimeTest {
        x_center: 6.0,
        x_radius: 3.0,
        v_center: 0.0,
        v_radius: 4.0,
        time_window: Some(t_end),
    };
    println!("free streaming, beta = arctan:");
    println!("{:>14} {:>9} {:>14} {:>8}", "grid", "dt", "residual", "order");
    let mut previous: Option<f64> = None;
    for (nx, nv, dt) in [(24usize, 49usize, 0.1f64), (48, 97, 0.05), (96, 193, 0.025)] {
        let state = PhaseGridFunction::from_evaluator(nx, nv, 0.0, 4.0 * PI, 8.0, |x, v| {
            (-(x - 6.0) * (x - 6.0) / 0.8).exp() * (-v * v / 2.0).exp()
        })?;
        let solver = EulerianSolver::new(EulerianField::Off, state.hx)?;
        let n_steps = (t_end / dt).round() as u64;
        let snaps = run_eulerian(&solver, state, dt, n_steps, 1)?;
        let residual = renorm_residual(&snaps, BetaId::Arctan, &test_fn)?;
        let order = previous.map(|p: f64| (p / residual).log2());
        match order {
            Some(o) => println!("{:>9}x{:<4} {dt:>9} {residual:>14.6e} {o:>8.2}", nx, nv),
            None => println!("{:>9}x{:<4} {dt:>9} {residual:>14.6e} {:>8}", nx, nv, "-"),
        }
        previous = Some(residual);
    }

    // constant-in-time test function: the residual reduces to the flux-form
    // imbalance between the endpoints
    let state = PhaseGridFunction::from_evaluator(96, 193, 0.0, 4.0 * PI, 8.0, |x, v| {
        (-(x - 6.0) * (x - 6.0) / 0.8).exp() * (-v * v / 2.0).exp()
    })?;
    let solver = EulerianSolver::new(EulerianField::Off, state.hx)?;
    let snaps = run_eulerian(&solver, state, 0.025, 80, 1)?;
    let static_test = SpaceTimeTest { time_window: None, ..test_fn };
    let residual = renorm_residual(&snaps, BetaId::Rational, &static_test)?;
    println!("\nconstant-in-time test, beta = s/(1+s^2): residual = {residual:.3e}");
    Ok(())
}
