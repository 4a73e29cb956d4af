//! Escape bookkeeping: drive particles with a frozen expanding field, watch
//! them cross the escape ball, and keep the mass ledger balanced between
//! active, fast (escaped in velocity) and gone (escaped in space) buckets.
//!
//!     cargo run --release --example effective_mass_ledger

use vlasov::fields::ledger_update;
use vlasov::flow::{self, FieldModel, Flow, ParticleEnsemble, ParticleStatus, RunParams, TimeDirection};

fn main() -> vlasov::Result<()> {
    // outward push that stiffens with radius: outer particles blow up first
    let field = |x: &[f64], out: &mut [f64]| {
        out[0] = x[0] * (1.0 + 0.6 * x[0] * x[0]);
    };
    let n = 64;
    let xs: Vec<f64> = (0..n).map(|i| 0.2 + 1.3 * i as f64 / n as f64).collect();
    let ens = ParticleEnsemble::new(
        1,
        xs,
        vec![0.0; n],
        vec![1.0 / n as f64; n],
        vec![1.0; n],
        0,
    )?;
    let total = ens.total_mass();
    let mut probe = Flow::new(ens, FieldModel::Frozen(Box::new(field)), 25.0, TimeDirection::Forward)?;
    let params = RunParams {
        dt: 1e-3,
        n_steps: 4000,
        cadence: 400,
        ledger_cut_x: 10.0,
        ledger_cut_v: 10.0,
        casimir_ids: vec![],
        tracked: 0,
    };
    let output = flow::run(&mut probe, &params)?;

    println!("{:>7} {:>9} {:>11} {:>11} {:>9} {:>12}", "t", "active", "escaped_v", "escaped_x", "sum", "certificate");
    for rec in &output.records {
        let sum = rec.active_mass + rec.escaped_v_mass + rec.escaped_x_mass;
        println!(
            "{:7.2} {:9.4} {:11.4} {:11.4} {:9.4} {:12.5}",
            rec.t, rec.active_mass, rec.escaped_v_mass, rec.escaped_x_mass, sum, rec.noblowup_partial
        );
    }

    let ledger = ledger_update(
        &probe.ensemble.x,
        &probe.ensemble.v,
        &probe.ensemble.w,
        1,
        total,
        10.0,
        10.0,
    )?;
    println!("\nledger partition balanced: {}", ledger.check_partition(1e-12));
    println!("effective (field-generating) mass: {:.4} <= initial {:.4}", ledger.effective_mass(), total);
    let escape_times: Vec<f64> = probe
        .ensemble
        .status
        .iter()
        .filter_map(|s| match s {
            ParticleStatus::Escaped { t_plus } => Some(*t_plus),
            _ => None,
        })
        .collect();
    println!(
        "{} of {} particles escaped; first T+ = {:.3}, last T+ = {:.3}",
        escape_times.len(),
        n,
        escape_times.iter().copied().fold(f64::INFINITY, f64::min),
        escape_times.iter().copied().fold(0.0f64, f64::max),
    );
    Ok(())
}
