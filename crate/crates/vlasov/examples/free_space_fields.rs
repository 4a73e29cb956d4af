//! Free-space field solve: deposit a uniform ball in d = 3 and compare the
//! exterior field magnitude against the analytic point-mass value.
//!
//!     cargo run --release --example free_space_fields

use vlasov::fields::{FieldSolver, GridSpec, Topology};
use vlasov::kernels::{dimensional_constant, KernelSpec, Sign};

fn main() -> vlasov::Result<()> {
    let cells = 64usize;
    let half = 0.8;
    let h = 2.0 * half / cells as f64;
    let grid = GridSpec::new(vec![-half; 3], vec![cells; 3], h, Topology::FreeSpace)?;
    let spec = KernelSpec::mollified(3, Sign::Repulsive, 8)?;
    let solver = FieldSolver::new(grid.clone(), spec)?;

    // rasterize a unit-mass ball of radius 0.2 with subcell sampling
    let radius = 0.2;
    let sub = 6;
    let mut rho = vec![0.0; grid.len()];
    for (i, slot) in rho.iter_mut().enumerate() {
        let x = grid.node_position(i);
        let mut inside = 0usize;
        for a in 0..sub {
            for b in 0..sub {
                for c in 0..sub {
                    let p = [
                        x[0] + h * ((a as f64 + 0.5) / sub as f64 - 0.5),
                        x[1] + h * ((b as f64 + 0.5) / sub as f64 - 0.5),
                        x[2] + h * ((c as f64 + 0.5) / sub as f64 - 0.5),
                    ];
                    if vlasov::numeric::norm(&p) <= radius {
                        inside += 1;
                    }
                }
            }
        }
        *slot = inside as f64 / (sub * sub * sub) as f64;
    }
    let total: f64 = rho.iter().sum::<f64>() * grid.cell_volume();
    rho.iter_mut().for_each(|v| *v /= total);

    let e = solver.solve(&rho, None)?;
    let c3 = dimensional_constant(3)?;
    println!("uniform ball of mass 1, radius {radius}; exterior field vs c_3/r^2:");
    println!("{:>8} {:>14} {:>14} {:>10}", "r", "|E|", "c_3/r^2", "rel_err");
    for cells_out in [12usize, 16, 20, 24] {
        let r = cells_out as f64 * h;
        let idx = grid.flat_index(&[cells / 2 + cells_out, cells / 2, cells / 2]);
        // node_position uses origin-aligned indexing: x = -half + i*h
        let x = grid.node_position(idx);
        let mag = (e[0][idx].powi(2) + e[1][idx].powi(2) + e[2][idx].powi(2)).sqrt();
        let exact = c3 / (x[0] * x[0]);
        println!("{:8.4} {:14.8e} {:14.8e} {:10.2e}", r, mag, exact, (mag - exact).abs() / exact);
    }
    Ok(())
}
