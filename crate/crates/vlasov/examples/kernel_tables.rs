//! Interaction kernels at a glance: flux normalization through spheres,
//! agreement of the mollified kernel with the exact one outside its core,
//! and radial-table export.
//!
//!     cargo run --release --example kernel_tables [out_dir]

use vlasov::kernels::{
    flux_through_sphere, fundamental_solution, Kernel, KernelSpec, Sign,
};
use vlasov::snapshot;

fn main() -> vlasov::Result<()> {
    let out_dir = std::env::args().nth(1).unwrap_or_else(|| "out/kernels".into());
    std::fs::create_dir_all(&out_dir)?;

    println!("flux of the exact kernel through spheres (should equal sigma):");
    for d in 1..=3usize {
        let kernel = Kernel::new(KernelSpec::exact(d, Sign::Repulsive)?)?;
        for r in [0.5, 1.0, 2.0] {
            println!("  d={d}  r={r:<4}  flux = {:+.9}", flux_through_sphere(&kernel, r)?);
        }
    }

    println!("\nmollified kernel vs exact along a ray (d=3, n=4):");
    let spec = KernelSpec::mollified(3, Sign::Repulsive, 4)?;
    let kernel = Kernel::new(spec)?;
    let exact = KernelSpec::exact(3, Sign::Repulsive)?;
    println!("  {:>6} {:>14} {:>14}", "r", "|K_n|", "|K|");
    for i in 1..=12 {
        let r = 0.05 * i as f64;
        let kn = kernel.force(&[r, 0.0, 0.0])?[0];
        let k = if r > 0.0 {
            vlasov::kernels::poisson_kernel(&[r, 0.0, 0.0], &exact)?[0]
        } else {
            f64::NAN
        };
        println!("  {r:6.3} {kn:14.8} {k:14.8}");
    }
    println!("  (the two columns agree exactly for r >= 1/n = 0.25)");

    println!("\nfundamental solutions at |x| = 2:");
    for d in 1..=3usize {
        let mut x = vec![0.0; d];
        x[0] = 2.0;
        println!("  d={d}: H = {:+.9}", fundamental_solution(&x, d)?);
    }

    for d in 1..=3usize {
        let spec = KernelSpec::mollified(d, Sign::Repulsive, 4)?;
        let kernel = Kernel::new(spec)?;
        let rows = kernel.radial_table(3.0, 512)?;
        let path = std::path::Path::new(&out_dir).join(format!("kernel_table_d{d}.csv"));
        snapshot::write_text(&path, &snapshot::kernel_table_csv(&rows, &spec.header_string()))?;
        println!("wrote {}", path.display());
    }
    Ok(())
}
