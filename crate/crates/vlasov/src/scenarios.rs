//! Initial-data library: analytic families, deterministic phase-space
//! samplers, truncation of rough data, and run orchestration.

use crate::error::{Result, VlasovError};
use crate::fields::{deposit, FieldSolver, GridSpec, Topology};
use crate::flow::{Flow, FieldModel, ParticleEnsemble, RunOutput, RunParams, TimeDirection};
use crate::kernels::{KernelSpec, Sign};
use crate::numeric::halton_point;
use std::f64::consts::PI;

/// Registered analytic initial-data families.
#[derive(Debug, Clone, PartialEq)]
pub enum ScenarioFamily {
    /// `(1 + alpha cos(k x)) * Maxwellian(v)` on a periodic interval with a
    /// neutralizing uniform background.
    Landau { length: f64, wavenumber: f64, alpha: f64, v_thermal: f64, mean_density: f64 },
    /// Counter-streaming Maxwellian pair on a periodic interval.
    TwoStream {
        length: f64,
        wavenumber: f64,
        alpha: f64,
        v_thermal: f64,
        v_drift: f64,
        mean_density: f64,
    },
    /// Isotropic compact bump in d = 3 (attractive toy problem).
    Bump3d { amplitude: f64, x_radius: f64, v_radius: f64 },
    /// Compact bump in d = 2 against a uniform-disc background of equal
    /// mass.
    Disc2d { amplitude: f64, x_radius: f64, v_radius: f64, background_radius: f64 },
}

/// A fully described initial-value problem.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub d: usize,
    pub sigma: Sign,
    pub family: ScenarioFamily,
    /// Velocity cutoff of the sampling box (multiples of the thermal or
    /// bump scale are chosen by the presets).
    pub v_max: f64,
}

impl Scenario {
    pub fn preset(name: &str) -> Result<Scenario> {
        match name {
            "landau" => Ok(Scenario {
                name: name.into(),
                d: 1,
                sigma: Sign::Repulsive,
                family: ScenarioFamily::Landau {
                    length: 4.0 * PI,
                    wavenumber: 0.5,
                    alpha: 0.05,
                    v_thermal: 1.0,
                    mean_density: 1.0,
                },
                v_max: 8.0,
            }),
            "two-stream" => Ok(Scenario {
                name: name.into(),
                d: 1,
                sigma: Sign::Repulsive,
                family: ScenarioFamily::TwoStream {
                    length: 4.0 * PI,
                    wavenumber: 0.5,
                    alpha: 1e-3,
                    v_thermal: 0.5,
                    v_drift: 2.0,
                    mean_density: 1.0,
                },
                v_max: 8.0,
            }),
            "bump3d" => Ok(Scenario {
                name: name.into(),
                d: 3,
                sigma: Sign::Attractive,
                family: ScenarioFamily::Bump3d { amplitude: 1.0, x_radius: 0.5, v_radius: 0.5 },
                v_max: 0.5,
            }),
            "disc2d" => Ok(Scenario {
                name: name.into(),
                d: 2,
                sigma: Sign::Repulsive,
                family: ScenarioFamily::Disc2d {
                    amplitude: 1.0,
                    x_radius: 0.5,
                    v_radius: 0.5,
                    background_radius: 0.8,
                },
                v_max: 0.5,
            }),
            other => Err(VlasovError::Config(format!("unknown scenario family '{other}'"))),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64, what: &str| -> Result<()> {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(VlasovError::Config(format!("{what} must be positive, got {v}")))
            }
        };
        positive(self.v_max, "v_max")?;
        match &self.family {
            ScenarioFamily::Landau { length, wavenumber, alpha, v_thermal, mean_density } => {
                if self.d != 1 {
                    return Err(VlasovError::Config("landau preset is 1D".into()));
                }
                positive(*length, "length")?;
                positive(*v_thermal, "v_thermal")?;
                positive(*mean_density, "mean_density")?;
                if *alpha < 0.0 || *alpha >= 1.0 {
                    return Err(VlasovError::Config("alpha must lie in [0, 1)".into()));
                }
                let cycles = wavenumber * length / (2.0 * PI);
                if (cycles - cycles.round()).abs() > 1e-9 {
                    return Err(VlasovError::Config(
                        "wavenumber must fit whole periods in the box".into(),
                    ));
                }
            }
            ScenarioFamily::TwoStream { length, wavenumber, alpha, v_thermal, v_drift, mean_density } => {
                if self.d != 1 {
                    return Err(VlasovError::Config("two-stream preset is 1D".into()));
                }
                positive(*length, "length")?;
                positive(*v_thermal, "v_thermal")?;
                positive(*v_drift, "v_drift")?;
                positive(*mean_density, "mean_density")?;
                if *alpha < 0.0 || *alpha >= 1.0 {
                    return Err(VlasovError::Config("alpha must lie in [0, 1)".into()));
                }
                let cycles = wavenumber * length / (2.0 * PI);
                if (cycles - cycles.round()).abs() > 1e-9 {
                    return Err(VlasovError::Config(
                        "wavenumber must fit whole periods in the box".into(),
                    ));
                }
            }
            ScenarioFamily::Bump3d { amplitude, x_radius, v_radius } => {
                if self.d != 3 {
                    return Err(VlasovError::Config("bump3d preset is 3D".into()));
                }
                positive(*amplitude, "amplitude")?;
                positive(*x_radius, "x_radius")?;
                positive(*v_radius, "v_radius")?;
            }
            ScenarioFamily::Disc2d { amplitude, x_radius, v_radius, background_radius } => {
                if self.d != 2 {
                    return Err(VlasovError::Config("disc2d preset is 2D".into()));
                }
                positive(*amplitude, "amplitude")?;
                positive(*x_radius, "x_radius")?;
                positive(*v_radius, "v_radius")?;
                positive(*background_radius, "background_radius")?;
            }
        }
        Ok(())
    }

    /// Pointwise evaluator of the initial phase-space density.
    pub fn evaluator(&self) -> Box<dyn Fn(&[f64], &[f64]) -> f64 + Send + Sync> {
        match self.family.clone() {
            ScenarioFamily::Landau { wavenumber, alpha, v_thermal, mean_density, .. } => {
                let norm = mean_density / (2.0 * PI * v_thermal * v_thermal).sqrt();
                Box::new(move |x, v| {
                    (1.0 + alpha * (wavenumber * x[0]).cos())
                        * norm
                        * (-v[0] * v[0] / (2.0 * v_thermal * v_thermal)).exp()
                })
            }
            ScenarioFamily::TwoStream {
                wavenumber, alpha, v_thermal, v_drift, mean_density, ..
            } => {
                let norm = 0.5 * mean_density / (2.0 * PI * v_thermal * v_thermal).sqrt();
                Box::new(move |x, v| {
                    let up = (-(v[0] - v_drift).powi(2) / (2.0 * v_thermal * v_thermal)).exp();
                    let down = (-(v[0] + v_drift).powi(2) / (2.0 * v_thermal * v_thermal)).exp();
                    (1.0 + alpha * (wavenumber * x[0]).cos()) * norm * (up + down)
                })
            }
            ScenarioFamily::Bump3d { amplitude, x_radius, v_radius } => Box::new(move |x, v| {
                let rx = x.iter().map(|c| c * c).sum::<f64>().sqrt() / x_radius;
                let rv = v.iter().map(|c| c * c).sum::<f64>().sqrt() / v_radius;
                let bx = (1.0 - rx * rx).max(0.0);
                let bv = (1.0 - rv * rv).max(0.0);
                amplitude * bx * bx * bv * bv
            }),
            ScenarioFamily::Disc2d { amplitude, x_radius, v_radius, .. } => Box::new(move |x, v| {
                let rx = x.iter().map(|c| c * c).sum::<f64>().sqrt() / x_radius;
                let rv = v.iter().map(|c| c * c).sum::<f64>().sqrt() / v_radius;
                let bx = (1.0 - rx * rx).max(0.0);
                let bv = (1.0 - rv * rv).max(0.0);
                amplitude * bx * bx * bv * bv
            }),
        }
    }

    /// Analytic total mass of the family.
    pub fn analytic_mass(&self) -> f64 {
        match &self.family {
            ScenarioFamily::Landau { length, mean_density, .. } => mean_density * length,
            ScenarioFamily::TwoStream { length, mean_density, .. } => mean_density * length,
            // integral of (1 - r^2/R^2)_+^2 is 32 pi R^3 / 105 in 3D
            ScenarioFamily::Bump3d { amplitude, x_radius, v_radius } => {
                let shape = 32.0 * PI / 105.0;
                amplitude * shape * x_radius.powi(3) * shape * v_radius.powi(3)
            }
            // and pi R^2 / 3 in 2D
            ScenarioFamily::Disc2d { amplitude, x_radius, v_radius, .. } => {
                let shape = PI / 3.0;
                amplitude * shape * x_radius.powi(2) * shape * v_radius.powi(2)
            }
        }
    }

    /// Sampling box: per-axis (origin, extent) for positions then
    /// velocities.
    fn sampling_box(&self) -> Vec<(f64, f64)> {
        let mut axes = Vec::with_capacity(2 * self.d);
        match &self.family {
            ScenarioFamily::Landau { length, .. } | ScenarioFamily::TwoStream { length, .. } => {
                axes.push((0.0, *length));
            }
            ScenarioFamily::Bump3d { x_radius, .. } => {
                for _ in 0..3 {
                    axes.push((-x_radius, 2.0 * x_radius));
                }
            }
            ScenarioFamily::Disc2d { x_radius, .. } => {
                for _ in 0..2 {
                    axes.push((-x_radius, 2.0 * x_radius));
                }
            }
        }
        for _ in 0..self.d {
            axes.push((-self.v_max, 2.0 * self.v_max));
        }
        axes
    }

    /// Low-discrepancy sampling of the initial density: `n` candidate
    /// points in the support box, weighted by `f0 * box volume / n`.
    /// Deterministic in `(n, seed)`.
    pub fn sample(&self, n: u64, seed: u64) -> Result<ParticleEnsemble> {
        self.validate()?;
        let f0 = self.evaluator();
        let axes = self.sampling_box();
        let dim = axes.len();
        let volume: f64 = axes.iter().map(|(_, extent)| extent).product();
        let cell_volume = volume / n as f64;
        let mut point = vec![0.0; dim];
        let mut xs = Vec::new();
        let mut vs = Vec::new();
        let mut ws = Vec::new();
        let mut values = Vec::new();
        // decorrelate distinct seeds by an index offset
        let offset = (seed & 0xffff) * 7919;
        for i in 0..n {
            halton_point(i, dim, offset, &mut point);
            let z: Vec<f64> = axes
                .iter()
                .zip(&point)
                .map(|((origin, extent), u)| origin + extent * u)
                .collect();
            let (x, v) = z.split_at(self.d);
            let value = f0(x, v);
            if value > 1e-12 {
                xs.extend_from_slice(x);
                vs.extend_from_slice(v);
                ws.push(value * cell_volume);
                values.push(value);
            }
        }
        ParticleEnsemble::new(self.d, xs, vs, ws, values, seed)
    }

    /// Tensor-lattice sampling (counts per phase axis, positions at cell
    /// centers). Quiet starts for equilibrium tests.
    pub fn sample_lattice(&self, counts: &[usize], seed: u64) -> Result<ParticleEnsemble> {
        self.validate()?;
        if counts.len() != 2 * self.d {
            return Err(VlasovError::Config(format!(
                "lattice needs {} axis counts, got {}",
                2 * self.d,
                counts.len()
            )));
        }
        let f0 = self.evaluator();
        let axes = self.sampling_box();
        let cell_volume: f64 = axes
            .iter()
            .zip(counts)
            .map(|((_, extent), &c)| extent / c as f64)
            .product();
        let total: usize = counts.iter().product();
        let mut xs = Vec::new();
        let mut vs = Vec::new();
        let mut ws = Vec::new();
        let mut values = Vec::new();
        for flat in 0..total {
            let mut rem = flat;
            let mut z = vec![0.0; axes.len()];
            for k in (0..axes.len()).rev() {
                let i = rem % counts[k];
                rem /= counts[k];
                let (origin, extent) = axes[k];
                z[k] = origin + extent * (i as f64 + 0.5) / counts[k] as f64;
            }
            let (x, v) = z.split_at(self.d);
            let value = f0(x, v);
            if value > 1e-12 {
                xs.extend_from_slice(x);
                vs.extend_from_slice(v);
                ws.push(value * cell_volume);
                values.push(value);
            }
        }
        ParticleEnsemble::new(self.d, xs, vs, ws, values, seed)
    }

    /// Field grid matched to the family's domain.
    pub fn grid(&self, cells_per_axis: usize) -> Result<GridSpec> {
        match &self.family {
            ScenarioFamily::Landau { length, .. } | ScenarioFamily::TwoStream { length, .. } => {
                GridSpec::new(vec![0.0], vec![cells_per_axis], length / cells_per_axis as f64,
                    Topology::Periodic)
            }
            ScenarioFamily::Bump3d { x_radius, .. } => {
                let half = 2.4 * x_radius;
                let h = 2.0 * half / cells_per_axis as f64;
                GridSpec::new(vec![-half; 3], vec![cells_per_axis; 3], h, Topology::FreeSpace)
            }
            ScenarioFamily::Disc2d { background_radius, .. } => {
                let half = 2.0 * background_radius;
                let h = 2.0 * half / cells_per_axis as f64;
                GridSpec::new(vec![-half; 2], vec![cells_per_axis; 2], h, Topology::FreeSpace)
            }
        }
    }

    /// Background density on the grid, when the family carries one. The
    /// values are rescaled so the grid masses match exactly.
    pub fn background_on_grid(&self, grid: &GridSpec, target_mass: f64) -> Option<Vec<f64>> {
        match &self.family {
            ScenarioFamily::Landau { .. } | ScenarioFamily::TwoStream { .. } => {
                let value = target_mass / (grid.len() as f64 * grid.cell_volume());
                Some(vec![value; grid.len()])
            }
            ScenarioFamily::Disc2d { background_radius, .. } => {
                let mut bg: Vec<f64> = (0..grid.len())
                    .map(|i| {
                        let x = grid.node_position(i);
                        if crate::numeric::norm(&x) <= *background_radius {
                            1.0
                        } else {
                            0.0
                        }
                    })
                    .collect();
                let raw: f64 = bg.iter().sum::<f64>() * grid.cell_volume();
                if raw > 0.0 {
                    let scale = target_mass / raw;
                    bg.iter_mut().for_each(|v| *v *= scale);
                }
                Some(bg)
            }
            ScenarioFamily::Bump3d { .. } => None,
        }
    }
}

/// Clamp an evaluator to level `n` and restrict it to the phase-space ball
/// of radius `n`: `min(n, 1_{B_n}(x,v) f0(x,v))`. Pointwise nondecreasing
/// in `n`, with energies converging upward to those of the full data.
pub fn truncate_initial(
    f0: Box<dyn Fn(&[f64], &[f64]) -> f64 + Send + Sync>,
    n: u32,
) -> Result<Box<dyn Fn(&[f64], &[f64]) -> f64 + Send + Sync>> {
    if n < 1 {
        return Err(VlasovError::Config("truncation level must be >= 1".into()));
    }
    let level = n as f64;
    Ok(Box::new(move |x, v| {
        let r2 = x.iter().map(|c| c * c).sum::<f64>() + v.iter().map(|c| c * c).sum::<f64>();
        if r2 > level * level {
            0.0
        } else {
            f0(x, v).min(level)
        }
    }))
}

/// Everything needed to push a scenario: ensemble, field model, ledger
/// cutoffs.
pub struct PreparedRun {
    pub flow: Flow,
    pub params: RunParams,
}

/// Build the self-consistent flow for a scenario with explicit numerical
/// parameters (the command-line front end drives this).
pub fn prepare_run(
    scenario: &Scenario,
    n_particles: u64,
    grid_cells: usize,
    mollify_n: u32,
    dt: f64,
    t_end: f64,
    cadence: u64,
    escape_radius: f64,
    seed: u64,
    tracked: usize,
) -> Result<PreparedRun> {
    scenario.validate()?;
    if dt <= 0.0 || t_end < 0.0 {
        return Err(VlasovError::Config("need dt > 0 and t_end >= 0".into()));
    }
    let grid = scenario.grid(grid_cells)?;
    let spec = KernelSpec::mollified(scenario.d, scenario.sigma, mollify_n)?;
    let solver = FieldSolver::new(grid.clone(), spec)?;
    let ensemble = scenario.sample(n_particles, seed)?;
    let mass = ensemble.total_mass();
    let background = match scenario.background_on_grid(&grid, mass) {
        Some(bg) => Some(bg),
        None => None,
    };
    let flow = Flow::new(
        ensemble,
        FieldModel::SelfConsistent { solver, background },
        escape_radius,
        TimeDirection::Forward,
    )?;
    let n_steps = (t_end / dt).round() as u64;
    let params = RunParams {
        dt,
        n_steps,
        cadence,
        ledger_cut_x: escape_radius,
        ledger_cut_v: escape_radius,
        casimir_ids: crate::diagnostics::CasimirId::all().to_vec(),
        tracked,
    };
    Ok(PreparedRun { flow, params })
}

/// Convenience wrapper: prepare and execute in one call.
pub fn execute(prepared: &mut PreparedRun) -> Result<RunOutput> {
    crate::flow::run(&mut prepared.flow, &prepared.params)
}

/// Deposit an ensemble onto a grid and return the density (helper for
/// outputs and cross-checks).
pub fn deposit_density(flow: &Flow) -> Option<(GridSpec, Vec<f64>)> {
    match &flow.field {
        FieldModel::SelfConsistent { solver, .. } => {
            let ens = &flow.ensemble;
            let d = ens.d;
            let mut positions = Vec::new();
            let mut weights = Vec::new();
            for p in 0..ens.len() {
                if ens.status[p].is_active() {
                    positions.extend_from_slice(&ens.x[p * d..(p + 1) * d]);
                    weights.push(ens.w[p]);
                }
            }
            let dep = deposit(&positions, &weights, solver.grid());
            Some((solver.grid().clone(), dep.rho))
        }
        _ => None,
    }
}
