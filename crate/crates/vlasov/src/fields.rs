//! Density deposition, grid field solves and the effective-mass ledger.
//!
//! Particles are deposited with cloud-in-cell (multilinear) weights, which
//! form a partition of unity and therefore conserve mass exactly. The field
//! is the convolution `E = sigma * K_n * (rho - rho_b)`:
//!
//! * on whole-space grids it is computed by zero-padded fast convolution
//!   with the tabulated mollified kernel (free-space boundary conditions,
//!   no periodic images);
//! * on periodic 1D grids (the desk-scale proxy domain) it is a direct
//!   Toeplitz apply of the periodized mollified kernel against a
//!   neutralized density.

use crate::error::{Result, VlasovError};
use crate::fft::fft_nd;
use crate::kernels::{Kernel, KernelSpec, Mollification};
use rustfft::num_complex::Complex64;

/// Grid boundary handling.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Topology {
    /// Compactly supported data inside the box; fields decay at infinity.
    FreeSpace,
    /// Periodic wrap in every spatial direction (supported for d = 1).
    Periodic,
}

/// Uniform node-centered spatial grid.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub d: usize,
    pub origin: Vec<f64>,
    /// Nodes per axis.
    pub cells: Vec<usize>,
    /// Uniform node spacing.
    pub h: f64,
    pub topology: Topology,
}

impl GridSpec {
    pub fn new(
        origin: Vec<f64>,
        cells: Vec<usize>,
        h: f64,
        topology: Topology,
    ) -> Result<Self> {
        let d = origin.len();
        if d == 0 || d > 3 || cells.len() != d {
            return Err(VlasovError::Config(format!(
                "grid dimension must be 1..=3 with matching extents, got origin len {d}, cells len {}",
                cells.len()
            )));
        }
        if h <= 0.0 || !h.is_finite() {
            return Err(VlasovError::Config(format!("grid spacing must be positive, got {h}")));
        }
        if cells.iter().any(|&c| c < 4) {
            return Err(VlasovError::Config("grids need at least 4 nodes per axis".into()));
        }
        if topology == Topology::Periodic && d != 1 {
            return Err(VlasovError::Config(
                "periodic topology is supported for d = 1 only".into(),
            ));
        }
        Ok(Self { d, origin, cells, h, topology })
    }

    pub fn len(&self) -> usize {
        self.cells.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn cell_volume(&self) -> f64 {
        self.h.powi(self.d as i32)
    }

    /// Periodic domain length along an axis.
    pub fn extent(&self, axis: usize) -> f64 {
        self.cells[axis] as f64 * self.h
    }

    pub fn flat_index(&self, idx: &[usize]) -> usize {
        let mut flat = 0;
        for (k, &i) in idx.iter().enumerate() {
            flat = flat * self.cells[k] + i;
        }
        flat
    }

    pub fn node_position(&self, flat: usize) -> Vec<f64> {
        let mut rem = flat;
        let mut pos = vec![0.0; self.d];
        for k in (0..self.d).rev() {
            pos[k] = self.origin[k] + (rem % self.cells[k]) as f64 * self.h;
            rem /= self.cells[k];
        }
        pos
    }

    /// CIC stencil for a position: base node, fractional offsets, and
    /// whether the point lies inside the interpolation range.
    fn cic_base(&self, x: &[f64]) -> Option<(Vec<usize>, Vec<f64>)> {
        let mut base = Vec::with_capacity(self.d);
        let mut frac = Vec::with_capacity(self.d);
        for k in 0..self.d {
            let u = (x[k] - self.origin[k]) / self.h;
            match self.topology {
                Topology::Periodic => {
                    let m = self.cells[k] as f64;
                    let u = u - (u / m).floor() * m;
                    let i0 = (u.floor() as usize).min(self.cells[k] - 1);
                    base.push(i0);
                    frac.push(u - i0 as f64);
                }
                Topology::FreeSpace => {
                    if !u.is_finite() || u < 0.0 || u > (self.cells[k] - 1) as f64 {
                        return None;
                    }
                    let i0 = (u.floor() as usize).min(self.cells[k] - 2);
                    base.push(i0);
                    frac.push(u - i0 as f64);
                }
            }
        }
        Some((base, frac))
    }
}

/// Deposited density plus the mass that fell outside the grid.
#[derive(Debug, Clone)]
pub struct Deposit {
    pub rho: Vec<f64>,
    pub out_of_bounds_mass: f64,
}

/// Cloud-in-cell deposition of weighted points onto the grid. Returns a
/// density (mass per cell volume); mass outside the grid is reported, not
/// an error.
pub fn deposit(positions: &[f64], weights: &[f64], grid: &GridSpec) -> Deposit {
    let d = grid.d;
    debug_assert_eq!(positions.len(), weights.len() * d);
    let mut rho = vec![0.0; grid.len()];
    let inv_vol = 1.0 / grid.cell_volume();
    let mut lost = 0.0;
    let corners = 1usize << d;
    for (p, &w) in weights.iter().enumerate() {
        let x = &positions[p * d..(p + 1) * d];
        let Some((base, frac)) = grid.cic_base(x) else {
            lost += w;
            continue;
        };
        for corner in 0..corners {
            let mut cw = w * inv_vol;
            let mut idx = [0usize; 3];
            for k in 0..d {
                if corner >> k & 1 == 1 {
                    cw *= frac[k];
                    idx[k] = base[k] + 1;
                    if grid.topology == Topology::Periodic && idx[k] == grid.cells[k] {
                        idx[k] = 0;
                    }
                } else {
                    cw *= 1.0 - frac[k];
                    idx[k] = base[k];
                }
            }
            rho[grid.flat_index(&idx[..d])] += cw;
        }
    }
    Deposit { rho, out_of_bounds_mass: lost }
}

/// Multilinear gather of per-node vector data to a point. Returns zero
/// outside the grid range (free space).
pub fn gather(components: &[Vec<f64>], grid: &GridSpec, x: &[f64], out: &mut [f64]) {
    let d = grid.d;
    out.iter_mut().for_each(|v| *v = 0.0);
    let Some((base, frac)) = grid.cic_base(x) else {
        return;
    };
    let corners = 1usize << d;
    for corner in 0..corners {
        let mut cw = 1.0;
        let mut idx = [0usize; 3];
        for k in 0..d {
            if corner >> k & 1 == 1 {
                cw *= frac[k];
                idx[k] = base[k] + 1;
                if grid.topology == Topology::Periodic && idx[k] == grid.cells[k] {
                    idx[k] = 0;
                }
            } else {
                cw *= 1.0 - frac[k];
                idx[k] = base[k];
            }
        }
        let flat = grid.flat_index(&idx[..d]);
        for (c, comp) in components.iter().enumerate() {
            out[c] += cw * comp[flat];
        }
    }
}

enum SolverBackend {
    /// Zero-padded fast convolution; kernel spectra per force component,
    /// plus the smoothed-potential spectrum for energy quadrature.
    FreeSpace {
        padded: Vec<usize>,
        force_spectra: Vec<Vec<Complex64>>,
        potential_spectrum: Option<Vec<Complex64>>,
    },
    /// Periodized 1D kernel rows (direct Toeplitz apply).
    Periodic { force_row: Vec<f64>, potential_row: Vec<f64> },
}

/// Grid field solver for a fixed grid and kernel spec.
pub struct FieldSolver {
    grid: GridSpec,
    kernel: Kernel,
    backend: SolverBackend,
}

impl FieldSolver {
    pub fn new(grid: GridSpec, spec: KernelSpec) -> Result<Self> {
        Self::with_padding(grid, spec, 2)
    }

    /// `pad_factor >= 2` extends the padded box further; the interior field
    /// must not depend on it (free-space contract).
    pub fn with_padding(grid: GridSpec, spec: KernelSpec, pad_factor: usize) -> Result<Self> {
        if spec.d != grid.d {
            return Err(VlasovError::Config(format!(
                "kernel dimension {} does not match grid dimension {}",
                spec.d, grid.d
            )));
        }
        let n = match spec.mollification {
            Mollification::Level(n) => n,
            Mollification::Exact => {
                return Err(VlasovError::Config(
                    "grid field solves require a mollified kernel".into(),
                ))
            }
        };
        if 1.0 / (n as f64) < grid.h {
            return Err(VlasovError::Config(format!(
                "mollification radius 1/{n} is below the grid spacing {}; the kernel core must cover at least one cell",
                grid.h
            )));
        }
        let kernel = Kernel::new(spec)?;
        let backend = match grid.topology {
            Topology::FreeSpace => {
                if pad_factor < 2 {
                    return Err(VlasovError::Config("pad factor must be >= 2".into()));
                }
                Self::build_free_space(&grid, &kernel, pad_factor)?
            }
            Topology::Periodic => Self::build_periodic(&grid, &kernel)?,
        };
        Ok(Self { grid, kernel, backend })
    }

    fn build_free_space(
        grid: &GridSpec,
        kernel: &Kernel,
        pad_factor: usize,
    ) -> Result<SolverBackend> {
        let d = grid.d;
        let padded: Vec<usize> = grid.cells.iter().map(|&m| m * pad_factor).collect();
        let total: usize = padded.iter().product();
        let vol = grid.cell_volume();
        let mut force_spectra = Vec::with_capacity(d);
        // offset vector for a padded index (wraparound ordering)
        let offset = |flat: usize| -> Vec<f64> {
            let mut rem = flat;
            let mut off = vec![0.0; d];
            for k in (0..d).rev() {
                let i = rem % padded[k];
                rem /= padded[k];
                let signed = if i <= padded[k] / 2 { i as f64 } else { i as f64 - padded[k] as f64 };
                off[k] = signed * grid.h;
            }
            off
        };
        for comp in 0..d {
            let mut samples = vec![Complex64::default(); total];
            for (flat, slot) in samples.iter_mut().enumerate() {
                let off = offset(flat);
                let k = kernel.force(&off)?;
                *slot = Complex64::new(k[comp] * vol, 0.0);
            }
            fft_nd(&mut samples, &padded, false);
            force_spectra.push(samples);
        }
        let potential_spectrum = if d >= 2 {
            let mut samples = vec![Complex64::default(); total];
            for (flat, slot) in samples.iter_mut().enumerate() {
                let off = offset(flat);
                let r = crate::numeric::norm(&off);
                *slot = Complex64::new(kernel.potential_radial(r)? * vol, 0.0);
            }
            fft_nd(&mut samples, &padded, false);
            Some(samples)
        } else {
            None
        };
        Ok(SolverBackend::FreeSpace { padded, force_spectra, potential_spectrum })
    }

    fn build_periodic(grid: &GridSpec, kernel: &Kernel) -> Result<SolverBackend> {
        let m = grid.cells[0];
        let length = grid.extent(0);
        let mollified_abs = MollifiedAbs::new(kernel.spec())?;
        let mut force_row = vec![0.0; m];
        let mut potential_row = vec![0.0; m];
        for (i, (f, p)) in force_row.iter_mut().zip(potential_row.iter_mut()).enumerate() {
            let y = if i <= m / 2 { i as f64 * grid.h } else { (i as f64 - m as f64) * grid.h };
            // periodized force kernel: smoothed jump part plus the exact
            // linear image correction (linear functions commute with the
            // radial mollifier)
            *f = (kernel.force_magnitude(y.abs())? * y.signum() - y / length) * grid.h;
            // periodized potential: smoothed |y| part plus quadratic
            // correction; additive constants drop against zero-mean data
            *p = (-0.5 * mollified_abs.eval(y.abs()) + y * y / (2.0 * length)) * grid.h;
        }
        Ok(SolverBackend::Periodic { force_row, potential_row })
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn kernel(&self) -> &Kernel {
        &self.kernel
    }

    pub fn spec(&self) -> &KernelSpec {
        self.kernel.spec()
    }

    fn neutralized(&self, rho: &[f64], background: Option<&[f64]>) -> Result<Vec<f64>> {
        if rho.len() != self.grid.len() {
            return Err(VlasovError::Input(format!(
                "density has {} cells, grid expects {}",
                rho.len(),
                self.grid.len()
            )));
        }
        if rho.iter().any(|v| !v.is_finite()) {
            return Err(VlasovError::Input("density contains non-finite values".into()));
        }
        match background {
            None => match self.grid.topology {
                // a periodic field needs zero-mean sources; neutralize with
                // the implied uniform background
                Topology::Periodic => {
                    let mean = rho.iter().sum::<f64>() / rho.len() as f64;
                    Ok(rho.iter().map(|v| v - mean).collect())
                }
                Topology::FreeSpace => Ok(rho.to_vec()),
            },
            Some(bg) => {
                if bg.len() != rho.len() {
                    return Err(VlasovError::Config("background grid size mismatch".into()));
                }
                if self.grid.topology == Topology::FreeSpace && self.grid.d != 2 {
                    return Err(VlasovError::Config(
                        "background densities are a d=2 device (or the periodic 1D proxy)".into(),
                    ));
                }
                if self.grid.topology == Topology::FreeSpace {
                    let mass_rho: f64 = rho.iter().sum::<f64>() * self.grid.cell_volume();
                    let mass_bg: f64 = bg.iter().sum::<f64>() * self.grid.cell_volume();
                    let scale = mass_rho.abs().max(mass_bg.abs()).max(f64::MIN_POSITIVE);
                    if (mass_rho - mass_bg).abs() > 1e-8 * scale {
                        return Err(VlasovError::Config(format!(
                            "background mass {mass_bg} does not match density mass {mass_rho}"
                        )));
                    }
                }
                Ok(rho.iter().zip(bg).map(|(r, b)| r - b).collect())
            }
        }
    }

    /// Force field `E = sigma K_n * (rho - rho_b)`, one array per component.
    pub fn solve(&self, rho: &[f64], background: Option<&[f64]>) -> Result<Vec<Vec<f64>>> {
        let g = self.neutralized(rho, background)?;
        match &self.backend {
            SolverBackend::FreeSpace { padded, force_spectra, .. } => {
                let spectrum = self.padded_spectrum(&g, padded);
                let mut out = Vec::with_capacity(self.grid.d);
                for comp in force_spectra {
                    out.push(self.convolve_back(&spectrum, comp, padded));
                }
                Ok(out)
            }
            SolverBackend::Periodic { force_row, .. } => {
                let sigma = self.spec().sigma.as_f64();
                Ok(vec![toeplitz_apply(force_row, &g, sigma)])
            }
        }
    }

    /// Smoothed potential `V = sigma H_n * (rho - rho_b)`.
    pub fn solve_potential(&self, rho: &[f64], background: Option<&[f64]>) -> Result<Vec<f64>> {
        let g = self.neutralized(rho, background)?;
        match &self.backend {
            SolverBackend::FreeSpace { padded, potential_spectrum, .. } => {
                let spec = potential_spectrum.as_ref().ok_or_else(|| {
                    VlasovError::Config(
                        "potentials need d >= 2 (no decaying fundamental solution in 1D)".into(),
                    )
                })?;
                let spectrum = self.padded_spectrum(&g, padded);
                let sigma = self.spec().sigma.as_f64();
                let mut v = self.convolve_back(&spectrum, spec, padded);
                v.iter_mut().for_each(|x| *x *= sigma);
                Ok(v)
            }
            SolverBackend::Periodic { potential_row, .. } => {
                let sigma = self.spec().sigma.as_f64();
                Ok(toeplitz_apply(potential_row, &g, sigma))
            }
        }
    }

    fn padded_spectrum(&self, g: &[f64], padded: &[usize]) -> Vec<Complex64> {
        let total: usize = padded.iter().product();
        let mut buf = vec![Complex64::default(); total];
        let d = self.grid.d;
        for (flat, &v) in g.iter().enumerate() {
            if v == 0.0 {
                continue;
            }
            // re-index from grid extents to padded extents
            let mut rem = flat;
            let mut pf = 0usize;
            for k in 0..d {
                let stride: usize = self.grid.cells[k + 1..].iter().product();
                let i = rem / stride;
                rem %= stride;
                pf = pf * padded[k] + i;
            }
            buf[pf] = Complex64::new(v, 0.0);
        }
        fft_nd(&mut buf, padded, false);
        buf
    }

    fn convolve_back(
        &self,
        spectrum: &[Complex64],
        kernel_spectrum: &[Complex64],
        padded: &[usize],
    ) -> Vec<f64> {
        let mut buf: Vec<Complex64> =
            spectrum.iter().zip(kernel_spectrum).map(|(a, b)| a * b).collect();
        fft_nd(&mut buf, padded, true);
        let d = self.grid.d;
        let mut out = vec![0.0; self.grid.len()];
        for (flat, slot) in out.iter_mut().enumerate() {
            let mut rem = flat;
            let mut pf = 0usize;
            for k in 0..d {
                let stride: usize = self.grid.cells[k + 1..].iter().product();
                let i = rem / stride;
                rem %= stride;
                pf = pf * padded[k] + i;
            }
            *slot = buf[pf].re;
        }
        out
    }
}

/// Direct circular Toeplitz apply `out_i = scale * sum_m row[(i-m) mod M] g_m`.
fn toeplitz_apply(row: &[f64], g: &[f64], scale: f64) -> Vec<f64> {
    let m = row.len();
    let mut out = vec![0.0; m];
    for (i, slot) in out.iter_mut().enumerate() {
        let mut acc = 0.0;
        for (j, &gj) in g.iter().enumerate() {
            acc += row[(m + i - j) % m] * gj;
        }
        *slot = scale * acc;
    }
    out
}

/// Mollified |y| profile used by the periodized 1D potential.
struct MollifiedAbs {
    core: f64,
    table: crate::numeric::MonotoneCubic,
}

impl MollifiedAbs {
    fn new(spec: &KernelSpec) -> Result<Self> {
        let n = spec
            .mollification
            .level()
            .ok_or_else(|| VlasovError::Config("mollified spec required".into()))?;
        let core = 1.0 / n as f64;
        let nodes = 257;
        let mut xs = Vec::with_capacity(nodes);
        let mut ys = Vec::with_capacity(nodes);
        let shape = spec.shape;
        for i in 0..nodes {
            let y = core * i as f64 / (nodes - 1) as f64;
            let f = |z: f64| (y - z).abs() * crate::kernels::mollifier(n, &[z], shape);
            let val = crate::numeric::adaptive_simpson(&f, -core, core, 1e-13);
            xs.push(y);
            ys.push(val);
        }
        Ok(Self { core, table: crate::numeric::MonotoneCubic::new(xs, ys) })
    }

    fn eval(&self, y: f64) -> f64 {
        if y >= self.core {
            y
        } else {
            self.table.eval(y)
        }
    }
}

/// The two quadratic energy forms `(int H*rho rho, int |grad H * rho|^2)`.
///
/// They agree for smooth compactly supported densities and the first
/// dominates in general. The first integrand is supported inside the box;
/// the second extends over all of space with a slowly decaying `1/r^2`
/// field, so in d = 3 the exterior contribution is restored by a monopole
/// tail integral about the center of mass. The dipole term vanishes there
/// and the angular cross terms of higher multipoles integrate to zero, so
/// the correction is exact for radial data and an underestimate otherwise
/// (which cannot break the inequality).
pub fn potential_two_forms(
    solver: &FieldSolver,
    rho: &[f64],
    background: Option<&[f64]>,
) -> Result<(f64, f64)> {
    if solver.grid().d < 2 && solver.grid().topology == Topology::FreeSpace {
        return Err(VlasovError::Config(
            "potential forms need d >= 2 (1D fundamental solution does not decay)".into(),
        ));
    }
    if rho.iter().any(|&v| v < 0.0) {
        return Err(VlasovError::Input("density must be nonnegative".into()));
    }
    let grid = solver.grid();
    let vol = grid.cell_volume();
    let g = solver.neutralized(rho, background)?;
    let v = solver.solve_potential(rho, background)?;
    let e = solver.solve(rho, background)?;
    let sigma = solver.spec().sigma.as_f64();
    // int (H_n * g) g: strip the interaction sign carried by the potential
    let first: f64 = v.iter().zip(&g).map(|(vi, gi)| sigma * vi * gi).sum::<f64>() * vol;
    let mut second = 0.0;
    for i in 0..grid.len() {
        let mut sq = 0.0;
        for comp in &e {
            sq += comp[i] * comp[i];
        }
        second += sq;
    }
    second *= vol;
    if grid.d == 3 && grid.topology == Topology::FreeSpace {
        second += monopole_tail(grid, &g);
    }
    Ok((first, second))
}

/// `int_{outside box} |c_3 m (x - c)/|x - c|^3|^2 dx` for total mass `m`
/// centered at the center of mass `c`: along each direction the radial
/// integral beyond the box-exit distance `s` is `1/s`, leaving a smooth
/// angular quadrature.
fn monopole_tail(grid: &GridSpec, g: &[f64]) -> f64 {
    let vol = grid.cell_volume();
    let mass: f64 = g.iter().sum::<f64>() * vol;
    if mass == 0.0 {
        return 0.0;
    }
    let mut center = [0.0f64; 3];
    for (i, &gi) in g.iter().enumerate() {
        let x = grid.node_position(i);
        for k in 0..3 {
            center[k] += gi * x[k];
        }
    }
    for c in center.iter_mut() {
        *c *= vol / mass;
    }
    // distance along direction u from the center to the box boundary
    let exit_distance = |u: &[f64; 3]| -> f64 {
        let mut s = f64::INFINITY;
        for k in 0..3 {
            let lo = grid.origin[k];
            let hi = grid.origin[k] + (grid.cells[k] - 1) as f64 * grid.h;
            if u[k] > 0.0 {
                s = s.min((hi - center[k]) / u[k]);
            } else if u[k] < 0.0 {
                s = s.min((lo - center[k]) / u[k]);
            }
        }
        s.max(1e-12)
    };
    let (nodes, weights) = crate::numeric::gauss_legendre(64);
    let m_phi = 128;
    let c3 = crate::kernels::dimensional_constant(3).expect("d = 3");
    let mut integral = 0.0;
    for (ct, w) in nodes.iter().zip(&weights) {
        let st = (1.0 - ct * ct).sqrt();
        for j in 0..m_phi {
            let phi = 2.0 * std::f64::consts::PI * j as f64 / m_phi as f64;
            let u = [st * phi.cos(), st * phi.sin(), *ct];
            integral += w * (2.0 * std::f64::consts::PI / m_phi as f64) / exit_distance(&u);
        }
    }
    (c3 * mass).powi(2) * integral
}

/// Mass bookkeeping: the weight of every particle is classified as active,
/// escaped in velocity (still inside the spatial ball) or escaped in space.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EffectiveMassLedger {
    pub total_initial_mass: f64,
    pub active_mass: f64,
    pub escaped_v_mass: f64,
    pub escaped_x_mass: f64,
}

impl EffectiveMassLedger {
    /// Mass generating the effective field: everything still in physical
    /// space, however fast it moves.
    pub fn effective_mass(&self) -> f64 {
        self.active_mass + self.escaped_v_mass
    }

    pub fn check_partition(&self, tol_rel: f64) -> bool {
        let sum = self.active_mass + self.escaped_v_mass + self.escaped_x_mass;
        (sum - self.total_initial_mass).abs()
            <= tol_rel * self.total_initial_mass.abs().max(f64::MIN_POSITIVE)
            && self.effective_mass() <= self.total_initial_mass * (1.0 + tol_rel)
    }
}

/// Classify particle weights by the spatial and velocity cutoff radii.
pub fn ledger_update(
    positions: &[f64],
    velocities: &[f64],
    weights: &[f64],
    d: usize,
    total_initial_mass: f64,
    cutoff_x: f64,
    cutoff_v: f64,
) -> Result<EffectiveMassLedger> {
    if cutoff_x <= 0.0 || cutoff_v <= 0.0 {
        return Err(VlasovError::Config("ledger cutoffs must be positive".into()));
    }
    let mut ledger = EffectiveMassLedger {
        total_initial_mass,
        active_mass: 0.0,
        escaped_v_mass: 0.0,
        escaped_x_mass: 0.0,
    };
    for (p, &w) in weights.iter().enumerate() {
        let x = &positions[p * d..(p + 1) * d];
        let v = &velocities[p * d..(p + 1) * d];
        if crate::numeric::norm(x) > cutoff_x {
            ledger.escaped_x_mass += w;
        } else if crate::numeric::norm(v) > cutoff_v {
            ledger.escaped_v_mass += w;
        } else {
            ledger.active_mass += w;
        }
    }
    Ok(ledger)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::Sign;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn grid_1d(m: usize, h: f64) -> GridSpec {
        GridSpec::new(vec![0.0], vec![m], h, Topology::Periodic).unwrap()
    }

    #[test]
    fn deposit_particle_on_node() {
        let grid = GridSpec::new(vec![0.0, 0.0], vec![8, 8], 0.5, Topology::FreeSpace).unwrap();
        let dep = deposit(&[1.0, 1.5], &[3.0], &grid);
        let idx = grid.flat_index(&[2, 3]);
        assert_relative_eq!(dep.rho[idx], 3.0 / 0.25);
        let total: f64 = dep.rho.iter().sum();
        assert_relative_eq!(total, 3.0 / 0.25);
        assert_eq!(dep.out_of_bounds_mass, 0.0);
    }

    #[test]
    fn deposit_midpoint_splits_weight() {
        let grid = GridSpec::new(vec![0.0], vec![8], 1.0, Topology::FreeSpace).unwrap();
        let dep = deposit(&[2.5], &[1.0], &grid);
        assert_relative_eq!(dep.rho[2], 0.5);
        assert_relative_eq!(dep.rho[3], 0.5);
    }

    #[test]
    fn deposit_routes_out_of_bounds_to_ledger() {
        let grid = GridSpec::new(vec![0.0], vec![8], 1.0, Topology::FreeSpace).unwrap();
        let dep = deposit(&[12.0, 3.0], &[2.0, 1.0], &grid);
        assert_eq!(dep.out_of_bounds_mass, 2.0);
        let total: f64 = dep.rho.iter().sum::<f64>() * grid.cell_volume();
        assert_relative_eq!(total, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn empty_ensemble_gives_zero_field() {
        let grid = grid_1d(32, 0.25);
        let spec = KernelSpec::mollified(1, Sign::Repulsive, 4).unwrap();
        let solver = FieldSolver::new(grid.clone(), spec).unwrap();
        let dep = deposit(&[], &[], &grid);
        let e = solver.solve(&dep.rho, None).unwrap();
        assert!(e[0].iter().all(|&v| v == 0.0));
    }

    proptest! {
        #[test]
        fn deposit_conserves_mass(seed in 0u64..500) {
            let mut rng = crate::numeric::SplitMix64::new(seed);
            let grid = GridSpec::new(vec![0.0, 0.0], vec![16, 12], 0.3, Topology::FreeSpace).unwrap();
            let n = 1000;
            let mut pos = Vec::with_capacity(2 * n);
            let mut w = Vec::with_capacity(n);
            for _ in 0..n {
                pos.push(rng.range(0.0, 0.3 * 15.0));
                pos.push(rng.range(0.0, 0.3 * 11.0));
                w.push(rng.range(0.1, 2.0));
            }
            let dep = deposit(&pos, &w, &grid);
            let total: f64 = dep.rho.iter().sum::<f64>() * grid.cell_volume();
            let expected: f64 = w.iter().sum();
            prop_assert!((total - expected).abs() <= 1e-12 * expected);
            prop_assert!(dep.rho.iter().all(|&v| v >= 0.0));
        }
    }

    #[test]
    fn solve_is_linear() {
        let grid = grid_1d(64, 0.1);
        let spec = KernelSpec::mollified(1, Sign::Repulsive, 8).unwrap();
        let solver = FieldSolver::new(grid, spec).unwrap();
        let mut rng = crate::numeric::SplitMix64::new(3);
        let rho: Vec<f64> = (0..64).map(|_| rng.range(0.0, 2.0)).collect();
        let doubled: Vec<f64> = rho.iter().map(|v| 2.0 * v).collect();
        let e1 = solver.solve(&rho, None).unwrap();
        let e2 = solver.solve(&doubled, None).unwrap();
        for (a, b) in e1[0].iter().zip(&e2[0]) {
            assert_relative_eq!(2.0 * a, *b, max_relative = 1e-13, epsilon = 1e-300);
        }
    }

    #[test]
    fn free_space_matches_direct_sum() {
        // independent O(M^2) oracle for the fast convolution
        let grid = GridSpec::new(vec![-1.0, -1.0], vec![12, 10], 0.2, Topology::FreeSpace).unwrap();
        let spec = KernelSpec::mollified(2, Sign::Repulsive, 4).unwrap();
        let solver = FieldSolver::new(grid.clone(), spec).unwrap();
        let kernel = Kernel::new(spec).unwrap();
        let mut rng = crate::numeric::SplitMix64::new(5);
        let rho: Vec<f64> = (0..grid.len()).map(|_| rng.range(0.0, 1.0)).collect();
        let e = solver.solve(&rho, None).unwrap();
        let vol = grid.cell_volume();
        for i in [0usize, 17, 63, 119] {
            let xi = grid.node_position(i);
            let mut direct = [0.0f64; 2];
            for (j, &rj) in rho.iter().enumerate() {
                let xj = grid.node_position(j);
                let off = [xi[0] - xj[0], xi[1] - xj[1]];
                let k = kernel.force(&off).unwrap();
                direct[0] += k[0] * rj * vol;
                direct[1] += k[1] * rj * vol;
            }
            assert_relative_eq!(e[0][i], direct[0], epsilon = 1e-11);
            assert_relative_eq!(e[1][i], direct[1], epsilon = 1e-11);
        }
    }

    #[test]
    fn padded_box_size_does_not_change_interior() {
        let grid = GridSpec::new(vec![-1.0, -1.0], vec![16, 16], 0.125, Topology::FreeSpace).unwrap();
        let spec = KernelSpec::mollified(2, Sign::Repulsive, 4).unwrap();
        let s2 = FieldSolver::with_padding(grid.clone(), spec, 2).unwrap();
        let s4 = FieldSolver::with_padding(grid.clone(), spec, 4).unwrap();
        let mut rng = crate::numeric::SplitMix64::new(8);
        let rho: Vec<f64> = (0..grid.len()).map(|_| rng.range(0.0, 1.0)).collect();
        let e2 = s2.solve(&rho, None).unwrap();
        let e4 = s4.solve(&rho, None).unwrap();
        let scale = e2[0].iter().map(|v| v.abs()).fold(0.0f64, f64::max);
        for c in 0..2 {
            for (a, b) in e2[c].iter().zip(&e4[c]) {
                assert!((a - b).abs() <= 1e-10 * scale);
            }
        }
    }

    #[test]
    fn periodic_solve_matches_integral_of_density() {
        // E' = sigma (rho - mean): check against cumulative integration
        let m = 128;
        let grid = grid_1d(m, 2.0 * std::f64::consts::PI / m as f64);
        let length = grid.extent(0);
        let spec = KernelSpec::mollified(1, Sign::Repulsive, 16).unwrap();
        let solver = FieldSolver::new(grid.clone(), spec).unwrap();
        let rho: Vec<f64> = (0..m)
            .map(|i| 1.0 + 0.3 * (2.0 * std::f64::consts::PI * i as f64 / m as f64).cos())
            .collect();
        let e = solver.solve(&rho, None).unwrap();
        // analytic: g = 0.3 cos(2 pi x / L), E = sigma * smoothed integral
        // with E' = g => E = 0.3 (L / 2 pi) sin(2 pi x / L) modulo smoothing
        let kk = 2.0 * std::f64::consts::PI / length;
        for i in 0..m {
            let x = i as f64 * grid.h;
            let expected = 0.3 / kk * (kk * x).sin();
            assert_relative_eq!(e[0][i], expected, epsilon = 2e-3);
        }
    }

    #[test]
    fn background_mass_mismatch_is_config_error() {
        let grid = GridSpec::new(vec![-1.0, -1.0], vec![16, 16], 0.125, Topology::FreeSpace).unwrap();
        let spec = KernelSpec::mollified(2, Sign::Repulsive, 4).unwrap();
        let solver = FieldSolver::new(grid.clone(), spec).unwrap();
        let rho = vec![1.0; grid.len()];
        let bg = vec![0.5; grid.len()];
        assert!(matches!(solver.solve(&rho, Some(&bg)), Err(VlasovError::Config(_))));
    }

    #[test]
    fn action_reaction_balance() {
        let grid = GridSpec::new(vec![-1.0, -1.0], vec![24, 24], 2.0 / 24.0, Topology::FreeSpace)
            .unwrap();
        let spec = KernelSpec::mollified(2, Sign::Repulsive, 8).unwrap();
        let solver = FieldSolver::new(grid.clone(), spec).unwrap();
        let mut rng = crate::numeric::SplitMix64::new(12);
        let rho: Vec<f64> = (0..grid.len()).map(|_| rng.range(0.0, 1.0)).collect();
        let e = solver.solve(&rho, None).unwrap();
        let vol = grid.cell_volume();
        for c in 0..2 {
            let net: f64 = rho.iter().zip(&e[c]).map(|(r, f)| r * f).sum::<f64>() * vol;
            let scale: f64 =
                rho.iter().zip(&e[c]).map(|(r, f)| (r * f).abs()).sum::<f64>() * vol;
            assert!(net.abs() <= 1e-10 * scale.max(1e-300), "component {c}: {net} vs {scale}");
        }
    }

    #[test]
    fn uniform_ball_exterior_field_matches_point_mass() {
        let cells = 64usize;
        let half = 0.8;
        let h = 2.0 * half / cells as f64;
        let grid = GridSpec::new(vec![-half; 3], vec![cells; 3], h, Topology::FreeSpace).unwrap();
        let spec = KernelSpec::mollified(3, Sign::Repulsive, 8).unwrap();
        let solver = FieldSolver::new(grid.clone(), spec).unwrap();
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
                        if crate::numeric::norm(&p) <= radius {
                            inside += 1;
                        }
                    }
                }
            }
            *slot = inside as f64 / (sub * sub * sub) as f64;
        }
        let total: f64 = rho.iter().sum::<f64>() * grid.cell_volume();
        rho.iter_mut().for_each(|v| *v /= total);
        let e = solver.solve(&rho, None).unwrap();
        // |E| at r = 2R against the point-mass value c_3 / (2R)^2
        let idx = grid.flat_index(&[cells / 2 + 16, cells / 2, cells / 2]);
        let x = grid.node_position(idx);
        assert_relative_eq!(x[0], 2.0 * radius, epsilon = 1e-12);
        let mag = (e[0][idx].powi(2) + e[1][idx].powi(2) + e[2][idx].powi(2)).sqrt();
        let exact = crate::kernels::dimensional_constant(3).unwrap() / (2.0 * radius).powi(2);
        assert_relative_eq!(mag, exact, max_relative = 1e-3);
    }

    #[test]
    fn two_forms_zero_for_zero_density() {
        let grid = GridSpec::new(vec![-1.0, -1.0], vec![16, 16], 0.125, Topology::FreeSpace).unwrap();
        let spec = KernelSpec::mollified(2, Sign::Repulsive, 4).unwrap();
        let solver = FieldSolver::new(grid, spec).unwrap();
        let rho = vec![0.0; 256];
        let (a, b) = potential_two_forms(&solver, &rho, None).unwrap();
        assert_eq!(a, 0.0);
        assert_eq!(b, 0.0);
    }

    #[test]
    fn two_forms_rejects_1d_free_space() {
        let grid = GridSpec::new(vec![0.0], vec![16], 0.05, Topology::FreeSpace).unwrap();
        let spec = KernelSpec::mollified(1, Sign::Repulsive, 16).unwrap();
        let solver = FieldSolver::new(grid, spec).unwrap();
        assert!(matches!(
            potential_two_forms(&solver, &vec![1.0; 16], None),
            Err(VlasovError::Config(_))
        ));
    }

    #[test]
    fn two_forms_agree_against_direct_sums() {
        // independent double-sum quadrature of both quadratic forms
        let grid = GridSpec::new(vec![-1.2, -1.2], vec![20, 20], 0.12, Topology::FreeSpace).unwrap();
        let spec = KernelSpec::mollified(2, Sign::Repulsive, 6).unwrap();
        let solver = FieldSolver::new(grid.clone(), spec).unwrap();
        let kernel = Kernel::new(spec).unwrap();
        let rho: Vec<f64> = (0..grid.len())
            .map(|i| {
                let x = grid.node_position(i);
                (1.0 - (x[0] * x[0] + x[1] * x[1]) / 0.5).max(0.0)
            })
            .collect();
        let (first, second) = potential_two_forms(&solver, &rho, None).unwrap();
        let vol = grid.cell_volume();
        let mut direct_first = 0.0;
        let mut direct_e = vec![[0.0f64; 2]; grid.len()];
        for i in 0..grid.len() {
            let xi = grid.node_position(i);
            for j in 0..grid.len() {
                if rho[j] == 0.0 {
                    continue;
                }
                let xj = grid.node_position(j);
                let off = [xi[0] - xj[0], xi[1] - xj[1]];
                let r = crate::numeric::norm(&off);
                if rho[i] != 0.0 {
                    direct_first +=
                        kernel.potential_radial(r).unwrap() * rho[i] * rho[j] * vol * vol;
                }
                let k = kernel.force(&off).unwrap();
                direct_e[i][0] += k[0] * rho[j] * vol;
                direct_e[i][1] += k[1] * rho[j] * vol;
            }
        }
        let direct_second: f64 = direct_e
            .iter()
            .map(|e| e[0] * e[0] + e[1] * e[1])
            .sum::<f64>()
            * vol;
        assert_relative_eq!(first, direct_first, max_relative = 1e-10);
        assert_relative_eq!(second, direct_second, max_relative = 1e-10);
    }

    #[test]
    fn ledger_classifies_and_partitions() {
        let d = 2;
        let positions = [0.0, 0.0, 0.5, 0.0, 9.0, 0.0];
        let velocities = [0.1, 0.0, 7.0, 0.0, 0.0, 0.0];
        let weights = [1.0, 2.0, 3.0];
        let ledger = ledger_update(&positions, &velocities, &weights, d, 6.0, 5.0, 4.0).unwrap();
        assert_relative_eq!(ledger.active_mass, 1.0);
        assert_relative_eq!(ledger.escaped_v_mass, 2.0);
        assert_relative_eq!(ledger.escaped_x_mass, 3.0);
        assert!(ledger.check_partition(1e-12));
    }

    proptest! {
        #[test]
        fn ledger_partition_random(seed in 0u64..200) {
            let mut rng = crate::numeric::SplitMix64::new(seed);
            let n = 1000;
            let d = 3;
            let mut pos = Vec::new();
            let mut vel = Vec::new();
            let mut w = Vec::new();
            for _ in 0..n {
                for _ in 0..d {
                    pos.push(rng.range(-10.0, 10.0));
                    vel.push(rng.range(-10.0, 10.0));
                }
                w.push(rng.range(0.01, 1.0));
            }
            let total: f64 = w.iter().sum();
            let ledger = ledger_update(&pos, &vel, &w, d, total, 5.0, 5.0).unwrap();
            prop_assert!(ledger.check_partition(1e-12));
        }
    }
}
