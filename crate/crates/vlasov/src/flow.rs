//! Lagrangian particle flow: symplectic push of weighted phase-space points,
//! per-particle escape times, and level-set band bookkeeping.
//!
//! Each particle carries its initial density value and the integer band
//! `k <= value < k+1` it belongs to; both are transported unchanged along
//! the trajectory, so band masses and every functional of the carried value
//! are conserved exactly by construction. The push is kick-drift-kick
//! leapfrog, which preserves phase-space volume for frozen fields; with a
//! self-consistent field the grid density is refreshed once per step.
//!
//! Trajectories that leave the escape ball stop receiving pushes and record
//! their crossing time: a forward run marks `T+`, a backward run (time
//! reversal of the same machinery) marks `T-`.

use crate::diagnostics::{self, CasimirId, DiagnosticsRecord};
use crate::error::{Result, VlasovError};
use crate::fields::{self, FieldSolver, Topology};
use crate::numeric::SplitMix64;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ParticleStatus {
    Active,
    /// Left the escape ball going forward; carries the crossing time `T+`.
    Escaped { t_plus: f64 },
    /// Left the escape ball going backward; carries the crossing time `T-`.
    PreBirth { t_minus: f64 },
}

impl ParticleStatus {
    pub fn is_active(self) -> bool {
        matches!(self, ParticleStatus::Active)
    }
}

/// Weighted phase-space points with carried initial values and bands.
#[derive(Debug, Clone)]
pub struct ParticleEnsemble {
    pub d: usize,
    /// Positions, length `n * d`.
    pub x: Vec<f64>,
    /// Velocities, length `n * d`.
    pub v: Vec<f64>,
    /// Weights (mass carried by each point), strictly positive.
    pub w: Vec<f64>,
    /// Carried initial density value.
    pub f0_value: Vec<f64>,
    /// Band index, `band = floor(f0_value - band_offset)` clamped at zero.
    pub band: Vec<u32>,
    pub status: Vec<ParticleStatus>,
    pub t: f64,
    /// Recorded band-boundary shift (zero unless a value sat on a boundary).
    pub band_offset: f64,
    pub seed: u64,
}

impl ParticleEnsemble {
    pub fn new(
        d: usize,
        x: Vec<f64>,
        v: Vec<f64>,
        w: Vec<f64>,
        f0_value: Vec<f64>,
        seed: u64,
    ) -> Result<Self> {
        let n = w.len();
        if x.len() != n * d || v.len() != n * d || f0_value.len() != n {
            return Err(VlasovError::Input("ensemble array lengths disagree".into()));
        }
        if w.iter().any(|&wi| !(wi > 0.0) || !wi.is_finite()) {
            return Err(VlasovError::Input("particle weights must be positive and finite".into()));
        }
        let (band, band_offset) = band_assign(&f0_value, seed)?;
        Ok(Self {
            d,
            x,
            v,
            w,
            f0_value,
            band,
            status: vec![ParticleStatus::Active; n],
            t: 0.0,
            band_offset,
            seed,
        })
    }

    /// Reassemble an ensemble from checkpointed parts, preserving bands,
    /// statuses, offset and clock exactly.
    #[allow(clippy::too_many_arguments)]
    pub fn from_raw(
        d: usize,
        x: Vec<f64>,
        v: Vec<f64>,
        w: Vec<f64>,
        f0_value: Vec<f64>,
        band: Vec<u32>,
        status: Vec<ParticleStatus>,
        t: f64,
        band_offset: f64,
        seed: u64,
    ) -> Result<Self> {
        let n = w.len();
        if x.len() != n * d
            || v.len() != n * d
            || f0_value.len() != n
            || band.len() != n
            || status.len() != n
        {
            return Err(VlasovError::Input("ensemble array lengths disagree".into()));
        }
        Ok(Self { d, x, v, w, f0_value, band, status, t, band_offset, seed })
    }

    pub fn len(&self) -> usize {
        self.w.len()
    }

    pub fn is_empty(&self) -> bool {
        self.w.is_empty()
    }

    pub fn total_mass(&self) -> f64 {
        self.w.iter().sum()
    }

    /// Mass per band, indexed by band number.
    pub fn band_masses(&self) -> Vec<f64> {
        let max_band = self.band.iter().copied().max().unwrap_or(0) as usize;
        let mut masses = vec![0.0; max_band + 1];
        for (b, w) in self.band.iter().zip(&self.w) {
            masses[*b as usize] += w;
        }
        masses
    }

    pub fn active_count(&self) -> usize {
        self.status.iter().filter(|s| s.is_active()).count()
    }

    pub fn position(&self, p: usize) -> &[f64] {
        &self.x[p * self.d..(p + 1) * self.d]
    }

    pub fn velocity(&self, p: usize) -> &[f64] {
        &self.v[p * self.d..(p + 1) * self.d]
    }

    fn assert_finite(&self) -> Result<()> {
        for (p, s) in self.status.iter().enumerate() {
            if !s.is_active() {
                continue;
            }
            let ok = self.position(p).iter().all(|v| v.is_finite())
                && self.velocity(p).iter().all(|v| v.is_finite());
            if !ok {
                return Err(VlasovError::Numerics(format!(
                    "particle {p} reached a non-finite state at t = {}",
                    self.t
                )));
            }
        }
        Ok(())
    }
}

/// Assign band indices `floor(value - R)`. The offset R is zero unless some
/// value sits exactly on an integer boundary, in which case a deterministic
/// shift in (0, 1) is drawn from the seed until no value lies on a boundary;
/// the chosen offset is recorded.
pub fn band_assign(f0_values: &[f64], seed: u64) -> Result<(Vec<u32>, f64)> {
    if f0_values.iter().any(|&v| v < 0.0 || !v.is_finite()) {
        return Err(VlasovError::Input("initial density values must be >= 0 and finite".into()));
    }
    let on_boundary = |offset: f64| f0_values.iter().any(|&v| (v - offset).fract() == 0.0);
    let mut offset = 0.0;
    if on_boundary(0.0) {
        let mut rng = SplitMix64::new(seed ^ 0x9c1d_52ab);
        loop {
            let candidate = rng.next_f64();
            if candidate > 0.0 && !on_boundary(candidate) {
                offset = candidate;
                break;
            }
        }
    }
    let bands = f0_values
        .iter()
        .map(|&v| {
            let b = (v - offset).floor();
            if b < 0.0 {
                0
            } else {
                b as u32
            }
        })
        .collect();
    Ok((bands, offset))
}

/// Field model a flow is pushed by.
pub enum FieldModel {
    /// Deposit the active particles, solve on the grid, gather back.
    SelfConsistent { solver: FieldSolver, background: Option<Vec<f64>> },
    /// Fixed analytic force field `E(x)` (synthetic tests, frozen probes).
    Frozen(Box<dyn Fn(&[f64], &mut [f64]) + Send + Sync>),
    /// Free streaming.
    Zero,
}

impl FieldModel {
    pub fn grid_topology(&self) -> Option<Topology> {
        match self {
            FieldModel::SelfConsistent { solver, .. } => Some(solver.grid().topology),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TimeDirection {
    Forward,
    Backward,
}

/// The stepping loop: ensemble, field model and running accumulators.
pub struct Flow {
    pub ensemble: ParticleEnsemble,
    pub field: FieldModel,
    pub escape_radius: f64,
    pub direction: TimeDirection,
    accel: Vec<f64>,
    /// Running quadrature of the escape certificate integrand.
    certificate: f64,
    last_integrand: f64,
    pub step_index: u64,
}

impl Flow {
    pub fn new(
        ensemble: ParticleEnsemble,
        field: FieldModel,
        escape_radius: f64,
        direction: TimeDirection,
    ) -> Result<Self> {
        if escape_radius <= 0.0 || !escape_radius.is_finite() {
            return Err(VlasovError::Config("escape radius must be positive".into()));
        }
        let n = ensemble.len();
        let d = ensemble.d;
        let mut flow = Self {
            ensemble,
            field,
            escape_radius,
            direction,
            accel: vec![0.0; n * d],
            certificate: 0.0,
            last_integrand: 0.0,
            step_index: 0,
        };
        flow.refresh_accel()?;
        flow.last_integrand = flow.certificate_integrand();
        Ok(flow)
    }

    pub fn certificate(&self) -> f64 {
        self.certificate
    }

    /// Restore running accumulators from a checkpoint.
    pub fn restore_accumulators(&mut self, certificate: f64, step_index: u64) {
        self.certificate = certificate;
        self.step_index = step_index;
    }

    pub fn accel(&self) -> &[f64] {
        &self.accel
    }

    /// Recompute accelerations of active particles from the field model.
    pub fn refresh_accel(&mut self) -> Result<()> {
        let d = self.ensemble.d;
        match &self.field {
            FieldModel::Zero => self.accel.iter_mut().for_each(|a| *a = 0.0),
            FieldModel::Frozen(f) => {
                let mut buf = vec![0.0; d];
                for p in 0..self.ensemble.len() {
                    if !self.ensemble.status[p].is_active() {
                        continue;
                    }
                    f(self.ensemble.position(p), &mut buf);
                    self.accel[p * d..(p + 1) * d].copy_from_slice(&buf);
                }
            }
            FieldModel::SelfConsistent { solver, background } => {
                let (positions, weights) = active_phase(&self.ensemble);
                let dep = fields::deposit(&positions, &weights, solver.grid());
                let e = solver.solve(&dep.rho, background.as_deref())?;
                let mut buf = vec![0.0; d];
                for p in 0..self.ensemble.len() {
                    if !self.ensemble.status[p].is_active() {
                        continue;
                    }
                    fields::gather(&e, solver.grid(), self.ensemble.position(p), &mut buf);
                    self.accel[p * d..(p + 1) * d].copy_from_slice(&buf);
                }
            }
        }
        Ok(())
    }

    /// Current value of the escape-certificate integrand
    /// `sum w |b| / ((1+|z|) log(2+|z|))` over active particles, with
    /// `b = (v, E(x))` and `z = (x, v)`.
    pub fn certificate_integrand(&self) -> f64 {
        let d = self.ensemble.d;
        let mut total = 0.0;
        for p in 0..self.ensemble.len() {
            if !self.ensemble.status[p].is_active() {
                continue;
            }
            let x = self.ensemble.position(p);
            let v = self.ensemble.velocity(p);
            let a = &self.accel[p * d..(p + 1) * d];
            let speed_sq: f64 =
                v.iter().map(|c| c * c).sum::<f64>() + a.iter().map(|c| c * c).sum::<f64>();
            let z_sq: f64 =
                x.iter().map(|c| c * c).sum::<f64>() + v.iter().map(|c| c * c).sum::<f64>();
            let z = z_sq.sqrt();
            total += self.ensemble.w[p] * speed_sq.sqrt() / ((1.0 + z) * (2.0 + z).ln());
        }
        total
    }

    /// One kick-drift-kick step. Carried values and bands are untouched;
    /// escaped particles stop moving.
    pub fn step(&mut self, dt: f64) -> Result<()> {
        if dt <= 0.0 || !dt.is_finite() {
            return Err(VlasovError::Config(format!("time step must be positive, got {dt}")));
        }
        let d = self.ensemble.d;
        let half = 0.5 * dt;
        let sign = match self.direction {
            TimeDirection::Forward => 1.0,
            TimeDirection::Backward => -1.0,
        };
        let periodic = self.field.grid_topology() == Some(Topology::Periodic);
        // half kick with the field at the current positions
        for p in 0..self.ensemble.len() {
            if !self.ensemble.status[p].is_active() {
                continue;
            }
            for k in 0..d {
                self.ensemble.v[p * d + k] += sign * half * self.accel[p * d + k];
            }
        }
        // drift
        for p in 0..self.ensemble.len() {
            if !self.ensemble.status[p].is_active() {
                continue;
            }
            for k in 0..d {
                self.ensemble.x[p * d + k] += sign * dt * self.ensemble.v[p * d + k];
            }
        }
        if periodic {
            if let FieldModel::SelfConsistent { solver, .. } = &self.field {
                let grid = solver.grid();
                for p in 0..self.ensemble.len() {
                    if !self.ensemble.status[p].is_active() {
                        continue;
                    }
                    for k in 0..d {
                        let length = grid.extent(k);
                        let x = &mut self.ensemble.x[p * d + k];
                        *x = grid.origin[k] + (*x - grid.origin[k]).rem_euclid(length);
                    }
                }
            }
        }
        self.ensemble.t += sign * dt;
        self.ensemble.assert_finite()?;
        self.detect_escape()?;
        // half kick with the field at the new positions
        self.refresh_accel()?;
        for p in 0..self.ensemble.len() {
            if !self.ensemble.status[p].is_active() {
                continue;
            }
            for k in 0..d {
                self.ensemble.v[p * d + k] += sign * half * self.accel[p * d + k];
            }
        }
        let integrand = self.certificate_integrand();
        self.certificate += half * (self.last_integrand + integrand);
        self.last_integrand = integrand;
        self.step_index += 1;
        Ok(())
    }

    /// Mark particles outside the escape ball. Spatial escape is only
    /// meaningful on unbounded domains; on periodic grids velocity escape
    /// is still detected.
    pub fn detect_escape(&mut self) -> Result<usize> {
        let periodic = self.field.grid_topology() == Some(Topology::Periodic);
        detect_escape(&mut self.ensemble, self.escape_radius, periodic, self.direction)
    }
}

/// Positions and weights of the active particles (deposition input).
fn active_phase(ensemble: &ParticleEnsemble) -> (Vec<f64>, Vec<f64>) {
    let d = ensemble.d;
    let mut positions = Vec::with_capacity(ensemble.len() * d);
    let mut weights = Vec::with_capacity(ensemble.len());
    for p in 0..ensemble.len() {
        if ensemble.status[p].is_active() {
            positions.extend_from_slice(ensemble.position(p));
            weights.push(ensemble.w[p]);
        }
    }
    (positions, weights)
}

/// Mark particles with `|x|` or `|v|` beyond the escape radius; records the
/// crossing time and freezes them. Escaped particles are never re-activated.
pub fn detect_escape(
    ensemble: &mut ParticleEnsemble,
    escape_radius: f64,
    skip_spatial: bool,
    direction: TimeDirection,
) -> Result<usize> {
    if escape_radius <= 0.0 || !escape_radius.is_finite() {
        return Err(VlasovError::Config("escape radius must be positive".into()));
    }
    let mut marked = 0;
    for p in 0..ensemble.len() {
        if !ensemble.status[p].is_active() {
            continue;
        }
        let gone_x = !skip_spatial && crate::numeric::norm(ensemble.position(p)) > escape_radius;
        let gone_v = crate::numeric::norm(ensemble.velocity(p)) > escape_radius;
        if gone_x || gone_v {
            ensemble.status[p] = match direction {
                TimeDirection::Forward => ParticleStatus::Escaped { t_plus: ensemble.t },
                TimeDirection::Backward => ParticleStatus::PreBirth { t_minus: ensemble.t },
            };
            marked += 1;
        }
    }
    Ok(marked)
}

/// Numeric Jacobian determinant of the one-step frozen-field map at a probe
/// point, by central finite differences in all 2d phase coordinates.
/// Leapfrog is symplectic, so the expected value is 1.
pub fn volume_check(
    d: usize,
    field: &dyn Fn(&[f64], &mut [f64]),
    dt: f64,
    probe_x: &[f64],
    probe_v: &[f64],
) -> f64 {
    let m = 2 * d;
    let step = |z: &[f64]| -> Vec<f64> {
        let mut x = z[..d].to_vec();
        let mut v = z[d..].to_vec();
        let mut e = vec![0.0; d];
        field(&x, &mut e);
        for k in 0..d {
            v[k] += 0.5 * dt * e[k];
        }
        for k in 0..d {
            x[k] += dt * v[k];
        }
        field(&x, &mut e);
        for k in 0..d {
            v[k] += 0.5 * dt * e[k];
        }
        let mut out = x;
        out.extend(v);
        out
    };
    let mut z0 = probe_x.to_vec();
    z0.extend_from_slice(probe_v);
    let scale = 1.0 + crate::numeric::norm(&z0);
    let h = 1e-5 * scale;
    let mut jac = vec![vec![0.0; m]; m];
    for j in 0..m {
        let mut zp = z0.clone();
        let mut zm = z0.clone();
        zp[j] += h;
        zm[j] -= h;
        let fp = step(&zp);
        let fm = step(&zm);
        for i in 0..m {
            jac[i][j] = (fp[i] - fm[i]) / (2.0 * h);
        }
    }
    crate::numeric::determinant(jac)
}

/// Per-cadence sample of a tracked particle subset, for offline trajectory
/// studies (escape-threshold comparisons, separation diagnostics).
#[derive(Debug, Clone)]
pub struct TrackedSample {
    pub t: f64,
    pub x: Vec<f64>,
    pub v: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct RunParams {
    pub dt: f64,
    pub n_steps: u64,
    /// Steps between diagnostic rows (>= 1).
    pub cadence: u64,
    pub ledger_cut_x: f64,
    pub ledger_cut_v: f64,
    pub casimir_ids: Vec<CasimirId>,
    /// Number of leading particles sampled into the trajectory record.
    pub tracked: usize,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub records: Vec<DiagnosticsRecord>,
    pub tracked: Vec<TrackedSample>,
    /// Set when the run aborted on a numerical fault after writing the
    /// records accumulated so far.
    pub failure: Option<String>,
}

/// Execute `n_steps` fixed steps, collecting diagnostics at the configured
/// cadence. Deterministic: a repeated run with the same inputs produces
/// bit-identical records. On a numerical fault the partial output is
/// returned with a failure marker.
pub fn run(flow: &mut Flow, params: &RunParams) -> Result<RunOutput> {
    if params.cadence == 0 {
        return Err(VlasovError::Config("cadence must be >= 1".into()));
    }
    let total_mass0 = flow.ensemble.total_mass();
    let mut records = Vec::new();
    let mut tracked = Vec::new();
    fn sample(
        flow: &Flow,
        total_mass0: f64,
        params: &RunParams,
        records: &mut Vec<DiagnosticsRecord>,
        tracked: &mut Vec<TrackedSample>,
    ) -> Result<()> {
        records.push(diagnostics::collect(flow, total_mass0, params)?);
        if params.tracked > 0 {
            let d = flow.ensemble.d;
            let k = params.tracked.min(flow.ensemble.len());
            tracked.push(TrackedSample {
                t: flow.ensemble.t,
                x: flow.ensemble.x[..k * d].to_vec(),
                v: flow.ensemble.v[..k * d].to_vec(),
            });
        }
        Ok(())
    }
    sample(flow, total_mass0, params, &mut records, &mut tracked)?;
    for i in 0..params.n_steps {
        if let Err(e) = flow.step(params.dt) {
            let failure = e.to_string();
            return match e {
                VlasovError::Numerics(_) => {
                    Ok(RunOutput { records, tracked, failure: Some(failure) })
                }
                other => Err(other),
            };
        }
        if (i + 1) % params.cadence == 0 || i + 1 == params.n_steps {
            sample(flow, total_mass0, params, &mut records, &mut tracked)?;
        }
    }
    Ok(RunOutput { records, tracked, failure: None })
}
