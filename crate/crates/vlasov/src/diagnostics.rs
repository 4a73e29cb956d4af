//! Conservation and structure diagnostics: masses per band, kinetic and
//! potential energies, Casimir functionals, the transport-equation weak-form
//! residual, the trajectory-separation functional and the escape
//! certificate.
//!
//! Lagrangian quantities are pure reductions over read-only ensemble
//! snapshots with a fixed summation order, so repeated evaluation is
//! bit-identical.

use crate::error::{Result, VlasovError};
use crate::eulerian::EulerianSnapshot;
use crate::fields::{self, Topology};
use crate::flow::{FieldModel, Flow, ParticleEnsemble, RunParams};

/// Particles carrying less initial density than this are skipped by the
/// volume-weighted Casimir sum (they carry no mass and no Casimir content).
pub const CASIMIR_VALUE_FLOOR: f64 = 1e-12;

/// Registered Casimir test functions `psi`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CasimirId {
    /// `psi(s) = s^2`
    Square,
    /// `psi(s) = arctan(s) * s`
    ArctanTimesS,
    /// `psi(s) = s * 1_{s > 1/2}`
    AboveHalf,
}

impl CasimirId {
    pub fn all() -> [CasimirId; 3] {
        [CasimirId::Square, CasimirId::ArctanTimesS, CasimirId::AboveHalf]
    }

    pub fn id(self) -> &'static str {
        match self {
            CasimirId::Square => "sq",
            CasimirId::ArctanTimesS => "arctan_s",
            CasimirId::AboveHalf => "above_half",
        }
    }

    pub fn from_id(id: &str) -> Result<Self> {
        match id {
            "sq" => Ok(CasimirId::Square),
            "arctan_s" => Ok(CasimirId::ArctanTimesS),
            "above_half" => Ok(CasimirId::AboveHalf),
            other => Err(VlasovError::Config(format!("unregistered casimir '{other}'"))),
        }
    }

    pub fn eval(self, s: f64) -> f64 {
        match self {
            CasimirId::Square => s * s,
            CasimirId::ArctanTimesS => s.atan() * s,
            CasimirId::AboveHalf => {
                if s > 0.5 {
                    s
                } else {
                    0.0
                }
            }
        }
    }
}

/// Registered bounded renormalization functions `beta`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BetaId {
    /// `beta(s) = arctan(s)`
    Arctan,
    /// `beta(s) = s / (1 + s^2)`
    Rational,
    /// `beta(s) = min(s, 1)`
    ClampUnit,
}

impl BetaId {
    pub fn id(self) -> &'static str {
        match self {
            BetaId::Arctan => "arctan",
            BetaId::Rational => "rational",
            BetaId::ClampUnit => "clamp1",
        }
    }

    pub fn from_id(id: &str) -> Result<Self> {
        match id {
            "arctan" => Ok(BetaId::Arctan),
            "rational" => Ok(BetaId::Rational),
            "clamp1" => Ok(BetaId::ClampUnit),
            other => Err(VlasovError::Config(format!("unregistered beta '{other}'"))),
        }
    }

    pub fn eval(self, s: f64) -> f64 {
        match self {
            BetaId::Arctan => s.atan(),
            BetaId::Rational => s / (1.0 + s * s),
            BetaId::ClampUnit => s.min(1.0),
        }
    }
}

/// Kinetic energy `sum w |v|^2` (paper-normalized: no 1/2).
pub fn kinetic_energy(ensemble: &ParticleEnsemble) -> f64 {
    let d = ensemble.d;
    let mut total = 0.0;
    for p in 0..ensemble.len() {
        let v = &ensemble.v[p * d..(p + 1) * d];
        total += ensemble.w[p] * v.iter().map(|c| c * c).sum::<f64>();
    }
    total
}

/// Volume-weighted Casimir over particles: `sum psi(f0) w / f0` for carried
/// values above the floor. Weights over values are the phase-space volumes
/// the particles represent, which the flow preserves.
pub fn casimir_particles(ensemble: &ParticleEnsemble, id: CasimirId) -> f64 {
    let mut total = 0.0;
    for p in 0..ensemble.len() {
        let f0 = ensemble.f0_value[p];
        if f0 > CASIMIR_VALUE_FLOOR {
            total += id.eval(f0) * ensemble.w[p] / f0;
        }
    }
    total
}

/// Grid quadrature Casimir `sum psi(f) hx hv` over a phase-space grid.
pub fn casimir_phase_grid(state: &crate::eulerian::PhaseGridFunction, id: CasimirId) -> f64 {
    let cell = state.hx * state.hv;
    state.f.iter().map(|&v| id.eval(v)).sum::<f64>() * cell
}

/// One output row of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagnosticsRecord {
    pub t: f64,
    pub mass_total: f64,
    pub band_masses: Vec<f64>,
    pub active_mass: f64,
    pub escaped_v_mass: f64,
    pub escaped_x_mass: f64,
    pub kinetic: f64,
    pub potential_h: f64,
    pub potential_e2: f64,
    /// `kinetic + sigma * potential_h` (kinetic alone for synthetic fields).
    pub total_energy: f64,
    pub casimirs: Vec<(CasimirId, f64)>,
    /// Running escape-certificate quadrature up to this time.
    pub noblowup_partial: f64,
}

/// Collect one diagnostics row from the current flow state.
pub fn collect(flow: &Flow, total_initial_mass: f64, params: &RunParams) -> Result<DiagnosticsRecord> {
    let ens = &flow.ensemble;
    let ledger = fields::ledger_update(
        &ens.x,
        &ens.v,
        &ens.w,
        ens.d,
        total_initial_mass,
        params.ledger_cut_x,
        params.ledger_cut_v,
    )?;
    let kinetic = kinetic_energy(ens);
    let (potential_h, potential_e2, sigma) = match &flow.field {
        FieldModel::SelfConsistent { solver, background } => {
            let (positions, weights) = active_slices(ens);
            let dep = fields::deposit(&positions, &weights, solver.grid());
            let vol = solver.grid().cell_volume();
            let sigma = solver.spec().sigma.as_f64();
            let g: Vec<f64> = match background {
                Some(bg) => dep.rho.iter().zip(bg).map(|(r, b)| r - b).collect(),
                None => match solver.grid().topology {
                    Topology::Periodic => {
                        let mean = dep.rho.iter().sum::<f64>() / dep.rho.len() as f64;
                        dep.rho.iter().map(|r| r - mean).collect()
                    }
                    Topology::FreeSpace => dep.rho.clone(),
                },
            };
            let v = solver.solve_potential(&dep.rho, background.as_deref())?;
            let e = solver.solve(&dep.rho, background.as_deref())?;
            let ph: f64 = v.iter().zip(&g).map(|(vi, gi)| sigma * vi * gi).sum::<f64>() * vol;
            let mut pe = 0.0;
            for i in 0..v.len() {
                let mut sq = 0.0;
                for comp in &e {
                    sq += comp[i] * comp[i];
                }
                pe += sq;
            }
            (ph, pe * vol, sigma)
        }
        _ => (0.0, 0.0, 1.0),
    };
    let casimirs = params
        .casimir_ids
        .iter()
        .map(|&id| (id, casimir_particles(ens, id)))
        .collect();
    Ok(DiagnosticsRecord {
        t: ens.t,
        mass_total: ens.total_mass(),
        band_masses: ens.band_masses(),
        active_mass: ledger.active_mass,
        escaped_v_mass: ledger.escaped_v_mass,
        escaped_x_mass: ledger.escaped_x_mass,
        kinetic,
        potential_h,
        potential_e2,
        total_energy: kinetic + sigma * potential_h,
        casimirs,
        noblowup_partial: flow.certificate(),
    })
}

fn active_slices(ens: &ParticleEnsemble) -> (Vec<f64>, Vec<f64>) {
    let d = ens.d;
    let mut positions = Vec::with_capacity(ens.len() * d);
    let mut weights = Vec::with_capacity(ens.len());
    for p in 0..ens.len() {
        if ens.status[p].is_active() {
            positions.extend_from_slice(&ens.x[p * d..(p + 1) * d]);
            weights.push(ens.w[p]);
        }
    }
    (positions, weights)
}

/// Verdicts over a diagnostics series (reported, never thrown).
#[derive(Debug, Clone)]
pub struct EnergyVerdicts {
    pub mass_max_rel_drift: f64,
    pub energy_max_rel_drift: f64,
    /// For repulsive runs: total energy stays within the drift budget of
    /// its initial value.
    pub energy_bound_ok: bool,
    /// `potential_h >= potential_e2 - tol` at every output time.
    pub potential_inequality_ok: bool,
    pub casimir_max_rel_drift: Vec<(CasimirId, f64)>,
}

pub fn energy_report(
    records: &[DiagnosticsRecord],
    sigma: f64,
    drift_budget: f64,
    potential_tol: f64,
) -> EnergyVerdicts {
    let first = &records[0];
    let mut mass_drift = 0.0f64;
    let mut energy_drift = 0.0f64;
    let mut bound_ok = true;
    let mut pot_ok = true;
    let mut casimir_drift: Vec<(CasimirId, f64)> =
        first.casimirs.iter().map(|(id, _)| (*id, 0.0)).collect();
    for rec in records {
        let m = (rec.mass_total - first.mass_total).abs()
            / first.mass_total.abs().max(f64::MIN_POSITIVE);
        mass_drift = mass_drift.max(m);
        let scale = first.total_energy.abs().max(f64::MIN_POSITIVE);
        let e = (rec.total_energy - first.total_energy).abs() / scale;
        energy_drift = energy_drift.max(e);
        if sigma > 0.0 && rec.total_energy > first.total_energy + drift_budget * scale {
            bound_ok = false;
        }
        if rec.potential_h < rec.potential_e2 - potential_tol {
            pot_ok = false;
        }
        for (slot, (_, v0)) in casimir_drift.iter_mut().zip(&first.casimirs) {
            let now = rec
                .casimirs
                .iter()
                .find(|(id, _)| *id == slot.0)
                .map(|(_, v)| *v)
                .unwrap_or(*v0);
            slot.1 = slot.1.max((now - v0).abs() / v0.abs().max(f64::MIN_POSITIVE));
        }
    }
    EnergyVerdicts {
        mass_max_rel_drift: mass_drift,
        energy_max_rel_drift: energy_drift,
        energy_bound_ok: bound_ok,
        potential_inequality_ok: pot_ok,
        casimir_max_rel_drift: casimir_drift,
    }
}

/// Mass-normalized logarithmic separation between two runs sharing particle
/// identities:
/// `sum w log(1 + |xA-xB|/(zeta delta) + |vA-vB|/delta) / sum w`
/// over index-matched pairs active in both runs.
pub fn separation_functional(
    a: &ParticleEnsemble,
    b: &ParticleEnsemble,
    delta: f64,
    zeta: f64,
) -> Result<f64> {
    if a.len() != b.len() || a.d != b.d || a.seed != b.seed {
        return Err(VlasovError::Input(
            "separation functional needs runs with matching particle identities".into(),
        ));
    }
    if !(0.0 < delta && delta <= 1.0 && 0.0 < zeta && zeta <= 1.0) {
        return Err(VlasovError::Config("delta and zeta must lie in (0, 1]".into()));
    }
    let d = a.d;
    let mut total = 0.0;
    let mut mass = 0.0;
    for p in 0..a.len() {
        if !(a.status[p].is_active() && b.status[p].is_active()) {
            continue;
        }
        let dx: f64 = (0..d)
            .map(|k| (a.x[p * d + k] - b.x[p * d + k]).powi(2))
            .sum::<f64>()
            .sqrt();
        let dv: f64 = (0..d)
            .map(|k| (a.v[p * d + k] - b.v[p * d + k]).powi(2))
            .sum::<f64>()
            .sqrt();
        total += a.w[p] * (1.0 + dx / (zeta * delta) + dv / delta).ln();
        mass += a.w[p];
    }
    if mass == 0.0 {
        return Ok(0.0);
    }
    Ok(total / mass)
}

/// Trapezoid quadrature of a sampled scalar series `(t, value)`.
pub fn trapezoid_series(series: &[(f64, f64)]) -> f64 {
    let mut acc = 0.0;
    for pair in series.windows(2) {
        acc += 0.5 * (pair[1].0 - pair[0].0) * (pair[0].1 + pair[1].1);
    }
    acc
}

/// Smooth compactly supported space-time test function: a temporal window
/// times phase-space bumps `(1 - r^2)^3` in x and v.
#[derive(Debug, Clone)]
pub struct SpaceTimeTest {
    pub x_center: f64,
    pub x_radius: f64,
    pub v_center: f64,
    pub v_radius: f64,
    /// `None` keeps the test constant in time; otherwise a cosine window
    /// vanishing at the given end time.
    pub time_window: Option<f64>,
}

impl SpaceTimeTest {
    fn bump(r: f64) -> f64 {
        if r * r >= 1.0 {
            0.0
        } else {
            let t = 1.0 - r * r;
            t * t * t
        }
    }

    fn bump_derivative(r: f64) -> f64 {
        if r * r >= 1.0 {
            0.0
        } else {
            let t = 1.0 - r * r;
            -6.0 * r * t * t
        }
    }

    fn window(&self, t: f64) -> f64 {
        match self.time_window {
            None => 1.0,
            Some(t_end) => {
                if t >= t_end {
                    0.0
                } else {
                    let u = t / t_end;
                    0.5 * (1.0 + (std::f64::consts::PI * u).cos())
                }
            }
        }
    }

    fn window_derivative(&self, t: f64) -> f64 {
        match self.time_window {
            None => 0.0,
            Some(t_end) => {
                if t >= t_end {
                    0.0
                } else {
                    let u = t / t_end;
                    -0.5 * std::f64::consts::PI / t_end * (std::f64::consts::PI * u).sin()
                }
            }
        }
    }

    pub fn value(&self, t: f64, x: f64, v: f64) -> f64 {
        self.window(t)
            * Self::bump((x - self.x_center) / self.x_radius)
            * Self::bump((v - self.v_center) / self.v_radius)
    }

    pub fn dt(&self, t: f64, x: f64, v: f64) -> f64 {
        self.window_derivative(t)
            * Self::bump((x - self.x_center) / self.x_radius)
            * Self::bump((v - self.v_center) / self.v_radius)
    }

    pub fn dx(&self, t: f64, x: f64, v: f64) -> f64 {
        self.window(t)
            * Self::bump_derivative((x - self.x_center) / self.x_radius)
            / self.x_radius
            * Self::bump((v - self.v_center) / self.v_radius)
    }

    pub fn dv(&self, t: f64, x: f64, v: f64) -> f64 {
        self.window(t)
            * Self::bump((x - self.x_center) / self.x_radius)
            * Self::bump_derivative((v - self.v_center) / self.v_radius)
            / self.v_radius
    }
}

/// Weak-form transport residual of an Eulerian run for a bounded `beta`:
///
/// `| int phi_0 beta(f_0) - int phi_T beta(f_T)
///    + int_0^T int (dphi/dt + v dphi/dx + E dphi/dv) beta(f) |`
///
/// evaluated by grid quadrature and trapezoid time integration over the
/// stored snapshots. Zero for an exact renormalized solution; the terminal
/// term vanishes when the test function's window does.
pub fn renorm_residual(
    snapshots: &[EulerianSnapshot],
    beta: BetaId,
    test: &SpaceTimeTest,
) -> Result<f64> {
    if snapshots.len() < 2 {
        return Err(VlasovError::Input("need at least two snapshots".into()));
    }
    let g0 = &snapshots[0].state;
    // support must fit the grid
    let v_lo = g0.v_origin;
    let v_hi = g0.v_origin + (g0.nv - 1) as f64 * g0.hv;
    if test.v_center - test.v_radius < v_lo || test.v_center + test.v_radius > v_hi {
        return Err(VlasovError::Input(
            "test function velocity support exceeds the grid".into(),
        ));
    }
    let cell = g0.hx * g0.hv;
    let spatial_quadrature = |snap: &EulerianSnapshot, with_boundary: Option<f64>| -> f64 {
        let state = &snap.state;
        let t = snap.t;
        let mut acc = 0.0;
        for ix in 0..state.nx {
            let x = state.x_origin + ix as f64 * state.hx;
            let e = snap.field[ix];
            for iv in 0..state.nv {
                let v = state.v_origin + iv as f64 * state.hv;
                let bf = beta.eval(state.f[ix * state.nv + iv]);
                if bf == 0.0 {
                    continue;
                }
                let contribution = match with_boundary {
                    Some(sign) => sign * test.value(t, x, v) * bf,
                    None => {
                        (test.dt(t, x, v) + v * test.dx(t, x, v) + e * test.dv(t, x, v)) * bf
                    }
                };
                acc += contribution;
            }
        }
        acc * cell
    };
    let mut residual = spatial_quadrature(&snapshots[0], Some(1.0));
    residual += spatial_quadrature(snapshots.last().unwrap(), Some(-1.0));
    let series: Vec<(f64, f64)> =
        snapshots.iter().map(|s| (s.t, spatial_quadrature(s, None))).collect();
    residual += trapezoid_series(&series);
    Ok(residual.abs())
}
