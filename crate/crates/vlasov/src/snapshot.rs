//! Output formats: flat binary snapshots (ensembles, spatial grids, phase
//! grids), diagnostics CSV, radial-table CSV, and gnuplot companions.
//!
//! Binary layout is little-endian with fixed eight-byte magics. Every file
//! carries the config hash and the kernel spec of the run that wrote it.
//! Float text output uses shortest round-trip formatting, so repeated runs
//! with identical configurations produce byte-identical files.

use crate::diagnostics::DiagnosticsRecord;
use crate::error::{Result, VlasovError};
use crate::eulerian::PhaseGridFunction;
use crate::fields::{GridSpec, Topology};
use crate::flow::{ParticleEnsemble, ParticleStatus};
use crate::kernels::{KernelSpec, Mollification, MollifierShape, Sign};
use std::io::{Read, Write};
use std::path::Path;

const MAGIC_ENSEMBLE: &[u8; 8] = b"VPCHK001";
const MAGIC_GRID: &[u8; 8] = b"VPGRD001";
const MAGIC_PHASE: &[u8; 8] = b"VPPHS001";

struct Cursor<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn new(data: &'a [u8]) -> Self {
        Self { data, pos: 0 }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.data.len() {
            return Err(VlasovError::Format("unexpected end of file".into()));
        }
        let slice = &self.data[self.pos..self.pos + n];
        self.pos += n;
        Ok(slice)
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64_vec(&mut self, n: usize) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(n);
        for _ in 0..n {
            out.push(self.f64()?);
        }
        Ok(out)
    }
}

fn push_u64(buf: &mut Vec<u8>, v: u64) {
    buf.extend_from_slice(&v.to_le_bytes());
}

fn push_f64(buf: &mut Vec<u8>, v: f64) {
    buf.extend_from_slice(&v.to_le_bytes());
}

fn push_kernel(buf: &mut Vec<u8>, spec: &KernelSpec) {
    push_u64(buf, spec.d as u64);
    push_f64(buf, spec.sigma.as_f64());
    push_u64(buf, spec.mollification.level().map_or(0, |n| n as u64));
    push_u64(buf, 0); // shape code: poly4
}

fn read_kernel(cur: &mut Cursor) -> Result<KernelSpec> {
    let d = cur.u64()? as usize;
    let sigma = Sign::from_f64(cur.f64()?)?;
    let level = cur.u64()?;
    let shape_code = cur.u64()?;
    if shape_code != 0 {
        return Err(VlasovError::Format(format!("unknown mollifier shape code {shape_code}")));
    }
    let mollification =
        if level == 0 { Mollification::Exact } else { Mollification::Level(level as u32) };
    let mut spec = KernelSpec::new(d, sigma, mollification)?;
    spec.shape = MollifierShape::PolyBump4;
    Ok(spec)
}

/// Checkpoint payload: the ensemble plus the flow accumulators needed to
/// resume bit-exactly.
#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub config_hash: u64,
    pub kernel: KernelSpec,
    pub step_index: u64,
    pub certificate: f64,
    pub escape_radius: f64,
    pub ensemble: ParticleEnsemble,
}

pub fn encode_checkpoint(chk: &Checkpoint) -> Vec<u8> {
    let ens = &chk.ensemble;
    let n = ens.len();
    let mut buf = Vec::with_capacity(64 + n * (2 * ens.d + 4) * 8);
    buf.extend_from_slice(MAGIC_ENSEMBLE);
    push_u64(&mut buf, chk.config_hash);
    push_kernel(&mut buf, &chk.kernel);
    push_f64(&mut buf, ens.t);
    push_u64(&mut buf, chk.step_index);
    push_u64(&mut buf, ens.seed);
    push_f64(&mut buf, ens.band_offset);
    push_f64(&mut buf, chk.certificate);
    push_f64(&mut buf, chk.escape_radius);
    push_u64(&mut buf, ens.d as u64);
    push_u64(&mut buf, n as u64);
    for v in ens.x.iter().chain(&ens.v).chain(&ens.w).chain(&ens.f0_value) {
        push_f64(&mut buf, *v);
    }
    for b in &ens.band {
        push_u64(&mut buf, *b as u64);
    }
    for s in &ens.status {
        let (code, time) = match s {
            ParticleStatus::Active => (0u64, f64::NAN),
            ParticleStatus::Escaped { t_plus } => (1, *t_plus),
            ParticleStatus::PreBirth { t_minus } => (2, *t_minus),
        };
        push_u64(&mut buf, code);
        push_f64(&mut buf, time);
    }
    buf
}

pub fn decode_checkpoint(data: &[u8]) -> Result<Checkpoint> {
    let mut cur = Cursor::new(data);
    if cur.take(8)? != MAGIC_ENSEMBLE {
        return Err(VlasovError::Format("not an ensemble checkpoint".into()));
    }
    let config_hash = cur.u64()?;
    let kernel = read_kernel(&mut cur)?;
    let t = cur.f64()?;
    let step_index = cur.u64()?;
    let seed = cur.u64()?;
    let band_offset = cur.f64()?;
    let certificate = cur.f64()?;
    let escape_radius = cur.f64()?;
    let d = cur.u64()? as usize;
    let n = cur.u64()? as usize;
    let x = cur.f64_vec(n * d)?;
    let v = cur.f64_vec(n * d)?;
    let w = cur.f64_vec(n)?;
    let f0 = cur.f64_vec(n)?;
    let mut band = Vec::with_capacity(n);
    for _ in 0..n {
        band.push(cur.u64()? as u32);
    }
    let mut status = Vec::with_capacity(n);
    for _ in 0..n {
        let code = cur.u64()?;
        let time = cur.f64()?;
        status.push(match code {
            0 => ParticleStatus::Active,
            1 => ParticleStatus::Escaped { t_plus: time },
            2 => ParticleStatus::PreBirth { t_minus: time },
            other => return Err(VlasovError::Format(format!("bad status code {other}"))),
        });
    }
    let ensemble =
        ParticleEnsemble::from_raw(d, x, v, w, f0, band, status, t, band_offset, seed)?;
    Ok(Checkpoint { config_hash, kernel, step_index, certificate, escape_radius, ensemble })
}

pub fn write_checkpoint(path: &Path, chk: &Checkpoint) -> Result<()> {
    let mut file = std::fs::File::create(path)?;
    file.write_all(&encode_checkpoint(chk))?;
    Ok(())
}

pub fn read_checkpoint(path: &Path) -> Result<Checkpoint> {
    let mut data = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut data)?;
    decode_checkpoint(&data)
}

/// One scalar field on a spatial grid.
pub fn encode_grid(
    grid: &GridSpec,
    values: &[f64],
    kernel: &KernelSpec,
    config_hash: u64,
) -> Vec<u8> {
    let mut buf = Vec::with_capacity(64 + values.len() * 8);
    buf.extend_from_slice(MAGIC_GRID);
    push_u64(&mut buf, config_hash);
    push_kernel(&mut buf, kernel);
    push_u64(&mut buf, grid.d as u64);
    for &c in &grid.cells {
        push_u64(&mut buf, c as u64);
    }
    push_f64(&mut buf, grid.h);
    for &o in &grid.origin {
        push_f64(&mut buf, o);
    }
    push_u64(&mut buf, matches!(grid.topology, Topology::Periodic) as u64);
    push_u64(&mut buf, values.len() as u64);
    for &v in values {
        push_f64(&mut buf, v);
    }
    buf
}

pub fn decode_grid(data: &[u8]) -> Result<(GridSpec, Vec<f64>, KernelSpec, u64)> {
    let mut cur = Cursor::new(data);
    if cur.take(8)? != MAGIC_GRID {
        return Err(VlasovError::Format("not a grid snapshot".into()));
    }
    let config_hash = cur.u64()?;
    let kernel = read_kernel(&mut cur)?;
    let d = cur.u64()? as usize;
    let mut cells = Vec::with_capacity(d);
    for _ in 0..d {
        cells.push(cur.u64()? as usize);
    }
    let h = cur.f64()?;
    let origin = cur.f64_vec(d)?;
    let topology = if cur.u64()? == 1 { Topology::Periodic } else { Topology::FreeSpace };
    let count = cur.u64()? as usize;
    let values = cur.f64_vec(count)?;
    let grid = GridSpec::new(origin, cells, h, topology)?;
    if values.len() != grid.len() {
        return Err(VlasovError::Format("grid payload size mismatch".into()));
    }
    Ok((grid, values, kernel, config_hash))
}

pub fn write_grid(
    path: &Path,
    grid: &GridSpec,
    values: &[f64],
    kernel: &KernelSpec,
    config_hash: u64,
) -> Result<()> {
    let mut file = std::fs::File::create(path)?;
    file.write_all(&encode_grid(grid, values, kernel, config_hash))?;
    Ok(())
}

/// Phase-space grid snapshot (2D payload).
pub fn encode_phase_grid(state: &PhaseGridFunction, kernel: &KernelSpec, config_hash: u64) -> Vec<u8> {
    let mut buf = Vec::with_capacity(96 + state.f.len() * 8);
    buf.extend_from_slice(MAGIC_PHASE);
    push_u64(&mut buf, config_hash);
    push_kernel(&mut buf, kernel);
    push_u64(&mut buf, state.nx as u64);
    push_u64(&mut buf, state.nv as u64);
    push_f64(&mut buf, state.x_origin);
    push_f64(&mut buf, state.hx);
    push_f64(&mut buf, state.v_origin);
    push_f64(&mut buf, state.hv);
    push_f64(&mut buf, state.t);
    for &v in &state.f {
        push_f64(&mut buf, v);
    }
    buf
}

pub fn decode_phase_grid(data: &[u8]) -> Result<(PhaseGridFunction, KernelSpec, u64)> {
    let mut cur = Cursor::new(data);
    if cur.take(8)? != MAGIC_PHASE {
        return Err(VlasovError::Format("not a phase-grid snapshot".into()));
    }
    let config_hash = cur.u64()?;
    let kernel = read_kernel(&mut cur)?;
    let nx = cur.u64()? as usize;
    let nv = cur.u64()? as usize;
    let x_origin = cur.f64()?;
    let hx = cur.f64()?;
    let v_origin = cur.f64()?;
    let hv = cur.f64()?;
    let t = cur.f64()?;
    let f = cur.f64_vec(nx * nv)?;
    Ok((PhaseGridFunction { nx, nv, x_origin, hx, v_origin, hv, f, t }, kernel, config_hash))
}

pub fn write_phase_grid(
    path: &Path,
    state: &PhaseGridFunction,
    kernel: &KernelSpec,
    config_hash: u64,
) -> Result<()> {
    let mut file = std::fs::File::create(path)?;
    file.write_all(&encode_phase_grid(state, kernel, config_hash))?;
    Ok(())
}

/// Diagnostics CSV with a fixed column schema; a failed run appends a
/// trailing marker line.
pub fn diagnostics_csv(
    records: &[DiagnosticsRecord],
    config_hash_hex: &str,
    kernel_header: &str,
    failure: Option<&str>,
) -> String {
    let mut out = String::new();
    out.push_str(&format!("# config_hash={config_hash_hex}\n"));
    out.push_str(&format!("# kernel: {kernel_header}\n"));
    let n_bands = records.first().map_or(0, |r| r.band_masses.len());
    let casimir_ids: Vec<&str> =
        records.first().map_or(Vec::new(), |r| r.casimirs.iter().map(|(id, _)| id.id()).collect());
    out.push_str("t,mass_total,active_mass,escaped_v_mass,escaped_x_mass,kinetic,potential_h,potential_e2,total_energy");
    for id in &casimir_ids {
        out.push_str(&format!(",casimir_{id}"));
    }
    out.push_str(",noblowup_partial");
    for k in 0..n_bands {
        out.push_str(&format!(",band_mass_{k}"));
    }
    out.push('\n');
    for rec in records {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}",
            rec.t,
            rec.mass_total,
            rec.active_mass,
            rec.escaped_v_mass,
            rec.escaped_x_mass,
            rec.kinetic,
            rec.potential_h,
            rec.potential_e2,
            rec.total_energy
        ));
        for (_, v) in &rec.casimirs {
            out.push_str(&format!(",{v}"));
        }
        out.push_str(&format!(",{}", rec.noblowup_partial));
        for k in 0..n_bands {
            let v = rec.band_masses.get(k).copied().unwrap_or(0.0);
            out.push_str(&format!(",{v}"));
        }
        out.push('\n');
    }
    if let Some(reason) = failure {
        out.push_str(&format!("# FAILED: {reason}\n"));
    }
    out
}

/// Radial kernel table CSV (`r, |K_n|(r)`).
pub fn kernel_table_csv(rows: &[(f64, f64)], kernel_header: &str) -> String {
    let mut out = format!("# kernel: {kernel_header}\nr,force_magnitude\n");
    for (r, k) in rows {
        out.push_str(&format!("{r},{k}\n"));
    }
    out
}

/// Compactification profile CSV (`r, psi0, psi0'`).
pub fn profile_csv(rows: &[(f64, f64, f64)]) -> String {
    let mut out = String::from("r,psi0,dpsi0\n");
    for (r, p, dp) in rows {
        out.push_str(&format!("{r},{p},{dp}\n"));
    }
    out
}

/// Sphere trajectory CSV: time then the m+1 coordinates.
pub fn sphere_run_csv(run: &crate::compactify::SphereRun) -> String {
    let m1 = run.points.first().map_or(0, |p| p.len());
    let mut out = String::from("t");
    for k in 0..m1 {
        out.push_str(&format!(",y{k}"));
    }
    out.push('\n');
    for (t, p) in run.times.iter().zip(&run.points) {
        out.push_str(&t.to_string());
        for v in p {
            out.push_str(&format!(",{v}"));
        }
        out.push('\n');
    }
    if let Some(t) = run.reached_pole {
        out.push_str(&format!("# reached_pole_at={t}\n"));
    }
    out
}

/// Gnuplot companion for a diagnostics CSV.
pub fn diagnostics_plot_script(csv_name: &str) -> String {
    format!(
        "set datafile separator ','\n\
         set key outside\n\
         set xlabel 't'\n\
         set terminal pngcairo size 1100,700\n\
         set output 'energies.png'\n\
         plot '{csv_name}' using 1:6 with lines title 'kinetic', \\\n\
         \x20   '{csv_name}' using 1:7 with lines title 'potential_h', \\\n\
         \x20   '{csv_name}' using 1:9 with lines title 'total'\n\
         set output 'mass.png'\n\
         plot '{csv_name}' using 1:2 with lines title 'mass_total', \\\n\
         \x20   '{csv_name}' using 1:3 with lines title 'active_mass'\n"
    )
}

pub fn write_text(path: &Path, content: &str) -> Result<()> {
    let mut file = std::fs::File::create(path)?;
    file.write_all(content.as_bytes())?;
    Ok(())
}
