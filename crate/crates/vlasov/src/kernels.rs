//! Exact and mollified interaction kernels.
//!
//! The force kernel is `K(x) = sigma * c_d * x/|x|^d`, with `c_d` normalized
//! so that the flux of `c_d * x/|x|^d` through any sphere around the origin
//! is one. Mollified variants `K_n = K * psi_n` replace the singularity by a
//! smooth core of radius `1/n`; outside that radius they coincide with the
//! exact kernel because the mollifier is radial.
//!
//! Radial profiles (force magnitude, enclosed mollifier mass, regularized
//! potential) are tabulated once per kernel and interpolated afterwards, so
//! evaluation inside force loops stays cheap. Tables are immutable after
//! construction and can be shared freely across threads.

use crate::error::{Result, VlasovError};
use crate::numeric::{adaptive_simpson, MonotoneCubic};
use std::f64::consts::PI;
use std::fmt;

/// Sign of the interaction: repulsive (electrostatic, +1) or attractive
/// (gravitational, -1).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sign {
    Repulsive,
    Attractive,
}

impl Sign {
    pub fn as_f64(self) -> f64 {
        match self {
            Sign::Repulsive => 1.0,
            Sign::Attractive => -1.0,
        }
    }

    pub fn from_f64(v: f64) -> Result<Self> {
        if v == 1.0 {
            Ok(Sign::Repulsive)
        } else if v == -1.0 {
            Ok(Sign::Attractive)
        } else {
            Err(VlasovError::Config(format!("sigma must be +1 or -1, got {v}")))
        }
    }
}

impl fmt::Display for Sign {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", if *self == Sign::Repulsive { "+1" } else { "-1" })
    }
}

/// Mollification level: `Exact` keeps the singular kernel, `Level(n)`
/// convolves it with a radial bump supported in the ball of radius `1/n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mollification {
    Exact,
    Level(u32),
}

impl Mollification {
    pub fn level(self) -> Option<u32> {
        match self {
            Mollification::Exact => None,
            Mollification::Level(n) => Some(n),
        }
    }

    /// Radius of the smoothing core (`0` for the exact kernel).
    pub fn core_radius(self) -> f64 {
        match self {
            Mollification::Exact => 0.0,
            Mollification::Level(n) => 1.0 / n as f64,
        }
    }
}

impl fmt::Display for Mollification {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Mollification::Exact => write!(f, "inf"),
            Mollification::Level(n) => write!(f, "{n}"),
        }
    }
}

/// Shape of the mollifier bump. A single polynomial bump is registered:
/// `psi(x) ~ (1 - |x|^2)^4` on the unit ball, which is C^3, radial, cheap to
/// evaluate and smooth enough for all quadrature used here.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MollifierShape {
    #[default]
    PolyBump4,
}

impl MollifierShape {
    pub fn id(self) -> &'static str {
        match self {
            MollifierShape::PolyBump4 => "poly4",
        }
    }

    pub fn from_id(id: &str) -> Result<Self> {
        match id {
            "poly4" => Ok(MollifierShape::PolyBump4),
            other => Err(VlasovError::Config(format!("unknown mollifier shape '{other}'"))),
        }
    }

    /// Normalization constant making the unit-ball bump integrate to one.
    fn normalization(self, d: usize) -> f64 {
        match (self, d) {
            (MollifierShape::PolyBump4, 1) => 315.0 / 256.0,
            (MollifierShape::PolyBump4, 2) => 5.0 / PI,
            (MollifierShape::PolyBump4, 3) => 3465.0 / (512.0 * PI),
            _ => unreachable!("dimension validated on construction"),
        }
    }

    /// Unscaled bump profile as a function of |x| (support in [0, 1)).
    fn profile(self, s: f64) -> f64 {
        if s >= 1.0 {
            0.0
        } else {
            let t = 1.0 - s * s;
            t * t * t * t
        }
    }
}

/// Full description of an interaction kernel.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct KernelSpec {
    pub d: usize,
    pub sigma: Sign,
    pub mollification: Mollification,
    pub shape: MollifierShape,
}

impl KernelSpec {
    pub fn new(d: usize, sigma: Sign, mollification: Mollification) -> Result<Self> {
        if !(1..=3).contains(&d) {
            return Err(VlasovError::Config(format!("unsupported dimension d={d}")));
        }
        if let Mollification::Level(n) = mollification {
            if n < 1 {
                return Err(VlasovError::Config("mollification level must be >= 1".into()));
            }
        }
        Ok(Self { d, sigma, mollification, shape: MollifierShape::default() })
    }

    pub fn exact(d: usize, sigma: Sign) -> Result<Self> {
        Self::new(d, sigma, Mollification::Exact)
    }

    pub fn mollified(d: usize, sigma: Sign, n: u32) -> Result<Self> {
        Self::new(d, sigma, Mollification::Level(n))
    }

    /// One-line header form embedded in every output file.
    pub fn header_string(&self) -> String {
        format!(
            "d={} sigma={} n={} shape={}",
            self.d, self.sigma, self.mollification, self.shape.id()
        )
    }
}

/// Surface measure of the unit (d-1)-sphere; two points for d = 1.
pub fn unit_sphere_area(d: usize) -> Result<f64> {
    match d {
        1 => Ok(2.0),
        2 => Ok(2.0 * PI),
        3 => Ok(4.0 * PI),
        other => Err(VlasovError::Config(format!("unsupported dimension d={other}"))),
    }
}

/// The dimensional constant `c_d = 1 / (surface of the unit sphere)`.
pub fn dimensional_constant(d: usize) -> Result<f64> {
    Ok(1.0 / unit_sphere_area(d)?)
}

/// Exact force kernel `sigma * c_d * x / |x|^d`. Fails at the origin;
/// callers must use the mollified kernel (or exclude self-interaction).
pub fn poisson_kernel(x: &[f64], spec: &KernelSpec) -> Result<Vec<f64>> {
    if spec.mollification != Mollification::Exact {
        return Err(VlasovError::Config(
            "poisson_kernel expects an unmollified spec; use Kernel::force".into(),
        ));
    }
    let r = crate::numeric::norm(x);
    if r == 0.0 {
        return Err(VlasovError::Singularity("exact kernel evaluated at x = 0".into()));
    }
    let c = spec.sigma.as_f64() * dimensional_constant(spec.d)? / r.powi(spec.d as i32);
    Ok(x.iter().map(|&xi| c * xi).collect())
}

/// Fundamental solution H with `-laplace H = delta_0`:
/// `c_d/(d-2) |x|^(2-d)` for d = 3, `-log|x|/(2 pi)` for d = 2, `-|x|/2`
/// for d = 1.
pub fn fundamental_solution(x: &[f64], d: usize) -> Result<f64> {
    let r = crate::numeric::norm(x);
    if r == 0.0 {
        return Err(VlasovError::Singularity("fundamental solution evaluated at x = 0".into()));
    }
    fundamental_solution_radial(r, d)
}

pub(crate) fn fundamental_solution_radial(r: f64, d: usize) -> Result<f64> {
    match d {
        1 => Ok(-0.5 * r),
        2 => Ok(-(r.ln()) / (2.0 * PI)),
        3 => Ok(dimensional_constant(3)? / r),
        other => Err(VlasovError::Config(format!("unsupported dimension d={other}"))),
    }
}

/// Scaled mollifier `psi_n(x) = n^d psi(n x)`: nonnegative, radial, unit
/// integral, supported in the ball of radius `1/n`.
pub fn mollifier(n: u32, x: &[f64], shape: MollifierShape) -> f64 {
    let d = x.len();
    let nf = n as f64;
    let s = crate::numeric::norm(x) * nf;
    nf.powi(d as i32) * shape.normalization(d) * shape.profile(s)
}

const TABLE_NODES: usize = 2049;

/// A kernel with its radial tables built.
#[derive(Debug, Clone)]
pub struct Kernel {
    spec: KernelSpec,
    c_d: f64,
    /// Mollifier mass inside radius `s` (unit-scale, `s` in [0, 1]).
    enclosed_mass: Option<MonotoneCubic>,
    /// `integral_s^1 m(u) u^(1-d) du` (unit-scale), for the smoothed
    /// potential core.
    potential_core: Option<MonotoneCubic>,
}

impl Kernel {
    pub fn new(spec: KernelSpec) -> Result<Self> {
        let c_d = dimensional_constant(spec.d)?;
        let tables = match spec.mollification {
            Mollification::Exact => None,
            Mollification::Level(_) => Some(Self::build_tables(spec.d, spec.shape)),
        };
        let (enclosed_mass, potential_core) = match tables {
            Some((m, p)) => (Some(m), Some(p)),
            None => (None, None),
        };
        Ok(Self { spec, c_d, enclosed_mass, potential_core })
    }

    fn build_tables(d: usize, shape: MollifierShape) -> (MonotoneCubic, MonotoneCubic) {
        let area = unit_sphere_area(d).expect("validated dimension");
        let norm = shape.normalization(d);
        let shell = move |s: f64| area * norm * shape.profile(s) * s.powi(d as i32 - 1);
        let h = 1.0 / (TABLE_NODES - 1) as f64;
        let mut nodes = Vec::with_capacity(TABLE_NODES);
        let mut mass = Vec::with_capacity(TABLE_NODES);
        let mut acc = 0.0;
        nodes.push(0.0);
        mass.push(0.0);
        for i in 1..TABLE_NODES {
            let (a, b) = ((i - 1) as f64 * h, i as f64 * h);
            acc += adaptive_simpson(&shell, a, b, 1e-14);
            nodes.push(b);
            mass.push(acc);
        }
        let total = *mass.last().unwrap();
        // The closed-form normalization makes total = 1; divide anyway to pin
        // the tail exactly.
        for m in mass.iter_mut() {
            *m /= total;
        }
        let mass_interp = MonotoneCubic::new(nodes.clone(), mass.clone());

        // Reverse cumulative integral of m(u) u^(1-d), nonincreasing in s;
        // tabulated negated so it is increasing (monotone interpolation).
        let integrand = |u: f64, m: &MonotoneCubic| {
            if u == 0.0 {
                0.0
            } else {
                m.eval(u.min(1.0)) * u.powi(1 - d as i32)
            }
        };
        let mut pot = vec![0.0; TABLE_NODES];
        let mut acc = 0.0;
        for i in (0..TABLE_NODES - 1).rev() {
            let (a, b) = (i as f64 * h, (i + 1) as f64 * h);
            let f = |u: f64| integrand(u, &mass_interp);
            acc += adaptive_simpson(&f, a, b, 1e-14);
            pot[i] = acc;
        }
        let neg_pot: Vec<f64> = pot.iter().map(|v| -v).collect();
        let pot_interp = MonotoneCubic::new(nodes, neg_pot);
        (mass_interp, pot_interp)
    }

    pub fn spec(&self) -> &KernelSpec {
        &self.spec
    }

    pub fn c_d(&self) -> f64 {
        self.c_d
    }

    /// Mollifier mass enclosed in the ball of radius `r` (1 outside the core).
    pub fn enclosed_mass(&self, r: f64) -> f64 {
        match self.spec.mollification {
            Mollification::Exact => 1.0,
            Mollification::Level(n) => {
                let s = r * n as f64;
                if s >= 1.0 {
                    1.0
                } else {
                    self.enclosed_mass.as_ref().unwrap().eval(s).clamp(0.0, 1.0)
                }
            }
        }
    }

    /// Magnitude of the force kernel at radius `r` (zero at the origin for
    /// mollified kernels).
    pub fn force_magnitude(&self, r: f64) -> Result<f64> {
        if r == 0.0 {
            return match self.spec.mollification {
                Mollification::Exact => {
                    Err(VlasovError::Singularity("exact kernel evaluated at x = 0".into()))
                }
                Mollification::Level(_) => Ok(0.0),
            };
        }
        Ok(self.c_d * self.enclosed_mass(r) / r.powi(self.spec.d as i32 - 1))
    }

    /// Force vector at `x` (including the interaction sign).
    pub fn force(&self, x: &[f64]) -> Result<Vec<f64>> {
        let r = crate::numeric::norm(x);
        if r == 0.0 {
            return match self.spec.mollification {
                Mollification::Exact => {
                    Err(VlasovError::Singularity("exact kernel evaluated at x = 0".into()))
                }
                Mollification::Level(_) => Ok(vec![0.0; x.len()]),
            };
        }
        let mag = self.force_magnitude(r)?;
        let c = self.spec.sigma.as_f64() * mag / r;
        Ok(x.iter().map(|&xi| c * xi).collect())
    }

    /// Potential profile (fundamental solution smoothed by the mollifier)
    /// at radius `r`. Matches the exact fundamental solution outside the
    /// smoothing core. Not defined for d = 1.
    pub fn potential_radial(&self, r: f64) -> Result<f64> {
        let d = self.spec.d;
        if d < 2 {
            return Err(VlasovError::Config(
                "smoothed potential requires d >= 2 (no decaying fundamental solution in 1D)"
                    .into(),
            ));
        }
        match self.spec.mollification {
            Mollification::Exact => fundamental_solution_radial(r, d),
            Mollification::Level(n) => {
                let core = 1.0 / n as f64;
                if r >= core {
                    fundamental_solution_radial(r, d)
                } else {
                    let nf = n as f64;
                    let tail = -self.potential_core.as_ref().unwrap().eval(r * nf);
                    Ok(fundamental_solution_radial(core, d)?
                        + self.c_d * nf.powi(d as i32 - 2) * tail)
                }
            }
        }
    }

    /// A bound on `sup |K_n|`, attained on the tabulated radial profile.
    pub fn force_magnitude_bound(&self) -> Result<f64> {
        match self.spec.mollification {
            Mollification::Exact => Err(VlasovError::Config(
                "the exact kernel is unbounded near the origin".into(),
            )),
            Mollification::Level(n) => {
                let mut max = 0.0f64;
                let samples = 4096;
                for i in 1..=samples {
                    let r = i as f64 / samples as f64 / n as f64;
                    max = max.max(self.force_magnitude(r)?);
                }
                Ok(max)
            }
        }
    }

    /// Radial table rows `(r, |K_n|(r))`, for CSV export and debugging.
    pub fn radial_table(&self, r_max: f64, rows: usize) -> Result<Vec<(f64, f64)>> {
        let mut out = Vec::with_capacity(rows);
        for i in 0..rows {
            let r = r_max * (i as f64 + 0.5) / rows as f64;
            out.push((r, self.force_magnitude(r)?));
        }
        Ok(out)
    }
}

/// Numeric flux of the kernel force through the sphere of radius `r`.
///
/// For the exact kernel this equals `sigma` in every supported dimension;
/// the quadrature is the verification oracle used by `kernel-check`.
pub fn flux_through_sphere(kernel: &Kernel, r: f64) -> Result<f64> {
    let d = kernel.spec.d;
    match d {
        1 => {
            let right = kernel.force(&[r])?[0];
            let left = kernel.force(&[-r])?[0];
            Ok(right - left)
        }
        2 => {
            let m = 512;
            let mut flux = 0.0;
            for i in 0..m {
                let theta = 2.0 * PI * i as f64 / m as f64;
                let nx = [theta.cos(), theta.sin()];
                let k = kernel.force(&[r * nx[0], r * nx[1]])?;
                flux += (k[0] * nx[0] + k[1] * nx[1]) * r * (2.0 * PI / m as f64);
            }
            Ok(flux)
        }
        3 => {
            let (nodes, weights) = crate::numeric::gauss_legendre(48);
            let m_phi = 96;
            let mut flux = 0.0;
            for (ct, w) in nodes.iter().zip(&weights) {
                let st = (1.0 - ct * ct).sqrt();
                for j in 0..m_phi {
                    let phi = 2.0 * PI * j as f64 / m_phi as f64;
                    let nx = [st * phi.cos(), st * phi.sin(), *ct];
                    let k = kernel.force(&[r * nx[0], r * nx[1], r * nx[2]])?;
                    let dot = k[0] * nx[0] + k[1] * nx[1] + k[2] * nx[2];
                    flux += dot * r * r * w * (2.0 * PI / m_phi as f64);
                }
            }
            Ok(flux)
        }
        other => Err(VlasovError::Config(format!("unsupported dimension d={other}"))),
    }
}
