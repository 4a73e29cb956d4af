//! Damped stereographic compactification of phase space onto the sphere.
//!
//! A monotone damping profile `D` is turned into a radial angle profile
//! `psi0` through a fixed construction: the damped profile
//! `D0(r) = min(1/4, r^-2) D(r)` is flattened near the origin and clipped
//! to an integrable envelope (`D1`), smoothed by a one-sided mollifier into
//! `psi1`, normalized by `c0 = pi / ||psi1||_1`, and integrated:
//! `psi0(r) = c0 int_0^r psi1`. The resulting map
//!
//! `psi(x) = sin(psi0(|x|)) (x/|x|, 0) - cos(psi0(|x|)) e_{m+1}`
//!
//! is a diffeomorphism from `R^m` onto the sphere minus the north pole,
//! exactly linear near the origin, with gradient bounded by `D(0)`
//! everywhere and by `D(|x|)` outside the threshold radius
//! `r0 = 2 pi / D0(0)`. Shrinking distances at infinity this fast makes
//! vector fields read on the sphere integrable even when trajectories
//! escape in finite time: blow-up becomes arrival at the north pole.

use crate::error::{Result, VlasovError};
use crate::numeric::{adaptive_simpson, MonotoneCubic};
use std::f64::consts::PI;

/// Monotone nonincreasing damping profile with values in (0, 1].
#[derive(Debug, Clone)]
pub enum DampingProfile {
    Constant(f64),
    /// `D(r) = 1 / (1 + (r/scale)^2)`
    InverseQuadratic { scale: f64 },
    /// Dyadic steps built from running mass-flux integrals: `D = 1` on
    /// [0, 1), `1 / (2^n c[n-1])` on [2^(n-1), 2^n), constant beyond the
    /// table.
    MassFlux { scales: Vec<f64> },
}

impl DampingProfile {
    pub fn eval(&self, r: f64) -> f64 {
        match self {
            DampingProfile::Constant(c) => *c,
            DampingProfile::InverseQuadratic { scale } => {
                let s = r / scale;
                1.0 / (1.0 + s * s)
            }
            DampingProfile::MassFlux { scales } => {
                if r < 1.0 || scales.is_empty() {
                    return 1.0;
                }
                // r in [2^(n-1), 2^n)  <=>  n = floor(log2 r) + 1
                let n = (r.log2().floor() as usize + 1).min(scales.len());
                1.0 / (2f64.powi(n as i32) * scales[n - 1])
            }
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            DampingProfile::Constant(c) => {
                if !(*c > 0.0 && *c <= 1.0) {
                    return Err(VlasovError::Input(format!(
                        "damping constant must lie in (0, 1], got {c}"
                    )));
                }
            }
            DampingProfile::InverseQuadratic { scale } => {
                if !(*scale > 0.0 && scale.is_finite()) {
                    return Err(VlasovError::Input("damping scale must be positive".into()));
                }
            }
            DampingProfile::MassFlux { scales } => {
                let mut prev = 1.0f64;
                for (i, c) in scales.iter().enumerate() {
                    if !(*c >= 1.0 && c.is_finite()) {
                        return Err(VlasovError::Input(format!(
                            "mass-flux scale {i} must be >= 1, got {c}"
                        )));
                    }
                    if *c < prev {
                        return Err(VlasovError::Input(
                            "mass-flux scales must be nondecreasing".into(),
                        ));
                    }
                    prev = *c;
                }
            }
        }
        Ok(())
    }
}

/// Running mass-flux scales `c[n] = 1 + int_0^T sum_{|z| <= 2^(n+1)} w |b(z)| dt`
/// from a tracked trajectory record: the data-driven damping input.
pub fn mass_flux_scales(
    samples: &[crate::flow::TrackedSample],
    weights: &[f64],
    d: usize,
    field: &dyn Fn(&[f64], &mut [f64]),
    levels: usize,
) -> Vec<f64> {
    let mut series = vec![Vec::with_capacity(samples.len()); levels];
    let mut e = vec![0.0; d];
    for sample in samples {
        let count = sample.x.len() / d;
        let mut per_level = vec![0.0; levels];
        for p in 0..count.min(weights.len()) {
            let x = &sample.x[p * d..(p + 1) * d];
            let v = &sample.v[p * d..(p + 1) * d];
            field(x, &mut e);
            let b_norm = (v.iter().map(|c| c * c).sum::<f64>()
                + e.iter().map(|c| c * c).sum::<f64>())
            .sqrt();
            let z = (x.iter().map(|c| c * c).sum::<f64>()
                + v.iter().map(|c| c * c).sum::<f64>())
            .sqrt();
            for (n, slot) in per_level.iter_mut().enumerate() {
                if z <= 2f64.powi(n as i32 + 1) {
                    *slot += weights[p] * b_norm;
                }
            }
        }
        for (n, slot) in per_level.iter().enumerate() {
            series[n].push((sample.t, *slot));
        }
    }
    series
        .iter()
        .map(|s| 1.0 + crate::diagnostics::trapezoid_series(s))
        .collect()
}

/// Tabulated radial profile of the compactification.
#[derive(Debug, Clone)]
pub struct DampedDiffeomorphism {
    damping: DampingProfile,
    /// `D0(0) = D(0)/4`.
    d0_zero: f64,
    d_zero: f64,
    c0: f64,
    /// Upper end of the exactly linear zone, `pi / D0(0)`.
    r_linear: f64,
    /// Threshold radius of the tail gradient bound, `2 pi / D0(0)`.
    r0: f64,
    r_max: f64,
    psi0: MonotoneCubic,
    psi0_slope: MonotoneCubic,
}

/// One-sided cubic mollifier on (0, 1) with unit integral.
fn one_sided_bump(u: f64) -> f64 {
    if u <= 0.0 || u >= 1.0 {
        0.0
    } else {
        12.0 * u * (1.0 - u) * (1.0 - u)
    }
}

const PROFILE_NODES: usize = 1600;
const TAIL_RADIUS: f64 = 4000.0;

/// Build the radial profile tables for a damping profile.
pub fn build_profile(damping: DampingProfile) -> Result<DampedDiffeomorphism> {
    damping.validate()?;
    let d_zero = damping.eval(0.0);
    // sampled monotonicity check
    let mut prev = d_zero;
    for i in 1..=512 {
        let r = TAIL_RADIUS * (i as f64 / 512.0).powi(3);
        let v = damping.eval(r);
        if !(v > 0.0 && v <= 1.0) {
            return Err(VlasovError::Input(format!("damping value {v} at r={r} outside (0,1]")));
        }
        if v > prev * (1.0 + 1e-12) {
            return Err(VlasovError::Input(format!("damping profile increases near r={r}")));
        }
        prev = v;
    }
    let d0 = {
        let damping = damping.clone();
        move |r: f64| {
            let clip = if r == 0.0 { 0.25 } else { 0.25f64.min(1.0 / (r * r)) };
            clip * damping.eval(r)
        }
    };
    let d0_zero = d0(0.0);
    let r_linear = PI / d0_zero;
    let r0 = 2.0 * PI / d0_zero;
    let break_radius = 1.0 + r_linear;
    let d1 = move |r: f64| {
        if r <= break_radius {
            d0_zero
        } else {
            d0(r).min(1.0 / (r * r))
        }
    };
    let psi1 = move |r: f64| {
        let f = |u: f64| one_sided_bump(u) * d1(r + u);
        adaptive_simpson(&f, 0.0, 1.0, 1e-13)
    };
    let r_max = TAIL_RADIUS.max(4.0 * r0);
    // geometric node ladder from the end of the linear zone
    let ratio = (r_max / r_linear).powf(1.0 / (PROFILE_NODES - 1) as f64);
    let mut nodes = Vec::with_capacity(PROFILE_NODES);
    let mut r = r_linear;
    for _ in 0..PROFILE_NODES {
        nodes.push(r);
        r *= ratio;
    }
    *nodes.last_mut().unwrap() = r_max;
    // cumulative integral of psi1 past the linear zone (the linear zone
    // itself contributes exactly pi since psi1 = D0(0) there)
    let mut raw = Vec::with_capacity(PROFILE_NODES);
    let mut slope_raw = Vec::with_capacity(PROFILE_NODES);
    let mut acc = PI;
    raw.push(acc);
    slope_raw.push(psi1(nodes[0]));
    for i in 1..PROFILE_NODES {
        acc += adaptive_simpson(&psi1, nodes[i - 1], nodes[i], 1e-12);
        raw.push(acc);
        slope_raw.push(psi1(nodes[i]));
    }
    // the tail of D1 is bounded by r^-2, giving an integrable remainder
    let tail_estimate = 1.0 / r_max;
    let norm_l1 = acc + tail_estimate;
    let c0 = PI / norm_l1;
    let psi0_values: Vec<f64> = raw.iter().map(|v| c0 * v).collect();
    let slope_values: Vec<f64> = slope_raw.iter().map(|v| c0 * v).collect();
    Ok(DampedDiffeomorphism {
        damping,
        d0_zero,
        d_zero,
        c0,
        r_linear,
        r0,
        r_max,
        psi0: MonotoneCubic::new(nodes.clone(), psi0_values),
        psi0_slope: MonotoneCubic::new(nodes, slope_values),
    })
}

impl DampedDiffeomorphism {
    pub fn c0(&self) -> f64 {
        self.c0
    }

    pub fn damping(&self) -> &DampingProfile {
        &self.damping
    }

    /// `D(0)`, the global gradient bound.
    pub fn gradient_bound(&self) -> f64 {
        self.d_zero
    }

    /// Threshold radius beyond which the gradient obeys the decaying bound.
    pub fn threshold_radius(&self) -> f64 {
        self.r0
    }

    pub fn linear_zone(&self) -> f64 {
        self.r_linear
    }

    pub fn table_radius(&self) -> f64 {
        self.r_max
    }

    /// Radial angle `psi0(r)`: exactly linear on the inner zone, tabulated
    /// beyond, clamped at the table end.
    pub fn psi0(&self, r: f64) -> f64 {
        if r < self.r_linear {
            self.c0 * self.d0_zero * r
        } else if r <= self.r_max {
            self.psi0.eval(r)
        } else {
            self.psi0.eval(self.r_max)
        }
    }

    /// Radial slope `psi0'(r)`.
    pub fn psi0_slope(&self, r: f64) -> f64 {
        if r < self.r_linear {
            self.c0 * self.d0_zero
        } else if r <= self.r_max {
            self.psi0_slope.eval(r)
        } else {
            self.psi0_slope.eval(self.r_max)
        }
    }

    /// Invert the radial angle to tolerance 1e-10 in the angle value.
    pub fn invert_angle(&self, theta: f64) -> Result<f64> {
        if !(0.0..=PI).contains(&theta) {
            return Err(VlasovError::Input(format!("angle {theta} outside [0, pi]")));
        }
        let theta_lin = self.c0 * PI;
        if theta <= theta_lin {
            return Ok(theta / (self.c0 * self.d0_zero));
        }
        let theta_max = self.psi0.eval(self.r_max);
        if theta > theta_max {
            return Err(VlasovError::GridRange(format!(
                "angle {theta} beyond the tabulated range {theta_max}"
            )));
        }
        // bisection within the angle tolerance, then Newton polish
        let mut r = self.psi0.invert(theta, 1e-10);
        for _ in 0..3 {
            let slope = self.psi0_slope.eval(r);
            if slope <= 0.0 {
                break;
            }
            r -= (self.psi0.eval(r) - theta) / slope;
            r = r.clamp(self.r_linear, self.r_max);
        }
        Ok(r)
    }

    /// Map a point of `R^m` onto the unit sphere in `R^(m+1)`; the origin
    /// goes to the south pole, infinity to the north pole.
    pub fn to_sphere(&self, x: &[f64]) -> Vec<f64> {
        let m = x.len();
        let r = crate::numeric::norm(x);
        let theta = self.psi0(r);
        let mut y = vec![0.0; m + 1];
        let coef = if r > 0.0 {
            theta.sin() / r
        } else {
            self.c0 * self.d0_zero
        };
        for k in 0..m {
            y[k] = coef * x[k];
        }
        y[m] = -theta.cos();
        y
    }

    /// Inverse map from the sphere (minus a small cap at the north pole
    /// beyond the tabulated range).
    pub fn from_sphere(&self, y: &[f64]) -> Result<Vec<f64>> {
        let m = y.len() - 1;
        let norm = crate::numeric::norm(y);
        if (norm - 1.0).abs() > 1e-8 {
            return Err(VlasovError::Input(format!("point is off the sphere by {}", norm - 1.0)));
        }
        let horizontal = crate::numeric::norm(&y[..m]);
        let theta = horizontal.atan2(-y[m]);
        let r = self.invert_angle(theta)?;
        let mut x = vec![0.0; m];
        if horizontal > 0.0 {
            for k in 0..m {
                x[k] = r * y[k] / horizontal;
            }
        }
        Ok(x)
    }

    /// Jacobian of the sphere map, an (m+1) x m matrix.
    pub fn jacobian(&self, x: &[f64]) -> Vec<Vec<f64>> {
        let m = x.len();
        let r = crate::numeric::norm(x);
        let mut jac = vec![vec![0.0; m]; m + 1];
        if r < 1e-9 * self.r_linear {
            let a = self.c0 * self.d0_zero;
            for k in 0..m {
                jac[k][k] = a;
            }
            // bottom row ~ a^2 x, negligible at this radius
            for k in 0..m {
                jac[m][k] = a * a * x[k];
            }
            return jac;
        }
        let theta = self.psi0(r);
        let slope = self.psi0_slope(r);
        let (sin_t, cos_t) = (theta.sin(), theta.cos());
        let radial_coef = (cos_t * slope * r - sin_t) / (r * r * r);
        let iso = sin_t / r;
        for i in 0..m {
            for j in 0..m {
                jac[i][j] = radial_coef * x[i] * x[j];
                if i == j {
                    jac[i][j] += iso;
                }
            }
        }
        for j in 0..m {
            jac[m][j] = sin_t * slope * x[j] / r;
        }
        jac
    }

    /// Rows `(r, psi0, psi0')` for CSV export.
    pub fn table_rows(&self, rows: usize) -> Vec<(f64, f64, f64)> {
        let mut out = Vec::with_capacity(rows);
        let ratio = (self.r_max / (self.r_linear * 1e-3)).powf(1.0 / (rows - 1) as f64);
        let mut r = self.r_linear * 1e-3;
        for _ in 0..rows {
            out.push((r, self.psi0(r), self.psi0_slope(r)));
            r *= ratio;
        }
        out
    }
}

/// Report of the finite-difference gradient bound check.
#[derive(Debug, Clone)]
pub struct GradientBoundReport {
    pub samples_checked: usize,
    pub max_norm_over_global_bound: f64,
    pub max_norm_over_tail_bound: f64,
    /// Largest measured norm minus the analytic majorant
    /// `2 |psi0'| + 2 sin(psi0)/r` (negative when the majorant holds).
    pub worst_majorant_gap: f64,
}

/// Finite-difference operator norm of the sphere map gradient at each
/// sample, checked against `D(0) (1+eps)` globally and `D(|x|) (1+eps)`
/// outside the threshold radius, with `eps = 1e-3` numerical slack.
pub fn gradient_bound_check(
    map: &DampedDiffeomorphism,
    samples: &[Vec<f64>],
) -> Result<GradientBoundReport> {
    let eps = 1e-3;
    let mut report = GradientBoundReport {
        samples_checked: 0,
        max_norm_over_global_bound: 0.0,
        max_norm_over_tail_bound: 0.0,
        worst_majorant_gap: f64::NEG_INFINITY,
    };
    for x in samples {
        let m = x.len();
        let r = crate::numeric::norm(x);
        let h = 1e-6 * (1.0 + r);
        let mut jac = vec![vec![0.0; m]; m + 1];
        for j in 0..m {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[j] += h;
            xm[j] -= h;
            let yp = map.to_sphere(&xp);
            let ym = map.to_sphere(&xm);
            for i in 0..=m {
                jac[i][j] = (yp[i] - ym[i]) / (2.0 * h);
            }
        }
        let norm = crate::numeric::operator_norm(&jac);
        let global = norm / map.gradient_bound();
        report.max_norm_over_global_bound = report.max_norm_over_global_bound.max(global);
        if global > 1.0 + eps {
            return Err(VlasovError::Numerics(format!(
                "gradient bound violated at |x| = {r}: norm {norm} > D(0) = {}",
                map.gradient_bound()
            )));
        }
        if r >= map.threshold_radius() {
            let tail = norm / map.damping().eval(r);
            report.max_norm_over_tail_bound = report.max_norm_over_tail_bound.max(tail);
            if tail > 1.0 + eps {
                return Err(VlasovError::Numerics(format!(
                    "tail gradient bound violated at |x| = {r}: norm {norm} > D(r) = {}",
                    map.damping().eval(r)
                )));
            }
        }
        let majorant = 2.0 * map.psi0_slope(r).abs()
            + if r > 0.0 { 2.0 * map.psi0(r).sin() / r } else { 2.0 * map.psi0_slope(0.0) };
        report.worst_majorant_gap = report.worst_majorant_gap.max(norm - majorant * (1.0 + eps));
        report.samples_checked += 1;
    }
    Ok(report)
}

/// The vector field read on the sphere: `c(y) = Dpsi(phi(y)) b(phi(y))`,
/// zero at the north pole, tangent to the sphere.
pub fn compactified_field(
    map: &DampedDiffeomorphism,
    y: &[f64],
    b: &dyn Fn(&[f64], &mut [f64]),
) -> Result<Vec<f64>> {
    let norm = crate::numeric::norm(y);
    if (norm - 1.0).abs() > 1e-8 {
        return Err(VlasovError::Input(format!("point is off the sphere by {}", norm - 1.0)));
    }
    Ok(field_on_sphere(map, y, b))
}

/// Unchecked variant used by the integrator: normalizes its argument and
/// returns zero beyond the tabulated cap around the pole.
fn field_on_sphere(
    map: &DampedDiffeomorphism,
    y: &[f64],
    b: &dyn Fn(&[f64], &mut [f64]),
) -> Vec<f64> {
    let m = y.len() - 1;
    let scale = crate::numeric::norm(y);
    let yn: Vec<f64> = y.iter().map(|v| v / scale).collect();
    let x = match map.from_sphere(&yn) {
        Ok(x) => x,
        // inside the untabulated pole cap the damped field is negligible
        Err(_) => return vec![0.0; m + 1],
    };
    let mut bx = vec![0.0; m];
    b(&x, &mut bx);
    let jac = map.jacobian(&x);
    let mut c = vec![0.0; m + 1];
    for i in 0..=m {
        for j in 0..m {
            c[i] += jac[i][j] * bx[j];
        }
    }
    // project out the radial component left by the table inversion
    let radial: f64 = c.iter().zip(&yn).map(|(a, b)| a * b).sum();
    for (ci, yi) in c.iter_mut().zip(&yn) {
        *ci -= radial * yi;
    }
    c
}

/// Trajectory of the compactified field on the sphere.
#[derive(Debug, Clone)]
pub struct SphereRun {
    pub times: Vec<f64>,
    pub points: Vec<Vec<f64>>,
    /// Interpolated time at which the trajectory entered the pole
    /// neighborhood, if it did.
    pub reached_pole: Option<f64>,
}

/// Integrate the compactified field with projected fourth-order steps,
/// renormalizing to the sphere after every step; flags arrival within
/// geodesic distance `pole_radius` of the north pole. The step is rejected
/// if the renormalization correction exceeds 1e-3.
pub fn integrate_on_sphere(
    map: &DampedDiffeomorphism,
    b: &dyn Fn(&[f64], &mut [f64]),
    x0: &[f64],
    dt: f64,
    t_end: f64,
    pole_radius: f64,
) -> Result<SphereRun> {
    if dt <= 0.0 || t_end < 0.0 {
        return Err(VlasovError::Config("need dt > 0 and t_end >= 0".into()));
    }
    let mut y = map.to_sphere(x0);
    let mut t = 0.0;
    let mut run = SphereRun {
        times: vec![0.0],
        points: vec![y.clone()],
        reached_pole: None,
    };
    let pole_distance = |y: &[f64]| -> f64 { y[y.len() - 1].clamp(-1.0, 1.0).acos() };
    let mut dist_prev = pole_distance(&y);
    if dist_prev <= pole_radius {
        run.reached_pole = Some(0.0);
        return Ok(run);
    }
    let steps = (t_end / dt).ceil() as u64;
    for _ in 0..steps {
        let k1 = field_on_sphere(map, &y, b);
        let y2: Vec<f64> = y.iter().zip(&k1).map(|(yi, ki)| yi + 0.5 * dt * ki).collect();
        let k2 = field_on_sphere(map, &y2, b);
        let y3: Vec<f64> = y.iter().zip(&k2).map(|(yi, ki)| yi + 0.5 * dt * ki).collect();
        let k3 = field_on_sphere(map, &y3, b);
        let y4: Vec<f64> = y.iter().zip(&k3).map(|(yi, ki)| yi + dt * ki).collect();
        let k4 = field_on_sphere(map, &y4, b);
        for i in 0..y.len() {
            y[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        let norm = crate::numeric::norm(&y);
        if (norm - 1.0).abs() > 1e-3 {
            return Err(VlasovError::Numerics(format!(
                "sphere step rejected at t = {t}: renormalization correction {}",
                (norm - 1.0).abs()
            )));
        }
        y.iter_mut().for_each(|v| *v /= norm);
        t += dt;
        run.times.push(t);
        run.points.push(y.clone());
        let dist = pole_distance(&y);
        if dist <= pole_radius {
            // linear interpolation of the crossing time
            let frac = if dist_prev > dist {
                ((dist_prev - pole_radius) / (dist_prev - dist)).clamp(0.0, 1.0)
            } else {
                1.0
            };
            run.reached_pole = Some(t - dt + frac * dt);
            return Ok(run);
        }
        dist_prev = dist;
    }
    Ok(run)
}

/// Reference event integrator: adaptive step-doubling fourth-order steps
/// in the original coordinates, with bisection of the event time at the
/// first crossing of `|z| = radius`. Shares no code with the sphere
/// integration it cross-validates.
pub fn euclidean_escape_time(
    b: &dyn Fn(&[f64], &mut [f64]),
    z0: &[f64],
    radius: f64,
    t_max: f64,
    tol: f64,
) -> Result<Option<f64>> {
    let m = z0.len();
    let rk4 = |z: &[f64], h: f64| -> Vec<f64> {
        let mut k1 = vec![0.0; m];
        b(z, &mut k1);
        let z2: Vec<f64> = z.iter().zip(&k1).map(|(zi, ki)| zi + 0.5 * h * ki).collect();
        let mut k2 = vec![0.0; m];
        b(&z2, &mut k2);
        let z3: Vec<f64> = z.iter().zip(&k2).map(|(zi, ki)| zi + 0.5 * h * ki).collect();
        let mut k3 = vec![0.0; m];
        b(&z3, &mut k3);
        let z4: Vec<f64> = z.iter().zip(&k3).map(|(zi, ki)| zi + h * ki).collect();
        let mut k4 = vec![0.0; m];
        b(&z4, &mut k4);
        (0..m)
            .map(|i| z[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
            .collect()
    };
    let mut z = z0.to_vec();
    let mut t = 0.0;
    let mut h = 1e-3;
    if crate::numeric::norm(&z) >= radius {
        return Ok(Some(0.0));
    }
    let mut guard = 0usize;
    while t < t_max {
        guard += 1;
        if guard > 50_000_000 {
            return Err(VlasovError::Numerics("event integration stalled".into()));
        }
        let coarse = rk4(&z, h);
        let fine = rk4(&rk4(&z, 0.5 * h), 0.5 * h);
        let err: f64 = coarse
            .iter()
            .zip(&fine)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
            / (1.0 + crate::numeric::norm(&fine));
        if !err.is_finite() || err > tol {
            h *= 0.5;
            if h < 1e-15 {
                return Err(VlasovError::Numerics("step size underflow before event".into()));
            }
            continue;
        }
        if crate::numeric::norm(&fine) >= radius {
            // bisect the crossing inside [t, t + h]
            let (mut lo, mut hi) = (0.0, h);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                let trial = rk4(&rk4(&z, 0.5 * mid), 0.5 * mid);
                if crate::numeric::norm(&trial) >= radius {
                    hi = mid;
                } else {
                    lo = mid;
                }
                if hi - lo <= 1e-12 * (t + h).max(1.0) {
                    break;
                }
            }
            return Ok(Some(t + 0.5 * (lo + hi)));
        }
        z = fine;
        t += h;
        if err < tol / 64.0 {
            h *= 2.0;
        }
    }
    Ok(None)
}

/// Escape certificate from a tracked trajectory record: trapezoid
/// quadrature in time of
/// `sum_p w_p |b(z_p)| / ((1 + |z_p|) log(2 + |z_p|))`
/// over particles still inside the escape ball. Finite, refinement-stable
/// values certify that no mass runs off to infinity.
pub fn noblowup_certificate(
    samples: &[crate::flow::TrackedSample],
    weights: &[f64],
    d: usize,
    field: &dyn Fn(&[f64], &mut [f64]),
    escape_radius: f64,
) -> f64 {
    let mut series = Vec::with_capacity(samples.len());
    let mut e = vec![0.0; d];
    for sample in samples {
        let count = sample.x.len() / d;
        let mut total = 0.0;
        for p in 0..count.min(weights.len()) {
            let x = &sample.x[p * d..(p + 1) * d];
            let v = &sample.v[p * d..(p + 1) * d];
            let z = (x.iter().map(|c| c * c).sum::<f64>()
                + v.iter().map(|c| c * c).sum::<f64>())
            .sqrt();
            if z > escape_radius {
                continue;
            }
            field(x, &mut e);
            let b_norm = (v.iter().map(|c| c * c).sum::<f64>()
                + e.iter().map(|c| c * c).sum::<f64>())
            .sqrt();
            total += weights[p] * b_norm / ((1.0 + z) * (2.0 + z).ln());
        }
        series.push((sample.t, total));
    }
    crate::diagnostics::trapezoid_series(&series)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::SplitMix64;
    use approx::assert_relative_eq;

    fn standard_map() -> DampedDiffeomorphism {
        build_profile(DampingProfile::Constant(1.0)).unwrap()
    }

    #[test]
    fn profile_linear_zone_and_normalization() {
        let map = standard_map();
        assert!(map.c0() > 0.0 && map.c0() < 1.0);
        // D == 1: D0(0) = 1/4, linear slope c0/4 on [0, 4 pi)
        assert_relative_eq!(map.linear_zone(), 4.0 * PI, epsilon = 1e-12);
        for r in [0.1, 1.0, 4.0, 4.0 * PI * 0.999] {
            assert_relative_eq!(map.psi0(r), map.c0() * 0.25 * r, epsilon = 1e-13);
        }
    }

    #[test]
    fn profile_reaches_pi_and_is_strictly_increasing() {
        for damping in [
            DampingProfile::Constant(1.0),
            DampingProfile::Constant(0.37),
            DampingProfile::InverseQuadratic { scale: 5.0 },
            DampingProfile::MassFlux { scales: vec![1.5, 2.0, 8.0, 110.0] },
        ] {
            let map = build_profile(damping).unwrap();
            let tail = map.psi0(map.table_radius());
            assert!(tail >= PI - 1e-3, "tail {tail}");
            assert!(tail <= PI);
            let rows = map.table_rows(400);
            for pair in rows.windows(2) {
                assert!(pair[1].1 > pair[0].1, "psi0 not strictly increasing at {:?}", pair);
            }
        }
    }

    #[test]
    fn profile_slope_bounds() {
        for damping in [
            DampingProfile::Constant(1.0),
            DampingProfile::InverseQuadratic { scale: 3.0 },
        ] {
            let map = build_profile(damping.clone()).unwrap();
            let d0_zero = 0.25 * damping.eval(0.0);
            let mut r = 1e-3;
            while r < map.table_radius() {
                let slope = map.psi0_slope(r);
                assert!(slope <= d0_zero * (1.0 + 1e-9), "global slope bound at r={r}");
                if r >= 2.0 * PI / d0_zero {
                    let d0_r = 0.25f64.min(1.0 / (r * r)) * damping.eval(r);
                    assert!(slope <= d0_r * (1.0 + 1e-6), "tail slope bound at r={r}: {slope} vs {d0_r}");
                }
                r *= 1.3;
            }
        }
    }

    #[test]
    fn rejects_bad_damping() {
        assert!(build_profile(DampingProfile::Constant(0.0)).is_err());
        assert!(build_profile(DampingProfile::Constant(1.5)).is_err());
        assert!(build_profile(DampingProfile::MassFlux { scales: vec![2.0, 1.5] }).is_err());
        assert!(build_profile(DampingProfile::MassFlux { scales: vec![0.5] }).is_err());
    }

    #[test]
    fn sphere_map_basics() {
        let map = standard_map();
        let south = map.to_sphere(&[0.0, 0.0]);
        assert_eq!(south, vec![0.0, 0.0, -1.0]);
        let mut rng = SplitMix64::new(17);
        for _ in 0..10_000 {
            let x = [rng.range(-50.0, 50.0), rng.range(-50.0, 50.0)];
            let y = map.to_sphere(&x);
            assert!((crate::numeric::norm(&y) - 1.0).abs() <= 1e-14);
        }
    }

    #[test]
    fn round_trip_within_table_range() {
        let map = standard_map();
        let mut rng = SplitMix64::new(3);
        for _ in 0..2000 {
            let scale = 10f64.powf(rng.range(-2.0, 3.0));
            let x = [rng.range(-1.0, 1.0) * scale, rng.range(-1.0, 1.0) * scale];
            let y = map.to_sphere(&x);
            let back = map.from_sphere(&y).unwrap();
            for (a, b) in x.iter().zip(&back) {
                assert!((a - b).abs() <= 1e-9 * (1.0 + crate::numeric::norm(&x)), "{x:?} vs {back:?}");
            }
        }
        // off-sphere points are rejected
        assert!(map.from_sphere(&[0.5, 0.5, 0.5]).is_err());
    }

    #[test]
    fn distinct_points_stay_separated() {
        let map = standard_map();
        let mut rng = SplitMix64::new(29);
        let points: Vec<[f64; 2]> = (0..200)
            .map(|_| [rng.range(-100.0, 100.0), rng.range(-100.0, 100.0)])
            .collect();
        for i in 0..points.len() {
            for j in i + 1..points.len() {
                let yi = map.to_sphere(&points[i]);
                let yj = map.to_sphere(&points[j]);
                let dist: f64 =
                    yi.iter().zip(&yj).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
                assert!(dist > 0.0);
            }
        }
    }

    #[test]
    fn gradient_bounds_hold_on_log_spaced_samples() {
        let map = build_profile(DampingProfile::InverseQuadratic { scale: 4.0 }).unwrap();
        let mut samples = vec![vec![0.0, 0.0]];
        let mut rng = SplitMix64::new(11);
        for i in 0..400 {
            let r = 10f64.powf(-2.0 + 5.0 * i as f64 / 400.0);
            let phi = rng.range(0.0, 2.0 * PI);
            samples.push(vec![r * phi.cos(), r * phi.sin()]);
        }
        let report = gradient_bound_check(&map, &samples).unwrap();
        assert_eq!(report.samples_checked, 401);
        assert!(report.max_norm_over_global_bound <= 1.0 + 1e-3);
        assert!(report.worst_majorant_gap <= 0.0, "majorant violated: {report:?}");
    }

    #[test]
    fn compactified_field_is_tangent_and_vanishes_at_pole() {
        let map = standard_map();
        let b = |x: &[f64], out: &mut [f64]| {
            out[0] = x[1];
            out[1] = -x[0] + 0.2 * x[0] * x[0];
        };
        // north pole: zero by definition
        let c = compactified_field(&map, &[0.0, 0.0, 1.0], &b).unwrap();
        assert!(c.iter().all(|&v| v == 0.0));
        // zero field: zero everywhere
        let zero = |_: &[f64], out: &mut [f64]| out.iter_mut().for_each(|v| *v = 0.0);
        let y = map.to_sphere(&[1.3, -0.4]);
        let c = compactified_field(&map, &y, &zero).unwrap();
        assert!(c.iter().all(|&v| v == 0.0));
        // tangency on random points
        let mut rng = SplitMix64::new(23);
        for _ in 0..1000 {
            let x = [rng.range(-30.0, 30.0), rng.range(-30.0, 30.0)];
            let y = map.to_sphere(&x);
            let c = compactified_field(&map, &y, &b).unwrap();
            let dot: f64 = c.iter().zip(&y).map(|(a, b)| a * b).sum();
            assert!(dot.abs() <= 1e-10, "tangency defect {dot} at {x:?}");
        }
        // off-sphere input is rejected
        assert!(compactified_field(&map, &[0.9, 0.0, 0.0], &b).is_err());
    }

    #[test]
    fn zero_field_is_stationary_on_sphere() {
        let map = standard_map();
        let zero = |_: &[f64], out: &mut [f64]| out.iter_mut().for_each(|v| *v = 0.0);
        let run = integrate_on_sphere(&map, &zero, &[0.7, -0.2], 0.01, 1.0, 1e-2).unwrap();
        assert!(run.reached_pole.is_none());
        let first = &run.points[0];
        let last = run.points.last().unwrap();
        for (a, b) in first.iter().zip(last) {
            // renormalization may touch the last bit
            assert!((a - b).abs() <= 1e-13);
        }
    }

    #[test]
    fn bounded_orbit_projects_back_onto_euclidean_orbit() {
        let map = standard_map();
        // harmonic phase flow in m = 2: z = (x, v), dz/dt = (v, -x)
        let b = |z: &[f64], out: &mut [f64]| {
            out[0] = z[1];
            out[1] = -z[0];
        };
        let dt = 1e-3;
        let t_end = 2.0 * PI;
        let run = integrate_on_sphere(&map, &b, &[1.0, 0.0], dt, t_end, 1e-2).unwrap();
        assert!(run.reached_pole.is_none());
        let mut max_dev = 0.0f64;
        for (t, y) in run.times.iter().zip(&run.points) {
            let x = map.from_sphere(y).unwrap();
            let exact = [t.cos(), -t.sin()];
            let dev = ((x[0] - exact[0]).powi(2) + (x[1] - exact[1]).powi(2)).sqrt();
            max_dev = max_dev.max(dev);
        }
        assert!(max_dev <= 1e-6, "projection deviation {max_dev}");
    }

    #[test]
    fn blow_up_field_escape_time_matches_reference_integration() {
        let map = standard_map();
        // 1D phase space: dx/dt = v, dv/dt = x (1 + x^2) escapes in
        // finite time from x0 = 1
        let b = |z: &[f64], out: &mut [f64]| {
            out[0] = z[1];
            out[1] = z[0] * (1.0 + z[0] * z[0]);
        };
        let pole_radius = 1e-2;
        let escape_radius = map.invert_angle(PI - pole_radius).unwrap();
        let reference = euclidean_escape_time(&b, &[1.0, 0.0], escape_radius, 10.0, 1e-12)
            .unwrap()
            .expect("trajectory escapes");
        let run = integrate_on_sphere(&map, &b, &[1.0, 0.0], 2e-5, 10.0, pole_radius).unwrap();
        let t_pole = run.reached_pole.expect("sphere trajectory reaches the pole cap");
        let rel = (t_pole - reference).abs() / reference;
        assert!(rel <= 1e-3, "sphere {t_pole} vs reference {reference}: rel {rel}");
    }

    #[test]
    fn certificate_two_quadratures_agree_for_free_streaming() {
        // zero field, compact support: integrand evaluable at any time
        let zero = |_: &[f64], out: &mut [f64]| out.iter_mut().for_each(|v| *v = 0.0);
        let n = 40;
        let mut rng = SplitMix64::new(7);
        let x0: Vec<f64> = (0..n).map(|_| rng.range(-1.0, 1.0)).collect();
        let v0: Vec<f64> = (0..n).map(|_| rng.range(-1.0, 1.0)).collect();
        let w: Vec<f64> = (0..n).map(|_| rng.range(0.2, 1.0)).collect();
        let t_end = 2.0;
        let steps = 4000usize;
        let state_at = |t: f64| -> crate::flow::TrackedSample {
            crate::flow::TrackedSample {
                t,
                x: x0.iter().zip(&v0).map(|(x, v)| x + v * t).collect(),
                v: v0.clone(),
            }
        };
        let trapezoid_samples: Vec<_> =
            (0..=steps).map(|i| state_at(t_end * i as f64 / steps as f64)).collect();
        let cert_trapz = noblowup_certificate(&trapezoid_samples, &w, 1, &zero, 1e9);
        let h = t_end / steps as f64;
        let midpoint_samples: Vec<_> =
            (0..steps).map(|i| state_at(h * (i as f64 + 0.5))).collect();
        let cert_mid: f64 = midpoint_samples
            .iter()
            .map(|s| {
                let mut total = 0.0;
                for p in 0..n {
                    let z = (s.x[p].powi(2) + s.v[p].powi(2)).sqrt();
                    total += w[p] * s.v[p].abs() / ((1.0 + z) * (2.0 + z).ln());
                }
                total * h
            })
            .sum();
        assert_relative_eq!(cert_trapz, cert_mid, max_relative = 1e-4);
    }
}
