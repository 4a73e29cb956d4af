//! Small numeric helpers: quadrature, interpolation, low-discrepancy
//! sequences, deterministic hashing and a tiny splittable RNG for synthetic
//! test data.

/// Adaptive Simpson quadrature on [a, b].
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    fn simpson<F: Fn(f64) -> f64>(f: &F, a: f64, fa: f64, b: f64, fb: f64) -> (f64, f64, f64) {
        let m = 0.5 * (a + b);
        let fm = f(m);
        ((b - a) / 6.0 * (fa + 4.0 * fm + fb), m, fm)
    }
    fn recurse<F: Fn(f64) -> f64>(
        f: &F,
        a: f64,
        fa: f64,
        b: f64,
        fb: f64,
        whole: f64,
        m: f64,
        fm: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let (left, lm, flm) = simpson(f, a, fa, m, fm);
        let (right, rm, frm) = simpson(f, m, fm, b, fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            left + right + delta / 15.0
        } else {
            recurse(f, a, fa, m, fm, left, lm, flm, 0.5 * tol, depth - 1)
                + recurse(f, m, fm, b, fb, right, rm, frm, 0.5 * tol, depth - 1)
        }
    }
    let fa = f(a);
    let fb = f(b);
    let (whole, m, fm) = simpson(f, a, fa, b, fb);
    recurse(f, a, fa, b, fb, whole, m, fm, tol, 48)
}

/// Nodes and weights of the n-point Gauss-Legendre rule on [-1, 1],
/// computed by Newton iteration on the Legendre recurrence.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..(n + 1) / 2 {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0f64, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let (mut p0, mut p1) = (1.0f64, x);
        for k in 2..=n {
            let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
            p0 = p1;
            p1 = p2;
        }
        let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

/// Monotone piecewise-cubic Hermite interpolant (Fritsch-Carlson slopes).
///
/// Preserves monotonicity of the data, which keeps tabulated radial
/// profiles invertible by bisection.
#[derive(Debug, Clone)]
pub struct MonotoneCubic {
    x: Vec<f64>,
    y: Vec<f64>,
    slope: Vec<f64>,
}

impl MonotoneCubic {
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Self {
        assert!(x.len() == y.len() && x.len() >= 2);
        let n = x.len();
        let mut d = vec![0.0; n - 1];
        for i in 0..n - 1 {
            d[i] = (y[i + 1] - y[i]) / (x[i + 1] - x[i]);
        }
        let mut slope = vec![0.0; n];
        slope[0] = d[0];
        slope[n - 1] = d[n - 2];
        for i in 1..n - 1 {
            slope[i] = if d[i - 1] * d[i] <= 0.0 {
                0.0
            } else {
                let w1 = 2.0 * (x[i + 1] - x[i]) + (x[i] - x[i - 1]);
                let w2 = (x[i + 1] - x[i]) + 2.0 * (x[i] - x[i - 1]);
                (w1 + w2) / (w1 / d[i - 1] + w2 / d[i])
            };
        }
        // Fritsch-Carlson limiter
        for i in 0..n - 1 {
            if d[i] == 0.0 {
                slope[i] = 0.0;
                slope[i + 1] = 0.0;
            } else {
                let a = slope[i] / d[i];
                let b = slope[i + 1] / d[i];
                let s = a * a + b * b;
                if s > 9.0 {
                    let t = 3.0 / s.sqrt();
                    slope[i] = t * a * d[i];
                    slope[i + 1] = t * b * d[i];
                }
            }
        }
        Self { x, y, slope }
    }

    fn segment(&self, xq: f64) -> usize {
        match self
            .x
            .binary_search_by(|v| v.partial_cmp(&xq).expect("non-finite abscissa"))
        {
            Ok(i) => i.min(self.x.len() - 2),
            Err(i) => i.saturating_sub(1).min(self.x.len() - 2),
        }
    }

    pub fn eval(&self, xq: f64) -> f64 {
        let i = self.segment(xq);
        let h = self.x[i + 1] - self.x[i];
        let t = (xq - self.x[i]) / h;
        let (t2, t3) = (t * t, t * t * t);
        let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
        let h10 = t3 - 2.0 * t2 + t;
        let h01 = -2.0 * t3 + 3.0 * t2;
        let h11 = t3 - t2;
        h00 * self.y[i] + h10 * h * self.slope[i] + h01 * self.y[i + 1] + h11 * h * self.slope[i + 1]
    }

    pub fn eval_derivative(&self, xq: f64) -> f64 {
        let i = self.segment(xq);
        let h = self.x[i + 1] - self.x[i];
        let t = (xq - self.x[i]) / h;
        let dh00 = (6.0 * t * t - 6.0 * t) / h;
        let dh10 = 3.0 * t * t - 4.0 * t + 1.0;
        let dh01 = (-6.0 * t * t + 6.0 * t) / h;
        let dh11 = 3.0 * t * t - 2.0 * t;
        dh00 * self.y[i] + dh10 * self.slope[i] + dh01 * self.y[i + 1] + dh11 * self.slope[i + 1]
    }

    pub fn x_min(&self) -> f64 {
        self.x[0]
    }

    pub fn x_max(&self) -> f64 {
        *self.x.last().unwrap()
    }

    /// Invert a strictly increasing interpolant by bisection to `tol` in y.
    pub fn invert(&self, yq: f64, tol: f64) -> f64 {
        let (mut lo, mut hi) = (self.x[0], *self.x.last().unwrap());
        let yq = yq.clamp(self.y[0], *self.y.last().unwrap());
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            let ym = self.eval(mid);
            if (ym - yq).abs() <= tol {
                return mid;
            }
            if ym < yq {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }
}

/// Van der Corput radical inverse in the given base.
fn radical_inverse(mut i: u64, base: u64) -> f64 {
    let inv = 1.0 / base as f64;
    let mut x = 0.0;
    let mut scale = inv;
    while i > 0 {
        x += (i % base) as f64 * scale;
        i /= base;
        scale *= inv;
    }
    x
}

const HALTON_BASES: [u64; 8] = [2, 3, 5, 7, 11, 13, 17, 19];

/// The i-th point of the Halton low-discrepancy sequence in [0,1)^dim.
///
/// An index offset derived from the seed decorrelates distinct samplings
/// while keeping the sequence fully deterministic.
pub fn halton_point(i: u64, dim: usize, seed_offset: u64, out: &mut [f64]) {
    assert!(dim <= HALTON_BASES.len());
    for (k, slot) in out.iter_mut().enumerate().take(dim) {
        *slot = radical_inverse(i + 1 + seed_offset, HALTON_BASES[k]);
    }
}

/// FNV-1a 64-bit hash; used for config fingerprints embedded in outputs.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// SplitMix64: tiny deterministic generator for offsets and test data.
#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        Self { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9e37_79b9_7f4a_7c15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^ (z >> 31)
    }

    /// Uniform in [0, 1).
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in [lo, hi).
    pub fn range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_f64()
    }
}

/// Euclidean norm of a slice.
pub fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Determinant by LU decomposition with partial pivoting (small matrices).
pub fn determinant(mut a: Vec<Vec<f64>>) -> f64 {
    let n = a.len();
    let mut det = 1.0;
    for k in 0..n {
        let mut piv = k;
        for i in k + 1..n {
            if a[i][k].abs() > a[piv][k].abs() {
                piv = i;
            }
        }
        if a[piv][k] == 0.0 {
            return 0.0;
        }
        if piv != k {
            a.swap(piv, k);
            det = -det;
        }
        det *= a[k][k];
        for i in k + 1..n {
            let f = a[i][k] / a[k][k];
            for j in k..n {
                a[i][j] -= f * a[k][j];
            }
        }
    }
    det
}

/// Operator norm (largest singular value) of a rectangular matrix,
/// via power iteration on A^T A.
pub fn operator_norm(a: &[Vec<f64>]) -> f64 {
    let rows = a.len();
    if rows == 0 {
        return 0.0;
    }
    let cols = a[0].len();
    let mut v: Vec<f64> = (0..cols).map(|i| 1.0 + (i as f64) * 0.1).collect();
    let nv = norm(&v);
    v.iter_mut().for_each(|x| *x /= nv);
    let mut sigma = 0.0;
    for _ in 0..256 {
        // w = A v, u = A^T w
        let w: Vec<f64> = (0..rows)
            .map(|i| (0..cols).map(|j| a[i][j] * v[j]).sum())
            .collect();
        let mut u: Vec<f64> = (0..cols)
            .map(|j| (0..rows).map(|i| a[i][j] * w[i]).sum())
            .collect();
        let nu = norm(&u);
        if nu == 0.0 {
            return 0.0;
        }
        u.iter_mut().for_each(|x| *x /= nu);
        let new_sigma = nu.sqrt();
        if (new_sigma - sigma).abs() <= 1e-14 * new_sigma.max(1.0) {
            return new_sigma;
        }
        sigma = new_sigma;
        v = u;
    }
    sigma
}
