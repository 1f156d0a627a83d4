//! Small numerical utilities shared across modules: low-discrepancy
//! sequences, adaptive 1-d quadrature, n-ball volumes and smooth bumps.

/// First few primes, used as Halton bases.
const PRIMES: [u64; 16] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53];

/// Radical-inverse of `index` in base `base`, in [0, 1).
pub fn radical_inverse(base: u64, mut index: u64) -> f64 {
    let inv = 1.0 / base as f64;
    let mut f = inv;
    let mut x = 0.0;
    while index > 0 {
        x += (index % base) as f64 * f;
        index /= base;
        f *= inv;
    }
    x
}

/// Deterministic Halton point generator in the unit cube [0,1)^dim.
pub struct Halton {
    dim: usize,
    index: u64,
}

impl Halton {
    /// Start the sequence at `offset` (offsets make subsequences disjoint).
    pub fn new(dim: usize, offset: u64) -> Self {
        assert!(dim <= PRIMES.len(), "Halton dimension too large");
        // index 0 maps to the origin; skip it.
        Self { dim, index: offset + 1 }
    }

    /// Write the next point into `out`.
    pub fn next_point(&mut self, out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.dim);
        for (d, slot) in out.iter_mut().enumerate() {
            *slot = radical_inverse(PRIMES[d], self.index);
        }
        self.index += 1;
    }
}

/// Volume of the unit n-ball.
pub fn unit_ball_volume(n: usize) -> f64 {
    // v_0 = 1, v_1 = 2, v_n = 2 pi / n * v_{n-2}
    let mut v = if n % 2 == 0 { 1.0 } else { 2.0 };
    let mut k = if n % 2 == 0 { 2 } else { 3 };
    while k <= n {
        v *= 2.0 * std::f64::consts::PI / k as f64;
        k += 2;
    }
    v
}

/// Volume of the n-ball of radius `r`.
pub fn ball_volume(n: usize, r: f64) -> f64 {
    unit_ball_volume(n) * r.powi(n as i32)
}

/// Surface area of the sphere of radius `r` in R^n.
pub fn sphere_area(n: usize, r: f64) -> f64 {
    n as f64 * unit_ball_volume(n) * r.powi(n as i32 - 1)
}

/// Adaptive Simpson quadrature of `f` on [a, b] to absolute tolerance `tol`.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    simpson_rec(f, a, b, fa, fm, fb, simpson_rule(a, b, fa, fm, fb), tol, 28)
}

fn simpson_rule(a: f64, b: f64, fa: f64, fm: f64, fb: f64) -> f64 {
    (b - a) / 6.0 * (fa + 4.0 * fm + fb)
}

#[allow(clippy::too_many_arguments)]
fn simpson_rec<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = simpson_rule(a, m, fa, flm, fm);
    let right = simpson_rule(m, b, fm, frm, fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        left + right + delta / 15.0
    } else {
        simpson_rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
            + simpson_rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
    }
}

/// Smooth bump on [0, 1): chi(s) = exp(1 - 1/(1-s)) for s < 1, else 0.
/// chi(0) = 1 and all derivatives vanish as s -> 1.
pub fn bump_chi(s: f64) -> f64 {
    if s >= 1.0 {
        0.0
    } else {
        (1.0 - 1.0 / (1.0 - s)).exp()
    }
}

/// Derivative of [`bump_chi`].
pub fn bump_chi_prime(s: f64) -> f64 {
    if s >= 1.0 {
        0.0
    } else {
        let d = 1.0 - s;
        -bump_chi(s) / (d * d)
    }
}

/// Dense grid maximization of `f` on [a, b] followed by golden-section
/// refinement around the best node. Returns (argmax, max).
pub fn maximize_1d<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, coarse: usize) -> (f64, f64) {
    let mut best_x = a;
    let mut best = f64::NEG_INFINITY;
    for i in 0..=coarse {
        let x = a + (b - a) * i as f64 / coarse as f64;
        let v = f(x);
        if v > best {
            best = v;
            best_x = x;
        }
    }
    let step = (b - a) / coarse as f64;
    let (mut lo, mut hi) = ((best_x - step).max(a), (best_x + step).min(b));
    let phi = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = hi - phi * (hi - lo);
    let mut x2 = lo + phi * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    for _ in 0..90 {
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + phi * (hi - lo);
            f2 = f(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - phi * (hi - lo);
            f1 = f(x1);
        }
    }
    let x = 0.5 * (lo + hi);
    (x, f(x))
}

/// Deterministic set of `count` unit directions in R^n.
///
/// Directions come from Halton points pushed through Box-Muller and
/// normalized; good enough for sphere averages of smooth functions.
pub fn sphere_directions(n: usize, count: usize, offset: u64) -> Vec<Vec<f64>> {
    let pairs = n.div_ceil(2);
    let mut halton = Halton::new(2 * pairs, offset);
    let mut point = vec![0.0; 2 * pairs];
    let mut dirs = Vec::with_capacity(count);
    while dirs.len() < count {
        halton.next_point(&mut point);
        let mut v = Vec::with_capacity(n);
        for p in 0..pairs {
            let u1 = point[2 * p].max(1e-16);
            let u2 = point[2 * p + 1];
            let rad = (-2.0 * u1.ln()).sqrt();
            let ang = 2.0 * std::f64::consts::PI * u2;
            v.push(rad * ang.cos());
            if v.len() < n {
                v.push(rad * ang.sin());
            }
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-12 {
            for x in &mut v {
                *x /= norm;
            }
            dirs.push(v);
        }
    }
    dirs
}

/// Max-norm of a slice.
pub fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}
