//! Closure-backed pairs (A, u) with exact or high-order finite-difference
//! derivatives, parabolic rescaling, self-similar extensions of profiles,
//! radial gauge by ray transport and analytic gauge transformations.
//!
//! Analytic pairs are the reference objects: lattice data is produced by
//! sampling them, and identities that hold pointwise are checked on them
//! directly, away from any grid.

use std::sync::Arc;

use nalgebra::DMatrix;

use super::{FieldError, Model, Potential};
use crate::algebra::{group_exp, StructureData};

/// Closure (x, t) -> component vector.
pub type VecFn2 = Arc<dyn Fn(&[f64], f64) -> Vec<f64>>;
/// Closure (x, t, i) -> component vector.
pub type VecFn3 = Arc<dyn Fn(&[f64], f64, usize) -> Vec<f64>>;
/// Closure (x, t, k, i) -> component vector (derivative direction k first).
pub type VecFn4 = Arc<dyn Fn(&[f64], f64, usize, usize) -> Vec<f64>>;

/// 6th-order central difference of a vector-valued function of one scalar,
/// evaluated at 0 with step h.
fn fd6<F: Fn(f64) -> Vec<f64>>(f: F, h: f64, len: usize) -> Vec<f64> {
    const C: [f64; 3] = [45.0, -9.0, 1.0];
    let mut out = vec![0.0; len];
    for (k, &ck) in C.iter().enumerate() {
        let s = (k + 1) as f64 * h;
        let fp = f(s);
        let fm = f(-s);
        for i in 0..len {
            out[i] += ck * (fp[i] - fm[i]);
        }
    }
    let inv = 1.0 / (60.0 * h);
    for v in &mut out {
        *v *= inv;
    }
    out
}

fn shifted(x: &[f64], k: usize, s: f64) -> Vec<f64> {
    let mut y = x.to_vec();
    y[k] += s;
    y
}

/// A pair (A, u) given by closures. Derivative closures are optional;
/// missing ones fall back to 6th-order central differences with step
/// `1e-3 * fd_scale`.
#[derive(Clone)]
pub struct AnalyticPair {
    pub n: usize,
    pub dim_g: usize,
    pub dim_v: usize,
    /// (x, t, i) -> coefficients of A_i.
    pub a: VecFn3,
    /// (x, t) -> coefficients of u.
    pub u: VecFn2,
    /// (x, t, k, i) -> d_k A_i.
    pub da: Option<VecFn4>,
    /// (x, t, i) -> d_t A_i.
    pub dta: Option<VecFn3>,
    /// (x, t, k) -> d_k u.
    pub du: Option<VecFn3>,
    /// (x, t) -> d_t u.
    pub dtu: Option<VecFn2>,
    /// Characteristic length scale for finite-difference fallbacks.
    pub fd_scale: f64,
}

impl AnalyticPair {
    /// The pair A = 0, u = 0.
    pub fn zero(n: usize, dim_g: usize, dim_v: usize) -> Self {
        let zg = vec![0.0; dim_g];
        let zv = vec![0.0; dim_v];
        let zg2 = zg.clone();
        let zv2 = zv.clone();
        Self {
            n,
            dim_g,
            dim_v,
            a: Arc::new(move |_, _, _| zg.clone()),
            u: Arc::new(move |_, _| zv.clone()),
            da: Some(Arc::new({
                let z = zg2.clone();
                move |_, _, _, _| z.clone()
            })),
            dta: Some(Arc::new({
                let z = zg2;
                move |_, _, _| z.clone()
            })),
            du: Some(Arc::new({
                let z = zv2.clone();
                move |_, _, _| z.clone()
            })),
            dtu: Some(Arc::new(move |_, _| zv2.clone())),
            fd_scale: 1.0,
        }
    }

    fn fd_step(&self) -> f64 {
        1e-3 * self.fd_scale
    }

    pub fn a_at(&self, x: &[f64], t: f64, i: usize) -> Vec<f64> {
        (self.a)(x, t, i)
    }

    pub fn u_at(&self, x: &[f64], t: f64) -> Vec<f64> {
        (self.u)(x, t)
    }

    /// d_k A_i.
    pub fn da_at(&self, x: &[f64], t: f64, k: usize, i: usize) -> Vec<f64> {
        if let Some(da) = &self.da {
            return da(x, t, k, i);
        }
        fd6(|s| (self.a)(&shifted(x, k, s), t, i), self.fd_step(), self.dim_g)
    }

    /// d_t A_i.
    pub fn dta_at(&self, x: &[f64], t: f64, i: usize) -> Vec<f64> {
        if let Some(dta) = &self.dta {
            return dta(x, t, i);
        }
        fd6(|s| (self.a)(x, t + s, i), self.fd_step(), self.dim_g)
    }

    /// d_k u.
    pub fn du_at(&self, x: &[f64], t: f64, k: usize) -> Vec<f64> {
        if let Some(du) = &self.du {
            return du(x, t, k);
        }
        fd6(|s| (self.u)(&shifted(x, k, s), t), self.fd_step(), self.dim_v)
    }

    /// d_t u.
    pub fn dtu_at(&self, x: &[f64], t: f64) -> Vec<f64> {
        if let Some(dtu) = &self.dtu {
            return dtu(x, t);
        }
        fd6(|s| (self.u)(x, t + s), self.fd_step(), self.dim_v)
    }

    /// Curvature component F_ij = d_i A_j - d_j A_i + [A_i, A_j].
    pub fn f_at(&self, model: &Model, x: &[f64], t: f64, i: usize, j: usize) -> Vec<f64> {
        let mut f = self.da_at(x, t, i, j);
        let dji = self.da_at(x, t, j, i);
        let ai = self.a_at(x, t, i);
        let aj = self.a_at(x, t, j);
        let mut br = vec![0.0; self.dim_g];
        model.algebra.bracket_into(&ai, &aj, &mut br);
        for c in 0..self.dim_g {
            f[c] += br[c] - dji[c];
        }
        f
    }

    /// Covariant derivative of u in direction k.
    pub fn grad_cov_u_at(&self, model: &Model, x: &[f64], t: f64, k: usize) -> Vec<f64> {
        let mut g = self.du_at(x, t, k);
        let ak = self.a_at(x, t, k);
        let uv = self.u_at(x, t);
        let mut act = vec![0.0; self.dim_v];
        model.rep.act_into(&ak, &uv, &mut act);
        for c in 0..self.dim_v {
            g[c] += act[c];
        }
        g
    }

    /// Pointwise energy density e(A, u).
    pub fn energy_at(&self, model: &Model, w: &Potential, x: &[f64], t: f64) -> f64 {
        let mut fsum = 0.0;
        for i in 0..self.n {
            for j in (i + 1)..self.n {
                let f = self.f_at(model, x, t, i, j);
                fsum += model.algebra.killing_inner_raw(&f, &f);
            }
        }
        let mut gsum = 0.0;
        for k in 0..self.n {
            let g = self.grad_cov_u_at(model, x, t, k);
            gsum += model.rep.inner_v(&g, &g);
        }
        let uv = self.u_at(x, t);
        let s = model.rep.inner_v(&uv, &uv);
        0.5 * (fsum + gsum) + w.w(s)
    }

    /// Residuals of the stationary equations at a point: the Killing norm
    /// of the largest component of sum_i grad_i F_ij - u (.) grad_j u over
    /// j, and the norm of sum_i grad_i^2 u - 2 W'(|u|^2) u.
    ///
    /// Second derivatives are taken by finite differences of the first-
    /// derivative evaluators, so the returned values carry an O(1e-10)
    /// numerical floor even on exact solutions.
    pub fn ymhe_residual_at(&self, model: &Model, w: &Potential, x: &[f64], t: f64) -> (f64, f64) {
        let dg = self.dim_g;
        let dv = self.dim_v;
        let h = self.fd_step();
        let mut ra = 0.0f64;
        for j in 0..self.n {
            let mut res = vec![0.0; dg];
            for i in 0..self.n {
                if i == j {
                    continue;
                }
                // grad_i F_ij = d_i F_ij + [A_i, F_ij]
                let dif = fd6(|s| self.f_at(model, &shifted(x, i, s), t, i, j), h, dg);
                let ai = self.a_at(x, t, i);
                let fij = self.f_at(model, x, t, i, j);
                let mut br = vec![0.0; dg];
                model.algebra.bracket_into(&ai, &fij, &mut br);
                for c in 0..dg {
                    res[c] += dif[c] + br[c];
                }
            }
            let uv = self.u_at(x, t);
            let gj = self.grad_cov_u_at(model, x, t, j);
            let mut od = vec![0.0; dg];
            model.rep.odot_into(&model.algebra, &uv, &gj, &mut od);
            for c in 0..dg {
                res[c] -= od[c];
            }
            ra = ra.max(model.algebra.killing_norm(&res));
        }
        let mut res_u = vec![0.0; dv];
        for i in 0..self.n {
            let dig = fd6(|s| self.grad_cov_u_at(model, &shifted(x, i, s), t, i), h, dv);
            let ai = self.a_at(x, t, i);
            let gi = self.grad_cov_u_at(model, x, t, i);
            let mut act = vec![0.0; dv];
            model.rep.act_into(&ai, &gi, &mut act);
            for c in 0..dv {
                res_u[c] += dig[c] + act[c];
            }
        }
        let uv = self.u_at(x, t);
        let s = model.rep.inner_v(&uv, &uv);
        let wp = 2.0 * w.w_prime(s);
        for c in 0..dv {
            res_u[c] -= wp * uv[c];
        }
        (ra, model.rep.norm_v(&res_u))
    }
}

/// Parabolic rescaling about (x0, t0):
/// A_r(x, t) = r A(x0 + r x, t0 + r^2 t), u_r(x, t) = r u(x0 + r x, t0 + r^2 t).
pub fn rescale_pair(
    pair: &AnalyticPair,
    r: f64,
    x0: &[f64],
    t0: f64,
) -> Result<AnalyticPair, FieldError> {
    if !(r > 0.0) {
        return Err(FieldError::BadRescaleFactor(r));
    }
    assert_eq!(x0.len(), pair.n);
    let map = {
        let x0 = x0.to_vec();
        move |x: &[f64], t: f64| -> (Vec<f64>, f64) {
            let y: Vec<f64> = x.iter().zip(&x0).map(|(xi, ci)| ci + r * xi).collect();
            (y, t0 + r * r * t)
        }
    };
    fn scale(v: &mut [f64], s: f64) {
        for c in v.iter_mut() {
            *c *= s;
        }
    }

    let a = {
        let p = pair.a.clone();
        let map = map.clone();
        Arc::new(move |x: &[f64], t: f64, i: usize| {
            let (y, s) = map(x, t);
            let mut v = p(&y, s, i);
            scale(&mut v, r);
            v
        }) as VecFn3
    };
    let u = {
        let p = pair.u.clone();
        let map = map.clone();
        Arc::new(move |x: &[f64], t: f64| {
            let (y, s) = map(x, t);
            let mut v = p(&y, s);
            scale(&mut v, r);
            v
        }) as VecFn2
    };
    let da = pair.da.clone().map(|p| {
        let map = map.clone();
        Arc::new(move |x: &[f64], t: f64, k: usize, i: usize| {
            let (y, s) = map(x, t);
            let mut v = p(&y, s, k, i);
            scale(&mut v, r * r);
            v
        }) as VecFn4
    });
    let dta = pair.dta.clone().map(|p| {
        let map = map.clone();
        Arc::new(move |x: &[f64], t: f64, i: usize| {
            let (y, s) = map(x, t);
            let mut v = p(&y, s, i);
            scale(&mut v, r * r * r);
            v
        }) as VecFn3
    });
    let du = pair.du.clone().map(|p| {
        let map = map.clone();
        Arc::new(move |x: &[f64], t: f64, k: usize| {
            let (y, s) = map(x, t);
            let mut v = p(&y, s, k);
            scale(&mut v, r * r);
            v
        }) as VecFn3
    });
    let dtu = pair.dtu.clone().map(|p| {
        let map = map.clone();
        Arc::new(move |x: &[f64], t: f64| {
            let (y, s) = map(x, t);
            let mut v = p(&y, s);
            scale(&mut v, r * r * r);
            v
        }) as VecFn2
    });
    Ok(AnalyticPair {
        n: pair.n,
        dim_g: pair.dim_g,
        dim_v: pair.dim_v,
        a,
        u,
        da,
        dta,
        du,
        dtu,
        fd_scale: pair.fd_scale / r,
    })
}

/// A static connection profile B on R^n, possibly the output of a radial
/// gauge transformation. Derivatives fall back to 6th-order differences.
#[derive(Clone)]
pub struct GaugedProfile {
    pub n: usize,
    pub dim_g: usize,
    /// (y, i) -> coefficients of B_i.
    pub b: Arc<dyn Fn(&[f64], usize) -> Vec<f64>>,
    /// (y, k, i) -> d_k B_i.
    pub db: Option<Arc<dyn Fn(&[f64], usize, usize) -> Vec<f64>>>,
    pub fd_scale: f64,
}

impl GaugedProfile {
    pub fn b_at(&self, y: &[f64], i: usize) -> Vec<f64> {
        (self.b)(y, i)
    }

    pub fn db_at(&self, y: &[f64], k: usize, i: usize) -> Vec<f64> {
        if let Some(db) = &self.db {
            return db(y, k, i);
        }
        fd6(|s| (self.b)(&shifted(y, k, s), i), 1e-3 * self.fd_scale, self.dim_g)
    }

    /// Curvature of the profile, G_ij = d_i B_j - d_j B_i + [B_i, B_j].
    pub fn f_at(&self, sd: &StructureData, y: &[f64], i: usize, j: usize) -> Vec<f64> {
        let mut g = self.db_at(y, i, j);
        let dji = self.db_at(y, j, i);
        let bi = self.b_at(y, i);
        let bj = self.b_at(y, j);
        let mut br = vec![0.0; self.dim_g];
        sd.bracket_into(&bi, &bj, &mut br);
        for c in 0..self.dim_g {
            g[c] += br[c] - dji[c];
        }
        g
    }

    /// Max-norm of the radial contraction sum_i y_i B_i(y).
    pub fn radial_residual(&self, sd: &StructureData, y: &[f64]) -> f64 {
        let mut acc = vec![0.0; self.dim_g];
        for i in 0..self.n {
            let bi = self.b_at(y, i);
            for c in 0..self.dim_g {
                acc[c] += y[i] * bi[c];
            }
        }
        sd.killing_norm(&acc)
    }
}

/// Gaussian bump profile already in radial gauge, for a 3-dimensional
/// algebra: B_i^c(y) = amp e^{-|y|^2/2} sum_k T^c_{ki} y_k with a
/// coefficient tensor T antisymmetric in (k, i), so sum_i y_i B_i = 0
/// identically. Exact derivative closures are attached.
pub fn radial_bump_profile(n: usize, amp: f64) -> GaugedProfile {
    let b = Arc::new(move |y: &[f64], i: usize| {
        let r2: f64 = y.iter().map(|v| v * v).sum();
        let phi = amp * (-0.5 * r2).exp();
        let mut v = vec![0.0; 3];
        for (k, yk) in y.iter().enumerate() {
            let sign = if k < i {
                1.0
            } else if k > i {
                -1.0
            } else {
                continue;
            };
            v[(k + i) % 3] += sign * phi * yk;
        }
        v
    }) as Arc<dyn Fn(&[f64], usize) -> Vec<f64>>;
    let db = Arc::new(move |y: &[f64], m: usize, i: usize| {
        let r2: f64 = y.iter().map(|v| v * v).sum();
        let phi = amp * (-0.5 * r2).exp();
        let mut v = vec![0.0; 3];
        for (k, yk) in y.iter().enumerate() {
            let sign = if k < i {
                1.0
            } else if k > i {
                -1.0
            } else {
                continue;
            };
            // d_m [phi y_k] = phi (delta_mk - y_m y_k)
            let dmk = if m == k { 1.0 } else { 0.0 };
            v[(k + i) % 3] += sign * phi * (dmk - y[m] * yk);
        }
        v
    }) as Arc<dyn Fn(&[f64], usize, usize) -> Vec<f64>>;
    GaugedProfile { n, dim_g: 3, b, db: Some(db), fd_scale: 1.0 }
}

/// Self-similar extension of a static profile about (x0, t_center):
/// A_i(x, t) = s^{-1/2} B_i(y) with s = t_center - t, y = (x - x0) / sqrt(s),
/// and u = 0. Closures panic when evaluated at t >= t_center.
pub fn make_self_similar(
    profile: &GaugedProfile,
    x0: &[f64],
    t_center: f64,
    dim_v: usize,
) -> AnalyticPair {
    assert_eq!(x0.len(), profile.n);
    let n = profile.n;
    let dim_g = profile.dim_g;
    let to_y = {
        let x0 = x0.to_vec();
        move |x: &[f64], t: f64| -> (Vec<f64>, f64) {
            assert!(
                t < t_center,
                "self-similar pair evaluated at t = {t} >= t_center = {t_center}"
            );
            let s = t_center - t;
            let rs = s.sqrt();
            let y: Vec<f64> = x.iter().zip(&x0).map(|(xi, ci)| (xi - ci) / rs).collect();
            (y, s)
        }
    };
    let a = {
        let p = profile.clone();
        let to_y = to_y.clone();
        Arc::new(move |x: &[f64], t: f64, i: usize| {
            let (y, s) = to_y(x, t);
            let mut v = p.b_at(&y, i);
            let sc = 1.0 / s.sqrt();
            for c in v.iter_mut() {
                *c *= sc;
            }
            v
        }) as VecFn3
    };
    let da = {
        let p = profile.clone();
        let to_y = to_y.clone();
        Arc::new(move |x: &[f64], t: f64, k: usize, i: usize| {
            let (y, s) = to_y(x, t);
            let mut v = p.db_at(&y, k, i);
            let sc = 1.0 / s;
            for c in v.iter_mut() {
                *c *= sc;
            }
            v
        }) as VecFn4
    };
    let dta = {
        let p = profile.clone();
        let to_y = to_y.clone();
        Arc::new(move |x: &[f64], t: f64, i: usize| {
            let (y, s) = to_y(x, t);
            // d_t [s^{-1/2} B(y)] = s^{-3/2} (B/2 + sum_k y_k d_k B / 2)
            let mut v = p.b_at(&y, i);
            for k in 0..y.len() {
                let dk = p.db_at(&y, k, i);
                for c in 0..v.len() {
                    v[c] += y[k] * dk[c];
                }
            }
            let sc = 0.5 / (s * s.sqrt());
            for c in v.iter_mut() {
                *c *= sc;
            }
            v
        }) as VecFn3
    };
    let zv = vec![0.0; dim_v];
    let zv2 = zv.clone();
    let zv3 = zv.clone();
    AnalyticPair {
        n,
        dim_g,
        dim_v,
        a,
        u: Arc::new(move |_, _| zv.clone()),
        da: Some(da),
        dta: Some(dta),
        du: Some(Arc::new(move |_, _, _| zv2.clone())),
        dtu: Some(Arc::new(move |_, _| zv3.clone())),
        fd_scale: profile.fd_scale,
    }
}

/// Transport state along the ray lambda -> lambda * y: the adjoint matrix
/// of the gauge transformation and the accumulating radial-gauge field.
fn ray_transport(
    sd: &StructureData,
    profile: &GaugedProfile,
    y: &[f64],
    steps: usize,
) -> Result<(DMatrix<f64>, Vec<Vec<f64>>), FieldError> {
    let n = profile.n;
    let dg = profile.dim_g;
    let ad_of = |v: &[f64]| -> DMatrix<f64> {
        let mut m = DMatrix::zeros(dg, dg);
        for (a, &va) in v.iter().enumerate() {
            if va != 0.0 {
                m += sd.ad_matrix(a) * va;
            }
        }
        m
    };
    let radial = |lambda: f64| -> Vec<f64> {
        let p: Vec<f64> = y.iter().map(|c| lambda * c).collect();
        let mut acc = vec![0.0; dg];
        for i in 0..n {
            let bi = profile.b_at(&p, i);
            for c in 0..dg {
                acc[c] += y[i] * bi[c];
            }
        }
        acc
    };
    // integrand of the radial-gauge reconstruction, given the transported
    // adjoint matrix at lambda
    let integrand = |lambda: f64, o: &DMatrix<f64>| -> Vec<Vec<f64>> {
        let p: Vec<f64> = y.iter().map(|c| lambda * c).collect();
        let mut out = vec![vec![0.0; dg]; n];
        for i in 0..n {
            let mut contracted = vec![0.0; dg];
            for k in 0..n {
                if k == i || y[k] == 0.0 {
                    continue;
                }
                let f = profile.f_at(sd, &p, k, i);
                for c in 0..dg {
                    contracted[c] += y[k] * f[c];
                }
            }
            for r in 0..dg {
                let mut s = 0.0;
                for c in 0..dg {
                    s += o[(r, c)] * contracted[c];
                }
                out[i][r] = lambda * s;
            }
        }
        out
    };
    // RK4 on the coupled system O' = O ad(a), acc_i' = integrand_i(lambda, O)
    let mut o = DMatrix::identity(dg, dg);
    let mut acc = vec![vec![0.0; dg]; n];
    let hstep = 1.0 / steps as f64;
    for s in 0..steps {
        let l0 = s as f64 * hstep;
        let k1o = &o * ad_of(&radial(l0));
        let k1a = integrand(l0, &o);
        let o2 = &o + &k1o * (0.5 * hstep);
        let k2o = &o2 * ad_of(&radial(l0 + 0.5 * hstep));
        let k2a = integrand(l0 + 0.5 * hstep, &o2);
        let o3 = &o + &k2o * (0.5 * hstep);
        let k3o = &o3 * ad_of(&radial(l0 + 0.5 * hstep));
        let k3a = integrand(l0 + 0.5 * hstep, &o3);
        let o4 = &o + &k3o * hstep;
        let k4o = &o4 * ad_of(&radial(l0 + hstep));
        let k4a = integrand(l0 + hstep, &o4);
        o += (k1o + k2o * 2.0 + k3o * 2.0 + k4o) * (hstep / 6.0);
        for i in 0..n {
            for c in 0..dg {
                acc[i][c] +=
                    hstep / 6.0 * (k1a[i][c] + 2.0 * k2a[i][c] + 2.0 * k3a[i][c] + k4a[i][c]);
            }
        }
        if !o[(0, 0)].is_finite() {
            return Err(FieldError::RayIntegration(format!(
                "transport diverged at lambda = {}",
                l0 + hstep
            )));
        }
    }
    Ok((o, acc))
}

/// Radial gauge of a profile: returns an equivalent profile B' with
/// sum_i y_i B'_i(y) = 0, built by transporting the curvature along rays
/// from the origin (`steps` RK4 steps per ray) and applying the radial
/// reconstruction B'_i(y) = int_0^1 lambda y^k F'_ki(lambda y) d lambda.
///
/// The `adjoint` closure returns the adjoint matrix O(y) of the gauge
/// transformation at y, so curvature transforms as F' = O F.
pub fn radial_gauge(
    sd: &StructureData,
    profile: &GaugedProfile,
    steps: usize,
) -> Result<(GaugedProfile, Arc<dyn Fn(&[f64]) -> DMatrix<f64>>), FieldError> {
    assert!(steps >= 2);
    let n = profile.n;
    let dg = profile.dim_g;
    // probe the transport once near the origin so configuration errors
    // surface eagerly rather than inside a closure
    ray_transport(sd, profile, &vec![1e-3; n], steps.min(4))?;
    let b = {
        let sd = sd.clone();
        let profile = profile.clone();
        Arc::new(move |y: &[f64], i: usize| {
            let (_, acc) = ray_transport(&sd, &profile, y, steps)
                .expect("ray transport failed after successful probe");
            acc[i].clone()
        }) as Arc<dyn Fn(&[f64], usize) -> Vec<f64>>
    };
    let adjoint = {
        let sd = sd.clone();
        let profile = profile.clone();
        Arc::new(move |y: &[f64]| {
            let (o, _) = ray_transport(&sd, &profile, y, steps)
                .expect("ray transport failed after successful probe");
            o
        }) as Arc<dyn Fn(&[f64]) -> DMatrix<f64>>
    };
    Ok((
        GaugedProfile { n, dim_g: dg, b, db: None, fd_scale: profile.fd_scale },
        adjoint,
    ))
}

/// A gauge transformation g = exp(chi) given by closures for chi and,
/// optionally, its spatial derivatives.
#[derive(Clone)]
pub struct AnalyticGauge {
    /// (x, t) -> coefficients of chi.
    pub chi: VecFn2,
    /// (x, t, k) -> d_k chi.
    pub dchi: Option<VecFn3>,
    pub fd_scale: f64,
}

impl AnalyticGauge {
    pub fn dchi_at(&self, x: &[f64], t: f64, k: usize, dim_g: usize) -> Vec<f64> {
        if let Some(dchi) = &self.dchi {
            return dchi(x, t, k);
        }
        fd6(|s| (self.chi)(&shifted(x, k, s), t), 1e-3 * self.fd_scale, dim_g)
    }
}

/// Apply the derivative-of-exponential series:
/// (d e^chi) e^{-chi} corresponds to sum_k ad_chi^k(w) / (k+1)! with
/// w the derivative of chi.
fn dexp_apply(sd: &StructureData, chi: &[f64], w: &[f64]) -> Vec<f64> {
    let dg = chi.len();
    // term_k = ad_chi^k(w) / (k+1)!; term_0 = w
    let mut term = w.to_vec();
    let mut out = w.to_vec();
    let mut br = vec![0.0; dg];
    for k in 1..64usize {
        sd.bracket_into(chi, &term, &mut br);
        let fac = 1.0 / (k as f64 + 1.0);
        let mut max = 0.0f64;
        for c in 0..dg {
            term[c] = br[c] * fac;
            out[c] += term[c];
            max = max.max(term[c].abs());
        }
        if max < 1e-17 {
            break;
        }
    }
    out
}

/// Gauge-transform an analytic pair by g = exp(chi):
/// A'_i = Ad_g A_i - (d_i g) g^{-1}, u' = rho(g) u.
pub fn gauge_transform_analytic(
    model: &Model,
    gauge: &AnalyticGauge,
    pair: &AnalyticPair,
) -> AnalyticPair {
    let dg = pair.dim_g;
    let a = {
        let model = model.clone();
        let gauge = gauge.clone();
        let pair = pair.clone();
        Arc::new(move |x: &[f64], t: f64, i: usize| {
            let chi = (gauge.chi)(x, t);
            let ge = group_exp(&model.algebra, &model.rep, &chi);
            let ai = pair.a_at(x, t, i);
            let w = gauge.dchi_at(x, t, i, dg);
            let z = dexp_apply(&model.algebra, &chi, &w);
            let mut out = vec![0.0; dg];
            for r in 0..dg {
                let mut s = 0.0;
                for c in 0..dg {
                    s += ge.adjoint[(r, c)] * ai[c];
                }
                out[r] = s - z[r];
            }
            out
        }) as VecFn3
    };
    let u = {
        let model = model.clone();
        let gauge = gauge.clone();
        let pair = pair.clone();
        Arc::new(move |x: &[f64], t: f64| {
            let chi = (gauge.chi)(x, t);
            let ge = group_exp(&model.algebra, &model.rep, &chi);
            let uv = pair.u_at(x, t);
            let dv = uv.len();
            let mut out = vec![0.0; dv];
            for r in 0..dv {
                let mut s = 0.0;
                for c in 0..dv {
                    s += ge.matrix[(r, c)] * uv[c];
                }
                out[r] = s;
            }
            out
        }) as VecFn2
    };
    AnalyticPair {
        n: pair.n,
        dim_g: pair.dim_g,
        dim_v: pair.dim_v,
        a,
        u,
        da: None,
        dta: None,
        du: None,
        dtu: None,
        fd_scale: pair.fd_scale.min(gauge.fd_scale),
    }
}

/// The pure-gauge pair obtained by transforming (A, u) = (0, 0); its
/// curvature and energy vanish identically.
pub fn pure_gauge_pair(model: &Model, gauge: &AnalyticGauge, n: usize) -> AnalyticPair {
    let zero = AnalyticPair::zero(n, model.dim_g(), model.dim_v());
    gauge_transform_analytic(model, gauge, &zero)
}
