//! Periodic n-dimensional lattice fields and the gauge-covariant
//! finite-difference calculus used by the flow integrator.
//!
//! All spatial derivatives are 2nd-order central differences; the lattice
//! is a flat torus of side N*h. Layout is site-major, last axis fastest.

use super::{FieldError, Model, Potential};
use crate::fields::analytic::AnalyticPair;

/// Flat periodic lattice in n >= 5 dimensions.
#[derive(Debug, Clone, PartialEq)]
pub struct LatticeGeometry {
    pub n: usize,
    pub npts: usize,
    pub h: f64,
    pub origin: Vec<f64>,
}

impl LatticeGeometry {
    pub fn new(n: usize, npts: usize, h: f64, origin: Vec<f64>) -> Result<Self, FieldError> {
        if n < 5 {
            return Err(FieldError::InvalidGeometry(format!("n must be >= 5, got {n}")));
        }
        if npts < 8 {
            return Err(FieldError::InvalidGeometry(format!("N must be >= 8, got {npts}")));
        }
        if !(h > 0.0) {
            return Err(FieldError::InvalidGeometry(format!("h must be positive, got {h}")));
        }
        if origin.len() != n {
            return Err(FieldError::InvalidGeometry("origin length != n".into()));
        }
        Ok(Self { n, npts, h, origin })
    }

    /// Physical side length L = N h.
    pub fn side_length(&self) -> f64 {
        self.npts as f64 * self.h
    }

    pub fn site_count(&self) -> usize {
        self.npts.pow(self.n as u32)
    }

    /// Row-major strides, last axis fastest.
    pub fn strides(&self) -> Vec<usize> {
        let mut s = vec![1usize; self.n];
        for d in (0..self.n - 1).rev() {
            s[d] = s[d + 1] * self.npts;
        }
        s
    }

    /// Centre of the torus.
    pub fn center(&self) -> Vec<f64> {
        let half = 0.5 * self.side_length();
        self.origin.iter().map(|o| o + half).collect()
    }

    /// Physical coordinates of a multi-index.
    pub fn coords_of(&self, mi: &[usize], out: &mut [f64]) {
        for d in 0..self.n {
            out[d] = self.origin[d] + mi[d] as f64 * self.h;
        }
    }

    /// Visit every site in layout order with its multi-index.
    pub fn for_each_site<F: FnMut(usize, &[usize])>(&self, mut f: F) {
        let mut mi = vec![0usize; self.n];
        let count = self.site_count();
        for site in 0..count {
            f(site, &mi);
            for d in (0..self.n).rev() {
                mi[d] += 1;
                if mi[d] < self.npts {
                    break;
                }
                mi[d] = 0;
            }
        }
    }

    /// Periodic neighbor of `site` along `axis`; `mi` is the site's
    /// multi-index and `strides` the cached stride table.
    #[inline]
    pub fn neighbor(&self, site: usize, mi: &[usize], strides: &[usize], axis: usize, up: bool) -> usize {
        let s = strides[axis];
        if up {
            if mi[axis] + 1 < self.npts {
                site + s
            } else {
                site + s - s * self.npts
            }
        } else if mi[axis] > 0 {
            site - s
        } else {
            site + s * self.npts - s
        }
    }
}

/// A lattice function with `comps` real components per site.
#[derive(Debug, Clone, PartialEq)]
pub struct LatticeField {
    pub geom: LatticeGeometry,
    pub comps: usize,
    pub data: Vec<f64>,
}

impl LatticeField {
    pub fn zeros(geom: &LatticeGeometry, comps: usize) -> Self {
        Self { geom: geom.clone(), comps, data: vec![0.0; geom.site_count() * comps] }
    }

    #[inline]
    pub fn site(&self, s: usize) -> &[f64] {
        &self.data[s * self.comps..(s + 1) * self.comps]
    }

    #[inline]
    pub fn site_mut(&mut self, s: usize) -> &mut [f64] {
        &mut self.data[s * self.comps..(s + 1) * self.comps]
    }

    pub fn max_abs(&self) -> f64 {
        crate::util::max_abs(&self.data)
    }
}

/// Gauge field: n algebra-valued components per site; component index
/// is `i * dim_g + a`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaugeField {
    pub field: LatticeField,
    pub dim_g: usize,
}

impl GaugeField {
    pub fn zeros(geom: &LatticeGeometry, dim_g: usize) -> Self {
        Self { field: LatticeField::zeros(geom, geom.n * dim_g), dim_g }
    }

    pub fn geom(&self) -> &LatticeGeometry {
        &self.field.geom
    }

    /// Coefficients of A_i at a site.
    #[inline]
    pub fn comp(&self, site: usize, i: usize) -> &[f64] {
        let base = site * self.field.comps + i * self.dim_g;
        &self.field.data[base..base + self.dim_g]
    }
}

/// Scalar field with values in V.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarFieldV {
    pub field: LatticeField,
}

impl ScalarFieldV {
    pub fn zeros(geom: &LatticeGeometry, dim_v: usize) -> Self {
        Self { field: LatticeField::zeros(geom, dim_v) }
    }

    pub fn geom(&self) -> &LatticeGeometry {
        &self.field.geom
    }

    pub fn dim_v(&self) -> usize {
        self.field.comps
    }
}

/// Curvature two-form; stored for ordered pairs i < j only, component
/// index is `pair_index(i,j) * dim_g + a`. Access with i > j yields the
/// negative by the antisymmetry contract.
#[derive(Debug, Clone)]
pub struct CurvatureField {
    pub field: LatticeField,
    pub dim_g: usize,
    pub n: usize,
}

impl CurvatureField {
    pub fn zeros(geom: &LatticeGeometry, dim_g: usize) -> Self {
        let pairs = geom.n * (geom.n - 1) / 2;
        Self { field: LatticeField::zeros(geom, pairs * dim_g), dim_g, n: geom.n }
    }

    /// Index of the ordered pair (i, j), i < j, in the stored pair list.
    #[inline]
    pub fn pair_index(n: usize, i: usize, j: usize) -> usize {
        debug_assert!(i < j && j < n);
        i * n - i * (i + 1) / 2 + (j - i - 1)
    }

    /// Raw slice for ordered pair i < j at a site.
    #[inline]
    pub fn pair(&self, site: usize, i: usize, j: usize) -> &[f64] {
        let p = Self::pair_index(self.n, i, j);
        let base = site * self.field.comps + p * self.dim_g;
        &self.field.data[base..base + self.dim_g]
    }

    /// F_ij at a site for any i != j, writing into `out` (sign handled).
    #[inline]
    pub fn get(&self, site: usize, i: usize, j: usize, out: &mut [f64]) {
        if i < j {
            out[..self.dim_g].copy_from_slice(self.pair(site, i, j));
        } else {
            let src = self.pair(site, j, i);
            for (o, s) in out.iter_mut().zip(src) {
                *o = -s;
            }
        }
    }
}

fn check_same_geom(a: &LatticeGeometry, b: &LatticeGeometry) -> Result<(), FieldError> {
    if a == b {
        Ok(())
    } else {
        Err(FieldError::GeometryMismatch)
    }
}

/// Gauge-covariant derivative of an algebra-valued lattice function:
/// central difference plus the bracket with A_i.
pub fn grad_cov_g(
    model: &Model,
    a: &GaugeField,
    x: &LatticeField,
    axis: usize,
) -> Result<LatticeField, FieldError> {
    check_same_geom(a.geom(), &x.geom)?;
    let geom = &x.geom;
    let dg = model.dim_g();
    assert_eq!(x.comps, dg);
    let strides = geom.strides();
    let inv2h = 0.5 / geom.h;
    let mut out = LatticeField::zeros(geom, dg);
    let mut br = vec![0.0; dg];
    geom.for_each_site(|site, mi| {
        let up = geom.neighbor(site, mi, &strides, axis, true);
        let dn = geom.neighbor(site, mi, &strides, axis, false);
        model.algebra.bracket_into(a.comp(site, axis), x.site(site), &mut br);
        let xu = x.site(up);
        let xd = x.site(dn);
        let o = out.site_mut(site);
        for c in 0..dg {
            o[c] = (xu[c] - xd[c]) * inv2h + br[c];
        }
    });
    Ok(out)
}

/// Gauge-covariant derivative of a V-valued lattice function.
pub fn grad_cov_v(
    model: &Model,
    a: &GaugeField,
    u: &ScalarFieldV,
    axis: usize,
) -> Result<ScalarFieldV, FieldError> {
    check_same_geom(a.geom(), u.geom())?;
    let geom = u.geom().clone();
    let dv = u.dim_v();
    let strides = geom.strides();
    let inv2h = 0.5 / geom.h;
    let mut out = ScalarFieldV::zeros(&geom, dv);
    let mut act = vec![0.0; dv];
    geom.for_each_site(|site, mi| {
        let up = geom.neighbor(site, mi, &strides, axis, true);
        let dn = geom.neighbor(site, mi, &strides, axis, false);
        model.rep.act_into(a.comp(site, axis), u.field.site(site), &mut act);
        let uu = u.field.site(up);
        let ud = u.field.site(dn);
        let o = out.field.site_mut(site);
        for c in 0..dv {
            o[c] = (uu[c] - ud[c]) * inv2h + act[c];
        }
    });
    Ok(out)
}

/// Curvature F_ij = D_i A_j - D_j A_i + [A_i, A_j] for i < j.
pub fn curvature(model: &Model, a: &GaugeField) -> CurvatureField {
    let geom = a.geom().clone();
    let dg = a.dim_g;
    let strides = geom.strides();
    let inv2h = 0.5 / geom.h;
    let mut f = CurvatureField::zeros(&geom, dg);
    let pairs: Vec<(usize, usize)> = (0..geom.n)
        .flat_map(|i| ((i + 1)..geom.n).map(move |j| (i, j)))
        .collect();
    let comps = f.field.comps;
    let mut br = vec![0.0; dg];
    geom.for_each_site(|site, mi| {
        for (p, &(i, j)) in pairs.iter().enumerate() {
            let iu = geom.neighbor(site, mi, &strides, i, true);
            let id = geom.neighbor(site, mi, &strides, i, false);
            let ju = geom.neighbor(site, mi, &strides, j, true);
            let jd = geom.neighbor(site, mi, &strides, j, false);
            model.algebra.bracket_into(a.comp(site, i), a.comp(site, j), &mut br);
            let aju = a.comp(iu, j);
            let ajd = a.comp(id, j);
            let aiu = a.comp(ju, i);
            let aid = a.comp(jd, i);
            let base = site * comps + p * dg;
            for c in 0..dg {
                f.field.data[base + c] =
                    (aju[c] - ajd[c]) * inv2h - (aiu[c] - aid[c]) * inv2h + br[c];
            }
        }
    });
    f
}

/// Max over sites and ordered triples i < j < k of the Killing norm of
/// the cyclic sum of covariant derivatives of F.
pub fn bianchi_residual(model: &Model, a: &GaugeField) -> f64 {
    let geom = a.geom().clone();
    let dg = a.dim_g;
    let f = curvature(model, a);
    let strides = geom.strides();
    let inv2h = 0.5 / geom.h;
    let mut worst = 0.0f64;
    let triples: Vec<(usize, usize, usize)> = (0..geom.n)
        .flat_map(|i| {
            ((i + 1)..geom.n)
                .flat_map(move |j| ((j + 1)..geom.n).map(move |k| (i, j, k)))
        })
        .collect();
    let mut acc = vec![0.0; dg];
    let mut fu = vec![0.0; dg];
    let mut fd = vec![0.0; dg];
    let mut fc = vec![0.0; dg];
    let mut br = vec![0.0; dg];
    geom.for_each_site(|site, mi| {
        for &(i, j, k) in &triples {
            acc.fill(0.0);
            // cyclic: grad_i F_jk + grad_j F_ki + grad_k F_ij
            for &(d, p, q) in &[(i, j, k), (j, k, i), (k, i, j)] {
                let up = geom.neighbor(site, mi, &strides, d, true);
                let dn = geom.neighbor(site, mi, &strides, d, false);
                f.get(up, p, q, &mut fu);
                f.get(dn, p, q, &mut fd);
                f.get(site, p, q, &mut fc);
                model.algebra.bracket_into(a.comp(site, d), &fc, &mut br);
                for c in 0..dg {
                    acc[c] += (fu[c] - fd[c]) * inv2h + br[c];
                }
            }
            let norm = model.algebra.killing_norm(&acc);
            if norm > worst {
                worst = norm;
            }
        }
    });
    worst
}

/// Max residual of the Killing compatibility identity (1.2): the central
/// difference of <X, Y> minus <grad_i X, Y> - <X, grad_i Y>, over all
/// axes and sites. The bracket terms cancel exactly by Ad-invariance, so
/// what remains is the discrete product-rule defect, O(h^2).
pub fn compat_g_residual(
    model: &Model,
    a: &GaugeField,
    x: &LatticeField,
    y: &LatticeField,
) -> Result<f64, FieldError> {
    check_same_geom(a.geom(), &x.geom)?;
    check_same_geom(&x.geom, &y.geom)?;
    let geom = x.geom.clone();
    let strides = geom.strides();
    let inv2h = 0.5 / geom.h;
    let mut worst = 0.0f64;
    for axis in 0..geom.n {
        let gx = grad_cov_g(model, a, x, axis)?;
        let gy = grad_cov_g(model, a, y, axis)?;
        geom.for_each_site(|site, mi| {
            let up = geom.neighbor(site, mi, &strides, axis, true);
            let dn = geom.neighbor(site, mi, &strides, axis, false);
            let d = (model.algebra.killing_inner_raw(x.site(up), y.site(up))
                - model.algebra.killing_inner_raw(x.site(dn), y.site(dn)))
                * inv2h;
            let rhs = model.algebra.killing_inner_raw(gx.site(site), y.site(site))
                + model.algebra.killing_inner_raw(x.site(site), gy.site(site));
            worst = worst.max((d - rhs).abs());
        });
    }
    Ok(worst)
}

/// Max residual of the commutator identity (1.3):
/// grad_i grad_j u - grad_j grad_i u - F_ij . u, over sites and i < j.
pub fn commutator_residual(model: &Model, a: &GaugeField, u: &ScalarFieldV) -> f64 {
    let geom = u.geom().clone();
    let dv = u.dim_v();
    let f = curvature(model, a);
    let mut worst = 0.0f64;
    let mut fij = vec![0.0; a.dim_g];
    let mut act = vec![0.0; dv];
    for i in 0..geom.n {
        let gi = grad_cov_v(model, a, u, i).unwrap();
        for j in (i + 1)..geom.n {
            let gj = grad_cov_v(model, a, u, j).unwrap();
            let gij = grad_cov_v(model, a, &gj, i).unwrap();
            let gji = grad_cov_v(model, a, &gi, j).unwrap();
            geom.for_each_site(|site, _| {
                f.get(site, i, j, &mut fij);
                model.rep.act_into(&fij, u.field.site(site), &mut act);
                let pij = gij.field.site(site);
                let pji = gji.field.site(site);
                let mut r2 = 0.0;
                for c in 0..dv {
                    let r = pij[c] - pji[c] - act[c];
                    r2 += r * r;
                }
                worst = worst.max(r2.sqrt());
            });
        }
    }
    worst
}

/// Max residual of the representation compatibility identity (1.4): the
/// central difference of <u1, u2>_V minus <grad_i u1, u2> - <u1, grad_i u2>.
pub fn compat_v_residual(
    model: &Model,
    a: &GaugeField,
    u1: &ScalarFieldV,
    u2: &ScalarFieldV,
) -> Result<f64, FieldError> {
    check_same_geom(a.geom(), u1.geom())?;
    check_same_geom(u1.geom(), u2.geom())?;
    let geom = u1.geom().clone();
    let strides = geom.strides();
    let inv2h = 0.5 / geom.h;
    let mut worst = 0.0f64;
    for axis in 0..geom.n {
        let g1 = grad_cov_v(model, a, u1, axis)?;
        let g2 = grad_cov_v(model, a, u2, axis)?;
        geom.for_each_site(|site, mi| {
            let up = geom.neighbor(site, mi, &strides, axis, true);
            let dn = geom.neighbor(site, mi, &strides, axis, false);
            let d = (model.rep.inner_v(u1.field.site(up), u2.field.site(up))
                - model.rep.inner_v(u1.field.site(dn), u2.field.site(dn)))
                * inv2h;
            let rhs = model.rep.inner_v(g1.field.site(site), u2.field.site(site))
                + model.rep.inner_v(u1.field.site(site), g2.field.site(site));
            worst = worst.max((d - rhs).abs());
        });
    }
    Ok(worst)
}

/// The discrete residuals of identities (1.1)-(1.4) at one point,
/// evaluated directly from analytic closures with the same central
/// stencils the lattice operators use. This streams arbitrarily fine
/// spacings h without storing a lattice, so residual convergence can be
/// measured at resolutions whose full fields would not fit in memory.
/// `aux` supplies the test functions: X = aux A_0, Y = aux A_1 for (1.2)
/// and u2 = aux u for (1.4). Returns [bianchi, compat_g, commutator,
/// compat_v] max norms over directions.
pub fn discrete_identity_residuals(
    model: &Model,
    pair: &AnalyticPair,
    aux: &AnalyticPair,
    x: &[f64],
    h: f64,
    t: f64,
) -> [f64; 4] {
    let n = pair.n;
    let dg = pair.dim_g;
    let dv = pair.dim_v;
    let shift = |x: &[f64], axis: usize, s: f64| -> Vec<f64> {
        let mut y = x.to_vec();
        y[axis] += s * h;
        y
    };
    let cd_g = |f: &dyn Fn(&[f64]) -> Vec<f64>, x: &[f64], axis: usize| -> Vec<f64> {
        let up = f(&shift(x, axis, 1.0));
        let dn = f(&shift(x, axis, -1.0));
        up.iter().zip(&dn).map(|(u, d)| (u - d) * 0.5 / h).collect()
    };
    let grad_g = |f: &dyn Fn(&[f64]) -> Vec<f64>, x: &[f64], axis: usize| -> Vec<f64> {
        let mut out = cd_g(f, x, axis);
        let mut br = vec![0.0; dg];
        model.algebra.bracket_into(&pair.a_at(x, t, axis), &f(x), &mut br);
        for c in 0..dg {
            out[c] += br[c];
        }
        out
    };
    let grad_v = |f: &dyn Fn(&[f64]) -> Vec<f64>, x: &[f64], axis: usize| -> Vec<f64> {
        let mut out = cd_g(f, x, axis);
        let mut act = vec![0.0; dv];
        model.rep.act_into(&pair.a_at(x, t, axis), &f(x), &mut act);
        for c in 0..dv {
            out[c] += act[c];
        }
        out
    };
    let f_at = |x: &[f64], i: usize, j: usize| -> Vec<f64> {
        let aj = |y: &[f64]| pair.a_at(y, t, j);
        let ai = |y: &[f64]| pair.a_at(y, t, i);
        let mut f = cd_g(&aj, x, i);
        let dji = cd_g(&ai, x, j);
        let mut br = vec![0.0; dg];
        model.algebra.bracket_into(&pair.a_at(x, t, i), &pair.a_at(x, t, j), &mut br);
        for c in 0..dg {
            f[c] += br[c] - dji[c];
        }
        f
    };
    // (1.1) Bianchi: cyclic sum of grad_d F_pq over ordered triples
    let mut bianchi = 0.0f64;
    for i in 0..n {
        for j in (i + 1)..n {
            for k in (j + 1)..n {
                let mut acc = vec![0.0; dg];
                for &(d, p, q) in &[(i, j, k), (j, k, i), (k, i, j)] {
                    let fpq = |y: &[f64]| f_at(y, p, q);
                    let g = grad_g(&fpq, x, d);
                    for c in 0..dg {
                        acc[c] += g[c];
                    }
                }
                bianchi = bianchi.max(model.algebra.killing_norm(&acc));
            }
        }
    }
    // (1.2) Killing compatibility with X = aux A_0, Y = aux A_1
    let xf = |y: &[f64]| aux.a_at(y, t, 0);
    let yf = |y: &[f64]| aux.a_at(y, t, 1);
    let mut compat_g = 0.0f64;
    for axis in 0..n {
        let up = shift(x, axis, 1.0);
        let dn = shift(x, axis, -1.0);
        let d = (model.algebra.killing_inner_raw(&xf(&up), &yf(&up))
            - model.algebra.killing_inner_raw(&xf(&dn), &yf(&dn)))
            * 0.5
            / h;
        let rhs = model.algebra.killing_inner_raw(&grad_g(&xf, x, axis), &yf(x))
            + model.algebra.killing_inner_raw(&xf(x), &grad_g(&yf, x, axis));
        compat_g = compat_g.max((d - rhs).abs());
    }
    // (1.3) commutator identity
    let uf = |y: &[f64]| pair.u_at(y, t);
    let mut commutator = 0.0f64;
    for i in 0..n {
        for j in (i + 1)..n {
            let gj = |y: &[f64]| grad_v(&uf, y, j);
            let gi = |y: &[f64]| grad_v(&uf, y, i);
            let gij = grad_v(&gj, x, i);
            let gji = grad_v(&gi, x, j);
            let mut act = vec![0.0; dv];
            model.rep.act_into(&f_at(x, i, j), &uf(x), &mut act);
            let mut r2 = 0.0;
            for c in 0..dv {
                let r = gij[c] - gji[c] - act[c];
                r2 += r * r;
            }
            commutator = commutator.max(r2.sqrt());
        }
    }
    // (1.4) representation compatibility with u2 = aux u
    let u2f = |y: &[f64]| aux.u_at(y, t);
    let mut compat_v = 0.0f64;
    for axis in 0..n {
        let up = shift(x, axis, 1.0);
        let dn = shift(x, axis, -1.0);
        let d = (model.rep.inner_v(&uf(&up), &u2f(&up)) - model.rep.inner_v(&uf(&dn), &u2f(&dn)))
            * 0.5
            / h;
        let rhs = model.rep.inner_v(&grad_v(&uf, x, axis), &u2f(x))
            + model.rep.inner_v(&uf(x), &grad_v(&u2f, x, axis));
        compat_v = compat_v.max((d - rhs).abs());
    }
    [bianchi, compat_g, commutator, compat_v]
}

/// Output of the stationary Yang-Mills-Higgs operator applied to a pair,
/// with the derived fields kept for reuse.
pub struct YmhOperator {
    /// sum_i grad_i F_ij - u (.) grad_j u, per site and direction j.
    pub da: LatticeField,
    /// sum_i grad_i^2 u - 2 W'(|u|^2) u, per site.
    pub du: LatticeField,
    pub f: CurvatureField,
    /// grad_i u, component index `i * dim_v + c`.
    pub gradu: LatticeField,
}

/// Evaluate the right-hand-side operator of the flow (equivalently the
/// negated equation residuals) together with F and the covariant gradient
/// of u.
pub fn ymh_operator(model: &Model, a: &GaugeField, u: &ScalarFieldV, w: &Potential) -> YmhOperator {
    let geom = a.geom().clone();
    let dg = a.dim_g;
    let dv = u.dim_v();
    let n = geom.n;
    let strides = geom.strides();
    let inv2h = 0.5 / geom.h;
    let f = curvature(model, a);

    // covariant gradient of u in all directions
    let mut gradu = LatticeField::zeros(&geom, n * dv);
    {
        let mut act = vec![0.0; dv];
        geom.for_each_site(|site, mi| {
            for i in 0..n {
                let up = geom.neighbor(site, mi, &strides, i, true);
                let dn = geom.neighbor(site, mi, &strides, i, false);
                model.rep.act_into(a.comp(site, i), u.field.site(site), &mut act);
                let uu = u.field.site(up);
                let ud = u.field.site(dn);
                let base = site * n * dv + i * dv;
                for c in 0..dv {
                    gradu.data[base + c] = (uu[c] - ud[c]) * inv2h + act[c];
                }
            }
        });
    }

    let mut da = LatticeField::zeros(&geom, n * dg);
    {
        let mut fu = vec![0.0; dg];
        let mut fd = vec![0.0; dg];
        let mut fc = vec![0.0; dg];
        let mut br = vec![0.0; dg];
        let mut src = vec![0.0; dg];
        geom.for_each_site(|site, mi| {
            for j in 0..n {
                let base = site * n * dg + j * dg;
                for i in 0..n {
                    if i == j {
                        continue;
                    }
                    let up = geom.neighbor(site, mi, &strides, i, true);
                    let dn = geom.neighbor(site, mi, &strides, i, false);
                    f.get(up, i, j, &mut fu);
                    f.get(dn, i, j, &mut fd);
                    f.get(site, i, j, &mut fc);
                    model.algebra.bracket_into(a.comp(site, i), &fc, &mut br);
                    for c in 0..dg {
                        da.data[base + c] += (fu[c] - fd[c]) * inv2h + br[c];
                    }
                }
                // coupling term u (.) grad_j u
                let gj = &gradu.data[site * n * dv + j * dv..site * n * dv + (j + 1) * dv];
                model.rep.odot_into(&model.algebra, u.field.site(site), gj, &mut src);
                for c in 0..dg {
                    da.data[base + c] -= src[c];
                }
            }
        });
    }

    let mut du = LatticeField::zeros(&geom, dv);
    {
        let mut act = vec![0.0; dv];
        geom.for_each_site(|site, mi| {
            let us = u.field.site(site);
            let s = model.rep.inner_v(us, us);
            let wp = 2.0 * w.w_prime(s);
            let base = site * dv;
            for i in 0..n {
                let up = geom.neighbor(site, mi, &strides, i, true);
                let dn = geom.neighbor(site, mi, &strides, i, false);
                let gu = &gradu.data[up * n * dv + i * dv..up * n * dv + (i + 1) * dv];
                let gd = &gradu.data[dn * n * dv + i * dv..dn * n * dv + (i + 1) * dv];
                let gc = &gradu.data[site * n * dv + i * dv..site * n * dv + (i + 1) * dv];
                model.rep.act_into(a.comp(site, i), gc, &mut act);
                for c in 0..dv {
                    du.data[base + c] += (gu[c] - gd[c]) * inv2h + act[c];
                }
            }
            for c in 0..dv {
                du.data[base + c] -= wp * us[c];
            }
        });
    }

    YmhOperator { da, du, f, gradu }
}

/// Pointwise energy density e(A, u) from precomputed derived fields.
pub fn energy_density_from_parts(
    model: &Model,
    f: &CurvatureField,
    gradu: &LatticeField,
    u: &ScalarFieldV,
    w: &Potential,
) -> Vec<f64> {
    let geom = &u.field.geom;
    let n = geom.n;
    let dg = f.dim_g;
    let dv = u.dim_v();
    let pairs = n * (n - 1) / 2;
    let mut e = vec![0.0; geom.site_count()];
    for site in 0..geom.site_count() {
        let mut fsum = 0.0;
        for p in 0..pairs {
            let base = site * f.field.comps + p * dg;
            let fp = &f.field.data[base..base + dg];
            fsum += model.algebra.killing_inner_raw(fp, fp);
        }
        let mut gsum = 0.0;
        for i in 0..n {
            let g = &gradu.data[site * n * dv + i * dv..site * n * dv + (i + 1) * dv];
            gsum += model.rep.inner_v(g, g);
        }
        let us = u.field.site(site);
        let s = model.rep.inner_v(us, us);
        e[site] = 0.5 * (fsum + gsum) + w.w(s);
    }
    e
}

/// Pointwise energy density e(A, u).
pub fn energy_density(model: &Model, a: &GaugeField, u: &ScalarFieldV, w: &Potential) -> Vec<f64> {
    let op = ymh_operator(model, a, u, w);
    energy_density_from_parts(model, &op.f, &op.gradu, u, w)
}

/// Total lattice energy h^n sum e, summed in site order (deterministic).
pub fn total_energy(geom: &LatticeGeometry, e: &[f64]) -> f64 {
    let hn = geom.h.powi(geom.n as i32);
    e.iter().sum::<f64>() * hn
}

/// Max norms of the two Yang-Mills-Higgs equation residuals.
pub fn ymhe_residual(model: &Model, a: &GaugeField, u: &ScalarFieldV, w: &Potential) -> (f64, f64) {
    let op = ymh_operator(model, a, u, w);
    let geom = a.geom();
    let n = geom.n;
    let dg = a.dim_g;
    let dv = u.dim_v();
    let mut ra = 0.0f64;
    let mut ru = 0.0f64;
    for site in 0..geom.site_count() {
        for j in 0..n {
            let d = &op.da.data[site * n * dg + j * dg..site * n * dg + (j + 1) * dg];
            ra = ra.max(model.algebra.killing_norm(d));
        }
        let d = &op.du.data[site * dv..(site + 1) * dv];
        ru = ru.max(model.rep.norm_v(d));
    }
    (ra, ru)
}

/// Gauge transformation of lattice data by g = exp(chi) with chi an
/// algebra-valued lattice field; the derivative of g is taken by central
/// differences, so covariance of derived quantities holds to O(h^2) only.
pub fn gauge_transform_lattice(
    model: &Model,
    chi: &LatticeField,
    a: &GaugeField,
    u: &ScalarFieldV,
) -> Result<(GaugeField, ScalarFieldV), FieldError> {
    check_same_geom(&chi.geom, a.geom())?;
    check_same_geom(&chi.geom, u.geom())?;
    let geom = chi.geom.clone();
    let n = geom.n;
    let dg = model.dim_g();
    let dv = model.dim_v();
    let count = geom.site_count();
    // exponentials per site
    let mut mats = Vec::with_capacity(count);
    for site in 0..count {
        mats.push(crate::algebra::group_exp(&model.algebra, &model.rep, chi.site(site)));
    }
    let strides = geom.strides();
    let inv2h = 0.5 / geom.h;
    let mut a_out = GaugeField::zeros(&geom, dg);
    let mut u_out = ScalarFieldV::zeros(&geom, dv);
    let mut z = vec![0.0; dg];
    geom.for_each_site(|site, mi| {
        let g = &mats[site];
        // rho(g) u
        {
            let us = u.field.site(site);
            let o = u_out.field.site_mut(site);
            for r in 0..dv {
                let mut s = 0.0;
                for c in 0..dv {
                    s += g.matrix[(r, c)] * us[c];
                }
                o[r] = s;
            }
        }
        for i in 0..n {
            let up = geom.neighbor(site, mi, &strides, i, true);
            let dn = geom.neighbor(site, mi, &strides, i, false);
            // (d_i g) g^{-1} via central difference of rho(g), projected to g
            let dgi = (&mats[up].matrix - &mats[dn].matrix) * inv2h;
            let ginv = g
                .matrix
                .clone()
                .try_inverse()
                .expect("group element is invertible");
            model.rep.project_to_algebra(&(dgi * ginv), &mut z);
            let ai = a.comp(site, i);
            let base = site * n * dg + i * dg;
            for r in 0..dg {
                let mut s = 0.0;
                for c in 0..dg {
                    s += g.adjoint[(r, c)] * ai[c];
                }
                a_out.field.data[base + r] = s - z[r];
            }
        }
    });
    Ok((a_out, u_out))
}

/// Sample an analytic pair on a lattice at time t.
pub fn sample(pair: &AnalyticPair, geom: &LatticeGeometry, t: f64) -> (GaugeField, ScalarFieldV) {
    let n = geom.n;
    let dg = pair.dim_g;
    let dv = pair.dim_v;
    let mut a = GaugeField::zeros(geom, dg);
    let mut u = ScalarFieldV::zeros(geom, dv);
    let mut x = vec![0.0; n];
    geom.for_each_site(|site, mi| {
        geom.coords_of(mi, &mut x);
        for i in 0..n {
            let ai = pair.a_at(&x, t, i);
            a.field.data[site * n * dg + i * dg..site * n * dg + (i + 1) * dg]
                .copy_from_slice(&ai);
        }
        let uv = pair.u_at(&x, t);
        u.field.site_mut(site).copy_from_slice(&uv);
    });
    (a, u)
}

/// Periodic multilinear interpolation of a lattice field at physical
/// position x; writes the interpolated component vector into `out`.
pub fn interpolate(field: &LatticeField, x: &[f64], out: &mut [f64]) {
    let geom = &field.geom;
    let n = geom.n;
    let npts = geom.npts;
    debug_assert!(n <= 16);
    let mut i0 = [0usize; 16];
    let mut w1 = [0.0f64; 16];
    for d in 0..n {
        let u = (x[d] - geom.origin[d]) / geom.h;
        let f = u.floor();
        let mut idx = (f as i64).rem_euclid(npts as i64) as usize;
        if idx >= npts {
            idx -= npts;
        }
        i0[d] = idx;
        w1[d] = u - f;
    }
    let strides = geom.strides();
    out[..field.comps].fill(0.0);
    let corners = 1usize << n;
    for mask in 0..corners {
        let mut site = 0usize;
        let mut w = 1.0f64;
        for d in 0..n {
            if mask >> d & 1 == 1 {
                let c = if i0[d] + 1 < npts { i0[d] + 1 } else { 0 };
                site += c * strides[d];
                w *= w1[d];
            } else {
                site += i0[d] * strides[d];
                w *= 1.0 - w1[d];
            }
        }
        if w == 0.0 {
            continue;
        }
        let v = field.site(site);
        for c in 0..field.comps {
            out[c] += w * v[c];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn geom(npts: usize) -> LatticeGeometry {
        LatticeGeometry::new(5, npts, 6.4 / npts as f64, vec![0.0; 5]).unwrap()
    }

    #[test]
    fn geometry_validation() {
        assert!(LatticeGeometry::new(4, 16, 0.1, vec![0.0; 4]).is_err());
        assert!(LatticeGeometry::new(5, 4, 0.1, vec![0.0; 5]).is_err());
        assert!(LatticeGeometry::new(5, 8, -0.1, vec![0.0; 5]).is_err());
        let g = geom(8);
        assert_eq!(g.site_count(), 8usize.pow(5));
        assert_relative_eq!(g.side_length(), 6.4);
    }

    #[test]
    fn neighbor_wraps_periodically() {
        let g = geom(8);
        let strides = g.strides();
        // site at mi = [0,0,0,0,7]
        let site = 7;
        let mi = [0, 0, 0, 0, 7];
        assert_eq!(g.neighbor(site, &mi, &strides, 4, true), 0);
        assert_eq!(g.neighbor(site, &mi, &strides, 4, false), 6);
        let mi0 = [0, 0, 0, 0, 0];
        assert_eq!(g.neighbor(0, &mi0, &strides, 0, false), 7 * strides[0]);
    }

    #[test]
    fn zero_fields_have_zero_everything() {
        let model = Model::su2_adjoint();
        let g = geom(8);
        let a = GaugeField::zeros(&g, 3);
        let u = ScalarFieldV::zeros(&g, 3);
        let f = curvature(&model, &a);
        assert_eq!(f.field.max_abs(), 0.0);
        assert_eq!(bianchi_residual(&model, &a), 0.0);
        let e = energy_density(&model, &a, &u, &Potential::Zero);
        assert!(e.iter().all(|&v| v == 0.0));
        let (ra, ru) = ymhe_residual(&model, &a, &u, &Potential::Zero);
        assert_eq!((ra, ru), (0.0, 0.0));
    }

    #[test]
    fn vacuum_pair_is_a_solution() {
        let model = Model::su2_adjoint();
        let g = geom(8);
        let a = GaugeField::zeros(&g, 3);
        let mut u = ScalarFieldV::zeros(&g, 3);
        // |u| = v with respect to K = 2I: coefficients (v/sqrt(2), 0, 0)
        let v = 1.3;
        for s in 0..g.site_count() {
            u.field.site_mut(s)[0] = v / 2f64.sqrt();
        }
        let w = Potential::quartic(0.7, v);
        let e = energy_density(&model, &a, &u, &w);
        assert!(crate::util::max_abs(&e) < 1e-28);
        let (ra, ru) = ymhe_residual(&model, &a, &u, &w);
        assert!(ra < 1e-14 && ru < 1e-14);
    }

    #[test]
    fn derivative_of_plane_wave_matches_closed_form() {
        let model = Model::su2_adjoint();
        let g = geom(16);
        let l = g.side_length();
        let k = 2.0 * std::f64::consts::PI / l;
        let a = GaugeField::zeros(&g, 3);
        let mut x = LatticeField::zeros(&g, 3);
        let mut pos = vec![0.0; 5];
        g.for_each_site(|site, mi| {
            g.coords_of(mi, &mut pos);
            x.site_mut(site)[0] = (k * pos[0]).sin();
        });
        let dx = grad_cov_g(&model, &a, &x, 0).unwrap();
        let mut worst = 0.0f64;
        g.for_each_site(|site, mi| {
            g.coords_of(mi, &mut pos);
            let exact = k * (k * pos[0]).cos();
            worst = worst.max((dx.site(site)[0] - exact).abs());
        });
        // second-order accuracy: error ~ k^3 h^2 / 6
        let bound = k.powi(3) * g.h * g.h / 6.0 * 1.1;
        assert!(worst < bound, "worst {worst} bound {bound}");
        // constant field, A = 0 -> derivative zero
        let mut c = LatticeField::zeros(&g, 3);
        c.data.fill(0.7);
        let dc = grad_cov_g(&model, &a, &c, 2).unwrap();
        assert_eq!(dc.max_abs(), 0.0);
    }

    #[test]
    fn abelian_curvature_matches_curl() {
        // A valued in a single basis direction: bracket vanishes, F is the
        // linear curl of the chosen profile up to FD error.
        let model = Model::su2_adjoint();
        let g = geom(16);
        let l = g.side_length();
        let k = 2.0 * std::f64::consts::PI / l;
        let mut a = GaugeField::zeros(&g, 3);
        let mut pos = vec![0.0; 5];
        let n = g.n;
        g.for_each_site(|site, mi| {
            g.coords_of(mi, &mut pos);
            // A_1 = sin(k x_0) e_3
            a.field.data[site * n * 3 + 3 + 2] = (k * pos[0]).sin();
        });
        let f = curvature(&model, &a);
        let mut worst = 0.0f64;
        g.for_each_site(|site, mi| {
            g.coords_of(mi, &mut pos);
            let exact = k * (k * pos[0]).cos();
            // exact F_01 = d_0 A_1; FD applies sin -> discrete derivative
            let got = f.pair(site, 0, 1)[2];
            let discrete = (k * g.h).sin() / g.h * (k * pos[0]).cos();
            worst = worst.max((got - discrete).abs());
            // and the discrete value approximates the continuum curl
            assert!((got - exact).abs() < k.powi(3) * g.h * g.h / 6.0 * 1.1 + 1e-12);
        });
        // the lattice operator must agree with the hand-rolled stencil exactly
        assert!(worst < 1e-13, "worst {worst}");
    }

    #[test]
    fn curvature_antisymmetry_contract() {
        let model = Model::su2_adjoint();
        let g = geom(8);
        let mut a = GaugeField::zeros(&g, 3);
        // deterministic junk data
        for (i, v) in a.field.data.iter_mut().enumerate() {
            *v = ((i % 97) as f64 - 48.0) / 97.0;
        }
        let f = curvature(&model, &a);
        let mut fij = vec![0.0; 3];
        let mut fji = vec![0.0; 3];
        for site in [0, 100, 4096] {
            f.get(site, 1, 3, &mut fij);
            f.get(site, 3, 1, &mut fji);
            for c in 0..3 {
                assert_eq!(fij[c], -fji[c]);
            }
        }
    }

    #[test]
    fn interpolation_reproduces_nodes_and_linears() {
        let g = geom(8);
        let mut f = LatticeField::zeros(&g, 2);
        let mut pos = vec![0.0; 5];
        g.for_each_site(|site, mi| {
            g.coords_of(mi, &mut pos);
            f.site_mut(site)[0] = pos.iter().sum();
            f.site_mut(site)[1] = 3.0;
        });
        let mut out = [0.0; 2];
        // at a node
        interpolate(&f, &[0.8, 0.0, 1.6, 0.0, 2.4], &mut out);
        assert_relative_eq!(out[0], 4.8, epsilon = 1e-12);
        assert_relative_eq!(out[1], 3.0, epsilon = 1e-12);
        // between nodes (linear function away from the wrap is exact)
        interpolate(&f, &[1.0, 0.4, 1.7, 0.2, 2.0], &mut out);
        assert_relative_eq!(out[0], 5.3, epsilon = 1e-12);
    }

    #[test]
    fn streamed_identity_residuals_match_lattice_and_converge() {
        let m = Model::su2_adjoint();
        let length = 6.4;
        let pair = crate::fields::band_limited_pair(5, 3, 3, length, 11, 0.4, 0.3, 5);
        let aux = crate::fields::band_limited_pair(5, 3, 3, length, 12, 0.4, 0.3, 5);
        // streaming evaluation reproduces the lattice residuals at a node
        let g = LatticeGeometry::new(5, 8, 0.8, vec![0.0; 5]).unwrap();
        let (a, u) = sample(&pair, &g, 0.0);
        let (ax, u2) = sample(&aux, &g, 0.0);
        let mut xg = LatticeField::zeros(&g, 3);
        let mut yg = LatticeField::zeros(&g, 3);
        for site in 0..g.site_count() {
            xg.site_mut(site).copy_from_slice(ax.comp(site, 0));
            yg.site_mut(site).copy_from_slice(ax.comp(site, 1));
        }
        let lattice_vals = [
            bianchi_residual(&m, &a),
            compat_g_residual(&m, &a, &xg, &yg).unwrap(),
            commutator_residual(&m, &a, &u),
            compat_v_residual(&m, &a, &u, &u2).unwrap(),
        ];
        let mut streamed = [0.0f64; 4];
        let mut pos = vec![0.0; 5];
        g.for_each_site(|_, mi| {
            g.coords_of(mi, &mut pos);
            let r = discrete_identity_residuals(&m, &pair, &aux, &pos, 0.8, 0.0);
            for k in 0..4 {
                streamed[k] = streamed[k].max(r[k]);
            }
        });
        for k in 0..4 {
            assert_relative_eq!(streamed[k], lattice_vals[k], epsilon = 1e-11);
        }
        // halving the spacing from h = L/16 reduces every residual at
        // second order; probe points are fixed across both spacings
        let dirs = crate::util::sphere_directions(5, 24, 3);
        let probes: Vec<Vec<f64>> = dirs
            .iter()
            .enumerate()
            .map(|(k, d)| {
                let rho = (k as f64 + 1.0) / dirs.len() as f64;
                d.iter().map(|di| 0.5 * length + rho * di).collect()
            })
            .collect();
        let mut coarse = [0.0f64; 4];
        let mut fine = [0.0f64; 4];
        for p in &probes {
            let rc = discrete_identity_residuals(&m, &pair, &aux, p, length / 16.0, 0.0);
            let rf = discrete_identity_residuals(&m, &pair, &aux, p, length / 32.0, 0.0);
            for k in 0..4 {
                coarse[k] = coarse[k].max(rc[k]);
                fine[k] = fine[k].max(rf[k]);
            }
        }
        for k in 0..4 {
            assert!(fine[k] > 0.0);
            let order = (coarse[k] / fine[k]).log2();
            assert!(
                (1.6..=2.4).contains(&order),
                "identity {k}: residuals {:?} -> order {order}",
                (coarse[k], fine[k])
            );
        }
    }
}
