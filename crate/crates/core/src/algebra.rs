//! Exact finite-dimensional Lie-algebra kernel: structure constants,
//! negative Killing form, representations, the adjoint bilinear form and
//! group exponentials.
//!
//! Everything is real arithmetic on coefficient vectors in a fixed basis;
//! the shipped instance is su(2) realized by the Levi-Civita structure
//! constants, with the adjoint representation as the default scalar-field
//! target space.

use nalgebra::DMatrix;
use thiserror::Error;

/// Tolerance used when validating structure data at construction.
const VALIDATE_TOL: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum AlgebraError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid structure data: {0}")]
    InvalidStructure(String),
    #[error("invalid representation: {0}")]
    InvalidRepresentation(String),
    #[error("parse error in structure-constant table: {0}")]
    Parse(String),
}

/// Element of the Lie algebra, as coefficients in the fixed basis.
#[derive(Debug, Clone, PartialEq)]
pub struct AlgebraElement {
    pub coeffs: Vec<f64>,
}

impl AlgebraElement {
    pub fn zero(dim: usize) -> Self {
        Self { coeffs: vec![0.0; dim] }
    }

    pub fn basis(dim: usize, a: usize) -> Self {
        let mut coeffs = vec![0.0; dim];
        coeffs[a] = 1.0;
        Self { coeffs }
    }

    pub fn from_coeffs(coeffs: Vec<f64>) -> Self {
        Self { coeffs }
    }

    pub fn dim(&self) -> usize {
        self.coeffs.len()
    }
}

/// Structure constants and Killing metric of a compact semisimple algebra.
///
/// `c[a][b][k]` are the coefficients of `[e_a, e_b]` in the basis, stored
/// flat as `a * dim * dim + b * dim + k`. The Killing metric is
/// `K[a][b] = -tr(ad_a ad_b)` and must be symmetric positive definite.
#[derive(Debug, Clone)]
pub struct StructureData {
    dim: usize,
    constants: Vec<f64>,
    killing: DMatrix<f64>,
    killing_inv: DMatrix<f64>,
    ad: Vec<DMatrix<f64>>,
}

impl StructureData {
    /// Build and validate from a flat `c[a][b][k]` table.
    pub fn new(dim: usize, constants: Vec<f64>) -> Result<Self, AlgebraError> {
        if dim == 0 || constants.len() != dim * dim * dim {
            return Err(AlgebraError::InvalidStructure(format!(
                "need {} structure constants for dim {}, got {}",
                dim * dim * dim,
                dim,
                constants.len()
            )));
        }
        // ad_a as a matrix: (ad_a)_{k,b} = c[a][b][k]
        let ad: Vec<DMatrix<f64>> = (0..dim)
            .map(|a| {
                DMatrix::from_fn(dim, dim, |k, b| constants[a * dim * dim + b * dim + k])
            })
            .collect();
        let mut killing = DMatrix::zeros(dim, dim);
        for a in 0..dim {
            for b in 0..dim {
                killing[(a, b)] = -(&ad[a] * &ad[b]).trace();
            }
        }
        let killing_inv = killing.clone().try_inverse().ok_or_else(|| {
            AlgebraError::InvalidStructure("Killing metric is singular".into())
        })?;
        let sd = Self { dim, constants, killing, killing_inv, ad };
        sd.validate()?;
        Ok(sd)
    }

    /// The su(2) instance: c[a][b][k] = epsilon_abk, K = 2 I.
    pub fn su2() -> Self {
        let mut c = vec![0.0; 27];
        let eps = [(0, 1, 2, 1.0), (1, 2, 0, 1.0), (2, 0, 1, 1.0)];
        for &(a, b, k, s) in &eps {
            c[a * 9 + b * 3 + k] = s;
            c[b * 9 + a * 3 + k] = -s;
        }
        Self::new(3, c).expect("su(2) structure data is valid")
    }

    /// Parse a plain-text table of rows `a b k value` (0-based indices,
    /// '#' comments and blank lines allowed). Missing entries are zero;
    /// antisymmetric counterparts must be listed explicitly or are filled
    /// in from the listed entry.
    pub fn from_table(dim: usize, text: &str) -> Result<Self, AlgebraError> {
        let mut c = vec![0.0; dim * dim * dim];
        let mut seen = vec![false; dim * dim * dim];
        for (lineno, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != 4 {
                return Err(AlgebraError::Parse(format!(
                    "line {}: expected 'a b k value'",
                    lineno + 1
                )));
            }
            let idx: Vec<usize> = fields[..3]
                .iter()
                .map(|f| {
                    f.parse::<usize>().map_err(|_| {
                        AlgebraError::Parse(format!("line {}: bad index '{}'", lineno + 1, f))
                    })
                })
                .collect::<Result<_, _>>()?;
            let value: f64 = fields[3].parse().map_err(|_| {
                AlgebraError::Parse(format!("line {}: bad value '{}'", lineno + 1, fields[3]))
            })?;
            let (a, b, k) = (idx[0], idx[1], idx[2]);
            if a >= dim || b >= dim || k >= dim {
                return Err(AlgebraError::Parse(format!(
                    "line {}: index out of range for dim {}",
                    lineno + 1,
                    dim
                )));
            }
            c[a * dim * dim + b * dim + k] = value;
            seen[a * dim * dim + b * dim + k] = true;
        }
        // fill unlisted antisymmetric partners
        for a in 0..dim {
            for b in 0..dim {
                for k in 0..dim {
                    let i = a * dim * dim + b * dim + k;
                    let j = b * dim * dim + a * dim + k;
                    if seen[i] && !seen[j] {
                        c[j] = -c[i];
                        seen[j] = true;
                    }
                }
            }
        }
        Self::new(dim, c)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn c(&self, a: usize, b: usize, k: usize) -> f64 {
        self.constants[a * self.dim * self.dim + b * self.dim + k]
    }

    pub fn killing(&self) -> &DMatrix<f64> {
        &self.killing
    }

    pub fn ad_matrix(&self, a: usize) -> &DMatrix<f64> {
        &self.ad[a]
    }

    fn validate(&self) -> Result<(), AlgebraError> {
        let d = self.dim;
        for a in 0..d {
            for b in 0..d {
                for k in 0..d {
                    if (self.c(a, b, k) + self.c(b, a, k)).abs() > VALIDATE_TOL {
                        return Err(AlgebraError::InvalidStructure(format!(
                            "antisymmetry violated at ({a},{b},{k})"
                        )));
                    }
                }
            }
        }
        for a in 0..d {
            for b in 0..d {
                for e in 0..d {
                    for k in 0..d {
                        let mut s = 0.0;
                        for m in 0..d {
                            s += self.c(a, b, m) * self.c(m, e, k)
                                + self.c(b, e, m) * self.c(m, a, k)
                                + self.c(e, a, m) * self.c(m, b, k);
                        }
                        if s.abs() > VALIDATE_TOL {
                            return Err(AlgebraError::InvalidStructure(format!(
                                "Jacobi identity violated at ({a},{b},{e},{k})"
                            )));
                        }
                    }
                }
            }
        }
        for a in 0..d {
            for b in 0..d {
                if (self.killing[(a, b)] - self.killing[(b, a)]).abs() > VALIDATE_TOL {
                    return Err(AlgebraError::InvalidStructure(
                        "Killing metric not symmetric".into(),
                    ));
                }
            }
        }
        // positive definiteness via Cholesky
        if self.killing.clone().cholesky().is_none() {
            return Err(AlgebraError::InvalidStructure(
                "Killing metric not positive definite".into(),
            ));
        }
        // ad-invariance on all basis triples: <[x,y],z> = <x,[y,z]>
        let mut bxy = vec![0.0; d];
        let mut byz = vec![0.0; d];
        for a in 0..d {
            for b in 0..d {
                for e in 0..d {
                    for k in 0..d {
                        bxy[k] = self.c(a, b, k);
                        byz[k] = self.c(b, e, k);
                    }
                    let lhs: f64 = (0..d).map(|k| bxy[k] * self.killing[(k, e)]).sum();
                    let rhs: f64 = (0..d).map(|k| self.killing[(a, k)] * byz[k]).sum();
                    if (lhs - rhs).abs() > VALIDATE_TOL {
                        return Err(AlgebraError::InvalidStructure(format!(
                            "ad-invariance violated at basis triple ({a},{b},{e})"
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    fn check_dim(&self, len: usize) -> Result<(), AlgebraError> {
        if len != self.dim {
            Err(AlgebraError::DimensionMismatch { expected: self.dim, got: len })
        } else {
            Ok(())
        }
    }

    /// `[x, y]` into `out`, unchecked hot path.
    pub fn bracket_into(&self, x: &[f64], y: &[f64], out: &mut [f64]) {
        let d = self.dim;
        out[..d].fill(0.0);
        for a in 0..d {
            let xa = x[a];
            if xa == 0.0 {
                continue;
            }
            for b in 0..d {
                let f = xa * y[b];
                if f == 0.0 {
                    continue;
                }
                for k in 0..d {
                    out[k] += self.constants[a * d * d + b * d + k] * f;
                }
            }
        }
    }

    /// `[x, y]` as a fresh element, with dimension checks.
    pub fn bracket(&self, x: &AlgebraElement, y: &AlgebraElement) -> Result<AlgebraElement, AlgebraError> {
        self.check_dim(x.dim())?;
        self.check_dim(y.dim())?;
        let mut out = vec![0.0; self.dim];
        self.bracket_into(&x.coeffs, &y.coeffs, &mut out);
        Ok(AlgebraElement::from_coeffs(out))
    }

    /// Negative Killing form `x^T K y`, unchecked hot path.
    pub fn killing_inner_raw(&self, x: &[f64], y: &[f64]) -> f64 {
        let d = self.dim;
        let mut s = 0.0;
        for a in 0..d {
            let mut row = 0.0;
            for b in 0..d {
                row += self.killing[(a, b)] * y[b];
            }
            s += x[a] * row;
        }
        s
    }

    pub fn killing_inner(&self, x: &AlgebraElement, y: &AlgebraElement) -> Result<f64, AlgebraError> {
        self.check_dim(x.dim())?;
        self.check_dim(y.dim())?;
        Ok(self.killing_inner_raw(&x.coeffs, &y.coeffs))
    }

    /// Norm induced by the Killing form.
    pub fn killing_norm(&self, x: &[f64]) -> f64 {
        self.killing_inner_raw(x, x).max(0.0).sqrt()
    }

    pub fn killing_inverse(&self) -> &DMatrix<f64> {
        &self.killing_inv
    }
}

/// Finite-dimensional representation of the algebra on an inner-product
/// space V: one generator matrix per basis element plus the invariant
/// inner product on V.
#[derive(Debug, Clone)]
pub struct Representation {
    dim_v: usize,
    generators: Vec<DMatrix<f64>>,
    inner: DMatrix<f64>,
    /// Gram matrix tr(rho_a^T rho_b), used to project matrices back to
    /// algebra coefficients (radial gauge).
    gram_inv: DMatrix<f64>,
}

impl Representation {
    pub fn new(
        sd: &StructureData,
        generators: Vec<DMatrix<f64>>,
        inner: DMatrix<f64>,
    ) -> Result<Self, AlgebraError> {
        let d = sd.dim();
        if generators.len() != d {
            return Err(AlgebraError::InvalidRepresentation(format!(
                "need {} generators, got {}",
                d,
                generators.len()
            )));
        }
        let dim_v = inner.nrows();
        if inner.ncols() != dim_v || generators.iter().any(|g| g.nrows() != dim_v || g.ncols() != dim_v) {
            return Err(AlgebraError::InvalidRepresentation(
                "generator / inner-product shape mismatch".into(),
            ));
        }
        // commutation relations
        for a in 0..d {
            for b in 0..d {
                let mut comm = &generators[a] * &generators[b] - &generators[b] * &generators[a];
                for k in 0..d {
                    comm -= sd.c(a, b, k) * &generators[k];
                }
                if comm.amax() > 1e-10 {
                    return Err(AlgebraError::InvalidRepresentation(format!(
                        "commutation relation violated for ({a},{b})"
                    )));
                }
            }
        }
        // skew-adjointness: G^T M + M G = 0
        for (a, g) in generators.iter().enumerate() {
            let skew = g.transpose() * &inner + &inner * g;
            if skew.amax() > 1e-10 {
                return Err(AlgebraError::InvalidRepresentation(format!(
                    "generator {a} not skew-adjoint for the inner product"
                )));
            }
        }
        let mut gram = DMatrix::zeros(d, d);
        for a in 0..d {
            for b in 0..d {
                gram[(a, b)] = (generators[a].transpose() * &generators[b]).trace();
            }
        }
        let gram_inv = gram.try_inverse().ok_or_else(|| {
            AlgebraError::InvalidRepresentation("generator Gram matrix singular".into())
        })?;
        Ok(Self { dim_v, generators, inner, gram_inv })
    }

    /// The adjoint representation: V = g, generators ad_a, inner product K.
    pub fn adjoint(sd: &StructureData) -> Self {
        let gens = (0..sd.dim()).map(|a| sd.ad_matrix(a).clone()).collect();
        Self::new(sd, gens, sd.killing().clone()).expect("adjoint representation is valid")
    }

    pub fn dim_v(&self) -> usize {
        self.dim_v
    }

    pub fn generator(&self, a: usize) -> &DMatrix<f64> {
        &self.generators[a]
    }

    /// Infinitesimal action `(sum_a x_a rho_a) v` into `out`.
    pub fn act_into(&self, x: &[f64], v: &[f64], out: &mut [f64]) {
        out[..self.dim_v].fill(0.0);
        for (a, &xa) in x.iter().enumerate() {
            if xa == 0.0 {
                continue;
            }
            let g = &self.generators[a];
            for i in 0..self.dim_v {
                let mut s = 0.0;
                for j in 0..self.dim_v {
                    s += g[(i, j)] * v[j];
                }
                out[i] += xa * s;
            }
        }
    }

    pub fn act(&self, sd: &StructureData, x: &AlgebraElement, v: &[f64]) -> Result<Vec<f64>, AlgebraError> {
        if x.dim() != sd.dim() || self.generators.len() != sd.dim() {
            return Err(AlgebraError::DimensionMismatch { expected: sd.dim(), got: x.dim() });
        }
        if v.len() != self.dim_v {
            return Err(AlgebraError::DimensionMismatch { expected: self.dim_v, got: v.len() });
        }
        let mut out = vec![0.0; self.dim_v];
        self.act_into(&x.coeffs, v, &mut out);
        Ok(out)
    }

    /// Invariant inner product on V.
    pub fn inner_v(&self, u: &[f64], v: &[f64]) -> f64 {
        let mut s = 0.0;
        for i in 0..self.dim_v {
            let mut row = 0.0;
            for j in 0..self.dim_v {
                row += self.inner[(i, j)] * v[j];
            }
            s += u[i] * row;
        }
        s
    }

    pub fn norm_v(&self, u: &[f64]) -> f64 {
        self.inner_v(u, u).max(0.0).sqrt()
    }

    /// The bilinear form `u1 (.) u2 -> g` adjoint to the action:
    /// `<x, u1 (.) u2>_K = <x . u1, u2>_V` for all x. Computed as
    /// `z = K^{-1} m` with `m_a = <rho_a u1, u2>_V`.
    pub fn odot_into(&self, sd: &StructureData, u1: &[f64], u2: &[f64], out: &mut [f64]) {
        let d = sd.dim();
        let mut m = vec![0.0; d];
        let mut tmp = vec![0.0; self.dim_v];
        let mut x = vec![0.0; d];
        for (a, slot) in m.iter_mut().enumerate() {
            x.fill(0.0);
            x[a] = 1.0;
            self.act_into(&x, u1, &mut tmp);
            *slot = self.inner_v(&tmp, u2);
        }
        let kinv = sd.killing_inverse();
        for k in 0..d {
            let mut s = 0.0;
            for a in 0..d {
                s += kinv[(k, a)] * m[a];
            }
            out[k] = s;
        }
    }

    pub fn odot(&self, sd: &StructureData, u1: &[f64], u2: &[f64]) -> Result<AlgebraElement, AlgebraError> {
        if u1.len() != self.dim_v || u2.len() != self.dim_v {
            return Err(AlgebraError::DimensionMismatch { expected: self.dim_v, got: u1.len() });
        }
        let mut out = vec![0.0; sd.dim()];
        self.odot_into(sd, u1, u2, &mut out);
        Ok(AlgebraElement::from_coeffs(out))
    }

    /// Project a dim_V x dim_V matrix onto the span of the generators,
    /// returning algebra coefficients (least squares via the Gram matrix).
    pub fn project_to_algebra(&self, m: &DMatrix<f64>, out: &mut [f64]) {
        let d = self.generators.len();
        let mut rhs = vec![0.0; d];
        for (a, slot) in rhs.iter_mut().enumerate() {
            *slot = (self.generators[a].transpose() * m).trace();
        }
        for k in 0..d {
            let mut s = 0.0;
            for a in 0..d {
                s += self.gram_inv[(k, a)] * rhs[a];
            }
            out[k] = s;
        }
    }
}

/// A group element realized by its matrix in the representation together
/// with its adjoint action on the algebra.
#[derive(Debug, Clone)]
pub struct GroupElement {
    pub matrix: DMatrix<f64>,
    pub adjoint: DMatrix<f64>,
}

/// Matrix exponential by scaling and squaring with a Taylor series whose
/// tail is driven below 1e-14; adequate for the small dimensions here.
pub fn matrix_exp(m: &DMatrix<f64>) -> DMatrix<f64> {
    let n = m.nrows();
    let norm = m.amax() * n as f64;
    let squarings = if norm > 0.5 {
        (norm / 0.5).log2().ceil() as u32
    } else {
        0
    };
    let scaled = m / 2f64.powi(squarings as i32);
    let mut result = DMatrix::identity(n, n);
    let mut term = DMatrix::identity(n, n);
    let mut k = 1.0;
    loop {
        term = &term * &scaled / k;
        result += &term;
        if term.amax() < 1e-16 || k > 60.0 {
            break;
        }
        k += 1.0;
    }
    for _ in 0..squarings {
        result = &result * &result;
    }
    result
}

/// Exponentiate an algebra element into a group element: the matrix in the
/// given representation and the adjoint matrix on the algebra.
pub fn group_exp(sd: &StructureData, rep: &Representation, x: &[f64]) -> GroupElement {
    let d = sd.dim();
    let mut gen = DMatrix::zeros(rep.dim_v(), rep.dim_v());
    let mut ad = DMatrix::zeros(d, d);
    for (a, &xa) in x.iter().enumerate() {
        gen += xa * rep.generator(a);
        ad += xa * sd.ad_matrix(a);
    }
    GroupElement { matrix: matrix_exp(&gen), adjoint: matrix_exp(&ad) }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn randn(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
        (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect()
    }

    #[test]
    fn su2_killing_is_twice_identity() {
        // Oracle, by hand: ad_1 = [[0,0,0],[0,0,-1],[0,1,0]] so
        // tr(ad_a ad_b) = -2 delta_ab and K = 2 I.
        let sd = StructureData::su2();
        for a in 0..3 {
            for b in 0..3 {
                let ea = AlgebraElement::basis(3, a);
                let eb = AlgebraElement::basis(3, b);
                let want = if a == b { 2.0 } else { 0.0 };
                assert_relative_eq!(sd.killing_inner(&ea, &eb).unwrap(), want, epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn su2_bracket_matches_levi_civita() {
        let sd = StructureData::su2();
        let e1 = AlgebraElement::basis(3, 0);
        let e2 = AlgebraElement::basis(3, 1);
        let e3 = AlgebraElement::basis(3, 2);
        assert_eq!(sd.bracket(&e1, &e2).unwrap(), e3);
        // bilinearity: [e1, e1 + e2] = e3
        let e12 = AlgebraElement::from_coeffs(vec![1.0, 1.0, 0.0]);
        assert_eq!(sd.bracket(&e1, &e12).unwrap(), e3);
    }

    #[test]
    fn bracket_of_element_with_itself_vanishes() {
        let sd = StructureData::su2();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..20 {
            let x = AlgebraElement::from_coeffs(randn(&mut rng, 3));
            let b = sd.bracket(&x, &x).unwrap();
            assert!(crate::util::max_abs(&b.coeffs) < 1e-15);
        }
    }

    #[test]
    fn killing_zero_and_dim_mismatch() {
        let sd = StructureData::su2();
        let z = AlgebraElement::zero(3);
        let y = AlgebraElement::from_coeffs(vec![1.0, -2.0, 0.5]);
        assert_eq!(sd.killing_inner(&z, &y).unwrap(), 0.0);
        let bad = AlgebraElement::zero(4);
        assert!(sd.killing_inner(&bad, &y).is_err());
        assert!(sd.bracket(&bad, &y).is_err());
    }

    #[test]
    fn ad_invariance_on_random_triples() {
        let sd = StructureData::su2();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..100 {
            let x = randn(&mut rng, 3);
            let y = randn(&mut rng, 3);
            let z = randn(&mut rng, 3);
            let mut xy = vec![0.0; 3];
            let mut yz = vec![0.0; 3];
            sd.bracket_into(&x, &y, &mut xy);
            sd.bracket_into(&y, &z, &mut yz);
            let lhs = sd.killing_inner_raw(&xy, &z);
            let rhs = sd.killing_inner_raw(&x, &yz);
            assert!((lhs - rhs).abs() <= 1e-12);
        }
    }

    #[test]
    fn jacobi_residual_on_random_elements() {
        let sd = StructureData::su2();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut b1 = vec![0.0; 3];
        let mut b2 = vec![0.0; 3];
        let mut acc = vec![0.0; 3];
        for _ in 0..100 {
            let x = randn(&mut rng, 3);
            let y = randn(&mut rng, 3);
            let z = randn(&mut rng, 3);
            acc.fill(0.0);
            for (p, q, r) in [(&x, &y, &z), (&y, &z, &x), (&z, &x, &y)] {
                sd.bracket_into(p, q, &mut b1);
                sd.bracket_into(&b1, r, &mut b2);
                for k in 0..3 {
                    acc[k] += b2[k];
                }
            }
            assert!(crate::util::max_abs(&acc) <= 1e-12);
        }
    }

    #[test]
    fn adjoint_rep_action_is_bracket() {
        let sd = StructureData::su2();
        let rep = Representation::adjoint(&sd);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..20 {
            let x = randn(&mut rng, 3);
            let v = randn(&mut rng, 3);
            let mut acted = vec![0.0; 3];
            let mut br = vec![0.0; 3];
            rep.act_into(&x, &v, &mut acted);
            sd.bracket_into(&x, &v, &mut br);
            for k in 0..3 {
                assert_relative_eq!(acted[k], br[k], epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn action_is_skew_adjoint() {
        let sd = StructureData::su2();
        let rep = Representation::adjoint(&sd);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut acted = vec![0.0; 3];
        for _ in 0..50 {
            let x = randn(&mut rng, 3);
            let v = randn(&mut rng, 3);
            rep.act_into(&x, &v, &mut acted);
            assert!(rep.inner_v(&acted, &v).abs() <= 1e-12);
        }
        // zero action
        rep.act_into(&[0.0; 3], &[1.0, 2.0, 3.0], &mut acted);
        assert_eq!(acted, vec![0.0; 3]);
    }

    #[test]
    fn odot_defining_property_and_special_cases() {
        let sd = StructureData::su2();
        let rep = Representation::adjoint(&sd);
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let mut acted = vec![0.0; 3];
        for _ in 0..100 {
            let x = randn(&mut rng, 3);
            let u1 = randn(&mut rng, 3);
            let u2 = randn(&mut rng, 3);
            let z = rep.odot(&sd, &u1, &u2).unwrap();
            rep.act_into(&x, &u1, &mut acted);
            let lhs = sd.killing_inner_raw(&x, &z.coeffs);
            let rhs = rep.inner_v(&acted, &u2);
            assert!((lhs - rhs).abs() <= 1e-12);
        }
        // odot(u, u) = 0 by skew-adjointness
        let u = randn(&mut rng, 3);
        let z = rep.odot(&sd, &u, &u).unwrap();
        assert!(crate::util::max_abs(&z.coeffs) <= 1e-14);
        // adjoint representation: odot = bracket
        let u1 = randn(&mut rng, 3);
        let u2 = randn(&mut rng, 3);
        let z = rep.odot(&sd, &u1, &u2).unwrap();
        let mut br = vec![0.0; 3];
        sd.bracket_into(&u1, &u2, &mut br);
        for k in 0..3 {
            assert_relative_eq!(z.coeffs[k], br[k], epsilon = 1e-12);
        }
    }

    #[test]
    fn group_exp_identity_inverse_and_ad_orthogonality() {
        let sd = StructureData::su2();
        let rep = Representation::adjoint(&sd);
        let g0 = group_exp(&sd, &rep, &[0.0; 3]);
        assert!((g0.matrix.clone() - DMatrix::<f64>::identity(3, 3)).amax() < 1e-15);
        assert!((g0.adjoint.clone() - DMatrix::<f64>::identity(3, 3)).amax() < 1e-15);

        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let x = randn(&mut rng, 3);
            let neg: Vec<f64> = x.iter().map(|v| -v).collect();
            let g = group_exp(&sd, &rep, &x);
            let ginv = group_exp(&sd, &rep, &neg);
            let prod = &g.matrix * &ginv.matrix;
            assert!((prod - DMatrix::<f64>::identity(3, 3)).amax() <= 1e-12);
            // Ad^T K Ad = K
            let k = sd.killing();
            let resid = g.adjoint.transpose() * k * &g.adjoint - k;
            assert!(resid.amax() <= 1e-10);
        }
    }

    #[test]
    fn from_table_roundtrip_and_corruption_detected() {
        let table = "\
# su(2): [e_a, e_b] = eps_abk e_k
0 1 2 1.0
1 2 0 1.0
2 0 1 1.0
";
        let sd = StructureData::from_table(3, table).unwrap();
        assert_relative_eq!(sd.killing()[(0, 0)], 2.0, epsilon = 1e-14);
        // corrupt the table: explicit non-antisymmetric pair must be rejected
        let bad = "0 1 2 1.0\n1 0 2 1.0\n1 2 0 1.0\n2 0 1 1.0\n";
        assert!(StructureData::from_table(3, bad).is_err());
        // and a Jacobi-breaking extra constant as well
        let bad2 = "0 1 2 1.0\n1 2 0 1.0\n2 0 1 1.0\n0 1 0 0.3\n";
        assert!(StructureData::from_table(3, bad2).is_err());
    }
}
