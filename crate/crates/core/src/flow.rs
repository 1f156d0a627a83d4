//! Explicit RK4 time integration of the gradient flow
//! d_t A_j = sum_i grad_i F_ij - u (.) grad_j u,
//! d_t u  = sum_i grad_i^2 u - 2 W'(|u|^2) u,
//! plus self-similarity residuals and equilibrium detection.
//!
//! The spatial discretization is the central-difference calculus from
//! [`crate::fields`]; because the central difference is antisymmetric,
//! the discrete right-hand side is the exact negative gradient of the
//! discrete energy, so the lattice energy is nonincreasing up to time-
//! stepping error only.

use thiserror::Error;

use crate::fields::analytic::AnalyticPair;
use crate::fields::{
    energy_density_from_parts, total_energy, ymh_operator, GaugeField, LatticeGeometry, Model,
    Potential, ScalarFieldV, YmhOperator,
};

#[derive(Debug, Error)]
pub enum FlowError {
    #[error("time step {dt} exceeds the CFL limit {limit}")]
    CflViolation { dt: f64, limit: f64 },
    #[error("non-finite field values after step {step} (t = {t})")]
    NonFinite { step: usize, t: f64 },
}

/// The pair (A, u) at a time t.
#[derive(Clone)]
pub struct FlowState {
    pub a: GaugeField,
    pub u: ScalarFieldV,
    pub t: f64,
}

/// One row of the energy history.
#[derive(Debug, Clone, Copy)]
pub struct EnergyRow {
    pub step: usize,
    pub t: f64,
    pub energy: f64,
    pub max_density: f64,
}

/// Result of an evolution: the energy history and the retained states
/// (every `keep_every`-th step, always including the first and last).
pub struct FlowRun {
    pub rows: Vec<EnergyRow>,
    pub snapshots: Vec<FlowState>,
}

/// Stability limit for the explicit scheme: dt <= h^2 / (4 n).
pub fn cfl_limit(geom: &LatticeGeometry) -> f64 {
    0.5 * geom.h * geom.h / (2.0 * geom.n as f64)
}

/// The flow right-hand side together with the derived fields F and grad u.
pub fn rhs(model: &Model, a: &GaugeField, u: &ScalarFieldV, w: &Potential) -> YmhOperator {
    ymh_operator(model, a, u, w)
}

fn advanced(
    a: &GaugeField,
    u: &ScalarFieldV,
    ka: &[f64],
    ku: &[f64],
    c: f64,
) -> (GaugeField, ScalarFieldV) {
    let mut a2 = a.clone();
    for (v, k) in a2.field.data.iter_mut().zip(ka) {
        *v += c * k;
    }
    let mut u2 = u.clone();
    for (v, k) in u2.field.data.iter_mut().zip(ku) {
        *v += c * k;
    }
    (a2, u2)
}

/// One RK4 step of length dt. Fails if dt violates the CFL limit.
pub fn step_rk4(
    model: &Model,
    state: &FlowState,
    w: &Potential,
    dt: f64,
) -> Result<FlowState, FlowError> {
    let limit = cfl_limit(state.a.geom());
    if dt > limit {
        return Err(FlowError::CflViolation { dt, limit });
    }
    let k1 = {
        let op = rhs(model, &state.a, &state.u, w);
        (op.da.data, op.du.data)
    };
    let (a2, u2) = advanced(&state.a, &state.u, &k1.0, &k1.1, 0.5 * dt);
    let k2 = {
        let op = rhs(model, &a2, &u2, w);
        (op.da.data, op.du.data)
    };
    let (a3, u3) = advanced(&state.a, &state.u, &k2.0, &k2.1, 0.5 * dt);
    let k3 = {
        let op = rhs(model, &a3, &u3, w);
        (op.da.data, op.du.data)
    };
    let (a4, u4) = advanced(&state.a, &state.u, &k3.0, &k3.1, dt);
    let k4 = {
        let op = rhs(model, &a4, &u4, w);
        (op.da.data, op.du.data)
    };
    let mut out = state.clone();
    let c = dt / 6.0;
    for (i, v) in out.a.field.data.iter_mut().enumerate() {
        *v += c * (k1.0[i] + 2.0 * k2.0[i] + 2.0 * k3.0[i] + k4.0[i]);
    }
    for (i, v) in out.u.field.data.iter_mut().enumerate() {
        *v += c * (k1.1[i] + 2.0 * k2.1[i] + 2.0 * k3.1[i] + k4.1[i]);
    }
    out.t += dt;
    Ok(out)
}

/// Evolve `steps` RK4 steps, recording the energy history and keeping
/// every `keep_every`-th state (plus the initial and final ones).
/// Aborts with an error as soon as a field value turns non-finite.
pub fn evolve(
    model: &Model,
    state0: FlowState,
    w: &Potential,
    dt: f64,
    steps: usize,
    keep_every: usize,
) -> Result<FlowRun, FlowError> {
    assert!(keep_every >= 1);
    let geom = state0.a.geom().clone();
    let mut rows = Vec::with_capacity(steps + 1);
    let mut snapshots = Vec::new();
    let mut state = state0;

    let record = |state: &FlowState, step: usize, rows: &mut Vec<EnergyRow>| {
        let op = ymh_operator(model, &state.a, &state.u, w);
        let e = energy_density_from_parts(model, &op.f, &op.gradu, &state.u, w);
        rows.push(EnergyRow {
            step,
            t: state.t,
            energy: total_energy(&geom, &e),
            max_density: crate::util::max_abs(&e),
        });
    };
    record(&state, 0, &mut rows);
    snapshots.push(state.clone());
    for s in 1..=steps {
        state = step_rk4(model, &state, w, dt)?;
        if !state.a.field.data.iter().chain(&state.u.field.data).all(|v| v.is_finite()) {
            return Err(FlowError::NonFinite { step: s, t: state.t });
        }
        record(&state, s, &mut rows);
        if s % keep_every == 0 || s == steps {
            snapshots.push(state.clone());
        }
    }
    Ok(FlowRun { rows, snapshots })
}

/// Pointwise self-similarity residuals of an analytic pair about the
/// spacetime centre (x0, t_center), for t < t_center:
/// S_i = d_t A_i + sum_k (x - x0)_k / (2 (t - T)) F_ki,
/// J   = d_t u  + sum_k (x - x0)_k / (2 (t - T)) grad_k u.
/// Returns (max_i |S_i|_K, |J|).
pub fn selfsim_residual_at(
    model: &Model,
    pair: &AnalyticPair,
    x: &[f64],
    t: f64,
    x0: &[f64],
    t_center: f64,
) -> (f64, f64) {
    assert!(t < t_center, "residuals are defined for t < t_center only");
    let dg = pair.dim_g;
    let dv = pair.dim_v;
    let denom = 2.0 * (t - t_center);
    let mut worst_s = 0.0f64;
    for i in 0..pair.n {
        let mut s = pair.dta_at(x, t, i);
        for k in 0..pair.n {
            if k == i {
                continue;
            }
            let w = (x[k] - x0[k]) / denom;
            if w == 0.0 {
                continue;
            }
            let f = pair.f_at(model, x, t, k, i);
            for c in 0..dg {
                s[c] += w * f[c];
            }
        }
        worst_s = worst_s.max(model.algebra.killing_norm(&s));
    }
    let mut j = pair.dtu_at(x, t);
    for k in 0..pair.n {
        let w = (x[k] - x0[k]) / denom;
        if w == 0.0 {
            continue;
        }
        let g = pair.grad_cov_u_at(model, x, t, k);
        for c in 0..dv {
            j[c] += w * g[c];
        }
    }
    (worst_s, model.rep.norm_v(&j))
}

/// Equilibrium test for the scalar sector of a state: the max-norm of the
/// u-equation residual, together with the A-equation residual for context.
/// The state is at (Higgs) equilibrium when the u-residual is below `tol`.
pub fn higgs_equilibrium(
    model: &Model,
    state: &FlowState,
    w: &Potential,
    tol: f64,
) -> (bool, f64, f64) {
    let (ra, ru) = crate::fields::ymhe_residual(model, &state.a, &state.u, w);
    (ru <= tol, ru, ra)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{band_limited_pair, sample};
    use approx::assert_relative_eq;
    use std::sync::Arc;

    fn geom8() -> LatticeGeometry {
        LatticeGeometry::new(5, 8, 0.8, vec![0.0; 5]).unwrap()
    }

    /// Single-generator cosine mode: A_1 = alpha cos(k x_0) e_3. On the
    /// lattice this is an exact eigenmode of the flow with decay rate
    /// mu = (sin(k h)/h)^2, so alpha(t) = alpha_0 exp(-mu t) up to RK4
    /// time error.
    fn cosine_state(geom: &LatticeGeometry, alpha: f64) -> (FlowState, f64) {
        let k = 2.0 * std::f64::consts::PI / geom.side_length();
        let mut a = GaugeField::zeros(geom, 3);
        let u = ScalarFieldV::zeros(geom, 3);
        let n = geom.n;
        let mut pos = vec![0.0; n];
        geom.for_each_site(|site, mi| {
            geom.coords_of(mi, &mut pos);
            a.field.data[site * n * 3 + 3 + 2] = alpha * (k * pos[0]).cos();
        });
        let mu = ((k * geom.h).sin() / geom.h).powi(2);
        (FlowState { a, u, t: 0.0 }, mu)
    }

    #[test]
    fn cfl_violation_is_rejected() {
        let g = geom8();
        let (state, _) = cosine_state(&g, 0.1);
        let limit = cfl_limit(&g);
        assert!(step_rk4(&Model::su2_adjoint(), &state, &Potential::Zero, 1.5 * limit).is_err());
        assert!(step_rk4(&Model::su2_adjoint(), &state, &Potential::Zero, 0.5 * limit).is_ok());
    }

    #[test]
    fn abelian_mode_decays_at_the_discrete_rate() {
        let m = Model::su2_adjoint();
        let g = geom8();
        let alpha = 0.05; // small so the bracket nonlinearity is negligible
        let (state, mu) = cosine_state(&g, alpha);
        let dt = 0.02;
        let run = evolve(&m, state, &Potential::Zero, dt, 5, 1).unwrap();
        let last = &run.snapshots.last().unwrap();
        let t = last.t;
        // probe the site at the origin, where cos = 1
        let got = last.a.comp(0, 1)[2];
        let want = alpha * (-mu * t).exp();
        assert_relative_eq!(got, want, max_relative = 1e-8);
    }

    #[test]
    fn rk4_time_error_is_fourth_order() {
        let m = Model::su2_adjoint();
        let g = geom8();
        // large amplitude so the time error is visible above roundoff
        let (state, mu) = cosine_state(&g, 1.0);
        let t_end = 0.096;
        let exact = (-mu * t_end).exp();
        let mut errs = Vec::new();
        for steps in [3usize, 6, 12] {
            let dt = t_end / steps as f64;
            let run = evolve(&m, state.clone(), &Potential::Zero, dt, steps, steps).unwrap();
            let got = run.snapshots.last().unwrap().a.comp(0, 1)[2];
            errs.push((got - exact).abs());
        }
        let r1 = errs[0] / errs[1];
        let r2 = errs[1] / errs[2];
        assert!(r1 > 12.0 && r1 < 20.0, "halving ratio {r1} (errors {errs:?})");
        assert!(r2 > 12.0 && r2 < 20.0, "halving ratio {r2} (errors {errs:?})");
    }

    #[test]
    fn energy_is_monotone_on_random_data() {
        let m = Model::su2_adjoint();
        let g = geom8();
        let pair = band_limited_pair(5, 3, 3, g.side_length(), 9, 0.4, 0.3, 6);
        let (a, u) = sample(&pair, &g, 0.0);
        let w = Potential::quartic(0.5, 0.0);
        let run = evolve(&m, FlowState { a, u, t: 0.0 }, &w, 0.02, 8, 4).unwrap();
        assert!(run.rows[0].energy > 0.0);
        for pair in run.rows.windows(2) {
            assert!(
                pair[1].energy < pair[0].energy,
                "energy rose: {} -> {}",
                pair[0].energy,
                pair[1].energy
            );
        }
        // snapshots: initial, steps 4 and 8
        assert_eq!(run.snapshots.len(), 3);
        assert_relative_eq!(run.snapshots[1].t, 0.08, epsilon = 1e-12);
    }

    #[test]
    fn vacuum_is_an_equilibrium_and_random_data_is_not() {
        let m = Model::su2_adjoint();
        let g = geom8();
        let w = Potential::quartic(0.5, 1.0);
        let mut u = ScalarFieldV::zeros(&g, 3);
        for s in 0..g.site_count() {
            u.field.site_mut(s)[0] = 1.0 / 2f64.sqrt();
        }
        let vac = FlowState { a: GaugeField::zeros(&g, 3), u, t: 0.0 };
        let (eq, ru, ra) = higgs_equilibrium(&m, &vac, &w, 1e-10);
        assert!(eq, "vacuum residuals {ru} {ra}");
        let pair = band_limited_pair(5, 3, 3, g.side_length(), 3, 0.4, 0.3, 6);
        let (a, u) = sample(&pair, &g, 0.0);
        let (eq, _, _) = higgs_equilibrium(&m, &FlowState { a, u, t: 0.0 }, &w, 1e-10);
        assert!(!eq);
    }

    #[test]
    fn self_similar_pair_in_radial_gauge_has_vanishing_residuals() {
        let m = Model::su2_adjoint();
        // radial profile (sum y_i B_i = 0 exactly), as in the fields tests
        let phi = |r2: f64| (-0.5 * r2).exp();
        let b = Arc::new(move |y: &[f64], i: usize| {
            let r2: f64 = y.iter().map(|v| v * v).sum();
            let mut v = vec![0.0; 3];
            for (k, yk) in y.iter().enumerate() {
                let sign = if k < i {
                    1.0
                } else if k > i {
                    -1.0
                } else {
                    0.0
                };
                v[(k + i) % 3] += sign * phi(r2) * yk * 0.3;
            }
            v
        }) as Arc<dyn Fn(&[f64], usize) -> Vec<f64>>;
        let prof = crate::fields::analytic::GaugedProfile {
            n: 5,
            dim_g: 3,
            b,
            db: None,
            fd_scale: 1.0,
        };
        let x0 = [0.5, 0.0, -0.2, 0.1, 0.0];
        let t_center = 1.0;
        let pair = crate::fields::make_self_similar(&prof, &x0, t_center, 3);
        let x = [1.1, -0.4, 0.3, 0.6, -0.2];
        let (s, j) = selfsim_residual_at(&m, &pair, &x, 0.4, &x0, t_center);
        assert!(s < 1e-9, "S residual {s}");
        assert_eq!(j, 0.0);
        // a non-radial profile must produce a visible residual
        let skew = crate::fields::analytic::GaugedProfile {
            n: 5,
            dim_g: 3,
            b: Arc::new(|y: &[f64], i: usize| {
                if i == 0 {
                    vec![0.4 * y[1], 0.0, 0.2]
                } else {
                    vec![0.0; 3]
                }
            }),
            db: None,
            fd_scale: 1.0,
        };
        let pair = crate::fields::make_self_similar(&skew, &x0, t_center, 3);
        let (s, _) = selfsim_residual_at(&m, &pair, &x, 0.4, &x0, t_center);
        assert!(s > 1e-3, "skew profile should not be self-similar-compatible, S = {s}");
    }
}
