//! Second-stage saddle problem and its KKT system.
//!
//! For fixed first-stage decisions `(x₁, y₁)` and scenario `ξ` the second
//! stage is `min_{x₂ : Tx₁+Wx₂≤h} max_{y₂ : Ay₁+By₂≤c} F₂(x₂, y₂)`. Its KKT
//! conditions are written as the nonsmooth system
//!
//! ```text
//! H(μ) = ( ∇ₓF₂ + Wᵀπ_x,
//!          −∇ᵧF₂ + Bᵀπ_y,
//!          min(π_x, h − Tx₁ − Wx₂),
//!          min(π_y, c − Ay₁ − By₂) ) = 0,     μ = (x₂, y₂, π_x, π_y)
//! ```
//!
//! solved by a globalized semi-smooth Newton method. A projected
//! extragradient solver on the saddle problem itself serves as an
//! independent check.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::config::NewtonSettings;
use crate::error::{Error, Result};
use crate::linalg::{dist2, dot, lu_solve, norm2, DenseMatrix};
use crate::problem::Scenario;

/// Evaluation interface for a smooth convex-concave `F₂(x₂, y₂)`.
pub trait SaddleFunction {
    fn value(&self, x2: &[f64], y2: &[f64]) -> f64;

    /// The monotone field `(∇ₓF₂, −∇ᵧF₂)`.
    fn field(&self, x2: &[f64], y2: &[f64]) -> (Vec<f64>, Vec<f64>);

    /// Jacobian of [`SaddleFunction::field`]: `[[∇²ₓₓ, ∇²ₓᵧ], [−∇²ᵧₓ, −∇²ᵧᵧ]]`.
    fn field_jacobian(&self, x2: &[f64], y2: &[f64]) -> DenseMatrix;
}

impl SaddleFunction for Scenario {
    fn value(&self, x2: &[f64], y2: &[f64]) -> f64 {
        0.5 * dot(x2, &self.q2.mul_vec(x2)) + dot(&self.d2, x2) + dot(x2, &self.o2.mul_vec(y2))
            - 0.5 * dot(y2, &self.s2.mul_vec(y2))
            - dot(&self.t2, y2)
    }

    fn field(&self, x2: &[f64], y2: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let qx = self.q2.mul_vec(x2);
        let oy = self.o2.mul_vec(y2);
        let gx = qx.iter().zip(&oy).zip(&self.d2).map(|((a, b), d)| a + b + d).collect();
        let sy = self.s2.mul_vec(y2);
        let otx = self.o2.tr_mul_vec(x2);
        let gy = sy.iter().zip(&otx).zip(&self.t2).map(|((s, o), t)| s + t - o).collect();
        (gx, gy)
    }

    fn field_jacobian(&self, _x2: &[f64], _y2: &[f64]) -> DenseMatrix {
        let (n2, m2) = (self.n2(), self.m2());
        let mut m1 = DenseMatrix::zeros(n2 + m2, n2 + m2);
        m1.set_block(0, 0, &self.q2);
        m1.set_block(0, n2, &self.o2);
        m1.set_block(n2, 0, &self.o2.transpose().scaled(-1.0));
        m1.set_block(n2, n2, &self.s2);
        m1
    }
}

/// Second-stage variable `μ = (x₂, y₂, π_x, π_y)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KktPoint {
    pub x2: Vec<f64>,
    pub y2: Vec<f64>,
    pub pi_x: Vec<f64>,
    pub pi_y: Vec<f64>,
}

impl KktPoint {
    pub fn zeros(n2: usize, m2: usize, l2: usize, s2: usize) -> Self {
        Self {
            x2: vec![0.0; n2],
            y2: vec![0.0; m2],
            pi_x: vec![0.0; l2],
            pi_y: vec![0.0; s2],
        }
    }

    /// Cold start for a scenario.
    pub fn zeros_for(scn: &Scenario) -> Self {
        Self::zeros(scn.n2(), scn.m2(), scn.l2(), scn.s2_rows())
    }

    pub fn to_vec(&self) -> Vec<f64> {
        [&self.x2[..], &self.y2, &self.pi_x, &self.pi_y].concat()
    }

    /// Splits a stacked vector using the block sizes of `like`.
    pub fn from_slice_like(v: &[f64], like: &KktPoint) -> Self {
        let (n2, m2, l2) = (like.x2.len(), like.y2.len(), like.pi_x.len());
        Self {
            x2: v[..n2].to_vec(),
            y2: v[n2..n2 + m2].to_vec(),
            pi_x: v[n2 + m2..n2 + m2 + l2].to_vec(),
            pi_y: v[n2 + m2 + l2..].to_vec(),
        }
    }

    fn check_dims(&self, scn: &Scenario) -> Result<()> {
        if self.x2.len() != scn.n2()
            || self.y2.len() != scn.m2()
            || self.pi_x.len() != scn.l2()
            || self.pi_y.len() != scn.s2_rows()
        {
            return Err(Error::DimensionMismatch(format!(
                "KKT point blocks ({}, {}, {}, {}) do not match scenario",
                self.x2.len(),
                self.y2.len(),
                self.pi_x.len(),
                self.pi_y.len()
            )));
        }
        Ok(())
    }
}

/// Right-hand sides `h − Tx₁` and `c − Ay₁`, fixed during one solve.
struct Shifted {
    hx: Vec<f64>,
    cy: Vec<f64>,
}

impl Shifted {
    fn new(scn: &Scenario, x1: &[f64], y1: &[f64]) -> Result<Self> {
        if x1.len() != scn.t_mat.cols() || y1.len() != scn.a_mat.cols() {
            return Err(Error::DimensionMismatch(format!(
                "first-stage point ({}, {}) does not match T ({} cols) / A ({} cols)",
                x1.len(),
                y1.len(),
                scn.t_mat.cols(),
                scn.a_mat.cols()
            )));
        }
        let tx = scn.t_mat.mul_vec(x1);
        let ay = scn.a_mat.mul_vec(y1);
        Ok(Self {
            hx: scn.h.iter().zip(&tx).map(|(h, t)| h - t).collect(),
            cy: scn.c.iter().zip(&ay).map(|(c, a)| c - a).collect(),
        })
    }

    fn slacks(&self, scn: &Scenario, mu: &KktPoint) -> (Vec<f64>, Vec<f64>) {
        let wx = scn.w_mat.mul_vec(&mu.x2);
        let by = scn.b_mat.mul_vec(&mu.y2);
        (
            self.hx.iter().zip(&wx).map(|(h, w)| h - w).collect(),
            self.cy.iter().zip(&by).map(|(c, b)| c - b).collect(),
        )
    }

    fn residual(&self, scn: &Scenario, mu: &KktPoint) -> Vec<f64> {
        let (mut gx, mut gy) = scn.field(&mu.x2, &mu.y2);
        for (g, w) in gx.iter_mut().zip(scn.w_mat.tr_mul_vec(&mu.pi_x)) {
            *g += w;
        }
        for (g, b) in gy.iter_mut().zip(scn.b_mat.tr_mul_vec(&mu.pi_y)) {
            *g += b;
        }
        let (sx, sy) = self.slacks(scn, mu);
        let cx = mu.pi_x.iter().zip(&sx).map(|(p, s)| p.min(*s));
        let cy = mu.pi_y.iter().zip(&sy).map(|(p, s)| p.min(*s));
        gx.into_iter().chain(gy).chain(cx).chain(cy).collect()
    }

    fn jacobian(&self, scn: &Scenario, mu: &KktPoint) -> DenseMatrix {
        let (n2, m2, l2, s2) = (scn.n2(), scn.m2(), scn.l2(), scn.s2_rows());
        let nm = n2 + m2;
        let dim = nm + l2 + s2;
        let mut g = DenseMatrix::zeros(dim, dim);
        g.set_block(0, 0, &scn.field_jacobian(&mu.x2, &mu.y2));
        // M₂ = blockdiag(W, B); top-right block is M₂ᵀ
        g.set_block(0, nm, &scn.w_mat.transpose());
        g.set_block(n2, nm + l2, &scn.b_mat.transpose());

        let (sx, sy) = self.slacks(scn, mu);
        let mut branch_rows = |r0: usize, pis: &[f64], slacks: &[f64], block: &DenseMatrix, c0: usize| {
            for (i, (pi, slack)) in pis.iter().zip(slacks).enumerate() {
                let r = r0 + i;
                // ties take the π branch
                if pi <= slack {
                    g[(r, r)] = 1.0;
                } else {
                    for (j, v) in block.row(i).iter().enumerate() {
                        g[(r, c0 + j)] = -v;
                    }
                }
            }
        };
        branch_rows(nm, &mu.pi_x, &sx, &scn.w_mat, 0);
        branch_rows(nm + l2, &mu.pi_y, &sy, &scn.b_mat, n2);
        g
    }
}

/// Stacked `H(μ, ξ)` at first-stage point `(x₁, y₁)`.
pub fn kkt_residual(mu: &KktPoint, scn: &Scenario, x1: &[f64], y1: &[f64]) -> Result<Vec<f64>> {
    mu.check_dims(scn)?;
    Ok(Shifted::new(scn, x1, y1)?.residual(scn, mu))
}

/// Element `[[M₁, M₂ᵀ], [(U − I)M₂, U]]` of the generalized Jacobian of `H`,
/// with `u_ii = 1` when `π_i ≤ slack_i` and `0` otherwise.
pub fn generalized_jacobian(
    mu: &KktPoint,
    scn: &Scenario,
    x1: &[f64],
    y1: &[f64],
) -> Result<DenseMatrix> {
    mu.check_dims(scn)?;
    Ok(Shifted::new(scn, x1, y1)?.jacobian(scn, mu))
}

/// `F₂` evaluated at the (approximate) saddle point.
pub fn second_stage_value(point: &KktPoint, scn: &Scenario) -> f64 {
    scn.value(&point.x2, &point.y2)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NewtonReport {
    pub point: KktPoint,
    pub residual_norm: f64,
    pub iterations: usize,
    pub step_sizes: Vec<f64>,
    /// `‖H(μᵗ)‖` for `t = 0..=iterations`.
    pub residual_history: Vec<f64>,
}

const MAX_BACKTRACKS: usize = 60;

/// Semi-smooth Newton on `H(μ) = 0` with an Armijo line search on
/// `θ(μ) = ½‖H(μ)‖²`: accept `α = βᵐ` for the first `m` with
/// `θ(μ + αd) ≤ (1 − 2ρα) θ(μ)`.
pub fn semismooth_newton(
    scn: &Scenario,
    x1: &[f64],
    y1: &[f64],
    mu0: &KktPoint,
    tol: f64,
    settings: &NewtonSettings,
) -> Result<NewtonReport> {
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!("tolerance must be positive, got {tol}")));
    }
    mu0.check_dims(scn)?;
    let shifted = Shifted::new(scn, x1, y1)?;

    let mut mu = mu0.clone();
    let mut h = shifted.residual(scn, &mu);
    let mut h_norm = norm2(&h);
    let mut residual_history = vec![h_norm];
    let mut step_sizes = Vec::new();

    while h_norm > tol {
        if step_sizes.len() >= settings.max_iters {
            return Err(Error::MaxIterations {
                solver: "semismooth_newton",
                iterations: step_sizes.len(),
                residual: h_norm,
            });
        }
        let g = shifted.jacobian(scn, &mu);
        let neg_h: Vec<f64> = h.iter().map(|v| -v).collect();
        let d = lu_solve(&g, &neg_h).map_err(|e| match e {
            Error::SingularMatrix { pivot, column } => Error::SingularJacobian {
                pivot,
                column,
                mu: mu.to_vec(),
            },
            other => other,
        })?;

        let theta = 0.5 * h_norm * h_norm;
        let base = mu.to_vec();
        let mut alpha = 1.0;
        let mut accepted = None;
        for _ in 0..MAX_BACKTRACKS {
            let trial: Vec<f64> = base.iter().zip(&d).map(|(m, di)| m + alpha * di).collect();
            let trial = KktPoint::from_slice_like(&trial, &mu);
            let h_trial = shifted.residual(scn, &trial);
            let n_trial = norm2(&h_trial);
            if 0.5 * n_trial * n_trial <= (1.0 - 2.0 * settings.ls_ratio * alpha) * theta {
                accepted = Some((trial, h_trial, n_trial));
                break;
            }
            alpha *= settings.ls_backtrack;
        }
        let Some((trial, h_trial, n_trial)) = accepted else {
            return Err(Error::LineSearch { residual: h_norm });
        };
        mu = trial;
        h = h_trial;
        h_norm = n_trial;
        step_sizes.push(alpha);
        residual_history.push(h_norm);
    }

    Ok(NewtonReport {
        point: mu,
        residual_norm: h_norm,
        iterations: step_sizes.len(),
        step_sizes,
        residual_history,
    })
}

pub const ORACLE_MAX_ITERS: usize = 1_000_000;

fn is_identity_padded(m: &DenseMatrix) -> bool {
    *m == DenseMatrix::identity_padded(m.rows(), m.cols())
}

/// Projected extragradient on the saddle problem, for `W = (I, 0)` and
/// `B = (I, 0)` only (the feasible sets are then coordinate boxes).
///
/// Iterates until successive iterates are within `tol` and the recovered
/// KKT point has `‖H‖ ≤ 10·tol`. Multipliers are read off the stationarity
/// residual of the bounded coordinates, clipped at zero.
pub fn extragradient_oracle(scn: &Scenario, x1: &[f64], y1: &[f64], tol: f64) -> Result<KktPoint> {
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!("tolerance must be positive, got {tol}")));
    }
    if !is_identity_padded(&scn.w_mat) || !is_identity_padded(&scn.b_mat) {
        return Err(Error::UnsupportedStructure);
    }
    let shifted = Shifted::new(scn, x1, y1)?;
    let (n2, m2) = (scn.n2(), scn.m2());

    let project = |x: &mut [f64], y: &mut [f64]| {
        for (xi, ub) in x.iter_mut().zip(&shifted.hx) {
            *xi = xi.min(*ub);
        }
        for (yi, ub) in y.iter_mut().zip(&shifted.cy) {
            *yi = yi.min(*ub);
        }
    };
    let recover = |x: &[f64], y: &[f64]| -> KktPoint {
        let (gx, gy) = scn.field(x, y);
        KktPoint {
            x2: x.to_vec(),
            y2: y.to_vec(),
            pi_x: gx[..shifted.hx.len()].iter().map(|g| (-g).max(0.0)).collect(),
            pi_y: gy[..shifted.cy.len()].iter().map(|g| (-g).max(0.0)).collect(),
        }
    };

    let lipschitz = scn.field_jacobian(&vec![0.0; n2], &vec![0.0; m2]).spectral_norm();
    let gamma = 0.5 / lipschitz.max(f64::MIN_POSITIVE);

    let mut x = vec![0.0; n2];
    let mut y = vec![0.0; m2];
    project(&mut x, &mut y);
    let mut last_residual = f64::INFINITY;
    for _ in 0..ORACLE_MAX_ITERS {
        let (gx, gy) = scn.field(&x, &y);
        let mut xh: Vec<f64> = x.iter().zip(&gx).map(|(v, g)| v - gamma * g).collect();
        let mut yh: Vec<f64> = y.iter().zip(&gy).map(|(v, g)| v - gamma * g).collect();
        project(&mut xh, &mut yh);
        let (gxh, gyh) = scn.field(&xh, &yh);
        let mut xn: Vec<f64> = x.iter().zip(&gxh).map(|(v, g)| v - gamma * g).collect();
        let mut yn: Vec<f64> = y.iter().zip(&gyh).map(|(v, g)| v - gamma * g).collect();
        project(&mut xn, &mut yn);

        let step = (dist2(&xn, &x).powi(2) + dist2(&yn, &y).powi(2)).sqrt();
        x = xn;
        y = yn;
        if step <= tol {
            let point = recover(&x, &y);
            last_residual = norm2(&shifted.residual(scn, &point));
            if last_residual <= 10.0 * tol {
                return Ok(point);
            }
        }
    }
    Err(Error::MaxIterations {
        solver: "extragradient_oracle",
        iterations: ORACLE_MAX_ITERS,
        residual: last_residual,
    })
}

/// One line of the Newton diagnostics log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NewtonLogEntry {
    pub scenario: usize,
    pub iterations: usize,
    pub residual: f64,
}

impl NewtonLogEntry {
    pub fn from_report(scenario: usize, report: &NewtonReport) -> Self {
        Self {
            scenario,
            iterations: report.iterations,
            residual: report.residual_norm,
        }
    }
}

/// Writes one JSON object per line.
pub fn write_newton_log<W: Write>(mut out: W, entries: &[NewtonLogEntry]) -> Result<()> {
    for e in entries {
        serde_json::to_writer(&mut out, e)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}


#[cfg(test)]
mod tests {
    use super::toy::{point, scenario};
    use super::*;
    use crate::linalg::min_singular_value;
    use crate::problem::{generate_instance, sample_scenarios, Dimensions};
    use crate::rng::UniformStream;

    const ORIGIN: [f64; 1] = [0.0];

    #[test]
    fn residual_vanishes_for_zero_data() {
        let z = DenseMatrix::zeros;
        let scn = Scenario {
            q2: z(2, 2),
            s2: z(2, 2),
            o2: z(2, 2),
            t_mat: z(1, 1),
            a_mat: z(1, 1),
            w_mat: DenseMatrix::identity_padded(1, 2),
            b_mat: DenseMatrix::identity_padded(1, 2),
            d2: vec![0.0; 2],
            t2: vec![0.0; 2],
            h: vec![0.0],
            c: vec![0.0],
            xi: vec![],
            rejected_draws: 0,
        };
        let mu = KktPoint::zeros_for(&scn);
        let h = kkt_residual(&mu, &scn, &ORIGIN, &ORIGIN).unwrap();
        assert_eq!(h, vec![0.0; 6]);
        assert_eq!(second_stage_value(&mu, &scn), 0.0);
    }

    #[test]
    fn toy_residual_at_known_solutions() {
        let h = kkt_residual(&point(0.1, 0.0, 0.9, 0.0), &scenario(0.1, 0.1), &ORIGIN, &ORIGIN)
            .unwrap();
        assert!(norm2(&h) < 1e-15, "{h:?}");
        // inactive bound: unconstrained stationary point, min(0, 9) = 0
        let h = kkt_residual(&point(1.0, 0.0, 0.0, 0.0), &scenario(10.0, 0.1), &ORIGIN, &ORIGIN)
            .unwrap();
        assert_eq!(h, vec![0.0; 4]);
    }

    #[test]
    fn toy_jacobian_branches() {
        let g = generalized_jacobian(&point(0.1, 0.0, 0.9, 0.0), &scenario(0.1, 0.1), &ORIGIN, &ORIGIN)
            .unwrap();
        // π_x = 0.9 > slack 0: slack branch, row (−W, 0)
        assert_eq!(g.row(2), &[-1.0, 0.0, 0.0, 0.0]);
        // π_y = 0 ≤ slack 0.1: π branch
        assert_eq!(g.row(3), &[0.0, 0.0, 0.0, 1.0]);
        assert_eq!(g.row(0), &[1.0, 0.0, 1.0, 0.0]);
        assert_eq!(g.row(1), &[0.0, 1.0, 0.0, 1.0]);
    }

    #[test]
    fn inactive_constraints_give_identity_u() {
        let g = generalized_jacobian(&point(1.0, 0.0, 0.0, 0.0), &scenario(10.0, 10.0), &ORIGIN, &ORIGIN)
            .unwrap();
        assert_eq!(g.row(2), &[0.0, 0.0, 1.0, 0.0]);
        assert_eq!(g.row(3), &[0.0, 0.0, 0.0, 1.0]);
    }

    #[test]
    fn tie_takes_pi_branch() {
        // x₂ = 0.1 makes the slack 0 and π_x = 0: tie
        let g = generalized_jacobian(&point(0.1, 0.0, 0.0, 0.0), &scenario(0.1, 0.1), &ORIGIN, &ORIGIN)
            .unwrap();
        assert_eq!(g.row(2), &[0.0, 0.0, 1.0, 0.0]);
    }

    #[test]
    fn toy_newton_from_cold_start() {
        let r = semismooth_newton(
            &scenario(0.1, 0.1),
            &ORIGIN,
            &ORIGIN,
            &point(0.0, 0.0, 0.0, 0.0),
            1e-12,
            &NewtonSettings::default(),
        )
        .unwrap();
        let expect = [0.1, 0.0, 0.9, 0.0];
        for (a, b) in r.point.to_vec().iter().zip(expect) {
            assert!((a - b).abs() < 1e-12, "{:?}", r.point);
        }
        assert_eq!(r.residual_history.len(), r.iterations + 1);
        assert_eq!(r.step_sizes.len(), r.iterations);
    }

    #[test]
    fn newton_at_solution_does_nothing() {
        let sol = point(0.1, 0.0, 0.9, 0.0);
        let r = semismooth_newton(&scenario(0.1, 0.1), &ORIGIN, &ORIGIN, &sol, 1e-12, &NewtonSettings::default())
            .unwrap();
        assert_eq!(r.iterations, 0);
        assert_eq!(r.residual_history.len(), 1);
        assert!(r.residual_history[0] <= 1e-12);
        assert_eq!(r.point, sol);
    }

    #[test]
    fn newton_rejects_bad_input() {
        let scn = scenario(0.1, 0.1);
        let mu = point(0.0, 0.0, 0.0, 0.0);
        let s = NewtonSettings::default();
        assert!(semismooth_newton(&scn, &ORIGIN, &ORIGIN, &mu, 0.0, &s).is_err());
        assert!(semismooth_newton(&scn, &[0.0, 0.0], &ORIGIN, &mu, 1e-8, &s).is_err());
        let short = KktPoint::zeros(1, 1, 1, 0);
        assert!(matches!(
            semismooth_newton(&scn, &ORIGIN, &ORIGIN, &short, 1e-8, &s),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn newton_reports_iteration_cap() {
        let s = NewtonSettings {
            max_iters: 0,
            ..NewtonSettings::default()
        };
        let err = semismooth_newton(&scenario(0.1, 0.1), &ORIGIN, &ORIGIN, &point(0.0, 0.0, 0.0, 0.0), 1e-12, &s)
            .unwrap_err();
        assert!(matches!(err, Error::MaxIterations { iterations: 0, .. }));
    }

    #[test]
    fn newton_attaches_iterate_to_singular_jacobian() {
        let mut scn = scenario(0.1, 0.1);
        scn.q2 = DenseMatrix::zeros(1, 1);
        let err = semismooth_newton(&scn, &ORIGIN, &ORIGIN, &point(0.0, 0.0, 0.0, 0.0), 1e-12, &NewtonSettings::default())
            .unwrap_err();
        match err {
            Error::SingularJacobian { mu, .. } => assert_eq!(mu, vec![0.0; 4]),
            e => panic!("unexpected {e:?}"),
        }
    }

    #[test]
    fn oracle_solves_toy() {
        let p = extragradient_oracle(&scenario(0.1, 0.1), &ORIGIN, &ORIGIN, 1e-10).unwrap();
        let expect = [0.1, 0.0, 0.9, 0.0];
        for (a, b) in p.to_vec().iter().zip(expect) {
            assert!((a - b).abs() < 1e-9, "{p:?}");
        }
    }

    #[test]
    fn oracle_refuses_general_structure() {
        let mut scn = scenario(0.1, 0.1);
        scn.w_mat = DenseMatrix::from_rows(&[[2.0]]).unwrap();
        assert!(matches!(
            extragradient_oracle(&scn, &ORIGIN, &ORIGIN, 1e-8),
            Err(Error::UnsupportedStructure)
        ));
    }

    #[test]
    fn toy_value() {
        let v = second_stage_value(&point(0.1, 0.0, 0.9, 0.0), &scenario(0.1, 0.1));
        assert!((v - (-0.095)).abs() < 1e-15);
    }

    fn random_cases(n: usize, seed: u64) -> Vec<(Scenario, Vec<f64>, Vec<f64>)> {
        let inst = generate_instance(Dimensions::default(), 0.5, -10.0, 10.0, seed).unwrap();
        let scns = sample_scenarios(&inst, n, seed + 1).unwrap();
        let mut rng = UniformStream::new(seed + 2);
        scns.into_iter()
            .map(|s| (s, rng.uniform_vec(3, -1.0, 1.0), rng.uniform_vec(2, -1.0, 1.0)))
            .collect()
    }

    #[test]
    fn unconstrained_interior_matches_block_solve() {
        // loosen the bounds so no constraint binds, then solve the linear saddle system
        for (mut scn, x1, y1) in random_cases(10, 40) {
            scn.h = vec![1e3; 2];
            scn.c = vec![1e3; 2];
            let m1 = scn.field_jacobian(&[0.0; 4], &[0.0; 3]);
            let rhs: Vec<f64> = scn.d2.iter().chain(&scn.t2).map(|v| -v).collect();
            let z = lu_solve(&m1, &rhs).unwrap();
            let p = extragradient_oracle(&scn, &x1, &y1, 1e-10).unwrap();
            assert!(dist2(&p.x2, &z[..4]) < 1e-7 && dist2(&p.y2, &z[4..]) < 1e-7);
            assert!(p.pi_x.iter().chain(&p.pi_y).all(|&v| v.abs() < 1e-8));
        }
    }

    #[test]
    fn jacobian_is_nonsingular_at_random_points() {
        let mut rng = UniformStream::new(5);
        for (scn, x1, y1) in random_cases(20, 50) {
            for _ in 0..10 {
                let v = rng.uniform_vec(11, -2.0, 2.0);
                let mu = KktPoint::from_slice_like(&v, &KktPoint::zeros_for(&scn));
                let g = generalized_jacobian(&mu, &scn, &x1, &y1).unwrap();
                assert!(min_singular_value(&g) > 1e-6);
            }
        }
    }

    #[test]
    fn oracle_residual_within_ten_tol() {
        for (scn, x1, y1) in random_cases(10, 60) {
            let tol = 1e-9;
            let p = extragradient_oracle(&scn, &x1, &y1, tol).unwrap();
            assert!(norm2(&kkt_residual(&p, &scn, &x1, &y1).unwrap()) <= 10.0 * tol);
        }
    }

    #[test]
    fn newton_log_is_json_lines() {
        let entries = vec![
            NewtonLogEntry { scenario: 0, iterations: 3, residual: 1e-12 },
            NewtonLogEntry { scenario: 1, iterations: 2, residual: 0.0 },
        ];
        let mut buf = Vec::new();
        write_newton_log(&mut buf, &entries).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let back: Vec<NewtonLogEntry> =
            text.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
        assert_eq!(back, entries);
    }
}
