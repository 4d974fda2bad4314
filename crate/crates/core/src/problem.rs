//! Problem data for the two-stage stochastic zero-sum game family.
//!
//! First stage: `F₁(x₁, y₁) = ‖x₁‖₁ − ½x₁ᵀQ₁x₁ + d₁ᵀx₁ + x₁ᵀO₁y₁ − ½y₁ᵀS₁y₁ − t₁ᵀy₁`
//! over `x₁ ∈ [lb, ub]^{n1}`, `y₁ ∈ ℝ^{m1}`.
//!
//! Second stage, per scenario `ξ`:
//! `F₂(x₂, y₂) = ½x₂ᵀQ₂x₂ + d₂ᵀx₂ + x₂ᵀO₂y₂ − ½y₂ᵀS₂y₂ − t₂ᵀy₂`
//! subject to `T x₁ + W x₂ ≤ h` and `A y₁ + B y₂ ≤ c`.
//!
//! Every scenario matrix is a fixed base plus a `noise_scale`-weighted
//! perturbation read from a uniform `[−1, 1]` draw `ξ`. The layout of `ξ`
//! is, in order:
//!
//! 1. upper triangle of `Q̃₂` (row-major, diagonal included), mirrored
//! 2. upper triangle of `S̃₂`, same convention
//! 3. `T̃` (`l2×n1`), `Ã` (`s2×m1`), `d̃₂`, `t̃₂`, `Õ₂` (`n2×m2`), `h̃`, `c̃`,
//!    matrices row-major.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{cholesky_check, min_singular_value, DenseMatrix};
use crate::rng::{UniformStream, TAG_INSTANCE, TAG_SCENARIO};

/// Draws per scenario index before a non-PD `Q₂`/`S₂` becomes an error.
pub const MAX_SCENARIO_ATTEMPTS: usize = 100;

/// Weight of `Q₁ = 0.1·I`.
const Q1_SCALE: f64 = 0.1;
const DEFAULT_NOISE_SCALE: f64 = 0.1;
const BASE_RHS: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Dimensions {
    pub n1: usize,
    pub m1: usize,
    pub n2: usize,
    pub m2: usize,
    pub l2: usize,
    pub s2: usize,
}

impl Default for Dimensions {
    fn default() -> Self {
        Self {
            n1: 3,
            m1: 2,
            n2: 4,
            m2: 3,
            l2: 2,
            s2: 2,
        }
    }
}

impl Dimensions {
    pub fn validate(&self) -> Result<()> {
        let all = [self.n1, self.m1, self.n2, self.m2, self.l2, self.s2];
        if all.contains(&0) {
            return Err(Error::InvalidDims(format!("all dimensions must be positive: {self:?}")));
        }
        // W = (I, 0) and B = (I, 0) need at least as many columns as rows
        if self.l2 > self.n2 || self.s2 > self.m2 {
            return Err(Error::InvalidDims(format!(
                "need l2 <= n2 and s2 <= m2 for W = (I, 0), B = (I, 0): {self:?}"
            )));
        }
        Ok(())
    }

    /// Length of the random vector `ξ`.
    pub fn xi_dim(&self) -> usize {
        let Self { n1, m1, n2, m2, l2, s2 } = *self;
        n2 * (n2 + 1) / 2 + m2 * (m2 + 1) / 2 + l2 * n1 + s2 * m1 + n2 + m2 + n2 * m2 + l2 + s2
    }

    /// Length of the second-stage KKT vector `μ = (x₂, y₂, π_x, π_y)`.
    pub fn kkt_dim(&self) -> usize {
        self.n2 + self.m2 + self.l2 + self.s2
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemInstance {
    pub dims: Dimensions,
    pub tau: f64,
    pub lb: f64,
    pub ub: f64,
    pub noise_scale: f64,
    pub seed: u64,
    pub q1: DenseMatrix,
    pub s1: DenseMatrix,
    pub o1: DenseMatrix,
    pub d1: Vec<f64>,
    pub t1: Vec<f64>,
    pub qbar2: DenseMatrix,
    pub sbar2: DenseMatrix,
    pub obar2: DenseMatrix,
    pub tbar: DenseMatrix,
    pub abar: DenseMatrix,
    pub dbar2: Vec<f64>,
    pub tbar2: Vec<f64>,
    pub hbar: Vec<f64>,
    pub cbar: Vec<f64>,
    /// Lower bound on the strong convexity/concavity modulus of `F₂` over
    /// the attached scenarios; zero until a scenario set validates it.
    pub sigma_lb: f64,
}

fn uniform_matrix(rng: &mut UniformStream, rows: usize, cols: usize) -> DenseMatrix {
    DenseMatrix::new(rows, cols, rng.uniform_vec(rows * cols, 0.0, 1.0))
        .expect("uniform draws are finite")
}

/// Generates first-stage data and the fixed second-stage bases.
///
/// Random entries are uniform on `[0, 1]`, drawn from the instance stream in
/// the order `O₁, d₁, t₁, Ō₂, T̄, Ā, d̄₂, t̄₂`.
pub fn generate_instance(
    dims: Dimensions,
    tau: f64,
    lb: f64,
    ub: f64,
    seed: u64,
) -> Result<ProblemInstance> {
    dims.validate()?;
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(Error::InvalidArgument(format!("tau must be positive, got {tau}")));
    }
    if !(lb < ub && lb.is_finite() && ub.is_finite()) {
        return Err(Error::InvalidArgument(format!("need lb < ub, got [{lb}, {ub}]")));
    }
    let Dimensions { n1, m1, n2, m2, l2, s2 } = dims;
    let mut rng = UniformStream::from_path(seed, &[TAG_INSTANCE]);

    let o1 = uniform_matrix(&mut rng, n1, m1);
    let d1 = rng.uniform_vec(n1, 0.0, 1.0);
    let t1 = rng.uniform_vec(m1, 0.0, 1.0);
    let obar2 = uniform_matrix(&mut rng, n2, m2);
    let tbar = uniform_matrix(&mut rng, l2, n1);
    let abar = uniform_matrix(&mut rng, s2, m1);
    let dbar2 = rng.uniform_vec(n2, 0.0, 1.0);
    let tbar2 = rng.uniform_vec(m2, 0.0, 1.0);

    Ok(ProblemInstance {
        dims,
        tau,
        lb,
        ub,
        noise_scale: DEFAULT_NOISE_SCALE,
        seed,
        q1: DenseMatrix::identity(n1).scaled(Q1_SCALE),
        s1: DenseMatrix::identity(m1),
        o1,
        d1,
        t1,
        qbar2: DenseMatrix::from_diag(&(1..=n2).map(|i| i as f64).collect::<Vec<_>>()),
        sbar2: DenseMatrix::identity(m2),
        obar2,
        tbar,
        abar,
        dbar2,
        tbar2,
        hbar: vec![BASE_RHS; l2],
        cbar: vec![BASE_RHS; s2],
        sigma_lb: 0.0,
    })
}

/// One realized second-stage datum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub q2: DenseMatrix,
    pub s2: DenseMatrix,
    pub o2: DenseMatrix,
    pub t_mat: DenseMatrix,
    pub a_mat: DenseMatrix,
    pub w_mat: DenseMatrix,
    pub b_mat: DenseMatrix,
    pub d2: Vec<f64>,
    pub t2: Vec<f64>,
    pub h: Vec<f64>,
    pub c: Vec<f64>,
    pub xi: Vec<f64>,
    /// Rejected (non-PD) draws that preceded this one.
    #[serde(default)]
    pub rejected_draws: usize,
}

/// Reads a symmetric matrix from the upper triangle stored row-major.
fn symmetric_from_upper(n: usize, upper: &[f64]) -> DenseMatrix {
    debug_assert_eq!(upper.len(), n * (n + 1) / 2);
    let mut m = DenseMatrix::zeros(n, n);
    let mut it = upper.iter();
    for i in 0..n {
        for j in i..n {
            let v = *it.next().unwrap();
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    m
}

impl Scenario {
    /// Assembles the scenario for a given `ξ`; does not check definiteness.
    pub fn from_xi(inst: &ProblemInstance, xi: &[f64]) -> Result<Self> {
        let dims = inst.dims;
        if xi.len() != dims.xi_dim() {
            return Err(Error::DimensionMismatch(format!(
                "xi has length {}, expected {}",
                xi.len(),
                dims.xi_dim()
            )));
        }
        let Dimensions { n1, m1, n2, m2, l2, s2 } = dims;
        let mut rest = xi;
        let mut take = |k: usize| {
            let (head, tail) = rest.split_at(k);
            rest = tail;
            head
        };
        let q_tilde = symmetric_from_upper(n2, take(n2 * (n2 + 1) / 2));
        let s_tilde = symmetric_from_upper(m2, take(m2 * (m2 + 1) / 2));
        let t_tilde = DenseMatrix::new(l2, n1, take(l2 * n1).to_vec())?;
        let a_tilde = DenseMatrix::new(s2, m1, take(s2 * m1).to_vec())?;
        let d_tilde = take(n2);
        let t2_tilde = take(m2);
        let o_tilde = DenseMatrix::new(n2, m2, take(n2 * m2).to_vec())?;
        let h_tilde = take(l2);
        let c_tilde = take(s2);

        let eps = inst.noise_scale;
        let perturb = |base: &[f64], noise: &[f64]| -> Vec<f64> {
            base.iter().zip(noise).map(|(b, n)| b + eps * n).collect()
        };
        Ok(Self {
            q2: inst.qbar2.scaled(inst.tau).add_scaled(eps, &q_tilde),
            s2: inst.sbar2.scaled(inst.tau).add_scaled(eps, &s_tilde),
            o2: inst.obar2.add_scaled(eps, &o_tilde),
            t_mat: inst.tbar.add_scaled(eps, &t_tilde),
            a_mat: inst.abar.add_scaled(eps, &a_tilde),
            w_mat: DenseMatrix::identity_padded(l2, n2),
            b_mat: DenseMatrix::identity_padded(s2, m2),
            d2: perturb(&inst.dbar2, d_tilde),
            t2: perturb(&inst.tbar2, t2_tilde),
            h: perturb(&inst.hbar, h_tilde),
            c: perturb(&inst.cbar, c_tilde),
            xi: xi.to_vec(),
            rejected_draws: 0,
        })
    }

    /// Both `Q₂` and `S₂` pass the Cholesky test.
    pub fn is_positive_definite(&self) -> Result<bool> {
        Ok(cholesky_check(&self.q2)?.pd && cholesky_check(&self.s2)?.pd)
    }

    pub fn n2(&self) -> usize {
        self.q2.rows()
    }

    pub fn m2(&self) -> usize {
        self.s2.rows()
    }

    pub fn l2(&self) -> usize {
        self.w_mat.rows()
    }

    pub fn s2_rows(&self) -> usize {
        self.b_mat.rows()
    }

    pub fn kkt_dim(&self) -> usize {
        self.n2() + self.m2() + self.l2() + self.s2_rows()
    }
}

/// Draws `n` scenarios, resampling any index whose `Q₂` or `S₂` is not
/// positive definite (up to [`MAX_SCENARIO_ATTEMPTS`] draws).
///
/// Draw `a` of index `i` uses the stream keyed by `(seed, i, a)`, so the
/// first `k` scenarios of a larger sample equal a sample of size `k`.
pub fn sample_scenarios(inst: &ProblemInstance, n: usize, seed: u64) -> Result<Vec<Scenario>> {
    (0..n).map(|i| sample_scenario(inst, i, seed)).collect()
}

pub fn sample_scenario(inst: &ProblemInstance, index: usize, seed: u64) -> Result<Scenario> {
    let xi_dim = inst.dims.xi_dim();
    for attempt in 0..MAX_SCENARIO_ATTEMPTS {
        let mut rng =
            UniformStream::from_path(seed, &[TAG_SCENARIO, index as u64, attempt as u64]);
        let xi = rng.uniform_vec(xi_dim, -1.0, 1.0);
        let mut scn = Scenario::from_xi(inst, &xi)?;
        if scn.is_positive_definite()? {
            scn.rejected_draws = attempt;
            return Ok(scn);
        }
    }
    Err(Error::IndefiniteScenario {
        index,
        attempts: MAX_SCENARIO_ATTEMPTS,
    })
}

/// `min_i min(λ_min(Q₂ⁱ), λ_min(S₂ⁱ))`; for SPD matrices the smallest
/// singular value is the smallest eigenvalue.
pub fn strong_modulus(scenarios: &[Scenario]) -> f64 {
    scenarios
        .iter()
        .map(|s| min_singular_value(&s.q2).min(min_singular_value(&s.s2)))
        .fold(f64::INFINITY, f64::min)
}

/// Instance plus a fixed, ordered scenario sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SaaProblem {
    pub instance: ProblemInstance,
    pub scenarios: Vec<Scenario>,
    /// Seed of the scenario streams.
    pub seed: u64,
}

impl SaaProblem {
    /// Validates the scenarios and records their modulus in `sigma_lb`.
    pub fn new(mut instance: ProblemInstance, scenarios: Vec<Scenario>, seed: u64) -> Result<Self> {
        if scenarios.is_empty() {
            return Err(Error::InvalidArgument("scenario list is empty".into()));
        }
        let dims = instance.dims;
        for (i, s) in scenarios.iter().enumerate() {
            let shapes_ok = s.q2.rows() == dims.n2
                && s.s2.rows() == dims.m2
                && (s.o2.rows(), s.o2.cols()) == (dims.n2, dims.m2)
                && (s.t_mat.rows(), s.t_mat.cols()) == (dims.l2, dims.n1)
                && (s.a_mat.rows(), s.a_mat.cols()) == (dims.s2, dims.m1)
                && (s.w_mat.rows(), s.w_mat.cols()) == (dims.l2, dims.n2)
                && (s.b_mat.rows(), s.b_mat.cols()) == (dims.s2, dims.m2)
                && s.d2.len() == dims.n2
                && s.t2.len() == dims.m2
                && s.h.len() == dims.l2
                && s.c.len() == dims.s2;
            if !shapes_ok {
                return Err(Error::DimensionMismatch(format!(
                    "scenario {i} does not match {dims:?}"
                )));
            }
            if !s.is_positive_definite()? {
                return Err(Error::IndefiniteScenario { index: i, attempts: 1 });
            }
        }
        let sigma = strong_modulus(&scenarios);
        if !(sigma > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "strong convexity modulus {sigma} is not positive"
            )));
        }
        instance.sigma_lb = sigma;
        Ok(Self {
            instance,
            scenarios,
            seed,
        })
    }

    /// Generates an instance and `n` scenarios.
    pub fn generate(
        dims: Dimensions,
        tau: f64,
        lb: f64,
        ub: f64,
        n: usize,
        instance_seed: u64,
        scenario_seed: u64,
    ) -> Result<Self> {
        let inst = generate_instance(dims, tau, lb, ub, instance_seed)?;
        let scenarios = sample_scenarios(&inst, n, scenario_seed)?;
        Self::new(inst, scenarios, scenario_seed)
    }

    pub fn n(&self) -> usize {
        self.scenarios.len()
    }

    /// Copy restricted to the first `n` scenarios.
    pub fn prefix(&self, n: usize) -> Result<Self> {
        Self::new(
            self.instance.clone(),
            self.scenarios[..n.min(self.scenarios.len())].to_vec(),
            self.seed,
        )
    }

    /// Same data with a different first-stage box.
    pub fn with_box(&self, lb: f64, ub: f64) -> Result<Self> {
        if !(lb < ub) {
            return Err(Error::InvalidArgument(format!("need lb < ub, got [{lb}, {ub}]")));
        }
        let mut p = self.clone();
        p.instance.lb = lb;
        p.instance.ub = ub;
        Ok(p)
    }

    /// Scenarios that needed at least one redraw.
    pub fn resampled_count(&self) -> usize {
        self.scenarios.iter().filter(|s| s.rejected_draws > 0).count()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Parses and re-validates a serialized problem.
    pub fn from_json(text: &str) -> Result<Self> {
        let raw: SaaProblem = serde_json::from_str(text)?;
        raw.instance.dims.validate()?;
        Self::new(raw.instance, raw.scenarios, raw.seed)
    }
}
