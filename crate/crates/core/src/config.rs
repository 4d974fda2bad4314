use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How the Jacobian-inverse bound `λ̲` feeding the inner tolerance is obtained.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LambdaMode {
    /// Running minimum over probe Jacobians: `√λ̲ = ½ · min σ_min(G)`.
    Estimated,
    /// Fixed user value of `λ̲`.
    Configured(f64),
}

/// Semi-smooth Newton settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonSettings {
    pub max_iters: usize,
    /// Armijo ratio `ρ ∈ (0, ½)` on the merit `½‖H‖²`.
    pub ls_ratio: f64,
    /// Backtracking factor `β ∈ (0, 1)`.
    pub ls_backtrack: f64,
}

impl Default for NewtonSettings {
    fn default() -> Self {
        Self {
            max_iters: 100,
            ls_ratio: 0.25,
            ls_backtrack: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    /// x-step size; `None` selects `0.1 / (1 + ‖Q₁‖ + ‖O₁‖ + ‖S₁‖)`.
    pub beta_x: Option<f64>,
    /// y-step size; `None` selects `1 / (1 + ‖Q₁‖ + ‖O₁‖ + ‖S₁‖)`, ten times
    /// the x default so that `y₁` tracks its maximizer.
    pub beta_y: Option<f64>,
    pub delta0: f64,
    pub delta_decay: f64,
    pub delta_floor: f64,
    pub lambda_lb_mode: LambdaMode,
    /// Upper cap on the inner KKT residual tolerance.
    pub newton_tol_cap: f64,
    /// Lower bound on the inner tolerance; below ~1e-14 the residual is
    /// dominated by rounding and Newton cannot make progress.
    pub newton_tol_floor: f64,
    pub max_outer_iters: usize,
    pub resval_tol: f64,
    pub ls_ratio: f64,
    pub ls_backtrack: f64,
    pub newton_max_iters: usize,
    /// Halve both step sizes when Res.val grows 10× over 50 iterations.
    pub step_halving: bool,
    /// Optional box for `y₁` (projection after the ascent step).
    pub y_box: Option<(f64, f64)>,
    /// Fan the per-scenario solves out over the rayon pool.
    pub parallel: bool,
    pub seed: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            beta_x: None,
            beta_y: None,
            delta0: 1e-2,
            delta_decay: 0.5,
            delta_floor: 1e-12,
            lambda_lb_mode: LambdaMode::Estimated,
            newton_tol_cap: 1e-6,
            newton_tol_floor: 1e-13,
            max_outer_iters: 5000,
            resval_tol: 1e-4,
            ls_ratio: 0.25,
            ls_backtrack: 0.5,
            newton_max_iters: 100,
            step_halving: true,
            y_box: None,
            parallel: true,
            seed: 0,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        for (name, beta) in [("beta_x", self.beta_x), ("beta_y", self.beta_y)] {
            if let Some(b) = beta {
                if !(b > 0.0 && b.is_finite()) {
                    return bad(format!("{name} must be positive, got {b}"));
                }
            }
        }
        if !(self.delta0 > 0.0) {
            return bad(format!("delta0 must be positive, got {}", self.delta0));
        }
        if !(self.delta_decay > 0.0 && self.delta_decay < 1.0) {
            return bad(format!("delta_decay must lie in (0, 1), got {}", self.delta_decay));
        }
        if !(self.delta_floor >= 0.0 && self.delta_floor <= self.delta0) {
            return bad(format!("delta_floor must lie in [0, delta0], got {}", self.delta_floor));
        }
        if let LambdaMode::Configured(v) = self.lambda_lb_mode {
            if !(v > 0.0 && v.is_finite()) {
                return bad(format!("configured lambda must be positive, got {v}"));
            }
        }
        if !(self.newton_tol_cap > 0.0) {
            return bad(format!("newton_tol_cap must be positive, got {}", self.newton_tol_cap));
        }
        if !(self.newton_tol_floor > 0.0 && self.newton_tol_floor <= self.newton_tol_cap) {
            return bad(format!(
                "newton_tol_floor must lie in (0, newton_tol_cap], got {}",
                self.newton_tol_floor
            ));
        }
        if !(self.resval_tol > 0.0) {
            return bad(format!("resval_tol must be positive, got {}", self.resval_tol));
        }
        if !(self.ls_ratio > 0.0 && self.ls_ratio < 0.5) {
            return bad(format!("ls_ratio must lie in (0, 1/2), got {}", self.ls_ratio));
        }
        if !(self.ls_backtrack > 0.0 && self.ls_backtrack < 1.0) {
            return bad(format!("ls_backtrack must lie in (0, 1), got {}", self.ls_backtrack));
        }
        if self.newton_max_iters == 0 {
            return bad("newton_max_iters must be positive".into());
        }
        if let Some((lo, hi)) = self.y_box {
            if !(lo < hi) {
                return bad(format!("y_box needs lo < hi, got ({lo}, {hi})"));
            }
        }
        Ok(())
    }

    pub fn newton(&self) -> NewtonSettings {
        NewtonSettings {
            max_iters: self.newton_max_iters,
            ls_ratio: self.ls_ratio,
            ls_backtrack: self.ls_backtrack,
        }
    }
}
