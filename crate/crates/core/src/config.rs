use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How the E-step obtains the posterior covariance of `x`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CovarianceEngine {
    /// Inverts the full `N·L × N·L` posterior precision with a Cholesky factorization.
    Dense,
    /// Works in the eigenbasis of `B`, where the problem splits into `L`
    /// independent `M × M` systems. Only the diagonal `L × L` blocks of
    /// `Σ_x` are formed.
    #[default]
    Spectral,
}

/// Hyperparameters of the three-layer prior plus convergence controls.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    /// Gamma shape of the α layer.
    pub a: f64,
    /// Fixed Gamma rate of α for blocks outside the prior-knowledge set.
    pub b_small: f64,
    /// Initial ⟨b_i⟩ for blocks inside the prior-knowledge set.
    pub b_init_known: f64,
    /// Shape of the Gamma hyperprior on b_i.
    pub p_shape: f64,
    /// Rate of the Gamma hyperprior on b_i.
    pub q_rate: f64,
    /// Stop once `‖μ_x^{t-1} − μ_x^t‖_∞ < gamma_tol`.
    pub gamma_tol: f64,
    pub max_iters: usize,
    /// When false, B stays at the identity.
    #[serde(rename = "learn_B")]
    pub learn_b: bool,
    /// Rescale each learned `B` to trace `L`. Off by default, so the scale of
    /// `B` (and with it that of `⟨α⟩`) is left free.
    #[serde(rename = "normalize_B")]
    pub normalize_b: bool,
    /// When false, the prior-knowledge set is treated as empty.
    pub use_prior_knowledge: bool,
    /// Diagonal regularization added before inversions.
    pub spd_jitter: f64,
    pub engine: CovarianceEngine,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            a: 1e-4,
            b_small: 1e-4,
            b_init_known: 1.0,
            p_shape: 1.0,
            q_rate: 0.1,
            gamma_tol: 1e-6,
            max_iters: 2000,
            learn_b: true,
            normalize_b: false,
            use_prior_knowledge: true,
            spd_jitter: 1e-10,
            engine: CovarianceEngine::default(),
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("a", self.a),
            ("b_small", self.b_small),
            ("b_init_known", self.b_init_known),
            ("p_shape", self.p_shape),
            ("q_rate", self.q_rate),
            ("gamma_tol", self.gamma_tol),
        ];
        for (name, value) in positive {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::config(
                    format!("solver.{name}"),
                    format!("must be a positive finite number, got {value}"),
                ));
            }
        }
        if self.gamma_tol >= 1.0 {
            return Err(Error::config("solver.gamma_tol", "must be < 1"));
        }
        if self.max_iters == 0 {
            return Err(Error::config("solver.max_iters", "must be >= 1"));
        }
        if !(self.spd_jitter.is_finite() && self.spd_jitter >= 0.0) {
            return Err(Error::config(
                "solver.spd_jitter",
                "must be a nonnegative finite number",
            ));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        let cfg = SolverConfig::default();
        cfg.validate().unwrap();
        assert_eq!(cfg.a, 1e-4);
        assert_eq!(cfg.q_rate, 0.1);
    }

    #[test]
    fn rejects_bad_fields() {
        let cfg = SolverConfig {
            gamma_tol: 1.5,
            ..Default::default()
        };
        assert!(cfg
            .validate()
            .unwrap_err()
            .to_string()
            .contains("gamma_tol"));
        let cfg = SolverConfig {
            q_rate: 0.0,
            ..Default::default()
        };
        assert!(cfg
            .validate()
            .unwrap_err()
            .to_string()
            .contains("solver.q_rate"));
        let cfg = SolverConfig {
            spd_jitter: -1.0,
            ..Default::default()
        };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn toml_keys_match_field_names() {
        let cfg: SolverConfig =
            toml::from_str("learn_B = false\nq_rate = 0.2\nengine = \"dense\"").unwrap();
        assert!(!cfg.learn_b);
        assert_eq!(cfg.q_rate, 0.2);
        assert_eq!(cfg.engine, CovarianceEngine::Dense);
        assert!(toml::from_str::<SolverConfig>("learn_b = false").is_err());
    }
}
