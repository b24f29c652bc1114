//! Run configuration: a single JSON document, overridable field by field.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::error::{Result, SolitonError};
use crate::picard::{
    DEFAULT_EPS, DEFAULT_MAX_ITER, DEFAULT_NODES, DEFAULT_PICARD_TOL, DEFAULT_T_MAX,
};
use crate::profile::DEFAULT_RESAMPLE;
use crate::soliton::{make_params, FirstIntegralContext, SolitonParams};

pub const SEED_EPS_ENV: &str = "SOLITON_FORGE_SEED_EPS";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Pipeline {
    #[default]
    General,
    Kahler,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub d: u32,
    pub q: f64,
    /// `Λ = 𝒞λ²`; required.
    #[serde(rename = "Lambda")]
    pub big_lambda: Option<f64>,
    /// `g` at the zero section.
    pub lambda0: f64,
    pub picard_tol: f64,
    pub max_iter: usize,
    pub rtol: f64,
    pub atol: f64,
    pub tmax_tilde: f64,
    pub nodes: usize,
    pub seed_eps: f64,
    /// Offset of the unstable-manifold seed in the reduced pipeline.
    pub kahler_eps: f64,
    pub resample: usize,
    pub pipeline: Pipeline,
    pub out: Option<PathBuf>,
    pub report: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            d: 2,
            q: -1.0,
            big_lambda: None,
            lambda0: 1.0,
            picard_tol: DEFAULT_PICARD_TOL,
            max_iter: DEFAULT_MAX_ITER,
            rtol: 1e-10,
            atol: 1e-13,
            tmax_tilde: DEFAULT_T_MAX,
            nodes: DEFAULT_NODES,
            seed_eps: DEFAULT_EPS,
            kahler_eps: 1e-4,
            resample: DEFAULT_RESAMPLE,
            pipeline: Pipeline::General,
            out: None,
            report: None,
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| SolitonError::InvalidParams(format!("config: {e}")))
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    /// Applies `SOLITON_FORGE_SEED_EPS` if set.
    pub fn apply_env(&mut self) -> Result<()> {
        if let Ok(v) = std::env::var(SEED_EPS_ENV) {
            self.seed_eps = v.trim().parse().map_err(|_| {
                SolitonError::InvalidParams(format!("{SEED_EPS_ENV}={v} is not a number"))
            })?;
        }
        Ok(())
    }

    pub fn with_lambda(&self, big_lambda: f64) -> Self {
        Self {
            big_lambda: Some(big_lambda),
            ..self.clone()
        }
    }

    /// Checks every field before any computation.
    pub fn validate(&self) -> Result<(SolitonParams, FirstIntegralContext)> {
        let p = make_params(self.d, self.q)?;
        let big = self
            .big_lambda
            .ok_or_else(|| SolitonError::InvalidParams("Λ (Lambda) is required".into()))?;
        let positive = [
            ("Lambda", big),
            ("lambda0", self.lambda0),
            ("picard_tol", self.picard_tol),
            ("rtol", self.rtol),
            ("atol", self.atol),
            ("tmax_tilde", self.tmax_tilde),
            ("seed_eps", self.seed_eps),
            ("kahler_eps", self.kahler_eps),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(SolitonError::InvalidParams(format!(
                    "{name} = {v} must be positive"
                )));
            }
        }
        if self.nodes < 8 {
            return Err(SolitonError::InvalidParams(
                "nodes must be at least 8".into(),
            ));
        }
        if self.seed_eps >= 0.1 {
            return Err(SolitonError::InvalidParams(
                "seed_eps must be below 0.1".into(),
            ));
        }
        if self.kahler_eps > 1e-4 {
            return Err(SolitonError::InvalidParams(
                "kahler_eps must be at most 1e-4".into(),
            ));
        }
        if self.pipeline == Pipeline::Kahler && p.q() != -1.0 {
            return Err(SolitonError::InvalidParams(format!(
                "the Kähler pipeline needs q = -1 (canonical bundle), got q = {}",
                p.q()
            )));
        }
        let ctx = FirstIntegralContext::new(&p, big, self.lambda0)?;
        Ok((p, ctx))
    }
}
