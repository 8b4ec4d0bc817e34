//! Named numerical tolerances.
//!
//! Every threshold the pipeline compares against lives here so that a run
//! can be re-tuned from the environment (`QH_TOL_OVERRIDE`, a JSON object
//! keyed by field name) without touching code.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const TOL_OVERRIDE_ENV: &str = "QH_TOL_OVERRIDE";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    /// Allowed |Σp − 1| for a validated step set.
    pub weight_sum: f64,
    /// Inputs within this distance of 1 are renormalized instead of rejected.
    pub renormalize: f64,
    /// Half-width of the band around t0 classified as `Point`.
    pub classify: f64,
    /// |t − t0| below which the trigonometric gluing function is used.
    pub critical: f64,
    /// Normalized gluing residual bound.
    pub gluing: f64,
    /// Relative harmonicity residual bound.
    pub harmonicity: f64,
    /// Normalized boundary-condition residual bound.
    pub boundary: f64,
    /// Absolute error allowed on an exponential growth estimate.
    pub growth: f64,
    /// Relative tolerance for "equal up to a scalar".
    pub proportional: f64,
    /// Relative imaginary part tolerated on quantities that must be real.
    pub realness: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            weight_sum: 1e-12,
            renormalize: 1e-9,
            classify: 1e-9,
            critical: 1e-9,
            gluing: 1e-8,
            harmonicity: 1e-6,
            boundary: 1e-8,
            growth: 1e-3,
            proportional: 1e-6,
            realness: 1e-9,
        }
    }
}

impl Tolerances {
    /// Applies a JSON override map on top of `self`.
    pub fn with_override_json(self, json: &str) -> Result<Self> {
        let mut value = serde_json::to_value(self).expect("tolerances serialize");
        let patch: serde_json::Map<String, serde_json::Value> = serde_json::from_str(json)
            .map_err(|e| Error::Input(format!("{TOL_OVERRIDE_ENV}: {e}")))?;
        let obj = value.as_object_mut().expect("object");
        for (key, v) in patch {
            if !obj.contains_key(&key) {
                return Err(Error::Input(format!("{TOL_OVERRIDE_ENV}: unknown tolerance `{key}`")));
            }
            obj.insert(key, v);
        }
        serde_json::from_value(value).map_err(|e| Error::Input(format!("{TOL_OVERRIDE_ENV}: {e}")))
    }

    /// Defaults, patched by `QH_TOL_OVERRIDE` when it is set.
    pub fn from_env() -> Result<Self> {
        match std::env::var(TOL_OVERRIDE_ENV) {
            Ok(json) if !json.trim().is_empty() => Self::default().with_override_json(&json),
            _ => Ok(Self::default()),
        }
    }
}
