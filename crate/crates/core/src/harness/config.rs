use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Scenario, SingerConvention};
use crate::design::{Constraint, DesignProblem};
use crate::error::{Error, Result};
use crate::estimation::{FilterKind, TriggerPolicy};
use crate::linalg::{self, Mat};
use crate::model::ModelConfig;

/// Scenario file (TOML).
///
/// ```toml
/// filter = "olset"        # optional, inferred from the trigger
/// horizon = 1000
/// runs = 100
/// seed = 42
///
/// [model]
/// A = [[0.8]]
/// C = [[1.0]]
/// Q = [[1.0]]
/// R = [[1.0]]
/// Sigma0 = [[1.0]]
///
/// [trigger]
/// kind = "open-loop"
/// Y = [[1.0]]
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub filter: Option<FilterKind>,
    #[serde(default = "default_horizon")]
    pub horizon: usize,
    #[serde(default = "default_runs")]
    pub runs: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub burn_in: usize,
    #[serde(default)]
    pub preroll: usize,
    /// Only read by the Singer command.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub singer_a13: Option<SingerConvention>,
    pub model: ModelConfig,
    pub trigger: TriggerPolicy,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub design: Option<DesignSection>,
}

/// Optional `[design]` table. Exactly one of `delta0`, `bound`, `trace`,
/// `max_eigenvalue` selects the constraint (`bound` means `bound * I`).
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DesignSection {
    #[serde(default, skip_serializing_if = "Option::is_none", with = "opt_rows")]
    pub delta0: Option<Mat>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bound: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trace: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_eigenvalue: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none", with = "opt_rows")]
    pub basis: Option<Mat>,
    #[serde(default)]
    pub closed_loop: bool,
}

fn default_horizon() -> usize {
    100
}

fn default_runs() -> usize {
    1
}

mod opt_rows {
    use super::{linalg, Mat};
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(m: &Option<Mat>, s: S) -> Result<S::Ok, S::Error> {
        m.as_ref().map(linalg::to_rows).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<Mat>, D::Error> {
        Option::<Vec<Vec<f64>>>::deserialize(d)?
            .map(|rows| linalg::from_rows(&rows).map_err(serde::de::Error::custom))
            .transpose()
    }
}

impl ScenarioConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn scenario(&self) -> Result<Scenario> {
        let model = self.model.build()?;
        let filter = self
            .filter
            .unwrap_or_else(|| FilterKind::for_trigger(&self.trigger));
        Ok(Scenario::with_filter(model, self.trigger.clone(), filter)?
            .horizon(self.horizon)
            .runs(self.runs)
            .seed(self.seed)
            .burn_in(self.burn_in)
            .preroll(self.preroll))
    }

    pub fn design_problem(&self) -> Result<DesignProblem> {
        let section = self
            .design
            .as_ref()
            .ok_or_else(|| Error::Config("missing [design] section".into()))?;
        let model = self.model.build()?;
        let n = model.n();
        let picks = [
            section.delta0.as_ref().map(|d| Constraint::Matrix(d.clone())),
            section.bound.map(|b| Constraint::Matrix(Mat::identity(n, n) * b)),
            section.trace.map(Constraint::Trace),
            section.max_eigenvalue.map(Constraint::MaxEigenvalue),
        ];
        let mut chosen = picks.into_iter().flatten();
        let constraint = chosen
            .next()
            .ok_or_else(|| Error::Config("[design] needs one constraint".into()))?;
        if chosen.next().is_some() {
            return Err(Error::Config("[design] has more than one constraint".into()));
        }
        Ok(DesignProblem {
            model,
            constraint,
            basis: section.basis.clone(),
        })
    }
}
