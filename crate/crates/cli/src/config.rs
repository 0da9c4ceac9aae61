//! Experiment documents. Every command reads one JSON object with a
//! `command` tag, a `seed`, an optional `output` directory and the
//! command's own fields.

use lka_core::asymptotics::SyntheticScenario;
use lka_core::maxent::{CubeFeature, FeatureSet, SolverOptions};
use lka_core::scenarios::{ScenarioConfig, ScenarioKind};
use lka_core::secondary::BayesianSecondaryConfig;
use lka_core::worlds::{BeliefMeasure, TruthSet, WorldSpace};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<String>,
    #[serde(flatten)]
    pub payload: Payload,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "snake_case")]
pub enum Payload {
    Fit(FitPayload),
    Lka(LkaPayload),
    Scenario(ScenarioPayload),
    Secondary(SecondaryPayload),
    Asymptotics(AsymptoticsPayload),
    Limits(LimitsPayload),
}

impl Payload {
    pub fn name(&self) -> &'static str {
        match self {
            Payload::Fit(_) => "fit",
            Payload::Lka(_) => "lka",
            Payload::Scenario(_) => "scenario",
            Payload::Secondary(_) => "secondary",
            Payload::Asymptotics(_) => "asymptotics",
            Payload::Limits(_) => "limits",
        }
    }
}

/// A prior and a feature map: finite (`prior` weights or `d`, plus feature
/// rows) or on the cube (`cube`, with the uniform prior).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ModelSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prior: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub features: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cube: Option<CubeSpec>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct CubeSpec {
    pub r: usize,
    pub features: Vec<CubeFeature>,
}

impl ModelSpec {
    pub fn build(&self) -> Result<(BeliefMeasure, FeatureSet), CliError> {
        if let Some(c) = &self.cube {
            if self.prior.is_some() || self.features.is_some() || self.d.is_some() {
                return Err(CliError::config(
                    "cube: give either cube or prior/d/features, not both",
                ));
            }
            let f = FeatureSet::cube(c.r, c.features.clone())
                .map_err(|e| CliError::field("cube", e))?;
            let prior = BeliefMeasure::uniform(
                &WorldSpace::cube(c.r).map_err(|e| CliError::field("cube.r", e))?,
            );
            return Ok((prior, f));
        }
        let rows = self
            .features
            .as_ref()
            .ok_or_else(|| CliError::config("features: missing"))?;
        let prior = match (&self.prior, self.d) {
            (Some(w), _) => {
                BeliefMeasure::finite_from_weights(w).map_err(|e| CliError::field("prior", e))?
            }
            (None, Some(d)) => {
                BeliefMeasure::uniform(&WorldSpace::finite(d).map_err(|e| CliError::field("d", e))?)
            }
            (None, None) => BeliefMeasure::uniform(
                &WorldSpace::finite(rows.len()).map_err(|e| CliError::field("features", e))?,
            ),
        };
        if prior.space().size() != Some(rows.len()) {
            return Err(CliError::config("features: need one row per world"));
        }
        let f = FeatureSet::from_rows(rows).map_err(|e| CliError::field("features", e))?;
        Ok((prior, f))
    }
}

/// A truth set: member indices on a finite space, or a full set document.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TruthSpec {
    Members(Vec<usize>),
    Set(TruthSet),
}

impl TruthSpec {
    pub fn build(&self, space: &WorldSpace) -> Result<TruthSet, CliError> {
        let t = match self {
            TruthSpec::Members(m) => {
                let d = space
                    .size()
                    .ok_or_else(|| CliError::config("truth: member lists need a finite space"))?;
                TruthSet::finite(d, m).map_err(|e| CliError::field("truth", e))?
            }
            TruthSpec::Set(t) => t.clone(),
        };
        t.space
            .expect_same(space)
            .map_err(|e| CliError::field("truth", e))?;
        Ok(t)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct FitPayload {
    #[serde(flatten)]
    pub model: ModelSpec,
    pub target: Vec<f64>,
    #[serde(default)]
    pub solver: SolverOptions,
}

/// The agent's beliefs: explicit probabilities, or Gibbs coefficients on feature rows.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct BeliefSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub probs: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub features: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct LkaPayload {
    /// Prior weights over a finite space.
    pub prior: Vec<f64>,
    pub posterior: BeliefSpec,
    pub truth: Vec<usize>,
    pub x0: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps_grid: Option<Vec<f64>>,
    /// A second agent; adds the bias between the two.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p_tilde: Option<BeliefSpec>,
}

#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct ScenarioPayload {
    /// A single scenario given inline ...
    #[serde(flatten, skip_serializing_if = "Option::is_none")]
    pub single: Option<ScenarioConfig>,
    /// ... or several run in order.
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub runs: Vec<ScenarioConfig>,
    pub cross_check: bool,
}

// Written by hand so that errors inside an inline scenario surface instead
// of turning into a missing scenario.
impl<'de> Deserialize<'de> for ScenarioPayload {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        use serde::de::Error;
        let v = serde_json::Value::deserialize(d)?;
        let cross_check = match v.get("crossCheck") {
            None => false,
            Some(b) => b
                .as_bool()
                .ok_or_else(|| D::Error::custom("crossCheck must be a boolean"))?,
        };
        match v.get("runs") {
            Some(runs) => Ok(ScenarioPayload {
                single: None,
                runs: serde_json::from_value(runs.clone())
                    .map_err(|e| D::Error::custom(format!("runs: {e}")))?,
                cross_check,
            }),
            None => Ok(ScenarioPayload {
                single: Some(serde_json::from_value(v).map_err(D::Error::custom)?),
                runs: Vec::new(),
                cross_check,
            }),
        }
    }
}

impl ScenarioPayload {
    pub fn configs(&self) -> Result<Vec<&ScenarioConfig>, CliError> {
        match &self.single {
            Some(s) => Ok(vec![s]),
            None if self.runs.is_empty() => Err(CliError::config("runs: must not be empty")),
            None => Ok(self.runs.iter().collect()),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum SecondaryPayload {
    /// Plug-in estimates over `R` replicates at each `m`.
    Plugin {
        #[serde(flatten)]
        model: ModelSpec,
        truth: TruthSpec,
        lambda: Vec<f64>,
        #[serde(rename = "mList")]
        m_list: Vec<usize>,
        #[serde(rename = "R", default = "one")]
        r: usize,
    },
    Expansion {
        #[serde(flatten)]
        model: ModelSpec,
        truth: TruthSpec,
        lambda: Vec<f64>,
        #[serde(rename = "mList")]
        m_list: Vec<usize>,
        #[serde(rename = "R")]
        r: usize,
    },
    Bayesian {
        #[serde(flatten)]
        model: ModelSpec,
        truth: TruthSpec,
        lambda: Vec<f64>,
        m: usize,
        #[serde(default)]
        grid: BayesianSecondaryConfig,
    },
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "experiment", rename_all = "snake_case")]
pub enum AsymptoticsPayload {
    Convergence {
        fixture: ScenarioKind,
        #[serde(rename = "Ns")]
        ns: Vec<usize>,
        #[serde(rename = "R")]
        r: usize,
    },
    Clt {
        fixture: ScenarioKind,
        /// Sets to check; the fixture's defaults when absent.
        #[serde(rename = "A", default, skip_serializing_if = "Option::is_none")]
        a: Option<Vec<TruthSet>>,
        #[serde(rename = "N")]
        n: usize,
        #[serde(rename = "R")]
        r: usize,
        #[serde(rename = "fdStep", default, skip_serializing_if = "Option::is_none")]
        fd_step: Option<f64>,
    },
    Synthetic {
        fixture: SyntheticScenario,
        generations: usize,
        #[serde(rename = "NPerGen")]
        n_per_gen: usize,
        #[serde(rename = "R", default = "one")]
        r: usize,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct LimitsPayload {
    /// World counts to certify.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d: Option<usize>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub d_list: Vec<usize>,
    #[serde(default = "forty")]
    pub magnitude: f64,
}

fn forty() -> f64 {
    40.0
}
