//! The worked scenarios: data generation, estimated features, posterior and
//! verdicts, each with a closed-form posterior that can be checked against
//! the generic solver.

mod coin;
mod decimal;
mod poll;
mod spike;
mod tree;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use coin::{
    coin_from_heads, coin_heads, coin_mu_hat, coin_simulate, coin_simulate_with,
    coin_sup_truth_mass, g_bar, one_tilt_for_mean, two_tilt_for_moments, CoinCubeScenario,
    CoinOutcome, BALL_RADIUS, ONE_FEATURE_CAP, TWO_FEATURE_CAP,
};
pub use decimal::{
    cell_of, decimal_from_heads, decimal_posterior, decimal_posterior_with, first_decimal_five,
    second_decimal_five, BallCheck, DecimalOutcome, DecimalScenario,
};
pub use poll::{
    poll_biased_posterior, poll_biased_prior, poll_data, poll_from_data, poll_mu_hat,
    poll_mu_tilde, poll_posterior, poll_simulate, poll_simulate_with, BiasedAgent, BiasedOutcome,
    PollOutcome, PollScenario,
};
pub use spike::{spike_posterior, SpikeOutcome, SpikeScenario, SPIKE_CAP};
pub use tree::{tree_build, TreeLeaf, TreeNode, TreeOutcome, TreeScenario};

use crate::error::{invalid, Result};
use crate::rng::{stream_id, StreamRng};

/// One CSV row: `scenario, seed, N_or_m, replicate, quantity, value`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub scenario: String,
    pub seed: u64,
    #[serde(rename = "N_or_m")]
    pub n_or_m: usize,
    pub replicate: usize,
    pub quantity: String,
    pub value: f64,
}

impl Record {
    pub fn new(
        scenario: &str,
        seed: u64,
        n_or_m: usize,
        replicate: usize,
        quantity: &str,
        value: f64,
    ) -> Self {
        Record {
            scenario: scenario.into(),
            seed,
            n_or_m,
            replicate,
            quantity: quantity.into(),
            value,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "scenario", rename_all = "snake_case")]
pub enum ScenarioKind {
    Poll(PollScenario),
    Coin(CoinCubeScenario),
    Decimal(DecimalScenario),
    Tree(TreeScenario),
    Spike(SpikeScenario),
}

impl ScenarioKind {
    pub fn name(&self) -> &'static str {
        match self {
            ScenarioKind::Poll(_) => "poll",
            ScenarioKind::Coin(_) => "coin",
            ScenarioKind::Decimal(_) => "decimal",
            ScenarioKind::Tree(_) => "tree",
            ScenarioKind::Spike(_) => "spike",
        }
    }

    /// Check the parameters without simulating anything.
    pub fn validate(&self) -> Result<()> {
        match self {
            ScenarioKind::Poll(s) => s.validate(),
            ScenarioKind::Coin(s) => s.validate(),
            ScenarioKind::Decimal(s) => s.validate(),
            ScenarioKind::Tree(s) => tree_build(s).map(|_| ()),
            ScenarioKind::Spike(s) => s.validate(),
        }
    }
}

/// A scenario document: the scenario's own fields plus sample size and replicate count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    #[serde(flatten)]
    pub kind: ScenarioKind,
    #[serde(rename = "N", default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(default = "one")]
    pub replicates: usize,
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct ScenarioRun {
    pub scenario: String,
    /// One result document per replicate.
    pub results: Vec<serde_json::Value>,
    /// Largest TV distance between a closed form and the generic fit.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cross_check_tv: Option<f64>,
    #[serde(skip)]
    pub records: Vec<Record>,
}

fn to_json<T: Serialize>(v: &T) -> serde_json::Value {
    serde_json::to_value(v).expect("scenario outputs serialize")
}

/// Run every replicate of a scenario; replicate `i` draws from stream `(seed, scenario, i)`.
pub fn run_scenario(cfg: &ScenarioConfig, seed: u64, cross_check: bool) -> Result<ScenarioRun> {
    if cfg.replicates == 0 {
        return invalid("replicates must be >= 1");
    }
    let name = cfg.kind.name();
    let need_n = || {
        cfg.n
            .ok_or_else(|| crate::LkaError::InvalidInput(format!("scenario {name} needs N")))
    };
    type Rep = (serde_json::Value, Vec<Record>, Option<f64>);
    let run_one = |rep: usize| -> Result<Rep> {
        let mut rng = StreamRng::new(seed, stream_id(name), rep as u64);
        Ok(match &cfg.kind {
            ScenarioKind::Poll(s) => {
                let n = need_n()?;
                let o = poll_simulate_with(s, n, &mut rng)?;
                let tv = cross_check.then(|| o.generic_fit_tv(s)).transpose()?;
                (to_json(&o), o.records(seed, n, rep), tv)
            }
            ScenarioKind::Coin(s) => {
                let n = need_n()?;
                let o = coin_simulate_with(s, n, &mut rng)?;
                let tv = if cross_check && !o.boundary.iter().any(|&b| b) {
                    Some(o.generic_fit_tv(s)?)
                } else {
                    None
                };
                (to_json(&o), o.records(seed, rep), tv)
            }
            ScenarioKind::Decimal(s) => {
                let n = need_n()?;
                let o = decimal_posterior_with(s, n, &mut rng)?;
                let tv = cross_check.then(|| o.generic_fit_tv(s)).transpose()?;
                (to_json(&o), o.records(seed, rep), tv)
            }
            ScenarioKind::Tree(s) => {
                let o = tree_build(s)?;
                let tv = cross_check.then(|| o.generic_fit_tv()).transpose()?;
                let rec = |q: &str, v: f64| Record::new("tree", seed, o.leaves.len(), rep, q, v);
                let records = vec![
                    rec("maxDiameter", o.max_diameter),
                    rec("diameterLowerBound", o.diameter_lower_bound),
                    rec("witnessBallMass", o.witness_ball_mass),
                ];
                (to_json(&o), records, tv)
            }
            ScenarioKind::Spike(s) => {
                let o = spike_posterior(s)?;
                let tv = cross_check.then(|| o.generic_fit_tv(s)).transpose()?;
                let mut records = vec![Record::new(
                    "spike",
                    seed,
                    s.atoms.len(),
                    rep,
                    "gap0",
                    o.gap0,
                )];
                for (i, g) in o.gaps.iter().enumerate() {
                    records.push(Record::new(
                        "spike",
                        seed,
                        s.atoms.len(),
                        rep,
                        &format!("gap[{i}]"),
                        *g,
                    ));
                }
                (to_json(&o), records, tv)
            }
        })
    };
    let reps: Vec<Rep> = (0..cfg.replicates)
        .into_par_iter()
        .map(run_one)
        .collect::<Result<Vec<_>>>()?;
    let mut results = Vec::with_capacity(reps.len());
    let mut records = Vec::new();
    let mut tv: Option<f64> = None;
    for (v, r, t) in reps {
        results.push(v);
        records.extend(r);
        if let Some(t) = t {
            tv = Some(tv.map_or(t, |x| x.max(t)));
        }
    }
    Ok(ScenarioRun {
        scenario: name.into(),
        results,
        cross_check_tv: tv,
        records,
    })
}
