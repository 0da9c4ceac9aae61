//! Cities split into southern `x_1..x_h` and northern `x_{h+1}..x_d`; the
//! agent learns where subject S lives from repeated polls.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::Record;
use crate::error::{invalid, LkaError, Result};
use crate::lka::{bias, lka_verdict, BiasReport, LkaReport};
use crate::maxent::{fit_lambda, FeatureSet, MomentVector, SolverOptions};
use crate::rng::{stream_id, StreamRng};
use crate::worlds::{tv_distance, BeliefMeasure, Metric, TruthSet, World};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct BiasedAgent {
    /// Probability that S misreports in every poll.
    pub delta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct PollScenario {
    pub d: usize,
    /// Number of southern cities.
    pub h: usize,
    /// Chance that S is included in any one poll.
    pub eps: f64,
    /// Zero-based index of the city where S lives.
    pub x0: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub biased_agent: Option<BiasedAgent>,
}

impl PollScenario {
    pub fn validate(&self) -> Result<()> {
        if self.h == 0 {
            return invalid("h must be >= 1");
        }
        if self.h >= self.d {
            return invalid("h must be < d");
        }
        if !(self.eps > 0.0 && self.eps < 1.0) {
            return invalid("eps must lie in (0, 1)");
        }
        if self.x0 >= self.d {
            return invalid("x0 must be < d");
        }
        if let Some(b) = &self.biased_agent {
            if !(b.delta >= 0.0 && b.delta < 0.5) {
                return invalid("delta must lie in [0, 0.5)");
            }
        }
        Ok(())
    }

    pub fn northern(&self) -> TruthSet {
        let members: Vec<usize> = (self.h..self.d).collect();
        TruthSet::finite(self.d, &members).unwrap()
    }

    pub fn is_northern(&self, k: usize) -> bool {
        k >= self.h
    }
}

/// Responses of S across the polls that included S.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Responses {
    None,
    AllSouth,
    AllNorth,
}

fn responses(data: &[u8]) -> Result<Responses> {
    let mut seen = Responses::None;
    for &v in data {
        let r = match v {
            0 => continue,
            1 => Responses::AllSouth,
            2 => Responses::AllNorth,
            _ => return invalid(format!("poll results must be 0, 1 or 2, got {v}")),
        };
        if seen != Responses::None && seen != r {
            return Err(LkaError::ModelViolation(
                "subject gave both answers; a consistent reporter cannot".into(),
            ));
        }
        seen = r;
    }
    Ok(seen)
}

/// The default agent's estimate of `P(northern)`.
pub fn poll_mu_hat(d: usize, h: usize, data: &[u8]) -> Result<f64> {
    Ok(match responses(data)? {
        Responses::None => (d - h) as f64 / d as f64,
        Responses::AllSouth => 0.0,
        Responses::AllNorth => 1.0,
    })
}

/// The misreport-aware agent's estimate.
pub fn poll_mu_tilde(d: usize, h: usize, delta: f64, data: &[u8]) -> Result<f64> {
    Ok(match responses(data)? {
        Responses::None => (d - h) as f64 / d as f64,
        Responses::AllSouth => delta,
        Responses::AllNorth => 1.0 - delta,
    })
}

/// Uniform-prior posterior: `(1−μ)/h` on southern and `μ/(d−h)` on northern cities.
pub fn poll_posterior(d: usize, h: usize, mu: f64) -> Result<BeliefMeasure> {
    let p = (0..d)
        .map(|k| {
            if k < h {
                (1.0 - mu) / h as f64
            } else {
                mu / (d - h) as f64
            }
        })
        .collect();
    BeliefMeasure::finite(p)
}

/// Posterior of the agent whose prior is proportional to city number `k = 1..d`.
pub fn poll_biased_posterior(d: usize, h: usize, mu: f64) -> Result<BeliefMeasure> {
    let (df, hf) = (d as f64, h as f64);
    let p = (1..=d)
        .map(|k| {
            let k = k as f64;
            if k <= hf {
                2.0 * k * (1.0 - mu) / (hf * (hf + 1.0))
            } else {
                2.0 * k * mu / ((df - hf) * (df + hf + 1.0))
            }
        })
        .collect();
    BeliefMeasure::finite(p)
}

/// Prior proportional to `k`.
pub fn poll_biased_prior(d: usize) -> BeliefMeasure {
    let w: Vec<f64> = (1..=d).map(|k| k as f64).collect();
    BeliefMeasure::finite_from_weights(&w).unwrap()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct BiasedOutcome {
    pub mu_tilde: f64,
    pub posterior: BeliefMeasure,
    pub bias: BiasReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct PollOutcome {
    /// Not serialized; `included` summarises it.
    #[serde(skip)]
    pub data: Vec<u8>,
    pub included: usize,
    pub mu_hat: f64,
    pub posterior: BeliefMeasure,
    pub report: LkaReport,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub biased: Option<BiasedOutcome>,
}

/// Draw `n` polls from a truthful subject.
pub fn poll_data(s: &PollScenario, n: usize, rng: &mut StreamRng) -> Vec<u8> {
    let answer = if s.is_northern(s.x0) { 2 } else { 1 };
    (0..n)
        .map(|_| {
            if rng.random::<f64>() < s.eps {
                answer
            } else {
                0
            }
        })
        .collect()
}

pub fn poll_simulate(s: &PollScenario, n: usize, seed: u64) -> Result<PollOutcome> {
    let mut rng = StreamRng::new(seed, stream_id("poll"), 0);
    poll_simulate_with(s, n, &mut rng)
}

pub fn poll_simulate_with(s: &PollScenario, n: usize, rng: &mut StreamRng) -> Result<PollOutcome> {
    s.validate()?;
    if n == 0 {
        return invalid("N must be >= 1");
    }
    let data = poll_data(s, n, rng);
    poll_from_data(s, data)
}

/// Posterior and verdicts for given poll results.
pub fn poll_from_data(s: &PollScenario, data: Vec<u8>) -> Result<PollOutcome> {
    s.validate()?;
    let mu_hat = poll_mu_hat(s.d, s.h, &data)?;
    let posterior = poll_posterior(s.d, s.h, mu_hat)?;
    let p0 = BeliefMeasure::uniform(posterior.space());
    let t = s.northern();
    let report = lka_verdict(
        &p0,
        &posterior,
        &t,
        &World::Index(s.x0),
        Metric::Discrete,
        None,
    )?;
    let biased = match &s.biased_agent {
        None => None,
        Some(b) => {
            let mu_tilde = poll_mu_tilde(s.d, s.h, b.delta, &data)?;
            let pt = poll_biased_posterior(s.d, s.h, mu_tilde)?;
            let bias = bias(&t, &posterior, &pt)?;
            Some(BiasedOutcome {
                mu_tilde,
                posterior: pt,
                bias,
            })
        }
    };
    Ok(PollOutcome {
        included: data.iter().filter(|&&v| v != 0).count(),
        data,
        mu_hat,
        posterior,
        report,
        biased,
    })
}

impl PollOutcome {
    /// TV distance between the closed forms and generic fits of the same moments.
    pub fn generic_fit_tv(&self, s: &PollScenario) -> Result<f64> {
        let f = FeatureSet::indicators(&[s.northern()])?;
        let opts = SolverOptions::default();
        let uniform = BeliefMeasure::uniform(self.posterior.space());
        let fit = fit_lambda(&uniform, &f, &MomentVector::new(vec![self.mu_hat]), &opts)?;
        let mut tv = tv_distance(&fit.posterior.measure()?, &self.posterior)?;
        if let Some(b) = &self.biased {
            let prior = poll_biased_prior(s.d);
            let fit = fit_lambda(&prior, &f, &MomentVector::new(vec![b.mu_tilde]), &opts)?;
            tv = tv.max(tv_distance(&fit.posterior.measure()?, &b.posterior)?);
        }
        Ok(tv)
    }

    pub fn records(&self, seed: u64, n: usize, replicate: usize) -> Vec<Record> {
        let rec = |q: &str, v: f64| Record::new("poll", seed, n, replicate, q, v);
        let mut out = vec![
            rec("muHat", self.mu_hat),
            rec("included", self.included as f64),
            rec("activeInfo", self.report.active_info),
            rec("P_T", self.report.raw_values.p_t),
            rec("P_x0", self.report.raw_values.p_x0),
            rec("learned", self.report.learned as u8 as f64),
            rec("fullLearning", self.report.full_learning as u8 as f64),
            rec(
                "knowledgeAcquired",
                self.report.knowledge_acquired as u8 as f64,
            ),
        ];
        if let Some(b) = &self.biased {
            out.push(rec("muTilde", b.mu_tilde));
            out.push(rec("bias", b.bias.bias));
        }
        out
    }
}
