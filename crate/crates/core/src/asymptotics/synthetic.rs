//! Synthetic primary learning: each generation's data are simulated from the
//! previous posterior's mixed likelihood, then the agent refits.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{one_feature_posterior, AsymRecord};
use crate::error::{invalid, LkaError, Result};
use crate::maxent::{fit_lambda, FeatureSet, MomentVector, SolverOptions};
use crate::rng::{stream_id, StreamRng};
use crate::scenarios::{coin_heads, coin_mu_hat, CoinCubeScenario, BALL_RADIUS};
use crate::worlds::{tv_distance, tv_to_point, BeliefMeasure, World, WorldSpace};

/// A finite world space whose worlds emit their feature vector without noise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct FiniteReadout {
    /// One feature row per world.
    pub features: Vec<Vec<f64>>,
    pub x0: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "scenario", rename_all = "snake_case")]
pub enum SyntheticScenario {
    Coin(CoinCubeScenario),
    Readout(FiniteReadout),
}

#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct GenerationRecord {
    pub generation: usize,
    pub mu_hat: Vec<f64>,
    /// `TV(P_g, P_0)`.
    pub tv_to_gen0: f64,
    /// Distance to `δ_{x0}`: `1 − P_g(x0)` on finite spaces, the mass outside `B_0.05[x0]` on the cube.
    pub tv_to_delta: f64,
    pub posterior: BeliefMeasure,
}

#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct SyntheticLoopReport {
    pub n_per_gen: usize,
    pub eta: f64,
    /// Generation 0 (real data) followed by one entry per refit.
    pub generations: Vec<GenerationRecord>,
}

impl SyntheticLoopReport {
    pub fn records(&self, replicate: usize) -> Vec<AsymRecord> {
        let mut out = Vec::new();
        for g in &self.generations {
            let exp = format!("synthetic/gen{}", g.generation);
            out.push(AsymRecord::new(
                &exp,
                self.n_per_gen,
                replicate,
                "tv_to_Pinf",
                g.tv_to_gen0,
            ));
            out.push(AsymRecord::new(
                &exp,
                self.n_per_gen,
                replicate,
                "tv_to_delta",
                g.tv_to_delta,
            ));
        }
        out
    }

    /// `TV(P_0, δ_{x0})`.
    pub fn gen0_floor(&self) -> f64 {
        self.generations[0].tv_to_delta
    }
}

/// Checked scenario pieces.
enum Setup {
    Coin(CoinCubeScenario),
    Readout {
        prior: BeliefMeasure,
        features: FeatureSet,
        rows: Vec<Vec<f64>>,
        x0: usize,
    },
}

impl Setup {
    fn new(s: &SyntheticScenario) -> Result<Setup> {
        match s {
            SyntheticScenario::Coin(c) => {
                c.validate()?;
                if c.features_per_coord != 1 {
                    return Err(LkaError::Unsupported(
                        "the synthetic loop uses one feature per coordinate".into(),
                    ));
                }
                Ok(Setup::Coin(c.clone()))
            }
            SyntheticScenario::Readout(r) => {
                let features = FeatureSet::from_rows(&r.features)?;
                if r.x0 >= r.features.len() {
                    return invalid("x0 must index a world");
                }
                let prior = BeliefMeasure::uniform(&WorldSpace::finite(r.features.len())?);
                Ok(Setup::Readout {
                    prior,
                    features,
                    rows: r.features.clone(),
                    x0: r.x0,
                })
            }
        }
    }

    fn x0(&self) -> World {
        match self {
            Setup::Coin(c) => World::Point(c.x0.clone()),
            Setup::Readout { x0, .. } => World::Index(*x0),
        }
    }

    fn posterior(&self, mu: &[f64]) -> Result<BeliefMeasure> {
        match self {
            Setup::Coin(_) => one_feature_posterior(mu),
            Setup::Readout {
                prior, features, ..
            } => {
                let fit = fit_lambda(
                    prior,
                    features,
                    &MomentVector::new(mu.to_vec()),
                    &SolverOptions::default(),
                )?;
                fit.posterior.measure()
            }
        }
    }

    /// Moments of `n` items from the true world.
    fn real_data(&self, n: usize, rng: &mut StreamRng) -> Result<Vec<f64>> {
        match self {
            Setup::Coin(c) => Ok(coin_mu_hat(1, &coin_heads(c, n, rng)?, n)),
            Setup::Readout { rows, x0, .. } => Ok(rows[*x0].clone()),
        }
    }

    /// Moments of `n` items, each from its own world `x ~ p`.
    fn mixed_data(&self, p: &BeliefMeasure, n: usize, rng: &mut StreamRng) -> Result<Vec<f64>> {
        let sampler = p.sampler();
        match self {
            Setup::Coin(c) => {
                let mut heads = vec![0u64; c.r];
                for _ in 0..n {
                    let x = sampler.draw(rng);
                    for (h, &xi) in heads.iter_mut().zip(x.point().unwrap()) {
                        *h += (rng.random::<f64>() < xi) as u64;
                    }
                }
                Ok(coin_mu_hat(1, &heads, n))
            }
            Setup::Readout { rows, .. } => {
                let mut s = vec![0.0; rows[0].len()];
                for _ in 0..n {
                    let k = sampler.draw(rng).index().unwrap();
                    for (acc, v) in s.iter_mut().zip(&rows[k]) {
                        *acc += v;
                    }
                }
                Ok(s.iter().map(|v| v / n as f64).collect())
            }
        }
    }
}

/// Run the loop with data drawn from stream `(seed, "synthetic", 0)`.
pub fn synthetic_loop(
    s: &SyntheticScenario,
    generations: usize,
    n_per_gen: usize,
    seed: u64,
) -> Result<SyntheticLoopReport> {
    let mut rng = StreamRng::new(seed, stream_id("synthetic"), 0);
    synthetic_loop_with(s, generations, n_per_gen, &mut rng)
}

pub fn synthetic_loop_with(
    s: &SyntheticScenario,
    generations: usize,
    n_per_gen: usize,
    rng: &mut StreamRng,
) -> Result<SyntheticLoopReport> {
    if generations == 0 || n_per_gen == 0 {
        return invalid("generations and N per generation must be >= 1");
    }
    let setup = Setup::new(s)?;
    let x0 = setup.x0();
    let mu0 = setup.real_data(n_per_gen, rng)?;
    let p0 = setup.posterior(&mu0)?;
    let record = |g: usize, mu: Vec<f64>, p: BeliefMeasure| -> Result<GenerationRecord> {
        Ok(GenerationRecord {
            generation: g,
            mu_hat: mu,
            tv_to_gen0: tv_distance(&p, &p0)?,
            tv_to_delta: tv_to_point(&p, &x0, BALL_RADIUS)?,
            posterior: p,
        })
    };
    let mut out = vec![record(0, mu0, p0.clone())?];
    for g in 1..=generations {
        let mu = setup.mixed_data(&out[g - 1].posterior, n_per_gen, rng)?;
        let p = setup.posterior(&mu)?;
        out.push(record(g, mu, p)?);
    }
    Ok(SyntheticLoopReport {
        n_per_gen,
        eta: BALL_RADIUS,
        generations: out,
    })
}

/// Independent loops; replicate `i` uses stream `(seed, "synthetic", i)`.
pub fn synthetic_replicates(
    s: &SyntheticScenario,
    generations: usize,
    n_per_gen: usize,
    r: usize,
    seed: u64,
) -> Result<Vec<SyntheticLoopReport>> {
    let label = stream_id("synthetic");
    (0..r)
        .into_par_iter()
        .map(|i| {
            synthetic_loop_with(
                s,
                generations,
                n_per_gen,
                &mut StreamRng::new(seed, label, i as u64),
            )
        })
        .collect()
}
