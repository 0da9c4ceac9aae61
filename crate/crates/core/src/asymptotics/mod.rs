//! Large-sample behaviour of primary learning: convergence of the posterior
//! to its limit, the √N fluctuations of set probabilities, and the loop in
//! which an agent keeps refitting to data simulated from its own beliefs.

mod synthetic;

use rand::Rng;
use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use synthetic::{
    synthetic_loop, synthetic_loop_with, synthetic_replicates, FiniteReadout, GenerationRecord,
    SyntheticLoopReport, SyntheticScenario,
};

use crate::error::{invalid, LkaError, Result};
use crate::numeric::{mean_var, median, ols_slope};
use crate::rng::{stream_id, StreamRng};
use crate::scenarios::{
    cell_of, coin_heads, coin_mu_hat, one_tilt_for_mean, poll_data, poll_mu_hat, poll_posterior,
    two_tilt_for_moments, CoinCubeScenario, DecimalScenario, PollScenario, ScenarioKind,
    BALL_RADIUS, ONE_FEATURE_CAP, TWO_FEATURE_CAP,
};
use crate::worlds::{
    tv_distance, tv_to_point, BeliefMeasure, Marginal, Partition, TruthSet, World, WorldSpace,
};

/// Default central-difference step for `P′(A; μ)`.
pub const DEFAULT_CLT_FD_STEP: f64 = 1e-4;
const BOOTSTRAP_RESAMPLES: usize = 200;

/// One CSV row: `experiment, N, replicate, quantity, value`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AsymRecord {
    pub experiment: String,
    #[serde(rename = "N")]
    pub n: usize,
    pub replicate: usize,
    pub quantity: String,
    pub value: f64,
}

impl AsymRecord {
    fn new(experiment: &str, n: usize, replicate: usize, quantity: &str, value: f64) -> Self {
        AsymRecord {
            experiment: experiment.into(),
            n,
            replicate,
            quantity: quantity.into(),
            value,
        }
    }
}

/// How fast the posterior is expected to reach its limit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rate {
    /// Averages of i.i.d. items: TV shrinks like `N^{-1/2}`.
    RootN,
    /// Indicator targets: the posterior equals its limit except with exponentially small probability.
    Exponential,
    /// The limit is the point mass at `x0`; the distance is the mass outside `B_0.05[x0]`.
    PointMass,
}

#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct ConvergenceReport {
    pub scenario: String,
    #[serde(rename = "Ns")]
    pub ns: Vec<usize>,
    #[serde(rename = "R")]
    pub r: usize,
    /// `tv_to_Pinf`, or `tv_to_delta` when the limit is a point mass.
    pub quantity: String,
    pub rate: Rate,
    pub tv_errors: Vec<Vec<f64>>,
    pub medians: Vec<f64>,
    /// Least-squares slope of log median against log N over the positive medians.
    #[serde(with = "crate::serde_util")]
    pub slope: f64,
    /// Percentile bootstrap interval (2.5%, 97.5%) for the slope.
    #[serde(with = "crate::serde_util::pair")]
    pub slope_ci: [f64; 2],
    #[serde(rename = "Pinf")]
    pub pinf: BeliefMeasure,
    /// Mass of `P∞` outside `B_0.05[x0]`.
    #[serde(rename = "PinfTvToDelta")]
    pub pinf_tv_to_delta: f64,
    /// Share of replicates whose posterior differs from `P∞` (exponential rates).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mismatch_rate: Option<Vec<f64>>,
    /// `(1 − ε)^N`, the chance the poll never reaches the subject.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mismatch_bound: Option<Vec<f64>>,
    /// `x0` sits on a cell boundary: share of replicates landing in the upper cell.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub split_fraction: Option<Vec<f64>>,
}

impl ConvergenceReport {
    pub fn records(&self) -> Vec<AsymRecord> {
        let exp = format!("convergence/{}", self.scenario);
        let mut out = Vec::new();
        for (rep, _) in self.tv_errors.first().into_iter().flatten().enumerate() {
            for (k, &n) in self.ns.iter().enumerate() {
                out.push(AsymRecord::new(
                    &exp,
                    n,
                    rep,
                    &self.quantity,
                    self.tv_errors[k][rep],
                ));
            }
        }
        out
    }
}

fn require_increasing(ns: &[usize], what: &str) -> Result<()> {
    if ns.is_empty() || ns[0] == 0 || ns.windows(2).any(|w| w[0] >= w[1]) {
        return invalid(format!("{what} must be positive and strictly increasing"));
    }
    Ok(())
}

fn one_feature_posterior(mu: &[f64]) -> Result<BeliefMeasure> {
    let m = mu
        .iter()
        .map(|&v| Marginal::OneTilt {
            lambda: one_tilt_for_mean(v, ONE_FEATURE_CAP).0,
        })
        .collect();
    BeliefMeasure::product(m)
}

fn two_feature_posterior(mu: &[f64]) -> Result<BeliefMeasure> {
    let m = mu
        .chunks(2)
        .map(|c| {
            let (a, b, _) = two_tilt_for_moments(c[0], c[1], TWO_FEATURE_CAP)?;
            Ok(Marginal::from_coefficients(a, b))
        })
        .collect::<Result<Vec<_>>>()?;
    BeliefMeasure::product(m)
}

fn decimal_cell_posterior(s: &DecimalScenario, cell: usize) -> Result<BeliefMeasure> {
    let mut w = vec![0.0; s.n];
    w[cell] = 1.0;
    let breaks: Vec<f64> = (0..=s.n).map(|i| i as f64 / s.n as f64).collect();
    BeliefMeasure::piecewise(Partition::grid(&[breaks])?, w)
}

/// Per scenario: the limit, how to draw one replicate's distance to it, and extras.
enum Plan<'a> {
    Coin(&'a CoinCubeScenario),
    Poll(&'a PollScenario),
    Decimal {
        s: &'a DecimalScenario,
        on_edge: bool,
    },
}

/// Simulate `r` replicates at each `N`, measure the distance of the posterior
/// to its limit `P∞`, and fit the log-log slope of the median distance.
///
/// Replicate `i` at size `N` draws from stream `(seed, "convergence/<scenario>/<N>", i)`.
pub fn primary_convergence(
    scenario: &ScenarioKind,
    ns: &[usize],
    r: usize,
    seed: u64,
) -> Result<ConvergenceReport> {
    require_increasing(ns, "Ns")?;
    if r < 2 {
        return invalid("R must be >= 2");
    }
    let name = scenario.name();
    let plan = match scenario {
        ScenarioKind::Coin(s) => {
            s.validate()?;
            if s.features_per_coord == 2 && ns[0] < 2 {
                return invalid("two features per coordinate need N >= 2");
            }
            Plan::Coin(s)
        }
        ScenarioKind::Poll(s) => {
            s.validate()?;
            Plan::Poll(s)
        }
        ScenarioKind::Decimal(s) => {
            s.validate()?;
            let scaled = s.x0 * s.n as f64;
            Plan::Decimal {
                s,
                on_edge: scaled > 0.0 && scaled == scaled.round(),
            }
        }
        _ => {
            return Err(LkaError::Unsupported(format!(
                "scenario {name} has no sample-average data to converge"
            )))
        }
    };

    let (pinf, x0, rate) = match &plan {
        Plan::Coin(s) => {
            let x0 = World::Point(s.x0.clone());
            if s.features_per_coord == 1 {
                (one_feature_posterior(&s.x0)?, x0, Rate::RootN)
            } else {
                let space = WorldSpace::cube(s.r)?;
                (BeliefMeasure::point_mass(&space, &x0)?, x0, Rate::PointMass)
            }
        }
        Plan::Poll(s) => {
            let target = if s.is_northern(s.x0) { 1.0 } else { 0.0 };
            (
                poll_posterior(s.d, s.h, target)?,
                World::Index(s.x0),
                Rate::Exponential,
            )
        }
        Plan::Decimal { s, .. } => (
            decimal_cell_posterior(s, cell_of(s.n, s.x0))?,
            World::Point(vec![s.x0]),
            Rate::Exponential,
        ),
    };
    let pinf_tv_to_delta = tv_to_point(&pinf, &x0, BALL_RADIUS)?;
    let quantity = if rate == Rate::PointMass {
        "tv_to_delta"
    } else {
        "tv_to_Pinf"
    };

    // (distance, differs from P∞, landed in the upper cell)
    let one = |n: usize, rng: &mut StreamRng| -> Result<(f64, bool, bool)> {
        match &plan {
            Plan::Coin(s) => {
                let heads = coin_heads(s, n, rng)?;
                let mu = coin_mu_hat(s.features_per_coord, &heads, n);
                if s.features_per_coord == 1 {
                    let p = one_feature_posterior(&mu)?;
                    let tv = tv_distance(&p, &pinf)?;
                    Ok((tv, tv > 0.0, false))
                } else {
                    let d = tv_to_point(&two_feature_posterior(&mu)?, &x0, BALL_RADIUS)?;
                    Ok((d, d > 0.0, false))
                }
            }
            Plan::Poll(s) => {
                let data = poll_data(s, n, rng);
                let p = poll_posterior(s.d, s.h, poll_mu_hat(s.d, s.h, &data)?)?;
                let tv = tv_distance(&p, &pinf)?;
                Ok((tv, tv > 0.0, false))
            }
            Plan::Decimal { s, .. } => {
                let b = Binomial::new(n as u64, s.x0)
                    .map_err(|e| LkaError::InvalidInput(e.to_string()))?;
                let dbar = b.sample(rng) as f64 / n as f64;
                let cell = cell_of(s.n, dbar);
                let home = cell_of(s.n, s.x0);
                let tv = if cell == home { 0.0 } else { 1.0 };
                Ok((tv, cell != home, cell >= home))
            }
        }
    };

    let mut tv_errors = Vec::with_capacity(ns.len());
    let mut mismatch = Vec::with_capacity(ns.len());
    let mut upper = Vec::with_capacity(ns.len());
    for &n in ns {
        let label = stream_id(&format!("convergence/{name}/{n}"));
        let reps: Vec<(f64, bool, bool)> = (0..r)
            .into_par_iter()
            .map(|i| one(n, &mut StreamRng::new(seed, label, i as u64)))
            .collect::<Result<_>>()?;
        let frac = |f: fn(&(f64, bool, bool)) -> bool| {
            reps.iter().filter(|v| f(v)).count() as f64 / r as f64
        };
        mismatch.push(frac(|v| v.1));
        upper.push(frac(|v| v.2));
        tv_errors.push(reps.iter().map(|v| v.0).collect::<Vec<_>>());
    }
    let medians: Vec<f64> = tv_errors.iter().map(|v| median(v)).collect();

    let on_edge = matches!(plan, Plan::Decimal { on_edge: true, .. });
    let (slope, slope_ci) = if on_edge {
        (f64::NAN, [f64::NAN; 2])
    } else {
        let slope = log_log_slope(ns, &medians);
        (slope, bootstrap_ci(ns, &tv_errors, seed))
    };
    let exponential = rate == Rate::Exponential;
    Ok(ConvergenceReport {
        scenario: name.into(),
        ns: ns.to_vec(),
        r,
        quantity: quantity.into(),
        rate,
        tv_errors,
        medians,
        slope,
        slope_ci,
        pinf,
        pinf_tv_to_delta,
        mismatch_rate: exponential.then_some(mismatch),
        mismatch_bound: match &plan {
            Plan::Poll(s) => Some(ns.iter().map(|&n| (1.0 - s.eps).powi(n as i32)).collect()),
            _ => None,
        },
        split_fraction: on_edge.then_some(upper),
    })
}

/// Slope over the sizes with a positive median; NaN with fewer than two.
fn log_log_slope(ns: &[usize], medians: &[f64]) -> f64 {
    let (x, y): (Vec<f64>, Vec<f64>) = ns
        .iter()
        .zip(medians)
        .filter(|(_, &m)| m > 0.0)
        .map(|(&n, &m)| ((n as f64).ln(), m.ln()))
        .unzip();
    if x.len() < 2 {
        f64::NAN
    } else {
        ols_slope(&x, &y)
    }
}

fn bootstrap_ci(ns: &[usize], tv: &[Vec<f64>], seed: u64) -> [f64; 2] {
    let mut rng = StreamRng::new(seed, stream_id("convergence/bootstrap"), 0);
    let mut slopes: Vec<f64> = (0..BOOTSTRAP_RESAMPLES)
        .map(|_| {
            let meds: Vec<f64> = tv
                .iter()
                .map(|v| {
                    let s: Vec<f64> = (0..v.len())
                        .map(|_| v[rng.random_range(0..v.len())])
                        .collect();
                    median(&s)
                })
                .collect();
            log_log_slope(ns, &meds)
        })
        .filter(|s| s.is_finite())
        .collect();
    if slopes.is_empty() {
        return [f64::NAN; 2];
    }
    slopes.sort_by(f64::total_cmp);
    let q = |p: f64| slopes[((p * (slopes.len() - 1) as f64).round()) as usize];
    [q(0.025), q(0.975)]
}

#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct CltReport {
    #[serde(rename = "A")]
    pub a: TruthSet,
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "R")]
    pub r: usize,
    /// `P∞(A)`.
    #[serde(rename = "PinfA")]
    pub pinf_a: f64,
    /// `P′(A; μ∞)`, one entry per feature.
    pub derivative: Vec<f64>,
    /// Covariance of one item's feature estimate.
    #[serde(rename = "Sigma")]
    pub sigma: Vec<Vec<f64>>,
    /// Variance over replicates of `√N (P_N(A) − P∞(A))`.
    pub empirical_var: f64,
    /// `C(A, A) = P′ Σ P′ᵀ`.
    pub predicted_var: f64,
    #[serde(with = "crate::serde_util")]
    pub ratio: f64,
    pub empirical_mean: f64,
    pub mean_stderr: f64,
    pub fd_step: f64,
    #[serde(skip)]
    pub deviations: Vec<f64>,
}

impl CltReport {
    pub fn records(&self) -> Vec<AsymRecord> {
        self.deviations
            .iter()
            .enumerate()
            .map(|(i, &v)| AsymRecord::new("clt", self.n, i, "sqrtN_dev", v))
            .collect()
    }
}

/// Compare the spread of `√N (P_N(A) − P∞(A))` over `r` replicates with the
/// delta-method variance `P′(A; μ∞) Σ P′(A; μ∞)ᵀ`.
///
/// Needs a one-feature coin, whose estimate is an average of i.i.d. flips
/// with Bernoulli covariance. Replicate `i` uses stream `(seed, "clt", i)`.
pub fn clt_check(
    scenario: &ScenarioKind,
    a: &TruthSet,
    n: usize,
    r: usize,
    seed: u64,
    fd_step: Option<f64>,
) -> Result<CltReport> {
    let s = match scenario {
        ScenarioKind::Coin(s) if s.features_per_coord == 1 => s,
        _ => {
            return Err(LkaError::Unsupported(
                "the delta-method check needs a one-feature coin scenario".into(),
            ))
        }
    };
    s.validate()?;
    let space = WorldSpace::cube(s.r)?;
    a.space.expect_same(&space)?;
    if n == 0 || r < 2 {
        return invalid("need N >= 1 and R >= 2");
    }
    let h = fd_step.unwrap_or(DEFAULT_CLT_FD_STEP);
    if !(h > 0.0 && h < 0.01) {
        return invalid("fd_step must lie in (0, 0.01)");
    }
    let mass = |mu: &[f64]| -> Result<f64> { one_feature_posterior(mu)?.measure_of(a) };
    let x0 = &s.x0;
    let pinf_a = mass(x0)?;

    let central = |i: usize, step: f64| -> Result<f64> {
        let mut up = x0.clone();
        let mut dn = x0.clone();
        up[i] += step;
        dn[i] -= step;
        if dn[i] < 0.0 || up[i] > 1.0 {
            return Err(LkaError::DegenerateA);
        }
        Ok((mass(&up)? - mass(&dn)?) / (2.0 * step))
    };
    let mut derivative = Vec::with_capacity(s.r);
    for i in 0..s.r {
        let d1 = central(i, h)?;
        let d2 = central(i, 2.0 * h)?;
        // a kink in P(A; μ) shows as disagreeing step sizes
        if (d1 - d2).abs() > 1e-3 * (1.0 + d1.abs()) {
            return Err(LkaError::DegenerateA);
        }
        derivative.push(d1);
    }
    let sigma: Vec<Vec<f64>> = (0..s.r)
        .map(|i| {
            (0..s.r)
                .map(|j| if i == j { x0[i] * (1.0 - x0[i]) } else { 0.0 })
                .collect()
        })
        .collect();
    let predicted_var: f64 = (0..s.r)
        .map(|i| {
            (0..s.r)
                .map(|j| derivative[i] * sigma[i][j] * derivative[j])
                .sum::<f64>()
        })
        .sum();

    let label = stream_id("clt");
    let root_n = (n as f64).sqrt();
    let deviations: Vec<f64> = (0..r)
        .into_par_iter()
        .map(|i| {
            let mut rng = StreamRng::new(seed, label, i as u64);
            let heads = coin_heads(s, n, &mut rng)?;
            let mu = coin_mu_hat(1, &heads, n);
            Ok(root_n * (mass(&mu)? - pinf_a))
        })
        .collect::<Result<_>>()?;
    let (mean, var) = mean_var(&deviations);
    Ok(CltReport {
        a: a.clone(),
        n,
        r,
        pinf_a,
        derivative,
        sigma,
        empirical_var: var,
        predicted_var,
        ratio: if predicted_var > 0.0 {
            var / predicted_var
        } else {
            f64::NAN
        },
        empirical_mean: mean,
        mean_stderr: (var / r as f64).sqrt(),
        fd_step: h,
        deviations,
    })
}

/// The sets checked when none is given: the scenario's truth set, its
/// complement, and three rectangles drawn from stream `(seed, "clt/sets", 0)`.
pub fn clt_default_sets(s: &CoinCubeScenario, seed: u64) -> Result<Vec<TruthSet>> {
    let t = s.truth_set()?;
    let mut sets = vec![t.clone()];
    if let Ok(c) = t.complement() {
        sets.push(c);
    }
    let mut rng = StreamRng::new(seed, stream_id("clt/sets"), 0);
    for _ in 0..3 {
        let b: Vec<(f64, f64)> = (0..s.r)
            .map(|_| {
                let u: f64 = rng.random_range(0.05..0.45);
                let v: f64 = rng.random_range(0.55..0.95);
                (u, v)
            })
            .collect();
        sets.push(TruthSet::rect(&b)?);
    }
    Ok(sets)
}
