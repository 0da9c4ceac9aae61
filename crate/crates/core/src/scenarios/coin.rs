//! Coins with unknown head probabilities `x0 ∈ [0,1]^r`, flipped `N` times,
//! with one (linear) or two (linear and quadratic) features per coordinate.

use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use super::Record;
use crate::error::{invalid, Result};
use crate::lka::{lka_verdict, LkaReport};
use crate::maxent::{fit_lambda, FeatureSet, MomentVector, SolverOptions};
use crate::numeric::tilt::{one_mass, one_mean, one_var};
use crate::numeric::Tilt;
use crate::rng::{stream_id, StreamRng};
use crate::worlds::{ball, tv_distance, BeliefMeasure, Marginal, Metric, Rect, TruthSet, World};

/// Default cap on one-feature coefficients.
pub const ONE_FEATURE_CAP: f64 = 60.0;
/// Two-feature coefficients grow like `N/x(1−x)`; this cap is far above any reachable value.
pub const TWO_FEATURE_CAP: f64 = 1e12;
/// Radius of the reported ball mass `P(B_ε[x0])`.
pub const BALL_RADIUS: f64 = 0.05;
const MOMENT_TOL: f64 = 1e-15;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct CoinCubeScenario {
    pub r: usize,
    #[serde(default = "one")]
    pub features_per_coord: usize,
    pub x0: Vec<f64>,
    /// `[a_i, b_i]` per coordinate; the whole cube when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truth: Option<Vec<[f64; 2]>>,
}

fn one() -> usize {
    1
}

impl CoinCubeScenario {
    pub fn validate(&self) -> Result<()> {
        if self.r == 0 {
            return invalid("r must be >= 1");
        }
        if !(1..=2).contains(&self.features_per_coord) {
            return invalid("featuresPerCoord must be 1 or 2");
        }
        if self.x0.len() != self.r || self.x0.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return invalid("x0 must be a point of [0,1]^r");
        }
        self.truth_set().map(|_| ())
    }

    pub fn truth_set(&self) -> Result<TruthSet> {
        match &self.truth {
            None => Ok(TruthSet::rect(&vec![(0.0, 1.0); self.r])?),
            Some(t) if t.len() == self.r => {
                let b: Vec<(f64, f64)> = t.iter().map(|iv| (iv[0], iv[1])).collect();
                if b.iter().any(|(a, b)| !(a < b)) {
                    return invalid("truth intervals need a < b");
                }
                TruthSet::rect(&b)
            }
            Some(_) => invalid("truth needs one interval per coordinate"),
        }
    }

    pub fn features(&self) -> Result<FeatureSet> {
        if self.features_per_coord == 1 {
            FeatureSet::coordinate_linear(self.r)
        } else {
            FeatureSet::coordinate_quadratic(self.r)
        }
    }
}

/// Coefficient `a` with `E[t] = mu` under the density `∝ e^{a t}` on [0, 1],
/// clamped to `±cap`; the flag is set when the clamp binds.
pub fn one_tilt_for_mean(mu: f64, cap: f64) -> (f64, bool) {
    if mu <= one_mean(-cap) {
        return (-cap, true);
    }
    if mu >= one_mean(cap) {
        return (cap, true);
    }
    let (mut lo, mut hi) = (-cap, cap);
    // start from the asymptotic inverse of the mean
    let mut a = if mu < 0.05 {
        -1.0 / mu
    } else if mu > 0.95 {
        1.0 / (1.0 - mu)
    } else {
        12.0 * (mu - 0.5)
    };
    for _ in 0..200 {
        a = a.clamp(lo, hi);
        let g = one_mean(a) - mu;
        if g.abs() <= MOMENT_TOL {
            break;
        }
        if g > 0.0 {
            hi = a;
        } else {
            lo = a;
        }
        let next = a - g / one_var(a);
        a = if next > lo && next < hi {
            next
        } else {
            0.5 * (lo + hi)
        };
        if hi - lo <= 1e-15 * (1.0 + a.abs()) {
            break;
        }
    }
    (a, false)
}

/// Coefficients `(a, b)` of `e^{a t + b t²}` with first two moments `m1`, `m2`.
///
/// Targets with `m2 ≤ m1²` (a vanishing variance) return the one-feature
/// boundary tilt with the flag set.
pub fn two_tilt_for_moments(m1: f64, m2: f64, cap: f64) -> Result<(f64, f64, bool)> {
    if !(m1 > 0.0 && m1 < 1.0) || !(m2 > m1 * m1 && m2 < m1) {
        let a = if m1 <= 0.5 {
            -ONE_FEATURE_CAP
        } else {
            ONE_FEATURE_CAP
        };
        return Ok((a, 0.0, true));
    }
    let v = m2 - m1 * m1;
    let mut lam = if v < 1.0 / 24.0 {
        [m1 / v, -0.5 / v]
    } else {
        [0.0, 0.0]
    };
    let psi = |t: &Tilt, l: &[f64; 2]| t.log_norm() - l[0] * m1 - l[1] * m2;
    let mut t = Tilt::new(lam[0], lam[1]);
    for _ in 0..400 {
        let (m, c) = t.quad_stats();
        let g = [m[0] - m1, m[1] - m2];
        // residual on the centred scale, where the target variance lives
        if g[0].abs() <= MOMENT_TOL && (g[1] - 2.0 * m1 * g[0]).abs() <= MOMENT_TOL {
            return Ok((lam[0], lam[1], false));
        }
        let det = c[0][0] * c[1][1] - c[0][1] * c[1][0];
        let mut dir = if det > 0.0 {
            [
                -(c[1][1] * g[0] - c[0][1] * g[1]) / det,
                -(-c[1][0] * g[0] + c[0][0] * g[1]) / det,
            ]
        } else {
            [-g[0], -g[1]]
        };
        if dir[0] * g[0] + dir[1] * g[1] >= 0.0 {
            dir = [-g[0], -g[1]];
        }
        let f0 = psi(&t, &lam);
        let slack = 4.0 * f64::EPSILON * (1.0 + f0.abs());
        let mut step = 1.0;
        let mut moved = false;
        for _ in 0..60 {
            let cand = [
                (lam[0] + step * dir[0]).clamp(-cap, cap),
                (lam[1] + step * dir[1]).clamp(-cap, cap),
            ];
            let tc = Tilt::new(cand[0], cand[1]);
            let dec = (cand[0] - lam[0]) * g[0] + (cand[1] - lam[1]) * g[1];
            if psi(&tc, &cand) <= f0 + 1e-4 * dec + slack {
                moved = cand != lam;
                lam = cand;
                t = tc;
                break;
            }
            step *= 0.5;
        }
        if !moved {
            break;
        }
    }
    let (m, _) = t.quad_stats();
    let gap = (m[0] - m1).abs().max((m[1] - m2).abs());
    if gap <= 1e-12 {
        Ok((lam[0], lam[1], false))
    } else {
        Err(crate::LkaError::NotConverged {
            iterations: 400,
            grad_norm: gap,
        })
    }
}

/// `sup_λ P([a, b]; λ)` for the one-feature tilt on [0, 1].
pub fn g_bar(a: f64, b: f64) -> f64 {
    if a <= 0.0 || b >= 1.0 {
        return 1.0;
    }
    let f = |l: f64| one_mass(l, a, b);
    // coarse scan to bracket the mode, then golden section
    let grid: Vec<f64> = (0..=800).map(|i| -400.0 + i as f64).collect();
    let best = grid
        .iter()
        .copied()
        .max_by(|x, y| f(*x).total_cmp(&f(*y)))
        .unwrap();
    let (mut lo, mut hi) = (best - 1.0, best + 1.0);
    let phi = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..100 {
        let c = hi - phi * (hi - lo);
        let d = lo + phi * (hi - lo);
        if f(c) > f(d) {
            hi = d;
        } else {
            lo = c;
        }
    }
    f(0.5 * (lo + hi)).max(f(best))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct CoinOutcome {
    pub n: usize,
    pub heads: Vec<u64>,
    pub dbar: Vec<f64>,
    /// Feature-ordered targets (`x_1, x_1², x_2, …` with two features).
    pub mu_hat: Vec<f64>,
    pub lambda: Vec<f64>,
    /// Coordinates whose target sat on the boundary; their coefficients are capped.
    pub boundary: Vec<bool>,
    pub posterior: BeliefMeasure,
    pub report: LkaReport,
    /// `P(B_ε[x0])` with `ε = 0.05`.
    pub ball_mass: f64,
}

/// The estimated feature vector from head counts.
pub fn coin_mu_hat(features_per_coord: usize, heads: &[u64], n: usize) -> Vec<f64> {
    let nf = n as f64;
    let mut mu = Vec::new();
    for &k in heads {
        let d = k as f64 / nf;
        mu.push(d);
        if features_per_coord == 2 {
            mu.push(d * d + d * (1.0 - d) / nf);
        }
    }
    mu
}

pub fn coin_heads(s: &CoinCubeScenario, n: usize, rng: &mut StreamRng) -> Result<Vec<u64>> {
    s.x0.iter()
        .map(|&p| {
            let b = Binomial::new(n as u64, p)
                .map_err(|e| crate::LkaError::InvalidInput(e.to_string()))?;
            Ok(b.sample(rng))
        })
        .collect()
}

pub fn coin_simulate(s: &CoinCubeScenario, n: usize, seed: u64) -> Result<CoinOutcome> {
    let mut rng = StreamRng::new(seed, stream_id("coin"), 0);
    coin_simulate_with(s, n, &mut rng)
}

pub fn coin_simulate_with(
    s: &CoinCubeScenario,
    n: usize,
    rng: &mut StreamRng,
) -> Result<CoinOutcome> {
    s.validate()?;
    if n == 0 || (s.features_per_coord == 2 && n < 2) {
        return invalid("N must be >= 1 (>= 2 with two features per coordinate)");
    }
    let heads = coin_heads(s, n, rng)?;
    coin_from_heads(s, n, heads)
}

/// Posterior for given head counts.
pub fn coin_from_heads(s: &CoinCubeScenario, n: usize, heads: Vec<u64>) -> Result<CoinOutcome> {
    s.validate()?;
    if heads.len() != s.r || heads.iter().any(|&k| k > n as u64) {
        return invalid("need one head count per coordinate, each at most N");
    }
    let mu_hat = coin_mu_hat(s.features_per_coord, &heads, n);
    let mut lambda = Vec::new();
    let mut boundary = Vec::new();
    let mut marginals = Vec::new();
    for i in 0..s.r {
        if s.features_per_coord == 1 {
            let (a, hit) = one_tilt_for_mean(mu_hat[i], ONE_FEATURE_CAP);
            lambda.push(a);
            boundary.push(hit);
            marginals.push(Marginal::OneTilt { lambda: a });
        } else {
            let (a, b, hit) =
                two_tilt_for_moments(mu_hat[2 * i], mu_hat[2 * i + 1], TWO_FEATURE_CAP)?;
            lambda.extend([a, b]);
            boundary.push(hit);
            marginals.push(Marginal::from_coefficients(a, b));
        }
    }
    let posterior = BeliefMeasure::product(marginals)?;
    let p0 = BeliefMeasure::uniform(posterior.space());
    let x0 = World::Point(s.x0.clone());
    let t = s.truth_set()?;
    let report = lka_verdict(&p0, &posterior, &t, &x0, Metric::SupNorm, None)?;
    let ball_mass = posterior.measure_of(&ball(
        posterior.space(),
        Metric::SupNorm,
        &x0,
        BALL_RADIUS,
        true,
    )?)?;
    Ok(CoinOutcome {
        dbar: heads.iter().map(|&k| k as f64 / n as f64).collect(),
        n,
        heads,
        mu_hat,
        lambda,
        boundary,
        posterior,
        report,
        ball_mass,
    })
}

/// `sup_λ P(T; λ)` over one-feature posteriors, `T = ×[a_i, b_i]`.
pub fn coin_sup_truth_mass(truth: &Rect) -> f64 {
    truth
        .intervals
        .iter()
        .map(|iv| g_bar(iv.lo, iv.hi))
        .product()
}

impl CoinOutcome {
    pub fn generic_fit_tv(&self, s: &CoinCubeScenario) -> Result<f64> {
        if self.boundary.iter().any(|&b| b) {
            return invalid("boundary targets have no finite generic fit to compare");
        }
        let f = s.features()?;
        let prior = BeliefMeasure::uniform(self.posterior.space());
        let mut opts = SolverOptions::default();
        if s.features_per_coord == 2 {
            opts.lambda_cap = TWO_FEATURE_CAP;
            opts.gradient_tolerance = 1e-14;
            opts.max_iterations = 400;
        }
        let fit = fit_lambda(&prior, &f, &MomentVector::new(self.mu_hat.clone()), &opts)?;
        tv_distance(&fit.posterior.measure()?, &self.posterior)
    }

    pub fn records(&self, seed: u64, replicate: usize) -> Vec<Record> {
        let rec = |q: String, v: f64| Record::new("coin", seed, self.n, replicate, &q, v);
        let mut out = Vec::new();
        for (i, d) in self.dbar.iter().enumerate() {
            out.push(rec(format!("dbar[{i}]"), *d));
        }
        for (i, l) in self.lambda.iter().enumerate() {
            out.push(rec(format!("lambda[{i}]"), *l));
        }
        out.push(rec("activeInfo".into(), self.report.active_info));
        out.push(rec("P_T".into(), self.report.raw_values.p_t));
        out.push(rec("ballMass".into(), self.ball_mass));
        out.push(rec(
            "knowledgeAcquired".into(),
            self.report.knowledge_acquired as u8 as f64,
        ));
        out
    }
}
