//! One coin, `n` equal cells of [0, 1) with indicator features, and the
//! first- and second-decimal propositions about `x0`.

use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use super::Record;
use crate::error::{invalid, LkaError, Result};
use crate::lka::{default_eps_grid, verdict_from_masses, LkaReport};
use crate::maxent::{fit_lambda, CubeFeature, FeatureSet, MomentVector, SolverOptions};
use crate::rng::{stream_id, StreamRng};
use crate::worlds::{ball, tv_distance, BeliefMeasure, Metric, Partition, Rect, TruthSet, World};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct DecimalScenario {
    /// Number of cells, 10 or 100.
    pub n: usize,
    pub x0: f64,
}

impl DecimalScenario {
    pub fn validate(&self) -> Result<()> {
        if self.n != 10 && self.n != 100 {
            return invalid("n must be 10 or 100");
        }
        if !(0.0..1.0).contains(&self.x0) {
            return invalid("x0 must lie in [0, 1)");
        }
        Ok(())
    }

    pub fn cells(&self) -> Result<Partition> {
        let breaks: Vec<f64> = (0..=self.n).map(|i| i as f64 / self.n as f64).collect();
        Partition::grid(&[breaks])
    }

    pub fn features(&self) -> Result<FeatureSet> {
        let specs = (0..self.n)
            .map(|i| {
                Ok(CubeFeature::IntervalIndicator {
                    intervals: cell_rect(self.n, i)?,
                    scale: 1.0,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        FeatureSet::cube(1, specs)
    }
}

fn cell_rect(n: usize, i: usize) -> Result<Rect> {
    Rect::from_bounds(&[(i as f64 / n as f64, (i + 1) as f64 / n as f64)])
}

/// Index of the cell `[(i)/n, (i+1)/n)` holding `x`; `x = 1` joins the last cell.
pub fn cell_of(n: usize, x: f64) -> usize {
    ((x * n as f64).floor() as usize).min(n - 1)
}

/// `T`: the first decimal of `x` is 5.
pub fn first_decimal_five() -> TruthSet {
    TruthSet::rect(&[(0.5, 0.6)]).unwrap()
}

/// `T′`: the second decimal of `x` is 5.
pub fn second_decimal_five() -> TruthSet {
    let rects = (0..10)
        .map(|k| Rect::from_bounds(&[(k as f64 / 10.0 + 0.05, k as f64 / 10.0 + 0.06)]).unwrap())
        .collect();
    TruthSet::union(rects).unwrap()
}

/// Both propositions on the lattice of hundredths, as half-open `[lo, hi)`.
const FIRST_UNITS: [(u32, u32); 1] = [(50, 60)];

fn second_units() -> Vec<(u32, u32)> {
    (0..10).map(|k| (10 * k + 5, 10 * k + 6)).collect()
}

/// `P(S)` and `P₀(S)` for a union of hundredth intervals, in integer units so
/// equal masses come out as equal floats.
fn lattice_masses(mu_hat: &[f64], set: &[(u32, u32)]) -> (f64, f64) {
    let n = mu_hat.len() as u32;
    let width = 100 / n;
    let mut p = 0.0;
    for (i, &m) in mu_hat.iter().enumerate() {
        let (a, b) = (i as u32 * width, (i as u32 + 1) * width);
        let overlap: u32 = set
            .iter()
            .map(|&(lo, hi)| hi.min(b).saturating_sub(lo.max(a)))
            .sum();
        p += m * overlap as f64;
    }
    let total: u32 = set.iter().map(|&(lo, hi)| hi - lo).sum();
    (p / width as f64, total as f64 / 100.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct BallCheck {
    pub eps: f64,
    pub mass: f64,
    pub bound: f64,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct DecimalOutcome {
    pub n_flips: usize,
    pub heads: u64,
    pub dbar: f64,
    pub cell: usize,
    pub mu_hat: Vec<f64>,
    pub posterior: BeliefMeasure,
    pub first_decimal: LkaReport,
    pub second_decimal: LkaReport,
    /// `P(B_ε(x0)) ≤ 1/2 + nε` on radii below `1/(2n)`; empty unless `D̄` fell in the cell of `x0`.
    pub ball_checks: Vec<BallCheck>,
    /// `D̄` lies within `N^{-1/2}` of a cell boundary, where the limit is a coin toss.
    pub boundary_ambiguous: bool,
}

pub fn decimal_posterior(s: &DecimalScenario, n_flips: usize, seed: u64) -> Result<DecimalOutcome> {
    let mut rng = StreamRng::new(seed, stream_id("decimal"), 0);
    decimal_posterior_with(s, n_flips, &mut rng)
}

pub fn decimal_posterior_with(
    s: &DecimalScenario,
    n_flips: usize,
    rng: &mut StreamRng,
) -> Result<DecimalOutcome> {
    s.validate()?;
    if n_flips == 0 {
        return invalid("N must be >= 1");
    }
    let b =
        Binomial::new(n_flips as u64, s.x0).map_err(|e| LkaError::InvalidInput(e.to_string()))?;
    decimal_from_heads(s, n_flips, b.sample(rng))
}

pub fn decimal_from_heads(
    s: &DecimalScenario,
    n_flips: usize,
    heads: u64,
) -> Result<DecimalOutcome> {
    s.validate()?;
    let n = s.n;
    let dbar = heads as f64 / n_flips as f64;
    let cell = cell_of(n, dbar);
    let mut mu_hat = vec![0.0; n];
    mu_hat[cell] = 1.0;
    let posterior = BeliefMeasure::piecewise(s.cells()?, mu_hat.clone())?;
    let p0 = BeliefMeasure::uniform(posterior.space());
    let x0 = World::Point(vec![s.x0]);
    let verdict = |t: &TruthSet, units: &[(u32, u32)]| {
        let (p_t, p0_t) = lattice_masses(&mu_hat, units);
        let grid = default_eps_grid(posterior.space());
        verdict_from_masses(&p0, &posterior, t, &x0, Metric::SupNorm, grid, p_t, p0_t)
    };
    let first = verdict(&first_decimal_five(), &FIRST_UNITS)?;
    let second = verdict(&second_decimal_five(), &second_units())?;

    let mut ball_checks = Vec::new();
    if cell == cell_of(n, s.x0) {
        let top = 1.0 / (2.0 * n as f64);
        for k in 1..=8 {
            let eps = top * k as f64 / 9.0;
            let b = ball(posterior.space(), Metric::SupNorm, &x0, eps, false)?;
            let mass = posterior.measure_of(&b)?;
            let bound = 0.5 + n as f64 * eps;
            ball_checks.push(BallCheck {
                eps,
                mass,
                bound,
                holds: mass <= bound + 1e-12,
            });
        }
    }
    let nearest = (dbar * n as f64).round() / n as f64;
    let boundary_ambiguous = (dbar - nearest).abs() < (n_flips as f64).powf(-0.5);
    Ok(DecimalOutcome {
        n_flips,
        heads,
        dbar,
        cell,
        mu_hat,
        posterior,
        first_decimal: first,
        second_decimal: second,
        ball_checks,
        boundary_ambiguous,
    })
}

impl DecimalOutcome {
    pub fn generic_fit_tv(&self, s: &DecimalScenario) -> Result<f64> {
        let prior = BeliefMeasure::uniform(self.posterior.space());
        let fit = fit_lambda(
            &prior,
            &s.features()?,
            &MomentVector::new(self.mu_hat.clone()),
            &SolverOptions::default(),
        )?;
        tv_distance(&fit.posterior.measure()?, &self.posterior)
    }

    pub fn records(&self, seed: u64, replicate: usize) -> Vec<Record> {
        let rec = |q: &str, v: f64| Record::new("decimal", seed, self.n_flips, replicate, q, v);
        vec![
            rec("dbar", self.dbar),
            rec("cell", self.cell as f64),
            rec("activeInfoFirst", self.first_decimal.active_info),
            rec("activeInfoSecond", self.second_decimal.active_info),
            rec("P_T", self.first_decimal.raw_values.p_t),
            rec("P_T2", self.second_decimal.raw_values.p_t),
            rec(
                "fullLearningFirst",
                self.first_decimal.full_learning as u8 as f64,
            ),
            rec(
                "fullLearningSecond",
                self.second_decimal.full_learning as u8 as f64,
            ),
            rec("boundaryAmbiguous", self.boundary_ambiguous as u8 as f64),
        ]
    }
}
