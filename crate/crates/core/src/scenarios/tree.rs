//! Recursively split binary trees on `[0,1]^r` and their piecewise constant
//! posteriors.

use serde::{Deserialize, Serialize};

use crate::error::{LkaError, Result};
use crate::maxent::{fit_lambda, CubeFeature, FeatureSet, MomentVector, SolverOptions};
use crate::worlds::{ball, tv_distance, BeliefMeasure, Interval, Metric, Partition, Rect, World};

/// A node: a leaf, or a split sending `x_coord < point` left and `x_coord ≥ point`
/// right with probability `prob` of turning right.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TreeNode {
    Leaf,
    Split {
        coord: usize,
        point: f64,
        prob: f64,
        left: Box<TreeNode>,
        right: Box<TreeNode>,
    },
}

impl TreeNode {
    pub fn split(coord: usize, point: f64, prob: f64, left: TreeNode, right: TreeNode) -> TreeNode {
        TreeNode::Split {
            coord,
            point,
            prob,
            left: Box::new(left),
            right: Box::new(right),
        }
    }

    /// Balanced tree of the given depth, splitting coordinates in turn at
    /// fraction `point` of each node's current range.
    pub fn balanced(r: usize, depth: usize, point: f64, prob: f64) -> TreeNode {
        fn go(
            lo: &mut [f64],
            hi: &mut [f64],
            level: usize,
            depth: usize,
            point: f64,
            prob: f64,
        ) -> TreeNode {
            if level == depth {
                return TreeNode::Leaf;
            }
            let c = level % lo.len();
            let (a, b) = (lo[c], hi[c]);
            let cut = a + point * (b - a);
            hi[c] = cut;
            let left = go(lo, hi, level + 1, depth, point, prob);
            hi[c] = b;
            lo[c] = cut;
            let right = go(lo, hi, level + 1, depth, point, prob);
            lo[c] = a;
            TreeNode::split(c, cut, prob, left, right)
        }
        go(&mut vec![0.0; r], &mut vec![1.0; r], 0, depth, point, prob)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TreeScenario {
    pub r: usize,
    pub root: TreeNode,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TreeLeaf {
    pub bounds: Vec<[f64; 2]>,
    /// Turns from the root, 0 = left.
    pub path: Vec<u8>,
    pub volume: f64,
    pub weight: f64,
    /// `log(weight/volume)`, the log density on the leaf.
    pub lambda: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TreeOutcome {
    pub leaves: Vec<TreeLeaf>,
    pub partition: Partition,
    pub posterior: BeliefMeasure,
    /// λ gauge: `λ_i` is the log density on leaf `i`.
    pub gauge: String,
    pub max_diameter: f64,
    /// `n^{-1/r}`, the least possible largest leaf diameter.
    pub diameter_lower_bound: f64,
    pub diameter_bound_holds: bool,
    /// Centre of the widest leaf, with a radius below half its diameter.
    pub witness_x0: Vec<f64>,
    pub witness_eps: f64,
    /// `P(B_ε(x0))` at the witness; below one.
    pub witness_ball_mass: f64,
}

struct Walk {
    leaves: Vec<TreeLeaf>,
    rects: Vec<Rect>,
}

fn walk(
    node: &TreeNode,
    r: usize,
    rect: Vec<Interval>,
    path: &mut Vec<u8>,
    w: f64,
    out: &mut Walk,
) -> Result<()> {
    match node {
        TreeNode::Leaf => {
            let rc = Rect::new(rect)?;
            let volume = rc.volume();
            if !(volume > 0.0) {
                return Err(LkaError::InvalidTree(format!(
                    "leaf {:?} has zero volume",
                    path
                )));
            }
            out.leaves.push(TreeLeaf {
                bounds: rc.intervals.iter().map(|iv| [iv.lo, iv.hi]).collect(),
                path: path.clone(),
                volume,
                weight: w,
                lambda: (w / volume).ln(),
            });
            out.rects.push(rc);
            Ok(())
        }
        TreeNode::Split {
            coord,
            point,
            prob,
            left,
            right,
        } => {
            if *coord >= r {
                return Err(LkaError::InvalidTree(format!(
                    "split coordinate {coord} >= r = {r}"
                )));
            }
            if !(*point > 0.0 && *point < 1.0) || !(*prob > 0.0 && *prob < 1.0) {
                return Err(LkaError::InvalidTree(
                    "split points and probabilities must lie in (0, 1)".into(),
                ));
            }
            let iv = rect[*coord];
            if !(*point > iv.lo && *point < iv.hi) {
                // one child would be empty and the other would overlap its sibling's region
                return Err(LkaError::InvalidTree(format!(
                    "split at {point} outside the node's range [{}, {}] on coordinate {coord}",
                    iv.lo, iv.hi
                )));
            }
            let mut lr = rect.clone();
            lr[*coord] = Interval {
                lo: iv.lo,
                hi: *point,
            };
            path.push(0);
            walk(left, r, lr, path, w * (1.0 - prob), out)?;
            path.pop();
            let mut rr = rect;
            rr[*coord] = Interval {
                lo: *point,
                hi: iv.hi,
            };
            path.push(1);
            walk(right, r, rr, path, w * prob, out)?;
            path.pop();
            Ok(())
        }
    }
}

pub fn tree_build(s: &TreeScenario) -> Result<TreeOutcome> {
    if s.r == 0 {
        return Err(LkaError::InvalidTree("r must be >= 1".into()));
    }
    let mut out = Walk {
        leaves: Vec::new(),
        rects: Vec::new(),
    };
    walk(
        &s.root,
        s.r,
        vec![Interval::unit(); s.r],
        &mut Vec::new(),
        1.0,
        &mut out,
    )?;
    let vol: f64 = out.leaves.iter().map(|l| l.volume).sum();
    let wsum: f64 = out.leaves.iter().map(|l| l.weight).sum();
    if (vol - 1.0).abs() > 1e-12 || (wsum - 1.0).abs() > 1e-12 {
        return Err(LkaError::InvalidTree(format!(
            "leaf volumes sum to {vol}, weights to {wsum}"
        )));
    }
    let partition =
        Partition::cube(out.rects.clone()).map_err(|e| LkaError::InvalidTree(e.to_string()))?;
    let weights: Vec<f64> = out.leaves.iter().map(|l| l.weight).collect();
    let posterior = BeliefMeasure::piecewise(partition.clone(), weights)?;

    let n = out.leaves.len() as f64;
    let (wide, max_diameter) = out
        .rects
        .iter()
        .map(Rect::diameter)
        .enumerate()
        .fold((0, 0.0), |acc, (i, d)| if d > acc.1 { (i, d) } else { acc });
    let lower = n.powf(-1.0 / s.r as f64);
    let witness_x0: Vec<f64> = out.rects[wide]
        .intervals
        .iter()
        .map(|iv| 0.5 * (iv.lo + iv.hi))
        .collect();
    let witness_eps = 0.25 * max_diameter;
    let b = ball(
        posterior.space(),
        Metric::SupNorm,
        &World::Point(witness_x0.clone()),
        witness_eps,
        false,
    )?;
    let witness_ball_mass = posterior.measure_of(&b)?;
    Ok(TreeOutcome {
        leaves: out.leaves,
        partition,
        posterior,
        gauge: "log-density".into(),
        max_diameter,
        diameter_lower_bound: lower,
        diameter_bound_holds: max_diameter >= lower - 1e-12,
        witness_x0,
        witness_eps,
        witness_ball_mass,
    })
}

impl TreeOutcome {
    pub fn generic_fit_tv(&self) -> Result<f64> {
        let r = self.posterior.space().dim().unwrap();
        let specs = self
            .partition
            .rects()
            .unwrap()
            .iter()
            .map(|rc| CubeFeature::IntervalIndicator {
                intervals: rc.clone(),
                scale: 1.0,
            })
            .collect();
        let f = FeatureSet::cube(r, specs)?;
        let mu: Vec<f64> = self.leaves.iter().map(|l| l.weight).collect();
        let prior = BeliefMeasure::uniform(self.posterior.space());
        let fit = fit_lambda(
            &prior,
            &f,
            &MomentVector::new(mu),
            &SolverOptions::default(),
        )?;
        tv_distance(&fit.posterior.measure()?, &self.posterior)
    }
}
