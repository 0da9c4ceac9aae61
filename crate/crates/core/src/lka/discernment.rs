use serde::{Deserialize, Serialize};

use crate::error::{invalid, LkaError, Result};
use crate::worlds::{BeliefMeasure, Partition, TruthSet, World};

/// Largest spread of `P` inside one block still counted as constant.
const MEASURABLE_TOL: f64 = 1e-12;
const CONDITIONAL_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct DiscernmentViolation {
    pub probe: usize,
    pub block: usize,
    pub conditional_p: f64,
    pub conditional_p0: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct DiscernmentReport {
    pub passed: bool,
    /// (probe, block) pairs compared.
    pub checked: usize,
    pub violations: Vec<DiscernmentViolation>,
}

impl DiscernmentReport {
    pub fn first_violation(&self) -> Option<&DiscernmentViolation> {
        self.violations.first()
    }
}

fn finite_probs(mu: &BeliefMeasure) -> Result<Vec<f64>> {
    mu.probs()
        .ok_or_else(|| LkaError::Unsupported("discernment checks need a finite space".into()))
}

/// Check that `p` cannot discern beyond `g_a`: for every probe `g`,
/// `E_P[g | 𝒢] = E_{P₀}[g | 𝒢]` on the blocks of `refinement` that carry mass
/// under both measures.
pub fn discernment_check(
    p0: &BeliefMeasure,
    p: &BeliefMeasure,
    g_a: &Partition,
    refinement: &Partition,
    probes: &[TruthSet],
) -> Result<DiscernmentReport> {
    let space = p0.space();
    space.expect_same(p.space())?;
    space.expect_same(g_a.space())?;
    space.expect_same(refinement.space())?;
    if !refinement.refines(g_a) {
        return invalid("refinement must refine the discernment partition");
    }
    let q0 = finite_probs(p0)?;
    let q = finite_probs(p)?;
    for b in 0..g_a.len() {
        let m = g_a.members(b);
        let (lo, hi) = m
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &k| {
                (lo.min(q[k]), hi.max(q[k]))
            });
        if hi - lo > MEASURABLE_TOL {
            return Err(LkaError::NotMeasurable { block: b });
        }
    }

    let mut violations = Vec::new();
    let mut checked = 0;
    for (pi, g) in probes.iter().enumerate() {
        space.expect_same(&g.space)?;
        let mask = g.mask().unwrap();
        for b in 0..refinement.len() {
            let m = refinement.members(b);
            let mass = |w: &[f64], only: bool| {
                m.iter()
                    .filter(|&&k| !only || mask[k])
                    .map(|&k| w[k])
                    .sum::<f64>()
            };
            let (d, d0) = (mass(&q, false), mass(&q0, false));
            if !(d > 0.0 && d0 > 0.0) {
                continue;
            }
            checked += 1;
            let (c, c0) = (mass(&q, true) / d, mass(&q0, true) / d0);
            if (c - c0).abs() > CONDITIONAL_TOL {
                violations.push(DiscernmentViolation {
                    probe: pi,
                    block: b,
                    conditional_p: c,
                    conditional_p0: c0,
                });
            }
        }
    }
    Ok(DiscernmentReport {
        passed: violations.is_empty(),
        checked,
        violations,
    })
}

/// One case of the partition theorem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct PartitionCase {
    pub holds: bool,
    /// The block that satisfies an existential case or violates a universal one.
    pub witness_block: Option<usize>,
    pub witness_members: Option<Vec<usize>>,
    /// For cases ii, iv and vi: `P₀` conditioned on the witness block.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub witness_measure: Option<BeliefMeasure>,
}

impl PartitionCase {
    fn new(holds: bool, witness: Option<usize>, part: &Partition) -> Self {
        PartitionCase {
            holds,
            witness_block: witness,
            witness_members: witness.map(|b| part.members(b)),
            witness_measure: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct PartitionConditionsReport {
    /// No block inside `T` and each leaves mass outside it: `P(T) < 1` always.
    pub case_i: PartitionCase,
    /// Some block inside `T`: `P(T) = 1` is reachable.
    pub case_ii: PartitionCase,
    /// Each block meets `T` with mass: `P(T) > 0` always.
    pub case_iii: PartitionCase,
    /// Some block misses `T`: `P(T) = 0` is reachable.
    pub case_iv: PartitionCase,
    /// The block of `x0` has mass besides `x0`: `P(x0) < 1` always.
    pub case_v: PartitionCase,
    /// `{x0}` is a block: `P(x0) = 1` is reachable.
    pub case_vi: PartitionCase,
}

fn conditioned(p0: &[f64], members: &[usize]) -> Result<BeliefMeasure> {
    let mut w = vec![0.0; p0.len()];
    for &k in members {
        w[k] = p0[k];
    }
    BeliefMeasure::finite_from_weights(&w)
}

/// Evaluate the six cases of the partition theorem for `(P₀, 𝒫, T, x0)`.
pub fn theorem_partition_conditions(
    p0: &BeliefMeasure,
    partition: &Partition,
    t: &TruthSet,
    x0: &World,
) -> Result<PartitionConditionsReport> {
    let space = p0.space();
    space.expect_same(partition.space())?;
    space.expect_same(&t.space)?;
    space.check_world(x0)?;
    let q = finite_probs(p0)?;
    let mask = t.mask().unwrap();
    let blocks: Vec<Vec<usize>> = (0..partition.len()).map(|b| partition.members(b)).collect();
    let mass = |m: &[usize], f: &dyn Fn(usize) -> bool| {
        m.iter().filter(|&&k| f(k)).map(|&k| q[k]).sum::<f64>()
    };
    if let Some(b) = blocks.iter().position(|m| !(mass(m, &|_| true) > 0.0)) {
        return invalid(format!("block {b} has zero prior mass"));
    }

    let inside_t = |m: &Vec<usize>| m.iter().all(|&k| mask[k]);
    let misses_t = |m: &Vec<usize>| m.iter().all(|&k| !mask[k]);

    let viol_i = blocks
        .iter()
        .position(|m| inside_t(m) || !(mass(m, &|k| !mask[k]) > 0.0));
    let case_i = PartitionCase::new(viol_i.is_none(), viol_i, partition);
    let wit_ii = blocks.iter().position(inside_t);
    let mut case_ii = PartitionCase::new(wit_ii.is_some(), wit_ii, partition);
    if let Some(b) = wit_ii {
        case_ii.witness_measure = Some(conditioned(&q, &blocks[b])?);
    }

    let viol_iii = blocks.iter().position(|m| !(mass(m, &|k| mask[k]) > 0.0));
    let case_iii = PartitionCase::new(viol_iii.is_none(), viol_iii, partition);
    let wit_iv = blocks.iter().position(misses_t);
    let mut case_iv = PartitionCase::new(wit_iv.is_some(), wit_iv, partition);
    if let Some(b) = wit_iv {
        case_iv.witness_measure = Some(conditioned(&q, &blocks[b])?);
    }

    let k0 = x0.index().unwrap();
    let b0 = partition.locate(x0).unwrap();
    let m0 = &blocks[b0];
    let case_v = PartitionCase::new(
        m0.len() > 1 && mass(m0, &|k| k != k0) > 0.0,
        Some(b0),
        partition,
    );
    let single = m0.len() == 1;
    let mut case_vi = PartitionCase::new(single, single.then_some(b0), partition);
    if single {
        case_vi.witness_measure = Some(conditioned(&q, m0)?);
    }
    Ok(PartitionConditionsReport {
        case_i,
        case_ii,
        case_iii,
        case_iv,
        case_v,
        case_vi,
    })
}
