//! Binary-expansion features that single out any world, and the counting
//! argument showing fewer features cannot.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::maxent::FeatureSet;
use crate::worlds::BeliefMeasure;

fn bits_for(d: usize) -> usize {
    (usize::BITS - (d - 1).leading_zeros()) as usize
}

/// `⌈log₂ d⌉` features; feature `i` is bit `i` (least significant first) of the world index.
pub fn fundamental_limit_features(d: usize) -> Result<FeatureSet> {
    if d < 2 {
        return invalid("d must be >= 2");
    }
    let n = bits_for(d);
    let rows: Vec<Vec<f64>> = (0..d)
        .map(|k| (0..n).map(|i| ((k >> i) & 1) as f64).collect())
        .collect();
    FeatureSet::from_rows(&rows)
}

/// `λ_i = +magnitude` where bit `i` of `x0` is set, `−magnitude` elsewhere.
pub fn lambda_for_world(d: usize, x0: usize, magnitude: f64) -> Result<Vec<f64>> {
    if d < 2 || x0 >= d {
        return invalid("need d >= 2 and x0 < d");
    }
    if !(magnitude > 0.0) || !magnitude.is_finite() {
        return invalid("magnitude must be positive");
    }
    Ok((0..bits_for(d))
        .map(|i| {
            if (x0 >> i) & 1 == 1 {
                magnitude
            } else {
                -magnitude
            }
        })
        .collect())
}

/// Worlds grouped by their feature vector, in order of first appearance.
pub fn feature_cells(features: &FeatureSet) -> Result<Vec<Vec<usize>>> {
    let (Some(d), Some(values)) = (features.space().size(), features.values()) else {
        return invalid("feature cells need a finite space");
    };
    let n = features.n();
    let mut index: BTreeMap<Vec<u64>, usize> = BTreeMap::new();
    let mut cells: Vec<Vec<usize>> = Vec::new();
    for k in 0..d {
        let key: Vec<u64> = values[k * n..(k + 1) * n]
            .iter()
            .map(|v| v.to_bits())
            .collect();
        let next = cells.len();
        let c = *index.entry(key).or_insert(next);
        if c == cells.len() {
            cells.push(Vec::new());
        }
        cells[c].push(k);
    }
    Ok(cells)
}

/// A world whose Gibbs probability stays bounded away from one for every `λ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct PigeonholeCertificate {
    pub cell: Vec<usize>,
    pub x0: usize,
    /// `P₀(x0)/P₀(cell)`, an upper bound on `P(x0; λ)` over all `λ`.
    pub bound: f64,
}

/// Find the world with the smallest sup-λ bound.
///
/// Every Gibbs posterior is constant in likelihood on a cell, so
/// `P(x0; λ) ≤ P₀(x0)/P₀(cell(x0))`. With `features = None` (no features)
/// the whole space is one cell. `None` is returned when all cells are
/// singletons.
pub fn pigeonhole_certificate(
    prior: &BeliefMeasure,
    features: Option<&FeatureSet>,
) -> Result<Option<PigeonholeCertificate>> {
    let Some(p) = prior.probs() else {
        return invalid("pigeonhole certificates need a finite space");
    };
    let cells = match features {
        Some(f) => {
            prior.space().expect_same(f.space())?;
            feature_cells(f)?
        }
        None => vec![(0..p.len()).collect()],
    };
    let mut best: Option<PigeonholeCertificate> = None;
    for cell in cells.into_iter().filter(|c| c.len() > 1) {
        let total: f64 = cell.iter().map(|&k| p[k]).sum();
        if !(total > 0.0) {
            continue;
        }
        for &k in &cell {
            let bound = p[k] / total;
            if best.as_ref().is_none_or(|b| bound < b.bound) {
                best = Some(PigeonholeCertificate {
                    cell: cell.clone(),
                    x0: k,
                    bound,
                });
            }
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bit_counts() {
        assert_eq!(bits_for(2), 1);
        assert_eq!(bits_for(4), 2);
        assert_eq!(bits_for(5), 3);
        assert_eq!(bits_for(16), 4);
        assert_eq!(bits_for(17), 5);
    }

    #[test]
    fn third_world_of_four() {
        assert_eq!(lambda_for_world(4, 2, 40.0).unwrap(), vec![-40.0, 40.0]);
    }
}
