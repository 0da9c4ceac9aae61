//! Total variation distances between belief measures.

use super::measure::{BeliefMeasure, MeasureForm};
use super::partition::Partition;
use super::space::{ball, World};
use crate::error::{LkaError, Result};

/// Midpoint grid points per coordinate for cube measures with smooth parts.
pub const TV_GRID: usize = 2048;
/// Cap on total grid points in higher dimensions.
const TV_GRID_BUDGET: usize = 1 << 23;

/// `sup_A |P(A) − Q(A)|`, i.e. half the L1 distance of the densities.
///
/// Exact on finite spaces and between piecewise-constant (or uniform) cube
/// measures; smooth product densities use a midpoint grid.
pub fn tv_distance(a: &BeliefMeasure, b: &BeliefMeasure) -> Result<f64> {
    a.space().expect_same(b.space())?;
    if let (Some(p), Some(q)) = (a.probs(), b.probs()) {
        return Ok(0.5 * p.iter().zip(&q).map(|(x, y)| (x - y).abs()).sum::<f64>());
    }
    let r = a.space().dim().unwrap();
    let (atoms_a, wa) = atoms_of(a);
    let (atoms_b, wb) = atoms_of(b);
    let mut atom_part = 0.0;
    for (x, w) in &atoms_a {
        let other: f64 = atoms_b.iter().filter(|(y, _)| y == x).map(|t| t.1).sum();
        atom_part += (w - other).abs();
    }
    for (y, w) in &atoms_b {
        if !atoms_a.iter().any(|(x, _)| x == y) {
            atom_part += w;
        }
    }
    let cont = if wa == 0.0 && wb == 0.0 {
        0.0
    } else if let (Some(pa), Some(pb)) = (piecewise_view(a), piecewise_view(b)) {
        exact_piecewise_l1(&pa, &pb)?
    } else {
        grid_l1(a, b, r)
    };
    Ok((0.5 * (atom_part + cont)).clamp(0.0, 1.0))
}

/// Distance to the point mass at `x0` at resolution `eta`: the mass outside
/// the closed ball `B_eta[x0]`. On finite spaces (discrete metric, eta < 1)
/// this is exactly `TV(P, δ_{x0}) = 1 − P(x0)`; on the cube it is the least
/// TV distance from `P` to any measure supported in the ball.
pub fn tv_to_point(mu: &BeliefMeasure, x0: &World, eta: f64) -> Result<f64> {
    if mu.space().is_finite() {
        return Ok(1.0 - mu.point_mass_at(x0));
    }
    let b = ball(mu.space(), mu.space().natural_metric(), x0, eta, true)?;
    Ok((1.0 - mu.measure_of(&b)?).max(0.0))
}

fn atoms_of(m: &BeliefMeasure) -> (Vec<(Vec<f64>, f64)>, f64) {
    match m.form() {
        MeasureForm::AtomMixture { p0, atoms } => (atoms.clone(), *p0),
        _ => (vec![], 1.0),
    }
}

/// (partition, density per block) for measures whose continuous part is piecewise constant.
fn piecewise_view(m: &BeliefMeasure) -> Option<(Partition, Vec<f64>)> {
    let r = m.space().dim()?;
    match m.form() {
        MeasureForm::PiecewiseConstant {
            partition,
            block_probs,
        } => {
            let sizes = partition.block_sizes();
            Some((
                partition.clone(),
                block_probs.iter().zip(&sizes).map(|(p, s)| p / s).collect(),
            ))
        }
        MeasureForm::AtomMixture { p0, .. } => {
            Some((Partition::grid(&vec![vec![0.0, 1.0]; r]).ok()?, vec![*p0]))
        }
        MeasureForm::ProductTilted(v) if v.iter().all(|t| t.spec == super::Marginal::Uniform) => {
            Some((Partition::grid(&vec![vec![0.0, 1.0]; r]).ok()?, vec![1.0]))
        }
        _ => None,
    }
}

fn exact_piecewise_l1(a: &(Partition, Vec<f64>), b: &(Partition, Vec<f64>)) -> Result<f64> {
    let ra =
        a.0.rects()
            .ok_or_else(|| LkaError::Unsupported("finite partition".into()))?;
    let rb = b.0.rects().unwrap();
    let mut total = 0.0;
    for (i, x) in ra.iter().enumerate() {
        for (j, y) in rb.iter().enumerate() {
            let v = x.overlap_volume(y);
            if v > 0.0 {
                total += v * (a.1[i] - b.1[j]).abs();
            }
        }
    }
    Ok(total)
}

fn grid_l1(a: &BeliefMeasure, b: &BeliefMeasure, r: usize) -> f64 {
    let g = if r == 1 {
        TV_GRID
    } else {
        TV_GRID.min((TV_GRID_BUDGET as f64).powf(1.0 / r as f64).floor() as usize)
    };
    let h = 1.0 / g as f64;
    let mids: Vec<f64> = (0..g).map(|i| (i as f64 + 0.5) * h).collect();
    let cell = h.powi(r as i32);
    // per-coordinate tables for product measures avoid re-evaluating tilts
    let table = |m: &BeliefMeasure| -> Option<Vec<Vec<f64>>> {
        m.tilts().map(|t| {
            t.iter()
                .map(|tilt| mids.iter().map(|&x| tilt.density(x)).collect())
                .collect()
        })
    };
    let ta = table(a);
    let tb = table(b);
    if let (Some(ta), Some(tb)) = (&ta, &tb) {
        return product_l1(ta, tb, 0, 1.0, 1.0) * cell;
    }
    let eval =
        |m: &BeliefMeasure, t: &Option<Vec<Vec<f64>>>, idx: &[usize], pt: &mut Vec<f64>| -> f64 {
            match t {
                Some(t) => idx.iter().enumerate().map(|(c, &i)| t[c][i]).product(),
                None => {
                    pt.clear();
                    pt.extend(idx.iter().map(|&i| mids[i]));
                    m.density(pt)
                }
            }
        };
    let mut idx = vec![0usize; r];
    let mut pt = Vec::with_capacity(r);
    let mut total = 0.0;
    let n = g.pow(r as u32);
    for _ in 0..n {
        total += (eval(a, &ta, &idx, &mut pt) - eval(b, &tb, &idx, &mut pt)).abs();
        for c in (0..r).rev() {
            idx[c] += 1;
            if idx[c] < g {
                break;
            }
            idx[c] = 0;
        }
    }
    total * cell
}

/// `Σ |Π a_c(i_c) − Π b_c(i_c)|` over the grid, innermost coordinate in a tight loop.
fn product_l1(ta: &[Vec<f64>], tb: &[Vec<f64>], c: usize, pa: f64, pb: f64) -> f64 {
    if c + 1 == ta.len() {
        return ta[c]
            .iter()
            .zip(&tb[c])
            .map(|(x, y)| (pa * x - pb * y).abs())
            .sum();
    }
    ta[c]
        .iter()
        .zip(&tb[c])
        .map(|(x, y)| product_l1(ta, tb, c + 1, pa * x, pb * y))
        .sum()
}
