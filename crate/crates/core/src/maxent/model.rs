//! Exponential families `λ ↦ (log Z, E f, Cov f)` behind the Gibbs posterior.

use nalgebra::DMatrix;

use super::features::{CubeFeature, FeatureSet};
use crate::error::{LkaError, Result};
use crate::numeric::{logsumexp, Tilt};
use crate::worlds::{BeliefMeasure, Marginal, MeasureForm, Partition, TruthSet};

/// Grid cells allowed when discretizing indicator features on the cube.
const MAX_CELLS: usize = 1 << 22;

pub(crate) struct Eval {
    pub log_z: f64,
    pub mean: Vec<f64>,
    pub cov: DMatrix<f64>,
}

#[derive(Debug, Clone)]
pub(crate) enum Model {
    Discrete(DiscreteModel),
    Product(ProductModel),
}

/// Finitely many weighted atoms or cells with constant features.
#[derive(Debug, Clone)]
pub(crate) struct DiscreteModel {
    pub log_w: Vec<f64>,
    pub f: Vec<f64>,
    pub n: usize,
    /// Present when the atoms are grid cells of the cube.
    pub cells: Option<Partition>,
}

/// Product of per-coordinate tilts; each feature is linear or quadratic in one coordinate.
#[derive(Debug, Clone)]
pub(crate) struct ProductModel {
    pub base: Vec<(f64, f64)>,
    pub lin: Vec<Option<usize>>,
    pub quad: Vec<Option<usize>>,
    pub n: usize,
    base_log_norm: Vec<f64>,
}

impl Model {
    pub fn build(prior: &BeliefMeasure, features: &FeatureSet) -> Result<Model> {
        prior.space().expect_same(features.space())?;
        if let Some(p) = prior.probs() {
            let n = features.n();
            return Ok(Model::Discrete(DiscreteModel {
                log_w: p.iter().map(|x| x.ln()).collect(),
                f: features.values().unwrap().to_vec(),
                n,
                cells: None,
            }));
        }
        let specs = features.cube_specs().unwrap();
        let r = prior.space().dim().unwrap();
        let smooth = specs.iter().all(|s| {
            matches!(
                s,
                CubeFeature::Linear { .. } | CubeFeature::Quadratic { .. }
            )
        });
        let steps = specs
            .iter()
            .all(|s| matches!(s, CubeFeature::IntervalIndicator { .. }));
        if smooth {
            let base: Vec<(f64, f64)> = match prior.marginals() {
                Some(m) => m.iter().map(Marginal::coefficients).collect(),
                None => {
                    return Err(LkaError::Unsupported(
                        "linear and quadratic features need a product prior".into(),
                    ))
                }
            };
            let mut lin = vec![None; r];
            let mut quad = vec![None; r];
            for (i, s) in specs.iter().enumerate() {
                let (slot, c) = match s {
                    CubeFeature::Linear { coord } => (&mut lin, *coord),
                    CubeFeature::Quadratic { coord } => (&mut quad, *coord),
                    _ => unreachable!(),
                };
                if slot[c].is_some() {
                    return Err(LkaError::Unsupported(format!(
                        "duplicate feature on coordinate {c}"
                    )));
                }
                slot[c] = Some(i);
            }
            let base_log_norm = base
                .iter()
                .map(|&(a, b)| Tilt::new(a, b).log_norm())
                .collect();
            return Ok(Model::Product(ProductModel {
                base,
                lin,
                quad,
                n: specs.len(),
                base_log_norm,
            }));
        }
        if !steps {
            return Err(LkaError::Unsupported(
                "mixing indicator and polynomial features on the cube".into(),
            ));
        }
        discretize(prior, specs, r).map(Model::Discrete)
    }

    pub fn n(&self) -> usize {
        match self {
            Model::Discrete(m) => m.n,
            Model::Product(m) => m.n,
        }
    }

    pub fn eval(&self, lambda: &[f64]) -> Eval {
        match self {
            Model::Discrete(m) => m.eval(lambda),
            Model::Product(m) => m.eval(lambda),
        }
    }

    pub fn log_z(&self, lambda: &[f64]) -> f64 {
        match self {
            Model::Discrete(m) => logsumexp(&m.scores(lambda)),
            Model::Product(m) => m.log_z(lambda),
        }
    }

    /// `log ∫_T P0 e^{λ·f}`.
    pub fn log_z_on(&self, lambda: &[f64], set: &TruthSet) -> f64 {
        match self {
            Model::Discrete(m) => {
                let s = m.scores(lambda);
                match &m.cells {
                    None => {
                        let mask = set.mask().unwrap();
                        let v: Vec<f64> = s
                            .iter()
                            .zip(mask)
                            .filter(|(_, &b)| b)
                            .map(|(x, _)| *x)
                            .collect();
                        logsumexp(&v)
                    }
                    Some(cells) => {
                        let rects = cells.rects().unwrap();
                        let v: Vec<f64> = rects
                            .iter()
                            .zip(&s)
                            .filter_map(|(c, &x)| {
                                let frac: f64 =
                                    set.rects().iter().map(|t| c.overlap_volume(t)).sum::<f64>()
                                        / c.volume();
                                (frac > 0.0).then(|| x + frac.min(1.0).ln())
                            })
                            .collect();
                        logsumexp(&v)
                    }
                }
            }
            Model::Product(m) => {
                let tilts = m.tilts(lambda, false);
                let terms: Vec<f64> = set
                    .rects()
                    .iter()
                    .map(|rect| {
                        tilts
                            .iter()
                            .zip(&rect.intervals)
                            .zip(&m.base_log_norm)
                            .map(|((t, iv), b0)| t.log_norm() + t.log_mass(iv.lo, iv.hi) - b0)
                            .sum()
                    })
                    .collect();
                logsumexp(&terms)
            }
        }
    }

    /// The Gibbs measure `P0 e^{λ·f}/Z`.
    pub fn measure(&self, lambda: &[f64]) -> Result<BeliefMeasure> {
        match self {
            Model::Discrete(m) => {
                let s = m.scores(lambda);
                let lz = logsumexp(&s);
                let q: Vec<f64> = s.iter().map(|x| (x - lz).exp()).collect();
                let total: f64 = q.iter().sum();
                let q: Vec<f64> = q.iter().map(|x| x / total).collect();
                match &m.cells {
                    None => BeliefMeasure::finite(q),
                    Some(cells) => BeliefMeasure::piecewise(cells.clone(), q),
                }
            }
            Model::Product(m) => BeliefMeasure::product(
                m.coefficients(lambda)
                    .into_iter()
                    .map(|(a, b)| Marginal::from_coefficients(a, b))
                    .collect(),
            ),
        }
    }

    /// Whether the family realises every interior target exactly, with the
    /// answer known in closed form: `Some` for product families and for
    /// targets outside a finite feature's range.
    pub fn classify(&self, target: &[f64], ranges: &[(f64, f64)]) -> Option<super::Feasibility> {
        use super::Feasibility::*;
        const TOL: f64 = 1e-12;
        match self {
            Model::Discrete(_) => {
                let mut on_edge = false;
                for (&t, &(lo, hi)) in target.iter().zip(ranges) {
                    if t < lo - TOL || t > hi + TOL {
                        return Some(Infeasible);
                    }
                    if (t - lo).abs() <= TOL || (t - hi).abs() <= TOL {
                        on_edge = true;
                    }
                }
                on_edge.then_some(Boundary)
            }
            Model::Product(m) => {
                let mut class = Interior;
                for c in 0..m.lin.len() {
                    let c_class = match (m.lin[c], m.quad[c]) {
                        (None, None) => Interior,
                        (Some(i), None) => interval_class(target[i], 0.0, 1.0, TOL),
                        (None, Some(j)) => interval_class(target[j], 0.0, 1.0, TOL),
                        (Some(i), Some(j)) => {
                            let (m1, m2) = (target[i], target[j]);
                            // moment set of (t, t²): m1² ≤ m2 ≤ m1
                            if !(-TOL..=1.0 + TOL).contains(&m1)
                                || m2 < m1 * m1 - TOL
                                || m2 > m1 + TOL
                            {
                                Infeasible
                            } else if m2 - m1 * m1 <= TOL || m1 - m2 <= TOL {
                                Boundary
                            } else {
                                Interior
                            }
                        }
                    };
                    class = worse(class, c_class);
                }
                Some(class)
            }
        }
    }

    /// A starting point for Newton: Gaussian moment matching on coordinates
    /// with both a linear and a quadratic feature, zero elsewhere.
    pub fn warm_start(&self, target: &[f64]) -> Vec<f64> {
        let mut lam = vec![0.0; self.n()];
        if let Model::Product(m) = self {
            for c in 0..m.lin.len() {
                if let (Some(i), Some(j)) = (m.lin[c], m.quad[c]) {
                    let v = target[j] - target[i] * target[i];
                    if v > 0.0 && v < 1.0 / 12.0 && target[i] > 0.0 && target[i] < 1.0 {
                        let (a0, b0) = m.base[c];
                        lam[i] = target[i] / v - a0;
                        lam[j] = -0.5 / v - b0;
                    }
                }
            }
        }
        lam
    }
}

fn interval_class(t: f64, lo: f64, hi: f64, tol: f64) -> super::Feasibility {
    use super::Feasibility::*;
    if t < lo - tol || t > hi + tol {
        Infeasible
    } else if (t - lo).abs() <= tol || (t - hi).abs() <= tol {
        Boundary
    } else {
        Interior
    }
}

fn worse(a: super::Feasibility, b: super::Feasibility) -> super::Feasibility {
    use super::Feasibility::*;
    match (a, b) {
        (Infeasible, _) | (_, Infeasible) => Infeasible,
        (Boundary, _) | (_, Boundary) => Boundary,
        _ => Interior,
    }
}

impl DiscreteModel {
    fn scores(&self, lambda: &[f64]) -> Vec<f64> {
        let n = self.n;
        self.log_w
            .iter()
            .enumerate()
            .map(|(k, &w)| {
                if w == f64::NEG_INFINITY {
                    return w;
                }
                let row = &self.f[k * n..(k + 1) * n];
                w + row.iter().zip(lambda).map(|(a, b)| a * b).sum::<f64>()
            })
            .collect()
    }

    fn eval(&self, lambda: &[f64]) -> Eval {
        let n = self.n;
        let s = self.scores(lambda);
        let log_z = logsumexp(&s);
        let mut mean = vec![0.0; n];
        let q: Vec<f64> = s.iter().map(|x| (x - log_z).exp()).collect();
        for (k, &qk) in q.iter().enumerate() {
            if qk > 0.0 {
                for (m, f) in mean.iter_mut().zip(&self.f[k * n..(k + 1) * n]) {
                    *m += qk * f;
                }
            }
        }
        let mut cov = DMatrix::zeros(n, n);
        let mut dev = vec![0.0; n];
        for (k, &qk) in q.iter().enumerate() {
            if qk > 0.0 {
                for i in 0..n {
                    dev[i] = self.f[k * n + i] - mean[i];
                }
                for i in 0..n {
                    let di = qk * dev[i];
                    for j in 0..=i {
                        cov[(i, j)] += di * dev[j];
                    }
                }
            }
        }
        for i in 0..n {
            for j in 0..i {
                cov[(j, i)] = cov[(i, j)];
            }
        }
        Eval { log_z, mean, cov }
    }
}

impl ProductModel {
    fn coefficients(&self, lambda: &[f64]) -> Vec<(f64, f64)> {
        self.base
            .iter()
            .enumerate()
            .map(|(c, &(a0, b0))| {
                (
                    a0 + self.lin[c].map_or(0.0, |i| lambda[i]),
                    b0 + self.quad[c].map_or(0.0, |j| lambda[j]),
                )
            })
            .collect()
    }

    fn tilts(&self, lambda: &[f64], need_quad_stats: bool) -> Vec<Tilt> {
        self.coefficients(lambda)
            .into_iter()
            .enumerate()
            .map(|(c, (a, b))| {
                if need_quad_stats && self.quad[c].is_some() {
                    Tilt::numeric(a, b)
                } else {
                    Tilt::new(a, b)
                }
            })
            .collect()
    }

    fn log_z(&self, lambda: &[f64]) -> f64 {
        self.tilts(lambda, false)
            .iter()
            .zip(&self.base_log_norm)
            .map(|(t, b)| t.log_norm() - b)
            .sum()
    }

    fn eval(&self, lambda: &[f64]) -> Eval {
        let tilts = self.tilts(lambda, true);
        let mut mean = vec![0.0; self.n];
        let mut cov = DMatrix::zeros(self.n, self.n);
        let mut log_z = 0.0;
        for (c, t) in tilts.iter().enumerate() {
            log_z += t.log_norm() - self.base_log_norm[c];
            match (self.lin[c], self.quad[c]) {
                (None, None) => {}
                (Some(i), None) => {
                    mean[i] = t.mean();
                    cov[(i, i)] = t.var();
                }
                (lin, Some(j)) => {
                    let (m, v) = t.quad_stats();
                    mean[j] = m[1];
                    cov[(j, j)] = v[1][1];
                    if let Some(i) = lin {
                        mean[i] = m[0];
                        cov[(i, i)] = v[0][0];
                        cov[(i, j)] = v[0][1];
                        cov[(j, i)] = v[0][1];
                    }
                }
            }
        }
        Eval { log_z, mean, cov }
    }
}

/// Cells of the product grid spanned by all rectangle endpoints.
fn discretize(prior: &BeliefMeasure, specs: &[CubeFeature], r: usize) -> Result<DiscreteModel> {
    let mut breaks: Vec<Vec<f64>> = vec![vec![0.0, 1.0]; r];
    let mut add_rect = |rect: &crate::worlds::Rect| {
        for (c, iv) in rect.intervals.iter().enumerate() {
            breaks[c].push(iv.lo);
            breaks[c].push(iv.hi);
        }
    };
    for s in specs {
        if let CubeFeature::IntervalIndicator { intervals, .. } = s {
            add_rect(intervals);
        }
    }
    let prior_blocks: Option<(Vec<crate::worlds::Rect>, Vec<f64>)> = match prior.form() {
        MeasureForm::PiecewiseConstant {
            partition,
            block_probs,
        } => {
            for rect in partition.rects().unwrap() {
                add_rect(rect);
            }
            Some((partition.rects().unwrap().to_vec(), block_probs.clone()))
        }
        MeasureForm::ProductTilted(m) if m.iter().all(|t| t.spec == Marginal::Uniform) => None,
        _ => {
            return Err(LkaError::Unsupported(
                "indicator features need a uniform or piecewise-constant prior".into(),
            ))
        }
    };
    for b in breaks.iter_mut() {
        b.sort_by(f64::total_cmp);
        b.dedup();
    }
    let count: usize = breaks.iter().map(|b| b.len() - 1).product();
    if count > MAX_CELLS {
        return Err(LkaError::Unsupported(format!(
            "{count} grid cells exceed the limit"
        )));
    }
    let cells = Partition::grid(&breaks)?;
    let rects = cells.rects().unwrap();
    let n = specs.len();
    let mut log_w = Vec::with_capacity(rects.len());
    let mut f = Vec::with_capacity(rects.len() * n);
    for cell in rects {
        let w = match &prior_blocks {
            None => cell.volume(),
            Some((blocks, probs)) => blocks
                .iter()
                .zip(probs)
                .map(|(b, p)| p * cell.overlap_volume(b) / b.volume())
                .sum(),
        };
        log_w.push(w.ln());
        for s in specs {
            if let CubeFeature::IntervalIndicator { intervals, scale } = s {
                let inside = cell.overlap_volume(intervals) >= 0.5 * cell.volume();
                f.push(if inside { *scale } else { 0.0 });
            }
        }
    }
    Ok(DiscreteModel {
        log_w,
        f,
        n,
        cells: Some(cells),
    })
}
