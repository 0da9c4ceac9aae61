use serde::{Deserialize, Serialize};

use crate::error::{invalid, LkaError, Result};
use crate::worlds::{BeliefMeasure, MeasureForm, Rect, TruthSet, World, WorldSpace};

/// One feature on the cube.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CubeFeature {
    /// `x[coord]`
    Linear { coord: usize },
    /// `x[coord]²`
    Quadratic { coord: usize },
    /// `scale · 1{x ∈ rect}`; a scale of `log(1/δ)` gives the spike features.
    IntervalIndicator {
        #[serde(with = "rect_doc")]
        intervals: Rect,
        #[serde(default = "one")]
        scale: f64,
    },
}

fn one() -> f64 {
    1.0
}

mod rect_doc {
    use super::*;
    use serde::{Deserializer, Serializer};

    pub fn serialize<S: Serializer>(r: &Rect, s: S) -> std::result::Result<S::Ok, S::Error> {
        let v: Vec<[f64; 2]> = r.intervals.iter().map(|i| [i.lo, i.hi]).collect();
        v.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Rect, D::Error> {
        let v: Vec<[f64; 2]> = Vec::deserialize(d)?;
        Rect::from_bounds(&v.iter().map(|x| (x[0], x[1])).collect::<Vec<_>>())
            .map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Kind {
    /// Row-major `d × n` matrix.
    Matrix {
        n: usize,
        values: Vec<f64>,
    },
    Cube(Vec<CubeFeature>),
}

/// The feature functions `f_1 … f_n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "FeatureDoc", into = "FeatureDoc")]
pub struct FeatureSet {
    space: WorldSpace,
    kind: Kind,
    binary: bool,
}

impl FeatureSet {
    /// From rows `rows[k][i] = f_i(x_k)`.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let d = rows.len();
        let n = rows.first().map_or(0, Vec::len);
        if n == 0 {
            return invalid("feature matrix needs at least one column");
        }
        if rows.iter().any(|r| r.len() != n) {
            return invalid("feature matrix rows must have equal length");
        }
        FeatureSet::matrix(d, n, rows.concat())
    }

    pub fn matrix(d: usize, n: usize, values: Vec<f64>) -> Result<Self> {
        if n == 0 {
            return invalid("n must be >= 1");
        }
        if values.len() != d * n {
            return invalid(format!(
                "feature matrix has {} values, expected d*n = {}",
                values.len(),
                d * n
            ));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return invalid("feature values must be finite");
        }
        let binary = values.iter().all(|&v| v == 0.0 || v == 1.0);
        Ok(FeatureSet {
            space: WorldSpace::finite(d)?,
            kind: Kind::Matrix { n, values },
            binary,
        })
    }

    /// Indicator features of finite truth sets.
    pub fn indicators(sets: &[TruthSet]) -> Result<Self> {
        let d = match sets.first().and_then(|s| s.mask()) {
            Some(m) => m.len(),
            None => return invalid("indicator features need finite truth sets"),
        };
        let n = sets.len();
        let mut values = vec![0.0; d * n];
        for (i, s) in sets.iter().enumerate() {
            let m = s.mask().filter(|m| m.len() == d).ok_or_else(|| {
                LkaError::SpaceMismatch("indicator sets must share one finite space".into())
            })?;
            for k in 0..d {
                if m[k] {
                    values[k * n + i] = 1.0;
                }
            }
        }
        FeatureSet::matrix(d, n, values)
    }

    pub fn cube(r: usize, specs: Vec<CubeFeature>) -> Result<Self> {
        let space = WorldSpace::cube(r)?;
        if specs.is_empty() {
            return invalid("n must be >= 1");
        }
        for s in &specs {
            match s {
                CubeFeature::Linear { coord } | CubeFeature::Quadratic { coord } if *coord >= r => {
                    return invalid(format!("coord {coord} out of range 0..{r}"));
                }
                CubeFeature::IntervalIndicator { intervals, scale } => {
                    if intervals.dim() != r {
                        return invalid("indicator rectangle dimension must equal r");
                    }
                    if !scale.is_finite() {
                        return invalid("indicator scale must be finite");
                    }
                }
                _ => {}
            }
        }
        let binary = specs
            .iter()
            .all(|s| matches!(s, CubeFeature::IntervalIndicator { scale, .. } if *scale == 1.0));
        Ok(FeatureSet {
            space,
            kind: Kind::Cube(specs),
            binary,
        })
    }

    /// One linear feature per coordinate.
    pub fn coordinate_linear(r: usize) -> Result<Self> {
        FeatureSet::cube(
            r,
            (0..r).map(|c| CubeFeature::Linear { coord: c }).collect(),
        )
    }

    /// A linear and a quadratic feature per coordinate, ordered `(x_1, x_1², x_2, …)`.
    pub fn coordinate_quadratic(r: usize) -> Result<Self> {
        FeatureSet::cube(
            r,
            (0..r)
                .flat_map(|c| {
                    [
                        CubeFeature::Linear { coord: c },
                        CubeFeature::Quadratic { coord: c },
                    ]
                })
                .collect(),
        )
    }

    pub fn space(&self) -> &WorldSpace {
        &self.space
    }

    pub fn n(&self) -> usize {
        match &self.kind {
            Kind::Matrix { n, .. } => *n,
            Kind::Cube(v) => v.len(),
        }
    }

    pub fn is_binary(&self) -> bool {
        self.binary
    }

    pub fn cube_specs(&self) -> Option<&[CubeFeature]> {
        match &self.kind {
            Kind::Cube(v) => Some(v),
            Kind::Matrix { .. } => None,
        }
    }

    /// Row-major matrix for finite spaces.
    pub fn values(&self) -> Option<&[f64]> {
        match &self.kind {
            Kind::Matrix { values, .. } => Some(values),
            Kind::Cube(_) => None,
        }
    }

    /// `f(x)`.
    pub fn eval(&self, x: &World) -> Result<Vec<f64>> {
        self.space.check_world(x)?;
        Ok(match (&self.kind, x) {
            (Kind::Matrix { n, values }, World::Index(k)) => values[k * n..(k + 1) * n].to_vec(),
            (Kind::Cube(specs), World::Point(p)) => {
                specs.iter().map(|s| cube_value(s, p)).collect()
            }
            _ => unreachable!(),
        })
    }

    /// Smallest and largest value of each feature over the space.
    pub fn ranges(&self) -> Vec<(f64, f64)> {
        match &self.kind {
            Kind::Matrix { n, values } => (0..*n)
                .map(|i| {
                    values
                        .iter()
                        .skip(i)
                        .step_by(*n)
                        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                            (lo.min(v), hi.max(v))
                        })
                })
                .collect(),
            Kind::Cube(specs) => specs
                .iter()
                .map(|s| match s {
                    CubeFeature::Linear { .. } | CubeFeature::Quadratic { .. } => (0.0, 1.0),
                    CubeFeature::IntervalIndicator { intervals, scale } => {
                        let full = intervals.volume() >= 1.0;
                        let empty = intervals.volume() <= 0.0;
                        let v = *scale;
                        match (full, empty) {
                            (true, _) => (v, v),
                            (_, true) => (0.0, 0.0),
                            _ => (v.min(0.0), v.max(0.0)),
                        }
                    }
                })
                .collect(),
        }
    }
}

fn cube_value(s: &CubeFeature, p: &[f64]) -> f64 {
    match s {
        CubeFeature::Linear { coord } => p[*coord],
        CubeFeature::Quadratic { coord } => p[*coord] * p[*coord],
        CubeFeature::IntervalIndicator { intervals, scale } => {
            if intervals.contains_point(p) {
                *scale
            } else {
                0.0
            }
        }
    }
}

/// Expected feature values `μ_i = E[f_i]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MomentVector {
    pub mu: Vec<f64>,
}

impl MomentVector {
    pub fn new(mu: Vec<f64>) -> Self {
        MomentVector { mu }
    }

    pub fn len(&self) -> usize {
        self.mu.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mu.is_empty()
    }
}

impl From<Vec<f64>> for MomentVector {
    fn from(mu: Vec<f64>) -> Self {
        MomentVector { mu }
    }
}

/// `E_measure[f]`.
pub fn moments(measure: &BeliefMeasure, features: &FeatureSet) -> Result<MomentVector> {
    measure.space().expect_same(features.space())?;
    if let (Some(p), Some(values)) = (measure.probs(), features.values()) {
        let n = features.n();
        let mut mu = vec![0.0; n];
        for (k, &pk) in p.iter().enumerate() {
            if pk != 0.0 {
                for i in 0..n {
                    mu[i] += pk * values[k * n + i];
                }
            }
        }
        return Ok(MomentVector { mu });
    }
    let specs = features.cube_specs().unwrap();
    let mut mu = Vec::with_capacity(specs.len());
    for s in specs {
        mu.push(match s {
            CubeFeature::IntervalIndicator { intervals, scale } => {
                scale * measure.measure_of(&TruthSet::from_rect(intervals.clone()))?
            }
            CubeFeature::Linear { coord } => coord_moment(measure, *coord, 1),
            CubeFeature::Quadratic { coord } => coord_moment(measure, *coord, 2),
        });
    }
    Ok(MomentVector { mu })
}

fn coord_moment(m: &BeliefMeasure, c: usize, power: i32) -> f64 {
    let uniform = if power == 1 { 0.5 } else { 1.0 / 3.0 };
    match m.form() {
        MeasureForm::ProductTilted(v) => {
            let t = &v[c].tilt;
            if power == 1 {
                t.mean()
            } else {
                t.quad_stats().0[1]
            }
        }
        MeasureForm::PiecewiseConstant {
            partition,
            block_probs,
        } => partition
            .rects()
            .unwrap()
            .iter()
            .zip(block_probs)
            .map(|(r, p)| {
                let iv = r.intervals[c];
                let (a, b) = (iv.lo, iv.hi);
                p * if power == 1 {
                    0.5 * (a + b)
                } else {
                    (a * a + a * b + b * b) / 3.0
                }
            })
            .sum(),
        MeasureForm::AtomMixture { p0, atoms } => {
            p0 * uniform + atoms.iter().map(|(x, w)| w * x[c].powi(power)).sum::<f64>()
        }
        MeasureForm::FiniteVec(_) => unreachable!(),
    }
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum FeatureDoc {
    Matrix {
        d: usize,
        rows: Vec<Vec<f64>>,
    },
    Cube {
        r: usize,
        features: Vec<CubeFeature>,
    },
}

impl TryFrom<FeatureDoc> for FeatureSet {
    type Error = LkaError;
    fn try_from(doc: FeatureDoc) -> Result<Self> {
        match doc {
            FeatureDoc::Matrix { d, rows } => {
                if rows.len() != d {
                    return invalid(format!("rows has {} entries, expected d = {d}", rows.len()));
                }
                FeatureSet::from_rows(&rows)
            }
            FeatureDoc::Cube { r, features } => FeatureSet::cube(r, features),
        }
    }
}

impl From<FeatureSet> for FeatureDoc {
    fn from(f: FeatureSet) -> Self {
        match f.kind {
            Kind::Matrix { n, values } => FeatureDoc::Matrix {
                d: values.len() / n,
                rows: values.chunks(n).map(<[f64]>::to_vec).collect(),
            },
            Kind::Cube(features) => FeatureDoc::Cube {
                r: f.space.dim().unwrap(),
                features,
            },
        }
    }
}
