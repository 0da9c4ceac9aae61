use serde::{Deserialize, Serialize};

use super::partition::Partition;
use super::space::{World, WorldSpace};
use super::truth::{rect_from_doc, rect_to_doc, Rect, TruthSet};
use crate::error::{invalid, LkaError, Result};
use crate::numeric::Tilt;
use crate::rng::StreamRng;

/// Tolerance for "sums to one", loosened slightly with length for long vectors.
fn sum_tol(len: usize) -> f64 {
    1e-12 + 1e-15 * len as f64
}

/// Per-coordinate marginal of a product measure on the cube.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Marginal {
    Uniform,
    /// Density `λ e^{λt}/(e^λ − 1)`.
    OneTilt {
        lambda: f64,
    },
    /// Density proportional to `exp(lin·t + quad·t²)`.
    TwoTilt {
        lin: f64,
        quad: f64,
    },
}

impl Marginal {
    pub fn coefficients(&self) -> (f64, f64) {
        match *self {
            Marginal::Uniform => (0.0, 0.0),
            Marginal::OneTilt { lambda } => (lambda, 0.0),
            Marginal::TwoTilt { lin, quad } => (lin, quad),
        }
    }

    pub fn tilt(&self) -> Tilt {
        let (a, b) = self.coefficients();
        Tilt::new(a, b)
    }

    /// Canonical spec for tilt coefficients.
    pub fn from_coefficients(a: f64, b: f64) -> Self {
        if b != 0.0 {
            Marginal::TwoTilt { lin: a, quad: b }
        } else if a != 0.0 {
            Marginal::OneTilt { lambda: a }
        } else {
            Marginal::Uniform
        }
    }
}

/// Distribution function of a marginal spec on [0, 1].
pub fn tilted_marginal_cdf(spec: &Marginal, x: f64) -> f64 {
    spec.tilt().cdf(x)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TiltedMarginal {
    pub spec: Marginal,
    pub tilt: Tilt,
}

#[derive(Debug, Clone, PartialEq)]
pub enum MeasureForm {
    FiniteVec(Vec<f64>),
    PiecewiseConstant {
        partition: Partition,
        block_probs: Vec<f64>,
    },
    ProductTilted(Vec<TiltedMarginal>),
    /// `p0` times the uniform density on the cube plus point masses.
    AtomMixture {
        p0: f64,
        atoms: Vec<(Vec<f64>, f64)>,
    },
}

/// A probability measure over a world space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MeasureDoc", into = "MeasureDoc")]
pub struct BeliefMeasure {
    space: WorldSpace,
    form: MeasureForm,
}

fn check_probs(p: &[f64], what: &str) -> Result<()> {
    if p.iter().any(|&x| !(x >= 0.0) || !x.is_finite()) {
        return invalid(format!("{what} must be finite and nonnegative"));
    }
    let s: f64 = p.iter().sum();
    if (s - 1.0).abs() > sum_tol(p.len()) {
        return invalid(format!("{what} sums to {s}, expected 1"));
    }
    Ok(())
}

impl BeliefMeasure {
    pub fn finite(p: Vec<f64>) -> Result<Self> {
        check_probs(&p, "p")?;
        Ok(BeliefMeasure {
            space: WorldSpace::finite(p.len())?,
            form: MeasureForm::FiniteVec(p),
        })
    }

    /// Normalizes nonnegative weights first.
    pub fn finite_from_weights(w: &[f64]) -> Result<Self> {
        let s: f64 = w.iter().sum();
        if !(s > 0.0) || !s.is_finite() {
            return invalid("weights must have a positive finite sum");
        }
        BeliefMeasure::finite(w.iter().map(|x| x / s).collect())
    }

    pub fn uniform(space: &WorldSpace) -> Self {
        match space {
            WorldSpace::Finite { d, .. } => BeliefMeasure {
                space: space.clone(),
                form: MeasureForm::FiniteVec(vec![1.0 / *d as f64; *d]),
            },
            WorldSpace::Cube { r } => BeliefMeasure::product(vec![Marginal::Uniform; *r]).unwrap(),
        }
    }

    pub fn piecewise(partition: Partition, block_probs: Vec<f64>) -> Result<Self> {
        if block_probs.len() != partition.len() {
            return invalid(format!(
                "blockProbs has {} entries for {} blocks",
                block_probs.len(),
                partition.len()
            ));
        }
        check_probs(&block_probs, "blockProbs")?;
        Ok(BeliefMeasure {
            space: partition.space().clone(),
            form: MeasureForm::PiecewiseConstant {
                partition,
                block_probs,
            },
        })
    }

    pub fn product(marginals: Vec<Marginal>) -> Result<Self> {
        for m in &marginals {
            let (a, b) = m.coefficients();
            if !a.is_finite() || !b.is_finite() {
                return invalid("marginal coefficients must be finite");
            }
        }
        let space = WorldSpace::cube(marginals.len())?;
        let tm = marginals
            .into_iter()
            .map(|spec| TiltedMarginal {
                tilt: spec.tilt(),
                spec,
            })
            .collect();
        Ok(BeliefMeasure {
            space,
            form: MeasureForm::ProductTilted(tm),
        })
    }

    pub fn atom_mixture(r: usize, p0: f64, atoms: Vec<(Vec<f64>, f64)>) -> Result<Self> {
        let space = WorldSpace::cube(r)?;
        for (x, _) in &atoms {
            space.check_world(&World::Point(x.clone()))?;
        }
        let mut all: Vec<f64> = atoms.iter().map(|a| a.1).collect();
        all.push(p0);
        check_probs(&all, "atom mixture weights")?;
        Ok(BeliefMeasure {
            space,
            form: MeasureForm::AtomMixture { p0, atoms },
        })
    }

    pub fn point_mass(space: &WorldSpace, x0: &World) -> Result<Self> {
        space.check_world(x0)?;
        match (space, x0) {
            (WorldSpace::Finite { d, .. }, World::Index(k)) => {
                let mut p = vec![0.0; *d];
                p[*k] = 1.0;
                BeliefMeasure::finite(p)
            }
            (WorldSpace::Cube { r }, World::Point(x)) => {
                BeliefMeasure::atom_mixture(*r, 0.0, vec![(x.clone(), 1.0)])
            }
            _ => unreachable!(),
        }
    }

    pub fn space(&self) -> &WorldSpace {
        &self.space
    }

    pub fn form(&self) -> &MeasureForm {
        &self.form
    }

    /// Per-coordinate tilts of a product measure.
    pub fn tilts(&self) -> Option<Vec<&Tilt>> {
        match &self.form {
            MeasureForm::ProductTilted(v) => Some(v.iter().map(|m| &m.tilt).collect()),
            _ => None,
        }
    }

    pub fn marginals(&self) -> Option<Vec<Marginal>> {
        match &self.form {
            MeasureForm::ProductTilted(v) => Some(v.iter().map(|m| m.spec).collect()),
            _ => None,
        }
    }

    /// Probability of every world (finite spaces).
    pub fn probs(&self) -> Option<Vec<f64>> {
        match &self.form {
            MeasureForm::FiniteVec(p) => Some(p.clone()),
            MeasureForm::PiecewiseConstant {
                partition,
                block_probs,
            } if self.space.is_finite() => {
                let sizes = partition.block_sizes();
                let labels = partition.labels().unwrap();
                Some(labels.iter().map(|&b| block_probs[b] / sizes[b]).collect())
            }
            _ => None,
        }
    }

    /// `P(set)`.
    pub fn measure_of(&self, set: &TruthSet) -> Result<f64> {
        self.space.expect_same(&set.space)?;
        if let Some(p) = self.probs() {
            let mask = set.mask().unwrap();
            return Ok(p
                .iter()
                .zip(mask)
                .filter(|(_, &m)| m)
                .map(|(x, _)| x)
                .sum::<f64>()
                .min(1.0));
        }
        let rects = set.rects();
        let v: f64 = rects.iter().map(|r| self.rect_mass(r)).sum();
        Ok(v.clamp(0.0, 1.0))
    }

    fn rect_mass(&self, rect: &Rect) -> f64 {
        match &self.form {
            MeasureForm::PiecewiseConstant {
                partition,
                block_probs,
            } => partition
                .rects()
                .unwrap()
                .iter()
                .zip(block_probs)
                .map(|(b, &p)| {
                    if p == 0.0 {
                        0.0
                    } else {
                        p * b.overlap_volume(rect) / b.volume()
                    }
                })
                .sum(),
            MeasureForm::ProductTilted(m) => m
                .iter()
                .zip(&rect.intervals)
                .map(|(t, iv)| t.tilt.mass(iv.lo, iv.hi))
                .product(),
            MeasureForm::AtomMixture { p0, atoms } => {
                p0 * rect.volume()
                    + atoms
                        .iter()
                        .filter(|(x, _)| rect.contains_point(x))
                        .map(|a| a.1)
                        .sum::<f64>()
            }
            MeasureForm::FiniteVec(_) => unreachable!(),
        }
    }

    /// Mass of the single world `x` (zero for continuous measures).
    pub fn point_mass_at(&self, x: &World) -> f64 {
        if let (Some(p), World::Index(k)) = (self.probs(), x) {
            return p.get(*k).copied().unwrap_or(0.0);
        }
        match (&self.form, x) {
            (MeasureForm::AtomMixture { atoms, .. }, World::Point(pt)) => {
                atoms.iter().filter(|(a, _)| a == pt).map(|a| a.1).sum()
            }
            _ => 0.0,
        }
    }

    /// Density of the absolutely continuous part at a cube point.
    pub fn density(&self, x: &[f64]) -> f64 {
        match &self.form {
            MeasureForm::ProductTilted(m) => {
                m.iter().zip(x).map(|(t, &v)| t.tilt.density(v)).product()
            }
            MeasureForm::PiecewiseConstant {
                partition,
                block_probs,
            } => partition
                .locate(&World::Point(x.to_vec()))
                .map_or(0.0, |b| block_probs[b] / partition.block_size(b)),
            MeasureForm::AtomMixture { p0, .. } => *p0,
            MeasureForm::FiniteVec(_) => 0.0,
        }
    }

    /// Precomputed sampler.
    pub fn sampler(&self) -> Sampler<'_> {
        match &self.form {
            MeasureForm::FiniteVec(_) => Sampler::Finite(cumulative(&self.probs().unwrap())),
            MeasureForm::PiecewiseConstant {
                partition,
                block_probs,
            } => Sampler::Blocks {
                cdf: cumulative(block_probs),
                partition,
            },
            MeasureForm::ProductTilted(m) => Sampler::Product(m.iter().map(|t| &t.tilt).collect()),
            MeasureForm::AtomMixture { p0, atoms } => {
                let mut w: Vec<f64> = atoms.iter().map(|a| a.1).collect();
                w.push(*p0);
                Sampler::Atoms {
                    cdf: cumulative(&w),
                    atoms,
                    r: self.space.dim().unwrap(),
                }
            }
        }
    }
}

fn cumulative(p: &[f64]) -> Vec<f64> {
    let mut acc = 0.0;
    p.iter()
        .map(|x| {
            acc += x;
            acc
        })
        .collect()
}

fn pick(cdf: &[f64], u: f64) -> usize {
    let target = u * cdf.last().copied().unwrap_or(1.0);
    let k = cdf.partition_point(|&c| c <= target);
    // skip trailing zero-probability entries
    k.min(cdf.len() - 1)
}

/// Draws i.i.d. worlds from a measure.
pub enum Sampler<'a> {
    Finite(Vec<f64>),
    Blocks {
        cdf: Vec<f64>,
        partition: &'a Partition,
    },
    Product(Vec<&'a Tilt>),
    Atoms {
        cdf: Vec<f64>,
        atoms: &'a [(Vec<f64>, f64)],
        r: usize,
    },
}

impl Sampler<'_> {
    pub fn draw(&self, rng: &mut StreamRng) -> World {
        match self {
            Sampler::Finite(cdf) => World::Index(pick(cdf, rng.uniform())),
            Sampler::Blocks { cdf, partition } => {
                let b = pick(cdf, rng.uniform());
                match partition.rects() {
                    Some(rects) => World::Point(
                        rects[b]
                            .intervals
                            .iter()
                            .map(|iv| iv.lo + (iv.hi - iv.lo) * rng.uniform())
                            .collect(),
                    ),
                    None => {
                        let m = partition.members(b);
                        World::Index(
                            m[((rng.uniform() * m.len() as f64) as usize).min(m.len() - 1)],
                        )
                    }
                }
            }
            Sampler::Product(t) => {
                World::Point(t.iter().map(|t| t.quantile(rng.uniform())).collect())
            }
            Sampler::Atoms { cdf, atoms, r } => {
                let k = pick(cdf, rng.uniform());
                if k < atoms.len() {
                    World::Point(atoms[k].0.clone())
                } else {
                    World::Point((0..*r).map(|_| rng.uniform()).collect())
                }
            }
        }
    }
}

/// `P(set)`; see [`BeliefMeasure::measure_of`].
pub fn measure_of(mu: &BeliefMeasure, set: &TruthSet) -> Result<f64> {
    mu.measure_of(set)
}

/// `E_mu[1_g | block]` for every block of a finite partition.
pub fn conditional_block_expectation(
    mu: &BeliefMeasure,
    g: &TruthSet,
    part: &Partition,
) -> Result<Vec<f64>> {
    mu.space.expect_same(&g.space)?;
    mu.space.expect_same(part.space())?;
    let p = mu.probs().ok_or_else(|| {
        LkaError::Unsupported("conditional expectations need a finite space".into())
    })?;
    let mask = g.mask().unwrap();
    let labels = part.labels().unwrap();
    let mut num = vec![0.0; part.len()];
    let mut den = vec![0.0; part.len()];
    for k in 0..p.len() {
        den[labels[k]] += p[k];
        if mask[k] {
            num[labels[k]] += p[k];
        }
    }
    num.iter()
        .zip(&den)
        .enumerate()
        .map(|(b, (n, d))| {
            if *d > 0.0 {
                Ok(n / d)
            } else {
                Err(LkaError::ZeroBlockMass { block: b })
            }
        })
        .collect()
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum BlocksDoc {
    Finite(Vec<Vec<usize>>),
    Cube(Vec<Vec<[f64; 2]>>),
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum MeasureDoc {
    FiniteVec {
        d: usize,
        p: Vec<f64>,
    },
    PiecewiseConstant {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        d: Option<usize>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        r: Option<usize>,
        blocks: BlocksDoc,
        #[serde(rename = "blockProbs")]
        block_probs: Vec<f64>,
    },
    ProductTilted {
        r: usize,
        marginals: Vec<Marginal>,
    },
    AtomMixture {
        r: usize,
        p0: f64,
        atoms: Vec<(Vec<f64>, f64)>,
    },
}

impl TryFrom<MeasureDoc> for BeliefMeasure {
    type Error = LkaError;
    fn try_from(doc: MeasureDoc) -> Result<Self> {
        match doc {
            MeasureDoc::FiniteVec { d, p } => {
                if p.len() != d {
                    return invalid(format!("p has {} entries, expected d = {d}", p.len()));
                }
                BeliefMeasure::finite(p)
            }
            MeasureDoc::PiecewiseConstant {
                d,
                r,
                blocks,
                block_probs,
            } => {
                let part = match (d, r, blocks) {
                    (Some(d), None, BlocksDoc::Finite(b)) => Partition::finite(d, &b)?,
                    (None, Some(r), BlocksDoc::Cube(b)) => {
                        Partition::cube(b.iter().map(|x| rect_from_doc(r, x)).collect::<Result<_>>()?)?
                    }
                    // an empty block list parses as finite; report it plainly
                    _ => return invalid("piecewise_constant needs either d with index blocks or r with rectangle blocks"),
                };
                BeliefMeasure::piecewise(part, block_probs)
            }
            MeasureDoc::ProductTilted { r, marginals } => {
                if marginals.len() != r {
                    return invalid(format!(
                        "marginals has {} entries, expected r = {r}",
                        marginals.len()
                    ));
                }
                BeliefMeasure::product(marginals)
            }
            MeasureDoc::AtomMixture { r, p0, atoms } => BeliefMeasure::atom_mixture(r, p0, atoms),
        }
    }
}

impl From<BeliefMeasure> for MeasureDoc {
    fn from(m: BeliefMeasure) -> Self {
        match m.form {
            MeasureForm::FiniteVec(p) => MeasureDoc::FiniteVec { d: p.len(), p },
            MeasureForm::PiecewiseConstant {
                partition,
                block_probs,
            } => match partition.rects() {
                Some(rects) => MeasureDoc::PiecewiseConstant {
                    d: None,
                    r: Some(rects[0].dim()),
                    blocks: BlocksDoc::Cube(rects.iter().map(rect_to_doc).collect()),
                    block_probs,
                },
                None => MeasureDoc::PiecewiseConstant {
                    d: partition.space().size(),
                    r: None,
                    blocks: BlocksDoc::Finite(
                        (0..partition.len()).map(|b| partition.members(b)).collect(),
                    ),
                    block_probs,
                },
            },
            MeasureForm::ProductTilted(v) => MeasureDoc::ProductTilted {
                r: v.len(),
                marginals: v.into_iter().map(|t| t.spec).collect(),
            },
            MeasureForm::AtomMixture { p0, atoms } => MeasureDoc::AtomMixture {
                r: m.space.dim().unwrap(),
                p0,
                atoms,
            },
        }
    }
}
