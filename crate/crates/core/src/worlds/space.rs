use serde::{Deserialize, Serialize};

use super::truth::{Interval, Rect, TruthSet};
use crate::error::{invalid, LkaError, Result};

/// The set of possible worlds: `d` indexed worlds or the cube `[0,1]^r`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "SpaceDoc", into = "SpaceDoc")]
pub enum WorldSpace {
    Finite {
        d: usize,
        labels: Option<Vec<String>>,
    },
    Cube {
        r: usize,
    },
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum SpaceDoc {
    Finite {
        d: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        labels: Option<Vec<String>>,
    },
    Cube {
        r: usize,
    },
}

impl TryFrom<SpaceDoc> for WorldSpace {
    type Error = LkaError;
    fn try_from(doc: SpaceDoc) -> Result<Self> {
        match doc {
            SpaceDoc::Finite { d, labels } => {
                let s = WorldSpace::finite(d)?;
                match labels {
                    Some(l) => s.with_labels(l),
                    None => Ok(s),
                }
            }
            SpaceDoc::Cube { r } => WorldSpace::cube(r),
        }
    }
}

impl From<WorldSpace> for SpaceDoc {
    fn from(s: WorldSpace) -> Self {
        match s {
            WorldSpace::Finite { d, labels } => SpaceDoc::Finite { d, labels },
            WorldSpace::Cube { r } => SpaceDoc::Cube { r },
        }
    }
}

// Labels are descriptive only; two spaces of the same shape are the same space.
impl PartialEq for WorldSpace {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (WorldSpace::Finite { d: a, .. }, WorldSpace::Finite { d: b, .. }) => a == b,
            (WorldSpace::Cube { r: a }, WorldSpace::Cube { r: b }) => a == b,
            _ => false,
        }
    }
}

impl WorldSpace {
    pub fn finite(d: usize) -> Result<Self> {
        if d == 0 {
            return invalid("d must be >= 1");
        }
        Ok(WorldSpace::Finite { d, labels: None })
    }

    pub fn cube(r: usize) -> Result<Self> {
        if r == 0 {
            return invalid("r must be >= 1");
        }
        Ok(WorldSpace::Cube { r })
    }

    pub fn with_labels(self, labels: Vec<String>) -> Result<Self> {
        match self {
            WorldSpace::Finite { d, .. } if labels.len() == d => Ok(WorldSpace::Finite {
                d,
                labels: Some(labels),
            }),
            WorldSpace::Finite { .. } => invalid("labels length must equal d"),
            WorldSpace::Cube { .. } => invalid("labels apply to finite spaces only"),
        }
    }

    pub fn is_finite(&self) -> bool {
        matches!(self, WorldSpace::Finite { .. })
    }

    /// `d` for finite spaces.
    pub fn size(&self) -> Option<usize> {
        match self {
            WorldSpace::Finite { d, .. } => Some(*d),
            WorldSpace::Cube { .. } => None,
        }
    }

    /// `r` for cube spaces.
    pub fn dim(&self) -> Option<usize> {
        match self {
            WorldSpace::Cube { r } => Some(*r),
            WorldSpace::Finite { .. } => None,
        }
    }

    /// Largest distance between two worlds under the space's natural metric.
    pub fn diameter(&self) -> f64 {
        match self {
            WorldSpace::Finite { d, .. } => {
                if *d > 1 {
                    1.0
                } else {
                    0.0
                }
            }
            WorldSpace::Cube { .. } => 1.0,
        }
    }

    pub fn natural_metric(&self) -> Metric {
        if self.is_finite() {
            Metric::Discrete
        } else {
            Metric::SupNorm
        }
    }

    pub fn check_world(&self, x: &World) -> Result<()> {
        match (self, x) {
            (WorldSpace::Finite { d, .. }, World::Index(k)) if k < d => Ok(()),
            (WorldSpace::Cube { r }, World::Point(p))
                if p.len() == *r && p.iter().all(|v| (0.0..=1.0).contains(v)) =>
            {
                Ok(())
            }
            _ => invalid(format!("world {x:?} is not in the space")),
        }
    }

    pub fn expect_same(&self, other: &WorldSpace) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(LkaError::SpaceMismatch(format!("{self:?} vs {other:?}")))
        }
    }
}

/// One world: an index into a finite space or a point of the cube.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum World {
    Index(usize),
    Point(Vec<f64>),
}

impl World {
    pub fn index(&self) -> Option<usize> {
        match self {
            World::Index(k) => Some(*k),
            World::Point(_) => None,
        }
    }

    pub fn point(&self) -> Option<&[f64]> {
        match self {
            World::Point(p) => Some(p),
            World::Index(_) => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    /// `d(x, y) = 1` iff `x ≠ y`.
    Discrete,
    /// Largest coordinate difference.
    SupNorm,
}

/// Closed ball `B_ε[x0]` or open ball `B_ε(x0)`.
pub fn ball(
    space: &WorldSpace,
    metric: Metric,
    x0: &World,
    eps: f64,
    closed: bool,
) -> Result<TruthSet> {
    if !(eps >= 0.0) {
        return invalid("eps must be >= 0");
    }
    space.check_world(x0)?;
    match (space, metric) {
        (WorldSpace::Finite { d, .. }, Metric::Discrete) => {
            let k = x0.index().unwrap();
            let everything = if closed { eps >= 1.0 } else { eps > 1.0 };
            if everything {
                Ok(TruthSet::whole(space))
            } else {
                TruthSet::finite(*d, &[k])
            }
        }
        (WorldSpace::Cube { .. }, Metric::SupNorm) => {
            let p = x0.point().unwrap();
            let iv = p
                .iter()
                .map(|&c| Interval::new((c - eps).max(0.0), (c + eps).min(1.0)))
                .collect::<Result<Vec<_>>>()?;
            let mut rect = Rect::new(iv)?;
            rect.open = !closed;
            Ok(TruthSet::from_rect(rect))
        }
        _ => invalid("discrete metric needs a finite space, sup-norm a cube"),
    }
}
