use serde::{Deserialize, Serialize};

use super::space::{World, WorldSpace};
use super::truth::{rect_from_doc, rect_to_doc, Rect, TruthBody, TruthSet, VOLUME_TOL};
use crate::error::{invalid, LkaError, Result};

/// Pairwise overlap checks are quadratic; above this many blocks only the
/// total volume is checked.
const PAIRWISE_CHECK_LIMIT: usize = 4096;

#[derive(Debug, Clone, PartialEq)]
enum Blocks {
    Finite { assign: Vec<usize>, count: usize },
    Cube(Vec<Rect>),
}

/// A finite partition of the world space into blocks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PartitionDoc", into = "PartitionDoc")]
pub struct Partition {
    space: WorldSpace,
    blocks: Blocks,
}

impl Partition {
    /// Blocks given as index lists; they must cover `0..d` exactly once.
    pub fn finite(d: usize, blocks: &[Vec<usize>]) -> Result<Self> {
        let space = WorldSpace::finite(d)?;
        let mut assign = vec![usize::MAX; d];
        for (b, members) in blocks.iter().enumerate() {
            if members.is_empty() {
                return invalid(format!("block {b} is empty"));
            }
            for &k in members {
                if k >= d {
                    return invalid(format!("world {k} out of range 0..{d}"));
                }
                if assign[k] != usize::MAX {
                    return invalid(format!("world {k} appears in two blocks"));
                }
                assign[k] = b;
            }
        }
        if let Some(k) = assign.iter().position(|&b| b == usize::MAX) {
            return invalid(format!("world {k} is not covered"));
        }
        Ok(Partition {
            space,
            blocks: Blocks::Finite {
                assign,
                count: blocks.len(),
            },
        })
    }

    /// From a block label per world; labels must be exactly `0..count`.
    pub fn from_labels(labels: Vec<usize>) -> Result<Self> {
        let count = labels.iter().copied().max().map_or(0, |m| m + 1);
        let mut used = vec![false; count];
        for &l in &labels {
            used[l] = true;
        }
        if used.iter().any(|u| !u) {
            return invalid("block labels must be contiguous from 0");
        }
        Ok(Partition {
            space: WorldSpace::finite(labels.len())?,
            blocks: Blocks::Finite {
                assign: labels,
                count,
            },
        })
    }

    pub fn singletons(d: usize) -> Result<Self> {
        Partition::from_labels((0..d).collect())
    }

    /// Rectangles must be disjoint up to measure zero and tile the cube.
    pub fn cube(rects: Vec<Rect>) -> Result<Self> {
        let r = match rects.first() {
            Some(x) => x.dim(),
            None => return invalid("partition needs at least one block"),
        };
        if rects.iter().any(|x| x.dim() != r) {
            return invalid("blocks must share dimension");
        }
        for (i, x) in rects.iter().enumerate() {
            if x.volume() <= 0.0 {
                return invalid(format!("block {i} has zero volume"));
            }
        }
        if rects.len() <= PAIRWISE_CHECK_LIMIT {
            for i in 0..rects.len() {
                for j in i + 1..rects.len() {
                    if rects[i].overlap_volume(&rects[j]) > VOLUME_TOL {
                        return invalid(format!("blocks {i} and {j} overlap"));
                    }
                }
            }
        }
        let total: f64 = rects.iter().map(Rect::volume).sum();
        if (total - 1.0).abs() > 1e-12 {
            return invalid(format!("blocks cover volume {total}, expected 1"));
        }
        Ok(Partition {
            space: WorldSpace::cube(r)?,
            blocks: Blocks::Cube(rects),
        })
    }

    /// Product grid from sorted breakpoints per coordinate (each list starts at
    /// 0 and ends at 1). Blocks are enumerated with the last coordinate fastest.
    pub fn grid(breaks: &[Vec<f64>]) -> Result<Self> {
        let mut rects = vec![Vec::new()];
        for b in breaks {
            if b.len() < 2 || b[0] != 0.0 || *b.last().unwrap() != 1.0 {
                return invalid("grid breakpoints must run from 0 to 1");
            }
            let mut next = Vec::with_capacity(rects.len() * (b.len() - 1));
            for prefix in &rects {
                for w in b.windows(2) {
                    if w[1] <= w[0] {
                        return invalid("grid breakpoints must increase strictly");
                    }
                    let mut v: Vec<super::truth::Interval> = prefix.clone();
                    v.push(super::truth::Interval { lo: w[0], hi: w[1] });
                    next.push(v);
                }
            }
            rects = next;
        }
        let rects = rects
            .into_iter()
            .map(|iv| Rect {
                intervals: iv,
                open: false,
            })
            .collect::<Vec<_>>();
        Ok(Partition {
            space: WorldSpace::cube(breaks.len())?,
            blocks: Blocks::Cube(rects),
        })
    }

    pub fn space(&self) -> &WorldSpace {
        &self.space
    }

    pub fn len(&self) -> usize {
        match &self.blocks {
            Blocks::Finite { count, .. } => *count,
            Blocks::Cube(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Block label per world (finite spaces).
    pub fn labels(&self) -> Option<&[usize]> {
        match &self.blocks {
            Blocks::Finite { assign, .. } => Some(assign),
            Blocks::Cube(_) => None,
        }
    }

    pub fn rects(&self) -> Option<&[Rect]> {
        match &self.blocks {
            Blocks::Cube(v) => Some(v),
            Blocks::Finite { .. } => None,
        }
    }

    pub fn members(&self, block: usize) -> Vec<usize> {
        match &self.blocks {
            Blocks::Finite { assign, .. } => {
                (0..assign.len()).filter(|&k| assign[k] == block).collect()
            }
            Blocks::Cube(_) => vec![],
        }
    }

    /// Cardinality (finite) or volume (cube) of a block.
    pub fn block_size(&self, block: usize) -> f64 {
        match &self.blocks {
            Blocks::Finite { assign, .. } => assign.iter().filter(|&&b| b == block).count() as f64,
            Blocks::Cube(v) => v[block].volume(),
        }
    }

    pub fn block_sizes(&self) -> Vec<f64> {
        match &self.blocks {
            Blocks::Finite { assign, count } => {
                let mut s = vec![0.0; *count];
                for &b in assign {
                    s[b] += 1.0;
                }
                s
            }
            Blocks::Cube(v) => v.iter().map(Rect::volume).collect(),
        }
    }

    pub fn block_set(&self, block: usize) -> TruthSet {
        match &self.blocks {
            Blocks::Finite { assign, .. } => TruthSet {
                space: self.space.clone(),
                body: TruthBody::FiniteSubset(assign.iter().map(|&b| b == block).collect()),
            },
            Blocks::Cube(v) => TruthSet::from_rect(v[block].clone()),
        }
    }

    /// Block containing a world (half-open convention on the cube).
    pub fn locate(&self, x: &World) -> Option<usize> {
        match (&self.blocks, x) {
            (Blocks::Finite { assign, .. }, World::Index(k)) => assign.get(*k).copied(),
            (Blocks::Cube(v), World::Point(p)) => v.iter().position(|r| r.contains_half_open(p)),
            _ => None,
        }
    }

    /// Every block of `self` lies inside one block of `coarse`.
    pub fn refines(&self, coarse: &Partition) -> bool {
        match (&self.blocks, &coarse.blocks) {
            (Blocks::Finite { assign: a, count }, Blocks::Finite { assign: c, .. }) => {
                if a.len() != c.len() {
                    return false;
                }
                let mut owner = vec![usize::MAX; *count];
                for (k, &b) in a.iter().enumerate() {
                    if owner[b] == usize::MAX {
                        owner[b] = c[k];
                    } else if owner[b] != c[k] {
                        return false;
                    }
                }
                true
            }
            (Blocks::Cube(a), Blocks::Cube(c)) => a.iter().all(|x| c.iter().any(|y| x.inside(y))),
            _ => false,
        }
    }

    /// Smallest cube partition refinement of `self` by `other` (nonempty
    /// intersections only).
    pub fn common_refinement(&self, other: &Partition) -> Result<Partition> {
        match (&self.blocks, &other.blocks) {
            (Blocks::Cube(a), Blocks::Cube(b)) => {
                let mut out = Vec::new();
                for x in a {
                    for y in b {
                        if x.overlap_volume(y) > 0.0 {
                            out.push(x.intersect(y).unwrap());
                        }
                    }
                }
                Ok(Partition {
                    space: self.space.clone(),
                    blocks: Blocks::Cube(out),
                })
            }
            (Blocks::Finite { assign: a, .. }, Blocks::Finite { assign: b, .. }) => {
                let mut map = std::collections::BTreeMap::new();
                let labels = a
                    .iter()
                    .zip(b)
                    .map(|pair| {
                        let n = map.len();
                        *map.entry(pair).or_insert(n)
                    })
                    .collect();
                Partition::from_labels(labels)
            }
            _ => Err(LkaError::SpaceMismatch(
                "partitions live on different spaces".into(),
            )),
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub(crate) enum PartitionDoc {
    Finite {
        d: usize,
        blocks: Vec<Vec<usize>>,
    },
    Cube {
        r: usize,
        blocks: Vec<Vec<[f64; 2]>>,
    },
}

impl TryFrom<PartitionDoc> for Partition {
    type Error = LkaError;
    fn try_from(doc: PartitionDoc) -> Result<Self> {
        match doc {
            PartitionDoc::Finite { d, blocks } => Partition::finite(d, &blocks),
            PartitionDoc::Cube { r, blocks } => Partition::cube(
                blocks
                    .iter()
                    .map(|b| rect_from_doc(r, b))
                    .collect::<Result<_>>()?,
            ),
        }
    }
}

impl From<Partition> for PartitionDoc {
    fn from(p: Partition) -> Self {
        match &p.blocks {
            Blocks::Finite { count, .. } => PartitionDoc::Finite {
                d: p.space.size().unwrap(),
                blocks: (0..*count).map(|b| p.members(b)).collect(),
            },
            Blocks::Cube(v) => PartitionDoc::Cube {
                r: v[0].dim(),
                blocks: v.iter().map(rect_to_doc).collect(),
            },
        }
    }
}
