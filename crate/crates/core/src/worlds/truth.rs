use serde::{Deserialize, Serialize};

use super::space::{World, WorldSpace};
use crate::error::{invalid, LkaError, Result};

/// Overlaps below this volume count as touching, not overlapping.
pub(crate) const VOLUME_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(0.0 <= lo && lo <= hi && hi <= 1.0) {
            return invalid(format!(
                "interval [{lo}, {hi}] must satisfy 0 <= a <= b <= 1"
            ));
        }
        Ok(Interval { lo, hi })
    }

    pub fn unit() -> Self {
        Interval { lo: 0.0, hi: 1.0 }
    }

    pub fn len(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn overlap(&self, o: &Interval) -> f64 {
        (self.hi.min(o.hi) - self.lo.max(o.lo)).max(0.0)
    }
}

/// Axis-aligned box. Faces are closed unless `open` is set, in which case
/// faces lying strictly inside (0, 1) are open; faces on the cube boundary
/// stay closed, which is what a clipped open ball needs.
#[derive(Debug, Clone, PartialEq)]
pub struct Rect {
    pub intervals: Vec<Interval>,
    pub open: bool,
}

impl Rect {
    pub fn new(intervals: Vec<Interval>) -> Result<Self> {
        if intervals.is_empty() {
            return invalid("rectangle needs at least one interval");
        }
        Ok(Rect {
            intervals,
            open: false,
        })
    }

    pub fn unit(r: usize) -> Self {
        Rect {
            intervals: vec![Interval::unit(); r],
            open: false,
        }
    }

    pub fn from_bounds(b: &[(f64, f64)]) -> Result<Self> {
        Rect::new(
            b.iter()
                .map(|&(lo, hi)| Interval::new(lo, hi))
                .collect::<Result<_>>()?,
        )
    }

    pub fn dim(&self) -> usize {
        self.intervals.len()
    }

    pub fn volume(&self) -> f64 {
        self.intervals.iter().map(Interval::len).product()
    }

    pub fn overlap_volume(&self, o: &Rect) -> f64 {
        self.intervals
            .iter()
            .zip(&o.intervals)
            .map(|(a, b)| a.overlap(b))
            .product()
    }

    pub fn intersect(&self, o: &Rect) -> Option<Rect> {
        let iv: Vec<Interval> = self
            .intervals
            .iter()
            .zip(&o.intervals)
            .map(|(a, b)| Interval {
                lo: a.lo.max(b.lo),
                hi: a.hi.min(b.hi),
            })
            .collect();
        if iv.iter().any(|i| i.hi < i.lo) {
            return None;
        }
        Some(Rect {
            intervals: iv,
            open: self.open || o.open,
        })
    }

    pub fn contains_point(&self, p: &[f64]) -> bool {
        self.intervals.iter().zip(p).all(|(iv, &x)| {
            let lo_ok = if self.open && iv.lo > 0.0 {
                x > iv.lo
            } else {
                x >= iv.lo
            };
            let hi_ok = if self.open && iv.hi < 1.0 {
                x < iv.hi
            } else {
                x <= iv.hi
            };
            lo_ok && hi_ok
        })
    }

    /// Half-open membership `[lo, hi)`, closed at 1; used to assign points to
    /// partition blocks without double counting shared faces.
    pub fn contains_half_open(&self, p: &[f64]) -> bool {
        self.intervals
            .iter()
            .zip(p)
            .all(|(iv, &x)| x >= iv.lo && (x < iv.hi || (iv.hi == 1.0 && x == 1.0)))
    }

    /// `self ⊆ o` up to measure zero.
    pub fn inside(&self, o: &Rect) -> bool {
        self.intervals
            .iter()
            .zip(&o.intervals)
            .all(|(a, b)| a.lo >= b.lo && a.hi <= b.hi)
    }

    /// Largest sup-norm distance between two points of the box.
    pub fn diameter(&self) -> f64 {
        self.intervals.iter().map(Interval::len).fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TruthBody {
    FiniteSubset(Vec<bool>),
    Rectangle(Rect),
    RectangleUnion(Vec<Rect>),
}

/// The set of worlds in which a proposition holds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TruthDoc", into = "TruthDoc")]
pub struct TruthSet {
    pub space: WorldSpace,
    pub body: TruthBody,
}

impl TruthSet {
    pub fn from_mask(mask: Vec<bool>) -> Result<Self> {
        Ok(TruthSet {
            space: WorldSpace::finite(mask.len())?,
            body: TruthBody::FiniteSubset(mask),
        })
    }

    pub fn finite(d: usize, members: &[usize]) -> Result<Self> {
        let mut mask = vec![false; d];
        for &k in members {
            if k >= d {
                return invalid(format!("world {k} out of range 0..{d}"));
            }
            mask[k] = true;
        }
        TruthSet::from_mask(mask)
    }

    pub fn from_rect(rect: Rect) -> Self {
        TruthSet {
            space: WorldSpace::Cube { r: rect.dim() },
            body: TruthBody::Rectangle(rect),
        }
    }

    pub fn rect(bounds: &[(f64, f64)]) -> Result<Self> {
        Ok(TruthSet::from_rect(Rect::from_bounds(bounds)?))
    }

    pub fn union(rects: Vec<Rect>) -> Result<Self> {
        let r = match rects.first() {
            Some(x) => x.dim(),
            None => return invalid("rectangle union must not be empty"),
        };
        if rects.iter().any(|x| x.dim() != r) {
            return invalid("rectangles in a union must share dimension");
        }
        for i in 0..rects.len() {
            for j in i + 1..rects.len() {
                if rects[i].overlap_volume(&rects[j]) > VOLUME_TOL {
                    return invalid(format!("rectangles {i} and {j} overlap"));
                }
            }
        }
        Ok(TruthSet {
            space: WorldSpace::Cube { r },
            body: TruthBody::RectangleUnion(rects),
        })
    }

    pub fn whole(space: &WorldSpace) -> Self {
        let body = match space {
            WorldSpace::Finite { d, .. } => TruthBody::FiniteSubset(vec![true; *d]),
            WorldSpace::Cube { r } => TruthBody::Rectangle(Rect::unit(*r)),
        };
        TruthSet {
            space: space.clone(),
            body,
        }
    }

    pub fn mask(&self) -> Option<&[bool]> {
        match &self.body {
            TruthBody::FiniteSubset(m) => Some(m),
            _ => None,
        }
    }

    /// The rectangles making up a cube set.
    pub fn rects(&self) -> Vec<&Rect> {
        match &self.body {
            TruthBody::FiniteSubset(_) => vec![],
            TruthBody::Rectangle(r) => vec![r],
            TruthBody::RectangleUnion(v) => v.iter().collect(),
        }
    }

    pub fn contains(&self, x: &World) -> bool {
        match (&self.body, x) {
            (TruthBody::FiniteSubset(m), World::Index(k)) => m.get(*k).copied().unwrap_or(false),
            (TruthBody::Rectangle(r), World::Point(p)) => r.contains_point(p),
            (TruthBody::RectangleUnion(v), World::Point(p)) => {
                v.iter().any(|r| r.contains_point(p))
            }
            _ => false,
        }
    }

    /// Members of a finite set.
    pub fn members(&self) -> Vec<usize> {
        match &self.body {
            TruthBody::FiniteSubset(m) => (0..m.len()).filter(|&k| m[k]).collect(),
            _ => vec![],
        }
    }

    /// Lebesgue volume (cube) or cardinality (finite).
    pub fn size(&self) -> f64 {
        match &self.body {
            TruthBody::FiniteSubset(m) => m.iter().filter(|&&b| b).count() as f64,
            TruthBody::Rectangle(r) => r.volume(),
            TruthBody::RectangleUnion(v) => v.iter().map(Rect::volume).sum(),
        }
    }

    /// Complement within the space. For a cube rectangle the result is a
    /// union of disjoint slabs, equal to the complement up to boundaries.
    pub fn complement(&self) -> Result<TruthSet> {
        match &self.body {
            TruthBody::FiniteSubset(m) => TruthSet::from_mask(m.iter().map(|b| !b).collect()),
            TruthBody::Rectangle(rect) => {
                let r = rect.dim();
                let mut pieces = Vec::new();
                for i in 0..r {
                    let iv = rect.intervals[i];
                    for (lo, hi) in [(0.0, iv.lo), (iv.hi, 1.0)] {
                        if hi - lo <= 0.0 {
                            continue;
                        }
                        let mut b: Vec<Interval> = rect.intervals[..i].to_vec();
                        b.push(Interval::new(lo, hi)?);
                        b.extend((i + 1..r).map(|_| Interval::unit()));
                        pieces.push(Rect::new(b)?);
                    }
                }
                if pieces.is_empty() {
                    return Err(LkaError::Unsupported(
                        "the complement of the whole cube is empty".into(),
                    ));
                }
                TruthSet::union(pieces)
            }
            TruthBody::RectangleUnion(_) => Err(LkaError::Unsupported(
                "complement of a rectangle union".into(),
            )),
        }
    }
}

fn is_false(b: &bool) -> bool {
    !*b
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum TruthDoc {
    FiniteSubset {
        d: usize,
        mask: Vec<u8>,
    },
    Rectangle {
        r: usize,
        intervals: Vec<[f64; 2]>,
        #[serde(default, skip_serializing_if = "is_false")]
        open: bool,
    },
    RectangleUnion {
        r: usize,
        blocks: Vec<Vec<[f64; 2]>>,
    },
}

pub(crate) fn rect_from_doc(r: usize, iv: &[[f64; 2]]) -> Result<Rect> {
    if iv.len() != r {
        return invalid(format!(
            "rectangle has {} intervals, expected r = {r}",
            iv.len()
        ));
    }
    Rect::from_bounds(&iv.iter().map(|x| (x[0], x[1])).collect::<Vec<_>>())
}

pub(crate) fn rect_to_doc(r: &Rect) -> Vec<[f64; 2]> {
    r.intervals.iter().map(|i| [i.lo, i.hi]).collect()
}

impl TryFrom<TruthDoc> for TruthSet {
    type Error = LkaError;
    fn try_from(doc: TruthDoc) -> Result<Self> {
        match doc {
            TruthDoc::FiniteSubset { d, mask } => {
                if mask.len() != d {
                    return invalid(format!("mask length {} must equal d = {d}", mask.len()));
                }
                if mask.iter().any(|&b| b > 1) {
                    return invalid("mask entries must be 0 or 1");
                }
                TruthSet::from_mask(mask.into_iter().map(|b| b == 1).collect())
            }
            TruthDoc::Rectangle { r, intervals, open } => {
                let mut rect = rect_from_doc(r, &intervals)?;
                rect.open = open;
                Ok(TruthSet::from_rect(rect))
            }
            TruthDoc::RectangleUnion { r, blocks } => TruthSet::union(
                blocks
                    .iter()
                    .map(|b| rect_from_doc(r, b))
                    .collect::<Result<_>>()?,
            ),
        }
    }
}

impl From<TruthSet> for TruthDoc {
    fn from(t: TruthSet) -> Self {
        match t.body {
            TruthBody::FiniteSubset(m) => TruthDoc::FiniteSubset {
                d: m.len(),
                mask: m.into_iter().map(u8::from).collect(),
            },
            TruthBody::Rectangle(rect) => TruthDoc::Rectangle {
                r: rect.dim(),
                intervals: rect_to_doc(&rect),
                open: rect.open,
            },
            TruthBody::RectangleUnion(v) => TruthDoc::RectangleUnion {
                r: v[0].dim(),
                blocks: v.iter().map(rect_to_doc).collect(),
            },
        }
    }
}
