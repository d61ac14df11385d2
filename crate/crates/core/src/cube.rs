//! Dyadic cubes: level + integer anchor, with exact integer adjacency tests.
//!
//! The cube at `level` l with anchor a is the closed box
//! prod_i [a_i * 2^-l, (a_i + 1) * 2^-l]. Negative levels give cubes of side
//! larger than one. All side lengths are powers of two, so coordinates of
//! corners are exact in f64 throughout the ranges used here.

/// Relation of two closed dyadic intervals on one axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AxisRelation {
    /// positive gap between the intervals
    Gap,
    /// share exactly one point (closed endpoints coincide)
    Touch,
    /// intersection has positive length
    Overlap,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct DyadicCube<const D: usize> {
    pub level: i32,
    pub anchor: [i64; D],
}

impl<const D: usize> DyadicCube<D> {
    pub fn new(level: i32, anchor: [i64; D]) -> Self {
        Self { level, anchor }
    }

    /// Side length 2^-level (exact).
    pub fn side(&self) -> f64 {
        (-self.level as f64).exp2()
    }

    pub fn diam(&self) -> f64 {
        self.side() * (D as f64).sqrt()
    }

    pub fn lo(&self) -> [f64; D] {
        let s = self.side();
        std::array::from_fn(|i| self.anchor[i] as f64 * s)
    }

    pub fn hi(&self) -> [f64; D] {
        let s = self.side();
        std::array::from_fn(|i| (self.anchor[i] + 1) as f64 * s)
    }

    pub fn center(&self) -> [f64; D] {
        let s = self.side();
        std::array::from_fn(|i| (self.anchor[i] as f64 + 0.5) * s)
    }

    /// Volume side^d (exact power of two).
    pub fn volume(&self) -> f64 {
        (-(self.level as f64) * D as f64).exp2()
    }

    pub fn parent(&self) -> DyadicCube<D> {
        DyadicCube {
            level: self.level - 1,
            anchor: std::array::from_fn(|i| self.anchor[i].div_euclid(2)),
        }
    }

    /// The 2^d children, in lexicographic corner order.
    pub fn children(&self) -> Vec<DyadicCube<D>> {
        let mut out = Vec::with_capacity(1 << D);
        for mask in 0..(1u32 << D) {
            out.push(DyadicCube {
                level: self.level + 1,
                anchor: std::array::from_fn(|i| 2 * self.anchor[i] + ((mask >> i) & 1) as i64),
            });
        }
        out
    }

    /// Corner by bitmask (bit i set selects the high end on axis i).
    pub fn corner(&self, mask: u32) -> [f64; D] {
        let s = self.side();
        std::array::from_fn(|i| (self.anchor[i] + ((mask >> i) & 1) as i64) as f64 * s)
    }

    /// Closed-cube membership.
    pub fn contains_point(&self, p: [f64; D]) -> bool {
        let lo = self.lo();
        let hi = self.hi();
        (0..D).all(|i| lo[i] <= p[i] && p[i] <= hi[i])
    }

    /// Half-open membership [lo, hi): the convention used to resolve a unique
    /// containing cube among lattice cells.
    pub fn contains_point_halfopen(&self, p: [f64; D]) -> bool {
        let lo = self.lo();
        let hi = self.hi();
        (0..D).all(|i| lo[i] <= p[i] && p[i] < hi[i])
    }

    /// The lattice cell at `level` whose half-open box contains p.
    pub fn cell_containing(level: i32, p: [f64; D]) -> DyadicCube<D> {
        let s = (level as f64).exp2(); // 1/side
        DyadicCube {
            level,
            anchor: std::array::from_fn(|i| (p[i] * s).floor() as i64),
        }
    }

    /// Per-axis relation against another dyadic cube, via exact integers.
    /// Both anchors are rescaled to the finer of the two levels.
    pub fn axis_relations(&self, other: &DyadicCube<D>) -> [AxisRelation; D] {
        let fine = self.level.max(other.level);
        let sh_a = (fine - self.level) as u32;
        let sh_b = (fine - other.level) as u32;
        std::array::from_fn(|i| {
            // interval of self on axis i at the fine scale: [a0, a1]
            let a0 = self.anchor[i] << sh_a;
            let a1 = (self.anchor[i] + 1) << sh_a;
            let b0 = other.anchor[i] << sh_b;
            let b1 = (other.anchor[i] + 1) << sh_b;
            let lo = a0.max(b0);
            let hi = a1.min(b1);
            match hi - lo {
                d if d < 0 => AxisRelation::Gap,
                0 => AxisRelation::Touch,
                _ => AxisRelation::Overlap,
            }
        })
    }

    /// Closed cubes share at least a point.
    pub fn intersects(&self, other: &DyadicCube<D>) -> bool {
        self.axis_relations(other)
            .iter()
            .all(|r| *r != AxisRelation::Gap)
    }

    /// Cubes touch when their intersection is (d-1)-dimensional: exactly one
    /// axis meets at a single point and the rest overlap with positive
    /// length. For dyadic cubes this is equivalent to a full face of the
    /// smaller cube lying inside a face of the larger.
    pub fn touches(&self, other: &DyadicCube<D>) -> bool {
        let rel = self.axis_relations(other);
        let touches = rel.iter().filter(|r| **r == AxisRelation::Touch).count();
        let overlaps = rel.iter().filter(|r| **r == AxisRelation::Overlap).count();
        touches == 1 && overlaps == D - 1
    }

    /// Exact Euclidean distance between the closed cubes.
    pub fn dist_to_cube(&self, other: &DyadicCube<D>) -> f64 {
        let alo = self.lo();
        let ahi = self.hi();
        let blo = other.lo();
        let bhi = other.hi();
        let mut s = 0.0;
        for i in 0..D {
            let g = (blo[i] - ahi[i]).max(alo[i] - bhi[i]).max(0.0);
            s += g * g;
        }
        s.sqrt()
    }

    /// Nesting test (closed boxes, exact).
    pub fn contains_cube(&self, other: &DyadicCube<D>) -> bool {
        if self.level > other.level {
            return false;
        }
        let sh = (other.level - self.level) as u32;
        (0..D).all(|i| {
            let lo = self.anchor[i] << sh;
            let hi = (self.anchor[i] + 1) << sh;
            lo <= other.anchor[i] && other.anchor[i] + 1 <= hi
        })
    }

    /// Distance from a point to the closed cube.
    pub fn dist_to_point(&self, p: [f64; D]) -> f64 {
        let lo = self.lo();
        let hi = self.hi();
        let mut s = 0.0;
        for i in 0..D {
            let g = (lo[i] - p[i]).max(p[i] - hi[i]).max(0.0);
            s += g * g;
        }
        s.sqrt()
    }

    /// The box scaled by `factor` about its center, as (lo, hi).
    pub fn dilated(&self, factor: f64) -> ([f64; D], [f64; D]) {
        let c = self.center();
        let h = 0.5 * self.side() * factor;
        (
            std::array::from_fn(|i| c[i] - h),
            std::array::from_fn(|i| c[i] + h),
        )
    }
}
