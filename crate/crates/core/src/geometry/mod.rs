//! Domain descriptions: window, inside predicate, and distance oracles for
//! the Neumann part Γ, the Dirichlet part D, and the full boundary.

pub mod fileio;
pub mod primitives;

use crate::util::dist;
use primitives::Primitive;
use std::sync::Arc;

/// Axis-aligned closed box, used for computation windows.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoxRegion<const D: usize> {
    pub lo: [f64; D],
    pub hi: [f64; D],
}

impl<const D: usize> BoxRegion<D> {
    pub fn new(lo: [f64; D], hi: [f64; D]) -> Self {
        Self { lo, hi }
    }

    /// Symmetric window [-2^m, 2^m]^d.
    pub fn symmetric(m: i32) -> Self {
        let h = (m as f64).exp2();
        Self {
            lo: [-h; D],
            hi: [h; D],
        }
    }

    pub fn contains(&self, p: [f64; D]) -> bool {
        (0..D).all(|i| self.lo[i] <= p[i] && p[i] <= self.hi[i])
    }

    pub fn side(&self, i: usize) -> f64 {
        self.hi[i] - self.lo[i]
    }

    pub fn volume(&self) -> f64 {
        (0..D).map(|i| self.side(i)).product()
    }

    pub fn diam(&self) -> f64 {
        (0..D).map(|i| self.side(i) * self.side(i)).sum::<f64>().sqrt()
    }

    pub fn describe(&self) -> String {
        format!("lo={:?} hi={:?}", self.lo, self.hi)
    }
}

/// Certified bounds on the distance from a box to a set.
#[derive(Debug, Clone, Copy)]
pub struct BoxBounds {
    pub lower: f64,
    pub upper: f64,
}

/// Distance oracle for a closed set, with certified box bounds. Exact
/// (lower == upper) for the analytic primitives; interval-valued for
/// sampled boundaries.
pub trait SetOracle<const D: usize>: Sync {
    fn dist_point(&self, p: [f64; D]) -> f64;
    fn box_bounds(&self, lo: [f64; D], hi: [f64; D]) -> BoxBounds;
    fn is_empty(&self) -> bool {
        false
    }
    /// Resolution slack of the oracle (0 for analytic).
    fn slack(&self) -> f64 {
        0.0
    }
}

/// A boundary piece: empty, a union of analytic primitives, or a point cloud.
#[derive(Debug, Clone, Default)]
pub enum SetDesc {
    #[default]
    Empty,
    Analytic(Vec<Primitive>),
    Cloud(Arc<PointCloud<2>>),
}

impl SetDesc {
    pub fn dist(&self, p: [f64; 2]) -> f64 {
        match self {
            SetDesc::Empty => f64::INFINITY,
            SetDesc::Analytic(prims) => prims
                .iter()
                .map(|pr| pr.dist(p))
                .fold(f64::INFINITY, f64::min),
            SetDesc::Cloud(c) => c.dist(p),
        }
    }

    /// A point of the set near-realizing dist (None for the empty set).
    pub fn nearest_point(&self, p: [f64; 2]) -> Option<[f64; 2]> {
        match self {
            SetDesc::Empty => None,
            SetDesc::Analytic(prims) => {
                let mut best = None;
                let mut bd = f64::INFINITY;
                for pr in prims {
                    let q = pr.nearest_point(p);
                    let d = dist(p, q);
                    if d < bd {
                        bd = d;
                        best = Some(q);
                    }
                }
                best
            }
            SetDesc::Cloud(c) => c.nearest(p),
        }
    }

    pub fn box_dist(&self, lo: [f64; 2], hi: [f64; 2]) -> BoxBounds {
        match self {
            SetDesc::Empty => BoxBounds {
                lower: f64::INFINITY,
                upper: f64::INFINITY,
            },
            SetDesc::Analytic(prims) => {
                let d = prims
                    .iter()
                    .map(|pr| pr.box_dist(lo, hi))
                    .fold(f64::INFINITY, f64::min);
                BoxBounds { lower: d, upper: d }
            }
            SetDesc::Cloud(c) => {
                let center = [0.5 * (lo[0] + hi[0]), 0.5 * (lo[1] + hi[1])];
                let halfdiag = 0.5 * dist(lo, hi);
                let dc = c.dist(center);
                BoxBounds {
                    lower: (dc - halfdiag).max(0.0),
                    upper: dc + halfdiag,
                }
            }
        }
    }

    pub fn is_empty(&self) -> bool {
        matches!(self, SetDesc::Empty)
            || matches!(self, SetDesc::Analytic(v) if v.is_empty())
    }
}

impl SetOracle<2> for SetDesc {
    fn dist_point(&self, p: [f64; 2]) -> f64 {
        self.dist(p)
    }
    fn box_bounds(&self, lo: [f64; 2], hi: [f64; 2]) -> BoxBounds {
        self.box_dist(lo, hi)
    }
    fn is_empty(&self) -> bool {
        SetDesc::is_empty(self)
    }
    fn slack(&self) -> f64 {
        match self {
            SetDesc::Cloud(c) => c.spacing,
            _ => 0.0,
        }
    }
}

/// Point cloud with a uniform-grid index for nearest-neighbor queries.
#[derive(Debug)]
pub struct PointCloud<const D: usize> {
    pub points: Vec<[f64; D]>,
    /// sampling resolution of the cloud (reported as oracle slack)
    pub spacing: f64,
    cell: f64,
    origin: [f64; D],
    grid: std::collections::HashMap<[i64; D], Vec<u32>>,
}

impl<const D: usize> PointCloud<D> {
    pub fn new(points: Vec<[f64; D]>, spacing: f64) -> Self {
        assert!(!points.is_empty(), "empty point cloud");
        let mut lo = points[0];
        for p in &points {
            for i in 0..D {
                lo[i] = lo[i].min(p[i]);
            }
        }
        let cell = (spacing * 4.0).max(1e-9);
        let mut grid: std::collections::HashMap<[i64; D], Vec<u32>> =
            std::collections::HashMap::new();
        for (idx, p) in points.iter().enumerate() {
            let key: [i64; D] = std::array::from_fn(|i| ((p[i] - lo[i]) / cell).floor() as i64);
            grid.entry(key).or_default().push(idx as u32);
        }
        Self {
            points,
            spacing,
            cell,
            origin: lo,
            grid,
        }
    }

    fn key_of(&self, p: [f64; D]) -> [i64; D] {
        std::array::from_fn(|i| ((p[i] - self.origin[i]) / self.cell).floor() as i64)
    }

    pub fn nearest(&self, p: [f64; D]) -> Option<[f64; D]> {
        let key = self.key_of(p);
        let mut best: Option<(f64, [f64; D])> = None;
        // expanding ring search over grid cells
        for ring in 0..64i64 {
            let mut any = false;
            Self::for_ring(key, ring, |cell_key| {
                if let Some(list) = self.grid.get(&cell_key) {
                    any = true;
                    for &i in list {
                        let q = self.points[i as usize];
                        let d = dist(p, q);
                        if best.map_or(true, |(bd, _)| d < bd) {
                            best = Some((d, q));
                        }
                    }
                }
            });
            if let Some((bd, _)) = best {
                // all cells within ring are covered; a closer point could only
                // hide in the next ring if bd exceeds ring*cell
                if bd <= ring as f64 * self.cell {
                    break;
                }
            }
            let _ = any;
        }
        if best.is_none() {
            // brute-force fallback (very distant query)
            for q in &self.points {
                let d = dist(p, *q);
                if best.map_or(true, |(bd, _)| d < bd) {
                    best = Some((d, *q));
                }
            }
        }
        best.map(|(_, q)| q)
    }

    pub fn dist(&self, p: [f64; D]) -> f64 {
        self.nearest(p).map_or(f64::INFINITY, |q| dist(p, q))
    }

    fn for_ring(center: [i64; D], ring: i64, mut f: impl FnMut([i64; D])) {
        // iterate cells with Chebyshev distance == ring from center
        fn rec<const D: usize>(
            center: [i64; D],
            ring: i64,
            axis: usize,
            cur: &mut [i64; D],
            on_edge: bool,
            f: &mut impl FnMut([i64; D]),
        ) {
            if axis == D {
                if on_edge || ring == 0 {
                    f(*cur);
                }
                return;
            }
            for d in -ring..=ring {
                cur[axis] = center[axis] + d;
                rec::<D>(center, ring, axis + 1, cur, on_edge || d.abs() == ring, f);
            }
        }
        let mut cur = [0i64; D];
        rec::<D>(center, ring, 0, &mut cur, false, &mut f);
    }
}

/// Oracle over a bare point cloud (used for file-supplied boundaries,
/// including d=3 decomposition runs).
pub struct CloudOracle<const D: usize>(pub Arc<PointCloud<D>>);

impl<const D: usize> SetOracle<D> for CloudOracle<D> {
    fn dist_point(&self, p: [f64; D]) -> f64 {
        self.0.dist(p)
    }
    fn box_bounds(&self, lo: [f64; D], hi: [f64; D]) -> BoxBounds {
        let center: [f64; D] = std::array::from_fn(|i| 0.5 * (lo[i] + hi[i]));
        let halfdiag = 0.5 * dist(lo, hi);
        let dc = self.0.dist(center);
        BoxBounds {
            lower: (dc - halfdiag).max(0.0),
            upper: dc + halfdiag,
        }
    }
    fn slack(&self) -> f64 {
        self.0.spacing
    }
}

/// Open-set membership predicate.
#[derive(Debug, Clone)]
pub enum InsideKind {
    /// {y < 0}
    LowerHalfPlane,
    /// open disk
    Disk { center: [f64; 2], radius: f64 },
    /// plane minus the closed cusp wedge {x >= 0, -x^alpha <= y <= 0}
    CuspZeroComplement { alpha: f64 },
    /// {y > 0} union {x > 0, y < -x^-alpha}
    CuspInfinityUpper { alpha: f64 },
    /// plane minus the closed upper half-sector of opening theta
    SectorComplement { theta: f64 },
    /// sector complement with a closed disk removed
    SectorComplementMinusDisk {
        theta: f64,
        center: [f64; 2],
        radius: f64,
    },
    /// even-odd polygon interior (file-supplied domains)
    Polygon { pts: Arc<Vec<[f64; 2]>> },
}

impl InsideKind {
    pub fn contains(&self, p: [f64; 2]) -> bool {
        match self {
            InsideKind::LowerHalfPlane => p[1] < 0.0,
            InsideKind::Disk { center, radius } => dist(p, *center) < *radius,
            InsideKind::CuspZeroComplement { alpha } => {
                !(p[0] >= 0.0 && p[1] <= 0.0 && p[1] >= -p[0].powf(*alpha))
            }
            InsideKind::CuspInfinityUpper { alpha } => {
                p[1] > 0.0 || (p[0] > 0.0 && p[1] < -p[0].powf(-*alpha))
            }
            InsideKind::SectorComplement { theta } => !in_closed_upper_sector(p, *theta),
            InsideKind::SectorComplementMinusDisk {
                theta,
                center,
                radius,
            } => !in_closed_upper_sector(p, *theta) && dist(p, *center) > *radius,
            InsideKind::Polygon { pts } => polygon_contains(pts, p),
        }
    }
}

fn in_closed_upper_sector(p: [f64; 2], theta: f64) -> bool {
    if p[0] == 0.0 && p[1] == 0.0 {
        return true;
    }
    if p[1] < 0.0 {
        return false;
    }
    let phi = p[1].atan2(p[0]);
    (0.0..=theta).contains(&phi)
}

fn polygon_contains(pts: &[[f64; 2]], p: [f64; 2]) -> bool {
    let mut inside = false;
    let n = pts.len();
    let mut j = n - 1;
    for i in 0..n {
        let (a, b) = (pts[i], pts[j]);
        if (a[1] > p[1]) != (b[1] > p[1]) {
            let x = a[0] + (p[1] - a[1]) / (b[1] - a[1]) * (b[0] - a[0]);
            if p[0] < x {
                inside = !inside;
            }
        }
        j = i;
    }
    inside
}

/// Claimed assumption parameters, when the user asserts them.
#[derive(Debug, Clone, Copy)]
pub struct ClaimedParams {
    pub eps: f64,
    pub delta: f64,
    pub qh_bound: f64,
    pub lambda: f64,
}

/// How distances are produced.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OracleKind {
    Analytic,
    SampledBoundary { h_b: f64 },
}

/// Result of classifying a point against a domain.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PointClass {
    Interior,
    OnGamma,
    OnD,
    Exterior,
}

/// Which set a distance query addresses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SetSel {
    Gamma,
    DPart,
    Boundary,
}

/// Built-in 2D example domains.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BuiltinDomain {
    /// lower half-plane; Γ/D split along the x-axis is configurable
    HalfPlane { split: HalfPlaneSplit },
    /// open unit-like disk with pure Dirichlet boundary
    PureDirichletDisk { radius: f64 },
    /// lower half-plane with Γ the positive axis, D the closed negative axis
    Sector { theta: f64, outer: SectorOuter },
    /// plane minus closed upper half-sector; Γ positive axis, D the tilted edge
    SectorComplement { theta: f64 },
    /// plane minus cusp wedge at the origin
    CuspAtZero { alpha: f64 },
    /// cusp pinching toward infinity
    CuspAtInfinity { alpha: f64 },
    /// domain avoiding the upper half-sector, with an extra Dirichlet disk;
    /// extended through the sector-complement reference domain
    ExteriorCusp { theta: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HalfPlaneSplit {
    /// Γ = whole line, D empty (pure Neumann)
    AllGamma,
    /// D = whole line, Γ empty (pure Dirichlet)
    AllDirichlet,
    /// Γ = positive axis, D = closed negative axis
    PositiveGamma,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SectorOuter {
    /// the domain is the lower half-plane
    HalfPlane,
    /// the domain is the whole sector complement
    Plane,
}

/// Dirichlet-disk offset for the exterior-cusp example (kept off the sector
/// and off the x-axis).
pub const EXTERIOR_CUSP_DISK_CENTER: [f64; 2] = [-1.25, 1.25];
pub const EXTERIOR_CUSP_DISK_RADIUS: f64 = 0.5;

/// A 2D domain: window, inside predicate, boundary pieces, metadata.
#[derive(Debug, Clone)]
pub struct DomainSpec {
    pub name: String,
    pub builtin: Option<BuiltinDomain>,
    pub window: BoxRegion<2>,
    pub oracle_kind: OracleKind,
    pub inside_kind: InsideKind,
    /// closure of the Neumann part Γ
    pub gamma: SetDesc,
    /// Dirichlet part D (already closed)
    pub dpart: SetDesc,
    pub claimed: Option<ClaimedParams>,
}

impl DomainSpec {
    pub fn inside(&self, p: [f64; 2]) -> bool {
        self.inside_kind.contains(p)
    }

    pub fn dist_gamma(&self, p: [f64; 2]) -> f64 {
        self.gamma.dist(p)
    }

    pub fn dist_d(&self, p: [f64; 2]) -> f64 {
        self.dpart.dist(p)
    }

    pub fn dist_boundary(&self, p: [f64; 2]) -> f64 {
        self.dist_gamma(p).min(self.dist_d(p))
    }

    pub fn dist_to_set(&self, p: [f64; 2], sel: SetSel) -> f64 {
        match sel {
            SetSel::Gamma => self.dist_gamma(p),
            SetSel::DPart => self.dist_d(p),
            SetSel::Boundary => self.dist_boundary(p),
        }
    }

    /// Classification tolerance: boundary-proximity wins over inside/outside.
    /// D takes precedence where both boundary pieces are near (D is closed;
    /// points of cl(Γ) ∖ Γ belong to D in all the built-ins).
    pub fn classify(&self, p: [f64; 2], tol: f64) -> PointClass {
        if self.dist_d(p) <= tol {
            return PointClass::OnD;
        }
        if self.dist_gamma(p) <= tol {
            return PointClass::OnGamma;
        }
        if self.inside(p) {
            PointClass::Interior
        } else {
            PointClass::Exterior
        }
    }

    /// Distance to the closure of the domain.
    pub fn dist_closure(&self, p: [f64; 2]) -> f64 {
        if self.inside(p) {
            0.0
        } else {
            self.dist_boundary(p)
        }
    }

    /// Oracle for cl(Ω), used to decompose the exterior.
    pub fn closure_oracle(&self) -> ClosureOracle<'_> {
        ClosureOracle { dom: self }
    }

    pub fn tol(&self) -> f64 {
        match self.oracle_kind {
            OracleKind::Analytic => crate::TOL_B,
            OracleKind::SampledBoundary { h_b } => h_b,
        }
    }

    /// Measured assumption parameters fall back on these when absent.
    pub fn delta(&self) -> f64 {
        self.claimed.map_or(f64::INFINITY, |c| c.delta)
    }
}

/// `SetOracle` view of the closure of Ω.
pub struct ClosureOracle<'a> {
    dom: &'a DomainSpec,
}

impl SetOracle<2> for ClosureOracle<'_> {
    fn dist_point(&self, p: [f64; 2]) -> f64 {
        self.dom.dist_closure(p)
    }

    fn box_bounds(&self, lo: [f64; 2], hi: [f64; 2]) -> BoxBounds {
        let center = [0.5 * (lo[0] + hi[0]), 0.5 * (lo[1] + hi[1])];
        if self.dom.inside(center) {
            return BoxBounds {
                lower: 0.0,
                upper: 0.0,
            };
        }
        let bg = self.dom.gamma.box_dist(lo, hi);
        let bd = self.dom.dpart.box_dist(lo, hi);
        let lower = bg.lower.min(bd.lower);
        let upper = bg.upper.min(bd.upper);
        if lower > 0.0 && self.dom.dist_boundary(center) > 0.0 {
            // box avoids the boundary and its center is strictly exterior:
            // the whole (connected) box is exterior, distance is exact
            BoxBounds { lower, upper }
        } else {
            BoxBounds {
                lower: 0.0,
                upper: 0.0,
            }
        }
    }

    fn slack(&self) -> f64 {
        self.dom.tol()
    }
}

impl BuiltinDomain {
    pub fn parse(name: &str) -> Option<BuiltinDomain> {
        let b = match name {
            "halfplane" | "half-plane" => BuiltinDomain::HalfPlane {
                split: HalfPlaneSplit::AllGamma,
            },
            "halfplane-dirichlet" => BuiltinDomain::HalfPlane {
                split: HalfPlaneSplit::AllDirichlet,
            },
            "halfplane-split" => BuiltinDomain::HalfPlane {
                split: HalfPlaneSplit::PositiveGamma,
            },
            "dirichlet-disk" | "disk" => BuiltinDomain::PureDirichletDisk { radius: 1.0 },
            "sector" => BuiltinDomain::Sector {
                theta: std::f64::consts::FRAC_PI_4,
                outer: SectorOuter::HalfPlane,
            },
            "sector-plane" => BuiltinDomain::SectorComplement {
                theta: std::f64::consts::FRAC_PI_4,
            },
            "cusp-zero" => BuiltinDomain::CuspAtZero { alpha: 2.0 },
            "cusp-infinity" => BuiltinDomain::CuspAtInfinity { alpha: 1.0 },
            "exterior-cusp" => BuiltinDomain::ExteriorCusp {
                theta: std::f64::consts::FRAC_PI_4,
            },
            _ => return None,
        };
        Some(b)
    }

    pub fn slug(&self) -> String {
        match self {
            BuiltinDomain::HalfPlane { split } => match split {
                HalfPlaneSplit::AllGamma => "halfplane".into(),
                HalfPlaneSplit::AllDirichlet => "halfplane-dirichlet".into(),
                HalfPlaneSplit::PositiveGamma => "halfplane-split".into(),
            },
            BuiltinDomain::PureDirichletDisk { .. } => "dirichlet-disk".into(),
            BuiltinDomain::Sector { .. } => "sector".into(),
            BuiltinDomain::SectorComplement { .. } => "sector-plane".into(),
            BuiltinDomain::CuspAtZero { .. } => "cusp-zero".into(),
            BuiltinDomain::CuspAtInfinity { .. } => "cusp-infinity".into(),
            BuiltinDomain::ExteriorCusp { .. } => "exterior-cusp".into(),
        }
    }

    /// Instantiate with the given window exponent (window [-2^m, 2^m]^2).
    pub fn domain_with_window(&self, m: i32) -> DomainSpec {
        let window = BoxRegion::symmetric(m);
        let pos_ray = Primitive::Ray {
            origin: [0.0, 0.0],
            dir: [1.0, 0.0],
        };
        let neg_ray = Primitive::Ray {
            origin: [0.0, 0.0],
            dir: [-1.0, 0.0],
        };
        match *self {
            BuiltinDomain::HalfPlane { split } => {
                let (gamma, dpart, claimed) = match split {
                    HalfPlaneSplit::AllGamma => (
                        SetDesc::Analytic(vec![Primitive::HLine { y: 0.0 }]),
                        SetDesc::Empty,
                        Some(ClaimedParams {
                            eps: 0.05,
                            delta: f64::INFINITY,
                            qh_bound: 1.0,
                            lambda: 1.0,
                        }),
                    ),
                    HalfPlaneSplit::AllDirichlet => (
                        SetDesc::Empty,
                        SetDesc::Analytic(vec![Primitive::HLine { y: 0.0 }]),
                        Some(ClaimedParams {
                            eps: 1.0,
                            delta: f64::INFINITY,
                            qh_bound: 0.0,
                            lambda: 1.0,
                        }),
                    ),
                    HalfPlaneSplit::PositiveGamma => (
                        SetDesc::Analytic(vec![pos_ray.clone()]),
                        SetDesc::Analytic(vec![neg_ray.clone()]),
                        Some(ClaimedParams {
                            eps: 0.05,
                            delta: f64::INFINITY,
                            qh_bound: 6.0,
                            lambda: 1.0,
                        }),
                    ),
                };
                DomainSpec {
                    name: self.slug(),
                    builtin: Some(*self),
                    window,
                    oracle_kind: OracleKind::Analytic,
                    inside_kind: InsideKind::LowerHalfPlane,
                    gamma,
                    dpart,
                    claimed,
                }
            }
            BuiltinDomain::PureDirichletDisk { radius } => DomainSpec {
                name: self.slug(),
                builtin: Some(*self),
                window,
                oracle_kind: OracleKind::Analytic,
                inside_kind: InsideKind::Disk {
                    center: [0.0, 0.0],
                    radius,
                },
                gamma: SetDesc::Empty,
                dpart: SetDesc::Analytic(vec![Primitive::Circle {
                    center: [0.0, 0.0],
                    radius,
                }]),
                claimed: Some(ClaimedParams {
                    eps: 1.0,
                    delta: f64::INFINITY,
                    qh_bound: 0.0,
                    lambda: 1.0,
                }),
            },
            BuiltinDomain::Sector { theta, outer } => {
                let qh = 2.0 * (2.0 + 1.0 / theta.tan());
                match outer {
                    SectorOuter::HalfPlane => DomainSpec {
                        name: self.slug(),
                        builtin: Some(*self),
                        window,
                        oracle_kind: OracleKind::Analytic,
                        inside_kind: InsideKind::LowerHalfPlane,
                        gamma: SetDesc::Analytic(vec![pos_ray]),
                        dpart: SetDesc::Analytic(vec![neg_ray]),
                        claimed: Some(ClaimedParams {
                            eps: 0.05,
                            delta: f64::INFINITY,
                            qh_bound: qh,
                            lambda: 1.0,
                        }),
                    },
                    SectorOuter::Plane => BuiltinDomain::SectorComplement { theta }
                        .domain_with_window(m),
                }
            }
            BuiltinDomain::SectorComplement { theta } => {
                let edge = Primitive::Ray {
                    origin: [0.0, 0.0],
                    dir: [theta.cos(), theta.sin()],
                };
                let qh = 2.0 * (2.0 + 1.0 / theta.tan());
                DomainSpec {
                    name: self.slug(),
                    builtin: Some(*self),
                    window,
                    oracle_kind: OracleKind::Analytic,
                    inside_kind: InsideKind::SectorComplement { theta },
                    gamma: SetDesc::Analytic(vec![pos_ray]),
                    dpart: SetDesc::Analytic(vec![edge]),
                    claimed: Some(ClaimedParams {
                        eps: 0.05,
                        delta: f64::INFINITY,
                        qh_bound: qh,
                        lambda: 1.0,
                    }),
                }
            }
            BuiltinDomain::CuspAtZero { alpha } => DomainSpec {
                name: self.slug(),
                builtin: Some(*self),
                window,
                oracle_kind: OracleKind::Analytic,
                inside_kind: InsideKind::CuspZeroComplement { alpha },
                gamma: SetDesc::Analytic(vec![pos_ray]),
                dpart: SetDesc::Analytic(vec![Primitive::PowerCurve { alpha }]),
                claimed: None,
            },
            BuiltinDomain::CuspAtInfinity { alpha } => DomainSpec {
                name: self.slug(),
                builtin: Some(*self),
                window,
                oracle_kind: OracleKind::Analytic,
                inside_kind: InsideKind::CuspInfinityUpper { alpha },
                gamma: SetDesc::Analytic(vec![Primitive::HLine { y: 0.0 }]),
                dpart: SetDesc::Analytic(vec![Primitive::InvPowerCurve { alpha }]),
                claimed: None,
            },
            BuiltinDomain::ExteriorCusp { theta } => {
                let edge = Primitive::Ray {
                    origin: [0.0, 0.0],
                    dir: [theta.cos(), theta.sin()],
                };
                let circle = Primitive::Circle {
                    center: EXTERIOR_CUSP_DISK_CENTER,
                    radius: EXTERIOR_CUSP_DISK_RADIUS,
                };
                DomainSpec {
                    name: self.slug(),
                    builtin: Some(*self),
                    window,
                    oracle_kind: OracleKind::Analytic,
                    inside_kind: InsideKind::SectorComplementMinusDisk {
                        theta,
                        center: EXTERIOR_CUSP_DISK_CENTER,
                        radius: EXTERIOR_CUSP_DISK_RADIUS,
                    },
                    gamma: SetDesc::Analytic(vec![pos_ray]),
                    dpart: SetDesc::Analytic(vec![edge, circle]),
                    claimed: None,
                }
            }
        }
    }

    pub fn domain(&self) -> DomainSpec {
        self.domain_with_window(3)
    }

    /// Reference domain Ω_Γ for two-step extension (only the exterior-cusp
    /// example uses one).
    pub fn reference_domain(&self, m: i32) -> Option<DomainSpec> {
        match *self {
            BuiltinDomain::ExteriorCusp { theta } => {
                Some(BuiltinDomain::SectorComplement { theta }.domain_with_window(m))
            }
            _ => None,
        }
    }
}

/// Sample the analytic boundary pieces of a builtin at roughly `h_b` spacing,
/// producing a sampled-oracle variant of the same domain. Used to
/// cross-validate the point-cloud pathway.
pub fn sampled_variant(dom: &DomainSpec, h_b: f64) -> DomainSpec {
    let mut out = dom.clone();
    out.oracle_kind = OracleKind::SampledBoundary { h_b };
    out.gamma = sample_setdesc(&dom.gamma, &dom.window, h_b);
    out.dpart = sample_setdesc(&dom.dpart, &dom.window, h_b);
    out.name = format!("{}-sampled", dom.name);
    out
}

fn sample_setdesc(desc: &SetDesc, window: &BoxRegion<2>, h_b: f64) -> SetDesc {
    let prims = match desc {
        SetDesc::Empty => return SetDesc::Empty,
        SetDesc::Cloud(c) => return SetDesc::Cloud(c.clone()),
        SetDesc::Analytic(prims) => prims,
    };
    let reach = window.diam() * 1.5;
    let mut pts = Vec::new();
    for prim in prims {
        match *prim {
            Primitive::HLine { y } => {
                let mut x = window.lo[0] - reach * 0.2;
                while x <= window.hi[0] + reach * 0.2 {
                    pts.push([x, y]);
                    x += h_b;
                }
            }
            Primitive::Ray { origin, dir } => {
                let mut t = 0.0;
                while t <= reach {
                    pts.push([origin[0] + t * dir[0], origin[1] + t * dir[1]]);
                    t += h_b;
                }
            }
            Primitive::Circle { center, radius } => {
                let n = ((2.0 * std::f64::consts::PI * radius / h_b).ceil() as usize).max(8);
                for i in 0..n {
                    let a = 2.0 * std::f64::consts::PI * i as f64 / n as f64;
                    pts.push([center[0] + radius * a.cos(), center[1] + radius * a.sin()]);
                }
            }
            Primitive::PowerCurve { alpha } => {
                let mut t = 0.0;
                while t <= reach.powf(1.0 / alpha.max(1.0)).max(reach) {
                    pts.push([t, -t.powf(alpha)]);
                    // advance by approximate arclength step
                    let slope = if t > 0.0 { alpha * t.powf(alpha - 1.0) } else { 0.0 };
                    t += h_b / (1.0 + slope * slope).sqrt();
                }
            }
            Primitive::InvPowerCurve { alpha } => {
                let mut t = reach.powf(-1.0 / alpha) / 2.0;
                while t <= reach {
                    pts.push([t, -t.powf(-alpha)]);
                    let slope = alpha * t.powf(-alpha - 1.0);
                    t += h_b / (1.0 + slope * slope).sqrt();
                }
            }
            Primitive::Point { at } => pts.push(at),
        }
    }
    SetDesc::Cloud(Arc::new(PointCloud::new(pts, h_b)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    #[test]
    fn halfplane_classification() {
        let dom = BuiltinDomain::HalfPlane {
            split: HalfPlaneSplit::AllGamma,
        }
        .domain();
        assert_eq!(dom.classify([0.0, -1.0], 1e-9), PointClass::Interior);
        assert_eq!(dom.classify([0.0, 1.0], 1e-9), PointClass::Exterior);
        assert_eq!(dom.classify([3.0, 0.0], 1e-9), PointClass::OnGamma);
        assert_eq!(dom.classify([3.0, 1e-12], 1e-9), PointClass::OnGamma);
    }

    #[test]
    fn halfplane_distance_translation_invariance() {
        let dom = BuiltinDomain::HalfPlane {
            split: HalfPlaneSplit::AllGamma,
        }
        .domain();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..100 {
            let p = [rng.gen_range(-4.0..4.0), rng.gen_range(-4.0..4.0)];
            let shift: f64 = rng.gen_range(-5.0..5.0);
            let q = [p[0] + shift, p[1]];
            assert!((dom.dist_gamma(p) - dom.dist_gamma(q)).abs() < 1e-12);
        }
    }

    #[test]
    fn oracle_consistency_min_of_pieces() {
        let doms = [
            BuiltinDomain::Sector {
                theta: std::f64::consts::FRAC_PI_4,
                outer: SectorOuter::HalfPlane,
            }
            .domain(),
            BuiltinDomain::CuspAtZero { alpha: 2.0 }.domain(),
            BuiltinDomain::ExteriorCusp {
                theta: std::f64::consts::FRAC_PI_4,
            }
            .domain(),
        ];
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for dom in &doms {
            for _ in 0..2500 {
                let p = [rng.gen_range(-8.0..8.0), rng.gen_range(-8.0..8.0)];
                let db = dom.dist_boundary(p);
                let expect = dom.dist_gamma(p).min(dom.dist_d(p));
                assert!((db - expect).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn cusp_classification_probes() {
        let alpha = 2.0;
        let dom = BuiltinDomain::CuspAtZero { alpha }.domain();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let x: f64 = rng.gen_range(0.2..1.5);
            let on_curve = [x, -x.powf(alpha)];
            assert_eq!(dom.classify(on_curve, 1e-9), PointClass::OnD, "x={x}");
            let mid = [x, -0.5 * x.powf(alpha)];
            // strictly between the axis and the curve: removed wedge interior
            assert_eq!(dom.classify(mid, 1e-9), PointClass::Exterior, "x={x}");
            let above = [x, 0.3];
            assert_eq!(dom.classify(above, 1e-9), PointClass::Interior);
        }
    }

    #[test]
    fn sector_point_class_and_distance() {
        let dom = BuiltinDomain::Sector {
            theta: std::f64::consts::FRAC_PI_4,
            outer: SectorOuter::HalfPlane,
        }
        .domain();
        // frozen: dist((-1,0), Γ) = 1 (distance to the positive-axis ray)
        assert!((dom.dist_gamma([-1.0, 0.0]) - 1.0).abs() < 1e-12);
        assert_eq!(dom.classify([-1.0, 0.0], 1e-9), PointClass::OnD);
        assert_eq!(dom.classify([1.0, 0.0], 1e-9), PointClass::OnGamma);
    }

    #[test]
    fn sector_complement_membership() {
        let theta = std::f64::consts::FRAC_PI_4;
        let dom = BuiltinDomain::SectorComplement { theta }.domain();
        // inside the upper sector: excluded
        assert!(!dom.inside([1.0, 0.3]));
        // above the sector: included
        assert!(dom.inside([0.0, 1.0]));
        // lower half-plane: included
        assert!(dom.inside([0.5, -0.5]));
        // positive axis is boundary
        assert_eq!(dom.classify([2.0, 0.0], 1e-9), PointClass::OnGamma);
        // tilted edge is Dirichlet
        let e = [2.0 * theta.cos(), 2.0 * theta.sin()];
        assert_eq!(dom.classify(e, 1e-9), PointClass::OnD);
    }

    #[test]
    fn sampled_oracle_tracks_analytic() {
        let h_b = 1e-3;
        let dom = BuiltinDomain::Sector {
            theta: std::f64::consts::FRAC_PI_4,
            outer: SectorOuter::HalfPlane,
        }
        .domain();
        let sampled = sampled_variant(&dom, h_b);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(19);
        for _ in 0..300 {
            let p = [rng.gen_range(-6.0..6.0), rng.gen_range(-6.0..6.0)];
            assert!(
                (dom.dist_gamma(p) - sampled.dist_gamma(p)).abs() <= h_b,
                "gamma mismatch at {p:?}"
            );
            assert!((dom.dist_d(p) - sampled.dist_d(p)).abs() <= h_b);
        }
    }

    #[test]
    fn exterior_cusp_geometry_consistent() {
        let dom = BuiltinDomain::ExteriorCusp {
            theta: std::f64::consts::FRAC_PI_4,
        }
        .domain();
        // the Dirichlet disk is interior to the reference domain but not Ω
        assert!(!dom.inside(EXTERIOR_CUSP_DISK_CENTER));
        let reference = BuiltinDomain::ExteriorCusp {
            theta: std::f64::consts::FRAC_PI_4,
        }
        .reference_domain(3)
        .unwrap();
        assert!(reference.inside(EXTERIOR_CUSP_DISK_CENTER));
        // Ω subset of Ω_Γ on a sample
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(23);
        for _ in 0..2000 {
            let p = [rng.gen_range(-8.0..8.0), rng.gen_range(-8.0..8.0)];
            if dom.inside(p) {
                assert!(reference.inside(p), "Ω not within Ω_Γ at {p:?}");
            }
        }
    }
}
