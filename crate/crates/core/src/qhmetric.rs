//! Quasihyperbolic distances in Ξ = R^d ∖ cl(Γ): the metric with density
//! 1/dist(·, cl Γ), approximated from above by shortest paths in a graph
//! over the Whitney cubes of the complement, plus cube-chain queries that
//! realize the chain-length ⇄ distance equivalence.

use crate::cube::DyadicCube;
use crate::geometry::{BoxRegion, SetOracle};
use crate::util::{adaptive_simpson, dist, lerp, TotalF64};
use crate::whitney::{decompose, CubeQuery, WhitneyDecomposition};
use crate::SobexError;
use std::collections::{BinaryHeap, HashMap, HashSet};

/// Quasihyperbolic length of the straight segment [a, b], by adaptive
/// Simpson quadrature at relative tolerance 1e-6. `floor` guards the
/// integrand against oracle zeros; callers pass a floor strictly below the
/// true minimum of dist on the segment, so the value is unaffected.
pub fn qh_segment_length<const D: usize>(
    dist_f: impl Fn([f64; D]) -> f64,
    a: [f64; D],
    b: [f64; D],
    floor: f64,
) -> f64 {
    let len = dist(a, b);
    if len == 0.0 {
        return 0.0;
    }
    adaptive_simpson(
        &|t| len / dist_f(lerp(a, b, t)).max(floor),
        0.0,
        1.0,
        1e-6,
    )
}

/// A reported quasihyperbolic distance: an upper bound on the true value.
#[derive(Debug, Clone, Copy)]
pub struct QhDist {
    pub value: f64,
    pub refine: u8,
    /// true when the value is ∞ but a connecting path might exist outside
    /// the computation window
    pub windowed: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChainKind {
    Intersecting,
    Touching,
}

/// An ordered cube chain; consecutive cubes intersect (or touch).
#[derive(Debug, Clone)]
pub struct ChainResult<const D: usize> {
    pub cubes: Vec<DyadicCube<D>>,
    pub kind: ChainKind,
}

impl<const D: usize> ChainResult<D> {
    pub fn len(&self) -> usize {
        self.cubes.len()
    }
    pub fn is_empty(&self) -> bool {
        self.cubes.is_empty()
    }
}

/// Shortest-path graph over W(cl Γ). Nodes are a dyadic lattice inside each
/// cube (refine 0: center; 1: center + corners; 2: the full 3^d half-step
/// lattice). Shared lattice points of adjacent cubes coincide bit-exactly
/// and are merged, which is what lets paths hug the geodesics; centers of
/// intersecting cubes are additionally joined directly so the refine-0
/// graph is a subgraph of the finer ones.
pub struct QhGraph<const D: usize> {
    pub refine: u8,
    pub whitney: WhitneyDecomposition<D>,
    pub nodes: Vec<[f64; D]>,
    adj: Vec<Vec<(u32, f64)>>,
    cube_nodes: Vec<Vec<u32>>,
}

fn node_key<const D: usize>(p: [f64; D]) -> [u64; D] {
    std::array::from_fn(|i| (if p[i] == 0.0 { 0.0 } else { p[i] }).to_bits())
}

impl<const D: usize> QhGraph<D> {
    /// Decompose the complement of the target set and build the metric graph.
    pub fn build<O: SetOracle<D> + ?Sized>(
        oracle: &O,
        window: BoxRegion<D>,
        max_level: i32,
        refine: u8,
    ) -> Result<Self, SobexError> {
        let whitney = decompose(oracle, window, max_level)?;
        Ok(Self::from_whitney(oracle, whitney, refine))
    }

    pub fn from_whitney<O: SetOracle<D> + ?Sized>(
        oracle: &O,
        whitney: WhitneyDecomposition<D>,
        refine: u8,
    ) -> Self {
        let dist_f = |p: [f64; D]| oracle.dist_point(p);
        let mut nodes: Vec<[f64; D]> = Vec::new();
        let mut lookup: HashMap<[u64; D], u32> = HashMap::new();
        let mut cube_nodes: Vec<Vec<u32>> = Vec::with_capacity(whitney.len());
        for q in &whitney.cubes {
            let pts = lattice_points(q, refine);
            let ids = pts
                .into_iter()
                .map(|p| {
                    *lookup.entry(node_key(p)).or_insert_with(|| {
                        nodes.push(p);
                        (nodes.len() - 1) as u32
                    })
                })
                .collect();
            cube_nodes.push(ids);
        }
        let mut adj: Vec<Vec<(u32, f64)>> = vec![Vec::new(); nodes.len()];
        let mut seen: HashSet<(u32, u32)> = HashSet::new();
        let mut add_edge = |adj: &mut Vec<Vec<(u32, f64)>>, u: u32, v: u32, floor: f64| {
            if u == v {
                return;
            }
            let key = (u.min(v), u.max(v));
            if !seen.insert(key) {
                return;
            }
            let w = qh_segment_length(dist_f, nodes[u as usize], nodes[v as usize], floor);
            adj[u as usize].push((v, w));
            adj[v as usize].push((u, w));
        };
        for (ci, q) in whitney.cubes.iter().enumerate() {
            // within-cube: complete graph; every segment stays inside Q where
            // dist ≥ dist(Q, Γ) ≥ diam(Q) > 0
            let ids = &cube_nodes[ci];
            let floor = q.diam() / 8.0;
            for i in 0..ids.len() {
                for j in (i + 1)..ids.len() {
                    add_edge(&mut adj, ids[i], ids[j], floor);
                }
            }
            // center-center links to intersecting cubes: the segment between
            // centers keeps dist ≥ (diam Q + diam R)/4
            for &nj in whitney.intersecting(ci as u32) {
                let r = whitney.cubes[nj as usize];
                let floor = q.diam().min(r.diam()) / 8.0;
                add_edge(&mut adj, cube_nodes[ci][0], cube_nodes[nj as usize][0], floor);
            }
        }
        QhGraph {
            refine,
            whitney,
            nodes,
            adj,
            cube_nodes,
        }
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    /// Node ids belonging to cube `i` (the first is always the center).
    pub fn nodes_of_cube(&self, i: u32) -> &[u32] {
        &self.cube_nodes[i as usize]
    }

    /// Multi-source Dijkstra; returns the distance field over all nodes.
    /// With `targets`, stops once all of them are settled.
    pub fn dijkstra(&self, starts: &[(u32, f64)], targets: Option<&[u32]>) -> Vec<f64> {
        let mut distf = vec![f64::INFINITY; self.nodes.len()];
        let mut heap: BinaryHeap<std::cmp::Reverse<(TotalF64, u32)>> = BinaryHeap::new();
        for &(u, w) in starts {
            if w < distf[u as usize] {
                distf[u as usize] = w;
                heap.push(std::cmp::Reverse((TotalF64(w), u)));
            }
        }
        let mut pending: HashSet<u32> = targets
            .map(|t| t.iter().copied().collect())
            .unwrap_or_default();
        while let Some(std::cmp::Reverse((TotalF64(d), u))) = heap.pop() {
            if d > distf[u as usize] {
                continue;
            }
            if targets.is_some() {
                pending.remove(&u);
                if pending.is_empty() {
                    break;
                }
            }
            for &(v, w) in &self.adj[u as usize] {
                let nd = d + w;
                if nd < distf[v as usize] {
                    distf[v as usize] = nd;
                    heap.push(std::cmp::Reverse((TotalF64(nd), v)));
                }
            }
        }
        distf
    }

    fn locate_cube<O: SetOracle<D> + ?Sized>(
        &self,
        oracle: &O,
        p: [f64; D],
        tol: f64,
    ) -> Result<u32, SobexError> {
        let df = oracle.dist_point(p);
        if df <= tol {
            return Err(SobexError::PointOnGamma(p.to_vec()));
        }
        match self.whitney.locate(p, df, tol) {
            CubeQuery::Cube(q) => Ok(self.whitney.index_of(&q).expect("located cube is stored")),
            CubeQuery::OnTarget => Err(SobexError::PointOnGamma(p.to_vec())),
            CubeQuery::Unresolved => Err(SobexError::Unresolved(p.to_vec())),
            CubeQuery::OutsideWindow => Err(SobexError::OutsideWindow(p.to_vec())),
        }
    }

    /// Upper bound on qhdist(x, y) via the graph, with both endpoints
    /// injected into their containing cubes. Returns 0 when the target set
    /// is empty (the metric degenerates).
    pub fn qhdist<O: SetOracle<D> + ?Sized>(
        &self,
        oracle: &O,
        x: [f64; D],
        y: [f64; D],
        tol: f64,
    ) -> Result<QhDist, SobexError> {
        if oracle.is_empty() {
            return Ok(QhDist {
                value: 0.0,
                refine: self.refine,
                windowed: false,
            });
        }
        let dist_f = |p: [f64; D]| oracle.dist_point(p);
        let cx = self.locate_cube(oracle, x, tol)?;
        let cy = self.locate_cube(oracle, y, tol)?;
        let mut best = f64::INFINITY;
        if cx == cy {
            let q = self.whitney.cubes[cx as usize];
            best = qh_segment_length(dist_f, x, y, q.diam() / 8.0);
        }
        let qx = self.whitney.cubes[cx as usize];
        let starts: Vec<(u32, f64)> = self
            .cube_nodes[cx as usize]
            .iter()
            .map(|&u| {
                (
                    u,
                    qh_segment_length(dist_f, x, self.nodes[u as usize], qx.diam() / 8.0),
                )
            })
            .collect();
        let ends = &self.cube_nodes[cy as usize];
        let field = self.dijkstra(&starts, Some(ends));
        let qy = self.whitney.cubes[cy as usize];
        for &v in ends {
            let tail = qh_segment_length(dist_f, self.nodes[v as usize], y, qy.diam() / 8.0);
            best = best.min(field[v as usize] + tail);
        }
        Ok(QhDist {
            value: best,
            refine: self.refine,
            windowed: best.is_infinite(),
        })
    }

    /// Minimum-length chain of pairwise-intersecting Whitney cubes from the
    /// cube of x to the cube of y (BFS), or None past `max_len`.
    pub fn intersecting_chain<O: SetOracle<D> + ?Sized>(
        &self,
        oracle: &O,
        x: [f64; D],
        y: [f64; D],
        max_len: usize,
        tol: f64,
    ) -> Result<Option<ChainResult<D>>, SobexError> {
        let cx = self.locate_cube(oracle, x, tol)?;
        let cy = self.locate_cube(oracle, y, tol)?;
        Ok(self
            .cube_chain(cx, cy, max_len)
            .map(|ids| ChainResult {
                cubes: ids
                    .into_iter()
                    .map(|i| self.whitney.cubes[i as usize])
                    .collect(),
                kind: ChainKind::Intersecting,
            }))
    }

    /// BFS chain between stored cube indices.
    pub fn cube_chain(&self, from: u32, to: u32, max_len: usize) -> Option<Vec<u32>> {
        if from == to {
            return Some(vec![from]);
        }
        let n = self.whitney.len();
        let mut prev: Vec<u32> = vec![u32::MAX; n];
        let mut depth: Vec<u32> = vec![u32::MAX; n];
        let mut frontier = vec![from];
        depth[from as usize] = 1;
        while !frontier.is_empty() {
            let mut next = vec![];
            for &u in &frontier {
                let du = depth[u as usize];
                if du as usize >= max_len {
                    continue;
                }
                for &v in self.whitney.intersecting(u) {
                    if depth[v as usize] == u32::MAX {
                        depth[v as usize] = du + 1;
                        prev[v as usize] = u;
                        if v == to {
                            let mut path = vec![v];
                            let mut cur = v;
                            while cur != from {
                                cur = prev[cur as usize];
                                path.push(cur);
                            }
                            path.reverse();
                            return Some(path);
                        }
                        next.push(v);
                    }
                }
            }
            frontier = next;
        }
        None
    }
}

fn lattice_points<const D: usize>(q: &DyadicCube<D>, refine: u8) -> Vec<[f64; D]> {
    let lo = q.lo();
    let s = q.side();
    match refine {
        0 => vec![q.center()],
        1 => {
            let mut pts = vec![q.center()];
            for mask in 0..(1u32 << D) {
                pts.push(q.corner(mask));
            }
            pts
        }
        _ => {
            // 3^d lattice at half-side steps; center first so that
            // nodes_of_cube(i)[0] is always the center
            let mut pts = vec![q.center()];
            let n = 3usize.pow(D as u32);
            for code in 0..n {
                let mut c = code;
                let p: [f64; D] = std::array::from_fn(|i| {
                    let k = c % 3;
                    c /= 3;
                    lo[i] + s * (k as f64) / 2.0
                });
                if p != q.center() {
                    pts.push(p);
                }
            }
            pts
        }
    }
}

/// One sampled pair in the chain/distance equivalence experiment.
#[derive(Debug, Clone)]
pub struct EquivRow<const D: usize> {
    pub x: [f64; D],
    pub y: [f64; D],
    pub qhdist: f64,
    pub chain_len: Option<usize>,
}

/// Sample random point pairs in Ξ ∩ window and record both the graph
/// quasihyperbolic distance and the BFS chain length.
pub fn chain_qhdist_equivalence_report<const D: usize, O: SetOracle<D> + ?Sized>(
    graph: &QhGraph<D>,
    oracle: &O,
    sample_pairs: usize,
    max_len: usize,
    tol: f64,
    rng: &mut impl rand::Rng,
) -> Vec<EquivRow<D>> {
    let w = &graph.whitney.window;
    let draw = |rng: &mut dyn rand::RngCore| -> Option<[f64; D]> {
        for _ in 0..200 {
            let p: [f64; D] = std::array::from_fn(|i| {
                rand::Rng::gen_range(&mut *rng, w.lo[i]..w.hi[i])
            });
            let df = oracle.dist_point(p);
            if df <= 10.0 * tol {
                continue;
            }
            if matches!(graph.whitney.locate(p, df, tol), CubeQuery::Cube(_)) {
                return Some(p);
            }
        }
        None
    };
    let mut rows = Vec::with_capacity(sample_pairs);
    for _ in 0..sample_pairs {
        let (Some(x), Some(y)) = (draw(rng), draw(rng)) else {
            continue;
        };
        let qd = graph
            .qhdist(oracle, x, y, tol)
            .expect("sampled points are resolvable");
        let chain = graph
            .intersecting_chain(oracle, x, y, max_len, tol)
            .expect("sampled points are resolvable");
        rows.push(EquivRow {
            x,
            y,
            qhdist: qd.value,
            chain_len: chain.map(|c| c.len()),
        });
    }
    rows
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::primitives::Primitive;
    use crate::geometry::SetDesc;
    use rand::{Rng, SeedableRng};

    fn line_graph(max_level: i32, refine: u8) -> (QhGraph<2>, SetDesc) {
        let desc = SetDesc::Analytic(vec![Primitive::HLine { y: 0.0 }]);
        let g = QhGraph::build(&desc, BoxRegion::symmetric(3), max_level, refine).unwrap();
        (g, desc)
    }

    #[test]
    fn halfplane_log_benchmark() {
        // qhdist((0,1),(0,t)) = ln t in R² ∖ {y=0}; the graph must be within
        // 3% at refine 2 (the corner-node column along x=0 realizes it)
        let (g, desc) = line_graph(7, 2);
        for t in [2.0f64, 4.0, 8.0] {
            let d = g.qhdist(&desc, [0.0, 1.0], [0.0, t], 1e-9).unwrap();
            let exact = t.ln();
            assert!(
                (d.value - exact).abs() <= 0.03 * exact,
                "t={t}: got {} want {exact}",
                d.value
            );
            assert!(d.value >= exact - 1e-6, "graph must stay an upper bound");
        }
    }

    #[test]
    fn empty_target_gives_zero() {
        let desc = SetDesc::Empty;
        let g = QhGraph::build(&desc, BoxRegion::symmetric(3), 6, 2).unwrap();
        let d = g.qhdist(&desc, [0.3, 0.4], [-1.0, 2.0], 1e-9).unwrap();
        assert_eq!(d.value, 0.0);
    }

    #[test]
    fn components_are_infinitely_far() {
        let (g, desc) = line_graph(6, 1);
        let d = g.qhdist(&desc, [0.0, 1.0], [0.0, -1.0], 1e-9).unwrap();
        assert!(d.value.is_infinite());
        assert!(d.windowed);
        let chain = g
            .intersecting_chain(&desc, [0.0, 1.0], [0.0, -1.0], 200, 1e-9)
            .unwrap();
        assert!(chain.is_none());
    }

    #[test]
    fn identical_points() {
        let (g, desc) = line_graph(6, 1);
        let d = g.qhdist(&desc, [0.5, 1.25], [0.5, 1.25], 1e-9).unwrap();
        assert!(d.value.abs() < 1e-12);
        let chain = g
            .intersecting_chain(&desc, [0.5, 1.25], [0.5, 1.25], 10, 1e-9)
            .unwrap()
            .unwrap();
        assert_eq!(chain.len(), 1);
    }

    #[test]
    fn point_on_gamma_rejected() {
        let (g, desc) = line_graph(6, 1);
        match g.qhdist(&desc, [0.25, 0.0], [0.0, 1.0], 1e-9) {
            Err(SobexError::PointOnGamma(_)) => {}
            other => panic!("expected PointOnGamma, got {other:?}"),
        }
    }

    #[test]
    fn refinement_is_monotone() {
        let desc = SetDesc::Analytic(vec![Primitive::HLine { y: 0.0 }]);
        let graphs: Vec<QhGraph<2>> = (0..=2)
            .map(|r| QhGraph::build(&desc, BoxRegion::symmetric(3), 6, r).unwrap())
            .collect();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(29);
        for _ in 0..10 {
            let x = [rng.gen_range(-7.0..7.0), rng.gen_range(0.1..7.0)];
            let y = [rng.gen_range(-7.0..7.0), rng.gen_range(0.1..7.0)];
            let ds: Vec<f64> = graphs
                .iter()
                .map(|g| g.qhdist(&desc, x, y, 1e-9).unwrap().value)
                .collect();
            assert!(ds[1] <= ds[0] + 1e-9, "refine 1 worse at {x:?},{y:?}");
            assert!(ds[2] <= ds[1] + 1e-9, "refine 2 worse at {x:?},{y:?}");
        }
    }

    #[test]
    fn chain_length_bounds_qhdist() {
        let (g, desc) = line_graph(6, 2);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(37);
        let rows = chain_qhdist_equivalence_report(&g, &desc, 60, 400, 1e-9, &mut rng);
        let mut finite = 0;
        for row in &rows {
            if let Some(m) = row.chain_len {
                finite += 1;
                assert!(
                    row.qhdist <= m as f64 + 0.01,
                    "qhdist {} > chain {m}",
                    row.qhdist
                );
            }
        }
        assert!(finite >= 10, "too few connectable pairs sampled");
    }

    #[test]
    fn graph_metric_triangle_inequality() {
        let (g, _desc) = line_graph(5, 1);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(43);
        for _ in 0..5 {
            let pick = |rng: &mut rand_chacha::ChaCha8Rng| {
                rng.gen_range(0..g.node_count()) as u32
            };
            let (u, v, w) = (pick(&mut rng), pick(&mut rng), pick(&mut rng));
            let du = g.dijkstra(&[(u, 0.0)], None);
            let dv = g.dijkstra(&[(v, 0.0)], None);
            let (a, b, c) = (du[w as usize], du[v as usize], dv[w as usize]);
            if b.is_finite() && c.is_finite() {
                assert!(a <= b + c + 1e-9, "triangle violated: {a} > {b} + {c}");
            }
        }
    }

    #[test]
    fn short_vertical_hop_matches_segment_integral() {
        // both points in one cube: the direct segment is optimal and its
        // quasihyperbolic length is log(y2/y1)
        let (g, desc) = line_graph(7, 2);
        let d = g.qhdist(&desc, [0.3, 1.1], [0.3, 1.4], 1e-9).unwrap();
        let exact = (1.4f64 / 1.1).ln();
        assert!((d.value - exact).abs() < 0.02 * exact + 1e-9);
    }
}
