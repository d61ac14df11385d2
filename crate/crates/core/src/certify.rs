//! Certification of the epsilon-delta geometry and the interior-cusp
//! counterexample experiments.
//!
//! The certifier is a falsifier plus estimator, not a prover: it samples
//! point pairs, searches for admissible connecting paths in Ξ = R² ∖ cl(Γ)
//! over the Whitney cube graph, and measures the best achievable constants
//! for the length condition (LC), the carrot condition (CC), and the
//! quasihyperbolic proximity condition (QHD), plus the component diameter
//! condition (DC) by flood fill. A pass means "no violation found at this
//! sampling"; failures carry concrete witness pairs.

use std::collections::{BinaryHeap, VecDeque};
use std::f64::consts::{FRAC_1_SQRT_2, TAU};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::geometry::{DomainSpec, SetOracle};
use crate::qhmetric::{qh_segment_length, QhGraph};
use crate::util::{add, dist, gauss_legendre, ls_slope, scale, smoothstep_poly, sub, TotalF64};
use crate::whitney::CubeQuery;
use crate::SobexError;

/// A concrete violating (or extremal) pair with the best path found for it.
#[derive(Debug, Clone)]
pub struct Witness {
    pub x: [f64; 2],
    pub y: [f64; 2],
    /// measured value of the quantity at this pair
    pub value: f64,
    /// polyline of the best admissible path (empty when none exists)
    pub path: Vec<[f64; 2]>,
}

#[derive(Debug, Clone)]
pub struct ConditionReport {
    pub name: &'static str,
    pub pass: bool,
    pub measured: f64,
    pub witness: Option<Witness>,
    pub note: String,
}

/// One measured pair.
#[derive(Debug, Clone)]
pub struct PairResult {
    pub x: [f64; 2],
    pub y: [f64; 2],
    /// separation stratum the pair was sampled at
    pub scale: f64,
    /// |x - y| / length of the best path (1 for a straight line)
    pub eps_lc: f64,
    /// half the max-min carrot ratio achieved over cube-center paths
    pub eps_cc: f64,
    /// max over path nodes of qhdist(node, Omega)
    pub k_path: f64,
    /// an admissible cube path exists at all
    pub connected: bool,
    pub path: Vec<[f64; 2]>,
}

/// Per separation scale aggregates (minima over that stratum's pairs).
#[derive(Debug, Clone)]
pub struct ScaleRow {
    pub scale: f64,
    pub pairs: usize,
    pub eps_lc: f64,
    pub eps_cc: f64,
    pub k: f64,
}

#[derive(Debug, Clone)]
pub struct AssumptionCertificate {
    pub domain: String,
    pub delta: f64,
    pub pair_count: usize,
    pub pairs_evaluated: usize,
    pub seed: u64,
    pub max_level: i32,
    pub lc: ConditionReport,
    pub cc: ConditionReport,
    pub qhd: ConditionReport,
    pub dc: ConditionReport,
    pub eps_meas: f64,
    pub k_meas: f64,
    pub lambda_meas: f64,
    pub scales: Vec<ScaleRow>,
    pub pass: bool,
    pub note: String,
}

impl AssumptionCertificate {
    /// Key-value dump for reports; order is stable.
    pub fn kv(&self) -> Vec<(&'static str, String)> {
        let mut out = vec![
            ("domain", self.domain.clone()),
            ("delta", format!("{}", self.delta)),
            ("pairs_requested", format!("{}", self.pair_count)),
            ("pairs_evaluated", format!("{}", self.pairs_evaluated)),
            ("seed", format!("{}", self.seed)),
            ("max_level", format!("{}", self.max_level)),
            ("eps_meas", format!("{:.6}", self.eps_meas)),
            ("k_meas", format!("{:.6}", self.k_meas)),
            ("lambda_meas", format!("{:.6}", self.lambda_meas)),
            ("verdict", if self.pass { "pass".into() } else { "fail".into() }),
            ("note", self.note.clone()),
        ];
        for c in [&self.lc, &self.cc, &self.qhd, &self.dc] {
            out.push((c.name, format!("{} ({:.6}) {}", if c.pass { "pass" } else { "FAIL" }, c.measured, c.note)));
        }
        out
    }
}

/// Dyadic separation scales, coarsest first. The floor keeps pairs clear of
/// the unresolved Whitney shell at the given maxLevel.
fn separation_scales(dom: &DomainSpec, delta: f64, max_level: i32) -> Vec<f64> {
    let min_side = dom.window.side(0).min(dom.window.side(1));
    let s0 = (delta / 2.0).min(min_side / 4.0);
    let floor = 32.0 * (-(max_level as f64)).exp2();
    let mut out = Vec::new();
    let mut s = s0;
    while s >= floor && out.len() < 8 {
        out.push(s);
        s /= 2.0;
    }
    out
}

/// Points where cl(Γ) and D come close: the interface the assumption
/// stresses. Grid scan of max(dist Γ, dist D) with local dedup.
fn junction_points(dom: &DomainSpec) -> Vec<[f64; 2]> {
    if dom.gamma.is_empty() || dom.dpart.is_empty() {
        return Vec::new();
    }
    let n = 65;
    let h = dom.window.side(0).max(dom.window.side(1)) / n as f64;
    let mut cands: Vec<([f64; 2], f64)> = Vec::new();
    for i in 0..n {
        for j in 0..n {
            let p = [
                dom.window.lo[0] + dom.window.side(0) * (i as f64 + 0.5) / n as f64,
                dom.window.lo[1] + dom.window.side(1) * (j as f64 + 0.5) / n as f64,
            ];
            let v = dom.gamma.dist_point(p).max(dom.dpart.dist_point(p));
            if v <= 1.5 * h {
                cands.push((p, v));
            }
        }
    }
    cands.sort_by(|a, b| a.1.total_cmp(&b.1));
    let mut out: Vec<[f64; 2]> = Vec::new();
    for (p, _) in cands {
        if out.iter().all(|o| dist(*o, p) > 8.0 * h) {
            out.push(p);
        }
    }
    out
}

/// Γ anchors at dyadic offsets around each junction: pairs across these
/// anchors probe exactly the zone where a cusp between D and Γ degrades
/// the achievable constants.
fn boundary_anchors(dom: &DomainSpec, junctions: &[[f64; 2]], s: f64) -> Vec<[f64; 2]> {
    if dom.gamma.is_empty() {
        return Vec::new();
    }
    let mut out: Vec<[f64; 2]> = Vec::new();
    let push = |g: [f64; 2], out: &mut Vec<[f64; 2]>| {
        if dom.window.contains(g) && out.iter().all(|o| dist(*o, g) > s / 8.0) {
            out.push(g);
        }
    };
    for &j in junctions {
        if let Some(g) = dom.gamma.nearest_point(j) {
            push(g, &mut out);
        }
        for i in -2..=4i32 {
            let d = s * (i as f64).exp2();
            for dir in [[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]] {
                if let Some(g) = dom.gamma.nearest_point(add(j, scale(dir, d))) {
                    push(g, &mut out);
                }
            }
        }
    }
    // plus a coarse spread over Γ away from junctions
    let n = 7;
    for i in 0..n {
        for j in 0..n {
            let w = [
                dom.window.lo[0] + dom.window.side(0) * (i as f64 + 0.5) / n as f64,
                dom.window.lo[1] + dom.window.side(1) * (j as f64 + 0.5) / n as f64,
            ];
            if let Some(g) = dom.gamma.nearest_point(w) {
                push(g, &mut out);
            }
        }
    }
    out
}

/// qhdist_Ξ(node, Ω) over all graph nodes: multi-source Dijkstra from the
/// nodes lying in Ω.
pub fn omega_field(dom: &DomainSpec, graph: &QhGraph<2>) -> Vec<f64> {
    let starts: Vec<(u32, f64)> = (0..graph.node_count() as u32)
        .filter(|&u| dom.inside(graph.nodes[u as usize]))
        .map(|u| (u, 0.0))
        .collect();
    graph.dijkstra(&starts, None)
}

/// Upper bound on qhdist_Ξ(z, Ω) using a precomputed Ω field: inject z into
/// its Whitney cube and take the best node. Zero when z lies in Ω.
pub fn qhdist_to_omega(
    dom: &DomainSpec,
    graph: &QhGraph<2>,
    field: &[f64],
    z: [f64; 2],
) -> Result<f64, SobexError> {
    if dom.inside(z) {
        return Ok(0.0);
    }
    if dom.gamma.is_empty() {
        return Ok(0.0);
    }
    let df = dom.gamma.dist_point(z);
    let cube = match graph.whitney.locate(z, df, 0.0) {
        CubeQuery::Cube(q) => q,
        CubeQuery::OnTarget => return Err(SobexError::PointOnGamma(z.to_vec())),
        CubeQuery::Unresolved => return Err(SobexError::Unresolved(z.to_vec())),
        CubeQuery::OutsideWindow => return Err(SobexError::OutsideWindow(z.to_vec())),
    };
    let ci = graph.whitney.index_of(&cube).expect("located cube is stored");
    let dist_f = |p: [f64; 2]| dom.gamma.dist_point(p);
    let floor = cube.diam() / 8.0;
    let mut best = f64::INFINITY;
    for &u in graph.nodes_of_cube(ci) {
        let inj = qh_segment_length(&dist_f, z, graph.nodes[u as usize], floor);
        best = best.min(field[u as usize] + inj);
    }
    Ok(best)
}

struct PairEngine<'a> {
    dom: &'a DomainSpec,
    graph: &'a QhGraph<2>,
    /// dist(center, cl Γ) per cube
    dist_g: Vec<f64>,
    /// qhdist(node, Ω) per graph node
    field: Vec<f64>,
}

impl<'a> PairEngine<'a> {
    fn new(dom: &'a DomainSpec, graph: &'a QhGraph<2>) -> Self {
        let dist_g = graph
            .whitney
            .cubes
            .iter()
            .map(|q| dom.gamma.dist_point(q.center()))
            .collect();
        let field = omega_field(dom, graph);
        PairEngine { dom, graph, dist_g, field }
    }

    fn locate(&self, p: [f64; 2]) -> Option<u32> {
        let df = self.dom.gamma.dist_point(p);
        match self.graph.whitney.locate(p, df, 0.0) {
            CubeQuery::Cube(q) => self.graph.whitney.index_of(&q),
            _ => None,
        }
    }

    /// carrot cap |x-z||y-z|/|x-y| at cube center `c`.
    fn cap(&self, x: [f64; 2], y: [f64; 2], c: [f64; 2]) -> f64 {
        dist(x, c) * dist(y, c) / dist(x, y)
    }

    /// BFS feasibility: a cube path from cx to cy through cubes whose center
    /// satisfies dist(center, Γ) ≥ eps * cap(center). Endpoint cubes are
    /// always admissible (the carrot pinches off at the endpoints).
    fn feasible(&self, x: [f64; 2], y: [f64; 2], cx: u32, cy: u32, eps: f64) -> bool {
        let n = self.graph.whitney.len();
        let mut seen = vec![false; n];
        let mut queue = VecDeque::new();
        seen[cx as usize] = true;
        queue.push_back(cx);
        while let Some(u) = queue.pop_front() {
            if u == cy {
                return true;
            }
            for &v in self.graph.whitney.intersecting(u) {
                if seen[v as usize] {
                    continue;
                }
                let ok = v == cx
                    || v == cy
                    || self.dist_g[v as usize]
                        >= eps * self.cap(x, y, self.graph.whitney.cubes[v as usize].center());
                if ok {
                    seen[v as usize] = true;
                    queue.push_back(v);
                }
            }
        }
        false
    }

    /// Among eps-feasible cubes, the path minimizing (max qhdist-to-Ω along
    /// the path, then Euclidean length): lexicographic bottleneck Dijkstra.
    fn best_path(&self, x: [f64; 2], y: [f64; 2], cx: u32, cy: u32, eps: f64) -> Vec<u32> {
        let n = self.graph.whitney.len();
        let node_k = |c: u32| self.field[self.graph.nodes_of_cube(c)[0] as usize];
        let center = |c: u32| self.graph.whitney.cubes[c as usize].center();
        let mut best: Vec<(f64, f64)> = vec![(f64::INFINITY, f64::INFINITY); n];
        let mut prev: Vec<u32> = vec![u32::MAX; n];
        let mut heap: BinaryHeap<std::cmp::Reverse<(TotalF64, TotalF64, u32)>> = BinaryHeap::new();
        let start = (node_k(cx), dist(x, center(cx)));
        best[cx as usize] = start;
        heap.push(std::cmp::Reverse((TotalF64(start.0), TotalF64(start.1), cx)));
        while let Some(std::cmp::Reverse((TotalF64(k), TotalF64(l), u))) = heap.pop() {
            if (k, l) > best[u as usize] {
                continue;
            }
            if u == cy {
                break;
            }
            for &v in self.graph.whitney.intersecting(u) {
                let ok = v == cx
                    || v == cy
                    || self.dist_g[v as usize] >= eps * self.cap(x, y, center(v));
                if !ok {
                    continue;
                }
                let cand = (k.max(node_k(v)), l + dist(center(u), center(v)));
                if cand < best[v as usize] {
                    best[v as usize] = cand;
                    prev[v as usize] = u;
                    heap.push(std::cmp::Reverse((TotalF64(cand.0), TotalF64(cand.1), v)));
                }
            }
        }
        if best[cy as usize].0.is_infinite() && cx != cy {
            return Vec::new();
        }
        let mut path = vec![cy];
        let mut cur = cy;
        while cur != cx {
            cur = prev[cur as usize];
            if cur == u32::MAX {
                return Vec::new();
            }
            path.push(cur);
        }
        path.reverse();
        path
    }

    fn eval(&self, x: [f64; 2], y: [f64; 2], s: f64) -> Option<PairResult> {
        // pure Dirichlet: straight lines, all conditions void or trivially 1
        if self.dom.gamma.is_empty() {
            return Some(PairResult {
                x,
                y,
                scale: s,
                eps_lc: 1.0,
                eps_cc: 1.0,
                k_path: 0.0,
                connected: true,
                path: vec![x, y],
            });
        }
        let cx = self.locate(x)?;
        let cy = self.locate(y)?;
        if cx == cy {
            // straight segment within one Whitney cube
            let mid = [0.5 * (x[0] + y[0]), 0.5 * (x[1] + y[1])];
            let ratio = self.dom.gamma.dist_point(mid) / self.cap(x, y, mid).max(1e-300);
            let k = self.field[self.graph.nodes_of_cube(cx)[0] as usize];
            return Some(PairResult {
                x,
                y,
                scale: s,
                eps_lc: 1.0,
                eps_cc: (ratio / 2.0).min(1.0),
                k_path: if self.dom.inside(mid) { 0.0 } else { k },
                connected: true,
                path: vec![x, y],
            });
        }
        if !self.feasible(x, y, cx, cy, 0.0) {
            return Some(PairResult {
                x,
                y,
                scale: s,
                eps_lc: 0.0,
                eps_cc: 0.0,
                k_path: f64::INFINITY,
                connected: false,
                path: Vec::new(),
            });
        }
        // max-min carrot level by bisection
        let mut lo = 0.0;
        let mut hi = 1.0;
        if self.feasible(x, y, cx, cy, 1.0) {
            lo = 1.0;
        } else {
            for _ in 0..15 {
                let mid = 0.5 * (lo + hi);
                if self.feasible(x, y, cx, cy, mid) {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
        }
        let cubes = self.best_path(x, y, cx, cy, lo);
        let mut poly = Vec::with_capacity(cubes.len() + 2);
        poly.push(x);
        for &c in &cubes {
            poly.push(self.graph.whitney.cubes[c as usize].center());
        }
        poly.push(y);
        let length: f64 = poly.windows(2).map(|w| dist(w[0], w[1])).sum();
        let k_path = cubes
            .iter()
            .map(|&c| self.field[self.graph.nodes_of_cube(c)[0] as usize])
            .fold(0.0f64, f64::max);
        Some(PairResult {
            x,
            y,
            scale: s,
            eps_lc: (dist(x, y) / length).min(1.0),
            eps_cc: (lo / 2.0).min(1.0),
            k_path,
            connected: true,
            path: poly,
        })
    }
}

/// Flood-fill component labeling of Ω at grid resolution; returns
/// (lambda_meas, note, pass-against-claims) for the diameter condition.
fn diameter_condition(dom: &DomainSpec, delta: f64) -> (f64, String, bool) {
    let n = 96usize;
    let hx = dom.window.side(0) / n as f64;
    let hy = dom.window.side(1) / n as f64;
    let center = |i: usize, j: usize| {
        [
            dom.window.lo[0] + (i as f64 + 0.5) * hx,
            dom.window.lo[1] + (j as f64 + 0.5) * hy,
        ]
    };
    let mut label = vec![usize::MAX; n * n];
    let inside: Vec<bool> = (0..n * n)
        .map(|id| dom.inside(center(id % n, id / n)))
        .collect();
    let mut comps: Vec<(usize, [f64; 2], [f64; 2], bool, bool)> = Vec::new(); // (cells, lo, hi, meets_gamma, touches_edge)
    let gamma_empty = dom.gamma.is_empty();
    for start in 0..n * n {
        if !inside[start] || label[start] != usize::MAX {
            continue;
        }
        let id = comps.len();
        let mut lo = [f64::INFINITY; 2];
        let mut hi = [f64::NEG_INFINITY; 2];
        let mut meets = false;
        let mut edge = false;
        let mut cells = 0usize;
        let mut queue = VecDeque::new();
        label[start] = id;
        queue.push_back(start);
        while let Some(u) = queue.pop_front() {
            cells += 1;
            let (i, j) = (u % n, u / n);
            let c = center(i, j);
            for a in 0..2 {
                lo[a] = lo[a].min(c[a]);
                hi[a] = hi[a].max(c[a]);
            }
            if i == 0 || j == 0 || i == n - 1 || j == n - 1 {
                edge = true;
            }
            if !gamma_empty && dom.gamma.dist_point(c) <= 1.5 * hx.max(hy) {
                meets = true;
            }
            let mut push = |v: usize| {
                if inside[v] && label[v] == usize::MAX {
                    label[v] = id;
                    queue.push_back(v);
                }
            };
            if i > 0 {
                push(u - 1);
            }
            if i + 1 < n {
                push(u + 1);
            }
            if j > 0 {
                push(u - n);
            }
            if j + 1 < n {
                push(u + n);
            }
        }
        comps.push((cells, lo, hi, meets, edge));
    }
    let delta_eff = delta.min(dom.window.side(0).min(dom.window.side(1)));
    let mut lambda = f64::INFINITY;
    let mut any_meets = false;
    let mut truncated = false;
    for &(_, lo, hi, meets, edge) in &comps {
        if !meets {
            continue;
        }
        any_meets = true;
        let diam = (hi[0] - lo[0]).max(hi[1] - lo[1]) + hx.max(hy);
        lambda = lambda.min(diam / delta_eff);
        if edge {
            truncated = true;
        }
    }
    if !any_meets {
        return (
            f64::INFINITY,
            "void: no component meets Gamma".into(),
            true,
        );
    }
    let mut note = format!("{} component(s), min diam ratio {:.4}", comps.len(), lambda);
    if truncated {
        note.push_str(" (window-truncated lower bound)");
    }
    let pass = match &dom.claimed {
        Some(c) => lambda >= c.lambda / 2.0 || truncated,
        None => lambda > 1e-3,
    };
    (lambda, note, pass)
}

/// Fit ln(value) against ln(scale) over populated strata; returns
/// (least-squares slope, finest/coarsest ratio).
fn drift(scales: &[ScaleRow], pick: impl Fn(&ScaleRow) -> f64) -> Option<(f64, f64)> {
    let pts: Vec<(f64, f64)> = scales
        .iter()
        .filter(|r| r.pairs > 0)
        .map(|r| (r.scale, pick(r)))
        .filter(|&(_, v)| v.is_finite() && v > 0.0)
        .collect();
    if pts.len() < 3 {
        return None;
    }
    let xs: Vec<f64> = pts.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = pts.iter().map(|p| p.1.ln()).collect();
    let slope = ls_slope(&xs, &ys);
    let ratio = pts.last().unwrap().1 / pts[0].1;
    Some((slope, ratio))
}

/// Decay threshold for the scale-drift detector: a fitted slope at least
/// this steep together with a finest/coarsest drop below `DRIFT_RATIO`
/// counts as systematic decay toward zero.
const DRIFT_SLOPE: f64 = 0.3;
const DRIFT_RATIO: f64 = 0.45;
/// Absolute floor below which a measured constant counts as vanished.
const EPS_FLOOR: f64 = 1e-3;

pub fn check_assumption(
    dom: &DomainSpec,
    delta: f64,
    pair_count: usize,
    seed: u64,
    max_level: i32,
) -> Result<AssumptionCertificate, SobexError> {
    let graph = QhGraph::build(&dom.gamma, dom.window, max_level, 2)?;
    let engine = PairEngine::new(dom, &graph);
    let scales = separation_scales(dom, delta, max_level);
    let junctions = junction_points(dom);
    let shell_gap = 8.0 * (-(max_level as f64)).exp2();
    let gamma_empty = dom.gamma.is_empty();
    let ok_point = |p: [f64; 2]| {
        dom.window.contains(p)
            && dom.inside(p)
            && (gamma_empty || dom.gamma.dist_point(p) >= shell_gap)
    };

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pairs: Vec<(usize, [f64; 2], [f64; 2])> = Vec::new();
    for (si, &s) in scales.iter().enumerate() {
        let anchors = boundary_anchors(dom, &junctions, s);
        for &g in &anchors {
            for d in [
                [1.0, 0.0],
                [0.0, 1.0],
                [FRAC_1_SQRT_2, FRAC_1_SQRT_2],
                [-FRAC_1_SQRT_2, FRAC_1_SQRT_2],
            ] {
                let x = add(g, scale(d, s));
                let y = sub(g, scale(d, s));
                if ok_point(x) && ok_point(y) {
                    pairs.push((si, x, y));
                }
            }
            // asymmetric straddlers: a point hugging Γ paired with the first
            // admissible point reached by walking through the boundary
            // interface on the opposite side; these are the pairs whose
            // Euclidean gap can shrink much faster than the Ξ-detour around
            // a Γ tip
            let near = (s / 8.0).max(1.25 * shell_gap);
            for d in [[0.0, 1.0], [0.0, -1.0], [1.0, 0.0], [-1.0, 0.0]] {
                let x = add(g, scale(d, near));
                if !ok_point(x) {
                    continue;
                }
                let mut beta = near;
                while beta <= 4.0 * s {
                    let y = sub(g, scale(d, beta));
                    if ok_point(y) {
                        let sep = dist(x, y);
                        if sep >= s / 2.0 && sep <= 2.0 * s {
                            pairs.push((si, x, y));
                        }
                        break;
                    }
                    beta *= 1.3;
                }
            }
        }
        let budget = (pair_count / scales.len()).max(4);
        let mut got = 0usize;
        let mut attempts = 0usize;
        while got < budget && attempts < 400 * budget {
            attempts += 1;
            let x = [
                rng.gen_range(dom.window.lo[0]..dom.window.hi[0]),
                rng.gen_range(dom.window.lo[1]..dom.window.hi[1]),
            ];
            if !ok_point(x) {
                continue;
            }
            if !gamma_empty && dom.gamma.dist_point(x) > 4.0 * s {
                continue;
            }
            let th = rng.gen_range(0.0..TAU);
            let y = [x[0] + s * th.cos(), x[1] + s * th.sin()];
            if !ok_point(y) {
                continue;
            }
            pairs.push((si, x, y));
            got += 1;
        }
    }

    let mut results: Vec<PairResult> = Vec::new();
    for &(si, x, y) in &pairs {
        if let Some(r) = engine.eval(x, y, scales[si]) {
            results.push(r);
        }
    }

    let mut scale_rows: Vec<ScaleRow> = scales
        .iter()
        .map(|&s| ScaleRow {
            scale: s,
            pairs: 0,
            eps_lc: f64::INFINITY,
            eps_cc: f64::INFINITY,
            k: 0.0,
        })
        .collect();
    for r in &results {
        let row = scale_rows
            .iter_mut()
            .find(|q| q.scale == r.scale)
            .expect("stratum exists");
        row.pairs += 1;
        row.eps_lc = row.eps_lc.min(r.eps_lc);
        row.eps_cc = row.eps_cc.min(r.eps_cc);
        row.k = row.k.max(r.k_path);
    }

    let argmin = |pick: &dyn Fn(&PairResult) -> f64| -> Option<&PairResult> {
        results
            .iter()
            .min_by(|a, b| pick(a).total_cmp(&pick(b)))
    };
    let witness_from = |r: &PairResult, v: f64| Witness {
        x: r.x,
        y: r.y,
        value: v,
        path: r.path.clone(),
    };

    let eps_lc_min = results.iter().map(|r| r.eps_lc).fold(f64::INFINITY, f64::min);
    let eps_cc_min = results.iter().map(|r| r.eps_cc).fold(f64::INFINITY, f64::min);
    let eps_meas = eps_lc_min.min(eps_cc_min).min(1.0);
    let k_meas = results.iter().map(|r| r.k_path).fold(0.0f64, f64::max);
    let disconnected: Option<&PairResult> = results.iter().find(|r| !r.connected);

    // (LC) and (CC): claimed-parameter violation (slack 2), absolute floor,
    // or systematic decay across separation scales.
    let lc_cc_report = |name: &'static str, min_v: f64, pick: &dyn Fn(&ScaleRow) -> f64, pickp: &dyn Fn(&PairResult) -> f64| {
        let mut pass = true;
        let mut note = String::new();
        if let Some(c) = &dom.claimed {
            if min_v < c.eps / 2.0 {
                pass = false;
                note = format!("measured {:.5} below claimed eps {} / 2", min_v, c.eps);
            }
        }
        if pass && min_v < EPS_FLOOR {
            pass = false;
            note = format!("measured {:.2e} below floor {:.0e}", min_v, EPS_FLOOR);
        }
        if pass {
            if let Some((slope, ratio)) = drift(&scale_rows, pick) {
                if slope >= DRIFT_SLOPE && ratio <= DRIFT_RATIO {
                    pass = false;
                    note = format!(
                        "decays with separation scale: slope {:.2}, finest/coarsest {:.3}",
                        slope, ratio
                    );
                }
            }
        }
        if pass && note.is_empty() {
            note = "no violation found at this sampling".into();
        }
        let witness = if pass {
            None
        } else {
            argmin(pickp).map(|r| witness_from(r, pickp(r)))
        };
        ConditionReport { name, pass, measured: min_v, witness, note }
    };
    let lc = lc_cc_report("LC", eps_lc_min.min(1.0), &|r| r.eps_lc, &|r| r.eps_lc);
    let cc = lc_cc_report("CC", eps_cc_min.min(1.0), &|r| r.eps_cc, &|r| r.eps_cc);

    let qhd = {
        let mut pass = true;
        let mut note = String::new();
        let mut witness = None;
        if let Some(r) = disconnected {
            pass = false;
            note = "pair not connectable inside Xi (disconnection across cl Gamma)".into();
            witness = Some(witness_from(r, f64::INFINITY));
        } else if let Some(c) = &dom.claimed {
            if k_meas > 2.0 * c.qh_bound + 0.5 {
                pass = false;
                note = format!("measured K {:.3} above claimed bound {} x 2", k_meas, c.qh_bound);
                witness = results
                    .iter()
                    .max_by(|a, b| a.k_path.total_cmp(&b.k_path))
                    .map(|r| witness_from(r, r.k_path));
            }
        }
        if pass {
            if let Some((slope, ratio)) = drift(&scale_rows, |r| r.k) {
                if slope <= -DRIFT_SLOPE && ratio >= 1.0 / DRIFT_RATIO {
                    pass = false;
                    note = format!(
                        "K grows as scales shrink: slope {:.2}, finest/coarsest {:.3}",
                        slope, ratio
                    );
                    witness = results
                        .iter()
                        .max_by(|a, b| a.k_path.total_cmp(&b.k_path))
                        .map(|r| witness_from(r, r.k_path));
                }
            }
        }
        if pass && note.is_empty() {
            note = "no violation found at this sampling".into();
        }
        ConditionReport { name: "QHD", pass, measured: k_meas, witness, note }
    };

    let (lambda_meas, dc_note, dc_pass) = diameter_condition(dom, delta);
    let dc = ConditionReport {
        name: "DC",
        pass: dc_pass,
        measured: lambda_meas,
        witness: None,
        note: dc_note,
    };

    let pass = lc.pass && cc.pass && qhd.pass && dc.pass;
    let note = if pass {
        "no violation found at this sampling (a pass is not a proof)".into()
    } else {
        let mut failing: Vec<&str> = Vec::new();
        for c in [&lc, &cc, &qhd, &dc] {
            if !c.pass {
                failing.push(c.name);
            }
        }
        format!("violated: {}", failing.join(", "))
    };

    Ok(AssumptionCertificate {
        domain: dom.name.clone(),
        delta,
        pair_count,
        pairs_evaluated: results.len(),
        seed,
        max_level,
        lc,
        cc,
        qhd,
        dc,
        eps_meas,
        k_meas,
        lambda_meas,
        scales: scale_rows,
        pass,
        note,
    })
}

/// One row of a blow-up experiment table.
#[derive(Debug, Clone)]
pub struct BlowupRow {
    pub r: f64,
    /// ∥f_r∥^p over the domain (tensor quadrature on the support)
    pub fnorm_p: f64,
    /// the predicted scale factor r² + r^{2−p}
    pub scale_factor: f64,
    /// operator-norm lower bound from the trace argument
    pub lower_bound: f64,
}

/// W^{1,p} norm (to the p-th power) of the tensor cutoff f_r supported in
/// [r/2, 2r] x [0, r], identically 1 on [3r/4, 3r/2] x [0, r/2], built from
/// C² quintic ramps, so that |∇f_r| ≤ 7.5 / r.
fn fr_norm_p(r: f64, p: f64) -> f64 {
    let s = smoothstep_poly(2);
    let sd = s.derivative();
    let (nodes, weights) = gauss_legendre(40);
    let unit = |f: &dyn Fn(f64) -> f64| -> f64 {
        nodes
            .iter()
            .zip(&weights)
            .map(|(&u, &w)| w * 0.5 * f(0.5 * (u + 1.0)))
            .sum()
    };
    let j0 = unit(&|t| s.eval(t).powf(p));
    let j1 = unit(&|t| sd.eval(t).abs().powf(p));
    // a: up-ramp width r/4, plateau 3r/4, down-ramp width r/2
    let ia0 = (r / 4.0) * j0 + 0.75 * r + (r / 2.0) * j0;
    let ia1 = (4.0 / r).powf(p) * (r / 4.0) * j1 + (2.0 / r).powf(p) * (r / 2.0) * j1;
    // b: plateau r/2, down-ramp width r/2
    let ib0 = 0.5 * r + (r / 2.0) * j0;
    let ib1 = (2.0 / r).powf(p) * (r / 2.0) * j1;
    ia0 * ib0 + ia1 * ib0 + ia0 * ib1
}

/// Blow-up experiment for the interior boundary cusp at the origin: the
/// domain is the plane minus the wedge {x ≥ 0, −x^α ≤ y ≤ 0}. Any bounded
/// extension operator must have norm at least `lower_bound` at each radius,
/// and for α > 1 that bound diverges as r → 0.
pub fn cusp_blowup_experiment(alpha: f64, p: f64, radii: &[f64]) -> Vec<BlowupRow> {
    assert!(alpha >= 1.0 && p > 1.0, "alpha >= 1 and p in (1, inf)");
    let pprime = p / (p - 1.0);
    radii
        .iter()
        .map(|&r| {
            let fnorm_p = fr_norm_p(r, p);
            let lower_bound = (0.75 * r) / (r.powf((alpha + 1.0) / pprime) * fnorm_p.powf(1.0 / p));
            BlowupRow {
                r,
                fnorm_p,
                scale_factor: r * r + r.powf(2.0 - p),
                lower_bound,
            }
        })
        .collect()
}

/// Blow-up experiment for the cusp at infinity: Γ is the full line y = 0 and
/// D the curve y = −x^{−α}; the trace strip between them over
/// [3R/4, 3R/2] has measure ~ R^{1−α}, and the lower bound grows with the
/// window size R whenever αp > α + 1.
pub fn cusp_at_infinity_blowup(alpha: f64, p: f64, sizes: &[f64]) -> Vec<BlowupRow> {
    assert!(alpha > 0.0 && p > 1.0, "alpha > 0 and p in (1, inf)");
    let pprime = p / (p - 1.0);
    sizes
        .iter()
        .map(|&r| {
            let fnorm_p = fr_norm_p(r, p);
            let strip = if (alpha - 1.0).abs() < 1e-12 {
                2.0f64.ln()
            } else {
                ((1.5 * r).powf(1.0 - alpha) - (0.75 * r).powf(1.0 - alpha)) / (1.0 - alpha)
            };
            let lower_bound = (0.75 * r) / (strip.powf(1.0 / pprime) * fnorm_p.powf(1.0 / p));
            BlowupRow {
                r,
                fnorm_p,
                scale_factor: r * r + r.powf(2.0 - p),
                lower_bound,
            }
        })
        .collect()
}

/// Least-squares log-log slope of the lower bound against r.
pub fn blowup_slope(rows: &[BlowupRow]) -> f64 {
    let xs: Vec<f64> = rows.iter().map(|r| r.r.ln()).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.lower_bound.ln()).collect();
    ls_slope(&xs, &ys)
}

/// Max/min of the measured-to-predicted norm ratio across the rows.
pub fn blowup_envelope(rows: &[BlowupRow]) -> f64 {
    let ratios: Vec<f64> = rows.iter().map(|r| r.fnorm_p / r.scale_factor).collect();
    let lo = ratios.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = ratios.iter().cloned().fold(0.0f64, f64::max);
    hi / lo
}
