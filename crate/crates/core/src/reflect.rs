//! Cube families and the reflection map.
//!
//! Starting from two Whitney decompositions — `wext` of the closure of the
//! domain and `wgam` of the closed Gamma part — this module classifies cubes
//! into the interior family `Wi` (Whitney cubes of Gamma that meet the
//! domain) and the exterior family `We` (Whitney cubes of the domain closure
//! that are small and much closer to Gamma than to the Dirichlet part),
//! builds the reflection map `We -> Wi`, and assembles the connecting chain
//! families used by the extension operator: touching chains between
//! reflections of intersecting `We` cubes, and chains that carry a reflected
//! cube back to the vicinity of its source for the Poincare-type estimate.
//!
//! Every geometric failure (a cube with no admissible reflection, a pair
//! with no admissible chain) is collected as data in the certificate rather
//! than aborting the pipeline.

use std::collections::HashMap;

use crate::cube::DyadicCube;
use crate::geometry::{DomainSpec, SetOracle};
use crate::whitney::{decompose, WhitneyDecomposition};
use crate::SobexError;

/// How the family parameters were chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamMode {
    /// Tight constants suitable for numerical work.
    Empirical,
    /// Conservative constants from the boundedness proof, driven by the
    /// claimed chain-to-distance ratio lambda.
    Strict,
}

impl ParamMode {
    pub fn label(&self) -> &'static str {
        match self {
            ParamMode::Empirical => "empirical",
            ParamMode::Strict => "strict",
        }
    }
}

/// Parameters (A, B) for the exterior family: a cube Q of the exterior
/// decomposition belongs to `We` when `diam(Q) <= A * delta` and
/// `dist(Q, Gamma) < B * dist(Q, D)`.
#[derive(Debug, Clone, Copy)]
pub struct ReflectParams {
    pub a: f64,
    pub b: f64,
    pub mode: ParamMode,
}

impl ReflectParams {
    /// Tight defaults: A = 1/16, B = 8.
    pub fn empirical() -> Self {
        ReflectParams { a: 1.0 / 16.0, b: 8.0, mode: ParamMode::Empirical }
    }

    /// Proof-driven constants: B = max(720, 3/lambda), A = 1/B.
    pub fn strict(lambda: f64) -> Self {
        let b = 720f64.max(3.0 / lambda);
        ReflectParams { a: 1.0 / b, b, mode: ParamMode::Strict }
    }
}

impl Default for ReflectParams {
    fn default() -> Self {
        ReflectParams::empirical()
    }
}

/// Cube families over a fixed pair of decompositions.
///
/// Indices in `wi` refer to cubes of the Gamma decomposition; indices in
/// `we` refer to cubes of the exterior (domain-closure) decomposition.
#[derive(Debug, Clone)]
pub struct Classification {
    pub params: ReflectParams,
    /// Localization scale delta of the domain (infinite when unclaimed).
    pub delta: f64,
    pub wi: Vec<u32>,
    pub we: Vec<u32>,
    wi_mask: Vec<bool>,
    we_mask: Vec<bool>,
}

impl Classification {
    pub fn is_wi(&self, gamma_idx: u32) -> bool {
        self.wi_mask.get(gamma_idx as usize).copied().unwrap_or(false)
    }

    pub fn is_we(&self, ext_idx: u32) -> bool {
        self.we_mask.get(ext_idx as usize).copied().unwrap_or(false)
    }
}

/// Conservative test for "Q meets the open domain": probe the center and the
/// corners, and on a miss probe one level of children the same way. A cube
/// whose probes all land outside is treated as not meeting the domain.
fn cube_meets_omega(dom: &DomainSpec, q: &DyadicCube<2>) -> bool {
    let probe = |c: &DyadicCube<2>| -> bool {
        if dom.inside(c.center()) {
            return true;
        }
        for mask in 0..(1u32 << 2) {
            if dom.inside(c.corner(mask)) {
                return true;
            }
        }
        false
    };
    if probe(q) {
        return true;
    }
    q.children().iter().any(probe)
}

/// Classify cubes of both decompositions into `Wi` and `We`.
pub fn classify(
    dom: &DomainSpec,
    wext: &WhitneyDecomposition<2>,
    wgam: &WhitneyDecomposition<2>,
    params: ReflectParams,
) -> Classification {
    let mut wi_mask = vec![false; wgam.len()];
    let mut wi = Vec::new();
    for (i, q) in wgam.cubes.iter().enumerate() {
        if cube_meets_omega(dom, q) {
            wi_mask[i] = true;
            wi.push(i as u32);
        }
    }

    let delta = dom.delta();
    let diam_cap = params.a * delta;
    let mut we_mask = vec![false; wext.len()];
    let mut we = Vec::new();
    for (i, q) in wext.cubes.iter().enumerate() {
        if q.diam() > diam_cap {
            continue;
        }
        let dg = dom.gamma.box_dist(q.lo(), q.hi()).lower;
        let dd = dom.dpart.box_dist(q.lo(), q.hi()).lower;
        // dg = inf (empty Gamma) never qualifies; dd = inf (empty D) always does.
        if dg < params.b * dd {
            we_mask[i] = true;
            we.push(i as u32);
        }
    }

    Classification { params, delta, wi, we, wi_mask, we_mask }
}

/// A cube for which some pipeline step found no admissible partner.
#[derive(Debug, Clone)]
pub struct ReflectFailure {
    pub cube: DyadicCube<2>,
    pub reason: String,
}

/// The reflection map `We -> Wi` together with its measured constants.
#[derive(Debug, Clone)]
pub struct Reflection {
    /// Exterior-decomposition index of a `We` cube -> Gamma-decomposition
    /// index of its reflected cube.
    pub map: HashMap<u32, u32>,
    /// max over pairs of diam(Q*) / diam(Q).
    pub c_diam_max: f64,
    /// max over pairs of dist(Q*, Q) / diam(Q).
    pub c_dist_max: f64,
    /// Maximum number of `We` cubes sharing a single reflected cube.
    pub c_pre: u32,
    pub failures: Vec<ReflectFailure>,
}

impl Reflection {
    /// Single bound covering both measured reflection ratios.
    pub fn c_refl(&self) -> f64 {
        self.c_diam_max.max(self.c_dist_max)
    }
}

/// Search radius multipliers, in units of diam(Q): start at 8 and double.
const SEARCH_RADII: [f64; 5] = [8.0, 16.0, 32.0, 64.0, 128.0];

/// Find the reflected cube for one `We` cube: the nearest `Wi` cube with
/// `diam >= diam(Q)`, searching within growing radii. Ties are broken by
/// larger diameter, then lexicographically smallest anchor.
pub fn reflect_cube(
    wgam: &WhitneyDecomposition<2>,
    class: &Classification,
    q: &DyadicCube<2>,
) -> Option<u32> {
    let levels = wgam.levels();
    let diam = q.diam();
    for radius_mult in SEARCH_RADII {
        let r = radius_mult * diam;
        // Best candidate as (dist, level, anchor, index); smaller level means
        // larger diameter, so tuple order realizes the tie-break.
        let mut best: Option<(f64, i32, [i64; 2], u32)> = None;
        for &lvl in &levels {
            if lvl > q.level {
                break; // finer cubes have diam < diam(Q)
            }
            let s = (2f64).powi(-lvl);
            let ax_lo = ((q.lo()[0] - r) / s).floor() as i64;
            let ax_hi = ((q.hi()[0] + r) / s).floor() as i64;
            let ay_lo = ((q.lo()[1] - r) / s).floor() as i64;
            let ay_hi = ((q.hi()[1] + r) / s).floor() as i64;
            for ax in ax_lo..=ax_hi {
                for ay in ay_lo..=ay_hi {
                    let idx = match wgam.lookup(lvl, [ax, ay]) {
                        Some(i) => i,
                        None => continue,
                    };
                    if !class.is_wi(idx) {
                        continue;
                    }
                    let cand = &wgam.cubes[idx as usize];
                    let d = q.dist_to_cube(cand);
                    if d > r {
                        continue;
                    }
                    let key = (d, lvl, cand.anchor, idx);
                    let better = match &best {
                        None => true,
                        Some((bd, bl, ba, _)) => {
                            (key.0, key.1, key.2) < (*bd, *bl, *ba)
                        }
                    };
                    if better {
                        best = Some(key);
                    }
                }
            }
        }
        if let Some((_, _, _, idx)) = best {
            return Some(idx);
        }
    }
    None
}

/// Build the full reflection map over `We`.
pub fn build_reflection(
    wext: &WhitneyDecomposition<2>,
    wgam: &WhitneyDecomposition<2>,
    class: &Classification,
) -> Reflection {
    let mut map = HashMap::new();
    let mut c_diam_max: f64 = 0.0;
    let mut c_dist_max: f64 = 0.0;
    let mut failures = Vec::new();
    for &j in &class.we {
        let q = &wext.cubes[j as usize];
        match reflect_cube(wgam, class, q) {
            Some(t) => {
                let r = &wgam.cubes[t as usize];
                c_diam_max = c_diam_max.max(r.diam() / q.diam());
                c_dist_max = c_dist_max.max(q.dist_to_cube(r) / q.diam());
                map.insert(j, t);
            }
            None => failures.push(ReflectFailure {
                cube: q.clone(),
                reason: "no admissible reflected cube within search radius".into(),
            }),
        }
    }
    let mut preimages: HashMap<u32, u32> = HashMap::new();
    for t in map.values() {
        *preimages.entry(*t).or_insert(0) += 1;
    }
    let c_pre = preimages.values().copied().max().unwrap_or(0);
    Reflection { map, c_diam_max, c_dist_max, c_pre, failures }
}

/// Breadth-first search over the touching graph of the Gamma decomposition,
/// restricted to cubes whose diameter lies in `[band_lo, band_hi]`.
/// `targets` decides when a cube completes the chain.
fn touching_bfs(
    wgam: &WhitneyDecomposition<2>,
    start: u32,
    band_lo: f64,
    band_hi: f64,
    max_len: usize,
    mut is_target: impl FnMut(u32) -> bool,
) -> Option<Vec<u32>> {
    let in_band = |i: u32| -> bool {
        let d = wgam.cubes[i as usize].diam();
        d >= band_lo && d <= band_hi
    };
    if !in_band(start) {
        return None;
    }
    if is_target(start) {
        return Some(vec![start]);
    }
    let mut prev: HashMap<u32, u32> = HashMap::new();
    let mut depth: HashMap<u32, usize> = HashMap::new();
    depth.insert(start, 1);
    let mut frontier = vec![start];
    while !frontier.is_empty() {
        let mut next = Vec::new();
        for &u in &frontier {
            let du = depth[&u];
            if du >= max_len {
                continue;
            }
            for v in wgam.touching(u) {
                if depth.contains_key(&v) || !in_band(v) {
                    continue;
                }
                depth.insert(v, du + 1);
                prev.insert(v, u);
                if is_target(v) {
                    let mut chain = vec![v];
                    let mut cur = v;
                    while let Some(&p) = prev.get(&cur) {
                        chain.push(p);
                        cur = p;
                    }
                    chain.reverse();
                    return Some(chain);
                }
                next.push(v);
            }
        }
        frontier = next;
    }
    None
}

/// Chain families connecting reflected cubes.
#[derive(Debug, Clone)]
pub struct ChainFamilies {
    /// Touching chain between the reflections of each pair of intersecting
    /// `We` cubes, keyed by the ordered pair (j, k) with j <= k of
    /// exterior-decomposition indices.
    pub fjk: HashMap<(u32, u32), Vec<u32>>,
    /// Chain from the reflection of a `We` cube back to a comparable cube
    /// containing its center, keyed by the exterior-decomposition index.
    /// Present for `We` cubes that are intersected by a small non-`We` cube
    /// of the exterior decomposition.
    pub fp: HashMap<u32, Vec<u32>>,
    pub fjk_max_len: usize,
    pub fp_max_len: usize,
    /// min and max over all chain cubes S in the pair family of
    /// diam(S) / diam(Q_j).
    pub k1: f64,
    pub k2: f64,
    /// min over the carry-back family of min(|S_m|, |Q_j|) / diam(Q_j)^2,
    /// where S_m is the terminal chain cube.
    pub fp_min_terminal_ratio: f64,
    pub failures: Vec<ReflectFailure>,
}

const CHAIN_MAX_LEN: usize = 512;

/// Build the touching-chain family for every pair of intersecting `We`
/// cubes (including the trivial pair j = k). The chain runs in the Gamma
/// decomposition between the reflected cubes, with diameters restricted to
/// `[diam(Q_j)/32, 32 diam(Q_j)]`; if no chain exists, the band is widened
/// once to `[diam(Q_j)/128, 128 diam(Q_j)]`.
pub fn build_fjk(
    wext: &WhitneyDecomposition<2>,
    wgam: &WhitneyDecomposition<2>,
    class: &Classification,
    refl: &Reflection,
) -> (HashMap<(u32, u32), Vec<u32>>, Vec<ReflectFailure>) {
    let mut fjk = HashMap::new();
    let mut failures = Vec::new();
    for &j in &class.we {
        let tj = match refl.map.get(&j) {
            Some(&t) => t,
            None => continue,
        };
        let qj = &wext.cubes[j as usize];
        let mut partners: Vec<u32> = wext
            .intersecting(j)
            .iter()
            .copied()
            .filter(|&k| k >= j && class.is_we(k) && refl.map.contains_key(&k))
            .collect();
        if !partners.contains(&j) {
            partners.push(j);
        }
        partners.sort_unstable();
        for k in partners {
            let tk = refl.map[&k];
            let diam = qj.diam();
            let chain = touching_bfs(wgam, tj, diam / 32.0, 32.0 * diam, CHAIN_MAX_LEN, |u| {
                u == tk
            })
            .or_else(|| {
                touching_bfs(wgam, tj, diam / 128.0, 128.0 * diam, CHAIN_MAX_LEN, |u| u == tk)
            });
            match chain {
                Some(c) => {
                    fjk.insert((j, k), c);
                }
                None => failures.push(ReflectFailure {
                    cube: qj.clone(),
                    reason: format!(
                        "no touching chain between reflections of intersecting pair ({j}, {k})"
                    ),
                }),
            }
        }
    }
    (fjk, failures)
}

/// Build the carry-back chain family: for each `We` cube Q_j intersected by
/// a small cube of the exterior decomposition that is not itself in `We`,
/// chain the reflection Q_j* back to a Gamma-decomposition cube containing
/// the center of Q_j, within the diameter band `[diam(Q_j)/64, 64 diam(Q_j)]`.
pub fn build_fp(
    wext: &WhitneyDecomposition<2>,
    wgam: &WhitneyDecomposition<2>,
    class: &Classification,
    refl: &Reflection,
) -> (HashMap<u32, Vec<u32>>, Vec<ReflectFailure>) {
    let mut fp = HashMap::new();
    let mut failures = Vec::new();
    for &j in &class.we {
        let tj = match refl.map.get(&j) {
            Some(&t) => t,
            None => continue,
        };
        let qj = &wext.cubes[j as usize];
        let qualifying = wext.intersecting(j).iter().any(|&k| {
            k != j
                && !class.is_we(k)
                && wext.cubes[k as usize].diam() <= class.params.a * class.delta
        });
        if !qualifying {
            continue;
        }
        let center = qj.center();
        let diam = qj.diam();
        let chain = touching_bfs(wgam, tj, diam / 64.0, 64.0 * diam, CHAIN_MAX_LEN, |u| {
            wgam.cubes[u as usize].contains_point(center)
        });
        match chain {
            Some(c) => {
                fp.insert(j, c);
            }
            None => failures.push(ReflectFailure {
                cube: qj.clone(),
                reason: format!("no carry-back chain for cube {j}"),
            }),
        }
    }
    (fp, failures)
}

/// Assemble both chain families and their measured constants.
pub fn build_chains(
    wext: &WhitneyDecomposition<2>,
    wgam: &WhitneyDecomposition<2>,
    class: &Classification,
    refl: &Reflection,
) -> ChainFamilies {
    let (fjk, mut failures) = build_fjk(wext, wgam, class, refl);
    let (fp, fp_failures) = build_fp(wext, wgam, class, refl);
    failures.extend(fp_failures);

    let mut fjk_max_len = 0usize;
    let mut k1 = f64::INFINITY;
    let mut k2: f64 = 0.0;
    for ((j, _), chain) in &fjk {
        fjk_max_len = fjk_max_len.max(chain.len());
        let dj = wext.cubes[*j as usize].diam();
        for &s in chain {
            let ratio = wgam.cubes[s as usize].diam() / dj;
            k1 = k1.min(ratio);
            k2 = k2.max(ratio);
        }
    }
    if fjk.is_empty() {
        k1 = 0.0;
    }

    let mut fp_max_len = 0usize;
    let mut fp_min_terminal_ratio = f64::INFINITY;
    for (j, chain) in &fp {
        fp_max_len = fp_max_len.max(chain.len());
        let qj = &wext.cubes[*j as usize];
        let term = &wgam.cubes[*chain.last().expect("chains are nonempty") as usize];
        let vmin = term.volume().min(qj.volume());
        fp_min_terminal_ratio = fp_min_terminal_ratio.min(vmin / qj.diam().powi(2));
    }
    if fp.is_empty() {
        fp_min_terminal_ratio = 0.0;
    }

    ChainFamilies { fjk, fp, fjk_max_len, fp_max_len, k1, k2, fp_min_terminal_ratio, failures }
}

/// Pointwise overlap statistics of the dilated chain envelopes.
#[derive(Debug, Clone)]
pub struct OverlapReport {
    pub grid_n: usize,
    /// Maximum, over sampled points, of the number of distinct `We` cubes j
    /// whose chain envelope F(Q_j) covers the point.
    pub max_overlap: u32,
    /// (multiplicity, number of sampled cells with that multiplicity),
    /// sorted by multiplicity; zero-multiplicity cells are omitted.
    pub histogram: Vec<(u32, u64)>,
}

/// Rasterize the union of dilated chain cubes per `We` index j over an
/// `grid_n x grid_n` sampling of the window and count coverage multiplicity.
/// Each chain cube S contributes its dilation 2S.
pub fn overlap_histogram(
    wext: &WhitneyDecomposition<2>,
    wgam: &WhitneyDecomposition<2>,
    fams: &ChainFamilies,
    grid_n: usize,
) -> OverlapReport {
    let window = &wext.window;
    let lo = window.lo;
    let hi = window.hi;
    let hx = (hi[0] - lo[0]) / grid_n as f64;
    let hy = (hi[1] - lo[1]) / grid_n as f64;
    let mut counts = vec![0u32; grid_n * grid_n];
    let mut stamped = vec![u32::MAX; grid_n * grid_n];

    // Group every chain cube by its source j (pair chains count for j only:
    // the envelope F(Q_j) is the union over partners).
    let mut by_j: HashMap<u32, Vec<u32>> = HashMap::new();
    for ((j, _), chain) in &fams.fjk {
        by_j.entry(*j).or_default().extend(chain.iter().copied());
    }
    for (j, chain) in &fams.fp {
        by_j.entry(*j).or_default().extend(chain.iter().copied());
    }

    let mut js: Vec<u32> = by_j.keys().copied().collect();
    js.sort_unstable();
    for j in js {
        let cubes = &by_j[&j];
        for &s in cubes {
            let (dlo, dhi) = wgam.cubes[s as usize].dilated(2.0);
            let ix_lo = (((dlo[0] - lo[0]) / hx - 0.5).ceil().max(0.0)) as usize;
            let iy_lo = (((dlo[1] - lo[1]) / hy - 0.5).ceil().max(0.0)) as usize;
            let ix_hi = (((dhi[0] - lo[0]) / hx - 0.5).floor()).min(grid_n as f64 - 1.0);
            let iy_hi = (((dhi[1] - lo[1]) / hy - 0.5).floor()).min(grid_n as f64 - 1.0);
            if ix_hi < 0.0 || iy_hi < 0.0 {
                continue;
            }
            for ix in ix_lo..=(ix_hi as usize) {
                for iy in iy_lo..=(iy_hi as usize) {
                    let cell = iy * grid_n + ix;
                    if stamped[cell] != j {
                        stamped[cell] = j;
                        counts[cell] += 1;
                    }
                }
            }
        }
    }

    let mut max_overlap = 0u32;
    let mut hist: HashMap<u32, u64> = HashMap::new();
    for &c in &counts {
        if c > 0 {
            *hist.entry(c).or_insert(0) += 1;
            max_overlap = max_overlap.max(c);
        }
    }
    let mut histogram: Vec<(u32, u64)> = hist.into_iter().collect();
    histogram.sort_unstable();
    OverlapReport { grid_n, max_overlap, histogram }
}

/// Measured constant for the distance between reflections of intersecting
/// `We` cubes: max over pairs of dist(Q_j*, Q_k*) / diam(Q_j).
pub fn dist_reflected_max(
    wext: &WhitneyDecomposition<2>,
    wgam: &WhitneyDecomposition<2>,
    class: &Classification,
    refl: &Reflection,
) -> f64 {
    let mut worst: f64 = 0.0;
    for &j in &class.we {
        let tj = match refl.map.get(&j) {
            Some(&t) => t,
            None => continue,
        };
        let qj = &wext.cubes[j as usize];
        let rj = &wgam.cubes[tj as usize];
        for &k in wext.intersecting(j) {
            if k < j || !class.is_we(k) {
                continue;
            }
            if let Some(&tk) = refl.map.get(&k) {
                let rk = &wgam.cubes[tk as usize];
                worst = worst.max(rj.dist_to_cube(rk) / qj.diam());
            }
        }
    }
    worst
}

/// Structured summary of one reflection-pipeline run.
#[derive(Debug, Clone)]
pub struct ReflectCertificate {
    pub domain: String,
    pub a: f64,
    pub b: f64,
    pub mode: ParamMode,
    pub wi_count: usize,
    pub we_count: usize,
    pub c_diam_max: f64,
    pub c_dist_max: f64,
    pub c_refl: f64,
    pub c_pre: u32,
    pub dist_reflected_max: f64,
    pub fjk_count: usize,
    pub fp_count: usize,
    pub fjk_max_len: usize,
    pub fp_max_len: usize,
    pub k1: f64,
    pub k2: f64,
    pub fp_min_terminal_ratio: f64,
    pub max_overlap: u32,
    pub failures: Vec<String>,
}

impl ReflectCertificate {
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        s.push_str(&format!("domain = {}\n", self.domain));
        s.push_str(&format!("a = {}\n", self.a));
        s.push_str(&format!("b = {}\n", self.b));
        s.push_str(&format!("mode = {}\n", self.mode.label()));
        s.push_str(&format!("wi_count = {}\n", self.wi_count));
        s.push_str(&format!("we_count = {}\n", self.we_count));
        s.push_str(&format!("c_diam_max = {:.6}\n", self.c_diam_max));
        s.push_str(&format!("c_dist_max = {:.6}\n", self.c_dist_max));
        s.push_str(&format!("c_refl = {:.6}\n", self.c_refl));
        s.push_str(&format!("c_pre = {}\n", self.c_pre));
        s.push_str(&format!("dist_reflected_max = {:.6}\n", self.dist_reflected_max));
        s.push_str(&format!("fjk_count = {}\n", self.fjk_count));
        s.push_str(&format!("fp_count = {}\n", self.fp_count));
        s.push_str(&format!("fjk_max_len = {}\n", self.fjk_max_len));
        s.push_str(&format!("fp_max_len = {}\n", self.fp_max_len));
        s.push_str(&format!("k1 = {:.6}\n", self.k1));
        s.push_str(&format!("k2 = {:.6}\n", self.k2));
        s.push_str(&format!("fp_min_terminal_ratio = {:.6}\n", self.fp_min_terminal_ratio));
        s.push_str(&format!("max_overlap = {}\n", self.max_overlap));
        s.push_str(&format!("failure_count = {}\n", self.failures.len()));
        for f in &self.failures {
            s.push_str(&format!("failure = {f}\n"));
        }
        s
    }
}

/// Everything the extension operator needs from the reflection stage.
pub struct ReflectPipeline {
    pub wext: WhitneyDecomposition<2>,
    pub wgam: WhitneyDecomposition<2>,
    pub class: Classification,
    pub refl: Reflection,
    pub fams: ChainFamilies,
}

impl ReflectPipeline {
    pub fn certificate(&self, dom: &DomainSpec, overlap_grid_n: usize) -> ReflectCertificate {
        let overlap = overlap_histogram(&self.wext, &self.wgam, &self.fams, overlap_grid_n);
        let drm = dist_reflected_max(&self.wext, &self.wgam, &self.class, &self.refl);
        let mut failures: Vec<String> = Vec::new();
        for f in &self.refl.failures {
            failures.push(format!(
                "reflection: level {} anchor ({}, {}): {}",
                f.cube.level, f.cube.anchor[0], f.cube.anchor[1], f.reason
            ));
        }
        for f in &self.fams.failures {
            failures.push(format!(
                "chain: level {} anchor ({}, {}): {}",
                f.cube.level, f.cube.anchor[0], f.cube.anchor[1], f.reason
            ));
        }
        ReflectCertificate {
            domain: dom.name.clone(),
            a: self.class.params.a,
            b: self.class.params.b,
            mode: self.class.params.mode,
            wi_count: self.class.wi.len(),
            we_count: self.class.we.len(),
            c_diam_max: self.refl.c_diam_max,
            c_dist_max: self.refl.c_dist_max,
            c_refl: self.refl.c_refl(),
            c_pre: self.refl.c_pre,
            dist_reflected_max: drm,
            fjk_count: self.fams.fjk.len(),
            fp_count: self.fams.fp.len(),
            fjk_max_len: self.fams.fjk_max_len,
            fp_max_len: self.fams.fp_max_len,
            k1: self.fams.k1,
            k2: self.fams.k2,
            fp_min_terminal_ratio: self.fams.fp_min_terminal_ratio,
            max_overlap: overlap.max_overlap,
            failures,
        }
    }
}

/// Decompose, classify, reflect, and chain in one call.
pub fn run_reflection_pipeline(
    dom: &DomainSpec,
    max_level: i32,
    params: ReflectParams,
) -> Result<ReflectPipeline, SobexError> {
    let closure = dom.closure_oracle();
    let wext = decompose(&closure as &dyn SetOracle<2>, dom.window, max_level)?;
    let wgam = decompose(&dom.gamma, dom.window, max_level)?;
    let class = classify(dom, &wext, &wgam, params);
    let refl = build_reflection(&wext, &wgam, &class);
    let fams = build_chains(&wext, &wgam, &class, &refl);
    Ok(ReflectPipeline { wext, wgam, class, refl, fams })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::BuiltinDomain;

    fn halfplane(m: i32, max_level: i32) -> (DomainSpec, ReflectPipeline) {
        let dom = BuiltinDomain::HalfPlane { split: crate::geometry::HalfPlaneSplit::AllGamma }
            .domain_with_window(m);
        let pipe = run_reflection_pipeline(&dom, max_level, ReflectParams::empirical()).unwrap();
        (dom, pipe)
    }

    #[test]
    fn halfplane_every_small_cube_is_we() {
        let (_, pipe) = halfplane(2, 6);
        // With an all-Gamma boundary the Dirichlet distance is infinite, and
        // the claimed delta is infinite, so every cube qualifies.
        assert_eq!(pipe.class.we.len(), pipe.wext.len());
        assert!(!pipe.class.we.is_empty());
        assert!(pipe.refl.failures.is_empty());
        assert!(pipe.fams.failures.is_empty());
    }

    #[test]
    fn halfplane_reflection_constants_and_known_cube() {
        let (_, pipe) = halfplane(2, 6);
        assert!(pipe.refl.c_refl() <= 25.0, "c_refl = {}", pipe.refl.c_refl());
        // Reflections never shrink and always land strictly below the line.
        for (&j, &t) in &pipe.refl.map {
            let q = &pipe.wext.cubes[j as usize];
            let r = &pipe.wgam.cubes[t as usize];
            assert!(r.diam() >= q.diam() - 1e-12);
            assert!(r.hi()[1] <= 0.0 + 1e-12, "reflected cube must lie below the line");
        }
        // Hand-checked cube [0,1] x [2,3]: the nearest admissible reflected
        // cube is at distance exactly 4 at the same level.
        let q = DyadicCube::<2>::new(0, [0, 2]);
        let j = pipe.wext.index_of(&q).expect("cube [0,1]x[2,3] is a Whitney cube");
        let t = pipe.refl.map[&j];
        let r = &pipe.wgam.cubes[t as usize];
        assert!((q.dist_to_cube(r) - 4.0).abs() < 1e-12, "dist = {}", q.dist_to_cube(r));
        assert!((r.diam() - q.diam()).abs() < 1e-12);
    }

    #[test]
    fn we_empty_iff_pure_dirichlet() {
        let disk = BuiltinDomain::PureDirichletDisk { radius: 1.0 }.domain_with_window(2);
        let pipe = run_reflection_pipeline(&disk, 6, ReflectParams::empirical()).unwrap();
        assert!(pipe.class.we.is_empty());

        let hp_d = BuiltinDomain::HalfPlane { split: crate::geometry::HalfPlaneSplit::AllDirichlet }
            .domain_with_window(2);
        let pipe = run_reflection_pipeline(&hp_d, 6, ReflectParams::empirical()).unwrap();
        assert!(pipe.class.we.is_empty());

        // And conversely: a mixed boundary has a nonempty We.
        let hp_s = BuiltinDomain::HalfPlane { split: crate::geometry::HalfPlaneSplit::PositiveGamma }
            .domain_with_window(2);
        let pipe = run_reflection_pipeline(&hp_s, 6, ReflectParams::empirical()).unwrap();
        assert!(!pipe.class.we.is_empty());
    }

    #[test]
    fn split_halfplane_b_inequality_sides() {
        // Gamma is the positive axis, D the negative axis. A small cube just
        // above the negative axis is far from Gamma relative to D, so it is
        // excluded from We; its mirror image above the positive axis is in We.
        let dom = BuiltinDomain::HalfPlane { split: crate::geometry::HalfPlaneSplit::PositiveGamma }
            .domain_with_window(2);
        let pipe = run_reflection_pipeline(&dom, 7, ReflectParams::empirical()).unwrap();
        let pd = [-3.3, 0.07];
        let pg = [3.3, 0.07];
        let near_d = pipe.wext.locate(pd, dom.dist_closure(pd), 0.0);
        let near_g = pipe.wext.locate(pg, dom.dist_closure(pg), 0.0);
        match (near_d, near_g) {
            (crate::whitney::CubeQuery::Cube(qd), crate::whitney::CubeQuery::Cube(qg)) => {
                let jd = pipe.wext.index_of(&qd).unwrap();
                let jg = pipe.wext.index_of(&qg).unwrap();
                assert!(!pipe.class.is_we(jd), "cube over D should fail the B-inequality");
                assert!(pipe.class.is_we(jg), "cube over Gamma should be in We");
            }
            other => panic!("expected resolved cubes, got {other:?}"),
        }
    }

    #[test]
    fn we_distance_comparison_with_domain() {
        // For Q in We: dist(Q, Omega-closure) <= dist(Q, Gamma), and the two
        // are comparable because Gamma is part of the boundary.
        let dom = BuiltinDomain::HalfPlane { split: crate::geometry::HalfPlaneSplit::PositiveGamma }
            .domain_with_window(2);
        let pipe = run_reflection_pipeline(&dom, 6, ReflectParams::empirical()).unwrap();
        let closure = dom.closure_oracle();
        for &j in &pipe.class.we {
            let q = &pipe.wext.cubes[j as usize];
            let d_om = closure.box_bounds(q.lo(), q.hi()).lower;
            let d_ga = dom.gamma.box_dist(q.lo(), q.hi()).lower;
            assert!(d_om <= d_ga + 1e-12);
            // Whitney geometry keeps the Gamma distance within a bounded
            // multiple of the cube scale, hence of the domain distance.
            assert!(d_ga <= 8.0 * (d_om + q.diam()) + 1e-12);
        }
    }

    #[test]
    fn fjk_trivial_pairs_and_touching() {
        let (_, pipe) = halfplane(2, 6);
        for ((j, k), chain) in &pipe.fams.fjk {
            if j == k {
                assert_eq!(chain.len(), 1);
                assert_eq!(chain[0], pipe.refl.map[j]);
            }
            // Consecutive chain cubes touch.
            for w in chain.windows(2) {
                let a = &pipe.wgam.cubes[w[0] as usize];
                let b = &pipe.wgam.cubes[w[1] as usize];
                assert!(a.touches(b), "chain cubes must touch");
            }
            // Chain endpoint cubes are the two reflections.
            assert_eq!(chain[0], pipe.refl.map[j]);
            assert_eq!(*chain.last().unwrap(), pipe.refl.map[k]);
            // Band: all chain diameters within the widened band of Q_j.
            let dj = pipe.wext.cubes[*j as usize].diam();
            for &s in chain {
                let ds = pipe.wgam.cubes[s as usize].diam();
                assert!(ds >= dj / 128.0 - 1e-15 && ds <= 128.0 * dj + 1e-12);
            }
        }
        assert!(pipe.fams.k1 > 0.0);
        assert!(pipe.fams.k2 >= pipe.fams.k1);
    }

    #[test]
    fn fp_empty_when_everything_is_we() {
        let (_, pipe) = halfplane(2, 6);
        assert!(pipe.fams.fp.is_empty());
    }

    #[test]
    fn fp_chains_on_split_halfplane() {
        let dom = BuiltinDomain::HalfPlane { split: crate::geometry::HalfPlaneSplit::PositiveGamma }
            .domain_with_window(2);
        let pipe = run_reflection_pipeline(&dom, 7, ReflectParams::empirical()).unwrap();
        assert!(!pipe.fams.fp.is_empty(), "crossover cubes exist near the Gamma/D transition");
        for (j, chain) in &pipe.fams.fp {
            let qj = &pipe.wext.cubes[*j as usize];
            assert_eq!(chain[0], pipe.refl.map[j]);
            let term = &pipe.wgam.cubes[*chain.last().unwrap() as usize];
            assert!(term.contains_point(qj.center()));
            // Dyadic cubes on the same lattice: containment one way or the other.
            assert!(
                term.contains_cube(qj) || qj.contains_cube(term),
                "terminal cube and source cube must nest"
            );
        }
        assert!(pipe.fams.fp_min_terminal_ratio > 0.0);
    }

    #[test]
    fn preimage_multiplicity_is_bounded() {
        let (_, pipe) = halfplane(2, 7);
        assert!(pipe.refl.c_pre >= 1);
        assert!(pipe.refl.c_pre <= 20, "c_pre = {}", pipe.refl.c_pre);
    }

    #[test]
    fn overlap_statistics_are_grid_stable() {
        let (dom, pipe) = halfplane(2, 6);
        let r1 = overlap_histogram(&pipe.wext, &pipe.wgam, &pipe.fams, 128);
        let r2 = overlap_histogram(&pipe.wext, &pipe.wgam, &pipe.fams, 256);
        assert!(r1.max_overlap > 0);
        assert_eq!(r1.max_overlap, r2.max_overlap, "overlap count must be grid-stable");
        let cert = pipe.certificate(&dom, 128);
        assert_eq!(cert.max_overlap, r1.max_overlap);
        assert!(cert.to_text().contains("c_refl"));
    }

    #[test]
    fn cusp_reflections_stay_comparable_to_halfplane() {
        // Near the cusp tip, Gamma (the positive axis) has domain on both
        // sides, so every We cube reflects across it at half-plane-like cost;
        // the cusp pathology shows up in the chain certificate and the norm
        // blow-up experiments, not in the reflection map.
        let dom = BuiltinDomain::CuspAtZero { alpha: 2.0 }.domain_with_window(1);
        let pipe = run_reflection_pipeline(&dom, 9, ReflectParams::empirical()).unwrap();
        assert!(!pipe.class.we.is_empty());
        assert!(pipe.refl.failures.is_empty(), "reflection succeeds on the cusp domain");
        assert!(pipe.refl.c_refl() <= 40.0, "c_refl = {}", pipe.refl.c_refl());
    }

    #[test]
    fn pipeline_is_deterministic() {
        let dom = BuiltinDomain::HalfPlane { split: crate::geometry::HalfPlaneSplit::PositiveGamma }
            .domain_with_window(2);
        let p1 = run_reflection_pipeline(&dom, 6, ReflectParams::empirical()).unwrap();
        let p2 = run_reflection_pipeline(&dom, 6, ReflectParams::empirical()).unwrap();
        let mut m1: Vec<(u32, u32)> = p1.refl.map.iter().map(|(&a, &b)| (a, b)).collect();
        let mut m2: Vec<(u32, u32)> = p2.refl.map.iter().map(|(&a, &b)| (a, b)).collect();
        m1.sort_unstable();
        m2.sort_unstable();
        assert_eq!(m1, m2);
        let mut c1: Vec<((u32, u32), Vec<u32>)> =
            p1.fams.fjk.iter().map(|(&k, v)| (k, v.clone())).collect();
        let mut c2: Vec<((u32, u32), Vec<u32>)> =
            p2.fams.fjk.iter().map(|(&k, v)| (k, v.clone())).collect();
        c1.sort();
        c2.sort();
        assert_eq!(c1, c2);
    }

    #[test]
    fn strict_params_and_family_monotonicity() {
        let p = ReflectParams::strict(1.0);
        assert_eq!(p.b, 720.0);
        assert!((p.a - 1.0 / 720.0).abs() < 1e-18);
        let p = ReflectParams::strict(1e-3);
        assert_eq!(p.b, 3000.0);

        let mut dom = BuiltinDomain::HalfPlane { split: crate::geometry::HalfPlaneSplit::PositiveGamma }
            .domain_with_window(2);
        let wext_oracle = dom.closure_oracle();
        let wext = decompose(&wext_oracle as &dyn SetOracle<2>, dom.window, 6).unwrap();
        let wgam = decompose(&dom.gamma, dom.window, 6).unwrap();

        // With an unclaimed (infinite) delta, the diameter cap never bites,
        // so growing B only admits more cubes.
        let loose = classify(&dom, &wext, &wgam, ReflectParams::empirical());
        let big_b = classify(&dom, &wext, &wgam, ReflectParams::strict(1.0));
        assert!(big_b.we.len() >= loose.we.len());
        for &j in &loose.we {
            assert!(big_b.is_we(j), "B = 720 family contains the B = 8 family");
        }

        // A finite claimed delta makes the diameter cap bite: at A = 1/720
        // and delta = 64, only cubes with diam <= 64/720 survive.
        dom.claimed = Some(crate::geometry::ClaimedParams {
            eps: 0.05,
            delta: 64.0,
            qh_bound: 1.0,
            lambda: 1.0,
        });
        let capped = classify(&dom, &wext, &wgam, ReflectParams::strict(1.0));
        assert!(!capped.we.is_empty());
        assert!(capped.we.len() < big_b.we.len());
        for &j in &capped.we {
            assert!(wext.cubes[j as usize].diam() <= 64.0 / 720.0 + 1e-12);
            assert!(big_b.is_we(j));
        }
    }
}
