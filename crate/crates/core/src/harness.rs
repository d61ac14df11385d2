//! Acceptance harness: eleven end-to-end checks over the builtin domains.
//!
//! `run_acceptance(Suite::Fast)` is the checkout gate; `Suite::Full` raises
//! the free fidelity knobs (Whitney depth, node grids, certificate pair
//! budgets). Parameters that a check pins explicitly (grid triplets, pair
//! counts, reflection levels) are identical in both suites so that the
//! measured constants stay comparable.
//!
//! Measured constants are compared against [`GOLDEN`] at 20% relative
//! tolerance. The pinned values come from the `regenerate_golden_full`
//! helper (`cargo test -p sobex --lib harness::tests::regenerate_golden_full
//! -- --ignored --nocapture`) and change only through that explicit path.
//! Structural identities — partition sums, reflected-diameter monotonicity,
//! node exactness, the 12^d neighbor cap — are asserted absolutely inside
//! the criteria and are never relaxed.

use std::collections::BTreeMap;
use std::f64::consts::FRAC_PI_4;
use std::fmt::Write as _;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::certify::{blowup_envelope, blowup_slope, check_assumption, cusp_blowup_experiment};
use crate::extend::{
    build_extension, compose_reference, extension_pipeline, lipschitz_continuity_probe,
    make_test_function, profile_battery, sample_covered_exterior, sobolev_norm, ExtendedFunction,
    NormRegion, TestFunction, ZeroExtended,
};
use crate::geometry::{BoxRegion, BuiltinDomain, DomainSpec, HalfPlaneSplit, PointClass, SetOracle};
use crate::polyfit::{
    box_lp_norm, norm_comparison_check, poincare_battery_constant, poincare_check, project,
    smooth_battery, AnalyticField, CubePolynomial,
};
use crate::qhmetric::{chain_qhdist_equivalence_report, qh_segment_length, QhGraph};
use crate::reflect::{run_reflection_pipeline, ReflectCertificate, ReflectParams, ReflectPipeline};
use crate::util::{ls_slope, smoothstep_poly, Poly1};
use crate::whitney::{decompose, CubeQuery, WhitneyDecomposition};
use crate::SobexError;

/// Fidelity preset for a harness run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    /// Checkout gate: reduced Whitney depth and node grids.
    Fast,
    /// Reference fidelity: criterion-capped Whitney depth, dense node grids.
    Full,
}

impl Suite {
    fn label(self) -> &'static str {
        match self {
            Suite::Fast => "fast",
            Suite::Full => "full",
        }
    }

    fn fidelity(self) -> Fidelity {
        match self {
            // Whitney exhaustiveness level, extension node grid, cusp
            // certificate pair budget. Everything else is pinned by the
            // criterion itself and shared between suites.
            Suite::Fast => Fidelity { whitney_level: 8, node_grid: 128, cert_pairs: 150 },
            Suite::Full => Fidelity { whitney_level: 10, node_grid: 512, cert_pairs: 300 },
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Fidelity {
    whitney_level: i32,
    node_grid: usize,
    cert_pairs: usize,
}

/// Outcome of one acceptance criterion.
#[derive(Debug, Clone)]
pub struct CriterionResult {
    pub id: usize,
    pub name: &'static str,
    pub pass: bool,
    pub elapsed: Duration,
    /// Informational runtime budget; never part of `pass`.
    pub budget: Duration,
    pub details: Vec<String>,
}

/// One golden-constant comparison row.
#[derive(Debug, Clone)]
pub struct GoldenRow {
    pub key: String,
    pub measured: f64,
    pub pinned: Option<f64>,
    pub ok: bool,
}

/// Full harness report: one result per criterion plus the golden table.
#[derive(Debug, Clone)]
pub struct AcceptanceReport {
    pub suite: Suite,
    pub criteria: Vec<CriterionResult>,
    pub golden: Vec<GoldenRow>,
}

/// Relative tolerance for pinned measured constants.
pub const GOLDEN_REL_TOL: f64 = 0.20;

/// Measured constants pinned from the reference full run (see module docs
/// for the regeneration path). Keys missing here are reported unpinned and
/// do not fail the run; a pinned key that drifts past [`GOLDEN_REL_TOL`]
/// does.
const GOLDEN: &[(&str, f64)] = &[];

impl AcceptanceReport {
    pub fn golden_pass(&self) -> bool {
        self.golden.iter().all(|r| r.ok)
    }

    pub fn all_pass(&self) -> bool {
        self.criteria.iter().all(|c| c.pass) && self.golden_pass()
    }

    /// Structured text report: one line per criterion, then details, then
    /// the golden table.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "acceptance suite: {}", self.suite.label());
        for c in &self.criteria {
            let _ = writeln!(
                s,
                "criterion {:02} {:<24} {}  {:6.1}s (budget {}s)",
                c.id,
                c.name,
                if c.pass { "pass" } else { "FAIL" },
                c.elapsed.as_secs_f64(),
                c.budget.as_secs()
            );
            for d in &c.details {
                let _ = writeln!(s, "    {d}");
            }
        }
        let pinned = self.golden.iter().filter(|r| r.pinned.is_some()).count();
        let _ = writeln!(
            s,
            "golden constants: {} measured, {} pinned, {}",
            self.golden.len(),
            pinned,
            if self.golden_pass() { "all within tolerance" } else { "DRIFT DETECTED" }
        );
        for r in &self.golden {
            match r.pinned {
                Some(g) => {
                    let _ = writeln!(
                        s,
                        "    {:<28} measured {:>12.6}  pinned {:>12.6}  {}",
                        r.key,
                        r.measured,
                        g,
                        if r.ok { "ok" } else { "DRIFT" }
                    );
                }
                None => {
                    let _ = writeln!(s, "    {:<28} measured {:>12.6}  (unpinned)", r.key, r.measured);
                }
            }
        }
        let _ = writeln!(
            s,
            "result: {} ({}/{} criteria, golden {})",
            if self.all_pass() { "PASS" } else { "FAIL" },
            self.criteria.iter().filter(|c| c.pass).count(),
            self.criteria.len(),
            if self.golden_pass() { "ok" } else { "drift" }
        );
        s
    }

    /// JUnit-style XML listing: one testcase per criterion plus one for the
    /// golden table.
    pub fn to_junit(&self) -> String {
        let failures = self.criteria.iter().filter(|c| !c.pass).count()
            + usize::from(!self.golden_pass());
        let mut s = String::new();
        let _ = writeln!(
            s,
            "<testsuite name=\"acceptance-{}\" tests=\"{}\" failures=\"{}\">",
            self.suite.label(),
            self.criteria.len() + 1,
            failures
        );
        for c in &self.criteria {
            if c.pass {
                let _ = writeln!(
                    s,
                    "  <testcase name=\"c{:02}-{}\" time=\"{:.1}\"/>",
                    c.id,
                    c.name,
                    c.elapsed.as_secs_f64()
                );
            } else {
                let _ = writeln!(
                    s,
                    "  <testcase name=\"c{:02}-{}\" time=\"{:.1}\"><failure message=\"{}\"/></testcase>",
                    c.id,
                    c.name,
                    c.elapsed.as_secs_f64(),
                    xml_escape(&c.details.join("; "))
                );
            }
        }
        if self.golden_pass() {
            let _ = writeln!(s, "  <testcase name=\"golden-constants\" time=\"0.0\"/>");
        } else {
            let drifted: Vec<String> = self
                .golden
                .iter()
                .filter(|r| !r.ok)
                .map(|r| format!("{} measured {} pinned {:?}", r.key, r.measured, r.pinned))
                .collect();
            let _ = writeln!(
                s,
                "  <testcase name=\"golden-constants\" time=\"0.0\"><failure message=\"{}\"/></testcase>",
                xml_escape(&drifted.join("; "))
            );
        }
        s.push_str("</testsuite>\n");
        s
    }

    /// Paste-ready golden table from this run's measured constants.
    pub fn golden_table(&self) -> String {
        let mut s = String::from("const GOLDEN: &[(&str, f64)] = &[\n");
        for r in &self.golden {
            let _ = writeln!(s, "    (\"{}\", {:.6}),", r.key, r.measured);
        }
        s.push_str("];\n");
        s
    }
}

fn xml_escape(t: &str) -> String {
    t.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

struct Ctx {
    fid: Fidelity,
    measured: BTreeMap<String, f64>,
}

impl Ctx {
    fn note(&mut self, key: &str, v: f64) {
        self.measured.insert(key.to_string(), v);
    }
}

fn halfplane(split: HalfPlaneSplit, m: i32) -> DomainSpec {
    BuiltinDomain::HalfPlane { split }.domain_with_window(m)
}

fn sector(m: i32) -> DomainSpec {
    BuiltinDomain::SectorComplement { theta: FRAC_PI_4 }.domain_with_window(m)
}

/// Run the full acceptance battery at the chosen fidelity.
pub fn run_acceptance(suite: Suite) -> AcceptanceReport {
    let mut ctx = Ctx { fid: suite.fidelity(), measured: BTreeMap::new() };
    type CritFn = fn(&mut Ctx, &mut Vec<String>) -> Result<bool, SobexError>;
    let table: [(&'static str, u64, CritFn); 11] = [
        ("whitney-invariants", 60, c1_whitney),
        ("qh-metric", 120, c2_qh_metric),
        ("sector-qh-bound", 60, c3_sector_bound),
        ("reflection-stability", 300, c4_reflection),
        ("polynomial-estimates", 60, c5_polynomials),
        ("extension-identities", 120, c6_extension),
        ("operator-norms", 600, c7_operator_norms),
        ("locality", 300, c8_locality),
        ("cusp-blowup", 120, c9_blowup),
        ("certificates", 60, c10_certificates),
        ("boundary-regularity", 300, c11_boundary),
    ];
    let mut criteria = Vec::new();
    for (i, (name, budget, f)) in table.into_iter().enumerate() {
        let start = Instant::now();
        let mut details = Vec::new();
        let pass = match f(&mut ctx, &mut details) {
            Ok(p) => p,
            Err(e) => {
                details.push(format!("error: {e}"));
                false
            }
        };
        criteria.push(CriterionResult {
            id: i + 1,
            name,
            pass,
            elapsed: start.elapsed(),
            budget: Duration::from_secs(budget),
            details,
        });
    }
    let pinned: BTreeMap<&str, f64> = GOLDEN.iter().copied().collect();
    let mut golden: Vec<GoldenRow> = ctx
        .measured
        .iter()
        .map(|(k, &m)| {
            let p = pinned.get(k.as_str()).copied();
            let ok = match p {
                Some(g) => (m - g).abs() <= GOLDEN_REL_TOL * g.abs().max(1e-12),
                None => true,
            };
            GoldenRow { key: k.clone(), measured: m, pinned: p, ok }
        })
        .collect();
    // A pinned key the run no longer produces is stale and must fail.
    for (k, g) in &pinned {
        if !ctx.measured.contains_key(*k) {
            golden.push(GoldenRow {
                key: (*k).to_string(),
                measured: f64::NAN,
                pinned: Some(*g),
                ok: false,
            });
        }
    }
    AcceptanceReport { suite, criteria, golden }
}

// criterion 1: Whitney invariants, exhaustive over both decompositions of
// three domains.
fn c1_whitney(ctx: &mut Ctx, out: &mut Vec<String>) -> Result<bool, SobexError> {
    let lvl = ctx.fid.whitney_level.min(10);
    let doms = [
        halfplane(HalfPlaneSplit::AllGamma, 2),
        sector(2),
        BuiltinDomain::CuspAtZero { alpha: 2.0 }.domain_with_window(2),
    ];
    let mut pass = true;
    for dom in &doms {
        let wg = decompose(&dom.gamma, dom.window, lvl)?;
        let rg = wg.verify_properties(&dom.gamma);
        let closure = dom.closure_oracle();
        let wc = decompose(&closure, dom.window, lvl)?;
        let rc = wc.verify_properties(&closure);
        for (side, rep) in [("W(cl Gamma)", rg), ("W(cl Omega)", rc)] {
            let ok = rep.clean();
            pass &= ok;
            out.push(format!(
                "{} {side}: {} cubes ({} unresolved), violations ii {}+{} iv {} v {}, max neighbors {}, measure {}",
                dom.name,
                rep.cube_count,
                rep.unresolved_count,
                rep.ii_lower_violations,
                rep.ii_upper_violations,
                rep.iv_violations,
                rep.v_violations,
                rep.max_neighbors,
                if rep.measure_ok { "ok" } else { "BAD" }
            ));
        }
    }
    out.push(format!("max level {lvl}, window [-4,4]^2"));
    Ok(pass)
}

// criterion 2: graph quasihyperbolic distance against the half-plane
// logarithm, and chain length as an upper envelope for qhdist.
fn c2_qh_metric(ctx: &mut Ctx, out: &mut Vec<String>) -> Result<bool, SobexError> {
    let mut pass = true;
    // log anchor: qhdist((0,-1),(0,-t)) = ln t in the lower half-plane
    let dom = halfplane(HalfPlaneSplit::AllGamma, 4);
    let g = QhGraph::build(&dom.gamma, dom.window, 6, 2)?;
    for t in [2.0, 4.0, 8.0] {
        let d = g.qhdist(&dom.gamma, [0.0, -1.0], [0.0, -t], 1e-9)?;
        let want = t.ln();
        let rel = (d.value - want).abs() / want;
        let ok = rel <= 0.03 && !d.windowed;
        pass &= ok;
        out.push(format!(
            "qhdist((0,-1),(0,-{t})) = {:.5} vs ln {t} = {:.5} (rel {:.4}) {}",
            d.value,
            want,
            rel,
            if ok { "ok" } else { "FAIL" }
        ));
    }
    // chain-length envelope over 10^3 sampled pairs
    let dom2 = halfplane(HalfPlaneSplit::AllGamma, 2);
    let g2 = QhGraph::build(&dom2.gamma, dom2.window, 6, 2)?;
    let mut rng = ChaCha8Rng::seed_from_u64(2026);
    let rows = chain_qhdist_equivalence_report(&g2, &dom2.gamma, 1000, 600, 1e-9, &mut rng);
    // The full plane minus the line splits into two components; pairs that
    // straddle the line have infinite qh distance and must have no chain.
    // The inequality is asserted on every same-component pair.
    let mut connected = 0usize;
    let mut violations = 0usize;
    let mut inconsistent = 0usize;
    let mut envelope: f64 = 0.0;
    let mut buckets: BTreeMap<usize, usize> = BTreeMap::new();
    for r in &rows {
        if r.qhdist.is_finite() {
            connected += 1;
            match r.chain_len {
                None => violations += 1,
                Some(cl) => {
                    if r.qhdist > cl as f64 + 0.01 {
                        violations += 1;
                    }
                    envelope = envelope.max(cl as f64 / (1.0 + r.qhdist));
                    let b = r.qhdist.floor().max(0.0) as usize;
                    let e = buckets.entry(b).or_insert(0);
                    *e = (*e).max(cl);
                }
            }
        } else if r.chain_len.is_some() {
            inconsistent += 1;
        }
    }
    pass &= rows.len() >= 900 && connected >= 300 && violations == 0 && inconsistent == 0;
    out.push(format!(
        "chains: {} pairs, {} same-component, {} qhdist>chain violations, {} cross-component chains",
        rows.len(),
        connected,
        violations,
        inconsistent
    ));
    let bucket_txt: Vec<String> =
        buckets.iter().map(|(b, m)| format!("[{b},{}):{m}", b + 1)).collect();
    out.push(format!("bucketed max chain length {}", bucket_txt.join(" ")));
    out.push(format!("chain/(1+qhdist) envelope {:.4}", envelope));
    pass &= envelope.is_finite() && envelope > 0.0;
    ctx.note("c2/chain_envelope", envelope);
    Ok(pass)
}

// Graph qh distance from a precomputed source field to an off-node point:
// locate the point's cube and inject along a straight segment to each of
// the cube's lattice nodes.
fn qh_from_field(
    g: &QhGraph<2>,
    dom: &DomainSpec,
    field: &[f64],
    z: [f64; 2],
) -> Option<f64> {
    let dz = dom.gamma.dist_point(z);
    let cube = match g.whitney.locate(z, dz, 0.0) {
        CubeQuery::Cube(q) => q,
        _ => return None,
    };
    let ci = g.whitney.index_of(&cube)?;
    let dist_f = |p: [f64; 2]| dom.gamma.dist_point(p);
    let floor = cube.diam() / 8.0;
    let mut best = f64::INFINITY;
    for &u in g.nodes_of_cube(ci) {
        let inj = qh_segment_length(&dist_f, z, g.nodes[u as usize], floor);
        best = best.min(field[u as usize] + inj);
    }
    Some(best)
}

// criterion 3: the sector-complement qh bound 2(2 + 1/tan theta) from the
// lower half-sector to upper-quadrant points, measured on 200 probes.
fn c3_sector_bound(ctx: &mut Ctx, out: &mut Vec<String>) -> Result<bool, SobexError> {
    let theta = FRAC_PI_4;
    let dom = sector(2);
    let lvl = 7;
    let g = QhGraph::build(&dom.gamma, dom.window, lvl, 2)?;
    let tan_t = theta.tan();
    // sources: every graph node strictly inside the lower half-sector
    // { -theta < phi < 0 }
    let starts: Vec<(u32, f64)> = (0..g.node_count() as u32)
        .filter(|&u| {
            let p = g.nodes[u as usize];
            p[0] > 1e-9 && p[1] < -1e-9 && -p[1] < p[0] * tan_t
        })
        .map(|u| (u, 0.0))
        .collect();
    if starts.is_empty() {
        out.push("no source nodes in the lower half-sector".into());
        return Ok(false);
    }
    let field = g.dijkstra(&starts, None);
    let shell_gap = 8.0 * (2.0f64).powi(-lvl);
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut kmax: f64 = 0.0;
    let mut kmax_z = [0.0, 0.0];
    let mut used = 0usize;
    let mut attempts = 0usize;
    while used < 200 && attempts < 100_000 {
        attempts += 1;
        let z = [rng.gen_range(0.0..4.0), rng.gen_range(0.0..4.0)];
        if z[1] <= 0.0 || !dom.inside(z) || dom.dist_gamma(z) < shell_gap {
            continue;
        }
        match qh_from_field(&g, &dom, &field, z) {
            Some(k) if k.is_finite() => {
                if k > kmax {
                    kmax = k;
                    kmax_z = z;
                }
                used += 1;
            }
            _ => return Ok(false),
        }
    }
    let bound = 2.0 * (2.0 + 1.0 / tan_t) + 0.5;
    let pass = used == 200 && kmax <= bound;
    out.push(format!(
        "{} upper-quadrant probes, max qhdist to lower half-sector {:.4} at ({:.3},{:.3})",
        used, kmax, kmax_z[0], kmax_z[1]
    ));
    out.push(format!("claimed bound 2(2+1/tan {:.4}) + 0.5 = {:.4}", theta, bound));
    ctx.note("c3/sector_k", kmax);
    Ok(pass)
}

// Integer stability constants measured over the common region: cubes that
// only exist because the truncation window was enlarged are new territory,
// not drift, so the wide-window comparison restricts every count to sources
// contained in the base window. For runs whose window IS the base window the
// restriction is vacuous.
fn restricted_ints(pipe: &ReflectPipeline, base: &BoxRegion<2>, grid_n: usize) -> [i64; 4] {
    let contained = |q: &crate::cube::DyadicCube<2>| -> bool {
        let lo = q.lo();
        let hi = q.hi();
        (0..2).all(|a| lo[a] >= base.lo[a] - 1e-12 && hi[a] <= base.hi[a] + 1e-12)
    };
    let mut pre: BTreeMap<u32, i64> = BTreeMap::new();
    for (&j, &t) in &pipe.refl.map {
        if contained(&pipe.wext.cubes[j as usize]) {
            *pre.entry(t).or_insert(0) += 1;
        }
    }
    let c_pre = pre.values().copied().max().unwrap_or(0);
    let mut fjk_len = 0i64;
    for (&(j, k), ch) in &pipe.fams.fjk {
        if contained(&pipe.wext.cubes[j as usize]) && contained(&pipe.wext.cubes[k as usize]) {
            fjk_len = fjk_len.max(ch.len() as i64);
        }
    }
    let mut fp_len = 0i64;
    for (&j, ch) in &pipe.fams.fp {
        if contained(&pipe.wext.cubes[j as usize]) {
            fp_len = fp_len.max(ch.len() as i64);
        }
    }
    // overlap of doubled chain envelopes, stamped on a fixed lattice over the
    // base window so every run samples identical positions
    let lo = base.lo;
    let hx = (base.hi[0] - lo[0]) / grid_n as f64;
    let hy = (base.hi[1] - lo[1]) / grid_n as f64;
    let mut counts = vec![0u32; grid_n * grid_n];
    let mut stamped = vec![u32::MAX; grid_n * grid_n];
    let mut by_j: BTreeMap<u32, Vec<u32>> = BTreeMap::new();
    for ((j, _), chain) in &pipe.fams.fjk {
        if contained(&pipe.wext.cubes[*j as usize]) {
            by_j.entry(*j).or_default().extend(chain.iter().copied());
        }
    }
    for (j, chain) in &pipe.fams.fp {
        if contained(&pipe.wext.cubes[*j as usize]) {
            by_j.entry(*j).or_default().extend(chain.iter().copied());
        }
    }
    for (j, cubes) in &by_j {
        for &s in cubes {
            let (dlo, dhi) = pipe.wgam.cubes[s as usize].dilated(2.0);
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
                    if stamped[cell] != *j {
                        stamped[cell] = *j;
                        counts[cell] += 1;
                    }
                }
            }
        }
    }
    let max_overlap = counts.iter().copied().max().unwrap_or(0) as i64;
    [c_pre, max_overlap, fjk_len, fp_len]
}

// criterion 4: reflection totality and constant stability under a deeper
// Whitney level and a doubled window.
fn c4_reflection(ctx: &mut Ctx, out: &mut Vec<String>) -> Result<bool, SobexError> {
    let mut pass = true;
    for (dname, build) in [
        ("halfplane", halfplane as fn(HalfPlaneSplit, i32) -> DomainSpec),
        ("sector", |_s, m| sector(m)),
    ] {
        let runs = [
            ("base level 8", build(HalfPlaneSplit::AllGamma, 2), 8),
            ("deep level 9", build(HalfPlaneSplit::AllGamma, 2), 9),
            ("wide window x2", build(HalfPlaneSplit::AllGamma, 3), 8),
        ];
        let base_box = runs[0].1.window;
        let mut certs: Vec<(&str, ReflectCertificate, [i64; 4])> = Vec::new();
        for (rname, dom, lvl) in &runs {
            let pipe = run_reflection_pipeline(dom, *lvl, ReflectParams::empirical())?;
            if !pipe.refl.failures.is_empty() {
                out.push(format!(
                    "{dname} {rname}: {} reflection failures",
                    pipe.refl.failures.len()
                ));
                pass = false;
                continue;
            }
            // totality: every exterior-family cube has a reflected target
            if pipe.refl.map.len() != pipe.class.we.len() {
                out.push(format!(
                    "{dname} {rname}: reflection map covers {}/{} cubes",
                    pipe.refl.map.len(),
                    pipe.class.we.len()
                ));
                pass = false;
            }
            // monotone diameters across the whole map
            let mut diam_bad = 0usize;
            for (&j, &t) in &pipe.refl.map {
                let q = &pipe.wext.cubes[j as usize];
                let r = &pipe.wgam.cubes[t as usize];
                if r.diam() < q.diam() - 1e-12 {
                    diam_bad += 1;
                }
            }
            if diam_bad > 0 {
                out.push(format!("{dname} {rname}: {diam_bad} shrinking reflections"));
                pass = false;
            }
            let cert = pipe.certificate(dom, 96);
            if !cert.failures.is_empty() {
                out.push(format!("{dname} {rname}: {} certificate failures", cert.failures.len()));
                pass = false;
            }
            let ints = restricted_ints(&pipe, &base_box, 96);
            out.push(format!(
                "{dname} {rname}: we {} c_refl {:.3} c_pre {} overlap {} fjk_len {} fp_len {} k1 {:.3} k2 {:.3}",
                cert.we_count, cert.c_refl, ints[0], ints[1], ints[2], ints[3], cert.k1, cert.k2
            ));
            certs.push((rname, cert, ints));
        }
        if certs.len() == 3 {
            let (_, base, base_ints) = &certs[0];
            for (rname, c, c_ints) in &certs[1..] {
                for (i, what) in ["c_pre", "max_overlap", "fjk_max_len", "fp_max_len"]
                    .into_iter()
                    .enumerate()
                {
                    if base_ints[i] != c_ints[i] {
                        out.push(format!(
                            "{dname} {rname}: {what} moved {} -> {}",
                            base_ints[i], c_ints[i]
                        ));
                        pass = false;
                    }
                }
                let ratios = [
                    ("c_refl", base.c_refl, c.c_refl),
                    ("c_diam_max", base.c_diam_max, c.c_diam_max),
                    ("c_dist_max", base.c_dist_max, c.c_dist_max),
                    ("k1", base.k1, c.k1),
                    ("k2", base.k2, c.k2),
                ];
                for (what, a, b) in ratios {
                    if !(a.is_finite() && b.is_finite()) || (b - a).abs() > 0.20 * a.abs().max(1e-12) {
                        out.push(format!("{dname} {rname}: {what} drifted {a:.4} -> {b:.4}"));
                        pass = false;
                    }
                }
            }
            ctx.note(&format!("c4/{dname}/c_refl"), base.c_refl);
            ctx.note(&format!("c4/{dname}/c_pre"), base_ints[0] as f64);
            ctx.note(&format!("c4/{dname}/max_overlap"), base_ints[1] as f64);
            ctx.note(&format!("c4/{dname}/k1"), base.k1);
            ctx.note(&format!("c4/{dname}/k2"), base.k2);
        } else {
            pass = false;
        }
    }
    Ok(pass)
}

// criterion 5: projection property, linearity, stability, Poincare drift,
// and the sub-box norm comparison.
fn c5_polynomials(ctx: &mut Ctx, out: &mut Vec<String>) -> Result<bool, SobexError> {
    let mut pass = true;
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    // (a) projection reproduces polynomials of the target degree
    let mut worst_repro: f64 = 0.0;
    for _ in 0..200 {
        let level = rng.gen_range(-1..=3);
        let q = crate::cube::DyadicCube::<2>::new(level, [rng.gen_range(-8..8), rng.gen_range(-8..8)]);
        let degree = rng.gen_range(0..=2usize);
        let mut target = CubePolynomial::zero(q.clone(), degree);
        for c in &mut target.coeffs {
            *c = rng.gen_range(-1.0..1.0);
        }
        let back = project(&|x| target.eval(x), &q, degree);
        for (a, b) in back.coeffs.iter().zip(&target.coeffs) {
            worst_repro = worst_repro.max((a - b).abs());
        }
    }
    pass &= worst_repro <= 1e-9;
    out.push(format!("projection property: worst coefficient error {worst_repro:.2e} over 200 random polynomials"));
    // (b) linearity of the projection
    let battery = smooth_battery();
    let mut worst_lin: f64 = 0.0;
    for _ in 0..100 {
        let level = rng.gen_range(-1..=2);
        let q = crate::cube::DyadicCube::<2>::new(level, [rng.gen_range(-4..4), rng.gen_range(-4..4)]);
        let a = rng.gen_range(-2.0..2.0);
        let b = rng.gen_range(-2.0..2.0);
        let pf = project(&|x| battery[0].eval(x), &q, 2);
        let pg = project(&|x| battery[1].eval(x), &q, 2);
        let pc = project(&|x| a * battery[0].eval(x) + b * battery[1].eval(x), &q, 2);
        for i in 0..pc.coeffs.len() {
            worst_lin = worst_lin.max((pc.coeffs[i] - a * pf.coeffs[i] - b * pg.coeffs[i]).abs());
        }
    }
    pass &= worst_lin <= 1e-10;
    out.push(format!("projection linearity: worst coefficient error {worst_lin:.2e}"));
    // (c) projection stability in L^p
    let mut stability: f64 = 0.0;
    for level in [0, 1, 2] {
        for anchor in [[0i64, 0i64], [1, 1], [-2, 1]] {
            let q = crate::cube::DyadicCube::<2>::new(level, anchor);
            for f in &battery {
                let proj = project(&|x| f.eval(x), &q, 1);
                for alpha in [[0usize, 0usize], [1, 0], [0, 1]] {
                    for p in [2.0, 4.0] {
                        let num = box_lp_norm(&|x| proj.deriv(x, alpha), q.lo(), q.hi(), p, 64);
                        let den = box_lp_norm(&|x| f.deriv(x, alpha), q.lo(), q.hi(), p, 64);
                        if den > 1e-12 {
                            stability = stability.max(num / den);
                        }
                    }
                }
            }
        }
    }
    pass &= stability.is_finite() && stability > 0.0;
    out.push(format!("projection stability constant {stability:.4}"));
    ctx.note("c5/proj_stability", stability);
    // (d) Poincare ratio drift across three dyadic scales, per battery entry
    let mut worst_drift: f64 = 0.0;
    for f in &battery {
        let mut vals = Vec::new();
        for level in 2..=4 {
            let q = crate::cube::DyadicCube::<2>::new(level, [1, 1]);
            if let Some(r) = poincare_check(f, &q, None, 1, 1, [0, 0], 2.0).ratio() {
                vals.push(r);
            }
        }
        if vals.len() == 3 {
            let lo = vals.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = vals.iter().cloned().fold(0.0f64, f64::max);
            let drift = hi / lo - 1.0;
            worst_drift = worst_drift.max(drift);
            if drift > 0.20 {
                out.push(format!("poincare drift {drift:.3} for {}: {vals:?}", f.name));
                pass = false;
            }
        } else {
            pass = false;
        }
    }
    out.push(format!("poincare scale drift max {worst_drift:.4} across levels 2..4"));
    let pc = poincare_battery_constant(1, 2.0, &mut rng, 12);
    pass &= pc.is_finite() && pc > 0.0;
    out.push(format!("poincare battery constant {pc:.4}"));
    ctx.note("c5/poincare_const", pc);
    // (e) norm comparison on quarter-measure sub-boxes
    let q = crate::cube::DyadicCube::<2>::new(0, [0, 0]);
    let mut worst_cmp: f64 = 0.0;
    for _ in 0..1000 {
        let mut poly = CubePolynomial::zero(q.clone(), 2);
        for c in &mut poly.coeffs {
            *c = rng.gen_range(-1.0..1.0);
        }
        let ox = rng.gen_range(0.0..0.5);
        let oy = rng.gen_range(0.0..0.5);
        match norm_comparison_check(&poly, &q, [ox, oy], [ox + 0.5, oy + 0.5], 2.0, 0.25) {
            Ok(r) => worst_cmp = worst_cmp.max(r),
            Err(_) => pass = false,
        }
    }
    pass &= worst_cmp.is_finite() && worst_cmp >= 1.0;
    // the hypothesis guard must reject an undersized sub-box
    let mut c0 = CubePolynomial::zero(q.clone(), 1);
    c0.coeffs[0] = 1.0;
    pass &= norm_comparison_check(&c0, &q, [0.0, 0.0], [0.4, 0.4], 2.0, 0.25).is_err();
    out.push(format!("norm comparison at kappa=1/4: worst ratio {worst_cmp:.4} over 1000 polynomials"));
    ctx.note("c5/norm_comparison", worst_cmp);
    Ok(pass)
}

struct LinComb<'a> {
    a: f64,
    f: &'a dyn AnalyticField,
    b: f64,
    g: &'a dyn AnalyticField,
}

impl AnalyticField for LinComb<'_> {
    fn deriv(&self, p: [f64; 2], beta: [usize; 2]) -> f64 {
        self.a * self.f.deriv(p, beta) + self.b * self.g.deriv(p, beta)
    }
}

// criterion 6: node identity on the domain, vanishing near D, linearity,
// and the partition sum on covered exterior nodes.
fn c6_extension(ctx: &mut Ctx, out: &mut Vec<String>) -> Result<bool, SobexError> {
    let mut pass = true;
    let grid = ctx.fid.node_grid;
    for dom in [halfplane(HalfPlaneSplit::PositiveGamma, 2), sector(2)] {
        let pipe = extension_pipeline(&dom, 6)?;
        let mut fs: Vec<TestFunction> = Vec::new();
        for n_gap in [8usize, 32] {
            fs.extend(profile_battery().into_iter().map(|pr| make_test_function(&dom, pr, n_gap, 1)));
        }
        let mut node_bad = 0usize;
        let mut near_d_bad = 0usize;
        let mut near_d_worst: f64 = 0.0;
        let mut nodes_inside = 0usize;
        let mut nodes_near_d = 0usize;
        for f in &fs {
            // the support gap of this battery member; the vanishing band is
            // its open half: the measured support edge passes exactly
            // through dist_D = gap/2 at the admission crossover column
            let half_gap = 0.5 / f.n as f64;
            let ext = build_extension(&dom, &pipe, f, 1)?;
            for ix in 0..=grid {
                let x = dom.window.lo[0] + dom.window.side(0) * ix as f64 / grid as f64;
                for iy in 0..=grid {
                    let y = dom.window.lo[1] + dom.window.side(1) * iy as f64 / grid as f64;
                    let p = [x, y];
                    let class = dom.classify(p, dom.tol());
                    if class == PointClass::Interior {
                        nodes_inside += 1;
                        let (v, _) = ext.eval_classified(p);
                        if v != f.eval(p) {
                            node_bad += 1;
                        }
                    }
                    if !dom.dpart.is_empty() && dom.dist_d(p) < half_gap && class != PointClass::OnD {
                        nodes_near_d += 1;
                        let v = ext.eval(p).abs();
                        near_d_worst = near_d_worst.max(v);
                        if v > 1e-12 {
                            near_d_bad += 1;
                        }
                    }
                }
            }
        }
        pass &= node_bad == 0 && near_d_bad == 0;
        out.push(format!(
            "{}: {} interior node evals exact ({} mismatches), |Ef| near D <= {:.1e} on {} nodes ({} over 1e-12)",
            dom.name,
            nodes_inside,
            node_bad,
            near_d_worst,
            nodes_near_d,
            near_d_bad
        ));
        // linearity at sampled points
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let e0 = build_extension(&dom, &pipe, &fs[0], 1)?;
        let e3 = build_extension(&dom, &pipe, &fs[3], 1)?;
        let combo = LinComb { a: 0.7, f: &fs[0], b: -1.3, g: &fs[3] };
        let ec = build_extension(&dom, &pipe, &combo, 1)?;
        let mut pts = sample_covered_exterior(&dom, &pipe, &mut rng, 200);
        let mut guard = 0;
        while pts.len() < 400 && guard < 40_000 {
            guard += 1;
            let p = [
                rng.gen_range(dom.window.lo[0]..dom.window.hi[0]),
                rng.gen_range(dom.window.lo[1]..dom.window.hi[1]),
            ];
            if dom.inside(p) {
                pts.push(p);
            }
        }
        let mut worst_lin: f64 = 0.0;
        for &p in &pts {
            let want = 0.7 * e0.eval(p) - 1.3 * e3.eval(p);
            worst_lin = worst_lin.max((ec.eval(p) - want).abs());
        }
        pass &= worst_lin <= 1e-10;
        out.push(format!("{}: linearity error {worst_lin:.2e} over {} points", dom.name, pts.len()));
        // partition of unity on covered exterior points
        let mut worst_pou: f64 = 0.0;
        let mut covered = 0usize;
        let samples = sample_covered_exterior(&dom, &pipe, &mut rng, 500);
        for &p in &samples {
            let active = e0.pou.active_at(p);
            let on_cube = active.iter().any(|&j| {
                let q = &e0.pou.wext.cubes[j as usize];
                (0..2).all(|d| q.lo()[d] <= p[d] && p[d] <= q.hi()[d])
            });
            if !on_cube {
                continue;
            }
            covered += 1;
            let total: f64 = active.iter().map(|&j| e0.pou.phi(j, p, &active)).sum();
            worst_pou = worst_pou.max((total - 1.0).abs());
        }
        pass &= covered >= 100 && worst_pou <= 1e-10;
        out.push(format!(
            "{}: partition sum |sum phi - 1| <= {worst_pou:.2e} on {covered} covered nodes",
            dom.name
        ));
    }
    Ok(pass)
}

// W^{l,p} power-sum sweep shared across several p exponents: one classify
// pass per cell, accumulated for each p. Mirrors the cell and stencil logic
// of `sobolev_norm` (order 0 at midpoints, order 1 on the stratified
// stencil) and returns the raw power sums per (p, order) so the caller can
// combine them into seminorms or cumulative Sobolev norms.
fn multi_p_power_sums(
    g: &dyn AnalyticField,
    dom: &DomainSpec,
    wext: Option<&WhitneyDecomposition<2>>,
    region: NormRegion,
    ps: &[f64],
    grid_n: usize,
) -> Vec<[f64; 2]> {
    let window = &dom.window;
    let hx = window.side(0) / grid_n as f64;
    let hy = window.side(1) / grid_n as f64;
    let cell = hx * hy;
    let mut acc = vec![[0.0f64; 2]; ps.len()];
    let tol = dom.tol();
    for ix in 0..grid_n {
        let x = window.lo[0] + (ix as f64 + 0.5) * hx;
        for iy in 0..grid_n {
            let y = window.lo[1] + (iy as f64 + 0.5) * hy;
            let pt = [x, y];
            let class = dom.classify(pt, tol);
            let include = match class {
                PointClass::Interior => region != NormRegion::ExteriorOnly,
                PointClass::Exterior => {
                    if region == NormRegion::OmegaOnly {
                        false
                    } else if let Some(w) = wext {
                        !matches!(
                            w.locate(pt, dom.dist_closure(pt), tol),
                            CubeQuery::Unresolved
                        )
                    } else {
                        true
                    }
                }
                PointClass::OnGamma | PointClass::OnD => false,
            };
            if !include {
                continue;
            }
            let v0 = g.deriv(pt, [0, 0]).abs();
            for (pi, &p) in ps.iter().enumerate() {
                acc[pi][0] += v0.powf(p) * cell;
            }
            for &ox in &crate::extend::CELL_OFFSETS {
                let sx = window.lo[0] + (ix as f64 + ox) * hx;
                for &oy in &crate::extend::CELL_OFFSETS {
                    let sy = window.lo[1] + (iy as f64 + oy) * hy;
                    let sp = [sx, sy];
                    if dom.classify(sp, tol) != class {
                        continue;
                    }
                    for a in [[1usize, 0usize], [0, 1]] {
                        let v = g.deriv(sp, a).abs();
                        for (pi, &p) in ps.iter().enumerate() {
                            acc[pi][1] += v.powf(p) * cell * 0.25;
                        }
                    }
                }
            }
        }
    }
    acc
}

// criterion 7: operator-norm ratios (cumulative W^{l,p} norms per order),
// stable across the pinned grid triplet, plus the exact pure-Dirichlet
// identity.
fn c7_operator_norms(ctx: &mut Ctx, out: &mut Vec<String>) -> Result<bool, SobexError> {
    let mut pass = true;
    let ps = [1.0, 2.0, 4.0];
    let grids = [128usize, 256, 512];
    for dom in [halfplane(HalfPlaneSplit::PositiveGamma, 2), sector(2)] {
        let dname = if dom.name.contains("half") { "halfplane" } else { "sector" };
        let pipe = extension_pipeline(&dom, 6)?;
        let mut fs: Vec<TestFunction> = Vec::new();
        for n_gap in [8usize, 32] {
            fs.extend(profile_battery().into_iter().map(|pr| make_test_function(&dom, pr, n_gap, 1)));
        }
        let exts: Vec<ExtendedFunction<'_>> = fs
            .iter()
            .map(|f| build_extension(&dom, &pipe, f, 1))
            .collect::<Result<_, _>>()?;
        // ratio[grid][p][order], cumulative: order 1 is the full W^{1,p} norm
        let mut ratio = vec![[[0.0f64; 2]; 3]; grids.len()];
        for (gi, &grid) in grids.iter().enumerate() {
            for (f, ext) in fs.iter().zip(&exts) {
                let num = multi_p_power_sums(ext, &dom, Some(&pipe.wext), NormRegion::Window, &ps, grid);
                let den = multi_p_power_sums(f, &dom, None, NormRegion::OmegaOnly, &ps, grid);
                for pi in 0..ps.len() {
                    let mut num_sum = 0.0;
                    let mut den_sum = 0.0;
                    for m in 0..2 {
                        num_sum += num[pi][m];
                        den_sum += den[pi][m];
                        if den_sum > 1e-12 {
                            let r = (num_sum / den_sum).powf(1.0 / ps[pi]);
                            ratio[gi][pi][m] = ratio[gi][pi][m].max(r);
                        }
                    }
                }
            }
        }
        for (pi, &p) in ps.iter().enumerate() {
            for m in 0..2 {
                let vals: Vec<f64> = (0..grids.len()).map(|gi| ratio[gi][pi][m]).collect();
                let lo = vals.iter().cloned().fold(f64::INFINITY, f64::min);
                let hi = vals.iter().cloned().fold(0.0f64, f64::max);
                let drift = hi / lo - 1.0;
                let ok = vals.iter().all(|v| v.is_finite() && *v > 0.0) && drift <= 0.10;
                pass &= ok;
                out.push(format!(
                    "{dname} p={p} W^({m},p) ratios {:.4}/{:.4}/{:.4} drift {:.3} {}",
                    vals[0],
                    vals[1],
                    vals[2],
                    drift,
                    if ok { "ok" } else { "FAIL" }
                ));
                ctx.note(&format!("c7/{dname}/p{p}/l{m}"), vals[2]);
            }
        }
    }
    // pure Dirichlet: the extension is zero extension, ratio exactly one
    let disk = BuiltinDomain::PureDirichletDisk { radius: 1.0 }.domain_with_window(2);
    let pipe = extension_pipeline(&disk, 6)?;
    let fs: Vec<_> = profile_battery()
        .into_iter()
        .map(|pr| make_test_function(&disk, pr, 8, 1))
        .collect();
    let mut worst_dev: f64 = 0.0;
    let mut used = 0usize;
    for f in &fs {
        let ext = build_extension(&disk, &pipe, f, 1)?;
        let num = multi_p_power_sums(&ext, &disk, Some(&pipe.wext), NormRegion::Window, &[2.0], 128);
        let den = multi_p_power_sums(f, &disk, None, NormRegion::OmegaOnly, &[2.0], 128);
        if den[0][0] > 1e-12 {
            used += 1;
            worst_dev = worst_dev.max((num[0][0] / den[0][0] - 1.0).abs());
        }
    }
    pass &= used > 0 && worst_dev == 0.0;
    out.push(format!(
        "pure-dirichlet disk: order-0 ratio deviation {worst_dev:.1e} over {used} battery members (exact)"
    ));
    Ok(pass)
}

// Compactly supported C^2 tensor bump used as a far-field perturbation.
struct TensorBump {
    center: [f64; 2],
    rho: f64,
    amp: f64,
    ramp: Poly1,
}

impl TensorBump {
    fn axis(&self, u: f64, c: f64, m: usize) -> f64 {
        let w = 0.5 * self.rho;
        let lo = c - self.rho;
        let hi = c + self.rho;
        if u <= lo || u >= hi {
            return 0.0;
        }
        if u < lo + w {
            return self.ramp.deriv_at(m, (u - lo) / w) / w.powi(m as i32);
        }
        if u > hi - w {
            let v = self.ramp.deriv_at(m, (hi - u) / w) / w.powi(m as i32);
            return if m % 2 == 1 { -v } else { v };
        }
        if m == 0 {
            1.0
        } else {
            0.0
        }
    }
}

impl AnalyticField for TensorBump {
    fn deriv(&self, p: [f64; 2], beta: [usize; 2]) -> f64 {
        self.amp * self.axis(p[0], self.center[0], beta[0]) * self.axis(p[1], self.center[1], beta[1])
    }
}

struct SumField<'a> {
    base: &'a dyn AnalyticField,
    bump: &'a TensorBump,
}

impl AnalyticField for SumField<'_> {
    fn deriv(&self, p: [f64; 2], beta: [usize; 2]) -> f64 {
        self.base.deriv(p, beta) + self.bump.deriv(p, beta)
    }
}

// criterion 8: measured dependency dilation kappa, then invariance of Ef on
// B(x,r) under a perturbation supported outside B(x, kappa r).
fn c8_locality(ctx: &mut Ctx, out: &mut Vec<String>) -> Result<bool, SobexError> {
    let mut pass = true;
    let mut kappa_all: f64 = 0.0;
    let cases = [
        (
            halfplane(HalfPlaneSplit::AllGamma, 2),
            [[-2.2, 0.0], [-0.9, 0.0], [0.4, 0.0], [1.3, 0.0], [2.6, 0.0]],
        ),
        (sector(2), [[0.4, 0.0], [0.8, 0.0], [1.3, 0.0], [1.9, 0.0], [2.6, 0.0]]),
    ];
    for (dom, centers) in cases {
        let pipe = extension_pipeline(&dom, 6)?;
        let profile = profile_battery().swap_remove(1);
        let f = make_test_function(&dom, profile, 8, 1);
        let ext = build_extension(&dom, &pipe, &f, 1)?;
        let mut worst_diff: f64 = 0.0;
        let mut kappa_dom: f64 = 0.0;
        for &x in &centers {
            for r in [0.125, 0.0625] {
                // sample ball and measure the dependency footprint of Ef|B(x,r)
                let mut ball = Vec::new();
                for i in 0..=12 {
                    for j in 0..=12 {
                        let o = [-r + 2.0 * r * i as f64 / 12.0, -r + 2.0 * r * j as f64 / 12.0];
                        if o[0] * o[0] + o[1] * o[1] <= r * r {
                            ball.push([x[0] + o[0], x[1] + o[1]]);
                        }
                    }
                }
                let mut kdep: f64 = 1.0;
                for &y in &ball {
                    for j in ext.pou.active_at(y) {
                        if let Some(poly) = ext.polys.get(&j) {
                            let q = &poly.cube;
                            for cx in [q.lo()[0], q.hi()[0]] {
                                for cy in [q.lo()[1], q.hi()[1]] {
                                    let d = ((cx - x[0]).powi(2) + (cy - x[1]).powi(2)).sqrt();
                                    kdep = kdep.max(d / r);
                                }
                            }
                        }
                    }
                }
                kappa_dom = kappa_dom.max(kdep);
                // bump strictly outside B(x, kdep r), inside the domain below
                let c = [x[0], x[1] - (kdep + 1.5) * r];
                let bump = TensorBump { center: c, rho: 0.5 * r, amp: 0.5, ramp: smoothstep_poly(2) };
                if !dom.inside(c) || !dom.window.contains(c) {
                    out.push(format!("{}: bump center ({:.3},{:.3}) unusable", dom.name, c[0], c[1]));
                    pass = false;
                    continue;
                }
                let f2 = SumField { base: &f, bump: &bump };
                let ext2 = build_extension(&dom, &pipe, &f2, 1)?;
                for &y in &ball {
                    worst_diff = worst_diff.max((ext2.eval(y) - ext.eval(y)).abs());
                }
                // non-vacuity: the perturbation does change Ef elsewhere
                if (ext2.eval(c) - ext.eval(c)).abs() < 0.25 {
                    out.push(format!("{}: perturbation had no effect at its center", dom.name));
                    pass = false;
                }
            }
        }
        pass &= worst_diff <= 1e-12;
        out.push(format!(
            "{}: kappa {:.3}, worst |Ef' - Ef| on probe balls {:.1e} over 5 centers x 2 radii",
            dom.name, kappa_dom, worst_diff
        ));
        kappa_all = kappa_all.max(kappa_dom);
    }
    ctx.note("c8/kappa", kappa_all);
    Ok(pass)
}

// criterion 9: counterexample norm scaling and lower-bound slopes.
fn c9_blowup(ctx: &mut Ctx, out: &mut Vec<String>) -> Result<bool, SobexError> {
    let mut pass = true;
    let radii: Vec<f64> = (3..=8).map(|i| (2.0f64).powi(-i)).collect();
    for (alpha, p) in [(2.0, 2.0), (3.0, 2.0), (2.0, 4.0)] {
        let rows = cusp_blowup_experiment(alpha, p, &radii);
        let env = blowup_envelope(&rows);
        let slope = blowup_slope(&rows);
        let pprime = p / (p - 1.0);
        let want = -(alpha - 1.0) / pprime;
        let ok = env <= 4.0 && (slope - want).abs() <= 0.1 && rows.last().unwrap().lower_bound > rows[0].lower_bound;
        pass &= ok;
        out.push(format!(
            "alpha={alpha} p={p}: envelope {env:.3}, slope {slope:.4} vs {want:.4} {}",
            if ok { "ok" } else { "FAIL" }
        ));
        ctx.note(&format!("c9/slope_a{alpha}p{p}"), slope);
    }
    let rows = cusp_blowup_experiment(1.0, 2.0, &radii);
    let slope = blowup_slope(&rows);
    pass &= slope.abs() <= 0.1;
    out.push(format!("alpha=1 control: slope {slope:.4} (flat)"));
    Ok(pass)
}

// criterion 10: the Dirichlet disk certifies cleanly with eps = 1; the
// interior cusp fails with a concrete witness.
fn c10_certificates(ctx: &mut Ctx, out: &mut Vec<String>) -> Result<bool, SobexError> {
    let mut pass = true;
    let disk = BuiltinDomain::PureDirichletDisk { radius: 1.0 }.domain_with_window(2);
    let cert = check_assumption(&disk, f64::INFINITY, 60, 5, 6)?;
    let disk_ok = cert.pass && cert.eps_meas == 1.0 && cert.k_meas == 0.0;
    pass &= disk_ok;
    out.push(format!(
        "dirichlet disk: pass={} eps={} k={} ({} pairs)",
        cert.pass, cert.eps_meas, cert.k_meas, cert.pairs_evaluated
    ));
    let cusp = BuiltinDomain::CuspAtZero { alpha: 2.0 }.domain_with_window(2);
    let cert = check_assumption(&cusp, f64::INFINITY, ctx.fid.cert_pairs, 7, 8)?;
    let witness = cert
        .lc
        .witness
        .as_ref()
        .or(cert.cc.witness.as_ref())
        .map(|w| format!("x=({:.4},{:.4}) y=({:.4},{:.4}) value {:.4}", w.x[0], w.x[1], w.y[0], w.y[1], w.value));
    let cusp_ok = !cert.pass && (!cert.lc.pass || !cert.cc.pass) && witness.is_some();
    pass &= cusp_ok;
    out.push(format!(
        "interior cusp alpha=2: pass={} eps={:.4}; witness {}",
        cert.pass,
        cert.eps_meas,
        witness.unwrap_or_else(|| "MISSING".into())
    ));
    out.push(format!("cusp note: {}", cert.note));
    Ok(pass)
}

// criterion 11: Lipschitz-seminorm bound for the extension, linear decay of
// boundary mismatches, and the composed reference-domain extension.
fn c11_boundary(ctx: &mut Ctx, out: &mut Vec<String>) -> Result<bool, SobexError> {
    let mut pass = true;
    // (a) max-gradient ratio over the cutoff battery
    let dom = halfplane(HalfPlaneSplit::PositiveGamma, 2);
    let pipe = extension_pipeline(&dom, 6)?;
    let mut lip_ratio: f64 = 0.0;
    for profile in profile_battery() {
        let f = make_test_function(&dom, profile, 8, 1);
        let ext = build_extension(&dom, &pipe, &f, 1)?;
        let num = sobolev_norm(&ext, &dom, Some(&pipe.wext), NormRegion::Window, 1, f64::INFINITY, 128);
        let den = sobolev_norm(&f, &dom, None, NormRegion::OmegaOnly, 1, f64::INFINITY, 128);
        if den.per_order[1] > 1e-12 {
            lip_ratio = lip_ratio.max(num.per_order[1] / den.per_order[1]);
        }
    }
    pass &= lip_ratio.is_finite() && lip_ratio >= 1.0 - 1e-9;
    out.push(format!("lipschitz seminorm ratio {lip_ratio:.4} over the cutoff battery"));
    ctx.note("c11/lip_ratio", lip_ratio);
    // (b) boundary mismatch decay on the half-plane. Approach distances
    // below the Whitney truncation scale land in the collar where the
    // extension has already been faded to zero, so the decay fit stops at
    // eight finest cube sides; a deeper pipeline makes room for five dyadic
    // steps above that floor.
    let probe_level = 8;
    let fit_floor = 8.0 * (2.0f64).powi(-probe_level);
    let domg = halfplane(HalfPlaneSplit::AllGamma, 2);
    let pipeg = extension_pipeline(&domg, probe_level)?;
    let profile = profile_battery().swap_remove(4);
    let f = make_test_function(&domg, profile, 8, 1);
    let ext = build_extension(&domg, &pipeg, &f, 1)?;
    let probes = [([0.5, 0.0], [0.0, 1.0]), ([-1.25, 0.0], [0.0, 1.0]), ([1.5, 0.0], [0.0, 1.0])];
    let rows = lipschitz_continuity_probe(&ext, &probes, 1, 8);
    let mut probe_ratio: f64 = 0.0;
    for row in &rows {
        let pts: Vec<(f64, f64)> = row
            .mismatches
            .iter()
            .filter(|(d, diff)| *d >= fit_floor && *diff > 1e-300)
            .map(|&(d, diff)| (d.ln(), diff.ln()))
            .collect();
        if pts.len() < 3 {
            out.push("probe row with too few usable mismatches".into());
            pass = false;
            continue;
        }
        let xs: Vec<f64> = pts.iter().map(|p| p.0).collect();
        let ys: Vec<f64> = pts.iter().map(|p| p.1).collect();
        let slope = ls_slope(&xs, &ys);
        if slope < 0.8 {
            out.push(format!("probe decay slope {slope:.3} below linear"));
            pass = false;
        }
        for &(d, diff) in &row.mismatches {
            if d >= fit_floor {
                probe_ratio = probe_ratio.max(diff / d);
            }
        }
    }
    pass &= probe_ratio.is_finite() && probe_ratio > 0.0;
    out.push(format!("boundary probes: {} rows, max mismatch/distance {probe_ratio:.4}", rows.len()));
    ctx.note("c11/lip_probe_ratio", probe_ratio);
    // (c) composed extension through the reference domain
    let ec = BuiltinDomain::ExteriorCusp { theta: FRAC_PI_4 };
    let domc = ec.domain_with_window(2);
    let refd = ec.reference_domain(2).expect("exterior cusp has a reference domain");
    let pipe_ref = extension_pipeline(&refd, 6)?;
    let profile = profile_battery().swap_remove(9);
    let fc = make_test_function(&domc, profile, 8, 1);
    let zx = ZeroExtended { f: &fc, dom: &domc };
    let comp = compose_reference(&domc, &refd, &pipe_ref, &fc, &zx, 1)?;
    let num = sobolev_norm(&comp, &refd, Some(&pipe_ref.wext), NormRegion::Window, 1, 2.0, 128);
    let den = sobolev_norm(&fc, &domc, None, NormRegion::OmegaOnly, 1, 2.0, 128);
    let ratio = if den.value > 1e-12 { num.value / den.value } else { f64::INFINITY };
    pass &= ratio.is_finite() && ratio >= 1.0 - 1e-9;
    out.push(format!("exterior cusp composed W^(1,2) ratio {ratio:.4}"));
    ctx.note("c11/exterior_cusp_ratio", ratio);
    Ok(pass)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn bump_derivatives_match_finite_differences() {
        let b = TensorBump { center: [0.5, -0.25], rho: 0.4, amp: 0.8, ramp: smoothstep_poly(2) };
        let h = 1e-6;
        for p in [[0.35, -0.3], [0.5, -0.25], [0.62, -0.12], [0.2, -0.25]] {
            let dx = (b.eval([p[0] + h, p[1]]) - b.eval([p[0] - h, p[1]])) / (2.0 * h);
            assert_relative_eq!(b.deriv(p, [1, 0]), dx, epsilon = 1e-5, max_relative = 1e-4);
            let dy = (b.eval([p[0], p[1] + h]) - b.eval([p[0], p[1] - h])) / (2.0 * h);
            assert_relative_eq!(b.deriv(p, [0, 1]), dy, epsilon = 1e-5, max_relative = 1e-4);
        }
        // compact support: exactly zero outside [c - rho, c + rho]^2
        assert_eq!(b.eval([0.91, -0.25]), 0.0);
        assert_eq!(b.eval([0.5, 0.16]), 0.0);
        assert_eq!(b.deriv([0.95, 0.2], [1, 0]), 0.0);
        // plateau value
        assert_relative_eq!(b.eval([0.5, -0.25]), 0.8, epsilon = 1e-12);
    }

    #[test]
    fn report_formatting_round_trip() {
        let report = AcceptanceReport {
            suite: Suite::Fast,
            criteria: vec![
                CriterionResult {
                    id: 1,
                    name: "whitney-invariants",
                    pass: true,
                    elapsed: Duration::from_millis(1500),
                    budget: Duration::from_secs(60),
                    details: vec!["all clean".into()],
                },
                CriterionResult {
                    id: 2,
                    name: "qh-metric",
                    pass: false,
                    elapsed: Duration::from_secs(3),
                    budget: Duration::from_secs(120),
                    details: vec!["rel err 0.05 > 0.03".into()],
                },
            ],
            golden: vec![
                GoldenRow { key: "c3/sector_k".into(), measured: 5.0, pinned: Some(5.2), ok: true },
                GoldenRow { key: "c8/kappa".into(), measured: 9.0, pinned: None, ok: true },
            ],
        };
        let text = report.to_text();
        assert!(text.contains("criterion 01 whitney-invariants"));
        assert!(text.contains("pass"));
        assert!(text.contains("FAIL"));
        assert!(text.contains("result: FAIL (1/2 criteria, golden ok)"));
        let junit = report.to_junit();
        assert!(junit.contains("<testsuite name=\"acceptance-fast\" tests=\"3\" failures=\"1\">"));
        assert!(junit.contains("<testcase name=\"c01-whitney-invariants\""));
        assert!(junit.contains("<failure message=\"rel err 0.05 &gt; 0.03\"/>"));
        assert!(report.golden_pass());
        assert!(!report.all_pass());
        let table = report.golden_table();
        assert!(table.contains("(\"c3/sector_k\", 5.000000),"));
    }

    #[test]
    fn golden_drift_detection() {
        let row = |m: f64, g: f64| GoldenRow {
            key: "k".into(),
            measured: m,
            pinned: Some(g),
            ok: (m - g).abs() <= GOLDEN_REL_TOL * g.abs().max(1e-12),
        };
        assert!(row(1.1, 1.0).ok);
        assert!(!row(1.3, 1.0).ok);
        assert!(!row(f64::NAN, 1.0).ok);
    }

    #[test]
    fn suite_fidelity_mapping() {
        let fast = Suite::Fast.fidelity();
        let full = Suite::Full.fidelity();
        assert_eq!(fast.whitney_level, 8);
        assert_eq!(full.whitney_level, 10);
        assert!(full.node_grid > fast.node_grid);
        assert!(full.cert_pairs > fast.cert_pairs);
    }

    #[test]
    #[ignore]
    fn dry_run_fast() {
        let report = run_acceptance(Suite::Fast);
        println!("{}", report.to_text());
        println!("{}", report.golden_table());
    }

    // Regeneration path for the pinned golden table: run with
    // `cargo test -p sobex --lib harness::tests::regenerate_golden_full --
    // --ignored --nocapture` and paste the printed table over `GOLDEN`.
    #[test]
    #[ignore]
    fn regenerate_golden_full() {
        let report = run_acceptance(Suite::Full);
        println!("{}", report.to_text());
        println!("{}", report.golden_table());
        assert!(report.criteria.iter().all(|c| c.pass), "criteria must pass before pinning");
    }
}
