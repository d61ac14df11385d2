//! Analytic boundary primitives with exact point and box distances.
//!
//! Every primitive knows three things: distance from a point, a nearest
//! point realizing it, and the exact distance from an axis-aligned box.
//! Box distances matter because the Whitney acceptance rule compares
//! diam(Q) against dist(Q, F); doing that comparison with certified values
//! keeps the decomposition reproducible.

use crate::util::{dist, norm, sub};

const GOLDEN: f64 = 0.618_033_988_749_894_9;

/// Distance from a closed box to a point (0 inside).
pub fn box_point_dist(lo: [f64; 2], hi: [f64; 2], p: [f64; 2]) -> f64 {
    let mut s = 0.0;
    for i in 0..2 {
        let g = (lo[i] - p[i]).max(p[i] - hi[i]).max(0.0);
        s += g * g;
    }
    s.sqrt()
}

/// Max distance from box points to p (farthest corner).
pub fn box_point_maxdist(lo: [f64; 2], hi: [f64; 2], p: [f64; 2]) -> f64 {
    let mut s = 0.0;
    for i in 0..2 {
        let g = (p[i] - lo[i]).abs().max((hi[i] - p[i]).abs());
        s += g * g;
    }
    s.sqrt()
}

fn seg_point_dist(a: [f64; 2], b: [f64; 2], p: [f64; 2]) -> f64 {
    let ab = sub(b, a);
    let len2 = ab[0] * ab[0] + ab[1] * ab[1];
    if len2 == 0.0 {
        return dist(a, p);
    }
    let t = ((p[0] - a[0]) * ab[0] + (p[1] - a[1]) * ab[1]) / len2;
    let t = t.clamp(0.0, 1.0);
    dist([a[0] + t * ab[0], a[1] + t * ab[1]], p)
}

fn segments_intersect(a: [f64; 2], b: [f64; 2], c: [f64; 2], d: [f64; 2]) -> bool {
    fn orient(p: [f64; 2], q: [f64; 2], r: [f64; 2]) -> f64 {
        (q[0] - p[0]) * (r[1] - p[1]) - (q[1] - p[1]) * (r[0] - p[0])
    }
    let o1 = orient(a, b, c);
    let o2 = orient(a, b, d);
    let o3 = orient(c, d, a);
    let o4 = orient(c, d, b);
    if ((o1 > 0.0 && o2 < 0.0) || (o1 < 0.0 && o2 > 0.0))
        && ((o3 > 0.0 && o4 < 0.0) || (o3 < 0.0 && o4 > 0.0))
    {
        return true;
    }
    // collinear / endpoint contact
    let on = |p: [f64; 2], q: [f64; 2], r: [f64; 2], o: f64| {
        o == 0.0
            && r[0] >= p[0].min(q[0])
            && r[0] <= p[0].max(q[0])
            && r[1] >= p[1].min(q[1])
            && r[1] <= p[1].max(q[1])
    };
    on(a, b, c, o1) || on(a, b, d, o2) || on(c, d, a, o3) || on(c, d, b, o4)
}

fn seg_seg_dist(a: [f64; 2], b: [f64; 2], c: [f64; 2], d: [f64; 2]) -> f64 {
    if segments_intersect(a, b, c, d) {
        return 0.0;
    }
    seg_point_dist(a, b, c)
        .min(seg_point_dist(a, b, d))
        .min(seg_point_dist(c, d, a))
        .min(seg_point_dist(c, d, b))
}

/// Exact distance between a closed box and a segment.
pub fn box_seg_dist(lo: [f64; 2], hi: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    // endpoint inside the box -> contact
    if box_point_dist(lo, hi, a) == 0.0 || box_point_dist(lo, hi, b) == 0.0 {
        return 0.0;
    }
    let c00 = [lo[0], lo[1]];
    let c10 = [hi[0], lo[1]];
    let c01 = [lo[0], hi[1]];
    let c11 = [hi[0], hi[1]];
    let edges = [(c00, c10), (c10, c11), (c11, c01), (c01, c00)];
    let mut best = f64::INFINITY;
    for (p, q) in edges {
        best = best.min(seg_seg_dist(p, q, a, b));
        if best == 0.0 {
            return 0.0;
        }
    }
    best
}

/// Golden-section minimization of a unimodal bracket [a, b].
fn golden_min(f: &dyn Fn(f64) -> f64, mut a: f64, mut b: f64, iters: usize) -> (f64, f64) {
    let mut c = b - GOLDEN * (b - a);
    let mut d = a + GOLDEN * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    for _ in 0..iters {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - GOLDEN * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + GOLDEN * (b - a);
            fd = f(d);
        }
    }
    let t = 0.5 * (a + b);
    (t, f(t))
}

/// Global 1D minimization by dense sampling plus golden refinement of the
/// best bracket. Adequate for the curve-distance objectives used here,
/// which have at most a couple of local minima.
fn sampled_min(f: &dyn Fn(f64) -> f64, ts: &[f64]) -> (f64, f64) {
    let mut bi = 0;
    let mut bv = f64::INFINITY;
    for (i, &t) in ts.iter().enumerate() {
        let v = f(t);
        if v < bv {
            bv = v;
            bi = i;
        }
    }
    let a = if bi == 0 { ts[0] } else { ts[bi - 1] };
    let b = if bi + 1 == ts.len() { ts[bi] } else { ts[bi + 1] };
    let (t, v) = golden_min(f, a, b, 90);
    if v < bv {
        (t, v)
    } else {
        (ts[bi], bv)
    }
}

/// One analytic piece of a boundary set.
#[derive(Debug, Clone)]
pub enum Primitive {
    /// horizontal line {y = c}
    HLine { y: f64 },
    /// closed ray origin + t*dir, t >= 0, unit dir
    Ray { origin: [f64; 2], dir: [f64; 2] },
    /// circle of radius r about c
    Circle { center: [f64; 2], radius: f64 },
    /// {(t, -t^alpha) : t >= 0}
    PowerCurve { alpha: f64 },
    /// {(t, -t^-alpha) : t > 0}
    InvPowerCurve { alpha: f64 },
    /// a single point
    Point { at: [f64; 2] },
}

impl Primitive {
    pub fn dist(&self, p: [f64; 2]) -> f64 {
        match *self {
            Primitive::HLine { y } => (p[1] - y).abs(),
            Primitive::Ray { origin, dir } => {
                let v = sub(p, origin);
                let t = (v[0] * dir[0] + v[1] * dir[1]).max(0.0);
                dist(p, [origin[0] + t * dir[0], origin[1] + t * dir[1]])
            }
            Primitive::Circle { center, radius } => (dist(p, center) - radius).abs(),
            Primitive::PowerCurve { alpha } => self.curve_nearest(p, alpha, false).1,
            Primitive::InvPowerCurve { alpha } => self.curve_nearest(p, alpha, true).1,
            Primitive::Point { at } => dist(p, at),
        }
    }

    /// Point on the set realizing (approximately, for curves) the distance.
    pub fn nearest_point(&self, p: [f64; 2]) -> [f64; 2] {
        match *self {
            Primitive::HLine { y } => [p[0], y],
            Primitive::Ray { origin, dir } => {
                let v = sub(p, origin);
                let t = (v[0] * dir[0] + v[1] * dir[1]).max(0.0);
                [origin[0] + t * dir[0], origin[1] + t * dir[1]]
            }
            Primitive::Circle { center, radius } => {
                let v = sub(p, center);
                let n = norm(v);
                if n == 0.0 {
                    [center[0] + radius, center[1]]
                } else {
                    [center[0] + radius * v[0] / n, center[1] + radius * v[1] / n]
                }
            }
            Primitive::PowerCurve { alpha } => {
                let t = self.curve_nearest(p, alpha, false).0;
                [t, -t.powf(alpha)]
            }
            Primitive::InvPowerCurve { alpha } => {
                let t = self.curve_nearest(p, alpha, true).0;
                [t, -t.powf(-alpha)]
            }
            Primitive::Point { at } => at,
        }
    }

    fn curve_point(t: f64, alpha: f64, inv: bool) -> [f64; 2] {
        if inv {
            [t, -t.powf(-alpha)]
        } else {
            [t, -t.powf(alpha)]
        }
    }

    fn curve_params(p_hint: f64, alpha: f64, inv: bool) -> Vec<f64> {
        // Parameter grid covering everything that can be nearest to points
        // within a couple of window diameters of the origin.
        let reach = (4.0 * p_hint.abs()).max(64.0);
        let mut ts = Vec::with_capacity(200);
        if inv {
            // t small -> deep below; y = -t^-alpha = -reach at t = reach^(-1/alpha)
            let t_min = reach.powf(-1.0 / alpha) / 4.0;
            let t_max = reach;
            let n = 160;
            for i in 0..=n {
                let f = i as f64 / n as f64;
                ts.push(t_min * (t_max / t_min).powf(f));
            }
        } else {
            ts.push(0.0);
            let t_cap = reach.powf(1.0 / alpha).max(reach);
            let n = 160;
            for i in 1..=n {
                let f = i as f64 / n as f64;
                ts.push(t_cap * f * f); // quadratic clustering near 0
            }
        }
        ts
    }

    fn curve_nearest(&self, p: [f64; 2], alpha: f64, inv: bool) -> (f64, f64) {
        let ts = Self::curve_params(p[0].abs().max(p[1].abs()), alpha, inv);
        let f = |t: f64| dist(p, Self::curve_point(t, alpha, inv));
        sampled_min(&f, &ts)
    }

    /// Exact distance from a closed box for the flat primitives; for curves,
    /// a 1D minimization of the box-to-curve-point distance (tolerance well
    /// below 1e-10 in the returned distance).
    pub fn box_dist(&self, lo: [f64; 2], hi: [f64; 2]) -> f64 {
        match *self {
            Primitive::HLine { y } => (lo[1] - y).max(y - hi[1]).max(0.0),
            Primitive::Ray { origin, dir } => {
                // clip the ray to a segment long enough to contain the
                // minimizer: beyond the largest projection of box corners the
                // distance is increasing.
                let mut tmax = 0.0f64;
                for c in [
                    [lo[0], lo[1]],
                    [hi[0], lo[1]],
                    [lo[0], hi[1]],
                    [hi[0], hi[1]],
                ] {
                    let v = sub(c, origin);
                    tmax = tmax.max(v[0] * dir[0] + v[1] * dir[1]);
                }
                let tmax = tmax.max(0.0) + 1.0;
                let b = [origin[0] + tmax * dir[0], origin[1] + tmax * dir[1]];
                box_seg_dist(lo, hi, origin, b)
            }
            Primitive::Circle { center, radius } => {
                let dmin = box_point_dist(lo, hi, center);
                let dmax = box_point_maxdist(lo, hi, center);
                if radius >= dmin && radius <= dmax {
                    0.0
                } else {
                    (dmin - radius).max(radius - dmax)
                }
            }
            Primitive::PowerCurve { alpha } => {
                let hint = lo[0].abs().max(hi[0].abs()).max(lo[1].abs()).max(hi[1].abs());
                let ts = Self::curve_params(hint, alpha, false);
                let f = |t: f64| box_point_dist(lo, hi, Self::curve_point(t, alpha, false));
                sampled_min(&f, &ts).1
            }
            Primitive::InvPowerCurve { alpha } => {
                let hint = lo[0].abs().max(hi[0].abs()).max(lo[1].abs()).max(hi[1].abs());
                let ts = Self::curve_params(hint, alpha, true);
                let f = |t: f64| box_point_dist(lo, hi, Self::curve_point(t, alpha, true));
                sampled_min(&f, &ts).1
            }
            Primitive::Point { at } => box_point_dist(lo, hi, at),
        }
    }
}
