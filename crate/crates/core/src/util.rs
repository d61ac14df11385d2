//! Small numeric helpers shared by the geometry and operator modules.

/// Binomial coefficient as f64 (arguments stay tiny here).
pub fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    let mut acc = 1.0_f64;
    for i in 0..k {
        acc = acc * (n - i) as f64 / (i + 1) as f64;
    }
    acc
}

/// Monomial coefficients of the smoothstep of order `n`: the unique
/// polynomial S with S(0)=0, S(1)=1 and vanishing derivatives up to order n
/// at both ends. Degree 2n+1. Returned as coefficients of u^(n+1..=2n+1).
pub fn smoothstep_coeffs(n: usize) -> Vec<f64> {
    // S_n(u) = u^{n+1} * sum_{i=0..n} C(n+i, i) C(2n+1, n-i) (-u)^i
    let mut full = vec![0.0; 2 * n + 2];
    for i in 0..=n {
        let c = binomial(n + i, i) * binomial(2 * n + 1, n - i);
        let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
        full[n + 1 + i] = sign * c;
    }
    full
}

/// A 1D polynomial in monomial form, with exact differentiation.
#[derive(Debug, Clone)]
pub struct Poly1 {
    /// coeffs[i] multiplies u^i
    pub coeffs: Vec<f64>,
}

impl Poly1 {
    pub fn new(coeffs: Vec<f64>) -> Self {
        Self { coeffs }
    }

    pub fn eval(&self, u: f64) -> f64 {
        let mut acc = 0.0;
        for &c in self.coeffs.iter().rev() {
            acc = acc * u + c;
        }
        acc
    }

    pub fn derivative(&self) -> Poly1 {
        if self.coeffs.len() <= 1 {
            return Poly1::new(vec![0.0]);
        }
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .skip(1)
            .map(|(i, &c)| i as f64 * c)
            .collect();
        Poly1::new(coeffs)
    }

    /// m-th derivative evaluated at u.
    pub fn deriv_at(&self, m: usize, u: f64) -> f64 {
        let mut p = self.clone();
        for _ in 0..m {
            p = p.derivative();
        }
        p.eval(u)
    }
}

/// Smoothstep of order n as a `Poly1` on [0,1].
pub fn smoothstep_poly(n: usize) -> Poly1 {
    Poly1::new(smoothstep_coeffs(n))
}

/// Gauss–Legendre nodes and weights on [-1, 1], computed by Newton iteration
/// on the Legendre recurrence. Accurate to machine precision for n <= 64.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        // Chebyshev-like initial guess.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            // Evaluate P_n and P_n' by recurrence.
            let mut p0 = 1.0;
            let mut p1 = x;
            if n == 1 {
                p1 = x;
            }
            let mut p = if n == 1 { p1 } else { 0.0 };
            if n >= 2 {
                for k in 2..=n {
                    p = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                    p0 = p1;
                    p1 = p;
                }
            } else {
                p0 = 1.0;
                p1 = x;
                p = p1;
            }
            dp = n as f64 * (x * p - p0) / (x * x - 1.0);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

/// Adaptive Simpson quadrature with relative tolerance.
pub fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, rel_tol: f64) -> f64 {
    fn simpson(fa: f64, fm: f64, fb: f64, a: f64, b: f64) -> f64 {
        (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    }
    #[allow(clippy::too_many_arguments)]
    fn rec(
        f: &dyn Fn(f64) -> f64,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = f(lm);
        let frm = f(rm);
        let left = simpson(fa, flm, fm, a, m);
        let right = simpson(fm, frm, fb, m, b);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            left + right + delta / 15.0
        } else {
            rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
                + rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
        }
    }
    if a == b {
        return 0.0;
    }
    let fa = f(a);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let fb = f(b);
    let whole = simpson(fa, fm, fb, a, b);
    let scale = whole.abs().max(1e-300);
    rec(f, a, b, fa, fm, fb, whole, rel_tol * scale, 24)
}

/// Least-squares slope of y against x.
pub fn ls_slope(xs: &[f64], ys: &[f64]) -> f64 {
    assert_eq!(xs.len(), ys.len());
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut num = 0.0;
    let mut den = 0.0;
    for (&x, &y) in xs.iter().zip(ys) {
        num += (x - mx) * (y - my);
        den += (x - mx) * (x - mx);
    }
    num / den
}

/// f64 wrapper ordered by `total_cmp`, for use in binary heaps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TotalF64(pub f64);

impl Eq for TotalF64 {}
impl PartialOrd for TotalF64 {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for TotalF64 {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.total_cmp(&other.0)
    }
}

/// Enumerate multi-indices alpha in d variables with |alpha| <= max_total,
/// in lexicographic order by (|alpha|, alpha). d <= 3 in practice.
pub fn multi_indices<const D: usize>(max_total: usize) -> Vec<[usize; D]> {
    let mut out = Vec::new();
    for total in 0..=max_total {
        let mut idx = [0usize; D];
        gen_rec::<D>(total, 0, &mut idx, &mut out);
    }
    out
}

fn gen_rec<const D: usize>(
    remaining: usize,
    axis: usize,
    idx: &mut [usize; D],
    out: &mut Vec<[usize; D]>,
) {
    if axis == D - 1 {
        idx[axis] = remaining;
        out.push(*idx);
        return;
    }
    for v in 0..=remaining {
        idx[axis] = v;
        gen_rec::<D>(remaining - v, axis + 1, idx, out);
    }
}

/// |alpha|
pub fn multi_order<const D: usize>(alpha: [usize; D]) -> usize {
    alpha.iter().sum()
}

/// Euclidean helpers over fixed-size points.
pub fn sub<const D: usize>(a: [f64; D], b: [f64; D]) -> [f64; D] {
    std::array::from_fn(|i| a[i] - b[i])
}

pub fn add<const D: usize>(a: [f64; D], b: [f64; D]) -> [f64; D] {
    std::array::from_fn(|i| a[i] + b[i])
}

pub fn scale<const D: usize>(a: [f64; D], s: f64) -> [f64; D] {
    std::array::from_fn(|i| a[i] * s)
}

pub fn norm<const D: usize>(a: [f64; D]) -> f64 {
    a.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn dist<const D: usize>(a: [f64; D], b: [f64; D]) -> f64 {
    norm(sub(a, b))
}

pub fn lerp<const D: usize>(a: [f64; D], b: [f64; D], t: f64) -> [f64; D] {
    std::array::from_fn(|i| a[i] + t * (b[i] - a[i]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn smoothstep_boundary_conditions() {
        for n in 0..=4 {
            let p = smoothstep_poly(n);
            assert_relative_eq!(p.eval(0.0), 0.0, epsilon = 1e-14);
            assert_relative_eq!(p.eval(1.0), 1.0, epsilon = 1e-12);
            for m in 1..=n {
                assert_relative_eq!(p.deriv_at(m, 0.0), 0.0, epsilon = 1e-12);
                assert_relative_eq!(p.deriv_at(m, 1.0), 0.0, epsilon = 1e-10);
            }
            // classic cubic case
            if n == 1 {
                assert_relative_eq!(p.eval(0.5), 0.5, epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn gauss_legendre_integrates_polynomials_exactly() {
        for n in 1..=8 {
            let (xs, ws) = gauss_legendre(n);
            // exact for degree 2n-1
            for deg in 0..(2 * n) {
                let quad: f64 = xs
                    .iter()
                    .zip(&ws)
                    .map(|(&x, &w)| w * x.powi(deg as i32))
                    .sum();
                let exact = if deg % 2 == 1 {
                    0.0
                } else {
                    2.0 / (deg as f64 + 1.0)
                };
                assert!(
                    (quad - exact).abs() < 1e-12,
                    "n={n} deg={deg} quad={quad} exact={exact}"
                );
            }
        }
    }

    #[test]
    fn simpson_log_integral() {
        // int_1^2 du/u = ln 2
        let v = adaptive_simpson(&|u| 1.0 / u, 1.0, 2.0, 1e-10);
        assert_relative_eq!(v, std::f64::consts::LN_2, epsilon = 1e-9);
    }

    #[test]
    fn slope_recovers_line() {
        let xs: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 3.25 * x - 1.0).collect();
        assert_relative_eq!(ls_slope(&xs, &ys), 3.25, epsilon = 1e-12);
    }

    #[test]
    fn multi_index_counts() {
        // d=2: number of alpha with |alpha| <= k is (k+1)(k+2)/2
        for k in 0..5 {
            let v = multi_indices::<2>(k);
            assert_eq!(v.len(), (k + 1) * (k + 2) / 2);
        }
        let v3 = multi_indices::<3>(2);
        assert_eq!(v3.len(), 10);
    }
}
