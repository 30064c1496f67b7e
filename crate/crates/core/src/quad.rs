//! Gauss-Legendre rules and panel integration with geometric grading toward
//! logarithmic singularities.

use std::ops::{Add, Mul};

/// Values that can be accumulated by the quadrature rules.
pub trait Acc: Copy + Default + Add<Output = Self> + Mul<f64, Output = Self> {}

impl<T: Copy + Default + Add<Output = T> + Mul<f64, Output = T>> Acc for T {}

/// Two integrals computed from one set of samples.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Pair(pub f64, pub f64);

impl Add for Pair {
    type Output = Pair;
    #[inline]
    fn add(self, o: Pair) -> Pair {
        Pair(self.0 + o.0, self.1 + o.1)
    }
}

impl Mul<f64> for Pair {
    type Output = Pair;
    #[inline]
    fn mul(self, k: f64) -> Pair {
        Pair(self.0 * k, self.1 * k)
    }
}

/// Positive nodes and weights of the 4-point rule on [-1, 1].
pub const GL4: [(f64, f64); 2] = [
    (0.33998104358485626, 0.6521451548625461),
    (0.8611363115940526, 0.34785484513745385),
];

/// Positive nodes and weights of the 8-point rule on [-1, 1].
pub const GL8: [(f64, f64); 4] = [
    (0.18343464249564978, 0.36268378337836177),
    (0.525532409916329, 0.31370664587788705),
    (0.7966664774136267, 0.22238103445337434),
    (0.9602898564975362, 0.10122853629037669),
];

/// Positive nodes and weights of the 16-point rule on [-1, 1].
pub const GL16: [(f64, f64); 8] = [
    (0.09501250983763745, 0.18945061045506859),
    (0.2816035507792589, 0.1826034150449236),
    (0.45801677765722737, 0.16915651939500262),
    (0.6178762444026438, 0.14959598881657676),
    (0.755404408355003, 0.12462897125553403),
    (0.8656312023878318, 0.09515851168249259),
    (0.9445750230732326, 0.062253523938647706),
    (0.9894009349916499, 0.027152459411754037),
];

const GRADE_RATIO: f64 = 0.2;
const GRADE_LEVELS: usize = 18;

/// The eight Gauss points and weights of `[lo, hi]`, in increasing order.
#[inline]
pub fn gl8_points(lo: f64, hi: f64) -> [(f64, f64); 8] {
    let mid = 0.5 * (lo + hi);
    let half = 0.5 * (hi - lo);
    let mut out = [(0.0, 0.0); 8];
    for (k, &(x, w)) in GL8.iter().enumerate() {
        out[3 - k] = (mid - half * x, half * w);
        out[4 + k] = (mid + half * x, half * w);
    }
    out
}

#[inline]
fn rule<A: Acc>(nodes: &[(f64, f64)], lo: f64, hi: f64, g: &mut impl FnMut(f64) -> A) -> A {
    let mid = 0.5 * (lo + hi);
    let half = 0.5 * (hi - lo);
    let mut s = A::default();
    for &(x, w) in nodes {
        s = s + (g(mid - half * x) + g(mid + half * x)) * w;
    }
    s * half
}

#[inline]
pub fn gl4<A: Acc>(lo: f64, hi: f64, mut g: impl FnMut(f64) -> A) -> A {
    rule(&GL4, lo, hi, &mut g)
}

#[inline]
pub fn gl8<A: Acc>(lo: f64, hi: f64, mut g: impl FnMut(f64) -> A) -> A {
    rule(&GL8, lo, hi, &mut g)
}

#[inline]
pub fn gl16<A: Acc>(lo: f64, hi: f64, mut g: impl FnMut(f64) -> A) -> A {
    rule(&GL16, lo, hi, &mut g)
}

/// Integral over a panel whose nearest singular point is `d` away: graded when
/// `d` is below the panel width, 8 points up to four widths, 4 points beyond.
#[inline]
pub fn panel<A: Acc>(lo: f64, hi: f64, sing: f64, g: impl FnMut(f64) -> A) -> A {
    let w = hi - lo;
    let d = if sing < lo {
        lo - sing
    } else if sing > hi {
        sing - hi
    } else {
        0.0
    };
    if d < w {
        graded(lo, hi, sing, g)
    } else if d < 4.0 * w {
        gl8(lo, hi, g)
    } else {
        gl4(lo, hi, g)
    }
}

/// Integral over `[lo, hi]` of a function that may be log-singular at `sing`.
///
/// `sing` may lie inside the interval, on an endpoint, or outside it. Panels
/// closer to the singular point than their own width are refined geometrically.
pub fn graded<A: Acc>(lo: f64, hi: f64, sing: f64, mut g: impl FnMut(f64) -> A) -> A {
    if hi <= lo {
        return A::default();
    }
    if sing > lo && sing < hi {
        return toward(sing, lo, 0.0, &mut g) + toward(sing, hi, 0.0, &mut g);
    }
    if sing <= lo {
        toward(lo, hi, lo - sing, &mut g)
    } else {
        toward(hi, lo, sing - hi, &mut g)
    }
}

/// Integral from `e` to `far` with refinement toward `e`; the singular point
/// sits at distance `d` beyond `e`.
fn toward<A: Acc>(e: f64, far: f64, d: f64, g: &mut impl FnMut(f64) -> A) -> A {
    let w = (far - e).abs();
    let dir = if far > e { 1.0 } else { -1.0 };
    if d >= w {
        return gl8(e.min(far), e.max(far), g);
    }
    let floor = (w * GRADE_RATIO.powi(GRADE_LEVELS as i32)).max(1e-12 * e.abs());
    let mut total = A::default();
    let mut outer = w;
    loop {
        let inner = outer * GRADE_RATIO;
        if inner < d.max(floor) {
            let (a, b) = (e, e + dir * outer);
            total = total + gl16(a.min(b), a.max(b), &mut *g);
            break;
        }
        let (a, b) = (e + dir * inner, e + dir * outer);
        total = total + gl16(a.min(b), a.max(b), &mut *g);
        outer = inner;
    }
    total
}

/// Weighted least-squares polynomial fit; returns coefficients in increasing degree.
pub fn polyfit(xs: &[f64], ys: &[f64], ws: &[f64], degree: usize) -> Vec<f64> {
    let m = degree + 1;
    let mut rows: Vec<Vec<f64>> = xs
        .iter()
        .zip(ys)
        .zip(ws)
        .map(|((&x, &y), &w)| {
            let sw = w.sqrt();
            let mut row = Vec::with_capacity(m + 1);
            let mut p = sw;
            for _ in 0..m {
                row.push(p);
                p *= x;
            }
            row.push(sw * y);
            row
        })
        .collect();
    householder_solve(&mut rows, m)
}

/// Least-squares solution of the augmented system `rows` with `m` unknowns.
fn householder_solve(a: &mut [Vec<f64>], m: usize) -> Vec<f64> {
    let n = a.len();
    for k in 0..m.min(n) {
        let norm = (k..n).map(|i| a[i][k] * a[i][k]).sum::<f64>().sqrt();
        if norm == 0.0 {
            continue;
        }
        let alpha = if a[k][k] > 0.0 { -norm } else { norm };
        let mut v: Vec<f64> = (k..n).map(|i| a[i][k]).collect();
        v[0] -= alpha;
        let vv: f64 = v.iter().map(|t| t * t).sum();
        if vv == 0.0 {
            continue;
        }
        for j in k..=m {
            let dot: f64 = (k..n).map(|i| v[i - k] * a[i][j]).sum();
            let f = 2.0 * dot / vv;
            for i in k..n {
                a[i][j] -= f * v[i - k];
            }
        }
    }
    let mut x = vec![0.0; m];
    for i in (0..m.min(n)).rev() {
        let mut s = a[i][m];
        for k in i + 1..m {
            s -= a[i][k] * x[k];
        }
        x[i] = if a[i][i] != 0.0 { s / a[i][i] } else { 0.0 };
    }
    x
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gl8_exact_for_degree_15() {
        let v: f64 = gl4(0.0, 2.0, |x| x.powi(7));
        assert!((v - 32.0).abs() < 1e-12);
        let v: f64 = gl8(0.0, 2.0, |x| x.powi(15));
        assert!((v - 2f64.powi(16) / 16.0).abs() < 1e-9);
        let pts = gl8_points(1.0, 3.0);
        assert!(pts.windows(2).all(|p| p[0].0 < p[1].0));
        let s: f64 = pts.iter().map(|&(x, w)| w * x * x).sum();
        assert!((s - 26.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn graded_log_singularities() {
        // ∫_0^1 ln|x - 0.3| dx
        let want = 0.7 * 0.7f64.ln() - 0.7 + 0.3 * 0.3f64.ln() - 0.3;
        let got: f64 = graded(0.0, 1.0, 0.3, |x| (x - 0.3f64).abs().ln());
        assert!((got - want).abs() < 1e-11, "{got} {want}");
        let both = graded(0.0, 1.0, 0.3, |x| Pair((x - 0.3f64).abs().ln(), 1.0));
        assert_eq!(both.0, got);
        assert!((both.1 - 1.0).abs() < 1e-14);
        // Endpoint singularity.
        let got: f64 = graded(0.0, 1.0, 0.0, |x| x.ln());
        assert!((got + 1.0).abs() < 1e-11);
        // Nearby singularity outside the panel.
        let d = 1e-5;
        let got: f64 = graded(0.0, 1.0, -d, |x| (x + d).ln());
        let want = (1.0 + d) * (1.0 + d).ln() - (1.0 + d) - (d * d.ln() - d);
        assert!((got - want).abs() < 1e-11);
    }

    #[test]
    fn polyfit_recovers_cubic() {
        let xs: Vec<f64> = (1..20).map(|i| i as f64 * 0.05).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 1.0 - 2.0 * x + 0.5 * x * x * x).collect();
        let ws = vec![1.0; xs.len()];
        let c = polyfit(&xs, &ys, &ws, 3);
        assert!((c[0] - 1.0).abs() < 1e-10);
        assert!((c[1] + 2.0).abs() < 1e-9);
        assert!((c[3] - 0.5).abs() < 1e-8);
    }
}
