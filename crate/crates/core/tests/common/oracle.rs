//! Reference quadrature built only from the defining integrals: adaptive
//! Gauss-Kronrod (7/15) and the kernels written out from their formulas.

#![allow(dead_code)]

use std::f64::consts::PI;

const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.0,
];
const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

fn gk15(f: &dyn Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = WGK[7] * fc;
    let mut g = WG[3] * fc;
    for i in 0..7 {
        let v = f(c - h * XGK[i]) + f(c + h * XGK[i]);
        k += WGK[i] * v;
        if i % 2 == 1 {
            g += WG[i / 2] * v;
        }
    }
    (k * h, ((k - g) * h).abs())
}

/// `∫_a^b f` to absolute accuracy about `tol`: the interval with the largest
/// error estimate is bisected until the estimates sum below `tol` or the
/// interval budget is spent.
pub fn integrate(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    let mut parts = vec![(a, b, gk15(f, a, b))];
    for _ in 0..4000 {
        let err: f64 = parts.iter().map(|p| p.2 .1).sum();
        if err <= tol {
            break;
        }
        let (i, _) = parts
            .iter()
            .enumerate()
            .max_by(|p, q| p.1 .2 .1.total_cmp(&q.1 .2 .1))
            .unwrap();
        let (lo, hi, _) = parts.swap_remove(i);
        let m = 0.5 * (lo + hi);
        if !(m > lo && m < hi) {
            parts.push((lo, hi, (gk15(f, lo, hi).0, 0.0)));
            continue;
        }
        parts.push((lo, m, gk15(f, lo, m)));
        parts.push((m, hi, gk15(f, m, hi)));
    }
    parts.iter().map(|p| p.2 .0).sum()
}

/// `∫_a^∞ f` through `y = a/u`.
pub fn integrate_to_inf(f: &dyn Fn(f64) -> f64, a: f64, tol: f64) -> f64 {
    assert!(a > 0.0);
    let g = |u: f64| if u <= 0.0 { 0.0 } else { f(a / u) * a / (u * u) };
    integrate(&g, 0.0, 1.0, tol)
}

/// `∫_0^∞ f`, split at the listed breakpoints.
pub fn integrate_half_line(f: &dyn Fn(f64) -> f64, breaks: &[f64], tol: f64) -> f64 {
    let mut pts = vec![0.0];
    pts.extend(breaks.iter().copied().filter(|&b| b > 0.0));
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    let mut s = 0.0;
    for w in pts.windows(2) {
        s += integrate(f, w[0], w[1], tol);
    }
    s + integrate_to_inf(f, *pts.last().unwrap(), tol)
}

/// `F(t) = (t²-1)/(2t)·ln|(t+1)/(t-1)| + 1`.
pub fn kernel_f(t: f64) -> f64 {
    let t = t.abs();
    if t == 0.0 {
        return 0.0;
    }
    if t == 1.0 {
        return 1.0;
    }
    (t * t - 1.0) / (2.0 * t) * ((t + 1.0) / (t - 1.0)).abs().ln() + 1.0
}

/// `K₂(t) = (t + 1/t)·ln|(1+t)/(1-t)| - 2`.
pub fn kernel_k2(t: f64) -> f64 {
    if t == 0.0 {
        return 0.0;
    }
    (t + 1.0 / t) * ((1.0 + t) / (1.0 - t)).abs().ln() - 2.0
}

/// `T(f)(x) + b(f) = -(1/π) ∫_0^∞ f'(y)·y·F(y/x) dy`.
pub fn s_value(fp: &dyn Fn(f64) -> f64, support: Option<f64>, x: f64) -> f64 {
    let g = |y: f64| fp(y) * y * kernel_f(y / x);
    let v = match support {
        Some(l) if x < l => integrate(&g, 0.0, x, 1e-14) + integrate(&g, x, l, 1e-14),
        Some(l) => integrate(&g, 0.0, l, 1e-14),
        None => integrate_half_line(&g, &[x, 2.0 * x], 1e-14),
    };
    -v / PI
}

/// `b(f) = (2/π) ∫_0^∞ f`.
pub fn b_value(f: &dyn Fn(f64) -> f64, breaks: &[f64]) -> f64 {
    2.0 / PI * integrate_half_line(f, breaks, 1e-14)
}

/// `c(f) = (2/π) ∫_0^∞ (1 - f(y))/y² dy`, given the quotient `(1 - f(y))/y²`.
pub fn c_value(quotient: &dyn Fn(f64) -> f64, breaks: &[f64]) -> f64 {
    2.0 / PI * integrate_half_line(quotient, breaks, 1e-14)
}

/// `Q(f) = (1/π²) ∫_0^∞∫_0^∞ f(x) f(y) K₂(x/y) dx dy` by nested quadrature.
/// `end` bounds the support when it is finite.
pub fn q_value(f: &dyn Fn(f64) -> f64, end: Option<f64>, tol: f64) -> f64 {
    let inner = |y: f64| -> f64 {
        if y == 0.0 {
            return 0.0;
        }
        let g = |x: f64| f(x) * kernel_k2(x / y);
        match end {
            Some(l) => integrate(&g, 0.0, y.min(l), tol) + if y < l { integrate(&g, y, l, tol) } else { 0.0 },
            None => integrate_half_line(&g, &[y, 2.0 * y], tol),
        }
    };
    let outer = |y: f64| f(y) * inner(y);
    let total = match end {
        Some(l) => integrate(&outer, 0.0, l, tol),
        None => integrate_half_line(&outer, &[1.0], tol),
    };
    total / (PI * PI)
}
