//! The linear transform `T`, the intermediate map `T_a` and the scalar
//! functionals `b`, `c`, `b_p`, `Q`, `μ`, `U_p`, `V_p`.
//!
//! `T` is evaluated in integrated-by-parts form. With `S = T + b`,
//!
//! ```text
//! S(x)  = -(1/π) ∫ f'(y)·y·F(y/x) dy
//! T'(x) =  (1/π) ∫ f'(y)·u²·F'(u) dy,   u = y/x
//! ```
//!
//! so both come from one kernel evaluation per quadrature point and `S` keeps
//! its relative accuracy where `T` approaches `-b`.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::Serialize;

use crate::profile::{ProfileGrid, TailKind};
use crate::quad::{gl16, gl8, graded, panel, Pair};
use crate::specfun::{fprime_unchecked, kernel_pair};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TransformError {
    #[error("b(f) diverges: tail exponent r = {0} <= 1")]
    DivergentB(f64),
    #[error("moment b_{p} diverges: tail exponent r = {r} <= p + 1")]
    DivergentMoment { p: u32, r: f64 },
    #[error("U_{p}/V_{p} diverge: combined decay exponent {excess} above p + 1 is too small")]
    DivergentUV { p: u32, excess: f64 },
}

/// `(r, f(X), X)` for an algebraic tail carrying mass.
fn algebraic_tail(f: &ProfileGrid) -> Option<(f64, f64, f64)> {
    let t = f.tail();
    if t.kind == TailKind::Algebraic && t.c > 0.0 {
        Some((t.r, f.tail_at_end(), f.x_max()))
    } else {
        None
    }
}

fn check_b(f: &ProfileGrid) -> Result<(), TransformError> {
    match algebraic_tail(f) {
        Some((r, _, _)) if r <= 1.0 => Err(TransformError::DivergentB(r)),
        _ => Ok(()),
    }
}

/// `∫_0^X g(y, j) dy` panel by panel with the eight-point rule.
fn panel_sum(f: &ProfileGrid, g: impl Fn(usize, f64) -> f64) -> f64 {
    let xs = f.nodes();
    (0..xs.len() - 1).map(|j| gl8(xs[j], xs[j + 1], |y| g(j, y))).sum()
}

pub fn compute_b(f: &ProfileGrid) -> Result<f64, TransformError> {
    compute_b_p(f, 0)
}

/// `(2/π) ∫ x^p f dx`.
pub fn compute_b_p(f: &ProfileGrid, p: u32) -> Result<f64, TransformError> {
    check_b(f)?;
    let pi = p as i32;
    let interior = panel_sum(f, |j, y| y.powi(pi) * f.eval_in_panel(j, y));
    let tail = match algebraic_tail(f) {
        Some((r, _, _)) if r <= p as f64 + 1.0 => {
            return Err(TransformError::DivergentMoment { p, r })
        }
        Some((r, fx, x)) => fx * x.powi(pi + 1) / (r - p as f64 - 1.0),
        None => 0.0,
    };
    Ok(2.0 / PI * (interior + tail))
}

/// `-(2/π) ∫ f'(y)/y dy`, using `f'/y = 2 df/ds` from the interpolant.
pub fn compute_c(f: &ProfileGrid) -> f64 {
    let interior = panel_sum(f, |j, y| -2.0 * f.ds_in_panel(j, y));
    let tail = match algebraic_tail(f) {
        Some((r, fx, x)) => r * fx / ((r + 1.0) * x),
        None => 0.0,
    };
    2.0 / PI * (interior + tail)
}

/// `(T + b, T')` at `x > 0`.
pub fn eval_pair(f: &ProfileGrid, x: f64) -> (f64, f64) {
    let xs = f.nodes();
    let mut acc = Pair::default();
    for j in 0..xs.len() - 1 {
        acc = acc
            + panel(xs[j], xs[j + 1], x, |y| {
                let fp = f.deriv_in_panel(j, y);
                let u = y / x;
                let (k, kp) = kernel_pair(u);
                Pair(-fp * y * k, fp * u * u * kp)
            });
    }
    let mut s = acc.0 / PI;
    let mut tp = acc.1 / PI;
    if let Some((r, fx, big_x)) = algebraic_tail(f) {
        let (sa, sb) = tail_moments(r, x / big_x);
        s += r * fx * big_x / PI * (2.0 / (r - 1.0) - sa);
        tp -= r * fx / PI * sb;
    }
    (s, tp)
}

/// `τ^{1-r}·∫_0^τ t^{r-2} F(t) dt` and `τ^{-r}·∫_0^τ t^{r-1} F'(t) dt`.
pub fn tail_moments(r: f64, tau: f64) -> (f64, f64) {
    let t0 = tau.min(0.5);
    let ra = (t0 / tau).powf(r - 1.0);
    let rb = (t0 / tau).powf(r);
    let p = t0 * t0;
    let mut pow = p;
    let (mut sa, mut sb) = (0.0, 0.0);
    for n in 1..=200 {
        let nf = n as f64;
        let den = (4.0 * nf * nf - 1.0) * (2.0 * nf + r - 1.0);
        let ta = 2.0 * pow / den;
        let tb = 4.0 * nf * pow / (t0 * den);
        sa += ta;
        sb += tb;
        if tb < 1e-17 * sb {
            break;
        }
        pow *= p;
    }
    let mut out = Pair(sa * ra, sb * rb);
    if tau > 0.5 {
        let g = |t: f64| {
            let (k, kp) = kernel_pair(t);
            let q = t / tau;
            let qa = q.powf(r - 1.0);
            Pair(qa * k / t, qa * q * kp / t)
        };
        out = out + graded(0.5, tau.min(2.0), 1.0, g);
        let mut lo = 2.0;
        while lo < tau {
            let hi = (2.0 * lo).min(tau);
            out = out + gl16(lo, hi, g);
            lo = hi;
        }
    }
    (out.0, out.1)
}

/// Samples of `T(f)` and `T(f)'` on a node set.
#[derive(Debug, Clone, PartialEq)]
pub struct TransformField {
    pub base: ProfileGrid,
    pub nodes: Vec<f64>,
    pub values_t: Vec<f64>,
    pub values_tprime: Vec<f64>,
    /// `T + b` at the nodes.
    pub values_s: Vec<f64>,
    pub limit_at_infinity: f64,
    pub b: f64,
    pub c: f64,
    s_slopes: Vec<f64>,
    log_start: usize,
}

pub fn apply_t(f: &ProfileGrid) -> Result<TransformField, TransformError> {
    apply_t_on(f, f.nodes())
}

/// `T(f)` at the given nodes, which must start at 0 and increase.
pub fn apply_t_on(f: &ProfileGrid, nodes: &[f64]) -> Result<TransformField, TransformError> {
    let b = compute_b(f)?;
    let c = compute_c(f);
    let pairs: Vec<(f64, f64)> = nodes
        .par_iter()
        .map(|&x| if x == 0.0 { (b, 0.0) } else { eval_pair(f, x) })
        .collect();
    let values_s: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let values_tprime: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    let mut values_t: Vec<f64> = values_s.iter().map(|s| s - b).collect();
    values_t[0] = 0.0;
    let s_slopes = nodes
        .iter()
        .zip(&values_tprime)
        .map(|(&x, &tp)| if x == 0.0 { -c / 3.0 } else { tp / (2.0 * x) })
        .collect();
    let start = nodes.partition_point(|&x| x < f.grid().uniform_end * (1.0 - 1e-12));
    let log_start = (start..nodes.len())
        .rev()
        .take_while(|&i| values_s[i] > 0.0)
        .last()
        .unwrap_or(nodes.len());
    Ok(TransformField {
        log_start,
        base: f.clone(),
        nodes: nodes.to_vec(),
        values_t,
        values_tprime,
        values_s,
        limit_at_infinity: -b,
        b,
        c,
        s_slopes,
    })
}

impl TransformField {
    fn panel_of(&self, x: f64) -> usize {
        let j = self.nodes.partition_point(|&n| n <= x);
        j.saturating_sub(1).min(self.nodes.len() - 2)
    }

    /// Decay exponent of `T + b` at the last node.
    pub fn end_exponent(&self) -> f64 {
        let n = self.nodes.len() - 1;
        -self.nodes[n] * self.values_tprime[n] / self.values_s[n]
    }

    /// `(T + b, dT/ds)` in panel `j`, cubic Hermite in `s = x²`.
    #[inline]
    pub fn s_in_panel(&self, j: usize, x: f64) -> (f64, f64) {
        if j >= self.log_start {
            let (x0, x1) = (self.nodes[j], self.nodes[j + 1]);
            let (v0, v1) = (self.values_s[j], self.values_s[j + 1]);
            let d0 = x0 * self.values_tprime[j] / v0;
            let d1 = x1 * self.values_tprime[j + 1] / v1;
            let (p0, p1) = (v0.ln(), v1.ln());
            let h = (x1 / x0).ln();
            let t = (x / x0).ln() / h;
            let t2 = t * t;
            let t3 = t2 * t;
            let lv = (2.0 * t3 - 3.0 * t2 + 1.0) * p0
                + (t3 - 2.0 * t2 + t) * h * d0
                + (3.0 * t2 - 2.0 * t3) * p1
                + (t3 - t2) * h * d1;
            let dlv = (6.0 * t2 - 6.0 * t) * (p0 - p1) / h
                + (3.0 * t2 - 4.0 * t + 1.0) * d0
                + (3.0 * t2 - 2.0 * t) * d1;
            let v = lv.exp();
            return (v, v * dlv / (2.0 * x * x));
        }
        let s0 = self.nodes[j] * self.nodes[j];
        let s1 = self.nodes[j + 1] * self.nodes[j + 1];
        let h = s1 - s0;
        let t = (x * x - s0) / h;
        let (f0, f1) = (self.values_s[j], self.values_s[j + 1]);
        let (d0, d1) = (self.s_slopes[j], self.s_slopes[j + 1]);
        let t2 = t * t;
        let t3 = t2 * t;
        let v = (2.0 * t3 - 3.0 * t2 + 1.0) * f0
            + (t3 - 2.0 * t2 + t) * h * d0
            + (3.0 * t2 - 2.0 * t3) * f1
            + (t3 - t2) * h * d1;
        let dv = (6.0 * t2 - 6.0 * t) * (f0 - f1) / h
            + (3.0 * t2 - 4.0 * t + 1.0) * d0
            + (3.0 * t2 - 2.0 * t) * d1;
        (v, dv)
    }

    /// `T + b` at any `x >= 0`; past the last node a power law with the local
    /// decay exponent is used.
    pub fn s_at(&self, x: f64) -> f64 {
        let x = x.abs();
        let n = self.nodes.len() - 1;
        if x > self.nodes[n] {
            return self.values_s[n] * (x / self.nodes[n]).powf(-self.end_exponent());
        }
        self.s_in_panel(self.panel_of(x), x).0
    }

    pub fn t_at(&self, x: f64) -> f64 {
        if x == 0.0 {
            return 0.0;
        }
        self.s_at(x) - self.b
    }

    pub fn tprime_at(&self, x: f64) -> f64 {
        let ax = x.abs();
        let n = self.nodes.len() - 1;
        let d = if ax > self.nodes[n] {
            -self.end_exponent() * self.s_at(ax) / ax
        } else {
            2.0 * ax * self.s_in_panel(self.panel_of(ax), ax).1
        };
        if x < 0.0 {
            -d
        } else {
            d
        }
    }

    /// Rows `x, f, T, T'` for debugging output.
    pub fn rows(&self) -> impl Iterator<Item = [f64; 4]> + '_ {
        self.nodes
            .iter()
            .enumerate()
            .map(move |(i, &x)| [x, self.base.eval(x), self.values_t[i], self.values_tprime[i]])
    }
}

/// `λ = 2a/((1 - a/3)c)`.
pub fn lambda(a: f64, c: f64) -> f64 {
    2.0 * a / ((1.0 - a / 3.0) * c)
}

/// Samples of `T_a(f) = (1 + λT)₊`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TaField {
    pub nodes: Vec<f64>,
    pub values: Vec<f64>,
    pub g_inf: f64,
    /// First zero of `T_a(f)` when it has compact support.
    pub root: Option<f64>,
}

pub fn apply_ta(f: &ProfileGrid, a: f64) -> Result<TaField, TransformError> {
    let tf = apply_t(f)?;
    Ok(ta_from(&tf, a))
}

pub fn ta_from(tf: &TransformField, a: f64) -> TaField {
    let lam = lambda(a, tf.c);
    let values = tf.values_t.iter().map(|t| (1.0 + lam * t).max(0.0)).collect();
    TaField {
        nodes: tf.nodes.clone(),
        values,
        g_inf: (1.0 - lam * tf.b).max(0.0),
        root: find_root(tf, lam),
    }
}

/// First `x` with `1 + λT(x) = 0`, by bisection on the interpolant of `T`.
pub fn find_root(tf: &TransformField, lam: f64) -> Option<f64> {
    if lam <= 0.0 {
        return None;
    }
    let g = |i: usize| 1.0 + lam * tf.values_t[i];
    let k = (1..tf.nodes.len()).find(|&i| g(i) <= 0.0)?;
    if g(k) == 0.0 {
        return Some(tf.nodes[k]);
    }
    let (mut lo, mut hi) = (tf.nodes[k - 1], tf.nodes[k]);
    let j = k - 1;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let v = 1.0 + lam * (tf.s_in_panel(j, mid).0 - tf.b);
        if v > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-15 * hi {
            break;
        }
    }
    Some(0.5 * (lo + hi))
}

/// `K₂(t) = (t + 1/t)·ln|(1+t)/(1-t)| - 2 = 2t·F'(t)`, nonnegative.
#[inline]
fn k2(t: f64) -> f64 {
    2.0 * t * fprime_unchecked(t)
}

/// `Q(f) = (1/π²) ∫∫ f(x) f(y) K₂(x/y) dx dy`, folded onto `x <= y`.
pub fn compute_q(f: &ProfileGrid) -> Result<f64, TransformError> {
    check_b(f)?;
    let xs = f.nodes();
    let inner = |y: f64| -> f64 {
        let mut s = 0.0;
        for k in 0..xs.len() - 1 {
            if xs[k] >= y {
                break;
            }
            let hi = xs[k + 1].min(y);
            s += panel(xs[k], hi, y, |x| f.eval_in_panel(k, x) * k2(x / y));
        }
        s
    };
    let parts: Vec<f64> = (0..xs.len() - 1)
        .into_par_iter()
        .map(|j| gl8(xs[j], xs[j + 1], |y| f.eval_in_panel(j, y) * inner(y)))
        .collect();
    let mut total: f64 = parts.iter().sum();
    if let Some((r, fx, big_x)) = algebraic_tail(f) {
        let e = (r - 1.0).min(2.0);
        total += fx * inner(big_x) * big_x / (r + e - 1.0);
    }
    Ok(2.0 / (PI * PI) * total)
}

pub fn compute_mu(f: &ProfileGrid) -> Result<f64, TransformError> {
    let b = compute_b(f)?;
    Ok(2.0 * compute_q(f)? / (b * b))
}

pub fn compute_up_vp(f: &ProfileGrid, p: u32) -> Result<(f64, f64), TransformError> {
    up_vp_from(&apply_t(f)?, p)
}

pub fn up_vp_from(tf: &TransformField, p: u32) -> Result<(f64, f64), TransformError> {
    Ok((u_from(tf, p)?, v_from(tf, p)?))
}

fn moment_check(tf: &TransformField) {
    assert_eq!(tf.base.nodes(), &tf.nodes[..], "field must live on the profile nodes");
}

/// `V_p = (2/π) ∫ x^p f (T + b) dx`.
pub fn v_from(tf: &TransformField, p: u32) -> Result<f64, TransformError> {
    moment_check(tf);
    let f = &tf.base;
    let pi = p as i32;
    let xs = f.nodes();
    let mut total = 0.0;
    for j in 0..xs.len() - 1 {
        total += gl8(xs[j], xs[j + 1], |y| {
            y.powi(pi) * tf.s_in_panel(j, y).0 * f.eval_in_panel(j, y)
        });
    }
    if let Some((r, fx, big_x)) = algebraic_tail(f) {
        let excess = tf.end_exponent() + r - p as f64 - 1.0;
        if !(excess > 1e-3) {
            return Err(TransformError::DivergentUV { p, excess });
        }
        total += tf.values_s[xs.len() - 1] * fx * big_x.powi(pi + 1) / excess;
    }
    Ok(2.0 / PI * total)
}

/// `U_p = (2/π) ∫ x^p f u' dx` with `u = x(T + b)`. The interior part is
/// integrated by parts so that only `T + b` is interpolated.
pub fn u_from(tf: &TransformField, p: u32) -> Result<f64, TransformError> {
    moment_check(tf);
    let f = &tf.base;
    let pi = p as i32;
    let pf = p as f64;
    let xs = f.nodes();
    let mut total = 0.0;
    for j in 0..xs.len() - 1 {
        total -= gl8(xs[j], xs[j + 1], |y| {
            let yp = y.powi(pi);
            let fy = f.eval_in_panel(j, y);
            tf.s_in_panel(j, y).0 * (pf * yp * fy + y * yp * f.deriv_in_panel(j, y))
        });
    }
    let n = xs.len() - 1;
    let big_x = xs[n];
    let s_x = tf.values_s[n];
    total += big_x.powi(pi + 1) * f.values()[n] * s_x;
    if let Some((r, fx, _)) = algebraic_tail(f) {
        let e = tf.end_exponent();
        // u' = (1 - e)·(T + b) to leading order; when that cancels, u' decays one power faster.
        let du = s_x + big_x * tf.values_tprime[n];
        let e_u = if du.abs() > 1e-2 * s_x.abs() { e } else { e + 1.0 };
        let excess = e_u + r - pf - 1.0;
        if !(excess > 1e-3) {
            return Err(TransformError::DivergentUV { p, excess });
        }
        total += du * fx * big_x.powi(pi + 1) / excess;
    }
    Ok(2.0 / PI * total)
}

/// `((1+ap)b - (1+p)(1-a/3)c/2)·b_p - (1+a)U_p - a(p-1)V_p`, zero at fixed points.
pub fn moment_identity_residual(f: &ProfileGrid, a: f64, p: u32) -> Result<f64, TransformError> {
    let tf = apply_t(f)?;
    identity_residual_from(&tf, a, p)
}

pub fn identity_residual_from(tf: &TransformField, a: f64, p: u32) -> Result<f64, TransformError> {
    let pf = p as f64;
    let bp = compute_b_p(&tf.base, p)?;
    let (up, vp) = up_vp_from(tf, p)?;
    let lead = (1.0 + a * pf) * tf.b - (1.0 + pf) * (1.0 - a / 3.0) * tf.c / 2.0;
    Ok(lead * bp - (1.0 + a) * up - a * (pf - 1.0) * vp)
}
