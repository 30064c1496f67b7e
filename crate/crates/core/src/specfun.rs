//! Kernel special functions `F`, `F'`, `G`, `F1`..`F4` and the universal constants
//! that bound the profile functionals.
//!
//! Each function switches between its Taylor series (for `t < 0.5`, or `t > 2` via
//! the `t -> 1/t` symmetry) and the closed form in between. The `F1`..`F4` series
//! are summed up to `t = 1`; when the 200-term cap is reached before convergence the
//! remainder is added with an Euler-Maclaurin estimate.

use std::f64::consts::PI;
use std::sync::atomic::{AtomicU64, Ordering};

use serde::Serialize;

use crate::quad::GL16;

const MAX_TERMS: u32 = 200;
const TERM_TOL: f64 = 1e-16;
const SERIES_BELOW: f64 = 0.5;
const SERIES_ABOVE: f64 = 2.0;
const AT_ONE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, thiserror::Error)]
pub enum SpecError {
    #[error("argument {0} is outside the domain")]
    Domain(f64),
    #[error("logarithmic singularity at t = 1")]
    Singular,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpecialConstants {
    pub eta: f64,
    pub mu_bar: f64,
    pub a_lower: f64,
    pub a_upper: f64,
    pub f4_at_1: f64,
}

pub fn constants() -> SpecialConstants {
    let pi2 = PI * PI;
    SpecialConstants {
        eta: 1.0 / (3.0 * 1048576.0 * std::f64::consts::SQRT_2),
        mu_bar: 9.0 * pi2 / 64.0 - 0.75,
        a_lower: 400.0 / (848.0 - 9.0 * pi2),
        a_upper: 64.0 / (176.0 - 9.0 * pi2),
        f4_at_1: pi2 / 32.0 - 1.0 / 6.0,
    }
}

static F_SCALE: AtomicU64 = AtomicU64::new(0x3FF0_0000_0000_0000);

/// Multiplies every value of `F` by `1 + rel`. Used only to check that the
/// verification suite notices a corrupted kernel; pass 0 to restore.
pub fn inject_f_error(rel: f64) {
    F_SCALE.store((1.0 + rel).to_bits(), Ordering::Relaxed);
}

#[inline]
fn f_scale() -> f64 {
    f64::from_bits(F_SCALE.load(Ordering::Relaxed))
}

#[inline]
fn log_ratio(t: f64) -> f64 {
    ((t + 1.0) / (t - 1.0).abs()).ln()
}

fn f_small(t: f64) -> f64 {
    let p = t * t;
    let mut pow = p;
    let mut sum = 0.0;
    for n in 1..=MAX_TERMS {
        let nf = n as f64;
        let term = 2.0 * pow / (4.0 * nf * nf - 1.0);
        sum += term;
        if term < TERM_TOL * (sum + 1.0) {
            break;
        }
        pow *= p;
    }
    sum
}

fn fprime_small(t: f64) -> f64 {
    let p = t * t;
    let mut pow = t;
    let mut sum = 0.0;
    for n in 1..=MAX_TERMS {
        let nf = n as f64;
        let term = 4.0 * nf * pow / (4.0 * nf * nf - 1.0);
        sum += term;
        if term < TERM_TOL * (sum + 1.0) {
            break;
        }
        pow *= p;
    }
    sum
}

fn f_raw(t: f64) -> f64 {
    if t < SERIES_BELOW {
        f_small(t)
    } else if t > SERIES_ABOVE {
        2.0 - f_small(1.0 / t)
    } else if (t - 1.0).abs() < AT_ONE {
        1.0
    } else {
        (t * t - 1.0) / (2.0 * t) * log_ratio(t) + 1.0
    }
}

fn fprime_raw(t: f64) -> f64 {
    if t < SERIES_BELOW {
        fprime_small(t)
    } else if t > SERIES_ABOVE {
        let u = 1.0 / t;
        u * u * fprime_small(u)
    } else {
        (t * t + 1.0) / (2.0 * t * t) * log_ratio(t) - 1.0 / t
    }
}

/// `F(t) = (t²-1)/(2t)·ln|(t+1)/(t-1)| + 1`.
pub fn eval_f(t: f64) -> Result<f64, SpecError> {
    if !(t >= 0.0) {
        return Err(SpecError::Domain(t));
    }
    if t.is_infinite() {
        return Ok(2.0 * f_scale());
    }
    Ok(f_raw(t) * f_scale())
}

/// `F'(t) = (t²+1)/(2t²)·ln|(t+1)/(t-1)| - 1/t`.
pub fn eval_f_prime(t: f64) -> Result<f64, SpecError> {
    if !(t > 0.0) || t.is_infinite() {
        return Err(SpecError::Domain(t));
    }
    if t == 1.0 {
        return Err(SpecError::Singular);
    }
    Ok(fprime_raw(t))
}

/// `F` and `F'` together without argument checks, for quadrature loops.
/// `t` must be positive and different from 1.
#[inline]
pub fn kernel_pair(t: f64) -> (f64, f64) {
    let (f, fp) = if t < SERIES_BELOW {
        let p = t * t;
        let mut pow = p;
        let mut s = 0.0;
        let mut sp = 0.0;
        for n in 1..=MAX_TERMS {
            let nf = n as f64;
            let a = 2.0 * pow / (4.0 * nf * nf - 1.0);
            s += a;
            sp += 2.0 * nf * a;
            if 2.0 * nf * a < TERM_TOL * (sp + 1e-300) {
                break;
            }
            pow *= p;
        }
        (s, sp / t)
    } else if t > SERIES_ABOVE {
        let u = 1.0 / t;
        let p = u * u;
        let mut pow = p;
        let mut s = 0.0;
        let mut sp = 0.0;
        for n in 1..=MAX_TERMS {
            let nf = n as f64;
            let a = 2.0 * pow / (4.0 * nf * nf - 1.0);
            s += a;
            sp += 2.0 * nf * a;
            if 2.0 * nf * a < TERM_TOL * (sp + 1e-300) {
                break;
            }
            pow *= p;
        }
        (2.0 - s, u * sp)
    } else {
        let l = log_ratio(t);
        let inv = 1.0 / t;
        (
            (t * t - 1.0) * 0.5 * inv * l + 1.0,
            (t * t + 1.0) * 0.5 * inv * inv * l - inv,
        )
    };
    (f * f_scale(), fp)
}

/// `F'` without argument checks; `t > 0`, `t != 1`.
#[inline]
pub fn fprime_unchecked(t: f64) -> f64 {
    fprime_raw(t)
}

/// `G(t) = (3t⁴-2t²-1)/(8t³)·ln|(t+1)/(t-1)| + 1/(4t²) + 7/12`.
pub fn eval_g(t: f64) -> Result<f64, SpecError> {
    if !(t >= 0.0) {
        return Err(SpecError::Domain(t));
    }
    if t.is_infinite() {
        return Ok(4.0 / 3.0);
    }
    if t < SERIES_BELOW {
        let p = t * t;
        let mut pow = p;
        let mut sum = 0.0;
        for n in 1..=MAX_TERMS {
            let nf = n as f64;
            let term = 4.0 * (nf + 1.0) * pow
                / ((2.0 * nf - 1.0) * (2.0 * nf + 1.0) * (2.0 * nf + 3.0));
            sum += term;
            if term < TERM_TOL * (sum + 1.0) {
                break;
            }
            pow *= p;
        }
        Ok(sum)
    } else if t > SERIES_ABOVE {
        let u = 1.0 / t;
        let p = u * u;
        let mut pow = p * p;
        let mut sum = 0.0;
        for n in 1..=MAX_TERMS {
            let nf = n as f64;
            let term = 4.0 * nf * pow / ((2.0 * nf - 1.0) * (2.0 * nf + 1.0) * (2.0 * nf + 3.0));
            sum += term;
            if term < TERM_TOL * (sum + 1.0) {
                break;
            }
            pow *= p;
        }
        Ok(4.0 / 3.0 - sum)
    } else if (t - 1.0).abs() < AT_ONE {
        Ok(5.0 / 6.0)
    } else {
        let t2 = t * t;
        Ok((3.0 * t2 * t2 - 2.0 * t2 - 1.0) / (8.0 * t2 * t) * log_ratio(t)
            + 0.25 / t2
            + 7.0 / 12.0)
    }
}

/// Closed forms of `F` and `G`, exposed so tests can compare them with the series
/// inside the switchover annulus.
pub fn closed_form_f(t: f64) -> f64 {
    (t * t - 1.0) / (2.0 * t) * log_ratio(t) + 1.0
}

pub fn closed_form_g(t: f64) -> f64 {
    let t2 = t * t;
    (3.0 * t2 * t2 - 2.0 * t2 - 1.0) / (8.0 * t2 * t) * log_ratio(t) + 0.25 / t2 + 7.0 / 12.0
}

/// Series form of `F` used for `t < 0.5` (and, through `1/t`, `t > 2`).
pub fn series_f(t: f64) -> f64 {
    if t <= 1.0 {
        f_small(t)
    } else {
        2.0 - f_small(1.0 / t)
    }
}


/// `Σ_{n>=1} c(n)·pⁿ` for `0 <= p <= 1`.
fn power_series(c: impl Fn(f64) -> f64, p: f64) -> f64 {
    let mut pow = p;
    let mut sum = 0.0;
    for n in 1..=MAX_TERMS {
        let term = c(n as f64) * pow;
        sum += term;
        if term.abs() < TERM_TOL * (sum.abs() + 1.0) {
            return sum;
        }
        pow *= p;
    }
    sum + series_remainder(&c, p, MAX_TERMS as f64)
}

/// Euler-Maclaurin estimate of `Σ_{n>N} c(n)·pⁿ`.
fn series_remainder(c: &impl Fn(f64) -> f64, p: f64, n_cap: f64) -> f64 {
    let lp = p.ln();
    let g = |n: f64| c(n) * (n * lp).exp();
    let m = n_cap + 0.5;
    // ∫_m^∞ g(n) dn with n = m/u, four Gauss panels on u in (0, 1].
    let mut integral = 0.0;
    for k in 0..4 {
        let lo = k as f64 * 0.25;
        let mid = lo + 0.125;
        for &(x, w) in GL16.iter() {
            for u in [mid - 0.125 * x, mid + 0.125 * x] {
                integral += 0.125 * w * g(m / u) * m / (u * u);
            }
        }
    }
    let h = 1e-2 * m;
    let dg = (g(m + h) - g(m - h)) / (2.0 * h);
    integral + dg / 24.0
}

/// `F1(t) = ∫_0^t s·F'(s) ds`.
pub fn eval_f1(t: f64) -> Result<f64, SpecError> {
    if !(t >= 0.0) || t.is_infinite() {
        return Err(SpecError::Domain(t));
    }
    if t <= 1.0 {
        let c = |n: f64| 4.0 * n / ((2.0 * n - 1.0) * (2.0 * n + 1.0) * (2.0 * n + 1.0));
        Ok(t * power_series(c, t * t))
    } else {
        let u = 1.0 / t;
        let c = |n: f64| 4.0 * n / ((2.0 * n - 1.0) * (2.0 * n - 1.0) * (2.0 * n + 1.0));
        Ok(PI * PI / 4.0 - power_series(c, u * u) / u)
    }
}

/// `F2(t) = F1(t)/t + t·F1(1/t)`, symmetric under `t -> 1/t`.
pub fn eval_f2(t: f64) -> Result<f64, SpecError> {
    if !(t >= 0.0) || t.is_infinite() {
        return Err(SpecError::Domain(t));
    }
    if t == 0.0 {
        return Ok(0.0);
    }
    let v = if t > 1.0 { 1.0 / t } else { t };
    let c = |n: f64| {
        let q = (2.0 * n - 1.0) * (2.0 * n + 1.0);
        8.0 * n / (q * q)
    };
    Ok(PI * PI / 4.0 * v - power_series(c, v * v))
}

/// `F3(t) = ∫_0^t s²·F2(s) ds`.
pub fn eval_f3(t: f64) -> Result<f64, SpecError> {
    if !(t >= 0.0) || t.is_infinite() {
        return Err(SpecError::Domain(t));
    }
    if t <= 1.0 {
        let c = |n: f64| {
            let q = (2.0 * n - 1.0) * (2.0 * n + 1.0);
            8.0 * n / (q * q * (2.0 * n + 3.0))
        };
        Ok(PI * PI / 16.0 * t.powi(4) - t.powi(3) * power_series(c, t * t))
    } else {
        let u = 1.0 / t;
        let c = |n: f64| {
            let q = (2.0 * n - 1.0) * (2.0 * n + 1.0);
            8.0 * n / ((2.0 * n - 3.0) * q * q)
        };
        Ok(PI * PI / 8.0 / (u * u) + power_series(c, u * u) / u.powi(3))
    }
}

/// `F4(t) = t³·∫_0^{1/t} s⁵·F3(1/s) ds`, symmetric under `t -> 1/t`, maximal at 1.
pub fn eval_f4(t: f64) -> Result<f64, SpecError> {
    if !(t >= 0.0) {
        return Err(SpecError::Domain(t));
    }
    if t == 0.0 || t.is_infinite() {
        return Ok(0.0);
    }
    let v = if t > 1.0 { 1.0 / t } else { t };
    if (v - 1.0).abs() < AT_ONE {
        return Ok(constants().f4_at_1);
    }
    let c = |n: f64| {
        let q = (2.0 * n - 1.0) * (2.0 * n + 1.0);
        8.0 * n / ((2.0 * n - 3.0) * q * q * (2.0 * n + 3.0))
    };
    Ok(PI * PI / 32.0 * v + power_series(c, v * v))
}
