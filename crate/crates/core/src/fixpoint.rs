//! The nonlinear map `R_a`, its `a = 0` limit `R_0`, the renormalized fixed-point
//! iteration and the scalars of a converged profile.

use std::collections::BTreeMap;

use serde::{Serialize, Serializer};

use crate::continuation::fit_tail_exponent;
use crate::profile::{
    check_admissibility, make_profile, power_profile, renormalize, residual_norm, Builtin, GridSpec,
    ProfileError, ProfileGrid, TailKind, TailModel,
};
use crate::quad::gl8;
use crate::transform::{
    apply_t, apply_t_on, compute_b_p, compute_q, find_root, identity_residual_from, lambda, ta_from, u_from,
    TransformError, TransformField,
};

/// Below this `|a|` the `a = 0` formula is used.
pub const A_SWITCH: f64 = 1e-6;

/// Relative width of the Gaussian-class band around `(1 - a/3)c = 2ab`.
pub const CLASS_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SolveError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("no convergence after {iterations} iterations (residual {residual:e})")]
    NotConverged { iterations: usize, residual: f64, last: Box<ProfileGrid> },
    #[error(transparent)]
    Transform(#[from] TransformError),
    #[error(transparent)]
    Profile(#[from] ProfileError),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Seed {
    /// Lorentzian for `a >= 0`; for `a < 0` a power profile decaying like
    /// `x^-r` with `r = 2(1+|a|)/(1+2|a|)`.
    Auto,
    Lorentzian,
    Profile { label: String, profile: Box<ProfileGrid> },
}

impl Serialize for Seed {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Seed::Auto => s.serialize_str("auto"),
            Seed::Lorentzian => s.serialize_str("lorentzian"),
            Seed::Profile { label, .. } => s.serialize_str(label),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolveConfig {
    pub a: f64,
    pub tol: f64,
    pub max_iter: usize,
    pub grid: GridSpec,
    pub seed: Seed,
}

impl SolveConfig {
    /// Defaults for `a`, with the grid end chosen by [`default_x_max`].
    pub fn new(a: f64) -> Self {
        SolveConfig {
            a,
            tol: 1e-7,
            max_iter: 50,
            grid: GridSpec::default().with_x_max(default_x_max(a)),
            seed: Seed::Auto,
        }
    }

    pub fn validate(&self) -> Result<(), SolveError> {
        if !(self.a <= 1.0) || !self.a.is_finite() {
            return Err(SolveError::InvalidConfig(format!("a must satisfy a <= 1, got {}", self.a)));
        }
        if !(self.tol > 0.0) {
            return Err(SolveError::InvalidConfig(format!("tol must be positive, got {}", self.tol)));
        }
        if self.max_iter == 0 {
            return Err(SolveError::InvalidConfig("max_iter must be at least 1".into()));
        }
        let g = &self.grid;
        if !(g.h > 0.0 && g.uniform_end > 0.0 && g.ratio >= 1.0 && g.x_max > 1.0) {
            return Err(SolveError::InvalidConfig(format!("invalid grid {g:?}")));
        }
        Ok(())
    }
}

/// Grid end: `10⁴` for `a >= 0`. For `a < 0` the decay exponent approaches 1 and
/// the end grows so that `X^{1-r}` stays small, up to `10²⁰`.
pub fn default_x_max(a: f64) -> f64 {
    if a >= 0.0 {
        return 1e4;
    }
    let m = a.abs();
    let r_lo = 2.0 * (1.0 + m) / (1.0 + 2.0 * m);
    let decades = (3.5 / (r_lo - 1.0)).clamp(4.0, 20.0).ceil();
    10f64.powf(decades)
}

/// `2(1-a)b / ((1-a/3)c - 2ab)`, or `None` when the denominator is not positive.
pub fn r_a(a: f64, b: f64, c: f64) -> Option<f64> {
    let den = (1.0 - a / 3.0) * c - 2.0 * a * b;
    if den > 0.0 {
        Some(2.0 * (1.0 - a) * b / den)
    } else {
        None
    }
}

/// `R_a(f)`, with `R_0` for `|a| < A_SWITCH`.
pub fn apply_ra(f: &ProfileGrid, a: f64) -> Result<ProfileGrid, SolveError> {
    let grid = f.grid();
    let x_max = grid.x_max;
    if a > 0.0 && f.tail().kind == TailKind::Compact {
        let end = (4.0 * f.tail().l).min(x_max);
        if end < x_max {
            let tf = apply_t_on(f, &grid.nodes_to(end))?;
            let lam = lambda(a, tf.c);
            if find_root(&tf, lam).is_some() {
                return build_ra(&tf, a, grid);
            }
        }
    }
    let tf = apply_t_on(f, &grid.nodes())?;
    build_ra(&tf, a, grid)
}

pub fn apply_r0(f: &ProfileGrid) -> Result<ProfileGrid, SolveError> {
    let tf = apply_t_on(f, &f.grid().nodes())?;
    build_ra(&tf, 0.0, f.grid())
}

fn build_ra(tf: &TransformField, a: f64, grid: GridSpec) -> Result<ProfileGrid, SolveError> {
    let zero = a.abs() < A_SWITCH;
    let lam = if zero { 0.0 } else { lambda(a, tf.c) };
    let n = tf.nodes.len();
    let root = if zero { None } else { find_root(tf, lam) };
    let g_inf = 1.0 - lam * tf.b;
    // Compact: a root inside the grid, or a negative limit with the root beyond it.
    let support = match root {
        Some(l) => Some(l),
        None if !zero && a > 0.0 && g_inf < 0.0 => Some(tf.nodes[n - 1]),
        None => None,
    };
    let out_nodes = match support {
        Some(l) if l < tf.nodes[n - 1] => grid.nodes_to(l),
        _ => tf.nodes.clone(),
    };
    let m = out_nodes.len();
    let upto = if support.is_some() { m - 1 } else { m };
    debug_assert!(out_nodes[..upto].iter().zip(&tf.nodes).all(|(p, q)| p == q));
    let psi = psi_cumulative(tf, lam, root, upto);
    let mut values = Vec::with_capacity(m);
    for i in 0..upto {
        let t = tf.values_t[i];
        let lh = if zero {
            2.0 / tf.c * (t + psi[i])
        } else {
            let g = 1.0 + lam * t;
            if g <= 0.0 {
                f64::NEG_INFINITY
            } else {
                (lam * t).ln_1p() / a + (1.0 - a) * (lam / a) * psi[i]
            }
        };
        values.push(lh.exp());
    }
    let tail = match support {
        Some(l) => {
            values.push(0.0);
            TailModel::compact(l.min(tf.nodes[n - 1]))
        }
        None => far_field(tf, a, &out_nodes, &values),
    };
    values[0] = 1.0;
    Ok(ProfileGrid::new(out_nodes, values, tail, grid)?)
}

/// Tail of `R_a(f)` past the grid: exponent `r_a(f)`, coefficient from continuity
/// at the last node.
fn far_field(tf: &TransformField, a: f64, nodes: &[f64], values: &[f64]) -> TailModel {
    let n = nodes.len() - 1;
    let den = (1.0 - a / 3.0) * tf.c - 2.0 * a * tf.b;
    if den.abs() <= CLASS_TOL * tf.c {
        let (x0, x1) = (nodes[n - 1], nodes[n]);
        let rate = (values[n - 1].ln() - values[n].ln()) / (x1 * x1 - x0 * x0);
        return TailModel::gaussian(if rate.is_finite() { rate.max(0.0) } else { 0.0 });
    }
    match r_a(a, tf.b, tf.c) {
        Some(r) => {
            let lc = values[n].ln() + r * nodes[n].ln();
            let c = if values[n] > 0.0 && lc.is_finite() { lc.exp() } else { 0.0 };
            TailModel::algebraic(r, c)
        }
        None => TailModel::gaussian(0.0),
    }
}

/// `ψ(x_i) = ∫_0^{x_i} T/(y·(1 + λT)) dy` at the first `upto` nodes of the field.
/// When `1 + λT` has a root `L`, the pole `σ/(y - L)` is integrated exactly on
/// panels to the right of `L/2`.
fn psi_cumulative(tf: &TransformField, lam: f64, root: Option<f64>, upto: usize) -> Vec<f64> {
    let xs = &tf.nodes;
    let pole = root.map(|l| {
        let sigma = -1.0 / (lam * lam * l * tf.tprime_at(l));
        (l, sigma)
    });
    let mut psi = vec![0.0; upto];
    for j in 0..upto.saturating_sub(1) {
        let (p, q) = (xs[j], xs[j + 1]);
        let integrand = |y: f64| {
            let t = tf.s_in_panel(j, y).0 - tf.b;
            t / (y * (1.0 + lam * t))
        };
        let piece = match pole {
            Some((l, sigma)) if p >= 0.5 * l && q < l => {
                gl8(p, q, |y| integrand(y) - sigma / (y - l)) + sigma * ((l - q) / (l - p)).ln()
            }
            _ => gl8(p, q, integrand),
        };
        psi[j + 1] = psi[j] + piece;
    }
    psi
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Support {
    pub kind: TailKind,
    #[serde(rename = "L")]
    pub l: Option<f64>,
    pub p_a: Option<f64>,
    pub r: Option<f64>,
    #[serde(rename = "C")]
    pub c: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Diagnostics {
    pub x_max: f64,
    pub nodes: usize,
    /// Negated ratio from the μ formula, `(1 - a(2-μ))/(1 - aμ)`.
    pub gamma_from_mu: f64,
    pub gamma_discrepancy: f64,
    /// `k - (1-a/3)/(1+aμ)`.
    pub k_formula_residual: f64,
    pub u2: Option<f64>,
    pub r_fit: Option<f64>,
    pub c_fit: Option<f64>,
    pub worst_admissibility_violation: f64,
    /// `min ln(f(x)/ℓ(x))` over nodes `x >= 1` for algebraic decay, where
    /// `ℓ(x) = (1 - 2ak/(1-a/3))^{1/a}·e^{-1/3}·x^{-r_a}` is the pointwise lower bound.
    pub lower_bound_margin: Option<f64>,
    /// `((1-a)/2a)·b/b₂` for Gaussian-class decay.
    pub gaussian_rate_check: Option<f64>,
    pub residual_history: Vec<f64>,
}

fn ser_inf<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
    if v.is_finite() {
        s.serialize_f64(*v)
    } else {
        s.serialize_str("inf")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolveResult {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub k: f64,
    pub mu: f64,
    #[serde(rename = "Q")]
    pub q: f64,
    pub c_l: f64,
    pub c_omega: f64,
    pub gamma: f64,
    /// `+∞` for compact support, serialized as `"inf"`.
    #[serde(serialize_with = "ser_inf")]
    pub r_a: f64,
    pub support: Support,
    pub iterations: usize,
    pub residual: f64,
    pub identity_residuals: BTreeMap<String, Option<f64>>,
    pub diagnostics: Diagnostics,
    pub config: SolveConfig,
    #[serde(skip)]
    pub profile: ProfileGrid,
    /// `T_a(f)` on the profile nodes.
    #[serde(skip)]
    pub g: Vec<f64>,
}

impl SolveResult {
    /// Rows `x, f, g, ω = -x·f`.
    pub fn rows(&self) -> impl Iterator<Item = [f64; 4]> + '_ {
        self.profile
            .nodes()
            .iter()
            .zip(self.profile.values())
            .zip(&self.g)
            .map(|((&x, &f), &g)| [x, f, g, -x * f])
    }

    pub fn gamma_ratio(&self) -> f64 {
        self.gamma
    }
}

/// Support type from the sign of `(1 - a/3)c - 2ab`.
pub fn classify_support(a: f64, b: f64, c: f64) -> TailKind {
    let den = (1.0 - a / 3.0) * c - 2.0 * a * b;
    if den.abs() <= CLASS_TOL * c {
        TailKind::GaussianClass
    } else if den < 0.0 {
        TailKind::Compact
    } else {
        TailKind::Algebraic
    }
}

/// `γ = -c_l/c_ω`.
pub fn gamma_ratio(result: &SolveResult) -> f64 {
    -result.c_l / result.c_omega
}

fn seed_profile(cfg: &SolveConfig) -> Result<ProfileGrid, SolveError> {
    let seed = match &cfg.seed {
        Seed::Auto if cfg.a < 0.0 => {
            let m = cfg.a.abs();
            power_profile((1.0 + m) / (1.0 + 2.0 * m), cfg.grid)
        }
        Seed::Auto | Seed::Lorentzian => make_profile(Builtin::SeedLorentzian, cfg.grid),
        Seed::Profile { profile, .. } => profile.resample(cfg.grid)?,
    };
    Ok(renormalize(&seed)?)
}

/// Iterates `f ← renormalize(R_a(f))` until `‖ρ(f - R_a(f))‖ <= tol`.
pub fn solve(cfg: &SolveConfig) -> Result<SolveResult, SolveError> {
    cfg.validate()?;
    let mut f = seed_profile(cfg)?;
    let mut history = Vec::new();
    let mut worst = check_admissibility(&f).worst_violation();
    for it in 1..=cfg.max_iter {
        let h = apply_ra(&f, cfg.a)?;
        let res = residual_norm(&f, &h);
        history.push(res);
        if res <= cfg.tol {
            return assemble(cfg, f, it, res, history, worst);
        }
        f = renormalize(&h)?;
        worst = worst.max(check_admissibility(&f).worst_violation());
    }
    Err(SolveError::NotConverged {
        iterations: cfg.max_iter,
        residual: *history.last().unwrap(),
        last: Box::new(f),
    })
}

fn assemble(
    cfg: &SolveConfig,
    f: ProfileGrid,
    iterations: usize,
    residual: f64,
    residual_history: Vec<f64>,
    worst: f64,
) -> Result<SolveResult, SolveError> {
    let a = cfg.a;
    let tf = apply_t(&f)?;
    let (b, c) = (tf.b, tf.c);
    let k = b / c;
    let q = compute_q(&f)?;
    let mu = 2.0 * q / (b * b);
    let c_l = (1.0 - a / 3.0) * c / 2.0 - a * b;
    let c_omega = c_l - (1.0 - a) * b;
    let gamma = -c_l / c_omega;
    let gamma_from_mu = (1.0 - a * (2.0 - mu)) / (1.0 - a * mu);
    let kind = classify_support(a, b, c);
    let fit = fit_tail_exponent(&f).ok();
    let support = match kind {
        TailKind::Compact => {
            let l = f.x_max();
            let tp = tf.values_tprime[tf.nodes.len() - 1];
            let p_a = 1.0 / a
                + (1.0 - a) / a * (1.0 - a / 3.0) * c / (l * 2.0 * a * tp.abs());
            Support { kind, l: Some(l), p_a: Some(p_a), r: None, c: None }
        }
        TailKind::Algebraic => {
            let t = f.tail();
            Support { kind, l: None, p_a: None, r: r_a(a, b, c), c: Some(t.c) }
        }
        TailKind::GaussianClass => {
            Support { kind, l: None, p_a: None, r: None, c: gaussian_rate(&f) }
        }
    };
    let ta = if a.abs() < A_SWITCH {
        vec![1.0; f.len()]
    } else {
        ta_from(&tf, a).values
    };
    let identity_residuals = (0..=2u32)
        .map(|p| (p.to_string(), identity_residual_from(&tf, a, p).ok()))
        .collect();
    Ok(SolveResult {
        a,
        b,
        c,
        k,
        mu,
        q,
        c_l,
        c_omega,
        gamma,
        r_a: r_a(a, b, c).unwrap_or(f64::INFINITY),
        support,
        iterations,
        residual,
        identity_residuals,
        diagnostics: Diagnostics {
            x_max: cfg.grid.x_max,
            nodes: f.len(),
            gamma_from_mu,
            gamma_discrepancy: (gamma - gamma_from_mu).abs(),
            k_formula_residual: k - (1.0 - a / 3.0) / (1.0 + a * mu),
            u2: u_from(&tf, 2).ok(),
            r_fit: fit.map(|p| p.0),
            c_fit: fit.map(|p| p.1),
            worst_admissibility_violation: worst,
            lower_bound_margin: lower_bound_margin(&f, a, k, r_a(a, b, c)),
            gaussian_rate_check: (kind == TailKind::GaussianClass)
                .then(|| compute_b_p(&f, 2).ok().map(|b2| (1.0 - a) / (2.0 * a) * b / b2))
                .flatten(),
            residual_history,
        },
        config: cfg.clone(),
        profile: f,
        g: ta,
    })
}

fn lower_bound_margin(f: &ProfileGrid, a: f64, k: f64, r: Option<f64>) -> Option<f64> {
    let r = r?;
    let base = 1.0 - 2.0 * a * k / (1.0 - a / 3.0);
    let ln_coef = if a.abs() < A_SWITCH { -2.0 * k } else { base.ln() / a };
    f.nodes()
        .iter()
        .zip(f.values())
        .filter(|&(&x, _)| x >= 1.0)
        .map(|(&x, &v)| v.ln() - (ln_coef - 1.0 / 3.0 - r * x.ln()))
        .reduce(f64::min)
}

/// `-lim ln f / x²`, fitted over the outer decade of nodes.
fn gaussian_rate(f: &ProfileGrid) -> Option<f64> {
    let x_end = f.x_max();
    let pts: Vec<(f64, f64)> = f
        .nodes()
        .iter()
        .zip(f.values())
        .filter(|&(&x, &v)| x >= 0.1 * x_end && v > 0.0)
        .map(|(&x, &v)| (x * x, v.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let m = pts.len() as f64;
    let (sx, sy) = pts.iter().fold((0.0, 0.0), |(a, b), p| (a + p.0, b + p.1));
    let (mx, my) = (sx / m, sy / m);
    let (sxy, sxx) = pts
        .iter()
        .fold((0.0, 0.0), |(a, b), p| (a + (p.0 - mx) * (p.1 - my), b + (p.0 - mx).powi(2)));
    Some(-sxy / sxx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profile::check_admissibility_with;
    use crate::specfun::constants;
    use std::f64::consts::SQRT_2;

    #[test]
    fn x_max_defaults() {
        assert_eq!(default_x_max(0.5), 1e4);
        assert_eq!(default_x_max(0.0), 1e4);
        assert_eq!(default_x_max(-0.5), 1e7);
        assert_eq!(default_x_max(-3.0), 1e20);
    }

    #[test]
    fn config_validation() {
        assert!(SolveConfig::new(1.5).validate().is_err());
        assert!(SolveConfig::new(f64::NAN).validate().is_err());
        let mut c = SolveConfig::new(0.2);
        c.tol = 0.0;
        assert!(c.validate().is_err());
        assert!(SolveConfig::new(1.0).validate().is_ok());
    }

    #[test]
    fn ra_fixes_closed_forms() {
        let g = GridSpec::default();
        let fh = make_profile(Builtin::FHalf, g);
        let h = apply_ra(&fh, 0.5).unwrap();
        assert_eq!(h.eval(0.0), 1.0);
        assert!(residual_norm(&h, &fh) < 1e-6, "{}", residual_norm(&h, &fh));
        let fl = make_profile(Builtin::SeedLorentzian, g);
        let h = apply_r0(&fl).unwrap();
        assert!(residual_norm(&h, &fl) < 1e-6, "{}", residual_norm(&h, &fl));
        // The log1p path is continuous with the a = 0 formula.
        let h2 = apply_ra(&fl, 2e-6).unwrap();
        assert!(residual_norm(&h, &h2) < 1e-5);
    }

    #[test]
    fn r0_of_fm_has_full_support() {
        let fm = make_profile(Builtin::FM, GridSpec::default());
        let h = apply_r0(&fm).unwrap();
        assert_ne!(h.tail().kind, TailKind::Compact);
        assert!(h.values().iter().all(|&v| v > 0.0));
        assert_eq!(h.values()[0], 1.0);
    }

    #[test]
    fn ra_preserves_admissibility_at_08() {
        let g = GridSpec::default();
        for kind in [Builtin::SeedLorentzian, Builtin::FM, Builtin::FHalf] {
            let h = apply_ra(&make_profile(kind, g), 0.8).unwrap();
            let rep = check_admissibility_with(&h, 1e-9);
            assert!(rep.is_member, "{kind:?} {rep:?}");
            assert!(rep.slope_at_half <= -constants().eta);
        }
    }

    #[test]
    fn solve_a_half() {
        let r = solve(&SolveConfig::new(0.5)).unwrap();
        let fh = make_profile(Builtin::FHalf, GridSpec::default());
        assert!(residual_norm(&r.profile, &fh) < 1e-4);
        assert!((r.c_l - SQRT_2 / 16.0).abs() < 1e-4);
        assert!((r.gamma - 1.0 / 3.0).abs() < 1e-3);
        assert_eq!(r.support.kind, TailKind::Algebraic);
        assert!((r.support.r.unwrap() - 4.0).abs() < 0.05);
    }
}
