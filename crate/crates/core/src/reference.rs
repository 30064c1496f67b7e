//! Closed-form solutions, golden scalars and the verification suite.

use std::collections::BTreeMap;
use std::f64::consts::{LN_2, PI, SQRT_2};

use serde::{Deserialize, Serialize};

use crate::fixpoint::{apply_r0, apply_ra, solve, SolveConfig};
use crate::profile::{make_profile, residual_norm, Builtin, GridSpec, ProfileGrid, TailModel};
use crate::specfun::{closed_form_f, constants, eval_f, eval_f4};
use crate::transform::{apply_t, compute_b, eval_pair, compute_c, compute_q};

const GOLDEN_JSON: &str = include_str!("../fixtures/golden_v1.json");

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ReferenceError {
    #[error("unknown reference solution {0:?} (expected a0, a_half, f_m or f_m_p)")]
    UnknownName(String),
    #[error("parameter p = {0} outside [0, 1)")]
    BadParameter(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExactName {
    A0,
    AHalf,
    FM,
    FMP,
}

impl ExactName {
    pub fn key(self) -> &'static str {
        match self {
            ExactName::A0 => "a0",
            ExactName::AHalf => "a_half",
            ExactName::FM => "f_m",
            ExactName::FMP => "f_m_p",
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Scalars {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu: Option<f64>,
    #[serde(default, rename = "Q", skip_serializing_if = "Option::is_none")]
    pub q: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c_l: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c_omega: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r_a: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExactSolution {
    pub name: ExactName,
    pub scalars: Scalars,
}

impl ExactSolution {
    pub fn f(&self, x: f64) -> f64 {
        let s = x * x;
        match self.name {
            ExactName::A0 => 1.0 / (1.0 + s),
            ExactName::AHalf => 4.0 / ((2.0 + s) * (2.0 + s)),
            ExactName::FM => (1.0 - s).max(0.0),
            ExactName::FMP => {
                let p = self.scalars.p.unwrap_or(0.0);
                (1.0 - s - p).max(0.0) + p
            }
        }
    }

    pub fn profile(&self, grid: GridSpec) -> ProfileGrid {
        match self.name {
            ExactName::A0 => make_profile(Builtin::SeedLorentzian, grid),
            ExactName::AHalf => make_profile(Builtin::FHalf, grid),
            ExactName::FM => make_profile(Builtin::FM, grid),
            ExactName::FMP => {
                let p = self.scalars.p.unwrap_or(0.0);
                ProfileGrid::from_fn(grid, TailModel::algebraic(0.0, p), |x| self.f(x))
                    .expect("valid profile")
            }
        }
    }
}

/// Catalog entry with scalars from their closed forms.
pub fn exact(name: &str) -> Result<ExactSolution, ReferenceError> {
    let (name, scalars) = match name {
        "a0" => (
            ExactName::A0,
            Scalars {
                a: Some(0.0),
                b: Some(1.0),
                c: Some(1.0),
                k: Some(1.0),
                mu: Some(2.0 * LN_2 - 1.0),
                q: Some(LN_2 - 0.5),
                c_l: Some(0.5),
                c_omega: Some(-0.5),
                r_a: Some(2.0),
                ..Scalars::default()
            },
        ),
        "a_half" => (
            ExactName::AHalf,
            Scalars {
                a: Some(0.5),
                b: Some(SQRT_2 / 2.0),
                c: Some(3.0 * SQRT_2 / 4.0),
                k: Some(2.0 / 3.0),
                mu: Some(0.5),
                q: Some(0.125),
                c_l: Some(SQRT_2 / 16.0),
                c_omega: Some(-3.0 * SQRT_2 / 16.0),
                r_a: Some(4.0),
                ..Scalars::default()
            },
        ),
        "f_m" => {
            let f41 = PI * PI / 32.0 - 1.0 / 6.0;
            (
                ExactName::FM,
                Scalars {
                    b: Some(4.0 / (3.0 * PI)),
                    c: Some(4.0 / PI),
                    k: Some(1.0 / 3.0),
                    mu: Some(constants().mu_bar),
                    q: Some(4.0 * f41 / (PI * PI)),
                    ..Scalars::default()
                },
            )
        }
        "f_m_p" => return exact_fm_p(0.36),
        other => return Err(ReferenceError::UnknownName(other.to_string())),
    };
    Ok(ExactSolution { name, scalars })
}

/// `(1 - x² - p)₊ + p`, with `c = (4/π)·√(1-p)`.
pub fn exact_fm_p(p: f64) -> Result<ExactSolution, ReferenceError> {
    if !(0.0..1.0).contains(&p) {
        return Err(ReferenceError::BadParameter(p));
    }
    let scalars = Scalars { p: Some(p), c: Some(4.0 / PI * (1.0 - p).sqrt()), ..Scalars::default() };
    Ok(ExactSolution { name: ExactName::FMP, scalars })
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct Golden {
    pub version: u32,
    pub entries: BTreeMap<String, Scalars>,
}

/// The shipped golden scalars.
pub fn golden() -> Golden {
    serde_json::from_str(GOLDEN_JSON).expect("golden fixture parses")
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VerifyTolerances {
    /// Relative error of computed functionals.
    pub scalar_rel: f64,
    /// Weighted distance between `R_a(f)` and `f` for exact fixed points.
    pub map_residual: f64,
    /// Weighted distance between a solved profile and its closed form.
    pub solve_residual: f64,
    /// Absolute error of solved scalars.
    pub solve_scalar: f64,
    pub mu_bar: f64,
    pub specfun: f64,
}

impl Default for VerifyTolerances {
    fn default() -> Self {
        VerifyTolerances {
            scalar_rel: 1e-6,
            map_residual: 1e-6,
            solve_residual: 1e-4,
            solve_scalar: 1e-3,
            mu_bar: 1e-3,
            specfun: 1e-12,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckKind {
    /// `|value - expected| <= tol`.
    Close,
    /// `value >= expected`.
    AtLeast,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub kind: CheckKind,
    pub value: f64,
    pub expected: f64,
    pub tol: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyReport {
    pub passed: bool,
    pub checks: Vec<Check>,
}

#[derive(Default)]
struct Checks(Vec<Check>);

impl Checks {
    fn close(&mut self, name: impl Into<String>, value: f64, expected: f64, tol: f64) {
        let pass = (value - expected).abs() <= tol;
        self.0.push(Check { name: name.into(), kind: CheckKind::Close, value, expected, tol, pass });
    }

    fn at_least(&mut self, name: impl Into<String>, value: f64, bound: f64) {
        let pass = value >= bound;
        let check = Check { name: name.into(), kind: CheckKind::AtLeast, value, expected: bound, tol: 0.0, pass };
        self.0.push(check);
    }
}

/// Compares the functionals, maps and solver against the closed forms and golden
/// scalars.
pub fn verify_all(tol: &VerifyTolerances) -> VerifyReport {
    let mut ck = Checks::default();
    let gold = golden();
    let grid = GridSpec::default();

    for t in [0.3, 0.5, 2.0, 5.0] {
        let v = eval_f(t).unwrap_or(f64::NAN);
        ck.close(format!("specfun.F({t})"), v, closed_form_f(t), tol.specfun * 2.0);
    }
    let v = eval_f(3.0).unwrap_or(f64::NAN) + eval_f(1.0 / 3.0).unwrap_or(f64::NAN);
    ck.close("specfun.F(3)+F(1/3)", v, 2.0, tol.specfun * 2.0);
    let f41 = PI * PI / 32.0 - 1.0 / 6.0;
    ck.close("specfun.F4(1)", eval_f4(1.0).unwrap_or(f64::NAN), f41, tol.specfun);

    for key in ["a0", "a_half", "f_m"] {
        let g = &gold.entries[key];
        let f = exact(key).expect("catalog entry").profile(grid);
        let b = compute_b(&f).unwrap_or(f64::NAN);
        let c = compute_c(&f);
        let q = compute_q(&f).unwrap_or(f64::NAN);
        for (name, v, e) in [
            ("b", b, g.b),
            ("c", c, g.c),
            ("k", b / c, g.k),
            ("Q", q, g.q),
            ("mu", 2.0 * q / (b * b), g.mu),
        ] {
            let e = e.expect("golden scalar");
            ck.close(format!("{key}.{name}"), v, e, tol.scalar_rel * e.abs());
        }
    }
    let g = &gold.entries["f_m_p"];
    let fmp = exact_fm_p(g.p.unwrap()).unwrap().profile(grid);
    ck.close("f_m_p.c", compute_c(&fmp), g.c.unwrap(), 1e-3);

    for key in ["a0", "a_half"] {
        let g = &gold.entries[key];
        let (a, b, c) = (g.a.unwrap(), g.b.unwrap(), g.c.unwrap());
        let cl = (1.0 - a / 3.0) * c / 2.0 - a * b;
        ck.close(format!("{key}.identity.c_l"), cl, g.c_l.unwrap(), 1e-12);
        ck.close(format!("{key}.identity.c_omega"), cl - (1.0 - a) * b, g.c_omega.unwrap(), 1e-12);
        let r = 2.0 * (1.0 - a) * b / ((1.0 - a / 3.0) * c - 2.0 * a * b);
        ck.close(format!("{key}.identity.r_a"), r, g.r_a.unwrap(), 1e-12);
        let k = (1.0 - a / 3.0) / (1.0 + a * g.mu.unwrap());
        ck.close(format!("{key}.identity.k"), k, g.k.unwrap(), 1e-12);
    }

    let lor = make_profile(Builtin::SeedLorentzian, grid);
    let t_err = apply_t(&lor)
        .map(|tf| {
            tf.nodes
                .iter()
                .zip(&tf.values_t)
                .skip(1)
                .map(|(&x, &t)| (t - (x.atan() / x - 1.0)).abs())
                .fold(0.0, f64::max)
        })
        .unwrap_or(f64::NAN);
    ck.close("a0.T", t_err, 0.0, 1e-8);

    let fm = make_profile(Builtin::FM, grid);
    for x in [2.0, 5.0, 10.0] {
        let lower = 4.0 / (15.0 * PI) / (x * x);
        ck.at_least(format!("f_m.T+b at {x}"), eval_pair(&fm, x).0, lower);
    }
    let mu_fm = compute_q(&fm).unwrap_or(f64::NAN) * 2.0 / compute_b(&fm).unwrap_or(f64::NAN).powi(2);
    ck.close("f_m.mu - mu_bar", mu_fm - constants().mu_bar, 0.0, tol.mu_bar);

    let r0 = apply_r0(&lor).map(|h| residual_norm(&h, &lor)).unwrap_or(f64::NAN);
    ck.close("a0.R0 fixed point", r0, 0.0, tol.map_residual);
    let fh = make_profile(Builtin::FHalf, grid);
    let rh = apply_ra(&fh, 0.5).map(|h| residual_norm(&h, &fh)).unwrap_or(f64::NAN);
    ck.close("a_half.R_a fixed point", rh, 0.0, tol.map_residual);

    for key in ["a0", "a_half"] {
        let g = &gold.entries[key];
        let exact_f = exact(key).unwrap().profile(grid);
        match solve(&SolveConfig::new(g.a.unwrap())) {
            Ok(r) => {
                ck.close(format!("{key}.solve profile"), residual_norm(&r.profile, &exact_f), 0.0, tol.solve_residual);
                ck.close(format!("{key}.solve c_l"), r.c_l, g.c_l.unwrap(), tol.solve_scalar);
                ck.close(format!("{key}.solve c_omega"), r.c_omega, g.c_omega.unwrap(), tol.solve_scalar);
                let gamma = g.c_l.unwrap() / -g.c_omega.unwrap();
                ck.close(format!("{key}.solve gamma"), r.gamma, gamma, tol.solve_scalar);
            }
            Err(_) => ck.close(format!("{key}.solve"), f64::NAN, 0.0, tol.solve_residual),
        }
    }

    let passed = ck.0.iter().all(|c| c.pass);
    VerifyReport { passed, checks: ck.0 }
}
