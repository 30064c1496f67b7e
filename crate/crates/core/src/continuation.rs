//! Parameter sweeps, the critical-parameter search and tail fits.

use rayon::prelude::*;
use serde::Serialize;

use crate::fixpoint::{default_x_max, solve, Seed, SolveConfig, SolveError, SolveResult};
use crate::profile::{GridSpec, ProfileError, ProfileGrid, TailKind};

/// Largest parameter step taken in continuation mode.
pub const MAX_STEP: f64 = 0.1;

/// Grid end used by the critical-parameter search.
pub const CRITICAL_X_MAX: f64 = 1e5;

/// Default search bracket.
pub const DEFAULT_BRACKET: (f64, f64) = (0.5269, 0.7342);

#[derive(Debug, thiserror::Error)]
pub enum SweepError {
    #[error("invalid sweep input: {0}")]
    InvalidInput(String),
    #[error("no sign change of 2ak - (1 - a/3) on [{a_lo}, {a_hi}] (values {s_lo:e}, {s_hi:e})")]
    Bracket { a_lo: f64, a_hi: f64, s_lo: f64, s_hi: f64 },
    #[error("solve failed at a = {a}: {source}")]
    Solve { a: f64, source: SolveError },
    #[error("thread pool: {0}")]
    ThreadPool(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepMode {
    Continuation,
    ColdStart,
}

/// Settings shared by every solve of a sweep. `x_max = None` picks the grid end
/// per `a`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BaseConfig {
    pub tol: f64,
    pub max_iter: usize,
    pub grid: GridSpec,
    pub x_max: Option<f64>,
}

impl Default for BaseConfig {
    fn default() -> Self {
        BaseConfig { tol: 1e-7, max_iter: 50, grid: GridSpec::default(), x_max: None }
    }
}

impl BaseConfig {
    pub fn at(&self, a: f64) -> SolveConfig {
        SolveConfig {
            a,
            tol: self.tol,
            max_iter: self.max_iter,
            grid: self.grid.with_x_max(self.x_max.unwrap_or_else(|| default_x_max(a))),
            seed: Seed::Auto,
        }
    }
}

/// Summary of one solve in a sweep.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRecord {
    pub a: f64,
    pub converged: bool,
    pub b: Option<f64>,
    pub c: Option<f64>,
    pub k: Option<f64>,
    pub mu: Option<f64>,
    pub c_l: Option<f64>,
    pub c_omega: Option<f64>,
    pub gamma: Option<f64>,
    pub r_a: Option<f64>,
    #[serde(rename = "L")]
    pub l: Option<f64>,
    pub p_a: Option<f64>,
    pub iterations: usize,
    pub residual: Option<f64>,
    pub error: Option<String>,
    #[serde(skip)]
    pub result: Option<Box<SolveResult>>,
}

impl SweepRecord {
    fn from_outcome(a: f64, outcome: Result<SolveResult, SolveError>) -> Self {
        match outcome {
            Ok(r) => SweepRecord {
                a,
                converged: true,
                b: Some(r.b),
                c: Some(r.c),
                k: Some(r.k),
                mu: Some(r.mu),
                c_l: Some(r.c_l),
                c_omega: Some(r.c_omega),
                gamma: Some(r.gamma),
                r_a: r.r_a.is_finite().then_some(r.r_a),
                l: r.support.l,
                p_a: r.support.p_a,
                iterations: r.iterations,
                residual: Some(r.residual),
                error: None,
                result: Some(Box::new(r)),
            },
            Err(e) => {
                let (iterations, residual) = match &e {
                    SolveError::NotConverged { iterations, residual, .. } => {
                        (*iterations, Some(*residual))
                    }
                    _ => (0, None),
                };
                SweepRecord {
                    a,
                    converged: false,
                    b: None,
                    c: None,
                    k: None,
                    mu: None,
                    c_l: None,
                    c_omega: None,
                    gamma: None,
                    r_a: None,
                    l: None,
                    p_a: None,
                    iterations,
                    residual,
                    error: Some(e.to_string()),
                    result: None,
                }
            }
        }
    }

    /// `2ak - (1 - a/3)`: negative for algebraic decay, positive for compact support.
    pub fn support_indicator(&self) -> Option<f64> {
        self.k.map(|k| support_indicator(self.a, k))
    }
}

pub fn support_indicator(a: f64, k: f64) -> f64 {
    2.0 * a * k - (1.0 - a / 3.0)
}

/// A pair of neighbouring profiles where `f_{a1} >= f_{a2}` fails by more than `1e-6`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MonotoneViolation {
    pub a1: f64,
    pub a2: f64,
    pub x: f64,
    pub deficit: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepTable {
    pub mode: SweepMode,
    pub records: Vec<SweepRecord>,
    pub a_c_estimate: Option<f64>,
    /// Sign changes of `2ak - (1 - a/3)` across converged records.
    pub crossings: usize,
    pub monotone_violations: Vec<MonotoneViolation>,
    pub gamma_decreasing: bool,
}

impl SweepTable {
    fn from_records(mode: SweepMode, records: Vec<SweepRecord>) -> Self {
        let ok: Vec<&SweepRecord> = records.iter().filter(|r| r.converged).collect();
        let mut crossings = 0;
        let mut a_c_estimate = None;
        let mut monotone_violations = Vec::new();
        let mut gamma_decreasing = true;
        for w in ok.windows(2) {
            let (r1, r2) = (w[0], w[1]);
            let (s1, s2) = (r1.support_indicator().unwrap(), r2.support_indicator().unwrap());
            if (s1 < 0.0) != (s2 < 0.0) {
                crossings += 1;
                a_c_estimate = Some(r1.a + (r2.a - r1.a) * s1 / (s1 - s2));
            }
            if r2.gamma.unwrap() >= r1.gamma.unwrap() {
                gamma_decreasing = false;
            }
            let (f1, f2) = (&r1.result.as_ref().unwrap().profile, &r2.result.as_ref().unwrap().profile);
            if let Some(v) = monotone_check(f1, f2) {
                monotone_violations.push(MonotoneViolation { a1: r1.a, a2: r2.a, x: v.0, deficit: v.1 });
            }
        }
        SweepTable { mode, records, a_c_estimate, crossings, monotone_violations, gamma_decreasing }
    }

    /// Header `a,b,c,k,mu,cl,cw,gamma,ra,L,pa,iters,residual`, empty cells where a
    /// value does not apply, and a `# {"a_c": ...}` footer.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("a,b,c,k,mu,cl,cw,gamma,ra,L,pa,iters,residual\n");
        let cell = |v: Option<f64>| v.map(|x| format!("{x}")).unwrap_or_default();
        for r in &self.records {
            let ra = if r.converged && r.r_a.is_none() { "inf".to_string() } else { cell(r.r_a) };
            let row = [
                format!("{}", r.a),
                cell(r.b),
                cell(r.c),
                cell(r.k),
                cell(r.mu),
                cell(r.c_l),
                cell(r.c_omega),
                cell(r.gamma),
                ra,
                cell(r.l),
                cell(r.p_a),
                r.iterations.to_string(),
                cell(r.residual),
            ];
            out.push_str(&row.join(","));
            out.push('\n');
        }
        let footer = serde_json::json!({ "a_c": self.a_c_estimate });
        out.push_str(&format!("# {footer}\n"));
        out
    }
}

/// Worst point where `f1 >= f2 - 1e-6` fails, over the nodes of both profiles.
fn monotone_check(f1: &ProfileGrid, f2: &ProfileGrid) -> Option<(f64, f64)> {
    let mut worst: Option<(f64, f64)> = None;
    for &x in f1.nodes().iter().chain(f2.nodes()) {
        let d = f2.eval(x) - f1.eval(x);
        if d > 1e-6 && worst.map_or(true, |w| d > w.1) {
            worst = Some((x, d));
        }
    }
    worst
}

fn validate_values(a_values: &[f64]) -> Result<(), SweepError> {
    if a_values.is_empty() {
        return Err(SweepError::InvalidInput("empty list of parameters".into()));
    }
    if let Some(a) = a_values.iter().find(|a| !(**a <= 1.0)) {
        return Err(SweepError::InvalidInput(format!("a must satisfy a <= 1, got {a}")));
    }
    if a_values.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(SweepError::InvalidInput("parameters must be strictly increasing".into()));
    }
    Ok(())
}

/// Solves every `a` in `a_values`. Continuation mode seeds each solve with the
/// previous profile, inserting intermediate solves so that no step exceeds
/// [`MAX_STEP`]. Cold-start mode solves independently on `jobs` threads.
pub fn sweep(
    a_values: &[f64],
    mode: SweepMode,
    base: &BaseConfig,
    jobs: Option<usize>,
) -> Result<SweepTable, SweepError> {
    validate_values(a_values)?;
    let records = match mode {
        SweepMode::Continuation => {
            let mut prev: Option<(f64, ProfileGrid)> = None;
            let mut records = Vec::with_capacity(a_values.len());
            for &a in a_values {
                if let Some((a0, _)) = &prev {
                    let steps = ((a - a0) / MAX_STEP - 1e-9).ceil().max(1.0) as usize;
                    let a0 = *a0;
                    for i in 1..steps {
                        let ai = a0 + (a - a0) * i as f64 / steps as f64;
                        if let Ok(r) = solve(&seeded(base, ai, prev.as_ref())) {
                            prev = Some((ai, r.profile));
                        }
                    }
                }
                let outcome = solve(&seeded(base, a, prev.as_ref()));
                if let Ok(r) = &outcome {
                    prev = Some((a, r.profile.clone()));
                }
                records.push(SweepRecord::from_outcome(a, outcome));
            }
            records
        }
        SweepMode::ColdStart => {
            let run = || -> Vec<SweepRecord> {
                a_values
                    .par_iter()
                    .map(|&a| SweepRecord::from_outcome(a, solve(&base.at(a))))
                    .collect()
            };
            match jobs {
                Some(n) => rayon::ThreadPoolBuilder::new()
                    .num_threads(n.max(1))
                    .build()
                    .map_err(|e| SweepError::ThreadPool(e.to_string()))?
                    .install(run),
                None => run(),
            }
        }
    };
    Ok(SweepTable::from_records(mode, records))
}

fn seeded(base: &BaseConfig, a: f64, prev: Option<&(f64, ProfileGrid)>) -> SolveConfig {
    let mut cfg = base.at(a);
    if let Some((a0, p)) = prev {
        if p.tail().kind != TailKind::Compact || p.tail().l <= cfg.grid.x_max {
            cfg.seed = Seed::Profile {
                label: format!("continuation from a = {a0}"),
                profile: Box::new(p.clone()),
            };
        }
    }
    cfg
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceEntry {
    pub a: f64,
    /// `2ak - (1 - a/3)`.
    pub s: f64,
    pub k: f64,
    pub iterations: usize,
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CriticalResult {
    pub a_c: f64,
    pub bracket: (f64, f64),
    pub tol_a: f64,
    pub trace: Vec<TraceEntry>,
}

/// Bisection on `s(a) = 2ak(a) - (1 - a/3)` until the bracket is at most `tol_a`
/// wide. Each solve is seeded with the profile of the nearest parameter solved
/// so far.
pub fn find_critical_a(
    bracket: (f64, f64),
    tol_a: f64,
    base: &BaseConfig,
) -> Result<CriticalResult, SweepError> {
    let (mut lo, mut hi) = bracket;
    if !(lo < hi && hi <= 1.0 && tol_a > 0.0) {
        return Err(SweepError::InvalidInput(format!(
            "need a_lo < a_hi <= 1 and tol_a > 0, got ({lo}, {hi}) and {tol_a}"
        )));
    }
    let base = BaseConfig { x_max: Some(base.x_max.unwrap_or(CRITICAL_X_MAX)), ..base.clone() };
    let mut solved: Vec<(f64, ProfileGrid)> = Vec::new();
    let mut trace = Vec::new();
    let mut eval = |a: f64| -> Result<f64, SweepError> {
        let near = solved
            .iter()
            .min_by(|p, q| (p.0 - a).abs().total_cmp(&(q.0 - a).abs()))
            .filter(|p| (p.0 - a).abs() <= MAX_STEP);
        let r = solve(&seeded(&base, a, near)).map_err(|source| SweepError::Solve { a, source })?;
        let s = support_indicator(a, r.k);
        trace.push(TraceEntry { a, s, k: r.k, iterations: r.iterations, residual: r.residual });
        solved.push((a, r.profile));
        Ok(s)
    };
    let s_lo = eval(lo)?;
    let s_hi = eval(hi)?;
    if (s_lo < 0.0) == (s_hi < 0.0) {
        return Err(SweepError::Bracket { a_lo: lo, a_hi: hi, s_lo, s_hi });
    }
    while hi - lo > tol_a {
        let mid = 0.5 * (lo + hi);
        let s = eval(mid)?;
        if (s < 0.0) == (s_lo < 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(CriticalResult { a_c: 0.5 * (lo + hi), bracket: (lo, hi), tol_a, trace })
}

/// Least-squares fit of `ln f = ln C - r·ln x` over the outer decade of nodes.
/// Returns `(r, C)`.
pub fn fit_tail_exponent(f: &ProfileGrid) -> Result<(f64, f64), ProfileError> {
    let x_end = f.x_max();
    let pts: Vec<(f64, f64)> = f
        .nodes()
        .iter()
        .zip(f.values())
        .filter(|&(&x, &v)| x >= 0.1 * x_end && x > 0.0 && v > 0.0)
        .map(|(&x, &v)| (x.ln(), v.ln()))
        .collect();
    if pts.len() < 8 {
        return Err(ProfileError::TooFewNodes);
    }
    let m = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let slope = sxy / sxx;
    Ok((-slope, (my - slope * mx).exp()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profile::{make_profile, Builtin};
    use std::f64::consts::SQRT_2;

    #[test]
    fn tail_fits() {
        let g = GridSpec::default();
        let (r, c) = fit_tail_exponent(&make_profile(Builtin::FHalf, g)).unwrap();
        assert!((r - 4.0).abs() < 0.05 && (c - 4.0).abs() < 0.2, "{r} {c}");
        let (r, c) = fit_tail_exponent(&make_profile(Builtin::SeedLorentzian, g)).unwrap();
        assert!((r - 2.0).abs() < 0.02 && (c - 1.0).abs() < 0.05, "{r} {c}");
        let coarse = GridSpec { h: 1.0, uniform_end: 2.0, ratio: 2.0, x_max: 16.0 };
        let tail = crate::profile::TailModel::algebraic(2.0, 1.0);
        let short = ProfileGrid::from_fn(coarse, tail, |x| 1.0 / (1.0 + x * x)).unwrap();
        assert!(fit_tail_exponent(&short).is_err());
    }

    #[test]
    fn rejects_bad_lists() {
        let b = BaseConfig::default();
        assert!(sweep(&[], SweepMode::ColdStart, &b, None).is_err());
        assert!(sweep(&[0.5, 0.0], SweepMode::ColdStart, &b, None).is_err());
        assert!(sweep(&[1.5], SweepMode::Continuation, &b, None).is_err());
    }

    #[test]
    fn continuation_reaches_half() {
        let t = sweep(&[0.0, 0.25, 0.5], SweepMode::Continuation, &BaseConfig::default(), None).unwrap();
        let r = &t.records[2];
        assert!(r.converged);
        let rel = |x: f64, y: f64| ((x - y) / y).abs();
        assert!(rel(r.b.unwrap(), SQRT_2 / 2.0) < 1e-3);
        assert!(rel(r.c.unwrap(), 3.0 * SQRT_2 / 4.0) < 1e-3);
        assert!(rel(r.mu.unwrap(), 0.5) < 1e-3);
        assert!(rel(r.c_l.unwrap(), SQRT_2 / 16.0) < 1e-3);
        assert_eq!(t.crossings, 0);
        assert!(t.gamma_decreasing);
        let csv = t.to_csv();
        assert!(csv.starts_with("a,b,c,k,mu,cl,cw,gamma,ra,L,pa,iters,residual\n"));
        assert!(csv.ends_with("# {\"a_c\":null}\n"));
    }

    #[test]
    fn bracket_without_sign_change() {
        match find_critical_a((0.0, 0.1), 5e-3, &BaseConfig::default()) {
            Err(SweepError::Bracket { s_lo, s_hi, .. }) => assert!(s_lo < 0.0 && s_hi < 0.0),
            other => panic!("{other:?}"),
        }
    }
}
