//! Discrete even profiles `f` on a graded grid.
//!
//! Values are interpolated with monotone cubic Hermite panels: in `s = x²` on
//! the uniform part of the grid, and as `ln f` against `ln x` on the stretched
//! part when the profile has no compact support. A linear-in-`s` scheme is kept
//! for comparison. Past the last node, a tail model supplies the values:
//! algebraic `C·x^-r`, a Gaussian-class decay, or compact support ending at the
//! last node.

use serde::{Deserialize, Serialize};

use crate::quad::polyfit;
use crate::specfun::constants;

/// Tolerance used by the shape checks.
pub const GRID_SLACK: f64 = 1e-9;

/// Curvature mismatch below which `renormalize` does not re-sample.
const RENORM_SKIP: f64 = 1e-7;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ProfileError {
    #[error("grid needs at least two nodes")]
    TooFewNodes,
    #[error("nodes and values differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("first node must be 0, got {0}")]
    FirstNode(f64),
    #[error("nodes must be strictly increasing (index {0})")]
    NotIncreasing(usize),
    #[error("non-finite value at index {0}")]
    NonFinite(usize),
    #[error("compact support end {0} does not match the last node {1}")]
    SupportMismatch(f64, f64),
    #[error("f(0) = {0} is not within 1e-3 of 1")]
    NotNormalized(f64),
    #[error("curvature at the origin is not negative (q = {0})")]
    Degenerate(f64),
}

/// Canonical grid: uniform spacing `h` on `[0, uniform_end]`, then the spacing
/// grows by `ratio` per node until `x_max`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub h: f64,
    pub uniform_end: f64,
    pub ratio: f64,
    pub x_max: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec { h: 0.01, uniform_end: 4.0, ratio: 1.05, x_max: 1e4 }
    }
}

impl GridSpec {
    pub fn with_x_max(self, x_max: f64) -> Self {
        GridSpec { x_max, ..self }
    }

    /// Nodes from 0 to `x_max` inclusive.
    pub fn nodes(&self) -> Vec<f64> {
        self.nodes_to(self.x_max)
    }

    /// Canonical nodes below `end`, closed by `end` itself. Nodes closer than half
    /// a local spacing to `end` are dropped.
    pub fn nodes_to(&self, end: f64) -> Vec<f64> {
        let mut xs = Vec::new();
        let n = (self.uniform_end / self.h).round() as usize;
        for i in 0..=n {
            let x = i as f64 * self.h;
            if x > end - 0.5 * self.h {
                break;
            }
            xs.push(x);
        }
        let mut x = *xs.last().unwrap_or(&0.0);
        if xs.len() == n + 1 {
            let mut dx = self.h;
            loop {
                dx *= self.ratio;
                let next = x + dx;
                if next > end - 0.5 * dx {
                    break;
                }
                xs.push(next);
                x = next;
            }
        }
        if xs.is_empty() {
            xs.push(0.0);
        }
        xs.push(end);
        xs
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TailKind {
    Algebraic,
    GaussianClass,
    Compact,
}

/// Far field beyond the last node.
///
/// `algebraic`: `f = c·x^-r`. `gaussian-class`: `f = f(X)·exp(-c·(x² - X²))`.
/// `compact`: `f = 0` beyond `l`, which is the last node.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailModel {
    pub kind: TailKind,
    pub r: f64,
    pub c: f64,
    pub l: f64,
}

impl TailModel {
    pub fn algebraic(r: f64, c: f64) -> Self {
        TailModel { kind: TailKind::Algebraic, r, c, l: f64::INFINITY }
    }

    pub fn gaussian(c: f64) -> Self {
        TailModel { kind: TailKind::GaussianClass, r: 0.0, c, l: f64::INFINITY }
    }

    pub fn compact(l: f64) -> Self {
        TailModel { kind: TailKind::Compact, r: 0.0, c: 0.0, l }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Interp {
    LinearInS,
    MonotoneCubicInS,
    /// Cubic in `s`, switching to log-log panels past `uniform_end`.
    MonotoneCubicHybrid,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProfileGrid {
    nodes: Vec<f64>,
    s: Vec<f64>,
    values: Vec<f64>,
    slopes: Vec<f64>,
    /// `d ln f / d ln x` at nodes from `log_start` on.
    log_slopes: Vec<f64>,
    log_start: usize,
    tail: TailModel,
    interp: Interp,
    grid: GridSpec,
}

impl ProfileGrid {
    pub fn new(
        nodes: Vec<f64>,
        values: Vec<f64>,
        tail: TailModel,
        grid: GridSpec,
    ) -> Result<Self, ProfileError> {
        Self::with_interp(nodes, values, tail, grid, Interp::MonotoneCubicHybrid)
    }

    pub fn with_interp(
        nodes: Vec<f64>,
        values: Vec<f64>,
        tail: TailModel,
        grid: GridSpec,
        interp: Interp,
    ) -> Result<Self, ProfileError> {
        if nodes.len() < 2 {
            return Err(ProfileError::TooFewNodes);
        }
        if nodes.len() != values.len() {
            return Err(ProfileError::LengthMismatch(nodes.len(), values.len()));
        }
        if nodes[0] != 0.0 {
            return Err(ProfileError::FirstNode(nodes[0]));
        }
        for i in 1..nodes.len() {
            if !(nodes[i] > nodes[i - 1]) {
                return Err(ProfileError::NotIncreasing(i));
            }
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(ProfileError::NonFinite(i));
        }
        let last = *nodes.last().unwrap();
        if tail.kind == TailKind::Compact && (tail.l - last).abs() > 1e-12 * last {
            return Err(ProfileError::SupportMismatch(tail.l, last));
        }
        let s: Vec<f64> = nodes.iter().map(|x| x * x).collect();
        let slopes = match interp {
            Interp::LinearInS => vec![0.0; s.len()],
            _ => monotone_slopes(&s, &values),
        };
        let n = nodes.len();
        let mut log_start = n;
        let mut log_slopes = Vec::new();
        if interp == Interp::MonotoneCubicHybrid && tail.kind != TailKind::Compact {
            let start = nodes.partition_point(|&x| x < grid.uniform_end * (1.0 - 1e-12));
            let end = (start..n).find(|&i| !(values[i] > 0.0)).unwrap_or(n);
            if end >= start + 2 {
                let lx: Vec<f64> = nodes[start..end].iter().map(|x| x.ln()).collect();
                let lv: Vec<f64> = values[start..end].iter().map(|v| v.ln()).collect();
                log_slopes = monotone_slopes(&lx, &lv);
                log_start = start;
            }
        }
        Ok(ProfileGrid { nodes, s, values, slopes, log_slopes, log_start, tail, interp, grid })
    }

    /// Samples `f` on the canonical nodes appropriate for `tail`.
    pub fn from_fn(
        grid: GridSpec,
        tail: TailModel,
        f: impl Fn(f64) -> f64,
    ) -> Result<Self, ProfileError> {
        let nodes = match tail.kind {
            TailKind::Compact => grid.nodes_to(tail.l),
            _ => grid.nodes(),
        };
        let mut values: Vec<f64> = nodes.iter().map(|&x| f(x)).collect();
        if tail.kind == TailKind::Compact {
            *values.last_mut().unwrap() = 0.0;
        }
        Self::new(nodes, values, tail, grid)
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn tail(&self) -> TailModel {
        self.tail
    }

    pub fn interp(&self) -> Interp {
        self.interp
    }

    pub fn grid(&self) -> GridSpec {
        self.grid
    }

    pub fn x_max(&self) -> f64 {
        *self.nodes.last().unwrap()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Index `j` of the panel `[nodes[j], nodes[j+1]]` holding `x`.
    pub fn panel_of(&self, x: f64) -> usize {
        let j = self.nodes.partition_point(|&n| n <= x);
        j.saturating_sub(1).min(self.nodes.len() - 2)
    }

    pub fn eval(&self, x: f64) -> f64 {
        let x = x.abs();
        if x > self.x_max() {
            return self.tail_value(x);
        }
        self.eval_in_panel(self.panel_of(x), x)
    }

    /// `f'(x)` with respect to `x`.
    pub fn deriv(&self, x: f64) -> f64 {
        let ax = x.abs();
        let d = if ax > self.x_max() {
            self.tail_deriv(ax)
        } else {
            self.deriv_in_panel(self.panel_of(ax), ax)
        };
        if x < 0.0 {
            -d
        } else {
            d
        }
    }

    #[inline]
    fn is_log(&self, j: usize) -> bool {
        j >= self.log_start && j + 1 < self.log_start + self.log_slopes.len()
    }

    /// `(ln f, d ln f / d ln x)` in a log-log panel.
    #[inline]
    fn log_panel(&self, j: usize, x: f64) -> (f64, f64) {
        let k = j - self.log_start;
        let (t0, t1) = (self.nodes[j].ln(), self.nodes[j + 1].ln());
        let (p0, p1) = (self.values[j].ln(), self.values[j + 1].ln());
        let (d0, d1) = (self.log_slopes[k], self.log_slopes[k + 1]);
        let h = t1 - t0;
        let t = (x.ln() - t0) / h;
        let t2 = t * t;
        let t3 = t2 * t;
        let v = (2.0 * t3 - 3.0 * t2 + 1.0) * p0
            + (t3 - 2.0 * t2 + t) * h * d0
            + (3.0 * t2 - 2.0 * t3) * p1
            + (t3 - t2) * h * d1;
        let dv = (6.0 * t2 - 6.0 * t) * (p0 - p1) / h
            + (3.0 * t2 - 4.0 * t + 1.0) * d0
            + (3.0 * t2 - 2.0 * t) * d1;
        (v, dv)
    }

    #[inline]
    pub fn eval_in_panel(&self, j: usize, x: f64) -> f64 {
        if self.is_log(j) {
            return self.log_panel(j, x).0.exp();
        }
        let (s0, s1) = (self.s[j], self.s[j + 1]);
        let (f0, f1) = (self.values[j], self.values[j + 1]);
        let h = s1 - s0;
        let t = (x * x - s0) / h;
        match self.interp {
            Interp::LinearInS => f0 + t * (f1 - f0),
            _ => {
                let t2 = t * t;
                let t3 = t2 * t;
                (2.0 * t3 - 3.0 * t2 + 1.0) * f0
                    + (t3 - 2.0 * t2 + t) * h * self.slopes[j]
                    + (3.0 * t2 - 2.0 * t3) * f1
                    + (t3 - t2) * h * self.slopes[j + 1]
            }
        }
    }

    /// `df/ds` inside panel `j`.
    #[inline]
    pub fn ds_in_panel(&self, j: usize, x: f64) -> f64 {
        if self.is_log(j) {
            let (v, dv) = self.log_panel(j, x);
            return v.exp() * dv / (2.0 * x * x);
        }
        let (s0, s1) = (self.s[j], self.s[j + 1]);
        let (f0, f1) = (self.values[j], self.values[j + 1]);
        let h = s1 - s0;
        match self.interp {
            Interp::LinearInS => (f1 - f0) / h,
            _ => {
                let t = (x * x - s0) / h;
                let t2 = t * t;
                ((6.0 * t2 - 6.0 * t) * (f0 - f1)) / h
                    + (3.0 * t2 - 4.0 * t + 1.0) * self.slopes[j]
                    + (3.0 * t2 - 2.0 * t) * self.slopes[j + 1]
            }
        }
    }

    #[inline]
    pub fn deriv_in_panel(&self, j: usize, x: f64) -> f64 {
        2.0 * x * self.ds_in_panel(j, x)
    }

    pub fn tail_value(&self, x: f64) -> f64 {
        match self.tail.kind {
            TailKind::Compact => 0.0,
            TailKind::Algebraic => {
                if self.tail.c <= 0.0 {
                    0.0
                } else {
                    (self.tail.c.ln() - self.tail.r * x.ln()).exp()
                }
            }
            TailKind::GaussianClass => {
                let xm = self.x_max();
                self.values.last().unwrap() * (-self.tail.c * (x * x - xm * xm)).exp()
            }
        }
    }

    pub fn tail_deriv(&self, x: f64) -> f64 {
        match self.tail.kind {
            TailKind::Compact => 0.0,
            TailKind::Algebraic => -self.tail.r * self.tail_value(x) / x,
            TailKind::GaussianClass => -2.0 * self.tail.c * x * self.tail_value(x),
        }
    }

    /// Tail value at the last node, `C·X^-r` for algebraic tails.
    pub fn tail_at_end(&self) -> f64 {
        match self.tail.kind {
            TailKind::Algebraic => self.tail_value(self.x_max()),
            _ => 0.0,
        }
    }

    /// Same nodes and tail, new values.
    pub fn with_values(&self, values: Vec<f64>) -> Result<Self, ProfileError> {
        Self::with_interp(self.nodes.clone(), values, self.tail, self.grid, self.interp)
    }

    pub fn with_tail(&self, tail: TailModel) -> Result<Self, ProfileError> {
        Self::with_interp(self.nodes.clone(), self.values.clone(), tail, self.grid, self.interp)
    }

    /// The same function sampled on the canonical nodes of `grid`, using the tail
    /// model past the current end.
    pub fn resample(&self, grid: GridSpec) -> Result<Self, ProfileError> {
        if self.tail.kind == TailKind::Compact && self.tail.l > grid.x_max {
            return Err(ProfileError::SupportMismatch(self.tail.l, grid.x_max));
        }
        Self::from_fn(grid, self.tail, |x| self.eval(x))
    }
}

/// Derivatives `df/ds` at the nodes: five-point Lagrange estimates limited so that
/// each Hermite panel stays monotone.
fn monotone_slopes(s: &[f64], v: &[f64]) -> Vec<f64> {
    let n = s.len();
    let sec: Vec<f64> = (0..n - 1).map(|j| (v[j + 1] - v[j]) / (s[j + 1] - s[j])).collect();
    if n == 2 {
        return vec![sec[0], sec[0]];
    }
    let mut d = vec![0.0; n];
    for i in 0..n {
        let hi = (i + 2).min(n - 1);
        let lo = hi.saturating_sub(4);
        let hi = (lo + 4).min(n - 1);
        let mut est = 0.0;
        for k in lo..=hi {
            est += v[k] * lagrange_weight(s, lo, hi, k, i);
        }
        let left = if i > 0 { Some(sec[i - 1]) } else { None };
        let right = if i + 1 < n { Some(sec[i]) } else { None };
        d[i] = limit(est, left, right);
    }
    d
}

/// Derivative at `s[i]` of the `k`-th Lagrange basis polynomial on `s[lo..=hi]`.
fn lagrange_weight(s: &[f64], lo: usize, hi: usize, k: usize, i: usize) -> f64 {
    let x = s[i];
    if k == i {
        (lo..=hi).filter(|&m| m != i).map(|m| 1.0 / (x - s[m])).sum()
    } else {
        let mut num = 1.0;
        let mut den = s[k] - s[i];
        for m in lo..=hi {
            if m != k && m != i {
                num *= x - s[m];
                den *= s[k] - s[m];
            }
        }
        num / den
    }
}

fn limit(est: f64, left: Option<f64>, right: Option<f64>) -> f64 {
    let secs: Vec<f64> = left.into_iter().chain(right).collect();
    if secs.iter().any(|&q| q == 0.0) {
        return 0.0;
    }
    let sign = secs[0].signum();
    if secs.iter().any(|&q| q.signum() != sign) || est.signum() != sign {
        return 0.0;
    }
    let cap = 3.0 * secs.iter().fold(f64::INFINITY, |m, &q| m.min(q.abs()));
    sign * est.abs().min(cap)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Builtin {
    SeedLorentzian,
    FM,
    FHalf,
}

pub fn make_profile(kind: Builtin, grid: GridSpec) -> ProfileGrid {
    let built = match kind {
        Builtin::SeedLorentzian => {
            ProfileGrid::from_fn(grid, TailModel::algebraic(2.0, 1.0), |x| 1.0 / (1.0 + x * x))
        }
        Builtin::FHalf => ProfileGrid::from_fn(grid, TailModel::algebraic(4.0, 4.0), |x| {
            let d = 2.0 + x * x;
            4.0 / (d * d)
        }),
        Builtin::FM => {
            ProfileGrid::from_fn(grid, TailModel::compact(1.0), |x| (1.0 - x * x).max(0.0))
        }
    };
    built.expect("built-in profiles are valid")
}

/// `(1 + x²/ν)^-ν`: unit curvature at the origin and decay `x^-2ν`.
pub fn power_profile(nu: f64, grid: GridSpec) -> ProfileGrid {
    ProfileGrid::from_fn(grid, TailModel::algebraic(2.0 * nu, nu.powf(nu)), |x| {
        (-nu * (x * x / nu).ln_1p()).exp()
    })
    .expect("power profiles are valid")
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdmissibilityReport {
    pub is_member: bool,
    pub worst_monotonicity_violation: f64,
    pub worst_convexity_violation: f64,
    pub bound_violation: f64,
    pub slope_at_half: f64,
}

impl AdmissibilityReport {
    pub fn worst_violation(&self) -> f64 {
        self.worst_monotonicity_violation
            .max(self.worst_convexity_violation)
            .max(self.bound_violation)
    }
}

pub fn check_admissibility(f: &ProfileGrid) -> AdmissibilityReport {
    check_admissibility_with(f, GRID_SLACK)
}

/// Convexity in `s` is measured as the height of each value above the chord of
/// its two neighbours, so violations are in units of `f`.
pub fn check_admissibility_with(f: &ProfileGrid, slack: f64) -> AdmissibilityReport {
    let v = &f.values;
    let s = &f.s;
    let mut mono: f64 = 0.0;
    for w in v.windows(2) {
        mono = mono.max(w[1] - w[0]);
    }
    let mut conv: f64 = 0.0;
    for i in 1..v.len() - 1 {
        let chord = ((s[i + 1] - s[i]) * v[i - 1] + (s[i] - s[i - 1]) * v[i + 1])
            / (s[i + 1] - s[i - 1]);
        conv = conv.max(v[i] - chord);
    }
    let mut bound: f64 = (v[0] - 1.0).abs();
    for (x, &y) in f.nodes.iter().zip(v) {
        let lower = (1.0 - x * x).max(0.0);
        bound = bound.max(y - 1.0).max(lower - y);
    }
    let slope_at_half = if f.x_max() >= 0.5 {
        let j = f.nodes.partition_point(|&n| n < 0.5).saturating_sub(1);
        f.deriv_in_panel(j.min(f.len() - 2), 0.5)
    } else {
        f.tail_deriv(0.5)
    };
    let is_member =
        mono <= slack && conv <= slack && bound <= slack && slope_at_half <= -constants().eta;
    AdmissibilityReport {
        is_member,
        worst_monotonicity_violation: mono,
        worst_convexity_violation: conv,
        bound_violation: bound,
        slope_at_half,
    }
}

/// `q = lim (1 - f(x))/x²` by weighted least squares with weights `x⁴`, over
/// `x <= 0.2` and then over `x <= 0.2/√q`.
pub fn curvature_estimate(f: &ProfileGrid) -> f64 {
    let q = fit_curvature(f, 0.2);
    if q > 0.0 && q.is_finite() {
        fit_curvature(f, 0.2 / q.sqrt())
    } else {
        q
    }
}

fn fit_curvature(f: &ProfileGrid, window: f64) -> f64 {
    let mut idx: Vec<usize> = (1..f.len()).filter(|&i| f.nodes[i] <= window).collect();
    if idx.len() < 6 {
        idx = (1..f.len().min(7)).collect();
    }
    let smax = f.s[*idx.last().unwrap()];
    let xs: Vec<f64> = idx.iter().map(|&i| f.s[i] / smax).collect();
    let ys: Vec<f64> = idx.iter().map(|&i| (f.values[0] - f.values[i]) / f.s[i]).collect();
    let ws: Vec<f64> = xs.iter().map(|x| x * x).collect();
    let degree = 5.min(idx.len() - 1);
    polyfit(&xs, &ys, &ws, degree)[0]
}

/// Divides by `f(0)` and rescales `x` so that the curvature at the origin is 1,
/// re-sampling onto the canonical grid.
pub fn renormalize(f: &ProfileGrid) -> Result<ProfileGrid, ProfileError> {
    let f0 = f.values[0];
    if !((f0 - 1.0).abs() <= 1e-3) {
        return Err(ProfileError::NotNormalized(f0));
    }
    let scaled: Vec<f64> = f.values.iter().map(|v| v / f0).collect();
    let mut tail = f.tail;
    if tail.kind == TailKind::Algebraic {
        tail.c /= f0;
    }
    let g = ProfileGrid::with_interp(f.nodes.clone(), scaled, tail, f.grid, f.interp)?;
    let q = curvature_estimate(&g);
    if !(q > 0.0) || !q.is_finite() {
        return Err(ProfileError::Degenerate(q));
    }
    if (q - 1.0).abs() < RENORM_SKIP {
        return Ok(g);
    }
    let beta = 1.0 / q.sqrt();
    let mut tail = g.tail;
    let nodes = match tail.kind {
        TailKind::Compact => {
            tail.l /= beta;
            f.grid.nodes_to(tail.l)
        }
        TailKind::Algebraic => {
            tail.c *= beta.powf(-tail.r);
            g.nodes.clone()
        }
        TailKind::GaussianClass => {
            tail.c *= beta * beta;
            g.nodes.clone()
        }
    };
    let mut values: Vec<f64> = nodes.iter().map(|&x| g.eval(beta * x)).collect();
    values[0] = 1.0;
    if tail.kind == TailKind::Compact {
        *values.last_mut().unwrap() = 0.0;
    }
    ProfileGrid::with_interp(nodes, values, tail, f.grid, f.interp)
}

#[inline]
pub fn rho(x: f64) -> f64 {
    1.0 / (1.0 + x.abs()).sqrt()
}

/// `max ρ(x)|f1(x) - f2(x)|` over the union of both node sets, extended
/// geometrically past the larger grid end so that tails are compared too.
pub fn residual_norm(f1: &ProfileGrid, f2: &ProfileGrid) -> f64 {
    let mut xs: Vec<f64> = f1.nodes.iter().chain(f2.nodes.iter()).copied().collect();
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    let end = f1.x_max().max(f2.x_max());
    let mut x = end;
    for _ in 0..40 {
        x *= 1.5;
        xs.push(x);
    }
    xs.iter().map(|&x| rho(x) * (f1.eval(x) - f2.eval(x)).abs()).fold(0.0, f64::max)
}
