//! Random members of the admissible class: convex combinations of
//! `(1 + x²/ν)^-ν`, `exp(-x²)` and `(1 - x²)₊`. Each term equals 1 at the
//! origin, has slope -1 in `x²` there, and is nonincreasing, convex in `x²` and
//! at least `(1 - x²)₊`, so every mixture is too.

#![allow(dead_code)]

use gclm_core::profile::{GridSpec, ProfileGrid, TailModel};

#[derive(Debug, Clone)]
pub struct Mixture {
    /// `(weight, ν)` of the power terms, `ν > 1/2`.
    pub powers: Vec<(f64, f64)>,
    pub gauss: f64,
    pub compact: f64,
}

impl Mixture {
    /// Weights are normalized to sum to one; at least one power term is needed.
    pub fn new(powers: Vec<(f64, f64)>, gauss: f64, compact: f64) -> Self {
        let total: f64 = powers.iter().map(|p| p.0).sum::<f64>() + gauss + compact;
        Mixture {
            powers: powers.into_iter().map(|(w, n)| (w / total, n)).collect(),
            gauss: gauss / total,
            compact: compact / total,
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        let s = x * x;
        let mut v = self.gauss * (-s).exp() + self.compact * (1.0 - s).max(0.0);
        for &(w, nu) in &self.powers {
            v += w * (-nu * (s / nu).ln_1p()).exp();
        }
        v
    }

    pub fn profile(&self, grid: GridSpec) -> ProfileGrid {
        let nu = self.powers.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
        let r = 2.0 * nu;
        let x = grid.x_max;
        let c = (self.eval(x).ln() + r * x.ln()).exp();
        let mut f = ProfileGrid::from_fn(grid, TailModel::algebraic(r, c), |x| self.eval(x)).unwrap();
        if !(c > 0.0 && c.is_finite()) {
            f = f.with_tail(TailModel::algebraic(r, 0.0)).unwrap();
        }
        f
    }
}
