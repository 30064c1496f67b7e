mod common;

use std::f64::consts::{LN_2, PI, SQRT_2};

use common::oracle;
use gclm_core::profile::{make_profile, Builtin, GridSpec};
use gclm_core::reference::{exact, golden};
use gclm_core::transform::{apply_t, compute_b, compute_c, compute_q};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

fn lorentz(x: f64) -> f64 {
    1.0 / (1.0 + x * x)
}

fn half(x: f64) -> f64 {
    4.0 / (2.0 + x * x).powi(2)
}

fn fm(x: f64) -> f64 {
    (1.0 - x * x).max(0.0)
}

fn rel(x: f64, y: f64) -> f64 {
    ((x - y) / y).abs()
}

#[test]
fn golden_b_c_against_quadrature() {
    let g = golden();
    let lq = |y: f64| 1.0 / (1.0 + y * y);
    let hq = |y: f64| (4.0 + y * y) / (2.0 + y * y).powi(2);
    let mq = |y: f64| if y < 1.0 { 1.0 } else { 1.0 / (y * y) };
    let cases: [(&str, &dyn Fn(f64) -> f64, &dyn Fn(f64) -> f64, &[f64]); 3] = [
        ("a0", &lorentz, &lq, &[1.0]),
        ("a_half", &half, &hq, &[1.0]),
        ("f_m", &fm, &mq, &[1.0]),
    ];
    for (key, f, quot, br) in cases {
        let e = &g.entries[key];
        let b = if key == "f_m" {
            2.0 / PI * oracle::integrate(f, 0.0, 1.0, 1e-15)
        } else {
            oracle::b_value(f, br)
        };
        assert!(rel(b, e.b.unwrap()) < 1e-11, "{key} b {b}");
        let c = oracle::c_value(quot, br);
        assert!(rel(c, e.c.unwrap()) < 1e-11, "{key} c {c}");
        assert!(rel(b / c, e.k.unwrap()) < 1e-11, "{key} k");
    }
    let p = g.entries["f_m_p"].p.unwrap();
    let edge = (1.0 - p).sqrt();
    let fmp_q = |y: f64| if y < edge { 1.0 } else { (1.0 - p) / (y * y) };
    let c = oracle::c_value(&fmp_q, &[edge]);
    assert!(rel(c, g.entries["f_m_p"].c.unwrap()) < 1e-11, "f_m_p c {c}");
}

#[test]
fn golden_q_mu_against_double_quadrature() {
    let g = golden();
    for (key, f, end) in [
        ("a0", &lorentz as &dyn Fn(f64) -> f64, None),
        ("a_half", &half, None),
        ("f_m", &fm, Some(1.0)),
    ] {
        let e = &g.entries[key];
        let q = oracle::q_value(f, end, 1e-12);
        assert!(rel(q, e.q.unwrap()) < 1e-8, "{key} Q {q} vs {}", e.q.unwrap());
        let b = e.b.unwrap();
        assert!(rel(2.0 * q / (b * b), e.mu.unwrap()) < 1e-8, "{key} mu");
    }
    assert!((g.entries["a0"].q.unwrap() - (LN_2 - 0.5)).abs() < 1e-15);
    assert!((g.entries["a_half"].c_l.unwrap() - SQRT_2 / 16.0).abs() < 1e-15);
}

#[test]
fn transform_matches_raw_kernel_at_random_nodes() {
    let grid = GridSpec::default();
    let mut rng = StdRng::seed_from_u64(20);
    let lp = |y: f64| -2.0 * y / (1.0 + y * y).powi(2);
    let hp = |y: f64| -16.0 * y / (2.0 + y * y).powi(3);
    let mp = |y: f64| if y < 1.0 { -2.0 * y } else { 0.0 };
    let cases: [(Builtin, &dyn Fn(f64) -> f64, Option<f64>); 3] =
        [(Builtin::SeedLorentzian, &lp, None), (Builtin::FHalf, &hp, None), (Builtin::FM, &mp, Some(1.0))];
    for (kind, fp, support) in cases {
        let f = make_profile(kind, grid);
        let tf = apply_t(&f).unwrap();
        for _ in 0..20 {
            let i = rng.random_range(1..tf.nodes.len());
            let x = tf.nodes[i];
            let want = oracle::s_value(fp, support, x);
            assert!((tf.values_s[i] - want).abs() < 1e-8, "{kind:?} x={x}: {} vs {want}", tf.values_s[i]);
        }
    }
}

#[test]
fn functionals_match_quadrature() {
    let grid = GridSpec::default();
    for (key, kind) in [("a0", Builtin::SeedLorentzian), ("a_half", Builtin::FHalf), ("f_m", Builtin::FM)] {
        let f = make_profile(kind, grid);
        let s = exact(key).unwrap().scalars;
        assert!(rel(compute_b(&f).unwrap(), s.b.unwrap()) < 1e-8, "{key}");
        assert!(rel(compute_c(&f), s.c.unwrap()) < 1e-8, "{key}");
    }
    let q = compute_q(&make_profile(Builtin::FM, grid)).unwrap();
    let brute = oracle::q_value(&fm, Some(1.0), 1e-10);
    assert!((q - brute).abs() < 1e-5, "{q} vs {brute}");
}
