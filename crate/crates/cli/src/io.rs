use std::fs;
use std::path::{Path, PathBuf};

use gclm_core::continuation::fit_tail_exponent;
use gclm_core::fixpoint::SolveResult;
use gclm_core::profile::{GridSpec, ProfileGrid, TailKind, TailModel};
use serde::{Deserialize, Serialize};

/// `<path>` with its extension replaced by `meta.json`.
pub fn sidecar(path: &Path) -> PathBuf {
    path.with_extension("meta.json")
}

pub fn profile_csv(result: &SolveResult) -> String {
    let mut out = String::from("x,f,g,omega\n");
    for [x, f, g, w] in result.rows() {
        out.push_str(&format!("{x},{f},{g},{w}\n"));
    }
    out
}

#[derive(Serialize)]
pub struct WithProfile<'a> {
    #[serde(flatten)]
    result: &'a SolveResult,
    profile: Columns,
}

#[derive(Serialize)]
struct Columns {
    x: Vec<f64>,
    f: Vec<f64>,
    g: Vec<f64>,
    omega: Vec<f64>,
}

/// Metadata and profile columns in one document.
pub fn result_json(result: &SolveResult) -> WithProfile<'_> {
    let cols = |i: usize| result.rows().map(|r| r[i]).collect::<Vec<_>>();
    let profile = Columns { x: cols(0), f: cols(1), g: cols(2), omega: cols(3) };
    WithProfile { result, profile }
}

pub fn write(path: &Path, contents: &str) -> Result<(), String> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| format!("{}: {e}", dir.display()))?;
    }
    fs::write(path, contents).map_err(|e| format!("{}: {e}", path.display()))
}

pub fn to_json(v: &impl serde::Serialize) -> String {
    serde_json::to_string_pretty(v).expect("serializable") + "\n"
}

#[derive(Deserialize)]
struct Meta {
    support: SupportMeta,
}

#[derive(Deserialize)]
struct SupportMeta {
    kind: TailKind,
    r: Option<f64>,
    #[serde(rename = "C")]
    c: Option<f64>,
}

/// Reads a profile from a CSV with columns `x` and `f`. The tail comes from a
/// `.meta.json` sidecar when present; otherwise a zero last value means compact
/// support and anything else gets a fitted power law.
pub fn read_profile(path: &Path) -> Result<ProfileGrid, String> {
    let err = |e: &dyn std::fmt::Display| format!("{}: {e}", path.display());
    let mut rdr = csv::Reader::from_path(path).map_err(|e| err(&e))?;
    let headers = rdr.headers().map_err(|e| err(&e))?.clone();
    let col = |name: &str| {
        headers.iter().position(|h| h.trim() == name).ok_or_else(|| err(&format!("missing column {name:?}")))
    };
    let (ix, ifv) = (col("x")?, col("f")?);
    let (mut xs, mut fs) = (Vec::new(), Vec::new());
    for rec in rdr.records() {
        let rec = rec.map_err(|e| err(&e))?;
        let num = |i: usize| -> Result<f64, String> {
            rec.get(i).unwrap_or("").trim().parse::<f64>().map_err(|e| err(&e))
        };
        xs.push(num(ix)?);
        fs.push(num(ifv)?);
    }
    let last = *xs.last().ok_or_else(|| err(&"no rows"))?;
    let grid = GridSpec::default().with_x_max(last.max(1.0));
    let meta = fs::read_to_string(sidecar(path))
        .ok()
        .and_then(|s| serde_json::from_str::<Meta>(&s).ok())
        .map(|m| m.support);
    let tail = match meta {
        Some(SupportMeta { kind: TailKind::Compact, .. }) => TailModel::compact(last),
        Some(SupportMeta { kind: TailKind::Algebraic, r: Some(r), c: Some(c) }) => {
            TailModel::algebraic(r, c)
        }
        Some(SupportMeta { kind: TailKind::GaussianClass, c: Some(c), .. }) => TailModel::gaussian(c),
        _ if fs.last() == Some(&0.0) => TailModel::compact(last),
        _ => TailModel::algebraic(2.0, 0.0),
    };
    let f = ProfileGrid::new(xs, fs, tail, grid).map_err(|e| err(&e))?;
    if tail.kind == TailKind::Algebraic && tail.c == 0.0 {
        let r = fit_tail_exponent(&f).map(|p| p.0).unwrap_or(2.0).max(1.0 + 1e-3);
        let c = f.values().last().unwrap() * last.powf(r);
        return f.with_tail(TailModel::algebraic(r, c)).map_err(|e| err(&e));
    }
    Ok(f)
}
