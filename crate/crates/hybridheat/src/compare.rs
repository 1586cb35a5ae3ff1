//! Snapshot-by-snapshot comparison of two artifact directories.

use std::path::Path;

use anyhow::{Context, Result, bail};
use serde::Serialize;
use serde_json::Value;

use hybridheat_core::post::{AveragedField, ErrorField, centerline, error_field};

use crate::io::{read_averaged, write_error, write_json};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SnapshotCompare {
    pub label: String,
    pub max_tp: f64,
    pub max_tc: f64,
    pub centerline_tp: f64,
    pub centerline_tc: f64,
    /// x-extent of the columns whose error exceeds the tolerance.
    pub failing_x: Option<(f64, f64)>,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompareReport {
    pub tol: f64,
    pub snapshots: Vec<SnapshotCompare>,
    pub pass: bool,
}

/// Compares `test` against `reference` on one snapshot.
pub fn compare_fields(label: &str, test: &AveragedField, reference: &AveragedField, tol: f64) -> Result<(SnapshotCompare, ErrorField)> {
    let e = error_field(test, reference).with_context(|| format!("snapshot {label}"))?;
    let ct = centerline(test)?;
    let cr = centerline(reference)?;
    let cmax = |a: &[f64], b: &[f64]| a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for k in 0..e.tp.len() {
        if e.tp[k] > tol || e.tc[k] > tol {
            let x = e.x[k % e.nx];
            lo = lo.min(x);
            hi = hi.max(x);
        }
    }
    let failing_x = lo.is_finite().then_some((lo, hi));
    let s = SnapshotCompare {
        label: label.into(),
        max_tp: e.max_tp(),
        max_tc: e.max_tc(),
        centerline_tp: cmax(&ct.tp, &cr.tp),
        centerline_tc: cmax(&ct.tc, &cr.tc),
        failing_x,
        pass: failing_x.is_none() && e.tp.iter().chain(&e.tc).all(|v| v.is_finite()),
    };
    Ok((s, e))
}

fn manifest(dir: &Path) -> Result<Value> {
    let p = dir.join("manifest.json");
    let text = std::fs::read_to_string(&p).with_context(|| format!("reading {}", p.display()))?;
    Ok(serde_json::from_str(&text)?)
}

fn labels(m: &Value) -> Vec<(String, String)> {
    m["snapshots"]
        .as_array()
        .map(|a| {
            a.iter()
                .filter_map(|s| Some((s["label"].as_str()?.to_string(), s["file"].as_str()?.to_string())))
                .collect()
        })
        .unwrap_or_default()
}

/// Errors of run `b` against run `a` at every shared snapshot. The
/// tolerance defaults to ε of `a`'s layout. Error CSVs go to `out`.
pub fn compare_dirs(a: &Path, b: &Path, tol: Option<f64>, out: Option<&Path>) -> Result<CompareReport> {
    let ma = manifest(a)?;
    let mb = manifest(b)?;
    if ma["layout"] != mb["layout"] {
        bail!("runs have different layouts");
    }
    let la = labels(&ma);
    let lb = labels(&mb);
    let names = |l: &[(String, String)]| l.iter().map(|x| x.0.clone()).collect::<Vec<_>>();
    if la.is_empty() || names(&la) != names(&lb) {
        bail!("snapshot times differ: {:?} vs {:?}", names(&la), names(&lb));
    }
    let tol = match tol {
        Some(t) => t,
        None => ma["layout"]["epsilon"].as_f64().context("manifest lacks layout.epsilon")?,
    };
    if let Some(o) = out {
        std::fs::create_dir_all(o)?;
    }
    let mut snapshots = Vec::new();
    for ((label, fa), (_, fb)) in la.iter().zip(&lb) {
        let ra = read_averaged(&a.join(fa))?;
        let rb = read_averaged(&b.join(fb))?;
        let (s, e) = compare_fields(label, &rb, &ra, tol)?;
        if let Some(o) = out {
            write_error(&o.join(format!("error_{label}.csv")), &e)?;
        }
        snapshots.push(s);
    }
    let pass = snapshots.iter().all(|s| s.pass);
    let report = CompareReport { tol, snapshots, pass };
    if let Some(o) = out {
        write_json(&o.join("compare.json"), &report)?;
    }
    Ok(report)
}
