//! Fine-fraction sweep: one fine-only run, then a hybrid run per fraction
//! and scheme, all for the same number of steps.

use std::path::Path;

use anyhow::{Context, Result, bail};
use serde::Serialize;
use serde_json::json;

use hybridheat_core::post::speedup;

use crate::config::{Mode, RunConfig, SchemeName, Side};
use crate::io::write_json;
use crate::run::{Problem, execute, fraction_line};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchRow {
    pub fraction: f64,
    /// Fraction actually resolved after snapping to whole columns.
    pub fine_fraction: f64,
    pub scheme: SchemeName,
    pub x_hc: f64,
    pub t_fine: f64,
    pub t_hybrid: f64,
    pub speedup: f64,
}

/// Shape of one scheme's speedup curve.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trend {
    pub scheme: SchemeName,
    pub first_above_one: bool,
    /// Non-increasing in the fraction, allowing `noise` relative growth.
    pub non_increasing: bool,
    /// Linear interpolation of the first drop below 1.
    pub breakeven: Option<f64>,
}

impl Trend {
    pub fn new(scheme: SchemeName, fractions: &[f64], s: &[f64], noise: f64) -> Self {
        let non_increasing = s.windows(2).all(|w| w[1] <= w[0] * (1.0 + noise));
        let mut breakeven = None;
        for k in 0..s.len().saturating_sub(1) {
            if s[k] >= 1.0 && s[k + 1] < 1.0 {
                let t = (s[k] - 1.0) / (s[k] - s[k + 1]);
                breakeven = Some(fractions[k] + t * (fractions[k + 1] - fractions[k]));
                break;
            }
        }
        Trend { scheme, first_above_one: s.first().is_some_and(|v| *v > 1.0), non_increasing, breakeven }
    }

    pub fn pass(&self, window: (f64, f64)) -> bool {
        self.first_above_one && self.non_increasing && self.breakeven.is_some_and(|b| b >= window.0 && b <= window.1)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct BenchResult {
    pub n_steps: usize,
    pub fine_times: Vec<f64>,
    pub hybrid_times: Vec<(f64, SchemeName, Vec<f64>)>,
    pub rows: Vec<BenchRow>,
    pub trends: Vec<Trend>,
}

impl BenchResult {
    pub fn pass(&self) -> bool {
        self.trends.iter().all(|t| t.pass(BREAKEVEN_WINDOW))
    }
}

pub const TIMING_NOISE: f64 = 0.10;
pub const BREAKEVEN_WINDOW: (f64, f64) = (0.1, 0.5);

pub fn bench(cfg: &RunConfig, fractions: &[f64], mut progress: Option<&mut dyn FnMut(&str)>) -> Result<BenchResult> {
    if cfg.numerics.fixed_iter.is_none() {
        bail!("bench needs numerics.fixed_iter");
    }
    let mut fr = fractions.to_vec();
    if fr.is_empty() || fr.iter().any(|f| !(*f > 0.0 && *f < 1.0)) {
        bail!("fractions must be non-empty and lie in (0, 1)");
    }
    fr.sort_by(f64::total_cmp);
    let mut base = cfg.clone();
    base.output.snapshots.clear();
    base.output.vtk = false;
    base.output.reference = None;
    base.coupling.side = Side::Left;
    base.coupling.x_dist = None;

    let mut say = |m: &str| {
        if let Some(f) = progress.as_mut() {
            f(m)
        }
    };
    let fine_cfg = RunConfig { mode: Mode::Fine, ..base.clone() };
    say("fine-only run");
    let fine = execute(&fine_cfg, None).context("fine-only run")?;
    let fine_times = fine.step_times();
    let t_fine: f64 = fine_times.iter().sum();
    let p = Problem::new(&fine_cfg)?;

    let mut rows = Vec::new();
    let mut hybrid_times = Vec::new();
    for &scheme in &cfg.bench.schemes {
        for &f in &fr {
            let line = fraction_line(&p, f)?;
            let mut c = base.clone();
            c.mode = match scheme {
                SchemeName::Taylor => Mode::HybridTaylor,
                SchemeName::Series => Mode::HybridSeries,
            };
            c.coupling.x_hc = Some(line.x_hc);
            say(&format!("{scheme:?} at fraction {f}"));
            let out = execute(&c, None).with_context(|| format!("{scheme:?} hybrid at fraction {f}"))?;
            let times = out.step_times();
            let t_h: f64 = times.iter().sum();
            rows.push(BenchRow {
                fraction: f,
                fine_fraction: line.boundary_index as f64 / p.layout.nx as f64,
                scheme,
                x_hc: line.x_hc,
                t_fine,
                t_hybrid: t_h,
                speedup: speedup(&fine_times, &times)?,
            });
            hybrid_times.push((f, scheme, times));
        }
    }
    let trends = cfg
        .bench
        .schemes
        .iter()
        .map(|s| {
            let (f, v): (Vec<f64>, Vec<f64>) = rows.iter().filter(|r| r.scheme == *s).map(|r| (r.fraction, r.speedup)).unzip();
            Trend::new(*s, &f, &v, TIMING_NOISE)
        })
        .collect();
    Ok(BenchResult { n_steps: fine_times.len(), fine_times, hybrid_times, rows, trends })
}

pub fn write_bench(r: &BenchResult, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut w = csv::Writer::from_path(dir.join("speedup.csv"))?;
    for row in &r.rows {
        w.serialize(row)?;
    }
    w.flush()?;
    let hybrid: Vec<_> = r
        .hybrid_times
        .iter()
        .map(|(f, s, t)| json!({"fraction": f, "scheme": s, "t_wall": t, "total": t.iter().sum::<f64>()}))
        .collect();
    write_json(
        &dir.join("bench.json"),
        &json!({
            "n_steps": r.n_steps,
            "fine": {"t_wall": r.fine_times, "total": r.fine_times.iter().sum::<f64>()},
            "hybrid": hybrid,
            "trends": r.trends,
            "breakeven_window": BREAKEVEN_WINDOW,
            "timing_noise": TIMING_NOISE,
            "pass": r.pass(),
        }),
    )?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trend_shapes() {
        let f = [0.025, 0.1, 0.2, 0.4, 0.8];
        let t = Trend::new(SchemeName::Taylor, &f, &[3.0, 1.8, 1.2, 0.8, 0.5], 0.1);
        assert!(t.first_above_one && t.non_increasing);
        assert!((t.breakeven.unwrap() - 0.3).abs() < 1e-12);
        assert!(t.pass(BREAKEVEN_WINDOW));
        // 5% growth is noise, 20% is not.
        assert!(Trend::new(SchemeName::Taylor, &f, &[3.0, 3.15, 1.2, 0.8, 0.5], 0.1).non_increasing);
        assert!(!Trend::new(SchemeName::Taylor, &f, &[3.0, 3.6, 1.2, 0.8, 0.5], 0.1).non_increasing);
        let never = Trend::new(SchemeName::Series, &f, &[3.0, 2.0, 1.5, 1.2, 1.1], 0.1);
        assert_eq!(never.breakeven, None);
        assert!(!never.pass(BREAKEVEN_WINDOW));
        assert!(!Trend::new(SchemeName::Series, &f, &[0.9, 0.8, 0.7, 0.6, 0.5], 0.1).first_above_one);
    }
}
