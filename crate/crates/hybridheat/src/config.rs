//! Run configuration: TOML or JSON file, presets and `key=value` overrides.
//!
//! Merging happens on `serde_json::Value` so both file formats and the
//! override syntax share one path: preset defaults, then the file, then
//! each override in order.

use std::path::Path;

use anyhow::{Context, Result, anyhow, bail};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use hybridheat_core::fine::{PiVariant, ReferenceValues, ScenarioConfig, SourceMode};
use hybridheat_core::geometry::UnitCellSpec;
use hybridheat_core::hybrid::{FineSide, Scheme};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Fine,
    Upscaled,
    HybridTaylor,
    HybridSeries,
    Closure,
    Bench,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Fine => "fine",
            Mode::Upscaled => "upscaled",
            Mode::HybridTaylor => "hybrid-taylor",
            Mode::HybridSeries => "hybrid-series",
            Mode::Closure => "closure",
            Mode::Bench => "bench",
        }
    }

    pub fn scheme(self) -> Option<Scheme> {
        match self {
            Mode::HybridTaylor => Some(Scheme::Taylor),
            Mode::HybridSeries => Some(Scheme::Series),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Preset {
    PaperAccuracy,
    PaperEfficiency,
}

/// Unit-cell dimensions in metres and the pack size in unit cells.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeometryBlock {
    pub r_c: f64,
    pub r_w: f64,
    pub d_cc: f64,
    pub d1: f64,
    pub d2: f64,
    pub nx: usize,
    pub ny: usize,
}

impl Default for GeometryBlock {
    fn default() -> Self {
        let s = UnitCellSpec::reference();
        GeometryBlock { r_c: s.r_c, r_w: s.r_w, d_cc: s.d_cc, d1: s.d1, d2: s.d2, nx: 20, ny: 1 }
    }
}

impl GeometryBlock {
    pub fn spec(&self) -> UnitCellSpec {
        UnitCellSpec { r_c: self.r_c, r_w: self.r_w, d_cc: self.d_cc, d1: self.d1, d2: self.d2 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReferenceBlock {
    pub rho_c: f64,
    pub rho_p: f64,
    pub c_c: f64,
    pub c_p: f64,
    pub k_c: f64,
    pub k_p: f64,
    pub t_ref: f64,
    pub t_a: f64,
    pub t_b: f64,
    pub t_s1: f64,
    pub t_s2: f64,
    pub t_inf: f64,
    pub eps_s1: f64,
    pub eps_s2: f64,
    pub pi_burn_hat: Option<f64>,
    pub pi_base_hat: Option<f64>,
    pub u_pc_hat: Option<f64>,
    pub q_pw_hat: Option<f64>,
}

impl Default for ReferenceBlock {
    fn default() -> Self {
        let r = ReferenceValues::table3();
        ReferenceBlock {
            rho_c: r.rho_c,
            rho_p: r.rho_p,
            c_c: r.c_c,
            c_p: r.c_p,
            k_c: r.k_c,
            k_p: r.k_p,
            t_ref: r.t_ref,
            t_a: r.t_a,
            t_b: r.t_b,
            t_s1: r.t_s1,
            t_s2: r.t_s2,
            t_inf: r.t_inf,
            eps_s1: r.eps_s1,
            eps_s2: r.eps_s2,
            pi_burn_hat: r.pi_burn_hat,
            pi_base_hat: r.pi_base_hat,
            u_pc_hat: r.u_pc_hat,
            q_pw_hat: r.q_pw_hat,
        }
    }
}

impl ReferenceBlock {
    pub fn values(&self) -> ReferenceValues {
        ReferenceValues {
            rho_c: self.rho_c,
            rho_p: self.rho_p,
            c_c: self.c_c,
            c_p: self.c_p,
            k_c: self.k_c,
            k_p: self.k_p,
            t_ref: self.t_ref,
            t_a: self.t_a,
            t_b: self.t_b,
            t_s1: self.t_s1,
            t_s2: self.t_s2,
            t_inf: self.t_inf,
            eps_s1: self.eps_s1,
            eps_s2: self.eps_s2,
            pi_burn_hat: self.pi_burn_hat,
            pi_base_hat: self.pi_base_hat,
            u_pc_hat: self.u_pc_hat,
            q_pw_hat: self.q_pw_hat,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SourceKind {
    Full,
    NotBurning,
    Burning,
    Off,
}

impl SourceKind {
    pub fn mode(self) -> SourceMode {
        match self {
            SourceKind::Full => SourceMode::Pi(PiVariant::Full),
            SourceKind::NotBurning => SourceMode::Pi(PiVariant::NotBurning),
            SourceKind::Burning => SourceMode::Pi(PiVariant::Burning),
            SourceKind::Off => SourceMode::Off,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioBlock {
    pub x_burn: f64,
    pub x_r: f64,
    /// `Π_base / Π_burn`; `None` keeps the value derived from the reference block.
    pub pi_base_ratio: Option<f64>,
    pub q_pw: f64,
    pub gamma: f64,
    pub alpha1: f64,
    pub r_ratio: f64,
    pub r_steepness: f64,
    pub source: SourceKind,
    /// `R₄⁽ᶜ⁾` rescaled by the local 𝓡(x) in the upscaled model.
    pub local_rate: bool,
}

impl Default for ScenarioBlock {
    fn default() -> Self {
        let s = ScenarioConfig::accuracy();
        ScenarioBlock {
            x_burn: s.x_burn,
            x_r: s.x_r,
            pi_base_ratio: None,
            q_pw: s.q_pw,
            gamma: s.gamma,
            alpha1: s.alpha1,
            r_ratio: s.r_ratio,
            r_steepness: s.r_steepness,
            source: SourceKind::Full,
            local_rate: false,
        }
    }
}

impl ScenarioBlock {
    pub fn config(&self) -> ScenarioConfig {
        ScenarioConfig {
            x_burn: self.x_burn,
            x_r: self.x_r,
            gamma: self.gamma,
            alpha1: self.alpha1,
            q_pw: self.q_pw,
            r_ratio: self.r_ratio,
            r_steepness: self.r_steepness,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NumericsBlock {
    pub dt: f64,
    pub t_final: Option<f64>,
    /// Takes precedence over `t_final`.
    pub n_steps: Option<usize>,
    pub h_fine: f64,
    pub h_up: f64,
    pub n_seg: usize,
    /// Closure mesh size in unit-cell widths.
    pub closure_h: f64,
    pub closure_n_seg: usize,
    pub eps_tol: f64,
    pub max_iter: usize,
    /// Exactly this many coupling passes per step instead of a tolerance.
    pub fixed_iter: Option<usize>,
}

impl Default for NumericsBlock {
    fn default() -> Self {
        NumericsBlock {
            dt: 3.15e-5,
            t_final: Some(0.2),
            n_steps: None,
            h_fine: 7.63e-4,
            h_up: 1e-2,
            n_seg: 64,
            closure_h: 1.0 / 40.0,
            closure_n_seg: 64,
            eps_tol: 1e-4,
            max_iter: 25,
            fixed_iter: None,
        }
    }
}

impl NumericsBlock {
    pub fn steps(&self) -> Result<usize> {
        match (self.n_steps, self.t_final) {
            (Some(n), _) => Ok(n),
            (None, Some(t)) => {
                if !(t > 0.0) {
                    bail!("numerics.t_final must be > 0, got {t}");
                }
                Ok((t / self.dt).round().max(1.0) as usize)
            }
            (None, None) => bail!("numerics needs t_final or n_steps"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Side {
    Left,
    Right,
}

impl Side {
    pub fn fine_side(self) -> FineSide {
        match self {
            Side::Left => FineSide::Left,
            Side::Right => FineSide::Right,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Anchor {
    /// Distances are measured from the scenario's `x_R`.
    XR,
    /// ... or from the right edge of the detected 𝓡 transition.
    Detected,
}

/// Position of Γ_HC: either `x_hc` directly or `x_dist` unit-cell widths
/// from the anchor, toward the upscaled side. Either way the line snaps to
/// the nearest unit-cell boundary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CouplingBlock {
    pub x_hc: Option<f64>,
    pub x_dist: Option<f64>,
    pub anchor: Anchor,
    /// Side holding the fine subdomain.
    pub side: Side,
}

impl Default for CouplingBlock {
    fn default() -> Self {
        CouplingBlock { x_hc: None, x_dist: Some(4.5), anchor: Anchor::XR, side: Side::Left }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputBlock {
    pub dir: String,
    pub snapshots: Vec<f64>,
    pub vtk: bool,
    /// Artifact directory of a reference run; `run` then exits 2 when any
    /// snapshot error exceeds `tolerance`.
    pub reference: Option<String>,
    /// Error bound for verdicts; `None` uses ε of the layout.
    pub tolerance: Option<f64>,
}

impl Default for OutputBlock {
    fn default() -> Self {
        OutputBlock { dir: "out".into(), snapshots: vec![0.02, 0.2], vtk: true, reference: None, tolerance: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchBlock {
    pub fractions: Vec<f64>,
    pub schemes: Vec<SchemeName>,
}

/// Serializable mirror of [`Scheme`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SchemeName {
    Taylor,
    Series,
}

impl SchemeName {
    pub fn scheme(self) -> Scheme {
        match self {
            SchemeName::Taylor => Scheme::Taylor,
            SchemeName::Series => Scheme::Series,
        }
    }
}

impl Default for BenchBlock {
    fn default() -> Self {
        BenchBlock { fractions: vec![0.025, 0.1, 0.2, 0.4, 0.8], schemes: vec![SchemeName::Taylor, SchemeName::Series] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub mode: Mode,
    pub geometry: GeometryBlock,
    pub reference: ReferenceBlock,
    pub scenario: ScenarioBlock,
    pub numerics: NumericsBlock,
    pub coupling: CouplingBlock,
    pub output: OutputBlock,
    pub bench: BenchBlock,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            mode: Mode::HybridTaylor,
            geometry: GeometryBlock::default(),
            reference: ReferenceBlock::default(),
            scenario: ScenarioBlock::default(),
            numerics: NumericsBlock::default(),
            coupling: CouplingBlock::default(),
            output: OutputBlock::default(),
            bench: BenchBlock::default(),
        }
    }
}

impl RunConfig {
    /// 20 × 1 accuracy setup; `coarsen` swaps in the desk-scale fine mesh.
    pub fn paper_accuracy(coarsen: bool) -> Self {
        let mut c = RunConfig::default();
        if coarsen {
            c.numerics.h_fine = 1.5e-3;
        }
        c
    }

    /// 80 × 1 timing setup: 50 steps, two coupling passes per step.
    pub fn paper_efficiency(coarsen: bool) -> Self {
        let mut c = RunConfig { mode: Mode::Bench, ..RunConfig::default() };
        c.geometry.nx = 80;
        c.numerics.n_steps = Some(50);
        c.numerics.t_final = None;
        c.numerics.fixed_iter = Some(2);
        c.numerics.h_fine = if coarsen { 3.75e-4 } else { 2.5e-4 };
        c.numerics.h_up = 2.5e-3;
        c.output.snapshots = vec![];
        c.output.vtk = false;
        c
    }

    pub fn preset(p: Preset, coarsen: bool) -> Self {
        match p {
            Preset::PaperAccuracy => Self::paper_accuracy(coarsen),
            Preset::PaperEfficiency => Self::paper_efficiency(coarsen),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let n = &self.numerics;
        if !(n.dt > 0.0 && n.dt.is_finite()) {
            bail!("numerics.dt must be > 0, got {}", n.dt);
        }
        n.steps()?;
        if !(n.h_fine > 0.0 && n.h_up > 0.0 && n.closure_h > 0.0) {
            bail!("mesh sizes must be > 0");
        }
        if n.n_seg < 8 || n.closure_n_seg < 8 {
            bail!("n_seg must be >= 8");
        }
        if !(n.eps_tol > 0.0) || n.max_iter == 0 {
            bail!("eps_tol must be > 0 and max_iter >= 1");
        }
        if n.fixed_iter == Some(0) {
            bail!("fixed_iter must be >= 1");
        }
        if self.geometry.nx == 0 || self.geometry.ny == 0 {
            bail!("geometry.nx and geometry.ny must be >= 1");
        }
        if self.mode.scheme().is_some() && self.coupling.x_hc.is_none() && self.coupling.x_dist.is_none() {
            bail!("hybrid modes need coupling.x_hc or coupling.x_dist");
        }
        if self.mode == Mode::Bench {
            if n.fixed_iter.is_none() {
                bail!("bench needs numerics.fixed_iter");
            }
            if self.bench.fractions.iter().any(|f| !(*f > 0.0 && *f < 1.0)) {
                bail!("bench fractions must lie in (0, 1)");
            }
        }
        Ok(())
    }
}

/// Recursively overlays `top` onto `base`; tables merge, everything else
/// replaces.
pub fn merge(base: &mut Value, top: Value) {
    match (base, top) {
        (Value::Object(b), Value::Object(t)) => {
            for (k, v) in t {
                match b.get_mut(&k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

/// Applies one `a.b.c=value` override. The value is read as JSON when it
/// parses (numbers, booleans, arrays, quoted strings), else as a bare string.
pub fn apply_override(v: &mut Value, spec: &str) -> Result<()> {
    let (key, raw) = spec.split_once('=').ok_or_else(|| anyhow!("override `{spec}` is not key=value"))?;
    let key = key.trim();
    if key.is_empty() {
        bail!("override `{spec}` has an empty key");
    }
    let raw = raw.trim();
    let val = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let mut cur = v;
    let parts: Vec<&str> = key.split('.').collect();
    for p in &parts[..parts.len() - 1] {
        let obj = cur.as_object_mut().ok_or_else(|| anyhow!("override `{key}`: `{p}` is not a table"))?;
        cur = obj.entry(p.to_string()).or_insert_with(|| Value::Object(Default::default()));
    }
    let obj = cur.as_object_mut().ok_or_else(|| anyhow!("override `{key}` does not address a table field"))?;
    obj.insert(parts[parts.len() - 1].to_string(), val);
    Ok(())
}

/// Parses config text; `json` selects the format.
pub fn parse_value(text: &str, json: bool) -> Result<Value> {
    if json {
        Ok(serde_json::from_str(text)?)
    } else {
        Ok(toml::from_str(text)?)
    }
}

/// Preset (or default) values, then the file, then the overrides.
pub fn resolve(file: Option<Value>, preset: Option<Preset>, coarsen: bool, overrides: &[String]) -> Result<RunConfig> {
    let base = match preset {
        Some(p) => RunConfig::preset(p, coarsen),
        None => {
            let mut c = RunConfig::default();
            if coarsen {
                c.numerics.h_fine = RunConfig::paper_accuracy(true).numerics.h_fine;
            }
            c
        }
    };
    let mut v = serde_json::to_value(&base)?;
    if let Some(f) = file {
        merge(&mut v, f);
    }
    for o in overrides {
        apply_override(&mut v, o)?;
    }
    let cfg: RunConfig = serde_json::from_value(v).context("invalid configuration")?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn load(path: &Path, preset: Option<Preset>, coarsen: bool, overrides: &[String]) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
    let v = parse_value(&text, json).with_context(|| format!("parsing {}", path.display()))?;
    resolve(Some(v), preset, coarsen, overrides)
}
