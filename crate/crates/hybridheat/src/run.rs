//! Run orchestration for every mode and artifact emission.

use std::path::Path;
use std::time::Instant;

use anyhow::{Context, Result, bail};
use serde::Serialize;
use serde_json::{Value, json};

use hybridheat_core::closure::{ClosureConfig, ClosureField, ClosureSolutions, EffectiveModel, effective_coefficients, solve_all_closures};
use hybridheat_core::fine::{
    DimGroups, FineConfig, FineSolver, FineState, ReferenceValues, ScenarioConfig, SourceParams, dimensionless_groups, pi_coefficients,
};
use hybridheat_core::geometry::{PackLayout, UnitCellGeom, build_pack_layout, build_unit_cell};
use hybridheat_core::hybrid::{BroydenState, HybridSetup, HybridSolver, HybridState, IterMode, Scheme};
use hybridheat_core::mesh::{mesh_macro, mesh_pack};
use hybridheat_core::post::{AveragedField, XrDetection, centerline, detect_x_r, fine_average, hybrid_average, upscaled_average};
use hybridheat_core::upscaled::{RateField, UpscaledConfig, UpscaledSolver, UpscaledState};

use crate::config::{Anchor, Mode, RunConfig};
use crate::io::{IterRow, VtkPiece, write_averaged, write_centerline, write_iterations, write_json, write_vtk};

/// Everything derived from the configuration before any mesh is built.
#[derive(Debug, Clone)]
pub struct Problem {
    pub cfg: RunConfig,
    pub geom: UnitCellGeom,
    pub layout: PackLayout,
    pub reference: ReferenceValues,
    pub scenario: ScenarioConfig,
    pub groups: DimGroups,
    pub params: SourceParams,
}

/// Resolved position of Γ_HC.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CouplingLine {
    pub requested: f64,
    pub x_hc: f64,
    /// Anchor used with `x_dist`, if any.
    pub anchor: Option<f64>,
    pub boundary_index: usize,
}

impl Problem {
    pub fn new(cfg: &RunConfig) -> Result<Self> {
        cfg.validate()?;
        let geom = build_unit_cell(cfg.geometry.spec())?;
        let layout = build_pack_layout(&geom, cfg.geometry.nx, cfg.geometry.ny)?;
        let reference = cfg.reference.values();
        let scenario = cfg.scenario.config();
        let groups = dimensionless_groups(&reference, &layout, &scenario)?;
        let mut params = pi_coefficients(&reference)?;
        if let Some(r) = cfg.scenario.pi_base_ratio {
            if !(0.0..1.0).contains(&r) {
                bail!("scenario.pi_base_ratio must lie in [0, 1), got {r}");
            }
            params.pi_base = r;
        }
        Ok(Problem { cfg: cfg.clone(), geom, layout, reference, scenario, groups, params })
    }

    pub fn closure_config(&self) -> ClosureConfig {
        ClosureConfig { h: self.cfg.numerics.closure_h, n_seg: self.cfg.numerics.closure_n_seg, ..Default::default() }
    }

    pub fn closures(&self) -> Result<(ClosureSolutions, EffectiveModel)> {
        let cc = self.closure_config();
        let sol = solve_all_closures(&self.geom, &self.groups, &cc).context("closure problems")?;
        let model = effective_coefficients(&sol, &self.geom, &self.groups, self.layout.epsilon, &cc)?;
        Ok((sol, model))
    }

    pub fn fine_config(&self) -> FineConfig {
        FineConfig { source: self.cfg.scenario.source.mode(), ..FineConfig::new(self.cfg.numerics.dt) }
    }

    pub fn upscaled_config(&self) -> UpscaledConfig {
        UpscaledConfig {
            source: self.cfg.scenario.source.mode(),
            q_pw: self.scenario.q_pw,
            rate: if self.cfg.scenario.local_rate { RateField::Local } else { RateField::Reference },
            ..UpscaledConfig::new(self.cfg.numerics.dt)
        }
    }

    pub fn broyden(&self) -> BroydenState {
        let n = &self.cfg.numerics;
        match n.fixed_iter {
            Some(k) => BroydenState::new(self.layout.ny, n.eps_tol, k, IterMode::FixedIter),
            None => BroydenState::new(self.layout.ny, n.eps_tol, n.max_iter, IterMode::Tolerance),
        }
    }

    /// Right edge of the 𝓡 transition on a fine sample of the pack.
    pub fn detected_x_r(&self) -> Result<XrDetection> {
        let n = 4001;
        let (a, b) = (self.layout.x_min(), self.layout.x_max());
        let xs: Vec<f64> = (0..n).map(|k| a + (b - a) * k as f64 / (n - 1) as f64).collect();
        let rs: Vec<f64> = xs.iter().map(|x| self.groups.r(*x)).collect();
        Ok(detect_x_r(&xs, &rs, self.groups.r_low, self.scenario.alpha1)?)
    }

    /// Γ_HC from the coupling block, snapped to the nearest interior
    /// unit-cell boundary.
    pub fn coupling_line(&self) -> Result<CouplingLine> {
        let c = &self.cfg.coupling;
        let (requested, anchor) = match (c.x_hc, c.x_dist) {
            (Some(x), _) => (x, None),
            (None, Some(d)) => {
                let a = match c.anchor {
                    Anchor::XR => self.scenario.x_r,
                    Anchor::Detected => match self.detected_x_r()? {
                        XrDetection::At(x) => x,
                        XrDetection::Homogeneous => bail!("no 𝓡 transition to anchor x_dist on"),
                    },
                };
                let dir = -c.side.fine_side().dir_in();
                (a + dir * d * self.layout.epsilon, Some(a))
            }
            (None, None) => bail!("coupling needs x_hc or x_dist"),
        };
        self.snap(requested, anchor)
    }

    pub fn snap(&self, requested: f64, anchor: Option<f64>) -> Result<CouplingLine> {
        let l = &self.layout;
        let k = ((requested - l.x_min()) / l.cell_w).round();
        if !(k >= 1.0 && k <= (l.nx - 1) as f64) {
            bail!("x_HC = {requested} leaves no room for both subdomains");
        }
        let k = k as usize;
        Ok(CouplingLine { requested, x_hc: l.boundary_x(k), anchor, boundary_index: k })
    }
}

#[derive(Debug, Clone)]
pub struct Snapshot {
    pub label: String,
    pub step: usize,
    pub time: f64,
    pub avg: AveragedField,
    pub pieces: Vec<VtkPiece>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepTiming {
    pub step: usize,
    pub time: f64,
    pub t_wall: f64,
    pub passes: usize,
    pub fine_newton: usize,
    pub upscaled_newton: usize,
    /// First and last coupling residual `max(‖F‖_∞, ‖F‖₂)`.
    pub res_first: Option<f64>,
    pub res_last: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FieldCheck {
    pub name: String,
    pub compatibility: f64,
    pub mean: f64,
}

/// Invariants of the closure solutions and effective coefficients.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClosureReport {
    pub fields: Vec<FieldCheck>,
    pub kp_asymmetry: f64,
    pub kp_diag: [f64; 2],
    pub kp_diag_bound: f64,
    /// `|R₂⁽ᵖ⁾ − (φ_p/φ_c) R₁⁽ᵖ⁾|` and `|R₁⁽ᶜ⁾ − (φ_c/φ_p) R₂⁽ᶜ⁾|`.
    pub r_identity: [f64; 2],
    pub tol: f64,
    pub pass: bool,
}

pub fn closure_report(sol: &ClosureSolutions, m: &EffectiveModel, k_p: f64) -> ClosureReport {
    let tol = 1e-10;
    let mut fields = Vec::new();
    let mut push = |name: &str, f: &ClosureField| {
        fields.push(FieldCheck { name: name.into(), compatibility: f.compatibility, mean: f.mean });
    };
    push("p1", &sol.p1);
    push("p2", &sol.p2);
    push("p3_x", &sol.p3[0]);
    push("p3_y", &sol.p3[1]);
    if let Some(c1) = &sol.c1 {
        push("c1", c1);
    }
    if let Some(c2) = &sol.c2 {
        push("c2_x", &c2[0]);
        push("c2_y", &c2[1]);
    }
    let kp_asymmetry = (m.k_p[0][1] - m.k_p[1][0]).abs();
    let kp_diag = [m.k_p[0][0], m.k_p[1][1]];
    let bound = m.phi_p * k_p;
    let r_identity = [(m.r2_p - m.phi_p / m.phi_c * m.r1_p).abs(), (m.r1_c - m.phi_c / m.phi_p * m.r2_c).abs()];
    let scale = m.k_p[0][0].abs().max(m.k_p[1][1].abs()).max(1e-300);
    let pass = fields.iter().all(|f| f.compatibility.abs() <= tol && f.mean.abs() <= tol)
        && kp_asymmetry <= tol * scale
        && kp_diag.iter().all(|d| *d > 0.0 && *d <= bound * (1.0 + 1e-12))
        && r_identity[0] <= 1e-12 * m.r2_p.abs().max(1.0)
        && r_identity[1] <= 1e-12 * m.r1_c.abs().max(1.0);
    ClosureReport { fields, kp_asymmetry, kp_diag, kp_diag_bound: bound, r_identity, tol, pass }
}

pub fn model_json(m: &EffectiveModel) -> Value {
    json!({
        "U_p": m.u_p, "V_p": m.v_p, "U_c": m.u_c, "V_c": m.v_c,
        "K_p": m.k_p, "K_c": m.k_c,
        "R1_p": m.r1_p, "R2_p": m.r2_p, "R3_p": m.r3_p, "R4_p": m.r4_p,
        "R1_c": m.r1_c, "R2_c": m.r2_c, "R3_c": m.r3_c, "R4_c": m.r4_c,
        "R_ref": m.r_ref, "phi_p": m.phi_p, "phi_c": m.phi_c, "epsilon": m.epsilon,
    })
}

fn groups_json(g: &DimGroups) -> Value {
    json!({
        "Bi_p": g.bi_p, "Bi_c": g.bi_c, "Q": g.q, "varrho": g.varrho, "varsigma": g.varsigma,
        "R0": g.r0, "R_low": g.r_low, "R_high": g.r_high, "x_R": g.x_r, "R_steepness": g.r_steepness,
    })
}

fn params_json(p: &SourceParams) -> Value {
    json!({
        "A1": p.a1, "B1": p.b1, "A2": p.a2, "B2": p.b2, "c1": p.c1, "c2": p.c2,
        "T_max_hat": p.t_max_hat, "T_Max_abs_hat": p.t_max_abs_hat, "Pi_base": p.pi_base, "Pi_burn": p.pi_burn,
    })
}

fn layout_json(l: &PackLayout) -> Value {
    json!({
        "nx": l.nx, "ny": l.ny, "epsilon": l.epsilon, "cell_w": l.cell_w, "cell_h": l.cell_h,
        "x_range": [l.x_min(), l.x_max()], "y_range": [l.y_min(), l.y_max()], "L_hat": l.l_hat,
        "phi_p": l.geom.fractions.phi_p, "phi_c": l.geom.fractions.phi_c, "phi_w": l.geom.fractions.phi_w,
    })
}

/// `(step, label)` for each configured time within the run plus the last
/// step. Times round to the nearest step.
pub fn schedule(snapshots: &[f64], dt: f64, n_steps: usize) -> Vec<(usize, String)> {
    let mut out: Vec<(usize, String)> = Vec::new();
    for t in snapshots {
        let k = (t / dt).round();
        if k >= 1.0 && k <= n_steps as f64 {
            let k = k as usize;
            if !out.iter().any(|(s, _)| *s == k) {
                out.push((k, format!("t{t:.4}")));
            }
        }
    }
    if n_steps > 0 && !out.iter().any(|(s, _)| *s == n_steps) {
        out.push((n_steps, format!("t{:.4}", n_steps as f64 * dt)));
    }
    out.sort();
    out
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub mode: Mode,
    pub manifest: Value,
    pub model: Option<EffectiveModel>,
    pub closure: Option<ClosureReport>,
    pub snapshots: Vec<Snapshot>,
    pub iterations: Vec<IterRow>,
    pub timing: Vec<StepTiming>,
}

impl RunOutput {
    pub fn snapshot(&self, label: &str) -> Option<&Snapshot> {
        self.snapshots.iter().find(|s| s.label == label)
    }

    pub fn step_times(&self) -> Vec<f64> {
        self.timing.iter().map(|t| t.t_wall).collect()
    }
}

enum Stepper {
    Fine(FineSolver, FineState),
    Upscaled(UpscaledSolver, UpscaledState),
    Hybrid(Box<HybridSolver>, HybridState),
}

impl Stepper {
    fn advance(&mut self, step: usize, iters: &mut Vec<IterRow>) -> Result<StepTiming> {
        let t0 = Instant::now();
        let mut rec = StepTiming { step, time: 0.0, t_wall: 0.0, passes: 0, fine_newton: 0, upscaled_newton: 0, res_first: None, res_last: None };
        match self {
            Stepper::Fine(f, s) => {
                let (n, st) = f.step(s, None)?;
                *s = n;
                rec.time = s.time;
                rec.fine_newton = st.iterations;
            }
            Stepper::Upscaled(u, s) => {
                let (n, st) = u.step(s, None)?;
                *s = n;
                rec.time = s.time;
                rec.upscaled_newton = st.iterations;
            }
            Stepper::Hybrid(h, s) => {
                let (n, st) = h.step(s)?;
                *s = n;
                rec.time = s.time;
                rec.passes = st.passes.len();
                rec.fine_newton = st.fine_newton;
                rec.upscaled_newton = st.upscaled_newton;
                rec.res_first = st.passes.first().map(|p| p.residual.max_norm());
                rec.res_last = st.passes.last().map(|p| p.residual.max_norm());
                for (k, p) in st.passes.iter().enumerate() {
                    iters.push(IterRow { step, time: s.time, iteration: k + 1, res_inf: p.residual.inf, res_l2: p.residual.l2, q: p.q.clone() });
                }
            }
        }
        rec.t_wall = t0.elapsed().as_secs_f64();
        Ok(rec)
    }

    fn time(&self) -> f64 {
        match self {
            Stepper::Fine(_, s) => s.time,
            Stepper::Upscaled(_, s) => s.time,
            Stepper::Hybrid(_, s) => s.time,
        }
    }

    fn average(&self, layout: &PackLayout) -> Result<AveragedField> {
        Ok(match self {
            Stepper::Fine(f, s) => fine_average(f, s, layout)?,
            Stepper::Upscaled(u, s) => upscaled_average(u, s, layout, 0..layout.nx)?,
            Stepper::Hybrid(h, s) => hybrid_average(h, s, layout)?,
        })
    }

    fn pieces(&self) -> Vec<VtkPiece> {
        let fine = |f: &FineSolver, s: &FineState| {
            VtkPiece::new("fine", f.mesh(), vec![("Tp".into(), f.tp_nodal(s)), ("Tc".into(), f.tc_nodal(s))])
        };
        let up = |u: &UpscaledSolver, s: &UpscaledState| {
            VtkPiece::new("upscaled", u.mesh(), vec![("Tp_avg_Y".into(), u.tp_nodal(s)), ("Tc_avg_Y".into(), u.tc_nodal(s))])
        };
        match self {
            Stepper::Fine(f, s) => vec![fine(f, s)],
            Stepper::Upscaled(u, s) => vec![up(u, s)],
            Stepper::Hybrid(h, s) => vec![fine(h.fine(), &s.fine), up(h.upscaled(), &s.up)],
        }
    }
}

/// Builds the solvers of a fine, upscaled or hybrid run and the manifest
/// entries describing them.
fn build_stepper(p: &Problem, model: Option<&EffectiveModel>, line: Option<CouplingLine>, scheme: Option<Scheme>) -> Result<(Stepper, Value)> {
    let n = &p.cfg.numerics;
    let l = &p.layout;
    match (scheme, line) {
        (Some(scheme), Some(line)) => {
            let model = model.context("hybrid run without effective coefficients")?;
            let setup = HybridSetup { x_hc: line.x_hc, side: p.cfg.coupling.side.fine_side(), h_fine: n.h_fine, n_seg: n.n_seg, h_up: n.h_up };
            let h = HybridSolver::build(
                l,
                &setup,
                p.groups,
                p.params,
                p.scenario,
                *model,
                p.fine_config(),
                p.upscaled_config(),
                scheme,
                p.broyden(),
            )?;
            let s = h.initial_state();
            let info = json!({
                "fine_vertices": h.fine().mesh().n_vertices(),
                "fine_triangles": h.fine().mesh().n_triangles(),
                "upscaled_vertices": h.upscaled().mesh().n_vertices(),
                "upscaled_triangles": h.upscaled().mesh().n_triangles(),
                "coupling_rows": h.boundary().n_rows(),
            });
            Ok((Stepper::Hybrid(Box::new(h), s), info))
        }
        (None, _) if p.cfg.mode == Mode::Upscaled => {
            let model = model.context("upscaled run without effective coefficients")?;
            let mesh = mesh_macro([l.x_min(), l.y_min()], [l.x_max(), l.y_max()], n.h_up)?;
            let u = UpscaledSolver::new(mesh, *model, &p.groups, p.params, &p.scenario, p.upscaled_config(), 1)?;
            let s = u.initial_state();
            let info = json!({"upscaled_vertices": u.mesh().n_vertices(), "upscaled_triangles": u.mesh().n_triangles()});
            Ok((Stepper::Upscaled(u, s), info))
        }
        _ => {
            let (mesh, per) = mesh_pack(l, n.h_fine, n.n_seg)?;
            let f = FineSolver::new(mesh, &per.y_only(), l, p.groups, p.params, p.scenario, p.fine_config())?;
            let s = f.initial_state();
            let info = json!({"fine_vertices": f.mesh().n_vertices(), "fine_triangles": f.mesh().n_triangles()});
            Ok((Stepper::Fine(f, s), info))
        }
    }
}

/// Progress sink; `None` keeps runs silent.
pub type Progress<'a> = Option<&'a mut dyn FnMut(&str)>;

/// Runs one fine, upscaled, hybrid or closure configuration.
pub fn execute(cfg: &RunConfig, mut progress: Progress) -> Result<RunOutput> {
    let p = Problem::new(cfg)?;
    let mode = cfg.mode;
    if mode == Mode::Bench {
        bail!("bench configurations run through `bench`");
    }
    let mut say = |m: &str| {
        if let Some(f) = progress.as_mut() {
            f(m)
        }
    };
    let mut manifest = json!({
        "mode": mode.name(),
        "config": serde_json::to_value(cfg)?,
        "layout": layout_json(&p.layout),
        "groups": groups_json(&p.groups),
        "source": params_json(&p.params),
    });

    let needs_model = matches!(mode, Mode::Upscaled | Mode::Closure | Mode::HybridTaylor | Mode::HybridSeries);
    let (model, closure) = if needs_model {
        say("solving closure problems");
        let (sol, model) = p.closures()?;
        let report = (mode == Mode::Closure).then(|| closure_report(&sol, &model, p.closure_config().k_p));
        manifest["effective_model"] = model_json(&model);
        manifest["closure_mesh"] = json!({"vertices": sol.mesh.n_vertices(), "triangles": sol.mesh.n_triangles()});
        (Some(model), report)
    } else {
        (None, None)
    };
    if mode == Mode::Closure {
        return Ok(RunOutput { mode, manifest, model, closure, snapshots: vec![], iterations: vec![], timing: vec![] });
    }

    let line = match mode.scheme() {
        Some(_) => {
            let line = p.coupling_line()?;
            manifest["coupling"] = json!({
                "x_hc": line.x_hc, "requested": line.requested, "anchor": line.anchor,
                "boundary_index": line.boundary_index, "side": cfg.coupling.side,
                "x_dist_eps": line.anchor.map(|a| (line.x_hc - a).abs() / p.layout.epsilon),
            });
            Some(line)
        }
        None => None,
    };
    say("meshing");
    let (mut stepper, mesh_info) = build_stepper(&p, model.as_ref(), line, mode.scheme())?;
    manifest["mesh"] = mesh_info;

    let n_steps = cfg.numerics.steps()?;
    let plan = schedule(&cfg.output.snapshots, cfg.numerics.dt, n_steps);
    let mut snapshots = Vec::new();
    let mut iterations = Vec::new();
    let mut timing = Vec::with_capacity(n_steps);
    let mut next = 0;
    for k in 1..=n_steps {
        let rec = stepper
            .advance(k, &mut iterations)
            .with_context(|| format!("{} step {k} (t = {:.6})", mode.name(), stepper.time() + cfg.numerics.dt))?;
        timing.push(rec);
        if k % (n_steps / 20).max(1) == 0 {
            say(&format!("step {k}/{n_steps}"));
        }
        while next < plan.len() && plan[next].0 == k {
            let avg = stepper.average(&p.layout).with_context(|| format!("averaging at step {k}"))?;
            let pieces = if cfg.output.vtk { stepper.pieces() } else { vec![] };
            snapshots.push(Snapshot { label: plan[next].1.clone(), step: k, time: stepper.time(), avg, pieces });
            next += 1;
        }
    }
    manifest["snapshots"] = Value::Array(
        snapshots
            .iter()
            .map(|s| json!({"label": s.label, "step": s.step, "time": s.time, "file": format!("avg_{}.csv", s.label)}))
            .collect(),
    );
    manifest["n_steps"] = json!(n_steps);
    Ok(RunOutput { mode, manifest, model, closure, snapshots, iterations, timing })
}

#[derive(Debug, Clone, Serialize)]
struct Totals {
    steps: usize,
    t_wall: f64,
    t_wall_mean: f64,
    passes: usize,
}

/// Writes every artifact of `out` into `dir`.
pub fn write_artifacts(out: &RunOutput, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    write_json(&dir.join("manifest.json"), &out.manifest)?;
    if let Some(m) = &out.model {
        write_json(&dir.join("effective_model.json"), &model_json(m))?;
    }
    if let Some(r) = &out.closure {
        write_json(&dir.join("closure_report.json"), r)?;
    }
    for s in &out.snapshots {
        write_averaged(&dir.join(format!("avg_{}.csv", s.label)), &s.avg)?;
        write_centerline(&dir.join(format!("centerline_{}.csv", s.label)), &centerline(&s.avg)?, s.avg.i0)?;
        for piece in &s.pieces {
            let title = format!("{} {} t={}", out.mode.name(), piece.name, s.time);
            write_vtk(&dir.join(format!("{}_{}.vtk", piece.name, s.label)), &title, piece)?;
        }
    }
    if !out.iterations.is_empty() {
        write_iterations(&dir.join("iterations.csv"), &out.iterations)?;
    }
    if !out.timing.is_empty() {
        let total: f64 = out.timing.iter().map(|t| t.t_wall).sum();
        let totals = Totals {
            steps: out.timing.len(),
            t_wall: total,
            t_wall_mean: total / out.timing.len() as f64,
            passes: out.timing.iter().map(|t| t.passes).sum(),
        };
        write_json(&dir.join("timing.json"), &json!({"steps": out.timing, "totals": totals}))?;
    }
    Ok(())
}

/// Γ_HC of a fraction-`f` split with the fine side on the left: the leftmost `round(f·N_x)` columns,
/// at least two (the one-sided windows need them) and at most `N_x − 1`.
pub fn fraction_line(p: &Problem, f: f64) -> Result<CouplingLine> {
    let nx = p.layout.nx;
    if nx < 3 {
        bail!("fraction sweeps need at least 3 columns");
    }
    let k = ((f * nx as f64).round() as usize).clamp(2, nx - 1);
    let x = p.layout.boundary_x(k);
    p.snap(x, None)
}
