//! File formats: averaged-field, error, centerline and iteration CSVs,
//! JSON helpers, and legacy-VTK ASCII snapshots.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use anyhow::{Context, Result, bail};
use serde::Serialize;

use hybridheat_core::Point;
use hybridheat_core::mesh::{Region, TriMesh};
use hybridheat_core::post::{AveragedField, Centerline, ErrorField};

pub const AVG_HEADER: [&str; 8] = ["i", "j", "x", "y", "Tp_avg_Y", "Tc_avg_Y", "Tp_avg_B", "Tc_avg_B"];
pub const ERR_HEADER: [&str; 6] = ["i", "j", "x", "y", "err_Tp", "err_Tc"];

fn writer(path: &Path) -> Result<csv::Writer<File>> {
    csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))
}

pub fn write_averaged(path: &Path, a: &AveragedField) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(AVG_HEADER)?;
    for k in 0..a.len() {
        let (i, j) = a.index(k);
        let c = k % a.nx;
        w.serialize((i, j, a.x[c], a.y[j], a.tp_y[k], a.tc_y[k], a.tp_b[k], a.tc_b[k]))?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a field written by [`write_averaged`]. Rows may come in any order
/// but must fill a rectangular block of columns.
pub fn read_averaged(path: &Path) -> Result<AveragedField> {
    let mut r = csv::Reader::from_path(path).with_context(|| format!("reading {}", path.display()))?;
    if r.headers()?.iter().collect::<Vec<_>>() != AVG_HEADER {
        bail!("{}: unexpected header", path.display());
    }
    let mut rows: Vec<(usize, usize, f64, f64, f64, f64, f64, f64)> = Vec::new();
    for rec in r.deserialize() {
        rows.push(rec.with_context(|| format!("parsing {}", path.display()))?);
    }
    if rows.is_empty() {
        bail!("{}: no cells", path.display());
    }
    let i0 = rows.iter().map(|r| r.0).min().unwrap();
    let nx = rows.iter().map(|r| r.0).max().unwrap() - i0 + 1;
    let ny = rows.iter().map(|r| r.1).max().unwrap() + 1;
    if rows.len() != nx * ny {
        bail!("{}: {} rows do not fill a {nx} x {ny} grid", path.display(), rows.len());
    }
    let n = nx * ny;
    let mut a = AveragedField {
        i0,
        nx,
        ny,
        x: vec![f64::NAN; nx],
        y: vec![f64::NAN; ny],
        tp_y: vec![f64::NAN; n],
        tc_y: vec![f64::NAN; n],
        tp_b: vec![f64::NAN; n],
        tc_b: vec![f64::NAN; n],
        phi_p: vec![f64::NAN; n],
        phi_c: vec![f64::NAN; n],
    };
    let mut seen = vec![false; n];
    for (i, j, x, y, tpy, tcy, tpb, tcb) in rows {
        let k = a.at(i, j).unwrap();
        if seen[k] {
            bail!("{}: cell ({i}, {j}) listed twice", path.display());
        }
        seen[k] = true;
        a.x[i - i0] = x;
        a.y[j] = y;
        a.tp_y[k] = tpy;
        a.tc_y[k] = tcy;
        a.tp_b[k] = tpb;
        a.tc_b[k] = tcb;
        // Recover the fractions where the B-average is defined.
        a.phi_p[k] = if tpb != 0.0 { tpy / tpb } else { f64::NAN };
        a.phi_c[k] = if tcb != 0.0 { tcy / tcb } else { f64::NAN };
    }
    Ok(a)
}

pub fn write_error(path: &Path, e: &ErrorField) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(ERR_HEADER)?;
    for k in 0..e.tp.len() {
        let (c, j) = (k % e.nx, k / e.nx);
        w.serialize((e.i0 + c, j, e.x[c], e.y[j], e.tp[k], e.tc[k]))?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_centerline(path: &Path, c: &Centerline, i0: usize) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["i", "row", "x", "Tp_avg_Y", "Tc_avg_Y"])?;
    for (k, x) in c.x.iter().enumerate() {
        w.serialize((i0 + k, c.row, x, c.tp[k], c.tc[k]))?;
    }
    w.flush()?;
    Ok(())
}

/// One coupling pass of one step.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IterRow {
    pub step: usize,
    pub time: f64,
    pub iteration: usize,
    pub res_inf: f64,
    pub res_l2: f64,
    pub q: Vec<f64>,
}

pub fn write_iterations(path: &Path, rows: &[IterRow]) -> Result<()> {
    let mut w = writer(path)?;
    let nq = rows.first().map_or(0, |r| r.q.len());
    let mut head = vec!["step".to_string(), "time".into(), "iteration".into(), "res_inf".into(), "res_l2".into()];
    head.extend((0..nq).map(|k| format!("q_{k}")));
    w.write_record(&head)?;
    for r in rows {
        let mut rec = vec![r.step.to_string(), r.time.to_string(), r.iteration.to_string(), r.res_inf.to_string(), r.res_l2.to_string()];
        rec.extend(r.q.iter().map(|v| v.to_string()));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, v: &T) -> Result<()> {
    let f = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    let mut w = BufWriter::new(f);
    serde_json::to_writer_pretty(&mut w, v)?;
    writeln!(w)?;
    Ok(())
}

/// Point data for one mesh in a VTK file.
#[derive(Debug, Clone)]
pub struct VtkPiece {
    pub name: String,
    pub vertices: Vec<Point>,
    pub triangles: Vec<[usize; 3]>,
    pub regions: Vec<Region>,
    pub fields: Vec<(String, Vec<f64>)>,
}

impl VtkPiece {
    pub fn new(name: &str, mesh: &TriMesh, fields: Vec<(String, Vec<f64>)>) -> Self {
        VtkPiece {
            name: name.into(),
            vertices: mesh.vertices.clone(),
            triangles: mesh.triangles.clone(),
            regions: mesh.regions.clone(),
            fields,
        }
    }
}

fn region_id(r: Region) -> u8 {
    match r {
        Region::Packing => 0,
        Region::Cell => 1,
    }
}

/// Legacy ASCII unstructured grid. Absent field values are written as NaN.
pub fn write_vtk(path: &Path, title: &str, p: &VtkPiece) -> Result<()> {
    let f = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    let mut w = BufWriter::new(f);
    writeln!(w, "# vtk DataFile Version 3.0")?;
    writeln!(w, "{}", title.replace('\n', " "))?;
    writeln!(w, "ASCII")?;
    writeln!(w, "DATASET UNSTRUCTURED_GRID")?;
    writeln!(w, "POINTS {} double", p.vertices.len())?;
    for v in &p.vertices {
        writeln!(w, "{} {} 0", v[0], v[1])?;
    }
    let nt = p.triangles.len();
    writeln!(w, "CELLS {nt} {}", 4 * nt)?;
    for t in &p.triangles {
        writeln!(w, "3 {} {} {}", t[0], t[1], t[2])?;
    }
    writeln!(w, "CELL_TYPES {nt}")?;
    for _ in 0..nt {
        writeln!(w, "5")?;
    }
    writeln!(w, "CELL_DATA {nt}")?;
    writeln!(w, "SCALARS region int 1")?;
    writeln!(w, "LOOKUP_TABLE default")?;
    for r in &p.regions {
        writeln!(w, "{}", region_id(*r))?;
    }
    if !p.fields.is_empty() {
        writeln!(w, "POINT_DATA {}", p.vertices.len())?;
        for (name, vals) in &p.fields {
            if vals.len() != p.vertices.len() {
                bail!("field {name}: {} values for {} points", vals.len(), p.vertices.len());
            }
            writeln!(w, "SCALARS {name} double 1")?;
            writeln!(w, "LOOKUP_TABLE default")?;
            for v in vals {
                if v.is_nan() { writeln!(w, "nan")? } else { writeln!(w, "{v}")? }
            }
        }
    }
    w.flush()?;
    Ok(())
}
