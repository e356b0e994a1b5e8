//! Per-cycle artifacts: legacy ASCII VTK, boundary CSV and the run summary.
//!
//! Floats are written as `{:.16e}` (17 significant digits), which round-trips
//! every `f64`.

use std::fmt::Write as _;
use std::fs::{self, File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::adapt::{CycleRecord, CycleView};
use crate::contact::ContactReport;
use crate::error::{Error, Result};
use crate::estimator::IndicatorField;
use crate::fespace::FeFunction;

pub const SUMMARY_HEADER: &str =
    "cycle,dofs,h_max,estimate,err_pos,err_neg,err_total,effectivity,N_h,condition_ah";

fn float(x: f64) -> String {
    format!("{x:.16e}")
}

fn optional(x: Option<f64>) -> String {
    x.map(float).unwrap_or_default()
}

/// One `summary.csv` row, without the trailing newline.
pub fn summary_row(r: &CycleRecord) -> String {
    format!(
        "{},{},{},{},{},{},{},{},{},{}",
        r.cycle,
        r.dofs,
        float(r.h_max),
        float(r.estimate),
        optional(r.err_pos),
        optional(r.err_neg),
        optional(r.err_total),
        optional(r.effectivity),
        r.n_h,
        r.condition_ah
    )
}

/// Legacy VTK unstructured grid with `U` as point data and the two
/// indicator parts as cell data.
pub fn vtk_string(u: &FeFunction, ind: &IndicatorField) -> String {
    let mesh = u.mesh();
    let nv = mesh.num_vertices();
    let nt = mesh.num_triangles();
    let mut s = String::new();
    s.push_str(
        "# vtk DataFile Version 3.0\nsignorini solution\nASCII\nDATASET UNSTRUCTURED_GRID\n",
    );
    let _ = writeln!(s, "POINTS {nv} double");
    for p in mesh.vertices() {
        let _ = writeln!(s, "{} {} 0", float(p.x), float(p.y));
    }
    let _ = writeln!(s, "CELLS {nt} {}", 4 * nt);
    for [a, b, c] in mesh.triangles() {
        let _ = writeln!(s, "3 {a} {b} {c}");
    }
    let _ = writeln!(s, "CELL_TYPES {nt}");
    for _ in 0..nt {
        s.push_str("5\n");
    }
    let _ = writeln!(
        s,
        "POINT_DATA {nv}\nSCALARS U double 1\nLOOKUP_TABLE default"
    );
    for &v in u.coefficients() {
        let _ = writeln!(s, "{}", float(v));
    }
    let _ = writeln!(
        s,
        "CELL_DATA {nt}\nSCALARS eta_K double 1\nLOOKUP_TABLE default"
    );
    for e in &ind.per_element {
        let _ = writeln!(s, "{}", float(e.eta_k));
    }
    s.push_str("SCALARS eta_J double 1\nLOOKUP_TABLE default\n");
    for e in &ind.per_element {
        let _ = writeln!(s, "{}", float(e.eta_j));
    }
    s
}

/// `arc,U,contact` for every vertex of the boundary walk.
pub fn boundary_csv(u: &FeFunction, active: &[bool]) -> String {
    let mut s = String::from("arc,U,contact\n");
    for b in u.mesh().boundary() {
        let _ = writeln!(
            s,
            "{},{},{}",
            float(b.arc),
            float(u.coefficients()[b.vertex]),
            u8::from(active[b.vertex])
        );
    }
    s
}

/// `arc` of every critical point of the discrete contact set.
pub fn critical_csv(report: &ContactReport) -> String {
    let mut s = String::from("arc\n");
    for &a in &report.critical_points {
        let _ = writeln!(s, "{}", float(a));
    }
    s
}

/// Writes the artifacts of each cycle into one directory.
#[derive(Debug)]
pub struct Exporter {
    dir: PathBuf,
}

impl Exporter {
    /// Creates `dir` if needed and starts a fresh `summary.csv`.
    pub fn create(dir: impl Into<PathBuf>) -> Result<Self> {
        let dir = dir.into();
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        let exporter = Self { dir };
        exporter.write(Path::new("summary.csv"), &format!("{SUMMARY_HEADER}\n"))?;
        Ok(exporter)
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn write(&self, name: &Path, contents: &str) -> Result<()> {
        let path = self.dir.join(name);
        let file = File::create(&path).map_err(|e| Error::io(&path, e))?;
        let mut w = BufWriter::new(file);
        w.write_all(contents.as_bytes())
            .and_then(|_| w.flush())
            .map_err(|e| Error::io(&path, e))
    }

    pub fn write_cycle(&self, view: &CycleView<'_>) -> Result<()> {
        let c = view.record.cycle;
        let u = &view.solution.u;
        self.write(
            Path::new(&format!("cycle_{c:03}.vtk")),
            &vtk_string(u, view.indicators),
        )?;
        self.write(
            Path::new(&format!("cycle_{c:03}_boundary.csv")),
            &boundary_csv(u, &view.solution.active),
        )?;
        self.write(
            Path::new(&format!("cycle_{c:03}_critical.csv")),
            &critical_csv(view.contact),
        )?;
        let path = self.dir.join("summary.csv");
        let mut file = OpenOptions::new()
            .append(true)
            .open(&path)
            .map_err(|e| Error::io(&path, e))?;
        writeln!(file, "{}", summary_row(view.record)).map_err(|e| Error::io(&path, e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adapt::run_adaptive_with;
    use crate::config::{RunConfig, Strategy};
    use crate::manufactured::ExampleName;

    fn record() -> CycleRecord {
        CycleRecord {
            cycle: 3,
            dofs: 81,
            h_max: 0.1,
            estimate: 1.0 / 3.0,
            err_pos: None,
            err_neg: None,
            err_total: None,
            effectivity: None,
            n_h: 2,
            condition_ah: true,
            critical_points: vec![0.5],
            drift: None,
            pdas_iterations: 2,
            wall_seconds: 0.0,
        }
    }

    #[test]
    fn summary_row_layout() {
        let row = summary_row(&record());
        assert_eq!(
            row,
            "3,81,1.0000000000000001e-1,3.3333333333333331e-1,,,,,2,true"
        );
        assert_eq!(row.split(',').count(), SUMMARY_HEADER.split(',').count());
    }

    #[test]
    fn floats_round_trip() {
        for x in [1.0 / 3.0, std::f64::consts::PI, 1e-300, -2.5e17, 0.1 + 0.2] {
            assert_eq!(float(x).parse::<f64>().unwrap(), x);
        }
    }

    #[test]
    fn constant_run_writes_zero_indicators() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = RunConfig {
            example: ExampleName::Constant,
            strategy: Strategy::Uniform,
            coarse_n: 2,
            max_cycles: 2,
            ..RunConfig::default()
        };
        let exporter = Exporter::create(dir.path()).unwrap();
        run_adaptive_with(&cfg, |view| exporter.write_cycle(view)).unwrap();

        let summary = fs::read_to_string(dir.path().join("summary.csv")).unwrap();
        let lines: Vec<&str> = summary.lines().collect();
        assert_eq!(lines.len(), 3);
        assert_eq!(lines[0], SUMMARY_HEADER);

        let vtk = fs::read_to_string(dir.path().join("cycle_000.vtk")).unwrap();
        let cells = vtk.split("CELL_DATA 8\n").nth(1).unwrap();
        let values: Vec<f64> = cells
            .lines()
            .filter(|l| !l.starts_with("SCALARS") && !l.starts_with("LOOKUP"))
            .map(|l| l.parse().unwrap())
            .collect();
        assert_eq!(values.len(), 16);
        assert!(values.iter().all(|&v| v.abs() < 1e-13));
        assert!(vtk.contains("POINTS 9 double"));
        assert!(vtk.contains("CELLS 8 32"));

        let boundary = fs::read_to_string(dir.path().join("cycle_001_boundary.csv")).unwrap();
        assert_eq!(boundary.lines().count(), 1 + 16);
        assert!(dir.path().join("cycle_001_critical.csv").exists());
    }

    #[test]
    fn unwritable_directory_is_an_io_error() {
        let dir = tempfile::tempdir().unwrap();
        let blocker = dir.path().join("file");
        fs::write(&blocker, "x").unwrap();
        assert!(matches!(
            Exporter::create(blocker.join("sub")),
            Err(Error::Io { .. })
        ));
    }
}
