//! File exports: legacy VTK, CSV and JSON.
//!
//! VTK files are ASCII `STRUCTURED_POINTS` with this exact layout:
//!
//! ```text
//! # vtk DataFile Version 3.0
//! <title>
//! ASCII
//! DATASET STRUCTURED_POINTS
//! DIMENSIONS <nx+1> <ny+1> 1
//! ORIGIN 0 0 0
//! SPACING <hx> <hy> 1
//! POINT_DATA <(nx+1)(ny+1)>
//! SCALARS <name> double 1
//! LOOKUP_TABLE default
//! <one value per line>
//! VECTORS <name> double
//! <vx vy 0 per line>
//! ```
//!
//! Points run row-major with `x` fastest. Values use 12 significant digits
//! in scientific notation. Periodic fields are written on the closed cell,
//! repeating the seam nodes.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use microtop::fem::{ScalarField, StructuredGrid, VectorField};
use serde::Serialize;

use crate::CliError;

fn io_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

fn num(v: f64) -> String {
    format!("{v:.11e}")
}

/// Nodal data attached to one grid.
pub enum VtkData<'a> {
    Scalar(&'a str, &'a ScalarField),
    Vector(&'a str, &'a VectorField),
}

impl VtkData<'_> {
    fn grid(&self) -> StructuredGrid {
        match self {
            VtkData::Scalar(_, f) => f.grid,
            VtkData::Vector(_, f) => f.grid,
        }
    }
}

/// Closed-grid point list: node index of each VTK point.
fn points(grid: &StructuredGrid) -> Vec<usize> {
    let mut out = Vec::with_capacity((grid.nx + 1) * (grid.ny + 1));
    for j in 0..=grid.ny {
        for i in 0..=grid.nx {
            out.push(grid.node(i, j));
        }
    }
    out
}

/// Renders the VTK text for fields sharing one grid.
pub fn vtk_string(title: &str, data: &[VtkData]) -> Result<String, CliError> {
    let grid = data
        .first()
        .map(|d| d.grid())
        .ok_or_else(|| CliError::Config("VTK export needs at least one field".into()))?;
    if data.iter().any(|d| d.grid() != grid) {
        return Err(CliError::Config("VTK fields must share one grid".into()));
    }
    let pts = points(&grid);
    let mut s = String::new();
    s.push_str("# vtk DataFile Version 3.0\n");
    s.push_str(title.lines().next().unwrap_or(""));
    s.push_str("\nASCII\nDATASET STRUCTURED_POINTS\n");
    s.push_str(&format!("DIMENSIONS {} {} 1\n", grid.nx + 1, grid.ny + 1));
    s.push_str("ORIGIN 0 0 0\n");
    s.push_str(&format!("SPACING {} {} 1\n", num(grid.hx), num(grid.hy)));
    s.push_str(&format!("POINT_DATA {}\n", pts.len()));
    for d in data {
        match d {
            VtkData::Scalar(name, f) => {
                s.push_str(&format!("SCALARS {name} double 1\nLOOKUP_TABLE default\n"));
                for &n in &pts {
                    s.push_str(&num(f.values[n]));
                    s.push('\n');
                }
            }
            VtkData::Vector(name, f) => {
                s.push_str(&format!("VECTORS {name} double\n"));
                for &n in &pts {
                    let v = f.values[n];
                    s.push_str(&format!("{} {} {}\n", num(v[0]), num(v[1]), num(0.0)));
                }
            }
        }
    }
    Ok(s)
}

pub fn write_vtk(path: &Path, title: &str, data: &[VtkData]) -> Result<(), CliError> {
    std::fs::write(path, vtk_string(title, data)?).map_err(|e| io_err(path, e))
}

/// Writes a header row and records; fields are quoted where RFC 4180 needs it.
pub fn write_csv<R: AsRef<[String]>>(
    path: &Path,
    header: &[&str],
    rows: &[R],
) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| io_err(path, e))?;
    w.write_record(header).map_err(|e| io_err(path, e))?;
    for r in rows {
        w.write_record(r.as_ref()).map_err(|e| io_err(path, e))?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

/// Shortest text that parses back to the same `f64`.
pub fn cell(v: f64) -> String {
    format!("{v:e}")
}

pub fn write_json(path: &Path, value: &impl Serialize) -> Result<(), CliError> {
    let file = File::create(path).map_err(|e| io_err(path, e))?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| io_err(path, e))?;
    w.write_all(b"\n").map_err(|e| io_err(path, e))?;
    w.flush().map_err(|e| io_err(path, e))
}

/// An output directory that remembers what was written to it.
#[derive(Debug)]
pub struct OutputDir {
    pub root: PathBuf,
    pub files: Vec<String>,
}

impl OutputDir {
    pub fn create(root: &Path) -> Result<Self, CliError> {
        std::fs::create_dir_all(root).map_err(|e| io_err(root, e))?;
        Ok(Self {
            root: root.to_path_buf(),
            files: Vec::new(),
        })
    }

    fn path(&mut self, name: &str) -> PathBuf {
        self.files.push(name.to_string());
        self.root.join(name)
    }

    pub fn vtk(&mut self, name: &str, title: &str, data: &[VtkData]) -> Result<(), CliError> {
        let p = self.path(name);
        write_vtk(&p, title, data)
    }

    pub fn csv<R: AsRef<[String]>>(
        &mut self,
        name: &str,
        header: &[&str],
        rows: &[R],
    ) -> Result<(), CliError> {
        let p = self.path(name);
        write_csv(&p, header, rows)
    }

    pub fn json(&mut self, name: &str, value: &impl Serialize) -> Result<(), CliError> {
        let p = self.path(name);
        write_json(&p, value)
    }
}
