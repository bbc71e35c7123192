//! Output formats: number formatting for tables, CSV and legacy VTK.

use std::fmt::Write as _;
use std::io::Write;

use crate::avs::SolutionField;
use crate::mesh::Mesh;

/// Scientific notation with 5 significant digits and a two-digit signed
/// exponent, e.g. `-1.0601e+01`.
pub fn fmt_sci(x: f64) -> String {
    if !x.is_finite() {
        return format!("{x}");
    }
    let s = format!("{x:.4e}");
    let (mant, exp) = s.split_once('e').expect("exponent");
    let e: i32 = exp.parse().expect("exponent digits");
    let sign = if e < 0 { '-' } else { '+' };
    format!("{mant}e{sign}{:02}", e.abs())
}

/// [`fmt_sci`], or `NA` when absent.
pub fn fmt_opt(x: Option<f64>) -> String {
    x.map_or_else(|| "NA".to_string(), fmt_sci)
}

/// A CSV table held in memory.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Csv {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Csv {
    pub fn new(header: &[&str]) -> Self {
        Self { header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_string(&self) -> String {
        let mut out = self.header.join(",");
        out.push('\n');
        for r in &self.rows {
            out.push_str(&r.join(","));
            out.push('\n');
        }
        out
    }
}

/// Fields attached to a VTK dataset.
#[derive(Default)]
pub struct VtkFields<'a> {
    pub point: Vec<(&'a str, Vec<f64>)>,
    pub cell: Vec<(&'a str, Vec<f64>)>,
}

/// Vertex values of the scalar part of a field.
pub fn vertex_values(field: &SolutionField, mesh: &Mesh) -> Vec<f64> {
    field.coeffs[..mesh.num_vertices()].to_vec()
}

/// Legacy ASCII VTK unstructured grid.
pub fn write_vtk(out: &mut impl Write, mesh: &Mesh, title: &str, fields: &VtkFields) -> std::io::Result<()> {
    let mut s = String::new();
    let nv = mesh.num_vertices();
    let nc = mesh.num_cells();
    let k = mesh.element_type().num_vertices();
    let _ = writeln!(s, "# vtk DataFile Version 3.0\n{title}\nASCII\nDATASET UNSTRUCTURED_GRID");
    let _ = writeln!(s, "POINTS {nv} double");
    for p in mesh.vertices() {
        let _ = writeln!(s, "{:.12e} {:.12e} 0", p[0], p[1]);
    }
    let _ = writeln!(s, "CELLS {nc} {}", nc * (k + 1));
    for c in 0..nc {
        let _ = write!(s, "{k}");
        for v in mesh.cell(c) {
            let _ = write!(s, " {v}");
        }
        s.push('\n');
    }
    let _ = writeln!(s, "CELL_TYPES {nc}");
    for _ in 0..nc {
        let _ = writeln!(s, "{}", mesh.element_type().vtk_cell_type());
    }
    if !fields.point.is_empty() {
        let _ = writeln!(s, "POINT_DATA {nv}");
        for (name, vals) in &fields.point {
            scalars(&mut s, name, vals);
        }
    }
    if !fields.cell.is_empty() {
        let _ = writeln!(s, "CELL_DATA {nc}");
        for (name, vals) in &fields.cell {
            scalars(&mut s, name, vals);
        }
    }
    out.write_all(s.as_bytes())
}

fn scalars(s: &mut String, name: &str, vals: &[f64]) {
    let _ = writeln!(s, "SCALARS {name} double 1\nLOOKUP_TABLE default");
    for v in vals {
        let _ = writeln!(s, "{v:.12e}");
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{ElementType, Rect};

    #[test]
    fn sci_format() {
        assert_eq!(fmt_sci(-10.601), "-1.0601e+01");
        assert_eq!(fmt_sci(3.7845e-5), "3.7845e-05");
        assert_eq!(fmt_sci(0.0), "0.0000e+00");
        assert_eq!(fmt_sci(1.0), "1.0000e+00");
        assert_eq!(fmt_opt(None), "NA");
    }

    #[test]
    fn vtk_layout() {
        let m = Mesh::build_structured(ElementType::Triangle, 1, Rect::UNIT).unwrap();
        let mut buf = Vec::new();
        let f = VtkFields { point: vec![("u", vec![0.0; 4])], cell: vec![("eps", vec![1.0, 2.0])] };
        write_vtk(&mut buf, &m, "t", &f).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert!(s.contains("POINTS 4 double"));
        assert!(s.contains("CELLS 2 8"));
        assert!(s.contains("CELL_DATA 2"));
        assert_eq!(s.matches("LOOKUP_TABLE").count(), 2);
    }
}
