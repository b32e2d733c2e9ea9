//! Reading field CSV files back onto a mesh, and plot-data output.

use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::mesh::Mesh;
use crate::real::Real;

/// Named columns read from a field CSV, reordered to mesh node order.
#[derive(Clone, Debug, PartialEq)]
pub struct FieldTable<T> {
    pub names: Vec<String>,
    pub columns: Vec<Vec<T>>,
}

impl<T: Real> FieldTable<T> {
    pub fn column(&self, name: &str) -> Result<&[T]> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|k| self.columns[k].as_slice())
            .ok_or_else(|| Error::FieldFile(format!("missing column `{name}`")))
    }
}

/// Parses a CSV written by [`Mesh::write_csv`]. Rows must list the nodes in
/// lexicographic order with coordinates matching the mesh.
pub fn read_fields_csv<T: Real, R: Read>(mesh: &Mesh<T>, input: R) -> Result<FieldTable<T>> {
    let mut rdr = csv::Reader::from_reader(input);
    let headers: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    let ncoord = mesh.dim();
    let expect: &[&str] = if ncoord == 2 { &["x", "y", "d"] } else { &["x", "d"] };
    if headers.len() < expect.len() || headers[..expect.len()] != *expect {
        return Err(Error::FieldFile(format!(
            "header must start with {}",
            expect.join(",")
        )));
    }
    let names: Vec<String> = headers[expect.len()..].to_vec();
    let mut columns = vec![vec![T::zero(); mesh.num_nodes()]; names.len()];
    let order = mesh.lexicographic_order();
    let tol = T::lit(1e-9) * (T::one() + mesh.h());
    let mut rows = 0;
    for (r, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let Some(&node) = order.get(r) else {
            return Err(Error::FieldFile(format!(
                "more rows than the {} mesh nodes",
                mesh.num_nodes()
            )));
        };
        let parse = |k: usize| -> Result<T> {
            let s = rec.get(k).ok_or_else(|| Error::FieldFile(format!("row {}: too few columns", r + 1)))?;
            s.trim()
                .parse::<f64>()
                .map(T::lit)
                .map_err(|e| Error::FieldFile(format!("row {}, column {}: {e}", r + 1, k + 1)))
        };
        let x = mesh.nodes()[node];
        for k in 0..ncoord {
            if (parse(k)? - x[k]).abs() > tol {
                return Err(Error::FieldFile(format!(
                    "row {}: coordinates do not match the configured mesh",
                    r + 1
                )));
            }
        }
        for (k, col) in columns.iter_mut().enumerate() {
            col[node] = parse(expect.len() + k)?;
        }
        rows += 1;
    }
    if rows != mesh.num_nodes() {
        return Err(Error::FieldFile(format!(
            "{rows} rows for a mesh with {} nodes",
            mesh.num_nodes()
        )));
    }
    Ok(FieldTable { names, columns })
}

/// Whitespace-separated columns `x [y] d <names...>` with a `#` header line,
/// rows in lexicographic node order.
pub fn write_plot_data<T: Real, W: Write>(mesh: &Mesh<T>, mut out: W, columns: &[(&str, &[T])]) -> Result<()> {
    for (_, c) in columns {
        mesh.check_len(c.len())?;
    }
    let mut header = vec!["x"];
    if mesh.dim() == 2 {
        header.push("y");
    }
    header.push("d");
    header.extend(columns.iter().map(|(n, _)| *n));
    writeln!(out, "# {}", header.join(" "))?;
    for i in mesh.lexicographic_order() {
        let x = mesh.nodes()[i];
        let mut row = vec![x[0].to_string()];
        if mesh.dim() == 2 {
            row.push(x[1].to_string());
        }
        row.push(mesh.dist()[i].to_string());
        row.extend(columns.iter().map(|(_, c)| c[i].to_string()));
        writeln!(out, "{}", row.join(" "))?;
    }
    out.flush()?;
    Ok(())
}
