//! CSV and binary result files.
//!
//! Every CSV file starts with a comment line `# tubeheat-csv v1 <kind>`
//! followed by a fixed header row. Floats are written in the shortest form
//! that round-trips, so identical runs give identical bytes.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::operators::CausalMatrix;
use crate::quadrature::SpaceTimeMesh;

pub const CSV_VERSION: u32 = 1;

/// Formats a float for output.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:e}")
}

fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Config(format!("csv: {other:?}")),
    }
}

/// Writes a versioned CSV file with the given header and rows.
pub fn write_csv(path: &Path, kind: &str, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let wrap = |e: Error| e.context(format!("writing {}", path.display()));
    let mut file = BufWriter::new(File::create(path).map_err(|e| wrap(e.into()))?);
    writeln!(file, "# tubeheat-csv v{CSV_VERSION} {kind}").map_err(|e| wrap(e.into()))?;
    let mut w = csv::Writer::from_writer(file);
    w.write_record(header).map_err(|e| wrap(csv_err(e)))?;
    for row in rows {
        if row.len() != header.len() {
            return Err(wrap(Error::Dimension {
                expected: header.len(),
                got: row.len(),
            }));
        }
        w.write_record(row).map_err(|e| wrap(csv_err(e)))?;
    }
    w.flush().map_err(|e| wrap(e.into()))?;
    Ok(())
}

/// `slab, panel, t, theta, value` for a density on `mesh`.
pub fn write_density(path: &Path, mesh: &SpaceTimeMesh, values: &[f64]) -> Result<()> {
    if values.len() != mesh.len() {
        return Err(Error::Dimension {
            expected: mesh.len(),
            got: values.len(),
        });
    }
    let rows: Vec<Vec<String>> = mesh
        .collocation()
        .iter()
        .zip(values)
        .enumerate()
        .map(|(k, (s, v))| {
            vec![
                (k / mesh.panels()).to_string(),
                (k % mesh.panels()).to_string(),
                fmt_f64(s.t),
                fmt_f64(s.theta),
                fmt_f64(*v),
            ]
        })
        .collect();
    write_csv(path, "density", &["slab", "panel", "t", "theta", "value"], &rows)
}

/// One interior field sample.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FieldSample {
    pub t: f64,
    pub x: [f64; 2],
    pub value: f64,
    pub near_boundary: bool,
}

/// `t, x1, x2, value, flag` with `flag` either `ok` or `near`.
pub fn write_field(path: &Path, samples: &[FieldSample]) -> Result<()> {
    let rows: Vec<Vec<String>> = samples
        .iter()
        .map(|s| {
            vec![
                fmt_f64(s.t),
                fmt_f64(s.x[0]),
                fmt_f64(s.x[1]),
                fmt_f64(s.value),
                if s.near_boundary { "near" } else { "ok" }.to_string(),
            ]
        })
        .collect();
    write_csv(path, "field", &["t", "x1", "x2", "value", "flag"], &rows)
}

/// Writes a matrix in the binary dump format of [`CausalMatrix`].
pub fn write_matrix(path: &Path, a: &CausalMatrix) -> Result<()> {
    let wrap = |e: Error| e.context(format!("writing {}", path.display()));
    let mut file = BufWriter::new(File::create(path).map_err(|e| wrap(e.into()))?);
    a.write_binary(&mut file).map_err(wrap)?;
    file.flush().map_err(|e| wrap(e.into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::TubeGeometry;

    #[test]
    fn density_file_has_version_line_and_fixed_columns() {
        let geom = TubeGeometry::stationary_circle(1.0, 1.0).unwrap();
        let mesh = SpaceTimeMesh::build(&geom, 4, 4, Default::default()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("density.csv");
        let values: Vec<f64> = (0..mesh.len()).map(|k| k as f64 * 0.1).collect();
        write_density(&path, &mesh, &values).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("# tubeheat-csv v1 density"));
        assert_eq!(lines.next(), Some("slab,panel,t,theta,value"));
        assert_eq!(lines.clone().count(), 16);
        assert!(lines.nth(5).unwrap().starts_with("1,1,"));
        assert!(write_density(&path, &mesh, &values[1..]).is_err());
    }

    #[test]
    fn floats_round_trip() {
        for v in [0.0, -1.5, 1e-300, std::f64::consts::PI, 123456.789] {
            assert_eq!(fmt_f64(v).parse::<f64>().unwrap(), v);
        }
    }

    #[test]
    fn row_width_is_checked() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.csv");
        assert!(write_csv(&path, "x", &["a", "b"], &[vec!["1".into()]]).is_err());
        write_field(
            &path,
            &[FieldSample {
                t: 0.5,
                x: [0.0, 1.0],
                value: 2.0,
                near_boundary: true,
            }],
        )
        .unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.ends_with("5e-1,0e0,1e0,2e0,near\n"), "{text}");
    }
}
