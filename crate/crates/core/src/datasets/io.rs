//! CSV point clouds: header `x0,x1,...[,param][,label]`, comma separated,
//! shortest round-trip decimal floats.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use ndarray::Array2;

use super::PointCloud;
use crate::{Error, Result};

pub fn save_csv(pc: &PointCloud, path: impl AsRef<Path>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path.as_ref())?);
    let mut header: Vec<String> = (0..pc.dim()).map(|d| format!("x{d}")).collect();
    if pc.params().is_some() {
        header.push("param".into());
    }
    if pc.labels().is_some() {
        header.push("label".into());
    }
    writeln!(w, "{}", header.join(","))?;
    for (i, row) in pc.points().rows().into_iter().enumerate() {
        let mut fields: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        if let Some(p) = pc.params() {
            fields.push(p[i].to_string());
        }
        if let Some(l) = pc.labels() {
            fields.push(l[i].to_string());
        }
        writeln!(w, "{}", fields.join(","))?;
    }
    w.flush()?;
    Ok(())
}

pub fn load_csv(path: impl AsRef<Path>) -> Result<PointCloud> {
    let path = path.as_ref();
    let parse_err = |line: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;
    let header = reader.headers().map_err(|e| csv_error(path, e))?.clone();
    if header.is_empty() || (header.len() == 1 && header[0].trim().is_empty()) {
        return Err(parse_err(1, "missing header row".into()));
    }
    let names: Vec<&str> = header.iter().map(str::trim).collect();
    let param_col = names.iter().position(|&h| h == "param");
    let label_col = names.iter().position(|&h| h == "label");
    let coord_cols: Vec<usize> = (0..names.len())
        .filter(|&c| Some(c) != param_col && Some(c) != label_col)
        .collect();
    if coord_cols.is_empty() {
        return Err(parse_err(1, "no coordinate columns".into()));
    }

    let mut coords = Vec::new();
    let mut params = Vec::new();
    let mut labels = Vec::new();
    let mut n = 0;
    for rec in reader.records() {
        let rec = rec.map_err(|e| csv_error(path, e))?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        let num = |c: usize| -> Result<f64> {
            let field = rec[c].trim();
            field
                .parse::<f64>()
                .map_err(|_| parse_err(line, format!("column {:?}: not a number: {field:?}", names[c])))
        };
        for &c in &coord_cols {
            coords.push(num(c)?);
        }
        if let Some(c) = param_col {
            params.push(num(c)?);
        }
        if let Some(c) = label_col {
            let field = rec[c].trim();
            labels.push(
                field
                    .parse::<usize>()
                    .map_err(|_| parse_err(line, format!("label is not a non-negative integer: {field:?}")))?,
            );
        }
        n += 1;
    }
    if n == 0 {
        return Err(parse_err(2, "no data rows".into()));
    }
    let points = Array2::from_shape_vec((n, coord_cols.len()), coords).expect("row lengths checked");
    PointCloud::with_metadata(points, param_col.map(|_| params), label_col.map(|_| labels))
        .map_err(|e| parse_err(0, e.to_string()))
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line() as usize);
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        csv::ErrorKind::UnequalLengths { expected_len, len, .. } => Error::Parse {
            path: path.to_path_buf(),
            line,
            message: format!("ragged row: expected {expected_len} fields, found {len}"),
        },
        other => Error::Parse {
            path: path.to_path_buf(),
            line,
            message: format!("{other:?}"),
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::SeededRng;

    #[test]
    fn round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("pc.csv");
        let mut rng = SeededRng::new(0);
        let pts = Array2::from_shape_fn((5, 3), |_| rng.gaussian() * 1e-3);
        let pc = PointCloud::with_metadata(
            pts,
            Some(vec![0.1, 0.2, 1.0 / 3.0, 4.0, 5.0]),
            Some(vec![0, 1, 2, 1, 0]),
        )
        .unwrap();
        save_csv(&pc, &path).unwrap();
        let back = load_csv(&path).unwrap();
        assert_eq!(back, pc);
    }

    #[test]
    fn three_points_two_columns() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("pc.csv");
        std::fs::write(&path, "x0,x1\n1,2\n3,4\n5,6\n").unwrap();
        let pc = load_csv(&path).unwrap();
        assert_eq!((pc.len(), pc.dim()), (3, 2));
        assert!(pc.params().is_none() && pc.labels().is_none());
    }

    #[test]
    fn empty_file_is_a_parse_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("empty.csv");
        std::fs::write(&path, "").unwrap();
        assert!(matches!(load_csv(&path), Err(Error::Parse { .. })));
    }

    #[test]
    fn ragged_and_non_numeric_rows_report_line() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        std::fs::write(&path, "x0,x1\n1,2\n3\n").unwrap();
        match load_csv(&path) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        std::fs::write(&path, "x0,x1\n1,2\n3,4\n5,abc\n").unwrap();
        match load_csv(&path) {
            Err(Error::Parse { line, message, .. }) => {
                assert_eq!(line, 4);
                assert!(message.contains("abc"));
            }
            other => panic!("{other:?}"),
        }
    }
}
