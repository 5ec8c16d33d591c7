use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use super::Likelihood;
use crate::{Error, Result};

/// Writes `index,label` rows.
pub fn write_labels_csv(path: impl AsRef<Path>, indices: &[usize], labels: &[usize]) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    writeln!(out, "index,label")?;
    for (i, l) in indices.iter().zip(labels) {
        writeln!(out, "{i},{l}")?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_labels_csv(path: impl AsRef<Path>) -> Result<Vec<(usize, usize)>> {
    let path = path.as_ref();
    let mut reader = csv::Reader::from_path(path).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        line: 0,
        message: e.to_string(),
    })?;
    let mut rows = Vec::new();
    for (k, record) in reader.records().enumerate() {
        let line = k + 2;
        let bad = |message: String| Error::Parse {
            path: path.to_path_buf(),
            line,
            message,
        };
        let record = record.map_err(|e| bad(e.to_string()))?;
        let field = |c: usize| -> Result<usize> {
            let s = record.get(c).ok_or_else(|| bad("expected `index,label`".into()))?;
            s.trim().parse().map_err(|e| bad(format!("`{s}`: {e}")))
        };
        rows.push((field(0)?, field(1)?));
    }
    Ok(rows)
}

/// Writes the score matrix with header `q0,...,q{C-1}`.
pub fn write_likelihood_csv(path: impl AsRef<Path>, q: &Likelihood) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    let header: Vec<String> = (0..q.q.ncols()).map(|c| format!("q{c}")).collect();
    writeln!(out, "{}", header.join(","))?;
    for row in q.q.rows() {
        let fields: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
        writeln!(out, "{}", fields.join(","))?;
    }
    out.flush()?;
    Ok(())
}
