use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use super::WeightedGraph;
use crate::{Error, Result};

/// Writes `# n=<N> sym=1` then one `i<TAB>j<TAB>w` line per edge.
pub fn write_edge_list(g: &WeightedGraph, path: impl AsRef<Path>) -> Result<()> {
    let mut out = BufWriter::new(fs::File::create(path)?);
    writeln!(out, "# n={} sym=1", g.n())?;
    for &(i, j, w) in g.edges() {
        writeln!(out, "{i}\t{j}\t{w:?}")?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_edge_list(path: impl AsRef<Path>) -> Result<WeightedGraph> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)?;
    let err = |line: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| err(1, "empty file".into()))?;
    let n = header
        .strip_prefix("# n=")
        .and_then(|rest| rest.split_whitespace().next())
        .and_then(|v| v.parse::<usize>().ok())
        .ok_or_else(|| err(1, format!("expected header `# n=<N> sym=1`, got `{header}`")))?;
    let mut edges = Vec::new();
    for (k, line) in lines.enumerate() {
        let lineno = k + 2;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 3 {
            return Err(err(
                lineno,
                format!("expected 3 tab-separated fields, got {}", fields.len()),
            ));
        }
        let i = fields[0]
            .parse()
            .map_err(|e| err(lineno, format!("node `{}`: {e}", fields[0])))?;
        let j = fields[1]
            .parse()
            .map_err(|e| err(lineno, format!("node `{}`: {e}", fields[1])))?;
        let w = fields[2]
            .parse()
            .map_err(|e| err(lineno, format!("weight `{}`: {e}", fields[2])))?;
        edges.push((i, j, w));
    }
    WeightedGraph::new(n, edges).map_err(|e| err(0, e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("g.tsv");
        let g = WeightedGraph::new(4, vec![(0, 1, 0.1 + 0.2), (1, 3, 1e-200), (2, 3, std::f64::consts::PI)]).unwrap();
        write_edge_list(&g, &path).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("# n=4 sym=1\n0\t1\t0.30000000000000004\n"));
        assert_eq!(read_edge_list(&path).unwrap(), g);
    }

    #[test]
    fn malformed_lines_report_position() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("g.tsv");
        fs::write(&path, "# n=3 sym=1\n0\t1\t0.5\n1\tx\t0.5\n").unwrap();
        assert!(matches!(read_edge_list(&path), Err(Error::Parse { line: 3, .. })));
        fs::write(&path, "0\t1\t0.5\n").unwrap();
        assert!(matches!(read_edge_list(&path), Err(Error::Parse { line: 1, .. })));
    }
}
