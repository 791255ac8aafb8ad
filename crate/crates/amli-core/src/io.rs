//! Matrix Market (coordinate, pattern, symmetric) graph IO.

use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::graph::Graph;

const HEADER: &str = "%%MatrixMarket matrix coordinate pattern symmetric";

pub fn load_graph(path: impl AsRef<Path>) -> Result<Graph> {
    read_graph(fs::File::open(path)?)
}

pub fn save_graph(g: &Graph, path: impl AsRef<Path>) -> Result<()> {
    let mut f = std::io::BufWriter::new(fs::File::create(path)?);
    write_graph(g, &mut f)?;
    f.flush()?;
    Ok(())
}

/// Writes the strictly lower triangle, 1-based.
pub fn write_graph(g: &Graph, w: &mut impl Write) -> Result<()> {
    writeln!(w, "{HEADER}")?;
    let n = g.num_vertices();
    writeln!(w, "{n} {n} {}", g.num_edges())?;
    for &(i, j) in g.edges() {
        writeln!(w, "{} {}", j + 1, i + 1)?;
    }
    Ok(())
}

pub fn read_graph(r: impl Read) -> Result<Graph> {
    let mut lines = BufReader::new(r).lines();
    let header = lines.next().ok_or_else(|| fmt("empty file"))??;
    let toks: Vec<String> = header.split_whitespace().map(|t| t.to_ascii_lowercase()).collect();
    if toks.len() != 5 || toks[0] != "%%matrixmarket" || toks[1] != "matrix" || toks[2] != "coordinate" {
        return Err(fmt(format!("unsupported header: {header}")));
    }
    let symmetric = match toks[4].as_str() {
        "symmetric" => true,
        "general" => false,
        other => return Err(fmt(format!("unsupported symmetry '{other}'"))),
    };
    let has_values = match toks[3].as_str() {
        "pattern" => false,
        "real" | "integer" => true,
        other => return Err(fmt(format!("unsupported field '{other}'"))),
    };

    let mut size: Option<(usize, usize, usize)> = None;
    let mut entries: Vec<(usize, usize)> = Vec::new();
    for (lineno, line) in lines.enumerate() {
        let line = line?;
        let t = line.trim();
        if t.is_empty() || t.starts_with('%') {
            continue;
        }
        let parts: Vec<&str> = t.split_whitespace().collect();
        if size.is_none() {
            if parts.len() != 3 {
                return Err(fmt(format!("bad size line: {t}")));
            }
            let p = |s: &str| s.parse::<usize>().map_err(|_| fmt(format!("bad size line: {t}")));
            let (r, c, nnz) = (p(parts[0])?, p(parts[1])?, p(parts[2])?);
            if r != c {
                return Err(fmt(format!("matrix is {r}x{c}, not square")));
            }
            size = Some((r, c, nnz));
            continue;
        }
        let want = if has_values { 3 } else { 2 };
        if parts.len() < want {
            return Err(fmt(format!("line {}: expected {want} fields", lineno + 2)));
        }
        let idx = |s: &str| -> Result<usize> {
            let v = s.parse::<usize>().map_err(|_| fmt(format!("bad index '{s}'")))?;
            if v == 0 {
                return Err(fmt("indices are 1-based"));
            }
            Ok(v - 1)
        };
        let (i, j) = (idx(parts[0])?, idx(parts[1])?);
        if i == j {
            return Err(fmt(format!("self-loop entry ({}, {})", i + 1, j + 1)));
        }
        entries.push((i, j));
    }
    let (n, _, nnz) = size.ok_or_else(|| fmt("missing size line"))?;
    if entries.len() != nnz {
        return Err(fmt(format!("expected {nnz} entries, found {}", entries.len())));
    }
    if entries.iter().any(|&(i, j)| i >= n || j >= n) {
        return Err(fmt("entry index out of range"));
    }
    if !symmetric {
        let set: std::collections::HashSet<(usize, usize)> = entries.iter().copied().collect();
        if entries.iter().any(|&(i, j)| !set.contains(&(j, i))) {
            return Err(fmt("general matrix is not structurally symmetric"));
        }
    }
    Graph::from_edges_dedup(n, entries).map_err(|e| fmt(e.to_string()))
}

fn fmt(msg: impl Into<String>) -> Error {
    Error::Format(msg.into())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::path_graph;

    #[test]
    fn round_trip_path() {
        let g = path_graph(3);
        let mut buf = Vec::new();
        write_graph(&g, &mut buf).unwrap();
        assert_eq!(read_graph(&buf[..]).unwrap(), g);
    }

    #[test]
    fn rejects_self_loop() {
        let s = format!("{HEADER}\n3 3 2\n2 1\n2 2\n");
        assert!(matches!(read_graph(s.as_bytes()), Err(Error::Format(_))));
    }

    #[test]
    fn rejects_unsymmetric_general() {
        let s = "%%MatrixMarket matrix coordinate pattern general\n3 3 1\n2 1\n";
        assert!(read_graph(s.as_bytes()).is_err());
        let s = "%%MatrixMarket matrix coordinate pattern general\n3 3 2\n2 1\n1 2\n";
        assert_eq!(read_graph(s.as_bytes()).unwrap().num_edges(), 1);
    }

    #[test]
    fn rejects_garbage() {
        assert!(read_graph("hello\n".as_bytes()).is_err());
        assert!(read_graph(format!("{HEADER}\n3 3 2\n2 1\n").as_bytes()).is_err());
        assert!(read_graph(format!("{HEADER}\n3 3 1\n4 1\n").as_bytes()).is_err());
    }

    #[test]
    fn accepts_real_values_and_comments() {
        let s = "%%MatrixMarket matrix coordinate real symmetric\n% comment\n2 2 1\n2 1 -1.0\n";
        assert_eq!(read_graph(s.as_bytes()).unwrap().edges(), &[(0, 1)]);
    }
}
