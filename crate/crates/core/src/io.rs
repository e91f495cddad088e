//! Degree-sequence and graph files.
//!
//! Both formats are a JSON header line followed by a plain CSV table:
//!
//! ```text
//! {"format":"voterlab-degrees","kind":"directed","n":3,...}
//! vertex,in_deg,out_deg
//! 0,2,3
//! ...
//! ```
//!
//! Undirected degree files use the columns `vertex,deg`. Graph files use
//! `src,dst,multiplicity`, with undirected edges listed once (`src <= dst`).
//! When reading, the header line is optional so hand-written sequences work.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::degrees::{DegreeSequence, MomentSummary, ParetoSpec};
use crate::error::{Error, Result};
use crate::graph::MultiDigraph;

pub const DEGREES_FORMAT: &str = "voterlab-degrees";
pub const GRAPH_FORMAT: &str = "voterlab-graph";

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DegreesHeader {
    pub format: String,
    pub kind: crate::degrees::DegreeKind,
    pub n: usize,
    pub spec: Option<ParetoSpec>,
    pub moments: Option<MomentSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphHeader {
    pub format: String,
    pub n: usize,
    pub directed: bool,
    pub seed: Option<u64>,
}

fn parse_err(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse { line, msg: msg.into() }
}

type Table = (Option<Value>, Vec<String>, Vec<(usize, Vec<String>)>);

/// Split the optional JSON header from the CSV body; returns
/// `(header, column names, rows)` with 1-based line numbers.
fn read_table<R: BufRead>(r: R) -> Result<Table> {
    let mut header = None;
    let mut columns: Option<Vec<String>> = None;
    let mut rows = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        let line = line.trim();
        let lineno = i + 1;
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if header.is_none() && columns.is_none() && line.starts_with('{') {
            header = Some(serde_json::from_str(line).map_err(|e| parse_err(lineno, e.to_string()))?);
            continue;
        }
        let fields: Vec<String> = line.split(',').map(|f| f.trim().to_string()).collect();
        if columns.is_none() {
            columns = Some(fields);
        } else {
            rows.push((lineno, fields));
        }
    }
    let columns = columns.ok_or_else(|| parse_err(0, "missing CSV column header"))?;
    Ok((header, columns, rows))
}

fn field_u64(row: &[String], col: usize, line: usize) -> Result<u64> {
    row.get(col)
        .ok_or_else(|| parse_err(line, format!("missing column {col}")))?
        .parse()
        .map_err(|e| parse_err(line, format!("column {col}: {e}")))
}

pub fn write_degrees<W: Write>(mut w: W, seq: &DegreeSequence, spec: Option<&ParetoSpec>) -> Result<()> {
    let header = DegreesHeader {
        format: DEGREES_FORMAT.into(),
        kind: seq.kind(),
        n: seq.n(),
        spec: spec.copied(),
        moments: Some(seq.moments(spec.map(|s| (s.alpha, s.x_min)))),
    };
    writeln!(w, "{}", serde_json::to_string(&header)?)?;
    if seq.is_directed() {
        writeln!(w, "vertex,in_deg,out_deg")?;
        for (x, (i, o)) in seq.in_deg().iter().zip(seq.out_deg()).enumerate() {
            writeln!(w, "{x},{i},{o}")?;
        }
    } else {
        writeln!(w, "vertex,deg")?;
        for (x, d) in seq.deg().iter().enumerate() {
            writeln!(w, "{x},{d}")?;
        }
    }
    Ok(())
}

/// Read a degree file; the column header decides the kind.
pub fn read_degrees<R: BufRead>(r: R) -> Result<(DegreeSequence, Option<Value>)> {
    let (header, columns, rows) = read_table(r)?;
    let cols: Vec<&str> = columns.iter().map(String::as_str).collect();
    let seq = match cols.as_slice() {
        ["vertex", "in_deg", "out_deg"] => {
            let mut inn = Vec::with_capacity(rows.len());
            let mut out = Vec::with_capacity(rows.len());
            for (k, (line, row)) in rows.iter().enumerate() {
                check_vertex(row, k, *line)?;
                inn.push(field_u64(row, 1, *line)?);
                out.push(field_u64(row, 2, *line)?);
            }
            DegreeSequence::directed(inn, out)?
        }
        ["vertex", "deg"] => {
            let mut deg = Vec::with_capacity(rows.len());
            for (k, (line, row)) in rows.iter().enumerate() {
                check_vertex(row, k, *line)?;
                deg.push(field_u64(row, 1, *line)?);
            }
            DegreeSequence::undirected(deg)?
        }
        _ => {
            return Err(parse_err(
                0,
                format!("expected columns vertex,in_deg,out_deg or vertex,deg; got {}", columns.join(",")),
            ))
        }
    };
    Ok((seq, header))
}

fn check_vertex(row: &[String], expected: usize, line: usize) -> Result<()> {
    let v = field_u64(row, 0, line)?;
    if v as usize != expected {
        return Err(parse_err(line, format!("vertices must be listed in order; expected {expected}, got {v}")));
    }
    Ok(())
}

pub fn write_graph<W: Write>(mut w: W, g: &MultiDigraph, seed: Option<u64>) -> Result<()> {
    let header = GraphHeader { format: GRAPH_FORMAT.into(), n: g.n(), directed: g.is_directed(), seed };
    writeln!(w, "{}", serde_json::to_string(&header)?)?;
    writeln!(w, "src,dst,multiplicity")?;
    for (x, y, k) in g.edge_multiplicities() {
        writeln!(w, "{x},{y},{k}")?;
    }
    Ok(())
}

pub fn read_graph<R: BufRead>(r: R) -> Result<(MultiDigraph, GraphHeader)> {
    let (header, columns, rows) = read_table(r)?;
    let header: GraphHeader = match header {
        Some(v) => serde_json::from_value(v).map_err(|e| parse_err(1, e.to_string()))?,
        None => return Err(parse_err(1, "graph files need a JSON header with n and directed")),
    };
    if columns != ["src", "dst", "multiplicity"] {
        return Err(parse_err(0, format!("expected columns src,dst,multiplicity; got {}", columns.join(","))));
    }
    let mut edges = Vec::new();
    for (line, row) in &rows {
        let (x, y, k) = (field_u64(row, 0, *line)?, field_u64(row, 1, *line)?, field_u64(row, 2, *line)?);
        if x as usize >= header.n || y as usize >= header.n {
            return Err(parse_err(*line, format!("edge ({x}, {y}) out of range for n = {}", header.n)));
        }
        edges.extend(std::iter::repeat_n((x as u32, y as u32), k as usize));
    }
    let g = MultiDigraph::from_edges(header.n, header.directed, &edges)?;
    Ok((g, header))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::degrees::{sample_pareto_bidegrees, sample_pareto_degrees};
    use crate::graph::{build_cm, build_dcm};
    use proptest::prelude::*;

    #[test]
    fn degrees_without_header() {
        let text = "vertex,deg\n0,1\n1,3\n";
        let (seq, h) = read_degrees(text.as_bytes()).unwrap();
        assert!(h.is_none());
        assert_eq!(seq.deg(), &[1, 3]);
        assert!(read_degrees("vertex,deg\n0,1\n".as_bytes()).is_err());
        assert!(read_degrees("vertex,foo\n0,1\n".as_bytes()).is_err());
        assert!(read_degrees("vertex,deg\n1,2\n".as_bytes()).is_err());
    }

    #[test]
    fn graph_bad_rows() {
        let text =
            "{\"format\":\"voterlab-graph\",\"n\":2,\"directed\":true,\"seed\":null}\nsrc,dst,multiplicity\n0,5,1\n";
        assert!(matches!(read_graph(text.as_bytes()), Err(Error::Parse { line: 3, .. })));
        assert!(read_graph("src,dst,multiplicity\n0,1,1\n".as_bytes()).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn degree_and_graph_files_round_trip(seed in 0u64..1000, n in 1usize..60, directed: bool) {
            let spec = ParetoSpec::new(1.7, 2, n, seed).unwrap();
            let seq = if directed { sample_pareto_bidegrees(&spec) } else { sample_pareto_degrees(&spec) }.unwrap();
            let mut buf = Vec::new();
            write_degrees(&mut buf, &seq, Some(&spec)).unwrap();
            let (back, header) = read_degrees(buf.as_slice()).unwrap();
            prop_assert_eq!(&back, &seq);
            prop_assert!(header.is_some());

            let g = if directed { build_dcm(&seq, seed) } else { build_cm(&seq, seed) }.unwrap();
            let mut buf = Vec::new();
            write_graph(&mut buf, &g, Some(seed)).unwrap();
            let (h, hdr) = read_graph(buf.as_slice()).unwrap();
            prop_assert_eq!(h.edge_multiplicities(), g.edge_multiplicities());
            prop_assert_eq!(h.degree_sequence(), seq);
            prop_assert_eq!(hdr.seed, Some(seed));
        }
    }
}
