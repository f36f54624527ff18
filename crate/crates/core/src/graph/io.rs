//! Plain-text edge lists: a header line `n <count>`, then one `i j` pair per
//! line (0-indexed, whitespace separated). Self-loop flags are never stored.

use super::Graph;
use crate::error::{Error, Result};
use std::fmt::Write as _;
use std::path::Path;

pub fn parse_edge_list(text: &str) -> Result<Graph> {
    let mut n = None;
    let mut edges = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        let parse = |s: &str| {
            s.parse::<usize>()
                .map_err(|_| Error::Parse { line: line_no, msg: format!("expected a vertex id, found `{s}`") })
        };
        match n {
            None => {
                if fields.len() != 2 || fields[0] != "n" {
                    return Err(Error::Parse { line: line_no, msg: "first line must be `n <count>`".into() });
                }
                n = Some(parse(fields[1])?);
            }
            Some(_) => {
                if fields.len() != 2 {
                    return Err(Error::Parse { line: line_no, msg: "expected `i j`".into() });
                }
                edges.push((parse(fields[0])?, parse(fields[1])?));
            }
        }
    }
    let n = n.ok_or(Error::Parse { line: 0, msg: "missing `n <count>` header".into() })?;
    Graph::from_edges(n, &edges)
}

pub fn read_edge_list(path: impl AsRef<Path>) -> Result<Graph> {
    parse_edge_list(&std::fs::read_to_string(path)?)
}

/// Serializes the non-loop edges; the output parses back to the loop-free graph.
pub fn write_edge_list(g: &Graph) -> String {
    let mut out = format!("n {}\n", g.n());
    for (i, j) in g.edges() {
        writeln!(out, "{i} {j}").unwrap();
    }
    out
}
