//! Undirected weighted graphs stored as dense adjacency matrices.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

pub const SYMMETRY_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    adjacency: DMatrix<f64>,
    name: String,
}

impl Graph {
    /// Validates symmetry, a zero diagonal and nonnegative weights.
    pub fn new(adjacency: DMatrix<f64>, name: impl Into<String>) -> Result<Self> {
        let n = adjacency.nrows();
        if n == 0 || adjacency.ncols() != n {
            return Err(Error::DimensionMismatch(format!(
                "adjacency must be square and non-empty, got {}x{}",
                adjacency.nrows(),
                adjacency.ncols()
            )));
        }
        for i in 0..n {
            if adjacency[(i, i)] != 0.0 {
                return Err(Error::InvalidAdjacency {
                    row: i,
                    col: i,
                    reason: "nonzero diagonal",
                });
            }
            for j in 0..n {
                let a = adjacency[(i, j)];
                if !a.is_finite() || a < 0.0 {
                    return Err(Error::InvalidAdjacency {
                        row: i,
                        col: j,
                        reason: "negative or non-finite weight",
                    });
                }
                let gap = (a - adjacency[(j, i)]).abs();
                if gap > SYMMETRY_TOL {
                    return Err(Error::Asymmetric { row: i, col: j, gap });
                }
            }
        }
        Ok(Self {
            adjacency,
            name: name.into(),
        })
    }

    pub fn from_edges(n: usize, edges: &[(usize, usize, f64)], name: impl Into<String>) -> Result<Self> {
        let mut a = DMatrix::zeros(n, n);
        for (line, &(u, v, w)) in edges.iter().enumerate() {
            if u >= n || v >= n {
                return Err(Error::EdgeList {
                    line: line + 1,
                    reason: format!("node index out of range for n = {n}"),
                });
            }
            a[(u, v)] = w;
            a[(v, u)] = w;
        }
        Self::new(a, name)
    }

    pub fn n_nodes(&self) -> usize {
        self.adjacency.nrows()
    }

    pub fn adjacency(&self) -> &DMatrix<f64> {
        &self.adjacency
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn degrees(&self) -> Vec<f64> {
        self.adjacency.row_iter().map(|r| r.sum()).collect()
    }

    /// Edges `(u, v, w)` with `u < v`.
    pub fn edges(&self) -> Vec<(usize, usize, f64)> {
        let n = self.n_nodes();
        let mut out = Vec::new();
        for u in 0..n {
            for v in (u + 1)..n {
                let w = self.adjacency[(u, v)];
                if w != 0.0 {
                    out.push((u, v, w));
                }
            }
        }
        out
    }

    pub fn is_connected(&self) -> bool {
        let n = self.n_nodes();
        let mut seen = vec![false; n];
        let mut stack = vec![0];
        seen[0] = true;
        let mut count = 1;
        while let Some(u) = stack.pop() {
            for v in 0..n {
                if !seen[v] && self.adjacency[(u, v)] > 0.0 {
                    seen[v] = true;
                    count += 1;
                    stack.push(v);
                }
            }
        }
        count == n
    }

    /// Parse the `u v [w]` edge-list format. The node count is one more than
    /// the largest index seen unless `n_nodes` is given.
    pub fn parse_edge_list(text: &str, n_nodes: Option<usize>, name: impl Into<String>) -> Result<Self> {
        let mut edges = Vec::new();
        let mut seen = HashSet::new();
        let mut max_node = 0usize;
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let trimmed = raw.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = trimmed.split_whitespace().collect();
            if !(2..=3).contains(&fields.len()) {
                return Err(Error::EdgeList {
                    line,
                    reason: format!("expected `u v [w]`, got {} fields", fields.len()),
                });
            }
            let parse_node = |s: &str| {
                s.parse::<usize>().map_err(|e| Error::EdgeList {
                    line,
                    reason: format!("bad node index {s:?}: {e}"),
                })
            };
            let u = parse_node(fields[0])?;
            let v = parse_node(fields[1])?;
            let w = match fields.get(2) {
                Some(s) => s.parse::<f64>().map_err(|e| Error::EdgeList {
                    line,
                    reason: format!("bad weight {s:?}: {e}"),
                })?,
                None => 1.0,
            };
            if u == v {
                return Err(Error::EdgeList {
                    line,
                    reason: "self loop".into(),
                });
            }
            if !seen.insert((u.min(v), u.max(v))) {
                return Err(Error::EdgeList {
                    line,
                    reason: format!("duplicate edge {u} {v}"),
                });
            }
            max_node = max_node.max(u).max(v);
            edges.push((u, v, w));
        }
        let n = n_nodes.unwrap_or(if edges.is_empty() { 0 } else { max_node + 1 });
        Self::from_edges(n, &edges, name)
    }

    pub fn read_edge_list(path: &Path, n_nodes: Option<usize>) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let name = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        Self::parse_edge_list(&text, n_nodes, name)
    }

    pub fn to_edge_list(&self) -> String {
        let mut out = format!("# {} nodes={}\n", self.name, self.n_nodes());
        for (u, v, w) in self.edges() {
            if w == 1.0 {
                let _ = writeln!(out, "{u} {v}");
            } else {
                let _ = writeln!(out, "{u} {v} {w:?}");
            }
        }
        out
    }

    /// Zachary's karate club (34 nodes, 78 edges).
    pub fn karate_club() -> Self {
        let edges: Vec<(usize, usize, f64)> = KARATE_EDGES
            .iter()
            .map(|&(u, v)| (u - 1, v - 1, 1.0))
            .collect();
        Self::from_edges(34, &edges, "karate").expect("static edge list is valid")
    }
}

// 1-based, as in Zachary's original listing.
const KARATE_EDGES: [(usize, usize); 78] = [
    (1, 2), (1, 3), (1, 4), (1, 5), (1, 6), (1, 7), (1, 8), (1, 9), (1, 11), (1, 12),
    (1, 13), (1, 14), (1, 18), (1, 20), (1, 22), (1, 32), (2, 3), (2, 4), (2, 8), (2, 14),
    (2, 18), (2, 20), (2, 22), (2, 31), (3, 4), (3, 8), (3, 9), (3, 10), (3, 14), (3, 28),
    (3, 29), (3, 33), (4, 8), (4, 13), (4, 14), (5, 7), (5, 11), (6, 7), (6, 11), (6, 17),
    (7, 17), (9, 31), (9, 33), (9, 34), (10, 34), (14, 34), (15, 33), (15, 34), (16, 33),
    (16, 34), (19, 33), (19, 34), (20, 34), (21, 33), (21, 34), (23, 33), (23, 34), (24, 26),
    (24, 28), (24, 30), (24, 33), (24, 34), (25, 26), (25, 28), (25, 32), (26, 32), (27, 30),
    (27, 34), (28, 34), (29, 32), (29, 34), (30, 33), (30, 34), (31, 33), (31, 34), (32, 33),
    (32, 34), (33, 34),
];
