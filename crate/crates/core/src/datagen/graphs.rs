//! Random graph ensembles: Erdos-Renyi, stochastic block model,
//! Barabasi-Albert and random geometric graphs.

use std::path::PathBuf;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::rng::{child_rng, stream, SeededRng};

pub const MAX_CONNECT_ATTEMPTS: usize = 100;

/// Descriptor from which a graph can be regenerated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GraphSpec {
    Er { n: usize, p: f64 },
    Sbm { n: usize, communities: usize, p_within: f64, p_between: f64 },
    Ba { n: usize, m: usize },
    Rg { n: usize, radius: f64 },
    Karate,
    EdgeList { path: PathBuf },
}

impl GraphSpec {
    pub fn label(&self) -> &'static str {
        match self {
            GraphSpec::Er { .. } => "er",
            GraphSpec::Sbm { .. } => "sbm",
            GraphSpec::Ba { .. } => "ba",
            GraphSpec::Rg { .. } => "rg",
            GraphSpec::Karate => "karate",
            GraphSpec::EdgeList { .. } => "edge_list",
        }
    }

    fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParams(msg));
        match *self {
            GraphSpec::Er { n, p } => {
                if n < 2 || !(p > 0.0 && p <= 1.0) {
                    return bad(format!("er needs n >= 2 and p in (0, 1], got n={n}, p={p}"));
                }
            }
            GraphSpec::Sbm {
                n,
                communities,
                p_within,
                p_between,
            } => {
                if n < 2 || communities == 0 || communities > n {
                    return bad(format!("sbm needs 1 <= communities <= n, got {communities} for n={n}"));
                }
                for p in [p_within, p_between] {
                    if !(0.0..=1.0).contains(&p) {
                        return bad(format!("sbm probability {p} outside [0, 1]"));
                    }
                }
            }
            GraphSpec::Ba { n, m } => {
                if m == 0 || m >= n {
                    return bad(format!("ba needs 1 <= m < n, got m={m}, n={n}"));
                }
            }
            GraphSpec::Rg { n, radius } => {
                if n < 2 || !(radius > 0.0) {
                    return bad(format!("rg needs n >= 2 and radius > 0, got n={n}, r={radius}"));
                }
            }
            GraphSpec::Karate | GraphSpec::EdgeList { .. } => {}
        }
        Ok(())
    }

    /// Block of each node for SBM graphs: node `i` belongs to block `i * C / N`.
    pub fn communities(&self) -> Option<Vec<usize>> {
        match *self {
            GraphSpec::Sbm { n, communities, .. } => Some(block_assignment(n, communities)),
            _ => None,
        }
    }
}

pub fn block_assignment(n: usize, communities: usize) -> Vec<usize> {
    (0..n).map(|i| i * communities / n).collect()
}

/// Generate a connected graph. Random ensembles are rejection-resampled from
/// child streams of `seed` until connected.
pub fn gen_graph(spec: &GraphSpec, seed: u64) -> Result<Graph> {
    spec.validate()?;
    match spec {
        GraphSpec::Karate => return Ok(Graph::karate_club()),
        GraphSpec::EdgeList { path } => return Graph::read_edge_list(path, None),
        _ => {}
    }
    for attempt in 0..MAX_CONNECT_ATTEMPTS {
        let mut rng = child_rng(seed, stream::GRAPH, attempt as u64);
        let edges = match *spec {
            GraphSpec::Er { n, p } => er_edges(n, p, &mut rng),
            GraphSpec::Sbm {
                n,
                communities,
                p_within,
                p_between,
            } => sbm_edges(n, communities, p_within, p_between, &mut rng),
            GraphSpec::Ba { n, m } => ba_edges(n, m, &mut rng),
            GraphSpec::Rg { n, radius } => rg_edges(n, radius, &mut rng),
            GraphSpec::Karate | GraphSpec::EdgeList { .. } => unreachable!(),
        };
        let n = match *spec {
            GraphSpec::Er { n, .. }
            | GraphSpec::Sbm { n, .. }
            | GraphSpec::Ba { n, .. }
            | GraphSpec::Rg { n, .. } => n,
            _ => unreachable!(),
        };
        let graph = Graph::from_edges(n, &edges, spec.label())?;
        if graph.is_connected() {
            return Ok(graph);
        }
    }
    Err(Error::Disconnected {
        attempts: MAX_CONNECT_ATTEMPTS,
    })
}

type Edges = Vec<(usize, usize, f64)>;

fn er_edges(n: usize, p: f64, rng: &mut SeededRng) -> Edges {
    let mut edges = Vec::new();
    for u in 0..n {
        for v in (u + 1)..n {
            if rng.random::<f64>() < p {
                edges.push((u, v, 1.0));
            }
        }
    }
    edges
}

fn sbm_edges(n: usize, c: usize, p_within: f64, p_between: f64, rng: &mut SeededRng) -> Edges {
    let block = block_assignment(n, c);
    let mut edges = Vec::new();
    for u in 0..n {
        for v in (u + 1)..n {
            let p = if block[u] == block[v] { p_within } else { p_between };
            if rng.random::<f64>() < p {
                edges.push((u, v, 1.0));
            }
        }
    }
    edges
}

/// Preferential attachment: node `m` links to the `m` seed nodes, later nodes
/// pick `m` distinct targets with probability proportional to degree.
fn ba_edges(n: usize, m: usize, rng: &mut SeededRng) -> Edges {
    let mut edges = Vec::new();
    let mut repeated: Vec<usize> = Vec::new();
    let mut targets: Vec<usize> = (0..m).collect();
    for source in m..n {
        for &t in &targets {
            edges.push((t, source, 1.0));
            repeated.push(t);
            repeated.push(source);
        }
        let mut next = Vec::with_capacity(m);
        while next.len() < m {
            let candidate = repeated[rng.random_range(0..repeated.len())];
            if !next.contains(&candidate) {
                next.push(candidate);
            }
        }
        targets = next;
    }
    edges
}

fn rg_edges(n: usize, radius: f64, rng: &mut SeededRng) -> Edges {
    let points: Vec<(f64, f64)> = (0..n).map(|_| (rng.random(), rng.random())).collect();
    let mut edges = Vec::new();
    for u in 0..n {
        for v in (u + 1)..n {
            let (dx, dy) = (points[u].0 - points[v].0, points[u].1 - points[v].1);
            if (dx * dx + dy * dy).sqrt() <= radius {
                edges.push((u, v, 1.0));
            }
        }
    }
    edges
}
