//! Batched training/evaluation sets and their on-disk layout.
//!
//! A dataset directory holds `manifest.json` plus raw little-endian float64
//! payloads in column-major order: `X.f64le` (N x T sources), `Y.f64le`
//! (N x T observations) and `H.f64le` (L x Q filter coefficients, one column
//! per batch). The manifest carries every parameter and seed needed to
//! regenerate the payloads bit for bit.

use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::datagen::graphs::{gen_graph, GraphSpec};
use crate::datagen::sampling::{sample_filter, sample_sources, synthesize, FilterModel, SourceModel};
use crate::error::{Error, Result};
use crate::io::{read_f64le, write_atomic, write_f64le};
use crate::rng::{child_seed, stream};
use crate::spectral::{build_shift, FilterSpec, SpectralGraph};

pub const FORMAT_VERSION: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.json";
pub const GRAPH_FILE: &str = "graph.edges";

/// Everything needed to (re)generate a dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetConfig {
    pub graph: GraphSpec,
    pub graph_seed: u64,
    pub theta: f64,
    pub filter_order: usize,
    pub phi: f64,
    pub n_total: usize,
    pub batch: usize,
    pub eta: f64,
    pub seed: u64,
}

impl DatasetConfig {
    /// One noiseless batch with an independent filter, for model selection.
    pub fn validation(&self) -> Self {
        Self {
            n_total: self.batch,
            eta: 0.0,
            seed: child_seed(self.seed, stream::VALIDATION, 0),
            ..self.clone()
        }
    }

    /// One batch with an independent filter and noise level `eta`.
    pub fn test(&self, eta: f64) -> Self {
        Self {
            n_total: self.batch,
            eta,
            seed: child_seed(self.seed, stream::TEST, 0),
            ..self.clone()
        }
    }

    pub fn n_batches(&self) -> Result<usize> {
        if self.batch == 0 || self.n_total == 0 || self.n_total % self.batch != 0 {
            return Err(Error::NotDivisible {
                total: self.n_total,
                batch: self.batch,
            });
        }
        Ok(self.n_total / self.batch)
    }

    pub fn source_seed(&self, batch: usize) -> u64 {
        child_seed(self.seed, stream::SOURCES, batch as u64)
    }

    pub fn filter_seed(&self, batch: usize) -> u64 {
        child_seed(self.seed, stream::FILTER, batch as u64)
    }

    pub fn noise_seed(&self, batch: usize) -> u64 {
        child_seed(self.seed, stream::NOISE, batch as u64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format_version: u32,
    pub n: usize,
    pub n_total: usize,
    pub batch: usize,
    pub n_batches: usize,
    pub theta: f64,
    pub filter_order: usize,
    pub phi: f64,
    pub eta: f64,
    pub graph: GraphSpec,
    pub graph_seed: u64,
    pub graph_file: String,
    pub seed: u64,
    /// Child-stream derivation used for per-batch draws.
    pub seed_streams: String,
    pub payloads: Payloads,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Payloads {
    pub x: PayloadShape,
    pub y: PayloadShape,
    pub h: PayloadShape,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PayloadShape {
    pub rows: usize,
    pub cols: usize,
}

impl Manifest {
    pub fn config(&self) -> DatasetConfig {
        DatasetConfig {
            graph: self.graph.clone(),
            graph_seed: self.graph_seed,
            theta: self.theta,
            filter_order: self.filter_order,
            phi: self.phi,
            n_total: self.n_total,
            batch: self.batch,
            eta: self.eta,
            seed: self.seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub manifest: Manifest,
    /// `N x T` sources; batch `q` is columns `q*P .. (q+1)*P`.
    pub x: DMatrix<f64>,
    pub y: DMatrix<f64>,
    /// `L x Q` filter coefficients.
    pub h: DMatrix<f64>,
}

impl Dataset {
    pub fn n_batches(&self) -> usize {
        self.manifest.n_batches
    }

    pub fn batch_size(&self) -> usize {
        self.manifest.batch
    }

    /// `(X_q, Y_q)` for batch `q`.
    pub fn batch(&self, q: usize) -> (DMatrix<f64>, DMatrix<f64>) {
        let p = self.manifest.batch;
        (
            self.x.columns(q * p, p).into_owned(),
            self.y.columns(q * p, p).into_owned(),
        )
    }

    pub fn filter(&self, q: usize) -> DVector<f64> {
        self.h.column(q).into_owned()
    }
}

/// Sample sources, one filter per batch, and the observations.
pub fn make_dataset(sg: &SpectralGraph, cfg: &DatasetConfig) -> Result<Dataset> {
    let q_count = cfg.n_batches()?;
    let n = sg.n_nodes();
    if cfg.filter_order == 0 || cfg.filter_order > n {
        return Err(Error::OrderOutOfRange {
            order: cfg.filter_order,
            max: n,
        });
    }
    let p = cfg.batch;
    let mut x = DMatrix::zeros(n, cfg.n_total);
    let mut y = DMatrix::zeros(n, cfg.n_total);
    let mut h = DMatrix::zeros(cfg.filter_order, q_count);
    for q in 0..q_count {
        let xq = sample_sources(
            &SourceModel {
                n_nodes: n,
                sparsity: cfg.theta,
                seed: cfg.source_seed(q),
            },
            p,
        )?;
        let hq = sample_filter(&FilterModel {
            order: cfg.filter_order,
            impulsiveness: cfg.phi,
            seed: cfg.filter_seed(q),
        })?;
        let syn = synthesize(sg, &FilterSpec::from_coeffs(hq.clone()), &xq, cfg.eta, cfg.noise_seed(q))?;
        if !syn.invertible {
            log::warn!("batch {q}: filter fails the invertibility check");
        }
        x.columns_mut(q * p, p).copy_from(&xq);
        y.columns_mut(q * p, p).copy_from(&syn.y);
        h.set_column(q, &hq);
    }
    let manifest = Manifest {
        format_version: FORMAT_VERSION,
        n,
        n_total: cfg.n_total,
        batch: p,
        n_batches: q_count,
        theta: cfg.theta,
        filter_order: cfg.filter_order,
        phi: cfg.phi,
        eta: cfg.eta,
        graph: cfg.graph.clone(),
        graph_seed: cfg.graph_seed,
        graph_file: GRAPH_FILE.to_string(),
        seed: cfg.seed,
        seed_streams: "xoshiro256++ seeded by splitmix64(seed, tag, batch); tags: sources=2 filter=3 noise=4"
            .to_string(),
        payloads: Payloads {
            x: PayloadShape { rows: n, cols: cfg.n_total },
            y: PayloadShape { rows: n, cols: cfg.n_total },
            h: PayloadShape {
                rows: cfg.filter_order,
                cols: q_count,
            },
        },
    };
    Ok(Dataset { manifest, x, y, h })
}

/// Regenerate graph and dataset from a configuration alone.
pub fn generate(cfg: &DatasetConfig) -> Result<(SpectralGraph, Dataset)> {
    let graph = gen_graph(&cfg.graph, cfg.graph_seed)?;
    let sg = build_shift(&graph)?;
    let ds = make_dataset(&sg, cfg)?;
    Ok((sg, ds))
}

pub fn save_dataset(ds: &Dataset, graph: Option<&crate::graph::Graph>, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_f64le(&dir.join("X.f64le"), ds.x.as_slice())?;
    write_f64le(&dir.join("Y.f64le"), ds.y.as_slice())?;
    write_f64le(&dir.join("H.f64le"), ds.h.as_slice())?;
    if let Some(g) = graph {
        write_atomic(&dir.join(GRAPH_FILE), g.to_edge_list().as_bytes())?;
    }
    let path = dir.join(MANIFEST_FILE);
    let json = serde_json::to_vec_pretty(&ds.manifest).map_err(|e| Error::json(&path, e))?;
    write_atomic(&path, &json)
}

pub fn load_manifest(dir: &Path) -> Result<Manifest> {
    let path = dir.join(MANIFEST_FILE);
    let text = fs::read(&path).map_err(|e| Error::io(&path, e))?;
    let value: serde_json::Value = serde_json::from_slice(&text).map_err(|e| Error::json(&path, e))?;
    let found = value
        .get("format_version")
        .and_then(|v| v.as_u64())
        .unwrap_or(0) as u32;
    if found != FORMAT_VERSION {
        return Err(Error::VersionMismatch {
            found,
            expected: FORMAT_VERSION,
        });
    }
    serde_json::from_value(value).map_err(|e| Error::json(&path, e))
}

pub fn load_dataset(dir: &Path) -> Result<Dataset> {
    let manifest = load_manifest(dir)?;
    let read = |name: &str, shape: PayloadShape| -> Result<DMatrix<f64>> {
        let data = read_f64le(&dir.join(name), shape.rows * shape.cols)?;
        Ok(DMatrix::from_vec(shape.rows, shape.cols, data))
    };
    let x = read("X.f64le", manifest.payloads.x)?;
    let y = read("Y.f64le", manifest.payloads.y)?;
    let h = read("H.f64le", manifest.payloads.h)?;
    Ok(Dataset { manifest, x, y, h })
}

/// Rebuild the graph a manifest refers to, preferring the stored edge list.
pub fn load_graph(dir: &Path, manifest: &Manifest) -> Result<crate::graph::Graph> {
    let stored: PathBuf = dir.join(&manifest.graph_file);
    if stored.exists() {
        let mut g = crate::graph::Graph::read_edge_list(&stored, Some(manifest.n))?;
        if g.name() != manifest.graph.label() {
            g = crate::graph::Graph::new(g.adjacency().clone(), manifest.graph.label())?;
        }
        return Ok(g);
    }
    gen_graph(&manifest.graph, manifest.graph_seed)
}
