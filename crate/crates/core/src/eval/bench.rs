//! Side-by-side evaluation of the ADMM solver and a trained network on
//! identical test realizations.

use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::metrics::{alignment_scale, relative_error_aligned, relative_error_signed, support_accuracy};
use crate::admm::{admm_solve, build_lifted, AdmmConfig};
use crate::datagen::{make_dataset, Dataset, DatasetConfig};
use crate::error::{Error, Result};
use crate::rng::{child_seed, stream};
use crate::slog::{infer, SlogModel};
use crate::spectral::{inverse_response, projector_norm, FilterSpec, SpectralGraph};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Admm,
    Slog,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Admm => "admm",
            Method::Slog => "slog",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub method: Method,
    pub re_x: f64,
    /// Relative error of the inverse response after least-squares scale alignment.
    pub re_g: f64,
    /// ADMM only: error against `c g0 / (1^T g0)` with no alignment.
    pub re_g_unaligned: Option<f64>,
    pub acc: f64,
    pub kappa: f64,
    /// Wall clock from observations in memory to estimates.
    pub timing_seconds: f64,
    pub iters: usize,
    /// `||P1perp g0||` of the ground-truth inverse response.
    pub conditioning: f64,
    pub metadata: serde_json::Value,
}

/// One test realization with its ground truth.
#[derive(Debug, Clone)]
pub struct TestInstance {
    pub x: DMatrix<f64>,
    pub y: DMatrix<f64>,
    pub h: DVector<f64>,
    /// `1 / h_tilde`.
    pub g0: DVector<f64>,
    pub seed: u64,
    pub eta: f64,
}

/// Realization `trial` of the test distribution at noise level `eta`. For a
/// fixed trial, sources, filter and noise pattern are shared across `eta`.
pub fn test_instance(sg: &SpectralGraph, base: &DatasetConfig, eta: f64, trial: usize) -> Result<TestInstance> {
    let test = base.test(eta);
    let seed = child_seed(test.seed, stream::TRIAL, trial as u64);
    let cfg = DatasetConfig {
        n_total: base.batch,
        seed,
        ..test
    };
    let ds = make_dataset(sg, &cfg)?;
    TestInstance::from_batch(sg, &ds, 0, seed)
}

impl TestInstance {
    /// Batch `q` of a stored dataset as an evaluation instance.
    pub fn from_batch(sg: &SpectralGraph, ds: &Dataset, q: usize, seed: u64) -> Result<Self> {
        if q >= ds.n_batches() {
            return Err(Error::InvalidParams(format!(
                "batch {q} out of range for {} batches",
                ds.n_batches()
            )));
        }
        let (x, y) = ds.batch(q);
        let h = ds.filter(q);
        let g0 = inverse_response(&FilterSpec::from_coeffs(h.clone()).response(sg)?)?;
        Ok(Self {
            x,
            y,
            h,
            g0,
            seed,
            eta: ds.manifest.eta,
        })
    }
}

/// Source and inverse-response estimates behind an [`EvalReport`].
#[derive(Debug, Clone, PartialEq)]
pub struct Estimate {
    pub x_hat: DMatrix<f64>,
    pub g_hat: DVector<f64>,
}

pub fn evaluate_admm(sg: &SpectralGraph, inst: &TestInstance, cfg: &AdmmConfig, kappa: f64) -> Result<EvalReport> {
    Ok(admm_estimate(sg, inst, cfg, kappa)?.0)
}

/// [`evaluate_admm`] that also returns the rescaled sources and raw `g_hat`.
pub fn admm_estimate(
    sg: &SpectralGraph,
    inst: &TestInstance,
    cfg: &AdmmConfig,
    kappa: f64,
) -> Result<(EvalReport, Estimate)> {
    let start = Instant::now();
    let op = build_lifted(sg.eigvecs(), &inst.y)?;
    let (state, _) = admm_solve(&op, cfg)?;
    let seconds = start.elapsed().as_secs_f64();

    // The solver fixes 1^T g = c, so its sources carry the scale c / (1^T g0).
    // Undo it with the same least-squares factor that aligns g.
    let scale = alignment_scale(&state.g_tilde, &inst.g0)?;
    let x_hat = &state.x * scale;
    let target = &inst.g0 * (cfg.scale_c / inst.g0.sum());
    let report = EvalReport {
        method: Method::Admm,
        re_x: relative_error_signed(&x_hat, &inst.x)?,
        re_g: relative_error_aligned(&state.g_tilde, &inst.g0)?,
        re_g_unaligned: Some((&state.g_tilde - &target).norm() / target.norm()),
        acc: support_accuracy(&x_hat, &inst.x, kappa)?,
        kappa,
        timing_seconds: seconds,
        iters: state.iter,
        conditioning: projector_norm(&inst.g0),
        metadata: serde_json::json!({
            "seed": inst.seed,
            "eta": inst.eta,
            "converged": state.converged,
            "admm": cfg,
        }),
    };
    Ok((report, Estimate { x_hat, g_hat: state.g_tilde }))
}

pub fn evaluate_slog(
    model: &SlogModel,
    sg: &SpectralGraph,
    inst: &TestInstance,
    init_seed: u64,
    kappa: f64,
) -> Result<EvalReport> {
    Ok(slog_estimate(model, sg, inst, init_seed, kappa)?.0)
}

pub fn slog_estimate(
    model: &SlogModel,
    sg: &SpectralGraph,
    inst: &TestInstance,
    init_seed: u64,
    kappa: f64,
) -> Result<(EvalReport, Estimate)> {
    let (x_hat, g_hat, seconds) = infer(model, sg.eigvecs(), &inst.y, init_seed)?;
    let report = EvalReport {
        method: Method::Slog,
        re_x: relative_error_signed(&x_hat, &inst.x)?,
        re_g: relative_error_aligned(&g_hat, &inst.g0)?,
        re_g_unaligned: None,
        acc: support_accuracy(&x_hat, &inst.x, kappa)?,
        kappa,
        timing_seconds: seconds,
        iters: model.n_layers(),
        conditioning: projector_norm(&inst.g0),
        metadata: serde_json::json!({
            "seed": inst.seed,
            "eta": inst.eta,
            "init_seed": init_seed,
            "layers": model.n_layers(),
        }),
    };
    Ok((report, Estimate { x_hat, g_hat }))
}

/// One CSV row of a benchmark run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub struct BenchRow {
    pub method: Method,
    pub graph: String,
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "P")]
    pub p: usize,
    pub theta: f64,
    #[serde(rename = "L")]
    pub l: usize,
    pub phi: f64,
    pub eta: f64,
    pub seed: u64,
    pub re_x: f64,
    pub re_g: f64,
    pub acc: f64,
    pub kappa: f64,
    pub seconds: f64,
    pub iters: usize,
}

impl BenchRow {
    fn new(base: &DatasetConfig, n: usize, report: &EvalReport, seed: u64, eta: f64) -> Self {
        Self {
            method: report.method,
            graph: base.graph.label().to_string(),
            n,
            p: base.batch,
            theta: base.theta,
            l: base.filter_order,
            phi: base.phi,
            eta,
            seed,
            re_x: report.re_x,
            re_g: report.re_g,
            acc: report.acc,
            kappa: report.kappa,
            seconds: report.timing_seconds,
            iters: report.iters,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchConfig {
    pub etas: Vec<f64>,
    pub trials: usize,
    pub kappa: f64,
    pub admm: AdmmConfig,
    /// Worker threads for realizations; timings are only comparable at 1.
    pub jobs: usize,
    pub seed: u64,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            etas: vec![0.0],
            trials: 10,
            kappa: super::metrics::DEFAULT_KAPPA,
            admm: AdmmConfig::default(),
            jobs: 1,
            seed: 0,
        }
    }
}

/// Run both methods (or ADMM alone when `model` is `None`) on `trials`
/// realizations per noise level. Rows are ordered by eta, trial, method.
pub fn bench_compare(
    sg: &SpectralGraph,
    base: &DatasetConfig,
    model: Option<&SlogModel>,
    cfg: &BenchConfig,
) -> Result<(Vec<BenchRow>, Vec<(EvalReport, EvalReport)>)> {
    if cfg.trials == 0 || cfg.etas.is_empty() {
        return Err(Error::InvalidParams("need at least one trial and one noise level".into()));
    }
    if let Some(m) = model {
        if m.n_nodes() != sg.n_nodes() {
            return Err(Error::DimensionMismatch(format!(
                "model has {} nodes, graph has {}",
                m.n_nodes(),
                sg.n_nodes()
            )));
        }
    }
    let points: Vec<(f64, usize)> = cfg
        .etas
        .iter()
        .flat_map(|&eta| (0..cfg.trials).map(move |t| (eta, t)))
        .collect();
    let run_one = |&(eta, trial): &(f64, usize)| -> Result<(Vec<BenchRow>, Option<(EvalReport, EvalReport)>)> {
        let inst = test_instance(sg, base, eta, trial)?;
        let admm = evaluate_admm(sg, &inst, &cfg.admm, cfg.kappa)?;
        let mut rows = vec![BenchRow::new(base, sg.n_nodes(), &admm, inst.seed, eta)];
        let pair = match model {
            Some(m) => {
                let init = child_seed(cfg.seed, stream::INIT_STATES, trial as u64);
                let slog = evaluate_slog(m, sg, &inst, init, cfg.kappa)?;
                rows.push(BenchRow::new(base, sg.n_nodes(), &slog, inst.seed, eta));
                Some((admm, slog))
            }
            None => None,
        };
        Ok((rows, pair))
    };
    let results: Vec<_> = if cfg.jobs > 1 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.jobs)
            .build()
            .map_err(|e| Error::InvalidParams(format!("thread pool: {e}")))?;
        pool.install(|| points.par_iter().map(run_one).collect::<Result<Vec<_>>>())?
    } else {
        points.iter().map(run_one).collect::<Result<Vec<_>>>()?
    };
    let mut rows = Vec::new();
    let mut pairs = Vec::new();
    for (r, p) in results {
        rows.extend(r);
        pairs.extend(p);
    }
    Ok((rows, pairs))
}
