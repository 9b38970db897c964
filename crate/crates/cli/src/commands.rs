use std::fs;
use std::path::{Path, PathBuf};

use clap::Args;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use slog_core::admm::AdmmConfig;
use slog_core::datagen::{gen_graph, load_dataset, load_graph, load_manifest, make_dataset, save_dataset, DatasetConfig, GraphSpec};
use slog_core::eval::{
    admm_estimate, bench_compare, read_csv, slog_estimate, summarize, write_csv, BenchConfig, TestInstance,
    DEFAULT_KAPPA,
};
use slog_core::io::write_atomic;
use slog_core::rng::{child_seed, stream};
use slog_core::slog::{init_model, load_checkpoint, save_checkpoint, train, TrainConfig};
use slog_core::{build_shift, Error, SpectralGraph};

use crate::config::{require, usage, CliResult};

/// Settings shared by every subcommand after merging flags, file and defaults.
#[derive(Debug, Clone, Serialize)]
pub struct Globals {
    pub seed: u64,
    pub jobs: usize,
    pub config_file: Option<PathBuf>,
}

fn resolved<T: Serialize>(command: &str, globals: &Globals, args: &T) -> Value {
    json!({
        "command": command,
        "version": env!("CARGO_PKG_VERSION"),
        "seed": globals.seed,
        "jobs": globals.jobs,
        "config_file": globals.config_file,
        "args": args,
    })
}

fn write_json(path: &Path, value: &Value) -> CliResult<()> {
    let mut bytes = serde_json::to_vec_pretty(value).map_err(|e| Error::json(path, e))?;
    bytes.push(b'\n');
    Ok(write_atomic(path, &bytes)?)
}

fn spectral_graph(dir: &Path) -> CliResult<(SpectralGraph, slog_core::datagen::Manifest)> {
    let manifest = load_manifest(dir)?;
    let graph = load_graph(dir, &manifest)?;
    Ok((build_shift(&graph)?, manifest))
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct GenDataArgs {
    /// Graph ensemble: er, sbm, ba, rg, karate or edge-list
    #[arg(long, default_value = "er")]
    pub graph: String,
    /// Number of nodes (ignored for karate and edge-list)
    #[arg(long, default_value_t = 20)]
    pub n: usize,
    /// Edge probability of er graphs
    #[arg(long, default_value_t = 0.3)]
    pub p_edge: f64,
    #[arg(long, default_value_t = 3)]
    pub communities: usize,
    #[arg(long, default_value_t = 0.8)]
    pub p_within: f64,
    #[arg(long, default_value_t = 0.2)]
    pub p_between: f64,
    /// Edges per new node of ba graphs
    #[arg(long, default_value_t = 2)]
    pub ba_m: usize,
    /// Connection radius of rg graphs
    #[arg(long, default_value_t = 0.4)]
    pub radius: f64,
    /// Whitespace-separated `i j [w]` lines, for --graph edge-list
    #[arg(long)]
    pub edge_file: Option<PathBuf>,
    /// Seed of the graph draw [default: --seed]
    #[arg(long)]
    pub graph_seed: Option<u64>,
    /// Bernoulli activation probability of the sources
    #[arg(long, default_value_t = 0.15)]
    pub theta: f64,
    /// Number of filter taps L
    #[arg(long, default_value_t = 5)]
    pub filter_order: usize,
    /// Decay of the filter coefficients
    #[arg(long, default_value_t = 1.0)]
    pub phi: f64,
    /// Training signals |T|
    #[arg(long, default_value_t = 200_000)]
    pub ntrain: usize,
    /// Signals per batch P
    #[arg(long, default_value_t = 400)]
    pub batch: usize,
    /// Observation noise of the training split
    #[arg(long, default_value_t = 0.0)]
    pub eta: f64,
    /// Observation noise of the test split [default: --eta]
    #[arg(long)]
    pub test_eta: Option<f64>,
    /// Output directory; validation and test splits go to OUT/val and OUT/test
    #[arg(long)]
    pub out: Option<PathBuf>,
}

impl GenDataArgs {
    fn graph_spec(&self) -> CliResult<GraphSpec> {
        let n = self.n;
        Ok(match self.graph.as_str() {
            "er" => GraphSpec::Er { n, p: self.p_edge },
            "sbm" => GraphSpec::Sbm {
                n,
                communities: self.communities,
                p_within: self.p_within,
                p_between: self.p_between,
            },
            "ba" => GraphSpec::Ba { n, m: self.ba_m },
            "rg" => GraphSpec::Rg { n, radius: self.radius },
            "karate" => GraphSpec::Karate,
            "edge-list" | "edge_list" => GraphSpec::EdgeList {
                path: require(self.edge_file.clone(), "edge-file")?,
            },
            other => return Err(usage(format!("unknown graph `{other}` (er, sbm, ba, rg, karate, edge-list)"))),
        })
    }
}

pub fn gen_data(mut args: GenDataArgs, globals: &Globals) -> CliResult<()> {
    let out = require(args.out.clone(), "out")?;
    args.graph_seed = Some(args.graph_seed.unwrap_or(globals.seed));
    args.test_eta = Some(args.test_eta.unwrap_or(args.eta));
    let cfg = DatasetConfig {
        graph: args.graph_spec()?,
        graph_seed: args.graph_seed.unwrap_or_default(),
        theta: args.theta,
        filter_order: args.filter_order,
        phi: args.phi,
        n_total: args.ntrain,
        batch: args.batch,
        eta: args.eta,
        seed: globals.seed,
    };
    let graph = gen_graph(&cfg.graph, cfg.graph_seed)?;
    let sg = build_shift(&graph)?;
    let splits = [
        (out.clone(), cfg.clone()),
        (out.join("val"), cfg.validation()),
        (out.join("test"), cfg.test(args.test_eta.unwrap_or_default())),
    ];
    for (dir, split) in &splits {
        let ds = make_dataset(&sg, split)?;
        save_dataset(&ds, Some(&graph), dir)?;
        log::info!(
            "wrote {} batches of {} signals to {}",
            ds.n_batches(),
            ds.batch_size(),
            dir.display()
        );
    }
    write_json(&out.join("config.json"), &resolved("gen-data", globals, &args))
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct SolveAdmmArgs {
    /// Dataset directory
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Batch of the dataset to solve
    #[arg(long, default_value_t = 0)]
    pub batch_index: usize,
    #[arg(long, default_value_t = 1.0)]
    pub rho_lambda: f64,
    #[arg(long, default_value_t = 1.0)]
    pub rho_mu: f64,
    /// Value of the normalization 1^T g = c
    #[arg(long, default_value_t = 1.0)]
    pub c: f64,
    /// Primal and dual residual tolerance
    #[arg(long, default_value_t = 1e-6)]
    pub tol: f64,
    #[arg(long, default_value_t = 5000)]
    pub max_iters: usize,
    /// Support threshold of the accuracy metric
    #[arg(long, default_value_t = DEFAULT_KAPPA)]
    pub kappa: f64,
    /// Report file
    #[arg(long)]
    pub out: Option<PathBuf>,
}

impl SolveAdmmArgs {
    fn admm(&self) -> AdmmConfig {
        AdmmConfig {
            rho_lambda: self.rho_lambda,
            rho_mu: self.rho_mu,
            scale_c: self.c,
            max_iters: self.max_iters,
            tol_primal: self.tol,
            tol_dual: self.tol,
        }
    }
}

pub fn solve_admm(args: SolveAdmmArgs, globals: &Globals) -> CliResult<()> {
    let data = require(args.data.clone(), "data")?;
    let out = require(args.out.clone(), "out")?;
    let cfg = args.admm();
    cfg.validate()?;
    let (sg, _) = spectral_graph(&data)?;
    let ds = load_dataset(&data)?;
    let q = args.batch_index;
    let inst = TestInstance::from_batch(&sg, &ds, q, ds.manifest.config().source_seed(q))?;
    let (report, est) = admm_estimate(&sg, &inst, &cfg, args.kappa)?;
    log::info!(
        "batch {q}: {} iterations in {:.3} s, RE(X) {:.4e}, RE(g) {:.4e}, ACC {:.4}",
        report.iters,
        report.timing_seconds,
        report.re_x,
        report.re_g,
        report.acc
    );
    write_json(
        &out,
        &json!({
            "config": resolved("solve-admm", globals, &args),
            "dataset": ds.manifest,
            "batch": q,
            "iterations": report.iters,
            "seconds": report.timing_seconds,
            "g_hat": est.g_hat.as_slice(),
            "g0": inst.g0.as_slice(),
            "metrics": report,
        }),
    )
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct TrainArgs {
    /// Training dataset directory
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Validation dataset [default: DATA/val]
    #[arg(long)]
    pub val: Option<PathBuf>,
    /// Unrolled layers K
    #[arg(long, default_value_t = 5)]
    pub layers: usize,
    /// Rows of the learned constraint
    #[arg(long, default_value_t = 2)]
    pub d: usize,
    #[arg(long, default_value_t = 30)]
    pub epochs: usize,
    #[arg(long, default_value_t = 1e-3)]
    pub lr: f64,
    /// Validate every this many batches
    #[arg(long, default_value_t = 20)]
    pub val_every: usize,
    /// Checkpoint directory
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn train_cmd(mut args: TrainArgs, globals: &Globals) -> CliResult<()> {
    let data = require(args.data.clone(), "data")?;
    let out = require(args.out.clone(), "out")?;
    let val_dir = args.val.clone().unwrap_or_else(|| data.join("val"));
    args.val = Some(val_dir.clone());
    let (sg, _) = spectral_graph(&data)?;
    let train_set = load_dataset(&data)?;
    let val_set = load_dataset(&val_dir)?;
    let model = init_model(sg.n_nodes(), args.d, args.layers, globals.seed)?;
    let cfg = TrainConfig {
        epochs: args.epochs,
        learning_rate: args.lr,
        val_every_batches: args.val_every,
        seed: globals.seed,
        checkpoint_dir: Some(out.clone()),
        context: json!({
            "config": resolved("train", globals, &args),
            "data": train_set.manifest,
            "validation": val_set.manifest,
        }),
        ..Default::default()
    };
    log::info!(
        "training {} parameters on {} batches for {} epochs",
        model.n_params(),
        train_set.n_batches(),
        cfg.epochs
    );
    let (best, log) = train(&model, &sg, &train_set, &val_set, &cfg)?;
    save_checkpoint(&best, &out, &json!({ "train": cfg, "context": cfg.context }))?;
    log::info!(
        "best validation loss {:.4e} at step {} ({:.1} s)",
        log.best_validation_loss,
        log.best_step,
        log.seconds
    );
    Ok(())
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct InferArgs {
    /// Checkpoint directory
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Dataset directory; every batch is evaluated
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_KAPPA)]
    pub kappa: f64,
    /// Report file; timings go to a `.timing.json` sibling
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn timing_path(out: &Path) -> PathBuf {
    let stem = out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    out.with_file_name(format!("{stem}.timing.json"))
}

pub fn infer_cmd(args: InferArgs, globals: &Globals) -> CliResult<()> {
    let model_dir = require(args.model.clone(), "model")?;
    let data = require(args.data.clone(), "data")?;
    let out = require(args.out.clone(), "out")?;
    let (model, header) = load_checkpoint(&model_dir)?;
    let (sg, _) = spectral_graph(&data)?;
    let ds = load_dataset(&data)?;
    let mut batches = Vec::new();
    let mut seconds = Vec::new();
    let (mut re_x, mut re_g, mut acc) = (0.0, 0.0, 0.0);
    for q in 0..ds.n_batches() {
        let inst = TestInstance::from_batch(&sg, &ds, q, ds.manifest.config().source_seed(q))?;
        let init_seed = child_seed(globals.seed, stream::INIT_STATES, q as u64);
        let (report, est) = slog_estimate(&model, &sg, &inst, init_seed, args.kappa)?;
        re_x += report.re_x;
        re_g += report.re_g;
        acc += report.acc;
        seconds.push(report.timing_seconds);
        batches.push(json!({
            "batch": q,
            "init_seed": init_seed,
            "re_x": report.re_x,
            "re_g": report.re_g,
            "acc": report.acc,
            "conditioning": report.conditioning,
            "g_hat": est.g_hat.as_slice(),
        }));
    }
    let count = ds.n_batches() as f64;
    let (re_x, re_g, acc) = (re_x / count, re_g / count, acc / count);
    log::info!("{} batches: RE(X) {re_x:.4e}, RE(g) {re_g:.4e}, ACC {acc:.4}", ds.n_batches());
    write_json(
        &out,
        &json!({
            "config": resolved("infer", globals, &args),
            "model": header,
            "dataset": ds.manifest,
            "kappa": args.kappa,
            "mean": { "re_x": re_x, "re_g": re_g, "acc": acc },
            "batches": batches,
        }),
    )?;
    write_json(
        &timing_path(&out),
        &json!({ "report": out, "seconds": seconds, "mean_seconds": seconds.iter().sum::<f64>() / count }),
    )
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct BenchArgs {
    /// Dataset directory whose generation parameters define the test distribution
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Checkpoint directory; without it only ADMM runs
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Noise levels as `start:step:stop`, a comma list, or one value
    #[arg(long, default_value = "0")]
    pub eta_sweep: String,
    /// Realizations per noise level
    #[arg(long, default_value_t = 10)]
    pub trials: usize,
    #[arg(long, default_value_t = DEFAULT_KAPPA)]
    pub kappa: f64,
    #[arg(long, default_value_t = 1.0)]
    pub rho_lambda: f64,
    #[arg(long, default_value_t = 1.0)]
    pub rho_mu: f64,
    #[arg(long, default_value_t = 1.0)]
    pub c: f64,
    #[arg(long, default_value_t = 1e-6)]
    pub tol: f64,
    #[arg(long, default_value_t = 5000)]
    pub max_iters: usize,
    /// Output directory for bench.csv and bench.json
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Parse `start:step:stop` (inclusive), `a,b,c` or a single number.
pub fn parse_sweep(text: &str) -> CliResult<Vec<f64>> {
    let num = |s: &str| {
        s.trim()
            .parse::<f64>()
            .map_err(|_| usage(format!("bad number `{s}` in --eta-sweep `{text}`")))
    };
    let parts: Vec<&str> = text.split(':').collect();
    let values = match parts.as_slice() {
        [start, step, stop] => {
            let (start, step, stop) = (num(start)?, num(step)?, num(stop)?);
            if !(step > 0.0) || stop < start {
                return Err(usage(format!("--eta-sweep `{text}` needs step > 0 and stop >= start")));
            }
            let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
            // Round away the accumulation error of start + i * step.
            (0..count)
                .map(|i| format!("{:.12}", start + i as f64 * step).parse::<f64>().unwrap())
                .collect()
        }
        [list] => list.split(',').map(num).collect::<CliResult<Vec<_>>>()?,
        _ => return Err(usage(format!("--eta-sweep `{text}` must be start:step:stop or a list"))),
    };
    if values.iter().any(|v| !(*v >= 0.0)) {
        return Err(usage(format!("--eta-sweep `{text}` has a negative noise level")));
    }
    Ok(values)
}

pub fn bench(args: BenchArgs, globals: &Globals) -> CliResult<()> {
    let data = require(args.data.clone(), "data")?;
    let out = require(args.out.clone(), "out")?;
    let cfg = BenchConfig {
        etas: parse_sweep(&args.eta_sweep)?,
        trials: args.trials,
        kappa: args.kappa,
        admm: AdmmConfig {
            rho_lambda: args.rho_lambda,
            rho_mu: args.rho_mu,
            scale_c: args.c,
            max_iters: args.max_iters,
            tol_primal: args.tol,
            tol_dual: args.tol,
        },
        jobs: globals.jobs,
        seed: globals.seed,
    };
    cfg.admm.validate()?;
    let (sg, manifest) = spectral_graph(&data)?;
    let model = args.model.as_deref().map(load_checkpoint).transpose()?;
    let (rows, _) = bench_compare(&sg, &manifest.config(), model.as_ref().map(|(m, _)| m), &cfg)?;
    fs::create_dir_all(&out).map_err(|e| Error::io(&out, e))?;
    write_csv(&rows, &out.join("bench.csv"))?;
    let summary = summarize(&rows);
    for s in &summary {
        log::info!(
            "{:<5} eta {:.3}: RE(X) {:.4e}, ACC {:.4}, {:.3e} s",
            s.method.as_str(),
            s.eta,
            s.re_x.mean,
            s.acc.mean,
            s.seconds.mean
        );
    }
    write_json(
        &out.join("bench.json"),
        &json!({
            "config": resolved("bench", globals, &args),
            "bench": cfg,
            "dataset": manifest,
            "model": model.map(|(_, h)| h),
            "rows": rows.len(),
            "summary": summary,
        }),
    )
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct ReportArgs {
    /// Benchmark CSV file or a directory of them
    #[arg(long = "in", id = "in")]
    #[serde(rename = "in")]
    pub input: Option<PathBuf>,
    /// Summary JSON file
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn report(args: ReportArgs, globals: &Globals) -> CliResult<()> {
    let input = require(args.input.clone(), "in")?;
    let out = require(args.out.clone(), "out")?;
    let files: Vec<PathBuf> = if input.is_dir() {
        let mut found: Vec<PathBuf> = fs::read_dir(&input)
            .map_err(|e| Error::io(&input, e))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "csv"))
            .collect();
        found.sort();
        found
    } else {
        vec![input.clone()]
    };
    if files.is_empty() {
        return Err(Error::Report {
            path: input,
            reason: "no CSV files found".into(),
        }
        .into());
    }
    let mut rows = Vec::new();
    for f in &files {
        rows.extend(read_csv(f)?);
    }
    let summary = summarize(&rows);
    log::info!("{} rows from {} files in {} groups", rows.len(), files.len(), summary.len());
    write_json(
        &out,
        &json!({
            "config": resolved("report", globals, &args),
            "inputs": files,
            "rows": rows.len(),
            "summary": summary,
        }),
    )
}
