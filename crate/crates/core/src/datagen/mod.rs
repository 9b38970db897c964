//! Synthetic data: graph ensembles, sparse sources, filters and observations.

mod dataset;
mod graphs;
mod sampling;

pub use dataset::{
    generate, load_dataset, load_graph, load_manifest, make_dataset, save_dataset, Dataset, DatasetConfig,
    Manifest, PayloadShape, Payloads, FORMAT_VERSION, GRAPH_FILE, MANIFEST_FILE,
};
pub use graphs::{block_assignment, gen_graph, GraphSpec, MAX_CONNECT_ATTEMPTS};
pub use sampling::{sample_filter, sample_sources, synthesize, FilterModel, SourceModel, Synthesis};
