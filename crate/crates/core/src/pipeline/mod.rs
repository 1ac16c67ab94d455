//! End-to-end experiments: synthetic data, supervisory construction,
//! training, evaluation and ablation sweeps.

mod config;
mod experiment;
mod hungarian;
mod synth;

pub use config::{BuilderSpec, DatasetSpec, DebiasOrder, ExperimentConfig, Head, SupervisorySpec, METRIC_NAMES};
pub use experiment::{
    ablation_sweep, build_knn_graph, build_supervisory, grid_config, head_inputs, load_dataset, max_prob_histogram, run_experiment,
    run_dir_name, run_in_memory, write_artifacts, write_sweep_csv, Dataset, ExperimentOutcome, MetricsRecord, Sides, SweepRow,
    HISTOGRAM_BINS,
};

pub use hungarian::{confusion_matrix, hungarian_accuracy, max_weight_matching, MAX_LABELS};
pub use synth::{synth_generate, SynthData, SynthKind, BLOB_RADIUS};

/// Renders a deserialization path as a JSON pointer (`/a/0/b`).
pub fn json_pointer(path: &serde_path_to_error::Path) -> String {
    use serde_path_to_error::Segment;
    let mut out = String::new();
    for seg in path.iter() {
        out.push('/');
        match seg {
            Segment::Seq { index } => out.push_str(&index.to_string()),
            Segment::Map { key } | Segment::Enum { variant: key } => {
                out.push_str(&key.replace('~', "~0").replace('/', "~1"))
            }
            Segment::Unknown => out.push('?'),
        }
    }
    out
}
