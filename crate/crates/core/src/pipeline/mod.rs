//! Experiments: leave-one-subject-out splits, both feature front ends,
//! metrics and report files.

mod config;
mod corpus;
mod experiment;
mod frontend;
mod metrics;
mod plot;
mod report;
mod split;
mod visual;

pub use config::{ExperimentConfig, KvConfig, Method, EXPERIMENT_KEYS};
pub use corpus::{
    dataset_dir, find_datasets, load_corpus, synth_corpus, CorpusConfig, ParticipantProfile, Recording, CORPUS_KEYS,
};
pub use experiment::{predict_recordings, run_experiment, run_experiment_on, score_traces, ExperimentOutcome, Trace};
pub use frontend::{clusters_from_text, clusters_to_text, fit_clusters, FrontEnd, PairEncoding, PairSamples};
pub use metrics::{regression_metrics, MetricsReport, MetricsRow, TARGETS};
pub use plot::{gray_png, line_plot_png, Series};
pub use report::{
    emit_report, history_to_csv, load_run, report_from_run, save_run, trace_file_name, trace_from_csv, trace_to_csv,
    SavedRun, CLUSTERS_FILE, CONFIG_FILE, HISTORY_FILE, METRICS_FILE, MODEL_FILE,
};
pub use split::{loso_split, Split};
pub use visual::{visualize_pair_unit, PairVisualization, DEFAULT_RESTARTS};
