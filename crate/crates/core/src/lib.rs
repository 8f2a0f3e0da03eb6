//! Distributional time-series modeling and streaming anomaly detection.
//!
//! The pipeline models each time interval of a metric as a binned probability
//! distribution, evolves the Dirichlet concentration parameter of that
//! distribution with an autoregressive LSTM, and flags observations that fall
//! outside likelihood level-set credible regions. Three observation regimes
//! are supported: asymptotic (the distribution is observed directly as a
//! quantile vector), finite (n_t samples per interval, with a two-stage
//! per-event and per-window detector), and single (one observation per
//! interval, scored by exact enumeration).

pub mod detect;
pub mod dist;
pub mod dynamics;
pub mod error;
pub mod eval;
pub mod grid;
pub mod io;
pub mod numeric;
pub mod persist;
pub mod synth;

pub use detect::{
    asymptotic_score, detect_batch, exact_eta, mc_eta, point_score, window_score, AnomalyScore,
    CovariateSpec, Detector, DetectorConfig, DetectorMode, IntervalInput, LevelSetThreshold,
    McRegime, Stage, StageScore, StreamInput, ThresholdMethod,
};
pub use dist::{
    dirichlet_grad_alpha, dirichlet_logpdf, dirichlet_sample, dirmult_grad_alpha, dirmult_logpmf,
    dirmult_sample, grad_alpha, ConcentrationVector, DistObservation, LikelihoodKind,
    LogLikelihood,
};
pub use dynamics::{
    backward, default_covariate_seq, default_covariates, predict_alpha, rollout, step, train,
    unroll_loss, unroll_loss_gapped, Architecture, HiddenState, ModelParams, SampleRegime,
    TrainOutcome, TrainSeries, TrainingConfig, UnrollOutput, ALPHA_FLOOR,
};
pub use error::{Error, Result};
pub use eval::{
    fpr_recall, roc_auc, run_experiment, run_seed, EvalReport, ExperimentSpec, Scenario,
    SeedOutcome,
};
pub use grid::{
    aggregate_events, bin_samples, cdf_to_probs, quantile_levels, support_bounds, BinGrid,
    BinnedObservation, EventAggregator, ObservationData, PiecewiseLinearCdf,
};
pub use persist::{
    detector_from_bytes, detector_to_bytes, read_checkpoint, write_checkpoint, SavedModel,
};
pub use synth::{
    generate, statistical_anomaly_labels, Dynamics, LabeledSeries, Malfunction, SampleCount,
    SynthConfig, SynthInterval,
};
