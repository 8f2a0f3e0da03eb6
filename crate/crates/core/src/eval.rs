//! Evaluation metrics and the synthetic experiment runner.

use crate::detect::{detect_batch, CovariateSpec, DetectorConfig, DetectorMode};
use crate::dynamics::{default_covariate_seq, train, Architecture, TrainSeries, TrainingConfig};
use crate::error::{Error, Result};
use crate::grid::{support_bounds, BinGrid, DEFAULT_SUPPORT_MARGIN};
use crate::synth::{generate, Dynamics, Malfunction, SampleCount, SynthConfig};
use rayon::prelude::*;

/// ROC-AUC by rank statistics: the probability that a random positive
/// outranks a random negative, ties counted one half. Win counts are
/// accumulated in integers, so the result is bit-identical to brute-force
/// pair counting.
pub fn roc_auc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::invalid("scores and labels must be equal length"));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::invalid("scores must not be NaN"));
    }
    let n_pos = labels.iter().filter(|&&l| l).count() as u128;
    let n_neg = labels.len() as u128 - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::UndefinedMetric(
            "ROC-AUC needs both a positive and a negative example".into(),
        ));
    }
    let mut paired: Vec<(f64, bool)> = scores.iter().cloned().zip(labels.iter().cloned()).collect();
    paired.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    let mut wins2: u128 = 0; // 2 * wins + ties
    let mut neg_below: u128 = 0;
    let mut i = 0;
    while i < paired.len() {
        let s = paired[i].0;
        let mut pos_here: u128 = 0;
        let mut neg_here: u128 = 0;
        while i < paired.len() && paired[i].0 == s {
            if paired[i].1 {
                pos_here += 1;
            } else {
                neg_here += 1;
            }
            i += 1;
        }
        wins2 += pos_here * (2 * neg_below + neg_here);
        neg_below += neg_here;
    }
    Ok(wins2 as f64 / (2 * n_pos * n_neg) as f64)
}

/// False-positive rate and recall in percent. FPR is the flagged fraction of
/// non-malfunction intervals (minus any excluded ones); recall is the flagged
/// fraction of malfunction intervals, absent when there are none.
pub fn fpr_recall(
    flags: &[bool],
    labels: &[bool],
    exclude: Option<&[bool]>,
) -> Result<(f64, Option<f64>)> {
    if flags.len() != labels.len() {
        return Err(Error::invalid("flags and labels must be equal length"));
    }
    if let Some(ex) = exclude {
        if ex.len() != labels.len() {
            return Err(Error::invalid("exclude mask must match labels length"));
        }
    }
    let mut fp = 0usize;
    let mut negatives = 0usize;
    let mut tp = 0usize;
    let mut positives = 0usize;
    for i in 0..flags.len() {
        if labels[i] {
            positives += 1;
            if flags[i] {
                tp += 1;
            }
        } else {
            if exclude.map_or(false, |ex| ex[i]) {
                continue;
            }
            negatives += 1;
            if flags[i] {
                fp += 1;
            }
        }
    }
    let fpr = if negatives == 0 {
        0.0
    } else {
        100.0 * fp as f64 / negatives as f64
    };
    let recall = if positives == 0 {
        None
    } else {
        Some(100.0 * tp as f64 / positives as f64)
    };
    Ok((fpr, recall))
}

/// The synthetic benchmark pipelines.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scenario {
    /// Regular d=30 grid over exact per-interval CDFs.
    AsympDs1,
    AsympDs2,
    /// Quantile d=10 grid, n_t = 60 samples per interval.
    FiniteDs1,
    FiniteDs2,
    /// One observation per interval, d=100, exact enumeration only.
    SingleDs1,
    SingleDs2,
}

impl Scenario {
    pub fn dynamics(self) -> Dynamics {
        match self {
            Scenario::AsympDs1 | Scenario::FiniteDs1 | Scenario::SingleDs1 => Dynamics::Ds1,
            Scenario::AsympDs2 | Scenario::FiniteDs2 | Scenario::SingleDs2 => Dynamics::Ds2,
        }
    }

    pub fn sample_count(self) -> SampleCount {
        match self {
            Scenario::AsympDs1 | Scenario::AsympDs2 => SampleCount::Asymptotic,
            Scenario::FiniteDs1 | Scenario::FiniteDs2 => SampleCount::Finite(60),
            Scenario::SingleDs1 | Scenario::SingleDs2 => SampleCount::Finite(1),
        }
    }

    pub fn mode(self) -> DetectorMode {
        match self {
            Scenario::AsympDs1 | Scenario::AsympDs2 => DetectorMode::Asymptotic,
            Scenario::FiniteDs1 | Scenario::FiniteDs2 => DetectorMode::Finite,
            Scenario::SingleDs1 | Scenario::SingleDs2 => DetectorMode::Single,
        }
    }

    pub fn bins(self) -> usize {
        match self {
            Scenario::AsympDs1 | Scenario::AsympDs2 => 30,
            Scenario::FiniteDs1 | Scenario::FiniteDs2 => 10,
            Scenario::SingleDs1 | Scenario::SingleDs2 => 100,
        }
    }

    fn quantile_grid(self) -> bool {
        matches!(self, Scenario::FiniteDs1 | Scenario::FiniteDs2)
    }

    /// Shift magnitude for MuShift malfunctions. The single-observation
    /// pathway uses a 4-sigma shift so point anomalies are identifiable from
    /// one draw.
    fn mu_shift(self) -> f64 {
        match self {
            Scenario::SingleDs1 | Scenario::SingleDs2 => 4.0,
            _ => 1.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Scenario::AsympDs1 => "asymp-ds1",
            Scenario::AsympDs2 => "asymp-ds2",
            Scenario::FiniteDs1 => "finite-ds1",
            Scenario::FiniteDs2 => "finite-ds2",
            Scenario::SingleDs1 => "single-ds1",
            Scenario::SingleDs2 => "single-ds2",
        }
    }
}

/// Training defaults for an experiment run; tuned per pipeline for a good
/// fit/runtime balance on the synthetic dynamics.
pub fn scenario_training_config(scenario: Scenario, seed: u64) -> TrainingConfig {
    match scenario {
        Scenario::AsympDs1 | Scenario::AsympDs2 => TrainingConfig {
            epochs: 200,
            learning_rate: 1e-2,
            lr_decay: 0.99,
            clip_norm: 10.0,
            batch_size: 4,
            context_length: 48,
            seed,
        },
        Scenario::FiniteDs1 | Scenario::FiniteDs2 => TrainingConfig {
            epochs: 150,
            learning_rate: 1e-2,
            lr_decay: 0.99,
            clip_norm: 10.0,
            batch_size: 4,
            context_length: 48,
            seed,
        },
        Scenario::SingleDs1 | Scenario::SingleDs2 => TrainingConfig {
            epochs: 60,
            learning_rate: 1e-2,
            lr_decay: 0.98,
            clip_norm: 10.0,
            batch_size: 4,
            context_length: 48,
            seed,
        },
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentSpec {
    pub scenario: Scenario,
    pub malfunction: Malfunction,
    /// Number of independent repetitions.
    pub repeats: u64,
    pub base_seed: u64,
    pub epsilon: f64,
    pub mc_samples: usize,
    /// Overrides the per-scenario training defaults when set.
    pub training: Option<TrainingConfig>,
    pub learn_len: usize,
    pub detect_len: usize,
    pub lstm_layers: usize,
    pub hidden: usize,
}

impl ExperimentSpec {
    pub fn new(scenario: Scenario, malfunction: Malfunction, repeats: u64) -> Self {
        ExperimentSpec {
            scenario,
            malfunction,
            repeats,
            base_seed: 0,
            epsilon: 0.05,
            mc_samples: 1000,
            training: None,
            learn_len: 1500,
            detect_len: 2000,
            lstm_layers: 2,
            hidden: 40,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeedOutcome {
    pub seed: u64,
    pub fpr: f64,
    pub recall: Option<f64>,
    pub auc: Option<f64>,
    pub final_nll: f64,
}

#[derive(Debug, Clone)]
pub struct EvalReport {
    pub scenario: String,
    pub outcomes: Vec<SeedOutcome>,
    pub fpr_mean: f64,
    pub fpr_std: f64,
    pub recall_mean: Option<f64>,
    pub recall_std: Option<f64>,
    pub auc_mean: Option<f64>,
    pub auc_std: Option<f64>,
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

impl EvalReport {
    fn from_outcomes(scenario: String, outcomes: Vec<SeedOutcome>) -> Self {
        let fprs: Vec<f64> = outcomes.iter().map(|o| o.fpr).collect();
        let (fpr_mean, fpr_std) = mean_std(&fprs);
        let recalls: Vec<f64> = outcomes.iter().filter_map(|o| o.recall).collect();
        let (recall_mean, recall_std) = if recalls.is_empty() {
            (None, None)
        } else {
            let (m, s) = mean_std(&recalls);
            (Some(m), Some(s))
        };
        let aucs: Vec<f64> = outcomes.iter().filter_map(|o| o.auc).collect();
        let (auc_mean, auc_std) = if aucs.is_empty() {
            (None, None)
        } else {
            let (m, s) = mean_std(&aucs);
            (Some(m), Some(s))
        };
        EvalReport {
            scenario,
            outcomes,
            fpr_mean,
            fpr_std,
            recall_mean,
            recall_std,
            auc_mean,
            auc_std,
        }
    }

    /// Human-readable summary table.
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("scenario: {}\n", self.scenario));
        out.push_str("seed    fpr%    recall%      auc    final-nll\n");
        for o in &self.outcomes {
            out.push_str(&format!(
                "{:>4} {:>7.2} {:>9} {:>8} {:>12.4}\n",
                o.seed,
                o.fpr,
                o.recall.map_or("-".to_string(), |r| format!("{r:.2}")),
                o.auc.map_or("-".to_string(), |a| format!("{a:.4}")),
                o.final_nll,
            ));
        }
        out.push_str(&format!(
            "mean    fpr {:.2} +- {:.2}",
            self.fpr_mean, self.fpr_std
        ));
        if let (Some(m), Some(s)) = (self.recall_mean, self.recall_std) {
            out.push_str(&format!("  recall {m:.2} +- {s:.2}"));
        }
        if let (Some(m), Some(s)) = (self.auc_mean, self.auc_std) {
            out.push_str(&format!("  auc {m:.4} +- {s:.4}"));
        }
        out.push('\n');
        out
    }

    /// Machine-readable key=value lines.
    pub fn to_machine(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "scenario={} fpr_mean={:.6} fpr_std={:.6}",
            self.scenario, self.fpr_mean, self.fpr_std
        ));
        if let Some(m) = self.recall_mean {
            out.push_str(&format!(
                " recall_mean={:.6} recall_std={:.6}",
                m,
                self.recall_std.unwrap_or(0.0)
            ));
        }
        if let Some(m) = self.auc_mean {
            out.push_str(&format!(
                " auc_mean={:.6} auc_std={:.6}",
                m,
                self.auc_std.unwrap_or(0.0)
            ));
        }
        out.push('\n');
        for o in &self.outcomes {
            out.push_str(&format!(
                "seed={} fpr={:.6} recall={} auc={} nll={:.6}\n",
                o.seed,
                o.fpr,
                o.recall.map_or("-".into(), |r| format!("{r:.6}")),
                o.auc.map_or("-".into(), |a| format!("{a:.6}")),
                o.final_nll,
            ));
        }
        out
    }
}

/// Full generate / train / detect / score pipeline for one seed.
pub fn run_seed(spec: &ExperimentSpec, seed: u64) -> Result<SeedOutcome> {
    let scenario = spec.scenario;
    let synth_cfg = SynthConfig {
        dynamics: scenario.dynamics(),
        malfunction: spec.malfunction,
        sample_count: scenario.sample_count(),
        learn_len: spec.learn_len,
        detect_len: spec.detect_len,
        mu_shift: scenario.mu_shift(),
        seed,
        ..SynthConfig::default()
    };
    let series = generate(&synth_cfg)?;
    let t_len = spec.learn_len;

    let (vmin, vmax) = series.training_value_range();
    let support = support_bounds(vmin, vmax, DEFAULT_SUPPORT_MARGIN);
    let d = scenario.bins();
    let grid = if scenario.quantile_grid() {
        BinGrid::from_quantiles(&series.pooled_training_samples(), d, support)?
    } else {
        BinGrid::regular(support.0, support.1, d)?
    };

    let observations = series.to_observations(&grid)?;
    let cov_spec = CovariateSpec {
        age_offset: 0,
        age_scale: t_len as f64,
    };
    let covariates = default_covariate_seq(0, t_len as u64, 0, t_len as f64);
    let corpus = vec![TrainSeries {
        observations: observations[..t_len].to_vec(),
        covariates,
    }];
    let arch = Architecture {
        layers: spec.lstm_layers,
        hidden: spec.hidden,
        bins: d,
        cov_dim: crate::dynamics::DEFAULT_COV_DIM,
    };
    let train_cfg = spec
        .training
        .clone()
        .unwrap_or_else(|| scenario_training_config(scenario, seed));
    let outcome = train(&train_cfg, arch, &corpus)?;

    let det_cfg = DetectorConfig {
        mode: scenario.mode(),
        epsilon: spec.epsilon,
        mc_samples: spec.mc_samples,
        intermediate_every: None,
        seed,
    };
    let inputs = series.to_interval_inputs(&grid)?;
    let scores = detect_batch(&outcome.params, &grid, &det_cfg, cov_spec, &inputs, t_len)?;

    // One record per interval: the window-close record in finite mode, the
    // single emission otherwise.
    let per_interval: Vec<&crate::detect::AnomalyScore> = match scenario.mode() {
        DetectorMode::Finite => scores
            .iter()
            .filter(|s| s.window.is_some() && s.point.is_some())
            .collect(),
        _ => scores.iter().collect(),
    };
    if per_interval.len() != spec.detect_len {
        return Err(Error::invalid(format!(
            "expected {} interval scores, got {}",
            spec.detect_len,
            per_interval.len()
        )));
    }
    let flags: Vec<bool> = per_interval.iter().map(|s| s.is_anomaly).collect();
    // Higher score = more anomalous for ranking metrics.
    let rank_scores: Vec<f64> = per_interval.iter().map(|s| -s.combined).collect();
    let labels = &series.labels()[t_len..];

    let (fpr, recall) = fpr_recall(&flags, labels, None)?;
    let auc = if labels.iter().any(|&l| l) {
        Some(roc_auc(&rank_scores, labels)?)
    } else {
        None
    };
    Ok(SeedOutcome {
        seed,
        fpr,
        recall,
        auc,
        final_nll: outcome.final_nll,
    })
}

/// Run an experiment over N seeds in parallel and aggregate.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<EvalReport> {
    let seeds: Vec<u64> = (0..spec.repeats).map(|i| spec.base_seed + i).collect();
    let mut outcomes = seeds
        .par_iter()
        .map(|&s| run_seed(spec, s))
        .collect::<Result<Vec<_>>>()?;
    outcomes.sort_by_key(|o| o.seed);
    let name = format!(
        "{}-{}",
        spec.scenario.name(),
        match spec.malfunction {
            Malfunction::None => "none",
            Malfunction::MuShift => "mu",
            Malfunction::SigmaCollapse => "sigma",
        }
    );
    Ok(EvalReport::from_outcomes(name, outcomes))
}
