//! Level-set credible regions, p-value anomaly scores, and the two-stage
//! batch/streaming detector.
//!
//! The credible region at level epsilon is the highest-density set of
//! outcomes with total mass 1 - epsilon; an observation is flagged when its
//! likelihood falls below the region's threshold eta. For small outcome
//! spaces eta is computed exactly by enumeration; otherwise it is the epsilon
//! quantile of Monte-Carlo likelihoods from the predictive.

use crate::dist::{
    dirichlet_log_sample, dirichlet_logpdf, dirichlet_logpdf_from_log_probs, dirichlet_sample,
    multinomial_sample, ConcentrationVector, DirMultTable,
};
use crate::dynamics::{step, HiddenState, ModelParams};
use crate::error::{Error, Result};
use crate::grid::BinGrid;
use crate::numeric::splitmix64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// How a level-set threshold was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ThresholdMethod {
    ExactEnumeration,
    MonteCarlo { samples: usize },
}

/// Likelihood threshold of the credible region at a given level. The
/// threshold is stored in log scale.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LevelSetThreshold {
    pub log_eta: f64,
    pub epsilon: f64,
    pub method: ThresholdMethod,
}

/// Score of a single detection stage: log p-value and the flag at level
/// epsilon.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StageScore {
    pub log_p: f64,
    pub flagged: bool,
}

/// Detection stages as they appear in score records.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Point,
    Window,
    Combined,
}

/// Per-emission anomaly score: whichever stages fired, their sum, and the
/// resulting flag.
#[derive(Debug, Clone, PartialEq)]
pub struct AnomalyScore {
    pub interval_index: u64,
    pub point: Option<StageScore>,
    pub window: Option<StageScore>,
    /// Sum of the log p-values of the present stages.
    pub combined: f64,
    pub is_anomaly: bool,
}

impl AnomalyScore {
    fn point_only(interval_index: u64, s: StageScore) -> Self {
        AnomalyScore {
            interval_index,
            point: Some(s),
            window: None,
            combined: s.log_p,
            is_anomaly: s.flagged,
        }
    }

    fn window_only(interval_index: u64, s: StageScore) -> Self {
        AnomalyScore {
            interval_index,
            point: None,
            window: Some(s),
            combined: s.log_p,
            is_anomaly: s.flagged,
        }
    }

    /// Window-close record: both stages present, scores added. The flag is
    /// the collective (window) stage decision; point flags were already
    /// emitted per event.
    fn close(interval_index: u64, point: StageScore, window: StageScore) -> Self {
        AnomalyScore {
            interval_index,
            point: Some(point),
            window: Some(window),
            combined: point.log_p + window.log_p,
            is_anomaly: window.flagged,
        }
    }
}

fn check_epsilon(epsilon: f64) -> Result<()> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::invalid(format!("epsilon must be in (0,1), got {epsilon}")));
    }
    Ok(())
}

/// Exact level-set threshold over an enumerated outcome space: the largest
/// eta with P(L >= eta) >= 1 - epsilon. Outcomes with equal likelihood enter
/// or leave the credible set together, so ties cannot straddle the boundary.
pub fn exact_eta(outcomes: &[(f64, f64)], epsilon: f64) -> Result<LevelSetThreshold> {
    check_epsilon(epsilon)?;
    if outcomes.is_empty() {
        return Err(Error::invalid("outcome list is empty"));
    }
    let mass: f64 = outcomes.iter().map(|(_, p)| p).sum();
    if (mass - 1.0).abs() > 1e-9 {
        return Err(Error::invalid(format!(
            "outcome probabilities sum to {mass}, expected 1 within 1e-9"
        )));
    }
    if outcomes.iter().any(|(ll, p)| ll.is_nan() || !p.is_finite() || *p < 0.0) {
        return Err(Error::invalid("invalid outcome entries"));
    }
    let mut sorted: Vec<(f64, f64)> = outcomes.to_vec();
    sorted.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());
    let mut cum = 0.0;
    let mut i = 0;
    let mut eta = sorted[sorted.len() - 1].0;
    while i < sorted.len() {
        let ll = sorted[i].0;
        // Whole tie class at once.
        let mut class_mass = 0.0;
        while i < sorted.len() && sorted[i].0 == ll {
            class_mass += sorted[i].1;
            i += 1;
        }
        cum += class_mass;
        if cum >= 1.0 - epsilon {
            eta = ll;
            break;
        }
    }
    Ok(LevelSetThreshold {
        log_eta: eta,
        epsilon,
        method: ThresholdMethod::ExactEnumeration,
    })
}

/// Outcome space for Monte-Carlo threshold estimation.
#[derive(Debug, Clone, Copy)]
pub enum McRegime {
    Dirichlet,
    DirMult { n: u64 },
}

fn mc_logliks<R: Rng + ?Sized>(
    predictive: &ConcentrationVector,
    regime: McRegime,
    samples: usize,
    rng: &mut R,
) -> Result<Vec<f64>> {
    let mut lls = Vec::with_capacity(samples);
    match regime {
        McRegime::Dirichlet => {
            for _ in 0..samples {
                let lp = dirichlet_log_sample(predictive, rng);
                lls.push(dirichlet_logpdf_from_log_probs(&lp, predictive));
            }
        }
        McRegime::DirMult { n } => {
            let table = DirMultTable::new(predictive, n)?;
            for _ in 0..samples {
                let p = dirichlet_sample(predictive, rng);
                let m = multinomial_sample(n, &p, rng);
                lls.push(table.logpmf(&m));
            }
        }
    }
    Ok(lls)
}

/// Rank of the lower empirical epsilon quantile: the ceil(eps*m)-th order
/// statistic, as a zero-based index.
fn quantile_rank(epsilon: f64, m: usize) -> usize {
    let k = (epsilon * m as f64).ceil() as usize;
    k.clamp(1, m) - 1
}

/// Monte-Carlo threshold: sample M outcomes from the predictive, take the
/// epsilon quantile of their log-likelihoods.
pub fn mc_eta<R: Rng + ?Sized>(
    predictive: &ConcentrationVector,
    regime: McRegime,
    epsilon: f64,
    samples: usize,
    rng: &mut R,
) -> Result<LevelSetThreshold> {
    check_epsilon(epsilon)?;
    if samples < 100 {
        return Err(Error::invalid("Monte-Carlo threshold needs at least 100 samples"));
    }
    let mut lls = mc_logliks(predictive, regime, samples, rng)?;
    let k = quantile_rank(epsilon, samples);
    let (_, eta, _) = lls.select_nth_unstable_by(k, |a, b| a.partial_cmp(b).unwrap());
    Ok(LevelSetThreshold {
        log_eta: *eta,
        epsilon,
        method: ThresholdMethod::MonteCarlo { samples },
    })
}

/// Stage-1 score of a single binned observation. With one draw there are
/// only d outcomes with probabilities alpha_k/alpha_0, so the p-value (the
/// total mass of outcomes no more likely than the observed one) is exact.
pub fn point_score(
    predictive: &ConcentrationVector,
    sample_bin: usize,
    epsilon: f64,
) -> Result<StageScore> {
    check_epsilon(epsilon)?;
    let alpha = predictive.alpha();
    if sample_bin >= alpha.len() {
        return Err(Error::invalid(format!(
            "bin index {sample_bin} out of range for {} bins",
            alpha.len()
        )));
    }
    let ak = alpha[sample_bin];
    let tail: f64 = alpha.iter().filter(|&&a| a <= ak).sum();
    let p_value = tail / predictive.alpha0();
    Ok(StageScore {
        log_p: p_value.ln().min(0.0),
        flagged: p_value < epsilon,
    })
}

/// Stage-2 score of a window's count vector under the Dirichlet-Multinomial
/// predictive, with Monte-Carlo level-set threshold and p-value from the same
/// sample set. The p-value estimate is floored at 1/(M+1) so the log score
/// stays finite and rank-preserving.
pub fn window_score<R: Rng + ?Sized>(
    predictive: &ConcentrationVector,
    counts: &[u64],
    n: u64,
    epsilon: f64,
    mc_samples: usize,
    rng: &mut R,
) -> Result<StageScore> {
    check_epsilon(epsilon)?;
    if counts.len() != predictive.dim() {
        return Err(Error::invalid("count vector dimension mismatch"));
    }
    if counts.iter().sum::<u64>() != n {
        return Err(Error::invalid("counts must sum to n"));
    }
    if mc_samples < 100 {
        return Err(Error::invalid("Monte-Carlo scoring needs at least 100 samples"));
    }
    let table = DirMultTable::new(predictive, n)?;
    let obs_ll = table.logpmf(counts);
    let mut lls = Vec::with_capacity(mc_samples);
    for _ in 0..mc_samples {
        let p = dirichlet_sample(predictive, rng);
        let m = multinomial_sample(n, &p, rng);
        lls.push(table.logpmf(&m));
    }
    let below = lls.iter().filter(|&&ll| ll <= obs_ll).count();
    let k = quantile_rank(epsilon, mc_samples);
    lls.select_nth_unstable_by(k, |a, b| a.partial_cmp(b).unwrap());
    let eta = lls[k];
    let p_hat = (below as f64 / mc_samples as f64).max(1.0 / (mc_samples as f64 + 1.0));
    Ok(StageScore {
        log_p: p_hat.ln().min(0.0),
        flagged: obs_ll < eta,
    })
}

/// Whole-distribution score for the asymptotic regime: Monte-Carlo level set
/// of the Dirichlet density, evaluated at the observed probability vector.
pub fn asymptotic_score<R: Rng + ?Sized>(
    predictive: &ConcentrationVector,
    p_obs: &[f64],
    epsilon: f64,
    mc_samples: usize,
    rng: &mut R,
) -> Result<StageScore> {
    check_epsilon(epsilon)?;
    if mc_samples < 100 {
        return Err(Error::invalid("Monte-Carlo scoring needs at least 100 samples"));
    }
    let obs_ll = dirichlet_logpdf(p_obs, predictive)?.value;
    let mut lls = Vec::with_capacity(mc_samples);
    for _ in 0..mc_samples {
        let lp = dirichlet_log_sample(predictive, rng);
        lls.push(dirichlet_logpdf_from_log_probs(&lp, predictive));
    }
    let below = lls.iter().filter(|&&ll| ll <= obs_ll).count();
    let k = quantile_rank(epsilon, mc_samples);
    lls.select_nth_unstable_by(k, |a, b| a.partial_cmp(b).unwrap());
    let eta = lls[k];
    let p_hat = (below as f64 / mc_samples as f64).max(1.0 / (mc_samples as f64 + 1.0));
    Ok(StageScore {
        log_p: p_hat.ln().min(0.0),
        flagged: obs_ll < eta,
    })
}

/// Independent RNG stream for one interval's Monte-Carlo stage, so that
/// batch, streaming and resumed-from-checkpoint runs draw identical samples.
fn interval_rng(seed: u64, interval: u64, sub: u64) -> ChaCha8Rng {
    let mixed = splitmix64(splitmix64(seed) ^ splitmix64(interval.wrapping_add(0x9E37)) ^ sub.wrapping_mul(0xA24B_AED4_963E_E407));
    ChaCha8Rng::seed_from_u64(mixed)
}

/// Which likelihood the detector applies per interval.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DetectorMode {
    /// Per-interval probability vectors, Dirichlet likelihood.
    Asymptotic,
    /// n_t raw samples per interval: exact per-event stage plus a
    /// Dirichlet-Multinomial window stage.
    Finite,
    /// One sample per interval: exact enumeration only, no Monte Carlo.
    Single,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetectorConfig {
    pub mode: DetectorMode,
    pub epsilon: f64,
    pub mc_samples: usize,
    /// Emit an extra collective score every k events within a window.
    pub intermediate_every: Option<u64>,
    pub seed: u64,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        DetectorConfig {
            mode: DetectorMode::Finite,
            epsilon: 0.05,
            mc_samples: 1000,
            intermediate_every: None,
            seed: 0,
        }
    }
}

/// Covariate generator spec carried inside detector state so streaming and
/// batch paths derive identical time features.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CovariateSpec {
    pub age_offset: u64,
    pub age_scale: f64,
}

impl CovariateSpec {
    pub fn row(&self, t: u64) -> Vec<f64> {
        crate::dynamics::default_covariates(t, self.age_offset, self.age_scale)
    }
}

/// Input to one streaming step.
#[derive(Debug, Clone)]
pub enum StreamInput {
    /// A raw event value (finite and single modes).
    Event(f64),
    /// End of the current aggregation window (finite mode).
    WindowClose,
    /// A full probability vector on the detector's grid (asymptotic mode).
    Distribution(Vec<f64>),
}

/// One metric's streaming detector: frozen predictive for the open window,
/// partial-window buffer, and the recurrent state. Single writer per metric.
#[derive(Debug, Clone, PartialEq)]
pub struct Detector {
    pub(crate) config: DetectorConfig,
    pub(crate) grid: BinGrid,
    pub(crate) cov: CovariateSpec,
    pub(crate) state: HiddenState,
    pub(crate) predictive: ConcentrationVector,
    pub(crate) last_z: Vec<f64>,
    pub(crate) interval: u64,
    pub(crate) buffer: Vec<u64>,
    pub(crate) buffered: u64,
    pub(crate) chunk: Vec<u64>,
    pub(crate) chunk_len: u64,
    pub(crate) chunk_ordinal: u64,
    pub(crate) last_point: Option<StageScore>,
}

impl Detector {
    /// Start a detector from the first observed interval's frequency vector:
    /// the initial predictive targets interval 1.
    pub fn new(
        model: &ModelParams,
        grid: BinGrid,
        config: DetectorConfig,
        cov: CovariateSpec,
        z0: &[f64],
    ) -> Result<Self> {
        if grid.bin_count() != model.arch().bins {
            return Err(Error::invalid("grid bin count does not match the model"));
        }
        check_epsilon(config.epsilon)?;
        let h0 = HiddenState::zeros(&model.arch());
        let (state, predictive) = step(model, &h0, z0, &cov.row(1))?;
        let d = grid.bin_count();
        Ok(Detector {
            config,
            grid,
            cov,
            state,
            predictive,
            last_z: z0.to_vec(),
            interval: 1,
            buffer: vec![0; d],
            buffered: 0,
            chunk: vec![0; d],
            chunk_len: 0,
            chunk_ordinal: 0,
            last_point: None,
        })
    }

    pub fn interval(&self) -> u64 {
        self.interval
    }

    pub fn predictive(&self) -> &ConcentrationVector {
        &self.predictive
    }

    fn check_model(&self, model: &ModelParams) -> Result<()> {
        let arch = model.arch();
        if !self.state.matches(&arch)
            || self.grid.bin_count() != arch.bins
            || self.buffer.len() != arch.bins
            || self.last_z.len() != arch.bins
            || self.predictive.dim() != arch.bins
        {
            return Err(Error::StateCorrupt(
                "detector state dimensions do not match the model".into(),
            ));
        }
        Ok(())
    }

    /// Advance one interval with realized frequency vector z_t and compute
    /// the next predictive.
    fn advance(&mut self, model: &ModelParams, z: Vec<f64>) -> Result<()> {
        let x = self.cov.row(self.interval + 1);
        let (state, predictive) = step(model, &self.state, &z, &x)?;
        self.state = state;
        self.predictive = predictive;
        self.last_z = z;
        self.interval += 1;
        for b in self.buffer.iter_mut() {
            *b = 0;
        }
        self.buffered = 0;
        for b in self.chunk.iter_mut() {
            *b = 0;
        }
        self.chunk_len = 0;
        self.chunk_ordinal = 0;
        self.last_point = None;
        Ok(())
    }

    /// Roll the detector through already-scored history without emitting
    /// anything. `None` entries carry the state across empty intervals.
    pub fn warm_up(&mut self, model: &ModelParams, intervals: &[Option<Vec<f64>>]) -> Result<()> {
        self.check_model(model)?;
        for z in intervals {
            let z = z.clone().unwrap_or_else(|| self.last_z.clone());
            self.advance(model, z)?;
        }
        Ok(())
    }

    /// Process one streaming input; returns any scores it produced.
    pub fn stream_step(
        &mut self,
        model: &ModelParams,
        input: StreamInput,
    ) -> Result<Vec<AnomalyScore>> {
        self.check_model(model)?;
        let eps = self.config.epsilon;
        match (self.config.mode, input) {
            (DetectorMode::Asymptotic, StreamInput::Distribution(p)) => {
                if p.len() != self.grid.bin_count() {
                    return Err(Error::invalid("distribution dimension mismatch"));
                }
                let mut rng = interval_rng(self.config.seed, self.interval, 0);
                let s = asymptotic_score(
                    &self.predictive,
                    &p,
                    eps,
                    self.config.mc_samples,
                    &mut rng,
                )?;
                let score = AnomalyScore::window_only(self.interval, s);
                self.advance(model, p)?;
                Ok(vec![score])
            }
            (DetectorMode::Asymptotic, _) => Err(Error::invalid(
                "asymptotic detector consumes per-interval distributions",
            )),
            (DetectorMode::Single, StreamInput::Event(v)) => {
                let bin = self.grid.bin_index(v);
                let s = point_score(&self.predictive, bin, eps)?;
                let score = AnomalyScore::point_only(self.interval, s);
                let mut z = vec![0.0; self.grid.bin_count()];
                z[bin] = 1.0;
                self.advance(model, z)?;
                Ok(vec![score])
            }
            (DetectorMode::Single, _) => Err(Error::invalid(
                "single-observation detector consumes raw events only",
            )),
            (DetectorMode::Finite, StreamInput::Event(v)) => {
                let bin = self.grid.bin_index(v);
                let s = point_score(&self.predictive, bin, eps)?;
                self.last_point = Some(s);
                self.buffer[bin] += 1;
                self.buffered += 1;
                let mut out = vec![AnomalyScore::point_only(self.interval, s)];
                if let Some(k) = self.config.intermediate_every {
                    self.chunk[bin] += 1;
                    self.chunk_len += 1;
                    if self.chunk_len == k {
                        let mut rng =
                            interval_rng(self.config.seed, self.interval, 1 + self.chunk_ordinal);
                        let ws = window_score(
                            &self.predictive,
                            &self.chunk,
                            k,
                            eps,
                            self.config.mc_samples,
                            &mut rng,
                        )?;
                        out.push(AnomalyScore::window_only(self.interval, ws));
                        for b in self.chunk.iter_mut() {
                            *b = 0;
                        }
                        self.chunk_len = 0;
                        self.chunk_ordinal += 1;
                    }
                }
                Ok(out)
            }
            (DetectorMode::Finite, StreamInput::WindowClose) => {
                if self.buffered == 0 {
                    // Empty window: no score, carry the previous observation
                    // forward through the recurrence.
                    let z = self.last_z.clone();
                    self.advance(model, z)?;
                    return Ok(Vec::new());
                }
                let mut rng = interval_rng(self.config.seed, self.interval, 0);
                let ws = window_score(
                    &self.predictive,
                    &self.buffer,
                    self.buffered,
                    eps,
                    self.config.mc_samples,
                    &mut rng,
                )?;
                let point = self.last_point.expect("events were buffered");
                let score = AnomalyScore::close(self.interval, point, ws);
                let n = self.buffered;
                let z: Vec<f64> = self.buffer.iter().map(|&c| c as f64 / n as f64).collect();
                self.advance(model, z)?;
                Ok(vec![score])
            }
            (DetectorMode::Finite, StreamInput::Distribution(_)) => Err(Error::invalid(
                "finite detector consumes events and window closes",
            )),
        }
    }
}

/// One interval of batch-detector input.
#[derive(Debug, Clone)]
pub enum IntervalInput {
    /// Raw event values in arrival order (finite and single modes).
    Samples(Vec<f64>),
    /// Probability vector on the detector grid (asymptotic mode).
    Probs(Vec<f64>),
    /// An empty aggregation window.
    Missing,
}

impl IntervalInput {
    fn realized_z(&self, grid: &BinGrid, mode: DetectorMode) -> Result<Option<Vec<f64>>> {
        match self {
            IntervalInput::Missing => Ok(None),
            IntervalInput::Probs(p) => {
                if mode != DetectorMode::Asymptotic {
                    return Err(Error::invalid("probability input in a sample-mode run"));
                }
                Ok(Some(p.clone()))
            }
            IntervalInput::Samples(vs) => {
                if mode == DetectorMode::Asymptotic {
                    return Err(Error::invalid("sample input in an asymptotic run"));
                }
                if vs.is_empty() {
                    return Ok(None);
                }
                let mut counts = vec![0u64; grid.bin_count()];
                for &v in vs {
                    counts[grid.bin_index(v)] += 1;
                }
                let n = vs.len() as f64;
                Ok(Some(counts.iter().map(|&c| c as f64 / n).collect()))
            }
        }
    }
}

/// Batch detection over a whole recorded series. The state is rolled from
/// interval 0; scores are emitted for intervals >= score_from. Produces the
/// same score sequence as feeding the series through [`Detector`] event by
/// event.
pub fn detect_batch(
    model: &ModelParams,
    grid: &BinGrid,
    config: &DetectorConfig,
    cov: CovariateSpec,
    intervals: &[IntervalInput],
    score_from: usize,
) -> Result<Vec<AnomalyScore>> {
    if intervals.len() < 2 {
        return Err(Error::invalid("batch detection needs at least 2 intervals"));
    }
    let z0 = IntervalInput::realized_z(&intervals[0], grid, config.mode)?
        .ok_or_else(|| Error::invalid("first interval must be observed"))?;
    let arch = model.arch();
    let h0 = HiddenState::zeros(&arch);
    let (mut state, mut predictive) = step(model, &h0, &z0, &cov.row(1))?;
    let mut last_z = z0;
    let mut out = Vec::new();

    for (t, input) in intervals.iter().enumerate().skip(1) {
        let t_u = t as u64;
        let scoring = t >= score_from.max(1);
        match (config.mode, input) {
            (DetectorMode::Asymptotic, IntervalInput::Probs(p)) => {
                if scoring {
                    let mut rng = interval_rng(config.seed, t_u, 0);
                    let s =
                        asymptotic_score(&predictive, p, config.epsilon, config.mc_samples, &mut rng)?;
                    out.push(AnomalyScore::window_only(t_u, s));
                }
            }
            (DetectorMode::Single, IntervalInput::Samples(vs)) if vs.len() <= 1 => {
                if scoring {
                    if let Some(&v) = vs.first() {
                        let bin = grid.bin_index(v);
                        let s = point_score(&predictive, bin, config.epsilon)?;
                        out.push(AnomalyScore::point_only(t_u, s));
                    }
                }
            }
            (DetectorMode::Single, IntervalInput::Samples(_)) => {
                return Err(Error::invalid(
                    "single mode expects at most one sample per interval",
                ));
            }
            (DetectorMode::Finite, IntervalInput::Samples(vs)) if !vs.is_empty() => {
                if scoring {
                    let mut counts = vec![0u64; grid.bin_count()];
                    let mut chunk = vec![0u64; grid.bin_count()];
                    let mut chunk_len = 0u64;
                    let mut chunk_ordinal = 0u64;
                    let mut last_point = None;
                    for &v in vs {
                        let bin = grid.bin_index(v);
                        let s = point_score(&predictive, bin, config.epsilon)?;
                        last_point = Some(s);
                        counts[bin] += 1;
                        out.push(AnomalyScore::point_only(t_u, s));
                        if let Some(k) = config.intermediate_every {
                            chunk[bin] += 1;
                            chunk_len += 1;
                            if chunk_len == k {
                                let mut rng = interval_rng(config.seed, t_u, 1 + chunk_ordinal);
                                let ws = window_score(
                                    &predictive,
                                    &chunk,
                                    k,
                                    config.epsilon,
                                    config.mc_samples,
                                    &mut rng,
                                )?;
                                out.push(AnomalyScore::window_only(t_u, ws));
                                chunk.iter_mut().for_each(|b| *b = 0);
                                chunk_len = 0;
                                chunk_ordinal += 1;
                            }
                        }
                    }
                    let mut rng = interval_rng(config.seed, t_u, 0);
                    let ws = window_score(
                        &predictive,
                        &counts,
                        vs.len() as u64,
                        config.epsilon,
                        config.mc_samples,
                        &mut rng,
                    )?;
                    out.push(AnomalyScore::close(t_u, last_point.unwrap(), ws));
                }
            }
            (_, IntervalInput::Missing) | (DetectorMode::Finite, IntervalInput::Samples(_)) => {
                // Empty interval: carry state forward below, no scores.
            }
            _ => return Err(Error::invalid("input kind does not match detector mode")),
        }
        if let Some(z) = IntervalInput::realized_z(input, grid, config.mode)? {
            last_z = z;
        }
        let (s2, p2) = step(model, &state, &last_z, &cov.row(t_u + 1))?;
        state = s2;
        predictive = p2;
    }
    Ok(out)
}
