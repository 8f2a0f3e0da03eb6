//! Synthetic benchmark generators: seasonal Gaussian dynamics with injected
//! malfunctions and ground-truth labels.
//!
//! Per interval t, mu_t = sin(2 pi t / P), sigma_t = 1, and an iid noise term
//! eps_t ~ N(0, noise_scale) perturbs either the mean (DS1) or the standard
//! deviation (DS2). In the detection range a malfunction is injected
//! independently per interval with the configured probability: a mean shift
//! or a standard-deviation collapse.

use crate::error::{Error, Result};
use crate::grid::{bin_samples, quantile_levels, BinGrid, BinnedObservation};
use crate::numeric::{gaussian_bin_mass, normal_cdf, normal_quantile, normal_sf};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Floor applied to asymptotic bin probabilities so log-likelihoods of
/// arbitrarily extreme observations stay finite.
const PROB_FLOOR: f64 = 1e-300;

/// Exact N(mu, sigma^2) bin masses on a grid, with out-of-support mass
/// absorbed into the edge bins (the clamping convention) and a tiny floor
/// keeping every bin strictly positive.
pub fn gaussian_binned_probs(grid: &BinGrid, mu: f64, sigma: f64) -> Vec<f64> {
    let knots = grid.knots();
    let d = grid.bin_count();
    let mut probs = Vec::with_capacity(d);
    for k in 0..d {
        let mass = if k == 0 {
            normal_cdf((knots[1] - mu) / sigma)
        } else if k == d - 1 {
            normal_sf((knots[d - 1] - mu) / sigma)
        } else {
            gaussian_bin_mass(knots[k], knots[k + 1], mu, sigma)
        };
        probs.push(mass.max(PROB_FLOOR));
    }
    probs
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dynamics {
    /// Noise on the mean: F_t = N(mu_t + eps_t, sigma_t).
    Ds1,
    /// Noise on the deviation: F_t = N(mu_t, sigma_t + eps_t).
    Ds2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Malfunction {
    None,
    /// Sudden distributional shift: adds mu_shift to the mean.
    MuShift,
    /// Distributional collapse: removes sigma_drop from the deviation.
    SigmaCollapse,
}

/// How each interval is emitted.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SampleCount {
    /// The exact CDF on a quantile grid, as if n_t were unbounded.
    Asymptotic,
    /// n_t iid draws per interval.
    Finite(u64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub dynamics: Dynamics,
    pub malfunction: Malfunction,
    /// Seasonality period P.
    pub period: u64,
    /// Learning range length T.
    pub learn_len: usize,
    /// Detection range length D.
    pub detect_len: usize,
    /// Per-interval malfunction probability in the detection range.
    pub anomaly_prob: f64,
    pub sample_count: SampleCount,
    /// Standard deviation of the noise term eps_t.
    pub noise_scale: f64,
    /// Mean shift applied by MuShift.
    pub mu_shift: f64,
    /// Deviation removed by SigmaCollapse.
    pub sigma_drop: f64,
    /// Number of quantile points emitted in asymptotic mode.
    pub quantile_points: usize,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            dynamics: Dynamics::Ds1,
            malfunction: Malfunction::None,
            period: 24,
            learn_len: 1500,
            detect_len: 2000,
            anomaly_prob: 0.03,
            sample_count: SampleCount::Finite(60),
            noise_scale: 0.1,
            mu_shift: 1.0,
            sigma_drop: 0.5,
            quantile_points: 1000,
            seed: 0,
        }
    }
}

impl SynthConfig {
    fn validate(&self) -> Result<()> {
        if !(self.anomaly_prob > 0.0 && self.anomaly_prob < 1.0)
            && self.malfunction != Malfunction::None
        {
            return Err(Error::invalid("anomaly_prob must be in (0,1)"));
        }
        if self.learn_len == 0 || self.detect_len == 0 || self.period == 0 {
            return Err(Error::invalid("lengths must be positive"));
        }
        if self.noise_scale <= 0.0 {
            return Err(Error::invalid("noise_scale must be positive"));
        }
        if let SampleCount::Finite(0) = self.sample_count {
            return Err(Error::invalid("sample count must be positive"));
        }
        if self.sample_count == SampleCount::Asymptotic && self.quantile_points < 2 {
            return Err(Error::invalid("need at least 2 quantile points"));
        }
        Ok(())
    }
}

/// One generated interval with its audit trail.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthInterval {
    /// Raw samples (finite mode).
    pub samples: Option<Vec<f64>>,
    /// Exact-CDF quantile values at the series' quantile levels (asymptotic).
    pub quantiles: Option<Vec<f64>>,
    pub malfunction: bool,
    pub mu: f64,
    pub sigma: f64,
    pub eps: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSeries {
    pub intervals: Vec<SynthInterval>,
    pub learn_len: usize,
    pub noise_scale: f64,
    /// Quantile levels for asymptotic emissions; empty in finite mode.
    pub levels: Vec<f64>,
}

pub fn generate(config: &SynthConfig) -> Result<LabeledSeries> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let total = config.learn_len + config.detect_len;
    let levels = match config.sample_count {
        SampleCount::Asymptotic => quantile_levels(config.quantile_points),
        SampleCount::Finite(_) => Vec::new(),
    };
    let zs: Vec<f64> = levels.iter().map(|&q| normal_quantile(q)).collect();
    let tau = 2.0 * std::f64::consts::PI;
    let mut intervals = Vec::with_capacity(total);
    for t in 0..total {
        let mu_t = (tau * t as f64 / config.period as f64).sin();
        let sigma_t = 1.0;
        let eps: f64 = config.noise_scale * rng.sample::<f64, _>(StandardNormal);
        let (mut mu, mut sigma) = match config.dynamics {
            Dynamics::Ds1 => (mu_t + eps, sigma_t),
            Dynamics::Ds2 => (mu_t, sigma_t + eps),
        };
        let malfunction = t >= config.learn_len
            && config.malfunction != Malfunction::None
            && rng.gen::<f64>() < config.anomaly_prob;
        if malfunction {
            match config.malfunction {
                Malfunction::MuShift => mu += config.mu_shift,
                Malfunction::SigmaCollapse => sigma -= config.sigma_drop,
                Malfunction::None => unreachable!(),
            }
        }
        if sigma <= 0.0 {
            return Err(Error::invalid(format!(
                "non-positive deviation {sigma} at interval {t}"
            )));
        }
        let (samples, quantiles) = match config.sample_count {
            SampleCount::Finite(n) => {
                let s: Vec<f64> = (0..n)
                    .map(|_| mu + sigma * rng.sample::<f64, _>(StandardNormal))
                    .collect();
                (Some(s), None)
            }
            SampleCount::Asymptotic => {
                let q: Vec<f64> = zs.iter().map(|&z| mu + sigma * z).collect();
                (None, Some(q))
            }
        };
        intervals.push(SynthInterval {
            samples,
            quantiles,
            malfunction,
            mu,
            sigma,
            eps,
        });
    }
    Ok(LabeledSeries {
        intervals,
        learn_len: config.learn_len,
        noise_scale: config.noise_scale,
        levels,
    })
}

/// Intervals whose noise term falls outside its own 95% band; these are the
/// expected false positives. Malfunction intervals are excluded.
pub fn statistical_anomaly_labels(series: &LabeledSeries) -> Vec<bool> {
    let bound = 1.96 * series.noise_scale;
    series
        .intervals
        .iter()
        .map(|iv| !iv.malfunction && iv.eps.abs() > bound)
        .collect()
}

impl LabeledSeries {
    pub fn len(&self) -> usize {
        self.intervals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.intervals.is_empty()
    }

    pub fn labels(&self) -> Vec<bool> {
        self.intervals.iter().map(|iv| iv.malfunction).collect()
    }

    /// Value range over the learning range, for support estimation.
    pub fn training_value_range(&self) -> (f64, f64) {
        let mut min = f64::INFINITY;
        let mut max = f64::NEG_INFINITY;
        for iv in &self.intervals[..self.learn_len] {
            let it: Box<dyn Iterator<Item = &f64>> = match (&iv.samples, &iv.quantiles) {
                (Some(s), _) => Box::new(s.iter()),
                (_, Some(q)) => Box::new(q.iter()),
                _ => Box::new(std::iter::empty()),
            };
            for &v in it {
                min = min.min(v);
                max = max.max(v);
            }
        }
        (min, max)
    }

    /// All raw samples in the learning range, for quantile-grid construction.
    pub fn pooled_training_samples(&self) -> Vec<f64> {
        self.intervals[..self.learn_len]
            .iter()
            .filter_map(|iv| iv.samples.as_ref())
            .flatten()
            .cloned()
            .collect()
    }

    /// Bin every interval onto a grid: counts in finite mode, exact Gaussian
    /// bin masses in asymptotic mode (the idealization of an unbounded
    /// per-interval sample count).
    pub fn to_observations(&self, grid: &BinGrid) -> Result<Vec<BinnedObservation>> {
        self.intervals
            .iter()
            .enumerate()
            .map(|(t, iv)| {
                let obs = match &iv.samples {
                    Some(s) => bin_samples(s, grid)?,
                    None => {
                        BinnedObservation::from_probs(gaussian_binned_probs(grid, iv.mu, iv.sigma))?
                    }
                };
                Ok(obs.with_interval(t as u64))
            })
            .collect()
    }

    /// Batch-detector inputs: ordered samples or probability vectors.
    pub fn to_interval_inputs(&self, grid: &BinGrid) -> Result<Vec<crate::detect::IntervalInput>> {
        Ok(self
            .intervals
            .iter()
            .map(|iv| match &iv.samples {
                Some(s) => crate::detect::IntervalInput::Samples(s.clone()),
                None => {
                    crate::detect::IntervalInput::Probs(gaussian_binned_probs(grid, iv.mu, iv.sigma))
                }
            })
            .collect())
    }
}
