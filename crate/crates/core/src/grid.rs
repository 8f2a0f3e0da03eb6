//! Bin grids, sample binning, piecewise-linear CDFs and event aggregation.
//!
//! A grid divides the support [y_min, y_max] into d bins with knots
//! a_0 < a_1 < ... < a_d. Bins are half-open [a_{k-1}, a_k) with the last bin
//! closed at a_d; values outside the support are clamped into the edge bins.

use crate::error::{Error, Result};

/// Fractional margin added on each side when deriving support bounds from
/// observed training extremes.
pub const DEFAULT_SUPPORT_MARGIN: f64 = 0.05;

/// Widen an observed value range into support bounds.
pub fn support_bounds(min: f64, max: f64, margin: f64) -> (f64, f64) {
    let range = (max - min).max(f64::MIN_POSITIVE);
    (min - margin * range, max + margin * range)
}

/// Regularly spaced quantile levels j/(k+1), j = 1..=k. Never 0 or 1.
pub fn quantile_levels(k: usize) -> Vec<f64> {
    (1..=k).map(|j| j as f64 / (k as f64 + 1.0)).collect()
}

/// The knot vector partitioning the support into bins.
#[derive(Debug, Clone, PartialEq)]
pub struct BinGrid {
    knots: Vec<f64>,
}

impl BinGrid {
    /// Build a grid from an explicit knot vector, which must be finite and
    /// strictly increasing with at least two bins.
    pub fn from_knots(knots: Vec<f64>) -> Result<Self> {
        if knots.len() < 3 {
            return Err(Error::invalid("grid needs at least 2 bins (3 knots)"));
        }
        if knots.iter().any(|k| !k.is_finite()) {
            return Err(Error::invalid("grid knots must be finite"));
        }
        if knots.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::invalid("grid knots must be strictly increasing"));
        }
        Ok(BinGrid { knots })
    }

    /// Regular grid with d equal bins on [y_min, y_max].
    pub fn regular(y_min: f64, y_max: f64, d: usize) -> Result<Self> {
        if !y_min.is_finite() || !y_max.is_finite() {
            return Err(Error::invalid("support bounds must be finite"));
        }
        if y_min >= y_max {
            return Err(Error::invalid(format!(
                "y_min must be < y_max, got [{y_min}, {y_max}]"
            )));
        }
        if d < 2 {
            return Err(Error::invalid(format!("bin count must be >= 2, got {d}")));
        }
        let width = (y_max - y_min) / d as f64;
        let mut knots: Vec<f64> = (0..=d).map(|k| y_min + k as f64 * width).collect();
        // Pin the endpoints exactly.
        knots[0] = y_min;
        knots[d] = y_max;
        BinGrid::from_knots(knots)
    }

    /// Grid whose interior knots follow the empirical quantiles of the pooled
    /// training data at levels k/d, with endpoints forced to the support.
    ///
    /// Duplicate knots are merged; the bin count is then restored by
    /// repeatedly splitting the widest remaining gap at its midpoint, which
    /// keeps the construction deterministic.
    pub fn from_quantiles(pooled: &[f64], d: usize, support: (f64, f64)) -> Result<Self> {
        let (y_min, y_max) = support;
        if !y_min.is_finite() || !y_max.is_finite() || y_min >= y_max {
            return Err(Error::invalid("invalid support bounds"));
        }
        if d < 2 {
            return Err(Error::invalid(format!("bin count must be >= 2, got {d}")));
        }
        let mut vals: Vec<f64> = pooled
            .iter()
            .filter(|v| v.is_finite())
            .map(|v| v.clamp(y_min, y_max))
            .collect();
        if vals.is_empty() {
            return Err(Error::DegenerateGrid("no finite pooled samples".into()));
        }
        vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mut distinct = 1usize;
        for w in vals.windows(2) {
            if w[1] > w[0] {
                distinct += 1;
            }
        }
        if distinct < d + 1 {
            return Err(Error::DegenerateGrid(format!(
                "need at least {} distinct pooled values, found {distinct}",
                d + 1
            )));
        }

        let mut interior: Vec<f64> = (1..d)
            .map(|k| empirical_quantile(&vals, k as f64 / d as f64))
            .filter(|q| *q > y_min && *q < y_max)
            .collect();
        interior.sort_by(|a, b| a.partial_cmp(b).unwrap());
        interior.dedup();

        // Restore any bins lost to deduplication or endpoint clamping.
        let mut knots = Vec::with_capacity(d + 1);
        knots.push(y_min);
        knots.extend(interior);
        knots.push(y_max);
        while knots.len() < d + 1 {
            let (mut widest, mut at) = (f64::NEG_INFINITY, 0);
            for i in 0..knots.len() - 1 {
                let gap = knots[i + 1] - knots[i];
                if gap > widest {
                    widest = gap;
                    at = i;
                }
            }
            let mid = 0.5 * (knots[at] + knots[at + 1]);
            if !(knots[at] < mid && mid < knots[at + 1]) {
                return Err(Error::DegenerateGrid(
                    "cannot split gap below float resolution".into(),
                ));
            }
            knots.insert(at + 1, mid);
        }
        BinGrid::from_knots(knots)
    }

    pub fn bin_count(&self) -> usize {
        self.knots.len() - 1
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn support(&self) -> (f64, f64) {
        (self.knots[0], *self.knots.last().unwrap())
    }

    /// Bin index for a value: half-open bins, last bin closed, out-of-support
    /// values clamped into the edge bins.
    pub fn bin_index(&self, y: f64) -> usize {
        let d = self.bin_count();
        if y < self.knots[0] {
            return 0;
        }
        if y >= self.knots[d] {
            return d - 1;
        }
        // Largest k with knots[k] <= y.
        let k = self.knots.partition_point(|a| *a <= y) - 1;
        k.min(d - 1)
    }
}

/// Type-7 empirical quantile (linear interpolation between order statistics).
fn empirical_quantile(sorted: &[f64], level: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = (n - 1) as f64 * level;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    let frac = h - lo as f64;
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}

/// One interval's observation: either a count vector over the grid's bins
/// (finite sample regime) or a probability vector (asymptotic regime).
#[derive(Debug, Clone, PartialEq)]
pub struct BinnedObservation {
    pub interval_index: u64,
    data: ObservationData,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ObservationData {
    Counts { counts: Vec<u64>, n: u64 },
    Probs(Vec<f64>),
}

impl BinnedObservation {
    pub fn from_counts(counts: Vec<u64>) -> Result<Self> {
        let n: u64 = counts.iter().sum();
        if n == 0 {
            return Err(Error::invalid("count vector must contain at least one sample"));
        }
        Ok(BinnedObservation {
            interval_index: 0,
            data: ObservationData::Counts { counts, n },
        })
    }

    pub fn from_probs(probs: Vec<f64>) -> Result<Self> {
        if probs.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(Error::invalid("probabilities must be finite and non-negative"));
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::invalid(format!(
                "probability vector sums to {sum}, expected 1 within 1e-9"
            )));
        }
        Ok(BinnedObservation {
            interval_index: 0,
            data: ObservationData::Probs(probs),
        })
    }

    pub fn with_interval(mut self, t: u64) -> Self {
        self.interval_index = t;
        self
    }

    pub fn data(&self) -> &ObservationData {
        &self.data
    }

    pub fn dim(&self) -> usize {
        match &self.data {
            ObservationData::Counts { counts, .. } => counts.len(),
            ObservationData::Probs(p) => p.len(),
        }
    }

    pub fn is_asymptotic(&self) -> bool {
        matches!(self.data, ObservationData::Probs(_))
    }

    pub fn counts(&self) -> Option<(&[u64], u64)> {
        match &self.data {
            ObservationData::Counts { counts, n } => Some((counts, *n)),
            ObservationData::Probs(_) => None,
        }
    }

    pub fn probs(&self) -> Option<&[f64]> {
        match &self.data {
            ObservationData::Probs(p) => Some(p),
            ObservationData::Counts { .. } => None,
        }
    }

    /// The shared model input encoding: normalized frequencies in the finite
    /// regime, the probability vector itself in the asymptotic regime.
    pub fn frequency_vector(&self) -> Vec<f64> {
        match &self.data {
            ObservationData::Counts { counts, n } => {
                counts.iter().map(|&c| c as f64 / *n as f64).collect()
            }
            ObservationData::Probs(p) => p.clone(),
        }
    }
}

/// Bin raw samples onto a grid. Conservation: the counts always sum to the
/// number of samples.
pub fn bin_samples(samples: &[f64], grid: &BinGrid) -> Result<BinnedObservation> {
    if samples.is_empty() {
        return Err(Error::invalid("cannot bin an empty sample set"));
    }
    if samples.iter().any(|s| !s.is_finite()) {
        return Err(Error::invalid("samples must be finite"));
    }
    let mut counts = vec![0u64; grid.bin_count()];
    for &s in samples {
        counts[grid.bin_index(s)] += 1;
    }
    BinnedObservation::from_counts(counts)
}

/// A piecewise-linear CDF on a grid: non-decreasing with endpoints exactly 0
/// and 1.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseLinearCdf {
    grid: BinGrid,
    cum: Vec<f64>,
}

impl PiecewiseLinearCdf {
    pub fn new(grid: BinGrid, cum: Vec<f64>) -> Result<Self> {
        if cum.len() != grid.bin_count() + 1 {
            return Err(Error::invalid("cum vector length must equal knot count"));
        }
        if cum[0] != 0.0 || *cum.last().unwrap() != 1.0 {
            return Err(Error::invalid("cum must start at exactly 0 and end at exactly 1"));
        }
        if cum.iter().any(|c| !c.is_finite()) || cum.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::invalid("cum must be finite and non-decreasing"));
        }
        Ok(PiecewiseLinearCdf { grid, cum })
    }

    /// Resample a distribution given as (level, value) quantile pairs onto a
    /// grid.
    ///
    /// The interpolation is anchored at (y_min, 0) and (y_max, 1), so
    /// probability mass beyond the extreme quantile points is spread linearly
    /// toward the support edges, and mass outside the support is clamped into
    /// the edge bins.
    pub fn from_quantiles(grid: &BinGrid, levels: &[f64], values: &[f64]) -> Result<Self> {
        if levels.len() != values.len() || levels.is_empty() {
            return Err(Error::invalid("levels and values must be equal-length and non-empty"));
        }
        if levels.windows(2).any(|w| w[1] <= w[0])
            || levels[0] <= 0.0
            || *levels.last().unwrap() >= 1.0
        {
            return Err(Error::invalid("levels must be strictly increasing inside (0,1)"));
        }
        if values.iter().any(|v| !v.is_finite()) || values.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::invalid("values must be finite and non-decreasing"));
        }
        let (y_min, y_max) = grid.support();
        let mut xs: Vec<f64> = Vec::with_capacity(values.len() + 2);
        let mut qs: Vec<f64> = Vec::with_capacity(values.len() + 2);
        if values[0] > y_min {
            xs.push(y_min);
            qs.push(0.0);
        }
        xs.extend_from_slice(values);
        qs.extend_from_slice(levels);
        if *values.last().unwrap() < y_max {
            xs.push(y_max);
            qs.push(1.0);
        }

        let d = grid.bin_count();
        let mut cum = Vec::with_capacity(d + 1);
        cum.push(0.0);
        for k in 1..d {
            let v = interp_lower(&xs, &qs, grid.knots()[k]).clamp(0.0, 1.0);
            let prev = *cum.last().unwrap();
            cum.push(v.max(prev));
        }
        cum.push(1.0);
        PiecewiseLinearCdf::new(grid.clone(), cum)
    }

    pub fn grid(&self) -> &BinGrid {
        &self.grid
    }

    pub fn cum(&self) -> &[f64] {
        &self.cum
    }
}

/// Piecewise-linear evaluation at x. At a jump (duplicated xs) the lower
/// branch is taken, so point mass sitting exactly on a knot lands in the bin
/// to its right, matching the half-open convention.
fn interp_lower(xs: &[f64], qs: &[f64], x: f64) -> f64 {
    if x <= xs[0] {
        return if x == xs[0] { qs[0] } else { 0.0 };
    }
    if x >= *xs.last().unwrap() {
        if x == *xs.last().unwrap() {
            // Lower branch of a terminal jump.
            let first = xs.iter().position(|&v| v == x).unwrap();
            return qs[first];
        }
        return *qs.last().unwrap();
    }
    let i = xs.partition_point(|&v| v < x);
    // xs[i-1] < x <= xs[i]
    if xs[i] == x {
        return qs[xs.iter().position(|&v| v == x).unwrap()];
    }
    let (x0, x1) = (xs[i - 1], xs[i]);
    let (q0, q1) = (qs[i - 1], qs[i]);
    q0 + (q1 - q0) * (x - x0) / (x1 - x0)
}

/// Bin probabilities p_k = F(a_k) - F(a_{k-1}) from a piecewise-linear CDF.
/// The CDF must live on the supplied grid.
pub fn cdf_to_probs(cdf: &PiecewiseLinearCdf, grid: &BinGrid) -> Result<BinnedObservation> {
    if cdf.grid() != grid {
        return Err(Error::invalid("CDF grid does not match the target grid"));
    }
    let probs: Vec<f64> = cdf.cum.windows(2).map(|w| (w[1] - w[0]).max(0.0)).collect();
    BinnedObservation::from_probs(probs)
}

/// Stateful aggregator assigning (timestamp, value) events to fixed-size
/// windows: window w covers timestamps [w*window, (w+1)*window).
///
/// Events may arrive out of order by at most `reorder_slack` seconds behind
/// the newest timestamp seen; anything older is rejected as a late event. A
/// window is emitted once the watermark (newest timestamp minus slack) passes
/// its end; empty windows between emitted windows are emitted with empty
/// sample vectors.
#[derive(Debug)]
pub struct EventAggregator {
    window: u64,
    reorder_slack: u64,
    pending: Vec<(i64, f64)>,
    max_ts: Option<i64>,
    next_window: Option<i64>,
}

impl EventAggregator {
    pub fn new(window_secs: u64, reorder_slack_secs: u64) -> Result<Self> {
        if window_secs == 0 {
            return Err(Error::invalid("window duration must be positive"));
        }
        Ok(EventAggregator {
            window: window_secs,
            reorder_slack: reorder_slack_secs,
            pending: Vec::new(),
            max_ts: None,
            next_window: None,
        })
    }

    fn window_of(&self, ts: i64) -> i64 {
        ts.div_euclid(self.window as i64)
    }

    /// Feed one event; returns any windows completed by the advancing
    /// watermark, in order.
    pub fn push(&mut self, ts: i64, value: f64) -> Result<Vec<(i64, Vec<f64>)>> {
        if let Some(max_ts) = self.max_ts {
            let watermark = max_ts.saturating_sub(self.reorder_slack as i64);
            if ts < watermark {
                return Err(Error::LateEvent {
                    timestamp: ts,
                    value,
                    watermark,
                });
            }
        }
        self.max_ts = Some(self.max_ts.map_or(ts, |m| m.max(ts)));
        if self.next_window.is_none() {
            self.next_window = Some(self.window_of(ts));
        }
        let idx = self
            .pending
            .partition_point(|(t, _)| *t <= ts);
        self.pending.insert(idx, (ts, value));
        Ok(self.drain_complete())
    }

    fn drain_complete(&mut self) -> Vec<(i64, Vec<f64>)> {
        let mut out = Vec::new();
        let watermark = match self.max_ts {
            Some(m) => m.saturating_sub(self.reorder_slack as i64),
            None => return out,
        };
        while let Some(w) = self.next_window {
            let end = (w + 1) * self.window as i64;
            if watermark < end {
                break;
            }
            out.push((w, self.take_window(w)));
            self.next_window = Some(w + 1);
        }
        out
    }

    fn take_window(&mut self, w: i64) -> Vec<f64> {
        let end = (w + 1) * self.window as i64;
        let split = self.pending.partition_point(|(t, _)| *t < end);
        self.pending.drain(..split).map(|(_, v)| v).collect()
    }

    /// Flush every remaining window, including trailing empties up to the
    /// window containing the newest event.
    pub fn finish(mut self) -> Vec<(i64, Vec<f64>)> {
        let mut out = Vec::new();
        let last = match self.max_ts {
            Some(m) => self.window_of(m),
            None => return out,
        };
        while let Some(w) = self.next_window {
            if w > last {
                break;
            }
            out.push((w, self.take_window(w)));
            self.next_window = Some(w + 1);
        }
        out
    }
}

/// One-shot aggregation of an event sequence into windows.
pub fn aggregate_events(
    events: impl IntoIterator<Item = (i64, f64)>,
    window_secs: u64,
    reorder_slack_secs: u64,
) -> Result<Vec<(i64, Vec<f64>)>> {
    let mut agg = EventAggregator::new(window_secs, reorder_slack_secs)?;
    let mut out = Vec::new();
    for (ts, v) in events {
        out.extend(agg.push(ts, v)?);
    }
    out.extend(agg.finish());
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::{gaussian_bin_mass, normal_cdf, normal_quantile};
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    #[test]
    fn regular_grid_uniform_spacing() {
        let g = BinGrid::regular(0.0, 1.0, 4).unwrap();
        assert_eq!(g.knots(), &[0.0, 0.25, 0.5, 0.75, 1.0]);
        let g = BinGrid::regular(-2.0, 2.0, 4).unwrap();
        assert_eq!(g.knots(), &[-2.0, -1.0, 0.0, 1.0, 2.0]);
    }

    #[test]
    fn regular_grid_rejects_bad_input() {
        assert!(BinGrid::regular(0.0, 1.0, 1).is_err());
        assert!(BinGrid::regular(1.0, 0.0, 4).is_err());
        assert!(BinGrid::regular(0.0, 0.0, 4).is_err());
        assert!(BinGrid::regular(f64::NAN, 1.0, 4).is_err());
        assert!(BinGrid::regular(f64::NEG_INFINITY, 1.0, 4).is_err());
    }

    #[test]
    fn quantile_grid_median_of_five() {
        let g = BinGrid::from_quantiles(&[0.0, 0.25, 0.5, 0.75, 1.0], 2, (0.0, 1.0)).unwrap();
        assert_eq!(g.knots(), &[0.0, 0.5, 1.0]);
    }

    #[test]
    fn quantile_grid_all_equal_rejected() {
        let vals = vec![3.0; 100];
        match BinGrid::from_quantiles(&vals, 4, (0.0, 10.0)) {
            Err(Error::DegenerateGrid(_)) => {}
            other => panic!("expected degenerate-grid error, got {other:?}"),
        }
    }

    #[test]
    fn quantile_grid_recovers_mixture_deciles() {
        // Oracle: analytic quantiles of an equal-weight two-Gaussian mixture,
        // solved by bisection on the mixture CDF.
        let mix_cdf =
            |x: f64| 0.5 * normal_cdf((x + 0.1) / 0.12) + 0.5 * normal_cdf((x - 0.15) / 0.15);
        let mix_quantile = |p: f64| {
            let (mut lo, mut hi) = (-10.0, 10.0);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if mix_cdf(mid) < p {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            0.5 * (lo + hi)
        };
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let samples: Vec<f64> = (0..10_000)
            .map(|_| {
                if rng.gen_bool(0.5) {
                    -0.1 + 0.12 * rng.sample::<f64, _>(rand_distr::StandardNormal)
                } else {
                    0.15 + 0.15 * rng.sample::<f64, _>(rand_distr::StandardNormal)
                }
            })
            .collect();
        let d = 10;
        let g = BinGrid::from_quantiles(&samples, d, (-2.0, 2.0)).unwrap();
        for k in 1..d {
            let want = mix_quantile(k as f64 / d as f64);
            let got = g.knots()[k];
            assert!(
                (got - want).abs() < 0.01,
                "decile {k}: got {got}, oracle {want}"
            );
        }
    }

    #[test]
    fn quantile_grid_uniform_converges_to_regular() {
        // Dvoretzky-type bound: max knot error <= 3/sqrt(N) at N = 1e5.
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let n = 100_000usize;
        let samples: Vec<f64> = (0..n).map(|_| rng.gen::<f64>()).collect();
        let d = 10;
        let g = BinGrid::from_quantiles(&samples, d, (0.0, 1.0)).unwrap();
        let bound = 3.0 / (n as f64).sqrt();
        for k in 1..d {
            let want = k as f64 / d as f64;
            assert!(
                (g.knots()[k] - want).abs() <= bound,
                "knot {k} off by {}",
                (g.knots()[k] - want).abs()
            );
        }
    }

    #[test]
    fn bin_samples_placement_and_clamping() {
        let g = BinGrid::regular(0.0, 1.0, 4).unwrap();
        let obs = bin_samples(&[0.1, 0.6, 0.6, 0.9], &g).unwrap();
        assert_eq!(obs.counts().unwrap().0, &[1, 0, 2, 1]);
        // Last bin is closed at the upper support bound.
        let obs = bin_samples(&[1.0], &g).unwrap();
        assert_eq!(obs.counts().unwrap().0, &[0, 0, 0, 1]);
        // Out-of-support values clamp into the edge bins.
        let obs = bin_samples(&[-5.0, 7.0], &g).unwrap();
        assert_eq!(obs.counts().unwrap().0, &[1, 0, 0, 1]);
        assert!(bin_samples(&[], &g).is_err());
    }

    #[test]
    fn knot_values_go_right() {
        let g = BinGrid::regular(0.0, 1.0, 4).unwrap();
        assert_eq!(g.bin_index(0.25), 1);
        assert_eq!(g.bin_index(0.0), 0);
        assert_eq!(g.bin_index(0.75), 3);
    }

    #[test]
    fn cdf_to_probs_basics() {
        let g = BinGrid::regular(0.0, 1.0, 4).unwrap();
        let cdf = PiecewiseLinearCdf::new(g.clone(), vec![0.0, 0.25, 0.5, 0.75, 1.0]).unwrap();
        let obs = cdf_to_probs(&cdf, &g).unwrap();
        assert_eq!(obs.probs().unwrap(), &[0.25, 0.25, 0.25, 0.25]);

        let cdf = PiecewiseLinearCdf::new(g.clone(), vec![0.0, 0.0, 0.0, 0.0, 1.0]).unwrap();
        let obs = cdf_to_probs(&cdf, &g).unwrap();
        assert_eq!(obs.probs().unwrap(), &[0.0, 0.0, 0.0, 1.0]);

        let other = BinGrid::regular(0.0, 2.0, 4).unwrap();
        assert!(cdf_to_probs(&cdf, &other).is_err());
    }

    #[test]
    fn cdf_to_probs_matches_gaussian_masses() {
        // Standard-normal CDF evaluated at the knots of a regular d=30 grid
        // on [-4, 4]; bin masses must match the error-function oracle.
        let g = BinGrid::regular(-4.0, 4.0, 30).unwrap();
        let mut cum: Vec<f64> = g.knots().iter().map(|&a| normal_cdf(a)).collect();
        // Renormalize onto the support to satisfy the endpoint invariant.
        let (lo, hi) = (cum[0], cum[30]);
        for c in cum.iter_mut() {
            *c = (*c - lo) / (hi - lo);
        }
        cum[0] = 0.0;
        cum[30] = 1.0;
        let cdf = PiecewiseLinearCdf::new(g.clone(), cum).unwrap();
        let obs = cdf_to_probs(&cdf, &g).unwrap();
        let probs = obs.probs().unwrap();
        let total_in_support = normal_cdf(4.0) - normal_cdf(-4.0);
        for k in 0..30 {
            let oracle =
                gaussian_bin_mass(g.knots()[k], g.knots()[k + 1], 0.0, 1.0) / total_in_support;
            assert_relative_eq!(probs[k], oracle, max_relative = 1e-12, epsilon = 1e-14);
        }
    }

    #[test]
    fn quantile_resampling_has_no_zero_bins_for_smooth_cdfs() {
        let g = BinGrid::regular(-4.5, 4.5, 30).unwrap();
        let levels = quantile_levels(1000);
        let values: Vec<f64> = levels.iter().map(|&q| normal_quantile(q) - 1.0).collect();
        let cdf = PiecewiseLinearCdf::from_quantiles(&g, &levels, &values).unwrap();
        let obs = cdf_to_probs(&cdf, &g).unwrap();
        assert!(obs.probs().unwrap().iter().all(|&p| p > 0.0));
    }

    #[test]
    fn quantile_resampling_clamps_overflow_mass() {
        // Distribution shifted far right of the support: nearly all mass must
        // land in the last bin.
        let g = BinGrid::regular(-1.0, 1.0, 4).unwrap();
        let levels = quantile_levels(100);
        let values: Vec<f64> = levels.iter().map(|&q| normal_quantile(q) + 10.0).collect();
        let cdf = PiecewiseLinearCdf::from_quantiles(&g, &levels, &values).unwrap();
        let obs = cdf_to_probs(&cdf, &g).unwrap();
        let p = obs.probs().unwrap();
        assert!(p[3] > 0.99, "expected overflow mass in last bin, got {p:?}");
    }

    #[test]
    fn refinement_consistency_nested_grids() {
        // Coarse bin masses equal pairwise sums of the fine ones exactly when
        // the CDF is evaluated at shared knots.
        let fine = BinGrid::regular(0.0, 1.0, 8).unwrap();
        let coarse = BinGrid::regular(0.0, 1.0, 4).unwrap();
        let f = |x: f64| x * x; // any monotone CDF-like function with f(0)=0, f(1)=1
        let cum_fine: Vec<f64> = fine.knots().iter().map(|&a| f(a)).collect();
        let cum_coarse: Vec<f64> = coarse.knots().iter().map(|&a| f(a)).collect();
        let pf = cdf_to_probs(
            &PiecewiseLinearCdf::new(fine.clone(), cum_fine).unwrap(),
            &fine,
        )
        .unwrap();
        let pc = cdf_to_probs(
            &PiecewiseLinearCdf::new(coarse.clone(), cum_coarse).unwrap(),
            &coarse,
        )
        .unwrap();
        let pf = pf.probs().unwrap();
        let pc = pc.probs().unwrap();
        for k in 0..4 {
            assert_eq!(pc[k], pf[2 * k] + pf[2 * k + 1]);
        }
    }

    #[test]
    fn aggregate_window_boundaries() {
        let out = aggregate_events([(0, 1.0), (59, 2.0), (60, 3.0)], 60, 0).unwrap();
        assert_eq!(out, vec![(0, vec![1.0, 2.0]), (1, vec![3.0])]);
        let out = aggregate_events(std::iter::empty(), 60, 0).unwrap();
        assert!(out.is_empty());
    }

    #[test]
    fn aggregate_hourly_3600() {
        let events: Vec<(i64, f64)> = (0..3600).map(|s| (s, s as f64)).collect();
        let out = aggregate_events(events, 3600, 0).unwrap();
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].0, 0);
        assert_eq!(out[0].1.len(), 3600);
    }

    #[test]
    fn aggregate_emits_empty_windows() {
        let out = aggregate_events([(0, 1.0), (181, 2.0)], 60, 0).unwrap();
        assert_eq!(
            out,
            vec![
                (0, vec![1.0]),
                (1, vec![]),
                (2, vec![]),
                (3, vec![2.0])
            ]
        );
    }

    #[test]
    fn aggregate_reorder_within_slack_ok_beyond_errors() {
        let mut agg = EventAggregator::new(60, 10).unwrap();
        agg.push(100, 1.0).unwrap();
        agg.push(95, 2.0).unwrap(); // within slack
        match agg.push(50, 3.0) {
            Err(Error::LateEvent { timestamp, value, .. }) => {
                assert_eq!(timestamp, 50);
                assert_eq!(value, 3.0);
            }
            other => panic!("expected late-event error, got {other:?}"),
        }
        // In-slack reordering still lands in the right window.
        let mut windows = Vec::new();
        windows.extend(agg.push(200, 4.0).unwrap());
        windows.extend(agg.finish());
        let w1: Vec<f64> = windows
            .iter()
            .find(|(w, _)| *w == 1)
            .map(|(_, v)| v.clone())
            .unwrap();
        assert_eq!(w1, vec![2.0, 1.0]);
    }

    #[test]
    fn binned_observation_invariants() {
        assert!(BinnedObservation::from_counts(vec![0, 0]).is_err());
        assert!(BinnedObservation::from_probs(vec![0.5, 0.6]).is_err());
        assert!(BinnedObservation::from_probs(vec![0.5, -0.5, 1.0]).is_err());
        let obs = BinnedObservation::from_counts(vec![1, 3]).unwrap();
        assert_eq!(obs.frequency_vector(), vec![0.25, 0.75]);
    }

    proptest! {
        #[test]
        fn binning_conserves_sample_count(
            samples in proptest::collection::vec(-10.0f64..10.0, 1..200),
            d in 2usize..12,
        ) {
            let g = BinGrid::regular(-5.0, 5.0, d).unwrap();
            let obs = bin_samples(&samples, &g).unwrap();
            let (counts, n) = obs.counts().unwrap();
            prop_assert_eq!(n as usize, samples.len());
            prop_assert_eq!(counts.iter().sum::<u64>(), n);
        }

        #[test]
        fn cdf_probs_normalized(raw in proptest::collection::vec(0.0f64..1.0, 3..20)) {
            // Build a valid monotone cum vector from raw increments.
            let total: f64 = raw.iter().sum();
            prop_assume!(total > 0.0);
            let mut cum = vec![0.0];
            let mut acc = 0.0;
            for r in &raw {
                acc += r / total;
                cum.push(acc.min(1.0));
            }
            let n = cum.len();
            cum[n - 1] = 1.0;
            let g = BinGrid::regular(0.0, 1.0, n - 1).unwrap();
            let cdf = PiecewiseLinearCdf::new(g.clone(), cum).unwrap();
            let obs = cdf_to_probs(&cdf, &g).unwrap();
            let s: f64 = obs.probs().unwrap().iter().sum();
            prop_assert!((s - 1.0).abs() <= 1e-9);
            prop_assert!(obs.probs().unwrap().iter().all(|&p| p >= 0.0));
        }
    }
}
