//! Dirichlet, Dirichlet-Multinomial and categorical likelihood kernels.
//!
//! All computation is in log space. Log-pmf terms involving small integer
//! counts use the product form ln G(a+m) - ln G(a) = sum_{j<m} ln(a+j), which
//! is cheaper and tighter than differencing two log-gammas; large arguments
//! fall back to the log-gamma function. The samplers take an explicit
//! caller-owned generator, so parallel evaluation needs no synchronization.

use crate::error::{Error, Result};
use crate::numeric::{digamma, ln_factorial, ln_gamma, log_sum_exp};
use rand::Rng;
use rand_distr::{Binomial, Distribution, Gamma};

/// Counts at or below this threshold use the product form for
/// ln G(a+m) - ln G(a).
const PRODUCT_FORM_MAX: u64 = 64;

/// Strictly positive concentration parameter of a Dirichlet distribution,
/// with its cached sum.
#[derive(Debug, Clone, PartialEq)]
pub struct ConcentrationVector {
    alpha: Vec<f64>,
    alpha0: f64,
}

impl ConcentrationVector {
    pub fn new(alpha: Vec<f64>) -> Result<Self> {
        if alpha.is_empty() {
            return Err(Error::invalid("concentration vector must be non-empty"));
        }
        if alpha.iter().any(|a| !a.is_finite() || *a <= 0.0) {
            return Err(Error::invalid(
                "concentration components must be strictly positive and finite",
            ));
        }
        let alpha0: f64 = alpha.iter().sum();
        if !alpha0.is_finite() {
            return Err(Error::invalid("concentration sum overflowed"));
        }
        Ok(ConcentrationVector { alpha, alpha0 })
    }

    pub fn dim(&self) -> usize {
        self.alpha.len()
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    pub fn alpha0(&self) -> f64 {
        self.alpha0
    }

    /// Marginal means alpha_i / alpha_0.
    pub fn mean(&self) -> Vec<f64> {
        self.alpha.iter().map(|a| a / self.alpha0).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LikelihoodKind {
    Dirichlet,
    DirMult,
    Categorical,
}

/// A natural-log likelihood value; finite or -inf (impossible outcome).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogLikelihood {
    pub value: f64,
    pub kind: LikelihoodKind,
}

/// Log-density of the Dirichlet distribution at a probability vector.
///
/// Zero components are legal only where the corresponding alpha_i >= 1:
/// with alpha_i = 1 the term vanishes, with alpha_i > 1 the density is 0
/// (-inf log). A zero with alpha_i < 1 would be +inf and is rejected.
/// Vectors off the simplex by more than 1e-9 are rejected; smaller drift is
/// renormalized silently.
pub fn dirichlet_logpdf(p: &[f64], alpha: &ConcentrationVector) -> Result<LogLikelihood> {
    if p.len() != alpha.dim() {
        return Err(Error::invalid("dimension mismatch between p and alpha"));
    }
    if p.iter().any(|x| !x.is_finite() || *x < 0.0) {
        return Err(Error::invalid("p must be finite and non-negative"));
    }
    let sum: f64 = p.iter().sum();
    if (sum - 1.0).abs() > 1e-9 {
        return Err(Error::invalid(format!(
            "p sums to {sum}, off the simplex beyond 1e-9"
        )));
    }
    let mut value = ln_gamma(alpha.alpha0());
    for (&pi, &ai) in p.iter().zip(alpha.alpha()) {
        value -= ln_gamma(ai);
        let pi = pi / sum;
        if pi == 0.0 {
            if ai < 1.0 {
                return Err(Error::invalid(
                    "zero probability component with alpha < 1 has unbounded density",
                ));
            }
            if ai > 1.0 {
                return Ok(LogLikelihood {
                    value: f64::NEG_INFINITY,
                    kind: LikelihoodKind::Dirichlet,
                });
            }
            // alpha_i = 1: the term (alpha_i - 1) ln p_i vanishes.
        } else {
            value += (ai - 1.0) * pi.ln();
        }
    }
    Ok(LogLikelihood {
        value,
        kind: LikelihoodKind::Dirichlet,
    })
}

/// Dirichlet log-density evaluated from log-space components.
///
/// Fast path for Monte-Carlo scoring: the caller guarantees that
/// `exp(log_p)` lies on the simplex, and components may be arbitrarily small
/// without underflowing to an exact zero.
pub(crate) fn dirichlet_logpdf_from_log_probs(log_p: &[f64], alpha: &ConcentrationVector) -> f64 {
    debug_assert_eq!(log_p.len(), alpha.dim());
    let mut value = ln_gamma(alpha.alpha0());
    for (&lp, &ai) in log_p.iter().zip(alpha.alpha()) {
        value -= ln_gamma(ai);
        value += (ai - 1.0) * lp;
    }
    value
}

fn ln_rising_factorial(a: f64, m: u64) -> f64 {
    // ln G(a+m) - ln G(a)
    if m == 0 {
        return 0.0;
    }
    if m <= PRODUCT_FORM_MAX {
        let mut s = 0.0;
        for j in 0..m {
            s += (a + j as f64).ln();
        }
        s
    } else {
        ln_gamma(a + m as f64) - ln_gamma(a)
    }
}

/// Log-pmf of the Dirichlet-Multinomial distribution for a count vector m
/// summing to n.
pub fn dirmult_logpmf(m: &[u64], n: u64, alpha: &ConcentrationVector) -> Result<LogLikelihood> {
    if m.len() != alpha.dim() {
        return Err(Error::invalid("dimension mismatch between m and alpha"));
    }
    if n == 0 {
        return Err(Error::invalid("trial count n must be positive"));
    }
    let total: u64 = m.iter().sum();
    if total != n {
        return Err(Error::invalid(format!(
            "counts sum to {total}, expected n = {n}"
        )));
    }
    let mut value = ln_factorial(n) - ln_rising_factorial(alpha.alpha0(), n);
    for (&mi, &ai) in m.iter().zip(alpha.alpha()) {
        if mi > 0 {
            value += ln_rising_factorial(ai, mi) - ln_factorial(mi);
        }
    }
    Ok(LogLikelihood {
        value,
        kind: LikelihoodKind::DirMult,
    })
}

/// Precomputed per-concentration tables for repeated Dirichlet-Multinomial
/// log-pmf evaluation at a fixed (n, alpha), as in Monte-Carlo level-set
/// estimation. Produces values identical to [`dirmult_logpmf`].
pub struct DirMultTable {
    /// cum[i][k] = ln G(alpha_i + k) - ln G(alpha_i) for k = 0..=n.
    cum: Vec<Vec<f64>>,
    /// ln n! - (ln G(alpha_0 + n) - ln G(alpha_0))
    base: f64,
    n: u64,
}

impl DirMultTable {
    pub fn new(alpha: &ConcentrationVector, n: u64) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("trial count n must be positive"));
        }
        let cum = alpha
            .alpha()
            .iter()
            .map(|&ai| {
                let mut col = Vec::with_capacity(n as usize + 1);
                col.push(0.0);
                if n <= PRODUCT_FORM_MAX {
                    let mut acc = 0.0;
                    for j in 0..n {
                        acc += (ai + j as f64).ln();
                        col.push(acc);
                    }
                } else {
                    let base = ln_gamma(ai);
                    for k in 1..=n {
                        col.push(ln_gamma(ai + k as f64) - base);
                    }
                }
                col
            })
            .collect();
        let base = ln_factorial(n) - ln_rising_factorial(alpha.alpha0(), n);
        Ok(DirMultTable { cum, base, n })
    }

    pub fn logpmf(&self, m: &[u64]) -> f64 {
        debug_assert_eq!(m.len(), self.cum.len());
        debug_assert_eq!(m.iter().sum::<u64>(), self.n);
        let mut value = self.base;
        for (mi, col) in m.iter().zip(&self.cum) {
            if *mi > 0 {
                value += col[*mi as usize] - ln_factorial(*mi);
            }
        }
        value
    }
}

/// ln of a Gamma(shape, 1) draw, computed so that shapes far below 1 cannot
/// underflow: for a < 1 the boost G(a) = G(a+1) U^(1/a) is applied in log
/// space.
pub(crate) fn sample_log_gamma<R: Rng + ?Sized>(shape: f64, rng: &mut R) -> f64 {
    debug_assert!(shape > 0.0 && shape.is_finite());
    if shape >= 1.0 {
        let g: f64 = Gamma::new(shape, 1.0).expect("valid shape").sample(rng);
        g.max(f64::MIN_POSITIVE).ln()
    } else {
        let g: f64 = Gamma::new(shape + 1.0, 1.0).expect("valid shape").sample(rng);
        let u: f64 = 1.0 - rng.gen::<f64>(); // in (0, 1]
        g.max(f64::MIN_POSITIVE).ln() + u.ln() / shape
    }
}

/// Draw log-components of a Dirichlet(alpha) sample. The exponentials of the
/// result lie on the simplex; components can be far below the smallest
/// positive f64 without degenerating.
pub fn dirichlet_log_sample<R: Rng + ?Sized>(
    alpha: &ConcentrationVector,
    rng: &mut R,
) -> Vec<f64> {
    let mut log_g: Vec<f64> = alpha
        .alpha()
        .iter()
        .map(|&a| sample_log_gamma(a, rng))
        .collect();
    let lse = log_sum_exp(&log_g);
    for lg in log_g.iter_mut() {
        *lg -= lse;
    }
    log_g
}

/// Draw a probability vector from Dirichlet(alpha) by gamma normalization.
pub fn dirichlet_sample<R: Rng + ?Sized>(alpha: &ConcentrationVector, rng: &mut R) -> Vec<f64> {
    dirichlet_log_sample(alpha, rng)
        .into_iter()
        .map(f64::exp)
        .collect()
}

/// Multinomial(n, p) via sequential binomial splitting.
pub fn multinomial_sample<R: Rng + ?Sized>(n: u64, p: &[f64], rng: &mut R) -> Vec<u64> {
    let d = p.len();
    let mut counts = vec![0u64; d];
    let mut remaining = n;
    let mut rest: f64 = 1.0;
    for i in 0..d {
        if remaining == 0 {
            break;
        }
        if i == d - 1 {
            counts[i] = remaining;
            break;
        }
        let q = if rest > 0.0 { (p[i] / rest).clamp(0.0, 1.0) } else { 1.0 };
        let c = if q >= 1.0 {
            remaining
        } else if q <= 0.0 {
            0
        } else {
            Binomial::new(remaining, q).expect("valid binomial").sample(rng)
        };
        counts[i] = c;
        remaining -= c;
        rest -= p[i];
    }
    counts
}

/// Draw a Dirichlet-Multinomial count vector: p ~ Dir(alpha), then
/// m ~ Multinomial(n, p).
pub fn dirmult_sample<R: Rng + ?Sized>(
    n: u64,
    alpha: &ConcentrationVector,
    rng: &mut R,
) -> Result<Vec<u64>> {
    if n == 0 {
        return Err(Error::invalid("trial count n must be positive"));
    }
    let p = dirichlet_sample(alpha, rng);
    Ok(multinomial_sample(n, &p, rng))
}

/// An observation in either likelihood regime, for gradient dispatch.
#[derive(Debug, Clone, Copy)]
pub enum DistObservation<'a> {
    Probs(&'a [f64]),
    Counts { counts: &'a [u64], n: u64 },
}

/// Gradient of the Dirichlet log-density with respect to alpha:
/// psi(alpha_0) - psi(alpha_i) + ln p_i.
pub fn dirichlet_grad_alpha(p: &[f64], alpha: &ConcentrationVector) -> Result<Vec<f64>> {
    if p.len() != alpha.dim() {
        return Err(Error::invalid("dimension mismatch between p and alpha"));
    }
    if p.iter().any(|x| !x.is_finite() || *x <= 0.0) {
        return Err(Error::invalid(
            "gradient requires strictly positive probability components",
        ));
    }
    let sum: f64 = p.iter().sum();
    if (sum - 1.0).abs() > 1e-9 {
        return Err(Error::invalid("p off the simplex beyond 1e-9"));
    }
    let d0 = digamma(alpha.alpha0());
    Ok(p.iter()
        .zip(alpha.alpha())
        .map(|(&pi, &ai)| d0 - digamma(ai) + (pi / sum).ln())
        .collect())
}

/// Gradient of the Dirichlet-Multinomial log-pmf with respect to alpha:
/// psi(alpha_0) - psi(n + alpha_0) + psi(m_i + alpha_i) - psi(alpha_i).
pub fn dirmult_grad_alpha(m: &[u64], n: u64, alpha: &ConcentrationVector) -> Result<Vec<f64>> {
    if m.len() != alpha.dim() {
        return Err(Error::invalid("dimension mismatch between m and alpha"));
    }
    if m.iter().sum::<u64>() != n {
        return Err(Error::invalid("counts must sum to n"));
    }
    let shared = digamma(alpha.alpha0()) - digamma(n as f64 + alpha.alpha0());
    Ok(m.iter()
        .zip(alpha.alpha())
        .map(|(&mi, &ai)| {
            if mi == 0 {
                // psi(a + 0) - psi(a) = 0, skip the evaluations.
                shared
            } else {
                shared + digamma(mi as f64 + ai) - digamma(ai)
            }
        })
        .collect())
}

/// Gradient of the appropriate log-likelihood with respect to alpha.
pub fn grad_alpha(obs: DistObservation<'_>, alpha: &ConcentrationVector) -> Result<Vec<f64>> {
    match obs {
        DistObservation::Probs(p) => dirichlet_grad_alpha(p, alpha),
        DistObservation::Counts { counts, n } => dirmult_grad_alpha(counts, n, alpha),
    }
}

/// Enumerate all count vectors of dimension d summing to n.
pub fn enumerate_count_vectors(d: usize, n: u64) -> Vec<Vec<u64>> {
    fn rec(d: usize, n: u64, prefix: &mut Vec<u64>, out: &mut Vec<Vec<u64>>) {
        if d == 1 {
            prefix.push(n);
            out.push(prefix.clone());
            prefix.pop();
            return;
        }
        for k in 0..=n {
            prefix.push(k);
            rec(d - 1, n - k, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    rec(d, n, &mut Vec::new(), &mut out);
    out
}
