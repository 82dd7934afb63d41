//! Probability primitives: standard normal functions, marginal input
//! distributions, Latin Hypercube designs and empirical variances with
//! asymptotic confidence intervals.

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use statrs::function::erf;

use crate::error::{Error, Result};
use crate::stream::RandomStream;

/// Standard normal density (2π)^{-1/2} exp(-z²/2).
pub fn std_normal_pdf(z: f64) -> Result<f64> {
    if !z.is_finite() {
        return Err(Error::Domain(format!("non-finite argument {z}")));
    }
    Ok((-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt())
}

/// Standard normal cumulative distribution Φ(z).
pub fn std_normal_cdf(z: f64) -> Result<f64> {
    if !z.is_finite() {
        return Err(Error::Domain(format!("non-finite argument {z}")));
    }
    Ok(0.5 * erf::erfc(-z / std::f64::consts::SQRT_2))
}

/// Unchecked Φ(z) for hot loops; identical to [`std_normal_cdf`] on finite input.
#[inline]
pub(crate) fn phi(z: f64) -> f64 {
    0.5 * erf::erfc(-z / std::f64::consts::SQRT_2)
}

#[inline]
pub(crate) fn phi_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Standard normal quantile Φ^{-1}(p).
///
/// Rational initial approximation refined by Newton steps on the CDF, so the
/// inverse identity holds to ~1e-12 over the whole open interval.
pub fn std_normal_quantile(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::Domain(format!("quantile argument {p} outside (0,1)")));
    }
    let mut z = acklam_inverse(p);
    // Two Newton refinements; pdf underflows only for |z| > 38 where the
    // initial approximation is already at the representable limit.
    for _ in 0..2 {
        let pdf = phi_pdf(z);
        if pdf < 1e-300 {
            break;
        }
        z -= (phi(z) - p) / pdf;
    }
    Ok(z)
}

/// Peter Acklam's rational approximation to the inverse normal CDF.
fn acklam_inverse(p: f64) -> f64 {
    const A: [f64; 6] = [
        -3.969683028665376e+01,
        2.209460984245205e+02,
        -2.759285104469687e+02,
        1.383577518672690e+02,
        -3.066479806614716e+01,
        2.506628277459239e+00,
    ];
    const B: [f64; 5] = [
        -5.447609879822406e+01,
        1.615858368580409e+02,
        -1.556989798598866e+02,
        6.680131188771972e+01,
        -1.328068155288572e+01,
    ];
    const C: [f64; 6] = [
        -7.784894002430293e-03,
        -3.223964580411365e-01,
        -2.400758277161838e+00,
        -2.549732539343734e+00,
        4.374664141464968e+00,
        2.938163982698783e+00,
    ];
    const D: [f64; 4] = [
        7.784695709041462e-03,
        3.224671290700398e-01,
        2.445134137142996e+00,
        3.754408661907416e+00,
    ];
    const P_LOW: f64 = 0.02425;

    if p < P_LOW {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else if p <= 1.0 - P_LOW {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        -acklam_inverse(1.0 - p)
    }
}

/// A one-dimensional input distribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum MarginalDistribution {
    Gaussian { mean: f64, std_dev: f64 },
}

impl MarginalDistribution {
    pub fn gaussian(mean: f64, std_dev: f64) -> Result<Self> {
        if !(std_dev > 0.0) {
            return Err(Error::Domain(format!("std_dev {std_dev} must be positive")));
        }
        Ok(Self::Gaussian { mean, std_dev })
    }

    pub fn mean(&self) -> f64 {
        match *self {
            Self::Gaussian { mean, .. } => mean,
        }
    }

    pub fn std_dev(&self) -> f64 {
        match *self {
            Self::Gaussian { std_dev, .. } => std_dev,
        }
    }

    pub fn quantile(&self, p: f64) -> Result<f64> {
        match *self {
            Self::Gaussian { mean, std_dev } => Ok(mean + std_dev * std_normal_quantile(p)?),
        }
    }

    pub fn pdf(&self, x: f64) -> f64 {
        match *self {
            Self::Gaussian { mean, std_dev } => phi_pdf((x - mean) / std_dev) / std_dev,
        }
    }

    pub fn sample(&self, rng: &mut impl Rng) -> f64 {
        match *self {
            Self::Gaussian { mean, std_dev } => mean + std_dev * standard_normal(rng),
        }
    }
}

/// One standard normal draw (polar Box-Muller would consume a variable number
/// of uniforms; inversion keeps the stream layout deterministic).
#[inline]
pub(crate) fn standard_normal(rng: &mut impl Rng) -> f64 {
    // open interval (0,1): shift the 53-bit uniform off both endpoints
    let u = (rng.random::<u64>() >> 11) as f64 * (1.0 / 9007199254740992.0);
    let u = (u + 0.5 / 9007199254740992.0).min(1.0 - 1e-16);
    acklam_refined(u)
}

#[inline]
fn acklam_refined(p: f64) -> f64 {
    let mut z = acklam_inverse(p);
    let pdf = phi_pdf(z);
    if pdf > 1e-300 {
        z -= (phi(z) - p) / pdf;
    }
    z
}

/// Latin Hypercube design: `n` rows over the given marginals, one point per
/// equiprobable stratum in every column, rows paired by random permutation.
pub fn latin_hypercube(
    n: usize,
    marginals: &[MarginalDistribution],
    stream: &RandomStream,
) -> Result<DMatrix<f64>> {
    if n < 1 || marginals.is_empty() {
        return Err(Error::Domain("empty design requested".into()));
    }
    let dims = marginals.len();
    let mut rng = stream.rng();
    let mut design = DMatrix::zeros(n, dims);
    let mut perm: Vec<usize> = (0..n).collect();
    for (j, marginal) in marginals.iter().enumerate() {
        perm.shuffle(&mut rng);
        for i in 0..n {
            let u: f64 = rng.random();
            let p = (perm[i] as f64 + u.clamp(1e-12, 1.0 - 1e-12)) / n as f64;
            design[(i, j)] = marginal.quantile(p)?;
        }
    }
    Ok(design)
}

/// Point estimate with an asymptotic confidence bracket.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntervalEstimate {
    pub point: f64,
    pub lower: f64,
    pub upper: f64,
    pub level: f64,
}

impl IntervalEstimate {
    pub fn new(point: f64, lower: f64, upper: f64, level: f64) -> Result<Self> {
        if !(level > 0.0 && level < 1.0) {
            return Err(Error::Domain(format!("level {level} outside (0,1)")));
        }
        if !(lower <= point && point <= upper) {
            return Err(Error::Domain(format!(
                "interval bounds disordered: {lower} <= {point} <= {upper} violated"
            )));
        }
        Ok(Self { point, lower, upper, level })
    }

    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }

    pub fn disjoint_from(&self, other: &IntervalEstimate) -> bool {
        self.upper < other.lower || other.upper < self.lower
    }

    /// Multiplies point and bounds by a nonnegative constant.
    pub fn scaled(&self, c: f64) -> IntervalEstimate {
        IntervalEstimate {
            point: self.point * c,
            lower: self.lower * c,
            upper: self.upper * c,
            level: self.level,
        }
    }
}

/// Two-sided normal critical value for a confidence level, e.g. 0.95 → 1.95996.
pub fn critical_value(level: f64) -> Result<f64> {
    std_normal_quantile(0.5 + level / 2.0)
}

/// Unbiased empirical variance with its asymptotic confidence interval.
///
/// The bracket is `v ∓ k·sqrt(n·Var̂(d))/(n-1)` with `d_i` the squared
/// deviations and `k` the two-sided critical value; the lower bound is clamped
/// at zero since variances are nonnegative.
pub fn empirical_variance_ci(sample: &[f64], level: f64) -> Result<IntervalEstimate> {
    let n = sample.len();
    if n < 2 {
        return Err(Error::InsufficientData { need: 2, got: n });
    }
    let nf = n as f64;
    let mean = sample.iter().sum::<f64>() / nf;
    let mut var = 0.0;
    for &z in sample {
        var += (z - mean) * (z - mean);
    }
    var /= nf - 1.0;

    let mut dmean = 0.0;
    for &z in sample {
        dmean += (z - mean) * (z - mean);
    }
    dmean /= nf;
    let mut var_d = 0.0;
    for &z in sample {
        let d = (z - mean) * (z - mean);
        var_d += (d - dmean) * (d - dmean);
    }
    var_d /= nf - 1.0;

    let k = critical_value(level)?;
    let half = k * (nf * var_d).sqrt() / (nf - 1.0);
    IntervalEstimate::new(var, (var - half).max(0.0), (var + half).max(var), level)
}
