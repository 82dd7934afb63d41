//! Weighted sample populations and the plain failure-probability estimators
//! built on them: Monte-Carlo mean, importance-sampling weighted mean, their
//! coefficients of variation, population growth and bootstrap resampling.

use std::io::Write;
use std::sync::Arc;

use nalgebra::DMatrix;
use rand::Rng;

use crate::error::{Error, Result};
use crate::math::MarginalDistribution;
use crate::stream::RandomStream;

/// A density that an importance-sampling population can be drawn from.
pub trait SamplingDensity: Send + Sync {
    fn dims(&self) -> usize;
    fn pdf(&self, x: &[f64]) -> f64;
    fn sample(&self, n: usize, stream: &RandomStream) -> DMatrix<f64>;
}

#[derive(Clone)]
pub enum Source {
    MonteCarlo,
    ImportanceSampling(Arc<dyn SamplingDensity>),
}

impl std::fmt::Debug for Source {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Source::MonteCarlo => write!(f, "MonteCarlo"),
            Source::ImportanceSampling(_) => write!(f, "ImportanceSampling"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Population {
    samples: DMatrix<f64>,
    weights: Vec<f64>,
    marginals: Vec<MarginalDistribution>,
    source: Source,
    /// True when this population is a bootstrap resample of another.
    pub is_bootstrap: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub enum EstimatorKind {
    McMean,
    IsWeighted,
    TrajectoryMean,
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct FailureProbabilityEstimate {
    pub value: f64,
    /// Infinite when the estimate is zero.
    pub cov: f64,
    pub n: usize,
    pub kind: EstimatorKind,
}

fn joint_pdf(marginals: &[MarginalDistribution], x: &[f64]) -> f64 {
    marginals.iter().zip(x).map(|(m, &v)| m.pdf(v)).product()
}

impl Population {
    /// i.i.d. draws from the independent joint of `marginals`; weights ≡ 1.
    pub fn sample_mc(
        marginals: &[MarginalDistribution],
        n: usize,
        stream: &RandomStream,
    ) -> Result<Self> {
        if n < 1 || marginals.is_empty() {
            return Err(Error::InsufficientData { need: 1, got: n.min(marginals.len()) });
        }
        let m = marginals.len();
        let mut rng = stream.rng();
        let mut samples = DMatrix::zeros(n, m);
        for i in 0..n {
            for j in 0..m {
                samples[(i, j)] = marginals[j].sample(&mut rng);
            }
        }
        Ok(Self {
            samples,
            weights: vec![1.0; n],
            marginals: marginals.to_vec(),
            source: Source::MonteCarlo,
            is_bootstrap: false,
        })
    }

    /// Draws from an auxiliary density; weights are f_X/f_aux per sample.
    pub fn sample_is(
        marginals: &[MarginalDistribution],
        density: Arc<dyn SamplingDensity>,
        n: usize,
        stream: &RandomStream,
    ) -> Result<Self> {
        if n < 1 || marginals.is_empty() {
            return Err(Error::InsufficientData { need: 1, got: n.min(marginals.len()) });
        }
        if density.dims() != marginals.len() {
            return Err(Error::Shape { expected: marginals.len(), got: density.dims() });
        }
        let samples = density.sample(n, stream);
        let mut weights = Vec::with_capacity(n);
        for i in 0..n {
            let row: Vec<f64> = samples.row(i).iter().copied().collect();
            let g = density.pdf(&row);
            if !(g > 0.0) {
                return Err(Error::DensityCollapse);
            }
            weights.push(joint_pdf(marginals, &row) / g);
        }
        Ok(Self {
            samples,
            weights,
            marginals: marginals.to_vec(),
            source: Source::ImportanceSampling(density),
            is_bootstrap: false,
        })
    }

    pub fn len(&self) -> usize {
        self.samples.nrows()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn dims(&self) -> usize {
        self.samples.ncols()
    }

    pub fn samples(&self) -> &DMatrix<f64> {
        &self.samples
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn marginals(&self) -> &[MarginalDistribution] {
        &self.marginals
    }

    pub fn source(&self) -> &Source {
        &self.source
    }

    pub fn point(&self, i: usize) -> Vec<f64> {
        self.samples.row(i).iter().copied().collect()
    }

    /// Appends `additional` fresh draws from the source density; the original
    /// rows stay a prefix of the result.
    pub fn extend(&self, additional: usize, stream: &RandomStream) -> Result<Self> {
        if additional < 1 {
            return Err(Error::InsufficientData { need: 1, got: 0 });
        }
        let fresh = match &self.source {
            Source::MonteCarlo => Self::sample_mc(&self.marginals, additional, stream)?,
            Source::ImportanceSampling(d) => {
                Self::sample_is(&self.marginals, d.clone(), additional, stream)?
            }
        };
        let n = self.len();
        let m = self.dims();
        let mut samples = DMatrix::zeros(n + additional, m);
        samples.view_mut((0, 0), (n, m)).copy_from(&self.samples);
        samples.view_mut((n, 0), (additional, m)).copy_from(&fresh.samples);
        let mut weights = self.weights.clone();
        weights.extend_from_slice(&fresh.weights);
        Ok(Self {
            samples,
            weights,
            marginals: self.marginals.clone(),
            source: self.source.clone(),
            is_bootstrap: self.is_bootstrap,
        })
    }

    /// Resamples N rows with replacement, carrying weights along.
    pub fn bootstrap(&self, stream: &RandomStream) -> Result<Self> {
        let n = self.len();
        if n < 2 {
            return Err(Error::InsufficientData { need: 2, got: n });
        }
        let mut rng = stream.rng();
        let m = self.dims();
        let mut samples = DMatrix::zeros(n, m);
        let mut weights = Vec::with_capacity(n);
        for i in 0..n {
            let k = rng.random_range(0..n);
            for j in 0..m {
                samples[(i, j)] = self.samples[(k, j)];
            }
            weights.push(self.weights[k]);
        }
        Ok(Self {
            samples,
            weights,
            marginals: self.marginals.clone(),
            source: self.source.clone(),
            is_bootstrap: true,
        })
    }

    /// Bootstrap row indices only — cheap when the caller just needs to
    /// re-aggregate precomputed per-row quantities.
    pub fn bootstrap_indices(&self, stream: &RandomStream) -> Vec<usize> {
        let n = self.len();
        let mut rng = stream.rng();
        (0..n).map(|_| rng.random_range(0..n)).collect()
    }

    /// One row per sample: coordinates then weight, space-delimited.
    pub fn export_delimited<W: Write>(&self, out: &mut W) -> Result<()> {
        for i in 0..self.len() {
            for j in 0..self.dims() {
                write!(out, "{} ", self.samples[(i, j)])?;
            }
            writeln!(out, "{}", self.weights[i])?;
        }
        Ok(())
    }
}

/// MC estimator over classifier signs, COV = sqrt((1−P̂)/(N·P̂)).
pub fn estimate_pf_mc(
    population: &Population,
    classifier: impl Fn(&[f64]) -> f64,
) -> Result<FailureProbabilityEstimate> {
    let values: Vec<f64> =
        (0..population.len()).map(|i| classifier(&population.point(i))).collect();
    estimate_pf_mc_values(population, &values)
}

/// MC estimator on precomputed classifier values.
pub fn estimate_pf_mc_values(
    population: &Population,
    values: &[f64],
) -> Result<FailureProbabilityEstimate> {
    if !matches!(population.source(), Source::MonteCarlo) {
        return Err(Error::EstimatorMismatch(
            "MC estimator applied to an importance-sampling population".into(),
        ));
    }
    if values.len() != population.len() {
        return Err(Error::Shape { expected: population.len(), got: values.len() });
    }
    let n = values.len();
    let failures = values.iter().filter(|&&v| v <= 0.0).count();
    let pf = failures as f64 / n as f64;
    let cov = if pf > 0.0 { ((1.0 - pf) / (n as f64 * pf)).sqrt() } else { f64::INFINITY };
    Ok(FailureProbabilityEstimate { value: pf, cov, n, kind: EstimatorKind::McMean })
}

/// IS estimator over classifier signs, COV from the empirical variance of
/// the weighted indicator terms.
pub fn estimate_pf_is(
    population: &Population,
    classifier: impl Fn(&[f64]) -> f64,
) -> Result<FailureProbabilityEstimate> {
    let values: Vec<f64> =
        (0..population.len()).map(|i| classifier(&population.point(i))).collect();
    estimate_pf_is_values(population, &values)
}

/// IS estimator on precomputed classifier values.
pub fn estimate_pf_is_values(
    population: &Population,
    values: &[f64],
) -> Result<FailureProbabilityEstimate> {
    if !matches!(population.source(), Source::ImportanceSampling(_)) {
        return Err(Error::EstimatorMismatch(
            "IS estimator applied to a Monte-Carlo population".into(),
        ));
    }
    if values.len() != population.len() {
        return Err(Error::Shape { expected: population.len(), got: values.len() });
    }
    let n = values.len() as f64;
    let terms: Vec<f64> = values
        .iter()
        .zip(population.weights())
        .map(|(&v, &w)| if v <= 0.0 { w } else { 0.0 })
        .collect();
    let pf = terms.iter().sum::<f64>() / n;
    let var = terms.iter().map(|&t| (t - pf) * (t - pf)).sum::<f64>() / (n - 1.0).max(1.0);
    let cov = if pf > 0.0 { (var / n).sqrt() / pf } else { f64::INFINITY };
    Ok(FailureProbabilityEstimate {
        value: pf,
        cov,
        n: values.len(),
        kind: EstimatorKind::IsWeighted,
    })
}
