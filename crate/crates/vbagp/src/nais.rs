//! Non-parametric adaptive importance sampling: a quantile-threshold schedule
//! drives successive kernel-density refits toward the optimal auxiliary
//! density of the failure event. A probability-weighted variant accepts a
//! probabilistic classifier instead of hard failure indicators.

use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::{phi, MarginalDistribution};
use crate::population::{Population, SamplingDensity};
use crate::stream::RandomStream;

/// Gaussian mixture with shared diagonal bandwidth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KdeDensity {
    centers: Vec<Vec<f64>>,
    weights: Vec<f64>,
    bandwidth: Vec<f64>,
}

impl KdeDensity {
    /// Mixture with explicit per-dimension bandwidth; weights are normalized.
    pub fn with_bandwidth(
        centers: Vec<Vec<f64>>,
        raw_weights: &[f64],
        bandwidth: Vec<f64>,
    ) -> Result<Self> {
        if centers.is_empty() || centers.len() != raw_weights.len() {
            return Err(Error::Shape { expected: centers.len(), got: raw_weights.len() });
        }
        let m = centers[0].len();
        if centers.iter().any(|c| c.len() != m) || bandwidth.len() != m {
            return Err(Error::Shape { expected: m, got: bandwidth.len() });
        }
        if bandwidth.iter().any(|&h| !(h > 0.0)) {
            return Err(Error::Domain("bandwidth must be positive".into()));
        }
        if raw_weights.iter().any(|&w| w < 0.0 || !w.is_finite()) {
            return Err(Error::Domain("weights must be finite and nonnegative".into()));
        }
        let total: f64 = raw_weights.iter().sum();
        if !(total > 0.0) {
            return Err(Error::DensityCollapse);
        }
        let keep: Vec<usize> = (0..centers.len()).filter(|&i| raw_weights[i] > 0.0).collect();
        Ok(Self {
            centers: keep.iter().map(|&i| centers[i].clone()).collect(),
            weights: keep.iter().map(|&i| raw_weights[i] / total).collect(),
            bandwidth,
        })
    }

    pub fn n_components(&self) -> usize {
        self.centers.len()
    }

    pub fn bandwidth(&self) -> &[f64] {
        &self.bandwidth
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Keeps only the `max_components` heaviest components, renormalized.
    /// Importance-sampling estimates stay unbiased under any sampling
    /// density, so pruning trades tail coverage for evaluation speed.
    pub fn prune(&self, max_components: usize) -> Self {
        if self.centers.len() <= max_components || max_components == 0 {
            return self.clone();
        }
        let mut order: Vec<usize> = (0..self.weights.len()).collect();
        order.sort_by(|&a, &b| self.weights[b].total_cmp(&self.weights[a]).then(a.cmp(&b)));
        order.truncate(max_components);
        order.sort_unstable();
        let total: f64 = order.iter().map(|&i| self.weights[i]).sum();
        Self {
            centers: order.iter().map(|&i| self.centers[i].clone()).collect(),
            weights: order.iter().map(|&i| self.weights[i] / total).collect(),
            bandwidth: self.bandwidth.clone(),
        }
    }
}

impl SamplingDensity for KdeDensity {
    fn dims(&self) -> usize {
        self.bandwidth.len()
    }

    fn pdf(&self, x: &[f64]) -> f64 {
        let m = self.bandwidth.len();
        let norm: f64 = self.bandwidth.iter().product::<f64>()
            * (2.0 * std::f64::consts::PI).powf(m as f64 / 2.0);
        let mut acc = 0.0;
        for (c, &w) in self.centers.iter().zip(&self.weights) {
            let mut q = 0.0;
            for j in 0..m {
                let z = (x[j] - c[j]) / self.bandwidth[j];
                q += z * z;
            }
            acc += w * (-0.5 * q).exp();
        }
        acc / norm
    }

    fn sample(&self, n: usize, stream: &RandomStream) -> DMatrix<f64> {
        let m = self.dims();
        let mut rng = stream.rng();
        let mut out = DMatrix::zeros(n, m);
        // cumulative weights for categorical component choice
        let mut cum = Vec::with_capacity(self.weights.len());
        let mut acc = 0.0;
        for &w in &self.weights {
            acc += w;
            cum.push(acc);
        }
        for i in 0..n {
            let u: f64 = rng.random();
            let k = cum.partition_point(|&c| c < u).min(self.centers.len() - 1);
            for j in 0..m {
                out[(i, j)] = self.centers[k][j]
                    + self.bandwidth[j] * crate::math::standard_normal(&mut rng);
            }
        }
        out
    }
}

/// Weighted-sample bandwidth by Silverman's rule per dimension;
/// `fallback_scales` replaces degenerate weighted deviations.
pub fn kde_fit(
    centers: Vec<Vec<f64>>,
    raw_weights: &[f64],
    fallback_scales: &[f64],
) -> Result<KdeDensity> {
    if centers.is_empty() {
        return Err(Error::InsufficientData { need: 1, got: 0 });
    }
    let m = centers[0].len();
    if fallback_scales.len() != m {
        return Err(Error::Shape { expected: m, got: fallback_scales.len() });
    }
    let total: f64 = raw_weights.iter().sum();
    if !(total > 0.0) {
        return Err(Error::DensityCollapse);
    }
    let sum_sq: f64 = raw_weights.iter().map(|&w| w * w).sum();
    let k_eff = total * total / sum_sq;
    let factor = (4.0 / ((m as f64 + 2.0) * k_eff)).powf(1.0 / (m as f64 + 4.0));
    let mut bandwidth = Vec::with_capacity(m);
    for j in 0..m {
        let mean =
            centers.iter().zip(raw_weights).map(|(c, &w)| w * c[j]).sum::<f64>() / total;
        let var = centers
            .iter()
            .zip(raw_weights)
            .map(|(c, &w)| w * (c[j] - mean) * (c[j] - mean))
            .sum::<f64>()
            / total;
        let sigma = if var > 0.0 { var.sqrt() } else { fallback_scales[j] };
        bandwidth.push((sigma * factor).max(1e-12));
    }
    KdeDensity::with_bandwidth(centers, raw_weights, bandwidth)
}

/// What the adaptive loop classifies with.
pub enum NaisEvaluator<'a> {
    /// True performance values: indicator weights 1{Y ≤ γ}.
    Hard(&'a dyn Fn(&[f64]) -> f64),
    /// Surrogate mean and standard deviation: smooth weights Φ((γ−μ)/σ).
    GpProbability(&'a dyn Fn(&[f64]) -> (f64, f64)),
}

#[derive(Debug, Clone, Copy)]
pub struct NaisConfig {
    pub rho: f64,
    pub n_is: usize,
    pub residual_tol: f64,
    pub max_iterations: usize,
}

impl Default for NaisConfig {
    fn default() -> Self {
        Self { rho: 0.1, n_is: 2000, residual_tol: 1e-3, max_iterations: 50 }
    }
}

/// Everything the caller may want from a finished adaptive run.
pub struct NaisOutcome {
    /// Final refit of the optimal-density estimate.
    pub density: KdeDensity,
    /// Last-iteration population reweighted against its generating density.
    pub population: Population,
    /// Every sample drawn after the initial iteration, one row each —
    /// candidate pool for secondary designs.
    pub all_samples: DMatrix<f64>,
    pub pf: f64,
    pub thresholds: Vec<f64>,
    /// Set when the threshold schedule stagnated before reaching zero.
    pub stagnated: bool,
}

struct Batch {
    samples: DMatrix<f64>,
    /// (μ, σ) per row; σ = 0 in hard mode with μ the true value.
    evals: Vec<(f64, f64)>,
    /// Generating density value per row, cached at draw time.
    gen_pdf: Vec<f64>,
}

fn smooth_indicator(eval: &(f64, f64), gamma: f64) -> f64 {
    let (mu, sigma) = *eval;
    if *&sigma > 0.0 {
        phi((gamma - mu) / sigma)
    } else if mu <= gamma {
        1.0
    } else {
        0.0
    }
}

fn quantile_of(sorted: &[f64], rho: f64) -> f64 {
    let n = sorted.len();
    let idx = ((rho * n as f64).ceil() as usize).clamp(1, n) - 1;
    sorted[idx]
}

/// Runs the adaptive loop until the threshold reaches zero, the schedule
/// stagnates, or the iteration cap is hit.
pub fn nais_run(
    evaluator: NaisEvaluator<'_>,
    marginals: &[MarginalDistribution],
    config: &NaisConfig,
    stream: &RandomStream,
) -> Result<NaisOutcome> {
    if !(config.rho > 0.0 && config.rho < 1.0) {
        return Err(Error::Domain(format!("rho {} outside (0,1)", config.rho)));
    }
    if config.n_is < 100 {
        return Err(Error::InsufficientData { need: 100, got: config.n_is });
    }
    let m = marginals.len();
    let joint = |x: &[f64]| -> f64 { marginals.iter().zip(x).map(|(d, &v)| d.pdf(v)).product() };
    let eval_point = |x: &[f64]| -> (f64, f64) {
        match &evaluator {
            NaisEvaluator::Hard(f) => (f(x), 0.0),
            NaisEvaluator::GpProbability(f) => f(x),
        }
    };
    let scales: Vec<f64> = marginals.iter().map(|d| d.std_dev()).collect();

    // iteration 0: draw from the input density itself
    let init = Population::sample_mc(marginals, config.n_is, &stream.child(0))?;
    let evals0: Vec<(f64, f64)> =
        (0..config.n_is).map(|i| eval_point(&init.point(i))).collect();
    let mut sorted: Vec<f64> = evals0.iter().map(|e| e.0).collect();
    sorted.sort_by(f64::total_cmp);
    let mut gamma = quantile_of(&sorted, config.rho).max(0.0);
    let mut thresholds = vec![gamma];

    let w0: Vec<f64> = evals0.iter().map(|e| smooth_indicator(e, gamma)).collect();
    let centers0: Vec<Vec<f64>> = (0..config.n_is).map(|i| init.point(i)).collect();
    let mut density = kde_fit(centers0, &w0, &scales)?;
    // the kernel bandwidth is set once, from the initial threshold-selected
    // sample, and held fixed through all refits: refitting it from the
    // accumulated weighted sample lets a handful of dominant weights shrink
    // the kernels until whole stretches of the failure region lose coverage
    let bandwidth = density.bandwidth().to_vec();

    // accumulated post-initial batches (the refits use only these)
    let mut batches: Vec<Batch> = Vec::new();
    let mut stagnated = false;
    let mut k = 0usize;

    while gamma > 0.0 {
        k += 1;
        if k > config.max_iterations {
            stagnated = true;
            break;
        }
        let gen = density.clone();
        let samples = gen.sample(config.n_is, &stream.child(k as u64));
        let mut evals = Vec::with_capacity(config.n_is);
        let mut gen_pdf = Vec::with_capacity(config.n_is);
        for i in 0..config.n_is {
            let row: Vec<f64> = samples.row(i).iter().copied().collect();
            evals.push(eval_point(&row));
            let g = gen.pdf(&row);
            if !(g > 0.0) {
                return Err(Error::DensityCollapse);
            }
            gen_pdf.push(g);
        }
        batches.push(Batch { samples, evals, gen_pdf });

        let mut sorted: Vec<f64> =
            batches.last().unwrap().evals.iter().map(|e| e.0).collect();
        sorted.sort_by(f64::total_cmp);
        let prev = gamma;
        gamma = quantile_of(&sorted, config.rho).max(0.0);
        thresholds.push(gamma);

        // refit on every accumulated sample with its own generating density
        let mut centers = Vec::new();
        let mut weights = Vec::new();
        for b in &batches {
            for i in 0..b.samples.nrows() {
                let row: Vec<f64> = b.samples.row(i).iter().copied().collect();
                let w = smooth_indicator(&b.evals[i], gamma) * joint(&row) / b.gen_pdf[i];
                centers.push(row);
                weights.push(w);
            }
        }
        density = KdeDensity::with_bandwidth(centers, &weights, bandwidth.clone())?;

        if gamma > 0.0 && (gamma - prev).abs() / prev.abs().max(1e-12) < config.residual_tol {
            stagnated = true;
            break;
        }
    }

    // final estimate on the last population against its generating density
    let (pf, population, all_samples) = if let Some(last) = batches.last() {
        let n = config.n_is as f64;
        let pf = last
            .evals
            .iter()
            .enumerate()
            .map(|(i, e)| {
                let row: Vec<f64> = last.samples.row(i).iter().copied().collect();
                smooth_indicator(e, 0.0) * joint(&row) / last.gen_pdf[i]
            })
            .sum::<f64>()
            / n;
        let total: usize = batches.iter().map(|b| b.samples.nrows()).sum();
        let mut all = DMatrix::zeros(total, m);
        let mut at = 0;
        for b in &batches {
            all.view_mut((at, 0), (b.samples.nrows(), m)).copy_from(&b.samples);
            at += b.samples.nrows();
        }
        let pop = Population::sample_is(
            marginals,
            std::sync::Arc::new(density.clone()),
            config.n_is,
            &stream.child(0x706f70),
        )?;
        (pf, pop, all)
    } else {
        // threshold started at zero: the plain-MC estimate already stands
        let pf = w0.iter().sum::<f64>() / config.n_is as f64;
        let pop = Population::sample_is(
            marginals,
            std::sync::Arc::new(density.clone()),
            config.n_is,
            &stream.child(0x706f70),
        )?;
        (pf, pop, init.samples().clone())
    };

    Ok(NaisOutcome { density, population, all_samples, pf, thresholds, stagnated })
}
