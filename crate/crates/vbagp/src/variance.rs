//! Decomposition of the estimator variance into its sampling and surrogate
//! contributions, the trajectory-mean estimator, and the reduced and total
//! coefficients of variation that drive the adaptive loop.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gp::GpModel;
use crate::math::{empirical_variance_ci, IntervalEstimate};
use crate::population::{Population, Source};
use crate::stream::RandomStream;
use crate::trajectories::TrajectoryEnsemble;

/// Snapshot of the variance decomposition at one loop iteration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarianceReport {
    pub v_x: IntervalEstimate,
    pub v_gn: IntervalEstimate,
    pub v_tot: Option<IntervalEstimate>,
    /// Interaction term by subtraction; may be negative within noise.
    pub v_joint: Option<f64>,
    pub cov_red: f64,
    pub cov_tot: Option<IntervalEstimate>,
    pub pf_t: Option<f64>,
    pub n_t_used: usize,
    /// False when interval separation failed at the trajectory cap and the
    /// comparison fell back to point estimates.
    pub separated: bool,
}

impl VarianceReport {
    /// Fills the subtraction-only interaction term once the total is known.
    pub fn with_total(
        mut self,
        v_tot: IntervalEstimate,
        cov_tot: IntervalEstimate,
        pf_t: f64,
    ) -> Self {
        self.v_joint = Some(v_tot.point - self.v_gn.point - self.v_x.point);
        self.v_tot = Some(v_tot);
        self.cov_tot = Some(cov_tot);
        self.pf_t = Some(pf_t);
        self
    }
}

/// Sampling contribution: empirical variance of the per-sample failure
/// probabilities (weighted for IS), divided by the population size.
pub fn estimate_v_x(
    model: &GpModel,
    population: &Population,
    level: f64,
) -> Result<IntervalEstimate> {
    let (mu, sd) = model.predict_batch(population.samples())?;
    let p: Vec<f64> = (0..population.len())
        .map(|i| {
            crate::learning::misclassification_prob(&crate::gp::Prediction {
                mean: mu[i],
                std_dev: sd[i],
            })
        })
        .collect();
    estimate_v_x_values(population, &p, level)
}

/// Same, on cached per-sample probabilities p(X_i).
pub fn estimate_v_x_values(
    population: &Population,
    p: &[f64],
    level: f64,
) -> Result<IntervalEstimate> {
    if p.len() != population.len() {
        return Err(Error::Shape { expected: population.len(), got: p.len() });
    }
    let terms: Vec<f64> = match population.source() {
        Source::MonteCarlo => p.to_vec(),
        Source::ImportanceSampling(_) => {
            p.iter().zip(population.weights()).map(|(&pi, &w)| w * pi).collect()
        }
    };
    let ci = empirical_variance_ci(&terms, level)?;
    Ok(ci.scaled(1.0 / population.len() as f64))
}

/// Per-trajectory failure-probability estimates (MC mean or IS-weighted).
pub fn trajectory_pf(population: &Population, ensemble: &TrajectoryEnsemble) -> Result<Vec<f64>> {
    if ensemble.n_points() != population.len() {
        return Err(Error::Shape { expected: population.len(), got: ensemble.n_points() });
    }
    let n = population.len() as f64;
    let vals = ensemble.values();
    let weighted = matches!(population.source(), Source::ImportanceSampling(_));
    let mut out = Vec::with_capacity(ensemble.n_trajectories());
    for t in 0..ensemble.n_trajectories() {
        let mut acc = 0.0;
        for j in 0..population.len() {
            if vals[(t, j)] <= 0.0 {
                acc += if weighted { population.weights()[j] } else { 1.0 };
            }
        }
        out.push(acc / n);
    }
    Ok(out)
}

/// Surrogate contribution: variance of the per-trajectory estimates across
/// the ensemble, the population held fixed.
pub fn estimate_v_gn(
    population: &Population,
    ensemble: &TrajectoryEnsemble,
    level: f64,
) -> Result<IntervalEstimate> {
    if ensemble.n_trajectories() < 2 {
        return Err(Error::InsufficientData { need: 2, got: ensemble.n_trajectories() });
    }
    let pfs = trajectory_pf(population, ensemble)?;
    empirical_variance_ci(&pfs, level)
}

/// Doubles the trajectory count until the surrogate-variance interval is
/// disjoint from `v_x`, or the cap is hit (flagged, not an error).
///
/// `builder(n_t)` must return a fresh ensemble of that size on the fixed
/// population. Returns (interval, n_t used, separated).
pub fn widen_v_gn_until_separated(
    v_x: &IntervalEstimate,
    population: &Population,
    mut builder: impl FnMut(usize) -> Result<TrajectoryEnsemble>,
    n_t_init: usize,
    max_nt: usize,
    level: f64,
) -> Result<(IntervalEstimate, usize, bool)> {
    if max_nt < n_t_init {
        return Err(Error::Domain("max_nt below the initial trajectory count".into()));
    }
    let mut n_t = n_t_init.max(2);
    loop {
        let ensemble = builder(n_t)?;
        let v_gn = estimate_v_gn(population, &ensemble, level)?;
        if v_gn.disjoint_from(v_x) {
            return Ok((v_gn, n_t, true));
        }
        if n_t >= max_nt {
            return Ok((v_gn, n_t, false));
        }
        n_t = (n_t * 2).min(max_nt);
    }
}

/// Trajectory-mean estimator and total-variance estimate from paired
/// (trajectory, bootstrap-population) draws.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TotalEstimate {
    pub pf_t: f64,
    pub v_tot: IntervalEstimate,
    pub cov_tot: IntervalEstimate,
}

/// Pairs each trajectory with an independent bootstrap resample of the
/// population and takes mean and variance of the per-pair estimates.
pub fn estimate_total(
    population: &Population,
    ensemble: &TrajectoryEnsemble,
    stream: &RandomStream,
    level: f64,
) -> Result<TotalEstimate> {
    let n_t = ensemble.n_trajectories();
    if n_t < 2 {
        return Err(Error::InsufficientData { need: 2, got: n_t });
    }
    if ensemble.n_points() != population.len() {
        return Err(Error::Shape { expected: population.len(), got: ensemble.n_points() });
    }
    let n = population.len();
    let vals = ensemble.values();
    let weighted = matches!(population.source(), Source::ImportanceSampling(_));
    let mut pair_pf = Vec::with_capacity(n_t);
    for t in 0..n_t {
        let indices = population.bootstrap_indices(&stream.child(t as u64));
        let mut acc = 0.0;
        for &idx in &indices {
            if vals[(t, idx)] <= 0.0 {
                acc += if weighted { population.weights()[idx] } else { 1.0 };
            }
        }
        pair_pf.push(acc / n as f64);
    }
    let pf_t = pair_pf.iter().sum::<f64>() / n_t as f64;
    if !(pf_t > 0.0) {
        return Err(Error::UndefinedCov);
    }
    let v_tot = empirical_variance_ci(&pair_pf, level)?;
    let cov_tot = IntervalEstimate::new(
        v_tot.point.sqrt() / pf_t,
        v_tot.lower.sqrt() / pf_t,
        v_tot.upper.sqrt() / pf_t,
        level,
    )?;
    Ok(TotalEstimate { pf_t, v_tot, cov_tot })
}

/// Conservative reduced COV from the variance upper bounds.
pub fn cov_red(v_x_sup: f64, v_gn_sup: f64, pf: f64) -> Result<f64> {
    if !(pf > 0.0) {
        return Err(Error::UndefinedCov);
    }
    if v_x_sup < 0.0 || v_gn_sup < 0.0 {
        return Err(Error::Domain("variance bounds must be nonnegative".into()));
    }
    Ok((v_x_sup + v_gn_sup).sqrt() / pf)
}
