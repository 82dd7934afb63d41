//! Learning functions for adaptive enrichment (U and expected feasibility),
//! the misclassification probability, candidate selection, and the plain
//! adaptive-kriging MCS loop used as a comparison baseline.

use nalgebra::DMatrix;

use crate::algorithm::{IterationRecord, LearningKind, RunRecord, VbagpConfig};
use crate::error::{Error, Result};
use crate::gp::{initial_doe_inputs, DesignOfExperiments, GpModel, Prediction};
use crate::math::{phi, phi_pdf};
use crate::population::{estimate_pf_mc_values, Population};
use crate::problem::Problem;
use crate::stream::RandomStream;

/// P[G_n(x) ≤ 0] = Φ(−μ_n/σ_n); the σ_n = 0 limit classifies by sign.
pub fn misclassification_prob(p: &Prediction) -> f64 {
    if p.std_dev > 0.0 {
        phi(-p.mean / p.std_dev)
    } else if p.mean <= 0.0 {
        1.0
    } else {
        0.0
    }
}

/// U(x) = |μ_n|/σ_n, +∞ when the point is fully resolved.
pub fn u_function(p: &Prediction) -> f64 {
    if p.std_dev > 0.0 {
        p.mean.abs() / p.std_dev
    } else {
        f64::INFINITY
    }
}

/// Expected feasibility about the limit state with half-width `epsilon`.
pub fn eff_function(p: &Prediction, epsilon: f64) -> f64 {
    let (mu, sigma) = (p.mean, p.std_dev);
    if sigma <= 0.0 {
        return 0.0;
    }
    let z0 = -mu / sigma;
    let zm = (-epsilon - mu) / sigma;
    let zp = (epsilon - mu) / sigma;
    mu * (2.0 * phi(z0) - phi(zm) - phi(zp))
        - sigma * (2.0 * phi_pdf(z0) - phi_pdf(zm) - phi_pdf(zp))
        + epsilon * (phi(zp) - phi(zm))
}

/// Learning score of one prediction: the quantity the loop extremizes.
fn score(kind: LearningKind, p: &Prediction) -> f64 {
    match kind {
        LearningKind::U => u_function(p),
        LearningKind::Eff => eff_function(p, 2.0 * p.std_dev),
    }
}

fn better(kind: LearningKind, a: f64, b: f64) -> bool {
    match kind {
        LearningKind::U => a < b,
        LearningKind::Eff => a > b,
    }
}

/// Index of the best enrichment candidate; DoE duplicates are skipped and
/// ties go to the lowest index.
pub fn select_candidate(
    model: &GpModel,
    candidates: &DMatrix<f64>,
    kind: LearningKind,
) -> Result<usize> {
    if candidates.nrows() == 0 {
        return Err(Error::ExhaustedCandidates);
    }
    let (mu, sd) = model.predict_batch(candidates)?;
    select_scored(model, candidates, &mu, &sd, kind)
}

/// Same, on predictions the caller already has.
pub(crate) fn select_scored(
    model: &GpModel,
    candidates: &DMatrix<f64>,
    mu: &nalgebra::DVector<f64>,
    sd: &nalgebra::DVector<f64>,
    kind: LearningKind,
) -> Result<usize> {
    let mut order: Vec<usize> = (0..candidates.nrows()).collect();
    let scores: Vec<f64> = (0..candidates.nrows())
        .map(|i| score(kind, &Prediction { mean: mu[i], std_dev: sd[i] }))
        .collect();
    order.sort_by(|&a, &b| {
        if better(kind, scores[a], scores[b]) {
            std::cmp::Ordering::Less
        } else if better(kind, scores[b], scores[a]) {
            std::cmp::Ordering::Greater
        } else {
            a.cmp(&b)
        }
    });
    for &idx in &order {
        let row: Vec<f64> = candidates.row(idx).iter().copied().collect();
        if !model.doe().contains(&row) {
            return Ok(idx);
        }
    }
    Err(Error::ExhaustedCandidates)
}

/// Whether the learning loop may stop on these predictions.
pub(crate) fn stopping_reached(
    kind: LearningKind,
    mu: &nalgebra::DVector<f64>,
    sd: &nalgebra::DVector<f64>,
    config: &VbagpConfig,
) -> bool {
    match kind {
        LearningKind::U => (0..mu.len()).all(|i| {
            u_function(&Prediction { mean: mu[i], std_dev: sd[i] }) >= config.u_stop
        }),
        LearningKind::Eff => (0..mu.len()).all(|i| {
            let p = Prediction { mean: mu[i], std_dev: sd[i] };
            eff_function(&p, 2.0 * p.std_dev) <= config.eff_stop
        }),
    }
}

/// Builds the initial design by evaluating the problem on an LHS sample.
pub(crate) fn initial_model(
    problem: &Problem,
    config: &VbagpConfig,
    stream: &RandomStream,
) -> Result<(GpModel, usize)> {
    let inputs = initial_doe_inputs(config.n_doe_init, problem.marginals(), &stream.child(1))?;
    let mut outputs = Vec::with_capacity(config.n_doe_init);
    for i in 0..inputs.nrows() {
        let row: Vec<f64> = inputs.row(i).iter().copied().collect();
        outputs.push(problem.evaluate(&row)?);
    }
    let doe = DesignOfExperiments::new(inputs, nalgebra::DVector::from_vec(outputs))?;
    let model = GpModel::fit(doe, config.kernel, &stream.child(2))?;
    Ok((model, config.n_doe_init))
}

/// Plain adaptive-kriging MCS: enrich until the learning criterion is met,
/// then grow the population until the sampling COV target holds, restarting
/// learning after each growth.
pub fn ak_mcs_run(
    problem: &Problem,
    config: &VbagpConfig,
    seed: u64,
) -> Result<RunRecord> {
    let stream = RandomStream::new(seed);
    let (mut model, mut n_calls) = initial_model(problem, config, &stream.child(10))?;
    let mut population =
        Population::sample_mc(problem.marginals(), config.n_mc_init, &stream.child(11))?;

    let method = match config.learning {
        LearningKind::U => "ak-mcs-u",
        LearningKind::Eff => "ak-mcs-eff",
    };
    let mut record = RunRecord {
        problem: problem.name.clone(),
        method: method.into(),
        seed,
        converged: false,
        n_calls,
        population_size: population.len(),
        pf: None,
        cov_tot: None,
        cov_red: None,
        iterations: Vec::new(),
        model: None,
    };

    let mut iter = 0;
    let enrich_stream = stream.child(12);
    loop {
        let (mu, sd) = model.predict_batch(population.samples())?;
        let values: Vec<f64> = mu.iter().copied().collect();
        let est = estimate_pf_mc_values(&population, &values)?;

        let mut push_iter = |action: &str, n_calls: usize| {
            record.iterations.push(IterationRecord {
                index: iter,
                n_doe: model.doe().len(),
                population_size: population.len(),
                n_calls,
                pf: Some(est.value),
                cov: Some(est.cov),
                v_x: None,
                v_gn: None,
                cov_tot: None,
                cov_red: None,
                n_t: None,
                action: action.into(),
            });
        };

        if stopping_reached(config.learning, &mu, &sd, config) {
            if est.cov <= config.cov_max {
                push_iter("stop: learning criterion and COV target met", n_calls);
                record.converged = true;
                record.pf = Some(est);
                break;
            }
            let additional =
                ((population.len() as f64 * config.growth_factor).ceil() as usize).max(1);
            if population.len() + additional > config.n_mc_max {
                push_iter("abort: population cap reached before COV target", n_calls);
                record.pf = Some(est);
                break;
            }
            push_iter("grow population: COV above target", n_calls);
            population = population.extend(additional, &enrich_stream.child(iter as u64))?;
        } else {
            if n_calls >= config.max_evaluations {
                push_iter("abort: evaluation budget exhausted", n_calls);
                record.pf = Some(est);
                break;
            }
            let idx = select_scored(&model, population.samples(), &mu, &sd, config.learning)?;
            let x = population.point(idx);
            let y = problem.evaluate(&x)?;
            n_calls += 1;
            push_iter("enrich design", n_calls);
            model = model.enrich(&x, y, &enrich_stream.child(iter as u64))?;
        }
        iter += 1;
    }

    record.n_calls = n_calls;
    record.population_size = population.len();
    record.model = Some(model.to_document());
    Ok(record)
}
