//! The estimator-variance decomposition behind the adaptive stopping rule:
//! sampling variance (finite population) and surrogate variance (imperfect
//! model), each with a confidence interval, plus the paired total estimate.

use nalgebra::{DMatrix, DVector};
use vbagp::gp::{initial_doe_inputs, DesignOfExperiments, GpModel, KernelKind};
use vbagp::population::Population;
use vbagp::trajectories::{build_kl, simulate_kl, KlConfig};
use vbagp::variance::{cov_red, estimate_total, estimate_v_x, widen_v_gn_until_separated};
use vbagp::RandomStream;
use vbagp::bench::problems::find;

fn main() -> vbagp::Result<()> {
    let stream = RandomStream::new(3);
    let problem = find("four-branch")?.build();

    // a deliberately small design, so the surrogate contribution is visible
    let inputs = initial_doe_inputs(10, problem.marginals(), &stream.child(0))?;
    let outputs = DVector::from_iterator(
        inputs.nrows(),
        inputs.row_iter().map(|r| problem.evaluate(&[r[0], r[1]]).unwrap()),
    );
    let model =
        GpModel::fit(DesignOfExperiments::new(inputs, outputs)?, KernelKind::Matern52, &stream.child(1))?;

    let population = Population::sample_mc(problem.marginals(), 20_000, &stream.child(2))?;
    let (mu, sd) = model.predict_batch(population.samples())?;
    let pf = (0..population.len()).filter(|&i| mu[i] <= 0.0).count() as f64
        / population.len() as f64;
    println!("surrogate pf: {:.4e}", pf);

    let level = 0.95;
    let v_x = estimate_v_x(&model, &population, level)?;
    println!(
        "sampling variance  V_X:  {:.3e}  [{:.3e}, {:.3e}]",
        v_x.point, v_x.lower, v_x.upper
    );

    // restrict trajectories to the points the surrogate cannot classify yet
    let uncertain: Vec<usize> =
        (0..population.len()).filter(|&i| sd[i] > 0.0 && (mu[i] / sd[i]).abs() < 6.0).collect();
    println!("uncertain points: {} of {}", uncertain.len(), population.len());
    let pts = DMatrix::from_fn(uncertain.len(), problem.dims(), |r, c| {
        population.samples()[(uncertain[r], c)]
    });

    let basis = build_kl(&model, &pts, &KlConfig::default(), &stream.child(3))?;
    let mut last = None;
    let (v_gn, n_t, separated) = widen_v_gn_until_separated(
        &v_x,
        &population,
        |n_t| {
            // trajectory values on the full population: decisive points keep
            // their predicted sign, uncertain points get the simulated draw
            let sim = simulate_kl(&model, &basis, &pts, n_t, &stream.child(4))?;
            let mut values = DMatrix::from_fn(n_t, population.len(), |_, i| mu[i]);
            for (r, &i) in uncertain.iter().enumerate() {
                for t in 0..n_t {
                    values[(t, i)] = sim.values()[(t, r)];
                }
            }
            let ens = vbagp::trajectories::TrajectoryEnsemble::from_values(values);
            last = Some(ens.clone());
            Ok(ens)
        },
        50,
        800,
        level,
    )?;
    println!(
        "surrogate variance V_Gn: {:.3e}  [{:.3e}, {:.3e}]  ({} trajectories, separated: {})",
        v_gn.point, v_gn.lower, v_gn.upper, n_t, separated
    );
    println!("reduced cov bound: {:.2}%", 100.0 * cov_red(v_x.upper, v_gn.upper, pf)?);

    let total = estimate_total(&population, &last.unwrap(), &stream.child(5), level)?;
    println!(
        "total: pf_t {:.4e}, cov_tot {:.2}%  [{:.2}%, {:.2}%]",
        total.pf_t,
        100.0 * total.cov_tot.point,
        100.0 * total.cov_tot.lower,
        100.0 * total.cov_tot.upper
    );
    Ok(())
}
