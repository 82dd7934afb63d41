//! Conditioned Gaussian-process trajectories on a 1-D toy function: exact
//! joint draws through a dense Cholesky against the Karhunen-Loève shortcut,
//! which is what makes large estimation populations affordable.

use nalgebra::{DMatrix, DVector};
use vbagp::gp::{DesignOfExperiments, GpModel, KernelKind};
use vbagp::trajectories::{build_kl, simulate_direct, simulate_kl, KlConfig};
use vbagp::RandomStream;

fn main() -> vbagp::Result<()> {
    let stream = RandomStream::new(9);
    let f = |x: f64| x.sin() + 0.5 * x;

    // nine observations of f on [-2, 2]
    let xs: Vec<f64> = (0..9).map(|i| -2.0 + 4.0 * i as f64 / 8.0).collect();
    let inputs = DMatrix::from_iterator(9, 1, xs.iter().copied());
    let outputs = DVector::from_iterator(9, xs.iter().map(|&x| f(x)));
    let model =
        GpModel::fit(DesignOfExperiments::new(inputs, outputs)?, KernelKind::Matern52, &stream.child(0))?;

    // a fine prediction grid, deliberately denser than the design
    let n_grid = 60;
    let grid = DMatrix::from_fn(n_grid, 1, |i, _| -2.2 + 4.4 * i as f64 / (n_grid - 1) as f64);

    let n_t = 400;
    let direct = simulate_direct(&model, &grid, n_t, &stream.child(1))?;
    let basis = build_kl(&model, &grid, &KlConfig::default(), &stream.child(2))?;
    let kl = simulate_kl(&model, &basis, &grid, n_t, &stream.child(3))?;
    println!(
        "eigenbasis: {} modes capturing {:.4} of the trace",
        basis.order(),
        basis.captured_fraction()
    );

    // pointwise means and standard deviations of both ensembles should agree
    // with the model's own prediction
    let (mu, sd) = model.predict_batch(&grid)?;
    println!(
        "{:>7} {:>9} {:>9} {:>9} {:>9} {:>9} {:>9}",
        "x", "mean", "sd", "dir mean", "dir sd", "kl mean", "kl sd"
    );
    for i in (0..n_grid).step_by(6) {
        let stats = |v: &vbagp::trajectories::TrajectoryEnsemble| {
            let col: Vec<f64> = (0..n_t).map(|t| v.values()[(t, i)]).collect();
            let m = col.iter().sum::<f64>() / n_t as f64;
            let var = col.iter().map(|&y| (y - m) * (y - m)).sum::<f64>() / (n_t - 1) as f64;
            (m, var.sqrt())
        };
        let (dm, ds) = stats(&direct);
        let (km, ks) = stats(&kl);
        println!(
            "{:>7.3} {:>9.4} {:>9.4} {:>9.4} {:>9.4} {:>9.4} {:>9.4}",
            grid[(i, 0)],
            mu[i],
            sd[i],
            dm,
            ds,
            km,
            ks
        );
    }
    Ok(())
}
