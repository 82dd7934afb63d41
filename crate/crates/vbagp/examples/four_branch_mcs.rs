//! Adaptive failure-probability estimation on the four-branch series system
//! with the Monte Carlo estimation population, printing the decision taken
//! at every outer iteration.

use vbagp::algorithm::{run_vbagp_mcs, VbagpConfig};
use vbagp::bench::problems::find;

fn main() -> vbagp::Result<()> {
    let spec = find("four-branch")?;
    let problem = spec.build();
    let config = VbagpConfig {
        n_doe_init: 16,
        n_mc_init: 50_000,
        cov_max: 0.03,
        ..VbagpConfig::default()
    };

    let record = run_vbagp_mcs(&problem, &config, 42)?;

    println!("{:>4} {:>6} {:>10} {:>11} {:>9}  action", "iter", "n_doe", "pop", "pf", "cov_red");
    for it in &record.iterations {
        println!(
            "{:>4} {:>6} {:>10} {:>11.4e} {:>9.4}  {}",
            it.index,
            it.n_doe,
            it.population_size,
            it.pf.unwrap_or(f64::NAN),
            it.cov_red.unwrap_or(f64::NAN),
            it.action
        );
    }

    let pf = record.pf.as_ref().expect("converged estimate");
    println!();
    println!("converged: {}", record.converged);
    println!("pf:        {:.4e} (reference {:.4e})", pf.value, spec.reference.pf);
    println!("total cov: {:.2}%", 100.0 * record.cov_tot.unwrap_or(f64::NAN));
    println!("G calls:   {}", record.n_calls);
    Ok(())
}
