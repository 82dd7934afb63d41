//! Rare-event estimation with the importance-sampling mode: the four-branch
//! system with the failure threshold moved so that pf ≈ 5.3e-5, far below
//! what the plain Monte Carlo mode can resolve at a small population.

use vbagp::algorithm::{run_vbagp_is, VbagpConfig};
use vbagp::bench::problems::find;

fn main() -> vbagp::Result<()> {
    let spec = find("four-branch-rare")?;
    let problem = spec.build();
    let config = VbagpConfig {
        n_doe_init: 12,
        cov_max: 0.03,
        ..VbagpConfig::default()
    };

    let record = run_vbagp_is(&problem, &config, 7)?;

    for it in &record.iterations {
        println!(
            "iter {:>2}: n_doe {:>2}, pop {:>6}, pf {:.3e}  {}",
            it.index,
            it.n_doe,
            it.population_size,
            it.pf.unwrap_or(f64::NAN),
            it.action
        );
    }

    let pf = record.pf.as_ref().expect("converged estimate");
    println!();
    println!("pf:        {:.4e} (reference {:.4e})", pf.value, spec.reference.pf);
    println!("total cov: {:.2}%", 100.0 * record.cov_tot.unwrap_or(f64::NAN));
    println!("G calls:   {}", record.n_calls);
    Ok(())
}
