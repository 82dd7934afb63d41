//! Evaluation-count comparison on the four-branch system: classic active
//! learning with the U and EFF criteria against the variance-based stopping
//! rule, averaged over a handful of seeds.

use vbagp::algorithm::VbagpConfig;
use vbagp::bench::experiment::{run_experiment, Method};
use vbagp::bench::problems::find;

fn main() -> vbagp::Result<()> {
    let spec = find("four-branch")?;
    let config = VbagpConfig {
        n_doe_init: 16,
        n_mc_init: 50_000,
        cov_max: 0.03,
        ..VbagpConfig::default()
    };
    let n_runs = 5;

    println!("{:<12} {:>10} {:>11} {:>8}", "method", "mean calls", "mean pf", "e_r");
    for method in [Method::AkMcsU, Method::AkMcsEff, Method::VbAgpMcs] {
        let report = run_experiment(&spec, method, n_runs, &config, 1)?;
        let a = &report.aggregates;
        println!(
            "{:<12} {:>10.1} {:>11.4e} {:>7.2}%",
            method.name(),
            a.mean_n_call,
            a.mean_pf,
            100.0 * a.e_r.unwrap_or(f64::NAN)
        );
    }
    println!("\nreference pf: {:.4e}", spec.reference.pf);
    Ok(())
}
