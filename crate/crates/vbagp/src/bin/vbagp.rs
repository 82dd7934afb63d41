use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use vbagp::algorithm::VbagpConfig;
use vbagp::bench::experiment::{
    aggregate, plot_data, read_runs, reference_run, run_experiment, ExperimentConfig, Method,
};
use vbagp::bench::problems::{find, registry};

#[derive(Parser)]
#[command(name = "vbagp", about = "Active-learning failure-probability experiments", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// List the registered benchmark problems and their reference values.
    ListProblems,
    /// Run a replicated experiment and persist the records.
    Run(RunArgs),
    /// Recompute and print the aggregate report of a persisted experiment.
    Report {
        /// Directory holding config.toml and the run records.
        #[arg(long)]
        out: PathBuf,
    },
    /// Compute a brute-force reference estimate for a problem.
    Reference {
        #[arg(long)]
        problem: String,
        /// Sample size of the reference estimator.
        #[arg(long, default_value_t = 1_000_000)]
        n: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Emit the per-iteration traces of a persisted experiment as CSV.
    PlotData {
        /// Directory holding the run records.
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    problem: Option<String>,
    #[arg(long)]
    method: Option<Method>,
    /// Seeded replications (seeds seed, seed+1, ...).
    #[arg(long)]
    runs: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// TOML experiment configuration; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory for the run records and report.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Target coefficient of variation of the final estimate.
    #[arg(long)]
    cov_max: Option<f64>,
    /// Initial estimation population size.
    #[arg(long)]
    n_mc_init: Option<usize>,
    /// Initial design size.
    #[arg(long)]
    n_doe_init: Option<usize>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(all_converged) => {
            if all_converged {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(2)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

/// Returns whether every run converged.
fn dispatch(command: Command) -> vbagp::Result<bool> {
    match command {
        Command::ListProblems => {
            for p in registry() {
                println!(
                    "{:<18} pf={:<10.3e} cov={:<5.1}% {}",
                    p.name,
                    p.reference.pf,
                    100.0 * p.reference.cov,
                    p.description
                );
                println!("{:<18} reference: {}", "", p.reference.provenance);
            }
            Ok(true)
        }
        Command::Run(args) => run(args),
        Command::Report { out } => {
            let runs = read_runs(&out)?;
            let config = read_config(&out)?;
            let reference = find(&config.problem).ok().map(|s| s.reference.pf);
            let agg = aggregate(&runs, reference)?;
            println!("problem:   {}", config.problem);
            println!("method:    {}", config.method);
            println!("runs:      {} ({} converged)", agg.runs, agg.converged_runs);
            println!("mean pf:   {:.4e} (cov {:.2}%)", agg.mean_pf, 100.0 * agg.cov_pf);
            println!("mean calls {:.1} (cov {:.2}%)", agg.mean_n_call, 100.0 * agg.cov_n_call);
            if let Some(e_r) = agg.e_r {
                println!("e_r:       {:.2}%", 100.0 * e_r);
            }
            if let Some(nu) = agg.nu_mc {
                println!("nu_mc:     {:.0}", nu);
            }
            Ok(agg.converged_runs == agg.runs)
        }
        Command::Reference { problem, n, seed } => {
            let spec = find(&problem)?;
            let record = reference_run(&spec, n, seed)?;
            let pf = record.pf.as_ref().expect("reference estimate");
            println!(
                "{}: pf={:.4e} cov={:.2}% n_calls={} (published {:.4e}, cov {:.1}%)",
                spec.name,
                pf.value,
                100.0 * pf.cov,
                record.n_calls,
                spec.reference.pf,
                100.0 * spec.reference.cov
            );
            Ok(true)
        }
        Command::PlotData { out } => {
            let runs = read_runs(&out)?;
            let mut stdout = std::io::stdout().lock();
            plot_data(&runs, &mut stdout)?;
            Ok(true)
        }
    }
}

fn read_config(dir: &std::path::Path) -> vbagp::Result<ExperimentConfig> {
    let text = std::fs::read_to_string(dir.join("config.toml"))?;
    toml::from_str(&text).map_err(|e| vbagp::Error::Serialize(e.to_string()))
}

fn run(args: RunArgs) -> vbagp::Result<bool> {
    let mut config = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)?;
            toml::from_str::<ExperimentConfig>(&text)
                .map_err(|e| vbagp::Error::Serialize(e.to_string()))?
        }
        None => ExperimentConfig {
            problem: String::new(),
            method: Method::VbAgpMcs,
            n_runs: 1,
            seed: 1,
            algorithm: VbagpConfig::default(),
        },
    };
    if let Some(p) = args.problem {
        config.problem = p;
    }
    if let Some(m) = args.method {
        config.method = m;
    }
    if let Some(r) = args.runs {
        config.n_runs = r;
    }
    if let Some(s) = args.seed {
        config.seed = s;
    }
    if let Some(c) = args.cov_max {
        config.algorithm.cov_max = c;
    }
    if let Some(n) = args.n_mc_init {
        config.algorithm.n_mc_init = n;
    }
    if let Some(n) = args.n_doe_init {
        config.algorithm.n_doe_init = n;
    }
    if config.problem.is_empty() {
        return Err(vbagp::Error::Config(
            "a problem is required (--problem or a config file)".into(),
        ));
    }

    let spec = find(&config.problem)?;
    let report = run_experiment(
        &spec,
        config.method,
        config.n_runs,
        &config.algorithm,
        config.seed,
    )?;
    if let Some(dir) = &args.out {
        vbagp::bench::experiment::write_experiment(dir, &report)?;
    }
    let agg = &report.aggregates;
    println!(
        "{} / {} on {}: {}/{} converged, mean pf {:.4e} (cov {:.2}%), mean calls {:.1}",
        config.method,
        config.n_runs,
        config.problem,
        agg.converged_runs,
        agg.runs,
        agg.mean_pf,
        100.0 * agg.cov_pf,
        agg.mean_n_call
    );
    for line in &report.failures {
        eprintln!("run failed: {line}");
    }
    Ok(report.failures.is_empty() && agg.converged_runs == agg.runs)
}
