use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use drls::harness::{
    self, Experiment, ExperimentConfig, HarnessError, TopologySpec, DEFAULT_TOLERANCE_DB,
};

/// Distributed RLS experiments: simulate, predict and compare.
#[derive(Debug, Parser)]
#[command(name = "drls", version)]
struct Cli {
    /// Experiment configuration file. Built-in defaults are used when absent.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides `master_seed` (and `topology.seed` for gen-topology).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory for CSV files.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    /// Worker threads for the Monte Carlo ensemble.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Print (and save) the configured topology as an edge list.
    GenTopology,
    /// Run the ensemble and write global.csv and per_sensor.csv.
    Simulate,
    /// Solve for the steady state and write prediction.csv.
    Predict,
    /// Predict, simulate and write comparison.csv.
    Compare {
        #[arg(long, default_value_t = DEFAULT_TOLERANCE_DB)]
        tolerance: f64,
    },
    /// Report the mean-stability bound, the unit eigenvalues and ρ(Ψ).
    Stability,
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig, HarnessError> {
    let mut cfg = match &cli.config {
        Some(path) => ExperimentConfig::from_file(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.master_seed = seed;
    }
    Ok(cfg)
}

fn write_out(dir: &Path, name: &str, text: &str) -> Result<PathBuf, HarnessError> {
    fs::create_dir_all(dir).map_err(|e| HarnessError::Io(format!("cannot create {}: {e}", dir.display())))?;
    let path = dir.join(name);
    fs::write(&path, text).map_err(|e| HarnessError::Io(format!("cannot write {}: {e}", path.display())))?;
    Ok(path)
}

fn run(cli: &Cli) -> Result<(), HarnessError> {
    let mut cfg = load_config(cli)?;
    match &cli.command {
        Command::GenTopology => {
            if let (Some(seed), TopologySpec::Geometric { seed: s, .. }) = (cli.seed, &mut cfg.topology) {
                *s = seed;
            }
            let topo = harness::build_topology(&cfg.topology)?;
            let text = topo.to_edge_list();
            print!("{text}");
            if cli.out != Path::new(".") {
                let path = write_out(&cli.out, "topology.txt", &text)?;
                eprintln!("wrote {}", path.display());
            }
        }
        Command::Simulate => {
            let exp = Experiment::from_config(&cfg)?;
            let out = exp.run_ensemble()?;
            let g = write_out(&cli.out, "global.csv", &out.series.global_csv())?;
            let s = write_out(&cli.out, "per_sensor.csv", &out.series.per_sensor_csv())?;
            eprintln!("wrote {} and {}", g.display(), s.display());
        }
        Command::Predict => {
            let exp = Experiment::from_config(&cfg)?;
            let report = exp.predict()?;
            let path = write_out(&cli.out, "prediction.csv", &report.to_csv())?;
            println!(
                "global MSD {:.3} dB, EMSE {:.3} dB, MSE {:.3} dB",
                report.global.msd_db(),
                report.global.emse_db(),
                report.global.mse_db()
            );
            eprintln!("wrote {}", path.display());
        }
        Command::Compare { tolerance } => {
            let exp = Experiment::from_config(&cfg)?;
            let (report, _) = exp.compare_theory(*tolerance)?;
            let path = write_out(&cli.out, "comparison.csv", &report.to_csv())?;
            print!("{}", report.summary());
            eprintln!("wrote {}", path.display());
        }
        Command::Stability => {
            let exp = Experiment::from_config(&cfg)?;
            print!("{}", exp.stability()?.summary());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.threads {
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(|| run(&cli)),
            Err(e) => Err(HarnessError::InvalidParameter(format!("cannot start {n} threads: {e}"))),
        },
        None => run(&cli),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
