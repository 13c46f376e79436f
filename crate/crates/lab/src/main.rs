use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use ddlab::experiments::{dense_oracle_gap, ground_state_check};
use ddlab::{report, run, ExperimentConfig, ExperimentId, LabError};
use ddlab_core::make_grid;
use ddlab_core::weights::{build_cutoff_family, exp_weight_family, truncated_weight, PolyWeight};

#[derive(Parser)]
#[command(name = "ddlab", version, about = "Decay and smoothing experiments for ZK and KdV")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment from a preset, a TOML file, or both.
    Run {
        /// TOML configuration; keys not given fall back to the preset.
        config: Option<PathBuf>,
        #[arg(long, short)]
        experiment: Option<ExperimentId>,
        /// Override a key, e.g. `--set solver.dt=0.005`.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
        #[arg(long, short)]
        output: Option<PathBuf>,
        /// Print the resolved configuration and exit.
        #[arg(long)]
        print_config: bool,
    },
    /// Regenerate CSV, verdicts and plot data for a run directory.
    Report { run_dir: PathBuf },
    /// Tabulate the cutoff family and the weights built on it as CSV.
    DumpWeights {
        #[arg(long, default_value_t = 1.0)]
        eps: f64,
        #[arg(long, default_value_t = 5.0)]
        tau: f64,
        #[arg(long, default_value_t = 2.0)]
        r: f64,
        #[arg(long, default_value_t = 0.5)]
        b: f64,
        #[arg(long, default_value_t = 0.1)]
        eta: f64,
        #[arg(long, default_value_t = 4.0)]
        n: f64,
        #[arg(long, default_value_t = 1001)]
        samples: usize,
    },
    /// Compare the fast quantization against the dense sum on small grids.
    PsidoTest {
        #[arg(long, default_value_t = 16)]
        points: usize,
        #[arg(long = "box", default_value_t = 12.0)]
        box_length: f64,
    },
    /// Solve for the unit-speed ground state and print its diagnostics.
    GroundState {
        #[arg(long = "box", default_value_t = 64.0)]
        box_length: f64,
        #[arg(long, default_value_t = 256)]
        points: usize,
    },
}

fn main() -> ExitCode {
    match dispatch(Cli::parse().command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

/// `Ok(false)` when the command ran but some verdict failed.
fn dispatch(cmd: Command) -> Result<bool, LabError> {
    match cmd {
        Command::Run { config, experiment, overrides, output, print_config } => {
            let mut cfg = match &config {
                Some(path) => ExperimentConfig::load(path, experiment, &overrides)?,
                None => ExperimentConfig::resolve(None, experiment, &overrides)?,
            };
            if output.is_some() {
                cfg.output = output;
            }
            if print_config {
                print!("{}", cfg.to_toml());
                return Ok(true);
            }
            let (manifest, dir) = run(&cfg)?;
            let diagnostics = report::load_diagnostics(&dir, &manifest)?;
            for v in &diagnostics.verdicts {
                let tag = match (v.passed, v.informational) {
                    (true, _) => "pass",
                    (false, true) => "info",
                    (false, false) => "FAIL",
                };
                println!("[{tag}] {}: {}", v.name, v.detail);
            }
            println!(
                "{}: {} passed, {} failed, {} informational in {:.1}s -> {}",
                manifest.experiment,
                manifest.verdicts.passed,
                manifest.verdicts.failed,
                manifest.verdicts.informational,
                manifest.wall_clock_seconds,
                dir.display()
            );
            Ok(manifest.verdicts.all_passed)
        }
        Command::Report { run_dir } => {
            let files = report(&run_dir)?;
            println!("{}", files.timeseries.display());
            println!("{}", files.verdicts.display());
            println!("{} plot files in {}", files.plots.len(), run_dir.join(report::PLOT_DIR).display());
            Ok(true)
        }
        Command::DumpWeights { eps, tau, r, b, eta, n, samples } => {
            let c = build_cutoff_family(eps, tau)?;
            let w = PolyWeight::new(r, c, [1.0, 0.0], 0.0, 0.0);
            let e = exp_weight_family(b, eta)?;
            let tw = truncated_weight(n, 1)?;
            let (lo, hi) = (-2.0 * tau, 3.0 * tau);
            let mut out = std::io::stdout().lock();
            let mut line = |s: String| writeln!(out, "{s}").map_err(|e| LabError::Io(e.to_string()));
            line("s,chi,phi,psi,chi_prime,poly_weight,q,rho,p,w_n".into())?;
            for i in 0..samples {
                let s = lo + (hi - lo) * i as f64 / (samples.max(2) - 1) as f64;
                line(format!(
                    "{s:.10e},{:.10e},{:.10e},{:.10e},{:.10e},{:.10e},{:.10e},{:.10e},{:.10e},{:.10e}",
                    c.chi(s),
                    c.phi(s),
                    c.psi(s),
                    c.chi_derivative(s, 1),
                    w.profile_derivative(s, 0),
                    e.q(s),
                    e.rho(s),
                    e.p(s),
                    tw.eval(&[s])
                ))?;
            }
            Ok(true)
        }
        Command::PsidoTest { points, box_length } => {
            let gaps = dense_oracle_gap(points, box_length)?;
            let mut ok = true;
            for (name, gap) in gaps {
                ok &= gap < 1e-10;
                println!("{gap:.3e}  {name}");
            }
            Ok(ok)
        }
        Command::GroundState { box_length, points } => {
            let gs = ground_state_check(&make_grid(2, box_length, points)?)?;
            println!("iterations     {}", gs.iterations);
            println!("residual       {:.3e}", gs.residual);
            println!("decay rate     {:.6}", gs.decay_rate);
            println!("negativity     {:.3e}", gs.negativity);
            println!("asymmetry      {:.3e}", gs.asymmetry);
            println!("peak           {:.12}", gs.q.max_abs());
            Ok(gs.residual < 1e-9)
        }
    }
}
