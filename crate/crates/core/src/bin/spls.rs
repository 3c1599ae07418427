use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use ndarray::Array1;

use spls::diffusion::phase_times;
use spls::experiment::{
    compare_algorithms, ou_distribution_report, run_experiment, Algorithm, ExperimentConfig,
    InitSpec, Prepared, Summary,
};
use spls::landscape::enumerate_stationary_points;
use spls::pls_core::EtaSchedule;
use spls::Error;

#[derive(Parser)]
#[command(name = "spls", version, about = "Streaming PLS experiments")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Multi-seed runs with trajectories, summary and phase report.
    Run(Overrides),
    /// GHA against MSG on shared sample streams.
    Compare(Overrides),
    /// Stationary points of the model and their classification.
    Landscape(Overrides),
    /// Predicted phase durations.
    Predict {
        #[command(flatten)]
        o: Overrides,
        #[arg(long)]
        nu: Option<f64>,
        #[arg(long)]
        epsilon: Option<f64>,
        #[arg(long)]
        mu: Option<f64>,
    },
    /// O-U comparison from the checkpoints stored in a run's summary.json.
    Oujudge {
        summary: PathBuf,
        /// Output file (defaults to ou_report.json next to the summary).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Config whose checkpoint list to use (defaults to the built-in list).
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Prints the default configuration as TOML.
    DefaultConfig,
}

#[derive(Args)]
struct Overrides {
    /// TOML (or .json) config file; missing keys take their defaults.
    #[arg(long, short)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    n_iters: Option<u64>,
    #[arg(long)]
    n_seeds: Option<u64>,
    #[arg(long)]
    base_seed: Option<u64>,
    /// Constant step size.
    #[arg(long)]
    eta: Option<f64>,
    /// `saddle:<i>` or `random`; a given pair can only be set in the config file.
    #[arg(long)]
    init: Option<String>,
    #[arg(long)]
    observe_prob: Option<f64>,
    #[arg(long)]
    log_stride: Option<u64>,
    #[arg(long)]
    epsilon_phase: Option<f64>,
}

impl Overrides {
    fn load(&self) -> Result<ExperimentConfig, Error> {
        let mut cfg = match &self.config {
            Some(p) => ExperimentConfig::from_file(p)?,
            None => ExperimentConfig::default(),
        };
        if let Some(v) = &self.out {
            cfg.output_dir = Some(v.clone());
        }
        if let Some(v) = self.n_iters {
            cfg.n_iters = v;
        }
        if let Some(v) = self.n_seeds {
            cfg.n_seeds = v;
        }
        if let Some(v) = self.base_seed {
            cfg.base_seed = v;
        }
        if let Some(v) = self.eta {
            cfg.eta = EtaSchedule::Constant { eta: v };
        }
        if let Some(v) = self.observe_prob {
            cfg.observe_prob = v;
        }
        if let Some(v) = self.log_stride {
            cfg.log.stride = v;
        }
        if let Some(v) = self.epsilon_phase {
            cfg.phases.epsilon = v;
        }
        if let Some(s) = &self.init {
            cfg.init = parse_init(s)?;
        }
        Ok(cfg)
    }
}

fn parse_init(s: &str) -> Result<InitSpec, Error> {
    if s == "random" || s == "random_sphere" {
        return Ok(InitSpec::RandomSphere);
    }
    if let Some(i) = s.strip_prefix("saddle:") {
        let index = i.parse().map_err(|_| Error::Config {
            field: "init".into(),
            message: format!("bad saddle index `{i}`"),
        })?;
        return Ok(InitSpec::Saddle { index });
    }
    Err(Error::Config {
        field: "init".into(),
        message: format!("expected `saddle:<i>` or `random`, got `{s}`"),
    })
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config { .. } | Error::InvalidArgument(_) | Error::Parse { .. } | Error::RowCountMismatch { .. } => 2,
        Error::Io(_) | Error::Json(_) => 1,
        _ => 3,
    }
}

fn print_json<T: serde::Serialize>(v: &T) -> Result<(), Error> {
    println!("{}", serde_json::to_string_pretty(v)?);
    Ok(())
}

fn write_or_print<T: serde::Serialize>(out: Option<&Path>, name: &str, v: &T) -> Result<(), Error> {
    match out {
        Some(dir) => {
            std::fs::create_dir_all(dir)?;
            let path = dir.join(name);
            std::fs::write(&path, serde_json::to_string_pretty(v)? + "\n")?;
            eprintln!("wrote {}", path.display());
            Ok(())
        }
        None => print_json(v),
    }
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.cmd {
        Cmd::Run(o) => {
            let cfg = o.load()?;
            let b = run_experiment(&cfg)?;
            let s = &b.summary;
            eprintln!(
                "{} seeds, {} iterations: {} end with h1^2 >= 0.99",
                s.n_seeds, s.n_iters, s.aligned_099
            );
            if let Some(r) = &b.phase_report {
                eprintln!(
                    "median escape {:?}, arrival {:?}, convergence {:?}",
                    r.escape.median, r.arrival.median, r.convergence.median
                );
            }
            if cfg.output_dir.is_none() {
                print_json(&b.summary)?;
            }
        }
        Cmd::Compare(o) => {
            let mut cfg = o.load()?;
            cfg.algorithm = Algorithm::Both;
            let c = compare_algorithms(&cfg)?;
            let (g, m) = c.median_ms_per_1k();
            eprintln!(
                "GHA reached gap <= {:.4} first on {}/{} seeds; median ms per 1e3 iterations: gha {:.3?}, msg {:.3?}",
                c.target_gap,
                c.gha_faster_count(),
                c.seeds.len(),
                g,
                m
            );
            if let Some(dir) = &cfg.output_dir {
                std::fs::create_dir_all(dir)?;
                c.write_to(dir)?;
            } else {
                print_json(&c.seeds)?;
            }
        }
        Cmd::Landscape(o) => {
            let cfg = o.load()?;
            cfg.validate()?;
            let prep = Prepared::new(&cfg)?;
            let points: Vec<_> = enumerate_stationary_points(&prep.sigma_xy)?
                .into_iter()
                .map(|p| {
                    serde_json::json!({
                        "kind": p.kind,
                        "singular_value": p.singular_value,
                        "multiplier": p.multiplier,
                        "max_hessian_eig": p.max_hessian_eig,
                        "reduced_max_eig": p.reduced_max_eig,
                        "kkt_residual": p.kkt_residual,
                        "u": p.u.to_vec(),
                        "v": p.v.to_vec(),
                    })
                })
                .collect();
            write_or_print(cfg.output_dir.as_deref(), "landscape.json", &points)?;
        }
        Cmd::Predict { o, nu, epsilon, mu } => {
            let cfg = o.load()?;
            cfg.validate()?;
            let prep = Prepared::new(&cfg)?;
            let mom = prep.moments.as_ref().ok_or_else(|| Error::Config {
                field: "model".into(),
                message: "prediction needs a synthetic model".into(),
            })?;
            let EtaSchedule::Constant { eta } = cfg.eta else {
                return Err(Error::Config {
                    field: "eta".into(),
                    message: "prediction needs a constant step size".into(),
                });
            };
            let lambda: Array1<f64> = prep.lambda();
            let p = phase_times(
                &lambda,
                mom,
                eta,
                nu.unwrap_or(cfg.phases.nu),
                epsilon.unwrap_or(cfg.phases.epsilon),
                mu.unwrap_or(cfg.phases.mu_exponent),
            )?;
            write_or_print(cfg.output_dir.as_deref(), "prediction.json", &p)?;
        }
        Cmd::Oujudge {
            summary,
            out,
            config,
        } => {
            let text = std::fs::read_to_string(&summary)?;
            let s: Summary = serde_json::from_str(&text)?;
            let theory = s.ou_theory.as_ref().ok_or_else(|| Error::Config {
                field: "init".into(),
                message: "the run has no O-U theory (needs a synthetic model, saddle init and constant step)".into(),
            })?;
            let cfg = match config {
                Some(p) => ExperimentConfig::from_file(p)?,
                None => ExperimentConfig::default(),
            };
            let cps: Vec<_> = cfg
                .checkpoints
                .into_iter()
                .filter(|c| c.iter <= s.n_iters)
                .collect();
            let report = ou_distribution_report(&s.checkpoints, &cps, theory)?;
            let path = out.unwrap_or_else(|| {
                summary
                    .parent()
                    .unwrap_or(Path::new("."))
                    .join("ou_report.json")
            });
            std::fs::write(&path, serde_json::to_string_pretty(&report)? + "\n")?;
            for c in &report.checkpoints {
                eprintln!(
                    "k={:>7} h{} {:?}: var {:.4e} vs theory {:.4e} (ratio {:.3?}, z {:.2?})",
                    c.iter, c.coord, c.phase, c.sample_var, c.theory_var, c.var_ratio, c.var_z
                );
            }
            eprintln!("wrote {}", path.display());
        }
        Cmd::DefaultConfig => print!("{}", ExperimentConfig::default().to_toml_string()),
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
