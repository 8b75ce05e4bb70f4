use std::fs::File;
use std::io::BufWriter;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use dppmc::experiments::{run_variance_decay, Bump, ExperimentConfig};
use dppmc::variance::{cheb_coeffs, dirichlet_bound, omega_f_omega_sq, sigma_f_sq};
use dppmc::{CDKernel, Error, JacobiParams, ProductMeasure, Result, Sampler, SamplerConfig};

#[derive(Parser)]
#[command(
    name = "dppmc",
    version,
    about = "Monte Carlo quadrature with orthogonal polynomial ensembles"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the variance-decay experiment described by a TOML config.
    Run {
        #[arg(long)]
        config: PathBuf,
    },
    /// Draw one weighted sample and write it as CSV.
    Sample {
        #[arg(long)]
        d: usize,
        #[arg(long)]
        n: usize,
        /// `jacobi:α,β;α,β;…` with one pair per dimension, or a single pair
        /// for all of them. Defaults to the equilibrium measure.
        #[arg(long)]
        measure: Option<String>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 0)]
        stream: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print σ², Ω² and the Dirichlet bound of a test function as JSON.
    Variance {
        #[arg(long, value_enum)]
        f: TestFunction,
        #[arg(long, default_value_t = 0.05)]
        eps: f64,
        #[arg(long)]
        d: usize,
        #[arg(long)]
        cutoff: usize,
        #[arg(long)]
        measure: Option<String>,
        /// Gauss-Chebyshev points per dimension for the Dirichlet integral.
        #[arg(long, default_value_t = 200)]
        order: usize,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum TestFunction {
    Bump,
}

fn parse_measure(spec: Option<&str>, d: usize) -> Result<ProductMeasure> {
    let Some(spec) = spec else {
        return ProductMeasure::equilibrium(d);
    };
    let body = spec
        .strip_prefix("jacobi:")
        .ok_or_else(|| Error::Config(format!("measure must start with 'jacobi:', got {spec:?}")))?;
    let params = body
        .split(';')
        .map(|pair| {
            let nums: Vec<f64> = pair
                .split(',')
                .map(|v| v.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::Config(format!("bad number in {pair:?}: {e}")))?;
            match nums.as_slice() {
                [a, b] => JacobiParams::new(*a, *b).map_err(|e| Error::Config(e.to_string())),
                _ => Err(Error::Config(format!(
                    "expected 'alpha,beta', got {pair:?}"
                ))),
            }
        })
        .collect::<Result<Vec<_>>>()?;
    let params = match params.len() {
        1 => vec![params[0]; d],
        n if n == d => params,
        n => {
            return Err(Error::Config(format!(
                "measure has {n} parameter pairs but d = {d}"
            )))
        }
    };
    ProductMeasure::new(&params)
}

fn write_json(path: &PathBuf, value: &serde_json::Value) -> Result<()> {
    let file = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(file, value).map_err(|e| Error::Io(e.into()))
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run { config } => {
            let cfg = ExperimentConfig::from_path(&config)?;
            let result = run_variance_decay(&cfg)?;
            let summary = result.summary_json();
            if let Some(path) = &cfg.replicates_csv {
                result.write_replicates_csv(BufWriter::new(File::create(path)?))?;
            }
            if let Some(path) = &cfg.summary_json {
                write_json(path, &summary)?;
            }
            println!("{}", serde_json::to_string_pretty(&summary).expect("json"));
            result.check()
        }
        Command::Sample {
            d,
            n,
            measure,
            seed,
            stream,
            out,
        } => {
            if d == 0 || n == 0 {
                return Err(Error::Config("d and n must be positive".into()));
            }
            let measure = parse_measure(measure.as_deref(), d)?;
            let kernel = CDKernel::new(measure, n)?;
            let config = SamplerConfig {
                rng_seed: seed,
                ..SamplerConfig::default()
            };
            let sample = Sampler::new(&kernel, config)?.sample_stream(stream)?;
            let mut w = csv::Writer::from_writer(BufWriter::new(File::create(&out)?));
            let csv_err = |e: csv::Error| Error::Io(std::io::Error::other(e));
            let mut header: Vec<String> = (1..=d).map(|j| format!("x{j}")).collect();
            header.push("weight".into());
            w.write_record(&header).map_err(csv_err)?;
            for (x, wt) in sample.points.iter().zip(&sample.weights) {
                let mut row: Vec<String> = x.iter().map(|v| format!("{v:e}")).collect();
                row.push(format!("{wt:e}"));
                w.write_record(&row).map_err(csv_err)?;
            }
            w.flush()?;
            Ok(())
        }
        Command::Variance {
            f: TestFunction::Bump,
            eps,
            d,
            cutoff,
            measure,
            order,
        } => {
            if d == 0 || !(eps > 0.0 && eps < 1.0) {
                return Err(Error::Config("need d >= 1 and eps in (0, 1)".into()));
            }
            let measure = parse_measure(measure.as_deref(), d)?;
            let f = Bump { d, epsilon: eps };
            let sigma = sigma_f_sq(&cheb_coeffs(&f, d, cutoff)?);
            let omega = omega_f_omega_sq(&f, &|x: &[f64]| measure.density(x), d, cutoff)?;
            let dirichlet = dirichlet_bound(&f, d, order)?;
            let out = serde_json::json!({
                "f": "bump",
                "eps": eps,
                "d": d,
                "cutoff": cutoff,
                "measure": measure.id(),
                "sigma_sq": sigma.value,
                "sigma_sq_tail_bound": sigma.tail_bound,
                "omega_sq": omega.value,
                "omega_sq_tail_bound": omega.tail_bound,
                "dirichlet_bound": dirichlet,
            });
            println!("{}", serde_json::to_string_pretty(&out).expect("json"));
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_numerical() {
                ExitCode::from(3)
            } else if matches!(
                e,
                Error::Config(_) | Error::ParameterDomain(_) | Error::Precondition(_)
            ) {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
