use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use idrs::config::{save_model, ModelSpec, RunConfig};
use idrs::datasets::save_dataset;
use idrs::experiments::{
    certify_dataset, cone_sweep, counterexample_report, parse_grid, run_toy, summarize,
    threshold_table, truncation_table, write_csv, write_jsonl, xi_curve, CertifyMethod,
    ExperimentRun,
};
use idrs::special::NumericsPolicy;
use idrs::{Error, Result};

#[derive(Parser)]
#[command(
    name = "idrs",
    version,
    about = "Certified radii for input-dependent randomized smoothing"
)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct Common {
    /// Run configuration (TOML). Flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true, env = "IDRS_SEED")]
    seed: Option<u64>,
    /// Worker threads, 0 for all cores.
    #[arg(long, global = true, env = "IDRS_JOBS")]
    jobs: Option<usize>,
    /// Output file; stdout when absent.
    #[arg(long, short, global = true)]
    out: Option<PathBuf>,
    /// Abort with exit code 2 instead of approximating or counting unstable
    /// evaluations.
    #[arg(long, global = true)]
    strict: bool,
}

#[derive(Subcommand)]
enum Cmd {
    /// Dimension thresholds on the σ₁/σ₀ ratio, as CSV.
    Thresholds {
        #[arg(long, default_value = "784,3072,196608")]
        dims: String,
        #[arg(long, default_value = "0.9,0.99,0.999,0.99993")]
        pa: String,
    },
    /// Worst-case class-B probability against adversary distance, as CSV.
    XiCurves {
        #[arg(long, default_value_t = 1.0)]
        sigma0: f64,
        #[arg(long, default_value_t = 0.9)]
        sigma1: f64,
        #[arg(long, default_value_t = 100)]
        dof: u32,
        #[arg(long, default_value_t = 0.99)]
        pa: f64,
        /// `lo:hi:n` or a comma-separated list.
        #[arg(long, default_value = "0:3:61")]
        grid: String,
    },
    /// Certifies every point of a dataset file, writing JSON lines.
    Certify {
        /// CSV with the label in the last column.
        #[arg(long)]
        data: PathBuf,
        #[arg(long, value_enum, default_value_t = MethodArg::Idrs)]
        method: MethodArg,
        /// σ of the constant baseline; defaults to `constant_sigma`.
        #[arg(long)]
        sigma: Option<f64>,
        /// σ₁ / σ₀ for the Rényi certificate.
        #[arg(long, default_value_t = 0.8)]
        ratio: f64,
        #[arg(long)]
        rate: Option<f64>,
        #[arg(long)]
        n: Option<u64>,
    },
    /// Constant σ against IDRS on generated data, as JSON.
    Toy {
        #[arg(long, default_value_t = 5)]
        seeds: u64,
        #[arg(long)]
        n: Option<u64>,
        /// Cone sweep over `dim:σ:σ_b:r` settings separated by commas;
        /// writes one CSV row per setting instead of the full report.
        #[arg(long)]
        sweep: Option<String>,
    },
    /// The per-point σ counterexample and the IDRS certificates, as JSON.
    Counterexample {
        #[arg(long, default_value_t = 100_000)]
        n: u64,
        #[arg(long, default_value_t = 0.001)]
        alpha: f64,
        #[arg(long, default_value = "0.02,0.05,0.1")]
        rates: String,
    },
    /// Certified radius against distance to a linear boundary, as CSV.
    Truncation {
        #[arg(long, default_value_t = 1.0)]
        sigma: f64,
        #[arg(long, default_value_t = 100_000)]
        n: u64,
        #[arg(long, default_value_t = 0.001)]
        alpha: f64,
        #[arg(long, default_value = "0:8:81")]
        grid: String,
    },
    /// Trains the base network on the configured training data and saves it.
    TrainToy {
        /// Also write the training set as CSV.
        #[arg(long)]
        data_out: Option<PathBuf>,
        #[arg(long)]
        epochs: Option<usize>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Cohen,
    Idrs,
    Renyi,
}

fn sink(path: &Option<PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn write_json<T: Serialize>(path: &Option<PathBuf>, value: &T) -> Result<()> {
    let mut out = sink(path)?;
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    out.flush()?;
    Ok(())
}

fn load_config(common: &Common) -> Result<RunConfig> {
    let mut cfg = match &common.config {
        Some(p) => RunConfig::from_file(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    if let Some(j) = common.jobs {
        cfg.jobs = j;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn list<T: std::str::FromStr>(s: &str) -> Result<Vec<T>> {
    s.split(',')
        .map(|v| {
            v.trim()
                .parse()
                .map_err(|_| Error::Config(format!("cannot parse '{v}' in '{s}'")))
        })
        .collect()
}

fn parse_sweep(s: &str) -> Result<Vec<(usize, f64, f64, f64)>> {
    s.split(',')
        .map(|item| {
            let bad = || Error::Config(format!("sweep setting '{item}' is not dim:σ:σ_b:r"));
            let f: Vec<&str> = item.trim().split(':').collect();
            if f.len() != 4 {
                return Err(bad());
            }
            Ok((
                f[0].parse().map_err(|_| bad())?,
                f[1].parse().map_err(|_| bad())?,
                f[2].parse().map_err(|_| bad())?,
                f[3].parse().map_err(|_| bad())?,
            ))
        })
        .collect()
}

fn fail_on_unstable(count: usize) -> Result<()> {
    if count > 0 {
        return Err(Error::UnstableRegime {
            func: "certification",
            detail: format!("{count} points hit an unstable evaluation"),
        });
    }
    Ok(())
}

fn certify(
    cfg: &RunConfig,
    data: &Path,
    method: CertifyMethod,
    strict: bool,
    out: &Option<PathBuf>,
) -> Result<()> {
    let train = cfg.train_data.load(cfg.seed)?;
    let test = idrs::datasets::load_dataset(data)?;
    let field = cfg.field.build(&train)?;
    let model = cfg.model.build(&train, Some(&field), cfg.seed)?;
    let records = certify_dataset(&*model, &field, &test, method, &cfg.smoothing, &cfg.search)?;
    let summary = summarize(
        &records,
        &cfg.radius_grid,
        train.num_classes().max(test.num_classes()),
    )?;
    if strict {
        fail_on_unstable(summary.unstable_points)?;
    }
    let run = ExperimentRun {
        config: cfg.clone(),
        method,
        records,
        summary,
    };
    let mut w = sink(out)?;
    write_jsonl(&mut w, &run)?;
    w.flush()?;
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    let mut cfg = load_config(&cli.common)?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.jobs)
        .build_global()
        .map_err(|e| Error::Config(e.to_string()))?;
    let out = &cli.common.out;
    let strict = cli.common.strict;
    match cli.cmd {
        Cmd::Thresholds { dims, pa } => {
            let rows = threshold_table(&list(&dims)?, &list(&pa)?)?;
            write_csv(sink(out)?, &rows)
        }
        Cmd::XiCurves {
            sigma0,
            sigma1,
            dof,
            pa,
            grid,
        } => {
            let policy = if strict {
                NumericsPolicy::strict()
            } else {
                NumericsPolicy::default()
            };
            let rows = xi_curve(sigma0, sigma1, dof, pa, &parse_grid(&grid)?, &policy)?;
            write_csv(sink(out)?, &rows)
        }
        Cmd::Certify {
            data,
            method,
            sigma,
            ratio,
            rate,
            n,
        } => {
            if let Some(r) = rate {
                cfg.field.rate = r;
            }
            if let Some(n) = n {
                cfg.smoothing.n = n;
            }
            cfg.smoothing.seed = cfg.seed;
            cfg.validate()?;
            let method = match method {
                MethodArg::Cohen => CertifyMethod::CohenConstant {
                    sigma: sigma.unwrap_or(cfg.constant_sigma),
                },
                MethodArg::Idrs => CertifyMethod::Idrs,
                MethodArg::Renyi => CertifyMethod::Renyi {
                    sigma1_ratio: ratio,
                },
            };
            certify(&cfg, &data, method, strict, out)
        }
        Cmd::Toy { seeds, n, sweep } => {
            if let Some(n) = n {
                cfg.smoothing.n = n;
            }
            let seeds: Vec<u64> = (0..seeds).map(|i| cfg.seed + i).collect();
            match sweep {
                Some(s) => {
                    let rows = cone_sweep(&cfg, &parse_sweep(&s)?, &seeds)?;
                    if strict {
                        fail_on_unstable(rows.iter().map(|r| r.unstable_points).sum())?;
                    }
                    write_csv(sink(out)?, &rows)
                }
                None => {
                    let rep = run_toy(&cfg, &seeds)?;
                    if strict {
                        fail_on_unstable(rep.seeds.iter().map(|s| s.idrs.unstable_points).sum())?;
                    }
                    write_json(out, &rep)
                }
            }
        }
        Cmd::Counterexample { n, alpha, rates } => write_json(
            out,
            &counterexample_report(n, alpha, &list(&rates)?, &cfg.search)?,
        ),
        Cmd::Truncation {
            sigma,
            n,
            alpha,
            grid,
        } => {
            let smoothing = idrs::smoothing::SmoothingConfig {
                n,
                alpha,
                ..cfg.smoothing.clone()
            };
            smoothing.validate()?;
            write_csv(
                sink(out)?,
                &truncation_table(sigma, &parse_grid(&grid)?, &smoothing)?,
            )
        }
        Cmd::TrainToy { data_out, epochs } => {
            let train = cfg.train_data.load(cfg.seed)?;
            if let (Some(e), ModelSpec::Mlp { train, .. }) = (epochs, &mut cfg.model) {
                train.epochs = e;
            }
            let field = cfg.field.build(&train)?;
            let model = cfg.model.train_mlp(&train, Some(&field), cfg.seed)?;
            if let Some(p) = data_out {
                save_dataset(p, &train)?;
            }
            match out {
                Some(p) => save_model(p, &model),
                None => write_json(out, &model),
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_numerical() { 2 } else { 1 })
        }
    }
}
