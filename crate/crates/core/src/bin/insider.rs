//! `insider` command-line harness.
//!
//! Exit codes: 0 success, 1 usage or I/O error, 2 invalid input, 3 failed
//! verification.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use insider_core::config::{parse_config, parse_seed};
use insider_core::report::{
    closed_form_csv, closed_form_json, comparison_csv, comparison_json, convergence_csv,
    convergence_json, run_compare, run_convergence, run_sweep, Metadata, SweepField, SweepSpec,
};
use insider_core::verify::{all_pass, run_verify, VerifyOptions, ARCHIVED_SEED};
use insider_core::{compare_closed_form, MarketParams};

#[derive(Parser)]
#[command(
    name = "insider",
    version,
    about = "Insider-trading wealth: closed forms and Monte Carlo"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Closed-form expectations and ordering verdict.
    ClosedForm(Common),
    /// Closed forms against Monte Carlo estimates for one parameter set.
    Compare(Common),
    /// Comparison rows over a grid of one parameter.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Parameter to vary: rho, mu, sigma or T.
        #[arg(long)]
        sweep_field: Option<String>,
        /// Comma-separated grid values.
        #[arg(long, allow_hyphen_values = true)]
        grid: Option<String>,
    },
    /// Euler-scheme bias of the forward insider against its closed form.
    Convergence {
        #[command(flatten)]
        common: Common,
        /// Comma-separated step counts.
        #[arg(long)]
        steps: Option<String>,
    },
    /// Run the built-in verification battery.
    Verify {
        #[command(flatten)]
        common: Common,
        /// Negate the insider threshold in the closed forms (harness self-test).
        #[arg(long, hide = true)]
        mutate_flip_threshold: bool,
    },
}

#[derive(Args, Clone)]
struct Common {
    /// Total initial wealth.
    #[arg(long = "M", allow_negative_numbers = true)]
    m: Option<f64>,
    /// Bond rate.
    #[arg(long, allow_negative_numbers = true)]
    rho: Option<f64>,
    /// Stock drift.
    #[arg(long, allow_negative_numbers = true)]
    mu: Option<f64>,
    /// Stock volatility.
    #[arg(long, allow_negative_numbers = true)]
    sigma: Option<f64>,
    /// Horizon.
    #[arg(long = "T", allow_negative_numbers = true)]
    t: Option<f64>,
    /// Monte Carlo sample count.
    #[arg(long)]
    samples: Option<u64>,
    /// Seed, decimal or 0x-hex.
    #[arg(long, value_parser = seed_arg)]
    seed: Option<u64>,
    /// Worker threads; results do not depend on it.
    #[arg(long)]
    chunks: Option<usize>,
    #[arg(long, value_enum)]
    format: Option<Format>,
    /// Write to this file instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Flat `key = value` file; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Omit the timestamp from JSON metadata.
    #[arg(long)]
    no_timestamp: bool,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

fn seed_arg(s: &str) -> Result<u64, String> {
    parse_seed(s).map_err(|e| e.to_string())
}

enum Failure {
    Usage(String),
    Invalid(insider_core::Error),
}

impl From<insider_core::Error> for Failure {
    fn from(e: insider_core::Error) -> Self {
        Failure::Invalid(e)
    }
}

const CONFIG_KEYS: [&str; 13] = [
    "M",
    "rho",
    "mu",
    "sigma",
    "T",
    "samples",
    "seed",
    "chunks",
    "format",
    "sweep-field",
    "grid",
    "steps",
    "no-timestamp",
];

/// Common settings after merging flags over the config file over defaults.
struct Settings {
    m: f64,
    rho: f64,
    mu: f64,
    sigma: f64,
    t: f64,
    samples: u64,
    seed: u64,
    chunks: usize,
    format: Format,
    out: Option<PathBuf>,
    timestamp: bool,
    file: BTreeMap<String, String>,
}

impl Settings {
    fn resolve(c: &Common) -> Result<Self, Failure> {
        let file = match &c.config {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| Failure::Usage(format!("cannot read {}: {e}", path.display())))?;
                let map = parse_config(&text).map_err(|e| Failure::Usage(e.to_string()))?;
                if let Some(k) = map.keys().find(|k| !CONFIG_KEYS.contains(&k.as_str())) {
                    return Err(Failure::Usage(format!("config: unknown key `{k}`")));
                }
                map
            }
            None => BTreeMap::new(),
        };
        let from_file = |key: &str| file.get(key).map(String::as_str);
        fn parsed<T: FromStr>(key: &str, v: Option<&str>) -> Result<Option<T>, Failure> {
            v.map(|s| {
                s.parse()
                    .map_err(|_| Failure::Usage(format!("config: bad value for `{key}`: {s}")))
            })
            .transpose()
        }
        let real = |flag: Option<f64>, key: &str, default: f64| -> Result<f64, Failure> {
            Ok(flag.or(parsed(key, from_file(key))?).unwrap_or(default))
        };
        let seed = match (c.seed, from_file("seed")) {
            (Some(s), _) => s,
            (None, Some(s)) => parse_seed(s).map_err(|e| Failure::Usage(e.to_string()))?,
            (None, None) => ARCHIVED_SEED,
        };
        let format = match (c.format, from_file("format")) {
            (Some(f), _) => f,
            (None, Some(s)) => Format::from_str(s, false)
                .map_err(|_| Failure::Usage(format!("config: bad value for `format`: {s}")))?,
            (None, None) => Format::Csv,
        };
        let no_timestamp = c.no_timestamp
            || parsed::<bool>("no-timestamp", from_file("no-timestamp"))?.unwrap_or(false);
        Ok(Self {
            m: real(c.m, "M", 1.0)?,
            rho: real(c.rho, "rho", 0.0)?,
            mu: real(c.mu, "mu", 0.5)?,
            sigma: real(c.sigma, "sigma", 1.0)?,
            t: real(c.t, "T", 1.0)?,
            samples: c
                .samples
                .or(parsed("samples", from_file("samples"))?)
                .unwrap_or(1_000_000),
            seed,
            chunks: c
                .chunks
                .or(parsed("chunks", from_file("chunks"))?)
                .unwrap_or(1),
            format,
            out: c.out.clone(),
            timestamp: !no_timestamp,
            file,
        })
    }

    fn params(&self) -> Result<MarketParams, Failure> {
        Ok(MarketParams::new(
            self.m, self.rho, self.mu, self.sigma, self.t,
        )?)
    }

    fn text(&self, flag: &Option<String>, key: &str) -> Option<String> {
        flag.clone().or_else(|| self.file.get(key).cloned())
    }

    fn metadata(&self, command: &str, seed: Option<u64>, samples: Option<u64>) -> Metadata {
        Metadata::new(command, seed, samples, self.timestamp)
    }
}

fn parse_list<T: FromStr>(what: &str, s: &str) -> Result<Vec<T>, Failure> {
    let items: Result<Vec<T>, _> = s.split(',').map(|v| v.trim().parse()).collect();
    match items {
        Ok(v) if !v.is_empty() => Ok(v),
        _ => Err(Failure::Usage(format!("invalid {what} list `{s}`"))),
    }
}

fn emit(settings: &Settings, body: &str) -> Result<(), Failure> {
    match &settings.out {
        Some(path) => std::fs::write(path, body)
            .map_err(|e| Failure::Usage(format!("cannot write {}: {e}", path.display()))),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(body.as_bytes())
                .and_then(|_| out.flush())
                .map_err(|e| Failure::Usage(format!("cannot write to stdout: {e}")))
        }
    }
}

#[derive(Serialize)]
struct VerifyRecord<'a> {
    id: u8,
    name: &'a str,
    pass: bool,
    detail: &'a str,
}

fn run(cli: Cli) -> Result<ExitCode, Failure> {
    match cli.command {
        Command::ClosedForm(common) => {
            let s = Settings::resolve(&common)?;
            let report = compare_closed_form(&s.params()?)?;
            let body = match s.format {
                Format::Csv => closed_form_csv(&[report]),
                Format::Json => closed_form_json(&[report], &s.metadata("closed-form", None, None)),
            };
            emit(&s, &body)?;
        }
        Command::Compare(common) => {
            let s = Settings::resolve(&common)?;
            let row = run_compare(&s.params()?, s.samples, s.seed, s.chunks)?;
            let body = match s.format {
                Format::Csv => comparison_csv(&[row]),
                Format::Json => comparison_json(
                    &[row],
                    &s.metadata("compare", Some(s.seed), Some(s.samples)),
                ),
            };
            emit(&s, &body)?;
        }
        Command::Sweep {
            common,
            sweep_field,
            grid,
        } => {
            let s = Settings::resolve(&common)?;
            let field = s
                .text(&sweep_field, "sweep-field")
                .ok_or_else(|| Failure::Usage("sweep needs --sweep-field".into()))?;
            let field = SweepField::parse(&field)?;
            let grid = s
                .text(&grid, "grid")
                .ok_or_else(|| Failure::Usage("sweep needs --grid".into()))?;
            let grid = parse_list::<f64>("grid", &grid)?;
            let spec = SweepSpec::new(s.params()?, field, grid, s.samples, s.seed)?;
            let rows = run_sweep(&spec, s.chunks)?;
            let body = match s.format {
                Format::Csv => comparison_csv(&rows),
                Format::Json => {
                    comparison_json(&rows, &s.metadata("sweep", Some(s.seed), Some(s.samples)))
                }
            };
            emit(&s, &body)?;
        }
        Command::Convergence { common, steps } => {
            let s = Settings::resolve(&common)?;
            let steps = s
                .text(&steps, "steps")
                .unwrap_or_else(|| "16,64,256".into());
            let steps = parse_list::<u64>("steps", &steps)?;
            let rows = run_convergence(&s.params()?, &steps, s.samples, s.seed, s.chunks)?;
            let body = match s.format {
                Format::Csv => convergence_csv(&rows),
                Format::Json => convergence_json(
                    &rows,
                    &s.metadata("convergence", Some(s.seed), Some(s.samples)),
                ),
            };
            emit(&s, &body)?;
        }
        Command::Verify {
            common,
            mutate_flip_threshold,
        } => {
            let s = Settings::resolve(&common)?;
            let opts = VerifyOptions {
                seed: s.seed,
                workers: s.chunks,
                flip_threshold: mutate_flip_threshold,
            };
            if opts.workers == 0 {
                return Err(insider_core::Error::BadWorkerCount.into());
            }
            let lines = run_verify(&opts)?;
            let passed = all_pass(&lines);
            let body = match s.format {
                Format::Csv => {
                    let mut body: String = lines.iter().map(|l| format!("{l}\n")).collect();
                    let failed = lines.iter().filter(|l| !l.pass).count();
                    body.push_str(&format!(
                        "verify seed={}: {} checks, {failed} failed\n",
                        s.seed,
                        lines.len()
                    ));
                    body
                }
                Format::Json => {
                    #[derive(Serialize)]
                    struct Doc<'a> {
                        metadata: Metadata,
                        pass: bool,
                        checks: Vec<VerifyRecord<'a>>,
                    }
                    let checks = lines
                        .iter()
                        .map(|l| VerifyRecord {
                            id: l.id,
                            name: l.name,
                            pass: l.pass,
                            detail: &l.detail,
                        })
                        .collect();
                    let doc = Doc {
                        metadata: s.metadata("verify", Some(s.seed), None),
                        pass: passed,
                        checks,
                    };
                    serde_json::to_string_pretty(&doc).expect("serializable") + "\n"
                }
            };
            emit(&s, &body)?;
            if !passed {
                return Ok(ExitCode::from(3));
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
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
        Ok(code) => code,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Invalid(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
