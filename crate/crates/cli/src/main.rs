use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use discovery::bench::{bench_diversify, BenchDistribution, BenchRow};
use discovery::catalog::{write_catalog, CategoryScheme};
use discovery::engine::Engine;
use discovery::events::{category_stats, read_event_log};
use discovery::simulator::{gen_catalog, run_experiment, CatalogSpec, ExperimentConfig, ExperimentReport, Scenario};
use discovery::weights::{global_weights, SmoothingPriors};
use discovery_service::{ServiceConfig, DEFAULT_DATA_DIR};
use serde_json::{json, Value};

#[derive(Parser)]
#[command(name = "engine", version, about = "Personalized discovery-stream ranking engine")]
struct Cli {
    /// Human-readable tables instead of JSON.
    #[arg(long, global = true)]
    pretty: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Validate a catalog against a category scheme and install both into the data directory.
    Ingest {
        #[arg(long)]
        catalog: PathBuf,
        #[arg(long)]
        scheme: PathBuf,
        #[arg(long, env = "ENGINE_DATA_DIR", default_value = DEFAULT_DATA_DIR)]
        data_dir: PathBuf,
    },
    /// Serve the HTTP API over a data directory.
    Serve {
        #[arg(long, env = "ENGINE_DATA_DIR", default_value = DEFAULT_DATA_DIR)]
        data_dir: PathBuf,
        #[arg(long, env = "ENGINE_PORT", default_value_t = discovery_service::DEFAULT_PORT)]
        port: u16,
    },
    /// Run a two-arm simulated experiment.
    Simulate {
        /// Experiment configuration (JSON); omitted fields take defaults.
        #[arg(long, conflicts_with = "scenario", required_unless_present = "scenario")]
        config: Option<PathBuf>,
        /// Built-in design: aa, submodular_vs_multinomial, adaptive_vs_static, personalized_vs_global.
        #[arg(long)]
        scenario: Option<Scenario>,
        /// Users per arm for --scenario.
        #[arg(long, default_value_t = 10_000, requires = "scenario")]
        users: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Report destination; printed to stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare naive greedy and CELF on a random instance; prints CSV.
    BenchDiversify {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        k: usize,
        #[arg(long, default_value_t = 100)]
        d: usize,
        /// uniform or zipf
        #[arg(long, default_value = "uniform")]
        distribution: BenchDistribution,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Omit the CSV header line.
        #[arg(long)]
        no_header: bool,
    },
    /// Smoothed per-category CTR weights from an event log.
    EvalLog {
        #[arg(long)]
        log: PathBuf,
        /// Number of categories; defaults to the largest logged category + 1.
        #[arg(long)]
        d: Option<usize>,
        #[arg(long, default_value_t = 1.0)]
        alpha: f64,
        #[arg(long, default_value_t = 9.0)]
        beta: f64,
    },
    /// Deterministic synthetic catalog (JSON lines) under the synthetic scheme.
    GenCatalog {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        d: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Catalog destination; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write the matching category scheme here.
        #[arg(long)]
        scheme_out: Option<PathBuf>,
    },
}

struct Failure {
    kind: &'static str,
    message: String,
}

impl Failure {
    fn new(kind: &'static str, e: impl std::fmt::Display) -> Self {
        Self {
            kind,
            message: e.to_string(),
        }
    }
}

type Run = Result<Option<Value>, Failure>;

fn create(path: &Path) -> Result<BufWriter<File>, Failure> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Failure::new("io", format!("{}: {e}", path.display())))
}

fn ingest(catalog: &Path, scheme: &Path, data_dir: &Path) -> Run {
    let scheme = CategoryScheme::load(scheme).map_err(|e| Failure::new("scheme", e))?;
    let cat = Engine::install_catalog(data_dir, catalog, &scheme).map_err(|e| Failure::new("catalog", e))?;
    let sizes = cat.category_sizes();
    Ok(Some(json!({
        "data_dir": data_dir.display().to_string(),
        "items": cat.len(),
        "categories": cat.d(),
        "empty_categories": sizes.iter().filter(|&&n| n == 0).count(),
        "category_sizes": sizes,
    })))
}

fn serve(data_dir: PathBuf, port: u16) -> Run {
    let config = ServiceConfig {
        data_dir,
        port,
        ranking: Default::default(),
    };
    let runtime = tokio::runtime::Runtime::new().map_err(|e| Failure::new("runtime", e))?;
    runtime
        .block_on(discovery_service::serve(config))
        .map_err(|e| Failure::new("serve", e))?;
    Ok(None)
}

fn simulate(config: Option<PathBuf>, scenario: Option<Scenario>, users: usize, seed: u64, out: Option<PathBuf>) -> Run {
    let cfg = match (config, scenario) {
        (Some(path), _) => {
            let text = std::fs::read_to_string(&path)
                .map_err(|e| Failure::new("io", format!("{}: {e}", path.display())))?;
            serde_json::from_str::<ExperimentConfig>(&text).map_err(|e| Failure::new("config", e))?
        }
        (None, Some(s)) => ExperimentConfig::preset(s, users),
        (None, None) => return Err(Failure::new("usage", "one of --config or --scenario is required")),
    };
    let report = run_experiment(&cfg, seed).map_err(|e| Failure::new("simulation", e))?;
    let value = serde_json::to_value(&report).map_err(|e| Failure::new("internal", e))?;
    match out {
        Some(path) => {
            let mut w = create(&path)?;
            serde_json::to_writer_pretty(&mut w, &report).map_err(|e| Failure::new("io", e))?;
            w.flush().map_err(|e| Failure::new("io", e))?;
            Ok(Some(summary(&report, Some(&path))))
        }
        None => Ok(Some(value)),
    }
}

fn summary(r: &ExperimentReport, out: Option<&Path>) -> Value {
    json!({
        "out": out.map(|p| p.display().to_string()),
        "seed": r.seed,
        "control": r.control.name,
        "treatment": r.treatment.name,
        "ctr": [r.ctr.control, r.ctr.treatment],
        "ctr_delta_pct": r.ctr.delta_pct,
        "ctr_p": r.ctr.welch.p,
        "views_delta_pct": r.views.delta_pct,
        "views_p": r.views.welch.p,
        "duration_delta_pct": r.duration.delta_pct,
        "duration_p": r.duration.welch.p,
    })
}

fn eval_log(log: &Path, d: Option<usize>, alpha: f64, beta: f64) -> Run {
    let events = read_event_log(log).map_err(|e| Failure::new("event_log", e))?;
    let d = d.unwrap_or_else(|| events.iter().filter_map(|e| e.category).max().map_or(0, |m| m + 1));
    let priors = SmoothingPriors::new(alpha, beta).map_err(|e| Failure::new("usage", e))?;
    let stats = category_stats(&events, d);
    let weights = global_weights(&stats, priors);
    Ok(Some(json!({
        "events": events.len(),
        "categories": d,
        "weights": weights.as_slice(),
        "clicks": stats.clicks,
        "views": stats.views,
    })))
}

fn gen(n: usize, d: usize, seed: u64, out: Option<PathBuf>, scheme_out: Option<PathBuf>) -> Run {
    let spec = CatalogSpec {
        n_items: n,
        d,
        ..Default::default()
    };
    let (raws, _) = gen_catalog(&spec, seed).map_err(|e| Failure::new("usage", e))?;
    if let Some(path) = scheme_out {
        let mut w = create(&path)?;
        serde_json::to_writer_pretty(&mut w, &CategoryScheme::synthetic(d)).map_err(|e| Failure::new("io", e))?;
        w.flush().map_err(|e| Failure::new("io", e))?;
    }
    let written = match out {
        Some(path) => {
            let mut w = create(&path)?;
            write_catalog(&mut w, &raws).and_then(|_| w.flush())
        }
        None => {
            let mut w = BufWriter::new(std::io::stdout().lock());
            write_catalog(&mut w, &raws).and_then(|_| w.flush())
        }
    };
    written.map_err(|e| Failure::new("io", e))?;
    Ok(None)
}

fn bench(n: usize, k: usize, d: usize, distribution: BenchDistribution, seed: u64, header: bool) -> Run {
    let row = bench_diversify(n, k, d, distribution, seed).map_err(|e| Failure::new("usage", e))?;
    if header {
        println!("{}", BenchRow::CSV_HEADER);
    }
    println!("{}", row.csv_line());
    Ok(None)
}

fn pretty(value: &Value) -> String {
    let mut out = String::new();
    if let Value::Object(map) = value {
        let width = map.keys().map(String::len).max().unwrap_or(0);
        for (k, v) in map {
            let text = match v {
                Value::String(s) => s.clone(),
                Value::Number(n) => match n.as_f64() {
                    Some(f) if n.is_f64() => format!("{f:.6}"),
                    _ => n.to_string(),
                },
                Value::Array(xs) if xs.iter().all(Value::is_number) => xs
                    .iter()
                    .map(|x| match x.as_u64() {
                        Some(u) => u.to_string(),
                        None => format!("{:.4}", x.as_f64().unwrap_or(f64::NAN)),
                    })
                    .collect::<Vec<_>>()
                    .join(" "),
                other => other.to_string(),
            };
            out.push_str(&format!("{k:<width$}  {text}\n"));
        }
    } else {
        out.push_str(&format!("{value}\n"));
    }
    out
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            let text = e.to_string();
            let message = text
                .lines()
                .take_while(|l| !l.starts_with("Usage:"))
                .map(str::trim)
                .filter(|l| !l.is_empty())
                .collect::<Vec<_>>()
                .join(" ");
            let message = message.trim_start_matches("error: ");
            eprintln!("{}", json!({"error": "usage", "message": message}));
            return ExitCode::from(2);
        }
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let result = match cli.command {
        Command::Ingest {
            catalog,
            scheme,
            data_dir,
        } => ingest(&catalog, &scheme, &data_dir),
        Command::Serve { data_dir, port } => serve(data_dir, port),
        Command::Simulate {
            config,
            scenario,
            users,
            seed,
            out,
        } => simulate(config, scenario, users, seed, out),
        Command::BenchDiversify {
            n,
            k,
            d,
            distribution,
            seed,
            no_header,
        } => bench(n, k, d, distribution, seed, !no_header),
        Command::EvalLog { log, d, alpha, beta } => eval_log(&log, d, alpha, beta),
        Command::GenCatalog {
            n,
            d,
            seed,
            out,
            scheme_out,
        } => gen(n, d, seed, out, scheme_out),
    };
    match result {
        Ok(Some(value)) => {
            if cli.pretty {
                print!("{}", pretty(&value));
            } else {
                println!("{value}");
            }
            ExitCode::SUCCESS
        }
        Ok(None) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("{}", json!({"error": f.kind, "message": f.message.replace('\n', " ")}));
            ExitCode::FAILURE
        }
    }
}
