use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use cpde_cli::config::{parse_kv_text, RunConfig};
use cpde_cli::error::{CliError, Result};
use cpde_cli::run as runner;
use cpde_core::{Action, BenchmarkName, Intervention, OperatorSpec};

/// Discover which differential operators govern observed spatiotemporal data
/// and validate them through counterfactual interventions.
#[derive(Parser)]
#[command(name = "cpde", version, about)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args, Clone)]
struct CommonOverrides {
    /// Config file (key = value lines, dotted keys).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Extra `key=value` overrides applied after the config file.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Output directory (also via CPDE_OUT).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate a synthetic benchmark dataset (samples.csv, truth_grid.csv,
    /// truth_model.json).
    Generate {
        /// reaction1d | advdiff2d | reacdiff2d | orthogonal1d | heat1d
        #[arg(long)]
        benchmark: String,
        /// Observation count override.
        #[arg(long)]
        n: Option<usize>,
        /// Gaussian noise standard deviation.
        #[arg(long)]
        noise: Option<f64>,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[command(flatten)]
        common: CommonOverrides,
    },
    /// Fit the surrogate, sparsify the operator library, and write per-seed
    /// reports (report.json, trace.csv, net.txt, design.csv).
    Discover {
        /// Benchmark name; alternatively give `dataset = path` in the config.
        #[arg(long)]
        benchmark: Option<String>,
        /// Samples CSV for dataset runs (needs domain/library/colloc keys).
        #[arg(long)]
        samples: Option<PathBuf>,
        /// Comma-separated seeds, e.g. 1,2,3,4,5.
        #[arg(long)]
        seeds: Option<String>,
        /// Also train the frozen-coefficient baseline for comparison.
        #[arg(long)]
        baseline: bool,
        /// Compute counterfactual deviations by retraining the surrogate
        /// instead of re-solving with finite differences.
        #[arg(long)]
        cf_retrain: bool,
        #[command(flatten)]
        common: CommonOverrides,
    },
    /// Apply an intervention to a stored model and solve the counterfactual.
    Counterfactual {
        /// Path to a model JSON (truth_model.json or model_hat.json).
        #[arg(long)]
        model: PathBuf,
        /// Operator key to intervene on, e.g. U2 or SOURCE(sin_2pi_x).
        #[arg(long)]
        target: String,
        /// zero | scale:<factor> | replace:<operator>
        #[arg(long, default_value = "zero")]
        action: String,
        #[command(flatten)]
        common: CommonOverrides,
    },
    /// Recompute diagnostics for a finished run directory.
    Diagnose {
        /// Run directory containing report.json, model_hat.json, net.txt.
        #[arg(long)]
        run: PathBuf,
        #[command(flatten)]
        common: CommonOverrides,
    },
    /// Run the benchmark rows across seeds and write summary.csv/summary.md.
    BenchmarkSuite {
        /// Comma-separated row names (default: reaction1d,advdiff2d,orthogonal1d).
        #[arg(long)]
        rows: Option<String>,
        /// Comma-separated seeds (default: 1,2,3,4,5).
        #[arg(long)]
        seeds: Option<String>,
        /// Parallel worker slots (also via CPDE_THREADS; default: cores).
        #[arg(long)]
        workers: Option<usize>,
        /// Include the frozen-coefficient baseline in each run.
        #[arg(long)]
        baseline: bool,
        #[command(flatten)]
        common: CommonOverrides,
    },
    /// Render a run's report.json as markdown.
    Report {
        #[arg(long)]
        run: PathBuf,
        /// Write to a file instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn parse_seed_list(s: &str) -> Result<Vec<u64>> {
    s.split(',')
        .map(|t| {
            t.trim()
                .parse()
                .map_err(|_| CliError::usage(&format!("bad seed `{t}`")))
        })
        .collect()
}

/// Build a RunConfig from (defaults) <- config file <- --set pairs <- flags.
fn load_config(common: &CommonOverrides, benchmark: Option<&str>) -> Result<RunConfig> {
    let mut cfg = RunConfig::default();
    let mut kv: BTreeMap<String, String> = BTreeMap::new();
    if let Some(path) = &common.config {
        let text = std::fs::read_to_string(path)?;
        kv = parse_kv_text(&text)?;
    }
    for pair in &common.set {
        let Some((k, v)) = pair.split_once('=') else {
            return Err(CliError::usage(&format!(
                "--set expects key=value, got `{pair}`"
            )));
        };
        kv.insert(k.trim().to_string(), v.trim().to_string());
    }
    if let Some(b) = benchmark {
        kv.insert("benchmark".into(), b.to_string());
    }
    cfg.apply_kv(&kv)?;
    cfg.finish_domain()?;
    if let Some(out) = &common.out {
        cfg.out = out.clone();
    }
    if let Ok(out) = std::env::var("CPDE_OUT") {
        if common.out.is_none() {
            cfg.out = PathBuf::from(out);
        }
    }
    Ok(cfg)
}

fn parse_action(action: &str) -> Result<Action> {
    if action == "zero" {
        return Ok(Action::Zero);
    }
    if let Some(c) = action.strip_prefix("scale:") {
        let f: f64 = c
            .parse()
            .map_err(|_| CliError::usage(&format!("bad scale factor `{c}`")))?;
        return Ok(Action::Scale(f));
    }
    if let Some(op) = action.strip_prefix("replace:") {
        return Ok(Action::Replace(OperatorSpec::parse(op)?));
    }
    Err(CliError::usage(&format!(
        "unknown action `{action}` (expected zero, scale:<c>, replace:<op>)"
    )))
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.cmd {
        Cmd::Generate {
            benchmark,
            n,
            noise,
            seed,
            common,
        } => {
            let mut cfg = load_config(&common, Some(&benchmark))?;
            if n.is_some() {
                cfg.n = n;
            }
            if noise.is_some() {
                cfg.noise = noise;
            }
            let dir = runner::cmd_generate(&cfg, seed)?;
            println!(
                "wrote samples.csv, truth_grid.csv, truth_model.json to {}",
                dir.display()
            );
            Ok(())
        }
        Cmd::Discover {
            benchmark,
            samples,
            seeds,
            baseline,
            cf_retrain,
            common,
        } => {
            let mut cfg = load_config(&common, benchmark.as_deref())?;
            if let Some(path) = samples {
                cfg.dataset = Some(path);
            }
            if let Some(s) = seeds {
                cfg.seeds = parse_seed_list(&s)?;
            }
            cfg.baseline |= baseline;
            cfg.cf_retrain |= cf_retrain;
            cfg.validate()?;
            let reports = runner::cmd_discover(&cfg)?;
            let exact = reports
                .iter()
                .filter(|r| r.exact_recovery == Some(true))
                .count();
            println!(
                "{} run(s) complete; exact recovery on {}/{}",
                reports.len(),
                exact,
                reports.len()
            );
            Ok(())
        }
        Cmd::Counterfactual {
            model,
            target,
            action,
            common,
        } => {
            let cfg_out = common
                .out
                .clone()
                .or_else(|| std::env::var("CPDE_OUT").ok().map(PathBuf::from))
                .unwrap_or_else(|| PathBuf::from("counterfactual_out"));
            let iv = Intervention {
                target,
                action: parse_action(&action)?,
            };
            let (delta, mode1) = runner::cmd_counterfactual(&model, &iv, &cfg_out)?;
            println!("counterfactual deviation (L2): {delta}");
            if let Some(m1) = mode1 {
                println!("first-mode projected deviation: {m1}");
            }
            println!("wrote cf_grid.csv, cf_model.json to {}", cfg_out.display());
            Ok(())
        }
        Cmd::Diagnose { run, common } => {
            let cfg = load_config(&common, None)?;
            let report = runner::cmd_diagnose(&run, &cfg)?;
            println!(
                "diagnostics refreshed: support {:?} (report.json updated)",
                report.support
            );
            Ok(())
        }
        Cmd::BenchmarkSuite {
            rows,
            seeds,
            workers,
            baseline,
            common,
        } => {
            if let Some(w) = workers {
                // best effort: the global pool may already be initialized
                let _ = rayon::ThreadPoolBuilder::new()
                    .num_threads(w)
                    .build_global();
            }
            let row_names: Vec<BenchmarkName> = match rows {
                Some(s) => s
                    .split(',')
                    .map(|t| BenchmarkName::parse(t.trim()).map_err(CliError::from))
                    .collect::<Result<Vec<_>>>()?,
                None => vec![
                    BenchmarkName::Reaction1d,
                    BenchmarkName::AdvDiff2d,
                    BenchmarkName::Orthogonal1d,
                ],
            };
            let seed_list = match seeds {
                Some(s) => parse_seed_list(&s)?,
                None => vec![1, 2, 3, 4, 5],
            };
            let mut cfg = load_config(&common, None)?;
            cfg.baseline |= baseline;
            let out = cfg.out.clone();
            let (results, any_error) = runner::cmd_suite(&row_names, &seed_list, &cfg, &out)?;
            for r in &results {
                println!(
                    "{} seed {}: {} support {:?}{}",
                    r.benchmark,
                    r.seed,
                    r.recovery_label,
                    r.support,
                    r.error
                        .as_ref()
                        .map(|e| format!(" error: {e}"))
                        .unwrap_or_default()
                );
            }
            println!("summary written to {}", out.join("summary.csv").display());
            if any_error {
                return Err(CliError::Core(cpde_core::CoreError::NonFinite {
                    context: "one or more suite rows failed; see summary.csv".into(),
                }));
            }
            Ok(())
        }
        Cmd::Report { run, out } => {
            let md = runner::cmd_report(&run)?;
            match out {
                Some(path) => std::fs::write(path, md)?,
                None => print!("{md}"),
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    if let Ok(threads) = std::env::var("CPDE_THREADS") {
        if let Ok(n) = threads.parse::<usize>() {
            let _ = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build_global();
        }
    }
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
