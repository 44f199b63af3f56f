//! `sicoop`: config-driven experiment runner.
//!
//! Exit codes: 0 on success, 2 for configuration errors, 3 for runtime errors.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use sicoop::experiments::output::{render_svg, sha256_hex, to_csv, to_json, write_artifact};
use sicoop::experiments::runner::{self, BoundArgs, Context};
use sicoop::experiments::load_config;
use sicoop::imitation::Dataset;
use sicoop::{Error, JointType};
use serde::Serialize;

#[derive(Parser, Debug)]
#[command(name = "sicoop", version, about = "Imitate-then-commit experiments on repeated two-player games")]
struct Cli {
    /// Worker threads (defaults to all cores). Results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// Experiment configuration (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Output directory for artifacts.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Overrides the configured master seed.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Ablation {
    Grim,
    Cce,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Nash, Pareto-optimal and worst-case equilibria of the configured game.
    Equilibria {
        #[command(flatten)]
        common: Common,
        /// Joint type as `theta1,theta2`; repeatable. Defaults to every joint type.
        #[arg(long = "joint-type", value_parser = parse_joint_type)]
        joint_types: Vec<JointType>,
    },
    /// Generates the population dataset as JSON Lines.
    Dataset {
        #[command(flatten)]
        common: Common,
    },
    /// Runs the imitate-then-commit sweep and writes the results table.
    RunIc {
        #[command(flatten)]
        common: Common,
        /// Subsample this dataset instead of generating one per replicate.
        #[arg(long)]
        dataset: Option<PathBuf>,
    },
    /// Certifies the configured population as a socially intelligent class.
    Certify {
        #[command(flatten)]
        common: Common,
    },
    /// Runs an ablation.
    Ablation {
        #[arg(value_enum)]
        which: Ablation,
        #[command(flatten)]
        common: Common,
    },
    /// Tabulates the imitation and regret bounds.
    Bounds {
        #[arg(long, default_value_t = 2)]
        n_actions: usize,
        #[arg(long)]
        imitation_horizon: usize,
        #[arg(long)]
        horizon: usize,
        #[arg(long, default_value_t = 2)]
        n_types: usize,
        #[arg(long, value_delimiter = ',', required = true)]
        k: Vec<usize>,
        #[arg(long)]
        delta: f64,
        #[arg(long)]
        epsilon: f64,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
    },
    /// Dataset, run-ic, certification and every configured ablation.
    Sweep {
        #[command(flatten)]
        common: Common,
    },
}

fn parse_joint_type(s: &str) -> Result<JointType, String> {
    let (a, b) = s.split_once(',').ok_or("expected `theta1,theta2`")?;
    let p = |x: &str| x.trim().parse::<usize>().map_err(|e| format!("{x:?}: {e}"));
    Ok(JointType::new(p(a)?, p(b)?))
}

/// Failure classes mapped to exit codes.
enum Failure {
    Config(String),
    Runtime(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(_) => Failure::Config(e.to_string()),
            other => Failure::Runtime(other.to_string()),
        }
    }
}

type Outcome<T = ()> = Result<T, Failure>;

fn context(common: &Common) -> Outcome<Context> {
    let loaded = load_config(&common.config).map_err(|e| Failure::Config(e.to_string()))?;
    Ok(Context::new(loaded, common.seed))
}

fn table<R: Serialize>(rows: &[R], format: Format) -> Outcome<(Vec<u8>, &'static str)> {
    Ok(match format {
        Format::Csv => (to_csv(rows)?, "csv"),
        Format::Json => (to_json(&rows), "json"),
    })
}

fn emit(dir: &Path, name: &str, bytes: &[u8]) -> Outcome<PathBuf> {
    let path = write_artifact(dir, name, bytes)?;
    println!("wrote {}", path.display());
    Ok(path)
}

fn cmd_equilibria(common: &Common, joint_types: &[JointType]) -> Outcome {
    let ctx = context(common)?;
    let report = runner::equilibria(&ctx, joint_types)?;
    match common.format {
        Format::Json => print!("{}", String::from_utf8_lossy(&to_json(&report))),
        Format::Csv => print!("{}", runner::equilibria_text(&report)),
    }
    emit(&common.out, "equilibria.json", &to_json(&report))?;
    Ok(())
}

fn cmd_dataset(ctx: &Context, out: &Path) -> Outcome {
    let ds = runner::dataset(ctx)?;
    let bytes = ds.to_jsonl();
    let path = write_artifact(out, "dataset.jsonl", &bytes)?;
    println!("K = {}", ds.len());
    println!("path = {}", path.display());
    println!("sha256 = {}", sha256_hex(&bytes));
    Ok(())
}

fn cmd_run_ic(ctx: &Context, out: &Path, format: Format, dataset: Option<&Path>) -> Outcome {
    let ds = dataset.map(Dataset::load).transpose()?;
    let (delta, epsilon, certification) = runner::bound_parameters(ctx)?;
    if let Some(report) = &certification {
        eprintln!(
            "bound uses certified delta = {delta:.6} (measured upper end) with epsilon = {epsilon}; requested delta = {}",
            report.summary.requested_delta
        );
    }
    let rows = runner::run_ic_with_bound(ctx, ds.as_ref(), delta, epsilon)?;
    let (bytes, ext) = table(&rows, format)?;
    let data = format!("results.{ext}");
    emit(out, &data, &bytes)?;
    for (name, plot) in runner::plots(ctx, &rows, &data) {
        emit(out, &format!("{name}.json"), &to_json(&plot))?;
        emit(out, &format!("{name}.svg"), render_svg(&plot).as_bytes())?;
    }
    Ok(())
}

fn cmd_certify(ctx: &Context, out: &Path) -> Outcome {
    let report = runner::certify_output(ctx)?;
    let s = &report.report.summary;
    println!(
        "{}: delta measured {:.4} (upper {:.4}) vs {}, epsilon measured {:.4} vs {}: {}",
        s.subject,
        s.delta_measured,
        s.delta_upper,
        s.requested_delta,
        s.epsilon_measured,
        s.requested_epsilon,
        if s.pass { "PASS" } else { "FAIL" }
    );
    emit(out, "certification.json", &to_json(&report))?;
    Ok(())
}

fn cmd_ablation(ctx: &Context, out: &Path, format: Format, which: Ablation) -> Outcome {
    match which {
        Ablation::Grim => {
            let row = runner::ablation_grim(ctx)?;
            println!(
                "IC partner payoff {:.4}, reference {:.4}, gap {:.4}",
                row.ic_partner_payoff, row.reference_partner_payoff, row.gap
            );
            let (bytes, ext) = table(&[row], format)?;
            emit(out, &format!("ablation_grim.{ext}"), &bytes)?;
        }
        Ablation::Cce => {
            let rows = runner::ablation_cce(ctx)?;
            for r in &rows {
                println!("{} {}: tv {:.4}", r.check, r.label, r.tv);
            }
            let (bytes, ext) = table(&rows, format)?;
            emit(out, &format!("ablation_cce.{ext}"), &bytes)?;
        }
    }
    Ok(())
}

fn cmd_sweep(ctx: &Context, out: &Path, format: Format) -> Outcome {
    cmd_dataset(ctx, out)?;
    cmd_run_ic(ctx, out, format, None)?;
    if ctx.config.certification.is_some() {
        cmd_certify(ctx, out)?;
    }
    if ctx.config.ablation.grim.is_some() {
        cmd_ablation(ctx, out, format, Ablation::Grim)?;
    }
    if ctx.config.ablation.cce.is_some() {
        cmd_ablation(ctx, out, format, Ablation::Cce)?;
    }
    Ok(())
}

fn run(cli: Cli) -> Outcome {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::Config(format!("--threads: {e}")))?;
    }
    match cli.command {
        Command::Equilibria { common, joint_types } => cmd_equilibria(&common, &joint_types),
        Command::Dataset { common } => cmd_dataset(&context(&common)?, &common.out),
        Command::RunIc { common, dataset } => {
            cmd_run_ic(&context(&common)?, &common.out, common.format, dataset.as_deref())
        }
        Command::Certify { common } => cmd_certify(&context(&common)?, &common.out),
        Command::Ablation { which, common } => cmd_ablation(&context(&common)?, &common.out, common.format, which),
        Command::Bounds {
            n_actions,
            imitation_horizon,
            horizon,
            n_types,
            k,
            delta,
            epsilon,
            out,
            format,
        } => {
            let rows = runner::bounds(&BoundArgs {
                n_actions,
                imitation_horizon,
                horizon,
                n_types,
                k_list: k,
                delta,
                epsilon,
            })?;
            let (bytes, ext) = table(&rows, format)?;
            match out {
                Some(dir) => {
                    emit(&dir, &format!("bounds.{ext}"), &bytes)?;
                }
                None => print!("{}", String::from_utf8_lossy(&bytes)),
            }
            Ok(())
        }
        Command::Sweep { common } => cmd_sweep(&context(&common)?, &common.out, common.format),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(3)
        }
    }
}
