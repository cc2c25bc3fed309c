use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use rsoup::commands::{self, Status, UsageError};
use rsoup::{ConfigError, Experiment, ExperimentConfig};
use rsoup_core::quadratic::VerifySpec;

#[derive(Parser)]
#[command(name = "rsoup", version, about = "Rewarded-soup experiments: fine-tune, interpolate, compare fronts")]
struct Cli {
    /// Experiment config (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the config's seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Overrides the config's output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Pretrain from a seeded initialization; writes pretrained.ckpt.
    Pretrain,
    /// Fine-tune one expert per reward from pretrained.ckpt.
    Finetune,
    /// Fine-tune the experts, sweep the interpolation grid, audit LMC and select.
    Rs,
    /// One fine-tuning per preference on the mu grid.
    Morl,
    /// Jointly normalize fronts and compare hypervolume deficiencies.
    Compare(CompareArgs),
    /// Check the quadratic interpolation-gap bound on random instances.
    QuadVerify(QuadArgs),
    /// LMC with a shared pretrained init against independent scratch inits.
    ScratchControl {
        #[arg(long, default_value_t = 5)]
        repeats: usize,
    },
    /// LMC audit of the saved expert checkpoints.
    Lmc,
    /// How the weight-space versus output-space gap scales with expert distance.
    EnsembleAudit {
        /// Audit a fresh initialization along a random direction instead of the experts.
        #[arg(long)]
        fresh: bool,
        #[arg(long, default_value_t = 0.5)]
        lambda: f64,
    },
    /// pretrain, rs, morl and compare in one go; writes report.json.
    Run,
}

#[derive(Args)]
struct CompareArgs {
    /// Front files (JSON from rs/morl, or CSV); the first two define the relative gap.
    #[arg(required = true, num_args = 2..)]
    fronts: Vec<PathBuf>,
    /// Utopia point in normalized coordinates, comma separated.
    #[arg(long, value_delimiter = ',')]
    utopia: Option<Vec<f64>>,
}

#[derive(Args)]
struct QuadArgs {
    #[arg(long, default_value_t = 1000)]
    count: usize,
    #[arg(long, default_value_t = 1)]
    dim_min: usize,
    #[arg(long, default_value_t = 64)]
    dim_max: usize,
    #[arg(long, default_value_t = 0.1)]
    curvature_min: f64,
    #[arg(long, default_value_t = 10.0)]
    curvature_max: f64,
    #[arg(long, default_value_t = 21)]
    mu_points: usize,
    /// Draw both rewards with the same curvatures.
    #[arg(long)]
    equal_curvature: bool,
    /// Curvature ratios for bound_curve.csv.
    #[arg(long, value_delimiter = ',', default_value = "1,2,5,10")]
    m_values: Vec<f64>,
    #[arg(long, default_value_t = 1.0, hide = true)]
    bound_scale: f64,
}

fn experiment(cli: &Cli) -> Result<(Experiment, PathBuf)> {
    let path = cli.config.as_ref().ok_or_else(|| UsageError("this command needs --config".into()))?;
    let mut config = ExperimentConfig::load(path)?;
    if let Some(s) = cli.seed {
        config = config.with_seed(s);
    }
    if let Some(o) = &cli.out {
        config.out_dir = o.clone();
    }
    let out = config.out_dir.clone();
    Ok((Experiment::new(config).map_err(|e| UsageError(e.to_string()))?, out))
}

fn out_dir(cli: &Cli) -> PathBuf {
    cli.out.clone().unwrap_or_else(|| PathBuf::from("rsoup-out"))
}

fn execute(cli: &Cli) -> Result<Status> {
    match &cli.command {
        Command::Pretrain => {
            let (exp, out) = experiment(cli)?;
            let r = commands::pretrain(&exp, &out)?;
            println!("pretrained: {:?} -> {:?}", r.init_eval.values, r.pretrained_eval.values);
        }
        Command::Finetune => {
            let (exp, out) = experiment(cli)?;
            let r = commands::finetune(&exp, &out)?;
            for (run, eval) in r.runs.iter().zip(&r.evals) {
                println!("{}: {:?}", run.label, eval.values);
            }
        }
        Command::Rs => {
            let (exp, out) = experiment(cli)?;
            let r = commands::rs(&exp, &out)?;
            println!("front_rs: {} points in {}", r.front.rows.len(), out.display());
        }
        Command::Morl => {
            let (exp, out) = experiment(cli)?;
            let r = commands::morl(&exp, &out)?;
            println!("front_morl: {} points in {}", r.front.rows.len(), out.display());
        }
        Command::Compare(args) => {
            let r = commands::compare(&args.fronts, args.utopia.clone(), &out_dir(cli))?;
            for (f, d) in r.comparison.fronts.iter().zip(&r.comparison.deficiency_per_front) {
                println!("{}: deficiency {d}", f.name);
            }
            match r.comparison.relative_gap {
                Some(g) => println!("relative gap {g}"),
                None => println!("relative gap undefined"),
            }
        }
        Command::QuadVerify(q) => {
            let spec = VerifySpec {
                count: q.count,
                dim_min: q.dim_min,
                dim_max: q.dim_max,
                curvature_min: q.curvature_min,
                curvature_max: q.curvature_max,
                seed: cli.seed.unwrap_or(0),
                mu_points: q.mu_points,
                equal_curvature: q.equal_curvature,
                bound_scale: q.bound_scale,
            };
            let (file, status) = commands::quad_verify(&spec, &q.m_values, &out_dir(cli))?;
            let r = &file.report;
            println!("{} checks, {} violations, min slack {}", r.checks, r.violations.len(), r.min_slack);
            if let Some(v) = r.violations.first() {
                eprintln!("first violation: {}", serde_json::to_string(v)?);
            }
            return Ok(status);
        }
        Command::ScratchControl { repeats } => {
            let (exp, out) = experiment(cli)?;
            let (r, status) = commands::scratch_control(&exp, *repeats, &out)?;
            for p in &r.pairs {
                println!("seed {}: pretrained {} scratch {}", p.seed, p.pretrained_mean_margin, p.scratch_mean_margin);
            }
            println!("mean pretrained {} scratch {}", r.mean_pretrained, r.mean_scratch);
            return Ok(status);
        }
        Command::Lmc => {
            let (exp, out) = experiment(cli)?;
            let r = commands::lmc(&exp, &out)?;
            for k in 0..r.reward_ids.len() {
                println!("{}: interior mean margin {:?}", r.reward_ids[k], r.interior_mean_margin(k));
            }
        }
        Command::EnsembleAudit { fresh, lambda } => {
            let (exp, out) = experiment(cli)?;
            let r = commands::ensemble_audit(&exp, *fresh, *lambda, &out)?;
            println!("log-log slope {}", r.audit.slope);
        }
        Command::Run => {
            let (exp, out) = experiment(cli)?;
            let r = commands::run_all(&exp, &out)?;
            println!("deficiencies {:?}, relative gap {:?}", r.comparison.deficiency_per_front, r.comparison.relative_gap);
        }
    }
    Ok(Status::Ok)
}

fn is_usage(e: &anyhow::Error) -> bool {
    e.chain().any(|c| c.is::<UsageError>() || c.is::<ConfigError>())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global().context("--jobs") {
            eprintln!("error: {e:#}");
            return ExitCode::from(2);
        }
    }
    match execute(&cli) {
        Ok(Status::Ok) => ExitCode::SUCCESS,
        Ok(Status::Violation) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(if is_usage(&e) { 2 } else { 1 })
        }
    }
}
