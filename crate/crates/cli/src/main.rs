mod config;
mod presets;
mod runner;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use fisher_core::evaluation::{default_sweep, evaluate_at, interior_mean_l2, rho_sweep, GridSpec, Trained, INTERIOR_RHO_COUNT};
use fisher_core::gradcheck::{check_case, GradCheckConfig};
use fisher_core::{aggregate, FisherProblem, RhoSpec, DEFAULT_MU};
use rayon::prelude::*;

use config::ExperimentConfig;
use presets::{Preset, PresetPlan};
use runner::{execute_all, load_checkpoint, unix_now, Job};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Bad arguments, configuration or input files: exit 2.
    #[error("{0}")]
    Usage(String),
    /// A check ran and failed: exit 1.
    #[error("{0}")]
    Check(String),
    #[error(transparent)]
    Core(#[from] fisher_core::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        use fisher_core::Error as E;
        match self {
            CliError::Usage(_) | CliError::Json(_) => 2,
            CliError::Core(E::Config(_) | E::Usage(_) | E::Checkpoint(_) | E::Json(_)) => 2,
            _ => 1,
        }
    }
}

#[derive(Parser, Debug)]
#[command(name = "fisher-pinn", version, about = "Train and evaluate PINNs for Fisher's equation")]
struct Cli {
    /// Output directory [default: $FISHER_PINN_OUT, else ./fisher-runs]
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads for independent runs [default: available cores]
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Default)]
struct RunFlags {
    /// Experiment configuration (JSON); omitted fields take the defaults
    #[arg(long)]
    config: Option<PathBuf>,
    /// Single seed, overriding the configuration
    #[arg(long, conflicts_with = "seeds")]
    seed: Option<u64>,
    /// Seed list: `0,3,5`, `0..10` or `0..=9`
    #[arg(long)]
    seeds: Option<String>,
    /// Epoch count for every run
    #[arg(long)]
    epochs: Option<u64>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Train every seed of a configuration
    Train(RunFlags),
    /// Grid L2 error of a checkpoint
    Evaluate {
        #[arg(long)]
        checkpoint: PathBuf,
        /// Evaluate at these ρ instead of the training ρ
        #[arg(long, value_delimiter = ',')]
        rho: Vec<f64>,
        /// Add the default ρ sweep (generalizing networks only)
        #[arg(long)]
        sweep: bool,
    },
    /// Finite-difference check of the loss gradient for all model variants
    Gradcheck {
        /// Gradient check settings (JSON)
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, hide = true)]
        corrupt_gradient: bool,
    },
    /// Reproduce a table or figure: table2, table3, table4, fig3, fig4, fig5, fig6
    Preset {
        name: String,
        #[command(flatten)]
        flags: RunFlags,
        /// List the runs without training
        #[arg(long)]
        dry_run: bool,
    },
}

fn parse_seeds(s: &str) -> Result<Vec<u64>, CliError> {
    let bad = || CliError::Usage(format!("invalid seed list `{s}`"));
    let num = |v: &str| v.trim().parse::<u64>().map_err(|_| bad());
    let seeds = if let Some((a, b)) = s.split_once("..=") {
        (num(a)?..=num(b)?).collect()
    } else if let Some((a, b)) = s.split_once("..") {
        (num(a)?..num(b)?).collect()
    } else {
        s.split(',').map(num).collect::<Result<Vec<_>, _>>()?
    };
    if seeds.is_empty() {
        return Err(bad());
    }
    Ok(seeds)
}

fn out_dir(flag: &Option<PathBuf>, config: Option<&ExperimentConfig>) -> PathBuf {
    flag.clone()
        .or_else(|| config.and_then(|c| c.out.clone()))
        .or_else(|| std::env::var_os("FISHER_PINN_OUT").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("fisher-runs"))
}

fn workers(flag: Option<usize>) -> usize {
    flag.unwrap_or_else(|| std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1))
}

fn load_config(flags: &RunFlags) -> Result<ExperimentConfig, CliError> {
    let mut cfg = match &flags.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(s) = flags.seed {
        cfg.seeds = vec![s];
    }
    if let Some(s) = &flags.seeds {
        cfg.seeds = parse_seeds(s)?;
    }
    if flags.epochs.is_some() {
        cfg.epochs = flags.epochs;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn cmd_train(cli: &Cli, flags: &RunFlags) -> Result<(), CliError> {
    let cfg = load_config(flags)?;
    let out = out_dir(&cli.out, Some(&cfg));
    let jobs: Vec<Job> = cfg.seeds.iter().map(|&seed| Job { config: cfg.clone(), seed }).collect();
    let runs = execute_all(&jobs, &out, workers(cli.workers))?;
    let l2: Vec<f64> = runs.iter().map(|r| r.final_l2()).collect();
    let finite: Vec<f64> = l2.iter().copied().filter(|v| v.is_finite()).collect();
    let echo = serde_json::to_value(ExperimentConfig { out: None, ..cfg.filled() })?;
    let report = serde_json::json!({
        "config": echo,
        "runs": runs.iter().map(|r| serde_json::json!({
            "seed": r.sidecar.summary.seed,
            "run_id": r.id,
            "final_l2": r.final_l2(),
            "diverged": r.sidecar.summary.diverged,
            "dir": r.dir.display().to_string(),
        })).collect::<Vec<_>>(),
        "stats": if finite.is_empty() { None } else { Some(aggregate(&finite)?) },
        "finished_unix_s": unix_now(),
    });
    let dir = out.join("experiments");
    std::fs::create_dir_all(&dir)?;
    let path = dir.join(format!("{}.json", config::hash_json(&echo)));
    std::fs::write(&path, serde_json::to_string_pretty(&report)?)?;
    println!("{}", serde_json::to_string_pretty(&report)?);
    eprintln!("aggregate written to {}", path.display());
    Ok(())
}

fn cmd_evaluate(checkpoint: &Path, rhos: &[f64], sweep: bool) -> Result<(), CliError> {
    let ck = load_checkpoint(checkpoint)?;
    let net = ck.network()?;
    let mu = ck.header.config.get("mu").and_then(serde_json::Value::as_f64).unwrap_or(DEFAULT_MU);
    let problem = FisherProblem::new(ck.header.domain, mu, 0.0)?;
    let pred = Trained { net: &net, params: &ck.params.values };
    let spec = GridSpec::default();
    let mut report = serde_json::json!({
        "checkpoint": checkpoint.display().to_string(),
        "model": ck.header.config.get("model"),
        "seed": ck.header.seed,
        "epochs": ck.header.epoch,
    });
    match problem.domain.rho {
        RhoSpec::Fixed(rho) => report["l2"] = evaluate_at(&pred, &problem, rho, spec, false)?.l2.into(),
        RhoSpec::Range(r) => {
            let count = ck
                .header
                .config
                .get("interior_rho_count")
                .and_then(serde_json::Value::as_u64)
                .map_or(INTERIOR_RHO_COUNT, |c| c as usize);
            report["interior_mean_l2"] = interior_mean_l2(&pred, &problem, r, count, spec)?.into();
        }
    }
    if !rhos.is_empty() {
        let at: Vec<_> = rhos
            .iter()
            .map(|&rho| Ok(serde_json::json!({"rho": rho, "l2": evaluate_at(&pred, &problem, rho, spec, false)?.l2})))
            .collect::<Result<_, CliError>>()?;
        report["at"] = at.into();
    }
    if sweep {
        let s: Vec<_> = rho_sweep(&pred, &problem, &default_sweep(), spec)?
            .into_iter()
            .map(|(rho, l2)| serde_json::json!({"rho": rho, "l2": l2}))
            .collect();
        report["sweep"] = s.into();
    }
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(())
}

fn cmd_gradcheck(cli: &Cli, config: &Option<PathBuf>, corrupt: bool) -> Result<(), CliError> {
    let mut cfg = match config {
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", p.display())))?;
            serde_json::from_str::<GradCheckConfig>(&text)
                .map_err(|e| CliError::Usage(format!("invalid config {}: {e}", p.display())))?
        }
        None => GradCheckConfig::default(),
    };
    cfg.corrupt |= corrupt;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers(cli.workers))
        .build()
        .map_err(|e| CliError::Usage(e.to_string()))?;
    let cases = cfg.cases();
    let results = pool.install(|| cases.par_iter().map(|c| check_case(&cfg, c)).collect::<Result<Vec<_>, _>>())?;
    let mut worst = 0.0f64;
    for r in &results {
        let c = r.case;
        let status = if r.max_rel_error <= cfg.tolerance { "ok" } else { "FAIL" };
        println!(
            "{status:4} {:13} lambda={:<4} generalizing={:<5} draw={} max_rel_error={:.3e} checked={}/{}",
            c.kind.to_string(),
            c.lambda,
            c.generalizing,
            c.draw,
            r.max_rel_error,
            r.checked,
            r.params
        );
        worst = worst.max(if r.max_rel_error.is_nan() { f64::INFINITY } else { r.max_rel_error });
    }
    println!("max relative error {worst:.3e} over {} cases (tolerance {:e})", results.len(), cfg.tolerance);
    if worst > cfg.tolerance {
        return Err(CliError::Check(format!("gradient check failed: {worst:.3e} > {:e}", cfg.tolerance)));
    }
    Ok(())
}

fn cmd_preset(cli: &Cli, name: &str, flags: &RunFlags, dry_run: bool) -> Result<(), CliError> {
    let preset: Preset = name.parse()?;
    let base = match &flags.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    let seeds = match (&flags.seeds, flags.seed, &flags.config) {
        (Some(s), _, _) => parse_seeds(s)?,
        (None, Some(s), _) => vec![s],
        (None, None, Some(_)) => base.seeds.clone(),
        (None, None, None) => (0..10).collect(),
    };
    let plan = PresetPlan::new(preset, &base, seeds, flags.epochs)?;
    if dry_run {
        for line in plan.describe() {
            println!("{line}");
        }
        return Ok(());
    }
    let out = out_dir(&cli.out, flags.config.as_ref().map(|_| &base));
    let csv = presets::run_preset(&plan, &out, workers(cli.workers))?;
    println!("{}", csv.display());
    Ok(())
}

fn run(cli: &Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Train(flags) => cmd_train(cli, flags),
        Command::Evaluate { checkpoint, rho, sweep } => cmd_evaluate(checkpoint, rho, *sweep),
        Command::Gradcheck { config, corrupt_gradient } => cmd_gradcheck(cli, config, *corrupt_gradient),
        Command::Preset { name, flags, dry_run } => cmd_preset(cli, name, flags, *dry_run),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
