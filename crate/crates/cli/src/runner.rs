//! Training runs with a checkpoint cache keyed by the configuration hash.
//!
//! A finished run lives in `<out>/runs/<run-id>/`:
//! `checkpoint.fpnn`, `curve.csv` and `summary.json`. The summary is written
//! last, so a directory without one is an interrupted run and is retrained.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use fisher_core::evaluation::{interior_mean_l2, GridSpec, Trained};
use fisher_core::model::{read_checkpoint, write_checkpoint, Checkpoint, CheckpointHeader};
use fisher_core::training::RunSummary;
use fisher_core::{train, Network, RhoSpec};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::CliError;

pub const CHECKPOINT: &str = "checkpoint.fpnn";
pub const CURVE: &str = "curve.csv";
pub const SUMMARY: &str = "summary.json";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sidecar {
    pub run_id: String,
    #[serde(flatten)]
    pub summary: RunSummary,
    pub finished_unix_s: u64,
}

#[derive(Clone, Debug)]
pub struct RunOutput {
    pub id: String,
    pub dir: PathBuf,
    pub sidecar: Sidecar,
    pub cached: bool,
}

impl RunOutput {
    pub fn final_l2(&self) -> f64 {
        self.sidecar.summary.final_l2
    }

    pub fn checkpoint(&self) -> Result<Checkpoint, CliError> {
        load_checkpoint(&self.dir.join(CHECKPOINT))
    }
}

/// One (configuration, seed) pair.
#[derive(Clone, Debug)]
pub struct Job {
    pub config: ExperimentConfig,
    pub seed: u64,
}

impl Job {
    pub fn id(&self) -> String {
        self.config.run_id(self.seed)
    }
}

pub fn run_dir(out: &Path, id: &str) -> PathBuf {
    out.join("runs").join(id)
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint, CliError> {
    let file = fs::File::open(path).map_err(|e| CliError::Usage(format!("cannot open checkpoint {}: {e}", path.display())))?;
    Ok(read_checkpoint(std::io::BufReader::new(file))?)
}

fn cached(dir: &Path, id: &str) -> Option<RunOutput> {
    if !dir.join(CHECKPOINT).is_file() || !dir.join(CURVE).is_file() {
        return None;
    }
    let text = fs::read_to_string(dir.join(SUMMARY)).ok()?;
    let sidecar: Sidecar = serde_json::from_str(&text).ok()?;
    (sidecar.run_id == id).then(|| RunOutput { id: id.to_string(), dir: dir.to_path_buf(), sidecar, cached: true })
}

/// Trains the job unless an identical run is already on disk.
pub fn execute(job: &Job, out: &Path) -> Result<RunOutput, CliError> {
    let id = job.id();
    let dir = run_dir(out, &id);
    if let Some(done) = cached(&dir, &id) {
        return Ok(done);
    }
    let r = job.config.resolve(job.seed)?;
    let echo = serde_json::to_value(job.config.run_config(job.seed))?;
    let record = train(&r.problem, &r.network, &r.train)?;
    let mut summary = record.summary(echo.clone());
    if let RhoSpec::Range(range) = r.problem.domain.rho {
        let count = job.config.interior_rho_count;
        if count != fisher_core::evaluation::INTERIOR_RHO_COUNT && summary.final_l2.is_finite() {
            let net = Network::new(r.network, &r.problem.domain)?;
            let pred = Trained { net: &net, params: &record.params.values };
            summary.final_l2 = interior_mean_l2(&pred, &r.problem, range, count, GridSpec::default())?;
        }
    }

    fs::create_dir_all(&dir)?;
    let header = CheckpointHeader {
        network: r.network,
        domain: r.problem.domain,
        seed: job.seed,
        epoch: record.epochs_completed,
        config: echo,
    };
    let mut ck = Vec::new();
    write_checkpoint(&mut ck, &header, &record.params)?;
    fs::write(dir.join(CHECKPOINT), ck)?;
    let mut curve = Vec::new();
    record.write_csv(&mut curve)?;
    fs::write(dir.join(CURVE), curve)?;
    let sidecar = Sidecar { run_id: id.clone(), summary, finished_unix_s: unix_now() };
    fs::write(dir.join(SUMMARY), serde_json::to_string_pretty(&sidecar)?)?;
    Ok(RunOutput { id, dir, sidecar, cached: false })
}

/// Runs every job on a pool of `workers` threads; results keep job order.
/// Duplicate jobs are trained once.
pub fn execute_all(jobs: &[Job], out: &Path, workers: usize) -> Result<Vec<RunOutput>, CliError> {
    let mut unique: Vec<&Job> = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for j in jobs {
        if seen.insert(j.id()) {
            unique.push(j);
        }
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| CliError::Usage(format!("cannot start worker pool: {e}")))?;
    let done: Vec<RunOutput> = pool.install(|| {
        unique
            .par_iter()
            .map(|j| {
                let r = execute(j, out);
                if let Ok(o) = &r {
                    eprintln!(
                        "{} {} seed {}: L2 {:.3e}{}",
                        o.id,
                        j.config.model,
                        j.seed,
                        o.final_l2(),
                        if o.cached { " (cached)" } else { "" }
                    );
                }
                r
            })
            .collect::<Result<_, _>>()
    })?;
    let by_id: std::collections::HashMap<&str, &RunOutput> = done.iter().map(|o| (o.id.as_str(), o)).collect();
    Ok(jobs.iter().map(|j| by_id[j.id().as_str()].clone()).collect())
}

pub fn unix_now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

