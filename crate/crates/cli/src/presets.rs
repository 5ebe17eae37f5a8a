//! Table and figure reproductions as configuration matrices.

use std::fs;
use std::path::Path;
use std::str::FromStr;

use fisher_core::evaluation::{
    default_sweep, log_space, profile_table, rho_sweep, wavefront_profile, GridSpec, Table, Trained, PROFILE_LAMBDAS,
};
use fisher_core::{aggregate, analytical, Activation, FisherProblem, ModelKind};
use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::runner::{execute_all, unix_now, Job, RunOutput, CURVE};
use crate::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Preset {
    Table2,
    Table3,
    Table4,
    Fig3,
    Fig4,
    Fig5,
    Fig6,
}

impl Preset {
    pub const ALL: [Preset; 7] =
        [Preset::Table2, Preset::Table3, Preset::Table4, Preset::Fig3, Preset::Fig4, Preset::Fig5, Preset::Fig6];

    pub fn name(self) -> &'static str {
        match self {
            Preset::Table2 => "table2",
            Preset::Table3 => "table3",
            Preset::Table4 => "table4",
            Preset::Fig3 => "fig3",
            Preset::Fig4 => "fig4",
            Preset::Fig5 => "fig5",
            Preset::Fig6 => "fig6",
        }
    }

    /// Presets built from one trained network use only the first seed.
    fn single_model(self) -> bool {
        matches!(self, Preset::Fig3 | Preset::Fig6)
    }
}

impl FromStr for Preset {
    type Err = CliError;
    fn from_str(s: &str) -> Result<Self, CliError> {
        Preset::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| CliError::Usage(format!("unknown preset `{s}`; expected one of table2, table3, table4, fig3, fig4, fig5, fig6")))
    }
}

/// One configuration of a matrix, with the labels it is reported under.
#[derive(Clone, Debug)]
pub struct Cell {
    pub labels: Vec<(&'static str, String)>,
    pub config: ExperimentConfig,
}

const RHOS: [f64; 3] = [1e2, 1e3, 1e4];
const LAMBDAS: [f64; 4] = [0.0, 0.1, 1.0, 10.0];
const RANGES: [[f64; 2]; 3] = [[1e2, 1e3], [1e3, 1e4], [1e2, 1e4]];

fn fixed(base: &ExperimentConfig, model: ModelKind, lambda: f64, rho: f64) -> ExperimentConfig {
    ExperimentConfig { model, lambda, rho, rho_range: None, ..base.clone() }
}

fn ranged(base: &ExperimentConfig, model: ModelKind, range: [f64; 2]) -> ExperimentConfig {
    ExperimentConfig { model, lambda: 1.0, rho_range: Some(range), ..base.clone() }
}

fn lambda_label(model: ModelKind, lambda: f64) -> String {
    if model.uses_physics() {
        lambda.to_string()
    } else {
        String::new()
    }
}

pub fn cells(preset: Preset, base: &ExperimentConfig) -> Vec<Cell> {
    let mut out = Vec::new();
    match preset {
        Preset::Table2 => {
            for model in ModelKind::ALL {
                let lambdas: &[f64] = if model.uses_physics() { &LAMBDAS } else { &[0.0] };
                for &lambda in lambdas {
                    for rho in RHOS {
                        out.push(Cell {
                            labels: vec![
                                ("model", model.to_string()),
                                ("lambda", lambda_label(model, lambda)),
                                ("rho", rho.to_string()),
                            ],
                            config: fixed(base, model, lambda, rho),
                        });
                    }
                }
            }
        }
        Preset::Table3 => {
            let baseline = fixed(base, ModelKind::WavePinn, 1.0, 0.0);
            let settings: Vec<(&str, ExperimentConfig)> = vec![
                ("baseline", baseline.clone()),
                ("2x10", ExperimentConfig { hidden_layers: Some(2), neurons: 10, ..baseline.clone() }),
                ("2x30", ExperimentConfig { hidden_layers: Some(2), neurons: 30, ..baseline.clone() }),
                ("swish", ExperimentConfig { activation: Activation::Swish, ..baseline.clone() }),
                ("sigmoid", ExperimentConfig { activation: Activation::Sigmoid, ..baseline.clone() }),
                ("sine", ExperimentConfig { activation: Activation::Sine, ..baseline.clone() }),
                ("ncol512", ExperimentConfig { n_col: 512, ..baseline.clone() }),
                ("ncol2048", ExperimentConfig { n_col: 2048, ..baseline.clone() }),
            ];
            for (name, cfg) in settings {
                for rho in RHOS {
                    out.push(Cell {
                        labels: vec![("setting", name.to_string()), ("rho", rho.to_string())],
                        config: ExperimentConfig { rho, ..cfg.clone() },
                    });
                }
            }
        }
        Preset::Table4 => {
            for range in RANGES {
                for model in ModelKind::ALL {
                    out.push(Cell {
                        labels: vec![
                            ("rho_min", range[0].to_string()),
                            ("rho_max", range[1].to_string()),
                            ("model", model.to_string()),
                        ],
                        config: ranged(base, model, range),
                    });
                }
            }
        }
        Preset::Fig3 => out.push(Cell {
            labels: vec![("model", "wave-pinn".into()), ("lambda", "1".into()), ("rho", "10000".into())],
            config: fixed(base, ModelKind::WavePinn, 1.0, 1e4),
        }),
        Preset::Fig4 => {
            for model in ModelKind::ALL {
                out.push(Cell { labels: vec![("model", model.to_string())], config: fixed(base, model, 1.0, 1e3) });
            }
        }
        Preset::Fig5 => {
            for model in ModelKind::ALL {
                out.push(Cell { labels: vec![("model", model.to_string())], config: ranged(base, model, [1e2, 1e4]) });
            }
        }
        Preset::Fig6 => out.push(Cell {
            labels: vec![("model", "wave-pinn".into()), ("rho_min", "100".into()), ("rho_max", "10000".into())],
            config: ranged(base, ModelKind::WavePinn, [1e2, 1e4]),
        }),
    }
    out
}

pub struct PresetPlan {
    pub preset: Preset,
    pub cells: Vec<Cell>,
    pub seeds: Vec<u64>,
}

impl PresetPlan {
    pub fn new(preset: Preset, base: &ExperimentConfig, seeds: Vec<u64>, epochs: Option<u64>) -> Result<Self, CliError> {
        if seeds.is_empty() {
            return Err(CliError::Usage("preset needs at least one seed".into()));
        }
        let seeds = if preset.single_model() { seeds[..1].to_vec() } else { seeds };
        let mut cells = cells(preset, base);
        for c in &mut cells {
            if epochs.is_some() {
                c.config.epochs = epochs;
            }
            c.config.seeds = seeds.clone();
            c.config.validate()?;
        }
        Ok(PresetPlan { preset, cells, seeds })
    }

    pub fn jobs(&self) -> Vec<Job> {
        self.cells
            .iter()
            .flat_map(|c| self.seeds.iter().map(|&seed| Job { config: c.config.clone(), seed }))
            .collect()
    }

    /// One line per run, then the total.
    pub fn describe(&self) -> Vec<String> {
        let mut lines = Vec::new();
        for c in &self.cells {
            let labels: Vec<String> = c.labels.iter().map(|(k, v)| format!("{k}={v}")).collect();
            for &seed in &self.seeds {
                lines.push(format!(
                    "{} {} seed={} epochs={} id={}",
                    self.preset.name(),
                    labels.join(" "),
                    seed,
                    c.config.filled().epochs.unwrap_or_default(),
                    c.config.run_id(seed)
                ));
            }
        }
        lines.push(format!("{} runs", self.cells.len() * self.seeds.len()));
        lines
    }
}

#[derive(Serialize)]
struct PresetSidecar<'a> {
    preset: &'a str,
    seeds: &'a [u64],
    cells: Vec<serde_json::Value>,
    run_ids: Vec<&'a str>,
    outputs: Vec<String>,
    finished_unix_s: u64,
}

fn write_table(table: &Table, path: &Path) -> Result<(), CliError> {
    let mut buf = Vec::new();
    table.write_csv(&mut buf)?;
    fs::write(path, buf)?;
    Ok(())
}

fn stats_row(labels: &[(&str, String)], l2: &[f64]) -> Result<Vec<String>, CliError> {
    let s = aggregate(l2)?;
    let mut row: Vec<String> = labels.iter().map(|(_, v)| v.clone()).collect();
    row.push(s.mean.to_string());
    row.push(s.std.to_string());
    Ok(row)
}

fn header(cell: &Cell, extra: &[&str]) -> Vec<String> {
    cell.labels.iter().map(|(k, _)| k.to_string()).chain(extra.iter().map(|s| s.to_string())).collect()
}

fn problem_of(run: &RunOutput, cfg: &ExperimentConfig) -> Result<FisherProblem, CliError> {
    Ok(cfg.resolve(run.sidecar.summary.seed)?.problem)
}

/// Trains everything the preset needs and writes `<name>.csv` plus a JSON
/// sidecar into `out`. Returns the CSV path.
pub fn run_preset(plan: &PresetPlan, out: &Path, workers: usize) -> Result<std::path::PathBuf, CliError> {
    fs::create_dir_all(out)?;
    let jobs = plan.jobs();
    let runs = execute_all(&jobs, out, workers)?;
    let per_cell = plan.seeds.len();
    let groups: Vec<(&Cell, &[RunOutput])> = plan.cells.iter().zip(runs.chunks(per_cell)).collect();

    let table = match plan.preset {
        Preset::Table2 | Preset::Table3 | Preset::Table4 => {
            let mut t = Table::new(&header(&plan.cells[0], &["mean", "std"]));
            for (cell, group) in &groups {
                let l2: Vec<f64> = group.iter().map(RunOutput::final_l2).collect();
                t.push(stats_row(&cell.labels, &l2)?)?;
            }
            t
        }
        Preset::Fig3 => {
            let (cell, group) = groups[0];
            let run = &group[0];
            let ck = run.checkpoint()?;
            let net = ck.network()?;
            let problem = problem_of(run, &cell.config)?;
            let pred = Trained { net: &net, params: &ck.params.values };
            let xs: Vec<f64> = (0..=1000).map(|i| problem.domain.x.lerp(i as f64 / 1000.0)).collect();
            let rows = wavefront_profile(&pred, &problem, cell.config.rho, 0.002, &xs, &PROFILE_LAMBDAS);
            profile_table(&rows, &PROFILE_LAMBDAS)
        }
        Preset::Fig4 => {
            let mut t = Table::new(&["model", "seed", "epoch", "loss_total", "test_mse"]);
            for (cell, group) in &groups {
                for run in group.iter() {
                    let mut rdr = csv::Reader::from_path(run.dir.join(CURVE))?;
                    let h = rdr.headers()?.clone();
                    let col = |name: &str| {
                        h.iter().position(|c| c == name).ok_or_else(|| CliError::Usage(format!("curve lacks column {name}")))
                    };
                    let (ie, il, it) = (col("epoch")?, col("loss_total")?, col("test_mse")?);
                    for rec in rdr.records() {
                        let rec = rec?;
                        t.push(vec![
                            cell.labels[0].1.clone(),
                            run.sidecar.summary.seed.to_string(),
                            rec[ie].to_string(),
                            rec[il].to_string(),
                            rec[it].to_string(),
                        ])?;
                    }
                }
            }
            t
        }
        Preset::Fig5 => {
            let rhos = default_sweep();
            let mut t = Table::new(&["model", "rho", "median", "q25", "q75"]);
            for (cell, group) in &groups {
                let mut curves = Vec::new();
                for run in group.iter() {
                    let ck = run.checkpoint()?;
                    let net = ck.network()?;
                    let problem = problem_of(run, &cell.config)?;
                    let pred = Trained { net: &net, params: &ck.params.values };
                    curves.push(rho_sweep(&pred, &problem, &rhos, GridSpec::default())?);
                }
                for (i, &rho) in rhos.iter().enumerate() {
                    let l2: Vec<f64> = curves.iter().map(|c| c[i].1).collect();
                    let s = aggregate(&l2)?;
                    t.push(vec![
                        cell.labels[0].1.clone(),
                        rho.to_string(),
                        s.median.to_string(),
                        s.q25.to_string(),
                        s.q75.to_string(),
                    ])?;
                }
            }
            t
        }
        Preset::Fig6 => {
            let (cell, group) = groups[0];
            let run = &group[0];
            let ck = run.checkpoint()?;
            let net = ck.network()?;
            let problem = problem_of(run, &cell.config)?;
            let t_end = problem.domain.t.hi;
            let mut t = Table::new(&["x", "sqrt_rho", "u_pred", "abs_error"]);
            for rho in log_space(1e2, 1e5, 41) {
                for i in 0..=200 {
                    let x = problem.domain.x.lerp(i as f64 / 200.0);
                    let u = net.forward(&ck.params, x, t_end, Some(rho))?;
                    let err = (u - analytical(x, t_end, rho, problem.mu)).abs();
                    t.push(vec![x.to_string(), rho.sqrt().to_string(), u.to_string(), err.to_string()])?;
                }
            }
            t
        }
    };

    let csv_path = out.join(format!("{}.csv", plan.preset.name()));
    write_table(&table, &csv_path)?;
    let cells = plan
        .cells
        .iter()
        .map(|c| serde_json::to_value(c.config.filled()))
        .collect::<Result<Vec<_>, _>>()?;
    let sidecar = PresetSidecar {
        preset: plan.preset.name(),
        seeds: &plan.seeds,
        cells,
        run_ids: runs.iter().map(|r| r.id.as_str()).collect(),
        outputs: vec![csv_path.display().to_string()],
        finished_unix_s: unix_now(),
    };
    let side_path = out.join(format!("{}.json", plan.preset.name()));
    fs::write(side_path, serde_json::to_string_pretty(&sidecar)?)?;
    Ok(csv_path)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn plan(p: Preset) -> PresetPlan {
        PresetPlan::new(p, &ExperimentConfig::default(), (0..10).collect(), None).unwrap()
    }

    #[test]
    fn matrix_sizes_follow_the_tables() {
        // 2 ANN rows + 4 λ for each PINN, at 3 ρ and 10 seeds.
        assert_eq!(plan(Preset::Table2).jobs().len(), 10 * 3 * 10);
        assert_eq!(plan(Preset::Table3).jobs().len(), 8 * 3 * 10);
        assert_eq!(plan(Preset::Table4).jobs().len(), 4 * 3 * 10);
        assert_eq!(plan(Preset::Fig4).jobs().len(), 4 * 10);
        assert_eq!(plan(Preset::Fig5).jobs().len(), 4 * 10);
        assert_eq!(plan(Preset::Fig3).jobs().len(), 1);
        assert_eq!(plan(Preset::Fig6).jobs().len(), 1);
    }

    #[test]
    fn run_ids_are_unique_within_a_matrix() {
        for p in Preset::ALL {
            let ids: std::collections::HashSet<String> = plan(p).jobs().iter().map(Job::id).collect();
            assert_eq!(ids.len(), plan(p).jobs().len(), "{}", p.name());
        }
    }

    #[test]
    fn shared_runs_have_shared_ids() {
        let t2: std::collections::HashSet<String> = plan(Preset::Table2).jobs().iter().map(Job::id).collect();
        assert!(plan(Preset::Fig3).jobs().iter().all(|j| t2.contains(&j.id())));
        let t4: std::collections::HashSet<String> = plan(Preset::Table4).jobs().iter().map(Job::id).collect();
        assert!(plan(Preset::Fig5).jobs().iter().all(|j| t4.contains(&j.id())));
    }

    #[test]
    fn epoch_override_reaches_every_run() {
        let p = PresetPlan::new(Preset::Table4, &ExperimentConfig::default(), vec![0], Some(7)).unwrap();
        assert!(p.cells.iter().all(|c| c.config.resolve(0).unwrap().train.epochs == 7));
        assert!(p.describe().last().unwrap().starts_with("12 runs"));
    }

    #[test]
    fn generalizing_cells_take_generalizing_defaults() {
        let p = plan(Preset::Table4);
        let r = p.cells[0].config.resolve(0).unwrap();
        assert_eq!(r.train.epochs, 100_000);
        assert_eq!(r.network.hidden_layers, 3);
    }
}
