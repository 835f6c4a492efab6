use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{Context, Result};
use minetax_core::analytical::pareto_sweep;
use minetax_core::bilevel::{evolve, ArchiveEntry};
use minetax_core::io::{
    schedule_rows, write_frontier, write_meta, write_schedule, write_sweep, FrontierRow, RunMeta,
};
use minetax_core::verify::{run_all, VerifySettings};
use minetax_core::{EaConfig, ModelConfig, TechChoice};
use serde::{Deserialize, Serialize};

use crate::ModelKind;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TechSelector {
    All,
    #[serde(untagged)]
    Only(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub model: ModelKind,
    pub config: Option<PathBuf>,
    pub tech: TechSelector,
    pub points: usize,
    pub pop_size: usize,
    pub generations: usize,
    pub seed: u64,
    pub tech_choice: TechChoice,
    pub out: PathBuf,
    pub min_revenue: Option<f64>,
    pub max_damage: Option<f64>,
}

/// Settings echoed into `meta.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Echo {
    pub run: RunConfig,
    pub ea: EaConfig,
    pub model: ModelConfig,
}

pub enum Status {
    Ok,
    VerifyFailed,
    Empty,
}

impl Status {
    pub fn code(&self) -> u8 {
        match self {
            Status::Ok => 0,
            Status::VerifyFailed => 2,
            Status::Empty => 3,
        }
    }
}

fn load_model(cfg: &RunConfig) -> Result<ModelConfig> {
    match &cfg.config {
        Some(path) => ModelConfig::load(path)
            .with_context(|| format!("cannot load model config {}", path.display())),
        None => Ok(ModelConfig::default()),
    }
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    let path = dir.join(name);
    let file = File::create(&path).with_context(|| format!("cannot create {}", path.display()))?;
    Ok(BufWriter::new(file))
}

fn ea_config(cfg: &RunConfig) -> EaConfig {
    EaConfig {
        population_size: cfg.pop_size,
        max_generations: cfg.generations,
        seed: cfg.seed,
        tech_choice: cfg.tech_choice,
        ..EaConfig::default()
    }
}

pub fn run_analytical(cfg: &RunConfig) -> Result<Status> {
    let model = load_model(cfg)?;
    let sweep = pareto_sweep(&model.analytical, cfg.points)?;
    fs::create_dir_all(&cfg.out)
        .with_context(|| format!("cannot create {}", cfg.out.display()))?;
    write_sweep(create(&cfg.out, "sweep.csv")?, &sweep)?;
    let first = sweep.first().expect("sweep has >= 2 points");
    let last = sweep.last().expect("sweep has >= 2 points");
    println!(
        "sweep: {} points, w in [{}, {}], revenue/damage from ({}, {}) to ({}, {}) -> {}",
        sweep.len(),
        first.w,
        last.w,
        first.revenue,
        first.damage,
        last.revenue,
        last.damage,
        cfg.out.join("sweep.csv").display()
    );
    Ok(Status::Ok)
}

fn within_bounds(e: &ArchiveEntry, cfg: &RunConfig) -> bool {
    cfg.min_revenue.is_none_or(|r| e.objectives.revenue >= r)
        && cfg.max_damage.is_none_or(|d| e.objectives.damage <= d)
}

pub fn run_extended(cfg: &RunConfig) -> Result<Status> {
    let model_config = load_model(cfg)?;
    let model = &model_config.extended;
    let ea = ea_config(cfg);
    ea.validate()?;
    let filter = match cfg.tech {
        TechSelector::All => None,
        TechSelector::Only(id) => {
            model.tech(id)?;
            Some(id)
        }
    };
    fs::create_dir_all(&cfg.out)
        .with_context(|| format!("cannot create {}", cfg.out.display()))?;

    let started = Instant::now();
    let run = evolve(model, &ea, filter)?;
    let wall = started.elapsed().as_secs_f64();
    if run.lower_failures > 0 {
        log::warn!(
            "{} follower solves missed the optimality tag and were left out",
            run.lower_failures
        );
    }

    let kept: Vec<ArchiveEntry> = run
        .archive
        .sorted_by_damage()
        .into_iter()
        .filter(|e| within_bounds(e, cfg))
        .collect();
    let rows: Vec<FrontierRow> = kept
        .iter()
        .enumerate()
        .map(|(i, e)| FrontierRow::from_entry(i, e))
        .collect();
    write_frontier(create(&cfg.out, "frontier.csv")?, model.periods(), &rows)?;
    let mut schedule = Vec::new();
    for (i, e) in kept.iter().enumerate() {
        schedule.extend(schedule_rows(i, e, model)?);
    }
    write_schedule(create(&cfg.out, "schedule.csv")?, &schedule)?;

    let echo = Echo {
        run: cfg.clone(),
        ea: ea.clone(),
        model: model_config.clone(),
    };
    let meta = RunMeta {
        config: serde_json::to_value(&echo)?,
        seed: ea.seed,
        generations: run.generations,
        evaluations: run.evaluations,
        lower_failures: run.lower_failures,
        stagnated: run.stagnated,
        archive_size: run.archive.len(),
        emitted: rows.len(),
        wall_time_secs: wall,
    };
    write_meta(create(&cfg.out, "meta.json")?, &meta)?;

    println!(
        "frontier: {} of {} archive points after {} generations ({} follower solves) -> {}",
        rows.len(),
        run.archive.len(),
        run.generations,
        run.evaluations,
        cfg.out.display()
    );
    if rows.is_empty() {
        log::warn!("no frontier point satisfies the objective bounds");
        eprintln!("warning: frontier is empty");
        return Ok(Status::Empty);
    }
    Ok(Status::Ok)
}

pub fn run_verify(cfg: &RunConfig) -> Result<Status> {
    let model = load_model(cfg)?;
    let ea = ea_config(cfg);
    ea.validate()?;
    let settings = VerifySettings {
        seed: cfg.seed,
        ea,
        ..VerifySettings::default()
    };
    let report = run_all(&model, &settings);
    println!("{report}");
    if report.all_passed() {
        Ok(Status::Ok)
    } else {
        Ok(Status::VerifyFailed)
    }
}
