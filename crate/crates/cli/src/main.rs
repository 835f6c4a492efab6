use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use minetax_core::TechChoice;

mod run;

use run::{RunConfig, TechSelector};

/// Leader frontiers of the mine taxation game.
#[derive(Debug, Parser)]
#[command(name = "minetax", version)]
struct Cli {
    /// Which model to solve.
    #[arg(long, value_enum, default_value_t = ModelKind::Extended)]
    model: ModelKind,

    /// JSON model file; the bundled reference parameters when omitted.
    #[arg(long)]
    config: Option<PathBuf>,

    /// Technology filter for the extended model: `all` or an id.
    #[arg(long, default_value = "all", value_parser = parse_tech)]
    tech: TechSelector,

    /// Number of weights in the analytical sweep.
    #[arg(long, default_value_t = 100)]
    points: usize,

    #[arg(long, default_value_t = 100)]
    pop_size: usize,

    /// Upper bound on generations; the run may stop earlier on stagnation.
    #[arg(long, default_value_t = 300)]
    generations: usize,

    #[arg(long, default_value_t = 1)]
    seed: u64,

    /// Who chooses the technology when no filter is given.
    #[arg(long, value_enum, default_value_t = ChoiceArg::Leader)]
    tech_choice: ChoiceArg,

    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,

    /// Keep only frontier points with at least this revenue.
    #[arg(long)]
    min_revenue: Option<f64>,

    /// Keep only frontier points with at most this damage.
    #[arg(long)]
    max_damage: Option<f64>,

    /// Run the self-checks instead of solving.
    #[arg(long)]
    verify: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Analytical,
    Extended,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ChoiceArg {
    Leader,
    Follower,
}

fn parse_tech(s: &str) -> Result<TechSelector, String> {
    if s.eq_ignore_ascii_case("all") {
        return Ok(TechSelector::All);
    }
    s.parse::<usize>()
        .map(TechSelector::Only)
        .map_err(|_| format!("expected `all` or a technology id, got `{s}`"))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let tech_choice = match cli.tech_choice {
        ChoiceArg::Leader => TechChoice::Leader,
        ChoiceArg::Follower => TechChoice::Follower,
    };
    let cfg = RunConfig {
        model: cli.model,
        config: cli.config,
        tech: cli.tech,
        points: cli.points,
        pop_size: cli.pop_size,
        generations: cli.generations,
        seed: cli.seed,
        tech_choice,
        out: cli.out,
        min_revenue: cli.min_revenue,
        max_damage: cli.max_damage,
    };
    let outcome = if cli.verify {
        run::run_verify(&cfg)
    } else {
        match cfg.model {
            ModelKind::Analytical => run::run_analytical(&cfg),
            ModelKind::Extended => run::run_extended(&cfg),
        }
    };
    match outcome {
        Ok(status) => ExitCode::from(status.code()),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tech_selector_parsing() {
        assert_eq!(parse_tech("all"), Ok(TechSelector::All));
        assert_eq!(parse_tech("ALL"), Ok(TechSelector::All));
        assert_eq!(parse_tech("3"), Ok(TechSelector::Only(3)));
        assert!(parse_tech("x").is_err());
        assert!(parse_tech("-1").is_err());
    }

    #[test]
    fn run_config_round_trips_through_json() {
        let cli = Cli::try_parse_from(["minetax", "--tech", "2", "--seed", "9"]).unwrap();
        let cfg = RunConfig {
            model: cli.model,
            config: cli.config,
            tech: cli.tech,
            points: cli.points,
            pop_size: cli.pop_size,
            generations: cli.generations,
            seed: cli.seed,
            tech_choice: TechChoice::Leader,
            out: cli.out,
            min_revenue: Some(10.0),
            max_damage: None,
        };
        let text = serde_json::to_string(&cfg).unwrap();
        assert_eq!(serde_json::from_str::<RunConfig>(&text).unwrap(), cfg);
    }
}
