use minetax_core::analytical::follower_best_response;
use minetax_core::bilevel::{evolve, EaConfig, LowerSolverMode, TechChoice};
use minetax_core::lower::{best_response, best_response_ea, best_response_fixed_tech};
use minetax_core::oracle::{grid_best_response, GridSpec};
use minetax_core::{AnalyticalParams, ExtendedModel, LeaderStrategy, LowerEaConfig, ModelConfig};
use proptest::prelude::*;

fn reference() -> ExtendedModel {
    ModelConfig::default().extended
}

#[test]
fn lower_solver_matches_closed_form_on_single_period_instance() {
    let p = AnalyticalParams::default();
    let model = ExtendedModel::from_analytical(&p).unwrap();
    for tau in [0.0, 10.0, 49.5, 80.0, 98.9, 99.0, 100.0] {
        let strat = LeaderStrategy::new(vec![tau]);
        let r = best_response(&strat, &model).unwrap();
        let q = follower_best_response(tau, &p).unwrap();
        assert!((r.response.q[0] - q).abs() < 1e-6, "tau {tau}: {} vs {q}", r.response.q[0]);
        assert!(r.optimality_tag);
    }
}

#[test]
fn evolutionary_lower_solver_agrees_with_deterministic_one() {
    let model = reference();
    let lower = LowerEaConfig {
        population_size: 16,
        generations: 10,
        seed: 4,
        ..LowerEaConfig::default()
    };
    for tau in [[10.0, 12.0, 14.0, 16.0, 18.0], [30.0, 0.0, 45.0, 20.0, 60.0]] {
        let strat = LeaderStrategy::new(tau.to_vec());
        let a = best_response(&strat, &model).unwrap();
        let b = best_response_ea(&strat, &model, &lower).unwrap();
        assert!((a.profit - b.profit).abs() <= 1e-6 * a.profit.abs().max(1.0));
    }
}

#[test]
fn evolutionary_lower_level_in_nested_search_keeps_archive_sound() {
    let model = reference();
    let config = EaConfig {
        population_size: 8,
        max_generations: 4,
        lower_solver: LowerSolverMode::Evolutionary(LowerEaConfig {
            population_size: 6,
            generations: 3,
            ..LowerEaConfig::default()
        }),
        tech_choice: TechChoice::Leader,
        ..EaConfig::default()
    };
    let run = evolve(&model, &config, None).unwrap();
    for e in run.archive.entries() {
        let strat = &e.strategy;
        let tech = model.tech(e.response.tech).unwrap();
        let direct = best_response_fixed_tech(strat, tech, &model).unwrap();
        assert!(e.objectives.profit >= direct.profit - 1e-6 * direct.profit.abs().max(1.0));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn fixed_technology_solver_matches_oracle(
        tech in 1usize..=4,
        tau in proptest::collection::vec(0.0f64..1.0, 5),
    ) {
        let model = reference().restricted_to(tech).unwrap();
        let tau: Vec<f64> = tau.iter().zip(model.alpha()).map(|(u, a)| u * a).collect();
        let strat = LeaderStrategy::new(tau);
        let fast = best_response(&strat, &model).unwrap();
        let grid = GridSpec::for_follower(&strat, &model, 1.0).unwrap();
        let reach = grid.bounds().iter().map(|b| b.1).fold(0.0, f64::max);
        let grid = GridSpec::for_follower(&strat, &model, (reach / 9.0).max(1e-3)).unwrap();
        let slow = grid_best_response(&strat, &model, &grid, true).unwrap();
        prop_assert!(fast.optimality_tag);
        prop_assert!((fast.profit - slow.profit).abs() <= 1e-6, "{} vs {}", fast.profit, slow.profit);
    }
}
