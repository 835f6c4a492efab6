use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use minetax_bench::{moderate_taxes, reference_model};
use minetax_core::analytical::pareto_sweep;
use minetax_core::bilevel::{evolve, EaConfig};
use minetax_core::lower::{best_response, best_response_ea, best_response_fixed_tech};
use minetax_core::{AnalyticalParams, LowerEaConfig};

fn lower_level(c: &mut Criterion) {
    let model = reference_model();
    let strat = moderate_taxes();
    let mut group = c.benchmark_group("lower");
    group.bench_function("fixed_tech", |b| {
        let tech = model.tech(2).unwrap();
        b.iter(|| best_response_fixed_tech(black_box(&strat), tech, &model).unwrap())
    });
    group.bench_function("all_techs", |b| {
        b.iter(|| best_response(black_box(&strat), &model).unwrap())
    });
    group.bench_function("evolutionary", |b| {
        let cfg = LowerEaConfig::default();
        b.iter(|| best_response_ea(black_box(&strat), &model, &cfg).unwrap())
    });
    group.finish();
}

fn upper_level(c: &mut Criterion) {
    let model = reference_model();
    let mut group = c.benchmark_group("evolve");
    group.sample_size(10);
    for pop in [20usize, 60] {
        let cfg = EaConfig {
            population_size: pop,
            max_generations: 20,
            stagnation_generations: 0,
            ..EaConfig::default()
        };
        group.bench_with_input(BenchmarkId::new("generations_20", pop), &cfg, |b, cfg| {
            b.iter(|| evolve(&model, cfg, None).unwrap())
        });
    }
    group.finish();
}

fn closed_form(c: &mut Criterion) {
    let p = AnalyticalParams::default();
    c.bench_function("pareto_sweep_1000", |b| {
        b.iter(|| pareto_sweep(black_box(&p), 1000).unwrap())
    });
}

criterion_group!(benches, lower_level, upper_level, closed_form);
criterion_main!(benches);
