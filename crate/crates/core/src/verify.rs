//! Self-checks of the solvers against closed forms and brute-force oracles.
//!
//! Every check returns a [`Check`] carrying the measured deviation, the
//! tolerance it was held to, and the wall time. Runtime limits are part of
//! the pass condition where one is set.

use std::fmt;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::analytical::{
    feasibility_threshold, follower_best_response, follower_profit, optimal_extraction,
    optimal_tax, pareto_sweep, scalarized_objective,
};
use crate::bilevel::{evolve, EaConfig, Evolution};
use crate::error::Result;
use crate::frontier::{
    compare_frontiers, damage_coverage, detect_kinks, distances_to_curve, nondominated_union,
    KinkSettings, ObjectiveRanges,
};
use crate::io::{write_frontier, FrontierRow};
use crate::lower::best_response;
use crate::model::{
    AnalyticalParams, ExtendedModel, LeaderStrategy, ModelConfig, ObjectivePoint,
};
use crate::oracle::{grid_best_response, weighted_scalar_check, GridSpec};

/// Weights at which the closed forms are checked.
pub const CHECK_WEIGHTS: [f64; 6] = [0.02, 0.1, 0.25, 0.5, 0.75, 1.0];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    /// Criterion number; 0 for supplementary checks.
    pub id: u8,
    pub name: String,
    pub passed: bool,
    pub detail: String,
    pub seconds: f64,
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = if self.passed { "PASS" } else { "FAIL" };
        let id = if self.id == 0 {
            "-".to_string()
        } else {
            self.id.to_string()
        };
        write!(
            f,
            "[{tag}] {id:>2} {:<28} {} ({:.2} s)",
            self.name, self.detail, self.seconds
        )
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub checks: Vec<Check>,
}

impl Report {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn get(&self, id: u8) -> Option<&Check> {
        self.checks.iter().find(|c| c.id == id)
    }
}

impl fmt::Display for Report {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            writeln!(f, "{c}")?;
        }
        let failed = self.checks.iter().filter(|c| !c.passed).count();
        write!(f, "{} checks, {failed} failed", self.checks.len())
    }
}

/// Budgets of the randomized checks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifySettings {
    pub seed: u64,
    /// Search used for the per-technology and combined frontiers.
    pub ea: EaConfig,
    /// Search used on the single-period instance.
    pub analytical_ea: EaConfig,
    pub oracle_samples: usize,
    /// Grid points per period in the oracle before refinement.
    pub oracle_points: usize,
    pub telescoping_samples: usize,
    pub kink: KinkSettings,
}

impl Default for VerifySettings {
    fn default() -> Self {
        Self {
            seed: 1,
            ea: EaConfig::default(),
            analytical_ea: EaConfig {
                population_size: 60,
                max_generations: 200,
                ..EaConfig::default()
            },
            oracle_samples: 50,
            oracle_points: 12,
            telescoping_samples: 1000,
            kink: KinkSettings::default(),
        }
    }
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, Duration) {
    let start = Instant::now();
    let out = f();
    (out, start.elapsed())
}

fn check(id: u8, name: &str, elapsed: Duration, outcome: Result<(bool, String)>) -> Check {
    let (passed, detail) = outcome.unwrap_or_else(|e| (false, format!("error: {e}")));
    Check {
        id,
        name: name.to_string(),
        passed,
        detail,
        seconds: elapsed.as_secs_f64(),
    }
}

fn within_time(elapsed: Duration, limit_secs: f64, passed: bool, detail: String) -> (bool, String) {
    let fast = elapsed.as_secs_f64() < limit_secs;
    let detail = if fast {
        detail
    } else {
        format!("{detail}; over the {limit_secs} s limit")
    };
    (passed && fast, detail)
}

fn central(f: impl Fn(f64) -> f64, x: f64) -> f64 {
    let h = 1e-4;
    (f(x + h) - f(x - h)) / (2.0 * h)
}

/// First-order conditions of both levels at the closed-form optimum, and
/// agreement with a tax grid of step 1e-3.
pub fn closed_form(p: &AnalyticalParams) -> Check {
    const STEP: f64 = 1e-3;
    let (outcome, elapsed) = timed(|| -> Result<(f64, f64)> {
        p.validate()?;
        let grid = GridSpec::new(vec![(0.0, p.alpha - p.gamma)], STEP)?;
        let mut foc = 0.0f64;
        let mut gap = 0.0f64;
        for w in CHECK_WEIGHTS {
            let tau = optimal_tax(w, p)?;
            let q = optimal_extraction(w, p)?;
            if q > 0.0 {
                foc = foc.max(central(|x| follower_profit(x, tau, p), q).abs());
            }
            foc = foc.max(central(|t| scalarized_objective(t, w, p).unwrap_or(f64::NAN), tau).abs());
            let (tau_grid, _) = weighted_scalar_check(p, w, &grid)?;
            let q_grid = follower_best_response(tau_grid, p)?;
            gap = gap.max((tau_grid - tau).abs()).max((q_grid - q).abs());
        }
        Ok((foc, gap))
    });
    let outcome = outcome.map(|(foc, gap)| {
        let ok = foc <= 1e-6 && gap <= STEP;
        within_time(
            elapsed,
            1.0,
            ok,
            format!("max |FOC| {foc:.2e} (<= 1e-6), grid gap {gap:.2e} (<= {STEP:e})"),
        )
    });
    check(1, "closed-form correctness", elapsed, outcome)
}

/// The weight below which the leader's optimum extracts nothing. With the
/// reference parameters this must be 0.01.
pub fn threshold(p: &AnalyticalParams) -> Check {
    let (outcome, elapsed) = timed(|| -> Result<(bool, String)> {
        let w = feasibility_threshold(p)?;
        let reference = AnalyticalParams::default();
        if *p == reference {
            let err = (w - 0.01).abs();
            Ok((err <= 1e-12, format!("w_min = {w} vs 0.01, error {err:.1e} (<= 1e-12)")))
        } else {
            // Numerator of the unclamped optimal extraction must vanish.
            let numerator = w * (p.alpha - p.gamma) - (1.0 - w) * p.k;
            let err = numerator.abs() / (p.alpha - p.gamma + p.k);
            Ok((err <= 1e-12, format!("w_min = {w}, residual {err:.1e} (<= 1e-12)")))
        }
    });
    check(2, "threshold reproduction", elapsed, outcome)
}

/// Sweep endpoints at `w = 1` and at the threshold weight.
pub fn endpoints(p: &AnalyticalParams) -> Check {
    let (outcome, elapsed) = timed(|| -> Result<(bool, String)> {
        let sweep = pareto_sweep(p, 100)?;
        let first = sweep.first().expect("sweep is nonempty");
        let last = sweep.last().expect("sweep is nonempty");
        let span = p.alpha - p.gamma;
        let revenue = span * span / (8.0 * (p.beta + p.delta));
        let damage = p.k * span / (4.0 * (p.beta + p.delta));
        let err = (last.revenue - revenue)
            .abs()
            .max((last.damage - damage).abs())
            .max(first.revenue.abs())
            .max(first.damage.abs());
        Ok((
            err <= 1e-9,
            format!(
                "w=1 -> ({}, {}), w_min -> ({}, {}), error {err:.1e} (<= 1e-9)",
                last.revenue, last.damage, first.revenue, first.damage
            ),
        ))
    });
    check(3, "frontier endpoints", elapsed, outcome)
}

/// Closed-form frontier of the single-period game as `n` points, evenly
/// spaced in the tax between the revenue-maximizing tax and shutdown.
pub fn analytical_curve(p: &AnalyticalParams, n: usize) -> Result<Vec<ObjectivePoint>> {
    let lo = optimal_tax(1.0, p)?;
    let hi = p.alpha - p.gamma;
    (0..n)
        .map(|i| {
            let tau = lo + (hi - lo) * i as f64 / (n - 1) as f64;
            let q = follower_best_response(tau, p)?;
            Ok(ObjectivePoint {
                revenue: tau * q,
                damage: p.k * q,
                profit: follower_profit(q, tau, p),
            })
        })
        .collect()
}

/// Nested search on the single-period game embedded as a one-period
/// extended model, compared with the closed-form frontier.
pub fn analytical_convergence(p: &AnalyticalParams, ea: &EaConfig) -> Check {
    let (outcome, elapsed) = timed(|| -> Result<(bool, String)> {
        if ea.population_size != 60 || ea.max_generations > 200 {
            log::warn!(
                "single-period convergence run uses population {} and {} generations",
                ea.population_size,
                ea.max_generations
            );
        }
        let model = ExtendedModel::from_analytical(p)?;
        let run = evolve(&model, ea, None)?;
        let points = run.archive.objectives();
        let curve = analytical_curve(p, 50_001)?;
        let ranges = ObjectiveRanges {
            revenue: curve[0].revenue,
            damage: curve[0].damage,
        };
        let worst = distances_to_curve(&points, &curve, ranges)
            .into_iter()
            .fold(0.0, f64::max);
        let coverage = damage_coverage(&points, ranges.damage);
        Ok((
            !points.is_empty() && worst <= 0.01 && coverage >= 0.9,
            format!(
                "{} points after {} generations, max distance {worst:.2e} (<= 0.01), damage coverage {:.1}% (>= 90%)",
                points.len(),
                run.generations,
                100.0 * coverage
            ),
        ))
    });
    let outcome = outcome.map(|(ok, d)| within_time(elapsed, 120.0, ok, d));
    check(4, "single-period EA convergence", elapsed, outcome)
}

/// Uniform random leader strategy within the model's tax bounds.
pub fn random_strategy(model: &ExtendedModel, rng: &mut impl Rng) -> LeaderStrategy {
    LeaderStrategy::new(
        model
            .tau_bounds()
            .iter()
            .map(|&(lo, hi)| rng.gen_range(lo..=hi))
            .collect(),
    )
}

/// Deterministic follower solver against grid enumeration plus pattern
/// search on random strategies.
pub fn oracle_equivalence(model: &ExtendedModel, settings: &VerifySettings) -> Check {
    let (outcome, elapsed) = timed(|| -> Result<(bool, String)> {
        let mut rng = ChaCha8Rng::seed_from_u64(settings.seed);
        let mut worst = 0.0f64;
        let mut untagged = 0;
        for _ in 0..settings.oracle_samples {
            let strat = random_strategy(model, &mut rng);
            let fast = best_response(&strat, model)?;
            if !fast.optimality_tag {
                untagged += 1;
            }
            let reach = GridSpec::for_follower(&strat, model, 1.0)?
                .bounds()
                .iter()
                .map(|b| b.1)
                .fold(0.0, f64::max);
            let step = (reach / (settings.oracle_points.max(2) - 1) as f64).max(1e-6);
            let grid = GridSpec::for_follower(&strat, model, step)?;
            let slow = grid_best_response(&strat, model, &grid, true)?;
            worst = worst.max((fast.profit - slow.profit).abs());
        }
        Ok((
            worst <= 1e-2 && untagged == 0,
            format!(
                "{} strategies, max profit gap {worst:.2e} (<= 1e-2), {untagged} untagged",
                settings.oracle_samples
            ),
        ))
    });
    let outcome = outcome.map(|(ok, d)| within_time(elapsed, 300.0, ok, d));
    check(5, "lower-solver oracle match", elapsed, outcome)
}

/// Per-period purification costs, read back out of the period profit,
/// add up to the cumulative cost of the total extraction.
pub fn telescoping(model: &ExtendedModel, settings: &VerifySettings) -> Check {
    let (outcome, elapsed) = timed(|| -> Result<(bool, String)> {
        let mut rng = ChaCha8Rng::seed_from_u64(settings.seed ^ 0x7e1e);
        let periods = model.periods();
        let mut worst = 0.0f64;
        for _ in 0..settings.telescoping_samples {
            let q: Vec<f64> = model
                .q_bounds()
                .iter()
                .map(|&(lo, hi)| rng.gen_range(lo..=hi))
                .collect();
            for tech in model.techs() {
                let mut sum = 0.0;
                for t in 1..=periods {
                    let qt = q[t - 1];
                    let gross = (model.alpha()[t - 1] - model.beta()[t - 1] * qt) * qt
                        - tech.extraction_rate_cost(qt)?;
                    sum += gross - model.period_profit(t, &q[..t], 0.0, tech)?;
                }
                let total = model.cumulative_cost(q.iter().sum(), tech)?;
                worst = worst.max((sum - total).abs());
            }
        }
        Ok((
            worst <= 1e-9,
            format!(
                "{} schedules x {} technologies, max error {worst:.1e} (<= 1e-9)",
                settings.telescoping_samples,
                model.techs().len()
            ),
        ))
    });
    let outcome = outcome.map(|(ok, d)| within_time(elapsed, 1.0, ok, d));
    check(6, "telescoping identity", elapsed, outcome)
}

/// Frontiers from one technology-restricted run per technology and one
/// unrestricted run.
#[derive(Debug, Clone)]
pub struct FrontierRuns {
    pub per_tech: Vec<(usize, Evolution)>,
    pub combined: Evolution,
}

pub fn frontier_runs(model: &ExtendedModel, ea: &EaConfig) -> Result<FrontierRuns> {
    let per_tech = model
        .techs()
        .iter()
        .map(|t| Ok((t.id, evolve(model, ea, Some(t.id))?)))
        .collect::<Result<Vec<_>>>()?;
    let combined = evolve(model, ea, None)?;
    Ok(FrontierRuns { per_tech, combined })
}

/// Nondominated union of the per-technology frontiers against the
/// combined frontier.
pub fn frontier_composition(runs: &FrontierRuns, elapsed: Duration) -> Check {
    let fronts: Vec<Vec<ObjectivePoint>> = runs
        .per_tech
        .iter()
        .map(|(_, r)| r.archive.objectives())
        .collect();
    let refs: Vec<&[ObjectivePoint]> = fronts.iter().map(Vec::as_slice).collect();
    let union = nondominated_union(&refs);
    let combined = runs.combined.archive.objectives();
    let m = compare_frontiers(&union, &combined);
    let techs: Vec<usize> = runs
        .combined
        .archive
        .entries()
        .iter()
        .map(|e| e.response.tech)
        .collect();
    let mut used: Vec<usize> = techs.clone();
    used.sort_unstable();
    used.dedup();
    check(
        7,
        "frontier composition",
        elapsed,
        Ok((
            !combined.is_empty() && m.within(0.005),
            format!(
                "epsilon union->all {:.2e}, all->union {:.2e} (<= 5e-3); combined uses technologies {used:?}",
                m.a_covers_b, m.b_covers_a
            ),
        )),
    )
}

/// Slope break of each single-technology frontier at some stratum boundary.
pub fn strata_kinks(model: &ExtendedModel, runs: &FrontierRuns, settings: &KinkSettings) -> Check {
    let (outcome, elapsed) = timed(|| -> Result<(bool, String)> {
        let bps = model.strata().breakpoints();
        let interior = &bps[..bps.len() - 1];
        let mut ok = true;
        let mut parts = Vec::new();
        for (id, run) in &runs.per_tech {
            let k = model.tech(*id)?.k;
            let kinks = detect_kinks(&run.archive.objectives(), k, interior, settings);
            ok &= !kinks.is_empty();
            let at: Vec<String> = kinks
                .iter()
                .map(|kk| format!("{}:{:.2}", kk.boundary, kk.right_slope / kk.left_slope))
                .collect();
            parts.push(format!("tech {id} [{}]", at.join(" ")));
        }
        Ok((
            ok && !runs.per_tech.is_empty(),
            format!(
                "boundary:slope ratio (< {}) {}",
                settings.ratio,
                parts.join(", ")
            ),
        ))
    });
    check(8, "strata discontinuity", elapsed, outcome)
}

/// Bytes of `frontier.csv` for an archive.
pub fn frontier_bytes(model: &ExtendedModel, run: &Evolution) -> Result<Vec<u8>> {
    let rows: Vec<FrontierRow> = run
        .archive
        .sorted_by_damage()
        .iter()
        .enumerate()
        .map(|(i, e)| FrontierRow::from_entry(i, e))
        .collect();
    let mut buf = Vec::new();
    write_frontier(&mut buf, model.periods(), &rows)?;
    Ok(buf)
}

/// Repeats the combined run and compares the emitted `frontier.csv` bytes.
pub fn determinism(model: &ExtendedModel, ea: &EaConfig, first: &Evolution) -> Check {
    let (outcome, elapsed) = timed(|| -> Result<(bool, String)> {
        let a = frontier_bytes(model, first)?;
        let b = frontier_bytes(model, &evolve(model, ea, None)?)?;
        Ok((
            a == b,
            format!(
                "{} vs {} bytes, {}",
                a.len(),
                b.len(),
                if a == b { "identical" } else { "different" }
            ),
        ))
    });
    check(9, "determinism", elapsed, outcome)
}

/// Every technology's purification slopes are nondecreasing, so that the
/// cumulative cost is convex.
pub fn convexity(model: &ExtendedModel) -> Check {
    let bad: Vec<usize> = model
        .techs()
        .iter()
        .filter(|t| !t.has_nondecreasing_slopes())
        .map(|t| t.id)
        .collect();
    check(
        0,
        "cumulative cost convexity",
        Duration::ZERO,
        Ok((
            bad.is_empty(),
            if bad.is_empty() {
                "slopes nondecreasing for every technology".to_string()
            } else {
                format!("slopes decrease for technologies {bad:?}")
            },
        )),
    )
}

/// Runs every check. The extended-model EA seeds come from `settings.seed`.
pub fn run_all(config: &ModelConfig, settings: &VerifySettings) -> Report {
    let p = &config.analytical;
    let model = &config.extended;
    let ea = EaConfig {
        seed: settings.seed,
        ..settings.ea.clone()
    };
    let analytical_ea = EaConfig {
        seed: settings.seed,
        ..settings.analytical_ea.clone()
    };
    let mut checks = vec![
        convexity(model),
        closed_form(p),
        threshold(p),
        endpoints(p),
        analytical_convergence(p, &analytical_ea),
        oracle_equivalence(model, settings),
        telescoping(model, settings),
    ];
    let (runs, elapsed) = timed(|| frontier_runs(model, &ea));
    match runs {
        Ok(runs) => {
            checks.push(frontier_composition(&runs, elapsed));
            checks.push(strata_kinks(model, &runs, &settings.kink));
            checks.push(determinism(model, &ea, &runs.combined));
        }
        Err(e) => {
            let msg = e.to_string();
            for (id, name) in [
                (7, "frontier composition"),
                (8, "strata discontinuity"),
                (9, "determinism"),
            ] {
                checks.push(check(id, name, elapsed, Ok((false, format!("error: {msg}")))));
            }
        }
    }
    Report { checks }
}
