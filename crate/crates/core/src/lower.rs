//! Follower best response in the multi-period model.
//!
//! For fixed taxes and technology the mine's total profit is strictly concave
//! in the extraction schedule, so the maximizer is unique. It is found by
//! cyclic line searches: each sweep runs an exact golden-section search along
//! every coordinate direction `e_t` and every pairwise transfer `e_i - e_j`.
//! The transfers matter at kinks of the cumulative cost: there a single
//! coordinate cannot move in either direction without paying the steeper
//! stratum slope, while shifting extraction between periods leaves the
//! cumulative total, and hence that cost, untouched.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{ModelError, Result};
use crate::model::{ExtendedModel, FollowerResponse, LeaderStrategy, TechParams};
use crate::variation::{polynomial_mutation, sbx};

/// Step used for one-sided finite-difference stationarity checks.
pub const STATIONARITY_STEP: f64 = 1e-6;
/// Largest admissible one-sided directional derivative at a tagged response.
pub const STATIONARITY_TOL: f64 = 1e-4;

const INV_PHI: f64 = 0.618_033_988_749_894_8;

/// Solution of the follower problem for one leader strategy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BestResponse {
    pub response: FollowerResponse,
    pub profit: f64,
    /// Set when the search converged and the stationarity check passed.
    pub optimality_tag: bool,
}

/// Settings of the coordinate/transfer line-search ascent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AscentSettings {
    /// A sweep whose largest move is at most this ends the search.
    pub move_tol: f64,
    pub max_sweeps: usize,
    /// Golden-section bracket width, relative to `1 + interval length`.
    pub line_tol: f64,
}

impl Default for AscentSettings {
    fn default() -> Self {
        Self {
            move_tol: 1e-7,
            max_sweeps: 2000,
            line_tol: 1e-12,
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Direction {
    up: usize,
    down: Option<usize>,
}

fn directions(periods: usize) -> Vec<Direction> {
    let mut dirs: Vec<Direction> = (0..periods).map(|up| Direction { up, down: None }).collect();
    for i in 0..periods {
        for j in i + 1..periods {
            dirs.push(Direction { up: i, down: Some(j) });
        }
    }
    dirs
}

/// Maximizes a unimodal `f` over `[lo, hi]`.
fn golden_section_max(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64) -> (f64, f64) {
    let mut x1 = hi - INV_PHI * (hi - lo);
    let mut x2 = lo + INV_PHI * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    while hi - lo > tol {
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + INV_PHI * (hi - lo);
            f2 = f(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - INV_PHI * (hi - lo);
            f1 = f(x1);
        }
    }
    if f1 >= f2 {
        (x1, f1)
    } else {
        (x2, f2)
    }
}

/// Profit change along a direction, computed from the moved quantities
/// only so that small improvements are not lost against the total.
struct ProfitLine<'a> {
    model: &'a ExtendedModel,
    tech: &'a TechParams,
    tau: &'a [f64],
    discount: Vec<f64>,
    /// Weight of `C(cum_t)` in the discounted purification cost.
    cost_weight: Vec<f64>,
}

impl<'a> ProfitLine<'a> {
    fn new(model: &'a ExtendedModel, tech: &'a TechParams, tau: &'a [f64]) -> Self {
        let periods = model.periods();
        let discount: Vec<f64> = (1..=periods).map(|t| model.discount(t)).collect();
        let cost_weight = (0..periods)
            .map(|i| discount[i] - discount.get(i + 1).copied().unwrap_or(0.0))
            .collect();
        Self {
            model,
            tech,
            tau,
            discount,
            cost_weight,
        }
    }

    /// Change of the separable part of period `t` when `q_t` moves by `h`.
    fn own_delta(&self, t: usize, q: f64, h: f64) -> f64 {
        let m = self.model;
        let linear = m.alpha()[t] - self.tech.beta_er - self.tau[t];
        let curvature = m.beta()[t] + self.tech.alpha_er;
        self.discount[t] * (h * linear - curvature * h * (2.0 * q + h))
    }

    fn delta(&self, q: &[f64], cum: &[f64], dir: Direction, s: f64) -> f64 {
        let mut total = self.own_delta(dir.up, q[dir.up], s);
        if let Some(down) = dir.down {
            total += self.own_delta(down, q[down], -s);
        }
        // cum_t moves by s for up <= t < down (or to the end without a
        // compensating index).
        let end = dir.down.unwrap_or(q.len());
        let strata = self.model.strata();
        for (&w, &c) in self.cost_weight[dir.up..end].iter().zip(&cum[dir.up..end]) {
            if w != 0.0 {
                total -= w * strata.cost_of_step(&self.tech.slopes, c, s);
            }
        }
        total
    }
}

fn prefix_sums(q: &[f64]) -> Vec<f64> {
    q.iter()
        .scan(0.0, |acc, x| {
            *acc += x;
            Some(*acc)
        })
        .collect()
}

/// Runs the line-search ascent from `start`. Returns the schedule and
/// whether the move tolerance was reached within the sweep budget.
pub fn coordinate_ascent(
    tau: &[f64],
    tech: &TechParams,
    model: &ExtendedModel,
    start: &[f64],
    settings: &AscentSettings,
) -> (Vec<f64>, bool) {
    let bounds = model.q_bounds();
    let mut q: Vec<f64> = start
        .iter()
        .zip(bounds)
        .map(|(&x, &(lo, hi))| x.clamp(lo, hi))
        .collect();
    let line = ProfitLine::new(model, tech, tau);
    let dirs = directions(q.len());
    let mut cum = prefix_sums(&q);

    for _ in 0..settings.max_sweeps {
        let mut largest_move = 0.0f64;
        for &dir in &dirs {
            let (up_lo, up_hi) = bounds[dir.up];
            let mut lo = up_lo - q[dir.up];
            let mut hi = up_hi - q[dir.up];
            if let Some(down) = dir.down {
                let (d_lo, d_hi) = bounds[down];
                lo = lo.max(q[down] - d_hi);
                hi = hi.min(q[down] - d_lo);
            }
            if hi - lo <= 0.0 {
                continue;
            }
            let phi = |s: f64| line.delta(&q, &cum, dir, s);
            let tol = settings.line_tol * (1.0 + (hi - lo));
            let (mut step, mut gain) = golden_section_max(phi, lo, hi, tol);
            for edge in [lo, hi] {
                let g = phi(edge);
                if g > gain {
                    step = edge;
                    gain = g;
                }
            }
            if gain <= 0.0 || step == 0.0 {
                continue;
            }
                q[dir.up] = (q[dir.up] + step).clamp(up_lo, up_hi);
            if let Some(down) = dir.down {
                let (d_lo, d_hi) = bounds[down];
                q[down] = (q[down] - step).clamp(d_lo, d_hi);
            }
            cum = prefix_sums(&q);
            largest_move = largest_move.max(step.abs());
        }
        if largest_move <= settings.move_tol {
            return (q, true);
        }
    }
    (q, false)
}

/// Largest one-sided finite-difference derivative of total profit over the
/// feasible directions `+-e_t` and `+-(e_i - e_j)`. Non-positive (up to
/// rounding) exactly when no ascent direction exists.
pub fn stationarity_violation(
    q: &[f64],
    tau: &[f64],
    tech: &TechParams,
    model: &ExtendedModel,
) -> f64 {
    let h = STATIONARITY_STEP;
    let bounds = model.q_bounds();
    let base = model.total_profit_unchecked(q, tau, tech);
    let mut worst = f64::NEG_INFINITY;
    let mut probe = q.to_vec();
    let n = q.len();
    let feasible = |x: &[f64]| x.iter().zip(bounds).all(|(v, b)| *v >= b.0 && *v <= b.1);
    for i in 0..n {
        for j in 0..=n {
            // j == n encodes the pure coordinate direction.
            if j == i {
                continue;
            }
            for sign in [1.0, -1.0] {
                probe.copy_from_slice(q);
                probe[i] += sign * h;
                if j < n {
                    probe[j] -= sign * h;
                }
                if !feasible(&probe) {
                    continue;
                }
                let d = (model.total_profit_unchecked(&probe, tau, tech) - base) / h;
                worst = worst.max(d);
            }
        }
    }
    worst
}

pub fn is_stationary(q: &[f64], tau: &[f64], tech: &TechParams, model: &ExtendedModel) -> bool {
    stationarity_violation(q, tau, tech, model) <= STATIONARITY_TOL
}

fn finish(
    q: Vec<f64>,
    converged: bool,
    tau: &[f64],
    tech: &TechParams,
    model: &ExtendedModel,
) -> BestResponse {
    let profit = model.total_profit_unchecked(&q, tau, tech);
    let optimality_tag = converged && is_stationary(&q, tau, tech, model);
    if !optimality_tag {
        log::debug!(
            "follower search for technology {} did not reach stationarity (converged: {converged})",
            tech.id
        );
    }
    BestResponse {
        response: FollowerResponse { q, tech: tech.id },
        profit,
        optimality_tag,
    }
}

fn check_strategy(strat: &LeaderStrategy, model: &ExtendedModel) -> Result<()> {
    if strat.tau.len() != model.periods() {
        return Err(ModelError::LengthMismatch {
            what: "tax vector",
            expected: model.periods(),
            got: strat.tau.len(),
        });
    }
    if let Some(t) = strat.tau.iter().find(|t| !(**t >= 0.0 && t.is_finite())) {
        return Err(ModelError::Domain(format!("tax must be >= 0, got {t}")));
    }
    Ok(())
}

/// Best schedule for a fixed technology, searched from the origin.
pub fn best_response_fixed_tech(
    strat: &LeaderStrategy,
    tech: &TechParams,
    model: &ExtendedModel,
) -> Result<BestResponse> {
    let start = vec![0.0; model.periods()];
    best_response_fixed_tech_from(strat, tech, model, &start, &AscentSettings::default())
}

pub fn best_response_fixed_tech_from(
    strat: &LeaderStrategy,
    tech: &TechParams,
    model: &ExtendedModel,
    start: &[f64],
    settings: &AscentSettings,
) -> Result<BestResponse> {
    check_strategy(strat, model)?;
    if start.len() != model.periods() {
        return Err(ModelError::LengthMismatch {
            what: "start schedule",
            expected: model.periods(),
            got: start.len(),
        });
    }
    let (q, converged) = coordinate_ascent(&strat.tau, tech, model, start, settings);
    Ok(finish(q, converged, &strat.tau, tech, model))
}

/// Picks the most profitable candidate; candidates within rounding of the
/// best profit are ranked by the leader's preference (higher revenue, then
/// lower damage, then lower technology id).
fn pick_best(
    candidates: Vec<BestResponse>,
    strat: &LeaderStrategy,
    model: &ExtendedModel,
) -> Result<BestResponse> {
    let top = candidates
        .iter()
        .map(|c| c.profit)
        .fold(f64::NEG_INFINITY, f64::max);
    let tol = 1e-9f64.max(1e-9 * top.abs());
    let mut tied: Vec<(BestResponse, f64, f64)> = Vec::new();
    for c in candidates {
        if c.profit >= top - tol {
            let obj = model.leader_objectives(&c.response, strat)?;
            tied.push((c, obj.revenue, obj.damage));
        }
    }
    tied.sort_by(|a, b| {
        b.1.total_cmp(&a.1)
            .then(a.2.total_cmp(&b.2))
            .then(a.0.response.tech.cmp(&b.0.response.tech))
    });
    Ok(tied.swap_remove(0).0)
}

/// Follower optimum over both the schedule and the technology.
pub fn best_response(strat: &LeaderStrategy, model: &ExtendedModel) -> Result<BestResponse> {
    let candidates = model
        .techs()
        .iter()
        .map(|tech| best_response_fixed_tech(strat, tech, model))
        .collect::<Result<Vec<_>>>()?;
    pick_best(candidates, strat, model)
}

/// Budget of the evolutionary follower search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LowerEaConfig {
    pub population_size: usize,
    pub generations: usize,
    pub crossover_rate: f64,
    /// Per-variable mutation probability.
    pub mutation_rate: f64,
    pub eta_crossover: f64,
    pub eta_mutation: f64,
    pub seed: u64,
    pub local_search: bool,
    /// Optional schedule injected as the first individual.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub start: Option<Vec<f64>>,
}

impl Default for LowerEaConfig {
    fn default() -> Self {
        Self {
            population_size: 20,
            generations: 15,
            crossover_rate: 0.9,
            mutation_rate: 0.2,
            eta_crossover: 15.0,
            eta_mutation: 20.0,
            seed: 0,
            local_search: true,
            start: None,
        }
    }
}

impl LowerEaConfig {
    pub fn validate(&self) -> Result<()> {
        if self.population_size == 0 {
            return Err(ModelError::invalid("lower.population_size", "must be >= 1"));
        }
        for (name, rate) in [
            ("lower.crossover_rate", self.crossover_rate),
            ("lower.mutation_rate", self.mutation_rate),
        ] {
            if !(0.0..=1.0).contains(&rate) {
                return Err(ModelError::invalid(name, "must lie in [0, 1]"));
            }
        }
        if self.eta_crossover < 0.0 || self.eta_mutation < 0.0 {
            return Err(ModelError::invalid("lower.eta", "must be >= 0"));
        }
        Ok(())
    }
}

fn tournament<'p, R: Rng>(rng: &mut R, pop: &'p [(Vec<f64>, f64)]) -> &'p Vec<f64> {
    let a = &pop[rng.gen_range(0..pop.len())];
    let b = &pop[rng.gen_range(0..pop.len())];
    if a.1 >= b.1 {
        &a.0
    } else {
        &b.0
    }
}

/// Evolutionary search for one technology followed by the line-search ascent
/// from the best individual.
pub fn best_response_ea_fixed_tech(
    strat: &LeaderStrategy,
    tech: &TechParams,
    model: &ExtendedModel,
    config: &LowerEaConfig,
) -> Result<BestResponse> {
    check_strategy(strat, model)?;
    config.validate()?;
    let bounds = model.q_bounds();
    let tau = &strat.tau;
    let mut rng = ChaCha8Rng::seed_from_u64(
        config
            .seed
            .wrapping_add((tech.id as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)),
    );
    let eval = |q: Vec<f64>| {
        let f = model.total_profit_unchecked(&q, tau, tech);
        (q, f)
    };

    let mut population: Vec<(Vec<f64>, f64)> = Vec::with_capacity(config.population_size);
    if let Some(start) = &config.start {
        if start.len() != model.periods() {
            return Err(ModelError::LengthMismatch {
                what: "start schedule",
                expected: model.periods(),
                got: start.len(),
            });
        }
        let clamped = start
            .iter()
            .zip(bounds)
            .map(|(x, b)| x.clamp(b.0, b.1))
            .collect();
        population.push(eval(clamped));
    }
    while population.len() < config.population_size {
        let q = bounds.iter().map(|b| rng.gen_range(b.0..=b.1)).collect();
        population.push(eval(q));
    }

    for _ in 0..config.generations {
        let mut offspring = Vec::with_capacity(population.len() + 1);
        while offspring.len() < population.len() {
            let mut a = tournament(&mut rng, &population).clone();
            let mut b = tournament(&mut rng, &population).clone();
            if rng.gen::<f64>() < config.crossover_rate {
                sbx(&mut rng, &mut a, &mut b, bounds, config.eta_crossover);
            }
            polynomial_mutation(&mut rng, &mut a, bounds, config.mutation_rate, config.eta_mutation);
            polynomial_mutation(&mut rng, &mut b, bounds, config.mutation_rate, config.eta_mutation);
            offspring.push(eval(a));
            offspring.push(eval(b));
        }
        population.append(&mut offspring);
        population.sort_by(|x, y| y.1.total_cmp(&x.1));
        population.truncate(config.population_size);
        // Shuffling keeps tournament pairings from depending on sort ties.
        population.shuffle(&mut rng);
    }

    let best = population
        .iter()
        .max_by(|x, y| x.1.total_cmp(&y.1))
        .map(|(q, _)| q.clone())
        .expect("population is non-empty");
    if config.local_search {
        let (q, converged) =
            coordinate_ascent(tau, tech, model, &best, &AscentSettings::default());
        Ok(finish(q, converged, tau, tech, model))
    } else {
        Ok(finish(best, true, tau, tech, model))
    }
}

/// Evolutionary follower search over every technology.
pub fn best_response_ea(
    strat: &LeaderStrategy,
    model: &ExtendedModel,
    config: &LowerEaConfig,
) -> Result<BestResponse> {
    let candidates = model
        .techs()
        .iter()
        .map(|tech| best_response_ea_fixed_tech(strat, tech, model, config))
        .collect::<Result<Vec<_>>>()?;
    pick_best(candidates, strat, model)
}
