//! Brute-force reference solvers for tests and verification.
//!
//! Nothing here shares code with the production solvers: profits are
//! recomputed from the raw parameters, the search is plain enumeration, and
//! the optional refinement is a derivative-free pattern search.

use rayon::prelude::*;

use crate::analytical::follower_best_response;
use crate::error::{ModelError, Result};
use crate::lower::BestResponse;
use crate::model::{AnalyticalParams, ExtendedModel, FollowerResponse, LeaderStrategy, TechParams};

/// Largest number of profit evaluations a grid may request.
pub const EVALUATION_CAP: u128 = 100_000_000;

/// Smallest pattern-search step before refinement stops.
const REFINE_FLOOR: f64 = 1e-10;

/// Rectangular grid: every dimension runs from its lower bound to its upper
/// bound in increments of `step`, with the upper bound always included.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    bounds: Vec<(f64, f64)>,
    step: f64,
}

impl GridSpec {
    pub fn new(bounds: Vec<(f64, f64)>, step: f64) -> Result<Self> {
        if !(step > 0.0 && step.is_finite()) {
            return Err(ModelError::invalid("grid.step", format!("must be > 0, got {step}")));
        }
        if bounds.is_empty() {
            return Err(ModelError::invalid("grid.bounds", "at least one dimension required"));
        }
        if let Some((lo, hi)) = bounds
            .iter()
            .find(|(lo, hi)| !(lo.is_finite() && hi.is_finite() && lo <= hi))
        {
            return Err(ModelError::invalid(
                "grid.bounds",
                format!("bounds must be finite and ordered, got [{lo}, {hi}]"),
            ));
        }
        Ok(Self { bounds, step })
    }

    /// Grid over every period from 0 to an extraction level no optimal
    /// schedule can exceed under `strat`, for any technology in `model`.
    ///
    /// Marginal profit of `q_t` is at most
    /// `d_t (alpha_t - tau_t - beta_er - min slope - 2 (beta_t + alpha_er) q_t)`,
    /// so extraction beyond the root of that bound never pays.
    pub fn for_follower(strat: &LeaderStrategy, model: &ExtendedModel, step: f64) -> Result<Self> {
        strat.validate(model)?;
        let bounds = (0..model.periods())
            .map(|t| {
                let cap = model
                    .techs()
                    .iter()
                    .map(|tech| {
                        let head = model.alpha()[t] - strat.tau[t] - tech.beta_er - tech.min_slope();
                        (head / (2.0 * (model.beta()[t] + tech.alpha_er))).max(0.0)
                    })
                    .fold(0.0, f64::max);
                (0.0, cap.min(model.q_bounds()[t].1))
            })
            .collect();
        Self::new(bounds, step)
    }

    pub fn bounds(&self) -> &[(f64, f64)] {
        &self.bounds
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn dimension(&self) -> usize {
        self.bounds.len()
    }

    /// Grid coordinates along dimension `d`.
    pub fn axis(&self, d: usize) -> Vec<f64> {
        let (lo, hi) = self.bounds[d];
        let n = ((hi - lo) / self.step + 1e-9).floor() as usize;
        let mut pts: Vec<f64> = (0..=n).map(|i| lo + i as f64 * self.step).collect();
        if hi - pts[n] > 1e-12 * (1.0 + hi.abs()) {
            pts.push(hi);
        } else {
            pts[n] = hi;
        }
        pts
    }

    /// Number of grid points.
    pub fn size(&self) -> u128 {
        (0..self.dimension())
            .map(|d| self.axis(d).len() as u128)
            .fold(1u128, |acc, n| acc.saturating_mul(n))
    }
}

/// Purification cost `C(x)` summed stratum by stratum.
fn purification(x: f64, tech: &TechParams, model: &ExtendedModel) -> f64 {
    let amounts = model.strata().amounts();
    let last = amounts.len() - 1;
    let mut floor = 0.0;
    let mut cost = 0.0;
    for (m, &amount) in amounts.iter().enumerate() {
        let width = if m == last { f64::INFINITY } else { amount };
        let inside = (x - floor).clamp(0.0, width);
        cost += tech.slopes[m] * inside;
        floor += amount;
    }
    cost
}

fn profit(q: &[f64], tau: &[f64], tech: &TechParams, model: &ExtendedModel) -> f64 {
    let mut total = 0.0;
    let mut cum = 0.0;
    let mut cost_before = 0.0;
    for t in 0..q.len() {
        cum += q[t];
        let cost_after = purification(cum, tech, model);
        let rate = tech.alpha_er * q[t] * q[t] + tech.beta_er * q[t] + tech.gamma_er;
        let period = (model.alpha()[t] - model.beta()[t] * q[t]) * q[t]
            - rate
            - (cost_after - cost_before)
            - tau[t] * q[t];
        total += (1.0 + model.discount_rate()).powi(-(t as i32)) * period;
        cost_before = cost_after;
    }
    total
}

/// Exhaustive search of `grid` for one technology.
fn grid_search(
    tau: &[f64],
    tech: &TechParams,
    model: &ExtendedModel,
    axes: &[Vec<f64>],
) -> (Vec<f64>, f64) {
    let dims = axes.len();
    let tail: u128 = axes[1..].iter().map(|a| a.len() as u128).product();
    axes[0]
        .par_iter()
        .map(|&first| {
            let mut idx = vec![0usize; dims];
            let mut q: Vec<f64> = axes.iter().map(|a| a[0]).collect();
            q[0] = first;
            let mut best = (q.clone(), profit(&q, tau, tech, model));
            for _ in 1..tail {
                // Odometer increment over dimensions 1..dims.
                for d in (1..dims).rev() {
                    idx[d] += 1;
                    if idx[d] < axes[d].len() {
                        q[d] = axes[d][idx[d]];
                        break;
                    }
                    idx[d] = 0;
                    q[d] = axes[d][0];
                }
                let p = profit(&q, tau, tech, model);
                if p > best.1 {
                    best = (q.clone(), p);
                }
            }
            best
        })
        .reduce_with(|a, b| if b.1 > a.1 { b } else { a })
        .expect("grid has at least one point")
}

/// Compass search over unit moves and pairwise transfers, clamped to the
/// grid box. Returns the refined point, its profit, and whether the step
/// shrank to the floor.
fn pattern_search(
    mut q: Vec<f64>,
    tau: &[f64],
    tech: &TechParams,
    model: &ExtendedModel,
    bounds: &[(f64, f64)],
    mut step: f64,
) -> (Vec<f64>, f64, bool) {
    let n = q.len();
    let mut dirs: Vec<Vec<f64>> = Vec::new();
    for i in 0..n {
        for sign in [1.0, -1.0] {
            let mut d = vec![0.0; n];
            d[i] = sign;
            dirs.push(d);
        }
        for j in 0..n {
            if i != j {
                let mut d = vec![0.0; n];
                d[i] = 1.0;
                d[j] = -1.0;
                dirs.push(d);
            }
        }
    }
    let mut best = profit(&q, tau, tech, model);
    let mut polls = 0usize;
    while step > REFINE_FLOOR {
        polls += 1;
        if polls > 1_000_000 {
            return (q, best, false);
        }
        let mut improved = false;
        for d in &dirs {
            let trial: Vec<f64> = q
                .iter()
                .zip(d)
                .zip(bounds)
                .map(|((x, dx), (lo, hi))| (x + step * dx).clamp(*lo, *hi))
                .collect();
            let p = profit(&trial, tau, tech, model);
            if p > best {
                q = trial;
                best = p;
                improved = true;
                break;
            }
        }
        if !improved {
            step *= 0.5;
        }
    }
    (q, best, true)
}

/// Best follower response found by enumerating `grid` for every technology
/// in `model`, optionally polished by a pattern search started at each
/// technology's grid winner. Profit ties go to the higher revenue, then to
/// the lower technology id.
pub fn grid_best_response(
    strat: &LeaderStrategy,
    model: &ExtendedModel,
    grid: &GridSpec,
    refine: bool,
) -> Result<BestResponse> {
    strat.validate(model)?;
    if grid.dimension() != model.periods() {
        return Err(ModelError::LengthMismatch {
            what: "grid dimension",
            expected: model.periods(),
            got: grid.dimension(),
        });
    }
    if let Some((lo, _)) = grid.bounds().iter().find(|b| b.0 < 0.0) {
        return Err(ModelError::Domain(format!(
            "grid reaches negative extraction {lo}"
        )));
    }
    let evaluations = grid.size().saturating_mul(model.techs().len() as u128);
    if evaluations > EVALUATION_CAP {
        return Err(ModelError::GridTooLarge {
            evaluations,
            cap: EVALUATION_CAP,
        });
    }
    let axes: Vec<Vec<f64>> = (0..grid.dimension()).map(|d| grid.axis(d)).collect();

    let mut best: Option<(BestResponse, f64)> = None;
    for tech in model.techs() {
        let (mut q, mut p) = grid_search(&strat.tau, tech, model, &axes);
        let mut converged = true;
        if refine {
            (q, p, converged) =
                pattern_search(q, &strat.tau, tech, model, grid.bounds(), grid.step());
        }
        let revenue: f64 = q
            .iter()
            .zip(&strat.tau)
            .enumerate()
            .map(|(t, (q, tau))| (1.0 + model.discount_rate()).powi(-(t as i32)) * q * tau)
            .sum();
        let candidate = BestResponse {
            response: FollowerResponse { q, tech: tech.id },
            profit: p,
            optimality_tag: refine && converged,
        };
        let replace = match &best {
            None => true,
            Some((b, r)) => p > b.profit || (p == b.profit && revenue > *r),
        };
        if replace {
            best = Some((candidate, revenue));
        }
    }
    Ok(best.expect("model has at least one technology").0)
}

/// Grid maximizer of the weighted leader objective `w tau q - (1 - w) k q`
/// with the follower's response substituted. `grid` must be one-dimensional
/// and range over taxes. Returns `(tau, objective)`; ties keep the smaller
/// tax.
pub fn weighted_scalar_check(p: &AnalyticalParams, w: f64, grid: &GridSpec) -> Result<(f64, f64)> {
    if !(w > 0.0 && w <= 1.0) {
        return Err(ModelError::Domain(format!("weight must lie in (0, 1], got {w}")));
    }
    if grid.dimension() != 1 {
        return Err(ModelError::LengthMismatch {
            what: "grid dimension",
            expected: 1,
            got: grid.dimension(),
        });
    }
    if grid.size() > EVALUATION_CAP {
        return Err(ModelError::GridTooLarge {
            evaluations: grid.size(),
            cap: EVALUATION_CAP,
        });
    }
    let mut best = (f64::NAN, f64::NEG_INFINITY);
    for tau in grid.axis(0) {
        let q = follower_best_response(tau, p)?;
        let value = w * tau * q - (1.0 - w) * p.k * q;
        if value > best.1 {
            best = (tau, value);
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytical::{feasibility_threshold, optimal_extraction, optimal_tax};
    use crate::model::ModelConfig;

    fn simple() -> (AnalyticalParams, ExtendedModel) {
        let p = AnalyticalParams::default();
        (p, ExtendedModel::from_analytical(&p).unwrap())
    }

    #[test]
    fn axis_includes_both_bounds() {
        let g = GridSpec::new(vec![(0.0, 1.0), (2.0, 2.0), (0.0, 1.05)], 0.25).unwrap();
        assert_eq!(g.axis(0), vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        assert_eq!(g.axis(1), vec![2.0]);
        assert_eq!(g.axis(2), vec![0.0, 0.25, 0.5, 0.75, 1.0, 1.05]);
        assert_eq!(g.size(), 30);
    }

    #[test]
    fn malformed_grids_are_rejected() {
        assert!(GridSpec::new(vec![(0.0, 1.0)], 0.0).is_err());
        assert!(GridSpec::new(vec![(1.0, 0.0)], 0.1).is_err());
        assert!(GridSpec::new(vec![], 0.1).is_err());
    }

    #[test]
    fn oracle_profit_matches_model() {
        let model = ModelConfig::default().extended;
        let strat = LeaderStrategy::new(vec![10.0, 5.0, 20.0, 0.0, 30.0]);
        let q = vec![12.0, 9.5, 30.0, 0.0, 7.25];
        for tech in model.techs() {
            let resp = FollowerResponse {
                q: q.clone(),
                tech: tech.id,
            };
            let reference = model.follower_total_profit(&resp, &strat).unwrap();
            assert!((profit(&q, &strat.tau, tech, &model) - reference).abs() < 1e-9);
        }
    }

    #[test]
    fn simple_instance_matches_closed_form() {
        let (_, model) = simple();
        let strat = LeaderStrategy::new(vec![49.5]);
        let grid = GridSpec::for_follower(&strat, &model, 0.001).unwrap();
        let r = grid_best_response(&strat, &model, &grid, false).unwrap();
        assert!((r.response.q[0] - 12.375).abs() <= 0.001);
    }

    #[test]
    fn prohibitive_taxes_give_zero_extraction() {
        let model = ModelConfig::default().extended;
        let strat = LeaderStrategy::new(model.alpha().to_vec());
        let grid = GridSpec::new(vec![(0.0, 10.0); 5], 2.5).unwrap();
        let r = grid_best_response(&strat, &model, &grid, true).unwrap();
        assert!(r.response.q.iter().all(|&q| q == 0.0));
    }

    #[test]
    fn single_point_grid_returns_that_point() {
        let model = ModelConfig::default().extended.restricted_to(2).unwrap();
        let strat = LeaderStrategy::new(vec![10.0; 5]);
        let pt = vec![1.0, 2.0, 3.0, 4.0, 5.0];
        let grid = GridSpec::new(pt.iter().map(|&x| (x, x)).collect(), 1.0).unwrap();
        let r = grid_best_response(&strat, &model, &grid, false).unwrap();
        assert_eq!(r.response.q, pt);
        assert_eq!(r.response.tech, 2);
    }

    #[test]
    fn oversized_grids_are_refused() {
        let model = ModelConfig::default().extended;
        let strat = LeaderStrategy::new(vec![0.0; 5]);
        let grid = GridSpec::new(vec![(0.0, 100.0); 5], 1.0).unwrap();
        assert!(matches!(
            grid_best_response(&strat, &model, &grid, false),
            Err(ModelError::GridTooLarge { .. })
        ));
        let bad_dim = GridSpec::new(vec![(0.0, 1.0); 3], 0.5).unwrap();
        assert!(grid_best_response(&strat, &model, &bad_dim, false).is_err());
    }

    #[test]
    fn refinement_improves_on_coarse_grid() {
        let model = ModelConfig::default().extended;
        let strat = LeaderStrategy::new(vec![20.0, 22.0, 25.0, 27.0, 30.0]);
        let grid = GridSpec::for_follower(&strat, &model, 8.0).unwrap();
        let coarse = grid_best_response(&strat, &model, &grid, false).unwrap();
        let fine = grid_best_response(&strat, &model, &grid, true).unwrap();
        assert!(fine.profit >= coarse.profit);
        assert!(fine.optimality_tag && !coarse.optimality_tag);
    }

    #[test]
    fn weighted_check_examples() {
        let p = AnalyticalParams::default();
        let grid = GridSpec::new(vec![(0.0, p.alpha - p.gamma)], 0.001).unwrap();
        let (tau, _) = weighted_scalar_check(&p, 1.0, &grid).unwrap();
        assert!((tau - 49.5).abs() <= 0.001);

        let w_min = feasibility_threshold(&p).unwrap();
        let (tau, value) = weighted_scalar_check(&p, w_min, &grid).unwrap();
        assert!(value <= 1e-9);
        assert!(follower_best_response(tau, &p).unwrap() < 1e-3);

        let flat = AnalyticalParams { k: 0.0, ..p };
        for w in [0.1, 0.6] {
            let (tau, _) = weighted_scalar_check(&flat, w, &grid).unwrap();
            assert!((tau - 49.5).abs() <= 0.001);
        }
        assert!(weighted_scalar_check(&p, 0.0, &grid).is_err());
    }

    #[test]
    fn weighted_check_agrees_with_closed_form() {
        let p = AnalyticalParams::default();
        let step = 1e-3;
        let grid = GridSpec::new(vec![(0.0, p.alpha - p.gamma)], step).unwrap();
        for w in [0.02, 0.1, 0.25, 0.5, 0.75, 1.0] {
            let (tau, _) = weighted_scalar_check(&p, w, &grid).unwrap();
            assert!((tau - optimal_tax(w, &p).unwrap()).abs() <= step);
            let q = follower_best_response(tau, &p).unwrap();
            assert!((q - optimal_extraction(w, &p).unwrap()).abs() <= step);
        }
    }
}
