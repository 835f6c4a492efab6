//! Closed-form solution of the single-period game.
//!
//! The mine maximizes `(alpha - beta q) q - (delta q^2 + gamma q + phi) - tau q`,
//! so its best response is linear in the tax. Substituting it into the
//! weighted leader objective `w tau q - (1 - w) k q` gives the optimal tax
//! `tau*(w)` and the induced extraction `q*(w)`; sweeping `w` over
//! `[w_min, 1]` traces the exact leader frontier.

use serde::{Deserialize, Serialize};

use crate::error::{ModelError, Result};
use crate::model::AnalyticalParams;

fn check_weight(w: f64) -> Result<()> {
    if !(w > 0.0 && w <= 1.0) {
        return Err(ModelError::Domain(format!("weight must lie in (0, 1], got {w}")));
    }
    Ok(())
}

/// Extraction that maximizes the mine's profit under tax `tau`, clamped at 0.
pub fn follower_best_response(tau: f64, p: &AnalyticalParams) -> Result<f64> {
    if !(tau >= 0.0) {
        return Err(ModelError::Domain(format!("tax must be >= 0, got {tau}")));
    }
    Ok(best_response_unclamped(tau, p).max(0.0))
}

pub(crate) fn best_response_unclamped(tau: f64, p: &AnalyticalParams) -> f64 {
    (p.alpha - p.gamma - tau) / (2.0 * (p.beta + p.delta))
}

/// Mine profit `(alpha - beta q) q - (delta q^2 + gamma q + phi) - tau q`.
pub fn follower_profit(q: f64, tau: f64, p: &AnalyticalParams) -> f64 {
    (p.alpha - p.beta * q) * q - (p.delta * q * q + p.gamma * q + p.phi) - tau * q
}

/// Weighted leader objective `w tau q(tau) - (1 - w) k q(tau)` with the
/// follower's best response substituted.
pub fn scalarized_objective(tau: f64, w: f64, p: &AnalyticalParams) -> Result<f64> {
    let q = follower_best_response(tau, p)?;
    Ok(w * tau * q - (1.0 - w) * p.k * q)
}

/// `tau*(w) = (alpha - gamma - k) / 2 + k / (2 w)`.
pub fn optimal_tax(w: f64, p: &AnalyticalParams) -> Result<f64> {
    check_weight(w)?;
    Ok((p.alpha - p.gamma - p.k) / 2.0 + p.k / (2.0 * w))
}

/// `q*(w) = [w (alpha - gamma) - (1 - w) k] / (4 w (beta + delta))`, clamped
/// at 0.
///
/// Evaluated as `(alpha - gamma + k)(w - w_min) / (4 w (beta + delta))`, which
/// is algebraically identical and vanishes exactly at the threshold weight.
pub fn optimal_extraction(w: f64, p: &AnalyticalParams) -> Result<f64> {
    check_weight(w)?;
    let span = p.alpha - p.gamma + p.k;
    let w_min = p.k / span;
    Ok((span * (w - w_min) / (4.0 * w * (p.beta + p.delta))).max(0.0))
}

/// Smallest weight with non-negative optimal extraction, `k / (alpha - gamma + k)`.
pub fn feasibility_threshold(p: &AnalyticalParams) -> Result<f64> {
    if !(p.alpha > p.gamma) {
        return Err(ModelError::Domain(format!(
            "threshold requires alpha > gamma, got alpha = {}, gamma = {}",
            p.alpha, p.gamma
        )));
    }
    Ok(p.k / (p.alpha - p.gamma + p.k))
}

/// Leader optimum for one preference weight.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightedSolution {
    pub w: f64,
    pub tau_star: f64,
    pub q_star: f64,
    pub revenue: f64,
    pub damage: f64,
    pub profit: f64,
}

impl WeightedSolution {
    pub fn at(w: f64, p: &AnalyticalParams) -> Result<Self> {
        let tau_star = optimal_tax(w, p)?;
        let q_star = optimal_extraction(w, p)?;
        Ok(Self {
            w,
            tau_star,
            q_star,
            revenue: tau_star * q_star,
            damage: p.k * q_star,
            profit: follower_profit(q_star, tau_star, p),
        })
    }
}

/// Exact frontier sampled at `n_points` weights spaced uniformly over
/// `[w_min, 1]`, ordered by damage.
pub fn pareto_sweep(p: &AnalyticalParams, n_points: usize) -> Result<Vec<WeightedSolution>> {
    p.validate()?;
    if n_points < 2 {
        return Err(ModelError::Domain(format!(
            "sweep needs at least 2 points, got {n_points}"
        )));
    }
    // With k = 0 the threshold is 0, which is outside the weight domain; the
    // solution is the same for every weight so any positive start will do.
    let w_lo = feasibility_threshold(p)?.max(f64::MIN_POSITIVE);
    let last = n_points - 1;
    let mut points = (0..n_points)
        .map(|i| {
            let w = if i == last {
                1.0
            } else {
                w_lo + (1.0 - w_lo) * i as f64 / last as f64
            };
            WeightedSolution::at(w, p)
        })
        .collect::<Result<Vec<_>>>()?;
    points.sort_by(|a, b| a.damage.total_cmp(&b.damage));
    Ok(points)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn p() -> AnalyticalParams {
        AnalyticalParams::default()
    }

    /// Central difference; both objectives are quadratic where it is used.
    fn derivative(f: impl Fn(f64) -> f64, x: f64) -> f64 {
        let h = 1e-4;
        (f(x + h) - f(x - h)) / (2.0 * h)
    }

    #[test]
    fn best_response_examples() {
        assert_eq!(follower_best_response(99.0, &p()).unwrap(), 0.0);
        assert_eq!(follower_best_response(49.5, &p()).unwrap(), 12.375);
        assert_eq!(follower_best_response(150.0, &p()).unwrap(), 0.0);
        assert!(follower_best_response(-1.0, &p()).is_err());
    }

    #[test]
    fn optimal_tax_examples() {
        assert_eq!(optimal_tax(1.0, &p()).unwrap(), 49.5);
        assert_eq!(optimal_tax(0.5, &p()).unwrap(), 50.0);
        let no_damage = AnalyticalParams { k: 0.0, ..p() };
        for w in [0.05, 0.3, 1.0] {
            assert_eq!(optimal_tax(w, &no_damage).unwrap(), 49.5);
        }
        assert!(optimal_tax(0.0, &p()).is_err());
        assert!(optimal_tax(1.5, &p()).is_err());
    }

    #[test]
    fn optimal_extraction_examples() {
        assert_eq!(optimal_extraction(1.0, &p()).unwrap(), 12.375);
        assert_eq!(optimal_extraction(0.01, &p()).unwrap(), 0.0);
        assert_eq!(optimal_extraction(0.005, &p()).unwrap(), 0.0);
        assert!(optimal_extraction(-0.2, &p()).is_err());
    }

    #[test]
    fn threshold_examples() {
        assert_eq!(feasibility_threshold(&p()).unwrap(), 0.01);
        assert_eq!(
            feasibility_threshold(&AnalyticalParams { k: 0.0, ..p() }).unwrap(),
            0.0
        );
        let nine = feasibility_threshold(&AnalyticalParams { k: 9.0, ..p() }).unwrap();
        assert!((nine - 9.0 / 108.0).abs() < 1e-15);
        let bad = AnalyticalParams { gamma: 100.0, ..p() };
        assert!(feasibility_threshold(&bad).is_err());
    }

    #[test]
    fn sweep_endpoints() {
        let sweep = pareto_sweep(&p(), 100).unwrap();
        assert_eq!(sweep.len(), 100);
        let first = sweep.first().unwrap();
        assert_eq!(first.w, 0.01);
        assert_eq!((first.revenue, first.damage), (0.0, 0.0));
        let last = sweep.last().unwrap();
        assert_eq!(last.w, 1.0);
        assert_eq!(last.revenue, 612.5625);
        assert_eq!(last.damage, 12.375);
        assert!(pareto_sweep(&p(), 1).is_err());
    }

    #[test]
    fn sweep_points_are_mutually_nondominated() {
        let sweep = pareto_sweep(&p(), 60).unwrap();
        for a in &sweep {
            for b in &sweep {
                let dominates = a.revenue >= b.revenue
                    && a.damage <= b.damage
                    && (a.revenue > b.revenue || a.damage < b.damage);
                assert!(!dominates, "{a:?} dominates {b:?}");
            }
        }
    }

    #[test]
    fn sweep_is_monotone_in_weight() {
        let sweep = pareto_sweep(&p(), 200).unwrap();
        for pair in sweep.windows(2) {
            assert!(pair[1].w > pair[0].w);
            assert!(pair[1].revenue >= pair[0].revenue);
            assert!(pair[1].damage >= pair[0].damage);
        }
    }

    #[test]
    fn sweep_with_zero_damage_coefficient_is_flat() {
        let flat = AnalyticalParams { k: 0.0, ..p() };
        let sweep = pareto_sweep(&flat, 5).unwrap();
        for s in sweep {
            assert_eq!(s.tau_star, 49.5);
            assert_eq!(s.damage, 0.0);
        }
    }

    proptest! {
        #[test]
        fn follower_first_order_condition(tau in 0.0f64..98.9) {
            let params = p();
            let q = follower_best_response(tau, &params).unwrap();
            let d = derivative(|x| follower_profit(x, tau, &params), q);
            prop_assert!(d.abs() <= 1e-6, "d = {d}");
        }

        #[test]
        fn leader_first_order_condition(w in 0.011f64..=1.0) {
            let params = p();
            let tau = optimal_tax(w, &params).unwrap();
            let d = derivative(|t| scalarized_objective(t, w, &params).unwrap(), tau);
            prop_assert!(d.abs() <= 1e-6, "d = {d}");
        }

        #[test]
        fn best_response_to_optimal_tax_is_optimal_extraction(w in 0.01f64..=1.0) {
            let params = p();
            let q = follower_best_response(optimal_tax(w, &params).unwrap(), &params).unwrap();
            let q_star = optimal_extraction(w, &params).unwrap();
            prop_assert!((q - q_star).abs() <= 1e-9);
        }

        #[test]
        fn profit_is_nonnegative_without_fixed_cost(w in 0.01f64..=1.0) {
            let s = WeightedSolution::at(w, &p()).unwrap();
            prop_assert!(s.profit >= 0.0);
            // Recomputing from (tau*, q*) reproduces the stored objectives.
            prop_assert_eq!(s.revenue, s.tau_star * s.q_star);
            prop_assert_eq!(s.damage, s.q_star);
        }
    }
}
