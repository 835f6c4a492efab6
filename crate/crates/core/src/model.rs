//! Domain types and pure evaluation functions for both game variants.
//!
//! Cumulative extraction/purification cost is a piecewise-linear function of
//! the total amount extracted so far. Within stratum `m` every unit costs
//! `slopes[m]`; past the last breakpoint the last slope continues, so the
//! function is defined for every non-negative extraction. A period pays the
//! increment of that function between the cumulative totals before and after
//! it, which makes the total purification cost path independent.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{ModelError, Result};

const DEFAULT_CONFIG: &str = include_str!("../data/default.json");

/// Constants of the single-period model.
///
/// Price is `alpha - beta q`, extraction cost `delta q^2 + gamma q + phi` and
/// damage `k q`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnalyticalParams {
    pub alpha: f64,
    pub beta: f64,
    pub delta: f64,
    pub gamma: f64,
    pub phi: f64,
    pub k: f64,
}

impl Default for AnalyticalParams {
    /// `alpha = 100, beta = delta = gamma = 1, phi = 0`, with `k = 1`, the
    /// only pollution coefficient for which extraction vanishes exactly at
    /// weight 0.01.
    fn default() -> Self {
        Self {
            alpha: 100.0,
            beta: 1.0,
            delta: 1.0,
            gamma: 1.0,
            phi: 0.0,
            k: 1.0,
        }
    }
}

impl AnalyticalParams {
    pub fn validate(&self) -> Result<()> {
        let finite = [
            ("alpha", self.alpha),
            ("beta", self.beta),
            ("delta", self.delta),
            ("gamma", self.gamma),
            ("phi", self.phi),
            ("k", self.k),
        ];
        for (name, v) in finite {
            if !v.is_finite() {
                return Err(ModelError::invalid(name, "must be finite"));
            }
        }
        if self.alpha <= 0.0 {
            return Err(ModelError::invalid("alpha", "must be > 0"));
        }
        if self.beta <= 0.0 {
            return Err(ModelError::invalid("beta", "must be > 0"));
        }
        if self.delta <= 0.0 {
            return Err(ModelError::invalid("delta", "must be > 0"));
        }
        if self.gamma < 0.0 {
            return Err(ModelError::invalid("gamma", "must be >= 0"));
        }
        if self.phi < 0.0 {
            return Err(ModelError::invalid("phi", "must be >= 0"));
        }
        if self.k < 0.0 {
            return Err(ModelError::invalid("k", "must be >= 0"));
        }
        if self.alpha <= self.gamma {
            return Err(ModelError::invalid(
                "alpha",
                format!(
                    "must exceed gamma ({} <= {}), otherwise no extraction is profitable",
                    self.alpha, self.gamma
                ),
            ));
        }
        Ok(())
    }
}

/// One technology alternative available to the mine.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TechParams {
    pub id: usize,
    /// Pollution per unit extracted.
    pub k: f64,
    /// Quadratic, linear and fixed coefficients of the per-period
    /// extraction-rate cost.
    pub alpha_er: f64,
    pub beta_er: f64,
    pub gamma_er: f64,
    /// Marginal extraction/purification cost in each stratum.
    pub slopes: Vec<f64>,
}

impl TechParams {
    pub fn validate(&self, strata_count: usize) -> Result<()> {
        let field = |name: &str| format!("technologies[{}].{name}", self.id);
        if !(self.k.is_finite() && self.k > 0.0) {
            return Err(ModelError::invalid(field("k"), "must be > 0"));
        }
        for (name, v) in [
            ("alpha_er", self.alpha_er),
            ("beta_er", self.beta_er),
            ("gamma_er", self.gamma_er),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(ModelError::invalid(field(name), "must be >= 0"));
            }
        }
        if self.slopes.len() != strata_count {
            return Err(ModelError::invalid(
                field("slopes"),
                format!(
                    "expected one slope per stratum ({strata_count}), got {}",
                    self.slopes.len()
                ),
            ));
        }
        if self.slopes.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
            return Err(ModelError::invalid(field("slopes"), "must be > 0"));
        }
        Ok(())
    }

    /// True when marginal cost never falls from one stratum to the next,
    /// i.e. the cumulative cost is convex.
    pub fn has_nondecreasing_slopes(&self) -> bool {
        self.slopes.windows(2).all(|w| w[0] <= w[1])
    }

    /// Quadratic extraction-rate cost for one period. The fixed part is paid
    /// even when nothing is extracted.
    pub fn extraction_rate_cost(&self, q: f64) -> Result<f64> {
        if !(q >= 0.0) {
            return Err(ModelError::Domain(format!(
                "extraction must be >= 0, got {q}"
            )));
        }
        Ok(self.rate_cost(q))
    }

    #[inline]
    pub(crate) fn rate_cost(&self, q: f64) -> f64 {
        self.alpha_er * q * q + self.beta_er * q + self.gamma_er
    }

    pub fn min_slope(&self) -> f64 {
        self.slopes.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// Gold content of each stratum, top to bottom.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct StrataTable {
    amounts: Vec<f64>,
    breakpoints: Vec<f64>,
}

impl StrataTable {
    pub fn new(amounts: Vec<f64>) -> Result<Self> {
        if amounts.is_empty() {
            return Err(ModelError::invalid("strata", "at least one stratum required"));
        }
        if amounts.iter().any(|a| !(a.is_finite() && *a > 0.0)) {
            return Err(ModelError::invalid("strata", "amounts must be > 0"));
        }
        let breakpoints = amounts
            .iter()
            .scan(0.0, |acc, a| {
                *acc += a;
                Some(*acc)
            })
            .collect();
        Ok(Self {
            amounts,
            breakpoints,
        })
    }

    pub fn amounts(&self) -> &[f64] {
        &self.amounts
    }

    /// Cumulative extraction at the bottom of each stratum.
    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn len(&self) -> usize {
        self.amounts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.amounts.is_empty()
    }

    /// Total stock. Carried for reporting only; extraction past it is priced
    /// at the last stratum's slope.
    pub fn stock(&self) -> f64 {
        *self.breakpoints.last().unwrap_or(&0.0)
    }

    /// 1-based stratum holding the unit at cumulative extraction `x`: the
    /// smallest `m` with `x <= breakpoint[m]`, or the last stratum beyond
    /// the stock.
    pub fn stratum_of(&self, x: f64) -> usize {
        self.breakpoints
            .iter()
            .position(|&b| x <= b)
            .unwrap_or(self.breakpoints.len() - 1)
            + 1
    }

    /// Cost of extracting the cumulative interval `[from, to]` with the given
    /// per-stratum slopes. Negative when `to < from`.
    pub(crate) fn cost_between(&self, slopes: &[f64], from: f64, to: f64) -> f64 {
        self.cost_of_step(slopes, from, to - from)
    }

    /// Cost of moving cumulative extraction from `from` by `step`. The step
    /// is consumed segment by segment, so a step that stays inside one
    /// stratum costs exactly `slope * step` whatever the magnitude of `from`.
    pub(crate) fn cost_of_step(&self, slopes: &[f64], from: f64, step: f64) -> f64 {
        if step < 0.0 {
            return -self.cost_of_step(slopes, from + step, -step);
        }
        let last = self.breakpoints.len() - 1;
        let mut m = self
            .breakpoints
            .iter()
            .position(|&b| from < b)
            .unwrap_or(last);
        let mut pos = from;
        let mut remaining = step;
        let mut total = 0.0;
        while remaining > 0.0 {
            let room = if m == last {
                f64::INFINITY
            } else {
                self.breakpoints[m] - pos
            };
            let take = remaining.min(room);
            total += slopes[m] * take;
            remaining -= take;
            pos = self.breakpoints[m];
            m += 1;
        }
        total
    }
}

impl TryFrom<Vec<f64>> for StrataTable {
    type Error = ModelError;

    fn try_from(amounts: Vec<f64>) -> Result<Self> {
        Self::new(amounts)
    }
}

impl From<StrataTable> for Vec<f64> {
    fn from(table: StrataTable) -> Self {
        table.amounts
    }
}

/// Piecewise-linear cumulative cost `C(x)` of extracting `x` units in total.
pub fn cumulative_cost(x: f64, tech: &TechParams, strata: &StrataTable) -> Result<f64> {
    if !(x >= 0.0) {
        return Err(ModelError::Domain(format!(
            "cumulative extraction must be >= 0, got {x}"
        )));
    }
    Ok(strata.cost_between(&tech.slopes, 0.0, x))
}

/// Raw model description as found in configuration files. Bounds default to
/// `tau_t in [0, alpha_t]` and `q_t in [0, alpha_t / (2 beta_t)]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ExtendedModelRaw {
    alpha: Vec<f64>,
    beta: Vec<f64>,
    #[serde(default)]
    discount_rate: f64,
    strata: StrataTable,
    technologies: Vec<TechParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    tau_bounds: Option<Vec<(f64, f64)>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    q_bounds: Option<Vec<(f64, f64)>>,
}

/// Multi-period model with technology alternatives.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ExtendedModelRaw", into = "ExtendedModelRaw")]
pub struct ExtendedModel {
    alpha: Vec<f64>,
    beta: Vec<f64>,
    discount_rate: f64,
    strata: StrataTable,
    techs: Vec<TechParams>,
    tau_bounds: Vec<(f64, f64)>,
    q_bounds: Vec<(f64, f64)>,
}

impl TryFrom<ExtendedModelRaw> for ExtendedModel {
    type Error = ModelError;

    fn try_from(raw: ExtendedModelRaw) -> Result<Self> {
        let mut model = ExtendedModel::new(
            raw.alpha,
            raw.beta,
            raw.technologies,
            raw.strata,
            raw.discount_rate,
        )?;
        if let Some(b) = raw.tau_bounds {
            model = model.with_tau_bounds(b)?;
        }
        if let Some(b) = raw.q_bounds {
            model = model.with_q_bounds(b)?;
        }
        Ok(model)
    }
}

impl From<ExtendedModel> for ExtendedModelRaw {
    fn from(m: ExtendedModel) -> Self {
        ExtendedModelRaw {
            alpha: m.alpha,
            beta: m.beta,
            discount_rate: m.discount_rate,
            strata: m.strata,
            technologies: m.techs,
            tau_bounds: Some(m.tau_bounds),
            q_bounds: Some(m.q_bounds),
        }
    }
}

fn check_bounds(field: &str, bounds: &[(f64, f64)], periods: usize) -> Result<()> {
    if bounds.len() != periods {
        return Err(ModelError::invalid(
            field,
            format!("expected {periods} entries, got {}", bounds.len()),
        ));
    }
    for (t, &(lo, hi)) in bounds.iter().enumerate() {
        if !(lo.is_finite() && hi.is_finite() && 0.0 <= lo && lo <= hi) {
            return Err(ModelError::invalid(
                format!("{field}[{t}]"),
                format!("need 0 <= lo <= hi, got ({lo}, {hi})"),
            ));
        }
    }
    Ok(())
}

impl ExtendedModel {
    pub fn new(
        alpha: Vec<f64>,
        beta: Vec<f64>,
        techs: Vec<TechParams>,
        strata: StrataTable,
        discount_rate: f64,
    ) -> Result<Self> {
        let periods = alpha.len();
        if periods == 0 {
            return Err(ModelError::invalid("alpha", "at least one period required"));
        }
        if beta.len() != periods {
            return Err(ModelError::invalid(
                "beta",
                format!("expected {periods} entries, got {}", beta.len()),
            ));
        }
        if alpha.iter().any(|a| !(a.is_finite() && *a > 0.0)) {
            return Err(ModelError::invalid("alpha", "must be > 0"));
        }
        if beta.iter().any(|b| !(b.is_finite() && *b > 0.0)) {
            return Err(ModelError::invalid("beta", "must be > 0"));
        }
        if !(discount_rate.is_finite() && discount_rate >= 0.0) {
            return Err(ModelError::invalid("discount_rate", "must be >= 0"));
        }
        if techs.is_empty() {
            return Err(ModelError::invalid(
                "technologies",
                "at least one technology required",
            ));
        }
        for (i, tech) in techs.iter().enumerate() {
            tech.validate(strata.len())?;
            if techs[..i].iter().any(|other| other.id == tech.id) {
                return Err(ModelError::invalid(
                    "technologies",
                    format!("duplicate id {}", tech.id),
                ));
            }
        }
        let tau_bounds = alpha.iter().map(|&a| (0.0, a)).collect();
        let q_bounds = alpha
            .iter()
            .zip(&beta)
            .map(|(&a, &b)| (0.0, a / (2.0 * b)))
            .collect();
        Ok(Self {
            alpha,
            beta,
            discount_rate,
            strata,
            techs,
            tau_bounds,
            q_bounds,
        })
    }

    pub fn with_tau_bounds(mut self, bounds: Vec<(f64, f64)>) -> Result<Self> {
        check_bounds("tau_bounds", &bounds, self.periods())?;
        self.tau_bounds = bounds;
        Ok(self)
    }

    pub fn with_q_bounds(mut self, bounds: Vec<(f64, f64)>) -> Result<Self> {
        check_bounds("q_bounds", &bounds, self.periods())?;
        self.q_bounds = bounds;
        Ok(self)
    }

    /// Single-period instance whose follower profit coincides with the
    /// closed-form model: the quadratic cost maps onto the extraction-rate
    /// cost and the linear cost onto one stratum priced at `gamma`.
    pub fn from_analytical(p: &AnalyticalParams) -> Result<Self> {
        p.validate()?;
        if p.k <= 0.0 {
            return Err(ModelError::invalid("k", "embedding requires k > 0"));
        }
        if p.gamma <= 0.0 {
            return Err(ModelError::invalid(
                "gamma",
                "embedding prices the linear cost as a stratum slope, which must be > 0",
            ));
        }
        let q_cap = p.alpha / (2.0 * p.beta);
        let tech = TechParams {
            id: 1,
            k: p.k,
            alpha_er: p.delta,
            beta_er: 0.0,
            gamma_er: p.phi,
            slopes: vec![p.gamma],
        };
        let strata = StrataTable::new(vec![10.0 * q_cap])?;
        Self::new(vec![p.alpha], vec![p.beta], vec![tech], strata, 0.0)
    }

    pub fn periods(&self) -> usize {
        self.alpha.len()
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    pub fn beta(&self) -> &[f64] {
        &self.beta
    }

    pub fn discount_rate(&self) -> f64 {
        self.discount_rate
    }

    pub fn strata(&self) -> &StrataTable {
        &self.strata
    }

    pub fn techs(&self) -> &[TechParams] {
        &self.techs
    }

    pub fn tau_bounds(&self) -> &[(f64, f64)] {
        &self.tau_bounds
    }

    pub fn q_bounds(&self) -> &[(f64, f64)] {
        &self.q_bounds
    }

    pub fn tech(&self, id: usize) -> Result<&TechParams> {
        self.techs
            .iter()
            .find(|t| t.id == id)
            .ok_or(ModelError::UnknownTechnology(id))
    }

    /// Same model restricted to a single technology.
    pub fn restricted_to(&self, id: usize) -> Result<Self> {
        let tech = self.tech(id)?.clone();
        Ok(Self {
            techs: vec![tech],
            ..self.clone()
        })
    }

    /// Discount factor `(1 + r)^-(t-1)` for the 1-based period `t`.
    pub fn discount(&self, t: usize) -> f64 {
        (1.0 + self.discount_rate).powi(-(t as i32 - 1))
    }

    pub fn cumulative_cost(&self, x: f64, tech: &TechParams) -> Result<f64> {
        cumulative_cost(x, tech, &self.strata)
    }

    /// Undiscounted profit of period `t` (1-based) given the extraction
    /// history `q_prefix = (q_1, ..., q_t)`.
    pub fn period_profit(
        &self,
        t: usize,
        q_prefix: &[f64],
        tau_t: f64,
        tech: &TechParams,
    ) -> Result<f64> {
        if t == 0 || t > self.periods() {
            return Err(ModelError::Domain(format!(
                "period {t} outside 1..={}",
                self.periods()
            )));
        }
        if q_prefix.len() != t {
            return Err(ModelError::LengthMismatch {
                what: "extraction prefix",
                expected: t,
                got: q_prefix.len(),
            });
        }
        if let Some(q) = q_prefix.iter().find(|q| !(**q >= 0.0)) {
            return Err(ModelError::Domain(format!(
                "extraction must be >= 0, got {q}"
            )));
        }
        let q_t = q_prefix[t - 1];
        let before: f64 = q_prefix[..t - 1].iter().sum();
        Ok(self.period_profit_unchecked(t - 1, q_t, before, tau_t, tech))
    }

    #[inline]
    pub(crate) fn period_profit_unchecked(
        &self,
        idx: usize,
        q_t: f64,
        cum_before: f64,
        tau_t: f64,
        tech: &TechParams,
    ) -> f64 {
        let purification =
            self.strata
                .cost_between(&tech.slopes, cum_before, cum_before + q_t);
        (self.alpha[idx] - self.beta[idx] * q_t) * q_t
            - tech.rate_cost(q_t)
            - purification
            - tau_t * q_t
    }

    /// Discounted total profit without argument validation.
    pub(crate) fn total_profit_unchecked(&self, q: &[f64], tau: &[f64], tech: &TechParams) -> f64 {
        let mut cum = 0.0;
        let mut total = 0.0;
        for (idx, (&q_t, &tau_t)) in q.iter().zip(tau).enumerate() {
            let pi = self.period_profit_unchecked(idx, q_t, cum, tau_t, tech);
            total += self.discount(idx + 1) * pi;
            cum += q_t;
        }
        total
    }

    fn check_pair(&self, resp: &FollowerResponse, strat: &LeaderStrategy) -> Result<&TechParams> {
        let periods = self.periods();
        if strat.tau.len() != periods {
            return Err(ModelError::LengthMismatch {
                what: "tax vector",
                expected: periods,
                got: strat.tau.len(),
            });
        }
        if resp.q.len() != periods {
            return Err(ModelError::LengthMismatch {
                what: "extraction vector",
                expected: periods,
                got: resp.q.len(),
            });
        }
        if let Some(q) = resp.q.iter().find(|q| !(**q >= 0.0)) {
            return Err(ModelError::Domain(format!(
                "extraction must be >= 0, got {q}"
            )));
        }
        self.tech(resp.tech)
    }

    /// Discounted sum of period profits.
    pub fn follower_total_profit(
        &self,
        resp: &FollowerResponse,
        strat: &LeaderStrategy,
    ) -> Result<f64> {
        let tech = self.check_pair(resp, strat)?;
        Ok(self.total_profit_unchecked(&resp.q, &strat.tau, tech))
    }

    /// Leader objectives plus follower profit. Revenue is discounted, damage
    /// is not.
    pub fn leader_objectives(
        &self,
        resp: &FollowerResponse,
        strat: &LeaderStrategy,
    ) -> Result<ObjectivePoint> {
        let tech = self.check_pair(resp, strat)?;
        Ok(self.objectives_unchecked(&resp.q, &strat.tau, tech))
    }

    pub(crate) fn objectives_unchecked(
        &self,
        q: &[f64],
        tau: &[f64],
        tech: &TechParams,
    ) -> ObjectivePoint {
        let revenue = q
            .iter()
            .zip(tau)
            .enumerate()
            .map(|(idx, (q, tau))| self.discount(idx + 1) * tau * q)
            .sum();
        let damage = tech.k * q.iter().sum::<f64>();
        ObjectivePoint {
            revenue,
            damage,
            profit: self.total_profit_unchecked(q, tau, tech),
        }
    }

    /// Largest damage any admissible schedule can cause.
    pub fn damage_ceiling(&self) -> f64 {
        let k_max = self.techs.iter().map(|t| t.k).fold(0.0, f64::max);
        k_max * self.q_bounds.iter().map(|b| b.1).sum::<f64>()
    }

    /// Largest revenue any admissible pair can raise.
    pub fn revenue_ceiling(&self) -> f64 {
        self.tau_bounds
            .iter()
            .zip(&self.q_bounds)
            .enumerate()
            .map(|(idx, (t, q))| self.discount(idx + 1) * t.1 * q.1)
            .sum()
    }
}

/// Taxes per unit for each period.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeaderStrategy {
    pub tau: Vec<f64>,
}

impl LeaderStrategy {
    pub fn new(tau: Vec<f64>) -> Self {
        Self { tau }
    }

    pub fn validate(&self, model: &ExtendedModel) -> Result<()> {
        if self.tau.len() != model.periods() {
            return Err(ModelError::LengthMismatch {
                what: "tax vector",
                expected: model.periods(),
                got: self.tau.len(),
            });
        }
        for (t, (&tau, &(lo, hi))) in self.tau.iter().zip(model.tau_bounds()).enumerate() {
            if !(tau >= 0.0 && tau >= lo && tau <= hi) {
                return Err(ModelError::Domain(format!(
                    "tau[{t}] = {tau} outside [{lo}, {hi}]"
                )));
            }
        }
        Ok(())
    }
}

/// Extraction schedule plus chosen technology.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FollowerResponse {
    pub q: Vec<f64>,
    pub tech: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectivePoint {
    pub revenue: f64,
    pub damage: f64,
    pub profit: f64,
}

impl ObjectivePoint {
    /// Higher revenue and lower damage, at least one strictly.
    pub fn dominates(&self, other: &ObjectivePoint) -> bool {
        self.revenue >= other.revenue
            && self.damage <= other.damage
            && (self.revenue > other.revenue || self.damage < other.damage)
    }

    pub fn same_objectives(&self, other: &ObjectivePoint) -> bool {
        self.revenue == other.revenue && self.damage == other.damage
    }
}

/// Top-level configuration file: `{"analytical": {...}, "extended": {...}}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub analytical: AnalyticalParams,
    pub extended: ExtendedModel,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self::from_json(DEFAULT_CONFIG).expect("bundled default config is valid")
    }
}

impl ModelConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ModelConfig = serde_json::from_str(text)?;
        cfg.analytical.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| {
            ModelError::Config(format!("cannot read {}: {e}", path.display()))
        })?;
        Self::from_json(&text)
    }

    pub fn default_json() -> &'static str {
        DEFAULT_CONFIG
    }
}
