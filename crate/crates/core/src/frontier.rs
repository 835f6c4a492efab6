//! Comparisons between frontiers in (revenue, damage) space.

use serde::{Deserialize, Serialize};

use crate::model::ObjectivePoint;

/// Extent of a point set along each objective, used to normalize distances.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveRanges {
    pub revenue: f64,
    pub damage: f64,
}

impl ObjectiveRanges {
    /// Ranges spanned by the union of `sets`. A degenerate axis gets range 1
    /// so that normalized gaps along it stay absolute.
    pub fn of(sets: &[&[ObjectivePoint]]) -> Self {
        let mut rev = (f64::INFINITY, f64::NEG_INFINITY);
        let mut dmg = (f64::INFINITY, f64::NEG_INFINITY);
        for p in sets.iter().flat_map(|s| s.iter()) {
            rev = (rev.0.min(p.revenue), rev.1.max(p.revenue));
            dmg = (dmg.0.min(p.damage), dmg.1.max(p.damage));
        }
        let span = |(lo, hi): (f64, f64)| if hi > lo { hi - lo } else { 1.0 };
        Self {
            revenue: span(rev),
            damage: span(dmg),
        }
    }
}

/// Mutually nondominated points of all `sets` combined, sorted by damage.
/// Exact duplicates are kept once.
pub fn nondominated_union(sets: &[&[ObjectivePoint]]) -> Vec<ObjectivePoint> {
    let all: Vec<ObjectivePoint> = sets.iter().flat_map(|s| s.iter().copied()).collect();
    let mut out: Vec<ObjectivePoint> = Vec::new();
    for (i, p) in all.iter().enumerate() {
        let beaten = all.iter().any(|q| q.dominates(p));
        let repeated = all[..i].iter().any(|q| q.same_objectives(p));
        if !beaten && !repeated {
            out.push(*p);
        }
    }
    out.sort_by(|a, b| a.damage.total_cmp(&b.damage).then(a.revenue.total_cmp(&b.revenue)));
    out
}

/// Additive epsilon indicator: the smallest normalized shift by which `a`
/// must be improved so that every point of `b` is weakly dominated by some
/// point of `a`. Zero when `a` already covers `b`; infinite when `a` is
/// empty and `b` is not.
pub fn epsilon_indicator(a: &[ObjectivePoint], b: &[ObjectivePoint], ranges: ObjectiveRanges) -> f64 {
    b.iter()
        .map(|target| {
            a.iter()
                .map(|p| {
                    let short = (target.revenue - p.revenue) / ranges.revenue;
                    let over = (p.damage - target.damage) / ranges.damage;
                    short.max(over).max(0.0)
                })
                .fold(f64::INFINITY, f64::min)
        })
        .fold(0.0, f64::max)
}

/// Two-sided comparison of frontiers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrontierMatch {
    /// How far `a` falls short of covering `b`.
    pub a_covers_b: f64,
    /// How far `b` falls short of covering `a`.
    pub b_covers_a: f64,
    pub ranges: ObjectiveRanges,
}

impl FrontierMatch {
    pub fn worst(&self) -> f64 {
        self.a_covers_b.max(self.b_covers_a)
    }

    pub fn within(&self, tol: f64) -> bool {
        self.worst() <= tol
    }
}

/// Epsilon indicators in both directions, normalized by the ranges of the
/// two sets combined.
pub fn compare_frontiers(a: &[ObjectivePoint], b: &[ObjectivePoint]) -> FrontierMatch {
    let ranges = ObjectiveRanges::of(&[a, b]);
    FrontierMatch {
        a_covers_b: epsilon_indicator(a, b, ranges),
        b_covers_a: epsilon_indicator(b, a, ranges),
        ranges,
    }
}

/// Euclidean distance from each point to the nearest point of `curve`, in
/// coordinates divided by `ranges`. `curve` should be sampled densely
/// enough that its own spacing is negligible.
pub fn distances_to_curve(
    points: &[ObjectivePoint],
    curve: &[ObjectivePoint],
    ranges: ObjectiveRanges,
) -> Vec<f64> {
    points
        .iter()
        .map(|p| {
            curve
                .iter()
                .map(|c| {
                    let dr = (p.revenue - c.revenue) / ranges.revenue;
                    let dd = (p.damage - c.damage) / ranges.damage;
                    dr.hypot(dd)
                })
                .fold(f64::INFINITY, f64::min)
        })
        .collect()
}

/// Fraction of `range` covered by the damage values of `points`.
pub fn damage_coverage(points: &[ObjectivePoint], range: f64) -> f64 {
    if points.is_empty() || !(range > 0.0) {
        return 0.0;
    }
    let lo = points.iter().map(|p| p.damage).fold(f64::INFINITY, f64::min);
    let hi = points.iter().map(|p| p.damage).fold(f64::NEG_INFINITY, f64::max);
    (hi - lo) / range
}

/// Settings of the slope-break test around stratum boundaries.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KinkSettings {
    /// Extraction distance over which the secant on each side is taken.
    pub window: f64,
    /// A break is reported when the right secant is below `ratio` times the
    /// left one.
    pub ratio: f64,
    /// Slack when deciding which side of a boundary a point lies on.
    pub tolerance: f64,
}

impl Default for KinkSettings {
    fn default() -> Self {
        Self {
            window: 4.0,
            ratio: 0.9,
            tolerance: 1e-6,
        }
    }
}

/// Slope break of a single-technology frontier at a stratum boundary.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Kink {
    pub boundary: f64,
    /// Cumulative extraction of the last frontier point at or below the
    /// boundary and of the first one above it.
    pub below: f64,
    pub above: f64,
    /// Revenue gained per unit of damage just below and just above.
    pub left_slope: f64,
    pub right_slope: f64,
}

impl Kink {
    pub fn detected(&self, ratio: f64) -> bool {
        self.right_slope < ratio * self.left_slope
    }
}

/// Examines every boundary crossed by a single-technology frontier with
/// damage coefficient `k`. Total extraction of a frontier point is
/// `damage / k`. Each boundary with a point at or below it and a point above
/// it yields a [`Kink`] record; boundaries without enough points on either
/// side are skipped.
pub fn boundary_slopes(
    frontier: &[ObjectivePoint],
    k: f64,
    boundaries: &[f64],
    settings: &KinkSettings,
) -> Vec<Kink> {
    let mut pts: Vec<(f64, f64, f64)> = frontier
        .iter()
        .map(|p| (p.damage / k, p.damage, p.revenue))
        .collect();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    let secant = |a: (f64, f64, f64), b: (f64, f64, f64)| (b.2 - a.2) / (b.1 - a.1);
    let mut out = Vec::new();
    for &b in boundaries {
        let Some(anchor) = pts.iter().rposition(|p| p.0 <= b + settings.tolerance) else {
            continue;
        };
        if anchor == 0 || anchor + 1 == pts.len() {
            continue;
        }
        let closest = |range: std::ops::Range<usize>, target: f64| {
            range
                .min_by(|&i, &j| (pts[i].0 - target).abs().total_cmp(&(pts[j].0 - target).abs()))
                .expect("range is nonempty")
        };
        let x = pts[anchor].0;
        let left = closest(0..anchor, x - settings.window);
        let right = closest(anchor + 1..pts.len(), x + settings.window);
        out.push(Kink {
            boundary: b,
            below: x,
            above: pts[anchor + 1].0,
            left_slope: secant(pts[left], pts[anchor]),
            right_slope: secant(pts[anchor], pts[right]),
        });
    }
    out
}

/// Boundaries where [`boundary_slopes`] finds a break.
pub fn detect_kinks(
    frontier: &[ObjectivePoint],
    k: f64,
    boundaries: &[f64],
    settings: &KinkSettings,
) -> Vec<Kink> {
    boundary_slopes(frontier, k, boundaries, settings)
        .into_iter()
        .filter(|kink| kink.detected(settings.ratio))
        .collect()
}
