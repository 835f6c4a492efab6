//! CSV and JSON output of sweeps, frontiers and schedules.
//!
//! Numbers are written with 12 significant digits.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::analytical::WeightedSolution;
use crate::bilevel::ArchiveEntry;
use crate::error::{ModelError, Result};
use crate::model::ExtendedModel;

/// `x` rounded to 12 significant digits, in the shortest form that parses
/// back to the rounded value.
pub fn format_value(x: f64) -> String {
    if !x.is_finite() {
        return x.to_string();
    }
    let rounded: f64 = format!("{x:.11e}").parse().expect("formatted float parses");
    if rounded == 0.0 {
        "0".to_string()
    } else {
        rounded.to_string()
    }
}

fn parse(field: &str, column: &str) -> Result<f64> {
    field
        .trim()
        .parse()
        .map_err(|_| ModelError::Domain(format!("column {column}: cannot parse {field:?}")))
}

fn parse_usize(field: &str, column: &str) -> Result<usize> {
    field
        .trim()
        .parse()
        .map_err(|_| ModelError::Domain(format!("column {column}: cannot parse {field:?}")))
}

const SWEEP_HEADER: [&str; 6] = ["w", "tau", "q", "revenue", "damage", "profit"];

pub fn write_sweep<W: Write>(out: W, sweep: &[WeightedSolution]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(out);
    wtr.write_record(SWEEP_HEADER)?;
    for s in sweep {
        wtr.write_record(
            [s.w, s.tau_star, s.q_star, s.revenue, s.damage, s.profit].map(format_value),
        )?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn read_sweep<R: Read>(input: R) -> Result<Vec<WeightedSolution>> {
    let mut rdr = csv::Reader::from_reader(input);
    let mut out = Vec::new();
    for record in rdr.records() {
        let record = record?;
        let mut v = [0.0; 6];
        for (i, name) in SWEEP_HEADER.iter().enumerate() {
            v[i] = parse(record.get(i).unwrap_or(""), name)?;
        }
        out.push(WeightedSolution {
            w: v[0],
            tau_star: v[1],
            q_star: v[2],
            revenue: v[3],
            damage: v[4],
            profit: v[5],
        });
    }
    Ok(out)
}

/// One line of `frontier.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrontierRow {
    pub id: usize,
    pub technology: usize,
    pub revenue: f64,
    pub damage: f64,
    pub profit: f64,
    pub tau: Vec<f64>,
    pub q: Vec<f64>,
}

impl FrontierRow {
    pub fn from_entry(id: usize, entry: &ArchiveEntry) -> Self {
        Self {
            id,
            technology: entry.response.tech,
            revenue: entry.objectives.revenue,
            damage: entry.objectives.damage,
            profit: entry.objectives.profit,
            tau: entry.strategy.tau.clone(),
            q: entry.response.q.clone(),
        }
    }
}

fn frontier_header(periods: usize) -> Vec<String> {
    let mut h: Vec<String> = ["id", "technology", "revenue", "damage", "profit"]
        .map(String::from)
        .to_vec();
    h.extend((1..=periods).map(|t| format!("tau_{t}")));
    h.extend((1..=periods).map(|t| format!("q_{t}")));
    h
}

/// Writes `rows`; the header is written even when there are none.
pub fn write_frontier<W: Write>(out: W, periods: usize, rows: &[FrontierRow]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(out);
    wtr.write_record(frontier_header(periods))?;
    for row in rows {
        if row.tau.len() != periods || row.q.len() != periods {
            return Err(ModelError::LengthMismatch {
                what: "frontier row",
                expected: periods,
                got: row.tau.len().min(row.q.len()),
            });
        }
        let mut rec = vec![row.id.to_string(), row.technology.to_string()];
        rec.extend([row.revenue, row.damage, row.profit].map(format_value));
        rec.extend(row.tau.iter().chain(&row.q).map(|&x| format_value(x)));
        wtr.write_record(rec)?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn read_frontier<R: Read>(input: R) -> Result<Vec<FrontierRow>> {
    let mut rdr = csv::Reader::from_reader(input);
    let header = rdr.headers()?.clone();
    let periods = header.iter().filter(|h| h.starts_with("tau_")).count();
    if header.iter().collect::<Vec<_>>() != frontier_header(periods) {
        return Err(ModelError::Domain(format!(
            "unexpected frontier header {:?}",
            header.iter().collect::<Vec<_>>()
        )));
    }
    let mut out = Vec::new();
    for record in rdr.records() {
        let record = record?;
        let get = |i: usize| record.get(i).unwrap_or("");
        let floats = |from: usize| -> Result<Vec<f64>> {
            (from..from + periods)
                .map(|i| parse(get(i), &header[i]))
                .collect()
        };
        out.push(FrontierRow {
            id: parse_usize(get(0), "id")?,
            technology: parse_usize(get(1), "technology")?,
            revenue: parse(get(2), "revenue")?,
            damage: parse(get(3), "damage")?,
            profit: parse(get(4), "profit")?,
            tau: floats(5)?,
            q: floats(5 + periods)?,
        });
    }
    Ok(out)
}

/// One period of one frontier solution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduleRow {
    pub solution_id: usize,
    pub period: usize,
    pub tau: f64,
    pub q: f64,
    /// Undiscounted.
    pub period_profit: f64,
    pub cumulative_extraction: f64,
    /// 1-based stratum holding the last unit extracted so far.
    pub active_stratum: usize,
}

/// Period-by-period breakdown of an archive entry.
pub fn schedule_rows(id: usize, entry: &ArchiveEntry, model: &ExtendedModel) -> Result<Vec<ScheduleRow>> {
    let tech = model.tech(entry.response.tech)?;
    let q = &entry.response.q;
    let mut cum = 0.0;
    (1..=model.periods())
        .map(|t| {
            cum += q[t - 1];
            Ok(ScheduleRow {
                solution_id: id,
                period: t,
                tau: entry.strategy.tau[t - 1],
                q: q[t - 1],
                period_profit: model.period_profit(t, &q[..t], entry.strategy.tau[t - 1], tech)?,
                cumulative_extraction: cum,
                active_stratum: model.strata().stratum_of(cum),
            })
        })
        .collect()
}

const SCHEDULE_HEADER: [&str; 7] = [
    "solution_id",
    "period",
    "tau",
    "q",
    "period_profit",
    "cumulative_extraction",
    "active_stratum",
];

pub fn write_schedule<W: Write>(out: W, rows: &[ScheduleRow]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(out);
    wtr.write_record(SCHEDULE_HEADER)?;
    for r in rows {
        let mut rec = vec![r.solution_id.to_string(), r.period.to_string()];
        rec.extend(
            [r.tau, r.q, r.period_profit, r.cumulative_extraction].map(format_value),
        );
        rec.push(r.active_stratum.to_string());
        wtr.write_record(rec)?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn read_schedule<R: Read>(input: R) -> Result<Vec<ScheduleRow>> {
    let mut rdr = csv::Reader::from_reader(input);
    let mut out = Vec::new();
    for record in rdr.records() {
        let record = record?;
        let get = |i: usize| record.get(i).unwrap_or("");
        out.push(ScheduleRow {
            solution_id: parse_usize(get(0), SCHEDULE_HEADER[0])?,
            period: parse_usize(get(1), SCHEDULE_HEADER[1])?,
            tau: parse(get(2), SCHEDULE_HEADER[2])?,
            q: parse(get(3), SCHEDULE_HEADER[3])?,
            period_profit: parse(get(4), SCHEDULE_HEADER[4])?,
            cumulative_extraction: parse(get(5), SCHEDULE_HEADER[5])?,
            active_stratum: parse_usize(get(6), SCHEDULE_HEADER[6])?,
        });
    }
    Ok(out)
}

/// Contents of `meta.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMeta {
    /// Settings of the run, echoed verbatim.
    pub config: serde_json::Value,
    pub seed: u64,
    pub generations: usize,
    pub evaluations: usize,
    pub lower_failures: usize,
    pub stagnated: bool,
    pub archive_size: usize,
    /// Rows left after objective-bound filtering.
    pub emitted: usize,
    pub wall_time_secs: f64,
}

pub fn write_meta<W: Write>(out: W, meta: &RunMeta) -> Result<()> {
    serde_json::to_writer_pretty(out, meta)?;
    Ok(())
}

pub fn read_meta<R: Read>(input: R) -> Result<RunMeta> {
    Ok(serde_json::from_reader(input)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytical::pareto_sweep;
    use crate::lower::best_response_fixed_tech;
    use crate::model::{AnalyticalParams, LeaderStrategy, ModelConfig};
    use proptest::prelude::*;

    #[test]
    fn format_examples() {
        assert_eq!(format_value(0.0), "0");
        assert_eq!(format_value(-0.0), "0");
        assert_eq!(format_value(612.5625), "612.5625");
        assert_eq!(format_value(1.0 / 3.0), "0.333333333333");
        assert_eq!(format_value(123456789012345.0), "123456789012000");
        assert_eq!(format_value(2.5e-20), "0.000000000000000000025");
    }

    #[test]
    fn sweep_round_trip() {
        let sweep = pareto_sweep(&AnalyticalParams::default(), 7).unwrap();
        let mut buf = Vec::new();
        write_sweep(&mut buf, &sweep).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("w,tau,q,revenue,damage,profit\n"));
        assert_eq!(text.lines().count(), 8);
        let back = read_sweep(buf.as_slice()).unwrap();
        for (a, b) in sweep.iter().zip(&back) {
            assert!((a.revenue - b.revenue).abs() <= 1e-9 * a.revenue.abs().max(1.0));
            assert!((a.tau_star - b.tau_star).abs() <= 1e-9 * a.tau_star.abs());
        }
    }

    fn entry(model: &ExtendedModel, tau: Vec<f64>, tech: usize) -> ArchiveEntry {
        let strategy = LeaderStrategy::new(tau);
        let r = best_response_fixed_tech(&strategy, model.tech(tech).unwrap(), model).unwrap();
        let objectives = model.leader_objectives(&r.response, &strategy).unwrap();
        ArchiveEntry {
            strategy,
            response: r.response,
            objectives,
            optimality_tag: r.optimality_tag,
        }
    }

    #[test]
    fn frontier_and_schedule_round_trip() {
        let model = ModelConfig::default().extended;
        let e = entry(&model, vec![15.0, 20.0, 25.0, 30.0, 35.0], 3);
        let rows = vec![FrontierRow::from_entry(0, &e)];
        let mut buf = Vec::new();
        write_frontier(&mut buf, 5, &rows).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with(
            "id,technology,revenue,damage,profit,tau_1,tau_2,tau_3,tau_4,tau_5,q_1,q_2,q_3,q_4,q_5\n"
        ));
        let back = read_frontier(buf.as_slice()).unwrap();
        assert_eq!(back.len(), 1);
        assert_eq!(back[0].technology, 3);
        assert_eq!(back[0].tau, rows[0].tau);

        let sched = schedule_rows(0, &e, &model).unwrap();
        assert_eq!(sched.len(), 5);
        let total: f64 = sched.iter().map(|r| r.period_profit).sum();
        assert!((total - e.objectives.profit).abs() < 1e-9);
        assert_eq!(sched[4].cumulative_extraction, e.response.q.iter().sum::<f64>());
        let mut buf = Vec::new();
        write_schedule(&mut buf, &sched).unwrap();
        let again = read_schedule(buf.as_slice()).unwrap();
        assert_eq!(again.len(), 5);
        assert_eq!(again[2].active_stratum, sched[2].active_stratum);
    }

    #[test]
    fn empty_frontier_keeps_header() {
        let mut buf = Vec::new();
        write_frontier(&mut buf, 2, &[]).unwrap();
        assert_eq!(
            String::from_utf8(buf.clone()).unwrap(),
            "id,technology,revenue,damage,profit,tau_1,tau_2,q_1,q_2\n"
        );
        assert!(read_frontier(buf.as_slice()).unwrap().is_empty());
    }

    #[test]
    fn malformed_frontier_is_rejected() {
        let text = "id,technology,revenue\n1,2,3\n";
        assert!(read_frontier(text.as_bytes()).is_err());
        let text = "id,technology,revenue,damage,profit,tau_1,q_1\n0,1,x,1,1,1,1\n";
        assert!(read_frontier(text.as_bytes()).is_err());
    }

    #[test]
    fn meta_round_trip() {
        let meta = RunMeta {
            config: serde_json::json!({"seed": 4, "tech": "all"}),
            seed: 4,
            generations: 10,
            evaluations: 200,
            lower_failures: 0,
            stagnated: false,
            archive_size: 12,
            emitted: 12,
            wall_time_secs: 0.5,
        };
        let mut buf = Vec::new();
        write_meta(&mut buf, &meta).unwrap();
        assert_eq!(read_meta(buf.as_slice()).unwrap(), meta);
    }

    proptest! {
        #[test]
        fn formatted_values_are_within_twelve_digits(x in -1e6f64..1e6) {
            let back: f64 = format_value(x).parse().unwrap();
            prop_assert!((back - x).abs() <= 5e-12 * x.abs());
        }
    }
}
