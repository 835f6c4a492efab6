//! Nested multi-objective evolutionary search for the leader frontier.
//!
//! Every upper-level candidate (a tax vector, plus a technology when the
//! leader picks it) is handed to the follower solver. Pairs whose follower
//! response carries the optimality tag compete for a place in an unbounded
//! archive of mutually nondominated (revenue, damage) points. The upper
//! population itself evolves NSGA-II style: binary tournaments on
//! (rank, crowding), SBX and polynomial mutation on the taxes, and elitist
//! truncation of parents plus offspring.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{ModelError, Result};
use crate::lower::{
    best_response, best_response_ea, best_response_ea_fixed_tech, best_response_fixed_tech,
    BestResponse, LowerEaConfig,
};
use crate::model::{ExtendedModel, FollowerResponse, LeaderStrategy, ObjectivePoint};
use crate::variation::{polynomial_mutation, sbx};

/// Who decides the technology.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TechChoice {
    /// Technology is an upper-level decision; the mine best-responds with
    /// its schedule only.
    Leader,
    /// The mine picks schedule and technology, ties broken in the leader's
    /// favour.
    Follower,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode")]
pub enum LowerSolverMode {
    Deterministic,
    Evolutionary(LowerEaConfig),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EaConfig {
    pub population_size: usize,
    pub max_generations: usize,
    pub crossover_rate: f64,
    /// Per-variable mutation probability; also the chance of redrawing the
    /// technology gene.
    pub mutation_rate: f64,
    pub eta_crossover: f64,
    pub eta_mutation: f64,
    pub seed: u64,
    pub lower_solver: LowerSolverMode,
    pub tech_choice: TechChoice,
    /// Stop once the archive hypervolume changed by less than
    /// `stagnation_tolerance` (relative) over this many generations.
    pub stagnation_generations: usize,
    pub stagnation_tolerance: f64,
}

impl Default for EaConfig {
    fn default() -> Self {
        Self {
            population_size: 100,
            max_generations: 300,
            crossover_rate: 0.9,
            mutation_rate: 0.2,
            eta_crossover: 15.0,
            eta_mutation: 20.0,
            seed: 1,
            lower_solver: LowerSolverMode::Deterministic,
            tech_choice: TechChoice::Leader,
            stagnation_generations: 50,
            stagnation_tolerance: 1e-5,
        }
    }
}

impl EaConfig {
    pub fn validate(&self) -> Result<()> {
        if self.population_size < 4 || !self.population_size.is_multiple_of(2) {
            return Err(ModelError::invalid(
                "population_size",
                format!("must be even and >= 4, got {}", self.population_size),
            ));
        }
        for (name, rate) in [
            ("crossover_rate", self.crossover_rate),
            ("mutation_rate", self.mutation_rate),
        ] {
            if !(0.0..=1.0).contains(&rate) {
                return Err(ModelError::invalid(name, format!("must lie in [0, 1], got {rate}")));
            }
        }
        if !(self.eta_crossover >= 0.0 && self.eta_mutation >= 0.0) {
            return Err(ModelError::invalid("eta", "distribution indices must be >= 0"));
        }
        if let LowerSolverMode::Evolutionary(lower) = &self.lower_solver {
            lower.validate()?;
        }
        Ok(())
    }
}

/// A leader strategy together with the follower's tagged response.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArchiveEntry {
    pub strategy: LeaderStrategy,
    pub response: FollowerResponse,
    pub objectives: ObjectivePoint,
    pub optimality_tag: bool,
}

/// Mutually nondominated, lower-level optimal (strategy, response) pairs.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ParetoArchive {
    entries: Vec<ArchiveEntry>,
}

impl ParetoArchive {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn entries(&self) -> &[ArchiveEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Inserts `entry` unless an existing member dominates it or has the same
    /// objectives; evicts every member the newcomer dominates. Returns
    /// whether the entry was admitted.
    pub fn insert(&mut self, entry: ArchiveEntry) -> Result<bool> {
        if !entry.optimality_tag {
            return Err(ModelError::UntaggedEntry);
        }
        let new = &entry.objectives;
        if self
            .entries
            .iter()
            .any(|e| e.objectives.dominates(new) || e.objectives.same_objectives(new))
        {
            return Ok(false);
        }
        self.entries.retain(|e| !new.dominates(&e.objectives));
        self.entries.push(entry);
        Ok(true)
    }

    pub fn objectives(&self) -> Vec<ObjectivePoint> {
        self.entries.iter().map(|e| e.objectives).collect()
    }

    /// Entries ordered by increasing damage.
    pub fn sorted_by_damage(&self) -> Vec<ArchiveEntry> {
        let mut out = self.entries.clone();
        out.sort_by(|a, b| {
            a.objectives
                .damage
                .total_cmp(&b.objectives.damage)
                .then(a.objectives.revenue.total_cmp(&b.objectives.revenue))
        });
        out
    }

    pub fn hypervolume(&self, reference: (f64, f64)) -> f64 {
        hypervolume(&self.objectives(), reference)
    }
}

/// Functional form of [`ParetoArchive::insert`].
pub fn archive_insert(mut archive: ParetoArchive, entry: ArchiveEntry) -> Result<ParetoArchive> {
    archive.insert(entry)?;
    Ok(archive)
}

/// Partitions point indices into successive nondominated fronts.
pub fn nondominated_sort(points: &[ObjectivePoint]) -> Vec<Vec<usize>> {
    let n = points.len();
    let mut dominated_by: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut counts = vec![0usize; n];
    for i in 0..n {
        for j in i + 1..n {
            if points[i].dominates(&points[j]) {
                dominated_by[i].push(j);
                counts[j] += 1;
            } else if points[j].dominates(&points[i]) {
                dominated_by[j].push(i);
                counts[i] += 1;
            }
        }
    }
    let mut fronts = Vec::new();
    let mut current: Vec<usize> = (0..n).filter(|&i| counts[i] == 0).collect();
    while !current.is_empty() {
        let mut next = Vec::new();
        for &i in &current {
            for &j in &dominated_by[i] {
                counts[j] -= 1;
                if counts[j] == 0 {
                    next.push(j);
                }
            }
        }
        next.sort_unstable();
        fronts.push(current);
        current = next;
    }
    fronts
}

/// Crowding distance of each member of `front` (same order).
pub fn crowding_distance(points: &[ObjectivePoint], front: &[usize]) -> Vec<f64> {
    let n = front.len();
    let mut dist = vec![0.0; n];
    if n <= 2 {
        return vec![f64::INFINITY; n];
    }
    let keys: [fn(&ObjectivePoint) -> f64; 2] = [|p| p.revenue, |p| p.damage];
    for key in keys {
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| key(&points[front[a]]).total_cmp(&key(&points[front[b]])));
        let lo = key(&points[front[order[0]]]);
        let hi = key(&points[front[order[n - 1]]]);
        dist[order[0]] = f64::INFINITY;
        dist[order[n - 1]] = f64::INFINITY;
        if hi - lo <= 0.0 {
            continue;
        }
        for w in 1..n - 1 {
            let gap = key(&points[front[order[w + 1]]]) - key(&points[front[order[w - 1]]]);
            dist[order[w]] += gap / (hi - lo);
        }
    }
    dist
}

/// Area dominated by `points` (maximize revenue, minimize damage) and
/// bounded by `reference = (revenue floor, damage ceiling)`.
pub fn hypervolume(points: &[ObjectivePoint], reference: (f64, f64)) -> f64 {
    let (rev_ref, dmg_ref) = reference;
    let mut pts: Vec<(f64, f64)> = points
        .iter()
        .filter(|p| p.revenue > rev_ref && p.damage < dmg_ref)
        .map(|p| (p.damage, p.revenue))
        .collect();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0).then(b.1.total_cmp(&a.1)));
    let mut area = 0.0;
    let mut best = rev_ref;
    for (i, &(dmg, rev)) in pts.iter().enumerate() {
        best = best.max(rev);
        let next = pts.get(i + 1).map_or(dmg_ref, |p| p.0);
        area += (best - rev_ref) * (next - dmg);
    }
    area
}

/// Reference point used for progress tracking on `model`.
pub fn reference_point(model: &ExtendedModel) -> (f64, f64) {
    (0.0, model.damage_ceiling())
}

#[derive(Debug, Clone)]
struct Genome {
    tau: Vec<f64>,
    tech: usize,
}

#[derive(Debug, Clone)]
struct Individual {
    genome: Genome,
    response: BestResponse,
    objectives: ObjectivePoint,
}

/// Final archive plus bookkeeping of one run.
#[derive(Debug, Clone)]
pub struct Evolution {
    pub archive: ParetoArchive,
    /// Generations executed after the initial population.
    pub generations: usize,
    pub evaluations: usize,
    /// Follower solves that did not earn the optimality tag.
    pub lower_failures: usize,
    /// Archive hypervolume after the initial population and each generation.
    pub hypervolume_history: Vec<f64>,
    pub stagnated: bool,
}

struct Evaluator<'a> {
    model: &'a ExtendedModel,
    config: &'a EaConfig,
    fixed_tech: Option<usize>,
}

impl Evaluator<'_> {
    fn solve(&self, genome: &Genome, salt: u64) -> Result<BestResponse> {
        let strat = LeaderStrategy::new(genome.tau.clone());
        let model = self.model;
        let tech_id = match (self.fixed_tech, self.config.tech_choice) {
            (Some(id), _) => Some(id),
            (None, TechChoice::Leader) => Some(genome.tech),
            (None, TechChoice::Follower) => None,
        };
        match (&self.config.lower_solver, tech_id) {
            (LowerSolverMode::Deterministic, Some(id)) => {
                best_response_fixed_tech(&strat, model.tech(id)?, model)
            }
            (LowerSolverMode::Deterministic, None) => best_response(&strat, model),
            (LowerSolverMode::Evolutionary(lower), tech) => {
                let lower = LowerEaConfig {
                    seed: lower.seed ^ salt,
                    ..lower.clone()
                };
                match tech {
                    Some(id) => best_response_ea_fixed_tech(&strat, model.tech(id)?, model, &lower),
                    None => best_response_ea(&strat, model, &lower),
                }
            }
        }
    }

    fn evaluate(&self, genomes: Vec<Genome>, generation: usize) -> Result<Vec<Individual>> {
        let seed = self.config.seed;
        genomes
            .into_par_iter()
            .enumerate()
            .map(|(i, genome)| {
                let salt = splitmix(seed ^ splitmix(((generation as u64) << 32) | i as u64));
                let response = self.solve(&genome, salt)?;
                let strat = LeaderStrategy::new(genome.tau.clone());
                let objectives = self.model.leader_objectives(&response.response, &strat)?;
                Ok(Individual {
                    genome,
                    response,
                    objectives,
                })
            })
            .collect()
    }
}

fn splitmix(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Rank (front index) and crowding distance for each individual; untagged
/// individuals sit behind every front.
fn rank_and_crowd(pop: &[Individual]) -> (Vec<usize>, Vec<f64>) {
    let tagged: Vec<usize> = (0..pop.len())
        .filter(|&i| pop[i].response.optimality_tag)
        .collect();
    let points: Vec<ObjectivePoint> = tagged.iter().map(|&i| pop[i].objectives).collect();
    let mut rank = vec![usize::MAX; pop.len()];
    let mut crowd = vec![0.0; pop.len()];
    for (r, front) in nondominated_sort(&points).iter().enumerate() {
        let dist = crowding_distance(&points, front);
        for (&local, d) in front.iter().zip(dist) {
            rank[tagged[local]] = r;
            crowd[tagged[local]] = d;
        }
    }
    (rank, crowd)
}

fn better(rank: &[usize], crowd: &[f64], a: usize, b: usize) -> bool {
    rank[a] < rank[b] || (rank[a] == rank[b] && crowd[a] > crowd[b])
}

/// Keeps the best `size` individuals by (rank, crowding).
fn truncate(pop: Vec<Individual>, size: usize) -> Vec<Individual> {
    let (rank, crowd) = rank_and_crowd(&pop);
    let mut order: Vec<usize> = (0..pop.len()).collect();
    order.sort_by(|&a, &b| {
        rank[a]
            .cmp(&rank[b])
            .then(crowd[b].total_cmp(&crowd[a]))
            .then(a.cmp(&b))
    });
    order.truncate(size);
    order.sort_unstable();
    let mut slots: Vec<Option<Individual>> = pop.into_iter().map(Some).collect();
    order
        .into_iter()
        .map(|i| slots[i].take().expect("each index kept once"))
        .collect()
}

fn absorb(archive: &mut ParetoArchive, pop: &[Individual]) -> usize {
    let mut failures = 0;
    for ind in pop {
        if !ind.response.optimality_tag {
            failures += 1;
            log::warn!(
                "follower response for tau {:?} lacks the optimality tag; excluded from archive",
                ind.genome.tau
            );
            continue;
        }
        let entry = ArchiveEntry {
            strategy: LeaderStrategy::new(ind.genome.tau.clone()),
            response: ind.response.response.clone(),
            objectives: ind.objectives,
            optimality_tag: true,
        };
        archive.insert(entry).expect("entry is tagged");
    }
    failures
}

/// Runs the nested search. `tech_filter` restricts the mine to a single
/// technology.
pub fn evolve(
    model: &ExtendedModel,
    config: &EaConfig,
    tech_filter: Option<usize>,
) -> Result<Evolution> {
    Evolver::new(model, config).tech_filter(tech_filter).run()
}

type Observer<'a> = Box<dyn FnMut(usize, &ParetoArchive) + 'a>;

/// Configurable entry point to the nested search.
pub struct Evolver<'a> {
    model: &'a ExtendedModel,
    config: &'a EaConfig,
    tech_filter: Option<usize>,
    initial: Option<Vec<Vec<f64>>>,
    observer: Option<Observer<'a>>,
}

impl<'a> Evolver<'a> {
    pub fn new(model: &'a ExtendedModel, config: &'a EaConfig) -> Self {
        Self {
            model,
            config,
            tech_filter: None,
            initial: None,
            observer: None,
        }
    }

    pub fn tech_filter(mut self, tech: Option<usize>) -> Self {
        self.tech_filter = tech;
        self
    }

    /// Tax vectors for the initial population instead of uniform samples.
    /// Must hold exactly `population_size` vectors.
    pub fn initial_population(mut self, taus: Vec<Vec<f64>>) -> Self {
        self.initial = Some(taus);
        self
    }

    /// Called with the generation index (0 = initial population) and the
    /// archive after every archive update.
    pub fn observer(mut self, f: impl FnMut(usize, &ParetoArchive) + 'a) -> Self {
        self.observer = Some(Box::new(f));
        self
    }

    pub fn run(mut self) -> Result<Evolution> {
        let model = self.model;
        let config = self.config;
        config.validate()?;
        if let Some(id) = self.tech_filter {
            model.tech(id)?;
        }
        let bounds = model.tau_bounds().to_vec();
        let tech_ids: Vec<usize> = match self.tech_filter {
            Some(id) => vec![id],
            None => model.techs().iter().map(|t| t.id).collect(),
        };
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let evaluator = Evaluator {
            model,
            config,
            fixed_tech: self.tech_filter,
        };

        let genomes: Vec<Genome> = match self.initial.take() {
            Some(taus) => {
                if taus.len() != config.population_size {
                    return Err(ModelError::LengthMismatch {
                        what: "initial population",
                        expected: config.population_size,
                        got: taus.len(),
                    });
                }
                taus.into_iter()
                    .map(|tau| {
                        LeaderStrategy::new(tau.clone()).validate(model)?;
                        Ok(Genome {
                            tau,
                            tech: tech_ids[rng.gen_range(0..tech_ids.len())],
                        })
                    })
                    .collect::<Result<_>>()?
            }
            None => (0..config.population_size)
                .map(|_| Genome {
                    tau: bounds.iter().map(|b| rng.gen_range(b.0..=b.1)).collect(),
                    tech: tech_ids[rng.gen_range(0..tech_ids.len())],
                })
                .collect(),
        };

        let reference = reference_point(model);
        let mut archive = ParetoArchive::new();
        let mut population = evaluator.evaluate(genomes, 0)?;
        let mut evaluations = population.len();
        let mut lower_failures = absorb(&mut archive, &population);
        if let Some(obs) = self.observer.as_mut() {
            obs(0, &archive);
        }
        let mut history = vec![archive.hypervolume(reference)];
        let mut generations = 0;
        let mut stagnated = false;

        while generations < config.max_generations {
            generations += 1;
            let (rank, crowd) = rank_and_crowd(&population);
            let pick = |rng: &mut ChaCha8Rng| {
                let a = rng.gen_range(0..population.len());
                let b = rng.gen_range(0..population.len());
                if better(&rank, &crowd, b, a) {
                    b
                } else {
                    a
                }
            };
            let mut children = Vec::with_capacity(config.population_size);
            while children.len() < config.population_size {
                let mut a = population[pick(&mut rng)].genome.clone();
                let mut b = population[pick(&mut rng)].genome.clone();
                if rng.gen::<f64>() < config.crossover_rate {
                    sbx(&mut rng, &mut a.tau, &mut b.tau, &bounds, config.eta_crossover);
                    if rng.gen::<bool>() {
                        std::mem::swap(&mut a.tech, &mut b.tech);
                    }
                }
                for child in [&mut a, &mut b] {
                    polynomial_mutation(
                        &mut rng,
                        &mut child.tau,
                        &bounds,
                        config.mutation_rate,
                        config.eta_mutation,
                    );
                    if tech_ids.len() > 1 && rng.gen::<f64>() < config.mutation_rate {
                        child.tech = tech_ids[rng.gen_range(0..tech_ids.len())];
                    }
                }
                children.push(a);
                children.push(b);
            }

            let offspring = evaluator.evaluate(children, generations)?;
            evaluations += offspring.len();
            lower_failures += absorb(&mut archive, &offspring);
            if let Some(obs) = self.observer.as_mut() {
                obs(generations, &archive);
            }
            population.extend(offspring);
            population = truncate(population, config.population_size);

            let hv = archive.hypervolume(reference);
            history.push(hv);
            let window = config.stagnation_generations;
            if window > 0 && history.len() > window {
                let old = history[history.len() - 1 - window];
                let scale = hv.abs().max(f64::MIN_POSITIVE);
                if (hv - old).abs() / scale < config.stagnation_tolerance {
                    stagnated = true;
                    break;
                }
            }
        }

        Ok(Evolution {
            archive,
            generations,
            evaluations,
            lower_failures,
            hypervolume_history: history,
            stagnated,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ModelConfig;
    use proptest::prelude::*;

    fn entry(revenue: f64, damage: f64) -> ArchiveEntry {
        ArchiveEntry {
            strategy: LeaderStrategy::new(vec![0.0]),
            response: FollowerResponse {
                q: vec![0.0],
                tech: 1,
            },
            objectives: ObjectivePoint {
                revenue,
                damage,
                profit: 0.0,
            },
            optimality_tag: true,
        }
    }

    fn point(revenue: f64, damage: f64) -> ObjectivePoint {
        ObjectivePoint {
            revenue,
            damage,
            profit: 0.0,
        }
    }

    #[test]
    fn archive_insert_examples() {
        let a = archive_insert(ParetoArchive::new(), entry(100.0, 50.0)).unwrap();
        assert_eq!(a.len(), 1);

        let b = archive_insert(a.clone(), entry(90.0, 60.0)).unwrap();
        assert_eq!(b.len(), 1);
        assert_eq!(b.entries()[0].objectives.revenue, 100.0);

        let c = archive_insert(a.clone(), entry(110.0, 40.0)).unwrap();
        assert_eq!(c.len(), 1);
        assert_eq!(c.entries()[0].objectives.revenue, 110.0);

        let d = archive_insert(a, entry(100.0, 50.0)).unwrap();
        assert_eq!(d.len(), 1);
    }

    #[test]
    fn archive_rejects_untagged_entries() {
        let mut e = entry(1.0, 1.0);
        e.optimality_tag = false;
        assert!(matches!(
            ParetoArchive::new().insert(e),
            Err(ModelError::UntaggedEntry)
        ));
    }

    #[test]
    fn sort_examples() {
        let same = vec![point(1.0, 1.0); 4];
        assert_eq!(nondominated_sort(&same), vec![vec![0, 1, 2, 3]]);

        let staircase: Vec<_> = (0..6).map(|i| point(i as f64, i as f64 * 2.0)).collect();
        assert_eq!(nondominated_sort(&staircase).len(), 1);

        let chain: Vec<_> = (0..5).map(|i| point(10.0 - i as f64, i as f64)).collect();
        assert_eq!(
            nondominated_sort(&chain),
            vec![vec![0], vec![1], vec![2], vec![3], vec![4]]
        );
    }

    #[test]
    fn hypervolume_of_simple_sets() {
        let reference = (0.0, 10.0);
        assert_eq!(hypervolume(&[], reference), 0.0);
        assert_eq!(hypervolume(&[point(2.0, 4.0)], reference), 12.0);
        // Two steps: (rev 1 from dmg 2) and (rev 3 from dmg 6).
        let hv = hypervolume(&[point(1.0, 2.0), point(3.0, 6.0)], reference);
        assert_eq!(hv, 1.0 * 4.0 + 3.0 * 4.0);
        // A dominated point adds nothing.
        let hv2 = hypervolume(&[point(1.0, 2.0), point(3.0, 6.0), point(0.5, 7.0)], reference);
        assert_eq!(hv, hv2);
    }

    #[test]
    fn crowding_marks_extremes_infinite() {
        let pts: Vec<_> = (0..5).map(|i| point(i as f64, i as f64)).collect();
        let d = crowding_distance(&pts, &[0, 1, 2, 3, 4]);
        assert!(d[0].is_infinite() && d[4].is_infinite());
        assert!((d[2] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn config_validation() {
        let ok = EaConfig::default();
        assert!(ok.validate().is_ok());
        for bad in [
            EaConfig { population_size: 5, ..ok.clone() },
            EaConfig { population_size: 2, ..ok.clone() },
            EaConfig { crossover_rate: 1.5, ..ok.clone() },
            EaConfig { mutation_rate: -0.1, ..ok.clone() },
        ] {
            assert!(bad.validate().is_err());
        }
    }

    #[test]
    fn degenerate_evolution_keeps_single_point() {
        let model = ModelConfig::default().extended;
        let config = EaConfig {
            population_size: 6,
            max_generations: 5,
            crossover_rate: 0.0,
            mutation_rate: 0.0,
            ..EaConfig::default()
        };
        let tau = vec![20.0, 25.0, 30.0, 35.0, 40.0];
        let run = Evolver::new(&model, &config)
            .tech_filter(Some(2))
            .initial_population(vec![tau.clone(); 6])
            .run()
            .unwrap();
        assert_eq!(run.archive.len(), 1);
        let only = &run.archive.entries()[0];
        assert_eq!(only.strategy.tau, tau);
        let direct = best_response_fixed_tech(
            &LeaderStrategy::new(tau.clone()),
            model.tech(2).unwrap(),
            &model,
        )
        .unwrap();
        assert_eq!(only.response, direct.response);
    }

    #[test]
    fn archive_is_sound_and_hypervolume_monotone() {
        let model = ModelConfig::default().extended;
        let config = EaConfig {
            population_size: 20,
            max_generations: 15,
            seed: 5,
            ..EaConfig::default()
        };
        let reference = reference_point(&model);
        let mut volumes = Vec::new();
        let mut snapshots = Vec::new();
        let run = Evolver::new(&model, &config)
            .observer(|_, archive| {
                volumes.push(archive.hypervolume(reference));
                snapshots.push(archive.clone());
            })
            .run()
            .unwrap();
        assert!(volumes.windows(2).all(|w| w[1] >= w[0]));
        for archive in snapshots.iter().chain(std::iter::once(&run.archive)) {
            let pts = archive.objectives();
            for (i, a) in pts.iter().enumerate() {
                for b in &pts[i + 1..] {
                    assert!(!a.dominates(b) && !b.dominates(a));
                }
            }
            for e in archive.entries() {
                let again = model.leader_objectives(&e.response, &e.strategy).unwrap();
                assert_eq!(again, e.objectives);
            }
        }
    }

    #[test]
    fn identical_seeds_give_identical_archives() {
        let model = ModelConfig::default().extended;
        let config = EaConfig {
            population_size: 16,
            max_generations: 8,
            seed: 11,
            ..EaConfig::default()
        };
        let a = evolve(&model, &config, None).unwrap();
        let b = evolve(&model, &config, None).unwrap();
        assert_eq!(a.archive, b.archive);
        assert_eq!(a.hypervolume_history, b.hypervolume_history);
    }

    #[test]
    fn evolutionary_lower_level_is_reproducible() {
        let model = ModelConfig::default().extended;
        let config = EaConfig {
            population_size: 8,
            max_generations: 3,
            seed: 3,
            lower_solver: LowerSolverMode::Evolutionary(LowerEaConfig {
                population_size: 8,
                generations: 4,
                ..LowerEaConfig::default()
            }),
            ..EaConfig::default()
        };
        let a = evolve(&model, &config, Some(1)).unwrap();
        let b = evolve(&model, &config, Some(1)).unwrap();
        assert_eq!(a.archive, b.archive);
        assert!(!a.archive.is_empty());
    }

    #[test]
    fn follower_choice_settles_on_cost_dominant_technology() {
        // Technology 4 is cheapest in every cost coefficient, so a mine that
        // picks its own technology never uses anything else once it extracts.
        let model = ModelConfig::default().extended;
        let config = EaConfig {
            population_size: 16,
            max_generations: 6,
            tech_choice: TechChoice::Follower,
            ..EaConfig::default()
        };
        let run = evolve(&model, &config, None).unwrap();
        for e in run.archive.entries() {
            if e.objectives.damage > 0.0 {
                assert_eq!(e.response.tech, 4);
            }
        }
    }

    #[test]
    fn unknown_filter_is_rejected() {
        let model = ModelConfig::default().extended;
        assert!(evolve(&model, &EaConfig::default(), Some(7)).is_err());
    }

    proptest! {
        #[test]
        fn fronts_partition_and_respect_dominance(
            raw in proptest::collection::vec((0.0..10.0f64, 0.0..10.0f64), 1..40)
        ) {
            let pts: Vec<_> = raw.iter().map(|&(r, d)| point(r.round(), d.round())).collect();
            let fronts = nondominated_sort(&pts);
            let mut seen: Vec<usize> = fronts.iter().flatten().copied().collect();
            seen.sort_unstable();
            prop_assert_eq!(seen, (0..pts.len()).collect::<Vec<_>>());
            for (f, front) in fronts.iter().enumerate() {
                for &i in front {
                    for &j in front {
                        prop_assert!(!pts[i].dominates(&pts[j]));
                    }
                    if f > 0 {
                        prop_assert!(fronts[f - 1].iter().any(|&j| pts[j].dominates(&pts[i])));
                    }
                }
            }
        }

        #[test]
        fn archive_stays_mutually_nondominated(
            raw in proptest::collection::vec((0.0..10.0f64, 0.0..10.0f64), 1..60)
        ) {
            let mut archive = ParetoArchive::new();
            for &(r, d) in &raw {
                archive.insert(entry(r.round(), d.round())).unwrap();
            }
            let pts = archive.objectives();
            for a in &pts {
                for b in &pts {
                    prop_assert!(!a.dominates(b));
                }
            }
            // Every inserted point is weakly dominated by some member.
            for &(r, d) in &raw {
                let p = point(r.round(), d.round());
                prop_assert!(pts.iter().any(|a| a.dominates(&p) || a.same_objectives(&p)));
            }
        }
    }
}
