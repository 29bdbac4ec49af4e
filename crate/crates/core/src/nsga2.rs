//! Elitist non-dominated sorting GA over feature masks.
//!
//! One generation: rank and crowd the parent population, breed an equal
//! number of offspring by binary tournament, crossover and bit-flip
//! mutation, merge parents and offspring, and refill the population front
//! by front, cutting the last admitted front by crowding distance.

use std::cmp::Ordering;
use std::collections::HashSet;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::measures::MeasureCache;
use crate::objectives::{evaluate, repair, Chromosome, ObjectiveModel, ObjectiveVector};

#[derive(Debug, Error, PartialEq)]
pub enum GaError {
    #[error("invalid GA configuration: {0}")]
    InvalidConfig(String),
    #[error("feature selection needs at least 3 features, got {0}")]
    TooFewFeatures(usize),
    #[error("front member {0} is dominated by member {1}")]
    DominatedMember(usize, usize),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CrossoverKind {
    #[default]
    SinglePoint,
    Uniform,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaConfig {
    pub pop_size: usize,
    pub max_generations: usize,
    pub crossover_rate: f64,
    pub mutation_rate: f64,
    pub seed: u64,
    pub tournament_size: usize,
    #[serde(default)]
    pub crossover: CrossoverKind,
}

impl Default for GaConfig {
    fn default() -> Self {
        Self {
            pop_size: 100,
            max_generations: 200,
            crossover_rate: 0.9,
            mutation_rate: 0.0244,
            seed: 0,
            tournament_size: 2,
            crossover: CrossoverKind::SinglePoint,
        }
    }
}

impl GaConfig {
    pub fn with_seed(seed: u64) -> Self {
        Self {
            seed,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), GaError> {
        let bad = |msg: String| Err(GaError::InvalidConfig(msg));
        if self.pop_size < 4 || !self.pop_size.is_multiple_of(2) {
            return bad(format!("pop_size {} must be even and >= 4", self.pop_size));
        }
        for (name, rate) in [
            ("crossover_rate", self.crossover_rate),
            ("mutation_rate", self.mutation_rate),
        ] {
            if !(0.0..=1.0).contains(&rate) {
                return bad(format!("{name} {rate} outside [0,1]"));
            }
        }
        if self.tournament_size == 0 {
            return bad("tournament_size must be >= 1".into());
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScoredIndividual {
    pub chromosome: Chromosome,
    pub objectives: ObjectiveVector,
    /// Front number, 1 for the non-dominated front; 0 until sorted.
    pub rank: usize,
    /// Crowding distance within the individual's front (may be infinite).
    pub crowding: f64,
}

impl ScoredIndividual {
    pub fn new(chromosome: Chromosome, objectives: ObjectiveVector) -> Self {
        Self {
            chromosome,
            objectives,
            rank: 0,
            crowding: 0.0,
        }
    }
}

/// `a` dominates `b`: no worse in every objective, strictly better in one.
pub fn dominates(a: &ObjectiveVector, b: &ObjectiveVector) -> bool {
    let (a, b) = (a.as_array(), b.as_array());
    let mut strictly = false;
    for k in 0..3 {
        if a[k] < b[k] {
            return false;
        }
        if a[k] > b[k] {
            strictly = true;
        }
    }
    strictly
}

/// Partitions `points` into non-dominated fronts using domination counts
/// and dominated-sets. Indices within each front are ascending.
pub fn nondominated_fronts(points: &[ObjectiveVector]) -> Vec<Vec<usize>> {
    let n = points.len();
    let mut dominated_by_count = vec![0usize; n];
    let mut dominates_set: Vec<Vec<usize>> = vec![Vec::new(); n];
    for p in 0..n {
        for q in (p + 1)..n {
            if dominates(&points[p], &points[q]) {
                dominates_set[p].push(q);
                dominated_by_count[q] += 1;
            } else if dominates(&points[q], &points[p]) {
                dominates_set[q].push(p);
                dominated_by_count[p] += 1;
            }
        }
    }
    let mut fronts = Vec::new();
    let mut current: Vec<usize> = (0..n).filter(|&p| dominated_by_count[p] == 0).collect();
    while !current.is_empty() {
        let mut next = Vec::new();
        for &p in &current {
            for &q in &dominates_set[p] {
                dominated_by_count[q] -= 1;
                if dominated_by_count[q] == 0 {
                    next.push(q);
                }
            }
        }
        next.sort_unstable();
        fronts.push(current);
        current = next;
    }
    fronts
}

/// Sorts `pop` into fronts and writes each member's rank (1-based).
pub fn fast_nondominated_sort(pop: &mut [ScoredIndividual]) -> Vec<Vec<usize>> {
    let points: Vec<ObjectiveVector> = pop.iter().map(|s| s.objectives).collect();
    let fronts = nondominated_fronts(&points);
    for (r, front) in fronts.iter().enumerate() {
        for &i in front {
            pop[i].rank = r + 1;
        }
    }
    fronts
}

/// Crowding distance of each member of `front` (same order as `front`).
/// Per objective the two extremes get infinity; interior members add the
/// range-normalized gap between their neighbours. A zero-range objective
/// adds nothing to interior members.
pub fn crowding_distances(front: &[usize], points: &[ObjectiveVector]) -> Vec<f64> {
    let n = front.len();
    let mut dist = vec![0.0; n];
    if n <= 2 {
        return vec![f64::INFINITY; n];
    }
    for k in 0..3 {
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| {
            points[front[a]]
                .get(k)
                .total_cmp(&points[front[b]].get(k))
                .then(front[a].cmp(&front[b]))
        });
        let lo = points[front[order[0]]].get(k);
        let hi = points[front[order[n - 1]]].get(k);
        dist[order[0]] = f64::INFINITY;
        dist[order[n - 1]] = f64::INFINITY;
        let range = hi - lo;
        if range <= 0.0 {
            continue;
        }
        for w in 1..n - 1 {
            let prev = points[front[order[w - 1]]].get(k);
            let next = points[front[order[w + 1]]].get(k);
            dist[order[w]] += (next - prev) / range;
        }
    }
    dist
}

pub fn crowding_distance(pop: &mut [ScoredIndividual], front: &[usize]) {
    let points: Vec<ObjectiveVector> = front.iter().map(|&i| pop[i].objectives).collect();
    let local: Vec<usize> = (0..front.len()).collect();
    for (&i, d) in front.iter().zip(crowding_distances(&local, &points)) {
        pop[i].crowding = d;
    }
}

/// Crowded-comparison order; `Less` means `a` is preferred. Lower rank wins,
/// then larger crowding, then the smaller population index.
pub fn crowded_compare(
    a: &ScoredIndividual,
    a_index: usize,
    b: &ScoredIndividual,
    b_index: usize,
) -> Ordering {
    a.rank
        .cmp(&b.rank)
        .then_with(|| b.crowding.total_cmp(&a.crowding))
        .then(a_index.cmp(&b_index))
}

/// Ranks and crowds the whole population in place; returns the fronts.
pub fn rank_and_crowd(pop: &mut [ScoredIndividual]) -> Vec<Vec<usize>> {
    let fronts = fast_nondominated_sort(pop);
    for front in &fronts {
        crowding_distance(pop, front);
    }
    fronts
}

/// Draws `tournament_size` members uniformly with replacement and returns
/// the index of the crowded-comparison winner.
pub fn tournament_select<R: Rng + ?Sized>(
    pop: &[ScoredIndividual],
    rng: &mut R,
    cfg: &GaConfig,
) -> usize {
    let mut best = rng.gen_range(0..pop.len());
    for _ in 1..cfg.tournament_size {
        let challenger = rng.gen_range(0..pop.len());
        if crowded_compare(&pop[challenger], challenger, &pop[best], best) == Ordering::Less {
            best = challenger;
        }
    }
    best
}

pub fn init_population<R: Rng + ?Sized>(
    n_features: usize,
    cfg: &GaConfig,
    rng: &mut R,
) -> Vec<Chromosome> {
    (0..cfg.pop_size)
        .map(|_| {
            let bits = (0..n_features).map(|_| rng.gen::<bool>()).collect();
            repair(Chromosome::new(bits), rng)
        })
        .collect()
}

/// Children swap tails after position `cut`.
pub fn single_point(p1: &Chromosome, p2: &Chromosome, cut: usize) -> (Chromosome, Chromosome) {
    let mut c1 = p1.bits()[..cut].to_vec();
    c1.extend_from_slice(&p2.bits()[cut..]);
    let mut c2 = p2.bits()[..cut].to_vec();
    c2.extend_from_slice(&p1.bits()[cut..]);
    (Chromosome::new(c1), Chromosome::new(c2))
}

/// With probability `crossover_rate` recombines the parents (single-point
/// cut in `[1, M-1]`, or uniform), otherwise copies them; children repaired.
pub fn crossover<R: Rng + ?Sized>(
    p1: &Chromosome,
    p2: &Chromosome,
    rng: &mut R,
    cfg: &GaConfig,
) -> (Chromosome, Chromosome) {
    assert_eq!(p1.len(), p2.len(), "parents of unequal length");
    let m = p1.len();
    let (c1, c2) = if rng.gen::<f64>() < cfg.crossover_rate && m >= 2 {
        match cfg.crossover {
            CrossoverKind::SinglePoint => single_point(p1, p2, rng.gen_range(1..m)),
            CrossoverKind::Uniform => {
                let (mut c1, mut c2) = (p1.clone(), p2.clone());
                for i in 0..m {
                    if rng.gen::<bool>() {
                        c1.bits_mut()[i] = p2.get(i);
                        c2.bits_mut()[i] = p1.get(i);
                    }
                }
                (c1, c2)
            }
        }
    } else {
        (p1.clone(), p2.clone())
    };
    (repair(c1, rng), repair(c2, rng))
}

/// Flips each bit independently with probability `rate`; returns the count.
pub fn flip_bits<R: Rng + ?Sized>(ch: &mut Chromosome, rate: f64, rng: &mut R) -> usize {
    let mut flips = 0;
    for i in 0..ch.len() {
        if rng.gen::<f64>() < rate {
            ch.flip(i);
            flips += 1;
        }
    }
    flips
}

pub fn mutate<R: Rng + ?Sized>(mut ch: Chromosome, rng: &mut R, cfg: &GaConfig) -> Chromosome {
    flip_bits(&mut ch, cfg.mutation_rate, rng);
    repair(ch, rng)
}

/// Scores chromosomes in parallel; output order matches input order.
pub fn evaluate_population(
    chromosomes: Vec<Chromosome>,
    model: &ObjectiveModel,
    cache: &MeasureCache,
) -> Vec<ScoredIndividual> {
    chromosomes
        .into_par_iter()
        .map(|ch| {
            let objectives = evaluate(&ch, model, cache);
            ScoredIndividual::new(ch, objectives)
        })
        .collect()
}

/// Keeps `n` members of `combined`: whole fronts while they fit, then the
/// most isolated members of the first front that does not.
pub fn environmental_selection(
    mut combined: Vec<ScoredIndividual>,
    n: usize,
) -> Vec<ScoredIndividual> {
    let fronts = rank_and_crowd(&mut combined);
    let mut keep: Vec<usize> = Vec::with_capacity(n);
    for front in fronts {
        let room = n - keep.len();
        if front.len() <= room {
            keep.extend(front);
        } else {
            let mut front = front;
            front.sort_by(|&a, &b| {
                combined[b]
                    .crowding
                    .total_cmp(&combined[a].crowding)
                    .then(a.cmp(&b))
            });
            keep.extend_from_slice(&front[..room]);
        }
        if keep.len() == n {
            break;
        }
    }
    let mut slots: Vec<Option<ScoredIndividual>> = combined.into_iter().map(Some).collect();
    keep.into_iter()
        .map(|i| slots[i].take().expect("each index kept once"))
        .collect()
}

/// Summary of the first front at one generation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenerationStats {
    pub generation: usize,
    pub front_size: usize,
    pub min: [f64; 3],
    pub mean: [f64; 3],
    pub max: [f64; 3],
}

impl GenerationStats {
    fn of(generation: usize, pop: &[ScoredIndividual]) -> Self {
        let front: Vec<[f64; 3]> = pop
            .iter()
            .filter(|s| s.rank == 1)
            .map(|s| s.objectives.as_array())
            .collect();
        let mut min = [f64::INFINITY; 3];
        let mut max = [f64::NEG_INFINITY; 3];
        let mut mean = [0.0; 3];
        for v in &front {
            for k in 0..3 {
                min[k] = min[k].min(v[k]);
                max[k] = max[k].max(v[k]);
                mean[k] += v[k] / front.len() as f64;
            }
        }
        Self {
            generation,
            front_size: front.len(),
            min,
            mean,
            max,
        }
    }

    pub const CSV_HEADER: &'static str = "generation,front_size,f_sel_min,f_sel_mean,f_sel_max,f_unsel_min,f_unsel_mean,f_unsel_max,f_disp_min,f_disp_mean,f_disp_max";

    pub fn csv_row(&self) -> String {
        let mut cells = vec![self.generation.to_string(), self.front_size.to_string()];
        for k in 0..3 {
            cells.push(self.min[k].to_string());
            cells.push(self.mean[k].to_string());
            cells.push(self.max[k].to_string());
        }
        cells.join(",")
    }
}

pub fn trace_csv(trace: &[GenerationStats]) -> String {
    let mut out = String::from(GenerationStats::CSV_HEADER);
    out.push('\n');
    for g in trace {
        out.push_str(&g.csv_row());
        out.push('\n');
    }
    out
}

#[derive(Clone, Debug)]
pub struct Evolution {
    /// Rank-1 members of the final population, duplicates removed.
    pub front: Vec<ScoredIndividual>,
    pub trace: Vec<GenerationStats>,
}

/// Runs the GA; see [`evolve_observed`].
pub fn evolve(
    cache: &MeasureCache,
    model: &ObjectiveModel,
    cfg: &GaConfig,
) -> Result<Evolution, GaError> {
    evolve_observed(cache, model, cfg, |_, _| {})
}

/// Runs the GA, calling `observer(generation, population)` on the ranked and
/// crowded parent population of generations `0..=max_generations`.
pub fn evolve_observed<F>(
    cache: &MeasureCache,
    model: &ObjectiveModel,
    cfg: &GaConfig,
    mut observer: F,
) -> Result<Evolution, GaError>
where
    F: FnMut(usize, &[ScoredIndividual]),
{
    cfg.validate()?;
    let m = cache.n_features();
    if m < 3 {
        return Err(GaError::TooFewFeatures(m));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut pop = evaluate_population(init_population(m, cfg, &mut rng), model, cache);
    let mut trace = Vec::with_capacity(cfg.max_generations + 1);

    for generation in 0..=cfg.max_generations {
        rank_and_crowd(&mut pop);
        observer(generation, &pop);
        trace.push(GenerationStats::of(generation, &pop));
        if generation == cfg.max_generations {
            break;
        }

        let mut offspring = Vec::with_capacity(cfg.pop_size);
        while offspring.len() < cfg.pop_size {
            let a = tournament_select(&pop, &mut rng, cfg);
            let b = tournament_select(&pop, &mut rng, cfg);
            let (c1, c2) = crossover(&pop[a].chromosome, &pop[b].chromosome, &mut rng, cfg);
            offspring.push(mutate(c1, &mut rng, cfg));
            if offspring.len() < cfg.pop_size {
                offspring.push(mutate(c2, &mut rng, cfg));
            }
        }
        let mut combined = pop;
        combined.extend(evaluate_population(offspring, model, cache));
        pop = environmental_selection(combined, cfg.pop_size);
        debug_assert_eq!(pop.len(), cfg.pop_size);
    }

    let mut seen = HashSet::new();
    let front = pop
        .into_iter()
        .filter(|s| s.rank == 1)
        .filter(|s| seen.insert(s.chromosome.clone()))
        .collect();
    Ok(Evolution { front, trace })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub model: String,
    pub config: GaConfig,
    pub dataset_hash: String,
}

/// A mutually non-dominated set of scored feature masks.
#[derive(Clone, Debug)]
pub struct ParetoFront {
    pub members: Vec<ScoredIndividual>,
    pub provenance: Provenance,
}

impl ParetoFront {
    pub fn new(members: Vec<ScoredIndividual>, provenance: Provenance) -> Result<Self, GaError> {
        for (i, a) in members.iter().enumerate() {
            for (j, b) in members.iter().enumerate() {
                if dominates(&b.objectives, &a.objectives) {
                    return Err(GaError::DominatedMember(i, j));
                }
            }
        }
        Ok(Self {
            members,
            provenance,
        })
    }
}
