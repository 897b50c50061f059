//! Elitist evolutionary optimizer.
//!
//! Generation one holds every one-gene variant of control. Each later
//! generation keeps the top fraction of candidates (ranked by smoothed
//! posterior-mean conversion rate) and fills the remaining slots with
//! uniform crossovers of two elites followed by per-gene mutation. The
//! population size never changes. Observations accumulate per genome for the
//! whole run, so an elite carries its history forward. The final winner is
//! the tested genome with the highest probability to beat control.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evaluator::Evaluator;
use crate::genome::{Candidate, SearchSpace};
use crate::simstats::{
    allocate_evolution, global_prior, posterior, prob_beats_control, simulate_conversions,
    BetaPosterior, CandidateStats, DEFAULT_PRIOR_STRENGTH, PBC_TOLERANCE,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvolutionConfig {
    pub generations: usize,
    /// Per-gene probability of switching to a different value.
    pub mutation_rate: f64,
    pub elite_fraction: f64,
    /// Pseudo-observations behind the pooled prior.
    pub prior_strength: f64,
    pub seed: u64,
}

impl Default for EvolutionConfig {
    fn default() -> Self {
        Self {
            generations: 8,
            mutation_rate: 0.01,
            elite_fraction: 0.2,
            prior_strength: DEFAULT_PRIOR_STRENGTH,
            seed: 0,
        }
    }
}

impl EvolutionConfig {
    pub fn validate(&self) -> Result<()> {
        if self.generations == 0 {
            return Err(Error::Config("generations must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.mutation_rate) {
            return Err(Error::Config(format!(
                "mutation rate {} outside [0, 1]",
                self.mutation_rate
            )));
        }
        if !(self.elite_fraction > 0.0 && self.elite_fraction < 1.0) {
            return Err(Error::Config(format!(
                "elite fraction {} outside (0, 1)",
                self.elite_fraction
            )));
        }
        if !(self.prior_strength > 0.0 && self.prior_strength.is_finite()) {
            return Err(Error::Config("prior strength must be positive".into()));
        }
        Ok(())
    }

    pub fn elite_count(&self, population: usize) -> usize {
        // the epsilon keeps 0.2 × 10 from rounding up to 3
        ((self.elite_fraction * population as f64 - 1e-9).ceil() as usize).clamp(1, population)
    }
}

/// Impressions per generation per population slot, plus the control's share.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrafficPlan {
    pub slots: Vec<Vec<u64>>,
    pub control: Vec<u64>,
}

impl TrafficPlan {
    /// Splits `total` over `generations × (population + 1)` equal slots; the
    /// last slot of each generation is the control's.
    pub fn even(total: u64, generations: usize, population: usize) -> Result<Self> {
        let mut slots = allocate_evolution(total, generations, population + 1)?;
        let control = slots.iter_mut().map(|g| g.pop().unwrap()).collect();
        Ok(Self { slots, control })
    }

    pub fn total(&self) -> u64 {
        self.slots.iter().flatten().sum::<u64>() + self.control.iter().sum::<u64>()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenerationRecord {
    pub generation: usize,
    /// Each slot's candidate with the genome's accumulated stats at the end
    /// of this generation.
    pub population: Vec<(Candidate, CandidateStats)>,
    /// What each slot observed during this generation alone.
    pub served: Vec<CandidateStats>,
    /// Population indices of the elites carried forward, best first.
    pub elites: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvolutionRun {
    pub records: Vec<GenerationRecord>,
    pub winner: Candidate,
    pub winner_pbc: f64,
    pub control: CandidateStats,
    /// Every distinct genome tested, in order of first appearance.
    pub tested: Vec<(Candidate, CandidateStats)>,
    /// Mean true conversion rate over every impression served, control
    /// included.
    pub served_true_cr: f64,
}

pub fn init_population(space: &SearchSpace) -> Vec<Candidate> {
    space.one_gene_variants()
}

/// Ranks by posterior-mean conversion rate and returns the population
/// indices of the top distinct genomes, best first. Ties go to the earlier
/// slot.
pub fn select_elites(
    population: &[(Candidate, CandidateStats)],
    elite_fraction: f64,
    prior: &BetaPosterior,
) -> Result<Vec<usize>> {
    if population.is_empty() {
        return Err(Error::EmptyPopulation);
    }
    let config = EvolutionConfig {
        elite_fraction,
        ..Default::default()
    };
    let k = config.elite_count(population.len());
    let means: Vec<f64> = population
        .iter()
        .map(|(_, s)| posterior(s, prior).mean())
        .collect();
    let mut order: Vec<usize> = (0..population.len()).collect();
    order.sort_by(|&a, &b| means[b].total_cmp(&means[a]).then(a.cmp(&b)));

    let mut elites: Vec<usize> = Vec::with_capacity(k);
    for i in order {
        if elites.iter().any(|&e| population[e].0 == population[i].0) {
            continue;
        }
        elites.push(i);
        if elites.len() == k {
            break;
        }
    }
    Ok(elites)
}

/// Uniform crossover: each gene from either parent with probability ½.
pub fn crossover(a: &Candidate, b: &Candidate, rng: &mut impl Rng) -> Result<Candidate> {
    if a.len() != b.len() {
        return Err(Error::CandidateMismatch(format!(
            "parents have {} and {} genes",
            a.len(),
            b.len()
        )));
    }
    Ok(Candidate(
        a.choices()
            .iter()
            .zip(b.choices())
            .map(|(&x, &y)| if rng.random_bool(0.5) { x } else { y })
            .collect(),
    ))
}

/// With probability `rate` per gene, switch to a uniformly chosen different
/// value.
pub fn mutate(c: &Candidate, rate: f64, space: &SearchSpace, rng: &mut impl Rng) -> Candidate {
    Candidate(
        c.choices()
            .iter()
            .zip(space.cardinalities())
            .map(|(&v, &k)| {
                if rng.random_bool(rate) {
                    let r = rng.random_range(0..k - 1);
                    if r >= v {
                        r + 1
                    } else {
                        r
                    }
                } else {
                    v
                }
            })
            .collect(),
    )
}

/// Elites first, in rank order, then crossover children of two elites
/// (distinct when possible), each mutated.
pub fn next_generation(
    record: &GenerationRecord,
    config: &EvolutionConfig,
    space: &SearchSpace,
    rng: &mut impl Rng,
) -> Result<Vec<Candidate>> {
    if record.elites.is_empty() {
        return Err(Error::Config("no elites to breed from".into()));
    }
    let parents: Vec<&Candidate> = record
        .elites
        .iter()
        .map(|&i| &record.population[i].0)
        .collect();
    let size = record.population.len();
    let mut next: Vec<Candidate> = parents.iter().map(|&c| c.clone()).collect();
    while next.len() < size {
        let a = rng.random_range(0..parents.len());
        let b = if parents.len() > 1 {
            let j = rng.random_range(0..parents.len() - 1);
            if j >= a {
                j + 1
            } else {
                j
            }
        } else {
            a
        };
        let child = crossover(parents[a], parents[b], rng)?;
        next.push(mutate(&child, config.mutation_rate, space, rng));
    }
    Ok(next)
}

/// Runs every generation, then picks the winner by probability to beat
/// control under the pooled prior.
pub fn run_evolution(
    space: &SearchSpace,
    evaluator: &Evaluator,
    plan: &TrafficPlan,
    config: &EvolutionConfig,
    rng: &mut impl Rng,
) -> Result<EvolutionRun> {
    config.validate()?;
    let mut population = init_population(space);
    let size = population.len();
    if plan.slots.len() != config.generations || plan.control.len() != config.generations {
        return Err(Error::Config(format!(
            "traffic plan covers {} generations, config asks for {}",
            plan.slots.len(),
            config.generations
        )));
    }
    if let Some(g) = plan.slots.iter().position(|g| g.len() != size) {
        return Err(Error::Config(format!(
            "traffic plan generation {g} has {} slots, population has {size}",
            plan.slots[g].len()
        )));
    }

    let control_cr = evaluator.true_cr(&space.control())?;
    let mut index: HashMap<Candidate, usize> = HashMap::new();
    let mut tested: Vec<(Candidate, CandidateStats)> = Vec::new();
    let mut control = CandidateStats::default();
    let mut records = Vec::with_capacity(config.generations);
    let (mut cr_mass, mut impressions) = (0.0, 0u64);

    for g in 0..config.generations {
        let mut served = Vec::with_capacity(size);
        for (slot, cand) in population.iter().enumerate() {
            let n = plan.slots[g][slot];
            let cr = evaluator.true_cr(cand)?;
            let x = simulate_conversions(cr, n, rng);
            let i = *index.entry(cand.clone()).or_insert_with(|| {
                tested.push((cand.clone(), CandidateStats::default()));
                tested.len() - 1
            });
            tested[i].1.record(n, x);
            served.push(CandidateStats::new(n, x));
            cr_mass += cr * n as f64;
            impressions += n;
        }
        let n = plan.control[g];
        control.record(n, simulate_conversions(control_cr, n, rng));
        cr_mass += control_cr * n as f64;
        impressions += n;

        let prior = global_prior(
            tested.iter().map(|(_, s)| s).chain([&control]),
            config.prior_strength,
        )?;
        let with_stats: Vec<_> = population
            .iter()
            .map(|c| (c.clone(), tested[index[c]].1))
            .collect();
        let elites = select_elites(&with_stats, config.elite_fraction, &prior)?;
        let record = GenerationRecord {
            generation: g,
            population: with_stats,
            served,
            elites,
        };
        if g + 1 < config.generations {
            population = next_generation(&record, config, space, rng)?;
        }
        records.push(record);
    }

    let prior = global_prior(
        tested.iter().map(|(_, s)| s).chain([&control]),
        config.prior_strength,
    )?;
    let control_post = posterior(&control, &prior);
    let scored: Vec<(f64, f64)> = tested
        .iter()
        .map(|(_, stats)| {
            let post = posterior(stats, &prior);
            Ok((prob_beats_control(&post, &control_post)?, post.mean()))
        })
        .collect::<Result<_>>()?;
    // PBC saturates near 0 and 1 at high traffic; values closer than the
    // quadrature tolerance fall back to posterior mean
    let top = scored
        .iter()
        .map(|&(p, _)| p)
        .fold(f64::NEG_INFINITY, f64::max);
    let mut wi = 0;
    for (i, &(p, m)) in scored.iter().enumerate() {
        let (wp, wm) = scored[wi];
        if p >= top - PBC_TOLERANCE && (wp < top - PBC_TOLERANCE || m > wm) {
            wi = i;
        }
    }
    let winner_pbc = scored[wi].0;

    Ok(EvolutionRun {
        records,
        winner: tested[wi].0.clone(),
        winner_pbc,
        control,
        tested,
        served_true_cr: if impressions == 0 {
            control_cr
        } else {
            cr_mass / impressions as f64
        },
    })
}

impl EvolutionRun {
    /// `generation,slot,genome,impressions,conversions,true_cr,elite` with
    /// cumulative per-genome stats.
    pub fn to_csv(&self, evaluator: &Evaluator) -> Result<String> {
        let mut out =
            String::from("generation,slot,genome,impressions,conversions,true_cr,elite\n");
        for r in &self.records {
            for (slot, (c, s)) in r.population.iter().enumerate() {
                let genome: Vec<String> = c.choices().iter().map(|v| v.to_string()).collect();
                writeln!(
                    out,
                    "{},{},{},{},{},{:.6},{}",
                    r.generation,
                    slot,
                    genome.join(" "),
                    s.impressions,
                    s.conversions,
                    evaluator.true_cr(c)?,
                    u8::from(r.elites.contains(&slot)),
                )
                .unwrap();
            }
        }
        Ok(out)
    }

    pub fn write_csv(&self, evaluator: &Evaluator, path: &Path) -> Result<()> {
        fs::write(path, self.to_csv(evaluator)?).map_err(|e| Error::io(path, e))
    }
}
