use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::config::{CurveKind, ExperimentConfig};
use crate::error::{Error, Result};
use crate::evaluator::Evaluator;
use crate::evolution::{run_evolution, EvolutionConfig, TrafficPlan};
use crate::seed;
use crate::simstats::{aggregate_runs, allocate_taguchi, simulate_conversions, Interval};
use crate::taguchi::OrthogonalArray;

const TAG_EVALUATOR: u64 = 1;
const TAG_TAGUCHI: u64 = 2;
const TAG_EVOLUTION: u64 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Evolution,
    TaguchiPredict,
    TaguchiCandidate,
    /// Taguchi's served-traffic average, where predict and candidate coincide.
    Taguchi,
}

impl Method {
    pub fn label(self) -> &'static str {
        match self {
            Method::Evolution => "evolution",
            Method::TaguchiPredict => "taguchi-predict",
            Method::TaguchiCandidate => "taguchi-candidate",
            Method::Taguchi => "taguchi",
        }
    }

    pub fn for_curve(kind: CurveKind) -> &'static [Method] {
        match kind {
            CurveKind::Comparison => &[
                Method::Evolution,
                Method::TaguchiPredict,
                Method::TaguchiCandidate,
            ],
            CurveKind::During => &[Method::Evolution, Method::Taguchi],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SeriesPoint {
    pub traffic: u64,
    pub method: Method,
    pub interval: Interval,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResultSeries {
    pub name: String,
    pub kind: CurveKind,
    /// Ordered by traffic, then by method.
    pub points: Vec<SeriesPoint>,
}

impl ResultSeries {
    pub fn get(&self, traffic: u64, method: Method) -> Option<&Interval> {
        self.points
            .iter()
            .find(|p| p.traffic == traffic && p.method == method)
            .map(|p| &p.interval)
    }

    pub fn traffic_values(&self) -> Vec<u64> {
        let mut t: Vec<u64> = self.points.iter().map(|p| p.traffic).collect();
        t.dedup();
        t
    }

    pub fn methods(&self) -> Vec<Method> {
        let mut m: Vec<Method> = self.points.iter().map(|p| p.method).collect();
        m.sort();
        m.dedup();
        m
    }
}

/// How Taguchi rows are scored.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scoring {
    /// Observed conversion rate from simulated traffic.
    Observed,
    /// The rows' true conversion rates.
    Noiseless,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TaguchiOutcome {
    pub predict_cr: f64,
    pub candidate_cr: f64,
    /// Impression-weighted true CR of the tested rows.
    pub served_true_cr: f64,
}

/// One repetition at one traffic level, both arms on the same evaluator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Trial {
    pub traffic: u64,
    pub repetition: usize,
    pub evolution_cr: f64,
    pub taguchi_predict_cr: f64,
    pub taguchi_candidate_cr: f64,
    pub evolution_served_cr: f64,
    pub taguchi_served_cr: f64,
}

/// Splits traffic evenly over the array rows, scores rows by observed rate,
/// and reports the true CR of the predicted-best and best-tested rows.
pub fn run_taguchi_arm(
    array: &OrthogonalArray,
    evaluator: &Evaluator,
    total_traffic: u64,
    scoring: Scoring,
    rng: &mut impl Rng,
) -> Result<TaguchiOutcome> {
    array.matches(&evaluator.space)?;
    let allocation = allocate_taguchi(total_traffic, array.num_rows())?;
    let truth: Vec<f64> = array
        .candidates()
        .iter()
        .map(|c| evaluator.true_cr(c))
        .collect::<Result<_>>()?;
    let scores: Vec<f64> = match scoring {
        Scoring::Observed => truth
            .iter()
            .zip(&allocation)
            .map(|(&cr, &n)| simulate_conversions(cr, n, rng) as f64 / n as f64)
            .collect(),
        Scoring::Noiseless => truth.clone(),
    };
    let served = truth
        .iter()
        .zip(&allocation)
        .map(|(&cr, &n)| cr * n as f64)
        .sum::<f64>()
        / total_traffic as f64;
    Ok(TaguchiOutcome {
        predict_cr: evaluator.true_cr(&array.predict_best(&scores)?)?,
        candidate_cr: evaluator.true_cr(&array.best_tested(&scores)?)?,
        served_true_cr: served,
    })
}

fn evaluator_for(config: &ExperimentConfig, repetition: usize) -> Result<Evaluator> {
    let rep = if config.fixed_evaluator {
        0
    } else {
        repetition as u64
    };
    Evaluator::sample(
        &config.space,
        config.mode,
        &config.weights,
        seed::derive(config.seed, &[TAG_EVALUATOR, rep]),
    )
}

/// The evaluator used for a repetition, for audit dumps.
pub fn evaluators(config: &ExperimentConfig) -> Result<Vec<Evaluator>> {
    (0..config.repetitions)
        .map(|r| evaluator_for(config, r))
        .collect()
}

fn run_trial(
    config: &ExperimentConfig,
    array: &OrthogonalArray,
    evaluator: &Evaluator,
    traffic: u64,
    repetition: usize,
) -> Result<Trial> {
    let rep = repetition as u64;
    let mut taguchi_rng = seed::rng(config.seed, &[TAG_TAGUCHI, traffic, rep]);
    let taguchi = run_taguchi_arm(
        array,
        evaluator,
        traffic,
        Scoring::Observed,
        &mut taguchi_rng,
    )?;

    let evo_config = EvolutionConfig {
        seed: seed::derive(config.seed, &[TAG_EVOLUTION, traffic, rep]),
        ..config.evolution
    };
    let plan = TrafficPlan::even(
        traffic,
        evo_config.generations,
        config.space.neighbourhood_size(),
    )?;
    let mut evo_rng = ChaCha8Rng::seed_from_u64(evo_config.seed);
    let evo = run_evolution(&config.space, evaluator, &plan, &evo_config, &mut evo_rng)?;

    Ok(Trial {
        traffic,
        repetition,
        evolution_cr: evaluator.true_cr(&evo.winner)?,
        taguchi_predict_cr: taguchi.predict_cr,
        taguchi_candidate_cr: taguchi.candidate_cr,
        evolution_served_cr: evo.served_true_cr,
        taguchi_served_cr: taguchi.served_true_cr,
    })
}

/// Every (traffic, repetition) trial, ordered by traffic then repetition.
/// Trials run in parallel; each owns seeds derived from the master seed.
pub fn run_trials(config: &ExperimentConfig) -> Result<Vec<Trial>> {
    config.validate()?;
    let array = config.array.load()?;
    let evaluators = evaluators(config)?;
    let tasks: Vec<(u64, usize)> = config
        .traffic
        .iter()
        .flat_map(|&t| (0..config.repetitions).map(move |r| (t, r)))
        .collect();
    tasks
        .par_iter()
        .map(|&(t, r)| run_trial(config, &array, &evaluators[r], t, r))
        .collect()
}

pub fn series_from_trials(
    config: &ExperimentConfig,
    kind: CurveKind,
    trials: &[Trial],
) -> Result<ResultSeries> {
    let mut points = Vec::new();
    for &traffic in &config.traffic {
        let at: Vec<&Trial> = trials.iter().filter(|t| t.traffic == traffic).collect();
        for &method in Method::for_curve(kind) {
            let values: Vec<f64> = at
                .iter()
                .map(|t| match method {
                    Method::Evolution if kind == CurveKind::During => t.evolution_served_cr,
                    Method::Evolution => t.evolution_cr,
                    Method::TaguchiPredict => t.taguchi_predict_cr,
                    Method::TaguchiCandidate => t.taguchi_candidate_cr,
                    Method::Taguchi => t.taguchi_served_cr,
                })
                .collect();
            let interval = if values.len() == 1 {
                Interval {
                    mean: values[0],
                    lo: values[0],
                    hi: values[0],
                }
            } else {
                aggregate_runs(&values)?
            };
            points.push(SeriesPoint {
                traffic,
                method,
                interval,
            });
        }
    }
    if points.is_empty() {
        return Err(Error::EmptySeries);
    }
    Ok(ResultSeries {
        name: config.name.clone(),
        kind,
        points,
    })
}

pub fn run_comparison(config: &ExperimentConfig) -> Result<ResultSeries> {
    series_from_trials(config, CurveKind::Comparison, &run_trials(config)?)
}

pub fn run_during_experiment_curve(config: &ExperimentConfig) -> Result<ResultSeries> {
    series_from_trials(config, CurveKind::During, &run_trials(config)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evaluator::{Mode, WeightConfig, DEFAULT_ENUMERATION_CAP};
    use crate::genome::SearchSpace;
    use crate::harness::config::preset;
    use crate::taguchi::bundled;

    #[test]
    fn noiseless_linear_predict_hits_optimum() {
        let array = bundled::by_name("l9").unwrap();
        let space = SearchSpace::new(vec![3; 4]).unwrap();
        let mut rng = seed::rng(0, &[]);
        for s in 0..30 {
            let ev = Evaluator::sample(&space, Mode::Linear, &WeightConfig::default(), s).unwrap();
            let out = run_taguchi_arm(&array, &ev, 900, Scoring::Noiseless, &mut rng).unwrap();
            let (_, best) = ev.brute_force_best(DEFAULT_ENUMERATION_CAP).unwrap();
            assert_eq!(out.predict_cr, best);
        }
    }

    #[test]
    fn flat_landscape_gives_bias() {
        let array = bundled::by_name("l9").unwrap();
        let ev = Evaluator::flat(SearchSpace::new(vec![3; 4]).unwrap(), Mode::Linear, 0.05);
        let mut rng = seed::rng(1, &[]);
        let out = run_taguchi_arm(&array, &ev, 10_000, Scoring::Observed, &mut rng).unwrap();
        assert_eq!(out.predict_cr, 0.05);
        assert_eq!(out.candidate_cr, 0.05);
    }

    #[test]
    fn single_row_served_average() {
        let array = OrthogonalArray::new(vec![2], vec![vec![1]]).unwrap();
        let space = SearchSpace::new(vec![2]).unwrap();
        let ev = Evaluator::sample(&space, Mode::Linear, &WeightConfig::default(), 3).unwrap();
        let truth = ev.true_cr(&crate::genome::Candidate(vec![1])).unwrap();
        let mut rng = seed::rng(2, &[]);
        for total in [1, 10, 1000] {
            let out = run_taguchi_arm(&array, &ev, total, Scoring::Observed, &mut rng).unwrap();
            assert!((out.served_true_cr - truth).abs() < 1e-15);
        }
    }

    #[test]
    fn mismatched_array_is_rejected() {
        let array = bundled::by_name("l4").unwrap();
        let ev = Evaluator::flat(SearchSpace::new(vec![3; 4]).unwrap(), Mode::Linear, 0.05);
        let mut rng = seed::rng(0, &[]);
        assert!(matches!(
            run_taguchi_arm(&array, &ev, 100, Scoring::Observed, &mut rng),
            Err(Error::ArrayMismatch(_))
        ));
    }

    #[test]
    fn generation_one_only_traffic_matches_population_mean() {
        // with a single generation every slot gets equal traffic, so the
        // served average is the mean over one-gene variants and control
        let mut config = preset("setting2-linear").unwrap();
        config.evolution.generations = 1;
        config.traffic = vec![9_000];
        config.repetitions = 2;
        let trials = run_trials(&config).unwrap();
        for t in &trials {
            let ev = evaluator_for(&config, t.repetition).unwrap();
            let mut all = config.space.one_gene_variants();
            all.push(config.space.control());
            let mean = all.iter().map(|c| ev.true_cr(c).unwrap()).sum::<f64>() / all.len() as f64;
            assert!((t.evolution_served_cr - mean).abs() < 1e-12);
        }
    }

    #[test]
    fn small_sweep_is_deterministic_and_ordered() {
        let mut config = preset("setting1-linear").unwrap();
        config.traffic = vec![1_000, 10_000];
        config.repetitions = 3;
        let a = run_comparison(&config).unwrap();
        let b = run_comparison(&config).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.points.len(), 6);
        for p in &a.points {
            assert!(p.interval.lo <= p.interval.mean && p.interval.mean <= p.interval.hi);
        }
        let d = run_during_experiment_curve(&config).unwrap();
        assert_eq!(d.methods(), vec![Method::Evolution, Method::Taguchi]);
    }
}
