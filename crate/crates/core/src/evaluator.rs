//! Ground-truth conversion-rate models.
//!
//! The linear model is `bias + Σᵢ main[i][cᵢ]`; the nonlinear model adds one
//! term per variable pair, `Σ_{j<k} pair[j,k][cⱼ][cₖ]`. Entries touching a
//! control value (index 0) are always zero, so the control candidate converts
//! at exactly `bias`. Outputs are clamped to `[CR_MIN, CR_MAX]`.

use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::genome::{Candidate, SearchSpace};

pub const CR_MIN: f64 = 0.001;
pub const CR_MAX: f64 = 0.999;
pub const DEFAULT_ENUMERATION_CAP: u128 = 10_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Linear,
    Nonlinear,
}

impl std::str::FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linear" => Ok(Mode::Linear),
            "nonlinear" => Ok(Mode::Nonlinear),
            other => Err(Error::Config(format!("unknown evaluator mode `{other}`"))),
        }
    }
}

/// Bias and half-ranges for weight sampling.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightConfig {
    pub bias: f64,
    pub delta_main: f64,
    pub delta_pair: f64,
}

impl Default for WeightConfig {
    fn default() -> Self {
        Self {
            bias: 0.05,
            delta_main: 0.01,
            delta_pair: 0.005,
        }
    }
}

impl WeightConfig {
    /// A single non-control term must not be able to push a candidate out of
    /// `[0, 1]` on its own; sums of many terms are left to the clamp.
    pub fn validate(&self) -> Result<()> {
        let finite = [self.bias, self.delta_main, self.delta_pair]
            .iter()
            .all(|x| x.is_finite());
        if !finite {
            return Err(Error::Config("weights must be finite".into()));
        }
        if !(CR_MIN..=CR_MAX).contains(&self.bias) {
            return Err(Error::Config(format!(
                "bias {} outside [{CR_MIN}, {CR_MAX}]",
                self.bias
            )));
        }
        if self.delta_main <= 0.0 {
            return Err(Error::Config("delta_main must be positive".into()));
        }
        if self.delta_pair < 0.0 {
            return Err(Error::Config("delta_pair must be non-negative".into()));
        }
        let reach = self.delta_main + self.delta_pair;
        if self.bias - reach < 0.0 || self.bias + reach > 1.0 {
            return Err(Error::Config(format!(
                "bias {} ± {} leaves [0, 1]",
                self.bias, reach
            )));
        }
        Ok(())
    }
}

/// Interaction weights for one variable pair `first < second`, stored
/// row-major as `weights[a * levels_second + b]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairTable {
    pub first: usize,
    pub second: usize,
    pub levels_second: usize,
    pub weights: Vec<f64>,
}

impl PairTable {
    pub fn get(&self, a: usize, b: usize) -> f64 {
        self.weights[a * self.levels_second + b]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluator {
    pub space: SearchSpace,
    pub mode: Mode,
    pub bias: f64,
    pub main_effects: Vec<Vec<f64>>,
    pub interactions: Vec<PairTable>,
}

impl Evaluator {
    /// An evaluator with every weight zero.
    pub fn flat(space: SearchSpace, mode: Mode, bias: f64) -> Self {
        let main_effects = space
            .cardinalities()
            .iter()
            .map(|&k| vec![0.0; k])
            .collect();
        let interactions = match mode {
            Mode::Linear => Vec::new(),
            Mode::Nonlinear => pair_tables(&space, |_, _| 0.0),
        };
        Self {
            space,
            mode,
            bias,
            main_effects,
            interactions,
        }
    }

    /// Draws non-control weights uniformly from `[-δ, δ]`.
    pub fn sample(
        space: &SearchSpace,
        mode: Mode,
        weights: &WeightConfig,
        seed: u64,
    ) -> Result<Self> {
        weights.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut uniform = |half: f64| half * (2.0 * rng.random::<f64>() - 1.0);

        let main_effects = space
            .cardinalities()
            .iter()
            .map(|&k| {
                let mut row = vec![0.0; k];
                for w in row.iter_mut().skip(1) {
                    *w = uniform(weights.delta_main);
                }
                row
            })
            .collect();
        let interactions = match mode {
            Mode::Linear => Vec::new(),
            Mode::Nonlinear => pair_tables(space, |_, _| uniform(weights.delta_pair)),
        };
        Ok(Self {
            space: space.clone(),
            mode,
            bias: weights.bias,
            main_effects,
            interactions,
        })
    }

    /// Unclamped model output.
    pub fn raw_cr(&self, c: &Candidate) -> Result<f64> {
        self.space.check(c)?;
        let x = c.choices();
        let mut cr = self.bias;
        for (row, &v) in self.main_effects.iter().zip(x) {
            cr += row[v];
        }
        for t in &self.interactions {
            cr += t.get(x[t.first], x[t.second]);
        }
        Ok(cr)
    }

    pub fn true_cr(&self, c: &Candidate) -> Result<f64> {
        Ok(self.raw_cr(c)?.clamp(CR_MIN, CR_MAX))
    }

    /// Exhaustive argmax over the space; lexicographically smallest on ties.
    pub fn brute_force_best(&self, cap: u128) -> Result<(Candidate, f64)> {
        let combinations = self.space.combinations();
        if combinations > cap {
            return Err(Error::CapExceeded { combinations, cap });
        }
        let mut best: Option<(Candidate, f64)> = None;
        for c in self.space.iter_all() {
            let cr = self.true_cr(&c)?;
            if best.as_ref().is_none_or(|(_, b)| cr > *b) {
                best = Some((c, cr));
            }
        }
        Ok(best.expect("search space is never empty"))
    }

    pub fn save_json(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load_json(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}

fn pair_tables(space: &SearchSpace, mut draw: impl FnMut(usize, usize) -> f64) -> Vec<PairTable> {
    let ks = space.cardinalities();
    let mut tables = Vec::with_capacity(ks.len() * (ks.len() - 1) / 2);
    for first in 0..ks.len() {
        for second in first + 1..ks.len() {
            let (ka, kb) = (ks[first], ks[second]);
            let mut weights = vec![0.0; ka * kb];
            for a in 1..ka {
                for b in 1..kb {
                    weights[a * kb + b] = draw(a, b);
                }
            }
            tables.push(PairTable {
                first,
                second,
                levels_second: kb,
                weights,
            });
        }
    }
    tables
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn space(v: &[usize]) -> SearchSpace {
        SearchSpace::new(v.to_vec()).unwrap()
    }

    /// Per-variable argmax of the main effects, ties to the lowest index.
    fn separable_best(ev: &Evaluator) -> Candidate {
        Candidate(
            ev.main_effects
                .iter()
                .map(|row| {
                    let mut best = 0;
                    for (v, &w) in row.iter().enumerate() {
                        if w > row[best] {
                            best = v;
                        }
                    }
                    best
                })
                .collect(),
        )
    }

    #[test]
    fn sampling_is_deterministic() {
        let s = space(&[3, 3, 3, 3]);
        let w = WeightConfig::default();
        let a = Evaluator::sample(&s, Mode::Nonlinear, &w, 7).unwrap();
        let b = Evaluator::sample(&s, Mode::Nonlinear, &w, 7).unwrap();
        assert_eq!(a, b);
        let c = Evaluator::sample(&s, Mode::Nonlinear, &w, 8).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn linear_has_no_interactions() {
        let ev = Evaluator::sample(
            &space(&[3, 6, 2]),
            Mode::Linear,
            &WeightConfig::default(),
            3,
        )
        .unwrap();
        assert!(ev.interactions.is_empty());
    }

    #[test]
    fn sampled_entries_respect_range_and_control_zero() {
        let w = WeightConfig {
            delta_main: 0.01,
            ..Default::default()
        };
        let ev = Evaluator::sample(&space(&[3, 3, 3, 3]), Mode::Nonlinear, &w, 1).unwrap();
        for row in &ev.main_effects {
            assert_eq!(row[0], 0.0);
            assert!(row.iter().all(|x| x.abs() <= 0.01));
        }
        assert_eq!(ev.interactions.len(), 6);
        for t in &ev.interactions {
            for a in 0..3 {
                for b in 0..3 {
                    let x = t.get(a, b);
                    if a == 0 || b == 0 {
                        assert_eq!(x, 0.0);
                    } else {
                        assert!(x.abs() <= w.delta_pair);
                    }
                }
            }
        }
    }

    #[test]
    fn rejects_bad_weights() {
        let s = space(&[2, 2]);
        let bad = [
            WeightConfig {
                delta_main: 0.0,
                ..Default::default()
            },
            WeightConfig {
                delta_pair: -0.1,
                ..Default::default()
            },
            WeightConfig {
                delta_main: 0.06,
                ..Default::default()
            },
            WeightConfig {
                bias: 0.0,
                ..Default::default()
            },
            WeightConfig {
                bias: f64::NAN,
                ..Default::default()
            },
        ];
        for w in bad {
            assert!(matches!(
                Evaluator::sample(&s, Mode::Linear, &w, 0),
                Err(Error::Config(_))
            ));
        }
    }

    #[test]
    fn control_converts_at_bias() {
        for seed in 0..20 {
            for mode in [Mode::Linear, Mode::Nonlinear] {
                let s = space(&[3, 6, 2, 3, 6, 2, 2, 6]);
                let ev = Evaluator::sample(&s, mode, &WeightConfig::default(), seed).unwrap();
                assert_eq!(ev.true_cr(&s.control()).unwrap(), 0.05);
            }
        }
    }

    #[test]
    fn flat_evaluator_is_bias_everywhere() {
        let s = space(&[3, 2, 4]);
        let ev = Evaluator::flat(s.clone(), Mode::Nonlinear, 0.05);
        for c in s.iter_all() {
            assert_eq!(ev.true_cr(&c).unwrap(), 0.05);
        }
        assert_eq!(
            ev.brute_force_best(DEFAULT_ENUMERATION_CAP).unwrap(),
            (s.control(), 0.05)
        );
    }

    #[test]
    fn hand_summed_pair_model() {
        let s = space(&[2, 2]);
        let mut ev = Evaluator::flat(s, Mode::Nonlinear, 0.05);
        ev.main_effects[0][1] = 0.02;
        ev.main_effects[1][1] = -0.01;
        ev.interactions[0].weights[3] = 0.005;
        let cr = ev.true_cr(&Candidate(vec![1, 1])).unwrap();
        assert!((cr - 0.065).abs() < 1e-15);
        assert!(ev.true_cr(&Candidate(vec![1, 2])).is_err());
        assert!(ev.true_cr(&Candidate(vec![1])).is_err());
    }

    #[test]
    fn clamps_to_probability_range() {
        let s = space(&[2, 2]);
        let mut ev = Evaluator::flat(s, Mode::Linear, 0.05);
        ev.main_effects[0][1] = -0.5;
        assert_eq!(ev.true_cr(&Candidate(vec![1, 0])).unwrap(), CR_MIN);
        ev.main_effects[0][1] = 2.0;
        assert_eq!(ev.true_cr(&Candidate(vec![1, 0])).unwrap(), CR_MAX);
    }

    #[test]
    fn brute_force_cap() {
        let ev = Evaluator::flat(space(&[10; 8]), Mode::Linear, 0.05);
        assert!(matches!(
            ev.brute_force_best(DEFAULT_ENUMERATION_CAP),
            Err(Error::CapExceeded { .. })
        ));
    }

    #[test]
    fn linear_best_is_separable() {
        let s = space(&[3, 3, 3, 3]);
        for seed in 0..150 {
            let ev = Evaluator::sample(&s, Mode::Linear, &WeightConfig::default(), seed).unwrap();
            let (best, cr) = ev.brute_force_best(DEFAULT_ENUMERATION_CAP).unwrap();
            assert_eq!(best, separable_best(&ev), "seed {seed}");
            assert_eq!(cr, ev.true_cr(&best).unwrap());
        }
    }

    #[test]
    fn nonlinear_oracle_checks_all_81() {
        let s = space(&[3, 3, 3, 3]);
        let ev = Evaluator::sample(&s, Mode::Nonlinear, &WeightConfig::default(), 11).unwrap();
        let (best, cr) = ev.brute_force_best(DEFAULT_ENUMERATION_CAP).unwrap();
        let all: Vec<f64> = s.iter_all().map(|c| ev.true_cr(&c).unwrap()).collect();
        assert_eq!(all.len(), 81);
        assert!(all.iter().all(|&x| x <= cr));
        assert_eq!(ev.true_cr(&best).unwrap(), cr);
    }

    #[test]
    fn json_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ev.json");
        let ev = Evaluator::sample(
            &space(&[3, 2, 2]),
            Mode::Nonlinear,
            &WeightConfig::default(),
            5,
        )
        .unwrap();
        ev.save_json(&path).unwrap();
        assert_eq!(Evaluator::load_json(&path).unwrap(), ev);
    }

    proptest! {
        #[test]
        fn outputs_stay_clamped(seed in any::<u64>(), c in prop::collection::vec(0usize..3, 4)) {
            let w = WeightConfig { bias: 0.02, delta_main: 0.015, delta_pair: 0.005 };
            let ev = Evaluator::sample(&space(&[3, 3, 3, 3]), Mode::Nonlinear, &w, seed).unwrap();
            let cr = ev.true_cr(&Candidate(c)).unwrap();
            prop_assert!((CR_MIN..=CR_MAX).contains(&cr));
        }

        #[test]
        fn raising_a_main_effect_never_lowers_cr(
            seed in any::<u64>(),
            var in 0usize..4,
            value in 0usize..3,
            bump in 0.0f64..0.01,
        ) {
            let s = space(&[3, 3, 3, 3]);
            let ev = Evaluator::sample(&s, Mode::Nonlinear, &WeightConfig::default(), seed).unwrap();
            let mut raised = ev.clone();
            raised.main_effects[var][value] += bump;
            for c in s.iter_all().filter(|c| c.choices()[var] == value) {
                prop_assert!(raised.true_cr(&c).unwrap() >= ev.true_cr(&c).unwrap());
            }
        }
    }
}
