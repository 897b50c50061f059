use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evaluator::{Mode, WeightConfig};
use crate::evolution::EvolutionConfig;
use crate::genome::SearchSpace;
use crate::taguchi::{bundled, OrthogonalArray};

pub const DEFAULT_SWEEP: [u64; 9] = [
    1_000, 3_000, 10_000, 30_000, 100_000, 300_000, 1_000_000, 3_000_000, 10_000_000,
];

pub const PRESETS: [(&str, &str); 6] = [
    ("setting1-linear", "[2,2,2], linear, 4-row array"),
    ("setting2-linear", "[3,3,3,3], linear, 9-row array"),
    ("setting3-linear", "[4,4,4,4,4], linear, 16-row array"),
    ("mixed-linear", "[3,6,2,3,6,2,2,6], linear, 36-row array"),
    (
        "mixed-nonlinear",
        "[3,6,2,3,6,2,2,6], pairwise interactions, 36-row array",
    ),
    (
        "during-experiment",
        "[3,6,2,3,6,2,2,6], linear, average CR over served traffic",
    ),
];

/// Where the Taguchi design comes from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ArraySource {
    Bundled(String),
    File(PathBuf),
}

impl ArraySource {
    fn from_spec(s: &str, base: Option<&Path>) -> Self {
        if bundled::NAMES.contains(&s) {
            ArraySource::Bundled(s.to_string())
        } else {
            let p = PathBuf::from(s);
            ArraySource::File(match base {
                Some(dir) if p.is_relative() => dir.join(p),
                _ => p,
            })
        }
    }

    pub fn load(&self) -> Result<OrthogonalArray> {
        match self {
            ArraySource::Bundled(name) => bundled::by_name(name),
            ArraySource::File(path) => {
                let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
                OrthogonalArray::load(&text)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CurveKind {
    /// True CR of each method's final pick.
    Comparison,
    /// Impression-weighted true CR of everything served.
    During,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub name: String,
    pub space: SearchSpace,
    pub mode: Mode,
    pub weights: WeightConfig,
    pub array: ArraySource,
    pub evolution: EvolutionConfig,
    pub traffic: Vec<u64>,
    pub repetitions: usize,
    pub seed: u64,
    pub fixed_evaluator: bool,
    pub curve: CurveKind,
    pub out_dir: PathBuf,
}

impl ExperimentConfig {
    fn base(name: &str, space: &[usize], array: &str) -> Self {
        Self {
            name: name.to_string(),
            space: SearchSpace::new(space.to_vec()).expect("preset spaces are valid"),
            mode: Mode::Linear,
            weights: WeightConfig::default(),
            array: ArraySource::Bundled(array.to_string()),
            evolution: EvolutionConfig::default(),
            traffic: DEFAULT_SWEEP.to_vec(),
            repetitions: 20,
            seed: 2019,
            fixed_evaluator: false,
            curve: CurveKind::Comparison,
            out_dir: PathBuf::from("results"),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.weights.validate()?;
        self.evolution.validate()?;
        if self.repetitions == 0 {
            return Err(Error::Config("repetitions must be at least 1".into()));
        }
        if self.traffic.is_empty() {
            return Err(Error::Config("traffic sweep is empty".into()));
        }
        if self.traffic.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config(
                "traffic sweep must be strictly increasing".into(),
            ));
        }
        self.array.load()?.matches(&self.space)
    }

    /// Parses the key-value config format (TOML syntax). Relative array
    /// paths resolve against `base_dir`.
    pub fn from_toml(text: &str, base_dir: Option<&Path>) -> Result<Self> {
        let file: ConfigFile = toml::from_str(text)?;
        let space = SearchSpace::new(file.space)?;
        let defaults = WeightConfig::default();
        let evo = EvolutionConfig::default();
        let array = match file.array {
            Some(a) => ArraySource::from_spec(&a, base_dir),
            None => {
                let a = bundled::for_space(&space).ok_or_else(|| {
                    Error::Config(format!("no bundled array for space {space}; set `array`"))
                })?;
                let name = bundled::NAMES
                    .iter()
                    .find(|n| bundled::by_name(n).map(|b| b == a).unwrap_or(false))
                    .expect("for_space returns a bundled array");
                ArraySource::Bundled(name.to_string())
            }
        };
        let config = Self {
            name: file.name,
            space,
            mode: file.mode.as_deref().unwrap_or("linear").parse()?,
            weights: WeightConfig {
                bias: file.bias.unwrap_or(defaults.bias),
                delta_main: file.delta_main.unwrap_or(defaults.delta_main),
                delta_pair: file.delta_pair.unwrap_or(defaults.delta_pair),
            },
            array,
            evolution: EvolutionConfig {
                generations: file.generations.unwrap_or(evo.generations),
                mutation_rate: file.mutation_rate.unwrap_or(evo.mutation_rate),
                elite_fraction: file.elite_fraction.unwrap_or(evo.elite_fraction),
                prior_strength: file.prior_strength.unwrap_or(evo.prior_strength),
                seed: evo.seed,
            },
            traffic: file.traffic.unwrap_or_else(|| DEFAULT_SWEEP.to_vec()),
            repetitions: file.repetitions.unwrap_or(20),
            seed: file.seed.unwrap_or(2019),
            fixed_evaluator: file.fixed_evaluator.unwrap_or(false),
            curve: file.curve.unwrap_or(CurveKind::Comparison),
            out_dir: file
                .out
                .map(PathBuf::from)
                .unwrap_or_else(|| PathBuf::from("results")),
        };
        config.validate()?;
        Ok(config)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text, path.parent())
    }

    /// Stable text used for the manifest hash.
    pub fn canonical(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    name: String,
    space: Vec<usize>,
    mode: Option<String>,
    bias: Option<f64>,
    delta_main: Option<f64>,
    delta_pair: Option<f64>,
    array: Option<String>,
    generations: Option<usize>,
    mutation_rate: Option<f64>,
    elite_fraction: Option<f64>,
    prior_strength: Option<f64>,
    traffic: Option<Vec<u64>>,
    repetitions: Option<usize>,
    seed: Option<u64>,
    fixed_evaluator: Option<bool>,
    curve: Option<CurveKind>,
    out: Option<String>,
}

pub fn preset(name: &str) -> Result<ExperimentConfig> {
    const MIXED: [usize; 8] = [3, 6, 2, 3, 6, 2, 2, 6];
    let config = match name {
        "setting1-linear" => ExperimentConfig::base(name, &[2, 2, 2], "l4"),
        "setting2-linear" => ExperimentConfig::base(name, &[3, 3, 3, 3], "l9"),
        "setting3-linear" => ExperimentConfig::base(name, &[4, 4, 4, 4, 4], "l16"),
        "mixed-linear" => ExperimentConfig::base(name, &MIXED, "l36-mixed"),
        "mixed-nonlinear" => ExperimentConfig {
            mode: Mode::Nonlinear,
            ..ExperimentConfig::base(name, &MIXED, "l36-mixed")
        },
        "during-experiment" => ExperimentConfig {
            curve: CurveKind::During,
            ..ExperimentConfig::base(name, &MIXED, "l36-mixed")
        },
        other => return Err(Error::UnknownPreset(other.to_string())),
    };
    Ok(config)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_validate() {
        for (name, _) in PRESETS {
            let c = preset(name).unwrap();
            c.validate().unwrap();
            assert_eq!(c.repetitions, 20);
        }
        assert!(matches!(preset("nope"), Err(Error::UnknownPreset(_))));
    }

    #[test]
    fn parses_config_file() {
        let text = r#"
            name = "custom"
            space = [3,6,2,3,6,2,2,6]
            mode = "nonlinear"
            delta_main = 0.02
            traffic = [1000, 10000]
            repetitions = 4
            curve = "during"
        "#;
        let c = ExperimentConfig::from_toml(text, None).unwrap();
        assert_eq!(c.space.cardinalities(), &[3, 6, 2, 3, 6, 2, 2, 6]);
        assert_eq!(c.mode, Mode::Nonlinear);
        assert_eq!(c.weights.delta_main, 0.02);
        assert_eq!(c.weights.delta_pair, 0.005);
        assert_eq!(c.array, ArraySource::Bundled("l36-mixed".into()));
        assert_eq!(c.curve, CurveKind::During);
        assert_eq!(c.evolution.generations, 8);
    }

    #[test]
    fn rejects_bad_configs() {
        let cases = [
            "name = \"x\"\nspace = [3,3,3,3]\ntraffic = [100, 100]",
            "name = \"x\"\nspace = [3,3,3,3]\nrepetitions = 0",
            "name = \"x\"\nspace = [5,5]",
            "name = \"x\"\nspace = [3,3,3,3]\narray = \"l4\"",
            "name = \"x\"\nspace = [3,3,3,3]\nunknown = 1",
            "name = \"x\"\nspace = [3,3,3,3]\nmode = \"cubic\"",
        ];
        for text in cases {
            assert!(ExperimentConfig::from_toml(text, None).is_err(), "{text}");
        }
    }
}
