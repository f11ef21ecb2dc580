//! Run configuration.
//!
//! The JSON layout is published as `schema/pipeline.schema.json`;
//! [`PipelineConfig::validate`] enforces the same constraints in code.

use std::fmt;
use std::path::{Path, PathBuf};

use gsprep_core::filter::{FilterParams, Rounds, MAX_N};
use gsprep_core::peps::EvolutionSchedule;
use gsprep_core::sampler::{default_sweeps, ChainOptions, MoveKind};
use gsprep_core::HeisenbergSpec;
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

pub const SCHEMA: &str = include_str!("../schema/pipeline.schema.json");

pub const MAX_BOND_DIM: usize = 64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub rows: usize,
    pub cols: usize,
    pub j1: f64,
    pub j2: f64,
}

impl ModelConfig {
    pub fn spec(&self) -> CliResult<HeisenbergSpec> {
        Ok(HeisenbergSpec::new(self.rows, self.cols, self.j1, self.j2)?)
    }

    pub fn num_sites(&self) -> usize {
        self.rows * self.cols
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StageConfig {
    pub tau: f64,
    pub steps: usize,
}

fn default_schedule() -> Vec<StageConfig> {
    EvolutionSchedule::default()
        .stages()
        .iter()
        .map(|&(tau, steps)| StageConfig { tau, steps })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PepsConfig {
    #[serde(default = "default_bond_dim")]
    pub bond_dim: usize,
    #[serde(default = "default_schedule")]
    pub schedule: Vec<StageConfig>,
    pub seed: u64,
}

fn default_bond_dim() -> usize {
    6
}

impl PepsConfig {
    pub fn schedule(&self) -> CliResult<EvolutionSchedule> {
        EvolutionSchedule::new(self.schedule.iter().map(|s| (s.tau, s.steps)).collect())
            .map_err(|e| CliError::config(format!("peps.schedule: {e}")))
    }
}

/// Number of trial components: fixed, or chosen by the cost model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TrialSize {
    #[default]
    Auto,
    Fixed(usize),
}

impl fmt::Display for TrialSize {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TrialSize::Auto => f.write_str("auto"),
            TrialSize::Fixed(m) => write!(f, "{m}"),
        }
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum CountOrWord {
    Count(usize),
    Word(String),
}

fn count_or_auto<'de, D: Deserializer<'de>>(d: D, what: &str) -> Result<Option<usize>, D::Error> {
    match CountOrWord::deserialize(d)? {
        CountOrWord::Count(n) => Ok(Some(n)),
        CountOrWord::Word(w) if w == "auto" => Ok(None),
        CountOrWord::Word(w) => Err(D::Error::custom(format!("{what} must be \"auto\" or a count, got {w:?}"))),
    }
}

impl Serialize for TrialSize {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            TrialSize::Auto => s.serialize_str("auto"),
            TrialSize::Fixed(m) => s.serialize_u64(*m as u64),
        }
    }
}

impl<'de> Deserialize<'de> for TrialSize {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        Ok(count_or_auto(d, "sampler.m")?.map_or(TrialSize::Auto, TrialSize::Fixed))
    }
}

mod rounds_serde {
    use super::*;

    pub fn serialize<S: Serializer>(r: &Rounds, s: S) -> Result<S::Ok, S::Error> {
        match r {
            Rounds::Auto => s.serialize_str("auto"),
            Rounds::Fixed(j) => s.serialize_u64(*j as u64),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Rounds, D::Error> {
        Ok(count_or_auto(d, "filter.rounds")?.map_or(Rounds::Auto, Rounds::Fixed))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplerConfig {
    /// Defaults to a size-dependent count.
    #[serde(default)]
    pub sweeps: Option<usize>,
    /// Discarded sweeps before recording; a tenth of `sweeps` by default.
    #[serde(default)]
    pub burn_in: Option<usize>,
    #[serde(default = "default_chains")]
    pub chains: usize,
    pub seed: u64,
    #[serde(default)]
    pub m: TrialSize,
    #[serde(default, rename = "move")]
    pub move_kind: MoveKind,
}

fn default_chains() -> usize {
    4
}

impl SamplerConfig {
    pub fn chain_options(&self, num_sites: usize) -> ChainOptions {
        let sweeps = self.sweeps.unwrap_or_else(|| default_sweeps(num_sites));
        let mut o = ChainOptions::new(sweeps, self.seed);
        if let Some(b) = self.burn_in {
            o.burn_in = b;
        }
        o.move_kind = self.move_kind;
        o
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FilterConfig {
    /// Filter degree, `2n`.
    #[serde(default = "default_filter_m")]
    pub m: usize,
    /// Truncation radius; the full sum when absent.
    #[serde(default)]
    pub m0: Option<usize>,
    #[serde(default = "default_chi")]
    pub chi: f64,
    #[serde(default = "default_eps")]
    pub eps: f64,
    /// Shift by the exact ground energy instead of the PEPS estimate.
    #[serde(default)]
    pub exact_shift: bool,
    #[serde(default, with = "rounds_serde")]
    pub rounds: Rounds,
}

fn default_filter_m() -> usize {
    100
}
fn default_chi() -> f64 {
    0.5
}
fn default_eps() -> f64 {
    1e-3
}

impl Default for FilterConfig {
    fn default() -> Self {
        FilterConfig {
            m: default_filter_m(),
            m0: None,
            chi: default_chi(),
            eps: default_eps(),
            exact_shift: false,
            rounds: Rounds::Auto,
        }
    }
}

impl FilterConfig {
    pub fn params(&self) -> CliResult<FilterParams> {
        let mut p = FilterParams::new(self.m).map_err(|e| CliError::config(format!("filter.m: {e}")))?;
        p.chi = self.chi;
        p.eps = self.eps;
        p.rounds = self.rounds;
        if let Some(m0) = self.m0 {
            p.m0 = m0;
        }
        p.validate().map_err(|e| CliError::config(format!("filter: {e}")))?;
        Ok(p)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CostConfig {
    /// Replaces the coupling 1-norm.
    #[serde(default)]
    pub lambda: Option<f64>,
    /// Replaces the exact spectral gap.
    #[serde(default)]
    pub gap: Option<f64>,
    /// Upper end of the `M` scan; `2^L` capped at 4096 when absent.
    #[serde(default)]
    pub m_max: Option<usize>,
    #[serde(default = "one")]
    pub classical_weight: f64,
}

fn one() -> f64 {
    1.0
}

impl Default for CostConfig {
    fn default() -> Self {
        CostConfig {
            lambda: None,
            gap: None,
            m_max: None,
            classical_weight: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub model: ModelConfig,
    pub peps: PepsConfig,
    pub sampler: SamplerConfig,
    #[serde(default)]
    pub filter: FilterConfig,
    #[serde(default)]
    pub cost: CostConfig,
    pub output_dir: PathBuf,
}

fn positive(x: f64) -> bool {
    x.is_finite() && x > 0.0
}

impl PipelineConfig {
    /// Defaults for a lattice, with explicit seeds.
    pub fn for_model(model: ModelConfig, seed: u64, output_dir: impl Into<PathBuf>) -> Self {
        PipelineConfig {
            model,
            peps: PepsConfig {
                bond_dim: default_bond_dim(),
                schedule: default_schedule(),
                seed,
            },
            sampler: SamplerConfig {
                sweeps: None,
                burn_in: None,
                chains: default_chains(),
                seed,
                m: TrialSize::Auto,
                move_kind: MoveKind::Flip,
            },
            filter: FilterConfig::default(),
            cost: CostConfig::default(),
            output_dir: output_dir.into(),
        }
    }

    pub fn validate(&self) -> CliResult<()> {
        self.model.spec()?;
        let p = &self.peps;
        if p.bond_dim == 0 || p.bond_dim > MAX_BOND_DIM {
            return Err(CliError::config(format!("peps.bond_dim = {} outside 1..={MAX_BOND_DIM}", p.bond_dim)));
        }
        p.schedule()?;
        let s = &self.sampler;
        if s.chains == 0 {
            return Err(CliError::config("sampler.chains must be at least 1"));
        }
        if s.sweeps == Some(0) {
            return Err(CliError::config("sampler.sweeps must be at least 1"));
        }
        if s.m == TrialSize::Fixed(0) {
            return Err(CliError::config("sampler.m must be at least 1"));
        }
        if self.filter.m > 2 * MAX_N {
            return Err(CliError::config(format!("filter.m = {} above {}", self.filter.m, 2 * MAX_N)));
        }
        self.filter.params()?;
        let c = &self.cost;
        if c.lambda.is_some_and(|x| !positive(x)) || c.gap.is_some_and(|x| !positive(x)) {
            return Err(CliError::config("cost.lambda and cost.gap must be positive"));
        }
        if !positive(c.classical_weight) {
            return Err(CliError::config("cost.classical_weight must be positive"));
        }
        if c.m_max == Some(0) {
            return Err(CliError::config("cost.m_max must be at least 1"));
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> CliResult<Self> {
        let cfg: PipelineConfig = serde_json::from_str(text).map_err(|e| CliError::config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::from_json(&text)
    }

    /// SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(&bytes))
    }
}

/// Reads a bare `{rows, cols, j1, j2}` model or the `model` section of a
/// full pipeline config.
pub fn load_model(path: &Path) -> CliResult<ModelConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    model_from_json(&text)
}

pub fn model_from_json(text: &str) -> CliResult<ModelConfig> {
    let v: serde_json::Value = serde_json::from_str(text).map_err(|e| CliError::config(e.to_string()))?;
    let model = if v.get("model").is_some() {
        PipelineConfig::from_json(text)?.model
    } else {
        serde_json::from_value(v).map_err(|e| CliError::config(e.to_string()))?
    };
    model.spec()?;
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn sample() -> serde_json::Value {
        json!({
            "model": {"rows": 4, "cols": 2, "j1": 1.0, "j2": 0.5},
            "peps": {"seed": 0},
            "sampler": {"seed": 3, "m": 16},
            "output_dir": "out"
        })
    }

    #[test]
    fn defaults_fill_in() {
        let c = PipelineConfig::from_json(&sample().to_string()).unwrap();
        assert_eq!(c.peps.bond_dim, 6);
        assert_eq!(c.peps.schedule.len(), 5);
        assert_eq!(c.sampler.m, TrialSize::Fixed(16));
        assert_eq!(c.filter.m, 100);
        assert_eq!(c.filter.rounds, Rounds::Auto);
        assert!(!c.filter.exact_shift);
        assert_eq!(c.sampler.chain_options(8).sweeps, default_sweeps(8));
    }

    #[test]
    fn seeds_are_required() {
        let mut v = sample();
        v["peps"] = json!({});
        assert!(PipelineConfig::from_json(&v.to_string()).is_err());
    }

    #[test]
    fn unknown_fields_and_bad_values_rejected() {
        let mut v = sample();
        v["filter"] = json!({"m": 7});
        assert!(PipelineConfig::from_json(&v.to_string()).is_err());
        let mut v = sample();
        v["model"]["extra"] = json!(1);
        assert!(PipelineConfig::from_json(&v.to_string()).is_err());
        let mut v = sample();
        v["sampler"]["m"] = json!("many");
        assert!(PipelineConfig::from_json(&v.to_string()).is_err());
        let mut v = sample();
        v["peps"]["schedule"] = json!([{"tau": 0.01, "steps": 3}, {"tau": 0.1, "steps": 3}]);
        assert!(PipelineConfig::from_json(&v.to_string()).is_err());
        let mut v = sample();
        v["sampler"]["sweeps"] = json!(0);
        assert!(PipelineConfig::from_json(&v.to_string()).is_err());
    }

    #[test]
    fn round_trip_and_hash() {
        let c = PipelineConfig::from_json(&sample().to_string()).unwrap();
        let text = serde_json::to_string(&c).unwrap();
        let back = PipelineConfig::from_json(&text).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.hash(), c.hash());
        assert_eq!(c.hash().len(), 64);
        let mut d = c.clone();
        d.sampler.seed += 1;
        assert_ne!(d.hash(), c.hash());
    }

    #[test]
    fn model_from_either_form() {
        let bare = model_from_json(r#"{"rows":2,"cols":2,"j1":1,"j2":0}"#).unwrap();
        assert_eq!(bare.num_sites(), 4);
        let full = model_from_json(&sample().to_string()).unwrap();
        assert_eq!(full.j2, 0.5);
    }

    fn collect_keys(v: &serde_json::Value, prefix: &str, out: &mut Vec<String>) {
        if let Some(map) = v.as_object() {
            for (k, x) in map {
                let path = format!("{prefix}/{k}");
                out.push(path.clone());
                if k != "schedule" {
                    collect_keys(x, &path, out);
                }
            }
        }
    }

    #[test]
    fn schema_covers_every_field() {
        let schema: serde_json::Value = serde_json::from_str(SCHEMA).unwrap();
        let c = PipelineConfig::from_json(&sample().to_string()).unwrap();
        let mut keys = Vec::new();
        collect_keys(&serde_json::to_value(&c).unwrap(), "", &mut keys);
        for key in keys {
            let mut node = &schema;
            for part in key.trim_start_matches('/').split('/') {
                node = &node["properties"][part];
                assert!(!node.is_null(), "schema lacks {key}");
            }
        }
        let required: Vec<&str> = schema["required"].as_array().unwrap().iter().map(|v| v.as_str().unwrap()).collect();
        assert_eq!(required, ["model", "peps", "sampler", "output_dir"]);
        assert_eq!(schema["properties"]["peps"]["required"], json!(["seed"]));
        assert_eq!(schema["properties"]["sampler"]["required"], json!(["seed"]));
    }
}
