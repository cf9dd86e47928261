//! Run configuration: defaults, a JSON override file and `key=value` settings,
//! merged with unknown keys rejected.

use coldbend_core::panel::PanelConfig;
use coldbend_core::shell::MeshOptions;
use coldbend_dataset::generate::DATASET_BOUNDARY_EDGES;
use coldbend_dataset::{EnrichConfig, GenerateConfig, SaddleRanges, SamplingRanges};
use coldbend_design::OptimizeConfig;
use coldbend_surrogate::TrainConfig;
use serde::{Deserialize, Serialize};
use serde_json::Value;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("unknown configuration key `{0}`")]
    UnknownKey(String),
    #[error("configuration key `{key}`: {message}")]
    BadValue { key: String, message: String },
    #[error("malformed setting `{0}`, expected key=value")]
    Setting(String),
    #[error("configuration: {0}")]
    Invalid(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetSection {
    pub count: usize,
    pub ranges: SamplingRanges,
    pub validation_fraction: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnrichSection {
    pub fraction: f64,
    pub min_probability: f64,
    /// Minimal interior-control difference of a new equilibrium (mm).
    pub novelty: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FamilySection {
    pub count: usize,
    pub ranges: SaddleRanges,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainSection {
    pub batch: usize,
    pub learning_rate: f64,
    pub l2: f64,
    pub patience: usize,
    pub max_epochs: usize,
    pub hidden: usize,
    pub blocks: usize,
}

/// Everything a run can be configured with; one seed drives all randomness.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Config {
    pub seed: u64,
    /// Simulation settings for dataset, enrichment and export panels.
    pub panel: PanelConfig,
    pub dataset: DatasetSection,
    pub enrich: EnrichSection,
    pub family: FamilySection,
    pub train: TrainSection,
    pub optimize: OptimizeConfig,
}

impl Default for Config {
    fn default() -> Self {
        let g = GenerateConfig::default();
        let e = EnrichConfig::new(g.panel);
        let t = TrainConfig::default();
        Self {
            seed: 1,
            panel: PanelConfig { mesh: MeshOptions::with_boundary_edges(DATASET_BOUNDARY_EDGES), ..PanelConfig::default() },
            dataset: DatasetSection { count: g.count, ranges: g.ranges, validation_fraction: g.validation_fraction },
            enrich: EnrichSection { fraction: e.fraction, min_probability: e.min_probability, novelty: e.novelty },
            family: FamilySection { count: 64, ranges: SaddleRanges::default() },
            train: TrainSection {
                batch: t.batch,
                learning_rate: t.learning_rate,
                l2: t.l2,
                patience: t.patience,
                max_epochs: t.max_epochs,
                hidden: t.hidden,
                blocks: t.blocks,
            },
            optimize: OptimizeConfig::default(),
        }
    }
}

/// Overlays `patch` onto `base`; every key of `patch` must exist in `base`
/// unless the base value is null (an unset option).
fn overlay(base: &mut Value, patch: &Value, path: &str) -> Result<(), ConfigError> {
    match (base, patch) {
        (Value::Object(b), Value::Object(p)) => {
            for (k, v) in p {
                let key = if path.is_empty() { k.clone() } else { format!("{path}.{k}") };
                let slot = b.get_mut(k).ok_or_else(|| ConfigError::UnknownKey(key.clone()))?;
                overlay(slot, v, &key)?;
            }
            Ok(())
        }
        (Value::Object(_), p) => Err(ConfigError::BadValue { key: path.into(), message: format!("expected an object, got {p}") }),
        (b, p) => {
            *b = p.clone();
            Ok(())
        }
    }
}

impl Config {
    /// Defaults, then the JSON document `file`, then each `key=value`
    /// setting (values are parsed as JSON, falling back to strings).
    pub fn resolve(file: Option<&Value>, settings: &[String]) -> Result<Self, ConfigError> {
        let mut v = serde_json::to_value(Config::default()).expect("default config serializes");
        if let Some(f) = file {
            if !f.is_object() {
                return Err(ConfigError::Invalid("the config file must hold a JSON object".into()));
            }
            overlay(&mut v, f, "")?;
        }
        for s in settings {
            let (key, raw) = s.split_once('=').ok_or_else(|| ConfigError::Setting(s.clone()))?;
            let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.into()));
            let mut patch = value;
            for part in key.rsplit('.') {
                patch = Value::Object([(part.to_string(), patch)].into_iter().collect());
            }
            overlay(&mut v, &patch, "")?;
        }
        let c: Config = serde_json::from_value(v).map_err(|e| ConfigError::Invalid(e.to_string()))?;
        c.check()?;
        Ok(c)
    }

    fn check(&self) -> Result<(), ConfigError> {
        let bad = |key: &str, message: &str| Err(ConfigError::BadValue { key: key.into(), message: message.into() });
        if !(0.0..1.0).contains(&self.dataset.validation_fraction) {
            return bad("dataset.validation_fraction", "must lie in [0, 1)");
        }
        if !(self.enrich.fraction >= 0.0 && self.enrich.fraction <= 1.0) {
            return bad("enrich.fraction", "must lie in [0, 1]");
        }
        if self.train.hidden == 0 || self.train.batch == 0 {
            return bad("train", "hidden width and batch size must be positive");
        }
        self.optimize.weights.validate().map_err(|e| ConfigError::BadValue { key: "optimize.weights".into(), message: e.to_string() })?;
        if !(self.panel.material.thickness > 0.0) {
            return bad("panel.material.thickness", "must be positive");
        }
        Ok(())
    }

    pub fn generate(&self) -> GenerateConfig {
        GenerateConfig {
            count: self.dataset.count,
            seed: self.seed,
            ranges: self.dataset.ranges,
            panel: self.panel,
            validation_fraction: self.dataset.validation_fraction,
            split_seed: self.seed.wrapping_add(1),
        }
    }

    pub fn enrich(&self) -> EnrichConfig {
        EnrichConfig {
            fraction: self.enrich.fraction,
            min_probability: self.enrich.min_probability,
            novelty: self.enrich.novelty,
            panel: self.panel,
        }
    }

    pub fn train(&self) -> TrainConfig {
        let t = &self.train;
        TrainConfig {
            batch: t.batch,
            learning_rate: t.learning_rate,
            l2: t.l2,
            patience: t.patience,
            max_epochs: t.max_epochs,
            seed: self.seed,
            hidden: t.hidden,
            blocks: t.blocks,
        }
    }
}
