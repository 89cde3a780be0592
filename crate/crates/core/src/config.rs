//! Run configuration: defaults, a flat `section.key = value` file format and
//! overrides.
//!
//! ```text
//! # comment
//! world.n_scenes = 40
//! world.shots_per_scene = [2, 4]
//! model.similarity = trilinear
//! model.limits.max_sent = 20
//! train.lr = 0.001
//! ```
//!
//! Values are read as JSON when they parse as JSON and as bare strings
//! otherwise. Unknown keys are rejected.

use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::baselines::{BaselineKind, QaVsConfig};
use crate::model::ModelConfig;
use crate::synth::WorldSpec;
use crate::train::{Embeddings, Experiment, TrainConfig};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub world: WorldSpec,
    /// Train, validation and test episode fractions.
    pub split: [f64; 3],
    pub model: ModelConfig,
    pub train: TrainConfig,
    /// Baseline scored by `eval` when no checkpoint is given.
    pub baseline: Option<BaselineKind>,
    pub qa_v_s: QaVsConfig,
    pub embeddings: Embeddings,
}

impl Default for RunConfig {
    /// Desk-scale defaults: the small model on 32-dimensional frame features.
    fn default() -> Self {
        let model = ModelConfig::small();
        Self {
            world: WorldSpec {
                feature_dim: model.d_v,
                ..WorldSpec::default()
            },
            split: [0.6, 0.2, 0.2],
            qa_v_s: QaVsConfig {
                d: model.d,
                d_w: model.d_w,
                d_v: model.d_v,
                ..QaVsConfig::default()
            },
            model,
            train: TrainConfig::default(),
            baseline: None,
            embeddings: Embeddings::default(),
        }
    }
}

impl RunConfig {
    pub fn experiment(&self) -> Experiment {
        Experiment {
            world: self.world.clone(),
            split: self.split,
            model: self.model.clone(),
            train: self.train.clone(),
            embeddings: self.embeddings.clone(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.world.validate()?;
        self.model.validate()?;
        self.train.validate()?;
        if self.world.feature_dim != self.model.d_v {
            return Err(Error::Config(format!(
                "world.feature_dim ({}) must equal model.d_v ({})",
                self.world.feature_dim, self.model.d_v
            )));
        }
        Ok(())
    }

    /// Applies `key = value` assignments on top of `self`.
    pub fn with_assignments<'a>(&self, items: impl IntoIterator<Item = (&'a str, &'a str)>) -> Result<Self> {
        let mut tree = serde_json::to_value(self).expect("run configs serialize");
        for (key, raw) in items {
            set_path(&mut tree, key, parse_value(raw))?;
        }
        let de = tree;
        serde_path_to_error::deserialize(de).map_err(|e| Error::Config(format!("{}: {}", e.path(), e.inner())))
    }

    /// Parses a config file body on top of the defaults.
    pub fn parse(text: &str) -> Result<Self> {
        Self::default().with_assignments(parse_lines(text)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    /// The config as `key = value` lines that [`RunConfig::parse`] reads back.
    pub fn to_flat(&self) -> String {
        let mut out = String::new();
        flatten("", &serde_json::to_value(self).expect("run configs serialize"), &mut out);
        out
    }
}

fn parse_lines(text: &str) -> Result<Vec<(&str, &str)>> {
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::parse(format!("config line {}", n + 1), "expected `key = value`"))?;
        out.push((k.trim(), v.trim()));
    }
    Ok(out)
}

fn parse_value(raw: &str) -> Value {
    serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()))
}

fn set_path(tree: &mut Value, key: &str, value: Value) -> Result<()> {
    let unknown = || Error::Config(format!("unknown key '{key}'"));
    let mut node = tree;
    let parts: Vec<&str> = key.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        let obj = node.as_object_mut().ok_or_else(unknown)?;
        let slot = obj.get_mut(*part).ok_or_else(unknown)?;
        if i + 1 == parts.len() {
            *slot = value;
            return Ok(());
        }
        if slot.is_null() {
            return Err(unknown());
        }
        if slot.is_string() {
            // enum slot switching to a data-carrying variant; serde checks the name
            let mut inner = value;
            for p in parts[i + 1..].iter().rev() {
                inner = Value::Object([(p.to_string(), inner)].into_iter().collect());
            }
            *slot = inner;
            return Ok(());
        }
        node = slot;
    }
    Err(unknown())
}

fn flatten(prefix: &str, v: &Value, out: &mut String) {
    match v {
        Value::Object(map) => {
            for (k, child) in map {
                let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                flatten(&key, child, out);
            }
        }
        other => out.push_str(&format!("{prefix} = {other}\n")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_consistent() {
        RunConfig::default().validate().unwrap();
    }

    #[test]
    fn file_overrides_defaults() {
        let c = RunConfig::parse("# x\nworld.n_scenes = 3\nmodel.similarity = trilinear\nmodel.limits.max_sent = 5\ntrain.lr=0.01\n").unwrap();
        assert_eq!(c.world.n_scenes, 3);
        assert_eq!(c.model.similarity, crate::model::Similarity::Trilinear);
        assert_eq!(c.model.limits.max_sent, 5);
        assert_eq!(c.train.lr, 0.01);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(matches!(RunConfig::parse("model.width = 3"), Err(Error::Config(_))));
        assert!(matches!(RunConfig::parse("nonsense = 1"), Err(Error::Config(_))));
        assert!(RunConfig::parse("model.d = \"eight\"").is_err());
        assert!(RunConfig::parse("just words").is_err());
    }

    #[test]
    fn flat_form_round_trips() {
        let mut c = RunConfig::default();
        c.world.custom_roster = Some(vec!["A".into(), "B".into(), "C".into(), "D".into()]);
        c.baseline = Some(BaselineKind::Longest);
        c.train.target_train_acc = Some(95.0);
        c.embeddings = Embeddings::File("vectors.txt".into());
        assert_eq!(RunConfig::parse(&c.to_flat()).unwrap(), c);
    }
}
