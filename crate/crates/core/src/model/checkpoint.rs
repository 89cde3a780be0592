use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Mlcm, ModelConfig};
use crate::autograd::{ParamStore, Tensor};
use crate::features::Vocabulary;
use crate::schema::Roster;
use crate::{Error, Result};

pub const CHECKPOINT_FORMAT: &str = "storyqa-mlcm";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamRecord {
    pub name: String,
    pub shape: [usize; 2],
    /// Row-major.
    pub values: Vec<f64>,
}

/// Self-contained model file: header, configuration, vocabulary, roster and
/// every parameter tensor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub config: ModelConfig,
    pub roster: Roster,
    pub tokens: Vec<String>,
    pub name_flags: Vec<bool>,
    pub params: Vec<ParamRecord>,
}

impl Checkpoint {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("checkpoints serialize")
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        std::fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let ck: Checkpoint = serde_json::from_str(&text)
            .map_err(|e| Error::parse(format!("{} line {} column {}", path.display(), e.line(), e.column()), e.to_string()))?;
        if ck.format != CHECKPOINT_FORMAT || ck.version != CHECKPOINT_VERSION {
            return Err(Error::parse(
                path.display().to_string(),
                format!("unsupported checkpoint {} v{}", ck.format, ck.version),
            ));
        }
        Ok(ck)
    }
}

impl Mlcm {
    pub fn to_checkpoint(&self) -> Checkpoint {
        Checkpoint {
            format: CHECKPOINT_FORMAT.into(),
            version: CHECKPOINT_VERSION,
            config: self.config.clone(),
            roster: self.roster.clone(),
            tokens: self.tokens.clone(),
            name_flags: self.name_flags.clone(),
            params: self
                .params
                .iter()
                .map(|(name, t)| ParamRecord {
                    name: name.to_string(),
                    shape: [t.rows, t.cols],
                    values: t.data.clone(),
                })
                .collect(),
        }
    }

    pub fn from_checkpoint(ck: &Checkpoint) -> Result<Self> {
        ck.config.validate()?;
        let mut params = ParamStore::default();
        for p in &ck.params {
            if p.values.len() != p.shape[0] * p.shape[1] {
                return Err(Error::parse(format!("parameter {}", p.name), "shape does not match value count"));
            }
            params.add(&p.name, Tensor::from_vec(p.shape[0], p.shape[1], p.values.clone()));
        }
        let embed = params
            .id("embed")
            .ok_or_else(|| Error::parse("params", "missing embed"))?;
        let vocab = Vocabulary::from_parts(ck.tokens.clone(), ck.name_flags.clone(), params.value(embed).clone())?;
        Ok(Self::assemble(ck.config.clone(), params, ck.roster.clone(), &vocab))
    }
}

#[cfg(test)]
mod tests {
    use super::super::tests::fixture;
    use super::*;

    #[test]
    fn round_trip_preserves_scores() {
        let (m, enc) = fixture(ModelConfig::tiny());
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.json");
        m.to_checkpoint().save(&path).unwrap();
        let back = Mlcm::from_checkpoint(&Checkpoint::load(&path).unwrap()).unwrap();
        assert_eq!(back, m);
        assert_eq!(back.score(enc.batch(0)), m.score(enc.batch(0)));
    }
}
