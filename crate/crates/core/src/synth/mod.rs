//! Seeded generator of synthetic drama worlds and five-way QA items.
//!
//! A world is a list of scenes. Each scene yields one `SCENE` clip and one
//! `SHOT` clip per shot, sharing frames and dialogue. Every planted
//! [`SupportingFact`] is witnessed by frames or dialogue of its shot, and
//! [`CausalLink`]s tie an action in one shot to a reaction in a later shot.
//! QA items are instantiated from templates over these records so that a
//! rule-based [`solve_by_oracle`] can always recover the answer.

mod facts;
pub mod lexicon;
mod oracle;
mod qa;
mod split;
mod templates;
mod world;

pub use facts::{CausalLink, Clause, FactFile, FactObject, Relation, SupportingFact};
pub use oracle::solve_by_oracle;
pub use qa::{generate_dataset, generate_qa, QaGenerator};
pub use split::{split_dataset, Split, SplitSet};
pub use templates::{instantiate, Claim, Instance, TemplateId};
pub use world::generate_world;

use serde::{Deserialize, Serialize};

use crate::schema::{CharacterName, ClipBundle, Roster};
use crate::{Error, Result};

/// QA counts by difficulty in the full source dataset.
pub const SOURCE_QA_COUNTS: [f64; 4] = [9313.0, 4530.0, 2074.0, 2066.0];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldSpec {
    pub seed: u64,
    pub roster_size: usize,
    /// Overrides the default names when set; `roster_size` is then ignored.
    pub custom_roster: Option<Vec<String>>,
    pub n_scenes: usize,
    pub shots_per_scene: (usize, usize),
    pub frames_per_shot: (usize, usize),
    /// Characters on screen per shot, at most.
    pub max_actors: usize,
    pub qa_mix: [f64; 4],
    pub qas_per_scene: usize,
    pub feature_dim: usize,
    pub feature_noise: f64,
    /// Attach a feature vector to every frame. Off leaves `feature` null.
    pub frame_features: bool,
    /// Probability that a shot carries dialogue.
    pub script_prob: f64,
    /// Range of fact-restating lines in a shot's dialogue.
    pub fact_lines: (usize, usize),
    /// Probability that a scene with at least two shots gets a causal link.
    pub cause_prob: f64,
}

impl Default for WorldSpec {
    fn default() -> Self {
        Self {
            seed: 0,
            roster_size: 20,
            custom_roster: None,
            n_scenes: 10,
            shots_per_scene: (3, 8),
            frames_per_shot: (2, 10),
            max_actors: 3,
            qa_mix: SOURCE_QA_COUNTS,
            qas_per_scene: 8,
            feature_dim: 64,
            feature_noise: 0.1,
            frame_features: true,
            script_prob: 0.6,
            fact_lines: (1, 2),
            cause_prob: 0.9,
        }
    }
}

impl WorldSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(format!("world spec: {m}")));
        match &self.custom_roster {
            Some(names) => {
                if names.len() < 4 {
                    return bad("custom roster needs at least 4 names");
                }
                if !Roster::new(names.iter().map(|n| CharacterName::new(n.as_str())).collect())
                    .duplicates()
                    .is_empty()
                {
                    return bad("custom roster names must be unique");
                }
            }
            None if !(4..=20).contains(&self.roster_size) => return bad("roster_size must be in 4..=20"),
            None => {}
        }
        if self.n_scenes == 0 {
            return bad("n_scenes must be at least 1");
        }
        let (lo, hi) = self.shots_per_scene;
        if lo == 0 || lo > hi {
            return bad("shots_per_scene must be a non-empty range starting at 1 or more");
        }
        let (lo, hi) = self.frames_per_shot;
        if lo == 0 || lo > hi {
            return bad("frames_per_shot must be a non-empty range starting at 1 or more");
        }
        if self.max_actors == 0 {
            return bad("max_actors must be at least 1");
        }
        if self.fact_lines.0 > self.fact_lines.1 {
            return bad("fact_lines must be a non-empty range");
        }
        if self.qa_mix.iter().any(|w| !w.is_finite() || *w < 0.0) || self.qa_mix.iter().sum::<f64>() <= 0.0 {
            return bad("qa_mix weights must be non-negative with a positive sum");
        }
        if self.feature_dim == 0 || self.feature_noise < 0.0 {
            return bad("feature_dim must be positive and feature_noise non-negative");
        }
        if !(0.0..=1.0).contains(&self.script_prob) || !(0.0..=1.0).contains(&self.cause_prob) {
            return bad("probabilities must lie in [0, 1]");
        }
        Ok(())
    }

    /// Roster for this world: custom names, or the most prominent default names.
    pub fn roster(&self) -> Roster {
        match &self.custom_roster {
            Some(names) => Roster::new(names.iter().map(|n| CharacterName::new(n.as_str())).collect()),
            None => prominent_roster(self.roster_size),
        }
    }
}

/// Default names ordered by screen prominence: the two protagonists first.
pub fn prominent_roster(k: usize) -> Roster {
    let mut names: Vec<&str> = vec!["Haeyoung1", "Dokyung"];
    names.extend(crate::schema::DEFAULT_ROSTER.iter().filter(|n| !["Haeyoung1", "Dokyung"].contains(n)));
    Roster::new(names.into_iter().take(k).map(CharacterName::from).collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct World {
    pub spec: WorldSpec,
    pub roster: Roster,
    pub episodes: Vec<ClipBundle>,
    pub facts: Vec<SupportingFact>,
    pub causes: Vec<CausalLink>,
}

impl World {
    pub fn clip(&self, clip_id: &str) -> Option<&ClipBundle> {
        self.episodes.iter().find(|c| c.clip_id == clip_id)
    }

    pub fn fact_file(&self) -> FactFile {
        FactFile {
            facts: self.facts.clone(),
            causes: self.causes.clone(),
        }
    }
}

/// Facts and links that a clip's annotations witness.
pub fn clip_records<'a>(
    clip: &ClipBundle,
    facts: &'a [SupportingFact],
    causes: &'a [CausalLink],
) -> (Vec<&'a SupportingFact>, Vec<&'a CausalLink>) {
    use crate::schema::Granularity;
    match clip.granularity {
        Granularity::Shot => (
            facts.iter().filter(|f| f.shot_clip_id == clip.clip_id).collect(),
            causes
                .iter()
                .filter(|c| c.cause.shot_clip_id == clip.clip_id && c.effect.shot_clip_id == clip.clip_id)
                .collect(),
        ),
        Granularity::Scene => (
            facts.iter().filter(|f| f.scene_id == clip.clip_id).collect(),
            causes.iter().filter(|c| c.cause.scene_id == clip.clip_id).collect(),
        ),
    }
}

/// splitmix64 step, used to derive independent sub-seeds.
pub(crate) fn mix_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spec_validation() {
        assert!(WorldSpec::default().validate().is_ok());
        let bad = WorldSpec {
            roster_size: 3,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let bad = WorldSpec {
            qa_mix: [0.0; 4],
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let custom = WorldSpec {
            custom_roster: Some(vec!["Tom".into(), "Ann".into(), "Bo".into(), "Cy".into()]),
            roster_size: 0,
            ..Default::default()
        };
        assert!(custom.validate().is_ok());
        assert_eq!(custom.roster().len(), 4);
    }

    #[test]
    fn prominent_roster_leads_with_protagonists() {
        let r = prominent_roster(4);
        assert_eq!(r.names()[0].as_str(), "Haeyoung1");
        assert_eq!(r.names()[1].as_str(), "Dokyung");
        assert_eq!(prominent_roster(20).len(), 20);
    }
}
