//! Supporting facts, causal links and their sentence renderings.

use serde::{Deserialize, Serialize};

use super::lexicon::{self, ObjectKind};
use crate::schema::{detokenize, Behavior, CharacterName, Emotion};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", content = "label", rename_all = "lowercase")]
pub enum Relation {
    Act(Behavior),
    In,
    Feel(Emotion),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "lowercase")]
pub enum FactObject {
    None,
    Character(CharacterName),
    Thing(String),
    Location(String),
}

/// A subject–relation–object triplet witnessed inside one shot.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SupportingFact {
    pub subject: CharacterName,
    pub relation: Relation,
    pub object: FactObject,
    /// Scene clip that contains the shot.
    pub scene_id: String,
    /// Shot clip cut from the scene.
    pub shot_clip_id: String,
    pub shot_index: usize,
    /// Inclusive frame index range within the shot.
    pub frame_span: [usize; 2],
}

impl SupportingFact {
    pub fn claim(&self) -> Clause {
        Clause {
            subject: self.subject.clone(),
            relation: self.relation,
            object: self.object.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CausalLink {
    pub cause: SupportingFact,
    pub effect: SupportingFact,
    pub lag_shots: usize,
}

/// Side-file written next to generated datasets.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FactFile {
    pub facts: Vec<SupportingFact>,
    pub causes: Vec<CausalLink>,
}

/// The location-free content of a fact: what a sentence asserts.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Clause {
    pub subject: CharacterName,
    pub relation: Relation,
    pub object: FactObject,
}

impl Clause {
    pub fn act(subject: &str, behavior: &str, object: FactObject) -> Self {
        Self {
            subject: subject.into(),
            relation: Relation::Act(behavior.parse().expect("known behavior")),
            object,
        }
    }

    pub fn object_kind(&self) -> ObjectKind {
        match self.relation {
            Relation::Act(b) => lexicon::verb(b).map_or(ObjectKind::None, |v| v.kind),
            _ => ObjectKind::None,
        }
    }

    /// Object words as they appear in a sentence.
    pub fn object_words(&self) -> Vec<String> {
        match &self.object {
            FactObject::None => vec![],
            FactObject::Character(c) => vec![c.0.clone()],
            FactObject::Thing(t) => vec!["the".into(), t.clone()],
            FactObject::Location(l) => vec!["the".into(), l.clone()],
        }
    }

    /// Predicate words in the past tense, without the subject.
    pub fn predicate_words(&self) -> Vec<String> {
        let mut out: Vec<String> = match self.relation {
            Relation::Act(b) => words(lexicon::verb(b).map_or("did nothing", |v| v.past)),
            Relation::Feel(e) => vec!["felt".into(), e.label().into()],
            Relation::In => vec!["was".into(), "in".into()],
        };
        out.extend(self.object_words());
        out
    }

    /// Predicate with the bare verb, as used after "did".
    pub fn base_predicate_words(&self) -> Vec<String> {
        let mut out: Vec<String> = match self.relation {
            Relation::Act(b) => words(lexicon::verb(b).map_or("do nothing", |v| v.base)),
            Relation::Feel(e) => vec!["feel".into(), e.label().into()],
            Relation::In => vec!["be".into(), "in".into()],
        };
        out.extend(self.object_words());
        out
    }

    pub fn words(&self) -> Vec<String> {
        let mut out = vec![self.subject.0.clone()];
        out.extend(self.predicate_words());
        out
    }

    pub fn sentence(&self) -> String {
        let mut w = self.words();
        w.push(".".into());
        detokenize(&w)
    }
}

pub(crate) fn words(s: &str) -> Vec<String> {
    s.split_whitespace().map(str::to_string).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clause_sentences() {
        let c = Clause::act("Haeyoung1", "hold", FactObject::Thing("cup".into()));
        assert_eq!(c.sentence(), "Haeyoung1 held the cup.");
        let c = Clause::act("Dokyung", "push away", FactObject::Character("Hun".into()));
        assert_eq!(c.sentence(), "Dokyung pushed away Hun.");
        let c = Clause {
            subject: "Anna".into(),
            relation: Relation::Feel(Emotion::Sadness),
            object: FactObject::None,
        };
        assert_eq!(c.sentence(), "Anna felt sadness.");
        let c = Clause {
            subject: "Tom".into(),
            relation: Relation::In,
            object: FactObject::Location("kitchen".into()),
        };
        assert_eq!(c.sentence(), "Tom was in the kitchen.");
    }

    #[test]
    fn relation_serializes_with_labels() {
        let r = Relation::Act("look for".parse().unwrap());
        let s = serde_json::to_string(&r).unwrap();
        assert_eq!(s, r#"{"kind":"act","label":"look for"}"#);
        assert_eq!(serde_json::from_str::<Relation>(&s).unwrap(), r);
        assert_eq!(serde_json::to_string(&Relation::In).unwrap(), r#"{"kind":"in"}"#);
    }
}
