//! Closed vocabularies: main characters, behaviors and emotions.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// The twenty annotated main characters of the source drama.
pub const DEFAULT_ROSTER: [&str; 20] = [
    "Anna", "Chairman", "Deogi", "Dokyung", "Gitae", "Haeyoung1", "Haeyoung2", "Heeran", "Hun", "Jeongsuk",
    "Jinsang", "Jiya", "Kyungsu", "Sangseok", "Seohee", "Soontack", "Sukyung", "Sungjin", "Taejin", "Yijoon",
];

/// Behavior verbs, `none` first. 28 entries in total.
pub const BEHAVIORS: [&str; 28] = [
    "none",
    "drink",
    "hold",
    "point out",
    "clean",
    "cook",
    "cut",
    "dance",
    "destroy",
    "eat",
    "look for",
    "high-five",
    "hug",
    "kiss",
    "look at/back on",
    "nod",
    "open",
    "call",
    "play instruments",
    "push away",
    "shake hands",
    "sing",
    "sit down",
    "smoke",
    "stand up",
    "walk",
    "wave hands",
    "write",
];

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CharacterName(pub String);

impl CharacterName {
    pub fn new(name: impl Into<String>) -> Self {
        Self(name.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for CharacterName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for CharacterName {
    fn from(s: &str) -> Self {
        Self(s.to_string())
    }
}

/// Ordered set of character names; the order fixes one-hot channel indices.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Roster {
    names: Vec<CharacterName>,
}

impl Roster {
    pub fn new(names: Vec<CharacterName>) -> Self {
        Self { names }
    }

    pub fn default_roster() -> Self {
        Self::new(DEFAULT_ROSTER.iter().map(|n| CharacterName::from(*n)).collect())
    }

    /// The first `k` default names.
    pub fn default_prefix(k: usize) -> Self {
        Self::new(DEFAULT_ROSTER.iter().take(k).map(|n| CharacterName::from(*n)).collect())
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn names(&self) -> &[CharacterName] {
        &self.names
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n.0 == name)
    }

    pub fn contains(&self, name: &str) -> bool {
        self.index_of(name).is_some()
    }

    /// Names that occur more than once.
    pub fn duplicates(&self) -> Vec<&CharacterName> {
        let mut seen = std::collections::BTreeSet::new();
        self.names.iter().filter(|n| !seen.insert(n.as_str())).collect()
    }
}

impl Default for Roster {
    fn default() -> Self {
        Self::default_roster()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Behavior(u8);

impl Behavior {
    pub const NONE: Behavior = Behavior(0);

    pub fn from_index(i: usize) -> Option<Self> {
        (i < BEHAVIORS.len()).then_some(Self(i as u8))
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }

    pub fn label(self) -> &'static str {
        BEHAVIORS[self.index()]
    }

    pub fn all() -> impl Iterator<Item = Behavior> {
        (0..BEHAVIORS.len()).map(|i| Behavior(i as u8))
    }

    /// Words used to embed the label, e.g. `"look at/back on"` → look, at, back, on.
    pub fn words(self) -> Vec<&'static str> {
        label_words(self.label())
    }
}

impl FromStr for Behavior {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        BEHAVIORS
            .iter()
            .position(|b| *b == s)
            .map(|i| Behavior(i as u8))
            .ok_or_else(|| format!("unknown behavior label '{s}'"))
    }
}

impl fmt::Display for Behavior {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl Serialize for Behavior {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.label())
    }
}

impl<'de> Deserialize<'de> for Behavior {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Emotion {
    Anger,
    Disgust,
    Fear,
    Happiness,
    Sadness,
    Surprise,
    Neutral,
}

impl Emotion {
    pub const ALL: [Emotion; 7] = [
        Emotion::Anger,
        Emotion::Disgust,
        Emotion::Fear,
        Emotion::Happiness,
        Emotion::Sadness,
        Emotion::Surprise,
        Emotion::Neutral,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Emotion::Anger => "anger",
            Emotion::Disgust => "disgust",
            Emotion::Fear => "fear",
            Emotion::Happiness => "happiness",
            Emotion::Sadness => "sadness",
            Emotion::Surprise => "surprise",
            Emotion::Neutral => "neutral",
        }
    }

    pub fn index(self) -> usize {
        Self::ALL.iter().position(|e| *e == self).expect("listed")
    }
}

impl FromStr for Emotion {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .iter()
            .find(|e| e.label() == s)
            .copied()
            .ok_or_else(|| format!("unknown emotion label '{s}'"))
    }
}

impl fmt::Display for Emotion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

pub(crate) fn label_words(label: &str) -> Vec<&str> {
    label.split([' ', '/']).filter(|w| !w.is_empty()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vocabulary_sizes() {
        assert_eq!(BEHAVIORS.len(), 28);
        assert_eq!(Emotion::ALL.len(), 7);
        assert_eq!(Behavior::NONE.label(), "none");
        assert!(Roster::default_roster().duplicates().is_empty());
        assert_eq!(Roster::default_roster().len(), 20);
    }

    #[test]
    fn labels_round_trip_through_strings() {
        for b in Behavior::all() {
            assert_eq!(b.label().parse::<Behavior>().unwrap(), b);
        }
        for e in Emotion::ALL {
            assert_eq!(e.label().parse::<Emotion>().unwrap(), e);
        }
        assert!("joy".parse::<Emotion>().is_err());
        assert!("grab".parse::<Behavior>().is_err());
    }

    #[test]
    fn multiword_labels_split_into_words() {
        let b: Behavior = "look at/back on".parse().unwrap();
        assert_eq!(b.words(), vec!["look", "at", "back", "on"]);
    }
}
