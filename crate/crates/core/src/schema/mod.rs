//! Character-centered annotation data model and the QA difficulty taxonomy.

mod io;
mod labels;
mod validate;

pub use io::{load_dataset, parse_dataset, save_dataset, to_json};
pub use labels::{Behavior, CharacterName, Emotion, Roster, BEHAVIORS, DEFAULT_ROSTER};
pub(crate) use labels::label_words;
pub use validate::{validate_dataset, ValidationReport, Violation};

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Number of answer candidates per question.
pub const NUM_CANDIDATES: usize = 5;

/// `(x, y, w, h)` in pixels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rect(pub [i64; 4]);

impl Rect {
    pub fn new(x: i64, y: i64, w: i64, h: i64) -> Self {
        Self([x, y, w, h])
    }

    pub fn is_positive(&self) -> bool {
        self.0[2] > 0 && self.0[3] > 0
    }

    pub fn contains(&self, inner: &Rect) -> bool {
        let [x, y, w, h] = self.0;
        let [ix, iy, iw, ih] = inner.0;
        ix >= x && iy >= y && ix + iw <= x + w && iy + ih <= y + h
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CharacterBox {
    pub character: CharacterName,
    pub full_rect: Rect,
    pub face_rect: Option<Rect>,
    pub behavior: Behavior,
    pub emotion: Emotion,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameAnnotation {
    pub frame_id: u64,
    pub boxes: Vec<CharacterBox>,
    pub feature: Option<Vec<f64>>,
}

/// One dialogue line. `coref` holds one entry per token of `text` (see
/// [`tokenize`]) naming the character a pronoun or mention refers to.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScriptLine {
    pub speaker: CharacterName,
    pub text: String,
    pub coref: Vec<Option<CharacterName>>,
}

impl ScriptLine {
    pub fn tokens(&self) -> Vec<String> {
        tokenize(&self.text)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Granularity {
    Shot,
    Scene,
}

/// A shot or a scene: shots of frames plus the dialogue spoken over them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClipBundle {
    pub clip_id: String,
    pub granularity: Granularity,
    pub duration_s: f64,
    pub shots: Vec<Vec<FrameAnnotation>>,
    pub script: Vec<ScriptLine>,
}

impl ClipBundle {
    /// Episode key shared by a scene and the shot clips cut from it.
    pub fn episode_key(&self) -> &str {
        episode_key(&self.clip_id)
    }

    pub fn frames(&self) -> impl Iterator<Item = &FrameAnnotation> {
        self.shots.iter().flatten()
    }
}

/// `"ep0003_shot01"` and `"ep0003"` both map to `"ep0003"`.
pub fn episode_key(clip_id: &str) -> &str {
    clip_id.split("_shot").next().unwrap_or(clip_id)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QaItem {
    pub qid: String,
    pub clip_id: String,
    pub question: String,
    pub candidates: Vec<String>,
    pub correct_idx: usize,
    pub mc_level: u8,
    pub lc_level: u8,
    pub difficulty: u8,
}

impl QaItem {
    pub fn question_tokens(&self) -> Vec<String> {
        tokenize(&self.question)
    }

    pub fn candidate_tokens(&self, i: usize) -> Vec<String> {
        tokenize(&self.candidates[i])
    }
}

/// A whole split: clips plus the questions asked about them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub roster: Option<Roster>,
    pub episodes: Vec<ClipBundle>,
    pub qas: Vec<QaItem>,
}

impl Dataset {
    pub fn new(roster: Option<Roster>, episodes: Vec<ClipBundle>, qas: Vec<QaItem>) -> Self {
        Self { roster, episodes, qas }
    }

    /// Declared roster, or the default twenty names.
    pub fn roster(&self) -> Roster {
        self.roster.clone().unwrap_or_default()
    }

    pub fn clip(&self, clip_id: &str) -> Option<&ClipBundle> {
        self.episodes.iter().find(|c| c.clip_id == clip_id)
    }

    pub fn clip_index(&self) -> std::collections::HashMap<&str, &ClipBundle> {
        self.episodes.iter().map(|c| (c.clip_id.as_str(), c)).collect()
    }
}

/// Maps (memory capacity, logical complexity) to one of the four difficulties.
pub fn assign_difficulty(mc_level: u8, lc_level: u8) -> Result<u8> {
    match (mc_level, lc_level) {
        (1, 1) => Ok(1),
        (1, 2) => Ok(2),
        (2, 3) => Ok(3),
        (2, 4) => Ok(4),
        (mc, lc) => Err(Error::InvalidCombination { mc, lc }),
    }
}

/// Inverse of [`assign_difficulty`].
pub fn difficulty_levels(difficulty: u8) -> Option<(u8, u8)> {
    match difficulty {
        1 => Some((1, 1)),
        2 => Some((1, 2)),
        3 => Some((2, 3)),
        4 => Some((2, 4)),
        _ => None,
    }
}

const PUNCT: &[char] = &['.', ',', '?', '!', ';', ':', '"', '(', ')'];

/// Whitespace split with leading and trailing punctuation broken off into
/// single-character tokens. Case is preserved.
pub fn tokenize(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    for chunk in text.split_whitespace() {
        let mut word = chunk;
        let mut lead = Vec::new();
        while let Some(c) = word.chars().next().filter(|c| PUNCT.contains(c)) {
            lead.push(c.to_string());
            word = &word[c.len_utf8()..];
        }
        let mut trail = Vec::new();
        while let Some(c) = word.chars().last().filter(|c| PUNCT.contains(c)) {
            trail.push(c.to_string());
            word = &word[..word.len() - c.len_utf8()];
        }
        out.extend(lead);
        if !word.is_empty() {
            out.push(word.to_string());
        }
        out.extend(trail.into_iter().rev());
    }
    out
}

/// Joins tokens back into a sentence, attaching punctuation to the previous word.
pub fn detokenize<S: AsRef<str>>(tokens: &[S]) -> String {
    let mut out = String::new();
    for t in tokens {
        let t = t.as_ref();
        let is_punct = t.chars().count() == 1 && t.chars().all(|c| PUNCT.contains(&c));
        if !out.is_empty() && !is_punct {
            out.push(' ');
        }
        out.push_str(t);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn difficulty_mapping_is_a_bijection_on_defined_pairs() {
        assert_eq!(assign_difficulty(1, 1).unwrap(), 1);
        assert_eq!(assign_difficulty(1, 2).unwrap(), 2);
        assert_eq!(assign_difficulty(2, 3).unwrap(), 3);
        assert_eq!(assign_difficulty(2, 4).unwrap(), 4);
        for (mc, lc) in [(1, 3), (1, 4), (2, 1), (2, 2), (0, 1), (3, 4)] {
            assert!(matches!(assign_difficulty(mc, lc), Err(Error::InvalidCombination { .. })));
        }
        for d in 1..=4 {
            let (mc, lc) = difficulty_levels(d).unwrap();
            assert_eq!(assign_difficulty(mc, lc).unwrap(), d);
        }
    }

    #[test]
    fn tokenizer_splits_punctuation() {
        assert_eq!(tokenize("Who held the cup?"), vec!["Who", "held", "the", "cup", "?"]);
        assert_eq!(tokenize("  \"Hi,\" Dokyung said. "), vec!["\"", "Hi", ",", "\"", "Dokyung", "said", "."]);
        assert_eq!(tokenize("high-five each other's"), vec!["high-five", "each", "other's"]);
        assert!(tokenize("").is_empty());
    }

    #[test]
    fn detokenize_inverts_tokenize_for_generated_text() {
        let s = "Haeyoung1 held the cup in the kitchen.";
        assert_eq!(detokenize(&tokenize(s)), s);
    }

    #[test]
    fn episode_key_strips_shot_suffix() {
        assert_eq!(episode_key("ep0003_shot01"), "ep0003");
        assert_eq!(episode_key("ep0003"), "ep0003");
    }

    #[test]
    fn rect_containment() {
        let body = Rect::new(10, 10, 100, 200);
        assert!(body.contains(&Rect::new(20, 20, 30, 30)));
        assert!(!body.contains(&Rect::new(5, 20, 30, 30)));
        assert!(!Rect::new(0, 0, 0, 5).is_positive());
    }
}
