//! Surface forms for the generator's sentences.

use std::collections::HashMap;

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::features::Pretrained;
use crate::schema::Behavior;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ObjectKind {
    None,
    Person,
    Item,
    Food,
    Drink,
    Document,
}

#[derive(Debug, Clone, Copy)]
pub struct VerbForms {
    pub label: &'static str,
    pub base: &'static str,
    pub past: &'static str,
    pub kind: ObjectKind,
}

pub const VERBS: &[VerbForms] = &[
    VerbForms { label: "drink", base: "drink", past: "drank", kind: ObjectKind::Drink },
    VerbForms { label: "hold", base: "hold", past: "held", kind: ObjectKind::Item },
    VerbForms { label: "point out", base: "point out", past: "pointed out", kind: ObjectKind::Item },
    VerbForms { label: "clean", base: "clean", past: "cleaned", kind: ObjectKind::Item },
    VerbForms { label: "cook", base: "cook", past: "cooked", kind: ObjectKind::Food },
    VerbForms { label: "cut", base: "cut", past: "cut", kind: ObjectKind::Food },
    VerbForms { label: "dance", base: "dance", past: "danced", kind: ObjectKind::None },
    VerbForms { label: "destroy", base: "destroy", past: "destroyed", kind: ObjectKind::Item },
    VerbForms { label: "eat", base: "eat", past: "ate", kind: ObjectKind::Food },
    VerbForms { label: "look for", base: "look for", past: "looked for", kind: ObjectKind::Item },
    VerbForms { label: "high-five", base: "high-five", past: "high-fived", kind: ObjectKind::Person },
    VerbForms { label: "hug", base: "hug", past: "hugged", kind: ObjectKind::Person },
    VerbForms { label: "kiss", base: "kiss", past: "kissed", kind: ObjectKind::Person },
    VerbForms { label: "look at/back on", base: "look at", past: "looked at", kind: ObjectKind::Person },
    VerbForms { label: "nod", base: "nod", past: "nodded", kind: ObjectKind::None },
    VerbForms { label: "open", base: "open", past: "opened", kind: ObjectKind::Item },
    VerbForms { label: "call", base: "call", past: "called", kind: ObjectKind::Person },
    VerbForms { label: "play instruments", base: "play instruments", past: "played instruments", kind: ObjectKind::None },
    VerbForms { label: "push away", base: "push away", past: "pushed away", kind: ObjectKind::Person },
    VerbForms { label: "shake hands", base: "shake hands with", past: "shook hands with", kind: ObjectKind::Person },
    VerbForms { label: "sing", base: "sing", past: "sang", kind: ObjectKind::None },
    VerbForms { label: "sit down", base: "sit down", past: "sat down", kind: ObjectKind::None },
    VerbForms { label: "smoke", base: "smoke", past: "smoked", kind: ObjectKind::None },
    VerbForms { label: "stand up", base: "stand up", past: "stood up", kind: ObjectKind::None },
    VerbForms { label: "walk", base: "walk", past: "walked", kind: ObjectKind::None },
    VerbForms { label: "wave hands", base: "wave hands", past: "waved hands", kind: ObjectKind::None },
    VerbForms { label: "write", base: "write", past: "wrote", kind: ObjectKind::Document },
];

pub const ITEMS: &[&str] = &["cup", "phone", "bag", "book", "tissue", "umbrella", "box", "door", "window", "ring"];
pub const FOODS: &[&str] = &["noodles", "cake", "rice", "bread", "soup"];
pub const DRINKS: &[&str] = &["coffee", "water", "soju", "tea", "juice"];
pub const DOCUMENTS: &[&str] = &["letter", "note", "report", "card"];
pub const LOCATIONS: &[&str] = &[
    "kitchen", "office", "cafe", "street", "house", "restaurant", "park", "hospital", "rooftop", "bar",
];

/// Lines with no character content, used to pad dialogue.
pub const FILLER: &[&str] = &[
    "Let us talk later.",
    "What time is it?",
    "This is not a good idea.",
    "Wait a moment.",
    "I do not know what to say.",
    "Everything will be fine.",
];

/// Word vectors in which the label, base and past forms of each behavior
/// share one random direction, so that inflections start as neighbours the
/// way they do in a pretrained table. Each member gets independent noise of
/// relative size `noise`. Covers only the verb heads; other words are left to
/// the vocabulary's random start.
pub fn lexicon_vectors<R: Rng>(dim: usize, noise: f64, rng: &mut R) -> Pretrained {
    let normal = Normal::new(0.0, 1.0 / (dim as f64).sqrt()).expect("positive std");
    let draw = |rng: &mut R| -> Vec<f64> { (0..dim).map(|_| normal.sample(rng)).collect() };
    let mut bases: HashMap<String, Vec<f64>> = HashMap::new();
    for v in VERBS {
        let heads: Vec<String> = [v.label, v.base, v.past]
            .iter()
            .filter_map(|f| f.split([' ', '/']).next())
            .map(str::to_lowercase)
            .collect();
        let base = heads.iter().find_map(|h| bases.get(h).cloned()).unwrap_or_else(|| draw(rng));
        for h in heads {
            bases.entry(h).or_insert_with(|| base.clone());
        }
    }
    let mut words: Vec<String> = bases.keys().cloned().collect();
    words.sort();
    let vectors = words
        .into_iter()
        .map(|w| {
            let e = draw(rng);
            let v = bases[&w].iter().zip(e).map(|(b, e)| b + noise * e).collect();
            (w, v)
        })
        .collect();
    Pretrained { dim, vectors }
}

pub fn verb(b: Behavior) -> Option<&'static VerbForms> {
    VERBS.iter().find(|v| v.label == b.label())
}

pub fn things(kind: ObjectKind) -> &'static [&'static str] {
    match kind {
        ObjectKind::Item => ITEMS,
        ObjectKind::Food => FOODS,
        ObjectKind::Drink => DRINKS,
        ObjectKind::Document => DOCUMENTS,
        ObjectKind::None | ObjectKind::Person => &[],
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_behavior_but_none_has_verb_forms() {
        for b in Behavior::all() {
            assert_eq!(verb(b).is_some(), b != Behavior::NONE, "{b}");
        }
        assert_eq!(VERBS.len(), 27);
    }

    #[test]
    fn inflections_share_a_direction() {
        use rand::SeedableRng;
        let p = lexicon_vectors(64, 0.1, &mut rand_chacha::ChaCha8Rng::seed_from_u64(0));
        let cos = |a: &str, b: &str| crate::baselines::cosine(&p.vectors[a], &p.vectors[b]);
        assert!(cos("hold", "held") > 0.95);
        assert!(cos("eat", "ate") > 0.95);
        assert!(cos("hold", "eat").abs() < 0.5);
    }
}
