use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use super::{assign_difficulty, ClipBundle, Granularity, QaItem, Roster, NUM_CANDIDATES};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub item: String,
    pub rule: String,
    pub detail: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub clips: usize,
    pub qas: usize,
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn has_rule(&self, rule: &str) -> bool {
        self.violations.iter().any(|v| v.rule == rule)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    fn push(&mut self, item: &str, rule: &str, detail: impl Into<String>) {
        self.violations.push(Violation {
            item: item.to_string(),
            rule: rule.to_string(),
            detail: detail.into(),
        });
    }
}

/// Checks every data-model invariant. Violations are collected, never raised.
pub fn validate_dataset(roster: &Roster, episodes: &[ClipBundle], qas: &[QaItem]) -> ValidationReport {
    let mut report = ValidationReport {
        clips: episodes.len(),
        qas: qas.len(),
        violations: Vec::new(),
    };

    for dup in roster.duplicates() {
        report.push("roster", "roster-unique", format!("'{dup}' listed more than once"));
    }
    if roster.is_empty() {
        report.push("roster", "roster-unique", "roster is empty");
    }

    let mut clips: HashMap<&str, &ClipBundle> = HashMap::new();
    let mut feature_len: Option<usize> = None;
    for clip in episodes {
        if clips.insert(clip.clip_id.as_str(), clip).is_some() {
            report.push(&clip.clip_id, "clip-id-unique", "duplicate clip id");
        }
        check_clip(roster, clip, &mut feature_len, &mut report);
    }

    let mut qids = BTreeSet::new();
    for qa in qas {
        let id = qa.qid.as_str();
        if !qids.insert(id) {
            report.push(id, "qid-unique", "duplicate qid");
        }
        if qa.candidates.len() != NUM_CANDIDATES {
            report.push(id, "candidates=5", format!("{} candidates", qa.candidates.len()));
        }
        if qa.correct_idx >= NUM_CANDIDATES || qa.correct_idx >= qa.candidates.len() {
            report.push(id, "correct-idx-range", format!("correct_idx {} out of range", qa.correct_idx));
        }
        if !(1..=2).contains(&qa.mc_level) || !(1..=4).contains(&qa.lc_level) {
            report.push(id, "level-range", format!("mc_level {} lc_level {}", qa.mc_level, qa.lc_level));
        }
        match assign_difficulty(qa.mc_level, qa.lc_level) {
            Ok(d) if d == qa.difficulty => {}
            Ok(d) => report.push(
                id,
                "difficulty-consistency",
                format!("difficulty {} but levels ({}, {}) give {}", qa.difficulty, qa.mc_level, qa.lc_level, d),
            ),
            Err(_) => report.push(
                id,
                "difficulty-consistency",
                format!("levels ({}, {}) have no difficulty", qa.mc_level, qa.lc_level),
            ),
        }
        match clips.get(qa.clip_id.as_str()) {
            None => report.push(id, "clip-exists", format!("no clip '{}'", qa.clip_id)),
            Some(clip) => {
                let is_shot = clip.granularity == Granularity::Shot;
                if (qa.mc_level == 1) != is_shot {
                    report.push(
                        id,
                        "mc-granularity",
                        format!("mc_level {} on a {:?} clip", qa.mc_level, clip.granularity),
                    );
                }
            }
        }
    }
    report
}

fn check_clip(roster: &Roster, clip: &ClipBundle, feature_len: &mut Option<usize>, report: &mut ValidationReport) {
    let id = clip.clip_id.as_str();
    match clip.granularity {
        Granularity::Shot if clip.shots.len() != 1 => {
            report.push(id, "shot-count", format!("SHOT clip with {} shots", clip.shots.len()))
        }
        Granularity::Scene if clip.shots.is_empty() => report.push(id, "shot-count", "SCENE clip with no shots"),
        _ => {}
    }
    if !(clip.duration_s.is_finite() && clip.duration_s >= 0.0) {
        report.push(id, "duration-nonnegative", format!("duration {}", clip.duration_s));
    }

    for (s, shot) in clip.shots.iter().enumerate() {
        for pair in shot.windows(2) {
            if pair[1].frame_id <= pair[0].frame_id {
                report.push(
                    id,
                    "frame-order",
                    format!("shot {s}: frame {} follows {}", pair[1].frame_id, pair[0].frame_id),
                );
            }
        }
        for frame in shot {
            let locus = format!("{id}/frame{}", frame.frame_id);
            let mut seen = BTreeSet::new();
            for b in &frame.boxes {
                if !roster.contains(b.character.as_str()) {
                    report.push(&locus, "roster-member", format!("box character '{}'", b.character));
                }
                if !seen.insert(b.character.as_str()) {
                    report.push(&locus, "one-box-per-character", format!("'{}' boxed twice", b.character));
                }
                if !b.full_rect.is_positive() {
                    report.push(&locus, "rect-positive", format!("full_rect {:?}", b.full_rect.0));
                }
                if let Some(face) = &b.face_rect {
                    if !face.is_positive() {
                        report.push(&locus, "rect-positive", format!("face_rect {:?}", face.0));
                    }
                    if !b.full_rect.contains(face) {
                        report.push(&locus, "face-within-body", format!("face {:?} outside body {:?}", face.0, b.full_rect.0));
                    }
                }
            }
            if let Some(f) = &frame.feature {
                match feature_len {
                    None => *feature_len = Some(f.len()),
                    Some(n) if *n != f.len() => report.push(
                        &locus,
                        "feature-length",
                        format!("feature length {} differs from {}", f.len(), n),
                    ),
                    _ => {}
                }
            }
        }
    }

    for (l, line) in clip.script.iter().enumerate() {
        let locus = format!("{id}/line{l}");
        if !roster.contains(line.speaker.as_str()) {
            report.push(&locus, "roster-member", format!("speaker '{}'", line.speaker));
        }
        let tokens = line.tokens();
        if tokens.is_empty() {
            report.push(&locus, "script-tokens-nonempty", "empty line");
        }
        if tokens.len() != line.coref.len() {
            report.push(
                &locus,
                "coref-length",
                format!("{} tokens but {} coref tags", tokens.len(), line.coref.len()),
            );
        }
        for tag in line.coref.iter().flatten() {
            if !roster.contains(tag.as_str()) {
                report.push(&locus, "roster-member", format!("coref tag '{tag}'"));
            }
        }
    }
}
