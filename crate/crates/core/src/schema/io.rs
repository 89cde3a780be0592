//! JSON dataset files: one document per split with `episodes` and `qas`.

use std::fs;
use std::path::Path;

use super::Dataset;
use crate::{Error, Result};

/// Parses a dataset document. Errors carry the JSON path and line/column.
pub fn parse_dataset(text: &str) -> Result<Dataset> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|err| {
        let path = err.path().to_string();
        let inner = err.into_inner();
        Error::parse(
            format!("line {} column {} ({})", inner.line(), inner.column(), path),
            inner.to_string(),
        )
    })
}

pub fn load_dataset(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_dataset(&text)
}

pub fn to_json(dataset: &Dataset) -> String {
    serde_json::to_string_pretty(dataset).expect("dataset serializes")
}

pub fn save_dataset(dataset: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    let mut text = to_json(dataset);
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schema::*;

    fn fixture() -> Dataset {
        let frame = FrameAnnotation {
            frame_id: 3,
            boxes: vec![CharacterBox {
                character: "Haeyoung1".into(),
                full_rect: Rect::new(10, 20, 100, 200),
                face_rect: Some(Rect::new(40, 30, 30, 30)),
                behavior: "hold".parse().unwrap(),
                emotion: Emotion::Happiness,
            }],
            feature: Some(vec![0.25, -1.5]),
        };
        let clip = ClipBundle {
            clip_id: "ep0000_shot00".into(),
            granularity: Granularity::Shot,
            duration_s: 3.5,
            shots: vec![vec![frame]],
            script: vec![ScriptLine {
                speaker: "Dokyung".into(),
                text: "You held the cup.".into(),
                coref: vec![Some("Haeyoung1".into()), None, None, None, None],
            }],
        };
        let qa = QaItem {
            qid: "q0".into(),
            clip_id: "ep0000_shot00".into(),
            question: "Who held the cup?".into(),
            candidates: (0..5).map(|i| format!("Answer {i}.")).collect(),
            correct_idx: 0,
            mc_level: 1,
            lc_level: 1,
            difficulty: 1,
        };
        Dataset::new(None, vec![clip], vec![qa])
    }

    #[test]
    fn round_trip_is_identity() {
        let ds = fixture();
        let text = to_json(&ds);
        assert_eq!(parse_dataset(&text).unwrap(), ds);
    }

    #[test]
    fn truncated_file_is_a_parse_error() {
        let text = to_json(&fixture());
        let cut = &text[..text.len() / 2];
        assert!(matches!(parse_dataset(cut), Err(Error::Parse { .. })));
    }

    #[test]
    fn unknown_emotion_names_the_field() {
        let text = to_json(&fixture()).replace("\"happiness\"", "\"joy\"");
        match parse_dataset(&text) {
            Err(Error::Parse { locus, message }) => {
                assert!(locus.contains("emotion"), "locus: {locus}");
                assert!(message.contains("joy"), "message: {message}");
            }
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn json_uses_documented_keys() {
        let v: serde_json::Value = serde_json::from_str(&to_json(&fixture())).unwrap();
        let clip = &v["episodes"][0];
        for key in ["clip_id", "granularity", "duration_s", "shots", "script"] {
            assert!(clip.get(key).is_some(), "missing {key}");
        }
        assert_eq!(clip["granularity"], "SHOT");
        let b = &clip["shots"][0][0]["boxes"][0];
        assert_eq!(b["full_rect"], serde_json::json!([10, 20, 100, 200]));
        assert_eq!(clip["script"][0]["coref"][1], serde_json::Value::Null);
        assert_eq!(v["qas"][0]["candidates"].as_array().unwrap().len(), 5);
    }
}
