use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::vocab::Vocabulary;
use crate::autograd::Tensor;
use crate::schema::{label_words, ClipBundle, FrameAnnotation, QaItem, Roster};

/// Truncation limits for the context streams.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Limits {
    pub max_sent: usize,
    pub max_word: usize,
    pub max_shot: usize,
    pub max_frame: usize,
}

impl Default for Limits {
    fn default() -> Self {
        Self {
            max_sent: 30,
            max_word: 20,
            max_shot: 30,
            max_frame: 10,
        }
    }
}

/// Which annotations reach the encoder.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EncodeOptions {
    /// Speaker one-hots and coreference substitution in the script.
    pub use_coref: bool,
    /// Name, behavior and emotion channels of the visual stream.
    pub use_vmeta: bool,
    pub limits: Limits,
}

impl Default for EncodeOptions {
    fn default() -> Self {
        Self {
            use_coref: true,
            use_vmeta: true,
            limits: Limits::default(),
        }
    }
}

/// Weighted sum of vocabulary rows.
pub type Mix = Vec<(usize, f64)>;

/// Question followed by one candidate, as vocabulary indices, plus the
/// roster indices of the names it mentions (each once).
#[derive(Debug, Clone, PartialEq)]
pub struct QaSeq {
    pub tokens: Vec<usize>,
    pub names: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QaEncoding {
    pub question_len: usize,
    pub candidates: Vec<QaSeq>,
}

impl QaEncoding {
    pub fn max_len(&self) -> usize {
        self.candidates.iter().map(|c| c.tokens.len()).max().unwrap_or(0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sentence {
    pub tokens: Vec<usize>,
    pub speaker: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrameRow {
    pub feature: Vec<f64>,
    pub behavior: Mix,
    pub emotion: Mix,
    pub names: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClipEncoding {
    pub sentences: Vec<Sentence>,
    pub shots: Vec<Vec<FrameRow>>,
    pub d_v: usize,
}

impl ClipEncoding {
    pub fn t_sent(&self) -> usize {
        self.sentences.len()
    }

    pub fn t_word(&self) -> usize {
        self.sentences.iter().map(|s| s.tokens.len()).max().unwrap_or(0)
    }

    pub fn t_shot(&self) -> usize {
        self.shots.len()
    }

    pub fn t_frame(&self) -> usize {
        self.shots.iter().map(Vec::len).max().unwrap_or(0)
    }

    /// Row-major `(sentence, word)` validity.
    pub fn word_mask(&self) -> Vec<bool> {
        let tw = self.t_word();
        self.sentences
            .iter()
            .flat_map(|s| (0..tw).map(move |w| w < s.tokens.len()))
            .collect()
    }

    pub fn frame_mask(&self) -> Vec<bool> {
        let tf = self.t_frame();
        self.shots.iter().flat_map(|s| (0..tf).map(move |f| f < s.len())).collect()
    }

    /// Appends `n_sent` empty sentences and `n_shot` empty shots; masks and
    /// downstream scores must not change.
    pub fn with_padding(&self, n_sent: usize, n_shot: usize) -> Self {
        let mut out = self.clone();
        out.sentences.extend((0..n_sent).map(|_| Sentence {
            tokens: vec![],
            speaker: None,
        }));
        out.shots.extend((0..n_shot).map(|_| Vec::new()));
        out
    }
}

fn names_in(tokens: &[String], roster: &Roster) -> Vec<usize> {
    tokens
        .iter()
        .filter_map(|t| roster.index_of(t))
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect()
}

/// Question tokens followed by candidate `i`'s tokens.
pub fn encode_qa_pair(question: &[String], candidate: &[String], vocab: &Vocabulary, roster: &Roster) -> QaSeq {
    let all: Vec<String> = question.iter().chain(candidate).cloned().collect();
    QaSeq {
        tokens: all.iter().map(|t| vocab.lookup(t)).collect(),
        names: names_in(&all, roster),
    }
}

pub fn encode_qa(qa: &QaItem, vocab: &Vocabulary, roster: &Roster) -> QaEncoding {
    let q = qa.question_tokens();
    QaEncoding {
        question_len: q.len(),
        candidates: (0..qa.candidates.len())
            .map(|i| encode_qa_pair(&q, &qa.candidate_tokens(i), vocab, roster))
            .collect(),
    }
}

/// Mean of the word vectors of a label such as "look at/back on".
fn label_mix(label: &str, vocab: &Vocabulary) -> Mix {
    let words = label_words(label);
    let w = 1.0 / words.len().max(1) as f64;
    words.iter().map(|t| (vocab.lookup(t), w)).collect()
}

fn merge(mix: &mut Mix, other: Mix, weight: f64) {
    for (i, w) in other {
        match mix.iter_mut().find(|(j, _)| *j == i) {
            Some((_, acc)) => *acc += w * weight,
            None => mix.push((i, w * weight)),
        }
    }
}

fn encode_frame(frame: &FrameAnnotation, d_v: usize, vocab: &Vocabulary, roster: &Roster, opts: &EncodeOptions) -> FrameRow {
    let feature = match &frame.feature {
        Some(f) if f.len() == d_v => f.clone(),
        _ => vec![0.0; d_v],
    };
    let mut row = FrameRow {
        feature,
        behavior: vec![],
        emotion: vec![],
        names: vec![],
    };
    if !opts.use_vmeta || frame.boxes.is_empty() {
        return row;
    }
    let w = 1.0 / frame.boxes.len() as f64;
    let mut names = BTreeSet::new();
    for b in &frame.boxes {
        merge(&mut row.behavior, label_mix(b.behavior.label(), vocab), w);
        merge(&mut row.emotion, label_mix(b.emotion.label(), vocab), w);
        if let Some(i) = roster.index_of(b.character.as_str()) {
            names.insert(i);
        }
    }
    row.names = names.into_iter().collect();
    row
}

/// Script and visual streams of a clip, truncated to the earliest items.
pub fn encode_clip(clip: &ClipBundle, d_v: usize, vocab: &Vocabulary, roster: &Roster, opts: &EncodeOptions) -> ClipEncoding {
    let lim = opts.limits;
    let sentences = clip
        .script
        .iter()
        .take(lim.max_sent)
        .map(|line| {
            let tokens = line.tokens();
            let ids = tokens
                .iter()
                .enumerate()
                .take(lim.max_word)
                .map(|(k, t)| match line.coref.get(k).and_then(|c| c.as_ref()) {
                    Some(name) if opts.use_coref => vocab.lookup(name.as_str()),
                    _ => vocab.lookup(t),
                })
                .collect();
            Sentence {
                tokens: ids,
                speaker: if opts.use_coref {
                    roster.index_of(line.speaker.as_str())
                } else {
                    None
                },
            }
        })
        .collect();
    let shots = clip
        .shots
        .iter()
        .take(lim.max_shot)
        .map(|shot| {
            shot.iter()
                .take(lim.max_frame)
                .map(|f| encode_frame(f, d_v, vocab, roster, opts))
                .collect()
        })
        .collect();
    ClipEncoding { sentences, shots, d_v }
}

/// One QA item with the streams of its clip.
#[derive(Debug, Clone, Copy)]
pub struct StreamBatch<'a> {
    pub qa: &'a QaEncoding,
    pub clip: &'a ClipEncoding,
}

/// Dense, padded tensors of a [`StreamBatch`].
#[derive(Debug, Clone, PartialEq)]
pub struct DenseBatch {
    /// One `(T_Q + T_Ai) × D_W` matrix per candidate.
    pub qa: Vec<Tensor>,
    /// `(T_sent · T_word) × (D_W + R)`, row-major over (sentence, word).
    pub script: Tensor,
    pub sent_mask: Vec<bool>,
    pub word_mask: Vec<bool>,
    /// `(T_shot · T_frame) × (D_V + 2·D_W + R)`.
    pub visual: Tensor,
    pub shot_mask: Vec<bool>,
    pub frame_mask: Vec<bool>,
}

fn add_mix(dst: &mut [f64], mix: &Mix, vectors: &Tensor) {
    for &(j, w) in mix {
        for (o, x) in dst.iter_mut().zip(vectors.row(j)) {
            *o += w * x;
        }
    }
}

impl<'a> StreamBatch<'a> {
    /// Script input rows as vocabulary mixes plus one-hot rows.
    pub fn materialize(&self, vectors: &Tensor, roster_len: usize) -> DenseBatch {
        let d_w = vectors.cols;
        let clip = self.clip;
        let qa = self
            .qa
            .candidates
            .iter()
            .map(|c| {
                let mut t = Tensor::zeros(c.tokens.len(), d_w);
                for (r, &tok) in c.tokens.iter().enumerate() {
                    t.row_mut(r).copy_from_slice(vectors.row(tok));
                }
                t
            })
            .collect();
        let (ts, tw) = (clip.t_sent(), clip.t_word());
        let mut script = Tensor::zeros(ts * tw, d_w + roster_len);
        for (s, sent) in clip.sentences.iter().enumerate() {
            for (w, &tok) in sent.tokens.iter().enumerate() {
                let row = script.row_mut(s * tw + w);
                row[..d_w].copy_from_slice(vectors.row(tok));
                if let Some(sp) = sent.speaker {
                    row[d_w + sp] = 1.0;
                }
            }
        }
        let (tsh, tf) = (clip.t_shot(), clip.t_frame());
        let d_v = clip.d_v;
        let mut visual = Tensor::zeros(tsh * tf, d_v + 2 * d_w + roster_len);
        for (s, shot) in clip.shots.iter().enumerate() {
            for (f, frame) in shot.iter().enumerate() {
                let row = visual.row_mut(s * tf + f);
                row[..d_v].copy_from_slice(&frame.feature);
                add_mix(&mut row[d_v..d_v + d_w], &frame.behavior, vectors);
                add_mix(&mut row[d_v + d_w..d_v + 2 * d_w], &frame.emotion, vectors);
                for &n in &frame.names {
                    row[d_v + 2 * d_w + n] = 1.0;
                }
            }
        }
        DenseBatch {
            qa,
            script,
            sent_mask: clip.sentences.iter().map(|s| !s.tokens.is_empty()).collect(),
            word_mask: clip.word_mask(),
            visual,
            shot_mask: clip.shots.iter().map(|s| !s.is_empty()).collect(),
            frame_mask: clip.frame_mask(),
        }
    }
}

/// Per-sentence flag: the speaker is among `names`.
pub fn sentence_flags(clip: &ClipEncoding, names: &[usize]) -> Vec<f64> {
    clip.sentences
        .iter()
        .map(|s| s.speaker.map_or(0.0, |sp| f64::from(u8::from(names.contains(&sp)))))
        .collect()
}

/// Per-frame flag, row-major over (shot, frame): a box name is among `names`.
pub fn frame_flags(clip: &ClipEncoding, names: &[usize]) -> Vec<f64> {
    let tf = clip.t_frame();
    let mut out = vec![0.0; clip.t_shot() * tf];
    for (s, shot) in clip.shots.iter().enumerate() {
        for (f, frame) in shot.iter().enumerate() {
            if frame.names.iter().any(|n| names.contains(n)) {
                out[s * tf + f] = 1.0;
            }
        }
    }
    out
}

/// Per-shot flag: any frame of the shot is flagged.
pub fn shot_flags(clip: &ClipEncoding, names: &[usize]) -> Vec<f64> {
    clip.shots
        .iter()
        .map(|shot| {
            let hit = shot.iter().any(|fr| fr.names.iter().any(|n| names.contains(n)));
            f64::from(u8::from(hit))
        })
        .collect()
}

/// Word-level flags inherit their sentence's flag.
pub fn word_flags(clip: &ClipEncoding, names: &[usize]) -> Vec<f64> {
    let tw = clip.t_word();
    sentence_flags(clip, names)
        .into_iter()
        .flat_map(|f| std::iter::repeat_n(f, tw))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::build_vocab;
    use crate::schema::{Behavior, CharacterBox, Emotion, Granularity, Rect, ScriptLine};
    use rand::SeedableRng;

    fn setup() -> (Vocabulary, Roster) {
        let roster = Roster::default_prefix(4);
        let mut corpus = crate::features::label_corpus();
        corpus.extend(["who", "held", "the", "cup", "?", ".", "i", "am", "here"].map(String::from));
        let v = build_vocab(&corpus, &roster, 4, 1, None, &mut rand_chacha::ChaCha8Rng::seed_from_u64(1)).unwrap();
        (v, roster)
    }

    fn clip(n_lines: usize, frames: Vec<FrameAnnotation>) -> ClipBundle {
        ClipBundle {
            clip_id: "ep0001_shot01".into(),
            granularity: Granularity::Shot,
            duration_s: 1.0,
            shots: vec![frames],
            script: (0..n_lines)
                .map(|_| ScriptLine {
                    speaker: "Anna".into(),
                    text: "I am here.".into(),
                    coref: vec![Some("Anna".into()), None, None, None],
                })
                .collect(),
        }
    }

    fn bx(name: &str, behavior: &str, emotion: Emotion) -> CharacterBox {
        CharacterBox {
            character: name.into(),
            full_rect: Rect::new(0, 0, 10, 10),
            face_rect: None,
            behavior: behavior.parse::<Behavior>().unwrap(),
            emotion,
        }
    }

    #[test]
    fn qa_length_is_question_plus_candidate() {
        let (v, r) = setup();
        let q: Vec<String> = ["Who", "held", "the"].map(String::from).to_vec();
        let a: Vec<String> = ["zebra", "!"].map(String::from).to_vec();
        let s = encode_qa_pair(&q, &a, &v, &r);
        assert_eq!(s.tokens.len(), 5);
        assert_eq!(s.tokens[3], crate::features::UNK);
        assert_eq!(encode_qa_pair(&q, &[], &v, &r).tokens.len(), 3);
    }

    #[test]
    fn names_counted_once() {
        let (v, r) = setup();
        let q: Vec<String> = ["Anna", "held", "Anna"].map(String::from).to_vec();
        let s = encode_qa_pair(&q, &[], &v, &r);
        assert_eq!(s.names, vec![r.index_of("Anna").unwrap()]);
    }

    #[test]
    fn script_truncated_to_thirty_sentences() {
        let (v, r) = setup();
        let e = encode_clip(&clip(35, vec![]), 3, &v, &r, &EncodeOptions::default());
        assert_eq!(e.t_sent(), 30);
        let dense = StreamBatch { qa: &QaEncoding { question_len: 0, candidates: vec![] }, clip: &e }.materialize(v.vectors(), r.len());
        assert_eq!(dense.sent_mask.iter().filter(|m| **m).count(), 30);
        let empty = encode_clip(&clip(0, vec![]), 3, &v, &r, &EncodeOptions::default());
        assert!(empty.word_mask().iter().all(|m| !m));
    }

    #[test]
    fn coref_substitutes_name_and_can_be_stripped() {
        let (v, r) = setup();
        let c = clip(1, vec![]);
        let on = encode_clip(&c, 3, &v, &r, &EncodeOptions::default());
        assert_eq!(on.sentences[0].tokens[0], v.lookup("Anna"));
        assert_eq!(on.sentences[0].speaker, r.index_of("Anna"));
        let off = encode_clip(&c, 3, &v, &r, &EncodeOptions { use_coref: false, ..Default::default() });
        assert_eq!(off.sentences[0].tokens[0], v.lookup("i"));
        assert_eq!(off.sentences[0].speaker, None);
    }

    #[test]
    fn multi_box_frame_is_mean_of_rows() {
        let (v, r) = setup();
        let frame = FrameAnnotation {
            frame_id: 0,
            boxes: vec![bx("Anna", "hold", Emotion::Anger), bx("Deogi", "look at/back on", Emotion::Fear)],
            feature: Some(vec![1.0, 2.0, 3.0]),
        };
        let e = encode_clip(&clip(0, vec![frame]), 3, &v, &r, &EncodeOptions::default());
        let qa = QaEncoding { question_len: 0, candidates: vec![] };
        let d = StreamBatch { qa: &qa, clip: &e }.materialize(v.vectors(), r.len());
        let row = d.visual.row(0);
        let dw = v.dim();
        // direct mean of the two per-box behavior rows
        let look: Vec<f64> = (0..dw)
            .map(|k| ["look", "at", "back", "on"].iter().map(|t| v.vector(v.lookup(t))[k]).sum::<f64>() / 4.0)
            .collect();
        for k in 0..dw {
            let want = 0.5 * v.vector(v.lookup("hold"))[k] + 0.5 * look[k];
            assert!((row[3 + k] - want).abs() < 1e-12);
            let want = 0.5 * v.vector(v.lookup("anger"))[k] + 0.5 * v.vector(v.lookup("fear"))[k];
            assert!((row[3 + dw + k] - want).abs() < 1e-12);
        }
        let onehot = &row[3 + 2 * dw..];
        assert_eq!(onehot.iter().sum::<f64>(), 2.0);
        assert_eq!(onehot[r.index_of("Anna").unwrap()], 1.0);
        assert_eq!(onehot[r.index_of("Deogi").unwrap()], 1.0);
    }

    #[test]
    fn flags_follow_speakers_and_boxes() {
        let (v, r) = setup();
        let frame = FrameAnnotation {
            frame_id: 0,
            boxes: vec![bx("Anna", "hold", Emotion::Anger), bx("Deogi", "nod", Emotion::Neutral)],
            feature: None,
        };
        let e = encode_clip(&clip(2, vec![frame]), 3, &v, &r, &EncodeOptions::default());
        let anna = r.index_of("Anna").unwrap();
        let deogi = r.index_of("Deogi").unwrap();
        assert_eq!(sentence_flags(&e, &[anna]), vec![1.0, 1.0]);
        assert_eq!(sentence_flags(&e, &[]), vec![0.0, 0.0]);
        assert_eq!(frame_flags(&e, &[deogi]), vec![1.0]);
        assert_eq!(shot_flags(&e, &[deogi]), vec![1.0]);
        assert_eq!(word_flags(&e, &[anna]).len(), 2 * e.t_word());
        let stripped = encode_clip(&clip(0, e_frames()), 3, &v, &r, &EncodeOptions { use_vmeta: false, ..Default::default() });
        assert_eq!(frame_flags(&stripped, &[deogi]), vec![0.0]);
    }

    fn e_frames() -> Vec<FrameAnnotation> {
        vec![FrameAnnotation {
            frame_id: 0,
            boxes: vec![bx("Deogi", "nod", Emotion::Neutral)],
            feature: None,
        }]
    }
}
