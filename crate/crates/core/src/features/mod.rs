//! Vocabulary and the padded, masked QA, script and visual streams.

mod encode;
mod vocab;

pub use encode::{
    encode_clip, encode_qa, encode_qa_pair, frame_flags, sentence_flags, shot_flags, word_flags, ClipEncoding,
    DenseBatch, EncodeOptions, FrameRow, Limits, Mix, QaEncoding, QaSeq, Sentence, StreamBatch,
};
pub use vocab::{
    build_vocab, dataset_corpus, label_corpus, normalize, Pretrained, Vocabulary, PAD, PAD_TOKEN, UNK, UNK_TOKEN,
};

use crate::schema::{Dataset, Roster};

/// A QA item ready for the model: its encoded QA sequences and the index of
/// its clip in [`EncodedSplit::clips`].
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedItem {
    pub qid: String,
    pub qa: QaEncoding,
    pub clip: usize,
    pub correct_idx: usize,
    pub difficulty: u8,
}

/// A whole split encoded once; clips are shared by their questions.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedSplit {
    pub clips: Vec<ClipEncoding>,
    pub items: Vec<EncodedItem>,
}

impl EncodedSplit {
    pub fn batch(&self, i: usize) -> StreamBatch<'_> {
        let item = &self.items[i];
        StreamBatch {
            qa: &item.qa,
            clip: &self.clips[item.clip],
        }
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }
}

/// Encodes every QA of `ds` whose clip exists. Clips without questions are
/// skipped.
pub fn encode_split(ds: &Dataset, d_v: usize, vocab: &Vocabulary, roster: &Roster, opts: &EncodeOptions) -> EncodedSplit {
    let index = ds.clip_index();
    let mut slots = std::collections::HashMap::new();
    let mut clips = Vec::new();
    let mut items = Vec::new();
    for qa in &ds.qas {
        let Some(clip) = index.get(qa.clip_id.as_str()) else { continue };
        let slot = *slots.entry(qa.clip_id.clone()).or_insert_with(|| {
            clips.push(encode_clip(clip, d_v, vocab, roster, opts));
            clips.len() - 1
        });
        items.push(EncodedItem {
            qid: qa.qid.clone(),
            qa: encode_qa(qa, vocab, roster),
            clip: slot,
            correct_idx: qa.correct_idx,
            difficulty: qa.difficulty,
        });
    }
    EncodedSplit { clips, items }
}
