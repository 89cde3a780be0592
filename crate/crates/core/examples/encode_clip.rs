//! Encode one question and its clip into the four model streams and show the
//! dense tensor shapes.

use anyhow::{Context, Result};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use storyqa::features::{build_vocab, dataset_corpus, encode_clip, encode_qa, EncodeOptions, StreamBatch};
use storyqa::synth::{generate_dataset, WorldSpec};

fn main() -> Result<()> {
    let spec = WorldSpec {
        seed: 1,
        n_scenes: 3,
        feature_dim: 16,
        ..WorldSpec::default()
    };
    let (_, ds) = generate_dataset(&spec)?;
    let roster = ds.roster();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let vocab = build_vocab(&dataset_corpus(&ds), &roster, 8, 1, None, &mut rng)?;

    let qa = ds.qas.iter().find(|q| q.difficulty == 3).context("no scene question")?;
    let clip = ds.clip(&qa.clip_id).context("missing clip")?;
    println!("Q: {}", qa.question);
    println!("clip {}: {} shots, {} lines", clip.clip_id, clip.shots.len(), clip.script.len());

    let opts = EncodeOptions::default();
    let qa_enc = encode_qa(qa, &vocab, &roster);
    let clip_enc = encode_clip(clip, spec.feature_dim, &vocab, &roster, &opts);
    let dense = StreamBatch { qa: &qa_enc, clip: &clip_enc }.materialize(vocab.vectors(), roster.len());
    for (i, t) in dense.qa.iter().enumerate() {
        println!("qa[{i}]   {:>3} x {}", t.rows, t.cols);
    }
    println!("script  {:>3} x {}  ({} sentences x {} words)", dense.script.rows, dense.script.cols, clip_enc.t_sent(), clip_enc.t_word());
    println!("visual  {:>3} x {}  ({} shots x {} frames)", dense.visual.rows, dense.visual.cols, clip_enc.t_shot(), clip_enc.t_frame());
    let valid = dense.word_mask.iter().filter(|m| **m).count();
    println!("{valid} valid word rows, {} valid frame rows", dense.frame_mask.iter().filter(|m| **m).count());
    Ok(())
}
