//! Retrain ablation variants on a small synthetic world and print the
//! results table.
//!
//! cargo run --example ablation -- 0,1

use anyhow::Result;
use storyqa::config::RunConfig;
use storyqa::synth::{generate_dataset, split_dataset};
use storyqa::train::{ablation_markdown, run_ablation, Embeddings, TrainConfig, Variant};

fn main() -> Result<()> {
    let seeds: Vec<u64> = match std::env::args().nth(1) {
        Some(s) => s.split(',').map(str::parse).collect::<Result<_, _>>()?,
        None => vec![0],
    };
    let mut cfg = RunConfig::default();
    cfg.world.n_scenes = 60;
    cfg.world.shots_per_scene = (2, 4);
    cfg.world.frames_per_shot = (2, 5);
    cfg.world.script_prob = 1.0;
    cfg.world.fact_lines = (4, 4);
    cfg.world.frame_features = false;
    cfg.embeddings = Embeddings::Lexicon;
    let train = TrainConfig {
        lr: 1e-3,
        epochs: 8,
        ..TrainConfig::default()
    };

    let (_, ds) = generate_dataset(&cfg.world)?;
    let splits = split_dataset(&ds, (0.6, 0.2, 0.2), cfg.world.seed)?;
    let rows = run_ablation(&splits, &ds.roster(), &cfg.model, &cfg.embeddings, &train, &Variant::ALL, &seeds)?;
    print!("{}", ablation_markdown(&rows));
    Ok(())
}
