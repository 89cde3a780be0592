//! Synthesize a world, train the full model, and compare it with the
//! QA-similarity baseline on held-out episodes.
//!
//! Any `section.key=value` argument overrides the run configuration:
//!
//! cargo run --release --example train_full -- world.n_scenes=120 train.epochs=20

use std::time::Instant;

use anyhow::Result;
use storyqa::config::RunConfig;
use storyqa::train::{run_experiment, Embeddings, TrainConfig};

fn main() -> Result<()> {
    let mut cfg = RunConfig::default();
    cfg.world.n_scenes = 60;
    cfg.world.shots_per_scene = (2, 4);
    cfg.world.frames_per_shot = (2, 5);
    cfg.world.script_prob = 1.0;
    cfg.world.fact_lines = (4, 4);
    cfg.world.frame_features = false;
    cfg.embeddings = Embeddings::Lexicon;
    cfg.train = TrainConfig {
        lr: 1e-3,
        epochs: 10,
        target_train_acc: Some(95.0),
        ..TrainConfig::default()
    };
    let args: Vec<String> = std::env::args().skip(1).collect();
    let pairs: Vec<(&str, &str)> = args.iter().filter_map(|a| a.split_once('=')).collect();
    let cfg = cfg.with_assignments(pairs)?;
    cfg.validate()?;

    let t = Instant::now();
    let r = run_experiment(&cfg.experiment())?;
    print!("{}", r.log.to_csv());
    println!("trained in {:.1}s, best epoch {}", t.elapsed().as_secs_f64(), r.log.best_epoch);
    println!("            {}", storyqa::train::EvalReport::csv_header());
    println!("model       {}", r.test.csv_row());
    println!("qa-sim      {}", r.qa_similarity.csv_row());
    Ok(())
}
