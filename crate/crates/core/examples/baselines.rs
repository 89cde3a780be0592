//! Score the heuristic baselines and the trained QA+V+S baseline on a
//! synthetic test split.

use anyhow::Result;
use storyqa::baselines::{BaselineKind, Heuristic, QaVsConfig};
use storyqa::model::ModelConfig;
use storyqa::synth::{generate_dataset, split_dataset, WorldSpec};
use storyqa::train::{evaluate, fit_qa_v_s, prepare, Embeddings, EvalReport, TrainConfig};

fn main() -> Result<()> {
    let model = ModelConfig::small();
    let spec = WorldSpec {
        seed: 4,
        n_scenes: 120,
        shots_per_scene: (2, 4),
        frames_per_shot: (2, 5),
        script_prob: 1.0,
        fact_lines: (4, 4),
        feature_dim: model.d_v,
        frame_features: false,
        ..WorldSpec::default()
    };
    let (_, ds) = generate_dataset(&spec)?;
    let splits = split_dataset(&ds, (0.6, 0.2, 0.2), spec.seed)?;
    let prepared = prepare(&splits, &ds.roster(), &model, &Embeddings::Lexicon, 0)?;

    println!("{:<16} {}", "", EvalReport::csv_header());
    for kind in [BaselineKind::Shortest, BaselineKind::Longest, BaselineKind::QaSimilarity] {
        let h = Heuristic {
            kind,
            vectors: prepared.vocab.vectors().clone(),
        };
        println!("{:<16} {}", kind.title(), evaluate(&h, &prepared.test).csv_row());
    }

    let cfg = QaVsConfig {
        d: model.d,
        d_w: model.d_w,
        d_v: model.d_v,
        ..QaVsConfig::default()
    };
    let train = TrainConfig {
        lr: 1e-3,
        epochs: 20,
        ..TrainConfig::default()
    };
    let (qvs, log) = fit_qa_v_s(&prepared, &cfg, &train)?;
    eprintln!("QA+V+S best epoch {}, train acc {:.2}", log.best_epoch, evaluate(&qvs, &prepared.train).overall);
    println!("{:<16} {}", BaselineKind::QaVS.title(), evaluate(&qvs, &prepared.test).csv_row());
    Ok(())
}
