use std::path::PathBuf;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{evaluate, train, EvalReport, TrainConfig, TrainLog};
use crate::baselines::{BaselineKind, Heuristic, QaVsConfig, QaVsModel};
use crate::features::{Pretrained, build_vocab, dataset_corpus, encode_split, EncodedSplit, Vocabulary};
use crate::model::{Mlcm, ModelConfig};
use crate::schema::Roster;
use crate::synth::lexicon::lexicon_vectors;
use crate::synth::{generate_dataset, split_dataset, SplitSet, WorldSpec};
use crate::Result;

/// Everything needed to reproduce one synth → train → eval run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Experiment {
    pub world: WorldSpec,
    /// Train, validation and test episode fractions.
    pub split: [f64; 3],
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub embeddings: Embeddings,
}

impl Default for Experiment {
    fn default() -> Self {
        Self {
            world: WorldSpec::default(),
            split: [0.6, 0.2, 0.2],
            model: ModelConfig::default(),
            train: TrainConfig::default(),
            embeddings: Embeddings::default(),
        }
    }
}

/// Where initial word vectors come from.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Embeddings {
    /// Independent Gaussian vectors.
    #[default]
    Random,
    /// Inflections of each behavior verb share a direction.
    Lexicon,
    /// A whitespace-separated `word v1 … vd` file.
    File(PathBuf),
}

impl Embeddings {
    pub fn load(&self, dim: usize, seed: u64) -> Result<Option<Pretrained>> {
        match self {
            Embeddings::Random => Ok(None),
            Embeddings::Lexicon => Ok(Some(lexicon_vectors(dim, 0.1, &mut ChaCha8Rng::seed_from_u64(seed ^ 0x6c6578)))),
            Embeddings::File(p) => Pretrained::load(p, dim).map(Some),
        }
    }
}

/// Encoded splits sharing one vocabulary.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub roster: Roster,
    pub vocab: Vocabulary,
    pub train: EncodedSplit,
    pub val: EncodedSplit,
    pub test: EncodedSplit,
}

/// Builds a vocabulary over all splits (unseen words keep their random
/// start) and encodes each split with the options of `model`.
pub fn prepare(splits: &SplitSet, roster: &Roster, model: &ModelConfig, embeddings: &Embeddings, seed: u64) -> Result<Prepared> {
    let pretrained = embeddings.load(model.d_w, seed)?;
    let mut corpus = dataset_corpus(&splits.train);
    corpus.extend(dataset_corpus(&splits.val));
    corpus.extend(dataset_corpus(&splits.test));
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x0076_6f63_6162);
    let vocab = build_vocab(&corpus, roster, model.d_w, 1, pretrained.as_ref(), &mut rng)?;
    let opts = model.encode_options();
    let enc = |ds| encode_split(ds, model.d_v, &vocab, roster, &opts);
    Ok(Prepared {
        train: enc(&splits.train),
        val: enc(&splits.val),
        test: enc(&splits.test),
        roster: roster.clone(),
        vocab,
    })
}

/// Fresh model whose initial parameters depend only on `seed`.
pub fn init_model(prepared: &Prepared, model: &ModelConfig, seed: u64) -> Result<Mlcm> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x696e_6974);
    Mlcm::new(model.clone(), &prepared.vocab, &prepared.roster, &mut rng)
}

/// Builds and fits a fresh model on prepared data.
pub fn fit(prepared: &Prepared, model: &ModelConfig, cfg: &TrainConfig) -> Result<(Mlcm, TrainLog)> {
    let mut m = init_model(prepared, model, cfg.seed)?;
    let log = train(&mut m, &prepared.train, Some(&prepared.val), cfg)?;
    Ok((m, log))
}

/// Builds and fits the QA+V+S baseline on prepared data.
pub fn fit_qa_v_s(prepared: &Prepared, model: &QaVsConfig, cfg: &TrainConfig) -> Result<(QaVsModel, TrainLog)> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x716176);
    let mut m = QaVsModel::new(model.clone(), &prepared.vocab, &prepared.roster, &mut rng)?;
    let log = train(&mut m, &prepared.train, Some(&prepared.val), cfg)?;
    Ok((m, log))
}

#[derive(Debug, Clone)]
pub struct ExperimentResult {
    pub model: Mlcm,
    pub log: TrainLog,
    pub train: EvalReport,
    pub val: EvalReport,
    pub test: EvalReport,
    /// QA-similarity baseline on the test split, with the initial vectors.
    pub qa_similarity: EvalReport,
}

pub fn run_experiment(exp: &Experiment) -> Result<ExperimentResult> {
    let (_, ds) = generate_dataset(&exp.world)?;
    let splits = split_dataset(&ds, (exp.split[0], exp.split[1], exp.split[2]), exp.world.seed)?;
    let prepared = prepare(&splits, &ds.roster(), &exp.model, &exp.embeddings, exp.train.seed)?;
    let baseline = Heuristic {
        kind: BaselineKind::QaSimilarity,
        vectors: prepared.vocab.vectors().clone(),
    };
    let qa_similarity = evaluate(&baseline, &prepared.test);
    let (model, log) = fit(&prepared, &exp.model, &exp.train)?;
    let echo = serde_json::to_value(exp).expect("experiments serialize");
    Ok(ExperimentResult {
        train: evaluate(&model, &prepared.train),
        val: evaluate(&model, &prepared.val),
        test: evaluate(&model, &prepared.test).with_config(echo),
        qa_similarity,
        model,
        log,
    })
}
