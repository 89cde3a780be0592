//! Multi-level context matching network.
//!
//! Each of the QA, script and visual streams is encoded by its own BiLSTM.
//! A character query (the sum of learned vectors of the names mentioned in
//! the question and one candidate) attends within every sentence and shot to
//! form the high-level streams; the flattened encodings form the low-level
//! ones. Every stream is matched against the QA sequence, fused with a
//! character flag channel, convolved with several kernel sizes, max-pooled
//! and mapped to a scalar. A candidate's score is the sum over enabled
//! streams.

mod checkpoint;
mod config;
pub mod layers;

pub use checkpoint::{Checkpoint, ParamRecord, CHECKPOINT_FORMAT, CHECKPOINT_VERSION};
pub use config::{ModelConfig, Similarity, Stream};

use rand::Rng;

use crate::autograd::{Gradients, ParamStore, Tape, Tensor, Var};
use crate::features::{frame_flags, sentence_flags, shot_flags, word_flags, StreamBatch, Vocabulary};
use crate::schema::Roster;
use crate::Result;
use layers::{bilstm, context_match, dropout, fuse, high_level_attend, ConvHead, LstmIds, Sim};

#[derive(Debug, Clone, PartialEq)]
pub struct Mlcm {
    pub config: ModelConfig,
    pub params: ParamStore,
    pub roster: Roster,
    tokens: Vec<String>,
    name_flags: Vec<bool>,
    /// Vocabulary row of every roster name.
    name_rows: Vec<usize>,
}

/// Graph handles of one forward pass.
pub struct Forward {
    /// `1 × n_candidates`.
    pub scores: Var,
    /// Per candidate, per stream; `None` when the stream is off or empty.
    pub streams: Vec<[Option<Var>; 4]>,
}

/// Plain numbers from one forward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreVector {
    pub total: Vec<f64>,
    pub streams: Vec<[f64; 4]>,
}

impl ScoreVector {
    /// Largest score, lowest index on ties.
    pub fn argmax(&self) -> usize {
        argmax(&self.total)
    }
}

pub fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in xs.iter().enumerate() {
        if *x > xs[best] {
            best = i;
        }
    }
    best
}

struct Encoded {
    h_s: Option<Var>,
    h_v: Option<Var>,
    h_qa: Vec<Option<Var>>,
    queries: Var,
}

impl Mlcm {
    pub fn new<R: Rng>(config: ModelConfig, vocab: &Vocabulary, roster: &Roster, rng: &mut R) -> Result<Self> {
        config.validate()?;
        if vocab.dim() != config.d_w {
            return Err(crate::Error::Config(format!(
                "vocabulary dim {} differs from d_w {}",
                vocab.dim(),
                config.d_w
            )));
        }
        let (d, h, r) = (config.d, config.d / 2, roster.len());
        let mut p = ParamStore::default();
        p.add("embed", vocab.vectors().clone());
        if !config.tie_bank {
            p.add_normal("bank", r, d, 1.0 / (d as f64).sqrt(), rng);
        }
        for (name, input) in [
            ("qa", config.d_w),
            ("script", config.d_w + r),
            ("visual", config.d_v + 2 * config.d_w + r),
        ] {
            LstmIds::init(&mut p, &format!("{name}.fwd"), input, h, rng);
            LstmIds::init(&mut p, &format!("{name}.bwd"), input, h, rng);
        }
        for s in Stream::ALL {
            ConvHead::init(&mut p, s.name(), 3 * d + 1, &config.kernels, config.filters, rng);
            if config.similarity == Similarity::Trilinear {
                let bound = 1.0 / (d as f64).sqrt();
                p.add_uniform(&format!("{}.sim.e", s.name()), d, 1, bound, rng);
                p.add_uniform(&format!("{}.sim.q", s.name()), d, 1, bound, rng);
                p.add_uniform(&format!("{}.sim.eq", s.name()), 1, d, bound, rng);
            }
        }
        Ok(Self::assemble(config, p, roster.clone(), vocab))
    }

    fn assemble(config: ModelConfig, params: ParamStore, roster: Roster, vocab: &Vocabulary) -> Self {
        let name_rows = roster.names().iter().map(|n| vocab.lookup(n.as_str())).collect();
        Self {
            config,
            params,
            roster,
            tokens: vocab.tokens().to_vec(),
            name_flags: vocab.name_flags().to_vec(),
            name_rows,
        }
    }

    /// The vocabulary with the current (trained) word vectors.
    pub fn vocabulary(&self) -> Vocabulary {
        let embed = self.params.value(self.id("embed")).clone();
        Vocabulary::from_parts(self.tokens.clone(), self.name_flags.clone(), embed).expect("consistent parts")
    }

    fn id(&self, name: &str) -> usize {
        self.params.id(name).unwrap_or_else(|| panic!("missing parameter {name}"))
    }

    fn lstm_pair(&self, name: &str) -> (LstmIds, LstmIds) {
        let get = |dir: &str| LstmIds::lookup(&self.params, &format!("{name}.{dir}")).expect("lstm parameters");
        (get("fwd"), get("bwd"))
    }

    fn head(&self, s: Stream) -> ConvHead {
        ConvHead::lookup(&self.params, s.name(), &self.config.kernels).expect("head parameters")
    }

    fn sim(&self, s: Stream) -> Sim {
        match self.config.similarity {
            Similarity::Dot => Sim::Dot,
            Similarity::Trilinear => Sim::Trilinear(
                self.id(&format!("{}.sim.e", s.name())),
                self.id(&format!("{}.sim.q", s.name())),
                self.id(&format!("{}.sim.eq", s.name())),
            ),
        }
    }

    fn encode<'a>(&'a self, tape: &mut Tape<'a>, batch: StreamBatch) -> Encoded {
        let cfg = &self.config;
        let r = self.roster.len();
        let clip = batch.clip;
        let emb = if cfg.freeze_embed {
            tape.constant(self.params.value(self.id("embed")).clone())
        } else {
            tape.param(self.id("embed"))
        };

        let word_mask = clip.word_mask();
        let h_s = if cfg.use_script && word_mask.iter().any(|m| *m) {
            let (ts, tw) = (clip.t_sent(), clip.t_word());
            let mut rows = vec![Vec::new(); ts * tw];
            let mut onehot = Tensor::zeros(ts * tw, r);
            for (s, sent) in clip.sentences.iter().enumerate() {
                for (w, &tok) in sent.tokens.iter().enumerate() {
                    rows[s * tw + w] = vec![(tok, 1.0)];
                    if let Some(sp) = sent.speaker {
                        onehot.set(s * tw + w, sp, 1.0);
                    }
                }
            }
            let words = tape.sparse_rows(emb, rows);
            let onehot = tape.constant(onehot);
            let x = tape.concat_cols(&[words, onehot]);
            let (f, b) = self.lstm_pair("script");
            Some(bilstm(tape, f, b, x, ts, tw, &word_mask))
        } else {
            None
        };

        let frame_mask = clip.frame_mask();
        let h_v = if cfg.use_visual && frame_mask.iter().any(|m| *m) {
            let (tsh, tf) = (clip.t_shot(), clip.t_frame());
            let n = tsh * tf;
            let mut feats = Tensor::zeros(n, clip.d_v);
            let mut beh = vec![Vec::new(); n];
            let mut emo = vec![Vec::new(); n];
            let mut onehot = Tensor::zeros(n, r);
            for (s, shot) in clip.shots.iter().enumerate() {
                for (f, frame) in shot.iter().enumerate() {
                    let row = s * tf + f;
                    feats.row_mut(row).copy_from_slice(&frame.feature);
                    beh[row] = frame.behavior.clone();
                    emo[row] = frame.emotion.clone();
                    for &nm in &frame.names {
                        onehot.set(row, nm, 1.0);
                    }
                }
            }
            let feats = tape.constant(feats);
            let beh = tape.sparse_rows(emb, beh);
            let emo = tape.sparse_rows(emb, emo);
            let onehot = tape.constant(onehot);
            let x = tape.concat_cols(&[feats, beh, emo, onehot]);
            let (f, b) = self.lstm_pair("visual");
            Some(bilstm(tape, f, b, x, tsh, tf, &frame_mask))
        } else {
            None
        };

        let cands = &batch.qa.candidates;
        let tq = batch.qa.max_len();
        let mut h_qa = vec![None; cands.len()];
        if tq > 0 {
            let mut rows = vec![Vec::new(); cands.len() * tq];
            let mut mask = vec![false; cands.len() * tq];
            for (i, c) in cands.iter().enumerate() {
                for (t, &tok) in c.tokens.iter().enumerate() {
                    rows[i * tq + t] = vec![(tok, 1.0)];
                    mask[i * tq + t] = true;
                }
            }
            let x = tape.sparse_rows(emb, rows);
            let (f, b) = self.lstm_pair("qa");
            let h = bilstm(tape, f, b, x, cands.len(), tq, &mask);
            for (i, c) in cands.iter().enumerate() {
                if !c.tokens.is_empty() {
                    h_qa[i] = Some(tape.select_rows(h, (i * tq..i * tq + c.tokens.len()).collect()));
                }
            }
        }

        let entries: Vec<Vec<(usize, f64)>> = cands
            .iter()
            .map(|c| {
                c.names
                    .iter()
                    .map(|&n| (if cfg.tie_bank { self.name_rows[n] } else { n }, 1.0))
                    .collect()
            })
            .collect();
        let table = if cfg.tie_bank { emb } else { tape.param(self.id("bank")) };
        let queries = tape.sparse_rows(table, entries);
        Encoded { h_s, h_v, h_qa, queries }
    }

    /// Builds the graph for all candidates of `batch`. Dropout is applied
    /// only when `rng` is given.
    pub fn forward<'a, R: Rng>(&'a self, tape: &mut Tape<'a>, batch: StreamBatch, mut rng: Option<&mut R>) -> Forward {
        let cfg = &self.config;
        let clip = batch.clip;
        let enc = self.encode(tape, batch);
        let sent_mask: Vec<bool> = clip.sentences.iter().map(|s| !s.tokens.is_empty()).collect();
        let shot_mask: Vec<bool> = clip.shots.iter().map(|s| !s.is_empty()).collect();
        let word_mask = clip.word_mask();
        let frame_mask = clip.frame_mask();

        let mut totals = Vec::new();
        let mut streams = Vec::new();
        for (i, cand) in batch.qa.candidates.iter().enumerate() {
            let mut per = [None; 4];
            if let Some(hqa) = enc.h_qa[i] {
                let q = tape.select_rows(enc.queries, vec![i]);
                for s in Stream::ALL {
                    if !cfg.stream_enabled(s) {
                        continue;
                    }
                    let (h, groups, inner, mask_in, mask_out, flags) = match s {
                        Stream::ScriptHigh | Stream::ScriptLow => {
                            let Some(h) = enc.h_s else { continue };
                            let (g, t) = (clip.t_sent(), clip.t_word());
                            if s == Stream::ScriptHigh {
                                (h, g, t, &word_mask, &sent_mask, sentence_flags(clip, &cand.names))
                            } else {
                                (h, g, t, &word_mask, &word_mask, word_flags(clip, &cand.names))
                            }
                        }
                        Stream::VisualHigh | Stream::VisualLow => {
                            let Some(h) = enc.h_v else { continue };
                            let (g, t) = (clip.t_shot(), clip.t_frame());
                            if s == Stream::VisualHigh {
                                (h, g, t, &frame_mask, &shot_mask, shot_flags(clip, &cand.names))
                            } else {
                                (h, g, t, &frame_mask, &frame_mask, frame_flags(clip, &cand.names))
                            }
                        }
                    };
                    let e = match s {
                        Stream::ScriptHigh | Stream::VisualHigh => high_level_attend(tape, h, q, groups, inner, mask_in).0,
                        _ => h,
                    };
                    let (c, _) = context_match(tape, e, hqa, self.sim(s));
                    let mut x = fuse(tape, e, c, &flags, mask_out);
                    if let Some(r) = rng.as_deref_mut() {
                        x = dropout(tape, x, cfg.dropout, r);
                    }
                    per[s.index()] = Some(self.head(s).score(tape, x, mask_out));
                }
            }
            let parts: Vec<Var> = per.iter().flatten().copied().collect();
            let total = match parts.split_first() {
                None => tape.constant(Tensor::scalar(0.0)),
                Some((first, rest)) => rest.iter().fold(*first, |acc, v| tape.add(acc, *v)),
            };
            totals.push(total);
            streams.push(per);
        }
        let scores = tape.concat_cols(&totals);
        Forward { scores, streams }
    }

    /// Scores without dropout.
    pub fn score(&self, batch: StreamBatch) -> ScoreVector {
        let mut tape = Tape::new(&self.params);
        let fw = self.forward::<rand_chacha::ChaCha8Rng>(&mut tape, batch, None);
        ScoreVector {
            total: tape.value(fw.scores).data.clone(),
            streams: fw
                .streams
                .iter()
                .map(|per| per.map(|v| v.map_or(0.0, |v| tape.value(v).to_scalar())))
                .collect(),
        }
    }

    pub fn predict(&self, batch: StreamBatch) -> usize {
        self.score(batch).argmax()
    }

    /// Cross-entropy loss, its gradients and the scores of one item.
    pub fn loss_and_grad<R: Rng>(&self, batch: StreamBatch, target: usize, rng: Option<&mut R>) -> (f64, Gradients, Vec<f64>) {
        let mut tape = Tape::new(&self.params);
        let fw = self.forward(&mut tape, batch, rng);
        let loss = tape.cross_entropy(fw.scores, target);
        let grads = tape.backward(loss);
        (tape.value(loss).to_scalar(), grads, tape.value(fw.scores).data.clone())
    }

    pub fn loss(&self, batch: StreamBatch, target: usize) -> f64 {
        let mut tape = Tape::new(&self.params);
        let fw = self.forward::<rand_chacha::ChaCha8Rng>(&mut tape, batch, None);
        let loss = tape.cross_entropy(fw.scores, target);
        tape.value(loss).to_scalar()
    }
}

/// Softmax cross-entropy of `scores` against `target`.
pub fn cross_entropy(scores: &[f64], target: usize) -> f64 {
    -crate::autograd::softmax(scores)[target].ln()
}
