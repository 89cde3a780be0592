//! Reference answer selectors: length heuristics, question–answer embedding
//! similarity, and a BiLSTM + mean-pool + MLP model over QA, script and
//! visual streams.

use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::autograd::{Gradients, ParamStore, Tape, Tensor, Var};
use crate::features::{QaEncoding, StreamBatch, Vocabulary};
use crate::model::layers::{bilstm, dropout, LstmIds};
use crate::model::argmax;
use crate::schema::Roster;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselineKind {
    Shortest,
    Longest,
    QaSimilarity,
    QaVS,
}

impl BaselineKind {
    pub const ALL: [BaselineKind; 4] = [Self::Shortest, Self::Longest, Self::QaSimilarity, Self::QaVS];

    pub fn name(self) -> &'static str {
        match self {
            Self::Shortest => "shortest",
            Self::Longest => "longest",
            Self::QaSimilarity => "qa_similarity",
            Self::QaVS => "qa_v_s",
        }
    }

    /// Row label in result tables.
    pub fn title(self) -> &'static str {
        match self {
            Self::Shortest => "Shortest Answer",
            Self::Longest => "Longest Answer",
            Self::QaSimilarity => "QA Similarity",
            Self::QaVS => "QA+V+S",
        }
    }
}

impl FromStr for BaselineKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.to_ascii_lowercase().replace(['-', ' ', '+'], "_");
        Self::ALL
            .into_iter()
            .find(|k| k.name() == key || k.name().replace('_', "") == key.replace('_', ""))
            .ok_or_else(|| Error::Config(format!("unknown baseline '{s}'")))
    }
}

fn pick(lengths: impl Iterator<Item = usize>, longest: bool) -> usize {
    let lens: Vec<f64> = lengths.map(|l| if longest { l as f64 } else { -(l as f64) }).collect();
    argmax(&lens)
}

/// Index of the candidate with the fewest tokens; lowest index on ties.
pub fn shortest_answer<S: AsRef<[String]>>(candidates: &[S]) -> usize {
    pick(candidates.iter().map(|c| c.as_ref().len()), false)
}

/// Index of the candidate with the most tokens; lowest index on ties.
pub fn longest_answer<S: AsRef<[String]>>(candidates: &[S]) -> usize {
    pick(candidates.iter().map(|c| c.as_ref().len()), true)
}

/// Cosine similarity; 0 when either vector has zero norm.
pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}

fn mean_rows(ids: &[usize], vectors: &Tensor) -> Vec<f64> {
    let mut out = vec![0.0; vectors.cols];
    for &i in ids {
        for (o, x) in out.iter_mut().zip(vectors.row(i)) {
            *o += x;
        }
    }
    if !ids.is_empty() {
        for o in &mut out {
            *o /= ids.len() as f64;
        }
    }
    out
}

/// Cosine between the mean question vector and each mean candidate vector.
pub fn similarity_scores(question: &[usize], candidates: &[&[usize]], vectors: &Tensor) -> Vec<f64> {
    let q = mean_rows(question, vectors);
    candidates.iter().map(|c| cosine(&q, &mean_rows(c, vectors))).collect()
}

/// Candidate whose mean word vector is closest in angle to the question's.
pub fn qa_similarity<S: AsRef<[String]>>(question: &[String], candidates: &[S], vocab: &Vocabulary) -> usize {
    let ids = |t: &[String]| t.iter().map(|w| vocab.lookup(w)).collect::<Vec<_>>();
    let q = ids(question);
    let cs: Vec<Vec<usize>> = candidates.iter().map(|c| ids(c.as_ref())).collect();
    let refs: Vec<&[usize]> = cs.iter().map(Vec::as_slice).collect();
    argmax(&similarity_scores(&q, &refs, vocab.vectors()))
}

/// A non-learned baseline bound to word vectors, predicting from encoded items.
#[derive(Debug, Clone)]
pub struct Heuristic {
    pub kind: BaselineKind,
    pub vectors: Tensor,
}

impl Heuristic {
    pub fn predict_encoded(&self, qa: &QaEncoding) -> usize {
        let answers: Vec<&[usize]> = qa.candidates.iter().map(|c| &c.tokens[qa.question_len..]).collect();
        match self.kind {
            BaselineKind::Shortest => pick(answers.iter().map(|a| a.len()), false),
            BaselineKind::Longest => pick(answers.iter().map(|a| a.len()), true),
            _ => {
                let question = qa.candidates.first().map_or(&[][..], |c| &c.tokens[..qa.question_len]);
                argmax(&similarity_scores(question, &answers, &self.vectors))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QaVsConfig {
    pub d: usize,
    pub d_w: usize,
    pub d_v: usize,
    pub hidden: [usize; 2],
    pub dropout: f64,
}

impl Default for QaVsConfig {
    fn default() -> Self {
        Self {
            d: 300,
            d_w: 300,
            d_v: 512,
            hidden: [300, 100],
            dropout: 0.5,
        }
    }
}

/// BiLSTM per stream, mean over valid steps, concatenation, then a
/// two-hidden-layer perceptron per candidate.
#[derive(Debug, Clone, PartialEq)]
pub struct QaVsModel {
    pub config: QaVsConfig,
    pub params: ParamStore,
    roster_len: usize,
}

impl QaVsModel {
    pub fn new<R: Rng>(config: QaVsConfig, vocab: &Vocabulary, roster: &Roster, rng: &mut R) -> Result<Self> {
        if !config.d.is_multiple_of(2) || config.d == 0 || vocab.dim() != config.d_w {
            return Err(Error::Config("qa_v_s: d must be even and d_w must match the vocabulary".into()));
        }
        let (d, h, r) = (config.d, config.d / 2, roster.len());
        let mut p = ParamStore::default();
        p.add("embed", vocab.vectors().clone());
        for (name, input) in [
            ("qa", config.d_w),
            ("script", config.d_w + r),
            ("visual", config.d_v + 2 * config.d_w + r),
        ] {
            LstmIds::init(&mut p, &format!("{name}.fwd"), input, h, rng);
            LstmIds::init(&mut p, &format!("{name}.bwd"), input, h, rng);
        }
        let sizes = [3 * d, config.hidden[0], config.hidden[1], 1];
        for l in 0..3 {
            let bound = (6.0 / sizes[l] as f64).sqrt();
            p.add_uniform(&format!("mlp{l}.w"), sizes[l], sizes[l + 1], bound, rng);
            p.add_zeros(&format!("mlp{l}.b"), 1, sizes[l + 1]);
        }
        Ok(Self {
            config,
            params: p,
            roster_len: r,
        })
    }

    fn id(&self, name: &str) -> usize {
        self.params.id(name).unwrap_or_else(|| panic!("missing parameter {name}"))
    }

    fn lstm_pair(&self, name: &str) -> (LstmIds, LstmIds) {
        let get = |dir: &str| LstmIds::lookup(&self.params, &format!("{name}.{dir}")).expect("lstm parameters");
        (get("fwd"), get("bwd"))
    }

    /// `1 × n_candidates` scores; dropout only with `rng`.
    pub fn forward<'a, R: Rng>(&'a self, tape: &mut Tape<'a>, batch: StreamBatch, mut rng: Option<&mut R>) -> Var {
        let d = self.config.d;
        let r = self.roster_len;
        let clip = batch.clip;
        let emb = tape.param(self.id("embed"));
        let zero = tape.constant(Tensor::zeros(1, d));

        let word_mask = clip.word_mask();
        let script = if word_mask.iter().any(|m| *m) {
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
            let h = bilstm(tape, f, b, x, ts, tw, &word_mask);
            tape.mean_rows(h, word_mask)
        } else {
            zero
        };

        let frame_mask = clip.frame_mask();
        let visual = if frame_mask.iter().any(|m| *m) {
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
            let h = bilstm(tape, f, b, x, tsh, tf, &frame_mask);
            tape.mean_rows(h, frame_mask)
        } else {
            zero
        };

        let cands = &batch.qa.candidates;
        let tq = batch.qa.max_len().max(1);
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
        let h = tape.reshape(h, cands.len(), tq * d);
        // mean over each candidate's valid steps, as one sparse reduction
        let pooled: Vec<Var> = (0..cands.len())
            .map(|i| {
                let hi = tape.select_rows(h, vec![i]);
                let hi = tape.reshape(hi, tq, d);
                tape.mean_rows(hi, mask[i * tq..(i + 1) * tq].to_vec())
            })
            .collect();
        let qa = tape.concat_rows(&pooled);
        let ones = tape.constant(Tensor::from_vec(cands.len(), 1, vec![1.0; cands.len()]));
        let s_rows = tape.matmul(ones, script);
        let v_rows = tape.matmul(ones, visual);
        let mut z = tape.concat_cols(&[qa, s_rows, v_rows]);
        for l in 0..3 {
            let (w, b) = (tape.param(self.id(&format!("mlp{l}.w"))), tape.param(self.id(&format!("mlp{l}.b"))));
            let y = tape.matmul(z, w);
            z = tape.add_row(y, b);
            if l < 2 {
                z = tape.relu(z);
                if let Some(r) = rng.as_deref_mut() {
                    z = dropout(tape, z, self.config.dropout, r);
                }
            }
        }
        tape.reshape(z, 1, cands.len())
    }

    pub fn scores(&self, batch: StreamBatch) -> Vec<f64> {
        let mut tape = Tape::new(&self.params);
        let s = self.forward::<rand_chacha::ChaCha8Rng>(&mut tape, batch, None);
        tape.value(s).data.clone()
    }

    pub fn predict(&self, batch: StreamBatch) -> usize {
        argmax(&self.scores(batch))
    }

    pub fn loss_and_grad<R: Rng>(&self, batch: StreamBatch, target: usize, rng: Option<&mut R>) -> (f64, Gradients, Vec<f64>) {
        let mut tape = Tape::new(&self.params);
        let s = self.forward(&mut tape, batch, rng);
        let loss = tape.cross_entropy(s, target);
        let grads = tape.backward(loss);
        (tape.value(loss).to_scalar(), grads, tape.value(s).data.clone())
    }

    pub fn loss(&self, batch: StreamBatch, target: usize) -> f64 {
        let mut tape = Tape::new(&self.params);
        let s = self.forward::<rand_chacha::ChaCha8Rng>(&mut tape, batch, None);
        let loss = tape.cross_entropy(s, target);
        tape.value(loss).to_scalar()
    }
}
