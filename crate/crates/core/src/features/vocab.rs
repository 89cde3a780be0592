use std::collections::{HashMap, HashSet};
use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::autograd::Tensor;
use crate::schema::{label_words, Behavior, Dataset, Emotion, Roster};
use crate::{Error, Result};

pub const PAD: usize = 0;
pub const UNK: usize = 1;
pub const PAD_TOKEN: &str = "<pad>";
pub const UNK_TOKEN: &str = "<unk>";

/// Token table with one vector per entry. Roster names are stored with their
/// case; every other token is lowercased.
#[derive(Debug, Clone, PartialEq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    is_name: Vec<bool>,
    index: HashMap<String, usize>,
    vectors: Tensor,
}

impl Vocabulary {
    /// Rebuilds a vocabulary from its parts, e.g. after loading a checkpoint.
    pub fn from_parts(tokens: Vec<String>, is_name: Vec<bool>, vectors: Tensor) -> Result<Self> {
        if tokens.len() != is_name.len() || tokens.len() != vectors.rows || tokens.len() < 2 {
            return Err(Error::Config("vocabulary parts disagree in length".into()));
        }
        if tokens[PAD] != PAD_TOKEN || tokens[UNK] != UNK_TOKEN {
            return Err(Error::Config("vocabulary must start with <pad>, <unk>".into()));
        }
        let index = tokens.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        Ok(Self {
            tokens,
            is_name,
            index,
            vectors,
        })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.vectors.cols
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn token(&self, i: usize) -> &str {
        &self.tokens[i]
    }

    pub fn is_name(&self, i: usize) -> bool {
        self.is_name[i]
    }

    pub fn name_flags(&self) -> &[bool] {
        &self.is_name
    }

    pub fn vectors(&self) -> &Tensor {
        &self.vectors
    }

    pub fn vector(&self, i: usize) -> &[f64] {
        self.vectors.row(i)
    }

    /// Index of a raw token: names match exactly, other words lowercased.
    pub fn lookup(&self, raw: &str) -> usize {
        if let Some(&i) = self.index.get(raw) {
            if self.is_name[i] {
                return i;
            }
        }
        self.index.get(&raw.to_lowercase()).copied().unwrap_or(UNK)
    }

    pub fn contains(&self, raw: &str) -> bool {
        self.lookup(raw) != UNK
    }
}

/// Word vectors read from a text file: a token then `dim` numbers per line.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Pretrained {
    pub dim: usize,
    pub vectors: HashMap<String, Vec<f64>>,
}

impl Pretrained {
    pub fn parse(text: &str, dim: usize) -> Result<Self> {
        let mut vectors = HashMap::new();
        for (n, line) in text.lines().enumerate() {
            let mut parts = line.split_whitespace();
            let Some(token) = parts.next() else { continue };
            let values: Vec<f64> = parts
                .map(|p| p.parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::parse(format!("line {}", n + 1), format!("bad number: {e}")))?;
            if values.len() != dim {
                return Err(Error::parse(
                    format!("line {}", n + 1),
                    format!("expected {dim} values after '{token}', found {}", values.len()),
                ));
            }
            vectors.insert(token.to_string(), values);
        }
        Ok(Self { dim, vectors })
    }

    pub fn load(path: &Path, dim: usize) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, dim).map_err(|e| match e {
            Error::Parse { locus, message } => Error::Parse {
                locus: format!("{}: {locus}", path.display()),
                message,
            },
            e => e,
        })
    }
}

/// Lowercases everything but roster names.
pub fn normalize(token: &str, names: &HashSet<&str>) -> String {
    if names.contains(token) {
        token.to_string()
    } else {
        token.to_lowercase()
    }
}

/// Every raw token a dataset can feed the encoder: questions, candidates,
/// dialogue and the behavior and emotion label words.
pub fn dataset_corpus(ds: &Dataset) -> Vec<String> {
    let mut out = Vec::new();
    for qa in &ds.qas {
        out.extend(qa.question_tokens());
        for i in 0..qa.candidates.len() {
            out.extend(qa.candidate_tokens(i));
        }
    }
    for clip in &ds.episodes {
        for line in &clip.script {
            out.extend(line.tokens());
        }
    }
    out.extend(label_corpus());
    out
}

pub fn label_corpus() -> Vec<String> {
    let mut out: Vec<String> = Behavior::all()
        .flat_map(|b| label_words(b.label()))
        .map(str::to_string)
        .collect();
    out.extend(Emotion::ALL.iter().map(|e| e.label().to_string()));
    out
}

/// Builds the token table. Order: PAD, UNK, roster names, then corpus tokens
/// by first occurrence. Tokens seen fewer than `min_freq` times are left out.
/// Pretrained vectors replace the random start for matching tokens except
/// roster names.
pub fn build_vocab<R: Rng>(
    corpus: &[String],
    roster: &Roster,
    dim: usize,
    min_freq: usize,
    pretrained: Option<&Pretrained>,
    rng: &mut R,
) -> Result<Vocabulary> {
    if corpus.is_empty() {
        return Err(Error::Config("vocabulary corpus is empty".into()));
    }
    if let Some(p) = pretrained {
        if p.dim != dim {
            return Err(Error::Config(format!("pretrained vectors have dim {}, expected {dim}", p.dim)));
        }
    }
    let names: HashSet<&str> = roster.names().iter().map(|n| n.as_str()).collect();
    let mut tokens = vec![PAD_TOKEN.to_string(), UNK_TOKEN.to_string()];
    let mut is_name = vec![false, false];
    for n in roster.names() {
        tokens.push(n.0.clone());
        is_name.push(true);
    }
    let mut counts: HashMap<String, usize> = HashMap::new();
    let mut order = Vec::new();
    for raw in corpus {
        let t = normalize(raw, &names);
        let c = counts.entry(t.clone()).or_insert(0);
        if *c == 0 {
            order.push(t);
        }
        *c += 1;
    }
    for t in order {
        if counts[&t] >= min_freq.max(1) && !names.contains(t.as_str()) && t != PAD_TOKEN && t != UNK_TOKEN {
            tokens.push(t);
            is_name.push(false);
        }
    }
    let normal = Normal::new(0.0, 1.0 / (dim as f64).sqrt()).expect("valid std");
    let mut vectors = Tensor::zeros(tokens.len(), dim);
    for (i, t) in tokens.iter().enumerate().skip(1) {
        let row: Vec<f64> = match pretrained.and_then(|p| p.vectors.get(t)) {
            Some(v) if !is_name[i] => v.clone(),
            _ => (0..dim).map(|_| normal.sample(rng)).collect(),
        };
        vectors.row_mut(i).copy_from_slice(&row);
    }
    Vocabulary::from_parts(tokens, is_name, vectors)
}
