//! Five-way QA items instantiated from a world.

use std::collections::{HashMap, HashSet};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::oracle::entailed;
use super::templates::{instantiate, perturb, Instance, Perturbation};
use super::{clip_records, generate_world, mix_seed, SupportingFact, World, WorldSpec};
use crate::schema::{difficulty_levels, Dataset, Granularity, QaItem, NUM_CANDIDATES};
use crate::{Error, Result};

const DISTRACTOR_PLAN: [Perturbation; 4] = [
    Perturbation::Character,
    Perturbation::Character,
    Perturbation::Relation,
    Perturbation::Object,
];
const ATTEMPTS: usize = 30;

/// Draws QA items from a world without repeating a (clip, question, answer)
/// triple until the pool for a difficulty runs dry.
pub struct QaGenerator<'w> {
    world: &'w World,
    instances: Vec<Vec<Instance>>,
    used: HashSet<(usize, usize)>,
    next_qid: usize,
}

impl<'w> QaGenerator<'w> {
    pub fn new(world: &'w World) -> Self {
        let instances = world
            .episodes
            .iter()
            .map(|clip| {
                let (f, c) = clip_records(clip, &world.facts, &world.causes);
                let mut seen = HashSet::new();
                instantiate(clip, &f, &c)
                    .into_iter()
                    .filter(|i| seen.insert((i.question.clone(), i.answer.clone())))
                    .collect()
            })
            .collect();
        Self {
            world,
            instances,
            used: HashSet::new(),
            next_qid: 0,
        }
    }

    /// Number of distinct instances available at a difficulty.
    pub fn capacity(&self, difficulty: u8) -> usize {
        self.instances
            .iter()
            .flatten()
            .filter(|i| i.difficulty() == difficulty)
            .count()
    }

    pub fn generate<R: Rng>(&mut self, difficulty: u8, rng: &mut R) -> Result<QaItem> {
        let (mc, lc) = difficulty_levels(difficulty).ok_or(Error::InsufficientWorld {
            difficulty,
            reason: "difficulty must be 1..=4".into(),
        })?;
        let granularity = if mc == 1 { Granularity::Shot } else { Granularity::Scene };
        let mut fresh = Vec::new();
        let mut all = Vec::new();
        for (c, clip) in self.world.episodes.iter().enumerate() {
            if clip.granularity != granularity {
                continue;
            }
            for (k, inst) in self.instances[c].iter().enumerate() {
                if inst.difficulty() == difficulty {
                    all.push((c, k));
                    if !self.used.contains(&(c, k)) {
                        fresh.push((c, k));
                    }
                }
            }
        }
        if all.is_empty() {
            return Err(Error::InsufficientWorld {
                difficulty,
                reason: match difficulty {
                    3 => "no temporally ordered fact pair on any scene".into(),
                    4 => "no causal link on any scene".into(),
                    _ => "no usable fact on any shot".into(),
                },
            });
        }
        for pool in [fresh, all] {
            let mut pool = pool;
            pool.shuffle(rng);
            for (c, k) in pool {
                if let Some(item) = self.build(c, k, mc, lc, difficulty, rng) {
                    self.used.insert((c, k));
                    return Ok(item);
                }
            }
        }
        Err(Error::InsufficientWorld {
            difficulty,
            reason: "no instance admits four non-entailed distractors".into(),
        })
    }

    fn build<R: Rng>(&mut self, c: usize, k: usize, mc: u8, lc: u8, difficulty: u8, rng: &mut R) -> Option<QaItem> {
        let clip = &self.world.episodes[c];
        let inst = &self.instances[c][k];
        let (facts, _) = clip_records(clip, &self.world.facts, &self.world.causes);
        // causes are judged against every fact of the scene
        let scene_facts: Vec<&SupportingFact> = self
            .world
            .facts
            .iter()
            .filter(|f| f.scene_id == clip.episode_key())
            .collect();
        let truth = inst.answer.render();
        let mut rendered = vec![truth.clone()];
        let mut plan = DISTRACTOR_PLAN.to_vec();
        let fallbacks = [Perturbation::Character, Perturbation::Relation, Perturbation::Object];
        while rendered.len() < NUM_CANDIDATES {
            let kind = plan.first().copied();
            let mut found = None;
            for kind in kind.into_iter().chain(fallbacks) {
                for _ in 0..ATTEMPTS {
                    let Some(d) = perturb(&inst.answer, kind, &self.world.roster, rng) else { break };
                    let text = d.render();
                    let support = if matches!(d, super::Claim::Because(..)) { &scene_facts } else { &facts };
                    if !rendered.contains(&text) && !entailed(&d, support) {
                        found = Some(text);
                        break;
                    }
                }
                if found.is_some() {
                    break;
                }
            }
            rendered.push(found?);
            if !plan.is_empty() {
                plan.remove(0);
            }
        }
        let mut order: Vec<usize> = (0..NUM_CANDIDATES).collect();
        order.shuffle(rng);
        let candidates: Vec<String> = order.iter().map(|&i| rendered[i].clone()).collect();
        let correct_idx = order.iter().position(|&i| i == 0).expect("truth is placed");
        let qid = format!("q{:05}", self.next_qid);
        self.next_qid += 1;
        Some(QaItem {
            qid,
            clip_id: clip.clip_id.clone(),
            question: inst.question.clone(),
            candidates,
            correct_idx,
            mc_level: mc,
            lc_level: lc,
            difficulty,
        })
    }
}

/// One item at the given difficulty.
pub fn generate_qa<R: Rng>(world: &World, difficulty: u8, rng: &mut R) -> Result<QaItem> {
    QaGenerator::new(world).generate(difficulty, rng)
}

/// Splits `total` items over the weights by largest remainder.
pub(crate) fn quotas(weights: &[f64; 4], total: usize) -> [usize; 4] {
    let sum: f64 = weights.iter().sum();
    let exact: Vec<f64> = weights.iter().map(|w| w / sum * total as f64).collect();
    let mut out = [0usize; 4];
    for (o, e) in out.iter_mut().zip(&exact) {
        *o = e.floor() as usize;
    }
    let mut rest: Vec<usize> = (0..4).collect();
    rest.sort_by(|&a, &b| {
        let ra = exact[a] - exact[a].floor();
        let rb = exact[b] - exact[b].floor();
        rb.partial_cmp(&ra).unwrap().then(a.cmp(&b))
    });
    let missing = total - out.iter().sum::<usize>();
    for &d in rest.iter().take(missing) {
        out[d] += 1;
    }
    out
}

/// World plus `n_scenes * qas_per_scene` items split over difficulties by
/// `qa_mix`.
pub fn generate_dataset(spec: &WorldSpec) -> Result<(World, Dataset)> {
    let world = generate_world(spec)?;
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(spec.seed, 0));
    let total = spec.n_scenes * spec.qas_per_scene;
    let quota = quotas(&spec.qa_mix, total);
    let mut qas = Vec::with_capacity(total);
    {
        let mut gen = QaGenerator::new(&world);
        for (d, n) in quota.iter().enumerate() {
            for _ in 0..*n {
                qas.push(gen.generate(d as u8 + 1, &mut rng)?);
            }
        }
    }
    // sort by clip so that a split keeps items contiguous, then renumber
    let order: HashMap<&str, usize> = world
        .episodes
        .iter()
        .enumerate()
        .map(|(i, c)| (c.clip_id.as_str(), i))
        .collect();
    qas.sort_by_key(|q| (order[q.clip_id.as_str()], q.qid.clone()));
    for (n, q) in qas.iter_mut().enumerate() {
        q.qid = format!("q{n:05}");
    }
    let dataset = Dataset::new(Some(world.roster.clone()), world.episodes.clone(), qas);
    Ok((world, dataset))
}
