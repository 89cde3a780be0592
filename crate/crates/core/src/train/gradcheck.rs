use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::Trainable;
use crate::autograd::{Gradients, Tensor};
use crate::features::{build_vocab, dataset_corpus, encode_split, EncodedSplit, Limits, StreamBatch};
use crate::model::{Mlcm, ModelConfig};
use crate::schema::Dataset;
use crate::synth::{generate_dataset, WorldSpec};
use crate::Result;

/// Pass threshold on the per-group relative error.
pub const GRAD_TOLERANCE: f64 = 1e-4;

/// Central-difference step.
pub const STEP: f64 = 1e-5;

/// Floor on the relative-error denominator, for groups whose gradient is
/// (numerically) zero.
const FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupError {
    pub name: String,
    pub size: usize,
    /// `‖a − n‖ / max(‖a‖ + ‖n‖, 1e-6)`.
    pub rel_error: f64,
    pub max_abs_diff: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradCheckReport {
    pub groups: Vec<GroupError>,
    pub max_rel_error: f64,
    pub passed: bool,
}

impl GradCheckReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports serialize")
    }
}

/// Compares analytic gradients of the deterministic loss on one item with
/// central differences, one parameter group at a time. `corrupt` may tamper
/// with the analytic gradients first.
pub fn check_gradients<M: Trainable>(
    model: &mut M,
    batch: StreamBatch,
    target: usize,
    corrupt: Option<&dyn Fn(&mut Gradients)>,
) -> GradCheckReport {
    let (_, mut grads, _) = model.loss_and_grad(batch, target, None);
    if let Some(f) = corrupt {
        f(&mut grads);
    }
    let mut groups = Vec::new();
    for id in 0..model.params().len() {
        let shape = model.params().value(id).shape();
        let analytic = grads.get(id).cloned().unwrap_or_else(|| Tensor::zeros(shape.0, shape.1));
        let mut numeric = Tensor::zeros(shape.0, shape.1);
        for k in 0..numeric.data.len() {
            let orig = model.params().value(id).data[k];
            model.params_mut().value_mut(id).data[k] = orig + STEP;
            let up = model.loss(batch, target);
            model.params_mut().value_mut(id).data[k] = orig - STEP;
            let down = model.loss(batch, target);
            model.params_mut().value_mut(id).data[k] = orig;
            numeric.data[k] = (up - down) / (2.0 * STEP);
        }
        let mut diff = analytic.clone();
        diff.data.iter_mut().zip(&numeric.data).for_each(|(a, n)| *a -= n);
        let max_abs_diff = diff.data.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        groups.push(GroupError {
            name: model.params().name(id).to_string(),
            size: numeric.data.len(),
            rel_error: diff.norm() / (analytic.norm() + numeric.norm()).max(FLOOR),
            max_abs_diff,
        });
    }
    let max_rel_error = groups.iter().fold(0.0f64, |m, g| m.max(g.rel_error));
    GradCheckReport {
        passed: max_rel_error < GRAD_TOLERANCE && max_rel_error.is_finite(),
        groups,
        max_rel_error,
    }
}

fn tiny_world(seed: u64, d_v: usize) -> Result<Dataset> {
    let spec = WorldSpec {
        seed,
        roster_size: 4,
        n_scenes: 2,
        shots_per_scene: (2, 2),
        frames_per_shot: (2, 2),
        qas_per_scene: 4,
        feature_dim: d_v,
        script_prob: 1.0,
        cause_prob: 1.0,
        ..Default::default()
    };
    Ok(generate_dataset(&spec)?.1)
}

/// A one-item split on a scene clip of 2 sentences × 3 words and 2 shots ×
/// 2 frames, with a model built for `config` (limits are overridden).
pub fn grad_check_fixture(config: &ModelConfig, seed: u64) -> Result<(Mlcm, EncodedSplit)> {
    let config = ModelConfig {
        limits: Limits {
            max_sent: 2,
            max_word: 3,
            max_shot: 2,
            max_frame: 2,
        },
        dropout: 0.0,
        ..config.clone()
    };
    let ds = tiny_world(seed, config.d_v)?;
    let roster = ds.roster();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let vocab = build_vocab(&dataset_corpus(&ds), &roster, config.d_w, 1, None, &mut rng)?;
    let model = Mlcm::new(config.clone(), &vocab, &roster, &mut rng)?;
    let mut split = encode_split(&ds, config.d_v, &vocab, &roster, &config.encode_options());
    // prefer a scene question whose candidates mention characters
    let pick = (0..split.len())
        .find(|&i| {
            let it = &split.items[i];
            let c = &split.clips[it.clip];
            it.difficulty >= 3 && c.t_sent() == 2 && c.t_shot() == 2 && it.qa.candidates.iter().any(|q| !q.names.is_empty())
        })
        .unwrap_or(0);
    split.items = vec![split.items[pick].clone()];
    Ok((model, split))
}

/// Finite-difference check of the full model on the tiny fixture.
pub fn grad_check(config: &ModelConfig, seed: u64) -> Result<GradCheckReport> {
    let (mut model, split) = grad_check_fixture(config, seed)?;
    let target = split.items[0].correct_idx;
    Ok(check_gradients(&mut model, split.batch(0), target, None))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixture_has_requested_shape() {
        let (_, split) = grad_check_fixture(&ModelConfig::tiny(), 0).unwrap();
        let clip = &split.clips[split.items[0].clip];
        assert_eq!((clip.t_sent(), clip.t_word()), (2, 3));
        assert_eq!((clip.t_shot(), clip.t_frame()), (2, 2));
    }

    #[test]
    fn tiny_model_passes() {
        let r = grad_check(&ModelConfig::tiny(), 0).unwrap();
        for g in &r.groups {
            assert!(g.rel_error < GRAD_TOLERANCE, "{} {}", g.name, g.rel_error);
        }
        assert!(r.passed);
        for name in ["bank", "embed", "qa.fwd.u", "script.bwd.w", "visual.fwd.b", "script_high.conv3.w"] {
            assert!(r.groups.iter().any(|g| g.name == name), "{name} not checked");
        }
    }

    #[test]
    fn trilinear_passes() {
        let cfg = ModelConfig {
            similarity: crate::model::Similarity::Trilinear,
            ..ModelConfig::tiny()
        };
        let r = grad_check(&cfg, 3).unwrap();
        let bad: Vec<_> = r.groups.iter().filter(|g| g.rel_error >= GRAD_TOLERANCE).collect();
        assert!(r.passed, "{bad:?}");
    }

    #[test]
    fn qa_v_s_passes() {
        use crate::baselines::{QaVsConfig, QaVsModel};
        let (m, split) = grad_check_fixture(&ModelConfig::tiny(), 0).unwrap();
        let cfg = QaVsConfig {
            d: 8,
            d_w: 8,
            d_v: 8,
            hidden: [6, 4],
            dropout: 0.5,
        };
        let mut b = QaVsModel::new(cfg, &m.vocabulary(), &m.roster, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        let r = check_gradients(&mut b, split.batch(0), split.items[0].correct_idx, None);
        assert!(r.passed, "{:?}", r.groups);
    }

    #[test]
    fn corrupted_gradient_fails() {
        let (mut m, split) = grad_check_fixture(&ModelConfig::tiny(), 0).unwrap();
        let bump = |g: &mut Gradients| {
            if let Some(Some(t)) = g.grads.last_mut() {
                t.data[0] += 0.5;
            }
        };
        let r = check_gradients(&mut m, split.batch(0), split.items[0].correct_idx, Some(&bump));
        assert!(!r.passed);
        assert!(r.groups.last().unwrap().rel_error > GRAD_TOLERANCE);
    }
}
