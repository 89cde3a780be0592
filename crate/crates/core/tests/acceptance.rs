//! Acceptance criteria 1-8, one PASS/FAIL line each.
//!
//! Runs as its own harness: `cargo test --test acceptance`.

use std::path::Path;
use std::time::Instant;

use anyhow::{ensure, Context, Result};
use proptest::prelude::*;
use proptest::test_runner::{Config as PtConfig, TestRunner};
use storyqa::autograd::{ParamStore, Tape, Tensor};
use storyqa::config::RunConfig;
use storyqa::features::{frame_flags, sentence_flags, StreamBatch};
use storyqa::model::layers::high_level_attend;
use storyqa::model::{ModelConfig, Stream};
use storyqa::schema::Granularity;
use storyqa::synth::{generate_dataset, solve_by_oracle, split_dataset, WorldSpec};
use storyqa::train::{
    fit, grad_check, init_model, prepare, run_experiment, Embeddings, EvalReport, ExperimentResult, TrainConfig, Variant,
    GRAD_TOLERANCE,
};

const COUNTS: [usize; 4] = [1782, 853, 409, 409];

struct Outcome {
    id: u8,
    gated: bool,
    passed: bool,
    detail: String,
    secs: f64,
}

fn main() {
    let mut results = Vec::new();
    let mut record = |id: u8, gated: bool, f: &mut dyn FnMut() -> Result<(bool, String)>| {
        let t = Instant::now();
        let (passed, detail) = f().unwrap_or_else(|e| (false, format!("error: {e:#}")));
        let o = Outcome {
            id,
            gated,
            passed,
            detail,
            secs: t.elapsed().as_secs_f64(),
        };
        println!(
            "criterion {}: {} ({:.1}s) {}",
            o.id,
            match (o.gated, o.passed) {
                (true, true) => "PASS",
                (true, false) => "FAIL",
                (false, true) => "REPORT holds",
                (false, false) => "REPORT does not hold",
            },
            o.secs,
            o.detail
        );
        results.push(o);
    };

    record(1, true, &mut metric_reproduction);
    record(2, true, &mut gradient_check);
    record(3, true, &mut attention_invariants);
    record(4, true, &mut generator_soundness);
    let mut smoke: Vec<ExperimentResult> = Vec::new();
    record(5, true, &mut || learning_smoke(&mut smoke));
    record(6, true, &mut || ablation_plumbing(smoke.first()));
    record(7, false, &mut || difficulty_trend(&smoke));
    record(8, true, &mut determinism);

    let failed: Vec<u8> = results.iter().filter(|o| o.gated && !o.passed).map(|o| o.id).collect();
    if failed.is_empty() {
        println!("acceptance: all gated criteria pass");
    } else {
        println!("acceptance: failed {failed:?}");
        std::process::exit(1);
    }
}

fn metric_reproduction() -> Result<(bool, String)> {
    let full = EvalReport::from_accuracies([75.96, 74.65, 57.36, 56.63], COUNTS);
    let sim = EvalReport::from_accuracies([30.64, 27.20, 26.16, 22.25], COUNTS);
    let (fa, sa) = (full.diff_avg.unwrap_or(f64::NAN), sim.diff_avg.unwrap_or(f64::NAN));
    let ok = (full.overall - 71.14).abs() <= 0.02
        && (fa - 66.15).abs() <= 0.005
        && (sim.overall - 28.27).abs() <= 0.02
        && (sa - 26.56).abs() <= 0.005;
    Ok((
        ok,
        format!("full {:.4}/{fa:.4}, qa-sim {:.4}/{sa:.4}", full.overall, sim.overall),
    ))
}

fn gradient_check() -> Result<(bool, String)> {
    let r = grad_check(&ModelConfig::tiny(), 0)?;
    let has = |pred: &dyn Fn(&str) -> bool| r.groups.iter().any(|g| pred(&g.name));
    let covered = has(&|n| n == "bank") && has(&|n| n.contains(".conv")) && has(&|n| n.ends_with(".u"));
    let worst = r
        .groups
        .iter()
        .max_by(|a, b| a.rel_error.total_cmp(&b.rel_error))
        .context("no groups")?;
    Ok((
        r.passed && covered && r.max_rel_error < GRAD_TOLERANCE,
        format!(
            "{} groups, max rel error {:.2e} ({}), bank/conv/recurrent covered: {covered}",
            r.groups.len(),
            r.max_rel_error,
            worst.name
        ),
    ))
}

/// Random attention inputs: `groups × inner` rows of width `d`, a mask with
/// at least one valid row per group, and a query.
fn attention_case() -> impl Strategy<Value = (usize, usize, usize, Vec<f64>, Vec<f64>, Vec<bool>)> {
    (1usize..4, 1usize..7, 1usize..6).prop_flat_map(|(g, n, d)| {
        (
            Just(g),
            Just(n),
            Just(d),
            prop::collection::vec(-4.0f64..4.0, g * n * d),
            prop::collection::vec(-2.0f64..2.0, d),
            prop::collection::vec(any::<bool>(), g * n),
            prop::collection::vec(0..n, g),
        )
            .prop_map(move |(g, n, d, h, q, mut mask, keep)| {
                for (gi, k) in keep.into_iter().enumerate() {
                    mask[gi * n + k] = true;
                }
                (g, n, d, h, q, mask)
            })
    })
}

fn attention_invariants() -> Result<(bool, String)> {
    let cases = 1000;
    let store = ParamStore::default();
    let mut runner = TestRunner::new(PtConfig {
        cases,
        failure_persistence: None,
        ..PtConfig::default()
    });
    runner
        .run(&attention_case(), |(g, n, d, h, q, mask)| {
            let mut tape = Tape::new(&store);
            let hv = tape.constant(Tensor::from_vec(g * n, d, h.clone()));
            let qv = tape.constant(Tensor::from_vec(1, d, q));
            let (pooled, weights) = high_level_attend(&mut tape, hv, qv, g, n, &mask);
            let w = tape.value(weights).clone();
            let e = tape.value(pooled).clone();
            for gi in 0..g {
                let sum: f64 = w.row(gi).iter().sum();
                prop_assert!((sum - 1.0).abs() <= 1e-6, "row sum {sum}");
                for k in 0..n {
                    if !mask[gi * n + k] {
                        prop_assert_eq!(w.get(gi, k), 0.0);
                    }
                }
                for c in 0..d {
                    let vals = (0..n).filter(|&k| mask[gi * n + k]).map(|k| h[(gi * n + k) * d + c]);
                    let (lo, hi) = vals.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), x| (a.min(x), b.max(x)));
                    let v = e.get(gi, c);
                    prop_assert!(v >= lo - 1e-9 && v <= hi + 1e-9, "{v} outside [{lo}, {hi}]");
                }
            }
            Ok(())
        })
        .map_err(|e| anyhow::anyhow!("{e}"))?;

    let spec = WorldSpec {
        seed: 5,
        n_scenes: 12,
        feature_dim: ModelConfig::tiny().d_v,
        ..WorldSpec::default()
    };
    let (_, ds) = generate_dataset(&spec)?;
    let splits = split_dataset(&ds, (0.6, 0.2, 0.2), 5)?;
    let cfg = ModelConfig::tiny();
    let prepared = prepare(&splits, &ds.roster(), &cfg, &Embeddings::Random, 5)?;
    let model = init_model(&prepared, &cfg, 5)?;
    let items = &prepared.train;
    let mut runner = TestRunner::new(PtConfig {
        cases,
        failure_persistence: None,
        ..PtConfig::default()
    });
    runner
        .run(&(0..items.len(), 0usize..4, 0usize..4), |(i, ns, nsh)| {
            let b = items.batch(i);
            let padded = b.clip.with_padding(ns, nsh);
            let p = model.score(StreamBatch { qa: b.qa, clip: &padded });
            prop_assert_eq!(model.score(b).total, p.total);
            Ok(())
        })
        .map_err(|e| anyhow::anyhow!("{e}"))?;
    Ok((true, format!("{cases} attention cases and {cases} padding cases")))
}

fn generator_soundness() -> Result<(bool, String)> {
    let spec = WorldSpec {
        seed: 2024,
        n_scenes: 125,
        qas_per_scene: 8,
        ..WorldSpec::default()
    };
    let (world, ds) = generate_dataset(&spec)?;
    let clips = ds.clip_index();
    let (mut solved, mut coupled, mut why_ok) = (0, 0, 0);
    let mut by_diff = [0usize; 4];
    for qa in &ds.qas {
        let clip = clips[qa.clip_id.as_str()];
        if solve_by_oracle(qa, clip, &world.facts, &world.causes).ok() == Some(qa.correct_idx) {
            solved += 1;
        }
        if (clip.granularity == Granularity::Shot) == (qa.difficulty <= 2) {
            coupled += 1;
        }
        if qa.difficulty != 4 || qa.question.starts_with("Why") {
            why_ok += 1;
        }
        by_diff[usize::from(qa.difficulty) - 1] += 1;
    }
    let n = ds.qas.len();
    let ok = n >= 1000 && solved == n && coupled == n && why_ok == n && by_diff.iter().all(|&c| c > 0);
    Ok((
        ok,
        format!("{n} items {by_diff:?}: solvable {solved}, coupling {coupled}, why {why_ok}"),
    ))
}

/// The smoke-test run configuration for one seed.
fn smoke_config(seed: u64) -> RunConfig {
    let mut c = RunConfig::default();
    c.world.seed = seed;
    c.world.n_scenes = 250;
    c.world.shots_per_scene = (2, 4);
    c.world.frames_per_shot = (2, 5);
    c.world.script_prob = 1.0;
    c.world.fact_lines = (4, 4);
    c.world.frame_features = false;
    c.embeddings = Embeddings::Lexicon;
    c.train = TrainConfig {
        lr: 1e-3,
        epochs: 50,
        seed,
        target_train_acc: Some(95.0),
        ..TrainConfig::default()
    };
    c
}

fn learning_smoke(out: &mut Vec<ExperimentResult>) -> Result<(bool, String)> {
    let mut margins = Vec::new();
    let mut peaks = Vec::new();
    let mut qas = Vec::new();
    for seed in 0..3 {
        let cfg = smoke_config(seed);
        cfg.validate()?;
        let r = run_experiment(&cfg.experiment())?;
        let peak = r.log.epochs.iter().map(|e| e.train_acc).fold(0.0, f64::max);
        peaks.push(peak);
        margins.push(r.test.overall - r.qa_similarity.overall);
        qas.push(r.train.counts.iter().chain(&r.val.counts).chain(&r.test.counts).sum::<usize>());
        out.push(r);
    }
    let mean_margin = margins.iter().sum::<f64>() / 3.0;
    let mean_peak = peaks.iter().sum::<f64>() / 3.0;
    let ok = peaks.iter().all(|&p| p >= 95.0) && mean_margin >= 20.0;
    Ok((
        ok,
        format!(
            "QAs {qas:?}, peak train acc {:?} (mean {mean_peak:.2}), margin over qa-sim {:?} (mean {mean_margin:.2})",
            peaks.iter().map(|p| format!("{p:.2}")).collect::<Vec<_>>(),
            margins.iter().map(|m| format!("{m:.2}")).collect::<Vec<_>>()
        ),
    ))
}

fn ablation_plumbing(trained: Option<&ExperimentResult>) -> Result<(bool, String)> {
    let trained = trained.context("no trained smoke model")?;
    let model = &trained.model;
    let cfg = smoke_config(0);
    let (_, ds) = generate_dataset(&cfg.world)?;
    let splits = split_dataset(&ds, (0.6, 0.2, 0.2), cfg.world.seed)?;
    let prepared = prepare(&splits, &ds.roster(), &model.config, &cfg.embeddings, cfg.train.seed)?;

    type Switch = (&'static str, fn(&mut ModelConfig), &'static [Stream]);
    let switches: [Switch; 4] = [
        ("script", |c| c.use_script = false, &[Stream::ScriptHigh, Stream::ScriptLow]),
        ("visual", |c| c.use_visual = false, &[Stream::VisualHigh, Stream::VisualLow]),
        ("high", |c| c.use_high = false, &[Stream::ScriptHigh, Stream::VisualHigh]),
        ("low", |c| c.use_low = false, &[Stream::ScriptLow, Stream::VisualLow]),
    ];
    let mut worst: f64 = 0.0;
    for (_, off, removed) in switches {
        let mut m = model.clone();
        off(&mut m.config);
        for i in 0..prepared.test.len().min(100) {
            let full = model.score(prepared.test.batch(i));
            let part = m.score(prepared.test.batch(i));
            for c in 0..full.total.len() {
                let gone: f64 = removed.iter().map(|s| full.streams[c][s.index()]).sum();
                worst = worst.max((full.total[c] - part.total[c] - gone).abs());
            }
        }
    }

    let small = WorldSpec {
        n_scenes: 30,
        ..cfg.world.clone()
    };
    let (_, ds) = generate_dataset(&small)?;
    let splits = split_dataset(&ds, (0.6, 0.2, 0.2), small.seed)?;
    let tc = TrainConfig {
        epochs: 1,
        target_train_acc: None,
        ..cfg.train.clone()
    };
    let mut leaks = 0usize;
    for v in [Variant::ScriptOnlyNoCoref, Variant::VisualOnlyNoMeta] {
        let mc = v.apply(&model.config);
        let prepared = prepare(&splits, &ds.roster(), &mc, &cfg.embeddings, 0)?;
        let (m, _) = fit(&prepared, &mc, &tc)?;
        let vectors = m.vocabulary().vectors().clone();
        let (r, d_w) = (prepared.roster.len(), vectors.cols);
        let all: Vec<usize> = (0..r).collect();
        for i in 0..prepared.train.len() {
            let b = prepared.train.batch(i);
            let dense = b.materialize(&vectors, r);
            if v == Variant::ScriptOnlyNoCoref {
                leaks += b.clip.sentences.iter().filter(|s| s.speaker.is_some()).count();
                leaks += sentence_flags(b.clip, &all).iter().filter(|f| **f != 0.0).count();
                for row in 0..dense.script.rows {
                    leaks += dense.script.row(row)[d_w..].iter().filter(|x| **x != 0.0).count();
                }
            } else {
                let d_v = b.clip.d_v;
                for fr in b.clip.shots.iter().flatten() {
                    leaks += fr.behavior.len() + fr.emotion.len() + fr.names.len();
                }
                leaks += frame_flags(b.clip, &all).iter().filter(|f| **f != 0.0).count();
                for row in 0..dense.visual.rows {
                    leaks += dense.visual.row(row)[d_v..].iter().filter(|x| **x != 0.0).count();
                }
            }
        }
    }
    Ok((
        worst <= 1e-6 && leaks == 0,
        format!("max additivity deviation {worst:.2e}, stripped-channel leaks {leaks}"),
    ))
}

fn difficulty_trend(runs: &[ExperimentResult]) -> Result<(bool, String)> {
    ensure!(!runs.is_empty(), "no smoke runs");
    let mean = |ds: &[usize]| {
        runs.iter()
            .map(|r| ds.iter().map(|&d| r.test.accuracy[d].unwrap_or(0.0)).sum::<f64>() / ds.len() as f64)
            .sum::<f64>()
            / runs.len() as f64
    };
    let (easy, hard) = (mean(&[0, 1]), mean(&[2, 3]));
    Ok((easy >= hard, format!("mean diff 1-2 {easy:.2} vs diff 3-4 {hard:.2}")))
}

fn cli(args: &[&str]) -> Result<String> {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let code = storyqa::cli::run(std::iter::once("storyqa").chain(args.iter().copied()), &mut out, &mut err);
    ensure!(code == 0, "{args:?} exited {code}: {}", String::from_utf8_lossy(&err));
    Ok(String::from_utf8(out)?)
}

fn pipeline(dir: &Path) -> Result<Vec<u8>> {
    let p = |name: &str| dir.join(name).to_string_lossy().into_owned();
    let (data, run, report) = (p("data"), p("run"), p("report.json"));
    cli(&["synth", "--seed", "11", "--episodes", "12", "--out", &data])?;
    cli(&["train", "--seed", "11", "--data", &data, "--out", &run, "--epochs", "2"])?;
    let ck = p("run/checkpoint.json");
    cli(&["eval", "--data", &data, "--checkpoint", &ck, "--report", &report])?;
    Ok(std::fs::read(&report)?)
}

fn determinism() -> Result<(bool, String)> {
    let dir = tempfile::tempdir()?;
    let first = pipeline(dir.path())?;
    for entry in std::fs::read_dir(dir.path())? {
        let path = entry?.path();
        if path.is_dir() {
            std::fs::remove_dir_all(path)?;
        } else {
            std::fs::remove_file(path)?;
        }
    }
    let second = pipeline(dir.path())?;
    Ok((
        first == second && !first.is_empty(),
        format!("reports of {} and {} bytes, identical: {}", first.len(), second.len(), first == second),
    ))
}
