//! The `storyqa` command line.
//!
//! Exit status is 0 on success, 1 when validation or a check fails (or an
//! operation errors), and 2 on usage or configuration errors.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::baselines::{BaselineKind, Heuristic};
use crate::config::RunConfig;
use crate::features::encode_split;
use crate::model::{Checkpoint, Mlcm, ModelConfig};
use crate::schema::{load_dataset, save_dataset, validate_dataset, Behavior, Dataset, Emotion, ValidationReport};
use crate::synth::{generate_dataset, split_dataset, Split, SplitSet};
use crate::train::{
    ablation_markdown, evaluate, fit_qa_v_s, grad_check, init_model, prepare, run_ablation, train, AblationRow,
    EvalReport, Variant,
};
use crate::{Error, Result};

pub const DATA_ENV: &str = "STORYQA_DATA_DIR";

#[derive(Debug, Parser)]
#[command(name = "storyqa", version, about = "Synthetic drama worlds and multi-level context matching QA")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// Flat `section.key = value` config file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Seeds both the world generator and training.
    #[arg(long)]
    seed: Option<u64>,
    /// Extra `section.key=value` overrides, applied last.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a world, its QA items and an episode-level split.
    Synth {
        #[command(flatten)]
        common: Common,
        /// Number of scenes.
        #[arg(long)]
        episodes: Option<usize>,
        #[arg(long, value_delimiter = ',', num_args = 4)]
        qa_mix: Option<Vec<f64>>,
        #[arg(long)]
        roster_size: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Check every data-model invariant of a dataset file or directory.
    Validate {
        path: Option<PathBuf>,
        #[arg(long, env = DATA_ENV)]
        data: Option<PathBuf>,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Item counts and label frequency tables as CSV.
    Stats {
        path: Option<PathBuf>,
        #[arg(long, env = DATA_ENV)]
        data: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train the model on a split directory.
    Train {
        #[command(flatten)]
        common: Common,
        #[arg(long, env = DATA_ENV)]
        data: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        lr: Option<f64>,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        batch_size: Option<usize>,
    },
    /// Accuracy report for a checkpoint, a baseline or given predictions.
    Eval {
        #[command(flatten)]
        common: Common,
        #[arg(long, env = DATA_ENV)]
        data: Option<PathBuf>,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long)]
        baseline: Option<String>,
        /// JSON with `accuracy` and `counts`, or a list of
        /// `{"difficulty", "correct"}` outcomes.
        #[arg(long)]
        predictions: Option<PathBuf>,
        #[arg(long, default_value = "test")]
        split: String,
        /// Writes JSON here and CSV next to it.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Retrain ablation variants and write a results table.
    Ablate {
        #[command(flatten)]
        common: Common,
        #[arg(long, env = DATA_ENV)]
        data: Option<PathBuf>,
        /// Repeatable; all variants when omitted.
        #[arg(long)]
        variant: Vec<String>,
        #[arg(long, value_delimiter = ',')]
        seeds: Vec<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Finite-difference gradient check on the tiny configuration.
    Gradcheck {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        report: Option<PathBuf>,
    },
}

/// Parses `args` (program name first), runs the command and returns the exit
/// status.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = e.exit_code();
            let text = e.render().to_string();
            let _ = if code == 0 { write!(out, "{text}") } else { write!(err, "{text}") };
            return code;
        }
    };
    match dispatch(cli.command, out) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            match e {
                Error::Config(_) | Error::UnknownVariant(_) => 2,
                _ => 1,
            }
        }
    }
}

fn dispatch(cmd: Command, out: &mut dyn Write) -> Result<i32> {
    match cmd {
        Command::Synth {
            common,
            episodes,
            qa_mix,
            roster_size,
            out: dir,
        } => {
            let mut cfg = run_config(&common)?;
            if let Some(n) = episodes {
                cfg.world.n_scenes = n;
            }
            if let Some(m) = qa_mix {
                cfg.world.qa_mix = [m[0], m[1], m[2], m[3]];
            }
            if let Some(k) = roster_size {
                cfg.world.roster_size = k;
            }
            cfg.validate()?;
            synth(&cfg, &dir, out)
        }
        Command::Validate { path, data, report } => {
            let path = resolve(path, data)?;
            let r = validate_path(&path)?;
            let json = r.to_json();
            if let Some(p) = report {
                write_file(&p, &json)?;
            }
            say(out, &json)?;
            Ok(if r.is_empty() { 0 } else { 1 })
        }
        Command::Stats { path, data, out: dest } => {
            let path = resolve(path, data)?;
            let csv = stats_csv(&load_any(&path)?);
            match dest {
                Some(p) => write_file(&p, &csv)?,
                None => say(out, csv.trim_end())?,
            }
            Ok(0)
        }
        Command::Train {
            common,
            data,
            out: dir,
            lr,
            epochs,
            batch_size,
        } => {
            let mut cfg = run_config(&common)?;
            if let Some(v) = lr {
                cfg.train.lr = v;
            }
            if let Some(v) = epochs {
                cfg.train.epochs = v;
            }
            if let Some(v) = batch_size {
                cfg.train.batch_size = v;
            }
            cfg.model.validate()?;
            cfg.train.validate()?;
            let data = resolve(None, data)?;
            train_cmd(&cfg, &data, &dir, out)
        }
        Command::Eval {
            common,
            data,
            checkpoint,
            baseline,
            predictions,
            split,
            report,
        } => {
            let mut cfg = run_config(&common)?;
            if let Some(b) = baseline {
                cfg.baseline = Some(b.parse()?);
            }
            let r = if let Some(p) = predictions {
                report_from_predictions(&p)?
            } else {
                let data = resolve(None, data)?;
                eval_cmd(&cfg, &data, checkpoint.as_deref(), parse_split(&split)?)?
            };
            if let Some(p) = &report {
                write_file(p, &r.to_json())?;
                write_file(&p.with_extension("csv"), &r.to_csv())?;
            }
            say(out, r.to_csv().trim_end())?;
            Ok(0)
        }
        Command::Ablate {
            common,
            data,
            variant,
            seeds,
            out: dest,
        } => {
            let cfg = run_config(&common)?;
            let variants = if variant.is_empty() {
                Variant::ALL.to_vec()
            } else {
                variant.iter().map(|v| v.parse()).collect::<Result<Vec<_>>>()?
            };
            let seeds = if seeds.is_empty() { vec![cfg.train.seed] } else { seeds };
            let splits = load_splits(&resolve(None, data)?)?;
            let roster = splits.train.roster();
            let mut rows = Vec::new();
            let prepared = prepare(&splits, &roster, &cfg.model, &cfg.embeddings, cfg.train.seed)?;
            for kind in [BaselineKind::Shortest, BaselineKind::Longest, BaselineKind::QaSimilarity] {
                let h = Heuristic {
                    kind,
                    vectors: prepared.vocab.vectors().clone(),
                };
                rows.push(AblationRow::from_runs(kind.title(), vec![evaluate(&h, &prepared.test)]));
            }
            rows.extend(run_ablation(&splits, &roster, &cfg.model, &cfg.embeddings, &cfg.train, &variants, &seeds)?);
            let md = ablation_markdown(&rows);
            if let Some(p) = dest {
                write_file(&p, &md)?;
            }
            say(out, md.trim_end())?;
            Ok(0)
        }
        Command::Gradcheck { seed, report } => {
            let r = grad_check(&ModelConfig::tiny(), seed)?;
            if let Some(p) = report {
                write_file(&p, &r.to_json())?;
            }
            for g in &r.groups {
                say(out, &format!("{:<24} {:>6} {:.3e}", g.name, g.size, g.rel_error))?;
            }
            say(
                out,
                &format!("max relative error {:.3e}: {}", r.max_rel_error, if r.passed { "PASS" } else { "FAIL" }),
            )?;
            Ok(if r.passed { 0 } else { 1 })
        }
    }
}

fn say(out: &mut dyn Write, text: &str) -> Result<()> {
    match writeln!(out, "{text}") {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(Error::io("<stdout>", e)),
        _ => Ok(()),
    }
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn resolve(path: Option<PathBuf>, data: Option<PathBuf>) -> Result<PathBuf> {
    path.or(data)
        .ok_or_else(|| Error::Config(format!("no data path given (pass a path, --data or set {DATA_ENV})")))
}

fn run_config(common: &Common) -> Result<RunConfig> {
    let mut cfg = match &common.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if !common.set.is_empty() {
        let pairs = common
            .set
            .iter()
            .map(|s| {
                s.split_once('=')
                    .map(|(k, v)| (k.trim(), v.trim()))
                    .ok_or_else(|| Error::Config(format!("--set expects KEY=VALUE, got '{s}'")))
            })
            .collect::<Result<Vec<_>>>()?;
        cfg = cfg.with_assignments(pairs)?;
    }
    if let Some(s) = common.seed {
        cfg.world.seed = s;
        cfg.train.seed = s;
    }
    Ok(cfg)
}

fn parse_split(s: &str) -> Result<Split> {
    match s {
        "train" => Ok(Split::Train),
        "val" => Ok(Split::Val),
        "test" => Ok(Split::Test),
        _ => Err(Error::Config(format!("unknown split '{s}'"))),
    }
}

const SPLIT_FILES: [&str; 3] = ["train.json", "val.json", "test.json"];

fn synth(cfg: &RunConfig, dir: &Path, out: &mut dyn Write) -> Result<i32> {
    let (world, ds) = generate_dataset(&cfg.world)?;
    let splits = split_dataset(&ds, (cfg.split[0], cfg.split[1], cfg.split[2]), cfg.world.seed)?;
    save_dataset(&ds, dir.join("dataset.json"))?;
    for (name, part) in SPLIT_FILES.iter().zip([&splits.train, &splits.val, &splits.test]) {
        save_dataset(part, dir.join(name))?;
    }
    let facts = serde_json::to_string_pretty(&world.fact_file()).expect("facts serialize");
    write_file(&dir.join("facts.json"), &facts)?;
    write_file(&dir.join("run_config.txt"), &cfg.to_flat())?;
    say(
        out,
        &format!(
            "{} clips, {} QAs (train {}, val {}, test {}) -> {}",
            ds.episodes.len(),
            ds.qas.len(),
            splits.train.qas.len(),
            splits.val.qas.len(),
            splits.test.qas.len(),
            dir.display()
        ),
    )?;
    Ok(0)
}

/// A dataset file, or a directory holding `dataset.json` or the split files.
fn load_any(path: &Path) -> Result<Dataset> {
    if path.is_file() {
        return load_dataset(path);
    }
    let full = path.join("dataset.json");
    if full.is_file() {
        return load_dataset(full);
    }
    let parts = load_splits(path)?;
    let mut ds = parts.train;
    for p in [parts.val, parts.test] {
        ds.episodes.extend(p.episodes);
        ds.qas.extend(p.qas);
    }
    Ok(ds)
}

fn load_splits(dir: &Path) -> Result<SplitSet> {
    let load = |name: &str| load_dataset(dir.join(name));
    Ok(SplitSet {
        train: load(SPLIT_FILES[0])?,
        val: load(SPLIT_FILES[1])?,
        test: load(SPLIT_FILES[2])?,
    })
}

fn validate_path(path: &Path) -> Result<ValidationReport> {
    let ds = load_any(path)?;
    Ok(validate_dataset(&ds.roster(), &ds.episodes, &ds.qas))
}

/// Long-format CSV: `table,key,count`.
pub fn stats_csv(ds: &Dataset) -> String {
    let mut rows: Vec<(String, String, usize)> = vec![
        ("total".into(), "clips".into(), ds.episodes.len()),
        ("total".into(), "qas".into(), ds.qas.len()),
    ];
    let index = ds.clip_index();
    let mut per_episode: BTreeMap<&str, usize> = BTreeMap::new();
    let mut per_diff = [0usize; 4];
    for qa in &ds.qas {
        let key = index.get(qa.clip_id.as_str()).map_or(crate::schema::episode_key(&qa.clip_id), |c| c.episode_key());
        *per_episode.entry(key).or_default() += 1;
        if (1..=4).contains(&qa.difficulty) {
            per_diff[usize::from(qa.difficulty) - 1] += 1;
        }
    }
    rows.extend(per_episode.into_iter().map(|(k, n)| ("episode".into(), k.to_string(), n)));
    rows.extend((0..4).map(|d| ("difficulty".into(), (d + 1).to_string(), per_diff[d])));

    // frame labels are counted once per box, over scene clips only so shared
    // frames are not counted twice
    let roster = ds.roster();
    let mut chars: BTreeMap<String, usize> = roster.names().iter().map(|n| (n.as_str().to_string(), 0)).collect();
    let mut beh: Vec<usize> = vec![0; Behavior::all().count()];
    let mut emo = [0usize; 7];
    let scenes: Vec<_> = ds
        .episodes
        .iter()
        .filter(|c| c.granularity == crate::schema::Granularity::Scene)
        .collect();
    let clips: Vec<_> = if scenes.is_empty() { ds.episodes.iter().collect() } else { scenes };
    for clip in clips {
        for b in clip.frames().flat_map(|f| &f.boxes) {
            *chars.entry(b.character.as_str().to_string()).or_default() += 1;
            beh[b.behavior.index()] += 1;
            emo[b.emotion.index()] += 1;
        }
    }
    let mut names: Vec<(String, usize)> = chars.into_iter().collect();
    names.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
    rows.extend(names.into_iter().map(|(k, n)| ("character".into(), k, n)));
    rows.extend(Behavior::all().map(|b| ("behavior".into(), b.label().to_string(), beh[b.index()])));
    rows.extend(Emotion::ALL.iter().map(|e| ("emotion".into(), e.label().to_string(), emo[e.index()])));

    let mut out = String::from("table,key,count\n");
    for (t, k, n) in rows {
        let k = if k.contains(',') { format!("\"{k}\"") } else { k };
        out.push_str(&format!("{t},{k},{n}\n"));
    }
    out
}

fn train_cmd(cfg: &RunConfig, data: &Path, dir: &Path, out: &mut dyn Write) -> Result<i32> {
    let splits = load_splits(data)?;
    let roster = splits.train.roster();
    let prepared = prepare(&splits, &roster, &cfg.model, &cfg.embeddings, cfg.train.seed)?;
    let mut model = init_model(&prepared, &cfg.model, cfg.train.seed)?;
    model.to_checkpoint().save(&dir.join("checkpoint_init.json"))?;
    let log = train(&mut model, &prepared.train, Some(&prepared.val), &cfg.train)?;
    model.to_checkpoint().save(&dir.join("checkpoint.json"))?;
    write_file(&dir.join("loss.csv"), &log.to_csv())?;
    write_file(&dir.join("run_config.txt"), &cfg.to_flat())?;
    let val = evaluate(&model, &prepared.val);
    say(
        out,
        &format!(
            "{} epochs, best epoch {}, val overall {:.2}% -> {}",
            log.epochs.len(),
            log.best_epoch,
            val.overall,
            dir.display()
        ),
    )?;
    Ok(0)
}

fn eval_cmd(cfg: &RunConfig, data: &Path, checkpoint: Option<&Path>, split: Split) -> Result<EvalReport> {
    let splits = load_splits(data)?;
    let echo = serde_json::to_value(cfg).expect("run configs serialize");
    if let Some(p) = checkpoint {
        let model = Mlcm::from_checkpoint(&Checkpoint::load(p)?)?;
        let vocab = model.vocabulary();
        let enc = encode_split(splits.get(split), model.config.d_v, &vocab, &model.roster, &model.config.encode_options());
        let echo = serde_json::json!({ "checkpoint": p.display().to_string(), "model": model.config });
        return Ok(evaluate(&model, &enc).with_config(echo));
    }
    let kind = cfg
        .baseline
        .ok_or_else(|| Error::Config("eval needs --checkpoint, --baseline or --predictions".into()))?;
    let roster = splits.train.roster();
    let prepared = prepare(&splits, &roster, &cfg.model, &cfg.embeddings, cfg.train.seed)?;
    let target = match split {
        Split::Train => &prepared.train,
        Split::Val => &prepared.val,
        Split::Test => &prepared.test,
    };
    let r = match kind {
        BaselineKind::QaVS => {
            let (m, _) = fit_qa_v_s(&prepared, &cfg.qa_v_s, &cfg.train)?;
            evaluate(&m, target)
        }
        k => evaluate(
            &Heuristic {
                kind: k,
                vectors: prepared.vocab.vectors().clone(),
            },
            target,
        ),
    };
    Ok(r.with_config(echo))
}

#[derive(serde::Deserialize)]
struct Summary {
    accuracy: [f64; 4],
    counts: [usize; 4],
}

#[derive(serde::Deserialize)]
struct Outcome {
    difficulty: u8,
    correct: bool,
}

fn report_from_predictions(path: &Path) -> Result<EvalReport> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let locus = path.display().to_string();
    if let Ok(s) = serde_json::from_str::<Summary>(&text) {
        return Ok(EvalReport::from_accuracies(s.accuracy, s.counts));
    }
    let outcomes: Vec<Outcome> = serde_json::from_str(&text).map_err(|e| Error::parse(locus, e.to_string()))?;
    Ok(EvalReport::from_outcomes(outcomes.into_iter().map(|o| (o.difficulty, o.correct))))
}
