use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::experiment::{fit, prepare, Embeddings};
use super::{evaluate, EvalReport, TrainConfig};
use crate::model::ModelConfig;
use crate::schema::Roster;
use crate::synth::SplitSet;
use crate::{Error, Result};

/// Model variants of the ablation table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Variant {
    Full,
    NoHigh,
    NoLow,
    ScriptOnly,
    VisualOnly,
    ScriptOnlyNoCoref,
    VisualOnlyNoMeta,
}

impl Variant {
    pub const ALL: [Variant; 7] = [
        Self::Full,
        Self::NoHigh,
        Self::NoLow,
        Self::ScriptOnly,
        Self::VisualOnly,
        Self::ScriptOnlyNoCoref,
        Self::VisualOnlyNoMeta,
    ];

    /// Table label.
    pub fn label(self) -> &'static str {
        match self {
            Self::Full => "Our (Full)",
            Self::NoHigh => "Our−High",
            Self::NoLow => "Our−Low",
            Self::ScriptOnly => "S.Only",
            Self::VisualOnly => "V.Only",
            Self::ScriptOnlyNoCoref => "S.Only−Coref",
            Self::VisualOnlyNoMeta => "V.Only−V.Meta",
        }
    }

    /// Command-line spelling.
    pub fn key(self) -> &'static str {
        match self {
            Self::Full => "full",
            Self::NoHigh => "our-high",
            Self::NoLow => "our-low",
            Self::ScriptOnly => "s.only",
            Self::VisualOnly => "v.only",
            Self::ScriptOnlyNoCoref => "s.only-coref",
            Self::VisualOnlyNoMeta => "v.only-v.meta",
        }
    }

    pub fn apply(self, base: &ModelConfig) -> ModelConfig {
        let mut c = base.clone();
        match self {
            Self::Full => {}
            Self::NoHigh => c.use_high = false,
            Self::NoLow => c.use_low = false,
            Self::ScriptOnly => c.use_visual = false,
            Self::VisualOnly => c.use_script = false,
            Self::ScriptOnlyNoCoref => {
                c.use_visual = false;
                c.use_coref = false;
            }
            Self::VisualOnlyNoMeta => {
                c.use_script = false;
                c.use_vmeta = false;
            }
        }
        c
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.trim().replace('−', "-").to_lowercase().replace(' ', "");
        Self::ALL
            .into_iter()
            .find(|v| v.key() == norm || v.label().replace('−', "-").to_lowercase().replace(' ', "") == norm)
            .ok_or_else(|| Error::UnknownVariant(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub label: String,
    /// Per-seed test reports.
    pub runs: Vec<EvalReport>,
    /// Accuracies averaged over runs.
    pub mean: EvalReport,
}

impl AblationRow {
    pub fn from_runs(label: impl Into<String>, runs: Vec<EvalReport>) -> Self {
        let k = runs.len().max(1) as f64;
        let acc = std::array::from_fn(|d| runs.iter().filter_map(|r| r.accuracy[d]).sum::<f64>() / k);
        let counts = runs.first().map_or([0; 4], |r| r.counts);
        let mut mean = EvalReport::from_accuracies(acc, counts);
        mean.overall = runs.iter().map(|r| r.overall).sum::<f64>() / k;
        Self {
            label: label.into(),
            runs,
            mean,
        }
    }
}

/// Trains every variant from scratch once per seed and evaluates on the
/// test split.
pub fn run_ablation(
    splits: &SplitSet,
    roster: &Roster,
    base: &ModelConfig,
    embeddings: &Embeddings,
    train_cfg: &TrainConfig,
    variants: &[Variant],
    seeds: &[u64],
) -> Result<Vec<AblationRow>> {
    let mut rows = Vec::new();
    for &v in variants {
        let cfg = v.apply(base);
        cfg.validate()?;
        let mut runs = Vec::new();
        for &seed in seeds {
            let prepared = prepare(splits, roster, &cfg, embeddings, seed)?;
            let tc = TrainConfig {
                seed,
                ..train_cfg.clone()
            };
            let (model, _) = fit(&prepared, &cfg, &tc)?;
            runs.push(evaluate(&model, &prepared.test));
        }
        rows.push(AblationRow::from_runs(v.label(), runs));
    }
    Ok(rows)
}

/// Results table with one row per entry.
pub fn ablation_markdown(rows: &[AblationRow]) -> String {
    let mut out = String::from("| Model | Diff. 1 | Diff. 2 | Diff. 3 | Diff. 4 | Overall | Diff. Avg. |\n");
    out.push_str("|---|---:|---:|---:|---:|---:|---:|\n");
    let f = |x: Option<f64>| x.map_or("-".to_string(), |v| format!("{v:.2}"));
    for r in rows {
        let m = &r.mean;
        out.push_str(&format!(
            "| {} | {} | {} | {} | {} | {:.2} | {} |\n",
            r.label,
            f(m.accuracy[0]),
            f(m.accuracy[1]),
            f(m.accuracy[2]),
            f(m.accuracy[3]),
            m.overall,
            f(m.diff_avg)
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_labels_and_keys() {
        for v in Variant::ALL {
            assert_eq!(v.key().parse::<Variant>().unwrap(), v);
            assert_eq!(v.label().parse::<Variant>().unwrap(), v);
        }
        assert_eq!("Our-High".parse::<Variant>().unwrap(), Variant::NoHigh);
        assert!(matches!("Our-Mid".parse::<Variant>(), Err(Error::UnknownVariant(_))));
    }

    #[test]
    fn switches() {
        let b = ModelConfig::tiny();
        let c = Variant::ScriptOnlyNoCoref.apply(&b);
        assert!(!c.use_visual && !c.use_coref && c.use_script);
        let c = Variant::VisualOnlyNoMeta.apply(&b);
        assert!(!c.use_script && !c.use_vmeta && c.use_visual);
        assert!(!Variant::NoLow.apply(&b).use_low);
    }

    #[test]
    fn table_has_one_row_per_entry() {
        let r = EvalReport::from_accuracies([50.0, 40.0, 30.0, 20.0], [2, 2, 2, 2]);
        let rows = vec![
            AblationRow::from_runs("A", vec![r.clone()]),
            AblationRow::from_runs("B", vec![r.clone(), r]),
        ];
        let md = ablation_markdown(&rows);
        assert_eq!(md.lines().count(), 4);
        assert!(md.contains("| B | 50.00 | 40.00 | 30.00 | 20.00 | 35.00 | 35.00 |"));
    }
}
