use serde::{Deserialize, Serialize};

use crate::features::{EncodeOptions, Limits};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Similarity {
    Dot,
    Trilinear,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    /// Width of every contextual embedding; half per LSTM direction.
    pub d: usize,
    pub d_w: usize,
    pub d_v: usize,
    pub kernels: Vec<usize>,
    pub filters: usize,
    /// Dropout on the fused stream features while training.
    pub dropout: f64,
    pub similarity: Similarity,
    pub use_script: bool,
    pub use_visual: bool,
    pub use_low: bool,
    pub use_high: bool,
    pub use_coref: bool,
    pub use_vmeta: bool,
    /// Use the name word vectors as the character bank (needs `d == d_w`).
    pub tie_bank: bool,
    /// Keep the word vectors at their initial values.
    pub freeze_embed: bool,
    pub limits: Limits,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            d: 300,
            d_w: 300,
            d_v: 512,
            kernels: vec![1, 2, 3],
            filters: 100,
            dropout: 0.0,
            similarity: Similarity::Dot,
            use_script: true,
            use_visual: true,
            use_low: true,
            use_high: true,
            use_coref: true,
            use_vmeta: true,
            tie_bank: false,
            freeze_embed: false,
            limits: Limits::default(),
        }
    }
}

impl ModelConfig {
    /// Configuration used for finite-difference gradient checks.
    pub fn tiny() -> Self {
        Self {
            d: 8,
            d_w: 8,
            d_v: 8,
            kernels: vec![1, 2, 3],
            filters: 4,
            ..Self::default()
        }
    }

    /// Small but trainable on one core in minutes.
    pub fn small() -> Self {
        Self {
            d: 32,
            d_w: 32,
            d_v: 32,
            kernels: vec![1, 2, 3],
            filters: 16,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(format!("model: {m}")));
        if self.d < 2 || !self.d.is_multiple_of(2) {
            return bad("d must be even and at least 2");
        }
        if self.d_w == 0 || self.d_v == 0 || self.filters == 0 {
            return bad("d_w, d_v and filters must be positive");
        }
        if self.kernels.is_empty() || self.kernels.contains(&0) {
            return bad("kernels must be a non-empty list of positive sizes");
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad("dropout must lie in [0, 1)");
        }
        if !(self.use_script || self.use_visual) || !(self.use_low || self.use_high) {
            return bad("at least one stream must be enabled");
        }
        if self.tie_bank && self.d != self.d_w {
            return bad("tie_bank needs d == d_w");
        }
        Ok(())
    }

    pub fn encode_options(&self) -> EncodeOptions {
        EncodeOptions {
            use_coref: self.use_coref,
            use_vmeta: self.use_vmeta,
            limits: self.limits,
        }
    }

    pub fn stream_enabled(&self, s: Stream) -> bool {
        let modality = match s {
            Stream::ScriptHigh | Stream::ScriptLow => self.use_script,
            Stream::VisualHigh | Stream::VisualLow => self.use_visual,
        };
        let level = match s {
            Stream::ScriptHigh | Stream::VisualHigh => self.use_high,
            Stream::ScriptLow | Stream::VisualLow => self.use_low,
        };
        modality && level
    }
}

/// The four scored evidence streams.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Stream {
    ScriptHigh,
    ScriptLow,
    VisualHigh,
    VisualLow,
}

impl Stream {
    pub const ALL: [Stream; 4] = [Stream::ScriptHigh, Stream::ScriptLow, Stream::VisualHigh, Stream::VisualLow];

    pub fn name(self) -> &'static str {
        match self {
            Stream::ScriptHigh => "script_high",
            Stream::ScriptLow => "script_low",
            Stream::VisualHigh => "visual_high",
            Stream::VisualLow => "visual_low",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validation() {
        assert!(ModelConfig::default().validate().is_ok());
        assert!(ModelConfig::tiny().validate().is_ok());
        let none = ModelConfig {
            use_script: false,
            use_visual: false,
            ..ModelConfig::tiny()
        };
        assert!(none.validate().is_err());
        let odd = ModelConfig { d: 7, ..ModelConfig::tiny() };
        assert!(odd.validate().is_err());
    }

    #[test]
    fn switches_select_streams() {
        let c = ModelConfig {
            use_high: false,
            ..ModelConfig::tiny()
        };
        let on: Vec<_> = Stream::ALL.iter().filter(|s| c.stream_enabled(**s)).collect();
        assert_eq!(on, [&Stream::ScriptLow, &Stream::VisualLow]);
    }
}
