//! Compare analytic gradients with central differences for every parameter
//! group of the tiny model, with both similarity functions.

use anyhow::Result;
use storyqa::model::{ModelConfig, Similarity};
use storyqa::train::{grad_check, GRAD_TOLERANCE};

fn main() -> Result<()> {
    for similarity in [Similarity::Dot, Similarity::Trilinear] {
        let cfg = ModelConfig {
            similarity,
            ..ModelConfig::tiny()
        };
        let r = grad_check(&cfg, 0)?;
        println!("{similarity:?}: {} groups, max rel error {:.2e}", r.groups.len(), r.max_rel_error);
        let mut worst = r.groups.clone();
        worst.sort_by(|a, b| b.rel_error.total_cmp(&a.rel_error));
        for g in worst.iter().take(5) {
            println!("  {:<24} {:.2e}", g.name, g.rel_error);
        }
        println!("  {}", if r.max_rel_error < GRAD_TOLERANCE { "PASS" } else { "FAIL" });
    }
    Ok(())
}
