//! Aggregate published per-difficulty test accuracies into Overall and
//! Diff. Avg., and compare with the published aggregates.

use storyqa::train::{ablation_markdown, AblationRow, EvalReport};

const TEST_COUNTS: [usize; 4] = [1782, 853, 409, 409];

fn main() {
    // label, per-difficulty accuracy, published overall and diff. avg.
    let rows = [
        ("Shortest Answer", [20.54, 18.64, 20.78, 18.83], 19.90, 19.70),
        ("Longest Answer", [23.85, 21.10, 31.05, 30.81], 24.85, 26.70),
        ("QA Similarity", [30.64, 27.20, 26.16, 22.25], 28.27, 26.56),
        ("QA+V+S", [57.24, 49.12, 41.32, 39.85], 51.29, 46.88),
        ("Our (Full)", [75.96, 74.65, 57.36, 56.63], 71.14, 66.15),
    ];
    let mut table = Vec::new();
    for (label, acc, overall, avg) in rows {
        let r = EvalReport::from_accuracies(acc, TEST_COUNTS);
        println!(
            "{label:<16} overall {:.4} (published {overall:.2}), diff avg {:.4} (published {avg:.2})",
            r.overall,
            r.diff_avg.unwrap_or(f64::NAN)
        );
        table.push(AblationRow::from_runs(label, vec![r]));
    }
    println!();
    print!("{}", ablation_markdown(&table));
}
