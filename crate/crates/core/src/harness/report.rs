//! Rendering evaluation reports as aligned text tables and merging
//! per-strategy reports into one comparison table per task.

use super::eval::EvalReport;
use std::collections::BTreeSet;

/// Single-report table: one row per bucket plus the aggregate.
pub fn render_table(report: &EvalReport) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "task: {}  strategy: {}  examples: {}\n",
        report.task, report.strategy, report.total
    ));
    out.push_str(&format!(
        "{:<8} {:<15} {:>7} {:>9} {:>9}\n",
        "bucket", "category", "total", "correct", "accuracy"
    ));
    for row in &report.buckets {
        out.push_str(&format!(
            "{:<8} {:<15} {:>7} {:>9} {:>8.1}%\n",
            row.bucket,
            row.category,
            row.total,
            row.correct,
            row.accuracy * 100.0
        ));
    }
    out.push_str(&format!(
        "{:<8} {:<15} {:>7} {:>9} {:>8.1}%\n",
        "all", "", report.total, report.correct, report.aggregate * 100.0
    ));
    out.push_str(&format!(
        "failures: extraction={} wrong_triple={} wrong_label={}\n",
        report.failures.extraction_failed,
        report.failures.wrong_triple,
        report.failures.wrong_label
    ));
    out
}

/// Strategy-by-bucket comparison over several reports of the same task.
pub fn comparison_table(reports: &[EvalReport]) -> String {
    let mut out = String::new();
    if reports.is_empty() {
        return "no reports\n".to_string();
    }
    let task = &reports[0].task;
    let buckets: BTreeSet<usize> =
        reports.iter().flat_map(|r| r.buckets.iter().map(|b| b.bucket)).collect();
    out.push_str(&format!("{:<16}", task));
    for b in &buckets {
        out.push_str(&format!("{:>9}", b));
    }
    out.push_str(&format!("{:>9}\n", "avg."));
    for r in reports {
        out.push_str(&format!("{:<16}", r.strategy));
        for b in &buckets {
            match r.buckets.iter().find(|row| row.bucket == *b) {
                Some(row) => out.push_str(&format!("{:>8.1}%", row.accuracy * 100.0)),
                None => out.push_str(&format!("{:>9}", "-")),
            }
        }
        out.push_str(&format!("{:>8.1}%\n", r.aggregate * 100.0));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::super::eval::{BucketRow, FailureCounts};
    use super::*;

    fn report(strategy: &str, acc: f64) -> EvalReport {
        EvalReport {
            task: "kinship".into(),
            strategy: strategy.into(),
            buckets: vec![
                BucketRow {
                    bucket: 2,
                    category: "seen".into(),
                    total: 10,
                    correct: (10.0 * acc) as usize,
                    accuracy: acc,
                },
                BucketRow {
                    bucket: 3,
                    category: "interpolation".into(),
                    total: 10,
                    correct: 5,
                    accuracy: 0.5,
                },
            ],
            aggregate: (acc + 0.5) / 2.0,
            total: 20,
            correct: ((10.0 * acc) as usize) + 5,
            failures: FailureCounts { extraction_failed: 1, wrong_triple: 2, wrong_label: 0 },
        }
    }

    #[test]
    fn single_table_has_bucket_rows_and_aggregate() {
        let text = render_table(&report("baseline", 0.9));
        assert!(text.contains("bucket"));
        assert!(text.contains("seen"));
        assert!(text.contains("90.0%"));
        assert!(text.contains("failures: extraction=1"));
    }

    #[test]
    fn comparison_merges_strategies_row_per_strategy() {
        let text = comparison_table(&[report("baseline", 0.6), report("enc-sum", 0.9)]);
        let lines: Vec<&str> = text.lines().collect();
        assert!(lines[0].contains("kinship"));
        assert!(lines[0].contains("avg."));
        assert!(lines[1].starts_with("baseline"));
        assert!(lines[2].starts_with("enc-sum"));
        assert!(lines[2].contains("90.0%"));
    }
}
