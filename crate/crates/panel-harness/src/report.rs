//! Rendering of run results: accuracy tables, pass@k curves, divergence
//! statistics, comparisons, and verification reports.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use panel_core::metrics::{mean_pass_at_k, percent_1dp, Method, TaskResult};
use panel_core::task::Domain;

use crate::runner::{CompareReport, RunRecord, VerifyReport};

fn capitalize(s: &str) -> String {
    let mut chars = s.chars();
    match chars.next() {
        Some(first) => first.to_uppercase().collect::<String>() + chars.as_str(),
        None => String::new(),
    }
}

/// How a result set splits into table columns: by domain when the dataset
/// mixes domains, by source when it mixes sources, otherwise not at all.
enum Grouping {
    ByDomain(Vec<Domain>),
    BySource(Vec<String>),
    Single,
}

fn grouping(results: &[TaskResult]) -> Grouping {
    let domains: Vec<Domain> = Domain::ALL
        .into_iter()
        .filter(|d| results.iter().any(|r| r.domain == *d))
        .collect();
    if domains.len() >= 2 {
        return Grouping::ByDomain(domains);
    }
    let sources: BTreeSet<&str> = results.iter().map(|r| r.source.as_str()).collect();
    if sources.len() >= 2 {
        return Grouping::BySource(sources.into_iter().map(str::to_string).collect());
    }
    Grouping::Single
}

fn column_labels(grouping: &Grouping) -> Vec<String> {
    match grouping {
        Grouping::ByDomain(domains) => domains.iter().map(|d| capitalize(d.as_str())).collect(),
        Grouping::BySource(sources) => sources.clone(),
        Grouping::Single => Vec::new(),
    }
}

fn accuracy_cell<F: Fn(&TaskResult) -> bool>(results: &[TaskResult], keep: F) -> (usize, usize) {
    let total = results.iter().filter(|r| keep(r)).count();
    let correct = results.iter().filter(|r| keep(r) && r.correct).count();
    (correct, total)
}

fn percent_cell(correct: usize, total: usize) -> String {
    if total == 0 {
        "-".to_string()
    } else {
        percent_1dp(correct as f64 / total as f64)
    }
}

fn group_cells(results: &[TaskResult], grouping: &Grouping) -> Vec<(usize, usize)> {
    match grouping {
        Grouping::ByDomain(domains) => domains
            .iter()
            .map(|d| accuracy_cell(results, |r| r.domain == *d))
            .collect(),
        Grouping::BySource(sources) => sources
            .iter()
            .map(|s| accuracy_cell(results, |r| r.source == *s))
            .collect(),
        Grouping::Single => Vec::new(),
    }
}

/// Records grouped into tables: one table per (dataset digest, policy
/// provider) pair, with one row per method in fixed method order.
fn table_groups(records: &[RunRecord]) -> Vec<Vec<&RunRecord>> {
    let mut groups: Vec<(String, Vec<&RunRecord>)> = Vec::new();
    for record in records {
        let key = format!("{}\0{}", record.config.dataset_digest, record.config.policy_provider);
        match groups.iter_mut().find(|(k, _)| *k == key) {
            Some((_, members)) => members.push(record),
            None => groups.push((key, vec![record])),
        }
    }
    let method_rank =
        |m: Method| Method::ALL.iter().position(|x| *x == m).unwrap_or(Method::ALL.len());
    groups
        .into_iter()
        .map(|(_, mut members)| {
            members.sort_by_key(|r| method_rank(r.method));
            members
        })
        .collect()
}

/// Accuracy tables in markdown, one per dataset and policy provider, with a
/// column per group and a pooled `All` column.
pub fn render_report(records: &[RunRecord]) -> String {
    let mut out = String::new();
    out.push_str("# Results\n");
    for group in table_groups(records) {
        let first = group[0];
        let pooled: Vec<&TaskResult> = group.iter().flat_map(|r| r.results.iter()).collect();
        let pooled_owned: Vec<TaskResult> = pooled.into_iter().cloned().collect();
        let grouping = grouping(&pooled_owned);
        let labels = column_labels(&grouping);

        let _ = write!(
            out,
            "\n## {} (policy: {})\n\n",
            first.config.dataset_name, first.config.policy_provider
        );
        out.push_str("| Method |");
        for label in &labels {
            let _ = write!(out, " {label} |");
        }
        out.push_str(" All |\n|---|");
        for _ in &labels {
            out.push_str("---|");
        }
        out.push_str("---|\n");

        for record in &group {
            let _ = write!(out, "| {} |", record.method.as_str());
            for (correct, total) in group_cells(&record.results, &grouping) {
                let _ = write!(out, " {} |", percent_cell(correct, total));
            }
            let (correct, total) = accuracy_cell(&record.results, |_| true);
            let _ = writeln!(out, " {} |", percent_cell(correct, total));
        }

        for record in &group {
            render_pass_at_k(&mut out, record);
        }
        for record in &group {
            render_divergence(&mut out, record);
        }
    }
    out
}

fn render_pass_at_k(out: &mut String, record: &RunRecord) {
    let outcomes: Option<Vec<Vec<bool>>> = record
        .results
        .iter()
        .map(|r| r.sample_outcomes.clone())
        .collect();
    let Some(outcomes) = outcomes else { return };
    let Some(max_k) = outcomes.iter().map(|o| o.len()).min() else { return };
    if max_k < 2 {
        return;
    }
    let _ = write!(
        out,
        "\n### pass@k, {} ({} attempts per task)\n\n| k | pass@k |\n|---|---|\n",
        record.method.as_str(),
        max_k
    );
    for k in 1..=max_k {
        if let Ok(p) = mean_pass_at_k(&outcomes, k as u64) {
            let _ = writeln!(out, "| {k} | {} |", percent_1dp(p));
        }
    }
}

fn render_divergence(out: &mut String, record: &RunRecord) {
    if record.divergence.is_empty() {
        return;
    }
    let _ = write!(
        out,
        "\n### Critique influence by step, {}\n\n| Step | Diverged | Total | Rate |\n|---|---|---|---|\n",
        record.method.as_str()
    );
    for stat in &record.divergence {
        let _ = writeln!(
            out,
            "| {} | {} | {} | {}% |",
            stat.step_index,
            stat.differing,
            stat.total,
            percent_1dp(stat.ratio())
        );
    }
}

/// Flat per-group accuracy rows for spreadsheet import.
pub fn accuracy_tsv(records: &[RunRecord]) -> String {
    let mut out = String::from("provider\tdataset\tmethod\tgroup\tcorrect\ttotal\taccuracy_pct\n");
    for group in table_groups(records) {
        let pooled_owned: Vec<TaskResult> =
            group.iter().flat_map(|r| r.results.iter().cloned()).collect();
        let grouping = grouping(&pooled_owned);
        let labels = column_labels(&grouping);
        for record in &group {
            let cells = group_cells(&record.results, &grouping);
            for (label, (correct, total)) in labels.iter().zip(cells) {
                let _ = writeln!(
                    out,
                    "{}\t{}\t{}\t{}\t{}\t{}\t{}",
                    record.config.policy_provider,
                    record.config.dataset_name,
                    record.method.as_str(),
                    label,
                    correct,
                    total,
                    percent_cell(correct, total)
                );
            }
            let (correct, total) = accuracy_cell(&record.results, |_| true);
            let _ = writeln!(
                out,
                "{}\t{}\t{}\tAll\t{}\t{}\t{}",
                record.config.policy_provider,
                record.config.dataset_name,
                record.method.as_str(),
                correct,
                total,
                percent_cell(correct, total)
            );
        }
    }
    out
}

pub fn render_compare(report: &CompareReport) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "# {} vs {} on {}",
        report.method_a.as_str(),
        report.method_b.as_str(),
        report.dataset
    );
    let _ = writeln!(
        out,
        "\n- {}: {}/{} correct ({})",
        report.run_a,
        report.correct_a,
        report.total,
        percent_cell(report.correct_a, report.total)
    );
    let _ = writeln!(
        out,
        "- {}: {}/{} correct ({})",
        report.run_b,
        report.correct_b,
        report.total,
        percent_cell(report.correct_b, report.total)
    );
    let _ = writeln!(out, "\n## Gained by {} ({})", report.method_b.as_str(), report.gains.len());
    for id in &report.gains {
        let _ = writeln!(out, "- {id}");
    }
    let _ = writeln!(out, "\n## Lost by {} ({})", report.method_b.as_str(), report.regressions.len());
    for id in &report.regressions {
        let _ = writeln!(out, "- {id}");
    }
    out
}

pub fn render_verify(report: &VerifyReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# Replay verification: {}", report.run_id);
    let _ = writeln!(out, "\n- traces checked: {}", report.traces_checked);
    if report.ok() {
        let _ = writeln!(out, "- result: VERIFIED (byte-identical rerun)");
    } else {
        let _ = writeln!(out, "- result: MISMATCH");
        for m in &report.mismatches {
            let _ = writeln!(out, "  - {m}");
        }
    }
    out
}
