use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::Serialize;

use super::aggregate::{aggregate, percent_1dp, AggregateRow, GroupKey};
use super::reference::{
    format_cell, reference_cell, ReferenceTable, FIXED_RENDER_WORD, REAL_MNIST_UPPER_BOUND, REFERENCE_MODEL,
    REFERENCE_VERSION,
};
use super::taxonomy::{classify_errors, Taxonomy};
use super::{HarnessError, RunRecord};
use crate::client::Usage;
use crate::nav::NavKind;
use crate::strategy::StrategyKind;
use crate::task::TaskKind;

/// Measured results of one run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub run_id: String,
    pub task: TaskKind,
    pub strategy: StrategyKind,
    pub overall: AggregateRow,
    pub groups: Vec<AggregateRow>,
    pub usage: Usage,
    pub provider_calls: u64,
    pub errors: Taxonomy,
}

impl RunReport {
    fn group(&self, key: &str) -> Option<&AggregateRow> {
        self.groups.iter().find(|g| g.key == key)
    }
}

pub fn run_report(
    records: &[RunRecord],
    human_labels: Option<&BTreeMap<String, String>>,
) -> Result<RunReport, HarnessError> {
    let first = records.first().ok_or(HarnessError::EmptyRecords)?;
    if let Some(odd) = records
        .iter()
        .find(|r| r.run_id != first.run_id || r.task != first.task || r.strategy != first.strategy)
    {
        return Err(HarnessError::Dataset(format!(
            "record {} belongs to a different run, task or strategy",
            odd.instance_id
        )));
    }
    let table = aggregate(records, Some(GroupKey::Group))?;
    let has_groups = records.iter().any(|r| r.group.is_some());
    Ok(RunReport {
        run_id: first.run_id.clone(),
        task: first.task,
        strategy: first.strategy,
        overall: table.overall,
        groups: if has_groups { table.rows } else { Vec::new() },
        usage: records.iter().map(|r| r.usage).sum(),
        provider_calls: records.iter().map(|r| u64::from(r.provider_calls)).sum(),
        errors: classify_errors(records, human_labels)?,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonCell {
    pub table: ReferenceTable,
    pub strategy: StrategyKind,
    pub column: String,
    pub measured: Option<f64>,
    /// `None` when no published number exists for this pair.
    pub reference: Option<f64>,
}

const COMPARED_STRATEGIES: [StrategyKind; 4] = [
    StrategyKind::Direct,
    StrategyKind::Cot,
    StrategyKind::Wot,
    StrategyKind::FixedRender,
];

fn measured(runs: &[RunReport], table: ReferenceTable, strategy: StrategyKind, column: &str) -> Option<f64> {
    let find = |task: TaskKind| runs.iter().find(|r| r.task == task && r.strategy == strategy);
    match table {
        ReferenceTable::Ascii => {
            let task = column.parse::<TaskKind>().ok()?;
            find(task).map(|r| r.overall.accuracy)
        }
        ReferenceTable::WordFonts => find(TaskKind::Word)?.group(column).map(|g| g.accuracy),
        ReferenceTable::Navigation => {
            let run = find(TaskKind::Navigation)?;
            if column != "avg" {
                return run.group(column).map(|g| g.accuracy);
            }
            // Unweighted mean over geometries, as in the published table.
            let present: Vec<&AggregateRow> = NavKind::ALL.iter().filter_map(|k| run.group(k.as_str())).collect();
            if present.is_empty() {
                return None;
            }
            let mean: f64 = present.iter().map(|g| g.accuracy).sum::<f64>() / present.len() as f64;
            Some((mean * 10.0).round() / 10.0)
        }
    }
}

/// Measured-vs-published cells for every table, strategy and column that
/// has either side.
pub fn compare_with_reference(runs: &[RunReport]) -> Vec<ComparisonCell> {
    let mut cells = Vec::new();
    for table in [
        ReferenceTable::Ascii,
        ReferenceTable::WordFonts,
        ReferenceTable::Navigation,
    ] {
        for strategy in COMPARED_STRATEGIES {
            for column in table.columns() {
                let reference = reference_cell(table, strategy, column);
                let measured = measured(runs, table, strategy, column);
                if reference.is_some() || measured.is_some() {
                    cells.push(ComparisonCell {
                        table,
                        strategy,
                        column: column.to_string(),
                        measured,
                        reference,
                    });
                }
            }
        }
    }
    cells
}

/// Full report: per-run results and, on request, the reference comparison.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub runs: Vec<RunReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub comparison: Option<Comparison>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Comparison {
    pub reference_version: &'static str,
    pub reference_model: &'static str,
    pub fixed_render_word: f64,
    pub real_mnist_upper_bound: f64,
    pub cells: Vec<ComparisonCell>,
}

pub fn build_report(runs: Vec<RunReport>, compare_paper: bool) -> Report {
    let comparison = compare_paper.then(|| Comparison {
        reference_version: REFERENCE_VERSION,
        reference_model: REFERENCE_MODEL,
        fixed_render_word: FIXED_RENDER_WORD,
        real_mnist_upper_bound: REAL_MNIST_UPPER_BOUND,
        cells: compare_with_reference(&runs),
    });
    Report { runs, comparison }
}

fn render_run(out: &mut String, run: &RunReport) {
    let _ = writeln!(out, "Run {} (task {}, strategy {})", run.run_id, run.task, run.strategy);
    let _ = writeln!(
        out,
        "  {:<14} n={:<5} correct={:<5} accuracy {:.1}",
        "overall", run.overall.n, run.overall.n_correct, run.overall.accuracy
    );
    for g in &run.groups {
        let _ = writeln!(
            out,
            "  {:<14} n={:<5} correct={:<5} accuracy {:.1}",
            g.key, g.n, g.n_correct, g.accuracy
        );
    }
    let _ = writeln!(
        out,
        "  usage: {} prompt + {} completion tokens over {} provider calls",
        run.usage.prompt_tokens, run.usage.completion_tokens, run.provider_calls
    );
    let incorrect = run.errors.total();
    let _ = writeln!(out, "  sources of error ({incorrect} incorrect):");
    for (category, count) in &run.errors.counts {
        let share = percent_1dp(*count, incorrect);
        let _ = writeln!(
            out,
            "    {:<20} {:>4}  {:>5.1}%  {}",
            category.as_str(),
            count,
            share,
            "#".repeat(*count.min(&60))
        );
    }
    if !run.errors.worklist.is_empty() {
        let _ = writeln!(out, "  review worklist: {} item(s)", run.errors.worklist.len());
    }
}

fn fmt_opt(table: ReferenceTable, value: Option<f64>) -> String {
    match (table, value) {
        (_, None) => "-".into(),
        (ReferenceTable::Navigation, Some(v)) if v.fract() != 0.0 => format!("{v:.1}"),
        (t, Some(v)) => format_cell(t, v),
    }
}

fn render_comparison(out: &mut String, comparison: &Comparison) {
    let _ = writeln!(
        out,
        "Comparison with reference (paper) values [{}; reference set v{}]",
        comparison.reference_model, comparison.reference_version
    );
    let _ = writeln!(
        out,
        "Cells read `measured | reference (paper)`; `-` means not available."
    );
    for table in [
        ReferenceTable::Ascii,
        ReferenceTable::WordFonts,
        ReferenceTable::Navigation,
    ] {
        let _ = writeln!(out);
        let _ = writeln!(out, "{}", table.title());
        let mut header = format!("  {:<14}", "strategy");
        for column in table.columns() {
            let _ = write!(header, "{column:<16}");
        }
        let _ = writeln!(out, "{}", header.trim_end());
        for strategy in COMPARED_STRATEGIES {
            let row: Vec<&ComparisonCell> = comparison
                .cells
                .iter()
                .filter(|c| c.table == table && c.strategy == strategy)
                .collect();
            if row.is_empty() {
                continue;
            }
            let mut line = format!("  {:<14}", strategy.as_str());
            for column in table.columns() {
                let cell = row.iter().find(|c| c.column == *column);
                let text = format!(
                    "{} | {}",
                    fmt_opt(table, cell.and_then(|c| c.measured)),
                    fmt_opt(table, cell.and_then(|c| c.reference))
                );
                let _ = write!(line, "{text:<16}");
            }
            let _ = writeln!(out, "{}", line.trim_end());
        }
    }
    let _ = writeln!(out);
    let _ = writeln!(
        out,
        "Real MNIST images, reference (paper) upper bound: {:.1}",
        comparison.real_mnist_upper_bound
    );
}

pub fn render_text(report: &Report) -> String {
    let mut out = String::new();
    for run in &report.runs {
        render_run(&mut out, run);
        out.push('\n');
    }
    if let Some(comparison) = &report.comparison {
        render_comparison(&mut out, comparison);
    }
    out
}
