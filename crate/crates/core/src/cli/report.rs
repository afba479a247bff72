//! Analysis report: per-cell Bayes factors plus the three count tables.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::config::RunConfig;
use crate::bayes::{BayesFactorResult, BestModel, BestModelOutcome, BfBound, BfConfig};
use crate::error::{Error, Result};
use crate::experiment::{CellData, CellKey};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellReport {
    pub responder: String,
    pub set: String,
    pub format: String,
    pub valid_trials: u64,
    pub parse_failures: u64,
    pub transport_failures: u64,
    pub pending: u64,
    /// Pairs with no valid observation; their posterior equals the prior.
    pub empty_pairs: Vec<String>,
    pub wst: BayesFactorResult,
    pub mmtp: BayesFactorResult,
    pub best_model: BestModelOutcome,
}

impl CellReport {
    pub fn new(
        key: &CellKey,
        cell: &CellData,
        wst: BayesFactorResult,
        mmtp: BayesFactorResult,
        best_model: BestModelOutcome,
    ) -> Self {
        Self {
            responder: key.responder.clone(),
            set: key.set.clone(),
            format: key.format.key(),
            valid_trials: cell.dataset.total_observations(),
            parse_failures: cell.parse_failures,
            transport_failures: cell.transport_failures,
            pending: cell.pending,
            empty_pairs: cell.empty_pair_names(),
            wst,
            mmtp,
            best_model,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResponderSummary {
    pub responder: String,
    pub wst_violations: u64,
    pub mmtp_violations: u64,
    /// Degenerate estimates (zero hits); those with an upper bound below the
    /// "against" threshold are also included in the violation counts.
    pub wst_degenerate: u64,
    pub mmtp_degenerate: u64,
    /// Violation opportunities per model: sets times formats.
    pub opportunities: u64,
    pub best_none: u64,
    pub best_wst: u64,
    pub best_mmtp: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FormatSetRow {
    pub set: String,
    /// Violations of either model, one entry per format column.
    pub by_format: Vec<u64>,
    pub total: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub bayes: BfConfig,
    pub total_trials: usize,
    pub responders: Vec<String>,
    pub sets: Vec<String>,
    pub formats: Vec<String>,
    pub bayes_factors: usize,
    pub cells: Vec<CellReport>,
    pub by_responder: Vec<ResponderSummary>,
    pub by_format_set: Vec<FormatSetRow>,
    pub format_totals: Vec<u64>,
    pub grand_total: u64,
}

/// Counts as a violation: BF below 0.316, including zero-hit estimates whose
/// upper bound is already below it.
pub fn is_violation(r: &BayesFactorResult) -> bool {
    r.substantially_against()
}

impl AnalysisReport {
    /// Assemble tables from per-cell results, ordered as in `cfg`.
    pub fn build(cfg: &RunConfig, total_trials: usize, cells: Vec<CellReport>) -> Self {
        let responders = cfg.responder_ids();
        let sets: Vec<String> = cfg.sets.iter().map(|s| s.name().to_string()).collect();
        let formats: Vec<String> = cfg.formats.iter().map(|f| f.key()).collect();

        let by_responder = responders
            .iter()
            .map(|id| {
                let mine: Vec<&CellReport> = cells.iter().filter(|c| &c.responder == id).collect();
                let count = |f: &dyn Fn(&CellReport) -> bool| mine.iter().filter(|c| f(c)).count() as u64;
                ResponderSummary {
                    responder: id.clone(),
                    wst_violations: count(&|c| is_violation(&c.wst)),
                    mmtp_violations: count(&|c| is_violation(&c.mmtp)),
                    wst_degenerate: count(&|c| c.wst.is_degenerate()),
                    mmtp_degenerate: count(&|c| c.mmtp.is_degenerate()),
                    opportunities: (sets.len() * formats.len()) as u64,
                    best_none: count(&|c| c.best_model.best == BestModel::None),
                    best_wst: count(&|c| c.best_model.best == BestModel::Wst),
                    best_mmtp: count(&|c| c.best_model.best == BestModel::Mmtp),
                }
            })
            .collect();

        let violations = |c: &CellReport| is_violation(&c.wst) as u64 + is_violation(&c.mmtp) as u64;
        let by_format_set: Vec<FormatSetRow> = sets
            .iter()
            .map(|set| {
                let by_format: Vec<u64> = formats
                    .iter()
                    .map(|f| cells.iter().filter(|c| &c.set == set && &c.format == f).map(violations).sum())
                    .collect();
                FormatSetRow { set: set.clone(), total: by_format.iter().sum(), by_format }
            })
            .collect();
        let format_totals: Vec<u64> =
            (0..formats.len()).map(|i| by_format_set.iter().map(|r| r.by_format[i]).sum()).collect();
        let grand_total = format_totals.iter().sum();

        Self {
            bayes: cfg.bayes.clone(),
            total_trials,
            bayes_factors: 2 * cells.len(),
            responders,
            sets,
            formats,
            cells,
            by_responder,
            by_format_set,
            format_totals,
            grand_total,
        }
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_slice(&bytes).map_err(|e| Error::format(path.display().to_string(), e))
    }

    pub fn cells_csv(&self) -> Result<Vec<u8>> {
        let mut header: Vec<String> = [
            "responder",
            "set",
            "format",
            "valid_trials",
            "parse_failures",
            "transport_failures",
            "pending",
            "empty_pairs",
        ]
        .map(String::from)
        .to_vec();
        for m in ["wst", "mmtp"] {
            header.extend(["bf", "rel_se", "verdict", "degenerate", "bound"].map(|c| format!("{c}_{m}")));
        }
        header.extend(["best_model".to_string(), "note".to_string()]);
        let mut rows = Vec::new();
        for c in &self.cells {
            let mut row = vec![
                c.responder.clone(),
                c.set.clone(),
                c.format.clone(),
                c.valid_trials.to_string(),
                c.parse_failures.to_string(),
                c.transport_failures.to_string(),
                c.pending.to_string(),
                c.empty_pairs.join(" "),
            ];
            for r in [&c.wst, &c.mmtp] {
                row.extend([
                    float_text(r.bf),
                    float_text(r.rel_se),
                    verdict_text(r).to_string(),
                    r.is_degenerate().to_string(),
                    bound_text(r.bound),
                ]);
            }
            row.push(best_text(c.best_model.best).into());
            row.push(c.best_model.note.clone().unwrap_or_default());
            rows.push(row);
        }
        to_csv(&header, rows)
    }

    pub fn violations_by_responder_csv(&self) -> Result<Vec<u8>> {
        let header = [
            "responder",
            "wst_violations",
            "mmtp_violations",
            "total_violations",
            "wst_degenerate",
            "mmtp_degenerate",
            "opportunities_per_model",
        ];
        let rows = self
            .by_responder
            .iter()
            .map(|r| {
                vec![
                    r.responder.clone(),
                    r.wst_violations.to_string(),
                    r.mmtp_violations.to_string(),
                    (r.wst_violations + r.mmtp_violations).to_string(),
                    r.wst_degenerate.to_string(),
                    r.mmtp_degenerate.to_string(),
                    r.opportunities.to_string(),
                ]
            })
            .collect();
        to_csv(&header, rows)
    }

    pub fn violations_by_format_set_csv(&self) -> Result<Vec<u8>> {
        let mut header = vec!["set"];
        header.extend(self.formats.iter().map(String::as_str));
        header.push("total");
        let mut rows: Vec<Vec<String>> = self
            .by_format_set
            .iter()
            .map(|r| {
                let mut row = vec![r.set.clone()];
                row.extend(r.by_format.iter().map(u64::to_string));
                row.push(r.total.to_string());
                row
            })
            .collect();
        let mut totals = vec!["total".to_string()];
        totals.extend(self.format_totals.iter().map(u64::to_string));
        totals.push(self.grand_total.to_string());
        rows.push(totals);
        to_csv(&header, rows)
    }

    pub fn best_model_by_responder_csv(&self) -> Result<Vec<u8>> {
        let rows = self
            .by_responder
            .iter()
            .map(|r| vec![r.responder.clone(), r.best_none.to_string(), r.best_wst.to_string(), r.best_mmtp.to_string()])
            .collect();
        to_csv(&["responder", "NONE", "WST", "MMTP"], rows)
    }

    /// Plain-text rendering of the three tables.
    pub fn render_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "{} trials, {} cells, {} Bayes factors\n",
            self.total_trials,
            self.cells.len(),
            self.bayes_factors
        );
        let w = self.responders.iter().map(String::len).max().unwrap_or(0).max(9);
        let _ = writeln!(s, "Violations by responder (BF < 0.316)");
        let _ = writeln!(s, "{:<w$}  {:>5}  {:>5}  {:>5}  {:>10}  {:>13}", "responder", "WST", "MMTP", "total", "degenerate", "opportunities");
        for r in &self.by_responder {
            let _ = writeln!(
                s,
                "{:<w$}  {:>5}  {:>5}  {:>5}  {:>10}  {:>13}",
                r.responder,
                r.wst_violations,
                r.mmtp_violations,
                r.wst_violations + r.mmtp_violations,
                r.wst_degenerate + r.mmtp_degenerate,
                r.opportunities
            );
        }

        let sw = self.sets.iter().map(String::len).max().unwrap_or(0).max(5);
        let _ = writeln!(s, "\nViolations by set and format");
        let _ = write!(s, "{:<sw$}", "set");
        for f in &self.formats {
            let _ = write!(s, "  {f:>w$}", w = f.len());
        }
        let _ = writeln!(s, "  total");
        let mut row = |name: &str, vals: &[u64], total: u64| {
            let _ = write!(s, "{name:<sw$}");
            for (f, v) in self.formats.iter().zip(vals) {
                let _ = write!(s, "  {v:>w$}", w = f.len());
            }
            let _ = writeln!(s, "  {total:>5}");
        };
        for r in &self.by_format_set {
            row(&r.set, &r.by_format, r.total);
        }
        row("total", &self.format_totals, self.grand_total);

        let _ = writeln!(s, "\nBest model by responder");
        let _ = writeln!(s, "{:<w$}  {:>5}  {:>5}  {:>5}", "responder", "NONE", "WST", "MMTP");
        for r in &self.by_responder {
            let _ = writeln!(s, "{:<w$}  {:>5}  {:>5}  {:>5}", r.responder, r.best_none, r.best_wst, r.best_mmtp);
        }
        s
    }
}

fn to_csv<H: AsRef<[u8]>>(header: &[H], rows: Vec<Vec<String>>) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let err = |e: csv::Error| Error::format("report CSV", e);
    w.write_record(header).map_err(err)?;
    for r in rows {
        w.write_record(&r).map_err(err)?;
    }
    w.into_inner().map_err(|e| Error::format("report CSV", e))
}

fn float_text(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf" } else { "-inf" }.into()
    } else {
        x.to_string()
    }
}

fn verdict_text(r: &BayesFactorResult) -> &'static str {
    use crate::bayes::Verdict::*;
    match r.verdict {
        SubstantialFor => "substantial_for",
        Inconclusive => "inconclusive",
        SubstantialAgainst => "substantial_against",
        Degenerate => "degenerate",
    }
}

fn bound_text(b: Option<BfBound>) -> String {
    match b {
        None => String::new(),
        Some(BfBound::Upper(u)) => format!("<{}", float_text(u)),
        Some(BfBound::Lower(l)) => format!(">{}", float_text(l)),
    }
}

fn best_text(b: BestModel) -> &'static str {
    match b {
        BestModel::None => "NONE",
        BestModel::Wst => "WST",
        BestModel::Mmtp => "MMTP",
    }
}
