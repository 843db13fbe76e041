//! Report document assembly: the ranked model table as JSON, the same
//! table for the terminal, and the per-block plot data.

use serde::Serialize;
use tomosel::likelihood::ExperimentRecord;
use tomosel::models::{aicc, AicReport, ModelSpec, Scoring};
use tomosel::qstate::{Outcome, Sign};

pub const REPORT_SCHEMA_VERSION: u32 = 1;

#[derive(Serialize)]
pub struct ReportDocument {
    pub schema_version: u32,
    /// Best model first.
    pub models: Vec<ModelRow>,
    /// Models dropped from the ranking, with the reason.
    pub excluded: Vec<ExcludedModel>,
    pub verdict: String,
    pub provenance: Provenance,
}

#[derive(Serialize)]
pub struct ModelRow {
    pub name: String,
    pub grouping: String,
    pub ln_likelihood: f64,
    pub k: usize,
    pub omega: f64,
    /// Small-sample corrected score, absent when the correction is
    /// undefined (sample size at most k + 1).
    pub omega_aicc: Option<f64>,
    pub delta_omega: f64,
    pub weight: f64,
    pub converged: bool,
    pub notes: Vec<String>,
}

#[derive(Serialize)]
pub struct ExcludedModel {
    pub name: String,
    pub note: String,
}

#[derive(Serialize)]
pub struct Provenance {
    pub input_sha256: String,
    pub seed: Option<u64>,
    pub tool_version: String,
}

fn describe_grouping(spec: &ModelSpec) -> String {
    let n_blocks = spec.grouping.len();
    if spec.n_groups() == 1 {
        return format!("{n_blocks} blocks share one state");
    }
    let ids: Vec<String> = spec.grouping.iter().map(usize::to_string).collect();
    let mut out = format!("groups [{}]", ids.join(","));
    if !spec.shared.is_empty() {
        let names: Vec<String> = spec.shared.iter().map(|o| o.to_string()).collect();
        out.push_str(&format!(", shared {{{}}}", names.join(",")));
    }
    out
}

pub fn build_report(
    ranking: &AicReport<f64>,
    n_samples: u64,
    excluded: Vec<ExcludedModel>,
    provenance: Provenance,
) -> ReportDocument {
    let models = ranking
        .ranked
        .iter()
        .map(|entry| {
            let fitted = &entry.fitted;
            ModelRow {
                name: fitted.spec.label.clone(),
                grouping: describe_grouping(&fitted.spec),
                ln_likelihood: fitted.ln_likelihood,
                k: fitted.param_count,
                omega: fitted.ln_likelihood - fitted.param_count as f64,
                omega_aicc: aicc(fitted.ln_likelihood, fitted.param_count, n_samples).ok(),
                delta_omega: entry.delta,
                weight: entry.weight,
                converged: fitted.converged,
                notes: fitted.notes.clone(),
            }
        })
        .collect();
    ReportDocument {
        schema_version: REPORT_SCHEMA_VERSION,
        models,
        excluded,
        verdict: ranking.verdict.to_string(),
        provenance,
    }
}

pub fn report_json(doc: &ReportDocument) -> String {
    serde_json::to_string_pretty(doc).expect("report serializes") + "\n"
}

/// Terminal table. Shows the criterion actually used for the ranking.
pub fn render_table(doc: &ReportDocument, scoring: Scoring) -> String {
    let score_header = match scoring {
        Scoring::Aic => "omega",
        Scoring::Aicc => "omega_c",
    };
    let mut out = format!(
        "{:<24} {:>5} {:>14} {:>14} {:>10} {:>8}\n",
        "model", "K", "lnL", score_header, "delta", "weight"
    );
    for row in &doc.models {
        let score = match scoring {
            Scoring::Aic => row.omega,
            Scoring::Aicc => row.omega_aicc.unwrap_or(f64::NAN),
        };
        out.push_str(&format!(
            "{:<24} {:>5} {:>14.4} {:>14.4} {:>10.4} {:>8.4}\n",
            row.name, row.k, row.ln_likelihood, score, row.delta_omega, row.weight
        ));
        for note in &row.notes {
            out.push_str(&format!("    note: {note}\n"));
        }
    }
    for excluded in &doc.excluded {
        out.push_str(&format!(
            "excluded: {} ({})\n",
            excluded.name, excluded.note
        ));
    }
    out.push_str(&format!("verdict: {}\n", doc.verdict));
    out
}

/// Per-block spin-up counts, one row per block in time order. For pair
/// settings "spin up" reads the first qubit.
pub fn plot_csv(record: &ExperimentRecord) -> String {
    let mut out = String::from("block_index,setting,n_plus,n_total\n");
    for block in record.blocks() {
        let n_plus: u64 = block
            .counts()
            .iter()
            .filter(|(outcome, _)| {
                matches!(
                    outcome,
                    Outcome::Single(Sign::Plus) | Outcome::Pair(Sign::Plus, _)
                )
            })
            .map(|(_, &n)| n)
            .sum();
        out.push_str(&format!(
            "{},{},{},{}\n",
            block.order_index(),
            block.setting(),
            n_plus,
            block.total()
        ));
    }
    out
}
