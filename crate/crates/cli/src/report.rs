//! Consolidated summary of a finished run.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use detect_core::models::PruneReport;
use detect_core::stats::{effects_table, FeatureComparison};
use serde::{Deserialize, Serialize};

use crate::manifest::StageRun;
use crate::stages::{level_name, ModelScore};
use crate::{CliError, RunConfig};

pub const TOP_FEATURES: usize = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Importance {
    pub feature: String,
    pub mean_abs_phi: f64,
    pub rank: usize,
    pub direction: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LevelSummary {
    pub level: String,
    pub effects: Vec<FeatureComparison>,
    pub kept: Vec<String>,
    pub models: Vec<ModelScore>,
    /// Absent when the explain stage has not run.
    pub importance: Option<Vec<Importance>>,
    pub notices: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Summary {
    pub levels: Vec<LevelSummary>,
}

#[derive(Deserialize)]
struct ImportanceEntry {
    mean_abs_phi: f64,
    rank: usize,
    direction: Option<f64>,
}

fn malformed(what: &str, e: serde_json::Error) -> CliError {
    CliError::StageFailure(anyhow::anyhow!("malformed {what}: {e}"))
}

/// Gathers the finished stages of a run; needs compare and evaluate output
/// for at least one level.
pub fn summarize(st: &mut StageRun, cfg: &RunConfig) -> Result<Summary, CliError> {
    if !cfg.run_dir.is_dir() {
        return Err(CliError::IncompleteRun(format!("{} does not exist", cfg.run_dir.display())));
    }
    let mut levels = Vec::new();
    for &level in &cfg.levels {
        let name = level_name(level);
        let effects_rel = format!("compare/{name}/effects.json");
        let models_rel = format!("evaluate/{name}/summary.json");
        if !st.exists(&effects_rel) || !st.exists(&models_rel) {
            continue;
        }
        let effects: Vec<FeatureComparison> =
            serde_json::from_str(&st.read(&effects_rel)?).map_err(|e| malformed("effects", e))?;
        let models: Vec<ModelScore> =
            serde_json::from_str(&st.read(&models_rel)?).map_err(|e| malformed("evaluation summary", e))?;
        let prune: PruneReport =
            serde_json::from_str(&st.read(&format!("prune/{name}/prune.json"))?).map_err(|e| malformed("prune report", e))?;
        let mut notices = Vec::new();
        let imp_rel = format!("explain/{name}/importance.json");
        let importance = if st.exists(&imp_rel) {
            let map: BTreeMap<String, ImportanceEntry> =
                serde_json::from_str(&st.read(&imp_rel)?).map_err(|e| malformed("importance", e))?;
            let mut v: Vec<Importance> = map
                .into_iter()
                .map(|(feature, e)| Importance {
                    feature,
                    mean_abs_phi: e.mean_abs_phi,
                    rank: e.rank,
                    direction: e.direction,
                })
                .collect();
            v.sort_by_key(|i| i.rank);
            v.truncate(TOP_FEATURES);
            Some(v)
        } else {
            notices.push("explain stage has not run; importance omitted".to_string());
            None
        };
        levels.push(LevelSummary {
            level: name.to_string(),
            effects,
            kept: prune.kept,
            models,
            importance,
            notices,
        });
    }
    if levels.is_empty() {
        return Err(CliError::IncompleteRun(
            "no level has both compare and evaluate output".into(),
        ));
    }
    Ok(Summary { levels })
}

pub fn render_text(s: &Summary, cfg: &RunConfig) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "Detection run summary (seed {}, alpha {}, {}-fold CV)", cfg.seed, cfg.alpha, cfg.k);
    for l in &s.levels {
        let _ = writeln!(out, "\n== {} level ==\n", l.level);
        let sig = l.effects.iter().filter(|e| e.significant).count();
        let _ = writeln!(out, "Effect sizes, human vs LLM ({sig} of {} significant):", l.effects.len());
        out.push_str(&effects_table(&l.effects));
        let _ = writeln!(out, "\nKept features ({}):", l.kept.len());
        for k in &l.kept {
            let _ = writeln!(out, "  {k}");
        }
        let _ = writeln!(out, "\nClassifier performance:");
        let _ = writeln!(
            out,
            "  {:<18} {:>9} {:>7} {:>8} {:>6} {:>7}",
            "Model", "Precision", "Recall", "Accuracy", "F1", "AUC"
        );
        for m in &l.models {
            let _ = writeln!(
                out,
                "  {:<18} {:>9.3} {:>7.3} {:>8.3} {:>6.3} {:>7.3}",
                m.model, m.precision, m.recall, m.accuracy, m.f1, m.auc_roc
            );
        }
        match &l.importance {
            Some(imp) => {
                let _ = writeln!(out, "\nTop {} features by mean |phi| ({}):", imp.len(), cfg.explain_model);
                for i in imp {
                    let dir = i.direction.map_or("n/a".to_string(), |d| format!("{d:+.3}"));
                    let _ = writeln!(out, "  {}. {:<32} {:.4}  rho {dir}", i.rank, i.feature, i.mean_abs_phi);
                }
            }
            None => {}
        }
        for n in &l.notices {
            let _ = writeln!(out, "\nNote: {n}");
        }
    }
    out
}

pub fn report(cfg: &RunConfig) -> Result<(), CliError> {
    if !cfg.run_dir.is_dir() {
        return Err(CliError::IncompleteRun(format!("{} does not exist", cfg.run_dir.display())));
    }
    let mut st = StageRun::start(cfg, "report")?;
    let summary = summarize(&mut st, cfg)?;
    st.write("report/summary.txt", render_text(&summary, cfg))?;
    st.write(
        "report/summary.json",
        serde_json::to_string_pretty(&summary).expect("serializable") + "\n",
    )?;
    st.finish()?;
    Ok(())
}
