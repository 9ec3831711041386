//! One function per pipeline stage. Each reads earlier outputs from the run
//! directory and writes its own beneath `<run_dir>/<stage>/`.

use std::collections::{BTreeMap, BTreeSet};

use anyhow::anyhow;
use detect_core::corpus::{self, CodeSnippet, InheritanceGraph, Ingested, Label, Manifest};
use detect_core::explain::{background_sample, emit_violin_data, shapley_table};
use detect_core::llmgen::{self, Cache, GenerationRecord, GenerationRequest, HttpTransport, ReplayTransport, Status, Transport};
use detect_core::metrics::{metric_matrix, MetricMatrix};
use detect_core::models::{evaluate_cv, prune_features, train as fit, Hyperparameters, ModelKind, PruneReport, TrainedModel};
use detect_core::pyparse::EntityKind;
use detect_core::stats::{compare_features, effects_csv, effects_table, ComparisonConfig, FeatureComparison, Method};
use detect_core::table::FeatureTable;
use serde::{Deserialize, Serialize};

use crate::manifest::{sha256_hex, sha256_tree, StageRun};
use crate::{CliError, RunConfig};

pub fn level_name(level: EntityKind) -> &'static str {
    match level {
        EntityKind::Function => "function",
        EntityKind::Class => "class",
    }
}

fn json<T: Serialize>(v: &T) -> String {
    serde_json::to_string_pretty(v).expect("serializable") + "\n"
}

fn parse_json<T: for<'de> Deserialize<'de>>(text: &str, what: &str) -> Result<T, CliError> {
    serde_json::from_str(text).map_err(|e| CliError::StageFailure(anyhow!("malformed {what}: {e}")))
}

fn snippets(text: &str, what: &str) -> Result<Vec<CodeSnippet>, CliError> {
    corpus::read_jsonl(text).map_err(|e| CliError::StageFailure(anyhow!("malformed {what}: {e}")))
}

fn failed(e: impl std::fmt::Display) -> CliError {
    CliError::StageFailure(anyhow!("{e}"))
}

pub fn ingest(cfg: &RunConfig) -> Result<(), CliError> {
    let mut st = StageRun::start(cfg, "ingest")?;
    let root = cfg
        .corpus
        .clone()
        .ok_or_else(|| CliError::Usage("config has no corpus path".into()))?;
    if !root.exists() {
        return Err(CliError::MissingInput(root));
    }
    let mut files = corpus::read_sources(&root).map_err(failed)?;
    let mut digest = Vec::new();
    for f in &files {
        digest.extend_from_slice(f.origin.as_bytes());
        digest.push(0);
        digest.extend_from_slice(f.text.as_bytes());
        digest.push(0);
    }
    st.external_input("corpus", sha256_hex(&digest));
    if let Some(path) = &cfg.manifest {
        let text = std::fs::read_to_string(path).map_err(|_| CliError::MissingInput(path.clone()))?;
        st.external_input("manifest", sha256_hex(text.as_bytes()));
        let m = Manifest::parse(&text);
        files.retain(|f| m.allows(&f.origin));
    }
    let ingested = corpus::ingest_files(&files);
    if ingested.snippets.is_empty() {
        return Err(failed(corpus::CorpusError::EmptyCorpus(root)));
    }
    st.param("files", files.len());
    st.write("ingest/snippets.jsonl", corpus::write_jsonl(&ingested.snippets))?;
    st.write("ingest/graph.json", json(&ingested.graph))?;
    st.finish()?;
    Ok(())
}

pub fn extract_classes(cfg: &RunConfig) -> Result<(), CliError> {
    let mut st = StageRun::start(cfg, "extract-classes")?;
    let ingested = Ingested {
        snippets: snippets(&st.read("ingest/snippets.jsonl")?, "snippets")?,
        graph: parse_json::<InheritanceGraph>(&st.read("ingest/graph.json")?, "inheritance graph")?,
    };
    let names = corpus::standalone_classes(&ingested.graph);
    let classes = ingested.standalone_class_snippets();
    st.write("extract-classes/standalone.json", json(&names))?;
    st.write("extract-classes/classes.jsonl", corpus::write_jsonl(&classes))?;
    st.finish()?;
    Ok(())
}

#[derive(Debug, Serialize, Deserialize)]
struct FilterSummary {
    level: String,
    candidates: usize,
    after_ratio: usize,
    kept: usize,
}

pub fn filter(cfg: &RunConfig) -> Result<(), CliError> {
    let mut st = StageRun::start(cfg, "filter")?;
    st.param("ratio", cfg.ratio);
    st.param("sample", cfg.sample);
    st.param("seed", cfg.seed);
    let all = snippets(&st.read("ingest/snippets.jsonl")?, "snippets")?;
    let classes = snippets(&st.read("extract-classes/classes.jsonl")?, "classes")?;
    let mut kept = Vec::new();
    let mut summary = Vec::new();
    for &level in &cfg.levels {
        let (candidates, after_ratio) = match level {
            EntityKind::Function => {
                let f: Vec<CodeSnippet> = all
                    .iter()
                    .filter(|s| s.kind == EntityKind::Function && !s.docstring.is_empty())
                    .cloned()
                    .collect();
                (f.len(), f)
            }
            EntityKind::Class => (classes.len(), corpus::filter_by_ratio(&classes, cfg.ratio)),
        };
        let chosen = if cfg.sample > 0 {
            corpus::reservoir_sample(&after_ratio, cfg.sample, cfg.seed)
        } else {
            after_ratio.clone()
        };
        summary.push(FilterSummary {
            level: level_name(level).into(),
            candidates,
            after_ratio: after_ratio.len(),
            kept: chosen.len(),
        });
        kept.extend(chosen);
    }
    st.write("filter/human.jsonl", corpus::write_jsonl(&kept))?;
    st.write("filter/summary.json", json(&summary))?;
    st.finish()?;
    Ok(())
}

#[derive(Debug, Serialize, Deserialize)]
struct RecordLine {
    human_id: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    record: Option<GenerationRecord>,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
struct GenerateSummary {
    requested: usize,
    ok: usize,
    refused: usize,
    empty: usize,
    parse_failed: usize,
    failed: usize,
    pairs: usize,
}

pub fn generate(cfg: &RunConfig) -> Result<(), CliError> {
    let mut st = StageRun::start(cfg, "generate")?;
    st.param("generator", &cfg.generator);
    st.param("max_tokens", cfg.max_tokens);
    let humans = snippets(&st.read("filter/human.jsonl")?, "human snippets")?;
    let transport: Box<dyn Transport> = match &cfg.replay {
        Some(dir) => {
            if !dir.is_dir() {
                return Err(CliError::MissingInput(dir.clone()));
            }
            st.external_input("replay", sha256_tree(dir)?);
            Box::new(ReplayTransport::new(dir))
        }
        None => Box::new(HttpTransport::from_env().map_err(failed)?),
    };
    let requests: Vec<GenerationRequest> = humans
        .iter()
        .map(|h| {
            let mut r = GenerationRequest::for_snippet(h, &cfg.generator).map_err(failed)?;
            r.max_tokens = cfg.max_tokens;
            Ok(r)
        })
        .collect::<Result<_, CliError>>()?;
    let cache = Cache::new(cfg.cache_dir());
    let results = llmgen::batch_generate(&requests, transport.as_ref(), &cache, cfg.concurrency).map_err(failed)?;

    let mut summary = GenerateSummary {
        requested: requests.len(),
        ..Default::default()
    };
    let mut lines = String::new();
    let mut generated = Vec::new();
    for (h, res) in humans.iter().zip(results) {
        let line = match res {
            Ok(rec) => {
                match rec.status {
                    Status::Ok => summary.ok += 1,
                    Status::Refused => summary.refused += 1,
                    Status::Empty => summary.empty += 1,
                    Status::ParseFailed => summary.parse_failed += 1,
                }
                generated.extend(rec.to_snippet(h));
                RecordLine {
                    human_id: h.id.clone(),
                    record: Some(rec),
                    error: None,
                }
            }
            Err(e) => {
                summary.failed += 1;
                RecordLine {
                    human_id: h.id.clone(),
                    record: None,
                    error: Some(e.to_string()),
                }
            }
        };
        lines.push_str(&serde_json::to_string(&line).expect("serializable"));
        lines.push('\n');
    }
    let paired = corpus::pair(&humans, &generated).map_err(failed)?;
    summary.pairs = paired.len() / 2;
    st.write("generate/records.jsonl", lines)?;
    st.write("generate/generated.jsonl", corpus::write_jsonl(&generated))?;
    st.write("generate/paired.jsonl", corpus::write_jsonl(&paired))?;
    st.write("generate/summary.json", json(&summary))?;
    st.finish()?;
    Ok(())
}

pub fn metrics(cfg: &RunConfig) -> Result<(), CliError> {
    let mut st = StageRun::start(cfg, "metrics")?;
    let paired = snippets(&st.read("generate/paired.jsonl")?, "paired snippets")?;
    let (matrix, failures) = metric_matrix(&paired);
    let bad: BTreeSet<&str> = failures.iter().map(|f| f.id.as_str()).collect();
    let kinds: BTreeMap<&str, EntityKind> = paired.iter().map(|s| (s.id.as_str(), s.kind)).collect();
    // Pairs are adjacent; a failure on either side drops both.
    let dropped: BTreeSet<&str> = paired
        .chunks(2)
        .filter(|p| p.iter().any(|s| bad.contains(s.id.as_str())))
        .flat_map(|p| p.iter().map(|s| s.id.as_str()))
        .collect();
    for &level in &cfg.levels {
        let rows = matrix
            .rows
            .iter()
            .filter(|r| kinds.get(r.id.as_str()) == Some(&level) && !dropped.contains(r.id.as_str()))
            .cloned()
            .collect();
        let m = MetricMatrix { rows };
        let name = level_name(level);
        st.write(&format!("metrics/{name}.jsonl"), m.to_jsonl())?;
        st.write(&format!("metrics/{name}.csv"), m.to_csv())?;
    }
    st.write("metrics/failures.json", json(&failures))?;
    st.finish()?;
    Ok(())
}

/// Metric rows of one level, or `None` when it has no human/LLM pairs.
fn level_matrix(st: &mut StageRun, level: EntityKind) -> Result<Option<MetricMatrix>, CliError> {
    let text = st.read(&format!("metrics/{}.jsonl", level_name(level)))?;
    let m = MetricMatrix::from_jsonl(&text).map_err(|e| failed(format!("malformed metrics: {e}")))?;
    let has = |l: Label| m.rows.iter().any(|r| r.label == l);
    Ok((has(Label::Human) && has(Label::Llm)).then_some(m))
}

pub fn compare(cfg: &RunConfig) -> Result<(), CliError> {
    let mut st = StageRun::start(cfg, "compare")?;
    st.param("alpha", cfg.alpha);
    let config = ComparisonConfig {
        alpha: cfg.alpha,
        method: Method::Auto,
    };
    for &level in &cfg.levels {
        let Some(m) = level_matrix(&mut st, level)? else {
            log::warn!("no {} pairs to compare", level_name(level));
            continue;
        };
        let rows = compare_features(&m.table(Some(Label::Human)), &m.table(Some(Label::Llm)), &config).map_err(failed)?;
        let name = level_name(level);
        st.write(&format!("compare/{name}/effects.json"), json(&rows))?;
        st.write(&format!("compare/{name}/effects.csv"), effects_csv(&rows))?;
        st.write(&format!("compare/{name}/effects.txt"), effects_table(&rows))?;
    }
    st.finish()?;
    Ok(())
}

pub fn prune(cfg: &RunConfig) -> Result<(), CliError> {
    let mut st = StageRun::start(cfg, "prune")?;
    for &level in &cfg.levels {
        let name = level_name(level);
        let Some(m) = level_matrix(&mut st, level)? else { continue };
        let cmp: Vec<FeatureComparison> = parse_json(&st.read(&format!("compare/{name}/effects.json"))?, "effects")?;
        let report = prune_features(&m.table(None), &cmp).map_err(failed)?;
        st.write(&format!("prune/{name}/prune.json"), json(&report))?;
    }
    st.finish()?;
    Ok(())
}

/// Labelled training table restricted to the kept features, or `None` when
/// the level has no data or nothing survived pruning.
fn training_data(st: &mut StageRun, level: EntityKind) -> Result<Option<(FeatureTable, Vec<bool>, Vec<String>)>, CliError> {
    let name = level_name(level);
    let Some(m) = level_matrix(st, level)? else { return Ok(None) };
    let report: PruneReport = parse_json(&st.read(&format!("prune/{name}/prune.json"))?, "prune report")?;
    if report.kept.is_empty() {
        log::warn!("no {name} features survived pruning");
        return Ok(None);
    }
    let table = m.table(None).select(&report.kept).map_err(failed)?;
    let ids = m.rows.iter().map(|r| r.id.clone()).collect();
    Ok(Some((table, m.labels(), ids)))
}

pub fn train(cfg: &RunConfig) -> Result<(), CliError> {
    let mut st = StageRun::start(cfg, "train")?;
    st.param("seed", cfg.seed);
    st.param("models", cfg.models.join(","));
    let kinds = cfg.model_kinds()?;
    for &level in &cfg.levels {
        let Some((table, labels, _)) = training_data(&mut st, level)? else { continue };
        for &kind in &kinds {
            let model = fit(kind, &table, &labels, &Hyperparameters::new(), cfg.seed).map_err(failed)?;
            st.write(&format!("train/{}/{kind}.json", level_name(level)), model.to_json() + "\n")?;
        }
    }
    st.finish()?;
    Ok(())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelScore {
    pub model: String,
    pub precision: f64,
    pub recall: f64,
    pub accuracy: f64,
    pub f1: f64,
    pub auc_roc: f64,
}

pub fn evaluate(cfg: &RunConfig) -> Result<(), CliError> {
    let mut st = StageRun::start(cfg, "evaluate")?;
    st.param("seed", cfg.seed);
    st.param("k", cfg.k);
    st.param("models", cfg.models.join(","));
    let kinds = cfg.model_kinds()?;
    for &level in &cfg.levels {
        let name = level_name(level);
        let Some((table, labels, _)) = training_data(&mut st, level)? else { continue };
        let mut scores = Vec::new();
        for &kind in &kinds {
            let r = evaluate_cv(kind, &table, &labels, &Hyperparameters::new(), cfg.k, cfg.seed).map_err(failed)?;
            st.write(&format!("evaluate/{name}/{kind}.json"), r.to_json() + "\n")?;
            st.write(&format!("evaluate/{name}/{kind}.folds.csv"), r.folds_csv())?;
            let a = r.aggregate;
            scores.push(ModelScore {
                model: kind.to_string(),
                precision: a.precision,
                recall: a.recall,
                accuracy: a.accuracy,
                f1: a.f1,
                auc_roc: a.auc_roc,
            });
        }
        st.write(&format!("evaluate/{name}/summary.json"), json(&scores))?;
    }
    st.finish()?;
    Ok(())
}

pub fn explain(cfg: &RunConfig) -> Result<(), CliError> {
    let mut st = StageRun::start(cfg, "explain")?;
    let kind: ModelKind = cfg.explain_kind()?;
    st.param("model", kind);
    st.param("seed", cfg.seed);
    st.param("instances", cfg.explain_instances);
    st.param("background", cfg.background);
    st.param("permutations", cfg.permutations);
    for &level in &cfg.levels {
        let name = level_name(level);
        let Some((table, _, ids)) = training_data(&mut st, level)? else { continue };
        let model = TrainedModel::from_json(&st.read(&format!("train/{name}/{kind}.json"))?).map_err(failed)?;
        let background = background_sample(&table, cfg.background, cfg.seed);
        let picked = corpus::reservoir_sample(&(0..table.len()).collect::<Vec<_>>(), cfg.explain_instances, cfg.seed.wrapping_add(1));
        let instances = table.subset_rows(&picked);
        let picked_ids: Vec<String> = picked.iter().map(|&i| ids[i].clone()).collect();
        let sets = shapley_table(&model, &instances, &picked_ids, &background, cfg.permutations, cfg.seed).map_err(failed)?;
        let lines: String = sets
            .iter()
            .map(|s| serde_json::to_string(s).expect("serializable") + "\n")
            .collect();
        st.write(&format!("explain/{name}/attributions.jsonl"), lines)?;
        emit_violin_data(&sets, &st.path(&format!("explain/{name}"))).map_err(failed)?;
        for f in ["violin.csv", "importance.svg", "importance.json"] {
            st.written(&format!("explain/{name}/{f}"))?;
        }
    }
    st.finish()?;
    Ok(())
}
