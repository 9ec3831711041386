//! Run configuration: TOML file, then command-line overrides.

use std::path::{Path, PathBuf};

use detect_core::models::ModelKind;
use detect_core::pyparse::EntityKind;
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Every stage writes beneath this directory.
    pub run_dir: PathBuf,
    /// Directory, tar archive or single file of Python sources.
    pub corpus: Option<PathBuf>,
    /// Optional list of corpus-relative paths to restrict ingestion to.
    pub manifest: Option<PathBuf>,
    /// Recorded responses; when unset the live endpoint is used.
    pub replay: Option<PathBuf>,
    /// Response cache; defaults to `<run_dir>/cache`.
    pub cache: Option<PathBuf>,
    pub seed: u64,
    pub alpha: f64,
    /// Minimum comment-to-code ratio for classes.
    pub ratio: f64,
    pub k: usize,
    pub models: Vec<String>,
    /// Cap on human snippets per level; 0 keeps all.
    pub sample: usize,
    pub levels: Vec<EntityKind>,
    pub generator: String,
    pub max_tokens: u32,
    pub concurrency: usize,
    pub explain_model: String,
    pub explain_instances: usize,
    pub background: usize,
    pub permutations: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            run_dir: PathBuf::from("run"),
            corpus: None,
            manifest: None,
            replay: None,
            cache: None,
            seed: 42,
            alpha: 0.01,
            ratio: detect_core::corpus::DEFAULT_RATIO_THRESHOLD,
            k: 10,
            models: ModelKind::ALL.iter().map(|m| m.as_str().to_string()).collect(),
            sample: 0,
            levels: vec![EntityKind::Function, EntityKind::Class],
            generator: "claude-3-haiku-20240307".into(),
            max_tokens: detect_core::llmgen::DEFAULT_MAX_TOKENS,
            concurrency: 4,
            explain_model: ModelKind::GradientBoosting.as_str().into(),
            explain_instances: 50,
            background: 100,
            permutations: 2000,
        }
    }
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub run_dir: Option<PathBuf>,
    pub seed: Option<u64>,
    pub alpha: Option<f64>,
    pub ratio: Option<f64>,
    pub k: Option<usize>,
    pub models: Option<Vec<String>>,
    pub sample: Option<usize>,
}

fn resolve(base: &Path, p: &mut PathBuf) {
    if p.is_relative() {
        *p = base.join(&*p);
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Usage(format!("invalid config: {e}")))
    }

    /// Reads `path`, resolving relative paths against its directory.
    pub fn load(path: &Path, overrides: &Overrides) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg = Self::parse(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        resolve(base, &mut cfg.run_dir);
        for p in [&mut cfg.corpus, &mut cfg.manifest, &mut cfg.replay, &mut cfg.cache]
            .into_iter()
            .flatten()
        {
            resolve(base, p);
        }
        cfg.apply(overrides);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(v) = &o.run_dir {
            self.run_dir = v.clone();
        }
        if let Some(v) = o.seed {
            self.seed = v;
        }
        if let Some(v) = o.alpha {
            self.alpha = v;
        }
        if let Some(v) = o.ratio {
            self.ratio = v;
        }
        if let Some(v) = o.k {
            self.k = v;
        }
        if let Some(v) = &o.models {
            self.models = v.clone();
        }
        if let Some(v) = o.sample {
            self.sample = v;
        }
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::Usage(m));
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return bad(format!("alpha must lie in (0, 1), got {}", self.alpha));
        }
        if self.k < 2 {
            return bad(format!("k must be at least 2, got {}", self.k));
        }
        if self.concurrency == 0 {
            return bad("concurrency must be at least 1".into());
        }
        if self.permutations == 0 || self.background == 0 {
            return bad("permutations and background must be positive".into());
        }
        self.model_kinds()?;
        self.explain_kind()?;
        Ok(())
    }

    pub fn model_kinds(&self) -> Result<Vec<ModelKind>, CliError> {
        if self.models.is_empty() {
            return Err(CliError::Usage("no models configured".into()));
        }
        self.models
            .iter()
            .map(|m| m.parse().map_err(|e| CliError::Usage(format!("{e}"))))
            .collect()
    }

    pub fn explain_kind(&self) -> Result<ModelKind, CliError> {
        self.explain_model
            .parse()
            .map_err(|e| CliError::Usage(format!("explain_model: {e}")))
    }

    pub fn cache_dir(&self) -> PathBuf {
        self.cache.clone().unwrap_or_else(|| self.run_dir.join("cache"))
    }
}
