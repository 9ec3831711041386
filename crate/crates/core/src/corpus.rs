//! Snippet corpus: ingestion, standalone-class extraction, ratio filtering,
//! human/generated pairing and sampling.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::metrics;
use crate::pyparse::{self, EntityKind, LineSpan};

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("cannot read {path}: {source}")]
    IoFailure {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("no snippets found under {0}")]
    EmptyCorpus(PathBuf),
    #[error("no human snippet has a matching generation")]
    NoPairs,
    #[error("malformed dataset line {line}: {message}")]
    Malformed { line: usize, message: String },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CorpusError + '_ {
    move |source| CorpusError::IoFailure {
        path: path.to_path_buf(),
        source,
    }
}

/// Binary class of a snippet; `Llm` is the positive class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Human,
    Llm,
}

impl Label {
    pub fn as_str(self) -> &'static str {
        match self {
            Label::Human => "human",
            Label::Llm => "llm",
        }
    }
}

/// Who wrote a snippet. Serialized as `human` or `llm:<model>`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum Author {
    Human,
    Llm(String),
}

impl Author {
    pub fn label(&self) -> Label {
        match self {
            Author::Human => Label::Human,
            Author::Llm(_) => Label::Llm,
        }
    }
}

impl fmt::Display for Author {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Author::Human => f.write_str("human"),
            Author::Llm(model) => write!(f, "llm:{model}"),
        }
    }
}

impl From<Author> for String {
    fn from(a: Author) -> String {
        a.to_string()
    }
}

impl TryFrom<String> for Author {
    type Error = String;

    fn try_from(s: String) -> Result<Self, String> {
        if s == "human" {
            Ok(Author::Human)
        } else if let Some(model) = s.strip_prefix("llm:").filter(|m| !m.is_empty()) {
            Ok(Author::Llm(model.to_string()))
        } else {
            Err(format!("unknown author {s:?}"))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CodeSnippet {
    pub id: String,
    /// Repository-relative file path.
    pub origin: String,
    pub kind: EntityKind,
    pub author: Author,
    pub docstring: String,
    pub source: String,
    pub span: LineSpan,
    /// Id of the human snippet a generation was prompted from.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parent: Option<String>,
    /// Generation time, seconds since the epoch.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generated_at: Option<u64>,
}

/// Sixteen hex digits of SHA-256 over origin, span and author.
pub fn snippet_id(origin: &str, span: LineSpan, author: &Author) -> String {
    let mut h = Sha256::new();
    h.update(origin.as_bytes());
    h.update([0]);
    h.update(format!("{}:{}", span.start, span.end).as_bytes());
    h.update([0]);
    h.update(author.to_string().as_bytes());
    hex::encode(h.finalize())[..16].to_string()
}

impl CodeSnippet {
    pub fn new(
        origin: &str,
        kind: EntityKind,
        author: Author,
        docstring: &str,
        source: &str,
        span: LineSpan,
    ) -> Self {
        CodeSnippet {
            id: snippet_id(origin, span, &author),
            origin: origin.to_string(),
            kind,
            author,
            docstring: docstring.to_string(),
            source: source.to_string(),
            span,
            parent: None,
            generated_at: None,
        }
    }

    /// A generated counterpart of `self`, keyed to it by `parent`.
    pub fn generated(&self, model: &str, source: &str, generated_at: u64) -> Self {
        let author = Author::Llm(model.to_string());
        CodeSnippet {
            id: snippet_id(&self.origin, self.span, &author),
            origin: self.origin.clone(),
            kind: self.kind,
            author,
            docstring: self.docstring.clone(),
            source: source.to_string(),
            span: self.span,
            parent: Some(self.id.clone()),
            generated_at: Some(generated_at),
        }
    }

    pub fn label(&self) -> Label {
        self.author.label()
    }
}

pub fn write_jsonl(snippets: &[CodeSnippet]) -> String {
    let mut out = String::new();
    for s in snippets {
        out.push_str(&serde_json::to_string(s).expect("snippets serialize"));
        out.push('\n');
    }
    out
}

pub fn read_jsonl(text: &str) -> Result<Vec<CodeSnippet>, CorpusError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| CorpusError::Malformed {
                line: i + 1,
                message: e.to_string(),
            })
        })
        .collect()
}

/// Restricts ingestion to listed relative paths.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Manifest {
    pub include: BTreeSet<String>,
}

impl Manifest {
    /// One path per line; `#` starts a comment.
    pub fn parse(text: &str) -> Manifest {
        let include = text
            .lines()
            .map(|l| l.split('#').next().unwrap_or("").trim())
            .filter(|l| !l.is_empty())
            .map(String::from)
            .collect();
        Manifest { include }
    }

    pub fn allows(&self, origin: &str) -> bool {
        self.include.contains(origin)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ClassNode {
    pub name: String,
    pub origin: String,
    pub line: usize,
}

/// Textual subclass → base edges over every class in a corpus.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct InheritanceGraph {
    /// Defined classes, in (origin, line) order.
    pub nodes: Vec<ClassNode>,
    /// Base names no class in the corpus defines.
    pub external: BTreeSet<String>,
    pub edges: BTreeSet<(String, String)>,
}

/// `pkg.mod.Base[T]` → `Base`.
fn base_name(expr: &str) -> String {
    let head = expr.split(['[', '(']).next().unwrap_or(expr).trim();
    head.rsplit('.').next().unwrap_or(head).trim().to_string()
}

impl InheritanceGraph {
    pub fn add_class(&mut self, name: &str, origin: &str, line: usize, bases: &[String]) {
        self.nodes.push(ClassNode {
            name: name.to_string(),
            origin: origin.to_string(),
            line,
        });
        for b in bases {
            let b = base_name(b);
            if !b.is_empty() && b != "object" {
                self.edges.insert((name.to_string(), b));
            }
        }
    }

    /// Recomputes external nodes and restores node order.
    pub fn finish(&mut self) {
        self.nodes.sort();
        let defined: BTreeSet<&str> = self.nodes.iter().map(|n| n.name.as_str()).collect();
        self.external = self
            .edges
            .iter()
            .map(|(_, b)| b)
            .filter(|b| !defined.contains(b.as_str()))
            .cloned()
            .collect();
    }

    pub fn from_sources<'a>(files: impl IntoIterator<Item = (&'a str, &'a str)>) -> Self {
        let mut g = InheritanceGraph::default();
        for (origin, source) in files {
            if let Ok(parsed) = pyparse::parse(source) {
                for e in parsed.all_entities() {
                    if e.kind == EntityKind::Class {
                        g.add_class(&e.name, origin, e.span.start, &e.bases);
                    }
                }
            }
        }
        g.finish();
        g
    }
}

/// Defined classes with no base (besides `object`) and no subclass.
pub fn standalone_classes(graph: &InheritanceGraph) -> Vec<String> {
    let mut touched = BTreeSet::new();
    for (sub, base) in &graph.edges {
        touched.insert(sub.as_str());
        touched.insert(base.as_str());
    }
    graph
        .nodes
        .iter()
        .map(|n| n.name.as_str())
        .filter(|n| !touched.contains(n))
        .collect::<BTreeSet<_>>()
        .into_iter()
        .map(String::from)
        .collect()
}

/// Snippets whose comment-to-code ratio reaches `threshold`, in input order.
/// Snippets that fail to parse are dropped.
pub fn filter_by_ratio(snippets: &[CodeSnippet], threshold: f64) -> Vec<CodeSnippet> {
    snippets
        .iter()
        .filter(|s| match metrics::comment_to_code_ratio(s) {
            Ok(r) => r >= threshold,
            Err(e) => {
                log::warn!("dropping {}: {e}", s.id);
                false
            }
        })
        .cloned()
        .collect()
}

pub const DEFAULT_RATIO_THRESHOLD: f64 = 0.4;

/// Balanced dataset: each human snippet with a generation, followed by that
/// generation. Humans without one are dropped; among several generations for
/// the same parent the latest wins.
pub fn pair(human: &[CodeSnippet], generated: &[CodeSnippet]) -> Result<Vec<CodeSnippet>, CorpusError> {
    let mut latest: BTreeMap<&str, &CodeSnippet> = BTreeMap::new();
    for g in generated {
        let Some(parent) = g.parent.as_deref() else {
            log::warn!("generation {} has no parent; ignored", g.id);
            continue;
        };
        match latest.get(parent) {
            Some(prev) => {
                log::info!("duplicate generation for {parent}; keeping the latest");
                if g.generated_at.unwrap_or(0) >= prev.generated_at.unwrap_or(0) {
                    latest.insert(parent, g);
                }
            }
            None => {
                latest.insert(parent, g);
            }
        }
    }
    let mut out = Vec::new();
    let mut seen = BTreeSet::new();
    for h in human {
        if !seen.insert(h.id.as_str()) {
            continue;
        }
        if let Some(g) = latest.get(h.id.as_str()) {
            out.push(h.clone());
            out.push((*g).clone());
        }
    }
    if out.is_empty() {
        return Err(CorpusError::NoPairs);
    }
    Ok(out)
}

/// Uniform sample of `n` items (all of them when `n >= len`), in input order.
pub fn reservoir_sample<T: Clone>(items: &[T], n: usize, seed: u64) -> Vec<T> {
    if n >= items.len() {
        return items.to_vec();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut reservoir: Vec<usize> = (0..n).collect();
    for i in n..items.len() {
        let j = rng.random_range(0..=i);
        if j < n {
            reservoir[j] = i;
        }
    }
    reservoir.sort_unstable();
    reservoir.into_iter().map(|i| items[i].clone()).collect()
}

/// A readable source file with its corpus-relative origin.
#[derive(Debug, Clone)]
pub struct SourceFile {
    pub origin: String,
    pub text: String,
}

/// Top-level defs with a docstring and every top-level class, plus the
/// inheritance graph of all classes seen.
#[derive(Debug, Clone, Default)]
pub struct Ingested {
    pub snippets: Vec<CodeSnippet>,
    pub graph: InheritanceGraph,
}

impl Ingested {
    pub fn functions(&self) -> Vec<CodeSnippet> {
        self.of_kind(EntityKind::Function)
    }

    pub fn classes(&self) -> Vec<CodeSnippet> {
        self.of_kind(EntityKind::Class)
    }

    fn of_kind(&self, kind: EntityKind) -> Vec<CodeSnippet> {
        self.snippets.iter().filter(|s| s.kind == kind).cloned().collect()
    }

    /// Top-level classes that are standalone and documented.
    pub fn standalone_class_snippets(&self) -> Vec<CodeSnippet> {
        let keep: BTreeSet<String> = standalone_classes(&self.graph).into_iter().collect();
        self.snippets
            .iter()
            .filter(|s| s.kind == EntityKind::Class && !s.docstring.is_empty())
            .filter(|s| class_name(&s.source).is_some_and(|n| keep.contains(&n)))
            .cloned()
            .collect()
    }
}

fn class_name(source: &str) -> Option<String> {
    pyparse::extract_entities(source)
        .ok()?
        .into_iter()
        .find(|e| e.kind == EntityKind::Class)
        .map(|e| e.name)
}

fn is_archive(path: &Path) -> bool {
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("");
    name.ends_with(".tar") || name.ends_with(".tar.gz") || name.ends_with(".tgz")
}

fn decode(origin: String, bytes: Vec<u8>) -> Option<SourceFile> {
    match String::from_utf8(bytes) {
        Ok(text) => Some(SourceFile { origin, text }),
        Err(e) => {
            log::warn!("skipping {origin}: not UTF-8 ({})", e.utf8_error());
            None
        }
    }
}

fn read_archive(path: &Path) -> Result<Vec<SourceFile>, CorpusError> {
    let file = fs::File::open(path).map_err(io_err(path))?;
    let name = path.to_string_lossy();
    let reader: Box<dyn Read> = if name.ends_with(".tar") {
        Box::new(file)
    } else {
        Box::new(flate2::read::GzDecoder::new(file))
    };
    let mut archive = tar::Archive::new(reader);
    let mut out = Vec::new();
    for entry in archive.entries().map_err(io_err(path))? {
        let mut entry = entry.map_err(io_err(path))?;
        if !entry.header().entry_type().is_file() {
            continue;
        }
        let origin = entry.path().map_err(io_err(path))?.to_string_lossy().replace('\\', "/");
        let origin = origin.trim_start_matches("./").to_string();
        if !origin.ends_with(".py") {
            continue;
        }
        let mut bytes = Vec::new();
        entry.read_to_end(&mut bytes).map_err(io_err(path))?;
        out.extend(decode(origin, bytes));
    }
    Ok(out)
}

/// Python files under a directory, a single `.py` file, or a tar archive.
pub fn read_sources(path: &Path) -> Result<Vec<SourceFile>, CorpusError> {
    let meta = fs::metadata(path).map_err(io_err(path))?;
    let mut files = if meta.is_dir() {
        let mut out = Vec::new();
        for entry in walkdir::WalkDir::new(path).sort_by_file_name() {
            let entry = entry.map_err(|e| {
                let p = e.path().unwrap_or(path).to_path_buf();
                CorpusError::IoFailure {
                    path: p,
                    source: e.into(),
                }
            })?;
            let p = entry.path();
            if !entry.file_type().is_file() || p.extension().is_none_or(|x| x != "py") {
                continue;
            }
            let rel = p.strip_prefix(path).unwrap_or(p);
            let origin = rel
                .components()
                .map(|c| c.as_os_str().to_string_lossy())
                .collect::<Vec<_>>()
                .join("/");
            let bytes = fs::read(p).map_err(io_err(p))?;
            out.extend(decode(origin, bytes));
        }
        out
    } else if is_archive(path) {
        read_archive(path)?
    } else {
        let origin = path
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default();
        let bytes = fs::read(path).map_err(io_err(path))?;
        decode(origin, bytes).into_iter().collect()
    };
    files.sort_by(|a, b| a.origin.cmp(&b.origin));
    Ok(files)
}

fn span_text(lines: &[&str], span: LineSpan) -> String {
    let mut s = lines[span.start - 1..span.end].join("\n");
    s.push('\n');
    s
}

/// Snippets of one file, or `None` if it does not parse.
fn file_snippets(file: &SourceFile) -> Option<(Vec<CodeSnippet>, Vec<(String, usize, Vec<String>)>)> {
    let text = pyparse::normalize_newlines(&file.text);
    let parsed = match pyparse::parse(&text) {
        Ok(p) => p,
        Err(e) => {
            log::warn!("skipping {}: {e}", file.origin);
            return None;
        }
    };
    let lines: Vec<&str> = text.split('\n').collect();
    let mut snippets = Vec::new();
    for e in &parsed.entities {
        let doc = e.docstring.clone().unwrap_or_default();
        let keep = match e.kind {
            EntityKind::Function => !doc.is_empty(),
            EntityKind::Class => true,
        };
        if keep {
            snippets.push(CodeSnippet::new(
                &file.origin,
                e.kind,
                Author::Human,
                &doc,
                &span_text(&lines, e.span),
                e.span,
            ));
        }
    }
    let classes = parsed
        .all_entities()
        .into_iter()
        .filter(|e| e.kind == EntityKind::Class)
        .map(|e| (e.name.clone(), e.span.start, e.bases.clone()))
        .collect();
    Some((snippets, classes))
}

pub fn ingest_files(files: &[SourceFile]) -> Ingested {
    let per_file: Vec<_> = files.par_iter().map(file_snippets).collect();
    let mut out = Ingested::default();
    for (file, result) in files.iter().zip(per_file) {
        let Some((snippets, classes)) = result else {
            continue;
        };
        out.snippets.extend(snippets);
        for (name, line, bases) in classes {
            out.graph.add_class(&name, &file.origin, line, &bases);
        }
    }
    out.graph.finish();
    out.snippets
        .sort_by(|a, b| (&a.origin, a.span.start).cmp(&(&b.origin, b.span.start)));
    out
}

pub fn ingest(path: &Path, manifest: Option<&Manifest>) -> Result<Ingested, CorpusError> {
    let mut files = read_sources(path)?;
    if let Some(m) = manifest {
        files.retain(|f| m.allows(&f.origin));
    }
    let out = ingest_files(&files);
    if out.snippets.is_empty() {
        return Err(CorpusError::EmptyCorpus(path.to_path_buf()));
    }
    Ok(out)
}
