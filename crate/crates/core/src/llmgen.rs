//! Regenerating code from docstrings through a chat-completion endpoint.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::thread;
use std::time::{Duration, SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::corpus::CodeSnippet;
use crate::pyparse::{self, EntityKind};

pub const DEFAULT_MAX_TOKENS: u32 = 1024;
pub const ENDPOINT_VAR: &str = "DETECT_LLM_ENDPOINT";
pub const API_KEY_VAR: &str = "DETECT_LLM_API_KEY";
pub const RETRIES: u32 = 3;

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum LlmError {
    #[error("docstring is empty")]
    EmptyDocstring,
    #[error("concurrency limit must be at least 1")]
    InvalidLimit,
    #[error("environment variable {0} is not set")]
    MissingConfig(&'static str),
    #[error("request failed after {attempts} attempts: {message}")]
    TransportFailure { attempts: u32, message: String },
    #[error("corrupt cache entry {path}: {message}")]
    CacheCorruption { path: PathBuf, message: String },
    #[error("cannot access {path}: {message}")]
    IoFailure { path: PathBuf, message: String },
}

fn io_failure(path: &Path, e: std::io::Error) -> LlmError {
    LlmError::IoFailure {
        path: path.to_path_buf(),
        message: e.to_string(),
    }
}

pub fn build_prompt(kind: EntityKind, docstring: &str) -> Result<String, LlmError> {
    if docstring.trim().is_empty() {
        return Err(LlmError::EmptyDocstring);
    }
    let word = match kind {
        EntityKind::Function => "FUNCTION",
        EntityKind::Class => "CLASS",
    };
    Ok(format!(
        "Assume that you're an expert Python programmer. Please generate a Python {word} from the given docstring. Do not explain the code.\n\n{docstring}"
    ))
}

/// Hex sha256 of `model`, a NUL byte, then `prompt`.
pub fn request_hash(model: &str, prompt: &str) -> String {
    let mut h = Sha256::new();
    h.update(model.as_bytes());
    h.update([0u8]);
    h.update(prompt.as_bytes());
    hex::encode(h.finalize())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenerationRequest {
    pub kind: EntityKind,
    pub docstring: String,
    pub model: String,
    pub max_tokens: u32,
    pub prompt: String,
}

impl GenerationRequest {
    pub fn new(kind: EntityKind, docstring: &str, model: &str) -> Result<Self, LlmError> {
        Ok(GenerationRequest {
            kind,
            docstring: docstring.to_string(),
            model: model.to_string(),
            max_tokens: DEFAULT_MAX_TOKENS,
            prompt: build_prompt(kind, docstring)?,
        })
    }

    pub fn for_snippet(snippet: &CodeSnippet, model: &str) -> Result<Self, LlmError> {
        Self::new(snippet.kind, &snippet.docstring, model)
    }

    pub fn hash(&self) -> String {
        request_hash(&self.model, &self.prompt)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    Ok,
    Refused,
    Empty,
    ParseFailed,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenerationRecord {
    pub request_hash: String,
    pub model: String,
    pub kind: EntityKind,
    pub raw: String,
    pub code: Option<String>,
    pub status: Status,
    /// Seconds since the epoch at which the response arrived.
    pub timestamp: u64,
}

impl GenerationRecord {
    /// Classifies a raw response.
    pub fn from_response(request: &GenerationRequest, raw: &str, timestamp: u64) -> Self {
        let (code, status) = classify(request.kind, raw);
        GenerationRecord {
            request_hash: request.hash(),
            model: request.model.clone(),
            kind: request.kind,
            raw: raw.to_string(),
            code,
            status,
            timestamp,
        }
    }

    /// The generated counterpart of `parent`, when the record holds code.
    pub fn to_snippet(&self, parent: &CodeSnippet) -> Option<CodeSnippet> {
        let code = self.code.as_ref().filter(|_| self.status == Status::Ok)?;
        let mut source = code.clone();
        if !source.ends_with('\n') {
            source.push('\n');
        }
        Some(parent.generated(&self.model, &source, self.timestamp))
    }
}

fn is_fence(line: &str) -> bool {
    line.trim_start().starts_with("```")
}

/// Contents of the first fenced block, or `text` unchanged if it has none.
pub fn strip_fences(text: &str) -> String {
    let lines: Vec<&str> = text.lines().collect();
    let Some(open) = lines.iter().position(|l| is_fence(l)) else {
        return text.to_string();
    };
    let body = &lines[open + 1..];
    let close = body.iter().position(|l| is_fence(l)).unwrap_or(body.len());
    body[..close].join("\n")
}

const REFUSALS: [&str; 9] = [
    "i cannot",
    "i can't",
    "i can not",
    "i'm sorry",
    "i am sorry",
    "i apologize",
    "i'm unable",
    "i am unable",
    "as an ai",
];

pub fn is_refusal(text: &str) -> bool {
    let head = text.trim_start().to_lowercase();
    REFUSALS.iter().any(|r| head.starts_with(r))
}

/// Status order: empty response, refusal, empty code, then parse check.
fn classify(kind: EntityKind, raw: &str) -> (Option<String>, Status) {
    if raw.trim().is_empty() {
        return (None, Status::Empty);
    }
    if !raw.lines().any(is_fence) && is_refusal(raw) {
        return (None, Status::Refused);
    }
    let code = strip_fences(raw);
    if code.trim().is_empty() {
        return (None, Status::Empty);
    }
    let parsed = match pyparse::parse(&code) {
        Ok(p) => p,
        Err(_) => return (Some(code), Status::ParseFailed),
    };
    if parsed.entities.iter().any(|e| e.kind == kind) {
        (Some(code), Status::Ok)
    } else {
        (Some(code), Status::ParseFailed)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Completion {
    pub text: String,
    pub timestamp: u64,
}

/// Something that answers a prompt.
pub trait Transport: Sync {
    fn complete(&self, request: &GenerationRequest) -> Result<Completion, LlmError>;
}

fn now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

/// Live JSON chat-completion endpoint.
pub struct HttpTransport {
    pub endpoint: String,
    pub api_key: String,
    pub retries: u32,
    pub base_delay: Duration,
    agent: ureq::Agent,
}

impl HttpTransport {
    pub fn new(endpoint: &str, api_key: &str) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(300)))
            .http_status_as_error(false)
            .build()
            .into();
        HttpTransport {
            endpoint: endpoint.to_string(),
            api_key: api_key.to_string(),
            retries: RETRIES,
            base_delay: Duration::from_secs(1),
            agent,
        }
    }

    pub fn from_env() -> Result<Self, LlmError> {
        let endpoint = std::env::var(ENDPOINT_VAR).map_err(|_| LlmError::MissingConfig(ENDPOINT_VAR))?;
        let key = std::env::var(API_KEY_VAR).map_err(|_| LlmError::MissingConfig(API_KEY_VAR))?;
        Ok(Self::new(&endpoint, &key))
    }

    /// `Ok(None)` means worth retrying.
    fn attempt(&self, body: &Value) -> Result<Option<String>, String> {
        let mut resp = match self
            .agent
            .post(&self.endpoint)
            .header("Authorization", &format!("Bearer {}", self.api_key))
            .header("x-api-key", &self.api_key)
            .send_json(body)
        {
            Ok(r) => r,
            Err(e) => {
                log::warn!("request error: {e}");
                return Ok(None);
            }
        };
        let status = resp.status().as_u16();
        if status == 429 || status >= 500 {
            log::warn!("endpoint returned {status}");
            return Ok(None);
        }
        let text = resp.body_mut().read_to_string().map_err(|e| e.to_string())?;
        if status >= 400 {
            return Err(format!("endpoint returned {status}: {text}"));
        }
        let v: Value = serde_json::from_str(&text).map_err(|e| format!("malformed response: {e}"))?;
        response_text(&v)
            .map(Some)
            .ok_or_else(|| "response has no text content".to_string())
    }
}

/// The reply text from the common chat-completion response shapes.
pub fn response_text(v: &Value) -> Option<String> {
    if let Some(s) = v.pointer("/choices/0/message/content").and_then(Value::as_str) {
        return Some(s.to_string());
    }
    if let Some(parts) = v.get("content").and_then(Value::as_array) {
        let text: String = parts
            .iter()
            .filter_map(|p| p.get("text").and_then(Value::as_str))
            .collect();
        return Some(text);
    }
    ["text", "completion", "content"]
        .iter()
        .find_map(|k| v.get(*k).and_then(Value::as_str))
        .map(str::to_string)
}

impl Transport for HttpTransport {
    fn complete(&self, request: &GenerationRequest) -> Result<Completion, LlmError> {
        let body = json!({
            "model": request.model,
            "messages": [{"role": "user", "content": request.prompt}],
            "max_tokens": request.max_tokens,
        });
        let attempts = self.retries + 1;
        for i in 0..attempts {
            if i > 0 {
                thread::sleep(self.base_delay * 2u32.pow(i - 1));
            }
            match self.attempt(&body) {
                Ok(Some(text)) => return Ok(Completion { text, timestamp: now() }),
                Ok(None) => continue,
                Err(message) => return Err(LlmError::TransportFailure { attempts: i + 1, message }),
            }
        }
        Err(LlmError::TransportFailure {
            attempts,
            message: "retries exhausted".into(),
        })
    }
}

fn read_record(path: &Path, hash: &str) -> Result<Option<GenerationRecord>, LlmError> {
    let text = match fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
        Err(e) => return Err(io_failure(path, e)),
    };
    let corrupt = |message: String| LlmError::CacheCorruption {
        path: path.to_path_buf(),
        message,
    };
    let record: GenerationRecord = serde_json::from_str(&text).map_err(|e| corrupt(e.to_string()))?;
    if record.request_hash != hash {
        return Err(corrupt(format!("holds hash {}", record.request_hash)));
    }
    Ok(Some(record))
}

/// Serves recorded responses from a directory of `<hash>.json` records.
pub struct ReplayTransport {
    pub dir: PathBuf,
}

impl ReplayTransport {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        ReplayTransport { dir: dir.into() }
    }
}

impl Transport for ReplayTransport {
    fn complete(&self, request: &GenerationRequest) -> Result<Completion, LlmError> {
        let hash = request.hash();
        match read_record(&self.dir.join(format!("{hash}.json")), &hash)? {
            Some(r) => Ok(Completion {
                text: r.raw,
                timestamp: r.timestamp,
            }),
            None => Err(LlmError::TransportFailure {
                attempts: 1,
                message: format!("no replay entry for {hash}"),
            }),
        }
    }
}

/// On-disk record cache, one JSON file per request hash.
pub struct Cache {
    dir: Option<PathBuf>,
    write_lock: Mutex<()>,
}

impl Cache {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Cache {
            dir: Some(dir.into()),
            write_lock: Mutex::new(()),
        }
    }

    /// A cache that never hits and stores nothing.
    pub fn disabled() -> Self {
        Cache {
            dir: None,
            write_lock: Mutex::new(()),
        }
    }

    pub fn path(&self, hash: &str) -> Option<PathBuf> {
        self.dir.as_ref().map(|d| d.join(format!("{hash}.json")))
    }

    pub fn get(&self, hash: &str) -> Result<Option<GenerationRecord>, LlmError> {
        match self.path(hash) {
            Some(p) => read_record(&p, hash),
            None => Ok(None),
        }
    }

    /// Writes through a temporary file and a rename.
    pub fn put(&self, record: &GenerationRecord) -> Result<(), LlmError> {
        let (Some(dir), Some(path)) = (&self.dir, self.path(&record.request_hash)) else {
            return Ok(());
        };
        let _guard = self.write_lock.lock().unwrap_or_else(|e| e.into_inner());
        fs::create_dir_all(dir).map_err(|e| io_failure(dir, e))?;
        let tmp = dir.join(format!(".{}.tmp", record.request_hash));
        let body = serde_json::to_string_pretty(record).expect("record serializes");
        fs::write(&tmp, body).map_err(|e| io_failure(&tmp, e))?;
        fs::rename(&tmp, &path).map_err(|e| io_failure(&path, e))
    }
}

pub fn generate(
    request: &GenerationRequest,
    transport: &dyn Transport,
    cache: &Cache,
) -> Result<GenerationRecord, LlmError> {
    let hash = request.hash();
    if let Some(hit) = cache.get(&hash)? {
        return Ok(hit);
    }
    let completion = transport.complete(request)?;
    let record = GenerationRecord::from_response(request, &completion.text, completion.timestamp);
    cache.put(&record)?;
    Ok(record)
}

/// One result per request, in input order. Requests sharing a hash are sent
/// once; at most `limit` are in flight.
pub fn batch_generate(
    requests: &[GenerationRequest],
    transport: &dyn Transport,
    cache: &Cache,
    limit: usize,
) -> Result<Vec<Result<GenerationRecord, LlmError>>, LlmError> {
    if limit == 0 {
        return Err(LlmError::InvalidLimit);
    }
    let mut slot_of: HashMap<String, usize> = HashMap::new();
    let mut unique: Vec<&GenerationRequest> = Vec::new();
    let slots: Vec<usize> = requests
        .iter()
        .map(|r| {
            *slot_of.entry(r.hash()).or_insert_with(|| {
                unique.push(r);
                unique.len() - 1
            })
        })
        .collect();

    let results: Vec<Mutex<Option<Result<GenerationRecord, LlmError>>>> =
        unique.iter().map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    thread::scope(|s| {
        for _ in 0..limit.min(unique.len()) {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(req) = unique.get(i) else { break };
                let out = generate(req, transport, cache);
                if let Err(e) = &out {
                    log::warn!("generation {} failed: {e}", req.hash());
                }
                *results[i].lock().unwrap_or_else(|e| e.into_inner()) = Some(out);
            });
        }
    });
    let results: Vec<Result<GenerationRecord, LlmError>> = results
        .into_iter()
        .map(|m| m.into_inner().unwrap_or_else(|e| e.into_inner()).expect("every slot filled"))
        .collect();
    Ok(slots.into_iter().map(|i| results[i].clone()).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn prompt_template() {
        let p = build_prompt(EntityKind::Function, "adds two numbers").unwrap();
        assert_eq!(
            p,
            "Assume that you're an expert Python programmer. Please generate a Python FUNCTION from the given docstring. Do not explain the code.\n\nadds two numbers"
        );
        let c = build_prompt(EntityKind::Class, "A stack.").unwrap();
        assert!(c.contains("a Python CLASS from") && !c.contains("FUNCTION"));
        assert_eq!(build_prompt(EntityKind::Class, "  \n"), Err(LlmError::EmptyDocstring));
    }

    #[test]
    fn hash_is_stable() {
        let prompt = build_prompt(EntityKind::Function, "adds two numbers").unwrap();
        assert_eq!(
            request_hash("claude-3", &prompt),
            "ff17da516d6ca02cee540ae698fe8a645b2dc89900e31cbf709b85bd94b975bf"
        );
        assert_ne!(request_hash("m", "p"), request_hash("mp", ""));
    }

    #[test]
    fn fences() {
        assert_eq!(strip_fences("```python\nx=1\n```"), "x=1");
        assert_eq!(strip_fences("Here:\n```\ndef f():\n    pass\n```\nDone."), "def f():\n    pass");
        assert_eq!(strip_fences("x = 1\n"), "x = 1\n");
        assert_eq!(strip_fences("```py\nx = 2"), "x = 2");
    }

    fn req(kind: EntityKind) -> GenerationRequest {
        GenerationRequest::new(kind, "does things", "m").unwrap()
    }

    #[test]
    fn statuses() {
        let r = GenerationRecord::from_response(&req(EntityKind::Function), "```python\ndef f():\n    return 1\n```", 5);
        assert_eq!((r.status, r.code.as_deref()), (Status::Ok, Some("def f():\n    return 1")));
        let r = GenerationRecord::from_response(&req(EntityKind::Function), "I cannot help with that.", 5);
        assert_eq!((r.status, r.code), (Status::Refused, None));
        let r = GenerationRecord::from_response(&req(EntityKind::Function), "  \n", 5);
        assert_eq!(r.status, Status::Empty);
        let r = GenerationRecord::from_response(&req(EntityKind::Function), "```\n```", 5);
        assert_eq!(r.status, Status::Empty);
        let r = GenerationRecord::from_response(&req(EntityKind::Class), "def f():\n    return 1\n", 5);
        assert_eq!(r.status, Status::ParseFailed);
        let r = GenerationRecord::from_response(&req(EntityKind::Function), "def f(:\n    return (1\n", 5);
        assert_eq!(r.status, Status::ParseFailed);
    }

    #[test]
    fn response_shapes() {
        let openai = json!({"choices": [{"message": {"role": "assistant", "content": "a"}}]});
        let anthropic = json!({"content": [{"type": "text", "text": "b"}]});
        assert_eq!(response_text(&openai).as_deref(), Some("a"));
        assert_eq!(response_text(&anthropic).as_deref(), Some("b"));
        assert_eq!(response_text(&json!({"text": "c"})).as_deref(), Some("c"));
        assert_eq!(response_text(&json!({"x": 1})), None);
    }
}
