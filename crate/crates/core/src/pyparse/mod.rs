//! Lexical and indentation-structural analysis of Python source.
//!
//! This is deliberately not a full grammar. It classifies every physical
//! line, cuts the token stream into logical statements, recovers the block
//! structure from indentation, and finds `def`/`class` entities. That is all
//! the metric layer needs, and every rule here is small enough to check by
//! hand against a listing.
//!
//! Line rules:
//! - a line is *code* when it is covered by a logical line that is not a
//!   docstring (bracket and backslash continuations cover every physical
//!   line they span, blank or not);
//! - a line is *comment* when it holds a `#` comment or belongs to a
//!   docstring;
//! - a line is *blank* when it is neither.
//!
//! A docstring is a logical line made only of string literals that is
//! either the first logical line of the source or immediately follows a
//! `def`/`class` header whose body starts on the next line.

mod lexer;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use lexer::LexWarning;
pub(crate) use lexer::normalize_newlines;
use lexer::{LogicalLine, TokKind, Token};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("input is not valid UTF-8 (valid up to byte {valid_up_to})")]
    NonUtf8Input { valid_up_to: usize },
    #[error("unterminated string literal starting at line {line}, column {column}")]
    UnterminatedString { line: usize, column: usize },
    #[error("indentation error at line {line}: {message}")]
    Indentation { line: usize, message: String },
}

/// Decodes raw bytes as UTF-8 source text.
pub fn decode_source(bytes: &[u8]) -> Result<&str, ParseError> {
    std::str::from_utf8(bytes).map_err(|e| ParseError::NonUtf8Input {
        valid_up_to: e.valid_up_to(),
    })
}

/// Inclusive, 1-based range of physical lines.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct LineSpan {
    pub start: usize,
    pub end: usize,
}

impl LineSpan {
    pub fn new(start: usize, end: usize) -> Self {
        debug_assert!(start <= end);
        LineSpan { start, end }
    }

    pub fn len(&self) -> usize {
        self.end + 1 - self.start
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn contains(&self, line: usize) -> bool {
        self.start <= line && line <= self.end
    }

    pub fn contains_span(&self, other: &LineSpan) -> bool {
        self.start <= other.start && other.end <= self.end
    }

    pub fn overlaps(&self, other: &LineSpan) -> bool {
        self.start <= other.end && other.start <= self.end
    }

    pub fn lines(&self) -> std::ops::RangeInclusive<usize> {
        self.start..=self.end
    }
}

impl fmt::Display for LineSpan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-{}", self.start, self.end)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LineRecord {
    pub index: usize,
    pub is_blank: bool,
    pub has_code: bool,
    pub has_comment: bool,
    pub is_docstring: bool,
    pub indent: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StatementKind {
    DefHeader,
    ClassHeader,
    Import,
    Decorator,
    ScopeDecl,
    OtherSimple,
    CompoundHeader,
}

impl StatementKind {
    /// Definitions, imports, decorators and `global`/`nonlocal`.
    pub fn is_declarative(self) -> bool {
        matches!(
            self,
            StatementKind::DefHeader
                | StatementKind::ClassHeader
                | StatementKind::Import
                | StatementKind::Decorator
                | StatementKind::ScopeDecl
        )
    }

    pub fn is_executable(self) -> bool {
        !self.is_declarative()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Statement {
    pub kind: StatementKind,
    pub span: LineSpan,
    /// Enclosing control structures, counted from the innermost `def` body.
    pub depth: usize,
    pub decision_points: usize,
    placeholder: bool,
}

impl Statement {
    pub fn new(kind: StatementKind, span: LineSpan, depth: usize, decision_points: usize) -> Self {
        Statement {
            kind,
            span,
            depth,
            decision_points,
            placeholder: false,
        }
    }

    /// `pass` or a bare `...`.
    pub fn is_placeholder(&self) -> bool {
        self.placeholder
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EntityKind {
    Function,
    Class,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EntityTree {
    pub kind: EntityKind,
    pub name: String,
    /// Header line through the last line of the body; decorators excluded.
    pub span: LineSpan,
    pub children: Vec<EntityTree>,
    /// Span of every `def` at or beneath this node, in source order.
    pub unit_spans: Vec<LineSpan>,
    /// Cleaned docstring text, if the body opens with one.
    pub docstring: Option<String>,
    /// Textual base-class expressions (classes only; keyword arguments dropped).
    pub bases: Vec<String>,
}

impl EntityTree {
    /// Pre-order walk over this node and all descendants.
    pub fn walk(&self) -> Vec<&EntityTree> {
        let mut out = vec![self];
        for c in &self.children {
            out.extend(c.walk());
        }
        out
    }
}

/// Everything the analysis produces for one piece of source.
#[derive(Debug, Clone)]
pub struct ParsedSource {
    pub lines: Vec<LineRecord>,
    pub statements: Vec<Statement>,
    pub entities: Vec<EntityTree>,
    pub warnings: Vec<LexWarning>,
}

impl ParsedSource {
    pub fn line_count(&self) -> usize {
        self.lines.len()
    }

    /// All entity nodes in pre-order.
    pub fn all_entities(&self) -> Vec<&EntityTree> {
        self.entities.iter().flat_map(|e| e.walk()).collect()
    }
}

pub fn parse(source: &str) -> Result<ParsedSource, ParseError> {
    let source = lexer::normalize_newlines(source);
    let lexed = lexer::lex(&source)?;
    let docstrings = docstring_lines(&lexed.logical);
    let lines = line_records(&lexed, &docstrings);
    let (statements, entities) = Builder::new(&lexed.logical, &docstrings).run()?;
    Ok(ParsedSource {
        lines,
        statements,
        entities,
        warnings: lexed.warnings,
    })
}

/// One record per physical line.
pub fn classify_lines(source: &str) -> Result<Vec<LineRecord>, ParseError> {
    let source = lexer::normalize_newlines(source);
    let lexed = lexer::lex(&source)?;
    let docstrings = docstring_lines(&lexed.logical);
    Ok(line_records(&lexed, &docstrings))
}

/// Logical statements in source order. Docstrings are not statements.
pub fn segment_statements(source: &str) -> Result<Vec<Statement>, ParseError> {
    Ok(parse(source)?.statements)
}

/// Top-level `def`/`class` entities with nested children.
pub fn extract_entities(source: &str) -> Result<Vec<EntityTree>, ParseError> {
    Ok(parse(source)?.entities)
}

/// Decision points contributed by statements starting inside `span`.
pub fn decision_points(stmts: &[Statement], span: LineSpan) -> usize {
    stmts
        .iter()
        .filter(|s| span.contains(s.span.start))
        .map(|s| s.decision_points)
        .sum()
}

/// Deepest control nesting of any statement starting inside `span`.
pub fn max_nesting(stmts: &[Statement], span: LineSpan) -> usize {
    stmts
        .iter()
        .filter(|s| span.contains(s.span.start))
        .map(|s| s.depth)
        .max()
        .unwrap_or(0)
}

fn is_docstring_candidate(line: &LogicalLine) -> bool {
    !line.tokens.is_empty() && line.tokens.iter().all(|t| t.kind == TokKind::Str)
}

/// Indices of logical lines that are docstrings.
fn docstring_lines(logical: &[LogicalLine]) -> Vec<bool> {
    let mut out = vec![false; logical.len()];
    for (i, line) in logical.iter().enumerate() {
        if !is_docstring_candidate(line) {
            continue;
        }
        if i == 0 {
            out[i] = true;
            continue;
        }
        let prev = &logical[i - 1];
        if let Some(header) = analyze_line(&prev.tokens).header {
            let opens_block = header.colon + 1 == prev.tokens.len();
            if opens_block && matches!(header.kind, StatementKind::DefHeader | StatementKind::ClassHeader) {
                out[i] = true;
            }
        }
    }
    out
}

fn line_records(lexed: &lexer::Lexed, docstrings: &[bool]) -> Vec<LineRecord> {
    let n = lexed.line_count;
    let mut code = vec![false; n];
    let mut doc = vec![false; n];
    for (line, &is_doc) in lexed.logical.iter().zip(docstrings) {
        let target = if is_doc { &mut doc } else { &mut code };
        for l in line.first_line..=line.last_line.min(n) {
            target[l - 1] = true;
        }
    }
    (0..n)
        .map(|i| {
            let has_comment = lexed.comment[i] || doc[i];
            LineRecord {
                index: i + 1,
                is_blank: !code[i] && !has_comment,
                has_code: code[i],
                has_comment,
                is_docstring: doc[i],
                indent: lexed.indent[i],
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy)]
struct Header {
    kind: StatementKind,
    keyword_index: usize,
    colon: usize,
}

struct LineShape {
    header: Option<Header>,
}

const COMPOUND: &[&str] = &[
    "if", "elif", "else", "for", "while", "try", "except", "finally", "with", "def", "class",
];

fn depth_delta(t: &Token) -> isize {
    match t.kind {
        TokKind::Op => match t.text.as_str() {
            "(" | "[" | "{" => 1,
            ")" | "]" | "}" => -1,
            _ => 0,
        },
        _ => 0,
    }
}

/// Index of the colon closing a compound header, skipping lambda colons and
/// anything inside brackets.
fn header_colon(tokens: &[Token], from: usize) -> Option<usize> {
    let mut depth = 0isize;
    let mut lambdas = 0usize;
    for (i, t) in tokens.iter().enumerate().skip(from) {
        if depth == 0 {
            if t.is_name("lambda") {
                lambdas += 1;
            } else if t.is_op(":") {
                if lambdas == 0 {
                    return Some(i);
                }
                lambdas -= 1;
            }
        }
        depth += depth_delta(t);
        if depth < 0 {
            depth = 0;
        }
    }
    None
}

fn analyze_line(tokens: &[Token]) -> LineShape {
    let mut k = 0;
    if tokens.len() > 1
        && tokens[0].is_name("async")
        && ["def", "for", "with"].iter().any(|kw| tokens[1].is_name(kw))
    {
        k = 1;
    }
    let Some(first) = tokens.get(k) else {
        return LineShape { header: None };
    };
    if first.kind != TokKind::Name {
        return LineShape { header: None };
    }
    let word = first.text.as_str();
    let soft = matches!(word, "match" | "case")
        && tokens.get(k + 1).is_some_and(|t| {
            !(t.kind == TokKind::Op
                && matches!(t.text.as_str(), "=" | "." | ":" | "," | ")" | "]" | "}" | ";")
                || t.kind == TokKind::Op && t.text.ends_with('=') && t.text != "==")
        });
    if !COMPOUND.contains(&word) && !soft {
        return LineShape { header: None };
    }
    let Some(colon) = header_colon(tokens, k + 1) else {
        return LineShape { header: None };
    };
    let kind = match word {
        "def" => StatementKind::DefHeader,
        "class" => StatementKind::ClassHeader,
        _ => StatementKind::CompoundHeader,
    };
    LineShape {
        header: Some(Header {
            kind,
            keyword_index: k,
            colon,
        }),
    }
}

/// Splits a token run on depth-0 semicolons, dropping empty pieces.
fn split_simple(tokens: &[Token]) -> Vec<&[Token]> {
    let mut out = Vec::new();
    let mut depth = 0isize;
    let mut start = 0;
    for (i, t) in tokens.iter().enumerate() {
        if depth == 0 && t.is_op(";") {
            if i > start {
                out.push(&tokens[start..i]);
            }
            start = i + 1;
        }
        depth = (depth + depth_delta(t)).max(0);
    }
    if start < tokens.len() {
        out.push(&tokens[start..]);
    }
    out
}

fn simple_kind(tokens: &[Token]) -> StatementKind {
    let first = &tokens[0];
    if first.is_op("@") {
        StatementKind::Decorator
    } else if first.is_name("import") || first.is_name("from") {
        StatementKind::Import
    } else if first.is_name("global") || first.is_name("nonlocal") {
        StatementKind::ScopeDecl
    } else {
        StatementKind::OtherSimple
    }
}

fn count_decisions(tokens: &[Token], header_keyword: Option<usize>) -> usize {
    tokens
        .iter()
        .enumerate()
        .filter(|(i, t)| {
            t.kind == TokKind::Name
                && match t.text.as_str() {
                    "if" | "elif" | "while" | "except" => true,
                    "for" => Some(*i) == header_keyword,
                    _ => false,
                }
        })
        .count()
}

fn token_span(tokens: &[Token]) -> LineSpan {
    let start = tokens[0].line;
    let end = tokens.iter().map(|t| t.end_line).max().unwrap_or(start);
    LineSpan::new(start, end)
}

fn string_content(token: &str) -> &str {
    let body = token.trim_start_matches(|c: char| c.is_ascii_alphabetic());
    for q in ["\"\"\"", "'''", "\"", "'"] {
        if body.len() >= 2 * q.len() && body.starts_with(q) && body.ends_with(q) {
            return &body[q.len()..body.len() - q.len()];
        }
    }
    body
}

/// Same normalization as Python's `inspect.cleandoc`.
pub fn clean_docstring(raw: &str) -> String {
    let expanded = raw.replace('\t', "        ");
    let lines: Vec<&str> = expanded.split('\n').collect();
    let margin = lines
        .iter()
        .skip(1)
        .filter(|l| !l.trim().is_empty())
        .map(|l| l.len() - l.trim_start().len())
        .min()
        .unwrap_or(0);
    let mut out: Vec<String> = Vec::with_capacity(lines.len());
    for (i, l) in lines.iter().enumerate() {
        if i == 0 {
            out.push(l.trim_start().to_string());
        } else if l.len() >= margin {
            out.push(l[margin..].trim_end().to_string());
        } else {
            out.push(l.trim_end().to_string());
        }
    }
    while out.first().is_some_and(|l| l.trim().is_empty()) {
        out.remove(0);
    }
    while out.last().is_some_and(|l| l.trim().is_empty()) {
        out.pop();
    }
    out.join("\n")
}

fn class_bases(tokens: &[Token], name_index: usize, colon: usize) -> Vec<String> {
    let mut bases = Vec::new();
    if !tokens.get(name_index + 1).is_some_and(|t| t.is_op("(")) {
        return bases;
    }
    let inner = &tokens[name_index + 2..colon];
    let mut depth = 0isize;
    let mut current: Vec<&Token> = Vec::new();
    let mut flush = |current: &mut Vec<&Token>| {
        let is_keyword = current.len() >= 2 && current[1].is_op("=");
        let is_star = current.first().is_some_and(|t| t.is_op("*") || t.is_op("**"));
        if !current.is_empty() && !is_keyword && !is_star {
            bases.push(current.iter().map(|t| t.text.as_str()).collect::<String>());
        }
        current.clear();
    };
    for t in inner {
        if depth == 0 && (t.is_op(",") || t.is_op(")")) {
            flush(&mut current);
            if t.is_op(")") {
                break;
            }
            continue;
        }
        depth = (depth + depth_delta(t)).max(0);
        current.push(t);
    }
    flush(&mut current);
    bases
}

#[derive(Debug)]
struct RawEntity {
    kind: EntityKind,
    name: String,
    start: usize,
    end: usize,
    parent: Option<usize>,
    docstring: Option<String>,
    bases: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum BlockKind {
    Def,
    Class,
    Control,
    Case,
}

#[derive(Debug, Clone, Copy)]
struct Pending {
    kind: BlockKind,
    entity: Option<usize>,
    header_depth: usize,
    line: usize,
}

#[derive(Debug)]
struct Frame {
    indent: usize,
    depth: usize,
    entity: Option<usize>,
    own_entity: Option<usize>,
    last_line: usize,
}

struct Builder<'a> {
    logical: &'a [LogicalLine],
    docstrings: &'a [bool],
    frames: Vec<Frame>,
    statements: Vec<Statement>,
    entities: Vec<RawEntity>,
}

fn body_depth(kind: BlockKind, header_depth: usize) -> usize {
    match kind {
        BlockKind::Def => 0,
        BlockKind::Class | BlockKind::Case => header_depth,
        BlockKind::Control => header_depth + 1,
    }
}

impl<'a> Builder<'a> {
    fn new(logical: &'a [LogicalLine], docstrings: &'a [bool]) -> Self {
        Builder {
            logical,
            docstrings,
            frames: Vec::new(),
            statements: Vec::new(),
            entities: Vec::new(),
        }
    }

    fn close_top(&mut self) {
        let frame = self.frames.pop().expect("frame stack underflow");
        if let Some(e) = frame.own_entity {
            self.entities[e].end = frame.last_line;
        }
        if let Some(parent) = self.frames.last_mut() {
            parent.last_line = parent.last_line.max(frame.last_line);
        }
    }

    fn run(mut self) -> Result<(Vec<Statement>, Vec<EntityTree>), ParseError> {
        let Some(first) = self.logical.first() else {
            return Ok((Vec::new(), Vec::new()));
        };
        self.frames.push(Frame {
            indent: first.indent,
            depth: 0,
            entity: None,
            own_entity: None,
            last_line: 0,
        });
        let mut pending: Option<Pending> = None;

        for (idx, line) in self.logical.iter().enumerate() {
            let ind = line.indent;
            let top_indent = self.frames.last().unwrap().indent;
            if let Some(p) = pending.take() {
                if ind <= top_indent {
                    return Err(ParseError::Indentation {
                        line: line.first_line,
                        message: format!("expected an indented block after line {}", p.line),
                    });
                }
                let parent_entity = self.frames.last().unwrap().entity;
                self.frames.push(Frame {
                    indent: ind,
                    depth: body_depth(p.kind, p.header_depth),
                    entity: p.entity.or(parent_entity),
                    own_entity: p.entity,
                    last_line: line.last_line,
                });
            } else if ind > top_indent {
                return Err(ParseError::Indentation {
                    line: line.first_line,
                    message: "unexpected indent".into(),
                });
            } else {
                while ind < self.frames.last().unwrap().indent {
                    if self.frames.len() == 1 {
                        return Err(ParseError::Indentation {
                            line: line.first_line,
                            message: "dedent below the first line's indentation".into(),
                        });
                    }
                    self.close_top();
                }
                if ind != self.frames.last().unwrap().indent {
                    return Err(ParseError::Indentation {
                        line: line.first_line,
                        message: "unindent does not match any outer indentation level".into(),
                    });
                }
            }

            let frame = self.frames.last_mut().unwrap();
            frame.last_line = frame.last_line.max(line.last_line);

            if self.docstrings[idx] {
                if let Some(e) = self.frames.last().unwrap().own_entity {
                    let raw: String = line.tokens.iter().map(|t| string_content(&t.text)).collect();
                    self.entities[e].docstring = Some(clean_docstring(&raw));
                }
                continue;
            }
            pending = self.line(line);
        }
        if let Some(p) = pending {
            return Err(ParseError::Indentation {
                line: p.line,
                message: "expected an indented block at end of input".into(),
            });
        }
        while !self.frames.is_empty() {
            self.close_top();
        }
        let roots = self.assemble();
        Ok((self.statements, roots))
    }

    /// Emits statements for one logical line; returns the block it opens.
    fn line(&mut self, line: &LogicalLine) -> Option<Pending> {
        let tokens = &line.tokens;
        let frame_depth = self.frames.last().unwrap().depth;
        let frame_entity = self.frames.last().unwrap().entity;
        let shape = analyze_line(tokens);
        let Some(h) = shape.header else {
            self.simple_statements(tokens, frame_depth);
            return None;
        };

        let head = &tokens[..=h.colon];
        let keyword = tokens[h.keyword_index].text.as_str();
        self.statements.push(Statement::new(
            h.kind,
            token_span(head),
            frame_depth,
            count_decisions(head, Some(h.keyword_index)),
        ));

        let block = match h.kind {
            StatementKind::DefHeader => BlockKind::Def,
            StatementKind::ClassHeader => BlockKind::Class,
            _ if keyword == "case" => BlockKind::Case,
            _ => BlockKind::Control,
        };
        let entity = match block {
            BlockKind::Def | BlockKind::Class => {
                let name_index = h.keyword_index + 1;
                let name = tokens
                    .get(name_index)
                    .filter(|t| t.kind == TokKind::Name)
                    .map(|t| t.text.clone())
                    .unwrap_or_default();
                let kind = if block == BlockKind::Def {
                    EntityKind::Function
                } else {
                    EntityKind::Class
                };
                let bases = if kind == EntityKind::Class {
                    class_bases(tokens, name_index, h.colon)
                } else {
                    Vec::new()
                };
                self.entities.push(RawEntity {
                    kind,
                    name,
                    start: line.first_line,
                    end: line.last_line,
                    parent: frame_entity,
                    docstring: None,
                    bases,
                });
                Some(self.entities.len() - 1)
            }
            _ => None,
        };

        let rest = &tokens[h.colon + 1..];
        if rest.is_empty() {
            return Some(Pending {
                kind: block,
                entity,
                header_depth: frame_depth,
                line: line.first_line,
            });
        }
        self.simple_statements(rest, body_depth(block, frame_depth));
        None
    }

    fn simple_statements(&mut self, tokens: &[Token], depth: usize) {
        for piece in split_simple(tokens) {
            let placeholder = piece.len() == 1 && (piece[0].is_name("pass") || piece[0].is_op("..."));
            let mut stmt = Statement::new(
                simple_kind(piece),
                token_span(piece),
                depth,
                count_decisions(piece, None),
            );
            stmt.placeholder = placeholder;
            self.statements.push(stmt);
        }
    }

    fn assemble(&self) -> Vec<EntityTree> {
        fn build(entities: &[RawEntity], idx: usize) -> EntityTree {
            let e = &entities[idx];
            let children: Vec<EntityTree> = entities
                .iter()
                .enumerate()
                .filter(|(_, c)| c.parent == Some(idx))
                .map(|(i, _)| build(entities, i))
                .collect();
            let mut unit_spans = Vec::new();
            let span = LineSpan::new(e.start, e.end.max(e.start));
            if e.kind == EntityKind::Function {
                unit_spans.push(span);
            }
            for c in &children {
                unit_spans.extend(c.unit_spans.iter().copied());
            }
            EntityTree {
                kind: e.kind,
                name: e.name.clone(),
                span,
                children,
                unit_spans,
                docstring: e.docstring.clone(),
                bases: e.bases.clone(),
            }
        }
        self.entities
            .iter()
            .enumerate()
            .filter(|(_, e)| e.parent.is_none())
            .map(|(i, _)| build(&self.entities, i))
            .collect()
    }
}
