//! Character-level tokenizer for Python source.
//!
//! Produces logical lines (NEWLINE-terminated token runs, with bracket and
//! backslash continuations folded in) plus a per-physical-line record of
//! where `#` comments occur. String literals of every flavor are consumed
//! whole, so comment-like or quote-like text inside them never leaks out.

use super::ParseError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum TokKind {
    Name,
    Number,
    Str,
    Op,
    Unknown,
}

#[derive(Debug, Clone)]
pub(crate) struct Token {
    pub kind: TokKind,
    pub text: String,
    pub line: usize,
    pub end_line: usize,
}

impl Token {
    pub fn is_name(&self, name: &str) -> bool {
        self.kind == TokKind::Name && self.text == name
    }

    pub fn is_op(&self, op: &str) -> bool {
        self.kind == TokKind::Op && self.text == op
    }
}

#[derive(Debug, Clone)]
pub(crate) struct LogicalLine {
    pub tokens: Vec<Token>,
    pub first_line: usize,
    pub last_line: usize,
    pub indent: usize,
}

/// Something odd but survivable that the lexer ran into.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LexWarning {
    pub line: usize,
    pub message: String,
}

#[derive(Debug, Clone)]
pub(crate) struct Lexed {
    pub line_count: usize,
    pub logical: Vec<LogicalLine>,
    /// Indexed by `line - 1`.
    pub comment: Vec<bool>,
    /// Indexed by `line - 1`.
    pub indent: Vec<usize>,
    pub warnings: Vec<LexWarning>,
}

const STRING_PREFIXES: &[&str] = &[
    "r", "u", "b", "f", "t", "br", "rb", "fr", "rf", "tr", "rt",
];

const OPS3: &[&str] = &["**=", "//=", ">>=", "<<=", "..."];
const OPS2: &[&str] = &[
    "**", "//", ">>", "<<", "<=", ">=", "==", "!=", "->", ":=", "+=", "-=", "*=", "/=", "%=",
    "&=", "|=", "^=", "@=",
];
const OPS1: &str = "+-*/%@&|^~<>()[]{},:;.=!";

/// Number of physical lines: a trailing newline does not open a new line.
pub(crate) fn physical_line_count(src: &str) -> usize {
    if src.is_empty() {
        return 0;
    }
    let newlines = src.matches('\n').count();
    if src.ends_with('\n') {
        newlines
    } else {
        newlines + 1
    }
}

/// Leading-whitespace width with tabs advancing to the next multiple of 8.
pub(crate) fn indent_width(line: &str) -> usize {
    let mut col = 0;
    for c in line.chars() {
        match c {
            ' ' => col += 1,
            '\t' => col = (col / 8 + 1) * 8,
            '\x0c' => col = 0,
            _ => break,
        }
    }
    col
}

pub(crate) fn normalize_newlines(src: &str) -> std::borrow::Cow<'_, str> {
    if src.contains('\r') {
        std::borrow::Cow::Owned(src.replace("\r\n", "\n").replace('\r', "\n"))
    } else {
        std::borrow::Cow::Borrowed(src)
    }
}

struct Lexer<'s> {
    chars: Vec<char>,
    pos: usize,
    line: usize,
    col: usize,
    comment: Vec<bool>,
    warnings: Vec<LexWarning>,
    _src: &'s str,
}

impl<'s> Lexer<'s> {
    fn peek(&self, k: usize) -> Option<char> {
        self.chars.get(self.pos + k).copied()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.chars.get(self.pos).copied()?;
        self.pos += 1;
        if c == '\n' {
            self.line += 1;
            self.col = 0;
        } else {
            self.col += 1;
        }
        Some(c)
    }

    fn slice(&self, from: usize) -> String {
        self.chars[from..self.pos].iter().collect()
    }

    fn warn(&mut self, line: usize, message: impl Into<String>) {
        self.warnings.push(LexWarning {
            line,
            message: message.into(),
        });
    }

    /// Consumes a string literal whose opening quote is at `self.pos`.
    /// `prefix` has already been consumed.
    fn string(&mut self, prefix: &str) -> Result<(), ParseError> {
        let line = self.line;
        let column = self.col.saturating_sub(prefix.chars().count()) + 1;
        let lower = prefix.to_ascii_lowercase();
        let formatted = lower.contains('f') || lower.contains('t');
        let q = self.bump().expect("caller checked quote");
        let triple = self.peek(0) == Some(q) && self.peek(1) == Some(q);
        if triple {
            self.bump();
            self.bump();
        }
        self.string_body(q, triple, formatted)
            .map_err(|_| ParseError::UnterminatedString { line, column })
    }

    fn string_body(&mut self, q: char, triple: bool, formatted: bool) -> Result<(), ()> {
        loop {
            let c = self.peek(0).ok_or(())?;
            match c {
                '\\' => {
                    self.bump();
                    if self.peek(0).is_some() {
                        self.bump();
                    }
                }
                '\n' if !triple => return Err(()),
                c if c == q => {
                    if !triple {
                        self.bump();
                        return Ok(());
                    }
                    if self.peek(1) == Some(q) && self.peek(2) == Some(q) {
                        self.bump();
                        self.bump();
                        self.bump();
                        return Ok(());
                    }
                    self.bump();
                }
                '{' if formatted => {
                    if self.peek(1) == Some('{') {
                        self.bump();
                        self.bump();
                    } else {
                        self.bump();
                        self.replacement_field()?;
                    }
                }
                _ => {
                    self.bump();
                }
            }
        }
    }

    /// Inside `{...}` of an f-string: an expression, possibly holding nested
    /// strings, brackets and a format spec with its own fields.
    fn replacement_field(&mut self) -> Result<(), ()> {
        let mut depth = 0usize;
        loop {
            let c = self.peek(0).ok_or(())?;
            match c {
                '}' if depth == 0 => {
                    self.bump();
                    return Ok(());
                }
                '{' | '(' | '[' => {
                    depth += 1;
                    self.bump();
                }
                '}' | ')' | ']' => {
                    depth = depth.saturating_sub(1);
                    self.bump();
                }
                '\'' | '"' => {
                    let q = self.bump().unwrap();
                    let triple = self.peek(0) == Some(q) && self.peek(1) == Some(q);
                    if triple {
                        self.bump();
                        self.bump();
                    }
                    let formatted = self.preceding_prefix_is_formatted();
                    self.string_body(q, triple, formatted)?;
                }
                _ => {
                    self.bump();
                }
            }
        }
    }

    fn preceding_prefix_is_formatted(&self) -> bool {
        // Opening quote(s) were just consumed; look behind them for a prefix.
        let mut i = self.pos;
        while i > 0 && matches!(self.chars[i - 1], '\'' | '"') {
            i -= 1;
        }
        let mut prefix = String::new();
        while i > 0 && self.chars[i - 1].is_ascii_alphabetic() {
            i -= 1;
            prefix.insert(0, self.chars[i]);
        }
        let lower = prefix.to_ascii_lowercase();
        STRING_PREFIXES.contains(&lower.as_str()) && (lower.contains('f') || lower.contains('t'))
    }
}

fn is_name_start(c: char) -> bool {
    c == '_' || c.is_alphabetic()
}

fn is_name_continue(c: char) -> bool {
    c == '_' || c.is_alphanumeric()
}

pub(crate) fn lex(src: &str) -> Result<Lexed, ParseError> {
    let line_count = physical_line_count(src);
    let indent = src.split('\n').take(line_count).map(indent_width).collect();
    let mut lx = Lexer {
        chars: src.chars().collect(),
        pos: 0,
        line: 1,
        col: 0,
        comment: vec![false; line_count],
        warnings: Vec::new(),
        _src: src,
    };

    let mut logical: Vec<LogicalLine> = Vec::new();
    let mut current: Vec<Token> = Vec::new();
    let mut depth = 0usize;

    let finish = |current: &mut Vec<Token>, logical: &mut Vec<LogicalLine>, indent: &Vec<usize>| {
        if current.is_empty() {
            return;
        }
        let tokens = std::mem::take(current);
        let first_line = tokens[0].line;
        let last_line = tokens.last().map(|t| t.end_line).unwrap_or(first_line);
        logical.push(LogicalLine {
            first_line,
            last_line,
            indent: indent.get(first_line - 1).copied().unwrap_or(0),
            tokens,
        });
    };

    while let Some(c) = lx.peek(0) {
        match c {
            ' ' | '\t' | '\x0c' => {
                lx.bump();
            }
            '\n' => {
                lx.bump();
                if depth == 0 {
                    finish(&mut current, &mut logical, &indent);
                }
            }
            '#' => {
                let line = lx.line;
                while let Some(c) = lx.peek(0) {
                    if c == '\n' {
                        break;
                    }
                    lx.bump();
                }
                lx.comment[line - 1] = true;
            }
            '\\' if matches!(lx.peek(1), Some('\n') | None) => {
                lx.bump();
                lx.bump();
            }
            '\'' | '"' => {
                let start = lx.pos;
                let line = lx.line;
                lx.string("")?;
                current.push(Token {
                    kind: TokKind::Str,
                    text: lx.slice(start),
                    line,
                    end_line: lx.line,
                });
            }
            c if is_name_start(c) => {
                let start = lx.pos;
                let line = lx.line;
                while lx.peek(0).is_some_and(is_name_continue) {
                    lx.bump();
                }
                let word = lx.slice(start);
                let is_prefix = STRING_PREFIXES.contains(&word.to_ascii_lowercase().as_str());
                if is_prefix && matches!(lx.peek(0), Some('\'' | '"')) {
                    lx.string(&word)?;
                    current.push(Token {
                        kind: TokKind::Str,
                        text: lx.slice(start),
                        line,
                        end_line: lx.line,
                    });
                } else {
                    current.push(Token {
                        kind: TokKind::Name,
                        text: word,
                        line,
                        end_line: line,
                    });
                }
            }
            c if c.is_ascii_digit() || (c == '.' && lx.peek(1).is_some_and(|d| d.is_ascii_digit())) => {
                let start = lx.pos;
                let line = lx.line;
                let hex = c == '0' && matches!(lx.peek(1), Some('x' | 'X'));
                let mut prev = ' ';
                while let Some(d) = lx.peek(0) {
                    let exponent_sign = !hex && matches!(prev, 'e' | 'E') && matches!(d, '+' | '-');
                    if d.is_ascii_alphanumeric() || d == '_' || d == '.' || exponent_sign {
                        prev = d;
                        lx.bump();
                    } else {
                        break;
                    }
                }
                current.push(Token {
                    kind: TokKind::Number,
                    text: lx.slice(start),
                    line,
                    end_line: line,
                });
            }
            _ => {
                let line = lx.line;
                let three: String = lx.chars[lx.pos..].iter().take(3).collect();
                let two: String = three.chars().take(2).collect();
                let op = if OPS3.contains(&three.as_str()) {
                    Some(three)
                } else if OPS2.contains(&two.as_str()) {
                    Some(two)
                } else if OPS1.contains(c) {
                    Some(c.to_string())
                } else {
                    None
                };
                match op {
                    Some(op) => {
                        for _ in 0..op.chars().count() {
                            lx.bump();
                        }
                        match op.as_str() {
                            "(" | "[" | "{" => depth += 1,
                            ")" | "]" | "}" => {
                                if depth == 0 {
                                    lx.warn(line, format!("unbalanced `{op}`"));
                                }
                                depth = depth.saturating_sub(1);
                            }
                            _ => {}
                        }
                        current.push(Token {
                            kind: TokKind::Op,
                            text: op,
                            line,
                            end_line: line,
                        });
                    }
                    None => {
                        lx.bump();
                        lx.warn(line, format!("unexpected character {c:?}"));
                        current.push(Token {
                            kind: TokKind::Unknown,
                            text: c.to_string(),
                            line,
                            end_line: line,
                        });
                    }
                }
            }
        }
    }
    if depth > 0 {
        let line = lx.line.min(line_count.max(1));
        lx.warn(line, "unclosed bracket at end of input");
    }
    finish(&mut current, &mut logical, &indent);

    Ok(Lexed {
        line_count,
        logical,
        comment: lx.comment,
        indent,
        warnings: lx.warnings,
    })
}
