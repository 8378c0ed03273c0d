use alloc::string::String;
use alloc::vec::Vec;

use super::{Diagnostic, SourceSpan};

#[derive(Debug, Clone, PartialEq)]
pub(super) enum Tok {
    Ident(String),
    Str(String),
    /// Numeric literal, kept as written so it can also serve as a label.
    Number(String),
    /// `${name}`
    Placeholder(String),
    Punct(&'static str),
    Eof,
}

impl Tok {
    pub fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => alloc::format!("`{s}`"),
            Tok::Str(_) => "string".into(),
            Tok::Number(n) => alloc::format!("number `{n}`"),
            Tok::Placeholder(p) => alloc::format!("placeholder `${{{p}}}`"),
            Tok::Punct(p) => alloc::format!("`{p}`"),
            Tok::Eof => "end of input".into(),
        }
    }
}

#[derive(Debug, Clone)]
pub(super) struct Token {
    pub tok: Tok,
    pub line: u32,
    pub column: u32,
    pub length: u32,
    /// `#` comments between the previous token and this one.
    pub comments: Vec<String>,
}

const PUNCT: [&str; 16] = ["->", "<=", "..", "{", "}", "(", ")", "[", "]", ",", ":", "=", "|", "*", ".", "<"];

/// Splits `text` into tokens. Never fails: bad characters become
/// diagnostics and are skipped.
pub(super) fn lex(text: &str, file: &str) -> (Vec<Token>, Vec<Diagnostic>) {
    let chars: Vec<char> = text.chars().collect();
    let mut tokens = Vec::new();
    let mut diags = Vec::new();
    let mut comments: Vec<String> = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1u32, 1u32);

    let span = |line: u32, column: u32, length: u32| SourceSpan { file: file.into(), line, column, length };

    while i < chars.len() {
        let c = chars[i];
        if c == '\n' {
            i += 1;
            line += 1;
            col = 1;
            continue;
        }
        if c.is_whitespace() {
            i += 1;
            col += 1;
            continue;
        }
        if c == '#' {
            let start = i + 1;
            while i < chars.len() && chars[i] != '\n' {
                i += 1;
            }
            let body: String = chars[start..i].iter().collect();
            let body = body.trim_end();
            comments.push(body.strip_prefix(' ').unwrap_or(body).into());
            continue;
        }
        let (start, start_col) = (i, col);
        let tok = if c.is_ascii_alphabetic() || c == '_' {
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            Tok::Ident(chars[start..i].iter().collect())
        } else if c.is_ascii_digit()
            || ((c == '-' || c == '+' || c == '.') && chars.get(i + 1).is_some_and(|d| d.is_ascii_digit()))
        {
            i = scan_number(&chars, i);
            Tok::Number(chars[start..i].iter().collect())
        } else if c == '"' {
            i += 1;
            let mut s = String::new();
            let mut closed = false;
            while i < chars.len() {
                match chars[i] {
                    '"' => {
                        closed = true;
                        i += 1;
                        break;
                    }
                    '\n' => break,
                    '\\' if i + 1 < chars.len() => {
                        let e = chars[i + 1];
                        match e {
                            'n' => s.push('\n'),
                            't' => s.push('\t'),
                            'r' => s.push('\r'),
                            '"' | '\\' => s.push(e),
                            other => {
                                diags.push(Diagnostic::new(
                                    span(line, col + (i - start) as u32, 2),
                                    alloc::format!("unknown escape `\\{other}`"),
                                ));
                                s.push(other);
                            }
                        }
                        i += 2;
                    }
                    ch => {
                        s.push(ch);
                        i += 1;
                    }
                }
            }
            if !closed {
                diags.push(Diagnostic::new(span(line, start_col, 1), "unterminated string".into()));
            }
            Tok::Str(s)
        } else if c == '$' && chars.get(i + 1) == Some(&'{') {
            i += 2;
            let name_start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            let name: String = chars[name_start..i].iter().collect();
            if chars.get(i) == Some(&'}') && !name.is_empty() {
                i += 1;
            } else {
                diags.push(Diagnostic::new(span(line, start_col, 2), "malformed placeholder".into()));
            }
            Tok::Placeholder(name)
        } else if let Some(p) =
            PUNCT.iter().find(|p| p.chars().enumerate().all(|(k, pc)| chars.get(i + k) == Some(&pc)))
        {
            i += p.len();
            Tok::Punct(p)
        } else {
            diags.push(Diagnostic::new(span(line, col, 1), alloc::format!("unexpected character `{c}`")));
            i += 1;
            col += 1;
            continue;
        };
        let length = (i - start) as u32;
        col += length;
        tokens.push(Token { tok, line, column: start_col, length, comments: core::mem::take(&mut comments) });
    }
    tokens.push(Token { tok: Tok::Eof, line, column: col, length: 0, comments });
    (tokens, diags)
}

fn scan_number(chars: &[char], mut i: usize) -> usize {
    if chars[i] == '-' || chars[i] == '+' {
        i += 1;
    }
    let digits = |i: &mut usize| {
        while *i < chars.len() && chars[*i].is_ascii_digit() {
            *i += 1;
        }
    };
    digits(&mut i);
    if chars.get(i) == Some(&'.') && chars.get(i + 1).is_some_and(|d| d.is_ascii_digit()) {
        i += 1;
        digits(&mut i);
    }
    if matches!(chars.get(i), Some('e' | 'E')) {
        let mut j = i + 1;
        if matches!(chars.get(j), Some('-' | '+')) {
            j += 1;
        }
        if chars.get(j).is_some_and(|d| d.is_ascii_digit()) {
            i = j;
            digits(&mut i);
        }
    }
    i
}
