use crate::error::{Error, Result};

use super::ast::Pos;

#[derive(Debug, Clone, PartialEq)]
pub enum Tok {
    Ident(String),
    /// `@@name`
    Global(String),
    /// `$name`
    Param(String),
    Int(i64),
    /// Raw text, so vector elements can be parsed straight to `f32`.
    Float(String),
    Str(String),
    Sym(&'static str),
    Eof,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Token {
    pub tok: Tok,
    pub pos: Pos,
}

const SYMBOLS: &[&str] = &[
    "==", "!=", "<=", ">=", "+=", "(", ")", "{", "}", "[", "]", ",", ";", ":", ".", "=", "<", ">",
    "-", "|",
];

pub fn lex(src: &str) -> Result<Vec<Token>> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1usize, 1usize);
    let err = |line, column, message: String| Error::Syntax {
        line,
        column,
        message,
    };

    macro_rules! bump {
        () => {{
            if chars[i] == '\n' {
                line += 1;
                col = 1;
            } else {
                col += 1;
            }
            i += 1;
        }};
    }

    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            bump!();
            continue;
        }
        if c == '-' && chars.get(i + 1) == Some(&'-') {
            while i < chars.len() && chars[i] != '\n' {
                bump!();
            }
            continue;
        }
        if c == '/' && chars.get(i + 1) == Some(&'*') {
            let (l, c0) = (line, col);
            bump!();
            bump!();
            loop {
                if i >= chars.len() {
                    return Err(err(l, c0, "unterminated comment".into()));
                }
                if chars[i] == '*' && chars.get(i + 1) == Some(&'/') {
                    bump!();
                    bump!();
                    break;
                }
                bump!();
            }
            continue;
        }
        let pos = Pos { line, col };
        if c.is_ascii_alphabetic() || c == '_' {
            let mut s = String::new();
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                s.push(chars[i]);
                bump!();
            }
            out.push(Token {
                tok: Tok::Ident(s),
                pos,
            });
            continue;
        }
        if c == '@' || c == '$' {
            if c == '@' && chars.get(i + 1) != Some(&'@') {
                return Err(err(line, col, "expected `@@`".into()));
            }
            bump!();
            if c == '@' {
                bump!();
            }
            let mut s = String::new();
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                s.push(chars[i]);
                bump!();
            }
            if s.is_empty() {
                return Err(err(
                    pos.line,
                    pos.col,
                    format!("expected a name after `{c}`"),
                ));
            }
            let tok = if c == '@' {
                Tok::Global(s)
            } else {
                Tok::Param(s)
            };
            out.push(Token { tok, pos });
            continue;
        }
        if c.is_ascii_digit() || (c == '.' && chars.get(i + 1).is_some_and(|d| d.is_ascii_digit()))
        {
            let mut s = String::new();
            let mut float = false;
            while i < chars.len() {
                let d = chars[i];
                if d.is_ascii_digit() {
                    s.push(d);
                } else if d == '.' && !float && chars.get(i + 1).is_some_and(|d| d.is_ascii_digit())
                {
                    float = true;
                    s.push(d);
                } else if (d == 'e' || d == 'E')
                    && (chars.get(i + 1).is_some_and(|d| d.is_ascii_digit())
                        || (matches!(chars.get(i + 1), Some('-' | '+'))
                            && chars.get(i + 2).is_some_and(|d| d.is_ascii_digit())))
                {
                    float = true;
                    s.push(d);
                    bump!();
                    s.push(chars[i]);
                } else {
                    break;
                }
                bump!();
            }
            let tok =
                if float {
                    Tok::Float(s)
                } else {
                    Tok::Int(s.parse().map_err(|_| {
                        err(pos.line, pos.col, format!("integer `{s}` out of range"))
                    })?)
                };
            out.push(Token { tok, pos });
            continue;
        }
        if c == '"' {
            bump!();
            let mut s = String::new();
            loop {
                match chars.get(i) {
                    None | Some('\n') => {
                        return Err(err(pos.line, pos.col, "unterminated string".into()))
                    }
                    Some('"') => {
                        bump!();
                        break;
                    }
                    Some('\\') => {
                        bump!();
                        let e = match chars.get(i) {
                            Some('n') => '\n',
                            Some('t') => '\t',
                            Some('"') => '"',
                            Some('\\') => '\\',
                            _ => return Err(err(line, col, "bad escape".into())),
                        };
                        s.push(e);
                        bump!();
                    }
                    Some(&ch) => {
                        s.push(ch);
                        bump!();
                    }
                }
            }
            out.push(Token {
                tok: Tok::Str(s),
                pos,
            });
            continue;
        }
        let rest: String = chars[i..chars.len().min(i + 2)].iter().collect();
        match SYMBOLS.iter().find(|s| rest.starts_with(**s)) {
            Some(s) => {
                for _ in 0..s.len() {
                    bump!();
                }
                out.push(Token {
                    tok: Tok::Sym(s),
                    pos,
                });
            }
            None => return Err(err(line, col, format!("unexpected character `{c}`"))),
        }
    }
    out.push(Token {
        tok: Tok::Eof,
        pos: Pos { line, col },
    });
    Ok(out)
}
