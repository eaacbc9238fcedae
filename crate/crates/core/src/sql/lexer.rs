//! SQL tokenizer.

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
#[error("{message} at byte {position}")]
pub struct LexError {
    pub message: String,
    pub position: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kw {
    Select,
    Distinct,
    From,
    As,
    Inner,
    Left,
    Right,
    Full,
    Outer,
    Cross,
    Join,
    On,
    Where,
    And,
    Or,
    Not,
    In,
    Between,
    Like,
    Is,
    Null,
    Group,
    By,
    Having,
    Order,
    Asc,
    Desc,
    Limit,
    Count,
    Sum,
    Avg,
    Min,
    Max,
    True,
    False,
    Union,
    Intersect,
    Except,
    With,
}

impl Kw {
    pub fn text(&self) -> &'static str {
        match self {
            Kw::Select => "SELECT",
            Kw::Distinct => "DISTINCT",
            Kw::From => "FROM",
            Kw::As => "AS",
            Kw::Inner => "INNER",
            Kw::Left => "LEFT",
            Kw::Right => "RIGHT",
            Kw::Full => "FULL",
            Kw::Outer => "OUTER",
            Kw::Cross => "CROSS",
            Kw::Join => "JOIN",
            Kw::On => "ON",
            Kw::Where => "WHERE",
            Kw::And => "AND",
            Kw::Or => "OR",
            Kw::Not => "NOT",
            Kw::In => "IN",
            Kw::Between => "BETWEEN",
            Kw::Like => "LIKE",
            Kw::Is => "IS",
            Kw::Null => "NULL",
            Kw::Group => "GROUP",
            Kw::By => "BY",
            Kw::Having => "HAVING",
            Kw::Order => "ORDER",
            Kw::Asc => "ASC",
            Kw::Desc => "DESC",
            Kw::Limit => "LIMIT",
            Kw::Count => "COUNT",
            Kw::Sum => "SUM",
            Kw::Avg => "AVG",
            Kw::Min => "MIN",
            Kw::Max => "MAX",
            Kw::True => "TRUE",
            Kw::False => "FALSE",
            Kw::Union => "UNION",
            Kw::Intersect => "INTERSECT",
            Kw::Except => "EXCEPT",
            Kw::With => "WITH",
        }
    }
}

fn keyword(word: &str) -> Option<Kw> {
    let up = word.to_ascii_uppercase();
    let kw = match up.as_str() {
        "SELECT" => Kw::Select,
        "DISTINCT" => Kw::Distinct,
        "FROM" => Kw::From,
        "AS" => Kw::As,
        "INNER" => Kw::Inner,
        "LEFT" => Kw::Left,
        "RIGHT" => Kw::Right,
        "FULL" => Kw::Full,
        "OUTER" => Kw::Outer,
        "CROSS" => Kw::Cross,
        "JOIN" => Kw::Join,
        "ON" => Kw::On,
        "WHERE" => Kw::Where,
        "AND" => Kw::And,
        "OR" => Kw::Or,
        "NOT" => Kw::Not,
        "IN" => Kw::In,
        "BETWEEN" => Kw::Between,
        "LIKE" => Kw::Like,
        "IS" => Kw::Is,
        "NULL" => Kw::Null,
        "GROUP" => Kw::Group,
        "BY" => Kw::By,
        "HAVING" => Kw::Having,
        "ORDER" => Kw::Order,
        "ASC" => Kw::Asc,
        "DESC" => Kw::Desc,
        "LIMIT" => Kw::Limit,
        "COUNT" => Kw::Count,
        "SUM" => Kw::Sum,
        "AVG" => Kw::Avg,
        "MIN" => Kw::Min,
        "MAX" => Kw::Max,
        "TRUE" => Kw::True,
        "FALSE" => Kw::False,
        "UNION" => Kw::Union,
        "INTERSECT" => Kw::Intersect,
        "EXCEPT" => Kw::Except,
        "WITH" => Kw::With,
        _ => return None,
    };
    Some(kw)
}

#[derive(Debug, Clone, PartialEq)]
pub enum Tok {
    Ident { text: String, double_quoted: bool },
    Str(String),
    Int(i64),
    Float(f64),
    Kw(Kw),
    Comma,
    Dot,
    LParen,
    RParen,
    Star,
    Plus,
    Minus,
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
    Semi,
}

impl Tok {
    pub fn symbol_text(&self) -> &'static str {
        match self {
            Tok::Comma => ",",
            Tok::Dot => ".",
            Tok::LParen => "(",
            Tok::RParen => ")",
            Tok::Star => "*",
            Tok::Plus => "+",
            Tok::Minus => "-",
            Tok::Eq => "=",
            Tok::Ne => "!=",
            Tok::Lt => "<",
            Tok::Le => "<=",
            Tok::Gt => ">",
            Tok::Ge => ">=",
            Tok::Semi => ";",
            _ => "",
        }
    }
}

/// Tokenizes SQL text. Each token carries its starting byte offset.
pub fn lex(input: &str) -> Result<Vec<(Tok, usize)>, LexError> {
    let bytes = input.as_bytes();
    let mut i = 0usize;
    let mut out = Vec::new();
    while i < bytes.len() {
        let c = bytes[i] as char;
        let start = i;
        match c {
            ' ' | '\t' | '\r' | '\n' => {
                i += 1;
            }
            '-' if i + 1 < bytes.len() && bytes[i + 1] == b'-' => {
                // line comment
                while i < bytes.len() && bytes[i] != b'\n' {
                    i += 1;
                }
            }
            ',' => {
                out.push((Tok::Comma, start));
                i += 1;
            }
            '.' => {
                out.push((Tok::Dot, start));
                i += 1;
            }
            '(' => {
                out.push((Tok::LParen, start));
                i += 1;
            }
            ')' => {
                out.push((Tok::RParen, start));
                i += 1;
            }
            '*' => {
                out.push((Tok::Star, start));
                i += 1;
            }
            '+' => {
                out.push((Tok::Plus, start));
                i += 1;
            }
            '-' => {
                out.push((Tok::Minus, start));
                i += 1;
            }
            ';' => {
                out.push((Tok::Semi, start));
                i += 1;
            }
            '=' => {
                out.push((Tok::Eq, start));
                i += 1;
                if i < bytes.len() && bytes[i] == b'=' {
                    i += 1; // tolerate ==
                }
            }
            '!' => {
                if i + 1 < bytes.len() && bytes[i + 1] == b'=' {
                    out.push((Tok::Ne, start));
                    i += 2;
                } else {
                    return Err(LexError {
                        message: "unexpected `!`".into(),
                        position: start,
                    });
                }
            }
            '<' => {
                if i + 1 < bytes.len() && bytes[i + 1] == b'=' {
                    out.push((Tok::Le, start));
                    i += 2;
                } else if i + 1 < bytes.len() && bytes[i + 1] == b'>' {
                    out.push((Tok::Ne, start));
                    i += 2;
                } else {
                    out.push((Tok::Lt, start));
                    i += 1;
                }
            }
            '>' => {
                if i + 1 < bytes.len() && bytes[i + 1] == b'=' {
                    out.push((Tok::Ge, start));
                    i += 2;
                } else {
                    out.push((Tok::Gt, start));
                    i += 1;
                }
            }
            '\'' => {
                let (s, next) = lex_quoted(input, i, '\'')?;
                out.push((Tok::Str(s), start));
                i = next;
            }
            '"' => {
                let (s, next) = lex_quoted(input, i, '"')?;
                out.push((
                    Tok::Ident {
                        text: s,
                        double_quoted: true,
                    },
                    start,
                ));
                i = next;
            }
            '`' => {
                let (s, next) = lex_quoted(input, i, '`')?;
                out.push((
                    Tok::Ident {
                        text: s,
                        double_quoted: false,
                    },
                    start,
                ));
                i = next;
            }
            '[' => {
                let end = input[i + 1..].find(']').ok_or_else(|| LexError {
                    message: "unterminated `[` identifier".into(),
                    position: start,
                })?;
                out.push((
                    Tok::Ident {
                        text: input[i + 1..i + 1 + end].to_string(),
                        double_quoted: false,
                    },
                    start,
                ));
                i += end + 2;
            }
            '0'..='9' => {
                let (tok, next) = lex_number(input, i)?;
                out.push((tok, start));
                i = next;
            }
            c if c.is_alphabetic() || c == '_' => {
                let mut j = i;
                while j < bytes.len() {
                    let ch = input[j..].chars().next().unwrap();
                    if ch.is_alphanumeric() || ch == '_' || ch == '$' {
                        j += ch.len_utf8();
                    } else {
                        break;
                    }
                }
                let word = &input[i..j];
                match keyword(word) {
                    Some(kw) => out.push((Tok::Kw(kw), start)),
                    None => out.push((
                        Tok::Ident {
                            text: word.to_string(),
                            double_quoted: false,
                        },
                        start,
                    )),
                }
                i = j;
            }
            other => {
                return Err(LexError {
                    message: format!("unexpected character `{other}`"),
                    position: start,
                })
            }
        }
    }
    Ok(out)
}

fn lex_quoted(input: &str, start: usize, quote: char) -> Result<(String, usize), LexError> {
    let mut s = String::new();
    let mut chars = input[start + 1..].char_indices();
    while let Some((off, c)) = chars.next() {
        if c == quote {
            let abs = start + 1 + off;
            // doubled quote escapes itself
            if input[abs + 1..].starts_with(quote) {
                s.push(quote);
                chars.next();
                continue;
            }
            return Ok((s, abs + quote.len_utf8()));
        }
        s.push(c);
    }
    Err(LexError {
        message: format!("unterminated {quote} quote"),
        position: start,
    })
}

fn lex_number(input: &str, start: usize) -> Result<(Tok, usize), LexError> {
    let bytes = input.as_bytes();
    let mut i = start;
    let mut saw_dot = false;
    let mut saw_exp = false;
    while i < bytes.len() {
        match bytes[i] {
            b'0'..=b'9' => i += 1,
            b'.' if !saw_dot && !saw_exp => {
                // a trailing `.` followed by non-digit belongs to the next token
                if i + 1 < bytes.len() && bytes[i + 1].is_ascii_digit() {
                    saw_dot = true;
                    i += 1;
                } else {
                    break;
                }
            }
            b'e' | b'E' if !saw_exp => {
                let mut j = i + 1;
                if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                    j += 1;
                }
                if j < bytes.len() && bytes[j].is_ascii_digit() {
                    saw_exp = true;
                    i = j + 1;
                } else {
                    break;
                }
            }
            _ => break,
        }
    }
    let text = &input[start..i];
    if saw_dot || saw_exp {
        let v: f64 = text.parse().map_err(|_| LexError {
            message: format!("bad numeric literal `{text}`"),
            position: start,
        })?;
        Ok((Tok::Float(v), i))
    } else {
        match text.parse::<i64>() {
            Ok(v) => Ok((Tok::Int(v), i)),
            Err(_) => {
                let v: f64 = text.parse().map_err(|_| LexError {
                    message: format!("bad numeric literal `{text}`"),
                    position: start,
                })?;
                Ok((Tok::Float(v), i))
            }
        }
    }
}
