use super::SableError;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Tok {
    Name(String),
    Int(i64),
    Str(String),
    Op(&'static str),
    Newline,
    Indent,
    Dedent,
    Eof,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub tok: Tok,
    pub line: usize,
    pub col: usize,
}

const OPS: &[&str] = &[
    "//=", "**", "//", "==", "!=", "<=", ">=", "|=", "&=", "-=", "+=", "->", "(", ")", "[", "]",
    "{", "}", ",", ":", ";", ".", "=", "<", ">", "|", "&", "-", "+", "*", "/", "%", "^", "~",
];

const TAB: usize = 8;

fn err(line: usize, col: usize, message: impl Into<String>) -> SableError {
    SableError::Syntax {
        line,
        column: col,
        message: message.into(),
    }
}

/// Python-style tokenization with INDENT/DEDENT and implicit joining inside brackets.
pub fn tokenize(text: &str) -> Result<Vec<Token>, SableError> {
    let mut out = Vec::new();
    let mut indents = vec![0usize];
    let mut depth = 0usize;
    let mut continued = false;
    let mut last_line = 0;

    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        last_line = line;
        let chars: Vec<char> = raw.chars().collect();
        let mut i = 0;

        if depth == 0 && !continued {
            let mut width = 0;
            while i < chars.len() && (chars[i] == ' ' || chars[i] == '\t') {
                width = if chars[i] == '\t' {
                    (width / TAB + 1) * TAB
                } else {
                    width + 1
                };
                i += 1;
            }
            if i == chars.len() || chars[i] == '#' || chars[i] == '\r' {
                continue;
            }
            let top = *indents.last().unwrap_or(&0);
            if width > top {
                indents.push(width);
                out.push(Token {
                    tok: Tok::Indent,
                    line,
                    col: 1,
                });
            } else if width < top {
                while width < *indents.last().unwrap_or(&0) {
                    indents.pop();
                    out.push(Token {
                        tok: Tok::Dedent,
                        line,
                        col: 1,
                    });
                }
                if width != *indents.last().unwrap_or(&0) {
                    return Err(err(line, i + 1, "inconsistent dedent"));
                }
            }
        }
        continued = false;
        let mut emitted = false;

        while i < chars.len() {
            let c = chars[i];
            let col = i + 1;
            if c == ' ' || c == '\t' || c == '\r' {
                i += 1;
                continue;
            }
            if c == '#' {
                break;
            }
            if c == '\\' && chars[i + 1..].iter().all(|c| c.is_whitespace()) {
                continued = true;
                break;
            }
            emitted = true;
            if c.is_alphabetic() || c == '_' {
                let start = i;
                while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_') {
                    i += 1;
                }
                let word: String = chars[start..i].iter().collect();
                if i < chars.len() && (chars[i] == '\'' || chars[i] == '"') && is_prefix(&word) {
                    let (s, next) =
                        string(&chars, i, line, word.to_ascii_lowercase().contains('r'))?;
                    out.push(Token {
                        tok: Tok::Str(s),
                        line,
                        col,
                    });
                    i = next;
                } else {
                    out.push(Token {
                        tok: Tok::Name(word),
                        line,
                        col,
                    });
                }
                continue;
            }
            if c.is_ascii_digit() {
                let start = i;
                while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                    i += 1;
                }
                let lit: String = chars[start..i].iter().filter(|&&c| c != '_').collect();
                let value = parse_int(&lit)
                    .ok_or_else(|| err(line, col, format!("invalid integer literal `{lit}`")))?;
                out.push(Token {
                    tok: Tok::Int(value),
                    line,
                    col,
                });
                continue;
            }
            if c == '\'' || c == '"' {
                let (s, next) = string(&chars, i, line, false)?;
                out.push(Token {
                    tok: Tok::Str(s),
                    line,
                    col,
                });
                i = next;
                continue;
            }
            let rest: String = chars[i..chars.len().min(i + 3)].iter().collect();
            match OPS.iter().find(|op| rest.starts_with(*op)) {
                Some(op) => {
                    match *op {
                        "(" | "[" | "{" => depth += 1,
                        ")" | "]" | "}" => {
                            depth = depth
                                .checked_sub(1)
                                .ok_or_else(|| err(line, col, format!("unmatched `{op}`")))?
                        }
                        _ => {}
                    }
                    out.push(Token {
                        tok: Tok::Op(op),
                        line,
                        col,
                    });
                    i += op.len();
                }
                None => return Err(err(line, col, format!("unexpected character `{c}`"))),
            }
        }
        if emitted && depth == 0 && !continued {
            out.push(Token {
                tok: Tok::Newline,
                line,
                col: chars.len() + 1,
            });
        }
    }
    if depth > 0 {
        return Err(err(last_line, 1, "unexpected end of file inside brackets"));
    }
    let end = last_line + 1;
    if out
        .last()
        .is_some_and(|t| t.tok != Tok::Newline && t.tok != Tok::Dedent)
    {
        out.push(Token {
            tok: Tok::Newline,
            line: end,
            col: 1,
        });
    }
    while indents.len() > 1 {
        indents.pop();
        out.push(Token {
            tok: Tok::Dedent,
            line: end,
            col: 1,
        });
    }
    out.push(Token {
        tok: Tok::Eof,
        line: end,
        col: 1,
    });
    Ok(out)
}

fn is_prefix(word: &str) -> bool {
    matches!(
        word.to_ascii_lowercase().as_str(),
        "r" | "u" | "b" | "br" | "rb"
    )
}

fn parse_int(lit: &str) -> Option<i64> {
    let lower = lit.to_ascii_lowercase();
    let (digits, radix) = match lower.get(..2) {
        Some("0x") => (&lower[2..], 16),
        Some("0o") => (&lower[2..], 8),
        Some("0b") => (&lower[2..], 2),
        _ => (lower.as_str(), 10),
    };
    i64::from_str_radix(digits, radix).ok()
}

fn string(
    chars: &[char],
    start: usize,
    line: usize,
    raw: bool,
) -> Result<(String, usize), SableError> {
    let quote = chars[start];
    let mut s = String::new();
    let mut i = start + 1;
    while i < chars.len() {
        let c = chars[i];
        if c == quote {
            return Ok((s, i + 1));
        }
        if c == '\\' && i + 1 < chars.len() {
            let n = chars[i + 1];
            if raw {
                s.push(c);
                s.push(n);
            } else {
                match n {
                    'n' => s.push('\n'),
                    't' => s.push('\t'),
                    'r' => s.push('\r'),
                    '0' => s.push('\0'),
                    '\\' | '\'' | '"' => s.push(n),
                    other => {
                        s.push('\\');
                        s.push(other);
                    }
                }
            }
            i += 2;
            continue;
        }
        s.push(c);
        i += 1;
    }
    Err(err(line, start + 1, "unterminated string literal"))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kinds(text: &str) -> Vec<Tok> {
        tokenize(text).unwrap().into_iter().map(|t| t.tok).collect()
    }

    #[test]
    fn indentation_and_comments() {
        let toks = kinds("a:\n\tb = 1 # c\n\n\t# only\nc\n");
        assert_eq!(
            toks,
            vec![
                Tok::Name("a".into()),
                Tok::Op(":"),
                Tok::Newline,
                Tok::Indent,
                Tok::Name("b".into()),
                Tok::Op("="),
                Tok::Int(1),
                Tok::Newline,
                Tok::Dedent,
                Tok::Name("c".into()),
                Tok::Newline,
                Tok::Eof,
            ]
        );
    }

    #[test]
    fn brackets_join_lines() {
        let toks = kinds("f(a,\n      b)\n");
        assert_eq!(toks.iter().filter(|t| **t == Tok::Newline).count(), 1);
        assert!(!toks.contains(&Tok::Indent));
    }

    #[test]
    fn literals() {
        assert_eq!(kinds("0o77")[0], Tok::Int(63));
        assert_eq!(kinds("'a\\'b'")[0], Tok::Str("a'b".into()));
        assert_eq!(kinds("r'\\d'")[0], Tok::Str("\\d".into()));
        assert_eq!(kinds("x //= 2")[1], Tok::Op("//="));
    }

    #[test]
    fn errors_are_positioned() {
        assert_eq!(
            tokenize("a\n  b\n c\n").unwrap_err(),
            SableError::Syntax {
                line: 3,
                column: 2,
                message: "inconsistent dedent".into()
            }
        );
        assert!(tokenize("'open").is_err());
        assert!(tokenize("a ? b").is_err());
    }
}
