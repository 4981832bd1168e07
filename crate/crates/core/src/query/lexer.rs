use super::ParseError;

#[derive(Debug, Clone, PartialEq)]
pub(super) enum Tok {
    /// Original spelling; keyword matching lowercases it.
    Word(String),
    Number(f64),
    Comma,
    LParen,
    RParen,
}

#[derive(Debug, Clone, PartialEq)]
pub(super) struct Token {
    pub tok: Tok,
    /// Byte offset in the input.
    pub pos: usize,
    pub text: String,
}

fn number_start(c: char, next: Option<char>) -> bool {
    c.is_ascii_digit()
        || ((c == '-' || c == '+' || c == '.') && next.is_some_and(|n| n.is_ascii_digit() || n == '.'))
}

pub(super) fn tokenize(input: &str) -> Result<Vec<Token>, ParseError> {
    let chars: Vec<(usize, char)> = input.char_indices().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let (pos, c) = chars[i];
        let next = chars.get(i + 1).map(|(_, c)| *c);
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        if c == '?' && chars[i + 1..].iter().all(|(_, c)| c.is_whitespace() || *c == '?') {
            break;
        }
        let single = match c {
            ',' => Some(Tok::Comma),
            '(' => Some(Tok::LParen),
            ')' => Some(Tok::RParen),
            _ => None,
        };
        if let Some(tok) = single {
            out.push(Token { tok, pos, text: c.to_string() });
            i += 1;
            continue;
        }
        if number_start(c, next) {
            i += 1;
            while i < chars.len() {
                let ch = chars[i].1;
                let prev = chars[i - 1].1;
                let signed_exp = (ch == '-' || ch == '+') && (prev == 'e' || prev == 'E');
                if ch.is_ascii_digit() || ch == '.' || ch == 'e' || ch == 'E' || signed_exp {
                    i += 1;
                } else {
                    break;
                }
            }
            let end = chars.get(i).map_or(input.len(), |(p, _)| *p);
            let text = &input[pos..end];
            // A number glued to letters ("3m", "1x2") is malformed.
            if let Some((_, ch)) = chars.get(i) {
                if ch.is_alphanumeric() || *ch == '_' || *ch == '-' || *ch == '+' {
                    let mut j = i;
                    while j < chars.len() && !chars[j].1.is_whitespace() && !matches!(chars[j].1, ',' | '(' | ')') {
                        j += 1;
                    }
                    let end = chars.get(j).map_or(input.len(), |(p, _)| *p);
                    return Err(ParseError::BadNumber {
                        position: pos,
                        text: input[pos..end].to_string(),
                        reason: "not a number".into(),
                    });
                }
            }
            let value: f64 = text.parse().map_err(|_| ParseError::BadNumber {
                position: pos,
                text: text.to_string(),
                reason: "not a number".into(),
            })?;
            if !value.is_finite() {
                return Err(ParseError::BadNumber {
                    position: pos,
                    text: text.to_string(),
                    reason: "out of range".into(),
                });
            }
            out.push(Token {
                tok: Tok::Number(value),
                pos,
                text: text.to_string(),
            });
            continue;
        }
        if c.is_alphabetic() || c == '_' {
            let mut j = i + 1;
            while j < chars.len() {
                let ch = chars[j].1;
                if ch.is_alphanumeric() || ch == '_' || ch == '-' {
                    j += 1;
                } else {
                    break;
                }
            }
            let end = chars.get(j).map_or(input.len(), |(p, _)| *p);
            let text = &input[pos..end];
            out.push(Token {
                tok: Tok::Word(text.to_string()),
                pos,
                text: text.to_string(),
            });
            i = j;
            continue;
        }
        return Err(ParseError::UnexpectedChar { position: pos, found: c });
    }
    Ok(out)
}
