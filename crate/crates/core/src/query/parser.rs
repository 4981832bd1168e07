use crate::geometry::Vec2;
use crate::safety::{Behavior, ConstraintId, Side};

use super::lexer::{tokenize, Tok, Token};
use super::{Query, QueryAst, Referent, StateDelta};

pub const GRAMMAR_HELP: &str = "accepted forms: why [stop|pause|slow|follow], \
why not <continue|slowdown|stop|pause|manual>, \
what if <delta> [and <delta> ...], was it [<id>|it], do it, follow, resume; \
any of them may end with `at <tick>`. \
Deltas: worker to x,y | worker by dx,dy | worker back d | worker distance d | \
remove <id>|it | move <id>|it by dx,dy | guide left|right | visibility v";

const QUERY_STARTS: &[&str] = &["why", "whynot", "whatif", "what", "was", "do", "follow", "resume"];
const BEHAVIORS: &[&str] = &["continue", "slowdown", "stop", "pause", "manual"];
const DELTA_STARTS: &[&str] = &["worker", "remove", "move", "guide", "visibility"];
const WORKER_OPS: &[&str] = &["to", "by", "back", "distance"];

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ParseError {
    #[error("empty query; {GRAMMAR_HELP}")]
    Empty,
    #[error("unexpected character `{found}` at position {position}")]
    UnexpectedChar { position: usize, found: char },
    #[error("malformed number `{text}` at position {position}: {reason}")]
    BadNumber {
        position: usize,
        text: String,
        reason: String,
    },
    #[error("unexpected `{found}` at position {position}, expected {expected}{}", hint(.suggestion))]
    Unexpected {
        position: usize,
        found: String,
        expected: String,
        suggestion: Option<String>,
    },
    #[error("query ends early at position {position}, expected {expected}")]
    UnexpectedEnd { position: usize, expected: String },
    #[error("invalid value at position {position}: {message}")]
    InvalidValue { position: usize, message: String },
}

fn hint(suggestion: &Option<String>) -> String {
    match suggestion {
        Some(s) => format!("; did you mean `{s}`?"),
        None => String::new(),
    }
}

impl ParseError {
    /// Byte offset of the offending input, when there is one.
    pub fn position(&self) -> Option<usize> {
        match self {
            ParseError::Empty => None,
            ParseError::UnexpectedChar { position, .. }
            | ParseError::BadNumber { position, .. }
            | ParseError::Unexpected { position, .. }
            | ParseError::UnexpectedEnd { position, .. }
            | ParseError::InvalidValue { position, .. } => Some(*position),
        }
    }

    pub fn suggestion(&self) -> Option<&str> {
        match self {
            ParseError::Unexpected { suggestion, .. } => suggestion.as_deref(),
            _ => None,
        }
    }
}

/// Closest candidate within edit distance 2.
fn suggest(word: &str, candidates: &[&str]) -> Option<String> {
    let word = word.to_lowercase();
    candidates
        .iter()
        .map(|c| (strsim::damerau_levenshtein(&word, c), *c))
        .filter(|(d, _)| *d <= 2)
        .min()
        .map(|(_, c)| c.to_string())
}

fn list(words: &[&str]) -> String {
    words.iter().map(|w| format!("`{w}`")).collect::<Vec<_>>().join(", ")
}

struct Parser<'a> {
    tokens: Vec<Token>,
    idx: usize,
    input: &'a str,
}

impl Parser<'_> {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.idx)
    }

    fn peek_word(&self) -> Option<String> {
        match self.peek() {
            Some(Token { tok: Tok::Word(w), .. }) => Some(w.to_lowercase()),
            _ => None,
        }
    }

    fn end_pos(&self) -> usize {
        self.input.trim_end().trim_end_matches('?').trim_end().len()
    }

    fn unexpected(&self, expected: String, candidates: &[&str]) -> ParseError {
        match self.peek() {
            None => ParseError::UnexpectedEnd {
                position: self.end_pos(),
                expected,
            },
            Some(t) => ParseError::Unexpected {
                position: t.pos,
                found: t.text.clone(),
                expected,
                suggestion: match &t.tok {
                    Tok::Word(w) => suggest(w, candidates),
                    _ => None,
                },
            },
        }
    }

    /// Consumes a keyword from `set` and returns it lowercased.
    fn keyword(&mut self, set: &[&str], expected: &str) -> Result<String, ParseError> {
        match self.peek_word() {
            Some(w) if set.contains(&w.as_str()) => {
                self.idx += 1;
                Ok(w)
            }
            _ => Err(self.unexpected(expected.to_string(), set)),
        }
    }

    fn number(&mut self, what: &str) -> Result<(f64, usize), ParseError> {
        match self.peek() {
            Some(Token { tok: Tok::Number(v), pos, .. }) => {
                let out = (*v, *pos);
                self.idx += 1;
                Ok(out)
            }
            _ => Err(self.unexpected(what.to_string(), &[])),
        }
    }

    fn punct(&mut self, tok: Tok, what: &str) -> Result<(), ParseError> {
        if self.peek().map(|t| &t.tok) == Some(&tok) {
            self.idx += 1;
            Ok(())
        } else {
            Err(self.unexpected(what.to_string(), &[]))
        }
    }

    fn pair(&mut self) -> Result<Vec2, ParseError> {
        if self.peek().map(|t| &t.tok) == Some(&Tok::LParen) {
            self.idx += 1;
            let (x, _) = self.number("a number")?;
            self.punct(Tok::Comma, "`,`")?;
            let (y, _) = self.number("a number")?;
            self.punct(Tok::RParen, "`)`")?;
            return Ok(Vec2::new(x, y));
        }
        let (x, _) = self.number("a coordinate pair such as `1.5,-2`")?;
        if self.peek().map(|t| &t.tok) == Some(&Tok::Comma) {
            self.idx += 1;
        }
        let (y, _) = self.number("a second coordinate")?;
        Ok(Vec2::new(x, y))
    }

    fn referent(&mut self) -> Result<Referent, ParseError> {
        match self.peek() {
            Some(Token { tok: Tok::Word(w), .. }) => {
                let r = if w.eq_ignore_ascii_case("it") {
                    Referent::It
                } else {
                    Referent::Entity(w.clone())
                };
                self.idx += 1;
                Ok(r)
            }
            _ => Err(self.unexpected("an entity id or `it`".into(), &[])),
        }
    }

    fn behavior(&mut self) -> Result<Behavior, ParseError> {
        let w = self.keyword(
            &[BEHAVIORS, &["slow_down", "manual-follow", "manual_follow"]].concat(),
            &format!("a behavior ({})", list(BEHAVIORS)),
        )?;
        Ok(w.parse().expect("keyword set matches Behavior::from_str"))
    }

    fn delta(&mut self) -> Result<StateDelta, ParseError> {
        let head = self.keyword(DELTA_STARTS, &format!("a change ({})", list(DELTA_STARTS)))?;
        Ok(match head.as_str() {
            "worker" => {
                let op = self.keyword(WORKER_OPS, &format!("{} after `worker`", list(WORKER_OPS)))?;
                match op.as_str() {
                    "to" => StateDelta::SetWorkerPosition { to: self.pair()? },
                    "by" => StateDelta::MoveWorkerBy { by: self.pair()? },
                    "back" => StateDelta::MoveWorkerAway {
                        meters: self.number("a distance in meters")?.0,
                    },
                    _ => {
                        let (meters, pos) = self.number("a distance in meters")?;
                        if meters < 0.0 {
                            return Err(ParseError::InvalidValue {
                                position: pos,
                                message: format!("distance {meters} is negative"),
                            });
                        }
                        StateDelta::SetWorkerDistance { meters }
                    }
                }
            }
            "remove" => StateDelta::RemoveOccluder { id: self.referent()? },
            "move" => {
                let id = self.referent()?;
                self.keyword(&["by"], "`by`")?;
                StateDelta::MoveOccluderBy { id, by: self.pair()? }
            }
            "guide" => {
                let side = self.keyword(&["left", "right"], "`left` or `right`")?;
                StateDelta::EnterGuidanceZone {
                    side: if side == "left" { Side::Left } else { Side::Right },
                }
            }
            _ => {
                let (value, pos) = self.number("a visibility value in [0, 1]")?;
                if !(0.0..=1.0).contains(&value) {
                    return Err(ParseError::InvalidValue {
                        position: pos,
                        message: format!("visibility {value} is outside [0, 1]"),
                    });
                }
                StateDelta::SetVisibility { value }
            }
        })
    }

    fn query(&mut self) -> Result<Query, ParseError> {
        let expected = format!("the start of a query ({})", "why, why not, what if, was it, do it, follow, resume");
        let head = self.keyword(QUERY_STARTS, &expected)?;
        Ok(match head.as_str() {
            "why" => match self.peek_word().as_deref() {
                Some("not") => {
                    self.idx += 1;
                    Query::WhyNot {
                        alternative: self.behavior()?,
                    }
                }
                Some(w @ ("stop" | "pause" | "slow" | "slowdown" | "follow" | "manual")) => {
                    let target = match w {
                        "stop" => ConstraintId::Proximity,
                        "follow" | "manual" => ConstraintId::GuidanceZone,
                        _ => ConstraintId::Visibility,
                    };
                    self.idx += 1;
                    Query::Why { target: Some(target) }
                }
                _ => Query::Why { target: None },
            },
            "whynot" => Query::WhyNot {
                alternative: self.behavior()?,
            },
            "what" | "whatif" => {
                if head == "what" {
                    self.keyword(&["if"], "`if`")?;
                }
                let mut deltas = vec![self.delta()?];
                while self.peek_word().as_deref() == Some("and") {
                    self.idx += 1;
                    deltas.push(self.delta()?);
                }
                Query::WhatIf { deltas }
            }
            "was" => {
                self.keyword(&["it"], "`it`")?;
                match self.peek_word() {
                    Some(w) if w != "at" => Query::Confirm {
                        referent: self.referent()?,
                    },
                    _ => Query::Confirm { referent: Referent::It },
                }
            }
            "do" => {
                self.keyword(&["it"], "`it`")?;
                Query::Command { behavior: None }
            }
            "follow" => Query::Command {
                behavior: Some(Behavior::ManualFollow),
            },
            _ => Query::Command {
                behavior: Some(Behavior::Continue),
            },
        })
    }

    fn at_clause(&mut self, allow_and: bool) -> Result<Option<i64>, ParseError> {
        let mut at = None;
        if self.peek_word().as_deref() == Some("at") {
            self.idx += 1;
            let tok = self.peek().cloned();
            let (value, pos) = self.number("a tick number")?;
            let text = tok.map(|t| t.text).unwrap_or_default();
            let digits = text.strip_prefix(['-', '+']).unwrap_or(&text);
            if !digits.chars().all(|c| c.is_ascii_digit()) || value.abs() > i64::MAX as f64 {
                return Err(ParseError::InvalidValue {
                    position: pos,
                    message: format!("tick `{text}` is not an integer"),
                });
            }
            at = Some(text.parse::<i64>().map_err(|_| ParseError::InvalidValue {
                position: pos,
                message: format!("tick `{text}` is out of range"),
            })?);
        }
        if self.peek().is_some() {
            let (expected, candidates): (&str, &[&str]) = match (allow_and, at.is_some()) {
                (_, true) => ("end of query", &[]),
                (true, false) => ("`and`, `at <tick>` or end of query", &["and", "at"]),
                (false, false) => ("`at <tick>` or end of query", &["at"]),
            };
            return Err(self.unexpected(expected.into(), candidates));
        }
        Ok(at)
    }
}

/// Parses one dialogue turn.
pub fn parse(input: &str) -> Result<QueryAst, ParseError> {
    let tokens = tokenize(input)?;
    if tokens.is_empty() {
        return Err(ParseError::Empty);
    }
    let mut p = Parser { tokens, idx: 0, input };
    let query = p.query()?;
    let at = p.at_clause(matches!(query, Query::WhatIf { .. }))?;
    Ok(QueryAst { query, at })
}
