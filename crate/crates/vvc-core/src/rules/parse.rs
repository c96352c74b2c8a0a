//! Recursive-descent parser for the rule language, one rule per line:
//!
//! ```text
//! If (Voltage is H) and (Tap is not Tap1) then (Taps is -1)(Capacitor is Hold)
//! ```
//!
//! Keywords (`if`, `and`, `is`, `not`, `then`) are case-insensitive;
//! identifiers and set names are case-sensitive. Set names may contain
//! letters, digits, `_`, `-` and `+` (the sign forms like `-2` are set
//! names). Antecedents are joined by `and` only; consequents are one or more
//! juxtaposed clauses with no connective. `#` starts a comment.

use std::fmt;

use serde::Serialize;

use crate::fis::{Assignment, Clause, Rule};

/// Syntax error with a 1-based line/column position and the offending token.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ParseError {
    pub line: usize,
    pub col: usize,
    pub token: String,
    pub message: String,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "line {}, column {}: {} (at '{}')",
            self.line, self.col, self.message, self.token
        )
    }
}

impl std::error::Error for ParseError {}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    LParen,
    RParen,
    Word(String),
}

impl Tok {
    fn text(&self) -> &str {
        match self {
            Tok::LParen => "(",
            Tok::RParen => ")",
            Tok::Word(w) => w,
        }
    }
}

fn is_word_char(ch: char) -> bool {
    ch.is_ascii_alphanumeric() || matches!(ch, '_' | '-' | '+')
}

fn lex(line: &str, line_no: usize) -> Result<Vec<(Tok, usize)>, ParseError> {
    let mut toks = Vec::new();
    let mut chars = line.char_indices().peekable();
    while let Some(&(idx, ch)) = chars.peek() {
        let col = idx + 1;
        match ch {
            '#' => break, // comment to end of line
            c if c.is_whitespace() => {
                chars.next();
            }
            '(' => {
                toks.push((Tok::LParen, col));
                chars.next();
            }
            ')' => {
                toks.push((Tok::RParen, col));
                chars.next();
            }
            c if is_word_char(c) => {
                let mut word = String::new();
                while let Some(&(_, c)) = chars.peek() {
                    if is_word_char(c) {
                        word.push(c);
                        chars.next();
                    } else {
                        break;
                    }
                }
                toks.push((Tok::Word(word), col));
            }
            other => {
                return Err(ParseError {
                    line: line_no,
                    col,
                    token: other.to_string(),
                    message: "unknown token".into(),
                });
            }
        }
    }
    Ok(toks)
}

struct Parser {
    toks: Vec<(Tok, usize)>,
    pos: usize,
    line: usize,
    eol_col: usize,
}

impl Parser {
    fn peek(&self) -> Option<&(Tok, usize)> {
        self.toks.get(self.pos)
    }

    fn next(&mut self) -> Option<(Tok, usize)> {
        let t = self.toks.get(self.pos).cloned();
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn err_here(&self, message: impl Into<String>) -> ParseError {
        match self.peek() {
            Some((tok, col)) => ParseError {
                line: self.line,
                col: *col,
                token: tok.text().to_string(),
                message: message.into(),
            },
            None => ParseError {
                line: self.line,
                col: self.eol_col,
                token: "end of line".into(),
                message: message.into(),
            },
        }
    }

    fn expect_keyword(&mut self, kw: &str) -> Result<(), ParseError> {
        match self.peek() {
            Some((Tok::Word(w), _)) if w.eq_ignore_ascii_case(kw) => {
                self.next();
                Ok(())
            }
            _ => Err(self.err_here(format!("expected '{kw}'"))),
        }
    }

    fn peek_keyword(&self, kw: &str) -> bool {
        matches!(self.peek(), Some((Tok::Word(w), _)) if w.eq_ignore_ascii_case(kw))
    }

    fn expect_lparen(&mut self, what: &str) -> Result<(), ParseError> {
        match self.peek() {
            Some((Tok::LParen, _)) => {
                self.next();
                Ok(())
            }
            _ => Err(self.err_here(format!("expected '(' to open {what}"))),
        }
    }

    fn expect_rparen(&mut self) -> Result<(), ParseError> {
        match self.peek() {
            Some((Tok::RParen, _)) => {
                self.next();
                Ok(())
            }
            _ => Err(self.err_here("expected ')'")),
        }
    }

    fn expect_name(&mut self, what: &str) -> Result<String, ParseError> {
        match self.peek() {
            Some((Tok::Word(w), _)) => {
                if is_keyword(w) {
                    return Err(self.err_here(format!("expected {what}, found keyword")));
                }
                let w = w.clone();
                self.next();
                Ok(w)
            }
            _ => Err(self.err_here(format!("expected {what}"))),
        }
    }

    /// `( VAR is [not] SET )`
    fn clause(&mut self, allow_not: bool) -> Result<(String, String, bool), ParseError> {
        let kind = if allow_not { "condition" } else { "consequent" };
        self.expect_lparen(kind)?;
        let variable = self.expect_name("a variable name")?;
        self.expect_keyword("is")?;
        let mut negated = false;
        if self.peek_keyword("not") {
            if !allow_not {
                return Err(self.err_here("negation is not allowed in a consequent"));
            }
            self.next();
            negated = true;
        }
        let set = self.expect_name("a set name")?;
        self.expect_rparen()?;
        Ok((variable, set, negated))
    }
}

fn is_keyword(word: &str) -> bool {
    ["if", "and", "is", "not", "then"]
        .iter()
        .any(|kw| word.eq_ignore_ascii_case(kw))
}

/// Parse one rule line. `line_no` is used only for error positions.
pub fn parse_rule_line(text: &str, line_no: usize) -> Result<Rule, ParseError> {
    let toks = lex(text, line_no)?;
    let eol_col = text.len() + 1;
    let mut p = Parser {
        toks,
        pos: 0,
        line: line_no,
        eol_col,
    };

    p.expect_keyword("if")?;
    let mut antecedents = Vec::new();
    loop {
        let (variable, set, negated) = p.clause(true)?;
        antecedents.push(Clause {
            variable,
            set,
            negated,
        });
        if p.peek_keyword("and") {
            p.next();
            continue;
        }
        break;
    }
    p.expect_keyword("then")?;

    let mut consequents = Vec::new();
    while matches!(p.peek(), Some((Tok::LParen, _))) {
        let (variable, set, _) = p.clause(false)?;
        consequents.push(Assignment { variable, set });
    }
    if consequents.is_empty() {
        return Err(p.err_here("expected at least one consequent"));
    }
    if p.peek().is_some() {
        return Err(p.err_here("unexpected trailing input"));
    }
    Ok(Rule {
        antecedents,
        consequents,
    })
}

/// Canonical text form; `parse_rule_line(format_rule(r)) == r` for any valid
/// rule, and formatting a parsed canonical line reproduces it byte for byte.
pub fn format_rule(rule: &Rule) -> String {
    let mut out = String::from("If ");
    for (i, clause) in rule.antecedents.iter().enumerate() {
        if i > 0 {
            out.push_str(" and ");
        }
        let verb = if clause.negated { "is not" } else { "is" };
        out.push_str(&format!("({} {} {})", clause.variable, verb, clause.set));
    }
    out.push_str(" then ");
    for assign in &rule.consequents {
        out.push_str(&format!("({} is {})", assign.variable, assign.set));
    }
    out
}

/// A rule plus the 1-based source line it came from.
#[derive(Debug, Clone)]
pub struct ParsedRule {
    pub rule: Rule,
    pub line: usize,
}

/// Parse a whole rule file: one rule per non-empty, non-comment line.
/// Collects every line's error instead of stopping at the first.
pub fn parse_rules_text(src: &str) -> Result<Vec<ParsedRule>, Vec<ParseError>> {
    let mut rules = Vec::new();
    let mut errors = Vec::new();
    for (idx, raw) in src.lines().enumerate() {
        let line_no = idx + 1;
        let stripped = raw.split('#').next().unwrap_or("");
        if stripped.trim().is_empty() {
            continue;
        }
        match parse_rule_line(raw, line_no) {
            Ok(rule) => rules.push(ParsedRule {
                rule,
                line: line_no,
            }),
            Err(e) => errors.push(e),
        }
    }
    if errors.is_empty() {
        Ok(rules)
    } else {
        Err(errors)
    }
}
