//! Closed arithmetic grammar for coordinate expressions emitted by the
//! language model.
//!
//! ```text
//! expr    := term (('+' | '-') term)*
//! term    := factor (('*' | '/') factor)*
//! factor  := '-' factor | number | '(' expr ')'
//! number  := digits ['.' digits*] | '.' digits
//! ```
//!
//! Identifiers, calls and every other token are rejected, so evaluation has
//! no access to names or state.

use std::fmt;

use thiserror::Error;

/// Maximum parenthesis / unary nesting accepted by the parser.
pub const MAX_DEPTH: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum BinaryOp {
    Add,
    Sub,
    Mul,
    Div,
}

impl BinaryOp {
    fn symbol(self) -> char {
        match self {
            BinaryOp::Add => '+',
            BinaryOp::Sub => '-',
            BinaryOp::Mul => '*',
            BinaryOp::Div => '/',
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Number(f64),
    Neg(Box<Expr>),
    Binary {
        op: BinaryOp,
        lhs: Box<Expr>,
        rhs: Box<Expr>,
    },
    Group(Box<Expr>),
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Number(n) => write!(f, "{n}"),
            Expr::Neg(inner) => write!(f, "-{inner}"),
            Expr::Binary { op, lhs, rhs } => write!(f, "{lhs} {} {rhs}", op.symbol()),
            Expr::Group(inner) => write!(f, "({inner})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("empty expression")]
    Empty,
    #[error("unexpected {found} at byte {position}")]
    UnexpectedToken { position: usize, found: String },
    #[error("unexpected end of input at byte {position}")]
    UnexpectedEnd { position: usize },
    #[error("unbalanced parenthesis at byte {position}")]
    UnbalancedParen { position: usize },
    #[error("expression nested deeper than {MAX_DEPTH} at byte {position}")]
    TooDeep { position: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum EvalError {
    #[error("division by zero")]
    DivisionByZero,
}

/// Error from [`eval_str`], which parses and evaluates in one step.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ExprError {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Token {
    Number(f64),
    Plus,
    Minus,
    Star,
    Slash,
    LParen,
    RParen,
}

struct Lexer<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Lexer<'a> {
    fn new(bytes: &'a [u8]) -> Self {
        Self { bytes, pos: 0 }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    /// Returns the next token with its starting offset, or `None` at end.
    fn next_token(&mut self) -> Result<Option<(usize, Token)>, ParseError> {
        self.skip_ws();
        let start = self.pos;
        let Some(&b) = self.bytes.get(start) else {
            return Ok(None);
        };
        let token = match b {
            b'+' => Token::Plus,
            b'-' => Token::Minus,
            b'*' => Token::Star,
            b'/' => Token::Slash,
            b'(' => Token::LParen,
            b')' => Token::RParen,
            b'0'..=b'9' | b'.' => return self.number(start).map(Some),
            _ => {
                return Err(ParseError::UnexpectedToken {
                    position: start,
                    found: describe_byte(self.bytes, start),
                })
            }
        };
        self.pos += 1;
        Ok(Some((start, token)))
    }

    fn number(&mut self, start: usize) -> Result<(usize, Token), ParseError> {
        let mut end = start;
        let mut int_digits = 0;
        while end < self.bytes.len() && self.bytes[end].is_ascii_digit() {
            end += 1;
            int_digits += 1;
        }
        let mut frac_digits = 0;
        if end < self.bytes.len() && self.bytes[end] == b'.' {
            end += 1;
            while end < self.bytes.len() && self.bytes[end].is_ascii_digit() {
                end += 1;
                frac_digits += 1;
            }
        }
        if int_digits + frac_digits == 0 {
            return Err(ParseError::UnexpectedToken {
                position: start,
                found: "'.'".to_string(),
            });
        }
        // Only ASCII digits and at most one '.', so this is valid UTF-8 and a
        // valid float literal.
        let text = std::str::from_utf8(&self.bytes[start..end]).expect("ascii literal");
        let value: f64 = text.parse().expect("digit literal parses");
        self.pos = end;
        Ok((start, Token::Number(value)))
    }
}

fn describe_byte(bytes: &[u8], at: usize) -> String {
    let b = bytes[at];
    if b.is_ascii_graphic() {
        format!("'{}'", b as char)
    } else {
        format!("byte 0x{b:02x}")
    }
}

fn describe_token(token: Token) -> String {
    match token {
        Token::Number(n) => format!("number {n}"),
        Token::Plus => "'+'".into(),
        Token::Minus => "'-'".into(),
        Token::Star => "'*'".into(),
        Token::Slash => "'/'".into(),
        Token::LParen => "'('".into(),
        Token::RParen => "')'".into(),
    }
}

struct Parser<'a> {
    lexer: Lexer<'a>,
    peeked: Option<Option<(usize, Token)>>,
    depth: usize,
}

impl<'a> Parser<'a> {
    fn peek(&mut self) -> Result<Option<(usize, Token)>, ParseError> {
        if let Some(tok) = self.peeked {
            return Ok(tok);
        }
        let tok = self.lexer.next_token()?;
        self.peeked = Some(tok);
        Ok(tok)
    }

    fn bump(&mut self) -> Result<Option<(usize, Token)>, ParseError> {
        let tok = self.peek()?;
        self.peeked = None;
        Ok(tok)
    }

    fn end_position(&self) -> usize {
        self.lexer.bytes.len()
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek()? {
                Some((_, Token::Plus)) => BinaryOp::Add,
                Some((_, Token::Minus)) => BinaryOp::Sub,
                _ => return Ok(lhs),
            };
            self.bump()?;
            let rhs = self.term()?;
            lhs = Expr::Binary {
                op,
                lhs: Box::new(lhs),
                rhs: Box::new(rhs),
            };
        }
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.factor()?;
        loop {
            let op = match self.peek()? {
                Some((_, Token::Star)) => BinaryOp::Mul,
                Some((_, Token::Slash)) => BinaryOp::Div,
                _ => return Ok(lhs),
            };
            self.bump()?;
            let rhs = self.factor()?;
            lhs = Expr::Binary {
                op,
                lhs: Box::new(lhs),
                rhs: Box::new(rhs),
            };
        }
    }

    fn factor(&mut self) -> Result<Expr, ParseError> {
        match self.bump()? {
            None => Err(ParseError::UnexpectedEnd {
                position: self.end_position(),
            }),
            Some((_, Token::Number(n))) => Ok(Expr::Number(n)),
            Some((pos, Token::Minus)) => {
                let inner = self.nested(pos, Self::factor)?;
                Ok(Expr::Neg(Box::new(inner)))
            }
            Some((pos, Token::LParen)) => {
                let inner = self.nested(pos, Self::expr)?;
                match self.bump()? {
                    Some((_, Token::RParen)) => Ok(Expr::Group(Box::new(inner))),
                    None => Err(ParseError::UnbalancedParen { position: pos }),
                    Some((at, tok)) => Err(ParseError::UnexpectedToken {
                        position: at,
                        found: describe_token(tok),
                    }),
                }
            }
            Some((pos, Token::RParen)) => Err(ParseError::UnbalancedParen { position: pos }),
            Some((pos, tok)) => Err(ParseError::UnexpectedToken {
                position: pos,
                found: describe_token(tok),
            }),
        }
    }

    fn nested(
        &mut self,
        position: usize,
        rule: fn(&mut Self) -> Result<Expr, ParseError>,
    ) -> Result<Expr, ParseError> {
        if self.depth >= MAX_DEPTH {
            return Err(ParseError::TooDeep { position });
        }
        self.depth += 1;
        let out = rule(self);
        self.depth -= 1;
        out
    }
}

/// Parses an expression from arbitrary bytes. Never panics.
pub fn parse_bytes(input: &[u8]) -> Result<Expr, ParseError> {
    let mut parser = Parser {
        lexer: Lexer::new(input),
        peeked: None,
        depth: 0,
    };
    if parser.peek()?.is_none() {
        return Err(ParseError::Empty);
    }
    let ast = parser.expr()?;
    match parser.bump()? {
        None => Ok(ast),
        Some((pos, Token::RParen)) => Err(ParseError::UnbalancedParen { position: pos }),
        Some((pos, tok)) => Err(ParseError::UnexpectedToken {
            position: pos,
            found: describe_token(tok),
        }),
    }
}

pub fn parse(input: &str) -> Result<Expr, ParseError> {
    parse_bytes(input.as_bytes())
}

/// Evaluates with IEEE double semantics. Division is real-valued.
pub fn evaluate(ast: &Expr) -> Result<f64, EvalError> {
    match ast {
        Expr::Number(n) => Ok(*n),
        Expr::Neg(inner) => Ok(-evaluate(inner)?),
        Expr::Group(inner) => evaluate(inner),
        Expr::Binary { op, lhs, rhs } => {
            let a = evaluate(lhs)?;
            let b = evaluate(rhs)?;
            Ok(match op {
                BinaryOp::Add => a + b,
                BinaryOp::Sub => a - b,
                BinaryOp::Mul => a * b,
                BinaryOp::Div => {
                    if b == 0.0 {
                        return Err(EvalError::DivisionByZero);
                    }
                    a / b
                }
            })
        }
    }
}

pub fn eval_str(input: &str) -> Result<f64, ExprError> {
    Ok(evaluate(&parse(input)?)?)
}
