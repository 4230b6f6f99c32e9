//! Infix formulas over observation features `x0, x1, ...`.
//!
//! Grammar (usual precedence, left associative):
//!   expr  := term (('+' | '-') term)*
//!   term  := unary (('*' | '/') unary)*
//!   unary := '-' number | '-' unary | primary
//!   primary := number | 'x' digits | '(' expr ')'
//!
//! A minus directly in front of a numeric literal folds into the constant, so
//! `-105.902` is one tunable constant rather than a negation node.

use super::ExprNode;
use crate::decimal;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Var(usize),
    Op(char),
    LParen,
    RParen,
}

fn tokenize(text: &str) -> Result<Vec<Tok>> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        match c {
            c if c.is_whitespace() => i += 1,
            '+' | '-' | '*' | '/' => {
                out.push(Tok::Op(c));
                i += 1;
            }
            '·' | '×' => {
                out.push(Tok::Op('*'));
                i += 1;
            }
            '(' => {
                out.push(Tok::LParen);
                i += 1;
            }
            ')' => {
                out.push(Tok::RParen);
                i += 1;
            }
            'x' => {
                let start = i + 1;
                let mut j = start;
                while j < chars.len() && chars[j].is_ascii_digit() {
                    j += 1;
                }
                if j == start {
                    return Err(Error::Parse(format!("expected feature index after `x` at {i}")));
                }
                let idx: String = chars[start..j].iter().collect();
                out.push(Tok::Var(idx.parse().map_err(|_| Error::Parse(format!("bad index {idx}")))?));
                i = j;
            }
            c if c.is_ascii_digit() || c == '.' => {
                let mut j = i;
                while j < chars.len() && (chars[j].is_ascii_digit() || chars[j] == '.') {
                    j += 1;
                }
                if j < chars.len() && (chars[j] == 'e' || chars[j] == 'E') {
                    j += 1;
                    if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
                        j += 1;
                    }
                    while j < chars.len() && chars[j].is_ascii_digit() {
                        j += 1;
                    }
                }
                let lit: String = chars[i..j].iter().collect();
                out.push(Tok::Num(decimal::parse(&lit).map_err(Error::Parse)?));
                i = j;
            }
            other => return Err(Error::Parse(format!("unexpected character `{other}` at {i}"))),
        }
    }
    Ok(out)
}

struct Parser {
    toks: Vec<Tok>,
    pos: usize,
    nodes: Vec<ExprNode>,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos)
    }

    fn push(&mut self, node: ExprNode) -> usize {
        self.nodes.push(node);
        self.nodes.len() - 1
    }

    fn expr(&mut self) -> Result<usize> {
        let mut lhs = self.term()?;
        while let Some(Tok::Op(op @ ('+' | '-'))) = self.peek().cloned() {
            self.pos += 1;
            let rhs = self.term()?;
            lhs =
                self.push(if op == '+' { ExprNode::Add { a: lhs, b: rhs } } else { ExprNode::Sub { a: lhs, b: rhs } });
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<usize> {
        let mut lhs = self.unary()?;
        while let Some(Tok::Op(op @ ('*' | '/'))) = self.peek().cloned() {
            self.pos += 1;
            let rhs = self.unary()?;
            lhs =
                self.push(if op == '*' { ExprNode::Mul { a: lhs, b: rhs } } else { ExprNode::Div { a: lhs, b: rhs } });
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<usize> {
        if let Some(Tok::Op('-')) = self.peek() {
            self.pos += 1;
            if let Some(Tok::Num(v)) = self.peek().cloned() {
                self.pos += 1;
                return Ok(self.push(ExprNode::Const { value: -v }));
            }
            let a = self.unary()?;
            return Ok(self.push(ExprNode::Neg { a }));
        }
        self.primary()
    }

    fn primary(&mut self) -> Result<usize> {
        let tok = self.peek().cloned().ok_or_else(|| Error::Parse("unexpected end of formula".into()))?;
        self.pos += 1;
        match tok {
            Tok::Num(value) => Ok(self.push(ExprNode::Const { value })),
            Tok::Var(index) => Ok(self.push(ExprNode::Feature { index })),
            Tok::LParen => {
                let inner = self.expr()?;
                match self.peek() {
                    Some(Tok::RParen) => {
                        self.pos += 1;
                        Ok(inner)
                    }
                    _ => Err(Error::Parse("missing `)`".into())),
                }
            }
            other => Err(Error::Parse(format!("unexpected token {other:?}"))),
        }
    }
}

pub(super) fn parse(text: &str) -> Result<Vec<ExprNode>> {
    let mut p = Parser { toks: tokenize(text)?, pos: 0, nodes: Vec::new() };
    p.expr()?;
    if p.pos != p.toks.len() {
        return Err(Error::Parse(format!("trailing input after token {}", p.pos)));
    }
    Ok(p.nodes)
}

pub(super) fn render(nodes: &[ExprNode]) -> String {
    fn go(nodes: &[ExprNode], i: usize) -> String {
        match nodes[i] {
            ExprNode::Const { value } => decimal::format(value),
            ExprNode::Feature { index } => format!("x{index}"),
            ExprNode::Add { a, b } => format!("({} + {})", go(nodes, a), go(nodes, b)),
            ExprNode::Sub { a, b } => format!("({} - {})", go(nodes, a), go(nodes, b)),
            ExprNode::Mul { a, b } => format!("({} * {})", go(nodes, a), go(nodes, b)),
            ExprNode::Div { a, b } => format!("({} / {})", go(nodes, a), go(nodes, b)),
            ExprNode::Neg { a } => format!("-({})", go(nodes, a)),
        }
    }
    go(nodes, nodes.len() - 1)
}
