//! Recursive descent parser for the Stipula grammar.

use thiserror::Error;

use crate::ast::*;
use crate::lexer::{lex, LexError};
use crate::span::Span;
use crate::token::{Token, TokenKind};

#[derive(Debug, Error, Clone, PartialEq)]
#[error("{span}: expected {expected}, found {found}")]
pub struct ParseError {
    pub span: Span,
    pub expected: String,
    pub found: String,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FrontError {
    #[error("lex error: {0}")]
    Lex(#[from] LexError),
    #[error("parse error: {0}")]
    Parse(#[from] ParseError),
}

impl FrontError {
    pub fn span(&self) -> Span {
        match self {
            FrontError::Lex(e) => e.span,
            FrontError::Parse(e) => e.span,
        }
    }

    pub fn message(&self) -> String {
        match self {
            FrontError::Lex(e) => e.message.clone(),
            FrontError::Parse(e) => format!("expected {}, found {}", e.expected, e.found),
        }
    }
}

/// Lex and parse one contract from source text.
pub fn parse_contract(source: &str) -> Result<ContractDecl, FrontError> {
    let tokens = lex(source)?;
    Ok(parse(tokens)?)
}

/// Parse a token stream (as produced by [`lex`]) into a contract.
pub fn parse(tokens: Vec<Token>) -> Result<ContractDecl, ParseError> {
    Parser { tokens, pos: 0 }.contract()
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
}

type PResult<T> = Result<T, ParseError>;

impl Parser {
    fn peek(&self) -> &TokenKind {
        &self.tokens[self.pos.min(self.tokens.len() - 1)].kind
    }

    fn peek_at(&self, n: usize) -> &TokenKind {
        &self.tokens[(self.pos + n).min(self.tokens.len() - 1)].kind
    }

    fn span(&self) -> Span {
        self.tokens[self.pos.min(self.tokens.len() - 1)].span
    }

    fn bump(&mut self) -> Token {
        let t = self.tokens[self.pos.min(self.tokens.len() - 1)].clone();
        if self.pos < self.tokens.len() - 1 {
            self.pos += 1;
        }
        t
    }

    fn fail<T>(&self, expected: impl Into<String>) -> PResult<T> {
        Err(ParseError {
            span: self.span(),
            expected: expected.into(),
            found: self.peek().to_string(),
        })
    }

    fn expect(&mut self, kind: TokenKind) -> PResult<Token> {
        if *self.peek() == kind {
            Ok(self.bump())
        } else {
            self.fail(kind.to_string())
        }
    }

    fn eat(&mut self, kind: TokenKind) -> bool {
        if *self.peek() == kind {
            self.bump();
            true
        } else {
            false
        }
    }

    fn ident(&mut self) -> PResult<String> {
        match self.peek() {
            TokenKind::Name(_) => {
                let t = self.bump();
                match t.kind {
                    TokenKind::Name(n) => Ok(n),
                    _ => unreachable!(),
                }
            }
            _ => self.fail("a name"),
        }
    }

    fn state(&mut self) -> PResult<String> {
        self.expect(TokenKind::At)?;
        self.ident()
    }

    fn ident_list(&mut self) -> PResult<Vec<String>> {
        let mut out = vec![self.ident()?];
        while self.eat(TokenKind::Comma) {
            out.push(self.ident()?);
        }
        Ok(out)
    }

    fn contract(&mut self) -> PResult<ContractDecl> {
        let span = self.span();
        self.expect(TokenKind::Stipula)?;
        let name = self.ident()?;
        self.expect(TokenKind::LBrace)?;

        let assets = if self.eat(TokenKind::Assets) {
            self.ident_list()?
        } else {
            Vec::new()
        };
        let fields = if self.eat(TokenKind::Fields) {
            self.ident_list()?
        } else {
            Vec::new()
        };

        let agreement = self.agreement()?;

        let mut functions = Vec::new();
        while *self.peek() == TokenKind::At {
            functions.push(self.function()?);
        }
        self.expect(TokenKind::RBrace)?;
        self.expect(TokenKind::Eof)?;

        Ok(ContractDecl {
            name,
            assets,
            fields,
            agreement,
            functions,
            span,
        })
    }

    fn agreement(&mut self) -> PResult<AgreementDecl> {
        let span = self.span();
        self.expect(TokenKind::Agreement)?;
        self.expect(TokenKind::LParen)?;
        let parties = if *self.peek() == TokenKind::RParen {
            Vec::new()
        } else {
            self.ident_list()?
        };
        self.expect(TokenKind::RParen)?;
        self.expect(TokenKind::LParen)?;
        let init_fields = if *self.peek() == TokenKind::RParen {
            Vec::new()
        } else {
            self.ident_list()?
        };
        self.expect(TokenKind::RParen)?;
        self.expect(TokenKind::LBrace)?;

        let mut groups = Vec::new();
        while *self.peek() != TokenKind::RBrace {
            let gspan = self.span();
            let parties = self.ident_list()?;
            self.expect(TokenKind::Colon)?;
            let fields = self.ident_list()?;
            groups.push(AgreementGroup {
                parties,
                fields,
                span: gspan,
            });
        }
        self.expect(TokenKind::RBrace)?;
        self.expect(TokenKind::FatArrow)?;
        let initial_state = self.state()?;

        Ok(AgreementDecl {
            parties,
            init_fields,
            groups,
            initial_state,
            span,
        })
    }

    /// True when the upcoming `( ... )` contains only a (possibly empty)
    /// comma-separated list of names. Such a group is a parameter list; any
    /// other content is a precondition.
    fn paren_group_is_param_list(&self) -> bool {
        debug_assert_eq!(*self.peek(), TokenKind::LParen);
        let mut n = 1;
        if *self.peek_at(n) == TokenKind::RParen {
            return true;
        }
        loop {
            if !matches!(self.peek_at(n), TokenKind::Name(_)) {
                return false;
            }
            n += 1;
            match self.peek_at(n) {
                TokenKind::Comma => n += 1,
                TokenKind::RParen => return true,
                _ => return false,
            }
        }
    }

    fn function(&mut self) -> PResult<FunctionDecl> {
        let span = self.span();
        let guard_state = self.state()?;
        let caller = self.ident()?;
        self.expect(TokenKind::Colon)?;
        let name = self.ident()?;

        let mut value_params = Vec::new();
        let mut precondition = None;
        if *self.peek() == TokenKind::LParen {
            if self.paren_group_is_param_list() {
                self.bump();
                if *self.peek() != TokenKind::RParen {
                    value_params = self.ident_list()?;
                }
                self.expect(TokenKind::RParen)?;
            } else {
                self.bump();
                precondition = Some(self.expr()?);
                self.expect(TokenKind::RParen)?;
            }
        }

        let mut asset_params = Vec::new();
        if *self.peek() == TokenKind::LBracket {
            if precondition.is_some() {
                return self.fail("`{` (asset parameters must precede the precondition)");
            }
            self.bump();
            if *self.peek() != TokenKind::RBracket {
                asset_params = self.ident_list()?;
            }
            self.expect(TokenKind::RBracket)?;
        }

        if precondition.is_none() && *self.peek() == TokenKind::LParen {
            self.bump();
            precondition = Some(self.expr()?);
            self.expect(TokenKind::RParen)?;
        }

        self.expect(TokenKind::LBrace)?;
        let (body, events) = self.body()?;
        self.expect(TokenKind::RBrace)?;
        self.expect(TokenKind::FatArrow)?;
        let next_state = self.state()?;

        Ok(FunctionDecl {
            guard_state,
            caller,
            name,
            value_params,
            asset_params,
            precondition,
            body,
            events,
            next_state,
            span,
        })
    }

    /// A function body: statements first, then scheduled events.
    fn body(&mut self) -> PResult<(Vec<Stmt>, Vec<EventDecl>)> {
        let mut stmts = Vec::new();
        let mut events = Vec::new();
        while *self.peek() != TokenKind::RBrace {
            match self.stmt_or_event()? {
                Item::Stmt(s) => {
                    if !events.is_empty() {
                        return self.fail("an event (statements cannot follow events)");
                    }
                    stmts.push(s);
                }
                Item::Event(w) => events.push(w),
            }
        }
        Ok((stmts, events))
    }

    /// An event handler: statements only.
    fn handler(&mut self) -> PResult<Vec<Stmt>> {
        let mut stmts = Vec::new();
        while *self.peek() != TokenKind::RBrace {
            match self.stmt_or_event()? {
                Item::Stmt(s) => stmts.push(s),
                Item::Event(w) => {
                    return Err(ParseError {
                        span: w.span,
                        expected: "a statement (events cannot be nested)".into(),
                        found: "an event".into(),
                    })
                }
            }
        }
        Ok(stmts)
    }

    fn stmt_or_event(&mut self) -> PResult<Item> {
        let span = self.span();
        let value = self.expr()?;
        match self.peek() {
            TokenKind::LBrace => {
                // `(B) { S }` conditional
                self.bump();
                let body = self.handler()?;
                self.expect(TokenKind::RBrace)?;
                Ok(Item::Stmt(Stmt {
                    kind: StmtKind::If { cond: value, body },
                    span,
                }))
            }
            TokenKind::FieldArrow => {
                self.bump();
                let dest = self.ident()?;
                Ok(Item::Stmt(Stmt {
                    kind: StmtKind::Send { value, dest },
                    span,
                }))
            }
            TokenKind::AssetArrow => {
                self.bump();
                let first = self.ident()?;
                let (source, dest) = if self.eat(TokenKind::Comma) {
                    (first, self.ident()?)
                } else {
                    // `h -o n` abbreviates `h -o h,n`
                    match &value.kind {
                        ExprKind::Name(h) => (h.clone(), first),
                        _ => {
                            return Err(ParseError {
                                span,
                                expected: "`h -o h',n` (an expression needs an explicit source asset)"
                                    .into(),
                                found: "abbreviated asset transfer".into(),
                            })
                        }
                    }
                };
                Ok(Item::Stmt(Stmt {
                    kind: StmtKind::AssetTransfer {
                        value,
                        source,
                        dest,
                    },
                    span,
                }))
            }
            TokenKind::EventArrow => {
                self.bump();
                let guard_state = self.state()?;
                self.expect(TokenKind::LBrace)?;
                let handler = self.handler()?;
                self.expect(TokenKind::RBrace)?;
                self.expect(TokenKind::FatArrow)?;
                let next_state = self.state()?;
                Ok(Item::Event(EventDecl {
                    guard_expr: value,
                    guard_state,
                    handler,
                    next_state,
                    span,
                }))
            }
            _ => self.fail("`->`, `-o`, `>>` or `{`"),
        }
    }

    // expressions, loosest to tightest: || < && < ! < rel < +- < */
    fn expr(&mut self) -> PResult<Expr> {
        self.or_expr()
    }

    fn or_expr(&mut self) -> PResult<Expr> {
        let mut lhs = self.and_expr()?;
        while *self.peek() == TokenKind::OrOr {
            let span = self.span();
            self.bump();
            let rhs = self.and_expr()?;
            lhs = Expr {
                kind: ExprKind::BoolOp(BoolOp::Or, Box::new(lhs), Box::new(rhs)),
                span,
            };
        }
        Ok(lhs)
    }

    fn and_expr(&mut self) -> PResult<Expr> {
        let mut lhs = self.not_expr()?;
        while *self.peek() == TokenKind::AndAnd {
            let span = self.span();
            self.bump();
            let rhs = self.not_expr()?;
            lhs = Expr {
                kind: ExprKind::BoolOp(BoolOp::And, Box::new(lhs), Box::new(rhs)),
                span,
            };
        }
        Ok(lhs)
    }

    fn not_expr(&mut self) -> PResult<Expr> {
        if *self.peek() == TokenKind::Bang {
            let span = self.span();
            self.bump();
            let inner = self.not_expr()?;
            return Ok(Expr {
                kind: ExprKind::Not(Box::new(inner)),
                span,
            });
        }
        self.rel_expr()
    }

    fn rel_expr(&mut self) -> PResult<Expr> {
        let lhs = self.add_expr()?;
        let op = match self.peek() {
            TokenKind::EqEq => Some(RelOp::Eq),
            TokenKind::NotEq => Some(RelOp::Ne),
            TokenKind::Ge => Some(RelOp::Ge),
            TokenKind::Le => Some(RelOp::Le),
            TokenKind::Gt => Some(RelOp::Gt),
            TokenKind::Lt => Some(RelOp::Lt),
            _ => None,
        };
        match op {
            None => Ok(lhs),
            Some(op) => {
                let span = self.span();
                self.bump();
                let rhs = self.add_expr()?;
                Ok(Expr {
                    kind: ExprKind::Rel(op, Box::new(lhs), Box::new(rhs)),
                    span,
                })
            }
        }
    }

    fn add_expr(&mut self) -> PResult<Expr> {
        let mut lhs = self.mul_expr()?;
        loop {
            let op = match self.peek() {
                TokenKind::Plus => ArithOp::Add,
                TokenKind::Minus => ArithOp::Sub,
                _ => break,
            };
            let span = self.span();
            self.bump();
            let rhs = self.mul_expr()?;
            lhs = Expr {
                kind: ExprKind::Arith(op, Box::new(lhs), Box::new(rhs)),
                span,
            };
        }
        Ok(lhs)
    }

    fn mul_expr(&mut self) -> PResult<Expr> {
        let mut lhs = self.primary()?;
        loop {
            let op = match self.peek() {
                TokenKind::Star => ArithOp::Mul,
                TokenKind::Slash => ArithOp::Div,
                _ => break,
            };
            let span = self.span();
            self.bump();
            let rhs = self.primary()?;
            lhs = Expr {
                kind: ExprKind::Arith(op, Box::new(lhs), Box::new(rhs)),
                span,
            };
        }
        Ok(lhs)
    }

    fn primary(&mut self) -> PResult<Expr> {
        let span = self.span();
        match self.peek().clone() {
            TokenKind::Now => {
                self.bump();
                Ok(Expr {
                    kind: ExprKind::Now,
                    span,
                })
            }
            TokenKind::Real(v) => {
                self.bump();
                Ok(Expr {
                    kind: ExprKind::Real(v),
                    span,
                })
            }
            TokenKind::Str(s) => {
                self.bump();
                Ok(Expr {
                    kind: ExprKind::Str(s),
                    span,
                })
            }
            TokenKind::True => {
                self.bump();
                Ok(Expr {
                    kind: ExprKind::Bool(true),
                    span,
                })
            }
            TokenKind::False => {
                self.bump();
                Ok(Expr {
                    kind: ExprKind::Bool(false),
                    span,
                })
            }
            TokenKind::Uses | TokenKind::UseOnce => {
                let intr = if *self.peek() == TokenKind::Uses {
                    IntrinsicKind::Uses
                } else {
                    IntrinsicKind::UseOnce
                };
                self.bump();
                self.expect(TokenKind::LParen)?;
                let asset = self.ident()?;
                let party = if self.eat(TokenKind::Comma) {
                    Some(self.ident()?)
                } else {
                    None
                };
                self.expect(TokenKind::RParen)?;
                Ok(Expr {
                    kind: ExprKind::Intrinsic(intr, asset, party),
                    span,
                })
            }
            TokenKind::Name(_) => {
                let n = self.ident()?;
                Ok(Expr {
                    kind: ExprKind::Name(n),
                    span,
                })
            }
            TokenKind::LParen => {
                self.bump();
                let first = self.expr()?;
                if self.eat(TokenKind::Comma) {
                    let second = self.expr()?;
                    self.expect(TokenKind::RParen)?;
                    Ok(Expr {
                        kind: ExprKind::Pair(Box::new(first), Box::new(second)),
                        span,
                    })
                } else {
                    self.expect(TokenKind::RParen)?;
                    Ok(first)
                }
            }
            _ => self.fail("an expression"),
        }
    }
}

enum Item {
    Stmt(Stmt),
    Event(EventDecl),
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_function_body() {
        let src = "stipula C { agreement (A)() { } => @Q  @Q A : f { } => @Q2 }";
        let c = parse_contract(src).unwrap();
        assert_eq!(c.functions.len(), 1);
        assert!(c.functions[0].body.is_empty());
        assert!(c.functions[0].events.is_empty());
        assert_eq!(c.functions[0].next_state, "Q2");
    }

    #[test]
    fn abbreviated_asset_transfer() {
        let src =
            "stipula C { assets wallet agreement (A)() { } => @Q @Q A : f [y] { y -o wallet } => @Q }";
        let c = parse_contract(src).unwrap();
        match &c.functions[0].body[0].kind {
            StmtKind::AssetTransfer {
                value,
                source,
                dest,
            } => {
                assert_eq!(source, "y");
                assert_eq!(dest, "wallet");
                assert!(matches!(&value.kind, ExprKind::Name(n) if n == "y"));
            }
            other => panic!("unexpected stmt {other:?}"),
        }
    }

    #[test]
    fn abbreviation_requires_name_source() {
        let src =
            "stipula C { assets wallet agreement (A)() { } => @Q @Q A : f { wallet * 2 -o A } => @Q }";
        assert!(parse_contract(src).is_err());
    }

    #[test]
    fn events_after_statements_only() {
        let src = "stipula C { fields x agreement (A)(x) { A : x } => @Q \
                   @Q A : f { now >> @Q { } => @Q  1 -> x } => @Q }";
        assert!(parse_contract(src).is_err());
    }

    #[test]
    fn no_nested_events() {
        let src = "stipula C { agreement (A)() { } => @Q \
                   @Q A : f { now >> @Q { now >> @Q { } => @Q } => @Q } => @Q }";
        assert!(parse_contract(src).is_err());
    }

    #[test]
    fn precondition_vs_params() {
        let src = "stipula C { fields cost agreement (A)(cost) { A : cost } => @Q \
                   @Q A : f [y] (y == cost) { } => @Q \
                   @Q A : g (z) { } => @Q \
                   @Q A : h () (true) { } => @Q }";
        let c = parse_contract(src).unwrap();
        assert!(c.functions[0].precondition.is_some());
        assert_eq!(c.functions[0].asset_params, vec!["y"]);
        assert_eq!(c.functions[1].value_params, vec!["z"]);
        assert!(c.functions[1].precondition.is_none());
        assert!(c.functions[2].value_params.is_empty());
        assert!(c.functions[2].precondition.is_some());
    }

    #[test]
    fn pair_and_conditional_disambiguation() {
        let src = "stipula C { assets token fields numBox agreement (A)(numBox) { A : numBox } => @Q \
                   @Q A : f { (uses(token), numBox) -> A  (numBox == 1) { 2 -> numBox } } => @Q }";
        let c = parse_contract(src).unwrap();
        let body = &c.functions[0].body;
        assert!(matches!(
            &body[0].kind,
            StmtKind::Send { value, .. } if matches!(value.kind, ExprKind::Pair(..))
        ));
        assert!(matches!(&body[1].kind, StmtKind::If { .. }));
    }

    #[test]
    fn precedence() {
        let src = "stipula C { fields a, b agreement (A)(a, b) { A : a, b } => @Q \
                   @Q A : f (a == 1 && !(b == 2) || a + 2 * b < 5) { } => @Q }";
        let c = parse_contract(src).unwrap();
        let p = c.functions[0].precondition.as_ref().unwrap();
        // top node is ||
        assert!(matches!(&p.kind, ExprKind::BoolOp(BoolOp::Or, ..)));
    }
}
