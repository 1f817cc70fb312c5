//! Token stream for the ASCII surface syntax.

use std::fmt;

use crate::fixed::Fixed4;
use crate::span::Span;

#[derive(Debug, Clone, PartialEq)]
pub enum TokenKind {
    // keywords
    Stipula,
    Assets,
    Fields,
    Agreement,
    Now,
    True,
    False,
    Uses,
    UseOnce,
    // literals and names
    Name(String),
    Real(Fixed4),
    Str(String),
    // punctuation and operators
    At,          // @
    LBrace,      // {
    RBrace,      // }
    LParen,      // (
    RParen,      // )
    LBracket,    // [
    RBracket,    // ]
    Comma,       // ,
    Colon,       // :
    FieldArrow,  // ->
    AssetArrow,  // -o
    EventArrow,  // >>
    FatArrow,    // =>
    Plus,        // +
    Minus,       // -
    Star,        // *
    Slash,       // /
    EqEq,        // ==
    NotEq,       // !=
    Ge,          // >=
    Le,          // <=
    Gt,          // >
    Lt,          // <
    AndAnd,      // &&
    OrOr,        // ||
    Bang,        // !
    Eof,
}

impl fmt::Display for TokenKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use TokenKind::*;
        match self {
            Stipula => write!(f, "`stipula`"),
            Assets => write!(f, "`assets`"),
            Fields => write!(f, "`fields`"),
            Agreement => write!(f, "`agreement`"),
            Now => write!(f, "`now`"),
            True => write!(f, "`true`"),
            False => write!(f, "`false`"),
            Uses => write!(f, "`uses`"),
            UseOnce => write!(f, "`use_once`"),
            Name(n) => write!(f, "name `{n}`"),
            Real(v) => write!(f, "number `{v}`"),
            Str(s) => write!(f, "string {s:?}"),
            At => write!(f, "`@`"),
            LBrace => write!(f, "`{{`"),
            RBrace => write!(f, "`}}`"),
            LParen => write!(f, "`(`"),
            RParen => write!(f, "`)`"),
            LBracket => write!(f, "`[`"),
            RBracket => write!(f, "`]`"),
            Comma => write!(f, "`,`"),
            Colon => write!(f, "`:`"),
            FieldArrow => write!(f, "`->`"),
            AssetArrow => write!(f, "`-o`"),
            EventArrow => write!(f, "`>>`"),
            FatArrow => write!(f, "`=>`"),
            Plus => write!(f, "`+`"),
            Minus => write!(f, "`-`"),
            Star => write!(f, "`*`"),
            Slash => write!(f, "`/`"),
            EqEq => write!(f, "`==`"),
            NotEq => write!(f, "`!=`"),
            Ge => write!(f, "`>=`"),
            Le => write!(f, "`<=`"),
            Gt => write!(f, "`>`"),
            Lt => write!(f, "`<`"),
            AndAnd => write!(f, "`&&`"),
            OrOr => write!(f, "`||`"),
            Bang => write!(f, "`!`"),
            Eof => write!(f, "end of file"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Token {
    pub kind: TokenKind,
    pub span: Span,
}
