//! Lexer for `.stipula` source files.
//!
//! ASCII operator mapping: `->` for the value arrow, `-o` for the linear
//! arrow, `>>` for the event arrow, `=>` for the state arrow. `//` starts a
//! line comment. Decimals use `.`; a comma between digits is rejected so that
//! comma-decimal typos (`0,1`) fail loudly instead of lexing as a pair.

use thiserror::Error;

use crate::span::Span;
use crate::token::{Token, TokenKind};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("{span}: {message}")]
pub struct LexError {
    pub span: Span,
    pub message: String,
}

pub fn lex(source: &str) -> Result<Vec<Token>, LexError> {
    Lexer::new(source).run()
}

struct Lexer {
    chars: Vec<char>,
    pos: usize,
    line: u32,
    col: u32,
}

impl Lexer {
    fn new(source: &str) -> Lexer {
        Lexer {
            chars: source.chars().collect(),
            pos: 0,
            line: 1,
            col: 1,

        }
    }

    fn span(&self) -> Span {
        Span::new(self.line, self.col)
    }

    fn peek(&self) -> Option<char> {
        self.chars.get(self.pos).copied()
    }

    fn peek2(&self) -> Option<char> {
        self.chars.get(self.pos + 1).copied()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek()?;
        self.pos += 1;
        if c == '\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        Some(c)
    }

    fn error(&self, span: Span, message: impl Into<String>) -> LexError {
        LexError {
            span,
            message: message.into(),
        }
    }

    fn run(mut self) -> Result<Vec<Token>, LexError> {
        let mut tokens = Vec::new();
        loop {
            self.skip_trivia();
            let span = self.span();
            let Some(c) = self.peek() else {
                tokens.push(Token {
                    kind: TokenKind::Eof,
                    span,
                });
                return Ok(tokens);
            };
            let kind = if c.is_ascii_alphabetic() || c == '_' {
                self.word()
            } else if c.is_ascii_digit() {
                self.number(span)?
            } else if c == '"' {
                self.string(span)?
            } else {
                self.operator(span)?
            };
            tokens.push(Token { kind, span });
        }
    }

    fn skip_trivia(&mut self) {
        loop {
            match self.peek() {
                Some(c) if c.is_whitespace() => {
                    self.bump();
                }
                Some('/') if self.peek2() == Some('/') => {
                    while let Some(c) = self.peek() {
                        if c == '\n' {
                            break;
                        }
                        self.bump();
                    }
                }
                _ => return,
            }
        }
    }

    fn word(&mut self) -> TokenKind {
        let mut name = String::new();
        while let Some(c) = self.peek() {
            if c.is_ascii_alphanumeric() || c == '_' {
                name.push(c);
                self.bump();
            } else {
                break;
            }
        }
        match name.as_str() {
            "stipula" => TokenKind::Stipula,
            "assets" => TokenKind::Assets,
            "fields" => TokenKind::Fields,
            "agreement" => TokenKind::Agreement,
            "now" => TokenKind::Now,
            "true" => TokenKind::True,
            "false" => TokenKind::False,
            "uses" => TokenKind::Uses,
            "use_once" => TokenKind::UseOnce,
            _ => TokenKind::Name(name),
        }
    }

    fn number(&mut self, span: Span) -> Result<TokenKind, LexError> {
        let mut text = String::new();
        while let Some(c) = self.peek() {
            if c.is_ascii_digit() {
                text.push(c);
                self.bump();
            } else {
                break;
            }
        }
        if self.peek() == Some('.') && self.peek2().is_some_and(|c| c.is_ascii_digit()) {
            text.push('.');
            self.bump();
            let mut digits = 0;
            while let Some(c) = self.peek() {
                if c.is_ascii_digit() {
                    text.push(c);
                    digits += 1;
                    self.bump();
                } else {
                    break;
                }
            }
            if digits > 4 {
                return Err(self.error(span, "more than 4 fractional digits in decimal literal"));
            }
        }
        // comma decimals (`0,1`) are a known typo in typeset sources
        if self.peek() == Some(',') && self.peek2().is_some_and(|c| c.is_ascii_digit()) {
            return Err(self.error(
                span,
                "`,` is not a decimal separator; write the fraction with `.`".to_string(),
            ));
        }
        if self.peek().is_some_and(|c| c.is_ascii_alphabetic() || c == '_') {
            return Err(self.error(span, "identifier characters directly after a number"));
        }
        let value = text
            .parse()
            .map_err(|e| self.error(span, format!("bad number: {e}")))?;
        Ok(TokenKind::Real(value))
    }

    fn string(&mut self, span: Span) -> Result<TokenKind, LexError> {
        self.bump(); // opening quote
        let mut text = String::new();
        loop {
            match self.bump() {
                None => return Err(self.error(span, "unterminated string literal")),
                Some('"') => return Ok(TokenKind::Str(text)),
                Some('\\') => match self.bump() {
                    Some('"') => text.push('"'),
                    Some('\\') => text.push('\\'),
                    Some(c) => {
                        return Err(self.error(span, format!("unknown escape `\\{c}`")));
                    }
                    None => return Err(self.error(span, "unterminated string literal")),
                },
                Some('\n') => return Err(self.error(span, "newline in string literal")),
                Some(c) => text.push(c),
            }
        }
    }

    fn operator(&mut self, span: Span) -> Result<TokenKind, LexError> {
        let c = self.bump().expect("caller checked");
        let two = |l: &mut Lexer, kind| {
            l.bump();
            Ok(kind)
        };
        match c {
            '@' => Ok(TokenKind::At),
            '{' => Ok(TokenKind::LBrace),
            '}' => Ok(TokenKind::RBrace),
            '(' => Ok(TokenKind::LParen),
            ')' => Ok(TokenKind::RParen),
            '[' => Ok(TokenKind::LBracket),
            ']' => Ok(TokenKind::RBracket),
            ',' => Ok(TokenKind::Comma),
            ':' => Ok(TokenKind::Colon),
            '+' => Ok(TokenKind::Plus),
            '*' => Ok(TokenKind::Star),
            '/' => Ok(TokenKind::Slash),
            '-' => match self.peek() {
                Some('>') => two(self, TokenKind::FieldArrow),
                // `-o` is the linear arrow unless it begins an identifier
                Some('o') if !self.peek2().is_some_and(|c| c.is_ascii_alphanumeric() || c == '_') => {
                    two(self, TokenKind::AssetArrow)
                }
                _ => Ok(TokenKind::Minus),
            },
            '>' => match self.peek() {
                Some('>') => two(self, TokenKind::EventArrow),
                Some('=') => two(self, TokenKind::Ge),
                _ => Ok(TokenKind::Gt),
            },
            '<' => match self.peek() {
                Some('=') => two(self, TokenKind::Le),
                _ => Ok(TokenKind::Lt),
            },
            '=' => match self.peek() {
                Some('>') => two(self, TokenKind::FatArrow),
                Some('=') => two(self, TokenKind::EqEq),
                _ => Err(self.error(span, "lone `=`; did you mean `==` or `=>`?")),
            },
            '!' => match self.peek() {
                Some('=') => two(self, TokenKind::NotEq),
                _ => Ok(TokenKind::Bang),
            },
            '&' => match self.peek() {
                Some('&') => two(self, TokenKind::AndAnd),
                _ => Err(self.error(span, "lone `&`; did you mean `&&`?")),
            },
            '|' => match self.peek() {
                Some('|') => two(self, TokenKind::OrOr),
                _ => Err(self.error(span, "lone `|`; did you mean `||`?")),
            },
            other => Err(self.error(span, format!("unexpected character `{other}`"))),
        }
    }
}
