use std::fmt;

use super::lexer::{tokenize, Token, TokenKind};
use super::{BinOp, Expr, Stmt, UnaryOp, Value};

/// A lexical or grammatical error with the byte offset where it was detected.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("syntax error at offset {offset}: {message}")]
pub struct SyntaxError {
    pub offset: usize,
    pub message: String,
}

impl SyntaxError {
    pub(crate) fn new(offset: usize, message: impl Into<String>) -> Self {
        SyntaxError { offset, message: message.into() }
    }
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
}

impl fmt::Display for TokenKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            TokenKind::Number(n) => return write!(f, "number `{n}`"),
            TokenKind::Ident(name) => return write!(f, "identifier `{name}`"),
            TokenKind::True => "`true`",
            TokenKind::False => "`false`",
            TokenKind::Plus => "`+`",
            TokenKind::Minus => "`-`",
            TokenKind::Star => "`*`",
            TokenKind::Slash => "`/`",
            TokenKind::Percent => "`%`",
            TokenKind::EqEq => "`==`",
            TokenKind::NotEq => "`!=`",
            TokenKind::Lt => "`<`",
            TokenKind::Le => "`<=`",
            TokenKind::Gt => "`>`",
            TokenKind::Ge => "`>=`",
            TokenKind::AndAnd => "`&&`",
            TokenKind::OrOr => "`||`",
            TokenKind::Bang => "`!`",
            TokenKind::Assign => "`=`",
            TokenKind::LParen => "`(`",
            TokenKind::RParen => "`)`",
            TokenKind::Semi => "`;`",
            TokenKind::Eof => "end of input",
        };
        f.write_str(s)
    }
}

impl Parser {
    fn new(src: &str) -> Result<Self, SyntaxError> {
        Ok(Parser { tokens: tokenize(src)?, pos: 0 })
    }

    fn peek(&self) -> &Token {
        &self.tokens[self.pos]
    }

    fn bump(&mut self) -> Token {
        let t = self.tokens[self.pos].clone();
        if t.kind != TokenKind::Eof {
            self.pos += 1;
        }
        t
    }

    fn expect_eof(&self) -> Result<(), SyntaxError> {
        let t = self.peek();
        if t.kind == TokenKind::Eof {
            Ok(())
        } else {
            Err(SyntaxError::new(t.offset, format!("unexpected {} after expression", t.kind)))
        }
    }

    /// One left-associative precedence level.
    fn level(
        &mut self,
        ops: &[(TokenKind, BinOp)],
        next: fn(&mut Self) -> Result<Expr, SyntaxError>,
    ) -> Result<Expr, SyntaxError> {
        let mut lhs = next(self)?;
        loop {
            let Some(op) = ops.iter().find(|(k, _)| *k == self.peek().kind).map(|(_, op)| *op) else {
                return Ok(lhs);
            };
            self.bump();
            let rhs = next(self)?;
            lhs = Expr::binary(op, lhs, rhs);
        }
    }

    fn expr(&mut self) -> Result<Expr, SyntaxError> {
        self.or()
    }

    fn or(&mut self) -> Result<Expr, SyntaxError> {
        self.level(&[(TokenKind::OrOr, BinOp::Or)], Self::and)
    }

    fn and(&mut self) -> Result<Expr, SyntaxError> {
        self.level(&[(TokenKind::AndAnd, BinOp::And)], Self::cmpeq)
    }

    fn cmpeq(&mut self) -> Result<Expr, SyntaxError> {
        self.level(&[(TokenKind::EqEq, BinOp::Eq), (TokenKind::NotEq, BinOp::Ne)], Self::rel)
    }

    fn rel(&mut self) -> Result<Expr, SyntaxError> {
        self.level(
            &[
                (TokenKind::Lt, BinOp::Lt),
                (TokenKind::Le, BinOp::Le),
                (TokenKind::Gt, BinOp::Gt),
                (TokenKind::Ge, BinOp::Ge),
            ],
            Self::add,
        )
    }

    fn add(&mut self) -> Result<Expr, SyntaxError> {
        self.level(&[(TokenKind::Plus, BinOp::Add), (TokenKind::Minus, BinOp::Sub)], Self::mul)
    }

    fn mul(&mut self) -> Result<Expr, SyntaxError> {
        self.level(
            &[(TokenKind::Star, BinOp::Mul), (TokenKind::Slash, BinOp::Div), (TokenKind::Percent, BinOp::Rem)],
            Self::unary,
        )
    }

    fn unary(&mut self) -> Result<Expr, SyntaxError> {
        match self.peek().kind {
            TokenKind::Minus => {
                self.bump();
                // `-` directly before a number literal folds into a negative literal.
                if let TokenKind::Number(n) = self.peek().kind {
                    self.bump();
                    return Ok(Expr::num(-n));
                }
                Ok(Expr::unary(UnaryOp::Neg, self.unary()?))
            }
            TokenKind::Bang => {
                self.bump();
                Ok(Expr::unary(UnaryOp::Not, self.unary()?))
            }
            _ => self.atom(),
        }
    }

    fn atom(&mut self) -> Result<Expr, SyntaxError> {
        let t = self.bump();
        match t.kind {
            TokenKind::Number(n) => Ok(Expr::Lit(Value::Num(n))),
            TokenKind::True => Ok(Expr::boolean(true)),
            TokenKind::False => Ok(Expr::boolean(false)),
            TokenKind::Ident(name) => Ok(Expr::Var(name)),
            TokenKind::LParen => {
                let inner = self.expr()?;
                let close = self.peek().clone();
                if close.kind == TokenKind::RParen {
                    self.bump();
                    Ok(inner)
                } else if close.kind == TokenKind::Eof {
                    Err(SyntaxError::new(close.offset, format!("unclosed parenthesis opened at offset {}", t.offset)))
                } else {
                    Err(SyntaxError::new(close.offset, format!("expected `)`, found {}", close.kind)))
                }
            }
            other => Err(SyntaxError::new(t.offset, format!("expected expression, found {other}"))),
        }
    }

    fn stmt(&mut self) -> Result<Stmt, SyntaxError> {
        let t = self.bump();
        let TokenKind::Ident(target) = t.kind else {
            return Err(SyntaxError::new(t.offset, format!("expected assignment target, found {}", t.kind)));
        };
        let eq = self.bump();
        if eq.kind != TokenKind::Assign {
            return Err(SyntaxError::new(eq.offset, format!("expected `=`, found {}", eq.kind)));
        }
        Ok(Stmt { target, value: self.expr()? })
    }
}

/// Parses a complete expression.
pub fn parse_expr(src: &str) -> Result<Expr, SyntaxError> {
    let mut p = Parser::new(src)?;
    let e = p.expr()?;
    p.expect_eof()?;
    Ok(e)
}

/// Parses `stmt (";" stmt)* [";"]`.
pub fn parse_stmts(src: &str) -> Result<Vec<Stmt>, SyntaxError> {
    let mut p = Parser::new(src)?;
    let mut out = vec![p.stmt()?];
    loop {
        match p.peek().kind {
            TokenKind::Eof => return Ok(out),
            TokenKind::Semi => {
                p.bump();
                if p.peek().kind == TokenKind::Eof {
                    return Ok(out);
                }
                out.push(p.stmt()?);
            }
            ref other => {
                return Err(SyntaxError::new(p.peek().offset, format!("expected `;` or end of input, found {other}")))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn door_sensor_condition() {
        let e = parse_expr("DOOR_SENSOR == 1").unwrap();
        assert_eq!(e, Expr::binary(BinOp::Eq, Expr::var("DOOR_SENSOR"), Expr::num(1.0)));
    }

    #[test]
    fn empty_input() {
        let err = parse_expr("").unwrap_err();
        assert_eq!(err.offset, 0);
        assert!(parse_stmts("").is_err());
        assert!(parse_expr("   ").is_err());
    }

    #[test]
    fn unclosed_paren_reports_end_offset() {
        let err = parse_expr("a && (b").unwrap_err();
        assert_eq!(err.offset, 7);
        assert!(err.message.contains("unclosed parenthesis"), "{}", err.message);
    }

    #[test]
    fn precedence_follows_c() {
        let e = parse_expr("a || b && c == 1 + 2 * 3").unwrap();
        let expected = Expr::binary(
            BinOp::Or,
            Expr::var("a"),
            Expr::binary(
                BinOp::And,
                Expr::var("b"),
                Expr::binary(
                    BinOp::Eq,
                    Expr::var("c"),
                    Expr::binary(BinOp::Add, Expr::num(1.0), Expr::binary(BinOp::Mul, Expr::num(2.0), Expr::num(3.0))),
                ),
            ),
        );
        assert_eq!(e, expected);
    }

    #[test]
    fn left_associative() {
        let e = parse_expr("8 - 4 - 2").unwrap();
        assert_eq!(
            e,
            Expr::binary(BinOp::Sub, Expr::binary(BinOp::Sub, Expr::num(8.0), Expr::num(4.0)), Expr::num(2.0))
        );
    }

    #[test]
    fn statements() {
        let s = parse_stmts("a = 2; b = a * 3;").unwrap();
        assert_eq!(s.len(), 2);
        assert_eq!(s[1].to_string(), "b = a * 3");
        assert!(parse_stmts("a == 2").is_err());
        assert!(parse_stmts("a = 2 b = 3").is_err());
        assert!(parse_stmts("a = (b = 3)").is_err());
        assert!(parse_stmts("; a = 1").is_err());
    }

    #[test]
    fn trailing_garbage() {
        assert_eq!(parse_expr("a b").unwrap_err().offset, 2);
        assert_eq!(parse_expr("(a))").unwrap_err().offset, 3);
        assert!(parse_expr("a ==").is_err());
        assert!(parse_expr("a =").is_err());
    }
}
