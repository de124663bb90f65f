use super::parser::SyntaxError;

#[derive(Debug, Clone, PartialEq)]
pub enum TokenKind {
    Number(f64),
    Ident(String),
    True,
    False,
    Plus,
    Minus,
    Star,
    Slash,
    Percent,
    EqEq,
    NotEq,
    Lt,
    Le,
    Gt,
    Ge,
    AndAnd,
    OrOr,
    Bang,
    Assign,
    LParen,
    RParen,
    Semi,
    Eof,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Token {
    pub kind: TokenKind,
    /// Byte offset of the first character.
    pub offset: usize,
}

/// Splits `src` into tokens, always ending with `Eof` at `src.len()`.
pub fn tokenize(src: &str) -> Result<Vec<Token>, SyntaxError> {
    let bytes = src.as_bytes();
    let mut tokens = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        let two = |next: u8| bytes.get(i + 1) == Some(&next);
        let kind = match c {
            b'0'..=b'9' => {
                i = scan_number(bytes, i).map_err(|at| SyntaxError::new(at, "malformed number literal"))?;
                let text = &src[start..i];
                let n: f64 =
                    text.parse().map_err(|_| SyntaxError::new(start, format!("malformed number literal `{text}`")))?;
                if !n.is_finite() {
                    return Err(SyntaxError::new(start, format!("number literal `{text}` out of range")));
                }
                tokens.push(Token { kind: TokenKind::Number(n), offset: start });
                continue;
            }
            b'A'..=b'Z' | b'a'..=b'z' | b'_' => {
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                    i += 1;
                }
                let kind = match &src[start..i] {
                    "true" => TokenKind::True,
                    "false" => TokenKind::False,
                    word => TokenKind::Ident(word.to_string()),
                };
                tokens.push(Token { kind, offset: start });
                continue;
            }
            b'+' => TokenKind::Plus,
            b'-' => TokenKind::Minus,
            b'*' => TokenKind::Star,
            b'/' => TokenKind::Slash,
            b'%' => TokenKind::Percent,
            b'(' => TokenKind::LParen,
            b')' => TokenKind::RParen,
            b';' => TokenKind::Semi,
            b'=' if two(b'=') => TokenKind::EqEq,
            b'=' => TokenKind::Assign,
            b'!' if two(b'=') => TokenKind::NotEq,
            b'!' => TokenKind::Bang,
            b'<' if two(b'=') => TokenKind::Le,
            b'<' => TokenKind::Lt,
            b'>' if two(b'=') => TokenKind::Ge,
            b'>' => TokenKind::Gt,
            b'&' if two(b'&') => TokenKind::AndAnd,
            b'|' if two(b'|') => TokenKind::OrOr,
            b'&' | b'|' => return Err(SyntaxError::new(start, format!("single `{}` is not an operator", c as char))),
            _ => {
                let ch = src[start..].chars().next().unwrap_or('?');
                return Err(SyntaxError::new(start, format!("unexpected character `{ch}`")));
            }
        };
        i += match kind {
            TokenKind::EqEq
            | TokenKind::NotEq
            | TokenKind::Le
            | TokenKind::Ge
            | TokenKind::AndAnd
            | TokenKind::OrOr => 2,
            _ => 1,
        };
        tokens.push(Token { kind, offset: start });
    }
    tokens.push(Token { kind: TokenKind::Eof, offset: bytes.len() });
    Ok(tokens)
}

/// `digits ("." digits)? ([eE] [+-]? digits)?`; returns the end offset.
fn scan_number(bytes: &[u8], mut i: usize) -> Result<usize, usize> {
    let digits = |i: &mut usize| {
        let s = *i;
        while *i < bytes.len() && bytes[*i].is_ascii_digit() {
            *i += 1;
        }
        *i > s
    };
    digits(&mut i);
    if bytes.get(i) == Some(&b'.') {
        i += 1;
        if !digits(&mut i) {
            return Err(i);
        }
    }
    if matches!(bytes.get(i), Some(b'e' | b'E')) {
        i += 1;
        if matches!(bytes.get(i), Some(b'+' | b'-')) {
            i += 1;
        }
        if !digits(&mut i) {
            return Err(i);
        }
    }
    if matches!(bytes.get(i), Some(c) if c.is_ascii_alphabetic() || *c == b'_') {
        return Err(i);
    }
    Ok(i)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kinds(src: &str) -> Vec<TokenKind> {
        tokenize(src).unwrap().into_iter().map(|t| t.kind).collect()
    }

    #[test]
    fn operators_and_offsets() {
        let toks = tokenize("a<=1&&!b").unwrap();
        let offsets: Vec<_> = toks.iter().map(|t| t.offset).collect();
        assert_eq!(offsets, vec![0, 1, 3, 4, 6, 7, 8]);
        assert_eq!(
            kinds("x != 2.5e1"),
            vec![TokenKind::Ident("x".into()), TokenKind::NotEq, TokenKind::Number(25.0), TokenKind::Eof]
        );
    }

    #[test]
    fn rejects_matlab_not_equal() {
        let err = tokenize("a ~= 1").unwrap_err();
        assert_eq!(err.offset, 2);
    }

    #[test]
    fn malformed_numbers() {
        assert!(tokenize("1.").is_err());
        assert!(tokenize("1e").is_err());
        assert!(tokenize("12abc").is_err());
        assert_eq!(kinds("007")[0], TokenKind::Number(7.0));
        assert!(tokenize("1e999").is_err());
    }

    #[test]
    fn single_ampersand() {
        assert_eq!(tokenize("a & b").unwrap_err().offset, 2);
    }
}
