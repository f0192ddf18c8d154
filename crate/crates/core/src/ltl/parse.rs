//! Recursive-descent parser for the textual LTL syntax.
//!
//! Precedence, loosest first: `->` or `=>` (right-assoc, sugar for `!a | b`), `|`, `&`,
//! `U`/`R` (right-assoc), then the prefix operators `!`, `F`, `G`, `X`.

use super::{AlphabetContext, Formula, LtlError};

#[derive(Clone, Debug, PartialEq, Eq)]
enum Tok {
    Ident(String),
    True,
    False,
    Not,
    And,
    Or,
    Implies,
    LParen,
    RParen,
    Eventually,
    Always,
    Next,
    Until,
    Release,
    Eof,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("identifier `{s}`"),
            Tok::True => "`true`".into(),
            Tok::False => "`false`".into(),
            Tok::Not => "`!`".into(),
            Tok::And => "`&`".into(),
            Tok::Or => "`|`".into(),
            Tok::Implies => "`->`".into(),
            Tok::LParen => "`(`".into(),
            Tok::RParen => "`)`".into(),
            Tok::Eventually => "`F`".into(),
            Tok::Always => "`G`".into(),
            Tok::Next => "`X`".into(),
            Tok::Until => "`U`".into(),
            Tok::Release => "`R`".into(),
            Tok::Eof => "end of input".into(),
        }
    }
}

fn lex(text: &str) -> Result<Vec<(usize, Tok)>, LtlError> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        let tok = match c {
            b'!' | b'~' => {
                i += 1;
                Tok::Not
            }
            b'&' => {
                i += if bytes.get(i + 1) == Some(&b'&') { 2 } else { 1 };
                Tok::And
            }
            b'|' => {
                i += if bytes.get(i + 1) == Some(&b'|') { 2 } else { 1 };
                Tok::Or
            }
            b'-' | b'=' if bytes.get(i + 1) == Some(&b'>') => {
                i += 2;
                Tok::Implies
            }
            b'(' => {
                i += 1;
                Tok::LParen
            }
            b')' => {
                i += 1;
                Tok::RParen
            }
            c if c.is_ascii_alphabetic() || c == b'_' => {
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                    i += 1;
                }
                match &text[start..i] {
                    "F" => Tok::Eventually,
                    "G" => Tok::Always,
                    "X" => Tok::Next,
                    "U" => Tok::Until,
                    "R" => Tok::Release,
                    "true" => Tok::True,
                    "false" => Tok::False,
                    s => Tok::Ident(s.to_string()),
                }
            }
            _ => {
                let found = text[start..].chars().next().unwrap_or(' ');
                return Err(LtlError::Syntax {
                    offset: start,
                    expected: vec!["operator, atom or parenthesis".into()],
                    found: format!("character `{found}`"),
                });
            }
        };
        out.push((start, tok));
    }
    out.push((text.len(), Tok::Eof));
    Ok(out)
}

struct Parser<'a> {
    toks: Vec<(usize, Tok)>,
    pos: usize,
    ctx: &'a mut AlphabetContext,
}

const PRIMARY_START: [&str; 8] = [
    "identifier", "`true`", "`false`", "`(`", "`!`", "`F`", "`G`", "`X`",
];

impl Parser<'_> {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].1
    }

    fn offset(&self) -> usize {
        self.toks[self.pos].0
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].1.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn error(&self, expected: &[&str]) -> LtlError {
        LtlError::Syntax {
            offset: self.offset(),
            expected: expected.iter().map(|s| s.to_string()).collect(),
            found: self.peek().describe(),
        }
    }

    fn implies(&mut self) -> Result<Formula, LtlError> {
        let lhs = self.or()?;
        if *self.peek() == Tok::Implies {
            self.bump();
            let rhs = self.implies()?;
            return Ok(Formula::or(Formula::not(lhs), rhs));
        }
        Ok(lhs)
    }

    fn or(&mut self) -> Result<Formula, LtlError> {
        let mut lhs = self.and()?;
        while *self.peek() == Tok::Or {
            self.bump();
            let rhs = self.and()?;
            lhs = Formula::or(lhs, rhs);
        }
        Ok(lhs)
    }

    fn and(&mut self) -> Result<Formula, LtlError> {
        let mut lhs = self.until()?;
        while *self.peek() == Tok::And {
            self.bump();
            let rhs = self.until()?;
            lhs = Formula::and(lhs, rhs);
        }
        Ok(lhs)
    }

    fn until(&mut self) -> Result<Formula, LtlError> {
        let lhs = self.unary()?;
        match self.peek() {
            Tok::Until => {
                self.bump();
                Ok(Formula::until(lhs, self.until()?))
            }
            Tok::Release => {
                self.bump();
                Ok(Formula::release(lhs, self.until()?))
            }
            _ => Ok(lhs),
        }
    }

    fn unary(&mut self) -> Result<Formula, LtlError> {
        match self.peek() {
            Tok::Not => {
                self.bump();
                Ok(Formula::not(self.unary()?))
            }
            Tok::Eventually => {
                self.bump();
                Ok(Formula::eventually(self.unary()?))
            }
            Tok::Always => {
                self.bump();
                Ok(Formula::always(self.unary()?))
            }
            Tok::Next => {
                self.bump();
                Ok(Formula::next(self.unary()?))
            }
            _ => self.primary(),
        }
    }

    fn primary(&mut self) -> Result<Formula, LtlError> {
        match self.peek().clone() {
            Tok::Ident(name) => {
                let offset = self.offset();
                let p = self.ctx.intern(&name).map_err(|e| match e {
                    LtlError::TooManyPropositions(_) => e,
                    _ => LtlError::Syntax {
                        offset,
                        expected: vec!["identifier".into()],
                        found: format!("identifier `{name}`"),
                    },
                })?;
                self.bump();
                Ok(Formula::Atom(p))
            }
            Tok::True => {
                self.bump();
                Ok(Formula::True)
            }
            Tok::False => {
                self.bump();
                Ok(Formula::False)
            }
            Tok::LParen => {
                self.bump();
                let f = self.implies()?;
                if *self.peek() != Tok::RParen {
                    return Err(self.error(&["`)`", "`&`", "`|`", "`U`", "`R`", "`->`"]));
                }
                self.bump();
                Ok(f)
            }
            _ => Err(self.error(&PRIMARY_START)),
        }
    }
}

/// Parses `text`, registering any new proposition names in `ctx`.
pub fn parse(text: &str, ctx: &mut AlphabetContext) -> Result<Formula, LtlError> {
    let toks = lex(text)?;
    let mut p = Parser { toks, pos: 0, ctx };
    let f = p.implies()?;
    if *p.peek() != Tok::Eof {
        return Err(p.error(&["end of input", "`&`", "`|`", "`U`", "`R`", "`->`"]));
    }
    Ok(f)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn atoms(ctx: &AlphabetContext, names: &[&str]) -> Vec<Formula> {
        names
            .iter()
            .map(|n| Formula::atom(ctx.get(n).unwrap().clone()))
            .collect()
    }

    #[test]
    fn not_binds_tighter_than_until() {
        let mut ctx = AlphabetContext::new();
        let f = parse("!a U b", &mut ctx).unwrap();
        let v = atoms(&ctx, &["a", "b"]);
        assert_eq!(f, Formula::until(Formula::not(v[0].clone()), v[1].clone()));
    }

    #[test]
    fn nested_eventually() {
        let mut ctx = AlphabetContext::new();
        let f = parse("F (a & F b)", &mut ctx).unwrap();
        let v = atoms(&ctx, &["a", "b"]);
        assert_eq!(
            f,
            Formula::eventually(Formula::and(
                v[0].clone(),
                Formula::eventually(v[1].clone())
            ))
        );
    }

    #[test]
    fn single_atom() {
        let mut ctx = AlphabetContext::new();
        let f = parse("a", &mut ctx).unwrap();
        assert_eq!(f, atoms(&ctx, &["a"])[0]);
    }

    #[test]
    fn until_is_right_associative() {
        let mut ctx = AlphabetContext::new();
        let f = parse("a U b U c", &mut ctx).unwrap();
        let v = atoms(&ctx, &["a", "b", "c"]);
        assert_eq!(
            f,
            Formula::until(v[0].clone(), Formula::until(v[1].clone(), v[2].clone()))
        );
    }

    #[test]
    fn implication_desugars() {
        let mut ctx = AlphabetContext::new();
        let f = parse("a -> F b", &mut ctx).unwrap();
        let v = atoms(&ctx, &["a", "b"]);
        assert_eq!(
            f,
            Formula::or(Formula::not(v[0].clone()), Formula::eventually(v[1].clone()))
        );
        assert_eq!(parse("a => F b", &mut ctx).unwrap(), f);
    }

    #[test]
    fn syntax_error_offsets() {
        let mut ctx = AlphabetContext::new();
        match parse("a & (b | ", &mut ctx) {
            Err(LtlError::Syntax {
                offset, expected, ..
            }) => {
                assert_eq!(offset, 9);
                assert!(expected.iter().any(|e| e == "identifier"));
            }
            other => panic!("unexpected {other:?}"),
        }
        match parse("a b", &mut ctx) {
            Err(LtlError::Syntax { offset, .. }) => assert_eq!(offset, 2),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(
            parse("a $ b", &mut ctx),
            Err(LtlError::Syntax { offset: 2, .. })
        ));
    }

    #[test]
    fn registers_new_names() {
        let mut ctx = AlphabetContext::from_names(["z"]).unwrap();
        parse("G (x -> F y)", &mut ctx).unwrap();
        assert_eq!(ctx.names(), vec!["z", "x", "y"]);
    }
}
