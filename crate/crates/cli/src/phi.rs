//! Constraint functions `φ(z)`: sums of `c * basis` terms with basis
//! `1`, `z`, `z^2`, `abs(z)` or `exp_neg_sq(z)` (= `exp(−z²)`).

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Basis {
    One,
    Z,
    Z2,
    Abs,
    ExpNegSq,
}

impl Basis {
    fn eval(self, z: f64) -> f64 {
        match self {
            Basis::One => 1.0,
            Basis::Z => z,
            Basis::Z2 => z * z,
            Basis::Abs => z.abs(),
            Basis::ExpNegSq => (-z * z).exp(),
        }
    }

    fn symbol(self) -> &'static str {
        match self {
            Basis::One => "",
            Basis::Z => "z",
            Basis::Z2 => "z^2",
            Basis::Abs => "abs(z)",
            Basis::ExpNegSq => "exp_neg_sq(z)",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Phi {
    terms: Vec<(f64, Basis)>,
}

impl Phi {
    pub fn eval(&self, z: f64) -> f64 {
        self.terms.iter().map(|(c, b)| c * b.eval(z)).sum()
    }

    pub fn terms(&self) -> &[(f64, Basis)] {
        &self.terms
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Num(f64),
    Ident(String),
    Plus,
    Minus,
    Star,
    Caret,
    Open,
    Close,
}

fn tokenize(s: &str) -> Result<Vec<(usize, Token)>, String> {
    let bytes = s.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        let start = i;
        match c {
            ' ' | '\t' => {
                i += 1;
                continue;
            }
            '+' => out.push((start, Token::Plus)),
            '-' => out.push((start, Token::Minus)),
            '*' => out.push((start, Token::Star)),
            '^' => out.push((start, Token::Caret)),
            '(' => out.push((start, Token::Open)),
            ')' => out.push((start, Token::Close)),
            c if c.is_ascii_digit() || c == '.' => {
                while i < bytes.len() {
                    let d = bytes[i] as char;
                    let exp_sign = (d == '+' || d == '-') && matches!(bytes[i - 1] as char, 'e' | 'E');
                    if d.is_ascii_digit() || d == '.' || d == 'e' || d == 'E' || exp_sign {
                        i += 1;
                    } else {
                        break;
                    }
                }
                let text = &s[start..i];
                let v = text.parse::<f64>().map_err(|_| format!("bad number `{text}` at column {}", start + 1))?;
                out.push((start, Token::Num(v)));
                continue;
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                while i < bytes.len() && ((bytes[i] as char).is_ascii_alphanumeric() || bytes[i] == b'_') {
                    i += 1;
                }
                out.push((start, Token::Ident(s[start..i].to_string())));
                continue;
            }
            other => return Err(format!("unexpected `{other}` at column {}", start + 1)),
        }
        i += 1;
    }
    Ok(out)
}

struct Parser {
    tokens: Vec<(usize, Token)>,
    pos: usize,
    len: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos).map(|(_, t)| t)
    }

    fn column(&self) -> usize {
        self.tokens.get(self.pos).map_or(self.len, |(c, _)| *c) + 1
    }

    fn expect(&mut self, want: Token) -> Result<(), String> {
        if self.peek() == Some(&want) {
            self.pos += 1;
            Ok(())
        } else {
            Err(format!("expected {want:?} at column {}", self.column()))
        }
    }

    fn argument_z(&mut self) -> Result<(), String> {
        self.expect(Token::Open)?;
        match self.peek() {
            Some(Token::Ident(n)) if n == "z" => self.pos += 1,
            _ => return Err(format!("expected `z` at column {}", self.column())),
        }
        self.expect(Token::Close)
    }

    /// Returns a coefficient or a basis function.
    fn factor(&mut self) -> Result<(f64, Basis), String> {
        let col = self.column();
        match self.tokens.get(self.pos).map(|(_, t)| t.clone()) {
            Some(Token::Num(v)) => {
                self.pos += 1;
                Ok((v, Basis::One))
            }
            Some(Token::Ident(name)) => {
                self.pos += 1;
                match name.as_str() {
                    "z" => {
                        if self.peek() == Some(&Token::Caret) {
                            self.pos += 1;
                            match self.peek() {
                                Some(Token::Num(p)) if *p == 1.0 => {
                                    self.pos += 1;
                                    Ok((1.0, Basis::Z))
                                }
                                Some(Token::Num(p)) if *p == 2.0 => {
                                    self.pos += 1;
                                    Ok((1.0, Basis::Z2))
                                }
                                _ => Err(format!("only z^1 and z^2 are supported (column {})", self.column())),
                            }
                        } else {
                            Ok((1.0, Basis::Z))
                        }
                    }
                    "abs" => {
                        self.argument_z()?;
                        Ok((1.0, Basis::Abs))
                    }
                    "exp_neg_sq" => {
                        self.argument_z()?;
                        Ok((1.0, Basis::ExpNegSq))
                    }
                    other => Err(format!("unknown name `{other}` at column {col}")),
                }
            }
            _ => Err(format!("expected a number, `z`, `abs(z)` or `exp_neg_sq(z)` at column {col}")),
        }
    }

    fn term(&mut self, sign: f64) -> Result<(f64, Basis), String> {
        let (mut coef, mut basis) = self.factor()?;
        while self.peek() == Some(&Token::Star) {
            self.pos += 1;
            let col = self.column();
            let (c, b) = self.factor()?;
            coef *= c;
            basis = match (basis, b) {
                (Basis::One, b) | (b, Basis::One) => b,
                _ => return Err(format!("product of two functions of z at column {col}")),
            };
        }
        Ok((sign * coef, basis))
    }
}

impl FromStr for Phi {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let tokens = tokenize(s)?;
        let mut p = Parser { tokens, pos: 0, len: s.len() };
        let mut sign = 1.0;
        match p.peek() {
            Some(Token::Minus) => {
                sign = -1.0;
                p.pos += 1;
            }
            Some(Token::Plus) => p.pos += 1,
            None => return Err("empty expression".into()),
            _ => {}
        }
        let mut terms = vec![p.term(sign)?];
        while let Some(t) = p.peek() {
            let sign = match t {
                Token::Plus => 1.0,
                Token::Minus => -1.0,
                _ => return Err(format!("expected `+` or `-` at column {}", p.column())),
            };
            p.pos += 1;
            terms.push(p.term(sign)?);
        }
        Ok(Phi { terms })
    }
}

impl fmt::Display for Phi {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, (c, b)) in self.terms.iter().enumerate() {
            let negative = c.is_sign_negative();
            let mag = c.abs();
            match (i, negative) {
                (0, true) => f.write_str("-")?,
                (0, false) => {}
                (_, true) => f.write_str(" - ")?,
                (_, false) => f.write_str(" + ")?,
            }
            match b {
                Basis::One => write!(f, "{mag:?}")?,
                _ if mag == 1.0 => f.write_str(b.symbol())?,
                _ => write!(f, "{mag:?}*{}", b.symbol())?,
            }
        }
        Ok(())
    }
}

impl Serialize for Phi {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Phi {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let text = String::deserialize(d)?;
        text.parse().map_err(|e| serde::de::Error::custom(format!("φ `{text}`: {e}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_forms() {
        let p: Phi = "1 + 2*z - 0.5*z^2".parse().unwrap();
        assert_eq!(p.eval(2.0), 1.0 + 4.0 - 2.0);
        let q: Phi = "-z^2".parse().unwrap();
        assert_eq!(q.eval(3.0), -9.0);
        let r: Phi = "z*3 + abs(z) + 2e-1*exp_neg_sq(z)".parse().unwrap();
        assert!((r.eval(-1.0) - (-3.0 + 1.0 + 0.2 * (-1f64).exp())).abs() < 1e-15);
    }

    #[test]
    fn rejects_unsupported_syntax() {
        for bad in ["", "z^3", "z*z", "sin(z)", "2 3", "abs(y)", "1 +", "z $ 2"] {
            assert!(bad.parse::<Phi>().is_err(), "{bad}");
        }
    }

    #[test]
    fn display_round_trips() {
        for text in ["z", "z^2", "-1.5 + z - 0.25*z^2", "0.1*abs(z) + exp_neg_sq(z)", "-0.0", "1e-20*z"] {
            let p: Phi = text.parse().unwrap();
            let again: Phi = p.to_string().parse().unwrap();
            assert_eq!(p, again, "{text} -> {p}");
        }
    }
}
