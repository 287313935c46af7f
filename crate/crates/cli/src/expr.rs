//! Arithmetic on config values: numbers, `pi`, `inf`, `+ - * / ^` and
//! parentheses.

use std::iter::Peekable;
use std::str::Chars;

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Num(f64),
    Ident(String),
    Op(char),
}

fn tokenize(text: &str) -> Result<Vec<Token>, String> {
    let mut out = Vec::new();
    let mut chars: Peekable<Chars> = text.chars().peekable();
    while let Some(&c) = chars.peek() {
        if c.is_whitespace() {
            chars.next();
        } else if c.is_ascii_digit() || c == '.' {
            let mut s = String::new();
            while let Some(&d) = chars.peek() {
                if d.is_ascii_digit() || d == '.' {
                    s.push(d);
                    chars.next();
                } else if (d == 'e' || d == 'E') && !s.is_empty() {
                    // exponent only when followed by a digit or a sign
                    let mut look = chars.clone();
                    look.next();
                    match look.peek() {
                        Some(&n) if n.is_ascii_digit() || n == '+' || n == '-' => {
                            s.push(d);
                            chars.next();
                            if let Some(&sign) = chars.peek() {
                                if sign == '+' || sign == '-' {
                                    s.push(sign);
                                    chars.next();
                                }
                            }
                        }
                        _ => break,
                    }
                } else {
                    break;
                }
            }
            out.push(Token::Num(s.parse().map_err(|_| format!("bad number `{s}`"))?));
        } else if c.is_alphabetic() || c == '_' {
            let mut s = String::new();
            while let Some(&d) = chars.peek() {
                if d.is_alphanumeric() || d == '_' {
                    s.push(d);
                    chars.next();
                } else {
                    break;
                }
            }
            out.push(Token::Ident(s));
        } else if "+-*/^()".contains(c) {
            out.push(Token::Op(c));
            chars.next();
        } else {
            return Err(format!("unexpected character `{c}`"));
        }
    }
    Ok(out)
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn next(&mut self) -> Option<Token> {
        let t = self.tokens.get(self.pos).cloned();
        self.pos += 1;
        t
    }

    fn expr(&mut self) -> Result<f64, String> {
        let mut v = self.term()?;
        while let Some(Token::Op(op @ ('+' | '-'))) = self.peek().cloned() {
            self.next();
            let rhs = self.term()?;
            v = if op == '+' { v + rhs } else { v - rhs };
        }
        Ok(v)
    }

    fn term(&mut self) -> Result<f64, String> {
        let mut v = self.unary()?;
        while let Some(Token::Op(op @ ('*' | '/'))) = self.peek().cloned() {
            self.next();
            let rhs = self.unary()?;
            v = if op == '*' { v * rhs } else { v / rhs };
        }
        Ok(v)
    }

    fn unary(&mut self) -> Result<f64, String> {
        match self.peek() {
            Some(Token::Op('-')) => {
                self.next();
                Ok(-self.unary()?)
            }
            Some(Token::Op('+')) => {
                self.next();
                self.unary()
            }
            _ => self.power(),
        }
    }

    fn power(&mut self) -> Result<f64, String> {
        let base = self.primary()?;
        if let Some(Token::Op('^')) = self.peek() {
            self.next();
            let exp = self.unary()?;
            return Ok(base.powf(exp));
        }
        Ok(base)
    }

    fn primary(&mut self) -> Result<f64, String> {
        match self.next() {
            Some(Token::Num(v)) => Ok(v),
            Some(Token::Ident(name)) => match name.as_str() {
                "pi" => Ok(std::f64::consts::PI),
                "inf" => Ok(f64::INFINITY),
                _ => Err(format!("unknown name `{name}`")),
            },
            Some(Token::Op('(')) => {
                let v = self.expr()?;
                match self.next() {
                    Some(Token::Op(')')) => Ok(v),
                    _ => Err("missing `)`".into()),
                }
            }
            Some(t) => Err(format!("unexpected `{}`", show(&t))),
            None => Err("missing value".into()),
        }
    }
}

fn show(t: &Token) -> String {
    match t {
        Token::Num(v) => v.to_string(),
        Token::Ident(s) => s.clone(),
        Token::Op(c) => c.to_string(),
    }
}

pub fn eval(text: &str) -> Result<f64, String> {
    let mut p = Parser {
        tokens: tokenize(text)?,
        pos: 0,
    };
    let v = p.expr()?;
    if let Some(t) = p.peek() {
        return Err(format!("unexpected `{}`", show(t)));
    }
    if v.is_nan() {
        return Err("value is not a number".into());
    }
    Ok(v)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn arithmetic() {
        assert_eq!(eval("2*pi*20").unwrap(), 2.0 * std::f64::consts::PI * 20.0);
        assert_eq!(eval("81e-21").unwrap(), 81e-21);
        assert_eq!(eval("1.5E+3").unwrap(), 1500.0);
        assert_eq!(eval("-3").unwrap(), -3.0);
        assert_eq!(eval("2^3^2").unwrap(), 512.0);
        assert_eq!(eval("-(1 + 2) * 4 / 8").unwrap(), -1.5);
        assert_eq!(eval("pi/2").unwrap(), std::f64::consts::FRAC_PI_2);
        assert!(eval("inf").unwrap().is_infinite());
    }

    #[test]
    fn errors() {
        assert!(eval("").is_err());
        assert!(eval("2 *").is_err());
        assert!(eval("(1").is_err());
        assert!(eval("3 apples").is_err());
        assert!(eval("1 $ 2").is_err());
        assert!(eval("inf - inf").is_err());
    }
}
