//! Minimal arithmetic-expression evaluator for sampler definitions in
//! medium files: `+ - * / ^`, parentheses, the variables `x y z`, the
//! constants `pi` and `e`, and a handful of elementary functions.

use crate::error::{CoreError, Result};

#[derive(Debug, Clone)]
pub enum Expr {
    Num(f64),
    Var(usize),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, Box<Expr>),
    Neg(Box<Expr>),
    Call(Func, Box<Expr>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Tan,
    Exp,
    Sqrt,
    Abs,
    Ln,
    Sinh,
    Cosh,
    Tanh,
}

impl Expr {
    pub fn eval(&self, xyz: [f64; 3]) -> f64 {
        match self {
            Expr::Num(v) => *v,
            Expr::Var(i) => xyz[*i],
            Expr::Add(a, b) => a.eval(xyz) + b.eval(xyz),
            Expr::Sub(a, b) => a.eval(xyz) - b.eval(xyz),
            Expr::Mul(a, b) => a.eval(xyz) * b.eval(xyz),
            Expr::Div(a, b) => a.eval(xyz) / b.eval(xyz),
            Expr::Pow(a, b) => a.eval(xyz).powf(b.eval(xyz)),
            Expr::Neg(a) => -a.eval(xyz),
            Expr::Call(f, a) => {
                let v = a.eval(xyz);
                match f {
                    Func::Sin => v.sin(),
                    Func::Cos => v.cos(),
                    Func::Tan => v.tan(),
                    Func::Exp => v.exp(),
                    Func::Sqrt => v.sqrt(),
                    Func::Abs => v.abs(),
                    Func::Ln => v.ln(),
                    Func::Sinh => v.sinh(),
                    Func::Cosh => v.cosh(),
                    Func::Tanh => v.tanh(),
                }
            }
        }
    }
}

pub fn parse(input: &str) -> Result<Expr> {
    let mut p = Parser {
        src: input.as_bytes(),
        pos: 0,
    };
    let e = p.expr()?;
    p.skip_ws();
    if p.pos != p.src.len() {
        return Err(CoreError::Parse(format!(
            "unexpected trailing input at byte {} in expression {input:?}",
            p.pos
        )));
    }
    Ok(e)
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
}

impl<'a> Parser<'a> {
    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        loop {
            match self.peek() {
                Some(b'+') => {
                    self.pos += 1;
                    lhs = Expr::Add(Box::new(lhs), Box::new(self.term()?));
                }
                Some(b'-') => {
                    self.pos += 1;
                    lhs = Expr::Sub(Box::new(lhs), Box::new(self.term()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.unary()?;
        loop {
            match self.peek() {
                Some(b'*') => {
                    self.pos += 1;
                    lhs = Expr::Mul(Box::new(lhs), Box::new(self.unary()?));
                }
                Some(b'/') => {
                    self.pos += 1;
                    lhs = Expr::Div(Box::new(lhs), Box::new(self.unary()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn unary(&mut self) -> Result<Expr> {
        match self.peek() {
            Some(b'-') => {
                self.pos += 1;
                Ok(Expr::Neg(Box::new(self.unary()?)))
            }
            Some(b'+') => {
                self.pos += 1;
                self.unary()
            }
            _ => self.power(),
        }
    }

    fn power(&mut self) -> Result<Expr> {
        let base = self.atom()?;
        if self.peek() == Some(b'^') {
            self.pos += 1;
            // Right associative; unary binds the exponent sign.
            let exp = self.unary()?;
            return Ok(Expr::Pow(Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr> {
        match self.peek() {
            Some(b'(') => {
                self.pos += 1;
                let e = self.expr()?;
                if self.peek() != Some(b')') {
                    return Err(CoreError::Parse("missing closing parenthesis".into()));
                }
                self.pos += 1;
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() || c == b'_' => self.ident(),
            other => Err(CoreError::Parse(format!(
                "unexpected token {:?} in expression",
                other.map(|c| c as char)
            ))),
        }
    }

    fn number(&mut self) -> Result<Expr> {
        self.skip_ws();
        let start = self.pos;
        let mut seen_e = false;
        while self.pos < self.src.len() {
            let c = self.src[self.pos];
            let ok = c.is_ascii_digit()
                || c == b'.'
                || c == b'e'
                || c == b'E'
                || (seen_e
                    && (c == b'+' || c == b'-')
                    && matches!(self.src[self.pos - 1], b'e' | b'E'));
            if !ok {
                break;
            }
            if c == b'e' || c == b'E' {
                if seen_e {
                    break;
                }
                seen_e = true;
            }
            self.pos += 1;
        }
        let text = std::str::from_utf8(&self.src[start..self.pos]).unwrap();
        text.parse::<f64>()
            .map(Expr::Num)
            .map_err(|_| CoreError::Parse(format!("bad number literal {text:?}")))
    }

    fn ident(&mut self) -> Result<Expr> {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.src.len()
            && (self.src[self.pos].is_ascii_alphanumeric() || self.src[self.pos] == b'_')
        {
            self.pos += 1;
        }
        let name = std::str::from_utf8(&self.src[start..self.pos]).unwrap();
        match name {
            "x" => return Ok(Expr::Var(0)),
            "y" => return Ok(Expr::Var(1)),
            "z" => return Ok(Expr::Var(2)),
            "pi" => return Ok(Expr::Num(std::f64::consts::PI)),
            "e" => return Ok(Expr::Num(std::f64::consts::E)),
            _ => {}
        }
        let func = match name {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "tan" => Func::Tan,
            "exp" => Func::Exp,
            "sqrt" => Func::Sqrt,
            "abs" => Func::Abs,
            "ln" | "log" => Func::Ln,
            "sinh" => Func::Sinh,
            "cosh" => Func::Cosh,
            "tanh" => Func::Tanh,
            _ => {
                return Err(CoreError::Parse(format!(
                    "unknown identifier {name:?} (variables are x, y, z)"
                )))
            }
        };
        if self.peek() != Some(b'(') {
            return Err(CoreError::Parse(format!(
                "function {name:?} needs parenthesized argument"
            )));
        }
        self.pos += 1;
        let arg = self.expr()?;
        if self.peek() != Some(b')') {
            return Err(CoreError::Parse("missing closing parenthesis".into()));
        }
        self.pos += 1;
        Ok(Expr::Call(func, Box::new(arg)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn eval(s: &str, xyz: [f64; 3]) -> f64 {
        parse(s).unwrap().eval(xyz)
    }

    #[test]
    fn arithmetic_and_precedence() {
        assert_eq!(eval("1 + 2 * 3", [0.0; 3]), 7.0);
        assert_eq!(eval("(1 + 2) * 3", [0.0; 3]), 9.0);
        assert_eq!(eval("2 ^ 3 ^ 2", [0.0; 3]), 512.0); // right assoc
        assert_eq!(eval("-2 ^ 2", [0.0; 3]), -4.0); // -(2^2), math convention
        assert_eq!(eval("1 - 2 - 3", [0.0; 3]), -4.0);
        assert_eq!(eval("8 / 2 / 2", [0.0; 3]), 2.0);
    }

    #[test]
    fn variables_constants_functions() {
        let p = [0.5, -1.0, 2.0];
        assert_eq!(eval("x + 2*y + z", p), 0.5 - 2.0 + 2.0);
        assert!((eval("sin(pi/2)", p) - 1.0).abs() < 1e-15);
        assert!((eval("exp(0) + sqrt(4)", p) - 3.0).abs() < 1e-15);
        assert!((eval("abs(y)", p) - 1.0).abs() < 1e-15);
        assert!((eval("0.3*sin(3.0*x)*z", p) - 0.3 * 1.5f64.sin() * 2.0).abs() < 1e-15);
    }

    #[test]
    fn scientific_notation() {
        assert_eq!(eval("1.5e-3 + 2E2", [0.0; 3]), 0.0015 + 200.0);
    }

    #[test]
    fn rejects_garbage() {
        assert!(parse("1 +").is_err());
        assert!(parse("foo(1)").is_err());
        assert!(parse("sin 1").is_err());
        assert!(parse("(1").is_err());
        assert!(parse("1 2").is_err());
        assert!(parse("w + 1").is_err());
    }
}
