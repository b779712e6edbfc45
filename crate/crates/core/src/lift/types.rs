use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A simple type over base variables `V1, V2, ...`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum TypeExpr {
    Base(u32),
    /// `(a_1, ..., a_m) -> r`; a single argument is written `(a -> r)`.
    Arrow {
        args: Vec<TypeExpr>,
        result: Box<TypeExpr>,
    },
    Product(Vec<TypeExpr>),
}

impl TypeExpr {
    pub fn arrow(arg: TypeExpr, result: TypeExpr) -> TypeExpr {
        TypeExpr::Arrow {
            args: vec![arg],
            result: Box::new(result),
        }
    }

    /// Rewrites `s_1 -> (s_2 -> r)` as `(s_1, s_2) -> r` everywhere, so every
    /// arrow ends in a non-arrow type.
    pub fn curried(&self) -> TypeExpr {
        match self {
            TypeExpr::Base(i) => TypeExpr::Base(*i),
            TypeExpr::Product(ts) => TypeExpr::Product(ts.iter().map(TypeExpr::curried).collect()),
            TypeExpr::Arrow { args, result } => {
                let mut args: Vec<TypeExpr> = args.iter().map(TypeExpr::curried).collect();
                match result.curried() {
                    TypeExpr::Arrow {
                        args: inner,
                        result,
                    } => {
                        args.extend(inner);
                        TypeExpr::Arrow { args, result }
                    }
                    other => TypeExpr::Arrow {
                        args,
                        result: Box::new(other),
                    },
                }
            }
        }
    }

    /// Base variables in order of first occurrence.
    pub fn variables(&self) -> Vec<u32> {
        fn walk(t: &TypeExpr, out: &mut Vec<u32>) {
            match t {
                TypeExpr::Base(i) => {
                    if !out.contains(i) {
                        out.push(*i);
                    }
                }
                TypeExpr::Product(ts) => ts.iter().for_each(|t| walk(t, out)),
                TypeExpr::Arrow { args, result } => {
                    args.iter().for_each(|t| walk(t, out));
                    walk(result, out);
                }
            }
        }
        let mut out = Vec::new();
        walk(self, &mut out);
        out
    }

    pub fn is_base(&self) -> bool {
        matches!(self, TypeExpr::Base(_))
    }
}

impl fmt::Display for TypeExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let list = |f: &mut fmt::Formatter<'_>, ts: &[TypeExpr]| {
            for (i, t) in ts.iter().enumerate() {
                if i > 0 {
                    f.write_str(",")?;
                }
                write!(f, "{t}")?;
            }
            Ok(())
        };
        match self {
            TypeExpr::Base(i) => write!(f, "V{i}"),
            TypeExpr::Product(ts) => {
                f.write_str("(")?;
                list(f, ts)?;
                f.write_str(")")
            }
            TypeExpr::Arrow { args, result } if args.len() == 1 => match &args[0] {
                // Keeps a product argument apart from an argument list.
                TypeExpr::Product(_) => write!(f, "(({})->{result})", args[0]),
                arg => write!(f, "({arg}->{result})"),
            },
            TypeExpr::Arrow { args, result } => {
                f.write_str("((")?;
                list(f, args)?;
                write!(f, ")->{result})")
            }
        }
    }
}

impl From<TypeExpr> for String {
    fn from(t: TypeExpr) -> String {
        t.to_string()
    }
}

impl TryFrom<String> for TypeExpr {
    type Error = Error;

    fn try_from(s: String) -> Result<TypeExpr> {
        s.parse()
    }
}

impl FromStr for TypeExpr {
    type Err = Error;

    fn from_str(s: &str) -> Result<TypeExpr> {
        let mut p = Parser { src: s, pos: 0 };
        let t = p.expr()?;
        p.skip_ws();
        if p.pos != s.len() {
            return Err(p.error("trailing input"));
        }
        Ok(t)
    }
}

// expr := atom ["->" expr]
// atom := V<digits> | "(" expr {"," expr} ")"
struct Parser<'a> {
    src: &'a str,
    pos: usize,
}

impl Parser<'_> {
    fn rest(&self) -> &str {
        &self.src[self.pos..]
    }

    fn skip_ws(&mut self) {
        let trimmed = self.rest().trim_start();
        self.pos = self.src.len() - trimmed.len();
    }

    fn eat(&mut self, tok: &str) -> bool {
        self.skip_ws();
        if self.rest().starts_with(tok) {
            self.pos += tok.len();
            true
        } else {
            false
        }
    }

    fn error(&self, what: &str) -> Error {
        Error::TypeParse(format!("{what} at offset {} in {:?}", self.pos, self.src))
    }

    fn expr(&mut self) -> Result<TypeExpr> {
        let args = self.atom()?;
        if self.eat("->") {
            let result = self.expr()?;
            return Ok(TypeExpr::Arrow {
                args,
                result: Box::new(result),
            });
        }
        match args.len() {
            1 => Ok(args.into_iter().next().expect("one element")),
            _ => Ok(TypeExpr::Product(args)),
        }
    }

    fn atom(&mut self) -> Result<Vec<TypeExpr>> {
        if self.eat("(") {
            let mut items = vec![self.expr()?];
            while self.eat(",") {
                items.push(self.expr()?);
            }
            if !self.eat(")") {
                return Err(self.error("expected ')'"));
            }
            return Ok(items);
        }
        if self.eat("V") {
            let digits: String = self
                .rest()
                .chars()
                .take_while(char::is_ascii_digit)
                .collect();
            if digits.is_empty() {
                return Err(self.error("expected digits after 'V'"));
            }
            self.pos += digits.len();
            let i = digits
                .parse()
                .map_err(|_| self.error("variable index out of range"))?;
            return Ok(vec![TypeExpr::Base(i)]);
        }
        Err(self.error("expected 'V<digits>' or '('"))
    }
}
