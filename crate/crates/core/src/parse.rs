//! Text formats.
//!
//! Queries are written Datalog-style, `Q(x, y) :- R1(z, x), R2(z, y).`
//! (the final period is optional). Dependencies are one per line,
//! `R2 : 1 -> 2` for an FD and `R2 : 1 -> 2 @ 5` for a cardinality
//! dependency; position lists may be separated by commas or blanks and a
//! right-hand side may list several positions. `#` starts a comment in both
//! formats.

use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::model::{is_fresh_name, Atom, Query, RawDependency, Schema, Var};

struct Scanner {
    chars: Vec<char>,
    pos: usize,
    line: usize,
    col: usize,
}

impl Scanner {
    fn new(src: &str) -> Self {
        Scanner { chars: src.chars().collect(), pos: 0, line: 1, col: 1 }
    }

    fn err<T>(&self, message: impl Into<String>) -> Result<T> {
        Err(Error::Parse { line: self.line, column: self.col, message: message.into() })
    }

    fn peek(&self) -> Option<char> {
        self.chars.get(self.pos).copied()
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

    fn skip_ws(&mut self) {
        while let Some(c) = self.peek() {
            if c == '#' {
                while self.peek().is_some_and(|c| c != '\n') {
                    self.bump();
                }
            } else if c.is_whitespace() {
                self.bump();
            } else {
                break;
            }
        }
    }

    fn eat(&mut self, s: &str) -> bool {
        self.skip_ws();
        let n = s.chars().count();
        if self.chars[self.pos..].iter().take(n).copied().eq(s.chars()) {
            for _ in 0..n {
                self.bump();
            }
            true
        } else {
            false
        }
    }

    fn expect(&mut self, s: &str) -> Result<()> {
        if self.eat(s) {
            Ok(())
        } else {
            match self.peek() {
                Some(c) => self.err(alloc::format!("expected `{s}`, found `{c}`")),
                None => self.err(alloc::format!("expected `{s}`, found end of input")),
            }
        }
    }

    fn ident(&mut self, what: &str) -> Result<String> {
        self.skip_ws();
        let start = (self.line, self.col);
        let mut s = String::new();
        while let Some(c) = self.peek() {
            if c.is_alphanumeric() || c == '_' || (c == '\'' && !s.is_empty()) {
                s.push(c);
                self.bump();
            } else {
                break;
            }
        }
        let first = s.chars().next();
        let ok = match first {
            Some(c) if c.is_alphabetic() => true,
            Some('_') => is_fresh_name(&s),
            _ => false,
        };
        if !ok {
            let message = if s.is_empty() {
                alloc::format!("expected {what}")
            } else {
                alloc::format!("invalid {what} `{s}` (names start with a letter; `_t<k>` is reserved)")
            };
            return Err(Error::Parse { line: start.0, column: start.1, message });
        }
        Ok(s)
    }

    fn number(&mut self) -> Result<usize> {
        self.skip_ws();
        let mut s = String::new();
        while let Some(c) = self.peek().filter(char::is_ascii_digit) {
            s.push(c);
            self.bump();
        }
        if s.is_empty() {
            return self.err("expected a number");
        }
        match s.parse() {
            Ok(n) => Ok(n),
            Err(_) => self.err(alloc::format!("number `{s}` is too large")),
        }
    }

    fn at_end(&mut self) -> bool {
        self.skip_ws();
        self.peek().is_none()
    }

    fn var_list(&mut self) -> Result<Vec<Var>> {
        self.expect("(")?;
        let mut out = Vec::new();
        if self.eat(")") {
            return Ok(out);
        }
        loop {
            out.push(Var::new(&self.ident("variable")?));
            if self.eat(")") {
                return Ok(out);
            }
            self.expect(",")?;
        }
    }
}

/// Parses one query.
pub fn parse_query(text: &str) -> Result<Query> {
    let mut sc = Scanner::new(text);
    let name = sc.ident("query name")?;
    let head = sc.var_list()?;
    if !sc.eat(":-") {
        sc.expect("←")?;
    }
    let mut atoms = Vec::new();
    loop {
        let rel = sc.ident("relation name")?;
        let args = sc.var_list()?;
        atoms.push(Atom { relation: Arc::from(rel.as_str()), args });
        if !sc.eat(",") {
            break;
        }
    }
    sc.eat(".");
    if !sc.at_end() {
        return sc.err("unexpected trailing input");
    }
    Query::new(&name, head, atoms).map_err(|e| match e {
        Error::Schema(m) => Error::Parse { line: 1, column: 1, message: m },
        other => other,
    })
}

/// Parses a dependency file into raw (possibly multi-rhs) dependencies.
pub fn parse_dependencies(text: &str) -> Result<Vec<RawDependency>> {
    let mut out = Vec::new();
    let mut sc = Scanner::new(text);
    while !sc.at_end() {
        let line = sc.line;
        let relation = sc.ident("relation name")?;
        sc.expect(":")?;
        let lhs = position_list(&mut sc, line)?;
        sc.expect("->")?;
        let rhs = position_list(&mut sc, line)?;
        let mut bound = 1u32;
        if sc.eat("@") {
            let n = sc.number()?;
            if n == 0 || n > u32::MAX as usize {
                return sc.err("bound must be a positive integer");
            }
            bound = n as u32;
        }
        sc.skip_ws();
        if sc.line == line && sc.peek().is_some() {
            return sc.err("expected end of line after dependency");
        }
        out.push(RawDependency { relation: Arc::from(relation.as_str()), lhs, rhs, bound });
    }
    Ok(out)
}

fn position_list(sc: &mut Scanner, line: usize) -> Result<BTreeSet<usize>> {
    let mut out = BTreeSet::new();
    loop {
        out.insert(sc.number()?);
        sc.eat(",");
        sc.skip_ws();
        if sc.line != line || !sc.peek().is_some_and(|c| c.is_ascii_digit()) {
            return Ok(out);
        }
    }
}

/// Parses a dependency file and normalizes it against the relations of `q`.
pub fn parse_schema(q: &Query, deps_text: &str) -> Result<Schema> {
    Schema::for_query(q, &parse_dependencies(deps_text)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Dependency;
    use alloc::string::ToString;

    #[test]
    fn parses_query() {
        let q = parse_query("Q(x, y) :- R1(z, x), R2(z, y).").unwrap();
        assert_eq!(q.head(), &[Var::new("x"), Var::new("y")]);
        assert_eq!(q.atoms().len(), 2);
        assert_eq!(q.to_string(), "Q(x, y) :- R1(z, x), R2(z, y).");
        let b = parse_query("# boolean\nQ() :- R(x)").unwrap();
        assert!(b.head().is_empty());
    }

    #[test]
    fn query_round_trip_with_fresh_variables() {
        let text = "Q(x, y) :- R1(x, y), R2(x, z, y, w), R2(u, z, _t1, _t2), R3(w, y, z).";
        assert_eq!(parse_query(text).unwrap().to_string(), text);
    }

    #[test]
    fn query_errors_have_locations() {
        match parse_query("Q(x) :- R(x,\n  ).") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
        assert!(parse_query("Q(x) :- R(_y)").is_err());
        assert!(parse_query("Q(x) :- R(y)").is_err());
        assert!(parse_query("Q(x) R(x)").is_err());
        assert!(parse_query("Q(x) :- R(x). extra").is_err());
    }

    #[test]
    fn parses_dependencies() {
        let raw = parse_dependencies("# deps\nR2 : 1 -> 2\nR3: 2,3 -> 1 @ 5\nR : 1 -> 2 3\n").unwrap();
        assert_eq!(raw.len(), 3);
        assert_eq!(raw[1].bound, 5);
        assert_eq!(raw[1].lhs.iter().copied().collect::<Vec<_>>(), [2, 3]);
        assert_eq!(raw[2].rhs.len(), 2);
        assert!(parse_dependencies("R : -> 2").is_err());
        assert!(parse_dependencies("R : 1 -> 2 @ 0").is_err());
        assert!(parse_dependencies("R : 1 -> 2 junk").is_err());
    }

    #[test]
    fn schema_round_trip() {
        let q = parse_query("Q(x) :- R(x, y, z), S(y, z)").unwrap();
        let s = parse_schema(&q, "R: 1 -> 2, 3 @ 2\nS : 2 -> 1").unwrap();
        assert_eq!(s.deps()[0], Dependency::cd("R", &[1], 2, 2));
        let again = parse_schema(&q, &s.deps_text()).unwrap();
        assert_eq!(again, s);
    }
}
