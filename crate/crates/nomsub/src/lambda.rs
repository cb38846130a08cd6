//! Untyped λ-terms in locally nameless form.
//!
//! Free variables are atoms, bound variables are de Bruijn indices, so a
//! term is its own α-equivalence class and substitution of terms for free
//! atoms is plain structural replacement: substituted terms carry no
//! dangling indices and binders carry no names, hence no capture is
//! possible. Named binders exist only in the parser and printer, which
//! chooses the least atom avoiding the free atoms in scope.

use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

use crate::atoms::{Atom, AtomSet, Perm, Renaming};

#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub enum LamTerm {
    Free(Atom),
    Bound(usize),
    App(Box<LamTerm>, Box<LamTerm>),
    Lam(Box<LamTerm>),
}

impl LamTerm {
    pub fn app(f: LamTerm, x: LamTerm) -> LamTerm {
        LamTerm::App(Box::new(f), Box::new(x))
    }

    pub fn lam(body: LamTerm) -> LamTerm {
        LamTerm::Lam(Box::new(body))
    }

    /// Abstracts the free atom `a`, producing the body of a new binder.
    pub fn close(&self, a: Atom) -> LamTerm {
        fn go(t: &LamTerm, a: Atom, depth: usize) -> LamTerm {
            match t {
                LamTerm::Free(b) if *b == a => LamTerm::Bound(depth),
                LamTerm::Free(b) => LamTerm::Free(*b),
                LamTerm::Bound(i) => LamTerm::Bound(*i),
                LamTerm::App(f, x) => LamTerm::app(go(f, a, depth), go(x, a, depth)),
                LamTerm::Lam(b) => LamTerm::lam(go(b, a, depth + 1)),
            }
        }
        go(self, a, 0)
    }

    pub fn free_atoms(&self) -> AtomSet {
        let mut out = AtomSet::new();
        fn go(t: &LamTerm, out: &mut AtomSet) {
            match t {
                LamTerm::Free(a) => out.insert(*a),
                LamTerm::Bound(_) => {}
                LamTerm::App(f, x) => {
                    go(f, out);
                    go(x, out);
                }
                LamTerm::Lam(b) => go(b, out),
            }
        }
        go(self, &mut out);
        out
    }

    /// True when every index points at an enclosing binder.
    pub fn is_locally_closed(&self) -> bool {
        fn go(t: &LamTerm, depth: usize) -> bool {
            match t {
                LamTerm::Free(_) => true,
                LamTerm::Bound(i) => *i < depth,
                LamTerm::App(f, x) => go(f, depth) && go(x, depth),
                LamTerm::Lam(b) => go(b, depth + 1),
            }
        }
        go(self, 0)
    }

    pub fn depth(&self) -> usize {
        match self {
            LamTerm::Free(_) | LamTerm::Bound(_) => 0,
            LamTerm::App(f, x) => 1 + f.depth().max(x.depth()),
            LamTerm::Lam(b) => 1 + b.depth(),
        }
    }

    pub fn perm_act(&self, p: &Perm) -> LamTerm {
        match self {
            LamTerm::Free(a) => LamTerm::Free(p.apply(*a)),
            LamTerm::Bound(i) => LamTerm::Bound(*i),
            LamTerm::App(f, x) => LamTerm::app(f.perm_act(p), x.perm_act(p)),
            LamTerm::Lam(b) => LamTerm::lam(b.perm_act(p)),
        }
    }

    pub fn ren_act(&self, r: &Renaming) -> LamTerm {
        match self {
            LamTerm::Free(a) => LamTerm::Free(r.apply(*a)),
            LamTerm::Bound(i) => LamTerm::Bound(*i),
            LamTerm::App(f, x) => LamTerm::app(f.ren_act(r), x.ren_act(r)),
            LamTerm::Lam(b) => LamTerm::lam(b.ren_act(r)),
        }
    }

    /// Simultaneous substitution of locally closed terms for free atoms.
    /// Atoms outside the map are left in place.
    pub fn subst_sim(&self, sub: &BTreeMap<Atom, LamTerm>) -> LamTerm {
        match self {
            LamTerm::Free(a) => sub.get(a).cloned().unwrap_or(LamTerm::Free(*a)),
            LamTerm::Bound(i) => LamTerm::Bound(*i),
            LamTerm::App(f, x) => LamTerm::app(f.subst_sim(sub), x.subst_sim(sub)),
            LamTerm::Lam(b) => LamTerm::lam(b.subst_sim(sub)),
        }
    }
}

/// Enumerates all locally closed terms of depth at most `depth` whose free
/// atoms lie in `stage`, in a deterministic order.
pub fn enumerate_terms(depth: usize, stage: &AtomSet) -> Vec<LamTerm> {
    fn go(depth: usize, stage: &[Atom], binders: usize) -> Vec<LamTerm> {
        let mut out: Vec<LamTerm> = Vec::new();
        for &a in stage {
            out.push(LamTerm::Free(a));
        }
        for i in 0..binders {
            out.push(LamTerm::Bound(i));
        }
        if depth > 0 {
            for b in go(depth - 1, stage, binders + 1) {
                out.push(LamTerm::lam(b));
            }
            let sub = go(depth - 1, stage, binders);
            for f in &sub {
                for x in &sub {
                    out.push(LamTerm::app(f.clone(), x.clone()));
                }
            }
        }
        out
    }
    let stage: Vec<Atom> = stage.iter().collect();
    let mut out = go(depth, &stage, 0);
    out.sort();
    out.dedup();
    out
}

impl fmt::Display for LamTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        // Binder names are reconstructed on the way out: each λ takes the
        // least atom free in its body's display context.
        fn name_for(body: &LamTerm, names: &[Atom]) -> Atom {
            let mut avoid = body.free_atoms();
            for &n in names {
                avoid.insert(n);
            }
            crate::atoms::fresh_atom(&avoid)
        }
        fn go(t: &LamTerm, names: &[Atom], prec: u8, f: &mut fmt::Formatter<'_>) -> fmt::Result {
            match t {
                LamTerm::Free(a) => write!(f, "{a}"),
                LamTerm::Bound(i) => {
                    if *i < names.len() {
                        write!(f, "{}", names[names.len() - 1 - i])
                    } else {
                        write!(f, "?{i}")
                    }
                }
                LamTerm::App(g, x) => {
                    if prec > 1 {
                        write!(f, "(")?;
                    }
                    go(g, names, 1, f)?;
                    write!(f, " ")?;
                    go(x, names, 2, f)?;
                    if prec > 1 {
                        write!(f, ")")?;
                    }
                    Ok(())
                }
                LamTerm::Lam(b) => {
                    if prec > 0 {
                        write!(f, "(")?;
                    }
                    let n = name_for(b, names);
                    write!(f, "λ{n}. ")?;
                    let mut inner = names.to_vec();
                    inner.push(n);
                    go(b, &inner, 0, f)?;
                    if prec > 0 {
                        write!(f, ")")?;
                    }
                    Ok(())
                }
            }
        }
        go(self, &[], 0, f)
    }
}

#[derive(Error, Debug, Clone, PartialEq, Eq)]
pub enum ParseError {
    #[error("unexpected character {ch:?} at byte {at}")]
    Unexpected { ch: char, at: usize },
    #[error("unexpected end of input at byte {at}")]
    Eof { at: usize },
    #[error("expected {expected} at byte {at}")]
    Expected { expected: &'static str, at: usize },
    #[error("unbound name {name} at byte {at}")]
    Unbound { name: String, at: usize },
}

struct Parser<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> Parser<'a> {
    fn skip_ws(&mut self) {
        while let Some(c) = self.peek() {
            if c.is_whitespace() {
                self.pos += c.len_utf8();
            } else {
                break;
            }
        }
    }

    fn peek(&self) -> Option<char> {
        self.src[self.pos..].chars().next()
    }

    fn name(&mut self) -> Result<Atom, ParseError> {
        let start = self.pos;
        let mut chars = self.src[self.pos..].chars();
        let first = chars.next().ok_or(ParseError::Eof { at: self.pos })?;
        if !first.is_ascii_lowercase() {
            return Err(ParseError::Unexpected { ch: first, at: self.pos });
        }
        self.pos += 1;
        let mut digits = String::new();
        while let Some(c) = self.peek() {
            if c.is_ascii_digit() {
                digits.push(c);
                self.pos += 1;
            } else {
                break;
            }
        }
        if first == 'a' && !digits.is_empty() {
            let n: u32 = digits.parse().map_err(|_| ParseError::Expected {
                expected: "atom index",
                at: start,
            })?;
            Ok(Atom(n))
        } else if digits.is_empty() {
            // single letters name the first 26 atoms
            Ok(Atom(first as u32 - 'a' as u32))
        } else {
            Err(ParseError::Expected {
                expected: "atom name",
                at: start,
            })
        }
    }

    fn atom_term(&mut self, binders: &mut Vec<Atom>) -> Result<LamTerm, ParseError> {
        self.skip_ws();
        match self.peek() {
            Some('(') => {
                self.pos += 1;
                let t = self.term(binders)?;
                self.skip_ws();
                if self.peek() == Some(')') {
                    self.pos += 1;
                    Ok(t)
                } else {
                    Err(ParseError::Expected {
                        expected: "closing parenthesis",
                        at: self.pos,
                    })
                }
            }
            Some(c) if c == 'λ' || c == '\\' => {
                self.pos += c.len_utf8();
                self.skip_ws();
                let n = self.name()?;
                self.skip_ws();
                if self.peek() != Some('.') {
                    return Err(ParseError::Expected {
                        expected: "dot after binder",
                        at: self.pos,
                    });
                }
                self.pos += 1;
                binders.push(n);
                let body = self.term(binders)?;
                binders.pop();
                Ok(LamTerm::lam(body.close(n)))
            }
            Some(c) if c.is_ascii_lowercase() => {
                let n = self.name()?;
                Ok(LamTerm::Free(n))
            }
            Some(c) => Err(ParseError::Unexpected { ch: c, at: self.pos }),
            None => Err(ParseError::Eof { at: self.pos }),
        }
    }

    fn term(&mut self, binders: &mut Vec<Atom>) -> Result<LamTerm, ParseError> {
        let mut t = self.atom_term(binders)?;
        loop {
            self.skip_ws();
            match self.peek() {
                Some(c) if c == '(' || c == 'λ' || c == '\\' || c.is_ascii_lowercase() => {
                    let arg = self.atom_term(binders)?;
                    t = LamTerm::app(t, arg);
                }
                _ => return Ok(t),
            }
        }
    }
}

/// Parses the grammar `t ::= a | λa. t | t t`, with `\` accepted for `λ`,
/// application associating to the left, and names being `aN` or a single
/// letter (naming atom `letter - 'a'`).
pub fn parse(src: &str) -> Result<LamTerm, ParseError> {
    let mut p = Parser { src, pos: 0 };
    let mut binders = Vec::new();
    let t = p.term(&mut binders)?;
    p.skip_ws();
    if p.pos != src.len() {
        return Err(ParseError::Unexpected {
            ch: p.peek().unwrap_or(' '),
            at: p.pos,
        });
    }
    // binder names shadow; anything left as a free occurrence of a binder
    // name was closed already, so the term is complete here
    Ok(t)
}
