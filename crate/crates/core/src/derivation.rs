//! Derivation trees: the CFG-GP genotype and the GE phenotype precursor.
//!
//! Trees are values. Operators never mutate a tree in place; they build a
//! new one, so populations can share parents freely across threads.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::sync::Arc;

use thiserror::Error;

use crate::grammar::{Grammar, NtId, Symbol};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DerivationError {
    #[error("no node at location {0:?}")]
    InvalidLocation(Vec<usize>),
    #[error("node at {0:?} is not a non-terminal")]
    NotANonTerminal(Vec<usize>),
    #[error("cannot put a <{found}> subtree where <{expected}> is required")]
    Mismatch { expected: String, found: String },
    #[error("tree does not conform to grammar at {location:?}: {reason}")]
    Nonconforming {
        location: Vec<usize>,
        reason: String,
    },
    #[error("malformed debug tree at byte {pos}: {reason}")]
    DebugSyntax { pos: usize, reason: String },
}

/// Path from the root: the child index taken at each step. The root is `[]`.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Location(pub Vec<usize>);

impl Location {
    pub fn root() -> Self {
        Location(Vec::new())
    }

    pub fn child(&self, index: usize) -> Self {
        let mut v = self.0.clone();
        v.push(index);
        Location(v)
    }

    /// Depth of the node at this location, the root being at depth 1.
    pub fn node_depth(&self) -> usize {
        self.0.len() + 1
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum DerivationTree {
    NonTerminal {
        nt: NtId,
        chosen: usize,
        children: Vec<DerivationTree>,
    },
    Literal(Arc<str>),
    Constant {
        value: f64,
        decimals: u8,
    },
}

/// A terminal of the yield, in left-to-right order.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Leaf<'a> {
    Literal(&'a str),
    Constant(f64),
}

impl DerivationTree {
    pub fn nt(&self) -> Option<NtId> {
        match self {
            DerivationTree::NonTerminal { nt, .. } => Some(*nt),
            _ => None,
        }
    }

    pub fn children(&self) -> &[DerivationTree] {
        match self {
            DerivationTree::NonTerminal { children, .. } => children,
            _ => &[],
        }
    }

    /// Node count on the longest root-to-leaf path.
    pub fn depth(&self) -> usize {
        match self {
            DerivationTree::NonTerminal { children, .. } => {
                1 + children.iter().map(|c| c.depth()).max().unwrap_or(0)
            }
            _ => 1,
        }
    }

    /// Total number of nodes, terminals included.
    pub fn size(&self) -> usize {
        1 + self.children().iter().map(|c| c.size()).sum::<usize>()
    }

    pub fn leaves(&self) -> Vec<Leaf<'_>> {
        let mut out = Vec::new();
        self.collect_leaves(&mut out);
        out
    }

    fn collect_leaves<'a>(&'a self, out: &mut Vec<Leaf<'a>>) {
        match self {
            DerivationTree::NonTerminal { children, .. } => {
                for c in children {
                    c.collect_leaves(out);
                }
            }
            DerivationTree::Literal(t) => out.push(Leaf::Literal(t)),
            DerivationTree::Constant { value, .. } => out.push(Leaf::Constant(*value)),
        }
    }

    /// Terminal yield, single-space separated; constants printed at their
    /// grid precision.
    pub fn phenotype(&self) -> String {
        let mut s = String::new();
        self.write_phenotype(&mut s);
        s
    }

    fn write_phenotype(&self, s: &mut String) {
        match self {
            DerivationTree::NonTerminal { children, .. } => {
                for c in children {
                    c.write_phenotype(s);
                }
            }
            DerivationTree::Literal(t) => {
                if !s.is_empty() {
                    s.push(' ');
                }
                s.push_str(t);
            }
            DerivationTree::Constant { value, decimals } => {
                if !s.is_empty() {
                    s.push(' ');
                }
                let _ = write!(s, "{:.*}", *decimals as usize, value);
            }
        }
    }

    pub fn get(&self, at: &Location) -> Option<&DerivationTree> {
        let mut node = self;
        for &i in &at.0 {
            node = node.children().get(i)?;
        }
        Some(node)
    }

    /// Non-terminal nodes in pre-order with their non-terminal.
    pub fn nonterminal_nodes(&self) -> Vec<(Location, NtId)> {
        let mut out = Vec::new();
        let mut path = Vec::new();
        self.walk_nonterminals(&mut path, &mut |loc, nt| {
            out.push((Location(loc.to_vec()), nt))
        });
        out
    }

    fn walk_nonterminals(&self, path: &mut Vec<usize>, f: &mut impl FnMut(&[usize], NtId)) {
        if let DerivationTree::NonTerminal { nt, children, .. } = self {
            f(path, *nt);
            for (i, c) in children.iter().enumerate() {
                path.push(i);
                c.walk_nonterminals(path, f);
                path.pop();
            }
        }
    }

    /// Every non-terminal node grouped by non-terminal, each list in pre-order.
    pub fn nodes_by_nonterminal(&self) -> BTreeMap<NtId, Vec<Location>> {
        let mut map: BTreeMap<NtId, Vec<Location>> = BTreeMap::new();
        let mut path = Vec::new();
        self.walk_nonterminals(&mut path, &mut |loc, nt| {
            map.entry(nt).or_default().push(Location(loc.to_vec()))
        });
        map
    }

    /// Returns a copy with the subtree at `at` replaced by `sub`. Both must
    /// be rooted at the same non-terminal.
    pub fn replace_subtree(
        &self,
        at: &Location,
        sub: DerivationTree,
    ) -> Result<DerivationTree, DerivationError> {
        let target = self
            .get(at)
            .ok_or_else(|| DerivationError::InvalidLocation(at.0.clone()))?;
        let expected = target
            .nt()
            .ok_or_else(|| DerivationError::NotANonTerminal(at.0.clone()))?;
        match sub.nt() {
            Some(found) if found == expected => {}
            found => {
                return Err(DerivationError::Mismatch {
                    expected: format!("#{}", expected.0),
                    found: found.map_or("terminal".into(), |f| format!("#{}", f.0)),
                })
            }
        }
        Ok(self.replaced(&at.0, sub))
    }

    fn replaced(&self, path: &[usize], sub: DerivationTree) -> DerivationTree {
        match path.split_first() {
            None => sub,
            Some((&i, rest)) => match self {
                DerivationTree::NonTerminal {
                    nt,
                    chosen,
                    children,
                } => {
                    let mut children = children.clone();
                    children[i] = children[i].replaced(rest, sub);
                    DerivationTree::NonTerminal {
                        nt: *nt,
                        chosen: *chosen,
                        children,
                    }
                }
                _ => unreachable!("location validated by caller"),
            },
        }
    }

    /// Like [`replace_subtree`](Self::replace_subtree) but with non-terminal
    /// names in the error message.
    pub fn replace_subtree_named(
        &self,
        g: &Grammar,
        at: &Location,
        sub: DerivationTree,
    ) -> Result<DerivationTree, DerivationError> {
        self.replace_subtree(at, sub.clone()).map_err(|e| match e {
            DerivationError::Mismatch { .. } => DerivationError::Mismatch {
                expected: self
                    .get(at)
                    .and_then(|t| t.nt())
                    .map_or(String::new(), |n| g.name(n).to_string()),
                found: sub
                    .nt()
                    .map_or("terminal".to_string(), |n| g.name(n).to_string()),
            },
            other => other,
        })
    }

    /// Checks that the tree is complete and follows `g` everywhere.
    pub fn conforms(&self, g: &Grammar) -> Result<(), DerivationError> {
        let mut path = Vec::new();
        self.check(g, &mut path)
    }

    fn check(&self, g: &Grammar, path: &mut Vec<usize>) -> Result<(), DerivationError> {
        let fail = |path: &Vec<usize>, reason: String| DerivationError::Nonconforming {
            location: path.clone(),
            reason,
        };
        let DerivationTree::NonTerminal {
            nt,
            chosen,
            children,
        } = self
        else {
            return Err(fail(
                path,
                "root of a (sub)tree must be a non-terminal".into(),
            ));
        };
        if !g.is_defined(*nt) {
            return Err(fail(path, format!("unknown non-terminal #{}", nt.0)));
        }
        let prods = g.productions(*nt);
        let prod = prods.get(*chosen).ok_or_else(|| {
            fail(
                path,
                format!("<{}> has no production {}", g.name(*nt), chosen),
            )
        })?;
        if prod.symbols.len() != children.len() {
            return Err(fail(
                path,
                format!(
                    "<{}> production {} has {} symbols but node has {} children",
                    g.name(*nt),
                    chosen,
                    prod.symbols.len(),
                    children.len()
                ),
            ));
        }
        for (i, (sym, child)) in prod.symbols.iter().zip(children).enumerate() {
            path.push(i);
            match (sym, child) {
                (Symbol::NonTerminal(want), DerivationTree::NonTerminal { nt: got, .. }) => {
                    if want != got {
                        return Err(fail(
                            path,
                            format!("expected <{}>, found <{}>", g.name(*want), g.name(*got)),
                        ));
                    }
                    child.check(g, path)?;
                }
                (Symbol::Literal(a), DerivationTree::Literal(b)) if a == b => {}
                (Symbol::CodonValue(r), DerivationTree::Constant { value, .. }) => {
                    if r.index_of(*value).is_none() {
                        return Err(fail(path, format!("constant {value} is off the grid {r}")));
                    }
                }
                _ => return Err(fail(path, format!("expected {}", g.render_symbol(sym)))),
            }
            path.pop();
        }
        Ok(())
    }

    /// Bracketed form `name#chosen(children...)`; literals are quoted,
    /// constants printed at grid precision.
    pub fn to_debug_string(&self, g: &Grammar) -> String {
        let mut s = String::new();
        self.write_debug(g, &mut s);
        s
    }

    fn write_debug(&self, g: &Grammar, s: &mut String) {
        match self {
            DerivationTree::NonTerminal {
                nt,
                chosen,
                children,
            } => {
                let _ = write!(s, "{}#{}(", g.name(*nt), chosen);
                for (i, c) in children.iter().enumerate() {
                    if i > 0 {
                        s.push(' ');
                    }
                    c.write_debug(g, s);
                }
                s.push(')');
            }
            DerivationTree::Literal(t) => {
                let _ = write!(s, "{:?}", &**t);
            }
            DerivationTree::Constant { value, decimals } => {
                let _ = write!(s, "{:.*}", *decimals as usize, value);
            }
        }
    }

    /// Inverse of [`to_debug_string`](Self::to_debug_string). The result is
    /// not checked against the grammar; call [`conforms`](Self::conforms).
    pub fn from_debug_string(g: &Grammar, text: &str) -> Result<DerivationTree, DerivationError> {
        let mut p = DebugParser {
            bytes: text.as_bytes(),
            pos: 0,
            g,
        };
        let t = p.tree()?;
        p.skip_ws();
        if p.pos != p.bytes.len() {
            return Err(p.err("trailing input"));
        }
        Ok(t)
    }
}

struct DebugParser<'a> {
    bytes: &'a [u8],
    pos: usize,
    g: &'a Grammar,
}

impl DebugParser<'_> {
    fn err(&self, reason: &str) -> DerivationError {
        DerivationError::DebugSyntax {
            pos: self.pos,
            reason: reason.into(),
        }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn tree(&mut self) -> Result<DerivationTree, DerivationError> {
        self.skip_ws();
        match self.bytes.get(self.pos) {
            None => Err(self.err("unexpected end of input")),
            Some(b'"') => self.literal(),
            Some(c) if c.is_ascii_digit() || *c == b'-' || *c == b'+' => self.constant(),
            Some(_) => self.node(),
        }
    }

    fn literal(&mut self) -> Result<DerivationTree, DerivationError> {
        self.pos += 1;
        let mut out = String::new();
        let text =
            std::str::from_utf8(&self.bytes[self.pos..]).map_err(|_| self.err("invalid utf-8"))?;
        let mut chars = text.char_indices();
        while let Some((i, c)) = chars.next() {
            match c {
                '"' => {
                    self.pos += i + 1;
                    return Ok(DerivationTree::Literal(Arc::from(out.as_str())));
                }
                '\\' => match chars.next() {
                    Some((_, 'n')) => out.push('\n'),
                    Some((_, 't')) => out.push('\t'),
                    Some((_, other)) => out.push(other),
                    None => break,
                },
                c => out.push(c),
            }
        }
        Err(self.err("unterminated literal"))
    }

    fn constant(&mut self) -> Result<DerivationTree, DerivationError> {
        let start = self.pos;
        while self.pos < self.bytes.len()
            && matches!(
                self.bytes[self.pos],
                b'0'..=b'9' | b'.' | b'-' | b'+' | b'e' | b'E'
            )
        {
            self.pos += 1;
        }
        let text = std::str::from_utf8(&self.bytes[start..self.pos]).unwrap_or("");
        let value: f64 = text.parse().map_err(|_| self.err("bad constant"))?;
        let decimals = text.split_once('.').map_or(0, |(_, f)| f.len()) as u8;
        Ok(DerivationTree::Constant { value, decimals })
    }

    fn node(&mut self) -> Result<DerivationTree, DerivationError> {
        let start = self.pos;
        while self.pos < self.bytes.len() && self.bytes[self.pos] != b'#' {
            self.pos += 1;
        }
        let name = std::str::from_utf8(&self.bytes[start..self.pos]).unwrap_or("");
        let nt = self
            .g
            .id(name)
            .ok_or_else(|| self.err(&format!("unknown non-terminal '{name}'")))?;
        self.pos += 1;
        let num_start = self.pos;
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        let chosen: usize = std::str::from_utf8(&self.bytes[num_start..self.pos])
            .unwrap_or("")
            .parse()
            .map_err(|_| self.err("expected production index"))?;
        if self.bytes.get(self.pos) != Some(&b'(') {
            return Err(self.err("expected '('"));
        }
        self.pos += 1;
        let mut children = Vec::new();
        loop {
            self.skip_ws();
            match self.bytes.get(self.pos) {
                Some(b')') => {
                    self.pos += 1;
                    break;
                }
                None => return Err(self.err("unclosed '('")),
                _ => children.push(self.tree()?),
            }
        }
        Ok(DerivationTree::NonTerminal {
            nt,
            chosen,
            children,
        })
    }
}
