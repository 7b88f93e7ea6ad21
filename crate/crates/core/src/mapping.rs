//! GE genotype-to-phenotype mapping and tree-to-genome back-mapping.
//!
//! Mapping is depth-first, leftmost non-terminal first. A rule with `k > 1`
//! productions consumes one codon `c` and takes production `c mod k`; a rule
//! with a single production consumes nothing. Codon-value terminals consume
//! one codon each.

use rand::Rng;
use thiserror::Error;

use crate::derivation::DerivationTree;
use crate::grammar::{CodonRange, Grammar, NtId, Symbol};

/// A GE genotype: a non-empty sequence of 32-bit codons.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Genome(Vec<u32>);

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MappingError {
    #[error("a genome needs at least one codon")]
    EmptyGenome,
    #[error("tree does not conform to the grammar: {0}")]
    Nonconforming(String),
}

impl Genome {
    pub fn new(codons: Vec<u32>) -> Result<Self, MappingError> {
        if codons.is_empty() {
            Err(MappingError::EmptyGenome)
        } else {
            Ok(Genome(codons))
        }
    }

    pub fn codons(&self) -> &[u32] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_codons(self) -> Vec<u32> {
        self.0
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MappingOutcome {
    /// `None` when the genome ran out with non-terminals still open.
    pub tree: Option<DerivationTree>,
    pub codons_used: usize,
    pub wraps_used: usize,
}

impl MappingOutcome {
    pub fn is_valid(&self) -> bool {
        self.tree.is_some()
    }
}

/// Decodes a codon into a grid constant: `low + (c mod n) * step`, rounded
/// to the grid's precision, where `n` is the number of grid points.
pub fn codon_constant(codon: u32, range: &CodonRange) -> f64 {
    range.value_at(codon as u64)
}

struct Reader<'a> {
    codons: &'a [u32],
    pos: usize,
    used: usize,
    wraps: usize,
    max_wraps: usize,
}

impl Reader<'_> {
    fn next(&mut self) -> Option<u32> {
        if self.pos == self.codons.len() {
            if self.wraps >= self.max_wraps {
                return None;
            }
            self.wraps += 1;
            self.pos = 0;
        }
        let c = self.codons[self.pos];
        self.pos += 1;
        self.used += 1;
        Some(c)
    }
}

/// Maps `genome` through `g`, starting at the start symbol.
pub fn map(g: &Grammar, genome: &Genome, max_wraps: usize) -> MappingOutcome {
    map_from(g, g.start(), genome, max_wraps)
}

pub fn map_from(g: &Grammar, root: NtId, genome: &Genome, max_wraps: usize) -> MappingOutcome {
    let mut reader = Reader {
        codons: genome.codons(),
        pos: 0,
        used: 0,
        wraps: 0,
        max_wraps,
    };
    let tree = expand(g, root, &mut reader);
    MappingOutcome {
        tree,
        codons_used: reader.used,
        wraps_used: reader.wraps,
    }
}

fn expand(g: &Grammar, nt: NtId, reader: &mut Reader<'_>) -> Option<DerivationTree> {
    let prods = g.productions(nt);
    let chosen = if prods.len() == 1 {
        0
    } else {
        (reader.next()? as usize) % prods.len()
    };
    let mut children = Vec::with_capacity(prods[chosen].symbols.len());
    for sym in &prods[chosen].symbols {
        children.push(match sym {
            Symbol::NonTerminal(child) => expand(g, *child, reader)?,
            Symbol::Literal(t) => DerivationTree::Literal(t.clone()),
            Symbol::CodonValue(r) => DerivationTree::Constant {
                value: codon_constant(reader.next()?, r),
                decimals: r.decimals,
            },
        });
    }
    Some(DerivationTree::NonTerminal {
        nt,
        chosen,
        children,
    })
}

/// Random codon `c` with `c mod k == index`, uniform over all such 32-bit values.
fn degenerate_codon<R: Rng + ?Sized>(index: u64, k: u64, rng: &mut R) -> u32 {
    let max_r = (u32::MAX as u64 - index) / k;
    let r = rng.gen_range(0..=max_r);
    (index + k * r) as u32
}

/// Encodes a tree as the genome that maps back to it (with zero wraps).
/// Each decision gets a random codon from its residue class, so the
/// back-mapped population keeps GE's usual degeneracy.
pub fn backmap<R: Rng + ?Sized>(
    g: &Grammar,
    tree: &DerivationTree,
    rng: &mut R,
) -> Result<Genome, MappingError> {
    let mut codons = Vec::new();
    encode(g, tree, rng, &mut codons)?;
    if codons.is_empty() {
        // a tree with no decisions maps from any genome
        codons.push(rng.gen());
    }
    Genome::new(codons)
}

fn encode<R: Rng + ?Sized>(
    g: &Grammar,
    tree: &DerivationTree,
    rng: &mut R,
    out: &mut Vec<u32>,
) -> Result<(), MappingError> {
    let bad = |why: String| Err(MappingError::Nonconforming(why));
    let DerivationTree::NonTerminal {
        nt,
        chosen,
        children,
    } = tree
    else {
        return bad("expected a non-terminal node".into());
    };
    if !g.is_defined(*nt) {
        return bad(format!("unknown non-terminal #{}", nt.0));
    }
    let prods = g.productions(*nt);
    let Some(prod) = prods.get(*chosen) else {
        return bad(format!("<{}> has no production {}", g.name(*nt), chosen));
    };
    if prod.symbols.len() != children.len() {
        return bad(format!("<{}> arity mismatch", g.name(*nt)));
    }
    if prods.len() > 1 {
        out.push(degenerate_codon(*chosen as u64, prods.len() as u64, rng));
    }
    for (sym, child) in prod.symbols.iter().zip(children) {
        match (sym, child) {
            (Symbol::NonTerminal(want), DerivationTree::NonTerminal { nt: got, .. })
                if want == got =>
            {
                encode(g, child, rng, out)?
            }
            (Symbol::Literal(a), DerivationTree::Literal(b)) if a == b => {}
            (Symbol::CodonValue(r), DerivationTree::Constant { value, .. }) => {
                let Some(idx) = r.index_of(*value) else {
                    return bad(format!("constant {value} is off the grid {r}"));
                };
                out.push(degenerate_codon(idx, r.grid_len(), rng));
            }
            _ => {
                return bad(format!(
                    "child does not match {} in <{}>",
                    g.render_symbol(sym),
                    g.name(*nt)
                ))
            }
        }
    }
    Ok(())
}
