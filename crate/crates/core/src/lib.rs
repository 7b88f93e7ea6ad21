//! Grammar-guided evolutionary computation.
//!
//! The crate covers the full path from a BNF grammar to experiment plots:
//!
//! * [`grammar`]: parsing, validation and depth analysis of BNF grammars.
//! * [`transform`]: balancing, inlining, unlinking and bias reports.
//! * [`derivation`] and [`mapping`]: derivation trees and the GE
//!   genotype-to-phenotype mapping with its inverse.
//! * [`init`]: random, sensible and PTC2 initialisation.
//! * [`engine`]: GE, CFG-GP and random search.
//! * [`problems`]: symbolic regression and the Santa Fe ant.
//! * [`stats`] and [`harness`]: confidence curves, experiment grids, CSV
//!   output and SVG plots.
//!
//! ```
//! use ggec::grammar::{analyze, parse_bnf};
//! use ggec::mapping::{map, Genome};
//!
//! let g = parse_bnf("<e> ::= x | ( <e> <e> )").unwrap();
//! let out = map(&g, &Genome::new(vec![1, 0, 0]).unwrap(), 0);
//! assert_eq!(out.tree.unwrap().phenotype(), "( x x )");
//! assert_eq!(analyze(&g).unwrap().min_depth(g.start()), 2);
//! ```

pub mod corpus;
pub mod derivation;
pub mod engine;
pub mod grammar;
pub mod harness;
pub mod init;
pub mod mapping;
pub mod problems;
pub mod stats;
pub mod transform;
