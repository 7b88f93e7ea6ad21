//! Grammars shipped with the crate. The sources live in the repository's
//! `grammars/` directory and are embedded at compile time.

use crate::grammar::{parse_bnf, Grammar};

/// `(name, BNF source)` for every bundled grammar.
pub const BUILTIN: &[(&str, &str)] = &[
    ("ant-g0", include_str!("../../../grammars/ant-g0.bnf")),
    ("ant-g1", include_str!("../../../grammars/ant-g1.bnf")),
    ("ant-g2", include_str!("../../../grammars/ant-g2.bnf")),
    ("ant-g3", include_str!("../../../grammars/ant-g3.bnf")),
    ("ant-g4", include_str!("../../../grammars/ant-g4.bnf")),
    (
        "keijzer6-g0",
        include_str!("../../../grammars/keijzer6-g0.bnf"),
    ),
    (
        "keijzer6-g6",
        include_str!("../../../grammars/keijzer6-g6.bnf"),
    ),
    (
        "vladislavleva4-g0",
        include_str!("../../../grammars/vladislavleva4-g0.bnf"),
    ),
    (
        "vladislavleva4-g6",
        include_str!("../../../grammars/vladislavleva4-g6.bnf"),
    ),
];

pub fn source(name: &str) -> Option<&'static str> {
    BUILTIN.iter().find(|(n, _)| *n == name).map(|(_, s)| *s)
}

/// Parses a bundled grammar by name.
pub fn builtin(name: &str) -> Option<Grammar> {
    source(name).map(|s| parse_bnf(s).expect("bundled grammars parse"))
}

/// All bundled grammars, parsed.
pub fn all() -> Vec<(&'static str, Grammar)> {
    BUILTIN
        .iter()
        .map(|(n, s)| (*n, parse_bnf(s).expect("bundled grammars parse")))
        .collect()
}

/// Santa Fe ant grammar `g<index>`, `index` in `0..=4`.
pub fn ant_grammar(index: usize) -> Grammar {
    builtin(&format!("ant-g{index}")).unwrap_or_else(|| panic!("no ant grammar g{index}"))
}

/// Regression grammar `g<variant>` for `problem` (`keijzer6` or
/// `vladislavleva4`; variant 0 or 6).
pub fn regression_grammar_file(problem: &str, variant: u8) -> Grammar {
    builtin(&format!("{problem}-g{variant}"))
        .unwrap_or_else(|| panic!("no grammar {problem}-g{variant}"))
}
