use super::{CodonRange, Grammar, GrammarBuilder, GrammarError, Item};

const CODON_PREFIX: &str = "<GECodonValue{";

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Define,
    Bar,
    Nt(String),
    Lit(String),
    Codon(CodonRange),
}

#[derive(Debug, Clone)]
struct Spanned {
    tok: Tok,
    line: usize,
    column: usize,
}

fn syntax(line: usize, column: usize, message: impl Into<String>) -> GrammarError {
    GrammarError::Syntax {
        line,
        column,
        message: message.into(),
    }
}

/// Parses BNF text.
///
/// Rules are written `<name> ::= alt | alt ...`. A line that does not start
/// with `<name> ::=` continues the previous rule. Tokens are separated by
/// whitespace; quoted strings (`"..."` or `'...'`) are literals and may
/// contain spaces or `|`. `<GECodonValue{lo : hi : step}>` is a constant
/// terminal. Lines whose first non-blank character is `#` are comments.
/// The first rule's head is the start symbol.
pub fn parse_bnf(text: &str) -> Result<Grammar, GrammarError> {
    let mut rules: Vec<(String, usize, Vec<Spanned>)> = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let trimmed = line.trim_start();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let toks = tokenize(line, line_no)?;
        let is_head = matches!(
            (toks.first().map(|t| &t.tok), toks.get(1).map(|t| &t.tok)),
            (Some(Tok::Nt(_)), Some(Tok::Define))
        );
        if is_head {
            let name = match &toks[0].tok {
                Tok::Nt(n) => n.clone(),
                _ => unreachable!(),
            };
            if rules.iter().any(|(n, _, _)| *n == name) {
                return Err(GrammarError::DuplicateRule {
                    name,
                    line: line_no,
                });
            }
            rules.push((name, line_no, toks.into_iter().skip(2).collect()));
        } else {
            match rules.last_mut() {
                Some((_, _, body)) => body.extend(toks),
                None => {
                    return Err(syntax(
                        line_no,
                        1,
                        "expected a rule of the form <name> ::= ...",
                    ))
                }
            }
        }
    }
    if rules.is_empty() {
        return Err(GrammarError::Empty);
    }

    let mut builder = GrammarBuilder::new();
    for (name, line, body) in rules {
        builder.push(name, split_alternatives(body, line)?);
    }
    builder.build()
}

fn split_alternatives(
    body: Vec<Spanned>,
    head_line: usize,
) -> Result<Vec<Vec<Item>>, GrammarError> {
    let mut alts = Vec::new();
    let mut current: Vec<Item> = Vec::new();
    let mut last_bar: Option<(usize, usize)> = None;
    let n = body.len();
    for (i, sp) in body.into_iter().enumerate() {
        match sp.tok {
            Tok::Define => return Err(syntax(sp.line, sp.column, "unexpected '::='")),
            Tok::Bar => {
                if current.is_empty() {
                    return Err(syntax(sp.line, sp.column, "empty alternative before '|'"));
                }
                if i + 1 == n {
                    return Err(syntax(sp.line, sp.column, "trailing '|'"));
                }
                alts.push(std::mem::take(&mut current));
                last_bar = Some((sp.line, sp.column));
            }
            Tok::Nt(name) => current.push(Item::Nt(name)),
            Tok::Lit(text) => current.push(Item::Lit(text)),
            Tok::Codon(r) => current.push(Item::Codon(r)),
        }
    }
    if current.is_empty() {
        let (line, column) = last_bar.unwrap_or((head_line, 1));
        return Err(syntax(line, column, "rule has no productions"));
    }
    alts.push(current);
    Ok(alts)
}

fn tokenize(line: &str, line_no: usize) -> Result<Vec<Spanned>, GrammarError> {
    let chars: Vec<char> = line.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    let rest = |i: usize| chars[i..].iter().collect::<String>();
    while i < chars.len() {
        let c = chars[i];
        let column = i + 1;
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        let push = |out: &mut Vec<Spanned>, tok| {
            out.push(Spanned {
                tok,
                line: line_no,
                column,
            })
        };
        if c == '|' {
            push(&mut out, Tok::Bar);
            i += 1;
        } else if rest(i).starts_with("::=") {
            push(&mut out, Tok::Define);
            i += 3;
        } else if c == '"' || c == '\'' {
            let end = chars[i + 1..]
                .iter()
                .position(|&ch| ch == c)
                .ok_or_else(|| syntax(line_no, column, "unterminated quoted literal"))?;
            let text: String = chars[i + 1..i + 1 + end].iter().collect();
            if text.is_empty() {
                return Err(syntax(line_no, column, "empty literal"));
            }
            push(&mut out, Tok::Lit(text));
            i += end + 2;
        } else if rest(i).starts_with(CODON_PREFIX) {
            let tail = rest(i);
            let close = tail
                .find("}>")
                .ok_or_else(|| syntax(line_no, column, "unterminated GECodonValue terminal"))?;
            let inner = &tail[CODON_PREFIX.len()..close];
            let parts: Vec<&str> = inner.split(':').collect();
            if parts.len() != 3 {
                return Err(syntax(
                    line_no,
                    column,
                    "GECodonValue expects {low : high : step}",
                ));
            }
            let range = CodonRange::from_text(parts[0], parts[1], parts[2])
                .map_err(|e| syntax(line_no, column, e.to_string()))?;
            push(&mut out, Tok::Codon(range));
            i += tail[..close + 2].chars().count();
        } else if c == '<' {
            let end = chars[i + 1..]
                .iter()
                .position(|&ch| ch == '>' || ch.is_whitespace() || ch == '<');
            match end {
                Some(e) if chars[i + 1 + e] == '>' && e > 0 => {
                    let name: String = chars[i + 1..i + 1 + e].iter().collect();
                    push(&mut out, Tok::Nt(name));
                    i += e + 2;
                }
                _ => {
                    let (text, len) = bare(&chars[i..]);
                    push(&mut out, Tok::Lit(text));
                    i += len;
                }
            }
        } else {
            let (text, len) = bare(&chars[i..]);
            push(&mut out, Tok::Lit(text));
            i += len;
        }
    }
    Ok(out)
}

fn bare(chars: &[char]) -> (String, usize) {
    let len = chars
        .iter()
        .position(|&c| c.is_whitespace() || c == '|')
        .unwrap_or(chars.len());
    (chars[..len].iter().collect(), len)
}
