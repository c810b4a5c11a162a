//! Filter expressions: `facet:v1|v2;facet2:v3`.
//!
//! Values of one clause are alternatives, clauses are conjunctive. `\`
//! escapes the next character, so values may contain `;`, `|`, `:` or `\`.
//! Empty clauses and clauses without values constrain nothing.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct Clause {
    pub facet: String,
    /// Sorted and distinct.
    pub values: Vec<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FilterExpr {
    /// Sorted; only clauses with at least one value.
    pub clauses: Vec<Clause>,
}

impl FilterExpr {
    pub fn parse(s: &str) -> Result<Self> {
        let mut clauses = Vec::new();
        let mut facet: Option<String> = None;
        let mut values: Vec<String> = Vec::new();
        let mut cur = String::new();
        let mut chars = s.chars();
        let mut finish_clause = |facet: &mut Option<String>, values: &mut Vec<String>, cur: &mut String| -> Result<()> {
            match facet.take() {
                Some(f) => {
                    values.push(core::mem::take(cur));
                    let mut v: Vec<String> = values.drain(..).filter(|v| !v.is_empty()).collect();
                    v.sort();
                    v.dedup();
                    if !v.is_empty() {
                        clauses.push(Clause { facet: f, values: v });
                    }
                }
                None => {
                    if !cur.trim().is_empty() {
                        return Err(Error::FilterSyntax(alloc::format!("clause {cur:?} lacks a ':'")));
                    }
                    cur.clear();
                }
            }
            Ok(())
        };
        while let Some(c) = chars.next() {
            match c {
                '\\' => match chars.next() {
                    Some(n) => cur.push(n),
                    None => return Err(Error::FilterSyntax("dangling escape at end of expression".into())),
                },
                ':' if facet.is_none() => {
                    let name = core::mem::take(&mut cur);
                    let name = name.trim();
                    if name.is_empty() {
                        return Err(Error::FilterSyntax("empty facet name".into()));
                    }
                    facet = Some(name.into());
                }
                '|' if facet.is_some() => values.push(core::mem::take(&mut cur)),
                '|' => return Err(Error::FilterSyntax("'|' before a facet name".into())),
                ';' => finish_clause(&mut facet, &mut values, &mut cur)?,
                _ => cur.push(c),
            }
        }
        finish_clause(&mut facet, &mut values, &mut cur)?;
        clauses.sort();
        Ok(Self { clauses })
    }

    pub fn is_empty(&self) -> bool {
        self.clauses.is_empty()
    }

    /// Canonical text: equal expressions (up to ordering and repetition of
    /// values, clause order and empty clauses) print identically.
    pub fn canonical(&self) -> String {
        let mut out = String::new();
        for (i, c) in self.clauses.iter().enumerate() {
            if i > 0 {
                out.push(';');
            }
            escape_into(&c.facet, &mut out);
            out.push(':');
            for (j, v) in c.values.iter().enumerate() {
                if j > 0 {
                    out.push('|');
                }
                escape_into(v, &mut out);
            }
        }
        out
    }
}

impl fmt::Display for FilterExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.canonical())
    }
}

fn escape_into(s: &str, out: &mut String) {
    for c in s.chars() {
        if matches!(c, '\\' | ';' | '|' | ':') {
            out.push('\\');
        }
        out.push(c);
    }
}
