//! Plain-text export in the CPLEX LP style, one constraint per line:
//!
//! ```text
//! \ <comment>
//! Minimize
//!  obj: 2 x + 1 y
//! Subject To
//!  c0: 1 x + 1 y >= 3
//! Bounds
//!  0 <= x
//!  0 <= y <= 5
//! End
//! ```
//!
//! Variable names are sanitized to `[A-Za-z0-9_.]` and made unique by
//! appending `_<index>` on collision. Coefficients use Rust's shortest
//! round-trip float formatting, so the file reproduces the LP exactly.

use std::collections::HashSet;
use std::fmt::Write;

use super::LinearProgram;

fn sanitize(name: &str) -> String {
    let mut out: String = name
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '_' || c == '.' { c } else { '_' })
        .collect();
    if out.is_empty() || out.starts_with(|c: char| c.is_ascii_digit() || c == '.') {
        out.insert(0, 'v');
    }
    out
}

fn write_terms(out: &mut String, terms: impl Iterator<Item = (f64, String)>) {
    let mut any = false;
    for (a, name) in terms {
        if a == 0.0 {
            continue;
        }
        let sign = if a < 0.0 { '-' } else { '+' };
        if any || a < 0.0 {
            let _ = write!(out, " {sign} {} {name}", a.abs());
        } else {
            let _ = write!(out, " {} {name}", a.abs());
        }
        any = true;
    }
    if !any {
        out.push_str(" 0");
    }
}

/// Renders `lp`; `comment` lines are emitted as `\` comments at the top.
pub fn to_lp_text(lp: &LinearProgram, comment: &str) -> String {
    let mut seen = HashSet::new();
    let names: Vec<String> = lp
        .names()
        .iter()
        .enumerate()
        .map(|(j, n)| {
            let mut s = sanitize(n);
            if !seen.insert(s.clone()) {
                s = format!("{s}_{j}");
                seen.insert(s.clone());
            }
            s
        })
        .collect();
    let mut out = String::new();
    for line in comment.lines() {
        let _ = writeln!(out, "\\ {line}");
    }
    out.push_str("Minimize\n obj:");
    write_terms(
        &mut out,
        lp.objective().iter().enumerate().map(|(j, &c)| (c, names[j].clone())),
    );
    out.push_str("\nSubject To\n");
    for (i, row) in lp.constraints().iter().enumerate() {
        let _ = write!(out, " c{i}:");
        write_terms(&mut out, row.coeffs.iter().map(|&(j, a)| (a, names[j].clone())));
        let _ = writeln!(out, " {} {}", row.relation.symbol(), row.rhs);
    }
    out.push_str("Bounds\n");
    for j in 0..lp.num_vars() {
        match lp.upper()[j] {
            Some(u) => {
                let _ = writeln!(out, " {} <= {} <= {u}", lp.lower()[j], names[j]);
            }
            None => {
                let _ = writeln!(out, " {} <= {}", lp.lower()[j], names[j]);
            }
        }
    }
    out.push_str("End\n");
    out
}
