//! Compact text forms for queries and questions.
//!
//! Queries: `COUNT(*) BY g`, `SUM(x) BY g`, `AVG(x) BY g WHERE a = 1 AND b != "z"`.
//! Questions: `A > B` (or `A < B`) compares two groups; a form with explicit
//! coefficients, `1*A + -10*B > 0`, is a weighted question. Both also accept
//! their JSON documents.

use std::sync::LazyLock;

use anyhow::{anyhow, bail, Context, Result};
use dpxplain_core::data::{Aggregate, Atom, Comparator, GroupByQuery, Predicate, UserQuestion};
use regex::Regex;

static QUERY: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"(?is)^\s*(COUNT|SUM|AVG)\s*\(\s*([^)]*?)\s*\)\s+BY\s+(\S+)(?:\s+WHERE\s+(.+?))?\s*$")
        .expect("valid regex")
});
static AND: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"(?i)\s+AND\s+").expect("valid regex"));
static ATOM: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"^\s*([^\s=!<>]+)\s*(!=|<=|>=|=|<|>)\s*(.+?)\s*$").expect("valid regex")
});
static TERM: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"^\s*([+-]?)\s*([+-]?(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)\s*\*\s*([^\s*+]+)")
        .expect("valid regex")
});

fn unquote(s: &str) -> &str {
    let s = s.trim();
    for q in ['"', '\''] {
        if s.len() >= 2 && s.starts_with(q) && s.ends_with(q) {
            return &s[1..s.len() - 1];
        }
    }
    s
}

fn comparator(op: &str) -> Comparator {
    match op {
        "=" => Comparator::Eq,
        "!=" => Comparator::Ne,
        "<" => Comparator::Lt,
        "<=" => Comparator::Le,
        ">" => Comparator::Gt,
        _ => Comparator::Ge,
    }
}

pub fn parse_predicate(text: &str) -> Result<Predicate> {
    let atoms = AND
        .split(text.trim())
        .map(|part| {
            let c = ATOM
                .captures(part)
                .ok_or_else(|| anyhow!("cannot read condition `{part}`"))?;
            Ok(Atom {
                attr: c[1].to_string(),
                op: comparator(&c[2]),
                value: unquote(&c[3]).to_string(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Predicate::new(atoms))
}

pub fn parse_query(text: &str) -> Result<GroupByQuery> {
    if text.trim_start().starts_with('{') {
        return serde_json::from_str(text).context("query JSON");
    }
    let c = QUERY
        .captures(text)
        .ok_or_else(|| anyhow!("cannot read query `{text}`; expected e.g. `AVG(y) BY g`"))?;
    let agg = match c[1].to_ascii_uppercase().as_str() {
        "COUNT" => Aggregate::Count,
        "SUM" => Aggregate::Sum,
        _ => Aggregate::Avg,
    };
    let attr = c[2].trim();
    let agg_attr = match (agg, attr) {
        (Aggregate::Count, "" | "*") => None,
        (Aggregate::Count, a) => bail!("COUNT takes `*`, not `{a}`"),
        (_, "" | "*") => bail!("{agg} needs an attribute"),
        (_, a) => Some(a.to_string()),
    };
    let filter = match c.get(4) {
        Some(w) => parse_predicate(w.as_str())?,
        None => Predicate::always(),
    };
    Ok(GroupByQuery {
        agg,
        group_by: c[3].to_string(),
        agg_attr,
        filter,
    })
}

pub fn parse_question(text: &str) -> Result<UserQuestion> {
    let text = text.trim();
    if text.starts_with('{') {
        return serde_json::from_str(text).context("question JSON");
    }
    if text.contains('*') {
        return parse_weighted(text);
    }
    if let Some((a, b)) = text.split_once('>') {
        return Ok(UserQuestion::simple(unquote(a), unquote(b)));
    }
    if let Some((a, b)) = text.split_once('<') {
        return Ok(UserQuestion::simple(unquote(b), unquote(a)));
    }
    bail!("cannot read question `{text}`; expected e.g. `A > B`")
}

fn parse_weighted(text: &str) -> Result<UserQuestion> {
    let (lhs, rhs) = text
        .split_once(">=")
        .or_else(|| text.split_once('>'))
        .ok_or_else(|| anyhow!("weighted question needs `>` or `>=`: `{text}`"))?;
    let constant: f64 = rhs
        .trim()
        .parse()
        .with_context(|| format!("right-hand side `{}` is not a number", rhs.trim()))?;
    let mut rest = lhs.trim();
    let mut weights = Vec::new();
    while !rest.is_empty() {
        let c = TERM
            .captures(rest)
            .ok_or_else(|| anyhow!("cannot read term at `{rest}`; expected `w*group`"))?;
        if c[1].is_empty() && !weights.is_empty() {
            bail!("missing `+` or `-` before `{}`", c[0].trim());
        }
        let mut w: f64 = c[2].parse()?;
        if &c[1] == "-" {
            w = -w;
        }
        weights.push((c[3].to_string(), w));
        rest = rest[c.get(0).expect("match").end()..].trim_start();
    }
    let refs: Vec<(&str, f64)> = weights.iter().map(|(g, w)| (g.as_str(), *w)).collect();
    Ok(UserQuestion::general(&refs, constant))
}

pub fn describe_question(q: &UserQuestion) -> String {
    match q {
        UserQuestion::Simple { group_i, group_j } => format!("{group_i} > {group_j}"),
        UserQuestion::General { weights, constant } => {
            let terms: Vec<String> = weights
                .iter()
                .map(|w| format!("{}*{}", w.weight, w.group))
                .collect();
            format!("{} > {constant}", terms.join(" + "))
        }
    }
}
