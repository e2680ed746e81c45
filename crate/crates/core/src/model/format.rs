//! Text formats for instances and mappings.
//!
//! Instance file (UTF-8, `#` starts a comment, blank lines ignored):
//!
//! ```text
//! pipeline v1
//! n 3
//! b 2
//! delta 2 4 6 2
//! w 4 2 6
//! p 2
//! s 2 1
//! ```
//!
//! Mapping, 1-based: `map 1-2:1 3-3:2`.

use std::fmt::Write as _;

use thiserror::Error;

use super::{Interval, IntervalMapping, ModelError, PipelineApp, Platform};

pub const HEADER: &str = "pipeline v1";

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FormatError {
    #[error("first line must be `{HEADER}`")]
    MissingHeader,
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: key `{key}` given twice")]
    DuplicateKey { line: usize, key: String },
    #[error("missing key `{0}`")]
    MissingKey(&'static str),
    #[error("line {line}: cannot parse `{token}` as a number")]
    BadNumber { line: usize, token: String },
    #[error("`{key}` should have {expected} values, found {found}")]
    CountMismatch {
        key: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("malformed mapping: {0}")]
    BadMapping(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Default)]
struct Fields {
    n: Option<usize>,
    b: Option<f64>,
    delta: Option<Vec<f64>>,
    w: Option<Vec<f64>>,
    p: Option<usize>,
    s: Option<Vec<f64>>,
}

fn numbers<T: std::str::FromStr>(line: usize, tokens: &[&str]) -> Result<Vec<T>, FormatError> {
    tokens
        .iter()
        .map(|t| {
            t.parse().map_err(|_| FormatError::BadNumber {
                line,
                token: t.to_string(),
            })
        })
        .collect()
}

fn scalar<T: std::str::FromStr>(line: usize, tokens: &[&str]) -> Result<T, FormatError> {
    match tokens {
        [t] => t.parse().map_err(|_| FormatError::BadNumber {
            line,
            token: t.to_string(),
        }),
        _ => Err(FormatError::BadNumber {
            line,
            token: tokens.join(" "),
        }),
    }
}

fn set<T>(slot: &mut Option<T>, value: T, line: usize, key: &str) -> Result<(), FormatError> {
    if slot.replace(value).is_some() {
        return Err(FormatError::DuplicateKey {
            line,
            key: key.to_string(),
        });
    }
    Ok(())
}

fn check_count(key: &'static str, values: &[f64], expected: usize) -> Result<(), FormatError> {
    if values.len() != expected {
        return Err(FormatError::CountMismatch {
            key,
            expected,
            found: values.len(),
        });
    }
    Ok(())
}

pub fn parse_instance(text: &str) -> Result<(PipelineApp, Platform), FormatError> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
        .filter(|(_, l)| !l.is_empty());

    match lines.next() {
        Some((_, l)) if l.split_whitespace().collect::<Vec<_>>() == ["pipeline", "v1"] => {}
        _ => return Err(FormatError::MissingHeader),
    }

    let mut f = Fields::default();
    for (line, content) in lines {
        let tokens: Vec<&str> = content.split_whitespace().collect();
        let (key, rest) = (tokens[0], &tokens[1..]);
        match key {
            "n" => set(&mut f.n, scalar(line, rest)?, line, key)?,
            "b" => set(&mut f.b, scalar(line, rest)?, line, key)?,
            "delta" => set(&mut f.delta, numbers(line, rest)?, line, key)?,
            "w" => set(&mut f.w, numbers(line, rest)?, line, key)?,
            "p" => set(&mut f.p, scalar(line, rest)?, line, key)?,
            "s" => set(&mut f.s, numbers(line, rest)?, line, key)?,
            _ => {
                return Err(FormatError::UnknownKey {
                    line,
                    key: key.to_string(),
                })
            }
        }
    }

    let n = f.n.ok_or(FormatError::MissingKey("n"))?;
    let b = f.b.ok_or(FormatError::MissingKey("b"))?;
    let delta = f.delta.ok_or(FormatError::MissingKey("delta"))?;
    let w = f.w.ok_or(FormatError::MissingKey("w"))?;
    let p = f.p.ok_or(FormatError::MissingKey("p"))?;
    let s = f.s.ok_or(FormatError::MissingKey("s"))?;
    check_count("w", &w, n)?;
    check_count("delta", &delta, n + 1)?;
    check_count("s", &s, p)?;

    Ok((PipelineApp::new(w, delta)?, Platform::new(s, b)?))
}

fn join(values: &[f64]) -> String {
    values
        .iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join(" ")
}

/// Serializes an instance; values use the shortest round-tripping decimal
/// form, so `parse_instance(write_instance(..))` is lossless.
pub fn write_instance(app: &PipelineApp, platform: &Platform) -> String {
    let mut out = String::new();
    writeln!(out, "{HEADER}").unwrap();
    writeln!(out, "n {}", app.stages()).unwrap();
    writeln!(out, "b {}", platform.bandwidth()).unwrap();
    writeln!(out, "delta {}", join(app.data())).unwrap();
    writeln!(out, "w {}", join(app.work())).unwrap();
    writeln!(out, "p {}", platform.processors()).unwrap();
    writeln!(out, "s {}", join(platform.speeds())).unwrap();
    out
}

/// Parses `map d1-e1:proc d2-e2:proc ...` (1-based). The leading `map`
/// keyword is optional. The result is not validated against an instance.
pub fn parse_mapping(text: &str) -> Result<IntervalMapping, FormatError> {
    let bad = |msg: String| FormatError::BadMapping(msg);
    let mut tokens = text.split_whitespace().peekable();
    if tokens.peek() == Some(&"map") {
        tokens.next();
    }
    let mut intervals = Vec::new();
    let mut alloc = Vec::new();
    for token in tokens {
        let (range, proc) = token
            .split_once(':')
            .ok_or_else(|| bad(format!("`{token}` lacks `:processor`")))?;
        let (d, e) = range
            .split_once('-')
            .ok_or_else(|| bad(format!("`{range}` is not `first-last`")))?;
        let one_based = |s: &str| -> Result<usize, FormatError> {
            match s.parse::<usize>() {
                Ok(v) if v >= 1 => Ok(v - 1),
                _ => Err(bad(format!("`{s}` is not a 1-based index"))),
            }
        };
        intervals.push(Interval::new(one_based(d)?, one_based(e)?));
        alloc.push(one_based(proc)?);
    }
    if intervals.is_empty() {
        return Err(bad("no intervals".into()));
    }
    Ok(IntervalMapping::new(intervals, alloc))
}
