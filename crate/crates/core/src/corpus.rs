//! Shipped example programs and their expected diagnostics.
//!
//! Manifest lines are `<kind> <file:line:col> <min relative error | ->`, one
//! per expected (deduplicated) warning site, plus a `resumed <n>` line.
//! `#` starts a comment. Every program is run from `@main` with no arguments.

use crate::interp::{run, RunConfig, RunResult};
use crate::ir::{parse_module, SourceLoc};
use crate::transform::{instrument_module, InstrumentConfig};
use crate::runtime::{CheckKind, Payload};

#[derive(Clone, Copy, Debug)]
pub struct CorpusProgram {
    pub name: &'static str,
    pub source: &'static str,
    pub manifest: &'static str,
}

macro_rules! program {
    ($name:literal) => {
        CorpusProgram {
            name: $name,
            source: include_str!(concat!("../corpus/", $name, ".nir")),
            manifest: include_str!(concat!("../corpus/", $name, ".expected")),
        }
    };
}

pub const PROGRAMS: &[CorpusProgram] = &[
    program!("naive_sum"),
    program!("kahan_sum"),
    program!("untyped_memory"),
    program!("type_punning"),
    program!("equal_threshold"),
    program!("length2"),
    program!("fcmp_divergence"),
    program!("uninstrumented_caller"),
    program!("two_calls"),
    program!("recursion"),
    program!("int_store_alias"),
    program!("struct_copy"),
    program!("math_calls"),
    program!("vectors"),
];

pub const ENTRY: &str = "main";

pub fn get(name: &str) -> Option<&'static CorpusProgram> {
    let name = name.strip_suffix(".nir").unwrap_or(name);
    PROGRAMS.iter().find(|p| p.name == name)
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExpectedWarning {
    pub kind: CheckKind,
    pub loc: SourceLoc,
    /// Lower bound on the reported relative error; `None` for fcmp sites.
    pub min_relative_error: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Manifest {
    pub warnings: Vec<ExpectedWarning>,
    pub resumed: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("manifest line {line}: {message}")]
pub struct ManifestError {
    pub line: usize,
    pub message: String,
}

pub fn parse_loc(text: &str) -> Option<SourceLoc> {
    let (rest, col) = text.rsplit_once(':')?;
    let (file, line) = rest.rsplit_once(':')?;
    Some(SourceLoc::new(file, line.parse().ok()?, col.parse().ok()?))
}

pub fn parse_manifest(text: &str) -> Result<Manifest, ManifestError> {
    let mut m = Manifest::default();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap().trim();
        if line.is_empty() {
            continue;
        }
        let err = |message: String| ManifestError { line: i + 1, message };
        let fields: Vec<&str> = line.split_whitespace().collect();
        match fields.as_slice() {
            ["resumed", n] => m.resumed = n.parse().map_err(|_| err(format!("bad count '{n}'")))?,
            [kind, loc, min] => {
                let kind = CheckKind::from_label(kind).ok_or_else(|| err(format!("unknown check kind '{kind}'")))?;
                let loc = parse_loc(loc).ok_or_else(|| err(format!("bad location '{loc}'")))?;
                let min_relative_error = match *min {
                    "-" => None,
                    x => Some(x.parse().map_err(|_| err(format!("bad relative error '{x}'")))?),
                };
                m.warnings.push(ExpectedWarning { kind, loc, min_relative_error });
            }
            _ => return Err(err(format!("cannot parse '{line}'"))),
        }
    }
    Ok(m)
}

/// Differences between a run and its manifest; empty when they conform.
pub fn conformance(manifest: &Manifest, result: &RunResult) -> Vec<String> {
    let mut problems = Vec::new();
    let warnings = &result.report.warnings;
    for exp in &manifest.warnings {
        let found = warnings.iter().find(|w| w.kind == exp.kind && w.loc.as_ref() == Some(&exp.loc));
        match found {
            None => problems.push(format!("missing {} warning at {}", exp.kind.label(), exp.loc)),
            Some(w) => {
                if let (Some(min), Payload::Value { relative_error, .. }) = (exp.min_relative_error, &w.payload) {
                    // Categorical mismatches and zero shadows count as unbounded.
                    if relative_error.fraction().is_some_and(|r| r < min) {
                        problems.push(format!(
                            "{} warning at {}: relative error {relative_error} below {min}",
                            exp.kind.label(),
                            exp.loc
                        ));
                    }
                }
            }
        }
    }
    for w in warnings {
        let expected = manifest.warnings.iter().any(|e| e.kind == w.kind && w.loc.as_ref() == Some(&e.loc));
        if !expected {
            let loc = w.loc.as_ref().map_or("<unknown>".to_string(), |l| l.to_string());
            problems.push(format!("unexpected {} warning at {loc}", w.kind.label()));
        }
    }
    if result.report.resumed != manifest.resumed {
        problems.push(format!("expected {} resumed events, got {}", manifest.resumed, result.report.resumed));
    }
    problems
}

/// Parses `p`, optionally instruments it, and runs `@main`.
pub fn run_program(
    p: &CorpusProgram,
    instrument: Option<&InstrumentConfig>,
    cfg: &RunConfig,
) -> Result<RunResult, String> {
    let m = parse_module(p.source).map_err(|e| format!("{}: {e}", p.name))?;
    let m = match instrument {
        Some(ic) => instrument_module(&m, ic).map_err(|e| format!("{}: {e}", p.name))?,
        None => m,
    };
    run(&m, ENTRY, &[], cfg).map_err(|e| format!("{}: {e}", p.name))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_manifest_parses() {
        for p in PROGRAMS {
            parse_manifest(p.manifest).unwrap_or_else(|e| panic!("{}: {e}", p.name));
        }
    }

    #[test]
    fn manifest_errors_carry_line_numbers() {
        let e = parse_manifest("resumed 0\nstore nowhere 1").unwrap_err();
        assert_eq!(e.line, 2);
    }

    #[test]
    fn lookup_accepts_file_names() {
        assert!(get("kahan_sum.nir").is_some());
        assert!(get("missing").is_none());
    }
}
