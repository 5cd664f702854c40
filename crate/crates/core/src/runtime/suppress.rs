use globset::{Glob, GlobMatcher};

use super::warning::Frame;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SuppressAction {
    /// Do not report; value and shadow continue unchanged.
    Silence,
    /// Do not report; keep computing from the existing shadow.
    ResumeShadow,
    /// Do not report; restart the shadow from the application value.
    ResumeValue,
}

impl SuppressAction {
    fn parse(s: &str) -> Option<SuppressAction> {
        match s {
            "silence" => Some(SuppressAction::Silence),
            "resume-shadow" => Some(SuppressAction::ResumeShadow),
            "resume-value" => Some(SuppressAction::ResumeValue),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MatchOn {
    Function,
    Source,
}

#[derive(Clone, Debug)]
pub struct Suppression {
    pub on: MatchOn,
    pub pattern: String,
    pub action: SuppressAction,
    pub line: usize,
    matcher: GlobMatcher,
}

impl Suppression {
    pub fn matches(&self, frame: &Frame) -> bool {
        match self.on {
            MatchOn::Function => self.matcher.is_match(&frame.function),
            MatchOn::Source => frame.loc.as_ref().is_some_and(|loc| {
                let base = loc.file.rsplit(['/', '\\']).next().unwrap_or(&loc.file);
                self.matcher.is_match(&loc.file) || self.matcher.is_match(base)
            }),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("malformed suppressions:{}", .errors.iter().map(|(l, m)| format!("\n  line {l}: {m}")).collect::<String>())]
pub struct SuppressionError {
    pub errors: Vec<(usize, String)>,
}

/// Parses a suppressions file. Each non-comment line is
/// `fun:<glob>` or `src:<glob>`, optionally followed by an action
/// (`silence`, `resume-shadow`, `resume-value`).
pub fn parse_suppressions(text: &str) -> Result<Vec<Suppression>, SuppressionError> {
    let mut out = Vec::new();
    let mut errors = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let mut words = content.split_whitespace();
        let spec = words.next().unwrap();
        let action = match words.next() {
            None => SuppressAction::Silence,
            Some(a) => match SuppressAction::parse(a) {
                Some(a) => a,
                None => {
                    errors.push((line, format!("unknown action '{a}'")));
                    continue;
                }
            },
        };
        if let Some(extra) = words.next() {
            errors.push((line, format!("unexpected '{extra}'")));
            continue;
        }
        let (on, pattern) = match spec.split_once(':') {
            Some(("fun", p)) => (MatchOn::Function, p),
            Some(("src", p)) => (MatchOn::Source, p),
            _ => {
                errors.push((line, format!("expected 'fun:<glob>' or 'src:<glob>', found '{spec}'")));
                continue;
            }
        };
        if pattern.is_empty() {
            errors.push((line, "empty pattern".into()));
            continue;
        }
        match Glob::new(pattern) {
            Ok(g) => out.push(Suppression { on, pattern: pattern.to_string(), action, line, matcher: g.compile_matcher() }),
            Err(e) => errors.push((line, format!("bad glob '{pattern}': {e}"))),
        }
    }
    if errors.is_empty() {
        Ok(out)
    } else {
        Err(SuppressionError { errors })
    }
}

/// The first entry, in file order, that matches any frame of the stack.
pub fn match_suppression<'a>(stack: &[Frame], suppressions: &'a [Suppression]) -> Option<&'a Suppression> {
    suppressions.iter().find(|s| stack.iter().any(|f| s.matches(f)))
}
