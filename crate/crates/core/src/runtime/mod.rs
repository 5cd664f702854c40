//! The sanitizer runtime: shadow memory, call-boundary channels,
//! consistency checks and reporting.

pub mod flags;
pub mod memory;
pub mod protocol;
pub mod suppress;
pub mod warning;

use std::collections::HashMap;
use std::fmt::Write;

use crate::extended::{absolute_error, relative_error, truncate_shadow, AppFloat, RelativeError, ShadowScalar};
use crate::ir::{FPred, SourceLoc};

pub use flags::{parse_options, FlagError, RuntimeFlags, Strategy};
pub use memory::{Provenance, ShadowMemory, ShadowTypeByte, TypeKind, Unallocated};
pub use protocol::{ReturnSlot, ShadowStack};
pub use suppress::{match_suppression, parse_suppressions, SuppressAction, Suppression, SuppressionError};
pub use warning::{format_stack, format_warning, CheckKind, FcmpDetail, Frame, Payload, WarningEvent};

/// Whether `v` agrees with its shadow under the configured strategy.
pub fn is_consistent(flags: &RuntimeFlags, v: AppFloat, s: ShadowScalar) -> bool {
    let t = truncate_shadow(s, v.kind());
    if t.same_bits(v) {
        return true;
    }
    let rel = relative_error(v, s);
    if rel == RelativeError::CategoricalMismatch {
        return false;
    }
    let abs_ok = absolute_error(v, t) <= flags.abs_epsilon(v.kind());
    let rel_ok = match rel {
        RelativeError::Fraction(r) => r <= flags.rel_epsilon(v.kind()),
        RelativeError::AbsOnly => abs_ok,
        RelativeError::CategoricalMismatch => false,
    };
    match flags.strategy {
        Strategy::Epsilon => abs_ok,
        Strategy::RelativeEpsilon => rel_ok,
        Strategy::Both => abs_ok || rel_ok,
    }
}

fn shadow_cmp(a: ShadowScalar, b: ShadowScalar) -> Option<std::cmp::Ordering> {
    match (a, b) {
        (ShadowScalar::F64(x), ShadowScalar::F64(y)) => x.partial_cmp(&y),
        (ShadowScalar::Ext(x), ShadowScalar::Ext(y)) => x.partial_cmp(&y),
        (x, y) => {
            let widen = |s| match s {
                ShadowScalar::F64(v) => crate::extended::F128::from_f64(v),
                ShadowScalar::Ext(v) => v,
            };
            widen(x).partial_cmp(&widen(y))
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CheckOutcome {
    Consistent,
    Reported,
    Suppressed(SuppressAction),
}

impl CheckOutcome {
    /// The shadow should be rebuilt from the application value.
    pub fn resume_value(self) -> bool {
        self == CheckOutcome::Suppressed(SuppressAction::ResumeValue)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
struct SiteKey {
    kind: CheckKind,
    loc: Option<SourceLoc>,
    function: Option<String>,
    lane: Option<u32>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Stats {
    pub args_from_stack: u64,
    pub args_extended: u64,
    pub rets_from_slot: u64,
    pub rets_extended: u64,
    pub loads_from_shadow: u64,
    pub loads_extended: u64,
    pub checks: u64,
}

/// Everything observed during one run.
#[derive(Clone, Debug, Default)]
pub struct Report {
    /// Reported warnings in program order, one per site when deduplicating.
    pub warnings: Vec<WarningEvent>,
    /// Occurrence count of each entry in `warnings`.
    pub occurrences: Vec<u64>,
    /// Suppressed warnings (one per site when deduplicating).
    pub suppressed: Vec<WarningEvent>,
    pub resumed: u64,
    /// Warnings beyond `max_warnings`, counted but not recorded.
    pub dropped: u64,
    pub halted: bool,
    sites: HashMap<SiteKey, usize>,
    suppressed_sites: HashMap<SiteKey, usize>,
}

impl Report {
    pub fn count(&self, kind: CheckKind) -> usize {
        self.warnings.iter().filter(|w| w.kind == kind).count()
    }

    /// One-line run summary.
    pub fn summary(&self) -> String {
        let n = self.warnings.len();
        let mut s = format!("nsan: {n} warning{}", if n == 1 { "" } else { "s" });
        let kinds: Vec<String> = CheckKind::ALL
            .iter()
            .filter_map(|&k| {
                let c = self.count(k);
                (c > 0).then(|| format!("{}: {c}", k.label()))
            })
            .collect();
        if !kinds.is_empty() {
            let _ = write!(s, " ({})", kinds.join(", "));
        }
        let _ = write!(s, ", {} suppressed, {} resumed", self.suppressed.len(), self.resumed);
        if self.dropped > 0 {
            let _ = write!(s, ", {} not shown", self.dropped);
        }
        s
    }
}

#[derive(Debug, Default)]
pub struct Runtime {
    pub flags: RuntimeFlags,
    pub memory: ShadowMemory,
    pub stack: ShadowStack,
    pub ret_slot: ReturnSlot,
    pub suppressions: Vec<Suppression>,
    pub report: Report,
    pub stats: Stats,
}

/// A request to check one value.
pub struct CheckSite<'a> {
    pub kind: CheckKind,
    pub loc: Option<&'a SourceLoc>,
    pub address: Option<u64>,
    pub lane: Option<u32>,
}

impl Runtime {
    pub fn new(flags: RuntimeFlags, suppressions: Vec<Suppression>) -> Runtime {
        Runtime { flags, suppressions, ..Runtime::default() }
    }

    pub fn record_resume(&mut self) {
        self.report.resumed += 1;
    }

    /// Checks `v` against `s`. `stack` is only invoked when the values disagree.
    pub fn check_value(
        &mut self,
        site: CheckSite<'_>,
        v: AppFloat,
        s: ShadowScalar,
        stack: &mut dyn FnMut() -> Vec<Frame>,
    ) -> CheckOutcome {
        self.stats.checks += 1;
        if is_consistent(&self.flags, v, s) {
            return CheckOutcome::Consistent;
        }
        let truncated = truncate_shadow(s, v.kind());
        let payload = Payload::Value { value: v, shadow: s, truncated, relative_error: relative_error(v, s) };
        let outcome = self.raise(site, payload, stack());
        if outcome.resume_value() {
            self.record_resume();
        }
        outcome
    }

    /// Branch consistency: the predicate must give the same answer on the
    /// application operands and on their shadows.
    #[allow(clippy::too_many_arguments)]
    pub fn check_fcmp(
        &mut self,
        pred: FPred,
        lhs: AppFloat,
        rhs: AppFloat,
        shadow_lhs: ShadowScalar,
        shadow_rhs: ShadowScalar,
        loc: Option<&SourceLoc>,
        stack: &mut dyn FnMut() -> Vec<Frame>,
    ) -> CheckOutcome {
        self.stats.checks += 1;
        let native_result = pred.eval(lhs.to_f64().partial_cmp(&rhs.to_f64()));
        let shadow_result = pred.eval(shadow_cmp(shadow_lhs, shadow_rhs));
        if native_result == shadow_result {
            return CheckOutcome::Consistent;
        }
        let detail = FcmpDetail { pred, lhs, rhs, shadow_lhs, shadow_rhs, native_result, shadow_result };
        let site = CheckSite { kind: CheckKind::Fcmp, loc, address: None, lane: None };
        self.raise(site, Payload::Fcmp(detail), stack())
    }

    /// Shadow load with the optional load-consistency check. Returns the
    /// shadow to use and where it came from.
    pub fn shadow_load(
        &mut self,
        addr: u64,
        app: AppFloat,
        loc: Option<&SourceLoc>,
        stack: &mut dyn FnMut() -> Vec<Frame>,
    ) -> Result<(ShadowScalar, Provenance), Unallocated> {
        let (s, p) = self.memory.load(addr, app)?;
        match p {
            Provenance::Extended => {
                self.stats.loads_extended += 1;
                self.record_resume();
                return Ok((s, p));
            }
            Provenance::Shadow => self.stats.loads_from_shadow += 1,
        }
        if self.flags.check_loads && !is_consistent(&self.flags, app, s) {
            if self.flags.warn_on_load_mismatch {
                let payload = Payload::Value {
                    value: app,
                    shadow: s,
                    truncated: truncate_shadow(s, app.kind()),
                    relative_error: relative_error(app, s),
                };
                let site = CheckSite { kind: CheckKind::Load, loc, address: Some(addr), lane: None };
                self.raise(site, payload, stack());
            }
            self.record_resume();
            return Ok((ShadowScalar::extend(app), Provenance::Extended));
        }
        Ok((s, p))
    }

    fn raise(&mut self, site: CheckSite<'_>, payload: Payload, stack: Vec<Frame>) -> CheckOutcome {
        let suppression = match_suppression(&stack, &self.suppressions).map(|s| s.action);
        let key = SiteKey {
            kind: site.kind,
            loc: site.loc.cloned(),
            function: stack.first().map(|f| f.function.clone()),
            lane: site.lane,
        };
        let event = WarningEvent {
            kind: site.kind,
            payload,
            address: site.address,
            lane: site.lane,
            loc: site.loc.cloned(),
            stack,
            suppressed: suppression.is_some(),
        };
        let dedup = self.flags.dedup;
        let r = &mut self.report;
        if let Some(action) = suppression {
            if !(dedup && r.suppressed_sites.contains_key(&key)) {
                r.suppressed_sites.insert(key, r.suppressed.len());
                r.suppressed.push(event);
            }
            return CheckOutcome::Suppressed(action);
        }
        if dedup {
            if let Some(&i) = r.sites.get(&key) {
                r.occurrences[i] += 1;
                return CheckOutcome::Reported;
            }
        }
        if self.flags.max_warnings.is_some_and(|m| r.warnings.len() as u64 >= m) {
            r.dropped += 1;
        } else {
            r.sites.insert(key, r.warnings.len());
            r.warnings.push(event);
            r.occurrences.push(1);
        }
        if self.flags.halt_on_error {
            r.halted = true;
        }
        CheckOutcome::Reported
    }
}
