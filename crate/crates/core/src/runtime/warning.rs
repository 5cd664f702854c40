use std::fmt::Write;

use crate::extended::{AppFloat, RelativeError, ShadowScalar};
use crate::ir::{FPred, SourceLoc};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CheckKind {
    Store,
    Ret,
    Arg,
    Fcmp,
    Explicit,
    Load,
}

impl CheckKind {
    pub const ALL: [CheckKind; 6] =
        [CheckKind::Store, CheckKind::Ret, CheckKind::Arg, CheckKind::Fcmp, CheckKind::Explicit, CheckKind::Load];

    /// Integer encoding passed to the check hooks.
    pub fn code(self) -> i64 {
        self as i64
    }

    pub fn from_code(code: i64) -> Option<CheckKind> {
        CheckKind::ALL.get(usize::try_from(code).ok()?).copied()
    }

    /// Short label used in summaries and manifests.
    pub fn label(self) -> &'static str {
        match self {
            CheckKind::Store => "store",
            CheckKind::Ret => "ret",
            CheckKind::Arg => "arg",
            CheckKind::Fcmp => "fcmp",
            CheckKind::Explicit => "explicit",
            CheckKind::Load => "load",
        }
    }

    pub fn from_label(s: &str) -> Option<CheckKind> {
        CheckKind::ALL.into_iter().find(|k| k.label() == s)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Frame {
    pub function_id: u64,
    pub function: String,
    pub loc: Option<SourceLoc>,
}

#[derive(Clone, Copy, Debug)]
pub struct FcmpDetail {
    pub pred: FPred,
    pub lhs: AppFloat,
    pub rhs: AppFloat,
    pub shadow_lhs: ShadowScalar,
    pub shadow_rhs: ShadowScalar,
    pub native_result: bool,
    pub shadow_result: bool,
}

#[derive(Clone, Copy, Debug)]
pub enum Payload {
    Value { value: AppFloat, shadow: ShadowScalar, truncated: AppFloat, relative_error: RelativeError },
    Fcmp(FcmpDetail),
}

#[derive(Clone, Debug)]
pub struct WarningEvent {
    pub kind: CheckKind,
    pub payload: Payload,
    pub address: Option<u64>,
    /// Lane index for vector checks.
    pub lane: Option<u32>,
    pub loc: Option<SourceLoc>,
    pub stack: Vec<Frame>,
    pub suppressed: bool,
}

impl WarningEvent {
    pub fn relative_error(&self) -> Option<RelativeError> {
        match self.payload {
            Payload::Value { relative_error, .. } => Some(relative_error),
            Payload::Fcmp(_) => None,
        }
    }

    pub fn function(&self) -> Option<&str> {
        self.stack.first().map(|f| f.function.as_str())
    }
}

const DECIMALS: u32 = 20;

fn label(c_name: &str, middle: &str, side: &str) -> String {
    format!("{c_name:<13}{middle:<11}({side})")
}

fn value_line(out: &mut String, label: &str, dec: String, hex: String) {
    let _ = writeln!(out, "{label:<32}: dec: {dec}  hex: {hex}");
}

fn header(w: &WarningEvent) -> String {
    let what = match w.kind {
        CheckKind::Store => match w.address {
            Some(a) => format!("store to address 0x{a:x}"),
            None => "store".into(),
        },
        CheckKind::Ret => "return value".into(),
        CheckKind::Arg => "call argument".into(),
        CheckKind::Fcmp => "fcmp".into(),
        CheckKind::Explicit => "explicit check".into(),
        CheckKind::Load => match w.address {
            Some(a) => format!("load from address 0x{a:x}"),
            None => "load".into(),
        },
    };
    let lane = w.lane.map(|l| format!(" (lane {l})")).unwrap_or_default();
    format!("WARNING: NumericalSanitizer: inconsistent shadow results while checking {what}{lane}")
}

/// Renders a warning in the multi-line report format.
pub fn format_warning(w: &WarningEvent) -> String {
    let mut out = header(w);
    out.push('\n');
    match &w.payload {
        Payload::Value { value, shadow, truncated, relative_error } => {
            let k = value.kind();
            value_line(&mut out, &label(k.c_name(), "precision", "native"), value.to_fixed(DECIMALS), value.to_hex());
            value_line(
                &mut out,
                &label(k.shadow_c_name(), "precision", "shadow"),
                shadow.to_fixed(DECIMALS),
                shadow.to_hex(),
            );
            value_line(
                &mut out,
                &format!("shadow truncated to {}", k.c_name()),
                truncated.to_fixed(DECIMALS),
                truncated.to_hex(),
            );
            let _ = writeln!(out, "Relative error: {relative_error}");
        }
        Payload::Fcmp(d) => {
            let _ = writeln!(
                out,
                "fcmp {}: native result {}, shadow result {}",
                d.pred.name(),
                d.native_result,
                d.shadow_result
            );
            let k = d.lhs.kind();
            for (side, v, s) in [("lhs", d.lhs, d.shadow_lhs), ("rhs", d.rhs, d.shadow_rhs)] {
                value_line(&mut out, &label(k.c_name(), side, "native"), v.to_fixed(DECIMALS), v.to_hex());
                value_line(&mut out, &label(k.shadow_c_name(), side, "shadow"), s.to_fixed(DECIMALS), s.to_hex());
            }
        }
    }
    out.push_str(&format_stack(&w.stack));
    out
}

/// One `#i 0xID in name file:line:col` line per frame, innermost first.
pub fn format_stack(stack: &[Frame]) -> String {
    let mut out = String::new();
    for (i, f) in stack.iter().enumerate() {
        let _ = write!(out, "    #{i} 0x{:x} in {}", f.function_id, f.function);
        if let Some(loc) = &f.loc {
            let _ = write!(out, " {loc}");
        }
        out.push('\n');
    }
    out
}
