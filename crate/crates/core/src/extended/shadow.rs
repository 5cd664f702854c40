use std::fmt;

use super::f128::F128;

/// Application floating-point types that carry a shadow.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum FloatKind {
    F32,
    F64,
}

impl FloatKind {
    pub fn size(self) -> u64 {
        match self {
            FloatKind::F32 => 4,
            FloatKind::F64 => 8,
        }
    }

    /// C spelling used in diagnostics.
    pub fn c_name(self) -> &'static str {
        match self {
            FloatKind::F32 => "float",
            FloatKind::F64 => "double",
        }
    }

    /// C spelling of the shadow type.
    pub fn shadow_c_name(self) -> &'static str {
        match self {
            FloatKind::F32 => "double",
            FloatKind::F64 => "__float128",
        }
    }
}

/// An application value of a shadowed floating-point type.
#[derive(Clone, Copy, Debug)]
pub enum AppFloat {
    F32(f32),
    F64(f64),
}

impl AppFloat {
    pub fn kind(self) -> FloatKind {
        match self {
            AppFloat::F32(_) => FloatKind::F32,
            AppFloat::F64(_) => FloatKind::F64,
        }
    }

    pub fn to_f64(self) -> f64 {
        match self {
            AppFloat::F32(x) => x as f64,
            AppFloat::F64(x) => x,
        }
    }

    pub fn is_nan(self) -> bool {
        self.to_f64().is_nan()
    }

    pub fn bits(self) -> u64 {
        match self {
            AppFloat::F32(x) => x.to_bits() as u64,
            AppFloat::F64(x) => x.to_bits(),
        }
    }

    pub fn same_bits(self, other: AppFloat) -> bool {
        self.kind() == other.kind() && self.bits() == other.bits()
    }

    pub fn to_hex(self) -> String {
        match self {
            AppFloat::F32(x) => super::hex_f32(x),
            AppFloat::F64(x) => super::hex_f64(x),
        }
    }

    pub fn to_fixed(self, decimals: u32) -> String {
        use super::softfloat::{format_fixed, Format};
        match self {
            AppFloat::F32(x) => format_fixed(Format::F32, x.to_bits() as u128, decimals),
            AppFloat::F64(x) => format_fixed(Format::F64, x.to_bits() as u128, decimals),
        }
    }
}

/// The shadow of an application value: binary64 for binary32 values and
/// [`F128`] for binary64 values.
#[derive(Clone, Copy, Debug)]
pub enum ShadowScalar {
    F64(f64),
    Ext(F128),
}

impl ShadowScalar {
    /// The shadow obtained by exactly widening an application value.
    pub fn extend(v: AppFloat) -> ShadowScalar {
        match v {
            AppFloat::F32(x) => ShadowScalar::F64(x as f64),
            AppFloat::F64(x) => ShadowScalar::Ext(F128::from_f64(x)),
        }
    }

    /// The application type this shadow belongs to.
    pub fn app_kind(self) -> FloatKind {
        match self {
            ShadowScalar::F64(_) => FloatKind::F32,
            ShadowScalar::Ext(_) => FloatKind::F64,
        }
    }

    pub fn to_hex(self) -> String {
        match self {
            ShadowScalar::F64(x) => super::hex_f64(x),
            ShadowScalar::Ext(x) => x.to_hex(),
        }
    }

    pub fn to_fixed(self, decimals: u32) -> String {
        match self {
            ShadowScalar::F64(x) => AppFloat::F64(x).to_fixed(decimals),
            ShadowScalar::Ext(x) => x.to_fixed(decimals),
        }
    }

    /// Bit-level identity, used by tests and the tag protocol audits.
    pub fn same_bits(self, other: ShadowScalar) -> bool {
        match (self, other) {
            (ShadowScalar::F64(a), ShadowScalar::F64(b)) => a.to_bits() == b.to_bits(),
            (ShadowScalar::Ext(a), ShadowScalar::Ext(b)) => a.to_bits() == b.to_bits(),
            _ => false,
        }
    }
}

/// Rounds a shadow to the application format (round-to-nearest-even).
pub fn truncate_shadow(s: ShadowScalar, target: FloatKind) -> AppFloat {
    match (s, target) {
        (ShadowScalar::F64(x), FloatKind::F32) => AppFloat::F32(x as f32),
        (ShadowScalar::F64(x), FloatKind::F64) => AppFloat::F64(x),
        (ShadowScalar::Ext(x), FloatKind::F32) => AppFloat::F32(x.to_f32()),
        (ShadowScalar::Ext(x), FloatKind::F64) => AppFloat::F64(x.to_f64()),
    }
}

/// Result of comparing an application value against its truncated shadow.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum RelativeError {
    /// `|v - t| / |t|`.
    Fraction(f64),
    /// The truncated shadow is zero: only an absolute comparison applies.
    AbsOnly,
    /// Exactly one side is NaN or infinite, or the infinities differ in sign.
    CategoricalMismatch,
}

impl RelativeError {
    pub fn fraction(self) -> Option<f64> {
        match self {
            RelativeError::Fraction(f) => Some(f),
            _ => None,
        }
    }
}

impl fmt::Display for RelativeError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RelativeError::Fraction(x) => write!(f, "{}%", percent_2dp(*x)),
            RelativeError::AbsOnly => f.write_str("n/a (shadow is zero)"),
            RelativeError::CategoricalMismatch => f.write_str("n/a (NaN/infinity mismatch)"),
        }
    }
}

/// Percentage truncated (not rounded) to two decimals, so the printed figure
/// never overstates the error.
fn percent_2dp(fraction: f64) -> String {
    let wide = format!("{:.12}", fraction * 100.0);
    match wide.find('.') {
        Some(dot) => wide[..dot + 3].to_string(),
        None => wide,
    }
}

/// `|v - t|` where `t` is the truncated shadow, computed without
/// intermediate rounding for binary32 and with binary128 for binary64.
pub fn absolute_error(v: AppFloat, t: AppFloat) -> f64 {
    match (v, t) {
        (AppFloat::F32(a), AppFloat::F32(b)) => (a as f64 - b as f64).abs(),
        _ => (F128::from_f64(v.to_f64()) - F128::from_f64(t.to_f64())).abs().to_f64(),
    }
}

pub fn relative_error(v: AppFloat, s: ShadowScalar) -> RelativeError {
    let t = truncate_shadow(s, v.kind());
    let (vf, tf) = (v.to_f64(), t.to_f64());
    match (vf.is_nan(), tf.is_nan()) {
        (true, true) => return RelativeError::Fraction(0.0),
        (true, false) | (false, true) => return RelativeError::CategoricalMismatch,
        _ => {}
    }
    if vf.is_infinite() || tf.is_infinite() {
        return if vf == tf {
            RelativeError::Fraction(0.0)
        } else {
            RelativeError::CategoricalMismatch
        };
    }
    if tf == 0.0 {
        return RelativeError::AbsOnly;
    }
    let rel = match (v, t) {
        (AppFloat::F32(a), AppFloat::F32(b)) => ((a as f64 - b as f64) / b as f64).abs(),
        _ => {
            let (a, b) = (F128::from_f64(vf), F128::from_f64(tf));
            ((a - b) / b).abs().to_f64()
        }
    };
    RelativeError::Fraction(rel)
}
