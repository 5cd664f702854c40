//! Extended-precision arithmetic used for shadow values.

pub mod f128;
pub mod math;
pub mod shadow;
pub mod softfloat;

pub use f128::{ExtendedReal, F128};
pub use shadow::{
    absolute_error, relative_error, truncate_shadow, AppFloat, FloatKind, RelativeError, ShadowScalar,
};

use softfloat::Format;

/// Canonical C99 hex spelling of a binary32 value.
pub fn hex_f32(x: f32) -> String {
    softfloat::format_hex(Format::F32, x.to_bits() as u128)
}

/// Canonical C99 hex spelling of a binary64 value.
pub fn hex_f64(x: f64) -> String {
    softfloat::format_hex(Format::F64, x.to_bits() as u128)
}

pub fn parse_hex_f32(text: &str) -> Option<f32> {
    softfloat::parse_hex(Format::F32, text).map(|b| f32::from_bits(b as u32))
}

pub fn parse_hex_f64(text: &str) -> Option<f64> {
    softfloat::parse_hex(Format::F64, text).map(|b| f64::from_bits(b as u64))
}
