//! Format-generic IEEE-754 helpers: rounding, unpacking and literal codecs.
//!
//! Every binary interchange format used by the sanitizer (binary32, binary64
//! and binary128) is described by a [`Format`]. Values travel between the
//! helpers as an unbounded "significand times power of two" pair so that a
//! single round-to-nearest-even routine serves all conversions and all
//! software arithmetic.

use num_bigint::BigUint;
use num_traits::{ToPrimitive, Zero};

/// Parameters of a binary interchange format.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Format {
    /// Significand precision in bits, including the implicit leading bit.
    pub precision: u32,
    /// Largest unbiased exponent; the bias equals this value.
    pub emax: i32,
    /// Width of the exponent field.
    pub exp_bits: u32,
}

impl Format {
    pub const F32: Format = Format { precision: 24, emax: 127, exp_bits: 8 };
    pub const F64: Format = Format { precision: 53, emax: 1023, exp_bits: 11 };
    pub const F128: Format = Format { precision: 113, emax: 16383, exp_bits: 15 };

    pub const fn emin(self) -> i32 {
        1 - self.emax
    }

    pub const fn frac_bits(self) -> u32 {
        self.precision - 1
    }

    const fn sign_shift(self) -> u32 {
        self.precision - 1 + self.exp_bits
    }

    pub const fn sign_mask(self) -> u128 {
        1u128 << self.sign_shift()
    }

    const fn exp_field_max(self) -> u128 {
        (1u128 << self.exp_bits) - 1
    }

    pub const fn frac_mask(self) -> u128 {
        (1u128 << self.frac_bits()) - 1
    }

    pub const fn infinity(self, negative: bool) -> u128 {
        let bits = self.exp_field_max() << self.frac_bits();
        if negative {
            bits | self.sign_mask()
        } else {
            bits
        }
    }

    /// The quiet NaN with an all-zero payload and a clear sign bit.
    pub const fn canonical_nan(self) -> u128 {
        self.infinity(false) | (1u128 << (self.frac_bits() - 1))
    }

    pub const fn zero(self, negative: bool) -> u128 {
        if negative {
            self.sign_mask()
        } else {
            0
        }
    }
}

/// An unpacked IEEE value.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Unpacked {
    Zero { negative: bool },
    /// `significand * 2^exp`, significand nonzero. Subnormals are *not*
    /// normalized here; callers that need a fixed leading-bit position call
    /// [`normalize`].
    Finite { negative: bool, significand: u128, exp: i32 },
    Infinite { negative: bool },
    Nan,
}

pub fn unpack(fmt: Format, bits: u128) -> Unpacked {
    let negative = bits & fmt.sign_mask() != 0;
    let biased = (bits >> fmt.frac_bits()) & fmt.exp_field_max();
    let frac = bits & fmt.frac_mask();
    let lsb_min = fmt.emin() - fmt.frac_bits() as i32;
    if biased == fmt.exp_field_max() {
        if frac == 0 {
            Unpacked::Infinite { negative }
        } else {
            Unpacked::Nan
        }
    } else if biased == 0 {
        if frac == 0 {
            Unpacked::Zero { negative }
        } else {
            Unpacked::Finite { negative, significand: frac, exp: lsb_min }
        }
    } else {
        Unpacked::Finite {
            negative,
            significand: frac | (1u128 << fmt.frac_bits()),
            exp: biased as i32 - fmt.emax - fmt.frac_bits() as i32,
        }
    }
}

/// Shifts a nonzero significand so that its leading bit sits at `bit`.
pub fn normalize(significand: u128, exp: i32, bit: u32) -> (u128, i32) {
    debug_assert!(significand != 0);
    let lead = 127 - significand.leading_zeros();
    if lead < bit {
        let s = bit - lead;
        (significand << s, exp - s as i32)
    } else {
        let s = lead - bit;
        debug_assert!(significand.trailing_zeros() >= s);
        (significand >> s, exp + s as i32)
    }
}

/// Right shift that ORs every discarded bit into the result's lowest bit.
pub fn shift_right_jam(value: u128, shift: u32) -> u128 {
    if shift == 0 {
        value
    } else if shift >= 128 {
        (value != 0) as u128
    } else {
        let lost = value & ((1u128 << shift) - 1);
        (value >> shift) | (lost != 0) as u128
    }
}

/// Rounds `(significand + sticky) * 2^exp` to `fmt` with round-to-nearest-even.
///
/// `sticky` marks a nonzero remainder strictly below the significand's
/// lowest bit. Overflow yields an infinity, underflow a (signed) zero or a
/// subnormal.
pub fn round_pack(fmt: Format, negative: bool, significand: u128, exp: i32, sticky: bool) -> u128 {
    let sign = if negative { fmt.sign_mask() } else { 0 };
    if significand == 0 {
        return sign;
    }
    let p = fmt.precision as i32;
    let nbits = 128 - significand.leading_zeros() as i32;
    let lead_exp = exp.saturating_add(nbits - 1);
    if lead_exp > fmt.emax {
        return fmt.infinity(negative);
    }
    let mut lsb = (lead_exp - (p - 1)).max(fmt.emin() - (p - 1));
    let shift = lsb as i64 - exp as i64;
    let mut q = if shift <= 0 {
        // Exact: at most p significant bits, so the left shift cannot overflow.
        significand << (-shift) as u32
    } else {
        let (q, guard, rest) = if shift > 128 {
            (0, false, true)
        } else if shift == 128 {
            (0, significand >> 127 != 0, significand & !(1u128 << 127) != 0)
        } else {
            let s = shift as u32;
            (
                significand >> s,
                (significand >> (s - 1)) & 1 == 1,
                significand & ((1u128 << (s - 1)) - 1) != 0,
            )
        };
        let sticky = rest || sticky;
        if guard && (sticky || q & 1 == 1) {
            q + 1
        } else {
            q
        }
    };
    if q == 1u128 << p {
        q >>= 1;
        lsb += 1;
    }
    if q >> (p - 1) != 0 {
        let biased = lsb + (p - 1) + fmt.emax;
        if biased as u128 >= fmt.exp_field_max() {
            return fmt.infinity(negative);
        }
        sign | (biased as u128) << fmt.frac_bits() | (q & fmt.frac_mask())
    } else {
        sign | q
    }
}

/// Converts bits between formats with a single rounding.
pub fn convert(from: Format, to: Format, bits: u128) -> u128 {
    match unpack(from, bits) {
        Unpacked::Zero { negative } => to.zero(negative),
        Unpacked::Infinite { negative } => to.infinity(negative),
        Unpacked::Nan => to.canonical_nan(),
        Unpacked::Finite { negative, significand, exp } => round_pack(to, negative, significand, exp, false),
    }
}

/// Reduces a big integer to at most 128 bits, returning `(significand, shift, sticky)`
/// such that `value ~= significand * 2^shift`.
pub(crate) fn big_to_u128_sticky(value: &BigUint) -> (u128, i32, bool) {
    let bits = value.bits();
    if bits <= 128 {
        return (value.to_u128().unwrap_or(0), 0, false);
    }
    let shift = bits - 128;
    let top: BigUint = value >> shift;
    let rest: BigUint = value - (&top << shift);
    (top.to_u128().unwrap_or(u128::MAX), shift as i32, !rest.is_zero())
}

/// Canonical hexadecimal rendering: `[-]0x1.<hex>p<sign><exp>`, trailing zero
/// digits trimmed, subnormals renormalized. Zeros print as `0x0p+0`,
/// infinities as `inf`, NaNs as `nan`.
pub fn format_hex(fmt: Format, bits: u128) -> String {
    match unpack(fmt, bits) {
        Unpacked::Nan => "nan".into(),
        Unpacked::Infinite { negative } => if negative { "-inf" } else { "inf" }.into(),
        Unpacked::Zero { negative } => if negative { "-0x0p+0" } else { "0x0p+0" }.into(),
        Unpacked::Finite { negative, significand, exp } => {
            let fb = fmt.frac_bits();
            let (m, e) = normalize(significand, exp, fb);
            let lead_exp = e + fb as i32;
            let pad = (4 - fb % 4) % 4;
            let ndigits = ((fb + pad) / 4) as usize;
            let frac = (m & fmt.frac_mask()) << pad;
            let mut digits = format!("{:0width$x}", frac, width = ndigits);
            while digits.ends_with('0') {
                digits.pop();
            }
            let sign = if negative { "-" } else { "" };
            let esign = if lead_exp < 0 { '-' } else { '+' };
            if digits.is_empty() {
                format!("{sign}0x1p{esign}{}", lead_exp.unsigned_abs())
            } else {
                format!("{sign}0x1.{digits}p{esign}{}", lead_exp.unsigned_abs())
            }
        }
    }
}

/// Parses a C99 hexadecimal floating literal (`[-+]0x<hex>[.<hex>]p[-+]<dec>`)
/// and rounds it once into `fmt`. The binary exponent is mandatory. The
/// `inf` and `nan` spellings of [`format_hex`] are accepted too.
pub fn parse_hex(fmt: Format, text: &str) -> Option<u128> {
    let (negative, rest) = split_sign(text);
    match rest {
        "inf" => return Some(fmt.infinity(negative)),
        "nan" => return Some(fmt.canonical_nan()),
        _ => {}
    }
    let rest = rest.strip_prefix("0x").or_else(|| rest.strip_prefix("0X"))?;
    let p = rest.find(['p', 'P'])?;
    let (mantissa, exp_text) = (&rest[..p], &rest[p + 1..]);
    let (int_part, frac_part) = match mantissa.split_once('.') {
        Some((i, f)) => (i, f),
        None => (mantissa, ""),
    };
    if int_part.is_empty() && frac_part.is_empty() {
        return None;
    }
    let (exp_neg, exp_digits) = split_sign(exp_text);
    if exp_digits.is_empty() || !exp_digits.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    let mut exp: i64 = 0;
    for b in exp_digits.bytes() {
        exp = (exp * 10 + (b - b'0') as i64).min(1 << 40);
    }
    if exp_neg {
        exp = -exp;
    }
    let mut sig: u128 = 0;
    let mut sticky = false;
    for c in int_part.chars() {
        let d = c.to_digit(16)? as u128;
        if sig >> 120 == 0 {
            sig = sig * 16 + d;
        } else {
            sticky |= d != 0;
            exp += 4;
        }
    }
    for c in frac_part.chars() {
        let d = c.to_digit(16)? as u128;
        if sig >> 120 == 0 {
            sig = sig * 16 + d;
            exp -= 4;
        } else {
            sticky |= d != 0;
        }
    }
    if sig == 0 {
        return Some(fmt.zero(negative));
    }
    let exp = exp.clamp(-(1 << 30), 1 << 30) as i32;
    Some(round_pack(fmt, negative, sig, exp, sticky))
}

/// Parses a decimal literal (`[-+]digits[.digits][e[-+]digits]`) with a
/// single correct rounding into `fmt`.
pub fn parse_decimal(fmt: Format, text: &str) -> Option<u128> {
    let (negative, rest) = split_sign(text);
    let (mantissa, exp_text) = match rest.find(['e', 'E']) {
        Some(i) => (&rest[..i], Some(&rest[i + 1..])),
        None => (rest, None),
    };
    let (int_part, frac_part) = match mantissa.split_once('.') {
        Some((i, f)) => (i, f),
        None => (mantissa, ""),
    };
    if int_part.is_empty() && frac_part.is_empty() {
        return None;
    }
    if !int_part.bytes().chain(frac_part.bytes()).all(|b| b.is_ascii_digit()) {
        return None;
    }
    let mut exp10: i64 = 0;
    if let Some(e) = exp_text {
        let (en, ed) = split_sign(e);
        if ed.is_empty() || !ed.bytes().all(|b| b.is_ascii_digit()) {
            return None;
        }
        for b in ed.bytes() {
            exp10 = (exp10 * 10 + (b - b'0') as i64).min(1 << 40);
        }
        if en {
            exp10 = -exp10;
        }
    }
    let digits: String = int_part.chars().chain(frac_part.chars()).collect();
    let digits = digits.trim_start_matches('0');
    exp10 -= frac_part.len() as i64;
    if digits.is_empty() {
        return Some(fmt.zero(negative));
    }
    // Magnitude bounds that hold for every supported format.
    let magnitude = exp10 + digits.len() as i64;
    if magnitude > 5000 {
        return Some(fmt.infinity(negative));
    }
    if magnitude < -5000 {
        return Some(fmt.zero(negative));
    }
    let n = BigUint::parse_bytes(digits.as_bytes(), 10)?;
    let bits = if exp10 >= 0 {
        let v = n * BigUint::from(10u32).pow(exp10 as u32);
        let (sig, shift, sticky) = big_to_u128_sticky(&v);
        round_pack(fmt, negative, sig, shift, sticky)
    } else {
        let d = BigUint::from(10u32).pow((-exp10) as u32);
        let s = (140 + d.bits() as i64 - n.bits() as i64).max(0) as usize;
        let scaled: BigUint = n << s;
        let q = &scaled / &d;
        let r_zero = (&q * &d) == scaled;
        let (sig, shift, sticky) = big_to_u128_sticky(&q);
        round_pack(fmt, negative, sig, shift - s as i32, sticky || !r_zero)
    };
    Some(bits)
}

/// Renders the exact value with `decimals` fractional digits (like C's
/// `%.Nf`), rounding half to even. Magnitudes of `1e21` and above switch to
/// scientific notation through binary64, which is only approximate.
pub fn format_fixed(fmt: Format, bits: u128, decimals: u32) -> String {
    match unpack(fmt, bits) {
        Unpacked::Nan => "nan".into(),
        Unpacked::Infinite { negative } => if negative { "-inf" } else { "inf" }.into(),
        Unpacked::Zero { negative } => {
            format!("{}0.{}", if negative { "-" } else { "" }, "0".repeat(decimals as usize))
        }
        Unpacked::Finite { negative, significand, exp } => {
            let sign = if negative { "-" } else { "" };
            let lead = exp + 127 - significand.leading_zeros() as i32;
            if lead >= 70 {
                let approx = f64::from_bits(convert(fmt, Format::F64, bits) as u64);
                return format!("{:.*e}", decimals as usize, approx);
            }
            let scale = BigUint::from(10u32).pow(decimals);
            let m = BigUint::from(significand) * scale;
            let scaled = if exp >= 0 {
                m << exp as usize
            } else {
                let s = (-exp) as usize;
                let q: BigUint = &m >> s;
                let r: BigUint = &m - (&q << s);
                let half = BigUint::from(1u32) << (s - 1);
                let odd = q.bit(0);
                if r > half || (r == half && odd) {
                    q + 1u32
                } else {
                    q
                }
            };
            let mut text = scaled.to_str_radix(10);
            let d = decimals as usize;
            if text.len() <= d {
                text = format!("{}{}", "0".repeat(d + 1 - text.len()), text);
            }
            let (ip, fp) = text.split_at(text.len() - d);
            if d == 0 {
                format!("{sign}{ip}")
            } else {
                format!("{sign}{ip}.{fp}")
            }
        }
    }
}

fn split_sign(text: &str) -> (bool, &str) {
    if let Some(r) = text.strip_prefix('-') {
        (true, r)
    } else if let Some(r) = text.strip_prefix('+') {
        (false, r)
    } else {
        (false, text)
    }
}
