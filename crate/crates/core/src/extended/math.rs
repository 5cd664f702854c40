//! Known C math functions and their shadow counterparts.
//!
//! A binary32 function is shadowed by its binary64 counterpart evaluated on
//! the binary64 shadow (`S(cosf(v)) = cos(S(v))`). Binary64 functions only
//! have extended implementations for `fabs` (exact) and `sqrt` (two Newton
//! steps from the binary64 seed); every other binary64 function resumes from
//! the application result.

use super::f128::F128;
use super::shadow::{AppFloat, FloatKind, ShadowScalar};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MathOp {
    Fabs,
    Sqrt,
    Sin,
    Cos,
    Exp,
    Log,
    Fma,
}

impl MathOp {
    pub fn arity(self) -> usize {
        match self {
            MathOp::Fma => 3,
            _ => 1,
        }
    }
}

/// A registry entry: which operation, at which application precision.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct MathFn {
    pub op: MathOp,
    pub kind: FloatKind,
}

const REGISTRY: &[(&str, MathOp, FloatKind)] = &[
    ("fabsf", MathOp::Fabs, FloatKind::F32),
    ("sqrtf", MathOp::Sqrt, FloatKind::F32),
    ("sinf", MathOp::Sin, FloatKind::F32),
    ("cosf", MathOp::Cos, FloatKind::F32),
    ("expf", MathOp::Exp, FloatKind::F32),
    ("logf", MathOp::Log, FloatKind::F32),
    ("fmaf", MathOp::Fma, FloatKind::F32),
    ("fabs", MathOp::Fabs, FloatKind::F64),
    ("sqrt", MathOp::Sqrt, FloatKind::F64),
    ("sin", MathOp::Sin, FloatKind::F64),
    ("cos", MathOp::Cos, FloatKind::F64),
    ("exp", MathOp::Exp, FloatKind::F64),
    ("log", MathOp::Log, FloatKind::F64),
    ("fma", MathOp::Fma, FloatKind::F64),
];

pub fn lookup(name: &str) -> Option<MathFn> {
    REGISTRY
        .iter()
        .find(|(n, _, _)| *n == name)
        .map(|&(_, op, kind)| MathFn { op, kind })
}

pub fn names() -> impl Iterator<Item = &'static str> {
    REGISTRY.iter().map(|(n, _, _)| *n)
}

/// Application semantics of a registered function.
pub fn eval_app(f: MathFn, args: &[AppFloat]) -> AppFloat {
    match f.kind {
        FloatKind::F32 => {
            let a: Vec<f32> = args.iter().map(|x| x.to_f64() as f32).collect();
            AppFloat::F32(match f.op {
                MathOp::Fabs => a[0].abs(),
                MathOp::Sqrt => a[0].sqrt(),
                MathOp::Sin => a[0].sin(),
                MathOp::Cos => a[0].cos(),
                MathOp::Exp => a[0].exp(),
                MathOp::Log => a[0].ln(),
                MathOp::Fma => a[0].mul_add(a[1], a[2]),
            })
        }
        FloatKind::F64 => {
            let a: Vec<f64> = args.iter().map(|x| x.to_f64()).collect();
            AppFloat::F64(match f.op {
                MathOp::Fabs => a[0].abs(),
                MathOp::Sqrt => a[0].sqrt(),
                MathOp::Sin => a[0].sin(),
                MathOp::Cos => a[0].cos(),
                MathOp::Exp => a[0].exp(),
                MathOp::Log => a[0].ln(),
                MathOp::Fma => a[0].mul_add(a[1], a[2]),
            })
        }
    }
}

/// How a shadow math result was obtained.
#[derive(Clone, Copy, Debug)]
pub enum ShadowMath {
    /// Evaluated in the shadow domain.
    Computed(ShadowScalar),
    /// No higher-precision implementation: the application result was extended.
    Resumed(ShadowScalar),
}

impl ShadowMath {
    pub fn value(self) -> ShadowScalar {
        match self {
            ShadowMath::Computed(s) | ShadowMath::Resumed(s) => s,
        }
    }
}

/// Shadow of `name(args)`. Returns `None` for names outside the registry;
/// the caller then extends the application result and records a resume.
pub fn shadow_math(name: &str, args: &[ShadowScalar], app_result: AppFloat) -> Option<ShadowMath> {
    let f = lookup(name)?;
    if args.len() != f.op.arity() {
        return None;
    }
    Some(match f.kind {
        FloatKind::F32 => {
            let a: Vec<f64> = args
                .iter()
                .map(|s| match s {
                    ShadowScalar::F64(x) => *x,
                    ShadowScalar::Ext(x) => x.to_f64(),
                })
                .collect();
            ShadowMath::Computed(ShadowScalar::F64(match f.op {
                MathOp::Fabs => a[0].abs(),
                MathOp::Sqrt => a[0].sqrt(),
                MathOp::Sin => a[0].sin(),
                MathOp::Cos => a[0].cos(),
                MathOp::Exp => a[0].exp(),
                MathOp::Log => a[0].ln(),
                MathOp::Fma => a[0].mul_add(a[1], a[2]),
            }))
        }
        FloatKind::F64 => {
            let x = match args[0] {
                ShadowScalar::Ext(x) => x,
                ShadowScalar::F64(x) => F128::from_f64(x),
            };
            match f.op {
                MathOp::Fabs => ShadowMath::Computed(ShadowScalar::Ext(x.abs())),
                MathOp::Sqrt => ShadowMath::Computed(ShadowScalar::Ext(sqrt_newton(x))),
                _ => ShadowMath::Resumed(ShadowScalar::extend(app_result)),
            }
        }
    })
}

/// Square root refined by two Newton steps from a binary64 seed.
///
/// The argument is first scaled by an even power of two into `[1, 4)` so the
/// seed never overflows or underflows binary64.
pub fn sqrt_newton(x: F128) -> F128 {
    if x.is_nan() || (x.is_sign_negative() && !x.is_zero()) {
        return F128::NAN;
    }
    if x.is_zero() || x.is_infinite() {
        return x;
    }
    let e = x.exponent().expect("finite nonzero");
    let half_e = e.div_euclid(2);
    let y = x.scale_by_pow2(-2 * half_e);
    let seed = F128::from_f64(y.to_f64().sqrt());
    let half = F128::from_f64(0.5);
    let once = (seed + y / seed) * half;
    let twice = (once + y / once) * half;
    twice.scale_by_pow2(half_e)
}
