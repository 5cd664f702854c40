use crate::extended::{AppFloat, FloatKind, ShadowScalar, F128};
use crate::ir::{lane_mask, sign_extend, Constant, IrType, ScalarType};

/// A runtime SSA value. Lanes hold raw bits masked to the scalar width.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Val {
    S(u128),
    V(Box<[u128]>),
}

impl Val {
    pub fn from_lanes(lanes: Vec<u128>) -> Val {
        if lanes.len() == 1 {
            Val::S(lanes[0])
        } else {
            Val::V(lanes.into_boxed_slice())
        }
    }

    pub fn from_constant(c: &Constant) -> Val {
        if c.ty.is_vector() {
            Val::V(c.lanes.clone().into_boxed_slice())
        } else {
            Val::S(c.lanes[0])
        }
    }

    pub fn to_constant(&self, ty: IrType) -> Constant {
        Constant { ty, lanes: self.lanes().to_vec() }
    }

    pub fn lanes(&self) -> &[u128] {
        match self {
            Val::S(x) => std::slice::from_ref(x),
            Val::V(v) => v,
        }
    }

    pub fn scalar(&self) -> u128 {
        match self {
            Val::S(x) => *x,
            Val::V(v) => v[0],
        }
    }

    pub fn map(&self, f: impl Fn(u128) -> u128) -> Val {
        match self {
            Val::S(x) => Val::S(f(*x)),
            Val::V(v) => Val::V(v.iter().map(|&x| f(x)).collect()),
        }
    }

    pub fn zip(&self, other: &Val, f: impl Fn(u128, u128) -> u128) -> Val {
        match (self, other) {
            (Val::S(a), Val::S(b)) => Val::S(f(*a, *b)),
            _ => Val::V(self.lanes().iter().zip(other.lanes()).map(|(&a, &b)| f(a, b)).collect()),
        }
    }

    pub fn as_i64(&self, scalar: ScalarType) -> i64 {
        sign_extend(scalar, self.scalar())
    }

    pub fn as_u64(&self) -> u64 {
        self.scalar() as u64
    }
}

pub fn int_bits(scalar: ScalarType, v: i64) -> u128 {
    (v as u64 as u128) & lane_mask(scalar)
}

pub fn app_float(scalar: ScalarType, bits: u128) -> AppFloat {
    match scalar {
        ScalarType::F32 => AppFloat::F32(f32::from_bits(bits as u32)),
        _ => AppFloat::F64(f64::from_bits(bits as u64)),
    }
}

pub fn app_bits(v: AppFloat) -> u128 {
    match v {
        AppFloat::F32(x) => x.to_bits() as u128,
        AppFloat::F64(x) => x.to_bits() as u128,
    }
}

/// Decodes shadow bits for an application scalar type (f32 → binary64 bits,
/// f64 → binary128 bits).
pub fn shadow_scalar(app: ScalarType, bits: u128) -> ShadowScalar {
    match app {
        ScalarType::F32 => ShadowScalar::F64(f64::from_bits(bits as u64)),
        _ => ShadowScalar::Ext(F128::from_bits(bits)),
    }
}

/// Encodes a shadow in the format expected for `kind`, converting if a
/// foreign-format shadow shows up.
pub fn shadow_bits(s: ShadowScalar, kind: FloatKind) -> u128 {
    match (s, kind) {
        (ShadowScalar::F64(x), FloatKind::F32) => x.to_bits() as u128,
        (ShadowScalar::Ext(x), FloatKind::F32) => x.to_f64().to_bits() as u128,
        (ShadowScalar::F64(x), FloatKind::F64) => F128::from_f64(x).to_bits(),
        (ShadowScalar::Ext(x), FloatKind::F64) => x.to_bits(),
    }
}
