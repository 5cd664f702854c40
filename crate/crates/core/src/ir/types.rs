use std::fmt;

use crate::extended::FloatKind;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ScalarType {
    I1,
    I8,
    I32,
    I64,
    F32,
    F64,
    F128,
    Ptr,
}

impl ScalarType {
    pub const ALL: [ScalarType; 8] = [
        ScalarType::I1,
        ScalarType::I8,
        ScalarType::I32,
        ScalarType::I64,
        ScalarType::F32,
        ScalarType::F64,
        ScalarType::F128,
        ScalarType::Ptr,
    ];

    pub fn size(self) -> u64 {
        match self {
            ScalarType::I1 | ScalarType::I8 => 1,
            ScalarType::I32 | ScalarType::F32 => 4,
            ScalarType::I64 | ScalarType::F64 | ScalarType::Ptr => 8,
            ScalarType::F128 => 16,
        }
    }

    /// Number of value bits (1 for `i1`).
    pub fn bit_width(self) -> u32 {
        match self {
            ScalarType::I1 => 1,
            other => other.size() as u32 * 8,
        }
    }

    pub fn is_float(self) -> bool {
        matches!(self, ScalarType::F32 | ScalarType::F64 | ScalarType::F128)
    }

    pub fn is_int(self) -> bool {
        matches!(self, ScalarType::I1 | ScalarType::I8 | ScalarType::I32 | ScalarType::I64)
    }

    pub fn name(self) -> &'static str {
        match self {
            ScalarType::I1 => "i1",
            ScalarType::I8 => "i8",
            ScalarType::I32 => "i32",
            ScalarType::I64 => "i64",
            ScalarType::F32 => "f32",
            ScalarType::F64 => "f64",
            ScalarType::F128 => "f128",
            ScalarType::Ptr => "ptr",
        }
    }

    pub fn from_name(s: &str) -> Option<ScalarType> {
        ScalarType::ALL.into_iter().find(|t| t.name() == s)
    }

    pub fn may_be_vector_lane(self) -> bool {
        matches!(
            self,
            ScalarType::F32 | ScalarType::F64 | ScalarType::F128 | ScalarType::I32 | ScalarType::I64
        )
    }

    /// The application float kind for types that carry a shadow.
    pub fn app_float(self) -> Option<FloatKind> {
        match self {
            ScalarType::F32 => Some(FloatKind::F32),
            ScalarType::F64 => Some(FloatKind::F64),
            _ => None,
        }
    }
}

impl fmt::Display for ScalarType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A scalar or fixed-width vector type.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct IrType {
    pub scalar: ScalarType,
    pub lanes: u32,
}

impl IrType {
    pub const I1: IrType = IrType::scalar(ScalarType::I1);
    pub const I8: IrType = IrType::scalar(ScalarType::I8);
    pub const I32: IrType = IrType::scalar(ScalarType::I32);
    pub const I64: IrType = IrType::scalar(ScalarType::I64);
    pub const F32: IrType = IrType::scalar(ScalarType::F32);
    pub const F64: IrType = IrType::scalar(ScalarType::F64);
    pub const F128: IrType = IrType::scalar(ScalarType::F128);
    pub const PTR: IrType = IrType::scalar(ScalarType::Ptr);

    pub const fn scalar(scalar: ScalarType) -> IrType {
        IrType { scalar, lanes: 1 }
    }

    pub const fn vector(scalar: ScalarType, lanes: u32) -> IrType {
        IrType { scalar, lanes }
    }

    pub fn is_vector(self) -> bool {
        self.lanes > 1
    }

    pub fn is_float(self) -> bool {
        self.scalar.is_float()
    }

    pub fn is_int(self) -> bool {
        self.scalar.is_int()
    }

    pub fn size(self) -> u64 {
        self.scalar.size() * self.lanes as u64
    }

    pub fn with_scalar(self, scalar: ScalarType) -> IrType {
        IrType { scalar, lanes: self.lanes }
    }

    pub fn is_well_formed(self) -> bool {
        self.lanes == 1 || (self.lanes > 1 && self.scalar.may_be_vector_lane())
    }

    /// Application types that carry shadows: f32, f64 and vectors of them.
    pub fn is_shadowed(self) -> bool {
        self.scalar.app_float().is_some()
    }

    /// Short mangling used in runtime hook names: `f32`, `v4f64`, ...
    pub fn mangle(self) -> String {
        if self.lanes == 1 {
            self.scalar.name().to_string()
        } else {
            format!("v{}{}", self.lanes, self.scalar.name())
        }
    }
}

impl fmt::Display for IrType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.lanes == 1 {
            write!(f, "{}", self.scalar)
        } else {
            write!(f, "<{} x {}>", self.lanes, self.scalar)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("type {0} has no shadow type")]
pub struct NoShadowType(pub IrType);

/// f32 → f64, f64 → f128, lane count preserved.
pub fn shadow_type_of(t: IrType) -> Result<IrType, NoShadowType> {
    match t.scalar {
        ScalarType::F32 => Ok(t.with_scalar(ScalarType::F64)),
        ScalarType::F64 => Ok(t.with_scalar(ScalarType::F128)),
        _ => Err(NoShadowType(t)),
    }
}
