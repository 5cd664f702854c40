use std::collections::BTreeSet;
use std::fmt;

use super::types::{IrType, ScalarType};
use crate::extended::F128;

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct SourceLoc {
    pub file: String,
    pub line: u32,
    pub column: u32,
}

impl SourceLoc {
    pub fn new(file: impl Into<String>, line: u32, column: u32) -> SourceLoc {
        SourceLoc { file: file.into(), line, column }
    }
}

impl fmt::Display for SourceLoc {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}", self.file, self.line, self.column)
    }
}

/// A typed literal. Each lane holds the raw bit pattern of the element
/// (IEEE encoding for floats, two's complement truncated to the width for
/// integers, the address for pointers).
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Constant {
    pub ty: IrType,
    pub lanes: Vec<u128>,
}

impl Constant {
    pub fn scalar_bits(scalar: ScalarType, bits: u128) -> Constant {
        Constant { ty: IrType::scalar(scalar), lanes: vec![bits & lane_mask(scalar)] }
    }

    pub fn f32(x: f32) -> Constant {
        Constant::scalar_bits(ScalarType::F32, x.to_bits() as u128)
    }

    pub fn f64(x: f64) -> Constant {
        Constant::scalar_bits(ScalarType::F64, x.to_bits() as u128)
    }

    pub fn f128(x: F128) -> Constant {
        Constant::scalar_bits(ScalarType::F128, x.to_bits())
    }

    pub fn int(scalar: ScalarType, value: i64) -> Constant {
        Constant::scalar_bits(scalar, value as u64 as u128)
    }

    pub fn bool(b: bool) -> Constant {
        Constant::scalar_bits(ScalarType::I1, b as u128)
    }

    pub fn null() -> Constant {
        Constant::scalar_bits(ScalarType::Ptr, 0)
    }

    pub fn zero(ty: IrType) -> Constant {
        Constant { ty, lanes: vec![0; ty.lanes as usize] }
    }

    /// Signed value of an integer lane.
    pub fn lane_as_i64(&self, lane: usize) -> i64 {
        sign_extend(self.ty.scalar, self.lanes[lane])
    }
}

pub fn lane_mask(scalar: ScalarType) -> u128 {
    match scalar.bit_width() {
        128 => u128::MAX,
        w => (1u128 << w) - 1,
    }
}

pub fn sign_extend(scalar: ScalarType, bits: u128) -> i64 {
    let w = scalar.bit_width();
    if w >= 64 {
        bits as u64 as i64
    } else {
        let shift = 64 - w;
        ((bits as u64) << shift) as i64 >> shift
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Value {
    /// An SSA name, without the `%` sigil.
    Local(String),
    Const(Constant),
    /// The address of a function, typed `ptr`.
    FuncRef(String),
}

impl Value {
    pub fn local(name: impl Into<String>) -> Value {
        Value::Local(name.into())
    }

    pub fn as_local(&self) -> Option<&str> {
        match self {
            Value::Local(n) => Some(n),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BinOp {
    FAdd,
    FSub,
    FMul,
    FDiv,
    Add,
    Sub,
    Mul,
    SDiv,
}

impl BinOp {
    pub const ALL: [BinOp; 8] =
        [BinOp::FAdd, BinOp::FSub, BinOp::FMul, BinOp::FDiv, BinOp::Add, BinOp::Sub, BinOp::Mul, BinOp::SDiv];

    pub fn name(self) -> &'static str {
        match self {
            BinOp::FAdd => "fadd",
            BinOp::FSub => "fsub",
            BinOp::FMul => "fmul",
            BinOp::FDiv => "fdiv",
            BinOp::Add => "add",
            BinOp::Sub => "sub",
            BinOp::Mul => "mul",
            BinOp::SDiv => "sdiv",
        }
    }

    pub fn is_float(self) -> bool {
        matches!(self, BinOp::FAdd | BinOp::FSub | BinOp::FMul | BinOp::FDiv)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum FPred {
    Oeq,
    One,
    Olt,
    Ole,
    Ogt,
    Oge,
    Ord,
    Uno,
    Ueq,
    Une,
    Ult,
    Ule,
    Ugt,
    Uge,
}

impl FPred {
    pub const ALL: [FPred; 14] = [
        FPred::Oeq,
        FPred::One,
        FPred::Olt,
        FPred::Ole,
        FPred::Ogt,
        FPred::Oge,
        FPred::Ord,
        FPred::Uno,
        FPred::Ueq,
        FPred::Une,
        FPred::Ult,
        FPred::Ule,
        FPred::Ugt,
        FPred::Uge,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FPred::Oeq => "oeq",
            FPred::One => "one",
            FPred::Olt => "olt",
            FPred::Ole => "ole",
            FPred::Ogt => "ogt",
            FPred::Oge => "oge",
            FPred::Ord => "ord",
            FPred::Uno => "uno",
            FPred::Ueq => "ueq",
            FPred::Une => "une",
            FPred::Ult => "ult",
            FPred::Ule => "ule",
            FPred::Ugt => "ugt",
            FPred::Uge => "uge",
        }
    }

    pub fn from_name(s: &str) -> Option<FPred> {
        FPred::ALL.into_iter().find(|p| p.name() == s)
    }

    pub fn code(self) -> u32 {
        FPred::ALL.iter().position(|&p| p == self).unwrap() as u32
    }

    pub fn from_code(code: u32) -> Option<FPred> {
        FPred::ALL.get(code as usize).copied()
    }

    /// Evaluates the predicate given the ordering of the operands
    /// (`None` when either is NaN).
    pub fn eval(self, ord: Option<std::cmp::Ordering>) -> bool {
        use std::cmp::Ordering::*;
        match ord {
            None => matches!(
                self,
                FPred::Uno | FPred::Ueq | FPred::Une | FPred::Ult | FPred::Ule | FPred::Ugt | FPred::Uge
            ),
            Some(o) => match self {
                FPred::Oeq | FPred::Ueq => o == Equal,
                FPred::One | FPred::Une => o != Equal,
                FPred::Olt | FPred::Ult => o == Less,
                FPred::Ole | FPred::Ule => o != Greater,
                FPred::Ogt | FPred::Ugt => o == Greater,
                FPred::Oge | FPred::Uge => o != Less,
                FPred::Ord => true,
                FPred::Uno => false,
            },
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum IPred {
    Eq,
    Ne,
    Slt,
    Sle,
    Sgt,
    Sge,
    Ult,
    Ule,
    Ugt,
    Uge,
}

impl IPred {
    pub const ALL: [IPred; 10] = [
        IPred::Eq,
        IPred::Ne,
        IPred::Slt,
        IPred::Sle,
        IPred::Sgt,
        IPred::Sge,
        IPred::Ult,
        IPred::Ule,
        IPred::Ugt,
        IPred::Uge,
    ];

    pub fn name(self) -> &'static str {
        match self {
            IPred::Eq => "eq",
            IPred::Ne => "ne",
            IPred::Slt => "slt",
            IPred::Sle => "sle",
            IPred::Sgt => "sgt",
            IPred::Sge => "sge",
            IPred::Ult => "ult",
            IPred::Ule => "ule",
            IPred::Ugt => "ugt",
            IPred::Uge => "uge",
        }
    }

    pub fn from_name(s: &str) -> Option<IPred> {
        IPred::ALL.into_iter().find(|p| p.name() == s)
    }

    pub fn eval(self, a: i64, b: i64) -> bool {
        let (ua, ub) = (a as u64, b as u64);
        match self {
            IPred::Eq => a == b,
            IPred::Ne => a != b,
            IPred::Slt => a < b,
            IPred::Sle => a <= b,
            IPred::Sgt => a > b,
            IPred::Sge => a >= b,
            IPred::Ult => ua < ub,
            IPred::Ule => ua <= ub,
            IPred::Ugt => ua > ub,
            IPred::Uge => ua >= ub,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum CastOp {
    FpExt,
    FpTrunc,
    SiToFp,
    FpToSi,
    Bitcast,
}

impl CastOp {
    pub const ALL: [CastOp; 5] = [CastOp::FpExt, CastOp::FpTrunc, CastOp::SiToFp, CastOp::FpToSi, CastOp::Bitcast];

    pub fn name(self) -> &'static str {
        match self {
            CastOp::FpExt => "fpext",
            CastOp::FpTrunc => "fptrunc",
            CastOp::SiToFp => "sitofp",
            CastOp::FpToSi => "fptosi",
            CastOp::Bitcast => "bitcast",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Op {
    Binary { op: BinOp, ty: IrType, lhs: Value, rhs: Value },
    FNeg { ty: IrType, operand: Value },
    FCmp { pred: FPred, ty: IrType, lhs: Value, rhs: Value },
    ICmp { pred: IPred, ty: IrType, lhs: Value, rhs: Value },
    Cast { op: CastOp, from: IrType, value: Value, to: IrType },
    Select { cond: Value, ty: IrType, on_true: Value, on_false: Value },
    ExtractElement { ty: IrType, vector: Value, index: Value },
    InsertElement { ty: IrType, vector: Value, element: Value, index: Value },
    ShuffleVector { ty: IrType, lhs: Value, rhs: Value, mask: Vec<u32> },
    Load { ty: IrType, ptr: Value },
    Store { ty: IrType, value: Value, ptr: Value },
    /// Allocates `count` elements of `ty` in the current frame.
    Alloca { ty: IrType, count: Value },
    PtrAdd { ptr: Value, offset: Value },
    Call { ret: Option<IrType>, callee: String, args: Vec<(IrType, Value)> },
    Br { target: String },
    CondBr { cond: Value, on_true: String, on_false: String },
    Phi { ty: IrType, incoming: Vec<(Value, String)> },
    Ret { value: Option<(IrType, Value)> },
    Memcpy { dst: Value, src: Value, len: Value },
    Memset { dst: Value, byte: Value, len: Value },
    Unreachable,
}

impl Op {
    pub fn opcode(&self) -> &'static str {
        match self {
            Op::Binary { op, .. } => op.name(),
            Op::FNeg { .. } => "fneg",
            Op::FCmp { .. } => "fcmp",
            Op::ICmp { .. } => "icmp",
            Op::Cast { op, .. } => op.name(),
            Op::Select { .. } => "select",
            Op::ExtractElement { .. } => "extractelement",
            Op::InsertElement { .. } => "insertelement",
            Op::ShuffleVector { .. } => "shufflevector",
            Op::Load { .. } => "load",
            Op::Store { .. } => "store",
            Op::Alloca { .. } => "alloca",
            Op::PtrAdd { .. } => "ptradd",
            Op::Call { .. } => "call",
            Op::Br { .. } => "br",
            Op::CondBr { .. } => "condbr",
            Op::Phi { .. } => "phi",
            Op::Ret { .. } => "ret",
            Op::Memcpy { .. } => "memcpy",
            Op::Memset { .. } => "memset",
            Op::Unreachable => "unreachable",
        }
    }

    /// The type of the value this operation produces, if any.
    pub fn result_type(&self) -> Option<IrType> {
        match self {
            Op::Binary { ty, .. } | Op::FNeg { ty, .. } | Op::Select { ty, .. } | Op::Phi { ty, .. } => Some(*ty),
            Op::InsertElement { ty, .. } | Op::Load { ty, .. } => Some(*ty),
            Op::FCmp { .. } | Op::ICmp { .. } => Some(IrType::I1),
            Op::Cast { to, .. } => Some(*to),
            Op::ExtractElement { ty, .. } => Some(IrType::scalar(ty.scalar)),
            Op::ShuffleVector { ty, mask, .. } => Some(IrType::vector(ty.scalar, mask.len() as u32)),
            Op::Alloca { .. } | Op::PtrAdd { .. } => Some(IrType::PTR),
            Op::Call { ret, .. } => *ret,
            _ => None,
        }
    }

    pub fn is_terminator(&self) -> bool {
        matches!(self, Op::Br { .. } | Op::CondBr { .. } | Op::Ret { .. } | Op::Unreachable)
    }

    pub fn successors(&self) -> Vec<&str> {
        match self {
            Op::Br { target } => vec![target],
            Op::CondBr { on_true, on_false, .. } => vec![on_true, on_false],
            _ => Vec::new(),
        }
    }

    pub fn successors_mut(&mut self) -> Vec<&mut String> {
        match self {
            Op::Br { target } => vec![target],
            Op::CondBr { on_true, on_false, .. } => vec![on_true, on_false],
            _ => Vec::new(),
        }
    }

    pub fn operands(&self) -> Vec<&Value> {
        match self {
            Op::Binary { lhs, rhs, .. } | Op::FCmp { lhs, rhs, .. } | Op::ICmp { lhs, rhs, .. } => vec![lhs, rhs],
            Op::ShuffleVector { lhs, rhs, .. } => vec![lhs, rhs],
            Op::FNeg { operand, .. } => vec![operand],
            Op::Cast { value, .. } => vec![value],
            Op::Select { cond, on_true, on_false, .. } => vec![cond, on_true, on_false],
            Op::ExtractElement { vector, index, .. } => vec![vector, index],
            Op::InsertElement { vector, element, index, .. } => vec![vector, element, index],
            Op::Load { ptr, .. } => vec![ptr],
            Op::Store { value, ptr, .. } => vec![value, ptr],
            Op::Alloca { count, .. } => vec![count],
            Op::PtrAdd { ptr, offset } => vec![ptr, offset],
            Op::Call { args, .. } => args.iter().map(|(_, v)| v).collect(),
            Op::CondBr { cond, .. } => vec![cond],
            Op::Phi { incoming, .. } => incoming.iter().map(|(v, _)| v).collect(),
            Op::Ret { value } => value.iter().map(|(_, v)| v).collect(),
            Op::Memcpy { dst, src, len } => vec![dst, src, len],
            Op::Memset { dst, byte, len } => vec![dst, byte, len],
            Op::Br { .. } | Op::Unreachable => Vec::new(),
        }
    }

    pub fn operands_mut(&mut self) -> Vec<&mut Value> {
        match self {
            Op::Binary { lhs, rhs, .. } | Op::FCmp { lhs, rhs, .. } | Op::ICmp { lhs, rhs, .. } => vec![lhs, rhs],
            Op::ShuffleVector { lhs, rhs, .. } => vec![lhs, rhs],
            Op::FNeg { operand, .. } => vec![operand],
            Op::Cast { value, .. } => vec![value],
            Op::Select { cond, on_true, on_false, .. } => vec![cond, on_true, on_false],
            Op::ExtractElement { vector, index, .. } => vec![vector, index],
            Op::InsertElement { vector, element, index, .. } => vec![vector, element, index],
            Op::Load { ptr, .. } => vec![ptr],
            Op::Store { value, ptr, .. } => vec![value, ptr],
            Op::Alloca { count, .. } => vec![count],
            Op::PtrAdd { ptr, offset } => vec![ptr, offset],
            Op::Call { args, .. } => args.iter_mut().map(|(_, v)| v).collect(),
            Op::CondBr { cond, .. } => vec![cond],
            Op::Phi { incoming, .. } => incoming.iter_mut().map(|(v, _)| v).collect(),
            Op::Ret { value } => value.iter_mut().map(|(_, v)| v).collect(),
            Op::Memcpy { dst, src, len } => vec![dst, src, len],
            Op::Memset { dst, byte, len } => vec![dst, byte, len],
            Op::Br { .. } | Op::Unreachable => Vec::new(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Instruction {
    pub result: Option<String>,
    pub op: Op,
    pub loc: Option<SourceLoc>,
}

impl Instruction {
    pub fn new(result: Option<String>, op: Op, loc: Option<SourceLoc>) -> Instruction {
        Instruction { result, op, loc }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Block {
    pub label: String,
    pub insts: Vec<Instruction>,
}

impl Block {
    pub fn new(label: impl Into<String>) -> Block {
        Block { label: label.into(), insts: Vec::new() }
    }

    pub fn terminator(&self) -> Option<&Instruction> {
        self.insts.last().filter(|i| i.op.is_terminator())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FnAttr {
    NoInstrument,
    /// Body supplied by the host; printed as a `declare`.
    External,
}

impl FnAttr {
    pub fn name(self) -> &'static str {
        match self {
            FnAttr::NoInstrument => "noinstrument",
            FnAttr::External => "external",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Param {
    pub name: String,
    pub ty: IrType,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Function {
    pub name: String,
    pub params: Vec<Param>,
    pub ret: Option<IrType>,
    pub blocks: Vec<Block>,
    pub attrs: BTreeSet<FnAttr>,
    pub loc: Option<SourceLoc>,
}

impl Function {
    pub fn declaration(name: impl Into<String>, params: Vec<IrType>, ret: Option<IrType>) -> Function {
        Function {
            name: name.into(),
            params: params.into_iter().map(|ty| Param { name: String::new(), ty }).collect(),
            ret,
            blocks: Vec::new(),
            attrs: [FnAttr::External].into_iter().collect(),
            loc: None,
        }
    }

    pub fn is_external(&self) -> bool {
        self.attrs.contains(&FnAttr::External)
    }

    pub fn is_noinstrument(&self) -> bool {
        self.attrs.contains(&FnAttr::NoInstrument)
    }

    pub fn block(&self, label: &str) -> Option<&Block> {
        self.blocks.iter().find(|b| b.label == label)
    }

    pub fn param_types(&self) -> Vec<IrType> {
        self.params.iter().map(|p| p.ty).collect()
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Module {
    pub functions: Vec<Function>,
    /// Set by the instrumentation pass; a second pass over the module is refused.
    pub instrumented: bool,
}

impl Module {
    pub fn function(&self, name: &str) -> Option<&Function> {
        self.functions.iter().find(|f| f.name == name)
    }

    pub fn function_mut(&mut self, name: &str) -> Option<&mut Function> {
        self.functions.iter_mut().find(|f| f.name == name)
    }
}
