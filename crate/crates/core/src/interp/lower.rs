//! Lowering of a verified module into an index-based form: SSA names become
//! frame slots, labels become block indices and callees function indices.

use std::collections::HashMap;

use super::builtins::{resolve, Builtin};
use super::value::Val;
use crate::ir::{BinOp, CastOp, FPred, IPred, IrType, Module, Op, SourceLoc, Value};

pub type Slot = u32;

#[derive(Clone, Debug)]
pub enum Operand {
    Slot(Slot),
    Imm(Val),
}

#[derive(Clone, Debug)]
pub enum LOp {
    Bin { op: BinOp, ty: IrType, a: Operand, b: Operand },
    FNeg { ty: IrType, a: Operand },
    FCmp { pred: FPred, ty: IrType, a: Operand, b: Operand },
    ICmp { pred: IPred, ty: IrType, a: Operand, b: Operand },
    Cast { op: CastOp, from: IrType, to: IrType, a: Operand },
    Select { c: Operand, a: Operand, b: Operand },
    Extract { ty: IrType, v: Operand, idx: Operand },
    Insert { ty: IrType, v: Operand, e: Operand, idx: Operand },
    Shuffle { ty: IrType, a: Operand, b: Operand, mask: Vec<u32> },
    Load { ty: IrType, p: Operand },
    Store { ty: IrType, v: Operand, p: Operand },
    Alloca { ty: IrType, n: Operand },
    PtrAdd { p: Operand, o: Operand },
    Call { callee: usize, args: Vec<Operand> },
    Br { target: usize },
    CondBr { c: Operand, t: usize, f: usize },
    Ret { v: Option<Operand> },
    Memcpy { d: Operand, s: Operand, n: Operand },
    Memset { d: Operand, b: Operand, n: Operand },
    Unreachable,
}

#[derive(Clone, Debug)]
pub struct LInst {
    pub dst: Option<Slot>,
    pub op: LOp,
    pub loc: Option<SourceLoc>,
}

#[derive(Clone, Debug)]
pub struct LPhi {
    pub dst: Slot,
    pub incoming: Vec<(usize, Operand)>,
}

#[derive(Clone, Debug, Default)]
pub struct LBlock {
    pub phis: Vec<LPhi>,
    pub insts: Vec<LInst>,
}

#[derive(Clone, Debug)]
pub enum FuncKind {
    Defined,
    /// External declaration; `None` when no builtin has that name.
    External(Option<Builtin>),
}

#[derive(Clone, Debug)]
pub struct LFunc {
    pub name: String,
    pub id: u64,
    pub kind: FuncKind,
    pub ret: Option<IrType>,
    pub param_types: Vec<IrType>,
    pub nslots: usize,
    pub blocks: Vec<LBlock>,
    pub loc: Option<SourceLoc>,
}

#[derive(Clone, Debug)]
pub struct Program {
    pub funcs: Vec<LFunc>,
    pub by_name: HashMap<String, usize>,
}

/// Identifier of the `index`-th function; also its address as a `ptr`.
pub fn function_id(index: usize) -> u64 {
    0x1000 + 16 * index as u64
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SignatureMismatch {
    pub name: String,
    pub expected: String,
}

pub fn lower(m: &Module) -> Result<Program, SignatureMismatch> {
    let by_name: HashMap<String, usize> = m.functions.iter().enumerate().map(|(i, f)| (f.name.clone(), i)).collect();
    let mut funcs = Vec::with_capacity(m.functions.len());
    for (fi, f) in m.functions.iter().enumerate() {
        let param_types = f.param_types();
        let mut lf = LFunc {
            name: f.name.clone(),
            id: function_id(fi),
            kind: FuncKind::Defined,
            ret: f.ret,
            param_types: param_types.clone(),
            nslots: 0,
            blocks: Vec::new(),
            loc: f.loc.clone(),
        };
        if f.is_external() {
            let b = resolve(&f.name);
            if let Some(b) = &b {
                let (params, ret) = b.signature();
                if params != param_types || ret != f.ret {
                    let ps: Vec<String> = params.iter().map(|t| t.to_string()).collect();
                    let r = ret.map_or("void".to_string(), |t| t.to_string());
                    return Err(SignatureMismatch { name: f.name.clone(), expected: format!("{r} ({})", ps.join(", ")) });
                }
            }
            lf.kind = FuncKind::External(b);
            funcs.push(lf);
            continue;
        }
        let mut slots: HashMap<&str, Slot> = HashMap::new();
        for p in &f.params {
            let n = slots.len() as Slot;
            slots.insert(&p.name, n);
        }
        for b in &f.blocks {
            for i in &b.insts {
                if let Some(r) = &i.result {
                    let n = slots.len() as Slot;
                    slots.insert(r, n);
                }
            }
        }
        let labels: HashMap<&str, usize> = f.blocks.iter().enumerate().map(|(i, b)| (b.label.as_str(), i)).collect();
        let operand = |v: &Value| -> Operand {
            match v {
                Value::Local(n) => Operand::Slot(slots[n.as_str()]),
                Value::Const(c) => Operand::Imm(Val::from_constant(c)),
                Value::FuncRef(n) => Operand::Imm(Val::S(function_id(by_name[n.as_str()]) as u128)),
            }
        };
        for b in &f.blocks {
            let mut lb = LBlock::default();
            for i in &b.insts {
                let dst = i.result.as_ref().map(|r| slots[r.as_str()]);
                let op = match &i.op {
                    Op::Phi { incoming, .. } => {
                        let incoming = incoming.iter().map(|(v, l)| (labels[l.as_str()], operand(v))).collect();
                        lb.phis.push(LPhi { dst: dst.unwrap(), incoming });
                        continue;
                    }
                    Op::Binary { op, ty, lhs, rhs } => LOp::Bin { op: *op, ty: *ty, a: operand(lhs), b: operand(rhs) },
                    Op::FNeg { ty, operand: o } => LOp::FNeg { ty: *ty, a: operand(o) },
                    Op::FCmp { pred, ty, lhs, rhs } => {
                        LOp::FCmp { pred: *pred, ty: *ty, a: operand(lhs), b: operand(rhs) }
                    }
                    Op::ICmp { pred, ty, lhs, rhs } => {
                        LOp::ICmp { pred: *pred, ty: *ty, a: operand(lhs), b: operand(rhs) }
                    }
                    Op::Cast { op, from, value, to } => LOp::Cast { op: *op, from: *from, to: *to, a: operand(value) },
                    Op::Select { cond, on_true, on_false, .. } => {
                        LOp::Select { c: operand(cond), a: operand(on_true), b: operand(on_false) }
                    }
                    Op::ExtractElement { ty, vector, index } => {
                        LOp::Extract { ty: *ty, v: operand(vector), idx: operand(index) }
                    }
                    Op::InsertElement { ty, vector, element, index } => {
                        LOp::Insert { ty: *ty, v: operand(vector), e: operand(element), idx: operand(index) }
                    }
                    Op::ShuffleVector { ty, lhs, rhs, mask } => {
                        LOp::Shuffle { ty: *ty, a: operand(lhs), b: operand(rhs), mask: mask.clone() }
                    }
                    Op::Load { ty, ptr } => LOp::Load { ty: *ty, p: operand(ptr) },
                    Op::Store { ty, value, ptr } => LOp::Store { ty: *ty, v: operand(value), p: operand(ptr) },
                    Op::Alloca { ty, count } => LOp::Alloca { ty: *ty, n: operand(count) },
                    Op::PtrAdd { ptr, offset } => LOp::PtrAdd { p: operand(ptr), o: operand(offset) },
                    Op::Call { callee, args, .. } => LOp::Call {
                        callee: by_name[callee.as_str()],
                        args: args.iter().map(|(_, v)| operand(v)).collect(),
                    },
                    Op::Br { target } => LOp::Br { target: labels[target.as_str()] },
                    Op::CondBr { cond, on_true, on_false } => LOp::CondBr {
                        c: operand(cond),
                        t: labels[on_true.as_str()],
                        f: labels[on_false.as_str()],
                    },
                    Op::Ret { value } => LOp::Ret { v: value.as_ref().map(|(_, v)| operand(v)) },
                    Op::Memcpy { dst, src, len } => LOp::Memcpy { d: operand(dst), s: operand(src), n: operand(len) },
                    Op::Memset { dst, byte, len } => LOp::Memset { d: operand(dst), b: operand(byte), n: operand(len) },
                    Op::Unreachable => LOp::Unreachable,
                };
                lb.insts.push(LInst { dst, op, loc: i.loc.clone() });
            }
            lf.blocks.push(lb);
        }
        lf.nslots = slots.len();
        funcs.push(lf);
    }
    Ok(Program { funcs, by_name })
}
