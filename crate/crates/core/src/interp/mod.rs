//! Reference interpreter: executes a module, instrumented or not, with the
//! shadow runtime attached.

mod builtins;
mod lower;
mod value;

use std::collections::BTreeMap;
use std::fmt;

pub use builtins::{application_builtins, resolve as resolve_builtin, Builtin, Hook, Lcg};
pub use lower::{function_id, lower, Program, SignatureMismatch};
pub use value::Val;

use lower::{FuncKind, LOp, Operand};
use value::{app_bits, app_float, int_bits, shadow_bits, shadow_scalar};

use crate::extended::math::{self, ShadowMath};
use crate::extended::{AppFloat, ShadowScalar, F128};
use crate::ir::{
    lane_mask, parse_scalar_literal, sign_extend, verify_module, BinOp, CastOp, Constant, Diagnostic, FPred, IrType,
    Module, ScalarType, SourceLoc,
};
use crate::runtime::{
    format_stack, CheckKind, CheckSite, Frame, Report, Runtime, RuntimeFlags, Stats, Suppression,
};

/// First address handed out by the allocator.
pub const ARENA_BASE: u64 = 0x10_0000;
const MAX_ALLOCATION: u64 = 1 << 32;
const MAX_DEPTH: usize = 50_000;

#[derive(Clone, Debug)]
pub struct RunConfig {
    pub flags: RuntimeFlags,
    pub suppressions: Vec<Suppression>,
    pub seed: u64,
    /// Traps once this many instructions have executed.
    pub max_steps: Option<u64>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig { flags: RuntimeFlags::default(), suppressions: Vec::new(), seed: 1, max_steps: None }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trap {
    pub message: String,
    pub stack: Vec<Frame>,
}

impl fmt::Display for Trap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "trap: {}", self.message)?;
        f.write_str(&format_stack(&self.stack))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Outcome {
    Returned(Option<Constant>),
    Exited(i32),
    /// Stopped by `halt_on_error` after the first warning.
    Halted,
    Trapped(Trap),
}

#[derive(Debug)]
pub struct RunResult {
    pub outcome: Outcome,
    /// Output of the `print_*` builtins.
    pub stdout: String,
    /// Shadow-memory dumps requested by the program.
    pub stderr: String,
    pub report: Report,
    pub stats: Stats,
    pub steps: u64,
}

impl RunResult {
    pub fn return_value(&self) -> Option<&Constant> {
        match &self.outcome {
            Outcome::Returned(v) => v.as_ref(),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum RunError {
    #[error("module does not verify ({} diagnostics)", .0.len())]
    Invalid(Vec<Diagnostic>),
    #[error("no function named '@{0}'")]
    NoEntry(String),
    #[error("'@{0}' is a declaration and cannot be run")]
    EntryIsDeclaration(String),
    #[error("'@{function}' takes {expected} arguments, {got} given")]
    ArgCount { function: String, expected: usize, got: usize },
    #[error("argument {index} of '@{function}' must be {expected}, got {got}")]
    ArgType { function: String, index: usize, expected: IrType, got: IrType },
    #[error("builtin '@{}' must be declared as {}", .0.name, .0.expected)]
    Builtin(SignatureMismatch),
}

/// Parses an entry argument written as `<type> <literal>` or `<type>:<literal>`.
pub fn parse_arg(text: &str) -> Option<Constant> {
    let (ty, lit) = text.trim().split_once([' ', ':'])?;
    let scalar = ScalarType::from_name(ty.trim())?;
    parse_scalar_literal(scalar, lit.trim()).map(|bits| Constant::scalar_bits(scalar, bits))
}

pub fn run(m: &Module, entry: &str, args: &[Constant], cfg: &RunConfig) -> Result<RunResult, RunError> {
    let diags = verify_module(m);
    if !diags.is_empty() {
        return Err(RunError::Invalid(diags));
    }
    let f = m.function(entry).ok_or_else(|| RunError::NoEntry(entry.to_string()))?;
    if f.is_external() {
        return Err(RunError::EntryIsDeclaration(entry.to_string()));
    }
    if f.params.len() != args.len() {
        return Err(RunError::ArgCount { function: entry.into(), expected: f.params.len(), got: args.len() });
    }
    for (i, (p, a)) in f.params.iter().zip(args).enumerate() {
        if p.ty != a.ty {
            return Err(RunError::ArgType { function: entry.into(), index: i, expected: p.ty, got: a.ty });
        }
    }
    let prog = lower(m).map_err(RunError::Builtin)?;
    let fi = prog.by_name[entry];
    let mut ex = Exec {
        prog: &prog,
        frames: Vec::new(),
        mem: Memory::default(),
        rt: Runtime::new(cfg.flags.clone(), cfg.suppressions.clone()),
        rng: Lcg::new(cfg.seed),
        stdout: String::new(),
        stderr: String::new(),
        steps: 0,
        max_steps: cfg.max_steps,
    };
    let mut act = Activation::new(&prog.funcs[fi], fi);
    for (i, a) in args.iter().enumerate() {
        act.slots[i] = Val::from_constant(a);
    }
    ex.frames.push(act);
    let outcome = match ex.run_loop() {
        Ok(v) => Outcome::Returned(v.map(|v| v.to_constant(prog.funcs[fi].ret.unwrap()))),
        Err(Stop::Exit(code)) => Outcome::Exited(code),
        Err(Stop::Halt) => Outcome::Halted,
        Err(Stop::Trap(message)) => Outcome::Trapped(Trap { message, stack: capture(&prog, &ex.frames) }),
    };
    Ok(RunResult {
        outcome,
        stdout: ex.stdout,
        stderr: ex.stderr,
        report: ex.rt.report,
        stats: ex.rt.stats,
        steps: ex.steps,
    })
}

/// Byte-addressed application memory. Addresses are never reused and
/// allocations are separated by a guard gap, so stray accesses trap.
#[derive(Debug)]
struct Memory {
    regions: BTreeMap<u64, Vec<u8>>,
    next: u64,
}

impl Default for Memory {
    fn default() -> Self {
        Memory { regions: BTreeMap::new(), next: ARENA_BASE }
    }
}

impl Memory {
    fn alloc(&mut self, size: u64) -> Result<u64, Stop> {
        if size > MAX_ALLOCATION {
            return Err(Stop::Trap(format!("allocation of {size} bytes exceeds the arena limit")));
        }
        let base = self.next;
        self.next = base + size.max(1).next_multiple_of(16) + 16;
        self.regions.insert(base, vec![0; size as usize]);
        Ok(base)
    }

    fn free(&mut self, base: u64) -> bool {
        self.regions.remove(&base).is_some()
    }

    fn locate(&self, addr: u64, len: u64) -> Result<(u64, usize), Stop> {
        let oob = || Stop::Trap(format!("out-of-bounds access of {len} bytes at 0x{addr:x}"));
        let (&base, data) = self.regions.range(..=addr).next_back().ok_or_else(oob)?;
        let off = addr - base;
        if off.checked_add(len).is_none_or(|end| end > data.len() as u64) {
            return Err(oob());
        }
        Ok((base, off as usize))
    }

    fn read(&self, addr: u64, len: u64) -> Result<&[u8], Stop> {
        let (base, off) = self.locate(addr, len)?;
        Ok(&self.regions[&base][off..off + len as usize])
    }

    fn write(&mut self, addr: u64, len: u64) -> Result<&mut [u8], Stop> {
        let (base, off) = self.locate(addr, len)?;
        Ok(&mut self.regions.get_mut(&base).unwrap()[off..off + len as usize])
    }
}

#[derive(Debug)]
enum Stop {
    Trap(String),
    Exit(i32),
    Halt,
}

#[derive(Debug)]
struct Activation {
    func: usize,
    block: usize,
    ip: usize,
    slots: Vec<Val>,
    allocas: Vec<u64>,
}

impl Activation {
    fn new(f: &lower::LFunc, func: usize) -> Activation {
        Activation { func, block: 0, ip: 0, slots: vec![Val::S(0); f.nslots], allocas: Vec::new() }
    }
}

/// Innermost-first stack with the location of each frame's active instruction.
fn capture(prog: &Program, frames: &[Activation]) -> Vec<Frame> {
    frames
        .iter()
        .rev()
        .map(|a| {
            let f = &prog.funcs[a.func];
            let loc = f.blocks.get(a.block).and_then(|b| b.insts.get(a.ip)).and_then(|i| i.loc.clone());
            Frame { function_id: f.id, function: f.name.clone(), loc }
        })
        .collect()
}

struct Exec<'p> {
    prog: &'p Program,
    frames: Vec<Activation>,
    mem: Memory,
    rt: Runtime,
    rng: Lcg,
    stdout: String,
    stderr: String,
    steps: u64,
    max_steps: Option<u64>,
}

fn trap<T>(msg: impl Into<String>) -> Result<T, Stop> {
    Err(Stop::Trap(msg.into()))
}

fn float_bin(op: BinOp, s: ScalarType, a: u128, b: u128) -> u128 {
    match s {
        ScalarType::F32 => {
            let (x, y) = (f32::from_bits(a as u32), f32::from_bits(b as u32));
            let r = match op {
                BinOp::FAdd => x + y,
                BinOp::FSub => x - y,
                BinOp::FMul => x * y,
                _ => x / y,
            };
            r.to_bits() as u128
        }
        ScalarType::F64 => {
            let (x, y) = (f64::from_bits(a as u64), f64::from_bits(b as u64));
            let r = match op {
                BinOp::FAdd => x + y,
                BinOp::FSub => x - y,
                BinOp::FMul => x * y,
                _ => x / y,
            };
            r.to_bits() as u128
        }
        _ => {
            let (x, y) = (F128::from_bits(a), F128::from_bits(b));
            let r = match op {
                BinOp::FAdd => x + y,
                BinOp::FSub => x - y,
                BinOp::FMul => x * y,
                _ => x / y,
            };
            r.to_bits()
        }
    }
}

fn float_cmp(s: ScalarType, a: u128, b: u128) -> Option<std::cmp::Ordering> {
    match s {
        ScalarType::F32 => f32::from_bits(a as u32).partial_cmp(&f32::from_bits(b as u32)),
        ScalarType::F64 => f64::from_bits(a as u64).partial_cmp(&f64::from_bits(b as u64)),
        _ => F128::from_bits(a).partial_cmp(&F128::from_bits(b)),
    }
}

fn to_f128(s: ScalarType, bits: u128) -> F128 {
    match s {
        ScalarType::F32 => F128::from_f32(f32::from_bits(bits as u32)),
        ScalarType::F64 => F128::from_f64(f64::from_bits(bits as u64)),
        _ => F128::from_bits(bits),
    }
}

fn float_convert(from: ScalarType, to: ScalarType, bits: u128) -> u128 {
    match (from, to) {
        (a, b) if a == b => bits,
        (ScalarType::F32, ScalarType::F64) => (f32::from_bits(bits as u32) as f64).to_bits() as u128,
        (ScalarType::F64, ScalarType::F32) => (f64::from_bits(bits as u64) as f32).to_bits() as u128,
        (_, ScalarType::F128) => to_f128(from, bits).to_bits(),
        (_, ScalarType::F64) => F128::from_bits(bits).to_f64().to_bits() as u128,
        _ => F128::from_bits(bits).to_f32().to_bits() as u128,
    }
}

fn int_to_float(from: ScalarType, to: ScalarType, bits: u128) -> u128 {
    let v = sign_extend(from, bits);
    match to {
        ScalarType::F32 => (v as f32).to_bits() as u128,
        ScalarType::F64 => (v as f64).to_bits() as u128,
        _ => F128::from_i64(v).to_bits(),
    }
}

fn float_to_int(from: ScalarType, to: ScalarType, bits: u128) -> u128 {
    let v = match from {
        ScalarType::F32 => f32::from_bits(bits as u32) as i64,
        ScalarType::F64 => f64::from_bits(bits as u64) as i64,
        _ => F128::from_bits(bits).to_i64(),
    };
    int_bits(to, v)
}

fn to_bytes(ty: IrType, v: &Val) -> Vec<u8> {
    let n = ty.scalar.size() as usize;
    let mut out = Vec::with_capacity(ty.size() as usize);
    for &lane in v.lanes() {
        out.extend_from_slice(&lane.to_le_bytes()[..n]);
    }
    out
}

fn from_bytes(ty: IrType, bytes: &[u8]) -> Val {
    let n = ty.scalar.size() as usize;
    let mask = lane_mask(ty.scalar);
    let lanes = bytes
        .chunks(n)
        .map(|c| {
            let mut b = [0u8; 16];
            b[..n].copy_from_slice(c);
            u128::from_le_bytes(b) & mask
        })
        .collect();
    Val::from_lanes(lanes)
}

impl<'p> Exec<'p> {
    fn get(&self, o: &Operand) -> Val {
        match o {
            Operand::Slot(s) => self.frames.last().unwrap().slots[*s as usize].clone(),
            Operand::Imm(v) => v.clone(),
        }
    }

    fn scalar(&self, o: &Operand) -> u128 {
        match o {
            Operand::Slot(s) => self.frames.last().unwrap().slots[*s as usize].scalar(),
            Operand::Imm(v) => v.scalar(),
        }
    }

    fn jump(&mut self, target: usize) {
        let prog = self.prog;
        let fr = self.frames.last().unwrap();
        let from = fr.block;
        let phis = &prog.funcs[fr.func].blocks[target].phis;
        if !phis.is_empty() {
            let vals: Vec<Val> = phis
                .iter()
                .map(|p| {
                    let (_, o) = p.incoming.iter().find(|(b, _)| *b == from).expect("verified phi");
                    self.get(o)
                })
                .collect();
            let fr = self.frames.last_mut().unwrap();
            for (p, v) in phis.iter().zip(vals) {
                fr.slots[p.dst as usize] = v;
            }
        }
        let fr = self.frames.last_mut().unwrap();
        fr.block = target;
        fr.ip = 0;
    }

    fn release(&mut self, act: Activation) {
        for a in act.allocas {
            self.mem.free(a);
            self.rt.memory.free(a);
        }
    }

    fn allocate(&mut self, size: u64) -> Result<u64, Stop> {
        let base = self.mem.alloc(size)?;
        self.rt.memory.allocate(base, size);
        Ok(base)
    }

    fn run_loop(&mut self) -> Result<Option<Val>, Stop> {
        let prog = self.prog;
        loop {
            let fr = self.frames.last().unwrap();
            let func = &prog.funcs[fr.func];
            let inst = &func.blocks[fr.block].insts[fr.ip];
            self.steps += 1;
            if self.max_steps.is_some_and(|m| self.steps > m) {
                return trap("step limit exceeded");
            }
            let result = match &inst.op {
                LOp::Br { target } => {
                    self.jump(*target);
                    continue;
                }
                LOp::CondBr { c, t, f } => {
                    let target = if self.scalar(c) & 1 == 1 { *t } else { *f };
                    self.jump(target);
                    continue;
                }
                LOp::Ret { v } => {
                    let val = v.as_ref().map(|o| self.get(o));
                    let done = self.frames.pop().unwrap();
                    self.release(done);
                    let Some(caller) = self.frames.last_mut() else {
                        return Ok(val);
                    };
                    let cf = &prog.funcs[caller.func];
                    if let Some(d) = cf.blocks[caller.block].insts[caller.ip].dst {
                        caller.slots[d as usize] = val.expect("verified return");
                    }
                    caller.ip += 1;
                    continue;
                }
                LOp::Call { callee, args } => {
                    let target = &prog.funcs[*callee];
                    match &target.kind {
                        FuncKind::Defined => {
                            if self.frames.len() >= MAX_DEPTH {
                                return trap("call stack overflow");
                            }
                            let mut act = Activation::new(target, *callee);
                            for (i, a) in args.iter().enumerate() {
                                act.slots[i] = self.get(a);
                            }
                            self.frames.push(act);
                            continue;
                        }
                        FuncKind::External(None) => {
                            return trap(format!("unknown external function '@{}'", target.name));
                        }
                        FuncKind::External(Some(b)) => {
                            let argv: Vec<Val> = args.iter().map(|a| self.get(a)).collect();
                            let r = self.builtin(b, *callee, &argv, inst.loc.as_ref())?;
                            if self.rt.report.halted {
                                return Err(Stop::Halt);
                            }
                            r
                        }
                    }
                }
                op => Some(self.eval(op)?),
            };
            let fr = self.frames.last_mut().unwrap();
            if let (Some(d), Some(v)) = (inst.dst, result) {
                fr.slots[d as usize] = v;
            }
            fr.ip += 1;
        }
    }

    fn eval(&mut self, op: &LOp) -> Result<Val, Stop> {
        Ok(match op {
            LOp::Bin { op, ty, a, b } => {
                let (x, y) = (self.get(a), self.get(b));
                let s = ty.scalar;
                if op.is_float() {
                    x.zip(&y, |a, b| float_bin(*op, s, a, b))
                } else {
                    if *op == BinOp::SDiv && y.lanes().contains(&0) {
                        return trap("integer division by zero");
                    }
                    x.zip(&y, |a, b| {
                        let (a, b) = (sign_extend(s, a), sign_extend(s, b));
                        let r = match op {
                            BinOp::Add => a.wrapping_add(b),
                            BinOp::Sub => a.wrapping_sub(b),
                            BinOp::Mul => a.wrapping_mul(b),
                            _ => a.wrapping_div(b),
                        };
                        int_bits(s, r)
                    })
                }
            }
            LOp::FNeg { ty, a } => {
                let sign = 1u128 << (ty.scalar.bit_width() - 1);
                self.get(a).map(|x| x ^ sign)
            }
            LOp::FCmp { pred, ty, a, b } => {
                let s = ty.scalar;
                self.get(a).zip(&self.get(b), |x, y| pred.eval(float_cmp(s, x, y)) as u128)
            }
            LOp::ICmp { pred, ty, a, b } => {
                let s = ty.scalar;
                self.get(a).zip(&self.get(b), |x, y| pred.eval(sign_extend(s, x), sign_extend(s, y)) as u128)
            }
            LOp::Cast { op, from, to, a } => {
                let v = self.get(a);
                let (fs, ts) = (from.scalar, to.scalar);
                match op {
                    CastOp::FpExt | CastOp::FpTrunc => v.map(|x| float_convert(fs, ts, x)),
                    CastOp::SiToFp => v.map(|x| int_to_float(fs, ts, x)),
                    CastOp::FpToSi => v.map(|x| float_to_int(fs, ts, x)),
                    CastOp::Bitcast => from_bytes(*to, &to_bytes(*from, &v)),
                }
            }
            LOp::Select { c, a, b } => {
                if self.scalar(c) & 1 == 1 {
                    self.get(a)
                } else {
                    self.get(b)
                }
            }
            LOp::Extract { ty, v, idx } => {
                let i = sign_extend(ScalarType::I32, self.scalar(idx));
                if i < 0 || i >= ty.lanes as i64 {
                    return trap(format!("extractelement index {i} out of range"));
                }
                Val::S(self.get(v).lanes()[i as usize])
            }
            LOp::Insert { ty, v, e, idx } => {
                let i = sign_extend(ScalarType::I32, self.scalar(idx));
                if i < 0 || i >= ty.lanes as i64 {
                    return trap(format!("insertelement index {i} out of range"));
                }
                let mut lanes = self.get(v).lanes().to_vec();
                lanes[i as usize] = self.scalar(e);
                Val::from_lanes(lanes)
            }
            LOp::Shuffle { a, b, mask, .. } => {
                let (x, y) = (self.get(a), self.get(b));
                let all: Vec<u128> = x.lanes().iter().chain(y.lanes()).copied().collect();
                let mut lanes = Vec::with_capacity(mask.len());
                for &m in mask {
                    match all.get(m as usize) {
                        Some(&l) => lanes.push(l),
                        None => return trap(format!("shufflevector index {m} out of range")),
                    }
                }
                Val::from_lanes(lanes)
            }
            LOp::Load { ty, p } => {
                let addr = self.scalar(p) as u64;
                let bytes = self.mem.read(addr, ty.size())?;
                let v = from_bytes(*ty, bytes);
                if ty.scalar == ScalarType::I1 {
                    v.map(|x| x & 1)
                } else {
                    v
                }
            }
            LOp::Store { ty, v, p } => {
                let addr = self.scalar(p) as u64;
                let bytes = to_bytes(*ty, &self.get(v));
                self.mem.write(addr, ty.size())?.copy_from_slice(&bytes);
                Val::S(0)
            }
            LOp::Alloca { ty, n } => {
                let count = self.get(n).as_i64(ScalarType::I64);
                if count < 0 {
                    return trap(format!("alloca with negative count {count}"));
                }
                let size = ty.size().saturating_mul(count as u64);
                let base = self.allocate(size)?;
                self.frames.last_mut().unwrap().allocas.push(base);
                Val::S(base as u128)
            }
            LOp::PtrAdd { p, o } => {
                let base = self.scalar(p) as u64;
                let off = self.get(o).as_i64(ScalarType::I64);
                Val::S(base.wrapping_add(off as u64) as u128)
            }
            LOp::Memcpy { d, s, n } => {
                let (dst, src) = (self.scalar(d) as u64, self.scalar(s) as u64);
                let len = self.get(n).as_i64(ScalarType::I64);
                if len < 0 {
                    return trap(format!("memcpy with negative length {len}"));
                }
                if len > 0 {
                    let buf = self.mem.read(src, len as u64)?.to_vec();
                    self.mem.write(dst, len as u64)?.copy_from_slice(&buf);
                }
                Val::S(0)
            }
            LOp::Memset { d, b, n } => {
                let dst = self.scalar(d) as u64;
                let byte = self.scalar(b) as u8;
                let len = self.get(n).as_i64(ScalarType::I64);
                if len < 0 {
                    return trap(format!("memset with negative length {len}"));
                }
                if len > 0 {
                    self.mem.write(dst, len as u64)?.fill(byte);
                }
                Val::S(0)
            }
            LOp::Unreachable => return trap("unreachable executed"),
            LOp::Br { .. } | LOp::CondBr { .. } | LOp::Ret { .. } | LOp::Call { .. } => {
                unreachable!("control flow is handled by the main loop")
            }
        })
    }

    fn builtin(&mut self, b: &Builtin, index: usize, args: &[Val], loc: Option<&SourceLoc>) -> Result<Option<Val>, Stop> {
        let prog = self.prog;
        let own_id = prog.funcs[index].id;
        Ok(match b {
            Builtin::Malloc => {
                let size = args[0].as_i64(ScalarType::I64);
                if size < 0 {
                    return trap(format!("malloc of negative size {size}"));
                }
                Some(Val::S(self.allocate(size as u64)? as u128))
            }
            Builtin::Free => {
                let p = args[0].as_u64();
                if p != 0 {
                    if !self.mem.free(p) {
                        return trap(format!("invalid free of 0x{p:x}"));
                    }
                    self.rt.memory.free(p);
                }
                None
            }
            Builtin::Print(s) => {
                let bits = args[0].scalar();
                let text = match s {
                    ScalarType::F32 => format!("{:?}", f32::from_bits(bits as u32)),
                    ScalarType::F64 => format!("{:?}", f64::from_bits(bits as u64)),
                    _ => sign_extend(*s, bits).to_string(),
                };
                self.stdout.push_str(&text);
                self.stdout.push('\n');
                None
            }
            Builtin::Exit => return Err(Stop::Exit(args[0].as_i64(ScalarType::I32) as i32)),
            Builtin::RandUniform(k) => Some(Val::S(match k {
                crate::extended::FloatKind::F32 => self.rng.next_f32().to_bits() as u128,
                crate::extended::FloatKind::F64 => self.rng.next_f64().to_bits() as u128,
            })),
            Builtin::Math(f) => {
                let s = match f.kind {
                    crate::extended::FloatKind::F32 => ScalarType::F32,
                    crate::extended::FloatKind::F64 => ScalarType::F64,
                };
                let app: Vec<AppFloat> = args.iter().map(|a| app_float(s, a.scalar())).collect();
                Some(Val::S(app_bits(math::eval_app(*f, &app))))
            }
            Builtin::ExplicitCheck(k) => {
                if self.rt.stack.tag_is(own_id) {
                    let s = self.rt.stack.get(0).and_then(|l| l.first().copied());
                    self.rt.stack.end();
                    if let Some(s) = s {
                        let scalar = if *k == crate::extended::FloatKind::F32 { ScalarType::F32 } else { ScalarType::F64 };
                        let v = app_float(scalar, args[0].scalar());
                        let site = CheckSite { kind: CheckKind::Explicit, loc, address: None, lane: None };
                        let frames = &self.frames;
                        self.rt.check_value(site, v, s, &mut || capture(prog, frames));
                    }
                }
                None
            }
            Builtin::Resume(_) => {
                if self.rt.stack.tag_is(own_id) {
                    self.rt.stack.end();
                }
                self.rt.record_resume();
                Some(args[0].clone())
            }
            Builtin::DumpShadowMem => {
                let (p, n) = (args[0].as_u64(), args[1].as_i64(ScalarType::I64));
                match self.rt.memory.dump(p, n.max(0) as u64) {
                    Ok(text) => self.stderr.push_str(&text),
                    Err(e) => return trap(e.to_string()),
                }
                None
            }
            Builtin::Hook(h) => self.hook(h, args, loc)?,
        })
    }

    fn hook(&mut self, h: &Hook, args: &[Val], loc: Option<&SourceLoc>) -> Result<Option<Val>, Stop> {
        let prog = self.prog;
        let shadow_lanes = |ty: IrType, v: &Val| -> Vec<ShadowScalar> {
            v.lanes().iter().map(|&b| shadow_scalar(ty.scalar, b)).collect()
        };
        let encode = |ty: IrType, lanes: &[ShadowScalar]| -> Val {
            let kind = ty.scalar.app_float().unwrap();
            if lanes.len() == ty.lanes as usize {
                Val::from_lanes(lanes.iter().map(|&s| shadow_bits(s, kind)).collect())
            } else {
                Val::from_lanes(vec![0; ty.lanes as usize])
            }
        };
        let unallocated = |e: crate::runtime::Unallocated| Stop::Trap(format!("shadow {e}"));
        Ok(match h {
            Hook::Check(s) => {
                let v = app_float(*s, args[0].scalar());
                let sh = shadow_scalar(*s, args[1].scalar());
                let Some(kind) = CheckKind::from_code(args[2].as_i64(ScalarType::I32)) else {
                    return trap("invalid check kind");
                };
                let addr = args[3].as_u64();
                let lane = args[4].as_i64(ScalarType::I32);
                let site = CheckSite {
                    kind,
                    loc,
                    address: (addr != 0).then_some(addr),
                    lane: (lane >= 0).then_some(lane as u32),
                };
                let frames = &self.frames;
                let outcome = self.rt.check_value(site, v, sh, &mut || capture(prog, frames));
                if outcome.resume_value() {
                    Some(Val::S(shadow_bits(ShadowScalar::extend(v), v.kind())))
                } else {
                    Some(args[1].clone())
                }
            }
            Hook::ShadowLoad { ty, checked } => {
                let base = args[0].as_u64();
                let size = ty.scalar.size();
                let saved = self.rt.flags.check_loads;
                self.rt.flags.check_loads |= *checked;
                let mut out = Vec::with_capacity(ty.lanes as usize);
                let mut failure = None;
                for (i, &bits) in args[1].lanes().iter().enumerate() {
                    let app = app_float(ty.scalar, bits);
                    let frames = &self.frames;
                    match self.rt.shadow_load(base + i as u64 * size, app, loc, &mut || capture(prog, frames)) {
                        Ok((s, _)) => out.push(s),
                        Err(e) => {
                            failure = Some(e);
                            break;
                        }
                    }
                }
                self.rt.flags.check_loads = saved;
                if let Some(e) = failure {
                    return Err(unallocated(e));
                }
                Some(encode(*ty, &out))
            }
            Hook::ShadowStore(ty) => {
                let base = args[0].as_u64();
                let size = ty.scalar.size();
                for (i, s) in shadow_lanes(*ty, &args[1]).into_iter().enumerate() {
                    self.rt.memory.store(base + i as u64 * size, s).map_err(unallocated)?;
                }
                None
            }
            Hook::SetUnknown => {
                let len = args[1].as_i64(ScalarType::I64);
                if len > 0 {
                    self.rt.memory.set_unknown(args[0].as_u64(), len as u64).map_err(unallocated)?;
                }
                None
            }
            Hook::CopyShadow => {
                let len = args[2].as_i64(ScalarType::I64);
                if len > 0 {
                    self.rt.memory.copy(args[0].as_u64(), args[1].as_u64(), len as u64).map_err(unallocated)?;
                }
                None
            }
            Hook::BeginArgs => {
                self.rt.stack.begin(args[0].as_u64());
                None
            }
            Hook::PushArg(ty) => {
                self.rt.stack.push(shadow_lanes(*ty, &args[0]));
                None
            }
            Hook::ArgsTagIs => {
                let ok = self.rt.stack.tag_is(args[0].as_u64());
                if ok {
                    self.rt.stats.args_from_stack += 1;
                } else {
                    self.rt.stats.args_extended += 1;
                }
                Some(Val::S(ok as u128))
            }
            Hook::GetArg(ty) => {
                let i = args[0].as_i64(ScalarType::I64);
                let lanes = usize::try_from(i).ok().and_then(|i| self.rt.stack.get(i)).unwrap_or(&[]);
                Some(encode(*ty, lanes))
            }
            Hook::EndArgs => {
                self.rt.stack.end();
                None
            }
            Hook::SetRet(ty) => {
                self.rt.ret_slot.set(args[0].as_u64(), shadow_lanes(*ty, &args[1]));
                None
            }
            Hook::RetTagIs => {
                let ok = self.rt.ret_slot.take_tag(args[0].as_u64());
                if ok {
                    self.rt.stats.rets_from_slot += 1;
                } else {
                    self.rt.stats.rets_extended += 1;
                }
                Some(Val::S(ok as u128))
            }
            Hook::GetRet(ty) => Some(encode(*ty, self.rt.ret_slot.value())),
            Hook::FcmpFail(ty) => {
                let Some(pred) = FPred::from_code(args[0].scalar() as u32) else {
                    return trap("invalid fcmp predicate");
                };
                let s = ty.scalar;
                let (a, b) = (app_float(s, args[1].scalar()), app_float(s, args[2].scalar()));
                let (sa, sb) = (shadow_scalar(s, args[3].scalar()), shadow_scalar(s, args[4].scalar()));
                let frames = &self.frames;
                self.rt.check_fcmp(pred, a, b, sa, sb, loc, &mut || capture(prog, frames));
                None
            }
            Hook::Math(name) => {
                let f = math::lookup(name).expect("resolved math hook");
                let s = match f.kind {
                    crate::extended::FloatKind::F32 => ScalarType::F32,
                    crate::extended::FloatKind::F64 => ScalarType::F64,
                };
                let n = f.op.arity();
                let shadows: Vec<ShadowScalar> = args[..n].iter().map(|a| shadow_scalar(s, a.scalar())).collect();
                let app = app_float(s, args[n].scalar());
                let r = math::shadow_math(name, &shadows, app).expect("registered function");
                if matches!(r, ShadowMath::Resumed(_)) {
                    self.rt.record_resume();
                }
                Some(Val::S(shadow_bits(r.value(), f.kind)))
            }
            Hook::ExtendResumed(ty) => {
                self.rt.record_resume();
                let kind = ty.scalar.app_float().unwrap();
                Some(args[0].map(|b| shadow_bits(ShadowScalar::extend(app_float(ty.scalar, b)), kind)))
            }
        })
    }
}

#[cfg(test)]
mod tests;
