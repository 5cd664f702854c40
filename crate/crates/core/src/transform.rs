//! The instrumentation pass.
//!
//! Every floating-point value `%x` of type f32/f64 (or a vector of them) in
//! an instrumented function gets a twin `%s_x` one precision level up.
//! Shadows cross memory and call boundaries through runtime hooks named
//! `__nsan_*`; see `docs/hooks.md` for the full list.

use std::collections::{HashMap, HashSet};

use crate::extended::{math, F128};
use crate::ir::{
    shadow_type_of, verify_module, Block, CastOp, Constant, Diagnostic, Function, Instruction, IrType, Module,
    Op, ScalarType, SourceLoc, Value,
};
use crate::runtime::CheckKind;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct InstrumentConfig {
    pub check_stores: bool,
    pub check_ret: bool,
    pub check_args: bool,
    pub check_fcmp: bool,
    pub check_loads: bool,
}

impl Default for InstrumentConfig {
    fn default() -> Self {
        InstrumentConfig { check_stores: true, check_ret: true, check_args: true, check_fcmp: true, check_loads: false }
    }
}

impl InstrumentConfig {
    pub fn any_checks(&self) -> bool {
        self.check_stores || self.check_ret || self.check_args || self.check_fcmp || self.check_loads
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TransformError {
    #[error("module is already instrumented")]
    AlreadyInstrumented,
    #[error("module does not verify:{}", fmt_diags(.0))]
    Invalid(Vec<Diagnostic>),
    #[error("'@{0}' is declared with a signature that conflicts with the runtime hook")]
    HookConflict(String),
    #[error("in @{function}: value '%{value}' has {count} shadow definitions")]
    Audit { function: String, value: String, count: usize },
    #[error("instrumented module does not verify:{}", fmt_diags(.0))]
    Internal(Vec<Diagnostic>),
}

fn fmt_diags(d: &[Diagnostic]) -> String {
    d.iter().map(|d| format!("\n  {d}")).collect()
}

/// Prefix of all runtime entry points; calls to these never get argument checks.
pub const HOOK_PREFIX: &str = "__nsan_";

/// Name of the per-lane check hook for a scalar application type.
pub fn check_hook(t: ScalarType) -> String {
    format!("{HOOK_PREFIX}check_{}", t.name())
}

struct Hooks<'m> {
    module: &'m Module,
    added: Vec<Function>,
    seen: HashSet<String>,
}

impl<'m> Hooks<'m> {
    fn declare(&mut self, name: String, params: Vec<IrType>, ret: Option<IrType>) -> Result<String, TransformError> {
        if self.seen.contains(&name) {
            return Ok(name);
        }
        if let Some(existing) = self.module.function(&name) {
            if existing.param_types() != params || existing.ret != ret || !existing.is_external() {
                return Err(TransformError::HookConflict(name));
            }
        } else {
            self.added.push(Function::declaration(name.clone(), params, ret));
        }
        self.seen.insert(name.clone());
        Ok(name)
    }
}

pub fn instrument_module(m: &Module, cfg: &InstrumentConfig) -> Result<Module, TransformError> {
    if m.instrumented {
        return Err(TransformError::AlreadyInstrumented);
    }
    let diags = verify_module(m);
    if !diags.is_empty() {
        return Err(TransformError::Invalid(diags));
    }
    let mut hooks = Hooks { module: m, added: Vec::new(), seen: HashSet::new() };
    let mut out = Module { functions: Vec::new(), instrumented: true };
    for f in &m.functions {
        if f.is_external() || f.is_noinstrument() {
            out.functions.push(f.clone());
            continue;
        }
        let nf = FnPass::new(m, f, cfg, &mut hooks).run()?;
        audit(f, &nf)?;
        out.functions.push(nf);
    }
    out.functions.extend(hooks.added);
    let diags = verify_module(&out);
    if !diags.is_empty() {
        return Err(TransformError::Internal(diags));
    }
    Ok(out)
}

/// Every shadowed SSA value of the original function must have exactly one
/// shadow definition in the instrumented one.
fn audit(orig: &Function, inst: &Function) -> Result<(), TransformError> {
    let mut defs: HashMap<&str, usize> = HashMap::new();
    for p in &inst.params {
        *defs.entry(&p.name).or_default() += 1;
    }
    for b in &inst.blocks {
        for i in &b.insts {
            if let Some(r) = &i.result {
                *defs.entry(r).or_default() += 1;
            }
        }
    }
    let mut fp_values: Vec<(&str, IrType)> = orig.params.iter().map(|p| (p.name.as_str(), p.ty)).collect();
    for b in &orig.blocks {
        for i in &b.insts {
            if let (Some(r), Some(t)) = (&i.result, i.op.result_type()) {
                fp_values.push((r, t));
            }
        }
    }
    let twins = shadow_names(orig);
    for (name, ty) in fp_values {
        if !ty.is_shadowed() {
            continue;
        }
        let count = twins.get(name).map_or(0, |s| defs.get(s.as_str()).copied().unwrap_or(0));
        if count != 1 {
            return Err(TransformError::Audit { function: orig.name.clone(), value: name.to_string(), count });
        }
    }
    Ok(())
}

/// Deterministic shadow names: `s_<name>`, suffixed until unique.
fn shadow_names(f: &Function) -> HashMap<String, String> {
    let mut used: HashSet<String> = f.params.iter().map(|p| p.name.clone()).collect();
    let mut fp: Vec<String> = f.params.iter().filter(|p| p.ty.is_shadowed()).map(|p| p.name.clone()).collect();
    for b in &f.blocks {
        for i in &b.insts {
            if let Some(r) = &i.result {
                used.insert(r.clone());
                if i.op.result_type().is_some_and(|t| t.is_shadowed()) {
                    fp.push(r.clone());
                }
            }
        }
    }
    let mut out = HashMap::new();
    for n in fp {
        let mut cand = format!("s_{n}");
        let mut k = 1;
        while used.contains(&cand) {
            cand = format!("s_{n}.{k}");
            k += 1;
        }
        used.insert(cand.clone());
        out.insert(n, cand);
    }
    out
}

fn shadow_constant(c: &Constant) -> Constant {
    let st = shadow_type_of(c.ty).expect("shadowed constant");
    let lanes = c
        .lanes
        .iter()
        .map(|&b| match c.ty.scalar {
            ScalarType::F32 => (f32::from_bits(b as u32) as f64).to_bits() as u128,
            _ => F128::from_f64(f64::from_bits(b as u64)).to_bits(),
        })
        .collect();
    Constant { ty: st, lanes }
}

fn i32c(v: i64) -> Value {
    Value::Const(Constant::int(ScalarType::I32, v))
}

fn i64c(v: i64) -> Value {
    Value::Const(Constant::int(ScalarType::I64, v))
}

struct FnPass<'a, 'm> {
    module: &'m Module,
    f: &'a Function,
    cfg: &'a InstrumentConfig,
    hooks: &'a mut Hooks<'m>,
    shadows: HashMap<String, String>,
    used: HashSet<String>,
    labels: HashSet<String>,
    blocks: Vec<Block>,
    label_map: HashMap<String, String>,
    counter: usize,
}

impl<'a, 'm> FnPass<'a, 'm> {
    fn new(module: &'m Module, f: &'a Function, cfg: &'a InstrumentConfig, hooks: &'a mut Hooks<'m>) -> Self {
        let shadows = shadow_names(f);
        let mut used: HashSet<String> = f.params.iter().map(|p| p.name.clone()).collect();
        used.extend(f.blocks.iter().flat_map(|b| b.insts.iter().filter_map(|i| i.result.clone())));
        used.extend(shadows.values().cloned());
        let labels = f.blocks.iter().map(|b| b.label.clone()).collect();
        FnPass {
            module,
            f,
            cfg,
            hooks,
            shadows,
            used,
            labels,
            blocks: Vec::new(),
            label_map: HashMap::new(),
            counter: 0,
        }
    }

    fn fresh(&mut self, prefix: &str) -> String {
        loop {
            self.counter += 1;
            let cand = format!("nsan.{prefix}{}", self.counter);
            if self.used.insert(cand.clone()) {
                return cand;
            }
        }
    }

    fn fresh_label(&mut self, base: &str, what: &str) -> String {
        let mut k = 0;
        loop {
            let cand = if k == 0 { format!("{base}.{what}") } else { format!("{base}.{what}{k}") };
            if self.labels.insert(cand.clone()) {
                return cand;
            }
            k += 1;
        }
    }

    fn cur(&mut self) -> &mut Block {
        self.blocks.last_mut().unwrap()
    }

    fn emit(&mut self, result: Option<String>, op: Op, loc: Option<&SourceLoc>) {
        let inst = Instruction { result, op, loc: loc.cloned() };
        self.cur().insts.push(inst);
    }

    fn emit_value(&mut self, prefix: &str, op: Op, loc: Option<&SourceLoc>) -> Value {
        let name = self.fresh(prefix);
        self.emit(Some(name.clone()), op, loc);
        Value::Local(name)
    }

    fn call_hook(
        &mut self,
        name: String,
        args: Vec<(IrType, Value)>,
        ret: Option<IrType>,
        loc: Option<&SourceLoc>,
    ) -> Result<Option<Value>, TransformError> {
        let callee = self.hooks.declare(name, args.iter().map(|a| a.0).collect(), ret)?;
        let op = Op::Call { ret, callee, args };
        Ok(match ret {
            Some(_) => Some(self.emit_value("h", op, loc)),
            None => {
                self.emit(None, op, loc);
                None
            }
        })
    }

    fn shadow_of(&self, v: &Value) -> Value {
        match v {
            Value::Local(n) => Value::Local(self.shadows[n].clone()),
            Value::Const(c) => Value::Const(shadow_constant(c)),
            Value::FuncRef(_) => unreachable!("function references are not floating point"),
        }
    }

    fn shadow_name(&self, result: &Option<String>) -> Option<String> {
        result.as_ref().and_then(|r| self.shadows.get(r).cloned())
    }

    fn self_ref(&self) -> Value {
        Value::FuncRef(self.f.name.clone())
    }

    fn run(mut self) -> Result<Function, TransformError> {
        let f = self.f;
        for (bi, b) in f.blocks.iter().enumerate() {
            self.blocks.push(Block::new(b.label.clone()));
            if bi == 0 {
                self.prologue()?;
            }
            for inst in &b.insts {
                self.instruction(inst)?;
            }
            let last = self.blocks.last().unwrap().label.clone();
            self.label_map.insert(b.label.clone(), last);
        }
        for b in &mut self.blocks {
            for i in &mut b.insts {
                if let Op::Phi { incoming, .. } = &mut i.op {
                    for (_, l) in incoming.iter_mut() {
                        if let Some(m) = self.label_map.get(l.as_str()) {
                            *l = m.clone();
                        }
                    }
                }
            }
        }
        Ok(Function {
            name: f.name.clone(),
            params: f.params.clone(),
            ret: f.ret,
            blocks: self.blocks,
            attrs: f.attrs.clone(),
            loc: f.loc.clone(),
        })
    }

    /// Reads argument shadows from the shadow stack if it is tagged with
    /// this function, otherwise extends the application arguments.
    fn prologue(&mut self) -> Result<(), TransformError> {
        let fp: Vec<(String, IrType)> =
            self.f.params.iter().filter(|p| p.ty.is_shadowed()).map(|p| (p.name.clone(), p.ty)).collect();
        if fp.is_empty() {
            return Ok(());
        }
        let loc = self.f.loc.clone();
        let loc = loc.as_ref();
        let me = self.self_ref();
        let ok = self
            .call_hook(format!("{HOOK_PREFIX}args_tag_is"), vec![(IrType::PTR, me)], Some(IrType::I1), loc)?
            .unwrap();
        for (j, (name, ty)) in fp.into_iter().enumerate() {
            let st = shadow_type_of(ty).unwrap();
            let got = self
                .call_hook(format!("{HOOK_PREFIX}get_arg_{}", ty.mangle()), vec![(IrType::I64, i64c(j as i64))], Some(st), loc)?
                .unwrap();
            let ext = self.emit_value(
                "ext",
                Op::Cast { op: CastOp::FpExt, from: ty, value: Value::Local(name.clone()), to: st },
                loc,
            );
            let s = self.shadows[&name].clone();
            self.emit(Some(s), Op::Select { cond: ok.clone(), ty: st, on_true: got, on_false: ext }, loc);
        }
        self.call_hook(format!("{HOOK_PREFIX}end_args"), vec![], None, loc)?;
        Ok(())
    }

    /// Emits a consistency check of `v` against `s` and returns the shadow to
    /// use afterwards (the runtime may resume it from `v`).
    fn check(
        &mut self,
        ty: IrType,
        v: &Value,
        s: Value,
        kind: CheckKind,
        addr: Value,
        loc: Option<&SourceLoc>,
    ) -> Result<Value, TransformError> {
        if matches!(v, Value::Const(_)) {
            return Ok(s);
        }
        let st = shadow_type_of(ty).unwrap();
        let lane_t = IrType::scalar(ty.scalar);
        let lane_st = IrType::scalar(st.scalar);
        let hook = check_hook(ty.scalar);
        let kind_v = i32c(kind.code());
        if !ty.is_vector() {
            let args = vec![(ty, v.clone()), (st, s), (IrType::I32, kind_v), (IrType::PTR, addr), (IrType::I32, i32c(-1))];
            return Ok(self.call_hook(hook, args, Some(st), loc)?.unwrap());
        }
        let mut acc = s.clone();
        for lane in 0..ty.lanes {
            let idx = i32c(lane as i64);
            let vl = self.emit_value("lane", Op::ExtractElement { ty, vector: v.clone(), index: idx.clone() }, loc);
            let sl = self.emit_value("lane", Op::ExtractElement { ty: st, vector: s.clone(), index: idx.clone() }, loc);
            let lane_addr = match &addr {
                Value::Const(_) => addr.clone(),
                a => self.emit_value(
                    "addr",
                    Op::PtrAdd { ptr: a.clone(), offset: i64c((lane as u64 * ty.scalar.size()) as i64) },
                    loc,
                ),
            };
            let args = vec![
                (lane_t, vl),
                (lane_st, sl),
                (IrType::I32, kind_v.clone()),
                (IrType::PTR, lane_addr),
                (IrType::I32, idx.clone()),
            ];
            let r = self.call_hook(hook.clone(), args, Some(lane_st), loc)?.unwrap();
            acc = self.emit_value("sv", Op::InsertElement { ty: st, vector: acc, element: r, index: idx }, loc);
        }
        Ok(acc)
    }

    fn instruction(&mut self, inst: &Instruction) -> Result<(), TransformError> {
        let loc = inst.loc.as_ref();
        let twin = self.shadow_name(&inst.result);
        match &inst.op {
            Op::Binary { op, ty, lhs, rhs } if op.is_float() && ty.is_shadowed() => {
                self.emit(inst.result.clone(), inst.op.clone(), loc);
                let st = shadow_type_of(*ty).unwrap();
                let (sl, sr) = (self.shadow_of(lhs), self.shadow_of(rhs));
                self.emit(twin, Op::Binary { op: *op, ty: st, lhs: sl, rhs: sr }, loc);
            }
            Op::FNeg { ty, operand } if ty.is_shadowed() => {
                self.emit(inst.result.clone(), inst.op.clone(), loc);
                let st = shadow_type_of(*ty).unwrap();
                let so = self.shadow_of(operand);
                self.emit(twin, Op::FNeg { ty: st, operand: so }, loc);
            }
            Op::FCmp { pred, ty, lhs, rhs } if ty.is_shadowed() && self.cfg.check_fcmp => {
                self.emit(inst.result.clone(), inst.op.clone(), loc);
                let st = shadow_type_of(*ty).unwrap();
                let (sl, sr) = (self.shadow_of(lhs), self.shadow_of(rhs));
                let sc = self.emit_value(
                    "fcmp",
                    Op::FCmp { pred: *pred, ty: st, lhs: sl.clone(), rhs: sr.clone() },
                    loc,
                );
                let app = Value::Local(inst.result.clone().unwrap());
                let differ = self.emit_value(
                    "fcmp.diff",
                    Op::ICmp { pred: crate::ir::IPred::Ne, ty: IrType::I1, lhs: app, rhs: sc },
                    loc,
                );
                let base = self.blocks.last().unwrap().label.clone();
                let fail = self.fresh_label(&base, "fcmp.fail");
                let ok = self.fresh_label(&base, "fcmp.ok");
                self.emit(None, Op::CondBr { cond: differ, on_true: fail.clone(), on_false: ok.clone() }, loc);
                self.blocks.push(Block::new(fail));
                let args = vec![
                    (IrType::I32, i32c(pred.code() as i64)),
                    (*ty, lhs.clone()),
                    (*ty, rhs.clone()),
                    (st, sl),
                    (st, sr),
                ];
                self.call_hook(format!("{HOOK_PREFIX}fcmp_fail_{}", ty.mangle()), args, None, loc)?;
                self.emit(None, Op::Br { target: ok.clone() }, loc);
                self.blocks.push(Block::new(ok));
            }
            Op::Cast { op, from, value, to } => {
                self.emit(inst.result.clone(), inst.op.clone(), loc);
                if !to.is_shadowed() {
                    return Ok(());
                }
                let st = shadow_type_of(*to).unwrap();
                let result = Value::Local(inst.result.clone().unwrap());
                match op {
                    CastOp::FpExt | CastOp::FpTrunc if from.is_shadowed() => {
                        let sf = shadow_type_of(*from).unwrap();
                        let sv = self.shadow_of(value);
                        let sop = if sf.scalar.size() < st.scalar.size() {
                            CastOp::FpExt
                        } else {
                            CastOp::FpTrunc
                        };
                        self.emit(twin, Op::Cast { op: sop, from: sf, value: sv, to: st }, loc);
                    }
                    CastOp::SiToFp => {
                        self.emit(twin, Op::Cast { op: CastOp::SiToFp, from: *from, value: value.clone(), to: st }, loc);
                    }
                    CastOp::Bitcast => {
                        let h = format!("{HOOK_PREFIX}extend_resumed_{}", to.mangle());
                        let args = vec![(*to, result)];
                        let callee = self.hooks.declare(h, vec![*to], Some(st))?;
                        self.emit(twin, Op::Call { ret: Some(st), callee, args }, loc);
                    }
                    _ => {
                        self.emit(twin, Op::Cast { op: CastOp::FpExt, from: *to, value: result, to: st }, loc);
                    }
                }
            }
            Op::Select { cond, ty, on_true, on_false } if ty.is_shadowed() => {
                self.emit(inst.result.clone(), inst.op.clone(), loc);
                let st = shadow_type_of(*ty).unwrap();
                let (a, b) = (self.shadow_of(on_true), self.shadow_of(on_false));
                self.emit(twin, Op::Select { cond: cond.clone(), ty: st, on_true: a, on_false: b }, loc);
            }
            Op::ExtractElement { ty, vector, index } if ty.is_shadowed() => {
                self.emit(inst.result.clone(), inst.op.clone(), loc);
                let st = shadow_type_of(*ty).unwrap();
                let sv = self.shadow_of(vector);
                self.emit(twin, Op::ExtractElement { ty: st, vector: sv, index: index.clone() }, loc);
            }
            Op::InsertElement { ty, vector, element, index } if ty.is_shadowed() => {
                self.emit(inst.result.clone(), inst.op.clone(), loc);
                let st = shadow_type_of(*ty).unwrap();
                let (sv, se) = (self.shadow_of(vector), self.shadow_of(element));
                self.emit(twin, Op::InsertElement { ty: st, vector: sv, element: se, index: index.clone() }, loc);
            }
            Op::ShuffleVector { ty, lhs, rhs, mask } if ty.is_shadowed() => {
                self.emit(inst.result.clone(), inst.op.clone(), loc);
                let st = shadow_type_of(*ty).unwrap();
                let (a, b) = (self.shadow_of(lhs), self.shadow_of(rhs));
                self.emit(twin, Op::ShuffleVector { ty: st, lhs: a, rhs: b, mask: mask.clone() }, loc);
            }
            Op::Phi { ty, incoming } if ty.is_shadowed() => {
                self.emit(inst.result.clone(), inst.op.clone(), loc);
                let st = shadow_type_of(*ty).unwrap();
                let inc = incoming.iter().map(|(v, l)| (self.shadow_of(v), l.clone())).collect();
                self.emit(twin, Op::Phi { ty: st, incoming: inc }, loc);
            }
            Op::Load { ty, ptr } if ty.is_shadowed() => {
                self.emit(inst.result.clone(), inst.op.clone(), loc);
                let st = shadow_type_of(*ty).unwrap();
                let checked = if self.cfg.check_loads { "checked_" } else { "" };
                let h = format!("{HOOK_PREFIX}shadow_load_{checked}{}", ty.mangle());
                let result = Value::Local(inst.result.clone().unwrap());
                let args = vec![(IrType::PTR, ptr.clone()), (*ty, result)];
                let callee = self.hooks.declare(h, args.iter().map(|a| a.0).collect(), Some(st))?;
                self.emit(twin, Op::Call { ret: Some(st), callee, args }, loc);
            }
            Op::Store { ty, value, ptr } if ty.is_shadowed() => {
                let mut s = self.shadow_of(value);
                if self.cfg.check_stores {
                    s = self.check(*ty, value, s, CheckKind::Store, ptr.clone(), loc)?;
                }
                self.emit(None, inst.op.clone(), loc);
                let st = shadow_type_of(*ty).unwrap();
                let h = format!("{HOOK_PREFIX}shadow_store_{}", ty.mangle());
                self.call_hook(h, vec![(IrType::PTR, ptr.clone()), (st, s)], None, loc)?;
            }
            Op::Store { ty, ptr, .. } => {
                self.emit(None, inst.op.clone(), loc);
                let h = format!("{HOOK_PREFIX}set_unknown");
                self.call_hook(h, vec![(IrType::PTR, ptr.clone()), (IrType::I64, i64c(ty.size() as i64))], None, loc)?;
            }
            Op::Memcpy { dst, src, len } => {
                self.emit(None, inst.op.clone(), loc);
                let h = format!("{HOOK_PREFIX}copy_shadow");
                let args = vec![(IrType::PTR, dst.clone()), (IrType::PTR, src.clone()), (IrType::I64, len.clone())];
                self.call_hook(h, args, None, loc)?;
            }
            Op::Memset { dst, len, .. } => {
                self.emit(None, inst.op.clone(), loc);
                let h = format!("{HOOK_PREFIX}set_unknown");
                self.call_hook(h, vec![(IrType::PTR, dst.clone()), (IrType::I64, len.clone())], None, loc)?;
            }
            Op::Call { ret, callee, args } => self.call(inst, *ret, callee, args)?,
            Op::Ret { value: Some((ty, v)) } if ty.is_shadowed() => {
                let mut s = self.shadow_of(v);
                if self.cfg.check_ret {
                    s = self.check(*ty, v, s, CheckKind::Ret, Value::Const(Constant::null()), loc)?;
                }
                let st = shadow_type_of(*ty).unwrap();
                let me = self.self_ref();
                self.call_hook(format!("{HOOK_PREFIX}set_ret_{}", ty.mangle()), vec![(IrType::PTR, me), (st, s)], None, loc)?;
                self.emit(None, inst.op.clone(), loc);
            }
            _ => {
                self.emit(inst.result.clone(), inst.op.clone(), loc);
            }
        }
        Ok(())
    }

    fn call(
        &mut self,
        inst: &Instruction,
        ret: Option<IrType>,
        callee: &str,
        args: &[(IrType, Value)],
    ) -> Result<(), TransformError> {
        let loc = inst.loc.as_ref();
        let target = self.module.function(callee).expect("verified call target");
        let ret_shadowed = ret.is_some_and(|t| t.is_shadowed());

        if target.is_external() {
            if let Some(mf) = math::lookup(callee) {
                let t = IrType::scalar(match mf.kind {
                    crate::extended::FloatKind::F32 => ScalarType::F32,
                    crate::extended::FloatKind::F64 => ScalarType::F64,
                });
                if ret == Some(t) && args.iter().all(|(a, _)| *a == t) {
                    self.emit(inst.result.clone(), inst.op.clone(), loc);
                    if let Some(r) = &inst.result {
                        let st = shadow_type_of(t).unwrap();
                        let mut hargs: Vec<(IrType, Value)> = args.iter().map(|(_, v)| (st, self.shadow_of(v))).collect();
                        hargs.push((t, Value::Local(r.clone())));
                        let h = format!("{HOOK_PREFIX}math_{callee}");
                        let callee = self.hooks.declare(h, hargs.iter().map(|a| a.0).collect(), Some(st))?;
                        let twin = self.shadows[r].clone();
                        self.emit(Some(twin), Op::Call { ret: Some(st), callee, args: hargs }, loc);
                    }
                    return Ok(());
                }
            }
        }

        let fp_args: Vec<&(IrType, Value)> = args.iter().filter(|(t, _)| t.is_shadowed()).collect();
        if !fp_args.is_empty() {
            let exempt = callee.starts_with(HOOK_PREFIX);
            let mut shadows = Vec::new();
            for (t, v) in &fp_args {
                let mut s = self.shadow_of(v);
                if self.cfg.check_args && !exempt {
                    s = self.check(*t, v, s, CheckKind::Arg, Value::Const(Constant::null()), loc)?;
                }
                shadows.push((*t, s));
            }
            let cref = Value::FuncRef(callee.to_string());
            self.call_hook(format!("{HOOK_PREFIX}begin_args"), vec![(IrType::PTR, cref)], None, loc)?;
            for (t, s) in shadows {
                let st = shadow_type_of(t).unwrap();
                self.call_hook(format!("{HOOK_PREFIX}push_arg_{}", t.mangle()), vec![(st, s)], None, loc)?;
            }
        }
        self.emit(inst.result.clone(), inst.op.clone(), loc);
        if ret_shadowed {
            let t = ret.unwrap();
            let st = shadow_type_of(t).unwrap();
            let cref = Value::FuncRef(callee.to_string());
            let h = format!("{HOOK_PREFIX}ret_tag_is");
            let tag = self.call_hook(h, vec![(IrType::PTR, cref)], Some(IrType::I1), loc)?.unwrap();
            if let Some(r) = &inst.result {
                let got = self.call_hook(format!("{HOOK_PREFIX}get_ret_{}", t.mangle()), vec![], Some(st), loc)?.unwrap();
                let ext = self.emit_value(
                    "ext",
                    Op::Cast { op: CastOp::FpExt, from: t, value: Value::Local(r.clone()), to: st },
                    loc,
                );
                let twin = self.shadows[r].clone();
                self.emit(Some(twin), Op::Select { cond: tag, ty: st, on_true: got, on_false: ext }, loc);
            }
        }
        Ok(())
    }
}
