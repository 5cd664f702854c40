use std::collections::{HashMap, HashSet};
use std::fmt;

use super::module::*;
use super::types::{IrType, ScalarType};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Diagnostic {
    pub function: Option<String>,
    pub loc: Option<SourceLoc>,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(loc) = &self.loc {
            write!(f, "{loc}: ")?;
        }
        if let Some(func) = &self.function {
            write!(f, "in @{func}: ")?;
        }
        f.write_str(&self.message)
    }
}

pub fn verify_module(m: &Module) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    for f in &m.functions {
        if !seen.insert(f.name.as_str()) {
            out.push(Diagnostic { function: None, loc: f.loc.clone(), message: format!("duplicate function '@{}'", f.name) });
        }
    }
    for f in &m.functions {
        FnVerifier::new(m, f, &mut out).run();
    }
    out
}

/// Immediate-dominator-free dominator sets over block indices; good enough
/// for the function sizes this IR sees.
pub fn dominators(f: &Function) -> (Vec<Vec<usize>>, Vec<Option<HashSet<usize>>>) {
    let index: HashMap<&str, usize> = f.blocks.iter().enumerate().map(|(i, b)| (b.label.as_str(), i)).collect();
    let n = f.blocks.len();
    let mut preds = vec![Vec::new(); n];
    for (i, b) in f.blocks.iter().enumerate() {
        if let Some(t) = b.insts.last() {
            for s in t.op.successors() {
                if let Some(&j) = index.get(s) {
                    if !preds[j].contains(&i) {
                        preds[j].push(i);
                    }
                }
            }
        }
    }
    let mut reachable = vec![false; n];
    let mut stack = vec![0usize];
    while let Some(b) = stack.pop() {
        if n == 0 || reachable[b] {
            continue;
        }
        reachable[b] = true;
        if let Some(t) = f.blocks[b].insts.last() {
            stack.extend(t.op.successors().into_iter().filter_map(|s| index.get(s).copied()));
        }
    }
    let all: HashSet<usize> = (0..n).filter(|&i| reachable[i]).collect();
    let mut dom: Vec<Option<HashSet<usize>>> =
        (0..n).map(|i| reachable[i].then(|| if i == 0 { [0].into_iter().collect() } else { all.clone() })).collect();
    let mut changed = true;
    while changed {
        changed = false;
        for b in 1..n {
            if !reachable[b] {
                continue;
            }
            let mut new: Option<HashSet<usize>> = None;
            for &p in preds[b].iter().filter(|&&p| reachable[p]) {
                let pd = dom[p].as_ref().unwrap();
                new = Some(match new {
                    None => pd.clone(),
                    Some(acc) => acc.intersection(pd).copied().collect(),
                });
            }
            let mut new = new.unwrap_or_default();
            new.insert(b);
            if dom[b].as_ref() != Some(&new) {
                dom[b] = Some(new);
                changed = true;
            }
        }
    }
    (preds, dom)
}

struct FnVerifier<'a> {
    module: &'a Module,
    f: &'a Function,
    out: &'a mut Vec<Diagnostic>,
    defs: HashMap<&'a str, (usize, usize, IrType)>,
}

const PARAM_INDEX: usize = usize::MAX;

impl<'a> FnVerifier<'a> {
    fn new(module: &'a Module, f: &'a Function, out: &'a mut Vec<Diagnostic>) -> Self {
        FnVerifier { module, f, out, defs: HashMap::new() }
    }

    fn diag(&mut self, loc: Option<&SourceLoc>, message: impl Into<String>) {
        self.out.push(Diagnostic {
            function: Some(self.f.name.clone()),
            loc: loc.or(self.f.loc.as_ref()).cloned(),
            message: message.into(),
        });
    }

    fn run(&mut self) {
        let f = self.f;
        for p in &f.params {
            if !p.ty.is_well_formed() {
                self.diag(None, format!("parameter type {} is not well formed", p.ty));
            }
        }
        if let Some(r) = f.ret {
            if !r.is_well_formed() {
                self.diag(None, format!("return type {r} is not well formed"));
            }
        }
        if f.is_external() {
            if !f.blocks.is_empty() {
                self.diag(None, "external function has a body");
            }
            return;
        }
        if f.blocks.is_empty() {
            self.diag(None, "function has no entry block");
            return;
        }
        let mut labels = HashSet::new();
        for b in &f.blocks {
            if !labels.insert(b.label.as_str()) {
                self.diag(None, format!("duplicate block label '{}'", b.label));
            }
        }
        for p in &f.params {
            if self.defs.insert(&p.name, (0, PARAM_INDEX, p.ty)).is_some() {
                self.diag(None, format!("duplicate SSA name '%{}'", p.name));
            }
        }
        for (bi, b) in f.blocks.iter().enumerate() {
            for (ii, inst) in b.insts.iter().enumerate() {
                let Some(r) = &inst.result else { continue };
                match inst.op.result_type() {
                    None => self.diag(inst.loc.as_ref(), format!("'{}' produces no value", inst.op.opcode())),
                    Some(t) => {
                        if self.defs.insert(r, (bi, ii, t)).is_some() {
                            self.diag(inst.loc.as_ref(), format!("duplicate SSA name '%{r}'"));
                        }
                    }
                }
            }
        }
        let (preds, dom) = dominators(f);
        if !preds[0].is_empty() {
            self.diag(None, format!("entry block '{}' has predecessors", f.blocks[0].label));
        }
        for (bi, b) in f.blocks.iter().enumerate() {
            if b.insts.last().is_none_or(|i| !i.op.is_terminator()) {
                let loc = b.insts.last().and_then(|i| i.loc.as_ref());
                self.diag(loc, format!("missing terminator in block '{}'", b.label));
            }
            let mut phis_done = false;
            for (ii, inst) in b.insts.iter().enumerate() {
                let loc = inst.loc.as_ref();
                if inst.op.is_terminator() && ii + 1 != b.insts.len() {
                    self.diag(loc, format!("terminator in the middle of block '{}'", b.label));
                }
                if matches!(inst.op, Op::Phi { .. }) {
                    if phis_done {
                        self.diag(loc, "phi must appear at the start of a block");
                    }
                    self.check_phi(inst, bi, &preds[bi], &dom);
                } else {
                    phis_done = true;
                    for v in inst.op.operands() {
                        self.check_dominance(v, bi, ii, loc, &dom);
                    }
                }
                for s in inst.op.successors() {
                    if f.block(s).is_none() {
                        self.diag(loc, format!("branch to unknown block '%{s}'"));
                    } else if s == f.blocks[0].label {
                        // reported once above via the predecessor list
                    }
                }
                self.check_types(inst);
            }
        }
    }

    fn check_phi(&mut self, inst: &Instruction, bi: usize, preds: &[usize], dom: &[Option<HashSet<usize>>]) {
        let Op::Phi { incoming, .. } = &inst.op else { return };
        let loc = inst.loc.as_ref();
        let mut seen = HashSet::new();
        for (v, label) in incoming {
            let Some(pi) = self.f.blocks.iter().position(|b| &b.label == label) else {
                self.diag(loc, format!("phi names unknown block '%{label}'"));
                continue;
            };
            if !preds.contains(&pi) {
                self.diag(loc, format!("phi names '%{label}', which is not a predecessor"));
            }
            if !seen.insert(pi) {
                self.diag(loc, format!("phi names '%{label}' twice"));
            }
            if let Value::Local(n) = v {
                match self.defs.get(n.as_str()) {
                    None => self.diag(loc, format!("use of undefined value '%{n}'")),
                    Some(&(db, _, _)) => {
                        if let Some(d) = &dom[pi] {
                            if !d.contains(&db) {
                                self.diag(loc, format!("'%{n}' does not dominate the end of '%{label}'"));
                            }
                        }
                    }
                }
            }
        }
        for p in preds {
            if !seen.contains(p) {
                let l = &self.f.blocks[*p].label;
                self.diag(loc, format!("phi in '{}' is missing predecessor '%{l}'", self.f.blocks[bi].label));
            }
        }
    }

    fn check_dominance(&mut self, v: &Value, bi: usize, ii: usize, loc: Option<&SourceLoc>, dom: &[Option<HashSet<usize>>]) {
        match v {
            Value::Local(n) => match self.defs.get(n.as_str()).copied() {
                None => self.diag(loc, format!("use of undefined value '%{n}'")),
                Some((db, di, _)) => {
                    let ok = if di == PARAM_INDEX {
                        true
                    } else if db == bi {
                        di < ii
                    } else {
                        match &dom[bi] {
                            Some(d) => d.contains(&db),
                            None => true,
                        }
                    };
                    if !ok {
                        self.diag(loc, format!("'%{n}' is used before it is defined on some path"));
                    }
                }
            },
            Value::FuncRef(n) => {
                if self.module.function(n).is_none() {
                    self.diag(loc, format!("reference to unknown function '@{n}'"));
                }
            }
            Value::Const(_) => {}
        }
    }

    fn type_of(&self, v: &Value) -> Option<IrType> {
        match v {
            Value::Local(n) => self.defs.get(n.as_str()).map(|d| d.2),
            Value::Const(c) => Some(c.ty),
            Value::FuncRef(_) => Some(IrType::PTR),
        }
    }

    fn expect(&mut self, v: &Value, want: IrType, loc: Option<&SourceLoc>, what: &str) {
        if let Some(t) = self.type_of(v) {
            if t != want {
                self.diag(loc, format!("{what} has type {t}, expected {want}"));
            }
        }
        if let Value::Const(c) = v {
            if c.lanes.len() != c.ty.lanes as usize {
                self.diag(loc, "malformed constant");
            }
        }
    }

    fn check_types(&mut self, inst: &Instruction) {
        let loc = inst.loc.as_ref();
        if let Some(t) = inst.op.result_type() {
            if !t.is_well_formed() {
                self.diag(loc, format!("result type {t} is not well formed"));
                return;
            }
        }
        match &inst.op {
            Op::Binary { op, ty, lhs, rhs } => {
                if op.is_float() && !ty.is_float() {
                    self.diag(loc, format!("{} requires floating-point operands", op.name()));
                } else if !op.is_float() && !ty.is_int() {
                    self.diag(loc, format!("{} requires integer operands", op.name()));
                } else {
                    self.expect(lhs, *ty, loc, "left operand");
                    self.expect(rhs, *ty, loc, "right operand");
                }
            }
            Op::FNeg { ty, operand } => {
                if !ty.is_float() {
                    self.diag(loc, "fneg requires a floating-point operand");
                } else {
                    self.expect(operand, *ty, loc, "operand");
                }
            }
            Op::FCmp { ty, lhs, rhs, .. } => {
                if !ty.is_float() || ty.is_vector() {
                    self.diag(loc, "fcmp requires scalar floating-point operands");
                } else {
                    self.expect(lhs, *ty, loc, "left operand");
                    self.expect(rhs, *ty, loc, "right operand");
                }
            }
            Op::ICmp { ty, lhs, rhs, .. } => {
                if ty.is_vector() || !(ty.is_int() || ty.scalar == ScalarType::Ptr) {
                    self.diag(loc, "icmp requires scalar integer or pointer operands");
                } else {
                    self.expect(lhs, *ty, loc, "left operand");
                    self.expect(rhs, *ty, loc, "right operand");
                }
            }
            Op::Cast { op, from, value, to } => {
                self.expect(value, *from, loc, "cast operand");
                let lanes_match = from.lanes == to.lanes;
                let ok = match op {
                    CastOp::FpExt => from.is_float() && to.is_float() && lanes_match && to.scalar.size() > from.scalar.size(),
                    CastOp::FpTrunc => {
                        from.is_float() && to.is_float() && lanes_match && to.scalar.size() < from.scalar.size()
                    }
                    CastOp::SiToFp => from.is_int() && to.is_float() && lanes_match,
                    CastOp::FpToSi => from.is_float() && to.is_int() && lanes_match,
                    CastOp::Bitcast => {
                        let plain = |t: IrType| t.scalar != ScalarType::Ptr && t.scalar != ScalarType::I1;
                        plain(*from) && plain(*to) && from.size() == to.size()
                    }
                };
                if !ok {
                    self.diag(loc, format!("invalid {} from {from} to {to}", op.name()));
                }
            }
            Op::Select { cond, ty, on_true, on_false } => {
                self.expect(cond, IrType::I1, loc, "select condition");
                self.expect(on_true, *ty, loc, "select true operand");
                self.expect(on_false, *ty, loc, "select false operand");
            }
            Op::ExtractElement { ty, vector, index } => {
                self.check_vector_index(*ty, index, loc);
                self.expect(vector, *ty, loc, "vector operand");
            }
            Op::InsertElement { ty, vector, element, index } => {
                self.check_vector_index(*ty, index, loc);
                self.expect(vector, *ty, loc, "vector operand");
                self.expect(element, IrType::scalar(ty.scalar), loc, "inserted element");
            }
            Op::ShuffleVector { ty, lhs, rhs, mask } => {
                if !ty.is_vector() {
                    self.diag(loc, "shufflevector requires vector operands");
                    return;
                }
                if mask.is_empty() || mask.iter().any(|&i| i >= 2 * ty.lanes) {
                    self.diag(loc, "shufflevector mask index out of range");
                }
                self.expect(lhs, *ty, loc, "left operand");
                self.expect(rhs, *ty, loc, "right operand");
            }
            Op::Load { ptr, .. } => self.expect(ptr, IrType::PTR, loc, "load address"),
            Op::Store { ty, value, ptr } => {
                self.expect(value, *ty, loc, "stored value");
                self.expect(ptr, IrType::PTR, loc, "store address");
            }
            Op::Alloca { count, .. } => self.expect(count, IrType::I64, loc, "alloca count"),
            Op::PtrAdd { ptr, offset } => {
                self.expect(ptr, IrType::PTR, loc, "ptradd base");
                self.expect(offset, IrType::I64, loc, "ptradd offset");
            }
            Op::Call { ret, callee, args } => {
                let Some(target) = self.module.function(callee) else {
                    self.diag(loc, format!("call to unknown function '@{callee}'"));
                    return;
                };
                let params = target.param_types();
                if params.len() != args.len() {
                    self.diag(loc, format!("'@{callee}' expects {} arguments, got {}", params.len(), args.len()));
                }
                for (i, ((t, v), p)) in args.iter().zip(params).enumerate() {
                    if *t != p {
                        self.diag(loc, format!("argument {i} of '@{callee}' has type {t}, expected {p}"));
                    }
                    self.expect(v, *t, loc, &format!("argument {i}"));
                }
                if *ret != target.ret {
                    self.diag(loc, format!("call result type does not match '@{callee}'"));
                }
            }
            Op::CondBr { cond, .. } => self.expect(cond, IrType::I1, loc, "branch condition"),
            Op::Phi { ty, incoming } => {
                for (v, _) in incoming {
                    self.expect(v, *ty, loc, "phi operand");
                }
            }
            Op::Ret { value } => match (value, self.f.ret) {
                (None, None) => {}
                (Some((t, v)), Some(r)) if *t == r => self.expect(v, r, loc, "returned value"),
                _ => self.diag(loc, "return type mismatch"),
            },
            Op::Memcpy { dst, src, len } => {
                self.expect(dst, IrType::PTR, loc, "memcpy destination");
                self.expect(src, IrType::PTR, loc, "memcpy source");
                self.expect(len, IrType::I64, loc, "memcpy length");
            }
            Op::Memset { dst, byte, len } => {
                self.expect(dst, IrType::PTR, loc, "memset destination");
                self.expect(byte, IrType::I8, loc, "memset byte");
                self.expect(len, IrType::I64, loc, "memset length");
            }
            Op::Br { .. } | Op::Unreachable => {}
        }
    }

    fn check_vector_index(&mut self, ty: IrType, index: &Value, loc: Option<&SourceLoc>) {
        if !ty.is_vector() {
            self.diag(loc, "element access requires a vector operand");
            return;
        }
        self.expect(index, IrType::I32, loc, "element index");
        if let Value::Const(c) = index {
            let i = c.lane_as_i64(0);
            if i < 0 || i >= ty.lanes as i64 {
                self.diag(loc, format!("element index {i} out of range for {ty}"));
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::super::parser::parse_module;
    use super::*;

    fn diags(src: &str) -> Vec<String> {
        verify_module(&parse_module(src).unwrap()).into_iter().map(|d| d.message).collect()
    }

    #[test]
    fn return_type_mismatch() {
        assert_eq!(diags("define f32 @f() { entry: ret f64 0.0 }"), vec!["return type mismatch"]);
    }

    #[test]
    fn missing_terminator() {
        let d = diags("define f32 @f(f32 %a) { entry: %b = fadd f32 %a, %a }");
        assert_eq!(d.len(), 1);
        assert!(d[0].starts_with("missing terminator"), "{d:?}");
    }

    #[test]
    fn fadd_on_integers() {
        assert_eq!(
            diags("define i32 @f(i32 %a) { entry: %b = fadd i32 %a, %a\n ret i32 %b }"),
            vec!["fadd requires floating-point operands"]
        );
    }

    #[test]
    fn dominance_across_branches() {
        let src = "define f32 @f(i1 %c, f32 %a) {
entry:
  br i1 %c, label %l, label %r
l:
  %x = fadd f32 %a, %a
  br label %j
r:
  br label %j
j:
  ret f32 %x
}";
        let d = diags(src);
        assert_eq!(d.len(), 1, "{d:?}");
        assert!(d[0].contains("before it is defined"));
    }

    #[test]
    fn phi_must_match_predecessors() {
        let ok = "define f32 @f(i1 %c, f32 %a) {
entry:
  br i1 %c, label %l, label %j
l:
  %x = fadd f32 %a, %a
  br label %j
j:
  %p = phi f32 [%a, %entry], [%x, %l]
  ret f32 %p
}";
        assert!(diags(ok).is_empty(), "{:?}", diags(ok));
        let bad = ok.replace(", [%x, %l]", "");
        assert!(diags(&bad).iter().any(|m| m.contains("missing predecessor")));
    }

    #[test]
    fn entry_cannot_be_a_branch_target() {
        let d = diags("define void @f() { entry: br label %entry }");
        assert!(d.iter().any(|m| m.contains("has predecessors")), "{d:?}");
    }

    #[test]
    fn calls_are_checked_against_signatures() {
        let d = diags("declare f32 @cosf(f32)\ndefine f32 @f(f64 %a) { entry: %r = call f32 @cosf(f64 %a)\n ret f32 %r }");
        assert!(d.iter().any(|m| m.contains("argument 0")), "{d:?}");
        let d = diags("define void @f() { entry: call void @nope()\n ret void }");
        assert!(d.iter().any(|m| m.contains("unknown function")));
    }

    #[test]
    fn diagnostics_carry_locations() {
        let m = parse_module("define f32 @f() { entry: ret f64 0.0 !loc \"a.c\":3:5 }").unwrap();
        let d = verify_module(&m);
        assert_eq!(d[0].loc, Some(SourceLoc::new("a.c", 3, 5)));
        assert_eq!(d[0].to_string(), "a.c:3:5: in @f: return type mismatch");
    }
}
