//! Generators and reference models shared by the property tests and the
//! acceptance runner.

#![allow(dead_code)]

use std::fmt::Write;

use num_bigint::{BigInt, Sign};
use num_traits::{Signed, Zero};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use nsan::extended::math::sqrt_newton;
use nsan::extended::{AppFloat, FloatKind, ShadowScalar, F128};
use nsan::interp::{self, RunConfig, RunResult};
use nsan::ir::{self, Module};
use nsan::runtime::memory::{Provenance, ShadowMemory, ShadowTypeByte, TypeKind};
use nsan::runtime::RuntimeFlags;
use nsan::transform::{instrument_module, InstrumentConfig};

// ---------------------------------------------------------------------------
// Running modules

pub fn parse(text: &str) -> Module {
    let m = ir::parse_module(text).unwrap_or_else(|e| panic!("parse error {e}\n{text}"));
    let diags = ir::verify_module(&m);
    assert!(diags.is_empty(), "verify: {diags:?}\n{text}");
    m
}

pub fn run(m: &Module, cfg: &RunConfig) -> RunResult {
    interp::run(m, "main", &[], cfg).unwrap_or_else(|e| panic!("run: {e}"))
}

/// Runs `m` as written and instrumented; the application-visible results
/// must be bit-identical. Returns the instrumented run.
pub fn check_transparent(m: &Module, cfg: &RunConfig) -> Result<RunResult, String> {
    let plain = run(m, cfg);
    let inst = instrument_module(m, &InstrumentConfig::default()).map_err(|e| e.to_string())?;
    let shadowed = run(&inst, cfg);
    if plain.stdout != shadowed.stdout {
        return Err(format!("stdout differs:\n{}\nvs\n{}", plain.stdout, shadowed.stdout));
    }
    if plain.outcome != shadowed.outcome {
        return Err(format!("outcome differs: {:?} vs {:?}", plain.outcome, shadowed.outcome));
    }
    Ok(shadowed)
}

pub fn exact_flags() -> RunConfig {
    let flags = RuntimeFlags {
        rel_epsilon_f32: 0.0,
        rel_epsilon_f64: 0.0,
        abs_epsilon_f32: 0.0,
        abs_epsilon_f64: 0.0,
        ..RuntimeFlags::default()
    };
    RunConfig { flags, ..RunConfig::default() }
}

// ---------------------------------------------------------------------------
// Random programs

#[derive(Clone, Copy, Debug, PartialEq)]
enum Fk {
    F32,
    F64,
}

impl Fk {
    fn ty(self) -> &'static str {
        match self {
            Fk::F32 => "f32",
            Fk::F64 => "f64",
        }
    }

    fn size(self) -> u32 {
        match self {
            Fk::F32 => 4,
            Fk::F64 => 8,
        }
    }
}

#[derive(Clone, Debug)]
struct Val {
    name: String,
    kind: Fk,
    /// Upper bound on the magnitude; only tracked in exact mode.
    bound: f64,
}

#[derive(Clone, Debug)]
pub struct GenConfig {
    /// Only exactly representable integer arithmetic.
    pub exact: bool,
    /// Randomly mark functions `noinstrument`.
    pub mixed: bool,
    pub functions: usize,
    pub ops: usize,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig { exact: false, mixed: false, functions: 4, ops: 24 }
    }
}

/// Expected tag-protocol statistics for a generated program.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct CallModel {
    pub args_from_stack: u64,
    pub args_extended: u64,
    pub rets_from_slot: u64,
    pub rets_extended: u64,
}

pub struct Generated {
    pub text: String,
    pub model: CallModel,
}

const PARAM_BOUND: f64 = 1024.0;
const EXACT_LIMIT: f64 = (1u64 << 20) as f64;
const SLOTS: usize = 6;

struct FnGen<'a> {
    rng: &'a mut StdRng,
    exact: bool,
    index: usize,
    lines: Vec<String>,
    vals: Vec<Val>,
    slots: [Option<(Fk, f64)>; SLOTS],
    tmp: usize,
    blocks: usize,
    line: &'a mut u32,
    /// (callee index) of every call site in this function.
    calls: Vec<usize>,
}

impl FnGen<'_> {
    fn fresh(&mut self) -> String {
        self.tmp += 1;
        format!("t{}", self.tmp)
    }

    fn loc(&mut self) -> String {
        *self.line += 1;
        format!(" !loc \"gen.cc\":{}:{}", *self.line, 1 + self.index)
    }

    fn constant(&mut self, kind: Fk) -> (String, f64) {
        if self.exact {
            let k: i32 = self.rng.gen_range(-8..=8);
            return (format!("{k}.0"), k.unsigned_abs() as f64);
        }
        let x: f64 = self.rng.gen_range(0.01..1000.0);
        let x = if self.rng.gen_bool(0.3) { -x } else { x };
        match kind {
            Fk::F32 => (format!("{:?}", x as f32), f64::INFINITY),
            Fk::F64 => (format!("{x:?}"), f64::INFINITY),
        }
    }

    fn pick(&mut self, kind: Fk) -> Option<Val> {
        let c: Vec<&Val> = self.vals.iter().filter(|v| v.kind == kind).collect();
        if c.is_empty() {
            return None;
        }
        Some(c[self.rng.gen_range(0..c.len())].clone())
    }

    /// An operand: a pool value or, sometimes, a constant.
    fn operand(&mut self, kind: Fk) -> (String, f64) {
        if self.rng.gen_bool(0.8) {
            if let Some(v) = self.pick(kind) {
                return (format!("%{}", v.name), v.bound);
            }
        }
        self.constant(kind)
    }

    fn small_operand(&mut self, kind: Fk, limit: f64) -> (String, f64) {
        for _ in 0..4 {
            let o = self.operand(kind);
            if !self.exact || o.1 <= limit {
                return o;
            }
        }
        self.constant(kind)
    }

    fn push(&mut self, kind: Fk, bound: f64, inst: String) -> String {
        let name = self.fresh();
        let loc = self.loc();
        self.lines.push(format!("  %{name} = {inst}{loc}"));
        self.vals.push(Val { name: name.clone(), kind, bound });
        name
    }

    fn ok(&self, bound: f64) -> bool {
        !self.exact || bound <= EXACT_LIMIT
    }

    fn kind(&mut self) -> Fk {
        if self.rng.gen_bool(0.5) {
            Fk::F32
        } else {
            Fk::F64
        }
    }

    fn slot_ptr(&mut self, slot: usize) -> String {
        let p = self.fresh();
        self.lines.push(format!("  %{p} = ptradd ptr %buf, i64 {}", slot * 8));
        p
    }

    fn step(&mut self, callees: &[(Fk, f64)]) {
        let k = self.kind();
        match self.rng.gen_range(0..14) {
            0..=3 => {
                let ops: &[&str] = if self.exact { &["fadd", "fsub", "fmul"] } else { &["fadd", "fsub", "fmul", "fdiv"] };
                let op = ops[self.rng.gen_range(0..ops.len())];
                let (a, ba) = self.operand(k);
                let (b, bb) = self.operand(k);
                let bound = if op == "fmul" { ba * bb } else { ba + bb };
                if self.ok(bound) {
                    self.push(k, bound, format!("{op} {} {a}, {b}", k.ty()));
                }
            }
            4 => {
                let (a, ba) = self.operand(k);
                self.push(k, ba, format!("fneg {} {a}", k.ty()));
            }
            5 => {
                let (a, ba) = self.operand(Fk::F32);
                self.push(Fk::F64, ba, format!("fpext f32 {a} to f64"));
                let (b, bb) = self.operand(Fk::F64);
                if !self.exact || bb <= EXACT_LIMIT {
                    self.push(Fk::F32, bb, format!("fptrunc f64 {b} to f32"));
                }
            }
            6 => {
                let n: i32 = self.rng.gen_range(-1000..1000);
                self.push(k, n.unsigned_abs() as f64, format!("sitofp i32 {n} to {}", k.ty()));
            }
            7 => {
                let preds = ["olt", "ogt", "oeq", "une", "ole", "oge"];
                let p = preds[self.rng.gen_range(0..preds.len())];
                let (a, ba) = self.operand(k);
                let (b, bb) = self.operand(k);
                let c = self.fresh();
                let loc = self.loc();
                self.lines.push(format!("  %{c} = fcmp {p} {} {a}, {b}{loc}", k.ty()));
                self.push(k, ba.max(bb), format!("select i1 %{c}, {t} {a}, {t} {b}", t = k.ty()));
            }
            8 => {
                let slot = self.rng.gen_range(0..SLOTS);
                let (a, ba) = self.operand(k);
                let p = self.slot_ptr(slot);
                let loc = self.loc();
                self.lines.push(format!("  store {} {a}, ptr %{p}{loc}", k.ty()));
                self.slots[slot] = Some((k, ba));
            }
            9 => {
                let written: Vec<usize> = (0..SLOTS).filter(|&s| self.slots[s].is_some()).collect();
                if written.is_empty() {
                    return;
                }
                let slot = written[self.rng.gen_range(0..written.len())];
                let (sk, bound) = self.slots[slot].unwrap();
                // Reinterpreting loads are fine for transparency but give
                // unbounded values.
                let (lk, bound) = if self.exact || self.rng.gen_bool(0.7) { (sk, bound) } else { (k, f64::INFINITY) };
                let p = self.slot_ptr(slot);
                self.push(lk, bound, format!("load {}, ptr %{p}", lk.ty()));
            }
            10 => {
                let from = self.rng.gen_range(0..SLOTS);
                let to = self.rng.gen_range(0..SLOTS);
                if self.rng.gen_bool(0.5) {
                    let (s, d) = (self.slot_ptr(from), self.slot_ptr(to));
                    self.lines.push(format!("  memcpy ptr %{d}, ptr %{s}, i64 8"));
                    self.slots[to] = self.slots[from];
                } else {
                    let d = self.slot_ptr(to);
                    let n: i32 = self.rng.gen_range(0..100);
                    self.lines.push(format!("  store i32 {n}, ptr %{d}"));
                    self.slots[to] = None;
                }
            }
            11 => {
                let (name, args) = if self.exact {
                    (if k == Fk::F32 { "fabsf" } else { "fabs" }, 1)
                } else {
                    let f32s = ["fabsf", "sqrtf", "sinf", "cosf", "fmaf"];
                    let f64s = ["fabs", "sqrt", "sin", "cos", "fma"];
                    let i = self.rng.gen_range(0..f32s.len());
                    let n = if k == Fk::F32 { f32s[i] } else { f64s[i] };
                    (n, if i == 4 { 3 } else { 1 })
                };
                let mut list = Vec::new();
                let mut bound: f64 = 0.0;
                for _ in 0..args {
                    let (a, b) = self.operand(k);
                    bound = bound.max(b);
                    list.push(format!("{} {a}", k.ty()));
                }
                self.push(k, bound, format!("call {} @{name}({})", k.ty(), list.join(", ")));
            }
            12 => {
                if callees.is_empty() {
                    return;
                }
                let j = self.rng.gen_range(0..callees.len());
                let (a, _) = self.small_operand(Fk::F32, PARAM_BOUND);
                let (b, _) = self.small_operand(Fk::F64, PARAM_BOUND);
                let (rk, rb) = callees[j];
                self.calls.push(j);
                self.push(rk, rb, format!("call {} @f{j}(f32 {a}, f64 {b})", rk.ty()));
            }
            _ => {
                if self.rng.gen_bool(0.5) {
                    let (a, _) = self.operand(k);
                    let loc = self.loc();
                    self.lines.push(format!("  call void @print_{}({} {a}){loc}", k.ty(), k.ty()));
                } else {
                    self.diamond_or_vector(k);
                }
            }
        }
    }

    fn diamond_or_vector(&mut self, k: Fk) {
        let (a, ba) = self.operand(k);
        let (b, bb) = self.operand(k);
        let bound = ba + bb;
        if !self.ok(bound) {
            return;
        }
        let t = k.ty();
        if self.rng.gen_bool(0.5) {
            let z = if k == Fk::F32 { "f32 0.0" } else { "f64 0.0" };
            let v0 = self.fresh();
            self.lines.push(format!("  %{v0} = insertelement <2 x {t}> <{z}, {z}>, {t} {a}, i32 0"));
            let v1 = self.fresh();
            self.lines.push(format!("  %{v1} = insertelement <2 x {t}> %{v0}, {t} {b}, i32 1"));
            let v2 = self.fresh();
            let loc = self.loc();
            self.lines.push(format!("  %{v2} = fadd <2 x {t}> %{v1}, %{v1}{loc}"));
            let lane = self.rng.gen_range(0..2);
            self.push(k, 2.0 * bound, format!("extractelement <2 x {t}> %{v2}, i32 {lane}"));
            return;
        }
        self.blocks += 1;
        let n = self.blocks;
        let c = self.fresh();
        let loc = self.loc();
        self.lines.push(format!("  %{c} = fcmp olt {t} {a}, {b}{loc}"));
        self.lines.push(format!("  br i1 %{c}, label %then{n}, label %else{n}"));
        let (x, y) = (self.fresh(), self.fresh());
        let (l1, l2) = (self.loc(), self.loc());
        self.lines.push(format!("then{n}:"));
        self.lines.push(format!("  %{x} = fadd {t} {a}, {b}{l1}"));
        self.lines.push(format!("  br label %join{n}"));
        self.lines.push(format!("else{n}:"));
        self.lines.push(format!("  %{y} = fsub {t} {a}, {b}{l2}"));
        self.lines.push(format!("  br label %join{n}"));
        self.lines.push(format!("join{n}:"));
        self.push(k, bound, format!("phi {t} [%{x}, %then{n}], [%{y}, %else{n}]"));
    }

    /// A value of kind `k` to return, converting if necessary.
    fn result(&mut self, k: Fk) -> (String, f64) {
        let limit = if self.exact && k == Fk::F32 { EXACT_LIMIT } else { f64::INFINITY };
        if let Some(v) = self.pick(k) {
            if v.bound <= limit {
                return (format!("%{}", v.name), v.bound);
            }
        }
        let other = if k == Fk::F32 { Fk::F64 } else { Fk::F32 };
        match self.pick(other) {
            Some(v) if v.bound <= EXACT_LIMIT || !self.exact => {
                let op = if k == Fk::F32 { "fptrunc" } else { "fpext" };
                let name = self.push(k, v.bound, format!("{op} {} %{} to {}", other.ty(), v.name, k.ty()));
                (format!("%{name}"), v.bound)
            }
            _ => self.constant(k),
        }
    }
}

/// A random well-typed module: `@f0..@f{n-1}(f32, f64)` where each function
/// may call lower-numbered ones, and a parameterless `@main` returning f64.
pub fn random_program(seed: u64, cfg: &GenConfig) -> Generated {
    let mut rng = StdRng::seed_from_u64(seed);
    let mut text = String::from(
        "declare void @print_f32(f32)\ndeclare void @print_f64(f64)\n\
         declare f32 @fabsf(f32)\ndeclare f32 @sqrtf(f32)\ndeclare f32 @sinf(f32)\ndeclare f32 @cosf(f32)\n\
         declare f32 @fmaf(f32, f32, f32)\ndeclare f64 @fabs(f64)\ndeclare f64 @sqrt(f64)\ndeclare f64 @sin(f64)\n\
         declare f64 @cos(f64)\ndeclare f64 @fma(f64, f64, f64)\n",
    );
    let n = cfg.functions;
    let mut line = 0u32;
    let mut returns: Vec<(Fk, f64)> = Vec::new();
    let mut instrumented = Vec::new();
    let mut sites: Vec<(usize, usize)> = Vec::new();
    for index in 0..=n {
        let is_main = index == n;
        let noinst = cfg.mixed && rng.gen_bool(0.4);
        instrumented.push(!noinst);
        let rk = if is_main || rng.gen_bool(0.5) { Fk::F64 } else { Fk::F32 };
        let mut g = FnGen {
            rng: &mut rng,
            exact: cfg.exact,
            index,
            lines: Vec::new(),
            vals: Vec::new(),
            slots: [None; SLOTS],
            tmp: 0,
            blocks: 0,
            line: &mut line,
            calls: Vec::new(),
        };
        if is_main {
            let (c1, b1) = g.constant(Fk::F32);
            let (c2, b2) = g.constant(Fk::F64);
            g.push(Fk::F32, b1, format!("fadd f32 {c1}, 0.0"));
            g.push(Fk::F64, b2, format!("fadd f64 {c2}, 0.0"));
        } else {
            g.vals.push(Val { name: "a".into(), kind: Fk::F32, bound: PARAM_BOUND });
            g.vals.push(Val { name: "b".into(), kind: Fk::F64, bound: PARAM_BOUND });
        }
        g.lines.push("  %buf = alloca i8, i64 48".into());
        for _ in 0..cfg.ops {
            g.step(&returns);
        }
        if is_main {
            // Make sure every function is reached at least once.
            for (j, &(rk, rb)) in returns.iter().enumerate() {
                if !g.calls.contains(&j) {
                    let (a, _) = g.small_operand(Fk::F32, PARAM_BOUND);
                    let (b, _) = g.small_operand(Fk::F64, PARAM_BOUND);
                    g.calls.push(j);
                    g.push(rk, rb, format!("call {} @f{j}(f32 {a}, f64 {b})", rk.ty()));
                }
            }
        }
        let (r, rb) = g.result(rk);
        let loc = g.loc();
        g.lines.push(format!("  ret {} {r}{loc}", rk.ty()));
        let calls = std::mem::take(&mut g.calls);
        let lines = std::mem::take(&mut g.lines);
        sites.extend(calls.iter().map(|&j| (index, j)));
        let (name, params) = if is_main { ("main".to_string(), String::new()) } else { (format!("f{index}"), "f32 %a, f64 %b".into()) };
        let attr = if noinst { " noinstrument" } else { "" };
        let _ = writeln!(text, "\ndefine {} @{name}({params}){attr} {{\nentry:", rk.ty());
        for l in lines {
            let _ = writeln!(text, "{l}");
        }
        text.push_str("}\n");
        returns.push((rk, if cfg.exact { rb.min(EXACT_LIMIT) } else { rb }));
    }

    // Dynamic call counts: callers always have a higher index.
    let mut times = vec![0u64; n + 1];
    times[n] = 1;
    for caller in (0..=n).rev() {
        for &(c, callee) in &sites {
            if c == caller {
                times[callee] += times[caller];
            }
        }
    }
    let mut model = CallModel::default();
    for &(caller, callee) in &sites {
        let t = times[caller];
        match (instrumented[caller], instrumented[callee]) {
            (true, true) => {
                model.args_from_stack += t;
                model.rets_from_slot += t;
            }
            (false, true) => model.args_extended += t,
            (true, false) => model.rets_extended += t,
            (false, false) => {}
        }
    }
    Generated { text, model }
}

/// Checks transparency of one random program.
pub fn random_transparency(seed: u64) -> Result<(), String> {
    let cfg = GenConfig { mixed: seed.is_multiple_of(3), ..GenConfig::default() };
    let g = random_program(seed, &cfg);
    let m = parse(&g.text);
    check_transparent(&m, &RunConfig::default()).map(|_| ()).map_err(|e| format!("seed {seed}: {e}\n{}", g.text))
}

/// Tag-protocol safety: on a random mixed call graph with exact arithmetic,
/// shadows cross call boundaries exactly when both sides are instrumented,
/// no warning fires at zero tolerance, and outputs are unchanged.
pub fn random_protocol(seed: u64) -> Result<(), String> {
    let cfg = GenConfig { exact: true, mixed: true, functions: 6, ops: 16 };
    let g = random_program(seed, &cfg);
    let m = parse(&g.text);
    let r = check_transparent(&m, &exact_flags()).map_err(|e| format!("seed {seed}: {e}\n{}", g.text))?;
    let s = &r.stats;
    let got = CallModel {
        args_from_stack: s.args_from_stack,
        args_extended: s.args_extended,
        rets_from_slot: s.rets_from_slot,
        rets_extended: s.rets_extended,
    };
    if got != g.model {
        return Err(format!("seed {seed}: protocol counts {got:?}, expected {:?}\n{}", g.model, g.text));
    }
    if !r.report.warnings.is_empty() {
        let w = nsan::runtime::format_warning(&r.report.warnings[0]);
        return Err(format!("seed {seed}: unexpected warning on exact program\n{w}\n{}", g.text));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Shadow memory against a byte model

const MEM_BASE: u64 = 0x4000;

#[derive(Clone, Copy, Debug)]
enum MemOp {
    Store(FloatKind, u64),
    Unknown(u64, u64),
}

fn mem_ops(len: u64) -> Vec<MemOp> {
    let mut ops = Vec::new();
    for kind in [FloatKind::F32, FloatKind::F64] {
        // Includes offsets that run past the end of the block.
        for off in 0..len {
            ops.push(MemOp::Store(kind, off));
        }
    }
    for off in 0..len {
        ops.push(MemOp::Unknown(off, 1));
    }
    for off in 0..=len - 4 {
        ops.push(MemOp::Unknown(off, 4));
    }
    ops
}

fn shadow_for(kind: FloatKind, id: usize) -> ShadowScalar {
    let x = 1.0 + id as f64 / 1024.0;
    match kind {
        FloatKind::F32 => ShadowScalar::F64(x),
        FloatKind::F64 => ShadowScalar::Ext(F128::from_f64(x) + F128::from_f64(2f64.powi(-80))),
    }
}

fn app_for(kind: FloatKind) -> AppFloat {
    match kind {
        FloatKind::F32 => AppFloat::F32(7.0),
        FloatKind::F64 => AppFloat::F64(7.0),
    }
}

fn overlaps(a: u64, alen: u64, b: u64, blen: u64) -> bool {
    a < b + blen && b < a + alen
}

/// Every sequence of up to three overlapping writes into a 16-byte block,
/// followed by every possible load. The expected result is derived from
/// the write history alone: a load at `a` of kind `k` sees a shadow iff the
/// last write touching its bytes was a `k` store at exactly `a`.
pub fn memory_exhaustive() -> Result<u64, String> {
    const LEN: u64 = 16;
    let ops = mem_ops(LEN);
    let mut scenarios = 0u64;
    let mut seq = Vec::with_capacity(3);
    for depth in 1..=3u32 {
        let total = ops.len().pow(depth);
        for mut code in 0..total {
            seq.clear();
            for _ in 0..depth {
                seq.push(ops[code % ops.len()]);
                code /= ops.len();
            }
            memory_scenario(&seq, LEN)?;
            scenarios += 1;
        }
    }
    Ok(scenarios)
}

/// An applied write: offset, length and, for stores, the kind and store id.
type AppliedWrite = (u64, u64, Option<(FloatKind, usize)>);

fn memory_scenario(seq: &[MemOp], len: u64) -> Result<(), String> {
    let mut m = ShadowMemory::new();
    m.allocate(MEM_BASE, len);
    // Applied writes: (offset, len, Some(kind, id) for stores).
    let mut history: Vec<AppliedWrite> = Vec::new();
    for (id, op) in seq.iter().enumerate() {
        match *op {
            MemOp::Store(kind, off) => {
                let fits = off + kind.size() <= len;
                let r = m.store(MEM_BASE + off, shadow_for(kind, id));
                if r.is_ok() != fits {
                    return Err(format!("{seq:?}: store result {r:?}, in bounds {fits}"));
                }
                if fits {
                    history.push((off, kind.size(), Some((kind, id))));
                }
            }
            MemOp::Unknown(off, n) => {
                m.set_unknown(MEM_BASE + off, n).map_err(|e| e.to_string())?;
                history.push((off, n, None));
            }
        }
    }
    for kind in [FloatKind::F32, FloatKind::F64] {
        for off in 0..len {
            let size = kind.size();
            let r = m.load(MEM_BASE + off, app_for(kind));
            if off + size > len {
                if r.is_ok() {
                    return Err(format!("{seq:?}: out-of-bounds load at {off} succeeded"));
                }
                continue;
            }
            let last = history.iter().rev().find(|h| overlaps(h.0, h.1, off, size));
            let expected = match last {
                Some(&(o, _, Some((k, id)))) if o == off && k == kind => Some(shadow_for(kind, id)),
                _ => None,
            };
            let (s, p) = r.map_err(|e| e.to_string())?;
            let ok = match expected {
                Some(e) => p == Provenance::Shadow && s.same_bits(e),
                None => p == Provenance::Extended && s.same_bits(ShadowScalar::extend(app_for(kind))),
            };
            if !ok {
                return Err(format!("{seq:?}: load {kind:?} at +{off} gave {s:?}/{p:?}, expected {expected:?}"));
            }
        }
    }
    Ok(())
}

/// A direct byte model of both planes, used for random sequences that also
/// contain overlapping copies.
struct ByteModel {
    types: Vec<Option<(FloatKind, u8)>>,
    values: Vec<u8>,
}

impl ByteModel {
    fn store(&mut self, off: usize, s: ShadowScalar) {
        let kind = s.app_kind();
        let bytes: Vec<u8> = match s {
            ShadowScalar::F64(x) => x.to_bits().to_le_bytes().to_vec(),
            ShadowScalar::Ext(x) => x.to_bits().to_le_bytes().to_vec(),
        };
        for i in 0..kind.size() as usize {
            self.types[off + i] = Some((kind, i as u8));
            self.values[2 * (off + i)] = bytes[2 * i];
            self.values[2 * (off + i) + 1] = bytes[2 * i + 1];
        }
    }

    fn load(&self, off: usize, kind: FloatKind) -> Option<ShadowScalar> {
        let n = kind.size() as usize;
        if (0..n).any(|i| self.types[off + i] != Some((kind, i as u8))) {
            return None;
        }
        let bytes = &self.values[2 * off..2 * (off + n)];
        Some(match kind {
            FloatKind::F32 => ShadowScalar::F64(f64::from_le_bytes(bytes.try_into().unwrap())),
            FloatKind::F64 => ShadowScalar::Ext(F128::from_bits(u128::from_le_bytes(bytes.try_into().unwrap()))),
        })
    }
}

pub fn memory_random(cases: usize, seed: u64) -> Result<(), String> {
    const LEN: usize = 32;
    let mut rng = StdRng::seed_from_u64(seed);
    for case in 0..cases {
        let mut m = ShadowMemory::new();
        m.allocate(MEM_BASE, LEN as u64);
        let mut model = ByteModel { types: vec![None; LEN], values: vec![0; 2 * LEN] };
        let mut log = Vec::new();
        for step in 0..rng.gen_range(1..12) {
            match rng.gen_range(0..4) {
                0 | 1 => {
                    let kind = if rng.gen_bool(0.5) { FloatKind::F32 } else { FloatKind::F64 };
                    let off = rng.gen_range(0..=LEN - kind.size() as usize);
                    let s = shadow_for(kind, case * 16 + step);
                    m.store(MEM_BASE + off as u64, s).map_err(|e| e.to_string())?;
                    model.store(off, s);
                    log.push(format!("store {kind:?} +{off}"));
                }
                2 => {
                    let off = rng.gen_range(0..LEN);
                    let n = rng.gen_range(1..=LEN - off);
                    m.set_unknown(MEM_BASE + off as u64, n as u64).map_err(|e| e.to_string())?;
                    model.types[off..off + n].fill(None);
                    log.push(format!("unknown +{off} {n}"));
                }
                _ => {
                    let n = rng.gen_range(1..=LEN / 2);
                    let src = rng.gen_range(0..=LEN - n);
                    let dst = rng.gen_range(0..=LEN - n);
                    m.copy(MEM_BASE + dst as u64, MEM_BASE + src as u64, n as u64).map_err(|e| e.to_string())?;
                    let t = model.types[src..src + n].to_vec();
                    model.types[dst..dst + n].copy_from_slice(&t);
                    let v = model.values[2 * src..2 * (src + n)].to_vec();
                    model.values[2 * dst..2 * (dst + n)].copy_from_slice(&v);
                    log.push(format!("copy +{src} -> +{dst} {n}"));
                }
            }
        }
        for off in 0..LEN {
            let tb = m.type_at(MEM_BASE + off as u64).map_err(|e| e.to_string())?;
            let want = match model.types[off] {
                None => ShadowTypeByte::UNKNOWN,
                Some((FloatKind::F32, pos)) => ShadowTypeByte { kind: TypeKind::F32, pos },
                Some((FloatKind::F64, pos)) => ShadowTypeByte { kind: TypeKind::F64, pos },
            };
            if tb != want {
                return Err(format!("{log:?}: type byte +{off} is {tb:?}, model {want:?}"));
            }
            for kind in [FloatKind::F32, FloatKind::F64] {
                if off + kind.size() as usize > LEN {
                    continue;
                }
                let (s, p) = m.load(MEM_BASE + off as u64, app_for(kind)).map_err(|e| e.to_string())?;
                let ok = match model.load(off, kind) {
                    Some(e) => p == Provenance::Shadow && s.same_bits(e),
                    None => p == Provenance::Extended,
                };
                if !ok {
                    return Err(format!("{log:?}: load {kind:?} +{off} gave {s:?}/{p:?}"));
                }
            }
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Extended arithmetic against a big-integer oracle

/// `mant * 2^exp`, exactly.
#[derive(Clone, Debug)]
pub struct Dyadic {
    pub mant: BigInt,
    pub exp: i64,
}

impl Dyadic {
    pub fn from_f128(x: F128) -> Dyadic {
        let bits = x.to_bits();
        let neg = bits >> 127 == 1;
        let e = ((bits >> 112) & 0x7fff) as i64;
        let frac = bits & ((1u128 << 112) - 1);
        assert!(e != 0x7fff, "finite operands only");
        let (m, exp) = if e == 0 { (frac, -16382 - 112) } else { (frac | (1u128 << 112), e - 16383 - 112) };
        let mant = BigInt::from(m);
        Dyadic { mant: if neg { -mant } else { mant }, exp }
    }

    fn align(&self, other: &Dyadic) -> (BigInt, BigInt, i64) {
        let e = self.exp.min(other.exp);
        (&self.mant << (self.exp - e) as usize, &other.mant << (other.exp - e) as usize, e)
    }

    pub fn add(&self, o: &Dyadic) -> Dyadic {
        let (a, b, exp) = self.align(o);
        Dyadic { mant: a + b, exp }
    }

    pub fn neg(&self) -> Dyadic {
        Dyadic { mant: -&self.mant, exp: self.exp }
    }

    pub fn sub(&self, o: &Dyadic) -> Dyadic {
        self.add(&o.neg())
    }

    pub fn mul(&self, o: &Dyadic) -> Dyadic {
        Dyadic { mant: &self.mant * &o.mant, exp: self.exp + o.exp }
    }

    /// Quotient truncated to at least `bits` significant bits.
    pub fn div(&self, o: &Dyadic, bits: u64) -> Dyadic {
        let shift = bits + o.mant.bits();
        let num = &self.mant << shift as usize;
        Dyadic { mant: num / &o.mant, exp: self.exp - o.exp - shift as i64 }
    }

    /// Square root truncated to at least `bits` significant bits.
    pub fn sqrt(&self, bits: u64) -> Dyadic {
        let mut shift = 2 * bits;
        if (self.exp - shift as i64) % 2 != 0 {
            shift += 1;
        }
        let m = &self.mant << shift as usize;
        Dyadic { mant: m.sqrt(), exp: (self.exp - shift as i64) / 2 }
    }

    /// floor(log2 |x|) or `None` for zero.
    fn ilog2(&self) -> Option<i64> {
        (!self.mant.is_zero()).then(|| self.mant.bits() as i64 - 1 + self.exp)
    }
}

/// Error of `got` against `exact` in units of 2^(ilog2(exact) - 112), i.e.
/// binary128 ulps.
pub fn ulp_error(got: F128, exact: &Dyadic) -> f64 {
    let g = Dyadic::from_f128(got);
    let d = g.add(&exact.neg());
    match exact.ilog2() {
        None => {
            if d.mant.is_zero() {
                0.0
            } else {
                f64::INFINITY
            }
        }
        Some(l) => {
            if d.mant.is_zero() {
                return 0.0;
            }
            let scale = d.exp - (l - 112);
            let bits = d.mant.bits() as i64;
            // Keep 60 significant bits for the float conversion.
            let keep = (bits - 60).max(0);
            let top: BigInt = d.mant.abs() >> keep as usize;
            let (_, digits) = top.to_u64_digits();
            let v = digits.first().copied().unwrap_or(0) as f64;
            v * 2f64.powi((scale + keep) as i32)
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ArithOp {
    Add,
    Sub,
    Mul,
    Div,
    Sqrt,
}

impl ArithOp {
    pub const ALL: [ArithOp; 5] = [ArithOp::Add, ArithOp::Sub, ArithOp::Mul, ArithOp::Div, ArithOp::Sqrt];
}

fn random_f128(rng: &mut StdRng, exp_range: i64) -> F128 {
    let sign = rng.gen_bool(0.5) as u128;
    let e = (16383 + rng.gen_range(-exp_range..=exp_range)) as u128;
    let frac = rng.gen::<u128>() & ((1u128 << 112) - 1);
    F128::from_bits(sign << 127 | e << 112 | frac)
}

/// Largest observed error in binary128 ulps over `n` random operand pairs.
/// Subtraction pairs include near-equal operands so that cancellation is
/// exercised.
pub fn oracle_max_ulps(op: ArithOp, n: usize, seed: u64) -> f64 {
    let mut rng = StdRng::seed_from_u64(seed ^ (op as u64) << 32);
    let mut worst: f64 = 0.0;
    for _ in 0..n {
        let a = random_f128(&mut rng, 300);
        let mut b = random_f128(&mut rng, 300);
        if matches!(op, ArithOp::Add | ArithOp::Sub) && rng.gen_bool(0.5) {
            // Nearby exponents, and sometimes nearly equal magnitudes.
            let shift = rng.gen_range(0..8u128);
            let ea = (a.to_bits() >> 112) & 0x7fff;
            let keep = if rng.gen_bool(0.3) { a.to_bits() & ((1u128 << 112) - 1) } else { b.to_bits() & ((1u128 << 112) - 1) };
            let low = rng.gen::<u128>() & 0xffff;
            b = F128::from_bits((b.to_bits() & (1u128 << 127)) | (ea - shift.min(ea - 1)) << 112 | (keep ^ low));
        }
        let (got, exact) = match op {
            ArithOp::Add => (a + b, Dyadic::from_f128(a).add(&Dyadic::from_f128(b))),
            ArithOp::Sub => (a - b, Dyadic::from_f128(a).add(&Dyadic::from_f128(b).neg())),
            ArithOp::Mul => (a * b, Dyadic::from_f128(a).mul(&Dyadic::from_f128(b))),
            ArithOp::Div => (a / b, Dyadic::from_f128(a).div(&Dyadic::from_f128(b), 200)),
            ArithOp::Sqrt => {
                let a = a.abs();
                (sqrt_newton(a), Dyadic::from_f128(a).sqrt(200))
            }
        };
        let e = ulp_error(got, &exact);
        if e.is_nan() || e > worst {
            worst = if e.is_nan() { f64::INFINITY } else { e };
        }
    }
    worst
}

/// An exact 200-bit value of the sum, for relative-error oracles.
pub fn exact_sum_f32(values: &[f32]) -> Dyadic {
    let mut acc = Dyadic { mant: BigInt::zero(), exp: -200 };
    for &v in values {
        acc = acc.add(&Dyadic::from_f128(F128::from_f32(v)));
    }
    acc
}

impl Dyadic {
    /// Nearest f64 (truncating beyond 60 bits is harmless at that precision).
    pub fn to_f64(&self) -> f64 {
        if self.mant.is_zero() {
            return 0.0;
        }
        let bits = self.mant.bits() as i64;
        let keep = (bits - 60).max(0);
        let top: BigInt = self.mant.abs() >> keep as usize;
        let (_, digits) = top.to_u64_digits();
        let v = digits.first().copied().unwrap_or(0) as f64 * 2f64.powi((self.exp + keep) as i32);
        if self.mant.sign() == Sign::Minus {
            -v
        } else {
            v
        }
    }
}
