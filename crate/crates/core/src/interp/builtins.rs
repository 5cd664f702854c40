//! External functions the interpreter provides.

use crate::extended::math::{self, MathFn};
use crate::extended::FloatKind;
use crate::ir::{shadow_type_of, IrType, ScalarType};
use crate::transform::HOOK_PREFIX;

/// Runtime hooks emitted by the instrumentation pass.
#[derive(Clone, Debug, PartialEq)]
pub enum Hook {
    Check(ScalarType),
    ShadowLoad { ty: IrType, checked: bool },
    ShadowStore(IrType),
    SetUnknown,
    CopyShadow,
    BeginArgs,
    PushArg(IrType),
    ArgsTagIs,
    GetArg(IrType),
    EndArgs,
    SetRet(IrType),
    RetTagIs,
    GetRet(IrType),
    FcmpFail(IrType),
    /// Shadow of a registry math call, by function name.
    Math(String),
    ExtendResumed(IrType),
}

#[derive(Clone, Debug, PartialEq)]
pub enum Builtin {
    Malloc,
    Free,
    Print(ScalarType),
    Exit,
    RandUniform(FloatKind),
    Math(MathFn),
    /// `__nsan_check_float` / `__nsan_check_double`.
    ExplicitCheck(FloatKind),
    /// `__nsan_resume_float` / `__nsan_resume_double`.
    Resume(FloatKind),
    DumpShadowMem,
    Hook(Hook),
}

fn kind_type(k: FloatKind) -> IrType {
    match k {
        FloatKind::F32 => IrType::F32,
        FloatKind::F64 => IrType::F64,
    }
}

fn parse_mangle(s: &str) -> Option<IrType> {
    if let Some(rest) = s.strip_prefix('v') {
        let split = rest.find(|c: char| !c.is_ascii_digit())?;
        let lanes: u32 = rest[..split].parse().ok()?;
        let t = IrType::vector(ScalarType::from_name(&rest[split..])?, lanes);
        return (lanes > 1 && t.is_well_formed()).then_some(t);
    }
    ScalarType::from_name(s).map(IrType::scalar)
}

fn shadowed(s: &str) -> Option<IrType> {
    parse_mangle(s).filter(|t| t.is_shadowed())
}

fn parse_hook(rest: &str) -> Option<Hook> {
    let fixed = match rest {
        "set_unknown" => Some(Hook::SetUnknown),
        "copy_shadow" => Some(Hook::CopyShadow),
        "begin_args" => Some(Hook::BeginArgs),
        "args_tag_is" => Some(Hook::ArgsTagIs),
        "end_args" => Some(Hook::EndArgs),
        "ret_tag_is" => Some(Hook::RetTagIs),
        _ => None,
    };
    if fixed.is_some() {
        return fixed;
    }
    if let Some(m) = rest.strip_prefix("math_") {
        return math::lookup(m).map(|_| Hook::Math(m.to_string()));
    }
    if let Some(t) = rest.strip_prefix("check_") {
        return shadowed(t).filter(|t| !t.is_vector()).map(|t| Hook::Check(t.scalar));
    }
    if let Some(t) = rest.strip_prefix("shadow_load_checked_") {
        return shadowed(t).map(|ty| Hook::ShadowLoad { ty, checked: true });
    }
    type Ctor = fn(IrType) -> Hook;
    let table: [(&str, Ctor); 8] = [
        ("shadow_load_", |ty| Hook::ShadowLoad { ty, checked: false }),
        ("shadow_store_", Hook::ShadowStore),
        ("push_arg_", Hook::PushArg),
        ("get_arg_", Hook::GetArg),
        ("set_ret_", Hook::SetRet),
        ("get_ret_", Hook::GetRet),
        ("fcmp_fail_", Hook::FcmpFail),
        ("extend_resumed_", Hook::ExtendResumed),
    ];
    for (prefix, make) in table {
        if let Some(t) = rest.strip_prefix(prefix) {
            return shadowed(t).map(make);
        }
    }
    None
}

pub fn resolve(name: &str) -> Option<Builtin> {
    let b = match name {
        "malloc" => Builtin::Malloc,
        "free" => Builtin::Free,
        "print_f32" => Builtin::Print(ScalarType::F32),
        "print_f64" => Builtin::Print(ScalarType::F64),
        "print_i32" => Builtin::Print(ScalarType::I32),
        "print_i64" => Builtin::Print(ScalarType::I64),
        "exit" => Builtin::Exit,
        "rand_uniform_f32" => Builtin::RandUniform(FloatKind::F32),
        "rand_uniform_f64" => Builtin::RandUniform(FloatKind::F64),
        "__nsan_check_float" => Builtin::ExplicitCheck(FloatKind::F32),
        "__nsan_check_double" => Builtin::ExplicitCheck(FloatKind::F64),
        "__nsan_resume_float" => Builtin::Resume(FloatKind::F32),
        "__nsan_resume_double" => Builtin::Resume(FloatKind::F64),
        "__nsan_dump_shadow_mem" => Builtin::DumpShadowMem,
        _ => {
            if let Some(f) = math::lookup(name) {
                return Some(Builtin::Math(f));
            }
            return name.strip_prefix(HOOK_PREFIX).and_then(parse_hook).map(Builtin::Hook);
        }
    };
    Some(b)
}

impl Builtin {
    /// The declaration signature the interpreter expects.
    pub fn signature(&self) -> (Vec<IrType>, Option<IrType>) {
        let sh = |t: IrType| shadow_type_of(t).unwrap();
        let p = IrType::PTR;
        match self {
            Builtin::Malloc => (vec![IrType::I64], Some(p)),
            Builtin::Free => (vec![p], None),
            Builtin::Print(s) => (vec![IrType::scalar(*s)], None),
            Builtin::Exit => (vec![IrType::I32], None),
            Builtin::RandUniform(k) => (vec![], Some(kind_type(*k))),
            Builtin::Math(f) => {
                let t = kind_type(f.kind);
                (vec![t; f.op.arity()], Some(t))
            }
            Builtin::ExplicitCheck(k) => (vec![kind_type(*k)], None),
            Builtin::Resume(k) => (vec![kind_type(*k)], Some(kind_type(*k))),
            Builtin::DumpShadowMem => (vec![p, IrType::I64], None),
            Builtin::Hook(h) => match h {
                Hook::Check(s) => {
                    let t = IrType::scalar(*s);
                    (vec![t, sh(t), IrType::I32, p, IrType::I32], Some(sh(t)))
                }
                Hook::ShadowLoad { ty, .. } => (vec![p, *ty], Some(sh(*ty))),
                Hook::ShadowStore(t) => (vec![p, sh(*t)], None),
                Hook::SetUnknown => (vec![p, IrType::I64], None),
                Hook::CopyShadow => (vec![p, p, IrType::I64], None),
                Hook::BeginArgs => (vec![p], None),
                Hook::PushArg(t) => (vec![sh(*t)], None),
                Hook::ArgsTagIs | Hook::RetTagIs => (vec![p], Some(IrType::I1)),
                Hook::GetArg(t) => (vec![IrType::I64], Some(sh(*t))),
                Hook::EndArgs => (vec![], None),
                Hook::SetRet(t) => (vec![p, sh(*t)], None),
                Hook::GetRet(t) => (vec![], Some(sh(*t))),
                Hook::FcmpFail(t) => (vec![IrType::I32, *t, *t, sh(*t), sh(*t)], None),
                Hook::Math(name) => {
                    let f = math::lookup(name).expect("resolved math hook");
                    let t = kind_type(f.kind);
                    let mut params = vec![sh(t); f.op.arity()];
                    params.push(t);
                    (params, Some(sh(t)))
                }
                Hook::ExtendResumed(t) => (vec![*t], Some(sh(*t))),
            },
        }
    }
}

/// Names of the builtins callable from application code.
pub fn application_builtins() -> Vec<&'static str> {
    let mut v = vec![
        "malloc",
        "free",
        "print_f32",
        "print_f64",
        "print_i32",
        "print_i64",
        "exit",
        "rand_uniform_f32",
        "rand_uniform_f64",
        "__nsan_check_float",
        "__nsan_check_double",
        "__nsan_resume_float",
        "__nsan_resume_double",
        "__nsan_dump_shadow_mem",
    ];
    v.extend(math::names());
    v
}

/// 64-bit linear congruential generator (Knuth's MMIX constants).
#[derive(Clone, Debug)]
pub struct Lcg(u64);

impl Lcg {
    pub fn new(seed: u64) -> Lcg {
        Lcg(seed)
    }

    pub fn next_u64(&mut self) -> u64 {
        self.0 = self.0.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        self.0
    }

    /// Top 24 bits scaled into [0, 1).
    pub fn next_f32(&mut self) -> f32 {
        (self.next_u64() >> 40) as f32 * (1.0 / (1u64 << 24) as f32)
    }

    /// Top 53 bits scaled into [0, 1).
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }
}
