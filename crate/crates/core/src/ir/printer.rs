use std::fmt::Write;

use super::module::*;
use super::parser::float_format;
use super::types::ScalarType;
use crate::extended::softfloat::{self, Unpacked};

/// Renders one lane of a constant. Floats always use hexadecimal so that
/// printing never loses bits.
pub fn format_lane(scalar: ScalarType, bits: u128) -> String {
    if let Some(fmt) = float_format(scalar) {
        return match softfloat::unpack(fmt, bits) {
            Unpacked::Nan => format!("nan(0x{bits:x})"),
            _ => softfloat::format_hex(fmt, bits),
        };
    }
    match scalar {
        ScalarType::Ptr if bits == 0 => "null".into(),
        ScalarType::Ptr => format!("0x{bits:x}"),
        ScalarType::I1 => if bits & 1 == 1 { "true" } else { "false" }.into(),
        s => sign_extend(s, bits).to_string(),
    }
}

pub fn format_constant(c: &Constant) -> String {
    if c.ty.lanes == 1 {
        return format_lane(c.ty.scalar, c.lanes[0]);
    }
    let lanes: Vec<String> =
        c.lanes.iter().map(|&b| format!("{} {}", c.ty.scalar, format_lane(c.ty.scalar, b))).collect();
    format!("<{}>", lanes.join(", "))
}

pub fn format_value(v: &Value) -> String {
    match v {
        Value::Local(n) => format!("%{n}"),
        Value::Const(c) => format_constant(c),
        Value::FuncRef(n) => format!("@{n}"),
    }
}

fn format_loc(loc: &SourceLoc) -> String {
    let escaped = loc.file.replace('\\', "\\\\").replace('"', "\\\"");
    format!("!loc \"{escaped}\":{}:{}", loc.line, loc.column)
}

pub fn format_op(op: &Op) -> String {
    let v = format_value;
    match op {
        Op::Binary { op, ty, lhs, rhs } => format!("{} {ty} {}, {}", op.name(), v(lhs), v(rhs)),
        Op::FNeg { ty, operand } => format!("fneg {ty} {}", v(operand)),
        Op::FCmp { pred, ty, lhs, rhs } => format!("fcmp {} {ty} {}, {}", pred.name(), v(lhs), v(rhs)),
        Op::ICmp { pred, ty, lhs, rhs } => format!("icmp {} {ty} {}, {}", pred.name(), v(lhs), v(rhs)),
        Op::Cast { op, from, value, to } => format!("{} {from} {} to {to}", op.name(), v(value)),
        Op::Select { cond, ty, on_true, on_false } => {
            format!("select i1 {}, {ty} {}, {ty} {}", v(cond), v(on_true), v(on_false))
        }
        Op::ExtractElement { ty, vector, index } => format!("extractelement {ty} {}, i32 {}", v(vector), v(index)),
        Op::InsertElement { ty, vector, element, index } => format!(
            "insertelement {ty} {}, {} {}, i32 {}",
            v(vector),
            ty.scalar,
            v(element),
            v(index)
        ),
        Op::ShuffleVector { ty, lhs, rhs, mask } => {
            let m: Vec<String> = mask.iter().map(|i| i.to_string()).collect();
            format!("shufflevector {ty} {}, {ty} {}, [{}]", v(lhs), v(rhs), m.join(", "))
        }
        Op::Load { ty, ptr } => format!("load {ty}, ptr {}", v(ptr)),
        Op::Store { ty, value, ptr } => format!("store {ty} {}, ptr {}", v(value), v(ptr)),
        Op::Alloca { ty, count } => match count {
            Value::Const(c) if *c == Constant::int(ScalarType::I64, 1) => format!("alloca {ty}"),
            _ => format!("alloca {ty}, i64 {}", v(count)),
        },
        Op::PtrAdd { ptr, offset } => format!("ptradd ptr {}, i64 {}", v(ptr), v(offset)),
        Op::Call { ret, callee, args } => {
            let r = ret.map_or("void".to_string(), |t| t.to_string());
            let a: Vec<String> = args.iter().map(|(t, x)| format!("{t} {}", v(x))).collect();
            format!("call {r} @{callee}({})", a.join(", "))
        }
        Op::Br { target } => format!("br label %{target}"),
        Op::CondBr { cond, on_true, on_false } => {
            format!("br i1 {}, label %{on_true}, label %{on_false}", v(cond))
        }
        Op::Phi { ty, incoming } => {
            let inc: Vec<String> = incoming.iter().map(|(x, bb)| format!("[{}, %{bb}]", v(x))).collect();
            format!("phi {ty} {}", inc.join(", "))
        }
        Op::Ret { value: None } => "ret void".into(),
        Op::Ret { value: Some((t, x)) } => format!("ret {t} {}", v(x)),
        Op::Memcpy { dst, src, len } => format!("memcpy ptr {}, ptr {}, i64 {}", v(dst), v(src), v(len)),
        Op::Memset { dst, byte, len } => format!("memset ptr {}, i8 {}, i64 {}", v(dst), v(byte), v(len)),
        Op::Unreachable => "unreachable".into(),
    }
}

pub fn format_instruction(inst: &Instruction) -> String {
    let mut s = String::new();
    if let Some(r) = &inst.result {
        let _ = write!(s, "%{r} = ");
    }
    s.push_str(&format_op(&inst.op));
    if let Some(loc) = &inst.loc {
        s.push(' ');
        s.push_str(&format_loc(loc));
    }
    s
}

pub fn print_function(f: &Function, out: &mut String) {
    let ret = f.ret.map_or("void".to_string(), |t| t.to_string());
    if f.is_external() {
        let params: Vec<String> = f.params.iter().map(|p| p.ty.to_string()).collect();
        let _ = write!(out, "declare {ret} @{}({})", f.name, params.join(", "));
        if f.is_noinstrument() {
            out.push_str(" noinstrument");
        }
        out.push('\n');
        return;
    }
    let params: Vec<String> = f.params.iter().map(|p| format!("{} %{}", p.ty, p.name)).collect();
    let _ = write!(out, "define {ret} @{}({})", f.name, params.join(", "));
    for a in &f.attrs {
        let _ = write!(out, " {}", a.name());
    }
    if let Some(loc) = &f.loc {
        let _ = write!(out, " {}", format_loc(loc));
    }
    out.push_str(" {\n");
    for b in &f.blocks {
        let _ = writeln!(out, "{}:", b.label);
        for i in &b.insts {
            let _ = writeln!(out, "  {}", format_instruction(i));
        }
    }
    out.push_str("}\n");
}

pub fn print_module(m: &Module) -> String {
    let mut out = String::new();
    if m.instrumented {
        out.push_str("flag nsan_instrumented\n\n");
    }
    for (i, f) in m.functions.iter().enumerate() {
        if i > 0 && !(f.is_external() && m.functions[i - 1].is_external()) {
            out.push('\n');
        }
        print_function(f, &mut out);
    }
    out
}
