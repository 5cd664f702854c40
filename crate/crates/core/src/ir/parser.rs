use std::collections::{BTreeSet, HashSet};

use super::lexer::{tokenize, Tok, Token};
use super::module::*;
use super::types::{IrType, ScalarType};
use crate::extended::softfloat::{self, Format};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{line}:{column}: {message}")]
pub struct ParseError {
    pub line: u32,
    pub column: u32,
    pub message: String,
}

impl ParseError {
    pub fn new(line: u32, column: u32, message: impl Into<String>) -> ParseError {
        ParseError { line, column, message: message.into() }
    }
}

type PResult<T> = Result<T, ParseError>;

pub fn parse_module(text: &str) -> PResult<Module> {
    let tokens = tokenize(text)?;
    Parser { tokens, pos: 0 }.module()
}

pub(crate) fn float_format(scalar: ScalarType) -> Option<Format> {
    match scalar {
        ScalarType::F32 => Some(Format::F32),
        ScalarType::F64 => Some(Format::F64),
        ScalarType::F128 => Some(Format::F128),
        _ => None,
    }
}

/// Parses one scalar literal of the given type, returning its lane bits.
pub fn parse_scalar_literal(scalar: ScalarType, text: &str) -> Option<u128> {
    if let Some(fmt) = float_format(scalar) {
        let (neg, body) = match text.strip_prefix('-') {
            Some(b) => (true, b),
            None => (false, text.strip_prefix('+').unwrap_or(text)),
        };
        if body == "inf" {
            return Some(fmt.infinity(neg));
        }
        if let Some(inner) = body.strip_prefix("nan(").and_then(|b| b.strip_suffix(')')) {
            // Payloads are bit patterns, so a set binary128 sign bit must not overflow.
            let bits = match inner.strip_prefix("0x").or_else(|| inner.strip_prefix("0X")) {
                Some(hex) => u128::from_str_radix(hex, 16).ok()?,
                None => u128::try_from(parse_int_literal(inner)?).ok()?,
            };
            let width = fmt.exp_bits + fmt.precision;
            if width < 128 && bits >> width != 0 {
                return None;
            }
            return matches!(softfloat::unpack(fmt, bits), softfloat::Unpacked::Nan).then_some(bits);
        }
        if body == "nan" {
            return Some(fmt.canonical_nan());
        }
        if body.starts_with("0x") || body.starts_with("0X") {
            return softfloat::parse_hex(fmt, text);
        }
        return softfloat::parse_decimal(fmt, text);
    }
    match scalar {
        ScalarType::I1 if text == "true" => return Some(1),
        ScalarType::I1 if text == "false" => return Some(0),
        _ => {}
    }
    let v = parse_int_literal(text)?;
    let w = scalar.bit_width();
    let (lo, hi) = (-(1i128 << (w - 1).min(126)), 1i128 << w);
    if v < lo || v >= hi {
        return None;
    }
    Some((v as u128) & lane_mask(scalar))
}

fn parse_int_literal(text: &str) -> Option<i128> {
    let (neg, body) = match text.strip_prefix('-') {
        Some(b) => (true, b),
        None => (false, text.strip_prefix('+').unwrap_or(text)),
    };
    let v = if let Some(h) = body.strip_prefix("0x").or_else(|| body.strip_prefix("0X")) {
        if h.is_empty() {
            return None;
        }
        u128::from_str_radix(h, 16).ok()?
    } else {
        if body.is_empty() || !body.bytes().all(|b| b.is_ascii_digit()) {
            return None;
        }
        body.parse::<u128>().ok()?
    };
    let v = i128::try_from(v).ok()?;
    Some(if neg { -v } else { v })
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
}

struct FnScope {
    names: HashSet<String>,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.tokens[self.pos].tok
    }

    fn peek_at(&self, n: usize) -> &Tok {
        &self.tokens[(self.pos + n).min(self.tokens.len() - 1)].tok
    }

    fn here(&self) -> (u32, u32) {
        let t = &self.tokens[self.pos];
        (t.line, t.col)
    }

    fn err<T>(&self, msg: impl Into<String>) -> PResult<T> {
        let (l, c) = self.here();
        Err(ParseError::new(l, c, msg))
    }

    fn next(&mut self) -> Tok {
        let t = self.tokens[self.pos].tok.clone();
        if self.pos + 1 < self.tokens.len() {
            self.pos += 1;
        }
        t
    }

    fn describe(t: &Tok) -> String {
        match t {
            Tok::Ident(s) => format!("'{s}'"),
            Tok::Local(s) => format!("'%{s}'"),
            Tok::Global(s) => format!("'@{s}'"),
            Tok::Number(s) => format!("'{s}'"),
            Tok::Str(s) => format!("\"{s}\""),
            Tok::Punct(c) => format!("'{c}'"),
            Tok::Eof => "end of input".into(),
        }
    }

    fn expect_punct(&mut self, c: char) -> PResult<()> {
        if *self.peek() == Tok::Punct(c) {
            self.next();
            Ok(())
        } else {
            self.err(format!("expected '{c}', found {}", Self::describe(self.peek())))
        }
    }

    fn eat_punct(&mut self, c: char) -> bool {
        if *self.peek() == Tok::Punct(c) {
            self.next();
            true
        } else {
            false
        }
    }

    fn eat_keyword(&mut self, kw: &str) -> bool {
        if matches!(self.peek(), Tok::Ident(s) if s == kw) {
            self.next();
            true
        } else {
            false
        }
    }

    fn expect_keyword(&mut self, kw: &str) -> PResult<()> {
        if self.eat_keyword(kw) {
            Ok(())
        } else {
            self.err(format!("expected '{kw}', found {}", Self::describe(self.peek())))
        }
    }

    fn ident(&mut self, what: &str) -> PResult<String> {
        match self.peek().clone() {
            Tok::Ident(s) => {
                self.next();
                Ok(s)
            }
            t => self.err(format!("expected {what}, found {}", Self::describe(&t))),
        }
    }

    fn local(&mut self) -> PResult<String> {
        match self.peek().clone() {
            Tok::Local(s) => {
                self.next();
                Ok(s)
            }
            t => self.err(format!("expected a local name, found {}", Self::describe(&t))),
        }
    }

    fn global(&mut self) -> PResult<String> {
        match self.peek().clone() {
            Tok::Global(s) => {
                self.next();
                Ok(s)
            }
            t => self.err(format!("expected a function name, found {}", Self::describe(&t))),
        }
    }

    fn number_u64(&mut self) -> PResult<u64> {
        match self.peek().clone() {
            Tok::Number(s) => match s.parse::<u64>() {
                Ok(v) => {
                    self.next();
                    Ok(v)
                }
                Err(_) => self.err(format!("expected an unsigned integer, found '{s}'")),
            },
            t => self.err(format!("expected an unsigned integer, found {}", Self::describe(&t))),
        }
    }

    fn module(mut self) -> PResult<Module> {
        let mut m = Module::default();
        let mut names = HashSet::new();
        loop {
            let (l, c) = self.here();
            match self.peek().clone() {
                Tok::Eof => break,
                Tok::Ident(kw) if kw == "flag" => {
                    self.next();
                    let f = self.ident("a module flag")?;
                    if f != "nsan_instrumented" {
                        return Err(ParseError::new(l, c, format!("unknown module flag '{f}'")));
                    }
                    m.instrumented = true;
                }
                Tok::Ident(kw) if kw == "define" || kw == "declare" => {
                    self.next();
                    let f = if kw == "define" { self.definition()? } else { self.declaration()? };
                    if !names.insert(f.name.clone()) {
                        return Err(ParseError::new(l, c, format!("duplicate function '@{}'", f.name)));
                    }
                    m.functions.push(f);
                }
                t => return self.err(format!("expected 'define' or 'declare', found {}", Self::describe(&t))),
            }
        }
        Ok(m)
    }

    fn ret_type(&mut self) -> PResult<Option<IrType>> {
        if self.eat_keyword("void") {
            Ok(None)
        } else {
            self.ty().map(Some)
        }
    }

    fn ty(&mut self) -> PResult<IrType> {
        if self.eat_punct('<') {
            let lanes = self.number_u64()?;
            self.expect_keyword("x")?;
            let s = self.scalar_ty()?;
            self.expect_punct('>')?;
            if !(2..=64).contains(&lanes) {
                return self.err("vector lane count must be between 2 and 64");
            }
            let t = IrType::vector(s, lanes as u32);
            if !t.is_well_formed() {
                return self.err(format!("{s} cannot be a vector element"));
            }
            return Ok(t);
        }
        Ok(IrType::scalar(self.scalar_ty()?))
    }

    fn scalar_ty(&mut self) -> PResult<ScalarType> {
        match self.peek().clone() {
            Tok::Ident(s) => match ScalarType::from_name(&s) {
                Some(t) => {
                    self.next();
                    Ok(t)
                }
                None => self.err(format!("unknown type '{s}'")),
            },
            t => self.err(format!("expected a type, found {}", Self::describe(&t))),
        }
    }

    fn declaration(&mut self) -> PResult<Function> {
        let ret = self.ret_type()?;
        let name = self.global()?;
        self.expect_punct('(')?;
        let mut params = Vec::new();
        if !self.eat_punct(')') {
            loop {
                params.push(self.ty()?);
                if self.eat_punct(')') {
                    break;
                }
                self.expect_punct(',')?;
            }
        }
        let mut f = Function::declaration(name, params, ret);
        if self.eat_keyword("noinstrument") {
            f.attrs.insert(FnAttr::NoInstrument);
        }
        Ok(f)
    }

    fn definition(&mut self) -> PResult<Function> {
        let ret = self.ret_type()?;
        let name = self.global()?;
        let mut scope = FnScope { names: HashSet::new() };
        self.expect_punct('(')?;
        let mut params = Vec::new();
        if !self.eat_punct(')') {
            loop {
                let ty = self.ty()?;
                let (l, c) = self.here();
                let pname = self.local()?;
                if !scope.names.insert(pname.clone()) {
                    return Err(ParseError::new(l, c, format!("duplicate SSA name '%{pname}'")));
                }
                params.push(Param { name: pname, ty });
                if self.eat_punct(')') {
                    break;
                }
                self.expect_punct(',')?;
            }
        }
        let mut attrs = BTreeSet::new();
        loop {
            if self.eat_keyword("noinstrument") {
                attrs.insert(FnAttr::NoInstrument);
            } else if self.eat_keyword("external") {
                return self.err("'external' functions are written with 'declare'");
            } else {
                break;
            }
        }
        let loc = self.opt_loc()?;
        self.expect_punct('{')?;
        let mut blocks: Vec<Block> = Vec::new();
        while !self.eat_punct('}') {
            let (l, c) = self.here();
            let label = match (self.peek().clone(), self.peek_at(1).clone()) {
                (Tok::Ident(s), Tok::Punct(':')) => {
                    self.next();
                    self.next();
                    s
                }
                (t, _) => {
                    if blocks.is_empty() {
                        return self.err(format!("expected a block label, found {}", Self::describe(&t)));
                    }
                    let inst = self.instruction(&mut scope)?;
                    blocks.last_mut().unwrap().insts.push(inst);
                    continue;
                }
            };
            if blocks.iter().any(|b| b.label == label) {
                return Err(ParseError::new(l, c, format!("duplicate block label '{label}'")));
            }
            blocks.push(Block::new(label));
        }
        if blocks.is_empty() {
            return self.err(format!("function '@{name}' has no blocks"));
        }
        Ok(Function { name, params, ret, blocks, attrs, loc })
    }

    fn opt_loc(&mut self) -> PResult<Option<SourceLoc>> {
        if !self.eat_punct('!') {
            return Ok(None);
        }
        self.expect_keyword("loc")?;
        let file = match self.next() {
            Tok::Str(s) => s,
            t => return self.err(format!("expected a file name string, found {}", Self::describe(&t))),
        };
        self.expect_punct(':')?;
        let line = self.number_u64()?;
        self.expect_punct(':')?;
        let column = self.number_u64()?;
        if line == 0 || column == 0 || line > u32::MAX as u64 || column > u32::MAX as u64 {
            return self.err("source line and column must be positive");
        }
        Ok(Some(SourceLoc { file, line: line as u32, column: column as u32 }))
    }

    fn value(&mut self, ty: IrType) -> PResult<Value> {
        let (l, c) = self.here();
        match self.peek().clone() {
            Tok::Local(s) => {
                self.next();
                Ok(Value::Local(s))
            }
            Tok::Global(s) => {
                self.next();
                if ty != IrType::PTR {
                    return Err(ParseError::new(l, c, format!("function reference '@{s}' used as {ty}")));
                }
                Ok(Value::FuncRef(s))
            }
            Tok::Ident(s) if s == "zeroinitializer" => {
                self.next();
                Ok(Value::Const(Constant::zero(ty)))
            }
            Tok::Punct('<') if ty.is_vector() => {
                self.next();
                let mut lanes = Vec::new();
                loop {
                    let s = self.scalar_ty()?;
                    if s != ty.scalar {
                        return self.err(format!("vector element type {s} does not match {ty}"));
                    }
                    lanes.push(self.scalar_literal(s)?);
                    if self.eat_punct('>') {
                        break;
                    }
                    self.expect_punct(',')?;
                }
                if lanes.len() != ty.lanes as usize {
                    return Err(ParseError::new(l, c, format!("expected {} lanes for {ty}", ty.lanes)));
                }
                Ok(Value::Const(Constant { ty, lanes }))
            }
            _ if ty.is_vector() => self.err(format!("expected a vector constant of type {ty}")),
            _ => {
                let bits = self.scalar_literal(ty.scalar)?;
                Ok(Value::Const(Constant { ty, lanes: vec![bits] }))
            }
        }
    }

    fn scalar_literal(&mut self, s: ScalarType) -> PResult<u128> {
        let (l, c) = self.here();
        let text = match self.next() {
            Tok::Ident(w) if w == "null" && s == ScalarType::Ptr => return Ok(0),
            Tok::Ident(w) if w == "nan" && *self.peek() == Tok::Punct('(') => {
                self.next();
                let inner = match self.next() {
                    Tok::Number(n) => n,
                    t => return self.err(format!("expected NaN bits, found {}", Self::describe(&t))),
                };
                self.expect_punct(')')?;
                format!("nan({inner})")
            }
            Tok::Ident(w) | Tok::Number(w) => w,
            t => return Err(ParseError::new(l, c, format!("expected a {s} literal, found {}", Self::describe(&t)))),
        };
        parse_scalar_literal(s, &text)
            .ok_or_else(|| ParseError::new(l, c, format!("invalid {s} literal '{text}'")))
    }

    fn typed_value(&mut self) -> PResult<(IrType, Value)> {
        let ty = self.ty()?;
        let v = self.value(ty)?;
        Ok((ty, v))
    }

    fn typed_value_of(&mut self, want: IrType) -> PResult<Value> {
        let (l, c) = self.here();
        let ty = self.ty()?;
        if ty != want {
            return Err(ParseError::new(l, c, format!("expected operand type {want}, found {ty}")));
        }
        self.value(ty)
    }

    fn label_ref(&mut self) -> PResult<String> {
        self.expect_keyword("label")?;
        self.local()
    }

    fn instruction(&mut self, scope: &mut FnScope) -> PResult<Instruction> {
        let (l, c) = self.here();
        let result = if let Tok::Local(name) = self.peek().clone() {
            self.next();
            self.expect_punct('=')?;
            if !scope.names.insert(name.clone()) {
                return Err(ParseError::new(l, c, format!("duplicate SSA name '%{name}'")));
            }
            Some(name)
        } else {
            None
        };
        let (ol, oc) = self.here();
        let opcode = self.ident("an opcode")?;
        let op = self.op(&opcode, ol, oc)?;
        let loc = self.opt_loc()?;
        match (&result, op.result_type()) {
            (Some(r), None) => {
                return Err(ParseError::new(l, c, format!("'{opcode}' produces no value to bind to '%{r}'")))
            }
            (None, Some(_)) if !matches!(op, Op::Call { .. }) => {
                return Err(ParseError::new(ol, oc, format!("result of '{opcode}' must be named")))
            }
            _ => {}
        }
        Ok(Instruction { result, op, loc })
    }

    fn op(&mut self, opcode: &str, ol: u32, oc: u32) -> PResult<Op> {
        if let Some(op) = BinOp::ALL.into_iter().find(|b| b.name() == opcode) {
            let ty = self.ty()?;
            let lhs = self.value(ty)?;
            self.expect_punct(',')?;
            let rhs = self.value(ty)?;
            return Ok(Op::Binary { op, ty, lhs, rhs });
        }
        if let Some(op) = CastOp::ALL.into_iter().find(|b| b.name() == opcode) {
            let (from, value) = self.typed_value()?;
            self.expect_keyword("to")?;
            let to = self.ty()?;
            return Ok(Op::Cast { op, from, value, to });
        }
        Ok(match opcode {
            "fneg" => {
                let (ty, operand) = self.typed_value()?;
                Op::FNeg { ty, operand }
            }
            "fcmp" => {
                let p = self.ident("a predicate")?;
                let pred = FPred::from_name(&p)
                    .ok_or_else(|| ParseError::new(ol, oc, format!("unknown fcmp predicate '{p}'")))?;
                let ty = self.ty()?;
                let lhs = self.value(ty)?;
                self.expect_punct(',')?;
                let rhs = self.value(ty)?;
                Op::FCmp { pred, ty, lhs, rhs }
            }
            "icmp" => {
                let p = self.ident("a predicate")?;
                let pred = IPred::from_name(&p)
                    .ok_or_else(|| ParseError::new(ol, oc, format!("unknown icmp predicate '{p}'")))?;
                let ty = self.ty()?;
                let lhs = self.value(ty)?;
                self.expect_punct(',')?;
                let rhs = self.value(ty)?;
                Op::ICmp { pred, ty, lhs, rhs }
            }
            "select" => {
                let cond = self.typed_value_of(IrType::I1)?;
                self.expect_punct(',')?;
                let (ty, on_true) = self.typed_value()?;
                self.expect_punct(',')?;
                let on_false = self.typed_value_of(ty)?;
                Op::Select { cond, ty, on_true, on_false }
            }
            "extractelement" => {
                let (ty, vector) = self.typed_value()?;
                self.expect_punct(',')?;
                let index = self.typed_value_of(IrType::I32)?;
                Op::ExtractElement { ty, vector, index }
            }
            "insertelement" => {
                let (ty, vector) = self.typed_value()?;
                self.expect_punct(',')?;
                let element = self.typed_value_of(IrType::scalar(ty.scalar))?;
                self.expect_punct(',')?;
                let index = self.typed_value_of(IrType::I32)?;
                Op::InsertElement { ty, vector, element, index }
            }
            "shufflevector" => {
                let (ty, lhs) = self.typed_value()?;
                self.expect_punct(',')?;
                let rhs = self.typed_value_of(ty)?;
                self.expect_punct(',')?;
                self.expect_punct('[')?;
                let mut mask = Vec::new();
                loop {
                    let v = self.number_u64()?;
                    mask.push(u32::try_from(v).map_err(|_| ParseError::new(ol, oc, "mask index too large"))?);
                    if self.eat_punct(']') {
                        break;
                    }
                    self.expect_punct(',')?;
                }
                Op::ShuffleVector { ty, lhs, rhs, mask }
            }
            "load" => {
                let ty = self.ty()?;
                self.expect_punct(',')?;
                let ptr = self.typed_value_of(IrType::PTR)?;
                Op::Load { ty, ptr }
            }
            "store" => {
                let (ty, value) = self.typed_value()?;
                self.expect_punct(',')?;
                let ptr = self.typed_value_of(IrType::PTR)?;
                Op::Store { ty, value, ptr }
            }
            "alloca" => {
                let ty = self.ty()?;
                let count = if self.eat_punct(',') {
                    self.typed_value_of(IrType::I64)?
                } else {
                    Value::Const(Constant::int(ScalarType::I64, 1))
                };
                Op::Alloca { ty, count }
            }
            "ptradd" => {
                let ptr = self.typed_value_of(IrType::PTR)?;
                self.expect_punct(',')?;
                let offset = self.typed_value_of(IrType::I64)?;
                Op::PtrAdd { ptr, offset }
            }
            "call" => {
                let ret = self.ret_type()?;
                let callee = self.global()?;
                self.expect_punct('(')?;
                let mut args = Vec::new();
                if !self.eat_punct(')') {
                    loop {
                        args.push(self.typed_value()?);
                        if self.eat_punct(')') {
                            break;
                        }
                        self.expect_punct(',')?;
                    }
                }
                Op::Call { ret, callee, args }
            }
            "br" => {
                if matches!(self.peek(), Tok::Ident(s) if s == "label") {
                    Op::Br { target: self.label_ref()? }
                } else {
                    let cond = self.typed_value_of(IrType::I1)?;
                    self.expect_punct(',')?;
                    let on_true = self.label_ref()?;
                    self.expect_punct(',')?;
                    let on_false = self.label_ref()?;
                    Op::CondBr { cond, on_true, on_false }
                }
            }
            "phi" => {
                let ty = self.ty()?;
                let mut incoming = Vec::new();
                loop {
                    self.expect_punct('[')?;
                    let v = self.value(ty)?;
                    self.expect_punct(',')?;
                    let bb = self.local()?;
                    self.expect_punct(']')?;
                    incoming.push((v, bb));
                    if !self.eat_punct(',') {
                        break;
                    }
                }
                Op::Phi { ty, incoming }
            }
            "ret" => {
                if self.eat_keyword("void") {
                    Op::Ret { value: None }
                } else {
                    Op::Ret { value: Some(self.typed_value()?) }
                }
            }
            "memcpy" => {
                let dst = self.typed_value_of(IrType::PTR)?;
                self.expect_punct(',')?;
                let src = self.typed_value_of(IrType::PTR)?;
                self.expect_punct(',')?;
                let len = self.typed_value_of(IrType::I64)?;
                Op::Memcpy { dst, src, len }
            }
            "memset" => {
                let dst = self.typed_value_of(IrType::PTR)?;
                self.expect_punct(',')?;
                let byte = self.typed_value_of(IrType::I8)?;
                self.expect_punct(',')?;
                let len = self.typed_value_of(IrType::I64)?;
                Op::Memset { dst, byte, len }
            }
            "unreachable" => Op::Unreachable,
            other => return Err(ParseError::new(ol, oc, format!("unknown opcode '{other}'"))),
        })
    }
}
