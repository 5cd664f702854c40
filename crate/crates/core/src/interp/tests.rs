use super::*;
use crate::corpus::{self, conformance, parse_manifest, run_program};
use crate::ir::parse_module;
use crate::transform::{instrument_module, InstrumentConfig};

fn run_src(src: &str, instrumented: bool) -> RunResult {
    let mut m = parse_module(src).unwrap();
    if instrumented {
        m = instrument_module(&m, &InstrumentConfig::default()).unwrap();
    }
    run(&m, "main", &[], &RunConfig::default()).unwrap()
}

#[test]
fn corpus_conforms_to_manifests() {
    let mut failures = Vec::new();
    for p in corpus::PROGRAMS {
        if p.name == "naive_sum" || p.name == "kahan_sum" {
            continue;
        }
        let r = run_program(p, Some(&InstrumentConfig::default()), &RunConfig::default()).unwrap();
        assert!(matches!(r.outcome, Outcome::Returned(_)), "{}: {:?}", p.name, r.outcome);
        for problem in conformance(&parse_manifest(p.manifest).unwrap(), &r) {
            failures.push(format!("{}: {problem}", p.name));
        }
    }
    assert!(failures.is_empty(), "{failures:#?}");
}

#[test]
fn untyped_memory_returns_the_edited_float() {
    let r = run_program(corpus::get("untyped_memory").unwrap(), Some(&InstrumentConfig::default()), &RunConfig::default())
        .unwrap();
    let expected = f32::from_bits(0x3f02_0000);
    assert_eq!(r.return_value(), Some(&Constant::f32(expected)));
}

#[test]
fn recursion_reports_every_frame() {
    let r = run_program(corpus::get("recursion").unwrap(), Some(&InstrumentConfig::default()), &RunConfig::default())
        .unwrap();
    let w = &r.report.warnings[0];
    let names: Vec<&str> = w.stack.iter().map(|f| f.function.as_str()).collect();
    assert_eq!(names, ["Rec", "Rec", "Rec", "main"]);
    assert_eq!(w.stack[0].loc.as_ref().unwrap().to_string(), "rec.cc:3:5");
    assert_eq!(w.stack[1].loc.as_ref().unwrap().to_string(), "rec.cc:5:10");
    assert_eq!(r.report.occurrences, vec![1, 2]);
}

#[test]
fn traps_carry_a_stack() {
    let src = "define i32 @f(ptr %p) { entry: %x = load i32, ptr %p !loc \"t.c\":2:3\n ret i32 %x }
define i32 @main() { entry: %r = call i32 @f(ptr null) !loc \"t.c\":5:1\n ret i32 %r }";
    let r = run_src(src, false);
    let Outcome::Trapped(t) = r.outcome else { panic!("{:?}", r.outcome) };
    assert!(t.message.contains("out-of-bounds"), "{}", t.message);
    assert_eq!(t.stack.len(), 2);
    assert_eq!(t.stack[0].function, "f");
}

#[test]
fn integer_division_by_zero_traps() {
    let r = run_src("define i32 @main() { entry: %x = sdiv i32 1, 0\n ret i32 %x }", false);
    assert!(matches!(r.outcome, Outcome::Trapped(ref t) if t.message.contains("division by zero")));
}

#[test]
fn unknown_external_traps_when_called() {
    let r = run_src("declare f32 @tanf(f32)\ndefine f32 @main() { entry: %x = call f32 @tanf(f32 1.0)\n ret f32 %x }", false);
    assert!(matches!(r.outcome, Outcome::Trapped(ref t) if t.message.contains("unknown external function '@tanf'")));
}

#[test]
fn explicit_check_on_clean_value_is_silent() {
    let src = "declare void @__nsan_check_float(f32)
define i32 @main() { entry: %x = fadd f32 1.0, 2.0\n call void @__nsan_check_float(f32 %x)\n ret i32 0 }";
    let r = run_src(src, true);
    assert!(r.report.warnings.is_empty());
    assert_eq!(r.stats.checks, 1);
}

#[test]
fn explicit_check_reports_divergence() {
    let src = "declare void @__nsan_check_float(f32)
define i32 @main() { entry: %a = fadd f32 1.5, 100000000.0\n %x = fsub f32 %a, 100000000.0\n call void @__nsan_check_float(f32 %x) !loc \"e.c\":3:3\n ret i32 0 }";
    let r = run_src(src, true);
    assert_eq!(r.report.count(CheckKind::Explicit), 1);
}

#[test]
fn resume_builtin_resets_the_shadow() {
    let src = "declare f32 @__nsan_resume_float(f32)
define f32 @main() { entry: %a = fadd f32 1.5, 100000000.0\n %x = fsub f32 %a, 100000000.0\n %y = call f32 @__nsan_resume_float(f32 %x)\n ret f32 %y }";
    let r = run_src(src, true);
    assert!(r.report.warnings.is_empty(), "{:?}", r.report.warnings);
    assert_eq!(r.report.resumed, 1);
}

#[test]
fn dump_goes_to_the_diagnostic_stream() {
    let src = "declare void @__nsan_dump_shadow_mem(ptr, i64)
define i32 @main() { entry: %p = alloca f32, i64 2\n store f32 1.0, ptr %p\n call void @__nsan_dump_shadow_mem(ptr %p, i64 8)\n ret i32 0 }";
    let r = run_src(src, true);
    assert!(r.stdout.is_empty());
    assert!(r.stderr.contains("f0 f1 f2 f3 __ __ __ __"), "{}", r.stderr);
}

#[test]
fn halt_on_error_stops_at_first_warning() {
    let mut cfg = RunConfig::default();
    cfg.flags.halt_on_error = true;
    let r = run_program(corpus::get("two_calls").unwrap(), Some(&InstrumentConfig::default()), &cfg).unwrap();
    assert_eq!(r.outcome, Outcome::Halted);
    assert_eq!(r.report.occurrences, vec![1]);
}

#[test]
fn exit_builtin_ends_the_run() {
    let r = run_src("declare void @exit(i32)\ndefine i32 @main() { entry: call void @exit(i32 3)\n ret i32 0 }", false);
    assert_eq!(r.outcome, Outcome::Exited(3));
}

#[test]
fn entry_arguments_are_type_checked() {
    let m = parse_module("define f32 @f(f32 %x) { entry: ret f32 %x }").unwrap();
    let cfg = RunConfig::default();
    assert!(matches!(run(&m, "f", &[], &cfg), Err(RunError::ArgCount { .. })));
    assert!(matches!(run(&m, "f", &[Constant::f64(1.0)], &cfg), Err(RunError::ArgType { .. })));
    let r = run(&m, "f", &[parse_arg("f32:2.5").unwrap()], &cfg).unwrap();
    assert_eq!(r.return_value(), Some(&Constant::f32(2.5)));
}

#[test]
fn step_limit_traps_infinite_loops() {
    let cfg = RunConfig { max_steps: Some(1000), ..RunConfig::default() };
    let m = parse_module("define void @main() { entry: br label %l\nl: br label %l }").unwrap();
    let r = run(&m, "main", &[], &cfg).unwrap();
    assert!(matches!(r.outcome, Outcome::Trapped(ref t) if t.message == "step limit exceeded"));
}
