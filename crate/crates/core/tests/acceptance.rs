//! Acceptance criteria. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any fails.

mod common;

use std::time::Instant;

use common::*;
use nsan::corpus;
use nsan::extended::{AppFloat, ShadowScalar, F128};
use nsan::interp::{Lcg, Outcome, RunConfig};
use nsan::ir::{Constant, IrType};
use nsan::runtime::{format_warning, CheckKind, CheckSite, RuntimeFlags, Runtime};
use nsan::transform::{instrument_module, InstrumentConfig};

type Check = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn run_corpus(name: &str) -> nsan::interp::RunResult {
    let p = corpus::get(name).expect("corpus program");
    corpus::run_program(p, Some(&InstrumentConfig::default()), &RunConfig::default()).expect("run")
}

fn returned(r: &nsan::interp::RunResult) -> Option<Constant> {
    match &r.outcome {
        Outcome::Returned(Some(c)) => Some(c.clone()),
        _ => None,
    }
}

fn as_f32(c: Constant) -> Option<f32> {
    (c.ty == IrType::F32).then(|| f32::from_bits(c.lanes[0] as u32))
}

fn as_f64(c: Constant) -> Option<f64> {
    (c.ty == IrType::F64).then(|| f64::from_bits(c.lanes[0] as u64))
}

/// Relative error of a reported value warning.
fn warning_fraction(w: &nsan::runtime::WarningEvent) -> Option<f64> {
    w.relative_error().and_then(|e| e.fraction())
}

fn relative_error_reproduction() -> Check {
    let v = nsan::extended::parse_hex_f64("0x1.a00b086c4888fp-46").unwrap();
    let s = F128::parse_hex("0x8.458cb4531bef87ap-47").unwrap();
    let mut rt = Runtime::new(RuntimeFlags::default(), Vec::new());
    let site = CheckSite { kind: CheckKind::Store, loc: None, address: Some(0x1000), lane: None };
    rt.check_value(site, AppFloat::F64(v), ShadowScalar::Ext(s), &mut Vec::new);
    let w = rt.report.warnings.first().ok_or("no warning")?;
    let text = format_warning(w);
    let truncated = text.lines().find(|l| l.starts_with("shadow truncated")).ok_or("no truncated line")?;
    ensure(truncated.ends_with("hex: 0x1.08b1968a637dfp-44"), || format!("truncated line: {truncated}"))?;
    let rel = text.lines().find_map(|l| l.strip_prefix("Relative error: ")).ok_or("no relative error line")?;
    let pct: f64 = rel.trim_end_matches('%').parse().map_err(|_| format!("bad percentage {rel}"))?;
    ensure((pct - 60.70).abs() <= 0.01, || format!("relative error {rel}"))?;
    Ok(format!("relative error {rel}"))
}

fn kahan_experiment() -> Check {
    let start = Instant::now();
    let naive = run_corpus("naive_sum");
    let kahan = run_corpus("kahan_sum");
    let elapsed = start.elapsed().as_secs_f64();

    // Exact sum of the same seeded input.
    let mut lcg = Lcg::new(RunConfig::default().seed);
    let values: Vec<f32> = (0..1_000_000).map(|_| lcg.next_f32()).collect();
    let exact = exact_sum_f32(&values).to_f64();
    let naive_value = returned(&naive).and_then(as_f32).ok_or("naive_sum returned no f32")?;
    let oracle = ((naive_value as f64 - exact) / exact).abs();

    let w = &naive.report.warnings;
    ensure(w.len() == 1, || format!("naive_sum: {} warning sites", w.len()))?;
    ensure(w[0].kind == CheckKind::Ret || w[0].kind == CheckKind::Store, || format!("naive_sum warns on {:?}", w[0].kind))?;
    let reported = warning_fraction(&w[0]).ok_or("no relative error")?;
    ensure(reported > 1e-5, || format!("naive relative error {reported:e}"))?;
    ensure((reported - oracle).abs() <= 0.01 * oracle, || format!("reported {reported:e}, exact-sum oracle {oracle:e}"))?;
    ensure(kahan.report.warnings.is_empty(), || format!("kahan_sum: {} warnings", kahan.report.warnings.len()))?;
    ensure(elapsed < 10.0, || format!("took {elapsed:.1} s"))?;
    Ok(format!("naive rel err {reported:.3e} (oracle {oracle:.3e}), kahan clean, {elapsed:.1} s"))
}

const DUMP_PROGRAM: &str = r#"
declare ptr @malloc(i64)
declare void @__nsan_dump_shadow_mem(ptr, i64)

define void @Fill(ptr %p) {
entry:
  store f32 1.0, ptr %p
  %p04 = ptradd ptr %p, i64 4
  store f64 2.0, ptr %p04
  %p20 = ptradd ptr %p, i64 32
  store f64 3.0, ptr %p20
  %p23 = ptradd ptr %p, i64 35
  store f32 4.0, ptr %p23
  %p28 = ptradd ptr %p, i64 40
  store f32 5.0, ptr %p28
  %p2c = ptradd ptr %p, i64 44
  store f32 6.0, ptr %p2c
  call void @__nsan_dump_shadow_mem(ptr %p, i64 48)
  ret void
}

define i32 @main() noinstrument {
entry:
  %p = call ptr @malloc(i64 48)
  call void @Fill(ptr %p)
  ret i32 0
}
"#;

fn shadow_type_dump() -> Check {
    let m = instrument_module(&parse(DUMP_PROGRAM), &InstrumentConfig::default()).map_err(|e| e.to_string())?;
    let r = run(&m, &RunConfig::default());
    let rows: Vec<&str> = r.stderr.lines().filter_map(|l| l.split_once(":    ").map(|(_, cells)| cells)).collect();
    ensure(rows.len() == 6, || format!("dump has {} rows:\n{}", rows.len(), r.stderr))?;
    let want = [
        (0, "f0 f1 f2 f3 d0 d1 d2 d3"),
        (4, "d0 d1 d2 f0 f1 f2 f3 d7"),
        (5, "f0 f1 f2 f3 f0 f1 f2 f3"),
    ];
    for (i, row) in want {
        ensure(rows[i] == row, || format!("row {}: '{}', expected '{row}'", i + 1, rows[i]))?;
    }
    Ok("rows 1, 5, 6 match".into())
}

fn untyped_memory_resume() -> Check {
    let r = run_corpus("untyped_memory");
    ensure(r.report.warnings.is_empty(), || format!("{} warnings", r.report.warnings.len()))?;
    ensure(r.report.resumed == 1, || format!("{} resumed events", r.report.resumed))?;
    let v = returned(&r).and_then(as_f32).ok_or("no f32 result")?;
    // 1.0f is 00 00 80 3f; byte 2 becomes 02.
    let expected = f32::from_bits(0x3f02_0000);
    ensure(v.to_bits() == expected.to_bits(), || format!("returned {v:?}, expected {expected:?}"))?;
    Ok(format!("0 warnings, 1 resumed, returned {v:?}"))
}

fn type_punning() -> Check {
    let r = run_corpus("type_punning");
    let w = &r.report.warnings;
    ensure(w.len() == 1, || format!("{} warnings", w.len()))?;
    ensure(w[0].kind == CheckKind::Store, || format!("warning kind {:?}", w[0].kind))?;
    let loc = w[0].loc.as_ref().map(|l| l.to_string()).unwrap_or_default();
    ensure(loc.contains("punning.cc:6:10"), || format!("warning at {loc}"))?;

    // d = 0.6 / 0.2 - 3 on the binary64 inputs, exactly versus natively.
    let (v, c) = (Dyadic::from_f128(F128::from_f64(0.6)), Dyadic::from_f128(F128::from_f64(0.2)));
    let exact = v.div(&c, 200).sub(&Dyadic::from_f128(F128::from_f64(3.0))).to_f64();
    let native = 0.6f64 / 0.2 - 3.0;
    let oracle = ((native - exact) / exact).abs();
    let reported = warning_fraction(&w[0]).ok_or("no relative error")?;
    ensure((reported - oracle).abs() <= 0.01 * oracle, || format!("reported {reported}, oracle {oracle}"))?;

    // After the byte flip the load must rebuild its shadow.
    ensure(r.report.resumed == 1 && r.stats.loads_extended >= 1, || {
        format!("resumed {}, extended loads {}", r.report.resumed, r.stats.loads_extended)
    })?;
    let out = returned(&r).and_then(as_f64).ok_or("no f64 result")?;
    ensure(out == -native, || format!("returned {out:e}"))?;
    Ok(format!("store warning {:.2}% (oracle {:.2}%), load re-extended", reported * 100.0, oracle * 100.0))
}

fn observable_only() -> Check {
    let r = run_corpus("equal_threshold");
    ensure(r.report.warnings.is_empty(), || format_warning(&r.report.warnings[0]))?;
    Ok("0 warnings".into())
}

fn property_suites() -> Check {
    for p in corpus::PROGRAMS {
        check_transparent(&parse(p.source), &RunConfig::default()).map_err(|e| format!("{}: {e}", p.name))?;
    }
    for seed in 0..100 {
        random_transparency(seed)?;
    }
    let scenarios = memory_exhaustive()?;
    memory_random(20_000, 7)?;
    let mut worst: f64 = 0.0;
    for op in ArithOp::ALL {
        let e = oracle_max_ulps(op, 100_000, 42);
        // 1 ulp of a 106-bit significand is 2^7 binary128 ulps.
        ensure(e <= 128.0, || format!("{op:?}: {e} binary128 ulps"))?;
        worst = worst.max(e);
    }
    for seed in 0..100 {
        random_protocol(1000 + seed)?;
    }
    Ok(format!(
        "transparency {}+100 programs, {scenarios} memory scenarios, max {worst:.2} binary128 ulps, 100 call graphs",
        corpus::PROGRAMS.len()
    ))
}

fn main() {
    type Criterion = (&'static str, fn() -> Check);
    let criteria: [Criterion; 7] = [
        ("relative-error reproduction", relative_error_reproduction),
        ("kahan experiment", kahan_experiment),
        ("shadow-type dump", shadow_type_dump),
        ("untyped-memory resume", untyped_memory_resume),
        ("type-punning correctness", type_punning),
        ("observable-only checking", observable_only),
        ("property suites", property_suites),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        match check() {
            Ok(detail) => println!("PASS {} {name}: {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL {} {name}: {why}", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
