use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use nsan::corpus;
use nsan::interp::{self, Outcome, RunConfig};
use nsan::ir::{self, printer::format_constant, Module};
use nsan::runtime::{self, format_warning, parse_options, parse_suppressions, RuntimeFlags};
use nsan::transform::{instrument_module, InstrumentConfig};

const EXIT_TRAP: u8 = 2;
const EXIT_USAGE: u8 = 64;
const EXIT_INPUT: u8 = 65;

#[derive(Parser, Debug)]
#[command(name = "nsan", version, about = "Numerical sanitizer for a small SSA IR")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Instrument a module and execute it, reporting numerical warnings.
    Run(RunArgs),
    /// Print the instrumented module.
    Instrument(InstrumentArgs),
    /// Parse and verify a module.
    Verify { file: PathBuf },
    /// Write the shipped example programs and manifests into a directory.
    DumpCorpus { dir: PathBuf },
}

#[derive(Args, Debug, Default)]
struct CheckArgs {
    /// Check loaded values against their stored shadows.
    #[arg(long)]
    check_loads: bool,
    /// Do not check floating-point call arguments.
    #[arg(long)]
    no_check_args: bool,
    /// Do not check that comparisons agree on shadows.
    #[arg(long)]
    no_check_fcmp: bool,
    /// Do not check stored values.
    #[arg(long)]
    no_check_stores: bool,
    /// Do not check returned values.
    #[arg(long)]
    no_check_ret: bool,
}

#[derive(Args, Debug)]
struct RunArgs {
    /// Module to run (`.nir`).
    file: PathBuf,
    #[command(flatten)]
    checks: CheckArgs,
    /// Relative tolerance for both precisions (default 1e-5).
    #[arg(long, value_name = "F")]
    rel_epsilon: Option<String>,
    /// Absolute tolerance for both precisions.
    #[arg(long, value_name = "F")]
    abs_epsilon: Option<String>,
    /// Stop at the first reported warning.
    #[arg(long)]
    halt_on_error: bool,
    /// Suppression file (`fun:`/`src:` glob rules).
    #[arg(long, value_name = "PATH")]
    suppressions: Option<PathBuf>,
    /// Process exit code when warnings were reported (0 = never fail).
    #[arg(long, value_name = "N")]
    error_exit_code: Option<u8>,
    /// Report every occurrence instead of one per site.
    #[arg(long)]
    no_dedup: bool,
    /// Seed of the `rand_uniform_*` builtins.
    #[arg(long)]
    seed: Option<u64>,
    /// Function to execute.
    #[arg(long, default_value = corpus::ENTRY)]
    entry: String,
    /// Entry argument as `<type>:<literal>`; repeat for each parameter.
    #[arg(long = "arg", value_name = "TY:LIT")]
    args: Vec<String>,
    /// Execute the module as written, without instrumentation.
    #[arg(long)]
    no_instrument: bool,
}

#[derive(Args, Debug)]
struct InstrumentArgs {
    file: PathBuf,
    #[command(flatten)]
    checks: CheckArgs,
    /// Output file instead of stdout.
    #[arg(short, long, value_name = "PATH")]
    output: Option<PathBuf>,
}

/// An error that ends the process with the given exit code.
struct Fail(u8, String);

type Res<T> = Result<T, Fail>;

fn usage(msg: impl Into<String>) -> Fail {
    Fail(EXIT_USAGE, msg.into())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Instrument(a) => cmd_instrument(a),
        Command::Verify { file } => cmd_verify(&file),
        Command::DumpCorpus { dir } => cmd_dump_corpus(&dir),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(Fail(code, msg)) => {
            eprintln!("nsan: {msg}");
            ExitCode::from(code)
        }
    }
}

fn load(path: &Path) -> Res<Module> {
    let text = fs::read_to_string(path).map_err(|e| Fail(EXIT_INPUT, format!("{}: {e}", path.display())))?;
    let m = ir::parse_module(&text).map_err(|e| Fail(EXIT_INPUT, format!("{}:{e}", path.display())))?;
    let diags = ir::verify_module(&m);
    if !diags.is_empty() {
        let lines: Vec<String> = diags.iter().map(|d| d.to_string()).collect();
        return Err(Fail(EXIT_INPUT, format!("{} does not verify:\n{}", path.display(), lines.join("\n"))));
    }
    Ok(m)
}

/// Settings that come from `NSAN_OPTIONS` and the command line.
struct Settings {
    flags: RuntimeFlags,
    checks: InstrumentConfig,
    seed: u64,
    error_exit_code: u8,
    suppressions: Option<PathBuf>,
}

impl Settings {
    fn new() -> Settings {
        Settings {
            flags: RuntimeFlags::default(),
            checks: InstrumentConfig::default(),
            seed: 1,
            error_exit_code: 0,
            suppressions: None,
        }
    }

    fn apply(&mut self, name: &str, value: &str) -> Res<()> {
        if self.flags.apply(name, value).map_err(|e| usage(e.to_string()))? {
            return Ok(());
        }
        let bad = || usage(format!("invalid value '{value}' for {name}"));
        let flag = || runtime::flags::parse_bool(value).ok_or_else(bad);
        match name.replace('-', "_").as_str() {
            "seed" => self.seed = value.parse().map_err(|_| bad())?,
            "error_exit_code" => self.error_exit_code = value.parse().map_err(|_| bad())?,
            "suppressions" => self.suppressions = Some(PathBuf::from(value)),
            "check_args" => self.checks.check_args = flag()?,
            "check_fcmp" => self.checks.check_fcmp = flag()?,
            "check_stores" => self.checks.check_stores = flag()?,
            "check_ret" => self.checks.check_ret = flag()?,
            _ => return Err(usage(format!("unknown option '{name}'"))),
        }
        Ok(())
    }

    fn apply_env(&mut self) -> Res<()> {
        if let Ok(text) = std::env::var("NSAN_OPTIONS") {
            let pairs = parse_options(&text).map_err(|e| usage(format!("NSAN_OPTIONS: {e}")))?;
            for (k, v) in pairs {
                self.apply(&k, &v).map_err(|Fail(c, m)| Fail(c, format!("NSAN_OPTIONS: {m}")))?;
            }
        }
        Ok(())
    }

    fn apply_checks(&mut self, c: &CheckArgs) {
        if c.check_loads {
            self.checks.check_loads = true;
            self.flags.check_loads = true;
        }
        self.checks.check_args &= !c.no_check_args;
        self.checks.check_fcmp &= !c.no_check_fcmp;
        self.checks.check_stores &= !c.no_check_stores;
        self.checks.check_ret &= !c.no_check_ret;
        self.checks.check_loads |= self.flags.check_loads;
    }
}

fn instrument(m: &Module, checks: &InstrumentConfig) -> Res<Module> {
    if !checks.any_checks() {
        eprintln!("nsan: warning: all checks are disabled; shadows are computed but never compared");
    }
    instrument_module(m, checks).map_err(|e| Fail(EXIT_INPUT, e.to_string()))
}

fn cmd_run(a: RunArgs) -> Res<u8> {
    let mut s = Settings::new();
    s.apply_env()?;
    if let Some(v) = &a.rel_epsilon {
        s.apply("rel_epsilon", v)?;
    }
    if let Some(v) = &a.abs_epsilon {
        s.apply("abs_epsilon", v)?;
    }
    if a.halt_on_error {
        s.flags.halt_on_error = true;
    }
    if a.no_dedup {
        s.flags.dedup = false;
    }
    if let Some(v) = a.seed {
        s.seed = v;
    }
    if let Some(v) = a.error_exit_code {
        s.error_exit_code = v;
    }
    if let Some(p) = &a.suppressions {
        s.suppressions = Some(p.clone());
    }
    s.apply_checks(&a.checks);
    s.flags.validate().map_err(|e| usage(e.to_string()))?;

    let suppressions = match &s.suppressions {
        None => Vec::new(),
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| Fail(EXIT_INPUT, format!("{}: {e}", p.display())))?;
            parse_suppressions(&text).map_err(|e| Fail(EXIT_INPUT, format!("{}: {e}", p.display())))?
        }
    };
    let mut args = Vec::new();
    for text in &a.args {
        args.push(interp::parse_arg(text).ok_or_else(|| usage(format!("cannot parse argument '{text}'")))?);
    }

    let m = load(&a.file)?;
    let m = if a.no_instrument { m } else { instrument(&m, &s.checks)? };
    let cfg = RunConfig { flags: s.flags, suppressions, seed: s.seed, max_steps: None };
    let result = interp::run(&m, &a.entry, &args, &cfg).map_err(|e| usage(e.to_string()))?;

    print!("{}", result.stdout);
    let _ = std::io::stdout().flush();
    let mut err = std::io::stderr().lock();
    let _ = err.write_all(result.stderr.as_bytes());
    for w in &result.report.warnings {
        let _ = writeln!(err, "{}", format_warning(w));
    }
    let mut code = 0;
    match &result.outcome {
        Outcome::Returned(Some(v)) => {
            let _ = writeln!(err, "nsan: @{} returned {} {}", a.entry, v.ty, format_constant(v));
        }
        Outcome::Returned(None) => {}
        Outcome::Exited(status) => {
            let _ = writeln!(err, "nsan: program called exit({status})");
        }
        Outcome::Halted => {
            let _ = writeln!(err, "nsan: halted after the first warning (halt_on_error)");
        }
        Outcome::Trapped(t) => {
            let _ = write!(err, "nsan: {t}");
            code = EXIT_TRAP;
        }
    }
    let _ = writeln!(err, "{}", result.report.summary());
    if code == 0 && !result.report.warnings.is_empty() {
        code = s.error_exit_code;
    }
    Ok(code)
}

fn cmd_instrument(a: InstrumentArgs) -> Res<u8> {
    let mut s = Settings::new();
    s.apply_env()?;
    s.apply_checks(&a.checks);
    let m = instrument(&load(&a.file)?, &s.checks)?;
    let text = ir::print_module(&m);
    match &a.output {
        Some(p) => fs::write(p, text).map_err(|e| Fail(EXIT_INPUT, format!("{}: {e}", p.display())))?,
        None => print!("{text}"),
    }
    Ok(0)
}

fn cmd_verify(file: &Path) -> Res<u8> {
    let m = load(file)?;
    let defined = m.functions.iter().filter(|f| !f.is_external()).count();
    println!("{}: ok ({defined} functions, {} declarations)", file.display(), m.functions.len() - defined);
    Ok(0)
}

fn cmd_dump_corpus(dir: &Path) -> Res<u8> {
    let io = |e: std::io::Error| Fail(EXIT_INPUT, format!("{}: {e}", dir.display()));
    fs::create_dir_all(dir).map_err(io)?;
    for p in corpus::PROGRAMS {
        fs::write(dir.join(format!("{}.nir", p.name)), p.source).map_err(io)?;
        fs::write(dir.join(format!("{}.expected", p.name)), p.manifest).map_err(io)?;
        println!("{}", dir.join(format!("{}.nir", p.name)).display());
    }
    Ok(0)
}
