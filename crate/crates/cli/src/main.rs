mod relexpr;

use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};
use demonic_core::counterexamples::{enumerate_small, gen_sn, GenerateError, ENUMERATE_CAP};
use demonic_core::decision::{decide_with, Certificate, DecisionError};
use demonic_core::oracle::{brute_force_represent, law_suite, OracleError, OracleLimits, BASE_CEILING};
use demonic_core::predicates::{compute_fixpoint_with, explain, parse_fact, FixpointError, FixpointOptions};
use demonic_core::relcore::Relation;
use demonic_core::repbuilder::{export_dot, verify, Representation};
use demonic_core::structure::{parse_structure, serialize_structure, validate, FinStructure};
use rayon::prelude::*;
use serde::Deserialize;
use serde_json::{json, Value};

use crate::relexpr::{eval_relexpr, Value as ExprValue};

/// `println!` that exits quietly when stdout is closed (e.g. piped into `head`).
macro_rules! out {
    ($($arg:tt)*) => {{
        use std::io::Write as _;
        if writeln!(std::io::stdout().lock(), $($arg)*).is_err() {
            std::process::exit(0);
        }
    }};
}

/// `print!` counterpart of [`out!`].
macro_rules! out_raw {
    ($($arg:tt)*) => {{
        use std::io::Write as _;
        if write!(std::io::stdout().lock(), $($arg)*).is_err() {
            std::process::exit(0);
        }
    }};
}

const EXIT_INTERNAL: u8 = 1;
const EXIT_NEGATIVE: u8 = 2;
const EXIT_INVALID: u8 = 3;
const EXIT_RESOURCE: u8 = 4;
const EXIT_USAGE: u8 = 64;

/// Decide representability of finite (≤, ∘) structures by demonic relations.
///
/// Exit codes: 0 success, 1 internal error, 2 negative result, 3 invalid
/// input, 4 resource limit, 64 usage error.
#[derive(Parser, Debug)]
#[command(name = "demonic", version)]
struct Cli {
    /// Machine-readable JSON output.
    #[arg(long, global = true)]
    json: bool,
    /// Memory budget for the fixpoint tables in MB (overrides DEMONIC_MEM_MB).
    #[arg(long, global = true, value_name = "MB")]
    mem_mb: Option<u64>,
    /// TOML config file; keys: `mem_mb`, `json`.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Check the partial-order and associativity laws.
    Validate { structure: PathBuf },
    /// Decide representability and print a certificate.
    Check { structure: PathBuf },
    /// Build and verify an explicit representation.
    Represent {
        structure: PathBuf,
        #[arg(short, long)]
        output: Option<PathBuf>,
        /// Also write a Graphviz rendering.
        #[arg(long, value_name = "FILE")]
        dot: Option<PathBuf>,
    },
    /// Check a representation file against a structure.
    Verify { structure: PathBuf, representation: PathBuf },
    /// Emit the non-representable structure S_n.
    GenSn {
        n: u32,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// List all small structures as JSON lines, optionally classified.
    Enumerate {
        #[arg(long, default_value_t = ENUMERATE_CAP)]
        max_size: usize,
        #[arg(long)]
        classify: bool,
        /// Keep every labeling instead of one per isomorphism class.
        #[arg(long)]
        all_labelings: bool,
    },
    /// Print the stabilised predicates with their first stages.
    Stages {
        structure: PathBuf,
        /// A single fact, `a◀b` / `a<<b` or `a◁[s]b` / `a<|[s]b`.
        #[arg(long)]
        fact: Option<String>,
        /// Print a derivation for `--fact`.
        #[arg(long, requires = "fact")]
        explain: bool,
    },
    /// Exhaustively search for a small concrete representation (exit 2 if none found).
    Oracle {
        structure: PathBuf,
        #[arg(long, default_value_t = 3)]
        max_base: usize,
        #[arg(long, default_value_t = 3)]
        max_elements: usize,
    },
    /// Randomized check of the relation laws.
    Laws {
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 1000)]
        trials: usize,
        #[arg(long, default_value_t = 6)]
        max_base: usize,
    },
    /// Evaluate a relation expression, e.g. `R;S <<= T |_| S`.
    Eval {
        expr: String,
        /// JSON object mapping names to `{"base": n, "pairs": [[x, y], ...]}`.
        #[arg(long, value_name = "FILE")]
        env: Option<PathBuf>,
    },
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct Config {
    mem_mb: Option<u64>,
    json: Option<bool>,
}

/// A failed command: exit code plus message for stderr.
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn new(code: u8, message: impl Display) -> Self {
        Failure { code, message: message.to_string() }
    }
}

type Outcome = Result<u8, Failure>;

struct Ctx {
    json: bool,
    opts: FixpointOptions,
}

impl Ctx {
    fn from_cli(cli: &Cli) -> Result<Ctx, Failure> {
        let config = match &cli.config {
            Some(path) => {
                let text = read(path)?;
                toml::from_str::<Config>(&text)
                    .map_err(|e| Failure::new(EXIT_INVALID, format!("{}: {e}", path.display())))?
            }
            None => Config::default(),
        };
        let env_mb = match std::env::var("DEMONIC_MEM_MB") {
            Ok(v) => Some(
                v.trim()
                    .parse::<u64>()
                    .map_err(|_| Failure::new(EXIT_USAGE, format!("DEMONIC_MEM_MB must be an integer, got `{v}`")))?,
            ),
            Err(_) => None,
        };
        let mem_mb = cli.mem_mb.or(env_mb).or(config.mem_mb);
        Ok(Ctx {
            json: cli.json || config.json.unwrap_or(false),
            opts: FixpointOptions { mem_limit_bytes: mem_mb.map(|mb| mb.saturating_mul(1 << 20)) },
        })
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| Failure::new(EXIT_INVALID, format!("{}: {e}", path.display())))
}

fn write(path: &Path, text: &str) -> Result<(), Failure> {
    std::fs::write(path, text).map_err(|e| Failure::new(EXIT_INTERNAL, format!("{}: {e}", path.display())))
}

fn load_structure(path: &Path) -> Result<FinStructure, Failure> {
    parse_structure(&read(path)?).map_err(|e| Failure::new(EXIT_INVALID, format!("{}: {e}", path.display())))
}

fn load_json(path: &Path) -> Result<Value, Failure> {
    serde_json::from_str(&read(path)?).map_err(|e| Failure::new(EXIT_INVALID, format!("{}: {e}", path.display())))
}

fn fixpoint_failure(e: FixpointError) -> Failure {
    Failure::new(EXIT_RESOURCE, e)
}

fn decision_failure(e: DecisionError) -> Failure {
    match e {
        DecisionError::Fixpoint(f) => fixpoint_failure(f),
        internal => Failure::new(EXIT_INTERNAL, internal),
    }
}

fn print_json(v: &Value) {
    out!("{}", serde_json::to_string_pretty(v).expect("JSON values serialize"));
}

fn certificate_code(cert: &Certificate) -> u8 {
    match cert {
        Certificate::Representable { .. } => 0,
        Certificate::NotRepresentable { .. } => EXIT_NEGATIVE,
        Certificate::InvalidStructure { .. } => EXIT_INVALID,
    }
}

fn describe(cert: &Certificate, s: &FinStructure) -> String {
    match cert {
        Certificate::Representable { representation } => {
            format!("representable (base of size {})", representation.base_size())
        }
        Certificate::NotRepresentable { a, b, black_derivation, tri_derivation, min_violated_stage } => format!(
            "not representable: {a} ≤ {b} fails although {b}◀{a} and {a}◁[{b}]{b} hold \
             (σ first fails at stage {min_violated_stage})\n{}{}",
            black_derivation.render(s),
            tri_derivation.render(s),
            a = s.name(*a),
            b = s.name(*b),
        ),
        Certificate::InvalidStructure { diagnostics } => format!("invalid structure: {}", diagnostics.to_json(s)),
    }
}

fn cmd_validate(ctx: &Ctx, path: &Path) -> Outcome {
    let s = load_structure(path)?;
    let d = validate(&s);
    if ctx.json {
        print_json(&d.to_json(&s));
    } else if d.is_valid() {
        out!("valid");
    } else {
        out!("invalid: {}", d.to_json(&s));
    }
    Ok(if d.is_valid() { 0 } else { EXIT_INVALID })
}

fn cmd_check(ctx: &Ctx, path: &Path) -> Outcome {
    let s = load_structure(path)?;
    let cert = decide_with(&s, &ctx.opts).map_err(decision_failure)?;
    if ctx.json {
        print_json(&cert.to_json(&s));
    } else {
        out!("{}", describe(&cert, &s).trim_end());
    }
    Ok(certificate_code(&cert))
}

fn cmd_represent(ctx: &Ctx, path: &Path, output: Option<&Path>, dot: Option<&Path>) -> Outcome {
    let s = load_structure(path)?;
    let cert = decide_with(&s, &ctx.opts).map_err(decision_failure)?;
    let Certificate::Representable { representation } = &cert else {
        if ctx.json {
            print_json(&cert.summary(&s));
        } else {
            eprintln!("{}", describe(&cert, &s).trim_end());
        }
        return Ok(certificate_code(&cert));
    };
    let text = serde_json::to_string_pretty(&representation.to_json()).expect("JSON values serialize") + "\n";
    match output {
        Some(p) => write(p, &text)?,
        None => out_raw!("{text}"),
    }
    if let Some(p) = dot {
        write(p, &export_dot(representation))?;
    }
    Ok(0)
}

fn cmd_verify(ctx: &Ctx, structure: &Path, rep: &Path) -> Outcome {
    let s = load_structure(structure)?;
    let rep = Representation::from_json(&load_json(rep)?, &s).map_err(|e| Failure::new(EXIT_INVALID, e))?;
    let report = verify(&s, &rep).map_err(|e| Failure::new(EXIT_INVALID, e))?;
    if ctx.json {
        print_json(&json!({ "passed": report.passed(), "failures": report.render(&s).lines().collect::<Vec<_>>() }));
    } else if report.passed() {
        out!("verified");
    } else {
        out!("{}", report.render(&s).trim_end());
    }
    Ok(if report.passed() { 0 } else { EXIT_NEGATIVE })
}

fn cmd_gen_sn(n: u32, output: Option<&Path>) -> Outcome {
    let s = gen_sn(n).map_err(|e| Failure::new(EXIT_RESOURCE, e))?;
    let text = serialize_structure(&s);
    match output {
        Some(p) => write(p, &text)?,
        None => out_raw!("{text}"),
    }
    Ok(0)
}

fn cmd_enumerate(ctx: &Ctx, max_size: usize, classify: bool, all_labelings: bool) -> Outcome {
    let structures: Vec<FinStructure> = enumerate_small(max_size, !all_labelings)
        .map_err(|e: GenerateError| Failure::new(EXIT_RESOURCE, e))?
        .collect();
    let lines: Vec<(String, bool)> = structures
        .par_iter()
        .map(|s| {
            let structure: Value = serde_json::from_str(&serialize_structure(s)).expect("serialized JSON parses");
            if !classify {
                return (json!({ "structure": structure }).to_string(), false);
            }
            match decide_with(s, &ctx.opts) {
                Ok(cert) => (json!({ "structure": structure, "certificate": cert.summary(s) }).to_string(), false),
                Err(e) => (
                    json!({ "structure": structure, "certificate": { "status": "internal_error", "message": e.to_string() } })
                        .to_string(),
                    true,
                ),
            }
        })
        .collect();
    let mut failed = false;
    for (line, bad) in lines {
        out!("{line}");
        failed |= bad;
    }
    Ok(if failed { EXIT_INTERNAL } else { 0 })
}

fn cmd_stages(ctx: &Ctx, path: &Path, fact: Option<&str>, want_explain: bool) -> Outcome {
    let s = load_structure(path)?;
    let d = validate(&s);
    if !d.is_valid() {
        return Err(Failure::new(EXIT_INVALID, format!("invalid structure: {}", d.to_json(&s))));
    }
    let fp = compute_fixpoint_with(&s, &ctx.opts).map_err(fixpoint_failure)?;
    let Some(text) = fact else {
        if ctx.json {
            let black: Vec<Value> = fp
                .black_facts()
                .map(|(a, b)| json!({ "a": s.name(a), "b": s.name(b), "stage": fp.black_stage(a, b) }))
                .collect();
            let tri: Vec<Value> = fp
                .tri_facts()
                .map(|(t, a, b)| {
                    json!({ "s": s.name(t), "a": s.name(a), "b": s.name(b), "stage": fp.tri_stage(t, a, b) })
                })
                .collect();
            print_json(&json!({ "last_stage": fp.last_stage(), "black": black, "tri": tri }));
        } else {
            out!("stabilised after stage {}", fp.last_stage());
            for (a, b) in fp.black_facts() {
                out!("{}◀{}\t{}", s.name(a), s.name(b), fp.black_stage(a, b).expect("fact holds"));
            }
            for (t, a, b) in fp.tri_facts() {
                out!("{}◁[{}]{}\t{}", s.name(a), s.name(t), s.name(b), fp.tri_stage(t, a, b).expect("fact holds"));
            }
        }
        return Ok(0);
    };
    let fact = parse_fact(&s, text).map_err(|e| Failure::new(EXIT_INVALID, e))?;
    let stage = fp.stage(fact);
    let derivation = match (want_explain, stage) {
        (true, Some(_)) => Some(explain(&s, &fp, fact).map_err(|e| Failure::new(EXIT_INTERNAL, e))?),
        _ => None,
    };
    if ctx.json {
        let mut v = json!({ "fact": fact.display(&s).to_string(), "holds": stage.is_some(), "stage": stage });
        if let Some(d) = &derivation {
            v["derivation"] = d.to_json(&s);
        }
        print_json(&v);
    } else {
        match stage {
            Some(k) => out!("{} holds from stage {k}", fact.display(&s)),
            None => out!("{} does not hold", fact.display(&s)),
        }
        if let Some(d) = &derivation {
            out_raw!("{}", d.render(&s));
        }
    }
    Ok(if stage.is_some() { 0 } else { EXIT_NEGATIVE })
}

fn cmd_oracle(ctx: &Ctx, path: &Path, max_base: usize, max_elements: usize) -> Outcome {
    let s = load_structure(path)?;
    let limits = OracleLimits { max_elements, max_base };
    let found = brute_force_represent(&s, limits).map_err(|e| match e {
        OracleError::InvalidStructure(_) => Failure::new(EXIT_INVALID, e),
        _ => Failure::new(EXIT_RESOURCE, format!("{e} (base ceiling {BASE_CEILING})")),
    })?;
    let rels = |r: &[Relation]| -> Value {
        s.elements()
            .map(|a| (s.name(a).to_owned(), json!(r[a].pairs().map(|(x, y)| [x, y]).collect::<Vec<_>>())))
            .collect::<serde_json::Map<_, _>>()
            .into()
    };
    match &found {
        Some(rep) if ctx.json => print_json(&json!({ "found": true, "base_size": rep.base_size, "rels": rels(&rep.rels) })),
        Some(rep) => {
            out!("representation over a base of size {}", rep.base_size);
            for a in s.elements() {
                let pairs: Vec<String> = rep.rels[a].pairs().map(|(x, y)| format!("({x},{y})")).collect();
                out!("{} ↦ {{{}}}", s.name(a), pairs.join(","));
            }
        }
        None if ctx.json => print_json(&json!({ "found": false, "max_base": max_base })),
        None => out!("no representation with at most {max_base} points (not a proof of non-representability)"),
    }
    Ok(if found.is_some() { 0 } else { EXIT_NEGATIVE })
}

fn cmd_laws(ctx: &Ctx, seed: u64, trials: usize, max_base: usize) -> Outcome {
    let report = law_suite(seed, trials, max_base);
    let violations: Vec<Value> = report
        .violations
        .iter()
        .map(|v| json!({ "law": format!("{:?}", v.law), "trial": v.trial, "relations": v.relations }))
        .collect();
    if ctx.json {
        print_json(&json!({ "trials": report.trials, "checks": report.checks, "violations": violations }));
    } else {
        out!("{} trials, {} checks, {} violations", report.trials, report.checks, report.violations.len());
        for v in &violations {
            out!("{v}");
        }
    }
    Ok(if report.violations.is_empty() { 0 } else { EXIT_NEGATIVE })
}

fn cmd_eval(ctx: &Ctx, expr: &str, env_path: Option<&Path>) -> Outcome {
    let env: BTreeMap<String, Relation> = match env_path {
        Some(p) => serde_json::from_str(&read(p)?).map_err(|e| Failure::new(EXIT_INVALID, format!("{}: {e}", p.display())))?,
        None => BTreeMap::new(),
    };
    let value = eval_relexpr(&env, expr).map_err(|e| Failure::new(EXIT_INVALID, e))?;
    match (&value, ctx.json) {
        (ExprValue::Rel(r), true) => print_json(&json!({ "relation": r })),
        (ExprValue::Bool(b), true) => print_json(&json!({ "value": b })),
        (v, false) => out!("{v}"),
    }
    Ok(0)
}

fn run(cli: &Cli) -> Outcome {
    let ctx = Ctx::from_cli(cli)?;
    match &cli.command {
        Command::Validate { structure } => cmd_validate(&ctx, structure),
        Command::Check { structure } => cmd_check(&ctx, structure),
        Command::Represent { structure, output, dot } => {
            cmd_represent(&ctx, structure, output.as_deref(), dot.as_deref())
        }
        Command::Verify { structure, representation } => cmd_verify(&ctx, structure, representation),
        Command::GenSn { n, output } => cmd_gen_sn(*n, output.as_deref()),
        Command::Enumerate { max_size, classify, all_labelings } => {
            cmd_enumerate(&ctx, *max_size, *classify, *all_labelings)
        }
        Command::Stages { structure, fact, explain } => cmd_stages(&ctx, structure, fact.as_deref(), *explain),
        Command::Oracle { structure, max_base, max_elements } => cmd_oracle(&ctx, structure, *max_base, *max_elements),
        Command::Laws { seed, trials, max_base } => cmd_laws(&ctx, *seed, *trials, *max_base),
        Command::Eval { expr, env } => cmd_eval(&ctx, expr, env.as_deref()),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(EXIT_USAGE);
        }
    };
    match run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
