mod expr;
mod input;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use ramsey_core::algebra::Signature;
use ramsey_core::galvin::{
    build_fr_field, galvin_construct, FrChainField, FrFieldOptions, GalvinOptions, Verdict,
};
use ramsey_core::reduction::{find_reduction, fr_enumerate, fr_member};
use ramsey_core::search::{
    probe_degeneracy, search_iterated, search_monochromatic, IteratedOutcome, SearchBudget,
    SearchOutcome,
};
use ramsey_core::sets::{
    check_admissible_sampled, closure_enumerate, term_member, ClosureOptions, Constructor, Family,
    OracleTable, SamplingPlan, SetTerm, SymSet,
};
use ramsey_core::ultrafilter::Ultrafilter;

const SCHEMA_VERSION: u32 = 1;

#[derive(Parser, Debug)]
#[command(name = "ramsey", version, about = "Finite reductions, Ramsey searches and ultrafilter calculus")]
struct Cli {
    /// Indent JSON output.
    #[arg(long, global = true)]
    pretty: bool,
    /// Write a run manifest to this path.
    #[arg(long, global = true, value_name = "PATH")]
    manifest_out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Search for a reduction whose finite reductions are monochromatic.
    Search(SearchArgs),
    /// Iterated search over several colorings, one per tail.
    IteratedSearch(IteratedArgs),
    /// Find a reduction of one finite sequence to another.
    Reduction(ReductionArgs),
    /// Enumerate finite reductions, or decide membership.
    Fr(FrArgs),
    /// Enumerate the bounded closure of some generators.
    Closure(ClosureArgs),
    /// Sampled admissibility check of a family.
    AdmissibleCheck(AdmissibleArgs),
    /// Ultrafilter expressions.
    Uf {
        #[command(subcommand)]
        command: UfCommand,
    },
    /// Build a sequence whose finite reductions lie in a member set.
    Galvin(GalvinArgs),
    /// Build and check a chain field.
    Frfield(FrfieldArgs),
    /// Search for reductions with few finite-reduction values.
    ProbeDegeneracy(ProbeArgs),
    /// Re-run a manifest and compare digests.
    Replay(ReplayArgs),
}

#[derive(Subcommand, Debug)]
enum UfCommand {
    /// Evaluate an expression.
    Eval {
        #[arg(long)]
        expr: String,
    },
}

#[derive(Args, Debug, Clone)]
struct BudgetArgs {
    /// Length of the reduction sought.
    #[arg(long)]
    length: usize,
    /// Bound on every finite-reduction value.
    #[arg(long)]
    bound: u64,
    #[arg(long, default_value_t = 3)]
    depth: usize,
    #[arg(long, default_value_t = 200_000)]
    nodes: usize,
    #[arg(long, default_value_t = 24)]
    window: usize,
    #[arg(long, default_value_t = 4)]
    max_block: usize,
}

impl BudgetArgs {
    fn budget(&self) -> SearchBudget {
        SearchBudget {
            term_depth: self.depth,
            node_limit: self.nodes,
            seed_window: self.window,
            max_block: self.max_block,
            ..SearchBudget::new(self.length, self.bound)
        }
    }
}

#[derive(Args, Debug)]
struct SearchArgs {
    #[arg(long, default_value = "plus")]
    sig: String,
    /// Seed sequence: JSON, a file, or powers2 | powers3 | naturals.
    #[arg(long, default_value = "naturals")]
    seed: String,
    /// Coloring: JSON, a file, or parity | single | mod<k>.
    #[arg(long, default_value = "parity")]
    coloring: String,
    /// Colorings for an iterated search instead.
    #[arg(long)]
    iterated: Option<String>,
    /// Searches are always deterministic; accepted for scripts that pass it.
    #[arg(long)]
    deterministic: bool,
    #[command(flatten)]
    budget: BudgetArgs,
}

#[derive(Args, Debug)]
struct IteratedArgs {
    #[arg(long, default_value = "plus")]
    sig: String,
    #[arg(long, default_value = "naturals")]
    seed: String,
    #[arg(long)]
    colorings: String,
    /// Extra length per remaining stage; defaults to the length.
    #[arg(long)]
    slack: Option<usize>,
    #[command(flatten)]
    budget: BudgetArgs,
}

#[derive(Args, Debug)]
struct ReductionArgs {
    #[arg(long)]
    a: String,
    #[arg(long)]
    b: String,
    #[arg(long, default_value = "plus")]
    sig: String,
    #[arg(long, default_value_t = 4)]
    depth: usize,
}

#[derive(Args, Debug)]
struct FrArgs {
    #[arg(long)]
    seq: String,
    #[arg(long, default_value = "plus")]
    sig: String,
    /// Term depth; defaults to the number of entries used.
    #[arg(long)]
    depth: Option<usize>,
    /// Entries taken from an infinite sequence.
    #[arg(long, default_value_t = 8)]
    prefix: usize,
    /// Decide membership of this value instead of enumerating.
    #[arg(long)]
    member: Option<u64>,
    #[arg(long, default_value_t = 0)]
    tail: usize,
}

#[derive(Args, Debug)]
struct ClosureArgs {
    #[arg(long, default_value = "plus")]
    sig: String,
    /// Built-in generators, e.g. evens,diagonal.
    #[arg(long, default_value = "")]
    generators: String,
    #[arg(long, default_value_t = 1)]
    depth: usize,
    /// Allowed dimensions, comma separated.
    #[arg(long, default_value = "1")]
    dims: String,
    #[arg(long)]
    boolean_only: bool,
    #[arg(long, default_value_t = 1)]
    singleton_bound: u64,
    /// Print at most this many members.
    #[arg(long)]
    limit: Option<usize>,
}

#[derive(Args, Debug)]
struct AdmissibleArgs {
    /// finite-cofinite | generated | chain
    #[arg(long, default_value = "finite-cofinite")]
    family: String,
    #[arg(long, default_value = "plus")]
    sig: String,
    #[arg(long, default_value = "")]
    generators: String,
    /// Chain sequence for the chain family.
    #[arg(long, default_value = "powers2")]
    seq: String,
    #[arg(long, default_value_t = 2)]
    depth: usize,
    #[arg(long, default_value = "1")]
    dims: String,
    /// Remove a constructor: boolean | cyc | fib | pre.
    #[arg(long)]
    without: Option<String>,
    #[arg(long, default_value_t = 512)]
    samples: usize,
    #[arg(long, default_value_t = 16)]
    entry_bound: u64,
    #[arg(long, env = "RAMSEY_SEED", default_value_t = 0)]
    seed: u64,
}

#[derive(Args, Debug)]
struct GalvinArgs {
    /// cofinite | p<c> | ultrafilter JSON (including fr-chain).
    #[arg(long, default_value = "cofinite")]
    uf: String,
    #[arg(long, default_value = "plus")]
    op: String,
    /// Points to avoid: a..b, a comma list, or a JSON array.
    #[arg(long, conflicts_with = "set")]
    avoid: Option<String>,
    /// The member set as a set-term JSON.
    #[arg(long)]
    set: Option<String>,
    #[arg(long)]
    length: usize,
    #[arg(long, default_value_t = 1_000_000)]
    scan_cap: u64,
}

#[derive(Args, Debug)]
struct FrfieldArgs {
    #[arg(long, default_value = "powers2")]
    seq: String,
    #[arg(long, default_value = "plus")]
    sig: String,
    #[arg(long, default_value_t = 3)]
    depth: usize,
    /// Run the field checks.
    #[arg(long)]
    check: bool,
    #[arg(long, default_value_t = 2)]
    closure_depth: usize,
    #[arg(long, default_value_t = 512)]
    samples: usize,
    #[arg(long, default_value_t = 4000)]
    pairs: usize,
    #[arg(long, default_value_t = 3)]
    tails: usize,
    #[arg(long, env = "RAMSEY_SEED", default_value_t = 0)]
    seed: u64,
}

#[derive(Args, Debug)]
struct ProbeArgs {
    #[arg(long, default_value = "plus")]
    sig: String,
    #[arg(long, default_value = "naturals")]
    seed: String,
    #[command(flatten)]
    budget: BudgetArgs,
}

#[derive(Args, Debug)]
struct ReplayArgs {
    #[arg(long)]
    manifest: PathBuf,
}

struct Output {
    body: Value,
    code: u8,
}

impl Output {
    fn ok(body: Value) -> Self {
        Output { body, code: 0 }
    }

    fn with_code(body: Value, code: u8) -> Self {
        Output { body, code }
    }
}

fn versioned(mut body: Value) -> Value {
    if let Some(obj) = body.as_object_mut() {
        obj.insert("version".into(), json!(SCHEMA_VERSION));
    }
    body
}

fn run(cmd: &Command) -> Result<Output> {
    match cmd {
        Command::Search(a) => search(a),
        Command::IteratedSearch(a) => {
            let mut budget = a.budget.budget();
            if let Some(s) = a.slack {
                budget.stage_slack = s;
            }
            iterated(&a.sig, &a.seed, &a.colorings, &budget)
        }
        Command::Reduction(a) => reduction(a),
        Command::Fr(a) => fr(a),
        Command::Closure(a) => closure(a),
        Command::AdmissibleCheck(a) => admissible(a),
        Command::Uf { command: UfCommand::Eval { expr } } => {
            let mut trace = Vec::new();
            let value = expr::eval(&input::load(expr)?, &mut trace)?;
            Ok(Output::ok(json!({ "result": value.to_json(), "trace": trace })))
        }
        Command::Galvin(a) => galvin(a),
        Command::Frfield(a) => frfield(a),
        Command::ProbeDegeneracy(a) => probe(a),
        Command::Replay(a) => replay(a),
    }
}

fn search(a: &SearchArgs) -> Result<Output> {
    let budget = a.budget.budget();
    if let Some(cols) = &a.iterated {
        return iterated(&a.sig, &a.seed, cols, &budget);
    }
    let sig = input::signature(&a.sig)?;
    let seed = input::sequence(&a.seed)?;
    let coloring = input::coloring(&a.coloring, budget.value_bound)?;
    let out = search_monochromatic(&sig, &seed, &coloring, &budget)?;
    let code = u8::from(matches!(out, SearchOutcome::BudgetExhausted { .. }));
    Ok(Output::with_code(out.to_json(), code))
}

fn iterated(sig: &str, seed: &str, cols: &str, budget: &SearchBudget) -> Result<Output> {
    let sig = input::signature(sig)?;
    let seed = input::sequence(seed)?;
    let colorings = input::colorings(cols, budget.value_bound)?;
    let out = search_iterated(&sig, &seed, &colorings, budget)?;
    let code = u8::from(matches!(out, IteratedOutcome::BudgetExhausted { .. }));
    Ok(Output::with_code(out.to_json(), code))
}

fn reduction(a: &ReductionArgs) -> Result<Output> {
    let sig = input::signature(&a.sig)?;
    let x = input::values(&a.a)?;
    let y = input::values(&a.b)?;
    Ok(Output::ok(match find_reduction(&x, &y, &sig, a.depth) {
        Some(w) => json!({ "reduces": true, "witness": w.to_json() }),
        None => json!({ "reduces": false }),
    }))
}

fn fr(a: &FrArgs) -> Result<Output> {
    let sig = input::signature(&a.sig)?;
    let seq = input::sequence(&a.seq)?;
    if let Some(x) = a.member {
        let member = fr_member(x, &seq, a.tail, &sig)?;
        return Ok(Output::ok(json!({ "value": x, "tail": a.tail, "member": member })));
    }
    let n = seq.known_len().unwrap_or(a.prefix);
    let values = seq.take(n)?;
    let values = values.get(a.tail..).unwrap_or_default();
    let depth = a.depth.unwrap_or(values.len().max(1));
    Ok(Output::ok(json!({ "fr": fr_enumerate(values, &sig, depth) })))
}

fn closure(a: &ClosureArgs) -> Result<Output> {
    let sig = input::signature(&a.sig)?;
    let oracles = input::generators(&a.generators)?;
    let opts = if a.boolean_only {
        ClosureOptions::boolean_only(a.singleton_bound)
    } else {
        ClosureOptions {
            singleton_bound: a.singleton_bound,
            ..ClosureOptions::default()
        }
    };
    let members = closure_enumerate(&oracles, &sig, a.depth, &input::dims(&a.dims)?, &opts);
    let shown: Vec<Value> = members
        .iter()
        .take(a.limit.unwrap_or(usize::MAX))
        .map(SetTerm::to_json)
        .collect();
    Ok(Output::ok(json!({ "count": members.len(), "members": shown })))
}

fn constructor(name: &str) -> Result<Constructor> {
    Ok(match name {
        "boolean" => Constructor::Boolean,
        "cyc" => Constructor::Cyc,
        "fib" => Constructor::Fib,
        "pre" => Constructor::Pre,
        other => bail!("unknown constructor `{other}`"),
    })
}

fn admissible(a: &AdmissibleArgs) -> Result<Output> {
    let sig = input::signature(&a.sig)?;
    let mut family = match a.family.as_str() {
        "finite-cofinite" => Family::finite_cofinite(sig, 60, a.seed),
        "generated" => Family::generated(
            "generated",
            sig,
            input::generators(&a.generators)?,
            a.depth,
            &input::dims(&a.dims)?,
            &ClosureOptions::default(),
        ),
        "chain" => {
            let field = FrChainField::new(input::sequence(&a.seq)?, sig.clone(), 3)?;
            Family::generated(
                "chain",
                sig,
                field.oracles(),
                a.depth,
                &input::dims(&a.dims)?,
                &ClosureOptions::default(),
            )
        }
        other => bail!("unknown family `{other}`"),
    };
    if let Some(c) = &a.without {
        family = family.without(constructor(c)?);
    }
    let plan = SamplingPlan {
        entry_bound: a.entry_bound,
        samples: a.samples,
        seed: a.seed,
    };
    let report = check_admissible_sampled(&family, &plan)?;
    let mut body = serde_json::to_value(&report)?;
    body["passed"] = json!(report.passed());
    body["members"] = json!(family.members.len());
    body["seed"] = json!(a.seed);
    Ok(Output::ok(body))
}

fn galvin(a: &GalvinArgs) -> Result<Output> {
    let u = input::ultrafilter(&a.uf)?;
    let op = input::op(&a.op)?;
    let sig = Signature::single(op.clone());
    let oracles: OracleTable = match &u {
        Ultrafilter::FrChain(f) => f.oracles(),
        _ => OracleTable::new(),
    };
    let x = match (&a.avoid, &a.set) {
        (Some(points), None) => {
            let lit = SymSet::finite(1, input::points(points)?.into_iter().map(|p| vec![p]))?;
            SetTerm::compl(SetTerm::Lit(lit))
        }
        (None, Some(t)) => input::set_term(t, &sig, &oracles)?,
        _ => bail!("give exactly one of --avoid and --set"),
    };
    let seq = galvin_construct(&u, &op, &x, &oracles, a.length, &GalvinOptions { scan_cap: a.scan_cap })?;
    let checked = seq.len().min(16);
    let fr = fr_enumerate(&seq[..checked], &sig, checked);
    let mut violations = Vec::new();
    for &v in &fr {
        if !term_member(&[v], &x, &oracles)? {
            violations.push(v);
        }
    }
    Ok(Output::ok(json!({
        "sequence": seq,
        "ultrafilter": u.to_json(),
        "verified": {
            "prefix": checked,
            "values": fr.len(),
            "violations": violations,
        },
    })))
}

fn verdict_json(v: &Verdict) -> Value {
    match v {
        Verdict::Yes => json!("yes"),
        Verdict::No => json!("no"),
        Verdict::Unknown { reason } => json!({ "unknown": reason }),
    }
}

fn frfield(a: &FrfieldArgs) -> Result<Output> {
    let seq = input::sequence(&a.seq)?;
    let sig = input::signature(&a.sig)?;
    let field = FrChainField::new(seq.clone(), sig.clone(), a.depth)?;
    if !a.check {
        let generators: Vec<Value> = (0..=a.depth)
            .map(|i| {
                let tail = seq.tail(i).take(6)?;
                Ok(json!({ "id": FrChainField::generator_id(i), "tail_prefix": tail }))
            })
            .collect::<Result<_>>()?;
        return Ok(Output::ok(json!({ "field": field.to_json(), "generators": generators })));
    }
    let opts = FrFieldOptions {
        closure_depth: a.closure_depth,
        intersection_pairs: a.pairs,
        tails: a.tails,
        plan: SamplingPlan {
            samples: a.samples,
            seed: a.seed,
            ..SamplingPlan::default()
        },
        ..FrFieldOptions::default()
    };
    let (family, u, report) = build_fr_field(seq, sig, a.depth, OracleTable::new(), &opts)?;
    let verdict = report.strong_reducibility.verdict();
    let mut body = serde_json::to_value(&report)?;
    body["passed"] = json!(report.passed());
    body["members"] = json!(family.members.len());
    body["ultrafilter"] = u.to_json();
    body["strong_reducibility"]["verdict"] = verdict_json(&verdict);
    body["strong_reducibility"]["tails"] =
        json!(report.strong_reducibility.tails.iter().map(verdict_json).collect::<Vec<_>>());
    body["seed"] = json!(a.seed);
    let code = u8::from(verdict.is_unknown());
    Ok(Output::with_code(body, code))
}

fn probe(a: &ProbeArgs) -> Result<Output> {
    let sig = input::signature(&a.sig)?;
    let seed = input::sequence(&a.seed)?;
    Ok(match probe_degeneracy(&sig, &seed, &a.budget.budget())? {
        Some(p) => Output::with_code(p.to_json(), u8::from(!p.exhaustive && p.cardinality > 1)),
        None => Output::ok(json!({ "status": "exhausted" })),
    })
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn render(body: &Value, pretty: bool) -> Result<String> {
    Ok(if pretty {
        serde_json::to_string_pretty(body)?
    } else {
        serde_json::to_string(body)?
    })
}

/// Digests of the arguments that name files, so replays notice edited inputs.
fn input_digests(argv: &[String]) -> Vec<Value> {
    argv.iter()
        .skip(1)
        .filter(|a| Path::new(a).is_file())
        .filter_map(|a| std::fs::read(a).ok().map(|bytes| json!({ "path": a, "sha256": sha256_hex(&bytes) })))
        .collect()
}

fn rng_seed(cmd: &Command) -> Option<u64> {
    match cmd {
        Command::AdmissibleCheck(a) => Some(a.seed),
        Command::Frfield(a) if a.check => Some(a.seed),
        _ => None,
    }
}

/// Drops `--manifest-out` and its value.
fn strip_manifest_flag(argv: &[String]) -> Vec<String> {
    let mut out = Vec::with_capacity(argv.len());
    let mut skip = false;
    for a in argv {
        if skip {
            skip = false;
        } else if a == "--manifest-out" {
            skip = true;
        } else if !a.starts_with("--manifest-out=") {
            out.push(a.clone());
        }
    }
    out
}

fn execute(argv: &[String]) -> Result<(Output, String)> {
    let cli = Cli::try_parse_from(argv)?;
    let mut out = run(&cli.command)?;
    out.body = versioned(out.body);
    let text = render(&out.body, cli.pretty)?;
    Ok((out, text))
}

fn replay(a: &ReplayArgs) -> Result<Output> {
    let text = std::fs::read_to_string(&a.manifest)
        .with_context(|| format!("reading {}", a.manifest.display()))?;
    let manifest: Value = serde_json::from_str(&text)?;
    let argv: Vec<String> = serde_json::from_value(
        manifest.get("command").cloned().context("manifest has no command")?,
    )?;
    if argv.get(1).map(String::as_str) == Some("replay") {
        bail!("a manifest cannot replay another replay");
    }
    let expected = manifest
        .get("results_digest")
        .and_then(Value::as_str)
        .context("manifest has no results digest")?
        .to_string();
    let recorded_inputs = manifest.get("inputs").cloned().unwrap_or(json!([]));
    let inputs_match = recorded_inputs == json!(input_digests(&argv));
    let (out, text) = execute(&argv)?;
    let actual = sha256_hex(text.as_bytes());
    let identical = inputs_match && actual == expected;
    Ok(Output::with_code(
        json!({
            "command": argv,
            "inputs_match": inputs_match,
            "expected_digest": expected,
            "actual_digest": actual,
            "identical": identical,
            "exit_code": out.code,
        }),
        u8::from(!identical),
    ))
}

fn main() -> ExitCode {
    let argv: Vec<String> = std::env::args().collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let mut recorded = strip_manifest_flag(&argv);
    if let Some(first) = recorded.first_mut() {
        *first = "ramsey".into();
    }
    let result = run(&cli.command).and_then(|mut out| {
        out.body = versioned(out.body);
        let text = render(&out.body, cli.pretty)?;
        Ok((out, text))
    });
    let (out, text) = match result {
        Ok(r) => r,
        Err(e) => {
            eprintln!("{}", json!({ "version": SCHEMA_VERSION, "error": format!("{e:#}") }));
            return ExitCode::from(2);
        }
    };
    println!("{text}");
    if let Some(path) = &cli.manifest_out {
        let manifest = json!({
            "version": SCHEMA_VERSION,
            "command": recorded,
            "inputs": input_digests(&recorded),
            "seed": rng_seed(&cli.command),
            "library_version": env!("CARGO_PKG_VERSION"),
            "results_digest": sha256_hex(text.as_bytes()),
            "exit_code": out.code,
        });
        let written = serde_json::to_string_pretty(&manifest)
            .map_err(anyhow::Error::from)
            .and_then(|s| std::fs::write(path, s + "\n").map_err(anyhow::Error::from));
        if let Err(e) = written {
            eprintln!("{}", json!({ "version": SCHEMA_VERSION, "error": format!("writing manifest: {e}") }));
            return ExitCode::from(2);
        }
    }
    ExitCode::from(out.code)
}
