//! Batch front end.
//!
//! Exit codes: 0 clean, 1 findings or regressions, 2 usage or parse error,
//! 3 internal error. Results go to stdout, diagnostics to stderr. Every
//! command is deterministic given its files and flags; `--json` output is
//! byte-identical across runs.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use bnforge_core::check_constraints;
use bnforge_core::dsl::{parse_kb_with_spans, KnowledgeBase, SourceMap};
use bnforge_core::evaluation::{
    conflict, importance, render_importance_report, report_entries, synergy_sample, EvaluationError, SynergyEntry,
    DEFAULT_CONFLICT_THRESHOLD,
};
use bnforge_core::fragments::{build_model, BuiltModel, FragmentError};
use bnforge_core::harness::{
    compare_golden, coverage, elicitation_review, generate_cases, record_golden, run_cases, HarnessError, Outcome,
    RegressionReport, ReviewFinding, RunResults, Scenario, TestCase,
};
use bnforge_core::inference::{evidence_probability, posterior, InferenceError, Marginal};
use bnforge_core::network::{CompiledNetwork, Evidence, Severity};
use bnforge_core::versioning::{content_id, diff_kb, DiffEntry};
use clap::{CommandFactory, FromArgMatches, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::formats::{read_golden, to_json, write_atomic, NetworkFile};
use crate::store::{LogEntry, Store, StoreError};

/// Environment variable naming the version-store directory.
pub const STORE_ENV: &str = "BNFORGE_STORE";
pub const DEFAULT_STORE: &str = ".bnforge";
pub const DEFAULT_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Parser)]
#[command(name = "bnforge", version, about = "Build, evaluate and version belief-network knowledge bases")]
struct Cli {
    /// Emit machine-readable JSON instead of text.
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Parse the KB, build every model and check declared constraints.
    Validate {
        /// Knowledge-base file.
        kb: PathBuf,
        /// Only this model; every model by default.
        #[arg(long)]
        model: Option<String>,
    },
    /// Compile a model to a flat network file.
    Compile {
        /// Knowledge-base file.
        kb: PathBuf,
        /// Output network file.
        #[arg(long)]
        out: PathBuf,
        /// Model to build; the first declared model by default.
        #[arg(long)]
        model: Option<String>,
    },
    /// Posterior marginals of target variables.
    Infer {
        /// Knowledge-base file.
        kb: PathBuf,
        /// Variable to report; repeatable.
        #[arg(long = "target", required = true)]
        targets: Vec<String>,
        /// Finding as VAR=STATE; repeatable.
        #[arg(long)]
        evidence: Vec<String>,
        /// Model to build; the first declared model by default.
        #[arg(long)]
        model: Option<String>,
    },
    /// Importance of each evidence variable for a focus variable.
    Importance {
        /// Knowledge-base file.
        kb: PathBuf,
        /// Variable whose posterior is scored.
        #[arg(long)]
        focus: String,
        /// Comma-separated evidence variables; all others when omitted.
        #[arg(long, value_delimiter = ',')]
        evidence: Vec<String>,
        /// Base finding as VAR=STATE; repeatable.
        #[arg(long)]
        base: Vec<String>,
        /// Model to build; the first declared model by default.
        #[arg(long)]
        model: Option<String>,
    },
    /// Sampled joint importance and synergy of evidence combinations.
    Synergy {
        /// Knowledge-base file.
        kb: PathBuf,
        /// Variable whose posterior is scored.
        #[arg(long)]
        focus: String,
        /// Size of each evidence combination.
        #[arg(long)]
        k: usize,
        /// Number of combinations to sample.
        #[arg(long)]
        samples: usize,
        /// Sampling seed.
        #[arg(long)]
        seed: u64,
        /// Comma-separated evidence variables; all others when omitted.
        #[arg(long, value_delimiter = ',')]
        evidence: Vec<String>,
        /// Base finding as VAR=STATE; repeatable.
        #[arg(long)]
        base: Vec<String>,
        /// Model to build; the first declared model by default.
        #[arg(long)]
        model: Option<String>,
    },
    /// Conflict score of a set of findings.
    Conflict {
        /// Knowledge-base file.
        kb: PathBuf,
        /// Finding as VAR=STATE; repeatable.
        #[arg(long, required = true)]
        evidence: Vec<String>,
        /// Scores above this are flagged.
        #[arg(long, default_value_t = DEFAULT_CONFLICT_THRESHOLD)]
        threshold: f64,
        /// Model to build; the first declared model by default.
        #[arg(long)]
        model: Option<String>,
    },
    /// Elicitation review lints R1 to R7.
    Review {
        /// Knowledge-base file.
        kb: PathBuf,
    },
    /// Scenario test cases and golden-record regression testing.
    Cases {
        /// gen, run, record or compare.
        action: CasesAction,
        /// Knowledge-base file.
        kb: PathBuf,
        /// Scenario declared in the KB.
        #[arg(long)]
        scenario: String,
        /// Largest absolute change that is not a regression.
        #[arg(long, default_value_t = DEFAULT_TOLERANCE)]
        tol: f64,
        /// Golden file; defaults to golden/<scenario>.json next to the KB.
        #[arg(long)]
        golden: Option<PathBuf>,
    },
    /// Record the KB as a new version in the store.
    Snapshot {
        /// Knowledge-base file.
        kb: PathBuf,
        /// One-line summary of the change.
        #[arg(short = 'm', long)]
        message: String,
        /// Why the change was made.
        #[arg(short = 'r', long)]
        rationale: String,
        /// Parent version; defaults to the last snapshot.
        #[arg(long)]
        parent: Option<String>,
    },
    /// Structural differences between two stored versions.
    Diff {
        /// Older version id or unique prefix.
        v1: String,
        /// Newer version id or unique prefix.
        v2: String,
    },
    /// Version history, parents before children.
    Log,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum CasesAction {
    Gen,
    Run,
    Record,
    Compare,
}

/// Why a command stopped early.
#[derive(Debug)]
enum Failure {
    Usage(String),
    Parse(Vec<String>),
    Findings(String),
    Internal(String),
}

impl Failure {
    fn code(&self) -> i32 {
        match self {
            Failure::Findings(_) => 1,
            Failure::Usage(_) | Failure::Parse(_) => 2,
            Failure::Internal(_) => 3,
        }
    }
}

impl From<InferenceError> for Failure {
    fn from(e: InferenceError) -> Self {
        match e {
            InferenceError::UnknownVariable(_) | InferenceError::UnknownState { .. } => Failure::Usage(e.to_string()),
            InferenceError::ZeroProbabilityEvidence => Failure::Findings(e.to_string()),
            _ => Failure::Internal(e.to_string()),
        }
    }
}

impl From<EvaluationError> for Failure {
    fn from(e: EvaluationError) -> Self {
        match e {
            EvaluationError::Inference(e) => e.into(),
            EvaluationError::ImpossibleFinding { .. } => Failure::Findings(e.to_string()),
            _ => Failure::Usage(e.to_string()),
        }
    }
}

impl From<HarnessError> for Failure {
    fn from(e: HarnessError) -> Self {
        match e {
            HarnessError::Inference(_) => Failure::Internal(e.to_string()),
            _ => Failure::Findings(e.to_string()),
        }
    }
}

impl From<StoreError> for Failure {
    fn from(e: StoreError) -> Self {
        match e {
            StoreError::UnknownVersion(_) | StoreError::AmbiguousPrefix(_) => Failure::Usage(e.to_string()),
            _ => Failure::Internal(e.to_string()),
        }
    }
}

type CmdResult = Result<i32, Failure>;

struct Ctx<'a> {
    json: bool,
    out: &'a mut dyn Write,
    err: &'a mut dyn Write,
}

impl Ctx<'_> {
    fn print(&mut self, text: &str) {
        let _ = self.out.write_all(text.as_bytes());
    }

    fn emit<T: Serialize>(&mut self, value: &T) {
        let text = to_json(value);
        self.print(&text);
    }

    fn note(&mut self, text: &str) {
        let _ = writeln!(self.err, "{text}");
    }
}

/// Runs one command line and returns the process exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let argv: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let parsed = Cli::command().try_get_matches_from(&argv).and_then(|m| Ok((Cli::from_arg_matches(&m)?, m)));
    let (cli, matches) = match parsed {
        Ok(pair) => pair,
        Err(e) => {
            use clap::error::ErrorKind;
            let text = e.render().to_string();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = out.write_all(text.as_bytes());
                    0
                }
                _ => {
                    let _ = err.write_all(text.as_bytes());
                    if !text.contains("Usage:") {
                        let _ = write!(err, "\n{}\n", Cli::command().render_usage());
                    }
                    2
                }
            };
        }
    };
    let mut ctx = Ctx { json: cli.json, out, err };
    match dispatch(cli.command, &mut ctx) {
        Ok(code) => code,
        Err(f) => {
            match &f {
                Failure::Parse(lines) => {
                    for l in lines {
                        ctx.note(l);
                    }
                }
                Failure::Usage(m) => {
                    ctx.note(&format!("error: {m}"));
                    let mut cmd = Cli::command();
                    cmd.build();
                    let usage = match matches.subcommand_name().and_then(|n| cmd.find_subcommand_mut(n)) {
                        Some(sub) => sub.render_usage(),
                        None => Cli::command().render_usage(),
                    };
                    ctx.note(&format!("\n{usage}"));
                }
                Failure::Findings(m) | Failure::Internal(m) => ctx.note(&format!("error: {m}")),
            }
            f.code()
        }
    }
}

fn dispatch(command: Command, ctx: &mut Ctx<'_>) -> CmdResult {
    match command {
        Command::Validate { kb, model } => validate(ctx, &kb, model.as_deref()),
        Command::Compile { kb, out, model } => compile(ctx, &kb, &out, model.as_deref()),
        Command::Infer { kb, targets, evidence, model } => infer(ctx, &kb, &targets, &evidence, model.as_deref()),
        Command::Importance { kb, focus, evidence, base, model } => {
            importance_cmd(ctx, &kb, &focus, &evidence, &base, model.as_deref())
        }
        Command::Synergy { kb, focus, k, samples, seed, evidence, base, model } => {
            let args = SynergyArgs { focus, k, samples, seed, evidence, base };
            synergy(ctx, &kb, &args, model.as_deref())
        }
        Command::Conflict { kb, evidence, threshold, model } => {
            conflict_cmd(ctx, &kb, &evidence, threshold, model.as_deref())
        }
        Command::Review { kb } => review(ctx, &kb),
        Command::Cases { action, kb, scenario, tol, golden } => cases(ctx, action, &kb, &scenario, tol, golden),
        Command::Snapshot { kb, message, rationale, parent } => snapshot(ctx, &kb, &message, &rationale, parent),
        Command::Diff { v1, v2 } => diff(ctx, &v1, &v2),
        Command::Log => log(ctx),
    }
}

fn load_kb(path: &Path) -> Result<(KnowledgeBase, SourceMap), Failure> {
    let text = fs::read_to_string(path).map_err(|e| Failure::Usage(format!("cannot read {}: {e}", path.display())))?;
    parse_kb_with_spans(&text, &path.display().to_string())
        .map_err(|diags| Failure::Parse(diags.iter().map(|d| format!("error: {d}")).collect()))
}

fn build(kb: &KnowledgeBase, model: Option<&str>) -> Result<BuiltModel, Failure> {
    build_model(kb, model).map_err(|e| match e {
        FragmentError::UnknownModel(_) => Failure::Usage(e.to_string()),
        _ => Failure::Findings(format!("cannot build model: {e}")),
    })
}

fn load_network(path: &Path, model: Option<&str>) -> Result<CompiledNetwork, Failure> {
    let (kb, _) = load_kb(path)?;
    Ok(build(&kb, model)?.network)
}

fn parse_evidence(items: &[String]) -> Result<Evidence, Failure> {
    let mut ev = Evidence::new();
    for item in items {
        let (var, state) = item
            .split_once('=')
            .map(|(v, s)| (v.trim(), s.trim()))
            .filter(|(v, s)| !v.is_empty() && !s.is_empty())
            .ok_or_else(|| Failure::Usage(format!("evidence `{item}` is not of the form VAR=STATE")))?;
        ev.insert(var, state).map_err(|e| Failure::Usage(e.to_string()))?;
    }
    Ok(ev)
}

fn p6(x: f64) -> String {
    format!("{x:.6}")
}

fn model_label(name: &Option<String>) -> &str {
    name.as_deref().unwrap_or("(all fragments)")
}

#[derive(Serialize)]
struct ModelCheck {
    name: Option<String>,
    variables: usize,
    content_hash: String,
    violations: Vec<String>,
}

#[derive(Serialize)]
struct ModelFailure {
    name: Option<String>,
    error: String,
}

#[derive(Serialize)]
struct ValidateOutput {
    ok: bool,
    fragments: usize,
    instances: usize,
    scenarios: usize,
    models: Vec<ModelCheck>,
    failures: Vec<ModelFailure>,
}

fn validate(ctx: &mut Ctx<'_>, path: &Path, only: Option<&str>) -> CmdResult {
    let (kb, _) = load_kb(path)?;
    let names: Vec<Option<String>> = match only {
        Some(m) => vec![Some(m.to_string())],
        None if kb.models.is_empty() => vec![None],
        None => kb.models.iter().map(|m| Some(m.name.clone())).collect(),
    };
    let mut out = ValidateOutput {
        ok: true,
        fragments: kb.fragments.len(),
        instances: kb.instances.len(),
        scenarios: kb.scenarios.len(),
        models: Vec::new(),
        failures: Vec::new(),
    };
    for name in names {
        let built = match build_model(&kb, name.as_deref()) {
            Ok(b) => b,
            Err(e @ FragmentError::UnknownModel(_)) => return Err(Failure::Usage(e.to_string())),
            Err(e) => {
                out.failures.push(ModelFailure { name, error: e.to_string() });
                continue;
            }
        };
        let report =
            check_constraints(&built.network, &built.constraints).map_err(|e| Failure::Findings(e.to_string()))?;
        out.models.push(ModelCheck {
            name,
            variables: built.network.len(),
            content_hash: built.network.content_hash(),
            violations: report.violations.iter().map(|v| v.message.clone()).collect(),
        });
    }
    out.ok = out.failures.is_empty() && out.models.iter().all(|m| m.violations.is_empty());

    if ctx.json {
        ctx.emit(&out);
    } else {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "{}: {} fragments, {} instances, {} scenarios",
            path.display(),
            out.fragments,
            out.instances,
            out.scenarios
        );
        for m in &out.models {
            let _ = writeln!(
                s,
                "model {}: {} variables, {} constraint violations",
                model_label(&m.name),
                m.variables,
                m.violations.len()
            );
            for v in &m.violations {
                let _ = writeln!(s, "  violation: {v}");
            }
        }
        for f in &out.failures {
            let _ = writeln!(s, "model {}: build failed: {}", model_label(&f.name), f.error);
        }
        let _ = writeln!(s, "{}", if out.ok { "ok" } else { "problems found" });
        ctx.print(&s);
    }
    Ok(if out.ok { 0 } else { 1 })
}

#[derive(Serialize)]
struct CompileOutput<'a> {
    model: Option<&'a str>,
    variables: usize,
    content_hash: &'a str,
    out: String,
}

fn compile(ctx: &mut Ctx<'_>, path: &Path, out_path: &Path, model: Option<&str>) -> CmdResult {
    let (kb, _) = load_kb(path)?;
    let built = build(&kb, model)?;
    let file = NetworkFile::new(&built.network, built.name.clone());
    write_atomic(out_path, &to_json(&file))
        .map_err(|e| Failure::Internal(format!("cannot write {}: {e}", out_path.display())))?;
    let summary = CompileOutput {
        model: built.name.as_deref(),
        variables: file.variables.len(),
        content_hash: &file.content_hash,
        out: out_path.display().to_string(),
    };
    if ctx.json {
        ctx.emit(&summary);
    } else {
        ctx.print(&format!(
            "compiled model {}: {} variables, hash {} -> {}\n",
            model_label(&built.name),
            summary.variables,
            summary.content_hash,
            summary.out
        ));
    }
    Ok(0)
}

#[derive(Serialize)]
struct InferOutput {
    evidence: Evidence,
    evidence_probability: f64,
    posteriors: Vec<Marginal>,
}

fn infer(ctx: &mut Ctx<'_>, path: &Path, targets: &[String], evidence: &[String], model: Option<&str>) -> CmdResult {
    let evidence = parse_evidence(evidence)?;
    let net = load_network(path, model)?;
    net.resolve_evidence(&evidence).map_err(InferenceError::from)?;
    let mut post = posterior(&net, &evidence, targets)?;
    let p = evidence_probability(&net, &evidence)?;
    let mut posteriors = Vec::new();
    for t in targets {
        if let Some(m) = post.remove(t) {
            posteriors.push(m);
        }
    }
    let out = InferOutput { evidence, evidence_probability: p, posteriors };
    if ctx.json {
        ctx.emit(&out);
    } else {
        let mut s = String::new();
        let obs = if out.evidence.is_empty() { "none".to_string() } else { out.evidence.to_string() };
        let _ = writeln!(s, "evidence: {obs}");
        let _ = writeln!(s, "P(evidence) = {}", p6(out.evidence_probability));
        for m in &out.posteriors {
            let _ = writeln!(s, "{}", m.variable);
            let width = m.states.iter().map(|x| x.chars().count()).max().unwrap_or(0);
            for (state, p) in m.states.iter().zip(&m.probabilities) {
                let _ = writeln!(s, "  {state:<width$}  {}", p6(*p));
            }
        }
        ctx.print(&s);
    }
    Ok(0)
}

/// Every variable not named in `exclude`, in network order.
fn other_variables(net: &CompiledNetwork, exclude: impl Fn(&str) -> bool) -> Vec<String> {
    net.variables().iter().map(|v| v.name.clone()).filter(|n| !exclude(n)).collect()
}

fn importance_cmd(
    ctx: &mut Ctx<'_>,
    path: &Path,
    focus: &str,
    evidence: &[String],
    base: &[String],
    model: Option<&str>,
) -> CmdResult {
    let base = parse_evidence(base)?;
    let net = load_network(path, model)?;
    let vars =
        if evidence.is_empty() { other_variables(&net, |n| n == focus || base.contains(n)) } else { evidence.to_vec() };
    let result = importance(&net, focus, &vars, &base)?;
    if ctx.json {
        ctx.emit(&report_entries(&result));
    } else {
        ctx.print(&render_importance_report(&result));
    }
    Ok(0)
}

struct SynergyArgs {
    focus: String,
    k: usize,
    samples: usize,
    seed: u64,
    evidence: Vec<String>,
    base: Vec<String>,
}

#[derive(Serialize)]
struct SynergyOutput {
    focus: String,
    base: Evidence,
    evidence: Vec<String>,
    k: usize,
    samples: usize,
    seed: u64,
    entries: Vec<SynergyEntry>,
}

fn synergy(ctx: &mut Ctx<'_>, path: &Path, a: &SynergyArgs, model: Option<&str>) -> CmdResult {
    let base = parse_evidence(&a.base)?;
    let net = load_network(path, model)?;
    let vars = if a.evidence.is_empty() {
        other_variables(&net, |n| n == a.focus || base.contains(n))
    } else {
        a.evidence.clone()
    };
    let entries = synergy_sample(&net, &a.focus, &vars, a.k, a.samples, a.seed, &base)?;
    let out = SynergyOutput {
        focus: a.focus.clone(),
        base,
        evidence: vars,
        k: a.k,
        samples: a.samples,
        seed: a.seed,
        entries,
    };
    if ctx.json {
        ctx.emit(&out);
    } else {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "Synergy for {} (k = {}, {} combinations, seed {})",
            out.focus,
            out.k,
            out.entries.len(),
            out.seed
        );
        let _ = writeln!(s, "{:>10} {:>10}  COMBINATION", "JOINT", "SYNERGY");
        for e in &out.entries {
            let _ = writeln!(s, "{:>10} {:>10}  {}", p6(e.joint), p6(e.synergy), e.combination.join(", "));
        }
        ctx.print(&s);
    }
    Ok(0)
}

#[derive(Serialize)]
struct ConflictOutput {
    evidence: Evidence,
    /// `null` when the findings are jointly impossible.
    value: f64,
    threshold: f64,
    flagged: bool,
    impossible: bool,
}

fn conflict_cmd(ctx: &mut Ctx<'_>, path: &Path, evidence: &[String], threshold: f64, model: Option<&str>) -> CmdResult {
    let evidence = parse_evidence(evidence)?;
    let net = load_network(path, model)?;
    let c = conflict(&net, &evidence, threshold)?;
    let out = ConflictOutput { evidence, value: c.value, threshold, flagged: c.flagged, impossible: c.impossible };
    if ctx.json {
        ctx.emit(&out);
    } else {
        let verdict = if out.impossible {
            "jointly impossible, flagged".to_string()
        } else if out.flagged {
            format!("{} bits, above threshold {}: flagged", p6(out.value), p6(threshold))
        } else {
            format!("{} bits, threshold {}: not flagged", p6(out.value), p6(threshold))
        };
        ctx.print(&format!("conflict for {}: {verdict}\n", out.evidence));
    }
    Ok(if out.flagged { 1 } else { 0 })
}

#[derive(Serialize)]
struct ReviewOutput {
    errors: usize,
    warnings: usize,
    infos: usize,
    findings: Vec<ReviewFinding>,
}

fn review(ctx: &mut Ctx<'_>, path: &Path) -> CmdResult {
    let (kb, spans) = load_kb(path)?;
    let findings = elicitation_review(&kb, &spans);
    let count = |s: Severity| findings.iter().filter(|f| f.severity == s).count();
    let out = ReviewOutput {
        errors: count(Severity::Error),
        warnings: count(Severity::Warning),
        infos: count(Severity::Info),
        findings,
    };
    if ctx.json {
        ctx.emit(&out);
    } else {
        let mut s = String::new();
        for f in &out.findings {
            let _ = writeln!(s, "{f}");
        }
        let _ = writeln!(s, "{} errors, {} warnings, {} info", out.errors, out.warnings, out.infos);
        ctx.print(&s);
    }
    Ok(if out.errors + out.warnings > 0 { 1 } else { 0 })
}

fn golden_path(kb: &Path, scenario: &str, explicit: Option<PathBuf>) -> PathBuf {
    explicit.unwrap_or_else(|| {
        let dir = kb.parent().unwrap_or(Path::new(""));
        dir.join("golden").join(format!("{scenario}.json"))
    })
}

/// Focus marginal states in declared order rather than map order.
fn focus_line(net: &CompiledNetwork, var: &str, probs: &std::collections::BTreeMap<String, f64>) -> String {
    let states: Vec<String> = match net.find(var) {
        Some(v) => v.states.states().to_vec(),
        None => probs.keys().cloned().collect(),
    };
    let parts: Vec<String> = states.iter().filter_map(|s| probs.get(s).map(|p| format!("{s} {}", p6(*p)))).collect();
    format!("{var}: {}", parts.join(", "))
}

#[derive(Serialize)]
struct GenOutput<'a> {
    scenario: &'a str,
    coverage: f64,
    cases: &'a [TestCase],
}

#[derive(Serialize)]
struct CompareOutput<'a> {
    scenario: &'a str,
    tol: f64,
    golden_version: &'a str,
    current_version: &'a str,
    cases: usize,
    flagged_cases: usize,
    report: &'a RegressionReport,
}

#[derive(Serialize)]
struct RecordOutput<'a> {
    scenario: &'a str,
    kb_version_id: &'a str,
    cases: usize,
    golden: String,
}

fn cases(
    ctx: &mut Ctx<'_>,
    action: CasesAction,
    path: &Path,
    name: &str,
    tol: f64,
    golden: Option<PathBuf>,
) -> CmdResult {
    if tol.is_nan() || tol < 0.0 {
        return Err(Failure::Usage(format!("tolerance {tol} must be nonnegative")));
    }
    let (kb, _) = load_kb(path)?;
    let scenario: &Scenario = kb.scenario(name).ok_or_else(|| Failure::Usage(format!("unknown scenario `{name}`")))?;
    let net = build(&kb, scenario.model.as_deref())?.network;
    let generated = generate_cases(scenario, &net)?;

    if action == CasesAction::Gen {
        let cov = coverage(scenario, &net, &generated)?;
        if ctx.json {
            ctx.emit(&GenOutput { scenario: name, coverage: cov, cases: &generated });
        } else {
            let mut s = String::new();
            for c in &generated {
                let tag = if c.unanticipated { "  (unanticipated)" } else { "" };
                let _ = writeln!(s, "case {}: {}{tag}", c.index, c.evidence);
            }
            let _ = writeln!(s, "{} cases, coverage {}", generated.len(), p6(cov));
            ctx.print(&s);
        }
        return Ok(0);
    }

    let results: RunResults = run_cases(&net, scenario, &generated)?;
    let version = content_id(&kb);
    match action {
        CasesAction::Gen => unreachable!("handled above"),
        CasesAction::Run => {
            if ctx.json {
                ctx.emit(&results);
            } else {
                let mut s = String::new();
                for c in &results.cases {
                    let tag = if c.unanticipated { "  (unanticipated)" } else { "" };
                    let _ = writeln!(s, "case {}: {}{tag}", c.index, c.evidence);
                    match &c.outcome {
                        Outcome::Impossible => {
                            let _ = writeln!(s, "  impossible");
                        }
                        Outcome::Evaluated { evidence_probability, conflict, focus } => {
                            let _ =
                                writeln!(s, "  P(evidence) {}  conflict {}", p6(*evidence_probability), p6(*conflict));
                            for (var, probs) in focus {
                                let _ = writeln!(s, "  {}", focus_line(&net, var, probs));
                            }
                        }
                    }
                }
                ctx.print(&s);
            }
            Ok(0)
        }
        CasesAction::Record => {
            let target = golden_path(path, name, golden);
            let record = record_golden(&results, &version);
            write_atomic(&target, &to_json(&record))
                .map_err(|e| Failure::Internal(format!("cannot write {}: {e}", target.display())))?;
            let out = RecordOutput {
                scenario: name,
                kb_version_id: &version,
                cases: record.cases.len(),
                golden: target.display().to_string(),
            };
            if ctx.json {
                ctx.emit(&out);
            } else {
                ctx.print(&format!("recorded {} cases of scenario {} to {}\n", out.cases, name, out.golden));
            }
            Ok(0)
        }
        CasesAction::Compare => {
            let source = golden_path(path, name, golden);
            let record = read_golden(&source).map_err(Failure::Usage)?;
            let report = compare_golden(&results, &record, tol)?;
            let out = CompareOutput {
                scenario: name,
                tol,
                golden_version: &record.kb_version_id,
                current_version: &version,
                cases: results.cases.len(),
                flagged_cases: report.flagged_cases(),
                report: &report,
            };
            if ctx.json {
                ctx.emit(&out);
            } else {
                let mut s = String::new();
                if record.kb_version_id != version {
                    let _ = writeln!(s, "golden recorded against {}, current KB is {}", record.kb_version_id, version);
                }
                for d in &report.drifts {
                    let _ = writeln!(
                        s,
                        "REGRESSION case {} [{}]: P({} = {}) {} -> {} ({:+.6})",
                        d.case,
                        d.evidence,
                        d.variable,
                        d.state,
                        p6(d.golden),
                        p6(d.current),
                        d.current - d.golden
                    );
                }
                for c in &report.status_changes {
                    let word = |impossible: bool| if impossible { "impossible" } else { "possible" };
                    let _ = writeln!(
                        s,
                        "REGRESSION case {} [{}]: evidence {} -> {}",
                        c.case,
                        c.evidence,
                        word(c.golden_impossible),
                        word(c.current_impossible)
                    );
                }
                if report.is_empty() {
                    let _ = writeln!(s, "no regressions in {} cases (tol {tol:e})", out.cases);
                } else {
                    let _ = writeln!(s, "{} of {} cases regressed (tol {tol:e})", out.flagged_cases, out.cases);
                }
                ctx.print(&s);
            }
            Ok(if report.is_empty() { 0 } else { 1 })
        }
    }
}

fn store() -> Store {
    Store::new(std::env::var_os(STORE_ENV).map(PathBuf::from).unwrap_or_else(|| PathBuf::from(DEFAULT_STORE)))
}

/// `SOURCE_DATE_EPOCH` when set, for reproducible histories; else the clock.
fn now() -> Result<u64, Failure> {
    if let Some(v) = std::env::var_os("SOURCE_DATE_EPOCH") {
        let v = v.to_string_lossy();
        return v.trim().parse().map_err(|_| Failure::Usage(format!("SOURCE_DATE_EPOCH `{v}` is not an integer")));
    }
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).map_err(|e| Failure::Internal(e.to_string()))
}

#[derive(Serialize)]
struct SnapshotOutput<'a> {
    created: bool,
    #[serde(flatten)]
    entry: &'a LogEntry,
}

fn snapshot(ctx: &mut Ctx<'_>, path: &Path, message: &str, rationale: &str, parent: Option<String>) -> CmdResult {
    let (kb, _) = load_kb(path)?;
    let store = store();
    let created = !store.contains(&content_id(&kb));
    let entry = store.snapshot(&kb, message, rationale, parent, now()?)?;
    if ctx.json {
        ctx.emit(&SnapshotOutput { created, entry: &entry });
    } else if created {
        ctx.print(&format!("snapshot {}\n", entry.version_id));
    } else {
        ctx.print(&format!("snapshot {} (unchanged)\n", entry.version_id));
    }
    Ok(0)
}

#[derive(Serialize)]
struct DiffOutput<'a> {
    from: &'a str,
    to: &'a str,
    entries: &'a [DiffEntry],
}

fn diff(ctx: &mut Ctx<'_>, v1: &str, v2: &str) -> CmdResult {
    let store = store();
    let (a, b) = (store.resolve(v1)?, store.resolve(v2)?);
    let d = diff_kb(&store.load(&a)?, &store.load(&b)?);
    if ctx.json {
        ctx.emit(&DiffOutput { from: &a, to: &b, entries: &d.entries });
    } else if d.is_empty() {
        ctx.print("no differences\n");
    } else {
        let mut s = String::new();
        for e in &d.entries {
            let _ = writeln!(s, "{e}");
        }
        ctx.print(&s);
    }
    Ok(0)
}

#[derive(Serialize)]
struct LogOutput<'a> {
    versions: &'a [LogEntry],
}

fn log(ctx: &mut Ctx<'_>) -> CmdResult {
    let entries = store().log()?;
    if ctx.json {
        ctx.emit(&LogOutput { versions: &entries });
    } else {
        let mut s = String::new();
        for e in &entries {
            let _ = writeln!(s, "version {}", e.version_id);
            let _ = writeln!(s, "parent    {}", e.parent_id.as_deref().unwrap_or("-"));
            let _ = writeln!(s, "timestamp {}", e.timestamp);
            let _ = writeln!(s, "message   {}", e.message);
            let _ = writeln!(s, "rationale {}", e.rationale);
            s.push('\n');
        }
        ctx.print(&s);
    }
    Ok(0)
}
