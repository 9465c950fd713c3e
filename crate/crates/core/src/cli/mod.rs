//! Command-line front end. Every run prints a JSON report; with
//! `--format summary` a few readable lines come first and the report
//! follows on one line.

pub mod codec;

use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_traits::Signed;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::amalgamation::{self, AmalgError, ClassTag, Span};
use crate::blocks::{canonical_rep, fmt_q, parse_q, rep_k0, Block, Kind, TestElement, Q};
use crate::homs::{self, DiagonalHom, HomError};
use crate::limits::{self, InductiveSequence, LimitError, StepKind};
use crate::measures::{self, TraceMeasure};
use crate::oracle::{self, suites, GridSpec};
use crate::plmaps::PlFn;
use codec::{At, Cursor, DecodeError};

#[derive(Parser, Debug)]
#[command(name = "frablocks", version, about = "Exact computations with Razak blocks and diagonal homomorphisms")]
struct Cli {
    /// Output layout.
    #[arg(long, value_enum, default_value_t = Format::Json, global = true)]
    format: Format,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Summary,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Blocks and their representations.
    Block {
        #[command(subcommand)]
        op: BlockOp,
    },
    /// Diagonal homomorphisms.
    Hom {
        #[command(subcommand)]
        op: HomOp,
    },
    /// Trace measures along homomorphisms.
    Trace {
        #[command(subcommand)]
        op: TraceOp,
    },
    /// Distances between measures, point sets and fibers.
    Dist {
        #[command(subcommand)]
        op: DistOp,
    },
    /// Common trace-preserving target of two blocks.
    Jep(JepArgs),
    /// Near amalgamation of a span, with a fiberwise certificate.
    Nap(NapArgs),
    /// Inductive sequences.
    Sequence(SequenceArgs),
    /// Finite-stage genericity certificates.
    Certify {
        #[command(subcommand)]
        op: CertifyOp,
    },
    /// Randomized cross-validation suites.
    Verify(VerifyArgs),
}

#[derive(Subcommand, Debug)]
enum BlockOp {
    /// Dimensions of a block.
    Info {
        #[arg(long, value_enum)]
        kind: KindArg,
        #[arg(long)]
        n: u64,
        #[arg(long)]
        k: u64,
    },
    /// Canonical form and K0 of a representation.
    Canonical {
        /// Representation JSON (inline or file).
        #[arg(long)]
        rep: String,
        /// Block, if the representation does not name one.
        #[arg(long)]
        block: Option<String>,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum KindArg {
    Razak,
    Gen,
}

impl From<KindArg> for Kind {
    fn from(k: KindArg) -> Kind {
        match k {
            KindArg::Razak => Kind::Razak,
            KindArg::Gen => Kind::Gen,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Constructor {
    RazakEmbed,
    RazakAmplify,
    GenEmbed,
    GenAmplify,
    GenRho,
    Identity,
    Transition,
}

#[derive(Subcommand, Debug)]
enum HomOp {
    /// Build one of the standard homomorphisms.
    Construct(ConstructArgs),
    /// Diameter, K0 and validation of a homomorphism.
    Info {
        #[arg(long)]
        hom: String,
    },
    /// Validation certificate; exit 1 when invalid.
    Validate {
        #[arg(long)]
        hom: String,
    },
    /// Composite, `first` acting first.
    Compose {
        #[arg(long)]
        first: String,
        #[arg(long)]
        second: String,
    },
    /// Same associated maps with the boundary summands exchanged.
    Reverse {
        #[arg(long)]
        hom: String,
    },
    /// Sup distance between sorted associated maps.
    Ddiag {
        #[arg(long)]
        phi: String,
        #[arg(long)]
        psi: String,
    },
}

#[derive(Args, Debug)]
struct ConstructArgs {
    #[arg(long, value_enum)]
    kind: Constructor,
    #[arg(long)]
    n: Option<u64>,
    #[arg(long)]
    k: Option<u64>,
    /// Embedding multiplicity.
    #[arg(long)]
    p: Option<u64>,
    /// Amplification factor.
    #[arg(long)]
    kp: Option<u64>,
    /// Boundary split parameter (may be negative for gen-rho).
    #[arg(long, allow_hyphen_values = true)]
    j: Option<i64>,
    /// Block kind for `identity`.
    #[arg(long, value_enum)]
    block_kind: Option<KindArg>,
    /// Traces for `transition`; the map pulls `tau` back to `sigma`.
    #[arg(long)]
    sigma: Option<String>,
    #[arg(long)]
    tau: Option<String>,
    /// Block for `transition` when the traces do not name one.
    #[arg(long)]
    block: Option<String>,
}

#[derive(Subcommand, Debug)]
enum TraceOp {
    /// Pull a trace on the codomain back to the domain.
    Pullback {
        #[arg(long)]
        hom: String,
        /// `lebesgue` or measure JSON.
        #[arg(long, default_value = "lebesgue")]
        tau: String,
    },
    /// Whether a homomorphism carries `sigma` to `tau`; exit 1 if not.
    Check {
        #[arg(long)]
        hom: String,
        #[arg(long)]
        sigma: String,
        #[arg(long, default_value = "lebesgue")]
        tau: String,
    },
    /// Quantile-matching automorphism pulling `tau` back to `sigma`.
    Transition {
        #[arg(long)]
        sigma: String,
        #[arg(long)]
        tau: String,
        #[arg(long)]
        block: Option<String>,
    },
}

#[derive(Subcommand, Debug)]
enum DistOp {
    /// Optimal matching distance of two diffuse measures.
    Bottleneck {
        #[arg(long)]
        mu: String,
        #[arg(long)]
        nu: String,
        /// Also bracket the value with the interval-enumeration oracle.
        #[arg(long)]
        oracle_resolution: Option<u64>,
        #[arg(long)]
        block: Option<String>,
    },
    /// Matching distance and b_ell of two point multisets.
    Match {
        /// JSON array of rationals.
        #[arg(long)]
        f: String,
        #[arg(long)]
        h: String,
        #[arg(long, default_value_t = 0)]
        ell: u64,
    },
    /// Fiber distance of two homomorphisms relative to test elements.
    Fiber {
        #[arg(long)]
        phi: String,
        #[arg(long)]
        psi: String,
        /// Test element JSON (one or a list); defaults to the tight linear one.
        #[arg(long)]
        g: Option<String>,
        /// A point of [0,1], or inf, inf1, inf2. Without it, the sup over a mesh.
        #[arg(long)]
        at: Option<String>,
    },
}

#[derive(Args, Debug)]
struct JepArgs {
    #[arg(long)]
    a: String,
    #[arg(long, default_value = "lebesgue")]
    sigma: String,
    #[arg(long)]
    b: String,
    #[arg(long, default_value = "lebesgue")]
    tau: String,
    /// W, K0, K1 or Kp:2,3; defaults to W or K1 by block kind.
    #[arg(long)]
    class: Option<String>,
}

#[derive(Args, Debug)]
struct NapArgs {
    /// JSON with sigma, phi1, tau1, phi2, tau2 (traces may be "lebesgue").
    #[arg(long)]
    span: String,
    #[arg(long)]
    g: Option<String>,
    #[arg(long)]
    eps: String,
    #[arg(long)]
    class: Option<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Family {
    W,
    Z0,
    Z0uhf,
}

#[derive(Args, Debug)]
struct SequenceArgs {
    #[arg(value_enum)]
    family: Family,
    /// Connecting maps for w and z0; embedding/amplification cycles for z0uhf.
    #[arg(long)]
    steps: u64,
    /// Comma-separated primes for z0uhf.
    #[arg(long, value_delimiter = ',')]
    primes: Vec<u64>,
    /// Leave the step homomorphisms and traces out of the report.
    #[arg(long)]
    brief: bool,
}

#[derive(Subcommand, Debug)]
enum CertifyOp {
    /// Route a map out of a stage back into the sequence and compare.
    Generic(CertifyArgs),
}

#[derive(Args, Debug)]
struct CertifyArgs {
    /// A report from `sequence`, or just {"family":..,"steps":..,"primes":..}.
    #[arg(long)]
    seq: String,
    /// Hom JSON, or {"hom":..,"tau":..,"from_stage":..}.
    #[arg(long)]
    psi: String,
    #[arg(long)]
    eps: String,
    #[arg(long)]
    g: Option<String>,
    /// Trace on the codomain of psi; defaults to Lebesgue.
    #[arg(long)]
    tau: Option<String>,
    #[arg(long)]
    from: Option<usize>,
}

#[derive(Args, Debug)]
struct VerifyArgs {
    /// One of rewriting2, littlecounting, dist1, measuring, measuring2,
    /// diameterfacts, ktheory2, kgen2, onemore.
    lemma: String,
    #[arg(long, default_value_t = 100)]
    trials: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

/// Why a command did not produce a passing result.
#[derive(Debug)]
enum CliError {
    /// Bad arguments or parameters: exit 2.
    Usage(String),
    /// Unreadable or malformed input: exit 2.
    Input { location: String, message: String },
    /// The computation ran but no certificate could be issued: exit 1.
    Failed(String),
}

impl From<DecodeError> for CliError {
    fn from(e: DecodeError) -> Self {
        CliError::Input { location: format!("{}: {}", e.source, e.path), message: e.message }
    }
}

fn usage(e: impl ToString) -> CliError {
    CliError::Usage(e.to_string())
}

fn failed(e: impl ToString) -> CliError {
    CliError::Failed(e.to_string())
}

/// Result of a command: report body, verdict and readable lines.
struct Outcome {
    results: Value,
    passed: bool,
    summary: Vec<String>,
    seed: Option<u64>,
}

impl Outcome {
    fn ok(results: Value, summary: impl Into<String>) -> Self {
        Outcome { results, passed: true, summary: vec![summary.into()], seed: None }
    }

    fn verdict(results: Value, passed: bool, summary: impl Into<String>) -> Self {
        Outcome { results, passed, summary: vec![summary.into()], seed: None }
    }
}

/// Inputs read so far, hashed into the report.
#[derive(Default)]
struct Inputs {
    hasher: Sha256,
    texts: Vec<(String, String)>,
}

impl Inputs {
    /// Inline JSON if the argument looks like JSON, otherwise a file path.
    fn load(&mut self, arg: &str) -> Result<usize, CliError> {
        let t = arg.trim_start();
        let (name, text) = if t.starts_with('{') || t.starts_with('[') {
            ("<inline>".to_string(), arg.to_string())
        } else {
            let text = std::fs::read_to_string(arg)
                .map_err(|e| CliError::Input { location: arg.to_string(), message: e.to_string() })?;
            (arg.to_string(), text)
        };
        self.hasher.update(name.as_bytes());
        self.hasher.update([0]);
        self.hasher.update(text.as_bytes());
        self.hasher.update([0]);
        self.texts.push((name, text));
        Ok(self.texts.len() - 1)
    }

    fn json(&mut self, arg: &str) -> Result<(Value, String), CliError> {
        let i = self.load(arg)?;
        let (name, text) = &self.texts[i];
        let v: Value = serde_json::from_str(text).map_err(|e| CliError::Input {
            location: format!("{name}: line {} column {}", e.line(), e.column()),
            message: e.to_string(),
        })?;
        Ok((v, name.clone()))
    }

    fn with<T>(&mut self, arg: &str, f: impl FnOnce(&Cursor) -> Result<T, DecodeError>) -> Result<T, CliError> {
        let (v, name) = self.json(arg)?;
        let c = Cursor::root(At { v: &v, source: &name });
        Ok(f(&c)?)
    }

    fn hom(&mut self, arg: &str) -> Result<DiagonalHom, CliError> {
        self.with(arg, codec::decode_hom)
    }

    fn block(&mut self, arg: &str) -> Result<Block, CliError> {
        if let Some(b) = block_shorthand(arg) {
            return b;
        }
        self.with(arg, codec::decode_block)
    }

    /// `lebesgue` or measure JSON; `block` fills in a missing block.
    fn trace(&mut self, arg: &str, block: Option<Block>) -> Result<TraceMeasure, CliError> {
        if arg == "lebesgue" {
            return match block {
                Some(b) => Ok(TraceMeasure::lebesgue(b)),
                None => Err(usage("'lebesgue' needs a block from another argument")),
            };
        }
        self.with(arg, |c| codec::decode_measure(c, block))
    }

    fn test_elements(&mut self, arg: Option<&str>, kind: Kind) -> Result<Vec<TestElement>, CliError> {
        match arg {
            Some(a) => self.with(a, codec::decode_test_elements),
            None => Ok(vec![default_test_element(kind)]),
        }
    }

    fn new(command: &[&str]) -> Self {
        let mut inputs = Inputs::default();
        for a in command {
            inputs.hasher.update(a.as_bytes());
            inputs.hasher.update([0]);
        }
        inputs
    }

    fn digest(&self) -> String {
        format!("sha256:{:x}", self.hasher.clone().finalize())
    }
}

/// `razak:2:1` or `gen:2:1`.
fn block_shorthand(arg: &str) -> Option<Result<Block, CliError>> {
    let mut it = arg.split(':');
    let kind = match it.next()? {
        "razak" => Kind::Razak,
        "gen" => Kind::Gen,
        _ => return None,
    };
    let nums: Vec<Result<u64, _>> = it.map(str::parse::<u64>).collect();
    Some(match nums.as_slice() {
        [Ok(n), Ok(k)] => Block::new(kind, *n, *k).map_err(usage),
        _ => Err(usage(format!("block '{arg}': expected kind:n:k"))),
    })
}

/// `1 − t` on the first slots and `t − 1` on the second.
pub fn default_test_element(kind: Kind) -> TestElement {
    let (one, zero) = (Q::from_integer(1.into()), Q::from_integer(0.into()));
    let g1 = PlFn::linear(one.clone(), zero.clone());
    let g2 = (kind == Kind::Gen).then(|| PlFn::linear(-one, zero));
    TestElement::tight(g1, g2).expect("linear elements vanish at 1")
}

fn rational(s: &str, what: &str) -> Result<Q, CliError> {
    parse_q(s).map_err(|e| usage(format!("{what}: {e}")))
}

fn class_for(arg: Option<&str>, kind: Kind) -> Result<ClassTag, CliError> {
    match arg {
        Some(s) => ClassTag::parse(s).map_err(usage),
        None => Ok(match kind {
            Kind::Razak => ClassTag::W,
            Kind::Gen => ClassTag::K1,
        }),
    }
}

fn hom_error(e: HomError) -> CliError {
    match e {
        HomError::OutOfRange(_) | HomError::Mismatch(_) => usage(e),
        _ => failed(e),
    }
}

fn amalg_error(e: AmalgError) -> CliError {
    match e {
        AmalgError::BadClass(_) | AmalgError::BadTrace(_) => usage(e),
        _ => failed(e),
    }
}

/// Entry point: `argv` includes the program name. Returns the exit code and
/// everything destined for stdout.
pub fn run(argv: &[String]) -> (i32, String) {
    let start = Instant::now();
    let command: Vec<&str> = argv.iter().skip(1).map(String::as_str).collect();
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(
                e.kind(),
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion | ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand
            ) {
                let code = if e.kind() == ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand { 2 } else { 0 };
                return (code, e.to_string());
            }
            let (body, code) = report(
                &command,
                &Inputs::new(&command),
                Err(usage(e.to_string().trim_end().trim_start_matches("error: "))),
                start,
            );
            return (code, render(requested_format(&command), &body, &[]));
        }
    };
    let mut inputs = Inputs::new(&command);
    let result = match thread_cap() {
        Ok(Some(n)) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(|| dispatch(&cli.cmd, &mut inputs)),
            Err(e) => Err(usage(e)),
        },
        Ok(None) => dispatch(&cli.cmd, &mut inputs),
        Err(e) => Err(e),
    };
    let summary: Vec<String> = match &result {
        Ok(o) => o.summary.clone(),
        Err(_) => Vec::new(),
    };
    let (body, code) = report(&command, &inputs, result, start);
    (code, render(cli.format, &body, &summary))
}

/// `--format` as written in argv, for errors raised before parsing succeeds.
fn requested_format(command: &[&str]) -> Format {
    let summary = command.windows(2).any(|w| w[0] == "--format" && w[1] == "summary") || command.contains(&"--format=summary");
    if summary {
        Format::Summary
    } else {
        Format::Json
    }
}

fn render(format: Format, body: &Value, summary: &[String]) -> String {
    match format {
        Format::Json => format!("{}\n", serde_json::to_string_pretty(body).unwrap()),
        Format::Summary => {
            let mut s = String::new();
            let status = body["status"].as_str().unwrap_or("");
            s.push_str(&format!("status: {status}\n"));
            for l in summary {
                s.push_str(l);
                s.push('\n');
            }
            if let Some(m) = body["error"]["message"].as_str() {
                match body["error"]["location"].as_str() {
                    Some(at) => s.push_str(&format!("error at {at}: {m}\n")),
                    None => s.push_str(&format!("error: {m}\n")),
                }
            }
            s.push_str(&serde_json::to_string(body).unwrap());
            s.push('\n');
            s
        }
    }
}

fn thread_cap() -> Result<Option<usize>, CliError> {
    match std::env::var("FRABLOCKS_THREADS") {
        Ok(v) if !v.trim().is_empty() => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(usage(format!("FRABLOCKS_THREADS='{v}' is not a positive integer"))),
        },
        _ => Ok(None),
    }
}

fn report(command: &[&str], inputs: &Inputs, result: Result<Outcome, CliError>, start: Instant) -> (Value, i32) {
    let (status, code, results, error, seed) = match result {
        Ok(o) => {
            let (s, c) = if o.passed { ("ok", 0) } else { ("failed", 1) };
            (s, c, o.results, Value::Null, o.seed)
        }
        Err(CliError::Usage(m)) => ("error", 2, Value::Null, json!({"kind": "usage", "message": m}), None),
        Err(CliError::Input { location, message }) => {
            ("error", 2, Value::Null, json!({"kind": "input", "location": location, "message": message}), None)
        }
        Err(CliError::Failed(m)) => ("failed", 1, Value::Null, json!({"kind": "failed", "message": m}), None),
    };
    let body = json!({
        "command": command,
        "inputs_digest": inputs.digest(),
        "seed": seed,
        "status": status,
        "exit_code": code,
        "results": results,
        "error": error,
        "timing": {"elapsed_ms": start.elapsed().as_millis() as u64},
    });
    (body, code)
}

fn dispatch(cmd: &Cmd, inp: &mut Inputs) -> Result<Outcome, CliError> {
    match cmd {
        Cmd::Block { op } => block_cmd(op, inp),
        Cmd::Hom { op } => hom_cmd(op, inp),
        Cmd::Trace { op } => trace_cmd(op, inp),
        Cmd::Dist { op } => dist_cmd(op, inp),
        Cmd::Jep(a) => jep_cmd(a, inp),
        Cmd::Nap(a) => nap_cmd(a, inp),
        Cmd::Sequence(a) => sequence_cmd(a),
        Cmd::Certify { op: CertifyOp::Generic(a) } => certify_cmd(a, inp),
        Cmd::Verify(a) => verify_cmd(a),
    }
}

fn block_cmd(op: &BlockOp, inp: &mut Inputs) -> Result<Outcome, CliError> {
    match op {
        BlockOp::Info { kind, n, k } => {
            let b = Block::new((*kind).into(), *n, *k).map_err(usage)?;
            let k0_group = match b.kind {
                Kind::Razak => "0",
                Kind::Gen => "Z",
            };
            Ok(Outcome::ok(
                json!({"block": codec::block(&b), "fiber_dim": b.fiber_dim(), "inf_dim": b.inf_dim(), "k0_group": k0_group}),
                format!("{b}: fiber dimension {}", b.fiber_dim()),
            ))
        }
        BlockOp::Canonical { rep, block } => {
            let default = block.as_deref().map(|b| inp.block(b)).transpose()?;
            let r = inp.with(rep, |c| codec::decode_rep(c, default))?;
            let c = canonical_rep(&r);
            let k = rep_k0(&r);
            Ok(Outcome::ok(
                json!({"canonical": codec::rep(&c), "dim": r.dim(), "k0": codec::k0(k)}),
                format!("canonical form with {} points, K0 {}", c.npoints(), codec::k0(k)),
            ))
        }
    }
}

fn k0_text(v: &Value) -> String {
    v.as_str().map_or_else(|| v.to_string(), str::to_string)
}

fn hom_summary(h: &DiagonalHom) -> Value {
    json!({
        "hom": codec::hom(h),
        "diameter": codec::q(&homs::diameter(h)),
        "k0": codec::k0(homs::k0(h)),
        "max_slope": codec::q(&homs::max_slope(h)),
        "finite_to_one": homs::finite_to_one(h),
        "maps": h.len(),
    })
}

fn hom_cmd(op: &HomOp, inp: &mut Inputs) -> Result<Outcome, CliError> {
    match op {
        HomOp::Construct(a) => {
            let need = |x: Option<u64>, name: &str| x.ok_or_else(|| usage(format!("--{name} is required for {:?}", a.kind)));
            let uj = || -> Result<u64, CliError> {
                let j = a.j.ok_or_else(|| usage("--j is required"))?;
                u64::try_from(j).map_err(|_| usage("--j must be nonnegative here"))
            };
            let h = match a.kind {
                Constructor::RazakEmbed => homs::razak_embed(need(a.n, "n")?, need(a.k, "k")?, need(a.p, "p")?),
                Constructor::RazakAmplify => homs::razak_amplify(need(a.n, "n")?, need(a.k, "k")?, need(a.kp, "kp")?),
                Constructor::GenEmbed => homs::gen_embed(need(a.n, "n")?, need(a.k, "k")?, need(a.p, "p")?, uj()?),
                Constructor::GenAmplify => homs::gen_amplify(need(a.n, "n")?, need(a.k, "k")?, need(a.kp, "kp")?, uj()?),
                Constructor::GenRho => homs::gen_rho(
                    need(a.n, "n")?,
                    need(a.k, "k")?,
                    need(a.kp, "kp")?,
                    a.j.ok_or_else(|| usage("--j is required"))?,
                ),
                Constructor::Identity => {
                    let kind = a.block_kind.ok_or_else(|| usage("--block-kind is required for identity"))?;
                    let b = Block::new(kind.into(), need(a.n, "n")?, need(a.k, "k")?).map_err(usage)?;
                    Ok(homs::identity(b))
                }
                Constructor::Transition => {
                    let b = a.block.as_deref().map(|b| inp.block(b)).transpose()?;
                    let sigma = inp.trace(a.sigma.as_deref().ok_or_else(|| usage("--sigma is required"))?, b)?;
                    let tau = inp.trace(a.tau.as_deref().ok_or_else(|| usage("--tau is required"))?, Some(sigma.block))?;
                    homs::transition(&sigma, &tau)
                }
            }
            .map_err(hom_error)?;
            let mut v = hom_summary(&h);
            v["validation"] = codec::validation(&homs::validate(&h));
            let line = format!(
                "{} -> {} with {} maps, diameter {}, K0 {}",
                h.dom,
                h.cod,
                h.len(),
                fmt_q(&homs::diameter(&h)),
                k0_text(&v["k0"])
            );
            Ok(Outcome::ok(v, line))
        }
        HomOp::Info { hom } => {
            let h = inp.hom(hom)?;
            let mut v = hom_summary(&h);
            v["validation"] = codec::validation(&homs::validate(&h));
            let line = format!("{} -> {}, diameter {}", h.dom, h.cod, fmt_q(&homs::diameter(&h)));
            Ok(Outcome::ok(v, line))
        }
        HomOp::Validate { hom } => {
            // decode without validating so the certificate can be shown
            let h = inp.with(hom, |c| {
                let dom = codec::decode_block(&c.field("dom")?)?;
                let cod = codec::decode_block(&c.field("cod")?)?;
                let mut xis = Vec::new();
                for x in c.field("xis")?.items()? {
                    let mult = x.opt("mult").map(|m| m.u64()).unwrap_or(Ok(1))?;
                    xis.push((codec::decode_plmap(&x)?, mult));
                }
                let split_a = codec::decode_rep(&c.field("splitA")?, Some(dom))?;
                let split_b = c.opt("splitB").map(|b| codec::decode_rep(&b, Some(dom))).transpose()?;
                Ok(DiagonalHom { dom, cod, xis, split_a, split_b })
            })?;
            let cert = homs::validate(&h);
            let line = format!("{} of {} checks pass", cert.checks.iter().filter(|c| c.ok).count(), cert.checks.len());
            Ok(Outcome::verdict(codec::validation(&cert), cert.valid(), line))
        }
        HomOp::Compose { first, second } => {
            let (f, s) = (inp.hom(first)?, inp.hom(second)?);
            let h = homs::compose(&f, &s).map_err(hom_error)?;
            let line = format!("{} -> {} with {} maps", h.dom, h.cod, h.len());
            Ok(Outcome::ok(hom_summary(&h), line))
        }
        HomOp::Reverse { hom } => {
            let h = homs::reverse_k(&inp.hom(hom)?);
            let line = format!("K0 now {}", codec::k0(homs::k0(&h)));
            Ok(Outcome::ok(hom_summary(&h), line))
        }
        HomOp::Ddiag { phi, psi } => {
            let (a, b) = (inp.hom(phi)?, inp.hom(psi)?);
            let d = homs::d_diag(&a, &b).map_err(hom_error)?;
            Ok(Outcome::ok(json!({"d_diag": codec::q(&d)}), format!("d_diag {}", fmt_q(&d))))
        }
    }
}

fn trace_cmd(op: &TraceOp, inp: &mut Inputs) -> Result<Outcome, CliError> {
    match op {
        TraceOp::Pullback { hom, tau } => {
            let h = inp.hom(hom)?;
            let t = inp.trace(tau, Some(h.cod))?;
            let s = homs::pullback_trace(&h, &t).map_err(hom_error)?;
            let line = format!("pullback on {} with {} pieces", s.block, s.pieces.len());
            Ok(Outcome::ok(
                json!({"measure": codec::measure(&s), "faithful": s.is_faithful(), "probability": s.is_probability()}),
                line,
            ))
        }
        TraceOp::Check { hom, sigma, tau } => {
            let h = inp.hom(hom)?;
            let s = inp.trace(sigma, Some(h.dom))?;
            let t = inp.trace(tau, Some(h.cod))?;
            let ok = homs::is_trace_preserving(&h, &s, &t);
            Ok(Outcome::verdict(json!({"trace_preserving": ok}), ok, format!("trace preserving: {ok}")))
        }
        TraceOp::Transition { sigma, tau, block } => {
            let b = block.as_deref().map(|b| inp.block(b)).transpose()?;
            let s = inp.trace(sigma, b)?;
            let t = inp.trace(tau, Some(s.block))?;
            let h = homs::transition(&s, &t).map_err(hom_error)?;
            let line = format!(
                "transition on {}, moves points by at most {}",
                h.dom,
                fmt_q(&homs::d_diag(&homs::identity(h.dom), &h).unwrap())
            );
            Ok(Outcome::ok(hom_summary(&h), line))
        }
    }
}

fn dist_cmd(op: &DistOp, inp: &mut Inputs) -> Result<Outcome, CliError> {
    match op {
        DistOp::Bottleneck { mu, nu, oracle_resolution, block } => {
            let b = block.as_deref().map(|b| inp.block(b)).transpose()?;
            // a Lebesgue side takes its block from the other side
            let (m, n) = if mu == "lebesgue" {
                let n = inp.trace(nu, b.or(Some(Block::razak(1, 1))))?;
                (inp.trace(mu, Some(n.block))?, n)
            } else {
                let m = inp.trace(mu, b.or(Some(Block::razak(1, 1))))?;
                let n = inp.trace(nu, Some(m.block))?;
                (m, n)
            };
            let d = measures::bottleneck(&m, &n).map_err(failed)?;
            let mut v = json!({"bottleneck": codec::q(&d), "atom_gap": codec::q(&measures::atom_gap(&m, &n))});
            if let Some(res) = oracle_resolution {
                if *res < 2 {
                    return Err(usage("--oracle-resolution must be at least 2"));
                }
                let (lo, hi) = oracle::bottleneck_brute(&m, &n, GridSpec { resolution: *res, seed: 0 });
                v["oracle"] = json!({"tag": "floating-point bracket", "lower": codec::q(&lo), "upper": codec::q(&hi), "contains": lo <= d && d <= hi});
            }
            Ok(Outcome::ok(v, format!("bottleneck {}", fmt_q(&d))))
        }
        DistOp::Match { f, h, ell } => {
            let f = inp.with(f, codec::points)?;
            let h = inp.with(h, codec::points)?;
            let md = measures::match_distance(&f, &h).map_err(usage)?;
            let be = measures::b_ell(&f, &h, *ell).map_err(usage)?;
            Ok(Outcome::ok(
                json!({"match_distance": codec::q(&md), "ell": ell, "b_ell": codec::q(&be.value), "b_ell_exact": be.exact}),
                format!("matching distance {}, b_{ell} {}", fmt_q(&md), fmt_q(&be.value)),
            ))
        }
        DistOp::Fiber { phi, psi, g, at } => {
            let (a, b) = (inp.hom(phi)?, inp.hom(psi)?);
            if a.dom != b.dom || a.cod != b.cod {
                return Err(usage(format!("homs {} -> {} and {} -> {} differ in blocks", a.dom, a.cod, b.dom, b.cod)));
            }
            let g = inp.test_elements(g.as_deref(), a.dom.kind)?;
            let lip = homs::lipschitz_max(&g);
            let dd = homs::d_diag(&a, &b).map_err(hom_error)?;
            match at.as_deref() {
                Some(p) => {
                    let point = match p {
                        "inf" => crate::blocks::SpecPoint::Inf,
                        "inf1" => crate::blocks::SpecPoint::Inf1,
                        "inf2" => crate::blocks::SpecPoint::Inf2,
                        t => crate::blocks::SpecPoint::Interior(rational(t, "--at")?),
                    };
                    let u = homs::fiber_udist(&a, &b, &g, &point).map_err(hom_error)?;
                    Ok(Outcome::ok(
                        json!({"at": p, "distance": codec::q(&u.value), "exact": u.exact}),
                        format!("distance at {p}: {}", fmt_q(&u.value)),
                    ))
                }
                None => {
                    let ts = amalgamation::mesh_for(&a, &b);
                    let (u, r) = homs::sup_fiber_udist(&a, &b, &g, &ts).map_err(hom_error)?;
                    let inf: Vec<(String, Q)> = r.into_iter().filter(|(l, _)| l.starts_with("inf")).collect();
                    Ok(Outcome::ok(
                        json!({
                            "sup": codec::q(&u.value),
                            "exact": u.exact,
                            "mesh_points": ts.len(),
                            "readings_at_infinity": codec::readings(&inf),
                            "d_diag": codec::q(&dd),
                            "lipschitz": codec::q(&lip),
                            "interior_bound": codec::q(&(&lip * &dd)),
                        }),
                        format!("sup {} (bound {})", fmt_q(&u.value), fmt_q(&(&lip * &dd))),
                    ))
                }
            }
        }
    }
}

fn jep_cmd(a: &JepArgs, inp: &mut Inputs) -> Result<Outcome, CliError> {
    let (ba, bb) = (inp.block(&a.a)?, inp.block(&a.b)?);
    let sigma = inp.trace(&a.sigma, Some(ba))?;
    let tau = inp.trace(&a.tau, Some(bb))?;
    let class = class_for(a.class.as_deref(), ba.kind)?;
    let r = amalgamation::jep(ba, &sigma, bb, &tau, &class).map_err(amalg_error)?;
    let tp1 = homs::is_trace_preserving(&r.psi1, &sigma, &r.lambda);
    let tp2 = homs::is_trace_preserving(&r.psi2, &tau, &r.lambda);
    let (k1, k2) = (homs::k0(&r.psi1), homs::k0(&r.psi2));
    let in_class = class.admits(k1) && class.admits(k2);
    let passed = tp1 && tp2 && in_class;
    Ok(Outcome::verdict(
        json!({
            "class": class.label(),
            "cod": codec::block(&r.cod),
            "lambda": codec::measure(&r.lambda),
            "psi1": codec::hom(&r.psi1),
            "psi2": codec::hom(&r.psi2),
            "checks": {"psi1_trace_preserving": tp1, "psi2_trace_preserving": tp2, "k0_in_class": in_class},
            "k0": [codec::k0(k1), codec::k0(k2)],
        }),
        passed,
        format!("{ba} and {bb} embed into {} (class {})", r.cod, class.label()),
    ))
}

fn nap_cmd(a: &NapArgs, inp: &mut Inputs) -> Result<Outcome, CliError> {
    let eps = rational(&a.eps, "--eps")?;
    if !eps.is_positive() {
        return Err(usage("--eps must be positive"));
    }
    let (v, name) = inp.json(&a.span)?;
    let c = Cursor::root(At { v: &v, source: &name });
    let phi1 = codec::decode_hom(&c.field("phi1")?)?;
    let phi2 = codec::decode_hom(&c.field("phi2")?)?;
    let trace = |key: &str, b: Block| -> Result<TraceMeasure, CliError> {
        let f = c.field(key)?;
        if f.value().as_str() == Some("lebesgue") {
            return Ok(TraceMeasure::lebesgue(b));
        }
        Ok(codec::decode_measure(&f, Some(b))?)
    };
    let sigma = trace("sigma", phi1.dom)?;
    let tau1 = trace("tau1", phi1.cod)?;
    let tau2 = trace("tau2", phi2.cod)?;
    let kind = phi1.dom.kind;
    let g = match (&a.g, c.opt("g")) {
        (Some(arg), _) => inp.test_elements(Some(arg), kind)?,
        (None, Some(gc)) => codec::decode_test_elements(&gc)?,
        (None, None) => vec![default_test_element(kind)],
    };
    let class = class_for(a.class.as_deref(), kind)?;
    let span = Span { sigma: &sigma, phi1: &phi1, tau1: &tau1, phi2: &phi2, tau2: &tau2 };
    let r = match (kind, &class) {
        (Kind::Razak, ClassTag::W) => amalgamation::nap_razak(&span, &g, &eps),
        (Kind::Gen, ClassTag::K0 | ClassTag::K1 | ClassTag::Kp(_)) => amalgamation::nap_gen(&span, &g, &eps, &class),
        _ => return Err(usage(format!("class {} does not fit {} blocks", class.label(), phi1.dom))),
    }
    .map_err(amalg_error)?;
    let cert = &r.certificate;
    Ok(Outcome::verdict(
        json!({
            "class": class.label(),
            "cod": codec::block(&r.cod),
            "psi1": codec::hom(&r.psi1),
            "psi2": codec::hom(&r.psi2),
            "certificate": codec::nap_certificate(cert),
        }),
        cert.passed,
        amalgamation::summary_line(cert),
    ))
}

fn build_sequence(family: Family, steps: u64, primes: &[u64]) -> Result<InductiveSequence, CliError> {
    let steps = usize::try_from(steps).map_err(usage)?;
    let r = match family {
        Family::W => limits::w_sequence(steps + 1),
        Family::Z0 => limits::z0_sequence(steps + 1),
        Family::Z0uhf => limits::z0_uhf_sequence(primes, steps),
    };
    r.map_err(|e| match e {
        LimitError::Invalid(_) | LimitError::Amalg(AmalgError::BadClass(_)) => usage(e),
        _ => failed(e),
    })
}

fn family_name(f: Family) -> &'static str {
    match f {
        Family::W => "w",
        Family::Z0 => "z0",
        Family::Z0uhf => "z0uhf",
    }
}

fn sequence_cmd(a: &SequenceArgs) -> Result<Outcome, CliError> {
    if a.family != Family::Z0uhf && !a.primes.is_empty() {
        return Err(usage("--primes only applies to z0uhf"));
    }
    let seq = build_sequence(a.family, a.steps, &a.primes)?;
    let problems = limits::validate_sequence(&seq);
    let built = seq.materialised();
    let stages: Vec<Value> = seq
        .blocks
        .iter()
        .enumerate()
        .map(|(i, b)| {
            let mut v = json!({"index": i, "block": codec::block(b), "fiber_dim": b.fiber_dim(), "materialised": i < built});
            if i < built && !a.brief {
                v["trace"] = codec::measure(&seq.traces[i]);
            }
            v
        })
        .collect();
    let steps: Vec<Value> = seq
        .info
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let params = match &s.kind {
                StepKind::RazakEmbed { p } => json!({"constructor": "razak_embed", "p": p}),
                StepKind::GenEmbed { p, j } => json!({"constructor": "gen_embed", "p": p, "j": j}),
                StepKind::GenAmplify { kp, j } => json!({"constructor": "gen_amplify", "kp": kp, "j": j}),
            };
            let mut v = json!({
                "index": i,
                "from": codec::block(&s.from),
                "to": codec::block(&s.to),
                "params": params,
                "k0": codec::k0(s.k0),
                "materialised": i + 1 < built,
            });
            if let Some((need, exact)) = s.padding {
                v["padding_bound"] = json!({"value": need, "exact": exact});
            }
            if let Some(h) = seq.steps.get(i) {
                v["diameter"] = codec::q(&homs::diameter(h));
                if !a.brief {
                    v["hom"] = codec::hom(h);
                }
            }
            v
        })
        .collect();
    let passed = problems.is_empty();
    let line = format!(
        "{} stages ({} materialised), composite K0 {}, {} problems",
        seq.blocks.len(),
        built,
        codec::k0(limits::composite_k0(&seq)),
        problems.len()
    );
    Ok(Outcome::verdict(
        json!({
            "family": family_name(a.family),
            "steps": a.steps,
            "primes": a.primes,
            "class": seq.class.label(),
            "desk_cap": limits::DESK_CAP,
            "stages": stages,
            "maps": steps,
            "composite_k0": codec::k0(limits::composite_k0(&seq)),
            "problems": problems,
        }),
        passed,
        line,
    ))
}

fn certify_cmd(a: &CertifyArgs, inp: &mut Inputs) -> Result<Outcome, CliError> {
    let eps = rational(&a.eps, "--eps")?;
    if !eps.is_positive() {
        return Err(usage("--eps must be positive"));
    }
    // the sequence is rebuilt from its parameters and checked against any listed stages
    let (family, steps, primes, listed) = inp.with(&a.seq, |c| {
        let body = c.opt("results").unwrap_or_else(|| Cursor::root(At { v: c.value(), source: "" }));
        let body = if c.opt("results").is_some() { c.field("results")? } else { body };
        let fam = match body.field("family")?.str()? {
            "w" => Family::W,
            "z0" => Family::Z0,
            "z0uhf" => Family::Z0uhf,
            other => return body.field("family")?.err(format!("unknown family '{other}'")),
        };
        let steps = body.field("steps")?.u64()?;
        let primes = match body.opt("primes") {
            Some(p) => p.items()?.iter().map(|x| x.u64()).collect::<Result<Vec<_>, _>>()?,
            None => Vec::new(),
        };
        let listed = match body.opt("stages") {
            Some(s) => s.items()?.iter().map(|x| codec::decode_block(&x.field("block")?)).collect::<Result<Vec<_>, _>>()?,
            None => Vec::new(),
        };
        Ok((fam, steps, primes, listed))
    })?;
    let seq = build_sequence(family, steps, &primes)?;
    if !listed.is_empty() && listed != seq.blocks {
        return Err(CliError::Input {
            location: format!("{}: $.stages", a.seq),
            message: "stages differ from the rebuilt sequence".into(),
        });
    }
    let (v, name) = inp.json(&a.psi)?;
    let c = Cursor::root(At { v: &v, source: &name });
    let (hc, tau_c, from_c) = if c.opt("hom").is_some() {
        (c.field("hom")?, c.opt("tau"), c.opt("from_stage"))
    } else {
        (Cursor::root(At { v: &v, source: &name }), None, None)
    };
    let psi = codec::decode_hom(&hc)?;
    let tau = match (&a.tau, tau_c) {
        (Some(t), _) => inp.trace(t, Some(psi.cod))?,
        (None, Some(tc)) => {
            if tc.value().as_str() == Some("lebesgue") {
                TraceMeasure::lebesgue(psi.cod)
            } else {
                codec::decode_measure(&tc, Some(psi.cod))?
            }
        }
        (None, None) => TraceMeasure::lebesgue(psi.cod),
    };
    let from = match (a.from, from_c) {
        (Some(i), _) => i,
        (None, Some(fc)) => fc.u64()? as usize,
        (None, None) => (0..seq.materialised())
            .find(|&i| seq.blocks[i] == psi.dom && homs::is_trace_preserving(&psi, &seq.traces[i], &tau))
            .ok_or_else(|| usage(format!("no built stage matches {} with psi carrying its trace to the given one", psi.dom)))?,
    };
    let g = inp.test_elements(a.g.as_deref(), psi.dom.kind)?;
    let cert = limits::genericity_certify(&seq, from, &tau, &psi, &g, &eps).map_err(|e| match e {
        LimitError::Invalid(_) => usage(e),
        _ => failed(e),
    })?;
    let line = format!(
        "{} stage {} -> C -> stage {} compared at stage {}: sup {} bound {} eps {}",
        if cert.passed { "PASS" } else { "FAIL" },
        cert.from_stage,
        cert.route_stage,
        cert.compare_stage,
        fmt_q(&cert.sup_fiber_dist),
        fmt_q(&cert.interior_bound),
        fmt_q(&eps)
    );
    Ok(Outcome::verdict(
        json!({
            "family": family_name(family),
            "from_stage": cert.from_stage,
            "route_stage": cert.route_stage,
            "compare_stage": cert.compare_stage,
            "certificate": {
                "passed": cert.passed,
                "epsilon": codec::q(&cert.epsilon),
                "checks": {
                    "trace_preserved": cert.trace_preserved,
                    "interior_bound_below_epsilon": cert.interior_bound < cert.epsilon,
                    "sup_below_epsilon": cert.sup_fiber_dist < cert.epsilon,
                },
                "d_diag": codec::q(&cert.d_diag),
                "interior_bound": codec::q(&cert.interior_bound),
                "sup_fiber_dist": codec::q(&cert.sup_fiber_dist),
                "sup_exact": cert.sup_exact,
                "readings_at_infinity": codec::readings(&cert.readings_at_infinity),
                "mesh_points": cert.mesh_points,
                "diameters": [codec::q(&cert.diameters.0), codec::q(&cert.diameters.1)],
                "test_elements": g.iter().map(codec::test_element).collect::<Vec<_>>(),
                "note": cert.note,
            },
        }),
        cert.passed,
        line,
    ))
}

fn verify_cmd(a: &VerifyArgs) -> Result<Outcome, CliError> {
    let r = suites::run(&a.lemma, a.trials, a.seed)
        .ok_or_else(|| usage(format!("unknown suite '{}' (one of {})", a.lemma, suites::SUITES.join(", "))))?;
    let tight = r.tightest.as_ref().map(|(t, o, b)| json!({"trial": t, "observed": codec::q(o), "bound": codec::q(b)}));
    let line = format!(
        "{} {}: {} checked, {} skipped, {} violations",
        if r.passed() { "PASS" } else { "FAIL" },
        r.id,
        r.checked,
        r.skipped,
        r.violations.len()
    );
    let mut o = Outcome::verdict(
        json!({
            "suite": r.id,
            "property": suites::describe(&r.id),
            "trials": r.trials,
            "checked": r.checked,
            "skipped": r.skipped,
            "violations": r.violations.iter().map(|(t, d)| json!({"trial": t, "detail": d})).collect::<Vec<_>>(),
            "tightest": tight,
            "passed": r.passed(),
        }),
        r.passed(),
        line,
    );
    o.seed = Some(a.seed);
    Ok(o)
}

#[cfg(test)]
mod tests;
