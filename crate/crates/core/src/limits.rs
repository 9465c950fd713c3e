//! Inductive sequences for the three limit algebras and a finite-stage
//! harness for the genericity conditions.

use thiserror::Error;

use crate::amalgamation::{self, AmalgError, ClassTag};
use crate::blocks::{fmt_q, Block, Kind, TestElement, K0, Q};
use crate::homs::{self, DiagonalHom, HomError};
use crate::measures::TraceMeasure;

/// Stages with larger fibers are described by parameters only.
pub const DESK_CAP: u64 = 1_000_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LimitError {
    #[error(transparent)]
    Hom(#[from] HomError),
    #[error(transparent)]
    Amalg(#[from] AmalgError),
    #[error("invalid request: {0}")]
    Invalid(String),
    #[error("no constructor route: {0}")]
    NoRoute(String),
    #[error("bound not reached within {stages} materialised stages: {detail}")]
    Unreached { stages: usize, detail: String },
}

/// How one step was built.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum StepKind {
    RazakEmbed { p: u64 },
    GenEmbed { p: u64, j: u64 },
    GenAmplify { kp: u64, j: u64 },
}

impl StepKind {
    pub fn label(&self) -> String {
        match self {
            StepKind::RazakEmbed { p } => format!("razak_embed p={p}"),
            StepKind::GenEmbed { p, j } => format!("gen_embed p={p} j={j}"),
            StepKind::GenAmplify { kp, j } => format!("gen_amplify k'={kp} j={j}"),
        }
    }
}

/// Parameters of one step, kept even when the step is too large to build.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StepInfo {
    pub from: Block,
    pub to: Block,
    pub kind: StepKind,
    pub k0: K0,
    /// For z0 embeddings: the padding bound the multiplicity covers, and
    /// whether it came from exhaustive enumeration.
    pub padding: Option<(u64, bool)>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct InductiveSequence {
    pub class: ClassTag,
    /// Every stage block, materialised or not.
    pub blocks: Vec<Block>,
    pub info: Vec<StepInfo>,
    /// Built prefix: `steps[i]` maps stage `i` to stage `i+1`.
    pub steps: Vec<DiagonalHom>,
    /// Traces on the built stages: Lebesgue on the last, pulled back below.
    pub traces: Vec<TraceMeasure>,
}

impl InductiveSequence {
    pub fn materialised(&self) -> usize {
        self.traces.len()
    }

    /// Composite `stage i → stage j` of built steps (`i ≤ j`).
    pub fn composite(&self, i: usize, j: usize) -> Result<DiagonalHom, LimitError> {
        if i > j || j >= self.materialised() {
            return Err(LimitError::Invalid(format!("stages {i}..{j} of {} built", self.materialised())));
        }
        if i == j {
            return Ok(homs::identity(self.blocks[i]));
        }
        Ok(homs::compose_chain(&self.steps[i..j])?)
    }
}

fn build(
    class: ClassTag,
    blocks: Vec<Block>,
    info: Vec<StepInfo>,
    make: impl Fn(&StepInfo) -> Result<DiagonalHom, HomError>,
) -> Result<InductiveSequence, LimitError> {
    let built = blocks.iter().take_while(|b| b.fiber_dim() <= DESK_CAP).count();
    let steps: Vec<DiagonalHom> = info[..built.saturating_sub(1)].iter().map(&make).collect::<Result<_, _>>()?;
    let mut traces = vec![TraceMeasure::lebesgue(blocks[built - 1])];
    for h in steps.iter().rev() {
        let below = homs::pullback_trace(h, traces.last().unwrap())?;
        traces.push(below);
    }
    traces.reverse();
    Ok(InductiveSequence { class, blocks, info, steps, traces })
}

/// Razak sequence from `A_{1,1}` with embedding multiplicity `i+1` at step
/// `i`; `stages` counts blocks.
pub fn w_sequence(stages: usize) -> Result<InductiveSequence, LimitError> {
    if stages == 0 {
        return Err(LimitError::Invalid("a sequence needs at least one stage".into()));
    }
    let mut blocks = vec![Block::razak(1, 1)];
    let mut info = Vec::new();
    for i in 1..stages {
        let b = *blocks.last().unwrap();
        let p = i as u64 + 1;
        let to = Block::razak(p * b.n, (p * b.n - 1) * b.k);
        info.push(StepInfo { from: b, to, kind: StepKind::RazakEmbed { p }, k0: K0::Trivial, padding: None });
        blocks.push(to);
    }
    build(ClassTag::W, blocks, info, |s| {
        homs::razak_embed(
            s.from.n,
            s.from.k,
            match s.kind {
                StepKind::RazakEmbed { p } => p,
                _ => unreachable!(),
            },
        )
    })
}

/// Smallest odd `p ≥ 3` whose `(p−1)/2` covers the padding needed between
/// equal-K₀ representations of every earlier stage in dimension
/// `(n−1)k` of the current stage.
pub fn z0_multiplicity(current: Block, earlier: &[Block]) -> (u64, u64, bool) {
    let qdim = (current.n - 1) * current.k;
    let mut need = 0;
    let mut exact = true;
    for b in earlier {
        let pb = amalgamation::point_bound(qdim, *b);
        need = need.max(pb.value);
        exact &= pb.exact;
    }
    ((2 * need + 1).max(3), need, exact)
}

fn gen_sequence(stages: usize, primes: Option<&[u64]>) -> Result<InductiveSequence, LimitError> {
    if stages == 0 {
        return Err(LimitError::Invalid("a sequence needs at least one stage".into()));
    }
    let class = match primes {
        None => ClassTag::K1,
        Some(ps) => ClassTag::kp(ps.to_vec())?,
    };
    let mut blocks = vec![Block::gen(2, 1)];
    let mut info = Vec::new();
    let mut cycle = 0usize;
    while blocks.len() < stages {
        let b = *blocks.last().unwrap();
        let (p, need, exact) = z0_multiplicity(b, &blocks);
        let to = Block::gen(p * b.n, (p * b.n - 1) * b.k);
        let j = b.n / 2;
        info.push(StepInfo {
            from: b,
            to,
            kind: StepKind::GenEmbed { p, j },
            k0: K0::Value(2 * j as i64 - (b.n as i64 - 1)),
            padding: Some((need, exact)),
        });
        blocks.push(to);
        if let Some(ps) = primes {
            if blocks.len() >= stages {
                break;
            }
            let pr = ps[cycle % ps.len()];
            cycle += 1;
            let to2 = Block::gen(to.n, to.k * pr);
            info.push(StepInfo {
                from: to,
                to: to2,
                kind: StepKind::GenAmplify { kp: pr, j: pr },
                k0: K0::Value(pr as i64),
                padding: None,
            });
            blocks.push(to2);
        }
    }
    build(class, blocks, info, |s| match s.kind {
        StepKind::GenEmbed { p, j } => homs::gen_embed(s.from.n, s.from.k, p, j),
        StepKind::GenAmplify { kp, j } => homs::gen_amplify(s.from.n, s.from.k, kp, j),
        _ => unreachable!(),
    })
}

/// Gen sequence from `B_{2,1}` with K₀ = 1 embeddings of odd multiplicity.
pub fn z0_sequence(stages: usize) -> Result<InductiveSequence, LimitError> {
    gen_sequence(stages, None)
}

/// As [`z0_sequence`], each embedding followed by an amplification of
/// K₀ = p, cycling through `primes`; `cycles` counts embedding/amplification
/// pairs.
pub fn z0_uhf_sequence(primes: &[u64], cycles: usize) -> Result<InductiveSequence, LimitError> {
    if primes.is_empty() {
        return Err(LimitError::Invalid("z0uhf needs at least one prime".into()));
    }
    gen_sequence(1 + 2 * cycles, Some(primes))
}

/// Product of the K₀ values of all recorded steps.
pub fn composite_k0(seq: &InductiveSequence) -> K0 {
    if seq.class == ClassTag::W {
        return K0::Trivial;
    }
    K0::Value(seq.info.iter().map(|s| s.k0.value()).product())
}

/// Stepwise validation: valid homs, exact trace pullbacks, class K₀.
pub fn validate_sequence(seq: &InductiveSequence) -> Vec<String> {
    let mut problems = Vec::new();
    for (i, h) in seq.steps.iter().enumerate() {
        if !homs::validate(h).valid() {
            problems.push(format!("step {i}: invalid hom"));
        }
        if !homs::is_trace_preserving(h, &seq.traces[i], &seq.traces[i + 1]) {
            problems.push(format!("step {i}: trace not pulled back"));
        }
        if !seq.class.admits(homs::k0(h)) {
            problems.push(format!("step {i}: K0 outside class {}", seq.class.label()));
        }
        if homs::k0(h) != seq.info[i].k0 {
            problems.push(format!("step {i}: K0 differs from recorded value"));
        }
        if !seq.traces[i].is_faithful() {
            problems.push(format!("stage {i}: trace not faithful"));
        }
    }
    problems
}

/// Constructor route `C → stage s`: embed with multiplicity `n_s/n`, then
/// amplify; K₀ = 1 on Gen blocks.
pub fn route_into(seq: &InductiveSequence, c: Block) -> Result<(usize, DiagonalHom), LimitError> {
    for s in 0..seq.materialised() {
        let t = seq.blocks[s];
        if t.kind != c.kind || !t.n.is_multiple_of(c.n) {
            continue;
        }
        let p = t.n / c.n;
        let attempt = || -> Result<DiagonalHom, HomError> {
            let (first, mid) = match (c.kind, p) {
                (_, 1) => (homs::identity(c), c),
                (Kind::Razak, _) => {
                    let h = homs::razak_embed(c.n, c.k, p)?;
                    (h.clone(), h.cod)
                }
                (Kind::Gen, _) => {
                    if !c.n.is_multiple_of(2) || p.is_multiple_of(2) {
                        return Err(HomError::OutOfRange("K0 = 1 embedding needs n even and p odd".into()));
                    }
                    let h = homs::gen_embed(c.n, c.k, p, c.n / 2)?;
                    (h.clone(), h.cod)
                }
            };
            if !t.k.is_multiple_of(mid.k) {
                return Err(HomError::OutOfRange("k does not divide".into()));
            }
            let kp = t.k / mid.k;
            let amp = match c.kind {
                Kind::Razak => homs::razak_amplify(mid.n, mid.k, kp)?,
                Kind::Gen => {
                    if kp.is_multiple_of(2) {
                        return Err(HomError::OutOfRange("K0 = 1 amplification needs odd k'".into()));
                    }
                    homs::gen_amplify(mid.n, mid.k, kp, kp.div_ceil(2))?
                }
            };
            homs::compose(&first, &amp)
        };
        if let Ok(h) = attempt() {
            return Ok((s, h));
        }
    }
    Err(LimitError::NoRoute(format!("{c} into the first {} stages", seq.materialised())))
}

#[derive(Clone, Debug, PartialEq)]
pub struct GenericityCertificate {
    pub from_stage: usize,
    /// Stage receiving `C`.
    pub route_stage: usize,
    /// Stage where the two composites are compared.
    pub compare_stage: usize,
    pub epsilon: Q,
    pub d_diag: Q,
    pub interior_bound: Q,
    pub sup_fiber_dist: Q,
    pub sup_exact: bool,
    pub readings_at_infinity: Vec<(String, Q)>,
    pub mesh_points: usize,
    pub diameters: (Q, Q),
    pub trace_preserved: bool,
    pub passed: bool,
    pub note: String,
}

/// Second genericity condition at finite depth: route `C` back into the
/// sequence and find a stage where `stage i → C → stage k'` and the
/// sequence's own composite are fiberwise `eps`-close.
pub fn genericity_certify(
    seq: &InductiveSequence,
    from_stage: usize,
    c_trace: &TraceMeasure,
    psi: &DiagonalHom,
    f: &[TestElement],
    eps: &Q,
) -> Result<GenericityCertificate, LimitError> {
    if from_stage >= seq.materialised() || psi.dom != seq.blocks[from_stage] {
        return Err(LimitError::Invalid(format!("psi must start at a built stage, got {}", psi.dom)));
    }
    if !homs::is_trace_preserving(psi, &seq.traces[from_stage], c_trace) {
        return Err(LimitError::Invalid("psi does not carry the stage trace to the given trace".into()));
    }
    if !seq.class.admits(homs::k0(psi)) {
        return Err(LimitError::Invalid(format!("psi has K0 outside class {}", seq.class.label())));
    }
    let (start, chain) = route_into(seq, psi.cod)?;
    let pulled = homs::pullback_trace(&chain, &seq.traces[start])?;
    let back = homs::compose(&homs::transition(c_trace, &pulled)?, &chain)?;
    let lip = homs::lipschitz_max(f);
    let mut last = None;
    for k in start.max(from_stage)..seq.materialised() {
        let x = seq.composite(from_stage, k)?;
        let tail = seq.composite(start, k)?;
        let y = homs::compose_chain(&[psi.clone(), back.clone(), tail])?;
        let dd = homs::d_diag(&x, &y)?;
        let ts = amalgamation::mesh_for(&x, &y);
        let (u, readings) = homs::sup_fiber_udist(&x, &y, f, &ts)?;
        let bound = &lip * &dd;
        let tp = homs::is_trace_preserving(&x, &seq.traces[from_stage], &seq.traces[k])
            && homs::is_trace_preserving(&y, &seq.traces[from_stage], &seq.traces[k]);
        let passed = tp && bound < *eps && u.value < *eps;
        let cert = GenericityCertificate {
            from_stage,
            route_stage: start,
            compare_stage: k,
            epsilon: eps.clone(),
            d_diag: dd,
            interior_bound: bound,
            sup_fiber_dist: u.value,
            sup_exact: u.exact,
            readings_at_infinity: readings.into_iter().filter(|(l, _)| l.starts_with("inf")).collect(),
            mesh_points: ts.len(),
            diameters: (homs::diameter(&x), homs::diameter(&y)),
            trace_preserved: tp,
            passed,
            note: "fiberwise certificate; the conjugating unitary is not computed".into(),
        };
        if passed {
            return Ok(cert);
        }
        last = Some(cert);
    }
    let detail = match last {
        Some(c) => format!(
            "best at stage {}: bound {} sup {} (eps {}); more stages are needed",
            c.compare_stage,
            fmt_q(&c.interior_bound),
            fmt_q(&c.sup_fiber_dist),
            fmt_q(eps)
        ),
        None => "no stage at or after the route stage".into(),
    };
    Err(LimitError::Unreached { stages: seq.materialised(), detail })
}

#[cfg(test)]
mod tests;
