//! Joint embeddings, near amalgamation with fiberwise certificates, and the
//! point padding that makes equal-K₀ representations unitarily equivalent.

use num_traits::{ToPrimitive, Zero};
use thiserror::Error;

use crate::blocks::{canonical_rep, fmt_q, q, qi, Block, BlockError, Kind, RepDescriptor, SpecPoint, TestElement, K0, Q};
use crate::homs::{self, DiagonalHom, HomError};
use crate::measures::TraceMeasure;
use crate::plmaps;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AmalgError {
    #[error(transparent)]
    Hom(#[from] HomError),
    #[error(transparent)]
    Block(#[from] BlockError),
    #[error("not trace-preserving: {0}")]
    NotTracePreserving(String),
    #[error("K-theory mismatch: {0}")]
    KTheoryMismatch(String),
    #[error("invalid class: {0}")]
    BadClass(String),
    #[error("trace must be a faithful diffuse probability: {0}")]
    BadTrace(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("too large to build: {0}")]
    TooLarge(String),
}

/// Which class of blocks and morphisms an amalgamation must stay in.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ClassTag {
    /// Razak blocks, any trace-preserving map.
    W,
    /// Gen blocks, no K-theory restriction.
    K0,
    /// Gen blocks, `|K₀| = 1`.
    K1,
    /// Gen blocks, K₀ a nonzero product of the listed primes.
    Kp(Vec<u64>),
}

impl ClassTag {
    pub fn parse(s: &str) -> Result<ClassTag, AmalgError> {
        match s {
            "W" | "w" => Ok(ClassTag::W),
            "K0" | "k0" => Ok(ClassTag::K0),
            "K1" | "k1" => Ok(ClassTag::K1),
            _ => {
                let rest = s.strip_prefix("Kp:").or_else(|| s.strip_prefix("kp:"));
                let Some(list) = rest else {
                    return Err(AmalgError::BadClass(format!("unknown class '{s}' (W, K0, K1, Kp:2,3)")));
                };
                let primes: Result<Vec<u64>, _> = list.split(',').map(|p| p.trim().parse::<u64>()).collect();
                let primes = primes.map_err(|e| AmalgError::BadClass(format!("prime list '{list}': {e}")))?;
                ClassTag::kp(primes)
            }
        }
    }

    pub fn kp(primes: Vec<u64>) -> Result<ClassTag, AmalgError> {
        if primes.is_empty() {
            return Err(AmalgError::BadClass("Kp needs at least one prime".into()));
        }
        for &p in &primes {
            if p < 2 || (2..p).take_while(|d| d * d <= p).any(|d| p % d == 0) {
                return Err(AmalgError::BadClass(format!("{p} is not prime")));
            }
        }
        Ok(ClassTag::Kp(primes))
    }

    pub fn kind(&self) -> Kind {
        match self {
            ClassTag::W => Kind::Razak,
            _ => Kind::Gen,
        }
    }

    pub fn label(&self) -> String {
        match self {
            ClassTag::W => "W".into(),
            ClassTag::K0 => "K0".into(),
            ClassTag::K1 => "K1".into(),
            ClassTag::Kp(ps) => format!("Kp:{}", ps.iter().map(|p| p.to_string()).collect::<Vec<_>>().join(",")),
        }
    }

    /// Does a morphism with this K₀ belong to the class?
    pub fn admits(&self, k0: K0) -> bool {
        match (self, k0) {
            (ClassTag::W, K0::Trivial) | (ClassTag::K0, K0::Value(_)) => true,
            (ClassTag::K1, K0::Value(v)) => v.abs() == 1,
            (ClassTag::Kp(ps), K0::Value(v)) => {
                if v == 0 {
                    return false;
                }
                let mut m = v.unsigned_abs();
                for &p in ps {
                    while m % p == 0 {
                        m /= p;
                    }
                }
                m == 1
            }
            _ => false,
        }
    }
}

fn check_trace(t: &TraceMeasure, b: Block) -> Result<(), AmalgError> {
    if t.block != b {
        return Err(AmalgError::BadTrace(format!("trace lives on {}, expected {b}", t.block)));
    }
    if !(t.is_faithful() && t.is_diffuse() && t.is_probability()) {
        return Err(AmalgError::BadTrace(format!("trace on {b}")));
    }
    Ok(())
}

/// Precompose a plain hom with the transition that makes it carry `sigma`
/// to Lebesgue on its codomain.
pub fn lebesgue_leg(chain: &DiagonalHom, sigma: &TraceMeasure) -> Result<DiagonalHom, AmalgError> {
    let pulled = homs::pullback_trace(chain, &TraceMeasure::lebesgue(chain.cod))?;
    Ok(homs::compose(&homs::transition(sigma, &pulled)?, chain)?)
}

#[derive(Clone, Debug, PartialEq)]
pub struct JepResult {
    pub cod: Block,
    pub lambda: TraceMeasure,
    pub psi1: DiagonalHom,
    pub psi2: DiagonalHom,
}

/// Common trace-preserving target for `(a, sigma)` and `(b, tau)`.
pub fn jep(a: Block, sigma: &TraceMeasure, b: Block, tau: &TraceMeasure, class: &ClassTag) -> Result<JepResult, AmalgError> {
    if a.kind != class.kind() || b.kind != class.kind() {
        return Err(AmalgError::BadClass(format!("class {} does not contain {a} and {b}", class.label())));
    }
    check_trace(sigma, a)?;
    check_trace(tau, b)?;
    let (c1, c2) = match class.kind() {
        Kind::Razak => razak_chains(a, b)?,
        Kind::Gen => gen_chains(a, b, class)?,
    };
    debug_assert_eq!(c1.cod, c2.cod);
    let psi1 = lebesgue_leg(&c1, sigma)?;
    let psi2 = lebesgue_leg(&c2, tau)?;
    Ok(JepResult { cod: c1.cod, lambda: TraceMeasure::lebesgue(c1.cod), psi1, psi2 })
}

fn chain(parts: &[DiagonalHom]) -> Result<DiagonalHom, AmalgError> {
    Ok(homs::compose_chain(parts)?)
}

/// Embed-then-amplify chains into `A_{nn',(nn'−1)kk'}`. Blocks with `n = 1`
/// are first embedded into `A_{2,k}`, since the embedding multiplicity must
/// be at least 2.
fn razak_chains(a: Block, b: Block) -> Result<(DiagonalHom, DiagonalHom), AmalgError> {
    let lift = |x: Block| -> Result<Vec<DiagonalHom>, AmalgError> {
        Ok(if x.n == 1 { vec![homs::razak_embed(1, x.k, 2)?] } else { vec![] })
    };
    let (mut pa, mut pb) = (lift(a)?, lift(b)?);
    let top = |p: &[DiagonalHom], x: Block| p.last().map(|h| h.cod).unwrap_or(x);
    let (a2, b2) = (top(&pa, a), top(&pb, b));
    let (n, k, m, l) = (a2.n, a2.k, b2.n, b2.k);
    pa.push(homs::razak_embed(n, k, m)?);
    pa.push(homs::razak_amplify(n * m, (n * m - 1) * k, l)?);
    pb.push(homs::razak_embed(m, l, n)?);
    pb.push(homs::razak_amplify(n * m, (n * m - 1) * l, k)?);
    Ok((chain(&pa)?, chain(&pb)?))
}

/// Two rounds of K₀ = 1 maps into a common Gen block. `k = 1` blocks are
/// amplified first (K₀ = 1), since the first round needs `k ≥ 2`. Blocks with
/// `n = 1` admit no K₀ = ±1 map of this shape; under `K0` they are embedded
/// with K₀ = 0 instead.
fn gen_chains(a: Block, b: Block, class: &ClassTag) -> Result<(DiagonalHom, DiagonalHom), AmalgError> {
    let lift = |x: Block| -> Result<Vec<DiagonalHom>, AmalgError> {
        let mut v = Vec::new();
        let mut cur = x;
        if cur.n == 1 {
            if *class != ClassTag::K0 {
                return Err(AmalgError::Unsupported(format!(
                    "{x}: no K0 = ±1 constructor leaves n = 1 (class {})",
                    class.label()
                )));
            }
            let h = homs::gen_embed(1, cur.k, 3, 0)?;
            cur = h.cod;
            v.push(h);
        }
        if cur.k == 1 {
            v.push(homs::gen_amplify(cur.n, 1, 3, 2)?);
        }
        Ok(v)
    };
    let (mut pa, mut pb) = (lift(a)?, lift(b)?);
    let top = |p: &[DiagonalHom], x: Block| p.last().map(|h| h.cod).unwrap_or(x);
    let (a2, b2) = (top(&pa, a), top(&pb, b));
    let (sa, sb) = (a2.n * a2.k, b2.n * b2.k);
    let r1 = homs::gen_rho(a2.n, a2.k, sb * (sb - 1), 1)?;
    let r2 = homs::gen_rho(b2.n, b2.k, sa * (sa - 1), 1)?;
    let (m1, m2) = (r1.cod, r2.cod);
    pa.push(r1);
    pb.push(r2);
    pa.push(homs::gen_rho(m1.n, m1.k, 2, 1)?);
    pb.push(homs::gen_rho(m2.n, m2.k, 2, 1)?);
    Ok((chain(&pa)?, chain(&pb)?))
}

/// Padding points found by [`stable_points`]: `rho1 ⊕ π_xs ≅ rho2 ⊕ π_ys`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Padding {
    pub j: u64,
    pub xs: Vec<(Q, u64)>,
    pub ys: Vec<(Q, u64)>,
}

fn multiset_minus(a: &[(Q, u64)], b: &[(Q, u64)]) -> Vec<(Q, u64)> {
    a.iter()
        .filter_map(|(x, m)| {
            let other = b.iter().find(|(y, _)| y == x).map(|(_, c)| *c).unwrap_or(0);
            (*m > other).then(|| (x.clone(), m - other))
        })
        .collect()
}

fn count(v: &[(Q, u64)]) -> u64 {
    v.iter().map(|(_, m)| m).sum()
}

/// Fewest point representations to add on each side so that the two
/// representations become unitarily equivalent.
///
/// Interior points are exchanged across; the boundary summands are balanced
/// with copies of `π_0` (one `n`-stack of each boundary summand) and `π_1`
/// (`n−1` stacks plus the zero summand). Both sides then receive the same
/// number of points automatically.
pub fn stable_points(rho1: &RepDescriptor, rho2: &RepDescriptor) -> Result<Padding, AmalgError> {
    let b = rho1.block;
    if rho2.block != b {
        return Err(AmalgError::Block(BlockError::WrongKind(format!("{} vs {}", b, rho2.block))));
    }
    if rho1.dim() != rho2.dim() {
        return Err(AmalgError::Block(BlockError::DimensionMismatch { expected: rho1.dim(), got: rho2.dim() }));
    }
    let (k1, k2) = (crate::blocks::rep_k0(rho1), crate::blocks::rep_k0(rho2));
    if k1 != k2 {
        return Err(AmalgError::KTheoryMismatch(format!("{} vs {}", k1.value(), k2.value())));
    }
    let (e1, e2) = (rho1.expand(), rho2.expand());
    let only2 = multiset_minus(&e2.interior, &e1.interior);
    let only1 = multiset_minus(&e1.interior, &e2.interior);
    let n = b.n as i64;
    let di = count(&only1) as i64 - count(&only2) as i64;
    let da = e1.inf1 as i64 - e2.inf1 as i64;
    // copies of π_0 (u) and π_1 (v), side 1 minus side 2
    let u = -da - (n - 1) * di;
    let v = da + n * di;
    let mut xs = only2;
    let mut ys = only1;
    let push = |side: &mut Vec<(Q, u64)>, at: Q, c: i64| {
        if c > 0 {
            side.push((at, c as u64));
        }
    };
    push(&mut xs, Q::zero(), u);
    push(&mut ys, Q::zero(), -u);
    push(&mut xs, qi(1), v);
    push(&mut ys, qi(1), -v);
    let xs = crate::blocks::group_sorted(xs);
    let ys = crate::blocks::group_sorted(ys);
    let (jx, jy) = (count(&xs), count(&ys));
    let pad = |r: &RepDescriptor, pts: &[(Q, u64)]| -> Result<RepDescriptor, BlockError> {
        r.direct_sum(&RepDescriptor::with_multiset(b, pts.to_vec(), 0, 0, 0)?)
    };
    let (l, r) = (canonical_rep(&pad(rho1, &xs)?), canonical_rep(&pad(rho2, &ys)?));
    if jx != jy || l != r {
        return Err(AmalgError::Unsupported(format!(
            "padding failed to balance ({jx} vs {jy} points); inputs are not related by points"
        )));
    }
    Ok(Padding { j: jx, xs, ys })
}

/// Largest padding over all pairs of equal-K₀ representations of dimension
/// `q`, interior points placed adversarially (disjoint).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PointBound {
    pub value: u64,
    /// False when the enumeration was too large and a dimension-count bound
    /// was returned instead.
    pub exact: bool,
}

const POINT_BOUND_ENUM_MAX: usize = 6000;

pub fn point_bound(qdim: u64, block: Block) -> PointBound {
    let (n, k) = (block.n, block.k);
    let fd = block.fiber_dim();
    let gen = block.kind == Kind::Gen;
    // canonical shapes (interior count, inf1, inf2, zeros); interior points
    // enter the padding only through their number when placed disjointly
    let mut shapes: Vec<(u64, u64, u64, u64)> = Vec::new();
    let mut too_many = false;
    'outer: for i in 0..=qdim / fd {
        let rest = qdim - i * fd;
        for a in 0..=rest / k {
            let rb_max = if gen { (rest - a * k) / k } else { 0 };
            for bb in 0..=rb_max {
                if gen && a.min(bb) >= n || !gen && a >= n {
                    continue;
                }
                let z = rest - (a + bb) * k;
                shapes.push((i, a, bb, z));
                if shapes.len() > POINT_BOUND_ENUM_MAX {
                    too_many = true;
                    break 'outer;
                }
            }
        }
    }
    if too_many {
        // every term of the padding is bounded by the dimension counts
        let imax = qdim / fd;
        let amax = qdim / k;
        return PointBound { value: imax + 2 * amax + (2 * n) * imax, exact: false };
    }
    let mut best = 0u64;
    for s1 in &shapes {
        for s2 in &shapes {
            let same_k = !gen || (s1.1 as i64 - s1.2 as i64) == (s2.1 as i64 - s2.2 as i64);
            if !same_k {
                continue;
            }
            let nn = n as i64;
            let di = s1.0 as i64 - s2.0 as i64;
            let da = s1.1 as i64 - s2.1 as i64;
            let u = -da - (nn - 1) * di;
            let v = da + nn * di;
            let j = s2.0 as i64 + u.max(0) + v.max(0);
            best = best.max(j as u64);
        }
    }
    PointBound { value: best, exact: true }
}

/// Fiberwise near-amalgamation certificate.
#[derive(Clone, Debug, PartialEq)]
pub struct NapCertificate {
    pub epsilon: Q,
    pub g: Vec<TestElement>,
    /// Largest fiber distance read on the mesh and at the points at infinity.
    pub sup_fiber_dist: Q,
    /// All readings exact (single test element), otherwise upper bounds.
    pub sup_exact: bool,
    pub readings_at_infinity: Vec<(String, Q)>,
    pub mesh_points: usize,
    pub mesh_resolution: Q,
    /// Rigorous interior bound `L · d_diag` of the two composites.
    pub interior_bound: Q,
    pub d_diag: Q,
    pub lipschitz: Q,
    pub trace_preserved: bool,
    pub k0_record: Vec<i64>,
    pub p_used: u64,
    pub p_theory: u64,
    pub shrink_used: Option<u64>,
    pub shrink_theory: Option<u64>,
    pub padding_j: Option<u64>,
    pub passed: bool,
    pub note: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct NapResult {
    pub cod: Block,
    pub psi1: DiagonalHom,
    pub psi2: DiagonalHom,
    pub composite1: DiagonalHom,
    pub composite2: DiagonalHom,
    pub certificate: NapCertificate,
}

/// A span out of `(A, sigma)`.
#[derive(Clone, Debug)]
pub struct Span<'a> {
    pub sigma: &'a TraceMeasure,
    pub phi1: &'a DiagonalHom,
    pub tau1: &'a TraceMeasure,
    pub phi2: &'a DiagonalHom,
    pub tau2: &'a TraceMeasure,
}

const MESH: u64 = 64;
const MESH_BREAKPOINT_CAP: usize = 2048;
const UNITARY_NOTE: &str = "fiberwise certificate: distances are per fiber; the single conjugating unitary is not computed";

fn check_span(s: &Span) -> Result<(), AmalgError> {
    if s.phi1.dom != s.phi2.dom || s.sigma.block != s.phi1.dom {
        return Err(AmalgError::Hom(HomError::Mismatch("span legs must share the domain of sigma".into())));
    }
    for (i, (phi, tau)) in [(s.phi1, s.tau1), (s.phi2, s.tau2)].into_iter().enumerate() {
        check_trace(tau, phi.cod)?;
        if !homs::is_trace_preserving(phi, s.sigma, tau) {
            return Err(AmalgError::NotTracePreserving(format!("leg {} does not pull its trace back to sigma", i + 1)));
        }
    }
    check_trace(s.sigma, s.sigma.block)?;
    Ok(())
}

/// Legs into a common block carrying Lebesgue. `need` decides whether a
/// codomain can be used as is.
fn common_target(s: &Span, class: &ClassTag, need: impl Fn(Block) -> bool) -> Result<(DiagonalHom, DiagonalHom), AmalgError> {
    let (b, c) = (s.phi1.cod, s.phi2.cod);
    if b == c && need(b) {
        let leb = TraceMeasure::lebesgue(b);
        let to_leb = |t: &TraceMeasure| -> Result<DiagonalHom, AmalgError> {
            if *t == leb {
                Ok(homs::identity(b))
            } else {
                Ok(homs::transition(t, &leb)?)
            }
        };
        return Ok((to_leb(s.tau1)?, to_leb(s.tau2)?));
    }
    let j = jep(b, s.tau1, c, s.tau2, class)?;
    Ok((j.psi1, j.psi2))
}

/// Largest embedding multiplicity the searches will build.
pub const MAX_EMBED: u64 = 4096;

/// `(E, λ) → (D, λ)`: transition onto the pulled-back trace, then embed.
fn embed_leg(e: Block, p: u64) -> Result<DiagonalHom, AmalgError> {
    if p > MAX_EMBED {
        return Err(AmalgError::TooLarge(format!("embedding multiplicity {p} out of {e} exceeds {MAX_EMBED}")));
    }
    let emb = match e.kind {
        Kind::Razak => homs::razak_embed(e.n, e.k, p)?,
        Kind::Gen => homs::gen_embed(e.n, e.k, p, e.n / 2)?,
    };
    lebesgue_leg(&emb, &TraceMeasure::lebesgue(e))
}

fn slope_bound(hs: &[&DiagonalHom]) -> Q {
    hs.iter().map(|h| homs::max_slope(h)).max().unwrap_or_else(Q::zero)
}

/// Smallest integer `p` with `3/p < delta/2`.
fn p_for_delta(delta: &Q) -> u64 {
    (qi(6) / delta).floor().to_integer().to_u64().unwrap_or(u64::MAX - 1) + 1
}

pub(crate) fn mesh_for(c1: &DiagonalHom, c2: &DiagonalHom) -> Vec<Q> {
    let all = [c1.map_list(), c2.map_list()].concat();
    let mut ts = plmaps::merged_mesh(all.iter());
    if ts.len() > MESH_BREAKPOINT_CAP {
        ts.clear();
    }
    ts.extend(homs::uniform_mesh(MESH));
    ts.sort();
    ts.dedup();
    ts
}

struct Reading {
    dd: Q,
    bound: Q,
    sup: Q,
    exact: bool,
    infs: Vec<(String, Q)>,
    mesh: usize,
}

fn read(c1: &DiagonalHom, c2: &DiagonalHom, g: &[TestElement], lip: &Q) -> Result<Reading, AmalgError> {
    let dd = homs::d_diag(c1, c2)?;
    let bound = lip * &dd;
    let ts = mesh_for(c1, c2);
    let (u, readings) = homs::sup_fiber_udist(c1, c2, g, &ts)?;
    let infs = readings.into_iter().filter(|(l, _)| l.starts_with("inf")).collect();
    Ok(Reading { dd, bound, sup: u.value, exact: u.exact, infs, mesh: ts.len() })
}

/// Razak near amalgamation. The embedding multiplicity is the first `p` of
/// an increasing search whose exact `L·d_diag` is below `eps`; the value the
/// proof's δ would dictate is reported alongside as `p_theory`.
pub fn nap_razak(span: &Span, g: &[TestElement], eps: &Q) -> Result<NapResult, AmalgError> {
    check_span(span)?;
    if span.phi1.cod.kind != Kind::Razak {
        return Err(AmalgError::BadClass("nap_razak needs Razak blocks".into()));
    }
    let (l1, l2) = common_target(span, &ClassTag::W, |b| b.n >= 2)?;
    let f1 = homs::compose(span.phi1, &l1)?;
    let f2 = homs::compose(span.phi2, &l2)?;
    let e = f1.cod;
    let lip = homs::lipschitz_max(g);
    let smax = slope_bound(&[&f1, &f2]);
    let scale = &lip * &smax;
    let p_theory = if scale.is_zero() { 2 } else { p_for_delta(&(eps / (qi(3) * scale))).max(2) };
    let mut cands: Vec<u64> = [2u64, 3, 4, 6, 8, 12, 16, 24, 32, 48, 64, 96, 128].into_iter().filter(|&p| p < p_theory).collect();
    cands.push(p_theory);
    let mut last = None;
    for p in cands {
        let psi = match embed_leg(e, p) {
            Err(AmalgError::TooLarge(_)) if last.is_some() => break,
            r => r?,
        };
        let psi1 = homs::compose(&l1, &psi)?;
        let psi2 = homs::compose(&l2, &psi)?;
        let c1 = homs::compose(span.phi1, &psi1)?;
        let c2 = homs::compose(span.phi2, &psi2)?;
        let dd = homs::d_diag(&c1, &c2)?;
        let ok = &lip * &dd < *eps;
        last = Some((p, psi1, psi2, c1, c2));
        if ok {
            break;
        }
    }
    let (p, psi1, psi2, c1, c2) = last.expect("at least one candidate");
    let r = read(&c1, &c2, g, &lip)?;
    let lam = TraceMeasure::lebesgue(c1.cod);
    let tp = homs::is_trace_preserving(&c1, span.sigma, &lam) && homs::is_trace_preserving(&c2, span.sigma, &lam);
    let passed = tp && r.bound < *eps && r.sup < *eps;
    let certificate = NapCertificate {
        epsilon: eps.clone(),
        g: g.to_vec(),
        sup_fiber_dist: r.sup,
        sup_exact: r.exact,
        readings_at_infinity: r.infs,
        mesh_points: r.mesh,
        mesh_resolution: q(1, MESH as i64),
        interior_bound: r.bound,
        d_diag: r.dd,
        lipschitz: lip,
        trace_preserved: tp,
        k0_record: vec![],
        p_used: p,
        p_theory,
        shrink_used: None,
        shrink_theory: None,
        padding_j: None,
        passed,
        note: UNITARY_NOTE.into(),
    };
    Ok(NapResult { cod: c1.cod, psi1, psi2, composite1: c1, composite2: c2, certificate })
}

/// The boundary stacks compared at `∞₁` (and, swapped, at `∞₂`) after a
/// final embedding with `j = n/2`.
fn boundary_stacks(phi: &DiagonalHom, n: u64, swap: bool) -> Result<RepDescriptor, AmalgError> {
    let a = &phi.split_a;
    let b = phi.split_b.as_ref().ok_or_else(|| AmalgError::BadClass("Gen hom without second summand".into()))?;
    let (x, y) = if swap { (b, a) } else { (a, b) };
    let scale = |r: &RepDescriptor, c: u64| RepDescriptor {
        block: r.block,
        points: if c == 0 { vec![] } else { r.points.iter().map(|(p, m)| (p.clone(), m * c)).collect() },
        r1: r.r1 * c,
        r2: r.r2 * c,
        r0: r.r0 * c,
    };
    Ok(scale(x, n / 2).direct_sum(&scale(y, n / 2 - 1))?)
}

/// Gen near amalgamation for legs of equal K₀ in `class`.
///
/// Follows the proof's stages: common even-`n` target, optional diameter
/// shrink by a K₀ = 1 embedding, padding count `j` from [`stable_points`],
/// final embedding with odd `p ≥ 2j+1`. Shrink and final multiplicities are
/// searched upward from the smallest admissible values and the first
/// passing pair is kept; the proof's values are reported.
pub fn nap_gen(span: &Span, g: &[TestElement], eps: &Q, class: &ClassTag) -> Result<NapResult, AmalgError> {
    check_span(span)?;
    if class.kind() != Kind::Gen || span.phi1.cod.kind != Kind::Gen {
        return Err(AmalgError::BadClass("nap_gen needs Gen blocks and a Gen class".into()));
    }
    let (k1, k2) = (homs::k0(span.phi1), homs::k0(span.phi2));
    if !class.admits(k1) || !class.admits(k2) {
        return Err(AmalgError::KTheoryMismatch(format!(
            "K0 values {} and {} not in class {}",
            k1.value(),
            k2.value(),
            class.label()
        )));
    }
    if k1 != k2 {
        return Err(AmalgError::KTheoryMismatch(format!(
            "legs have K0 {} and {}; a common completion with one embedding would separate the fibers at infinity",
            k1.value(),
            k2.value()
        )));
    }
    let (l1, l2) = common_target(span, class, |b| b.n >= 2 && b.n % 2 == 0)?;
    let f1 = homs::compose(span.phi1, &l1)?;
    let f2 = homs::compose(span.phi2, &l2)?;
    let lip = homs::lipschitz_max(g);
    let scale = &lip * slope_bound(&[&f1, &f2]);
    let shrink_theory = if scale.is_zero() { 3 } else { odd_at_least(p_for_delta(&(eps / (qi(30) * scale)))) };
    let mut shrinks: Vec<Option<u64>> = vec![None];
    shrinks.extend([3u64, 5, 9, 17].into_iter().filter(|&p| p < shrink_theory).map(Some));
    shrinks.push(Some(shrink_theory));
    let mut last = None;
    'search: for s in shrinks {
        let (s1, s2) = match s {
            None => (l1.clone(), l2.clone()),
            Some(p0) => {
                let sh = match embed_leg(f1.cod, p0) {
                    Err(AmalgError::TooLarge(_)) if last.is_some() => break 'search,
                    r => r?,
                };
                (homs::compose(&l1, &sh)?, homs::compose(&l2, &sh)?)
            }
        };
        let g1 = homs::compose(span.phi1, &s1)?;
        let g2 = homs::compose(span.phi2, &s2)?;
        let n = g1.cod.n;
        let ja = stable_points(&boundary_stacks(&g1, n, false)?, &boundary_stacks(&g2, n, false)?)?.j;
        let jb = stable_points(&boundary_stacks(&g1, n, true)?, &boundary_stacks(&g2, n, true)?)?.j;
        let j = ja.max(jb);
        let p_theory = odd_at_least((2 * j + 1).max(3));
        let mut ps: Vec<u64> = [3u64, 5, 7, 9, 13, 17, 25, 33].into_iter().filter(|&p| p < p_theory).collect();
        ps.extend([p_theory, 2 * p_theory + 1]);
        for p in ps {
            let psi = match embed_leg(g1.cod, p) {
                Err(AmalgError::TooLarge(_)) if last.is_some() => break 'search,
                r => r?,
            };
            let psi1 = homs::compose(&s1, &psi)?;
            let psi2 = homs::compose(&s2, &psi)?;
            let c1 = homs::compose(span.phi1, &psi1)?;
            let c2 = homs::compose(span.phi2, &psi2)?;
            let r = read(&c1, &c2, g, &lip)?;
            let ok = r.bound < *eps && r.sup < *eps;
            last = Some((s, p, p_theory, j, psi1, psi2, c1, c2, r));
            if ok {
                break 'search;
            }
        }
    }
    let (s, p, p_theory, j, psi1, psi2, c1, c2, r) = last.expect("at least one candidate");
    let lam = TraceMeasure::lebesgue(c1.cod);
    let tp = homs::is_trace_preserving(&c1, span.sigma, &lam) && homs::is_trace_preserving(&c2, span.sigma, &lam);
    let (kc1, kc2) = (homs::k0(&c1), homs::k0(&c2));
    let k_ok = kc1 == kc2 && class.admits(kc1);
    let passed = tp && k_ok && r.bound < *eps && r.sup < *eps;
    let certificate = NapCertificate {
        epsilon: eps.clone(),
        g: g.to_vec(),
        sup_fiber_dist: r.sup,
        sup_exact: r.exact,
        readings_at_infinity: r.infs,
        mesh_points: r.mesh,
        mesh_resolution: q(1, MESH as i64),
        interior_bound: r.bound,
        d_diag: r.dd,
        lipschitz: lip,
        trace_preserved: tp,
        k0_record: vec![kc1.value(), kc2.value()],
        p_used: p,
        p_theory,
        shrink_used: s,
        shrink_theory: Some(shrink_theory),
        padding_j: Some(j),
        passed,
        note: UNITARY_NOTE.into(),
    };
    Ok(NapResult { cod: c1.cod, psi1, psi2, composite1: c1, composite2: c2, certificate })
}

fn odd_at_least(p: u64) -> u64 {
    if p.is_multiple_of(2) {
        p + 1
    } else {
        p
    }
}

/// Fiber distances at the points at infinity of the codomain.
pub fn infinity_readings(c1: &DiagonalHom, c2: &DiagonalHom, g: &[TestElement]) -> Result<Vec<(String, Q)>, AmalgError> {
    let pts: &[(SpecPoint, &str)] = match c1.cod.kind {
        Kind::Razak => &[(SpecPoint::Inf, "inf")],
        Kind::Gen => &[(SpecPoint::Inf1, "inf1"), (SpecPoint::Inf2, "inf2")],
    };
    pts.iter().map(|(p, l)| Ok((l.to_string(), homs::fiber_udist(c1, c2, g, p)?.value))).collect()
}

/// Readable one-line summary of a certificate.
pub fn summary_line(c: &NapCertificate) -> String {
    format!(
        "{} sup={} bound={} eps={} p={} (theory {}) trace_preserved={}",
        if c.passed { "PASS" } else { "FAIL" },
        fmt_q(&c.sup_fiber_dist),
        fmt_q(&c.interior_bound),
        fmt_q(&c.epsilon),
        c.p_used,
        c.p_theory,
        c.trace_preserved
    )
}
