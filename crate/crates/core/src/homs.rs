//! Diagonal homomorphisms between blocks of the same kind.
//!
//! A hom is stored as its sorted family of associated maps, run-length
//! encoded as `(map, multiplicity)`, together with the boundary descriptors
//! `a` (the fiber at ∞ or ∞₁) and, for Gen codomains, `b` (the fiber at ∞₂).

use std::collections::HashMap;

use num_traits::{One, Signed, Zero};
use thiserror::Error;

use crate::blocks::{
    canonical_rep, fmt_q, q, qu, rep_k0, Block, BlockError, Expanded, Kind, RepDescriptor, SpecPoint, TestElement, K0, Q,
};
use crate::measures::{self, MeasureError, TraceMeasure};
use crate::plmaps::{self, PLMap};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HomError {
    #[error("invalid hom: {0}")]
    Invalid(String),
    #[error("block mismatch: {0}")]
    Mismatch(String),
    #[error("parameters out of range: {0}")]
    OutOfRange(String),
    #[error(transparent)]
    Measure(#[from] MeasureError),
    #[error(transparent)]
    Block(#[from] BlockError),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DiagonalHom {
    pub dom: Block,
    pub cod: Block,
    pub xis: Vec<(PLMap, u64)>,
    pub split_a: RepDescriptor,
    pub split_b: Option<RepDescriptor>,
}

/// One line of a validation certificate.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Check {
    pub name: &'static str,
    pub ok: bool,
    /// Informational checks do not affect validity.
    pub fatal: bool,
    pub witness: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct Certificate {
    pub checks: Vec<Check>,
}

impl Certificate {
    fn push(&mut self, name: &'static str, ok: bool, fatal: bool, witness: String) {
        self.checks.push(Check { name, ok, fatal, witness });
    }

    pub fn valid(&self) -> bool {
        self.checks.iter().all(|c| c.ok || !c.fatal)
    }

    pub fn failures(&self) -> Vec<&Check> {
        self.checks.iter().filter(|c| !c.ok && c.fatal).collect()
    }
}

impl DiagonalHom {
    /// Builds and validates.
    pub fn new(
        dom: Block,
        cod: Block,
        xis: Vec<(PLMap, u64)>,
        split_a: RepDescriptor,
        split_b: Option<RepDescriptor>,
    ) -> Result<Self, HomError> {
        let h = DiagonalHom { dom, cod, xis, split_a, split_b };
        let c = validate(&h);
        if !c.valid() {
            let msg: Vec<String> = c.failures().iter().map(|c| format!("{}: {}", c.name, c.witness)).collect();
            return Err(HomError::Invalid(msg.join("; ")));
        }
        Ok(h)
    }

    /// Razak hom with the boundary descriptor read off the values at 0.
    pub fn razak_from_maps(dom: Block, cod: Block, xis: Vec<(PLMap, u64)>) -> Result<Self, HomError> {
        if dom.kind != Kind::Razak || cod.kind != Kind::Razak {
            return Err(HomError::Mismatch("razak_from_maps needs Razak blocks".into()));
        }
        let at0 = fiber_points(&xis, &Q::zero());
        let e = RepDescriptor::with_multiset(dom, at0, 0, 0, 0)?.expand();
        let n = cod.n;
        let divisible = e.inf1 % n == 0 && e.zeros % n == 0 && e.interior.iter().all(|(_, m)| m % n == 0);
        if !divisible {
            return Err(HomError::Invalid(format!("fiber at 0 is not {n} copies of one representation")));
        }
        let pts = e.interior.iter().map(|(x, m)| (x.clone(), m / n)).collect();
        let a = RepDescriptor::with_multiset(dom, pts, e.inf1 / n, 0, e.zeros / n)?;
        DiagonalHom::new(dom, cod, xis, canonical_rep(&a), None)
    }

    /// Number of associated maps, counted with multiplicity.
    pub fn len(&self) -> u64 {
        self.xis.iter().map(|r| r.1).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Associated maps listed with repetition.
    pub fn map_list(&self) -> Vec<PLMap> {
        self.xis.iter().flat_map(|(m, c)| std::iter::repeat_n(m.clone(), *c as usize)).collect()
    }

    /// Representation of the domain obtained by evaluating at `t ∈ [0,1]`.
    pub fn fiber_at(&self, t: &Q) -> RepDescriptor {
        RepDescriptor { block: self.dom, points: fiber_points(&self.xis, t), r1: 0, r2: 0, r0: 0 }
    }

    /// Fiber at a point of the codomain spectrum.
    pub fn fiber(&self, at: &SpecPoint) -> Result<RepDescriptor, HomError> {
        at.check(&self.cod)?;
        Ok(match at {
            SpecPoint::Interior(t) => self.fiber_at(t),
            SpecPoint::Inf | SpecPoint::Inf1 => self.split_a.clone(),
            SpecPoint::Inf2 => self.split_b.clone().expect("Gen hom has a second split"),
        })
    }

    /// Pull a representation of the codomain back to one of the domain.
    pub fn pull_rep(&self, rep: &RepDescriptor) -> Result<RepDescriptor, HomError> {
        if rep.block != self.cod {
            return Err(HomError::Mismatch(format!("rep of {} pulled through hom into {}", rep.block, self.cod)));
        }
        let mut pts: Vec<(Q, u64)> = Vec::new();
        for (s, m) in &rep.points {
            for (x, c) in fiber_points(&self.xis, s) {
                pts.push((x, c * m));
            }
        }
        let mut out = RepDescriptor::with_multiset(self.dom, pts, 0, 0, rep.r0)?;
        out = add_scaled(&out, &self.split_a, rep.r1)?;
        if let Some(b) = &self.split_b {
            out = add_scaled(&out, b, rep.r2)?;
        }
        Ok(out)
    }
}

fn add_scaled(base: &RepDescriptor, r: &RepDescriptor, c: u64) -> Result<RepDescriptor, HomError> {
    if c == 0 {
        return Ok(base.clone());
    }
    let pts = base.points.iter().cloned().chain(r.points.iter().map(|(x, m)| (x.clone(), m * c))).collect();
    Ok(RepDescriptor::with_multiset(base.block, pts, base.r1 + c * r.r1, base.r2 + c * r.r2, base.r0 + c * r.r0)?)
}

fn fiber_points(xis: &[(PLMap, u64)], t: &Q) -> Vec<(Q, u64)> {
    crate::blocks::group_sorted(xis.iter().map(|(m, c)| (m.eval(t), *c)).collect())
}

fn sum_expanded(parts: &[(&RepDescriptor, u64)]) -> Expanded {
    let mut e = Expanded::default();
    for (r, c) in parts {
        e.add(&r.expand().scaled(*c));
    }
    e
}

/// Checks every structural invariant; each failed check carries a witness.
pub fn validate(h: &DiagonalHom) -> Certificate {
    let mut c = Certificate::default();
    let same_kind = h.dom.kind == h.cod.kind;
    c.push("same_kind", same_kind, true, format!("{} -> {}", h.dom, h.cod));
    let j = h.len();
    let div = j * h.dom.fiber_dim() == h.cod.fiber_dim();
    c.push("fiber_divisibility", div, true, format!("{} maps x dim {} vs dim {}", j, h.dom.fiber_dim(), h.cod.fiber_dim()));

    let mut sorted_witness = String::new();
    'outer: for (i, w) in h.xis.windows(2).enumerate() {
        for t in plmaps::merged_mesh([&w[0].0, &w[1].0]) {
            if w[0].0.eval(&t) > w[1].0.eval(&t) {
                sorted_witness = format!("run {} exceeds run {} at t={}", i, i + 1, fmt_q(&t));
                break 'outer;
            }
        }
    }
    c.push("sorted", sorted_witness.is_empty(), true, sorted_witness);

    let nonconst: Vec<usize> = h.xis.iter().enumerate().filter(|(_, r)| !r.0.is_finite_to_one()).map(|(i, _)| i).collect();
    c.push("finite_to_one", nonconst.is_empty(), false, format!("runs with a constant segment: {nonconst:?}"));

    let gen = h.cod.kind == Kind::Gen;
    let shape_ok = h.split_a.block == h.dom
        && h.split_b.as_ref().map(|b| b.block == h.dom).unwrap_or(true)
        && h.split_b.is_some() == gen
        && h.split_a.dim() == h.cod.k
        && h.split_b.as_ref().map(|b| b.dim() == h.cod.k).unwrap_or(true);
    c.push(
        "boundary_shape",
        shape_ok,
        true,
        format!("dims {} / {:?}, expected {}", h.split_a.dim(), h.split_b.as_ref().map(|b| b.dim()), h.cod.k),
    );
    if !(same_kind && shape_ok) {
        return c;
    }
    let mut parts: Vec<(&RepDescriptor, u64)> = vec![(&h.split_a, 1)];
    if let Some(b) = &h.split_b {
        parts.push((b, 1));
    }
    let ab = sum_expanded(&parts);
    let at0 = h.fiber_at(&Q::zero()).expand();
    let want0 = ab.scaled(h.cod.n);
    c.push("boundary_at_0", at0 == want0, true, diff_witness(&at0, &want0));
    let at1 = h.fiber_at(&Q::one()).expand();
    let mut want1 = ab.scaled(h.cod.n - 1);
    want1.zeros += h.cod.mult() * h.cod.k;
    c.push("boundary_at_1", at1 == want1, true, diff_witness(&at1, &want1));
    c
}

fn diff_witness(got: &Expanded, want: &Expanded) -> String {
    if got == want {
        return String::new();
    }
    format!(
        "got inf=({},{}) zeros={} interior={}; expected inf=({},{}) zeros={} interior={}",
        got.inf1,
        got.inf2,
        got.zeros,
        got.interior.iter().map(|x| x.1).sum::<u64>(),
        want.inf1,
        want.inf2,
        want.zeros,
        want.interior.iter().map(|x| x.1).sum::<u64>()
    )
}

/// `psi ∘ phi`, where `phi: A → B` acts first.
pub fn compose(phi: &DiagonalHom, psi: &DiagonalHom) -> Result<DiagonalHom, HomError> {
    if phi.cod != psi.dom {
        return Err(HomError::Mismatch(format!("{} vs {}", phi.cod, psi.dom)));
    }
    let mut runs = Vec::with_capacity(phi.xis.len() * psi.xis.len());
    for (xi, m) in &phi.xis {
        for (zeta, n) in &psi.xis {
            runs.push((plmaps::compose(xi, zeta), m * n));
        }
    }
    // a sorted family stays sorted under reparametrisation and under a
    // nondecreasing outer map, so only neighbours need merging
    let keeps_order = psi.xis.len() == 1 || (phi.xis.len() == 1 && phi.xis[0].0.is_nondecreasing());
    let xis = if keeps_order { merge_neighbours(runs) } else { plmaps::sort_runs(&runs) };
    let split_a = canonical_rep(&phi.pull_rep(&psi.split_a)?);
    let split_b = match &psi.split_b {
        Some(b) => Some(canonical_rep(&phi.pull_rep(b)?)),
        None => None,
    };
    Ok(DiagonalHom { dom: phi.dom, cod: psi.cod, xis, split_a, split_b })
}

fn merge_neighbours(runs: Vec<(PLMap, u64)>) -> Vec<(PLMap, u64)> {
    let mut out: Vec<(PLMap, u64)> = Vec::with_capacity(runs.len());
    for (m, c) in runs {
        match out.last_mut() {
            Some((x, d)) if *x == m => *d += c,
            _ => out.push((m, c)),
        }
    }
    out
}

/// Composite of a chain `h[0]` first.
pub fn compose_chain(chain: &[DiagonalHom]) -> Result<DiagonalHom, HomError> {
    let mut it = chain.iter();
    let mut acc = it.next().ok_or_else(|| HomError::Invalid("empty chain".into()))?.clone();
    for h in it {
        acc = compose(&acc, h)?;
    }
    Ok(acc)
}

pub fn diameter(h: &DiagonalHom) -> Q {
    h.xis.iter().map(|(m, _)| plmaps::diameter(m)).max().unwrap_or_else(Q::zero)
}

/// `max_i sup_t |ξ_i(t) − ζ_i(t)|` over the sorted families.
pub fn d_diag(phi: &DiagonalHom, psi: &DiagonalHom) -> Result<Q, HomError> {
    if phi.dom != psi.dom || phi.cod != psi.cod || phi.len() != psi.len() {
        return Err(HomError::Mismatch("d_diag needs equal domains, codomains and family sizes".into()));
    }
    let mut cache: HashMap<(usize, usize), Q> = HashMap::new();
    let mut best = Q::zero();
    let (mut i, mut j) = (0usize, 0usize);
    let (mut ri, mut rj) = (phi.xis.first().map(|r| r.1).unwrap_or(0), psi.xis.first().map(|r| r.1).unwrap_or(0));
    while i < phi.xis.len() && j < psi.xis.len() {
        let d = cache.entry((i, j)).or_insert_with(|| plmaps::sup_distance(&phi.xis[i].0, &psi.xis[j].0)).clone();
        if d > best {
            best = d;
        }
        let step = ri.min(rj);
        ri -= step;
        rj -= step;
        if ri == 0 {
            i += 1;
            ri = phi.xis.get(i).map(|r| r.1).unwrap_or(0);
        }
        if rj == 0 {
            j += 1;
            rj = psi.xis.get(j).map(|r| r.1).unwrap_or(0);
        }
    }
    Ok(best)
}

/// The trace `σ = (1/j) Σ τ ∘ ξ_i⁻¹` on the domain.
pub fn pullback_trace(h: &DiagonalHom, tau: &TraceMeasure) -> Result<TraceMeasure, HomError> {
    if tau.block != h.cod {
        return Err(HomError::Mismatch(format!("trace on {} pulled through hom into {}", tau.block, h.cod)));
    }
    let j = qu(h.len());
    let maps: Vec<(PLMap, Q)> = h.xis.iter().map(|(m, c)| (m.clone(), qu(*c) / &j)).collect();
    let mut s = measures::pushforward_many(tau, &maps)?;
    s.block = h.dom;
    Ok(s)
}

pub fn is_trace_preserving(h: &DiagonalHom, sigma: &TraceMeasure, tau: &TraceMeasure) -> bool {
    matches!(pullback_trace(h, tau), Ok(s) if s == *sigma)
}

pub fn k0(h: &DiagonalHom) -> K0 {
    match h.cod.kind {
        Kind::Razak => K0::Trivial,
        Kind::Gen => rep_k0(&h.split_a),
    }
}

/// Same associated maps, boundary summands exchanged: K₀ changes sign.
pub fn reverse_k(h: &DiagonalHom) -> DiagonalHom {
    let mut r = h.clone();
    if let Some(b) = r.split_b.take() {
        r.split_b = Some(std::mem::replace(&mut r.split_a, b));
    }
    r
}

pub fn identity(block: Block) -> DiagonalHom {
    transition_like(block, PLMap::identity())
}

fn transition_like(block: Block, xi: PLMap) -> DiagonalHom {
    let (a, b) = match block.kind {
        Kind::Razak => (RepDescriptor { block, points: vec![], r1: 1, r2: 0, r0: 0 }, None),
        Kind::Gen => (
            RepDescriptor { block, points: vec![], r1: 1, r2: 0, r0: 0 },
            Some(RepDescriptor { block, points: vec![], r1: 0, r2: 1, r0: 0 }),
        ),
    };
    DiagonalHom { dom: block, cod: block, xis: vec![(xi, 1)], split_a: a, split_b: b }
}

#[derive(Clone, Debug, PartialEq)]
pub enum ConstructorKind {
    RazakEmbed { n: u64, k: u64, p: u64 },
    RazakAmplify { n: u64, k: u64, kp: u64 },
    GenEmbed { n: u64, k: u64, p: u64, j: u64 },
    GenAmplify { n: u64, k: u64, kp: u64, j: u64 },
    GenRho { n: u64, k: u64, kp: u64, j: i64 },
    Transition { sigma: TraceMeasure, tau: TraceMeasure },
}

pub fn construct(kind: &ConstructorKind) -> Result<DiagonalHom, HomError> {
    match kind {
        ConstructorKind::RazakEmbed { n, k, p } => razak_embed(*n, *k, *p),
        ConstructorKind::RazakAmplify { n, k, kp } => razak_amplify(*n, *k, *kp),
        ConstructorKind::GenEmbed { n, k, p, j } => gen_embed(*n, *k, *p, *j),
        ConstructorKind::GenAmplify { n, k, kp, j } => gen_amplify(*n, *k, *kp, *j),
        ConstructorKind::GenRho { n, k, kp, j } => gen_rho(*n, *k, *kp, *j),
        ConstructorKind::Transition { sigma, tau } => transition(sigma, tau),
    }
}

/// Associated maps shared by the Razak and Gen embeddings of multiplicity
/// `p`: `p(pn−1)` maps grouped by their values at 0 and 1.
fn embed_runs(n: u64, p: u64) -> Vec<(PLMap, u64)> {
    let b = p * n - 1;
    // intervals of indices (1-based, inclusive) with their value at 0 ...
    let mut at0: Vec<(u64, u64, u64)> = Vec::new();
    if b + 1 > p {
        at0.push((1, b + 1 - p, 0));
    }
    for m in 1..p {
        at0.push((m * b + m + 1 - p, (m + 1) * b + m + 1 - p, m));
    }
    // ... and at 1
    let at1: Vec<(u64, u64, u64)> = (0..p).map(|j| (j * b + 1, (j + 1) * b, j + 1)).collect();
    let mut counts: Vec<((u64, u64), u64)> = Vec::new();
    let (mut i, mut j) = (0, 0);
    while i < at0.len() && j < at1.len() {
        let lo = at0[i].0.max(at1[j].0);
        let hi = at0[i].1.min(at1[j].1);
        if lo <= hi {
            counts.push(((at0[i].2, at1[j].2), hi - lo + 1));
        }
        if at0[i].1 < at1[j].1 {
            i += 1;
        } else {
            j += 1;
        }
    }
    let pq = p as i64;
    let runs: Vec<(PLMap, u64)> = counts
        .into_iter()
        .map(|((m0, m1), c)| {
            let (c0, c1) = (q(m0 as i64, pq), q(m1 as i64, pq));
            let map = if c0 == c1 {
                // equal ends (always at least 1/p): dip by 1/p, which keeps
                // [0, 1/p) covered when n = 1
                let apex = &c0 - q(1, pq);
                PLMap::tent(c0, apex)
            } else {
                PLMap::linear(c0, c1)
            };
            (map, c)
        })
        .collect();
    plmaps::sort_runs(&runs)
}

/// `A_{n,k} → A_{pn,(pn−1)k}` with diameter at most `1/p`.
pub fn razak_embed(n: u64, k: u64, p: u64) -> Result<DiagonalHom, HomError> {
    if n == 0 || k == 0 || p < 2 {
        return Err(HomError::OutOfRange(format!("razak_embed needs n,k >= 1 and p >= 2, got n={n} k={k} p={p}")));
    }
    let dom = Block::razak(n, k);
    let cod = Block::razak(p * n, (p * n - 1) * k);
    let pts = (1..p).map(|m| (q(m as i64, p as i64), 1)).collect();
    let a = RepDescriptor::with_multiset(dom, pts, n - 1, 0, 0)?;
    DiagonalHom::new(dom, cod, embed_runs(n, p), canonical_rep(&a), None)
}

/// `A_{n,k} → A_{n,kk'}`, `k'` copies of the identity.
pub fn razak_amplify(n: u64, k: u64, kp: u64) -> Result<DiagonalHom, HomError> {
    if n == 0 || k == 0 || kp == 0 {
        return Err(HomError::OutOfRange("razak_amplify needs n,k,k' >= 1".into()));
    }
    let dom = Block::razak(n, k);
    let a = RepDescriptor { block: dom, points: vec![], r1: kp, r2: 0, r0: 0 };
    DiagonalHom::new(dom, Block::razak(n, k * kp), vec![(PLMap::identity(), kp)], canonical_rep(&a), None)
}

/// `B_{n,k} → B_{pn,(pn−1)k}`, `p` odd, K₀ = 2j − (n−1).
pub fn gen_embed(n: u64, k: u64, p: u64, j: u64) -> Result<DiagonalHom, HomError> {
    if n == 0 || k == 0 || p < 3 || p.is_multiple_of(2) || j + 1 > n {
        return Err(HomError::OutOfRange(format!("gen_embed needs odd p >= 3 and 0 <= j <= n-1, got n={n} k={k} p={p} j={j}")));
    }
    let dom = Block::gen(n, k);
    let cod = Block::gen(p * n, (p * n - 1) * k);
    let pq = p as i64;
    let odd = (1..p).step_by(2).map(|m| (q(m as i64, pq), 1)).collect();
    let even = (2..p).step_by(2).map(|m| (q(m as i64, pq), 1)).collect();
    let a = RepDescriptor::with_multiset(dom, odd, j, n - 1 - j, 0)?;
    let b = RepDescriptor::with_multiset(dom, even, n - 1 - j, j, 0)?;
    DiagonalHom::new(dom, cod, embed_runs(n, p), canonical_rep(&a), Some(canonical_rep(&b)))
}

/// `B_{n,k} → B_{n,kk'}`, K₀ = 2j − k'.
pub fn gen_amplify(n: u64, k: u64, kp: u64, j: u64) -> Result<DiagonalHom, HomError> {
    if n == 0 || k == 0 || kp == 0 || j > kp {
        return Err(HomError::OutOfRange(format!("gen_amplify needs 0 <= j <= k', got k'={kp} j={j}")));
    }
    let dom = Block::gen(n, k);
    let a = RepDescriptor { block: dom, points: vec![], r1: j, r2: kp - j, r0: 0 };
    let b = RepDescriptor { block: dom, points: vec![], r1: kp - j, r2: j, r0: 0 };
    DiagonalHom::new(dom, Block::gen(n, k * kp), vec![(PLMap::identity(), kp)], canonical_rep(&a), Some(canonical_rep(&b)))
}

/// `B_{n,k} → B_{nk,(nk−1)k'}` with K₀ = j.
pub fn gen_rho(n: u64, k: u64, kp: u64, j: i64) -> Result<DiagonalHom, HomError> {
    if n == 0 || k == 0 || kp == 0 {
        return Err(HomError::OutOfRange("gen_rho needs n,k,k' >= 1".into()));
    }
    let top = ((n - 1) * kp) as i64;
    if j.abs() > top {
        return Err(HomError::OutOfRange(format!("gen_rho needs |j| <= (n-1)k' = {top}, got {j}")));
    }
    if n * k < 2 {
        return Err(HomError::OutOfRange("gen_rho needs nk >= 2".into()));
    }
    let t = (top - j) as u64;
    let top = top as u64;
    let z = (k - 1) * kp;
    let dom = Block::gen(n, k);
    let rep = |r1, r2, r0| RepDescriptor { block: dom, points: vec![], r1, r2, r0 };
    let (a, b) = if t.is_multiple_of(2) {
        let r = t / 2;
        (rep(top - r, r, z), rep(r, top - r, z))
    } else {
        if z < k {
            return Err(HomError::OutOfRange(format!(
                "gen_rho with (n-1)k'-j odd needs (k-1)k' >= k; n={n} k={k} k'={kp} j={j}"
            )));
        }
        if t == 1 {
            (rep(top, 1, z - k), rep(0, top - 1, z + k))
        } else {
            let r = (t - 1) / 2;
            (rep(top - r - 1, r, z + k), rep(r + 1, top - r, z - k))
        }
    };
    let dip = PLMap::tent(Q::one(), q(1, 2));
    let mut runs = vec![(PLMap::identity(), (n - 1) * kp)];
    if n * (k - 1) * kp > 0 {
        runs.push((dip, n * (k - 1) * kp));
    }
    runs.retain(|r| r.1 > 0);
    let cod = Block::gen(n * k, (n * k - 1) * kp);
    DiagonalHom::new(dom, cod, plmaps::sort_runs(&runs), canonical_rep(&a), Some(canonical_rep(&b)))
}

/// Automorphism of `(A, σ) → (A, τ)` pulling `τ` back to `σ`.
pub fn transition(sigma: &TraceMeasure, tau: &TraceMeasure) -> Result<DiagonalHom, HomError> {
    if sigma.block != tau.block {
        return Err(HomError::Mismatch(format!("traces on {} and {}", sigma.block, tau.block)));
    }
    Ok(transition_like(sigma.block, measures::transition_plmap(sigma, tau)?))
}

/// Unitary-distance reading at one point: exact for a single test element,
/// a permutation-restricted upper bound otherwise.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct UDist {
    pub value: Q,
    pub exact: bool,
}

/// Distance between the fibers of `phi` and `psi` at `at`, relative to `g`.
pub fn fiber_udist(phi: &DiagonalHom, psi: &DiagonalHom, g: &[TestElement], at: &SpecPoint) -> Result<UDist, HomError> {
    if phi.dom != psi.dom || phi.cod != psi.cod {
        return Err(HomError::Mismatch("fiber_udist needs equal domains and codomains".into()));
    }
    let (r1, r2) = (phi.fiber(at)?, psi.fiber(at)?);
    rep_udist(&r1, &r2, g)
}

/// As [`fiber_udist`] at any `t ∈ [0,1]` of the codomain.
pub fn fiber_udist_at(phi: &DiagonalHom, psi: &DiagonalHom, g: &[TestElement], t: &Q) -> Result<UDist, HomError> {
    rep_udist(&phi.fiber_at(t), &psi.fiber_at(t), g)
}

/// Unitary distance between two representations of equal dimension.
pub fn rep_udist(r1: &RepDescriptor, r2: &RepDescriptor, g: &[TestElement]) -> Result<UDist, HomError> {
    if r1.dim() != r2.dim() {
        return Err(HomError::Mismatch(format!("fiber dimensions {} and {}", r1.dim(), r2.dim())));
    }
    match g {
        [] => Ok(UDist { value: Q::zero(), exact: true }),
        [f] => {
            let e1 = crate::blocks::eigen_multiset(r1, f)?;
            let e2 = crate::blocks::eigen_multiset(r2, f)?;
            Ok(UDist { value: measures::match_runs(&e1, &e2)?, exact: true })
        }
        _ => {
            let s1 = slot_types(r1, g)?;
            let s2 = slot_types(r2, g)?;
            Ok(UDist { value: bottleneck_assignment(&s1, &s2), exact: false })
        }
    }
}

/// Basis slots grouped by their value vector across `g`: every element of
/// the scalar-block model is diagonal in one common basis.
fn slot_types(r: &RepDescriptor, g: &[TestElement]) -> Result<Vec<(Vec<Q>, u64)>, HomError> {
    for f in g {
        if !f.compatible(&r.block) {
            return Err(HomError::Mismatch(format!("test element does not fit {}", r.block)));
        }
    }
    let b = &r.block;
    let nk = b.n * b.k;
    let mut m: HashMap<Vec<Q>, u64> = HashMap::new();
    let mut add = |v: Vec<Q>, c: u64| {
        if c > 0 {
            *m.entry(v).or_insert(0) += c;
        }
    };
    let zero = Q::zero();
    for (s, c) in &r.points {
        let vals: Vec<(Q, Q)> = g.iter().map(|f| f.at(s)).collect();
        add(vals.iter().map(|v| v.0.clone()).collect(), nk * c);
        if b.kind == Kind::Gen {
            add(vals.iter().map(|v| v.1.clone()).collect(), nk * c);
        }
    }
    let at0: Vec<(Q, Q)> = g.iter().map(|f| f.at(&zero)).collect();
    add(at0.iter().map(|v| v.0.clone()).collect(), r.r1 * b.k);
    add(at0.iter().map(|v| v.1.clone()).collect(), r.r2 * b.k);
    add(vec![zero.clone(); g.len()], r.r0);
    let mut out: Vec<(Vec<Q>, u64)> = m.into_iter().collect();
    out.sort();
    Ok(out)
}

/// Smallest threshold admitting a perfect matching of slots; capacities are
/// slot multiplicities, so this is a max-flow feasibility search.
fn bottleneck_assignment(left: &[(Vec<Q>, u64)], right: &[(Vec<Q>, u64)]) -> Q {
    let gap = |a: &[Q], b: &[Q]| a.iter().zip(b).map(|(x, y)| (x - y).abs()).max().unwrap_or_else(Q::zero);
    let costs: Vec<Vec<Q>> = left.iter().map(|(a, _)| right.iter().map(|(b, _)| gap(a, b)).collect()).collect();
    let mut cands: Vec<Q> = costs.iter().flatten().cloned().collect();
    cands.sort();
    cands.dedup();
    let total: u64 = left.iter().map(|x| x.1).sum();
    let feasible = |th: &Q| {
        let mut f = Flow::new(left.len() + right.len() + 2);
        let (s, t) = (left.len() + right.len(), left.len() + right.len() + 1);
        for (i, (_, c)) in left.iter().enumerate() {
            f.edge(s, i, *c);
        }
        for (j, (_, c)) in right.iter().enumerate() {
            f.edge(left.len() + j, t, *c);
        }
        for (i, row) in costs.iter().enumerate() {
            for (j, d) in row.iter().enumerate() {
                if d <= th {
                    f.edge(i, left.len() + j, u64::MAX / 4);
                }
            }
        }
        f.max_flow(s, t) == total
    };
    let (mut lo, mut hi) = (0usize, cands.len() - 1);
    while lo < hi {
        let mid = (lo + hi) / 2;
        if feasible(&cands[mid]) {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    cands[lo].clone()
}

/// Dinic max-flow on a small dense graph.
struct Flow {
    adj: Vec<Vec<usize>>,
    to: Vec<usize>,
    cap: Vec<u64>,
}

impl Flow {
    fn new(n: usize) -> Self {
        Flow { adj: vec![Vec::new(); n], to: Vec::new(), cap: Vec::new() }
    }

    fn edge(&mut self, a: usize, b: usize, c: u64) {
        self.adj[a].push(self.to.len());
        self.to.push(b);
        self.cap.push(c);
        self.adj[b].push(self.to.len());
        self.to.push(a);
        self.cap.push(0);
    }

    fn max_flow(&mut self, s: usize, t: usize) -> u64 {
        let n = self.adj.len();
        let mut total = 0;
        loop {
            let mut level = vec![usize::MAX; n];
            level[s] = 0;
            let mut queue = std::collections::VecDeque::from([s]);
            while let Some(v) = queue.pop_front() {
                for &e in &self.adj[v] {
                    if self.cap[e] > 0 && level[self.to[e]] == usize::MAX {
                        level[self.to[e]] = level[v] + 1;
                        queue.push_back(self.to[e]);
                    }
                }
            }
            if level[t] == usize::MAX {
                return total;
            }
            let mut it = vec![0usize; n];
            loop {
                let f = self.push(s, t, u64::MAX, &level, &mut it);
                if f == 0 {
                    break;
                }
                total += f;
            }
        }
    }

    fn push(&mut self, v: usize, t: usize, f: u64, level: &[usize], it: &mut [usize]) -> u64 {
        if v == t {
            return f;
        }
        while it[v] < self.adj[v].len() {
            let e = self.adj[v][it[v]];
            let w = self.to[e];
            if self.cap[e] > 0 && level[w] == level[v] + 1 {
                let d = self.push(w, t, f.min(self.cap[e]), level, it);
                if d > 0 {
                    self.cap[e] -= d;
                    self.cap[e ^ 1] += d;
                    return d;
                }
            }
            it[v] += 1;
        }
        0
    }
}

/// Largest Lipschitz bound in `g`.
pub fn lipschitz_max(g: &[TestElement]) -> Q {
    g.iter().map(|f| f.lipschitz.clone()).max().unwrap_or_else(Q::zero)
}

/// Largest fiber distance over the points `ts` of `[0,1]` and the points at
/// infinity, with the value at each point.
pub fn sup_fiber_udist(
    phi: &DiagonalHom,
    psi: &DiagonalHom,
    g: &[TestElement],
    ts: &[Q],
) -> Result<(UDist, Vec<(String, Q)>), HomError> {
    let mut readings = Vec::new();
    let mut best = UDist { value: Q::zero(), exact: true };
    let mut note = |label: String, d: UDist, best: &mut UDist| {
        best.exact &= d.exact;
        if d.value > best.value {
            best.value = d.value.clone();
        }
        readings.push((label, d.value));
    };
    for t in ts {
        let d = fiber_udist_at(phi, psi, g, t)?;
        note(fmt_q(t), d, &mut best);
    }
    let infs: &[(SpecPoint, &str)] = match phi.cod.kind {
        Kind::Razak => &[(SpecPoint::Inf, "inf")],
        Kind::Gen => &[(SpecPoint::Inf1, "inf1"), (SpecPoint::Inf2, "inf2")],
    };
    for (p, label) in infs {
        let d = fiber_udist(phi, psi, g, p)?;
        note(label.to_string(), d, &mut best);
    }
    Ok((best, readings))
}

/// Evenly spaced mesh `0, 1/m, ..., 1`.
pub fn uniform_mesh(m: u64) -> Vec<Q> {
    (0..=m).map(|i| q(i as i64, m as i64)).collect()
}

/// Largest slope among the associated maps.
pub fn max_slope(h: &DiagonalHom) -> Q {
    h.xis.iter().map(|(m, _)| m.max_slope()).max().unwrap_or_else(Q::zero)
}

/// Every associated map is finite-to-one.
pub fn finite_to_one(h: &DiagonalHom) -> bool {
    h.xis.iter().all(|(m, _)| m.is_finite_to_one())
}

#[cfg(test)]
mod tests;
