//! Blocks, points of the spectrum, representation descriptors and the scalar
//! test elements used to probe fibers.

use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use thiserror::Error;

use crate::plmaps::PlFn;

/// Exact rational used everywhere.
pub type Q = BigRational;

pub fn q(n: i64, d: i64) -> Q {
    Q::new(BigInt::from(n), BigInt::from(d))
}

pub fn qi(n: i64) -> Q {
    Q::from_integer(BigInt::from(n))
}

pub fn qu(n: u64) -> Q {
    Q::from_integer(BigInt::from(n))
}

/// `"num/den"`, or just `"num"` for integers.
pub fn fmt_q(x: &Q) -> String {
    if x.is_integer() {
        x.numer().to_string()
    } else {
        format!("{}/{}", x.numer(), x.denom())
    }
}

pub fn parse_q(s: &str) -> Result<Q, String> {
    let s = s.trim();
    let (a, b) = match s.split_once('/') {
        Some((a, b)) => (a.trim(), b.trim()),
        None => (s, "1"),
    };
    let num: BigInt = a.parse().map_err(|_| format!("bad rational {s:?}"))?;
    let den: BigInt = b.parse().map_err(|_| format!("bad rational {s:?}"))?;
    if den.is_zero() {
        return Err(format!("zero denominator in {s:?}"));
    }
    Ok(Q::new(num, den))
}

/// Lossy, for oracles and summaries only.
pub fn to_f64(x: &Q) -> f64 {
    use num_traits::ToPrimitive;
    x.to_f64().unwrap_or(f64::NAN)
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BlockError {
    #[error("invalid block parameters n={n}, k={k}")]
    InvalidBlock { n: u64, k: u64 },
    #[error("point {0} outside [0,1]")]
    PointOutOfRange(String),
    #[error("{0}")]
    WrongKind(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: u64, got: u64 },
    #[error("test element: {0}")]
    BadTestElement(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Kind {
    Razak,
    Gen,
}

/// `A_{n,k}` (Razak) or `B_{n,k}` (Gen).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Block {
    pub kind: Kind,
    pub n: u64,
    pub k: u64,
}

impl Block {
    pub fn new(kind: Kind, n: u64, k: u64) -> Result<Block, BlockError> {
        if n == 0 || k == 0 {
            return Err(BlockError::InvalidBlock { n, k });
        }
        Ok(Block { kind, n, k })
    }

    /// Panics on zero parameters.
    pub fn razak(n: u64, k: u64) -> Block {
        Block::new(Kind::Razak, n, k).expect("n, k >= 1")
    }

    /// Panics on zero parameters.
    pub fn gen(n: u64, k: u64) -> Block {
        Block::new(Kind::Gen, n, k).expect("n, k >= 1")
    }

    /// 1 for Razak, 2 for Gen: how many size-k boundary matrices there are.
    pub fn mult(&self) -> u64 {
        match self.kind {
            Kind::Razak => 1,
            Kind::Gen => 2,
        }
    }

    pub fn fiber_dim(&self) -> u64 {
        self.mult() * self.n * self.k
    }

    pub fn inf_dim(&self) -> u64 {
        self.k
    }
}

impl fmt::Display for Block {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let letter = match self.kind {
            Kind::Razak => 'A',
            Kind::Gen => 'B',
        };
        write!(f, "{letter}_{{{},{}}}", self.n, self.k)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SpecPoint {
    Interior(Q),
    Inf,
    Inf1,
    Inf2,
}

impl SpecPoint {
    pub fn check(&self, block: &Block) -> Result<(), BlockError> {
        match (self, block.kind) {
            (SpecPoint::Interior(t), _) => {
                if t.is_negative() || *t >= Q::one() {
                    Err(BlockError::PointOutOfRange(fmt_q(t)))
                } else {
                    Ok(())
                }
            }
            (SpecPoint::Inf, Kind::Razak) => Ok(()),
            (SpecPoint::Inf1 | SpecPoint::Inf2, Kind::Gen) => Ok(()),
            _ => Err(BlockError::WrongKind(format!("{self:?} is not a point of {block}"))),
        }
    }
}

/// K₀ reading. Razak blocks have trivial K₀ so there is nothing to report.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum K0 {
    Trivial,
    Value(i64),
}

impl K0 {
    pub fn value(self) -> i64 {
        match self {
            K0::Trivial => 0,
            K0::Value(v) => v,
        }
    }
}

/// Fully expanded irreducible content: interior points in (0,1), boundary
/// summands and the dimension of the zero summand.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct Expanded {
    pub interior: Vec<(Q, u64)>,
    pub inf1: u64,
    pub inf2: u64,
    pub zeros: u64,
}

impl Expanded {
    pub fn add(&mut self, other: &Expanded) {
        let mut v = std::mem::take(&mut self.interior);
        v.extend(other.interior.iter().cloned());
        self.interior = group_sorted(v);
        self.inf1 += other.inf1;
        self.inf2 += other.inf2;
        self.zeros += other.zeros;
    }

    pub fn scaled(&self, c: u64) -> Expanded {
        let interior = if c == 0 { vec![] } else { self.interior.iter().map(|(x, m)| (x.clone(), m * c)).collect() };
        Expanded { interior, inf1: self.inf1 * c, inf2: self.inf2 * c, zeros: self.zeros * c }
    }
}

/// A finite-dimensional representation up to unitary equivalence.
///
/// `points` is a sorted multiset `(point, multiplicity)`. Raw descriptors may
/// hold 0 and 1; canonical ones keep points in `[0,1)` and satisfy the
/// multiplicity bound on `r1`, `r2`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RepDescriptor {
    pub block: Block,
    pub points: Vec<(Q, u64)>,
    pub r1: u64,
    pub r2: u64,
    pub r0: u64,
}

impl RepDescriptor {
    pub fn new(block: Block, points: Vec<Q>, r1: u64, r2: u64, r0: u64) -> Result<Self, BlockError> {
        RepDescriptor::with_multiset(block, points.into_iter().map(|p| (p, 1)).collect(), r1, r2, r0)
    }

    pub fn with_multiset(block: Block, points: Vec<(Q, u64)>, r1: u64, r2: u64, r0: u64) -> Result<Self, BlockError> {
        for (p, _) in &points {
            if p.is_negative() || *p > Q::one() {
                return Err(BlockError::PointOutOfRange(fmt_q(p)));
            }
        }
        if block.kind == Kind::Razak && r2 != 0 {
            return Err(BlockError::WrongKind("Razak blocks have no second boundary summand".into()));
        }
        Ok(RepDescriptor { block, points: group_sorted(points), r1, r2, r0 })
    }

    pub fn zero(block: Block) -> Self {
        RepDescriptor { block, points: vec![], r1: 0, r2: 0, r0: 0 }
    }

    pub fn from_points(block: Block, points: Vec<Q>) -> Result<Self, BlockError> {
        RepDescriptor::new(block, points, 0, 0, 0)
    }

    pub fn npoints(&self) -> u64 {
        self.points.iter().map(|(_, m)| m).sum()
    }

    /// Points listed with repetition.
    pub fn point_list(&self) -> Vec<Q> {
        self.points.iter().flat_map(|(p, m)| std::iter::repeat_n(p.clone(), *m as usize)).collect()
    }

    pub fn dim(&self) -> u64 {
        self.npoints() * self.block.fiber_dim() + (self.r1 + self.r2) * self.block.k + self.r0
    }

    pub fn expand(&self) -> Expanded {
        let b = &self.block;
        let mut e = Expanded { interior: vec![], inf1: self.r1, inf2: self.r2, zeros: self.r0 };
        let two = b.kind == Kind::Gen;
        for (p, m) in &self.points {
            if p.is_zero() {
                e.inf1 += b.n * m;
                if two {
                    e.inf2 += b.n * m;
                }
            } else if p.is_one() {
                e.inf1 += (b.n - 1) * m;
                if two {
                    e.inf2 += (b.n - 1) * m;
                }
                e.zeros += b.mult() * b.k * m;
            } else {
                e.interior.push((p.clone(), *m));
            }
        }
        e
    }

    pub fn direct_sum(&self, other: &RepDescriptor) -> Result<RepDescriptor, BlockError> {
        if self.block != other.block {
            return Err(BlockError::WrongKind(format!("cannot add reps of {} and {}", self.block, other.block)));
        }
        let mut points = self.points.clone();
        points.extend(other.points.iter().cloned());
        RepDescriptor::with_multiset(self.block, points, self.r1 + other.r1, self.r2 + other.r2, self.r0 + other.r0)
    }
}

/// Canonical form: expand points 0 and 1, then fold full `n`-stacks of the
/// boundary summands back into copies of the point 0.
pub fn canonical_rep(raw: &RepDescriptor) -> RepDescriptor {
    let b = raw.block;
    let e = raw.expand();
    let c = match b.kind {
        Kind::Razak => e.inf1 / b.n,
        Kind::Gen => e.inf1.min(e.inf2) / b.n,
    };
    let mut points = if c > 0 { vec![(Q::zero(), c)] } else { vec![] };
    points.extend(e.interior);
    let (r1, r2) = match b.kind {
        Kind::Razak => (e.inf1 - c * b.n, 0),
        Kind::Gen => (e.inf1 - c * b.n, e.inf2 - c * b.n),
    };
    RepDescriptor { block: b, points, r1, r2, r0: e.zeros }
}

/// As [`canonical_rep`], insisting on a total dimension.
pub fn canonical_rep_dim(raw: &RepDescriptor, dim: u64) -> Result<RepDescriptor, BlockError> {
    if raw.dim() != dim {
        return Err(BlockError::DimensionMismatch { expected: dim, got: raw.dim() });
    }
    Ok(canonical_rep(raw))
}

pub fn rep_k0(rep: &RepDescriptor) -> K0 {
    match rep.block.kind {
        Kind::Razak => K0::Trivial,
        Kind::Gen => {
            let e = rep.expand();
            K0::Value(e.inf1 as i64 - e.inf2 as i64)
        }
    }
}

/// Self-adjoint element whose fibers are scalar on each size-`k` boundary
/// slot: `g1` on the first slots, `g2` on the second (Gen only).
#[derive(Clone, Debug, PartialEq)]
pub struct TestElement {
    pub g1: PlFn,
    pub g2: Option<PlFn>,
    pub lipschitz: Q,
}

impl TestElement {
    pub fn new(g1: PlFn, g2: Option<PlFn>, lipschitz: Q) -> Result<Self, BlockError> {
        for g in std::iter::once(&g1).chain(g2.iter()) {
            if !g.eval(&Q::one()).is_zero() {
                return Err(BlockError::BadTestElement("must vanish at 1".into()));
            }
            if g.max_slope() > lipschitz {
                return Err(BlockError::BadTestElement(format!(
                    "Lipschitz bound {} below actual slope {}",
                    fmt_q(&lipschitz),
                    fmt_q(&g.max_slope())
                )));
            }
        }
        Ok(TestElement { g1, g2, lipschitz })
    }

    /// Smallest admissible bound.
    pub fn tight(g1: PlFn, g2: Option<PlFn>) -> Result<Self, BlockError> {
        let mut l = g1.max_slope();
        if let Some(g) = &g2 {
            l = l.max(g.max_slope());
        }
        TestElement::new(g1, g2, l)
    }

    pub fn compatible(&self, block: &Block) -> bool {
        (block.kind == Kind::Gen) == self.g2.is_some()
    }

    /// Values on the two slot types at `t`.
    pub fn at(&self, t: &Q) -> (Q, Q) {
        let a = self.g1.eval(t);
        let b = self.g2.as_ref().map(|g| g.eval(t)).unwrap_or_else(|| a.clone());
        (a, b)
    }
}

/// Eigenvalue multiset as sorted `(value, multiplicity)` pairs.
pub fn eigen_multiset(rep: &RepDescriptor, f: &TestElement) -> Result<Vec<(Q, u64)>, BlockError> {
    if !f.compatible(&rep.block) {
        return Err(BlockError::WrongKind(format!("test element does not fit {}", rep.block)));
    }
    let b = &rep.block;
    let nk = b.n * b.k;
    let mut out: Vec<(Q, u64)> = Vec::new();
    for (s, m) in &rep.points {
        let (a, c) = f.at(s);
        match b.kind {
            Kind::Razak => out.push((a, nk * m)),
            Kind::Gen => {
                out.push((a, nk * m));
                out.push((c, nk * m));
            }
        }
    }
    let zero = Q::zero();
    let (a0, b0) = f.at(&zero);
    out.push((a0, rep.r1 * b.k));
    if b.kind == Kind::Gen {
        out.push((b0, rep.r2 * b.k));
    }
    out.push((zero, rep.r0));
    Ok(group_sorted(out))
}

pub fn eigenvalues(rep: &RepDescriptor, f: &TestElement) -> Result<Vec<Q>, BlockError> {
    let mut v = Vec::new();
    for (x, m) in eigen_multiset(rep, f)? {
        for _ in 0..m {
            v.push(x.clone());
        }
    }
    Ok(v)
}

/// Sort and merge equal values, dropping zero multiplicities.
pub fn group_sorted(mut items: Vec<(Q, u64)>) -> Vec<(Q, u64)> {
    items.sort_by(|a, b| a.0.cmp(&b.0));
    let mut out: Vec<(Q, u64)> = Vec::new();
    for (x, m) in items {
        if m == 0 {
            continue;
        }
        match out.last_mut() {
            Some((y, c)) if *y == x => *c += m,
            _ => out.push((x, m)),
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pl(bp: &[(i64, i64, i64, i64)]) -> PlFn {
        PlFn::new(bp.iter().map(|&(a, b, c, d)| (q(a, b), q(c, d))).collect()).unwrap()
    }

    #[test]
    fn fiber_dimensions() {
        assert_eq!(Block::razak(3, 2).fiber_dim(), 6);
        assert_eq!(Block::gen(3, 2).fiber_dim(), 12);
        assert_eq!(Block::gen(3, 2).inf_dim(), 2);
        assert!(Block::new(Kind::Razak, 0, 1).is_err());
    }

    #[test]
    fn canonical_examples() {
        let a = Block::razak(2, 1);
        let c = canonical_rep(&RepDescriptor::from_points(a, vec![qi(1)]).unwrap());
        assert_eq!((c.npoints(), c.r1, c.r0), (0, 1, 1));

        let c = canonical_rep(&RepDescriptor::from_points(a, vec![qi(0)]).unwrap());
        assert_eq!(c.point_list(), vec![qi(0)]);
        assert_eq!((c.r1, c.r0), (0, 0));

        let b = Block::gen(2, 1);
        let c = canonical_rep(&RepDescriptor::new(b, vec![], 2, 3, 0).unwrap());
        assert_eq!(c.point_list(), vec![qi(0)]);
        assert_eq!((c.r1, c.r2, c.r0), (0, 1, 0));
    }

    #[test]
    fn canonical_dimension_mismatch() {
        let a = Block::razak(2, 1);
        let r = RepDescriptor::from_points(a, vec![q(1, 2)]).unwrap();
        assert!(canonical_rep_dim(&r, 3).is_err());
        assert!(canonical_rep_dim(&r, 2).is_ok());
    }

    // rank bookkeeping: a point contributes 2nk, a first boundary summand
    // k+1, a second one k-1, a zero dimension 1. Rank minus dimension is
    // the K0 class.
    fn k0_by_rank(r: &RepDescriptor) -> i64 {
        let b = r.block;
        let rank = r.npoints() * 2 * b.n * b.k + r.r1 * (b.k + 1) + r.r2 * (b.k - 1) + r.r0;
        rank as i64 - r.dim() as i64
    }

    #[test]
    fn k0_examples() {
        let b = Block::gen(2, 1);
        assert_eq!(rep_k0(&RepDescriptor::new(b, vec![], 1, 0, 0).unwrap()), K0::Value(1));
        assert_eq!(rep_k0(&RepDescriptor::from_points(b, vec![q(1, 3)]).unwrap()), K0::Value(0));
        let r = RepDescriptor::new(b, vec![], 3, 1, 5).unwrap();
        assert_eq!(k0_by_rank(&r), 2);
        assert_eq!(rep_k0(&r), K0::Value(2));
        assert_eq!(rep_k0(&RepDescriptor::new(Block::razak(2, 1), vec![], 1, 0, 0).unwrap()), K0::Trivial);
    }

    #[test]
    fn eigen_examples() {
        let a = Block::razak(2, 1);
        let f = TestElement::tight(pl(&[(0, 1, 1, 1), (1, 1, 0, 1)]), None).unwrap();
        let r = RepDescriptor::from_points(a, vec![q(1, 2)]).unwrap();
        // direct evaluation: f(1/2) = (1 - 1/2)·1_2
        let direct: Vec<Q> = (0..a.fiber_dim()).map(|_| qi(1) - q(1, 2)).collect();
        assert_eq!(eigenvalues(&r, &f).unwrap(), direct);
        assert_eq!(direct, vec![q(1, 2), q(1, 2)]);

        let b = Block::gen(2, 1);
        let f = TestElement::tight(pl(&[(0, 1, -1, 1), (1, 1, 0, 1)]), Some(pl(&[(0, 1, 1, 1), (1, 1, 0, 1)]))).unwrap();
        let r = RepDescriptor::new(b, vec![], 1, 0, 0).unwrap();
        assert_eq!(eigenvalues(&r, &f).unwrap(), vec![qi(-1)]);

        let z = TestElement::tight(pl(&[(0, 1, 0, 1), (1, 1, 0, 1)]), Some(pl(&[(0, 1, 0, 1), (1, 1, 0, 1)]))).unwrap();
        let r = RepDescriptor::new(b, vec![q(1, 5), qi(0)], 2, 1, 3).unwrap();
        let ev = eigenvalues(&r, &z).unwrap();
        assert_eq!(ev.len() as u64, r.dim());
        assert!(ev.iter().all(|x| x.is_zero()));
    }

    #[test]
    fn test_element_rejects_bad_data() {
        assert!(TestElement::tight(pl(&[(0, 1, 0, 1), (1, 1, 1, 1)]), None).is_err());
        assert!(TestElement::new(pl(&[(0, 1, 1, 1), (1, 1, 0, 1)]), None, q(1, 2)).is_err());
    }

    #[test]
    fn rational_text_round_trip() {
        for s in ["0", "1/2", "-3/7", "5"] {
            assert_eq!(fmt_q(&parse_q(s).unwrap()), s);
        }
        assert!(parse_q("1/0").is_err());
        assert!(parse_q("x").is_err());
    }

    fn arb_rep() -> impl Strategy<Value = RepDescriptor> {
        (any::<bool>(), 1u64..4, 1u64..4, prop::collection::vec(0i64..=6, 0..5), 0u64..7, 0u64..7, 0u64..5).prop_map(
            |(gen, n, k, pts, r1, r2, r0)| {
                let block = if gen { Block::gen(n, k) } else { Block::razak(n, k) };
                let r2 = if gen { r2 } else { 0 };
                RepDescriptor::new(block, pts.into_iter().map(|p| q(p, 6)).collect(), r1, r2, r0).unwrap()
            },
        )
    }

    proptest! {
        #[test]
        fn canonical_is_idempotent_and_keeps_dimension(r in arb_rep()) {
            let c = canonical_rep(&r);
            prop_assert_eq!(c.dim(), r.dim());
            prop_assert_eq!(canonical_rep(&c), c.clone());
            prop_assert!(c.points.iter().all(|(p, _)| *p < Q::one()));
            match r.block.kind {
                Kind::Razak => prop_assert!(c.r1 < r.block.n),
                Kind::Gen => prop_assert!(c.r1.min(c.r2) < r.block.n),
            }
        }

        #[test]
        fn k0_additive_and_canonical_invariant(r in arb_rep(), s in arb_rep()) {
            prop_assert_eq!(rep_k0(&canonical_rep(&r)), rep_k0(&r));
            if r.block == s.block && r.block.kind == Kind::Gen {
                let sum = r.direct_sum(&s).unwrap();
                prop_assert_eq!(rep_k0(&sum).value(), rep_k0(&r).value() + rep_k0(&s).value());
                prop_assert_eq!(rep_k0(&r).value(), k0_by_rank(&r));
            }
        }

        #[test]
        fn eigen_count_is_dimension(r in arb_rep(), a in -4i64..4) {
            let g = || PlFn::new(vec![(qi(0), q(a, 4)), (q(1, 2), q(-a, 8)), (qi(1), qi(0))]).unwrap();
            let f = TestElement::tight(g(), if r.block.kind == Kind::Gen { Some(g()) } else { None }).unwrap();
            prop_assert_eq!(eigenvalues(&r, &f).unwrap().len() as u64, r.dim());
        }
    }
}
