//! Brute-force counterparts of the closed forms, plus the random instance
//! generators the cross-validation suites draw from.
//!
//! Oracles may compute in floating point but report exact rationals or
//! explicit brackets.

use num_traits::{FromPrimitive, Signed, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::blocks::{to_f64, Kind, RepDescriptor, TestElement, Q};
use crate::homs::DiagonalHom;
use crate::measures::{PointMultiset, TraceMeasure};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error("rank difference {0} is odd: boundary data corrupted")]
    OddRank(i64),
    #[error("codomain is not a Gen block")]
    NotGen,
    #[error("brute-force matching limited to 8 points, got {0}")]
    TooLarge(u64),
    #[error("multisets have sizes {0} and {1}")]
    SizeMismatch(u64, u64),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct GridSpec {
    pub resolution: u64,
    pub seed: u64,
}

fn float_pieces(m: &TraceMeasure) -> Vec<(f64, f64, f64)> {
    m.pieces.iter().map(|(a, b, w)| (to_f64(a), to_f64(b), to_f64(w))).collect()
}

fn float_mass(p: &[(f64, f64, f64)], a: f64, b: f64) -> f64 {
    p.iter().map(|&(x, y, w)| w * (b.min(y) - a.max(x)).max(0.0) / (y - x)).sum()
}

fn q_of(x: f64) -> Q {
    Q::from_f64(x).unwrap_or_else(Q::zero)
}

/// Bracket for the optimal matching distance by enumerating grid intervals
/// `U` and bisecting the smallest `r` with `μ(U) ≤ ν(U_r)` and vice versa.
/// The true value lies in `[lower, upper]`, `upper − lower ≤ 2/resolution`.
pub fn bottleneck_brute(mu: &TraceMeasure, nu: &TraceMeasure, grid: GridSpec) -> (Q, Q) {
    let res = grid.resolution.max(2);
    let (pm, pn) = (float_pieces(mu), float_pieces(nu));
    let radius = |x: &[(f64, f64, f64)], y: &[(f64, f64, f64)], a: f64, b: f64| {
        // rounding slack, far below the bracket width
        let need = float_mass(x, a, b) - 1e-12;
        let (mut lo, mut hi) = (0.0f64, 1.0f64);
        if float_mass(y, a, b) >= need {
            return 0.0;
        }
        for _ in 0..40 {
            let mid = 0.5 * (lo + hi);
            if float_mass(y, a - mid, b + mid) >= need {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        hi
    };
    let best = (0..res)
        .into_par_iter()
        .map(|i| {
            let a = i as f64 / res as f64;
            let mut best = 0.0f64;
            for j in i + 1..=res {
                let b = j as f64 / res as f64;
                best = best.max(radius(&pm, &pn, a, b)).max(radius(&pn, &pm, a, b));
            }
            best
        })
        .reduce(|| 0.0, f64::max);
    let slack = 1e-9;
    let lower = q_of((best - slack).max(0.0));
    let upper = q_of(best + 1.0 / res as f64 + slack);
    (lower, upper)
}

/// K₀ from ranks of the image of the generating projection at ∞₁ and ∞₂:
/// a point contributes `2nk`, `π∞₁` contributes `k+1`, `π∞₂` contributes
/// `k−1` and each zero dimension 1.
pub fn k0_rank(h: &DiagonalHom) -> Result<i64, OracleError> {
    if h.cod.kind != Kind::Gen {
        return Err(OracleError::NotGen);
    }
    let b = h.split_b.as_ref().ok_or(OracleError::NotGen)?;
    let rank = |r: &RepDescriptor| -> i64 {
        let (n, k) = (r.block.n as i64, r.block.k as i64);
        let pts: i64 = r.points.iter().map(|(_, m)| *m as i64).sum();
        2 * n * k * pts + (k + 1) * r.r1 as i64 + (k - 1) * r.r2 as i64 + r.r0 as i64
    };
    let d = rank(&h.split_a) - rank(b);
    if d % 2 != 0 {
        return Err(OracleError::OddRank(d));
    }
    Ok(d / 2)
}

/// Exhaustive min over bijections of the max over `g` of `|g(f) − g(h)|`,
/// using the first component of each test element.
pub fn matching_brute(f: &PointMultiset, h: &PointMultiset, g: &[TestElement]) -> Result<Q, OracleError> {
    let (fl, hl) = (f.to_list(), h.to_list());
    if fl.len() != hl.len() {
        return Err(OracleError::SizeMismatch(fl.len() as u64, hl.len() as u64));
    }
    if fl.len() > 8 {
        return Err(OracleError::TooLarge(fl.len() as u64));
    }
    let n = fl.len();
    if n == 0 {
        return Ok(Q::zero());
    }
    let cost: Vec<Vec<Q>> = fl
        .iter()
        .map(|a| hl.iter().map(|b| g.iter().map(|e| (e.g1.eval(a) - e.g1.eval(b)).abs()).max().unwrap_or_else(Q::zero)).collect())
        .collect();
    let mut perm: Vec<usize> = (0..n).collect();
    let mut best: Option<Q> = None;
    // Heap's algorithm over all n! bijections
    let mut c = vec![0usize; n];
    let eval = |p: &[usize], best: &mut Option<Q>| {
        let m = p.iter().enumerate().map(|(i, &j)| cost[i][j].clone()).max().unwrap();
        if best.as_ref().map(|b| m < *b).unwrap_or(true) {
            *best = Some(m);
        }
    };
    eval(&perm, &mut best);
    let mut i = 0;
    while i < n {
        if c[i] < i {
            if i % 2 == 0 {
                perm.swap(0, i);
            } else {
                perm.swap(c[i], i);
            }
            eval(&perm, &mut best);
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
    Ok(best.unwrap())
}

/// `b_ell` by removing every pair of index subsets of equal size up to
/// `ell` and taking the sorted matching of what is left.
pub fn b_ell_brute(f: &PointMultiset, h: &PointMultiset, ell: u64) -> Result<Q, OracleError> {
    let (fl, hl) = (f.to_list(), h.to_list());
    if fl.len() != hl.len() {
        return Err(OracleError::SizeMismatch(fl.len() as u64, hl.len() as u64));
    }
    let n = fl.len();
    if n > 10 {
        return Err(OracleError::TooLarge(n as u64));
    }
    let ell = (ell as usize).min(n.saturating_sub(1));
    let masks: Vec<u32> = (0u32..1 << n).filter(|m| m.count_ones() as usize <= ell).collect();
    let keep = |l: &[Q], m: u32| -> Vec<Q> { (0..n).filter(|i| m & (1 << i) == 0).map(|i| l[i].clone()).collect() };
    let mut best = Q::zero();
    for &mf in &masks {
        let kf = keep(&fl, mf);
        for &mh in masks.iter().filter(|m| m.count_ones() == mf.count_ones()) {
            let kh = keep(&hl, mh);
            for (a, b) in kf.iter().zip(&kh) {
                let gap = (a - b).abs();
                if gap > best {
                    best = gap;
                }
            }
        }
    }
    Ok(best)
}

/// Monte-Carlo estimate of `τ(φ(f))`: sample `t ~ τ` and average the
/// normalised trace of the fiber `⊕ π_{ξ_i(t)}(f)`.
pub fn pullback_sample(h: &DiagonalHom, tau: &TraceMeasure, f: &TestElement, samples: u64, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pieces = float_pieces(tau);
    let total: f64 = pieces.iter().map(|p| p.2).sum();
    let maps: Vec<(Vec<(f64, f64)>, f64)> =
        h.xis.iter().map(|(m, c)| (m.bp().iter().map(|(x, y)| (to_f64(x), to_f64(y))).collect(), *c as f64)).collect();
    let j = h.len() as f64;
    let fl = |bp: &[(Q, Q)]| -> Vec<(f64, f64)> { bp.iter().map(|(x, y)| (to_f64(x), to_f64(y))).collect() };
    let g1 = fl(f.g1.bp());
    let g2 = f.g2.as_ref().map(|g| fl(g.bp()));
    let mut acc = 0.0;
    for _ in 0..samples {
        // inverse-cdf sampling of the diffuse part
        let mut u = rng.gen::<f64>() * total;
        let mut t = 1.0;
        for &(a, b, w) in &pieces {
            if u <= w && w > 0.0 {
                t = a + (b - a) * u / w;
                break;
            }
            u -= w;
        }
        let mut fib = 0.0;
        for (bp, c) in &maps {
            let s = eval_f(bp, t);
            let v = match &g2 {
                Some(g2) => 0.5 * (eval_f(&g1, s) + eval_f(g2, s)),
                None => eval_f(&g1, s),
            };
            fib += c * v;
        }
        acc += fib / j;
    }
    acc / samples as f64
}

fn eval_f(bp: &[(f64, f64)], t: f64) -> f64 {
    for w in bp.windows(2) {
        if t <= w[1].0 {
            let (x0, y0) = w[0];
            let (x1, y1) = w[1];
            return y0 + (y1 - y0) * (t - x0) / (x1 - x0);
        }
    }
    bp[bp.len() - 1].1
}

/// Random instances shared by the property tests, the `verify` suites and
/// the acceptance run.
pub mod instances {
    use super::*;
    use crate::blocks::{q, qi, Block};
    use crate::homs::{self, HomError};
    use crate::plmaps::{PLMap, PlFn};

    pub fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    /// Per-trial generator, independent of scheduling.
    pub fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(trial))
    }

    /// Faithful diffuse probability measure whose density stays within
    /// `[1 − spread, 1 + spread]` of Lebesgue, on a grid of `cells` cells.
    pub fn near_lebesgue<R: Rng>(block: Block, rng: &mut R, cells: i64, spread: &Q) -> TraceMeasure {
        let dens: Vec<Q> = (0..cells).map(|_| qi(1) + q(rng.gen_range(-8..=8), 8) * spread).collect();
        let total: Q = dens.iter().sum::<Q>() / qi(cells);
        let pieces = dens
            .into_iter()
            .enumerate()
            .map(|(i, d)| (q(i as i64, cells), q(i as i64 + 1, cells), d / qi(cells) / &total))
            .collect();
        TraceMeasure::new(block, Q::zero(), Q::zero(), pieces).expect("well formed")
    }

    /// Test element with `g(0)` random in `[-1,1]`, one interior kink and
    /// slopes bounded by `lip`.
    pub fn test_element<R: Rng>(kind: Kind, rng: &mut R, lip: &Q) -> TestElement {
        let one = |rng: &mut R| {
            let x = q(rng.gen_range(1..8), 8);
            let y = lip * q(rng.gen_range(-8..=8), 8) * (qi(1) - &x);
            let y = y.max(qi(-1)).min(qi(1));
            let y0 = &y + lip * q(rng.gen_range(-8..=8), 8) * &x;
            let y0 = y0.max(qi(-1)).min(qi(1));
            let y0 = if (&y0 - &y).abs() > lip * &x { y.clone() } else { y0 };
            PlFn::new(vec![(qi(0), y0), (x, y), (qi(1), qi(0))]).unwrap()
        };
        let g1 = one(rng);
        let g2 = if kind == Kind::Gen { Some(one(rng)) } else { None };
        TestElement::new(g1, g2, lip.clone()).expect("slopes within bound")
    }

    /// A random constructor output out of a small block.
    pub fn constructor<R: Rng>(kind: Kind, rng: &mut R) -> DiagonalHom {
        loop {
            let n = rng.gen_range(1..=3u64);
            let k = rng.gen_range(1..=2u64);
            let h = match (kind, rng.gen_range(0..3)) {
                (Kind::Razak, 0 | 1) => homs::razak_embed(n, k, rng.gen_range(2..=4)),
                (Kind::Razak, _) => homs::razak_amplify(n, k, rng.gen_range(1..=3)),
                (Kind::Gen, 0) => homs::gen_embed(n, k, [3, 5][rng.gen_range(0..2)], rng.gen_range(0..n)),
                (Kind::Gen, 1) => {
                    let kp = rng.gen_range(1..=3);
                    homs::gen_amplify(n, k, kp, rng.gen_range(0..=kp))
                }
                (Kind::Gen, _) => {
                    let kp = rng.gen_range(1..=2u64);
                    let top = ((n - 1) * kp) as i64;
                    homs::gen_rho(n, k, kp, rng.gen_range(-top..=top))
                }
            };
            if let Ok(h) = h {
                return h;
            }
        }
    }

    /// A random Gen constructor whose domain is `dom`, kept small.
    pub fn gen_step<R: Rng>(dom: Block, rng: &mut R) -> DiagonalHom {
        let (n, k) = (dom.n, dom.k);
        loop {
            let h = match rng.gen_range(0..3) {
                0 => homs::gen_embed(n, k, 3, rng.gen_range(0..n)),
                1 => {
                    let kp = rng.gen_range(1..=3);
                    homs::gen_amplify(n, k, kp, rng.gen_range(0..=kp))
                }
                _ => {
                    let top = ((n - 1) * 2) as i64;
                    homs::gen_rho(n, k, 2, rng.gen_range(-top..=top))
                }
            };
            if let Ok(h) = h {
                return h;
            }
        }
    }

    /// Chain of one to three Gen constructors and its composite.
    pub fn gen_composite<R: Rng>(rng: &mut R) -> (Vec<DiagonalHom>, DiagonalHom) {
        let first = constructor(Kind::Gen, rng);
        let mut chain = vec![first];
        let steps = rng.gen_range(0..=2);
        for _ in 0..steps {
            let dom = chain.last().unwrap().cod;
            if dom.fiber_dim() > 400 {
                break;
            }
            chain.push(gen_step(dom, rng));
        }
        let comp = homs::compose_chain(&chain).expect("chain is composable");
        (chain, comp)
    }

    /// Two homs `A → B` of diameter below `eps` pulling Lebesgue back to one
    /// common faithful trace.
    pub struct SamePullbackPair {
        pub sigma: TraceMeasure,
        pub phi: DiagonalHom,
        pub psi: DiagonalHom,
    }

    /// Embedding followed by a codomain automorphism, both precomposed with
    /// transitions so that Lebesgue pulls back to a common `sigma`.
    pub fn same_pullback_pair<R: Rng>(kind: Kind, rng: &mut R, eps: &Q) -> Result<SamePullbackPair, HomError> {
        for _ in 0..64 {
            let n = rng.gen_range(1..=2u64);
            let k = rng.gen_range(1..=2u64);
            // 1/p < eps/2 leaves room for the transitions
            let mut p = 2u64;
            while q(1, p as i64) * qi(2) >= *eps {
                p += 1;
            }
            p += rng.gen_range(0..3);
            let c1 = match kind {
                Kind::Razak => homs::razak_embed(n, k, p)?,
                Kind::Gen => {
                    let p = if p.is_multiple_of(2) { p + 1 } else { p };
                    homs::gen_embed(n, k, p, rng.gen_range(0..n))?
                }
            };
            let (a, b) = (c1.dom, c1.cod);
            let spread = q(1, 4) * eps;
            let nu = near_lebesgue(b, rng, 4, &spread);
            let t = homs::transition(&nu, &TraceMeasure::lebesgue(b))?;
            let c2 = homs::compose(&c1, &t)?;
            let sigma = near_lebesgue(a, rng, 4, &spread);
            let s1 = homs::pullback_trace(&c1, &TraceMeasure::lebesgue(b))?;
            let s2 = homs::pullback_trace(&c2, &TraceMeasure::lebesgue(b))?;
            let phi = homs::compose(&homs::transition(&sigma, &s1)?, &c1)?;
            let psi = homs::compose(&homs::transition(&sigma, &s2)?, &c2)?;
            if homs::diameter(&phi) < *eps && homs::diameter(&psi) < *eps {
                return Ok(SamePullbackPair { sigma, phi, psi });
            }
        }
        Err(HomError::OutOfRange("no pair of small diameter found".into()))
    }

    /// A span `(A,σ) → (B,τ₁), (A,σ) → (B,τ₂)` of trace-preserving maps
    /// through one embedding, the second leg twisted by an automorphism of
    /// the codomain. Gen spans use K₀ = 1 embeddings.
    pub struct SpanInstance {
        pub sigma: TraceMeasure,
        pub phi1: DiagonalHom,
        pub tau1: TraceMeasure,
        pub phi2: DiagonalHom,
        pub tau2: TraceMeasure,
    }

    pub fn span<R: Rng>(kind: Kind, rng: &mut R) -> Result<SpanInstance, HomError> {
        let emb = match kind {
            Kind::Razak => homs::razak_embed(2, 1, 2)?,
            Kind::Gen => homs::gen_embed(2, 1, 3, 1)?,
        };
        let (a, b) = (emb.dom, emb.cod);
        let sigma = TraceMeasure::random_faithful(a, rng, 3);
        let leb = TraceMeasure::lebesgue(b);
        let leg = |c: &DiagonalHom| -> Result<DiagonalHom, HomError> {
            let pulled = homs::pullback_trace(c, &leb)?;
            homs::compose(&homs::transition(&sigma, &pulled)?, c)
        };
        let phi1 = leg(&emb)?;
        let twist = homs::transition(&TraceMeasure::random_faithful(b, rng, 3), &leb)?;
        let mut phi2 = leg(&homs::compose(&emb, &twist)?)?;
        let mut tau2 = leb.clone();
        if rng.gen_bool(0.5) {
            tau2 = TraceMeasure::random_faithful(b, rng, 3);
            phi2 = homs::compose(&phi2, &homs::transition(&leb, &tau2)?)?;
        }
        Ok(SpanInstance { sigma, phi1, tau1: leb, phi2, tau2 })
    }

    /// Random map into `[0,1]` with up to three interior breakpoints.
    pub fn plmap<R: Rng>(rng: &mut R) -> PLMap {
        let mut xs: Vec<i64> = (0..rng.gen_range(0..=3)).map(|_| rng.gen_range(1..24)).collect();
        xs.sort();
        xs.dedup();
        let mut bp = vec![(qi(0), q(rng.gen_range(0..=12), 12))];
        for x in xs {
            bp.push((q(x, 24), q(rng.gen_range(0..=12), 12)));
        }
        bp.push((qi(1), q(rng.gen_range(0..=12), 12)));
        PLMap::new(bp).unwrap()
    }

    /// Random representation of `block` of dimension `dim`, raw (points may
    /// sit at 0 or 1).
    pub fn rep<R: Rng>(block: Block, rng: &mut R, dim: u64) -> RepDescriptor {
        let fd = block.fiber_dim();
        let i = rng.gen_range(0..=dim / fd);
        let rest = dim - i * fd;
        let a = rng.gen_range(0..=rest / block.k);
        let b = if block.kind == Kind::Gen { rng.gen_range(0..=(rest - a * block.k) / block.k) } else { 0 };
        let z = rest - (a + b) * block.k;
        let pts = (0..i).map(|_| q(rng.gen_range(0..=12), 12)).collect();
        RepDescriptor::new(block, pts, a, b, z).expect("dimension adds up")
    }

    /// Point multisets meeting the little counting hypotheses: matching
    /// distance below `eps` and at least `ell` points in every interval of
    /// length `eps` open in [0,1].
    pub fn dense_pair<R: Rng>(rng: &mut R, max_len: usize, ell: u64, eps: &Q) -> Option<(PointMultiset, PointMultiset)> {
        for _ in 0..200 {
            let n = rng.gen_range(1..=max_len);
            let base: Vec<Q> = (0..n).map(|_| q(rng.gen_range(0..=60), 60)).collect();
            let jig = |x: &Q, r: &mut R| (x + q(r.gen_range(-9..=9), 10) * eps).max(qi(0)).min(qi(1));
            let f = PointMultiset::from_points(base.iter().map(|x| jig(x, rng)).collect());
            let h = PointMultiset::from_points(base.iter().map(|x| jig(x, rng)).collect());
            if crate::measures::match_distance(&f, &h).unwrap() < *eps && dense(&f, ell, eps) && dense(&h, ell, eps) {
                return Some((f, h));
            }
        }
        // high ell needs nearly even spacing, which uniform draws rarely give
        let m = num_traits::ToPrimitive::to_i64(&(qi(ell as i64 + 1) / eps).ceil().to_integer()).unwrap_or(1).max(1);
        if (m + 1) as usize > max_len {
            return None;
        }
        for _ in 0..200 {
            let base: Vec<Q> = (0..=m).map(|i| q(i, m)).collect();
            let jig = |x: &Q, r: &mut R| (x + q(r.gen_range(-2..=2), 10 * m)).max(qi(0)).min(qi(1));
            let f = PointMultiset::from_points(base.iter().map(|x| jig(x, rng)).collect());
            let h = PointMultiset::from_points(base.iter().map(|x| jig(x, rng)).collect());
            if crate::measures::match_distance(&f, &h).unwrap() < *eps && dense(&f, ell, eps) && dense(&h, ell, eps) {
                return Some((f, h));
            }
        }
        None
    }

    /// Every interval of length `eps` open in [0,1] meets `m` at least `ell`
    /// times. The count only changes at the critical left ends, so it is
    /// checked there and once inside each gap between them.
    pub fn dense(m: &PointMultiset, ell: u64, eps: &Q) -> bool {
        let l = m.to_list();
        let top = qi(1) - eps;
        if top < qi(0) {
            return l.len() as u64 >= ell;
        }
        let mut cuts: Vec<Q> = l.iter().flat_map(|x| [x.clone(), x - eps]).filter(|x| *x >= qi(0) && *x <= top).collect();
        cuts.push(qi(0));
        cuts.push(top);
        cuts.sort();
        cuts.dedup();
        let mids: Vec<Q> = cuts.windows(2).map(|w| (&w[0] + &w[1]) / qi(2)).collect();
        cuts.iter().chain(&mids).all(|a| {
            let b = a + eps;
            let inside = |x: &Q| (*x > *a || (a.is_zero() && x.is_zero())) && (*x < b || (b == qi(1) && *x == b));
            l.iter().filter(|x| inside(x)).count() as u64 >= ell
        })
    }
}

pub mod suites;

#[cfg(test)]
mod tests {
    use super::*;
    use crate::blocks::{q, qi, Block};
    use crate::homs;
    use crate::measures;
    use crate::plmaps::PlFn;

    #[test]
    fn bottleneck_brackets() {
        let b = Block::razak(1, 1);
        let leb = TraceMeasure::lebesgue(b);
        let (lo, hi) = bottleneck_brute(&leb, &leb, GridSpec { resolution: 50, seed: 0 });
        assert_eq!(lo, qi(0));
        assert!(hi <= q(2, 50));
        let half = TraceMeasure::uniform_on(b, qi(0), q(1, 2)).unwrap();
        let (lo, hi) = bottleneck_brute(&leb, &half, GridSpec { resolution: 1000, seed: 0 });
        assert!(lo <= q(1, 2) && q(1, 2) <= hi && &hi - &lo <= q(2, 1000), "{lo} {hi}");
    }

    #[test]
    fn bottleneck_concordance() {
        let mut rng = instances::rng(3);
        let b = Block::razak(1, 1);
        for _ in 0..10 {
            let m1 = TraceMeasure::random_faithful(b, &mut rng, 3);
            let m2 = TraceMeasure::random_faithful(b, &mut rng, 3);
            let (lo, hi) = bottleneck_brute(&m1, &m2, GridSpec { resolution: 96, seed: 0 });
            let v = measures::bottleneck(&m1, &m2).unwrap();
            assert!(lo <= v && v <= hi, "{lo} <= {v} <= {hi}");
        }
    }

    #[test]
    fn k0_rank_examples() {
        assert_eq!(k0_rank(&homs::identity(Block::gen(2, 1))), Ok(1));
        for n in 1..=3 {
            for j in 0..n {
                let h = homs::gen_embed(n, 2, 3, j).unwrap();
                assert_eq!(k0_rank(&h), Ok(2 * j as i64 - (n as i64 - 1)));
            }
        }
        assert_eq!(k0_rank(&homs::identity(Block::razak(2, 1))), Err(OracleError::NotGen));
    }

    fn down() -> TestElement {
        TestElement::tight(PlFn::linear(qi(1), qi(0)), None).unwrap()
    }

    #[test]
    fn matching_brute_examples() {
        let f = PointMultiset::from_points(vec![q(1, 10), q(1, 2), q(3, 4)]);
        assert_eq!(matching_brute(&f, &f, &[down()]).unwrap(), qi(0));
        let mut rng = instances::rng(5);
        for _ in 0..30 {
            let n = rng.gen_range(1..=8);
            let a = PointMultiset::from_points((0..n).map(|_| q(rng.gen_range(0..=20), 20)).collect());
            let b = PointMultiset::from_points((0..n).map(|_| q(rng.gen_range(0..=20), 20)).collect());
            assert_eq!(matching_brute(&a, &b, &[down()]).unwrap(), measures::match_distance(&a, &b).unwrap());
        }
        let nine = PointMultiset::from_points(vec![qi(0); 9]);
        assert_eq!(matching_brute(&nine, &nine, &[down()]), Err(OracleError::TooLarge(9)));
    }

    #[test]
    fn pullback_sample_examples() {
        let b = Block::razak(1, 1);
        let id = homs::identity(b);
        let leb = TraceMeasure::lebesgue(b);
        let zero = TestElement::tight(PlFn::constant(qi(0)), None).unwrap();
        assert_eq!(pullback_sample(&id, &leb, &zero, 100, 1), 0.0);
        // closed form: integral of 1 - t over [0,1] is 1/2
        let est = pullback_sample(&id, &leb, &down(), 100_000, 2);
        assert!((est - 0.5).abs() < 3.0 * (1.0f64 / 12.0).sqrt() / (100_000f64).sqrt(), "{est}");
    }
}
