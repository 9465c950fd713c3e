//! Piecewise-linear maps with rational breakpoints.

use std::collections::BTreeSet;

use num_traits::{One, Signed, Zero};
use thiserror::Error;

use crate::blocks::{fmt_q, Q};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PlError {
    #[error("need at least two breakpoints")]
    TooShort,
    #[error("breakpoints must start at x=0 and end at x=1")]
    Ends,
    #[error("breakpoint x values must increase strictly (at index {0})")]
    NotIncreasing(usize),
    #[error("value {0} at index {1} outside [0,1]")]
    OutOfRange(String, usize),
}

/// A continuous PL function `[0,1] -> Q`. Collinear breakpoints are dropped,
/// so equal functions have equal breakpoint lists.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PlFn {
    bp: Vec<(Q, Q)>,
}

impl PlFn {
    pub fn new(bp: Vec<(Q, Q)>) -> Result<PlFn, PlError> {
        if bp.len() < 2 {
            return Err(PlError::TooShort);
        }
        if !bp[0].0.is_zero() || !bp[bp.len() - 1].0.is_one() {
            return Err(PlError::Ends);
        }
        for i in 1..bp.len() {
            if bp[i].0 <= bp[i - 1].0 {
                return Err(PlError::NotIncreasing(i));
            }
        }
        Ok(PlFn { bp: simplify(bp) })
    }

    pub fn constant(c: Q) -> PlFn {
        PlFn { bp: vec![(Q::zero(), c.clone()), (Q::one(), c)] }
    }

    pub fn linear(a: Q, b: Q) -> PlFn {
        PlFn { bp: simplify(vec![(Q::zero(), a), (Q::one(), b)]) }
    }

    pub fn bp(&self) -> &[(Q, Q)] {
        &self.bp
    }

    pub fn xs(&self) -> impl Iterator<Item = &Q> {
        self.bp.iter().map(|(x, _)| x)
    }

    pub fn eval(&self, t: &Q) -> Q {
        eval_bp(&self.bp, t)
    }

    pub fn max_slope(&self) -> Q {
        self.bp.windows(2).map(|w| ((&w[1].1 - &w[0].1) / (&w[1].0 - &w[0].0)).abs()).max().unwrap_or_else(Q::zero)
    }

    pub fn min_value(&self) -> Q {
        self.bp.iter().map(|(_, y)| y.clone()).min().unwrap()
    }

    pub fn max_value(&self) -> Q {
        self.bp.iter().map(|(_, y)| y.clone()).max().unwrap()
    }
}

/// A PL map `[0,1] -> [0,1]`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PLMap {
    f: PlFn,
}

impl PLMap {
    pub fn new(bp: Vec<(Q, Q)>) -> Result<PLMap, PlError> {
        for (i, (_, y)) in bp.iter().enumerate() {
            if y.is_negative() || *y > Q::one() {
                return Err(PlError::OutOfRange(fmt_q(y), i));
            }
        }
        Ok(PLMap { f: PlFn::new(bp)? })
    }

    pub fn identity() -> PLMap {
        PLMap { f: PlFn::linear(Q::zero(), Q::one()) }
    }

    /// Panics unless `c` lies in [0,1].
    pub fn constant(c: Q) -> PLMap {
        PLMap::new(vec![(Q::zero(), c.clone()), (Q::one(), c)]).expect("constant in [0,1]")
    }

    /// Straight segment from `(0,a)` to `(1,b)`. Panics outside [0,1].
    pub fn linear(a: Q, b: Q) -> PLMap {
        PLMap::new(vec![(Q::zero(), a), (Q::one(), b)]).expect("endpoints in [0,1]")
    }

    /// Tent through `(0,end)`, `(1/2,apex)`, `(1,end)`. Panics outside [0,1].
    pub fn tent(end: Q, apex: Q) -> PLMap {
        let half = Q::new(1.into(), 2.into());
        PLMap::new(vec![(Q::zero(), end.clone()), (half, apex), (Q::one(), end)]).expect("tent in [0,1]")
    }

    pub fn as_fn(&self) -> &PlFn {
        &self.f
    }

    pub fn bp(&self) -> &[(Q, Q)] {
        self.f.bp()
    }

    pub fn eval(&self, t: &Q) -> Q {
        self.f.eval(t)
    }

    pub fn max_slope(&self) -> Q {
        self.f.max_slope()
    }

    pub fn is_nondecreasing(&self) -> bool {
        self.bp().windows(2).all(|w| w[0].1 <= w[1].1)
    }

    pub fn is_finite_to_one(&self) -> bool {
        self.bp().windows(2).all(|w| w[0].1 != w[1].1)
    }

    pub fn is_identity(&self) -> bool {
        *self == PLMap::identity()
    }
}

fn simplify(bp: Vec<(Q, Q)>) -> Vec<(Q, Q)> {
    let mut out: Vec<(Q, Q)> = Vec::with_capacity(bp.len());
    for p in bp {
        while out.len() >= 2 {
            let (a, b) = (&out[out.len() - 2], &out[out.len() - 1]);
            // drop b if a, b, p are collinear
            if (&b.1 - &a.1) * (&p.0 - &b.0) == (&p.1 - &b.1) * (&b.0 - &a.0) {
                out.pop();
            } else {
                break;
            }
        }
        out.push(p);
    }
    out
}

fn eval_bp(bp: &[(Q, Q)], t: &Q) -> Q {
    let i = bp.partition_point(|(x, _)| x <= t);
    if i == 0 {
        return bp[0].1.clone();
    }
    if i >= bp.len() {
        return bp[bp.len() - 1].1.clone();
    }
    let (x0, y0) = &bp[i - 1];
    let (x1, y1) = &bp[i];
    if x0 == t {
        return y0.clone();
    }
    y0 + (y1 - y0) * (t - x0) / (x1 - x0)
}

pub fn diameter(xi: &PLMap) -> Q {
    xi.f.max_value() - xi.f.min_value()
}

/// `xi ∘ zeta`, that is `t ↦ xi(zeta(t))`.
pub fn compose(xi: &PLMap, zeta: &PLMap) -> PLMap {
    let xs: Vec<&Q> = xi.f.xs().collect();
    let mut mesh: Vec<Q> = Vec::new();
    for w in zeta.bp().windows(2) {
        let ((x0, y0), (x1, y1)) = (&w[0], &w[1]);
        mesh.push(x0.clone());
        if y0 == y1 {
            continue;
        }
        let (lo, hi) = if y0 < y1 { (y0, y1) } else { (y1, y0) };
        let start = xs.partition_point(|u| *u <= lo);
        let end = xs.partition_point(|u| *u < hi);
        let mut cuts: Vec<Q> = xs[start..end].iter().map(|u| x0 + (*u - y0) * (x1 - x0) / (y1 - y0)).collect();
        if y0 > y1 {
            cuts.reverse();
        }
        mesh.extend(cuts);
    }
    mesh.push(Q::one());
    let bp = mesh.into_iter().map(|x| {
        let y = xi.eval(&zeta.eval(&x));
        (x, y)
    });
    PLMap { f: PlFn { bp: simplify(bp.collect()) } }
}

/// Union of all breakpoint abscissae.
pub fn merged_mesh<'a>(maps: impl IntoIterator<Item = &'a PLMap>) -> Vec<Q> {
    let mut s: BTreeSet<Q> = BTreeSet::new();
    for m in maps {
        for x in m.f.xs() {
            s.insert(x.clone());
        }
    }
    s.into_iter().collect()
}

/// `sup_t |f(t) - g(t)|`, attained on the merged mesh.
pub fn sup_distance(f: &PLMap, g: &PLMap) -> Q {
    merged_mesh([f, g]).iter().map(|x| (f.eval(x) - g.eval(x)).abs()).max().unwrap_or_else(Q::zero)
}

/// Pointwise order statistics of a family.
pub fn sort_family(xis: &[PLMap]) -> Vec<PLMap> {
    let runs: Vec<(PLMap, u64)> = xis.iter().map(|x| (x.clone(), 1)).collect();
    let mut out = Vec::with_capacity(xis.len());
    for (m, c) in sort_runs(&runs) {
        for _ in 0..c {
            out.push(m.clone());
        }
    }
    out
}

/// Sort a family given as `(map, multiplicity)` runs; the output uses runs
/// too, merging neighbours that coincide.
pub fn sort_runs(runs: &[(PLMap, u64)]) -> Vec<(PLMap, u64)> {
    let mut grouped: Vec<(PLMap, u64)> = Vec::new();
    {
        let mut tmp: Vec<(PLMap, u64)> = runs.iter().filter(|r| r.1 > 0).cloned().collect();
        tmp.sort_by(|a, b| a.0.cmp(&b.0));
        for (m, c) in tmp {
            match grouped.last_mut() {
                Some((x, d)) if *x == m => *d += c,
                _ => grouped.push((m, c)),
            }
        }
    }
    if grouped.len() <= 1 {
        return grouped;
    }
    let base = merged_mesh(grouped.iter().map(|r| &r.0));
    let mut mesh: BTreeSet<Q> = base.iter().cloned().collect();
    for w in base.windows(2) {
        let (x0, x1) = (&w[0], &w[1]);
        let mut vals: Vec<(Q, Q)> = grouped.iter().map(|(m, _)| (m.eval(x0), m.eval(x1))).collect();
        vals.sort();
        // insertion sort by right value; every swap is a crossing inside (x0,x1)
        for i in 1..vals.len() {
            let mut j = i;
            while j > 0 && vals[j - 1].1 > vals[j].1 {
                let (a_i, b_i) = &vals[j - 1];
                let (a_j, b_j) = &vals[j];
                let da = a_j - a_i;
                let s = &da / (&da - (b_j - b_i));
                mesh.insert(x0 + s * (x1 - x0));
                vals.swap(j - 1, j);
                j -= 1;
            }
        }
    }
    let mesh: Vec<Q> = mesh.into_iter().collect();
    let total: u64 = grouped.iter().map(|r| r.1).sum();
    let columns: Vec<Vec<(Q, u64)>> =
        mesh.iter().map(|x| crate::blocks::group_sorted(grouped.iter().map(|(m, c)| (m.eval(x), *c)).collect())).collect();
    let mut cuts: BTreeSet<u64> = BTreeSet::new();
    cuts.insert(total);
    for col in &columns {
        let mut acc = 0;
        for (_, c) in col {
            acc += c;
            cuts.insert(acc);
        }
    }
    let mut out: Vec<(PLMap, u64)> = Vec::new();
    let mut start = 0u64;
    for &end in &cuts {
        if end == start {
            continue;
        }
        let bp: Vec<(Q, Q)> = mesh.iter().zip(&columns).map(|(x, col)| (x.clone(), value_at_rank(col, start))).collect();
        let m = PLMap { f: PlFn { bp: simplify(bp) } };
        match out.last_mut() {
            Some((x, d)) if *x == m => *d += end - start,
            _ => out.push((m, end - start)),
        }
        start = end;
    }
    out
}

fn value_at_rank(col: &[(Q, u64)], r: u64) -> Q {
    let mut acc = 0;
    for (v, c) in col {
        acc += c;
        if r < acc {
            return v.clone();
        }
    }
    col[col.len() - 1].0.clone()
}

/// Closed intervals whose union is `xi^{-1}([a,b])`; degenerate intervals
/// are kept since they are part of the preimage.
pub fn preimage_intervals(xi: &PLMap, a: &Q, b: &Q) -> Vec<(Q, Q)> {
    let mut out: Vec<(Q, Q)> = Vec::new();
    for w in xi.bp().windows(2) {
        let ((x0, y0), (x1, y1)) = (&w[0], &w[1]);
        let piece = if y0 == y1 {
            if a <= y0 && y0 <= b {
                Some((x0.clone(), x1.clone()))
            } else {
                None
            }
        } else {
            // parameter values where the segment enters and leaves [a,b]
            let at = |v: &Q| x0 + (v - y0) * (x1 - x0) / (y1 - y0);
            let (mut s, mut e) = (at(a), at(b));
            if s > e {
                std::mem::swap(&mut s, &mut e);
            }
            let s = s.max(x0.clone());
            let e = e.min(x1.clone());
            if s <= e {
                Some((s, e))
            } else {
                None
            }
        };
        if let Some((s, e)) = piece {
            match out.last_mut() {
                Some((_, pe)) if *pe >= s => {
                    if e > *pe {
                        *pe = e;
                    }
                }
                _ => out.push((s, e)),
            }
        }
    }
    out
}

/// A `delta` with `diameter(zeta) < delta ⇒ diameter(xi ∘ zeta) < eps`.
pub fn modulus_delta(xi: &PLMap, eps: &Q) -> Q {
    let s = xi.max_slope();
    if s.is_zero() {
        Q::one()
    } else {
        eps / s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::blocks::{q, qi};
    use proptest::prelude::*;

    fn pm(bp: &[(i64, i64, i64, i64)]) -> PLMap {
        PLMap::new(bp.iter().map(|&(a, b, c, d)| (q(a, b), q(c, d))).collect()).unwrap()
    }

    // max - min over a dense grid; PL maps with denominators dividing the
    // grid size are sampled at their breakpoints, so this is exact for them.
    fn grid_diameter(m: &PLMap, n: i64) -> Q {
        let vals: Vec<Q> = (0..=n).map(|i| m.eval(&q(i, n))).collect();
        vals.iter().max().unwrap() - vals.iter().min().unwrap()
    }

    #[test]
    fn rejects_bad_breakpoints() {
        assert_eq!(PLMap::new(vec![(qi(0), qi(0))]), Err(PlError::TooShort));
        assert_eq!(PLMap::new(vec![(qi(0), qi(0)), (q(1, 2), qi(0))]), Err(PlError::Ends));
        assert!(matches!(PLMap::new(vec![(qi(0), qi(0)), (qi(1), qi(2))]), Err(PlError::OutOfRange(..))));
        assert_eq!(
            PLMap::new(vec![(qi(0), qi(0)), (q(1, 2), qi(0)), (q(1, 2), qi(1)), (qi(1), qi(1))]),
            Err(PlError::NotIncreasing(2))
        );
    }

    #[test]
    fn diameter_examples() {
        assert_eq!(diameter(&PLMap::constant(q(1, 2))), qi(0));
        assert_eq!(diameter(&PLMap::identity()), qi(1));
        let tent = pm(&[(0, 1, 1, 3), (1, 2, 2, 3), (1, 1, 1, 3)]);
        assert_eq!(grid_diameter(&tent, 600), q(1, 3));
        assert_eq!(diameter(&tent), q(1, 3));
    }

    #[test]
    fn collinear_points_are_dropped() {
        let m = pm(&[(0, 1, 0, 1), (1, 3, 1, 3), (1, 1, 1, 1)]);
        assert!(m.is_identity());
        assert_eq!(m.bp().len(), 2);
    }

    #[test]
    fn compose_examples() {
        let zeta = pm(&[(0, 1, 1, 4), (1, 3, 1, 1), (1, 1, 0, 1)]);
        assert_eq!(compose(&PLMap::identity(), &zeta), zeta);
        let xi = PLMap::linear(qi(0), q(1, 2));
        assert_eq!(compose(&xi, &PLMap::identity()), xi);
        let tent = pm(&[(0, 1, 1, 3), (1, 2, 2, 3), (1, 1, 1, 3)]);
        let c = compose(&PLMap::identity(), &tent);
        assert_eq!(grid_diameter(&c, 600), q(1, 3));
        assert_eq!(diameter(&c), q(1, 3));
    }

    #[test]
    fn compose_matches_pointwise() {
        let xi = pm(&[(0, 1, 0, 1), (1, 4, 1, 1), (3, 4, 1, 5), (1, 1, 1, 2)]);
        let zeta = pm(&[(0, 1, 1, 1), (1, 2, 0, 1), (1, 1, 1, 3)]);
        let c = compose(&xi, &zeta);
        for i in 0..=240 {
            let t = q(i, 240);
            assert_eq!(c.eval(&t), xi.eval(&zeta.eval(&t)));
        }
    }

    #[test]
    fn sort_examples() {
        let a = PLMap::linear(qi(0), q(1, 2));
        let b = PLMap::linear(q(1, 2), qi(1));
        assert_eq!(sort_family(&[a.clone(), b.clone()]), vec![a.clone(), b.clone()]);
        assert_eq!(sort_family(&[b.clone(), a.clone()]), vec![a, b]);

        let up = PLMap::identity();
        let down = PLMap::linear(qi(1), qi(0));
        let s = sort_family(&[up, down]);
        // pointwise min / max on a grid
        for i in 0..=100 {
            let t = q(i, 100);
            let (u, d) = (t.clone(), qi(1) - &t);
            assert_eq!(s[0].eval(&t), u.clone().min(d.clone()));
            assert_eq!(s[1].eval(&t), u.max(d));
        }
        assert_eq!(s[0], pm(&[(0, 1, 0, 1), (1, 2, 1, 2), (1, 1, 0, 1)]));
        assert_eq!(s[1], pm(&[(0, 1, 1, 1), (1, 2, 1, 2), (1, 1, 1, 1)]));
    }

    #[test]
    fn preimage_examples() {
        assert_eq!(preimage_intervals(&PLMap::identity(), &q(1, 4), &q(1, 2)), vec![(q(1, 4), q(1, 2))]);
        let tent = pm(&[(0, 1, 0, 1), (1, 2, 1, 1), (1, 1, 0, 1)]);
        assert_eq!(preimage_intervals(&tent, &q(1, 2), &qi(1)), vec![(q(1, 4), q(3, 4))]);
        assert!(preimage_intervals(&PLMap::constant(q(1, 2)), &qi(0), &q(1, 4)).is_empty());
    }

    #[test]
    fn finite_to_one_flag() {
        assert!(PLMap::identity().is_finite_to_one());
        assert!(!pm(&[(0, 1, 0, 1), (1, 2, 1, 2), (1, 1, 1, 2)]).is_finite_to_one());
    }

    fn arb_map() -> impl Strategy<Value = PLMap> {
        prop::collection::vec((1i64..24, 0i64..=12), 0..4).prop_flat_map(|inner| {
            (0i64..=12, 0i64..=12).prop_map(move |(y0, y1)| {
                let mut xs: Vec<i64> = inner.iter().map(|p| p.0).collect();
                xs.sort();
                xs.dedup();
                let mut bp = vec![(qi(0), q(y0, 12))];
                for x in &xs {
                    let y = inner.iter().find(|p| p.0 == *x).unwrap().1;
                    bp.push((q(*x, 24), q(y, 12)));
                }
                bp.push((qi(1), q(y1, 12)));
                PLMap::new(bp).unwrap()
            })
        })
    }

    proptest! {
        #[test]
        fn compose_never_widens(xi in arb_map(), zeta in arb_map()) {
            prop_assert!(diameter(&compose(&xi, &zeta)) <= diameter(&xi));
        }

        #[test]
        fn modulus_of_continuity_contract(xi in arb_map(), zeta in arb_map(), e in 1i64..10) {
            let eps = q(e, 10);
            let delta = modulus_delta(&xi, &eps);
            if diameter(&zeta) < delta {
                prop_assert!(diameter(&compose(&xi, &zeta)) < eps);
            }
        }

        #[test]
        fn sorted_family_is_ordered_rearrangement(fam in prop::collection::vec(arb_map(), 1..5)) {
            let s = sort_family(&fam);
            prop_assert_eq!(s.len(), fam.len());
            let mut mesh = merged_mesh(fam.iter().chain(s.iter()));
            let extra: Vec<Q> = mesh.windows(2).map(|w| (&w[0] + &w[1]) / qi(2)).collect();
            mesh.extend(extra);
            for t in &mesh {
                let mut a: Vec<Q> = fam.iter().map(|m| m.eval(t)).collect();
                a.sort();
                let b: Vec<Q> = s.iter().map(|m| m.eval(t)).collect();
                prop_assert_eq!(a, b);
            }
        }

        #[test]
        fn sorting_keeps_small_diameters(fam in prop::collection::vec(arb_map(), 1..5)) {
            let eps = fam.iter().map(diameter).max().unwrap() + q(1, 1000);
            for m in sort_family(&fam) {
                prop_assert!(diameter(&m) < qi(2) * &eps);
            }
        }

        #[test]
        fn preimage_is_exact(xi in arb_map(), a in 0i64..=12, w in 0i64..=12) {
            let (lo, hi) = (q(a, 12), q((a + w).min(12), 12));
            let iv = preimage_intervals(&xi, &lo, &hi);
            for i in 0..=96 {
                let t = q(i, 96);
                let y = xi.eval(&t);
                let inside = iv.iter().any(|(s, e)| *s <= t && t <= *e);
                prop_assert_eq!(inside, lo <= y && y <= hi);
            }
        }
    }
}
