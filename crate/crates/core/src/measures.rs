//! Trace measures: atoms at the points at infinity plus a piecewise-uniform
//! part on [0,1]. Distances between measures and between point multisets.

use num_traits::{One, Signed, Zero};
use rand::Rng;
use thiserror::Error;

use crate::blocks::{fmt_q, q, Block, Kind, Q};
use crate::plmaps::PLMap;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MeasureError {
    #[error("invalid measure: {0}")]
    Invalid(String),
    #[error("measure has atoms at infinity")]
    NotDiffuse,
    #[error("measure is not faithful")]
    NotFaithful,
    #[error("total masses differ: {0} vs {1}")]
    MassMismatch(String, String),
    #[error("constant segment on [{0},{1}] carries mass")]
    ConstantSegment(String, String),
    #[error("multisets have sizes {0} and {1}")]
    SizeMismatch(u64, u64),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TraceMeasure {
    pub block: Block,
    pub atom1: Q,
    pub atom2: Q,
    /// `(a, b, mass)`, contiguous from 0 to 1, uniform on each piece.
    pub pieces: Vec<(Q, Q, Q)>,
}

impl TraceMeasure {
    pub fn new(block: Block, atom1: Q, atom2: Q, pieces: Vec<(Q, Q, Q)>) -> Result<Self, MeasureError> {
        if atom1.is_negative() || atom2.is_negative() {
            return Err(MeasureError::Invalid("negative atom".into()));
        }
        if block.kind == Kind::Razak && !atom2.is_zero() {
            return Err(MeasureError::Invalid("Razak blocks have a single point at infinity".into()));
        }
        if pieces.is_empty() {
            return Err(MeasureError::Invalid("no pieces".into()));
        }
        let mut expect = Q::zero();
        for (i, (a, b, m)) in pieces.iter().enumerate() {
            if *a != expect {
                return Err(MeasureError::Invalid(format!("piece {i} starts at {} not {}", fmt_q(a), fmt_q(&expect))));
            }
            if b <= a {
                return Err(MeasureError::Invalid(format!("piece {i} is empty")));
            }
            if m.is_negative() {
                return Err(MeasureError::Invalid(format!("piece {i} has negative mass")));
            }
            expect = b.clone();
        }
        if !expect.is_one() {
            return Err(MeasureError::Invalid("pieces must end at 1".into()));
        }
        Ok(TraceMeasure { block, atom1, atom2, pieces: merge_pieces(pieces) })
    }

    pub fn lebesgue(block: Block) -> Self {
        TraceMeasure { block, atom1: Q::zero(), atom2: Q::zero(), pieces: vec![(Q::zero(), Q::one(), Q::one())] }
    }

    /// Probability measure uniform on `[a,b]`.
    pub fn uniform_on(block: Block, a: Q, b: Q) -> Result<Self, MeasureError> {
        let mut pieces = Vec::new();
        if a.is_positive() {
            pieces.push((Q::zero(), a.clone(), Q::zero()));
        }
        pieces.push((a, b.clone(), Q::one()));
        if b < Q::one() {
            pieces.push((b, Q::one(), Q::zero()));
        }
        TraceMeasure::new(block, Q::zero(), Q::zero(), pieces)
    }

    /// Random faithful diffuse probability measure with grid-aligned cuts and
    /// densities between 1/4 and 4 (before normalisation).
    pub fn random_faithful<R: Rng>(block: Block, rng: &mut R, max_pieces: usize) -> Self {
        let npieces = rng.gen_range(1..=max_pieces.max(1));
        let grid = 24i64;
        let mut cuts: Vec<i64> = (1..grid).collect();
        for i in (1..cuts.len()).rev() {
            let j = rng.gen_range(0..=i);
            cuts.swap(i, j);
        }
        let mut cuts: Vec<i64> = cuts.into_iter().take(npieces - 1).collect();
        cuts.sort();
        let mut xs = vec![0i64];
        xs.extend(cuts);
        xs.push(grid);
        let weights: Vec<i64> = (0..npieces).map(|_| rng.gen_range(1..=16)).collect();
        let raw: Vec<Q> = xs.windows(2).zip(&weights).map(|(w, d)| q((w[1] - w[0]) * d, grid)).collect();
        let total: Q = raw.iter().sum();
        let pieces = xs.windows(2).zip(raw).map(|(w, m)| (q(w[0], grid), q(w[1], grid), m / &total)).collect();
        TraceMeasure::new(block, Q::zero(), Q::zero(), pieces).expect("well formed")
    }

    pub fn diffuse_mass(&self) -> Q {
        self.pieces.iter().map(|p| &p.2).sum()
    }

    pub fn total_mass(&self) -> Q {
        &self.atom1 + &self.atom2 + self.diffuse_mass()
    }

    pub fn is_faithful(&self) -> bool {
        self.pieces.iter().all(|p| p.2.is_positive())
    }

    pub fn is_diffuse(&self) -> bool {
        self.atom1.is_zero() && self.atom2.is_zero()
    }

    pub fn is_probability(&self) -> bool {
        self.total_mass().is_one()
    }

    /// Diffuse mass of `[0,t]`.
    pub fn cdf(&self, t: &Q) -> Q {
        let mut acc = Q::zero();
        for (a, b, m) in &self.pieces {
            if t >= b {
                acc += m;
            } else {
                if t > a {
                    acc += m * (t - a) / (b - a);
                }
                break;
            }
        }
        acc
    }

    /// Diffuse mass of `[a,b]`.
    pub fn mass_of(&self, a: &Q, b: &Q) -> Q {
        self.cdf(b) - self.cdf(a)
    }

    /// Quantile as segments `(u0, u1, x0, x1)`, one per piece of positive mass.
    fn quantile_segments(&self) -> Vec<(Q, Q, Q, Q)> {
        let mut out = Vec::new();
        let mut u = Q::zero();
        for (a, b, m) in &self.pieces {
            if m.is_positive() {
                let u1 = &u + m;
                out.push((u.clone(), u1.clone(), a.clone(), b.clone()));
                u = u1;
            }
        }
        out
    }

    /// Smallest `x` with `cdf(x) >= u`, for a faithful measure.
    pub fn quantile(&self, u: &Q) -> Q {
        quantile_in(&self.quantile_segments(), u)
    }

    fn require_diffuse(&self) -> Result<(), MeasureError> {
        if self.is_diffuse() {
            Ok(())
        } else {
            Err(MeasureError::NotDiffuse)
        }
    }
}

fn quantile_in(segs: &[(Q, Q, Q, Q)], u: &Q) -> Q {
    let i = segs.partition_point(|s| s.1 < *u);
    match segs.get(i) {
        Some((u0, u1, x0, x1)) => {
            if u <= u0 {
                x0.clone()
            } else {
                x0 + (x1 - x0) * (u - u0) / (u1 - u0)
            }
        }
        None => Q::one(),
    }
}

fn merge_pieces(pieces: Vec<(Q, Q, Q)>) -> Vec<(Q, Q, Q)> {
    let mut out: Vec<(Q, Q, Q)> = Vec::with_capacity(pieces.len());
    for (a, b, m) in pieces {
        if let Some((pa, pb, pm)) = out.last_mut() {
            // equal densities: pm/(pb-pa) == m/(b-a)
            if &*pm * (&b - &a) == &m * (&*pb - &*pa) {
                *pb = b;
                *pm += m;
                continue;
            }
        }
        out.push((a, b, m));
    }
    out
}

fn seg_value(segs: &[(Q, Q, Q, Q)], u: &Q, from_right: bool) -> Q {
    let idx = if from_right {
        segs.iter().position(|s| s.0 <= *u && *u < s.1)
    } else {
        segs.iter().position(|s| s.0 < *u && *u <= s.1)
    };
    let (u0, u1, x0, x1) = &segs[idx.expect("u inside the quantile domain")];
    x0 + (x1 - x0) * (u - u0) / (u1 - u0)
}

/// Optimal matching distance between diffuse measures of equal mass: the
/// sup-distance between their quantile functions.
pub fn bottleneck(mu: &TraceMeasure, nu: &TraceMeasure) -> Result<Q, MeasureError> {
    mu.require_diffuse()?;
    nu.require_diffuse()?;
    let (mm, nm) = (mu.diffuse_mass(), nu.diffuse_mass());
    if mm != nm {
        return Err(MeasureError::MassMismatch(fmt_q(&mm), fmt_q(&nm)));
    }
    if mm.is_zero() {
        return Ok(Q::zero());
    }
    let (s1, s2) = (mu.quantile_segments(), nu.quantile_segments());
    let mut us: Vec<Q> = s1.iter().chain(&s2).flat_map(|s| [s.0.clone(), s.1.clone()]).collect();
    us.sort();
    us.dedup();
    let mut best = Q::zero();
    for w in us.windows(2) {
        let left = (seg_value(&s1, &w[0], true) - seg_value(&s2, &w[0], true)).abs();
        let right = (seg_value(&s1, &w[1], false) - seg_value(&s2, &w[1], false)).abs();
        best = best.max(left).max(right);
    }
    Ok(best)
}

pub fn atom_gap(mu: &TraceMeasure, nu: &TraceMeasure) -> Q {
    (&mu.atom1 - &nu.atom1).abs().max((&mu.atom2 - &nu.atom2).abs())
}

/// Quantile-matching map `t ↦ quantile_sigma(cdf_tau(t))`. The diagonal map
/// it defines pulls `tau` back to `sigma`.
pub fn transition_plmap(sigma: &TraceMeasure, tau: &TraceMeasure) -> Result<PLMap, MeasureError> {
    for m in [sigma, tau] {
        m.require_diffuse()?;
        if !m.is_faithful() {
            return Err(MeasureError::NotFaithful);
        }
    }
    let (sm, tm) = (sigma.diffuse_mass(), tau.diffuse_mass());
    if sm != tm {
        return Err(MeasureError::MassMismatch(fmt_q(&sm), fmt_q(&tm)));
    }
    let mut us: Vec<Q> = Vec::new();
    for m in [sigma, tau] {
        let mut acc = Q::zero();
        us.push(acc.clone());
        for p in &m.pieces {
            acc += &p.2;
            us.push(acc.clone());
        }
    }
    us.sort();
    us.dedup();
    let (ts, ss) = (tau.quantile_segments(), sigma.quantile_segments());
    let bp = us.iter().map(|u| (quantile_in(&ts, u), quantile_in(&ss, u))).collect();
    Ok(PLMap::new(bp).expect("quantile maps are monotone onto [0,1]"))
}

/// Weighted sum of images of a diffuse measure under several maps.
pub fn pushforward_many(mu: &TraceMeasure, maps: &[(PLMap, Q)]) -> Result<TraceMeasure, MeasureError> {
    mu.require_diffuse()?;
    // (start, end, density) contributions, summed by a sweep
    let mut events: Vec<(Q, Q)> = Vec::new();
    for (xi, w) in maps {
        for (a, b, m) in &mu.pieces {
            if m.is_zero() {
                continue;
            }
            let dens = m / (b - a) * w;
            for seg in xi.bp().windows(2) {
                let ((x0, y0), (x1, y1)) = (&seg[0], &seg[1]);
                let s = a.max(x0);
                let e = b.min(x1);
                if s >= e {
                    continue;
                }
                if y0 == y1 {
                    return Err(MeasureError::ConstantSegment(fmt_q(s), fmt_q(e)));
                }
                let slope = (y1 - y0) / (x1 - x0);
                let ys = y0 + &slope * (s - x0);
                let ye = y0 + &slope * (e - x0);
                let d = &dens / slope.abs();
                let (lo, hi) = if ys < ye { (ys, ye) } else { (ye, ys) };
                events.push((lo, d.clone()));
                events.push((hi, -d));
            }
        }
    }
    events.push((Q::zero(), Q::zero()));
    events.push((Q::one(), Q::zero()));
    events.sort_by(|x, y| x.0.cmp(&y.0));
    let mut pieces = Vec::new();
    let mut dens = Q::zero();
    let mut i = 0;
    while i < events.len() {
        let x = events[i].0.clone();
        while i < events.len() && events[i].0 == x {
            dens += &events[i].1;
            i += 1;
        }
        if i < events.len() {
            let nx = events[i].0.clone();
            pieces.push((x.clone(), nx.clone(), &dens * (&nx - &x)));
        }
    }
    TraceMeasure::new(mu.block, Q::zero(), Q::zero(), pieces)
}

pub fn pushforward(mu: &TraceMeasure, xi: &PLMap) -> Result<TraceMeasure, MeasureError> {
    pushforward_many(mu, &[(xi.clone(), Q::one())])
}

/// Finite multiset of rationals, sorted, with multiplicities.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct PointMultiset {
    pub items: Vec<(Q, u64)>,
}

impl PointMultiset {
    pub fn from_points(points: Vec<Q>) -> Self {
        PointMultiset { items: crate::blocks::group_sorted(points.into_iter().map(|p| (p, 1)).collect()) }
    }

    pub fn from_runs(runs: Vec<(Q, u64)>) -> Self {
        PointMultiset { items: crate::blocks::group_sorted(runs) }
    }

    pub fn len(&self) -> u64 {
        self.items.iter().map(|x| x.1).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn to_list(&self) -> Vec<Q> {
        self.items.iter().flat_map(|(x, m)| std::iter::repeat_n(x.clone(), *m as usize)).collect()
    }
}

/// Largest gap between the sorted lists, which is the min over bijections
/// of the max gap.
pub fn match_distance(f: &PointMultiset, h: &PointMultiset) -> Result<Q, MeasureError> {
    match_runs(&f.items, &h.items)
}

/// [`match_distance`] on sorted `(value, multiplicity)` runs.
pub fn match_runs(f: &[(Q, u64)], h: &[(Q, u64)]) -> Result<Q, MeasureError> {
    let (lf, lh): (u64, u64) = (f.iter().map(|x| x.1).sum(), h.iter().map(|x| x.1).sum());
    if lf != lh {
        return Err(MeasureError::SizeMismatch(lf, lh));
    }
    let mut best = Q::zero();
    let (mut i, mut j) = (0, 0);
    let (mut ri, mut rj) = (f.first().map(|x| x.1).unwrap_or(0), h.first().map(|x| x.1).unwrap_or(0));
    while i < f.len() && j < h.len() {
        let d = (&f[i].0 - &h[j].0).abs();
        if d > best {
            best = d;
        }
        let step = ri.min(rj);
        ri -= step;
        rj -= step;
        if ri == 0 {
            i += 1;
            ri = f.get(i).map(|x| x.1).unwrap_or(0);
        }
        if rj == 0 {
            j += 1;
            rj = h.get(j).map(|x| x.1).unwrap_or(0);
        }
    }
    Ok(best)
}

/// Value of `b_ell` and whether it is exact or an upper bound.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BEll {
    pub value: Q,
    pub exact: bool,
}

pub const B_ELL_EXHAUSTIVE_MAX: u64 = 12;

/// Worst matching distance after removing up to `ell` points from each side.
pub fn b_ell(f: &PointMultiset, h: &PointMultiset, ell: u64) -> Result<BEll, MeasureError> {
    if f.len() != h.len() {
        return Err(MeasureError::SizeMismatch(f.len(), h.len()));
    }
    let (fl, hl) = (f.to_list(), h.to_list());
    let n = fl.len();
    let ell = (ell as usize).min(n.saturating_sub(1));
    if n as u64 <= B_ELL_EXHAUSTIVE_MAX {
        Ok(BEll { value: b_ell_exhaustive(&fl, &hl, ell), exact: true })
    } else {
        let mut best = Q::zero();
        for m in 0..=ell {
            for i in 0..n - m {
                best = best.max(&fl[i + m] - &hl[i]).max(&hl[i + m] - &fl[i]);
            }
        }
        Ok(BEll { value: best, exact: false })
    }
}

fn b_ell_exhaustive(fl: &[Q], hl: &[Q], ell: usize) -> Q {
    let n = fl.len();
    // rank all pairwise gaps so the enumeration compares integers
    let mut gaps: Vec<Q> = Vec::with_capacity(n * n);
    for a in fl {
        for b in hl {
            gaps.push((a - b).abs());
        }
    }
    let mut sorted = gaps.clone();
    sorted.sort();
    sorted.dedup();
    let rank: Vec<usize> = gaps.iter().map(|g| sorted.binary_search(g).unwrap()).collect();
    let mut best = 0usize;
    for m in 0..=ell {
        let fs = kept_subsets(fl, m);
        let hs = kept_subsets(hl, m);
        for kf in &fs {
            for kh in &hs {
                let mut worst = 0usize;
                for (a, b) in kf.iter().zip(kh) {
                    worst = worst.max(rank[a * n + b]);
                }
                best = best.max(worst);
            }
        }
    }
    if n == 0 {
        Q::zero()
    } else {
        sorted[best].clone()
    }
}

/// Index lists kept after removing `m` elements, one per distinct value pattern.
fn kept_subsets(list: &[Q], m: usize) -> Vec<Vec<usize>> {
    let n = list.len();
    let mut out = Vec::new();
    let mut seen = std::collections::BTreeSet::new();
    let mut removed: Vec<usize> = (0..m).collect();
    loop {
        let key: Vec<&Q> = removed.iter().map(|&i| &list[i]).collect();
        if seen.insert(key) {
            out.push((0..n).filter(|i| !removed.contains(i)).collect());
        }
        // next combination
        let mut i = m;
        loop {
            if i == 0 {
                return out;
            }
            i -= 1;
            if removed[i] < n - m + i {
                removed[i] += 1;
                for j in i + 1..m {
                    removed[j] = removed[j - 1] + 1;
                }
                break;
            }
        }
        if m == 0 {
            return out;
        }
    }
}

/// Mass of the measure that lies within distance `r` of `[a,b]`.
pub fn mass_near(mu: &TraceMeasure, a: &Q, b: &Q, r: &Q) -> Q {
    let lo = (a - r).max(Q::zero());
    let hi = (b + r).min(Q::one());
    mu.mass_of(&lo, &hi)
}
