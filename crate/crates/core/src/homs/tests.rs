use proptest::prelude::*;
use rand::Rng;

use super::*;
use crate::blocks::{qi, Block};
use crate::oracle::{self, instances};
use crate::plmaps::PlFn;

fn ends(h: &DiagonalHom, t: &Q) -> Vec<Q> {
    let mut v: Vec<Q> = h.map_list().iter().map(|m| m.eval(t)).collect();
    v.sort();
    v
}

fn down() -> TestElement {
    TestElement::tight(PlFn::linear(qi(1), qi(0)), None).unwrap()
}

#[test]
fn identity_is_valid() {
    for b in [Block::razak(1, 1), Block::razak(3, 2), Block::gen(2, 1), Block::gen(1, 3)] {
        let h = identity(b);
        assert!(validate(&h).valid(), "{b}");
        assert_eq!(diameter(&h), qi(1));
    }
    assert_eq!(k0(&identity(Block::gen(2, 1))), K0::Value(1));
    assert_eq!(k0(&identity(Block::razak(2, 1))), K0::Trivial);
}

#[test]
fn unsorted_family_is_rejected_with_witness() {
    let b = Block::razak(1, 1);
    let c = Block::razak(2, 1);
    let h = razak_embed(1, 1, 2).unwrap();
    assert_eq!(h.cod, c);
    let mut bad = h.clone();
    bad.xis.reverse();
    let cert = validate(&bad);
    assert!(!cert.valid());
    let sorted = cert.checks.iter().find(|c| c.name == "sorted").unwrap();
    assert!(!sorted.ok && !sorted.witness.is_empty());
    assert!(matches!(DiagonalHom::new(b, c, bad.xis.clone(), bad.split_a.clone(), None), Err(HomError::Invalid(_))));
}

#[test]
fn razak_embed_example() {
    let h = razak_embed(2, 1, 2).unwrap();
    assert_eq!(h.cod, Block::razak(4, 3));
    assert_eq!(h.len(), 6);
    assert_eq!(ends(&h, &qi(0)), vec![qi(0), qi(0), q(1, 2), q(1, 2), q(1, 2), q(1, 2)]);
    assert_eq!(ends(&h, &qi(1)), vec![q(1, 2), q(1, 2), q(1, 2), qi(1), qi(1), qi(1)]);
    assert_eq!(h.split_a.r1, 1);
    assert_eq!(h.split_a.points, vec![(q(1, 2), 1)]);
    assert!(validate(&h).valid());
}

#[test]
fn embed_diameter_within_one_over_p() {
    for (n, k, p) in [(2, 1, 2), (2, 1, 3), (3, 2, 5), (1, 1, 7)] {
        let h = razak_embed(n, k, p).unwrap();
        assert!(diameter(&h) <= q(1, p as i64), "({n},{k},{p})");
    }
    for (n, k, p) in [(1, 1, 3), (2, 1, 5), (3, 2, 3)] {
        assert!(diameter(&gen_embed(n, k, p, 0).unwrap()) <= q(1, p as i64));
    }
}

#[test]
fn constructors_reject_bad_parameters() {
    assert!(razak_embed(1, 1, 1).is_err());
    assert!(gen_embed(2, 1, 4, 0).is_err());
    assert!(gen_embed(2, 1, 3, 2).is_err());
    assert!(gen_amplify(2, 1, 2, 3).is_err());
    assert!(gen_rho(1, 1, 1, 0).is_err());
    for j in [-1, 1] {
        assert!(matches!(gen_rho(2, 1, 2, j), Err(HomError::OutOfRange(_))));
    }
}

#[test]
fn k0_examples() {
    assert_eq!(k0(&gen_embed(2, 1, 3, 1).unwrap()), K0::Value(1));
    assert_eq!(k0(&gen_embed(2, 1, 3, 0).unwrap()), K0::Value(-1));
    assert_eq!(k0(&gen_amplify(2, 1, 2, 1).unwrap()), K0::Value(0));
    for j in [-2, 0, 2] {
        assert_eq!(k0(&gen_rho(2, 1, 2, j).unwrap()), K0::Value(j));
    }
    // odd offsets are reachable once k >= 2
    for j in -2..=2 {
        assert_eq!(k0(&gen_rho(2, 2, 2, j).unwrap()), K0::Value(j));
    }
}

#[test]
fn constructor_outputs_are_valid() {
    let mut rng = instances::rng(11);
    for kind in [Kind::Razak, Kind::Gen] {
        for _ in 0..40 {
            let h = instances::constructor(kind, &mut rng);
            assert!(validate(&h).valid());
        }
    }
}

#[test]
fn compose_with_identity() {
    let h = gen_embed(2, 1, 3, 1).unwrap();
    assert_eq!(compose(&identity(h.dom), &h).unwrap(), h);
    assert_eq!(compose(&h, &identity(h.cod)).unwrap(), h);
    let r = razak_embed(2, 1, 3).unwrap();
    assert_eq!(compose(&r, &identity(r.cod)).unwrap(), r);
    assert!(compose(&r, &r).is_err());
}

/// Composites that skip the sort agree with sorting the raw family.
#[test]
fn order_preserving_composites_match_full_sort() {
    let mut rng = instances::rng(29);
    for i in 0..40 {
        let kind = if i % 2 == 0 { Kind::Razak } else { Kind::Gen };
        let c = instances::constructor(kind, &mut rng);
        let a = transition(&TraceMeasure::random_faithful(c.dom, &mut rng, 3), &TraceMeasure::lebesgue(c.dom)).unwrap();
        let b = transition(&TraceMeasure::random_faithful(c.cod, &mut rng, 3), &TraceMeasure::lebesgue(c.cod)).unwrap();
        for (first, second) in [(&a, &c), (&c, &b)] {
            let h = compose(first, second).unwrap();
            let mut raw = Vec::new();
            for (xi, m) in &first.xis {
                for (zeta, n) in &second.xis {
                    raw.push((plmaps::compose(xi, zeta), m * n));
                }
            }
            assert_eq!(h.xis, plmaps::sort_runs(&raw));
            assert!(validate(&h).valid());
        }
    }
}

#[test]
fn k0_matches_rank_oracle_on_composites() {
    let mut rng = instances::rng(17);
    for _ in 0..60 {
        let (chain, comp) = instances::gen_composite(&mut rng);
        assert!(validate(&comp).valid());
        let product: i64 = chain.iter().map(|h| k0(h).value()).product();
        assert_eq!(k0(&comp).value(), product);
        assert_eq!(oracle::k0_rank(&comp).unwrap(), product);
    }
}

#[test]
fn d_diag_examples() {
    let b = Block::razak(1, 1);
    let id = identity(b);
    assert_eq!(d_diag(&id, &id).unwrap(), qi(0));
    let mut half = id.clone();
    half.xis = vec![(PLMap::linear(qi(0), q(1, 2)), 1)];
    assert_eq!(d_diag(&id, &half).unwrap(), q(1, 2));
    let h = razak_embed(2, 1, 2).unwrap();
    assert_eq!(d_diag(&h, &reverse_k(&h)).unwrap(), qi(0));
}

#[test]
fn d_diag_matches_sampled_maximum() {
    let mut rng = instances::rng(23);
    for _ in 0..30 {
        let a: Vec<PLMap> = (0..3).map(|_| instances::plmap(&mut rng)).collect();
        let b: Vec<PLMap> = (0..3).map(|_| instances::plmap(&mut rng)).collect();
        let runs = |v: &[PLMap]| plmaps::sort_runs(&v.iter().map(|m| (m.clone(), 1)).collect::<Vec<_>>());
        let (ra, rb) = (runs(&a), runs(&b));
        let blk = Block::razak(1, 1);
        let mk = |xis: Vec<(PLMap, u64)>| DiagonalHom {
            dom: blk,
            cod: Block::razak(3, 1),
            xis,
            split_a: RepDescriptor::zero(blk),
            split_b: None,
        };
        let d = d_diag(&mk(ra.clone()), &mk(rb.clone())).unwrap();
        // sorted families: the i-th smallest values pair up at every t
        let mut best = 0.0f64;
        let fl = |v: &[PLMap]| -> Vec<Vec<(f64, f64)>> {
            v.iter().map(|m| m.bp().iter().map(|(x, y)| (crate::blocks::to_f64(x), crate::blocks::to_f64(y))).collect()).collect()
        };
        let ev = |bp: &[(f64, f64)], t: f64| {
            let w = bp.windows(2).find(|w| t <= w[1].0).unwrap();
            w[0].1 + (w[1].1 - w[0].1) * (t - w[0].0) / (w[1].0 - w[0].0)
        };
        let (fa, fb) = (fl(&a), fl(&b));
        for s in 0..=480 {
            let t = s as f64 / 480.0;
            let mut va: Vec<f64> = fa.iter().map(|m| ev(m, t)).collect();
            let mut vb: Vec<f64> = fb.iter().map(|m| ev(m, t)).collect();
            va.sort_by(f64::total_cmp);
            vb.sort_by(f64::total_cmp);
            for (x, y) in va.iter().zip(&vb) {
                best = best.max((x - y).abs());
            }
        }
        // the grid of 1/480 contains all breakpoints of maps on a 1/24 grid, but
        // crossings of the sorted envelopes may fall between grid points
        let exact = crate::blocks::to_f64(&d);
        assert!(best <= exact + 1e-12 && exact <= best + 2.0 / 480.0 * 24.0, "{best} vs {exact}");
    }
}

#[test]
fn reverse_k_examples() {
    let h = gen_embed(3, 1, 3, 0).unwrap();
    let r = reverse_k(&h);
    assert_eq!(reverse_k(&r), h);
    assert_eq!(k0(&r).value(), -k0(&h).value());
    assert_eq!(d_diag(&h, &r).unwrap(), qi(0));
    assert!(validate(&r).valid());
}

#[test]
fn pullback_examples() {
    let b = Block::razak(1, 1);
    let leb = TraceMeasure::lebesgue(b);
    assert_eq!(pullback_trace(&identity(b), &leb).unwrap(), leb);
    assert!(is_trace_preserving(&identity(b), &leb, &leb));
    // with n = 1 only the dips at 1/p reach below 1/p
    let h = razak_embed(1, 1, 3).unwrap();
    let s = pullback_trace(&h, &TraceMeasure::lebesgue(h.cod)).unwrap();
    assert!(s.is_faithful() && s.is_probability());
    assert!(measures::bottleneck(&s, &leb).unwrap() <= q(3, 3));
    for (n, k, p) in [(2, 1, 5), (1, 2, 4), (3, 1, 2)] {
        let h = razak_embed(n, k, p).unwrap();
        let s = pullback_trace(&h, &TraceMeasure::lebesgue(h.cod)).unwrap();
        assert!(s.is_faithful() && s.is_probability());
        assert!(measures::bottleneck(&s, &TraceMeasure::lebesgue(h.dom)).unwrap() <= q(3, p as i64));
    }
}

#[test]
fn transition_pulls_back_target() {
    let mut rng = instances::rng(29);
    for kind in [Kind::Razak, Kind::Gen] {
        let b = Block::new(kind, 2, 1).unwrap();
        for _ in 0..10 {
            let s = TraceMeasure::random_faithful(b, &mut rng, 4);
            let t = TraceMeasure::random_faithful(b, &mut rng, 4);
            let h = transition(&s, &t).unwrap();
            assert!(validate(&h).valid());
            assert!(is_trace_preserving(&h, &s, &t));
            assert_eq!(k0(&h), k0(&identity(b)));
        }
    }
}

#[test]
fn gen_bad_boundary_only() {
    let phi = gen_amplify(1, 1, 2, 2).unwrap();
    let psi = gen_amplify(1, 1, 2, 0).unwrap();
    let g = TestElement::tight(PlFn::linear(qi(1), qi(0)), Some(PlFn::linear(qi(-1), qi(0)))).unwrap();
    let g = [g];
    for t in uniform_mesh(8) {
        assert_eq!(fiber_udist_at(&phi, &psi, &g, &t).unwrap().value, qi(0));
    }
    assert_eq!(fiber_udist(&phi, &psi, &g, &SpecPoint::Inf1).unwrap().value, qi(2));
    assert_eq!(fiber_udist(&phi, &psi, &g, &SpecPoint::Inf2).unwrap().value, qi(2));
    assert_eq!(d_diag(&phi, &psi).unwrap(), qi(0));
}

#[test]
fn razak_inf_fiber_matches_zero_fiber() {
    let mut rng = instances::rng(31);
    for _ in 0..20 {
        let phi = instances::constructor(Kind::Razak, &mut rng);
        let psi = compose(
            &phi,
            &transition(&TraceMeasure::random_faithful(phi.cod, &mut rng, 3), &TraceMeasure::lebesgue(phi.cod)).unwrap(),
        )
        .unwrap();
        let g = [instances::test_element(Kind::Razak, &mut rng, &qi(1))];
        let inf = fiber_udist(&phi, &psi, &g, &SpecPoint::Inf).unwrap();
        let zero = fiber_udist_at(&phi, &psi, &g, &qi(0)).unwrap();
        assert_eq!(inf.value, zero.value);
    }
}

#[test]
fn single_element_udist_is_matching() {
    let h = razak_embed(2, 1, 2).unwrap();
    let id = identity(h.cod);
    let psi = compose(&h, &id).unwrap();
    let d = fiber_udist_at(&h, &psi, &[down()], &q(1, 3)).unwrap();
    assert!(d.exact);
    assert_eq!(d.value, qi(0));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn fiber_distance_bounded_by_lipschitz_times_d_diag(seed in any::<u64>(), gen in any::<bool>(), two in any::<bool>()) {
        let kind = if gen { Kind::Gen } else { Kind::Razak };
        let mut rng = instances::rng(seed);
        let phi = instances::constructor(kind, &mut rng);
        let t = transition(&TraceMeasure::random_faithful(phi.cod, &mut rng, 3), &TraceMeasure::lebesgue(phi.cod)).unwrap();
        let psi = compose(&phi, &t).unwrap();
        let lip = q(rng.gen_range(1..=3), 1);
        let count = if two { 2 } else { 1 };
        let g: Vec<TestElement> = (0..count).map(|_| instances::test_element(kind, &mut rng, &lip)).collect();
        let dd = d_diag(&phi, &psi).unwrap();
        let all = [phi.map_list(), psi.map_list()].concat();
        let mut ts = plmaps::merged_mesh(all.iter());
        ts.extend(uniform_mesh(16));
        for t in &ts {
            let d = fiber_udist_at(&phi, &psi, &g, t).unwrap();
            prop_assert!(d.value <= &lip * &dd, "at {}: {} > {} * {}", t, d.value, lip, dd);
        }
        if kind == Kind::Razak {
            let d = fiber_udist(&phi, &psi, &g, &SpecPoint::Inf).unwrap();
            prop_assert!(d.value <= &lip * &dd);
        }
    }

    #[test]
    fn composition_never_widens(seed in any::<u64>()) {
        let mut rng = instances::rng(seed);
        let (chain, comp) = instances::gen_composite(&mut rng);
        prop_assert!(diameter(&comp) <= diameter(&chain[0]));
    }
}
