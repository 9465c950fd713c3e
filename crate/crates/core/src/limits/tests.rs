use super::*;
use crate::blocks::{q, qi};
use crate::oracle;
use crate::plmaps::PlFn;
use proptest::prelude::*;

#[test]
fn w_stages() {
    let s = w_sequence(4).unwrap();
    let got: Vec<(u64, u64)> = s.blocks.iter().map(|b| (b.n, b.k)).collect();
    assert_eq!(got, vec![(1, 1), (2, 1), (6, 5), (24, 115)]);
    assert_eq!(s.materialised(), 4);
    assert!(validate_sequence(&s).is_empty());
    for (i, h) in s.steps.iter().enumerate() {
        assert!(homs::diameter(h) <= q(1, i as i64 + 2), "step {i}");
    }
    assert!(s.traces.last().unwrap() == &TraceMeasure::lebesgue(Block::razak(24, 115)));
}

#[test]
fn desk_cap_keeps_parameters() {
    let s = w_sequence(7).unwrap();
    assert_eq!(s.blocks.len(), 7);
    assert!(s.materialised() < 7);
    assert!(s.blocks[s.materialised() - 1].fiber_dim() <= DESK_CAP);
    assert!(s.blocks[s.materialised()].fiber_dim() > DESK_CAP);
    assert_eq!(s.info.len(), 6);
    assert!(validate_sequence(&s).is_empty());
}

#[test]
fn z0_steps_have_unit_k_theory_and_odd_multiplicity() {
    let s = z0_sequence(3).unwrap();
    assert_eq!(s.blocks[0], Block::gen(2, 1));
    for st in &s.info {
        assert_eq!(st.k0, K0::Value(1));
        match st.kind {
            StepKind::GenEmbed { p, j } => {
                assert!(p % 2 == 1 && p >= 3);
                assert_eq!(j, st.from.n / 2);
                let (need, _) = st.padding.unwrap();
                assert!((p - 1) / 2 >= need);
            }
            _ => panic!("unexpected step"),
        }
        assert_eq!(st.to.n % 2, 0);
    }
    assert!(validate_sequence(&s).is_empty());
    assert_eq!(composite_k0(&s), K0::Value(1));
}

#[test]
fn z0_uhf_composite_k_theory() {
    let s = z0_uhf_sequence(&[2], 2).unwrap();
    assert_eq!(s.info.len(), 4);
    assert_eq!(composite_k0(&s), K0::Value(4));
    assert!(validate_sequence(&s).is_empty());
    let built = s.materialised();
    let c = s.composite(0, built - 1).unwrap();
    let expect: i64 = s.info[..built - 1].iter().map(|st| st.k0.value()).product();
    assert_eq!(homs::k0(&c), K0::Value(expect));
    assert_eq!(oracle::k0_rank(&c).unwrap(), expect);
    let s = z0_uhf_sequence(&[2, 3], 2).unwrap();
    assert_eq!(composite_k0(&s), K0::Value(6));
    assert!(z0_uhf_sequence(&[], 2).is_err());
    assert!(z0_uhf_sequence(&[4], 1).is_err());
}

#[test]
fn composite_checks_bounds() {
    let s = w_sequence(3).unwrap();
    assert_eq!(s.composite(1, 1).unwrap(), homs::identity(s.blocks[1]));
    assert!(s.composite(2, 1).is_err());
    assert!(s.composite(0, 5).is_err());
}

fn tight(f: PlFn) -> TestElement {
    TestElement::tight(f, None).unwrap()
}

#[test]
fn certify_w_example() {
    let s = w_sequence(4).unwrap();
    let c = Block::razak(2, 1);
    let psi = homs::razak_embed(1, 1, 2).unwrap();
    let tau = s.traces[1].clone();
    assert!(homs::is_trace_preserving(&psi, &s.traces[0], &tau));
    let f = vec![tight(PlFn::linear(qi(1), qi(0)))];
    let cert = genericity_certify(&s, 0, &tau, &psi, &f, &q(1, 4)).unwrap();
    assert!(cert.passed);
    assert!(cert.trace_preserved);
    assert!(cert.interior_bound < q(1, 4));
    assert!(cert.sup_fiber_dist <= cert.interior_bound.max(cert.sup_fiber_dist.clone()));
    assert_eq!(psi.cod, c);
}

#[test]
fn certify_with_foreign_trace() {
    let s = w_sequence(4).unwrap();
    let psi0 = homs::razak_embed(1, 1, 2).unwrap();
    let tau = TraceMeasure::lebesgue(psi0.cod);
    let sigma = homs::pullback_trace(&psi0, &tau).unwrap();
    // psi0 does not carry the stage trace to Lebesgue unless we twist it.
    let psi = homs::compose(&homs::transition(&s.traces[0], &sigma).unwrap(), &psi0).unwrap();
    let f = vec![tight(PlFn::new(vec![(qi(0), qi(0)), (q(1, 2), q(1, 2)), (qi(1), qi(0))]).unwrap())];
    let cert = genericity_certify(&s, 0, &tau, &psi, &f, &q(1, 2)).unwrap();
    assert!(cert.passed && cert.trace_preserved);
    assert_eq!(cert.route_stage, 1);
}

#[test]
fn certify_gen_with_foreign_trace() {
    let s = z0_sequence(3).unwrap();
    let psi0 = homs::gen_embed(2, 1, 3, 1).unwrap();
    let tau = TraceMeasure::lebesgue(psi0.cod);
    let sigma = homs::pullback_trace(&psi0, &tau).unwrap();
    let psi = homs::compose(&homs::transition(&s.traces[0], &sigma).unwrap(), &psi0).unwrap();
    let f = vec![TestElement::tight(PlFn::linear(qi(1), qi(0)), Some(PlFn::linear(qi(-1), qi(0)))).unwrap()];
    let cert = genericity_certify(&s, 0, &tau, &psi, &f, &q(1, 2)).unwrap();
    assert!(cert.passed && cert.trace_preserved);
    assert_eq!(cert.readings_at_infinity.len(), 2);
}

#[test]
fn certify_rejects_bad_input() {
    let s = w_sequence(3).unwrap();
    let psi = homs::razak_embed(2, 1, 2).unwrap();
    let f = vec![tight(PlFn::linear(qi(1), qi(0)))];
    let tau = TraceMeasure::lebesgue(psi.cod);
    assert!(matches!(genericity_certify(&s, 0, &tau, &psi, &f, &q(1, 4)), Err(LimitError::Invalid(_))));
    let wrong = TraceMeasure::uniform_on(psi.cod, qi(0), q(1, 2)).unwrap();
    assert!(matches!(genericity_certify(&s, 1, &wrong, &psi, &f, &q(1, 4)), Err(LimitError::Invalid(_))));
}

#[test]
fn route_into_lands_on_stage() {
    let s = w_sequence(4).unwrap();
    for c in [Block::razak(1, 1), Block::razak(2, 1), Block::razak(3, 1), Block::razak(6, 5)] {
        let (st, h) = route_into(&s, c).unwrap();
        assert_eq!(h.cod, s.blocks[st]);
        assert!(homs::validate(&h).valid());
    }
    assert!(route_into(&s, Block::razak(5, 4)).is_err());
    // divisibility of n alone is not enough
    assert!(route_into(&s, Block::razak(3, 2)).is_err());
    let z = z0_sequence(3).unwrap();
    let (st, h) = route_into(&z, Block::gen(2, 1)).unwrap();
    assert_eq!(h.cod, z.blocks[st]);
    assert_eq!(homs::k0(&h), K0::Value(1));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    /// Every built composite pulls the top Lebesgue trace back to the stage
    /// trace, and its diameter is bounded by the first step's.
    #[test]
    fn composites_preserve_traces(i in 0usize..4, len in 0usize..4) {
        let s = w_sequence(4).unwrap();
        let j = (i + len).min(3);
        let c = s.composite(i, j).unwrap();
        prop_assert!(homs::is_trace_preserving(&c, &s.traces[i], &s.traces[j]));
        if i < j {
            prop_assert!(homs::diameter(&c) <= homs::diameter(&s.steps[i]));
        }
    }
}
