//! The ten acceptance criteria, run one after another in a single test so
//! that each time limit is measured without other tests competing for the
//! CPU. Prints one PASS/FAIL line per criterion.

use std::time::{Duration, Instant};

use frablocks::amalgamation::{self, ClassTag, Span};
use frablocks::blocks::{fmt_q, q, qi, Block, Kind, SpecPoint, TestElement, K0, Q};
use frablocks::homs::{self, HomError};
use frablocks::limits;
use frablocks::measures::{self, PointMultiset, TraceMeasure};
use frablocks::oracle::{self, instances, suites, GridSpec};
use frablocks::plmaps::PlFn;
use rand::Rng;

struct Outcome {
    ok: bool,
    detail: String,
}

fn outcome(failures: &[String], detail: String) -> Outcome {
    match failures.first() {
        None => Outcome { ok: true, detail },
        Some(f) => Outcome { ok: false, detail: format!("{} failures, first: {f}", failures.len()) },
    }
}

const SEED: u64 = 20240917;

fn grid() -> impl Iterator<Item = (u64, u64, u64)> {
    (1..=4u64).flat_map(|n| (1..=3u64).flat_map(move |k| [3u64, 5].into_iter().map(move |p| (n, k, p))))
}

fn k_theory() -> Outcome {
    let mut fails = Vec::new();
    let mut checked = 0;
    let mut check = |label: String, h: Result<homs::DiagonalHom, HomError>, want: i64| match h {
        Ok(h) => {
            checked += 1;
            let rank = oracle::k0_rank(&h);
            if homs::k0(&h) != K0::Value(want) || rank != Ok(want) {
                fails.push(format!("{label}: k0 {:?}, rank {rank:?}, want {want}", homs::k0(&h)));
            }
        }
        Err(HomError::OutOfRange(_)) => {}
        Err(e) => fails.push(format!("{label}: {e}")),
    };
    for (n, k, p) in grid() {
        for j in 0..n {
            check(format!("gen_embed({n},{k},{p},{j})"), homs::gen_embed(n, k, p, j), 2 * j as i64 - (n as i64 - 1));
        }
        for j in 0..=p {
            check(format!("gen_amplify({n},{k},{p},{j})"), homs::gen_amplify(n, k, p, j), 2 * j as i64 - p as i64);
        }
        for j in -(p as i64)..=(p as i64) {
            check(format!("gen_rho({n},{k},{p},{j})"), homs::gen_rho(n, k, p, j), j);
        }
    }
    outcome(&fails, format!("{checked} constructor outputs"))
}

fn diameters() -> Outcome {
    let mut fails = Vec::new();
    let mut checked = 0;
    for (n, k, p) in grid() {
        let bound = q(1, p as i64);
        let mut hs = vec![(format!("razak_embed({n},{k},{p})"), homs::razak_embed(n, k, p).unwrap())];
        for j in 0..n {
            hs.push((format!("gen_embed({n},{k},{p},{j})"), homs::gen_embed(n, k, p, j).unwrap()));
        }
        for (label, h) in hs {
            checked += 1;
            let d = homs::diameter(&h);
            if d > bound {
                fails.push(format!("{label}: diameter {}", fmt_q(&d)));
            }
        }
    }
    outcome(&fails, format!("{checked} embeddings"))
}

fn transport() -> Outcome {
    let mut fails = Vec::new();
    let mut worst = Q::from_integer(0.into());
    let mut checked = 0;
    for p in 2..=20u64 {
        for n in 1..=3 {
            for k in 1..=3 {
                let h = homs::razak_embed(n, k, p).unwrap();
                let pulled = homs::pullback_trace(&h, &TraceMeasure::lebesgue(h.cod)).unwrap();
                let d = measures::bottleneck(&pulled, &TraceMeasure::lebesgue(h.dom)).unwrap();
                let ratio = &d * Q::from_integer(p.into());
                if ratio > worst {
                    worst = ratio;
                }
                checked += 1;
                if d > q(3, p as i64) {
                    fails.push(format!("A_{{{n},{k}}} p={p}: {}", fmt_q(&d)));
                }
            }
        }
    }
    outcome(&fails, format!("{checked} pullbacks, largest p*distance {}", fmt_q(&worst)))
}

fn suite(id: &str, trials: u64) -> Outcome {
    let r = suites::run(id, trials, SEED).expect("known suite");
    let fails: Vec<String> = r.violations.iter().map(|(t, d)| format!("trial {t}: {d}")).collect();
    let tight =
        r.tightest.as_ref().map(|(t, o, b)| format!(", tightest trial {t}: {} vs {}", fmt_q(o), fmt_q(b))).unwrap_or_default();
    let mut o = outcome(&fails, format!("{} checked, {} skipped{tight}", r.checked, r.skipped));
    if r.checked != trials {
        o.ok = false;
        o.detail = format!("only {} of {trials} trials met the hypotheses: {}", r.checked, o.detail);
    }
    o
}

fn tight_linear(kind: Kind) -> Vec<TestElement> {
    let g2 = (kind == Kind::Gen).then(|| PlFn::linear(qi(-1), qi(0)));
    vec![TestElement::tight(PlFn::linear(qi(1), qi(0)), g2).unwrap()]
}

fn nap_end_to_end() -> Outcome {
    let mut fails = Vec::new();
    let mut rng = instances::rng(SEED);
    let mut largest_p = 0;
    for (kind, count, eps) in [(Kind::Razak, 50, q(1, 10)), (Kind::Gen, 25, q(1, 8))] {
        let g = tight_linear(kind);
        for t in 0..count {
            let inst = instances::span(kind, &mut rng).unwrap();
            let span = Span { sigma: &inst.sigma, phi1: &inst.phi1, tau1: &inst.tau1, phi2: &inst.phi2, tau2: &inst.tau2 };
            let r = match kind {
                Kind::Razak => amalgamation::nap_razak(&span, &g, &eps),
                Kind::Gen => amalgamation::nap_gen(&span, &g, &eps, &ClassTag::K1),
            };
            let label = format!("{kind:?} instance {t}");
            let r = match r {
                Ok(r) => r,
                Err(e) => {
                    fails.push(format!("{label}: {e}"));
                    continue;
                }
            };
            let c = &r.certificate;
            largest_p = largest_p.max(c.p_used);
            if !c.passed || !c.trace_preserved {
                fails.push(format!("{label}: {}", amalgamation::summary_line(c)));
            }
            let lam = TraceMeasure::lebesgue(r.cod);
            if !homs::is_trace_preserving(&r.composite1, &inst.sigma, &lam)
                || !homs::is_trace_preserving(&r.composite2, &inst.sigma, &lam)
            {
                fails.push(format!("{label}: composites not trace preserving"));
            }
            if kind == Kind::Gen {
                let ks = (homs::k0(&r.composite1), homs::k0(&r.composite2));
                if ks != (K0::Value(1), K0::Value(1)) {
                    fails.push(format!("{label}: composite K0 {ks:?}"));
                }
            }
        }
    }
    outcome(&fails, format!("75 spans, largest multiplicity used {largest_p}"))
}

fn sequences() -> Outcome {
    let mut fails = Vec::new();
    let w = limits::w_sequence(4).unwrap();
    fails.extend(limits::validate_sequence(&w).into_iter().map(|p| format!("w: {p}")));
    let z = limits::z0_sequence(3).unwrap();
    fails.extend(limits::validate_sequence(&z).into_iter().map(|p| format!("z0: {p}")));
    for (i, s) in z.info.iter().enumerate() {
        if s.k0 != K0::Value(1) {
            fails.push(format!("z0 step {i}: K0 {:?}", s.k0));
        }
        match s.kind {
            limits::StepKind::GenEmbed { p, .. } if p % 2 == 1 => {}
            ref other => fails.push(format!("z0 step {i}: {}", other.label())),
        }
    }
    for (i, (h, s)) in z.steps.iter().zip(&z.info).enumerate() {
        if homs::k0(h) != s.k0 {
            fails.push(format!("z0 step {i}: recorded K0 differs from the map"));
        }
    }
    for s in [&w, &z] {
        for (i, h) in s.steps.iter().enumerate() {
            if homs::pullback_trace(h, &s.traces[i + 1]).ok().as_ref() != Some(&s.traces[i]) {
                fails.push(format!("{} step {i}: trace pullback differs", h.dom));
            }
        }
    }
    let u = limits::z0_uhf_sequence(&[2], 2).unwrap();
    fails.extend(limits::validate_sequence(&u).into_iter().map(|p| format!("z0uhf: {p}")));
    let k = limits::composite_k0(&u);
    if k != K0::Value(4) {
        fails.push(format!("z0uhf composite K0 {k:?}"));
    }
    outcome(
        &fails,
        format!("{} + {} + {} stages, uhf composite K0 {}", w.blocks.len(), z.blocks.len(), u.blocks.len(), k.value()),
    )
}

fn k_reversal() -> Outcome {
    let b = Block::gen(2, 1);
    let id = homs::identity(b);
    let rev = homs::reverse_k(&id);
    // g1 = t - 1 and g2 = 1 - t
    let g = vec![TestElement::tight(PlFn::linear(qi(-1), qi(0)), Some(PlFn::linear(qi(1), qi(0)))).unwrap()];
    let mut fails = Vec::new();
    for t in homs::uniform_mesh(64) {
        if t == qi(0) || t == qi(1) {
            continue;
        }
        let d = homs::fiber_udist(&id, &rev, &g, &SpecPoint::Interior(t.clone())).unwrap();
        if d.value != qi(0) || !d.exact {
            fails.push(format!("t={}: {}", fmt_q(&t), fmt_q(&d.value)));
        }
    }
    for p in [SpecPoint::Inf1, SpecPoint::Inf2] {
        let d = homs::fiber_udist(&id, &rev, &g, &p).unwrap();
        if d.value != qi(2) || !d.exact {
            fails.push(format!("{p:?}: {}", fmt_q(&d.value)));
        }
    }
    outcome(&fails, format!("63 interior points at 0, both points at infinity at 2, K0 {}", homs::k0(&rev).value()))
}

fn concordance() -> Outcome {
    let mut fails = Vec::new();
    let mut rng = instances::rng(SEED);
    for t in 0..100 {
        let b = Block::razak(rng.gen_range(1..=3), rng.gen_range(1..=2));
        let mu = TraceMeasure::random_faithful(b, &mut rng, 4);
        let nu = TraceMeasure::random_faithful(b, &mut rng, 4);
        let d = measures::bottleneck(&mu, &nu).unwrap();
        let (lo, hi) = oracle::bottleneck_brute(&mu, &nu, GridSpec { resolution: 120, seed: t });
        if d < lo || d > hi {
            fails.push(format!("bottleneck pair {t}: {} outside [{}, {}]", fmt_q(&d), fmt_q(&lo), fmt_q(&hi)));
        }
    }
    for t in 0..200 {
        let (_, h) = instances::gen_composite(&mut rng);
        let rank = oracle::k0_rank(&h);
        if rank.as_ref().ok() != Some(&homs::k0(&h).value()) {
            fails.push(format!("composite {t}: k0 {:?} rank {rank:?}", homs::k0(&h)));
        }
    }
    let g = tight_linear(Kind::Razak);
    for t in 0..500 {
        let len = rng.gen_range(1..=8);
        let mut pts = || PointMultiset::from_points((0..len).map(|_| q(rng.gen_range(0..=24), 24)).collect());
        let (f, h) = (pts(), pts());
        let exact = measures::match_distance(&f, &h).unwrap();
        let brute = oracle::matching_brute(&f, &h, &g).unwrap();
        if exact != brute {
            fails.push(format!("matching pair {t}: {} vs {}", fmt_q(&exact), fmt_q(&brute)));
        }
    }
    outcome(&fails, "100 bottleneck brackets, 200 K0 ranks, 500 matchings".into())
}

#[test]
fn acceptance() {
    type Criterion = (u32, &'static str, u64, fn() -> Outcome);
    let criteria: [Criterion; 10] = [
        (1, "K0 of the constructors", 10, k_theory),
        (2, "embedding diameters", 5, diameters),
        (3, "pulled-back Lebesgue within 3/p", 30, transport),
        (4, "rewriting suite, 500 trials", 60, || suite("rewriting2", 500)),
        (5, "counting suite, 500 trials", 60, || suite("littlecounting", 500)),
        (6, "fiber distance suite, 300 trials", 60, || suite("dist1", 300)),
        (7, "near amalgamation end to end", 300, nap_end_to_end),
        (8, "inductive sequences", 30, sequences),
        (9, "K-reversed identity", 1, k_reversal),
        (10, "oracle concordance", 120, concordance),
    ];
    let mut failed = Vec::new();
    for (id, name, limit, f) in criteria {
        let start = Instant::now();
        let o = f();
        let took = start.elapsed();
        let in_time = took < Duration::from_secs(limit);
        let ok = o.ok && in_time;
        println!(
            "{} criterion {id:>2} ({name}): {} [{:.2}s of {limit}s{}]",
            if ok { "PASS" } else { "FAIL" },
            o.detail,
            took.as_secs_f64(),
            if in_time { "" } else { ", over time" }
        );
        if !ok {
            failed.push(id);
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
