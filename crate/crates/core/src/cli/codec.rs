//! JSON forms of the core types. Rationals travel as "num/den" strings;
//! decoding errors carry a JSON path.

use serde_json::{json, Map, Value};

use crate::amalgamation::NapCertificate;
use crate::blocks::{fmt_q, parse_q, Block, Kind, RepDescriptor, TestElement, K0, Q};
use crate::homs::{Certificate, DiagonalHom};
use crate::measures::{PointMultiset, TraceMeasure};
use crate::plmaps::{PLMap, PlFn};

/// Decoding failure at `path` inside `source`.
#[derive(Debug, Clone, PartialEq)]
pub struct DecodeError {
    pub source: String,
    pub path: String,
    pub message: String,
}

impl std::fmt::Display for DecodeError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}: {}", self.source, self.path, self.message)
    }
}

/// A JSON value together with where it came from, for error locations.
#[derive(Clone, Copy)]
pub struct At<'a> {
    pub v: &'a Value,
    pub source: &'a str,
}

/// Path segments are built lazily: only errors pay for formatting.
pub struct Cursor<'a> {
    at: At<'a>,
    path: String,
}

impl<'a> Cursor<'a> {
    pub fn root(at: At<'a>) -> Self {
        Cursor { at, path: "$".into() }
    }

    pub fn value(&self) -> &'a Value {
        self.at.v
    }

    pub fn err<T>(&self, msg: impl Into<String>) -> Result<T, DecodeError> {
        Err(DecodeError { source: self.at.source.to_string(), path: self.path.clone(), message: msg.into() })
    }

    pub fn field(&self, key: &str) -> Result<Cursor<'a>, DecodeError> {
        match self.at.v.get(key) {
            Some(v) if !v.is_null() => Ok(self.child(v, format!("{}.{key}", self.path))),
            _ => self.err(format!("missing field '{key}'")),
        }
    }

    pub fn opt(&self, key: &str) -> Option<Cursor<'a>> {
        match self.at.v.get(key) {
            Some(v) if !v.is_null() => Some(self.child(v, format!("{}.{key}", self.path))),
            _ => None,
        }
    }

    pub fn items(&self) -> Result<Vec<Cursor<'a>>, DecodeError> {
        match self.at.v.as_array() {
            Some(a) => Ok(a.iter().enumerate().map(|(i, v)| self.child(v, format!("{}[{i}]", self.path))).collect()),
            None => self.err("expected an array"),
        }
    }

    fn child(&self, v: &'a Value, path: String) -> Cursor<'a> {
        Cursor { at: At { v, source: self.at.source }, path }
    }

    pub fn q(&self) -> Result<Q, DecodeError> {
        match self.at.v {
            Value::String(s) => parse_q(s).or_else(|e| self.err(e)),
            Value::Number(n) if n.is_i64() => Ok(Q::from_integer(n.as_i64().unwrap().into())),
            _ => self.err("expected a rational as a \"num/den\" string"),
        }
    }

    pub fn u64(&self) -> Result<u64, DecodeError> {
        self.at.v.as_u64().map_or_else(|| self.err("expected a nonnegative integer"), Ok)
    }

    pub fn str(&self) -> Result<&'a str, DecodeError> {
        self.at.v.as_str().map_or_else(|| self.err("expected a string"), Ok)
    }

    pub fn pair(&self) -> Result<(Q, Q), DecodeError> {
        let it = self.items()?;
        if it.len() != 2 {
            return self.err("expected a pair");
        }
        Ok((it[0].q()?, it[1].q()?))
    }
}

pub fn q(x: &Q) -> Value {
    Value::String(fmt_q(x))
}

pub fn qs(xs: &[Q]) -> Value {
    Value::Array(xs.iter().map(q).collect())
}

pub fn k0(k: K0) -> Value {
    match k {
        K0::Trivial => Value::String("trivial".into()),
        K0::Value(v) => json!(v),
    }
}

pub fn block(b: &Block) -> Value {
    let kind = match b.kind {
        Kind::Razak => "razak",
        Kind::Gen => "gen",
    };
    json!({"kind": kind, "n": b.n, "k": b.k})
}

pub fn decode_block(c: &Cursor) -> Result<Block, DecodeError> {
    let kind = match c.field("kind")?.str()? {
        "razak" => Kind::Razak,
        "gen" => Kind::Gen,
        other => return c.field("kind")?.err(format!("unknown kind '{other}' (razak, gen)")),
    };
    let (n, k) = (c.field("n")?.u64()?, c.field("k")?.u64()?);
    Block::new(kind, n, k).or_else(|e| c.err(e.to_string()))
}

/// Points repeated by multiplicity.
pub fn rep(r: &RepDescriptor) -> Value {
    json!({
        "block": block(&r.block),
        "points": qs(&r.point_list()),
        "r1": r.r1,
        "r2": r.r2,
        "r0": r.r0,
    })
}

pub fn decode_rep(c: &Cursor, default_block: Option<Block>) -> Result<RepDescriptor, DecodeError> {
    let b = match (c.opt("block"), default_block) {
        (Some(bc), _) => decode_block(&bc)?,
        (None, Some(b)) => b,
        (None, None) => return c.err("missing field 'block'"),
    };
    let points = c.field("points")?.items()?.iter().map(|p| p.q()).collect::<Result<Vec<_>, _>>()?;
    let get = |k: &str| c.opt(k).map(|x| x.u64()).unwrap_or(Ok(0));
    RepDescriptor::new(b, points, get("r1")?, get("r2")?, get("r0")?).or_else(|e| c.err(e.to_string()))
}

fn bp(points: &[(Q, Q)]) -> Value {
    Value::Array(points.iter().map(|(x, y)| json!([q(x), q(y)])).collect())
}

pub fn plmap(m: &PLMap) -> Value {
    json!({"bp": bp(m.bp())})
}

fn decode_bp(c: &Cursor) -> Result<Vec<(Q, Q)>, DecodeError> {
    c.field("bp")?.items()?.iter().map(|p| p.pair()).collect()
}

pub fn decode_plmap(c: &Cursor) -> Result<PLMap, DecodeError> {
    PLMap::new(decode_bp(c)?).or_else(|e| c.err(e.to_string()))
}

pub fn plfn(f: &PlFn) -> Value {
    json!({"bp": bp(f.bp())})
}

pub fn decode_plfn(c: &Cursor) -> Result<PlFn, DecodeError> {
    PlFn::new(decode_bp(c)?).or_else(|e| c.err(e.to_string()))
}

pub fn measure(m: &TraceMeasure) -> Value {
    json!({
        "block": block(&m.block),
        "atom1": q(&m.atom1),
        "atom2": q(&m.atom2),
        "pieces": m.pieces.iter().map(|(a, b, w)| json!([q(a), q(b), q(w)])).collect::<Vec<_>>(),
    })
}

pub fn decode_measure(c: &Cursor, default_block: Option<Block>) -> Result<TraceMeasure, DecodeError> {
    let b = match (c.opt("block"), default_block) {
        (Some(bc), _) => decode_block(&bc)?,
        (None, Some(b)) => b,
        (None, None) => return c.err("missing field 'block' and no block implied by the other inputs"),
    };
    let atom = |k: &str| c.opt(k).map(|x| x.q()).unwrap_or(Ok(Q::from_integer(0.into())));
    let mut pieces = Vec::new();
    for p in c.field("pieces")?.items()? {
        let it = p.items()?;
        if it.len() != 3 {
            return p.err("expected [start, end, mass]");
        }
        pieces.push((it[0].q()?, it[1].q()?, it[2].q()?));
    }
    TraceMeasure::new(b, atom("atom1")?, atom("atom2")?, pieces).or_else(|e| c.err(e.to_string()))
}

pub fn hom(h: &DiagonalHom) -> Value {
    let xis: Vec<Value> = h
        .xis
        .iter()
        .map(|(m, c)| {
            let mut o = Map::new();
            o.insert("bp".into(), bp(m.bp()));
            if *c != 1 {
                o.insert("mult".into(), json!(c));
            }
            Value::Object(o)
        })
        .collect();
    json!({
        "dom": block(&h.dom),
        "cod": block(&h.cod),
        "xis": xis,
        "splitA": rep(&h.split_a),
        "splitB": h.split_b.as_ref().map(rep),
    })
}

/// Validates on the way in.
pub fn decode_hom(c: &Cursor) -> Result<DiagonalHom, DecodeError> {
    let dom = decode_block(&c.field("dom")?)?;
    let cod = decode_block(&c.field("cod")?)?;
    let mut xis = Vec::new();
    for x in c.field("xis")?.items()? {
        let mult = x.opt("mult").map(|m| m.u64()).unwrap_or(Ok(1))?;
        xis.push((decode_plmap(&x)?, mult));
    }
    let split_a = decode_rep(&c.field("splitA")?, Some(dom))?;
    let split_b = c.opt("splitB").map(|b| decode_rep(&b, Some(dom))).transpose()?;
    DiagonalHom::new(dom, cod, xis, split_a, split_b).or_else(|e| c.err(e.to_string()))
}

pub fn test_element(t: &TestElement) -> Value {
    json!({"g1": plfn(&t.g1), "g2": t.g2.as_ref().map(plfn), "lipschitz": q(&t.lipschitz)})
}

/// A single element or an array of them; a missing Lipschitz constant means
/// the tight one.
pub fn decode_test_elements(c: &Cursor) -> Result<Vec<TestElement>, DecodeError> {
    let one = |c: &Cursor| -> Result<TestElement, DecodeError> {
        let g1 = decode_plfn(&c.field("g1")?)?;
        let g2 = c.opt("g2").map(|g| decode_plfn(&g)).transpose()?;
        let r = match c.opt("lipschitz") {
            Some(l) => TestElement::new(g1, g2, l.q()?),
            None => TestElement::tight(g1, g2),
        };
        r.or_else(|e| c.err(e.to_string()))
    };
    match c.value() {
        Value::Array(_) => c.items()?.iter().map(one).collect(),
        _ => Ok(vec![one(c)?]),
    }
}

pub fn points(c: &Cursor) -> Result<PointMultiset, DecodeError> {
    Ok(PointMultiset::from_points(c.items()?.iter().map(|p| p.q()).collect::<Result<_, _>>()?))
}

pub fn readings(r: &[(String, Q)]) -> Value {
    Value::Object(r.iter().map(|(l, v)| (l.clone(), q(v))).collect())
}

pub fn validation(c: &Certificate) -> Value {
    json!({
        "valid": c.valid(),
        "checks": c.checks.iter().map(|k| json!({"name": k.name, "ok": k.ok, "fatal": k.fatal, "witness": k.witness})).collect::<Vec<_>>(),
    })
}

pub fn nap_certificate(c: &NapCertificate) -> Value {
    json!({
        "passed": c.passed,
        "epsilon": q(&c.epsilon),
        "checks": {
            "trace_preserved": c.trace_preserved,
            "interior_bound_below_epsilon": c.interior_bound < c.epsilon,
            "sup_below_epsilon": c.sup_fiber_dist < c.epsilon,
        },
        "sup_fiber_dist": q(&c.sup_fiber_dist),
        "sup_exact": c.sup_exact,
        "readings_at_infinity": readings(&c.readings_at_infinity),
        "mesh_points": c.mesh_points,
        "mesh_resolution": q(&c.mesh_resolution),
        "interior_bound": q(&c.interior_bound),
        "d_diag": q(&c.d_diag),
        "lipschitz": q(&c.lipschitz),
        "k0_record": c.k0_record,
        "p_used": c.p_used,
        "p_theory": c.p_theory,
        "shrink_used": c.shrink_used,
        "shrink_theory": c.shrink_theory,
        "padding_j": c.padding_j,
        "test_elements": c.g.iter().map(test_element).collect::<Vec<_>>(),
        "note": c.note,
    })
}
