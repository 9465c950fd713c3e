//! Python module `frablocks_py`. Homomorphisms and measures cross the
//! boundary as JSON strings in the same shape the command line uses, and
//! rationals as "num/den" strings.

use frablocks::blocks::{fmt_q, Block};
use frablocks::cli::codec::{self, At, Cursor, DecodeError};
use frablocks::homs::{self, DiagonalHom};
use frablocks::measures::{self, TraceMeasure};
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use serde_json::{json, Value};

fn parse(text: &str) -> Result<Value, String> {
    serde_json::from_str(text).map_err(|e| format!("line {} column {}: {e}", e.line(), e.column()))
}

fn decode<T>(text: &str, f: impl FnOnce(&Cursor) -> Result<T, DecodeError>) -> Result<T, String> {
    let v = parse(text)?;
    f(&Cursor::root(At { v: &v, source: "<python>" })).map_err(|e| e.to_string())
}

fn hom_of(text: &str) -> Result<DiagonalHom, String> {
    decode(text, codec::decode_hom)
}

/// `lebesgue` or measure JSON, defaulting to `block`.
fn measure_of(text: &str, block: Block) -> Result<TraceMeasure, String> {
    if text == "lebesgue" {
        return Ok(TraceMeasure::lebesgue(block));
    }
    decode(text, |c| codec::decode_measure(c, Some(block)))
}

fn construct(kind: &str, n: u64, k: u64, p: u64, j: i64) -> Result<String, String> {
    let uj = || u64::try_from(j).map_err(|_| format!("j must be nonnegative for {kind}"));
    let h = match kind {
        "razak_embed" => homs::razak_embed(n, k, p),
        "razak_amplify" => homs::razak_amplify(n, k, p),
        "gen_embed" => homs::gen_embed(n, k, p, uj()?),
        "gen_amplify" => homs::gen_amplify(n, k, p, uj()?),
        "gen_rho" => homs::gen_rho(n, k, p, j),
        other => return Err(format!("unknown constructor '{other}'")),
    }
    .map_err(|e| e.to_string())?;
    Ok(codec::hom(&h).to_string())
}

fn info(hom: &str) -> Result<String, String> {
    let h = hom_of(hom)?;
    Ok(json!({
        "dom": codec::block(&h.dom),
        "cod": codec::block(&h.cod),
        "diameter": codec::q(&homs::diameter(&h)),
        "k0": codec::k0(homs::k0(&h)),
        "validation": codec::validation(&homs::validate(&h)),
    })
    .to_string())
}

fn composite(first: &str, second: &str) -> Result<String, String> {
    let h = homs::compose(&hom_of(first)?, &hom_of(second)?).map_err(|e| e.to_string())?;
    Ok(codec::hom(&h).to_string())
}

fn sorted_distance(phi: &str, psi: &str) -> Result<String, String> {
    let d = homs::d_diag(&hom_of(phi)?, &hom_of(psi)?).map_err(|e| e.to_string())?;
    Ok(fmt_q(&d))
}

fn pullback_of(hom: &str, tau: &str) -> Result<String, String> {
    let h = hom_of(hom)?;
    let t = measure_of(tau, h.cod)?;
    let s = homs::pullback_trace(&h, &t).map_err(|e| e.to_string())?;
    Ok(codec::measure(&s).to_string())
}

/// The side given as JSON names the block for a `lebesgue` side.
fn matching_distance(mu: &str, nu: &str) -> Result<String, String> {
    let block_of = |t: &str| -> Result<Option<Block>, String> {
        if t == "lebesgue" {
            return Ok(None);
        }
        decode(t, |c| c.opt("block").map(|b| codec::decode_block(&b)).transpose())
    };
    let b = block_of(mu)?.or(block_of(nu)?).unwrap_or(Block::razak(1, 1));
    let d = measures::bottleneck(&measure_of(mu, b)?, &measure_of(nu, b)?).map_err(|e| e.to_string())?;
    Ok(fmt_q(&d))
}

fn py_err(e: String) -> PyErr {
    PyValueError::new_err(e)
}

/// Run the command-line front end; returns the exit code and the report.
#[pyfunction]
fn run(args: Vec<String>) -> (i32, String) {
    let mut argv = vec!["frablocks".to_string()];
    argv.extend(args);
    frablocks::cli::run(&argv)
}

/// Hom JSON for one of razak_embed, razak_amplify, gen_embed, gen_amplify,
/// gen_rho. `p` is the multiplicity or amplification factor.
#[pyfunction]
#[pyo3(signature = (kind, n, k, p, j = 0))]
fn hom_construct(kind: &str, n: u64, k: u64, p: u64, j: i64) -> PyResult<String> {
    construct(kind, n, k, p, j).map_err(py_err)
}

/// Blocks, diameter, K0 and validation of a hom, as JSON.
#[pyfunction]
fn hom_info(hom: &str) -> PyResult<String> {
    info(hom).map_err(py_err)
}

/// Composite hom, `first` acting first.
#[pyfunction]
fn compose(first: &str, second: &str) -> PyResult<String> {
    composite(first, second).map_err(py_err)
}

#[pyfunction]
fn d_diag(phi: &str, psi: &str) -> PyResult<String> {
    sorted_distance(phi, psi).map_err(py_err)
}

/// Pull a trace on the codomain back to the domain.
#[pyfunction]
#[pyo3(signature = (hom, tau = "lebesgue"))]
fn pullback(hom: &str, tau: &str) -> PyResult<String> {
    pullback_of(hom, tau).map_err(py_err)
}

#[pyfunction]
fn bottleneck(mu: &str, nu: &str) -> PyResult<String> {
    matching_distance(mu, nu).map_err(py_err)
}

#[pymodule]
fn frablocks_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(run, m)?)?;
    m.add_function(wrap_pyfunction!(hom_construct, m)?)?;
    m.add_function(wrap_pyfunction!(hom_info, m)?)?;
    m.add_function(wrap_pyfunction!(compose, m)?)?;
    m.add_function(wrap_pyfunction!(d_diag, m)?)?;
    m.add_function(wrap_pyfunction!(pullback, m)?)?;
    m.add_function(wrap_pyfunction!(bottleneck, m)?)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn construct_and_inspect() {
        let h = construct("razak_embed", 2, 1, 3, 0).unwrap();
        let v: Value = serde_json::from_str(&info(&h).unwrap()).unwrap();
        assert_eq!(v["diameter"], "1/3");
        assert_eq!(v["validation"]["valid"], true);
        let g = construct("gen_embed", 2, 1, 3, 1).unwrap();
        let v: Value = serde_json::from_str(&info(&g).unwrap()).unwrap();
        assert_eq!(v["k0"], 1);
        assert!(construct("gen_embed", 2, 1, 3, -1).is_err());
        assert!(construct("nosuch", 1, 1, 2, 0).is_err());
    }

    #[test]
    fn distances() {
        let h = construct("razak_embed", 1, 1, 2, 0).unwrap();
        assert_eq!(sorted_distance(&h, &h).unwrap(), "0");
        let s = pullback_of(&h, "lebesgue").unwrap();
        assert_eq!(matching_distance("lebesgue", &s).unwrap(), "0");
        let twice = composite(&h, &construct("razak_embed", 2, 1, 2, 0).unwrap()).unwrap();
        assert!(hom_of(&twice).is_ok());
    }

    #[test]
    fn malformed_input_is_located() {
        let e = hom_of("{\"dom\":\n}").unwrap_err();
        assert!(e.contains("line 2"), "{e}");
        let e = info(r#"{"dom":{"kind":"razak","n":1,"k":1}}"#).unwrap_err();
        assert!(e.contains("$"), "{e}");
    }
}
