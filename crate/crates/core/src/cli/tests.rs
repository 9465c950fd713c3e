use super::*;

fn run_args(args: &[&str]) -> (i32, Value) {
    let mut argv = vec!["frablocks".to_string()];
    argv.extend(args.iter().map(|s| s.to_string()));
    let (code, out) = run(&argv);
    (code, serde_json::from_str(&out).unwrap_or_else(|e| panic!("{e}: {out}")))
}

#[test]
fn razak_embed_diameter() {
    let (code, v) = run_args(&["hom", "construct", "--kind", "razak-embed", "--n", "2", "--k", "1", "--p", "3"]);
    assert_eq!(code, 0, "{v}");
    assert_eq!(v["results"]["diameter"], "1/3");
    assert_eq!(v["results"]["validation"]["valid"], true);
}

#[test]
fn block_shorthand_forms() {
    assert_eq!(block_shorthand("gen:2:1").unwrap().unwrap(), Block::gen(2, 1));
    assert!(block_shorthand("razak:0:1").unwrap().is_err());
    assert!(block_shorthand("razak:2").unwrap().is_err());
    assert!(block_shorthand("file.json").is_none());
}

#[test]
fn default_element_vanishes_at_one() {
    let g = default_test_element(Kind::Gen);
    let (a, b) = g.at(&Q::from_integer(1.into()));
    assert!(a == Q::from_integer(0.into()) && b == Q::from_integer(0.into()));
    assert_eq!(g.lipschitz, Q::from_integer(1.into()));
    assert!(default_test_element(Kind::Razak).g2.is_none());
}

#[test]
fn digest_covers_argv_and_inputs() {
    let a = Inputs::new(&["hom", "info"]).digest();
    let b = Inputs::new(&["hom", "infox"]).digest();
    assert_ne!(a, b);
    let mut c = Inputs::new(&["hom", "info"]);
    c.load("{}").unwrap();
    assert_ne!(a, c.digest());
}

#[test]
fn syntax_errors_are_located() {
    let (code, v) = run_args(&["hom", "info", "--hom", "{\"dom\":\n  [1,"]);
    assert_eq!(code, 2);
    assert_eq!(v["error"]["kind"], "input");
    assert!(v["error"]["location"].as_str().unwrap().contains("line 2"), "{v}");
}

#[test]
fn unknown_suite_is_a_usage_error() {
    let (code, v) = run_args(&["verify", "nosuch", "--trials", "1"]);
    assert_eq!(code, 2);
    assert_eq!(v["error"]["kind"], "usage");
}
