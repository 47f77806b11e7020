use adr_core::bounded::{bounded_equivalent, Bounds};
use adr_core::fixtures;
use adr_core::logic::{parse_formula, Formula, Var};
use adr_core::wp::{check_validity_oracle, weakest_precondition, Wp};
use std::collections::BTreeMap;

fn top_pre(arity: usize) -> Wp {
    Wp {
        formula: Formula::Top,
        lhs_vars: (0..arity).map(|k| Var::new(&format!("l{k}"))).collect(),
        notes: vec![],
    }
}

#[test]
fn browsing_always_leaves_a_flight() {
    let style = fixtures::travel();
    let p = style.production("browseFlights").unwrap();
    let post = parse_formula("no Fl", &style.types).unwrap();
    let w = weakest_precondition(p, &post, &BTreeMap::new(), &style.types).unwrap();
    let d = bounded_equivalent(&w.formula, &Formula::bot(), &style.types, Bounds::edges(3)).unwrap();
    assert!(d.is_none(), "{} is satisfiable: {d:?}", w.formula);
}

#[test]
fn oracle_refutes_false_postcondition() {
    let ex = fixtures::example11();
    let p = ex.style.production("pay").unwrap();
    let pre = top_pre(p.lhs_edge().1.tentacles.len());
    let none = BTreeMap::new();
    let bad = check_validity_oracle(p, &pre, &Formula::bot(), &none, &ex.style.types, Bounds::edges(1)).unwrap();
    assert!(bad.applications > 0);
    assert!(!bad.counterexamples.is_empty());
    let good = check_validity_oracle(p, &pre, &Formula::Top, &none, &ex.style.types, Bounds::edges(1)).unwrap();
    assert!(good.counterexamples.is_empty());
    assert_eq!(good.applications, bad.applications);
}

#[test]
fn computed_preconditions_survive_the_oracle() {
    let ex = fixtures::example11();
    let p = ex.style.production("pay").unwrap();
    let none = BTreeMap::new();
    let w = weakest_precondition(p, &ex.phi, &none, &ex.style.types).unwrap();
    let r = check_validity_oracle(p, &w, &ex.phi, &none, &ex.style.types, Bounds::edges(3)).unwrap();
    assert!(r.counterexamples.is_empty(), "{:?}", r.counterexamples.first());
    // weakening the precondition to true must be caught
    let r = check_validity_oracle(
        p,
        &top_pre(w.lhs_vars.len()),
        &ex.phi,
        &none,
        &ex.style.types,
        Bounds::edges(3),
    )
    .unwrap();
    assert!(!r.counterexamples.is_empty());
}
