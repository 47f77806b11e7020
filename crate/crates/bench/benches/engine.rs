use adr_core::bounded::Bounds;
use adr_core::fixtures;
use adr_core::logic::{parse_formula, satisfies, Assignment};
use adr_core::reconfig::apply_anywhere;
use adr_core::wp::{check_validity_oracle, weakest_precondition};
use adr_core::{find_matches, isomorphic, TrackedSystem};
use criterion::{criterion_group, criterion_main, Criterion};
use std::collections::BTreeMap;
use std::hint::black_box;

/// A travel system grown by `n` rounds of bookFlight/browseFlights.
fn grown(n: usize) -> TrackedSystem {
    let style = fixtures::travel();
    let g = fixtures::example1().graph;
    let base = g.max_id() + 1;
    let mut sys = TrackedSystem::init(g, base).unwrap();
    for _ in 0..n {
        for name in ["bookFlight", "browseFlights"] {
            let p = style.production(name).unwrap();
            if let Some(m) = find_matches(&sys.graph, p).into_iter().next() {
                sys.record_production(&style, name, m.edge).unwrap();
            }
        }
    }
    sys
}

fn logic(c: &mut Criterion) {
    let style = fixtures::travel();
    let sys = grown(12);
    let phi = parse_formula("forall Fl(x,y). exists P(z,w). w = x", &style.types).unwrap();
    c.bench_function("satisfies/forall-exists", |b| {
        b.iter(|| satisfies(black_box(&sys.graph), &phi, &Assignment::new()).unwrap())
    });
}

fn productions(c: &mut Criterion) {
    let style = fixtures::travel();
    let sys = grown(4);
    c.bench_function("record_production/browseFlights", |b| {
        b.iter_batched(
            || sys.clone(),
            |mut s| {
                let p = style.production("browseFlights").unwrap();
                let m = find_matches(&s.graph, p).into_iter().next().unwrap();
                s.record_production(&style, "browseFlights", m.edge).unwrap()
            },
            criterion::BatchSize::SmallInput,
        )
    });
}

fn reconfiguration(c: &mut Criterion) {
    let style = fixtures::travel();
    let sc = fixtures::example13();
    let cf = style.rule("cf").unwrap();
    c.bench_function("reconfigure/cf", |b| {
        b.iter_batched(
            || sc.system.clone(),
            |mut s| apply_anywhere(&mut s, &style, cf).unwrap(),
            criterion::BatchSize::SmallInput,
        )
    });
    let a = grown(6).graph;
    let b2 = grown(6).graph;
    c.bench_function("isomorphic/grown6", |b| b.iter(|| isomorphic(black_box(&a), &b2, true)));
}

fn wp(c: &mut Criterion) {
    let ex = fixtures::example11();
    let p = ex.style.production("pay").unwrap();
    let none = BTreeMap::new();
    c.bench_function("wp/pay", |b| {
        b.iter(|| weakest_precondition(p, black_box(&ex.phi), &none, &ex.style.types).unwrap())
    });
    let w = weakest_precondition(p, &ex.phi, &none, &ex.style.types).unwrap();
    c.bench_function("oracle/pay/2-edges", |b| {
        b.iter(|| check_validity_oracle(p, &w, &ex.phi, &none, &ex.style.types, Bounds::edges(2)).unwrap())
    });
}

criterion_group!(benches, logic, productions, reconfiguration, wp);
criterion_main!(benches);
