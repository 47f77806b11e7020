//! Weakest preconditions of productions, and a bounded oracle that checks
//! them against actual applications.
//!
//! `wp(p, φ)` is a formula over the graph with the rewritten edge removed.
//! Its free variables are those of `φ` plus one variable per tentacle of
//! the left-hand edge (see [`Wp::lhs_vars`]), to be bound to the match.

use crate::bounded::{for_each_assignment, for_each_graph, Bounds};
use crate::graph::Graph;
use crate::ids::{IdGen, NodeId};
use crate::logic::{satisfies, Assignment, Formula, LogicError, Var};
use crate::production::{apply_production, find_matches, Match, Production};
use crate::typegraph::TypeGraph;
use std::collections::{BTreeMap, BTreeSet};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum WpError {
    #[error(transparent)]
    Logic(#[from] LogicError),
    #[error("postcondition assignment maps `{var}` to {node}, which is not a right-hand node of `{production}`")]
    NotARhsNode { var: Var, node: NodeId, production: String },
}

/// A weakest precondition with its provenance.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Wp {
    pub formula: Formula,
    /// `lhs_vars[k]` stands for the node on the k-th tentacle of the
    /// rewritten edge.
    pub lhs_vars: Vec<Var>,
    pub notes: Vec<String>,
}

impl Wp {
    /// Binds the left-hand variables to the nodes of a match.
    pub fn assignment(&self, p: &Production, m: &Match) -> Assignment {
        let (_, le) = p.lhs_edge();
        self.lhs_vars
            .iter()
            .zip(&le.tentacles)
            .map(|(v, l)| (v.clone(), m.nodes[l]))
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
enum NodeTerm {
    Var(Var),
    Fresh(NodeId),
}

struct Ctx<'a> {
    p: &'a Production,
    /// term for each right-hand node
    rhs_terms: BTreeMap<NodeId, NodeTerm>,
    lhs_vars: Vec<Var>,
    notes: Vec<String>,
}

/// `wp(p, φ)`, with `post_h` mapping free variables of `φ` to right-hand
/// nodes. Free variables outside `post_h` denote nodes already present.
pub fn weakest_precondition(
    p: &Production,
    phi: &Formula,
    post_h: &BTreeMap<Var, NodeId>,
    tg: &TypeGraph,
) -> Result<Wp, WpError> {
    phi.check(tg)?;
    let used: BTreeSet<Var> = phi.all_vars().into_iter().chain(post_h.keys().cloned()).collect();
    let arity = p.lhs_edge().1.tentacles.len();
    let lhs_vars = (0..)
        .map(|n: usize| {
            let prefix = if n == 0 { "l".to_string() } else { format!("l{n}") };
            (0..arity)
                .map(|k| Var::new(&format!("{prefix}_{k}")))
                .collect::<Vec<_>>()
        })
        .find(|vs| vs.iter().all(|v| !used.contains(v)))
        .unwrap();

    let (_, le) = p.lhs_edge();
    let mut rhs_terms = BTreeMap::new();
    for (k, l) in le.tentacles.iter().enumerate() {
        rhs_terms.insert(p.interface[l], NodeTerm::Var(lhs_vars[k].clone()));
    }
    for n in p.rhs.node_ids() {
        rhs_terms.entry(n).or_insert(NodeTerm::Fresh(n));
    }
    let mut env: BTreeMap<Var, NodeTerm> = BTreeMap::new();
    for (v, r) in post_h {
        let t = rhs_terms.get(r).cloned().ok_or_else(|| WpError::NotARhsNode {
            var: v.clone(),
            node: *r,
            production: p.name.clone(),
        })?;
        env.insert(v.clone(), t);
    }
    let mut cx = Ctx {
        p,
        rhs_terms,
        lhs_vars: lhs_vars.clone(),
        notes: Vec::new(),
    };
    let raw = translate(&mut cx, phi, &env, true);
    Ok(Wp {
        formula: simplify(raw),
        lhs_vars,
        notes: cx.notes,
    })
}

fn term_of(env: &BTreeMap<Var, NodeTerm>, v: &Var) -> NodeTerm {
    env.get(v).cloned().unwrap_or_else(|| NodeTerm::Var(v.clone()))
}

fn translate(cx: &mut Ctx, phi: &Formula, env: &BTreeMap<Var, NodeTerm>, positive: bool) -> Formula {
    match phi {
        Formula::Top => Formula::Top,
        Formula::Eq(x, y) => match (term_of(env, x), term_of(env, y)) {
            (NodeTerm::Var(a), NodeTerm::Var(b)) if a == b => Formula::Top,
            (NodeTerm::Var(a), NodeTerm::Var(b)) => Formula::Eq(a, b),
            (NodeTerm::Fresh(a), NodeTerm::Fresh(b)) if a == b => Formula::Top,
            _ => Formula::bot(),
        },
        Formula::Not(f) => translate(cx, f, env, !positive).not(),
        Formula::And(a, b) => {
            let a = translate(cx, a, env, positive);
            a.and(translate(cx, b, env, positive))
        }
        Formula::ForallEdge { ty, vars, body } => {
            // instances among edges that survive the rewriting
            let mut inner = env.clone();
            for v in vars {
                inner.remove(v);
            }
            let kept = translate(cx, body, &inner, positive);
            let kept = if !positive && ty == cx.p.lhs_type() {
                cx.notes.push(format!(
                    "forall {ty}: consumed edge excluded from a negative quantifier"
                ));
                let same = Formula::conjunction(
                    vars.iter()
                        .zip(&cx.lhs_vars)
                        .map(|(v, l)| Formula::Eq(v.clone(), l.clone())),
                );
                same.or(kept)
            } else {
                kept
            };
            let mut parts = vec![Formula::ForallEdge {
                ty: ty.clone(),
                vars: vars.clone(),
                body: Box::new(kept),
            }];
            // instances among created edges
            let created: Vec<Vec<NodeTerm>> =
                cx.p.rhs_order
                    .iter()
                    .map(|e| cx.p.rhs.edge(*e).unwrap())
                    .filter(|e| &e.ty == ty && e.tentacles.len() == vars.len())
                    .map(|e| e.tentacles.iter().map(|n| cx.rhs_terms[n].clone()).collect())
                    .collect();
            for terms in created {
                let mut inst = env.clone();
                for (v, t) in vars.iter().zip(terms) {
                    inst.insert(v.clone(), t);
                }
                cx.notes.push(format!("forall {ty}: instance for a created {ty} edge"));
                parts.push(translate(cx, body, &inst, positive));
            }
            Formula::conjunction(parts)
        }
    }
}

/// Constant folding; leaves the shape otherwise alone.
pub fn simplify(phi: Formula) -> Formula {
    let bot = Formula::bot();
    match phi {
        Formula::Not(f) => match simplify(*f) {
            Formula::Not(g) => *g,
            g => g.not(),
        },
        Formula::And(a, b) => {
            let (a, b) = (simplify(*a), simplify(*b));
            if a == bot || b == bot {
                bot
            } else if a == Formula::Top {
                b
            } else if b == Formula::Top {
                a
            } else {
                a.and(b)
            }
        }
        Formula::ForallEdge { ty, vars, body } => match simplify(*body) {
            Formula::Top => Formula::Top,
            body => Formula::ForallEdge {
                ty,
                vars,
                body: Box::new(body),
            },
        },
        f => f,
    }
}

/// Outcome of [`check_validity_oracle`].
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct OracleReport {
    pub graphs: usize,
    pub applications: usize,
    /// cases where the precondition held but the postcondition failed
    pub counterexamples: Vec<OracleCase>,
    /// cases where the postcondition held although the precondition did
    /// not (evaluated on the residual graph)
    pub weakness_gaps: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OracleCase {
    pub graph: Graph,
    pub assignment: Assignment,
    /// true when the precondition was evaluated with the rewritten edge
    /// still present
    pub whole_graph: bool,
}

/// Checks `{ψ} p {φ}` on every graph up to `bounds`, every match and every
/// assignment of the free variables of `φ` not covered by `post_h`. The
/// precondition is evaluated both on the residual graph and on the whole
/// graph.
pub fn check_validity_oracle(
    p: &Production,
    pre: &Wp,
    post: &Formula,
    post_h: &BTreeMap<Var, NodeId>,
    tg: &TypeGraph,
    bounds: Bounds,
) -> Result<OracleReport, LogicError> {
    let mut types: BTreeSet<String> = post.edge_types();
    types.extend(pre.formula.edge_types());
    types.insert(p.lhs_type().to_string());
    let types: Vec<String> = types.into_iter().collect();
    let free: Vec<Var> = post
        .free_vars()
        .into_iter()
        .chain(pre.formula.free_vars())
        .filter(|v| !post_h.contains_key(v) && !pre.lhs_vars.contains(v))
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let filler = tg.node_types().first().cloned().unwrap_or_default();
    let mut report = OracleReport::default();
    let mut err = None;
    for_each_graph(tg, &types, bounds, |g| {
        report.graphs += 1;
        for m in find_matches(g, p) {
            let ok = for_each_assignment(g, &free, &filler, |g, h| {
                report.applications += 1;
                match oracle_case(p, pre, post, post_h, g, &m, h, &mut report) {
                    Ok(()) => true,
                    Err(e) => {
                        err = Some(e);
                        false
                    }
                }
            });
            if !ok {
                return false;
            }
        }
        true
    });
    match err {
        Some(e) => Err(e),
        None => Ok(report),
    }
}

#[allow(clippy::too_many_arguments)]
fn oracle_case(
    p: &Production,
    pre: &Wp,
    post: &Formula,
    post_h: &BTreeMap<Var, NodeId>,
    g: &Graph,
    m: &Match,
    h: &Assignment,
    report: &mut OracleReport,
) -> Result<(), LogicError> {
    let mut ids = IdGen::starting_at(g.max_id() + 1);
    let app = apply_production(g, p, m, &mut ids).expect("match was found on this graph");
    let mut pre_h = h.clone();
    pre_h.extend(&pre.assignment(p, m));
    let mut post_asg = h.clone();
    for (v, r) in post_h {
        post_asg.set(v.clone(), app.copy.node(*r).unwrap());
    }
    let after = satisfies(&app.graph, post, &post_asg)?;
    let residual = g.without_edges(&[m.edge]);
    let on_residual = satisfies(&residual, &pre.formula, &pre_h)?;
    let on_whole = satisfies(g, &pre.formula, &pre_h)?;
    for (holds, whole_graph) in [(on_residual, false), (on_whole, true)] {
        if holds && !after {
            report.counterexamples.push(OracleCase {
                graph: g.clone(),
                assignment: pre_h.clone(),
                whole_graph,
            });
        }
    }
    if after && !on_residual {
        report.weakness_gaps += 1;
    }
    Ok(())
}
