//! Graph formulae over node (in)equalities with edge-type quantification, and
//! a naive model checker for them.
//!
//! ```text
//! φ ::= x = y | top | !φ | φ & φ | forall D(x1,..,xn). φ
//! ```
//!
//! `bot`, `|`, `->`, `!=`, `exists` and `no D` are derived forms; see
//! [`desugar`].

mod syntax;

pub use syntax::{parse_formula, ParseError};

use crate::graph::Graph;
use crate::ids::{EdgeId, NodeId};
use crate::typegraph::TypeGraph;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;
use thiserror::Error;

/// A node variable.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Var(Arc<str>);

impl Var {
    pub fn new(name: &str) -> Self {
        Var(Arc::from(name))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Debug for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl Serialize for Var {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.0)
    }
}

impl<'de> Deserialize<'de> for Var {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        String::deserialize(d).map(|s| Var::new(&s))
    }
}

impl From<&str> for Var {
    fn from(s: &str) -> Self {
        Var::new(s)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Formula {
    Eq(Var, Var),
    Top,
    Not(Box<Formula>),
    And(Box<Formula>, Box<Formula>),
    ForallEdge {
        ty: String,
        vars: Vec<Var>,
        body: Box<Formula>,
    },
}

impl Formula {
    pub fn eq(x: impl Into<Var>, y: impl Into<Var>) -> Self {
        Formula::Eq(x.into(), y.into())
    }

    pub fn neq(x: impl Into<Var>, y: impl Into<Var>) -> Self {
        Formula::eq(x, y).not()
    }

    pub fn bot() -> Self {
        Formula::Top.not()
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(self) -> Self {
        Formula::Not(Box::new(self))
    }

    pub fn and(self, other: Formula) -> Self {
        Formula::And(Box::new(self), Box::new(other))
    }

    pub fn or(self, other: Formula) -> Self {
        self.not().and(other.not()).not()
    }

    pub fn implies(self, other: Formula) -> Self {
        self.not().or(other)
    }

    pub fn forall(ty: &str, vars: &[&str], body: Formula) -> Self {
        Formula::ForallEdge {
            ty: ty.to_string(),
            vars: vars.iter().map(|v| Var::new(v)).collect(),
            body: Box::new(body),
        }
    }

    pub fn exists(ty: &str, vars: &[&str], body: Formula) -> Self {
        Formula::forall(ty, vars, body.not()).not()
    }

    /// `no D`, with canonical bound variables `_0.._{n-1}`.
    pub fn no_edges(ty: &str, arity: usize) -> Self {
        Formula::ForallEdge {
            ty: ty.to_string(),
            vars: canonical_vars(arity),
            body: Box::new(Formula::bot()),
        }
    }

    /// Right-nested conjunction; `Top` for an empty list.
    pub fn conjunction(parts: impl IntoIterator<Item = Formula>) -> Self {
        let mut parts: Vec<Formula> = parts.into_iter().collect();
        let Some(mut acc) = parts.pop() else {
            return Formula::Top;
        };
        while let Some(p) = parts.pop() {
            acc = p.and(acc);
        }
        acc
    }

    pub fn free_vars(&self) -> BTreeSet<Var> {
        let mut out = BTreeSet::new();
        self.collect_free(&mut Vec::new(), &mut out);
        out
    }

    fn collect_free(&self, bound: &mut Vec<Var>, out: &mut BTreeSet<Var>) {
        match self {
            Formula::Eq(x, y) => {
                for v in [x, y] {
                    if !bound.contains(v) {
                        out.insert(v.clone());
                    }
                }
            }
            Formula::Top => {}
            Formula::Not(f) => f.collect_free(bound, out),
            Formula::And(a, b) => {
                a.collect_free(bound, out);
                b.collect_free(bound, out);
            }
            Formula::ForallEdge { vars, body, .. } => {
                let depth = bound.len();
                bound.extend(vars.iter().cloned());
                body.collect_free(bound, out);
                bound.truncate(depth);
            }
        }
    }

    /// Every variable name occurring in the formula, bound or free.
    pub fn all_vars(&self) -> BTreeSet<Var> {
        let mut out = BTreeSet::new();
        self.visit(&mut |f| match f {
            Formula::Eq(x, y) => {
                out.insert(x.clone());
                out.insert(y.clone());
            }
            Formula::ForallEdge { vars, .. } => out.extend(vars.iter().cloned()),
            _ => {}
        });
        out
    }

    /// Edge types quantified anywhere in the formula.
    pub fn edge_types(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.visit(&mut |f| {
            if let Formula::ForallEdge { ty, .. } = f {
                out.insert(ty.clone());
            }
        });
        out
    }

    pub fn quantifier_depth(&self) -> usize {
        match self {
            Formula::Eq(..) | Formula::Top => 0,
            Formula::Not(f) => f.quantifier_depth(),
            Formula::And(a, b) => a.quantifier_depth().max(b.quantifier_depth()),
            Formula::ForallEdge { body, .. } => 1 + body.quantifier_depth(),
        }
    }

    fn visit(&self, f: &mut impl FnMut(&Formula)) {
        f(self);
        match self {
            Formula::Not(g) => g.visit(f),
            Formula::And(a, b) => {
                a.visit(f);
                b.visit(f);
            }
            Formula::ForallEdge { body, .. } => body.visit(f),
            Formula::Eq(..) | Formula::Top => {}
        }
    }

    /// Checks quantifier arities against `tg` and that bound variable lists
    /// are pairwise distinct.
    pub fn check(&self, tg: &TypeGraph) -> Result<(), LogicError> {
        let mut result = Ok(());
        self.visit(&mut |f| {
            if result.is_err() {
                return;
            }
            if let Formula::ForallEdge { ty, vars, .. } = f {
                match tg.arity(ty) {
                    None => result = Err(LogicError::UnknownEdgeType(ty.clone())),
                    Some(n) if n != vars.len() => {
                        result = Err(LogicError::Arity {
                            ty: ty.clone(),
                            expected: n,
                            found: vars.len(),
                        })
                    }
                    Some(_) => {
                        let distinct: BTreeSet<_> = vars.iter().collect();
                        if distinct.len() != vars.len() {
                            result = Err(LogicError::RepeatedBinder(ty.clone()));
                        }
                    }
                }
            }
        });
        result
    }
}

pub(crate) fn canonical_vars(n: usize) -> Vec<Var> {
    (0..n).map(|i| Var::new(&format!("_{i}"))).collect()
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&syntax::print(self))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LogicError {
    #[error("variable `{0}` is free but unassigned")]
    Unbound(Var),
    #[error("variable `{var}` is assigned to {node}, which is not a node of the graph")]
    NotANode { var: Var, node: NodeId },
    #[error("unknown derived form `{0}`")]
    UnknownForm(String),
    #[error("derived form `{form}` expects {expected}")]
    BadArguments { form: String, expected: &'static str },
    #[error("edge type `{0}` is not declared")]
    UnknownEdgeType(String),
    #[error("`{ty}` has arity {expected} but {found} variables are bound")]
    Arity { ty: String, expected: usize, found: usize },
    #[error("bound variables of `{0}` are not pairwise distinct")]
    RepeatedBinder(String),
}

/// Arguments of a derived form.
#[derive(Clone, Debug)]
pub enum FormArg {
    Formula(Formula),
    Var(Var),
    EdgeType(String),
    Vars(Vec<Var>),
}

/// Expands a derived connective into core syntax.
///
/// | name      | arguments                          |
/// |-----------|------------------------------------|
/// | `Bot`     | –                                  |
/// | `Or`      | φ, ψ                               |
/// | `Implies` | φ, ψ                               |
/// | `Exists`  | edge type, bound vars, body        |
/// | `NoD`     | edge type (arity from `tg`)        |
/// | `EqChain` | two or more vars                   |
pub fn desugar(name: &str, args: &[FormArg], tg: &TypeGraph) -> Result<Formula, LogicError> {
    let bad = |expected| LogicError::BadArguments {
        form: name.to_string(),
        expected,
    };
    match name {
        "Bot" => match args {
            [] => Ok(Formula::bot()),
            _ => Err(bad("no arguments")),
        },
        "Or" | "Implies" => match args {
            [FormArg::Formula(a), FormArg::Formula(b)] => Ok(if name == "Or" {
                a.clone().or(b.clone())
            } else {
                a.clone().implies(b.clone())
            }),
            _ => Err(bad("two formulas")),
        },
        "Exists" => match args {
            [FormArg::EdgeType(ty), FormArg::Vars(vars), FormArg::Formula(body)] => Ok(Formula::ForallEdge {
                ty: ty.clone(),
                vars: vars.clone(),
                body: Box::new(body.clone().not()),
            }
            .not()),
            _ => Err(bad("an edge type, bound variables and a body")),
        },
        "NoD" => match args {
            [FormArg::EdgeType(ty)] => {
                let n = tg.arity(ty).ok_or_else(|| LogicError::UnknownEdgeType(ty.clone()))?;
                Ok(Formula::no_edges(ty, n))
            }
            _ => Err(bad("an edge type")),
        },
        "EqChain" => {
            let vars: Option<Vec<&Var>> = args
                .iter()
                .map(|a| match a {
                    FormArg::Var(v) => Some(v),
                    _ => None,
                })
                .collect();
            match vars {
                Some(vs) if vs.len() >= 2 => Ok(Formula::conjunction(
                    vs.windows(2).map(|w| Formula::Eq(w[0].clone(), w[1].clone())),
                )),
                _ => Err(bad("at least two variables")),
            }
        }
        other => Err(LogicError::UnknownForm(other.to_string())),
    }
}

/// A finite partial valuation of variables into nodes.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Assignment(BTreeMap<Var, NodeId>);

impl Assignment {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, var: impl Into<Var>, node: NodeId) -> Self {
        self.0.insert(var.into(), node);
        self
    }

    pub fn set(&mut self, var: Var, node: NodeId) {
        self.0.insert(var, node);
    }

    pub fn get(&self, var: &Var) -> Option<NodeId> {
        self.0.get(var).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Var, &NodeId)> {
        self.0.iter()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn extend(&mut self, other: &Assignment) {
        for (k, v) in &other.0 {
            self.0.insert(k.clone(), *v);
        }
    }
}

impl FromIterator<(Var, NodeId)> for Assignment {
    fn from_iter<T: IntoIterator<Item = (Var, NodeId)>>(iter: T) -> Self {
        Assignment(iter.into_iter().collect())
    }
}

/// `G ⊨_h φ`. Unassigned free variables are an error, not `false`.
pub fn satisfies(g: &Graph, phi: &Formula, h: &Assignment) -> Result<bool, LogicError> {
    for v in phi.free_vars() {
        match h.get(&v) {
            None => return Err(LogicError::Unbound(v)),
            Some(n) if !g.has_node(n) => return Err(LogicError::NotANode { var: v, node: n }),
            Some(_) => {}
        }
    }
    let mut env: Vec<(Var, NodeId)> = h.iter().map(|(k, v)| (k.clone(), *v)).collect();
    Ok(eval(g, phi, &mut env))
}

fn lookup(env: &[(Var, NodeId)], v: &Var) -> NodeId {
    env.iter()
        .rev()
        .find(|(k, _)| k == v)
        .map(|(_, n)| *n)
        .expect("free variables are checked before evaluation")
}

fn eval(g: &Graph, phi: &Formula, env: &mut Vec<(Var, NodeId)>) -> bool {
    match phi {
        Formula::Top => true,
        Formula::Eq(x, y) => lookup(env, x) == lookup(env, y),
        Formula::Not(f) => !eval(g, f, env),
        Formula::And(a, b) => eval(g, a, env) && eval(g, b, env),
        Formula::ForallEdge { ty, vars, body } => {
            let depth = env.len();
            for (_, e) in g.edges_of_type(ty) {
                if e.tentacles.len() != vars.len() {
                    continue;
                }
                env.extend(vars.iter().cloned().zip(e.tentacles.iter().copied()));
                let ok = eval(g, body, env);
                env.truncate(depth);
                if !ok {
                    return false;
                }
            }
            true
        }
    }
}

/// For a formula that fails, the edges instantiating its outermost
/// universal quantifier(s) at which the body fails. Empty when the formula
/// holds or fails without a universally quantified witness.
pub fn violation_witnesses(g: &Graph, phi: &Formula, h: &Assignment) -> Result<Vec<EdgeId>, LogicError> {
    Ok(failing_instances(g, phi, h)?.into_iter().map(|(e, _)| e).collect())
}

/// Like [`violation_witnesses`], paired with the assignment (extending `h`
/// by the quantifier's variables) under which the body fails.
pub fn failing_instances(g: &Graph, phi: &Formula, h: &Assignment) -> Result<Vec<(EdgeId, Assignment)>, LogicError> {
    if satisfies(g, phi, h)? {
        return Ok(Vec::new());
    }
    let mut env: Vec<(Var, NodeId)> = h.iter().map(|(k, v)| (k.clone(), *v)).collect();
    let mut out = Vec::new();
    witnesses(g, phi, &mut env, &mut out);
    Ok(out)
}

fn witnesses(g: &Graph, phi: &Formula, env: &mut Vec<(Var, NodeId)>, out: &mut Vec<(EdgeId, Assignment)>) {
    match phi {
        Formula::And(a, b) => {
            if !eval(g, a, env) {
                witnesses(g, a, env, out);
            }
            if !eval(g, b, env) {
                witnesses(g, b, env, out);
            }
        }
        Formula::ForallEdge { ty, vars, body } => {
            let depth = env.len();
            for (id, e) in g.edges_of_type(ty) {
                if e.tentacles.len() != vars.len() {
                    continue;
                }
                env.extend(vars.iter().cloned().zip(e.tentacles.iter().copied()));
                if !eval(g, body, env) {
                    let h: Assignment = env.iter().cloned().collect();
                    out.push((id, h));
                }
                env.truncate(depth);
            }
        }
        _ => {}
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    fn tg() -> TypeGraph {
        fixtures::example6().types
    }

    #[test]
    fn free_vars_of_basic_forms() {
        assert!(Formula::Top.free_vars().is_empty());
        let fv = Formula::eq("x", "y").free_vars();
        assert_eq!(fv, [Var::new("x"), Var::new("y")].into_iter().collect());
        assert!(fixtures::example6().phi_ex.free_vars().is_empty());
    }

    #[test]
    fn binding_is_scoped_to_the_body() {
        let f = Formula::forall("D", &["x", "y"], Formula::eq("x", "z")).and(Formula::eq("x", "x"));
        let fv: Vec<_> = f.free_vars().into_iter().collect();
        assert_eq!(fv, vec![Var::new("x"), Var::new("z")]);
    }

    #[test]
    fn desugars_derived_forms() {
        let tg = tg();
        let no = desugar("NoD", &[FormArg::EdgeType("Dp".into())], &tg).unwrap();
        assert_eq!(
            no,
            Formula::ForallEdge {
                ty: "Dp".into(),
                vars: vec![Var::new("_0")],
                body: Box::new(Formula::bot())
            }
        );
        let body = Formula::eq("x", "z");
        let ex = desugar(
            "Exists",
            &[
                FormArg::EdgeType("Dp".into()),
                FormArg::Vars(vec![Var::new("z")]),
                FormArg::Formula(body.clone()),
            ],
            &tg,
        )
        .unwrap();
        assert_eq!(ex, Formula::forall("Dp", &["z"], body.not()).not());
        let chain = desugar(
            "EqChain",
            &[
                FormArg::Var("x1".into()),
                FormArg::Var("x2".into()),
                FormArg::Var("x3".into()),
            ],
            &tg,
        )
        .unwrap();
        assert_eq!(chain, Formula::eq("x1", "x2").and(Formula::eq("x2", "x3")));
        assert_eq!(desugar("Bot", &[], &tg).unwrap(), Formula::Top.not());
        assert!(matches!(desugar("Xor", &[], &tg), Err(LogicError::UnknownForm(_))));
        assert!(matches!(
            desugar("EqChain", &[FormArg::Var("x".into())], &tg),
            Err(LogicError::BadArguments { .. })
        ));
    }

    #[test]
    fn example6_satisfaction() {
        let fx = fixtures::example6();
        let h = Assignment::new();
        assert_eq!(satisfies(&fx.valid, &fx.phi_ex, &h), Ok(true));
        assert_eq!(satisfies(&fx.invalid, &fx.phi_ex, &h), Ok(false));
        let w = violation_witnesses(&fx.invalid, &fx.phi_ex, &h).unwrap();
        assert_eq!(w, vec![fx.invalid.edge_named("d2").unwrap()]);
    }

    #[test]
    fn top_holds_everywhere() {
        let fx = fixtures::example6();
        assert_eq!(satisfies(&Graph::new(), &Formula::Top, &Assignment::new()), Ok(true));
        assert_eq!(satisfies(&fx.invalid, &Formula::Top, &Assignment::new()), Ok(true));
    }

    #[test]
    fn unbound_variable_is_an_error() {
        let fx = fixtures::example6();
        let r = satisfies(&fx.valid, &Formula::eq("x", "y"), &Assignment::new());
        assert!(matches!(r, Err(LogicError::Unbound(_))));
    }

    #[test]
    fn vacuous_quantification() {
        let fx = fixtures::example6();
        let f = Formula::forall("Dp", &["z"], Formula::bot());
        assert_eq!(satisfies(&fx.valid, &f, &Assignment::new()), Ok(false));
        let mut g = fx.valid.clone();
        g.remove_edge(g.edge_named("d'").unwrap());
        assert_eq!(satisfies(&g, &f, &Assignment::new()), Ok(true));
    }

    #[test]
    fn check_rejects_bad_binders() {
        let tg = tg();
        assert!(Formula::forall("D", &["x", "x"], Formula::Top).check(&tg).is_err());
        assert!(Formula::forall("D", &["x"], Formula::Top).check(&tg).is_err());
        assert!(Formula::forall("Q", &["x"], Formula::Top).check(&tg).is_err());
        assert!(fixtures::example6().phi_ex.check(&tg).is_ok());
    }
}
