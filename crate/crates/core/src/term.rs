//! The term algebra induced by a production set, and linear reconfiguration
//! rules over it.
//!
//! Rule text: `rule cf : brF(x, bookF(y,z)) -> brF(bookF(x,z), y) with x:Fl, y:Fl, z:Client`.
//! The leading `rule` keyword and the `with` annotations are optional; sorts
//! of variables below an operation are inferred from its signature.

use indexmap::IndexMap;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use thiserror::Error;

/// Operation typing `E_1 x .. x E_n -> L`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OpSig {
    pub args: Vec<String>,
    pub result: String,
}

/// Sorts are edge types; operations are productions.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Signature {
    pub sorts: BTreeSet<String>,
    pub ops: IndexMap<String, OpSig>,
    pub aliases: BTreeMap<String, String>,
}

impl Signature {
    pub fn op(&self, name: &str) -> Option<(&str, &OpSig)> {
        let canonical = self.aliases.get(name).map(String::as_str).unwrap_or(name);
        self.ops.get_key_value(canonical).map(|(k, v)| (k.as_str(), v))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Term {
    Var { name: String, sort: String },
    App { op: String, args: Vec<Term> },
}

impl Term {
    pub fn var(name: &str, sort: &str) -> Self {
        Term::Var {
            name: name.to_string(),
            sort: sort.to_string(),
        }
    }

    pub fn app(op: &str, args: Vec<Term>) -> Self {
        Term::App {
            op: op.to_string(),
            args,
        }
    }

    pub fn is_var(&self) -> bool {
        matches!(self, Term::Var { .. })
    }

    /// Variables in left-to-right order, with repetitions.
    pub fn var_occurrences(&self) -> Vec<(&str, &str)> {
        let mut out = Vec::new();
        self.walk(&mut |t| {
            if let Term::Var { name, sort } = t {
                out.push((name.as_str(), sort.as_str()));
            }
        });
        out
    }

    pub fn vars(&self) -> BTreeSet<String> {
        self.var_occurrences().into_iter().map(|(n, _)| n.to_string()).collect()
    }

    pub fn is_linear(&self) -> bool {
        let occ = self.var_occurrences();
        let distinct: BTreeSet<_> = occ.iter().map(|(n, _)| *n).collect();
        distinct.len() == occ.len()
    }

    fn walk<'a>(&'a self, f: &mut impl FnMut(&'a Term)) {
        f(self);
        if let Term::App { args, .. } = self {
            for a in args {
                a.walk(f);
            }
        }
    }

    /// The subterm at `path` (child indices from the root).
    pub fn at(&self, path: &[usize]) -> Option<&Term> {
        match path.split_first() {
            None => Some(self),
            Some((i, rest)) => match self {
                Term::App { args, .. } => args.get(*i)?.at(rest),
                Term::Var { .. } => None,
            },
        }
    }

    /// Path to the (first) occurrence of variable `x`.
    pub fn path_of(&self, x: &str) -> Option<Vec<usize>> {
        match self {
            Term::Var { name, .. } => (name == x).then(Vec::new),
            Term::App { args, .. } => args.iter().enumerate().find_map(|(i, a)| {
                a.path_of(x).map(|mut p| {
                    p.insert(0, i);
                    p
                })
            }),
        }
    }

    /// The sort of the term; `None` if an operation is unknown.
    pub fn sort(&self, sig: &Signature) -> Option<String> {
        match self {
            Term::Var { sort, .. } => Some(sort.clone()),
            Term::App { op, .. } => sig.op(op).map(|(_, s)| s.result.clone()),
        }
    }

    /// Checks operation arities and argument sorts.
    pub fn check(&self, sig: &Signature) -> Vec<RuleIssue> {
        let mut out = Vec::new();
        self.check_into(sig, &mut out);
        out
    }

    fn check_into(&self, sig: &Signature, out: &mut Vec<RuleIssue>) {
        match self {
            Term::Var { name, sort } => {
                if !sig.sorts.contains(sort) {
                    out.push(RuleIssue::UnknownSort {
                        var: name.clone(),
                        sort: sort.clone(),
                    });
                }
            }
            Term::App { op, args } => {
                let Some((_, os)) = sig.op(op) else {
                    out.push(RuleIssue::UnknownOp(op.clone()));
                    return;
                };
                if os.args.len() != args.len() {
                    out.push(RuleIssue::Arity {
                        op: op.clone(),
                        expected: os.args.len(),
                        found: args.len(),
                    });
                    return;
                }
                for (j, (a, want)) in args.iter().zip(&os.args).enumerate() {
                    if let Some(found) = a.sort(sig) {
                        if &found != want {
                            out.push(RuleIssue::ArgSort {
                                op: op.clone(),
                                position: j,
                                expected: want.clone(),
                                found,
                            });
                        }
                    }
                    a.check_into(sig, out);
                }
            }
        }
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Var { name, .. } => f.write_str(name),
            Term::App { op, args } => {
                write!(f, "{op}(")?;
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{a}")?;
                }
                f.write_str(")")
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum RuleIssue {
    NonLinear {
        side: &'static str,
        var: String,
    },
    Unbound(String),
    UnknownOp(String),
    UnknownSort {
        var: String,
        sort: String,
    },
    Arity {
        op: String,
        expected: usize,
        found: usize,
    },
    ArgSort {
        op: String,
        position: usize,
        expected: String,
        found: String,
    },
    VarSorts {
        var: String,
        lhs: String,
        rhs: String,
    },
}

impl fmt::Display for RuleIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RuleIssue::NonLinear { side, var } => write!(f, "variable `{var}` occurs more than once in the {side}"),
            RuleIssue::Unbound(v) => write!(f, "variable `{v}` occurs on the right but not on the left"),
            RuleIssue::UnknownOp(op) => write!(f, "unknown operation `{op}`"),
            RuleIssue::UnknownSort { var, sort } => write!(f, "variable `{var}` has unknown sort `{sort}`"),
            RuleIssue::Arity { op, expected, found } => {
                write!(f, "`{op}` takes {expected} arguments, {found} given")
            }
            RuleIssue::ArgSort {
                op,
                position,
                expected,
                found,
            } => write!(
                f,
                "argument {} of `{op}` has sort `{found}`, expected `{expected}`",
                position + 1
            ),
            RuleIssue::VarSorts { var, lhs, rhs } => {
                write!(
                    f,
                    "variable `{var}` has sort `{lhs}` on the left but `{rhs}` on the right"
                )
            }
        }
    }
}

/// Outcome of [`validate_rule`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RuleReport {
    pub issues: Vec<RuleIssue>,
    pub same_sort: bool,
}

impl RuleReport {
    pub fn is_ok(&self) -> bool {
        self.issues.is_empty()
    }
}

/// Linearity of both sides, `vars(rhs) ⊆ vars(lhs)`, sorting, and whether
/// both sides have the same sort.
pub fn validate_rule(lhs: &Term, rhs: &Term, sig: &Signature) -> RuleReport {
    let mut issues = Vec::new();
    for (side, t) in [("left-hand side", lhs), ("right-hand side", rhs)] {
        let mut seen = BTreeSet::new();
        for (v, _) in t.var_occurrences() {
            if !seen.insert(v) {
                issues.push(RuleIssue::NonLinear {
                    side,
                    var: v.to_string(),
                });
            }
        }
        issues.extend(t.check(sig));
    }
    let lsorts: BTreeMap<_, _> = lhs.var_occurrences().into_iter().collect();
    for (v, s) in rhs.var_occurrences() {
        match lsorts.get(v) {
            None => issues.push(RuleIssue::Unbound(v.to_string())),
            Some(l) if *l != s => issues.push(RuleIssue::VarSorts {
                var: v.to_string(),
                lhs: l.to_string(),
                rhs: s.to_string(),
            }),
            Some(_) => {}
        }
    }
    let same_sort = matches!((lhs.sort(sig), rhs.sort(sig)), (Some(a), Some(b)) if a == b);
    RuleReport { issues, same_sort }
}

/// A linear rewrite rule `lhs -> rhs` over the induced signature.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ReconfigRule {
    pub name: String,
    pub lhs: Term,
    pub rhs: Term,
    /// Rules that change the sort are accepted but do not preserve the style.
    pub same_sort: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TermError {
    #[error("term syntax error at offset {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("rule `{name}` is invalid: {}", .issues.iter().map(|i| i.to_string()).collect::<Vec<_>>().join("; "))]
    Invalid { name: String, issues: Vec<RuleIssue> },
}

impl ReconfigRule {
    /// Validates and builds a rule; operation aliases are resolved.
    pub fn new(name: &str, lhs: Term, rhs: Term, sig: &Signature) -> Result<Self, TermError> {
        let report = validate_rule(&lhs, &rhs, sig);
        if !report.is_ok() {
            return Err(TermError::Invalid {
                name: name.to_string(),
                issues: report.issues,
            });
        }
        Ok(ReconfigRule {
            name: name.to_string(),
            lhs: canonicalize(lhs, sig),
            rhs: canonicalize(rhs, sig),
            same_sort: report.same_sort,
        })
    }

    /// `vars(lhs)` with their sorts.
    pub fn var_sorts(&self) -> BTreeMap<String, String> {
        self.lhs
            .var_occurrences()
            .into_iter()
            .map(|(n, s)| (n.to_string(), s.to_string()))
            .collect()
    }
}

impl fmt::Display for ReconfigRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "rule {} : {} -> {}", self.name, self.lhs, self.rhs)?;
        let sorts = self.var_sorts();
        if !sorts.is_empty() {
            let list: Vec<String> = sorts.iter().map(|(v, s)| format!("{v}:{s}")).collect();
            write!(f, " with {}", list.join(", "))?;
        }
        Ok(())
    }
}

fn canonicalize(t: Term, sig: &Signature) -> Term {
    match t {
        Term::Var { .. } => t,
        Term::App { op, args } => {
            let op = sig.op(&op).map(|(k, _)| k.to_string()).unwrap_or(op);
            Term::App {
                op,
                args: args.into_iter().map(|a| canonicalize(a, sig)).collect(),
            }
        }
    }
}

// ---- text syntax ----

struct Cursor<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn skip_ws(&mut self) {
        while let Some(c) = self.src[self.pos..].chars().next() {
            if c.is_whitespace() {
                self.pos += c.len_utf8();
            } else {
                break;
            }
        }
    }

    fn eat(&mut self, s: &str) -> bool {
        self.skip_ws();
        if self.src[self.pos..].starts_with(s) {
            self.pos += s.len();
            true
        } else {
            false
        }
    }

    fn fail<T>(&self, message: impl Into<String>) -> Result<T, TermError> {
        Err(TermError::Syntax {
            offset: self.pos,
            message: message.into(),
        })
    }

    fn ident(&mut self) -> Result<&'a str, TermError> {
        self.skip_ws();
        let rest = &self.src[self.pos..];
        let len = rest
            .char_indices()
            .find(|(_, c)| !(c.is_alphanumeric() || *c == '_' || *c == '\''))
            .map(|(i, _)| i)
            .unwrap_or(rest.len());
        if len == 0 || rest.starts_with(|c: char| c.is_ascii_digit()) {
            return self.fail("expected an identifier");
        }
        self.pos += len;
        Ok(&rest[..len])
    }

    fn at_end(&mut self) -> bool {
        self.skip_ws();
        self.pos == self.src.len()
    }
}

/// Raw term before sorts are known: variables are names not followed by `(`.
enum Raw {
    Var(String, usize),
    App(String, Vec<Raw>, usize),
}

fn raw_term(c: &mut Cursor) -> Result<Raw, TermError> {
    c.skip_ws();
    let at = c.pos;
    let name = c.ident()?.to_string();
    if !c.eat("(") {
        return Ok(Raw::Var(name, at));
    }
    let mut args = Vec::new();
    if !c.eat(")") {
        loop {
            args.push(raw_term(c)?);
            if c.eat(",") {
                continue;
            }
            if c.eat(")") {
                break;
            }
            return c.fail("expected `,` or `)`");
        }
    }
    Ok(Raw::App(name, args, at))
}

fn sorted(
    raw: Raw,
    expected: Option<&str>,
    sig: &Signature,
    sorts: &BTreeMap<String, String>,
) -> Result<Term, TermError> {
    match raw {
        Raw::Var(name, at) => {
            let sort = match (expected, sorts.get(&name)) {
                (Some(e), Some(s)) if e != s => {
                    return Err(TermError::Syntax {
                        offset: at,
                        message: format!("variable `{name}` annotated `{s}` but used at sort `{e}`"),
                    })
                }
                (Some(e), _) => e.to_string(),
                (None, Some(s)) => s.clone(),
                (None, None) => {
                    return Err(TermError::Syntax {
                        offset: at,
                        message: format!("cannot infer the sort of `{name}`; annotate it"),
                    })
                }
            };
            Ok(Term::Var { name, sort })
        }
        Raw::App(op, args, at) => {
            let Some((canonical, os)) = sig.op(&op) else {
                return Err(TermError::Syntax {
                    offset: at,
                    message: format!("unknown operation `{op}`"),
                });
            };
            if os.args.len() != args.len() {
                return Err(TermError::Syntax {
                    offset: at,
                    message: format!("`{op}` takes {} arguments, {} given", os.args.len(), args.len()),
                });
            }
            let arg_sorts = os.args.clone();
            let canonical = canonical.to_string();
            let args = args
                .into_iter()
                .zip(&arg_sorts)
                .map(|(a, s)| sorted(a, Some(s), sig, sorts))
                .collect::<Result<_, _>>()?;
            Ok(Term::App { op: canonical, args })
        }
    }
}

fn annotations(c: &mut Cursor) -> Result<BTreeMap<String, String>, TermError> {
    let mut out = BTreeMap::new();
    if c.at_end() {
        return Ok(out);
    }
    if !c.eat("with") {
        return c.fail("expected `with` or end of input");
    }
    loop {
        let v = c.ident()?.to_string();
        if !c.eat(":") {
            return c.fail("expected `:`");
        }
        let s = c.ident()?.to_string();
        out.insert(v, s);
        if !c.eat(",") {
            break;
        }
    }
    if !c.at_end() {
        return c.fail("unexpected trailing input");
    }
    Ok(out)
}

/// Parses a single term, e.g. `brF(x, bookF(y,z))`, optionally followed by
/// `with x:Fl, ...`.
pub fn parse_term(src: &str, sig: &Signature) -> Result<Term, TermError> {
    let mut c = Cursor { src, pos: 0 };
    let raw = raw_term(&mut c)?;
    let sorts = annotations(&mut c)?;
    sorted(raw, None, sig, &sorts)
}

/// Parses `[rule] name : lhs -> rhs [with x:S, ...]` and validates it.
pub fn parse_rule(src: &str, sig: &Signature) -> Result<ReconfigRule, TermError> {
    let mut c = Cursor { src, pos: 0 };
    let save = c.pos;
    if c.ident()? != "rule" {
        c.pos = save;
    }
    let name = c.ident()?.to_string();
    if !c.eat(":") {
        return c.fail("expected `:` after the rule name");
    }
    let lhs = raw_term(&mut c)?;
    if !c.eat("->") {
        return c.fail("expected `->`");
    }
    let rhs = raw_term(&mut c)?;
    let mut sorts = annotations(&mut c)?;
    // sorts inferred on the left carry over to bare variables on the right
    let lhs = sorted(lhs, None, sig, &sorts)?;
    for (v, s) in lhs.var_occurrences() {
        sorts.entry(v.to_string()).or_insert_with(|| s.to_string());
    }
    let rhs = sorted(rhs, None, sig, &sorts)?;
    ReconfigRule::new(&name, lhs, rhs, sig)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    #[test]
    fn cf_is_valid_and_same_sort() {
        let style = fixtures::travel();
        let cf = style.rule("cf").unwrap();
        assert!(cf.same_sort);
        assert_eq!(cf.lhs.to_string(), "browseFlights(x, bookF(y, z))");
        assert_eq!(cf.var_sorts()["z"], "Client");
    }

    #[test]
    fn rule_text_round_trips() {
        let style = fixtures::travel();
        let sig = style.signature();
        let cf = style.rule("cf").unwrap();
        let again = parse_rule(&cf.to_string(), &sig).unwrap();
        assert_eq!(&again, cf);
    }

    #[test]
    fn identity_rule_is_valid() {
        let sig = fixtures::travel().signature();
        let r = parse_rule("id : brF(x, y) -> brF(x, y)", &sig).unwrap();
        assert!(r.same_sort);
    }

    #[test]
    fn non_linear_lhs_is_rejected() {
        let sig = fixtures::travel().signature();
        let err = parse_rule("dup : brF(x, x) -> brF(x, x)", &sig).unwrap_err();
        let TermError::Invalid { issues, .. } = err else {
            panic!("expected validation issues")
        };
        assert!(issues.contains(&RuleIssue::NonLinear {
            side: "left-hand side",
            var: "x".into()
        }));
    }

    #[test]
    fn unbound_rhs_variable_is_rejected() {
        let sig = fixtures::travel().signature();
        let err = parse_rule("r : brF(x, y) -> brF(x, w) with w:Fl", &sig).unwrap_err();
        assert!(
            matches!(err, TermError::Invalid { ref issues, .. } if issues.contains(&RuleIssue::Unbound("w".into())))
        );
    }

    #[test]
    fn sort_changing_rule_is_flagged() {
        let sig = fixtures::travel().signature();
        let r = parse_rule("r : bookF(x, z) -> z", &sig).unwrap();
        assert!(!r.same_sort);
    }

    #[test]
    fn ill_sorted_annotation_is_a_syntax_error() {
        let sig = fixtures::travel().signature();
        assert!(matches!(
            parse_rule("r : brF(x, y) -> brF(x, y) with x:Client", &sig),
            Err(TermError::Syntax { .. })
        ));
    }

    #[test]
    fn paths() {
        let sig = fixtures::travel().signature();
        let t = parse_term("brF(x, bookF(y,z))", &sig).unwrap();
        assert_eq!(t.path_of("z"), Some(vec![1, 1]));
        assert_eq!(t.at(&[1, 0]), Some(&Term::var("y", "Fl")));
        assert!(t.is_linear());
    }
}
