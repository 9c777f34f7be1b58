//! The SMT-LIB v2 constraint fragment: integer terms over `in<k>` inputs,
//! the five comparators, and `and`/`or`/`not` over them.
//!
//! Every constraint handled by the workbench goes through [`Formula`]. Text is
//! parsed with [`parse_formula`] and written back with
//! [`Formula::to_canonical`], which emits single-spaced, left-folded binary
//! `and`/`or` nodes. The vacuous constraint is [`Formula::True`] and is
//! written as the literal `None`.

mod parse;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

pub(crate) use parse::{read_sexprs, SExpr};
pub use parse::{parse_formula, ParseError};

/// Variable assignment used for evaluation. Variables missing from the map
/// evaluate to zero.
pub type Model = BTreeMap<Var, i64>;

/// An input variable `in<k>`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Var(pub u32);

impl Var {
    pub fn index(self) -> u32 {
        self.0
    }

    /// Parses `in<k>` with no leading zeros on `k` (`in0` is allowed).
    pub fn from_name(name: &str) -> Option<Var> {
        let digits = name.strip_prefix("in")?;
        if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
            return None;
        }
        if digits.len() > 1 && digits.starts_with('0') {
            return None;
        }
        digits.parse().ok().map(Var)
    }
}

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "in{}", self.0)
    }
}

impl Serialize for Var {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Var {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let name = String::deserialize(d)?;
        Var::from_name(&name)
            .ok_or_else(|| serde::de::Error::custom(format!("malformed variable `{name}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Term {
    Var(Var),
    Int(i64),
    Add(Box<Term>, Box<Term>),
    Sub(Box<Term>, Box<Term>),
    Mul(Box<Term>, Box<Term>),
}

#[allow(clippy::should_implement_trait)]
impl Term {
    pub fn var(index: u32) -> Term {
        Term::Var(Var(index))
    }

    pub fn add(lhs: Term, rhs: Term) -> Term {
        Term::Add(Box::new(lhs), Box::new(rhs))
    }

    pub fn sub(lhs: Term, rhs: Term) -> Term {
        Term::Sub(Box::new(lhs), Box::new(rhs))
    }

    pub fn mul(lhs: Term, rhs: Term) -> Term {
        Term::Mul(Box::new(lhs), Box::new(rhs))
    }

    pub fn eval(&self, model: &Model) -> i128 {
        match self {
            Term::Var(v) => i128::from(model.get(v).copied().unwrap_or(0)),
            Term::Int(c) => i128::from(*c),
            Term::Add(a, b) => a.eval(model).wrapping_add(b.eval(model)),
            Term::Sub(a, b) => a.eval(model).wrapping_sub(b.eval(model)),
            Term::Mul(a, b) => a.eval(model).wrapping_mul(b.eval(model)),
        }
    }

    pub fn collect_vars(&self, out: &mut BTreeSet<Var>) {
        match self {
            Term::Var(v) => {
                out.insert(*v);
            }
            Term::Int(_) => {}
            Term::Add(a, b) | Term::Sub(a, b) | Term::Mul(a, b) => {
                a.collect_vars(out);
                b.collect_vars(out);
            }
        }
    }

    pub fn is_ground(&self) -> bool {
        match self {
            Term::Var(_) => false,
            Term::Int(_) => true,
            Term::Add(a, b) | Term::Sub(a, b) | Term::Mul(a, b) => a.is_ground() && b.is_ground(),
        }
    }

    /// Largest absolute integer literal in the term.
    pub fn max_abs_literal(&self) -> u64 {
        match self {
            Term::Var(_) => 0,
            Term::Int(c) => c.unsigned_abs(),
            Term::Add(a, b) | Term::Sub(a, b) | Term::Mul(a, b) => {
                a.max_abs_literal().max(b.max_abs_literal())
            }
        }
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Var(v) => write!(f, "{v}"),
            Term::Int(c) if *c < 0 => write!(f, "(- {})", c.unsigned_abs()),
            Term::Int(c) => write!(f, "{c}"),
            Term::Add(a, b) => write!(f, "(+ {a} {b})"),
            Term::Sub(a, b) => write!(f, "(- {a} {b})"),
            Term::Mul(a, b) => write!(f, "(* {a} {b})"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Cmp {
    Le,
    Lt,
    Ge,
    Gt,
    Eq,
}

impl Cmp {
    pub const ALL: [Cmp; 5] = [Cmp::Le, Cmp::Lt, Cmp::Ge, Cmp::Gt, Cmp::Eq];

    pub fn symbol(self) -> &'static str {
        match self {
            Cmp::Le => "<=",
            Cmp::Lt => "<",
            Cmp::Ge => ">=",
            Cmp::Gt => ">",
            Cmp::Eq => "=",
        }
    }

    pub fn from_symbol(s: &str) -> Option<Cmp> {
        Cmp::ALL.into_iter().find(|c| c.symbol() == s)
    }

    pub fn holds(self, lhs: i128, rhs: i128) -> bool {
        match self {
            Cmp::Le => lhs <= rhs,
            Cmp::Lt => lhs < rhs,
            Cmp::Ge => lhs >= rhs,
            Cmp::Gt => lhs > rhs,
            Cmp::Eq => lhs == rhs,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Atom {
    pub op: Cmp,
    pub lhs: Term,
    pub rhs: Term,
}

impl Atom {
    pub fn new(op: Cmp, lhs: Term, rhs: Term) -> Atom {
        Atom { op, lhs, rhs }
    }

    pub fn eval(&self, model: &Model) -> bool {
        self.op.holds(self.lhs.eval(model), self.rhs.eval(model))
    }

    /// The complementary comparison as a single atom, e.g. `not (a <= b)`
    /// becomes `b < a`. Equality has no single-atom complement.
    pub fn negated(&self) -> Option<Atom> {
        let (l, r) = (self.lhs.clone(), self.rhs.clone());
        Some(match self.op {
            Cmp::Le => Atom::new(Cmp::Lt, r, l),
            Cmp::Lt => Atom::new(Cmp::Le, r, l),
            Cmp::Ge => Atom::new(Cmp::Lt, l, r),
            Cmp::Gt => Atom::new(Cmp::Le, l, r),
            Cmp::Eq => return None,
        })
    }

    pub fn collect_vars(&self, out: &mut BTreeSet<Var>) {
        self.lhs.collect_vars(out);
        self.rhs.collect_vars(out);
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({} {} {})", self.op.symbol(), self.lhs, self.rhs)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Formula {
    True,
    Atom(Atom),
    And(Vec<Formula>),
    Or(Vec<Formula>),
    Not(Box<Formula>),
}

impl From<Atom> for Formula {
    fn from(a: Atom) -> Self {
        Formula::Atom(a)
    }
}

impl Formula {
    pub fn atom(op: Cmp, lhs: Term, rhs: Term) -> Formula {
        Formula::Atom(Atom::new(op, lhs, rhs))
    }

    /// Conjunction that keeps the `And` arity invariant: no children is
    /// `True`, a single child is returned as is.
    pub fn conjunction(mut children: Vec<Formula>) -> Formula {
        match children.len() {
            0 => Formula::True,
            1 => children.pop().unwrap(),
            _ => Formula::And(children),
        }
    }

    pub fn negate(f: Formula) -> Formula {
        Formula::Not(Box::new(f))
    }

    pub fn eval(&self, model: &Model) -> bool {
        match self {
            Formula::True => true,
            Formula::Atom(a) => a.eval(model),
            Formula::And(cs) => cs.iter().all(|c| c.eval(model)),
            Formula::Or(cs) => cs.iter().any(|c| c.eval(model)),
            Formula::Not(c) => !c.eval(model),
        }
    }

    pub fn free_vars(&self) -> BTreeSet<Var> {
        let mut out = BTreeSet::new();
        self.collect_vars(&mut out);
        out
    }

    fn collect_vars(&self, out: &mut BTreeSet<Var>) {
        match self {
            Formula::True => {}
            Formula::Atom(a) => a.collect_vars(out),
            Formula::And(cs) | Formula::Or(cs) => cs.iter().for_each(|c| c.collect_vars(out)),
            Formula::Not(c) => c.collect_vars(out),
        }
    }

    pub fn max_abs_literal(&self) -> u64 {
        match self {
            Formula::True => 0,
            Formula::Atom(a) => a.lhs.max_abs_literal().max(a.rhs.max_abs_literal()),
            Formula::And(cs) | Formula::Or(cs) => {
                cs.iter().map(Formula::max_abs_literal).max().unwrap_or(0)
            }
            Formula::Not(c) => c.max_abs_literal(),
        }
    }

    /// Nested `And` nodes flattened into their leaves, left to right. `True`
    /// contributes nothing.
    pub fn flatten_conjunction(&self) -> Vec<Formula> {
        let mut out = Vec::new();
        self.flatten_into(&mut out);
        out
    }

    fn flatten_into(&self, out: &mut Vec<Formula>) {
        match self {
            Formula::True => {}
            Formula::And(cs) => cs.iter().for_each(|c| c.flatten_into(out)),
            other => out.push(other.clone()),
        }
    }

    /// The atoms of a pure conjunction, or `None` when some leaf is not an
    /// atom (a disjunction or negation).
    pub fn conjunct_atoms(&self) -> Option<Vec<Atom>> {
        self.flatten_conjunction()
            .into_iter()
            .map(|f| match f {
                Formula::Atom(a) => Some(a),
                _ => None,
            })
            .collect()
    }

    /// Rewrites every n-ary `and`/`or` into left-nested binary nodes, the
    /// shape [`Formula::to_canonical`] prints.
    pub fn left_folded(&self) -> Formula {
        fn fold(cs: &[Formula], wrap: fn(Vec<Formula>) -> Formula) -> Formula {
            let mut iter = cs.iter().map(Formula::left_folded);
            let first = iter.next().expect("n-ary node has children");
            iter.fold(first, |acc, c| wrap(vec![acc, c]))
        }
        match self {
            Formula::True | Formula::Atom(_) => self.clone(),
            Formula::And(cs) => fold(cs, Formula::And),
            Formula::Or(cs) => fold(cs, Formula::Or),
            Formula::Not(c) => Formula::Not(Box::new(c.left_folded())),
        }
    }

    /// Canonical text: `(assert <body>)`, or `None` for the vacuous formula.
    pub fn to_canonical(&self) -> String {
        match self {
            Formula::True => "None".to_string(),
            f => format!("(assert {})", f.body()),
        }
    }

    /// The formula as an SMT-LIB boolean expression without the `assert`
    /// wrapper. `True` renders as `true`.
    pub fn body(&self) -> String {
        let mut s = String::new();
        self.write_body(&mut s);
        s
    }

    fn write_body(&self, out: &mut String) {
        use std::fmt::Write;
        match self {
            Formula::True => out.push_str("true"),
            Formula::Atom(a) => {
                let _ = write!(out, "{a}");
            }
            Formula::And(cs) => write_folded(out, "and", cs),
            Formula::Or(cs) => write_folded(out, "or", cs),
            Formula::Not(c) => {
                out.push_str("(not ");
                c.write_body(out);
                out.push(')');
            }
        }
    }
}

fn write_folded(out: &mut String, op: &str, cs: &[Formula]) {
    // left fold: (op (op (op c0 c1) c2) c3)
    for _ in 1..cs.len() {
        out.push('(');
        out.push_str(op);
        out.push(' ');
    }
    for (i, c) in cs.iter().enumerate() {
        c.write_body(out);
        if i > 0 {
            out.push(')');
        }
        if i + 1 < cs.len() {
            out.push(' ');
        }
    }
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_canonical())
    }
}

pub fn serialize_canonical(f: &Formula) -> String {
    f.to_canonical()
}

pub fn flatten_conjunction(f: &Formula) -> Vec<Formula> {
    f.flatten_conjunction()
}

pub fn free_vars(f: &Formula) -> BTreeSet<Var> {
    f.free_vars()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn le(i: u32, j: u32) -> Formula {
        Formula::atom(Cmp::Le, Term::var(i), Term::var(j))
    }

    #[test]
    fn var_names() {
        assert_eq!(Var::from_name("in0"), Some(Var(0)));
        assert_eq!(Var::from_name("in17"), Some(Var(17)));
        assert_eq!(Var::from_name("in01"), None);
        assert_eq!(Var::from_name("in"), None);
        assert_eq!(Var::from_name("x0"), None);
        assert_eq!(Var::from_name("in-1"), None);
    }

    #[test]
    fn serialize_left_folds_nary_and() {
        let f = Formula::And(vec![le(0, 2), le(1, 2), le(0, 1)]);
        assert_eq!(
            f.to_canonical(),
            "(assert (and (and (<= in0 in2) (<= in1 in2)) (<= in0 in1)))"
        );
    }

    #[test]
    fn serialize_true_and_single_atom() {
        assert_eq!(Formula::True.to_canonical(), "None");
        assert_eq!(le(0, 1).to_canonical(), "(assert (<= in0 in1))");
    }

    #[test]
    fn serialize_terms() {
        let f = Formula::atom(
            Cmp::Eq,
            Term::var(2),
            Term::add(Term::var(1), Term::mul(Term::var(0), Term::Int(-3))),
        );
        assert_eq!(f.to_canonical(), "(assert (= in2 (+ in1 (* in0 (- 3)))))");
    }

    #[test]
    fn flatten_cases() {
        let (a, b, c) = (le(0, 1), le(1, 2), le(0, 2));
        let nested = Formula::And(vec![Formula::And(vec![a.clone(), b.clone()]), c.clone()]);
        assert_eq!(nested.flatten_conjunction(), vec![a.clone(), b, c]);
        assert_eq!(a.flatten_conjunction(), vec![a]);
        assert!(Formula::True.flatten_conjunction().is_empty());
    }

    #[test]
    fn free_vars_cases() {
        let eq = Formula::atom(Cmp::Eq, Term::var(0), Term::Int(100));
        assert_eq!(eq.free_vars(), BTreeSet::from([Var(0)]));
        assert!(Formula::True.free_vars().is_empty());
    }

    #[test]
    fn negated_atoms_are_complements() {
        let m: Model = [(Var(0), 3), (Var(1), 3)].into();
        for op in [Cmp::Le, Cmp::Lt, Cmp::Ge, Cmp::Gt] {
            let a = Atom::new(op, Term::var(0), Term::var(1));
            let n = a.negated().unwrap();
            for (x, y) in [(2, 3), (3, 3), (4, 3)] {
                let m: Model = [(Var(0), x), (Var(1), y)].into();
                assert_ne!(a.eval(&m), n.eval(&m), "{a} vs {n} at {x},{y}");
            }
        }
        assert!(Atom::new(Cmp::Eq, Term::var(0), Term::var(1)).negated().is_none());
        assert!(le(0, 1).eval(&m));
    }

    #[test]
    fn left_fold_of_binary_is_identity() {
        let f = Formula::And(vec![Formula::And(vec![le(0, 1), le(1, 2)]), le(0, 2)]);
        assert_eq!(f.left_folded(), f);
        let g = Formula::And(vec![le(0, 1), le(1, 2), le(0, 2)]);
        assert_eq!(g.left_folded(), f);
    }
}
