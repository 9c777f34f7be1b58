//! Exact integer feasibility for small conjunctions of linear constraints.
//!
//! Equalities with a unit-coefficient variable are eliminated by
//! substitution. The remaining inequalities go through Fourier-Motzkin, but a
//! variable is only eliminated when the step is exact over the integers (all
//! of its lower-bound coefficients or all of its upper-bound coefficients are
//! 1 after gcd tightening). When no exact step exists the procedure answers
//! [`LinearResult::Unsupported`] rather than guess. Models are recovered by
//! back-substitution and re-checked against the input before being returned.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

use crate::smtlib::{Atom, Cmp, Model, Term, Var};

const MAX_ROWS: usize = 20_000;
const MAX_MAGNITUDE: i128 = 1 << 62;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LinearError {
    #[error("non-linear term `{0}`")]
    NonLinear(String),
    #[error("arithmetic overflow while normalizing `{0}`")]
    Overflow(String),
}

/// `sum(coeffs[v] * v) + constant`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LinExpr {
    pub coeffs: BTreeMap<Var, i64>,
    pub constant: i64,
}

impl LinExpr {
    pub fn from_term(t: &Term) -> Result<LinExpr, LinearError> {
        let overflow = || LinearError::Overflow(t.to_string());
        match t {
            Term::Var(v) => Ok(LinExpr { coeffs: BTreeMap::from([(*v, 1)]), constant: 0 }),
            Term::Int(c) => Ok(LinExpr { coeffs: BTreeMap::new(), constant: *c }),
            Term::Add(a, b) => {
                LinExpr::from_term(a)?.combine(&LinExpr::from_term(b)?, 1).ok_or_else(overflow)
            }
            Term::Sub(a, b) => {
                LinExpr::from_term(a)?.combine(&LinExpr::from_term(b)?, -1).ok_or_else(overflow)
            }
            Term::Mul(a, b) => {
                let (a, b) = (LinExpr::from_term(a)?, LinExpr::from_term(b)?);
                let (k, e) = match (a.as_constant(), b.as_constant()) {
                    (Some(k), _) => (k, b),
                    (_, Some(k)) => (k, a),
                    _ => return Err(LinearError::NonLinear(t.to_string())),
                };
                e.scaled(k).ok_or_else(overflow)
            }
        }
    }

    pub fn as_constant(&self) -> Option<i64> {
        self.coeffs.is_empty().then_some(self.constant)
    }

    /// `self + sign * other`, dropping zero coefficients.
    pub fn combine(mut self, other: &LinExpr, sign: i64) -> Option<LinExpr> {
        for (v, c) in &other.coeffs {
            let entry = self.coeffs.entry(*v).or_insert(0);
            *entry = entry.checked_add(c.checked_mul(sign)?)?;
        }
        self.coeffs.retain(|_, c| *c != 0);
        self.constant = self.constant.checked_add(other.constant.checked_mul(sign)?)?;
        Some(self)
    }

    pub fn scaled(mut self, k: i64) -> Option<LinExpr> {
        for c in self.coeffs.values_mut() {
            *c = c.checked_mul(k)?;
        }
        self.coeffs.retain(|_, c| *c != 0);
        self.constant = self.constant.checked_mul(k)?;
        Some(self)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Relation {
    Le,
    Eq,
}

/// `sum(coeffs[v] * v) <= bound` or `... = bound`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct LinConstraint {
    pub coeffs: BTreeMap<Var, i64>,
    pub rel: Relation,
    pub bound: i64,
}

impl LinConstraint {
    pub fn holds(&self, model: &Model) -> bool {
        let lhs: i128 = self
            .coeffs
            .iter()
            .map(|(v, c)| i128::from(*c) * i128::from(model.get(v).copied().unwrap_or(0)))
            .sum();
        match self.rel {
            Relation::Le => lhs <= i128::from(self.bound),
            Relation::Eq => lhs == i128::from(self.bound),
        }
    }

    /// Splits an equality into its two inequalities; inequalities pass through.
    pub fn halves(&self) -> Option<Vec<LinConstraint>> {
        match self.rel {
            Relation::Le => Some(vec![self.clone()]),
            Relation::Eq => {
                let neg = negate_coeffs(&self.coeffs)?;
                Some(vec![
                    LinConstraint { coeffs: self.coeffs.clone(), rel: Relation::Le, bound: self.bound },
                    LinConstraint { coeffs: neg, rel: Relation::Le, bound: self.bound.checked_neg()? },
                ])
            }
        }
    }

    /// Integer complement of an inequality: `not (s <= b)` is `-s <= -b - 1`.
    pub fn complement(&self) -> Option<LinConstraint> {
        debug_assert_eq!(self.rel, Relation::Le);
        Some(LinConstraint {
            coeffs: negate_coeffs(&self.coeffs)?,
            rel: Relation::Le,
            bound: self.bound.checked_neg()?.checked_sub(1)?,
        })
    }
}

fn negate_coeffs(c: &BTreeMap<Var, i64>) -> Option<BTreeMap<Var, i64>> {
    c.iter().map(|(v, k)| k.checked_neg().map(|k| (*v, k))).collect()
}

impl fmt::Display for LinConstraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.coeffs.is_empty() {
            f.write_str("0")?;
        }
        for (i, (v, c)) in self.coeffs.iter().enumerate() {
            if i > 0 {
                f.write_str(" + ")?;
            }
            write!(f, "{c}*{v}")?;
        }
        let rel = match self.rel {
            Relation::Le => "<=",
            Relation::Eq => "=",
        };
        write!(f, " {rel} {}", self.bound)
    }
}

/// Linear constraints equivalent to `atom` over the integers.
pub fn atom_constraints(atom: &Atom) -> Result<Vec<LinConstraint>, LinearError> {
    let overflow = || LinearError::Overflow(atom.to_string());
    let diff = LinExpr::from_term(&atom.lhs)?
        .combine(&LinExpr::from_term(&atom.rhs)?, -1)
        .ok_or_else(overflow)?;
    let k = diff.constant;
    let pos = diff.coeffs;
    let neg = || negate_coeffs(&pos).ok_or_else(overflow);
    let c = match atom.op {
        Cmp::Le => LinConstraint { rel: Relation::Le, bound: k.checked_neg().ok_or_else(overflow)?, coeffs: pos },
        Cmp::Lt => LinConstraint {
            rel: Relation::Le,
            bound: k.checked_neg().and_then(|b| b.checked_sub(1)).ok_or_else(overflow)?,
            coeffs: pos,
        },
        Cmp::Ge => LinConstraint { coeffs: neg()?, rel: Relation::Le, bound: k },
        Cmp::Gt => LinConstraint {
            coeffs: neg()?,
            rel: Relation::Le,
            bound: k.checked_sub(1).ok_or_else(overflow)?,
        },
        Cmp::Eq => LinConstraint { rel: Relation::Eq, bound: k.checked_neg().ok_or_else(overflow)?, coeffs: pos },
    };
    Ok(vec![c])
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LinearResult {
    Feasible(Model),
    Infeasible,
    Unsupported(String),
}

impl LinearResult {
    pub fn is_feasible(&self) -> bool {
        matches!(self, LinearResult::Feasible(_))
    }
}

/// Feasibility of a conjunction of atoms; `Unsupported` for non-linear atoms.
pub fn check_atoms(atoms: &[Atom]) -> LinearResult {
    let mut cs = Vec::new();
    for a in atoms {
        match atom_constraints(a) {
            Ok(mut v) => cs.append(&mut v),
            Err(e) => return LinearResult::Unsupported(e.to_string()),
        }
    }
    solve(&cs)
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
struct Row {
    coeffs: BTreeMap<Var, i128>,
    bound: i128,
}

enum Tidy {
    Trivial,
    Contradiction,
    Row(Row),
}

fn gcd(a: i128, b: i128) -> i128 {
    let (mut a, mut b) = (a.abs(), b.abs());
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

impl Row {
    fn tidy(mut self, equality: bool) -> Tidy {
        self.coeffs.retain(|_, c| *c != 0);
        if self.coeffs.is_empty() {
            let ok = if equality { self.bound == 0 } else { self.bound >= 0 };
            return if ok { Tidy::Trivial } else { Tidy::Contradiction };
        }
        let g = self.coeffs.values().fold(0, |g, c| gcd(g, *c));
        if g > 1 {
            if equality {
                if self.bound % g != 0 {
                    return Tidy::Contradiction;
                }
                self.bound /= g;
            } else {
                self.bound = self.bound.div_euclid(g);
            }
            for c in self.coeffs.values_mut() {
                *c /= g;
            }
        }
        Tidy::Row(self)
    }

    fn too_large(&self) -> bool {
        self.bound.abs() > MAX_MAGNITUDE || self.coeffs.values().any(|c| c.abs() > MAX_MAGNITUDE)
    }

    /// `self + k * other` with `other`'s variables folded in.
    fn add_scaled(&self, other: &Row, k: i128) -> Row {
        let mut coeffs = self.coeffs.clone();
        for (v, c) in &other.coeffs {
            *coeffs.entry(*v).or_insert(0) += k * c;
        }
        Row { coeffs, bound: self.bound + k * other.bound }
    }

    fn eval_without(&self, skip: Var, model: &BTreeMap<Var, i128>) -> i128 {
        self.coeffs
            .iter()
            .filter(|(v, _)| **v != skip)
            .map(|(v, c)| c * model.get(v).copied().unwrap_or(0))
            .sum()
    }
}

fn floor_div(a: i128, b: i128) -> i128 {
    a.div_euclid(b) - if b < 0 && a.rem_euclid(b) != 0 { 1 } else { 0 }
}

fn ceil_div(a: i128, b: i128) -> i128 {
    -floor_div(-a, b)
}

/// Decides a conjunction of linear integer constraints.
pub fn solve(constraints: &[LinConstraint]) -> LinearResult {
    let mut eqs = Vec::new();
    let mut rows = BTreeSet::new();
    for c in constraints {
        let row = Row {
            coeffs: c.coeffs.iter().map(|(v, k)| (*v, i128::from(*k))).collect(),
            bound: i128::from(c.bound),
        };
        match row.tidy(c.rel == Relation::Eq) {
            Tidy::Trivial => {}
            Tidy::Contradiction => return LinearResult::Infeasible,
            Tidy::Row(r) if c.rel == Relation::Eq => eqs.push(r),
            Tidy::Row(r) => {
                rows.insert(r);
            }
        }
    }

    // x = constant + sum(coeffs * y)
    let mut substitutions: Vec<(Var, Row)> = Vec::new();
    while let Some(pos) = eqs
        .iter()
        .position(|e| e.coeffs.values().any(|c| c.abs() == 1) || e.coeffs.len() == 1)
    {
        let eq = eqs.swap_remove(pos);
        let (x, a) = match eq.coeffs.iter().find(|(_, c)| c.abs() == 1) {
            Some((v, c)) => (*v, *c),
            None => {
                // single variable: a * x = b
                let (v, c) = eq.coeffs.iter().next().map(|(v, c)| (*v, *c)).unwrap();
                if eq.bound % c != 0 {
                    return LinearResult::Infeasible;
                }
                let row = Row { coeffs: BTreeMap::from([(v, c)]), bound: eq.bound };
                let value = Row { coeffs: BTreeMap::new(), bound: eq.bound / c };
                match substitute_everywhere(v, &row, c, &mut eqs, &mut rows) {
                    Ok(()) => substitutions.push((v, value)),
                    Err(r) => return r,
                }
                continue;
            }
        };
        let mut rest = eq.coeffs.clone();
        rest.remove(&x);
        let value = Row {
            coeffs: rest.iter().map(|(v, c)| (*v, -a * c)).collect(),
            bound: a * eq.bound,
        };
        if let Err(r) = substitute_everywhere(x, &eq, a, &mut eqs, &mut rows) {
            return r;
        }
        substitutions.push((x, value));
    }
    if !eqs.is_empty() {
        return LinearResult::Unsupported("equality without a unit coefficient".into());
    }

    let mut stages: Vec<(Var, Vec<Row>)> = Vec::new();
    loop {
        let vars: BTreeSet<Var> = rows.iter().flat_map(|r| r.coeffs.keys().copied()).collect();
        if vars.is_empty() {
            break;
        }
        let mut best: Option<(usize, Var)> = None;
        for v in vars {
            let (mut lowers, mut uppers, mut unit_lo, mut unit_up) = (0, 0, true, true);
            for r in &rows {
                match r.coeffs.get(&v) {
                    Some(c) if *c > 0 => {
                        uppers += 1;
                        unit_up &= *c == 1;
                    }
                    Some(c) if *c < 0 => {
                        lowers += 1;
                        unit_lo &= *c == -1;
                    }
                    _ => {}
                }
            }
            if !(unit_lo || unit_up) {
                continue;
            }
            let cost = lowers * uppers;
            if best.is_none_or(|(b, _)| cost < b) {
                best = Some((cost, v));
            }
        }
        let Some((_, v)) = best else {
            return LinearResult::Unsupported("no exact elimination step".into());
        };
        let (involved, others): (Vec<Row>, Vec<Row>) =
            std::mem::take(&mut rows).into_iter().partition(|r| r.coeffs.contains_key(&v));
        rows = others.into_iter().collect();
        let lowers: Vec<&Row> = involved.iter().filter(|r| r.coeffs[&v] < 0).collect();
        let uppers: Vec<&Row> = involved.iter().filter(|r| r.coeffs[&v] > 0).collect();
        for lo in &lowers {
            for up in &uppers {
                let p = -lo.coeffs[&v];
                let q = up.coeffs[&v];
                let combined = up.add_scaled(lo, 0); // clone
                let mut sum = Row {
                    coeffs: combined.coeffs.iter().map(|(x, c)| (*x, p * c)).collect(),
                    bound: p * combined.bound,
                };
                sum = sum.add_scaled(lo, q);
                match sum.tidy(false) {
                    Tidy::Trivial => {}
                    Tidy::Contradiction => return LinearResult::Infeasible,
                    Tidy::Row(r) => {
                        if r.too_large() {
                            return LinearResult::Unsupported("coefficient growth".into());
                        }
                        rows.insert(r);
                    }
                }
                if rows.len() > MAX_ROWS {
                    return LinearResult::Unsupported("too many derived constraints".into());
                }
            }
        }
        stages.push((v, involved));
    }

    let mut model: BTreeMap<Var, i128> = BTreeMap::new();
    for (v, rows) in stages.iter().rev() {
        let (mut lo, mut hi) = (i128::MIN, i128::MAX);
        for r in rows {
            let c = r.coeffs[v];
            let rhs = r.bound - r.eval_without(*v, &model);
            if c > 0 {
                hi = hi.min(floor_div(rhs, c));
            } else {
                lo = lo.max(ceil_div(rhs, c));
            }
        }
        if lo > hi {
            return LinearResult::Unsupported("model extraction failed".into());
        }
        model.insert(*v, 0.clamp(lo, hi));
    }
    for (x, value) in substitutions.iter().rev() {
        let val = value.bound + value.eval_without(*x, &model);
        model.insert(*x, val);
    }

    let mut out = Model::new();
    for c in constraints {
        for v in c.coeffs.keys() {
            let val = model.get(v).copied().unwrap_or(0);
            match i64::try_from(val) {
                Ok(val) => {
                    out.insert(*v, val);
                }
                Err(_) => return LinearResult::Unsupported("model out of range".into()),
            }
        }
    }
    if constraints.iter().all(|c| c.holds(&out)) {
        LinearResult::Feasible(out)
    } else {
        LinearResult::Unsupported("model failed verification".into())
    }
}

/// Replaces `x` using `eq` (where `eq.coeffs[x] == a`, `|a| == 1` or `eq` has
/// only `x`) in every remaining equality and inequality.
fn substitute_everywhere(
    x: Var,
    eq: &Row,
    a: i128,
    eqs: &mut Vec<Row>,
    rows: &mut BTreeSet<Row>,
) -> Result<(), LinearResult> {
    let rewrite = |r: &Row| -> Option<Row> {
        let c = *r.coeffs.get(&x)?;
        // r - (c / a) * eq; exact because a divides c when |a| == 1, and for a
        // single-variable eq we scale r by a first.
        if c % a == 0 {
            let mut out = r.add_scaled(eq, -(c / a));
            out.coeffs.remove(&x);
            Some(out)
        } else {
            let scaled = Row {
                coeffs: r.coeffs.iter().map(|(v, k)| (*v, k * a.abs())).collect(),
                bound: r.bound * a.abs(),
            };
            let mut out = scaled.add_scaled(eq, -(c * a.signum()));
            out.coeffs.remove(&x);
            Some(out)
        }
    };
    let mut new_eqs = Vec::with_capacity(eqs.len());
    for e in eqs.drain(..) {
        let e = rewrite(&e).unwrap_or(e);
        match e.tidy(true) {
            Tidy::Trivial => {}
            Tidy::Contradiction => return Err(LinearResult::Infeasible),
            Tidy::Row(r) => new_eqs.push(r),
        }
    }
    *eqs = new_eqs;
    let old = std::mem::take(rows);
    for r in old {
        let r = rewrite(&r).unwrap_or(r);
        match r.tidy(false) {
            Tidy::Trivial => {}
            Tidy::Contradiction => return Err(LinearResult::Infeasible),
            Tidy::Row(r) => {
                if r.too_large() {
                    return Err(LinearResult::Unsupported("coefficient growth".into()));
                }
                rows.insert(r);
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::smtlib::parse_formula;

    fn atoms(src: &str) -> Vec<Atom> {
        parse_formula(src).unwrap().conjunct_atoms().unwrap()
    }

    #[test]
    fn linear_forms() {
        let t = Term::mul(Term::Int(3), Term::sub(Term::var(0), Term::Int(2)));
        let e = LinExpr::from_term(&t).unwrap();
        assert_eq!(e.coeffs, BTreeMap::from([(Var(0), 3)]));
        assert_eq!(e.constant, -6);
        let nl = Term::mul(Term::var(0), Term::var(1));
        assert!(matches!(LinExpr::from_term(&nl), Err(LinearError::NonLinear(_))));
    }

    #[test]
    fn fibonacci_prefix_is_feasible() {
        let r = check_atoms(&atoms(
            "(assert (and (= in2 (+ in1 in0)) (and (= in3 (+ in2 in1)) (= in4 (+ in3 in2)))))",
        ));
        let LinearResult::Feasible(m) = r else { panic!("{r:?}") };
        assert_eq!(m[&Var(2)], m[&Var(1)] + m[&Var(0)]);
        assert_eq!(m[&Var(4)], m[&Var(3)] + m[&Var(2)]);
    }

    #[test]
    fn fibonacci_contradiction() {
        // in3 = in2 + in1 and in2 = in1 + in0 force in3 - in2 - in1 = 0
        let r = check_atoms(&atoms(
            "(assert (and (= in2 (+ in1 in0)) (and (= in3 (+ in2 in1)) (< in3 (+ in2 in1)))))",
        ));
        assert_eq!(r, LinearResult::Infeasible);
    }

    #[test]
    fn parity_via_gcd() {
        // 2*in0 = 2*in1 + 1 has no integer solution
        let r = check_atoms(&atoms("(assert (= (* 2 in0) (+ (* 2 in1) 1)))"));
        assert_eq!(r, LinearResult::Infeasible);
        // 2*in0 <= 1 and 2*in0 >= 1 is rationally feasible only
        let r = check_atoms(&atoms("(assert (and (<= (* 2 in0) 1) (>= (* 2 in0) 1)))"));
        assert_eq!(r, LinearResult::Infeasible);
    }

    #[test]
    fn difference_cycle() {
        let r = check_atoms(&atoms("(assert (and (<= in0 in1) (and (<= in1 in2) (< in2 in0))))"));
        assert_eq!(r, LinearResult::Infeasible);
        let r = check_atoms(&atoms("(assert (and (<= in0 in1) (<= in1 in2)))"));
        assert!(r.is_feasible());
    }

    #[test]
    fn const_diff_progression() {
        let r = check_atoms(&atoms(
            "(assert (and (= (- in2 in1) (- in1 in0)) (and (>= (- in3 in2) (- in1 in0)) (> (- in3 in2) (- in1 in0)))))",
        ));
        let LinearResult::Feasible(m) = r else { panic!("{r:?}") };
        assert!(m[&Var(3)] - m[&Var(2)] > m[&Var(1)] - m[&Var(0)]);
    }

    #[test]
    fn nonlinear_is_unsupported() {
        let r = check_atoms(&atoms("(assert (= in2 (* in0 in1)))"));
        assert!(matches!(r, LinearResult::Unsupported(_)));
    }

    #[test]
    fn rounding_helpers() {
        assert_eq!(floor_div(7, 2), 3);
        assert_eq!(floor_div(-7, 2), -4);
        assert_eq!(ceil_div(7, 2), 4);
        assert_eq!(ceil_div(-7, 2), -3);
        assert_eq!(floor_div(7, -2), -4);
        assert_eq!(ceil_div(7, -2), -3);
    }
}
