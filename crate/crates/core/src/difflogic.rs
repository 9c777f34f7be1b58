//! Integer difference logic: conjunctions of `x - y <= c`.
//!
//! Atoms are normalized to [`DiffConstraint`]s against a distinguished
//! [`Node::Zero`] for variable-vs-constant comparisons. Feasibility is a
//! negative-cycle check on the constraint graph (edge `y -> x` with weight
//! `c`). [`brute_force_sat`] is a finite-domain enumerator kept separate from
//! the graph code so the two can cross-check each other.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

use crate::linear::{atom_constraints, LinConstraint};
use crate::smtlib::{Atom, Formula, Model, Var};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Node {
    Zero,
    Var(Var),
}

impl fmt::Display for Node {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Node::Zero => f.write_str("ZERO"),
            Node::Var(v) => write!(f, "{v}"),
        }
    }
}

/// `x - y <= c`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct DiffConstraint {
    pub x: Node,
    pub y: Node,
    pub c: i64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("{node} - {node} <= {c} can never hold")]
pub struct Infeasible {
    pub node: Node,
    pub c: i64,
}

impl DiffConstraint {
    /// Rejects `x - x <= c` with `c < 0`.
    pub fn new(x: Node, y: Node, c: i64) -> Result<DiffConstraint, Infeasible> {
        if x == y && c < 0 {
            Err(Infeasible { node: x, c })
        } else {
            Ok(DiffConstraint { x, y, c })
        }
    }

    pub fn var(x: u32, y: u32, c: i64) -> DiffConstraint {
        DiffConstraint { x: Node::Var(Var(x)), y: Node::Var(Var(y)), c }
    }

    pub fn holds(&self, model: &Model) -> bool {
        let val = |n: Node| match n {
            Node::Zero => 0i128,
            Node::Var(v) => i128::from(model.get(&v).copied().unwrap_or(0)),
        };
        val(self.x) - val(self.y) <= i128::from(self.c)
    }

    /// `not (x - y <= c)` over the integers is `y - x <= -c - 1`.
    pub fn complement(&self) -> Option<DiffConstraint> {
        let c = self.c.checked_neg()?.checked_sub(1)?;
        Some(DiffConstraint { x: self.y, y: self.x, c })
    }
}

impl fmt::Display for DiffConstraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} - {} <= {}", self.x, self.y, self.c)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Normalized {
    Constraints(Vec<DiffConstraint>),
    Unsupported(String),
}

fn to_diff(c: &LinConstraint) -> Result<Vec<DiffConstraint>, String> {
    let halves = c.halves().ok_or_else(|| format!("overflow in `{c}`"))?;
    let mut out = Vec::new();
    for h in halves {
        let terms: Vec<(Var, i64)> = h.coeffs.iter().map(|(v, k)| (*v, *k)).collect();
        let dc = match terms.as_slice() {
            [] if h.bound >= 0 => continue,
            [] => DiffConstraint { x: Node::Zero, y: Node::Zero, c: -1 },
            [(v, 1)] => DiffConstraint { x: Node::Var(*v), y: Node::Zero, c: h.bound },
            [(v, -1)] => DiffConstraint { x: Node::Zero, y: Node::Var(*v), c: h.bound },
            [(a, 1), (b, -1)] => DiffConstraint { x: Node::Var(*a), y: Node::Var(*b), c: h.bound },
            [(a, -1), (b, 1)] => DiffConstraint { x: Node::Var(*b), y: Node::Var(*a), c: h.bound },
            _ => return Err(format!("`{h}` is outside difference logic")),
        };
        out.push(dc);
    }
    Ok(out)
}

/// Normalizes comparison atoms into difference constraints.
///
/// A ground atom that is false becomes the self-loop `ZERO - ZERO <= -1`,
/// which [`check_feasible`] reports as a one-edge negative cycle.
pub fn normalize_atoms(atoms: &[Atom]) -> Normalized {
    let mut out = Vec::new();
    for atom in atoms {
        let lin = match atom_constraints(atom) {
            Ok(l) => l,
            Err(e) => return Normalized::Unsupported(e.to_string()),
        };
        for c in &lin {
            match to_diff(c) {
                Ok(mut d) => out.append(&mut d),
                Err(reason) => return Normalized::Unsupported(format!("{atom}: {reason}")),
            }
        }
    }
    Normalized::Constraints(out)
}

/// Normalizes a formula that must be a pure conjunction of atoms.
pub fn normalize_formula(f: &Formula) -> Normalized {
    match f.conjunct_atoms() {
        Some(atoms) => normalize_atoms(&atoms),
        None => Normalized::Unsupported("formula is not a conjunction of atoms".into()),
    }
}


#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FeasibilityResult {
    Feasible(Model),
    Infeasible(Vec<DiffConstraint>),
    Unsupported(String),
}

impl FeasibilityResult {
    pub fn is_feasible(&self) -> bool {
        matches!(self, FeasibilityResult::Feasible(_))
    }
}

/// Negative-cycle check (Bellman-Ford from a virtual source).
///
/// On success the model is the shortest-path distances shifted so that
/// `ZERO` sits at 0. On failure the returned constraints form a cycle in the
/// graph whose constants sum to a negative number.
pub fn check_feasible(cs: &[DiffConstraint]) -> FeasibilityResult {
    let mut nodes: BTreeSet<Node> = BTreeSet::from([Node::Zero]);
    for c in cs {
        nodes.insert(c.x);
        nodes.insert(c.y);
    }
    let nodes: Vec<Node> = nodes.into_iter().collect();
    let index: BTreeMap<Node, usize> = nodes.iter().enumerate().map(|(i, n)| (*n, i)).collect();
    let edges: Vec<(usize, usize, i128)> =
        cs.iter().map(|c| (index[&c.y], index[&c.x], i128::from(c.c))).collect();

    let n = nodes.len();
    let mut dist = vec![0i128; n];
    let mut pred: Vec<Option<usize>> = vec![None; n];
    let mut last_relaxed = None;
    for _ in 0..n {
        last_relaxed = None;
        for (e, &(from, to, w)) in edges.iter().enumerate() {
            if dist[from] + w < dist[to] {
                dist[to] = dist[from] + w;
                pred[to] = Some(e);
                last_relaxed = Some(to);
            }
        }
        if last_relaxed.is_none() {
            break;
        }
    }

    let Some(mut v) = last_relaxed else {
        let zero = dist[index[&Node::Zero]];
        let model = nodes
            .iter()
            .zip(&dist)
            .filter_map(|(node, d)| match node {
                Node::Var(var) => Some((*var, i64::try_from(d - zero).ok()?)),
                Node::Zero => None,
            })
            .collect::<Model>();
        return if cs.iter().all(|c| c.holds(&model)) {
            FeasibilityResult::Feasible(model)
        } else {
            FeasibilityResult::Unsupported("model out of range".into())
        };
    };

    // walk back n steps to land on the cycle, then collect it
    for _ in 0..n {
        v = edges[pred[v].expect("relaxed node has a predecessor")].0;
    }
    let start = v;
    let mut cycle = Vec::new();
    loop {
        let e = pred[v].expect("cycle node has a predecessor");
        cycle.push(cs[e]);
        v = edges[e].0;
        if v == start {
            break;
        }
    }
    cycle.reverse();
    FeasibilityResult::Infeasible(cycle)
}

/// Convenience: normalize then check.
pub fn check_atoms(atoms: &[Atom]) -> FeasibilityResult {
    match normalize_atoms(atoms) {
        Normalized::Constraints(cs) => check_feasible(&cs),
        Normalized::Unsupported(r) => FeasibilityResult::Unsupported(r),
    }
}

/// Largest variable-domain span that still satisfies the small-model bound
/// for a conjunction over `vars` variables whose constants are at most `k` in
/// absolute value: `(vars + 1) * (k + 1)`.
pub fn small_model_bound(vars: usize, k: u64) -> i64 {
    let b = (vars as u64 + 1).saturating_mul(k.saturating_add(1));
    i64::try_from(b).unwrap_or(i64::MAX)
}

/// Maximum number of (partial) assignments [`brute_force_sat`] will visit.
pub const BRUTE_FORCE_BUDGET: u64 = 10_000_000;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BruteForce {
    Sat(Model),
    Unsat,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BruteForceError {
    #[error("search exceeded {budget} assignments over [{lo}, {hi}]")]
    DomainTooLarge { lo: i64, hi: i64, budget: u64 },
    #[error("empty domain [{lo}, {hi}]")]
    EmptyDomain { lo: i64, hi: i64 },
}

/// Exhaustive search over `[lo, hi]` for every free variable of `f`.
///
/// Variables are bound most-constrained first (ties by index) and values
/// ascend, so the result is deterministic. Conjuncts are checked as soon as
/// all their variables are bound, which keeps unsatisfiable prefixes cheap;
/// the search gives up after [`BRUTE_FORCE_BUDGET`] visited assignments.
pub fn brute_force_sat(f: &Formula, lo: i64, hi: i64) -> Result<BruteForce, BruteForceError> {
    brute_force_sat_with_budget(f, lo, hi, BRUTE_FORCE_BUDGET)
}

pub fn brute_force_sat_with_budget(
    f: &Formula,
    lo: i64,
    hi: i64,
    budget: u64,
) -> Result<BruteForce, BruteForceError> {
    if lo > hi {
        return Err(BruteForceError::EmptyDomain { lo, hi });
    }
    let conjuncts: Vec<(Formula, BTreeSet<Var>)> = f
        .flatten_conjunction()
        .into_iter()
        .map(|c| {
            let vs = c.free_vars();
            (c, vs)
        })
        .collect();
    let vars = search_order(&f.free_vars(), &conjuncts);
    let position: BTreeMap<Var, usize> = vars.iter().enumerate().map(|(i, v)| (*v, i)).collect();
    // conjuncts grouped by the position of their last variable (+1; 0 = ground)
    let mut checks: Vec<Vec<Formula>> = vec![Vec::new(); vars.len() + 1];
    for (c, vs) in conjuncts {
        let last = vs.iter().map(|v| position[v] + 1).max().unwrap_or(0);
        checks[last].push(c);
    }
    let mut search = Search { vars: &vars, checks: &checks, lo, hi, budget, visited: 0, model: Model::new() };
    if !search.ok_at(0) {
        return Ok(BruteForce::Unsat);
    }
    match search.descend(0) {
        Some(true) => Ok(BruteForce::Sat(search.model)),
        Some(false) => Ok(BruteForce::Unsat),
        None => Err(BruteForceError::DomainTooLarge { lo, hi, budget }),
    }
}

/// Greedy variable order: next is the variable completing the most
/// conjuncts, then the one occurring in the most conjuncts, then the lowest
/// index. Contradictions among a few variables surface near the root instead
/// of beneath every value of the unrelated ones.
fn search_order(all: &BTreeSet<Var>, conjuncts: &[(Formula, BTreeSet<Var>)]) -> Vec<Var> {
    let mut placed = BTreeSet::new();
    let mut order = Vec::with_capacity(all.len());
    while order.len() < all.len() {
        let key = |v: &Var| {
            let mut completes = 0usize;
            let mut occurs = 0usize;
            for (_, vs) in conjuncts.iter().filter(|(_, vs)| vs.contains(v)) {
                occurs += 1;
                if vs.iter().all(|w| w == v || placed.contains(w)) {
                    completes += 1;
                }
            }
            (completes, occurs, std::cmp::Reverse(*v))
        };
        let next = *all.iter().filter(|v| !placed.contains(*v)).max_by_key(|v| key(v)).expect("unplaced variable left");
        placed.insert(next);
        order.push(next);
    }
    order
}

struct Search<'a> {
    vars: &'a [Var],
    checks: &'a [Vec<Formula>],
    lo: i64,
    hi: i64,
    budget: u64,
    visited: u64,
    model: Model,
}

impl Search<'_> {
    fn ok_at(&self, level: usize) -> bool {
        self.checks[level].iter().all(|c| c.eval(&self.model))
    }

    /// `None` when the budget runs out.
    fn descend(&mut self, depth: usize) -> Option<bool> {
        if depth == self.vars.len() {
            return Some(true);
        }
        let var = self.vars[depth];
        for value in self.lo..=self.hi {
            self.visited += 1;
            if self.visited > self.budget {
                return None;
            }
            self.model.insert(var, value);
            if self.ok_at(depth + 1) && self.descend(depth + 1)? {
                return Some(true);
            }
        }
        self.model.remove(&var);
        Some(false)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::smtlib::{parse_formula, Cmp, Term};

    fn z(v: u32) -> Node {
        Node::Var(Var(v))
    }

    #[test]
    fn normalize_le() {
        let a = Atom::new(Cmp::Le, Term::var(0), Term::var(1));
        assert_eq!(normalize_atoms(&[a]), Normalized::Constraints(vec![DiffConstraint::var(0, 1, 0)]));
    }

    #[test]
    fn normalize_equality_with_constant() {
        let a = Atom::new(Cmp::Eq, Term::var(0), Term::Int(100));
        assert_eq!(
            normalize_atoms(&[a]),
            Normalized::Constraints(vec![
                DiffConstraint { x: z(0), y: Node::Zero, c: 100 },
                DiffConstraint { x: Node::Zero, y: z(0), c: -100 },
            ])
        );
    }

    #[test]
    fn normalize_strict_and_mirrored() {
        let lt = Atom::new(Cmp::Lt, Term::var(0), Term::var(1));
        let ge = Atom::new(Cmp::Ge, Term::var(0), Term::var(1));
        let gt = Atom::new(Cmp::Gt, Term::var(2), Term::Int(5));
        assert_eq!(
            normalize_atoms(&[lt, ge, gt]),
            Normalized::Constraints(vec![
                DiffConstraint::var(0, 1, -1),
                DiffConstraint::var(1, 0, 0),
                DiffConstraint { x: Node::Zero, y: z(2), c: -6 },
            ])
        );
    }

    #[test]
    fn three_variable_atom_is_unsupported() {
        let a = Atom::new(Cmp::Eq, Term::var(2), Term::add(Term::var(1), Term::var(0)));
        assert!(matches!(normalize_atoms(&[a]), Normalized::Unsupported(_)));
        let m = Atom::new(Cmp::Le, Term::mul(Term::var(0), Term::var(1)), Term::Int(3));
        assert!(matches!(normalize_atoms(&[m]), Normalized::Unsupported(_)));
    }

    #[test]
    fn construction_rejects_negative_self_loop() {
        assert!(DiffConstraint::new(z(0), z(0), -1).is_err());
        assert!(DiffConstraint::new(z(0), z(0), 0).is_ok());
        assert!(DiffConstraint::new(z(0), z(1), -1).is_ok());
    }

    #[test]
    fn two_cycle_is_infeasible() {
        let cs = [DiffConstraint::var(0, 1, -1), DiffConstraint::var(1, 0, -1)];
        let FeasibilityResult::Infeasible(cycle) = check_feasible(&cs) else { panic!() };
        assert_eq!(cycle.iter().map(|c| c.c).sum::<i64>(), -2);
        assert_eq!(cycle.len(), 2);
    }

    #[test]
    fn three_cycle_is_infeasible() {
        let cs = [DiffConstraint::var(0, 1, 0), DiffConstraint::var(1, 2, 0), DiffConstraint::var(2, 0, -1)];
        let FeasibilityResult::Infeasible(cycle) = check_feasible(&cs) else { panic!() };
        assert_eq!(cycle.iter().map(|c| c.c).sum::<i64>(), -1);
        assert_eq!(cycle.len(), 3);
    }

    #[test]
    fn single_edge_feasible() {
        let cs = [DiffConstraint::var(0, 1, 0)];
        let FeasibilityResult::Feasible(m) = check_feasible(&cs) else { panic!() };
        assert!(m[&Var(0)] <= m[&Var(1)]);
        // every {0,1}^2 point with in0 <= in1 exists, so brute force agrees
        let f = parse_formula("(assert (<= in0 in1))").unwrap();
        assert!(matches!(brute_force_sat(&f, 0, 1), Ok(BruteForce::Sat(_))));
    }

    #[test]
    fn ground_false_atom_is_a_self_loop_cycle() {
        let a = Atom::new(Cmp::Lt, Term::Int(1), Term::Int(0));
        let FeasibilityResult::Infeasible(cycle) = check_atoms(&[a]) else { panic!() };
        assert_eq!(cycle, vec![DiffConstraint { x: Node::Zero, y: Node::Zero, c: -1 }]);
    }

    #[test]
    fn brute_force_examples() {
        let qs = parse_formula("(assert (and (and (<= in0 in2) (<= in1 in2)) (<= in0 in1)))").unwrap();
        let all_zero: Model = [(Var(0), 0), (Var(1), 0), (Var(2), 0)].into();
        assert_eq!(brute_force_sat(&qs, 0, 2), Ok(BruteForce::Sat(all_zero.clone())));
        let contra = parse_formula("(assert (and (<= in0 in1) (< in1 in0)))").unwrap();
        assert_eq!(brute_force_sat(&contra, 0, 1), Ok(BruteForce::Unsat));
        let fib = parse_formula("(assert (= in2 (+ in0 in1)))").unwrap();
        assert_eq!(brute_force_sat(&fib, 0, 2), Ok(BruteForce::Sat(all_zero)));
    }

    #[test]
    fn brute_force_guard() {
        let f = parse_formula("(assert (and (< in0 in1) (and (< in1 in2) (< in2 in0))))").unwrap();
        assert!(matches!(
            brute_force_sat_with_budget(&f, -1000, 1000, 10_000),
            Err(BruteForceError::DomainTooLarge { .. })
        ));
        assert!(matches!(brute_force_sat(&f, 1, 0), Err(BruteForceError::EmptyDomain { .. })));
    }

    #[test]
    fn brute_force_is_lexicographic() {
        let f = parse_formula("(assert (and (> in0 1) (< in1 in0)))").unwrap();
        let expected: Model = [(Var(0), 2), (Var(1), -3)].into();
        assert_eq!(brute_force_sat(&f, -3, 3), Ok(BruteForce::Sat(expected)));
    }
}
