#![allow(dead_code)]

use rand::seq::SliceRandom;
use rand::Rng;

use wcbench::smtlib::{Atom, Cmp, Formula, Model, Term, Var};

pub const CMPS: [Cmp; 5] = [Cmp::Le, Cmp::Lt, Cmp::Ge, Cmp::Gt, Cmp::Eq];

/// A difference-logic atom: `x op y`, `x op c` or `(x - y) op c`.
pub fn random_dl_atom<R: Rng>(rng: &mut R, vars: u32, k: i64, ops: &[Cmp]) -> Atom {
    let op = *ops.choose(rng).unwrap();
    let x = rng.gen_range(0..vars);
    let mut y = rng.gen_range(0..vars);
    if vars > 1 {
        while y == x {
            y = rng.gen_range(0..vars);
        }
    }
    let c = rng.gen_range(-k..=k);
    match rng.gen_range(0..3) {
        0 if vars > 1 => Atom::new(op, Term::var(x), Term::var(y)),
        1 | 0 => Atom::new(op, Term::var(x), Term::Int(c)),
        _ => Atom::new(op, Term::sub(Term::var(x), Term::var(y)), Term::Int(c)),
    }
}

pub fn random_dl_conjunction<R: Rng>(rng: &mut R, vars: u32, atoms: usize, k: i64) -> Vec<Atom> {
    (0..atoms).map(|_| random_dl_atom(rng, vars, k, &CMPS)).collect()
}

pub fn conj(atoms: &[Atom]) -> Formula {
    Formula::conjunction(atoms.iter().cloned().map(Formula::Atom).collect()).left_folded()
}

/// Random binary `and` tree over `leaves`, order preserved.
pub fn reassociate<R: Rng>(rng: &mut R, mut leaves: Vec<Formula>) -> Formula {
    match leaves.len() {
        0 => Formula::True,
        1 => leaves.pop().unwrap(),
        n => {
            let split = rng.gen_range(1..n);
            let right = leaves.split_off(split);
            Formula::And(vec![reassociate(rng, leaves), reassociate(rng, right)])
        }
    }
}

/// Same atoms, shuffled, some duplicated, re-bracketed.
pub fn equivalent_variant<R: Rng>(rng: &mut R, atoms: &[Atom]) -> Formula {
    let mut leaves: Vec<Formula> = atoms.iter().cloned().map(Formula::Atom).collect();
    for _ in 0..rng.gen_range(0..=2) {
        if let Some(a) = atoms.choose(rng) {
            leaves.push(Formula::Atom(a.clone()));
        }
    }
    leaves.shuffle(rng);
    reassociate(rng, leaves)
}

/// Deletes one atom or tightens one inequality by one.
pub fn mutated<R: Rng>(rng: &mut R, atoms: &[Atom]) -> Formula {
    let mut atoms = atoms.to_vec();
    let i = rng.gen_range(0..atoms.len());
    let a = atoms[i].clone();
    let tightened = match a.op {
        Cmp::Le | Cmp::Lt => Some(Atom::new(a.op, a.lhs.clone(), Term::sub(a.rhs.clone(), Term::Int(1)))),
        Cmp::Ge | Cmp::Gt => Some(Atom::new(a.op, a.lhs.clone(), Term::add(a.rhs.clone(), Term::Int(1)))),
        Cmp::Eq => None,
    };
    match tightened {
        Some(t) if atoms.len() == 1 || rng.gen_bool(0.5) => atoms[i] = t,
        _ if atoms.len() > 1 => {
            atoms.remove(i);
        }
        _ => atoms[i] = Atom::new(Cmp::Eq, a.lhs.clone(), Term::add(a.rhs.clone(), Term::Int(1))),
    }
    let mut leaves: Vec<Formula> = atoms.into_iter().map(Formula::Atom).collect();
    leaves.shuffle(rng);
    reassociate(rng, leaves)
}

/// Every assignment of `vars` variables over `[-b, b]`.
pub fn for_each_model(vars: u32, b: i64, mut f: impl FnMut(&Model) -> bool) -> bool {
    let mut vals = vec![-b; vars as usize];
    loop {
        let m: Model = vals.iter().enumerate().map(|(i, &x)| (Var(i as u32), x)).collect();
        if f(&m) {
            return true;
        }
        let mut i = 0;
        loop {
            if i == vals.len() {
                return false;
            }
            if vals[i] < b {
                vals[i] += 1;
                break;
            }
            vals[i] = -b;
            i += 1;
        }
    }
}

/// Independent enumeration: some point in the box separates `a` and `b`.
pub fn differ_in_box(a: &Formula, b: &Formula, vars: u32, bound: i64) -> bool {
    for_each_model(vars, bound, |m| a.eval(m) != b.eval(m))
}

pub fn satisfiable_in_box(a: &Formula, vars: u32, bound: i64) -> bool {
    for_each_model(vars, bound, |m| a.eval(m))
}

/// Span covering the small-model bound of `a and not b` when `a` and `b` have
/// constants up to `k`, before tightening. Tightening adds one to a constant,
/// negating an integer inequality adds one more.
pub fn box_bound(vars: u32, k: i64) -> i64 {
    (vars as i64 + 1) * (k + 3)
}
