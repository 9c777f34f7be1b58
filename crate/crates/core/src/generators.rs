//! Ground-truth worst-case constraints for the registered programs.
//!
//! Only the QuickSort family is pinned down by published strings; every other
//! generator is reconstructed from a one-line program description and is
//! certified against the toy program of the same name in
//! [`crate::explorer::toys`].

use thiserror::Error;

use crate::smtlib::{Cmp, Formula, Term};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GenerateError {
    #[error("input size {n} outside 1..={max} for {program}")]
    UnsupportedSize { program: String, n: usize, max: usize },
    #[error("unknown program `{0}`")]
    UnknownProgram(String),
}

#[derive(Debug, Clone, Copy)]
pub struct ProgramSpec {
    pub name: &'static str,
    pub description: &'static str,
    /// Below this size the constraint is vacuous.
    pub min_n: usize,
    pub max_supported_n: usize,
    generator: fn(usize) -> Vec<Formula>,
}

impl ProgramSpec {
    pub fn generate(&self, n: usize) -> Result<Formula, GenerateError> {
        generate(self, n)
    }
}

impl PartialEq for ProgramSpec {
    fn eq(&self, other: &Self) -> bool {
        self.name == other.name
    }
}

pub const DEFAULT_MAX_N: usize = 64;

fn v(i: usize) -> Term {
    Term::var(i as u32)
}

fn atom(op: Cmp, lhs: Term, rhs: Term) -> Formula {
    Formula::atom(op, lhs, rhs)
}

fn quicksort(n: usize) -> Vec<Formula> {
    let mut out = Vec::with_capacity(n * n.saturating_sub(1) / 2);
    for j in (1..n).rev() {
        for i in 0..j {
            out.push(atom(Cmp::Le, v(i), v(j)));
        }
    }
    out
}

fn bubble_sort(n: usize) -> Vec<Formula> {
    let mut out = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            out.push(atom(Cmp::Gt, v(i), v(j)));
        }
    }
    out
}

fn same_hundred(n: usize) -> Vec<Formula> {
    (0..n).map(|i| atom(Cmp::Eq, v(i), Term::Int(100))).collect()
}

fn weird_fibonacci(n: usize) -> Vec<Formula> {
    (2..n).map(|i| atom(Cmp::Eq, v(i), Term::add(v(i - 1), v(i - 2)))).collect()
}

fn weird_const_diff(n: usize) -> Vec<Formula> {
    (2..n)
        .map(|i| atom(Cmp::Eq, Term::sub(v(i), v(i - 1)), Term::sub(v(1), v(0))))
        .collect()
}

fn weird_times(n: usize) -> Vec<Formula> {
    (1..n)
        .map(|i| atom(Cmp::Eq, v(i), Term::mul(v(0), Term::Int(i as i64 + 1))))
        .collect()
}

fn simple_ascending_last(n: usize) -> Vec<Formula> {
    vec![atom(Cmp::Gt, v(n - 1), v(n - 2))]
}

fn complex_palindrome(n: usize) -> Vec<Formula> {
    (0..n / 2).map(|i| atom(Cmp::Eq, v(i), v(n - 1 - i))).collect()
}

static REGISTRY: [ProgramSpec; 8] = [
    ProgramSpec {
        name: "QuickSort",
        description: "Recursive sorting with last-element pivot partitioning; worst case is already-sorted input.",
        min_n: 2,
        max_supported_n: DEFAULT_MAX_N,
        generator: quicksort,
    },
    ProgramSpec {
        name: "BubbleSort",
        description: "Nested-loop adjacent-swap sort; worst case is strictly descending input.",
        min_n: 2,
        max_supported_n: DEFAULT_MAX_N,
        generator: bubble_sort,
    },
    ProgramSpec {
        name: "SameHundred",
        description: "Runs the heavy loop only when every element equals 100.",
        min_n: 1,
        max_supported_n: DEFAULT_MAX_N,
        generator: same_hundred,
    },
    ProgramSpec {
        name: "WeirdFibonacci",
        description: "Runs the heavy loop only when each element is the sum of the two before it.",
        min_n: 3,
        max_supported_n: DEFAULT_MAX_N,
        generator: weird_fibonacci,
    },
    ProgramSpec {
        name: "WeirdConstDiff",
        description: "Runs the heavy loop only for arithmetic progressions.",
        min_n: 3,
        max_supported_n: DEFAULT_MAX_N,
        generator: weird_const_diff,
    },
    ProgramSpec {
        name: "WeirdTimes",
        description: "Runs the heavy loop only when element i equals the first element times i + 1.",
        min_n: 2,
        max_supported_n: DEFAULT_MAX_N,
        generator: weird_times,
    },
    ProgramSpec {
        name: "SimpleAscendingLast",
        description: "Runs the heavy loop only when the last element exceeds its predecessor.",
        min_n: 2,
        max_supported_n: DEFAULT_MAX_N,
        generator: simple_ascending_last,
    },
    ProgramSpec {
        name: "ComplexPalindrome",
        description: "Runs the heavy loop only for palindromic input.",
        min_n: 2,
        max_supported_n: DEFAULT_MAX_N,
        generator: complex_palindrome,
    },
];

pub fn list_programs() -> &'static [ProgramSpec] {
    &REGISTRY
}

pub fn find_program(name: &str) -> Result<&'static ProgramSpec, GenerateError> {
    REGISTRY
        .iter()
        .find(|p| p.name == name)
        .ok_or_else(|| GenerateError::UnknownProgram(name.into()))
}

/// Worst-case constraint for `program` at input size `n`: a left-folded
/// conjunction in the program's atom order, or `True` below `min_n`.
pub fn generate(program: &ProgramSpec, n: usize) -> Result<Formula, GenerateError> {
    if n == 0 || n > program.max_supported_n {
        return Err(GenerateError::UnsupportedSize {
            program: program.name.into(),
            n,
            max: program.max_supported_n,
        });
    }
    if n < program.min_n {
        return Ok(Formula::True);
    }
    Ok(Formula::conjunction((program.generator)(n)).left_folded())
}

pub fn atom_count(program: &ProgramSpec, n: usize) -> Result<usize, GenerateError> {
    Ok(generate(program, n)?.flatten_conjunction().len())
}
