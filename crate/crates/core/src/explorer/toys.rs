//! Hand-written toy versions of the registered programs, plus two shapes
//! used to test the explorer itself.

use super::{Cond, CostModel, IntExpr, Procedure, Stmt, SymExpr, ToyProgram};
use crate::smtlib::Cmp;

use IntExpr::{Local, N};

/// Comparisons and swaps cost one unit each.
pub const COMPARISONS_AND_SWAPS: CostModel =
    CostModel { branch: 1, swap: 1, assign: 0, call: 0, charge_unit: 0 };

/// Guarded heavy loop: the charge dwarfs everything else.
pub const HEAVY_LOOP: CostModel =
    CostModel { branch: 1, swap: 0, assign: 0, call: 0, charge_unit: 1000 };

fn cell(i: IntExpr) -> SymExpr {
    SymExpr::cell(i)
}

fn int(i: IntExpr) -> SymExpr {
    SymExpr::Int(i)
}

fn main_only(name: &str, locals: usize, body: Stmt, cost_model: CostModel) -> ToyProgram {
    ToyProgram {
        name: name.into(),
        procedures: vec![Procedure { name: "main".into(), params: 0, locals, body }],
        cost_model,
    }
}

/// `for i in from..n { if !(cond i) return }; charge`.
fn check_all_then_charge(name: &str, from: i64, cond: impl Fn(IntExpr) -> Cond) -> ToyProgram {
    let body = Stmt::Seq(vec![
        Stmt::for_range(
            0,
            IntExpr::Const(from),
            N,
            Stmt::if_else(cond(Local(0)), Stmt::Nop, Stmt::Return),
        ),
        Stmt::Charge(1),
    ]);
    main_only(name, 1, body, HEAVY_LOOP)
}

/// Recursive quicksort with Lomuto partitioning around the last element.
pub fn quicksort() -> ToyProgram {
    // locals: 0 lo, 1 hi, 2 i, 3 j
    let (lo, hi, i, j) = (Local(0), Local(1), Local(2), Local(3));
    let partition_loop = Stmt::for_range(
        3,
        lo.clone(),
        hi.clone(),
        Stmt::if_then(
            Cond::new(Cmp::Le, cell(j.clone()), cell(hi.clone())),
            Stmt::Seq(vec![Stmt::Swap(i.clone(), j), Stmt::SetLocal(2, i.clone().plus(1))]),
        ),
    );
    let sort = Stmt::if_then(
        Cond::new(Cmp::Lt, int(lo.clone()), int(hi.clone())),
        Stmt::Seq(vec![
            Stmt::SetLocal(2, lo.clone()),
            partition_loop,
            Stmt::Swap(i.clone(), hi.clone()),
            Stmt::Call { proc: 1, args: vec![lo, i.clone().minus(1)] },
            Stmt::Call { proc: 1, args: vec![i.plus(1), hi] },
        ]),
    );
    ToyProgram {
        name: "QuickSort".into(),
        procedures: vec![
            Procedure {
                name: "main".into(),
                params: 0,
                locals: 0,
                body: Stmt::Call { proc: 1, args: vec![IntExpr::Const(0), N.minus(1)] },
            },
            Procedure { name: "sort".into(), params: 2, locals: 4, body: sort },
        ],
        cost_model: COMPARISONS_AND_SWAPS,
    }
}

/// Nested-loop bubble sort that swaps adjacent out-of-order pairs.
pub fn bubble_sort() -> ToyProgram {
    let (i, j) = (Local(0), Local(1));
    let inner = Stmt::for_range(
        1,
        IntExpr::Const(0),
        IntExpr::sub(N.minus(1), i),
        Stmt::if_then(
            Cond::new(Cmp::Gt, cell(j.clone()), cell(j.clone().plus(1))),
            Stmt::Swap(j.clone(), j.plus(1)),
        ),
    );
    let body = Stmt::for_range(0, IntExpr::Const(0), N.minus(1), inner);
    main_only("BubbleSort", 2, body, COMPARISONS_AND_SWAPS)
}

pub fn same_hundred() -> ToyProgram {
    check_all_then_charge("SameHundred", 0, |i| {
        Cond::new(Cmp::Eq, cell(i), int(IntExpr::Const(100)))
    })
}

pub fn weird_fibonacci() -> ToyProgram {
    check_all_then_charge("WeirdFibonacci", 2, |i| {
        Cond::new(
            Cmp::Eq,
            cell(i.clone()),
            SymExpr::add(cell(i.clone().minus(1)), cell(i.minus(2))),
        )
    })
}

pub fn weird_const_diff() -> ToyProgram {
    check_all_then_charge("WeirdConstDiff", 2, |i| {
        Cond::new(
            Cmp::Eq,
            SymExpr::sub(cell(i.clone()), cell(i.minus(1))),
            SymExpr::sub(cell(IntExpr::Const(1)), cell(IntExpr::Const(0))),
        )
    })
}

pub fn weird_times() -> ToyProgram {
    check_all_then_charge("WeirdTimes", 1, |i| {
        Cond::new(
            Cmp::Eq,
            cell(i.clone()),
            SymExpr::mul(cell(IntExpr::Const(0)), int(i.plus(1))),
        )
    })
}

pub fn simple_ascending_last() -> ToyProgram {
    let body = Stmt::if_then(
        Cond::new(Cmp::Ge, int(N), int(IntExpr::Const(2))),
        Stmt::if_then(
            Cond::new(Cmp::Gt, cell(N.minus(1)), cell(N.minus(2))),
            Stmt::Charge(1),
        ),
    );
    main_only("SimpleAscendingLast", 0, body, HEAVY_LOOP)
}

pub fn complex_palindrome() -> ToyProgram {
    let i = Local(0);
    let body = Stmt::Seq(vec![
        Stmt::for_range(
            0,
            IntExpr::Const(0),
            IntExpr::Div(Box::new(N), 2),
            Stmt::if_else(
                Cond::new(Cmp::Eq, cell(i.clone()), cell(IntExpr::sub(N.minus(1), i))),
                Stmt::Nop,
                Stmt::Return,
            ),
        ),
        Stmt::Charge(1),
    ]);
    main_only("ComplexPalindrome", 1, body, HEAVY_LOOP)
}

/// Toy counterpart of a registered program, by registry name.
pub fn by_name(name: &str) -> Option<ToyProgram> {
    Some(match name {
        "QuickSort" => quicksort(),
        "BubbleSort" => bubble_sort(),
        "SameHundred" => same_hundred(),
        "WeirdFibonacci" => weird_fibonacci(),
        "WeirdConstDiff" => weird_const_diff(),
        "WeirdTimes" => weird_times(),
        "SimpleAscendingLast" => simple_ascending_last(),
        "ComplexPalindrome" => complex_palindrome(),
        _ => return None,
    })
}

/// `n` charges and nothing symbolic.
pub fn straight_line() -> ToyProgram {
    let body = Stmt::for_range(0, IntExpr::Const(0), N, Stmt::Charge(1));
    main_only(
        "StraightLine",
        1,
        body,
        CostModel { branch: 0, swap: 0, assign: 0, call: 0, charge_unit: 1 },
    )
}

/// One branch per disjoint input pair `(in{2i}, in{2i+1})`, so `n / 2`
/// independent branches.
pub fn independent_pairs() -> ToyProgram {
    let i = Local(0);
    let two_i = IntExpr::add(i.clone(), i);
    let body = Stmt::for_range(
        0,
        IntExpr::Const(0),
        IntExpr::Div(Box::new(N), 2),
        Stmt::if_then(
            Cond::new(Cmp::Le, cell(two_i.clone()), cell(two_i.plus(1))),
            Stmt::Charge(1),
        ),
    );
    main_only(
        "IndependentPairs",
        1,
        body,
        CostModel { branch: 1, swap: 0, assign: 0, call: 0, charge_unit: 1 },
    )
}
