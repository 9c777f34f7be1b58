//! Small symbolic executor for worst-case path search.
//!
//! A [`ToyProgram`] manipulates one symbolic integer array whose cells start
//! out as the inputs `in0 .. in{n-1}`, plus concrete integer locals. Loop
//! bounds and indices are always concrete, so the only source of forking is
//! an `If` whose condition mentions array cells. Paths are explored depth
//! first by re-executing the program under a prefix of branch decisions,
//! which keeps recursion in the toy programs trivial to support.

pub mod toys;

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::equivalence::{Checker, Feasibility, SolverConfig, Strategy, UnknownReason};
use crate::smtlib::{Atom, Cmp, Formula, Term};

/// Concrete integer expression over `n` and the current frame's locals.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum IntExpr {
    Const(i64),
    N,
    Local(usize),
    Add(Box<IntExpr>, Box<IntExpr>),
    Sub(Box<IntExpr>, Box<IntExpr>),
    /// Floor division by a positive constant.
    Div(Box<IntExpr>, i64),
}

#[allow(clippy::should_implement_trait)]
impl IntExpr {
    pub fn add(a: IntExpr, b: IntExpr) -> IntExpr {
        IntExpr::Add(Box::new(a), Box::new(b))
    }

    pub fn sub(a: IntExpr, b: IntExpr) -> IntExpr {
        IntExpr::Sub(Box::new(a), Box::new(b))
    }

    pub fn plus(self, k: i64) -> IntExpr {
        IntExpr::add(self, IntExpr::Const(k))
    }

    pub fn minus(self, k: i64) -> IntExpr {
        IntExpr::sub(self, IntExpr::Const(k))
    }
}

/// Value that may depend on the inputs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SymExpr {
    Cell(IntExpr),
    Int(IntExpr),
    Add(Box<SymExpr>, Box<SymExpr>),
    Sub(Box<SymExpr>, Box<SymExpr>),
    Mul(Box<SymExpr>, Box<SymExpr>),
}

#[allow(clippy::should_implement_trait)]
impl SymExpr {
    pub fn cell(i: IntExpr) -> SymExpr {
        SymExpr::Cell(i)
    }

    pub fn add(a: SymExpr, b: SymExpr) -> SymExpr {
        SymExpr::Add(Box::new(a), Box::new(b))
    }

    pub fn sub(a: SymExpr, b: SymExpr) -> SymExpr {
        SymExpr::Sub(Box::new(a), Box::new(b))
    }

    pub fn mul(a: SymExpr, b: SymExpr) -> SymExpr {
        SymExpr::Mul(Box::new(a), Box::new(b))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Cond {
    pub op: Cmp,
    pub lhs: SymExpr,
    pub rhs: SymExpr,
}

impl Cond {
    pub fn new(op: Cmp, lhs: SymExpr, rhs: SymExpr) -> Cond {
        Cond { op, lhs, rhs }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Stmt {
    Seq(Vec<Stmt>),
    If { cond: Cond, then: Box<Stmt>, els: Box<Stmt> },
    /// `for local in from..to` (exclusive upper bound, ascending).
    Loop { local: usize, from: IntExpr, to: IntExpr, body: Box<Stmt> },
    SetLocal(usize, IntExpr),
    Swap(IntExpr, IntExpr),
    Call { proc: usize, args: Vec<IntExpr> },
    /// Abstract expensive work worth `units` charge units.
    Charge(u64),
    Return,
    Nop,
}

impl Stmt {
    pub fn if_then(cond: Cond, then: Stmt) -> Stmt {
        Stmt::If { cond, then: Box::new(then), els: Box::new(Stmt::Nop) }
    }

    pub fn if_else(cond: Cond, then: Stmt, els: Stmt) -> Stmt {
        Stmt::If { cond, then: Box::new(then), els: Box::new(els) }
    }

    pub fn for_range(local: usize, from: IntExpr, to: IntExpr, body: Stmt) -> Stmt {
        Stmt::Loop { local, from, to, body: Box::new(body) }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Procedure {
    pub name: String,
    /// The first `params` locals are bound to the call arguments.
    pub params: usize,
    pub locals: usize,
    pub body: Stmt,
}

/// Cost charged per executed statement kind.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CostModel {
    pub branch: u64,
    pub swap: u64,
    pub assign: u64,
    pub call: u64,
    pub charge_unit: u64,
}

impl CostModel {
    pub fn cost(&self, step: Step) -> u64 {
        match step {
            Step::Branch => self.branch,
            Step::Swap => self.swap,
            Step::Assign => self.assign,
            Step::Call => self.call,
            Step::Charge(units) => self.charge_unit.saturating_mul(units),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ToyProgram {
    pub name: String,
    /// Procedure 0 is the entry point and takes no arguments.
    pub procedures: Vec<Procedure>,
    pub cost_model: CostModel,
}

/// Outcome chosen at a symbolic branch. An equality's else side splits into
/// the two strict orders so every path condition stays a conjunction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Decision {
    Then,
    Else,
    ElseBelow,
    ElseAbove,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Step {
    Branch,
    Swap,
    Assign,
    Call,
    Charge(u64),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PathResult {
    pub condition: Formula,
    pub cost: u64,
    pub trace: Vec<Decision>,
    pub steps: Vec<Step>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ExploreError {
    #[error("more than {0} paths")]
    PathBudgetExceeded(usize),
    #[error("cannot decide feasibility of `{atom}`: {reason}")]
    UnsupportedCondition { atom: String, reason: String },
    #[error("array index {index} out of bounds for n = {n}")]
    IndexOutOfBounds { index: i64, n: usize },
    #[error("unknown procedure {0}")]
    UnknownProcedure(usize),
    #[error("procedure `{name}` expects {expected} arguments, got {got}")]
    ArityMismatch { name: String, expected: usize, got: usize },
    #[error("local {0} out of range")]
    BadLocal(usize),
    #[error("step limit of {0} exceeded")]
    StepLimit(u64),
    #[error("input size must be at least 1")]
    ZeroSize,
}

#[derive(Debug, Clone)]
pub struct ExploreConfig {
    pub path_budget: usize,
    /// Drop infeasible prefixes as soon as they appear. Without pruning every
    /// syntactic path is returned, feasible or not.
    pub prune: bool,
    pub step_limit: u64,
    /// Strategies used for pruning; brute force is never consulted because
    /// an empty bounded search is not a proof outside difference logic.
    pub solver: SolverConfig,
}

impl Default for ExploreConfig {
    fn default() -> Self {
        ExploreConfig {
            path_budget: 1 << 20,
            prune: true,
            step_limit: 50_000_000,
            solver: SolverConfig {
                strategy_order: vec![Strategy::DiffLogic, Strategy::Linear],
                ..SolverConfig::default()
            },
        }
    }
}

impl ExploreConfig {
    /// Adds the external solver as the last pruning resort.
    pub fn with_external(mut self, cmd: Vec<String>) -> Self {
        self.solver.external_solver_command = cmd;
        if !self.solver.strategy_order.contains(&Strategy::External) {
            self.solver.strategy_order.push(Strategy::External);
        }
        self
    }
}

enum Flow {
    Normal,
    Return,
}

struct Run<'a> {
    prog: &'a ToyProgram,
    n: usize,
    prefix: &'a [Decision],
    cfg: &'a ExploreConfig,
    checker: &'a Checker,
    array: Vec<Term>,
    atoms: Vec<Atom>,
    trace: Vec<Decision>,
    steps: Vec<Step>,
    cost: u64,
    executed: u64,
    /// Alternative prefixes discovered past the end of `prefix`, in
    /// discovery order.
    forks: Vec<Vec<Decision>>,
}

impl Run<'_> {
    fn eval(&self, e: &IntExpr, frame: &[i64]) -> Result<i64, ExploreError> {
        Ok(match e {
            IntExpr::Const(c) => *c,
            IntExpr::N => self.n as i64,
            IntExpr::Local(i) => *frame.get(*i).ok_or(ExploreError::BadLocal(*i))?,
            IntExpr::Add(a, b) => self.eval(a, frame)? + self.eval(b, frame)?,
            IntExpr::Sub(a, b) => self.eval(a, frame)? - self.eval(b, frame)?,
            IntExpr::Div(a, k) => self.eval(a, frame)?.div_euclid(*k),
        })
    }

    fn index(&self, e: &IntExpr, frame: &[i64]) -> Result<usize, ExploreError> {
        let i = self.eval(e, frame)?;
        usize::try_from(i)
            .ok()
            .filter(|&i| i < self.n)
            .ok_or(ExploreError::IndexOutOfBounds { index: i, n: self.n })
    }

    fn term(&self, e: &SymExpr, frame: &[i64]) -> Result<Term, ExploreError> {
        Ok(match e {
            SymExpr::Cell(i) => self.array[self.index(i, frame)?].clone(),
            SymExpr::Int(i) => Term::Int(self.eval(i, frame)?),
            SymExpr::Add(a, b) => Term::add(self.term(a, frame)?, self.term(b, frame)?),
            SymExpr::Sub(a, b) => Term::sub(self.term(a, frame)?, self.term(b, frame)?),
            SymExpr::Mul(a, b) => Term::mul(self.term(a, frame)?, self.term(b, frame)?),
        })
    }

    fn step(&mut self, s: Step) -> Result<(), ExploreError> {
        self.steps.push(s);
        self.cost = self.cost.saturating_add(self.prog.cost_model.cost(s));
        self.tick()
    }

    fn tick(&mut self) -> Result<(), ExploreError> {
        self.executed += 1;
        if self.executed > self.cfg.step_limit {
            return Err(ExploreError::StepLimit(self.cfg.step_limit));
        }
        Ok(())
    }

    fn feasible_with(&self, extra: &Atom) -> Result<bool, ExploreError> {
        let mut atoms = self.atoms.clone();
        atoms.push(extra.clone());
        let f = Formula::conjunction(atoms.into_iter().map(Formula::Atom).collect());
        let unsupported = |reason: String| ExploreError::UnsupportedCondition {
            atom: extra.to_string(),
            reason,
        };
        match self.checker.feasibility(&f) {
            Ok(Feasibility::Sat(_)) => Ok(true),
            Ok(Feasibility::Unsat) => Ok(false),
            Ok(Feasibility::Unknown(UnknownReason::Timeout)) => Err(unsupported("timeout".into())),
            Ok(Feasibility::Unknown(UnknownReason::Unsupported(r))) => Err(unsupported(r)),
            Err(e) => Err(unsupported(e.to_string())),
        }
    }

    /// Chooses the branch outcome at the current depth, recording any
    /// alternatives beyond the replayed prefix.
    fn decide(&mut self, atom: Atom) -> Result<bool, ExploreError> {
        let options: Vec<(Decision, Atom)> = match atom.negated() {
            Some(neg) => vec![(Decision::Then, atom.clone()), (Decision::Else, neg)],
            None => vec![
                (Decision::Then, atom.clone()),
                (Decision::ElseBelow, Atom::new(Cmp::Lt, atom.lhs.clone(), atom.rhs.clone())),
                (Decision::ElseAbove, Atom::new(Cmp::Gt, atom.lhs.clone(), atom.rhs.clone())),
            ],
        };
        let depth = self.trace.len();
        let (decision, chosen) = if let Some(&d) = self.prefix.get(depth) {
            options.into_iter().find(|(o, _)| *o == d).expect("replayed decision fits the branch")
        } else {
            let mut open = Vec::new();
            for (d, a) in options {
                if !self.cfg.prune || self.feasible_with(&a)? {
                    open.push((d, a));
                }
            }
            // The options cover every integer assignment, so a feasible
            // prefix always has at least one feasible continuation.
            let mut open = open.into_iter();
            let first = open.next().expect("some branch outcome is feasible");
            let rest: Vec<_> = open.collect();
            for (d, _) in rest.iter().rev() {
                let mut alt = self.trace.clone();
                alt.push(*d);
                self.forks.push(alt);
            }
            first
        };
        self.trace.push(decision);
        self.atoms.push(chosen);
        self.step(Step::Branch)?;
        Ok(decision == Decision::Then)
    }

    fn exec(&mut self, stmt: &Stmt, frame: &mut Vec<i64>) -> Result<Flow, ExploreError> {
        match stmt {
            Stmt::Nop => {}
            Stmt::Seq(items) => {
                for s in items {
                    if let Flow::Return = self.exec(s, frame)? {
                        return Ok(Flow::Return);
                    }
                }
            }
            Stmt::If { cond, then, els } => {
                let atom = Atom::new(cond.op, self.term(&cond.lhs, frame)?, self.term(&cond.rhs, frame)?);
                let taken = if atom.lhs.is_ground() && atom.rhs.is_ground() {
                    self.tick()?;
                    atom.eval(&Default::default())
                } else {
                    self.decide(atom)?
                };
                return self.exec(if taken { then } else { els }, frame);
            }
            Stmt::Loop { local, from, to, body } => {
                let (lo, hi) = (self.eval(from, frame)?, self.eval(to, frame)?);
                for v in lo..hi {
                    *frame.get_mut(*local).ok_or(ExploreError::BadLocal(*local))? = v;
                    self.tick()?;
                    if let Flow::Return = self.exec(body, frame)? {
                        return Ok(Flow::Return);
                    }
                }
            }
            Stmt::SetLocal(i, e) => {
                let v = self.eval(e, frame)?;
                *frame.get_mut(*i).ok_or(ExploreError::BadLocal(*i))? = v;
                self.step(Step::Assign)?;
            }
            Stmt::Swap(i, j) => {
                let (i, j) = (self.index(i, frame)?, self.index(j, frame)?);
                self.array.swap(i, j);
                self.step(Step::Swap)?;
            }
            Stmt::Call { proc, args } => {
                let callee =
                    self.prog.procedures.get(*proc).ok_or(ExploreError::UnknownProcedure(*proc))?;
                if args.len() != callee.params {
                    return Err(ExploreError::ArityMismatch {
                        name: callee.name.clone(),
                        expected: callee.params,
                        got: args.len(),
                    });
                }
                let mut callee_frame = vec![0; callee.locals.max(callee.params)];
                for (slot, a) in callee_frame.iter_mut().zip(args) {
                    *slot = self.eval(a, frame)?;
                }
                self.step(Step::Call)?;
                self.exec(&callee.body, &mut callee_frame)?;
            }
            Stmt::Charge(units) => self.step(Step::Charge(*units))?,
            Stmt::Return => return Ok(Flow::Return),
        }
        Ok(Flow::Normal)
    }
}

/// Every path of `p` at input size `n`, sorted by trace. With pruning (the
/// default) exactly the feasible paths are returned.
pub fn enumerate_paths(
    p: &ToyProgram,
    n: usize,
    cfg: &ExploreConfig,
) -> Result<Vec<PathResult>, ExploreError> {
    if n == 0 {
        return Err(ExploreError::ZeroSize);
    }
    let entry = p.procedures.first().ok_or(ExploreError::UnknownProcedure(0))?;
    let checker = Checker::new(cfg.solver.clone());
    let mut pending: Vec<Vec<Decision>> = vec![Vec::new()];
    let mut paths = Vec::new();
    while let Some(prefix) = pending.pop() {
        let mut run = Run {
            prog: p,
            n,
            prefix: &prefix,
            cfg,
            checker: &checker,
            array: (0..n as u32).map(Term::var).collect(),
            atoms: Vec::new(),
            trace: Vec::new(),
            steps: Vec::new(),
            cost: 0,
            executed: 0,
            forks: Vec::new(),
        };
        let mut frame = vec![0; entry.locals];
        run.exec(&entry.body, &mut frame)?;
        pending.append(&mut run.forks);
        paths.push(PathResult {
            condition: Formula::conjunction(run.atoms.into_iter().map(Formula::Atom).collect()),
            cost: run.cost,
            trace: run.trace,
            steps: run.steps,
        });
        if paths.len() + pending.len() > cfg.path_budget {
            return Err(ExploreError::PathBudgetExceeded(cfg.path_budget));
        }
    }
    paths.sort_by(|a, b| a.trace.cmp(&b.trace));
    Ok(paths)
}

/// The maximum-cost path; ties go to the lexicographically smallest trace.
pub fn worst_case(p: &ToyProgram, n: usize, cfg: &ExploreConfig) -> Result<PathResult, ExploreError> {
    let paths = enumerate_paths(p, n, cfg)?;
    let best = paths
        .into_iter()
        .reduce(|best, next| if next.cost > best.cost { next } else { best })
        .expect("at least one path");
    Ok(best)
}

/// Feasible path counts for each `n` in `ns`.
pub fn path_growth(
    p: &ToyProgram,
    ns: impl IntoIterator<Item = usize>,
    cfg: &ExploreConfig,
) -> Result<Vec<(usize, usize)>, ExploreError> {
    ns.into_iter().map(|n| Ok((n, enumerate_paths(p, n, cfg)?.len()))).collect()
}

/// Distinct conditions across `paths`, mostly useful for reporting.
pub fn distinct_conditions(paths: &[PathResult]) -> BTreeSet<String> {
    paths.iter().map(|p| p.condition.to_canonical()).collect()
}
