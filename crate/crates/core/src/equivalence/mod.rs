//! Two-sided implication checking: `a` and `b` are equivalent when both
//! `a and not b` and `b and not a` are unsatisfiable.
//!
//! A [`Checker`] tries its configured strategies in order; the first one that
//! reaches a definite answer decides. Any counterexample, whatever produced
//! it, is re-evaluated against both formulas before it is reported.

mod config;
mod external;

use std::collections::BTreeSet;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use config::{SolverConfig, Strategy, SOLVER_CMD_ENV};
pub use external::{external_check_sat, satisfiability_script, SatStatus, SolverReply};

use crate::difflogic::{self, BruteForce, BruteForceError, DiffConstraint, FeasibilityResult};
use crate::linear::{self, atom_constraints, LinConstraint, LinearResult};
use crate::smtlib::{Atom, Formula, Model, Var};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EquivalenceError {
    #[error("could not start solver: {0}")]
    SolverSpawnFailure(String),
    #[error("solver did not answer within {0} ms")]
    Timeout(u64),
    #[error("unexpected solver reply: {0}")]
    ProtocolError(String),
}

/// Which implication failed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    /// The witness satisfies `a` and falsifies `b`.
    AButNotB,
    /// The witness satisfies `b` and falsifies `a`.
    BButNotA,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "detail", rename_all = "snake_case")]
pub enum UnknownReason {
    Timeout,
    Unsupported(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum Verdict {
    Equivalent,
    NotEquivalent { witness: Model, direction: Direction },
    Unknown { reason: UnknownReason },
}

impl Verdict {
    pub fn is_equivalent(&self) -> bool {
        matches!(self, Verdict::Equivalent)
    }
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Verdict::Equivalent => f.write_str("equivalent"),
            Verdict::NotEquivalent { witness, direction } => {
                let side = match direction {
                    Direction::AButNotB => "first but not second",
                    Direction::BButNotA => "second but not first",
                };
                let w: Vec<String> = witness.iter().map(|(v, x)| format!("{v}={x}")).collect();
                write!(f, "not equivalent: {{{}}} satisfies the {side}", w.join(", "))
            }
            Verdict::Unknown { reason: UnknownReason::Timeout } => f.write_str("unknown: timeout"),
            Verdict::Unknown { reason: UnknownReason::Unsupported(r) } => {
                write!(f, "unknown: {r}")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Feasibility {
    Sat(Model),
    Unsat,
    Unknown(UnknownReason),
}

/// Outcome of a single `a => b` check by one strategy.
#[derive(Debug, Clone, PartialEq, Eq)]
enum Implication {
    Holds,
    /// Satisfies `a`, falsifies `b`.
    Fails(Model),
    Inconclusive(UnknownReason),
}

/// The formulas leave the fragment [`implies_conjunctive`] decides.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unsupported: {0}")]
pub struct Unsupported(pub String);

/// Whether the conjunction `a` implies every atom of the conjunction `b`,
/// decided in difference logic.
pub fn implies_conjunctive(a: &Formula, b: &Formula) -> Result<bool, Unsupported> {
    match dl_implies(a, b) {
        Implication::Holds => Ok(true),
        Implication::Fails(_) => Ok(false),
        Implication::Inconclusive(UnknownReason::Unsupported(r)) => Err(Unsupported(r)),
        Implication::Inconclusive(UnknownReason::Timeout) => unreachable!("no timeouts in-process"),
    }
}

fn conjunct_atoms(f: &Formula, side: &str) -> Result<Vec<Atom>, UnknownReason> {
    f.conjunct_atoms()
        .ok_or_else(|| UnknownReason::Unsupported(format!("{side} is not a conjunction of atoms")))
}

fn dl_implies(a: &Formula, b: &Formula) -> Implication {
    let run = || -> Result<Implication, UnknownReason> {
        let unsupported = |r: String| UnknownReason::Unsupported(r);
        let premise = match difflogic::normalize_atoms(&conjunct_atoms(a, "premise")?) {
            difflogic::Normalized::Constraints(cs) => cs,
            difflogic::Normalized::Unsupported(r) => return Err(unsupported(r)),
        };
        let mut goals: Vec<DiffConstraint> = Vec::new();
        for atom in conjunct_atoms(b, "conclusion")? {
            match difflogic::normalize_atoms(std::slice::from_ref(&atom)) {
                difflogic::Normalized::Constraints(mut cs) => goals.append(&mut cs),
                difflogic::Normalized::Unsupported(r) => return Err(unsupported(r)),
            }
        }
        for goal in goals {
            let negated = goal
                .complement()
                .ok_or_else(|| unsupported(format!("overflow negating {goal}")))?;
            let mut cs = premise.clone();
            cs.push(negated);
            match difflogic::check_feasible(&cs) {
                FeasibilityResult::Feasible(m) => return Ok(Implication::Fails(m)),
                FeasibilityResult::Infeasible(_) => {}
                FeasibilityResult::Unsupported(r) => return Err(unsupported(r)),
            }
        }
        Ok(Implication::Holds)
    };
    run().unwrap_or_else(Implication::Inconclusive)
}

fn linear_constraints(atoms: &[Atom]) -> Result<Vec<LinConstraint>, UnknownReason> {
    let mut out = Vec::new();
    for atom in atoms {
        let mut cs = atom_constraints(atom).map_err(|e| UnknownReason::Unsupported(e.to_string()))?;
        out.append(&mut cs);
    }
    Ok(out)
}

fn linear_implies(a: &Formula, b: &Formula) -> Implication {
    let run = || -> Result<Implication, UnknownReason> {
        let unsupported = |r: String| UnknownReason::Unsupported(r);
        let premise = linear_constraints(&conjunct_atoms(a, "premise")?)?;
        let mut goals = Vec::new();
        for c in linear_constraints(&conjunct_atoms(b, "conclusion")?)? {
            goals.extend(c.halves().ok_or_else(|| unsupported(format!("overflow in {c}")))?);
        }
        for goal in goals {
            let negated =
                goal.complement().ok_or_else(|| unsupported(format!("overflow negating {goal}")))?;
            let mut cs = premise.clone();
            cs.push(negated);
            match linear::solve(&cs) {
                LinearResult::Feasible(m) => return Ok(Implication::Fails(m)),
                LinearResult::Infeasible => {}
                LinearResult::Unsupported(r) => return Err(unsupported(r)),
            }
        }
        Ok(Implication::Holds)
    };
    run().unwrap_or_else(Implication::Inconclusive)
}

fn collect_atoms<'a>(f: &'a Formula, out: &mut Vec<&'a Atom>) {
    match f {
        Formula::True => {}
        Formula::Atom(a) => out.push(a),
        Formula::And(cs) | Formula::Or(cs) => cs.iter().for_each(|c| collect_atoms(c, out)),
        Formula::Not(c) => collect_atoms(c, out),
    }
}

/// Largest absolute constant after normalizing every atom of `fs` to
/// difference constraints, or `None` if some atom is outside that fragment.
fn diff_logic_constant_bound(fs: &[&Formula]) -> Option<u64> {
    let mut atoms = Vec::new();
    fs.iter().for_each(|f| collect_atoms(f, &mut atoms));
    let mut k = 0u64;
    for atom in atoms {
        match difflogic::normalize_atoms(std::slice::from_ref(atom)) {
            difflogic::Normalized::Constraints(cs) => {
                k = cs.iter().map(|c| c.c.unsigned_abs()).fold(k, u64::max);
            }
            difflogic::Normalized::Unsupported(_) => return None,
        }
    }
    Some(k)
}

/// Bounded search for a model of `f`. The domain comes from the
/// difference-logic small-model bound over the constants of `bound_fs`, or
/// from the largest literal when some atom is outside that fragment; only in
/// the first case is an empty search a proof of unsatisfiability.
fn bounded_search(f: &Formula, bound_fs: &[&Formula], vars: usize, budget: u64) -> Feasibility {
    let (k, complete) = match diff_logic_constant_bound(bound_fs) {
        Some(k) => (k, true),
        None => (bound_fs.iter().map(|g| g.max_abs_literal()).max().unwrap_or(0), false),
    };
    let b = difflogic::small_model_bound(vars, k);
    match difflogic::brute_force_sat_with_budget(f, -b, b, budget) {
        Ok(BruteForce::Sat(m)) => Feasibility::Sat(m),
        Ok(BruteForce::Unsat) if complete => Feasibility::Unsat,
        Ok(BruteForce::Unsat) => Feasibility::Unknown(UnknownReason::Unsupported(
            "bounded search found no model outside difference logic".into(),
        )),
        Err(e @ BruteForceError::DomainTooLarge { .. }) | Err(e @ BruteForceError::EmptyDomain { .. }) => {
            Feasibility::Unknown(UnknownReason::Unsupported(e.to_string()))
        }
    }
}

fn and_not(a: &Formula, b: &Formula) -> Formula {
    Formula::And(vec![a.clone(), Formula::negate(b.clone())])
}

/// Fills every variable of `vars` missing from `m` with zero, the value the
/// evaluator already assumes for it.
fn completed(mut m: Model, vars: &BTreeSet<Var>) -> Model {
    for v in vars {
        m.entry(*v).or_insert(0);
    }
    m
}

/// Runs equivalence and feasibility checks under one [`SolverConfig`] while
/// bounding the number of concurrent external solver processes.
#[derive(Debug, Clone)]
pub struct Checker {
    cfg: SolverConfig,
    pool: Arc<external::Pool>,
}

impl Checker {
    pub fn new(cfg: SolverConfig) -> Checker {
        let pool = Arc::new(external::Pool::new(cfg.max_concurrent_solvers));
        Checker { cfg, pool }
    }

    pub fn config(&self) -> &SolverConfig {
        &self.cfg
    }

    fn external(&self, f: &Formula, vars: &BTreeSet<Var>) -> Result<Feasibility, EquivalenceError> {
        let script = satisfiability_script(f, vars);
        let reply = {
            let _permit = self.pool.acquire();
            external::run_solver(&script, &self.cfg)
        };
        match reply {
            Ok(SolverReply { status: SatStatus::Sat, model }) => {
                let m = completed(model.unwrap_or_default(), vars);
                if f.eval(&m) {
                    Ok(Feasibility::Sat(m))
                } else {
                    Err(EquivalenceError::ProtocolError("reported model does not satisfy the query".into()))
                }
            }
            Ok(SolverReply { status: SatStatus::Unsat, .. }) => Ok(Feasibility::Unsat),
            Ok(SolverReply { status: SatStatus::Unknown, .. }) => Ok(Feasibility::Unknown(
                UnknownReason::Unsupported("solver answered unknown".into()),
            )),
            Err(EquivalenceError::Timeout(_)) => Ok(Feasibility::Unknown(UnknownReason::Timeout)),
            Err(e) => Err(e),
        }
    }

    fn implication(
        &self,
        strategy: Strategy,
        a: &Formula,
        b: &Formula,
        vars: &BTreeSet<Var>,
    ) -> Result<Implication, EquivalenceError> {
        let from_feasibility = |f: Feasibility| match f {
            Feasibility::Sat(m) => Implication::Fails(m),
            Feasibility::Unsat => Implication::Holds,
            Feasibility::Unknown(r) => Implication::Inconclusive(r),
        };
        Ok(match strategy {
            Strategy::DiffLogic => dl_implies(a, b),
            Strategy::Linear => linear_implies(a, b),
            Strategy::External => from_feasibility(self.external(&and_not(a, b), vars)?),
            Strategy::BruteForce => from_feasibility(bounded_search(
                &and_not(a, b),
                &[a, b],
                vars.len(),
                self.cfg.brute_force_budget,
            )),
        })
    }

    /// One strategy's verdict on `a <=> b`, or the reason it could not decide.
    fn verdict_with(
        &self,
        strategy: Strategy,
        a: &Formula,
        b: &Formula,
        vars: &BTreeSet<Var>,
    ) -> Result<Result<Verdict, UnknownReason>, EquivalenceError> {
        let sides = [(a, b, Direction::AButNotB), (b, a, Direction::BButNotA)];
        for (premise, conclusion, direction) in sides {
            match self.implication(strategy, premise, conclusion, vars)? {
                Implication::Holds => {}
                Implication::Fails(m) => {
                    let witness = completed(m, vars);
                    if premise.eval(&witness) && !conclusion.eval(&witness) {
                        return Ok(Ok(Verdict::NotEquivalent { witness, direction }));
                    }
                    return Ok(Err(UnknownReason::Unsupported(format!(
                        "{strategy:?} produced a witness that does not separate the formulas"
                    ))));
                }
                Implication::Inconclusive(r) => return Ok(Err(r)),
            }
        }
        Ok(Ok(Verdict::Equivalent))
    }

    /// Decides `a <=> b` over the union of their free variables.
    pub fn check(&self, a: &Formula, b: &Formula) -> Result<Verdict, EquivalenceError> {
        let vars: BTreeSet<Var> = a.free_vars().union(&b.free_vars()).copied().collect();
        let mut last_reason = UnknownReason::Unsupported("no strategy configured".into());
        let mut last_error = None;
        for &strategy in &self.cfg.strategy_order {
            match self.verdict_with(strategy, a, b, &vars) {
                Ok(Ok(v)) => return Ok(v),
                Ok(Err(reason)) => last_reason = reason,
                Err(e) => last_error = Some(e),
            }
        }
        match last_error {
            Some(e) => Err(e),
            None => Ok(Verdict::Unknown { reason: last_reason }),
        }
    }

    /// Satisfiability of `f` under the configured strategies.
    pub fn feasibility(&self, f: &Formula) -> Result<Feasibility, EquivalenceError> {
        let vars = f.free_vars();
        let mut last_reason = UnknownReason::Unsupported("no strategy configured".into());
        let mut last_error = None;
        for &strategy in &self.cfg.strategy_order {
            let outcome = match strategy {
                Strategy::DiffLogic => match f.conjunct_atoms() {
                    Some(atoms) => match difflogic::check_atoms(&atoms) {
                        FeasibilityResult::Feasible(m) => Feasibility::Sat(m),
                        FeasibilityResult::Infeasible(_) => Feasibility::Unsat,
                        FeasibilityResult::Unsupported(r) => {
                            Feasibility::Unknown(UnknownReason::Unsupported(r))
                        }
                    },
                    None => Feasibility::Unknown(UnknownReason::Unsupported(
                        "not a conjunction of atoms".into(),
                    )),
                },
                Strategy::Linear => match f.conjunct_atoms() {
                    Some(atoms) => match linear::check_atoms(&atoms) {
                        LinearResult::Feasible(m) => Feasibility::Sat(m),
                        LinearResult::Infeasible => Feasibility::Unsat,
                        LinearResult::Unsupported(r) => {
                            Feasibility::Unknown(UnknownReason::Unsupported(r))
                        }
                    },
                    None => Feasibility::Unknown(UnknownReason::Unsupported(
                        "not a conjunction of atoms".into(),
                    )),
                },
                Strategy::External => match self.external(f, &vars) {
                    Ok(r) => r,
                    Err(e) => {
                        last_error = Some(e);
                        continue;
                    }
                },
                Strategy::BruteForce => {
                    bounded_search(f, &[f], vars.len(), self.cfg.brute_force_budget)
                }
            };
            match outcome {
                Feasibility::Sat(m) => {
                    let m = completed(m, &vars);
                    if f.eval(&m) {
                        return Ok(Feasibility::Sat(m));
                    }
                    last_reason = UnknownReason::Unsupported(format!(
                        "{strategy:?} produced a model that does not satisfy the formula"
                    ));
                }
                Feasibility::Unsat => return Ok(Feasibility::Unsat),
                Feasibility::Unknown(r) => last_reason = r,
            }
        }
        match last_error {
            Some(e) => Err(e),
            None => Ok(Feasibility::Unknown(last_reason)),
        }
    }
}

/// Convenience wrapper building a one-shot [`Checker`].
pub fn check_equivalence(a: &Formula, b: &Formula, cfg: &SolverConfig) -> Result<Verdict, EquivalenceError> {
    Checker::new(cfg.clone()).check(a, b)
}
