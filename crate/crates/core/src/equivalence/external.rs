//! SMT-LIB v2 over a child process's stdin/stdout.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::io::{Read, Write};
use std::process::{Command, Stdio};
use std::sync::{mpsc, Condvar, Mutex};
use std::time::Duration;

use super::{EquivalenceError, SolverConfig};
use crate::linear::LinExpr;
use crate::smtlib::{read_sexprs, Formula, Model, SExpr, Term, Var};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SatStatus {
    Sat,
    Unsat,
    Unknown,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SolverReply {
    pub status: SatStatus,
    /// Present when the script asked for values and the answer was `sat`.
    pub model: Option<Model>,
}

/// Counting semaphore bounding concurrent solver children.
#[derive(Debug)]
pub(crate) struct Pool {
    free: Mutex<usize>,
    cv: Condvar,
}

pub(crate) struct Permit<'a>(&'a Pool);

impl Pool {
    pub(crate) fn new(size: usize) -> Pool {
        Pool { free: Mutex::new(size.max(1)), cv: Condvar::new() }
    }

    pub(crate) fn acquire(&self) -> Permit<'_> {
        let mut free = self.free.lock().unwrap_or_else(|e| e.into_inner());
        while *free == 0 {
            free = self.cv.wait(free).unwrap_or_else(|e| e.into_inner());
        }
        *free -= 1;
        Permit(self)
    }
}

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        *self.0.free.lock().unwrap_or_else(|e| e.into_inner()) += 1;
        self.0.cv.notify_one();
    }
}

fn has_nonlinear(f: &Formula) -> bool {
    fn term(t: &Term) -> bool {
        LinExpr::from_term(t).is_err()
    }
    match f {
        Formula::True => false,
        Formula::Atom(a) => term(&a.lhs) || term(&a.rhs),
        Formula::And(cs) | Formula::Or(cs) => cs.iter().any(has_nonlinear),
        Formula::Not(c) => has_nonlinear(c),
    }
}

/// A complete session checking `f` with every variable of `vars` declared.
/// Values are requested when `vars` is non-empty so a `sat` answer carries a
/// model.
pub fn satisfiability_script(f: &Formula, vars: &BTreeSet<Var>) -> String {
    let logic = if has_nonlinear(f) { "QF_NIA" } else { "QF_LIA" };
    let mut s = String::new();
    s.push_str("(set-option :produce-models true)\n");
    let _ = writeln!(s, "(set-logic {logic})");
    for v in vars {
        let _ = writeln!(s, "(declare-fun {v} () Int)");
    }
    let _ = writeln!(s, "(assert {})", f.body());
    s.push_str("(check-sat)\n");
    if !vars.is_empty() {
        let names: Vec<String> = vars.iter().map(Var::to_string).collect();
        let _ = writeln!(s, "(get-value ({}))", names.join(" "));
    }
    s.push_str("(exit)\n");
    s
}

/// Runs `script` and returns the first status token.
pub fn external_check_sat(script: &str, cfg: &SolverConfig) -> Result<SatStatus, EquivalenceError> {
    run_solver(script, cfg).map(|r| r.status)
}

pub(crate) fn run_solver(script: &str, cfg: &SolverConfig) -> Result<SolverReply, EquivalenceError> {
    let (program, args) = cfg
        .external_solver_command
        .split_first()
        .ok_or_else(|| EquivalenceError::SolverSpawnFailure("empty solver command".into()))?;
    let mut child = Command::new(program)
        .args(args)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::null())
        .spawn()
        .map_err(|e| EquivalenceError::SolverSpawnFailure(format!("{program}: {e}")))?;

    let mut stdin = child.stdin.take().expect("piped stdin");
    let mut stdout = child.stdout.take().expect("piped stdout");
    let script = script.to_owned();
    // A solver that exits early closes its end; the write error is irrelevant
    // because the reply (or its absence) decides the outcome.
    let writer = std::thread::spawn(move || {
        let _ = stdin.write_all(script.as_bytes());
    });
    let (tx, rx) = mpsc::channel();
    std::thread::spawn(move || {
        let mut out = String::new();
        let res = stdout.read_to_string(&mut out).map(|_| out);
        let _ = tx.send(res);
    });

    let reply = rx.recv_timeout(Duration::from_millis(cfg.timeout_ms));
    let output = match reply {
        Ok(Ok(out)) => {
            let _ = child.wait();
            out
        }
        Ok(Err(e)) => {
            let _ = child.kill();
            let _ = child.wait();
            return Err(EquivalenceError::ProtocolError(format!("reading solver output: {e}")));
        }
        Err(_) => {
            let _ = child.kill();
            let _ = child.wait();
            return Err(EquivalenceError::Timeout(cfg.timeout_ms));
        }
    };
    let _ = writer.join();
    parse_reply(&output)
}

pub(crate) fn parse_reply(output: &str) -> Result<SolverReply, EquivalenceError> {
    let protocol = |msg: String| EquivalenceError::ProtocolError(msg);
    let trimmed = output.trim_start();
    let (first, rest) = trimmed.split_once('\n').unwrap_or((trimmed, ""));
    let status = match first.trim() {
        "sat" => SatStatus::Sat,
        "unsat" => SatStatus::Unsat,
        "unknown" => SatStatus::Unknown,
        "" => return Err(protocol("empty reply".into())),
        other => return Err(protocol(format!("unexpected reply: {other}"))),
    };
    let model = match status {
        SatStatus::Sat => first_group(rest).map(parse_values).transpose()?,
        _ => None,
    };
    Ok(SolverReply { status, model })
}

/// The first balanced parenthesized group in `s`, if `s` starts with one.
fn first_group(s: &str) -> Option<&str> {
    let s = s.trim_start();
    if !s.starts_with('(') {
        return None;
    }
    let mut depth = 0usize;
    for (i, b) in s.bytes().enumerate() {
        match b {
            b'(' => depth += 1,
            b')' => {
                depth -= 1;
                if depth == 0 {
                    return Some(&s[..=i]);
                }
            }
            _ => {}
        }
    }
    None
}

fn parse_values(group: &str) -> Result<Model, EquivalenceError> {
    let bad = |what: &str| EquivalenceError::ProtocolError(format!("malformed value list: {what}"));
    let items = read_sexprs(group).map_err(|e| bad(&e.to_string()))?;
    let Some(SExpr::List(pairs, _)) = items.first() else { return Err(bad("expected a list")) };
    if pairs.first().is_some_and(|p| matches!(p, SExpr::Symbol("error", _))) {
        return Err(bad(group));
    }
    let mut model = Model::new();
    for pair in pairs {
        let SExpr::List(kv, _) = pair else { return Err(bad("expected a pair")) };
        let [SExpr::Symbol(name, _), value] = kv.as_slice() else {
            return Err(bad("expected (name value)"));
        };
        let var = Var::from_name(name).ok_or_else(|| bad(name))?;
        let value = match value {
            SExpr::Symbol(n, _) => n.parse::<i64>().map_err(|_| bad(n))?,
            SExpr::List(neg, _) => match neg.as_slice() {
                [SExpr::Symbol("-", _), SExpr::Symbol(n, _)] => {
                    n.parse::<i64>().map(|v| -v).map_err(|_| bad(n))?
                }
                _ => return Err(bad("unsupported value term")),
            },
        };
        model.insert(var, value);
    }
    Ok(model)
}
