//! Extrapolation benchmark instances: a handful of `(n, constraint)` examples
//! and a larger target size whose constraint is the expected answer.

mod build;
mod stats;
mod tokens;

use std::collections::BTreeSet;
use std::fmt;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use build::{build_benchmark, BuildConfig, BuildError, BuildReport};
pub use stats::{profile, profile_instances, DistributionStats, Stats, TierStats};
pub use tokens::{estimator_by_id, LexemeEstimator, TokenEstimator, WhitespaceEstimator};

use crate::smtlib::{parse_formula, Var};

/// Targets never exceed this size.
pub const MAX_TARGET: usize = 30;
pub const MIN_EXAMPLES: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Tier {
    Small,
    Medium,
    Large,
}

impl Tier {
    pub const ALL: [Tier; 3] = [Tier::Small, Tier::Medium, Tier::Large];

    pub fn as_str(self) -> &'static str {
        match self {
            Tier::Small => "small",
            Tier::Medium => "medium",
            Tier::Large => "large",
        }
    }

    /// Inclusive jump range of the tier (`None` upper bound is unbounded).
    pub fn jump_range(self) -> (usize, Option<usize>) {
        match self {
            Tier::Small => (1, Some(5)),
            Tier::Medium => (6, Some(15)),
            Tier::Large => (16, None),
        }
    }
}

impl fmt::Display for Tier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Jump of at most 5 is small, 6 to 15 medium, anything larger is large.
/// A jump of 0 never occurs in a valid instance.
pub fn classify_tier(jump: usize) -> Tier {
    match jump {
        0..=5 => Tier::Small,
        6..=15 => Tier::Medium,
        _ => Tier::Large,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Example {
    pub n: usize,
    pub constraint: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BenchmarkInstance {
    pub id: String,
    pub program: String,
    pub examples: Vec<Example>,
    pub target_n: usize,
    pub solution: String,
    pub tier: Tier,
    pub jump: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("instance {id}: {reason}")]
pub struct InvalidInstance {
    pub id: String,
    pub reason: String,
}

impl BenchmarkInstance {
    pub fn max_example_n(&self) -> usize {
        self.examples.iter().map(|e| e.n).max().unwrap_or(0)
    }

    pub fn validate(&self) -> Result<(), InvalidInstance> {
        let bad = |reason: String| Err(InvalidInstance { id: self.id.clone(), reason });
        if self.examples.len() < MIN_EXAMPLES {
            return bad(format!("{} examples, need at least {MIN_EXAMPLES}", self.examples.len()));
        }
        if !self.examples.windows(2).all(|w| w[0].n < w[1].n) {
            return bad("example sizes are not strictly ascending".into());
        }
        if self.examples[0].n == 0 {
            return bad("example size 0".into());
        }
        let max = self.max_example_n();
        if self.target_n <= max {
            return bad(format!("target {} not above largest example {max}", self.target_n));
        }
        if self.target_n > MAX_TARGET {
            return bad(format!("target {} exceeds {MAX_TARGET}", self.target_n));
        }
        if self.jump != self.target_n - max {
            return bad(format!("jump {} but target - max example = {}", self.jump, self.target_n - max));
        }
        if self.tier != classify_tier(self.jump) {
            return bad(format!("tier {} does not match jump {}", self.tier, self.jump));
        }
        for e in &self.examples {
            if let Err(err) = parse_formula(&e.constraint) {
                return bad(format!("example N={} does not parse: {err}", e.n));
            }
        }
        let solution = match parse_formula(&self.solution) {
            Ok(f) => f,
            Err(err) => return bad(format!("solution does not parse: {err}")),
        };
        let allowed: BTreeSet<Var> = (0..self.target_n as u32).map(Var).collect();
        if let Some(v) = solution.free_vars().difference(&allowed).next() {
            return bad(format!("solution mentions {v} beyond target size"));
        }
        Ok(())
    }
}

pub const EVAL_HEADER: &str = "Given the following examples of constraints for increasing input sizes:";

fn question_line(target: usize) -> String {
    format!("What is the constraint for N={target}?")
}

fn example_lines(examples: &[Example]) -> String {
    examples.iter().map(|e| format!("N={}: {}", e.n, e.constraint)).collect::<Vec<_>>().join("\n")
}

pub(crate) fn render_eval_prompt_parts(examples: &[Example], target: usize) -> String {
    let mut s = String::from(EVAL_HEADER);
    s.push('\n');
    if !examples.is_empty() {
        s.push_str(&example_lines(examples));
        s.push('\n');
    }
    s.push_str(&question_line(target));
    s
}

pub fn render_eval_prompt(instance: &BenchmarkInstance) -> String {
    render_eval_prompt_parts(&instance.examples, instance.target_n)
}

const TRAINING_TEMPLATE: &str = "\
A conversation between User and Assistant. The user asks a question, and the Assistant solves it.
User: Your role is to take a known pattern of symbolic constraints that represent the longest execution path of a program and generalize it for any given input size N.
When you receive an input value N, you must generate a canonical SMT-LIB constraint string that adheres to the following rules:
(assert (op (op (op var_1 var_2)) (op (op var_3 var_4)) (op (op var_5 var_6)) (op var_7 var_8)))
where op is a logical operator (e.g., 'and', 'or', 'not') and var_i are variables or constants.
All per-variable constraints must be combined using a top-level (assert (and ...)) clause.
The output must be in exact, canonical SMT-LIB format without extra commentary in the constraint string.
Show your work in <think> </think> tags. And return the final SMT-LIB constraint string in <answer> </answer> tags.
For example: <answer>(assert (and  ( >=  in0 97)  ( <=  in0 122)))</answer>.
Here are the known constraints:
[EXAMPLES]
What is the constraint for N=[QUESTION]?
Assistant: Let me solve this step by step.
<think>";

pub fn render_training_prompt(instance: &BenchmarkInstance) -> String {
    TRAINING_TEMPLATE
        .replacen("[EXAMPLES]", &example_lines(&instance.examples), 1)
        .replacen("[QUESTION]", &instance.target_n.to_string(), 1)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Reduction {
    /// Everything fits.
    Kept(Vec<Example>),
    /// First, lower median and last.
    Reduced(Vec<Example>),
    Excluded,
}

/// Fits the examples into `budget` tokens of rendered eval prompt, falling
/// back to the first, lower-median and last example.
pub fn reduce_examples(
    examples: &[Example],
    target: usize,
    budget: usize,
    estimator: &dyn TokenEstimator,
) -> Reduction {
    let fits = |ex: &[Example]| estimator.estimate(&render_eval_prompt_parts(ex, target)) <= budget;
    if fits(examples) {
        return Reduction::Kept(examples.to_vec());
    }
    if examples.len() <= MIN_EXAMPLES {
        return Reduction::Excluded;
    }
    let last = examples.len() - 1;
    let picked = vec![examples[0].clone(), examples[last / 2].clone(), examples[last].clone()];
    if fits(&picked) {
        Reduction::Reduced(picked)
    } else {
        Reduction::Excluded
    }
}

#[derive(Debug, Error)]
pub enum BenchIoError {
    #[error("line {line}: {detail}")]
    Malformed { line: usize, detail: String },
    #[error(transparent)]
    Invalid(#[from] InvalidInstance),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Writes one validated instance per line.
pub fn write_benchmark<W: Write>(instances: &[BenchmarkInstance], mut out: W) -> Result<(), BenchIoError> {
    for inst in instances {
        inst.validate()?;
        serde_json::to_writer(&mut out, inst).map_err(std::io::Error::from)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

/// Reads and validates newline-delimited instances; blank lines are ignored.
pub fn read_benchmark<R: BufRead>(input: R) -> Result<Vec<BenchmarkInstance>, BenchIoError> {
    let mut out = Vec::new();
    for (idx, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let inst: BenchmarkInstance = serde_json::from_str(&line)
            .map_err(|e| BenchIoError::Malformed { line: idx + 1, detail: e.to_string() })?;
        inst.validate()
            .map_err(|e| BenchIoError::Malformed { line: idx + 1, detail: e.to_string() })?;
        out.push(inst);
    }
    Ok(out)
}
