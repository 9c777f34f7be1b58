//! Accuracy evaluation: obtain one completion per instance and trial, score it
//! by solver-checked equivalence with the solution, aggregate over trials.

mod endpoint;

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::io::BufRead;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use endpoint::{query_endpoint, ChatMessage, ChatRequest, ModelEndpoint, API_KEY_ENV};

use crate::bench::{render_eval_prompt, BenchIoError, BenchmarkInstance, Tier};
use crate::equivalence::{Checker, SolverConfig, Verdict};
use crate::sgf::extract_answer;
use crate::smtlib::parse_formula;

pub const SYSTEM_PROMPT: &str = "You are a helpful assistant.";

const INSTRUCTIONS: &str = "\
All per-variable constraints must be combined using a top-level (assert (and ...)) clause.
The output must be in exact, canonical SMT-LIB format without extra commentary in the constraint string.
Show your work in <think> </think> tags. And return the final SMT-LIB constraint string in <answer> </answer> tags.
For example: <answer>(assert (and  ( >=  in0 97)  ( <=  in0 122)))</answer>.
";

pub fn render_user_message(instance: &BenchmarkInstance) -> String {
    format!("{INSTRUCTIONS}{}", render_eval_prompt(instance))
}

/// Zero-shot chat payload: a system message and the instruction-prefixed
/// question. No output length cap is set.
pub fn render_eval_request(instance: &BenchmarkInstance, model: &str, temperature: f64, seed: Option<u64>) -> ChatRequest {
    ChatRequest {
        model: model.to_owned(),
        messages: vec![
            ChatMessage { role: "system".into(), content: SYSTEM_PROMPT.into() },
            ChatMessage { role: "user".into(), content: render_user_message(instance) },
        ],
        temperature,
        seed,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureClass {
    NoAnswer,
    ParseError,
    NotEquivalent,
    SolverUnknown,
}

/// `Ok` when the extracted answer is equivalent to the instance solution.
/// The layout of the completion around the answer block is not checked.
pub fn score_instance(instance: &BenchmarkInstance, completion: &str, checker: &Checker) -> Result<(), FailureClass> {
    let answer = extract_answer(completion).ok_or(FailureClass::NoAnswer)?;
    let answer = parse_formula(answer).map_err(|_| FailureClass::ParseError)?;
    let solution = parse_formula(&instance.solution).map_err(|_| FailureClass::ParseError)?;
    match checker.check(&answer, &solution) {
        Ok(Verdict::Equivalent) => Ok(()),
        Ok(Verdict::NotEquivalent { .. }) => Err(FailureClass::NotEquivalent),
        Ok(Verdict::Unknown { .. }) | Err(_) => Err(FailureClass::SolverUnknown),
    }
}

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("no completion for instance {instance_id} trial {trial}")]
    MissingCompletion { instance_id: String, trial: usize },
    #[error("endpoint unreachable after {attempts} attempts: {detail}")]
    EndpointUnreachable { attempts: u32, detail: String },
    #[error("endpoint rejected the request with status {status}: {body}")]
    EndpointRejected { status: u16, body: String },
    #[error("completions line {line}: {detail}")]
    BadCompletions { line: usize, detail: String },
    #[error("trials must be at least 1")]
    NoTrials,
    #[error("invalid endpoint config: {0}")]
    InvalidEndpoint(String),
    #[error(transparent)]
    Bench(#[from] BenchIoError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecordedCompletion {
    pub instance_id: String,
    /// 1-based.
    pub trial: usize,
    pub completion: String,
}

/// Prerecorded completions keyed by `(instance id, trial)`.
#[derive(Debug, Clone, Default)]
pub struct CompletionSet {
    map: HashMap<(String, usize), String>,
}

impl CompletionSet {
    pub fn insert(&mut self, instance_id: impl Into<String>, trial: usize, completion: impl Into<String>) {
        self.map.insert((instance_id.into(), trial), completion.into());
    }

    pub fn get(&self, instance_id: &str, trial: usize) -> Option<&str> {
        self.map.get(&(instance_id.to_owned(), trial)).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    /// Newline-delimited [`RecordedCompletion`] objects; a repeated key is an error.
    pub fn read<R: BufRead>(input: R) -> Result<CompletionSet, EvalError> {
        let mut set = CompletionSet::default();
        for (idx, line) in input.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let bad = |detail: String| EvalError::BadCompletions { line: idx + 1, detail };
            let rec: RecordedCompletion = serde_json::from_str(&line).map_err(|e| bad(e.to_string()))?;
            if rec.trial == 0 {
                return Err(bad("trials are numbered from 1".into()));
            }
            let key = (rec.instance_id, rec.trial);
            if set.map.contains_key(&key) {
                return Err(bad(format!("duplicate completion for {} trial {}", key.0, key.1)));
            }
            set.map.insert(key, rec.completion);
        }
        Ok(set)
    }
}

pub enum CompletionSource<'a> {
    Recorded(&'a CompletionSet),
    Endpoint(&'a ModelEndpoint),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Failure {
    pub instance_id: String,
    pub trial: usize,
    pub class: FailureClass,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tally {
    pub verified: usize,
    pub total: usize,
}

impl Tally {
    fn add(&mut self, ok: bool) {
        self.total += 1;
        self.verified += usize::from(ok);
    }

    pub fn accuracy(&self) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            self.verified as f64 / self.total as f64
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub trial: usize,
    pub overall: Tally,
    pub per_tier: BTreeMap<Tier, Tally>,
    pub per_program: BTreeMap<String, Tally>,
    pub failures: Vec<Failure>,
}

impl TrialResult {
    pub fn from_outcomes(trial: usize, instances: &[BenchmarkInstance], outcomes: &[Result<(), FailureClass>]) -> TrialResult {
        let mut t = TrialResult {
            trial,
            overall: Tally::default(),
            per_tier: BTreeMap::new(),
            per_program: BTreeMap::new(),
            failures: Vec::new(),
        };
        for (inst, outcome) in instances.iter().zip(outcomes) {
            let ok = outcome.is_ok();
            t.overall.add(ok);
            t.per_tier.entry(inst.tier).or_default().add(ok);
            t.per_program.entry(inst.program.clone()).or_default().add(ok);
            if let Err(class) = outcome {
                t.failures.push(Failure { instance_id: inst.id.clone(), trial, class: *class });
            }
        }
        t
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub instances: usize,
    /// Accuracy of each trial as a fraction.
    pub per_trial_accuracy: Vec<f64>,
    pub mean: f64,
    pub stddev: f64,
    pub single_trial: bool,
    pub per_tier: BTreeMap<Tier, f64>,
    pub per_program: BTreeMap<String, f64>,
    pub failure_counts: BTreeMap<FailureClass, usize>,
    pub failures: Vec<Failure>,
    pub trials: Vec<TrialResult>,
}

/// Mean and sample standard deviation. One value has deviation 0.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (0.0, 0.0);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Breakdowns are computed per trial and then averaged.
pub fn aggregate(trials: Vec<TrialResult>) -> EvalReport {
    let per_trial_accuracy: Vec<f64> = trials.iter().map(|t| t.overall.accuracy()).collect();
    let (mean, stddev) = mean_std(&per_trial_accuracy);
    let average = |pick: &dyn Fn(&TrialResult) -> Vec<(String, f64)>| {
        let mut acc: BTreeMap<String, Vec<f64>> = BTreeMap::new();
        for t in &trials {
            for (k, v) in pick(t) {
                acc.entry(k).or_default().push(v);
            }
        }
        acc.into_iter().map(|(k, v)| (k, mean_std(&v).0)).collect::<BTreeMap<_, _>>()
    };
    let per_program = average(&|t| t.per_program.iter().map(|(k, v)| (k.clone(), v.accuracy())).collect());
    let per_tier: BTreeMap<Tier, f64> = Tier::ALL
        .iter()
        .filter_map(|&tier| {
            let accs: Vec<f64> = trials.iter().filter_map(|t| t.per_tier.get(&tier)).map(Tally::accuracy).collect();
            (!accs.is_empty()).then(|| (tier, mean_std(&accs).0))
        })
        .collect();
    let failures: Vec<Failure> = trials.iter().flat_map(|t| t.failures.iter().cloned()).collect();
    let mut failure_counts = BTreeMap::new();
    for f in &failures {
        *failure_counts.entry(f.class).or_insert(0) += 1;
    }
    EvalReport {
        instances: trials.first().map_or(0, |t| t.overall.total),
        single_trial: trials.len() == 1,
        per_trial_accuracy,
        mean,
        stddev,
        per_tier,
        per_program,
        failure_counts,
        failures,
        trials,
    }
}

impl EvalReport {
    pub fn render_table(&self) -> String {
        let mut s = String::new();
        let pct = |x: f64| format!("{:6.2}", 100.0 * x);
        let _ = writeln!(s, "instances  {}", self.instances);
        for (i, a) in self.per_trial_accuracy.iter().enumerate() {
            let _ = writeln!(s, "trial {:<4} {}%", i + 1, pct(*a));
        }
        let _ = writeln!(s, "mean       {}%  (std {:.2}{})", pct(self.mean), 100.0 * self.stddev,
            if self.single_trial { ", single trial" } else { "" });
        let _ = writeln!(s, "\n{:<22} accuracy", "tier");
        for (tier, a) in &self.per_tier {
            let _ = writeln!(s, "{:<22} {}%", tier.as_str(), pct(*a));
        }
        let _ = writeln!(s, "\n{:<22} accuracy", "program");
        for (p, a) in &self.per_program {
            let _ = writeln!(s, "{:<22} {}%", p, pct(*a));
        }
        if !self.failure_counts.is_empty() {
            let _ = writeln!(s, "\nfailures");
            for (class, n) in &self.failure_counts {
                let name = serde_json::to_value(class).ok().and_then(|v| v.as_str().map(str::to_owned)).unwrap_or_default();
                let _ = writeln!(s, "  {name:<20} {n}");
            }
        }
        s
    }
}

fn worker_count(cfg: &SolverConfig) -> usize {
    let cpus = std::thread::available_parallelism().map_or(1, |n| n.get());
    cpus.min(cfg.max_concurrent_solvers.max(1) * 2).max(1)
}

/// Runs `f` over `0..len` on a bounded set of threads, keeping index order.
fn parallel_map<T: Send>(len: usize, workers: usize, f: impl Fn(usize) -> T + Sync) -> Vec<T> {
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<T>>> = Mutex::new((0..len).map(|_| None).collect());
    std::thread::scope(|s| {
        for _ in 0..workers.min(len).max(1) {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= len {
                    break;
                }
                let out = f(i);
                slots.lock().expect("no worker panics while holding the lock")[i] = Some(out);
            });
        }
    });
    slots.into_inner().expect("workers joined").into_iter().map(|x| x.expect("every index visited")).collect()
}

pub fn run_eval(
    instances: &[BenchmarkInstance],
    source: CompletionSource<'_>,
    trials: usize,
    cfg: &SolverConfig,
) -> Result<EvalReport, EvalError> {
    if trials == 0 {
        return Err(EvalError::NoTrials);
    }
    let checker = Checker::new(cfg.clone());
    let workers = worker_count(cfg);
    let mut results = Vec::with_capacity(trials);
    for trial in 1..=trials {
        let completions: Vec<String> = match &source {
            CompletionSource::Recorded(set) => instances
                .iter()
                .map(|inst| {
                    set.get(&inst.id, trial).map(str::to_owned).ok_or_else(|| EvalError::MissingCompletion {
                        instance_id: inst.id.clone(),
                        trial,
                    })
                })
                .collect::<Result<_, _>>()?,
            CompletionSource::Endpoint(ep) => {
                ep.validate()?;
                let client = ep.client()?;
                let seed = ep.trial_seeds.get(trial - 1).copied();
                parallel_map(instances.len(), ep.max_in_flight.max(1), |i| {
                    let req = render_eval_request(&instances[i], &ep.model_name, ep.temperature, seed);
                    query_endpoint(&client, ep, &req)
                })
                .into_iter()
                .collect::<Result<_, _>>()?
            }
        };
        let outcomes = parallel_map(instances.len(), workers, |i| score_instance(&instances[i], &completions[i], &checker));
        results.push(TrialResult::from_outcomes(trial, instances, &outcomes));
    }
    Ok(aggregate(results))
}
