use std::collections::{BTreeMap, HashMap, HashSet};
use std::path::Path;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::tokens::estimator_by_id;
use super::{classify_tier, reduce_examples, BenchmarkInstance, Example, Reduction, Tier, MAX_TARGET, MIN_EXAMPLES};
use crate::config::{load_toml, ConfigError};
use crate::generators::{find_program, generate, list_programs, GenerateError};

/// Attempts per instance before the builder gives up on the token budget.
const MAX_DRAWS: usize = 2000;
/// Attempts spent looking for an instance not produced already.
const DEDUP_DRAWS: usize = 50;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BuildConfig {
    /// Program names; empty means every registered program.
    pub programs: Vec<String>,
    pub token_budget: usize,
    pub tier_mix: BTreeMap<Tier, usize>,
    pub seed: u64,
    pub tokenizer: String,
    pub max_target: usize,
    /// Upper bound on the number of sampled examples before reduction.
    pub max_examples: usize,
}

impl Default for BuildConfig {
    fn default() -> Self {
        BuildConfig {
            programs: Vec::new(),
            token_budget: 2048,
            tier_mix: Tier::ALL.iter().map(|&t| (t, 10)).collect(),
            seed: 0,
            tokenizer: "lexeme".into(),
            max_target: MAX_TARGET,
            max_examples: 18,
        }
    }
}

impl BuildConfig {
    /// The 671-instance evaluation split: 333 small, 333 medium, 5 large.
    pub fn eval_split() -> BuildConfig {
        BuildConfig {
            tier_mix: [(Tier::Small, 333), (Tier::Medium, 333), (Tier::Large, 5)].into_iter().collect(),
            ..BuildConfig::default()
        }
    }

    pub fn from_toml_file(path: &Path) -> Result<BuildConfig, ConfigError> {
        load_toml(path)
    }

    pub fn total(&self) -> usize {
        self.tier_mix.values().sum()
    }
}

#[derive(Debug, Error)]
pub enum BuildError {
    #[error(transparent)]
    UnknownProgram(#[from] GenerateError),
    #[error("tier {tier} cannot be sampled with max target {max_target}")]
    InfeasibleTierMix { tier: Tier, max_target: usize },
    #[error("no {tier} instance of {program} fits in {budget} tokens")]
    BudgetTooSmall { program: String, tier: Tier, budget: usize },
    #[error("unknown tokenizer {0:?}")]
    UnknownTokenizer(String),
    #[error("max target {0} outside 4..={MAX_TARGET}")]
    BadMaxTarget(usize),
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BuildReport {
    pub produced: BTreeMap<Tier, usize>,
    pub per_program: BTreeMap<String, usize>,
    /// Instances whose examples were cut down to three.
    pub reduced: usize,
    /// Draws rejected because even three examples overflowed the budget.
    pub excluded_draws: usize,
    pub duplicate_draws: usize,
}

/// `(target, largest example)` pairs landing in `tier`.
fn feasible_pairs(tier: Tier, max_target: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for target in MIN_EXAMPLES + 1..=max_target {
        for m in MIN_EXAMPLES..target {
            if classify_tier(target - m) == tier {
                out.push((target, m));
            }
        }
    }
    out
}

struct Sampler<'a> {
    rng: ChaCha8Rng,
    cache: HashMap<(&'static str, usize), String>,
    cfg: &'a BuildConfig,
}

impl Sampler<'_> {
    fn constraint(&mut self, program: &'static str, n: usize) -> String {
        self.cache
            .entry((program, n))
            .or_insert_with(|| {
                let spec = find_program(program).expect("resolved up front");
                generate(spec, n).expect("sizes stay within the supported range").to_canonical()
            })
            .clone()
    }

    /// Example sizes: `m` plus a random subset of `1..m`.
    fn example_sizes(&mut self, m: usize) -> Vec<usize> {
        let hi = m.min(self.cfg.max_examples.max(MIN_EXAMPLES));
        let count = self.rng.gen_range(MIN_EXAMPLES..=hi);
        let mut sizes: Vec<usize> = sample(&mut self.rng, m - 1, count - 1).into_iter().map(|i| i + 1).collect();
        sizes.push(m);
        sizes.sort_unstable();
        sizes
    }
}

/// Samples the benchmark deterministically from `cfg.seed`. Instances come
/// back sorted by id.
pub fn build_benchmark(cfg: &BuildConfig) -> Result<(Vec<BenchmarkInstance>, BuildReport), BuildError> {
    if cfg.max_target <= MIN_EXAMPLES || cfg.max_target > MAX_TARGET {
        return Err(BuildError::BadMaxTarget(cfg.max_target));
    }
    let estimator = estimator_by_id(&cfg.tokenizer).ok_or_else(|| BuildError::UnknownTokenizer(cfg.tokenizer.clone()))?;
    let programs: Vec<&'static str> = if cfg.programs.is_empty() {
        list_programs().iter().map(|p| p.name).collect()
    } else {
        cfg.programs.iter().map(|p| find_program(p).map(|s| s.name)).collect::<Result<_, _>>()?
    };

    let mut pairs = BTreeMap::new();
    for (&tier, &count) in &cfg.tier_mix {
        if count == 0 {
            continue;
        }
        let p = feasible_pairs(tier, cfg.max_target);
        if p.is_empty() {
            return Err(BuildError::InfeasibleTierMix { tier, max_target: cfg.max_target });
        }
        pairs.insert(tier, p);
    }

    let mut sampler = Sampler { rng: ChaCha8Rng::seed_from_u64(cfg.seed), cache: HashMap::new(), cfg };
    let mut report = BuildReport::default();
    let mut seen = HashSet::new();
    let mut out = Vec::with_capacity(cfg.total());
    let mut counters: HashMap<(&str, Tier), usize> = HashMap::new();

    for (tier, tier_pairs) in &pairs {
        let tier = *tier;
        for slot in 0..cfg.tier_mix[&tier] {
            let program = programs[slot % programs.len()];
            let mut draws = 0;
            let instance = loop {
                if draws == MAX_DRAWS {
                    return Err(BuildError::BudgetTooSmall {
                        program: program.to_owned(),
                        tier,
                        budget: cfg.token_budget,
                    });
                }
                draws += 1;
                let (target, m) = tier_pairs[sampler.rng.gen_range(0..tier_pairs.len())];
                let sizes = sampler.example_sizes(m);
                let key = (program, sizes.clone(), target);
                if seen.contains(&key) && draws <= DEDUP_DRAWS {
                    report.duplicate_draws += 1;
                    continue;
                }
                let examples: Vec<Example> = sizes
                    .iter()
                    .map(|&n| Example { n, constraint: sampler.constraint(program, n) })
                    .collect();
                let examples = match reduce_examples(&examples, target, cfg.token_budget, estimator.as_ref()) {
                    Reduction::Kept(e) => e,
                    Reduction::Reduced(e) => {
                        report.reduced += 1;
                        e
                    }
                    Reduction::Excluded => {
                        report.excluded_draws += 1;
                        continue;
                    }
                };
                seen.insert(key);
                let jump = target - examples.last().map(|e| e.n).unwrap_or(0);
                let idx = counters.entry((program, tier)).or_insert(0);
                let id = format!("{program}-{tier}-{:04}", *idx);
                *idx += 1;
                break BenchmarkInstance {
                    id,
                    program: program.to_owned(),
                    examples,
                    target_n: target,
                    solution: sampler.constraint(program, target),
                    tier,
                    jump,
                };
            };
            *report.produced.entry(tier).or_insert(0) += 1;
            *report.per_program.entry(program.to_owned()).or_insert(0) += 1;
            out.push(instance);
        }
    }
    out.sort_by(|a, b| a.id.cmp(&b.id));
    Ok((out, report))
}
