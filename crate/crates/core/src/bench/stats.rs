use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::BufReader;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::tokens::TokenEstimator;
use super::{read_benchmark, render_eval_prompt, BenchIoError, BenchmarkInstance, Tier};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DistributionStats {
    pub min: f64,
    pub max: f64,
    pub mean: f64,
    pub median: f64,
    /// Sample standard deviation; zero below two values.
    pub std: f64,
    pub total: f64,
    pub p25: f64,
    pub p75: f64,
    pub p90: f64,
    pub p95: f64,
    pub p99: f64,
}

/// Linear interpolation between closest ranks over sorted data.
fn percentile(sorted: &[f64], p: f64) -> f64 {
    if sorted.is_empty() {
        return 0.0;
    }
    let pos = p / 100.0 * (sorted.len() - 1) as f64;
    let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

impl DistributionStats {
    pub fn from_values(values: &[f64]) -> DistributionStats {
        if values.is_empty() {
            return DistributionStats::default();
        }
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        let n = v.len() as f64;
        let total: f64 = v.iter().sum();
        let mean = total / n;
        let std = if v.len() < 2 {
            0.0
        } else {
            (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        };
        DistributionStats {
            min: v[0],
            max: v[v.len() - 1],
            mean,
            median: percentile(&v, 50.0),
            std,
            total,
            p25: percentile(&v, 25.0),
            p75: percentile(&v, 75.0),
            p90: percentile(&v, 90.0),
            p95: percentile(&v, 95.0),
            p99: percentile(&v, 99.0),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TierStats {
    pub count: usize,
    pub percentage: f64,
    pub avg_question_tokens: f64,
    pub avg_answer_tokens: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Stats {
    pub count: usize,
    pub tokenizer: String,
    pub tiers: BTreeMap<Tier, TierStats>,
    pub programs: BTreeMap<String, usize>,
    pub target_n: DistributionStats,
    pub unique_targets: Vec<usize>,
    pub example_count: DistributionStats,
    pub question_tokens: DistributionStats,
    pub answer_tokens: DistributionStats,
}

pub fn profile_instances(instances: &[BenchmarkInstance], estimator: &dyn TokenEstimator) -> Stats {
    let q: Vec<f64> = instances.iter().map(|i| estimator.estimate(&render_eval_prompt(i)) as f64).collect();
    let a: Vec<f64> = instances.iter().map(|i| estimator.estimate(&i.solution) as f64).collect();
    let mut tiers: BTreeMap<Tier, TierStats> = BTreeMap::new();
    for (idx, inst) in instances.iter().enumerate() {
        let t = tiers.entry(inst.tier).or_default();
        t.count += 1;
        t.avg_question_tokens += q[idx];
        t.avg_answer_tokens += a[idx];
    }
    for t in tiers.values_mut() {
        let c = t.count as f64;
        t.percentage = 100.0 * c / instances.len() as f64;
        t.avg_question_tokens /= c;
        t.avg_answer_tokens /= c;
    }
    let mut programs = BTreeMap::new();
    for inst in instances {
        *programs.entry(inst.program.clone()).or_insert(0) += 1;
    }
    let targets: Vec<f64> = instances.iter().map(|i| i.target_n as f64).collect();
    let examples: Vec<f64> = instances.iter().map(|i| i.examples.len() as f64).collect();
    Stats {
        count: instances.len(),
        tokenizer: estimator.id().to_owned(),
        tiers,
        programs,
        target_n: DistributionStats::from_values(&targets),
        unique_targets: instances.iter().map(|i| i.target_n).collect::<BTreeSet<_>>().into_iter().collect(),
        example_count: DistributionStats::from_values(&examples),
        question_tokens: DistributionStats::from_values(&q),
        answer_tokens: DistributionStats::from_values(&a),
    }
}

/// Profiles a benchmark file; a malformed line aborts with its line number.
pub fn profile(path: &Path, estimator: &dyn TokenEstimator) -> Result<Stats, BenchIoError> {
    let instances = read_benchmark(BufReader::new(File::open(path)?))?;
    Ok(profile_instances(&instances, estimator))
}
