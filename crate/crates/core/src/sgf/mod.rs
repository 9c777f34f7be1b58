//! Solver-guided reward for constraint-writing completions.
//!
//! A completion earns 0.1 for following the `<think>…</think><answer>…</answer>`
//! layout and 0.9 for an answer equivalent to the ground truth. The two parts
//! are scored independently unless `strict_semantic_requires_template` is set.

pub mod service;

use serde::{Deserialize, Serialize, Serializer};

use crate::equivalence::{Checker, SolverConfig, Verdict};
use crate::smtlib::{parse_formula, Formula};

const THINK_OPEN: &str = "<think>";
const THINK_CLOSE: &str = "</think>";
const ANSWER_OPEN: &str = "<answer>";
const ANSWER_CLOSE: &str = "</answer>";
const TAGS: [&str; 4] = [THINK_OPEN, THINK_CLOSE, ANSWER_OPEN, ANSWER_CLOSE];

/// True iff the trimmed text is one think block followed by one answer block
/// and nothing else. Neither body may contain any of the four tags.
pub fn check_template(completion: &str) -> bool {
    let text = completion.trim();
    let Some(rest) = text.strip_prefix(THINK_OPEN) else { return false };
    let Some((think, rest)) = rest.split_once(THINK_CLOSE) else { return false };
    let Some(rest) = rest.trim_start().strip_prefix(ANSWER_OPEN) else { return false };
    let Some(answer) = rest.strip_suffix(ANSWER_CLOSE) else { return false };
    !TAGS.iter().any(|t| think.contains(t) || answer.contains(t))
}

/// Trimmed body of the last complete `<answer>…</answer>` block.
pub fn extract_answer(completion: &str) -> Option<&str> {
    let end = completion.rfind(ANSWER_CLOSE)?;
    let start = completion[..end].rfind(ANSWER_OPEN)? + ANSWER_OPEN.len();
    Some(completion[start..end].trim())
}

/// The four attainable reward levels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Reward {
    Zero,
    SyntacticOnly,
    SemanticOnly,
    Full,
}

impl Reward {
    pub fn from_parts(syntactic: bool, semantic: bool) -> Reward {
        match (syntactic, semantic) {
            (false, false) => Reward::Zero,
            (true, false) => Reward::SyntacticOnly,
            (false, true) => Reward::SemanticOnly,
            (true, true) => Reward::Full,
        }
    }

    /// Exact value in tenths.
    pub fn tenths(self) -> u8 {
        match self {
            Reward::Zero => 0,
            Reward::SyntacticOnly => 1,
            Reward::SemanticOnly => 9,
            Reward::Full => 10,
        }
    }

    pub fn value(self) -> f64 {
        f64::from(self.tenths()) / 10.0
    }
}

impl Serialize for Reward {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(self.value())
    }
}

impl<'de> Deserialize<'de> for Reward {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let x = f64::deserialize(d)?;
        [Reward::Zero, Reward::SyntacticOnly, Reward::SemanticOnly, Reward::Full]
            .into_iter()
            .find(|r| (r.value() - x).abs() < 1e-9)
            .ok_or_else(|| serde::de::Error::custom(format!("{x} is not a reward level")))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RewardBreakdown {
    pub reward: Reward,
    pub syntactic: bool,
    pub semantic: bool,
    pub detail: String,
    pub extracted_answer: Option<String>,
    /// Present whenever the answer parsed and a checker ran.
    pub verdict: Option<Verdict>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RewardOptions {
    /// Withhold the semantic part unless the layout check passed.
    pub strict_semantic_requires_template: bool,
}

/// Scores completions against ground truths with a shared [`Checker`].
#[derive(Debug, Clone)]
pub struct RewardModel {
    checker: Checker,
    options: RewardOptions,
}

impl RewardModel {
    pub fn new(cfg: SolverConfig, options: RewardOptions) -> RewardModel {
        RewardModel { checker: Checker::new(cfg), options }
    }

    pub fn checker(&self) -> &Checker {
        &self.checker
    }

    pub fn score(&self, completion: &str, ground_truth: &Formula) -> RewardBreakdown {
        let syntactic = check_template(completion);
        let answer = extract_answer(completion);
        let (semantic, detail, verdict) = match answer {
            None => (false, "no <answer> block".to_owned(), None),
            Some(_) if self.options.strict_semantic_requires_template && !syntactic => {
                (false, "template check failed; semantic scoring skipped".to_owned(), None)
            }
            Some(text) => match parse_formula(text) {
                Err(e) => (false, format!("answer does not parse: {e}"), None),
                Ok(f) => match self.checker.check(&f, ground_truth) {
                    Ok(v) => (v.is_equivalent(), v.to_string(), Some(v)),
                    Err(e) => (false, format!("solver error: {e}"), None),
                },
            },
        };
        RewardBreakdown {
            reward: Reward::from_parts(syntactic, semantic),
            syntactic,
            semantic,
            detail,
            extracted_answer: answer.map(str::to_owned),
            verdict,
        }
    }
}

pub fn compute_reward(completion: &str, ground_truth: &Formula, cfg: &SolverConfig) -> RewardBreakdown {
    RewardModel::new(cfg.clone(), RewardOptions::default()).score(completion, ground_truth)
}

#[cfg(test)]
mod tests {
    use super::*;

    const QS3: &str = "(assert (and (and (<= in0 in2) (<= in1 in2)) (<= in0 in1)))";

    #[test]
    fn template_cases() {
        assert!(check_template("<think>reasoning</think><answer>(assert (<= in0 in1))</answer>"));
        assert!(check_template("  <think>a</think>\n\n<answer>b</answer>\n"));
        assert!(check_template("<think></think><answer></answer>"));
        assert!(!check_template("<answer>x</answer>"));
        assert!(!check_template("preamble <think>a</think><answer>b</answer>"));
        assert!(!check_template("<think>a</think><answer>b</answer> trailer"));
        assert!(!check_template("<think>a</think>x<answer>b</answer>"));
        assert!(!check_template("<think>a<think>b</think><answer>c</answer>"));
        assert!(!check_template("<think>a</think><answer>b</answer><answer>c</answer>"));
        assert!(!check_template("<think>a</think><answer>b<answer>c</answer>"));
        assert!(!check_template(""));
    }

    #[test]
    fn extraction_cases() {
        assert_eq!(
            extract_answer("<think>t</think><answer> (assert (<= in0 in1)) </answer>"),
            Some("(assert (<= in0 in1))")
        );
        assert_eq!(
            extract_answer("junk <answer>(assert (<= in0 in1))</answer> junk"),
            Some("(assert (<= in0 in1))")
        );
        assert_eq!(extract_answer("<answer>unclosed"), None);
        assert_eq!(extract_answer("<answer>a</answer><answer>b</answer>"), Some("b"));
        assert_eq!(extract_answer("<answer>a</answer><answer>b"), Some("a"));
        assert_eq!(extract_answer("</answer><answer>"), None);
    }

    #[test]
    fn reward_levels() {
        let gt = parse_formula(QS3).unwrap();
        let cfg = SolverConfig::internal();
        let good = format!("<think>sorted</think><answer>{QS3}</answer>");
        let r = compute_reward(&good, &gt, &cfg);
        assert_eq!((r.reward, r.syntactic, r.semantic), (Reward::Full, true, true));

        let wrong = "<think>x</think><answer>(assert (<= in0 in1))</answer>";
        assert_eq!(compute_reward(wrong, &gt, &cfg).reward, Reward::SyntacticOnly);

        let junk = format!("Sure! <answer>{QS3}</answer> hope that helps");
        assert_eq!(compute_reward(&junk, &gt, &cfg).reward, Reward::SemanticOnly);

        let garbage = "<think>x</think><answer>(assert (<= in0</answer>";
        let r = compute_reward(garbage, &gt, &cfg);
        assert_eq!(r.reward, Reward::SyntacticOnly);
        assert!(r.detail.contains("parse"));
        assert_eq!(compute_reward("nothing", &gt, &cfg).reward, Reward::Zero);
    }

    #[test]
    fn strict_mode_withholds_semantics() {
        let gt = parse_formula(QS3).unwrap();
        let m = RewardModel::new(
            SolverConfig::internal(),
            RewardOptions { strict_semantic_requires_template: true },
        );
        let junk = format!("Sure! <answer>{QS3}</answer>");
        assert_eq!(m.score(&junk, &gt).reward, Reward::Zero);
    }

    #[test]
    fn reward_values_are_exact() {
        let values: Vec<f64> = [Reward::Zero, Reward::SyntacticOnly, Reward::SemanticOnly, Reward::Full]
            .iter()
            .map(|r| r.value())
            .collect();
        assert_eq!(values, vec![0.0, 0.1, 0.9, 1.0]);
        assert_eq!(serde_json::to_string(&Reward::SyntacticOnly).unwrap(), "0.1");
        assert_eq!(serde_json::from_str::<Reward>("0.9").unwrap(), Reward::SemanticOnly);
        assert!(serde_json::from_str::<Reward>("0.5").is_err());
    }
}
