/// Approximate token counter for prompt budgeting.
pub trait TokenEstimator: Send + Sync {
    fn id(&self) -> &'static str;
    fn estimate(&self, text: &str) -> usize;
}

/// Whitespace words, with every parenthesis and any trailing `?:,.;!` run
/// counted as separate lexemes. `(assert (<= in0 in1))` is 8 lexemes.
#[derive(Debug, Clone, Copy, Default)]
pub struct LexemeEstimator;

/// Plain whitespace-separated words.
#[derive(Debug, Clone, Copy, Default)]
pub struct WhitespaceEstimator;

const TRAILING: &[char] = &['?', ':', ',', '.', ';', '!'];

fn chunk_lexemes(chunk: &str) -> usize {
    if chunk.is_empty() {
        return 0;
    }
    let stem = chunk.trim_end_matches(TRAILING);
    let punct = chunk.len() - stem.len();
    usize::from(!stem.is_empty()) + punct
}

impl TokenEstimator for LexemeEstimator {
    fn id(&self) -> &'static str {
        "lexeme"
    }

    fn estimate(&self, text: &str) -> usize {
        text.split_whitespace()
            .map(|word| {
                let parens = word.chars().filter(|c| matches!(c, '(' | ')')).count();
                parens + word.split(['(', ')']).map(chunk_lexemes).sum::<usize>()
            })
            .sum()
    }
}

impl TokenEstimator for WhitespaceEstimator {
    fn id(&self) -> &'static str {
        "whitespace"
    }

    fn estimate(&self, text: &str) -> usize {
        text.split_whitespace().count()
    }
}

pub fn estimator_by_id(id: &str) -> Option<Box<dyn TokenEstimator>> {
    match id {
        "lexeme" => Some(Box::new(LexemeEstimator)),
        "whitespace" => Some(Box::new(WhitespaceEstimator)),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lexeme_counts() {
        let e = LexemeEstimator;
        assert_eq!(e.estimate("(assert (<= in0 in1))"), 8);
        assert_eq!(e.estimate(""), 0);
        assert_eq!(e.estimate("What is the constraint for N=11?"), 7);
        assert_eq!(e.estimate("N=1: None"), 3);
        assert_eq!(e.estimate("(assert (and  ( >=  in0 97)  ( <=  in0 122)))"), 16);
        assert_eq!(e.estimate("..."), 3);
    }

    #[test]
    fn whitespace_counts() {
        assert_eq!(WhitespaceEstimator.estimate("What is the constraint for N=11?"), 6);
        assert!(estimator_by_id("lexeme").is_some());
        assert!(estimator_by_id("qwen").is_none());
    }
}
