use std::collections::BTreeSet;

use proptest::prelude::*;
use wcbench::bench::{
    build_benchmark, classify_tier, profile, read_benchmark, reduce_examples, write_benchmark, BuildConfig, Example,
    LexemeEstimator, Reduction, Tier, TokenEstimator,
};
use wcbench::equivalence::{Checker, SolverConfig};
use wcbench::generators::{find_program, generate};
use wcbench::smtlib::parse_formula;

fn cfg(seed: u64, small: usize, medium: usize, large: usize) -> BuildConfig {
    BuildConfig {
        tier_mix: [(Tier::Small, small), (Tier::Medium, medium), (Tier::Large, large)].into_iter().collect(),
        seed,
        ..BuildConfig::default()
    }
}

#[test]
fn emitted_solutions_match_generators() {
    let (instances, report) = build_benchmark(&cfg(5, 40, 40, 8)).unwrap();
    assert_eq!(instances.len(), 88);
    assert_eq!(report.produced.values().sum::<usize>(), 88);
    let checker = Checker::new(SolverConfig::internal());
    for inst in &instances {
        inst.validate().unwrap();
        assert_eq!(inst.tier, classify_tier(inst.jump));
        let expected = generate(find_program(&inst.program).unwrap(), inst.target_n).unwrap();
        let solution = parse_formula(&inst.solution).unwrap();
        assert!(checker.check(&solution, &expected).unwrap().is_equivalent(), "{}", inst.id);
        for e in &inst.examples {
            let expected = generate(find_program(&inst.program).unwrap(), e.n).unwrap();
            assert_eq!(parse_formula(&e.constraint).unwrap(), expected);
        }
    }
    let programs: BTreeSet<&str> = instances.iter().map(|i| i.program.as_str()).collect();
    assert_eq!(programs.len(), 8);
}

#[test]
fn file_round_trip_and_profile() {
    let (instances, _) = build_benchmark(&cfg(2, 6, 6, 2)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bench.jsonl");
    write_benchmark(&instances, std::fs::File::create(&path).unwrap()).unwrap();
    let back = read_benchmark(std::io::BufReader::new(std::fs::File::open(&path).unwrap())).unwrap();
    assert_eq!(back, instances);

    let stats = profile(&path, &LexemeEstimator).unwrap();
    assert_eq!(stats.count, 14);
    assert_eq!(stats.tiers[&Tier::Large].count, 2);
    let pct: f64 = stats.tiers.values().map(|t| t.percentage).sum();
    assert!((pct - 100.0).abs() < 1e-9);
    assert!(stats.unique_targets.iter().all(|&t| (4..=30).contains(&t)));

    // a tampered line is reported with its number
    let mut text = std::fs::read_to_string(&path).unwrap();
    text.push_str("{\"id\":\"x\"}\n");
    std::fs::write(&path, text).unwrap();
    let err = profile(&path, &LexemeEstimator).unwrap_err();
    assert!(err.to_string().starts_with("line 15:"), "{err}");
}

#[test]
fn eval_split_shape() {
    let (instances, report) = build_benchmark(&BuildConfig::eval_split()).unwrap();
    assert_eq!(instances.len(), 671);
    assert_eq!(report.produced[&Tier::Small], 333);
    assert_eq!(report.produced[&Tier::Medium], 333);
    assert_eq!(report.produced[&Tier::Large], 5);
    let est = LexemeEstimator;
    for inst in &instances {
        let prompt = wcbench::bench::render_eval_prompt(inst);
        assert!(est.estimate(&prompt) <= 2048, "{}", inst.id);
    }
}

proptest! {
    #[test]
    fn tiers_partition_jumps(jump in 1usize..100_000) {
        let t = classify_tier(jump);
        let hits: Vec<Tier> = Tier::ALL
            .into_iter()
            .filter(|tier| {
                let (lo, hi) = tier.jump_range();
                jump >= lo && hi.is_none_or(|h| jump <= h)
            })
            .collect();
        prop_assert_eq!(hits, vec![t]);
    }

    #[test]
    fn reduction_keeps_a_subsequence(
        sizes in prop::collection::btree_set(1usize..25, 1..12),
        budget in 10usize..600,
    ) {
        let qs = find_program("QuickSort").unwrap();
        let examples: Vec<Example> = sizes
            .iter()
            .map(|&n| Example { n, constraint: generate(qs, n).unwrap().to_canonical() })
            .collect();
        match reduce_examples(&examples, 30, budget, &LexemeEstimator) {
            Reduction::Kept(kept) => prop_assert_eq!(kept, examples),
            Reduction::Reduced(kept) => {
                prop_assert_eq!(kept.len(), 3);
                let last = examples.len() - 1;
                prop_assert_eq!(&kept[0], &examples[0]);
                prop_assert_eq!(&kept[1], &examples[last / 2]);
                prop_assert_eq!(&kept[2], &examples[last]);
            }
            Reduction::Excluded => {}
        }
    }

    #[test]
    fn builds_are_seed_deterministic(seed in any::<u64>()) {
        let c = BuildConfig { programs: vec!["SameHundred".into(), "QuickSort".into()], ..cfg(seed, 3, 2, 1) };
        let (a, _) = build_benchmark(&c).unwrap();
        let (b, _) = build_benchmark(&c).unwrap();
        prop_assert_eq!(a.len(), 6);
        prop_assert_eq!(a, b);
    }
}
