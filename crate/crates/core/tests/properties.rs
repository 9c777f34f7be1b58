mod common;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use common::*;
use wcbench::difflogic::{brute_force_sat, check_feasible, normalize_atoms, small_model_bound, BruteForce, FeasibilityResult, Normalized};
use wcbench::equivalence::{Checker, SolverConfig, Strategy as Solver, Verdict};
use wcbench::generators::{find_program, generate};
use wcbench::sgf::{compute_reward, Reward};
use wcbench::smtlib::{parse_formula, Atom, Cmp, Formula, Term};

fn arb_cmp() -> impl Strategy<Value = Cmp> {
    prop::sample::select(CMPS.to_vec())
}

fn arb_term() -> impl Strategy<Value = Term> {
    let leaf = prop_oneof![(0u32..8).prop_map(Term::var), (-1_000_000i64..1_000_000).prop_map(Term::Int)];
    leaf.prop_recursive(3, 12, 2, |inner| {
        prop_oneof![
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Term::add(a, b)),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Term::sub(a, b)),
            (inner.clone(), inner).prop_map(|(a, b)| Term::mul(a, b)),
        ]
    })
}

fn arb_atom() -> impl Strategy<Value = Atom> {
    (arb_cmp(), arb_term(), arb_term()).prop_map(|(op, l, r)| Atom::new(op, l, r))
}

fn arb_formula() -> impl Strategy<Value = Formula> {
    arb_atom().prop_map(Formula::Atom).prop_recursive(4, 24, 4, |inner| {
        prop_oneof![
            prop::collection::vec(inner.clone(), 2..5).prop_map(Formula::And),
            prop::collection::vec(inner.clone(), 2..5).prop_map(Formula::Or),
            inner.prop_map(Formula::negate),
        ]
    })
}

/// Pads every token boundary with a random run of blanks.
fn respace(text: &str, pads: &[u8]) -> String {
    let mut out = String::new();
    let mut k = 0;
    let mut pad = |out: &mut String| {
        let p = pads[k % pads.len()];
        k += 1;
        for i in 0..p % 4 {
            out.push(if (p >> 2) % 3 == i { '\n' } else { ' ' });
        }
    };
    for ch in text.chars() {
        match ch {
            ' ' => {
                out.push(' ');
                pad(&mut out);
            }
            '(' => {
                out.push('(');
                pad(&mut out);
            }
            ')' => {
                pad(&mut out);
                out.push(')');
            }
            c => out.push(c),
        }
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn canonical_round_trip(f in arb_formula()) {
        let text = f.to_canonical();
        prop_assert_eq!(parse_formula(&text).unwrap(), f.left_folded());
    }

    #[test]
    fn whitespace_insensitive(f in arb_formula(), pads in prop::collection::vec(any::<u8>(), 1..64)) {
        let text = f.to_canonical();
        let spaced = respace(&text, &pads);
        prop_assert_eq!(parse_formula(&spaced).unwrap(), parse_formula(&text).unwrap());
    }

    #[test]
    fn flatten_counts_atoms(atoms in prop::collection::vec(arb_atom(), 1..40)) {
        let f = Formula::conjunction(atoms.iter().cloned().map(Formula::Atom).collect()).left_folded();
        prop_assert_eq!(f.flatten_conjunction().len(), atoms.len());
        prop_assert_eq!(parse_formula(&f.to_canonical()).unwrap().flatten_conjunction().len(), atoms.len());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn difference_logic_agrees_with_brute_force(seed in any::<u64>(), vars in 1u32..=5, n in 1usize..=6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let atoms: Vec<Atom> = (0..n).map(|_| random_dl_atom(&mut rng, vars, 3, &[Cmp::Le, Cmp::Lt, Cmp::Eq])).collect();
        let f = conj(&atoms);
        let Normalized::Constraints(cs) = normalize_atoms(&atoms) else { panic!("fragment atoms normalize") };
        let b = small_model_bound(f.free_vars().len(), f.max_abs_literal());
        let brute = brute_force_sat(&f, -b, b).unwrap();
        match check_feasible(&cs) {
            FeasibilityResult::Feasible(m) => {
                prop_assert!(matches!(brute, BruteForce::Sat(_)));
                prop_assert!(cs.iter().all(|c| c.holds(&m)));
                prop_assert!(f.eval(&m));
            }
            FeasibilityResult::Infeasible(cycle) => {
                prop_assert_eq!(brute, BruteForce::Unsat);
                prop_assert!(!cycle.is_empty());
                prop_assert!(cycle.iter().map(|c| c.c).sum::<i64>() < 0);
                prop_assert!(cycle.iter().all(|c| cs.contains(c)));
                // consecutive constraints chain (x - y) + (y' - ...) so the
                // left-hand sides telescope to zero
                for w in cycle.windows(2) {
                    prop_assert_eq!(w[0].x, w[1].y);
                }
                prop_assert_eq!(cycle.last().unwrap().x, cycle[0].y);
            }
            FeasibilityResult::Unsupported(r) => prop_assert!(false, "unsupported: {}", r),
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn strategies_agree(seed in any::<u64>(), vars in 1u32..=3, n in 1usize..=4, variant in any::<bool>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let atoms = random_dl_conjunction(&mut rng, vars, n, 3);
        let a = conj(&atoms);
        let b = if variant { equivalent_variant(&mut rng, &atoms) } else { mutated(&mut rng, &atoms) };
        let dl = Checker::new(SolverConfig::only(Solver::DiffLogic)).check(&a, &b).unwrap();
        let bf = Checker::new(SolverConfig::only(Solver::BruteForce)).check(&a, &b).unwrap();
        prop_assert_eq!(dl.is_equivalent(), bf.is_equivalent(), "{} vs {}: {} / {}", a, b, dl, bf);
        prop_assert!(!matches!(dl, Verdict::Unknown { .. }), "diff logic gave {}", dl);
        prop_assert!(!matches!(bf, Verdict::Unknown { .. }), "brute force gave {}", bf);
        prop_assert_eq!(dl.is_equivalent(), !differ_in_box(&a, &b, vars, box_bound(vars, 3)));
    }

    #[test]
    fn equivalence_is_reflexive_symmetric_and_order_blind(seed in any::<u64>(), vars in 1u32..=4, n in 1usize..=6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let checker = Checker::new(SolverConfig::internal());
        let atoms = random_dl_conjunction(&mut rng, vars, n, 3);
        let a = conj(&atoms);
        let v1 = equivalent_variant(&mut rng, &atoms);
        let v2 = equivalent_variant(&mut rng, &atoms);
        let m = mutated(&mut rng, &atoms);
        prop_assert!(checker.check(&a, &a).unwrap().is_equivalent());
        prop_assert!(checker.check(&a, &v1).unwrap().is_equivalent());
        prop_assert!(checker.check(&v1, &v2).unwrap().is_equivalent());
        prop_assert!(checker.check(&a, &v2).unwrap().is_equivalent());
        let fwd = checker.check(&a, &m).unwrap();
        let bwd = checker.check(&m, &a).unwrap();
        prop_assert_eq!(fwd.is_equivalent(), bwd.is_equivalent());
        // a variant of a stays on the same side against the mutant
        prop_assert_eq!(checker.check(&v1, &m).unwrap().is_equivalent(), fwd.is_equivalent());
        for (x, y, v) in [(&a, &m, &fwd), (&m, &a, &bwd)] {
            if let Verdict::NotEquivalent { witness, .. } = v {
                prop_assert_ne!(x.eval(witness), y.eval(witness));
            }
        }
    }

    #[test]
    fn rewards_stay_in_the_level_set(
        pre in "[a-z <>/]{0,12}",
        think in "[a-z ]{0,12}",
        answer in prop_oneof![Just("(assert (<= in0 in1))".to_string()), Just("(assert (<= in1 in0))".to_string()), "[()a-z0-9 <=]{0,20}"],
        post in "[a-z <>/]{0,12}",
        layout in 0u8..4,
    ) {
        let gt = parse_formula("(assert (<= in0 in1))").unwrap();
        let text = match layout {
            0 => format!("<think>{think}</think><answer>{answer}</answer>"),
            1 => format!("{pre}<think>{think}</think><answer>{answer}</answer>{post}"),
            2 => format!("{pre}<answer>{answer}</answer>{post}"),
            _ => format!("{pre}{answer}{post}"),
        };
        let cfg = SolverConfig::internal();
        let r1 = compute_reward(&text, &gt, &cfg);
        let r2 = compute_reward(&text, &gt, &cfg);
        prop_assert_eq!(&r1, &r2);
        prop_assert!([0.0, 0.1, 0.9, 1.0].contains(&r1.reward.value()));
        let expected = 0.1 * f64::from(u8::from(r1.syntactic)) + 0.9 * f64::from(u8::from(r1.semantic));
        prop_assert!((r1.reward.value() - expected).abs() < 1e-12);
        if r1.semantic {
            prop_assert!(parse_formula(r1.extracted_answer.as_deref().unwrap()).is_ok());
        }
    }

    #[test]
    fn deleting_an_adjacent_quicksort_atom_costs_the_semantic_part(n in 2usize..12, pick in any::<prop::sample::Index>()) {
        let gt = generate(find_program("QuickSort").unwrap(), n).unwrap();
        let cfg = SolverConfig::internal();
        let full = format!("<think>t</think><answer>{}</answer>", gt.to_canonical());
        prop_assert_eq!(compute_reward(&full, &gt, &cfg).reward, Reward::Full);
        let i = pick.index(n - 1);
        let target = Atom::new(Cmp::Le, Term::var(i as u32), Term::var(i as u32 + 1));
        let kept: Vec<Formula> = gt.flatten_conjunction().into_iter().filter(|f| *f != Formula::Atom(target.clone())).collect();
        prop_assert_eq!(kept.len(), n * (n - 1) / 2 - 1);
        let broken = Formula::conjunction(kept).left_folded();
        let text = format!("<think>t</think><answer>{}</answer>", broken.to_canonical());
        prop_assert_eq!(compute_reward(&text, &gt, &cfg).reward, Reward::SyntacticOnly);
    }
}

#[test]
fn transitivity_on_triples() {
    let checker = Checker::new(SolverConfig::internal());
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..200 {
        let atoms = random_dl_conjunction(&mut rng, 3, 4, 3);
        let a = conj(&atoms);
        let b = equivalent_variant(&mut rng, &atoms);
        let c = if rand::Rng::gen_bool(&mut rng, 0.5) { equivalent_variant(&mut rng, &atoms) } else { mutated(&mut rng, &atoms) };
        let ab = checker.check(&a, &b).unwrap().is_equivalent();
        let bc = checker.check(&b, &c).unwrap().is_equivalent();
        let ac = checker.check(&a, &c).unwrap().is_equivalent();
        if ab && bc {
            assert!(ac);
        }
        if ab && ac {
            assert!(bc);
        }
    }
}
