mod support;

use std::collections::HashSet;

use proptest::prelude::*;
use rand::SeedableRng;
use relplan_core::wordproblem::{
    check_record, compose, eval_expr, extract_answer, fill_calc_annotations, AnnotatedProblem, ExprError, WpFormat,
};
use support::shunting_yard;

fn fixtures() -> Vec<AnnotatedProblem> {
    include_str!("fixtures/wordproblems.jsonl").lines().map(|l| serde_json::from_str(l).unwrap()).collect()
}

#[test]
fn fixture_equations_reproduce_final_answers() {
    for rec in fixtures() {
        check_record(&rec).unwrap_or_else(|e| panic!("{}: {e}", rec.id));
    }
}

#[test]
fn fixture_compositions() {
    let recs = fixtures();
    for fmt in WpFormat::ALL {
        let mut seen = HashSet::new();
        for rec in &recs {
            let Ok(out) = compose(rec, fmt) else {
                // only the formats that need a missing annotation may fail
                assert!(rec.steps.iter().any(|s| s.prose.is_none() || s.socratic.is_none()));
                continue;
            };
            assert_eq!(compose(rec, fmt).unwrap(), out, "deterministic");
            assert!(seen.insert((out.prompt.clone(), out.target.clone())), "{} {fmt}", rec.id);
            if fmt != WpFormat::RelationMultitaskPlan {
                assert_eq!(extract_answer(&out.target), extract_answer(&format!("#### {}", rec.final_answer)));
            }
            // equations in composed targets are already filled and correct
            let calc = fill_calc_annotations(&out.target);
            assert_eq!(calc.text, out.target);
            assert!(calc.mismatches.is_empty() && calc.errors.is_empty(), "{}", rec.id);
        }
    }
}

#[test]
fn filling_blank_annotations_restores_fixture() {
    for rec in fixtures() {
        let full = compose(&rec, WpFormat::EquationOnly).unwrap().target;
        let blank: String = full
            .lines()
            .map(|l| match l.strip_prefix("<<").and_then(|l| l.rsplit_once('=')) {
                Some((expr, _)) => format!("<<{expr}=>>"),
                None => l.to_owned(),
            })
            .collect::<Vec<_>>()
            .join("\n");
        let filled = fill_calc_annotations(&blank);
        assert_eq!(filled.filled, rec.steps.len());
        assert_eq!(filled.text, full);
    }
}

#[test]
fn evaluator_matches_shunting_yard() {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2024);
    let mut div_zero = 0;
    for _ in 0..2000 {
        let e = shunting_yard::random_expr(&mut rng, 4);
        match (eval_expr(&e), shunting_yard::evaluate(&e)) {
            (Ok(a), Some(b)) => assert_eq!(a, b, "{e}"),
            (Err(ExprError::DivisionByZero), None) => div_zero += 1,
            (got, want) => panic!("{e}: {got:?} vs {want:?}"),
        }
    }
    assert!(div_zero < 200);
}

proptest! {
    #[test]
    fn fill_is_idempotent(parts in proptest::collection::vec(("[a-z ]{0,6}", "[0-9+*/() -]{0,8}", "[0-9]{0,2}"), 0..6)) {
        let text: String = parts.iter().map(|(t, e, c)| format!("{t}<<{e}={c}>>")).collect();
        let once = fill_calc_annotations(&text);
        let twice = fill_calc_annotations(&once.text);
        prop_assert_eq!(&twice.text, &once.text);
        prop_assert_eq!(twice.filled, 0);
    }

    #[test]
    fn evaluator_total_on_arbitrary_input(s in "[0-9.+*/() -]{0,20}") {
        // never panics; errors point inside the input
        if let Err(ExprError::SyntaxError(pos)) = eval_expr(&s) {
            prop_assert!(pos <= s.len());
        }
    }
}
