//! Planner properties: soundness against the simulator, optimality
//! against the exhaustive oracle, and determinism.

mod common;

use chainsolve::model::PlanAction;
use chainsolve::plan::{plan, simulate, PlanError, WorldModel};
use common::{oracle_min_plan_len, random_goal, random_world};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Largest optimal plan the generated goals can need: move one object
/// (find, pick, find, put) plus slack.
const ORACLE_DEPTH: usize = 5;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn planner_is_sound(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let world = random_world(&mut rng, 6, 5);
        let goal = random_goal(&mut rng, &world);
        match plan(&world, &goal) {
            Ok(found) => {
                prop_assert_eq!(found.actions.last(), Some(&PlanAction::Done));
                let dones = found.actions.iter().filter(|a| **a == PlanAction::Done).count();
                prop_assert_eq!(dones, 1);
                let outcome = simulate(&world, &found, Some(&goal)).unwrap();
                prop_assert_eq!(outcome.goal_satisfied, Some(true));
            }
            Err(PlanError::Unreachable { .. }) => {
                prop_assert_eq!(oracle_min_plan_len(&world, &goal, ORACLE_DEPTH), None);
            }
            Err(other) => return Err(TestCaseError::fail(format!("unexpected error {other:?}"))),
        }
    }

    #[test]
    fn planner_is_optimal(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let world = random_world(&mut rng, 4, 5);
        let goal = random_goal(&mut rng, &world);
        let oracle = oracle_min_plan_len(&world, &goal, ORACLE_DEPTH);
        match plan(&world, &goal) {
            Ok(found) => prop_assert_eq!(Some(found.actions.len() - 1), oracle),
            Err(PlanError::Unreachable { .. }) => prop_assert_eq!(oracle, None),
            Err(other) => return Err(TestCaseError::fail(format!("unexpected error {other:?}"))),
        }
    }

    #[test]
    fn planner_is_deterministic(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let world = random_world(&mut rng, 6, 5);
        let goal = random_goal(&mut rng, &world);
        let first = plan(&world, &goal);
        let second = plan(&world, &goal);
        prop_assert_eq!(&first, &second);
        // The same world read back from JSON plans identically.
        let reloaded = WorldModel::from_json(&world.to_json()).unwrap();
        prop_assert_eq!(&plan(&reloaded, &goal), &first);
    }
}

#[test]
fn two_hundred_worlds_match_the_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut solved = 0u32;
    for _ in 0..200 {
        let world = random_world(&mut rng, 4, 5);
        let goal = random_goal(&mut rng, &world);
        let oracle = oracle_min_plan_len(&world, &goal, ORACLE_DEPTH);
        match plan(&world, &goal) {
            Ok(found) => {
                assert_eq!(Some(found.actions.len() - 1), oracle);
                solved += 1;
            }
            Err(PlanError::Unreachable { .. }) => assert_eq!(oracle, None),
            Err(other) => panic!("unexpected error {other:?}"),
        }
    }
    assert!(solved > 150, "only {solved} of 200 goals were solvable");
}
