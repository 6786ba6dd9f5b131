//! Shortest-plan search and plan simulation.

use super::goal::{
    conjunction_holds, ground_goal, GroundAtom, GroundConjunction, GroundError, PlanGoal,
};
use super::WorldModel;
use crate::model::{ExecLimits, Plan, PlanAction};
use std::collections::{BTreeMap, BTreeSet, VecDeque};
use thiserror::Error;

pub const DEFAULT_STATE_BUDGET: usize = 100_000;

#[derive(Clone, Debug, Error, PartialEq, Eq)]
pub enum PlanError {
    #[error(transparent)]
    Ground(#[from] GroundError),
    #[error("no plan reaches the goal ({explored} states explored)")]
    Unreachable { explored: usize },
    #[error("state budget of {budget} exhausted before reaching the goal")]
    BudgetExhausted { budget: usize },
    #[error("planning ran past its deadline")]
    Timeout,
}

/// The dynamic part of a world: everything else is static during
/// search.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
struct State {
    robot_at: String,
    holding: Option<String>,
    at: BTreeMap<String, String>,
}

impl State {
    fn initial(world: &WorldModel) -> State {
        State {
            robot_at: world.robot_at.clone(),
            holding: world.holding.clone(),
            at: world.at.clone(),
        }
    }

    fn satisfies_any(&self, targets: &[GroundConjunction], world: &WorldModel) -> bool {
        targets
            .iter()
            .any(|conj| conjunction_holds(conj, &self.at, world))
    }

    /// Applicable successors in lexicographic order of the rendered
    /// action, which is the tie-break order for equal-length plans.
    /// Only goal-mentioned names are candidates: a plan touching any
    /// other object or location is never shorter.
    fn successors(&self, world: &WorldModel, relevant: &Relevant) -> Vec<(PlanAction, State)> {
        let mut out = Vec::new();
        for name in relevant.objects.union(&relevant.locations) {
            let dest = match self.at.get(name) {
                Some(loc) => loc.clone(),
                None if world.is_location(name) => name.clone(),
                // Held object: the robot is already with it.
                None => self.robot_at.clone(),
            };
            let mut next = self.clone();
            next.robot_at = dest;
            out.push((PlanAction::Find(name.clone()), next));
        }
        if self.holding.is_none() {
            for object in &relevant.objects {
                if self.at.get(object) == Some(&self.robot_at) {
                    let mut next = self.clone();
                    next.at.remove(object);
                    next.holding = Some(object.clone());
                    out.push((PlanAction::Pick(object.clone()), next));
                }
            }
        }
        if let Some(held) = &self.holding {
            let mut next = self.clone();
            next.at.insert(held.clone(), self.robot_at.clone());
            next.holding = None;
            out.push((PlanAction::Put(held.clone()), next));
        }
        out
    }
}

struct Relevant {
    objects: BTreeSet<String>,
    locations: BTreeSet<String>,
}

/// Resolves attribute literals against the static world: a satisfied
/// one drops out of its conjunction, a violated one makes the whole
/// conjunction unsatisfiable. What survives mentions positions only.
fn satisfiable_targets(
    grounded: Vec<GroundConjunction>,
    world: &WorldModel,
) -> Vec<GroundConjunction> {
    let mut targets = Vec::new();
    for conj in grounded {
        let mut kept = Vec::new();
        let mut dead = false;
        for lit in conj {
            match &lit.atom {
                GroundAtom::Attr { name, object } => {
                    if world.has_attr(object, name) != lit.positive {
                        dead = true;
                        break;
                    }
                }
                GroundAtom::At { .. } => kept.push(lit),
            }
        }
        if !dead {
            targets.push(kept);
        }
    }
    targets
}

pub fn plan(world: &WorldModel, goal: &PlanGoal) -> Result<Plan, PlanError> {
    plan_with_budget(world, goal, DEFAULT_STATE_BUDGET, &ExecLimits::none())
}

/// Breadth-first search for a shortest plan satisfying any grounding
/// of the goal. Successors are expanded in lexicographic action order,
/// so among equal-length plans the lexicographically least is found
/// first. `done()` is appended to the result, never searched over.
pub fn plan_with_budget(
    world: &WorldModel,
    goal: &PlanGoal,
    budget: usize,
    limits: &ExecLimits,
) -> Result<Plan, PlanError> {
    if limits.expired() {
        return Err(PlanError::Timeout);
    }
    let targets = satisfiable_targets(ground_goal(goal, world)?, world);
    if targets.is_empty() {
        return Err(PlanError::Unreachable { explored: 0 });
    }
    let mut relevant = Relevant {
        objects: BTreeSet::new(),
        locations: BTreeSet::new(),
    };
    for conj in &targets {
        for lit in conj {
            if let GroundAtom::At { object, location } = &lit.atom {
                relevant.objects.insert(object.clone());
                relevant.locations.insert(location.clone());
            }
        }
    }

    // Arena of discovered states with back-pointers for path recovery.
    let init = State::initial(world);
    let mut arena: Vec<(State, Option<(usize, PlanAction)>)> = vec![(init.clone(), None)];
    let mut seen: BTreeSet<State> = [init].into();
    let mut queue: VecDeque<usize> = [0].into();
    let mut work = 0u64;

    while let Some(index) = queue.pop_front() {
        work += 1;
        if work % 1024 == 0 && limits.expired() {
            return Err(PlanError::Timeout);
        }
        let state = arena[index].0.clone();
        if state.satisfies_any(&targets, world) {
            let mut actions = Vec::new();
            let mut cursor = index;
            while let Some((parent, action)) = arena[cursor].1.clone() {
                actions.push(action);
                cursor = parent;
            }
            actions.reverse();
            actions.push(PlanAction::Done);
            return Ok(Plan { actions });
        }
        for (action, next) in state.successors(world, &relevant) {
            if seen.contains(&next) {
                continue;
            }
            if arena.len() >= budget {
                return Err(PlanError::BudgetExhausted { budget });
            }
            seen.insert(next.clone());
            arena.push((next, Some((index, action))));
            queue.push_back(arena.len() - 1);
        }
    }
    Err(PlanError::Unreachable {
        explored: arena.len(),
    })
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SimOutcome {
    pub world: WorldModel,
    /// Present when a goal was supplied.
    pub goal_satisfied: Option<bool>,
}

#[derive(Clone, Debug, Error, PartialEq, Eq)]
pub enum SimulateError {
    #[error("plan must end with done() appearing exactly once")]
    Malformed,
    #[error("action {index} ({action}) fails: {reason}")]
    Precondition {
        /// 1-based, matching rendered plan numbering.
        index: usize,
        action: String,
        reason: String,
    },
    #[error(transparent)]
    Ground(#[from] GroundError),
}

/// Replays a plan against a world, failing on the first violated
/// precondition. Goal satisfaction is judged on the final state.
pub fn simulate(
    world: &WorldModel,
    plan: &Plan,
    goal: Option<&PlanGoal>,
) -> Result<SimOutcome, SimulateError> {
    let done_count = plan
        .actions
        .iter()
        .filter(|a| **a == PlanAction::Done)
        .count();
    if done_count != 1 || plan.actions.last() != Some(&PlanAction::Done) {
        return Err(SimulateError::Malformed);
    }

    let mut world = world.clone();
    for (i, action) in plan.actions.iter().enumerate() {
        let fail = |reason: String| SimulateError::Precondition {
            index: i + 1,
            action: action.to_string(),
            reason,
        };
        match action {
            PlanAction::Find(name) => {
                if let Some(loc) = world.at.get(name) {
                    world.robot_at = loc.clone();
                } else if world.is_location(name) {
                    world.robot_at = name.clone();
                } else if world.holding.as_deref() == Some(name) {
                    // Held object: already with the robot.
                } else {
                    return Err(fail(format!("no object or location named {name}")));
                }
            }
            PlanAction::Pick(name) => {
                if let Some(held) = &world.holding {
                    return Err(fail(format!("already holding {held}")));
                }
                match world.at.get(name) {
                    Some(loc) if *loc == world.robot_at => {
                        world.at.remove(name);
                        world.holding = Some(name.clone());
                    }
                    Some(loc) => {
                        return Err(fail(format!(
                            "{name} is at {loc} but the robot is at {}",
                            world.robot_at
                        )))
                    }
                    None => return Err(fail(format!("no object named {name} to pick"))),
                }
            }
            PlanAction::Put(name) => {
                if world.holding.as_deref() != Some(name.as_str()) {
                    return Err(fail(format!("not holding {name}")));
                }
                world.at.insert(name.clone(), world.robot_at.clone());
                world.holding = None;
            }
            PlanAction::Done => {}
        }
    }

    let goal_satisfied = match goal {
        Some(g) => {
            let targets = ground_goal(g, &world)?;
            Some(
                targets
                    .iter()
                    .any(|conj| conjunction_holds(conj, &world.at, &world)),
            )
        }
        None => None,
    };
    Ok(SimOutcome {
        world,
        goal_satisfied,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::plan::parse_goal;

    fn kitchen() -> WorldModel {
        WorldModel::from_json(include_str!("../../data/worlds/kitchen.json")).unwrap()
    }

    const CAFFEINE_GOAL: &str = "\
(:goal
    (exists (?d - drink)
        (and
            (has-caffeine ?d)
            (at ?d user)
        )
    )
)
";

    #[test]
    fn caffeine_plan_is_verbatim() {
        let goal = parse_goal(CAFFEINE_GOAL).unwrap();
        let plan = plan(&kitchen(), &goal).unwrap();
        assert_eq!(
            plan.render(),
            "1.find(redbull) 2.pick(redbull) 3.find(user) 4.put(redbull) 5.done()"
        );
    }

    #[test]
    fn throw_away_plan_matches_expected_actions() {
        let goal =
            parse_goal("(:goal (and (not (at coke table)) (at coke trash)))").unwrap();
        let plan = plan(&kitchen(), &goal).unwrap();
        assert_eq!(
            plan.render(),
            "1.find(coke) 2.pick(coke) 3.find(trash) 4.put(coke) 5.done()"
        );
    }

    #[test]
    fn satisfied_goal_plans_to_done_alone() {
        let goal = parse_goal("(:goal (at coke table))").unwrap();
        let plan = plan(&kitchen(), &goal).unwrap();
        assert_eq!(plan.render(), "1.done()");
    }

    #[test]
    fn statically_false_goal_is_unreachable_without_search() {
        // coke is sweet and nothing removes attributes.
        let goal = parse_goal("(:goal (not (is-sweet coke)))").unwrap();
        let err = plan(&kitchen(), &goal).unwrap_err();
        assert_eq!(err, PlanError::Unreachable { explored: 0 });
    }

    #[test]
    fn unsatisfiable_goal_exhausts_the_space() {
        let world = WorldModel::from_json(
            r#"{
              "locations": ["a", "b"],
              "objects": {"box": {"type": "thing", "attrs": [], "at": "a"}},
              "robot_at": "a"
            }"#,
        )
        .unwrap();
        // An object cannot be in two places.
        let goal = parse_goal("(:goal (and (at box a) (at box b)))").unwrap();
        let err = plan(&world, &goal).unwrap_err();
        let PlanError::Unreachable { explored } = err else {
            panic!("expected exhaustion, got {err:?}");
        };
        // robot position x box position (a, b, or held) = 6 states.
        assert_eq!(explored, 6);
    }

    #[test]
    fn tiny_budget_is_reported() {
        let goal = parse_goal(CAFFEINE_GOAL).unwrap();
        let err = plan_with_budget(&kitchen(), &goal, 3, &ExecLimits::none()).unwrap_err();
        assert_eq!(err, PlanError::BudgetExhausted { budget: 3 });
    }

    #[test]
    fn expired_deadline_reports_timeout() {
        let goal = parse_goal(CAFFEINE_GOAL).unwrap();
        let limits = ExecLimits::with_timeout(std::time::Duration::ZERO);
        let err =
            plan_with_budget(&kitchen(), &goal, DEFAULT_STATE_BUDGET, &limits).unwrap_err();
        assert_eq!(err, PlanError::Timeout);
    }

    #[test]
    fn simulating_the_caffeine_plan_satisfies_the_goal() {
        let goal = parse_goal(CAFFEINE_GOAL).unwrap();
        let world = kitchen();
        let best = plan(&world, &goal).unwrap();
        let outcome = simulate(&world, &best, Some(&goal)).unwrap();
        assert_eq!(outcome.goal_satisfied, Some(true));
        assert_eq!(outcome.world.location_of("redbull"), Some("user"));
        assert_eq!(outcome.world.robot_at(), "user");
        assert_eq!(outcome.world.holding(), None);
    }

    #[test]
    fn pick_while_holding_fails_at_that_step() {
        let world = kitchen();
        let plan = Plan::parse(
            "1.find(redbull) 2.pick(redbull) 3.pick(water) 4.done()",
        )
        .unwrap();
        let err = simulate(&world, &plan, None).unwrap_err();
        assert_eq!(
            err,
            SimulateError::Precondition {
                index: 3,
                action: "pick(water)".to_string(),
                reason: "already holding redbull".to_string(),
            }
        );
    }

    #[test]
    fn pick_away_from_the_object_fails() {
        let world = kitchen();
        let plan = Plan::parse("1.pick(redbull) 2.done()").unwrap();
        let err = simulate(&world, &plan, None).unwrap_err();
        assert!(matches!(err, SimulateError::Precondition { index: 1, .. }), "{err:?}");
    }

    #[test]
    fn done_alone_leaves_unsatisfied_goals_unsatisfied() {
        let goal = parse_goal("(:goal (at redbull user))").unwrap();
        let world = kitchen();
        let plan = Plan { actions: vec![PlanAction::Done] };
        let outcome = simulate(&world, &plan, Some(&goal)).unwrap();
        assert_eq!(outcome.goal_satisfied, Some(false));
        assert_eq!(outcome.world, world);
    }

    #[test]
    fn malformed_plans_are_rejected() {
        let world = kitchen();
        let no_done = Plan { actions: vec![PlanAction::Find("coke".to_string())] };
        assert_eq!(simulate(&world, &no_done, None).unwrap_err(), SimulateError::Malformed);
        let double_done = Plan { actions: vec![PlanAction::Done, PlanAction::Done] };
        assert_eq!(
            simulate(&world, &double_done, None).unwrap_err(),
            SimulateError::Malformed
        );
    }

    #[test]
    fn find_works_for_locations_objects_and_held_objects() {
        let world = kitchen();
        let plan = Plan::parse(
            "1.find(table) 2.find(redbull) 3.pick(redbull) 4.find(redbull) 5.done()",
        )
        .unwrap();
        let outcome = simulate(&world, &plan, None).unwrap();
        assert_eq!(outcome.world.robot_at(), "counter");
        assert_eq!(outcome.world.holding(), Some("redbull"));
    }
}
