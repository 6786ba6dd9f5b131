//! Shared helpers for planner tests: a seeded world generator and an
//! exhaustive-search oracle with its own action semantics.

use chainsolve::plan::{
    ground_goal, parse_goal, GroundAtom, GroundConjunction, ObjectInfo, PlanGoal, WorldModel,
};
use rand::seq::SliceRandom;
use rand::Rng;
use std::collections::BTreeMap;

const LOCATION_POOL: &[&str] = &["bowl", "counter", "shelf", "sink", "table", "trash", "user"];
const OBJECT_POOL: &[&str] = &[
    "apple", "banana", "chips", "coke", "kitkat", "mug", "pepsi", "redbull", "soap", "sponge",
    "towel", "water",
];
const KIND_POOL: &[&str] = &["drink", "snack", "tool"];
const ATTR_POOL: &[&str] = &["can-clean", "has-caffeine", "is-cold", "is-spicy", "is-sweet"];

pub fn random_world(rng: &mut impl Rng, max_objects: usize, max_locations: usize) -> WorldModel {
    let mut locations: Vec<&str> = LOCATION_POOL.to_vec();
    locations.shuffle(rng);
    locations.truncate(rng.gen_range(2..=max_locations));
    locations.sort_unstable();

    let mut names: Vec<&str> = OBJECT_POOL.to_vec();
    names.shuffle(rng);
    names.truncate(rng.gen_range(1..=max_objects));

    let objects: Vec<(String, ObjectInfo, String)> = names
        .iter()
        .map(|name| {
            let kind = KIND_POOL.choose(rng).unwrap().to_string();
            let attrs = ATTR_POOL
                .iter()
                .filter(|_| rng.gen_bool(0.3))
                .map(|a| a.to_string())
                .collect();
            let at = locations.choose(rng).unwrap().to_string();
            (name.to_string(), ObjectInfo { kind, attrs }, at)
        })
        .collect();

    let robot_at = locations.choose(rng).unwrap().to_string();
    WorldModel::assemble(
        locations.into_iter().map(String::from),
        objects,
        robot_at,
    )
    .expect("generated world is valid")
}

/// Builds a goal as text and reparses it, covering the parser on the
/// way. Goals stay small enough that optimal plans need at most four
/// actions before done().
pub fn random_goal(rng: &mut impl Rng, world: &WorldModel) -> PlanGoal {
    let objects: Vec<&str> = world.objects().collect();
    let locations: Vec<&str> = world.locations().collect();
    let obj = objects.choose(rng).unwrap();
    let loc = locations.choose(rng).unwrap();
    let text = match rng.gen_range(0..4) {
        0 => format!("(:goal (at {obj} {loc}))"),
        1 => {
            let info = world.object_info(obj).unwrap();
            let attrs: Vec<&String> = info.attrs.iter().collect();
            match (attrs.choose(rng), rng.gen_bool(0.7)) {
                // Attribute taken from the object itself: satisfiable.
                (Some(attr), true) => format!(
                    "(:goal (exists (?x - {}) (and ({attr} ?x) (at ?x {loc}))))",
                    info.kind
                ),
                // Arbitrary attribute: may be statically impossible.
                _ => {
                    let attr = ATTR_POOL.choose(rng).unwrap();
                    format!(
                        "(:goal (exists (?x - {}) (and ({attr} ?x) (at ?x {loc}))))",
                        info.kind
                    )
                }
            }
        }
        2 => {
            let other = locations.choose(rng).unwrap();
            format!("(:goal (and (not (at {obj} {loc})) (not (at {obj} {other}))))")
        }
        _ => format!("(:goal (exists (?x - {}) (at ?x {loc})))", {
            &world.object_info(obj).unwrap().kind
        }),
    };
    parse_goal(&text).expect("generated goal parses")
}

struct OracleState {
    robot: String,
    holding: Option<String>,
    at: BTreeMap<String, String>,
}

enum OracleAction {
    Find(String),
    Pick(String),
    Put,
}

fn satisfied(state: &OracleState, targets: &[GroundConjunction], world: &WorldModel) -> bool {
    targets.iter().any(|conj| {
        conj.iter().all(|lit| {
            let truth = match &lit.atom {
                GroundAtom::At { object, location } => {
                    state.at.get(object).map(String::as_str) == Some(location)
                }
                GroundAtom::Attr { name, object } => world.has_attr(object, name),
            };
            truth == lit.positive
        })
    })
}

fn reachable_within(
    state: &mut OracleState,
    depth: usize,
    targets: &[GroundConjunction],
    world: &WorldModel,
) -> bool {
    if satisfied(state, targets, world) {
        return true;
    }
    if depth == 0 {
        return false;
    }
    let mut candidates: Vec<OracleAction> = Vec::new();
    for name in world.objects().chain(world.locations()) {
        candidates.push(OracleAction::Find(name.to_string()));
    }
    if state.holding.is_none() {
        for (object, loc) in &state.at {
            if *loc == state.robot {
                candidates.push(OracleAction::Pick(object.clone()));
            }
        }
    }
    if state.holding.is_some() {
        candidates.push(OracleAction::Put);
    }
    for action in candidates {
        match action {
            OracleAction::Find(name) => {
                let dest = match state.at.get(&name) {
                    Some(loc) => loc.clone(),
                    None if world.is_location(&name) => name.clone(),
                    None => state.robot.clone(),
                };
                let saved = std::mem::replace(&mut state.robot, dest);
                if reachable_within(state, depth - 1, targets, world) {
                    return true;
                }
                state.robot = saved;
            }
            OracleAction::Pick(object) => {
                let loc = state.at.remove(&object).unwrap();
                state.holding = Some(object.clone());
                if reachable_within(state, depth - 1, targets, world) {
                    return true;
                }
                state.holding = None;
                state.at.insert(object, loc);
            }
            OracleAction::Put => {
                let object = state.holding.take().unwrap();
                state.at.insert(object.clone(), state.robot.clone());
                if reachable_within(state, depth - 1, targets, world) {
                    return true;
                }
                state.at.remove(&object);
                state.holding = Some(object);
            }
        }
    }
    false
}

/// Minimum number of actions before done() that satisfies the goal,
/// or None if no plan of at most `max_depth` actions does. Iterative
/// deepening over every applicable action, no pruning.
pub fn oracle_min_plan_len(
    world: &WorldModel,
    goal: &PlanGoal,
    max_depth: usize,
) -> Option<usize> {
    let targets = ground_goal(goal, world).ok()?;
    for depth in 0..=max_depth {
        let mut state = OracleState {
            robot: world.robot_at().to_string(),
            holding: world.holding().map(String::from),
            at: world
                .objects()
                .filter_map(|o| {
                    world
                        .location_of(o)
                        .map(|l| (o.to_string(), l.to_string()))
                })
                .collect(),
        };
        if reachable_within(&mut state, depth, &targets, world) {
            return Some(depth);
        }
    }
    None
}
