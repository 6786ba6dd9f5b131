//! Household planning over find/pick/put.
//!
//! A world is a fixed set of locations plus typed, attributed objects.
//! Goals are small PDDL-style formulas; `ground_goal` expands their
//! existentials into a disjunction of ground conjunctions, and `plan`
//! searches breadth-first for a shortest action sequence satisfying
//! any of them.

mod goal;
mod search;

pub use goal::{
    ground_goal, parse_goal, GoalExpr, GoalParseError, GoalTerm, GroundAtom, GroundConjunction,
    GroundError, GroundLiteral, PlanGoal,
};
pub use search::{
    plan, plan_with_budget, simulate, PlanError, SimOutcome, SimulateError, DEFAULT_STATE_BUDGET,
};

use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use thiserror::Error;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ObjectInfo {
    pub kind: String,
    pub attrs: BTreeSet<String>,
}

/// Environment state. Object and location names never overlap, every
/// object is either at a known location or held, and the robot holds
/// at most one object.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WorldModel {
    locations: BTreeSet<String>,
    objects: BTreeMap<String, ObjectInfo>,
    at: BTreeMap<String, String>,
    robot_at: String,
    holding: Option<String>,
}

#[derive(Serialize, Deserialize)]
struct WorldFile {
    locations: Vec<String>,
    objects: BTreeMap<String, ObjectRow>,
    robot_at: String,
}

#[derive(Serialize, Deserialize)]
struct ObjectRow {
    #[serde(rename = "type")]
    kind: String,
    #[serde(default)]
    attrs: Vec<String>,
    at: String,
}

#[derive(Debug, Error)]
pub enum WorldError {
    #[error("world is not valid JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("cannot read world file: {0}")]
    Io(#[from] std::io::Error),
    #[error("world declares no locations")]
    NoLocations,
    #[error("object {object} sits at unknown location {location}")]
    UnknownLocation { object: String, location: String },
    #[error("robot starts at unknown location {0}")]
    RobotLocation(String),
    #[error("{0} names both an object and a location")]
    NameClash(String),
}

impl WorldModel {
    pub fn assemble(
        locations: impl IntoIterator<Item = String>,
        objects: impl IntoIterator<Item = (String, ObjectInfo, String)>,
        robot_at: String,
    ) -> Result<WorldModel, WorldError> {
        let locations: BTreeSet<String> = locations.into_iter().collect();
        if locations.is_empty() {
            return Err(WorldError::NoLocations);
        }
        let mut world = WorldModel {
            locations,
            objects: BTreeMap::new(),
            at: BTreeMap::new(),
            robot_at,
            holding: None,
        };
        for (name, info, at) in objects {
            if world.locations.contains(&name) {
                return Err(WorldError::NameClash(name));
            }
            if !world.locations.contains(&at) {
                return Err(WorldError::UnknownLocation {
                    object: name,
                    location: at,
                });
            }
            world.objects.insert(name.clone(), info);
            world.at.insert(name, at);
        }
        if !world.locations.contains(&world.robot_at) {
            return Err(WorldError::RobotLocation(world.robot_at));
        }
        Ok(world)
    }

    pub fn from_json(text: &str) -> Result<WorldModel, WorldError> {
        let file: WorldFile = serde_json::from_str(text)?;
        WorldModel::assemble(
            file.locations,
            file.objects.into_iter().map(|(name, row)| {
                let info = ObjectInfo {
                    kind: row.kind,
                    attrs: row.attrs.into_iter().collect(),
                };
                (name, info, row.at)
            }),
            file.robot_at,
        )
    }

    pub fn load(path: &std::path::Path) -> Result<WorldModel, WorldError> {
        WorldModel::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> String {
        let file = WorldFile {
            locations: self.locations.iter().cloned().collect(),
            objects: self
                .objects
                .iter()
                .map(|(name, info)| {
                    let row = ObjectRow {
                        kind: info.kind.clone(),
                        attrs: info.attrs.iter().cloned().collect(),
                        at: self.at[name].clone(),
                    };
                    (name.clone(), row)
                })
                .collect(),
            robot_at: self.robot_at.clone(),
        };
        let mut text = serde_json::to_string_pretty(&file).expect("world serializes");
        text.push('\n');
        text
    }

    pub fn locations(&self) -> impl Iterator<Item = &str> {
        self.locations.iter().map(String::as_str)
    }

    pub fn objects(&self) -> impl Iterator<Item = &str> {
        self.objects.keys().map(String::as_str)
    }

    pub fn object_info(&self, name: &str) -> Option<&ObjectInfo> {
        self.objects.get(name)
    }

    pub fn objects_of_type(&self, kind: &str) -> Vec<&str> {
        self.objects
            .iter()
            .filter(|(_, info)| info.kind == kind)
            .map(|(name, _)| name.as_str())
            .collect()
    }

    pub fn has_attr(&self, object: &str, attr: &str) -> bool {
        self.objects
            .get(object)
            .is_some_and(|info| info.attrs.contains(attr))
    }

    /// None when the object is held or unknown.
    pub fn location_of(&self, object: &str) -> Option<&str> {
        self.at.get(object).map(String::as_str)
    }

    pub fn robot_at(&self) -> &str {
        &self.robot_at
    }

    pub fn holding(&self) -> Option<&str> {
        self.holding.as_deref()
    }

    pub fn is_location(&self, name: &str) -> bool {
        self.locations.contains(name)
    }

    pub fn is_object(&self, name: &str) -> bool {
        self.objects.contains_key(name)
    }
}
