//! Parse, validate, execute, and aggregate LM-generated symbolic reasoning chains.
//!
//! A reasoning chain interleaves natural-language step annotations with program
//! statements in one of four dialects (straight-line arithmetic, a Datalog
//! subset, kinship relation algebra, PDDL-style goals). This crate provides the
//! deterministic half of that pipeline: chain parsing and rendering,
//! dependency-structure validation, one executor per dialect, answer
//! normalization and scoring, majority-vote aggregation over sampled chains,
//! and prompt assembly plus provider plumbing for the LM translation stage.

pub mod chain;
pub mod constraints;
pub mod datalog;
pub mod decoder;
pub mod metrics;
pub mod model;
pub mod plan;
pub mod relation;
pub mod straightline;
pub mod translator;
