//! Intent-to-deployment pipeline for composed data backends.
//!
//! The crate owns four typed contracts and the machinery between them:
//!
//! * [`intent`]: the six-dimension workload declaration and its validation.
//! * [`operator`]: the operator DAG, its open type registry, reachability,
//!   and path-level SLO composition.
//! * [`skill`]: per-system skill documents, anti-pattern matchers, patches,
//!   and the content-hashed lock file.
//! * [`attribution`]: typing runtime signals, routing them to the layer that
//!   owns the violated decision, and applying corrections.
//!
//! [`planner`], [`render`], and [`harness`] are the deterministic default
//! workers that search inside those contracts.

pub mod clock;
pub mod consistency;
pub mod fieldpath;
pub mod intent;
pub mod operator;
pub mod skill;
pub mod planner;
pub mod render;
pub mod harness;
pub mod attribution;
