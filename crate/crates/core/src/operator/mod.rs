//! The operator DAG contract: an open set of operator types, typed nodes and
//! edges with per-edge guarantees, reachability, and path-level SLO
//! composition.

mod dag;
mod guarantees;
mod registry;
mod slo;
mod verdict;

pub use dag::{Delivery, Edge, EdgeGuarantee, OperatorDag, OperatorNode};
pub use guarantees::{GuaranteeEntry, GuaranteeTable};
pub use registry::{OperatorType, OperatorTypeDef, OperatorTypeRegistry, Registration, RegistryError};
pub use slo::{aggregate_slo, enumerate_paths, PathExplosion, PathSlo, MAX_PATHS_PER_TERMINAL};
pub use verdict::{
    check_reachability, validate_dag, DagVerdict, ReachabilityPair, ReachabilityReport, Violation,
    ViolationCode,
};
