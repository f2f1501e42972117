use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::dag::{EdgeGuarantee, OperatorDag};
use crate::consistency::{ConsistencyLattice, ConsistencyLevel};

/// Simple paths enumerated per serving terminal before giving up.
pub const MAX_PATHS_PER_TERMINAL: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathSlo {
    pub path: Vec<String>,
    pub total_latency_ms: f64,
    pub min_throughput_eps: f64,
    pub effective_consistency: ConsistencyLevel,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("more than {cap} simple paths from `{from}` to `{to}`")]
pub struct PathExplosion {
    pub from: String,
    pub to: String,
    pub cap: usize,
}

/// Every simple path `from -> to` as a list of edge indices into
/// `dag.edges`, considering only edges accepted by `usable`.
///
/// Parallel edges yield distinct paths. Fails once more than `cap` paths
/// have been found.
pub fn enumerate_paths(
    dag: &OperatorDag,
    from: &str,
    to: &str,
    cap: usize,
    usable: impl Fn(usize) -> bool,
) -> Result<Vec<Vec<usize>>, PathExplosion> {
    let mut adj: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, e) in dag.edges.iter().enumerate() {
        if e.from != e.to
            && usable(i)
            && dag.node(&e.from).is_some()
            && dag.node(&e.to).is_some()
        {
            adj.entry(e.from.as_str()).or_default().push(i);
        }
    }
    let mut out = Vec::new();
    if dag.node(from).is_none() || dag.node(to).is_none() || from == to {
        return Ok(out);
    }

    // Iterative DFS; each frame is (node, next adjacency slot).
    let mut on_path: Vec<&str> = vec![from];
    let mut edges: Vec<usize> = Vec::new();
    let mut stack: Vec<(&str, usize)> = vec![(from, 0)];
    while let Some((node, slot)) = stack.last_mut() {
        let succ = adj.get(*node).map(Vec::as_slice).unwrap_or(&[]);
        if *slot >= succ.len() {
            stack.pop();
            on_path.pop();
            edges.pop();
            continue;
        }
        let ei = succ[*slot];
        *slot += 1;
        let next = dag.edges[ei].to.as_str();
        if on_path.contains(&next) {
            continue;
        }
        if next == to {
            let mut p = edges.clone();
            p.push(ei);
            out.push(p);
            if out.len() > cap {
                return Err(PathExplosion {
                    from: from.to_string(),
                    to: to.to_string(),
                    cap,
                });
            }
            continue;
        }
        on_path.push(next);
        edges.push(ei);
        stack.push((next, 0));
    }
    Ok(out)
}

/// Aggregate over a sequence of edge guarantees. `None` for an empty path.
pub fn compose<'a>(
    lattice: &ConsistencyLattice,
    guarantees: impl IntoIterator<Item = &'a EdgeGuarantee>,
) -> Option<(f64, f64, ConsistencyLevel)> {
    let gs: Vec<&EdgeGuarantee> = guarantees.into_iter().collect();
    let consistency = lattice.meet_all(gs.iter().map(|g| &g.consistency))?;
    let latency = gs.iter().map(|g| g.latency_contribution_ms).sum();
    let throughput = gs
        .iter()
        .map(|g| g.throughput_capacity_eps)
        .fold(f64::INFINITY, f64::min);
    Some((latency, throughput, consistency))
}

pub(crate) fn path_slo(
    dag: &OperatorDag,
    lattice: &ConsistencyLattice,
    edge_path: &[usize],
) -> Option<PathSlo> {
    let gs: Vec<EdgeGuarantee> = edge_path
        .iter()
        .map(|&i| dag.edges[i].guarantee())
        .collect::<Option<_>>()?;
    let (total_latency_ms, min_throughput_eps, effective_consistency) = compose(lattice, &gs)?;
    let mut path = vec![dag.edges[edge_path[0]].from.clone()];
    path.extend(edge_path.iter().map(|&i| dag.edges[i].to.clone()));
    Some(PathSlo {
        path,
        total_latency_ms,
        min_throughput_eps,
        effective_consistency,
    })
}

/// One aggregate per simple path `from -> to` over annotated edges; empty if
/// unreachable.
pub fn aggregate_slo(
    dag: &OperatorDag,
    from: &str,
    to: &str,
    lattice: &ConsistencyLattice,
) -> Result<Vec<PathSlo>, PathExplosion> {
    let annotated = |i: usize| dag.edges[i].is_annotated();
    let paths = enumerate_paths(dag, from, to, MAX_PATHS_PER_TERMINAL, annotated)?;
    Ok(paths
        .iter()
        .filter_map(|p| path_slo(dag, lattice, p))
        .collect())
}
