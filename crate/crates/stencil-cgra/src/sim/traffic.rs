//! Memory-traffic accounting against the analytic expectations.

use serde::Serialize;

use crate::dfg::{Graph, OpKind};

use super::{SimError, SimOutcome, SimStats};

/// Observed vs expected traffic for a completed run. `reuse_factor` is how
/// many times each loaded grid point was consumed by a multiplier: close
/// to `2r + 1` per dimension when every point is loaded exactly once.
#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct TrafficReport {
    pub loads: u64,
    pub stores: u64,
    pub loads_expected: u64,
    pub stores_expected: u64,
    pub reuse_factor: f64,
}

impl TrafficReport {
    pub fn matches_expected(&self) -> bool {
        self.loads == self.loads_expected && self.stores == self.stores_expected
    }
}

/// Tokens consumed on the data port of every MUL/MAC, i.e. reader-fed
/// traffic after filtering.
pub fn chain_data_tokens(graph: &Graph, stats: &SimStats) -> u64 {
    graph
        .edges()
        .filter(|(_, e)| {
            let dst = graph.node(e.dst.0).unwrap();
            matches!(dst.kind, OpKind::Mul | OpKind::Mac) && e.dst.1 == 0
        })
        .map(|(id, _)| stats.dequeued[id.0 as usize])
        .sum()
}

/// Builds the traffic report for a completed run. Fails with
/// [`SimError::NotCompleted`] unless the outcome is `Done`.
pub fn traffic_report(
    graph: &Graph,
    outcome: &SimOutcome,
    loads_expected: u64,
    stores_expected: u64,
) -> Result<TrafficReport, SimError> {
    let SimOutcome::Done(stats) = outcome else {
        return Err(SimError::NotCompleted);
    };
    let consumed = chain_data_tokens(graph, stats);
    Ok(TrafficReport {
        loads: stats.loads,
        stores: stats.stores,
        loads_expected,
        stores_expected,
        reuse_factor: if stats.loads == 0 {
            0.0
        } else {
            consumed as f64 / stats.loads as f64
        },
    })
}
