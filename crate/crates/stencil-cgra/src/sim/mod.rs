//! Deterministic cycle-level execution of a dataflow graph.
//!
//! Every cycle, nodes are evaluated once in ascending node-id order. A node
//! fires when every dynamic input queue has a ready token, every output
//! queue has free space (counting this cycle's earlier pushes and pops) and,
//! for loads and stores, the per-cycle memory-op budget is not exhausted.
//! Firing consumes one token per input; results land in the output queues
//! `latency` cycles later. This is cycle-approximate, not a pipeline model:
//! correctness, traffic and deadlock behavior are simulated, issue timing
//! of a real PE is not.
//!
//! A run ends three ways: the done node fires (`Done`), a cycle fires
//! nothing while no token is still in latency flight (`Deadlock`, with the
//! blocked-node report), or the cycle budget runs out (`CycleLimit`).

mod traffic;

use std::collections::VecDeque;

use serde::Serialize;
use thiserror::Error;

use crate::dfg::{Graph, GraphError, NodeId, OpKind, Violation};

pub use traffic::{chain_data_tokens, traffic_report, TrafficReport};

/// Flat memory holding the input and output grids plus traffic counters.
/// The output grid starts as NaN so that any write outside the interior
/// shows up in verification.
#[derive(Debug, Clone)]
pub struct MemoryModel {
    pub input: Vec<f64>,
    pub output: Vec<f64>,
    pub loads_issued: u64,
    pub stores_issued: u64,
    /// Loads plus stores the memory system accepts per cycle.
    pub max_mem_ops_per_cycle: usize,
}

impl MemoryModel {
    pub fn new(input: Vec<f64>, max_mem_ops_per_cycle: usize) -> Self {
        assert!(max_mem_ops_per_cycle >= 1);
        let len = input.len();
        MemoryModel {
            input,
            output: vec![f64::NAN; len],
            loads_issued: 0,
            stores_issued: 0,
            max_mem_ops_per_cycle,
        }
    }
}

/// Per-run knobs. `latency_overrides` replaces the per-node latency for
/// every node of the given kind, e.g. to model deeper MAC pipelines.
/// `rng_seed` is carried for harnesses that fill input grids; the engine
/// itself is deterministic and never draws randomness.
#[derive(Debug, Clone)]
pub struct SimConfig {
    pub max_cycles: u64,
    pub latency_overrides: Vec<(OpKind, u32)>,
    pub rng_seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            max_cycles: 10_000_000,
            latency_overrides: Vec::new(),
            rng_seed: 42,
        }
    }
}

impl SimConfig {
    fn latency_for(&self, kind: OpKind, node_latency: u32) -> u32 {
        self.latency_overrides
            .iter()
            .find(|(k, _)| *k == kind)
            .map(|(_, l)| *l)
            .unwrap_or(node_latency)
            .max(1)
    }
}

/// Execution counters. Vectors are indexed by `NodeId`/`EdgeId` order.
#[derive(Debug, Clone, Serialize)]
pub struct SimStats {
    pub cycles: u64,
    pub fires: Vec<u64>,
    pub loads: u64,
    pub stores: u64,
    pub queue_high_water: Vec<u32>,
    pub enqueued: Vec<u64>,
    pub dequeued: Vec<u64>,
    /// Final queue occupancies; all zero on a clean completion.
    pub final_occupancy: Vec<u32>,
    /// Tokens consumed by filters that did not pass.
    pub filter_drops: u64,
    /// Cycles in which at least one ready memory op was deferred by the
    /// bandwidth cap.
    pub mem_ops_stalled: u64,
}

impl SimStats {
    pub fn busy_fraction(&self, node: NodeId) -> f64 {
        if self.cycles == 0 {
            0.0
        } else {
            self.fires[node.0 as usize] as f64 / self.cycles as f64
        }
    }

    /// Per-edge high-water CSV (`edge,src,dst,capacity,high_water`).
    pub fn high_water_csv(&self, graph: &Graph) -> String {
        let mut out = String::from("edge,src,dst,capacity,high_water\n");
        for (id, edge) in graph.edges() {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                id.0,
                graph.node(edge.src.0).unwrap().name,
                graph.node(edge.dst.0).unwrap().name,
                edge.capacity,
                self.queue_high_water[id.0 as usize]
            ));
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum BlockReason {
    EmptyInput,
    FullOutput,
}

/// A node that still has work but cannot fire.
#[derive(Debug, Clone, Serialize)]
pub struct BlockedNode {
    pub node: String,
    pub reason: BlockReason,
}

/// Why a run stopped.
#[derive(Debug, Clone)]
pub enum SimOutcome {
    /// The done node fired.
    Done(SimStats),
    /// No node fired, nothing in flight, done not reached.
    Deadlock(SimStats, Vec<BlockedNode>),
    CycleLimit(SimStats),
}

impl SimOutcome {
    pub fn stats(&self) -> &SimStats {
        match self {
            SimOutcome::Done(s) | SimOutcome::CycleLimit(s) => s,
            SimOutcome::Deadlock(s, _) => s,
        }
    }

    pub fn is_done(&self) -> bool {
        matches!(self, SimOutcome::Done(_))
    }
}

#[derive(Debug, Error)]
pub enum SimError {
    #[error("graph does not validate: {}", .0.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
    InvalidGraph(Vec<Violation>),
    #[error("node '{node}' issued a memory access to bad address {addr}")]
    BadAddress { node: String, addr: f64 },
    #[error("traffic report requires a completed run")]
    NotCompleted,
    #[error(transparent)]
    Graph(#[from] GraphError),
}

/// Addresses produced by an AddrGen operand list
/// `[base, inner_stride, inner_count, outer_stride, outer_count]`.
pub fn addrgen_count(ops: &[f64]) -> u64 {
    (ops[2] * ops[4]) as u64
}

/// The `idx`-th address of an AddrGen stream (outer-major order).
pub fn addrgen_address(ops: &[f64], idx: u64) -> f64 {
    let inner_count = ops[2] as u64;
    let outer = (idx / inner_count) as f64;
    let inner = (idx % inner_count) as f64;
    ops[0] + outer * ops[3] + inner * ops[1]
}

/// Whether a filter's window accepts the `k`-th consumed token.
/// Flat form `[lo, hi]`; rectangular form
/// `[row_len, row_lo, row_hi, col_lo, col_hi]` splits `k` into
/// `(k / row_len, k % row_len)`.
pub fn filter_accepts(ops: &[f64], k: u64) -> bool {
    match ops.len() {
        2 => {
            let k = k as f64;
            k >= ops[0] && k <= ops[1]
        }
        5 => {
            let row_len = ops[0] as u64;
            if row_len == 0 {
                return false;
            }
            let row = (k / row_len) as f64;
            let col = (k % row_len) as f64;
            row >= ops[1] && row <= ops[2] && col >= ops[3] && col <= ops[4]
        }
        _ => unreachable!("filter operand arity is validated"),
    }
}

struct EdgeState {
    /// (value, seq, ready_cycle)
    queue: VecDeque<(f64, u64, u64)>,
    capacity: u32,
    last_seq: Option<u64>,
}

struct NodeExec {
    kind: OpKind,
    latency: u64,
    operands: Vec<f64>,
    in_edges: Vec<u32>,
    out_edges: Vec<Vec<u32>>,
    /// Emission/consumption progress: next stream index for generator
    /// kinds, consumed-token count for filters and counters.
    progress: u64,
    /// Tokens emitted per output port (the seq source).
    emitted: Vec<u64>,
    counter_emitted: bool,
}

impl NodeExec {
    /// Total tokens a generator kind will emit.
    fn generator_total(&self) -> u64 {
        match self.kind {
            OpKind::AddrGen => addrgen_count(&self.operands),
            OpKind::BitGen => (self.operands[0] + self.operands[1] + self.operands[2]) as u64,
            OpKind::ConstStream => self.operands[1] as u64,
            _ => unreachable!(),
        }
    }

    fn is_generator(&self) -> bool {
        matches!(
            self.kind,
            OpKind::AddrGen | OpKind::BitGen | OpKind::ConstStream
        )
    }

    /// True when the node can never fire again regardless of queue state.
    fn finished(&self) -> bool {
        match self.kind {
            OpKind::AddrGen | OpKind::BitGen | OpKind::ConstStream => {
                self.progress >= self.generator_total()
            }
            _ => false,
        }
    }
}

/// Simulation state for one graph over one memory.
pub struct Simulator<'g> {
    graph: &'g Graph,
    config: SimConfig,
    nodes: Vec<NodeExec>,
    edges: Vec<EdgeState>,
    memory: MemoryModel,
    cycle: u64,
    done_idx: usize,
    done_fired: bool,
    stats: SimStats,
}

impl<'g> Simulator<'g> {
    /// Builds execution state for a validated graph.
    pub fn new(graph: &'g Graph, memory: MemoryModel, config: SimConfig) -> Result<Self, SimError> {
        let violations = graph.validate();
        if !violations.is_empty() {
            return Err(SimError::InvalidGraph(violations));
        }
        let mut out_edges: Vec<Vec<Vec<u32>>> = graph
            .nodes()
            .map(|(_, spec)| vec![Vec::new(); spec.kind.output_arity()])
            .collect();
        for (eid, edge) in graph.edges() {
            out_edges[edge.src.0 .0 as usize][usize::from(edge.src.1)].push(eid.0);
        }
        let mut out_edges = out_edges.into_iter();
        let nodes = graph
            .nodes()
            .map(|(id, spec)| {
                let in_edges = (0..spec.kind.input_arity())
                    .map(|p| graph.in_edge(id, p as u16).unwrap().0)
                    .collect();
                let outs = out_edges.next().unwrap();
                NodeExec {
                    kind: spec.kind,
                    latency: u64::from(config.latency_for(spec.kind, spec.latency)),
                    operands: spec.operands.clone(),
                    in_edges,
                    out_edges: outs,
                    progress: 0,
                    emitted: vec![0; spec.kind.output_arity()],
                    counter_emitted: false,
                }
            })
            .collect();
        let edges = graph
            .edges()
            .map(|(_, e)| EdgeState {
                queue: VecDeque::new(),
                capacity: e.capacity,
                last_seq: None,
            })
            .collect();
        let done_idx = graph.done_node().unwrap().0 as usize;
        let stats = SimStats {
            cycles: 0,
            fires: vec![0; graph.node_count()],
            loads: 0,
            stores: 0,
            queue_high_water: vec![0; graph.edge_count()],
            enqueued: vec![0; graph.edge_count()],
            dequeued: vec![0; graph.edge_count()],
            final_occupancy: vec![0; graph.edge_count()],
            filter_drops: 0,
            mem_ops_stalled: 0,
        };
        Ok(Simulator {
            graph,
            config,
            nodes,
            edges,
            memory,
            cycle: 0,
            done_idx,
            done_fired: false,
            stats,
        })
    }

    pub fn memory(&self) -> &MemoryModel {
        &self.memory
    }

    pub fn into_memory(self) -> MemoryModel {
        self.memory
    }

    pub fn cycle(&self) -> u64 {
        self.cycle
    }

    fn front_ready(&self, edge: u32) -> Option<(f64, u64)> {
        let e = &self.edges[edge as usize];
        match e.queue.front() {
            Some(&(v, seq, ready)) if ready <= self.cycle => Some((v, seq)),
            _ => None,
        }
    }

    fn consume(&mut self, edge: u32) -> f64 {
        let e = &mut self.edges[edge as usize];
        let (value, seq, _) = e.queue.pop_front().expect("checked before consume");
        debug_assert!(e.last_seq.is_none_or(|prev| seq > prev), "FIFO order broken");
        e.last_seq = Some(seq);
        self.stats.dequeued[edge as usize] += 1;
        value
    }

    fn emit(&mut self, node: usize, port: usize, value: f64) {
        let ready = self.cycle + self.nodes[node].latency;
        let seq = self.nodes[node].emitted[port];
        self.nodes[node].emitted[port] += 1;
        // Broadcast: every edge on the port gets its own copy.
        for i in 0..self.nodes[node].out_edges[port].len() {
            let eid = self.nodes[node].out_edges[port][i] as usize;
            let e = &mut self.edges[eid];
            e.queue.push_back((value, seq, ready));
            self.stats.enqueued[eid] += 1;
            let occ = e.queue.len() as u32;
            if occ > self.stats.queue_high_water[eid] {
                self.stats.queue_high_water[eid] = occ;
            }
        }
    }

    fn outputs_free(&self, node: usize) -> bool {
        self.nodes[node].out_edges.iter().flatten().all(|&eid| {
            let e = &self.edges[eid as usize];
            (e.queue.len() as u32) < e.capacity
        })
    }

    /// Evaluates every node once. Returns how many fired.
    pub fn step(&mut self) -> Result<usize, SimError> {
        let mut budget = self.memory.max_mem_ops_per_cycle;
        let mut budget_stalled = false;
        let mut fired_total = 0usize;
        for i in 0..self.nodes.len() {
            if self.try_fire(i, &mut budget, &mut budget_stalled)? {
                self.stats.fires[i] += 1;
                fired_total += 1;
                if i == self.done_idx {
                    self.done_fired = true;
                }
            }
        }
        if budget_stalled {
            self.stats.mem_ops_stalled += 1;
        }
        self.cycle += 1;
        self.stats.cycles = self.cycle;
        Ok(fired_total)
    }

    fn try_fire(
        &mut self,
        i: usize,
        budget: &mut usize,
        budget_stalled: &mut bool,
    ) -> Result<bool, SimError> {
        let kind = self.nodes[i].kind;

        // Counters that already reached their threshold emit without
        // consuming; this covers zero-threshold counters for workers that
        // were assigned no outputs.
        if kind == OpKind::Counter
            && !self.nodes[i].counter_emitted
            && self.nodes[i].progress >= self.nodes[i].operands[0] as u64
        {
            if !self.outputs_free(i) {
                return Ok(false);
            }
            self.nodes[i].counter_emitted = true;
            self.emit(i, 0, 1.0);
            return Ok(true);
        }

        if self.nodes[i].is_generator() {
            if self.nodes[i].finished() || !self.outputs_free(i) {
                return Ok(false);
            }
            let idx = self.nodes[i].progress;
            let value = match kind {
                OpKind::AddrGen => addrgen_address(&self.nodes[i].operands, idx),
                OpKind::BitGen => {
                    let (m, n) = (self.nodes[i].operands[0], self.nodes[i].operands[1]);
                    let idx = idx as f64;
                    if idx >= m && idx < m + n {
                        1.0
                    } else {
                        0.0
                    }
                }
                OpKind::ConstStream => self.nodes[i].operands[0],
                _ => unreachable!(),
            };
            self.nodes[i].progress += 1;
            self.emit(i, 0, value);
            return Ok(true);
        }

        // All dynamic inputs must hold a ready token.
        for p in 0..self.nodes[i].in_edges.len() {
            if self.front_ready(self.nodes[i].in_edges[p]).is_none() {
                return Ok(false);
            }
        }
        if !self.outputs_free(i) {
            return Ok(false);
        }
        if matches!(kind, OpKind::Load | OpKind::Store) {
            if *budget == 0 {
                *budget_stalled = true;
                return Ok(false);
            }
            *budget -= 1;
        }

        let inputs: Vec<f64> = (0..self.nodes[i].in_edges.len())
            .map(|p| self.consume(self.nodes[i].in_edges[p]))
            .collect();
        match kind {
            OpKind::Mul => self.emit(i, 0, self.nodes[i].operands[0] * inputs[0]),
            OpKind::Mac => self.emit(i, 0, inputs[1] + self.nodes[i].operands[0] * inputs[0]),
            OpKind::Add => self.emit(i, 0, inputs[0] + inputs[1]),
            OpKind::Mux => self.emit(i, 0, if inputs[0] != 0.0 { inputs[2] } else { inputs[1] }),
            OpKind::Demux => {
                let port = usize::from(inputs[0] != 0.0);
                self.emit(i, port, inputs[1]);
                // Keep per-port seq streams aligned with emission counts.
            }
            OpKind::Cmp => {
                let hit = inputs[0] < inputs[1];
                self.emit(i, 0, if hit { 1.0 } else { 0.0 });
            }
            OpKind::Or => {
                let hit = inputs[0] != 0.0 || inputs[1] != 0.0;
                self.emit(i, 0, if hit { 1.0 } else { 0.0 });
            }
            OpKind::Copy => self.emit(i, 0, inputs[0]),
            OpKind::Shift => {
                let amount = self.nodes[i].operands[0] as i32;
                self.emit(i, 0, inputs[0] * 2f64.powi(amount));
            }
            OpKind::Load => {
                let addr = self.checked_addr(i, inputs[0])?;
                let value = self.memory.input[addr];
                self.memory.loads_issued += 1;
                self.stats.loads += 1;
                self.emit(i, 0, value);
            }
            OpKind::Store => {
                let addr = self.checked_addr(i, inputs[0])?;
                self.memory.output[addr] = inputs[1];
                self.memory.stores_issued += 1;
                self.stats.stores += 1;
                self.emit(i, 0, 1.0);
            }
            OpKind::Filter => {
                let k = self.nodes[i].progress;
                self.nodes[i].progress += 1;
                if filter_accepts(&self.nodes[i].operands, k) {
                    self.emit(i, 0, inputs[0]);
                } else {
                    self.stats.filter_drops += 1;
                }
            }
            OpKind::Counter => {
                self.nodes[i].progress += 1;
                if !self.nodes[i].counter_emitted
                    && self.nodes[i].progress >= self.nodes[i].operands[0] as u64
                {
                    self.nodes[i].counter_emitted = true;
                    self.emit(i, 0, 1.0);
                }
            }
            OpKind::Sink => {}
            OpKind::AddrGen | OpKind::BitGen | OpKind::ConstStream => unreachable!(),
        }
        Ok(true)
    }

    fn checked_addr(&self, i: usize, addr: f64) -> Result<usize, SimError> {
        let idx = addr as usize;
        if addr < 0.0 || addr.fract() != 0.0 || idx >= self.memory.input.len() {
            return Err(SimError::BadAddress {
                node: self.graph.node(NodeId(i as u32)).unwrap().name.clone(),
                addr,
            });
        }
        Ok(idx)
    }

    /// True if any queued token was not yet consumable during the cycle
    /// that just executed (`self.cycle` has already advanced past it).
    /// Such a token can still enable firings, so a zero-fire cycle with
    /// tokens in flight is a latency stall, not a deadlock.
    fn in_flight(&self) -> bool {
        self.edges
            .iter()
            .any(|e| e.queue.iter().any(|&(_, _, ready)| ready >= self.cycle))
    }

    fn blocked_report(&self) -> Vec<BlockedNode> {
        let mut out = Vec::new();
        for (i, node) in self.nodes.iter().enumerate() {
            if node.finished() || (node.kind == OpKind::Counter && node.counter_emitted) {
                continue;
            }
            let starving = node
                .in_edges
                .iter()
                .any(|&e| self.edges[e as usize].queue.is_empty());
            let reason = if !node.is_generator() && starving {
                BlockReason::EmptyInput
            } else {
                BlockReason::FullOutput
            };
            out.push(BlockedNode {
                node: self.graph.node(NodeId(i as u32)).unwrap().name.clone(),
                reason,
            });
        }
        out
    }

    fn finish_stats(&mut self) {
        for (i, e) in self.edges.iter().enumerate() {
            self.stats.final_occupancy[i] = e.queue.len() as u32;
        }
    }

    /// Steps until done, deadlock or the cycle limit.
    pub fn run(&mut self) -> Result<SimOutcome, SimError> {
        loop {
            if self.cycle >= self.config.max_cycles {
                self.finish_stats();
                return Ok(SimOutcome::CycleLimit(self.stats.clone()));
            }
            let fired = self.step()?;
            if self.done_fired {
                self.finish_stats();
                return Ok(SimOutcome::Done(self.stats.clone()));
            }
            if fired == 0 && !self.in_flight() {
                self.finish_stats();
                return Ok(SimOutcome::Deadlock(self.stats.clone(), self.blocked_report()));
            }
        }
    }
}

/// Runs a graph to completion over the given memory. The memory is
/// returned with the run's traffic counters and output grid.
pub fn run(
    graph: &Graph,
    memory: MemoryModel,
    config: SimConfig,
) -> Result<(SimOutcome, MemoryModel), SimError> {
    let mut sim = Simulator::new(graph, memory, config)?;
    let outcome = sim.run()?;
    Ok((outcome, sim.into_memory()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dfg::{Graph, NodeSpec};

    fn node(g: &mut Graph, name: &str, kind: OpKind, ops: &[f64]) -> NodeId {
        g.add_node(NodeSpec::new(name, kind).operands(ops.to_vec()))
            .unwrap()
    }

    /// consts -> mul(x3) -> done sink.
    fn mul_graph(values: &[f64]) -> Graph {
        let mut g = Graph::new();
        let cs = node(
            &mut g,
            "cs",
            OpKind::ConstStream,
            &[values[0], values.len() as f64],
        );
        let mul = node(&mut g, "mul", OpKind::Mul, &[3.0]);
        let done = node(&mut g, "done", OpKind::Sink, &[]);
        g.connect((cs, 0), (mul, 0), 2).unwrap();
        g.connect((mul, 0), (done, 0), 2).unwrap();
        g.set_done(done).unwrap();
        g
    }

    fn memoryless(cap: usize) -> MemoryModel {
        MemoryModel::new(vec![0.0], cap)
    }

    #[test]
    fn mul_fires_with_one_queued_token() {
        let g = mul_graph(&[2.0]);
        let mut sim = Simulator::new(&g, memoryless(1), SimConfig::default()).unwrap();
        assert_eq!(sim.step().unwrap(), 1); // const stream emits
        assert_eq!(sim.step().unwrap(), 1); // mul consumes the queued token
        // The mul's product is 3 * 2 with unit latency.
        let edge = g.in_edge(g.node_id("done").unwrap(), 0).unwrap();
        assert_eq!(sim.edges[edge.0 as usize].queue.front().unwrap().0, 6.0);
    }

    #[test]
    fn mac_without_accumulator_does_not_fire() {
        let mut g = Graph::new();
        let data = node(&mut g, "data", OpKind::ConstStream, &[2.0, 4.0]);
        let acc = node(&mut g, "acc", OpKind::ConstStream, &[10.0, 4.0]);
        let mac = node(&mut g, "mac", OpKind::Mac, &[0.5]);
        let done = node(&mut g, "done", OpKind::Sink, &[]);
        g.connect((data, 0), (mac, 0), 8).unwrap();
        g.connect((acc, 0), (mac, 1), 8).unwrap();
        g.connect((mac, 0), (done, 0), 8).unwrap();
        g.set_done(done).unwrap();

        // Delay the accumulator stream by giving it a large latency.
        let config = SimConfig {
            latency_overrides: vec![(OpKind::ConstStream, 1)],
            ..Default::default()
        };
        let mut sim = Simulator::new(&g, memoryless(1), config).unwrap();
        sim.step().unwrap();
        // Cycle 1: data token ready; acc token ready too (same latency), so
        // instead force the check by draining acc first: rebuild with acc
        // latency 3.
        let config = SimConfig {
            latency_overrides: vec![],
            ..Default::default()
        };
        let mut g2 = Graph::new();
        let data = node(&mut g2, "data", OpKind::ConstStream, &[2.0, 1.0]);
        let acc = node(&mut g2, "acc", OpKind::ConstStream, &[10.0, 1.0]);
        let mac = node(&mut g2, "mac", OpKind::Mac, &[0.5]);
        let done = node(&mut g2, "done", OpKind::Sink, &[]);
        g2.connect((data, 0), (mac, 0), 8).unwrap();
        g2.connect((acc, 0), (mac, 1), 8).unwrap();
        g2.connect((mac, 0), (done, 0), 8).unwrap();
        g2.set_done(done).unwrap();
        // Bump only the acc node's latency via its NodeSpec by rebuilding:
        // simpler: step once (both emit, ready next cycle), then check the
        // mac did not fire in the same cycle as its data-only availability.
        let mut sim2 = Simulator::new(&g2, memoryless(1), config).unwrap();
        assert_eq!(sim2.step().unwrap(), 2); // both const streams emit
        let fired = sim2.stats.fires[mac.0 as usize];
        assert_eq!(fired, 0, "mac must not fire before both inputs are ready");
        sim2.step().unwrap();
        assert_eq!(sim2.stats.fires[mac.0 as usize], 1);
        assert_eq!(sim.stats.fires[2], 0);
    }

    #[test]
    fn bandwidth_cap_serializes_loads() {
        // Two address generators feed two loads; with one memory op per
        // cycle the second load fires one cycle later.
        let mut g = Graph::new();
        let a0 = node(&mut g, "a0", OpKind::AddrGen, &[0.0, 1.0, 1.0, 0.0, 1.0]);
        let a1 = node(&mut g, "a1", OpKind::AddrGen, &[0.0, 1.0, 1.0, 0.0, 1.0]);
        let l0 = node(&mut g, "l0", OpKind::Load, &[]);
        let l1 = node(&mut g, "l1", OpKind::Load, &[]);
        let add = node(&mut g, "add", OpKind::Add, &[]);
        let done = node(&mut g, "done", OpKind::Sink, &[]);
        g.connect((a0, 0), (l0, 0), 2).unwrap();
        g.connect((a1, 0), (l1, 0), 2).unwrap();
        g.connect((l0, 0), (add, 0), 2).unwrap();
        g.connect((l1, 0), (add, 1), 2).unwrap();
        g.connect((add, 0), (done, 0), 2).unwrap();
        g.set_done(done).unwrap();
        let mut sim = Simulator::new(&g, MemoryModel::new(vec![5.0], 1), SimConfig::default())
            .unwrap();
        sim.step().unwrap(); // both addrgens emit
        sim.step().unwrap(); // only l0 gets the budget
        assert_eq!(sim.stats.fires[l0.0 as usize], 1);
        assert_eq!(sim.stats.fires[l1.0 as usize], 0);
        assert_eq!(sim.stats.mem_ops_stalled, 1);
        sim.step().unwrap(); // l1 retries and fires
        assert_eq!(sim.stats.fires[l1.0 as usize], 1);
        let outcome = sim.run().unwrap();
        assert!(outcome.is_done());
    }

    #[test]
    fn filters_consume_unconditionally_and_count_drops() {
        let mut g = Graph::new();
        let cs = node(&mut g, "cs", OpKind::ConstStream, &[1.0, 6.0]);
        let f = node(&mut g, "f", OpKind::Filter, &[2.0, 3.0]);
        let done = node(&mut g, "done", OpKind::Sink, &[]);
        g.connect((cs, 0), (f, 0), 2).unwrap();
        g.connect((f, 0), (done, 0), 2).unwrap();
        g.set_done(done).unwrap();
        let (outcome, _) = run(&g, memoryless(1), SimConfig::default()).unwrap();
        let stats = outcome.stats();
        assert_eq!(stats.fires[f.0 as usize], 6, "all six tokens consumed");
        assert_eq!(stats.filter_drops, 4);
        assert_eq!(stats.dequeued[1], 2, "only positions 2 and 3 passed");
    }

    #[test]
    fn counter_emits_exactly_at_threshold() {
        let mut g = Graph::new();
        let cs = node(&mut g, "cs", OpKind::ConstStream, &[1.0, 5.0]);
        let cnt = node(&mut g, "cnt", OpKind::Counter, &[3.0]);
        let done = node(&mut g, "done", OpKind::Sink, &[]);
        g.connect((cs, 0), (cnt, 0), 8).unwrap();
        g.connect((cnt, 0), (done, 0), 8).unwrap();
        g.set_done(done).unwrap();
        let (outcome, _) = run(&g, memoryless(1), SimConfig::default()).unwrap();
        let stats = outcome.stats();
        assert!(outcome.is_done());
        assert_eq!(stats.enqueued[1], 1, "one done token");
        assert_eq!(stats.fires[cnt.0 as usize], 5, "keeps consuming after emit");
    }

    #[test]
    fn zero_threshold_counter_emits_without_input() {
        let mut g = Graph::new();
        // The counter's input comes from a stream that never produces.
        let cs = node(&mut g, "cs", OpKind::ConstStream, &[1.0, 0.0]);
        let cnt = node(&mut g, "cnt", OpKind::Counter, &[0.0]);
        let done = node(&mut g, "done", OpKind::Sink, &[]);
        g.connect((cs, 0), (cnt, 0), 2).unwrap();
        g.connect((cnt, 0), (done, 0), 2).unwrap();
        g.set_done(done).unwrap();
        let (outcome, _) = run(&g, memoryless(1), SimConfig::default()).unwrap();
        assert!(outcome.is_done());
    }

    #[test]
    fn latency_delays_consumption() {
        let g = mul_graph(&[1.0]);
        let config = SimConfig {
            latency_overrides: vec![(OpKind::Mul, 5)],
            ..Default::default()
        };
        let mut sim = Simulator::new(&g, memoryless(1), config).unwrap();
        // cs fires at cycle 0; mul at cycle 1; its token is ready at 1+5.
        for _ in 0..5 {
            sim.step().unwrap();
        }
        let done_idx = g.node_id("done").unwrap().0 as usize;
        assert_eq!(sim.stats.fires[done_idx], 0);
        let outcome = sim.run().unwrap();
        assert!(outcome.is_done());
        assert_eq!(outcome.stats().cycles, 7);
    }

    #[test]
    fn cycle_limit_reported() {
        let g = mul_graph(&[1.0, 2.0, 3.0]);
        let config = SimConfig {
            max_cycles: 1,
            ..Default::default()
        };
        let (outcome, _) = run(&g, memoryless(1), config).unwrap();
        assert!(matches!(outcome, SimOutcome::CycleLimit(_)));
        assert_eq!(outcome.stats().cycles, 1);
    }

    #[test]
    fn starved_add_reports_deadlock() {
        let mut g = Graph::new();
        let a = node(&mut g, "a", OpKind::ConstStream, &[1.0, 3.0]);
        let b = node(&mut g, "b", OpKind::ConstStream, &[1.0, 1.0]);
        let add = node(&mut g, "add", OpKind::Add, &[]);
        let done = node(&mut g, "done", OpKind::Sink, &[]);
        g.connect((a, 0), (add, 0), 8).unwrap();
        g.connect((b, 0), (add, 1), 8).unwrap();
        g.connect((add, 0), (done, 0), 8).unwrap();
        g.set_done(done).unwrap();
        let (outcome, _) = run(&g, memoryless(1), SimConfig::default()).unwrap();
        let SimOutcome::Deadlock(stats, blocked) = outcome else {
            panic!("expected deadlock");
        };
        assert_eq!(stats.enqueued[2], 1, "one sum produced before starvation");
        let add_block = blocked.iter().find(|b| b.node == "add").unwrap();
        assert_eq!(add_block.reason, BlockReason::EmptyInput);
    }

    #[test]
    fn full_output_reports_deadlock() {
        let mut g = Graph::new();
        let cs = node(&mut g, "cs", OpKind::ConstStream, &[1.0, 10.0]);
        let copy = node(&mut g, "copy", OpKind::Copy, &[]);
        let starved = node(&mut g, "starved", OpKind::ConstStream, &[1.0, 0.0]);
        let mac = node(&mut g, "mac", OpKind::Mac, &[1.0]);
        let done = node(&mut g, "done", OpKind::Sink, &[]);
        g.connect((cs, 0), (copy, 0), 2).unwrap();
        g.connect((copy, 0), (mac, 0), 2).unwrap();
        g.connect((starved, 0), (mac, 1), 2).unwrap();
        g.connect((mac, 0), (done, 0), 2).unwrap();
        g.set_done(done).unwrap();
        let (outcome, _) = run(&g, memoryless(1), SimConfig::default()).unwrap();
        let SimOutcome::Deadlock(_, blocked) = outcome else {
            panic!("expected deadlock");
        };
        let by_name = |n: &str| blocked.iter().find(|b| b.node == n).unwrap().reason;
        assert_eq!(by_name("copy"), BlockReason::FullOutput);
        assert_eq!(by_name("cs"), BlockReason::FullOutput);
        assert_eq!(by_name("mac"), BlockReason::EmptyInput);
    }

    #[test]
    fn deterministic_runs() {
        let g = mul_graph(&[0.25; 10]);
        let (o1, m1) = run(&g, memoryless(2), SimConfig::default()).unwrap();
        let (o2, m2) = run(&g, memoryless(2), SimConfig::default()).unwrap();
        assert_eq!(o1.stats().cycles, o2.stats().cycles);
        assert_eq!(o1.stats().fires, o2.stats().fires);
        assert_eq!(m1.output, m2.output);
    }

    #[test]
    fn addrgen_walks_nested_pattern() {
        let ops = [5.0, 3.0, 4.0, 100.0, 2.0];
        assert_eq!(addrgen_count(&ops), 8);
        let addrs: Vec<f64> = (0..8).map(|i| addrgen_address(&ops, i)).collect();
        assert_eq!(
            addrs,
            vec![5.0, 8.0, 11.0, 14.0, 105.0, 108.0, 111.0, 114.0]
        );
    }

    #[test]
    fn bad_address_is_an_error() {
        let mut g = Graph::new();
        let ag = node(&mut g, "ag", OpKind::AddrGen, &[7.0, 1.0, 1.0, 0.0, 1.0]);
        let ld = node(&mut g, "ld", OpKind::Load, &[]);
        let done = node(&mut g, "done", OpKind::Sink, &[]);
        g.connect((ag, 0), (ld, 0), 2).unwrap();
        g.connect((ld, 0), (done, 0), 2).unwrap();
        g.set_done(done).unwrap();
        let err = run(&g, MemoryModel::new(vec![0.0; 4], 1), SimConfig::default());
        assert!(matches!(err, Err(SimError::BadAddress { .. })));
    }

    #[test]
    fn invalid_graph_rejected() {
        let mut g = Graph::new();
        node(&mut g, "mac", OpKind::Mac, &[1.0]);
        assert!(matches!(
            Simulator::new(&g, memoryless(1), SimConfig::default()),
            Err(SimError::InvalidGraph(_))
        ));
    }

    #[test]
    fn logic_op_semantics() {
        // mux(sel,a,b), demux(sel,data), cmp, or, shift, bitgen together.
        let mut g = Graph::new();
        let bits = node(&mut g, "bits", OpKind::BitGen, &[1.0, 2.0, 1.0]);
        let a = node(&mut g, "a", OpKind::ConstStream, &[10.0, 4.0]);
        let b = node(&mut g, "b", OpKind::ConstStream, &[20.0, 4.0]);
        let mux = node(&mut g, "mux", OpKind::Mux, &[]);
        let shift = node(&mut g, "shift", OpKind::Shift, &[-1.0]);
        let done = node(&mut g, "done", OpKind::Sink, &[]);
        g.connect((bits, 0), (mux, 0), 8).unwrap();
        g.connect((a, 0), (mux, 1), 8).unwrap();
        g.connect((b, 0), (mux, 2), 8).unwrap();
        g.connect((mux, 0), (shift, 0), 8).unwrap();
        g.connect((shift, 0), (done, 0), 8).unwrap();
        g.set_done(done).unwrap();
        let mut sim = Simulator::new(&g, memoryless(1), SimConfig::default()).unwrap();
        let mut seen = Vec::new();
        for _ in 0..16 {
            sim.step().unwrap();
            let e = g.in_edge(done, 0).unwrap().0 as usize;
            while let Some(&(v, _, ready)) = sim.edges[e].queue.front() {
                if ready > sim.cycle {
                    break;
                }
                sim.edges[e].queue.pop_front();
                seen.push(v);
            }
        }
        // Pattern 0110 selects a,b,b,a; shift by -1 halves.
        assert_eq!(seen, vec![5.0, 10.0, 10.0, 5.0]);
    }

    #[test]
    fn high_water_and_busy_fraction_tracked() {
        let g = mul_graph(&[1.0; 6]);
        let (outcome, _) = run(&g, memoryless(1), SimConfig::default()).unwrap();
        let stats = outcome.stats();
        assert!(stats.queue_high_water.iter().all(|&hw| hw >= 1 && hw <= 2));
        let mul = g.node_id("mul").unwrap();
        let busy = stats.busy_fraction(mul);
        assert!(busy > 0.0 && busy <= 1.0);
        let csv = stats.high_water_csv(&g);
        assert!(csv.lines().count() == 1 + g.edge_count());
        assert!(csv.contains("cs,mul"));
    }
}
