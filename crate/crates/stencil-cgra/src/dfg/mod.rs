//! Dataflow-graph intermediate representation for CGRA programs.
//!
//! A [`Graph`] is a directed multigraph of instruction nodes ([`NodeSpec`])
//! connected by bounded FIFO edges ([`EdgeSpec`]). Nodes carry an operation
//! kind, static operands (coefficients, filter windows, thresholds) and
//! optional placement metadata; edges carry a token capacity. One node is
//! designated `done`: its firing signals completion to the host.
//!
//! The IR is pure data. Execution semantics live in [`crate::sim`].

mod dot;
mod json;

use std::collections::HashMap;
use std::fmt;

use thiserror::Error;

pub use json::JSON_SCHEMA_NOTES;

/// Default FIFO capacity in tokens. Two tokens permit pipelining between a
/// producer/consumer pair without masking buffering bugs; edges that need
/// more (mandatory buffering) override it explicitly.
pub const DEFAULT_EDGE_CAPACITY: u32 = 2;

/// Operation executed by one processing element.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum OpKind {
    /// `out = coeff * in`. Operands: `[coeff]`.
    Mul,
    /// Fused multiply-accumulate, `out = acc + coeff * data`.
    /// Inputs: data (port 0), accumulator (port 1). Operands: `[coeff]`.
    Mac,
    /// `out = a + b`.
    Add,
    /// Inputs: select, a, b. Emits `a` when select is zero, else `b`.
    Mux,
    /// Inputs: select, data. Routes data to output 0 when select is zero,
    /// else output 1.
    Demux,
    /// `out = (a < b) ? 1 : 0`.
    Cmp,
    /// `out = (a != 0 || b != 0) ? 1 : 0`.
    Or,
    /// Pass-through. Fan-out happens on edges; a Copy node is a relay
    /// station that adds one queue stage.
    Copy,
    /// `out = in * 2^amount`. Operands: `[amount]`.
    Shift,
    /// Input: address. Emits the memory word at that address.
    Load,
    /// Inputs: address (port 0), value (port 1). Writes memory, emits an
    /// acknowledge token.
    Store,
    /// Address generator: emits `base + o*outer_stride + i*inner_stride`
    /// for `o in 0..outer_count`, `i in 0..inner_count` (outer-major).
    /// Operands: `[base, inner_stride, inner_count, outer_stride, outer_count]`.
    AddrGen,
    /// Drops tokens outside a window over the consumed-token count `k`.
    /// Flat form, operands `[lo, hi]`: pass iff `lo <= k <= hi`.
    /// Rectangular form, operands `[row_len, row_lo, row_hi, col_lo, col_hi]`:
    /// decompose `k` as `(k / row_len, k % row_len)` and pass iff both the
    /// row and column windows accept. The rectangular form is what a 2D
    /// control unit checking row and column ids does.
    Filter,
    /// Emits the bit pattern `0^m 1^n 0^p` as 0.0/1.0 tokens, then stops.
    /// Operands: `[m, n, p]`.
    BitGen,
    /// Counts consumed tokens; the fire that reaches `threshold` also emits
    /// one token. Threshold 0 emits immediately without consuming.
    /// Operands: `[threshold]`.
    Counter,
    /// Emits `value` `count` times, then stops. Operands: `[value, count]`.
    /// Exists for tests; stencil coefficients are static node operands.
    ConstStream,
    /// Consumes tokens and emits nothing.
    Sink,
}

impl OpKind {
    pub const ALL: [OpKind; 17] = [
        OpKind::Mul,
        OpKind::Mac,
        OpKind::Add,
        OpKind::Mux,
        OpKind::Demux,
        OpKind::Cmp,
        OpKind::Or,
        OpKind::Copy,
        OpKind::Shift,
        OpKind::Load,
        OpKind::Store,
        OpKind::AddrGen,
        OpKind::Filter,
        OpKind::BitGen,
        OpKind::Counter,
        OpKind::ConstStream,
        OpKind::Sink,
    ];

    /// Number of dynamic input ports.
    pub fn input_arity(self) -> usize {
        match self {
            OpKind::AddrGen | OpKind::BitGen | OpKind::ConstStream => 0,
            OpKind::Mul
            | OpKind::Copy
            | OpKind::Shift
            | OpKind::Load
            | OpKind::Filter
            | OpKind::Counter
            | OpKind::Sink => 1,
            OpKind::Mac
            | OpKind::Add
            | OpKind::Demux
            | OpKind::Cmp
            | OpKind::Or
            | OpKind::Store => 2,
            OpKind::Mux => 3,
        }
    }

    /// Number of output ports. Each port may fan out to any number of edges.
    pub fn output_arity(self) -> usize {
        match self {
            OpKind::Sink => 0,
            OpKind::Demux => 2,
            _ => 1,
        }
    }

    /// Accepted static-operand counts.
    pub fn operand_arities(self) -> &'static [usize] {
        match self {
            OpKind::Mul | OpKind::Mac | OpKind::Shift | OpKind::Counter => &[1],
            OpKind::Filter => &[2, 5],
            OpKind::BitGen => &[3],
            OpKind::ConstStream => &[2],
            OpKind::AddrGen => &[5],
            _ => &[0],
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            OpKind::Mul => "mul",
            OpKind::Mac => "mac",
            OpKind::Add => "add",
            OpKind::Mux => "mux",
            OpKind::Demux => "demux",
            OpKind::Cmp => "cmp",
            OpKind::Or => "or",
            OpKind::Copy => "copy",
            OpKind::Shift => "shift",
            OpKind::Load => "load",
            OpKind::Store => "store",
            OpKind::AddrGen => "addrgen",
            OpKind::Filter => "filter",
            OpKind::BitGen => "bitgen",
            OpKind::Counter => "counter",
            OpKind::ConstStream => "conststream",
            OpKind::Sink => "sink",
        }
    }

    pub fn from_name(name: &str) -> Option<OpKind> {
        OpKind::ALL.iter().copied().find(|k| k.name() == name)
    }
}

impl fmt::Display for OpKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Role of the logical worker a node belongs to, for reporting only.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WorkerRole {
    Reader,
    Compute,
    Writer,
    Sync,
    Control,
}

impl WorkerRole {
    pub fn name(self) -> &'static str {
        match self {
            WorkerRole::Reader => "reader",
            WorkerRole::Compute => "compute",
            WorkerRole::Writer => "writer",
            WorkerRole::Sync => "sync",
            WorkerRole::Control => "control",
        }
    }

    pub fn from_name(name: &str) -> Option<WorkerRole> {
        [
            WorkerRole::Reader,
            WorkerRole::Compute,
            WorkerRole::Writer,
            WorkerRole::Sync,
            WorkerRole::Control,
        ]
        .into_iter()
        .find(|r| r.name() == name)
    }
}

/// Worker role plus index, e.g. `compute:2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WorkerTag {
    pub role: WorkerRole,
    pub index: u32,
}

impl fmt::Display for WorkerTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.role.name(), self.index)
    }
}

impl WorkerTag {
    pub fn new(role: WorkerRole, index: u32) -> Self {
        WorkerTag { role, index }
    }

    pub fn parse(s: &str) -> Option<WorkerTag> {
        let (role, idx) = s.split_once(':')?;
        Some(WorkerTag {
            role: WorkerRole::from_name(role)?,
            index: idx.parse().ok()?,
        })
    }
}

/// Dense node handle. Ascending `NodeId` is the deterministic evaluation
/// order used by the simulator; it equals insertion order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId(pub u32);

/// Dense edge handle, assigned in insertion order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct EdgeId(pub u32);

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "n{}", self.0)
    }
}

/// One PE instruction: kind, static operands and metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeSpec {
    /// Unique name, the external identifier in JSON/DOT.
    pub name: String,
    pub kind: OpKind,
    /// Static operands; meaning depends on `kind` (see [`OpKind`]).
    /// Integer-valued operands are stored as exact f64s.
    pub operands: Vec<f64>,
    /// Execution latency in cycles, >= 1.
    pub latency: u32,
    pub worker: Option<WorkerTag>,
    /// Advisory (row, col) hint for a physical rectangular layout. Not
    /// checked for legality.
    pub grid_pos: Option<(u32, u32)>,
}

impl NodeSpec {
    pub fn new(name: impl Into<String>, kind: OpKind) -> Self {
        NodeSpec {
            name: name.into(),
            kind,
            operands: Vec::new(),
            latency: 1,
            worker: None,
            grid_pos: None,
        }
    }

    pub fn operands(mut self, operands: Vec<f64>) -> Self {
        self.operands = operands;
        self
    }

    pub fn worker(mut self, tag: WorkerTag) -> Self {
        self.worker = Some(tag);
        self
    }

    pub fn grid_pos(mut self, row: u32, col: u32) -> Self {
        self.grid_pos = Some((row, col));
        self
    }

    pub fn latency(mut self, latency: u32) -> Self {
        self.latency = latency;
        self
    }
}

/// FIFO edge between an output port and an input port.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EdgeSpec {
    pub src: (NodeId, u16),
    pub dst: (NodeId, u16),
    /// Queue capacity in tokens, >= 1.
    pub capacity: u32,
}

/// One value travelling along an edge.
///
/// `seq` is the token's position in the producing port's stream; fan-out
/// copies of the same production share a `seq`. Consumers see strictly
/// increasing `seq` per edge (FIFO order).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Token {
    pub value: f64,
    pub seq: u64,
}

/// Structural problem found by [`Graph::validate`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    /// A dynamic input port has no incoming edge.
    DanglingInput { node: String, port: u16 },
    MissingDoneNode,
    /// The done node is not a Sink/Or/Add reduction node.
    BadDoneKind { node: String },
    OperandArity { node: String, got: usize },
    BadLatency { node: String },
    BadCapacity { edge: usize },
    /// An edge references a port index outside the node's arity.
    PortOutOfRange { edge: usize },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::DanglingInput { node, port } => {
                write!(f, "input port {port} of node '{node}' has no incoming edge")
            }
            Violation::MissingDoneNode => write!(f, "graph has no done node"),
            Violation::BadDoneKind { node } => {
                write!(f, "done node '{node}' is not a sink/or/add node")
            }
            Violation::OperandArity { node, got } => {
                write!(f, "node '{node}' has {got} static operands, wrong for its kind")
            }
            Violation::BadLatency { node } => write!(f, "node '{node}' has latency 0"),
            Violation::BadCapacity { edge } => write!(f, "edge {edge} has capacity 0"),
            Violation::PortOutOfRange { edge } => {
                write!(f, "edge {edge} references a port outside its node's arity")
            }
        }
    }
}

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("duplicate node id '{0}'")]
    DuplicateId(String),
    #[error("node '{name}' ({kind}): expected {expected:?} static operands, got {got}")]
    ArityMismatch {
        name: String,
        kind: OpKind,
        expected: &'static [usize],
        got: usize,
    },
    #[error("unknown node {0}")]
    UnknownNode(NodeId),
    #[error("port {port} out of range for node '{node}'")]
    BadPort { node: String, port: u16 },
    #[error("input port {port} of node '{node}' already has a producer")]
    PortOccupied { node: String, port: u16 },
    #[error("edge capacity must be >= 1")]
    ZeroCapacity,
    #[error("node latency must be >= 1")]
    ZeroLatency,
    #[error("invalid graph: {}", .0.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
    InvalidGraph(Vec<Violation>),
    #[error("parse error at {location}: {message}")]
    Parse { location: String, message: String },
}

/// Directed multigraph of instruction nodes and FIFO edges.
#[derive(Debug, Clone, Default)]
pub struct Graph {
    nodes: Vec<NodeSpec>,
    edges: Vec<EdgeSpec>,
    names: HashMap<String, NodeId>,
    /// dst (node, port) -> edge, enforcing the single-producer rule.
    in_edges: HashMap<(NodeId, u16), EdgeId>,
    done: Option<NodeId>,
}

impl Graph {
    pub fn new() -> Self {
        Graph::default()
    }

    /// Adds a node. Fails on duplicate names, operand-arity mismatches and
    /// zero latency.
    pub fn add_node(&mut self, spec: NodeSpec) -> Result<NodeId, GraphError> {
        if self.names.contains_key(&spec.name) {
            return Err(GraphError::DuplicateId(spec.name));
        }
        let expected = spec.kind.operand_arities();
        if !expected.contains(&spec.operands.len()) {
            return Err(GraphError::ArityMismatch {
                name: spec.name,
                kind: spec.kind,
                expected,
                got: spec.operands.len(),
            });
        }
        if spec.latency == 0 {
            return Err(GraphError::ZeroLatency);
        }
        let id = NodeId(self.nodes.len() as u32);
        self.names.insert(spec.name.clone(), id);
        self.nodes.push(spec);
        Ok(id)
    }

    /// Connects `src` (node, output port) to `dst` (node, input port).
    ///
    /// An input port accepts at most one incoming edge; an output port may
    /// fan out to any number of edges, each receiving an independent copy
    /// of every produced token.
    pub fn connect(
        &mut self,
        src: (NodeId, u16),
        dst: (NodeId, u16),
        capacity: u32,
    ) -> Result<EdgeId, GraphError> {
        if capacity == 0 {
            return Err(GraphError::ZeroCapacity);
        }
        let src_node = self.node(src.0).ok_or(GraphError::UnknownNode(src.0))?;
        if usize::from(src.1) >= src_node.kind.output_arity() {
            return Err(GraphError::BadPort {
                node: src_node.name.clone(),
                port: src.1,
            });
        }
        let dst_node = self.node(dst.0).ok_or(GraphError::UnknownNode(dst.0))?;
        if usize::from(dst.1) >= dst_node.kind.input_arity() {
            return Err(GraphError::BadPort {
                node: dst_node.name.clone(),
                port: dst.1,
            });
        }
        if self.in_edges.contains_key(&dst) {
            return Err(GraphError::PortOccupied {
                node: dst_node.name.clone(),
                port: dst.1,
            });
        }
        let id = EdgeId(self.edges.len() as u32);
        self.edges.push(EdgeSpec { src, dst, capacity });
        self.in_edges.insert(dst, id);
        Ok(id)
    }

    /// Marks the node whose firing signals completion.
    pub fn set_done(&mut self, id: NodeId) -> Result<(), GraphError> {
        if self.node(id).is_none() {
            return Err(GraphError::UnknownNode(id));
        }
        self.done = Some(id);
        Ok(())
    }

    pub fn done_node(&self) -> Option<NodeId> {
        self.done
    }

    pub fn node(&self, id: NodeId) -> Option<&NodeSpec> {
        self.nodes.get(id.0 as usize)
    }

    pub fn node_id(&self, name: &str) -> Option<NodeId> {
        self.names.get(name).copied()
    }

    pub fn edge(&self, id: EdgeId) -> Option<&EdgeSpec> {
        self.edges.get(id.0 as usize)
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn nodes(&self) -> impl Iterator<Item = (NodeId, &NodeSpec)> {
        self.nodes
            .iter()
            .enumerate()
            .map(|(i, n)| (NodeId(i as u32), n))
    }

    pub fn edges(&self) -> impl Iterator<Item = (EdgeId, &EdgeSpec)> {
        self.edges
            .iter()
            .enumerate()
            .map(|(i, e)| (EdgeId(i as u32), e))
    }

    /// The edge feeding a dynamic input port, if connected.
    pub fn in_edge(&self, node: NodeId, port: u16) -> Option<EdgeId> {
        self.in_edges.get(&(node, port)).copied()
    }

    /// All edges fanning out of an output port, in insertion order.
    pub fn out_edges(&self, node: NodeId, port: u16) -> Vec<EdgeId> {
        self.edges()
            .filter(|(_, e)| e.src == (node, port))
            .map(|(id, _)| id)
            .collect()
    }

    /// Structural validation. Returns every violation found; an empty
    /// report means the graph is well formed. Does not mutate.
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        for (id, node) in self.nodes() {
            if !node.kind.operand_arities().contains(&node.operands.len()) {
                out.push(Violation::OperandArity {
                    node: node.name.clone(),
                    got: node.operands.len(),
                });
            }
            if node.latency == 0 {
                out.push(Violation::BadLatency {
                    node: node.name.clone(),
                });
            }
            for port in 0..node.kind.input_arity() {
                if self.in_edge(id, port as u16).is_none() {
                    out.push(Violation::DanglingInput {
                        node: node.name.clone(),
                        port: port as u16,
                    });
                }
            }
        }
        for (id, edge) in self.edges() {
            if edge.capacity == 0 {
                out.push(Violation::BadCapacity { edge: id.0 as usize });
            }
            let src_ok = self
                .node(edge.src.0)
                .is_some_and(|n| usize::from(edge.src.1) < n.kind.output_arity());
            let dst_ok = self
                .node(edge.dst.0)
                .is_some_and(|n| usize::from(edge.dst.1) < n.kind.input_arity());
            if !src_ok || !dst_ok {
                out.push(Violation::PortOutOfRange { edge: id.0 as usize });
            }
        }
        match self.done {
            None => out.push(Violation::MissingDoneNode),
            Some(id) => match self.node(id) {
                None => out.push(Violation::MissingDoneNode),
                Some(n) if !matches!(n.kind, OpKind::Sink | OpKind::Or | OpKind::Add) => {
                    out.push(Violation::BadDoneKind {
                        node: n.name.clone(),
                    })
                }
                Some(_) => {}
            },
        }
        out
    }

    /// Structural equality: same nodes (by name), same edges with the same
    /// capacities, same done node. Edge insertion order is ignored.
    pub fn structurally_eq(&self, other: &Graph) -> bool {
        if self.nodes.len() != other.nodes.len() || self.edges.len() != other.edges.len() {
            return false;
        }
        for (id, node) in self.nodes() {
            match other.node_id(&node.name).and_then(|i| other.node(i)) {
                Some(n) if n == node && other.node_id(&node.name) == Some(id) => {}
                _ => return false,
            }
        }
        let key = |g: &Graph, e: &EdgeSpec| {
            (
                g.node(e.src.0).unwrap().name.clone(),
                e.src.1,
                g.node(e.dst.0).unwrap().name.clone(),
                e.dst.1,
                e.capacity,
            )
        };
        let mut a: Vec<_> = self.edges.iter().map(|e| key(self, e)).collect();
        let mut b: Vec<_> = other.edges.iter().map(|e| key(other, e)).collect();
        a.sort();
        b.sort();
        if a != b {
            return false;
        }
        let done_name = |g: &Graph| g.done.and_then(|d| g.node(d)).map(|n| n.name.clone());
        done_name(self) == done_name(other)
    }
}
