//! JSON serialization of graphs.
//!
//! Schema:
//!
//! ```json
//! {
//!   "nodes": [{"id": "w0_mul", "kind": "mul", "ops": [0.5],
//!              "latency": 1, "worker": "compute:0", "pos": [1, 0]}],
//!   "edges": [{"src": ["w0_mul", 0], "dst": ["w0_mac1", 1], "cap": 2}],
//!   "done": "done"
//! }
//! ```
//!
//! `worker` and `pos` are optional; `done` is null for graphs that have no
//! done node yet. Deserialization rebuilds the graph through the normal
//! constructors, so duplicate ids, arity mismatches and port conflicts are
//! rejected with their usual errors.

use serde::{Deserialize, Serialize};

use super::{Graph, GraphError, NodeSpec, OpKind, WorkerTag};

/// Short human description of the on-disk schema, kept next to the code
/// that implements it.
pub const JSON_SCHEMA_NOTES: &str = r#"{"nodes":[{"id":str,"kind":str,"ops":[num],"latency":int,"worker":str?,"pos":[int,int]?}],"edges":[{"src":[str,int],"dst":[str,int],"cap":int}],"done":str?}"#;

#[derive(Serialize, Deserialize)]
struct NodeDoc {
    id: String,
    kind: String,
    ops: Vec<f64>,
    latency: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    worker: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pos: Option<(u32, u32)>,
}

#[derive(Serialize, Deserialize)]
struct EdgeDoc {
    src: (String, u16),
    dst: (String, u16),
    cap: u32,
}

#[derive(Serialize, Deserialize)]
struct GraphDoc {
    nodes: Vec<NodeDoc>,
    edges: Vec<EdgeDoc>,
    done: Option<String>,
}

fn parse_err(message: impl Into<String>) -> GraphError {
    GraphError::Parse {
        location: "document".into(),
        message: message.into(),
    }
}

impl Graph {
    /// Serializes to the documented JSON schema.
    pub fn to_json(&self) -> String {
        let doc = GraphDoc {
            nodes: self
                .nodes()
                .map(|(_, n)| NodeDoc {
                    id: n.name.clone(),
                    kind: n.kind.name().to_string(),
                    ops: n.operands.clone(),
                    latency: n.latency,
                    worker: n.worker.map(|w| w.to_string()),
                    pos: n.grid_pos,
                })
                .collect(),
            edges: self
                .edges()
                .map(|(_, e)| EdgeDoc {
                    src: (self.node(e.src.0).unwrap().name.clone(), e.src.1),
                    dst: (self.node(e.dst.0).unwrap().name.clone(), e.dst.1),
                    cap: e.capacity,
                })
                .collect(),
            done: self
                .done_node()
                .and_then(|d| self.node(d))
                .map(|n| n.name.clone()),
        };
        serde_json::to_string_pretty(&doc).expect("graph serialization cannot fail")
    }

    /// Parses a graph from the documented JSON schema.
    /// `deserialize(serialize(g))` is structurally equal to `g`.
    pub fn from_json(text: &str) -> Result<Graph, GraphError> {
        let doc: GraphDoc = serde_json::from_str(text).map_err(|e| GraphError::Parse {
            location: format!("line {} column {}", e.line(), e.column()),
            message: e.to_string(),
        })?;
        let mut graph = Graph::new();
        for node in doc.nodes {
            let kind = OpKind::from_name(&node.kind)
                .ok_or_else(|| parse_err(format!("unknown op kind '{}'", node.kind)))?;
            let worker = match node.worker {
                None => None,
                Some(w) => Some(
                    WorkerTag::parse(&w)
                        .ok_or_else(|| parse_err(format!("bad worker tag '{w}'")))?,
                ),
            };
            let mut spec = NodeSpec::new(node.id, kind)
                .operands(node.ops)
                .latency(node.latency);
            spec.worker = worker;
            spec.grid_pos = node.pos;
            graph.add_node(spec)?;
        }
        for edge in doc.edges {
            let src = graph
                .node_id(&edge.src.0)
                .ok_or_else(|| parse_err(format!("edge source '{}' not defined", edge.src.0)))?;
            let dst = graph
                .node_id(&edge.dst.0)
                .ok_or_else(|| parse_err(format!("edge target '{}' not defined", edge.dst.0)))?;
            graph.connect((src, edge.src.1), (dst, edge.dst.1), edge.cap)?;
        }
        if let Some(done) = doc.done {
            let id = graph
                .node_id(&done)
                .ok_or_else(|| parse_err(format!("done node '{done}' not defined")))?;
            graph.set_done(id)?;
        }
        Ok(graph)
    }
}
