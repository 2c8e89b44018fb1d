//! Graphviz DOT emission.

use std::fmt::Write;

use super::{Graph, GraphError, OpKind, DEFAULT_EDGE_CAPACITY};

/// Fill color per operation kind, following the coding used in the
/// dataflow-graph figures: mux light yellow, mul orange, mac red, demux
/// light blue, add green, address generators cyan, everything else gray.
pub fn fill_color(kind: OpKind) -> &'static str {
    match kind {
        OpKind::Mux => "lightyellow",
        OpKind::Mul => "orange",
        OpKind::Mac => "red",
        OpKind::Demux => "lightblue",
        OpKind::Add => "green",
        OpKind::AddrGen => "cyan",
        _ => "gray",
    }
}

impl Graph {
    /// Renders the graph as a Graphviz digraph with kind-coded oval nodes.
    /// Edges are labeled with their capacity when it differs from the
    /// default. Fails if the graph does not validate.
    pub fn to_dot(&self) -> Result<String, GraphError> {
        let violations = self.validate();
        if !violations.is_empty() {
            return Err(GraphError::InvalidGraph(violations));
        }
        let mut out = String::new();
        out.push_str("digraph dfg {\n");
        out.push_str("  rankdir=TB;\n");
        out.push_str("  node [shape=oval, style=filled];\n");
        for (_, node) in self.nodes() {
            let mut label = format!("{}\\n{}", node.name, node.kind);
            if matches!(node.kind, OpKind::Mul | OpKind::Mac) {
                write!(label, " {}", node.operands[0]).unwrap();
            }
            writeln!(
                out,
                "  \"{}\" [label=\"{}\", fillcolor={}];",
                node.name,
                label,
                fill_color(node.kind)
            )
            .unwrap();
        }
        for (_, edge) in self.edges() {
            let src = &self.node(edge.src.0).unwrap().name;
            let dst = &self.node(edge.dst.0).unwrap().name;
            if edge.capacity > DEFAULT_EDGE_CAPACITY {
                writeln!(out, "  \"{src}\" -> \"{dst}\" [label=\"cap={}\"];", edge.capacity)
                    .unwrap();
            } else {
                writeln!(out, "  \"{src}\" -> \"{dst}\";").unwrap();
            }
        }
        out.push_str("}\n");
        Ok(out)
    }
}
