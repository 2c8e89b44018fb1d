//! 1D stencil graph construction.

use crate::dfg::{
    Graph, GraphError, NodeId, NodeSpec, OpKind, WorkerRole, WorkerTag, DEFAULT_EDGE_CAPACITY,
};

use super::{chain_start, reader_stream_len, FilterSpec, SpecError, StencilSpec1D};

fn must<T>(r: Result<T, GraphError>) -> T {
    r.expect("internal generator wiring error")
}

/// Flat filter operands for the inclusive window `[lo, hi]`; `count == 0`
/// yields a pass-nothing window.
pub(crate) fn flat_window_ops(lo: usize, count: usize) -> Vec<f64> {
    if count == 0 {
        let FilterSpec::RowIdRange { lo, hi } = FilterSpec::EMPTY else {
            unreachable!()
        };
        vec![lo as f64, hi as f64]
    } else {
        vec![lo as f64, (lo + count - 1) as f64]
    }
}

/// Interleaved reader: an address generator feeding a load unit.
/// Returns the load node; its output port broadcasts to the data filters.
pub(crate) fn add_reader(
    g: &mut Graph,
    r: usize,
    addrgen_ops: Vec<f64>,
) -> NodeId {
    let ag = must(g.add_node(
        NodeSpec::new(format!("r{r}_ag"), OpKind::AddrGen)
            .operands(addrgen_ops)
            .worker(WorkerTag::new(WorkerRole::Control, r as u32))
            .grid_pos(0, r as u32),
    ));
    let ld = must(g.add_node(
        NodeSpec::new(format!("r{r}_ld"), OpKind::Load)
            .worker(WorkerTag::new(WorkerRole::Reader, r as u32))
            .grid_pos(0, r as u32),
    ));
    must(g.connect((ag, 0), (ld, 0), DEFAULT_EDGE_CAPACITY));
    ld
}

/// Writer worker: an address generator and a store unit, plus the
/// synchronization counter watching its acknowledgements. Returns the
/// counter node.
pub(crate) fn add_writer_and_sync(
    g: &mut Graph,
    k: usize,
    value_src: NodeId,
    addrgen_ops: Vec<f64>,
    store_count: usize,
) -> NodeId {
    let wag = must(g.add_node(
        NodeSpec::new(format!("w{k}_wag"), OpKind::AddrGen)
            .operands(addrgen_ops)
            .worker(WorkerTag::new(WorkerRole::Control, k as u32)),
    ));
    let st = must(g.add_node(
        NodeSpec::new(format!("w{k}_st"), OpKind::Store)
            .worker(WorkerTag::new(WorkerRole::Writer, k as u32)),
    ));
    must(g.connect((wag, 0), (st, 0), DEFAULT_EDGE_CAPACITY));
    must(g.connect((value_src, 0), (st, 1), DEFAULT_EDGE_CAPACITY));
    let cnt = must(g.add_node(
        NodeSpec::new(format!("w{k}_cnt"), OpKind::Counter)
            .operands(vec![store_count as f64])
            .worker(WorkerTag::new(WorkerRole::Sync, k as u32)),
    ));
    must(g.connect((st, 0), (cnt, 0), DEFAULT_EDGE_CAPACITY));
    cnt
}

/// Reduces the per-worker sync outputs into one done signal: a chain of
/// Or nodes feeding a final sink, which becomes the graph's done node.
pub(crate) fn add_done_reduction(g: &mut Graph, counters: &[NodeId]) {
    let mut signal = counters[0];
    for (i, &cnt) in counters.iter().enumerate().skip(1) {
        let or = must(g.add_node(NodeSpec::new(format!("or{}", i - 1), OpKind::Or)));
        must(g.connect((signal, 0), (or, 0), DEFAULT_EDGE_CAPACITY));
        must(g.connect((cnt, 0), (or, 1), DEFAULT_EDGE_CAPACITY));
        signal = or;
    }
    let done = must(g.add_node(NodeSpec::new("done", OpKind::Sink)));
    must(g.connect((signal, 0), (done, 0), DEFAULT_EDGE_CAPACITY));
    must(g.set_done(done));
}

/// Builds the dataflow graph of a 1D stencil: `w` interleaved readers,
/// `w` compute chains of one MUL and `2rx` MACs behind data filters, `w`
/// writers and sync counters, reduced into a single done signal.
///
/// Chain position `p` of worker `k` holds `coeffs[p]` and consumes, via
/// its filter, grid points `k + p + t*w` from reader `(k + p) % w`, so
/// worker `k` emits `out[rx + k + t*w]` for `t = 0, 1, ...`.
pub fn gen_stencil_1d(spec: &StencilSpec1D) -> Result<Graph, SpecError> {
    spec.validate()?;
    let (n, rx, w) = (spec.n, spec.rx, spec.workers);
    let mut g = Graph::new();

    let loads: Vec<NodeId> = (0..w)
        .map(|r| {
            let len = reader_stream_len(r, n, w);
            add_reader(&mut g, r, vec![r as f64, w as f64, len as f64, 0.0, 1.0])
        })
        .collect();

    let mut counters = Vec::with_capacity(w);
    for k in 0..w {
        let t_k = super::sync_threshold(k, n, rx, w)?;
        let mut prev: Option<NodeId> = None;
        for p in 0..=2 * rx {
            let r = (k + p) % w;
            let lo = chain_start(k, p, w);
            let filter = must(g.add_node(
                NodeSpec::new(format!("w{k}_f{p}"), OpKind::Filter)
                    .operands(flat_window_ops(lo, t_k))
                    .worker(WorkerTag::new(WorkerRole::Compute, k as u32)),
            ));
            must(g.connect((loads[r], 0), (filter, 0), DEFAULT_EDGE_CAPACITY));
            let node = if p == 0 {
                must(g.add_node(
                    NodeSpec::new(format!("w{k}_mul"), OpKind::Mul)
                        .operands(vec![spec.coeffs[0]])
                        .worker(WorkerTag::new(WorkerRole::Compute, k as u32))
                        .grid_pos(1 + p as u32, r as u32),
                ))
            } else {
                must(g.add_node(
                    NodeSpec::new(format!("w{k}_mac{p}"), OpKind::Mac)
                        .operands(vec![spec.coeffs[p]])
                        .worker(WorkerTag::new(WorkerRole::Compute, k as u32))
                        .grid_pos(1 + p as u32, r as u32),
                ))
            };
            must(g.connect((filter, 0), (node, 0), DEFAULT_EDGE_CAPACITY));
            if let Some(prev) = prev {
                must(g.connect((prev, 0), (node, 1), DEFAULT_EDGE_CAPACITY));
            }
            prev = Some(node);
        }
        let cnt = add_writer_and_sync(
            &mut g,
            k,
            prev.expect("chain has at least the MUL"),
            vec![(rx + k) as f64, w as f64, t_k as f64, 0.0, 1.0],
            t_k,
        );
        counters.push(cnt);
    }
    add_done_reduction(&mut g, &counters);
    Ok(g)
}
