//! 2D stencil graph construction.
//!
//! Per worker the x chain is the 1D mapping applied row by row; the y
//! contribution is a chain of `2ry` MACs seeded with the x partial sum,
//! all fed from the single reader that loads the worker's output columns
//! ("read the data only once"). One grid point is consumed by every y MAC
//! at a different output row, so the column stream is relayed stage to
//! stage through Copy nodes in consumption order (`+1 .. +ry`, then
//! `-1 .. -ry`) instead of broadcast all at once; the rows between first
//! and last use then sit spread across the relay queues, which is what
//! the mandatory buffering capacity pays for.

use crate::dfg::{
    Graph, GraphError, NodeId, NodeSpec, OpKind, WorkerRole, WorkerTag, DEFAULT_EDGE_CAPACITY,
};

use super::gen1d::{add_done_reduction, add_reader, add_writer_and_sync, flat_window_ops};
use super::{
    block_plan, chain_start, reader_stream_len, SpecError, StencilSpec2D, Strip,
};

fn must<T>(r: Result<T, GraphError>) -> T {
    r.expect("internal generator wiring error")
}

/// Capacity of one y-side edge: the default plus the mandatory total
/// `2*ry*block_width` spread over the `w` workers' `2ry` chain inputs
/// (at least 2 extra tokens each).
pub fn y_chain_edge_capacity(block_width: usize, w: usize) -> u32 {
    DEFAULT_EDGE_CAPACITY + block_width.div_ceil(w).max(2) as u32
}

/// Rect filter operands: rows `[row_lo, row_hi]` of `row_len`-token rows,
/// columns `[col_lo, col_lo + col_count - 1]` within each row.
fn rect_window_ops(
    row_len: usize,
    row_lo: usize,
    row_hi: usize,
    col_lo: usize,
    col_count: usize,
) -> Vec<f64> {
    if col_count == 0 || row_len == 0 {
        flat_window_ops(0, 0)
    } else {
        vec![
            row_len as f64,
            row_lo as f64,
            row_hi as f64,
            col_lo as f64,
            (col_lo + col_count - 1) as f64,
        ]
    }
}

/// Builds the graph for one vertical strip of a 2D stencil. Address
/// generators use the strip's column range against the full-grid row
/// stride, so re-running the shared structure per strip walks the whole
/// grid.
pub fn gen_stencil_2d_strip(spec: &StencilSpec2D, strip: Strip) -> Result<Graph, SpecError> {
    build_strip(spec, strip, None)
}

/// Same structure with every y-side edge forced to `capacity` tokens,
/// for under-buffering experiments. Capacities below the mandatory
/// amount deadlock the fabric.
pub fn gen_stencil_2d_strip_with_y_capacity(
    spec: &StencilSpec2D,
    strip: Strip,
    capacity: u32,
) -> Result<Graph, SpecError> {
    build_strip(spec, strip, Some(capacity))
}

/// Builds the graph of the first (often only) strip of the block plan.
pub fn gen_stencil_2d(spec: &StencilSpec2D) -> Result<Graph, SpecError> {
    let plan = block_plan(spec)?;
    gen_stencil_2d_strip(spec, plan.strips[0])
}

fn build_strip(
    spec: &StencilSpec2D,
    strip: Strip,
    y_capacity: Option<u32>,
) -> Result<Graph, SpecError> {
    spec.validate()?;
    let (nx, ny, rx, ry, w) = (spec.nx, spec.ny, spec.rx, spec.ry, spec.workers);
    if strip.col_end > nx || strip.width() <= 2 * rx {
        return Err(SpecError::Invalid(format!(
            "strip {}..{} does not fit the grid",
            strip.col_start, strip.col_end
        )));
    }
    let ns = strip.width();
    let c0 = strip.col_start;
    let ty = ny - 2 * ry;
    let y_cap = y_capacity.unwrap_or_else(|| y_chain_edge_capacity(ns, w));
    let mut g = Graph::new();

    let stream_lens: Vec<usize> = (0..w).map(|r| reader_stream_len(r, ns, w)).collect();
    let loads: Vec<NodeId> = (0..w)
        .map(|r| {
            add_reader(
                &mut g,
                r,
                vec![
                    (c0 + r) as f64,
                    w as f64,
                    stream_lens[r] as f64,
                    nx as f64,
                    ny as f64,
                ],
            )
        })
        .collect();

    let mut counters = Vec::with_capacity(w);
    for k in 0..w {
        let tx_k = super::sync_threshold(k, ns, rx, w)?;
        let tag = WorkerTag::new(WorkerRole::Compute, k as u32);

        // x chain: per row, the 1D mapping; filters drop the first and
        // last ry rows, which only feed the y side.
        let mut prev: Option<NodeId> = None;
        for p in 0..=2 * rx {
            let r = (k + p) % w;
            let ops = if tx_k == 0 {
                flat_window_ops(0, 0)
            } else {
                rect_window_ops(stream_lens[r], ry, ny - ry - 1, chain_start(k, p, w), tx_k)
            };
            let filter = must(g.add_node(
                NodeSpec::new(format!("w{k}_f{p}"), OpKind::Filter)
                    .operands(ops)
                    .worker(tag),
            ));
            must(g.connect((loads[r], 0), (filter, 0), DEFAULT_EDGE_CAPACITY));
            let node = if p == 0 {
                must(g.add_node(
                    NodeSpec::new(format!("w{k}_mul"), OpKind::Mul)
                        .operands(vec![spec.coeff_x[0]])
                        .worker(tag)
                        .grid_pos(1 + p as u32, r as u32),
                ))
            } else {
                must(g.add_node(
                    NodeSpec::new(format!("w{k}_mac{p}"), OpKind::Mac)
                        .operands(vec![spec.coeff_x[p]])
                        .worker(tag)
                        .grid_pos(1 + p as u32, r as u32),
                ))
            };
            must(g.connect((filter, 0), (node, 0), DEFAULT_EDGE_CAPACITY));
            if let Some(prev) = prev {
                must(g.connect((prev, 0), (node, 1), DEFAULT_EDGE_CAPACITY));
            }
            prev = Some(node);
        }
        let x_last = prev.expect("x chain has at least the MUL");

        let value_src = if ry == 0 {
            x_last
        } else {
            // Column stream: the reader whose residue class contains this
            // worker's output columns, filtered to those columns over all
            // rows.
            let y_reader = (k + rx) % w;
            let col_ops = if tx_k == 0 {
                flat_window_ops(0, 0)
            } else {
                rect_window_ops(
                    stream_lens[y_reader],
                    0,
                    ny - 1,
                    chain_start(k, rx, w),
                    tx_k,
                )
            };
            let col_filter = must(g.add_node(
                NodeSpec::new(format!("w{k}_ycol"), OpKind::Filter)
                    .operands(col_ops)
                    .worker(tag),
            ));
            must(g.connect((loads[y_reader], 0), (col_filter, 0), DEFAULT_EDGE_CAPACITY));

            // Relay stage order = consumption order. A +dy MAC uses a row
            // as soon as it is read; a -dy MAC uses it dy rows later.
            let dys: Vec<i64> = (1..=ry as i64).chain((1..=ry as i64).map(|d| -d)).collect();
            let mut stage_filters = Vec::with_capacity(dys.len());
            for &dy in &dys {
                let name = if dy > 0 {
                    format!("w{k}_yf_p{dy}")
                } else {
                    format!("w{k}_yf_m{}", -dy)
                };
                let lo_row = (ry as i64 + dy) as usize;
                let hi_row = (ny as i64 - ry as i64 + dy) as usize; // exclusive
                let filter = must(g.add_node(
                    NodeSpec::new(name, OpKind::Filter)
                        .operands(flat_window_ops(lo_row * tx_k, (hi_row - lo_row) * tx_k))
                        .worker(tag),
                ));
                stage_filters.push(filter);
            }
            let mut relay_src = col_filter;
            for s in 0..dys.len() {
                must(g.connect((relay_src, 0), (stage_filters[s], 0), y_cap));
                if s + 1 < dys.len() {
                    let copy = must(g.add_node(
                        NodeSpec::new(format!("w{k}_yrelay{s}"), OpKind::Copy).worker(tag),
                    ));
                    must(g.connect((relay_src, 0), (copy, 0), y_cap));
                    relay_src = copy;
                }
            }

            // Accumulator order is canonical: -ry .. -1 then +1 .. +ry,
            // seeded with the x partial sum.
            let mut acc_src = x_last;
            let acc_dys: Vec<i64> =
                (1..=ry as i64).map(|d| -d).rev().chain(1..=ry as i64).collect();
            for (row, &dy) in acc_dys.iter().enumerate() {
                let name = if dy > 0 {
                    format!("w{k}_ymac_p{dy}")
                } else {
                    format!("w{k}_ymac_m{}", -dy)
                };
                let mac = must(g.add_node(
                    NodeSpec::new(name, OpKind::Mac)
                        .operands(vec![spec.coeff_y[(ry as i64 + dy) as usize]])
                        .worker(tag)
                        .grid_pos((2 * rx + 2 + row) as u32, ((k + rx) % w) as u32),
                ));
                let stage = dys.iter().position(|&d| d == dy).unwrap();
                must(g.connect((stage_filters[stage], 0), (mac, 0), y_cap));
                must(g.connect((acc_src, 0), (mac, 1), y_cap));
                acc_src = mac;
            }
            acc_src
        };

        let cnt = add_writer_and_sync(
            &mut g,
            k,
            value_src,
            vec![
                (ry * nx + c0 + rx + k) as f64,
                w as f64,
                tx_k as f64,
                nx as f64,
                ty as f64,
            ],
            tx_k * ty,
        );
        counters.push(cnt);
    }
    add_done_reduction(&mut g, &counters);
    Ok(g)
}
