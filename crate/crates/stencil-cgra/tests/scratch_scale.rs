//! Scratch scale checks (will be folded into the acceptance suite).

use std::time::Instant;

use stencil_cgra::experiment::random_grid;
use stencil_cgra::mapper::{
    block_plan, gen_stencil_1d, gen_stencil_2d_strip, gen_stencil_2d_strip_with_y_capacity,
    StencilSpec1D, StencilSpec2D,
};
use stencil_cgra::reference::{stencil2d_ref, Grid2D};
use stencil_cgra::sim::{run, MemoryModel, SimConfig, SimOutcome};

fn spec_2d(nx: usize, ny: usize, rx: usize, ry: usize, w: usize, budget: usize) -> StencilSpec2D {
    StencilSpec2D {
        nx,
        ny,
        rx,
        ry,
        coeff_x: random_grid(2 * rx + 1, 3).iter().map(|c| 2.0 * c - 1.0).collect(),
        coeff_y: random_grid(2 * ry + 1, 4).iter().map(|c| 2.0 * c - 1.0).collect(),
        workers: w,
        storage_budget: budget,
    }
}

#[test]
fn paper_scale_1d() {
    let t0 = Instant::now();
    let spec = StencilSpec1D {
        n: 194400,
        rx: 8,
        coeffs: random_grid(17, 9).iter().map(|c| 2.0 * c - 1.0).collect(),
        workers: 6,
    };
    let graph = gen_stencil_1d(&spec).unwrap();
    let memory = MemoryModel::new(random_grid(spec.n, 42), 6);
    let (outcome, memory) = run(&graph, memory, SimConfig::default()).unwrap();
    let stats = outcome.stats();
    eprintln!(
        "1d paper: cycles={} loads={} stores={} wall={:?}",
        stats.cycles,
        memory.loads_issued,
        memory.stores_issued,
        t0.elapsed()
    );
    assert!(outcome.is_done());
    assert_eq!(memory.loads_issued, 194400);
    assert_eq!(memory.stores_issued, 194384);
    let expect = stencil_cgra::reference::stencil1d_ref(&memory.input, 8, &spec.coeffs).unwrap();
    assert!(memory
        .output
        .iter()
        .zip(&expect)
        .all(|(a, b)| a.to_bits() == b.to_bits()));
}

#[test]
fn big_radius_2d_single_strip() {
    let t0 = Instant::now();
    let spec = spec_2d(96, 45, 12, 12, 5, 2 * 12 * 96);
    let plan = block_plan(&spec).unwrap();
    assert_eq!(plan.strips.len(), 1);
    let graph = gen_stencil_2d_strip(&spec, plan.strips[0]).unwrap();
    let memory = MemoryModel::new(random_grid(96 * 45, 7), 5);
    let (outcome, memory) = run(&graph, memory, SimConfig::default()).unwrap();
    let stats = outcome.stats();
    eprintln!(
        "2d 96x45 r12: cycles={} loads={} wall={:?} nodes={} hw_max={:?}",
        stats.cycles,
        memory.loads_issued,
        t0.elapsed(),
        graph.node_count(),
        stats.queue_high_water.iter().max(),
    );
    assert!(outcome.is_done(), "not done: {:?}", stats.cycles);
    assert_eq!(memory.loads_issued, 96 * 45);
    let input = Grid2D::new(96, 45, memory.input.clone());
    let expect = stencil2d_ref(&input, 12, 12, &spec.coeff_x, &spec.coeff_y).unwrap();
    assert!(memory
        .output
        .iter()
        .zip(&expect.values)
        .all(|(a, b)| a.to_bits() == b.to_bits()));
}

#[test]
fn blocked_2d_five_strips() {
    let t0 = Instant::now();
    let spec = spec_2d(96, 45, 12, 12, 5, 960);
    let plan = block_plan(&spec).unwrap();
    assert_eq!(plan.strips.len(), 5);
    let mut memory = MemoryModel::new(random_grid(96 * 45, 11), 5);
    for strip in &plan.strips {
        let graph = gen_stencil_2d_strip(&spec, *strip).unwrap();
        let (outcome, back) = run(&graph, memory, SimConfig::default()).unwrap();
        assert!(outcome.is_done(), "strip {strip:?} stalled");
        memory = back;
    }
    eprintln!(
        "2d blocked: loads={} stores={} wall={:?}",
        memory.loads_issued,
        memory.stores_issued,
        t0.elapsed()
    );
    assert_eq!(memory.loads_issued, (45 * 192) as u64);
    let input = Grid2D::new(96, 45, memory.input.clone());
    let expect = stencil2d_ref(&input, 12, 12, &spec.coeff_x, &spec.coeff_y).unwrap();
    assert!(memory
        .output
        .iter()
        .zip(&expect.values)
        .all(|(a, b)| a.to_bits() == b.to_bits()));
}

#[test]
fn under_buffered_2d_deadlocks() {
    let spec = spec_2d(96, 45, 12, 12, 5, 2 * 12 * 96);
    let plan = block_plan(&spec).unwrap();
    let graph = gen_stencil_2d_strip_with_y_capacity(&spec, plan.strips[0], 1).unwrap();
    let memory = MemoryModel::new(random_grid(96 * 45, 7), 5);
    let (outcome, _) = run(&graph, memory, SimConfig::default()).unwrap();
    match outcome {
        SimOutcome::Deadlock(stats, blocked) => {
            eprintln!(
                "deadlocked at cycle {} with {} blocked nodes",
                stats.cycles,
                blocked.len()
            );
            assert!(!blocked.is_empty());
        }
        other => panic!("expected deadlock, got {:?}", other.stats().cycles),
    }
}
