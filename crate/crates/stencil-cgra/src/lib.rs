//! Stencil-to-CGRA mapping toolkit.
//!
//! Maps 1D and 2D star stencils onto a coarse-grained reconfigurable array
//! (CGRA) programmed with triggered instructions. The pipeline is:
//!
//! 1. [`mapper`] turns a stencil description into a dataflow graph of
//!    reader, compute, writer and synchronization workers ([`dfg::Graph`]).
//! 2. [`sim`] executes the graph cycle by cycle with bounded FIFO edges,
//!    a memory-traffic model and deadlock detection.
//! 3. [`reference`] provides scalar oracles used to verify that the fabric
//!    computes the exact same bits as a plain loop nest.
//! 4. [`roofline`] picks the worker count from arithmetic intensity and the
//!    machine's compute/bandwidth limits.
//! 5. [`experiment`] ties it all together behind a config file and the
//!    `stencil-cgra` binary.
//!
//! See the crate examples for runnable end-to-end demonstrations of each
//! capability.

pub mod dfg;
pub mod experiment;
pub mod mapper;
pub mod reference;
pub mod roofline;
pub mod sim;
