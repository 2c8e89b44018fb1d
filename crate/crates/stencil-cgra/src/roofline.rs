//! Roofline analysis: arithmetic intensity, bandwidth/compute bounds and
//! the worker count that saturates the machine.
//!
//! A MAC counts as 2 flops and a MUL as 1, so one output point of a
//! stencil with radii `rx` (and `ry`) costs `2*(2rx + 2ry) + 1` flops.
//! Traffic is one load of the input grid plus one store of the output
//! grid, `bytes_per_elem` each way.

use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum RooflineError {
    #[error("grid of {len} cells too small for radius {radius}")]
    BadRadius { len: usize, radius: usize },
}

/// Target machine: clock, double-precision MAC count and memory bandwidth.
#[derive(Debug, Clone, Copy, PartialEq, serde::Deserialize, Serialize)]
pub struct MachineModel {
    pub freq_ghz: f64,
    pub n_mac_pes: usize,
    pub bw_gbs: f64,
    #[serde(default = "default_bytes")]
    pub bytes_per_elem: usize,
}

fn default_bytes() -> usize {
    8
}

impl Default for MachineModel {
    /// The reference CGRA: 1.2 GHz, 256 MACs, 100 GB/s, double precision.
    fn default() -> Self {
        MachineModel {
            freq_ghz: 1.2,
            n_mac_pes: 256,
            bw_gbs: 100.0,
            bytes_per_elem: 8,
        }
    }
}

impl MachineModel {
    /// Hard compute roof `2 * n_mac_pes * freq` in GFLOPS.
    pub fn roof_gflops(&self) -> f64 {
        2.0 * self.n_mac_pes as f64 * self.freq_ghz
    }
}

/// Problem shape fed to the roofline, radii only.
#[derive(Debug, Clone, Copy)]
pub enum StencilShape {
    OneD { n: usize, rx: usize },
    TwoD { nx: usize, ny: usize, rx: usize, ry: usize },
}

impl StencilShape {
    /// MACs per worker: `2rx` (1D) or `2rx + 2ry` (2D).
    pub fn macs_per_worker(&self) -> usize {
        match *self {
            StencilShape::OneD { rx, .. } => 2 * rx,
            StencilShape::TwoD { rx, ry, .. } => 2 * (rx + ry),
        }
    }

    pub fn arithmetic_intensity(&self, bytes: usize) -> Result<f64, RooflineError> {
        match *self {
            StencilShape::OneD { n, rx } => ai_1d(n, rx, bytes),
            StencilShape::TwoD { nx, ny, rx, ry } => ai_2d(nx, ny, rx, ry, bytes),
        }
    }
}

/// Flops per byte of a 1D stencil:
/// `(2*2rx + 1) * (n - 2rx) / (2n * bytes)`.
pub fn ai_1d(n: usize, rx: usize, bytes: usize) -> Result<f64, RooflineError> {
    if n <= 2 * rx {
        return Err(RooflineError::BadRadius { len: n, radius: rx });
    }
    let flops = (2 * (2 * rx) + 1) as f64 * (n - 2 * rx) as f64;
    Ok(flops / (2 * n * bytes) as f64)
}

/// Flops per byte of a 2D stencil:
/// `(2*(2rx + 2ry) + 1) * (nx - 2rx) * (ny - 2ry) / (2 * nx * ny * bytes)`.
pub fn ai_2d(nx: usize, ny: usize, rx: usize, ry: usize, bytes: usize) -> Result<f64, RooflineError> {
    if nx <= 2 * rx {
        return Err(RooflineError::BadRadius { len: nx, radius: rx });
    }
    if ny <= 2 * ry {
        return Err(RooflineError::BadRadius { len: ny, radius: ry });
    }
    let flops = (2 * (2 * rx + 2 * ry) + 1) as f64 * ((nx - 2 * rx) * (ny - 2 * ry)) as f64;
    Ok(flops / (2 * nx * ny * bytes) as f64)
}

/// GFLOPS demanded by `w` workers of `2m + 1` flops each per cycle.
pub fn compute_bound_gflops(machine: &MachineModel, macs_per_worker: usize, w: usize) -> f64 {
    machine.freq_ghz * w as f64 * (2 * macs_per_worker + 1) as f64
}

/// Roofline summary for one stencil on one machine.
#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct RooflineReport {
    /// Flops per byte.
    pub ai: f64,
    /// Bandwidth-limited GFLOPS, `bw * ai`.
    pub bw_bound_gflops: f64,
    /// Compute demand at the recommended worker count.
    pub compute_bound_gflops: f64,
    /// Most workers that fit the MAC budget.
    pub w_max: usize,
    /// Smallest worker count whose compute demand covers the bandwidth
    /// bound (capped at `w_max`).
    pub recommended_w: usize,
    /// min(bandwidth bound, compute bound, machine roof).
    pub peak_gflops: f64,
    pub machine_roof_gflops: f64,
}

/// Picks the worker count for a stencil: enough workers to saturate the
/// achievable bandwidth, but no more than fit the fabric.
pub fn worker_bounds(
    shape: StencilShape,
    machine: &MachineModel,
) -> Result<RooflineReport, RooflineError> {
    let ai = shape.arithmetic_intensity(machine.bytes_per_elem)?;
    let bw_bound = machine.bw_gbs * ai;
    let macs = shape.macs_per_worker();
    // A radius-0 stencil needs no MACs; its single MUL still occupies a PE.
    let w_max = if macs == 0 {
        machine.n_mac_pes
    } else {
        machine.n_mac_pes / macs
    };
    let recommended_w = (1..=w_max)
        .find(|&w| compute_bound_gflops(machine, macs, w) >= bw_bound)
        .unwrap_or(w_max);
    let compute_bound = compute_bound_gflops(machine, macs, recommended_w);
    let peak = bw_bound.min(compute_bound).min(machine.roof_gflops());
    Ok(RooflineReport {
        ai,
        bw_bound_gflops: bw_bound,
        compute_bound_gflops: compute_bound,
        w_max,
        recommended_w,
        peak_gflops: peak,
        machine_roof_gflops: machine.roof_gflops(),
    })
}

/// CSV of `(w, compute_bound, bw_bound)` rows for plotting the roofline.
pub fn roofline_csv(shape: StencilShape, machine: &MachineModel) -> Result<String, RooflineError> {
    let report = worker_bounds(shape, machine)?;
    let macs = shape.macs_per_worker();
    let mut out = String::from("w,compute_bound_gflops,bw_bound_gflops\n");
    for w in 1..=report.w_max.max(1) {
        out.push_str(&format!(
            "{w},{},{}\n",
            compute_bound_gflops(machine, macs, w),
            report.bw_bound_gflops
        ));
    }
    Ok(out)
}
