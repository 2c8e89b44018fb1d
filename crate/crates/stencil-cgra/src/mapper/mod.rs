//! Parametric construction of stencil dataflow graphs.
//!
//! A stencil is described by its grid size, radius and coefficients
//! ([`StencilSpec1D`], [`StencilSpec2D`]); the generator lowers it to a
//! [`Graph`] of reader, compute, writer and synchronization workers.
//! Readers load the grid in an interleaved pattern and broadcast to the
//! compute chains; data-filtering nodes in front of every multiplier drop
//! the stream positions a chain place does not need; counters track store
//! acknowledgements and reduce into a single done signal.
//!
//! For 2D stencils the same readers feed both the row (x) chains and the
//! column (y) chains, so every grid point is loaded exactly once. The y
//! side needs enough queue capacity to hold the rows between first and
//! last use ([`mandatory_buffer_capacity`]); when the row width exceeds
//! the storage budget, [`block_plan`] splits the grid into vertical strips
//! that are executed one after another.

mod gen1d;
mod gen2d;

use thiserror::Error;

pub use gen1d::gen_stencil_1d;
pub use gen2d::{
    gen_stencil_2d, gen_stencil_2d_strip, gen_stencil_2d_strip_with_y_capacity,
    y_chain_edge_capacity,
};

#[derive(Debug, Error)]
pub enum SpecError {
    #[error("invalid stencil spec: {0}")]
    Invalid(String),
    #[error("argument out of bounds: {0}")]
    Bounds(String),
    #[error("storage budget {budget} below minimum viable block {required}")]
    StorageBudgetTooSmall { budget: usize, required: usize },
}

/// A `(2rx+1)`-point 1D star stencil over `n` grid points, computed by
/// `workers` parallel worker teams.
#[derive(Debug, Clone, PartialEq)]
pub struct StencilSpec1D {
    pub n: usize,
    pub rx: usize,
    /// `2rx + 1` coefficients; `coeffs[p]` multiplies `in[i - rx + p]`.
    pub coeffs: Vec<f64>,
    pub workers: usize,
}

impl StencilSpec1D {
    pub fn validate(&self) -> Result<(), SpecError> {
        if self.n <= 2 * self.rx {
            return Err(SpecError::Invalid(format!(
                "grid length {} must exceed 2*rx = {}",
                self.n,
                2 * self.rx
            )));
        }
        if self.coeffs.len() != 2 * self.rx + 1 {
            return Err(SpecError::Invalid(format!(
                "expected {} coefficients, got {}",
                2 * self.rx + 1,
                self.coeffs.len()
            )));
        }
        if self.workers < 1 || self.workers > self.n - 2 * self.rx {
            return Err(SpecError::Invalid(format!(
                "worker count {} outside 1..={}",
                self.workers,
                self.n - 2 * self.rx
            )));
        }
        Ok(())
    }

    /// Interior output count `n - 2rx`.
    pub fn output_count(&self) -> usize {
        self.n - 2 * self.rx
    }
}

/// A 2D star stencil on an `nx`-wide, `ny`-tall grid (row-major).
///
/// `out[j][i]` sums `coeff_x` over the row neighborhood and `coeff_y` over
/// the column neighborhood; the center point belongs to the x sum, so
/// `coeff_y[ry]` is unused.
#[derive(Debug, Clone, PartialEq)]
pub struct StencilSpec2D {
    pub nx: usize,
    pub ny: usize,
    pub rx: usize,
    pub ry: usize,
    pub coeff_x: Vec<f64>,
    pub coeff_y: Vec<f64>,
    pub workers: usize,
    /// Maximum tokens of mandatory y-side buffering the fabric can hold.
    pub storage_budget: usize,
}

impl StencilSpec2D {
    pub fn validate(&self) -> Result<(), SpecError> {
        if self.nx <= 2 * self.rx {
            return Err(SpecError::Invalid(format!(
                "nx {} must exceed 2*rx = {}",
                self.nx,
                2 * self.rx
            )));
        }
        if self.ny <= 2 * self.ry {
            return Err(SpecError::Invalid(format!(
                "ny {} must exceed 2*ry = {}",
                self.ny,
                2 * self.ry
            )));
        }
        if self.coeff_x.len() != 2 * self.rx + 1 {
            return Err(SpecError::Invalid(format!(
                "expected {} x coefficients, got {}",
                2 * self.rx + 1,
                self.coeff_x.len()
            )));
        }
        if self.coeff_y.len() != 2 * self.ry + 1 {
            return Err(SpecError::Invalid(format!(
                "expected {} y coefficients, got {}",
                2 * self.ry + 1,
                self.coeff_y.len()
            )));
        }
        if self.workers < 1 {
            return Err(SpecError::Invalid("worker count must be >= 1".into()));
        }
        if self.ry >= 1 {
            let required = 2 * self.ry * (2 * self.rx + 1);
            if self.storage_budget < required {
                return Err(SpecError::StorageBudgetTooSmall {
                    budget: self.storage_budget,
                    required,
                });
            }
        }
        Ok(())
    }

    pub fn output_count(&self) -> usize {
        (self.nx - 2 * self.rx) * (self.ny - 2 * self.ry)
    }
}

/// Which stream positions a data filter lets through.
///
/// Both modes decide from the 0-based position `k` of a token in the
/// incoming stream (the "row id" the control units attach to loads):
/// a bit pattern `0^m 1^n 0^p` passes `m <= k < m + n`; a row-id range
/// passes `lo <= k <= hi`. The two forms are interchangeable.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FilterSpec {
    BitPattern { m: usize, n: usize, p: usize },
    RowIdRange { lo: usize, hi: usize },
}

impl FilterSpec {
    /// Empty row-id window: passes nothing.
    pub const EMPTY: FilterSpec = FilterSpec::RowIdRange { lo: 1, hi: 0 };

    pub fn passes(&self, k: usize) -> bool {
        match *self {
            FilterSpec::BitPattern { m, n, .. } => k >= m && k < m + n,
            FilterSpec::RowIdRange { lo, hi } => k >= lo && k <= hi,
        }
    }

    /// Total pattern length `m + n + p` (bit-pattern mode only).
    pub fn stream_len(&self) -> Option<usize> {
        match *self {
            FilterSpec::BitPattern { m, n, p } => Some(m + n + p),
            FilterSpec::RowIdRange { .. } => None,
        }
    }

    /// The equivalent row-id range.
    pub fn to_row_range(&self) -> FilterSpec {
        match *self {
            FilterSpec::BitPattern { n: 0, .. } => FilterSpec::EMPTY,
            FilterSpec::BitPattern { m, n, .. } => FilterSpec::RowIdRange {
                lo: m,
                hi: m + n - 1,
            },
            r @ FilterSpec::RowIdRange { .. } => r,
        }
    }

    /// Renders a bit pattern as a 0/1 string, e.g. `11100`.
    pub fn pattern_string(&self) -> Option<String> {
        match *self {
            FilterSpec::BitPattern { m, n, p } => {
                let mut s = String::with_capacity(m + n + p);
                s.extend(std::iter::repeat('0').take(m));
                s.extend(std::iter::repeat('1').take(n));
                s.extend(std::iter::repeat('0').take(p));
                Some(s)
            }
            FilterSpec::RowIdRange { .. } => None,
        }
    }
}

/// Drop pattern for chain position `chain_pos` of a `chain_len`-long
/// MUL/MAC chain consuming a stream of `stream_len` tokens.
///
/// Position `pos` skips the first `pos` tokens and the last
/// `chain_len - 1 - pos` tokens, so a 3-point chain uses the patterns
/// `1^(N-2)00`, `01^(N-2)0` and `001^(N-2)`.
pub fn filter_pattern(
    chain_pos: usize,
    chain_len: usize,
    stream_len: usize,
) -> Result<FilterSpec, SpecError> {
    if chain_pos >= chain_len || chain_len > stream_len || chain_len == 0 {
        return Err(SpecError::Bounds(format!(
            "filter_pattern(pos={chain_pos}, len={chain_len}, stream={stream_len})"
        )));
    }
    Ok(FilterSpec::BitPattern {
        m: chain_pos,
        n: stream_len - chain_len + 1,
        p: chain_len - 1 - chain_pos,
    })
}

/// Number of outputs assigned to `worker_id` when the `n - 2rx` interior
/// outputs are dealt round-robin to `w` workers. The synchronization
/// counter of that worker waits for exactly this many stores.
pub fn sync_threshold(worker_id: usize, n: usize, rx: usize, w: usize) -> Result<usize, SpecError> {
    if w == 0 || worker_id >= w {
        return Err(SpecError::Bounds(format!(
            "worker {worker_id} outside 0..{w}"
        )));
    }
    let nout = n.saturating_sub(2 * rx);
    if worker_id >= nout {
        return Ok(0);
    }
    Ok((nout - worker_id).div_ceil(w))
}

/// Total tokens of y-side buffering needed to keep `2ry` rows of a
/// `block_width`-wide strip on fabric, i.e. `2 * ry * block_width`.
pub fn mandatory_buffer_capacity(ry: usize, block_width: usize) -> usize {
    debug_assert!(ry >= 1 && block_width >= 1);
    2 * ry * block_width
}

/// Input-column range of one vertical strip (end exclusive).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Strip {
    pub col_start: usize,
    pub col_end: usize,
}

impl Strip {
    pub fn width(&self) -> usize {
        self.col_end - self.col_start
    }

    /// Output columns produced by this strip, `[col_start + rx, col_end - rx)`.
    pub fn interior(&self, rx: usize) -> (usize, usize) {
        (self.col_start + rx, self.col_end - rx)
    }
}

/// Vertical-strip decomposition of a 2D grid. Strip interiors partition
/// the output columns; consecutive strips overlap by `2rx` input columns.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockPlan {
    pub strips: Vec<Strip>,
    /// Input width of a full (non-final) strip.
    pub block_width: usize,
}

impl BlockPlan {
    /// Sum of strip input widths; times `ny`, the loads a blocked run issues.
    pub fn total_input_width(&self) -> usize {
        self.strips.iter().map(Strip::width).sum()
    }
}

/// Splits the grid into vertical strips so that `2ry * block_width` tokens
/// of row reuse fit in `storage_budget`. With enough budget (or `ry = 0`)
/// a single strip covers the whole grid.
pub fn block_plan(spec: &StencilSpec2D) -> Result<BlockPlan, SpecError> {
    spec.validate()?;
    if spec.ry == 0 {
        return Ok(BlockPlan {
            strips: vec![Strip {
                col_start: 0,
                col_end: spec.nx,
            }],
            block_width: spec.nx,
        });
    }
    let block_width = spec.nx.min(spec.storage_budget / (2 * spec.ry));
    if block_width < 2 * spec.rx + 1 {
        return Err(SpecError::StorageBudgetTooSmall {
            budget: spec.storage_budget,
            required: 2 * spec.ry * (2 * spec.rx + 1),
        });
    }
    let interior_width = block_width - 2 * spec.rx;
    let nout = spec.nx - 2 * spec.rx;
    let n_strips = nout.div_ceil(interior_width);
    let strips = (0..n_strips)
        .map(|s| {
            let col_start = s * interior_width;
            Strip {
                col_start,
                col_end: spec.nx.min(col_start + block_width),
            }
        })
        .collect();
    Ok(BlockPlan {
        strips,
        block_width,
    })
}

/// First stream position consumed by chain position `pos` of worker `k`:
/// the producing reader is `(k + pos) % w` and the chain uses consecutive
/// tokens starting at `(k + pos) / w`.
pub(crate) fn chain_start(k: usize, pos: usize, w: usize) -> usize {
    (k + pos) / w
}

/// Per-reader interleaved stream length for a width-`n` segment:
/// reader `r` loads offsets `r, r+w, r+2w, ...`.
pub(crate) fn reader_stream_len(r: usize, n: usize, w: usize) -> usize {
    if r >= n {
        0
    } else {
        (n - r).div_ceil(w)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Independent oracle: deal interior outputs round-robin and count.
    fn sync_threshold_by_enumeration(k: usize, n: usize, rx: usize, w: usize) -> usize {
        (0..n.saturating_sub(2 * rx)).filter(|j| j % w == k).count()
    }

    #[test]
    fn filter_pattern_three_point_chain() {
        // MUL drops the last two, first MAC one on each side, second MAC
        // the first two.
        let n = 10;
        let spec0 = filter_pattern(0, 3, n).unwrap();
        let spec1 = filter_pattern(1, 3, n).unwrap();
        let spec2 = filter_pattern(2, 3, n).unwrap();
        assert_eq!(spec0.pattern_string().unwrap(), "1111111100");
        assert_eq!(spec1.pattern_string().unwrap(), "0111111110");
        assert_eq!(spec2.pattern_string().unwrap(), "0011111111");
        assert_eq!(spec0, FilterSpec::BitPattern { m: 0, n: 8, p: 2 });
        assert_eq!(spec1, FilterSpec::BitPattern { m: 1, n: 8, p: 1 });
        assert_eq!(spec2, FilterSpec::BitPattern { m: 2, n: 8, p: 0 });
    }

    #[test]
    fn filter_pattern_rejects_bad_bounds() {
        assert!(matches!(filter_pattern(3, 3, 10), Err(SpecError::Bounds(_))));
        assert!(matches!(filter_pattern(0, 11, 10), Err(SpecError::Bounds(_))));
    }

    #[test]
    fn filter_modes_agree_exhaustively() {
        // Every (pos, len, stream) window accepts the same positions in
        // bit-pattern and row-id form.
        for stream_len in 1..=64 {
            for chain_len in 1..=9.min(stream_len) {
                for pos in 0..chain_len {
                    let bits = filter_pattern(pos, chain_len, stream_len).unwrap();
                    let range = bits.to_row_range();
                    for k in 0..stream_len + 4 {
                        assert_eq!(
                            bits.passes(k),
                            range.passes(k),
                            "disagree at k={k} for ({pos},{chain_len},{stream_len})"
                        );
                    }
                    assert_eq!(bits.stream_len(), Some(stream_len));
                }
            }
        }
    }

    #[test]
    fn empty_filter_passes_nothing() {
        for k in 0..16 {
            assert!(!FilterSpec::EMPTY.passes(k));
        }
        let zero = FilterSpec::BitPattern { m: 2, n: 0, p: 3 };
        assert!(!zero.to_row_range().passes(2));
    }

    #[test]
    fn sync_threshold_matches_enumeration() {
        assert_eq!(sync_threshold(0, 10, 1, 3).unwrap(), 3);
        assert_eq!(sync_threshold(1, 10, 1, 3).unwrap(), 3);
        assert_eq!(sync_threshold(2, 10, 1, 3).unwrap(), 2);
        assert_eq!(sync_threshold(0, 3, 1, 1).unwrap(), 1);
        // Large paper-sized case, verified by enumeration.
        assert_eq!(
            sync_threshold(5, 194400, 8, 6).unwrap(),
            sync_threshold_by_enumeration(5, 194400, 8, 6)
        );
        assert_eq!(sync_threshold(5, 194400, 8, 6).unwrap(), 32397);
        for (n, rx, w) in [(10, 1, 3), (64, 8, 6), (17, 0, 4), (5, 2, 1), (100, 3, 7)] {
            for k in 0..w {
                assert_eq!(
                    sync_threshold(k, n, rx, w).unwrap(),
                    sync_threshold_by_enumeration(k, n, rx, w),
                    "mismatch at k={k} n={n} rx={rx} w={w}"
                );
            }
        }
    }

    #[test]
    fn sync_threshold_sums_to_output_count() {
        for (n, rx, w) in [(10, 1, 3), (194400, 8, 6), (64, 8, 48), (7, 3, 1)] {
            let total: usize = (0..w).map(|k| sync_threshold(k, n, rx, w).unwrap()).sum();
            assert_eq!(total, n - 2 * rx);
        }
    }

    #[test]
    fn sync_threshold_bounds() {
        assert!(matches!(sync_threshold(3, 10, 1, 3), Err(SpecError::Bounds(_))));
        assert!(matches!(sync_threshold(0, 10, 1, 0), Err(SpecError::Bounds(_))));
    }

    #[test]
    fn mandatory_buffering_formula() {
        assert_eq!(mandatory_buffer_capacity(12, 960), 23040);
        assert_eq!(mandatory_buffer_capacity(1, 1), 2);
        assert_eq!(mandatory_buffer_capacity(2, 10), 40);
    }

    fn spec_2d(nx: usize, rx: usize, ry: usize, budget: usize) -> StencilSpec2D {
        StencilSpec2D {
            nx,
            ny: 4 * ry + 8,
            rx,
            ry,
            coeff_x: vec![1.0; 2 * rx + 1],
            coeff_y: vec![1.0; 2 * ry + 1],
            workers: 1,
            storage_budget: budget,
        }
    }

    #[test]
    fn block_plan_single_strip_with_ample_budget() {
        let spec = spec_2d(96, 12, 12, 2 * 12 * 96);
        let plan = block_plan(&spec).unwrap();
        assert_eq!(plan.strips, vec![Strip { col_start: 0, col_end: 96 }]);
        assert_eq!(plan.block_width, 96);
    }

    #[test]
    fn block_plan_forty_wide_strips() {
        let spec = spec_2d(96, 12, 12, 960);
        let plan = block_plan(&spec).unwrap();
        assert_eq!(plan.block_width, 40);
        assert_eq!(plan.strips.len(), 5);
        // Consecutive strips overlap by exactly 2rx input columns.
        for pair in plan.strips.windows(2) {
            assert_eq!(pair[0].col_end - pair[1].col_start, 24);
        }
        assert_eq!(plan.total_input_width(), 192);
    }

    #[test]
    fn block_plan_minimum_viable_budget() {
        let spec = spec_2d(96, 12, 12, 2 * 12 * 25);
        let plan = block_plan(&spec).unwrap();
        assert_eq!(plan.block_width, 25);
        // One output column per strip.
        for strip in &plan.strips {
            let (lo, hi) = strip.interior(12);
            assert_eq!(hi - lo, 1);
        }
        assert_eq!(plan.strips.len(), 72);
    }

    #[test]
    fn block_plan_interiors_partition_outputs() {
        for (nx, rx, ry, budget) in [
            (96, 12, 12, 960),
            (96, 12, 12, 2 * 12 * 40 + 7),
            (50, 3, 2, 2 * 2 * 9),
            (33, 0, 4, 64),
            (40, 5, 1, 2 * 11),
        ] {
            let spec = spec_2d(nx, rx, ry, budget);
            let plan = block_plan(&spec).unwrap();
            let mut covered = vec![0usize; nx];
            let mut input_seen = vec![0usize; nx];
            for strip in &plan.strips {
                let (lo, hi) = strip.interior(rx);
                for c in lo..hi {
                    covered[c] += 1;
                }
                for c in strip.col_start..strip.col_end {
                    input_seen[c] += 1;
                }
            }
            // A column can sit in more than two strips only when the strip
            // interior is narrower than the halo it drags along.
            let max_multiplicity = if plan.block_width >= 4 * rx { 2 } else { usize::MAX };
            for c in 0..nx {
                let interior = c >= rx && c < nx - rx;
                assert_eq!(covered[c], usize::from(interior), "col {c} of {nx}");
                assert!(input_seen[c] >= 1 && input_seen[c] <= max_multiplicity);
                if plan.strips.len() == 1 {
                    assert_eq!(input_seen[c], 1);
                }
            }
        }
    }

    #[test]
    fn block_plan_rejects_tiny_budget() {
        // One token short of the minimum viable block 2*ry*(2rx+1).
        let spec = spec_2d(96, 12, 12, 2 * 12 * 25 - 1);
        assert!(matches!(
            block_plan(&spec),
            Err(SpecError::StorageBudgetTooSmall { .. })
        ));
    }

    #[test]
    fn spec_validation() {
        let mut spec = StencilSpec1D {
            n: 10,
            rx: 1,
            coeffs: vec![1.0, 2.0, 3.0],
            workers: 3,
        };
        assert!(spec.validate().is_ok());
        spec.workers = 9;
        assert!(spec.validate().is_err());
        spec.workers = 0;
        assert!(spec.validate().is_err());
        spec.workers = 1;
        spec.coeffs.pop();
        assert!(spec.validate().is_err());
        let bad_2d = StencilSpec2D {
            nx: 10,
            ny: 2,
            rx: 1,
            ry: 1,
            coeff_x: vec![1.0; 3],
            coeff_y: vec![1.0; 3],
            workers: 1,
            storage_budget: 100,
        };
        assert!(bad_2d.validate().is_err());
    }
}
