//! Scalar oracles: straight-line stencil evaluation and analytic traffic
//! counts, used as ground truth for the fabric simulation.
//!
//! The accumulation order matches the generated compute chains exactly
//! (x terms left to right, then y terms `-ry..-1, +1..+ry`), so oracle
//! and simulator outputs can be compared bit for bit. Boundary cells stay
//! NaN in both.

use thiserror::Error;

use crate::mapper::{BlockPlan, StencilSpec1D, StencilSpec2D};

#[derive(Debug, Error)]
pub enum RefError {
    #[error("grid of {len} cells too small for radius {radius}")]
    BadRadius { len: usize, radius: usize },
}

/// Row-major 2D grid of f64 values.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid2D {
    pub nx: usize,
    pub ny: usize,
    pub values: Vec<f64>,
}

impl Grid2D {
    pub fn new(nx: usize, ny: usize, values: Vec<f64>) -> Self {
        assert!(nx > 0 && ny > 0 && values.len() == nx * ny);
        Grid2D { nx, ny, values }
    }

    pub fn filled(nx: usize, ny: usize, value: f64) -> Self {
        Grid2D::new(nx, ny, vec![value; nx * ny])
    }

    pub fn at(&self, j: usize, i: usize) -> f64 {
        self.values[j * self.nx + i]
    }

    pub fn set(&mut self, j: usize, i: usize, value: f64) {
        self.values[j * self.nx + i] = value;
    }
}

/// `out[i] = sum_p coeffs[p] * in[i - rx + p]`, accumulated strictly left
/// to right; boundary cells are NaN.
pub fn stencil1d_ref(input: &[f64], rx: usize, coeffs: &[f64]) -> Result<Vec<f64>, RefError> {
    if input.len() <= 2 * rx {
        return Err(RefError::BadRadius {
            len: input.len(),
            radius: rx,
        });
    }
    assert_eq!(coeffs.len(), 2 * rx + 1);
    let mut out = vec![f64::NAN; input.len()];
    for i in rx..input.len() - rx {
        // First term is a plain multiply, like the chain's MUL node.
        let mut acc = coeffs[0] * input[i - rx];
        for p in 1..=2 * rx {
            acc += coeffs[p] * input[i - rx + p];
        }
        out[i] = acc;
    }
    Ok(out)
}

/// 2D star stencil: the x terms of `coeff_x` left to right (the center
/// point belongs to this sum), then the y terms `coeff_y[ry + dy]` for
/// `dy = -ry..-1, +1..+ry` in that order. Boundary cells are NaN;
/// `coeff_y[ry]` is unused.
pub fn stencil2d_ref(
    input: &Grid2D,
    rx: usize,
    ry: usize,
    coeff_x: &[f64],
    coeff_y: &[f64],
) -> Result<Grid2D, RefError> {
    if input.nx <= 2 * rx {
        return Err(RefError::BadRadius {
            len: input.nx,
            radius: rx,
        });
    }
    if input.ny <= 2 * ry {
        return Err(RefError::BadRadius {
            len: input.ny,
            radius: ry,
        });
    }
    assert_eq!(coeff_x.len(), 2 * rx + 1);
    assert_eq!(coeff_y.len(), 2 * ry + 1);
    let mut out = Grid2D::filled(input.nx, input.ny, f64::NAN);
    for j in ry..input.ny - ry {
        for i in rx..input.nx - rx {
            let mut acc = coeff_x[0] * input.at(j, i - rx);
            for p in 1..=2 * rx {
                acc += coeff_x[p] * input.at(j, i - rx + p);
            }
            for dy in -(ry as i64)..=ry as i64 {
                if dy == 0 {
                    continue;
                }
                let jj = (j as i64 + dy) as usize;
                acc += coeff_y[(ry as i64 + dy) as usize] * input.at(jj, i);
            }
            out.set(j, i, acc);
        }
    }
    Ok(out)
}

/// Expected (loads, stores) traffic. Loading each point once is the whole
/// point of the mapping, so loads equal the grid size; blocked 2D runs
/// additionally reload the `2rx`-column halo between strips.
pub fn traffic_oracle_1d(spec: &StencilSpec1D) -> (u64, u64) {
    (spec.n as u64, (spec.n - 2 * spec.rx) as u64)
}

/// Expected (loads, stores) for a 2D run over the given block plan.
pub fn traffic_oracle_2d(spec: &StencilSpec2D, plan: &BlockPlan) -> (u64, u64) {
    let loads = (plan.total_input_width() * spec.ny) as u64;
    (loads, spec.output_count() as u64)
}
