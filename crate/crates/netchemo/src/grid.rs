//! Discretization of one arc.

use serde::{Deserialize, Serialize};

/// Uniform grid on one arc `[0, L]` with `M` interior cells and two
/// boundary points, `x_j = j h` for `j = 0..=M+1`. The node-consistency
/// condition ties the spacing to the time step: `h = 2 k λ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArcGrid {
    /// Space step.
    pub h: f64,
    /// Time step (shared by every arc of the network).
    pub k: f64,
    /// Interior cell count M; arrays hold M+2 points.
    pub m: usize,
}

impl ArcGrid {
    pub fn n_points(&self) -> usize {
        self.m + 2
    }

    /// Arc length recovered from the grid, `(M+1) h`.
    pub fn length(&self) -> f64 {
        (self.m as f64 + 1.0) * self.h
    }

    pub fn x(&self, j: usize) -> f64 {
        j as f64 * self.h
    }
}
