//! Uniform periodic cell grids on the unit torus and face-centred fields.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{invalid, Result};

/// `n` cells per axis on `[0,1)^dim`, cell `c = i + n*j`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Grid {
    dim: usize,
    n: usize,
}

impl Grid {
    pub fn new(dim: usize, n: usize) -> Result<Self> {
        if !(dim == 1 || dim == 2) {
            return Err(invalid!("dimension must be 1 or 2, got {dim}"));
        }
        if n < 2 {
            return Err(invalid!("need at least 2 cells per axis, got {n}"));
        }
        Ok(Grid { dim, n })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn cells_per_axis(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        if self.dim == 1 {
            self.n
        } else {
            self.n * self.n
        }
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn h(&self) -> f64 {
        1.0 / self.n as f64
    }

    pub fn cell_volume(&self) -> f64 {
        let h = self.h();
        if self.dim == 1 {
            h
        } else {
            h * h
        }
    }

    pub fn coords(&self, c: usize) -> [usize; 2] {
        [c % self.n, c / self.n]
    }

    pub fn index(&self, i: usize, j: usize) -> usize {
        i + self.n * j
    }

    pub fn center(&self, c: usize) -> [f64; 2] {
        let [i, j] = self.coords(c);
        let h = self.h();
        let x2 = if self.dim == 2 { (j as f64 + 0.5) * h } else { 0.0 };
        [(i as f64 + 0.5) * h, x2]
    }

    /// Centre of the face between `c` and its upper neighbour along `axis`.
    pub fn face_point(&self, c: usize, axis: usize) -> [f64; 2] {
        let mut p = self.center(c);
        p[axis] += 0.5 * self.h();
        p
    }

    pub fn up(&self, c: usize, axis: usize) -> usize {
        let [i, j] = self.coords(c);
        if axis == 0 {
            self.index((i + 1) % self.n, j)
        } else {
            self.index(i, (j + 1) % self.n)
        }
    }

    pub fn down(&self, c: usize, axis: usize) -> usize {
        let [i, j] = self.coords(c);
        if axis == 0 {
            self.index((i + self.n - 1) % self.n, j)
        } else {
            self.index(i, (j + self.n - 1) % self.n)
        }
    }

    pub fn integrate(&self, u: &[f64]) -> f64 {
        u.iter().sum::<f64>() * self.cell_volume()
    }

    pub fn inner(&self, u: &[f64], v: &[f64]) -> f64 {
        u.iter().zip(v).map(|(a, b)| a * b).sum::<f64>() * self.cell_volume()
    }

    pub fn weighted_inner(&self, w: &[f64], u: &[f64], v: &[f64]) -> f64 {
        w.iter()
            .zip(u)
            .zip(v)
            .map(|((w, a), b)| w * a * b)
            .sum::<f64>()
            * self.cell_volume()
    }

    /// Forward differences `(u(c + e_a) - u(c)) / h` on every face.
    pub fn gradient(&self, u: &[f64]) -> FaceField {
        let inv_h = 1.0 / self.h();
        let axes = (0..self.dim)
            .map(|a| {
                (0..self.len())
                    .map(|c| (u[self.up(c, a)] - u[c]) * inv_h)
                    .collect()
            })
            .collect();
        FaceField { axes }
    }

    /// `out = A u` with `(A u)_c = -(1/h^2) sum_a [K_a(c)(u_{c+a}-u_c) - K_a(c-a)(u_c-u_{c-a})]`.
    pub fn apply_diffusion(&self, k: &FaceField, u: &[f64], out: &mut [f64]) {
        let inv_h2 = 1.0 / (self.h() * self.h());
        for c in 0..self.len() {
            let mut acc = 0.0;
            for a in 0..self.dim {
                let up = self.up(c, a);
                let dn = self.down(c, a);
                acc += k.axes[a][c] * (u[up] - u[c]) - k.axes[a][dn] * (u[c] - u[dn]);
            }
            out[c] = -acc * inv_h2;
        }
    }

    /// `sum_faces K (Delta u / h)^2 * cell volume`.
    pub fn dirichlet_form(&self, k: &FaceField, u: &[f64]) -> f64 {
        let inv_h = 1.0 / self.h();
        let mut acc = 0.0;
        for a in 0..self.dim {
            for c in 0..self.len() {
                let d = (u[self.up(c, a)] - u[c]) * inv_h;
                acc += k.axes[a][c] * d * d;
            }
        }
        acc * self.cell_volume()
    }
}

/// One value per face and axis; `axes[a][c]` sits between `c` and `c + e_a`.
#[derive(Clone, Debug, PartialEq)]
pub struct FaceField {
    pub axes: Vec<Vec<f64>>,
}

impl FaceField {
    pub fn constant(grid: &Grid, v: f64) -> Self {
        FaceField {
            axes: vec![vec![v; grid.len()]; grid.dim()],
        }
    }

    pub fn from_fn(grid: &Grid, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        FaceField {
            axes: (0..grid.dim())
                .map(|a| (0..grid.len()).map(|c| f(a, c)).collect())
                .collect(),
        }
    }

    /// Harmonic mean of cell values across each face (per axis component).
    pub fn harmonic(grid: &Grid, cells: &[[f64; 2]]) -> Self {
        Self::from_fn(grid, |a, c| harmonic_mean(cells[c][a], cells[grid.up(c, a)][a]))
    }

    pub fn min(&self) -> f64 {
        self.axes
            .iter()
            .flatten()
            .fold(f64::INFINITY, |m, &v| m.min(v))
    }
}

pub fn harmonic_mean(a: f64, b: f64) -> f64 {
    2.0 * a * b / (a + b)
}

/// Logarithmic mean `(a - b) / (ln a - ln b)`, continuous across `a = b`.
pub fn log_mean(a: f64, b: f64) -> f64 {
    let r = b / a - 1.0;
    if libm::fabs(r) < 1e-4 {
        // a * r / ln(1 + r) expanded to fourth order
        a * (1.0 + r * (0.5 + r * (-1.0 / 12.0 + r * (1.0 / 24.0 - r * 19.0 / 720.0))))
    } else {
        (a - b) / (libm::log(a) - libm::log(b))
    }
}
