//! Small dense tensors for `n <= 2`.

/// An `n x n` matrix, `n` in {1, 2}; entries beyond `n` are zero.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Tensor {
    pub dim: usize,
    pub m: [[f64; 2]; 2],
}

impl Tensor {
    pub fn zeros(dim: usize) -> Self {
        Tensor {
            dim,
            m: [[0.0; 2]; 2],
        }
    }

    pub fn diag(dim: usize, d: [f64; 2]) -> Self {
        let mut t = Self::zeros(dim);
        for a in 0..dim {
            t.m[a][a] = d[a];
        }
        t
    }

    pub fn scalar(dim: usize, s: f64) -> Self {
        Self::diag(dim, [s, s])
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.m[i][j]
    }

    pub fn add(&self, o: &Tensor) -> Tensor {
        let mut t = *self;
        for i in 0..2 {
            for j in 0..2 {
                t.m[i][j] += o.m[i][j];
            }
        }
        t
    }

    pub fn scale(&self, s: f64) -> Tensor {
        let mut t = *self;
        t.m.iter_mut().flatten().for_each(|v| *v *= s);
        t
    }

    pub fn apply(&self, p: [f64; 2]) -> [f64; 2] {
        let mut out = [0.0; 2];
        for i in 0..self.dim {
            for j in 0..self.dim {
                out[i] += self.m[i][j] * p[j];
            }
        }
        out
    }

    pub fn quad(&self, p: [f64; 2]) -> f64 {
        let q = self.apply(p);
        (0..self.dim).map(|i| q[i] * p[i]).sum()
    }

    pub fn det(&self) -> f64 {
        if self.dim == 1 {
            self.m[0][0]
        } else {
            self.m[0][0] * self.m[1][1] - self.m[0][1] * self.m[1][0]
        }
    }

    pub fn inverse(&self) -> Option<Tensor> {
        let d = self.det();
        if d == 0.0 || !d.is_finite() {
            return None;
        }
        let mut t = Self::zeros(self.dim);
        if self.dim == 1 {
            t.m[0][0] = 1.0 / d;
        } else {
            t.m[0][0] = self.m[1][1] / d;
            t.m[1][1] = self.m[0][0] / d;
            t.m[0][1] = -self.m[0][1] / d;
            t.m[1][0] = -self.m[1][0] / d;
        }
        Some(t)
    }

    pub fn max_abs(&self) -> f64 {
        self.m.iter().flatten().fold(0.0, |a, &b| a.max(libm::fabs(b)))
    }

    pub fn asymmetry(&self) -> f64 {
        libm::fabs(self.m[0][1] - self.m[1][0])
    }

    pub fn off_diagonal(&self) -> f64 {
        libm::fabs(self.m[0][1]).max(libm::fabs(self.m[1][0]))
    }

    /// Eigenvalues of the symmetric part, ascending.
    pub fn eigenvalues(&self) -> [f64; 2] {
        if self.dim == 1 {
            return [self.m[0][0], self.m[0][0]];
        }
        let a = self.m[0][0];
        let d = self.m[1][1];
        let b = 0.5 * (self.m[0][1] + self.m[1][0]);
        let mean = 0.5 * (a + d);
        let r = libm::hypot(0.5 * (a - d), b);
        [mean - r, mean + r]
    }
}
