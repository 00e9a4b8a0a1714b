//! Dense 4x4 matrices in the Pauli order (I, x, y, z) and uniform-grid time
//! series of such matrices, the common container for correlation functions
//! and memory kernels.

use serde::{Deserialize, Serialize};

use crate::error::Error;

/// Row-major real 4x4 matrix in Pauli order (I, x, y, z).
#[derive(Clone, Copy, Debug, PartialEq, Default, Serialize, Deserialize)]
pub struct Mat4(pub [f64; 16]);

impl Mat4 {
    pub const ZERO: Mat4 = Mat4([0.0; 16]);

    pub fn identity() -> Mat4 {
        let mut m = [0.0; 16];
        for i in 0..4 {
            m[4 * i + i] = 1.0;
        }
        Mat4(m)
    }

    #[inline]
    pub fn get(&self, mu: usize, nu: usize) -> f64 {
        self.0[4 * mu + nu]
    }

    #[inline]
    pub fn set(&mut self, mu: usize, nu: usize, v: f64) {
        self.0[4 * mu + nu] = v;
    }

    pub fn transpose(&self) -> Mat4 {
        let mut out = Mat4::ZERO;
        for i in 0..4 {
            for j in 0..4 {
                out.set(i, j, self.get(j, i));
            }
        }
        out
    }

    pub fn matmul(&self, other: &Mat4) -> Mat4 {
        let mut out = Mat4::ZERO;
        for i in 0..4 {
            for k in 0..4 {
                let a = self.get(i, k);
                if a == 0.0 {
                    continue;
                }
                for j in 0..4 {
                    out.0[4 * i + j] += a * other.get(k, j);
                }
            }
        }
        out
    }

    pub fn add(&self, other: &Mat4) -> Mat4 {
        let mut out = *self;
        for (a, b) in out.0.iter_mut().zip(other.0.iter()) {
            *a += b;
        }
        out
    }

    pub fn sub(&self, other: &Mat4) -> Mat4 {
        let mut out = *self;
        for (a, b) in out.0.iter_mut().zip(other.0.iter()) {
            *a -= b;
        }
        out
    }

    pub fn scale(&self, s: f64) -> Mat4 {
        let mut out = *self;
        for a in out.0.iter_mut() {
            *a *= s;
        }
        out
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }
}

/// Time series of real 4x4 matrices on a uniform grid t = 0, dt, ..., n*dt.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CorrTensor {
    /// Output-grid spacing.
    pub dt: f64,
    /// Entries, one `Mat4` per grid point.
    pub frames: Vec<Mat4>,
}

pub const PAULI_LABELS: [&str; 4] = ["I", "x", "y", "z"];

impl CorrTensor {
    pub fn zeros(n_times: usize, dt: f64) -> CorrTensor {
        CorrTensor {
            dt,
            frames: vec![Mat4::ZERO; n_times],
        }
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn time(&self, it: usize) -> f64 {
        it as f64 * self.dt
    }

    #[inline]
    pub fn get(&self, it: usize, mu: usize, nu: usize) -> f64 {
        self.frames[it].get(mu, nu)
    }

    #[inline]
    pub fn set(&mut self, it: usize, mu: usize, nu: usize, v: f64) {
        self.frames[it].set(mu, nu, v);
    }

    pub fn same_grid(&self, other: &CorrTensor) -> bool {
        self.len() == other.len() && (self.dt - other.dt).abs() <= 1e-15 * self.dt.abs().max(1.0)
    }

    pub fn check_grid(&self, other: &CorrTensor) -> Result<(), Error> {
        if self.same_grid(other) {
            Ok(())
        } else {
            Err(Error::GridMismatch {
                left: (self.len(), self.dt),
                right: (other.len(), other.dt),
            })
        }
    }

    /// Frame-wise `m * self`.
    pub fn left_mul(&self, m: &Mat4) -> CorrTensor {
        CorrTensor {
            dt: self.dt,
            frames: self.frames.iter().map(|f| m.matmul(f)).collect(),
        }
    }

    /// Frame-wise `self * m`.
    pub fn right_mul(&self, m: &Mat4) -> CorrTensor {
        CorrTensor {
            dt: self.dt,
            frames: self.frames.iter().map(|f| f.matmul(m)).collect(),
        }
    }

    pub fn add(&self, other: &CorrTensor) -> CorrTensor {
        CorrTensor {
            dt: self.dt,
            frames: self
                .frames
                .iter()
                .zip(other.frames.iter())
                .map(|(a, b)| a.add(b))
                .collect(),
        }
    }

    pub fn sub(&self, other: &CorrTensor) -> CorrTensor {
        CorrTensor {
            dt: self.dt,
            frames: self
                .frames
                .iter()
                .zip(other.frames.iter())
                .map(|(a, b)| a.sub(b))
                .collect(),
        }
    }

    pub fn scale(&self, s: f64) -> CorrTensor {
        CorrTensor {
            dt: self.dt,
            frames: self.frames.iter().map(|f| f.scale(s)).collect(),
        }
    }

    /// Second-order central differences (one-sided at the ends).
    pub fn central_diff(&self) -> CorrTensor {
        let n = self.len();
        let mut out = CorrTensor::zeros(n, self.dt);
        if n < 2 {
            return out;
        }
        let inv2dt = 1.0 / (2.0 * self.dt);
        for it in 0..n {
            for i in 0..16 {
                let d = if it == 0 {
                    (-3.0 * self.frames[0].0[i] + 4.0 * self.frames[1].0[i]
                        - self.frames[2].0[i])
                        * inv2dt
                } else if it == n - 1 {
                    (3.0 * self.frames[n - 1].0[i] - 4.0 * self.frames[n - 2].0[i]
                        + self.frames[n - 3].0[i])
                        * inv2dt
                } else {
                    (self.frames[it + 1].0[i] - self.frames[it - 1].0[i]) * inv2dt
                };
                out.frames[it].0[i] = d;
            }
        }
        out
    }

    /// Fourth-order central differences (one-sided five-point stencils near
    /// the ends).  Preferable over `central_diff` when the data are smooth
    /// rather than noise-limited: at oscillation frequency w the truncation
    /// error drops from (w dt)^2/6 to (w dt)^4/30 of the signal.
    pub fn central_diff4(&self) -> CorrTensor {
        let n = self.len();
        if n < 5 {
            return self.central_diff();
        }
        let mut out = CorrTensor::zeros(n, self.dt);
        let inv12 = 1.0 / (12.0 * self.dt);
        let f = |it: usize, i: usize| self.frames[it].0[i];
        for it in 0..n {
            for i in 0..16 {
                let d = if it == 0 {
                    -25.0 * f(0, i) + 48.0 * f(1, i) - 36.0 * f(2, i) + 16.0 * f(3, i)
                        - 3.0 * f(4, i)
                } else if it == 1 {
                    -3.0 * f(0, i) - 10.0 * f(1, i) + 18.0 * f(2, i) - 6.0 * f(3, i)
                        + f(4, i)
                } else if it == n - 2 {
                    3.0 * f(n - 1, i) + 10.0 * f(n - 2, i) - 18.0 * f(n - 3, i)
                        + 6.0 * f(n - 4, i)
                        - f(n - 5, i)
                } else if it == n - 1 {
                    25.0 * f(n - 1, i) - 48.0 * f(n - 2, i) + 36.0 * f(n - 3, i)
                        - 16.0 * f(n - 4, i)
                        + 3.0 * f(n - 5, i)
                } else {
                    -f(it + 2, i) + 8.0 * f(it + 1, i) - 8.0 * f(it - 1, i) + f(it - 2, i)
                };
                out.frames[it].0[i] = d * inv12;
            }
        }
        out
    }

    /// Trapezoidal integral from 0 to the grid point `it_end` (inclusive).
    pub fn trapz_to(&self, it_end: usize) -> Mat4 {
        let mut acc = Mat4::ZERO;
        if it_end == 0 {
            return acc;
        }
        for it in 0..=it_end {
            let w = if it == 0 || it == it_end { 0.5 } else { 1.0 };
            for i in 0..16 {
                acc.0[i] += w * self.frames[it].0[i];
            }
        }
        acc.scale(self.dt)
    }

    pub fn max_abs(&self) -> f64 {
        self.frames.iter().fold(0.0f64, |m, f| m.max(f.max_abs()))
    }

    /// Max absolute entry-wise difference over the whole grid.
    pub fn sup_distance(&self, other: &CorrTensor) -> f64 {
        self.frames
            .iter()
            .zip(other.frames.iter())
            .fold(0.0f64, |m, (a, b)| m.max(a.sub(b).max_abs()))
    }
}
