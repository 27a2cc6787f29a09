//! Small fixed-size vectors and complex 3×3 tensors.

use crate::C64;
use std::ops::{Add, AddAssign, Index, IndexMut, Mul, Neg, Sub};

pub type Vec2 = [f64; 2];
pub type Vec3 = [f64; 3];

pub fn dot2(a: Vec2, b: Vec2) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

pub fn norm2(a: Vec2) -> f64 {
    a[0].hypot(a[1])
}

pub fn norm3(a: Vec3) -> f64 {
    (a[0] * a[0] + a[1] * a[1] + a[2] * a[2]).sqrt()
}

pub fn sub3(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Tensor3(pub [[C64; 3]; 3]);

impl Tensor3 {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn identity() -> Self {
        Self::diag([1.0, 1.0, 1.0])
    }

    pub fn diag(d: [f64; 3]) -> Self {
        Self::from_fn(|i, j| if i == j { C64::from(d[i]) } else { C64::ZERO })
    }

    pub fn from_fn(f: impl Fn(usize, usize) -> C64) -> Self {
        let mut t = Self::zero();
        for i in 0..3 {
            for j in 0..3 {
                t.0[i][j] = f(i, j);
            }
        }
        t
    }

    pub fn from_real(m: [[f64; 3]; 3]) -> Self {
        Self::from_fn(|i, j| C64::from(m[i][j]))
    }

    /// `a ⊗ b` without conjugation.
    pub fn outer(a: [C64; 3], b: [C64; 3]) -> Self {
        Self::from_fn(|i, j| a[i] * b[j])
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(|i, j| self.0[j][i])
    }

    pub fn adjoint(&self) -> Self {
        Self::from_fn(|i, j| self.0[j][i].conj())
    }

    pub fn re(&self) -> Self {
        Self::from_fn(|i, j| C64::from(self.0[i][j].re))
    }

    pub fn im(&self) -> Self {
        Self::from_fn(|i, j| C64::from(self.0[i][j].im))
    }

    pub fn scale(&self, s: C64) -> Self {
        Self::from_fn(|i, j| self.0[i][j] * s)
    }

    pub fn matmul(&self, o: &Self) -> Self {
        Self::from_fn(|i, j| (0..3).map(|k| self.0[i][k] * o.0[k][j]).sum())
    }

    pub fn apply(&self, v: [C64; 3]) -> [C64; 3] {
        let mut out = [C64::ZERO; 3];
        for (i, o) in out.iter_mut().enumerate() {
            *o = (0..3).map(|k| self.0[i][k] * v[k]).sum();
        }
        out
    }

    pub fn det(&self) -> C64 {
        let m = &self.0;
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
            - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    }

    /// Largest entry modulus.
    pub fn max_abs(&self) -> f64 {
        self.0
            .iter()
            .flatten()
            .map(|z| z.norm())
            .fold(0.0, f64::max)
    }

    /// Inverse by cofactors; `None` when the determinant is negligible
    /// relative to the cube of the largest entry.
    pub fn inverse(&self) -> Option<Self> {
        let d = self.det();
        let s = self.max_abs();
        if !d.is_finite() || d.norm() <= 1e-13 * s * s * s || s == 0.0 {
            return None;
        }
        let m = &self.0;
        let c = |r0: usize, r1: usize, c0: usize, c1: usize| {
            m[r0][c0] * m[r1][c1] - m[r0][c1] * m[r1][c0]
        };
        let adj = [
            [c(1, 2, 1, 2), -c(0, 2, 1, 2), c(0, 1, 1, 2)],
            [-c(1, 2, 0, 2), c(0, 2, 0, 2), -c(0, 1, 0, 2)],
            [c(1, 2, 0, 1), -c(0, 2, 0, 1), c(0, 1, 0, 1)],
        ];
        Some(Self::from_fn(|i, j| adj[i][j] / d))
    }

    pub fn approx_eq(&self, o: &Self, tol: f64) -> bool {
        (*self - *o).max_abs() <= tol
    }
}

impl Index<(usize, usize)> for Tensor3 {
    type Output = C64;
    fn index(&self, (i, j): (usize, usize)) -> &C64 {
        &self.0[i][j]
    }
}

impl IndexMut<(usize, usize)> for Tensor3 {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C64 {
        &mut self.0[i][j]
    }
}

impl Add for Tensor3 {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self::from_fn(|i, j| self.0[i][j] + o.0[i][j])
    }
}

impl AddAssign for Tensor3 {
    fn add_assign(&mut self, o: Self) {
        for i in 0..3 {
            for j in 0..3 {
                self.0[i][j] += o.0[i][j];
            }
        }
    }
}

impl Sub for Tensor3 {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Self::from_fn(|i, j| self.0[i][j] - o.0[i][j])
    }
}

impl Neg for Tensor3 {
    type Output = Self;
    fn neg(self) -> Self {
        self.scale(C64::from(-1.0))
    }
}

impl Mul<f64> for Tensor3 {
    type Output = Self;
    fn mul(self, s: f64) -> Self {
        self.scale(C64::from(s))
    }
}

impl Mul<C64> for Tensor3 {
    type Output = Self;
    fn mul(self, s: C64) -> Self {
        self.scale(s)
    }
}
