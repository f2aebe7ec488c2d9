//! Small dense linear algebra for d = 2, 3.
//!
//! Points and vectors are stored as `[f64; 3]` with unused trailing
//! components kept at zero, so sums, scalings and dot products never need the
//! dimension. Matrices carry their dimension explicitly.

use std::ops::{Add, AddAssign, Index, IndexMut, Mul, Neg, Sub};

use nalgebra::{Matrix2, Matrix3};

pub type Vector = [f64; 3];

pub const ZERO: Vector = [0.0; 3];

#[inline]
pub fn dot(a: &Vector, b: &Vector) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[inline]
pub fn norm(a: &Vector) -> f64 {
    dot(a, a).sqrt()
}

#[inline]
pub fn sub(a: &Vector, b: &Vector) -> Vector {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

#[inline]
pub fn add(a: &Vector, b: &Vector) -> Vector {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

#[inline]
pub fn scale(a: &Vector, s: f64) -> Vector {
    [a[0] * s, a[1] * s, a[2] * s]
}

/// `a + s * b`
#[inline]
pub fn axpy(a: &Vector, s: f64, b: &Vector) -> Vector {
    [a[0] + s * b[0], a[1] + s * b[1], a[2] + s * b[2]]
}

#[inline]
pub fn norm_inf(a: &Vector) -> f64 {
    a[0].abs().max(a[1].abs()).max(a[2].abs())
}

#[inline]
pub fn cross(a: &Vector, b: &Vector) -> Vector {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

/// Square matrix of dimension 2 or 3, row-major. Entries outside the leading
/// `dim × dim` block are always zero.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Mat {
    dim: usize,
    a: [[f64; 3]; 3],
}

impl Mat {
    pub fn zeros(dim: usize) -> Self {
        debug_assert!(dim == 2 || dim == 3);
        Mat { dim, a: [[0.0; 3]; 3] }
    }

    pub fn identity(dim: usize) -> Self {
        Self::scalar(dim, 1.0)
    }

    pub fn scalar(dim: usize, s: f64) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m.a[i][i] = s;
        }
        m
    }

    pub fn diag(dim: usize, d: &[f64]) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m.a[i][i] = d[i];
        }
        m
    }

    /// Builds from row slices; only the leading `dim` entries of each row are read.
    pub fn from_rows(dim: usize, rows: &[&[f64]]) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            for j in 0..dim {
                m.a[i][j] = rows[i][j];
            }
        }
        m
    }

    pub fn from_cols(dim: usize, cols: &[Vector]) -> Self {
        let mut m = Self::zeros(dim);
        for j in 0..dim {
            for i in 0..dim {
                m.a[i][j] = cols[j][i];
            }
        }
        m
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, i: usize) -> Vector {
        self.a[i]
    }

    pub fn col(&self, j: usize) -> Vector {
        [self.a[0][j], self.a[1][j], self.a[2][j]]
    }

    pub fn set_row(&mut self, i: usize, v: &Vector) {
        for j in 0..self.dim {
            self.a[i][j] = v[j];
        }
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.dim);
        for i in 0..self.dim {
            for j in 0..self.dim {
                t.a[j][i] = self.a[i][j];
            }
        }
        t
    }

    pub fn det(&self) -> f64 {
        let a = &self.a;
        match self.dim {
            2 => a[0][0] * a[1][1] - a[0][1] * a[1][0],
            _ => {
                a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1])
                    - a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0])
                    + a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0])
            }
        }
    }

    /// Inverse via the adjugate. `None` when the determinant is exactly zero
    /// or not finite.
    pub fn inverse(&self) -> Option<Self> {
        let det = self.det();
        if det == 0.0 || !det.is_finite() {
            return None;
        }
        Some(self.inverse_with_det(det))
    }

    pub(crate) fn inverse_with_det(&self, det: f64) -> Self {
        let a = &self.a;
        let mut inv = Self::zeros(self.dim);
        let r = 1.0 / det;
        match self.dim {
            2 => {
                inv.a[0][0] = a[1][1] * r;
                inv.a[0][1] = -a[0][1] * r;
                inv.a[1][0] = -a[1][0] * r;
                inv.a[1][1] = a[0][0] * r;
            }
            _ => {
                inv.a[0][0] = (a[1][1] * a[2][2] - a[1][2] * a[2][1]) * r;
                inv.a[0][1] = (a[0][2] * a[2][1] - a[0][1] * a[2][2]) * r;
                inv.a[0][2] = (a[0][1] * a[1][2] - a[0][2] * a[1][1]) * r;
                inv.a[1][0] = (a[1][2] * a[2][0] - a[1][0] * a[2][2]) * r;
                inv.a[1][1] = (a[0][0] * a[2][2] - a[0][2] * a[2][0]) * r;
                inv.a[1][2] = (a[0][2] * a[1][0] - a[0][0] * a[1][2]) * r;
                inv.a[2][0] = (a[1][0] * a[2][1] - a[1][1] * a[2][0]) * r;
                inv.a[2][1] = (a[0][1] * a[2][0] - a[0][0] * a[2][1]) * r;
                inv.a[2][2] = (a[0][0] * a[1][1] - a[0][1] * a[1][0]) * r;
            }
        }
        inv
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim).map(|i| self.a[i][i]).sum()
    }

    pub fn scaled(&self, s: f64) -> Self {
        let mut m = *self;
        for row in m.a.iter_mut() {
            for v in row.iter_mut() {
                *v *= s;
            }
        }
        m
    }

    pub fn mul_vec(&self, v: &Vector) -> Vector {
        let mut out = ZERO;
        for i in 0..self.dim {
            out[i] = (0..self.dim).map(|j| self.a[i][j] * v[j]).sum();
        }
        out
    }

    /// `vᵀ A`, returned as a vector.
    pub fn vec_mul(&self, v: &Vector) -> Vector {
        let mut out = ZERO;
        for j in 0..self.dim {
            out[j] = (0..self.dim).map(|i| v[i] * self.a[i][j]).sum();
        }
        out
    }

    /// `vᵀ A v`
    pub fn quad_form(&self, v: &Vector) -> f64 {
        dot(v, &self.mul_vec(v))
    }

    /// `tr(A B)` without forming the product.
    pub fn trace_of_product(&self, b: &Mat) -> f64 {
        let mut s = 0.0;
        for i in 0..self.dim {
            for k in 0..self.dim {
                s += self.a[i][k] * b.a[k][i];
            }
        }
        s
    }

    pub fn frobenius(&self) -> f64 {
        self.a.iter().flatten().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.a.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    pub fn symmetric_part(&self) -> Self {
        (*self + self.transpose()).scaled(0.5)
    }

    pub fn asymmetry(&self) -> f64 {
        (*self - self.transpose()).frobenius()
    }

    pub fn is_finite(&self) -> bool {
        self.a.iter().flatten().all(|v| v.is_finite())
    }

    /// Eigen-decomposition of the symmetric part. Eigenvalues are returned in
    /// ascending order; column `i` of the returned matrix is the eigenvector of
    /// eigenvalue `i`.
    pub fn sym_eigen(&self) -> ([f64; 3], Mat) {
        let s = self.symmetric_part();
        let mut pairs: Vec<(f64, Vector)> = match self.dim {
            2 => {
                let m = Matrix2::new(s.a[0][0], s.a[0][1], s.a[1][0], s.a[1][1]);
                let e = m.symmetric_eigen();
                (0..2)
                    .map(|i| {
                        let c = e.eigenvectors.column(i);
                        (e.eigenvalues[i], [c[0], c[1], 0.0])
                    })
                    .collect()
            }
            _ => {
                let m = Matrix3::new(
                    s.a[0][0], s.a[0][1], s.a[0][2], s.a[1][0], s.a[1][1], s.a[1][2], s.a[2][0],
                    s.a[2][1], s.a[2][2],
                );
                let e = m.symmetric_eigen();
                (0..3)
                    .map(|i| {
                        let c = e.eigenvectors.column(i);
                        (e.eigenvalues[i], [c[0], c[1], c[2]])
                    })
                    .collect()
            }
        };
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut vals = [0.0; 3];
        let mut cols = [ZERO; 3];
        for (i, (v, c)) in pairs.into_iter().enumerate() {
            vals[i] = v;
            cols[i] = c;
        }
        (vals, Mat::from_cols(self.dim, &cols))
    }

    /// `Q diag(vals) Qᵀ`
    pub fn from_eigen(vals: &[f64; 3], vecs: &Mat) -> Self {
        let d = vecs.dim;
        let mut m = Self::zeros(d);
        for i in 0..d {
            for j in 0..d {
                m.a[i][j] = (0..d).map(|k| vecs.a[i][k] * vals[k] * vecs.a[j][k]).sum();
            }
        }
        m
    }

    /// Extreme eigenvalues `(min, max)` of the symmetric part.
    pub fn eigen_bounds(&self) -> (f64, f64) {
        let (vals, _) = self.sym_eigen();
        (vals[0], vals[self.dim - 1])
    }

    /// Spectral norm; for symmetric positive semidefinite input this is the
    /// largest eigenvalue.
    pub fn spectral_norm(&self) -> f64 {
        let ata = self.transpose() * *self;
        ata.eigen_bounds().1.max(0.0).sqrt()
    }
}

impl Index<(usize, usize)> for Mat {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.a[i][j]
    }
}

impl IndexMut<(usize, usize)> for Mat {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.a[i][j]
    }
}

impl Add for Mat {
    type Output = Mat;
    fn add(mut self, rhs: Mat) -> Mat {
        self += rhs;
        self
    }
}

impl AddAssign for Mat {
    fn add_assign(&mut self, rhs: Mat) {
        for i in 0..3 {
            for j in 0..3 {
                self.a[i][j] += rhs.a[i][j];
            }
        }
    }
}

impl Sub for Mat {
    type Output = Mat;
    fn sub(mut self, rhs: Mat) -> Mat {
        for i in 0..3 {
            for j in 0..3 {
                self.a[i][j] -= rhs.a[i][j];
            }
        }
        self
    }
}

impl Neg for Mat {
    type Output = Mat;
    fn neg(self) -> Mat {
        self.scaled(-1.0)
    }
}

impl Mul for Mat {
    type Output = Mat;
    fn mul(self, rhs: Mat) -> Mat {
        let d = self.dim;
        let mut m = Mat::zeros(d);
        for i in 0..d {
            for k in 0..d {
                let aik = self.a[i][k];
                for j in 0..d {
                    m.a[i][j] += aik * rhs.a[k][j];
                }
            }
        }
        m
    }
}

impl Mul<f64> for Mat {
    type Output = Mat;
    fn mul(self, s: f64) -> Mat {
        self.scaled(s)
    }
}

pub fn factorial(d: usize) -> f64 {
    (1..=d).map(|k| k as f64).product()
}
