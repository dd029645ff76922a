//! Small fixed-size tensor helpers for 3d Riemannian data.
//!
//! Everything here is plain `f64` arrays; the closures-plus-`from_fn` style
//! keeps index gymnastics readable in the curvature formulas.

use std::array::from_fn;

/// A point or vector in asymptotic Cartesian coordinates (units G = c = 1).
pub type Vec3 = [f64; 3];
/// Alias used where a value is a point rather than a displacement.
pub type Point3 = Vec3;
/// A 3x3 matrix of components.
pub type Mat3 = [[f64; 3]; 3];
/// Rank-3 array, e.g. `d g[k][i][j]` = partial_k g_ij.
pub type Ten3 = [[[f64; 3]; 3]; 3];
/// Rank-4 array, e.g. `dd g[k][l][i][j]` = partial_k partial_l g_ij.
pub type Ten4 = [[[[f64; 3]; 3]; 3]; 3];

/// Symmetric 3x3 tensor; symmetry holds exactly by construction.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SymMat3(Mat3);

impl SymMat3 {
    pub const ZERO: SymMat3 = SymMat3([[0.0; 3]; 3]);

    /// Builds from a component function evaluated only for i <= j.
    pub fn from_fn(mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in i..3 {
                let v = f(i, j);
                m[i][j] = v;
                m[j][i] = v;
            }
        }
        SymMat3(m)
    }

    /// Symmetrizes an arbitrary matrix.
    pub fn symmetrize(m: Mat3) -> Self {
        SymMat3::from_fn(|i, j| 0.5 * (m[i][j] + m[j][i]))
    }

    pub fn identity() -> Self {
        SymMat3::from_fn(|i, j| if i == j { 1.0 } else { 0.0 })
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0[i][j]
    }

    pub fn as_mat(&self) -> &Mat3 {
        &self.0
    }

    pub fn add(&self, other: &SymMat3) -> SymMat3 {
        SymMat3::from_fn(|i, j| self.get(i, j) + other.get(i, j))
    }

    pub fn sub(&self, other: &SymMat3) -> SymMat3 {
        SymMat3::from_fn(|i, j| self.get(i, j) - other.get(i, j))
    }

    pub fn scale(&self, s: f64) -> SymMat3 {
        SymMat3::from_fn(|i, j| s * self.get(i, j))
    }

    /// Plain trace (delta-trace).
    pub fn trace(&self) -> f64 {
        self.0[0][0] + self.0[1][1] + self.0[2][2]
    }

    pub fn det(&self) -> f64 {
        det3(&self.0)
    }

    /// Inverse, or `None` when the determinant vanishes.
    pub fn inverse(&self) -> Option<SymMat3> {
        inv3(&self.0).map(SymMat3::symmetrize)
    }

    /// Positive definiteness via leading principal minors.
    pub fn is_positive_definite(&self) -> bool {
        let m = &self.0;
        let m1 = m[0][0];
        let m2 = m[0][0] * m[1][1] - m[0][1] * m[1][0];
        m1 > 0.0 && m2 > 0.0 && det3(m) > 0.0
    }

    /// Bilinear form `T(u, v)` with plain index contraction.
    pub fn bilinear(&self, u: &Vec3, v: &Vec3) -> f64 {
        sum2(|i, j| self.get(i, j) * u[i] * v[j])
    }

    pub fn max_abs(&self) -> f64 {
        let mut m = 0.0f64;
        for i in 0..3 {
            for j in 0..3 {
                m = m.max(self.get(i, j).abs());
            }
        }
        m
    }
}

pub fn vec3(f: impl FnMut(usize) -> f64) -> Vec3 {
    from_fn(f)
}

pub fn mat3(mut f: impl FnMut(usize, usize) -> f64) -> Mat3 {
    from_fn(|i| from_fn(|j| f(i, j)))
}

pub fn ten3(mut f: impl FnMut(usize, usize, usize) -> f64) -> Ten3 {
    from_fn(|i| from_fn(|j| from_fn(|k| f(i, j, k))))
}

pub fn ten4(mut f: impl FnMut(usize, usize, usize, usize) -> f64) -> Ten4 {
    from_fn(|i| from_fn(|j| from_fn(|k| from_fn(|l| f(i, j, k, l)))))
}

#[inline]
pub fn sum1(mut f: impl FnMut(usize) -> f64) -> f64 {
    f(0) + f(1) + f(2)
}

#[inline]
pub fn sum2(mut f: impl FnMut(usize, usize) -> f64) -> f64 {
    sum1(|i| sum1(|j| f(i, j)))
}

#[inline]
pub fn sum3(mut f: impl FnMut(usize, usize, usize) -> f64) -> f64 {
    sum1(|i| sum1(|j| sum1(|k| f(i, j, k))))
}

#[inline]
pub fn dot(a: &Vec3, b: &Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[inline]
pub fn norm(a: &Vec3) -> f64 {
    dot(a, a).sqrt()
}

#[inline]
pub fn add3(a: &Vec3, b: &Vec3) -> Vec3 {
    vec3(|i| a[i] + b[i])
}

#[inline]
pub fn sub3(a: &Vec3, b: &Vec3) -> Vec3 {
    vec3(|i| a[i] - b[i])
}

#[inline]
pub fn scale3(a: &Vec3, s: f64) -> Vec3 {
    vec3(|i| s * a[i])
}

#[inline]
pub fn cross(a: &Vec3, b: &Vec3) -> Vec3 {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

pub fn det3(m: &Mat3) -> f64 {
    m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
        - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
}

pub fn inv3(m: &Mat3) -> Option<Mat3> {
    let d = det3(m);
    if d == 0.0 || !d.is_finite() {
        return None;
    }
    let c = mat3(|i, j| {
        // cofactor expansion, transposed
        let (a, b) = ((j + 1) % 3, (j + 2) % 3);
        let (p, q) = ((i + 1) % 3, (i + 2) % 3);
        m[a][p] * m[b][q] - m[a][q] * m[b][p]
    });
    Some(mat3(|i, j| c[i][j] / d))
}

/// Matrix-vector product.
pub fn matvec(m: &Mat3, v: &Vec3) -> Vec3 {
    vec3(|i| sum1(|j| m[i][j] * v[j]))
}

/// Product of two 3x3 matrices.
pub fn matmul(a: &Mat3, b: &Mat3) -> Mat3 {
    mat3(|i, j| sum1(|k| a[i][k] * b[k][j]))
}

pub fn transpose(m: &Mat3) -> Mat3 {
    mat3(|i, j| m[j][i])
}

/// Checks `Q^T Q = I` to the given tolerance.
pub fn orthogonality_defect(q: &Mat3) -> f64 {
    let qtq = matmul(&transpose(q), q);
    let mut worst = 0.0f64;
    for i in 0..3 {
        for j in 0..3 {
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((qtq[i][j] - target).abs());
        }
    }
    worst
}

/// Rotation matrix about `axis` by `angle` (Rodrigues formula).
pub fn rotation(axis: &Vec3, angle: f64) -> Mat3 {
    let n = norm(axis);
    assert!(n > 0.0, "rotation axis must be nonzero");
    let u = scale3(axis, 1.0 / n);
    let (s, c) = angle.sin_cos();
    mat3(|i, j| {
        let id = if i == j { 1.0 } else { 0.0 };
        let eps = levi_civita(i, j);
        c * id + (1.0 - c) * u[i] * u[j] - s * sum1(|k| eps[k] * u[k])
    })
}

fn levi_civita(i: usize, j: usize) -> Vec3 {
    vec3(|k| {
        let idx = [i, j, k];
        if idx[0] == idx[1] || idx[1] == idx[2] || idx[0] == idx[2] {
            0.0
        } else {
            let mut sign = 1.0;
            for p in 0..3 {
                for q in (p + 1)..3 {
                    if idx[p] > idx[q] {
                        sign = -sign;
                    }
                }
            }
            sign
        }
    })
}
