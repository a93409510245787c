//! Small dense linear algebra over [`Scalar`]: symmetric matrices, Cholesky
//! solves for the Newton step and a cyclic Jacobi eigensolver for PCA.

use crate::scalar::Scalar;

/// Dense row-major square matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix<S> {
    n: usize,
    data: Vec<S>,
}

impl<S: Scalar> Matrix<S> {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![S::zero(); n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m[(i, i)] = S::one();
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn fill_zero(&mut self) {
        self.data.iter_mut().for_each(|v| *v = S::zero());
    }

    /// `self += w * a a^T`
    pub fn add_outer(&mut self, w: S, a: &[S]) {
        debug_assert_eq!(a.len(), self.n);
        for (i, &ai) in a.iter().enumerate() {
            if ai == S::zero() {
                continue;
            }
            let wi = w * ai;
            let row = &mut self.data[i * self.n..(i + 1) * self.n];
            for (r, &aj) in row.iter_mut().zip(a) {
                *r = *r + wi * aj;
            }
        }
    }

    pub fn add_diagonal(&mut self, v: S) {
        for i in 0..self.n {
            self[(i, i)] = self[(i, i)] + v;
        }
    }

    pub fn mul_vec(&self, x: &[S]) -> Vec<S> {
        (0..self.n)
            .map(|i| crate::scalar::dot(&self.data[i * self.n..(i + 1) * self.n], x))
            .collect()
    }

    pub fn as_slice(&self) -> &[S] {
        &self.data
    }

    /// Cholesky factor `L` with `A = L L^T`, or `None` if `A` is not
    /// numerically positive definite.
    pub fn cholesky(&self) -> Option<Cholesky<S>> {
        let n = self.n;
        let mut l = vec![S::zero(); n * n];
        for j in 0..n {
            let mut d = self[(j, j)];
            for k in 0..j {
                d = d - l[j * n + k] * l[j * n + k];
            }
            if !(d > S::zero()) || !d.is_finite() {
                return None;
            }
            let djj = d.sqrt();
            l[j * n + j] = djj;
            for i in (j + 1)..n {
                let mut s = self[(i, j)];
                for k in 0..j {
                    s = s - l[i * n + k] * l[j * n + k];
                }
                l[i * n + j] = s / djj;
            }
        }
        Some(Cholesky { n, l })
    }
}

impl<S> std::ops::Index<(usize, usize)> for Matrix<S> {
    type Output = S;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &S {
        &self.data[i * self.n + j]
    }
}

impl<S> std::ops::IndexMut<(usize, usize)> for Matrix<S> {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut S {
        &mut self.data[i * self.n + j]
    }
}

pub struct Cholesky<S> {
    n: usize,
    l: Vec<S>,
}

impl<S: Scalar> Cholesky<S> {
    #[allow(clippy::needless_range_loop)]
    pub fn solve(&self, b: &[S]) -> Vec<S> {
        let n = self.n;
        let mut y = b.to_vec();
        for i in 0..n {
            let mut s = y[i];
            for k in 0..i {
                s = s - self.l[i * n + k] * y[k];
            }
            y[i] = s / self.l[i * n + i];
        }
        for i in (0..n).rev() {
            let mut s = y[i];
            for k in (i + 1)..n {
                s = s - self.l[k * n + i] * y[k];
            }
            y[i] = s / self.l[i * n + i];
        }
        y
    }
}

/// Eigen decomposition of a symmetric matrix, eigenvalues sorted descending.
#[derive(Debug, Clone)]
pub struct SymmetricEigen<S> {
    pub values: Vec<S>,
    /// `vectors[k]` is the unit eigenvector for `values[k]`.
    pub vectors: Vec<Vec<S>>,
}

/// Cyclic Jacobi rotations. Converges quadratically; adequate for the few
/// hundred dimensions a PCA over configurations or trajectory points needs.
pub fn symmetric_eigen<S: Scalar>(a: &Matrix<S>) -> SymmetricEigen<S> {
    let n = a.dim();
    let mut m = a.clone();
    let mut v = Matrix::<S>::identity(n);
    let eps = S::epsilon();

    for _sweep in 0..100 {
        let mut off = S::zero();
        let mut diag = S::zero();
        for i in 0..n {
            diag = diag + m[(i, i)] * m[(i, i)];
            for j in (i + 1)..n {
                off = off + m[(i, j)] * m[(i, j)];
            }
        }
        if off <= eps * eps * diag || off == S::zero() {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[(p, q)];
                if apq == S::zero() {
                    continue;
                }
                let app = m[(p, p)];
                let aqq = m[(q, q)];
                let theta = (aqq - app) / (S::lit(2.0) * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + S::one()).sqrt());
                let c = S::one() / (t * t + S::one()).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m[(k, p)];
                    let mkq = m[(k, q)];
                    m[(k, p)] = c * mkp - s * mkq;
                    m[(k, q)] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[(p, k)];
                    let mqk = m[(q, k)];
                    m[(p, k)] = c * mpk - s * mqk;
                    m[(q, k)] = s * mpk + c * mqk;
                }
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        m[(j, j)]
            .partial_cmp(&m[(i, i)])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(i.cmp(&j))
    });
    let values = order.iter().map(|&k| m[(k, k)]).collect();
    let vectors = order
        .iter()
        .map(|&k| (0..n).map(|i| v[(i, k)]).collect())
        .collect();
    SymmetricEigen { values, vectors }
}
