use serde::Serialize;

use super::AnalyticsError;
use crate::linalg::{symmetric_eigen, Matrix};
use crate::scalar::{dot, norm2, Scalar};

/// Principal axes of a point cloud.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(bound(serialize = ""))]
pub struct PcaBasis<S: Scalar> {
    #[serde(serialize_with = "crate::trace::wire::scalar_vec::serialize")]
    pub mean: Vec<S>,
    /// Unit vectors, descending variance. Each has its largest-magnitude
    /// entry positive.
    pub components: Vec<Vec<S>>,
    #[serde(serialize_with = "crate::trace::wire::scalar_vec::serialize")]
    pub variances: Vec<S>,
    /// Numerical rank of the centered cloud.
    pub rank: usize,
    /// True when fewer than the requested number of directions carry
    /// variance; the surplus components span the null space and report
    /// zero variance.
    pub rank_deficient: bool,
}

impl<S: Scalar> PcaBasis<S> {
    /// Coordinates of `x` in the component basis.
    pub fn project(&self, x: &[S]) -> Vec<S> {
        let centered: Vec<S> = x.iter().zip(&self.mean).map(|(&a, &m)| a - m).collect();
        self.components.iter().map(|c| dot(c, &centered)).collect()
    }
}

fn fix_sign<S: Scalar>(v: &mut [S]) {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > v[best].abs() {
            best = i;
        }
    }
    if v[best] < S::zero() {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

fn orthonormal_against<S: Scalar>(mut v: Vec<S>, basis: &[Vec<S>]) -> Option<Vec<S>> {
    for _ in 0..2 {
        for b in basis {
            let c = dot(&v, b);
            v.iter_mut().zip(b).for_each(|(x, &bj)| *x = *x - c * bj);
        }
    }
    let n = norm2(&v);
    if n > S::lit(0.5) {
        Some(v.into_iter().map(|x| x / n).collect())
    } else {
        None
    }
}

/// Top-`k` principal components of `points`, using the sample covariance.
///
/// Clouds with fewer points than dimensions are decomposed through their
/// Gram matrix instead, which is much smaller.
pub fn pca_basis<S: Scalar>(points: &[Vec<S>], k: usize) -> Result<PcaBasis<S>, AnalyticsError> {
    let m = points.len();
    if m < 2 {
        return Err(AnalyticsError::InvalidArgument("PCA needs at least two points".into()));
    }
    let n = points[0].len();
    if points.iter().any(|p| p.len() != n) {
        return Err(AnalyticsError::InvalidArgument("PCA points differ in dimension".into()));
    }
    if k == 0 || k > n {
        return Err(AnalyticsError::InvalidArgument(format!("cannot take {k} components in dimension {n}")));
    }
    let scale = S::from_usize(m - 1).unwrap();
    let mut mean = vec![S::zero(); n];
    for p in points {
        mean.iter_mut().zip(p).for_each(|(a, &x)| *a = *a + x);
    }
    let inv_m = S::one() / S::from_usize(m).unwrap();
    mean.iter_mut().for_each(|a| *a = *a * inv_m);
    let centered: Vec<Vec<S>> = points
        .iter()
        .map(|p| p.iter().zip(&mean).map(|(&x, &a)| x - a).collect())
        .collect();
    if centered.iter().all(|c| c.iter().all(|x| x.is_zero())) {
        return Err(AnalyticsError::InvalidArgument("PCA needs at least two distinct points".into()));
    }

    let (values, mut vectors) = if n <= m {
        let mut cov = Matrix::zeros(n);
        for c in &centered {
            cov.add_outer(S::one() / scale, c);
        }
        let eig = symmetric_eigen(&cov);
        (eig.values, eig.vectors)
    } else {
        let mut gram = Matrix::zeros(m);
        for i in 0..m {
            for j in 0..=i {
                let v = dot(&centered[i], &centered[j]) / scale;
                gram[(i, j)] = v;
                gram[(j, i)] = v;
            }
        }
        let eig = symmetric_eigen(&gram);
        // Map each Gram eigenvector back to data space: X^T w / |X^T w|.
        let vectors = eig
            .vectors
            .iter()
            .map(|w| {
                let mut v = vec![S::zero(); n];
                for (c, &wi) in centered.iter().zip(w) {
                    v.iter_mut().zip(c).for_each(|(a, &x)| *a = *a + wi * x);
                }
                v
            })
            .collect();
        (eig.values, vectors)
    };

    let top = values.first().copied().unwrap_or_else(S::zero).max(S::zero());
    let tol = top * S::epsilon() * S::from_usize(n.max(m) * 10).unwrap();
    let rank = values.iter().filter(|&&v| v > tol).count();

    let mut components: Vec<Vec<S>> = Vec::with_capacity(k);
    let mut variances = Vec::with_capacity(k);
    for i in 0..rank.min(k) {
        let v = std::mem::take(&mut vectors[i]);
        let unit = orthonormal_against(
            {
                let nv = norm2(&v);
                v.into_iter().map(|x| x / nv).collect()
            },
            &components,
        )
        .expect("eigenvectors with nonzero variance are independent");
        components.push(unit);
        variances.push(values[i]);
    }
    // Complete with null-space directions: remaining covariance
    // eigenvectors when available, then coordinate axes.
    let mut candidates = vectors.into_iter().skip(rank.min(k)).filter(|v| !v.is_empty());
    let mut axis = 0;
    while components.len() < k {
        let next = match candidates.next() {
            Some(v) if n <= m => orthonormal_against(v, &components),
            _ => {
                let mut e = vec![S::zero(); n];
                e[axis] = S::one();
                axis += 1;
                orthonormal_against(e, &components)
            }
        };
        if let Some(v) = next {
            components.push(v);
            variances.push(S::zero());
        }
    }
    components.iter_mut().for_each(|c| fix_sign(c));
    Ok(PcaBasis {
        mean,
        components,
        variances,
        rank,
        rank_deficient: rank < k,
    })
}
