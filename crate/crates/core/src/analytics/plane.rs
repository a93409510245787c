use serde::Serialize;

use super::pca::pca_basis;
use super::AnalyticsError;
use crate::scalar::{dot, norm2, sub, Scalar};
use crate::trace::Trajectory;

/// Fraction of the covered extent added on every side of a window.
pub const WINDOW_MARGIN: f64 = 0.2;

/// Rectangle in plane coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(bound(serialize = ""))]
pub struct Window<S: Scalar> {
    #[serde(serialize_with = "crate::trace::wire::scalar::serialize")]
    pub s_min: S,
    #[serde(serialize_with = "crate::trace::wire::scalar::serialize")]
    pub s_max: S,
    #[serde(serialize_with = "crate::trace::wire::scalar::serialize")]
    pub t_min: S,
    #[serde(serialize_with = "crate::trace::wire::scalar::serialize")]
    pub t_max: S,
}

impl<S: Scalar> Window<S> {
    /// Bounding box of `coords` grown by `margin` of its extent per side.
    /// A flat direction borrows the other direction's extent, or 1 when
    /// every point coincides.
    pub fn covering(coords: impl IntoIterator<Item = (S, S)>, margin: S) -> Self {
        let (mut s0, mut s1, mut t0, mut t1) = (S::infinity(), S::neg_infinity(), S::infinity(), S::neg_infinity());
        for (s, t) in coords {
            if s.is_finite() && t.is_finite() {
                s0 = s0.min(s);
                s1 = s1.max(s);
                t0 = t0.min(t);
                t1 = t1.max(t);
            }
        }
        if s0 > s1 {
            (s0, s1, t0, t1) = (S::zero(), S::zero(), S::zero(), S::zero());
        }
        let mut es = s1 - s0;
        let mut et = t1 - t0;
        let wide = es.max(et);
        let fallback = if wide > S::zero() { wide } else { S::one() };
        if es <= S::zero() {
            es = fallback;
        }
        if et <= S::zero() {
            et = fallback;
        }
        let half = S::lit(0.5);
        let (cs, ct) = ((s0 + s1) * half, (t0 + t1) * half);
        let (hs, ht) = (es * (half + margin), et * (half + margin));
        Window {
            s_min: cs - hs,
            s_max: cs + hs,
            t_min: ct - ht,
            t_max: ct + ht,
        }
    }

    pub fn area(&self) -> S {
        (self.s_max - self.s_min) * (self.t_max - self.t_min)
    }

    pub fn is_valid(&self) -> bool {
        self.s_min < self.s_max && self.t_min < self.t_max && self.area().is_finite()
    }
}

/// 2D affine slice through the decision space.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(bound(serialize = ""))]
pub struct PlaneSpec<S: Scalar> {
    #[serde(serialize_with = "crate::trace::wire::scalar_vec::serialize")]
    pub origin: Vec<S>,
    #[serde(serialize_with = "crate::trace::wire::scalar_vec::serialize")]
    pub u: Vec<S>,
    #[serde(serialize_with = "crate::trace::wire::scalar_vec::serialize")]
    pub v: Vec<S>,
    pub window: Window<S>,
}

impl<S: Scalar> PlaneSpec<S> {
    pub fn dim(&self) -> usize {
        self.origin.len()
    }

    /// `origin + s·u + t·v`.
    pub fn point_at(&self, s: S, t: S) -> Vec<S> {
        self.origin
            .iter()
            .zip(self.u.iter().zip(&self.v))
            .map(|(&o, (&a, &b))| o + s * a + t * b)
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(bound(serialize = ""))]
pub struct PlaneCoords<S: Scalar> {
    #[serde(serialize_with = "crate::trace::wire::scalar::serialize")]
    pub s: S,
    #[serde(serialize_with = "crate::trace::wire::scalar::serialize")]
    pub t: S,
    #[serde(serialize_with = "crate::trace::wire::scalar::serialize")]
    pub dist: S,
}

pub fn project_to_plane<S: Scalar>(plane: &PlaneSpec<S>, x: &[S]) -> PlaneCoords<S> {
    let r = sub(x, &plane.origin);
    let s = dot(&r, &plane.u);
    let t = dot(&r, &plane.v);
    let residual: Vec<S> = r
        .iter()
        .zip(plane.u.iter().zip(&plane.v))
        .map(|(&ri, (&a, &b))| ri - s * a - t * b)
        .collect();
    PlaneCoords {
        s,
        t,
        dist: norm2(&residual),
    }
}

fn unit<S: Scalar>(v: Vec<S>) -> Vec<S> {
    let n = norm2(&v);
    v.into_iter().map(|x| x / n).collect()
}

/// Component of `w` orthogonal to the unit vector `u`, two passes of
/// Gram-Schmidt so the result is orthogonal to working precision.
fn reject<S: Scalar>(mut w: Vec<S>, u: &[S]) -> Vec<S> {
    for _ in 0..2 {
        let c = dot(&w, u);
        w.iter_mut().zip(u).for_each(|(x, &a)| *x = *x - c * a);
    }
    w
}

fn margin<S: Scalar>() -> S {
    S::lit(WINDOW_MARGIN)
}

/// Plane through the final point `x*` containing the selected step, with
/// the second direction taken from the trajectory's first principal
/// vector (second when the first is parallel to the selection).
pub fn default_plane<S: Scalar>(trajectory: &Trajectory<S>, selected_step: usize) -> Result<PlaneSpec<S>, AnalyticsError> {
    let last = trajectory.len() - 1;
    let x_sel = trajectory.point(selected_step)?;
    if selected_step == last {
        return Err(AnalyticsError::DegeneratePlane("selected step is the final step".into()));
    }
    let x_star = trajectory.last();
    let d = sub(x_sel, x_star);
    if norm2(&d) <= S::zero() {
        return Err(AnalyticsError::DegeneratePlane("selected point coincides with the final point".into()));
    }
    if x_star.len() < 2 {
        return Err(AnalyticsError::DegeneratePlane("a plane needs at least two dimensions".into()));
    }
    let u = unit(d);
    let pca = pca_basis(&trajectory.points, 2)?;
    let tol = S::lit(1e-9);
    let mut v = reject(pca.components[0].clone(), &u);
    if norm2(&v) < tol {
        v = reject(pca.components[1].clone(), &u);
        if norm2(&v) < tol {
            return Err(AnalyticsError::DegeneratePlane("no principal direction is orthogonal to the selection".into()));
        }
    }
    let mut plane = PlaneSpec {
        origin: x_star.to_vec(),
        u,
        v: unit(v),
        window: Window::covering([], S::zero()),
    };
    plane.window = Window::covering(
        trajectory.points.iter().map(|x| {
            let c = project_to_plane(&plane, x);
            (c.s, c.t)
        }),
        margin(),
    );
    Ok(plane)
}

/// Plane through three points, with `xc` as origin and `xa - xc` as the
/// first axis. The window covers the three points.
pub fn three_point_plane<S: Scalar>(xa: &[S], xb: &[S], xc: &[S]) -> Result<PlaneSpec<S>, AnalyticsError> {
    if xa.len() != xc.len() || xb.len() != xc.len() {
        return Err(AnalyticsError::InvalidArgument("plane points differ in dimension".into()));
    }
    let a = sub(xa, xc);
    let b = sub(xb, xc);
    let scale = norm2(&a).max(norm2(&b)).max(norm2(&sub(xa, xb)));
    let tol = S::epsilon().sqrt() * scale;
    let na = norm2(&a);
    if !(scale > S::zero()) || na <= tol {
        return Err(AnalyticsError::DegeneratePlane("coincident points".into()));
    }
    let u = unit(a);
    let w = reject(b, &u);
    if norm2(&w) <= tol {
        return Err(AnalyticsError::DegeneratePlane("collinear points".into()));
    }
    let mut plane = PlaneSpec {
        origin: xc.to_vec(),
        u,
        v: unit(w),
        window: Window::covering([], S::zero()),
    };
    plane.window = Window::covering(
        [xa, xb, xc].into_iter().map(|x| {
            let c = project_to_plane(&plane, x);
            (c.s, c.t)
        }),
        margin(),
    );
    Ok(plane)
}

/// Line widths used to encode plane distance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(bound(serialize = ""))]
pub struct ThicknessRange<S: Scalar> {
    #[serde(serialize_with = "crate::trace::wire::scalar::serialize")]
    pub w_min: S,
    #[serde(serialize_with = "crate::trace::wire::scalar::serialize")]
    pub w_max: S,
}

impl<S: Scalar> Default for ThicknessRange<S> {
    fn default() -> Self {
        Self {
            w_min: S::lit(0.5),
            w_max: S::lit(4.0),
        }
    }
}

/// `w_min + (w_max - w_min)·exp(-dist/sigma)`.
pub fn thickness<S: Scalar>(dist: S, sigma: S, range: ThicknessRange<S>) -> S {
    range.w_min + (range.w_max - range.w_min) * (-dist / sigma).exp()
}

/// Median of the nonzero finite distances, or 1 when there are none.
pub fn median_sigma<S: Scalar>(dists: &[S]) -> S {
    let mut d: Vec<S> = dists.iter().copied().filter(|x| x.is_finite() && *x > S::zero()).collect();
    if d.is_empty() {
        return S::one();
    }
    d.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    let m = d.len();
    if m % 2 == 1 {
        d[m / 2]
    } else {
        (d[m / 2 - 1] + d[m / 2]) * S::lit(0.5)
    }
}

/// One trajectory point drawn into a landscape.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(bound(serialize = ""))]
pub struct ProjectedStep<S: Scalar> {
    pub step: usize,
    #[serde(flatten)]
    pub coords: PlaneCoords<S>,
    #[serde(serialize_with = "crate::trace::wire::scalar::serialize")]
    pub width: S,
}

/// Projects every trajectory point onto `plane`, with line widths from the
/// median nonzero distance.
pub fn project_trajectory<S: Scalar>(plane: &PlaneSpec<S>, trajectory: &Trajectory<S>) -> (Vec<ProjectedStep<S>>, S) {
    let coords: Vec<PlaneCoords<S>> = trajectory.points.iter().map(|x| project_to_plane(plane, x)).collect();
    let dists: Vec<S> = coords.iter().map(|c| c.dist).collect();
    let sigma = median_sigma(&dists);
    let range = ThicknessRange::default();
    let steps = coords
        .into_iter()
        .enumerate()
        .map(|(step, coords)| ProjectedStep {
            step,
            coords,
            width: thickness(coords.dist, sigma, range),
        })
        .collect();
    (steps, sigma)
}
