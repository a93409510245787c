use serde::Serialize;

use super::grid::{GridField, GridLayout};
use super::AnalyticsError;
use crate::model::ConstraintKind;
use crate::scalar::Scalar;

/// Closed ring of plane coordinates `[s, t]`, counter-clockwise, without
/// repeating the first vertex.
pub type Polygon<S> = Vec<[S; 2]>;

/// Number of levels used when the caller does not choose them.
pub const DEFAULT_LEVEL_COUNT: usize = 9;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Band<S: Scalar> {
    #[serde(serialize_with = "crate::trace::wire::scalar::serialize")]
    pub lower: S,
    #[serde(serialize_with = "crate::trace::wire::scalar::serialize")]
    pub upper: S,
    pub polygons: Vec<Polygon<S>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Isobands<S: Scalar> {
    #[serde(serialize_with = "crate::trace::wire::scalar_vec::serialize")]
    pub levels: Vec<S>,
    pub bands: Vec<Band<S>>,
    /// Row-major indices (over the `(rows-1)·(cols-1)` cells) of cells with
    /// a non-finite corner. They belong to no band.
    pub excluded_cells: Vec<usize>,
}

/// Signed shoelace area, positive for counter-clockwise rings.
pub fn polygon_area<S: Scalar>(poly: &[[S; 2]]) -> S {
    let n = poly.len();
    let mut acc = S::zero();
    for i in 0..n {
        let [x0, y0] = poly[i];
        let [x1, y1] = poly[(i + 1) % n];
        acc = acc + x0 * y1 - x1 * y0;
    }
    acc * S::lit(0.5)
}

/// `count` evenly spaced quantiles of the finite values (linear
/// interpolation between order statistics), with duplicates removed. A
/// constant field yields `[c, c]`; a field with no finite value yields no
/// levels.
pub fn quantile_levels<S: Scalar>(values: &[S], count: usize) -> Vec<S> {
    let mut v: Vec<S> = values.iter().copied().filter(|x| x.is_finite()).collect();
    if v.is_empty() || count < 2 {
        return Vec::new();
    }
    v.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    let top = S::from_usize(v.len() - 1).unwrap();
    let mut levels: Vec<S> = Vec::with_capacity(count);
    for j in 0..count {
        let h = top * S::from_usize(j).unwrap() / S::from_usize(count - 1).unwrap();
        let lo = h.floor().to_usize().unwrap().min(v.len() - 1);
        let hi = (lo + 1).min(v.len() - 1);
        let q = if j + 1 == count { v[v.len() - 1] } else { v[lo] + (h - S::from_usize(lo).unwrap()) * (v[hi] - v[lo]) };
        if levels.last().is_none_or(|&l| q > l) {
            levels.push(q);
        }
    }
    if levels.len() == 1 {
        levels.push(levels[0]);
    }
    levels
}

type Vertex<S> = (S, S, S);

/// Sutherland-Hodgman against one value threshold. The crossing point is
/// interpolated linearly along each edge.
fn clip<S: Scalar>(poly: &[Vertex<S>], level: S, keep: impl Fn(S) -> bool) -> Vec<Vertex<S>> {
    let mut out = Vec::with_capacity(poly.len() + 2);
    for i in 0..poly.len() {
        let a = poly[i];
        let b = poly[(i + 1) % poly.len()];
        let (ka, kb) = (keep(a.2), keep(b.2));
        if ka {
            out.push(a);
        }
        if ka != kb {
            let w = (level - a.2) / (b.2 - a.2);
            out.push((a.0 + w * (b.0 - a.0), a.1 + w * (b.1 - a.1), level));
        }
    }
    out
}

struct Bands<'a, S> {
    levels: &'a [S],
}

impl<S: Scalar> Bands<'_, S> {
    fn count(&self) -> usize {
        self.levels.len() - 1
    }

    fn index_le(&self, v: S) -> usize {
        self.levels.partition_point(|&l| l <= v).saturating_sub(1).min(self.count() - 1)
    }

    fn of(&self, v: S) -> Option<usize> {
        let top = self.levels[self.count()];
        if v < self.levels[0] || v > top {
            return None;
        }
        Some(self.index_le(v))
    }

    fn upper_keep(&self, b: usize) -> impl Fn(S) -> bool {
        let hi = self.levels[b + 1];
        let last = b + 1 == self.count();
        move |v| if last { v <= hi } else { v < hi }
    }
}

/// Filled contour polygons of a sampled field, one polygon set per band
/// `[levels[b], levels[b+1])` (the last band includes its upper level).
///
/// Each cell is split into four triangles around its center, whose value
/// is the corner average; the field is linear on every triangle, so band
/// boundaries are exact for linear data and saddles are resolved by the
/// center. Cells lying entirely in one band are merged into horizontal
/// runs.
pub fn isobands<S: Scalar>(layout: &GridLayout<S>, values: &[S], levels: &[S]) -> Result<Isobands<S>, AnalyticsError> {
    let (rows, cols) = (layout.rows, layout.cols);
    if rows < 2 || cols < 2 {
        return Err(AnalyticsError::InvalidArgument("isobands need a grid of at least 2x2".into()));
    }
    if values.len() != rows * cols {
        return Err(AnalyticsError::InvalidArgument(format!(
            "{} values for a {rows}x{cols} grid",
            values.len()
        )));
    }
    if levels.len() < 2 || levels.iter().any(|l| l.is_nan()) || levels.windows(2).any(|w| w[0] > w[1]) {
        return Err(AnalyticsError::InvalidArgument("levels must be at least two ascending numbers".into()));
    }
    let bands = Bands { levels };
    let nb = bands.count();
    let mut polys: Vec<Vec<Polygon<S>>> = vec![Vec::new(); nb];
    let mut excluded = Vec::new();
    let quarter = S::lit(0.25);
    let half = S::lit(0.5);
    let s: Vec<S> = (0..cols).map(|c| layout.s_at(c)).collect();
    let t: Vec<S> = (0..rows).map(|r| layout.t_at(r)).collect();
    let cell_area = (s[1] - s[0]).abs() * (t[1] - t[0]).abs();
    let sliver = cell_area * S::epsilon() * S::lit(16.0);

    for r in 0..rows - 1 {
        let mut run: Option<(usize, usize)> = None;
        let flush = |run: &mut Option<(usize, usize)>, end: usize, polys: &mut Vec<Vec<Polygon<S>>>| {
            if let Some((b, start)) = run.take() {
                polys[b].push(vec![[s[start], t[r]], [s[end], t[r]], [s[end], t[r + 1]], [s[start], t[r + 1]]]);
            }
        };
        for c in 0..cols - 1 {
            let v00 = values[r * cols + c];
            let v01 = values[r * cols + c + 1];
            let v11 = values[(r + 1) * cols + c + 1];
            let v10 = values[(r + 1) * cols + c];
            if ![v00, v01, v11, v10].iter().all(|v| v.is_finite()) {
                excluded.push(r * (cols - 1) + c);
                flush(&mut run, c, &mut polys);
                continue;
            }
            let vc = (v00 + v01 + v11 + v10) * quarter;
            let b0 = bands.of(v00);
            let whole = b0.is_some() && [v01, v11, v10, vc].iter().all(|&v| bands.of(v) == b0);
            if let (true, Some(b)) = (whole, b0) {
                match run {
                    Some((rb, _)) if rb == b => {}
                    _ => {
                        flush(&mut run, c, &mut polys);
                        run = Some((b, c));
                    }
                }
                continue;
            }
            flush(&mut run, c, &mut polys);

            let p00 = (s[c], t[r], v00);
            let p01 = (s[c + 1], t[r], v01);
            let p11 = (s[c + 1], t[r + 1], v11);
            let p10 = (s[c], t[r + 1], v10);
            let pc = ((s[c] + s[c + 1]) * half, (t[r] + t[r + 1]) * half, vc);
            for tri in [[p00, p01, pc], [p01, p11, pc], [p11, p10, pc], [p10, p00, pc]] {
                let lo = tri.iter().map(|p| p.2).fold(S::infinity(), S::min);
                let hi = tri.iter().map(|p| p.2).fold(S::neg_infinity(), S::max);
                if hi < levels[0] || lo > levels[nb] {
                    continue;
                }
                for b in bands.index_le(lo)..=bands.index_le(hi) {
                    let low = levels[b];
                    let piece = clip(&tri, low, |v| v >= low);
                    if piece.len() < 3 {
                        continue;
                    }
                    let piece = clip(&piece, levels[b + 1], bands.upper_keep(b));
                    if piece.len() < 3 {
                        continue;
                    }
                    let ring: Polygon<S> = piece.into_iter().map(|(x, y, _)| [x, y]).collect();
                    if polygon_area(&ring) > sliver {
                        polys[b].push(ring);
                    }
                }
            }
        }
        flush(&mut run, cols - 1, &mut polys);
    }

    Ok(Isobands {
        levels: levels.to_vec(),
        bands: polys
            .into_iter()
            .enumerate()
            .map(|(b, polygons)| Band {
                lower: levels[b],
                upper: levels[b + 1],
                polygons,
            })
            .collect(),
        excluded_cells: excluded,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FeasibilityMask<S: Scalar> {
    #[serde(serialize_with = "crate::trace::wire::scalar::serialize")]
    pub tau: S,
    /// Per node: some selected `|h|` or `g` exceeds `tau`.
    pub infeasible: Vec<bool>,
    /// Per node: max over selected constraints of `|h|` and `g`.
    #[serde(serialize_with = "crate::trace::wire::scalar_vec::serialize")]
    pub violation: Vec<S>,
    /// Outline of `{violation ≥ tau}`.
    pub polygons: Vec<Polygon<S>>,
    pub excluded_cells: Vec<usize>,
}

/// Marks nodes where any constraint field in `field` is violated by more
/// than `tau`.
pub fn feasibility_mask<S: Scalar>(field: &GridField<S>, tau: S) -> Result<FeasibilityMask<S>, AnalyticsError> {
    if tau.is_nan() || tau < S::zero() {
        return Err(AnalyticsError::InvalidArgument("tau must be nonnegative".into()));
    }
    let constraints: Vec<_> = field
        .fields
        .iter()
        .filter_map(|f| f.function.constraint_kind().map(|k| (k, &f.values)))
        .collect();
    if constraints.is_empty() {
        return Err(AnalyticsError::InvalidArgument("no constraint fields were sampled".into()));
    }
    let n = field.rows * field.cols;
    let violation: Vec<S> = (0..n)
        .map(|i| {
            constraints.iter().fold(S::neg_infinity(), |acc, (kind, vals)| {
                let v = match kind {
                    ConstraintKind::Equality => vals[i].abs(),
                    ConstraintKind::Inequality => vals[i],
                };
                if acc.is_nan() || v.is_nan() {
                    S::nan()
                } else {
                    acc.max(v)
                }
            })
        })
        .collect();
    let infeasible = violation.iter().map(|&v| v > tau).collect();
    let layout = field.layout();
    let (polygons, excluded_cells) = if tau.is_finite() {
        let mut bands = isobands(&layout, &violation, &[tau, S::infinity()])?;
        (bands.bands.remove(0).polygons, bands.excluded_cells)
    } else {
        (Vec::new(), Vec::new())
    };
    Ok(FeasibilityMask {
        tau,
        infeasible,
        violation,
        polygons,
        excluded_cells,
    })
}
