//! Convex hulls of small point sets whose affine hull has dimension at most 3.
//!
//! Points may live in any ambient dimension. They are first expressed in an
//! orthonormal frame of their own affine hull, and the hull is computed
//! there. Facets are the plottable faces: an edge for a segment, one polygon
//! for a planar set, outward-oriented polygons for a solid.

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum HullError {
    #[error("no points")]
    Empty,
    #[error("affine dimension {0} is above 3")]
    DimensionTooHigh(usize),
}

/// Orthonormal frame of the affine hull of a point set.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineFrame {
    pub origin: Vec<f64>,
    pub axes: Vec<Vec<f64>>,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn cross(a: &[f64], b: &[f64]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

impl AffineFrame {
    /// Greedy Gram-Schmidt: repeatedly adds the direction with the largest
    /// residual until every residual is at most `tol`.
    pub fn fit(points: &[Vec<f64>], tol: f64) -> Result<Self, HullError> {
        let origin = points.first().ok_or(HullError::Empty)?.clone();
        let mut axes: Vec<Vec<f64>> = Vec::new();
        loop {
            let best = points
                .iter()
                .map(|p| residual(&sub(p, &origin), &axes))
                .map(|r| (norm(&r), r))
                .max_by(|a, b| a.0.total_cmp(&b.0));
            match best {
                Some((n, r)) if n > tol => axes.push(r.iter().map(|x| x / n).collect()),
                _ => break,
            }
        }
        // Full-dimensional frames keep the ambient orientation, so facet
        // winding carries over to the original coordinates.
        let det = match (origin.len(), axes.as_slice()) {
            (2, [a, b]) => a[0] * b[1] - a[1] * b[0],
            (3, [a, b, c]) => dot(&cross(a, b), c),
            _ => 1.0,
        };
        if det < 0.0 {
            if let Some(last) = axes.last_mut() {
                last.iter_mut().for_each(|x| *x = -*x);
            }
        }
        Ok(Self { origin, axes })
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn project(&self, p: &[f64]) -> Vec<f64> {
        let d = sub(p, &self.origin);
        self.axes.iter().map(|a| dot(&d, a)).collect()
    }

    /// Distance from `p` to the affine hull.
    pub fn distance(&self, p: &[f64]) -> f64 {
        norm(&residual(&sub(p, &self.origin), &self.axes))
    }
}

fn residual(v: &[f64], axes: &[Vec<f64>]) -> Vec<f64> {
    let mut r = v.to_vec();
    for a in axes {
        let c = dot(&r, a);
        for (x, y) in r.iter_mut().zip(a) {
            *x -= c * y;
        }
    }
    r
}

#[derive(Debug, Clone, PartialEq)]
pub struct Hull {
    pub frame: AffineFrame,
    /// Indices of extreme points, sorted.
    pub vertices: Vec<usize>,
    pub facets: Vec<Vec<usize>>,
    /// Half-spaces `n . x <= c` in frame coordinates.
    halfspaces: Vec<(Vec<f64>, f64)>,
    tol: f64,
}

impl Hull {
    pub fn dim(&self) -> usize {
        self.frame.dim()
    }

    /// Whether `p` lies inside or on the hull, within the fitting tolerance.
    pub fn contains(&self, p: &[f64]) -> bool {
        if self.frame.distance(p) > self.tol {
            return false;
        }
        let x = self.frame.project(p);
        self.halfspaces.iter().all(|(n, c)| dot(n, &x) <= c + self.tol)
    }
}

pub fn convex_hull(points: &[Vec<f64>], tol: f64) -> Result<Hull, HullError> {
    let frame = AffineFrame::fit(points, tol)?;
    let dim = frame.dim();
    if dim > 3 {
        return Err(HullError::DimensionTooHigh(dim));
    }
    let coords: Vec<Vec<f64>> = points.iter().map(|p| frame.project(p)).collect();
    let distinct = distinct_indices(&coords, tol);
    let (facets, halfspaces) = match dim {
        0 => (Vec::new(), Vec::new()),
        1 => hull_1d(&coords, &distinct),
        2 => {
            let ring = monotone_chain(&distinct, |i| [coords[i][0], coords[i][1]], tol);
            let hs = polygon_halfspaces(&ring, |i| [coords[i][0], coords[i][1]]);
            (vec![ring], hs)
        }
        _ => hull_3d(&coords, &distinct, tol),
    };
    let mut vertices: Vec<usize> = if dim == 0 {
        vec![distinct[0]]
    } else {
        facets.iter().flatten().copied().collect()
    };
    vertices.sort_unstable();
    vertices.dedup();
    Ok(Hull { frame, vertices, facets, halfspaces, tol })
}

fn distinct_indices(coords: &[Vec<f64>], tol: f64) -> Vec<usize> {
    let mut keep: Vec<usize> = Vec::new();
    for (i, p) in coords.iter().enumerate() {
        if !keep.iter().any(|&k| norm(&sub(p, &coords[k])) <= tol) {
            keep.push(i);
        }
    }
    keep
}

type Halfspaces = Vec<(Vec<f64>, f64)>;

fn hull_1d(coords: &[Vec<f64>], idx: &[usize]) -> (Vec<Vec<usize>>, Halfspaces) {
    let lo = *idx.iter().min_by(|&&a, &&b| coords[a][0].total_cmp(&coords[b][0])).unwrap();
    let hi = *idx.iter().max_by(|&&a, &&b| coords[a][0].total_cmp(&coords[b][0])).unwrap();
    let hs = vec![(vec![-1.0], -coords[lo][0]), (vec![1.0], coords[hi][0])];
    (vec![vec![lo, hi]], hs)
}

/// Counter-clockwise hull ring of the 2D points `at(i)` for `i` in `idx`,
/// dropping collinear boundary points.
fn monotone_chain(
    idx: &[usize],
    at: impl Fn(usize) -> [f64; 2],
    tol: f64,
) -> Vec<usize> {
    let mut order = idx.to_vec();
    order.sort_by(|&a, &b| {
        let (pa, pb) = (at(a), at(b));
        pa[0].total_cmp(&pb[0]).then(pa[1].total_cmp(&pb[1]))
    });
    if order.len() < 3 {
        return order;
    }
    let turn = |o: usize, a: usize, b: usize| {
        let (o, a, b) = (at(o), at(a), at(b));
        (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
    };
    let mut lower: Vec<usize> = Vec::new();
    for &p in &order {
        while lower.len() >= 2 && turn(lower[lower.len() - 2], lower[lower.len() - 1], p) <= tol {
            lower.pop();
        }
        lower.push(p);
    }
    let mut upper: Vec<usize> = Vec::new();
    for &p in order.iter().rev() {
        while upper.len() >= 2 && turn(upper[upper.len() - 2], upper[upper.len() - 1], p) <= tol {
            upper.pop();
        }
        upper.push(p);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    lower
}

fn polygon_halfspaces(ring: &[usize], at: impl Fn(usize) -> [f64; 2]) -> Halfspaces {
    (0..ring.len())
        .map(|t| {
            let a = at(ring[t]);
            let b = at(ring[(t + 1) % ring.len()]);
            let n = [b[1] - a[1], a[0] - b[0]];
            let len = (n[0] * n[0] + n[1] * n[1]).sqrt();
            let n = vec![n[0] / len, n[1] / len];
            let c = n[0] * a[0] + n[1] * a[1];
            (n, c)
        })
        .collect()
}

/// Enumerates supporting planes through point triples. Quartic in the
/// number of points, which is fine for plotting-sized sets.
fn hull_3d(coords: &[Vec<f64>], idx: &[usize], tol: f64) -> (Vec<Vec<usize>>, Halfspaces) {
    let mut faces: Vec<Vec<usize>> = Vec::new();
    let mut planes: Halfspaces = Vec::new();
    let mut members: Vec<Vec<usize>> = Vec::new();
    let n = idx.len();
    for a in 0..n {
        for b in a + 1..n {
            for c in b + 1..n {
                let (ia, ib, ic) = (idx[a], idx[b], idx[c]);
                if members.iter().any(|m| m.contains(&ia) && m.contains(&ib) && m.contains(&ic)) {
                    continue;
                }
                let pa = &coords[ia];
                let normal = cross(&sub(&coords[ib], pa), &sub(&coords[ic], pa));
                let len = norm(&normal);
                if len <= tol {
                    continue;
                }
                let mut normal: Vec<f64> = normal.iter().map(|x| x / len).collect();
                let mut offset = dot(&normal, pa);
                let dists: Vec<f64> = idx.iter().map(|&i| dot(&normal, &coords[i]) - offset).collect();
                if !dists.iter().all(|&d| d <= tol) {
                    if !dists.iter().all(|&d| d >= -tol) {
                        continue;
                    }
                    normal.iter_mut().for_each(|x| *x = -*x);
                    offset = -offset;
                }
                let on_plane: Vec<usize> = idx
                    .iter()
                    .zip(&dists)
                    .filter(|(_, d)| d.abs() <= tol)
                    .map(|(&i, _)| i)
                    .collect();
                let u: Vec<f64> = {
                    let d = sub(&coords[ib], pa);
                    let l = norm(&d);
                    d.iter().map(|x| x / l).collect()
                };
                let v = cross(&normal, &u);
                let at = |i: usize| {
                    let d = sub(&coords[i], pa);
                    [dot(&d, &u), dot(&d, &v)]
                };
                let ring = monotone_chain(&on_plane, at, tol);
                members.push(on_plane);
                faces.push(ring);
                planes.push((normal, offset));
            }
        }
    }
    (faces, planes)
}
