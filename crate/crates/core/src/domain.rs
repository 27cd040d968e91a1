//! Convex domains with exact boundary-distance oracles.
//!
//! Every kind is convex by construction. The distance oracle is exact for
//! intervals, boxes and balls; for halfspace intersections it is exact at
//! interior points (minimum over face distances, valid inside a convex set).
//! Halfspace intersections are supported in the plane, where the vertex
//! enumeration used for volume and inradius is exact.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A bounded convex domain in dimension `d`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ConvexDomain {
    /// Open interval `(a, b)` on the line.
    Interval { a: f64, b: f64 },
    /// Axis-aligned open box; `lo` and `hi` are per-axis bounds.
    Box { lo: Vec<f64>, hi: Vec<f64> },
    /// Open ball of given center and radius.
    Ball { center: Vec<f64>, radius: f64 },
    /// Intersection of halfspaces `normal . x <= offset` (planar only).
    HalfspaceIntersection { faces: Vec<Halfspace> },
}

/// One face `normal . x <= offset`; the normal need not be unit length.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Halfspace {
    pub normal: Vec<f64>,
    pub offset: f64,
}

impl ConvexDomain {
    pub fn interval(a: f64, b: f64) -> Result<Self> {
        if !(a < b) {
            return Err(Error::ParameterDomain(format!(
                "interval needs a < b, got ({a}, {b})"
            )));
        }
        Ok(ConvexDomain::Interval { a, b })
    }

    pub fn boxed(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.is_empty() || lo.len() != hi.len() {
            return Err(Error::ParameterDomain(
                "box needs matching non-empty per-axis bounds".into(),
            ));
        }
        if lo.iter().zip(&hi).any(|(l, h)| !(l < h)) {
            return Err(Error::ParameterDomain(format!(
                "box needs lo < hi on every axis, got {lo:?}..{hi:?}"
            )));
        }
        Ok(ConvexDomain::Box { lo, hi })
    }

    pub fn ball(center: Vec<f64>, radius: f64) -> Result<Self> {
        if center.is_empty() || !(radius > 0.0) {
            return Err(Error::ParameterDomain(format!(
                "ball needs a positive radius and a nonempty center, got r={radius}"
            )));
        }
        Ok(ConvexDomain::Ball { center, radius })
    }

    /// Planar halfspace intersection; must be bounded with nonempty interior.
    pub fn halfspaces(faces: Vec<Halfspace>) -> Result<Self> {
        if faces.len() < 3 || faces.iter().any(|f| f.normal.len() != 2) {
            return Err(Error::ParameterDomain(
                "halfspace intersection needs >= 3 planar faces".into(),
            ));
        }
        let dom = ConvexDomain::HalfspaceIntersection { faces };
        let verts = dom.polygon_vertices()?;
        if verts.len() < 3 {
            return Err(Error::ParameterDomain(
                "halfspace intersection has empty interior or is unbounded".into(),
            ));
        }
        if dom.inradius() <= 0.0 {
            return Err(Error::ParameterDomain(
                "halfspace intersection has empty interior".into(),
            ));
        }
        Ok(dom)
    }

    pub fn dim(&self) -> usize {
        match self {
            ConvexDomain::Interval { .. } => 1,
            ConvexDomain::Box { lo, .. } => lo.len(),
            ConvexDomain::Ball { center, .. } => center.len(),
            ConvexDomain::HalfspaceIntersection { .. } => 2,
        }
    }

    /// Strict interior membership.
    pub fn contains(&self, x: &[f64]) -> bool {
        debug_assert_eq!(x.len(), self.dim());
        match self {
            ConvexDomain::Interval { a, b } => *a < x[0] && x[0] < *b,
            ConvexDomain::Box { lo, hi } => x
                .iter()
                .zip(lo.iter().zip(hi))
                .all(|(xi, (l, h))| *l < *xi && *xi < *h),
            ConvexDomain::Ball { center, radius } => {
                norm2(x, center) < radius * radius
            }
            ConvexDomain::HalfspaceIntersection { faces } => faces
                .iter()
                .all(|f| dot(&f.normal, x) < f.offset),
        }
    }

    /// Distance to the boundary; positive inside, negative outside (for the
    /// halfspace kind the outside value is the max face violation, a lower
    /// bound on the true distance, which is all callers need there).
    pub fn boundary_distance(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.dim());
        match self {
            ConvexDomain::Interval { a, b } => (x[0] - a).min(b - x[0]),
            ConvexDomain::Box { lo, hi } => x
                .iter()
                .zip(lo.iter().zip(hi))
                .map(|(xi, (l, h))| (xi - l).min(h - xi))
                .fold(f64::INFINITY, f64::min),
            ConvexDomain::Ball { center, radius } => radius - norm2(x, center).sqrt(),
            ConvexDomain::HalfspaceIntersection { faces } => faces
                .iter()
                .map(|f| (f.offset - dot(&f.normal, x)) / norm(&f.normal))
                .fold(f64::INFINITY, f64::min),
        }
    }

    /// Inradius: radius of the largest inscribed ball. Exact for all kinds
    /// (Chebyshev center by active-face enumeration for halfspaces).
    pub fn inradius(&self) -> f64 {
        match self {
            ConvexDomain::Interval { a, b } => 0.5 * (b - a),
            ConvexDomain::Box { lo, hi } => lo
                .iter()
                .zip(hi)
                .map(|(l, h)| 0.5 * (h - l))
                .fold(f64::INFINITY, f64::min),
            ConvexDomain::Ball { radius, .. } => *radius,
            ConvexDomain::HalfspaceIntersection { faces } => chebyshev_radius(faces),
        }
    }

    /// Lebesgue volume. Shoelace over the vertex polygon for halfspaces.
    pub fn volume(&self) -> f64 {
        match self {
            ConvexDomain::Interval { a, b } => b - a,
            ConvexDomain::Box { lo, hi } => lo.iter().zip(hi).map(|(l, h)| h - l).product(),
            ConvexDomain::Ball { center, radius } => {
                unit_ball_volume(center.len()) * radius.powi(center.len() as i32)
            }
            ConvexDomain::HalfspaceIntersection { .. } => {
                let verts = self.polygon_vertices().unwrap_or_default();
                polygon_area(&verts)
            }
        }
    }

    /// Axis-aligned bounding box as `(lo, hi)`.
    pub fn bounding_box(&self) -> (Vec<f64>, Vec<f64>) {
        match self {
            ConvexDomain::Interval { a, b } => (vec![*a], vec![*b]),
            ConvexDomain::Box { lo, hi } => (lo.clone(), hi.clone()),
            ConvexDomain::Ball { center, radius } => (
                center.iter().map(|c| c - radius).collect(),
                center.iter().map(|c| c + radius).collect(),
            ),
            ConvexDomain::HalfspaceIntersection { .. } => {
                let verts = self.polygon_vertices().unwrap_or_default();
                let mut lo = vec![f64::INFINITY; 2];
                let mut hi = vec![f64::NEG_INFINITY; 2];
                for v in &verts {
                    for k in 0..2 {
                        lo[k] = lo[k].min(v[k]);
                        hi[k] = hi[k].max(v[k]);
                    }
                }
                (lo, hi)
            }
        }
    }

    /// Rescale the domain about the origin by `s > 0` (used by the scale
    /// covariance checks).
    pub fn scaled(&self, s: f64) -> ConvexDomain {
        assert!(s > 0.0);
        match self {
            ConvexDomain::Interval { a, b } => ConvexDomain::Interval { a: a * s, b: b * s },
            ConvexDomain::Box { lo, hi } => ConvexDomain::Box {
                lo: lo.iter().map(|v| v * s).collect(),
                hi: hi.iter().map(|v| v * s).collect(),
            },
            ConvexDomain::Ball { center, radius } => ConvexDomain::Ball {
                center: center.iter().map(|v| v * s).collect(),
                radius: radius * s,
            },
            ConvexDomain::HalfspaceIntersection { faces } => {
                ConvexDomain::HalfspaceIntersection {
                    faces: faces
                        .iter()
                        .map(|f| Halfspace {
                            normal: f.normal.clone(),
                            offset: f.offset * s,
                        })
                        .collect(),
                }
            }
        }
    }

    /// Gap `dist(K, boundary of self)` for a compact convex `inner` subset.
    ///
    /// Exact for interval/box/ball pairs; for polygonal kinds it minimizes the
    /// face distance over the inner set's vertices (exact for convex faces).
    pub fn inner_gap(&self, inner: &ConvexDomain) -> Result<f64> {
        if inner.dim() != self.dim() {
            return Err(Error::Precondition(
                "inner set and domain must share the dimension".into(),
            ));
        }
        let gap = match inner {
            ConvexDomain::Interval { a, b } => self
                .boundary_distance(&[*a])
                .min(self.boundary_distance(&[*b])),
            ConvexDomain::Box { lo, hi } => {
                let mut g = f64::INFINITY;
                let d = lo.len();
                for corner in 0..(1usize << d) {
                    let x: Vec<f64> = (0..d)
                        .map(|k| if corner >> k & 1 == 1 { hi[k] } else { lo[k] })
                        .collect();
                    g = g.min(self.boundary_distance(&x));
                }
                g
            }
            ConvexDomain::Ball { center, radius } => self.boundary_distance(center) - radius,
            ConvexDomain::HalfspaceIntersection { .. } => {
                let verts = inner.polygon_vertices()?;
                verts
                    .iter()
                    .map(|v| self.boundary_distance(v))
                    .fold(f64::INFINITY, f64::min)
            }
        };
        if gap <= 0.0 {
            return Err(Error::Precondition(format!(
                "inner set is not strictly inside the domain (gap {gap})"
            )));
        }
        Ok(gap)
    }

    /// Vertices of the planar polygon, counter-clockwise.
    fn polygon_vertices(&self) -> Result<Vec<Vec<f64>>> {
        let ConvexDomain::HalfspaceIntersection { faces } = self else {
            return Err(Error::Precondition("not a halfspace intersection".into()));
        };
        let mut verts: Vec<Vec<f64>> = Vec::new();
        let n = faces.len();
        for i in 0..n {
            for j in (i + 1)..n {
                let (f, g) = (&faces[i], &faces[j]);
                let det = f.normal[0] * g.normal[1] - f.normal[1] * g.normal[0];
                if det.abs() < 1e-14 {
                    continue;
                }
                let x = (f.offset * g.normal[1] - g.offset * f.normal[1]) / det;
                let y = (f.normal[0] * g.offset - g.normal[0] * f.offset) / det;
                let p = vec![x, y];
                let feasible = faces
                    .iter()
                    .all(|h| dot(&h.normal, &p) <= h.offset + 1e-9 * norm(&h.normal));
                if feasible && !verts.iter().any(|v| norm2(v, &p) < 1e-18) {
                    verts.push(p);
                }
            }
        }
        if verts.len() >= 3 {
            let cx = verts.iter().map(|v| v[0]).sum::<f64>() / verts.len() as f64;
            let cy = verts.iter().map(|v| v[1]).sum::<f64>() / verts.len() as f64;
            verts.sort_by(|p, q| {
                let ap = (p[1] - cy).atan2(p[0] - cx);
                let aq = (q[1] - cy).atan2(q[0] - cx);
                ap.total_cmp(&aq)
            });
        }
        Ok(verts)
    }
}

/// Volume of the unit ball in `d` dimensions.
pub fn unit_ball_volume(d: usize) -> f64 {
    use statrs::function::gamma::gamma;
    std::f64::consts::PI.powf(d as f64 / 2.0) / gamma(d as f64 / 2.0 + 1.0)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn norm2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn polygon_area(verts: &[Vec<f64>]) -> f64 {
    let n = verts.len();
    if n < 3 {
        return 0.0;
    }
    let mut acc = 0.0;
    for i in 0..n {
        let j = (i + 1) % n;
        acc += verts[i][0] * verts[j][1] - verts[j][0] * verts[i][1];
    }
    0.5 * acc.abs()
}

/// Chebyshev radius of a planar halfspace intersection.
///
/// The optimum of `max r : n_i . x + r |n_i| <= c_i` sits where three
/// constraints are active; enumerate triples and keep the best feasible one.
fn chebyshev_radius(faces: &[Halfspace]) -> f64 {
    let n = faces.len();
    let row = |f: &Halfspace| [f.normal[0], f.normal[1], norm(&f.normal), f.offset];
    let mut best = 0.0_f64;
    for i in 0..n {
        for j in (i + 1)..n {
            for k in (j + 1)..n {
                let rows = [row(&faces[i]), row(&faces[j]), row(&faces[k])];
                if let Some((x, y, r)) = solve3(&rows) {
                    if r <= best {
                        continue;
                    }
                    let p = [x, y];
                    let feasible = faces.iter().all(|f| {
                        dot(&f.normal, &p) + r * norm(&f.normal)
                            <= f.offset + 1e-9 * (1.0 + norm(&f.normal))
                    });
                    if feasible {
                        best = r;
                    }
                }
            }
        }
    }
    best
}

fn solve3(rows: &[[f64; 4]; 3]) -> Option<(f64, f64, f64)> {
    let m = nalgebra::Matrix3::new(
        rows[0][0], rows[0][1], rows[0][2], //
        rows[1][0], rows[1][1], rows[1][2], //
        rows[2][0], rows[2][1], rows[2][2],
    );
    let b = nalgebra::Vector3::new(rows[0][3], rows[1][3], rows[2][3]);
    m.lu().solve(&b).map(|s| (s[0], s[1], s[2]))
}
