//! Swarm outlines from particle clouds via alpha shapes.
//!
//! The Delaunay triangulation of the (deduplicated) points is filtered down to
//! triangles whose circumradius is below `alpha`. Edges used by exactly one
//! surviving triangle form the boundary, which is chained into closed rings:
//! counter-clockwise for outer boundaries, clockwise for holes.

use std::collections::HashMap;

use spade::{DelaunayTriangulation, Point2, Triangulation};

use crate::geometry::ImagePoint;
use crate::mask::BinaryMask;
use crate::{Error, Result};

/// Points closer than this are merged before triangulation.
pub const DEDUP_TOLERANCE: f64 = 1e-6;

/// Default alpha as a multiple of the median nearest-neighbor distance.
pub const DEFAULT_ALPHA_FACTOR: f64 = 3.0;

#[derive(Debug, Clone, PartialEq)]
pub struct AlphaShape {
    pub alpha: f64,
    triangles: Vec<[ImagePoint; 3]>,
    rings: Vec<Vec<ImagePoint>>,
}

impl AlphaShape {
    pub fn empty(alpha: f64) -> Self {
        AlphaShape {
            alpha,
            triangles: Vec::new(),
            rings: Vec::new(),
        }
    }

    /// Surviving triangles, counter-clockwise.
    pub fn triangles(&self) -> &[[ImagePoint; 3]] {
        &self.triangles
    }

    /// Closed boundary rings (first vertex not repeated at the end).
    pub fn rings(&self) -> &[Vec<ImagePoint>] {
        &self.rings
    }

    pub fn is_empty(&self) -> bool {
        self.triangles.is_empty()
    }

    pub fn area(&self) -> f64 {
        self.triangles.iter().map(|t| signed_area(t).abs()).sum()
    }

    /// Shape bounded by a single counter-clockwise ring (e.g. a convex hull).
    pub fn from_ring(ring: Vec<ImagePoint>) -> Self {
        AlphaShape {
            alpha: f64::INFINITY,
            triangles: Vec::new(),
            rings: vec![ring],
        }
    }
}

fn signed_area(t: &[ImagePoint; 3]) -> f64 {
    let [a, b, c] = t;
    0.5 * ((b.u - a.u) * (c.v - a.v) - (c.u - a.u) * (b.v - a.v))
}

/// Signed shoelace area of a closed ring.
pub fn ring_area(ring: &[ImagePoint]) -> f64 {
    let n = ring.len();
    (0..n)
        .map(|i| {
            let (p, q) = (ring[i], ring[(i + 1) % n]);
            p.u * q.v - q.u * p.v
        })
        .sum::<f64>()
        * 0.5
}

/// Circumradius of a triangle; infinite for degenerate triangles.
pub fn circumradius(t: &[ImagePoint; 3]) -> f64 {
    let [a, b, c] = t;
    let area = signed_area(t).abs();
    if area == 0.0 {
        return f64::INFINITY;
    }
    a.distance(b) * b.distance(c) * c.distance(a) / (4.0 * area)
}

/// Drop points within [`DEDUP_TOLERANCE`] of an earlier kept point.
pub fn dedup_points(points: &[ImagePoint]) -> Vec<ImagePoint> {
    let cell = |p: &ImagePoint| {
        (
            (p.u / DEDUP_TOLERANCE).floor() as i64,
            (p.v / DEDUP_TOLERANCE).floor() as i64,
        )
    };
    let mut grid: HashMap<(i64, i64), Vec<ImagePoint>> = HashMap::new();
    let mut out = Vec::with_capacity(points.len());
    for p in points.iter().filter(|p| p.is_finite()) {
        let (ci, cj) = cell(p);
        let near = (-1..=1).any(|di| {
            (-1..=1).any(|dj| {
                grid.get(&(ci + di, cj + dj))
                    .is_some_and(|v| v.iter().any(|q| q.distance(p) <= DEDUP_TOLERANCE))
            })
        });
        if !near {
            grid.entry((ci, cj)).or_default().push(*p);
            out.push(*p);
        }
    }
    out
}

struct Delaunay {
    points: Vec<ImagePoint>,
    /// Counter-clockwise vertex indices into `points`.
    faces: Vec<[usize; 3]>,
    edges: Vec<(usize, usize)>,
}

fn triangulate(points: &[ImagePoint]) -> Result<Delaunay> {
    let points = dedup_points(points);
    if points.len() < 3 {
        return Err(Error::TooFewPoints {
            need: 3,
            got: points.len(),
        });
    }
    let mut tri: DelaunayTriangulation<Point2<f64>> = DelaunayTriangulation::new();
    let mut handle_to_point = HashMap::new();
    for (i, p) in points.iter().enumerate() {
        let h = tri
            .insert(Point2::new(p.u, p.v))
            .map_err(|_| Error::DegenerateGeometry("point outside triangulation range"))?;
        handle_to_point.entry(h.index()).or_insert(i);
    }
    if tri.num_inner_faces() == 0 {
        return Err(Error::DegenerateGeometry("all points are collinear"));
    }
    let faces = tri
        .inner_faces()
        .map(|f| f.vertices().map(|v| handle_to_point[&v.fix().index()]))
        .collect();
    let edges = tri
        .undirected_edges()
        .map(|e| {
            let [a, b] = e.vertices();
            (handle_to_point[&a.fix().index()], handle_to_point[&b.fix().index()])
        })
        .collect();
    Ok(Delaunay {
        points,
        faces,
        edges,
    })
}

/// Median distance from each point to its nearest neighbor.
pub fn median_nearest_neighbor(points: &[ImagePoint]) -> Result<f64> {
    let d = triangulate(points)?;
    let mut nearest = vec![f64::INFINITY; d.points.len()];
    for &(a, b) in &d.edges {
        let len = d.points[a].distance(&d.points[b]);
        nearest[a] = nearest[a].min(len);
        nearest[b] = nearest[b].min(len);
    }
    nearest.sort_by(f64::total_cmp);
    let n = nearest.len();
    Ok(if n % 2 == 1 {
        nearest[n / 2]
    } else {
        0.5 * (nearest[n / 2 - 1] + nearest[n / 2])
    })
}

/// [`DEFAULT_ALPHA_FACTOR`] times the median nearest-neighbor distance.
pub fn default_alpha(points: &[ImagePoint]) -> Result<f64> {
    Ok(DEFAULT_ALPHA_FACTOR * median_nearest_neighbor(points)?)
}

/// Alpha shape: Delaunay triangles with circumradius `< alpha`.
pub fn alpha_shape(points: &[ImagePoint], alpha: f64) -> Result<AlphaShape> {
    if !(alpha > 0.0) {
        return Err(Error::config("alpha", "must be > 0"));
    }
    let d = triangulate(points)?;
    let kept: Vec<[usize; 3]> = d
        .faces
        .iter()
        .copied()
        .filter(|f| circumradius(&f.map(|i| d.points[i])) < alpha)
        .collect();
    if kept.is_empty() {
        return Ok(AlphaShape::empty(alpha));
    }
    let rings = boundary_rings(&d.points, &kept);
    Ok(AlphaShape {
        alpha,
        triangles: kept.iter().map(|f| f.map(|i| d.points[i])).collect(),
        rings,
    })
}

fn boundary_rings(points: &[ImagePoint], faces: &[[usize; 3]]) -> Vec<Vec<ImagePoint>> {
    let mut directed = std::collections::HashSet::new();
    for f in faces {
        for k in 0..3 {
            directed.insert((f[k], f[(k + 1) % 3]));
        }
    }
    // boundary edges keep the orientation of their triangle: interior on the left
    let mut outgoing: HashMap<usize, Vec<usize>> = HashMap::new();
    let mut boundary: Vec<(usize, usize)> = directed
        .iter()
        .copied()
        .filter(|&(a, b)| !directed.contains(&(b, a)))
        .collect();
    boundary.sort_unstable();
    for &(a, b) in &boundary {
        outgoing.entry(a).or_default().push(b);
    }

    let mut rings = Vec::new();
    for &(start, first) in &boundary {
        let Some(list) = outgoing.get_mut(&start) else { continue };
        let Some(pos) = list.iter().position(|&x| x == first) else { continue };
        list.swap_remove(pos);

        let mut ring = vec![start];
        let (mut prev, mut cur) = (start, first);
        while cur != start {
            ring.push(cur);
            let candidates = outgoing.get_mut(&cur).expect("boundary edges form cycles");
            let pick = if candidates.len() == 1 {
                0
            } else {
                // at pinch vertices take the sharpest left turn
                let (p, c) = (points[prev], points[cur]);
                let din = (c.u - p.u, c.v - p.v);
                let turn = |n: usize| {
                    let q = points[n];
                    let dout = (q.u - c.u, q.v - c.v);
                    (din.0 * dout.1 - din.1 * dout.0).atan2(din.0 * dout.0 + din.1 * dout.1)
                };
                (0..candidates.len())
                    .max_by(|&i, &j| turn(candidates[i]).total_cmp(&turn(candidates[j])))
                    .unwrap()
            };
            let next = candidates.swap_remove(pick);
            prev = cur;
            cur = next;
        }
        rings.push(ring.into_iter().map(|i| points[i]).collect());
    }
    rings
}

/// Rasterize with the even-odd rule over all rings, sampling pixel centers.
pub fn rasterize(shape: &AlphaShape, width: u32, height: u32) -> BinaryMask {
    let mut mask = BinaryMask::new(width, height);
    let edges: Vec<(ImagePoint, ImagePoint)> = shape
        .rings()
        .iter()
        .flat_map(|r| (0..r.len()).map(move |i| (r[i], r[(i + 1) % r.len()])))
        .collect();
    if edges.is_empty() {
        return mask;
    }
    let vmin = edges.iter().map(|e| e.0.v).fold(f64::INFINITY, f64::min);
    let vmax = edges.iter().map(|e| e.0.v).fold(f64::NEG_INFINITY, f64::max);
    let j0 = ((vmin - 0.5).ceil().max(0.0)) as u32;
    let j1 = ((vmax - 0.5).floor().min(height as f64 - 1.0)).max(-1.0) as i64;
    let mut xs = Vec::new();
    for j in j0 as i64..=j1 {
        let y = j as f64 + 0.5;
        xs.clear();
        for (p, q) in &edges {
            if (p.v <= y) != (q.v <= y) {
                xs.push(p.u + (y - p.v) * (q.u - p.u) / (q.v - p.v));
            }
        }
        xs.sort_by(f64::total_cmp);
        for span in xs.chunks_exact(2) {
            let i0 = (span[0] - 0.5).ceil().max(0.0);
            let i1 = (span[1] - 0.5).ceil().min(width as f64);
            if i1 > i0 {
                mask.fill_span(j as u32, i0 as u32, i1 as u32);
            }
        }
    }
    mask
}
