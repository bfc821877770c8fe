//! Bowyer-Watson Delaunay triangulation.
//!
//! The enclosing super-triangle has its vertices at infinity in three fixed
//! directions and is handled symbolically: a circumcircle through one or two
//! points at infinity degenerates to a half-plane. Hull edges therefore come
//! out exactly as for the true Delaunay triangulation, which a finite
//! super-triangle does not guarantee.

use std::collections::{BTreeSet, HashMap};

use crate::error::{Error, Result};

use super::Point;

/// Directions of the three vertices at infinity, counter-clockwise.
const INF_DIRS: [[f64; 2]; 3] = [
    [0.0, 1.0],
    [-0.866_025_403_784_438_6, -0.5],
    [0.866_025_403_784_438_6, -0.5],
];

#[inline]
fn orient(a: Point, b: Point, c: Point) -> f64 {
    (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x)
}

/// `> 0` when `d` lies strictly inside the circumcircle of counter-clockwise `a, b, c`.
#[inline]
pub(crate) fn incircle(a: Point, b: Point, c: Point, d: Point) -> f64 {
    let (adx, ady) = (a.x - d.x, a.y - d.y);
    let (bdx, bdy) = (b.x - d.x, b.y - d.y);
    let (cdx, cdy) = (c.x - d.x, c.y - d.y);
    let al = adx * adx + ady * ady;
    let bl = bdx * bdx + bdy * bdy;
    let cl = cdx * cdx + cdy * cdy;
    adx * (bdy * cl - bl * cdy) - ady * (bdx * cl - bl * cdx) + al * (bdx * cdy - bdy * cdx)
}

struct Mesh<'a> {
    points: &'a [Point],
    n: usize,
}

impl Mesh<'_> {
    fn is_inf(&self, v: usize) -> bool {
        v >= self.n
    }

    /// Whether `p` lies inside the (possibly degenerate) circumcircle of `tri`.
    fn in_circumcircle(&self, tri: [usize; 3], p: Point) -> bool {
        let inf = tri.iter().filter(|&&v| self.is_inf(v)).count();
        match inf {
            0 => {
                let [a, b, c] = tri.map(|v| self.points[v]);
                incircle(a, b, c, p) > 0.0
            }
            1 => {
                // rotate so the vertex at infinity is last: (a, b, inf) ccw
                let k = tri.iter().position(|&v| self.is_inf(v)).unwrap();
                let a = self.points[tri[(k + 1) % 3]];
                let b = self.points[tri[(k + 2) % 3]];
                let o = orient(a, b, p);
                if o != 0.0 {
                    o > 0.0
                } else {
                    (p.x - a.x) * (p.x - b.x) + (p.y - a.y) * (p.y - b.y) < 0.0
                }
            }
            2 => {
                let k = tri.iter().position(|&v| !self.is_inf(v)).unwrap();
                let a = self.points[tri[k]];
                let d1 = INF_DIRS[tri[(k + 1) % 3] - self.n];
                let d2 = INF_DIRS[tri[(k + 2) % 3] - self.n];
                (p.x - a.x) * (d1[0] + d2[0]) + (p.y - a.y) * (d1[1] + d2[1]) > 0.0
            }
            _ => true,
        }
    }
}

fn collinear(points: &[Point]) -> bool {
    let a = points[0];
    let Some(b) = points.iter().copied().find(|p| p.x != a.x || p.y != a.y) else {
        return true;
    };
    points.iter().all(|&p| orient(a, b, p) == 0.0)
}

/// Path through the points in order along their dominant axis.
fn nearest_path(points: &[Point]) -> Vec<(usize, usize)> {
    let (xmin, xmax) = points.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), p| (l.min(p.x), h.max(p.x)));
    let (ymin, ymax) = points.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), p| (l.min(p.y), h.max(p.y)));
    let along_x = xmax - xmin >= ymax - ymin;
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&i, &j| {
        let (a, b) = (points[i], points[j]);
        let (ka, kb) = if along_x { (a.x, b.x) } else { (a.y, b.y) };
        ka.total_cmp(&kb).then(i.cmp(&j))
    });
    let mut edges: Vec<(usize, usize)> = order.windows(2).map(|w| (w[0].min(w[1]), w[0].max(w[1]))).collect();
    edges.sort_unstable();
    edges
}

/// Triangles (counter-clockwise vertex indices) of the Delaunay triangulation.
/// Exactly duplicated points are skipped.
pub fn delaunay_triangles(points: &[Point]) -> Vec<[usize; 3]> {
    let n = points.len();
    let mesh = Mesh { points, n };
    let mut tris: Vec<[usize; 3]> = vec![[n, n + 1, n + 2]];

    for (pi, &p) in points.iter().enumerate() {
        let mut bad = Vec::new();
        let mut keep = Vec::with_capacity(tris.len() + 2);
        for t in tris.drain(..) {
            if mesh.in_circumcircle(t, p) {
                bad.push(t);
            } else {
                keep.push(t);
            }
        }
        tris = keep;
        if bad.is_empty() {
            continue;
        }
        // boundary of the cavity: directed edges whose reverse is not in a bad triangle
        let mut count: HashMap<(usize, usize), usize> = HashMap::new();
        for t in &bad {
            for k in 0..3 {
                let (a, b) = (t[k], t[(k + 1) % 3]);
                *count.entry((a.min(b), a.max(b))).or_default() += 1;
            }
        }
        for t in &bad {
            for k in 0..3 {
                let (a, b) = (t[k], t[(k + 1) % 3]);
                if count[&(a.min(b), a.max(b))] == 1 {
                    tris.push([a, b, pi]);
                }
            }
        }
    }

    tris.retain(|t| t.iter().all(|&v| v < n));
    tris
}

/// Undirected edges of the Delaunay triangulation, each once as `(i, j)` with
/// `i < j`, sorted. Fewer than three or collinear points fall back to a path
/// linking each point to its successor along the line.
pub fn delaunay_pairs(points: &[Point]) -> Result<Vec<(usize, usize)>> {
    if points.len() < 2 {
        return Err(Error::DegenerateGeometry(points.len()));
    }
    if points.len() < 3 || collinear(points) {
        return Ok(nearest_path(points));
    }
    let mut edges = BTreeSet::new();
    for t in delaunay_triangles(points) {
        for k in 0..3 {
            let (a, b) = (t[k], t[(k + 1) % 3]);
            edges.insert((a.min(b), a.max(b)));
        }
    }
    Ok(edges.into_iter().collect())
}
