//! Exact polygon computations on the unit square.
//!
//! Equal-price market areas are Voronoi cells clipped to the square. They are
//! built by successive half-plane clipping, which is exact enough for the
//! handful of sites a market ever holds and never needs an unbounded diagram.

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Absolute tolerance for boundary membership tests.
pub const BOUNDARY_TOL: f64 = 1e-9;

/// Two sites closer than this are treated as the same point.
pub const DUPLICATE_TOL: f64 = 1e-12;

/// Largest site count accepted by [`voronoi_cells`].
pub const MAX_SITES: usize = 16;

/// Default Gauss-Legendre order used by [`distance_integral`].
pub const DEFAULT_QUADRATURE_ORDER: usize = 24;

/// A location in the unit square: a consumer type or a firm position.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(&self, other: &Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn in_unit_square(&self) -> bool {
        (0.0..=1.0).contains(&self.x) && (0.0..=1.0).contains(&self.y)
    }

    fn sub(&self, other: &Point) -> (f64, f64) {
        (self.x - other.x, self.y - other.y)
    }
}

impl From<(f64, f64)> for Point {
    fn from((x, y): (f64, f64)) -> Self {
        Point::new(x, y)
    }
}

fn cross(a: (f64, f64), b: (f64, f64)) -> f64 {
    a.0 * b.1 - a.1 * b.0
}

/// A convex polygon with counterclockwise vertices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Polygon {
    pub vertices: Vec<Point>,
    /// Index of the site that owns this cell, when it is a Voronoi cell.
    pub owner: Option<usize>,
}

impl Polygon {
    pub fn new(vertices: Vec<Point>) -> Self {
        Self { vertices, owner: None }
    }

    pub fn unit_square() -> Self {
        Self::new(vec![
            Point::new(0.0, 0.0),
            Point::new(1.0, 0.0),
            Point::new(1.0, 1.0),
            Point::new(0.0, 1.0),
        ])
    }

    /// Shoelace signed area; positive for counterclockwise order.
    pub fn signed_area(&self) -> f64 {
        let v = &self.vertices;
        let n = v.len();
        if n < 3 {
            return 0.0;
        }
        let mut twice = 0.0;
        for k in 0..n {
            let a = v[k];
            let b = v[(k + 1) % n];
            twice += a.x * b.y - b.x * a.y;
        }
        0.5 * twice
    }

    /// Area, or zero for a degenerate polygon.
    pub fn area(&self) -> f64 {
        if self.distinct_vertex_count() < 3 {
            0.0
        } else {
            self.signed_area().abs()
        }
    }

    fn distinct_vertex_count(&self) -> usize {
        let mut distinct: Vec<Point> = Vec::with_capacity(self.vertices.len());
        for p in &self.vertices {
            if !distinct.iter().any(|q| q.distance(p) <= DUPLICATE_TOL) {
                distinct.push(*p);
            }
        }
        distinct.len()
    }

    /// Point-in-polygon for a counterclockwise convex polygon, boundary included.
    pub fn contains(&self, p: &Point, tol: f64) -> bool {
        let v = &self.vertices;
        let n = v.len();
        if n < 3 {
            return false;
        }
        (0..n).all(|k| {
            let a = v[k];
            let b = v[(k + 1) % n];
            let edge = b.sub(&a);
            let len = edge.0.hypot(edge.1);
            if len == 0.0 {
                return true;
            }
            cross(edge, p.sub(&a)) / len >= -tol
        })
    }

    pub fn centroid(&self) -> Point {
        let v = &self.vertices;
        let a = self.signed_area();
        if a.abs() < 1e-300 {
            let n = v.len().max(1) as f64;
            let (sx, sy) = v.iter().fold((0.0, 0.0), |acc, p| (acc.0 + p.x, acc.1 + p.y));
            return Point::new(sx / n, sy / n);
        }
        let n = v.len();
        let (mut cx, mut cy) = (0.0, 0.0);
        for k in 0..n {
            let p = v[k];
            let q = v[(k + 1) % n];
            let w = p.x * q.y - q.x * p.y;
            cx += (p.x + q.x) * w;
            cy += (p.y + q.y) * w;
        }
        Point::new(cx / (6.0 * a), cy / (6.0 * a))
    }

    /// Keeps the part of the polygon where `nx * x + ny * y <= rhs`
    /// (Sutherland-Hodgman against a single half-plane).
    pub fn clip_half_plane(&self, nx: f64, ny: f64, rhs: f64) -> Polygon {
        let v = &self.vertices;
        let n = v.len();
        let mut out = Vec::with_capacity(n + 1);
        if n == 0 {
            return Polygon { vertices: out, owner: self.owner };
        }
        let scale = nx.hypot(ny).max(f64::MIN_POSITIVE);
        let side = |p: &Point| (nx * p.x + ny * p.y - rhs) / scale;
        for k in 0..n {
            let cur = v[k];
            let next = v[(k + 1) % n];
            let sc = side(&cur);
            let sn = side(&next);
            let cur_in = sc <= 0.0;
            let next_in = sn <= 0.0;
            if cur_in {
                out.push(cur);
            }
            if cur_in != next_in {
                let t = sc / (sc - sn);
                out.push(Point::new(
                    cur.x + t * (next.x - cur.x),
                    cur.y + t * (next.y - cur.y),
                ));
            }
        }
        dedup_ring(&mut out);
        Polygon { vertices: out, owner: self.owner }
    }
}

fn dedup_ring(points: &mut Vec<Point>) {
    points.dedup_by(|a, b| a.distance(b) <= DUPLICATE_TOL);
    while points.len() > 1 && points[0].distance(points.last().unwrap()) <= DUPLICATE_TOL {
        points.pop();
    }
}

/// Checks that every site lies in the unit square and no two coincide.
pub fn validate_sites(sites: &[Point]) -> Result<()> {
    for (i, p) in sites.iter().enumerate() {
        if !p.x.is_finite() || !p.y.is_finite() || !p.in_unit_square() {
            return Err(Error::OutOfDomain { index: i, x: p.x, y: p.y });
        }
    }
    for i in 0..sites.len() {
        for j in (i + 1)..sites.len() {
            if sites[i].distance(&sites[j]) <= DUPLICATE_TOL {
                return Err(Error::DuplicateSites { first: i, second: j });
            }
        }
    }
    Ok(())
}

/// Equal-price market areas: one clipped Voronoi cell per site, in site order.
pub fn voronoi_cells(sites: &[Point]) -> Result<Vec<Polygon>> {
    if sites.is_empty() || sites.len() > MAX_SITES {
        return Err(Error::SiteCount { count: sites.len(), max: MAX_SITES });
    }
    validate_sites(sites)?;
    Ok((0..sites.len()).map(|i| voronoi_cell(sites, i)).collect())
}

/// Cell of site `i`: the square clipped by every perpendicular-bisector
/// half-plane `|x - s_i| <= |x - s_j|`.
pub(crate) fn voronoi_cell(sites: &[Point], i: usize) -> Polygon {
    let si = sites[i];
    let mut cell = Polygon::unit_square();
    cell.owner = Some(i);
    for (j, sj) in sites.iter().enumerate() {
        if j == i {
            continue;
        }
        let nx = sj.x - si.x;
        let ny = sj.y - si.y;
        let rhs = 0.5 * (sj.x * sj.x + sj.y * sj.y - si.x * si.x - si.y * si.y);
        cell = cell.clip_half_plane(nx, ny, rhs);
        if cell.vertices.is_empty() {
            break;
        }
    }
    cell
}

/// Area of a polygon; fails on fewer than three distinct vertices.
pub fn polygon_area(poly: &Polygon) -> Result<f64> {
    if poly.distinct_vertex_count() < 3 {
        return Err(Error::DegeneratePolygon { vertices: poly.vertices.len() });
    }
    Ok(poly.signed_area().abs())
}

/// Gauss-Legendre nodes and weights on `[0, 1]`.
pub fn gauss_legendre_unit(order: usize) -> Vec<(f64, f64)> {
    let n = order.max(1);
    let mut rule = Vec::with_capacity(n);
    for k in 0..n {
        // Newton iteration on P_n starting from the Chebyshev-like guess.
        let mut x = (std::f64::consts::PI * (k as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for j in 2..=n {
                let p2 = ((2 * j - 1) as f64 * x * p1 - (j - 1) as f64 * p0) / j as f64;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 1 { x } else { p1 };
            let pn1 = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (x * pn - pn1) / (x * x - 1.0);
            let dx = pn / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        rule.push((0.5 * (1.0 - x), 0.5 * w));
    }
    rule.sort_by(|a, b| a.0.total_cmp(&b.0));
    rule
}

fn default_rule() -> &'static [(f64, f64)] {
    static RULE: OnceLock<Vec<(f64, f64)>> = OnceLock::new();
    RULE.get_or_init(|| gauss_legendre_unit(DEFAULT_QUADRATURE_ORDER))
}

/// Integral of the Euclidean distance to `site` over `poly`.
pub fn distance_integral(poly: &Polygon, site: &Point) -> f64 {
    distance_integral_with(poly, site, default_rule())
}

/// [`distance_integral`] with an explicit Gauss-Legendre order.
pub fn distance_integral_order(poly: &Polygon, site: &Point, order: usize) -> f64 {
    distance_integral_with(poly, site, &gauss_legendre_unit(order))
}

// The polygon is fanned into signed triangles with apex at `site`, so the
// cone singularity of |x - site| always sits on a triangle vertex. On the
// collapsed-square map x = site + u((1-w)e1 + w e2) the radial part integrates
// to exactly 1/3, leaving a smooth one-dimensional integral along each edge.
fn distance_integral_with(poly: &Polygon, site: &Point, rule: &[(f64, f64)]) -> f64 {
    if poly.distinct_vertex_count() < 3 {
        return 0.0;
    }
    let v = &poly.vertices;
    let n = v.len();
    let mut total = 0.0;
    for k in 0..n {
        let e1 = v[k].sub(site);
        let e2 = v[(k + 1) % n].sub(site);
        let twice_area = cross(e1, e2);
        if twice_area == 0.0 {
            continue;
        }
        let edge_integral: f64 = rule
            .iter()
            .map(|&(w, wt)| {
                let ax = (1.0 - w) * e1.0 + w * e2.0;
                let ay = (1.0 - w) * e1.1 + w * e2.1;
                wt * ax.hypot(ay)
            })
            .sum();
        total += twice_area * edge_integral / 3.0;
    }
    total.abs()
}

/// The eight isometries of the unit square.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Symmetry {
    Identity,
    Rotate90,
    Rotate180,
    Rotate270,
    FlipX,
    FlipY,
    Transpose,
    AntiTranspose,
}

impl Symmetry {
    pub const ALL: [Symmetry; 8] = [
        Symmetry::Identity,
        Symmetry::Rotate90,
        Symmetry::Rotate180,
        Symmetry::Rotate270,
        Symmetry::FlipX,
        Symmetry::FlipY,
        Symmetry::Transpose,
        Symmetry::AntiTranspose,
    ];

    /// Applies the map to coordinates in `[0, side]`.
    pub fn apply_scaled<T>(self, x: T, y: T, side: T) -> (T, T)
    where
        T: Copy + std::ops::Sub<Output = T>,
    {
        match self {
            Symmetry::Identity => (x, y),
            Symmetry::Rotate90 => (side - y, x),
            Symmetry::Rotate180 => (side - x, side - y),
            Symmetry::Rotate270 => (y, side - x),
            Symmetry::FlipX => (side - x, y),
            Symmetry::FlipY => (x, side - y),
            Symmetry::Transpose => (y, x),
            Symmetry::AntiTranspose => (side - y, side - x),
        }
    }

    pub fn apply(self, p: Point) -> Point {
        let (x, y) = self.apply_scaled(p.x, p.y, 1.0);
        Point::new(x, y)
    }

    pub fn inverse(self) -> Symmetry {
        match self {
            Symmetry::Rotate90 => Symmetry::Rotate270,
            Symmetry::Rotate270 => Symmetry::Rotate90,
            other => other,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn strip_sites() -> Vec<Point> {
        vec![Point::new(0.426, 0.5), Point::new(0.889, 0.5), Point::new(0.074, 0.5)]
    }

    #[test]
    fn single_site_owns_the_square() {
        let cells = voronoi_cells(&[Point::new(0.5, 0.5)]).unwrap();
        assert_eq!(cells.len(), 1);
        assert!((cells[0].area() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn two_sites_split_at_half() {
        let cells = voronoi_cells(&[Point::new(0.25, 0.5), Point::new(0.75, 0.5)]).unwrap();
        assert!((cells[0].area() - 0.5).abs() < 1e-12);
        assert!((cells[1].area() - 0.5).abs() < 1e-12);
        assert!(cells[0].vertices.iter().all(|p| p.x <= 0.5 + 1e-12));
    }

    #[test]
    fn three_strip_cells_match_hand_bisectors() {
        // bisectors at (0.074 + 0.426) / 2 = 0.25 and (0.426 + 0.889) / 2 = 0.6575
        let cells = voronoi_cells(&strip_sites()).unwrap();
        let areas: Vec<f64> = cells.iter().map(Polygon::area).collect();
        let expected = [0.6575 - 0.25, 1.0 - 0.6575, 0.25];
        for (a, e) in areas.iter().zip(expected) {
            assert!((a - e).abs() < 1e-12, "{areas:?}");
        }
        assert!((polygon_area(&cells[2]).unwrap() - 0.25).abs() < 1e-12);
    }

    #[test]
    fn strip_areas_agree_with_nearest_site_counting() {
        let sites = strip_sites();
        let res = 400;
        let mut counts = [0usize; 3];
        for j in 0..res {
            for k in 0..res {
                let p = Point::new((j as f64 + 0.5) / res as f64, (k as f64 + 0.5) / res as f64);
                let best = (0..3)
                    .min_by(|&a, &b| sites[a].distance(&p).total_cmp(&sites[b].distance(&p)))
                    .unwrap();
                counts[best] += 1;
            }
        }
        let cells = voronoi_cells(&sites).unwrap();
        for (c, cell) in counts.iter().zip(&cells) {
            let frac = *c as f64 / (res * res) as f64;
            assert!((frac - cell.area()).abs() < 2.0 / res as f64);
        }
    }

    #[test]
    fn rejects_duplicates_and_outside_points() {
        let dup = [Point::new(0.3, 0.3), Point::new(0.3, 0.3)];
        assert!(matches!(voronoi_cells(&dup), Err(Error::DuplicateSites { .. })));
        let out = [Point::new(1.2, 0.3)];
        assert!(matches!(voronoi_cells(&out), Err(Error::OutOfDomain { .. })));
        assert!(voronoi_cells(&[]).is_err());
    }

    #[test]
    fn polygon_area_basics() {
        assert!((polygon_area(&Polygon::unit_square()).unwrap() - 1.0).abs() < 1e-15);
        let tri = Polygon::new(vec![Point::new(0.0, 0.0), Point::new(1.0, 0.0), Point::new(0.0, 1.0)]);
        assert!((polygon_area(&tri).unwrap() - 0.5).abs() < 1e-15);
        let line = Polygon::new(vec![Point::new(0.0, 0.0), Point::new(1.0, 0.0), Point::new(0.0, 0.0)]);
        assert!(matches!(polygon_area(&line), Err(Error::DegeneratePolygon { .. })));
        assert_eq!(line.area(), 0.0);
    }

    #[test]
    fn distance_integral_of_degenerate_polygon_is_zero() {
        let p = Point::new(0.2, 0.2);
        let poly = Polygon::new(vec![p, Point::new(0.4, 0.4), p]);
        assert_eq!(distance_integral(&poly, &p), 0.0);
    }

    #[test]
    fn distance_integral_converges_under_refinement() {
        let sq = Polygon::unit_square();
        for site in [Point::new(0.5, 0.5), Point::new(0.0, 0.0), Point::new(0.3, 0.9), Point::new(1.4, -0.2)] {
            let a = distance_integral_order(&sq, &site, DEFAULT_QUADRATURE_ORDER);
            let b = distance_integral_order(&sq, &site, 2 * DEFAULT_QUADRATURE_ORDER);
            assert!(((a - b) / b).abs() < 1e-6, "{site:?}: {a} vs {b}");
        }
    }

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let rule = gauss_legendre_unit(5);
        let s: f64 = rule.iter().map(|&(x, w)| w * x.powi(9)).sum();
        assert!((s - 0.1).abs() < 1e-14);
        let total: f64 = rule.iter().map(|&(_, w)| w).sum();
        assert!((total - 1.0).abs() < 1e-14);
    }

    #[test]
    fn symmetries_form_a_group_on_points() {
        let p = Point::new(0.2, 0.7);
        for g in Symmetry::ALL {
            let q = g.inverse().apply(g.apply(p));
            assert!(q.distance(&p) < 1e-15, "{g:?}");
        }
    }
}
