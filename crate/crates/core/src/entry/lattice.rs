use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Point, Symmetry};

/// A lattice point, `(ix, iy)` in steps of `1 / (resolution - 1)`.
///
/// Ordering is lexicographic in `(x1, x2)`, which is the tie-break order for
/// equally profitable locations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Site {
    pub ix: u16,
    pub iy: u16,
}

impl Site {
    pub fn new(ix: u16, iy: u16) -> Self {
        Self { ix, iy }
    }
}

/// Candidate firm locations: a square lattice on the unit square that
/// has an odd number of sites per side, so it contains the center and the
/// edge midpoints.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LocationGrid {
    resolution: usize,
    symmetry_reduction: bool,
}

impl Default for LocationGrid {
    fn default() -> Self {
        Self { resolution: Self::DEFAULT_RESOLUTION, symmetry_reduction: true }
    }
}

impl LocationGrid {
    pub const DEFAULT_RESOLUTION: usize = 33;

    /// `resolution` points per axis; must be odd so that 1/2 is on the
    /// lattice.
    pub fn new(resolution: usize) -> Result<Self> {
        if resolution < 3 || resolution.is_multiple_of(2) || resolution > 1025 {
            return Err(Error::InvalidParameter {
                name: "location_resolution",
                reason: format!("{resolution} must be odd and in 3..=1025"),
            });
        }
        Ok(Self { resolution, symmetry_reduction: true })
    }

    pub fn with_symmetry_reduction(mut self, on: bool) -> Self {
        self.symmetry_reduction = on;
        self
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    pub fn symmetry_reduction(&self) -> bool {
        self.symmetry_reduction
    }

    /// Number of lattice steps per side.
    pub fn side(&self) -> u16 {
        (self.resolution - 1) as u16
    }

    pub fn step(&self) -> f64 {
        1.0 / f64::from(self.side())
    }

    pub fn len(&self) -> usize {
        self.resolution * self.resolution
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn point(&self, s: Site) -> Point {
        let side = f64::from(self.side());
        Point::new(f64::from(s.ix) / side, f64::from(s.iy) / side)
    }

    /// All sites in lexicographic order.
    pub fn sites(&self) -> impl Iterator<Item = Site> + '_ {
        let n = self.resolution as u16;
        (0..n).flat_map(move |ix| (0..n).map(move |iy| Site::new(ix, iy)))
    }

    /// The site at `p`, if `p` lies on the lattice within 1e-9.
    pub fn site_of(&self, p: Point) -> Option<Site> {
        let s = self.nearest(p);
        (self.point(s).distance(&p) <= 1e-9).then_some(s)
    }

    pub fn nearest(&self, p: Point) -> Site {
        let side = f64::from(self.side());
        let snap = |v: f64| (v.clamp(0.0, 1.0) * side).round() as u16;
        Site::new(snap(p.x), snap(p.y))
    }

    pub fn transform(&self, g: Symmetry, s: Site) -> Site {
        let (x, y) = g.apply_scaled(s.ix, s.iy, self.side());
        Site::new(x, y)
    }

    /// Closed fundamental domain of the square's symmetry group:
    /// `ix <= iy <= side / 2`.
    pub fn fundamental_domain(&self) -> Vec<Site> {
        let half = self.side() / 2;
        self.sites().filter(|s| s.ix <= s.iy && s.iy <= half).collect()
    }

    /// Sorted image of `sites` minimized over the symmetry group, and the
    /// map that produces it.
    pub fn canonical(&self, sites: &[Site]) -> (Vec<Site>, Symmetry) {
        let mut best: Option<(Vec<Site>, Symmetry)> = None;
        let mut image = Vec::with_capacity(sites.len());
        for g in Symmetry::ALL {
            image.clear();
            image.extend(sites.iter().map(|&s| self.transform(g, s)));
            image.sort_unstable();
            if best.as_ref().is_none_or(|(b, _)| image < *b) {
                best = Some((image.clone(), g));
            }
        }
        best.expect("symmetry group is non-empty")
    }

    /// Symmetries that map the set `sites` onto itself.
    pub fn stabilizer(&self, sites: &[Site]) -> Vec<Symmetry> {
        let mut sorted = sites.to_vec();
        sorted.sort_unstable();
        Symmetry::ALL
            .into_iter()
            .filter(|&g| {
                let mut image: Vec<Site> = sites.iter().map(|&s| self.transform(g, s)).collect();
                image.sort_unstable();
                image == sorted
            })
            .collect()
    }

    /// The lattice with `factor` times as many steps per side; every site
    /// of `self` is also a site of the result.
    pub fn refined(&self, factor: usize) -> Result<Self> {
        Ok(Self::new((self.resolution - 1) * factor + 1)?.with_symmetry_reduction(self.symmetry_reduction))
    }

    /// Maps a site of `coarse` to the same point on `self`.
    pub fn embed(&self, coarse: &LocationGrid, s: Site) -> Option<Site> {
        let ratio = self.side() / coarse.side();
        (ratio * coarse.side() == self.side()).then(|| Site::new(s.ix * ratio, s.iy * ratio))
    }

    /// Sites within `radius` steps in each axis, in lexicographic order.
    pub fn neighborhood(&self, center: Site, radius: u16) -> Vec<Site> {
        let side = self.side();
        let lo = |v: u16| v.saturating_sub(radius);
        let hi = |v: u16| (v + radius).min(side);
        (lo(center.ix)..=hi(center.ix))
            .flat_map(|ix| (lo(center.iy)..=hi(center.iy)).map(move |iy| Site::new(ix, iy)))
            .collect()
    }

    /// The center and its four axis neighbours.
    pub fn plus(&self, center: Site) -> Vec<Site> {
        let side = self.side();
        let mut out = vec![center];
        if center.ix > 0 {
            out.push(Site::new(center.ix - 1, center.iy));
        }
        if center.ix < side {
            out.push(Site::new(center.ix + 1, center.iy));
        }
        if center.iy > 0 {
            out.push(Site::new(center.ix, center.iy - 1));
        }
        if center.iy < side {
            out.push(Site::new(center.ix, center.iy + 1));
        }
        out.sort_unstable();
        out
    }
}

/// Exact lattice-independent coordinate: a reduced fraction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub(crate) struct Ratio {
    num: u32,
    den: u32,
}

impl Ratio {
    pub(crate) fn new(num: u32, den: u32) -> Self {
        let g = gcd(num, den).max(1);
        Self { num: num / g, den: den / g }
    }

    pub(crate) fn value(self) -> f64 {
        f64::from(self.num) / f64::from(self.den)
    }
}

fn gcd(mut a: u32, mut b: u32) -> u32 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// Lattice-independent point used in cache keys.
pub(crate) type ExactPoint = (Ratio, Ratio);

pub(crate) fn exact(grid: &LocationGrid, s: Site) -> ExactPoint {
    let side = u32::from(grid.side());
    (Ratio::new(u32::from(s.ix), side), Ratio::new(u32::from(s.iy), side))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lattice_contains_halves_and_corners() {
        for res in [5, 9, 33, 37] {
            let g = LocationGrid::new(res).unwrap();
            for p in [(0.0, 0.0), (0.5, 0.5), (1.0, 0.5), (1.0, 1.0)] {
                assert!(g.site_of(Point::from(p)).is_some(), "{res} {p:?}");
            }
        }
        assert!(LocationGrid::new(37).unwrap().site_of(Point::new(1.0 / 3.0, 0.5)).is_some());
        assert!(LocationGrid::new(33).unwrap().site_of(Point::new(1.0 / 3.0, 0.5)).is_none());
        assert!(LocationGrid::new(32).is_err());
    }

    #[test]
    fn fundamental_domain_meets_every_orbit_once() {
        let g = LocationGrid::new(9).unwrap();
        let domain = g.fundamental_domain();
        assert_eq!(domain.len(), 15);
        let mut seen = std::collections::HashSet::new();
        for s in g.sites() {
            let (c, _) = g.canonical(&[s]);
            seen.insert(c[0]);
        }
        assert_eq!(seen.len(), domain.len());
    }

    #[test]
    fn canonical_form_is_invariant() {
        let g = LocationGrid::new(9).unwrap();
        let sites = [Site::new(1, 2), Site::new(7, 3), Site::new(4, 4)];
        let (c, map) = g.canonical(&sites);
        let mut image: Vec<Site> = sites.iter().map(|&s| g.transform(map, s)).collect();
        image.sort_unstable();
        assert_eq!(image, c);
        for sym in Symmetry::ALL {
            let moved: Vec<Site> = sites.iter().map(|&s| g.transform(sym, s)).collect();
            assert_eq!(g.canonical(&moved).0, c);
        }
    }

    #[test]
    fn exact_keys_agree_across_lattices() {
        let coarse = LocationGrid::new(5).unwrap();
        let fine = LocationGrid::new(33).unwrap();
        let s = Site::new(1, 2);
        let f = fine.embed(&coarse, s).unwrap();
        assert_eq!(exact(&coarse, s), exact(&fine, f));
        let (c, _) = coarse.canonical(&[s, Site::new(3, 0)]);
        let (f, _) = fine.canonical(&[fine.embed(&coarse, s).unwrap(), Site::new(24, 0)]);
        let ce: Vec<_> = c.iter().map(|&x| exact(&coarse, x)).collect();
        let fe: Vec<_> = f.iter().map(|&x| exact(&fine, x)).collect();
        assert_eq!(ce, fe);
    }

    #[test]
    fn stabilizer_of_center_is_whole_group() {
        let g = LocationGrid::new(9).unwrap();
        assert_eq!(g.stabilizer(&[Site::new(4, 4)]).len(), 8);
        assert_eq!(g.stabilizer(&[Site::new(0, 4), Site::new(8, 4)]).len(), 4);
    }
}
