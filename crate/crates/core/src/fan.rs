//! Complete planar fans, their cells, and the fattened cover in log space.
//!
//! A fan is a counterclockwise list of primitive rays whose cyclic gaps are at
//! most pi. Sector `i` lies between ray `i` and ray `i + 1` (indices mod n).
//! The fattened cover of log space uses strips of half-width `|log varrho|`
//! around the rays, the region within that distance of two rays around the
//! origin, and what remains of each sector.

use num::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::cone::Cone2;
use crate::error::{Error, Result};
use crate::rational::{to_f64, Q};
use crate::vec2::RatVec2;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "cell", content = "index", rename_all = "snake_case")]
pub enum Cell {
    Origin,
    Ray(usize),
    Sector(usize),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fan2 {
    pub rays: Vec<RatVec2>,
    #[serde(with = "crate::rational::serde_q")]
    pub varrho: Q,
    /// Antipodal rays added to keep every sector convex.
    #[serde(default)]
    pub inserted: Vec<RatVec2>,
}

fn check_varrho(varrho: &Q) -> Result<()> {
    if !varrho.is_positive() || *varrho >= Q::one() {
        return Err(Error::Invalid(format!("varrho must lie in (0,1), got {varrho}")));
    }
    Ok(())
}

fn sorted_primitive(dirs: &[RatVec2]) -> Vec<RatVec2> {
    let mut d: Vec<RatVec2> = dirs.iter().filter(|v| !v.is_zero()).map(|v| v.primitive()).collect();
    d.sort_by(|a, b| a.angle_cmp(b));
    d.dedup();
    d
}

impl Fan2 {
    /// Fan with the given rays, adding antipodes until every cyclic gap is at most pi.
    pub fn from_rays(dirs: &[RatVec2], varrho: Q) -> Result<Fan2> {
        check_varrho(&varrho)?;
        let mut rays = sorted_primitive(dirs);
        if rays.is_empty() {
            return Err(Error::Invalid("fan needs at least one nonzero direction".into()));
        }
        let mut inserted = Vec::new();
        loop {
            let n = rays.len();
            let wide = (0..n).find(|&i| n == 1 || rays[i].cross(&rays[(i + 1) % n]).is_negative());
            match wide {
                None => break,
                Some(i) => {
                    let anti = -&rays[i];
                    inserted.push(anti.clone());
                    rays.push(anti);
                    rays = sorted_primitive(&rays);
                }
            }
        }
        Ok(Fan2 { rays, varrho, inserted })
    }

    /// Fan of outward edge normals of the convex hull of `points`.
    pub fn normal(points: &[RatVec2], varrho: Q) -> Result<Fan2> {
        let hull = convex_hull(points);
        if hull.len() < 2 {
            return Err(Error::Invalid("normal fan needs two distinct points".into()));
        }
        let n = hull.len();
        let normals: Vec<RatVec2> = (0..n).map(|i| (&hull[(i + 1) % n] - &hull[i]).rot_cw()).collect();
        Fan2::from_rays(&normals, varrho)
    }

    /// Coarsest fan on whose open sectors the order of the forms `<., s_i>` is constant.
    pub fn comparison(sources: &[RatVec2], varrho: Q) -> Result<Fan2> {
        let mut s = sources.to_vec();
        s.sort_by(|a, b| a.x1.cmp(&b.x1).then(a.x2.cmp(&b.x2)));
        s.dedup();
        if s.len() < 2 {
            return Err(Error::Invalid("comparison fan needs two distinct sources".into()));
        }
        let mut rays = Vec::new();
        for i in 0..s.len() {
            for j in (i + 1)..s.len() {
                let p = (&s[i] - &s[j]).rot_ccw();
                rays.push(-&p);
                rays.push(p);
            }
        }
        Fan2::from_rays(&rays, varrho)
    }

    /// Common refinement; keeps this fan's `varrho`.
    pub fn refine(&self, other: &Fan2) -> Fan2 {
        let all: Vec<RatVec2> = self.rays.iter().chain(other.rays.iter()).cloned().collect();
        let mut f = Fan2::from_rays(&all, self.varrho.clone()).expect("nonempty rays");
        f.inserted = self.inserted.iter().chain(other.inserted.iter()).cloned().collect();
        f
    }

    pub fn with_varrho(&self, varrho: Q) -> Result<Fan2> {
        check_varrho(&varrho)?;
        Ok(Fan2 { varrho, ..self.clone() })
    }

    pub fn n(&self) -> usize {
        self.rays.len()
    }

    /// Strip half-width `|log varrho|`.
    pub fn width(&self) -> f64 {
        -to_f64(&self.varrho).ln()
    }

    /// All cells: origin, rays, then sectors.
    pub fn cells(&self) -> Vec<Cell> {
        let n = self.n();
        std::iter::once(Cell::Origin)
            .chain((0..n).map(Cell::Ray))
            .chain((0..n).map(Cell::Sector))
            .collect()
    }

    pub fn nonorigin_cells(&self) -> Vec<Cell> {
        self.cells().into_iter().filter(|c| *c != Cell::Origin).collect()
    }

    /// Non-origin cells in counterclockwise order starting with ray 0.
    pub fn cyclic_cells(&self) -> Vec<Cell> {
        (0..self.n()).flat_map(|i| [Cell::Ray(i), Cell::Sector(i)]).collect()
    }

    pub fn sector_rays(&self, i: usize) -> (&RatVec2, &RatVec2) {
        (&self.rays[i], &self.rays[(i + 1) % self.n()])
    }

    /// Sectors adjacent to ray `i`: the one ending at it and the one starting at it.
    pub fn ray_neighbors(&self, i: usize) -> (usize, usize) {
        ((i + self.n() - 1) % self.n(), i)
    }

    /// The closed convex cone of a cell in log space.
    pub fn cell_cone(&self, c: Cell) -> Cone2 {
        match c {
            Cell::Origin => Cone2::Zero,
            Cell::Ray(i) => Cone2::Ray(self.rays[i].clone()),
            Cell::Sector(i) => {
                let (a, b) = self.sector_rays(i);
                if a.cross(b).is_zero() {
                    Cone2::HalfPlane(a.clone())
                } else {
                    Cone2::Wedge(a.clone(), b.clone())
                }
            }
        }
    }

    /// Interior evaluation direction: the ray itself, or the sum of the bounding rays.
    pub fn cell_direction(&self, c: Cell) -> Option<RatVec2> {
        match c {
            Cell::Origin => None,
            Cell::Ray(i) => Some(self.rays[i].clone()),
            Cell::Sector(i) => {
                let (a, b) = self.sector_rays(i);
                let s = a + b;
                Some(if s.is_zero() { a.rot_ccw() } else { s.primitive() })
            }
        }
    }

    /// The cell whose cone contains direction `d` in its relative interior.
    pub fn cell_of_direction(&self, d: &RatVec2) -> Cell {
        for (i, r) in self.rays.iter().enumerate() {
            if r.same_dir(d) {
                return Cell::Ray(i);
            }
        }
        for i in 0..self.n() {
            if self.cell_cone(Cell::Sector(i)).contains(d) {
                return Cell::Sector(i);
            }
        }
        unreachable!("complete fan covers every direction")
    }

    /// Euclidean distances from a log-space point to every ray.
    pub fn ray_distances(&self, p: [f64; 2]) -> Vec<f64> {
        self.rays.iter().map(|r| dist_to_ray(p, r.unit_f64())).collect()
    }

    /// Cells whose fattened region contains the log-space point `p`, enlarged by `tol`.
    pub fn locate_log(&self, p: [f64; 2], tol: f64) -> Vec<Cell> {
        let w = self.width();
        let d = self.ray_distances(p);
        let mut out = Vec::new();
        let near = d.iter().filter(|&&x| x <= w + tol).count();
        let deep = d.iter().filter(|&&x| x < w - tol).count();
        if near >= 2 {
            out.push(Cell::Origin);
        }
        if deep < 2 {
            for (i, &di) in d.iter().enumerate() {
                if di <= w + tol {
                    out.push(Cell::Ray(i));
                }
            }
        }
        if d.iter().all(|&x| x >= w - tol) {
            for i in 0..self.n() {
                let (a, b) = self.sector_rays(i);
                if dist_to_sector(p, a.unit_f64(), b.unit_f64()) <= tol {
                    out.push(Cell::Sector(i));
                }
            }
        }
        out
    }

    /// Cells whose fattened region contains `log x`.
    pub fn locate_cells(&self, x: [f64; 2], tol: f64) -> Result<Vec<Cell>> {
        if !(x[0] > 0.0 && x[1] > 0.0) {
            return Err(Error::Invalid(format!("point must be positive, got {x:?}")));
        }
        Ok(self.locate_log([x[0].ln(), x[1].ln()], tol))
    }

    /// Exact-tolerance membership test for one cell's fattened region.
    pub fn fat_contains(&self, c: Cell, p: [f64; 2]) -> bool {
        self.locate_log(p, 0.0).contains(&c)
    }
}

fn dist_to_ray(p: [f64; 2], u: [f64; 2]) -> f64 {
    let along = p[0] * u[0] + p[1] * u[1];
    if along >= 0.0 {
        (p[0] * u[1] - p[1] * u[0]).abs()
    } else {
        p[0].hypot(p[1])
    }
}

/// Distance from `p` to the closed sector swept counterclockwise from `a` to `b` (span <= pi).
fn dist_to_sector(p: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    let ca = a[0] * p[1] - a[1] * p[0];
    let cb = p[0] * b[1] - p[1] * b[0];
    let span = a[0] * b[1] - a[1] * b[0];
    let inside = if span > 1e-15 {
        ca >= 0.0 && cb >= 0.0
    } else {
        // Half-plane sector.
        ca >= 0.0
    };
    if inside {
        0.0
    } else {
        dist_to_ray(p, a).min(dist_to_ray(p, b))
    }
}

/// Counterclockwise convex hull without collinear points; a segment yields its two ends.
pub fn convex_hull(points: &[RatVec2]) -> Vec<RatVec2> {
    let mut p = points.to_vec();
    p.sort_by(|a, b| a.x1.cmp(&b.x1).then(a.x2.cmp(&b.x2)));
    p.dedup();
    if p.len() < 3 {
        return p;
    }
    let turn = |o: &RatVec2, a: &RatVec2, b: &RatVec2| (a - o).cross(&(b - o));
    let mut lower: Vec<RatVec2> = Vec::new();
    for x in &p {
        while lower.len() >= 2 && !turn(&lower[lower.len() - 2], &lower[lower.len() - 1], x).is_positive() {
            lower.pop();
        }
        lower.push(x.clone());
    }
    let mut upper: Vec<RatVec2> = Vec::new();
    for x in p.iter().rev() {
        while upper.len() >= 2 && !turn(&upper[upper.len() - 2], &upper[upper.len() - 1], x).is_positive() {
            upper.pop();
        }
        upper.push(x.clone());
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    lower
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::q;

    fn v(a: i64, b: i64) -> RatVec2 {
        RatVec2::ints(a, b)
    }

    fn vs(p: &[(i64, i64)]) -> Vec<RatVec2> {
        p.iter().map(|&(a, b)| v(a, b)).collect()
    }

    #[test]
    fn axes_fan() {
        let f = Fan2::from_rays(&vs(&[(0, -1), (1, 0), (-1, 0), (0, 1)]), q(1, 2)).unwrap();
        assert_eq!(f.rays, vs(&[(1, 0), (0, 1), (-1, 0), (0, -1)]));
        assert!(f.inserted.is_empty());
    }

    #[test]
    fn single_ray_gets_antipode() {
        let f = Fan2::from_rays(&vs(&[(1, 1)]), q(1, 2)).unwrap();
        assert_eq!(f.rays, vs(&[(1, 1), (-1, -1)]));
        assert_eq!(f.inserted, vs(&[(-1, -1)]));
    }

    #[test]
    fn wide_gap_is_split() {
        let f = Fan2::from_rays(&vs(&[(1, 0), (0, 1)]), q(1, 2)).unwrap();
        for i in 0..f.n() {
            let (a, b) = f.sector_rays(i);
            assert!(!a.cross(b).is_negative());
        }
    }

    #[test]
    fn errors() {
        assert!(Fan2::from_rays(&vs(&[(0, 0)]), q(1, 2)).is_err());
        assert!(Fan2::from_rays(&vs(&[(1, 0)]), q(3, 2)).is_err());
        assert!(Fan2::normal(&vs(&[(1, 1), (1, 1)]), q(1, 2)).is_err());
        assert!(Fan2::comparison(&vs(&[(1, 1)]), q(1, 2)).is_err());
    }

    #[test]
    fn reaction_network_normal_fan() {
        let f = Fan2::normal(&vs(&[(0, 1), (1, 2), (1, 0), (1, 1), (2, 2)]), q(1, 2)).unwrap();
        assert_eq!(f.rays, vs(&[(0, 1), (-1, 1), (-1, -1), (2, -1)]));
        assert!(f.inserted.is_empty());
    }

    #[test]
    fn square_and_segment_normal_fans() {
        let f = Fan2::normal(&vs(&[(0, 0), (1, 0), (1, 1), (0, 1)]), q(1, 2)).unwrap();
        assert_eq!(f.rays, vs(&[(1, 0), (0, 1), (-1, 0), (0, -1)]));
        let g = Fan2::normal(&vs(&[(0, 0), (1, 1)]), q(1, 2)).unwrap();
        assert!(g.rays.contains(&v(1, -1)) && g.rays.contains(&v(-1, 1)));
    }

    #[test]
    fn comparison_fans() {
        let f = Fan2::comparison(&vs(&[(1, 0), (1, 1), (0, 1)]), q(1, 2)).unwrap();
        assert_eq!(f.rays, vs(&[(1, 0), (1, 1), (0, 1), (-1, 0), (-1, -1), (0, -1)]));
        let g = Fan2::comparison(&vs(&[(0, 0), (1, 0)]), q(1, 2)).unwrap();
        assert_eq!(g.rays, vs(&[(0, 1), (0, -1)]));
        let h = Fan2::comparison(&vs(&[(0, 0), (1, 0), (0, 1)]), q(1, 2)).unwrap();
        assert_eq!(h.rays, vs(&[(1, 0), (1, 1), (0, 1), (-1, 0), (-1, -1), (0, -1)]));
    }

    #[test]
    fn refinement() {
        let axes = Fan2::from_rays(&vs(&[(1, 0), (0, 1), (-1, 0), (0, -1)]), q(1, 2)).unwrap();
        let diag = Fan2::from_rays(&vs(&[(1, 1), (-1, 1), (-1, -1), (1, -1)]), q(1, 2)).unwrap();
        assert_eq!(axes.refine(&diag).n(), 8);
        assert_eq!(axes.refine(&axes).rays, axes.rays);
        let mlv = Fan2::comparison(&vs(&[(1, 0), (1, 1), (0, 1)]), q(1, 2)).unwrap();
        assert_eq!(mlv.refine(&axes).n(), 6);
    }

    #[test]
    fn locate_examples() {
        let f = Fan2::from_rays(&vs(&[(1, 0), (1, 1), (0, 1), (-1, 0), (-1, -1), (0, -1)]), q(1, 2)).unwrap();
        assert_eq!(f.locate_cells([1.0, 1.0], 0.0).unwrap(), vec![Cell::Origin]);
        assert!(f.locate_cells([0.0, 1.0], 0.0).is_err());
        // varrho = e^-1 is approximated from above by 37/100 (width 0.994).
        let g = f.with_varrho(q(37, 100)).unwrap();
        let e3 = 3f64.exp();
        assert_eq!(g.locate_cells([e3, e3], 0.0).unwrap(), vec![Cell::Ray(1)]);
        assert_eq!(g.locate_cells([e3, 1.5f64.exp()], 0.0).unwrap(), vec![Cell::Sector(0)]);
    }
}
