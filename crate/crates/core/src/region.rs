//! Forward-invariant polygons for certified cone inclusions.
//!
//! Every fattened cell carries one or two scaffold curves `(a1 t^m1, a2 t^m2)`
//! running off to infinity inside it. A polygon is threaded clockwise through
//! the scaffolds, starting on the cell that contains the direction `(-1, 0)`:
//! each edge leaves its vertex along a direction separating the cell's cone
//! from its escape directions and ends where it meets the next scaffold, and a
//! vertical edge closes the loop. The construction is a search; soundness rests
//! on `verify_region`, which checks `det(w, v) >= 0` exactly for every edge
//! direction `v` and every generator `w` of every cell the edge may touch. With
//! clockwise vertices that is `w . n >= 0` for the inward normal `n = rot_cw(v)`.

use num::{Signed, Zero};
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;

use crate::certify::certify_te;
use crate::cone::Cone2;
use crate::error::{Error, Result};
use crate::escape::escape_cone;
use crate::fan::{Cell, Fan2};
use crate::inclusion::ConeDI;
use crate::rational::{from_f64, to_f64, Q};
use crate::vec2::RatVec2;

/// `(a1 t^m1, a2 t^m2)` for `t >= t0`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScaffoldCurve {
    pub cell: Cell,
    #[serde(with = "crate::rational::serde_q")]
    pub a1: Q,
    #[serde(with = "crate::rational::serde_q")]
    pub a2: Q,
    #[serde(with = "crate::rational::serde_q")]
    pub m1: Q,
    #[serde(with = "crate::rational::serde_q")]
    pub m2: Q,
    #[serde(with = "crate::rational::serde_q")]
    pub t0: Q,
}

impl ScaffoldCurve {
    pub fn new(cell: Cell, a: [f64; 2], m: &RatVec2) -> ScaffoldCurve {
        ScaffoldCurve {
            cell,
            a1: from_f64(a[0]),
            a2: from_f64(a[1]),
            m1: m.x1.clone(),
            m2: m.x2.clone(),
            t0: Q::from_integer(1.into()),
        }
    }

    /// Log of the point at parameter `exp(u)`.
    pub fn log_point(&self, u: f64) -> [f64; 2] {
        [to_f64(&self.a1).ln() + u * to_f64(&self.m1), to_f64(&self.a2).ln() + u * to_f64(&self.m2)]
    }

    pub fn point(&self, t: f64) -> [f64; 2] {
        let l = self.log_point(t.ln());
        [l[0].exp(), l[1].exp()]
    }

    fn point_u(&self, u: f64) -> [f64; 2] {
        let l = self.log_point(u);
        [l[0].exp(), l[1].exp()]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellScaffolds {
    pub cell: Cell,
    /// In clockwise order.
    pub curves: Vec<ScaffoldCurve>,
}

/// Which cells carry two scaffolds.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Doubling {
    /// Cells containing `(1,1)`, `(0,1)`, `(1,0)` or `(-1,-1)`.
    Special,
    None,
    All,
}

fn special_cells(fan: &Fan2) -> BTreeSet<Cell> {
    [(1, 1), (0, 1), (1, 0), (-1, -1)]
        .iter()
        .map(|&(a, b)| fan.cell_of_direction(&RatVec2::ints(a, b)))
        .collect()
}

fn unit(v: [f64; 2]) -> [f64; 2] {
    let n = v[0].hypot(v[1]);
    [v[0] / n, v[1] / n]
}

/// Smallest shift along `dir` after which every `corner + s dir + u m`, `u >= 0`,
/// lies in the cell; shared by sibling curves so they start level.
fn entry_shift(fan: &Fan2, cell: Cell, dir: [f64; 2], starts: &[([f64; 2], [f64; 2])]) -> Result<f64> {
    let w = fan.width();
    let step = w / 8.0;
    for k in 0..4000 {
        let s = k as f64 * step;
        let ok = starts.iter().all(|(corner, m)| {
            let base = [corner[0] + s * dir[0], corner[1] + s * dir[1]];
            (0..40).all(|j| {
                let u = j as f64 * w / 4.0;
                fan.locate_log([base[0] + u * m[0], base[1] + u * m[1]], 0.05 * w).iter().all(|c| *c == cell)
            })
        });
        if ok {
            return Ok(s);
        }
    }
    Err(Error::Construction(format!("no scaffold fits inside {cell:?}")))
}

fn curves_for(fan: &Fan2, cell: Cell, double: bool) -> Result<Vec<ScaffoldCurve>> {
    let w = fan.width();
    let two = Q::from_integer(2.into());
    let (dir, starts): ([f64; 2], Vec<([f64; 2], RatVec2)>) = match cell {
        Cell::Origin => return Err(Error::Invalid("the origin cell has no scaffold".into())),
        Cell::Ray(i) => {
            let r = &fan.rays[i];
            let u = r.unit_f64();
            let p = [-u[1], u[0]];
            let offsets: Vec<f64> = if double { vec![w / 2.0, -w / 2.0] } else { vec![0.0] };
            (u, offsets.into_iter().map(|o| ([o * p[0], o * p[1]], r.clone())).collect())
        }
        Cell::Sector(i) => {
            let (a, b) = fan.sector_rays(i);
            let (ua, ub) = (a.unit_f64(), b.unit_f64());
            let flat = a.cross(b).is_zero();
            let bis = if flat { [-ua[1], ua[0]] } else { unit([ua[0] + ub[0], ua[1] + ub[1]]) };
            let mids: Vec<RatVec2> = match (flat, double) {
                (true, true) => {
                    let up = a.rot_ccw().scale(&two);
                    vec![(&up - a).primitive(), (&up + a).primitive()]
                }
                (true, false) => vec![a.rot_ccw()],
                (false, true) => vec![(a + &b.scale(&two)).primitive(), (&a.scale(&two) + b).primitive()],
                (false, false) => vec![(a + b).primitive()],
            };
            (bis, mids.into_iter().map(|m| ([w * bis[0], w * bis[1]], m)).collect())
        }
    };
    let probe: Vec<([f64; 2], [f64; 2])> = starts.iter().map(|(c, m)| (*c, m.to_f64())).collect();
    let s = entry_shift(fan, cell, dir, &probe)?;
    Ok(starts
        .iter()
        .map(|(c, m)| {
            let base = [c[0] + s * dir[0], c[1] + s * dir[1]];
            ScaffoldCurve::new(cell, [base[0].exp(), base[1].exp()], m)
        })
        .collect())
}

/// Scaffold curves for every non-origin cell, clockwise within each cell.
pub fn assign_scaffolds(di: &ConeDI, doubling: Doubling) -> Result<Vec<CellScaffolds>> {
    let fan = &di.fan;
    if fan.n() < 3 {
        return Err(Error::Precondition("invariant polygons need a fan with at least three rays".into()));
    }
    let special = special_cells(fan);
    fan.nonorigin_cells()
        .into_iter()
        .map(|cell| {
            let double = match doubling {
                Doubling::Special => special.contains(&cell),
                Doubling::None => false,
                Doubling::All => true,
            };
            Ok(CellScaffolds { cell, curves: curves_for(fan, cell, double)? })
        })
        .collect()
}

/// Intersection of two closed convex cones.
pub fn intersect(a: &Cone2, b: &Cone2) -> Cone2 {
    Cone2::hull(&[a.dual(), b.dual()]).dual()
}

/// Edge directions whose supporting line keeps `k` on the inner side and the
/// escape directions (limit and thickened rays) weakly on the outer side.
pub fn separating_set(k: &Cone2, escape: &crate::escape::EscapeCone) -> Cone2 {
    let mut gens = escape.limit.generators();
    gens.extend(escape.thickened.iter().cloned());
    let b = Cone2::from_generators(&gens);
    intersect(&k.supporting_directions(), &b.supporting_directions().neg())
}

/// Orientation preferences for the separating direction.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClaimCase {
    Any,
    /// `v . y > 0`, or else `v = -x`.
    UpOrLeft,
    /// `v . y >= 0` and `v . x <= 0`.
    UpperLeft,
    /// `v . x > 0` if possible, otherwise `v = y`.
    RightOrUp,
}

pub fn separating_direction(k: &Cone2, escape: &crate::escape::EscapeCone, case: ClaimCase) -> Result<RatVec2> {
    let s = separating_set(k, escape);
    let fallback = s
        .interior_direction()
        .ok_or_else(|| Error::Construction("cone and escape directions cannot be separated".into()))?;
    let x = RatVec2::ints(1, 0);
    let y = RatVec2::ints(0, 1);
    let pick = |t: Cone2, strict: &dyn Fn(&RatVec2) -> bool| t.interior_direction().filter(|d| strict(d));
    let chosen = match case {
        ClaimCase::Any => None,
        ClaimCase::UpOrLeft => pick(intersect(&s, &Cone2::half_plane_normal(&y)), &|d| d.x2.is_positive())
            .or_else(|| s.contains(&-&x).then(|| -&x)),
        ClaimCase::UpperLeft => pick(intersect(&s, &Cone2::Wedge(y.clone(), -&x)), &|_| true),
        ClaimCase::RightOrUp => pick(intersect(&s, &Cone2::half_plane_normal(&x)), &|d| d.x1.is_positive())
            .or_else(|| s.contains(&y).then(|| y.clone())),
    };
    Ok(chosen.unwrap_or(fallback))
}

fn cross(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[1] - a[1] * b[0]
}

fn gap(c: &ScaffoldCurve, u: f64, p: [f64; 2], v: [f64; 2]) -> f64 {
    let s = c.point_u(u);
    cross(v, [s[0] - p[0], s[1] - p[1]])
}

fn bisect(f: &dyn Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let mut flo = f(lo);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if (hi - lo).abs() <= 1e-13 * (1.0 + mid.abs()) {
            break;
        }
        let fm = f(mid);
        if fm == 0.0 {
            return mid;
        }
        if (fm > 0.0) == (flo > 0.0) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Parameter `t` of `s2` where the line through `s1(tau)` with direction `v`
/// meets `s2`, continued from the root nearest `t_seed`.
pub fn slide_gamma(s1: &ScaffoldCurve, s2: &ScaffoldCurve, v: &RatVec2, tau: f64, t_seed: f64) -> Result<f64> {
    if !(tau > 0.0 && t_seed > 0.0) {
        return Err(Error::Invalid("curve parameters must be positive".into()));
    }
    let p = s1.point(tau);
    let vf = v.to_f64();
    let u0 = t_seed.ln();
    let u = root_near(&|u| gap(s2, u, p, vf), u0).ok_or_else(|| {
        Error::Numerical(format!("no intersection bracketed within 200 log-units of t = {t_seed}"))
    })?;
    Ok(u.exp())
}

/// A root of `f` near `u0`, by symmetric bracket expansion and bisection.
fn root_near(f: &dyn Fn(f64) -> f64, u0: f64) -> Option<f64> {
    let f0 = f(u0);
    if f0 == 0.0 {
        return Some(u0);
    }
    let mut d = 1e-4;
    let mut prev = (u0, u0);
    while d < 200.0 {
        let (hi, lo) = (u0 + d, u0 - d);
        if (f(hi) > 0.0) != (f0 > 0.0) {
            return Some(bisect(f, prev.1, hi));
        }
        if (f(lo) > 0.0) != (f0 > 0.0) {
            return Some(bisect(f, lo, prev.0));
        }
        prev = (lo, hi);
        d *= 1.5;
    }
    None
}

/// The open ray `p + s d`, `s > 0`, inside the positive quadrant, with a
/// parameter `z` that keeps both log-coordinates accurate: `s = mid e^z` up to
/// the midpoint, then `s_end - mid e^-z` toward the coordinate that vanishes.
struct Shot {
    p: [f64; 2],
    d: [f64; 2],
    /// Coordinate reaching zero first, and the parameter where it does.
    end: Option<(usize, f64)>,
    mid: f64,
}

enum ShotParam {
    Near(f64),
    /// Distance before the end.
    Far(f64),
}

impl Shot {
    fn new(p: [f64; 2], d: [f64; 2]) -> Shot {
        let end = (0..2)
            .filter(|&i| d[i] < 0.0)
            .map(|i| (i, -p[i] / d[i]))
            .min_by(|a, b| a.1.total_cmp(&b.1));
        let mid = match end {
            Some((_, s)) => 0.5 * s,
            None => p[0].hypot(p[1]) / d[0].hypot(d[1]),
        };
        Shot { p, d, end, mid }
    }

    fn param(&self, z: f64) -> ShotParam {
        match self.end {
            Some(_) if z > 0.0 => ShotParam::Far(self.mid * (-z).exp()),
            _ => ShotParam::Near(self.mid * z.exp()),
        }
    }

    fn point(&self, z: f64) -> [f64; 2] {
        match (self.param(z), self.end) {
            (ShotParam::Far(eps), Some((_, s_end))) => {
                let mut x = [0.0; 2];
                for i in 0..2 {
                    x[i] = if self.d[i] < 0.0 {
                        -self.d[i] * ((-self.p[i] / self.d[i] - s_end) + eps)
                    } else {
                        self.p[i] + self.d[i] * (s_end - eps)
                    };
                }
                x
            }
            (ShotParam::Near(s), _) | (ShotParam::Far(s), None) => {
                [self.p[0] + self.d[0] * s, self.p[1] + self.d[1] * s]
            }
        }
    }

    fn log_point(&self, z: f64) -> [f64; 2] {
        let x = self.point(z);
        [x[0].ln(), x[1].ln()]
    }

    /// Exact point for parameter `z` on the rational ray `p + s d`.
    fn exact(&self, z: f64, p: &RatVec2, d: &RatVec2) -> RatVec2 {
        let s = match (self.param(z), self.end) {
            (ShotParam::Far(eps), Some((i, _))) => {
                let (pi, di) = if i == 0 { (&p.x1, &d.x1) } else { (&p.x2, &d.x2) };
                -(pi / di) - from_f64(eps)
            }
            (ShotParam::Near(s), _) | (ShotParam::Far(s), None) => from_f64(s),
        };
        p + &d.scale(&s)
    }
}

/// Where the ray from `p` along `d` first meets scaffold `c` at a parameter `t >= t0`.
/// Returns the shot parameter and the curve parameter `ln t`.
fn shoot(c: &ScaffoldCurve, shot: &Shot) -> Option<(f64, f64)> {
    shoot_in(c, shot, -700.0, if shot.end.is_some() { 680.0 } else { 600.0 }, None)
}

/// Crossings of `c` by `shot` for `z` in `[z_lo, z_hi)`, scanned at the given step or
/// at the default graded step.
fn shoot_in(c: &ScaffoldCurve, shot: &Shot, z_lo: f64, z_hi: f64, step: Option<f64>) -> Option<(f64, f64)> {
    let la = [to_f64(&c.a1).ln(), to_f64(&c.a2).ln()];
    let m = [to_f64(&c.m1), to_f64(&c.m2)];
    let mm = m[0] * m[0] + m[1] * m[1];
    let h = |z: f64| {
        let l = shot.log_point(z);
        m[0] * (l[1] - la[1]) - m[1] * (l[0] - la[0])
    };
    let along = |z: f64| {
        let l = shot.log_point(z);
        (m[0] * (l[0] - la[0]) + m[1] * (l[1] - la[1])) / mm
    };
    let u_min = to_f64(&c.t0).ln();
    let mut prev: Option<(f64, f64)> = None;
    let mut z = z_lo;
    while z < z_hi {
        let zc = z;
        z += step.unwrap_or(if z.abs() < 40.0 { 0.02 } else { 0.25 });
        let z = zc;
        let v = h(z);
        if !v.is_finite() {
            prev = None;
            continue;
        }
        if let Some((zp, vp)) = prev {
            if (v > 0.0) != (vp > 0.0) {
                let r = bisect(&h, zp, z);
                let u = along(r);
                if u >= u_min {
                    return Some((r, u));
                }
            }
        }
        prev = Some((z, v));
    }
    None
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolygonEdge {
    pub direction: RatVec2,
    /// Clockwise normal, pointing into the polygon.
    pub normal: RatVec2,
    /// Conservative superset of the cells the edge meets.
    pub touched: Vec<Cell>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VertexScaffold {
    pub cell: Cell,
    /// Index into the construction's scaffold list.
    pub curve: usize,
    pub t: f64,
}

/// Fixed construction choices; the family member at `t` starts on the first
/// scaffold at parameter `t` and reuses the edge directions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegionPlan {
    pub curves: Vec<ScaffoldCurve>,
    /// Scaffolds carrying a vertex, in order; starts with 0.
    pub visits: Vec<usize>,
    /// Edge `k` leaves vertex `k`; the last one ends on the vertical through vertex 0.
    pub directions: Vec<RatVec2>,
    /// Curve parameters of the base vertices.
    pub params: Vec<f64>,
    pub t_hat: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellCheck {
    pub cell: Cell,
    /// Minimum of `w . n` over the generators `w` of the cell's cone.
    #[serde(with = "crate::rational::serde_q")]
    pub min_value: Q,
    pub witness: Option<RatVec2>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EdgeCheck {
    pub edge: usize,
    pub cells: Vec<CellCheck>,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub edges: Vec<EdgeCheck>,
    pub simple: bool,
    pub clockwise: bool,
    pub pass: bool,
    pub tol: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InvariantPolygon {
    /// Clockwise, strictly positive.
    pub vertices: Vec<RatVec2>,
    pub edges: Vec<PolygonEdge>,
    pub scaffolds: Vec<Option<VertexScaffold>>,
    pub t_hat: f64,
    /// Every sampled point of the fattened origin cell lies inside.
    pub encloses_origin_cell: bool,
    pub plan: Option<RegionPlan>,
    pub report: Option<VerificationReport>,
}

impl InvariantPolygon {
    pub fn vertices_f64(&self) -> Vec<[f64; 2]> {
        self.vertices.iter().map(|v| v.to_f64()).collect()
    }

    pub fn contains(&self, x: [f64; 2]) -> bool {
        point_in_polygon(&self.vertices_f64(), x)
    }
}

/// Inflation tolerance and subdivision size used by default.
pub const DEFAULT_TOL: f64 = 1e-6;

fn piece_size(fan: &Fan2) -> f64 {
    (0.05 * fan.width()).min(0.2)
}

/// Cells whose fattened regions may meet the segment `p q` (positive endpoints).
pub fn touched_cells(fan: &Fan2, p: [f64; 2], q: [f64; 2], tol: f64) -> BTreeSet<Cell> {
    let h = piece_size(fan);
    let mut out = BTreeSet::new();
    let mut stack = vec![(0.0f64, 1.0f64, 0u32)];
    let at = |s: f64| [p[0] + s * (q[0] - p[0]), p[1] + s * (q[1] - p[1])];
    while let Some((s0, s1, depth)) = stack.pop() {
        let (a, b) = (at(s0), at(s1));
        let lo = [a[0].min(b[0]).ln(), a[1].min(b[1]).ln()];
        let hi = [a[0].max(b[0]).ln(), a[1].max(b[1]).ln()];
        let c = [0.5 * (lo[0] + hi[0]), 0.5 * (lo[1] + hi[1])];
        let r = 0.5 * (hi[0] - lo[0]).hypot(hi[1] - lo[1]);
        if r <= h || depth > 60 {
            out.extend(fan.locate_log(c, r + tol));
        } else {
            let m = 0.5 * (s0 + s1);
            stack.push((s0, m, depth + 1));
            stack.push((m, s1, depth + 1));
        }
    }
    out
}

fn check_edge(di: &ConeDI, v: &RatVec2, cells: &BTreeSet<Cell>, index: usize) -> EdgeCheck {
    let mut checks = Vec::new();
    for &cell in cells {
        let mut min: Option<Q> = None;
        let mut witness = None;
        for g in di.cone(cell).generators() {
            let val = g.cross(v);
            if min.as_ref().map_or(true, |m| val < *m) {
                if val.is_negative() {
                    witness = Some(g.clone());
                }
                min = Some(val);
            }
        }
        checks.push(CellCheck { cell, min_value: min.unwrap_or_else(Q::zero), witness });
    }
    let pass = checks.iter().all(|c| !c.min_value.is_negative());
    EdgeCheck { edge: index, cells: checks, pass }
}

fn orient(a: &RatVec2, b: &RatVec2, c: &RatVec2) -> Q {
    (b - a).cross(&(c - a))
}

fn on_segment(a: &RatVec2, b: &RatVec2, p: &RatVec2) -> bool {
    let (lo1, hi1) = if a.x1 <= b.x1 { (&a.x1, &b.x1) } else { (&b.x1, &a.x1) };
    let (lo2, hi2) = if a.x2 <= b.x2 { (&a.x2, &b.x2) } else { (&b.x2, &a.x2) };
    *lo1 <= p.x1 && p.x1 <= *hi1 && *lo2 <= p.x2 && p.x2 <= *hi2
}

fn segments_meet(a: &RatVec2, b: &RatVec2, c: &RatVec2, d: &RatVec2) -> bool {
    let sgn = |q: Q| if q.is_positive() { 1 } else if q.is_negative() { -1 } else { 0 };
    let (o1, o2, o3, o4) = (sgn(orient(a, b, c)), sgn(orient(a, b, d)), sgn(orient(c, d, a)), sgn(orient(c, d, b)));
    if o1 * o2 < 0 && o3 * o4 < 0 {
        return true;
    }
    (o1 == 0 && on_segment(a, b, c))
        || (o2 == 0 && on_segment(a, b, d))
        || (o3 == 0 && on_segment(c, d, a))
        || (o4 == 0 && on_segment(c, d, b))
}

/// Exact simplicity test for a closed polygon.
pub fn is_simple(vs: &[RatVec2]) -> bool {
    let n = vs.len();
    if n < 3 {
        return false;
    }
    for i in 0..n {
        for j in (i + 1)..n {
            let adjacent = j == i + 1 || (i == 0 && j == n - 1);
            if adjacent {
                continue;
            }
            if segments_meet(&vs[i], &vs[(i + 1) % n], &vs[j], &vs[(j + 1) % n]) {
                return false;
            }
        }
    }
    // Adjacent edges may only share their common vertex.
    (0..n).all(|i| {
        let (a, b, c) = (&vs[i], &vs[(i + 1) % n], &vs[(i + 2) % n]);
        !(orient(a, b, c).is_zero() && (b - a).dot(&(c - b)).is_negative())
    })
}

/// Exact even-odd membership of a point off the boundary.
fn contains_exact(vs: &[RatVec2], p: &RatVec2) -> bool {
    let n = vs.len();
    let mut inside = false;
    for i in 0..n {
        let (a, b) = (&vs[i], &vs[(i + 1) % n]);
        if (a.x2 > p.x2) != (b.x2 > p.x2) {
            let x = &a.x1 + (&p.x2 - &a.x2) * (&b.x1 - &a.x1) / (&b.x2 - &a.x2);
            if p.x1 < x {
                inside = !inside;
            }
        }
    }
    inside
}

/// The boundaries are disjoint and `inner` lies in the interior of `outer`.
pub fn strictly_nested(inner: &[RatVec2], outer: &[RatVec2]) -> bool {
    let (n, m) = (inner.len(), outer.len());
    for i in 0..n {
        for j in 0..m {
            if segments_meet(&inner[i], &inner[(i + 1) % n], &outer[j], &outer[(j + 1) % m]) {
                return false;
            }
        }
    }
    n > 0 && contains_exact(outer, &inner[0])
}

fn signed_area2(vs: &[RatVec2]) -> Q {
    let n = vs.len();
    (0..n).fold(Q::zero(), |acc, i| acc + vs[i].cross(&vs[(i + 1) % n]))
}

/// Exact invariance check of a polygon against an inclusion.
pub fn verify_region(di: &ConeDI, vertices: &[RatVec2], tol: f64) -> (VerificationReport, Vec<PolygonEdge>) {
    let n = vertices.len();
    let mut edges = Vec::new();
    let mut checks = Vec::new();
    let positive = vertices.iter().all(|v| v.is_positive());
    for i in 0..n {
        let (p, q) = (&vertices[i], &vertices[(i + 1) % n]);
        let v = q - p;
        let cells = if positive { touched_cells(&di.fan, p.to_f64(), q.to_f64(), tol) } else { BTreeSet::new() };
        checks.push(check_edge(di, &v, &cells, i));
        edges.push(PolygonEdge { normal: v.rot_cw(), direction: v, touched: cells.into_iter().collect() });
    }
    let simple = positive && is_simple(vertices);
    let clockwise = signed_area2(vertices).is_negative();
    let pass = simple && clockwise && checks.iter().all(|c| c.pass);
    (VerificationReport { edges: checks, simple, clockwise, pass, tol }, edges)
}

/// Even-odd point-in-polygon test.
pub fn point_in_polygon(vs: &[[f64; 2]], x: [f64; 2]) -> bool {
    let n = vs.len();
    let mut inside = false;
    for i in 0..n {
        let (a, b) = (vs[i], vs[(i + 1) % n]);
        if (a[1] > x[1]) != (b[1] > x[1]) {
            let xc = a[0] + (x[1] - a[1]) / (b[1] - a[1]) * (b[0] - a[0]);
            if x[0] < xc {
                inside = !inside;
            }
        }
    }
    inside
}

fn origin_samples(fan: &Fan2) -> Vec<[f64; 2]> {
    let w = fan.width();
    let reach = 4.0 * w;
    let k = 24;
    let mut pts = Vec::new();
    for i in 0..=k {
        for j in 0..=k {
            let p = [-reach + 2.0 * reach * i as f64 / k as f64, -reach + 2.0 * reach * j as f64 / k as f64];
            if fan.fat_contains(Cell::Origin, p) {
                pts.push([p[0].exp(), p[1].exp()]);
            }
        }
    }
    pts
}

/// Candidate edge directions, most preferred first, from the cells at both ends of an edge.
fn candidate_directions(di: &ConeDI, from: Cell, to: Cell, between: &[Cell]) -> Vec<RatVec2> {
    let mut cones = vec![di.cone(from).clone(), di.cone(to).clone()];
    cones.extend(between.iter().map(|c| di.cone(*c).clone()));
    let k = Cone2::hull(&cones);
    let admissible = k.supporting_directions();
    let mut sets = Vec::new();
    let esc: Vec<_> = [from, to].iter().filter_map(|c| escape_cone(&di.fan, *c).ok()).collect();
    if esc.len() == 2 {
        sets.push(intersect(&separating_set(&k, &esc[0]), &separating_set(&k, &esc[1])));
    }
    for e in &esc {
        sets.push(separating_set(&k, e));
    }
    sets.push(admissible);
    let mut out: Vec<RatVec2> = Vec::new();
    let mut seen: Vec<[f64; 2]> = Vec::new();
    for s in sets {
        for d in arc_samples(&s) {
            let u = d.unit_f64();
            if !seen.iter().any(|o| (o[0] - u[0]).abs() + (o[1] - u[1]).abs() < 1e-6) {
                seen.push(u);
                out.push(d);
            }
        }
    }
    out
}

/// Directions spread over a cone, interior points first; exact generators for rays and lines.
fn arc_samples(c: &Cone2) -> Vec<RatVec2> {
    let (start, span) = match c {
        Cone2::Zero => return vec![],
        Cone2::Ray(d) => return vec![d.clone()],
        Cone2::Line(d) => return vec![d.clone(), -d],
        Cone2::Wedge(a, b) => {
            let (fa, fb) = (a.to_f64(), b.to_f64());
            let s = fa[1].atan2(fa[0]);
            let mut e = fb[1].atan2(fb[0]) - s;
            if e <= 0.0 {
                e += std::f64::consts::TAU;
            }
            (s, e)
        }
        Cone2::HalfPlane(d) => {
            let f = d.to_f64();
            (f[1].atan2(f[0]), std::f64::consts::PI)
        }
        Cone2::Full => (0.0, std::f64::consts::TAU),
    };
    let mut out = Vec::new();
    for frac in [0.5, 0.3, 0.7, 0.15, 0.85, 0.05, 0.95] {
        let th = start + span * frac;
        out.push(to_q([th.cos(), th.sin()]));
    }
    // Axis directions strictly inside the arc.
    for (k, axis) in [(1, 0), (0, 1), (-1, 0), (0, -1)].iter().enumerate() {
        let th = k as f64 * std::f64::consts::FRAC_PI_2;
        let mut rel = th - start;
        while rel < 0.0 {
            rel += std::f64::consts::TAU;
        }
        if rel > 1e-6 && rel < span - 1e-6 {
            out.insert(1, RatVec2::ints(axis.0, axis.1));
        }
    }
    out
}

fn to_q(p: [f64; 2]) -> RatVec2 {
    RatVec2::new(from_f64(p[0]), from_f64(p[1]))
}

/// Closing vertex: where the ray from `p` along `d` meets the vertical through `a`.
fn closing_vertex(p: &RatVec2, d: &RatVec2, a: &RatVec2) -> Option<RatVec2> {
    if !d.x1.is_negative() {
        return None;
    }
    let s = (&a.x1 - &p.x1) / &d.x1;
    if !s.is_positive() {
        return None;
    }
    let z = p + &d.scale(&s);
    (z.x2 < a.x2).then_some(z)
}

struct Search<'a> {
    di: &'a ConeDI,
    curves: Vec<ScaffoldCurve>,
    tol: f64,
    budget: usize,
}

/// Where the next edge ends.
#[derive(Clone, Copy)]
enum Target {
    Curve(usize),
    Close,
}

impl<'a> Search<'a> {
    fn edge_ok(&self, p: &RatVec2, q: &RatVec2) -> bool {
        if !(p.is_positive() && q.is_positive()) {
            return false;
        }
        let cells = touched_cells(&self.di.fan, p.to_f64(), q.to_f64(), self.tol);
        check_edge(self.di, &(q - p), &cells, 0).pass
    }

    fn cells(&self, range: std::ops::Range<usize>) -> Vec<Cell> {
        self.curves[range].iter().map(|c| c.cell).collect()
    }

    /// Depth-first threading from the last vertex, which sits on scaffold `at`.
    fn extend(&mut self, at: usize, verts: &mut Vec<RatVec2>, plan: &mut RegionPlan) -> bool {
        let n = self.curves.len();
        let k = verts.len() - 1;
        let from = self.curves[at].cell;
        let mut targets = Vec::new();
        if at + 3 >= n {
            targets.push(Target::Close);
        }
        targets.extend((at + 1..n.min(at + 3)).map(Target::Curve));
        for target in targets {
            let (to, between) = match target {
                // The vertical closing edge answers to the first cell on its own.
                Target::Close if at + 1 < n => (self.curves[at + 1].cell, self.cells(at + 1..n)),
                Target::Close => (self.curves[0].cell, vec![]),
                Target::Curve(j) => (self.curves[j].cell, self.cells(at + 1..j)),
            };
            for d in candidate_directions(self.di, from, to, &between) {
                if self.budget == 0 {
                    return false;
                }
                self.budget -= 1;
                match target {
                    Target::Close => {
                        let Some(z) = closing_vertex(&verts[k], &d, &verts[0]) else { continue };
                        if !self.edge_ok(&verts[k], &z) || !self.edge_ok(&z, &verts[0]) {
                            continue;
                        }
                        verts.push(z);
                        if is_simple(verts) && signed_area2(verts).is_negative() {
                            plan.directions.push(d);
                            return true;
                        }
                        verts.pop();
                    }
                    Target::Curve(j) => {
                        let next = &self.curves[j];
                        let shot = Shot::new(verts[k].to_f64(), d.to_f64());
                        let Some((z, u)) = shoot(next, &shot) else { continue };
                        let q = shot.exact(z, &verts[k], &d);
                        if !self.edge_ok(&verts[k], &q) {
                            continue;
                        }
                        verts.push(q);
                        plan.directions.push(d);
                        plan.params.push(u.exp());
                        plan.visits.push(j);
                        if self.extend(j, verts, plan) {
                            return true;
                        }
                        verts.pop();
                        plan.directions.pop();
                        plan.params.pop();
                        plan.visits.pop();
                    }
                }
            }
        }
        false
    }
}

/// Scaffolds in clockwise threading order, starting on the cell containing `(-1, 0)`.
fn threading_order(di: &ConeDI, doubling: Doubling) -> Result<Vec<ScaffoldCurve>> {
    let scaffolds = assign_scaffolds(di, doubling)?;
    let cyc = di.fan.cyclic_cells();
    let start = di.fan.cell_of_direction(&RatVec2::ints(-1, 0));
    let pos = cyc.iter().position(|c| *c == start).expect("cell in cycle");
    let n = cyc.len();
    let mut out = Vec::new();
    for k in 0..n {
        let cell = cyc[(pos + n - k) % n];
        let s = scaffolds.iter().find(|s| s.cell == cell).expect("scaffold per cell");
        out.extend(s.curves.iter().cloned());
    }
    Ok(out)
}

fn finish(di: &ConeDI, vertices: Vec<RatVec2>, plan: RegionPlan, tol: f64) -> InvariantPolygon {
    let (report, edges) = verify_region(di, &vertices, tol);
    let vf: Vec<[f64; 2]> = vertices.iter().map(|v| v.to_f64()).collect();
    let encloses = origin_samples(&di.fan).iter().all(|x| point_in_polygon(&vf, *x));
    let mut scaffolds: Vec<Option<VertexScaffold>> = plan
        .visits
        .iter()
        .zip(&plan.params)
        .map(|(&i, &t)| Some(VertexScaffold { cell: plan.curves[i].cell, curve: i, t }))
        .collect();
    scaffolds.push(None);
    InvariantPolygon {
        vertices,
        edges,
        scaffolds,
        t_hat: plan.t_hat,
        encloses_origin_cell: encloses,
        plan: Some(plan),
        report: Some(report),
    }
}

/// Constructs and exactly verifies an invariant polygon; `t_hat` is the start
/// parameter on the first scaffold and is enlarged on failure.
pub fn construct_region(di: &ConeDI, t_hat: f64) -> Result<InvariantPolygon> {
    if !(t_hat >= 1.0) {
        return Err(Error::Invalid("t_hat must be at least 1".into()));
    }
    let cert = certify_te(di);
    if !cert.pass {
        return Err(Error::Precondition("the inclusion is not certified".into()));
    }
    let growth = di.fan.width().exp();
    for doubling in [Doubling::Special, Doubling::All, Doubling::None] {
        let curves = threading_order(di, doubling)?;
        let mut t = t_hat;
        for _ in 0..6 {
            let mut search = Search { di, curves: curves.clone(), tol: DEFAULT_TOL, budget: 600 };
            let mut verts = vec![to_q(curves[0].point(t))];
            let mut plan =
                RegionPlan { curves: curves.clone(), visits: vec![0], directions: vec![], params: vec![t], t_hat: t };
            if search.extend(0, &mut verts, &mut plan) {
                let poly = finish(di, verts, plan, DEFAULT_TOL);
                if poly.report.as_ref().map_or(false, |r| r.pass) {
                    return Ok(poly);
                }
            }
            t *= growth;
        }
    }
    Err(Error::Construction(format!("no verified polygon found for t_hat in [{t_hat}, {}]", t_hat * growth.powi(5))))
}

/// Float vertices of the family member at parameter `t`, for membership queries.
pub fn family_vertices(plan: &RegionPlan, t: f64) -> Result<Vec<[f64; 2]>> {
    Ok(family_vertices_hinted(plan, t, None)?.0)
}

/// Half-width of the window searched around a hinted shot parameter.
const HINT_WINDOW: f64 = 0.5;

/// As `family_vertices`, also returning the shot parameters. Hints from a nearby
/// member restrict each search to a window, with the full scan as fallback.
fn family_vertices_hinted(plan: &RegionPlan, t: f64, hints: Option<&[f64]>) -> Result<(Vec<[f64; 2]>, Vec<f64>)> {
    let c = &plan.curves;
    let m = plan.visits.len();
    let mut verts = vec![c[0].point(t)];
    let mut zs = Vec::with_capacity(m - 1);
    for k in 0..m - 1 {
        let p = verts[k];
        let d = plan.directions[k].to_f64();
        let next = &c[plan.visits[k + 1]];
        let shot = Shot::new(p, d);
        let local = hints
            .and_then(|h| h.get(k))
            .and_then(|&z0| shoot_in(next, &shot, z0 - HINT_WINDOW, z0 + HINT_WINDOW, Some(0.01)));
        let (z, _) = local.or_else(|| shoot(next, &shot)).ok_or_else(lost)?;
        zs.push(z);
        verts.push(shot.point(z));
    }
    let d = plan.directions[m - 1].to_f64();
    let p = verts[m - 1];
    let s = (verts[0][0] - p[0]) / d[0];
    verts.push([verts[0][0], p[1] + s * d[1]]);
    Ok((verts, zs))
}

fn lost() -> Error {
    Error::Construction("family member lost its scaffold intersection".into())
}

/// Exactly verified family member at parameter `t >= t_hat`.
pub fn family_member(di: &ConeDI, plan: &RegionPlan, t: f64) -> Result<InvariantPolygon> {
    let c = &plan.curves;
    let m = plan.visits.len();
    let mut verts = vec![to_q(c[0].point(t))];
    let mut params = vec![t];
    for k in 0..m - 1 {
        let d = &plan.directions[k];
        let next = &c[plan.visits[k + 1]];
        let shot = Shot::new(verts[k].to_f64(), d.to_f64());
        let (z, u) = shoot(next, &shot).ok_or_else(lost)?;
        verts.push(shot.exact(z, &verts[k], d));
        params.push(u.exp());
    }
    let z = closing_vertex(&verts[m - 1], &plan.directions[m - 1], &verts[0]).ok_or_else(lost)?;
    verts.push(z);
    let mut p = plan.clone();
    p.params = params;
    p.t_hat = t;
    Ok(finish(di, verts, p, DEFAULT_TOL))
}

/// `inf { t >= t_hat : x in R_t }` by bisection over the family.
pub fn lyapunov_value(poly: &InvariantPolygon, x: [f64; 2]) -> Result<f64> {
    let plan = poly.plan.as_ref().ok_or_else(|| Error::Precondition("polygon carries no construction plan".into()))?;
    let inside = |t: f64, hints: Option<&[f64]>| -> Result<(bool, Vec<f64>)> {
        let (vs, zs) = family_vertices_hinted(plan, t, hints)?;
        Ok((point_in_polygon(&vs, x), zs))
    };
    let lo0 = plan.t_hat;
    if inside(lo0, None)?.0 {
        return Ok(lo0);
    }
    let mut hi = lo0 * 2.0;
    let mut tries = 0;
    let mut zs = loop {
        let (ok, z) = inside(hi, None)?;
        if ok {
            break z;
        }
        hi *= 2.0;
        tries += 1;
        if tries > 200 {
            return Err(Error::Numerical(format!("point {x:?} lies outside every family member up to t = {hi}")));
        }
    };
    let mut lo = (hi / 2.0).max(lo0);
    // Bisect to float resolution so finite differences of the level stay meaningful.
    loop {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let (ok, z) = inside(mid, Some(&zs))?;
        zs = z;
        if ok {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}
