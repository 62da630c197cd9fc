//! Closed convex cones in the plane.
//!
//! Every cone is stored in canonical form with primitive direction vectors, so
//! structural equality coincides with set equality. Membership, hulls and duals
//! reduce to sign tests on cross and dot products.

use num::{Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::vec2::RatVec2;

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", content = "rays", rename_all = "snake_case")]
pub enum Cone2 {
    Zero,
    Ray(RatVec2),
    /// `span{d, -d}`.
    Line(RatVec2),
    /// Nonnegative combinations of `a` and `b`, with `cross(a, b) > 0`.
    Wedge(RatVec2, RatVec2),
    /// `{w : cross(d, w) >= 0}`.
    HalfPlane(RatVec2),
    Full,
}

impl Cone2 {
    pub fn quadrant1() -> Cone2 {
        Cone2::Wedge(RatVec2::ints(1, 0), RatVec2::ints(0, 1))
    }

    pub fn quadrant3() -> Cone2 {
        Cone2::Wedge(RatVec2::ints(-1, 0), RatVec2::ints(0, -1))
    }

    /// `{v : v . n >= 0}` for a nonzero normal `n`.
    pub fn half_plane_normal(n: &RatVec2) -> Cone2 {
        Cone2::HalfPlane(n.rot_cw().primitive())
    }

    /// Canonical cone of all nonnegative combinations of `vs`; zero vectors are ignored.
    pub fn from_generators(vs: &[RatVec2]) -> Cone2 {
        let mut d: Vec<RatVec2> = vs.iter().filter(|v| !v.is_zero()).map(|v| v.primitive()).collect();
        d.sort_by(|a, b| a.angle_cmp(b));
        d.dedup();
        let n = d.len();
        match n {
            0 => return Cone2::Zero,
            1 => return Cone2::Ray(d[0].clone()),
            _ => {}
        }
        let mut flat = Vec::new();
        for i in 0..n {
            let (a, b) = (&d[i], &d[(i + 1) % n]);
            let c = a.cross(b);
            if c.is_negative() {
                // The unique gap wider than pi; the cone is its complement.
                return Cone2::Wedge(b.clone(), a.clone());
            }
            if c.is_zero() {
                flat.push(i);
            }
        }
        match flat.len() {
            0 => Cone2::Full,
            1 => Cone2::HalfPlane(d[(flat[0] + 1) % n].clone()),
            _ => Cone2::Line(d[0].clone()),
        }
    }

    /// A finite generating set whose conic hull is this cone.
    pub fn generators(&self) -> Vec<RatVec2> {
        match self {
            Cone2::Zero => vec![],
            Cone2::Ray(d) => vec![d.clone()],
            Cone2::Line(d) => vec![d.clone(), -d],
            Cone2::Wedge(a, b) => vec![a.clone(), b.clone()],
            Cone2::HalfPlane(d) => vec![d.clone(), d.rot_ccw(), -d],
            Cone2::Full => vec![
                RatVec2::ints(1, 0),
                RatVec2::ints(0, 1),
                RatVec2::ints(-1, 0),
                RatVec2::ints(0, -1),
            ],
        }
    }

    /// Closed membership; the zero vector belongs to every cone.
    pub fn contains(&self, v: &RatVec2) -> bool {
        if v.is_zero() {
            return true;
        }
        match self {
            Cone2::Zero => false,
            Cone2::Ray(d) => d.same_dir(v),
            Cone2::Line(d) => d.cross(v).is_zero(),
            Cone2::Wedge(a, b) => !a.cross(v).is_negative() && !v.cross(b).is_negative(),
            Cone2::HalfPlane(d) => !d.cross(v).is_negative(),
            Cone2::Full => true,
        }
    }

    /// Membership in the topological interior.
    pub fn contains_strict(&self, v: &RatVec2) -> bool {
        if v.is_zero() {
            return false;
        }
        match self {
            Cone2::Zero | Cone2::Ray(_) | Cone2::Line(_) => false,
            Cone2::Wedge(a, b) => a.cross(v).is_positive() && v.cross(b).is_positive(),
            Cone2::HalfPlane(d) => d.cross(v).is_positive(),
            Cone2::Full => true,
        }
    }

    pub fn contains_with(&self, v: &RatVec2, strict: bool) -> bool {
        if strict {
            self.contains_strict(v)
        } else {
            self.contains(v)
        }
    }

    pub fn is_subset_of(&self, other: &Cone2) -> bool {
        self.generators().iter().all(|g| other.contains(g))
    }

    pub fn is_solid(&self) -> bool {
        matches!(self, Cone2::Wedge(..) | Cone2::HalfPlane(_) | Cone2::Full)
    }

    /// Smallest cone containing every input.
    pub fn hull(cs: &[Cone2]) -> Cone2 {
        let gens: Vec<RatVec2> = cs.iter().flat_map(|c| c.generators()).collect();
        Cone2::from_generators(&gens)
    }

    /// `{v : v . w >= 0 for all w in self}`.
    pub fn dual(&self) -> Cone2 {
        match self {
            Cone2::Zero => Cone2::Full,
            Cone2::Full => Cone2::Zero,
            Cone2::Ray(d) => Cone2::half_plane_normal(d),
            Cone2::Line(d) => Cone2::from_generators(&[d.rot_ccw(), d.rot_cw()]),
            Cone2::Wedge(a, b) => Cone2::Wedge(b.rot_cw(), a.rot_ccw()),
            Cone2::HalfPlane(d) => Cone2::Ray(d.rot_ccw()),
        }
    }

    pub fn neg(&self) -> Cone2 {
        match self {
            Cone2::Zero => Cone2::Zero,
            Cone2::Full => Cone2::Full,
            Cone2::Ray(d) => Cone2::Ray(-d),
            Cone2::Line(d) => Cone2::from_generators(&[d.clone(), -d]),
            Cone2::Wedge(a, b) => Cone2::Wedge(-a, -b),
            Cone2::HalfPlane(d) => Cone2::HalfPlane(-d),
        }
    }

    /// Polar cone `-self*`.
    pub fn negative_dual(&self) -> Cone2 {
        self.dual().neg()
    }

    /// Image under rotation by +90 degrees.
    pub fn rot_ccw(&self) -> Cone2 {
        match self {
            Cone2::Zero => Cone2::Zero,
            Cone2::Full => Cone2::Full,
            Cone2::Ray(d) => Cone2::Ray(d.rot_ccw()),
            Cone2::Line(d) => Cone2::from_generators(&[d.rot_ccw(), -&d.rot_ccw()]),
            Cone2::Wedge(a, b) => Cone2::Wedge(a.rot_ccw(), b.rot_ccw()),
            Cone2::HalfPlane(d) => Cone2::HalfPlane(d.rot_ccw()),
        }
    }

    /// Directions `v` with `det(w, v) >= 0` for every `w` in the cone, i.e. the edge
    /// directions whose clockwise normal supports the cone.
    pub fn supporting_directions(&self) -> Cone2 {
        self.dual().rot_ccw()
    }

    /// A direction in the relative interior, or `None` for the zero cone.
    pub fn interior_direction(&self) -> Option<RatVec2> {
        match self {
            Cone2::Zero => None,
            Cone2::Ray(d) | Cone2::Line(d) => Some(d.clone()),
            Cone2::Wedge(a, b) => Some((a + b).primitive()),
            Cone2::HalfPlane(d) => Some(d.rot_ccw()),
            Cone2::Full => Some(RatVec2::ints(1, 0)),
        }
    }

    /// Closed angular arc `(start, end)` traversed counterclockwise, for cones that are
    /// neither lines, zero nor the full plane.
    pub fn arc(&self) -> Option<(RatVec2, RatVec2)> {
        match self {
            Cone2::Ray(d) => Some((d.clone(), d.clone())),
            Cone2::Wedge(a, b) => Some((a.clone(), b.clone())),
            Cone2::HalfPlane(d) => Some((d.clone(), -d)),
            _ => None,
        }
    }
}

/// A nonzero vector in `k` and in the interior of `b`, if one exists.
///
/// Both sets are angular arcs, so their intersection is a single arc whose
/// endpoints come from the two boundaries; the sum of its endpoints (or a
/// rotated endpoint when the arc is a half-plane) is a deterministic midpoint.
pub fn open_intersection_witness(k: &Cone2, b: &Cone2) -> Option<RatVec2> {
    if !b.is_solid() || matches!(k, Cone2::Zero) {
        return None;
    }
    let kg = k.generators();
    let bg = b.generators();
    let mut cands: Vec<RatVec2> = Vec::new();
    let all: Vec<&RatVec2> = kg.iter().chain(bg.iter()).collect();
    for i in 0..all.len() {
        for j in (i + 1)..all.len() {
            let s = all[i] + all[j];
            if !s.is_zero() {
                cands.push(s.primitive());
            }
        }
    }
    for g in &all {
        cands.push(g.rot_ccw());
        cands.push(g.rot_cw());
        cands.push((*g).clone());
    }
    cands.into_iter().find(|v| k.contains(v) && b.contains_strict(v))
}
