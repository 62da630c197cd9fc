//! Cones of escape directions for the cells of a fan.
//!
//! Curves `exp(r t + g(t) p)` that stay in a fattened cell have limiting unit
//! tangents that depend only on the angular position of `r`. Four special
//! directions give exact cones; every other direction gives an axis ray that
//! is thickened, i.e. lies in the interior of the escape cone for every
//! positive thickness.

use serde::{Deserialize, Serialize};
use std::cmp::Ordering;

use crate::cone::Cone2;
use crate::error::{Error, Result};
use crate::fan::{Cell, Fan2};
use crate::rational::{to_f64, Q};
use crate::vec2::RatVec2;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EscapeCone {
    /// Limit cone as the thickness parameter tends to zero.
    pub limit: Cone2,
    /// Axis directions contained in the interior of the escape cone at every thickness.
    pub thickened: Vec<RatVec2>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EscapeCurveSpec {
    pub r: RatVec2,
    pub p: RatVec2,
    pub alpha: Q,
    pub beta: Q,
}

fn specials() -> [(RatVec2, Cone2); 4] {
    [
        (RatVec2::ints(1, 1), Cone2::quadrant1()),
        (RatVec2::ints(-1, 0), Cone2::half_plane_normal(&RatVec2::ints(-1, 0))),
        (RatVec2::ints(-1, -1), Cone2::quadrant3()),
        (RatVec2::ints(0, -1), Cone2::half_plane_normal(&RatVec2::ints(0, -1))),
    ]
}

/// Limiting-tangent contribution of the direction `r`; the flag marks a thickened axis ray.
pub fn limit_tangent_cone(r: &RatVec2) -> Result<(Cone2, bool)> {
    if r.is_zero() {
        return Err(Error::Invalid("zero direction".into()));
    }
    for (d, c) in specials() {
        if d.same_dir(r) {
            return Ok((c, false));
        }
    }
    let lt = |a: &RatVec2, b: &RatVec2| a.angle_cmp(b) == Ordering::Less;
    let (d45, d180, d225, d270) = (
        RatVec2::ints(1, 1),
        RatVec2::ints(-1, 0),
        RatVec2::ints(-1, -1),
        RatVec2::ints(0, -1),
    );
    let axis = if lt(&d45, r) && lt(r, &d180) {
        RatVec2::ints(0, 1)
    } else if lt(&d180, r) && lt(r, &d225) {
        RatVec2::ints(0, -1)
    } else if lt(&d225, r) && lt(r, &d270) {
        RatVec2::ints(-1, 0)
    } else {
        RatVec2::ints(1, 0)
    };
    Ok((Cone2::Ray(axis), true))
}

/// Escape cone of a non-origin cell.
pub fn escape_cone(fan: &Fan2, cell: Cell) -> Result<EscapeCone> {
    let (a, b) = match cell {
        Cell::Origin => return Err(Error::Invalid("escape cone of the origin cell is undefined".into())),
        Cell::Ray(i) => {
            let (c, thick) = limit_tangent_cone(&fan.rays[i])?;
            let thickened = if thick { c.generators() } else { vec![] };
            return Ok(EscapeCone { limit: c, thickened });
        }
        Cell::Sector(i) => {
            let (a, b) = fan.sector_rays(i);
            (a.clone(), b.clone())
        }
    };
    let sector = fan.cell_cone(cell);
    let mut inner: Vec<RatVec2> = specials()
        .into_iter()
        .map(|(d, _)| d)
        .filter(|d| sector.contains_strict(d))
        .collect();
    // Inside an arc of span at most pi the angular order is the cross-product sign.
    inner.sort_by(|x, y| Q::from_integer(0.into()).cmp(&x.cross(y)));
    let mut breaks = vec![a.clone()];
    breaks.extend(inner.iter().cloned());
    breaks.push(b.clone());
    let mut parts = Vec::new();
    let mut thickened: Vec<RatVec2> = Vec::new();
    for w in breaks.windows(2) {
        let mid = interior_between(&w[0], &w[1]);
        let (c, thick) = limit_tangent_cone(&mid)?;
        if thick {
            for g in c.generators() {
                if !thickened.contains(&g) {
                    thickened.push(g);
                }
            }
        }
        parts.push(c);
    }
    thickened.sort_by(|x, y| x.angle_cmp(y));
    // A diagonal in the open sector fixes the cone outright; otherwise a bounding
    // axis ray adds its half-plane while a bounding diagonal adds nothing.
    // Pieces beyond that quadrant are not escape rays of the cell under this rule.
    if let Some(d) = inner.iter().find(|d| d.x1 == d.x2) {
        let limit = limit_tangent_cone(d)?.0;
        thickened.retain(|t| limit.contains(t));
        return Ok(EscapeCone { limit, thickened });
    }
    for d in inner.iter().chain([&a, &b]) {
        if d.x1 != d.x2 {
            let (c, thick) = limit_tangent_cone(d)?;
            if !thick {
                parts.push(c);
            }
        }
    }
    Ok(EscapeCone { limit: Cone2::hull(&parts), thickened })
}

/// A direction strictly between `a` and `b` counterclockwise, assuming a gap in (0, pi].
fn interior_between(a: &RatVec2, b: &RatVec2) -> RatVec2 {
    let s = a + b;
    if a.cross(b) > Q::from_integer(0.into()) {
        s.primitive()
    } else {
        a.rot_ccw()
    }
}

/// Unit tangent of `exp(r_hat t + g(t) p)` at time `t`, evaluated in log-magnitude form.
pub fn sample_escape_tangent(spec: &EscapeCurveSpec, t: f64) -> Result<[f64; 2]> {
    if !(t > 0.0) {
        return Err(Error::Invalid("t must be positive".into()));
    }
    let r = spec.r.unit_f64();
    let p = spec.p.to_f64();
    let (alpha, beta) = (to_f64(&spec.alpha), to_f64(&spec.beta));
    let decay = (-beta * t).exp();
    let g = 1.0 - alpha * decay;
    let gp = alpha * beta * decay;
    let mut logs = [f64::NEG_INFINITY; 2];
    let mut signs = [0.0; 2];
    for n in 0..2 {
        let f = r[n] + gp * p[n];
        if f != 0.0 {
            logs[n] = r[n] * t + g * p[n] + f.abs().ln();
            signs[n] = f.signum();
        }
    }
    let m = logs[0].max(logs[1]);
    if !m.is_finite() {
        return Err(Error::Numerical("degenerate tangent".into()));
    }
    let v = [signs[0] * (logs[0] - m).exp(), signs[1] * (logs[1] - m).exp()];
    let nrm = v[0].hypot(v[1]);
    Ok([v[0] / nrm, v[1] / nrm])
}
