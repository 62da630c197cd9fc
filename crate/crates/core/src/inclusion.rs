//! Cone-valued differential inclusions on a fan.
//!
//! The dominance construction ranks monomials on each cell and keeps the cone of
//! the leading reaction vectors, widened slightly where the leading cone is a
//! single ray. The toric construction assigns each cell its polar cone.

use num::{Signed, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cone::Cone2;
use crate::error::{Error, Result};
use crate::fan::{Cell, Fan2};
use crate::rational::Q;
use crate::system::VkSystem;
use crate::vec2::RatVec2;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rule {
    Origin,
    Dominance,
    Toric,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub rule: Rule,
    /// Sources attaining the maximum of `<r*, s>` on the cell.
    #[serde(default)]
    pub dominant_sources: Vec<RatVec2>,
    #[serde(default)]
    pub raw: Option<Cone2>,
    /// Directions `w + eta d` that replaced a side of a ray cone.
    #[serde(default)]
    pub widened: Vec<RatVec2>,
    /// A line-shaped leading cone was replaced by the full plane.
    #[serde(default)]
    pub degenerate: bool,
    /// The cone was enlarged to contain its neighbouring sector cones.
    #[serde(default)]
    pub face_enlarged: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CellCone {
    pub cell: Cell,
    pub cone: Cone2,
    pub provenance: Provenance,
}

/// Entries are stored in `fan.cells()` order.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConeDI {
    pub fan: Fan2,
    pub entries: Vec<CellCone>,
    #[serde(default)]
    pub warnings: Vec<String>,
}

#[derive(Clone, Debug)]
pub enum FanChoice {
    Comparison,
    Normal,
    Custom(Fan2),
}

fn cell_index(fan: &Fan2, c: Cell) -> usize {
    match c {
        Cell::Origin => 0,
        Cell::Ray(i) => 1 + i,
        Cell::Sector(i) => 1 + fan.n() + i,
    }
}

impl ConeDI {
    pub fn varrho(&self) -> &Q {
        &self.fan.varrho
    }

    pub fn entry(&self, c: Cell) -> &CellCone {
        &self.entries[cell_index(&self.fan, c)]
    }

    pub fn cone(&self, c: Cell) -> &Cone2 {
        &self.entry(c).cone
    }

    /// Same cones with a different fattening parameter.
    pub fn with_varrho(&self, varrho: Q) -> Result<ConeDI> {
        Ok(ConeDI { fan: self.fan.with_varrho(varrho)?, ..self.clone() })
    }

    /// Adjacent (ray, sector) pairs and, where `K(sector)` is not inside `K(ray)`, an offending generator.
    pub fn face_pairs(&self) -> Vec<(Cell, Cell, Option<RatVec2>)> {
        let mut out = Vec::new();
        for i in 0..self.fan.n() {
            let (prev, next) = self.fan.ray_neighbors(i);
            for s in [prev, next] {
                let kr = self.cone(Cell::Ray(i));
                let bad = self.cone(Cell::Sector(s)).generators().into_iter().find(|g| !kr.contains(g));
                out.push((Cell::Ray(i), Cell::Sector(s), bad));
            }
        }
        out
    }

    pub fn face_condition_holds(&self) -> bool {
        self.face_pairs().iter().all(|p| p.2.is_none())
    }
}

fn resolve_fan(sys: &VkSystem, choice: &FanChoice, varrho: &Q) -> Result<Fan2> {
    match choice {
        FanChoice::Comparison => Fan2::comparison(&sys.sources(), varrho.clone()),
        FanChoice::Normal => Fan2::normal(&sys.sources(), varrho.clone()),
        FanChoice::Custom(f) => f.with_varrho(varrho.clone()),
    }
}

/// Indices of the terms maximizing `<r, s>`.
fn top_group(terms: &[(RatVec2, Vec<RatVec2>)], r: &RatVec2) -> Vec<usize> {
    let vals: Vec<Q> = terms.iter().map(|t| r.dot(&t.0)).collect();
    let best = vals.iter().max().expect("nonempty").clone();
    (0..terms.len()).filter(|&i| vals[i] == best).collect()
}

/// Replaces a ray `w` by a thin wedge leaning toward the lower-ranked reaction vectors.
fn widen_ray(w: &RatVec2, lower: &[RatVec2], eta: &Q) -> (Cone2, Vec<RatVec2>) {
    let zero = Q::zero();
    let mut ccw: Option<&RatVec2> = None;
    let mut cw: Option<&RatVec2> = None;
    for d in lower {
        let c = w.cross(d);
        if c > zero {
            if ccw.map_or(true, |e| e.cross(d) > zero) {
                ccw = Some(d);
            }
        } else if c < zero && cw.map_or(true, |e| e.cross(d) < zero) {
            cw = Some(d);
        }
    }
    let mut sides = Vec::new();
    if ccw.is_none() && cw.is_none() {
        let perp = w.rot_ccw();
        sides.push(w + &perp.scale(eta));
        sides.push(w - &perp.scale(eta));
    } else {
        for d in [ccw, cw].into_iter().flatten() {
            sides.push(w + &d.scale(eta));
        }
    }
    let mut gens = sides.clone();
    gens.push(w.clone());
    (Cone2::from_generators(&gens), sides)
}

/// Dominance inclusion from the monomial order on each cell.
pub fn build_dominance_di(sys: &VkSystem, choice: &FanChoice, varrho: Q, eta: Q) -> Result<ConeDI> {
    if !eta.is_positive() {
        return Err(Error::Invalid("eta must be positive".into()));
    }
    let fan = resolve_fan(sys, choice, &varrho)?;
    // Canonical term order makes the result independent of input order.
    let mut terms: Vec<(RatVec2, Vec<RatVec2>)> =
        sys.terms.iter().map(|t| (t.source.clone(), t.reactions.clone())).collect();
    terms.sort_by(|a, b| a.0.x1.cmp(&b.0.x1).then(a.0.x2.cmp(&b.0.x2)));

    let mut entries = vec![CellCone {
        cell: Cell::Origin,
        cone: Cone2::Full,
        provenance: Provenance {
            rule: Rule::Origin,
            dominant_sources: vec![],
            raw: None,
            widened: vec![],
            degenerate: false,
            face_enlarged: false,
        },
    }];
    let mut warnings = Vec::new();
    for cell in fan.nonorigin_cells() {
        let r = fan.cell_direction(cell).expect("non-origin");
        let top = top_group(&terms, &r);
        let lead: Vec<RatVec2> = top.iter().flat_map(|&i| terms[i].1.iter().cloned()).collect();
        let lower: Vec<RatVec2> = (0..terms.len())
            .filter(|i| !top.contains(i))
            .flat_map(|i| terms[i].1.iter().cloned())
            .collect();
        let raw = Cone2::from_generators(&lead);
        let mut prov = Provenance {
            rule: Rule::Dominance,
            dominant_sources: top.iter().map(|&i| terms[i].0.clone()).collect(),
            raw: Some(raw.clone()),
            widened: vec![],
            degenerate: false,
            face_enlarged: false,
        };
        let cone = match &raw {
            Cone2::Ray(_) => {
                // The shortest leading vector gives the widest shear.
                let w = lead
                    .iter()
                    .min_by(|a, b| a.dot(a).cmp(&b.dot(b)))
                    .expect("nonempty")
                    .clone();
                let (c, sides) = widen_ray(&w, &lower, &eta);
                prov.widened = sides;
                c
            }
            Cone2::Line(_) | Cone2::Zero => {
                prov.degenerate = true;
                Cone2::Full
            }
            c => c.clone(),
        };
        if let Cell::Sector(i) = cell {
            let (a, b) = fan.sector_rays(i);
            for &t in &top {
                for (j, other) in terms.iter().enumerate() {
                    if top.contains(&j) {
                        continue;
                    }
                    let d = &terms[t].0 - &other.0;
                    if a.dot(&d).is_negative() || b.dot(&d).is_negative() {
                        warnings.push(format!(
                            "sector {i} is split by the tie line of sources {} and {}",
                            terms[t].0, other.0
                        ));
                    }
                }
            }
        }
        entries.push(CellCone { cell, cone, provenance: prov });
    }
    let mut di = ConeDI { fan, entries, warnings };
    enforce_faces(&mut di);
    Ok(di)
}

fn enforce_faces(di: &mut ConeDI) {
    for i in 0..di.fan.n() {
        let (p, s) = di.fan.ray_neighbors(i);
        let hull = Cone2::hull(&[
            di.cone(Cell::Ray(i)).clone(),
            di.cone(Cell::Sector(p)).clone(),
            di.cone(Cell::Sector(s)).clone(),
        ]);
        let k = cell_index(&di.fan, Cell::Ray(i));
        if hull != di.entries[k].cone {
            di.entries[k].cone = hull;
            di.entries[k].provenance.face_enlarged = true;
        }
    }
}

/// Toric inclusion: every cell gets the polar cone of its log-space cone.
pub fn build_toric_di(fan: &Fan2) -> ConeDI {
    let entries = fan
        .cells()
        .into_iter()
        .map(|cell| CellCone {
            cell,
            cone: fan.cell_cone(cell).negative_dual(),
            provenance: Provenance {
                rule: if cell == Cell::Origin { Rule::Origin } else { Rule::Toric },
                dominant_sources: vec![],
                raw: None,
                widened: vec![],
                degenerate: false,
                face_enlarged: false,
            },
        })
        .collect();
    ConeDI { fan: fan.clone(), entries, warnings: vec![] }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingWitness {
    pub cell: Cell,
    pub log_x: [f64; 2],
    pub kappas: Vec<f64>,
    /// Velocity rescaled by the largest monomial.
    pub velocity: [f64; 2],
    pub margin: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellMargin {
    pub cell: Cell,
    /// Smallest signed angle (radians) from a sampled velocity to the boundary of the cone.
    pub min_margin: Option<f64>,
    pub samples: usize,
    #[serde(default)]
    pub note: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingReport {
    pub cells: Vec<CellMargin>,
    pub worst: Option<EmbeddingWitness>,
    pub min_margin: Option<f64>,
    pub pass: bool,
}

fn unit(v: [f64; 2]) -> [f64; 2] {
    let n = v[0].hypot(v[1]);
    [v[0] / n, v[1] / n]
}

fn signed_angle(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] * b[1] - a[1] * b[0]).atan2(a[0] * b[0] + a[1] * b[1])
}

/// Signed angular distance from `v` to the boundary of `k`: positive inside the interior.
pub fn angular_margin(k: &Cone2, v: [f64; 2]) -> f64 {
    if v[0] == 0.0 && v[1] == 0.0 {
        return if matches!(k, Cone2::Full) { std::f64::consts::PI } else { 0.0 };
    }
    match k {
        Cone2::Full => std::f64::consts::PI,
        Cone2::Zero => -std::f64::consts::PI,
        Cone2::Ray(d) => -signed_angle(d.to_f64(), v).abs(),
        Cone2::Line(d) => {
            let t = signed_angle(d.to_f64(), v).abs();
            -t.min(std::f64::consts::PI - t)
        }
        Cone2::Wedge(a, b) => signed_angle(a.to_f64(), v).min(signed_angle(v, b.to_f64())),
        Cone2::HalfPlane(d) => {
            let t = signed_angle(d.to_f64(), v);
            t.min(std::f64::consts::PI - t)
        }
    }
}

/// Log-space sample points in the fattened region of `cell` at radius `r`.
fn sample_points(fan: &Fan2, cell: Cell, r: f64, samples: usize) -> Vec<[f64; 2]> {
    let w = fan.width() * (1.0 + 1e-9);
    let grid = |k: usize| if samples == 1 { 0.5 } else { k as f64 / (samples - 1) as f64 };
    let mut pts = Vec::new();
    match cell {
        Cell::Origin => {}
        Cell::Ray(i) => {
            let u = fan.rays[i].unit_f64();
            let perp = [-u[1], u[0]];
            let half = fan.width() * (1.0 - 1e-9);
            for k in 0..samples {
                let s = -half + 2.0 * half * grid(k);
                pts.push([r * u[0] + s * perp[0], r * u[1] + s * perp[1]]);
            }
        }
        Cell::Sector(i) => {
            let (a, b) = fan.sector_rays(i);
            let (ua, ub) = (a.unit_f64(), b.unit_f64());
            // Points just inside the two trimmed boundaries, where the margin is smallest.
            let na = [-ua[1], ua[0]];
            let nb = [ub[1], -ub[0]];
            for k in 0..samples {
                let s = r * (0.25 + 0.75 * grid(k));
                pts.push([s * ua[0] + w * na[0], s * ua[1] + w * na[1]]);
                pts.push([s * ub[0] + w * nb[0], s * ub[1] + w * nb[1]]);
            }
            let ta = ua[1].atan2(ua[0]);
            let mut span = ub[1].atan2(ub[0]) - ta;
            if span <= 0.0 {
                span += std::f64::consts::TAU;
            }
            for k in 0..samples {
                let th = ta + span * grid(k);
                pts.push([r * th.cos(), r * th.sin()]);
            }
        }
    }
    pts.retain(|p| fan.fat_contains(cell, *p));
    pts
}

fn kappa_sets(sys: &VkSystem, rng: &mut ChaCha8Rng, random: usize) -> Vec<Vec<f64>> {
    let m = sys.reaction_count();
    let (lo, hi) = sys.kappa_bounds();
    let mut out = Vec::new();
    if m <= 10 {
        for mask in 0..(1usize << m) {
            out.push((0..m).map(|j| if mask >> j & 1 == 1 { hi } else { lo }).collect());
        }
    }
    for _ in 0..random {
        out.push((0..m).map(|_| rng.gen_range(lo..=hi)).collect());
    }
    out
}

/// Samples velocities over every fattened non-origin cell and measures how deep
/// they sit inside the assigned cones.
pub fn strict_embedding_check(
    sys: &VkSystem,
    di: &ConeDI,
    radii: &[f64],
    samples: usize,
    seed: u64,
) -> Result<EmbeddingReport> {
    if radii.is_empty() || radii.iter().any(|r| !(*r > 0.0)) {
        return Err(Error::Invalid("radii must be positive".into()));
    }
    if samples == 0 {
        return Err(Error::Invalid("samples must be positive".into()));
    }
    let mut cells = Vec::new();
    let mut worst: Option<EmbeddingWitness> = None;
    for (ci, cell) in di.fan.nonorigin_cells().into_iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (ci as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
        let k = di.cone(cell);
        let mut min: Option<f64> = None;
        let mut count = 0;
        for &r in radii {
            for p in sample_points(&di.fan, cell, r, samples) {
                for kap in kappa_sets(sys, &mut rng, 4) {
                    let v = sys.scaled_velocity(p, &kap);
                    let m = angular_margin(k, v);
                    count += 1;
                    if min.map_or(true, |x| m < x) {
                        min = Some(m);
                    }
                    if worst.as_ref().map_or(true, |w| m < w.margin) {
                        worst = Some(EmbeddingWitness {
                            cell,
                            log_x: p,
                            kappas: kap.clone(),
                            velocity: unit(v),
                            margin: m,
                        });
                    }
                }
            }
        }
        let note = (count == 0).then(|| "no sample point fell in the fattened cell".to_string());
        cells.push(CellMargin { cell, min_margin: min, samples: count, note });
    }
    let min_margin = cells.iter().filter_map(|c| c.min_margin).reduce(f64::min);
    let pass = min_margin.map_or(false, |m| m > 0.0);
    Ok(EmbeddingReport { cells, worst, min_margin, pass })
}

/// Default sampling radii: multiples of the strip width.
pub fn default_radii(fan: &Fan2) -> Vec<f64> {
    let w = fan.width();
    [1.5, 3.0, 6.0, 12.0, 48.0].iter().map(|k| k * w.max(1.0)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{q, qi};
    use crate::system::Term;

    fn v(a: i64, b: i64) -> RatVec2 {
        RatVec2::ints(a, b)
    }

    pub(crate) fn mlv(e1: Q, e2: Q, eps: Q) -> VkSystem {
        VkSystem::new(
            vec![
                Term { source: v(1, 0), reactions: vec![RatVec2::new(qi(1), e1)] },
                Term { source: v(1, 1), reactions: vec![v(-1, 1)] },
                Term { source: v(0, 1), reactions: vec![RatVec2::new(e2, qi(-1))] },
            ],
            eps,
        )
        .unwrap()
    }

    #[test]
    fn mlv_dominance_cones() {
        let sys = mlv(q(1, 2), q(1, 2), q(1, 2));
        let di = build_dominance_di(&sys, &FanChoice::Comparison, q(1, 100), q(1, 1024)).unwrap();
        assert!(di.face_condition_holds());
        assert_eq!(*di.cone(Cell::Origin), Cone2::Full);
        // Sector between (0,-1) and (1,0): x leads, xy and y trail on opposite sides.
        let s = di.fan.rays.iter().position(|r| *r == v(0, -1)).unwrap();
        let k = di.cone(Cell::Sector(s));
        assert_eq!(di.entry(Cell::Sector(s)).provenance.dominant_sources, vec![v(1, 0)]);
        let w = RatVec2::rats(1, 1, 1, 2);
        assert!(k.contains_strict(&w));
        let ccw = &w + &v(-1, 1).scale(&q(1, 1024));
        assert!(k.contains(&ccw) && !k.contains_strict(&ccw));
        // Tie on ray (1,0): x and xy lead together.
        let r = di.fan.rays.iter().position(|r| *r == v(1, 0)).unwrap();
        let raw = di.entry(Cell::Ray(r)).provenance.raw.clone().unwrap();
        assert_eq!(raw, Cone2::from_generators(&[w.clone(), v(-1, 1)]));
        assert!(di.cone(Cell::Ray(r)).contains(&w) && di.cone(Cell::Ray(r)).contains(&v(-1, 1)));
    }

    #[test]
    fn rrobsys_normal_ray_widening() {
        let sys = VkSystem::new(
            vec![
                Term { source: v(0, 1), reactions: vec![v(2, 1)] },
                Term { source: v(1, 2), reactions: vec![v(2, 1)] },
                Term { source: v(1, 0), reactions: vec![v(0, 1)] },
                Term { source: v(1, 1), reactions: vec![v(-1, -1)] },
                Term { source: v(2, 2), reactions: vec![v(-1, -1)] },
            ],
            q(1, 2),
        )
        .unwrap();
        let di = build_dominance_di(&sys, &FanChoice::Normal, q(1, 100), q(1, 1024)).unwrap();
        assert_eq!(di.fan.rays, vec![v(0, 1), v(-1, 1), v(-1, -1), v(2, -1)]);
        let s = di.fan.rays.iter().position(|r| *r == v(-1, -1)).unwrap();
        let e = di.entry(Cell::Sector(s));
        assert_eq!(e.provenance.dominant_sources, vec![v(1, 0)]);
        assert_eq!(e.provenance.raw, Some(Cone2::Ray(v(0, 1))));
        assert!(e.cone.is_solid() && e.cone.contains_strict(&v(0, 1)));
    }

    #[test]
    fn single_source_system() {
        let sys =
            VkSystem::new(vec![Term { source: v(1, 1), reactions: vec![v(1, 0), v(0, 1)] }], q(1, 2)).unwrap();
        let fan = Fan2::from_rays(&[v(1, 0), v(0, 1), v(-1, 0), v(0, -1)], q(1, 2)).unwrap();
        let di = build_dominance_di(&sys, &FanChoice::Custom(fan), q(1, 2), q(1, 1024)).unwrap();
        for c in di.fan.nonorigin_cells() {
            assert_eq!(*di.cone(c), Cone2::quadrant1());
        }
        assert!(di.face_condition_holds());
    }

    #[test]
    fn toric_examples() {
        let fan = Fan2::from_rays(&[v(1, 0), v(1, 1), v(0, 1), v(-1, -1)], q(1, 2)).unwrap();
        let di = build_toric_di(&fan);
        let q1 = fan.rays.iter().position(|r| *r == v(1, 0)).unwrap();
        let r11 = fan.rays.iter().position(|r| *r == v(1, 1)).unwrap();
        assert_eq!(*di.cone(Cell::Origin), Cone2::Full);
        assert_eq!(*di.cone(Cell::Ray(r11)), Cone2::half_plane_normal(&v(-1, -1)));
        let k = di.cone(Cell::Sector(q1));
        assert!(k.contains_strict(&v(-1, -2)) && !k.contains(&v(1, -1)));
        assert!(di.face_condition_holds());
    }

    #[test]
    fn margins() {
        let k = Cone2::quadrant1();
        assert!((angular_margin(&k, [1.0, 1.0]) - std::f64::consts::FRAC_PI_4).abs() < 1e-12);
        assert!(angular_margin(&k, [1.0, -1.0]) < 0.0);
        assert!(angular_margin(&k, [-1.0, -1.0]) < 0.0);
        assert!(angular_margin(&Cone2::Ray(v(1, 0)), [1.0, 0.0]) == 0.0);
        let h = Cone2::half_plane_normal(&v(0, 1));
        assert!((angular_margin(&h, [0.0, 1.0]) - std::f64::consts::FRAC_PI_2).abs() < 1e-12);
    }

    #[test]
    fn embedding_depends_on_varrho() {
        let sys = mlv(q(1, 2), q(1, 2), q(1, 2));
        let coarse = build_dominance_di(&sys, &FanChoice::Comparison, q(9, 10), q(1, 32)).unwrap();
        let rep = strict_embedding_check(&sys, &coarse, &default_radii(&coarse.fan), 9, 1).unwrap();
        assert!(!rep.pass);
        assert!(rep.worst.is_some());
        let fine = coarse.with_varrho(q(1, 1_000_000)).unwrap();
        let rep = strict_embedding_check(&sys, &fine, &default_radii(&fine.fan), 9, 1).unwrap();
        assert!(rep.pass, "{:?}", rep.worst);
    }
}
