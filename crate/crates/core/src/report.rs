//! Export documents written by the command line and read back by the plotter.
//!
//! Rationals are canonical `"p/q"` strings; floats are written in their
//! shortest round-trip form, so parsing an emitted document gives it back exactly.

use serde::{Deserialize, Serialize};

use crate::certify::SystemVerdict;
use crate::error::{Error, Result};
use crate::escape::{escape_cone, EscapeCone};
use crate::fan::{Cell, Fan2};
use crate::inclusion::ConeDI;
use crate::rational::Q;
use crate::region::{family_member, strictly_nested, InvariantPolygon};
use crate::simulate::{PermanenceReport, Trajectory};
use crate::svg;
use crate::vec2::RatVec2;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub command: String,
    pub input: Option<String>,
    #[serde(with = "crate::rational::serde_q")]
    pub varrho: Q,
    #[serde(with = "crate::rational::serde_q")]
    pub eta: Q,
    /// Replaces the rate bound of the input model when present.
    #[serde(default, with = "crate::rational::serde_opt_q")]
    pub epsilon: Option<Q>,
    pub fan: String,
    pub strategy: String,
    pub seed: u64,
    pub runs: usize,
    pub t_end: f64,
    pub step: f64,
    pub t_hat: f64,
    pub family: usize,
    pub out: Option<String>,
    pub svg: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EscapeEntry {
    pub cell: Cell,
    pub escape: EscapeCone,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FamilyEntry {
    pub t: f64,
    pub vertices: Vec<RatVec2>,
    pub verified: bool,
    /// Strictly inside the next member, with disjoint boundaries.
    pub nested_in_next: Option<bool>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "document", rename_all = "snake_case")]
pub enum Report {
    Certificate { config: RunConfig, verdict: SystemVerdict },
    Escape { fan: Fan2, cells: Vec<EscapeEntry> },
    Region { config: RunConfig, di: ConeDI, polygon: InvariantPolygon, family: Vec<FamilyEntry> },
    Trajectories { config: RunConfig, trajectories: Vec<Trajectory>, report: PermanenceReport, region: Option<InvariantPolygon> },
}

impl Report {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("serializable")
    }

    pub fn from_json(text: &str) -> Result<Report> {
        serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }

    /// The figure for this document.
    pub fn render_svg(&self) -> String {
        match self {
            Report::Certificate { verdict, .. } => svg::certificate_svg(&verdict.certificate),
            Report::Escape { fan, cells } => svg::escape_svg(fan, cells),
            Report::Region { di, polygon, family, .. } => {
                let ts: Vec<f64> = family.iter().map(|f| f.t).collect();
                svg::region_svg(di, polygon, &ts)
            }
            Report::Trajectories { trajectories, region, .. } => svg::phase_svg(trajectories, region.as_ref()),
        }
    }
}

pub fn escape_table(fan: &Fan2) -> Result<Vec<EscapeEntry>> {
    fan.nonorigin_cells().into_iter().map(|cell| Ok(EscapeEntry { cell, escape: escape_cone(fan, cell)? })).collect()
}

/// Exact members at `t_hat * 2^k`, `k < count`, each checked for strict nesting in the next.
pub fn family_entries(di: &ConeDI, poly: &InvariantPolygon, count: usize) -> Result<Vec<FamilyEntry>> {
    let plan = poly.plan.as_ref().ok_or_else(|| Error::Precondition("polygon carries no construction plan".into()))?;
    let mut out: Vec<FamilyEntry> = Vec::with_capacity(count);
    for k in 0..count {
        let t = poly.t_hat * 2f64.powi(k as i32);
        let m = family_member(di, plan, t)?;
        let verified = m.report.as_ref().is_some_and(|r| r.pass);
        if let Some(prev) = out.last_mut() {
            prev.nested_in_next = Some(strictly_nested(&prev.vertices, &m.vertices));
        }
        out.push(FamilyEntry { t, vertices: m.vertices, verified, nested_in_next: None });
    }
    Ok(out)
}
