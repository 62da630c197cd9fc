//! Separation certificates for cone inclusions.
//!
//! A cell passes when its cone misses the interior of the limit escape cone and
//! contains none of the thickened escape rays; those rays stay interior to the
//! escape cone at every thickness, while everything else separates once the
//! thickness is small. Faces pass when each sector cone sits inside the cone of
//! every bounding ray.

use serde::{Deserialize, Serialize};

use crate::cone::{open_intersection_witness, Cone2};
use crate::error::{Error, Result};
use crate::escape::{escape_cone, EscapeCone};
use crate::fan::{Cell, Fan2};
use crate::inclusion::{
    build_dominance_di, build_toric_di, default_radii, strict_embedding_check, ConeDI, EmbeddingReport, FanChoice,
};
use crate::rational::Q;
use crate::system::{system_graph, weakly_reversible, VkSystem};
use crate::vec2::RatVec2;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "direction", rename_all = "snake_case")]
pub enum SeparationWitness {
    /// A direction in the cone and in the interior of the limit escape cone.
    OpenOverlap(RatVec2),
    /// A thickened escape ray lying in the cone.
    ThickenedRay(RatVec2),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CellVerdict {
    pub cell: Cell,
    pub cone: Cone2,
    pub escape: EscapeCone,
    pub pass: bool,
    pub witness: Option<SeparationWitness>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FaceVerdict {
    pub ray: Cell,
    pub sector: Cell,
    pub pass: bool,
    /// A generator of the sector cone outside the ray cone.
    pub witness: Option<RatVec2>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Certificate {
    pub fan: Fan2,
    pub cells: Vec<CellVerdict>,
    pub faces: Vec<FaceVerdict>,
    pub pass: bool,
}

impl Certificate {
    pub fn failing_cells(&self) -> Vec<&CellVerdict> {
        self.cells.iter().filter(|c| !c.pass).collect()
    }
}

/// Separation test for one cone against one escape cone.
pub fn separation(k: &Cone2, b: &EscapeCone) -> Option<SeparationWitness> {
    if let Some(w) = open_intersection_witness(k, &b.limit) {
        return Some(SeparationWitness::OpenOverlap(w));
    }
    b.thickened.iter().find(|t| k.contains(t)).map(|t| SeparationWitness::ThickenedRay(t.clone()))
}

pub fn certify_te(di: &ConeDI) -> Certificate {
    let cells: Vec<CellVerdict> = di
        .fan
        .nonorigin_cells()
        .into_iter()
        .map(|cell| {
            let escape = escape_cone(&di.fan, cell).expect("non-origin cell");
            let cone = di.cone(cell).clone();
            let witness = separation(&cone, &escape);
            CellVerdict { cell, cone, escape, pass: witness.is_none(), witness }
        })
        .collect();
    let faces: Vec<FaceVerdict> = di
        .face_pairs()
        .into_iter()
        .map(|(ray, sector, w)| FaceVerdict { ray, sector, pass: w.is_none(), witness: w })
        .collect();
    let pass = cells.iter().all(|c| c.pass) && faces.iter().all(|f| f.pass);
    Certificate { fan: di.fan.clone(), cells, faces, pass }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Strategy {
    DominanceComparison,
    DominanceNormal,
    /// Dominance construction on a caller-supplied fan.
    DominanceCustom,
    ToricIfWeaklyReversible,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SystemVerdict {
    pub strategy: Strategy,
    pub di: ConeDI,
    pub certificate: Certificate,
    pub embedding: EmbeddingReport,
    /// Both the separation certificate and the sampled strict embedding hold.
    pub permanent: bool,
}

/// Sampling effort for the embedding check inside `certify_system`.
pub const EMBEDDING_SAMPLES: usize = 9;

pub fn build_di(sys: &VkSystem, strategy: Strategy, varrho: Q, eta: Q) -> Result<ConeDI> {
    match strategy {
        Strategy::DominanceComparison => build_dominance_di(sys, &FanChoice::Comparison, varrho, eta),
        Strategy::DominanceNormal => build_dominance_di(sys, &FanChoice::Normal, varrho, eta),
        Strategy::DominanceCustom => Err(Error::Precondition("a custom fan must be supplied".into())),
        Strategy::ToricIfWeaklyReversible => {
            let g = system_graph(sys);
            if !weakly_reversible(&g) {
                return Err(Error::Precondition("the reaction graph is not weakly reversible".into()));
            }
            let labels: Vec<RatVec2> = g.nodes.iter().map(|n| n.label.clone()).collect();
            Ok(build_toric_di(&Fan2::comparison(&labels, varrho)?))
        }
    }
}

pub fn certify_system(sys: &VkSystem, strategy: Strategy, varrho: Q, eta: Q, seed: u64) -> Result<SystemVerdict> {
    let di = build_di(sys, strategy, varrho, eta)?;
    verdict(sys, strategy, di, seed)
}

/// Dominance certification on `fan`, which keeps its own rays but takes `varrho`.
pub fn certify_system_on_fan(sys: &VkSystem, fan: &Fan2, varrho: Q, eta: Q, seed: u64) -> Result<SystemVerdict> {
    let di = build_dominance_di(sys, &FanChoice::Custom(fan.clone()), varrho, eta)?;
    verdict(sys, Strategy::DominanceCustom, di, seed)
}

fn verdict(sys: &VkSystem, strategy: Strategy, di: ConeDI, seed: u64) -> Result<SystemVerdict> {
    let certificate = certify_te(&di);
    let embedding = strict_embedding_check(sys, &di, &default_radii(&di.fan), EMBEDDING_SAMPLES, seed)?;
    let permanent = certificate.pass && embedding.pass;
    Ok(SystemVerdict { strategy, di, certificate, embedding, permanent })
}
