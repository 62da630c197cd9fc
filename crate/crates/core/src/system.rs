//! Power-law systems with bounded variable rates, and the labelled graphs that generate them.

use num::{One, Signed};
use petgraph::algo::tarjan_scc;
use petgraph::graph::DiGraph;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::rational::{to_f64, Q};
use crate::vec2::RatVec2;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Term {
    pub source: RatVec2,
    pub reactions: Vec<RatVec2>,
}

/// `x' = sum_ij kappa_ij(t) x^{s_i} v_ij` with every rate in `[epsilon, 1/epsilon]`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct VkSystem {
    pub terms: Vec<Term>,
    #[serde(with = "crate::rational::serde_q")]
    pub epsilon: Q,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Node {
    pub id: String,
    pub label: RatVec2,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EEGraph {
    pub nodes: Vec<Node>,
    pub edges: Vec<(String, String)>,
}

/// A parsed input document.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Document {
    System {
        #[serde(with = "crate::rational::serde_q")]
        epsilon: Q,
        terms: Vec<Term>,
    },
    Graph {
        #[serde(with = "crate::rational::serde_q")]
        epsilon: Q,
        nodes: Vec<Node>,
        edges: Vec<(String, String)>,
    },
}

/// Either kind of validated model.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Model {
    System(VkSystem),
    Graph(EEGraph, Q),
}

impl Model {
    /// The generated system; graphs are converted with their own rate bound.
    pub fn system(&self) -> Result<VkSystem> {
        match self {
            Model::System(s) => Ok(s.clone()),
            Model::Graph(g, eps) => Ok(graph_to_system(g, eps.clone())?.0),
        }
    }

    pub fn to_document(&self) -> Document {
        match self {
            Model::System(s) => Document::System { epsilon: s.epsilon.clone(), terms: s.terms.clone() },
            Model::Graph(g, e) => Document::Graph { epsilon: e.clone(), nodes: g.nodes.clone(), edges: g.edges.clone() },
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_document()).expect("serializable")
    }
}

fn check_epsilon(e: &Q) -> Result<()> {
    if !e.is_positive() || *e > Q::one() {
        return Err(Error::Invalid(format!("epsilon must lie in (0,1], got {e}")));
    }
    Ok(())
}

impl VkSystem {
    /// Validates and groups terms sharing a source.
    pub fn new(terms: Vec<Term>, epsilon: Q) -> Result<VkSystem> {
        check_epsilon(&epsilon)?;
        if terms.is_empty() {
            return Err(Error::Invalid("system has no terms".into()));
        }
        let mut grouped: Vec<Term> = Vec::new();
        for t in terms {
            if t.reactions.is_empty() {
                return Err(Error::Invalid(format!("source {} has no reactions", t.source)));
            }
            if t.reactions.iter().any(|v| v.is_zero()) {
                return Err(Error::Invalid(format!("zero reaction vector at source {}", t.source)));
            }
            match grouped.iter_mut().find(|g| g.source == t.source) {
                Some(g) => g.reactions.extend(t.reactions),
                None => grouped.push(t),
            }
        }
        Ok(VkSystem { terms: grouped, epsilon })
    }

    pub fn sources(&self) -> Vec<RatVec2> {
        self.terms.iter().map(|t| t.source.clone()).collect()
    }

    pub fn reaction_count(&self) -> usize {
        self.terms.iter().map(|t| t.reactions.len()).sum()
    }

    pub fn kappa_bounds(&self) -> (f64, f64) {
        let e = to_f64(&self.epsilon);
        (e, 1.0 / e)
    }

    fn check_kappas(&self, kappas: &[f64]) -> Result<()> {
        if kappas.len() != self.reaction_count() {
            return Err(Error::Invalid(format!(
                "expected {} rates, got {}",
                self.reaction_count(),
                kappas.len()
            )));
        }
        let (lo, hi) = self.kappa_bounds();
        let slack = 1e-12;
        if let Some(k) = kappas.iter().find(|&&k| !(k >= lo * (1.0 - slack) && k <= hi * (1.0 + slack))) {
            return Err(Error::Invalid(format!("rate {k} outside [{lo}, {hi}]")));
        }
        Ok(())
    }

    /// Vector field at a positive point; `kappas` follow term order, then reaction order.
    pub fn velocity(&self, x: [f64; 2], kappas: &[f64]) -> Result<[f64; 2]> {
        if !(x[0] > 0.0 && x[1] > 0.0) {
            return Err(Error::Invalid(format!("point must be positive, got {x:?}")));
        }
        self.check_kappas(kappas)?;
        let lx = [x[0].ln(), x[1].ln()];
        let mut out = [0.0; 2];
        let mut k = 0;
        for t in &self.terms {
            let s = t.source.to_f64();
            let mono = (s[0] * lx[0] + s[1] * lx[1]).exp();
            for v in &t.reactions {
                let vf = v.to_f64();
                out[0] += kappas[k] * mono * vf[0];
                out[1] += kappas[k] * mono * vf[1];
                k += 1;
            }
        }
        Ok(out)
    }

    /// `f(exp X)` rescaled by the largest monomial, so only its direction is meaningful.
    pub fn scaled_velocity(&self, lx: [f64; 2], kappas: &[f64]) -> [f64; 2] {
        let exps: Vec<f64> = self
            .terms
            .iter()
            .map(|t| {
                let s = t.source.to_f64();
                s[0] * lx[0] + s[1] * lx[1]
            })
            .collect();
        let m = exps.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut out = [0.0; 2];
        let mut k = 0;
        for (t, e) in self.terms.iter().zip(&exps) {
            let w = (e - m).exp();
            for v in &t.reactions {
                let vf = v.to_f64();
                out[0] += kappas[k] * w * vf[0];
                out[1] += kappas[k] * w * vf[1];
                k += 1;
            }
        }
        out
    }

    /// Log-coordinate field `f(exp X) / exp X`, evaluated without forming large monomials.
    pub fn log_velocity(&self, lx: [f64; 2], kappas: &[f64]) -> [f64; 2] {
        let mut out = [0.0; 2];
        let mut k = 0;
        for t in &self.terms {
            let s = t.source.to_f64();
            let e = s[0] * lx[0] + s[1] * lx[1];
            let m0 = (e - lx[0]).exp();
            let m1 = (e - lx[1]).exp();
            for v in &t.reactions {
                let vf = v.to_f64();
                out[0] += kappas[k] * m0 * vf[0];
                out[1] += kappas[k] * m1 * vf[1];
                k += 1;
            }
        }
        out
    }
}

impl EEGraph {
    pub fn new(nodes: Vec<Node>, edges: Vec<(String, String)>) -> Result<EEGraph> {
        let mut ids = HashMap::new();
        for (i, n) in nodes.iter().enumerate() {
            if ids.insert(n.id.clone(), i).is_some() {
                return Err(Error::Invalid(format!("duplicate node id {:?}", n.id)));
            }
        }
        for i in 0..nodes.len() {
            for j in (i + 1)..nodes.len() {
                if nodes[i].label == nodes[j].label {
                    return Err(Error::Invalid(format!("duplicate node label {}", nodes[i].label)));
                }
            }
        }
        for (a, b) in &edges {
            if !ids.contains_key(a) || !ids.contains_key(b) {
                return Err(Error::Invalid(format!("edge ({a}, {b}) references an unknown node")));
            }
            if a == b {
                return Err(Error::Invalid(format!("self-loop at {a} has a zero reaction vector")));
            }
        }
        Ok(EEGraph { nodes, edges })
    }

    fn label(&self, id: &str) -> &RatVec2 {
        &self.nodes.iter().find(|n| n.id == id).expect("validated id").label
    }
}

/// Groups edges by source label; parallel duplicate edges are dropped and counted.
pub fn graph_to_system(g: &EEGraph, epsilon: Q) -> Result<(VkSystem, usize)> {
    let mut terms: Vec<Term> = Vec::new();
    let mut dropped = 0;
    for (a, b) in &g.edges {
        let s = g.label(a).clone();
        let v = g.label(b) - &s;
        match terms.iter_mut().find(|t| t.source == s) {
            Some(t) if t.reactions.contains(&v) => dropped += 1,
            Some(t) => t.reactions.push(v),
            None => terms.push(Term { source: s, reactions: vec![v] }),
        }
    }
    Ok((VkSystem::new(terms, epsilon)?, dropped))
}

/// The graph a system spells out: nodes are sources and reaction targets, one edge per reaction.
pub fn system_graph(sys: &VkSystem) -> EEGraph {
    let mut nodes: Vec<Node> = Vec::new();
    let id_of = |p: &RatVec2, nodes: &mut Vec<Node>| -> String {
        if let Some(n) = nodes.iter().find(|n| n.label == *p) {
            return n.id.clone();
        }
        let id = format!("n{}", nodes.len());
        nodes.push(Node { id: id.clone(), label: p.clone() });
        id
    };
    let mut edges = Vec::new();
    for t in &sys.terms {
        let a = id_of(&t.source, &mut nodes);
        for v in &t.reactions {
            let b = id_of(&(&t.source + v), &mut nodes);
            edges.push((a.clone(), b));
        }
    }
    EEGraph { nodes, edges }
}

/// Every edge lies in a strongly connected component.
pub fn weakly_reversible(g: &EEGraph) -> bool {
    let mut dg = DiGraph::<(), ()>::new();
    let idx: HashMap<&str, _> = g.nodes.iter().map(|n| (n.id.as_str(), dg.add_node(()))).collect();
    for (a, b) in &g.edges {
        dg.add_edge(idx[a.as_str()], idx[b.as_str()], ());
    }
    let mut comp = HashMap::new();
    for (c, scc) in tarjan_scc(&dg).into_iter().enumerate() {
        for n in scc {
            comp.insert(n, c);
        }
    }
    g.edges.iter().all(|(a, b)| comp[&idx[a.as_str()]] == comp[&idx[b.as_str()]])
}

/// Parses and validates a system or graph document.
pub fn parse_model(text: &str) -> Result<Model> {
    let doc: Document = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    match doc {
        Document::System { epsilon, terms } => Ok(Model::System(VkSystem::new(terms, epsilon)?)),
        Document::Graph { epsilon, nodes, edges } => {
            check_epsilon(&epsilon)?;
            Ok(Model::Graph(EEGraph::new(nodes, edges)?, epsilon))
        }
    }
}
