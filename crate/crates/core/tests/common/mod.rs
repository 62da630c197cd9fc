//! Fixtures shared by the integration targets.
#![allow(dead_code)]

use std::path::Path;

use rand::Rng;
use tropcert::fan::Fan2;
use tropcert::rational::{q, qi, Q};
use tropcert::system::{parse_model, Term, VkSystem};
use tropcert::RatVec2;

pub fn v(a: i64, b: i64) -> RatVec2 {
    RatVec2::ints(a, b)
}

/// Three-term Lotka-Volterra variant with rate bound 1/2; `(0, 0)` is the classical system.
pub fn mlv(e1: Q, e2: Q) -> VkSystem {
    VkSystem::new(
        vec![
            Term { source: v(1, 0), reactions: vec![RatVec2::new(qi(1), e1)] },
            Term { source: v(1, 1), reactions: vec![v(-1, 1)] },
            Term { source: v(0, 1), reactions: vec![RatVec2::new(e2, qi(-1))] },
        ],
        q(1, 2),
    )
    .unwrap()
}

pub fn corpus_system(name: &str) -> VkSystem {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../models").join(name);
    parse_model(&std::fs::read_to_string(path).unwrap()).unwrap().system().unwrap()
}

/// A complete fan of `3..=12` rational rays that needed no completion.
pub fn random_fan<R: Rng>(rng: &mut R, varrho: Q) -> Fan2 {
    loop {
        let n = rng.gen_range(3..=12);
        let rays: Vec<RatVec2> = (0..n)
            .map(|_| {
                let c = |rng: &mut R| q(rng.gen_range(-9..=9), rng.gen_range(1..=4));
                RatVec2::new(c(rng), c(rng))
            })
            .collect();
        if let Ok(f) = Fan2::from_rays(&rays, varrho.clone()) {
            if f.inserted.is_empty() && (3..=12).contains(&f.n()) {
                return f;
            }
        }
    }
}
