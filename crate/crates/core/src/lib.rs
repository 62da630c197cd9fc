//! Constructive certification of permanence for planar power-law systems with
//! bounded time-varying rates.
//!
//! The pipeline builds a cone-valued differential inclusion over a fattened
//! fan in logarithmic coordinates, compares each cell's cone with the cone of
//! escape directions, constructs an exactly verified forward-invariant polygon,
//! and stress-tests the verdict by simulation.

pub mod certify;
pub mod cone;
pub mod error;
pub mod escape;
pub mod fan;
pub mod inclusion;
pub mod rational;
pub mod region;
pub mod report;
pub mod simulate;
pub mod svg;
pub mod system;
pub mod vec2;

pub use cone::{open_intersection_witness, Cone2};
pub use error::{Error, Result};
pub use fan::{Cell, Fan2};
pub use rational::Q;
pub use vec2::RatVec2;
