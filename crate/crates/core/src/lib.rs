//! Exact arithmetic for (generalised) Razak blocks, their diagonal
//! homomorphisms, trace measures and the inductive sequences built from them.

pub mod amalgamation;
pub mod blocks;
pub mod cli;
pub mod homs;
pub mod limits;
pub mod measures;
pub mod oracle;
pub mod plmaps;

pub use blocks::{q, qi, Block, Kind, RepDescriptor, SpecPoint, TestElement, Q};

pub use homs::DiagonalHom;
pub use measures::TraceMeasure;
pub use plmaps::PLMap;
