//! Exact characteristic-cycle and micro-packet computations over finite orbit stratifications.

pub mod affine;
pub mod dataset;
pub mod duality;
pub mod euler;
pub mod linsolve;
pub mod solver;
pub mod packets;
pub mod report;
pub mod cli;
