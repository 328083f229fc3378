//! Potentials, invariant measures, pressure and equilibrium states.

mod katok;
mod measure;
mod potential;
mod transfer;

pub use katok::{
    katok_partition, min_cost_cover, CoverClass, CoverSolution, KatokOptions, KatokValue,
};
pub use measure::{InvariantMeasure, MarkovMeasure, MixedMeasure};
pub use potential::{cylinder_birkhoff_bounds, Potential};
pub use transfer::{
    equilibrium_measure, gibbs_constant, level_set_pressure, maximize_variational, perron_pressure,
    BlockGraph, EigenData, LevelSetValue, VariationalOptimum,
};

/// Base-`k` index of a word, most significant symbol first.
#[inline]
pub(crate) fn encode(symbols: &[u8], k: usize) -> usize {
    symbols.iter().fold(0usize, |acc, &s| acc * k + s as usize)
}
