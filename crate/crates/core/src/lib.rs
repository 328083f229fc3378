//! Historic sets of Birkhoff averages on subshifts of finite type.
//!
//! The crate is `no_std` (it needs `alloc`) and does no IO. It covers:
//!
//! * [`symbolic`]: shift spaces, words, eventually periodic points, the dyadic
//!   metric, Bowen distances and Bowen balls (which are cylinders here).
//! * [`thermo`]: Markov measures, entropy, integrals, the transfer matrix,
//!   pressure, equilibrium states, a variational maximizer used as an
//!   independent cross-check, and the Katok partition function.
//! * [`pressure`]: Carathéodory pressure of cylinder-definable sets, spanning and
//!   separated partition sums, and BS dimension.
//! * [`specification`]: lag functions and orbit gluing with exact shadowing.
//! * [`moran`]: good sets, separated families, schedules, fractal levels, the
//!   lemma checks and the final certified lower bound for the pressure of the
//!   historic set.
//!
//! All entropies and pressures are in nats.

#![no_std]
#![forbid(unsafe_code)]
#![allow(
    clippy::neg_cmp_op_on_partial_ord,
    clippy::needless_range_loop,
    clippy::type_complexity
)]

extern crate alloc;

#[cfg(test)]
extern crate std;

mod error;
pub mod math;
pub mod moran;
pub mod pressure;
pub mod specification;
pub mod symbolic;
pub mod thermo;

pub use error::{Error, Result};
pub use symbolic::{Cylinder, Dyadic, PointRep, Resolution, SymbolicSystem, Word};
pub use thermo::{EigenData, MarkovMeasure, MixedMeasure, Potential};

/// Default limit on the number of words any single enumeration may produce.
pub const DEFAULT_ENUMERATION_CAP: u64 = 1 << 22;
