//! The Moran construction of historic points and its certificate.
//!
//! Level `k` picks a separated family `Θ_k` of good words for the measure
//! `μ_ρ(k)`, repeats it `N_k` times, and glues everything with the constant
//! lag at resolution `ε/4`. Alternating between two measures with different
//! `∫ φ` makes the Birkhoff averages of every limit point oscillate; weighting
//! the atoms by `exp S_n ψ` gives the mass bound behind the pressure estimate.

mod certify;
mod checks;
mod family;
mod fractal;
mod good;
mod params;
mod schedule;

pub use certify::{
    certify, certify_with_construction, CertifyOptions, EqualityClaim, HistoricCertificate,
    Hypotheses, LemmaChecks, LevelRecord, Route, SecondMeasure,
};
pub use checks::{
    cylinder_log_mass, oscillation_check, verify_ball_bound, BallBoundReport, BallRow,
    OscillationLevel, OscillationPair, OscillationReport, OscillationWitness,
};
pub use family::{compose_block, select_separated_family, CompositeParts, SeparatedFamily};
pub use fractal::{
    build_fractal_level, build_measures, check_separation, structural_separation, AtomicMeasure,
    FractalLevel, Moran, Selection, SeparationReport, StructuralBound, SAMPLED_PAIRS,
};
pub use good::{build_good_sets, GoodClass, GoodSet};
pub use params::{ConstructionParams, FamilyMode, ThresholdRule};
pub use schedule::{choose_schedule, Schedule, SlackEntry};
