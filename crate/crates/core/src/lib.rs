//! Finite-scale toolkit for word metrics, gap functions and ball-measure
//! diagnostics on virtually nilpotent groups.

pub mod ball;
pub mod density;
pub mod error;
pub mod experiment;
pub mod frac;
pub mod generators;
pub mod group;
pub mod sbm;

pub use ball::{
    containment_radius, distance_to_set, enumerate_ball, fit_growth_degree, growth_table, DistanceMap,
    GrowthFit, GrowthTable, MetricBall,
};
pub use density::{
    density_profile, doubling_table, gap_fraction, neighborhood_density, reverse_bm_check, rho_intersection,
    sg_eta, ss_ratio_table, BallRef, GapReport, Provenance, SubsetWindow,
};
pub use error::{Error, Result};
pub use experiment::{emit_report, run_experiment, ExperimentConfig, RunReport};
pub use frac::{Frac, Q};
pub use generators::{generate, Certificate, GeneratorSpec};
pub use group::{Element, Group, WordLength};
