//! Analyses built on gaps and densities: the packing count `F`, BM
//! diagnosis, configurations, difference sets and cross-metric transfer.

mod config;
mod diagnose;
mod diffset;
mod fvalue;
mod nathanson;
mod transfer;

pub use fvalue::{f_scan, f_value, FEntry, FMode, FOptions, FScan, FValue, Thresholds, Verdict};
pub use config::{strong_subconfig_search, w_estimate, ConfigSampler, DeltaConfiguration, StrongSubconfigWitness, WEstimate};
pub use diagnose::{bm_diagnose, default_delta_grid, sample_subballs, BmDiagnosis, DiagnosisRow, SubballPlan, SubballSample};
pub use diffset::{center_syndetic_check, central_elements, difference_set, CenterCheck, DifferenceSet, DEFAULT_PAIR_BUDGET};
pub use nathanson::{nathanson_search, NathansonOptions, NathansonResult};
pub use transfer::{density_transfer_check, lipschitz_ratio, TransferPlan, TransferReport, TransferWindow};
