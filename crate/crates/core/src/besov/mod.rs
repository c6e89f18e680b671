//! Littlewood-Paley decomposition and the Besov, Kato, time-space and energy norm families.

pub mod norms;
pub mod paraproduct;
pub mod partition;
pub mod time_norms;

pub use norms::{besov_norm, critical_exponent, lq_aggregate, BesovIndex, BlockContribution, NormReport};
pub use paraproduct::{paraproduct, paraproduct_estimate_check, Paraproduct, ProductCheck, ProductExponents};
pub use partition::{chi, low_freq, lp_block, phi, DyadicPartition};
pub use time_norms::{
    caloric_norm, energy_norm, energy_terms, interpolation_check, kato_decay_profile, kato_norm,
    timespace_besov_norm,
};
