//! Conservative entropy certification for energy-time entanglement.
//!
//! This crate turns discrete frequency-bin coincidence counts and timing
//! histograms, measured through imperfect spectral filters, into upper bounds
//! on the continuous (differential) entropies that enter entropic witness
//! inequalities. The guiding principle is majorization: binning, filtering
//! with profiles dominated by a top-hat, and mixing over filter realizations
//! can only make distributions more uniform, so discrete entropies computed
//! from such data always bound the underlying continuous entropies from above
//! once the bin-width term `log2(step)` is added back.
//!
//! Layout:
//! - [`probcore`]: validated probability containers, entropies, majorization.
//! - [`filters`]: spectral filter profiles, top-hat dominance checks, weights
//!   for banks of non-identical filters.
//! - [`coarsegrain`]: binning and filter sampling of gridded densities, and
//!   the entropy bounds derived from them.
//! - [`spdc`]: a two-photon Gaussian spectral model and timing budget for
//!   downconversion sources.
//! - [`witness`]: the entropic witness inequalities, frequency budgets and
//!   entanglement quantification.
//! - [`acquisition`]: histogram/count-table I/O, background handling,
//!   synthetic campaign generation and bootstrap error bars.
//!
//! All entropies are in bits. Continuous entropies are relative to the SI
//! unit of the variable (seconds, rad/s), so large negative values are
//! expected for picosecond-scale timing distributions.

#![forbid(unsafe_code)]

pub mod acquisition;
pub mod coarsegrain;
mod error;
pub mod filters;
pub mod probcore;
pub mod quad;
pub mod spdc;
pub mod units;
pub mod witness;

pub use error::{Error, Result};
