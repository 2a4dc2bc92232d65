//! Secrecy-rate optimization for IRS-assisted underlay cognitive-radio
//! MISO wiretap channels.
//!
//! Three schemes are provided: joint beamforming and phase design with full
//! eavesdropper CSI ([`fullcsi`]), a worst-case design under bounded
//! eavesdropper CSI error ([`robust`]), and an artificial-noise scheme for
//! unknown eavesdropper CSI ([`nocsi`]). [`harness`] drives Monte-Carlo
//! sweeps and writes CSV results.

// `!(x <= y)` is used on purpose so NaN fails checks.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod channel;
pub mod conic;
pub mod error;
pub mod fullcsi;
pub mod harness;
pub mod linalg;
pub mod nocsi;
pub mod oracle;
pub mod par;
pub mod result;
pub mod robust;
pub mod subproblems;

pub use error::{Error, Result};
