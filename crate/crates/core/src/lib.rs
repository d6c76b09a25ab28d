//! Netflow traffic-matrix toolkit.
//!
//! Converts netflow records into hypersparse source x destination packet
//! matrices, repacks them into constant-packet windows with hierarchical
//! aggregation, computes multi-temporal network statistics over address
//! subranges, anonymizes the address space with a keyed permutation, and
//! stores matrix sequences losslessly in the delta-coded TML format.

pub mod agg;
pub mod analytics;
pub mod anon;
pub mod bench;
pub mod flow;
pub mod matrix;
pub mod subrange;
pub mod synth;
pub mod tml;
pub mod window;

pub use matrix::{Coord, TrafficMatrix};
pub use subrange::SubrangeSpec;
pub use window::{Window, WindowConfig};
