//! Sampling, storage and accounting for opportunistic compute pools.
//!
//! The crate is organised bottom-up: [`model`] holds the domain types,
//! [`record`] the line format, [`storage`] the date-tree data root,
//! [`collector`] the polling driver, [`timeline`] interval reconstruction and
//! accounting, [`sim`] a deterministic synthetic pool and [`panoramic`] the
//! live-view filtering and charts.

pub mod clock;
pub mod collector;
pub mod model;
pub mod panoramic;
pub mod record;
pub mod sim;
pub mod source;
pub mod storage;
pub mod timeline;
