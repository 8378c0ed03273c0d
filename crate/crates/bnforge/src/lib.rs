//! Command-line workbench for bnforge knowledge bases.
//!
//! Everything that touches the file system lives here: the content-addressed
//! version store, the JSON network and golden-record files, and the batch
//! front end in [`cli`]. The modelling and evaluation logic is in
//! `bnforge-core`.

pub mod cli;
pub mod formats;
pub mod store;
