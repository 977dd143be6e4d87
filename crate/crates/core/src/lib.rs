//! Turns natural-language device descriptions into structured electronic
//! device specifications and checks them.
//!
//! The crate is organized by stage:
//!
//! - [`devicespec`]: the data model, netlist graph and canonical document.
//! - [`specparser`]: extraction of a spec from raw model output.
//! - [`partsdb`]: the component knowledge base.
//! - [`pinscore`]: strict and permissive pinout scoring.
//! - [`erc`]: electrical rule checks.
//! - [`llmgateway`]: completion providers with record and replay.
//! - [`pipeline`]: prompt assembly, the reflection loop and sessions.
//! - [`bench`]: the microcontroller task benchmark.
//! - [`export`]: flat netlist and graph exports.

pub mod devicespec;
pub mod specparser;
pub mod partsdb;
pub mod pinscore;
pub mod erc;
pub mod llmgateway;
pub mod pipeline;
pub mod bench;
pub mod export;
