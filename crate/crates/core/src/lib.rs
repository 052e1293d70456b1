//! Multi-level naming context extraction for Java sources and a Transformer
//! sequence generator that recommends method names from that context.
//!
//! Pipeline: [`jparse`] indexes a project and extracts per-method contexts,
//! [`token`] splits entity names into subtokens, [`corpus`] builds truncated
//! records and encoded examples, [`gtnm`] is the encoder/decoder network built
//! on the [`nn`] autograd core, [`runtime`] trains and decodes, and [`eval`]
//! scores predictions.

pub mod corpus;
pub mod error;
pub mod eval;
pub mod gtnm;
pub mod jparse;
pub mod nn;
pub mod runtime;
pub mod token;

pub use error::{Error, Result};
