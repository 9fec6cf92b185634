//! Command line entry points and the interactive evaluation service.

pub mod cli;
pub mod error;
pub mod nlg;
pub mod service;

pub use error::{AppError, Result};
