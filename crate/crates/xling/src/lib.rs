//! Files, audio and the `xling` command line around [`xling_core`].

pub mod cli;
pub mod commands;
pub mod config;
pub mod error;
pub mod fsutil;
pub mod minicorpus;
pub mod phon;
pub mod scan;
pub mod wav;
pub mod weights;
pub mod xlf;

pub use error::{Error, Result};
