pub mod bias;
pub mod build;
pub mod cli;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod exec;
pub mod mix;
pub mod oracle;
pub mod program;
pub mod question;
pub mod registry;
pub mod scene;
pub mod seed;
pub mod signature;
pub mod vocab;

pub use error::{Error, Result};
