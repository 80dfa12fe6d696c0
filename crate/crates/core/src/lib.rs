pub mod benchmarks;
pub mod bnp;
pub mod colgen;
pub mod error;
pub mod fixtures;
pub mod instance;
pub mod io;
pub mod lp;
pub mod models;
pub mod ode;
pub mod oracle;
pub mod pricing;
pub mod restrictions;
pub mod rng;

pub use error::{Error, Result};
pub use instance::{Instance, Problem};
