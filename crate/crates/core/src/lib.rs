pub mod arch;
pub mod baseline;
pub mod bench;
pub mod blockform;
pub mod circuit;
pub mod ees;
pub mod error;
pub mod exec;
pub mod fixtures;
pub mod generate;
pub mod layout;
pub mod mapping;
pub mod metrics;
pub mod oracle;
pub mod pipeline;
pub mod route;
pub mod schedule;
pub mod timing;
pub mod ums;
pub mod validate;

pub use error::{Error, Result};
