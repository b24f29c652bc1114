pub mod config;
pub mod error;
pub mod forward;
pub mod geometry;
pub mod io;
pub mod kahler;
pub mod picard;
pub mod pipeline;
pub mod profile;
pub mod quad;
pub mod report;
pub mod rk;
pub mod soliton;

pub use config::{Pipeline, RunConfig};
pub use error::{Result, SolitonError};
pub use report::{ReportEntry, Status, VerificationReport};
