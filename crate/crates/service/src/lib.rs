//! HTTP API and command line for the `polylens` lens engine.

pub mod api;
pub mod cli;
pub mod error;
pub mod service;

pub use api::router;
pub use error::{ApiError, ApiResult, ErrorCode};
pub use service::Service;
