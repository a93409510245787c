//! Read-only query service over one recorded solver run.
//!
//! [`Service`] answers [`ApiRequest`]s without any transport; [`router`]
//! mounts it on axum. Every JSON response carries `api_version`.

pub mod api;
pub mod config;
pub mod error;
pub mod http;
pub mod session;

pub use api::{ApiRequest, ApiResponse, Method, PlaneRequest, Service};
pub use config::{ConfigError, ServiceConfig};
pub use error::ApiError;
pub use http::{router, serve};
pub use session::{Session, SessionError};

pub const API_VERSION: u32 = 1;
