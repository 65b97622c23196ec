//! Annotation service and batch CLI over `voxelink-core`.

pub mod api;
pub mod cli;
pub mod error;
pub mod pipeline;
pub mod session;

pub use api::{router, AppState, ServiceConfig};
pub use error::ServiceError;
pub use session::{JobEvent, JobEventBody, Session};
