//! HTTP front end for explanation sessions.
//!
//! The service is the system of record for privacy spending: every session
//! owns one ledger, requests within a session are serialized, and each
//! successful request is appended to the session's log before the response
//! leaves. Responses carry noisy values and intervals only.

mod error;
mod log;
mod registry;
mod routes;

pub use error::{ErrorBody, ServiceError};
pub use log::{digest, OperationKind, SessionLogRecord};
pub use registry::{
    CreateDatasetRequest, CreateSessionRequest, DatasetCreated, PhaseResponse, Registry,
    SessionCreated,
};
pub use routes::{router, serve};
