//! Session lifecycle around the dialogue engine: fixture loading, snapshot
//! persistence, the HTTP API and the scripted-persona runner.

pub mod config;
pub mod error;
pub mod fixtures;
pub mod http;
pub mod persona;
pub mod service;
pub mod store;

pub use error::ServiceError;
pub use service::SessionService;
