//! Command-line tool and HTTP service around the garden generation pipeline.

pub mod api;
pub mod cli;
pub mod config;
pub mod store;

pub use config::{merge_patch, BackendChoice, ConfigError, ServiceConfig};
pub use store::{StoreError, WorkspaceStore};
