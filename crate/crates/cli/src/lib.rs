//! Command line and HTTP front ends for the repair workbench, plus the
//! session store and job pool behind the service.

pub mod cli;
pub mod jobs;
pub mod ops;
pub mod service;
pub mod store;
