//! Support library of the `queue-infer` binary: file ingestion and the
//! preset validation experiments, exposed so integration tests can drive
//! them in-process.

pub mod ingest;
pub mod validate;
