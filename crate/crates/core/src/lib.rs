pub mod adversary;
pub mod algorithms;
pub mod embedding;
pub mod harness;
pub mod metric;
pub mod oracle;
pub mod sched;
