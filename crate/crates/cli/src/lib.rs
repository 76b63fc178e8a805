//! Verification suites, the gap scan and single-family bounds behind the
//! `randbound` command.

pub mod bound;
pub mod report;
pub mod suites;
