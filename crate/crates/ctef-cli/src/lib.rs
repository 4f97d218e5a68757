//! Support library of the `ctef` command-line tool: CSV and JSON formats,
//! SVG rendering and the benchmark grid engine. The binary in `main.rs` is a
//! thin argument-parsing layer over these modules.

pub mod bench;
pub mod csvio;
pub mod report;
pub mod svg;
