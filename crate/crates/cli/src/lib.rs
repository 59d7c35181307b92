//! Library surface of the command-line tool: file formats, tensor family
//! generators and report schemas, reused by the binary and the test suites.

pub mod gen;
pub mod io;
pub mod report;
