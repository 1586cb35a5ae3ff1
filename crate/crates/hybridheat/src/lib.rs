//! Configuration, orchestration and file output around `hybridheat-core`.

pub mod bench;
pub mod compare;
pub mod config;
pub mod io;
pub mod run;

/// Process exit codes of the CLI.
pub mod exit {
    pub const PASS: i32 = 0;
    pub const ERROR: i32 = 1;
    pub const FAIL: i32 = 2;
}
