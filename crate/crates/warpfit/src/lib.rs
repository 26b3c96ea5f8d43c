//! warpfit estimates application silent-data-corruption (SDC) failure rates
//! by composing two measurements over a deterministic SIMT mini-ISA:
//! per-instruction-class error-manifestation rate tables (IPA) and
//! architecture-level fault-injection campaigns (APA).
//!
//! The crate is organized around that pipeline:
//!
//! - [`isa`]: assembly parser and warp-synchronous interpreter
//! - [`profile`]: fault-free dynamic profiling (class mix, issue rate)
//! - [`model`]: manifestation taxonomy, rate tables, corruption application
//! - [`inject`]: golden runs, site selection, campaigns, exhaustive oracle
//! - [`classify`]: outcome classification and event categorization
//! - [`compose`]: FIT-rate arithmetic and confidence intervals
//! - [`microbench`]: generators for the per-class microbenchmarks
//! - [`cli`]: the `warpfit` command-line front end
//!
//! Each major capability has a runnable example under `examples/`.
//!
//! ```
//! use warpfit::isa::{execute, parse_program, ExecConfig, RunStatus};
//!
//! let program = parse_program(
//!     ".shmem 4\n.output 0 1\n.kernel k\nMOVI R1, 2\nIADD R2, R1, R1\nSTS [0], R2\nEXIT\n",
//! )
//! .unwrap();
//! let result = execute(&program, &ExecConfig::default()).unwrap();
//! assert_eq!(result.status, RunStatus::Exited(0));
//! assert_eq!(result.output, vec![4]);
//! ```

pub mod classify;
pub mod compose;
pub mod inject;
pub mod isa;
pub mod microbench;
pub mod model;
pub mod profile;
pub mod stats;

pub mod cli;
