//! Incremental universal search over self-delimiting programs for a small
//! stack machine, together with the classic baselines it is measured against.
//!
//! The crate is `no_std` and needs only `alloc`. File formats, the command
//! line and parallel sampling live in the `oops` companion crate.

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod dovetail;
pub mod guess;
pub mod isa;
pub mod lsearch;
pub mod oops;
pub mod space;
pub mod store;
pub mod task;
pub mod vm;

pub use isa::{Alphabet, Op, TokenId};
pub use space::{Prefix, Prob, ProbabilityEdit, WeightTable};
pub use store::FrozenStore;
pub use vm::{ExecOutcome, Fault, MachineState, Snapshot};
