//! Repair of buggy if-conditions and missing preconditions in MiniLang
//! programs, driven by a test suite.

pub mod angelic;
pub mod corpus;
pub mod faultloc;
pub mod minilang;
pub mod pipeline;
pub mod synth;
pub mod testkit;
pub mod trace;

pub use corpus::{BugBundle, HarnessConfig, HarnessReport};
pub use faultloc::{Metric, Spectrum};
pub use minilang::{Location, Patch, Program, RepairKind, StatementKind};
pub use pipeline::{repair, Mode, NoPatchReason, RepairConfig, RepairOutcome, RepairReport};
pub use synth::{Backend, SmtLevel};
pub use testkit::Suite;
pub use trace::TraceMatrix;
