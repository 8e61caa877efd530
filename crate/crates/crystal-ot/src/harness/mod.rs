//! Verification harness: scenario configuration, brute-force oracles, the
//! seeded random suite, and per-scenario verdicts.

pub mod oracle;
pub mod rng;
pub mod scenario;
pub mod suite;

pub use oracle::{oracle_vertex_enumeration, OracleOutcome, ORACLE_LIMIT};
pub use scenario::{builtin_scenarios, DensityId, MeasureSpec, Scenario};
pub use suite::{run_suite, CheckResult, VerdictBundle};
