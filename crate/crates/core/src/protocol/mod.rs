//! Server and agent round logic.
//!
//! A run starts with an initialization round (round 0) in which every agent
//! queries `N_init` points and the server releases a first broadcast. In each
//! of rounds `1..=T` an agent either runs local Thompson sampling (with
//! probability `p_t`, or always after the cutoff) or maximizes the function
//! reconstructed from the previous round's broadcast, then sends a fresh
//! posterior sample ω to the server. The server aggregates whenever a later
//! round can still use the result, and charges the privacy ledger once per
//! aggregation.

mod agent;
mod run;
mod schedule;

pub use agent::{argmax, draw_branch, Agent, Branch, Environment, Query, StepInputs};
pub use run::{
    fresh_ledger, run, run_seed, threads_from_env, Problem, ProtocolConfig, RoundRecord, RunTrace,
    TraceRow,
};
pub use schedule::{PSchedule, PValue, P_MIN};
