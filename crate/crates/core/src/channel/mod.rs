//! Fiber propagation, amplification, optical filtering and noise loading.

pub mod amplifier;
pub mod fiber;
pub mod filter;
pub mod link;

pub use amplifier::{ase_load, edfa, ledger_osnr_db, AmplifierParams};
pub use fiber::{ssfm_propagate, FiberParams, SsfmStats, StepRule, MANAKOV_FACTOR};
pub use filter::{obpf, FilterShape};
pub use link::{derive_seed, run_link, run_link_with_taps, LinkPlan, LinkStats, ObpfParams};
