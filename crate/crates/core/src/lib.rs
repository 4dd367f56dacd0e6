//! Spectrum sharing among strategic operators in an unlicensed band.
//!
//! The crate evaluates the interference model and utility families, runs
//! static, entry and dynamic (borrow/lend) sharing schemes slot by slot, and
//! certifies sharing profiles as subgame-perfect by exact one-shot deviation
//! checks on the balance chain.

// `!(x > 0.0)` is used on purpose so NaN is rejected too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dynamic;
pub mod entry;
pub mod error;
pub mod figures;
pub mod io;
pub mod sim;
pub mod spectrum;
pub mod static_sharing;
pub mod traffic;
pub mod utility;
pub mod verifier;

pub use dynamic::{choose_delta, trading_policy, DeltaChoice, DynamicParams, DynamicProfile, DynamicState, Trade};
pub use entry::{max_entrants, punishment_length_entry, u_f_of_n, u_o_of_n, EntryGame, EntryParams};
pub use error::{Error, Result};
pub use sim::{replicate, revenue, run, DeviationInjector, DeviationKind, Persistence, RevenueReport, Scenario, Scheme, Trace};
pub use spectrum::{Freq, Interval, SpectrumAllocation};
pub use static_sharing::{min_punishment_length, static_allocation, Phase, Punishment, StaticParams, StaticProfile};
pub use traffic::{LevelDistribution, TrafficSpec};
pub use utility::{RateFunction, UtilityFamily, UtilityModel};
pub use verifier::{DeviationFinding, DeviationKindTag};
