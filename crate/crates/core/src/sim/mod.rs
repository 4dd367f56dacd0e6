//! Slot-by-slot simulation of the sharing schemes with discounted revenue.

mod engine;
mod revenue;

pub use engine::{replicate, run, run_with, Engine, ReplicationSummary};
pub use revenue::{default_horizon, revenue, RevenueReport, DEFAULT_TAIL_TOLERANCE};

use crate::dynamic::DynamicParams;
use crate::entry::EntryParams;
use crate::error::{Error, Result};
use crate::spectrum::Freq;
use crate::static_sharing::StaticParams;
use crate::traffic::TrafficSpec;
use crate::utility::UtilityModel;

#[derive(Clone, Debug)]
pub enum Scheme {
    FullSpectrum,
    Static(StaticParams),
    Entry(EntryParams),
    Dynamic(DynamicParams),
}

impl Scheme {
    pub fn label(&self) -> &'static str {
        match self {
            Scheme::FullSpectrum => "full",
            Scheme::Static(_) => "static",
            Scheme::Entry(_) => "entry",
            Scheme::Dynamic(_) => "dynamic",
        }
    }
}

#[derive(Clone, Debug)]
pub struct Scenario {
    pub model: UtilityModel,
    /// One distribution per operator; for entry, one per prospective operator.
    pub traffic: TrafficSpec,
    pub scheme: Scheme,
    pub discount: f64,
    pub horizon: u64,
    pub seed: u64,
    pub replications: usize,
}

impl Scenario {
    pub fn n(&self) -> usize {
        self.traffic.len()
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.discount) {
            return Err(Error::Config(format!("discount must lie in [0, 1), got {}", self.discount)));
        }
        if self.horizon == 0 {
            return Err(Error::Config("horizon must be at least one slot".into()));
        }
        if self.replications == 0 {
            return Err(Error::Config("replications must be at least 1".into()));
        }
        if self.traffic.is_empty() {
            return Err(Error::Config("scenario needs at least one operator".into()));
        }
        let n = self.n();
        match &self.scheme {
            Scheme::FullSpectrum => {}
            Scheme::Static(p) => {
                if p.n != n {
                    return Err(Error::Config(format!("static scheme for {} operators, traffic for {n}", p.n)));
                }
            }
            Scheme::Entry(p) => {
                p.validate().map_err(|e| Error::Config(e.to_string()))?;
                if p.arrivals.len() != n {
                    return Err(Error::Config(format!(
                        "{} arrivals but traffic for {n} operators",
                        p.arrivals.len()
                    )));
                }
                if self.traffic.operators.iter().any(|d| *d != p.traffic) {
                    return Err(Error::Config("entry requires identical traffic for every operator".into()));
                }
            }
            Scheme::Dynamic(p) => {
                if p.n != n {
                    return Err(Error::Config(format!("dynamic scheme for {} operators, traffic for {n}", p.n)));
                }
                if p.bandwidth != self.model.bandwidth {
                    return Err(Error::Config("dynamic scheme bandwidth differs from the model".into()));
                }
                p.validate().map_err(|e| Error::Config(e.to_string()))?;
                if !self.traffic.all_binary() {
                    return Err(Error::Config("dynamic sharing requires two-level traffic".into()));
                }
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum DeviationKind {
    /// Report high traffic regardless of the truth.
    LieHigh,
    /// Report low traffic regardless of the truth.
    LieLow,
    /// Transmit a contiguous block of this width starting at the prescribed block's start.
    UseWidth(Freq),
    /// Transmit on the whole band.
    FullBand,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Persistence {
    OneShot,
    Persistent,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DeviationInjector {
    pub operator: usize,
    pub slot: u64,
    pub kind: DeviationKind,
    pub persistence: Persistence,
}

impl DeviationInjector {
    pub fn one_shot(operator: usize, slot: u64, kind: DeviationKind) -> Self {
        DeviationInjector {
            operator,
            slot,
            kind,
            persistence: Persistence::OneShot,
        }
    }

    pub fn active(&self, slot: u64) -> bool {
        match self.persistence {
            Persistence::OneShot => slot == self.slot,
            Persistence::Persistent => slot >= self.slot,
        }
    }

    pub fn is_lie(&self) -> bool {
        matches!(self.kind, DeviationKind::LieHigh | DeviationKind::LieLow)
    }
}

/// One operator in one slot.
#[derive(Clone, Debug, PartialEq)]
pub struct SlotRecord {
    pub slot: u64,
    /// 1-based.
    pub operator: usize,
    pub traffic: f64,
    pub width: Freq,
    pub utility: f64,
    /// Balance at the start of the slot.
    pub balance: Freq,
    pub phase: &'static str,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Trace {
    pub records: Vec<SlotRecord>,
}

pub const PHASE_LABELS: [&str; 6] = ["cooperation", "punishment", "permanent", "collapsed", "inactive", "full"];

/// Maps a label read back from a trace onto its static string.
pub fn phase_label(s: &str) -> Option<&'static str> {
    PHASE_LABELS.iter().copied().find(|&p| p == s)
}
