//! Sequential entry against an investment cost.

use crate::error::{Error, Result};
use crate::spectrum::{Freq, SpectrumAllocation};
use crate::static_sharing::{
    advance_phase, conforms, smallest_exceeding, Phase, Punishment, StaticParams, StaticProfile,
};
use crate::traffic::{expectation, LevelDistribution};
use crate::utility::UtilityModel;

pub const DEFAULT_ENTRY_CAP: usize = 4096;

/// Expected one-slot utility when `n` operators all use the full band.
pub fn u_f_of_n(n: usize, model: &UtilityModel, traffic: &LevelDistribution) -> Result<f64> {
    let x = model.full_spectrum_bandwidth(n)?;
    Ok(expectation(traffic, |l| model.pi(x, l)))
}

/// Expected one-slot utility on an exclusive `W/n` block.
pub fn u_o_of_n(n: usize, model: &UtilityModel, traffic: &LevelDistribution) -> Result<f64> {
    if n == 0 {
        return Err(Error::Domain("operator count must be at least 1".into()));
    }
    let x = model.bandwidth_mhz() / n as f64;
    Ok(expectation(traffic, |l| model.pi(x, l)))
}

/// Largest `n ≤ n_cap` with `u_f(n) ≥ c`, or 0 when even a monopolist cannot cover `c`.
pub fn max_entrants(cost: f64, model: &UtilityModel, traffic: &LevelDistribution, n_cap: usize) -> Result<usize> {
    if !(cost >= 0.0) {
        return Err(Error::Domain(format!("investment cost must be non-negative, got {cost}")));
    }
    if n_cap == 0 {
        return Err(Error::Domain("n_cap must be at least 1".into()));
    }
    if u_f_of_n(n_cap, model, traffic)? >= cost {
        return Err(Error::CapExceeded { lower_bound: n_cap });
    }
    for n in (1..n_cap).rev() {
        if u_f_of_n(n, model, traffic)? >= cost {
            return Ok(n);
        }
    }
    Ok(0)
}

/// Smallest `T` with `max_λ Ū(λ) − π(W/n, λ) < T (u_o(n) − u_f(n))`.
pub fn punishment_length_entry(n: usize, model: &UtilityModel, traffic: &LevelDistribution) -> Result<u32> {
    if n == 0 {
        return Err(Error::Domain("operator count must be at least 1".into()));
    }
    if n == 1 {
        return Ok(1);
    }
    let margin = u_o_of_n(n, model, traffic)? - u_f_of_n(n, model, traffic)?;
    if !(margin > 0.0) {
        return Err(Error::Infeasible(format!(
            "u_o({n}) - u_f({n}) = {margin} leaves nothing to protect"
        )));
    }
    let w = model.bandwidth_mhz() / n as f64;
    let need = traffic
        .reachable_levels()
        .into_iter()
        .map(|l| model.upper_utility(l) - model.pi(w, l))
        .fold(f64::NEG_INFINITY, f64::max);
    smallest_exceeding(need, margin)
}

#[derive(Clone, Debug, PartialEq)]
pub struct EntryParams {
    pub cost: f64,
    /// Slot at which prospective operator `j` (0-based) arrives; strictly increasing.
    pub arrivals: Vec<u64>,
    /// Common traffic distribution of every operator.
    pub traffic: LevelDistribution,
    pub n_cap: usize,
    /// Overrides `T(n)` for every market size when set.
    pub punishment: Option<Punishment>,
}

impl EntryParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.cost >= 0.0) {
            return Err(Error::Domain(format!("investment cost must be non-negative, got {}", self.cost)));
        }
        if self.arrivals.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Domain("arrival slots must be strictly increasing".into()));
        }
        self.traffic.validate()
    }
}

/// What a newly arrived operator does.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ArrivalAction {
    Invest,
    StayOut,
    /// Enters against the profile and transmits on the full band from then on.
    Intrude,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct EntryState {
    pub investors: usize,
    pub intruders: usize,
    pub phase: Phase,
}

impl EntryState {
    pub fn present(&self) -> usize {
        self.investors + self.intruders
    }

    pub fn collapsed(&self) -> bool {
        self.phase == Phase::Permanent
    }
}

/// Entry game with `n*` and the punishment lengths precomputed.
#[derive(Clone, Debug)]
pub struct EntryGame {
    params: EntryParams,
    bandwidth: Freq,
    n_star: usize,
    profiles: Vec<StaticProfile>,
}

impl EntryGame {
    pub fn new(model: &UtilityModel, params: EntryParams) -> Result<Self> {
        params.validate()?;
        let n_star = max_entrants(params.cost, model, &params.traffic, params.n_cap)?;
        let mut profiles = Vec::with_capacity(n_star);
        for n in 1..=n_star {
            let t = match params.punishment {
                Some(p) => p,
                None => Punishment::Slots(punishment_length_entry(n, model, &params.traffic)?),
            };
            profiles.push(StaticProfile::new(StaticParams::uniform(n, t)?, model.bandwidth)?);
        }
        Ok(EntryGame {
            params,
            bandwidth: model.bandwidth,
            n_star,
            profiles,
        })
    }

    pub fn params(&self) -> &EntryParams {
        &self.params
    }

    pub fn n_star(&self) -> usize {
        self.n_star
    }

    /// Whether the `index`-th arrival (1-based) invests on the equilibrium path.
    pub fn invests(&self, index: usize) -> bool {
        index >= 1 && index <= self.n_star
    }

    /// `T(n)` in force with `n` investors.
    pub fn punishment(&self, n: usize) -> Punishment {
        if n == 0 {
            return Punishment::Slots(1);
        }
        self.profiles[n - 1].params().punishment
    }

    pub fn initial(&self) -> EntryState {
        EntryState {
            investors: 0,
            intruders: 0,
            phase: Phase::Cooperation,
        }
    }

    /// Allocations for investors (in arrival order) followed by intruders.
    pub fn prescribed(&self, state: &EntryState) -> Vec<SpectrumAllocation> {
        let mut out = match (state.phase, state.investors) {
            (_, 0) => Vec::new(),
            (Phase::Cooperation, n) => self.profiles[n - 1].blocks().to_vec(),
            (_, n) => vec![SpectrumAllocation::full(self.bandwidth); n],
        };
        out.extend(std::iter::repeat_n(
            SpectrumAllocation::full(self.bandwidth),
            state.intruders,
        ));
        out
    }

    /// Advances one slot. `observed` holds last slot's supports of everyone
    /// present then; `arrivals` the actions of operators arriving this slot.
    pub fn step(
        &self,
        prev: &EntryState,
        observed: &[SpectrumAllocation],
        arrivals: &[ArrivalAction],
    ) -> Result<(EntryState, Vec<SpectrumAllocation>)> {
        let mut expected = self.prescribed(prev);
        // an intruder is supposed to stay silent
        for slot in expected.iter_mut().skip(prev.investors) {
            *slot = SpectrumAllocation::empty();
        }
        let ok = conforms(observed, &expected)?;
        let phase = if prev.intruders > 0 {
            Phase::Permanent
        } else {
            advance_phase(prev.phase, ok, self.punishment(prev.investors))
        };
        let mut next = EntryState { phase, ..*prev };
        for action in arrivals {
            match action {
                ArrivalAction::Invest => {
                    if next.investors >= self.n_star || next.intruders > 0 {
                        return Err(Error::Contract(format!(
                            "arrival cannot invest with {} investors and n* = {}",
                            next.investors, self.n_star
                        )));
                    }
                    next.investors += 1;
                }
                ArrivalAction::StayOut => {}
                ArrivalAction::Intrude => next.intruders += 1,
            }
        }
        let allocs = self.prescribed(&next);
        Ok((next, allocs))
    }
}
