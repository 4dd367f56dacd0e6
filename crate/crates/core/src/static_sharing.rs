//! Fixed orthogonal sharing with trigger punishment.

use std::fmt;

use crate::error::{Error, Result};
use crate::spectrum::{tile, Freq, SpectrumAllocation};
use crate::traffic::{expectation, TrafficSpec};
use crate::utility::UtilityModel;

/// Phase of a trigger-strategy profile for the current slot.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Phase {
    Cooperation,
    /// Full-band punishment; `remaining` counts this slot.
    Punishment { remaining: u32 },
    /// Everlasting full-band transmission (grim trigger or a collapsed entry game).
    Permanent,
}

impl Phase {
    pub fn is_cooperation(self) -> bool {
        self == Phase::Cooperation
    }

    pub fn label(self) -> &'static str {
        match self {
            Phase::Cooperation => "cooperation",
            Phase::Punishment { .. } => "punishment",
            Phase::Permanent => "permanent",
        }
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Phase::Punishment { remaining } => write!(f, "punishment({remaining})"),
            other => f.write_str(other.label()),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Punishment {
    Slots(u32),
    Grim,
}

impl Punishment {
    pub fn slots(t: u32) -> Result<Self> {
        if t == 0 {
            return Err(Error::Domain("punishment length must be at least 1".into()));
        }
        Ok(Punishment::Slots(t))
    }
}

/// Phase for this slot given last slot's phase and whether everyone conformed to it.
///
/// Nonconformance in any phase (including punishment) starts a fresh window.
pub fn advance_phase(prev: Phase, conforming: bool, punishment: Punishment) -> Phase {
    match (prev, conforming) {
        (Phase::Permanent, _) => Phase::Permanent,
        (_, false) => match punishment {
            Punishment::Grim => Phase::Permanent,
            Punishment::Slots(t) => Phase::Punishment { remaining: t },
        },
        (Phase::Cooperation, true) => Phase::Cooperation,
        (Phase::Punishment { remaining }, true) if remaining > 1 => Phase::Punishment {
            remaining: remaining - 1,
        },
        (Phase::Punishment { .. }, true) => Phase::Cooperation,
    }
}

/// Exact support comparison of what was observed against what was prescribed.
pub fn conforms(observed: &[SpectrumAllocation], prescribed: &[SpectrumAllocation]) -> Result<bool> {
    if observed.len() != prescribed.len() {
        return Err(Error::Contract(format!(
            "observed {} allocations, expected {}",
            observed.len(),
            prescribed.len()
        )));
    }
    Ok(observed
        .iter()
        .zip(prescribed)
        .all(|(o, p)| o.same_support(p)))
}

#[derive(Clone, Debug, PartialEq)]
pub struct StaticParams {
    pub n: usize,
    /// Bandwidth fractions in operator order.
    pub shares: Vec<f64>,
    pub punishment: Punishment,
}

impl StaticParams {
    pub fn uniform(n: usize, punishment: Punishment) -> Result<Self> {
        if n == 0 {
            return Err(Error::Domain("need at least one operator".into()));
        }
        Self::new(vec![1.0 / n as f64; n], punishment)
    }

    pub fn new(shares: Vec<f64>, punishment: Punishment) -> Result<Self> {
        if shares.is_empty() {
            return Err(Error::Domain("need at least one operator".into()));
        }
        if shares.iter().any(|&s| !(s > 0.0)) {
            return Err(Error::Domain("shares must be positive".into()));
        }
        let total: f64 = shares.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::Domain(format!("shares sum to {total}, not 1")));
        }
        if punishment == Punishment::Slots(0) {
            return Err(Error::Domain("punishment length must be at least 1".into()));
        }
        Ok(StaticParams {
            n: shares.len(),
            shares,
            punishment,
        })
    }

    /// Block widths; the last block absorbs rounding so the blocks tile `[0, W)`.
    pub fn widths(&self, bandwidth: Freq) -> Vec<Freq> {
        let mut cumulative = 0.0;
        let mut prev = Freq::ZERO;
        let mut widths = Vec::with_capacity(self.n);
        for (i, share) in self.shares.iter().enumerate() {
            cumulative += share;
            let edge = if i + 1 == self.n {
                bandwidth
            } else {
                Freq::from_hz((cumulative * bandwidth.hz() as f64).round() as i64)
            };
            widths.push(edge - prev);
            prev = edge;
        }
        widths
    }
}

/// Operator `i`'s contiguous block `[Σ_{j<i} share_j W, Σ_{j≤i} share_j W)`.
pub fn static_allocation(params: &StaticParams, bandwidth: Freq, operator: usize) -> Result<SpectrumAllocation> {
    if operator >= params.n {
        return Err(Error::Contract(format!("operator {operator} out of range")));
    }
    let blocks = tile(&params.widths(bandwidth), bandwidth)?;
    Ok(blocks[operator].clone())
}

/// Trigger profile over fixed blocks.
#[derive(Clone, Debug)]
pub struct StaticProfile {
    params: StaticParams,
    bandwidth: Freq,
    blocks: Vec<SpectrumAllocation>,
}

impl StaticProfile {
    pub fn new(params: StaticParams, bandwidth: Freq) -> Result<Self> {
        let blocks = tile(&params.widths(bandwidth), bandwidth)?;
        Ok(StaticProfile {
            params,
            bandwidth,
            blocks,
        })
    }

    pub fn params(&self) -> &StaticParams {
        &self.params
    }

    pub fn blocks(&self) -> &[SpectrumAllocation] {
        &self.blocks
    }

    /// What every operator should transmit in a slot with the given phase.
    pub fn prescribed(&self, phase: Phase) -> Vec<SpectrumAllocation> {
        match phase {
            Phase::Cooperation => self.blocks.clone(),
            _ => vec![SpectrumAllocation::full(self.bandwidth); self.params.n],
        }
    }

    /// Slot 0.
    pub fn initial(&self) -> (Phase, Vec<SpectrumAllocation>) {
        (Phase::Cooperation, self.blocks.clone())
    }

    /// Given last slot's phase and the supports observed in it, returns this
    /// slot's phase and everyone's prescribed allocation.
    pub fn step(
        &self,
        prev: Phase,
        observed: &[SpectrumAllocation],
    ) -> Result<(Phase, Vec<SpectrumAllocation>)> {
        let ok = conforms(observed, &self.prescribed(prev))?;
        let phase = advance_phase(prev, ok, self.params.punishment);
        Ok((phase, self.prescribed(phase)))
    }

    /// [`step`](Self::step) from one operator's point of view.
    pub fn step_operator(
        &self,
        operator: usize,
        prev: Phase,
        observed: &[SpectrumAllocation],
    ) -> Result<(Phase, SpectrumAllocation)> {
        if operator >= self.params.n {
            return Err(Error::Contract(format!("operator {operator} out of range")));
        }
        let (phase, mut allocs) = self.step(prev, observed)?;
        Ok((phase, allocs.swap_remove(operator)))
    }
}

/// Per-operator quantities behind the punishment-length condition.
#[derive(Clone, Debug, PartialEq)]
pub struct PunishmentTerms {
    /// `max_λ Ū(λ) − π(w_i, λ)` over the operator's reachable levels.
    pub deviation_gain: f64,
    /// `u_o^i − u_f^i`.
    pub cooperation_margin: f64,
}

pub fn punishment_terms(model: &UtilityModel, traffic: &TrafficSpec, params: &StaticParams) -> Result<Vec<PunishmentTerms>> {
    if traffic.len() != params.n {
        return Err(Error::Contract(format!(
            "{} traffic distributions for {} operators",
            traffic.len(),
            params.n
        )));
    }
    let widths = params.widths(model.bandwidth);
    let full_bw = model.full_spectrum_bandwidth(params.n)?;
    Ok(traffic
        .operators
        .iter()
        .zip(&widths)
        .map(|(dist, w)| {
            let w = w.mhz();
            let u_o = expectation(dist, |l| model.pi(w, l));
            let u_f = expectation(dist, |l| model.pi(full_bw, l));
            let deviation_gain = dist
                .reachable_levels()
                .into_iter()
                .map(|l| model.upper_utility(l) - model.pi(w, l))
                .fold(f64::NEG_INFINITY, f64::max);
            PunishmentTerms {
                deviation_gain,
                cooperation_margin: u_o - u_f,
            }
        })
        .collect())
}

/// Smallest `T` with `Ū(λ) − π(w_i, λ) < T (u_o^i − u_f^i)` for every operator and level.
pub fn min_punishment_length(model: &UtilityModel, traffic: &TrafficSpec, params: &StaticParams) -> Result<u32> {
    if params.n == 1 {
        return Ok(1);
    }
    let mut t_max = 1u32;
    for (i, terms) in punishment_terms(model, traffic, params)?.iter().enumerate() {
        if !(terms.cooperation_margin > 0.0) {
            return Err(Error::Infeasible(format!(
                "operator {} gains nothing from cooperation (u_o - u_f = {})",
                i + 1,
                terms.cooperation_margin
            )));
        }
        t_max = t_max.max(smallest_exceeding(terms.deviation_gain, terms.cooperation_margin)?);
    }
    Ok(t_max)
}

/// Smallest integer `T ≥ 1` with `need < T · per_slot`.
pub(crate) fn smallest_exceeding(need: f64, per_slot: f64) -> Result<u32> {
    let ratio = (need / per_slot).max(0.0);
    if !ratio.is_finite() || ratio >= u32::MAX as f64 - 1.0 {
        return Err(Error::Infeasible(format!("punishment length overflows ({ratio})")));
    }
    let mut t = (ratio.floor() as u32).max(1);
    while !(need < t as f64 * per_slot) {
        t += 1;
    }
    while t > 1 && need < (t - 1) as f64 * per_slot {
        t -= 1;
    }
    Ok(t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectrum::tiles_band;
    use crate::utility::UtilityFamily;

    fn w100() -> Freq {
        Freq::from_mhz(100.0)
    }

    fn alloc(r: &[(f64, f64)]) -> SpectrumAllocation {
        SpectrumAllocation::from_mhz(r).unwrap()
    }

    #[test]
    fn allocation_examples() {
        let p = StaticParams::uniform(2, Punishment::Slots(3)).unwrap();
        assert_eq!(static_allocation(&p, w100(), 0).unwrap(), alloc(&[(0.0, 50.0)]));
        assert_eq!(static_allocation(&p, w100(), 1).unwrap(), alloc(&[(50.0, 100.0)]));
        let p4 = StaticParams::uniform(4, Punishment::Slots(3)).unwrap();
        let blocks: Vec<_> = (0..4).map(|i| static_allocation(&p4, w100(), i).unwrap()).collect();
        assert!(blocks.iter().all(|b| b.width() == Freq::from_mhz(25.0)));
        assert!(tiles_band(&blocks, w100()));
        let uneven = StaticParams::new(vec![0.3, 0.7], Punishment::Slots(1)).unwrap();
        assert_eq!(static_allocation(&uneven, w100(), 0).unwrap(), alloc(&[(0.0, 30.0)]));
        assert_eq!(static_allocation(&uneven, w100(), 1).unwrap(), alloc(&[(30.0, 100.0)]));
    }

    #[test]
    fn uniform_thirds_still_tile() {
        let p = StaticParams::uniform(3, Punishment::Slots(1)).unwrap();
        let profile = StaticProfile::new(p, w100()).unwrap();
        assert!(tiles_band(profile.blocks(), w100()));
    }

    #[test]
    fn rejects_bad_params() {
        assert!(StaticParams::new(vec![0.5, 0.4], Punishment::Slots(1)).is_err());
        assert!(StaticParams::new(vec![1.0, 0.0], Punishment::Slots(1)).is_err());
        assert!(StaticParams::uniform(2, Punishment::Slots(0)).is_err());
        assert!(Punishment::slots(0).is_err());
    }

    #[test]
    fn step_examples() {
        let p = StaticParams::uniform(2, Punishment::Slots(3)).unwrap();
        let profile = StaticProfile::new(p, w100()).unwrap();
        let (phase, blocks) = profile.initial();
        let (next, mine) = profile.step_operator(0, phase, &blocks).unwrap();
        assert_eq!(next, Phase::Cooperation);
        assert_eq!(mine, blocks[0]);

        let observed = vec![blocks[0].clone(), SpectrumAllocation::full(w100())];
        let (next, mine) = profile.step_operator(0, Phase::Cooperation, &observed).unwrap();
        assert_eq!(next, Phase::Punishment { remaining: 3 });
        assert_eq!(mine, SpectrumAllocation::full(w100()));

        let full = profile.prescribed(Phase::Punishment { remaining: 1 });
        let (next, mine) = profile
            .step_operator(1, Phase::Punishment { remaining: 1 }, &full)
            .unwrap();
        assert_eq!(next, Phase::Cooperation);
        assert_eq!(mine, blocks[1]);

        assert!(matches!(
            profile.step(Phase::Cooperation, &blocks[..1]),
            Err(Error::Contract(_))
        ));
    }

    #[test]
    fn punishment_lasts_exactly_t_slots() {
        let p = StaticParams::uniform(3, Punishment::Slots(4)).unwrap();
        let profile = StaticProfile::new(p, w100()).unwrap();
        let (mut phase, mut emitted) = profile.initial();
        emitted[2] = SpectrumAllocation::full(w100());
        let mut full_slots = 0;
        for _ in 0..10 {
            let (next, allocs) = profile.step(phase, &emitted).unwrap();
            if !next.is_cooperation() {
                full_slots += 1;
            }
            phase = next;
            emitted = allocs;
        }
        assert_eq!(full_slots, 4);
        assert_eq!(phase, Phase::Cooperation);
    }

    #[test]
    fn grim_never_exits() {
        let p = StaticParams::uniform(2, Punishment::Grim).unwrap();
        let profile = StaticProfile::new(p, w100()).unwrap();
        let (_, blocks) = profile.initial();
        let observed = vec![SpectrumAllocation::full(w100()), blocks[1].clone()];
        let (mut phase, mut emitted) = profile.step(Phase::Cooperation, &observed).unwrap();
        for _ in 0..10_000 {
            assert_eq!(phase, Phase::Permanent);
            let (p, e) = profile.step(phase, &emitted).unwrap();
            phase = p;
            emitted = e;
        }
    }

    #[test]
    fn min_punishment_linear_example() {
        let model = crate::utility::UtilityModel::shannon(100.0, 100.0, UtilityFamily::Linear).unwrap();
        let traffic = TrafficSpec::two_level(&[0.5, 0.5]).unwrap();
        let p = StaticParams::uniform(2, Punishment::Slots(1)).unwrap();
        let terms = punishment_terms(&model, &traffic, &p).unwrap();
        let r = 101f64.log2();
        let gain = 50.0 * r;
        let margin = 0.5 * 50.0 * r - 0.5 * 100.0 * (1.0 + 100.0 / 101.0f64).log2();
        assert!((terms[0].deviation_gain - gain).abs() < 1e-9);
        assert!((terms[0].cooperation_margin - margin).abs() < 1e-9);
        assert!((gain / margin - 2.85).abs() < 0.01);
        assert_eq!(min_punishment_length(&model, &traffic, &p).unwrap(), 3);
    }

    #[test]
    fn single_operator_needs_no_punishment() {
        let model = crate::utility::UtilityModel::shannon(100.0, 100.0, UtilityFamily::Linear).unwrap();
        let traffic = TrafficSpec::two_level(&[0.5]).unwrap();
        let p = StaticParams::uniform(1, Punishment::Slots(1)).unwrap();
        assert_eq!(min_punishment_length(&model, &traffic, &p).unwrap(), 1);
    }

    #[test]
    fn cobb_douglas_matches_scan() {
        let model = crate::utility::UtilityModel::shannon(100.0, 100.0, UtilityFamily::cobb_douglas()).unwrap();
        let traffic = TrafficSpec::two_level(&[0.25, 0.5]).unwrap();
        let p = StaticParams::uniform(2, Punishment::Slots(1)).unwrap();
        let t = min_punishment_length(&model, &traffic, &p).unwrap();
        // brute-force scan straight from the definition
        let r = 101f64.log2();
        let pi = |x: f64, l: f64| (24.0 * l + 1.0).sqrt() * (r * x).powf(0.9);
        let xf = 100.0 / r * (1.0 + 100.0 / 101.0f64).log2();
        let scan = |ph: f64| {
            let margin = ph * (pi(50.0, 1.0) - pi(xf, 1.0)) + (1.0 - ph) * (pi(50.0, 0.0) - pi(xf, 0.0));
            let need = [0.0, 1.0]
                .iter()
                .map(|&l| pi(100.0, l) - pi(50.0, l))
                .fold(f64::MIN, f64::max);
            (1..).find(|&t| need < t as f64 * margin).unwrap()
        };
        assert_eq!(t, scan(0.25).max(scan(0.5)));
    }

    #[test]
    fn infeasible_below_crossover() {
        let model = crate::utility::UtilityModel::shannon(100.0, 1.0, UtilityFamily::cobb_douglas()).unwrap();
        let traffic = TrafficSpec::two_level(&[0.5, 0.5]).unwrap();
        let p = StaticParams::uniform(2, Punishment::Slots(1)).unwrap();
        assert!(matches!(
            min_punishment_length(&model, &traffic, &p),
            Err(Error::Infeasible(_))
        ));
    }
}
