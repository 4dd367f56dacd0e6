use rayon::prelude::*;

use crate::dynamic::{DynamicProfile, DynamicState};
use crate::entry::{ArrivalAction, EntryGame, EntryState};
use crate::error::{Error, Result};
use crate::spectrum::{Freq, SpectrumAllocation};
use crate::static_sharing::{Phase, StaticProfile};
use crate::traffic::{counter_rng, sample_all};

use super::revenue::{RevenueAccumulator, RevenueReport};
use super::{DeviationInjector, DeviationKind, Scenario, Scheme, SlotRecord, Trace};

enum Driver {
    Full,
    Static(StaticProfile),
    Entry(EntryGame),
    Dynamic(DynamicProfile),
}

/// A validated scenario with its scheme precomputed, ready to run any seed.
pub struct Engine {
    scenario: Scenario,
    injectors: Vec<DeviationInjector>,
    driver: Driver,
    u_max: f64,
}

enum SchemeState {
    Full,
    Static(Phase),
    Entry {
        state: EntryState,
        investors: Vec<usize>,
        intruders: Vec<usize>,
    },
    Dynamic(DynamicState),
}

fn phase_label(phase: Phase, collapsed_label: &'static str) -> &'static str {
    match phase {
        Phase::Permanent => collapsed_label,
        p => p.label(),
    }
}

impl Engine {
    pub fn new(scenario: &Scenario, injectors: &[DeviationInjector]) -> Result<Self> {
        scenario.validate()?;
        let n = scenario.n();
        for inj in injectors {
            if inj.operator >= n {
                return Err(Error::Config(format!("injector targets operator {} of {n}", inj.operator + 1)));
            }
            if inj.slot >= scenario.horizon {
                return Err(Error::Config(format!(
                    "injector slot {} is beyond the horizon {}",
                    inj.slot, scenario.horizon
                )));
            }
            if inj.is_lie() && !matches!(scenario.scheme, Scheme::Dynamic(_)) {
                return Err(Error::Config(format!(
                    "traffic reports only exist in dynamic sharing, not under the {} scheme",
                    scenario.scheme.label()
                )));
            }
            if let DeviationKind::UseWidth(w) = inj.kind {
                if w < Freq::ZERO || w > scenario.model.bandwidth {
                    return Err(Error::Config(format!("injected width {w} MHz outside [0, W]")));
                }
            }
        }
        let driver = match &scenario.scheme {
            Scheme::FullSpectrum => Driver::Full,
            Scheme::Static(p) => Driver::Static(StaticProfile::new(p.clone(), scenario.model.bandwidth)?),
            Scheme::Entry(p) => Driver::Entry(EntryGame::new(&scenario.model, p.clone())?),
            Scheme::Dynamic(p) => Driver::Dynamic(DynamicProfile::new(p.clone())?),
        };
        let u_max = scenario
            .traffic
            .operators
            .iter()
            .map(|d| scenario.model.upper_utility(d.max_level()))
            .fold(0.0, f64::max);
        Ok(Engine {
            scenario: scenario.clone(),
            injectors: injectors.to_vec(),
            driver,
            u_max,
        })
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    fn emission_override(&self, op: usize, slot: u64) -> Option<DeviationKind> {
        self.injectors
            .iter()
            .rfind(|i| i.operator == op && i.active(slot) && !i.is_lie())
            .map(|i| i.kind)
    }

    fn report(&self, op: usize, slot: u64, truth: bool) -> bool {
        self.injectors
            .iter()
            .rfind(|i| i.operator == op && i.active(slot) && i.is_lie())
            .map(|i| i.kind == DeviationKind::LieHigh)
            .unwrap_or(truth)
    }

    fn emit(&self, kind: DeviationKind, prescribed: &SpectrumAllocation) -> Result<SpectrumAllocation> {
        let band = self.scenario.model.bandwidth;
        match kind {
            DeviationKind::FullBand => Ok(SpectrumAllocation::full(band)),
            DeviationKind::UseWidth(w) => {
                let lo = prescribed.intervals().first().map_or(Freq::ZERO, |iv| iv.lo);
                let lo = if lo + w > band { band - w } else { lo };
                SpectrumAllocation::block(lo, lo + w)
            }
            DeviationKind::LieHigh | DeviationKind::LieLow => Ok(prescribed.clone()),
        }
    }

    /// Runs one replication with the given traffic seed, handing every record to `sink`.
    pub fn run_seed(&self, seed: u64, sink: &mut dyn FnMut(&SlotRecord)) -> Result<RevenueReport> {
        let sc = &self.scenario;
        let n = sc.n();
        let model = &sc.model;
        let band = model.bandwidth;
        let mut acc = RevenueAccumulator::new(n, sc.discount);
        let mut state = match &self.driver {
            Driver::Full => SchemeState::Full,
            Driver::Static(_) => SchemeState::Static(Phase::Cooperation),
            Driver::Entry(g) => SchemeState::Entry {
                state: g.initial(),
                investors: Vec::new(),
                intruders: Vec::new(),
            },
            Driver::Dynamic(p) => SchemeState::Dynamic(p.initial()),
        };
        // emitted[j] is the j-th present transmitter's support; `owners[j]` its operator
        let mut emitted: Vec<SpectrumAllocation> = Vec::new();
        let mut owners: Vec<usize>;
        let mut arrived = 0usize;
        let mut others: Vec<SpectrumAllocation> = Vec::with_capacity(n);
        for slot in 0..sc.horizon {
            let levels = sample_all(&sc.traffic, slot, seed);
            let mut balances = vec![Freq::ZERO; n];
            let mut labels: Vec<&'static str> = vec!["inactive"; n];
            let prescribed: Vec<SpectrumAllocation> = match (&self.driver, &mut state) {
                (Driver::Full, SchemeState::Full) => {
                    owners = (0..n).collect();
                    labels.fill("full");
                    vec![SpectrumAllocation::full(band); n]
                }
                (Driver::Static(profile), SchemeState::Static(phase)) => {
                    let allocs = if slot == 0 {
                        profile.initial().1
                    } else {
                        let (next, allocs) = profile.step(*phase, &emitted)?;
                        *phase = next;
                        allocs
                    };
                    owners = (0..n).collect();
                    labels.fill(phase.label());
                    allocs
                }
                (Driver::Dynamic(profile), SchemeState::Dynamic(st)) => {
                    balances = st.balances(profile.params().trade);
                    let reports: Vec<bool> = (0..n).map(|i| self.report(i, slot, levels[i] > 0.5)).collect();
                    let out = profile.step(st, &reports, &emitted)?;
                    *st = out.state;
                    owners = (0..n).collect();
                    labels.fill(phase_label(st.phase, "permanent"));
                    out.allocations
                }
                (
                    Driver::Entry(game),
                    SchemeState::Entry {
                        state: es,
                        investors,
                        intruders,
                    },
                ) => {
                    let mut actions = Vec::new();
                    while arrived < n && game.params().arrivals[arrived] == slot {
                        if game.invests(arrived + 1) {
                            actions.push(ArrivalAction::Invest);
                            investors.push(arrived);
                        } else {
                            actions.push(ArrivalAction::StayOut);
                        }
                        arrived += 1;
                    }
                    // an operator that stayed out enters once it is made to transmit
                    for op in 0..arrived {
                        if !investors.contains(&op)
                            && !intruders.contains(&op)
                            && self.emission_override(op, slot).is_some()
                        {
                            actions.push(ArrivalAction::Intrude);
                            intruders.push(op);
                        }
                    }
                    let (next, allocs) = game.step(es, &emitted, &actions)?;
                    *es = next;
                    owners = investors.iter().chain(intruders.iter()).copied().collect();
                    let label = phase_label(es.phase, "collapsed");
                    for &op in &owners {
                        labels[op] = label;
                    }
                    allocs
                }
                _ => unreachable!("driver and state are built together"),
            };
            emitted = prescribed
                .iter()
                .zip(&owners)
                .map(|(p, &op)| match self.emission_override(op, slot) {
                    Some(kind) => self.emit(kind, p),
                    None => Ok(p.clone()),
                })
                .collect::<Result<_>>()?;
            if let SchemeState::Entry { investors, .. } = &state {
                // intruders always occupy the whole band
                for e in emitted.iter_mut().skip(investors.len()) {
                    *e = SpectrumAllocation::full(band);
                }
            }
            let mut width = vec![Freq::ZERO; n];
            let mut utility = vec![0.0; n];
            for (j, &op) in owners.iter().enumerate() {
                others.clear();
                others.extend(
                    emitted
                        .iter()
                        .enumerate()
                        .filter(|&(m, _)| m != j)
                        .map(|(_, a)| a.clone()),
                );
                width[op] = emitted[j].width();
                utility[op] = model.utility(&emitted[j], &others, levels[op]);
            }
            for op in 0..n {
                if labels[op] != "inactive" {
                    acc.add(op, slot, utility[op]);
                }
                sink(&SlotRecord {
                    slot,
                    operator: op + 1,
                    traffic: levels[op],
                    width: width[op],
                    utility: utility[op],
                    balance: balances[op],
                    phase: labels[op],
                });
            }
        }
        Ok(acc.finish(sc.horizon, self.u_max))
    }
}

/// Runs replication 0 and keeps the full trace.
pub fn run(scenario: &Scenario, injectors: &[DeviationInjector]) -> Result<(Trace, RevenueReport)> {
    let engine = Engine::new(scenario, injectors)?;
    let mut trace = Trace::default();
    let report = engine.run_seed(counter_rng::replication_seed(scenario.seed, 0), &mut |r| {
        trace.records.push(r.clone())
    })?;
    Ok((trace, report))
}

/// Runs replication 0, streaming records to `sink` instead of storing them.
pub fn run_with(
    scenario: &Scenario,
    injectors: &[DeviationInjector],
    sink: &mut dyn FnMut(&SlotRecord),
) -> Result<RevenueReport> {
    Engine::new(scenario, injectors)?.run_seed(counter_rng::replication_seed(scenario.seed, 0), sink)
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReplicationSummary {
    pub mean: Vec<f64>,
    pub std_err: Vec<f64>,
    /// `per_replication[r][i]`, in replication order.
    pub per_replication: Vec<Vec<f64>>,
    pub tail_bound: f64,
}

/// Runs `scenario.replications` independent replications in parallel;
/// replication `r` draws its traffic from `replication_seed(seed, r)`.
pub fn replicate(scenario: &Scenario, injectors: &[DeviationInjector]) -> Result<ReplicationSummary> {
    let engine = Engine::new(scenario, injectors)?;
    let reports: Vec<RevenueReport> = (0..scenario.replications as u64)
        .into_par_iter()
        .map(|r| engine.run_seed(counter_rng::replication_seed(scenario.seed, r), &mut |_| {}))
        .collect::<Result<_>>()?;
    Ok(summarize(
        reports.iter().map(|r| r.revenues.clone()).collect(),
        reports.iter().map(|r| r.tail_bound).fold(0.0, f64::max),
    ))
}

pub(crate) fn summarize(per_replication: Vec<Vec<f64>>, tail_bound: f64) -> ReplicationSummary {
    let count = per_replication.len();
    let n = per_replication.first().map_or(0, Vec::len);
    let mut mean = vec![0.0; n];
    let mut std_err = vec![0.0; n];
    for i in 0..n {
        mean[i] = per_replication.iter().map(|v| v[i]).sum::<f64>() / count as f64;
        if count > 1 {
            let var = per_replication.iter().map(|v| (v[i] - mean[i]).powi(2)).sum::<f64>() / (count - 1) as f64;
            std_err[i] = (var / count as f64).sqrt();
        }
    }
    ReplicationSummary {
        mean,
        std_err,
        per_replication,
        tail_bound,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamic::DynamicParams;
    use crate::entry::{u_f_of_n, EntryParams, DEFAULT_ENTRY_CAP};
    use crate::sim::{revenue, Persistence};
    use crate::spectrum::tiles_band;
    use crate::static_sharing::{Punishment, StaticParams};
    use crate::traffic::{LevelDistribution, TrafficSpec};
    use crate::utility::{UtilityFamily, UtilityModel};

    fn linear() -> UtilityModel {
        UtilityModel::shannon(100.0, 100.0, UtilityFamily::Linear).unwrap()
    }

    fn scenario(scheme: Scheme, p: &[f64]) -> Scenario {
        Scenario {
            model: linear(),
            traffic: TrafficSpec::two_level(p).unwrap(),
            scheme,
            discount: 0.99,
            horizon: 3000,
            seed: 7,
            replications: 200,
        }
    }

    #[test]
    fn full_spectrum_matches_expectation() {
        let sc = scenario(Scheme::FullSpectrum, &[0.5, 0.5]);
        let s = replicate(&sc, &[]).unwrap();
        for i in 0..2 {
            assert!((s.mean[i] - 49.642).abs() < 3.0 * s.std_err[i] + 1e-3, "{:?}", s);
        }
    }

    #[test]
    fn static_matches_expectation() {
        let sc = scenario(
            Scheme::Static(StaticParams::uniform(2, Punishment::Slots(3)).unwrap()),
            &[0.5, 0.5],
        );
        let s = replicate(&sc, &[]).unwrap();
        let expect = 0.5 * 50.0 * 101f64.log2();
        for i in 0..2 {
            assert!((s.mean[i] - expect).abs() < 3.0 * s.std_err[i] + 1e-3);
        }
    }

    #[test]
    fn single_slot_is_single_utility() {
        let mut sc = scenario(Scheme::FullSpectrum, &[1.0, 1.0]);
        sc.horizon = 1;
        sc.discount = 0.0;
        let (trace, report) = run(&sc, &[]).unwrap();
        assert_eq!(report.revenues[0], trace.records[0].utility);
        assert!((report.revenues[0] - 99.284).abs() < 1e-3);
    }

    #[test]
    fn replication_one_equals_run_and_degenerate_traffic_has_no_spread() {
        let mut sc = scenario(Scheme::FullSpectrum, &[1.0, 0.0]);
        sc.replications = 1;
        let (_, report) = run(&sc, &[]).unwrap();
        let s = replicate(&sc, &[]).unwrap();
        assert_eq!(s.mean, report.revenues);
        sc.replications = 5;
        assert!(replicate(&sc, &[]).unwrap().std_err.iter().all(|&e| e == 0.0));
    }

    #[test]
    fn trace_revenue_agrees_with_run() {
        let sc = scenario(Scheme::Static(StaticParams::uniform(2, Punishment::Slots(3)).unwrap()), &[0.3, 0.6]);
        let (trace, report) = run(&sc, &[]).unwrap();
        assert_eq!(revenue(&trace, sc.discount).revenues, report.revenues);
        for r in &report.revenues {
            assert!(*r <= linear().upper_utility(1.0));
        }
    }

    #[test]
    fn deterministic_across_runs() {
        let sc = scenario(Scheme::FullSpectrum, &[0.3, 0.6]);
        let a = replicate(&sc, &[]).unwrap();
        let b = replicate(&sc, &[]).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn lie_rejected_outside_dynamic() {
        let sc = scenario(Scheme::Static(StaticParams::uniform(2, Punishment::Slots(3)).unwrap()), &[0.5, 0.5]);
        let inj = DeviationInjector::one_shot(0, 5, DeviationKind::LieHigh);
        assert!(matches!(run(&sc, &[inj]), Err(Error::Config(_))));
        let late = DeviationInjector::one_shot(0, 5000, DeviationKind::FullBand);
        assert!(matches!(run(&sc, &[late]), Err(Error::Config(_))));
    }

    #[test]
    fn static_deviation_triggers_exact_punishment() {
        let sc = scenario(Scheme::Static(StaticParams::uniform(2, Punishment::Slots(4)).unwrap()), &[0.5, 0.5]);
        let inj = DeviationInjector::one_shot(1, 10, DeviationKind::FullBand);
        let (trace, _) = run(&sc, &[inj]).unwrap();
        let punished: Vec<u64> = trace
            .records
            .iter()
            .filter(|r| r.operator == 1 && r.phase == "punishment")
            .map(|r| r.slot)
            .collect();
        assert_eq!(punished, vec![11, 12, 13, 14]);
    }

    #[test]
    fn dynamic_trace_tiles_and_conserves() {
        let model = UtilityModel::shannon(100.0, 100.0, UtilityFamily::cobb_douglas()).unwrap();
        let params = DynamicParams::new(2, Freq::from_mhz(100.0), Freq::from_mhz(10.0), 3, Punishment::Slots(5)).unwrap();
        let sc = Scenario {
            model,
            traffic: TrafficSpec::two_level(&[0.25, 0.5]).unwrap(),
            scheme: Scheme::Dynamic(params),
            discount: 0.99,
            horizon: 500,
            seed: 3,
            replications: 1,
        };
        let (trace, _) = run(&sc, &[]).unwrap();
        for slot in trace.records.chunks(2) {
            assert_eq!(slot[0].balance + slot[1].balance, Freq::ZERO);
            assert_eq!(slot[0].width + slot[1].width, Freq::from_mhz(100.0));
            assert_eq!(slot[0].phase, "cooperation");
        }
    }

    #[test]
    fn entry_investors_cover_cost_and_intruder_does_not() {
        let dist = LevelDistribution::two_level(0.5).unwrap();
        let params = EntryParams {
            cost: 40.0,
            arrivals: vec![0, 20, 40],
            traffic: dist.clone(),
            n_cap: DEFAULT_ENTRY_CAP,
            punishment: None,
        };
        let sc = Scenario {
            model: linear(),
            traffic: TrafficSpec::uniform(3, dist.clone()).unwrap(),
            scheme: Scheme::Entry(params),
            discount: 0.99,
            horizon: 2000,
            seed: 11,
            replications: 300,
        };
        let honest = replicate(&sc, &[]).unwrap();
        assert!(honest.mean[0] > 40.0 && honest.mean[1] > 40.0);
        assert_eq!(honest.mean[2], 0.0);
        let forced = DeviationInjector {
            operator: 2,
            slot: 40,
            kind: DeviationKind::FullBand,
            persistence: Persistence::Persistent,
        };
        let (trace, _) = run(&sc, &[forced]).unwrap();
        assert!(trace.records.iter().filter(|r| r.slot > 41).all(|r| r.phase == "collapsed"));
        let s = replicate(&sc, &[forced]).unwrap();
        assert!(s.mean[2] < 40.0);
        assert!((s.mean[2] - u_f_of_n(3, &linear(), &dist).unwrap()).abs() < 2.0);
    }

    #[test]
    fn static_cooperation_tiles() {
        let sc = scenario(Scheme::Static(StaticParams::uniform(2, Punishment::Slots(3)).unwrap()), &[0.5, 0.5]);
        let engine = Engine::new(&sc, &[]).unwrap();
        let mut widths = Vec::new();
        engine
            .run_seed(1, &mut |r| widths.push(r.width))
            .unwrap();
        assert!(widths.iter().all(|&w| w == Freq::from_mhz(50.0)));
        let blocks = StaticProfile::new(StaticParams::uniform(2, Punishment::Slots(3)).unwrap(), Freq::from_mhz(100.0))
            .unwrap();
        assert!(tiles_band(blocks.blocks(), Freq::from_mhz(100.0)));
    }
}
