//! Borrow/lend sharing driven by reported traffic and a capped balance ledger.

use crate::error::{Error, Result};
use crate::spectrum::{tile, Freq, SpectrumAllocation};
use crate::static_sharing::{advance_phase, conforms, Phase, Punishment, StaticParams};
use crate::traffic::TrafficSpec;
use crate::utility::UtilityModel;
use crate::verifier::{self, Certificate};

#[derive(Clone, Debug, PartialEq)]
pub struct DynamicParams {
    pub n: usize,
    pub bandwidth: Freq,
    /// Trade quantum `Δ`.
    pub trade: Freq,
    /// `k` in `b̄ = kΔ`.
    pub cap_steps: i64,
    pub punishment: Punishment,
}

impl DynamicParams {
    pub fn new(n: usize, bandwidth: Freq, trade: Freq, cap_steps: i64, punishment: Punishment) -> Result<Self> {
        let p = DynamicParams {
            n,
            bandwidth,
            trade,
            cap_steps,
            punishment,
        };
        p.validate()?;
        Ok(p)
    }

    /// Takes `b̄` in bandwidth units; it must be a whole multiple of `Δ`.
    pub fn with_cap(n: usize, bandwidth: Freq, trade: Freq, cap: Freq, punishment: Punishment) -> Result<Self> {
        if trade <= Freq::ZERO {
            return Err(Error::Domain("trade quantum must be positive".into()));
        }
        if cap.hz() % trade.hz() != 0 {
            return Err(Error::Domain(format!(
                "balance cap {cap} MHz is not a multiple of the trade quantum {trade} MHz"
            )));
        }
        Self::new(n, bandwidth, trade, cap.hz() / trade.hz(), punishment)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::Domain("dynamic sharing needs at least two operators".into()));
        }
        if self.cap_steps < 1 {
            return Err(Error::Domain("balance cap must be at least one trade quantum".into()));
        }
        let w_min = self.baseline_widths().into_iter().min().unwrap_or(Freq::ZERO);
        if !(self.trade > Freq::ZERO && self.trade <= w_min) {
            return Err(Error::Domain(format!(
                "trade quantum {} MHz must lie in (0, {} MHz]",
                self.trade, w_min
            )));
        }
        if self.punishment == Punishment::Slots(0) {
            return Err(Error::Domain("punishment length must be at least 1".into()));
        }
        Ok(())
    }

    /// `w` per operator; the last absorbs rounding when `W/n` is not a whole hertz.
    pub fn baseline_widths(&self) -> Vec<Freq> {
        StaticParams {
            n: self.n,
            shares: vec![1.0 / self.n as f64; self.n],
            punishment: self.punishment,
        }
        .widths(self.bandwidth)
    }

    pub fn baseline_mhz(&self) -> f64 {
        self.bandwidth.mhz() / self.n as f64
    }

    pub fn balance_cap(&self) -> Freq {
        self.trade.scaled(self.cap_steps)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Trade {
    pub borrower: usize,
    pub lender: usize,
    pub amount: Freq,
}

/// Pairs high reporters (by descending balance) with low reporters (by
/// ascending balance). Balances are in units of the trade quantum.
///
/// Borrowing needs `b ≥ −k + 1`, lending needs `b ≤ k − 1`. Equal balances
/// are ordered by operator index.
pub fn trading_policy(reports: &[bool], balances: &[i64], cap_steps: i64, amount: Freq) -> Result<Vec<Trade>> {
    if reports.len() != balances.len() {
        return Err(Error::Contract(format!(
            "{} reports for {} balances",
            reports.len(),
            balances.len()
        )));
    }
    let mut high: Vec<usize> = (0..reports.len())
        .filter(|&i| reports[i] && balances[i] > -cap_steps)
        .collect();
    let mut low: Vec<usize> = (0..reports.len())
        .filter(|&i| !reports[i] && balances[i] < cap_steps)
        .collect();
    high.sort_by_key(|&i| (std::cmp::Reverse(balances[i]), i));
    low.sort_by_key(|&i| (balances[i], i));
    Ok(high
        .into_iter()
        .zip(low)
        .map(|(borrower, lender)| Trade {
            borrower,
            lender,
            amount,
        })
        .collect())
}

/// Applies trades to the ledger and returns each operator's width offset in
/// trade quanta (+1 borrower, −1 lender, 0 otherwise).
pub fn apply_trades(ledger: &mut [i64], trades: &[Trade]) -> Vec<i64> {
    let mut offsets = vec![0; ledger.len()];
    for t in trades {
        ledger[t.borrower] -= 1;
        ledger[t.lender] += 1;
        offsets[t.borrower] += 1;
        offsets[t.lender] -= 1;
    }
    offsets
}

#[derive(Clone, Debug, PartialEq)]
pub struct DynamicState {
    /// Phase of the slot these allocations were prescribed for.
    pub phase: Phase,
    /// Balances in trade quanta.
    pub ledger: Vec<i64>,
    /// Last slot's prescribed allocations; `None` before the first slot.
    pub prescribed: Option<Vec<SpectrumAllocation>>,
}

impl DynamicState {
    pub fn balances(&self, trade: Freq) -> Vec<Freq> {
        self.ledger.iter().map(|&b| trade.scaled(b)).collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DynamicOutcome {
    pub state: DynamicState,
    pub allocations: Vec<SpectrumAllocation>,
    pub trades: Vec<Trade>,
}

#[derive(Clone, Debug)]
pub struct DynamicProfile {
    params: DynamicParams,
    baseline: Vec<Freq>,
}

impl DynamicProfile {
    pub fn new(params: DynamicParams) -> Result<Self> {
        params.validate()?;
        let baseline = params.baseline_widths();
        Ok(DynamicProfile { params, baseline })
    }

    pub fn params(&self) -> &DynamicParams {
        &self.params
    }

    pub fn initial(&self) -> DynamicState {
        DynamicState {
            phase: Phase::Cooperation,
            ledger: vec![0; self.params.n],
            prescribed: None,
        }
    }

    /// Cooperation-phase allocations for the given trades.
    pub fn tiling(&self, offsets: &[i64]) -> Result<Vec<SpectrumAllocation>> {
        let widths: Vec<Freq> = self
            .baseline
            .iter()
            .zip(offsets)
            .map(|(&w, &o)| w + self.params.trade.scaled(o))
            .collect();
        tile(&widths, self.params.bandwidth)
    }

    /// One slot: detection against last slot's prescription, then trades on
    /// this slot's reports if cooperating. The ledger is frozen while punishing.
    pub fn step(
        &self,
        state: &DynamicState,
        reports: &[bool],
        observed: &[SpectrumAllocation],
    ) -> Result<DynamicOutcome> {
        if reports.len() != self.params.n {
            return Err(Error::Contract(format!(
                "{} reports for {} operators",
                reports.len(),
                self.params.n
            )));
        }
        let phase = match &state.prescribed {
            None => state.phase,
            Some(prescribed) => {
                advance_phase(state.phase, conforms(observed, prescribed)?, self.params.punishment)
            }
        };
        let mut ledger = state.ledger.clone();
        let (allocations, trades) = if phase == Phase::Cooperation {
            let trades = trading_policy(reports, &ledger, self.params.cap_steps, self.params.trade)?;
            let offsets = apply_trades(&mut ledger, &trades);
            (self.tiling(&offsets)?, trades)
        } else {
            (
                vec![SpectrumAllocation::full(self.params.bandwidth); self.params.n],
                Vec::new(),
            )
        };
        Ok(DynamicOutcome {
            state: DynamicState {
                phase,
                ledger,
                prescribed: Some(allocations.clone()),
            },
            allocations,
            trades,
        })
    }
}

/// One grid point examined by [`choose_delta`].
#[derive(Clone, Debug, PartialEq)]
pub struct DeltaCandidate {
    pub trade: Freq,
    pub cap_steps: i64,
    pub certificate: Option<Certificate>,
    /// Why the candidate was rejected, if it was.
    pub rejection: Option<String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DeltaChoice {
    pub trade: Freq,
    pub cap_steps: i64,
    pub punishment: u32,
    /// Expected one-slot sum utility under the stationary balance distribution.
    pub stationary_revenue: f64,
    pub candidates: Vec<DeltaCandidate>,
}

/// Multiples of `step` in `(0, w]`.
pub fn delta_grid(w: Freq, step: Freq) -> Result<Vec<Freq>> {
    if step <= Freq::ZERO {
        return Err(Error::Domain("grid resolution must be positive".into()));
    }
    Ok((1..=w.hz() / step.hz()).map(|i| step.scaled(i)).collect())
}

/// Among certified grid points, the `Δ` with the largest stationary sum
/// revenue (smallest `Δ` on ties). Each candidate uses the effective cap
/// `⌊b̄/Δ⌋·Δ`; candidates with `Δ > b̄` are skipped.
pub fn choose_delta(
    model: &UtilityModel,
    traffic: &TrafficSpec,
    balance_cap: Freq,
    discount: f64,
    grid: &[Freq],
) -> Result<DeltaChoice> {
    let n = traffic.len();
    if n < 2 {
        return Err(Error::Domain("dynamic sharing needs at least two operators".into()));
    }
    verifier::check_trade_hypothesis(traffic)?;
    let mut best: Option<(usize, f64)> = None;
    let mut candidates = Vec::with_capacity(grid.len());
    for &trade in grid {
        if trade <= Freq::ZERO {
            return Err(Error::Domain("grid entries must be positive".into()));
        }
        let cap_steps = balance_cap.hz() / trade.hz();
        if cap_steps < 1 {
            continue;
        }
        let params = DynamicParams::new(n, model.bandwidth, trade, cap_steps, Punishment::Slots(1))?;
        let candidate = match verifier::certify_dynamic(model, traffic, &params, discount) {
            Ok(cert) => {
                let rejection = (!cert.certified).then(|| cert.summary());
                DeltaCandidate {
                    trade,
                    cap_steps,
                    certificate: Some(cert),
                    rejection,
                }
            }
            Err(e @ (Error::Infeasible(_) | Error::CapExceeded { .. })) => DeltaCandidate {
                trade,
                cap_steps,
                certificate: None,
                rejection: Some(e.to_string()),
            },
            Err(e) => return Err(e),
        };
        if let Some(cert) = candidate.certificate.as_ref().filter(|c| c.certified) {
            if best.is_none_or(|(_, v)| cert.stationary_revenue > v) {
                best = Some((candidates.len(), cert.stationary_revenue));
            }
        }
        candidates.push(candidate);
    }
    let (idx, revenue) = best.ok_or_else(|| {
        Error::NoEquilibrium(format!(
            "no trade quantum in the grid is certified at discount {discount}"
        ))
    })?;
    let chosen = &candidates[idx];
    let cert = chosen.certificate.as_ref().expect("certified candidate");
    Ok(DeltaChoice {
        trade: chosen.trade,
        cap_steps: chosen.cap_steps,
        punishment: cert.punishment,
        stationary_revenue: revenue,
        candidates,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectrum::tiles_band;
    use crate::utility::UtilityFamily;

    fn mhz(v: f64) -> Freq {
        Freq::from_mhz(v)
    }

    #[test]
    fn trading_policy_example() {
        // balances [0, 10, -10, 20] MHz with Δ = 10, b̄ = 20
        let trades = trading_policy(&[true, true, false, false], &[0, 1, -1, 2], 2, mhz(10.0)).unwrap();
        assert_eq!(
            trades,
            vec![Trade {
                borrower: 1,
                lender: 2,
                amount: mhz(10.0)
            }]
        );
        assert!(trading_policy(&[false; 4], &[0; 4], 2, mhz(10.0)).unwrap().is_empty());
        let two = trading_policy(&[true, false], &[0, 0], 1, mhz(10.0)).unwrap();
        assert_eq!((two[0].borrower, two[0].lender), (0, 1));
        assert!(trading_policy(&[true], &[0, 0], 1, mhz(10.0)).is_err());
    }

    #[test]
    fn trading_policy_breaks_ties_by_index() {
        let trades = trading_policy(&[true, false, true, false], &[0, 0, 0, 0], 3, mhz(1.0)).unwrap();
        let pairs: Vec<_> = trades.iter().map(|t| (t.borrower, t.lender)).collect();
        assert_eq!(pairs, vec![(0, 1), (2, 3)]);
    }

    fn two_op(k: i64) -> DynamicProfile {
        DynamicProfile::new(DynamicParams::new(2, mhz(100.0), mhz(10.0), k, Punishment::Slots(3)).unwrap()).unwrap()
    }

    #[test]
    fn step_examples() {
        let p = two_op(2);
        let out = p.step(&p.initial(), &[true, false], &[]).unwrap();
        assert_eq!(out.allocations[0].width(), mhz(60.0));
        assert_eq!(out.allocations[1].width(), mhz(40.0));
        assert_eq!(out.state.ledger, vec![-1, 1]);

        let out = p.step(&p.initial(), &[true, true], &[]).unwrap();
        assert!(out.allocations.iter().all(|a| a.width() == mhz(50.0)));
        assert_eq!(out.state.ledger, vec![0, 0]);

        let capped = DynamicState {
            ledger: vec![-2, 2],
            ..p.initial()
        };
        let out = p.step(&capped, &[true, false], &[]).unwrap();
        assert!(out.trades.is_empty());
        assert!(out.allocations.iter().all(|a| a.width() == mhz(50.0)));
        assert!(p.step(&p.initial(), &[true], &[]).is_err());
    }

    #[test]
    fn detected_deviation_freezes_ledger() {
        let p = two_op(2);
        let first = p.step(&p.initial(), &[true, false], &[]).unwrap();
        let mut emitted = first.allocations.clone();
        emitted[1] = SpectrumAllocation::full(mhz(100.0));
        let mut state = first.state.clone();
        let mut obs = emitted;
        for slot in 0..3 {
            let out = p.step(&state, &[false, true], &obs).unwrap();
            assert_eq!(out.state.phase, Phase::Punishment { remaining: 3 - slot });
            assert_eq!(out.state.ledger, vec![-1, 1]);
            assert!(out.trades.is_empty());
            obs = out.allocations.clone();
            state = out.state;
        }
        let out = p.step(&state, &[false, true], &obs).unwrap();
        assert_eq!(out.state.phase, Phase::Cooperation);
        assert_eq!(out.state.ledger, vec![0, 0]);
    }

    #[test]
    fn tiling_covers_band_after_trades() {
        let p = DynamicProfile::new(
            DynamicParams::new(3, mhz(100.0), mhz(5.0), 2, Punishment::Slots(1)).unwrap(),
        )
        .unwrap();
        let out = p.step(&p.initial(), &[true, false, true], &[]).unwrap();
        assert!(tiles_band(&out.allocations, mhz(100.0)));
        assert_eq!(out.trades.len(), 1);
        assert_eq!(out.state.ledger.iter().sum::<i64>(), 0);
    }

    #[test]
    fn params_validation() {
        assert!(DynamicParams::new(2, mhz(100.0), mhz(60.0), 1, Punishment::Slots(1)).is_err());
        assert!(DynamicParams::new(2, mhz(100.0), mhz(10.0), 0, Punishment::Slots(1)).is_err());
        assert!(DynamicParams::with_cap(2, mhz(100.0), mhz(15.0), mhz(50.0), Punishment::Slots(1)).is_err());
        let ok = DynamicParams::with_cap(2, mhz(100.0), mhz(10.0), mhz(50.0), Punishment::Slots(1)).unwrap();
        assert_eq!(ok.cap_steps, 5);
    }

    #[test]
    fn delta_grid_resolution() {
        let g = delta_grid(mhz(50.0), mhz(1.0)).unwrap();
        assert_eq!(g.len(), 50);
        assert_eq!(g[49], mhz(50.0));
    }

    #[test]
    fn choose_delta_requires_both_trade_directions() {
        let model = UtilityModel::shannon(100.0, 100.0, UtilityFamily::cobb_douglas()).unwrap();
        let traffic = TrafficSpec::two_level(&[0.0, 0.0]).unwrap();
        let grid = delta_grid(mhz(50.0), mhz(1.0)).unwrap();
        assert!(matches!(
            choose_delta(&model, &traffic, mhz(50.0), 0.99, &grid),
            Err(Error::Hypothesis(_))
        ));
    }
}
