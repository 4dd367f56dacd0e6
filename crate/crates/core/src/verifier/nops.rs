//! Joint balance chain for any number of operators.

// operator indices address several parallel arrays at once
#![allow(clippy::needless_range_loop)]

use std::collections::{HashMap, VecDeque};

use rayon::prelude::*;

use crate::dynamic::{apply_trades, trading_policy, DynamicParams};
use crate::error::{Error, Result};
use crate::static_sharing::Punishment;
use crate::traffic::{counter_rng, sample_all, TrafficSpec};
use crate::utility::UtilityModel;

use super::lying::{mhz_label, punishment_loss};
use super::{check_trade_hypothesis, solve_discounted, stationary, DeviationFinding, DeviationKindTag, LieEvent, PROFIT_TOLERANCE};

/// Default budget on states × report profiles for the exact joint check.
pub const DEFAULT_EXACT_LIMIT: usize = 200_000;

/// Number of balance vectors in `{−k..k}^n` summing to zero.
pub fn joint_state_count(n: usize, k: i64) -> u128 {
    let width = (2 * k + 1) as usize;
    // ways[s] counts partial vectors with sum s − n·k
    let mut ways = vec![1u128];
    for _ in 0..n {
        let mut next = vec![0u128; ways.len() + width - 1];
        for (s, &c) in ways.iter().enumerate() {
            if c == 0 {
                continue;
            }
            for d in 0..width {
                next[s + d] += c;
            }
        }
        ways = next;
    }
    ways[n * k as usize]
}

/// `2(π(w,0) − π(w−Δ,0)) − (π(w+Δ,0) − π(w−Δ,0))`: how much the loss side
/// exceeds the two-quantum gain of a lie that turns a lender into a borrower.
/// Positive whenever `π(·,0)` is strictly concave.
pub fn f_and_e_margin(model: &UtilityModel, w: f64, trade: f64) -> f64 {
    2.0 * (model.pi(w, 0.0) - model.pi(w - trade, 0.0)) - (model.pi(w + trade, 0.0) - model.pi(w - trade, 0.0))
}

/// The chain over balance vectors reachable from the all-zero ledger.
#[derive(Clone, Debug)]
pub struct JointChain {
    model: UtilityModel,
    n: usize,
    w: f64,
    trade: f64,
    k: i64,
    p_high: Vec<f64>,
    states: Vec<Vec<i64>>,
    index: HashMap<Vec<i64>, usize>,
    /// Indexed by `state * 2^n + report mask`.
    next: Vec<usize>,
    /// Indexed by `(state * 2^n + mask) * n + operator`; width offset in quanta.
    offsets: Vec<i8>,
}

impl JointChain {
    pub fn build(model: &UtilityModel, traffic: &TrafficSpec, params: &DynamicParams, exact_limit: usize) -> Result<Self> {
        params.validate()?;
        if traffic.len() != params.n {
            return Err(Error::Contract(format!(
                "{} traffic distributions for {} operators",
                traffic.len(),
                params.n
            )));
        }
        check_trade_hypothesis(traffic)?;
        let n = params.n;
        if n > 16 {
            return Err(Error::Infeasible(format!("{n} operators is beyond the exact joint check")));
        }
        let masks = 1usize << n;
        let size = joint_state_count(n, params.cap_steps).saturating_mul(masks as u128);
        if size > exact_limit as u128 {
            return Err(Error::Infeasible(format!(
                "joint chain has {size} transitions, above the exact limit {exact_limit}"
            )));
        }
        let k = params.cap_steps;
        let mut states = vec![vec![0i64; n]];
        let mut index = HashMap::from([(vec![0i64; n], 0usize)]);
        let mut next = Vec::new();
        let mut offsets = Vec::new();
        let mut queue = VecDeque::from([0usize]);
        let mut reports = vec![false; n];
        while let Some(s) = queue.pop_front() {
            debug_assert_eq!(next.len(), s * masks);
            for mask in 0..masks {
                for (i, r) in reports.iter_mut().enumerate() {
                    *r = mask >> i & 1 == 1;
                }
                let mut ledger = states[s].clone();
                let trades = trading_policy(&reports, &ledger, k, params.trade)?;
                let off = apply_trades(&mut ledger, &trades);
                let t = match index.get(&ledger) {
                    Some(&t) => t,
                    None => {
                        let t = states.len();
                        index.insert(ledger.clone(), t);
                        states.push(ledger);
                        queue.push_back(t);
                        t
                    }
                };
                next.push(t);
                offsets.extend(off.iter().map(|&o| o as i8));
            }
        }
        Ok(JointChain {
            model: model.clone(),
            n,
            w: params.baseline_mhz(),
            trade: params.trade.mhz(),
            k,
            p_high: traffic.operators.iter().map(|d| d.p_high()).collect(),
            states,
            index,
            next,
            offsets,
        })
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn cap_steps(&self) -> i64 {
        self.k
    }

    pub fn states(&self) -> &[Vec<i64>] {
        &self.states
    }

    pub fn origin(&self) -> usize {
        self.index[&vec![0i64; self.n]]
    }

    pub fn state_index(&self, ledger: &[i64]) -> Option<usize> {
        self.index.get(ledger).copied()
    }

    fn masks(&self) -> usize {
        1 << self.n
    }

    fn profile_prob(&self, mask: usize) -> f64 {
        (0..self.n)
            .map(|i| if mask >> i & 1 == 1 { self.p_high[i] } else { 1.0 - self.p_high[i] })
            .product()
    }

    fn profiles(&self) -> Vec<(usize, f64)> {
        (0..self.masks())
            .map(|m| (m, self.profile_prob(m)))
            .filter(|&(_, p)| p > 0.0)
            .collect()
    }

    fn width(&self, s: usize, mask: usize, op: usize) -> f64 {
        let o = self.offsets[(s * self.masks() + mask) * self.n + op];
        self.w + o as f64 * self.trade
    }

    fn rows(&self, profiles: &[(usize, f64)]) -> Vec<Vec<(usize, f64)>> {
        (0..self.len())
            .map(|s| {
                profiles
                    .iter()
                    .map(|&(m, p)| (self.next[s * self.masks() + m], p))
                    .collect()
            })
            .collect()
    }

    fn one_slot(&self, s: usize, profiles: &[(usize, f64)]) -> Vec<f64> {
        (0..self.n)
            .map(|i| {
                profiles
                    .iter()
                    .map(|&(m, p)| p * self.model.pi(self.width(s, m, i), (m >> i & 1) as f64))
                    .sum()
            })
            .collect()
    }

    /// `V[state][operator]` under truthful reports.
    pub fn value_function(&self, discount: f64) -> Result<Vec<Vec<f64>>> {
        let profiles = self.profiles();
        let rewards: Vec<Vec<f64>> = (0..self.len()).map(|s| self.one_slot(s, &profiles)).collect();
        let (values, residual) = solve_discounted(&self.rows(&profiles), &rewards, discount)?;
        if residual > 1e-8 {
            return Err(Error::Domain(format!("value-function residual {residual} too large")));
        }
        Ok(values)
    }

    pub fn stationary_revenue(&self) -> Result<f64> {
        let profiles = self.profiles();
        let pi = stationary(&self.rows(&profiles))?;
        Ok((0..self.len())
            .map(|s| pi[s] * self.one_slot(s, &profiles).iter().sum::<f64>())
            .sum())
    }

    fn label(&self, op: usize, s: usize, levels: &str) -> String {
        let b: Vec<String> = self.states[s].iter().map(|&b| mhz_label(b, self.trade)).collect();
        format!("op{};coop;b={};lambda={}", op + 1, b.join("/"), levels)
    }

    fn levels_label(&self, mask: usize) -> String {
        (0..self.n)
            .map(|i| (mask >> i & 1).to_string())
            .collect::<Vec<_>>()
            .join("/")
    }

    /// Ex-post check of every single-operator lie, tagged with its trade event.
    pub fn lie_findings(&self, values: &[Vec<f64>], discount: f64) -> Vec<DeviationFinding> {
        let masks = self.masks();
        let mut out = Vec::new();
        for s in 0..self.len() {
            for (m, _) in self.profiles() {
                let levels = self.levels_label(m);
                for i in 0..self.n {
                    let lie = m ^ (1 << i);
                    let lambda = (m >> i & 1) as f64;
                    let (xt, xl) = (self.width(s, m, i), self.width(s, lie, i));
                    let gain = (1.0 - discount) * (self.model.pi(xl, lambda) - self.model.pi(xt, lambda));
                    let (nt, nl) = (self.next[s * masks + m], self.next[s * masks + lie]);
                    let loss = discount * (values[nt][i] - values[nl][i]);
                    let high = lie >> i & 1 == 1;
                    let kind = if high {
                        DeviationKindTag::LieHigh
                    } else {
                        DeviationKindTag::LieLow
                    };
                    let mut f = DeviationFinding::exact(self.label(i, s, &levels), kind, gain, loss);
                    if high {
                        let ot = self.offsets[(s * masks + m) * self.n + i];
                        let ol = self.offsets[(s * masks + lie) * self.n + i];
                        f.event = match (ol > ot && ol == 1, ot == -1) {
                            (true, true) => Some(LieEvent::FAndE),
                            (true, false) => Some(LieEvent::F),
                            (false, true) => Some(LieEvent::E),
                            (false, false) => None,
                        };
                    }
                    out.push(f);
                }
            }
        }
        out
    }

    pub fn detectable_findings(
        &self,
        values: &[Vec<f64>],
        discount: f64,
        punishment: Punishment,
    ) -> Result<Vec<DeviationFinding>> {
        let masks = self.masks();
        let f0 = self.model.full_spectrum_utility(self.n, 0.0)?;
        let f1 = self.model.full_spectrum_utility(self.n, 1.0)?;
        let mut out = Vec::new();
        for s in 0..self.len() {
            for (m, _) in self.profiles() {
                let levels = self.levels_label(m);
                let nt = self.next[s * masks + m];
                for i in 0..self.n {
                    let lambda = (m >> i & 1) as f64;
                    let full = (1.0 - self.p_high[i]) * f0 + self.p_high[i] * f1;
                    let gain = (1.0 - discount)
                        * (self.model.upper_utility(lambda) - self.model.pi(self.width(s, m, i), lambda));
                    let loss = punishment_loss(discount, punishment, values[nt][i], full);
                    out.push(DeviationFinding::exact(
                        self.label(i, s, &levels),
                        DeviationKindTag::Detectable,
                        gain,
                        loss,
                    ));
                }
            }
        }
        Ok(out)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MonteCarloOptions {
    /// Start ledgers sampled from the conforming chain.
    pub start_states: usize,
    pub rollouts: usize,
    pub seed: u64,
    /// One-sided normal quantile; 2.326 is 99%.
    pub z: f64,
    pub burn_in: u64,
}

impl Default for MonteCarloOptions {
    fn default() -> Self {
        MonteCarloOptions {
            start_states: 8,
            rollouts: 1000,
            seed: 1,
            z: 2.326,
            burn_in: 1000,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NopsOptions {
    pub exact_limit: usize,
    pub monte_carlo: MonteCarloOptions,
}

impl Default for NopsOptions {
    fn default() -> Self {
        NopsOptions {
            exact_limit: DEFAULT_EXACT_LIMIT,
            monte_carlo: MonteCarloOptions::default(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NopsMode {
    Exact,
    MonteCarlo,
}

#[derive(Clone, Debug, PartialEq)]
pub struct NopsReport {
    pub mode: NopsMode,
    /// Balance vectors in `{−k..k}^n` summing to zero.
    pub joint_states: u128,
    pub findings: Vec<DeviationFinding>,
}

/// Lie check for `n` operators: exact on the joint chain when it fits the
/// budget, otherwise paired Monte Carlo from sampled start ledgers.
///
/// The Monte Carlo mode is ex-interim: the liar knows its own level, the
/// others' levels and the future are drawn with common random numbers for
/// the truthful and the lying path.
pub fn verify_truthfulness_n_ops(
    model: &UtilityModel,
    traffic: &TrafficSpec,
    params: &DynamicParams,
    discount: f64,
    options: &NopsOptions,
) -> Result<NopsReport> {
    params.validate()?;
    check_trade_hypothesis(traffic)?;
    if !(0.0..1.0).contains(&discount) {
        return Err(Error::Domain(format!("discount must lie in [0, 1), got {discount}")));
    }
    let joint_states = joint_state_count(params.n, params.cap_steps);
    match JointChain::build(model, traffic, params, options.exact_limit) {
        Ok(chain) => {
            let values = chain.value_function(discount)?;
            Ok(NopsReport {
                mode: NopsMode::Exact,
                joint_states,
                findings: chain.lie_findings(&values, discount),
            })
        }
        Err(Error::Infeasible(_)) => Ok(NopsReport {
            mode: NopsMode::MonteCarlo,
            joint_states,
            findings: monte_carlo_lies(model, traffic, params, discount, &options.monte_carlo)?,
        }),
        Err(e) => Err(e),
    }
}

struct Rollout<'a> {
    model: &'a UtilityModel,
    traffic: &'a TrafficSpec,
    params: &'a DynamicParams,
    w: f64,
    trade: f64,
    discount: f64,
    horizon: u64,
}

impl Rollout<'_> {
    fn settle(&self, ledger: &mut [i64], reports: &[bool]) -> Vec<i64> {
        let trades = trading_policy(reports, ledger, self.params.cap_steps, self.params.trade)
            .expect("lengths agree");
        apply_trades(ledger, &trades)
    }

    fn width(&self, offset: i64) -> f64 {
        self.w + offset as f64 * self.trade
    }

    /// Returns (this-slot gain, future loss) of the lie, both normalized.
    fn paired(&self, start: &[i64], op: usize, lambda: f64, seed: u64) -> (f64, f64) {
        let mut levels = sample_all(self.traffic, 0, seed);
        levels[op] = lambda;
        let truth: Vec<bool> = levels.iter().map(|&l| l > 0.5).collect();
        let mut lie = truth.clone();
        lie[op] = !lie[op];
        let mut lt = start.to_vec();
        let mut ll = start.to_vec();
        let ot = self.settle(&mut lt, &truth);
        let ol = self.settle(&mut ll, &lie);
        let gain = (1.0 - self.discount)
            * (self.model.pi(self.width(ol[op]), lambda) - self.model.pi(self.width(ot[op]), lambda));
        let mut loss = 0.0;
        let mut weight = 1.0 - self.discount;
        for slot in 1..self.horizon {
            if lt == ll {
                break;
            }
            weight *= self.discount;
            let levels = sample_all(self.traffic, slot, seed);
            let reports: Vec<bool> = levels.iter().map(|&l| l > 0.5).collect();
            let ot = self.settle(&mut lt, &reports);
            let ol = self.settle(&mut ll, &reports);
            if ot[op] != ol[op] {
                loss += weight
                    * (self.model.pi(self.width(ot[op]), levels[op]) - self.model.pi(self.width(ol[op]), levels[op]));
            }
        }
        (gain, loss)
    }
}

fn monte_carlo_lies(
    model: &UtilityModel,
    traffic: &TrafficSpec,
    params: &DynamicParams,
    discount: f64,
    opts: &MonteCarloOptions,
) -> Result<Vec<DeviationFinding>> {
    if opts.rollouts < 2 || opts.start_states == 0 {
        return Err(Error::Config("Monte Carlo needs at least two rollouts and one start state".into()));
    }
    let horizon = if discount > 0.0 {
        ((1e-8f64).ln() / discount.ln()).ceil() as u64 + 1
    } else {
        1
    };
    let roll = Rollout {
        model,
        traffic,
        params,
        w: params.baseline_mhz(),
        trade: params.trade.mhz(),
        discount,
        horizon,
    };
    // start ledgers from one conforming path
    let spacing = 97u64;
    let mut ledger = vec![0i64; params.n];
    let mut starts = Vec::with_capacity(opts.start_states);
    let last = opts.burn_in + spacing * opts.start_states as u64;
    for slot in 0..last {
        if slot >= opts.burn_in && (slot - opts.burn_in).is_multiple_of(spacing) {
            starts.push(ledger.clone());
        }
        let levels = sample_all(traffic, slot, opts.seed);
        let reports: Vec<bool> = levels.iter().map(|&l| l > 0.5).collect();
        roll.settle(&mut ledger, &reports);
    }
    let mut tasks = Vec::new();
    for (j, start) in starts.iter().enumerate() {
        for (i, dist) in traffic.operators.iter().enumerate() {
            for lambda in dist.reachable_levels() {
                tasks.push((j, start, i, lambda));
            }
        }
    }
    let findings = tasks
        .par_iter()
        .map(|&(j, start, op, lambda)| {
            let task_seed = counter_rng::replication_seed(
                counter_rng::replication_seed(opts.seed, j as u64),
                (op as u64) << 1 | (lambda > 0.5) as u64,
            );
            let samples: Vec<(f64, f64)> = (0..opts.rollouts as u64)
                .map(|r| roll.paired(start, op, lambda, counter_rng::replication_seed(task_seed, r)))
                .collect();
            let count = samples.len() as f64;
            let gain = samples.iter().map(|s| s.0).sum::<f64>() / count;
            let loss = samples.iter().map(|s| s.1).sum::<f64>() / count;
            let mean = gain - loss;
            let var = samples.iter().map(|s| (s.0 - s.1 - mean).powi(2)).sum::<f64>() / (count - 1.0);
            let se = (var / count).sqrt();
            let b: Vec<String> = start.iter().map(|&b| mhz_label(b, roll.trade)).collect();
            DeviationFinding {
                state: format!("op{};coop;b={};lambda={}", op + 1, b.join("/"), lambda),
                kind: if lambda > 0.5 {
                    DeviationKindTag::LieLow
                } else {
                    DeviationKindTag::LieHigh
                },
                gain,
                loss,
                profitable: mean - opts.z * se > PROFIT_TOLERANCE,
                std_err: Some(se),
                event: None,
            }
        })
        .collect();
    Ok(findings)
}
