//! One-shot deviation checks for the sharing profiles.
//!
//! Values are normalized discounted sums `(1−δ) Σ δ^t u_t`, so gains and
//! losses of a deviation are compared on the same scale as one-slot utilities.

mod chain;
mod lying;
mod nops;
mod punishment;
mod static_check;

use std::fmt;

use nalgebra::DMatrix;

pub use chain::{stationary_distribution, value_function, BalanceChain, JointTraffic, ValueTable};
pub use lying::{lying_gain, lying_loss_bound, verify_detectable, verify_truthfulness_exact, LossBound};
pub use nops::{
    f_and_e_margin, joint_state_count, verify_truthfulness_n_ops, JointChain, MonteCarloOptions, NopsMode, NopsOptions, NopsReport,
    DEFAULT_EXACT_LIMIT,
};
pub use punishment::{check_small_trade_condition, min_punishment_dynamic, PunishmentBound};
pub use static_check::{verify_entry, verify_static};

use crate::dynamic::DynamicParams;
use crate::entry::EntryGame;
use crate::sim::{Scenario, Scheme};
use crate::error::{Error, Result};
use crate::traffic::TrafficSpec;
use crate::utility::UtilityModel;

/// A deviation is profitable when its gain exceeds its loss by more than this.
pub const PROFIT_TOLERANCE: f64 = 1e-9;

/// Dense LU is used up to this many states; larger chains are iterated.
pub const DENSE_SOLVE_LIMIT: usize = 1500;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum DeviationKindTag {
    LieHigh,
    LieLow,
    Detectable,
}

impl DeviationKindTag {
    pub fn label(self) -> &'static str {
        match self {
            DeviationKindTag::LieHigh => "lie_high",
            DeviationKindTag::LieLow => "lie_low",
            DeviationKindTag::Detectable => "detectable",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "lie_high" => Some(DeviationKindTag::LieHigh),
            "lie_low" => Some(DeviationKindTag::LieLow),
            "detectable" => Some(DeviationKindTag::Detectable),
            _ => None,
        }
    }
}

impl fmt::Display for DeviationKindTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// How a high report changes the liar's trade: `F` the lie makes it a
/// borrower, `E` the truth would have made it a lender.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum LieEvent {
    F,
    E,
    FAndE,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DeviationFinding {
    /// Semicolon-separated description, e.g. `op1;coop;b=0/0;lambda=0/1`.
    pub state: String,
    pub kind: DeviationKindTag,
    pub gain: f64,
    pub loss: f64,
    pub profitable: bool,
    /// Standard error of `gain − loss` for Monte Carlo findings.
    pub std_err: Option<f64>,
    pub event: Option<LieEvent>,
}

impl DeviationFinding {
    pub fn exact(state: String, kind: DeviationKindTag, gain: f64, loss: f64) -> Self {
        DeviationFinding {
            state,
            kind,
            gain,
            loss,
            profitable: gain > loss + PROFIT_TOLERANCE,
            std_err: None,
            event: None,
        }
    }
}

/// Every one-shot deviation finding for the scenario's scheme.
///
/// Dynamic sharing with more than two operators beyond the exact budget is
/// checked for lies by Monte Carlo only; its detectable deviations need the
/// exact value function and are not reported then.
pub fn verify_scenario(scenario: &Scenario) -> Result<Vec<DeviationFinding>> {
    scenario.validate()?;
    let model = &scenario.model;
    let discount = scenario.discount;
    match &scenario.scheme {
        Scheme::FullSpectrum => Err(Error::Config(
            "full-spectrum sharing has no prescribed profile to verify".into(),
        )),
        Scheme::Static(params) => verify_static(model, &scenario.traffic, params, discount),
        Scheme::Entry(params) => verify_entry(model, &EntryGame::new(model, params.clone())?, discount),
        Scheme::Dynamic(params) if params.n == 2 => {
            check_trade_hypothesis(&scenario.traffic)?;
            let chain = BalanceChain::new(
                model.clone(),
                params.baseline_mhz(),
                params.trade.mhz(),
                params.cap_steps,
                JointTraffic::from_spec(&scenario.traffic)?,
            )?;
            let table = value_function(&chain, discount)?;
            let mut findings = verify_truthfulness_exact(&chain, &table, discount)?;
            findings.extend(verify_detectable(&chain, &table, discount, params.punishment)?);
            Ok(findings)
        }
        Scheme::Dynamic(params) => {
            let report = verify_truthfulness_n_ops(model, &scenario.traffic, params, discount, &NopsOptions::default())?;
            let mut findings = report.findings;
            if report.mode == NopsMode::Exact {
                let chain = JointChain::build(model, &scenario.traffic, params, DEFAULT_EXACT_LIMIT)?;
                let values = chain.value_function(discount)?;
                findings.extend(chain.detectable_findings(&values, discount, params.punishment)?);
            }
            Ok(findings)
        }
    }
}

pub fn count_profitable(findings: &[DeviationFinding]) -> usize {
    findings.iter().filter(|f| f.profitable).count()
}

/// Both trade directions must occur: every operator must sometimes be the
/// only high one relative to somebody.
pub fn check_trade_hypothesis(traffic: &TrafficSpec) -> Result<()> {
    if !traffic.all_binary() {
        return Err(Error::Domain("dynamic sharing needs two-level traffic".into()));
    }
    let p: Vec<f64> = traffic.operators.iter().map(|d| d.p_high()).collect();
    for (i, &pi) in p.iter().enumerate() {
        let has_partner = p.iter().enumerate().any(|(j, &pj)| j != i && pi > 0.0 && pj < 1.0);
        if !has_partner {
            return Err(Error::Hypothesis(format!(
                "operator {} is never strictly busier than another operator",
                i + 1
            )));
        }
    }
    Ok(())
}

/// Outcome of certifying one dynamic parameterization.
#[derive(Clone, Debug, PartialEq)]
pub struct Certificate {
    pub certified: bool,
    pub small_trade: bool,
    pub bound: PunishmentBound,
    /// Punishment length from the bound.
    pub punishment: u32,
    pub profitable_lies: usize,
    pub profitable_detectable: usize,
    pub stationary_revenue: f64,
    /// `Σ_i V^i` from the all-zero ledger.
    pub value_at_origin: f64,
}

impl Certificate {
    pub fn summary(&self) -> String {
        format!(
            "small_trade={} T={} profitable_lies={} profitable_detectable={}",
            self.small_trade, self.punishment, self.profitable_lies, self.profitable_detectable
        )
    }
}

/// Exact certification of a dynamic profile: the small-trade condition,
/// a finite punishment length from the bound, and no profitable one-shot
/// lie or detectable deviation at that length. `params.punishment` is ignored.
pub fn certify_dynamic(
    model: &UtilityModel,
    traffic: &TrafficSpec,
    params: &DynamicParams,
    discount: f64,
) -> Result<Certificate> {
    if traffic.len() != params.n {
        return Err(Error::Contract(format!(
            "{} traffic distributions for {} operators",
            traffic.len(),
            params.n
        )));
    }
    check_trade_hypothesis(traffic)?;
    let w = params.baseline_mhz();
    let trade = params.trade.mhz();
    let bound = min_punishment_dynamic(model, params.n, w, trade, params.cap_steps)?;
    let small_trade = check_small_trade_condition(model, w, trade)?;
    let t = crate::static_sharing::Punishment::Slots(bound.t);
    let (lies, detectable, stationary, origin) = if params.n == 2 {
        let chain = BalanceChain::new(
            model.clone(),
            w,
            trade,
            params.cap_steps,
            JointTraffic::from_spec(traffic)?,
        )?;
        let table = value_function(&chain, discount)?;
        let lies = verify_truthfulness_exact(&chain, &table, discount)?;
        let det = verify_detectable(&chain, &table, discount, t)?;
        let origin = table.get(0).iter().sum();
        (lies, det, chain.stationary_revenue()?, origin)
    } else {
        let chain = JointChain::build(model, traffic, params, DEFAULT_EXACT_LIMIT)?;
        let table = chain.value_function(discount)?;
        let lies = chain.lie_findings(&table, discount);
        let det = chain.detectable_findings(&table, discount, t)?;
        let origin = table[chain.origin()].iter().sum();
        (lies, det, chain.stationary_revenue()?, origin)
    };
    let profitable_lies = count_profitable(&lies);
    let profitable_detectable = count_profitable(&detectable);
    Ok(Certificate {
        certified: small_trade && profitable_lies == 0 && profitable_detectable == 0,
        small_trade,
        bound,
        punishment: bound.t,
        profitable_lies,
        profitable_detectable,
        stationary_revenue: stationary,
        value_at_origin: origin,
    })
}

/// Solves `V = (1−δ) R + δ P V` for every reward column.
///
/// `rows[s]` lists `(next state, probability)`; `rewards[s][j]` is the
/// expected one-slot reward of column `j` in state `s`. Returns the values
/// and the max-norm residual.
pub(crate) fn solve_discounted(
    rows: &[Vec<(usize, f64)>],
    rewards: &[Vec<f64>],
    discount: f64,
) -> Result<(Vec<Vec<f64>>, f64)> {
    if !(0.0..1.0).contains(&discount) {
        return Err(Error::Domain(format!("discount must lie in [0, 1), got {discount}")));
    }
    let n = rows.len();
    let cols = rewards.first().map_or(0, Vec::len);
    let values = if n <= DENSE_SOLVE_LIMIT {
        let mut a = DMatrix::<f64>::identity(n, n);
        for (s, row) in rows.iter().enumerate() {
            for &(t, p) in row {
                a[(s, t)] -= discount * p;
            }
        }
        let b = DMatrix::from_fn(n, cols, |s, j| (1.0 - discount) * rewards[s][j]);
        let x = a
            .lu()
            .solve(&b)
            .ok_or_else(|| Error::Domain("singular value-function system".into()))?;
        (0..n).map(|s| (0..cols).map(|j| x[(s, j)]).collect()).collect()
    } else {
        gauss_seidel(rows, rewards, discount)
    };
    let residual = bellman_residual(rows, rewards, discount, &values);
    Ok((values, residual))
}

fn gauss_seidel(rows: &[Vec<(usize, f64)>], rewards: &[Vec<f64>], discount: f64) -> Vec<Vec<f64>> {
    let cols = rewards.first().map_or(0, Vec::len);
    let mut v: Vec<Vec<f64>> = rewards.to_vec();
    loop {
        let mut change: f64 = 0.0;
        for (s, row) in rows.iter().enumerate() {
            let stay: f64 = row.iter().filter(|&&(t, _)| t == s).map(|&(_, p)| p).sum();
            for j in 0..cols {
                let mut acc = (1.0 - discount) * rewards[s][j];
                for &(t, p) in row {
                    if t != s {
                        acc += discount * p * v[t][j];
                    }
                }
                let new = acc / (1.0 - discount * stay);
                change = change.max((new - v[s][j]).abs());
                v[s][j] = new;
            }
        }
        if change < 1e-13 {
            return v;
        }
    }
}

fn bellman_residual(rows: &[Vec<(usize, f64)>], rewards: &[Vec<f64>], discount: f64, v: &[Vec<f64>]) -> f64 {
    let mut worst: f64 = 0.0;
    for (s, row) in rows.iter().enumerate() {
        for j in 0..v[s].len() {
            let rhs = (1.0 - discount) * rewards[s][j] + discount * row.iter().map(|&(t, p)| p * v[t][j]).sum::<f64>();
            worst = worst.max((v[s][j] - rhs).abs());
        }
    }
    worst
}

/// Stationary distribution of the transition rows.
pub(crate) fn stationary(rows: &[Vec<(usize, f64)>]) -> Result<Vec<f64>> {
    let n = rows.len();
    if n == 0 {
        return Ok(Vec::new());
    }
    if n <= DENSE_SOLVE_LIMIT {
        // (Pᵀ − I) x = 0 with the last equation replaced by Σ x = 1
        let mut a = DMatrix::<f64>::zeros(n, n);
        for (s, row) in rows.iter().enumerate() {
            for &(t, p) in row {
                a[(t, s)] += p;
            }
            a[(s, s)] -= 1.0;
        }
        for s in 0..n {
            a[(n - 1, s)] = 1.0;
        }
        let mut b = DMatrix::<f64>::zeros(n, 1);
        b[(n - 1, 0)] = 1.0;
        let x = a
            .lu()
            .solve(&b)
            .ok_or_else(|| Error::Domain("balance chain has no unique stationary distribution".into()))?;
        return Ok(x.iter().copied().collect());
    }
    let mut x = vec![1.0 / n as f64; n];
    for _ in 0..1_000_000 {
        let mut next = vec![0.0; n];
        for (s, row) in rows.iter().enumerate() {
            for &(t, p) in row {
                next[t] += x[s] * p;
            }
        }
        let change: f64 = next.iter().zip(&x).map(|(a, b)| (a - b).abs()).sum();
        x = next;
        if change < 1e-14 {
            return Ok(x);
        }
    }
    Err(Error::Domain("stationary iteration did not converge".into()))
}
