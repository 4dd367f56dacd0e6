//! Misreporting and detectable deviations on the two-operator chain.

use crate::error::{Error, Result};
use crate::static_sharing::Punishment;

use super::chain::{BalanceChain, ValueTable};
use super::{DeviationFinding, DeviationKindTag};

/// Bound on the neglected remainder at which the hitting-time recursion stops.
const TAIL_CUTOFF: f64 = 1e-12;

pub(crate) fn mhz_label(steps: i64, trade: f64) -> String {
    format!("{}", steps as f64 * trade + 0.0)
}

fn state_label(op: usize, b: i64, trade: f64, l1: usize, l2: usize) -> String {
    format!(
        "op{};coop;b={}/{};lambda={}/{}",
        op + 1,
        mhz_label(b, trade),
        mhz_label(-b, trade),
        l1,
        l2
    )
}

/// One-slot utility change of operator `op` from sending `report` instead of
/// its true level, at balance `b` and true traffic `(l1, l2)`.
pub fn lying_gain(chain: &BalanceChain, b: i64, l1: usize, l2: usize, op: usize, report: bool) -> f64 {
    let truth = [l1 == 1, l2 == 1];
    let mut lie = truth;
    lie[op] = report;
    let (x_t, _) = chain.outcome(b, truth[0], truth[1]);
    let (x_l, _) = chain.outcome(b, lie[0], lie[1]);
    let lambda = [l1, l2][op] as f64;
    chain.model.pi(x_l[op], lambda) - chain.model.pi(x_t[op], lambda)
}

fn require_both_directions(chain: &BalanceChain) -> Result<()> {
    if !(chain.joint.prob(0, 1) > 0.0 && chain.joint.prob(1, 0) > 0.0) {
        return Err(Error::Hypothesis(
            "both (low, high) and (high, low) traffic pairs need positive probability".into(),
        ));
    }
    Ok(())
}

/// Ex-post check of every lie at every balance and traffic pair.
///
/// Gain is `(1−δ)(π_lie − π_truth)` this slot; loss is `δ(V(b_truth) − V(b_lie))`.
pub fn verify_truthfulness_exact(
    chain: &BalanceChain,
    table: &ValueTable,
    discount: f64,
) -> Result<Vec<DeviationFinding>> {
    require_both_directions(chain)?;
    let mut findings = Vec::new();
    for b in chain.states() {
        for ((l1, l2), _) in chain.joint.support() {
            let truth = [l1 == 1, l2 == 1];
            let (_, next_t) = chain.outcome(b, truth[0], truth[1]);
            for op in 0..2 {
                let mut lie = truth;
                lie[op] = !lie[op];
                let (_, next_l) = chain.outcome(b, lie[0], lie[1]);
                let gain = (1.0 - discount) * lying_gain(chain, b, l1, l2, op, lie[op]);
                let loss = discount * (table.get(next_t)[op] - table.get(next_l)[op]);
                let kind = if lie[op] {
                    DeviationKindTag::LieHigh
                } else {
                    DeviationKindTag::LieLow
                };
                findings.push(DeviationFinding::exact(
                    state_label(op, b, chain.trade, l1, l2),
                    kind,
                    gain,
                    loss,
                ));
            }
        }
    }
    Ok(findings)
}

/// Loss of continuation value from `punishment` slots at the full-band utility.
pub(crate) fn punishment_loss(discount: f64, punishment: Punishment, cooperate: f64, full: f64) -> f64 {
    let weight = match punishment {
        Punishment::Slots(t) => discount - discount.powi(t as i32 + 1),
        Punishment::Grim => discount,
    };
    weight * (cooperate - full)
}

/// Detectable deviation at every cooperation state: the deviator is credited
/// with `Ū(λ)` this slot, the slot's trade still settles, and the
/// punishment then runs before play resumes from the new balance.
pub fn verify_detectable(
    chain: &BalanceChain,
    table: &ValueTable,
    discount: f64,
    punishment: Punishment,
) -> Result<Vec<DeviationFinding>> {
    let full = [chain.full_band_utility(0)?, chain.full_band_utility(1)?];
    let mut findings = Vec::new();
    for b in chain.states() {
        for ((l1, l2), _) in chain.joint.support() {
            let (x, next) = chain.outcome(b, l1 == 1, l2 == 1);
            for op in 0..2 {
                let lambda = [l1, l2][op] as f64;
                let gain = (1.0 - discount) * (chain.model.upper_utility(lambda) - chain.model.pi(x[op], lambda));
                let loss = punishment_loss(discount, punishment, table.get(next)[op], full[op]);
                findings.push(DeviationFinding::exact(
                    state_label(op, b, chain.trade, l1, l2),
                    DeviationKindTag::Detectable,
                    gain,
                    loss,
                ));
            }
        }
    }
    Ok(findings)
}

/// Discounted future loss of operator 1 after a lie that left it one quantum
/// below its truthful balance.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossBound {
    /// `L = Σ_{τ≥1} δ^τ m_τ`.
    pub value: f64,
    /// Number of slots propagated.
    pub horizon: usize,
    /// Bound on the truncated remainder.
    pub tail: f64,
    /// `π(w+Δ,1) − π(w,1)`: lost when the lie path hits the borrowing cap first.
    pub high_margin: f64,
    /// `π(w,0) − π(w−Δ,0)`: lost when the truth path hits the lending cap first.
    pub low_margin: f64,
}

/// Propagates the coupled truth/lie trajectories until they merge.
///
/// `b_truth` is operator 1's truthful balance after the lying slot; the lie
/// path sits at `b_truth − 1`.
pub fn lying_loss_bound(chain: &BalanceChain, discount: f64, b_truth: i64) -> Result<LossBound> {
    if !(0.0..1.0).contains(&discount) {
        return Err(Error::Domain(format!("discount must lie in [0, 1), got {discount}")));
    }
    let k = chain.k;
    if !(b_truth > -k && b_truth <= k) {
        return Err(Error::Domain(format!("truthful balance {b_truth} has no lie one quantum below")));
    }
    let m = &chain.model;
    let (w, d) = (chain.w, chain.trade);
    let high_margin = m.pi(w + d, 1.0) - m.pi(w, 1.0);
    let low_margin = m.pi(w, 0.0) - m.pi(w - d, 0.0);
    let p10 = chain.joint.prob(1, 0);
    let p01 = chain.joint.prob(0, 1);
    let stay = 1.0 - p10 - p01;
    // mass[i] is the probability of the unmerged pair with truth at −k+1+i
    let size = (2 * k) as usize;
    let mut mass = vec![0.0; size];
    mass[(b_truth + k - 1) as usize] = 1.0;
    let mut value = 0.0;
    let mut weight = 1.0;
    let mut horizon = 0;
    let mut alive = 1.0;
    let margin = high_margin.max(low_margin).max(0.0);
    let remainder = |weight: f64, alive: f64| weight * discount / (1.0 - discount) * alive * margin;
    while discount > 0.0 && alive > 0.0 && remainder(weight, alive) >= TAIL_CUTOFF {
        horizon += 1;
        weight *= discount;
        let m_tau = mass[0] * p10 * high_margin + mass[size - 1] * p01 * low_margin;
        value += weight * m_tau;
        let mut next = vec![0.0; size];
        for i in 0..size {
            next[i] += mass[i] * stay;
            if i > 0 {
                next[i - 1] += mass[i] * p10;
            }
            if i + 1 < size {
                next[i + 1] += mass[i] * p01;
            }
        }
        mass = next;
        alive = mass.iter().sum();
        if horizon > 100_000_000 {
            break;
        }
    }
    let tail = if discount > 0.0 { remainder(weight, alive) } else { 0.0 };
    Ok(LossBound {
        value,
        horizon,
        tail,
        high_margin,
        low_margin,
    })
}
