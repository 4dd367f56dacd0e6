//! Small-trade condition and punishment sizing for the dynamic profile.

use crate::error::{Error, Result};
use crate::static_sharing::smallest_exceeding;
use crate::utility::UtilityModel;

/// `π(w,0) − π(w−Δ,0) < π(w+Δ,1) − π(w,1)`: lending a quantum when idle costs
/// less than borrowing one gains when busy.
pub fn check_small_trade_condition(model: &UtilityModel, w: f64, trade: f64) -> Result<bool> {
    if !(trade > 0.0 && trade <= w) {
        return Err(Error::Domain(format!("trade quantum {trade} must lie in (0, {w}]")));
    }
    let lend_cost = model.pi(w, 0.0) - model.pi(w - trade, 0.0);
    let borrow_gain = model.pi(w + trade, 1.0) - model.pi(w, 1.0);
    Ok(lend_cost < borrow_gain)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PunishmentBound {
    /// `max_λ π(W,λ) − π(w−Δ,λ)`: one-slot gain of a detectable deviation.
    pub z1: f64,
    /// `2k (π(w+Δ,1) − π(w,1))`: most the balance can be worth.
    pub z2: f64,
    /// `π(w−Δ,0) − π_f(0)`: least a cooperative slot is worth over punishment.
    pub z3: f64,
    /// Smallest `T` with `z3·T > z1 + z2`.
    pub t: u32,
}

/// Punishment length from the `z1 + z2 − z3·T < 0` bound.
pub fn min_punishment_dynamic(model: &UtilityModel, n: usize, w: f64, trade: f64, k: i64) -> Result<PunishmentBound> {
    if !(trade > 0.0 && trade <= w) {
        return Err(Error::Domain(format!("trade quantum {trade} must lie in (0, {w}]")));
    }
    if k < 1 {
        return Err(Error::Domain("balance cap must be at least one quantum".into()));
    }
    let big_w = model.bandwidth_mhz();
    let z1 = [0.0, 1.0]
        .into_iter()
        .map(|l| model.pi(big_w, l) - model.pi(w - trade, l))
        .fold(f64::NEG_INFINITY, f64::max);
    let z2 = 2.0 * k as f64 * (model.pi(w + trade, 1.0) - model.pi(w, 1.0));
    let z3 = model.pi(w - trade, 0.0) - model.full_spectrum_utility(n, 0.0)?;
    if !(z3 > 0.0) {
        return Err(Error::Infeasible(format!(
            "a lender's idle slot is worth no more than punishment (z3 = {z3})"
        )));
    }
    let t = smallest_exceeding(z1 + z2, z3)?;
    Ok(PunishmentBound { z1, z2, z3, t })
}
