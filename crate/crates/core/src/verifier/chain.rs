//! The two-operator balance chain.

use crate::error::{Error, Result};
use crate::traffic::TrafficSpec;
use crate::utility::UtilityModel;

use super::{solve_discounted, stationary};

/// Joint law of the two operators' binary traffic; `p[l1][l2]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct JointTraffic {
    pub p: [[f64; 2]; 2],
}

impl JointTraffic {
    pub fn new(p00: f64, p01: f64, p10: f64, p11: f64) -> Result<Self> {
        let all = [p00, p01, p10, p11];
        if all.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::Domain("joint probabilities must lie in [0, 1]".into()));
        }
        let total: f64 = all.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::Domain(format!("joint probabilities sum to {total}, not 1")));
        }
        Ok(JointTraffic {
            p: [[p00, p01], [p10, p11]],
        })
    }

    pub fn independent(p1: f64, p2: f64) -> Result<Self> {
        Self::new((1.0 - p1) * (1.0 - p2), (1.0 - p1) * p2, p1 * (1.0 - p2), p1 * p2)
    }

    pub fn from_spec(traffic: &TrafficSpec) -> Result<Self> {
        if traffic.len() != 2 {
            return Err(Error::Contract("the balance chain needs exactly two operators".into()));
        }
        if !traffic.all_binary() {
            return Err(Error::Domain("the balance chain needs two-level traffic".into()));
        }
        Self::independent(traffic.operators[0].p_high(), traffic.operators[1].p_high())
    }

    pub fn prob(&self, l1: usize, l2: usize) -> f64 {
        self.p[l1][l2]
    }

    /// Marginal probability that operator `op` is high.
    pub fn p_high(&self, op: usize) -> f64 {
        match op {
            0 => self.p[1][0] + self.p[1][1],
            _ => self.p[0][1] + self.p[1][1],
        }
    }

    /// Traffic pairs with positive probability.
    pub fn support(&self) -> impl Iterator<Item = ((usize, usize), f64)> + '_ {
        [(0, 0), (0, 1), (1, 0), (1, 1)]
            .into_iter()
            .map(|(a, b)| ((a, b), self.p[a][b]))
            .filter(|&(_, p)| p > 0.0)
    }
}

/// Balance of operator 1 in trade quanta, `b ∈ {−k, …, k}`; operator 2 holds `−b`.
#[derive(Clone, Debug)]
pub struct BalanceChain {
    pub model: UtilityModel,
    /// Baseline width `w` in MHz.
    pub w: f64,
    /// Trade quantum `Δ` in MHz.
    pub trade: f64,
    pub k: i64,
    pub joint: JointTraffic,
}

impl BalanceChain {
    pub fn new(model: UtilityModel, w: f64, trade: f64, k: i64, joint: JointTraffic) -> Result<Self> {
        if !(trade > 0.0 && trade <= w) {
            return Err(Error::Domain(format!("trade quantum {trade} must lie in (0, {w}]")));
        }
        if k < 1 {
            return Err(Error::Domain("balance cap must be at least one quantum".into()));
        }
        Ok(BalanceChain {
            model,
            w,
            trade,
            k,
            joint,
        })
    }

    pub fn len(&self) -> usize {
        (2 * self.k + 1) as usize
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn states(&self) -> std::ops::RangeInclusive<i64> {
        -self.k..=self.k
    }

    pub fn index(&self, b: i64) -> usize {
        (b + self.k) as usize
    }

    /// Widths of both operators and operator 1's next balance under the reports.
    pub fn outcome(&self, b: i64, r1: bool, r2: bool) -> ([f64; 2], i64) {
        let (w, d) = (self.w, self.trade);
        match (r1, r2) {
            (true, false) if b > -self.k => ([w + d, w - d], b - 1),
            (false, true) if b < self.k => ([w - d, w + d], b + 1),
            _ => ([w, w], b),
        }
    }

    /// Expected one-slot utility of both operators at `b` under truthful reports.
    pub fn one_slot(&self, b: i64) -> [f64; 2] {
        let mut out = [0.0; 2];
        for ((l1, l2), p) in self.joint.support() {
            let (x, _) = self.outcome(b, l1 == 1, l2 == 1);
            out[0] += p * self.model.pi(x[0], l1 as f64);
            out[1] += p * self.model.pi(x[1], l2 as f64);
        }
        out
    }

    pub(crate) fn rows(&self) -> Vec<Vec<(usize, f64)>> {
        self.states()
            .map(|b| {
                self.joint
                    .support()
                    .map(|((l1, l2), p)| (self.index(self.outcome(b, l1 == 1, l2 == 1).1), p))
                    .collect()
            })
            .collect()
    }

    /// Expected one-slot sum utility under the stationary balance distribution.
    pub fn stationary_revenue(&self) -> Result<f64> {
        let pi = stationary_distribution(self)?;
        Ok(self
            .states()
            .zip(&pi)
            .map(|(b, &p)| p * self.one_slot(b).iter().sum::<f64>())
            .sum())
    }

    /// `E[π_f(λ)]` of operator `op` with both on the full band.
    pub fn full_band_utility(&self, op: usize) -> Result<f64> {
        let ph = self.joint.p_high(op);
        Ok((1.0 - ph) * self.model.full_spectrum_utility(2, 0.0)?
            + ph * self.model.full_spectrum_utility(2, 1.0)?)
    }
}

/// Normalized conforming values of both operators per balance.
#[derive(Clone, Debug, PartialEq)]
pub struct ValueTable {
    pub k: i64,
    pub values: Vec<[f64; 2]>,
    pub residual: f64,
}

impl ValueTable {
    pub fn get(&self, b: i64) -> [f64; 2] {
        self.values[(b + self.k) as usize]
    }
}

/// Solves the conforming Bellman equation on the chain directly.
pub fn value_function(chain: &BalanceChain, discount: f64) -> Result<ValueTable> {
    let rewards: Vec<Vec<f64>> = chain.states().map(|b| chain.one_slot(b).to_vec()).collect();
    let (values, residual) = solve_discounted(&chain.rows(), &rewards, discount)?;
    Ok(ValueTable {
        k: chain.k,
        values: values.into_iter().map(|v| [v[0], v[1]]).collect(),
        residual,
    })
}

pub fn stationary_distribution(chain: &BalanceChain) -> Result<Vec<f64>> {
    stationary(&chain.rows())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::utility::UtilityFamily;

    fn cobb() -> UtilityModel {
        UtilityModel::shannon(100.0, 100.0, UtilityFamily::cobb_douglas()).unwrap()
    }

    fn chain(k: i64, p1: f64, p2: f64) -> BalanceChain {
        BalanceChain::new(cobb(), 50.0, 10.0, k, JointTraffic::independent(p1, p2).unwrap()).unwrap()
    }

    #[test]
    fn rows_are_stochastic_and_respect_caps() {
        let c = chain(3, 0.25, 0.5);
        for (b, row) in c.states().zip(c.rows()) {
            let total: f64 = row.iter().map(|&(_, p)| p).sum();
            assert!((total - 1.0).abs() < 1e-12);
            for &(t, _) in &row {
                assert!(t < c.len());
                assert!((t as i64 - c.index(b) as i64).abs() <= 1);
            }
        }
    }

    #[test]
    fn zero_discount_gives_one_slot_utility() {
        let c = chain(2, 0.25, 0.5);
        let v = value_function(&c, 0.0).unwrap();
        for b in c.states() {
            let u = c.one_slot(b);
            assert!((v.get(b)[0] - u[0]).abs() < 1e-12);
            assert!((v.get(b)[1] - u[1]).abs() < 1e-12);
        }
    }

    #[test]
    fn no_trades_gives_constant_value() {
        let c = BalanceChain::new(cobb(), 50.0, 10.0, 1, JointTraffic::new(0.5, 0.0, 0.0, 0.5).unwrap()).unwrap();
        let v = value_function(&c, 0.99).unwrap();
        let expect = 0.5 * c.model.pi(50.0, 0.0) + 0.5 * c.model.pi(50.0, 1.0);
        for b in c.states() {
            assert!((v.get(b)[0] - expect).abs() < 1e-9);
        }
    }

    #[test]
    fn value_is_monotone_with_bounded_increments() {
        let c = chain(5, 0.25, 0.5);
        let v = value_function(&c, 0.99).unwrap();
        assert!(v.residual < 1e-10);
        let cap = c.model.pi(60.0, 1.0) - c.model.pi(50.0, 1.0);
        for b in -5..5 {
            let inc = v.get(b + 1)[0] - v.get(b)[0];
            assert!(inc >= 0.0, "b={b}: {inc}");
            assert!(inc <= cap + 1e-9);
            // operator 2 holds −b
            assert!(v.get(b)[1] >= v.get(b + 1)[1]);
        }
    }

    #[test]
    fn stationary_distribution_of_three_state_chain() {
        let c = chain(1, 0.25, 0.5);
        let pi = stationary_distribution(&c).unwrap();
        // birth-death chain: π(b+1)/π(b) = p01/p10
        let (p01, p10) = (0.75 * 0.5, 0.25 * 0.5);
        assert!((pi[1] / pi[0] - p01 / p10).abs() < 1e-9);
        assert!((pi[2] / pi[1] - p01 / p10).abs() < 1e-9);
        assert!((pi.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn joint_traffic_validation() {
        assert!(JointTraffic::new(0.5, 0.5, 0.5, 0.0).is_err());
        let j = JointTraffic::independent(0.25, 0.5).unwrap();
        assert!((j.p_high(0) - 0.25).abs() < 1e-15);
        assert!((j.p_high(1) - 0.5).abs() < 1e-15);
        assert!(BalanceChain::new(cobb(), 50.0, 60.0, 1, j).is_err());
    }
}
