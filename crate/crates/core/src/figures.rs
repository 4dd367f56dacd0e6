//! Reproduction presets for the entry-threshold, revenue and balance-cap figures.
//!
//! The revenue figure's horizontal axis is read as the PSD cap `P` in dB.

use rayon::prelude::*;

use crate::dynamic::{choose_delta, delta_grid, DynamicParams};
use crate::entry::{max_entrants, DEFAULT_ENTRY_CAP};
use crate::error::{Error, Result};
use crate::spectrum::Freq;
use crate::static_sharing::Punishment;
use crate::traffic::{expectation, LevelDistribution, TrafficSpec};
use crate::utility::{UtilityFamily, UtilityModel};
use crate::verifier::{certify_dynamic, value_function, BalanceChain, JointTraffic};

pub const FIG2_HEADER: [&str; 2] = ["cost", "n_star"];
pub const FIG3_HEADER: [&str; 4] = ["p_db", "revenue_full", "revenue_static", "revenue_dynamic"];
pub const FIG4_HEADER: [&str; 2] = ["balance_cap_mhz", "dynamic_over_full_percent"];

pub const FIG2_DEFAULT_GRID: &str = "5:400:80";
pub const FIG3_DEFAULT_GRID: &str = "0:40:41";

/// `start:stop:count` (inclusive, evenly spaced), a comma list, or one number.
pub fn parse_grid(spec: &str) -> Result<Vec<f64>> {
    let bad = |m: &str| Error::Config(format!("grid `{spec}`: {m}"));
    let num = |s: &str| s.trim().parse::<f64>().map_err(|_| bad(&format!("`{}` is not a number", s.trim())));
    let parts: Vec<&str> = spec.split(':').collect();
    let values = match parts.as_slice() {
        [start, stop, count] => {
            let (a, b) = (num(start)?, num(stop)?);
            let n: usize = count.trim().parse().map_err(|_| bad("count must be a positive integer"))?;
            match n {
                0 => return Err(bad("count must be a positive integer")),
                1 => vec![a],
                _ => (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect(),
            }
        }
        [_] => spec.split(',').map(num).collect::<Result<Vec<_>>>()?,
        _ => return Err(bad("expected start:stop:count or a comma-separated list")),
    };
    if values.iter().any(|v| !v.is_finite()) {
        return Err(bad("values must be finite"));
    }
    Ok(values)
}

/// Linear utility, `W = 100 MHz`, `P = 100`, `E[Λ] = 1/2`.
pub fn fig2_model() -> (UtilityModel, LevelDistribution) {
    let model = UtilityModel::shannon(100.0, 100.0, UtilityFamily::Linear).expect("valid preset");
    (model, LevelDistribution::two_level(0.5).expect("valid preset"))
}

/// `n*` for every cost in the grid.
pub fn fig2(costs: &[f64]) -> Result<Vec<(f64, usize)>> {
    let (model, dist) = fig2_model();
    costs
        .iter()
        .map(|&c| {
            if !(c > 0.0) {
                return Err(Error::Domain(format!("investment cost must be positive, got {c}")));
            }
            Ok((c, max_entrants(c, &model, &dist, DEFAULT_ENTRY_CAP)?))
        })
        .collect()
}

/// Two operators with Cobb-Douglas utility sharing `W`.
#[derive(Clone, Debug)]
pub struct RevenuePreset {
    pub bandwidth_mhz: f64,
    pub family: UtilityFamily,
    pub p_high: [f64; 2],
    pub discount: f64,
    pub balance_cap_mhz: f64,
    /// Resolution of the trade-quantum grid.
    pub trade_step_mhz: f64,
}

impl Default for RevenuePreset {
    fn default() -> Self {
        RevenuePreset {
            bandwidth_mhz: 100.0,
            family: UtilityFamily::cobb_douglas(),
            p_high: [0.25, 0.5],
            discount: 0.99,
            balance_cap_mhz: 50.0,
            trade_step_mhz: 1.0,
        }
    }
}

impl RevenuePreset {
    pub fn model(&self, power: f64) -> Result<UtilityModel> {
        UtilityModel::shannon(self.bandwidth_mhz, power, self.family.clone())
    }

    pub fn traffic(&self) -> Result<TrafficSpec> {
        TrafficSpec::two_level(&self.p_high)
    }

    /// Expected total one-slot utility when both operators use the whole band.
    pub fn full_total(&self, model: &UtilityModel) -> Result<f64> {
        let x = model.full_spectrum_bandwidth(2)?;
        Ok(self.traffic()?.operators.iter().map(|d| expectation(d, |l| model.pi(x, l))).sum())
    }

    /// Expected total one-slot utility under an even split.
    pub fn static_total(&self, model: &UtilityModel) -> Result<f64> {
        let w = self.bandwidth_mhz / 2.0;
        Ok(self.traffic()?.operators.iter().map(|d| expectation(d, |l| model.pi(w, l))).sum())
    }

    /// Exact `V¹ + V²` from the zero balance for a fixed trade quantum and cap.
    pub fn dynamic_total(&self, model: &UtilityModel, trade_mhz: f64, cap_steps: i64) -> Result<f64> {
        let joint = JointTraffic::independent(self.p_high[0], self.p_high[1])?;
        let chain = BalanceChain::new(model.clone(), self.bandwidth_mhz / 2.0, trade_mhz, cap_steps, joint)?;
        Ok(value_function(&chain, self.discount)?.get(0).iter().sum())
    }

    fn trade_grid(&self) -> Result<Vec<Freq>> {
        delta_grid(Freq::from_mhz(self.bandwidth_mhz / 2.0), Freq::from_mhz(self.trade_step_mhz))
    }

    /// Whether any trade can ever execute: some operator high while another is low.
    fn trades_possible(&self) -> bool {
        let [a, b] = self.p_high;
        (a > 0.0 && b < 1.0) || (b > 0.0 && a < 1.0)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Fig3Row {
    pub p_db: f64,
    pub full: f64,
    pub static_: f64,
    /// NaN when no trade quantum is certified.
    pub dynamic: f64,
    pub trade: Option<Freq>,
}

impl Fig3Row {
    pub fn cells(&self) -> Vec<f64> {
        vec![self.p_db, self.full, self.static_, self.dynamic]
    }
}

pub fn fig3(grid_db: &[f64], preset: &RevenuePreset) -> Result<Vec<Fig3Row>> {
    let grid = preset.trade_grid()?;
    let traffic = preset.traffic()?;
    grid_db
        .par_iter()
        .map(|&p_db| {
            let model = preset.model(10f64.powf(p_db / 10.0))?;
            let full = preset.full_total(&model)?;
            let static_ = preset.static_total(&model)?;
            let cap = Freq::from_mhz(preset.balance_cap_mhz);
            let (dynamic, trade) = match choose_delta(&model, &traffic, cap, preset.discount, &grid) {
                Ok(choice) => (
                    preset.dynamic_total(&model, choice.trade.mhz(), choice.cap_steps)?,
                    Some(choice.trade),
                ),
                Err(Error::Hypothesis(_)) if !preset.trades_possible() => (static_, None),
                Err(Error::NoEquilibrium(_) | Error::Hypothesis(_)) => (f64::NAN, None),
                Err(e) => return Err(e),
            };
            Ok(Fig3Row {
                p_db,
                full,
                static_,
                dynamic,
                trade,
            })
        })
        .collect()
}

/// `log2(1 + P) = 8`.
pub const FIG4_POWER: f64 = 255.0;

#[derive(Clone, Debug, PartialEq)]
pub struct Fig4Row {
    pub balance_cap_mhz: f64,
    pub cap_steps: i64,
    pub improvement_percent: f64,
    /// Whether the profile at this cap passes the exact certification.
    pub certified: bool,
}

impl Fig4Row {
    pub fn cells(&self) -> Vec<f64> {
        vec![self.balance_cap_mhz, self.improvement_percent]
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Fig4Result {
    pub trade: Freq,
    pub rows: Vec<Fig4Row>,
}

/// The trade quantum used by [`fig4`] when none is given: the best certified
/// one at the preset's balance cap.
pub fn fig4_default_trade(preset: &RevenuePreset) -> Result<Freq> {
    let model = preset.model(FIG4_POWER)?;
    let cap = Freq::from_mhz(preset.balance_cap_mhz);
    Ok(choose_delta(&model, &preset.traffic()?, cap, preset.discount, &preset.trade_grid()?)?.trade)
}

/// Improvement of dynamic over full-spectrum sharing at `P = 255` with the
/// trade quantum fixed and the cap swept; each cap uses `⌊b̄/Δ⌋` quanta.
/// Without a grid, `b̄ = Δ, 2Δ, …, 10Δ`.
pub fn fig4(caps_mhz: Option<&[f64]>, trade: Option<Freq>, preset: &RevenuePreset) -> Result<Fig4Result> {
    let model = preset.model(FIG4_POWER)?;
    let traffic = preset.traffic()?;
    let trade = match trade {
        Some(t) => t,
        None => fig4_default_trade(preset)?,
    };
    if trade <= Freq::ZERO || trade.mhz() > preset.bandwidth_mhz / 2.0 {
        return Err(Error::Domain(format!("trade quantum {trade} MHz outside (0, W/2]")));
    }
    let caps: Vec<f64> = match caps_mhz {
        Some(c) => c.to_vec(),
        None => (1..=10).map(|k| trade.scaled(k).mhz()).collect(),
    };
    let full = preset.full_total(&model)?;
    let rows = caps
        .par_iter()
        .map(|&cap| {
            let k = Freq::from_mhz(cap).hz() / trade.hz();
            if k < 1 {
                return Err(Error::Domain(format!(
                    "balance cap {cap} MHz is below the trade quantum {trade} MHz"
                )));
            }
            let total = preset.dynamic_total(&model, trade.mhz(), k)?;
            let params = DynamicParams::new(2, model.bandwidth, trade, k, Punishment::Slots(1))?;
            let certified = match certify_dynamic(&model, &traffic, &params, preset.discount) {
                Ok(c) => c.certified,
                Err(Error::Infeasible(_) | Error::CapExceeded { .. }) => false,
                Err(e) => return Err(e),
            };
            Ok(Fig4Row {
                balance_cap_mhz: cap,
                cap_steps: k,
                improvement_percent: 100.0 * (total / full - 1.0),
                certified,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Fig4Result { trade, rows })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_syntax() {
        assert_eq!(parse_grid("0:40:5").unwrap(), vec![0.0, 10.0, 20.0, 30.0, 40.0]);
        assert_eq!(parse_grid("40, 100,400").unwrap(), vec![40.0, 100.0, 400.0]);
        assert_eq!(parse_grid("7").unwrap(), vec![7.0]);
        assert!(parse_grid("1:2").is_err());
        assert!(parse_grid("1:2:0").is_err());
        assert!(parse_grid("a,b").is_err());
    }

    #[test]
    fn fig2_points() {
        let rows = fig2(&[40.0, 100.0, 400.0]).unwrap();
        assert_eq!(rows.iter().map(|r| r.1).collect::<Vec<_>>(), vec![2, 1, 0]);
        assert!(fig2(&[0.0]).is_err());
    }

    #[test]
    fn closed_form_totals() {
        let preset = RevenuePreset::default();
        let p: f64 = 1000.0;
        let m = preset.model(p).unwrap();
        // E[(24λ+1)^0.5] is 2 for p_high = 1/4 and 3 for p_high = 1/2
        let x_full = 100.0 * (1.0 + p / (p + 1.0)).log2();
        assert!((preset.full_total(&m).unwrap() - 5.0 * x_full.powf(0.9)).abs() < 1e-9);
        let x_static = 50.0 * (1.0 + p).log2();
        assert!((preset.static_total(&m).unwrap() - 5.0 * x_static.powf(0.9)).abs() < 1e-9);
    }

    #[test]
    fn degenerate_traffic_makes_dynamic_static() {
        let preset = RevenuePreset {
            p_high: [0.0, 0.0],
            ..RevenuePreset::default()
        };
        let row = &fig3(&[30.0], &preset).unwrap()[0];
        assert_eq!(row.dynamic, row.static_);
    }

    #[test]
    fn fig4_positive_at_one_quantum() {
        let preset = RevenuePreset::default();
        let r = fig4(Some(&[37.0, 74.0]), Some(Freq::from_mhz(37.0)), &preset).unwrap();
        assert_eq!(r.rows[0].cap_steps, 1);
        assert!(r.rows[0].improvement_percent > 0.0);
        assert!(r.rows[1].improvement_percent >= r.rows[0].improvement_percent);
        assert!(fig4(Some(&[10.0]), Some(Freq::from_mhz(37.0)), &preset).is_err());
    }
}
