use super::Trace;

/// Default bound on `δ^H` when choosing a horizon.
pub const DEFAULT_TAIL_TOLERANCE: f64 = 1e-8;

/// Smallest `H ≥ 1` with `δ^H < tolerance`.
pub fn default_horizon(discount: f64, tolerance: f64) -> u64 {
    if discount <= 0.0 {
        return 1;
    }
    let mut h = (tolerance.ln() / discount.ln()).ceil().max(1.0) as u64;
    while discount.powf(h as f64) >= tolerance {
        h += 1;
    }
    while h > 1 && discount.powf((h - 1) as f64) < tolerance {
        h -= 1;
    }
    h
}

/// Per-operator normalized discounted revenue `(1−δ) Σ δ^{t−s} u_t`, where
/// `s` is the operator's first active slot.
#[derive(Clone, Debug, PartialEq)]
pub struct RevenueReport {
    pub revenues: Vec<f64>,
    pub discount: f64,
    pub horizon: u64,
    /// Largest `δ^{H−s} · u_max` over operators: what the truncated tail could add.
    pub tail_bound: f64,
}

pub(crate) struct RevenueAccumulator {
    discount: f64,
    start: Vec<Option<u64>>,
    weight: Vec<f64>,
    total: Vec<f64>,
}

impl RevenueAccumulator {
    pub fn new(n: usize, discount: f64) -> Self {
        RevenueAccumulator {
            discount,
            start: vec![None; n],
            weight: vec![1.0 - discount; n],
            total: vec![0.0; n],
        }
    }

    pub fn add(&mut self, op: usize, slot: u64, utility: f64) {
        if self.start[op].is_none() {
            self.start[op] = Some(slot);
        }
        self.total[op] += self.weight[op] * utility;
        self.weight[op] *= self.discount;
    }

    pub fn finish(self, horizon: u64, u_max: f64) -> RevenueReport {
        let tail_bound = self
            .start
            .iter()
            .map(|s| match s {
                Some(s) => self.discount.powf((horizon - s) as f64) * u_max,
                None => 0.0,
            })
            .fold(0.0, f64::max);
        RevenueReport {
            revenues: self.total,
            discount: self.discount,
            horizon,
            tail_bound,
        }
    }
}

/// Recomputes the revenue report from a complete trace.
pub fn revenue(trace: &Trace, discount: f64) -> RevenueReport {
    let n = trace.records.iter().map(|r| r.operator).max().unwrap_or(0);
    let horizon = trace.records.iter().map(|r| r.slot + 1).max().unwrap_or(0);
    let mut acc = RevenueAccumulator::new(n, discount);
    let mut u_max: f64 = 0.0;
    for r in &trace.records {
        if r.phase == "inactive" {
            continue;
        }
        acc.add(r.operator - 1, r.slot, r.utility);
        u_max = u_max.max(r.utility);
    }
    acc.finish(horizon, u_max)
}
