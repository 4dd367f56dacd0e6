//! Rates, SINR, effective bandwidth and the utility families.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::spectrum::{Freq, SpectrumAllocation};

/// Margin used when testing the strict inequalities on `π`.
pub const STRICTNESS_MARGIN: f64 = 1e-9;

/// Default number of operators scanned when checking the interference-limited condition.
pub const DEFAULT_SCAN_LIMIT: usize = 64;

/// Usefulness per Hz as a function of SINR.
#[derive(Clone, Debug, PartialEq)]
pub enum RateFunction {
    /// `log2(1 + γ)`.
    Shannon,
    /// Piecewise-linear interpolation through strictly increasing points,
    /// extended linearly past the last point.
    Table(Vec<(f64, f64)>),
}

impl RateFunction {
    pub fn table(points: Vec<(f64, f64)>) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::Domain("rate table needs at least two points".into()));
        }
        if points[0].0 != 0.0 {
            return Err(Error::Domain("rate table must start at gamma = 0".into()));
        }
        for w in points.windows(2) {
            if !(w[1].0 > w[0].0 && w[1].1 > w[0].1) {
                return Err(Error::Domain("rate table must be strictly increasing".into()));
            }
        }
        Ok(RateFunction::Table(points))
    }

    pub fn eval(&self, gamma: f64) -> Result<f64> {
        if !(gamma >= 0.0) {
            return Err(Error::Domain(format!("SINR must be non-negative, got {gamma}")));
        }
        Ok(match self {
            RateFunction::Shannon => (1.0 + gamma).log2(),
            RateFunction::Table(points) => {
                let idx = points.partition_point(|p| p.0 <= gamma).clamp(1, points.len() - 1);
                let (x0, y0) = points[idx - 1];
                let (x1, y1) = points[idx];
                y0 + (gamma - x0) * (y1 - y0) / (x1 - x0)
            }
        })
    }
}

/// User-supplied `π(x, λ)`.
#[derive(Clone)]
pub struct CustomUtility(pub Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>);

impl fmt::Debug for CustomUtility {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("CustomUtility(..)")
    }
}

/// The utility family `π(x, λ)`; `x` is effective exclusive bandwidth in MHz.
#[derive(Clone, Debug)]
pub enum UtilityFamily {
    /// `λ · r(P) · x`
    Linear,
    /// `(aλ + 1)^s · (r(P) · x)^e`
    CobbDouglas { a: f64, s: f64, e: f64 },
    Custom(CustomUtility),
}

impl UtilityFamily {
    pub fn cobb_douglas() -> Self {
        UtilityFamily::CobbDouglas { a: 24.0, s: 0.5, e: 0.9 }
    }

    pub fn custom(f: impl Fn(f64, f64) -> f64 + Send + Sync + 'static) -> Self {
        UtilityFamily::Custom(CustomUtility(Arc::new(f)))
    }
}

/// Effective exclusive bandwidth in MHz.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd)]
pub struct EffectiveBandwidth(pub f64);

/// Bandwidth, power cap, rate function and utility family.
#[derive(Clone, Debug)]
pub struct UtilityModel {
    pub bandwidth: Freq,
    /// Normalized PSD cap `P`.
    pub power: f64,
    pub rate: RateFunction,
    pub family: UtilityFamily,
    rate_at_cap: f64,
}

impl UtilityModel {
    pub fn new(
        bandwidth_mhz: f64,
        power: f64,
        rate: RateFunction,
        family: UtilityFamily,
    ) -> Result<Self> {
        if !(bandwidth_mhz > 0.0) {
            return Err(Error::Domain(format!("bandwidth must be positive, got {bandwidth_mhz}")));
        }
        if !(power > 0.0) || !power.is_finite() {
            return Err(Error::Domain(format!("power cap must be positive, got {power}")));
        }
        let rate_at_cap = rate.eval(power)?;
        Ok(UtilityModel {
            bandwidth: Freq::from_mhz(bandwidth_mhz),
            power,
            rate,
            family,
            rate_at_cap,
        })
    }

    pub fn shannon(bandwidth_mhz: f64, power: f64, family: UtilityFamily) -> Result<Self> {
        Self::new(bandwidth_mhz, power, RateFunction::Shannon, family)
    }

    pub fn bandwidth_mhz(&self) -> f64 {
        self.bandwidth.mhz()
    }

    pub fn rate(&self, gamma: f64) -> Result<f64> {
        self.rate.eval(gamma)
    }

    /// `r(P)`.
    pub fn rate_at_cap(&self) -> f64 {
        self.rate_at_cap
    }

    /// `π(x, λ)`.
    pub fn pi(&self, x: f64, lambda: f64) -> f64 {
        match &self.family {
            UtilityFamily::Linear => lambda * self.rate_at_cap * x,
            UtilityFamily::CobbDouglas { a, s, e } => {
                (a * lambda + 1.0).powf(*s) * (self.rate_at_cap * x).max(0.0).powf(*e)
            }
            UtilityFamily::Custom(f) => (f.0)(x, lambda),
        }
    }

    /// SINR at `f` seen by the operator transmitting on `own`.
    pub fn sinr(&self, own: &SpectrumAllocation, others: &[SpectrumAllocation], f: Freq) -> Result<f64> {
        if f < Freq::ZERO || f >= self.bandwidth {
            return Err(Error::Domain(format!("frequency {f} MHz outside [0, W)")));
        }
        if !own.covers(f) {
            return Ok(0.0);
        }
        let interferers = others.iter().filter(|a| a.covers(f)).count();
        Ok(self.interfered_sinr(interferers))
    }

    fn interfered_sinr(&self, interferers: usize) -> f64 {
        self.power / (1.0 + interferers as f64 * self.power)
    }

    /// `(1/r(P)) ∫ r(γ(f)) df` over the operator's support, computed exactly by
    /// splitting at every endpoint of the other allocations.
    pub fn effective_bandwidth(
        &self,
        own: &SpectrumAllocation,
        others: &[SpectrumAllocation],
    ) -> EffectiveBandwidth {
        let mut exclusive = Freq::ZERO;
        let mut shared = 0.0;
        let mut cuts: Vec<Freq> = Vec::new();
        for iv in own.intervals() {
            cuts.clear();
            cuts.push(iv.lo);
            cuts.push(iv.hi);
            for other in others {
                for o in other.intervals() {
                    if iv.lo < o.lo && o.lo < iv.hi {
                        cuts.push(o.lo);
                    }
                    if iv.lo < o.hi && o.hi < iv.hi {
                        cuts.push(o.hi);
                    }
                }
            }
            cuts.sort_unstable();
            cuts.dedup();
            for seg in cuts.windows(2) {
                let m = others.iter().filter(|a| a.covers(seg[0])).count();
                let width = seg[1] - seg[0];
                if m == 0 {
                    exclusive = exclusive + width;
                } else {
                    let ratio = self
                        .rate(self.interfered_sinr(m))
                        .expect("SINR is non-negative")
                        / self.rate_at_cap;
                    shared += width.mhz() * ratio;
                }
            }
        }
        EffectiveBandwidth(exclusive.mhz() + shared)
    }

    /// `π(effective_bandwidth, λ)`.
    pub fn utility(&self, own: &SpectrumAllocation, others: &[SpectrumAllocation], lambda: f64) -> f64 {
        self.pi(self.effective_bandwidth(own, others).0, lambda)
    }

    /// Effective bandwidth of each of `n` operators all transmitting on `[0, W)`.
    pub fn full_spectrum_bandwidth(&self, n: usize) -> Result<f64> {
        if n == 0 {
            return Err(Error::Domain("operator count must be at least 1".into()));
        }
        let gamma = self.interfered_sinr(n - 1);
        Ok(self.bandwidth_mhz() / self.rate_at_cap * self.rate(gamma)?)
    }

    /// `π_f(λ)` for `n` operators.
    pub fn full_spectrum_utility(&self, n: usize, lambda: f64) -> Result<f64> {
        Ok(self.pi(self.full_spectrum_bandwidth(n)?, lambda))
    }

    /// `Ū(λ) = π(W, λ)`: exclusive use of the whole band.
    pub fn upper_utility(&self, lambda: f64) -> f64 {
        self.pi(self.bandwidth_mhz(), lambda)
    }

    /// Checks `r(P) > sup_n n·r(P/((n−1)P+1))` over `n = 2..=n_max`, plus the
    /// `n → ∞` limit `1/ln 2` for the Shannon rate.
    pub fn check_interference_limited(&self, n_max: usize) -> Result<InterferenceCheck> {
        self.check_interference_limited_with(n_max, matches!(self.rate, RateFunction::Shannon))
    }

    /// As [`check_interference_limited`](Self::check_interference_limited) but with
    /// explicit control of the asymptotic term. `n_max = 2` without the limit is the
    /// two-operator condition.
    pub fn check_interference_limited_with(
        &self,
        n_max: usize,
        include_limit: bool,
    ) -> Result<InterferenceCheck> {
        if n_max < 2 {
            return Err(Error::Domain("n_max must be at least 2".into()));
        }
        if include_limit && !matches!(self.rate, RateFunction::Shannon) {
            return Err(Error::Domain("the analytic limit is only known for the Shannon rate".into()));
        }
        let cap = self.rate_at_cap;
        for n in 2..=n_max {
            let term = n as f64 * self.rate(self.interfered_sinr(n - 1))?;
            if !(cap > term) {
                return Ok(InterferenceCheck {
                    holds: false,
                    witness: Some(InterferenceWitness::Operators(n)),
                    asymptotic_checked: include_limit,
                });
            }
        }
        if include_limit && !(cap > std::f64::consts::LOG2_E) {
            return Ok(InterferenceCheck {
                holds: false,
                witness: Some(InterferenceWitness::Asymptotic),
                asymptotic_checked: true,
            });
        }
        Ok(InterferenceCheck {
            holds: true,
            witness: None,
            asymptotic_checked: include_limit,
        })
    }

    /// Grid check of strict monotonicity, strict concavity and strict supermodularity of `π`.
    pub fn check_pi_properties(
        &self,
        x_grid: &[f64],
        lambdas: &[f64],
        steps: &[f64],
    ) -> Result<PiPropertyReport> {
        if x_grid.is_empty() || lambdas.is_empty() || steps.is_empty() {
            return Err(Error::Domain("property grids must be non-empty".into()));
        }
        if steps.iter().any(|&d| !(d > 0.0)) {
            return Err(Error::Domain("property steps must be positive".into()));
        }
        let w = self.bandwidth_mhz();
        let mut report = PiPropertyReport::default();
        for &lambda in lambdas {
            for &x in x_grid {
                let here = self.pi(x, lambda);
                if report.non_negative.is_none() && !(here >= 0.0 && here.is_finite()) {
                    report.non_negative = Some(Counterexample {
                        x,
                        lambda,
                        other_lambda: None,
                        step: 0.0,
                        lhs: here,
                        rhs: 0.0,
                    });
                }
                for &d in steps {
                    if x + d > w {
                        continue;
                    }
                    let up = self.pi(x + d, lambda) - here;
                    if report.increasing.is_none() && !(up > STRICTNESS_MARGIN) {
                        report.increasing = Some(Counterexample {
                            x,
                            lambda,
                            other_lambda: None,
                            step: d,
                            lhs: up,
                            rhs: 0.0,
                        });
                    }
                    if x - d >= 0.0 {
                        let down = here - self.pi(x - d, lambda);
                        if report.concave.is_none() && !(up < down - STRICTNESS_MARGIN) {
                            report.concave = Some(Counterexample {
                                x,
                                lambda,
                                other_lambda: None,
                                step: d,
                                lhs: up,
                                rhs: down,
                            });
                        }
                    }
                    for &xi in lambdas.iter().filter(|&&xi| xi > lambda) {
                        let up_xi = self.pi(x + d, xi) - self.pi(x, xi);
                        if report.supermodular.is_none() && !(up < up_xi - STRICTNESS_MARGIN) {
                            report.supermodular = Some(Counterexample {
                                x,
                                lambda,
                                other_lambda: Some(xi),
                                step: d,
                                lhs: up,
                                rhs: up_xi,
                            });
                        }
                    }
                }
            }
        }
        Ok(report)
    }
}

/// Which term of the interference-limited condition failed.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InterferenceWitness {
    Operators(usize),
    Asymptotic,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct InterferenceCheck {
    pub holds: bool,
    pub witness: Option<InterferenceWitness>,
    /// False for rate tables: only the finite scan was performed.
    pub asymptotic_checked: bool,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Counterexample {
    pub x: f64,
    pub lambda: f64,
    pub other_lambda: Option<f64>,
    pub step: f64,
    pub lhs: f64,
    pub rhs: f64,
}

/// First counterexample per property, `None` when the property held on the grid.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct PiPropertyReport {
    pub non_negative: Option<Counterexample>,
    pub increasing: Option<Counterexample>,
    pub concave: Option<Counterexample>,
    pub supermodular: Option<Counterexample>,
}

impl PiPropertyReport {
    pub fn holds(&self) -> bool {
        self.non_negative.is_none()
            && self.increasing.is_none()
            && self.concave.is_none()
            && self.supermodular.is_none()
    }
}
