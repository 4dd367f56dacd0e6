//! Frequency points and interval-set spectrum allocations.
//!
//! Endpoints are stored as integer hertz so that support comparison and
//! overlap partitioning are exact. All public conversions go through MHz.

use std::fmt;

use crate::error::{Error, Result};

const HZ_PER_MHZ: f64 = 1_000_000.0;

/// A frequency (or bandwidth) in integer hertz.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Freq(i64);

impl Freq {
    pub const ZERO: Freq = Freq(0);

    pub const fn from_hz(hz: i64) -> Self {
        Freq(hz)
    }

    /// Rounds to the nearest hertz.
    pub fn from_mhz(mhz: f64) -> Self {
        Freq((mhz * HZ_PER_MHZ).round() as i64)
    }

    pub const fn hz(self) -> i64 {
        self.0
    }

    pub fn mhz(self) -> f64 {
        self.0 as f64 / HZ_PER_MHZ
    }

    pub fn scaled(self, factor: i64) -> Freq {
        Freq(self.0 * factor)
    }
}

impl std::ops::Add for Freq {
    type Output = Freq;
    fn add(self, rhs: Freq) -> Freq {
        Freq(self.0 + rhs.0)
    }
}

impl std::ops::Sub for Freq {
    type Output = Freq;
    fn sub(self, rhs: Freq) -> Freq {
        Freq(self.0 - rhs.0)
    }
}

impl fmt::Display for Freq {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.mhz())
    }
}

/// A half-open interval `[lo, hi)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Interval {
    pub lo: Freq,
    pub hi: Freq,
}

impl Interval {
    pub fn new(lo: Freq, hi: Freq) -> Result<Self> {
        if lo >= hi {
            return Err(Error::Domain(format!("empty interval [{lo}, {hi})")));
        }
        Ok(Interval { lo, hi })
    }

    pub fn width(&self) -> Freq {
        self.hi - self.lo
    }

    pub fn contains(&self, f: Freq) -> bool {
        self.lo <= f && f < self.hi
    }
}

/// The support of an operator's on-off flat PSD: sorted, pairwise disjoint
/// half-open intervals.
///
/// Adjacent intervals are kept as given, so `[0,25) ∪ [25,50)` and `[0,50)`
/// are different representations of the same support. Use
/// [`SpectrumAllocation::same_support`] for deviation detection.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct SpectrumAllocation {
    intervals: Vec<Interval>,
}

impl SpectrumAllocation {
    pub fn empty() -> Self {
        SpectrumAllocation::default()
    }

    /// Validates ordering and disjointness.
    pub fn new(intervals: Vec<Interval>) -> Result<Self> {
        for pair in intervals.windows(2) {
            if pair[0].hi > pair[1].lo {
                return Err(Error::Domain(format!(
                    "intervals [{}, {}) and [{}, {}) overlap or are unsorted",
                    pair[0].lo, pair[0].hi, pair[1].lo, pair[1].hi
                )));
            }
        }
        if let Some(first) = intervals.first() {
            if first.lo < Freq::ZERO {
                return Err(Error::Domain("interval starts below 0".into()));
            }
        }
        Ok(SpectrumAllocation { intervals })
    }

    /// A single block `[lo, hi)`; empty when `lo == hi`.
    pub fn block(lo: Freq, hi: Freq) -> Result<Self> {
        if lo == hi {
            return Ok(Self::empty());
        }
        Self::new(vec![Interval::new(lo, hi)?])
    }

    pub fn from_mhz(ranges: &[(f64, f64)]) -> Result<Self> {
        let intervals = ranges
            .iter()
            .map(|&(lo, hi)| Interval::new(Freq::from_mhz(lo), Freq::from_mhz(hi)))
            .collect::<Result<Vec<_>>>()?;
        Self::new(intervals)
    }

    /// `[0, total)`.
    pub fn full(total: Freq) -> Self {
        SpectrumAllocation {
            intervals: vec![Interval { lo: Freq::ZERO, hi: total }],
        }
    }

    pub fn intervals(&self) -> &[Interval] {
        &self.intervals
    }

    pub fn is_empty(&self) -> bool {
        self.intervals.is_empty()
    }

    pub fn width(&self) -> Freq {
        self.intervals
            .iter()
            .fold(Freq::ZERO, |acc, iv| acc + iv.width())
    }

    pub fn covers(&self, f: Freq) -> bool {
        // intervals are sorted, so a binary search on `hi` finds the candidate
        let idx = self.intervals.partition_point(|iv| iv.hi <= f);
        self.intervals.get(idx).is_some_and(|iv| iv.contains(f))
    }

    /// Checks that the allocation lies within `[0, total)`.
    pub fn check_within(&self, total: Freq) -> Result<()> {
        match self.intervals.last() {
            Some(iv) if iv.hi > total => Err(Error::Domain(format!(
                "interval [{}, {}) exceeds band edge {}",
                iv.lo, iv.hi, total
            ))),
            _ => Ok(()),
        }
    }

    /// Adjacent intervals merged.
    pub fn canonical(&self) -> SpectrumAllocation {
        let mut merged: Vec<Interval> = Vec::with_capacity(self.intervals.len());
        for iv in &self.intervals {
            match merged.last_mut() {
                Some(last) if last.hi == iv.lo => last.hi = iv.hi,
                _ => merged.push(*iv),
            }
        }
        SpectrumAllocation { intervals: merged }
    }

    /// Exact support equality, independent of how adjacent pieces are split.
    pub fn same_support(&self, other: &SpectrumAllocation) -> bool {
        self.canonical() == other.canonical()
    }

    /// Splits interval `index` at `at`; used to check that utilities do not
    /// depend on the representation.
    pub fn split_at(&self, index: usize, at: Freq) -> Result<SpectrumAllocation> {
        let iv = self
            .intervals
            .get(index)
            .ok_or_else(|| Error::Contract(format!("no interval {index}")))?;
        if !(iv.lo < at && at < iv.hi) {
            return Err(Error::Domain(format!("split point {at} not inside interval")));
        }
        let mut intervals = self.intervals.clone();
        intervals.splice(
            index..=index,
            [Interval { lo: iv.lo, hi: at }, Interval { lo: at, hi: iv.hi }],
        );
        Ok(SpectrumAllocation { intervals })
    }

    pub fn is_subset_of(&self, other: &SpectrumAllocation) -> bool {
        let other = other.canonical();
        self.intervals.iter().all(|iv| {
            other
                .intervals
                .iter()
                .any(|o| o.lo <= iv.lo && iv.hi <= o.hi)
        })
    }
}

impl fmt::Display for SpectrumAllocation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.intervals.is_empty() {
            return write!(f, "{{}}");
        }
        for (i, iv) in self.intervals.iter().enumerate() {
            if i > 0 {
                write!(f, "+")?;
            }
            write!(f, "[{},{})", iv.lo, iv.hi)?;
        }
        Ok(())
    }
}

/// Tiles `[0, total)` contiguously in index order with the given widths.
///
/// Zero widths produce empty allocations. The widths must sum to `total`.
pub fn tile(widths: &[Freq], total: Freq) -> Result<Vec<SpectrumAllocation>> {
    let sum = widths.iter().fold(Freq::ZERO, |acc, &w| acc + w);
    if sum != total {
        return Err(Error::Contract(format!(
            "widths sum to {sum} MHz, expected {total} MHz"
        )));
    }
    let mut lo = Freq::ZERO;
    widths
        .iter()
        .map(|&w| {
            if w < Freq::ZERO {
                return Err(Error::Domain(format!("negative width {w}")));
            }
            let alloc = SpectrumAllocation::block(lo, lo + w)?;
            lo = lo + w;
            Ok(alloc)
        })
        .collect()
}

/// True when the allocations are pairwise disjoint and their union is exactly `[0, total)`.
pub fn tiles_band(allocs: &[SpectrumAllocation], total: Freq) -> bool {
    let mut all: Vec<Interval> = allocs
        .iter()
        .flat_map(|a| a.intervals().iter().copied())
        .collect();
    all.sort_by_key(|iv| iv.lo);
    let mut cursor = Freq::ZERO;
    for iv in all {
        if iv.lo != cursor {
            return false;
        }
        cursor = iv.hi;
    }
    cursor == total
}
