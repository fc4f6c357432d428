//! Local-time ledgers and the inverse local-time clock.
//!
//! A ledger is the graph of a nondecreasing local time `L` against wall time.
//! Between entries `L` is linear, so flat stretches must be closed by an entry
//! at their right end; [`LocalTimeLedger::record`] takes care of that while
//! dropping the interior of flat runs.

use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LocalTimeLedger {
    entries: Vec<(f64, f64)>,
    #[serde(skip)]
    pending_flat: Option<f64>,
}

impl Default for LocalTimeLedger {
    fn default() -> Self {
        Self::new()
    }
}

impl LocalTimeLedger {
    pub fn new() -> Self {
        LocalTimeLedger { entries: vec![(0.0, 0.0)], pending_flat: None }
    }

    /// Build from explicit entries. The first entry must be `(0, 0)`, times
    /// strictly increasing, local times nondecreasing.
    pub fn from_entries(entries: Vec<(f64, f64)>) -> Result<Self> {
        if entries.first() != Some(&(0.0, 0.0)) {
            return Err(Error::InvalidConfig("ledger must start at (0, 0)".into()));
        }
        for w in entries.windows(2) {
            if !(w[1].0 > w[0].0) || w[1].1 < w[0].1 {
                return Err(Error::InvalidConfig(format!(
                    "ledger entries {:?} -> {:?} break monotonicity",
                    w[0], w[1]
                )));
            }
        }
        Ok(LocalTimeLedger { entries, pending_flat: None })
    }

    /// Append the local time observed at time `t` (strictly after the last
    /// recorded time).
    pub fn record(&mut self, t: f64, level: f64) {
        let &(t_last, l_last) = self.entries.last().expect("ledger is never empty");
        debug_assert!(t > t_last && level >= l_last);
        if level == l_last {
            self.pending_flat = Some(t);
            return;
        }
        if let Some(tf) = self.pending_flat.take() {
            self.entries.push((tf, l_last));
        }
        self.entries.push((t, level));
    }

    /// Close any open flat run.
    pub fn flush(&mut self) {
        if let Some(tf) = self.pending_flat.take() {
            let l = self.final_level();
            self.entries.push((tf, l));
        }
    }

    pub fn entries(&self) -> &[(f64, f64)] {
        &self.entries
    }

    pub fn final_level(&self) -> f64 {
        self.entries.last().map(|e| e.1).unwrap_or(0.0)
    }

    pub fn final_time(&self) -> f64 {
        self.pending_flat.unwrap_or_else(|| self.entries.last().map(|e| e.0).unwrap_or(0.0))
    }

    /// Inverse local time: the first time at which the interpolated local
    /// time reaches `level`.
    pub fn sigma(&self, level: f64) -> Result<f64> {
        let available = self.final_level();
        if level > available || level.is_nan() {
            return Err(Error::LocalTimeExhausted { level, available });
        }
        if level <= 0.0 {
            return Ok(0.0);
        }
        // first entry with L >= level
        let k = self.entries.partition_point(|e| e.1 < level);
        let (t1, l1) = self.entries[k];
        let (t0, l0) = self.entries[k - 1];
        if l1 == l0 {
            return Ok(t0);
        }
        Ok((t0 + (t1 - t0) * (level - l0) / (l1 - l0)).min(t1))
    }

    /// Interpolated local time at time `t` (clamped to the recorded range).
    pub fn level_at(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        let k = self.entries.partition_point(|e| e.0 < t);
        if k >= self.entries.len() {
            return self.final_level();
        }
        let (t1, l1) = self.entries[k];
        let (t0, l0) = self.entries[k - 1];
        l0 + (l1 - l0) * (t - t0) / (t1 - t0)
    }
}

/// Evaluate a timestamped series at `sigma(level)` for each grid level.
///
/// Positions are sampled paths, so the value returned is the first recorded
/// snapshot at or after `sigma(level)`; when `sigma(level)` lies past the last
/// snapshot the last one is used.
pub fn sample_on_local_clock<T: Clone>(series: &[(f64, T)], ledger: &LocalTimeLedger, grid: &[f64]) -> Result<Vec<T>> {
    if grid.is_empty() {
        return Ok(Vec::new());
    }
    if series.is_empty() {
        return Err(Error::EmptySample);
    }
    grid.iter()
        .map(|&level| {
            let s = ledger.sigma(level)?;
            let k = series.partition_point(|(t, _)| *t < s - 1e-12);
            Ok(series[k.min(series.len() - 1)].1.clone())
        })
        .collect()
}

/// Streaming version of [`sample_on_local_clock`] on an equispaced grid:
/// feed `(local time, value)` after every step; the first value observed at
/// or beyond each level is kept.
#[derive(Clone, Debug)]
pub struct LocalClockSampler<T> {
    spacing: f64,
    next_level: f64,
    pub samples: Vec<T>,
}

impl<T: Clone> LocalClockSampler<T> {
    pub fn new(spacing: f64) -> Self {
        assert!(spacing > 0.0);
        LocalClockSampler { spacing, next_level: 0.0, samples: Vec::new() }
    }

    pub fn observe(&mut self, level: f64, value: &T) {
        while level >= self.next_level {
            self.samples.push(value.clone());
            self.next_level += self.spacing;
        }
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn example() -> LocalTimeLedger {
        LocalTimeLedger::from_entries(vec![(0.0, 0.0), (1.0, 0.0), (2.0, 0.5)]).unwrap()
    }

    #[test]
    fn sigma_examples() {
        let l = example();
        assert_eq!(l.sigma(0.25).unwrap(), 1.5);
        assert_eq!(l.sigma(0.0).unwrap(), 0.0);
        assert_eq!(l.sigma(0.5).unwrap(), 2.0);
        assert!(matches!(l.sigma(0.6), Err(Error::LocalTimeExhausted { .. })));
    }

    #[test]
    fn flat_runs_resolve_to_left_endpoint() {
        let l = LocalTimeLedger::from_entries(vec![(0.0, 0.0), (1.0, 1.0), (3.0, 1.0), (4.0, 2.0)]).unwrap();
        assert_eq!(l.sigma(1.0).unwrap(), 1.0);
        assert_eq!(l.sigma(1.5).unwrap(), 3.5);
    }

    #[test]
    fn record_closes_flat_runs() {
        let mut l = LocalTimeLedger::new();
        l.record(0.5, 0.0);
        l.record(1.0, 0.0);
        l.record(1.5, 0.2);
        l.record(2.0, 0.3);
        l.record(2.5, 0.3);
        l.flush();
        assert_eq!(l.entries(), &[(0.0, 0.0), (1.0, 0.0), (1.5, 0.2), (2.0, 0.3), (2.5, 0.3)]);
        assert_eq!(l.sigma(0.1).unwrap(), 1.25);
    }

    #[test]
    fn rejects_bad_ledgers() {
        assert!(LocalTimeLedger::from_entries(vec![(0.0, 0.1)]).is_err());
        assert!(LocalTimeLedger::from_entries(vec![(0.0, 0.0), (0.0, 0.1)]).is_err());
        assert!(LocalTimeLedger::from_entries(vec![(0.0, 0.0), (1.0, 0.2), (2.0, 0.1)]).is_err());
    }

    #[test]
    fn local_clock_examples() {
        let l = example();
        let series: Vec<(f64, f64)> = (0..=20).map(|k| (k as f64 * 0.1, 7.0)).collect();
        let out = sample_on_local_clock(&series, &l, &[0.0, 0.1, 0.5]).unwrap();
        assert_eq!(out, vec![7.0; 3]);
        assert!(sample_on_local_clock(&series, &l, &[]).unwrap().is_empty());
    }

    #[test]
    fn linear_in_local_time_series_is_recovered() {
        // L grows by 0.1 per unit time and the position equals L.
        let stride = 0.01;
        let n = 10_000;
        let mut ledger = LocalTimeLedger::new();
        let mut series = vec![(0.0, 0.0)];
        for k in 1..=n {
            let t = k as f64 * stride;
            ledger.record(t, 0.1 * t);
            series.push((t, 0.1 * t));
        }
        let grid: Vec<f64> = (0..100).map(|k| k as f64 * 0.09).collect();
        let out = sample_on_local_clock(&series, &ledger, &grid).unwrap();
        for (level, x) in grid.iter().zip(out) {
            // within one snapshot stride of local time
            assert!((x - level).abs() <= 0.1 * stride + 1e-12, "{level} {x}");
        }
    }

    #[test]
    fn streaming_sampler_matches_definition() {
        let mut s = LocalClockSampler::new(0.5);
        for (l, v) in [(0.0, 0), (0.3, 1), (0.6, 2), (1.7, 3)] {
            s.observe(l, &v);
        }
        assert_eq!(s.samples, vec![0, 2, 3, 3]);
    }

    fn ledger_strategy() -> impl Strategy<Value = LocalTimeLedger> {
        prop::collection::vec((0.01..1.0f64, prop::bool::ANY, 0.0..1.0f64), 1..60).prop_map(|steps| {
            let mut l = LocalTimeLedger::new();
            let (mut t, mut lv) = (0.0, 0.0);
            for (dt, flat, dl) in steps {
                t += dt;
                if !flat {
                    lv += dl;
                }
                l.record(t, lv);
            }
            l.flush();
            l
        })
    }

    proptest! {
        #[test]
        fn sigma_is_a_left_inverse(l in ledger_strategy(), fracs in prop::collection::vec(0.0..=1.0f64, 1..20)) {
            let top = l.final_level();
            let mut levels: Vec<f64> = fracs.iter().map(|f| f * top).collect();
            levels.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let mut prev = 0.0;
            for lv in levels {
                let s = l.sigma(lv).unwrap();
                prop_assert!(s >= prev);
                prev = s;
                prop_assert!(l.level_at(s) >= lv - 1e-12);
                prop_assert!((l.level_at(s) - lv).abs() <= 1e-9 * (1.0 + lv));
            }
            for &(t, lt) in l.entries() {
                prop_assert!(l.sigma(lt).unwrap() <= t);
            }
        }
    }
}
