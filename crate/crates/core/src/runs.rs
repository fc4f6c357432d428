//! Long accelerated runs: ball positions on a local-time grid and long-run
//! samples of the ball centers.

use crate::clocks::LocalClockSampler;
use crate::contact::{advance, FarField, SimConfig, SystemState, Which};
use crate::error::Result;
use crate::excursions::ExcursionTracker;
use crate::rng::SimRng;

/// Which local time drives the sampling grid.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LocalClock {
    /// Local time on X only.
    X,
    /// Total local time on both balls.
    Total,
}

/// Lifted centers of X (then Y, if present) at local times
/// `0, spacing, 2 spacing, ...`, `n_points` of them.
pub fn local_clock_series<const D: usize>(
    init: &SystemState<D>,
    cfg: &SimConfig<D>,
    far: &FarField,
    clock: LocalClock,
    spacing: f64,
    n_points: usize,
    rng: &mut SimRng,
) -> Result<Vec<Vec<f64>>> {
    let mut s = *init;
    let mut sampler = LocalClockSampler::new(spacing);
    let coords = |s: &SystemState<D>| -> Vec<f64> {
        let mut v = s.x.lifted.coords.0.to_vec();
        if let Some(y) = s.y {
            v.extend_from_slice(&y.lifted.coords.0);
        }
        v
    };
    let level = |s: &SystemState<D>| match clock {
        LocalClock::X => s.lx(),
        LocalClock::Total => s.local_time(),
    };
    sampler.observe(level(&s), &coords(&s));
    while sampler.samples.len() < n_points {
        let before = level(&s);
        advance(&mut s, cfg, Some(far), rng)?;
        let after = level(&s);
        if after > before {
            sampler.observe(after, &coords(&s));
        }
    }
    sampler.samples.truncate(n_points);
    Ok(sampler.samples)
}

/// Long-run samples of the two ball centers.
#[derive(Clone, Debug, Default)]
pub struct StationarySamples {
    pub xs: Vec<Vec<f64>>,
    pub ys: Vec<Vec<f64>>,
    /// Ball each recorded excursion ended on, `true` for X.
    pub landed_on_x: Vec<bool>,
    pub local_time: f64,
}

/// Discard clock time `burn_in`, then record the centers every `spacing`
/// units of clock time, `n_samples` times.
pub fn stationary_samples<const D: usize>(
    init: &SystemState<D>,
    cfg: &SimConfig<D>,
    far: &FarField,
    burn_in: f64,
    spacing: f64,
    n_samples: usize,
    rng: &mut SimRng,
) -> Result<StationarySamples> {
    let mut s = *init;
    while s.t < burn_in {
        advance(&mut s, cfg, Some(far), rng)?;
    }
    let mut out = StationarySamples::default();
    let mut tracker = ExcursionTracker::for_step(cfg.dt, cfg.tol_overlap);
    let l0 = s.local_time();
    let mut next = s.t;
    while out.xs.len() < n_samples {
        if s.t >= next {
            out.xs.push(s.x.center().coords().0.to_vec());
            out.ys.push(s.y.map(|y| y.center().coords().0.to_vec()).unwrap_or_default());
            next += spacing;
        }
        advance(&mut s, cfg, Some(far), rng)?;
        tracker.observe(&s, &cfg.space);
    }
    out.landed_on_x = tracker.records.iter().map(|r| r.landed == Which::X).collect();
    out.local_time = s.local_time() - l0;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::contact::Mode;
    use crate::geometry::Space;
    use crate::rng::replica_rng;

    #[test]
    fn local_clock_series_shape() {
        let sp = Space::<2>::euclidean();
        let init = SystemState::new(&sp, sp.point([1.5, 0.5]), sp.point([0.5, 0.5]), None).unwrap();
        let far = FarField::new(0.1).with_return(4.0);
        for (mode, moves) in [(Mode::Pushing, true), (Mode::Frozen, false)] {
            let cfg = SimConfig::new(sp, 1e-3, 0.0, 3, mode).unwrap();
            let mut rng = replica_rng(3, 0);
            let s = local_clock_series(&init, &cfg, &far, LocalClock::X, 0.5, 40, &mut rng).unwrap();
            assert_eq!(s.len(), 40);
            assert_eq!(s[0], vec![0.5, 0.5]);
            assert_eq!(s.iter().any(|p| p != &s[0]), moves);
        }
    }

    #[test]
    fn stationary_samples_on_the_torus() {
        let r = 8.0;
        let sp = Space::<2>::torus(r).unwrap();
        let init =
            SystemState::new(&sp, sp.point([3.0, 2.0]), sp.point([2.0, 2.0]), Some(sp.point([6.0, 6.0]))).unwrap();
        let cfg = SimConfig::new(sp, 1e-3, 0.0, 4, Mode::Pushing).unwrap();
        let mut rng = replica_rng(4, 0);
        let out = stationary_samples(&init, &cfg, &FarField::new(0.1), 10.0, 5.0, 30, &mut rng).unwrap();
        assert_eq!(out.xs.len(), 30);
        assert_eq!(out.ys.len(), 30);
        for p in out.xs.iter().chain(&out.ys) {
            assert!(p.iter().all(|c| (0.0..r).contains(c)));
        }
        for (x, y) in out.xs.iter().zip(&out.ys) {
            let d = sp.distance(&sp.point([x[0], x[1]]), &sp.point([y[0], y[1]]));
            assert!(d >= 2.0 - 1e-9);
        }
        assert!(out.local_time > 0.0);
        assert!(!out.landed_on_x.is_empty());
    }
}
