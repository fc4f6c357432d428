//! Excursions of the driver away from fixed balls and estimators of
//! excursion-law functionals.

use serde::Serialize;

use crate::contact::{advance, Advance, FarField, Mode, SimConfig, SystemState, Which};
use crate::error::{Error, Result};
use crate::geometry::{sphere_area, Point, Space, Vector};
use crate::harmonic::{wos_hit, Obstacles, WosConfig, WosOutcome};
use crate::rng::{run_replicas, SimRng};
use crate::sampling::{exterior_hit, uniform_sphere};
use crate::stats::{mean, variance, EstimatorResult};

/// Rate of excursions from the unit sphere that reach radius `b`, per unit
/// local time. `b = f64::INFINITY` is allowed for `d >= 3`.
pub fn lambda1(d: usize, b: f64) -> Result<f64> {
    if d < 2 || !(b > 1.0) {
        return Err(Error::InvalidConfig(format!("need d >= 2 and b > 1, got d={d}, b={b}")));
    }
    if d == 2 {
        if b.is_infinite() {
            return Err(Error::RecurrentCase);
        }
        return Ok(1.0 / b.ln());
    }
    let k = d as f64 - 2.0;
    if b.is_infinite() {
        return Ok(k);
    }
    Ok(k / (1.0 - b.powf(-k)))
}

/// Probability of reaching radius `b` before radius 1 from radius `1 + delta`.
pub fn crossing_probability(d: usize, b: f64, delta: f64) -> f64 {
    if d == 2 {
        (1.0 + delta).ln() / b.ln()
    } else {
        let k = 2.0 - d as f64;
        (1.0 - (1.0 + delta).powf(k)) / (1.0 - b.powf(k))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Functional {
    Cross { b: f64 },
    Lifetime,
    Lambda2 { b: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExcursionLawEstimate {
    pub functional: Functional,
    pub value: f64,
    pub stderr: f64,
    pub delta_used: Option<f64>,
    /// Raw per-level estimates feeding an extrapolation.
    pub levels: Vec<EstimatorResult>,
}

impl ExcursionLawEstimate {
    pub fn as_result(&self) -> EstimatorResult {
        let n = self.levels.iter().map(|l| l.n).sum::<usize>().max(1);
        EstimatorResult::new(format!("{:?}", self.functional), self.value, self.stderr, n)
    }
}

/// Walk-on-spheres estimate of `P^{1+delta}(reach b before 1) / delta` for
/// each `delta`, extrapolated linearly to `delta = 0` from the two smallest.
pub fn crossing_rate_estimate<const D: usize>(
    b: f64,
    deltas: &[f64],
    n_paths: usize,
    eps: f64,
    seed: u64,
) -> Result<ExcursionLawEstimate> {
    if deltas.len() < 2 || deltas.iter().any(|&d| !(d > 0.0 && d < 0.1)) {
        return Err(Error::InvalidConfig("need at least two steps in (0, 0.1)".into()));
    }
    let space = Space::<D>::euclidean();
    let o = space.point([0.0; D]);
    let obs = Obstacles::unit_balls(space, vec![o])?;
    let cfg = WosConfig::new(eps).with_outer(o, b);
    let mut levels = Vec::with_capacity(deltas.len());
    for (i, &delta) in deltas.iter().enumerate() {
        let mut start = [0.0; D];
        start[0] = 1.0 + delta;
        let start = space.point(start);
        let hits = run_replicas(n_paths, seed.wrapping_add(i as u64), |_, rng| wos_hit(start, &obs, &cfg, rng))
            .into_iter()
            .collect::<Result<Vec<_>>>()?;
        let crossed = hits.iter().filter(|h| matches!(h, WosOutcome::Outer)).count() as f64;
        let p = crossed / n_paths as f64;
        let se = (p * (1.0 - p) / n_paths as f64).sqrt();
        levels.push(EstimatorResult::new(format!("cross(delta={delta})"), p / delta, se / delta, n_paths));
    }
    let mut order: Vec<usize> = (0..deltas.len()).collect();
    order.sort_by(|&i, &j| deltas[i].total_cmp(&deltas[j]));
    let (i2, i1) = (order[0], order[1]);
    let (h1, h2) = (deltas[i1], deltas[i2]);
    let w2 = h1 / (h1 - h2);
    let w1 = -h2 / (h1 - h2);
    let ex = EstimatorResult::combine("cross", &[(w1, &levels[i1]), (w2, &levels[i2])]);
    Ok(ExcursionLawEstimate {
        functional: Functional::Cross { b },
        value: ex.value,
        stderr: ex.stderr,
        delta_used: Some(h2),
        levels,
    })
}

fn single_ball_state<const D: usize>(space: &Space<D>, v0: Vector<D>) -> Result<SystemState<D>> {
    SystemState::new(space, space.point(v0.0), space.point([0.0; D]), None)
}

/// Frozen single-ball runs in R^d from a uniform point on the unit sphere
/// until the first exit from radius `b`: the first component of the vector
/// local time at that moment, squared.
pub fn lambda2_estimate<const D: usize>(
    b: f64,
    n_paths: usize,
    cfg: &SimConfig<D>,
    band: f64,
) -> Result<ExcursionLawEstimate> {
    if !(b >= 2.0) || cfg.space.edge_length().is_some() || cfg.mode != Mode::Frozen {
        return Err(Error::InvalidConfig("frozen single-ball run in R^d with b >= 2".into()));
    }
    let far = FarField::new(band).with_outer(b);
    let sq = run_replicas(n_paths, cfg.seed, |_, rng| -> Result<f64> {
        let mut s = single_ball_state(&cfg.space, uniform_sphere(rng))?;
        loop {
            if let Advance::Exited = advance(&mut s, cfg, Some(&far), rng)? {
                return Ok(s.x.vector_local_time[0].powi(2));
            }
        }
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let r = EstimatorResult::from_samples("lambda2", &sq)?;
    Ok(ExcursionLawEstimate {
        functional: Functional::Lambda2 { b },
        value: r.value,
        stderr: r.stderr,
        delta_used: None,
        levels: vec![r],
    })
}

/// Local time accumulated on the unit sphere between leaving it and first
/// reaching radius `b`, for `n_cycles` consecutive cycles of a frozen
/// single-ball run in R^d. After each crossing the driver returns to the
/// sphere with the exact exterior hitting law, conditioned on returning.
pub fn shell_crossing_law<const D: usize>(
    b: f64,
    n_cycles: usize,
    cfg: &SimConfig<D>,
    band: f64,
    replicas: usize,
) -> Result<Vec<f64>> {
    if !(b > 1.0 + 2.0 * band) || cfg.space.edge_length().is_some() || cfg.mode != Mode::Frozen {
        return Err(Error::InvalidConfig("frozen single-ball run in R^d with b > 1 + 2 band".into()));
    }
    let far = FarField::new(band).with_outer(b);
    let sizes = crate::rng::batch_sizes(n_cycles, replicas.max(1));
    let chunks = run_replicas(sizes.len(), cfg.seed, |i, rng| -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(sizes[i]);
        let mut v: Vector<D> = uniform_sphere(rng);
        for _ in 0..sizes[i] {
            let mut s = single_ball_state(&cfg.space, v)?;
            loop {
                if let Advance::Exited = advance(&mut s, cfg, Some(&far), rng)? {
                    break;
                }
            }
            out.push(s.local_time());
            let at_b = s.driver.origin_ref.to_vector();
            v = return_to_sphere(&at_b, rng);
        }
        Ok(out)
    });
    let mut all = Vec::with_capacity(n_cycles);
    for c in chunks {
        all.extend(c?);
    }
    Ok(all)
}

fn return_to_sphere<const D: usize>(x: &Vector<D>, rng: &mut SimRng) -> Vector<D> {
    loop {
        if let Some(z) = exterior_hit(x, rng) {
            return z;
        }
    }
}

/// One excursion of the driver away from the balls.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ExcursionRecord<const D: usize> {
    #[serde(serialize_with = "ser_point")]
    pub start: Point<D>,
    #[serde(serialize_with = "ser_point")]
    pub end: Point<D>,
    pub t_start: f64,
    pub zeta: f64,
    /// Largest distance from the center of the ball it started from.
    pub max_radius: f64,
    pub which_ball: Which,
    /// Ball the excursion ended on.
    pub landed: Which,
}

fn ser_point<const D: usize, S: serde::Serializer>(p: &Point<D>, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.collect_seq(p.coords().as_slice().iter())
}

#[derive(Clone, Copy, Debug)]
struct OpenExcursion<const D: usize> {
    start: Point<D>,
    t_start: f64,
    from: Which,
    max_gap: f64,
    max_radius: f64,
}

/// Streaming excursion decomposition. A boundary time is a step after
/// which the driver is within `tol` of a sphere; an excursion is the
/// stretch between consecutive boundary times, kept when the driver got
/// farther than `threshold` from the balls in between.
#[derive(Clone, Debug)]
pub struct ExcursionTracker<const D: usize> {
    pub threshold: f64,
    pub tol: f64,
    open: Option<OpenExcursion<D>>,
    pub records: Vec<ExcursionRecord<D>>,
    /// Time spent between boundary times that did not qualify.
    pub short_time: f64,
}

impl<const D: usize> ExcursionTracker<D> {
    /// Threshold `dt^{1/4}`.
    pub fn for_step(dt: f64, tol: f64) -> Self {
        Self::new(dt.powf(0.25), tol)
    }

    pub fn new(threshold: f64, tol: f64) -> Self {
        ExcursionTracker { threshold, tol, open: None, records: Vec::new(), short_time: 0.0 }
    }

    pub fn observe(&mut self, s: &SystemState<D>, space: &Space<D>) {
        let (gx, gy) = s.gaps(space);
        let (near, gap) = match gy {
            Some(g) if g < gx => (Which::Y, g),
            _ => (Which::X, gx),
        };
        let b = s.b();
        if gap <= self.tol {
            if let Some(o) = self.open.take() {
                if o.max_gap > self.threshold {
                    self.records.push(ExcursionRecord {
                        start: o.start,
                        end: b,
                        t_start: o.t_start,
                        zeta: s.t - o.t_start,
                        max_radius: o.max_radius,
                        which_ball: o.from,
                        landed: near,
                    });
                } else {
                    self.short_time += s.t - o.t_start;
                }
            }
            self.open = Some(OpenExcursion { start: b, t_start: s.t, from: near, max_gap: 0.0, max_radius: 1.0 });
        } else if let Some(o) = self.open.as_mut() {
            o.max_gap = o.max_gap.max(gap);
            if let Some(ball) = s.ball(o.from) {
                o.max_radius = o.max_radius.max(space.distance(&b, &ball.center()));
            }
        }
    }
}

/// Summary of a frozen torus run used for lifetime estimates.
#[derive(Clone, Debug)]
pub struct FrozenRunSummary<const D: usize> {
    pub t: f64,
    pub local_time: f64,
    pub records: Vec<ExcursionRecord<D>>,
}

/// Run a frozen configuration with far-field acceleration for clock time
/// `t_end`, tracking excursions.
pub fn frozen_run<const D: usize>(
    init: &SystemState<D>,
    cfg: &SimConfig<D>,
    far: &FarField,
    t_end: f64,
    rng: &mut SimRng,
) -> Result<FrozenRunSummary<D>> {
    let mut s = *init;
    let mut tracker = ExcursionTracker::for_step(cfg.dt, 1e-9);
    while s.t < t_end {
        advance(&mut s, cfg, Some(far), rng)?;
        tracker.observe(&s, &cfg.space);
    }
    Ok(FrozenRunSummary { t: s.t, local_time: s.local_time(), records: tracker.records })
}

/// `t / L_t` pooled over runs, with the mean excursion lifetime; the
/// standard error comes from the spread of per-run ratios.
pub fn lifetime_per_local_time<const D: usize>(runs: &[FrozenRunSummary<D>]) -> Result<ExcursionLawEstimate> {
    let crossings: usize = runs.iter().map(|r| r.records.len()).sum();
    if crossings < 50 {
        return Err(Error::Underpowered(format!("only {crossings} excursions recorded")));
    }
    let t: f64 = runs.iter().map(|r| r.t).sum();
    let l: f64 = runs.iter().map(|r| r.local_time).sum();
    let value = t / l;
    let stderr = if runs.len() > 1 {
        let per: Vec<f64> = runs.iter().map(|r| r.t / r.local_time.max(f64::MIN_POSITIVE)).collect();
        (variance(&per) / runs.len() as f64).sqrt()
    } else {
        0.0
    };
    let zetas: Vec<f64> = runs.iter().flat_map(|r| r.records.iter().map(|e| e.zeta)).collect();
    let lifetime =
        EstimatorResult::new("mean_zeta", mean(&zetas), (variance(&zetas) / zetas.len() as f64).sqrt(), zetas.len());
    Ok(ExcursionLawEstimate {
        functional: Functional::Lifetime,
        value,
        stderr,
        delta_used: None,
        levels: vec![EstimatorResult::new("t_per_local_time", value, stderr, runs.len()), lifetime],
    })
}

/// `|D| / s_d` for two unit balls removed from the torus of edge `r`.
pub fn two_ball_lifetime(d: usize, r: f64) -> f64 {
    let vol = r.powi(d as i32) - 2.0 * crate::geometry::ball_volume(d);
    vol / sphere_area(d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::replica_rng;

    #[test]
    fn lambda1_values() {
        assert!((lambda1(2, std::f64::consts::E.powi(2)).unwrap() - 0.5).abs() < 1e-12);
        assert!((lambda1(3, 2.0).unwrap() - 2.0).abs() < 1e-12);
        assert_eq!(lambda1(4, f64::INFINITY).unwrap(), 2.0);
        assert_eq!(lambda1(2, f64::INFINITY).unwrap_err(), Error::RecurrentCase);
        let l: Vec<f64> = [2.0, 4.0, 8.0].iter().map(|&b| lambda1(3, b).unwrap()).collect();
        assert!(l[0] > l[1] && l[1] > l[2]);
    }

    #[test]
    fn crossing_probability_scales_to_lambda1() {
        for (d, b) in [(2, 3.0), (3, 2.0), (5, 4.0)] {
            let small = crossing_probability(d, b, 1e-7) / 1e-7;
            assert!((small / lambda1(d, b).unwrap() - 1.0).abs() < 1e-5);
            // the scaled probability increases toward the limit as delta decreases
            assert!(crossing_probability(d, b, 0.05) / 0.05 < crossing_probability(d, b, 0.025) / 0.025);
        }
    }

    #[test]
    fn crossing_rate_small_run() {
        let est = crossing_rate_estimate::<3>(2.0, &[0.08, 0.04], 40_000, 1e-6, 1).unwrap();
        let exact = [0.08, 0.04].map(|h| crossing_probability(3, 2.0, h) / h);
        for (lv, ex) in est.levels.iter().zip(exact) {
            assert!(lv.within(ex, 3.5), "{lv:?} {ex}");
        }
        assert!((est.value - 2.0).abs() < 4.0 * est.stderr + 0.01, "{est:?}");
    }

    #[test]
    fn tracker_records_a_synthetic_excursion() {
        let sp = Space::<2>::euclidean();
        let mut s = SystemState::new(&sp, sp.point([1.0, 0.0]), sp.point([0.0, 0.0]), None).unwrap();
        let mut tr = ExcursionTracker::new(0.5, 1e-9);
        let path = [1.0, 1.2, 2.0, 3.0, 1.4, 1.0, 1.1, 1.0];
        for (k, r) in path.iter().enumerate() {
            s.t = k as f64;
            s.driver = crate::geometry::UnfoldedPoint::at(sp.point([*r, 0.0]));
            tr.observe(&s, &sp);
        }
        assert_eq!(tr.records.len(), 1);
        let e = tr.records[0];
        assert_eq!((e.t_start, e.zeta, e.max_radius), (0.0, 5.0, 3.0));
        assert_eq!(e.which_ball, Which::X);
        // the short second excursion is not a record
        assert_eq!(tr.short_time, 2.0);
    }

    #[test]
    fn shell_law_mean_coarse() {
        // coarse step: the mean is already close to 1/lambda1 = 0.5
        let cfg = SimConfig::new(Space::<3>::euclidean(), 1e-3, 0.0, 3, Mode::Frozen).unwrap();
        let s = shell_crossing_law(2.0, 2000, &cfg, 0.1, 8).unwrap();
        let m = mean(&s);
        assert!((m - 0.5).abs() < 0.06, "{m}");
    }

    #[test]
    fn frozen_torus_accumulates_excursions() {
        let sp = Space::<2>::torus(10.0).unwrap();
        let cfg = SimConfig::new(sp, 1e-3, 0.0, 4, Mode::Frozen).unwrap();
        let init =
            SystemState::new(&sp, sp.point([5.0, 2.5]), sp.point([2.5, 2.5]), Some(sp.point([7.5, 7.5]))).unwrap();
        let mut rng = replica_rng(4, 0);
        let run = frozen_run(&init, &cfg, &FarField::new(0.1), 2000.0, &mut rng).unwrap();
        assert!(run.records.len() > 50);
        assert!(run.records.iter().all(|e| e.zeta > 0.0 && e.max_radius >= 1.0));
        let total: f64 = run.records.iter().map(|e| e.zeta).sum();
        assert!(total <= run.t);
        let est = lifetime_per_local_time(&[run]).unwrap();
        assert!(est.value > 0.0);
        assert!(lifetime_per_local_time::<2>(&[]).is_err());
    }

    #[test]
    fn lifetime_reference_values() {
        assert!(
            (two_ball_lifetime(2, 10.0) - (100.0 - 2.0 * std::f64::consts::PI) / (2.0 * std::f64::consts::PI)).abs()
                < 1e-12
        );
    }
}
