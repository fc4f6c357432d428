//! Walk-on-spheres sampling of harmonic measure for the complement of unit
//! balls, on a torus or in R^d.

use std::f64::consts::PI;

use serde::Serialize;
use statrs::function::beta::beta_reg;

use crate::error::{Error, Result};
use crate::geometry::{Point, Space, Vector};
use crate::rng::{run_replicas, SimRng};
use crate::sampling::uniform_sphere;
use crate::stats::EstimatorResult;

/// Closed balls removed from the space.
#[derive(Clone, Debug, PartialEq)]
pub struct Obstacles<const D: usize> {
    pub centers: Vec<Point<D>>,
    pub radii: Vec<f64>,
    pub space: Space<D>,
}

impl<const D: usize> Obstacles<D> {
    pub fn new(space: Space<D>, centers: Vec<Point<D>>, radii: Vec<f64>) -> Result<Self> {
        if centers.len() != radii.len() || centers.is_empty() {
            return Err(Error::InvalidConfig("one radius per obstacle center".into()));
        }
        for i in 0..centers.len() {
            for j in i + 1..centers.len() {
                if space.distance(&centers[i], &centers[j]) < radii[i] + radii[j] {
                    return Err(Error::Geometry(format!("obstacles {i} and {j} overlap")));
                }
            }
        }
        Ok(Obstacles { centers, radii, space })
    }

    pub fn unit_balls(space: Space<D>, centers: Vec<Point<D>>) -> Result<Self> {
        let n = centers.len();
        Self::new(space, centers, vec![1.0; n])
    }

    /// Nearest obstacle and the distance to its surface.
    pub fn nearest(&self, p: &Point<D>) -> (usize, f64) {
        self.centers
            .iter()
            .zip(&self.radii)
            .map(|(c, r)| self.space.distance(p, c) - r)
            .enumerate()
            .fold((0, f64::INFINITY), |best, (i, g)| if g < best.1 { (i, g) } else { best })
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WosConfig<const D: usize> {
    pub eps: f64,
    pub max_jumps: usize,
    /// Absorbing outer sphere; required in R^d.
    pub outer: Option<(Point<D>, f64)>,
}

impl<const D: usize> WosConfig<D> {
    pub fn new(eps: f64) -> Self {
        WosConfig { eps, max_jumps: 1_000_000, outer: None }
    }

    pub fn with_outer(mut self, center: Point<D>, radius: f64) -> Self {
        self.outer = Some((center, radius));
        self
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum WosOutcome<const D: usize> {
    /// Absorbed at obstacle `obstacle`; `point` is the radial projection
    /// onto its surface.
    Hit { obstacle: usize, point: Point<D> },
    /// Absorbed at the outer sphere.
    Outer,
}

/// Walk on spheres from `start` until within `eps` of an obstacle or of the
/// outer sphere. Jump radii are capped at `r/4` on a torus.
pub fn wos_hit<const D: usize>(
    start: Point<D>,
    obs: &Obstacles<D>,
    cfg: &WosConfig<D>,
    rng: &mut SimRng,
) -> Result<WosOutcome<D>> {
    let space = &obs.space;
    if space.edge_length().is_none() && cfg.outer.is_none() {
        return Err(Error::InvalidConfig("walk on spheres in R^d needs an outer sphere".into()));
    }
    let (_, g0) = obs.nearest(&start);
    if g0 <= cfg.eps {
        return Err(Error::Geometry(format!("start lies within {} of an obstacle", cfg.eps)));
    }
    let cap = space.edge_length().map_or(f64::INFINITY, |r| 0.25 * r);
    let mut p = start;
    for _ in 0..cfg.max_jumps {
        let (i, gap) = obs.nearest(&p);
        if gap <= cfg.eps {
            let n = space.outward_normal(&obs.centers[i], &p)?;
            let point = space.translate(obs.centers[i], n * obs.radii[i]);
            return Ok(WosOutcome::Hit { obstacle: i, point });
        }
        let mut rho = gap.min(cap);
        if let Some((c, radius)) = cfg.outer {
            let og = radius - space.distance(&c, &p);
            if og <= cfg.eps {
                return Ok(WosOutcome::Outer);
            }
            rho = rho.min(og);
        }
        p = space.translate(p, uniform_sphere::<D, _>(rng) * rho);
    }
    Err(Error::WosStalled { jumps: cfg.max_jumps })
}

/// Hit counts per obstacle and cosine histograms around each center.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HitDistributionEstimate {
    pub counts: Vec<u64>,
    pub escaped: u64,
    /// `histograms[i][k]` counts hits on obstacle `i` whose cosine to the
    /// reference direction falls in bin `k` of `[-1, 1]`.
    pub histograms: Vec<Vec<u64>>,
    pub n: usize,
}

impl HitDistributionEstimate {
    pub fn bin_edges(&self) -> Vec<(f64, f64)> {
        let k = self.histograms.first().map_or(0, Vec::len);
        (0..k).map(|j| (-1.0 + 2.0 * j as f64 / k as f64, -1.0 + 2.0 * (j + 1) as f64 / k as f64)).collect()
    }
}

/// Run `n` walks from `start`; hits on obstacle `i` are binned by the
/// cosine between `point - center_i` and `axes[i]`.
pub fn hit_distribution<const D: usize>(
    start: Point<D>,
    obs: &Obstacles<D>,
    cfg: &WosConfig<D>,
    axes: &[Vector<D>],
    bins: usize,
    n: usize,
    seed: u64,
) -> Result<HitDistributionEstimate> {
    let outcomes = run_replicas(n, seed, |_, rng| wos_hit(start, obs, cfg, rng));
    let k = obs.centers.len();
    let mut est = HitDistributionEstimate { counts: vec![0; k], escaped: 0, histograms: vec![vec![0; bins]; k], n };
    for o in outcomes {
        match o? {
            WosOutcome::Hit { obstacle, point } => {
                est.counts[obstacle] += 1;
                let v = obs.space.displacement(&obs.centers[obstacle], &point);
                let c = v.dot(&axes[obstacle]) / (v.norm() * axes[obstacle].norm());
                let b = (((c + 1.0) / 2.0 * bins as f64) as usize).min(bins - 1);
                est.histograms[obstacle][b] += 1;
            }
            WosOutcome::Outer => est.escaped += 1,
        }
    }
    Ok(est)
}

fn check_pair<const D: usize>(z: &Point<D>, x1: &Point<D>, y1: &Point<D>, b: f64, space: &Space<D>) -> Result<()> {
    let r = space.edge_length().ok_or(Error::InfiniteSpace)?;
    if space.distance(x1, y1) <= 2.0 * b {
        return Err(Error::Geometry(format!("centers closer than 2b = {}", 2.0 * b)));
    }
    if r <= 8.0 * b {
        return Err(Error::Geometry(format!("torus edge {r} does not exceed 8b = {}", 8.0 * b)));
    }
    let on = |c: &Point<D>| (space.distance(z, c) - b).abs() < 1e-9 * b;
    if !(on(x1) || on(y1)) {
        return Err(Error::Geometry("start must lie on a sphere of radius b around a center".into()));
    }
    Ok(())
}

/// Ratio of the harmonic measures of the two unit spheres seen from `z`,
/// with a delta-method standard error from the multinomial counts.
#[allow(clippy::too_many_arguments)]
pub fn hitting_ratio<const D: usize>(
    z: Point<D>,
    x1: Point<D>,
    y1: Point<D>,
    b: f64,
    space: Space<D>,
    n: usize,
    eps: f64,
    seed: u64,
) -> Result<EstimatorResult> {
    check_pair(&z, &x1, &y1, b, &space)?;
    let obs = Obstacles::unit_balls(space, vec![x1, y1])?;
    let axes = [Vector::axis(0); 2];
    let est = hit_distribution(z, &obs, &WosConfig::new(eps), &axes, 1, n, seed)?;
    let (nx, ny) = (est.counts[0] as f64, est.counts[1] as f64);
    if nx == 0.0 || ny == 0.0 {
        return Err(Error::Underpowered("one obstacle was never hit".into()));
    }
    let ratio = nx / ny;
    // var(log(nx/ny)) = 1/nx + 1/ny under multinomial sampling with two cells
    let stderr = ratio * (1.0 / nx + 1.0 / ny).sqrt();
    Ok(EstimatorResult::new(format!("hitting_ratio(b={b})"), ratio, stderr, n))
}

/// Probability that the cosine of a uniform point on the unit sphere of
/// R^d lies in each of `bins` equal-width bins of `[-1, 1]`.
pub fn uniform_cosine_bins(d: usize, bins: usize) -> Vec<f64> {
    let a = (d as f64 - 1.0) / 2.0;
    let cdf = |t: f64| {
        if d == 2 {
            // cosine of a uniform angle: arcsine law
            1.0 - t.clamp(-1.0, 1.0).acos() / PI
        } else {
            beta_reg(a, a, ((1.0 + t) / 2.0).clamp(0.0, 1.0))
        }
    };
    (0..bins)
        .map(|k| {
            let lo = -1.0 + 2.0 * k as f64 / bins as f64;
            let hi = -1.0 + 2.0 * (k + 1) as f64 / bins as f64;
            cdf(hi) - cdf(lo)
        })
        .collect()
}

/// Total variation distance of a histogram to reference bin probabilities.
pub fn total_variation(counts: &[u64], probs: &[f64]) -> f64 {
    let n = counts.iter().sum::<u64>() as f64;
    0.5 * counts.iter().zip(probs).map(|(&c, p)| (c as f64 / n - p).abs()).sum::<f64>()
}

#[derive(Clone, Debug, Serialize)]
pub struct UniformityEstimate {
    /// Plug-in total variation of the binned hit law to the uniform binning.
    pub tv_raw: f64,
    /// Plug-in value minus its mean under exact uniformity at the same
    /// sample size, with a parametric-bootstrap standard error.
    pub tv: EstimatorResult,
    pub histogram: Vec<u64>,
    pub hit_probability: f64,
}

fn multinomial(probs: &[f64], n: u64, rng: &mut SimRng) -> Vec<u64> {
    use rand_distr::{Binomial, Distribution};
    let mut left = n;
    let mut mass = 1.0;
    let mut out = Vec::with_capacity(probs.len());
    for (i, &p) in probs.iter().enumerate() {
        if i + 1 == probs.len() || left == 0 {
            out.push(left);
            left = 0;
            continue;
        }
        let q = (p / mass).clamp(0.0, 1.0);
        let k = Binomial::new(left, q).expect("valid binomial").sample(rng);
        out.push(k);
        left -= k;
        mass -= p;
    }
    out
}

/// Noise floor and bootstrap spread of the plug-in total variation.
fn tv_noise(probs: &[f64], observed: &[f64], n: u64, reps: usize, seed: u64) -> (f64, f64) {
    let null = run_replicas(reps, seed, |_, rng| total_variation(&multinomial(probs, n, rng), probs));
    let boot = run_replicas(reps, seed ^ 0x5eed, |_, rng| total_variation(&multinomial(observed, n, rng), probs));
    (crate::stats::mean(&null), crate::stats::variance(&boot).sqrt())
}

/// Deviation from uniformity of the hit law on the unit sphere around
/// `x1`, seen from `z` on the sphere of radius `b`, binned by the cosine to
/// the direction of `z`.
#[allow(clippy::too_many_arguments)]
pub fn exit_uniformity<const D: usize>(
    z: Point<D>,
    x1: Point<D>,
    y1: Point<D>,
    b: f64,
    space: Space<D>,
    n: usize,
    bins: usize,
    eps: f64,
    seed: u64,
) -> Result<UniformityEstimate> {
    check_pair(&z, &x1, &y1, b, &space)?;
    if bins < 20 {
        return Err(Error::InvalidConfig("at least 20 cosine bins".into()));
    }
    let obs = Obstacles::unit_balls(space, vec![x1, y1])?;
    let axis = space.displacement(&x1, &z);
    let est = hit_distribution(z, &obs, &WosConfig::new(eps), &[axis, axis], bins, n, seed)?;
    let hist = est.histograms[0].clone();
    let hits = est.counts[0];
    let probs = uniform_cosine_bins(D, bins);
    if probs.iter().any(|p| p * (hits as f64) < 20.0) {
        return Err(Error::Underpowered(format!("{hits} hits leave fewer than 20 expected per bin")));
    }
    let tv_raw = total_variation(&hist, &probs);
    let observed: Vec<f64> = hist.iter().map(|&c| c as f64 / hits as f64).collect();
    let (floor, spread) = tv_noise(&probs, &observed, hits, 400, seed.wrapping_add(1));
    Ok(UniformityEstimate {
        tv_raw,
        tv: EstimatorResult::new(format!("exit_tv(b={b})"), tv_raw - floor, spread, hits as usize),
        histogram: hist,
        hit_probability: hits as f64 / n as f64,
    })
}

/// Density of the hitting law of the unit circle from `(e^{-t}, 0)` at angle
/// `theta`, relative to the uniform law.
pub fn poisson_kernel_2d(theta: f64, t: f64) -> f64 {
    let rho = (-t).exp();
    (1.0 - rho * rho) / (1.0 + rho * rho - 2.0 * rho * theta.cos())
}

/// Monte Carlo value of `E (z . e1)^2` for `z` uniform on the unit sphere.
pub fn sphere_moment_check<const D: usize>(n: usize, seed: u64) -> Result<EstimatorResult> {
    let chunks = 64;
    let per = run_replicas(chunks, seed, |i, rng| {
        let m = crate::rng::batch_sizes(n, chunks)[i];
        let s: f64 = (0..m).map(|_| uniform_sphere::<D, _>(rng)[0].powi(2)).sum();
        s / m as f64
    });
    let value = crate::stats::mean(&per);
    let stderr = (crate::stats::variance(&per) / chunks as f64).sqrt();
    Ok(EstimatorResult::new(format!("sphere_moment(d={D})"), value, stderr, n))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::replica_rng;
    use crate::stats::chi_square_homogeneity;

    #[test]
    fn symmetric_start_splits_evenly() {
        let sp = Space::<2>::torus(12.0).unwrap();
        let obs = Obstacles::unit_balls(sp, vec![sp.point([3.0, 6.0]), sp.point([9.0, 6.0])]).unwrap();
        let axes = [Vector::axis(0); 2];
        let est = hit_distribution(sp.point([6.0, 2.0]), &obs, &WosConfig::new(1e-4), &axes, 1, 20_000, 3).unwrap();
        let p = est.counts[0] as f64 / 20_000.0;
        assert!((p - 0.5).abs() < 3.0 * (0.25f64 / 20_000.0).sqrt(), "{p}");
        assert_eq!(est.counts.iter().sum::<u64>(), 20_000);
    }

    #[test]
    fn single_obstacle_with_outer_sphere() {
        let sp = Space::<3>::euclidean();
        let o = sp.point([0.0; 3]);
        let obs = Obstacles::unit_balls(sp, vec![o]).unwrap();
        let cfg = WosConfig::new(1e-5).with_outer(o, 64.0);
        let n = 40_000;
        let est = hit_distribution(sp.point([2.0, 0.0, 0.0]), &obs, &cfg, &[Vector::axis(0)], 1, n, 4).unwrap();
        let p = est.counts[0] as f64 / n as f64;
        let exact = (0.5 - 1.0 / 64.0) / (1.0 - 1.0 / 64.0);
        assert!((p - exact).abs() < 3.0 * (exact * (1.0 - exact) / n as f64).sqrt() + 1e-4, "{p}");
        let mut rng = replica_rng(0, 0);
        assert!(wos_hit(sp.point([2.0, 0.0, 0.0]), &obs, &WosConfig::new(1e-5), &mut rng).is_err());
    }

    #[test]
    fn radial_crossing_probability() {
        for (b, delta) in [(2.0, 0.05), (8.0, 0.05)] {
            let sp = Space::<4>::euclidean();
            let o = sp.point([0.0; 4]);
            let obs = Obstacles::unit_balls(sp, vec![o]).unwrap();
            let cfg = WosConfig::new(1e-6).with_outer(o, b);
            let n = 20_000;
            let est = hit_distribution(sp.point([1.0 + delta, 0.0, 0.0, 0.0]), &obs, &cfg, &[Vector::axis(0)], 1, n, 5)
                .unwrap();
            let p = est.escaped as f64 / n as f64;
            let exact = (1.0 - (1.0 + delta).powi(-2)) / (1.0 - b.powi(-2));
            assert!((p - exact).abs() < 3.0 * (exact * (1.0 - exact) / n as f64).sqrt(), "b={b} {p} {exact}");
        }
    }

    #[test]
    fn histogram_stable_under_eps_refinement() {
        let sp = Space::<3>::torus(9.0).unwrap();
        let obs = Obstacles::unit_balls(sp, vec![sp.point([2.0, 2.0, 2.0]), sp.point([6.5, 2.0, 2.0])]).unwrap();
        let axes = [Vector::axis(0); 2];
        let start = sp.point([4.0, 4.0, 2.0]);
        let a = hit_distribution(start, &obs, &WosConfig::new(1e-3), &axes, 10, 20_000, 6).unwrap();
        let b = hit_distribution(start, &obs, &WosConfig::new(1e-4), &axes, 10, 20_000, 7).unwrap();
        assert!(chi_square_homogeneity(&a.histograms[0], &b.histograms[0]).unwrap().p_value > 0.01);
    }

    #[test]
    fn uniform_bins_sum_to_one() {
        for d in 2..7 {
            let p = uniform_cosine_bins(d, 20);
            assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
        // d = 3: cosine is uniform on [-1, 1]
        assert!(uniform_cosine_bins(3, 20).iter().all(|p| (p - 0.05).abs() < 1e-12));
    }

    #[test]
    fn debiased_tv_of_uniform_input_is_small() {
        let probs = uniform_cosine_bins(3, 20);
        let mut rng = replica_rng(8, 0);
        let counts = multinomial(&probs, 50_000, &mut rng);
        let raw = total_variation(&counts, &probs);
        let obs: Vec<f64> = counts.iter().map(|&c| c as f64 / 50_000.0).collect();
        let (floor, spread) = tv_noise(&probs, &obs, 50_000, 400, 9);
        assert!(((raw - floor) / spread).abs() < 3.0, "{raw} {floor} {spread}");
    }

    #[test]
    fn ratio_preconditions() {
        let sp = Space::<3>::torus(20.0).unwrap();
        let (x, y) = (sp.point([0.0; 3]), sp.point([10.0, 0.0, 0.0]));
        // r must exceed 8b
        assert!(hitting_ratio(sp.point([4.0, 0.0, 0.0]), x, y, 4.0, sp, 10, 1e-4, 0).is_err());
    }

    #[test]
    fn kernel_2d_values() {
        assert!((poisson_kernel_2d(0.0, 2f64.ln()) - 3.0).abs() < 1e-12);
        let n = 20_000;
        let h = 2.0 * PI / n as f64;
        let t = 0.7;
        let (mut mass, mut m1) = (0.0, 0.0);
        for i in 0..n {
            let th = -PI + (i as f64 + 0.5) * h;
            let f = poisson_kernel_2d(th, t) / (2.0 * PI) * h;
            mass += f;
            m1 += th.cos() * f;
        }
        assert!((mass - 1.0).abs() < 1e-6);
        assert!((m1 - (-t).exp()).abs() < 1e-6);
    }

    #[test]
    fn sphere_second_moment() {
        let r = sphere_moment_check::<3>(1_000_000, 10).unwrap();
        assert!((r.value - 1.0 / 3.0).abs() < 1e-3);
        let r = sphere_moment_check::<2>(200_000, 11).unwrap();
        assert!(r.within(0.5, 4.0));
    }
}
