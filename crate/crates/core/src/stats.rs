//! Estimators with standard errors and the goodness-of-fit tests used by
//! the verification suite.

use serde::Serialize;
use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};

use crate::error::{Error, Result};

/// A Monte Carlo estimate with its standard error.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EstimatorResult {
    pub value: f64,
    pub stderr: f64,
    pub n: usize,
    pub label: String,
}

impl EstimatorResult {
    pub fn new(label: impl Into<String>, value: f64, stderr: f64, n: usize) -> Self {
        debug_assert!(stderr >= 0.0 && n >= 1);
        EstimatorResult { value, stderr, n, label: label.into() }
    }

    /// Sample mean with a batch-means standard error.
    pub fn from_samples(label: impl Into<String>, samples: &[f64]) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::EmptySample);
        }
        let (value, stderr) = batch_means(samples, default_batches(samples.len()));
        Ok(EstimatorResult::new(label, value, stderr, samples.len()))
    }

    /// `|value - target|` in units of the standard error.
    pub fn z_score(&self, target: f64) -> f64 {
        if self.stderr == 0.0 {
            return if self.value == target { 0.0 } else { f64::INFINITY };
        }
        (self.value - target).abs() / self.stderr
    }

    pub fn within(&self, target: f64, n_stderr: f64) -> bool {
        self.z_score(target) <= n_stderr
    }

    /// Linear combination of independent estimates.
    pub fn combine(label: impl Into<String>, terms: &[(f64, &EstimatorResult)]) -> Self {
        let value = terms.iter().map(|(w, e)| w * e.value).sum();
        let var: f64 = terms.iter().map(|(w, e)| (w * e.stderr).powi(2)).sum();
        let n = terms.iter().map(|(_, e)| e.n).sum();
        EstimatorResult::new(label, value, var.sqrt(), n)
    }
}

fn default_batches(n: usize) -> usize {
    n.clamp(1, 256)
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased sample variance.
pub fn variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() as f64 - 1.0)
}

/// Mean and batch-means standard error with `batches` contiguous batches.
/// Leftover samples are spread over the first batches.
pub fn batch_means(xs: &[f64], batches: usize) -> (f64, f64) {
    let n = xs.len();
    let m = mean(xs);
    let k = batches.min(n);
    if k < 2 {
        return (m, 0.0);
    }
    let mut means = Vec::with_capacity(k);
    let mut start = 0;
    for size in crate::rng::batch_sizes(n, k) {
        means.push(mean(&xs[start..start + size]));
        start += size;
    }
    let var_batch = means.iter().map(|b| (b - m).powi(2)).sum::<f64>() / (k as f64 - 1.0);
    (m, (var_batch / k as f64).sqrt())
}

/// Integrated autocorrelation time with the initial-positive-sequence window.
pub fn autocorrelation_time(xs: &[f64]) -> f64 {
    let n = xs.len();
    if n < 4 {
        return 1.0;
    }
    let m = mean(xs);
    let c0 = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n as f64;
    if c0 == 0.0 {
        return 1.0;
    }
    let acf = |lag: usize| -> f64 {
        xs[..n - lag].iter().zip(&xs[lag..]).map(|(a, b)| (a - m) * (b - m)).sum::<f64>() / (n as f64 * c0)
    };
    let mut tau = 1.0;
    let mut lag = 1;
    while lag + 1 < n / 2 {
        let pair = acf(lag) + acf(lag + 1);
        if pair <= 0.0 {
            break;
        }
        tau += 2.0 * pair;
        lag += 2;
    }
    tau
}

/// Reference laws for goodness-of-fit tests.
#[derive(Clone, Debug, PartialEq)]
pub enum ReferenceLaw {
    Exponential {
        rate: f64,
    },
    Normal {
        mean: f64,
        variance: f64,
    },
    /// One coordinate of the uniform law on a torus of edge `edge`.
    UniformTorus {
        edge: f64,
    },
    /// Empirical law of a reference sample (two-sample test).
    Empirical(Vec<f64>),
}

impl ReferenceLaw {
    pub fn validate(&self) -> Result<()> {
        let ok = match self {
            ReferenceLaw::Exponential { rate } => *rate > 0.0,
            ReferenceLaw::Normal { variance, .. } => *variance > 0.0,
            ReferenceLaw::UniformTorus { edge } => *edge > 0.0,
            ReferenceLaw::Empirical(v) => !v.is_empty(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidConfig(format!("invalid reference law {self:?}")))
        }
    }

    /// CDF of a continuous law; `None` for the empirical reference.
    pub fn cdf(&self, x: f64) -> Option<f64> {
        match self {
            ReferenceLaw::Exponential { rate } => Some(if x <= 0.0 { 0.0 } else { 1.0 - (-rate * x).exp() }),
            ReferenceLaw::Normal { mean, variance } => {
                Some(Normal::new(*mean, variance.sqrt()).expect("validated").cdf(x))
            }
            ReferenceLaw::UniformTorus { edge } => Some((x / edge).clamp(0.0, 1.0)),
            ReferenceLaw::Empirical(_) => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TestOutcome {
    pub statistic: f64,
    pub p_value: f64,
    pub n: usize,
}

/// Asymptotic Kolmogorov tail `P(sqrt(n) D > lambda)` with Stephens'
/// small-sample correction applied by the callers.
pub fn kolmogorov_p(d: f64, n_eff: f64) -> f64 {
    let sn = n_eff.sqrt();
    let lambda = (sn + 0.12 + 0.11 / sn) * d;
    if lambda < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=100 {
        let kf = k as f64;
        let term = (-2.0 * kf * kf * lambda * lambda).exp();
        sum += if k % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

fn sorted(xs: &[f64]) -> Vec<f64> {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

/// One-sample KS test, or two-sample when `law` is empirical.
pub fn ks_test(sample: &[f64], law: &ReferenceLaw) -> Result<TestOutcome> {
    if sample.is_empty() {
        return Err(Error::EmptySample);
    }
    law.validate()?;
    if let ReferenceLaw::Empirical(reference) = law {
        return ks_two_sample(sample, reference);
    }
    let xs = sorted(sample);
    let n = xs.len() as f64;
    let mut d: f64 = 0.0;
    for (i, x) in xs.iter().enumerate() {
        let f = law.cdf(*x).expect("continuous law");
        d = d.max(f - i as f64 / n).max((i + 1) as f64 / n - f);
    }
    Ok(TestOutcome { statistic: d, p_value: kolmogorov_p(d, n), n: xs.len() })
}

/// Two-sample KS test; symmetric in its arguments.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<TestOutcome> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptySample);
    }
    let d = ks_distance(a, b);
    let (n, m) = (a.len() as f64, b.len() as f64);
    Ok(TestOutcome { statistic: d, p_value: kolmogorov_p(d, n * m / (n + m)), n: a.len() })
}

/// Sup distance between the empirical CDFs of two samples.
pub fn ks_distance(a: &[f64], b: &[f64]) -> f64 {
    let (xa, xb) = (sorted(a), sorted(b));
    let (n, m) = (xa.len() as f64, xb.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < xa.len() && j < xb.len() {
        let x = xa[i].min(xb[j]);
        while i < xa.len() && xa[i] <= x {
            i += 1;
        }
        while j < xb.len() && xb[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / n - j as f64 / m).abs());
    }
    d
}

/// Pearson chi-square against expected counts.
pub fn chi_square(observed: &[u64], expected: &[f64]) -> Result<TestOutcome> {
    if observed.len() != expected.len() || observed.len() < 2 {
        return Err(Error::InvalidConfig("chi-square needs matching tables with at least 2 cells".into()));
    }
    let stat: f64 = observed.iter().zip(expected).map(|(&o, &e)| (o as f64 - e).powi(2) / e).sum();
    let n = observed.iter().sum::<u64>() as usize;
    Ok(TestOutcome { statistic: stat, p_value: chi_square_p(stat, (observed.len() - 1) as f64), n })
}

pub fn chi_square_p(stat: f64, dof: f64) -> f64 {
    1.0 - ChiSquared::new(dof).expect("positive dof").cdf(stat)
}

/// Chi-square test of equal cell probabilities.
pub fn chi_square_uniform(observed: &[u64]) -> Result<TestOutcome> {
    let n = observed.iter().sum::<u64>() as f64;
    let e = n / observed.len() as f64;
    chi_square(observed, &vec![e; observed.len()])
}

/// Chi-square homogeneity test of two histograms on the same bins.
pub fn chi_square_homogeneity(a: &[u64], b: &[u64]) -> Result<TestOutcome> {
    if a.len() != b.len() {
        return Err(Error::InvalidConfig("histograms differ in length".into()));
    }
    let (na, nb) = (a.iter().sum::<u64>() as f64, b.iter().sum::<u64>() as f64);
    let mut stat = 0.0;
    let mut cells = 0;
    for (&x, &y) in a.iter().zip(b) {
        let tot = (x + y) as f64;
        if tot == 0.0 {
            continue;
        }
        cells += 1;
        let (ea, eb) = (tot * na / (na + nb), tot * nb / (na + nb));
        stat += (x as f64 - ea).powi(2) / ea + (y as f64 - eb).powi(2) / eb;
    }
    if cells < 2 {
        return Err(Error::EmptySample);
    }
    Ok(TestOutcome { statistic: stat, p_value: chi_square_p(stat, (cells - 1) as f64), n: (na + nb) as usize })
}

/// Diffusion estimate from a series sampled on an equispaced clock.
#[derive(Clone, Debug, Serialize)]
pub struct DiffusionEstimate {
    /// Variance growth per unit clock time, one per component.
    pub slopes: Vec<EstimatorResult>,
    /// Correlation matrix of the non-overlapping increments at the shorter lag.
    pub correlation: Vec<Vec<f64>>,
    pub n_increments: usize,
}

/// Per-component variance slope of `scale`-scaled increments between lags
/// `lags.0` and `lags.1` (in grid units, grid spacing `spacing`), pooled over
/// independent replica series. The standard error comes from the spread of
/// per-block slopes, with each replica cut into contiguous blocks.
pub fn diffusion_coefficient(
    replicas: &[Vec<Vec<f64>>],
    spacing: f64,
    scale: f64,
    lags: (usize, usize),
) -> Result<DiffusionEstimate> {
    let (l1, l2) = lags;
    if !(0 < l1 && l1 < l2) {
        return Err(Error::InvalidConfig("lags must satisfy 0 < l1 < l2".into()));
    }
    let n_inc: usize = replicas.iter().map(|s| s.len().saturating_sub(1)).sum();
    let shortest = replicas.iter().map(|s| s.len().saturating_sub(1)).min().unwrap_or(0);
    let blocks_per = (16 / replicas.len().max(1)).max(1);
    if n_inc < 100 || shortest / l2 < 2 * blocks_per {
        return Err(Error::Underpowered(format!("{n_inc} increments")));
    }
    let dim = replicas[0][0].len();
    // Sums of squared overlapping increments at both lags, and their counts.
    let sums = |xs: &[f64]| -> [f64; 4] {
        let sq = |l: usize| xs.windows(l + 1).map(|w| (w[l] - w[0]).powi(2)).sum::<f64>();
        let cnt = |l: usize| xs.len().saturating_sub(l) as f64;
        [sq(l1), cnt(l1), sq(l2), cnt(l2)]
    };
    let slope = |t: [f64; 4]| (t[2] / t[3] - t[0] / t[1]) / ((l2 - l1) as f64 * spacing);
    let mut slopes = Vec::with_capacity(dim);
    for k in 0..dim {
        let mut total = [0.0; 4];
        let mut per = Vec::new();
        for series in replicas {
            let xs: Vec<f64> = series.iter().map(|p| p[k] * scale).collect();
            let size = xs.len() / blocks_per;
            for b in 0..blocks_per {
                let t = sums(&xs[b * size..(b + 1) * size]);
                per.push(slope(t));
                for (a, v) in total.iter_mut().zip(t) {
                    *a += v;
                }
            }
        }
        let stderr = (variance(&per) / per.len() as f64).sqrt();
        slopes.push(EstimatorResult::new(format!("slope[{k}]"), slope(total), stderr, n_inc));
    }
    let incs: Vec<Vec<f64>> = (0..dim)
        .map(|k| {
            replicas
                .iter()
                .flat_map(|s| s.windows(l1 + 1).step_by(l1).map(move |w| (w[l1][k] - w[0][k]) * scale))
                .collect()
        })
        .collect();
    let correlation = (0..dim).map(|a| (0..dim).map(|b| correlation(&incs[a], &incs[b])).collect()).collect();
    Ok(DiffusionEstimate { slopes, correlation, n_increments: n_inc })
}

pub fn correlation(a: &[f64], b: &[f64]) -> f64 {
    let (ma, mb) = (mean(a), mean(b));
    let mut sab = 0.0;
    let mut saa = 0.0;
    let mut sbb = 0.0;
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma).powi(2);
        sbb += (y - mb).powi(2);
    }
    sab / (saa * sbb).sqrt()
}

/// Report for the long-run law of the two ball centers.
#[derive(Clone, Debug, Serialize)]
pub struct StationaryReport {
    pub marginal_x: TestOutcome,
    pub marginal_y: TestOutcome,
    /// KS distance of `|X - Y| / r` to the independent-uniform reference.
    pub distance_ks: f64,
    /// Correlations of `cos(2 pi X_k / r)` with `cos(2 pi Y_k / r)`.
    pub test_function_corr: Vec<f64>,
    pub n: usize,
    pub n_eff: f64,
}

/// Long-run checks on samples of ball centers (coordinates in `[0, r)`).
/// Chi-square statistics are deflated by the autocorrelation time of the
/// cell indicators before computing p-values.
pub fn stationary_independence(
    xs: &[Vec<f64>],
    ys: &[Vec<f64>],
    edge: f64,
    reference_distance: &[f64],
    grid: usize,
) -> Result<StationaryReport> {
    if xs.len() != ys.len() || xs.is_empty() {
        return Err(Error::EmptySample);
    }
    let dim = xs[0].len();
    let dist: Vec<f64> = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| {
            let s: f64 = x
                .iter()
                .zip(y)
                .map(|(a, b)| {
                    let mut v = (b - a).rem_euclid(edge);
                    if v > 0.5 * edge {
                        v -= edge;
                    }
                    v * v
                })
                .sum();
            s.sqrt() / edge
        })
        .collect();
    let tau =
        autocorrelation_time(&dist).max(autocorrelation_time(&xs.iter().map(|p| p[0]).collect::<Vec<_>>())).max(1.0);
    let n_eff = xs.len() as f64 / tau;
    if n_eff < 50.0 {
        return Err(Error::Underpowered(format!("effective sample size {n_eff:.1}")));
    }
    let cell = |p: &[f64]| -> usize {
        p.iter().fold(0, |acc, c| acc * grid + (((c / edge) * grid as f64) as usize).min(grid - 1))
    };
    let marginal = |pts: &[Vec<f64>]| -> Result<TestOutcome> {
        let mut counts = vec![0u64; grid.pow(dim as u32)];
        for p in pts {
            counts[cell(p)] += 1;
        }
        let raw = chi_square_uniform(&counts)?;
        let stat = raw.statistic / tau;
        Ok(TestOutcome { statistic: stat, p_value: chi_square_p(stat, (counts.len() - 1) as f64), n: raw.n })
    };
    let test_function_corr = (0..dim)
        .map(|k| {
            let f = |p: &Vec<f64>| (2.0 * std::f64::consts::PI * p[k] / edge).cos();
            let a: Vec<f64> = xs.iter().map(f).collect();
            let b: Vec<f64> = ys.iter().map(f).collect();
            correlation(&a, &b)
        })
        .collect();
    Ok(StationaryReport {
        marginal_x: marginal(xs)?,
        marginal_y: marginal(ys)?,
        distance_ks: ks_distance(&dist, reference_distance),
        test_function_corr,
        n: xs.len(),
        n_eff,
    })
}

/// Fraction of contact episodes that belong to the first ball.
pub fn contact_split(first_ball: &[bool]) -> Result<EstimatorResult> {
    if first_ball.is_empty() {
        return Err(Error::EmptySample);
    }
    let n = first_ball.len();
    let p = first_ball.iter().filter(|&&b| b).count() as f64 / n as f64;
    Ok(EstimatorResult::new("contact_split", p, (p * (1.0 - p) / n as f64).sqrt(), n))
}

/// One line of the JSON verification report.
#[derive(Clone, Debug, Serialize)]
pub struct TestReport {
    pub test_id: String,
    pub statistic: f64,
    pub p_value: Option<f64>,
    pub pass: bool,
    pub n: usize,
    pub params: serde_json::Value,
}
