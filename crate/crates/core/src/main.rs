use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde_json::json;

use stirring::contact::{run_path_with, FarField, Mode, SimConfig, SystemState};
use stirring::excursions::{frozen_run, lifetime_per_local_time, two_ball_lifetime};
use stirring::export::{
    excursion_header, excursion_row, fmt_f64, histogram_header, histogram_rows, snapshot_header, snapshot_row,
    write_json, CsvWriter, RunManifest,
};
use stirring::geometry::{Edge, Space, Vector};
use stirring::harmonic::{exit_uniformity, hit_distribution, hitting_ratio, Obstacles, WosConfig};
use stirring::oracles::{
    kelvin_linf_sq, kelvin_linf_sq_extrapolated, scaling_coupling_path, vector_local_time_2d, CouplingConfig,
};
use stirring::rng::run_replicas;
use stirring::stats::{ks_test, mean, ReferenceLaw};
use stirring::{verify, Error, Result};

#[derive(Parser)]
#[command(name = "stirring", version, about = "Monte Carlo lab for Brownian stirring of two balls")]
struct Cli {
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Pushing-mode path with snapshots.
    Simulate(RunArgs),
    /// Frozen-mode path with snapshots.
    Frozen(RunArgs),
    /// Accelerated frozen run logging every excursion.
    Excursions(RunArgs),
    /// Second moment of the 2-D vector local time.
    Oracle2d(Oracle2dArgs),
    /// Second moment of the total vector local time of the Kelvin chain.
    Kelvin(KelvinArgs),
    /// Total local time of the scaling coupling.
    Coupling(CouplingArgs),
    /// Walk-on-spheres hit laws on the two-ball torus.
    Wos(WosArgs),
    /// Run the acceptance suite and write the JSON report.
    Verify(VerifyArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Format {
    Csv,
    Json,
}

fn parse_edge(s: &str) -> std::result::Result<Edge, String> {
    if s.eq_ignore_ascii_case("inf") {
        return Ok(Edge::Infinite);
    }
    let r: f64 = s.parse().map_err(|_| format!("not a number or \"inf\": {s}"))?;
    if r.is_finite() && r > 4.0 {
        Ok(Edge::Finite(r))
    } else {
        Err(format!("torus edge must exceed 4, got {r}"))
    }
}

#[derive(Args, Clone)]
struct RunArgs {
    #[arg(long, default_value_t = 2)]
    dim: usize,
    /// Torus edge, or "inf" for the whole space.
    #[arg(long, default_value = "20", value_parser = parse_edge)]
    edge: Edge,
    #[arg(long, default_value_t = 1e-3)]
    dt: f64,
    #[arg(long = "t-end", default_value_t = 100.0)]
    t_end: f64,
    /// Independent replicas; replica k goes to `<out>.k` when more than one.
    #[arg(long, default_value_t = 1)]
    paths: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
    #[arg(long = "snapshot-stride", default_value_t = 100)]
    snapshot_stride: usize,
}

#[derive(Args)]
struct Oracle2dArgs {
    #[arg(long)]
    u: f64,
    #[arg(long, default_value_t = 100_000)]
    paths: usize,
    #[arg(long, default_value_t = 0.005)]
    delta: f64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

#[derive(Args)]
struct KelvinArgs {
    #[arg(long, default_value_t = 3)]
    dim: usize,
    /// Single step size; without it the estimate is extrapolated from 0.2, 0.1, 0.05.
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long, default_value_t = 200_000)]
    paths: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

#[derive(Args)]
struct CouplingArgs {
    #[arg(long, default_value_t = 3)]
    dim: usize,
    #[arg(long, default_value_t = 1e-4)]
    dt: f64,
    #[arg(long, default_value_t = 10_000)]
    paths: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Optional CSV of the sampled total local times.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct WosArgs {
    #[arg(long, default_value_t = 3)]
    dim: usize,
    /// Radius of the start sphere around the first ball; the edge is 8b + 2.
    #[arg(long, default_value_t = 4.0)]
    b: f64,
    #[arg(long, default_value_t = 100_000)]
    paths: usize,
    #[arg(long, default_value_t = 20)]
    bins: usize,
    #[arg(long, default_value_t = 1e-4)]
    eps: f64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Optional CSV histogram of hit cosines on the first ball.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    /// Only the fast criteria.
    #[arg(long)]
    quick: bool,
    #[arg(long, default_value_t = 20_240_917)]
    seed: u64,
    /// JSON report path.
    #[arg(long, default_value = "verify_report.json")]
    out: PathBuf,
}

macro_rules! by_dim {
    ($d:expr, $f:ident ( $($a:expr),* )) => {
        match $d {
            2 => $f::<2>($($a),*),
            3 => $f::<3>($($a),*),
            4 => $f::<4>($($a),*),
            d => Err(Error::InvalidConfig(format!("dimension {d} is not supported (2, 3 or 4)"))),
        }
    };
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    }
    let out = match cli.command {
        Command::Simulate(a) => by_dim!(a.dim, path_run(&a, Mode::Pushing, "simulate")),
        Command::Frozen(a) => by_dim!(a.dim, path_run(&a, Mode::Frozen, "frozen")),
        Command::Excursions(a) => by_dim!(a.dim, excursions(&a)),
        Command::Oracle2d(a) => oracle2d(&a),
        Command::Kelvin(a) => by_dim!(a.dim, kelvin(&a)),
        Command::Coupling(a) => by_dim!(a.dim, coupling(&a)),
        Command::Wos(a) => by_dim!(a.dim, wos(&a)),
        Command::Verify(a) => verify_suite(&a),
    };
    match out {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

fn config_json<const D: usize>(a: &RunArgs, cfg: &SimConfig<D>) -> serde_json::Value {
    json!({
        "dim": D,
        "edge": cfg.space.edge_length(),
        "dt": cfg.dt,
        "t_end": cfg.t_end,
        "seed": cfg.seed,
        "mode": format!("{:?}", cfg.mode),
        "tol_overlap": cfg.tol_overlap,
        "max_contact_iters": cfg.max_contact_iters,
        "snapshot_stride": cfg.snapshot_stride,
        "paths": a.paths,
        "format": format!("{:?}", a.format),
    })
}

/// Symmetric start: the centers on a diagonal a half-edge apart (three units
/// apart in the whole space), the driver touching X between them.
fn default_start<const D: usize>(space: &Space<D>) -> Result<SystemState<D>> {
    let (x, y) = match space.edge_length() {
        Some(r) => (0.25 * r, 0.75 * r),
        None => (0.0, 3.0 / (D as f64).sqrt()),
    };
    let unit = Vector([1.0 / (D as f64).sqrt(); D]);
    let xp = space.point([x; D]);
    let yp = space.point([y; D]);
    let b = space.translate(xp, unit);
    SystemState::new(space, b, xp, Some(yp))
}

fn replica_paths(out: &Path, n: usize) -> Vec<PathBuf> {
    if n == 1 {
        return vec![out.to_path_buf()];
    }
    (0..n)
        .map(|k| {
            let mut name = out.file_name().map(|s| s.to_os_string()).unwrap_or_default();
            name.push(format!(".{k}"));
            out.with_file_name(name)
        })
        .collect()
}

fn write_table(
    path: &Path,
    format: Format,
    header: Vec<String>,
    rows: impl Iterator<Item = Vec<String>>,
) -> Result<()> {
    match format {
        Format::Csv => {
            let mut w = CsvWriter::create(path, &header)?;
            for r in rows {
                w.row(&r)?;
            }
            w.finish()
        }
        Format::Json => {
            let rows: Vec<serde_json::Map<String, serde_json::Value>> = rows
                .map(|r| {
                    header
                        .iter()
                        .zip(r)
                        .map(|(k, v)| {
                            let val = v
                                .parse::<f64>()
                                .ok()
                                .and_then(serde_json::Number::from_f64)
                                .map_or(json!(v), serde_json::Value::Number);
                            (k.to_lowercase(), val)
                        })
                        .collect()
                })
                .collect();
            write_json(path, &rows)
        }
    }
}

fn path_run<const D: usize>(a: &RunArgs, mode: Mode, name: &str) -> Result<ExitCode> {
    let space = Space::<D>::from_edge(a.edge)?;
    let mut cfg = SimConfig::new(space, a.dt, a.t_end, a.seed, mode)?;
    cfg.snapshot_stride = a.snapshot_stride.max(1);
    let init = default_start(&space)?;
    let outs = replica_paths(&a.out, a.paths.max(1));
    RunManifest::new(name, config_json(a, &cfg), a.seed, outs.len(), &outs).write(&RunManifest::path_for(&a.out))?;
    let records = (0..outs.len())
        .into_par_iter()
        .map(|k| run_path_with(&cfg, &init, k as u64, |_, _| {}))
        .collect::<Result<Vec<_>>>()?;
    for (rec, path) in records.iter().zip(&outs) {
        write_table(path, a.format, snapshot_header(D), rec.snapshots.iter().map(snapshot_row))?;
        let s = &rec.final_state;
        println!(
            "{}: t={} LX={} LY={} steps={} double_contact_steps={}",
            path.display(),
            s.t,
            s.lx(),
            s.ly(),
            rec.steps,
            rec.double_contact_steps
        );
    }
    Ok(ExitCode::SUCCESS)
}

fn excursions<const D: usize>(a: &RunArgs) -> Result<ExitCode> {
    let space = Space::<D>::from_edge(a.edge)?;
    let r = space.edge_length().ok_or(Error::InfiniteSpace)?;
    let cfg = SimConfig::new(space, a.dt, a.t_end, a.seed, Mode::Frozen)?;
    let init = default_start(&space)?;
    let far = FarField::new(0.1);
    let outs = replica_paths(&a.out, a.paths.max(1));
    RunManifest::new("excursions", config_json(a, &cfg), a.seed, outs.len(), &outs)
        .write(&RunManifest::path_for(&a.out))?;
    let runs = run_replicas(outs.len(), a.seed, |_, rng| frozen_run(&init, &cfg, &far, a.t_end, rng))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    for (run, path) in runs.iter().zip(&outs) {
        write_table(path, a.format, excursion_header(D), run.records.iter().map(excursion_row))?;
    }
    let t: f64 = runs.iter().map(|s| s.t).sum();
    let l: f64 = runs.iter().map(|s| s.local_time).sum();
    println!("time={t} local_time={l} excursions={}", runs.iter().map(|s| s.records.len()).sum::<usize>());
    match lifetime_per_local_time(&runs) {
        Ok(est) => println!(
            "time per unit local time: {} +- {} (volume / area: {})",
            est.value,
            est.stderr,
            two_ball_lifetime(D, r)
        ),
        Err(e) => println!("time per unit local time: {e}"),
    }
    Ok(ExitCode::SUCCESS)
}

fn oracle2d(a: &Oracle2dArgs) -> Result<ExitCode> {
    let est = vector_local_time_2d(a.u, a.paths, a.delta, a.seed)?;
    let target = a.u + (-a.u).exp() - 1.0;
    println!("estimate={} stderr={} target={} z={}", est.value, est.stderr, target, est.z_score(target));
    Ok(ExitCode::SUCCESS)
}

fn kelvin<const D: usize>(a: &KelvinArgs) -> Result<ExitCode> {
    let d = D as f64;
    let target = 2.0 / ((d - 2.0) * (d - 1.0) * d);
    let est = match a.delta {
        Some(delta) => kelvin_linf_sq::<D>(delta, a.paths, a.seed)?,
        None => {
            let (est, levels) = kelvin_linf_sq_extrapolated::<D>([0.2, 0.1, 0.05], a.paths, a.seed)?;
            for l in &levels {
                println!("{}: {} +- {}", l.label, l.value, l.stderr);
            }
            est
        }
    };
    println!("estimate={} stderr={} target={} z={}", est.value, est.stderr, target, est.z_score(target));
    Ok(ExitCode::SUCCESS)
}

fn coupling<const D: usize>(a: &CouplingArgs) -> Result<ExitCode> {
    let cfg = CouplingConfig::new(a.dt);
    if let Some(out) = &a.out {
        let config = json!({ "dim": D, "dt": a.dt, "paths": a.paths, "floor": cfg.floor, "escape": cfg.escape, "band": cfg.band });
        RunManifest::new("coupling", config, a.seed, a.paths, std::slice::from_ref(out))
            .write(&RunManifest::path_for(out))?;
    }
    let v0 = Vector::<D>::axis(0);
    let traces = run_replicas(a.paths, a.seed, |_, rng| scaling_coupling_path(v0, &cfg, &[], rng))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let lu: Vec<f64> = traces.iter().map(|t| t.final_state.lu).collect();
    if let Some(out) = &a.out {
        let mut w = CsvWriter::create(out, &["total_local_time".to_string(), "truncated".to_string()])?;
        for t in &traces {
            w.row(&[fmt_f64(t.final_state.lu), (t.truncated as u8).to_string()])?;
        }
        w.finish()?;
    }
    let rate = D as f64 - 2.0;
    let ks = ks_test(&lu, &ReferenceLaw::Exponential { rate })?;
    println!("mean={} target={} ks={} p={}", mean(&lu), 1.0 / rate, ks.statistic, ks.p_value);
    Ok(ExitCode::SUCCESS)
}

fn wos<const D: usize>(a: &WosArgs) -> Result<ExitCode> {
    let r = 8.0 * a.b + 2.0;
    let space = Space::<D>::torus(r)?;
    let x1 = space.point([0.0; D]);
    let mut yc = [0.0; D];
    yc[0] = r / 2.0;
    let y1 = space.point(yc);
    let mut zc = [0.0; D];
    zc[1] = a.b;
    let z = space.point(zc);
    if let Some(out) = &a.out {
        let config = json!({ "dim": D, "b": a.b, "edge": r, "paths": a.paths, "bins": a.bins, "eps": a.eps });
        RunManifest::new("wos", config, a.seed, a.paths, std::slice::from_ref(out))
            .write(&RunManifest::path_for(out))?;
        let obs = Obstacles::unit_balls(space, vec![x1, y1])?;
        let axis = space.displacement(&x1, &z);
        let est = hit_distribution(z, &obs, &WosConfig::new(a.eps), &[axis, axis], a.bins, a.paths, a.seed)?;
        let mut w = CsvWriter::create(out, &histogram_header())?;
        for row in histogram_rows(&est, 0) {
            w.row(&row)?;
        }
        w.finish()?;
    }
    let ratio = hitting_ratio(z, x1, y1, a.b, space, a.paths, a.eps, a.seed)?;
    let unif = exit_uniformity(z, x1, y1, a.b, space, a.paths, a.bins, a.eps, a.seed + 1)?;
    println!("hitting ratio={} stderr={}", ratio.value, ratio.stderr);
    println!("exit TV={} stderr={} raw={}", unif.tv.value, unif.tv.stderr, unif.tv_raw);
    Ok(ExitCode::SUCCESS)
}

fn verify_suite(a: &VerifyArgs) -> Result<ExitCode> {
    let ids: Vec<u32> = if a.quick { verify::QUICK.to_vec() } else { verify::CRITERIA.iter().map(|c| c.0).collect() };
    let mut reports = Vec::with_capacity(ids.len());
    for id in ids {
        let r = verify::run(id, a.seed);
        println!("{}", verify::summary_line(&r));
        reports.push(r);
    }
    write_json(&a.out, &reports)?;
    let failed = reports.iter().filter(|r| !r.pass).count();
    println!("{} of {} criteria passed; report in {}", reports.len() - failed, reports.len(), a.out.display());
    Ok(if failed == 0 { ExitCode::SUCCESS } else { ExitCode::from(1) })
}
