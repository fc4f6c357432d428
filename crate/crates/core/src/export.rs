//! Bit-stable CSV and JSON output plus the run manifest.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::contact::{SystemState, Which};
use crate::error::{Error, Result};
use crate::excursions::ExcursionRecord;
use crate::harmonic::HitDistributionEstimate;

/// Float with 17 significant digits, which round-trips exactly.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn io_err(path: &Path, e: std::io::Error) -> Error {
    Error::InvalidConfig(format!("{}: {e}", path.display()))
}

/// Everything needed to reproduce a run. Written before any data file.
#[derive(Clone, Debug, Serialize)]
pub struct RunManifest {
    pub subcommand: String,
    pub config: serde_json::Value,
    pub code_version: String,
    pub base_seed: u64,
    pub replicas: usize,
    pub outputs: Vec<String>,
}

impl RunManifest {
    pub fn new(
        subcommand: &str,
        config: serde_json::Value,
        base_seed: u64,
        replicas: usize,
        outputs: &[PathBuf],
    ) -> Self {
        RunManifest {
            subcommand: subcommand.into(),
            config,
            code_version: env!("CARGO_PKG_VERSION").into(),
            base_seed,
            replicas,
            outputs: outputs.iter().map(|p| p.display().to_string()).collect(),
        }
    }

    /// Path of the manifest that goes with data file `out`.
    pub fn path_for(out: &Path) -> PathBuf {
        let mut name = out.file_name().map(|n| n.to_os_string()).unwrap_or_default();
        name.push(".manifest.json");
        out.with_file_name(name)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_json(path, self)
    }
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::InvalidConfig(e.to_string()))?;
    std::fs::write(path, text + "\n").map_err(|e| io_err(path, e))
}

/// CSV writer with a mandatory header row.
pub struct CsvWriter {
    out: BufWriter<File>,
    path: PathBuf,
    columns: usize,
}

impl CsvWriter {
    pub fn create(path: &Path, header: &[String]) -> Result<Self> {
        let file = File::create(path).map_err(|e| io_err(path, e))?;
        let mut w = CsvWriter { out: BufWriter::new(file), path: path.to_path_buf(), columns: header.len() };
        w.line(header)?;
        Ok(w)
    }

    fn line(&mut self, cells: &[String]) -> Result<()> {
        writeln!(self.out, "{}", cells.join(",")).map_err(|e| io_err(&self.path, e))
    }

    pub fn row(&mut self, cells: &[String]) -> Result<()> {
        if cells.len() != self.columns {
            return Err(Error::InvalidConfig(format!("row has {} cells, header has {}", cells.len(), self.columns)));
        }
        self.line(cells)
    }

    pub fn finish(mut self) -> Result<()> {
        self.out.flush().map_err(|e| io_err(&self.path, e))
    }
}

fn axis_names(prefix: &str, d: usize) -> impl Iterator<Item = String> + '_ {
    const AXES: [&str; 4] = ["x", "y", "z", "w"];
    (0..d).map(move |k| match AXES.get(k) {
        Some(a) => format!("{prefix}{a}"),
        None => format!("{prefix}{k}"),
    })
}

/// Header of the path-snapshot table: `t, LX, LY`, then the driver, the two
/// centers on the torus and the two unfolded centers.
pub fn snapshot_header(d: usize) -> Vec<String> {
    let mut h = vec!["t".to_string(), "LX".into(), "LY".into()];
    for p in ["B", "X", "Y", "fX", "fY"] {
        h.extend(axis_names(p, d));
    }
    h
}

/// One snapshot row. A missing Y ball is written as NaN.
pub fn snapshot_row<const D: usize>(s: &SystemState<D>) -> Vec<String> {
    let mut row = vec![fmt_f64(s.t), fmt_f64(s.lx()), fmt_f64(s.ly())];
    let nan = [f64::NAN; D];
    let push = |row: &mut Vec<String>, c: &[f64]| row.extend(c.iter().map(|&v| fmt_f64(v)));
    push(&mut row, &s.b().coords().0);
    push(&mut row, &s.x.center().coords().0);
    push(&mut row, s.y.map(|y| y.center().coords().0).as_ref().unwrap_or(&nan));
    push(&mut row, &s.x.lifted.coords.0);
    push(&mut row, s.y.map(|y| y.lifted.coords.0).as_ref().unwrap_or(&nan));
    row
}

pub fn excursion_header(d: usize) -> Vec<String> {
    let mut h: Vec<String> = axis_names("start_", d).collect();
    h.extend(axis_names("end_", d));
    h.extend(["zeta", "max_radius", "which_ball"].map(String::from));
    h
}

pub fn excursion_row<const D: usize>(r: &ExcursionRecord<D>) -> Vec<String> {
    let mut row: Vec<String> = r.start.coords().0.iter().map(|&v| fmt_f64(v)).collect();
    row.extend(r.end.coords().0.iter().map(|&v| fmt_f64(v)));
    row.push(fmt_f64(r.zeta));
    row.push(fmt_f64(r.max_radius));
    row.push(match r.which_ball {
        Which::X => "X".into(),
        Which::Y => "Y".into(),
    });
    row
}

pub fn histogram_header() -> Vec<String> {
    ["bin_lo", "bin_hi", "count"].map(String::from).to_vec()
}

/// Rows of the cosine histogram of hits on obstacle `k`.
pub fn histogram_rows(est: &HitDistributionEstimate, k: usize) -> Vec<Vec<String>> {
    let edges = est.bin_edges();
    est.histograms[k]
        .iter()
        .enumerate()
        .map(|(i, &c)| vec![fmt_f64(edges[i].0), fmt_f64(edges[i].1), c.to_string()])
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Space;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn floats_round_trip(x in proptest::num::f64::ANY) {
            let back: f64 = fmt_f64(x).parse().unwrap();
            prop_assert!(back.to_bits() == x.to_bits() || (x.is_nan() && back.is_nan()));
        }
    }

    #[test]
    fn snapshot_row_matches_header() {
        let sp = Space::<3>::torus(10.0).unwrap();
        let s = SystemState::new(&sp, sp.point([5.0, 5.0, 5.0]), sp.point([1.0; 3]), None).unwrap();
        let row = snapshot_row(&s);
        assert_eq!(row.len(), snapshot_header(3).len());
        assert_eq!(snapshot_header(2)[..5], ["t", "LX", "LY", "Bx", "By"]);
        assert_eq!(row[0], "0.0000000000000000e0");
        assert_eq!(row.last().unwrap(), "NaN");
    }

    #[test]
    fn manifest_sits_next_to_output() {
        let p = RunManifest::path_for(Path::new("/tmp/run.csv"));
        assert_eq!(p, Path::new("/tmp/run.csv.manifest.json"));
    }

    #[test]
    fn csv_rejects_ragged_rows() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("h.csv");
        let mut w = CsvWriter::create(&path, &histogram_header()).unwrap();
        assert!(w.row(&["1".into()]).is_err());
        w.row(&["0".into(), "1".into(), "3".into()]).unwrap();
        w.finish().unwrap();
        assert_eq!(std::fs::read_to_string(&path).unwrap(), "bin_lo,bin_hi,count\n0,1,3\n");
    }
}
