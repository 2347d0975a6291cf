use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{config, point_estimates, Aggregates, ExperimentConfig, ExperimentRecord, Sweep};
use crate::error::{Error, Result};

pub const CSV_HEADER: [&str; 7] = ["unitary_index", "seed", "d", "hog_contrib", "xeb_inner", "qq_inner", "leakage"];

const SUMMARY_HEADER: [&str; 6] = ["d", "t1", "t2", "metric", "value", "err"];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub d: usize,
    #[serde(with = "config::seconds")]
    pub t1: f64,
    #[serde(with = "config::seconds")]
    pub t2: f64,
    pub file: String,
    pub sha256: String,
    pub n_candidates: usize,
    pub n_accepted: usize,
    pub pass_rate: f64,
    pub aggregates: Option<Aggregates>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub version: String,
    pub git_revision: Option<String>,
    pub config: ExperimentConfig,
    /// Post-selected candidate seeds per grid file, in file order.
    pub seeds: Vec<Vec<u64>>,
    pub wall_clock_s: f64,
    pub entries: Vec<ManifestEntry>,
    pub summary_file: String,
    pub summary_sha256: String,
}

impl Manifest {
    pub fn load(path: &Path) -> Result<Self> {
        let s = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&s).map_err(|e| Error::Format(format!("manifest: {e}")))
    }

    /// Recompute every checksum against the files next to the manifest.
    pub fn verify(&self, dir: &Path) -> Result<()> {
        let files = self
            .entries
            .iter()
            .map(|e| (&e.file, &e.sha256))
            .chain(std::iter::once((&self.summary_file, &self.summary_sha256)));
        for (file, sum) in files {
            let path = dir.join(file);
            let bytes = std::fs::read(&path).map_err(|e| Error::io(&path, e))?;
            if &sha256_hex(&bytes) != sum {
                return Err(Error::Format(format!("checksum mismatch for {}", path.display())));
            }
        }
        Ok(())
    }
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn time_label(t: f64) -> String {
    if t.is_infinite() {
        "inf".into()
    } else {
        format!("{}us", (t * 1e12).round() / 1e6)
    }
}

fn time_value(t: f64) -> String {
    if t.is_infinite() {
        "inf".into()
    } else {
        t.to_string()
    }
}

pub fn grid_file_name(r: &ExperimentRecord) -> String {
    format!("d{}_t1-{}_t2-{}.csv", r.d, time_label(r.t1), time_label(r.t2))
}

fn csv_bytes(rows: impl FnOnce(&mut csv::Writer<Vec<u8>>) -> csv::Result<()>) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    rows(&mut w).map_err(|e| Error::Format(format!("csv: {e}")))?;
    w.into_inner().map_err(|e| Error::Format(format!("csv: {e}")))
}

fn record_csv(r: &ExperimentRecord) -> Result<Vec<u8>> {
    csv_bytes(|w| {
        w.write_record(CSV_HEADER)?;
        for u in &r.unitaries {
            w.write_record([
                u.unitary_index.to_string(),
                u.seed.to_string(),
                u.d.to_string(),
                u.metrics.hog_fraction_contrib.to_string(),
                u.metrics.xeb_inner.to_string(),
                u.metrics.qq_inner.to_string(),
                u.leakage.to_string(),
            ])?;
        }
        Ok(())
    })
}

fn summary_csv(records: &[ExperimentRecord]) -> Result<Vec<u8>> {
    csv_bytes(|w| {
        w.write_record(SUMMARY_HEADER)?;
        for r in records {
            let (d, t1, t2) = (r.d.to_string(), time_value(r.t1), time_value(r.t2));
            let mut row = |metric: &str, value: f64, err: f64| {
                w.write_record([&d, &t1, &t2, metric, &value.to_string(), &err.to_string()])
            };
            row("pass_rate", r.pass_rate, 0.0)?;
            if let Some(a) = &r.aggregates {
                row("hog", a.hog.value, a.hog.err)?;
                row("xeb", a.xeb.value, a.xeb.err)?;
                row("xeb_n", a.xeb_n.value, a.xeb_n.err)?;
            }
        }
        Ok(())
    })
}

fn write(path: PathBuf, bytes: &[u8]) -> Result<()> {
    std::fs::write(&path, bytes).map_err(|e| Error::io(path, e))
}

/// Write one CSV per grid point, the long-format `summary.csv` and
/// `manifest.json` into `dir`, creating it if needed.
pub fn emit(sweep: &Sweep, dir: &Path) -> Result<Manifest> {
    if sweep.records.is_empty() {
        return Err(Error::invalid("no records to emit"));
    }
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut entries = Vec::new();
    let mut seeds = Vec::new();
    for r in &sweep.records {
        let file = grid_file_name(r);
        let bytes = record_csv(r)?;
        write(dir.join(&file), &bytes)?;
        seeds.push(r.unitaries.iter().map(|u| u.seed).collect());
        entries.push(ManifestEntry {
            d: r.d,
            t1: r.t1,
            t2: r.t2,
            file,
            sha256: sha256_hex(&bytes),
            n_candidates: r.n_candidates,
            n_accepted: r.n_accepted,
            pass_rate: r.pass_rate,
            aggregates: r.aggregates,
        });
    }
    let summary = summary_csv(&sweep.records)?;
    write(dir.join("summary.csv"), &summary)?;
    let manifest = Manifest {
        version: sweep.version.clone(),
        git_revision: option_env!("SNAPQV_GIT_REVISION").map(str::to_string),
        config: sweep.config.clone(),
        seeds,
        wall_clock_s: sweep.wall_clock_s,
        entries,
        summary_file: "summary.csv".into(),
        summary_sha256: sha256_hex(&summary),
    };
    let json = serde_json::to_string_pretty(&manifest).map_err(|e| Error::Format(e.to_string()))?;
    write(dir.join("manifest.json"), json.as_bytes())?;
    Ok(manifest)
}

/// Recompute (hog, xeb, xeb_n) from an emitted grid CSV.
pub fn reaggregate_csv(path: &Path) -> Result<(f64, f64, f64)> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
    let header = rdr.headers().map_err(|e| Error::Format(e.to_string()))?.clone();
    if header.iter().ne(CSV_HEADER) {
        return Err(Error::Format(format!("{}: unexpected header", path.display())));
    }
    let (mut hog, mut xeb, mut qq) = (Vec::new(), Vec::new(), Vec::new());
    let mut d = None;
    for row in rdr.records() {
        let row = row.map_err(|e| Error::Format(e.to_string()))?;
        let num = |i: usize| -> Result<f64> {
            row[i].parse().map_err(|_| Error::Format(format!("bad number '{}'", &row[i])))
        };
        let rd: usize = row[2].parse().map_err(|_| Error::Format("bad d".into()))?;
        if *d.get_or_insert(rd) != rd {
            return Err(Error::Format("mixed dimensions in one file".into()));
        }
        hog.push(num(3)?);
        xeb.push(num(4)?);
        qq.push(num(5)?);
    }
    let d = d.ok_or_else(|| Error::Format(format!("{}: no rows", path.display())))?;
    point_estimates(d, &hog, &xeb, &qq)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiment::{run_sweep, Mode};

    fn sweep() -> Sweep {
        let cfg = ExperimentConfig {
            d_values: vec![2, 3],
            t1_values: vec![f64::INFINITY, 50e-6],
            n_unitaries: 3,
            n_cavity: 16,
            bootstrap_resamples: 100,
            mode: Mode::Gate,
            seed: 5,
            ..Default::default()
        };
        run_sweep(&cfg).unwrap()
    }

    #[test]
    fn emitted_files_reaggregate_exactly() {
        let s = sweep();
        let dir = tempfile::tempdir().unwrap();
        let m = emit(&s, dir.path()).unwrap();
        assert_eq!(m.entries.len(), 4);
        m.verify(dir.path()).unwrap();
        let loaded = Manifest::load(&dir.path().join("manifest.json")).unwrap();
        assert_eq!(loaded, m);
        for e in &loaded.entries {
            let a = e.aggregates.unwrap();
            let (h, x, xn) = reaggregate_csv(&dir.path().join(&e.file)).unwrap();
            assert_eq!((h, x, xn), (a.hog.value, a.xeb.value, a.xeb_n.value));
        }
    }

    #[test]
    fn csv_header_is_stable() {
        let s = sweep();
        let dir = tempfile::tempdir().unwrap();
        let m = emit(&s, dir.path()).unwrap();
        let text = std::fs::read_to_string(dir.path().join(&m.entries[0].file)).unwrap();
        assert_eq!(
            text.lines().next().unwrap(),
            "unitary_index,seed,d,hog_contrib,xeb_inner,qq_inner,leakage"
        );
        assert_eq!(m.entries[0].file, "d2_t1-inf_t2-inf.csv");
        assert_eq!(m.entries[1].file, "d2_t1-50us_t2-100us.csv");
        let summary = std::fs::read_to_string(dir.path().join("summary.csv")).unwrap();
        assert!(summary.starts_with("d,t1,t2,metric,value,err\n"));
    }

    #[test]
    fn gate_level_output_is_byte_identical() {
        let (a, b) = (sweep(), sweep());
        let (da, db) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        let (ma, mb) = (emit(&a, da.path()).unwrap(), emit(&b, db.path()).unwrap());
        for (x, y) in ma.entries.iter().zip(&mb.entries) {
            assert_eq!(x.sha256, y.sha256);
        }
        assert_eq!(ma.summary_sha256, mb.summary_sha256);
    }

    #[test]
    fn empty_sweep_is_an_error() {
        let mut s = sweep();
        s.records.clear();
        assert!(emit(&s, tempfile::tempdir().unwrap().path()).is_err());
    }
}
