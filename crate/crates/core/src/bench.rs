//! Monte Carlo driver: for each run, draw one ground truth and sweep the
//! number of samples per bin, estimating and scoring at every sweep point.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::model::{sample_dataset_with, sample_ground_truth};
use crate::pipeline::{compute_metrics, estimate_with};

pub const CSV_HEADER: &str = "run_id,samples_per_bin,seed,avg_deviation,p_err,q_err,w_err";

#[allow(non_snake_case)]
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchConfig {
    pub K: usize,
    pub L: usize,
    pub N: usize,
    pub sample_sweep: Vec<usize>,
    pub mc_runs: usize,
    pub master_seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_path: Option<PathBuf>,
}

impl BenchConfig {
    /// K = 5 choices, L = 2 attributes, N = 5 bins, 100 runs over
    /// 20, 100, 500 and 2500 samples per bin.
    pub fn reference(master_seed: u64) -> Self {
        BenchConfig {
            K: 5,
            L: 2,
            N: 5,
            sample_sweep: vec![20, 100, 500, 2500],
            mc_runs: 100,
            master_seed,
            output_path: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.mc_runs == 0 {
            return Err(Error::Parameter("mc_runs must be at least 1".into()));
        }
        if self.N == 0 {
            return Err(Error::Parameter("N must be at least 1".into()));
        }
        if self.sample_sweep.first().is_some_and(|&c| c == 0) {
            return Err(Error::Parameter("sweep values must be at least 1".into()));
        }
        if self.sample_sweep.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Parameter("sample_sweep must be strictly increasing".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchRecord {
    pub run_id: usize,
    pub samples_per_bin: usize,
    pub seed: u64,
    pub avg_deviation: f64,
    pub p_err: f64,
    pub q_err: f64,
    pub w_err: f64,
}

pub fn run_benchmark(config: &BenchConfig) -> Result<Vec<BenchRecord>> {
    run_benchmark_with(config, Execution::default())
}

/// Runs execute through `exec`; records come back ordered by
/// `(run_id, sweep index)` either way.
pub fn run_benchmark_with(config: &BenchConfig, exec: Execution) -> Result<Vec<BenchRecord>> {
    config.validate()?;
    let runs: Vec<usize> = (0..config.mc_runs).collect();
    let per_run = exec.try_map(&runs, |&run| run_once(config, run))?;
    Ok(per_run.into_iter().flatten().collect())
}

fn run_once(config: &BenchConfig, run: usize) -> Result<Vec<BenchRecord>> {
    let seed = config.master_seed.wrapping_add(run as u64);
    let annotate = |samples_per_bin: usize| {
        move |e: Error| Error::Run {
            run,
            samples_per_bin,
            source: Box::new(e),
        }
    };
    let first = config.sample_sweep.first().copied().unwrap_or(0);
    let truth = sample_ground_truth(config.K, config.L, seed).map_err(annotate(first))?;
    config
        .sample_sweep
        .iter()
        .map(|&per_bin| {
            let data = sample_dataset_with(&truth, per_bin * config.N, config.N, seed, Execution::Sequential)
                .map_err(annotate(per_bin))?;
            let result = estimate_with(&data, truth.lattice(), Execution::Sequential).map_err(annotate(per_bin))?;
            let m = compute_metrics(&truth, &result, &data).map_err(annotate(per_bin))?;
            Ok(BenchRecord {
                run_id: run,
                samples_per_bin: per_bin,
                seed,
                avg_deviation: m.avg_deviation,
                p_err: m.p_err,
                q_err: m.q_err,
                w_err: m.w_err,
            })
        })
        .collect()
}

/// Writes the CSV with [`CSV_HEADER`]. Floats use the shortest decimal form
/// that parses back to the same value.
pub fn write_records(records: &[BenchRecord], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let io_err = |source| Error::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut out = BufWriter::new(File::create(path).map_err(io_err)?);
    write_records_to(records, &mut out).map_err(io_err)?;
    out.flush().map_err(io_err)
}

pub fn write_records_to<W: Write>(records: &[BenchRecord], out: &mut W) -> std::io::Result<()> {
    writeln!(out, "{CSV_HEADER}")?;
    for r in records {
        writeln!(
            out,
            "{},{},{},{:?},{:?},{:?},{:?}",
            r.run_id, r.samples_per_bin, r.seed, r.avg_deviation, r.p_err, r.q_err, r.w_err
        )?;
    }
    Ok(())
}

pub fn read_records(path: impl AsRef<Path>) -> Result<Vec<BenchRecord>> {
    let path = path.as_ref();
    let mut reader = csv::Reader::from_path(path)?;
    let header: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    if header.join(",") != CSV_HEADER {
        return Err(Error::shape(CSV_HEADER, header.join(",")));
    }
    reader.deserialize().map(|r| r.map_err(Error::from)).collect()
}

/// Median of `values`; NaN-free input assumed.
pub fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Per-sweep-point medians of each metric, in sweep order.
pub fn median_curves(records: &[BenchRecord], sweep: &[usize]) -> Vec<[f64; 4]> {
    sweep
        .iter()
        .map(|&c| {
            let pick = |f: fn(&BenchRecord) -> f64| {
                let mut v: Vec<f64> = records.iter().filter(|r| r.samples_per_bin == c).map(f).collect();
                median(&mut v)
            };
            [
                pick(|r| r.avg_deviation),
                pick(|r| r.p_err),
                pick(|r| r.q_err),
                pick(|r| r.w_err),
            ]
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_config() -> BenchConfig {
        BenchConfig {
            K: 3,
            L: 1,
            N: 2,
            sample_sweep: vec![5, 50],
            mc_runs: 4,
            master_seed: 17,
            output_path: None,
        }
    }

    #[test]
    fn record_count_and_order() {
        let cfg = small_config();
        let recs = run_benchmark(&cfg).unwrap();
        assert_eq!(recs.len(), 8);
        let keys: Vec<(usize, usize)> = recs.iter().map(|r| (r.run_id, r.samples_per_bin)).collect();
        let mut sorted = keys.clone();
        sorted.sort();
        assert_eq!(keys, sorted);
        for r in &recs {
            assert_eq!(r.seed, 17 + r.run_id as u64);
        }
    }

    #[test]
    fn deterministic_and_schedule_free() {
        let cfg = small_config();
        let a = run_benchmark_with(&cfg, Execution::Sequential).unwrap();
        let b = run_benchmark_with(&cfg, Execution::Parallel).unwrap();
        assert_eq!(a, b);
        assert_eq!(a, run_benchmark(&cfg).unwrap());
    }

    #[test]
    fn config_validation() {
        let mut cfg = small_config();
        cfg.mc_runs = 0;
        assert!(run_benchmark(&cfg).is_err());
        let mut cfg = small_config();
        cfg.sample_sweep = vec![50, 5];
        assert!(run_benchmark(&cfg).is_err());
        let mut cfg = small_config();
        cfg.sample_sweep = vec![0, 5];
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn csv_files() {
        let dir = tempfile::tempdir().unwrap();
        let empty = dir.path().join("empty.csv");
        write_records(&[], &empty).unwrap();
        assert_eq!(std::fs::read_to_string(&empty).unwrap(), format!("{CSV_HEADER}\n"));
        assert!(read_records(&empty).unwrap().is_empty());

        let one = BenchRecord {
            run_id: 0,
            samples_per_bin: 20,
            seed: 7,
            avg_deviation: 0.1 + 0.2,
            p_err: 1e-17,
            q_err: 1.0 / 3.0,
            w_err: 0.0,
        };
        let path = dir.path().join("one.csv");
        write_records(std::slice::from_ref(&one), &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), 2);
        assert!(text.ends_with('\n'));
        assert_eq!(read_records(&path).unwrap(), vec![one]);
    }

    #[test]
    fn csv_round_trip_of_a_run() {
        let recs = run_benchmark(&small_config()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.csv");
        write_records(&recs, &path).unwrap();
        assert_eq!(read_records(&path).unwrap(), recs);
    }

    #[test]
    fn median_values() {
        assert_eq!(median(&mut [3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&mut [4.0, 1.0, 2.0, 3.0]), 2.5);
    }

    #[test]
    fn config_json() {
        let cfg: BenchConfig = serde_json::from_str(
            r#"{"K":5,"L":2,"N":5,"sample_sweep":[20,100,500,2500],"mc_runs":100,"master_seed":1}"#,
        )
        .unwrap();
        assert_eq!(cfg, BenchConfig::reference(1));
    }
}
