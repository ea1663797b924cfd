//! Run directories and their CSV files.
//!
//! Nothing written here depends on wall-clock time, so identical configs
//! and seeds give byte-identical files.

use std::fs;
use std::path::{Path, PathBuf};

use molsrl_core::ccs::PartialCcs;
use molsrl_core::solver::CurvePoint;

use crate::config::ExperimentConfig;
use crate::experiment::{summarise, CurveRow, ExperimentResult, SeedRun, SweepRow};
use crate::HarnessError;

pub const RUNS_DIR_VAR: &str = "MOLSRL_RUNS_DIR";

/// `$MOLSRL_RUNS_DIR`, or `runs` under the working directory.
pub fn runs_root() -> PathBuf {
    std::env::var_os(RUNS_DIR_VAR).map_or_else(|| PathBuf::from("runs"), PathBuf::from)
}

fn num(x: f64) -> String {
    format!("{x}")
}

fn writer(path: &Path) -> Result<csv::Writer<fs::File>, HarnessError> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| HarnessError::io(parent, e))?;
    }
    csv::Writer::from_path(path).map_err(|source| HarnessError::Csv {
        path: path.to_path_buf(),
        source,
    })
}

fn write_rows<I, R>(path: &Path, header: &[String], rows: I) -> Result<(), HarnessError>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator<Item = String>,
{
    let wrap = |source| HarnessError::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut w = writer(path)?;
    w.write_record(header).map_err(wrap)?;
    for row in rows {
        w.write_record(row.into_iter().collect::<Vec<_>>())
            .map_err(wrap)?;
    }
    w.flush().map_err(|e| HarnessError::io(path, e))
}

fn indexed(prefix: &str, n: usize) -> impl Iterator<Item = String> + '_ {
    (1..=n).map(move |i| format!("{prefix}{i}"))
}

/// `v1..vn, w1..wn, iteration, source`; weight and iteration are the
/// provenance of each vector, empty when it has none.
pub fn write_ccs(path: &Path, ccs: &PartialCcs, source: &str) -> Result<(), HarnessError> {
    let n = ccs.dim().unwrap_or(2);
    let mut header: Vec<String> = indexed("v", n).chain(indexed("w", n)).collect();
    header.extend(["iteration".into(), "source".into()]);
    let rows = ccs.iter().map(|v| {
        let mut row: Vec<String> = v.components().iter().map(|&c| num(c)).collect();
        match v.provenance() {
            Some(p) => {
                row.extend(p.weight.components().iter().map(|&c| num(c)));
                row.push(p.iteration.to_string());
            }
            None => row.extend(std::iter::repeat_n(String::new(), n + 1)),
        }
        row.push(source.to_string());
        row
    });
    write_rows(path, &header, rows)
}

pub fn write_iterations(path: &Path, run: &SeedRun) -> Result<(), HarnessError> {
    let n = run.rows.first().map_or(2, |r| r.weight.len());
    let mut header = vec!["iteration".to_string()];
    header.extend(indexed("w", n));
    header.push("priority".into());
    header.extend(indexed("v", n));
    header.extend(
        [
            "accepted",
            "ccs_size",
            "queue_size",
            "removed",
            "max_ccs_error",
            "error_w1",
            "model",
        ]
        .map(String::from),
    );
    let rows = run.rows.iter().map(|r| {
        let mut row = vec![r.iteration.to_string()];
        row.extend(r.weight.iter().map(|&c| num(c)));
        row.push(num(r.priority));
        row.extend(r.value.iter().map(|&c| num(c)));
        row.extend([
            r.accepted.to_string(),
            r.ccs_size.to_string(),
            r.queue_size.to_string(),
            r.removed.to_string(),
            num(r.max_ccs_error),
            num(r.error_weight[0]),
            r.model.clone().unwrap_or_default(),
        ]);
        row
    });
    write_rows(path, &header, rows)
}

pub fn write_training_curve(path: &Path, curve: &[CurvePoint]) -> Result<(), HarnessError> {
    let header = ["episode", "epsilon", "loss", "scalarised_return"].map(String::from);
    let rows = curve.iter().map(|p| {
        [
            p.episode.to_string(),
            num(p.epsilon),
            p.loss.map(num).unwrap_or_default(),
            num(p.scalarised_return),
        ]
    });
    write_rows(path, &header, rows)
}

pub fn write_error_curve(path: &Path, curve: &[CurveRow]) -> Result<(), HarnessError> {
    let header = ["iteration", "episodes", "mean", "std", "runs"].map(String::from);
    let rows = curve.iter().map(|r| {
        [
            r.iteration.to_string(),
            r.episodes.to_string(),
            num(r.mean),
            num(r.std),
            r.runs.to_string(),
        ]
    });
    write_rows(path, &header, rows)
}

pub fn write_sweep(path: &Path, rows: &[SweepRow]) -> Result<(), HarnessError> {
    let header = ["episodes", "mean_final_error", "std", "runs"].map(String::from);
    let rows = rows.iter().map(|r| {
        [
            r.episodes.to_string(),
            num(r.mean),
            num(r.std),
            r.runs.to_string(),
        ]
    });
    write_rows(path, &header, rows)
}

pub fn write_config(dir: &Path, config: &ExperimentConfig) -> Result<(), HarnessError> {
    fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
    let path = dir.join("config.toml");
    fs::write(&path, config.to_toml()).map_err(|e| HarnessError::io(path, e))
}

/// `iterations.csv`, `ccs.csv`, `curves/iteration-NNN.csv` and
/// `models/<sha256>.bin` for one seed.
pub fn write_seed_run(dir: &Path, run: &SeedRun) -> Result<(), HarnessError> {
    write_iterations(&dir.join("iterations.csv"), run)?;
    write_ccs(&dir.join("ccs.csv"), &run.ccs, "learned")?;
    for (row, curve) in run.rows.iter().zip(&run.curves) {
        if !curve.is_empty() {
            write_training_curve(
                &dir.join("curves")
                    .join(format!("iteration-{:03}.csv", row.iteration)),
                curve,
            )?;
        }
    }
    if !run.models.is_empty() {
        let models = dir.join("models");
        fs::create_dir_all(&models).map_err(|e| HarnessError::io(&models, e))?;
        for (hash, bytes) in &run.models {
            let path = models.join(format!("{hash}.bin"));
            fs::write(&path, bytes).map_err(|e| HarnessError::io(path, e))?;
        }
    }
    Ok(())
}

pub fn seed_dir(run_dir: &Path, seed: u64) -> PathBuf {
    run_dir.join(format!("seed-{seed}"))
}

/// Full experiment layout: config, reference CCS, per-seed directories and
/// the aggregated error curve.
pub fn write_experiment(
    dir: &Path,
    config: &ExperimentConfig,
    result: &ExperimentResult,
) -> Result<(), HarnessError> {
    write_config(dir, config)?;
    write_ccs(&dir.join("reference_ccs.csv"), &result.truth, "exact")?;
    for run in &result.runs {
        write_seed_run(&seed_dir(dir, run.seed), run)?;
    }
    write_error_curve(&dir.join("error_curve.csv"), &result.curve)
}

/// The `max_ccs_error` column of an `iterations.csv`.
pub fn read_iteration_errors(path: &Path) -> Result<Vec<f64>, HarnessError> {
    let wrap = |source| HarnessError::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut reader = csv::Reader::from_path(path).map_err(wrap)?;
    let column = reader
        .headers()
        .map_err(wrap)?
        .iter()
        .position(|h| h == "max_ccs_error")
        .ok_or_else(|| HarnessError::Parse {
            path: path.to_path_buf(),
            message: "no max_ccs_error column".into(),
        })?;
    let mut errors = Vec::new();
    for record in reader.records() {
        let record = record.map_err(wrap)?;
        let value = record.get(column).unwrap_or_default();
        errors.push(value.parse().map_err(|_| HarnessError::Parse {
            path: path.to_path_buf(),
            message: format!("bad error value {value:?}"),
        })?);
    }
    Ok(errors)
}

/// Recompute `error_curve.csv` of an experiment directory from its
/// per-seed files.
pub fn rebuild_error_curve(dir: &Path) -> Result<Vec<CurveRow>, HarnessError> {
    let config = ExperimentConfig::load(&dir.join("config.toml"))?;
    let mut errors = Vec::with_capacity(config.seeds.len());
    for &seed in &config.seeds {
        errors.push(read_iteration_errors(
            &seed_dir(dir, seed).join("iterations.csv"),
        )?);
    }
    let episodes = if config.algorithm == crate::Algorithm::Exact {
        0
    } else {
        config.episodes()
    };
    let curve = summarise(&errors, episodes);
    write_error_curve(&dir.join("error_curve.csv"), &curve)?;
    Ok(curve)
}
