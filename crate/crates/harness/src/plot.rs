//! Declarative plot descriptions: which CSV columns to draw, not pixels.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::HarnessError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Series {
    pub label: String,
    pub data: PathBuf,
    pub x: String,
    pub y: String,
    /// Column holding a symmetric error band, if any.
    pub band: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Figure {
    pub id: String,
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub series: Vec<Series>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlotDescription {
    pub format: String,
    pub figures: Vec<Figure>,
}

fn figure(id: &str, title: &str, x_label: &str) -> Figure {
    Figure {
        id: id.into(),
        title: title.into(),
        x_label: x_label.into(),
        y_label: "max CCS error".into(),
        series: Vec::new(),
    }
}

/// One figure per curve kind, one series per run directory that has it.
pub fn describe(runs: &[PathBuf]) -> Result<PlotDescription, HarnessError> {
    let mut by_iteration = figure(
        "error-by-iteration",
        "Max CCS error per OLS iteration",
        "iteration",
    );
    let mut by_episodes = figure(
        "error-by-episodes",
        "Max CCS error per episode budget",
        "episodes",
    );
    let mut sweep = figure(
        "episodes-sweep",
        "Final max CCS error per episodes per iteration",
        "episodes per iteration",
    );
    for dir in runs {
        let config = ExperimentConfig::load(&dir.join("config.toml"))?;
        let label = format!("{} {}", config.algorithm.name(), config.environment.name());
        let curve = dir.join("error_curve.csv");
        if curve.exists() {
            for (fig, x) in [
                (&mut by_iteration, "iteration"),
                (&mut by_episodes, "episodes"),
            ] {
                fig.series.push(Series {
                    label: label.clone(),
                    data: curve.clone(),
                    x: x.into(),
                    y: "mean".into(),
                    band: Some("std".into()),
                });
            }
        }
        let sweep_csv = dir.join("sweep.csv");
        if sweep_csv.exists() {
            sweep.series.push(Series {
                label,
                data: sweep_csv,
                x: "episodes".into(),
                y: "mean_final_error".into(),
                band: Some("std".into()),
            });
        }
    }
    let figures: Vec<Figure> = [by_iteration, by_episodes, sweep]
        .into_iter()
        .filter(|f| !f.series.is_empty())
        .collect();
    if figures.is_empty() {
        return Err(HarnessError::Parse {
            path: runs.first().cloned().unwrap_or_default(),
            message: "no error_curve.csv or sweep.csv to plot".into(),
        });
    }
    Ok(PlotDescription {
        format: "molsrl-plot/1".into(),
        figures,
    })
}

pub fn write_description(path: &Path, description: &PlotDescription) -> Result<(), HarnessError> {
    let text = serde_json::to_string_pretty(description).expect("description serialises");
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(|e| HarnessError::io(parent, e))?;
    }
    std::fs::write(path, text + "\n").map_err(|e| HarnessError::io(path, e))
}
