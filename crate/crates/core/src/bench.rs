//! Monte-Carlo grid over simulation settings, tallying verdicts per cell.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::direction::{detect, DirectionConfig, Verdict};
use crate::error::{invalid, Error, Result};
use crate::io::atomic_write;
use crate::simulate::{derive_seed, simulate, SimConfig, DEFAULT_BURN_IN, DEFAULT_LAMBDA};

pub const CSV_HEADER: &str = "r,k,p,t,gaussian_fraction,trials,correct,incorrect,undecided,mean_fw,mean_bw,errors";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub r_values: Vec<f64>,
    pub k_values: Vec<usize>,
    pub p_values: Vec<usize>,
    pub t_values: Vec<usize>,
    pub gaussian_fraction_values: Vec<f64>,
    pub trials_per_cell: usize,
    pub direction: DirectionConfig,
    pub base_seed: u64,
    pub lambda: f64,
    pub burn_in: usize,
}

impl GridSpec {
    /// A grid with default direction settings, lambda and burn-in.
    pub fn new(
        r_values: Vec<f64>,
        k_values: Vec<usize>,
        p_values: Vec<usize>,
        t_values: Vec<usize>,
        gaussian_fraction_values: Vec<f64>,
        trials_per_cell: usize,
        base_seed: u64,
    ) -> Self {
        Self {
            r_values,
            k_values,
            p_values,
            t_values,
            gaussian_fraction_values,
            trials_per_cell,
            direction: DirectionConfig::default(),
            base_seed,
            lambda: DEFAULT_LAMBDA,
            burn_in: DEFAULT_BURN_IN,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.r_values.is_empty()
            || self.k_values.is_empty()
            || self.p_values.is_empty()
            || self.t_values.is_empty()
            || self.gaussian_fraction_values.is_empty()
        {
            return Err(invalid("every grid parameter list must be nonempty"));
        }
        if self.trials_per_cell == 0 {
            return Err(invalid("trials_per_cell must be at least 1"));
        }
        if self.gaussian_fraction_values.iter().any(|f| !(0.0..=1.0).contains(f)) {
            return Err(invalid("gaussian fractions must lie in [0, 1]"));
        }
        self.direction.validate()
    }

    /// Cells in row-major order over (r, k, p, t, gaussian_fraction).
    pub fn cells(&self) -> Vec<Cell> {
        let mut out = Vec::new();
        for &r in &self.r_values {
            for &k in &self.k_values {
                for &p in &self.p_values {
                    for &t in &self.t_values {
                        for &gaussian_fraction in &self.gaussian_fraction_values {
                            out.push(Cell {
                                r,
                                k,
                                p,
                                t,
                                gaussian_fraction,
                            });
                        }
                    }
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub r: f64,
    pub k: usize,
    pub p: usize,
    pub t: usize,
    pub gaussian_fraction: f64,
}

impl Cell {
    /// Number of leading components given Gaussian noise: `ceil(f K)`.
    pub fn gaussian_count(&self) -> usize {
        // tolerate representation error such as 0.6 * 5 = 3.0000000000000004
        let raw = self.gaussian_fraction * self.k as f64;
        ((raw - 1e-9).ceil().max(0.0) as usize).min(self.k)
    }

    pub fn sim_config(&self, spec: &GridSpec, seed: u64) -> SimConfig {
        SimConfig {
            k: self.k,
            p: self.p,
            t: self.t,
            lambda: spec.lambda,
            r: vec![self.r; self.k],
            gaussian_dims: (0..self.gaussian_count()).collect(),
            burn_in: spec.burn_in,
            seed,
        }
    }
}

/// One row of the results table. `correct + incorrect + undecided + errors == trials`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub r: f64,
    pub k: usize,
    pub p: usize,
    pub t: usize,
    pub gaussian_fraction: f64,
    pub trials: usize,
    pub correct: usize,
    pub incorrect: usize,
    pub undecided: usize,
    /// Mean scores over trials that produced a verdict; empty when none did.
    pub mean_fw: Option<f64>,
    pub mean_bw: Option<f64>,
    pub errors: usize,
}

enum Outcome {
    Verdict { verdict: Verdict, fw: f64, bw: f64 },
    Failed,
}

fn run_trial(spec: &GridSpec, cell: &Cell, cell_idx: usize, trial: usize) -> Outcome {
    let seed = derive_seed(spec.base_seed, cell_idx as u64, trial as u64);
    let result = simulate(&cell.sim_config(spec, seed)).and_then(|sim| detect(&sim.series, &spec.direction, seed));
    match result {
        Ok(report) => Outcome::Verdict {
            verdict: report.verdict,
            fw: report.fw_score,
            bw: report.bw_score,
        },
        Err(_) => Outcome::Failed,
    }
}

/// Simulates every trial (true direction: forward), runs detection and tallies
/// the verdicts. Trials run in parallel; the reduction is in (cell, trial)
/// order so the output does not depend on scheduling.
pub fn run_grid(spec: &GridSpec) -> Result<Vec<CellResult>> {
    spec.validate()?;
    let cells = spec.cells();
    let jobs: Vec<(usize, usize)> = (0..cells.len())
        .flat_map(|c| (0..spec.trials_per_cell).map(move |t| (c, t)))
        .collect();
    let outcomes: Vec<Outcome> = jobs
        .par_iter()
        .map(|&(c, t)| run_trial(spec, &cells[c], c, t))
        .collect();

    Ok(cells
        .iter()
        .zip(outcomes.chunks(spec.trials_per_cell))
        .map(|(cell, chunk)| {
            let mut res = CellResult {
                r: cell.r,
                k: cell.k,
                p: cell.p,
                t: cell.t,
                gaussian_fraction: cell.gaussian_fraction,
                trials: spec.trials_per_cell,
                correct: 0,
                incorrect: 0,
                undecided: 0,
                mean_fw: None,
                mean_bw: None,
                errors: 0,
            };
            let (mut sum_fw, mut sum_bw, mut n) = (0.0, 0.0, 0usize);
            for o in chunk {
                match o {
                    Outcome::Verdict { verdict, fw, bw } => {
                        match verdict {
                            Verdict::Forward => res.correct += 1,
                            Verdict::Backward => res.incorrect += 1,
                            Verdict::Undecided => res.undecided += 1,
                        }
                        sum_fw += fw;
                        sum_bw += bw;
                        n += 1;
                    }
                    Outcome::Failed => res.errors += 1,
                }
            }
            if n > 0 {
                res.mean_fw = Some(sum_fw / n as f64);
                res.mean_bw = Some(sum_bw / n as f64);
            }
            res
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Csv,
    Json,
}

pub fn results_to_csv(results: &[CellResult]) -> Result<String> {
    let mut wtr = csv::WriterBuilder::new()
        .has_headers(true)
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    for r in results {
        wtr.serialize(r).map_err(|e| Error::Io(std::io::Error::other(e)))?;
    }
    let bytes = wtr
        .into_inner()
        .map_err(|e| Error::Io(std::io::Error::other(e.to_string())))?;
    String::from_utf8(bytes).map_err(|e| Error::Io(std::io::Error::other(e)))
}

pub fn results_to_json(results: &[CellResult]) -> Result<String> {
    let mut s = serde_json::to_string_pretty(results).map_err(|e| Error::Io(e.into()))?;
    s.push('\n');
    Ok(s)
}

pub fn parse_results_csv(text: &str) -> Result<Vec<CellResult>> {
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    rdr.deserialize()
        .enumerate()
        .map(|(i, rec)| {
            rec.map_err(|e| Error::Parse {
                row: i + 2,
                col: None,
                message: e.to_string(),
            })
        })
        .collect()
}

pub fn parse_results_json(text: &str) -> Result<Vec<CellResult>> {
    serde_json::from_str(text).map_err(|e| Error::Parse {
        row: e.line(),
        col: Some(e.column()),
        message: e.to_string(),
    })
}

/// Writes the table atomically. Fails before touching the file system when
/// there is nothing to write.
pub fn emit_results(results: &[CellResult], format: OutputFormat, path: &Path) -> Result<()> {
    if results.is_empty() {
        return Err(invalid("no results to write"));
    }
    let text = match format {
        OutputFormat::Csv => results_to_csv(results)?,
        OutputFormat::Json => results_to_json(results)?,
    };
    atomic_write(path, text.as_bytes())
}
